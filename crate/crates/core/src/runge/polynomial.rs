use num_complex::Complex;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::exact::{self, ComplexRational, Rational};
use crate::numeric::{format_dd, parse_dd};

type Cdd = Complex<TwoFloat>;

/// `sum_k c_k ((z - center) / scale)^k` with double-double coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexPolynomial {
    #[serde(with = "exact::serde_complex_rat")]
    center: ComplexRational,
    #[serde(with = "exact::serde_rat")]
    scale: Rational,
    #[serde(with = "serde_coeffs")]
    coeffs: Vec<Cdd>,
}

fn czero() -> Cdd {
    Complex::new(TwoFloat::from(0.0), TwoFloat::from(0.0))
}

fn is_zero(c: &Cdd) -> bool {
    c.re.hi() == 0.0 && c.re.lo() == 0.0 && c.im.hi() == 0.0 && c.im.lo() == 0.0
}

impl ComplexPolynomial {
    pub fn new(center: ComplexRational, scale: Rational, mut coeffs: Vec<Cdd>) -> Result<Self> {
        if scale <= Rational::zero() {
            return Err(Error::Parameter("polynomial scale must be positive".into()));
        }
        if coeffs
            .iter()
            .any(|c| !(c.re.hi().is_finite() && c.im.hi().is_finite()))
        {
            return Err(Error::Parameter("non-finite polynomial coefficient".into()));
        }
        while coeffs.last().is_some_and(is_zero) {
            coeffs.pop();
        }
        Ok(Self {
            center,
            scale,
            coeffs,
        })
    }

    pub fn zero() -> Self {
        Self::constant(czero())
    }

    pub fn constant(c: Cdd) -> Self {
        Self::new(exact::complex_zero(), Rational::one(), vec![c]).expect("valid constant")
    }

    pub fn constant_f64(re: f64, im: f64) -> Self {
        Self::constant(Complex::new(TwoFloat::from(re), TwoFloat::from(im)))
    }

    /// A polynomial in `z` from exact monomial coefficients (rounded to double-double).
    pub fn from_monomials(coeffs: &[ComplexRational]) -> Self {
        let coeffs = coeffs.iter().map(exact::complex_to_dd).collect();
        Self::new(exact::complex_zero(), Rational::one(), coeffs).expect("unit scale")
    }

    /// The affine map `(z - a) / (b - a)` expressed in the basis centred at `a`.
    pub fn affine(a: &ComplexRational, b: &ComplexRational) -> Result<Self> {
        let d = b - a;
        if d.re.is_zero() && d.im.is_zero() {
            return Err(Error::Parameter("affine map with coinciding anchors".into()));
        }
        let n2 = &d.re * &d.re + &d.im * &d.im;
        let inv = Complex::new(&d.re / &n2, -&d.im / &n2);
        Self::new(
            a.clone(),
            Rational::one(),
            vec![czero(), exact::complex_to_dd(&inv)],
        )
    }

    pub fn center(&self) -> &ComplexRational {
        &self.center
    }

    pub fn scale(&self) -> &Rational {
        &self.scale
    }

    pub fn coeffs(&self) -> &[Cdd] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Whether both represent the same function with identical coefficients; constants
    /// compare equal regardless of centre and scale.
    pub fn same_function(&self, other: &Self) -> bool {
        self.coeffs == other.coeffs
            && (self.degree() == 0 || (self.center == other.center && self.scale == other.scale))
    }

    /// Constants are re-expressed with centre 0 and scale 1; other polynomials are unchanged.
    pub fn canonical(self) -> Self {
        if self.degree() == 0 {
            Self {
                center: exact::complex_zero(),
                scale: Rational::one(),
                coeffs: self.coeffs,
            }
        } else {
            self
        }
    }

    /// `z -> p(z - shift)`, exact: only the centre moves.
    pub fn shifted(&self, shift: &ComplexRational) -> Self {
        Self {
            center: &self.center + shift,
            scale: self.scale.clone(),
            coeffs: self.coeffs.clone(),
        }
    }

    pub fn evaluator(&self) -> Evaluator {
        Evaluator {
            center: exact::complex_to_dd(&self.center),
            inv_scale: exact::to_dd(&(Rational::one() / &self.scale)),
            coeffs: self.coeffs.clone(),
        }
    }

    pub fn eval(&self, z: Cdd) -> Cdd {
        self.evaluator().eval(z)
    }

    pub fn eval_f64(&self, re: f64, im: f64) -> Complex<f64> {
        let v = self.eval(Complex::new(TwoFloat::from(re), TwoFloat::from(im)));
        Complex::new(v.re.hi() + v.re.lo(), v.im.hi() + v.im.lo())
    }

    /// Evaluates at an exact point, forming `(z - center) / scale` exactly first.
    pub fn eval_exact(&self, z: &ComplexRational) -> Cdd {
        let w = (z - &self.center) / Complex::new(self.scale.clone(), Rational::zero());
        horner(&self.coeffs, exact::complex_to_dd(&w))
    }

    /// Derivative with respect to `z`.
    pub fn derivative(&self) -> Self {
        let inv = exact::to_dd(&(Rational::one() / &self.scale));
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c.scale(inv * TwoFloat::from(k as f64)))
            .collect();
        Self::new(self.center.clone(), self.scale.clone(), coeffs).expect("same scale")
    }

    /// Sum of coefficient magnitudes, an upper bound for `|p|` on `|z - center| <= scale`.
    pub fn coefficient_norm(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|c| {
                let re = c.re.hi() + c.re.lo();
                let im = c.im.hi() + c.im.lo();
                re.hypot(im)
            })
            .sum()
    }
}

fn horner(coeffs: &[Cdd], w: Cdd) -> Cdd {
    coeffs.iter().rev().fold(czero(), |acc, c| acc * w + c)
}

/// Pre-converted evaluation data for repeated evaluation in double-double.
#[derive(Debug, Clone)]
pub struct Evaluator {
    center: Cdd,
    inv_scale: TwoFloat,
    coeffs: Vec<Cdd>,
}

impl Evaluator {
    pub fn eval(&self, z: Cdd) -> Cdd {
        horner(&self.coeffs, (z - self.center).scale(self.inv_scale))
    }
}

mod serde_coeffs {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Cdd], s: S) -> std::result::Result<S::Ok, S::Error> {
        v.iter()
            .map(|c| [format_dd(c.re), format_dd(c.im)])
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Cdd>, D::Error> {
        Vec::<[String; 2]>::deserialize(d)?
            .iter()
            .map(|[re, im]| {
                let re = parse_dd(re).map_err(serde::de::Error::custom)?;
                let im = parse_dd(im).map_err(serde::de::Error::custom)?;
                Ok(Complex::new(re, im))
            })
            .collect()
    }
}
