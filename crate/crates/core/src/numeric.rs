//! Floating-point kernels: a scalar abstraction over `f64` and double-double, and a
//! complex Householder least-squares solver.

use std::fmt::Debug;
use std::ops::Neg;

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::error::{Error, Result};

/// Working precision of the least-squares solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Precision {
    Double,
    #[default]
    DoubleDouble,
}

impl Precision {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "double" | "f64" | "53" => Ok(Precision::Double),
            "double-double" | "dd" | "106" => Ok(Precision::DoubleDouble),
            other => Err(Error::Parse(format!("unknown precision {other:?}"))),
        }
    }

    pub fn mantissa_bits(self) -> u32 {
        match self {
            Precision::Double => 53,
            Precision::DoubleDouble => 106,
        }
    }
}

pub trait Real:
    num_traits::Num + Copy + PartialOrd + Neg<Output = Self> + Debug + Send + Sync + 'static
{
    fn from_f64(x: f64) -> Self;
    fn from_dd(x: TwoFloat) -> Self;
    fn to_f64(self) -> f64;
    fn to_dd(self) -> TwoFloat;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    /// Division correct to the working precision.
    fn quo(self, other: Self) -> Self;
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn from_dd(x: TwoFloat) -> Self {
        x.hi() + x.lo()
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn to_dd(self) -> TwoFloat {
        TwoFloat::from(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn quo(self, other: Self) -> Self {
        self / other
    }
}

impl Real for TwoFloat {
    fn from_f64(x: f64) -> Self {
        TwoFloat::from(x)
    }
    fn from_dd(x: TwoFloat) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self.hi() + self.lo()
    }
    fn to_dd(self) -> TwoFloat {
        self
    }
    fn sqrt(self) -> Self {
        TwoFloat::sqrt(self)
    }
    fn abs(self) -> Self {
        TwoFloat::abs(&self)
    }
    fn quo(self, other: Self) -> Self {
        dd_div(self, other)
    }
}

/// Double-double quotient by three steps of long division.
///
/// The `Div` implementation of `twofloat` 0.8 only returns a double-precision quotient.
pub fn dd_div(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    let q1 = a.hi() / b.hi();
    if !q1.is_finite() {
        return TwoFloat::from(q1);
    }
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    TwoFloat::new_add(q1, q2) + q3
}

/// Complex quotient using [`Real::quo`].
pub fn cdiv<T: Real>(a: Complex<T>, b: Complex<T>) -> Complex<T> {
    let den = b.norm_sqr();
    let num = a * b.conj();
    Complex::new(num.re.quo(den), num.im.quo(den))
}

pub fn cabs<T: Real>(z: Complex<T>) -> T {
    z.norm_sqr().sqrt()
}

pub fn dd_to_complex<T: Real>(z: Complex<TwoFloat>) -> Complex<T> {
    Complex::new(T::from_dd(z.re), T::from_dd(z.im))
}

pub fn complex_to_dd<T: Real>(z: Complex<T>) -> Complex<TwoFloat> {
    Complex::new(z.re.to_dd(), z.im.to_dd())
}

/// Shortest round-trip text for a double-double: `"hi"` or `"hi lo"`.
pub fn format_dd(x: TwoFloat) -> String {
    if x.lo() == 0.0 {
        format!("{:e}", x.hi())
    } else {
        format!("{:e} {:e}", x.hi(), x.lo())
    }
}

pub fn parse_dd(s: &str) -> Result<TwoFloat> {
    let mut parts = s.split_whitespace();
    let bad = || Error::Parse(format!("not a double-double: {s:?}"));
    let hi: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    let lo: f64 = match parts.next() {
        Some(p) => p.parse().map_err(|_| bad())?,
        None => 0.0,
    };
    if parts.next().is_some() || !hi.is_finite() || !lo.is_finite() {
        return Err(bad());
    }
    Ok(TwoFloat::new_add(hi, lo))
}

pub struct LeastSquares<T> {
    pub solution: Vec<Complex<T>>,
    /// Magnitudes of the diagonal of the triangular factor.
    pub r_diagonal: Vec<f64>,
}

impl<T> LeastSquares<T> {
    /// Ratio of the largest to the smallest nonzero diagonal entry of `R`.
    pub fn conditioning(&self) -> f64 {
        let nonzero: Vec<f64> = self.r_diagonal.iter().copied().filter(|v| *v > 0.0).collect();
        let max = nonzero.iter().copied().fold(0.0, f64::max);
        let min = nonzero.iter().copied().fold(f64::INFINITY, f64::min);
        if nonzero.is_empty() {
            f64::INFINITY
        } else {
            max / min
        }
    }
}

/// Minimises `|A x - b|_2` by Householder QR.
///
/// `columns` holds `A` column by column; all columns must have the length of `b`.
/// Columns whose pivot falls below `rank_tol` times the leading pivot are treated as
/// numerically dependent and get a zero coefficient.
pub fn least_squares<T: Real>(
    mut columns: Vec<Vec<Complex<T>>>,
    mut b: Vec<Complex<T>>,
    rank_tol: f64,
) -> LeastSquares<T> {
    let m = b.len();
    let n = columns.len();
    assert!(columns.iter().all(|c| c.len() == m), "ragged least-squares system");
    let zero = Complex::new(T::zero(), T::zero());
    let two = T::from_f64(2.0);
    let mut r_diag = vec![0.0; n];
    for k in 0..n.min(m) {
        let (head, tail) = columns.split_at_mut(k + 1);
        let col = &mut head[k];
        let norm = col[k..].iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt();
        if norm == T::zero() {
            continue;
        }
        let x0 = col[k];
        let x0_abs = cabs(x0);
        let phase = if x0_abs == T::zero() {
            Complex::new(T::one(), T::zero())
        } else {
            Complex::new(x0.re.quo(x0_abs), x0.im.quo(x0_abs))
        };
        let alpha = -phase.scale(norm);
        let mut v: Vec<Complex<T>> = col[k..].to_vec();
        v[0] = v[0] - alpha;
        let vnorm2 = v.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr());
        col[k] = alpha;
        for z in col[k + 1..].iter_mut() {
            *z = zero;
        }
        r_diag[k] = norm.to_f64();
        if vnorm2 == T::zero() {
            continue;
        }
        let reflect = |target: &mut [Complex<T>]| {
            let s = v
                .iter()
                .zip(target.iter())
                .fold(zero, |acc, (vi, ti)| acc + vi.conj() * *ti);
            let f = s.scale(two.quo(vnorm2));
            for (ti, vi) in target.iter_mut().zip(v.iter()) {
                *ti = *ti - f * *vi;
            }
        };
        for other in tail.iter_mut() {
            reflect(&mut other[k..]);
        }
        reflect(&mut b[k..]);
    }
    let lead = r_diag.iter().copied().fold(0.0, f64::max);
    let mut x = vec![zero; n];
    for k in (0..n.min(m)).rev() {
        if r_diag[k] <= rank_tol * lead || r_diag[k] == 0.0 {
            continue;
        }
        let mut acc = b[k];
        for j in k + 1..n {
            acc = acc - columns[j][k] * x[j];
        }
        x[k] = cdiv(acc, columns[k][k]);
    }
    LeastSquares {
        solution: x,
        r_diagonal: r_diag,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn solves_square_system() {
        let cols = vec![vec![c(2.0, 0.0), c(0.0, 1.0)], vec![c(1.0, 1.0), c(3.0, 0.0)]];
        let x_true = [c(1.0, -1.0), c(0.5, 2.0)];
        let b: Vec<_> = (0..2)
            .map(|i| cols[0][i] * x_true[0] + cols[1][i] * x_true[1])
            .collect();
        let ls = least_squares(cols, b, 1e-14);
        for (x, t) in ls.solution.iter().zip(x_true.iter()) {
            assert!((x - t).norm() < 1e-12);
        }
    }

    #[test]
    fn overdetermined_matches_normal_equations() {
        let pts: Vec<f64> = (0..7).map(|i| i as f64 / 3.0).collect();
        let cols: Vec<Vec<Complex<f64>>> = (0..3)
            .map(|k| pts.iter().map(|p| c(p.powi(k), 0.0)).collect())
            .collect();
        let b: Vec<_> = pts.iter().map(|p| c(p.exp(), 0.0)).collect();
        let ls = least_squares(cols.clone(), b.clone(), 1e-14);
        for k in 0..3 {
            let g: Complex<f64> = (0..pts.len())
                .map(|i| {
                    let r = b[i] - (0..3).map(|j| cols[j][i] * ls.solution[j]).sum::<Complex<f64>>();
                    cols[k][i].conj() * r
                })
                .sum();
            assert!(g.norm() < 1e-10, "gradient {k}: {g}");
        }
    }

    #[test]
    fn double_double_recovers_ill_conditioned_coefficients() {
        let pts: Vec<f64> = (0..40).map(|i| -1.0 + i as f64 / 20.0).collect();
        let deg = 20;
        let truth: Vec<f64> = (0..=deg).map(|k| 1.0 / (k as f64 + 1.0)).collect();
        let cols: Vec<Vec<Complex<TwoFloat>>> = (0..=deg)
            .map(|k| {
                pts.iter()
                    .map(|p| {
                        let x = (0..k).fold(TwoFloat::from(1.0), |acc, _| acc * TwoFloat::from(*p));
                        Complex::new(x, TwoFloat::from(0.0))
                    })
                    .collect()
            })
            .collect();
        let b: Vec<Complex<TwoFloat>> = (0..pts.len())
            .map(|i| (0..=deg).fold(Complex::new(TwoFloat::from(0.0), TwoFloat::from(0.0)), |acc, k| {
                acc + cols[k][i].scale(TwoFloat::from(truth[k]))
            }))
            .collect();
        let ls = least_squares(cols, b, 1e-30);
        for (x, t) in ls.solution.iter().zip(truth.iter()) {
            assert!((x.re.to_f64() - t).abs() < 1e-12);
        }
        assert!(ls.conditioning() > 1.0);
    }

    #[test]
    fn dd_division_is_double_double_accurate() {
        let one = TwoFloat::from(1.0);
        let three = TwoFloat::from(3.0);
        let q = dd_div(one, three);
        let resid = q * three - one;
        assert!(resid.hi().abs() < 1e-31, "{resid:?}");
        let a = TwoFloat::new_add(2.0, 1e-20);
        let b = TwoFloat::new_add(7.0, -3e-19);
        let r = dd_div(a, b) * b - a;
        assert!(r.hi().abs() < 1e-31, "{r:?}");
    }

    #[test]
    fn dd_text_round_trip() {
        let x = TwoFloat::new_add(1.0 / 3.0, 1e-20);
        let y = parse_dd(&format_dd(x)).unwrap();
        assert_eq!((x.hi(), x.lo()), (y.hi(), y.lo()));
        assert_eq!(format_dd(TwoFloat::from(1.5)), "1.5e0");
        assert!(parse_dd("1 2 3").is_err());
    }
}
