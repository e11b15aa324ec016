//! Exact rational helpers and their text encodings.
//!
//! Rationals are written as `"num/den"` in lowest terms; parsing also accepts plain
//! integers and terminating decimals such as `"0.125"`.

use num_bigint::BigInt;
use num_complex::Complex;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use twofloat::TwoFloat;

use crate::error::{Error, Result};

pub type Rational = BigRational;
pub type ComplexRational = Complex<Rational>;

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn half() -> Rational {
    ratio(1, 2)
}

/// `10^(-k)` for `k >= 0`.
pub fn ten_pow_neg(k: u32) -> Rational {
    Rational::new(BigInt::one(), num_traits::pow(BigInt::from(10), k as usize))
}

/// `2^(-k)` for `k >= 0`.
pub fn two_pow_neg(k: u32) -> Rational {
    Rational::new(BigInt::one(), BigInt::one() << k as usize)
}

pub fn pow(r: &Rational, k: usize) -> Rational {
    num_traits::pow(r.clone(), k)
}

pub fn floor_int(r: &Rational) -> BigInt {
    r.floor().to_integer()
}

pub fn ceil_int(r: &Rational) -> BigInt {
    r.ceil().to_integer()
}

pub fn from_bigint(n: &BigInt) -> Rational {
    Rational::from_integer(n.clone())
}

pub fn is_integer(r: &Rational) -> bool {
    r.denom().is_one()
}

/// Exact conversion of a finite double.
pub fn from_f64(x: f64) -> Rational {
    Rational::from_float(x).expect("finite double")
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Nearest double-double to `r`.
pub fn to_dd(r: &Rational) -> TwoFloat {
    let hi = to_f64(r);
    if !hi.is_finite() {
        return TwoFloat::from(hi);
    }
    let lo = to_f64(&(r - from_f64(hi)));
    TwoFloat::new_add(hi, lo)
}

/// Exact value of a double-double.
pub fn dd_to_rational(x: TwoFloat) -> Rational {
    from_f64(x.hi()) + from_f64(x.lo())
}

pub fn complex(re: Rational, im: Rational) -> ComplexRational {
    Complex::new(re, im)
}

pub fn complex_zero() -> ComplexRational {
    Complex::new(Rational::zero(), Rational::zero())
}

pub fn complex_to_dd(z: &ComplexRational) -> Complex<TwoFloat> {
    Complex::new(to_dd(&z.re), to_dd(&z.im))
}

pub fn min_rat<'a>(a: &'a Rational, b: &'a Rational) -> &'a Rational {
    if a <= b {
        a
    } else {
        b
    }
}

pub fn max_rat<'a>(a: &'a Rational, b: &'a Rational) -> &'a Rational {
    if a >= b {
        a
    } else {
        b
    }
}

/// Formats as `num/den` in lowest terms.
pub fn format(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `num/den`, an integer, or a terminating decimal.
pub fn parse(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not an exact rational: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let negative = whole.trim_start().starts_with('-');
        let w: BigInt = match whole {
            "" | "-" | "+" => BigInt::zero(),
            _ => whole.parse().map_err(|_| bad())?,
        };
        let f: BigInt = frac.parse().map_err(|_| bad())?;
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        let mag = Rational::new(w.abs() * &scale + f, scale);
        return Ok(if negative { -mag } else { mag });
    }
    s.parse::<BigInt>().map(Rational::from_integer).map_err(|_| bad())
}

pub fn parse_list(s: &str) -> Result<Vec<Rational>> {
    s.split(',').map(parse).collect()
}

/// Least common multiple of the denominators.
pub fn common_denominator<'a>(values: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    values
        .into_iter()
        .fold(BigInt::one(), |acc, r| acc.lcm(r.denom()))
}

/// Smallest `k/2^bits` that is at least `sqrt(r)`.
pub fn sqrt_upper(r: &Rational, bits: u32) -> Rational {
    assert!(!r.is_negative(), "square root of a negative rational");
    let scale = BigInt::one() << bits as usize;
    let approx = to_f64(r).sqrt() * (1u64 << bits) as f64;
    let mut k = BigInt::from(approx.ceil().max(0.0) as u64);
    let target = r * Rational::from_integer(&scale * &scale);
    let sq = |k: &BigInt| Rational::from_integer(k * k);
    while sq(&k) < target {
        k += 1;
    }
    while k > BigInt::zero() && sq(&(&k - 1)) >= target {
        k -= 1;
    }
    Rational::new(k, scale)
}

pub mod serde_rat {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse(&s).map_err(serde::de::Error::custom)
    }
}

pub mod serde_rat_opt {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        r: &Option<Rational>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        match r {
            Some(r) => s.serialize_some(&format(r)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Option<Rational>, D::Error> {
        let s = Option::<String>::deserialize(d)?;
        s.map(|s| parse(&s).map_err(serde::de::Error::custom))
            .transpose()
    }
}

pub mod serde_rat_vec {
    use super::*;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
        v.iter().map(format).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Vec<Rational>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| parse(s).map_err(serde::de::Error::custom))
            .collect()
    }
}

pub mod serde_rat_vec_vec {
    use super::*;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(
        v: &[Vec<Rational>],
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        v.iter()
            .map(|row| row.iter().map(format).collect::<Vec<_>>())
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Vec<Vec<Rational>>, D::Error> {
        Vec::<Vec<String>>::deserialize(d)?
            .iter()
            .map(|row| {
                row.iter()
                    .map(|s| parse(s).map_err(serde::de::Error::custom))
                    .collect()
            })
            .collect()
    }
}

pub mod serde_complex_rat {
    use super::*;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(
        z: &ComplexRational,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        [format(&z.re), format(&z.im)].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<ComplexRational, D::Error> {
        let [re, im] = <[String; 2]>::deserialize(d)?;
        let re = parse(&re).map_err(serde::de::Error::custom)?;
        let im = parse(&im).map_err(serde::de::Error::custom)?;
        Ok(Complex::new(re, im))
    }
}

pub mod serde_bigint_vec {
    use super::*;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigInt], s: S) -> std::result::Result<S::Ok, S::Error> {
        v.iter().map(|n| n.to_string()).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Vec<BigInt>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| s.parse().map_err(serde::de::Error::custom))
            .collect()
    }
}

pub mod serde_bigint_vec_opt {
    use super::*;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(
        v: &Option<Vec<BigInt>>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        v.as_ref()
            .map(|v| v.iter().map(|n| n.to_string()).collect::<Vec<_>>())
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Option<Vec<BigInt>>, D::Error> {
        Option::<Vec<String>>::deserialize(d)?
            .map(|v| {
                v.iter()
                    .map(|s| s.parse().map_err(serde::de::Error::custom))
                    .collect()
            })
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        assert_eq!(parse("3/6").unwrap(), ratio(1, 2));
        assert_eq!(parse("-7").unwrap(), int(-7));
        assert_eq!(parse("0.125").unwrap(), ratio(1, 8));
        assert_eq!(parse("-1.5").unwrap(), ratio(-3, 2));
        assert_eq!(parse("-0.5").unwrap(), ratio(-1, 2));
        assert!(parse("1/0").is_err());
        assert!(parse("abc").is_err());
        assert!(parse("1.").is_err());
    }

    #[test]
    fn format_round_trip() {
        for r in [ratio(-22, 7), int(0), int(5), ratio(1, 1024)] {
            assert_eq!(parse(&format(&r)).unwrap(), r);
        }
        assert_eq!(format(&int(3)), "3/1");
    }

    #[test]
    fn double_double_conversion_is_close() {
        let third = ratio(1, 3);
        let back = dd_to_rational(to_dd(&third));
        let err = to_f64(&(back - &third)).abs();
        assert!(err < 1e-32, "{err}");
    }

    #[test]
    fn sqrt_upper_is_tight() {
        let r = ratio(9, 2);
        let s = sqrt_upper(&r, 10);
        assert!(&s * &s >= r);
        let below = &s - ratio(1, 1024);
        assert!(&below * &below < r);
        assert_eq!(sqrt_upper(&int(4), 10), int(2));
    }

    #[test]
    fn powers() {
        assert_eq!(ten_pow_neg(0), int(1));
        assert_eq!(ten_pow_neg(3), ratio(1, 1000));
        assert_eq!(two_pow_neg(5), ratio(1, 32));
    }
}
