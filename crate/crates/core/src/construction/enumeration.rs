//! A deterministic enumeration of all polynomials with Gaussian-rational coefficients.
//!
//! A coefficient `(a + b i) / q` in lowest terms has height `max(|a|, |b|, q)`. A
//! polynomial of degree `D` has weight `max(D + 1, max height)`. Weights are visited in
//! increasing order; within a weight, by degree, then lexicographically from the leading
//! coefficient down, each coefficient keyed by `(height, q, |a| + |b|, a, b)`.

use num_bigint::BigInt;
use num_complex::Complex;
use num_integer::Integer;

use crate::exact::{ComplexRational, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Coefficient {
    height: i64,
    q: i64,
    l1: i64,
    a: i64,
    b: i64,
}

impl Coefficient {
    fn new(a: i64, b: i64, q: i64) -> Self {
        Self {
            height: a.abs().max(b.abs()).max(q),
            q,
            l1: a.abs() + b.abs(),
            a,
            b,
        }
    }

    fn is_zero(&self) -> bool {
        self.a == 0 && self.b == 0
    }

    fn value(&self) -> ComplexRational {
        Complex::new(
            Rational::new(BigInt::from(self.a), BigInt::from(self.q)),
            Rational::new(BigInt::from(self.b), BigInt::from(self.q)),
        )
    }
}

fn coefficients_up_to(h: i64) -> Vec<Coefficient> {
    let mut out = Vec::new();
    for q in 1..=h {
        for a in -h..=h {
            for b in -h..=h {
                if a.gcd(&b).gcd(&q) == 1 || (a == 0 && b == 0 && q == 1) {
                    out.push(Coefficient::new(a, b, q));
                }
            }
        }
    }
    out.sort();
    out
}

/// Iterator over monomial coefficient lists `[c_0, ..., c_D]`.
#[derive(Debug, Clone)]
pub struct PolynomialEnumeration {
    weight: i64,
    degree: usize,
    values: Vec<Coefficient>,
    /// Odometer over indices into `values`, most significant digit = leading coefficient.
    digits: Vec<usize>,
    fresh: bool,
}

impl Default for PolynomialEnumeration {
    fn default() -> Self {
        Self::new()
    }
}

impl PolynomialEnumeration {
    pub fn new() -> Self {
        Self {
            weight: 1,
            degree: 0,
            values: coefficients_up_to(1),
            digits: vec![0],
            fresh: true,
        }
    }

    fn advance(&mut self) {
        if self.fresh {
            self.fresh = false;
            return;
        }
        for pos in (0..self.digits.len()).rev() {
            self.digits[pos] += 1;
            if self.digits[pos] < self.values.len() {
                return;
            }
            self.digits[pos] = 0;
        }
        self.degree += 1;
        if self.degree as i64 >= self.weight {
            self.weight += 1;
            self.degree = 0;
            self.values = coefficients_up_to(self.weight);
        }
        self.digits = vec![0; self.degree + 1];
    }

    fn current_is_valid(&self) -> bool {
        let lead = &self.values[self.digits[0]];
        if self.degree > 0 && lead.is_zero() {
            return false;
        }
        let h = self
            .digits
            .iter()
            .map(|&d| self.values[d].height)
            .max()
            .unwrap_or(0);
        h.max(self.degree as i64 + 1) == self.weight
    }
}

impl Iterator for PolynomialEnumeration {
    type Item = Vec<ComplexRational>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.advance();
            if self.current_is_valid() {
                return Some(self.digits.iter().rev().map(|&d| self.values[d].value()).collect());
            }
        }
    }
}

/// The `n`-th polynomial of the enumeration, `n >= 1`.
pub fn nth_polynomial(n: usize) -> Vec<ComplexRational> {
    assert!(n >= 1, "enumeration is 1-based");
    PolynomialEnumeration::new().nth(n - 1).expect("infinite enumeration")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{complex, int};
    use std::collections::BTreeSet;

    #[test]
    fn first_entries() {
        let first: Vec<_> = PolynomialEnumeration::new().take(5).collect();
        assert_eq!(first[0], vec![complex(int(0), int(0))]);
        assert_eq!(first[1], vec![complex(int(-1), int(0))]);
        assert_eq!(first[2], vec![complex(int(0), int(-1))]);
        assert_eq!(first.len(), 5);
        let one = |c: &ComplexRational| c.re.denom() == &BigInt::from(1) && c.re.numer().magnitude() <= &1u32.into() && c.im.numer().magnitude() <= &1u32.into() && c.im.denom() == &BigInt::from(1);
        let weight_one = PolynomialEnumeration::new().take_while(|p| p.len() == 1 && one(&p[0])).count();
        assert_eq!(weight_one, 9);
    }

    #[test]
    fn no_repeats_and_contains_z() {
        let seen: Vec<_> = PolynomialEnumeration::new().take(3000).collect();
        let keys: BTreeSet<String> = seen.iter().map(|p| format!("{p:?}")).collect();
        assert_eq!(keys.len(), seen.len());
        let z = vec![complex(int(0), int(0)), complex(int(1), int(0))];
        assert!(seen.contains(&z));
        assert!(seen.iter().all(|p| p.len() == 1 || p.last() != Some(&complex(int(0), int(0)))));
    }

    #[test]
    fn deterministic() {
        assert_eq!(nth_polynomial(40), nth_polynomial(40));
    }
}
