//! The `2d`-dimensional solenoid as an inverse limit of tori `R^{2d} / R_n Z^{2d}`,
//! truncated at a finite depth.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{self, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RadixSpec", into = "RadixSpec")]
pub struct RadixSequence {
    r: Vec<u64>,
    products: Vec<BigInt>,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct RadixSpec {
    r: Vec<u64>,
    dim: usize,
}

impl TryFrom<RadixSpec> for RadixSequence {
    type Error = Error;
    fn try_from(spec: RadixSpec) -> Result<Self> {
        RadixSequence::new(spec.r, spec.dim)
    }
}

impl From<RadixSequence> for RadixSpec {
    fn from(seq: RadixSequence) -> Self {
        RadixSpec {
            r: seq.r,
            dim: seq.dim,
        }
    }
}

/// Builds the radix sequence `r` acting on `R^{dim}`.
pub fn radix_products(r: &[u64], dim: usize) -> Result<RadixSequence> {
    RadixSequence::new(r.to_vec(), dim)
}

impl RadixSequence {
    pub fn new(r: Vec<u64>, dim: usize) -> Result<Self> {
        if r.is_empty() {
            return Err(Error::EmptyRadix);
        }
        if let Some((index, &value)) = r.iter().enumerate().find(|(_, v)| **v < 2) {
            return Err(Error::InvalidRadix { index, value });
        }
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::Parameter(format!(
                "real dimension must be a positive even number, got {dim}"
            )));
        }
        let mut products = vec![BigInt::one()];
        for &ri in &r {
            let next = products.last().unwrap() * BigInt::from(ri);
            products.push(next);
        }
        Ok(Self { r, products, dim })
    }

    pub fn radices(&self) -> &[u64] {
        &self.r
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `r_n` for `1 <= n <= len`.
    pub fn r(&self, n: usize) -> u64 {
        self.r[n - 1]
    }

    /// `R_n` for `0 <= n <= len`, with `R_0 = 1`.
    pub fn big_r(&self, n: usize) -> &BigInt {
        &self.products[n]
    }

    pub fn big_r_rat(&self, n: usize) -> Rational {
        exact::from_bigint(&self.products[n])
    }

    /// The cumulative products `R_1, ..., R_len`.
    pub fn products(&self) -> &[BigInt] {
        &self.products[1..]
    }

    /// `sum 1/r_n` over the stored prefix.
    pub fn sum_inv(&self) -> Rational {
        self.r
            .iter()
            .map(|ri| Rational::new(BigInt::one(), BigInt::from(*ri)))
            .sum()
    }
}

/// A point of the solenoid truncated at depth `N`: coordinates `t_n` in `[0, R_n)^{2d}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolenoidPoint {
    seq: RadixSequence,
    levels: Vec<Vec<Rational>>,
}

/// The decomposition `t_{n+1} = z + R_n i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileAddress {
    pub level: usize,
    pub index: Vec<u64>,
    #[serde(with = "exact::serde_rat_vec")]
    pub offset: Vec<Rational>,
}

impl TileAddress {
    pub fn reconstruct(&self, seq: &RadixSequence) -> Vec<Rational> {
        let big = seq.big_r_rat(self.level);
        self.offset
            .iter()
            .zip(&self.index)
            .map(|(z, i)| z + &big * exact::int(*i as i64))
            .collect()
    }
}

fn mod_rat(x: &Rational, m: &Rational) -> Rational {
    x - m * (x / m).floor()
}

impl SolenoidPoint {
    /// Builds a point from explicit level coordinates, checking range and compatibility.
    pub fn from_levels(seq: &RadixSequence, levels: Vec<Vec<Rational>>) -> Result<Self> {
        if levels.is_empty() || levels.len() > seq.len() {
            return Err(Error::Depth {
                requested: levels.len(),
                available: seq.len(),
            });
        }
        for (i, t) in levels.iter().enumerate() {
            if t.len() != seq.dim() {
                return Err(Error::Dimension {
                    expected: seq.dim(),
                    found: t.len(),
                });
            }
            let big = seq.big_r_rat(i + 1);
            if t.iter().any(|c| c < &Rational::zero() || c >= &big) {
                return Err(Error::Domain(format!("level {} coordinate outside [0, R_n)", i + 1)));
            }
            if i > 0 {
                let prev = &levels[i - 1];
                let m = seq.big_r_rat(i);
                if t.iter().zip(prev).any(|(a, b)| mod_rat(a, &m) != *b) {
                    return Err(Error::Consistency(format!(
                        "levels {} and {} are not compatible",
                        i,
                        i + 1
                    )));
                }
            }
        }
        Ok(Self {
            seq: seq.clone(),
            levels,
        })
    }

    /// The unique point of depth `depth` whose top coordinate is `top mod R_depth`.
    pub fn from_top(seq: &RadixSequence, depth: usize, top: &[Rational]) -> Result<Self> {
        if depth == 0 || depth > seq.len() {
            return Err(Error::Depth {
                requested: depth,
                available: seq.len(),
            });
        }
        if top.len() != seq.dim() {
            return Err(Error::Dimension {
                expected: seq.dim(),
                found: top.len(),
            });
        }
        let levels = (1..=depth)
            .map(|n| {
                let m = seq.big_r_rat(n);
                top.iter().map(|c| mod_rat(c, &m)).collect()
            })
            .collect();
        Ok(Self {
            seq: seq.clone(),
            levels,
        })
    }

    pub fn zero(seq: &RadixSequence, depth: usize) -> Result<Self> {
        Self::from_top(seq, depth, &vec![Rational::zero(); seq.dim()])
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn dim(&self) -> usize {
        self.seq.dim()
    }

    pub fn radix(&self) -> &RadixSequence {
        &self.seq
    }

    /// `t_n = pi_n(p)`, for `1 <= n <= depth`.
    pub fn level(&self, n: usize) -> &[Rational] {
        &self.levels[n - 1]
    }

    pub fn levels(&self) -> &[Vec<Rational>] {
        &self.levels
    }

    pub fn top(&self) -> &[Rational] {
        self.levels.last().expect("nonempty point")
    }

    pub fn is_compatible(&self) -> bool {
        self.levels.windows(2).enumerate().all(|(i, w)| {
            let m = self.seq.big_r_rat(i + 1);
            w[1].iter().zip(&w[0]).all(|(a, b)| mod_rat(a, &m) == *b)
        })
    }

    /// Tile address of `t_{n+1}` relative to level `n`.
    pub fn tile_address(&self, n: usize) -> Result<TileAddress> {
        if n == 0 || n >= self.depth() {
            return Err(Error::Depth {
                requested: n + 1,
                available: self.depth(),
            });
        }
        let big = self.seq.big_r_rat(n);
        let index = self
            .level(n + 1)
            .iter()
            .zip(self.level(n))
            .map(|(a, b)| {
                ((a - b) / &big)
                    .to_integer()
                    .to_u64()
                    .expect("tile index fits in u64")
            })
            .collect();
        Ok(TileAddress {
            level: n,
            index,
            offset: self.level(n).to_vec(),
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("solenoid-point v1\n");
        let radix: Vec<String> = self.seq.radices().iter().map(|r| r.to_string()).collect();
        out.push_str(&format!("radix {}\n", radix.join(" ")));
        out.push_str(&format!("dim {}\n", self.dim()));
        out.push_str(&format!("depth {}\n", self.depth()));
        for (i, t) in self.levels.iter().enumerate() {
            let coords: Vec<String> = t.iter().map(exact::format).collect();
            out.push_str(&format!("level {} {}\n", i + 1, coords.join(" ")));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::Parse(format!("solenoid point: {msg}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some("solenoid-point v1") {
            return Err(bad("missing header"));
        }
        let mut field = |name: &str| -> Result<Vec<String>> {
            let line = lines.next().ok_or_else(|| bad("truncated"))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(name) {
                return Err(bad(&format!("expected {name}")));
            }
            Ok(parts.map(String::from).collect())
        };
        let radix = field("radix")?
            .iter()
            .map(|s| s.parse::<u64>().map_err(|_| bad("radix entry")))
            .collect::<Result<Vec<_>>>()?;
        let dim = field("dim")?
            .first()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| bad("dim"))?;
        let depth = field("depth")?
            .first()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| bad("depth"))?;
        let seq = RadixSequence::new(radix, dim)?;
        let mut levels = Vec::with_capacity(depth);
        for n in 1..=depth {
            let parts = field("level")?;
            if parts.first().map(String::as_str) != Some(n.to_string().as_str()) {
                return Err(bad("level numbering"));
            }
            levels.push(parts[1..].iter().map(|s| exact::parse(s)).collect::<Result<Vec<_>>>()?);
        }
        Self::from_levels(&seq, levels)
    }
}

impl fmt::Display for SolenoidPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl Serialize for SolenoidPoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_text())
    }
}

impl<'de> Deserialize<'de> for SolenoidPoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        SolenoidPoint::from_text(&text).map_err(serde::de::Error::custom)
    }
}

/// Draws a point from the Haar measure discretised to the grid `(1/resolution) Z^{2d}`.
pub fn haar_sample(
    seq: &RadixSequence,
    depth: usize,
    resolution: u64,
    seed: u64,
) -> Result<SolenoidPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    haar_sample_with(seq, depth, resolution, &mut rng)
}

/// As [`haar_sample`], drawing from a caller-supplied generator.
pub fn haar_sample_with(
    seq: &RadixSequence,
    depth: usize,
    resolution: u64,
    rng: &mut ChaCha8Rng,
) -> Result<SolenoidPoint> {
    if depth == 0 || depth > seq.len() {
        return Err(Error::Depth {
            requested: depth,
            available: seq.len(),
        });
    }
    if resolution == 0 {
        return Err(Error::Parameter("resolution must be at least 1".into()));
    }
    let cells = seq.r(1) * resolution;
    let first: Vec<Rational> = (0..seq.dim())
        .map(|_| Rational::new(BigInt::from(rng.random_range(0..cells)), BigInt::from(resolution)))
        .collect();
    let mut levels = vec![first];
    for n in 1..depth {
        let big = seq.big_r_rat(n);
        let lift: Vec<Rational> = levels[n - 1]
            .iter()
            .map(|t| t + &big * exact::int(rng.random_range(0..seq.r(n + 1)) as i64))
            .collect();
        levels.push(lift);
    }
    Ok(SolenoidPoint {
        seq: seq.clone(),
        levels,
    })
}

/// The translation action: every level moves by `v` modulo `R_n`.
pub fn translate(p: &SolenoidPoint, v: &[Rational]) -> SolenoidPoint {
    assert_eq!(v.len(), p.dim(), "translation vector has the wrong dimension");
    let levels = p
        .levels
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let m = p.seq.big_r_rat(i + 1);
            t.iter().zip(v).map(|(a, b)| mod_rat(&(a + b), &m)).collect()
        })
        .collect();
    SolenoidPoint {
        seq: p.seq.clone(),
        levels,
    }
}

/// The identification `G = S_n x B_n`: offset `t_n` and tile indices of levels `n+1..N`.
pub fn factor(p: &SolenoidPoint, n: usize) -> Result<(Vec<Rational>, Vec<Vec<u64>>)> {
    if n == 0 || n > p.depth() {
        return Err(Error::Depth {
            requested: n,
            available: p.depth(),
        });
    }
    let indices = (n..p.depth())
        .map(|m| p.tile_address(m).map(|a| a.index))
        .collect::<Result<Vec<_>>>()?;
    Ok((p.level(n).to_vec(), indices))
}

/// Inverse of [`factor`].
pub fn unfactor(
    seq: &RadixSequence,
    n: usize,
    offset: &[Rational],
    indices: &[Vec<u64>],
) -> Result<SolenoidPoint> {
    let mut top = offset.to_vec();
    for (k, idx) in indices.iter().enumerate() {
        let m = n + k;
        if idx.len() != seq.dim() || idx.iter().any(|i| *i >= seq.r(m + 1)) {
            return Err(Error::Parameter(format!("tile index out of range at level {}", m + 1)));
        }
        let big = seq.big_r_rat(m);
        for (t, i) in top.iter_mut().zip(idx) {
            *t += &big * exact::int(*i as i64);
        }
    }
    SolenoidPoint::from_top(seq, n + indices.len(), &top)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{int, ratio};

    fn seq22() -> RadixSequence {
        radix_products(&[2, 2], 2).unwrap()
    }

    #[test]
    fn products_and_errors() {
        let s = radix_products(&[2, 3], 2).unwrap();
        assert_eq!(s.products(), &[BigInt::from(2), BigInt::from(6)]);
        assert_eq!(s.big_r(0), &BigInt::one());
        let s = radix_products(&[2, 2, 2], 2).unwrap();
        assert_eq!(s.products(), &[BigInt::from(2), BigInt::from(4), BigInt::from(8)]);
        assert_eq!(s.sum_inv(), ratio(3, 2));
        assert!(matches!(
            radix_products(&[2, 1], 2),
            Err(Error::InvalidRadix { index: 1, value: 1 })
        ));
        assert!(matches!(radix_products(&[], 2), Err(Error::EmptyRadix)));
        assert!(radix_products(&[2], 3).is_err());
    }

    #[test]
    fn translate_hand_example() {
        let s = seq22();
        let p = SolenoidPoint::from_levels(
            &s,
            vec![vec![ratio(3, 2), ratio(3, 2)], vec![ratio(3, 2), ratio(3, 2)]],
        )
        .unwrap();
        let q = translate(&p, &[int(1), int(0)]);
        assert_eq!(q.level(1), &[ratio(1, 2), ratio(3, 2)]);
        assert_eq!(q.level(2), &[ratio(5, 2), ratio(3, 2)]);
        assert!(q.is_compatible());
    }

    #[test]
    fn incompatible_levels_rejected() {
        let s = seq22();
        let err = SolenoidPoint::from_levels(&s, vec![vec![int(1), int(0)], vec![int(2), int(0)]]);
        assert!(matches!(err, Err(Error::Consistency(_))));
    }

    #[test]
    fn factor_boundary_and_round_trip() {
        let s = radix_products(&[2, 3, 2], 2).unwrap();
        let p = haar_sample(&s, 3, 4, 7).unwrap();
        let (z, idx) = factor(&p, 3).unwrap();
        assert!(idx.is_empty());
        assert_eq!(z, p.top());
        for n in 1..=3 {
            let (z, idx) = factor(&p, n).unwrap();
            assert_eq!(unfactor(&s, n, &z, &idx).unwrap(), p);
        }
        assert!(factor(&p, 4).is_err());
        assert!(factor(&p, 0).is_err());
    }

    #[test]
    fn tile_address_reconstructs() {
        let s = radix_products(&[3, 2], 2).unwrap();
        let p = haar_sample(&s, 2, 5, 11).unwrap();
        let a = p.tile_address(1).unwrap();
        assert_eq!(a.reconstruct(&s), p.level(2));
        assert!(a.index.iter().all(|i| *i < 2));
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = seq22();
        assert_eq!(haar_sample(&s, 2, 8, 3).unwrap(), haar_sample(&s, 2, 8, 3).unwrap());
        assert!(matches!(haar_sample(&s, 3, 8, 3), Err(Error::Depth { .. })));
    }

    #[test]
    fn text_round_trip() {
        let s = radix_products(&[2, 5, 3], 4).unwrap();
        let p = haar_sample(&s, 3, 7, 99).unwrap();
        let text = p.to_text();
        assert_eq!(SolenoidPoint::from_text(&text).unwrap(), p);
        assert_eq!(SolenoidPoint::from_text(&text).unwrap().to_text(), text);
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<SolenoidPoint>(&json).unwrap(), p);
    }

    #[test]
    fn tiling_partitions_next_level() {
        let s = radix_products(&[2, 3], 2).unwrap();
        let r1 = s.big_r_rat(1);
        let mut seen = std::collections::BTreeSet::new();
        for i in 0..3u64 {
            for j in 0..3u64 {
                let lo = [&r1 * int(i as i64), &r1 * int(j as i64)];
                assert!(seen.insert(lo.clone()));
                assert!(lo.iter().all(|c| c < &s.big_r_rat(2)));
            }
        }
        assert_eq!(seen.len() as u64, 9);
    }
}
