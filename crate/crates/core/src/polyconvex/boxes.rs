use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{self, Rational};

/// A closed axis-parallel box `prod [lo_k, hi_k]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RBox {
    #[serde(with = "exact::serde_rat_vec")]
    pub lo: Vec<Rational>,
    #[serde(with = "exact::serde_rat_vec")]
    pub hi: Vec<Rational>,
}

impl RBox {
    pub fn new(lo: Vec<Rational>, hi: Vec<Rational>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Dimension {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            return Err(Error::Parameter("box with reversed bounds".into()));
        }
        Ok(Self { lo, hi })
    }

    /// `center + [-half, half]^D`.
    pub fn cube(center: &[Rational], half: &Rational) -> Self {
        Self {
            lo: center.iter().map(|c| c - half).collect(),
            hi: center.iter().map(|c| c + half).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn width(&self, axis: usize) -> Rational {
        &self.hi[axis] - &self.lo[axis]
    }

    pub fn volume(&self) -> Rational {
        (0..self.dim()).fold(Rational::one(), |v, k| v * self.width(k))
    }

    pub fn midpoint(&self) -> Vec<Rational> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (a + b) / exact::int(2))
            .collect()
    }

    pub fn contains_point(&self, p: &[Rational]) -> bool {
        (0..self.dim()).all(|k| p[k] >= self.lo[k] && p[k] <= self.hi[k])
    }

    pub fn contains_box(&self, other: &RBox) -> bool {
        (0..self.dim()).all(|k| other.lo[k] >= self.lo[k] && other.hi[k] <= self.hi[k])
    }

    /// Closed boxes share at least one point.
    pub fn touches(&self, other: &RBox) -> bool {
        (0..self.dim()).all(|k| self.lo[k] <= other.hi[k] && other.lo[k] <= self.hi[k])
    }

    pub fn interiors_overlap(&self, other: &RBox) -> bool {
        (0..self.dim()).all(|k| self.lo[k] < other.hi[k] && other.lo[k] < self.hi[k])
    }

    pub fn intersection(&self, other: &RBox) -> Option<RBox> {
        if !self.touches(other) {
            return None;
        }
        Some(RBox {
            lo: (0..self.dim())
                .map(|k| exact::max_rat(&self.lo[k], &other.lo[k]).clone())
                .collect(),
            hi: (0..self.dim())
                .map(|k| exact::min_rat(&self.hi[k], &other.hi[k]).clone())
                .collect(),
        })
    }

    /// Points at distance at least `d` from the boundary; `None` when that set is empty.
    pub fn inset(&self, d: &Rational) -> Option<RBox> {
        let lo: Vec<Rational> = self.lo.iter().map(|a| a + d).collect();
        let hi: Vec<Rational> = self.hi.iter().map(|b| b - d).collect();
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            None
        } else {
            Some(RBox { lo, hi })
        }
    }

    pub fn widened(&self, d: &Rational) -> RBox {
        RBox {
            lo: self.lo.iter().map(|a| a - d).collect(),
            hi: self.hi.iter().map(|b| b + d).collect(),
        }
    }

    /// The image under `x -> scale * x + shift`, `scale > 0`.
    pub fn map_affine(&self, scale: &Rational, shift: &[Rational]) -> RBox {
        RBox {
            lo: self.lo.iter().zip(shift).map(|(a, s)| a * scale + s).collect(),
            hi: self.hi.iter().zip(shift).map(|(b, s)| b * scale + s).collect(),
        }
    }

    /// Gap `other.lo - self.hi` along `axis` (negative when they overlap there).
    pub fn gap_to(&self, other: &RBox, axis: usize) -> Rational {
        &other.lo[axis] - &self.hi[axis]
    }
}

/// Exact Lebesgue measure of a union of closed boxes by recursive slab sweep.
pub fn measure_of_box_union(boxes: &[RBox]) -> Rational {
    let live: Vec<&RBox> = boxes.iter().filter(|b| b.volume().is_positive()).collect();
    match live.first() {
        None => Rational::zero(),
        Some(b) => sweep(&live, 0, b.dim()),
    }
}

fn sweep(boxes: &[&RBox], axis: usize, dim: usize) -> Rational {
    if axis == dim {
        return if boxes.is_empty() {
            Rational::zero()
        } else {
            Rational::one()
        };
    }
    let mut cuts: Vec<&Rational> = boxes.iter().flat_map(|b| [&b.lo[axis], &b.hi[axis]]).collect();
    cuts.sort();
    cuts.dedup();
    let mut total = Rational::zero();
    for w in cuts.windows(2) {
        let active: Vec<&RBox> = boxes
            .iter()
            .copied()
            .filter(|b| &b.lo[axis] <= w[0] && &b.hi[axis] >= w[1])
            .collect();
        if !active.is_empty() {
            total += (w[1] - w[0]) * sweep(&active, axis + 1, dim);
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{int, ratio};

    fn bx(lo: &[Rational], hi: &[Rational]) -> RBox {
        RBox::new(lo.to_vec(), hi.to_vec()).unwrap()
    }

    #[test]
    fn union_measures() {
        let unit = bx(&[int(0), int(0)], &[int(1), int(1)]);
        assert_eq!(measure_of_box_union(std::slice::from_ref(&unit)), int(1));
        let shifted = bx(&[ratio(1, 2), ratio(1, 2)], &[ratio(3, 2), ratio(3, 2)]);
        assert_eq!(measure_of_box_union(&[unit.clone(), shifted]), ratio(7, 4));
        assert_eq!(measure_of_box_union(&[unit.clone(), unit]), int(1));
        assert_eq!(measure_of_box_union(&[]), int(0));
    }

    #[test]
    fn inset_and_intersection() {
        let b = bx(&[int(0), int(0)], &[int(1), int(2)]);
        assert_eq!(b.inset(&ratio(1, 4)).unwrap().volume(), ratio(3, 4));
        assert!(b.inset(&ratio(3, 5)).is_none());
        let c = bx(&[int(1), int(1)], &[int(3), int(3)]);
        assert!(b.touches(&c) && !b.interiors_overlap(&c));
        assert_eq!(b.intersection(&c).unwrap().volume(), int(0));
        assert!(RBox::new(vec![int(1)], vec![int(0)]).is_err());
    }
}
