use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use super::boxes::RBox;
use crate::error::{Error, Result};
use crate::exact::{self, Rational};

/// A unit cube `center + [-1/2, 1/2]^D`, or `center + [-1/2, 1/2)^D` when half-open.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitCube {
    #[serde(with = "exact::serde_rat_vec")]
    pub center: Vec<Rational>,
    #[serde(default)]
    pub half_open: bool,
}

/// `i in {-1, 0}^D`, selecting the sub-cube `q + prod [i_k / 2, (i_k + 1) / 2]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubCubeIndex(pub Vec<i8>);

impl UnitCube {
    pub fn closed(center: Vec<Rational>) -> Self {
        Self {
            center,
            half_open: false,
        }
    }

    /// `corner + [0, 1)^D`.
    pub fn half_open_at(corner: &[Rational]) -> Self {
        Self {
            center: corner.iter().map(|c| c + exact::half()).collect(),
            half_open: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn closure(&self) -> RBox {
        RBox::cube(&self.center, &exact::half())
    }

    pub fn is_grid_cube(&self) -> bool {
        self.center.iter().all(exact::is_integer)
    }

    pub fn subcube(&self, index: &SubCubeIndex) -> RBox {
        let half = exact::half();
        let lo: Vec<Rational> = self
            .center
            .iter()
            .zip(&index.0)
            .map(|(q, &i)| q + &half * exact::int(i as i64))
            .collect();
        let hi = lo.iter().map(|a| a + &half).collect();
        RBox { lo, hi }
    }

    /// Whether the interior of the cube meets the interior of `b`.
    pub fn interior_overlaps(&self, b: &RBox) -> bool {
        self.closure().interiors_overlap(b)
    }

    pub fn interior_contains(&self, p: &[Rational]) -> bool {
        let half = exact::half();
        self.center
            .iter()
            .zip(p)
            .all(|(q, x)| x > &(q - &half) && x < &(q + &half))
    }

    /// Intersection with a closed box, respecting the open upper faces of half-open cubes.
    pub fn meets(&self, b: &RBox) -> bool {
        let half = exact::half();
        self.center.iter().enumerate().all(|(k, q)| {
            let lo = q - &half;
            let hi = q + &half;
            let upper = if self.half_open { b.lo[k] < hi } else { b.lo[k] <= hi };
            upper && lo <= b.hi[k]
        })
    }

    pub fn intersects(&self, other: &UnitCube) -> bool {
        let half = exact::half();
        self.center.iter().zip(&other.center).all(|(a, b)| {
            let (a0, a1) = (a - &half, a + &half);
            let (b0, b1) = (b - &half, b + &half);
            let left = if other.half_open { a0 < b1 } else { a0 <= b1 };
            let right = if self.half_open { b0 < a1 } else { b0 <= a1 };
            left && right
        })
    }
}

/// Componentwise nearest lattice point; ties round down.
pub fn nearest_lattice(q: &[Rational]) -> Vec<BigInt> {
    q.iter()
        .map(|x| {
            let fl = exact::floor_int(x);
            if x - exact::from_bigint(&fl) > exact::half() {
                fl + 1
            } else {
                fl
            }
        })
        .collect()
}

/// The grid cube `[q] + Q_0` and a sub-cube of `Q` inside it.
pub fn host_grid_cube(cube: &UnitCube) -> (Vec<BigInt>, SubCubeIndex) {
    let g = nearest_lattice(&cube.center);
    let index = cube
        .center
        .iter()
        .zip(&g)
        .map(|(q, gk)| if q > &exact::from_bigint(gk) { -1 } else { 0 })
        .collect();
    (g, SubCubeIndex(index))
}

pub fn grid_cube(g: &[i64]) -> RBox {
    let c: Vec<Rational> = g.iter().map(|&x| exact::int(x)).collect();
    RBox::cube(&c, &exact::half())
}

pub(crate) fn to_key(v: &[BigInt]) -> Result<Vec<i64>> {
    v.iter()
        .map(|x| {
            x.to_i64()
                .ok_or_else(|| Error::Parameter(format!("lattice coordinate {x} out of range")))
        })
        .collect()
}

pub(crate) fn check_cubes(cubes: &[UnitCube]) -> Result<usize> {
    let dim = cubes
        .first()
        .map(UnitCube::dim)
        .ok_or_else(|| Error::Parameter("empty cube collection".into()))?;
    if dim == 0 || dim % 2 != 0 {
        return Err(Error::Parameter(format!("real dimension {dim} must be even and positive")));
    }
    for c in cubes {
        if c.dim() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: c.dim(),
            });
        }
    }
    for i in 0..cubes.len() {
        for j in i + 1..cubes.len() {
            if cubes[i].intersects(&cubes[j]) {
                return Err(Error::NotDisjoint(i, j));
            }
        }
    }
    Ok(dim)
}

/// For each grid cube whose interior meets an input cube, the indices of those cubes.
pub fn grid_incidence(cubes: &[UnitCube]) -> Result<BTreeMap<Vec<i64>, Vec<usize>>> {
    check_cubes(cubes)?;
    let mut map: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
    for (j, cube) in cubes.iter().enumerate() {
        let ranges: Vec<Vec<i64>> = cube
            .center
            .iter()
            .map(|q| {
                let lo = exact::ceil_int(&(q - exact::int(1)));
                let hi = exact::floor_int(&(q + exact::int(1)));
                let lo = to_key(&[lo])?[0];
                let hi = to_key(&[hi])?[0];
                Ok((lo..=hi).collect())
            })
            .collect::<Result<_>>()?;
        for g in cartesian(&ranges) {
            if cube.interior_overlaps(&grid_cube(&g)) {
                map.entry(g).or_default().push(j);
            }
        }
    }
    Ok(map)
}

pub(crate) fn cartesian<T: Clone>(axes: &[Vec<T>]) -> Vec<Vec<T>> {
    axes.iter().fold(vec![Vec::new()], |acc, axis| {
        acc.into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |x| {
                    let mut p = prefix.clone();
                    p.push(x.clone());
                    p
                })
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{int, ratio};

    fn big(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn nearest_lattice_examples() {
        assert_eq!(nearest_lattice(&[ratio(3, 10), ratio(-1, 5)]), big(&[0, 0]));
        assert_eq!(nearest_lattice(&[ratio(1, 2), ratio(1, 2)]), big(&[0, 0]));
        assert_eq!(nearest_lattice(&[ratio(3, 5), ratio(6, 5)]), big(&[1, 1]));
    }

    #[test]
    fn host_examples() {
        let grid = UnitCube::closed(vec![int(2), int(-1)]);
        assert_eq!(host_grid_cube(&grid), (big(&[2, -1]), SubCubeIndex(vec![0, 0])));
        let q = UnitCube::closed(vec![ratio(5, 4), ratio(1, 4)]);
        let (g, idx) = host_grid_cube(&q);
        assert_eq!(g, big(&[1, 0]));
        assert!(grid_cube(&to_key(&g).unwrap()).contains_box(&q.subcube(&idx)));
        let corner = UnitCube::closed(vec![ratio(1, 2), ratio(1, 2)]);
        let (g, idx) = host_grid_cube(&corner);
        assert_eq!(g, big(&[0, 0]));
        assert!(grid_cube(&[0, 0]).contains_box(&corner.subcube(&idx)));
    }

    #[test]
    fn incidence_examples() {
        let inc = grid_incidence(&[UnitCube::closed(vec![int(0), int(0)])]).unwrap();
        assert_eq!(inc.into_iter().collect::<Vec<_>>(), vec![(vec![0, 0], vec![0])]);
        let corner = grid_incidence(&[UnitCube::closed(vec![ratio(1, 2), ratio(1, 2)])]).unwrap();
        assert_eq!(corner.len(), 4);
        let half_open = grid_incidence(&[UnitCube::half_open_at(&[ratio(-1, 2), ratio(-1, 2)])]).unwrap();
        assert_eq!(half_open.len(), 1);
        let overlapping = [
            UnitCube::closed(vec![int(0), int(0)]),
            UnitCube::closed(vec![int(1), int(0)]),
        ];
        assert!(matches!(grid_incidence(&overlapping), Err(Error::NotDisjoint(0, 1))));
        let tiles = [
            UnitCube::half_open_at(&[int(0), int(0)]),
            UnitCube::half_open_at(&[int(1), int(0)]),
        ];
        assert!(grid_incidence(&tiles).is_ok());
    }
}
