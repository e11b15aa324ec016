use std::fmt::Debug;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TowerData;
use crate::error::{Error, Result};
use crate::exact::{self, Rational};
use crate::polyconvex::cartesian_product;
use crate::solenoid::{haar_sample_with, translate, RadixSequence, SolenoidPoint};

/// A measure-preserving `R^{dim}` action together with a supplied tower `(S_n, B_n)`.
///
/// Base points come in finitely many types per level: points of one type have the same
/// return structure, so each type is represented by one canonical state. Types are listed
/// in increasing canonical order.
pub trait ActionModel {
    type State: Clone + PartialEq + Debug;

    fn name(&self) -> &'static str;
    /// Whether tower queries and coverage are exact rather than simulated.
    fn exact(&self) -> bool;
    fn dim(&self) -> usize;
    /// Number of tower levels provided.
    fn levels(&self) -> usize;
    /// `a_n`, 1-based.
    fn side(&self, n: usize) -> u64;
    fn apply(&self, z: &[Rational], x: &Self::State) -> Self::State;
    fn encode(&self, x: &Self::State) -> String;
    fn sample(&self, rng: &mut ChaCha8Rng) -> Result<Self::State>;
    /// `(z, b)` with `x = T_z b`, `z in S_n`, `b in B_n`; `None` off `S_n B_n`.
    fn tower_coordinates(&self, n: usize, x: &Self::State) -> Option<(Vec<Rational>, Self::State)>;
    fn base_types(&self, n: usize) -> Vec<Self::State>;
    /// Index into [`ActionModel::base_types`]; a domain error off `B_n`.
    fn base_type(&self, n: usize, x: &Self::State) -> Result<usize>;
    /// Every `z in S_n` with `T_z x in B_{n-1}`, in increasing order, with `T_z x`.
    fn returns(&self, n: usize, x: &Self::State) -> Result<Vec<(Vec<Rational>, Self::State)>>;
    fn exact_coverage(&self, n: usize) -> Option<Rational>;

    fn in_base(&self, n: usize, x: &Self::State) -> bool {
        self.base_type(n, x).is_ok()
    }
}

fn check_level(n: usize, levels: usize) -> Result<()> {
    if n == 0 || n > levels {
        return Err(Error::Depth {
            requested: n,
            available: levels,
        });
    }
    Ok(())
}

fn sides_of(seq: &RadixSequence) -> Result<Vec<u64>> {
    (1..=seq.len())
        .map(|n| {
            seq.big_r(n)
                .to_u64()
                .ok_or_else(|| Error::TowerParameter("side length overflows u64".into()))
        })
        .collect()
}

fn negated(v: &[Rational]) -> Vec<Rational> {
    v.iter().map(|x| -x).collect()
}

/// The solenoid with the kernel towers `B_n = ker pi_n`, `a_n = R_n`. Exact.
#[derive(Debug, Clone)]
pub struct SolenoidModel {
    seq: RadixSequence,
    sides: Vec<u64>,
    resolution: u64,
}

impl SolenoidModel {
    /// Samples are drawn on the grid `(1/resolution) Z^{2d}`.
    pub fn new(seq: RadixSequence, resolution: u64) -> Result<Self> {
        let sides = sides_of(&seq)?;
        Ok(Self {
            seq,
            sides,
            resolution,
        })
    }

    pub fn radix(&self) -> &RadixSequence {
        &self.seq
    }
}

impl ActionModel for SolenoidModel {
    type State = SolenoidPoint;

    fn name(&self) -> &'static str {
        "solenoid"
    }

    fn exact(&self) -> bool {
        true
    }

    fn dim(&self) -> usize {
        self.seq.dim()
    }

    fn levels(&self) -> usize {
        self.seq.len()
    }

    fn side(&self, n: usize) -> u64 {
        self.sides[n - 1]
    }

    fn apply(&self, z: &[Rational], x: &SolenoidPoint) -> SolenoidPoint {
        translate(x, z)
    }

    fn encode(&self, x: &SolenoidPoint) -> String {
        x.to_text()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Result<SolenoidPoint> {
        haar_sample_with(&self.seq, self.seq.len(), self.resolution, rng)
    }

    fn tower_coordinates(&self, n: usize, x: &SolenoidPoint) -> Option<(Vec<Rational>, SolenoidPoint)> {
        if n == 0 || n > x.depth() {
            return None;
        }
        let z = x.level(n).to_vec();
        let b = translate(x, &negated(&z));
        Some((z, b))
    }

    fn base_types(&self, _n: usize) -> Vec<SolenoidPoint> {
        vec![SolenoidPoint::zero(&self.seq, self.seq.len()).expect("nonempty radix")]
    }

    fn base_type(&self, n: usize, x: &SolenoidPoint) -> Result<usize> {
        check_level(n, x.depth())?;
        if x.level(n).iter().all(Zero::is_zero) {
            Ok(0)
        } else {
            Err(Error::Domain(format!("point is not in the kernel of pi_{n}")))
        }
    }

    fn returns(&self, n: usize, x: &SolenoidPoint) -> Result<Vec<(Vec<Rational>, SolenoidPoint)>> {
        if n < 2 {
            return Err(Error::Parameter("return sets start at level 2".into()));
        }
        self.base_type(n, x)?;
        let step = self.seq.big_r_rat(n - 1);
        let axis: Vec<Rational> = (0..self.seq.r(n)).map(|i| &step * exact::int(i as i64)).collect();
        Ok(cartesian_product(&vec![axis; self.dim()])
            .into_iter()
            .map(|z| {
                let y = translate(x, &z);
                (z, y)
            })
            .collect())
    }

    fn exact_coverage(&self, _n: usize) -> Option<Rational> {
        Some(Rational::one())
    }
}

#[derive(Debug, Clone)]
struct Anchor {
    pos: Vec<Rational>,
    parent: Option<usize>,
}

/// A simulated tower on a solenoid whose top level is the torus `R^{dim} / a_K Z^{dim}`.
///
/// The top base is the kernel at level `K`. Each copy of `S_{n+1}` is cut into
/// `(a_{n+1}/a_n - 1)^{dim}` cells, and each cell holds one copy of `S_n` at a random
/// offset drawn from `jitter_steps` equally spaced values, so return sets differ from
/// point to point and coverage decreases towards the lower levels.
#[derive(Debug, Clone)]
pub struct PatchTowerModel {
    seq: RadixSequence,
    sides: Vec<u64>,
    resolution: u64,
    /// Per level, anchors sorted lexicographically.
    anchors: Vec<Vec<Anchor>>,
    /// Per level `n < K` and parent anchor at `n + 1`, the children at `n`.
    children: Vec<Vec<Vec<usize>>>,
    /// Per level `n < K`, the cell side inside copies of `S_{n+1}`.
    cell: Vec<Rational>,
}

const MAX_ANCHORS: usize = 200_000;

impl PatchTowerModel {
    pub fn new(t: &TowerData, jitter_steps: u64, resolution: u64, seed: u64) -> Result<Self> {
        if jitter_steps == 0 {
            return Err(Error::Parameter("jitter_steps must be positive".into()));
        }
        let sides = t.sides().to_vec();
        let mut radix = vec![sides[0]];
        radix.extend(sides.windows(2).map(|w| w[1] / w[0]));
        let seq = RadixSequence::new(radix, t.dim())?;
        let k = sides.len();
        let dim = t.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut anchors: Vec<Vec<Anchor>> = vec![Vec::new(); k];
        anchors[k - 1] = vec![Anchor {
            pos: vec![Rational::zero(); dim],
            parent: None,
        }];
        let mut cell = vec![Rational::zero(); k];
        for n in (1..k).rev() {
            let per_axis = sides[n] / sides[n - 1] - 1;
            let g = Rational::new(BigInt::from(sides[n]), BigInt::from(per_axis));
            let slack = &g - exact::int(sides[n - 1] as i64);
            let jitter = &slack / exact::int(jitter_steps as i64);
            let count = anchors[n].len() * (per_axis as usize).pow(dim as u32);
            if count > MAX_ANCHORS {
                return Err(Error::Resource(format!(
                    "level {n} would hold {count} anchors, above the cap {MAX_ANCHORS}"
                )));
            }
            let offsets = cartesian_product(&vec![(0..per_axis).collect::<Vec<_>>(); dim]);
            let mut level = Vec::with_capacity(count);
            for (p, parent) in anchors[n].iter().enumerate() {
                for idx in &offsets {
                    let pos = parent
                        .pos
                        .iter()
                        .zip(idx)
                        .map(|(c, &i)| {
                            let u = rng.random_range(0..jitter_steps) as i64;
                            c + &g * exact::int(i as i64) + &jitter * exact::int(u)
                        })
                        .collect();
                    level.push(Anchor { pos, parent: Some(p) });
                }
            }
            level.sort_by(|a, b| a.pos.cmp(&b.pos));
            anchors[n - 1] = level;
            cell[n - 1] = g;
        }
        let children = (0..k)
            .map(|n| {
                if n + 1 >= k {
                    return Vec::new();
                }
                let mut kids = vec![Vec::new(); anchors[n + 1].len()];
                for (i, a) in anchors[n].iter().enumerate() {
                    kids[a.parent.expect("non-top anchor")].push(i);
                }
                kids
            })
            .collect();
        Ok(Self {
            seq,
            sides,
            resolution,
            anchors,
            children,
            cell,
        })
    }

    pub fn anchor_count(&self, n: usize) -> usize {
        self.anchors[n - 1].len()
    }

    fn top(&self) -> usize {
        self.sides.len()
    }

    /// The anchor at level `n` whose copy of `S_n` contains the top coordinate `t`.
    fn locate(&self, n: usize, t: &[Rational]) -> Option<(usize, Vec<Rational>)> {
        let mut idx = 0;
        let mut rel: Vec<Rational> = t.to_vec();
        for m in (n..self.top()).rev() {
            let g = &self.cell[m - 1];
            let side = exact::int(self.sides[m - 1] as i64);
            let per_axis = self.sides[m] / self.sides[m - 1] - 1;
            let key: Option<Vec<u64>> = rel
                .iter()
                .map(|r| exact::floor_int(&(r / g)).to_u64().filter(|c| *c < per_axis))
                .collect();
            let key = key?;
            let parent = &self.anchors[m][idx];
            let expected: Vec<Rational> = parent
                .pos
                .iter()
                .zip(&key)
                .map(|(c, &i)| c + g * exact::int(i as i64))
                .collect();
            let child = self.children[m - 1][idx].iter().copied().find(|&c| {
                self.anchors[m - 1][c]
                    .pos
                    .iter()
                    .zip(&expected)
                    .all(|(p, e)| p >= e && p < &(e + g))
            })?;
            let pos = &self.anchors[m - 1][child].pos;
            rel = t.iter().zip(pos).map(|(x, p)| x - p).collect();
            if rel.iter().any(|r| r < &Rational::zero() || r >= &side) {
                return None;
            }
            idx = child;
        }
        Some((idx, rel))
    }

    fn point_at(&self, top: &[Rational]) -> SolenoidPoint {
        SolenoidPoint::from_top(&self.seq, self.seq.len(), top).expect("valid top coordinate")
    }
}

impl ActionModel for PatchTowerModel {
    type State = SolenoidPoint;

    fn name(&self) -> &'static str {
        "patch"
    }

    fn exact(&self) -> bool {
        false
    }

    fn dim(&self) -> usize {
        self.seq.dim()
    }

    fn levels(&self) -> usize {
        self.sides.len()
    }

    fn side(&self, n: usize) -> u64 {
        self.sides[n - 1]
    }

    fn apply(&self, z: &[Rational], x: &SolenoidPoint) -> SolenoidPoint {
        translate(x, z)
    }

    fn encode(&self, x: &SolenoidPoint) -> String {
        x.to_text()
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Result<SolenoidPoint> {
        haar_sample_with(&self.seq, self.seq.len(), self.resolution, rng)
    }

    fn tower_coordinates(&self, n: usize, x: &SolenoidPoint) -> Option<(Vec<Rational>, SolenoidPoint)> {
        if n == 0 || n > self.top() || x.depth() != self.top() {
            return None;
        }
        let (_, z) = self.locate(n, x.top())?;
        let b = translate(x, &negated(&z));
        Some((z, b))
    }

    fn base_types(&self, n: usize) -> Vec<SolenoidPoint> {
        self.anchors[n - 1].iter().map(|a| self.point_at(&a.pos)).collect()
    }

    fn base_type(&self, n: usize, x: &SolenoidPoint) -> Result<usize> {
        check_level(n, self.top())?;
        match self.locate(n, x.top()) {
            Some((idx, z)) if z.iter().all(Zero::is_zero) => Ok(idx),
            _ => Err(Error::Domain(format!("point is not in B_{n}"))),
        }
    }

    fn returns(&self, n: usize, x: &SolenoidPoint) -> Result<Vec<(Vec<Rational>, SolenoidPoint)>> {
        if n < 2 {
            return Err(Error::Parameter("return sets start at level 2".into()));
        }
        let idx = self.base_type(n, x)?;
        let here = &self.anchors[n - 1][idx].pos;
        let mut out: Vec<(Vec<Rational>, SolenoidPoint)> = self.children[n - 2][idx]
            .iter()
            .map(|&c| {
                let z: Vec<Rational> = self.anchors[n - 2][c].pos.iter().zip(here).map(|(p, h)| p - h).collect();
                let y = translate(x, &z);
                (z, y)
            })
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(out)
    }

    fn exact_coverage(&self, n: usize) -> Option<Rational> {
        let count = exact::int(self.anchors[n - 1].len() as i64);
        let ratio = Rational::new(BigInt::from(self.sides[n - 1]), BigInt::from(self.sides[self.top() - 1]));
        Some(count * exact::pow(&ratio, self.dim()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solenoid() -> SolenoidModel {
        SolenoidModel::new(RadixSequence::new(vec![2, 2], 2).unwrap(), 4).unwrap()
    }

    #[test]
    fn solenoid_action_laws() {
        let m = solenoid();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = m.sample(&mut rng).unwrap();
        let zero = vec![Rational::zero(); 2];
        assert_eq!(m.apply(&zero, &x), x);
        let u = vec![exact::ratio(3, 4), exact::ratio(-5, 2)];
        let v = vec![exact::ratio(7, 3), exact::int(1)];
        let uv: Vec<Rational> = u.iter().zip(&v).map(|(a, b)| a + b).collect();
        assert_eq!(m.apply(&u, &m.apply(&v, &x)), m.apply(&uv, &x));
        let (z, b) = m.tower_coordinates(2, &x).unwrap();
        assert!(m.in_base(2, &b));
        assert_eq!(m.apply(&z, &b), x);
    }

    #[test]
    fn solenoid_returns_are_the_coarse_lattice() {
        let m = solenoid();
        let b = &m.base_types(2)[0];
        let zs: Vec<Vec<Rational>> = m.returns(2, b).unwrap().into_iter().map(|(z, _)| z).collect();
        let expect: Vec<Vec<Rational>> = [(0, 0), (0, 2), (2, 0), (2, 2)]
            .iter()
            .map(|&(a, b)| vec![exact::int(a), exact::int(b)])
            .collect();
        assert_eq!(zs, expect);
        let off = m.apply(&[exact::int(1), exact::int(0)], b);
        assert!(matches!(m.returns(2, &off), Err(Error::Domain(_))));
    }

    #[test]
    fn patch_anchors_nest() {
        let t = TowerData::new(vec![2, 16, 128], 2).unwrap();
        let m = PatchTowerModel::new(&t, 4, 8, 11).unwrap();
        assert_eq!(m.anchor_count(3), 1);
        assert_eq!(m.anchor_count(2), 49);
        assert_eq!(m.anchor_count(1), 49 * 49);
        for n in 1..=3 {
            for (i, b) in m.base_types(n).iter().enumerate() {
                assert_eq!(m.base_type(n, b).unwrap(), i);
            }
        }
        let b = &m.base_types(2)[5];
        let rs = m.returns(2, b).unwrap();
        assert_eq!(rs.len(), 49);
        for (z, y) in &rs {
            assert!(z.iter().all(|c| c >= &Rational::zero() && c < &exact::int(16)));
            assert!(m.in_base(1, y));
        }
        assert_eq!(m.exact_coverage(3), Some(Rational::one()));
        assert_eq!(m.exact_coverage(2), Some(exact::ratio(49 * 256, 128 * 128)));
        let big = TowerData::new(vec![2, 16, 128], 4).unwrap();
        assert!(matches!(PatchTowerModel::new(&big, 4, 8, 1), Err(Error::Resource(_))));
    }
}
