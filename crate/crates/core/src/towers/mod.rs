//! Nested towers for free `R^{2d}` actions: tower data and its validation, return sets,
//! `delta`-fine partitions, center cubes and the general staged construction.

mod models;
mod partition;
mod stage;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{self, Rational};
use crate::polyconvex::RBox;

pub use models::{ActionModel, PatchTowerModel, SolenoidModel};
pub use partition::{
    delta_fine_partition, hausdorff_sq, merge_cells, return_sets, validate_partition, PartitionCell, PartitionData,
    PartitionReport, ReturnSet,
};
pub use stage::{
    assemble_collection, budget_ledger, centers_for, choose_centers, condition_d_check, first_general_stage,
    fit_stage, general_stage, layout_stage, run_general, CellStage, ChainLink, Collection, CollectionCube,
    ConditionDCertificate, CubeRole, ErrorBudget, GeneralOptions, GeneralStage,
};

/// Side lengths `a_1 < a_2 < ...` of the tower shapes `S_n = [0, a_n)^{dim}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TowerSpec", into = "TowerSpec")]
pub struct TowerData {
    a: Vec<u64>,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct TowerSpec {
    a: Vec<u64>,
    dim: usize,
}

impl TryFrom<TowerSpec> for TowerData {
    type Error = Error;
    fn try_from(spec: TowerSpec) -> Result<Self> {
        TowerData::new(spec.a, spec.dim)
    }
}

impl From<TowerData> for TowerSpec {
    fn from(t: TowerData) -> Self {
        TowerSpec { a: t.a, dim: t.dim }
    }
}

/// `sum a_n / a_{n+1}` over consecutive pairs.
pub fn ratio_sum(a: &[u64]) -> Rational {
    a.windows(2)
        .map(|w| Rational::new(BigInt::from(w[0]), BigInt::from(w[1])))
        .fold(Rational::zero(), |acc, x| acc + x)
}

impl TowerData {
    /// Rejects sequences with `sum a_n / a_{n+1} >= 1/2` or a non-integer ratio `a_n / a_{n-1}`.
    pub fn new(a: Vec<u64>, dim: usize) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::TowerParameter("empty side sequence".into()));
        }
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::TowerParameter(format!("real dimension {dim} must be even and positive")));
        }
        if a[0] == 0 {
            return Err(Error::TowerParameter("side lengths must be positive".into()));
        }
        for (i, w) in a.windows(2).enumerate() {
            if w[1] <= w[0] || w[1] % w[0] != 0 {
                return Err(Error::TowerParameter(format!(
                    "a_{} / a_{} = {} / {} is not an integer above 1",
                    i + 2,
                    i + 1,
                    w[1],
                    w[0]
                )));
            }
        }
        let sum = ratio_sum(&a);
        if sum >= exact::half() {
            return Err(Error::TowerParameter(format!(
                "sum of a_n / a_(n+1) is {}, not below 1/2",
                exact::format(&sum)
            )));
        }
        Ok(Self { a, dim })
    }

    /// The tower with `a_n = R_n` for a radix sequence.
    pub fn for_radix(r: &[u64], dim: usize) -> Result<Self> {
        let mut a = Vec::with_capacity(r.len());
        let mut prod: u64 = 1;
        for &ri in r {
            prod = prod
                .checked_mul(ri)
                .ok_or_else(|| Error::TowerParameter("side length overflows u64".into()))?;
            a.push(prod);
        }
        Self::new(a, dim)
    }

    pub fn sides(&self) -> &[u64] {
        &self.a
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `a_n`, 1-based.
    pub fn side(&self, n: usize) -> u64 {
        self.a[n - 1]
    }

    pub fn side_rat(&self, n: usize) -> Rational {
        exact::int(self.side(n) as i64)
    }

    /// `a_n / a_{n-1}` for `n >= 2`.
    pub fn ratio(&self, n: usize) -> u64 {
        self.side(n) / self.side(n - 1)
    }

    pub fn ratio_sum(&self) -> Rational {
        ratio_sum(&self.a)
    }

    /// The closure of `S_n`.
    pub fn shape(&self, n: usize) -> RBox {
        RBox {
            lo: vec![Rational::zero(); self.dim],
            hi: vec![self.side_rat(n); self.dim],
        }
    }
}

/// The Wilson score interval for `hits / trials` at `z` standard deviations.
pub fn wilson_interval(hits: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelCheck {
    pub n: usize,
    pub side: u64,
    /// `T_z b` pairwise distinct over the test lattice, for every tested base point.
    pub disjoint: bool,
    pub lattice_points: usize,
    pub base_points: usize,
    /// `tower_coordinates(T_z b) = (z, b)` on the test lattice.
    pub coordinates_consistent: bool,
    /// `S_n B_n` inside `S_{n+1} B_{n+1}` on every sample; absent at the top level.
    pub nesting: Option<bool>,
    pub hits: usize,
    pub samples: usize,
    pub coverage: f64,
    pub coverage_interval: (f64, f64),
    pub exact_coverage: Option<String>,
    pub coverage_consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TowerReport {
    pub model: String,
    pub exact: bool,
    pub a: Vec<u64>,
    pub ratio_sum: String,
    pub levels: Vec<LevelCheck>,
    pub coverage_monotone: bool,
    pub passed: bool,
    pub first_violation: Option<String>,
}

/// Points `(a_n / per_axis) i`, `i in {0, .., per_axis - 1}^dim`.
fn test_lattice(side: u64, dim: usize, per_axis: u64) -> Vec<Vec<Rational>> {
    let step = Rational::new(BigInt::from(side), BigInt::from(per_axis));
    let axis: Vec<Rational> = (0..per_axis).map(|i| &step * exact::int(i as i64)).collect();
    crate::polyconvex::cartesian_product(&vec![axis; dim])
}

const LATTICE_PER_AXIS: u64 = 4;
const BASE_POINTS: usize = 4;
const SIGMAS: f64 = 3.0;

/// Checks disjointness and freeness on a test lattice, nesting on samples, and coverage
/// against a Wilson interval (or exactly, for exact models).
pub fn validate_tower<M: ActionModel>(t: &TowerData, m: &M, samples: usize, seed: u64) -> Result<TowerReport> {
    if m.dim() != t.dim() {
        return Err(Error::Dimension {
            expected: t.dim(),
            found: m.dim(),
        });
    }
    if m.levels() < t.len() || (1..=t.len()).any(|n| m.side(n) != t.side(n)) {
        return Err(Error::TowerParameter(format!(
            "model sides do not match the tower {:?}",
            t.sides()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..samples).map(|_| m.sample(&mut rng)).collect::<Result<Vec<_>>>()?;
    let inside: Vec<Vec<bool>> = points
        .iter()
        .map(|x| (1..=t.len()).map(|n| m.tower_coordinates(n, x).is_some()).collect())
        .collect();

    let mut violation: Option<String> = None;
    let mut note = |ok: bool, what: String| {
        if !ok && violation.is_none() {
            violation = Some(what);
        }
    };
    let mut levels = Vec::new();
    for n in 1..=t.len() {
        let lattice = test_lattice(t.side(n), t.dim(), LATTICE_PER_AXIS);
        let bases: Vec<M::State> = m.base_types(n).into_iter().take(BASE_POINTS).collect();
        let mut disjoint = true;
        let mut consistent = true;
        for b in &bases {
            let images: Vec<M::State> = lattice.iter().map(|z| m.apply(z, b)).collect();
            let mut codes: Vec<String> = images.iter().map(|x| m.encode(x)).collect();
            codes.sort();
            codes.dedup();
            disjoint &= codes.len() == lattice.len();
            for (z, x) in lattice.iter().zip(&images) {
                consistent &= m.tower_coordinates(n, x).is_some_and(|(w, c)| &w == z && &c == b);
            }
        }
        note(disjoint, format!("level {n}: translates of a base point coincide on the test lattice"));
        note(consistent, format!("level {n}: tower coordinates do not invert the action"));

        let hits = inside.iter().filter(|v| v[n - 1]).count();
        let nesting = (n < t.len()).then(|| inside.iter().all(|v| !v[n - 1] || v[n]));
        note(nesting != Some(false), format!("level {n}: a sample of S_n B_n lies outside S_(n+1) B_(n+1)"));
        let coverage = if samples == 0 { 0.0 } else { hits as f64 / samples as f64 };
        let interval = wilson_interval(hits, samples, SIGMAS);
        let exact_cov = m.exact_coverage(n);
        let coverage_consistent = match &exact_cov {
            _ if samples == 0 => true,
            Some(c) if c.is_one() => hits == samples,
            Some(c) => {
                let v = exact::to_f64(c);
                interval.0 <= v && v <= interval.1
            }
            None => true,
        };
        note(coverage_consistent, format!("level {n}: sampled coverage disagrees with the exact value"));
        levels.push(LevelCheck {
            n,
            side: t.side(n),
            disjoint,
            lattice_points: lattice.len(),
            base_points: bases.len(),
            coordinates_consistent: consistent,
            nesting,
            hits,
            samples,
            coverage,
            coverage_interval: interval,
            exact_coverage: exact_cov.as_ref().map(exact::format),
            coverage_consistent,
        });
    }
    let coverage_monotone = levels.windows(2).all(|w| w[0].hits <= w[1].hits)
        && (1..t.len()).all(|n| match (m.exact_coverage(n), m.exact_coverage(n + 1)) {
            (Some(a), Some(b)) => a <= b,
            _ => true,
        });
    note(coverage_monotone, "coverage is not monotone in n".into());
    Ok(TowerReport {
        model: m.name().to_string(),
        exact: m.exact(),
        a: t.sides().to_vec(),
        ratio_sum: exact::format(&t.ratio_sum()),
        levels,
        coverage_monotone,
        passed: violation.is_none(),
        first_violation: violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solenoid::RadixSequence;

    #[test]
    fn ratio_rules() {
        assert!(matches!(TowerData::new(vec![1, 3, 9], 2), Err(Error::TowerParameter(_))));
        assert!(matches!(TowerData::new(vec![1, 4, 16], 2), Err(Error::TowerParameter(_))));
        assert!(matches!(TowerData::new(vec![2, 8, 32], 2), Err(Error::TowerParameter(_))));
        assert!(matches!(TowerData::new(vec![2, 7], 2), Err(Error::TowerParameter(_))));
        let t = TowerData::new(vec![2, 16, 128], 2).unwrap();
        assert_eq!(t.ratio_sum(), exact::ratio(1, 4));
        assert_eq!(t.ratio(3), 8);
        assert_eq!(TowerData::for_radix(&[2, 8, 8], 2).unwrap(), t);
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(serde_json::from_str::<TowerData>(&json).unwrap(), t);
        assert!(serde_json::from_str::<TowerData>(r#"{"a":[1,3,9],"dim":2}"#).is_err());
    }

    #[test]
    fn wilson_covers_the_proportion() {
        let (lo, hi) = wilson_interval(50, 100, 3.0);
        assert!(lo < 0.5 && 0.5 < hi);
        assert!(wilson_interval(100, 100, 3.0).1 > 0.999_999);
        assert!(wilson_interval(100, 100, 3.0).0 > 0.9);
    }

    #[test]
    fn solenoid_tower_passes_exactly() {
        let t = TowerData::new(vec![2, 16, 128], 2).unwrap();
        let m = SolenoidModel::new(RadixSequence::new(vec![2, 8, 8], 2).unwrap(), 4).unwrap();
        let report = validate_tower(&t, &m, 200, 5).unwrap();
        assert!(report.passed, "{:?}", report.first_violation);
        assert!(report.exact);
        for level in &report.levels {
            assert_eq!(level.exact_coverage.as_deref(), Some("1/1"));
            assert_eq!(level.hits, 200);
            assert_eq!(level.lattice_points, 16);
        }
        let other = TowerData::new(vec![2, 32], 2).unwrap();
        assert!(matches!(validate_tower(&other, &m, 10, 5), Err(Error::TowerParameter(_))));
    }

    #[test]
    fn patch_tower_passes_statistically() {
        let t = TowerData::new(vec![2, 16, 128], 2).unwrap();
        let m = PatchTowerModel::new(&t, 4, 8, 3).unwrap();
        let report = validate_tower(&t, &m, 2000, 9).unwrap();
        assert!(report.passed, "{:?}", report.first_violation);
        assert!(!report.exact);
        assert!(report.levels[0].coverage < report.levels[2].coverage);
        assert_eq!(report.levels[2].exact_coverage.as_deref(), Some("1/1"));
    }
}
