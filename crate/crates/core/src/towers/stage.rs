use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::models::ActionModel;
use super::partition::{delta_fine_partition, return_sets, PartitionData, ReturnSet};
use super::TowerData;
use crate::error::{Error, Result};
use crate::exact::{self, Rational};
use crate::numeric::cabs;
use crate::polyconvex::{cartesian_product, decompose, nearest_lattice, DecompositionResult, RBox, UnitCube};
use crate::runge::{fit_polynomial, ApproxReport, ComplexPolynomial, FitOptions, Piece, PiecewiseTarget, Region};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralOptions {
    pub fit: FitOptions,
    /// Grid points per axis for Condition (D) measurements.
    pub grid: usize,
    pub random_points: usize,
    /// Grid points per axis for the sampled modulus of continuity.
    pub modulus_grid: usize,
    pub partition_cap: usize,
    /// Samples for coverage when the model has no exact value.
    pub coverage_samples: usize,
    pub seed: u64,
}

impl Default for GeneralOptions {
    fn default() -> Self {
        Self {
            fit: FitOptions::default(),
            grid: 50,
            random_points: 100,
            modulus_grid: 24,
            partition_cap: 4096,
            coverage_samples: 4000,
            seed: 0,
        }
    }
}

/// The translations `w_k` placing a copy of `S_{n-1}` near the center of each of the
/// `2^{dim}` sub-cubes of `S_n`, on the `a_{n-1}` lattice (ties to the smaller multiple).
pub fn centers_for(a_prev: u64, a_n: u64, dim: usize) -> Result<Vec<Vec<Rational>>> {
    if a_prev == 0 || a_n % a_prev != 0 {
        return Err(Error::TowerParameter(format!("{a_n} is not a multiple of {a_prev}")));
    }
    if a_n / a_prev < 2 {
        return Err(Error::TowerParameter(format!(
            "ratio a_n / a_(n-1) = {} leaves no room for center cubes",
            a_n / a_prev
        )));
    }
    let a = exact::int(a_prev as i64);
    let big = exact::int(a_n as i64);
    let half = &big / exact::int(2);
    let axis: Vec<Rational> = (0..2)
        .map(|q| {
            let lo = &half * exact::int(q);
            let ideal = &lo + &big / exact::int(4) - &a / exact::int(2);
            let m = nearest_lattice(&[&ideal / &a]).remove(0);
            let corner = exact::from_bigint(&m) * &a;
            if corner < lo || &corner + &a > &lo + &half {
                return Err(Error::Consistency(format!(
                    "no lattice copy of S_(n-1) fits in a half of [0, {a_n})"
                )));
            }
            Ok(corner)
        })
        .collect::<Result<_>>()?;
    Ok(cartesian_product(&vec![axis; dim]))
}

pub fn choose_centers(t: &TowerData, n: usize) -> Result<Vec<Vec<Rational>>> {
    if n < 2 || n > t.len() {
        return Err(Error::Depth {
            requested: n,
            available: t.len(),
        });
    }
    centers_for(t.side(n - 1), t.side(n), t.dim())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CubeRole {
    Center { k: usize },
    /// `lambda + S_{n-1}` returning to cell `cell` of the previous partition.
    Lambda { cell: usize },
}

/// The copy `corner + S_{n-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollectionCube {
    #[serde(with = "exact::serde_rat_vec")]
    pub corner: Vec<Rational>,
    pub role: CubeRole,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Collection {
    pub side: u64,
    pub outer: u64,
    pub cubes: Vec<CollectionCube>,
    pub dropped: Vec<CollectionCube>,
}

fn copies_meet(a: &[Rational], b: &[Rational], side: &Rational) -> bool {
    a.iter().zip(b).all(|(x, y)| {
        let d = x - y;
        (if d < Rational::zero() { -d } else { d }) < *side
    })
}

impl Collection {
    /// The cubes in the frame `u = z / a_{n-1} - 1/2`, where lattice copies are grid cubes.
    pub fn unit_cubes(&self) -> Vec<UnitCube> {
        let a = exact::int(self.side as i64);
        self.cubes
            .iter()
            .map(|c| UnitCube {
                center: c.corner.iter().map(|x| x / &a).collect(),
                half_open: true,
            })
            .collect()
    }

    /// Maps a box from the unit frame back to `S_n`.
    pub fn to_real(&self, b: &RBox) -> RBox {
        let a = exact::int(self.side as i64);
        let shift = vec![&a / exact::int(2); b.dim()];
        b.map_affine(&a, &shift)
    }
}

/// The center cubes together with every `lambda + S_{n-1}` that avoids them.
pub fn assemble_collection(
    sets: &[ReturnSet],
    centers: &[Vec<Rational>],
    a_prev: u64,
    a_n: u64,
) -> Result<Collection> {
    let side = exact::int(a_prev as i64);
    let outer = exact::int(a_n as i64);
    let mut cubes: Vec<CollectionCube> = centers
        .iter()
        .enumerate()
        .map(|(k, w)| CollectionCube {
            corner: w.clone(),
            role: CubeRole::Center { k },
        })
        .collect();
    let mut lambdas: Vec<CollectionCube> = sets
        .iter()
        .flat_map(|s| {
            s.points.iter().map(move |p| CollectionCube {
                corner: p.clone(),
                role: CubeRole::Lambda { cell: s.cell },
            })
        })
        .collect();
    lambdas.sort_by(|a, b| a.corner.cmp(&b.corner));
    let mut dropped = Vec::new();
    for l in lambdas {
        if centers.iter().any(|w| copies_meet(w, &l.corner, &side)) {
            dropped.push(l);
        } else {
            cubes.push(l);
        }
    }
    for (i, a) in cubes.iter().enumerate() {
        if a.corner.iter().any(|x| x < &Rational::zero() || &(x + &side) > &outer) {
            return Err(Error::Consistency(format!("cube {i} leaves S_n")));
        }
        for (j, b) in cubes.iter().enumerate().skip(i + 1) {
            if copies_meet(&a.corner, &b.corner, &side) {
                return Err(Error::NotDisjoint(i, j));
            }
        }
    }
    let dim = centers.first().map_or(0, Vec::len);
    let limit = 1usize << (2 * dim);
    if dropped.len() > limit {
        return Err(Error::Consistency(format!(
            "{} lambda cubes dropped, above {limit}",
            dropped.len()
        )));
    }
    Ok(Collection {
        side: a_prev,
        outer: a_n,
        cubes,
        dropped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStage {
    pub cell: usize,
    pub representative: String,
    /// `mu(S_n B_n^j)`.
    #[serde(with = "exact::serde_rat")]
    pub weight: Rational,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collection: Option<Collection>,
    /// In the unit frame of the collection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<DecompositionResult>,
    /// `m(union Q \ U) / m(S_{n-1})`.
    #[serde(default, with = "exact::serde_rat_opt", skip_serializing_if = "Option::is_none")]
    pub removed_fraction: Option<Rational>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poly: Option<ComplexPolynomial>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<ApproxReport>,
}

impl CellStage {
    /// Leaves of each collection cube, in the coordinates of `S_n`.
    fn real_leaves(&self) -> Vec<Vec<RBox>> {
        let (Some(col), Some(dec)) = (&self.collection, &self.decomposition) else {
            return Vec::new();
        };
        let mut out = vec![Vec::new(); col.cubes.len()];
        for leaf in &dec.boxes {
            out[leaf.cube].push(col.to_real(&leaf.rbox));
        }
        out
    }
}

/// The three summands bounding `mu(E_n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub n: usize,
    #[serde(with = "exact::serde_rat")]
    pub decomposition_loss: Rational,
    /// Mass of the dropped `lambda` cubes, `O(a_{n-1} / a_n)`.
    #[serde(with = "exact::serde_rat")]
    pub replaced: Rational,
    /// `mu(X \ X_{n-1})`.
    #[serde(with = "exact::serde_rat")]
    pub uncovered: Rational,
    pub uncovered_exact: bool,
    #[serde(with = "exact::serde_rat")]
    pub total: Rational,
    #[serde(with = "exact::serde_rat")]
    pub budget: Rational,
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainLink {
    pub level: usize,
    pub cell: usize,
    #[serde(with = "exact::serde_rat_vec")]
    pub shift: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionDCertificate {
    pub n: usize,
    pub cell: usize,
    pub k: usize,
    #[serde(with = "exact::serde_rat_vec")]
    pub translation: Vec<Rational>,
    pub chain: Vec<ChainLink>,
    /// The shrunken sub-cube, in the coordinates of `p_k`; absent when the shrinking
    /// empties it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<RBox>,
    pub grid: usize,
    pub measured_grid: f64,
    pub measured_random: f64,
    pub measured: f64,
    #[serde(with = "exact::serde_rat")]
    pub stated_bound: Rational,
    #[serde(with = "exact::serde_rat")]
    pub telescoped_bound: Rational,
    pub holds_stated: bool,
    pub holds_telescoped: bool,
    pub vacuous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralStage {
    pub n: usize,
    pub dim: usize,
    pub side: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prev_side: Option<u64>,
    #[serde(with = "exact::serde_rat")]
    pub delta_n: Rational,
    pub partition: PartitionData,
    #[serde(with = "exact::serde_rat_vec_vec")]
    pub centers: Vec<Vec<Rational>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_n: Option<ComplexPolynomial>,
    pub cells: Vec<CellStage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<ErrorBudget>,
    pub fitted: bool,
    pub notes: Vec<String>,
    pub condition_d: Vec<ConditionDCertificate>,
}

fn check_model<M: ActionModel>(m: &M, t: &TowerData) -> Result<()> {
    if m.dim() != t.dim() || m.levels() < t.len() || (1..=t.len()).any(|n| m.side(n) != t.side(n)) {
        return Err(Error::TowerParameter("model and tower data disagree".into()));
    }
    Ok(())
}

const SKIPPED: &str = "numeric fitting skipped: no approximation engine for d >= 2";

/// Stage 1: `F_1 = p_1` on the whole of `S_1`, one cell.
pub fn first_general_stage<M: ActionModel>(m: &M, p1: Option<&ComplexPolynomial>) -> Result<GeneralStage> {
    let partition = PartitionData::trivial(m, 1);
    let d1 = m.dim() == 2;
    if d1 && p1.is_none() {
        return Err(Error::Parameter("stage 1 needs p_1".into()));
    }
    let weight = m.exact_coverage(1).unwrap_or_else(Rational::one);
    Ok(GeneralStage {
        n: 1,
        dim: m.dim(),
        side: m.side(1),
        prev_side: None,
        delta_n: Rational::one(),
        centers: Vec::new(),
        p_n: p1.cloned(),
        cells: vec![CellStage {
            cell: 0,
            representative: partition.cells[0].encoding.clone(),
            weight,
            collection: None,
            decomposition: None,
            removed_fraction: None,
            poly: if d1 { p1.cloned() } else { None },
            report: None,
        }],
        partition,
        budget: None,
        fitted: d1,
        notes: if d1 { Vec::new() } else { vec![SKIPPED.into()] },
        condition_d: Vec::new(),
    })
}

/// Largest power of two at most `x`, for `0 < x`.
fn dyadic_floor(x: f64) -> Rational {
    let mut k = 0u32;
    while 2f64.powi(-(k as i32)) > x && k < 1000 {
        k += 1;
    }
    exact::two_pow_neg(k)
}

/// `delta_n` from a sampled Lipschitz bound of the previous maps on `S_{n-1}^{+1}`,
/// targeting an oscillation of `10^{-2n} / 2`.
fn modulus_delta(prev: &GeneralStage, n: usize, grid: usize) -> (Rational, Option<String>) {
    let polys: Option<Vec<&ComplexPolynomial>> = prev.cells.iter().map(|c| c.poly.as_ref()).collect();
    let Some(polys) = polys.filter(|_| prev.dim == 2) else {
        return (
            exact::half(),
            Some("delta_n defaults to 1/2: previous maps unavailable".into()),
        );
    };
    let a = prev.side as f64;
    let g = grid.max(2);
    let mut lip: f64 = 0.0;
    for p in polys {
        let dp = p.derivative();
        for i in 0..g {
            for k in 0..g {
                let x = -1.0 + (a + 2.0) * i as f64 / (g - 1) as f64;
                let y = -1.0 + (a + 2.0) * k as f64 / (g - 1) as f64;
                lip = lip.max(dp.eval_f64(x, y).norm());
            }
        }
    }
    let target = 0.5 * 10f64.powi(-2 * n as i32);
    if lip <= 0.0 {
        return (exact::half(), None);
    }
    (dyadic_floor((target / lip).min(0.5)), None)
}

/// `mu(S_n B_n)`: exact when the model knows it, otherwise a Monte Carlo estimate.
fn coverage<M: ActionModel>(m: &M, n: usize, samples: usize, seed: u64) -> Result<(Rational, bool)> {
    if let Some(c) = m.exact_coverage(n) {
        return Ok((c, true));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..samples {
        if m.tower_coordinates(n, &m.sample(&mut rng)?).is_some() {
            hits += 1;
        }
    }
    Ok((Rational::new(BigInt::from(hits), BigInt::from(samples.max(1))), false))
}

/// Geometry of stage `n`: partition, centers, collections, decompositions and the
/// `E_n` budget. Fitting is left to [`fit_stage`].
pub fn layout_stage<M: ActionModel>(
    m: &M,
    t: &TowerData,
    prev: &GeneralStage,
    opts: &GeneralOptions,
) -> Result<GeneralStage> {
    check_model(m, t)?;
    let n = prev.n + 1;
    if n > t.len() {
        return Err(Error::Depth {
            requested: n,
            available: t.len(),
        });
    }
    let dim = t.dim();
    let (a, big) = (t.side(n - 1), t.side(n));
    let (delta_n, note) = modulus_delta(prev, n, opts.modulus_grid);
    let partition = delta_fine_partition(m, n, &delta_n, Some(&prev.partition), opts.partition_cap)?;
    let centers = centers_for(a, big, dim)?;
    let (cov_n, _) = coverage(m, n, opts.coverage_samples, opts.seed ^ n as u64)?;
    let (cov_prev, cov_exact) = coverage(m, n - 1, opts.coverage_samples, opts.seed ^ (n as u64 - 1))?;
    let eps = exact::two_pow_neg(n as u32);
    let scale = exact::pow(&Rational::new(BigInt::from(a), BigInt::from(big)), dim);
    let types = m.base_types(n);

    let mut cells = Vec::with_capacity(partition.cell_count());
    let mut loss = Rational::zero();
    let mut replaced = Rational::zero();
    for (j, cell) in partition.cells.iter().enumerate() {
        let wrap = |e: Error| Error::Stage {
            stage: n,
            cell: j,
            source: Box::new(e),
        };
        let sets = return_sets(m, &types[cell.representative], n, &prev.partition).map_err(wrap)?;
        let collection = assemble_collection(&sets, &centers, a, big).map_err(wrap)?;
        let dec = decompose(&collection.unit_cubes(), &eps).map_err(wrap)?;
        let weight = &cov_n * partition.share(j);
        loss += &weight * &dec.removed_measure * &scale;
        replaced += &weight * exact::int(collection.dropped.len() as i64) * &scale;
        cells.push(CellStage {
            cell: j,
            representative: cell.encoding.clone(),
            weight,
            removed_fraction: Some(dec.removed_measure.clone()),
            collection: Some(collection),
            decomposition: Some(dec),
            poly: None,
            report: None,
        });
    }
    let uncovered = Rational::one() - cov_prev;
    let total = &loss + &replaced + &uncovered;
    let within = total < eps;
    Ok(GeneralStage {
        n,
        dim,
        side: big,
        prev_side: Some(a),
        delta_n,
        partition,
        centers,
        p_n: None,
        cells,
        budget: Some(ErrorBudget {
            n,
            decomposition_loss: loss,
            replaced,
            uncovered,
            uncovered_exact: cov_exact,
            total,
            budget: eps,
            within,
        }),
        fitted: false,
        notes: note.into_iter().collect(),
        condition_d: Vec::new(),
    })
}

fn to_complex(v: &[Rational]) -> exact::ComplexRational {
    exact::complex(v[0].clone(), v[1].clone())
}

fn rect(b: &RBox) -> Result<Region> {
    Region::rect(b.lo[0].clone(), b.hi[0].clone(), b.lo[1].clone(), b.hi[1].clone())
}

/// Fits `F_n^j` to `G_n^j` on `U_n^j` with error `2^{-n}`: `p_n(z - w_k)` on center cubes,
/// `F_{n-1}^l(z - lambda)` on the others. A no-op recorded in the notes when `d >= 2`.
pub fn fit_stage(
    stage: &mut GeneralStage,
    prev: &GeneralStage,
    p_n: &ComplexPolynomial,
    opts: &GeneralOptions,
) -> Result<()> {
    if stage.dim != 2 {
        stage.notes.push(SKIPPED.into());
        return Ok(());
    }
    let n = stage.n;
    let eps = exact::two_pow_neg(n as u32);
    for cell in &mut stage.cells {
        let j = cell.cell;
        let wrap = |e: Error| Error::Stage {
            stage: n,
            cell: j,
            source: Box::new(e),
        };
        let (Some(col), Some(dec)) = (&cell.collection, &cell.decomposition) else {
            return Err(wrap(Error::Consistency("cell has no decomposition".into())));
        };
        let mut pieces = Vec::with_capacity(dec.boxes.len());
        for leaf in &dec.boxes {
            let cube = &col.cubes[leaf.cube];
            let region = rect(&col.to_real(&leaf.rbox)).map_err(wrap)?;
            let target = match cube.role {
                CubeRole::Center { .. } => p_n.clone(),
                CubeRole::Lambda { cell: l } => prev.cells[l]
                    .poly
                    .clone()
                    .ok_or_else(|| wrap(Error::Consistency(format!("F_(n-1) of cell {l} is missing"))))?,
            };
            pieces.push(Piece::with_shift(region, target, to_complex(&cube.corner)));
        }
        let target = PiecewiseTarget::new(pieces).map_err(wrap)?;
        let (poly, report) = fit_polynomial(&target, &eps, &opts.fit).map_err(wrap)?;
        cell.poly = Some(poly);
        cell.report = Some(report);
    }
    stage.p_n = Some(p_n.clone());
    stage.fitted = true;
    Ok(())
}

/// Layout, budget assertion and fit of stage `n`.
pub fn general_stage<M: ActionModel>(
    m: &M,
    t: &TowerData,
    prev: &GeneralStage,
    p_n: Option<&ComplexPolynomial>,
    opts: &GeneralOptions,
) -> Result<GeneralStage> {
    let mut stage = layout_stage(m, t, prev, opts)?;
    let budget = stage.budget.as_ref().expect("layout sets the budget");
    if !budget.within {
        return Err(Error::Budget {
            stage: stage.n,
            estimate: exact::format(&budget.total),
            budget: exact::format(&budget.budget),
        });
    }
    match p_n {
        Some(p) => fit_stage(&mut stage, prev, p, opts)?,
        None if stage.dim == 2 => return Err(Error::Parameter(format!("stage {} needs p_n", stage.n))),
        None => stage.notes.push(SKIPPED.into()),
    }
    Ok(stage)
}

fn sum_pow2(from: usize, to: usize) -> Rational {
    (from..=to).fold(Rational::zero(), |acc, l| acc + exact::two_pow_neg(l as u32))
}

fn shifted(b: &RBox, v: &[Rational]) -> RBox {
    b.map_affine(&Rational::one(), v)
}

fn add(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

type Reach = Vec<Option<(Vec<Rational>, Vec<ChainLink>)>>;

/// Follows `p_k` from its planting through the kept cubes of stages `k+1..n`, for a region
/// that stays inside the decomposition leaves at every step.
fn find_chain(stages: &[GeneralStage], j: usize, k: usize, region: &RBox) -> Option<(Vec<Rational>, Vec<ChainLink>)> {
    let n = stages.len();
    let dim = stages[0].dim;
    let first = &stages[k - 1];
    let mut reach: Reach = vec![None; first.cells.len()];
    for (c, cell) in first.cells.iter().enumerate() {
        if k == 1 {
            let zero = vec![Rational::zero(); dim];
            reach[c] = Some((
                zero.clone(),
                vec![ChainLink {
                    level: 1,
                    cell: c,
                    shift: zero,
                }],
            ));
            continue;
        }
        let leaves = cell.real_leaves();
        let col = cell.collection.as_ref()?;
        reach[c] = col.cubes.iter().enumerate().find_map(|(idx, cube)| {
            if !matches!(cube.role, CubeRole::Center { .. }) {
                return None;
            }
            let placed = shifted(region, &cube.corner);
            leaves[idx].iter().any(|l| l.contains_box(&placed)).then(|| {
                (
                    cube.corner.clone(),
                    vec![ChainLink {
                        level: k,
                        cell: c,
                        shift: cube.corner.clone(),
                    }],
                )
            })
        });
    }
    for level in k + 1..=n {
        let stage = &stages[level - 1];
        let mut next: Reach = vec![None; stage.cells.len()];
        for (c, cell) in stage.cells.iter().enumerate() {
            let leaves = cell.real_leaves();
            let col = cell.collection.as_ref()?;
            next[c] = col.cubes.iter().enumerate().find_map(|(idx, cube)| {
                let CubeRole::Lambda { cell: l } = cube.role else {
                    return None;
                };
                let (shift, links) = reach.get(l)?.as_ref()?;
                let total = add(shift, &cube.corner);
                let placed = shifted(region, &total);
                leaves[idx].iter().any(|b| b.contains_box(&placed)).then(|| {
                    let mut links = links.clone();
                    links.push(ChainLink {
                        level,
                        cell: c,
                        shift: cube.corner.clone(),
                    });
                    (total, links)
                })
            });
        }
        reach = next;
    }
    reach.get(j).cloned().flatten()
}

fn grid_points(region: &RBox, g: usize) -> Vec<Vec<Rational>> {
    let g = g.max(2);
    let axes: Vec<Vec<Rational>> = (0..region.dim())
        .map(|k| {
            let w = region.width(k);
            (0..g)
                .map(|i| &region.lo[k] + &w * Rational::new(BigInt::from(i), BigInt::from(g - 1)))
                .collect()
        })
        .collect();
    cartesian_product(&axes)
}

/// Condition (D) for `F_n^j` and `p_k`: a translation `w` and a sub-cube `Q_k` with
/// `|F_n^j(w + z) - p_k(z)|` measured on `Q_k` shrunk by `sum_{m=k}^n 2^{-m}`.
///
/// The asserted bound is `sum_{l=k+1}^n 2^{-l}` (the fit error `2^{-n}` when `k = n`); the
/// telescoped bound `sum_{l=k}^n 2^{-l}` is reported alongside.
pub fn condition_d_check(
    stages: &[GeneralStage],
    j: usize,
    k: usize,
    opts: &GeneralOptions,
) -> Result<ConditionDCertificate> {
    let n = stages.len();
    if k == 0 || k > n {
        return Err(Error::Depth {
            requested: k,
            available: n,
        });
    }
    let top = &stages[n - 1];
    if top.dim != 2 {
        return Err(Error::Parameter("Condition (D) is measured for d = 1 only".into()));
    }
    let f = top
        .cells
        .get(j)
        .and_then(|c| c.poly.as_ref())
        .ok_or_else(|| Error::Consistency(format!("F_{n} of cell {j} is not available")))?;
    let p_k = stages[k - 1]
        .p_n
        .as_ref()
        .ok_or_else(|| Error::Consistency(format!("p_{k} is not available")))?;
    let planting = if k == 1 { stages[0].side } else { stages[k - 1].prev_side.unwrap_or(1) };
    let s = exact::int(planting as i64);
    let shrink = sum_pow2(k, n);
    let stated = if k == n { exact::two_pow_neg(n as u32) } else { sum_pow2(k + 1, n) };
    let telescoped = sum_pow2(k, n);
    let mut vacuous = true;
    let mut found = None;
    for q in cartesian_product(&vec![vec![0i64, 1]; 2]) {
        let lo: Vec<Rational> = q.iter().map(|&i| &s * exact::ratio(i, 2)).collect();
        let hi: Vec<Rational> = lo.iter().map(|x| x + &s / exact::int(2)).collect();
        let Some(region) = (RBox { lo, hi }).inset(&shrink) else {
            continue;
        };
        vacuous = false;
        if let Some((w, chain)) = find_chain(stages, j, k, &region) {
            found = Some((region, w, chain));
            break;
        }
    }
    let cert = |translation, chain, region, grid_sup: f64, random_sup: f64, vacuous| {
        let measured = grid_sup.max(random_sup);
        ConditionDCertificate {
            n,
            cell: j,
            k,
            translation,
            chain,
            region,
            grid: opts.grid,
            measured_grid: grid_sup,
            measured_random: random_sup,
            measured,
            holds_stated: measured <= exact::to_f64(&stated),
            holds_telescoped: measured <= exact::to_f64(&telescoped),
            stated_bound: stated.clone(),
            telescoped_bound: telescoped.clone(),
            vacuous,
        }
    };
    if vacuous {
        return Ok(cert(Vec::new(), Vec::new(), None, 0.0, 0.0, true));
    }
    let (region, w, chain) =
        found.ok_or_else(|| Error::Consistency(format!("no sub-cube chain carries p_{k} into F_{n} of cell {j}")))?;
    let err_at = |z: &[Rational]| -> f64 {
        let zc = to_complex(z);
        let moved = to_complex(&add(&w, z));
        let d = f.eval_exact(&moved) - p_k.eval_exact(&zc);
        let v = cabs(d);
        v.hi() + v.lo()
    };
    let grid_sup = grid_points(&region, opts.grid)
        .iter()
        .map(|z| err_at(z))
        .fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ ((n as u64) << 32) ^ ((k as u64) << 16) ^ j as u64);
    let denom = BigInt::from(1u64 << 20);
    let random_sup = (0..opts.random_points)
        .map(|_| {
            let z: Vec<Rational> = (0..2)
                .map(|ax| {
                    let u = Rational::new(BigInt::from(rng.random_range(0..=(1u64 << 20))), denom.clone());
                    &region.lo[ax] + region.width(ax) * u
                })
                .collect();
            err_at(&z)
        })
        .fold(0.0, f64::max);
    Ok(cert(w, chain, Some(region), grid_sup, random_sup, false))
}

/// Runs stages `1..=stages`, attaching Condition (D) certificates for every cell and every
/// `k <= n` once a stage is fitted.
pub fn run_general<M: ActionModel>(
    m: &M,
    t: &TowerData,
    polys: &[ComplexPolynomial],
    stages: usize,
    opts: &GeneralOptions,
) -> Result<Vec<GeneralStage>> {
    check_model(m, t)?;
    if stages == 0 || stages > t.len() {
        return Err(Error::Depth {
            requested: stages,
            available: t.len(),
        });
    }
    let d1 = t.dim() == 2;
    if d1 && polys.len() < stages {
        return Err(Error::Parameter(format!("{stages} stages need {stages} polynomials")));
    }
    let mut out = vec![first_general_stage(m, polys.first())?];
    for n in 2..=stages {
        let next = general_stage(m, t, &out[n - 2], polys.get(n - 1).filter(|_| d1), opts)?;
        out.push(next);
    }
    if d1 {
        for n in 1..=stages {
            let mut certs = Vec::new();
            for j in 0..out[n - 1].cells.len() {
                for k in 1..=n {
                    certs.push(condition_d_check(&out[..n], j, k, opts)?);
                }
            }
            out[n - 1].condition_d = certs;
        }
    }
    Ok(out)
}

/// `sum_n E_n` over the budgeted stages, and whether every term is below its `2^{-n}`.
pub fn budget_ledger(stages: &[GeneralStage]) -> (Rational, bool) {
    stages
        .iter()
        .filter_map(|s| s.budget.as_ref())
        .fold((Rational::zero(), true), |(sum, ok), b| (sum + &b.total, ok && b.within))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solenoid::RadixSequence;
    use crate::towers::{PartitionData, PatchTowerModel, SolenoidModel};

    fn v(x: i64, y: i64) -> Vec<Rational> {
        vec![exact::int(x), exact::int(y)]
    }

    #[test]
    fn center_examples() {
        assert_eq!(centers_for(2, 8, 2).unwrap(), vec![v(0, 0), v(0, 4), v(4, 0), v(4, 4)]);
        assert_eq!(centers_for(1, 2, 2).unwrap(), vec![v(0, 0), v(0, 1), v(1, 0), v(1, 1)]);
        assert_eq!(centers_for(2, 16, 2).unwrap()[3], v(10, 10));
        assert!(matches!(centers_for(4, 4, 2), Err(Error::TowerParameter(_))));
        assert_eq!(centers_for(2, 16, 4).unwrap().len(), 16);
    }

    fn solenoid_sets(r: Vec<u64>) -> (SolenoidModel, Vec<ReturnSet>) {
        let m = SolenoidModel::new(RadixSequence::new(r, 2).unwrap(), 4).unwrap();
        let p1 = PartitionData::trivial(&m, 1);
        let sets = return_sets(&m, &m.base_types(2)[0], 2, &p1).unwrap();
        (m, sets)
    }

    #[test]
    fn solenoid_collection_drops_one_cube_per_center() {
        let (_, sets) = solenoid_sets(vec![2, 4]);
        let centers = centers_for(2, 8, 2).unwrap();
        let col = assemble_collection(&sets, &centers, 2, 8).unwrap();
        assert_eq!(col.dropped.len(), 4);
        assert_eq!(col.cubes.len(), 16);
        assert!(col.unit_cubes().iter().all(UnitCube::is_grid_cube));
    }

    #[test]
    fn rescaled_decomposition_matches_direct_insets() {
        let (_, sets) = solenoid_sets(vec![2, 4]);
        let col = assemble_collection(&sets, &centers_for(2, 8, 2).unwrap(), 2, 8).unwrap();
        let eps = exact::ratio(1, 4);
        let dec = decompose(&col.unit_cubes(), &eps).unwrap();
        let real_delta = &dec.delta * exact::int(2);
        for leaf in &dec.boxes {
            let corner = &col.cubes[leaf.cube].corner;
            let direct = RBox {
                lo: corner.clone(),
                hi: corner.iter().map(|c| c + exact::int(2)).collect(),
            }
            .inset(&real_delta)
            .unwrap();
            assert_eq!(col.to_real(&leaf.rbox), direct);
        }
    }

    #[test]
    fn patch_collection_respects_the_drop_limit() {
        let t = TowerData::new(vec![2, 16, 128], 2).unwrap();
        let m = PatchTowerModel::new(&t, 4, 8, 5).unwrap();
        let p1 = PartitionData::trivial(&m, 1);
        let centers = centers_for(2, 16, 2).unwrap();
        for b in m.base_types(2).iter().take(10) {
            let sets = return_sets(&m, b, 2, &p1).unwrap();
            let col = assemble_collection(&sets, &centers, 2, 16).unwrap();
            assert!(col.dropped.len() <= 16);
            assert_eq!(col.cubes.len() + col.dropped.len(), 4 + 49);
        }
    }

    #[test]
    fn constant_stages_certify_condition_d() {
        let seq = RadixSequence::new(vec![2, 8, 8], 2).unwrap();
        let t = TowerData::for_radix(&[2, 8, 8], 2).unwrap();
        let m = SolenoidModel::new(seq, 4).unwrap();
        let c = ComplexPolynomial::constant_f64(0.25, -0.5);
        let polys = vec![c.clone(), c.clone(), c];
        let stages = run_general(&m, &t, &polys, 3, &GeneralOptions::default()).unwrap();
        let b2 = stages[1].budget.as_ref().unwrap();
        assert_eq!(b2.replaced, exact::ratio(1, 16));
        assert!(b2.uncovered.is_zero() && b2.within);
        let (sum, ok) = budget_ledger(&stages);
        assert!(ok && sum < Rational::one());
        let certs = &stages[2].condition_d;
        assert_eq!(certs.len(), 3);
        for cert in certs {
            assert!(cert.holds_stated, "{cert:?}");
            assert!(cert.vacuous || cert.measured == 0.0);
        }
        assert!(certs[0].vacuous);
        assert_eq!(certs[1].chain.len(), 2);
        assert_eq!(stages[0].condition_d[0].measured, 0.0);
    }

    #[test]
    fn ratio_four_breaks_the_budget() {
        let seq = RadixSequence::new(vec![2, 4, 8], 2).unwrap();
        let t = TowerData::for_radix(&[2, 4, 8], 2).unwrap();
        let m = SolenoidModel::new(seq, 4).unwrap();
        let first = first_general_stage(&m, Some(&ComplexPolynomial::zero())).unwrap();
        let opts = GeneralOptions::default();
        let layout = layout_stage(&m, &t, &first, &opts).unwrap();
        let b = layout.budget.as_ref().unwrap();
        assert_eq!(b.replaced, exact::ratio(1, 4));
        assert!(!b.within);
        let err = general_stage(&m, &t, &first, Some(&ComplexPolynomial::zero()), &opts);
        assert!(matches!(err, Err(Error::Budget { stage: 2, .. })));
        let other = TowerData::new(vec![2, 16, 128], 2).unwrap();
        assert!(matches!(layout_stage(&m, &other, &first, &opts), Err(Error::TowerParameter(_))));
    }
}
