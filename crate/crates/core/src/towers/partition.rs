use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::models::ActionModel;
use crate::error::{Error, Result};
use crate::exact::{self, Rational};

/// `R_n^l(x)`: the `z in S_n` with `T_z x` in the cell `l` of the level `n - 1` partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReturnSet {
    pub n: usize,
    pub cell: usize,
    pub owner: String,
    #[serde(with = "exact::serde_rat_vec_vec")]
    pub points: Vec<Vec<Rational>>,
}

fn linf(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            if d < Rational::zero() {
                -d
            } else {
                d
            }
        })
        .max()
        .unwrap_or_else(Rational::zero)
}

impl ReturnSet {
    /// Smallest sup-norm distance between two points; `None` below two points.
    pub fn min_spacing(&self) -> Option<Rational> {
        let mut best: Option<Rational> = None;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                let d = linf(a, b);
                if best.as_ref().is_none_or(|m| &d < m) {
                    best = Some(d);
                }
            }
        }
        best
    }

    pub fn spaced_at_least(&self, a: &Rational) -> bool {
        self.min_spacing().is_none_or(|d| &d >= a)
    }

    pub fn spaced_beyond(&self, a: &Rational) -> bool {
        self.min_spacing().is_none_or(|d| &d > a)
    }
}

/// A partition of the base types of `B_n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionCell {
    /// Base types in this cell, increasing.
    pub types: Vec<usize>,
    /// The smallest type, whose canonical state is the representative `x_n^j`.
    pub representative: usize,
    pub encoding: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionData {
    pub level: usize,
    #[serde(with = "exact::serde_rat")]
    pub delta: Rational,
    /// Quantisation step `h` with `h sqrt(dim) <= delta`.
    #[serde(with = "exact::serde_rat")]
    pub quantum: Rational,
    pub cells: Vec<PartitionCell>,
    pub type_cell: Vec<usize>,
}

impl PartitionData {
    pub fn trivial<M: ActionModel>(m: &M, level: usize) -> Self {
        let types = m.base_types(level);
        let encoding = m.encode(&types[0]);
        Self {
            level,
            delta: Rational::one(),
            quantum: Rational::one(),
            cells: vec![PartitionCell {
                types: (0..types.len()).collect(),
                representative: 0,
                encoding,
            }],
            type_cell: vec![0; types.len()],
        }
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_of_type(&self, t: usize) -> usize {
        self.type_cell[t]
    }

    /// `mu(S_n B_n^j) / mu(S_n B_n)`, counting base types with equal weight.
    pub fn share(&self, j: usize) -> Rational {
        Rational::new(
            BigInt::from(self.cells[j].types.len()),
            BigInt::from(self.type_cell.len()),
        )
    }
}

/// The return sets of `x in B_n`, one per cell of `prev`, with spacing at least `a_{n-1}`.
pub fn return_sets<M: ActionModel>(
    m: &M,
    x: &M::State,
    n: usize,
    prev: &PartitionData,
) -> Result<Vec<ReturnSet>> {
    if prev.level + 1 != n {
        return Err(Error::Parameter(format!(
            "return sets at level {n} need the partition of level {}, got {}",
            n - 1,
            prev.level
        )));
    }
    let owner = m.encode(x);
    let mut sets: Vec<ReturnSet> = (0..prev.cell_count())
        .map(|cell| ReturnSet {
            n,
            cell,
            owner: owner.clone(),
            points: Vec::new(),
        })
        .collect();
    for (z, y) in m.returns(n, x)? {
        let t = m.base_type(n - 1, &y)?;
        sets[prev.cell_of_type(t)].points.push(z);
    }
    let a = exact::int(m.side(n - 1) as i64);
    for s in &sets {
        if !s.spaced_at_least(&a) {
            return Err(Error::Consistency(format!(
                "return set of cell {} has spacing below a_{}",
                s.cell,
                n - 1
            )));
        }
    }
    Ok(sets)
}

/// Squared Euclidean Hausdorff distance; `None` when exactly one set is empty.
pub fn hausdorff_sq(a: &[Vec<Rational>], b: &[Vec<Rational>]) -> Option<Rational> {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => return Some(Rational::zero()),
        (true, false) | (false, true) => return None,
        _ => {}
    }
    let d2 = |p: &[Rational], q: &[Rational]| -> Rational {
        p.iter()
            .zip(q)
            .map(|(x, y)| {
                let d = x - y;
                &d * &d
            })
            .fold(Rational::zero(), |acc, v| acc + v)
    };
    let directed = |from: &[Vec<Rational>], to: &[Vec<Rational>]| -> Rational {
        from.iter()
            .map(|p| to.iter().map(|q| d2(p, q)).min().expect("nonempty"))
            .max()
            .expect("nonempty")
    };
    let x = directed(a, b);
    let y = directed(b, a);
    Some(if x > y { x } else { y })
}

/// Largest dyadic `h` with `h^2 dim <= delta^2`.
fn quantum_for(delta: &Rational, dim: usize) -> Rational {
    let target = delta * delta;
    let d = exact::int(dim as i64);
    let mut k = 0u32;
    loop {
        let h = exact::two_pow_neg(k);
        if &h * &h * &d <= target {
            return h;
        }
        k += 1;
    }
}

type Key = Vec<Vec<Vec<BigInt>>>;

fn quantized_key(sets: &[ReturnSet], h: &Rational) -> Key {
    sets.iter()
        .map(|s| {
            let mut pts: Vec<Vec<BigInt>> = s
                .points
                .iter()
                .map(|p| p.iter().map(|c| exact::floor_int(&(c / h))).collect())
                .collect();
            pts.sort();
            pts
        })
        .collect()
}

/// Groups base types whose return sets agree after quantising at the largest dyadic step
/// `h` with `h sqrt(dim) <= delta`. Matching quantised points differ by less than `h` in
/// every coordinate, so each cell is `delta`-fine; a smaller `delta` refines the cells.
pub fn delta_fine_partition<M: ActionModel>(
    m: &M,
    n: usize,
    delta: &Rational,
    prev: Option<&PartitionData>,
    cap: usize,
) -> Result<PartitionData> {
    if delta <= &Rational::zero() {
        return Err(Error::Parameter("delta must be positive".into()));
    }
    let prev = match prev {
        None if n == 1 => {
            let mut p = PartitionData::trivial(m, 1);
            p.delta = delta.clone();
            p.quantum = quantum_for(delta, m.dim());
            return Ok(p);
        }
        None => {
            return Err(Error::Parameter(format!("level {n} needs the level {} partition", n - 1)));
        }
        Some(p) => p,
    };
    let h = quantum_for(delta, m.dim());
    let types = m.base_types(n);
    let mut groups: BTreeMap<Key, Vec<usize>> = BTreeMap::new();
    for (t, x) in types.iter().enumerate() {
        let sets = return_sets(m, x, n, prev)?;
        groups.entry(quantized_key(&sets, &h)).or_default().push(t);
        if groups.len() > cap {
            return Err(Error::Resource(format!(
                "level {n}: more than {cap} cells after {} of {} base types (quantum {})",
                t + 1,
                types.len(),
                exact::format(&h)
            )));
        }
    }
    let mut members: Vec<Vec<usize>> = groups.into_values().collect();
    members.sort_by_key(|v| v[0]);
    let mut type_cell = vec![0; types.len()];
    let cells = members
        .into_iter()
        .enumerate()
        .map(|(j, list)| {
            for &t in &list {
                type_cell[t] = j;
            }
            PartitionCell {
                representative: list[0],
                encoding: m.encode(&types[list[0]]),
                types: list,
            }
        })
        .collect();
    Ok(PartitionData {
        level: n,
        delta: delta.clone(),
        quantum: h,
        cells,
        type_cell,
    })
}

/// Joins two cells, for fault injection.
pub fn merge_cells(p: &PartitionData, a: usize, b: usize) -> PartitionData {
    let (keep, gone) = if a < b { (a, b) } else { (b, a) };
    let mut cells = p.cells.clone();
    let moved = cells.remove(gone);
    cells[keep].types.extend(moved.types);
    cells[keep].types.sort_unstable();
    let mut type_cell = vec![0; p.type_cell.len()];
    for (j, c) in cells.iter().enumerate() {
        for &t in &c.types {
            type_cell[t] = j;
        }
    }
    PartitionData {
        cells,
        type_cell,
        ..p.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub cells: usize,
    pub pairs_checked: usize,
    /// Largest Hausdorff distance seen inside a cell.
    pub max_distance: f64,
    pub passed: bool,
    pub first_violation: Option<String>,
}

/// Checks that the cells partition the base types, and that sampled pairs inside one cell
/// have return sets at Hausdorff distance below `delta` for every target cell.
pub fn validate_partition<M: ActionModel>(
    m: &M,
    part: &PartitionData,
    prev: Option<&PartitionData>,
    pairs_per_cell: usize,
    seed: u64,
) -> Result<PartitionReport> {
    let types = m.base_types(part.level);
    let mut violation: Option<String> = None;
    let mut seen = vec![0usize; types.len()];
    for c in &part.cells {
        for &t in &c.types {
            if t < seen.len() {
                seen[t] += 1;
            }
        }
    }
    if part.type_cell.len() != types.len() || seen.iter().any(|&s| s != 1) {
        violation = Some("cells do not partition the base types".into());
    }
    let mut pairs = 0;
    let mut max_d2 = Rational::zero();
    if let Some(prev) = prev {
        let limit = &part.delta * &part.delta;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (j, cell) in part.cells.iter().enumerate() {
            let k = cell.types.len();
            let all = k * (k.saturating_sub(1)) / 2;
            let chosen: Vec<(usize, usize)> = if all <= pairs_per_cell {
                (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect()
            } else {
                (0..pairs_per_cell)
                    .map(|_| {
                        let v = index::sample(&mut rng, k, 2).into_vec();
                        (v[0].min(v[1]), v[0].max(v[1]))
                    })
                    .collect()
            };
            for (a, b) in chosen {
                let sa = return_sets(m, &types[cell.types[a]], part.level, prev)?;
                let sb = return_sets(m, &types[cell.types[b]], part.level, prev)?;
                pairs += 1;
                for (x, y) in sa.iter().zip(&sb) {
                    match hausdorff_sq(&x.points, &y.points) {
                        Some(d2) if d2 < limit => {
                            if d2 > max_d2 {
                                max_d2 = d2;
                            }
                        }
                        _ => {
                            if violation.is_none() {
                                violation = Some(format!(
                                    "cell {j}: types {} and {} have return sets for cell {} at distance >= delta",
                                    cell.types[a], cell.types[b], x.cell
                                ));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(PartitionReport {
        cells: part.cell_count(),
        pairs_checked: pairs,
        max_distance: exact::to_f64(&max_d2).sqrt(),
        passed: violation.is_none(),
        first_violation: violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solenoid::RadixSequence;
    use crate::towers::{PatchTowerModel, SolenoidModel, TowerData};

    #[test]
    fn solenoid_partition_is_trivial() {
        let m = SolenoidModel::new(RadixSequence::new(vec![2, 2], 2).unwrap(), 4).unwrap();
        let p1 = delta_fine_partition(&m, 1, &exact::ratio(1, 2), None, 8).unwrap();
        let p2 = delta_fine_partition(&m, 2, &exact::ratio(1, 100), Some(&p1), 8).unwrap();
        assert_eq!(p2.cell_count(), 1);
        let report = validate_partition(&m, &p2, Some(&p1), 10, 0).unwrap();
        assert!(report.passed);
        assert_eq!(report.max_distance, 0.0);
        let sets = return_sets(&m, &m.base_types(2)[0], 2, &p1).unwrap();
        assert_eq!(sets.len(), 1);
        assert_eq!(sets[0].points.len(), 4);
        assert_eq!(sets[0].min_spacing(), Some(exact::int(2)));
    }

    #[test]
    fn hausdorff_examples() {
        let p = |x: i64, y: i64| vec![exact::int(x), exact::int(y)];
        assert_eq!(hausdorff_sq(&[p(0, 0)], &[p(3, 4)]), Some(exact::int(25)));
        assert_eq!(hausdorff_sq(&[p(0, 0), p(10, 0)], &[p(0, 0)]), Some(exact::int(100)));
        assert_eq!(hausdorff_sq(&[], &[]), Some(Rational::zero()));
        assert_eq!(hausdorff_sq(&[p(0, 0)], &[]), None);
        assert_eq!(quantum_for(&exact::ratio(1, 2), 2), exact::ratio(1, 4));
    }

    #[test]
    fn patch_partitions_refine_and_detect_faults() {
        let t = TowerData::new(vec![2, 16, 128], 2).unwrap();
        let m = PatchTowerModel::new(&t, 4, 8, 2).unwrap();
        let p1 = delta_fine_partition(&m, 1, &exact::ratio(1, 2), None, 8).unwrap();
        let coarse = delta_fine_partition(&m, 2, &exact::int(4), Some(&p1), 4096).unwrap();
        let fine = delta_fine_partition(&m, 2, &exact::ratio(1, 8), Some(&p1), 4096).unwrap();
        assert!(fine.cell_count() > 1);
        assert!(fine.cell_count() >= coarse.cell_count());
        for cell in &fine.cells {
            let owner = coarse.cell_of_type(cell.types[0]);
            assert!(cell.types.iter().all(|&t| coarse.cell_of_type(t) == owner));
        }
        let report = validate_partition(&m, &fine, Some(&p1), 20, 1).unwrap();
        assert!(report.passed, "{:?}", report.first_violation);

        let types = m.base_types(2);
        let limit = &fine.delta * &fine.delta;
        let rep = |j: usize| return_sets(&m, &types[fine.cells[j].representative], 2, &p1).unwrap();
        let far = (1..fine.cell_count())
            .find(|&j| match hausdorff_sq(&rep(0)[0].points, &rep(j)[0].points) {
                Some(d2) => d2 >= limit,
                None => true,
            })
            .expect("two cells at distance at least delta");
        let broken = merge_cells(&fine, 0, far);
        let report = validate_partition(&m, &broken, Some(&p1), 10_000, 1).unwrap();
        assert!(!report.passed);

        let tight = delta_fine_partition(&m, 2, &exact::ratio(1, 8), Some(&p1), 2);
        assert!(matches!(tight, Err(Error::Resource(_))));
    }
}
