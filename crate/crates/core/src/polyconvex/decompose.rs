use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use super::boxes::{measure_of_box_union, RBox};
use super::certificate::{sweep, Checker, ReplayReport, Scope, SeparationCertificate, Separator};
use super::lattice::{cartesian, check_cubes, grid_cube, grid_incidence, host_grid_cube, to_key, SubCubeIndex, UnitCube};
use crate::error::{Error, Result};
use crate::exact::{self, Rational};

/// The open strip `|x_axis - center| < half_width`, restricted to `cell` when present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strip {
    pub axis: usize,
    #[serde(with = "exact::serde_rat")]
    pub center: Rational,
    #[serde(with = "exact::serde_rat")]
    pub half_width: Rational,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<RBox>,
}

impl Strip {
    pub fn meets(&self, b: &RBox) -> bool {
        let in_cell = self.cell.as_ref().is_none_or(|c| c.touches(b));
        in_cell
            && b.lo[self.axis] < &self.center + &self.half_width
            && b.hi[self.axis] > &self.center - &self.half_width
    }
}

/// One box of `U`, inside input cube `cube` and grid cube `grid`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Leaf {
    pub rbox: RBox,
    pub cube: usize,
    pub grid: Vec<i64>,
    /// Index of the host box inside the grid cube (all zeros when the grid cube hosts nothing).
    pub host: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetainedSubCube {
    pub cube: usize,
    pub index: SubCubeIndex,
    pub grid: Vec<i64>,
    pub subcube: RBox,
    /// `B^{-delta}`; `None` when `delta >= 1/4`.
    pub inset: Option<RBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub cubes: Vec<UnitCube>,
    #[serde(with = "exact::serde_rat")]
    pub eps: Rational,
    #[serde(with = "exact::serde_rat")]
    pub delta: Rational,
    pub boxes: Vec<Leaf>,
    pub strips: Vec<Strip>,
    pub retained: Vec<RetainedSubCube>,
    #[serde(with = "exact::serde_rat")]
    pub removed_measure: Rational,
    #[serde(with = "exact::serde_rat_vec")]
    pub per_cube_loss: Vec<Rational>,
    pub certificate: SeparationCertificate,
}

/// `eps / (M 2^{7d})` for `M` cubes in real dimension `2d`.
pub fn delta_for(eps: &Rational, cubes: usize, dim: usize) -> Rational {
    eps / (exact::int(cubes as i64) * exact::pow(&exact::int(2), 7 * dim / 2))
}

/// `delta 2^{7d}`.
pub fn per_cube_bound(delta: &Rational, dim: usize) -> Rational {
    delta * exact::pow(&exact::int(2), 7 * dim / 2)
}

fn breakpoints<'a>(region: &RBox, boxes: impl Iterator<Item = &'a RBox> + Clone) -> Vec<Vec<Rational>> {
    (0..region.dim())
        .map(|k| {
            let mut cuts = vec![region.lo[k].clone(), region.hi[k].clone()];
            for b in boxes.clone() {
                for c in [&b.lo[k], &b.hi[k]] {
                    if c > &region.lo[k] && c < &region.hi[k] {
                        cuts.push(c.clone());
                    }
                }
            }
            cuts.sort();
            cuts.dedup();
            cuts
        })
        .collect()
}

fn cell_of(breaks: &[Vec<Rational>], index: &[i64]) -> RBox {
    RBox {
        lo: index.iter().enumerate().map(|(k, &i)| breaks[k][i as usize].clone()).collect(),
        hi: index.iter().enumerate().map(|(k, &i)| breaks[k][i as usize + 1].clone()).collect(),
    }
}

fn cell_indices(breaks: &[Vec<Rational>]) -> Vec<Vec<i64>> {
    let axes: Vec<Vec<i64>> = breaks.iter().map(|b| (0..b.len() as i64 - 1).collect()).collect();
    cartesian(&axes)
}

fn interior_strips(breaks: &[Vec<Rational>], delta: &Rational, cell: &RBox, out: &mut Vec<Strip>) {
    for (k, cuts) in breaks.iter().enumerate() {
        for c in &cuts[1..cuts.len() - 1] {
            out.push(Strip {
                axis: k,
                center: c.clone(),
                half_width: delta.clone(),
                cell: Some(cell.clone()),
            });
        }
    }
}

struct RegionPlan {
    host: Vec<i64>,
    breaks: Vec<Vec<Rational>>,
    leaves: Vec<(Vec<i64>, usize)>,
}

struct GridPlan {
    g: Vec<i64>,
    host_breaks: Vec<Vec<Rational>>,
    regions: Vec<RegionPlan>,
}

/// Removes `2 delta` strips around grid hyperplanes and cube faces so that what remains
/// of the cubes is a union of boxes separated by the sweep certificate.
pub fn decompose(cubes: &[UnitCube], eps: &Rational) -> Result<DecompositionResult> {
    if !eps.is_positive() {
        return Err(Error::Parameter("eps must be positive".into()));
    }
    let incidence = grid_incidence(cubes)?;
    let dim = cubes[0].dim();
    let delta = delta_for(eps, cubes.len(), dim);

    let mut host_of: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
    let mut retained = Vec::with_capacity(cubes.len());
    for (j, cube) in cubes.iter().enumerate() {
        let (g, index) = host_grid_cube(cube);
        let key = to_key(&g)?;
        if host_of.insert(key.clone(), j).is_some() {
            return Err(Error::Consistency(format!("grid cube {key:?} hosts two cubes")));
        }
        let subcube = cube.subcube(&index);
        retained.push(RetainedSubCube {
            cube: j,
            inset: subcube.inset(&delta),
            index,
            grid: key,
            subcube,
        });
    }

    let closures: Vec<RBox> = cubes.iter().map(UnitCube::closure).collect();
    let mut leaves: Vec<Leaf> = Vec::new();
    let mut strips: Vec<Strip> = Vec::new();
    let mut grid_planes: BTreeSet<(usize, Rational)> = BTreeSet::new();
    let mut plans = Vec::with_capacity(incidence.len());

    for (g, members) in &incidence {
        let gbox = grid_cube(g);
        for k in 0..dim {
            grid_planes.insert((k, gbox.lo[k].clone()));
            grid_planes.insert((k, gbox.hi[k].clone()));
        }
        let host_breaks = match host_of.get(g) {
            Some(&j) => breakpoints(&gbox, std::iter::once(&closures[j])),
            None => breakpoints(&gbox, std::iter::empty()),
        };
        interior_strips(&host_breaks, &delta, &gbox, &mut strips);
        let mut regions = Vec::new();
        for host in cell_indices(&host_breaks) {
            let region = cell_of(&host_breaks, &host);
            let relevant: Vec<usize> = members
                .iter()
                .copied()
                .filter(|&j| cubes[j].interior_overlaps(&region))
                .collect();
            let breaks = breakpoints(&region, relevant.iter().map(|&j| &closures[j]));
            interior_strips(&breaks, &delta, &region, &mut strips);
            let mut region_leaves = Vec::new();
            for index in cell_indices(&breaks) {
                let cell = cell_of(&breaks, &index);
                let mid = cell.midpoint();
                let Some(&owner) = relevant.iter().find(|&&j| cubes[j].interior_contains(&mid)) else {
                    continue;
                };
                if let Some(rbox) = cell.inset(&delta) {
                    if rbox.volume().is_positive() {
                        region_leaves.push((index, leaves.len()));
                        leaves.push(Leaf {
                            rbox,
                            cube: owner,
                            grid: g.clone(),
                            host: host.clone(),
                        });
                    }
                }
            }
            regions.push(RegionPlan {
                host,
                breaks,
                leaves: region_leaves,
            });
        }
        plans.push(GridPlan {
            g: g.clone(),
            host_breaks,
            regions,
        });
    }
    for (axis, center) in grid_planes {
        strips.push(Strip {
            axis,
            center,
            half_width: delta.clone(),
            cell: None,
        });
    }

    let mut next = leaves.len();
    let mut steps = Vec::new();
    let mut grid_roots = Vec::new();
    for plan in &plans {
        let mut host_roots = Vec::new();
        for region in &plan.regions {
            let root = sweep(
                region.leaves.clone(),
                &mut next,
                &mut steps,
                |axis, i| {
                    (
                        Scope::Local,
                        Separator::Hyperplane {
                            axis,
                            c: region.breaks[axis][i as usize + 1].clone(),
                        },
                    )
                },
                Some(&plan.g),
                Some(&region.host),
            );
            if let Some(root) = root {
                host_roots.push((region.host.clone(), root));
            }
        }
        let root = sweep(
            host_roots,
            &mut next,
            &mut steps,
            |axis, i| {
                (
                    Scope::Host,
                    Separator::Hyperplane {
                        axis,
                        c: plan.host_breaks[axis][i as usize + 1].clone(),
                    },
                )
            },
            Some(&plan.g),
            None,
        );
        if let Some(root) = root {
            grid_roots.push((plan.g.clone(), root));
        }
    }
    sweep(
        grid_roots,
        &mut next,
        &mut steps,
        |axis, g| {
            (
                Scope::Grid,
                Separator::Hyperplane {
                    axis,
                    c: exact::int(g) + exact::half(),
                },
            )
        },
        None,
        None,
    );

    let per_cube_loss = losses(cubes.len(), &leaves);
    let removed_measure = per_cube_loss.iter().fold(Rational::zero(), |a, b| a + b);
    Ok(DecompositionResult {
        cubes: cubes.to_vec(),
        eps: eps.clone(),
        delta,
        certificate: SeparationCertificate {
            leaves: leaves.len(),
            steps,
        },
        boxes: leaves,
        strips,
        retained,
        removed_measure,
        per_cube_loss,
    })
}

fn losses(m: usize, leaves: &[Leaf]) -> Vec<Rational> {
    let mut loss = vec![Rational::one(); m];
    for leaf in leaves {
        if leaf.cube < m {
            loss[leaf.cube] -= leaf.rbox.volume();
        }
    }
    loss
}

/// Whether the leaves of cube `j` cover `target`, by comparing measures.
fn covered(target: &RBox, leaves: &[Leaf]) -> bool {
    let parts: Vec<RBox> = leaves.iter().filter_map(|l| l.rbox.intersection(target)).collect();
    measure_of_box_union(&parts) == target.volume()
}

impl DecompositionResult {
    /// `U` as plain boxes.
    pub fn union(&self) -> Vec<RBox> {
        self.boxes.iter().map(|l| l.rbox.clone()).collect()
    }

    /// A copy with leaf `i` enlarged by `amount` on every side.
    pub fn with_widened_leaf(&self, i: usize, amount: &Rational) -> Self {
        let mut out = self.clone();
        out.boxes[i].rbox = out.boxes[i].rbox.widened(amount);
        out
    }

    pub fn max_loss(&self) -> Rational {
        self.per_cube_loss
            .iter()
            .fold(Rational::zero(), |a, b| exact::max_rat(&a, b).clone())
    }
}

/// Re-verifies a decomposition from its input cubes.
///
/// Structural defects are errors; geometric failures give a report with `passed = false`
/// naming the first violation.
pub fn certificate_replay(result: &DecompositionResult) -> Result<ReplayReport> {
    let dim = check_cubes(&result.cubes)?;
    let m = result.cubes.len();
    let delta = &result.delta;
    if *delta != delta_for(&result.eps, m, dim) {
        return Err(Error::Certificate("delta does not match eps and the cube count".into()));
    }
    if result.boxes.is_empty() {
        return Err(Error::Certificate("U is empty".into()));
    }
    if result.certificate.leaves != result.boxes.len() {
        return Err(Error::Certificate("leaf count differs from the box list".into()));
    }
    if result.retained.len() != m || result.per_cube_loss.len() != m {
        return Err(Error::Certificate("per-cube records do not match the cube list".into()));
    }
    for (i, leaf) in result.boxes.iter().enumerate() {
        if leaf.cube >= m || leaf.rbox.dim() != dim || leaf.grid.len() != dim {
            return Err(Error::Certificate(format!("leaf {i} is malformed")));
        }
    }
    let nodes = result.certificate.node_leaves()?;

    let mut ck = Checker::new();
    let closures: Vec<RBox> = result.cubes.iter().map(UnitCube::closure).collect();
    let half = exact::half();

    for (i, leaf) in result.boxes.iter().enumerate() {
        let b = &leaf.rbox;
        ck.check(b.volume().is_positive(), || format!("leaf {i} has no volume"));
        ck.check(closures[leaf.cube].contains_box(b), || format!("leaf {i} leaves cube {}", leaf.cube));
        let inner = grid_cube(&leaf.grid).inset(delta);
        ck.check(inner.is_some_and(|g| g.contains_box(b)), || {
            format!("leaf {i} enters the grid strips of {:?}", leaf.grid)
        });
    }

    for (s, strip) in result.strips.iter().enumerate() {
        ck.check(strip.half_width == *delta && strip.axis < dim, || format!("strip {s} has the wrong width"));
        let legit = match &strip.cell {
            None => exact::is_integer(&(&strip.center - &half)),
            Some(_) => result
                .cubes
                .iter()
                .any(|c| strip.center == &c.center[strip.axis] - &half || strip.center == &c.center[strip.axis] + &half),
        };
        ck.check(legit, || format!("strip {s} is not on a grid hyperplane or cube face"));
        for (i, leaf) in result.boxes.iter().enumerate() {
            if strip.meets(&leaf.rbox) {
                ck.check(false, || format!("leaf {i} meets strip {s}"));
            }
        }
    }

    let mut by_grid: BTreeMap<&Vec<i64>, Vec<usize>> = BTreeMap::new();
    for (i, leaf) in result.boxes.iter().enumerate() {
        by_grid.entry(&leaf.grid).or_default().push(i);
    }
    for ids in by_grid.values() {
        for (a, &i) in ids.iter().enumerate() {
            for &j in &ids[a + 1..] {
                ck.check(!result.boxes[i].rbox.touches(&result.boxes[j].rbox), || {
                    format!("leaves {i} and {j} touch")
                });
            }
        }
    }

    let min_gap = exact::int(2) * delta * (Rational::one() - exact::ten_pow_neg(6));
    let mut grid_started = false;
    let mut host_started: BTreeSet<Vec<i64>> = BTreeSet::new();
    let mut last_axis: BTreeMap<(Scope, Option<Vec<i64>>, Option<Vec<i64>>), usize> = BTreeMap::new();
    for (s, step) in result.certificate.steps.iter().enumerate() {
        let Separator::Hyperplane { axis, c } = &step.separator else {
            ck.check(false, || format!("step {s} is not a hyperplane split"));
            continue;
        };
        let axis = *axis;
        if axis >= dim {
            return Err(Error::Certificate(format!("step {s} names axis {axis}")));
        }
        match step.scope {
            Scope::Local => {
                let g = step.grid.clone().unwrap_or_default();
                ck.check(!grid_started && !host_started.contains(&g), || format!("step {s} is out of sweep order"));
            }
            Scope::Host => {
                let g = step.grid.clone().unwrap_or_default();
                ck.check(!grid_started, || format!("step {s} is out of sweep order"));
                host_started.insert(g);
            }
            Scope::Grid => {
                grid_started = true;
                ck.check(exact::is_integer(&(c - &half)), || format!("step {s} is off the grid hyperplanes"));
            }
            Scope::Factor => ck.check(false, || format!("step {s} has a product scope")),
        }
        let key = (step.scope, step.grid.clone(), step.host.clone());
        let prev = last_axis.insert(key, axis);
        ck.check(prev.is_none_or(|p| p <= axis), || format!("step {s} sweeps axis {axis} after a later axis"));

        let low = &nodes[step.low];
        let high = &nodes[step.high];
        for &i in low.iter().chain(high) {
            let leaf = &result.boxes[i];
            let same_grid = step.grid.as_ref().is_none_or(|g| *g == leaf.grid);
            let same_host = step.host.as_ref().is_none_or(|h| *h == leaf.host);
            ck.check(same_grid && same_host, || format!("step {s} joins leaf {i} from another region"));
        }
        let low_hi = low.iter().map(|&i| &result.boxes[i].rbox.hi[axis]).max().expect("nonempty");
        let high_lo = high.iter().map(|&i| &result.boxes[i].rbox.lo[axis]).min().expect("nonempty");
        ck.check(low_hi < c && c < high_lo, || format!("step {s}: hyperplane does not separate"));
        ck.check(high_lo - low_hi >= min_gap, || format!("step {s}: gap below 2 delta"));
    }

    let losses = losses(m, &result.boxes);
    let removed = losses.iter().fold(Rational::zero(), |a, b| a + b);
    ck.check(losses == result.per_cube_loss, || "per-cube losses do not match the leaves".into());
    ck.check(removed == result.removed_measure, || "removed measure does not match the leaves".into());
    ck.check(removed < result.eps, || "removed measure is not below eps".into());
    let bound = per_cube_bound(delta, dim);
    ck.check(losses.iter().all(|l| *l <= bound), || "a cube lost more than delta 2^{7d}".into());

    for (j, cube) in result.cubes.iter().enumerate() {
        let own: Vec<Leaf> = result.boxes.iter().filter(|l| l.cube == j).cloned().collect();
        let r = &result.retained[j];
        let (g, index) = host_grid_cube(cube);
        let expected = cube.subcube(&index);
        ck.check(
            r.cube == j && to_key(&g).ok().as_ref() == Some(&r.grid) && r.index == index && r.subcube == expected,
            || format!("retained sub-cube of cube {j} is not the host sub-cube"),
        );
        ck.check(r.inset == expected.inset(delta), || format!("inset of cube {j} is wrong"));
        if let Some(inset) = expected.inset(delta) {
            ck.check(covered(&inset, &own), || format!("B^-delta of cube {j} is not inside U"));
        }
        if cube.is_grid_cube() {
            if let Some(inset) = closures[j].inset(delta) {
                ck.check(covered(&inset, &own), || format!("Q^-delta of grid cube {j} is not inside U"));
            }
        }
    }
    Ok(ck.report())
}
