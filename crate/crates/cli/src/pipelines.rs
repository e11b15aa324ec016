use std::path::{Path, PathBuf};

use dense_orbits::construction::{
    build_stage, density_check, first_stage, telescoping_check, DensityCertificate, Stage, StagePlan, StageParams,
};
use dense_orbits::exact::{self, Rational};
use dense_orbits::polyconvex::{
    certificate_replay, decompose, per_cube_bound, product_union_certificate, product_union_replay,
    ProductUnionCertificate, ReplayReport, UnitCube,
};
use dense_orbits::runge::{ComplexPolynomial, FitOptions, Region};
use dense_orbits::solenoid::{haar_sample, RadixSequence, SolenoidPoint};
use dense_orbits::towers::{
    condition_d_check, first_general_stage, general_stage, validate_tower, ActionModel, GeneralOptions,
    GeneralStage, PatchTowerModel, SolenoidModel, TowerData, TowerReport,
};
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::artifacts::{read_json, sibling_csv, Writer};
use crate::config::{ModelKind, Pipeline, RunConfig};
use crate::error::{CliError, CliResult};

const JITTER_STEPS: u64 = 4;

/// What a finished run reports back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub pipeline: Pipeline,
    pub config_hash: String,
    pub passed: bool,
    pub first_failure: Option<String>,
    pub artifacts: Vec<String>,
}

/// Runs one pipeline. Certificate failures still write every artifact produced so far and
/// come back as [`CliError::Certificate`] naming the first failing assertion.
pub fn run_pipeline(config: RunConfig) -> CliResult<RunSummary> {
    let config = config.resolve()?;
    let mut w = Writer::new(&config);
    let outcome = match config.pipeline {
        Pipeline::SolenoidSample => solenoid_sample(&config, &mut w),
        Pipeline::Build => build(&config, &mut w, Vec::new()),
        Pipeline::DensityReport => density_report(&config, &mut w),
        Pipeline::DecomposeCubes => decompose_cubes(&config, &mut w),
        Pipeline::CertifyProducts => certify_products(&config, &mut w),
        Pipeline::TowersValidate => towers_validate(&config, &mut w),
        Pipeline::TowersBuild => towers_build(&config, &mut w),
    }?;
    finish(&config, w, outcome)
}

/// Continues a build from the plan and stage files in `dir`.
pub fn resume_build(dir: &Path) -> CliResult<RunSummary> {
    let (_, record): (_, PlanRecord) = read_json(&dir.join(PLAN_FILE))?;
    let mut config = record.config;
    config.out = Some(dir.to_path_buf());
    let config = config.resolve()?;
    let plan = make_plan(&config)?;
    if plan.digest() != record.plan_digest {
        return Err(CliError::Config("the stored plan does not match its configuration".into()));
    }
    let mut done: Vec<Stage> = Vec::new();
    for n in 1..=plan.stages {
        let path = dir.join(stage_file(n));
        if !path.exists() {
            break;
        }
        let (_, stage): (_, Stage) = read_json(&path)?;
        let parent = done.last().map(Stage::digest);
        if stage.n != n || stage.parent != parent {
            return Err(CliError::Certificate(format!("{} does not continue the stage chain", path.display())));
        }
        done.push(stage);
    }
    let mut w = Writer::new(&config);
    let outcome = build(&config, &mut w, done)?;
    finish(&config, w, outcome)
}

fn finish(config: &RunConfig, mut w: Writer, failure: Option<String>) -> CliResult<RunSummary> {
    let mut artifacts: Vec<String> = w.written.iter().map(|p| file_name(p)).collect();
    artifacts.sort();
    artifacts.dedup();
    let summary = RunSummary {
        pipeline: config.pipeline,
        config_hash: w.hash().to_string(),
        passed: failure.is_none(),
        first_failure: failure.clone(),
        artifacts,
    };
    if let Some(dir) = output_dir(config) {
        w.json(&dir.join("summary.json"), "summary", &summary)?;
    }
    match failure {
        Some(f) => Err(CliError::Certificate(f)),
        None => Ok(summary),
    }
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Pipelines writing a directory of artifacts, as opposed to a single file.
fn output_dir(config: &RunConfig) -> Option<PathBuf> {
    match config.pipeline {
        Pipeline::Build | Pipeline::DensityReport | Pipeline::TowersBuild => config.out.clone(),
        _ => None,
    }
}

fn first(failure: &mut Option<String>, msg: impl FnOnce() -> String) {
    if failure.is_none() {
        *failure = Some(msg());
    }
}

fn fit_options(config: &RunConfig, cap: usize) -> FitOptions {
    FitOptions {
        precision: config.precision.unwrap_or_default(),
        ..FitOptions::with_cap(cap)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SampleRecord {
    point: SolenoidPoint,
    top: Vec<String>,
}

fn solenoid_sample(c: &RunConfig, w: &mut Writer) -> CliResult<Option<String>> {
    let seq = RadixSequence::new(c.radix.clone().unwrap_or_default(), c.dim.unwrap_or(2))?;
    let (depth, res, seed) = (c.depth.unwrap_or(1), c.resolution.unwrap_or(1), c.seed.unwrap_or(0));
    let mut failure = None;
    let mut records = Vec::new();
    for i in 0..c.count.unwrap_or(1) as u64 {
        let p = haar_sample(&seq, depth, res, seed.wrapping_add(i))?;
        if !p.is_compatible() {
            first(&mut failure, || format!("sample {i} violates the projection relations"));
        }
        if SolenoidPoint::from_text(&p.to_text())? != p {
            first(&mut failure, || format!("sample {i} does not round-trip through text"));
        }
        let top = p.top().iter().map(exact::format).collect();
        records.push(SampleRecord { point: p, top });
    }
    match &c.out {
        Some(path) => {
            w.json(path, "solenoid-sample", &records)?;
            let rows: Vec<Vec<String>> = records
                .iter()
                .enumerate()
                .map(|(i, r)| std::iter::once(i.to_string()).chain(r.top.iter().cloned()).collect())
                .collect();
            let mut header = vec!["sample".to_string()];
            header.extend((1..=seq.dim()).map(|k| format!("x{k}")));
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            w.csv(&sibling_csv(path), &header, &rows)?;
        }
        None => {
            for r in &records {
                println!("{}", r.point.to_text());
            }
        }
    }
    Ok(failure)
}

pub const PLAN_FILE: &str = "plan.json";

pub fn stage_file(n: usize) -> String {
    format!("stage-{n}.json")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PlanRecord {
    config: RunConfig,
    plan: StagePlan,
    plan_digest: String,
}

fn make_plan(c: &RunConfig) -> CliResult<StagePlan> {
    let seq = RadixSequence::new(c.radix.clone().unwrap_or_default(), 2)?;
    let stages = c.stages.unwrap_or(0);
    let caps = c.degree_caps.clone().unwrap_or_default();
    let mut plan = StagePlan::standard(seq, stages, caps.first().copied().unwrap_or(128))?;
    plan.eps = c.eps_entries()?;
    plan.degree_caps = caps;
    plan.fit = fit_options(c, plan.fit.degree_cap);
    if let Some(list) = c.planted()? {
        plan = plan.with_polynomials(list.iter().map(|p| ComplexPolynomial::from_monomials(p)).collect())?;
    }
    plan.validate()?;
    Ok(plan)
}

fn build(c: &RunConfig, w: &mut Writer, mut done: Vec<Stage>) -> CliResult<Option<String>> {
    let dir = c.out.clone().unwrap_or_default();
    let plan = make_plan(c)?;
    let record = PlanRecord {
        config: RunConfig { out: None, ..c.clone() },
        plan_digest: plan.digest(),
        plan: plan.clone(),
    };
    w.json(&dir.join(PLAN_FILE), "plan", &record)?;
    if done.is_empty() {
        let s1 = first_stage(&plan.radix, &plan.polynomial(1));
        w.json(&dir.join(stage_file(1)), "stage", &s1)?;
        done.push(s1);
    }
    while done.len() < plan.stages {
        let n = done.len() + 1;
        let params = StageParams {
            big_r_prev: plan.radix.big_r_rat(n - 1),
            eps: plan.eps[n - 1].clone(),
            margin: plan.margins[n - 1].clone(),
            fit: plan.fit_options(n),
        };
        let prev = done.last().expect("stage 1 is present");
        match build_stage(prev, &plan.polynomial(n), plan.radix.r(n), &params) {
            Ok(stage) => {
                w.json(&dir.join(stage_file(n)), "stage", &stage)?;
                done.push(stage);
            }
            Err(e) => return Ok(Some(format!("stage {n} fit: {e}"))),
        }
    }
    density_artifacts(&done, c.grid.unwrap_or(50), &dir, "density", w)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DensityRecord {
    density: Vec<DensityCertificate>,
    telescoping: Vec<DensityCertificate>,
}

fn density_artifacts(
    stages: &[Stage],
    grid: usize,
    dir: &Path,
    name: &str,
    w: &mut Writer,
) -> CliResult<Option<String>> {
    let n = stages.len();
    let density = (1..=n)
        .map(|k| density_check(stages, k, grid))
        .collect::<dense_orbits::Result<Vec<_>>>()?;
    let telescoping = (1..n)
        .map(|m| telescoping_check(stages, m, grid))
        .collect::<dense_orbits::Result<Vec<_>>>()?;
    let mut failure = None;
    let mut rows = Vec::new();
    for (kind, certs) in [("density", &density), ("telescoping", &telescoping)] {
        for cert in certs {
            if !cert.holds {
                first(&mut failure, || {
                    format!(
                        "{kind} check k={} n={}: measured {:e} exceeds bound {}",
                        cert.k,
                        cert.n,
                        cert.measured,
                        exact::format(&cert.bound)
                    )
                });
            }
            rows.push(vec![
                kind.to_string(),
                cert.k.to_string(),
                cert.n.to_string(),
                exact::format(&cert.bound),
                format!("{:e}", cert.measured),
                cert.grid.to_string(),
                cert.vacuous.to_string(),
                cert.holds.to_string(),
            ]);
        }
    }
    let path = dir.join(format!("{name}.json"));
    w.json(&path, name, &DensityRecord { density, telescoping })?;
    w.csv(
        &sibling_csv(&path),
        &["check", "k", "n", "bound", "measured", "grid", "vacuous", "holds"],
        &rows,
    )?;
    Ok(failure)
}

fn density_report(c: &RunConfig, w: &mut Writer) -> CliResult<Option<String>> {
    let input = c.input.clone().unwrap_or_default();
    let mut stages: Vec<Stage> = Vec::new();
    for n in 1.. {
        let path = input.join(stage_file(n));
        if !path.exists() {
            break;
        }
        let (_, s): (_, Stage) = read_json(&path)?;
        stages.push(s);
    }
    if stages.is_empty() {
        return Err(CliError::Config(format!("no stage files in {}", input.display())));
    }
    for (i, s) in stages.iter().enumerate().skip(1) {
        if s.parent.as_deref() != Some(stages[i - 1].digest().as_str()) {
            return Ok(Some(format!("stage {} does not continue stage {}", s.n, i)));
        }
    }
    let out = c.out.clone().unwrap_or(input);
    density_artifacts(&stages, c.grid.unwrap_or(50), &out, "density-report", w)
}

fn decompose_cubes(c: &RunConfig, w: &mut Writer) -> CliResult<Option<String>> {
    let input = c.input.clone().unwrap_or_default();
    let (_, cubes): (_, Vec<UnitCube>) = read_json(&input)?;
    if let (Some(d), Some(cube)) = (c.dim, cubes.first()) {
        if cube.dim() != d {
            return Err(CliError::Config(format!("cubes have dimension {}, expected {d}", cube.dim())));
        }
    }
    let eps = exact::parse(c.eps.as_deref().unwrap_or("1/10"))?;
    let result = decompose(&cubes, &eps)?;
    let replay = certificate_replay(&result)?;
    let mut failure = replay.first_violation.clone().map(|v| format!("replay: {v}"));
    if result.removed_measure >= eps {
        first(&mut failure, || {
            format!("removed measure {} is not below eps", exact::format(&result.removed_measure))
        });
    }
    let bound = per_cube_bound(&result.delta, result.cubes[0].dim());
    if let Some(i) = result.per_cube_loss.iter().position(|l| l > &bound) {
        first(&mut failure, || format!("cube {i} loses more than {}", exact::format(&bound)));
    }
    let path = c.out.clone().unwrap_or_default();
    w.json(&path, "decomposition", &result)?;
    let rows: Vec<Vec<String>> = result
        .per_cube_loss
        .iter()
        .enumerate()
        .map(|(i, l)| vec![i.to_string(), exact::format(l), exact::format(&bound), (l <= &bound).to_string()])
        .collect();
    w.csv(&sibling_csv(&path), &["cube", "loss", "bound", "within"], &rows)?;
    Ok(failure)
}

/// Input of `certify-products`: the factor sets `K_i` and `L_j`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProductInput {
    pub ks: Vec<Region>,
    pub ls: Vec<Region>,
}

/// `count` unit squares along the real axis, three units apart.
pub fn spaced_squares(count: usize) -> CliResult<Vec<Region>> {
    (0..count as i64)
        .map(|i| Ok(Region::rect(exact::int(3 * i), exact::int(3 * i + 1), exact::int(0), exact::int(1))?))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ProductRecord {
    certificate: ProductUnionCertificate,
    replay: ReplayReport,
}

fn certify_products(c: &RunConfig, w: &mut Writer) -> CliResult<Option<String>> {
    let input = match &c.input {
        Some(p) => read_json::<ProductInput>(p)?.1,
        None => {
            let squares = spaced_squares(c.count.unwrap_or(2))?;
            ProductInput {
                ks: squares.clone(),
                ls: squares,
            }
        }
    };
    let certificate = product_union_certificate(&input.ks, &input.ls, &fit_options(c, 64))?;
    let replay = product_union_replay(&certificate, c.grid.unwrap_or(41))?;
    let failure = replay.first_violation.clone().map(|v| format!("replay: {v}"));
    w.json(&c.out.clone().unwrap_or_default(), "product-certificate", &ProductRecord { certificate, replay })?;
    Ok(failure)
}

fn tower_data(c: &RunConfig) -> CliResult<TowerData> {
    Ok(TowerData::new(c.a.clone().unwrap_or_default(), c.dim.unwrap_or(2))?)
}

fn solenoid_model(c: &RunConfig, t: &TowerData) -> CliResult<SolenoidModel> {
    let radix: Vec<u64> = (1..=t.len()).map(|n| if n == 1 { t.side(1) } else { t.ratio(n) }).collect();
    let seq = RadixSequence::new(radix, t.dim())?;
    Ok(SolenoidModel::new(seq, c.resolution.unwrap_or(8))?)
}

fn patch_model(c: &RunConfig, t: &TowerData) -> CliResult<PatchTowerModel> {
    Ok(PatchTowerModel::new(t, JITTER_STEPS, c.resolution.unwrap_or(8), c.seed.unwrap_or(0))?)
}

fn tower_report_artifacts(report: &TowerReport, path: &Path, w: &mut Writer) -> CliResult<()> {
    w.json(path, "tower-report", report)?;
    let rows: Vec<Vec<String>> = report
        .levels
        .iter()
        .map(|l| {
            vec![
                l.n.to_string(),
                l.side.to_string(),
                l.disjoint.to_string(),
                l.coordinates_consistent.to_string(),
                l.nesting.map(|b| b.to_string()).unwrap_or_default(),
                l.hits.to_string(),
                l.samples.to_string(),
                format!("{:.6}", l.coverage),
                format!("{:.6}", l.coverage_interval.0),
                format!("{:.6}", l.coverage_interval.1),
                l.exact_coverage.clone().unwrap_or_default(),
                l.coverage_consistent.to_string(),
            ]
        })
        .collect();
    w.csv(
        &sibling_csv(path),
        &[
            "n", "side", "disjoint", "coordinates", "nesting", "hits", "samples", "coverage", "low", "high", "exact",
            "consistent",
        ],
        &rows,
    )
}

fn towers_validate(c: &RunConfig, w: &mut Writer) -> CliResult<Option<String>> {
    let t = tower_data(c)?;
    let (samples, seed) = (c.samples.unwrap_or(2000), c.seed.unwrap_or(0));
    let report = match c.model.unwrap_or(ModelKind::Solenoid) {
        ModelKind::Solenoid => validate_tower(&t, &solenoid_model(c, &t)?, samples, seed)?,
        ModelKind::Patch => validate_tower(&t, &patch_model(c, &t)?, samples, seed)?,
    };
    match &c.out {
        Some(path) => tower_report_artifacts(&report, path, w)?,
        None => println!("{}", serde_json::to_string_pretty(&report).expect("report serializes")),
    }
    Ok(report.first_violation.clone().map(|v| format!("tower validation: {v}")))
}

pub fn tower_stage_file(n: usize) -> String {
    format!("tower-stage-{n}.json")
}

fn towers_build(c: &RunConfig, w: &mut Writer) -> CliResult<Option<String>> {
    let t = tower_data(c)?;
    match c.model.unwrap_or(ModelKind::Solenoid) {
        ModelKind::Solenoid => towers_build_with(c, &t, &solenoid_model(c, &t)?, w),
        ModelKind::Patch => towers_build_with(c, &t, &patch_model(c, &t)?, w),
    }
}

fn towers_build_with<M: ActionModel>(
    c: &RunConfig,
    t: &TowerData,
    m: &M,
    w: &mut Writer,
) -> CliResult<Option<String>> {
    let dir = c.out.clone().unwrap_or_default();
    let stages = c.stages.unwrap_or(t.len());
    if stages > t.len() {
        return Err(CliError::Config(format!("{stages} stages requested for a tower of height {}", t.len())));
    }
    let seed = c.seed.unwrap_or(0);
    let report = validate_tower(t, m, c.samples.unwrap_or(2000), seed)?;
    tower_report_artifacts(&report, &dir.join("tower-report.json"), w)?;
    if let Some(v) = &report.first_violation {
        return Ok(Some(format!("tower validation: {v}")));
    }
    let cap = c.degree_caps.as_ref().and_then(|v| v.first().copied()).unwrap_or(128);
    let opts = GeneralOptions {
        fit: fit_options(c, cap),
        grid: c.grid.unwrap_or(50),
        coverage_samples: c.samples.unwrap_or(2000),
        seed,
        ..GeneralOptions::default()
    };
    let polys: Vec<ComplexPolynomial> = match c.planted()? {
        Some(list) => list.iter().map(|p| ComplexPolynomial::from_monomials(p)).collect(),
        None => (1..=stages)
            .map(|n| ComplexPolynomial::from_monomials(&dense_orbits::construction::nth_polynomial(n)))
            .collect(),
    };
    let d1 = t.dim() == 2;
    let mut out: Vec<GeneralStage> = vec![first_general_stage(m, polys.first().filter(|_| d1))?];
    w.json(&dir.join(tower_stage_file(1)), "tower-stage", &out[0])?;
    let mut failure = None;
    for n in 2..=stages {
        match general_stage(m, t, &out[n - 2], polys.get(n - 1).filter(|_| d1), &opts) {
            Ok(s) => {
                w.json(&dir.join(tower_stage_file(n)), "tower-stage", &s)?;
                out.push(s);
            }
            Err(e) => {
                failure = Some(format!("tower stage {n}: {e}"));
                break;
            }
        }
    }
    if d1 && failure.is_none() {
        for n in 1..=out.len() {
            let mut certs = Vec::new();
            for j in 0..out[n - 1].cells.len() {
                for k in 1..=n {
                    certs.push(condition_d_check(&out[..n], j, k, &opts)?);
                }
            }
            for cert in &certs {
                if !cert.vacuous && !cert.holds_stated {
                    first(&mut failure, || {
                        format!(
                            "Condition (D) n={} cell={} k={}: measured {:e} exceeds {}",
                            cert.n,
                            cert.cell,
                            cert.k,
                            cert.measured,
                            exact::format(&cert.stated_bound)
                        )
                    });
                }
            }
            out[n - 1].condition_d = certs;
            w.json(&dir.join(tower_stage_file(n)), "tower-stage", &out[n - 1])?;
        }
    }
    let mut sum = Rational::zero();
    let mut rows = Vec::new();
    for b in out.iter().filter_map(|s| s.budget.as_ref()) {
        sum += &b.total;
        rows.push(vec![
            b.n.to_string(),
            exact::format(&b.decomposition_loss),
            exact::format(&b.replaced),
            exact::format(&b.uncovered),
            b.uncovered_exact.to_string(),
            exact::format(&b.total),
            format!("{:e}", exact::to_f64(&b.total)),
            exact::format(&b.budget),
            b.within.to_string(),
        ]);
    }
    rows.push(vec![
        "sum".into(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        exact::format(&sum),
        format!("{:e}", exact::to_f64(&sum)),
        String::new(),
        String::new(),
    ]);
    w.csv(
        &dir.join("ledger.csv"),
        &["n", "decomposition_loss", "replaced", "uncovered", "uncovered_exact", "total", "total_f64", "budget", "within"],
        &rows,
    )?;
    Ok(failure)
}
