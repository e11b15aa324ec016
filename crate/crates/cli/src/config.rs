use std::path::{Path, PathBuf};

use clap::ValueEnum;
use dense_orbits::exact::{self, ComplexRational, Rational};
use dense_orbits::numeric::Precision;
use num_traits::Signed;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const PRECISION_ENV: &str = "DENSE_ORBITS_PRECISION";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    SolenoidSample,
    Build,
    DensityReport,
    DecomposeCubes,
    CertifyProducts,
    TowersValidate,
    TowersBuild,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Solenoid,
    Patch,
}

/// `"default"` or an explicit list of fraction strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsSchedule {
    Named(String),
    Entries(Vec<String>),
}

impl EpsSchedule {
    pub fn from_flag(s: &str) -> Self {
        if s.contains(',') || s.contains('/') || s.chars().next().is_some_and(|c| c.is_ascii_digit()) {
            EpsSchedule::Entries(s.split(',').map(|e| e.trim().to_string()).collect())
        } else {
            EpsSchedule::Named(s.to_string())
        }
    }
}

/// Everything a pipeline run depends on. Missing fields take per-pipeline defaults in
/// [`RunConfig::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub pipeline: Pipeline,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radix: Option<Vec<u64>>,
    /// Tower side lengths `a_1 | a_2 | ...`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelKind>,
    /// Real dimension `2d`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stages: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_schedule: Option<EpsSchedule>,
    /// One cap per stage, or a single cap for all stages.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree_caps: Option<Vec<usize>>,
    /// Planted polynomials as monomial coefficients `[re, im]`, lowest degree first.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polynomials: Option<Vec<Vec<[String; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<Precision>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive(label: &str, v: usize) -> CliResult<usize> {
    if v == 0 {
        return Err(bad(format!("{label} must be positive")));
    }
    Ok(v)
}

impl RunConfig {
    pub fn new(pipeline: Pipeline) -> Self {
        Self {
            pipeline,
            radix: None,
            a: None,
            model: None,
            dim: None,
            stages: None,
            depth: None,
            count: None,
            resolution: None,
            eps: None,
            eps_schedule: None,
            degree_caps: None,
            polynomials: None,
            precision: None,
            grid: None,
            samples: None,
            seed: None,
            input: None,
            out: None,
        }
    }

    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| bad(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Fills every field the pipeline reads and validates the result.
    pub fn resolve(mut self) -> CliResult<Self> {
        if self.precision.is_none() {
            self.precision = Some(match std::env::var(PRECISION_ENV) {
                Ok(v) => Precision::parse(&v).map_err(|e| bad(format!("{PRECISION_ENV}: {e}")))?,
                Err(_) => Precision::default(),
            });
        }
        self.seed.get_or_insert(0);
        match self.pipeline {
            Pipeline::SolenoidSample => {
                let radix = self.radix.get_or_insert_with(|| vec![2, 2, 2]).clone();
                self.dim.get_or_insert(2);
                self.depth.get_or_insert(radix.len());
                positive("count", *self.count.get_or_insert(16))?;
                self.resolution.get_or_insert(8);
            }
            Pipeline::Build => {
                let radix = self.radix.get_or_insert_with(|| vec![2, 2, 2]).clone();
                if *self.dim.get_or_insert(2) != 2 {
                    return Err(bad("build runs in real dimension 2"));
                }
                let stages = positive("stages", *self.stages.get_or_insert(radix.len()))?;
                let entries = match self.eps_schedule.take().unwrap_or(EpsSchedule::Named("default".into())) {
                    EpsSchedule::Named(name) if name == "default" => {
                        (0..stages).map(|n| exact::format(&exact::ten_pow_neg(n as u32))).collect()
                    }
                    EpsSchedule::Named(name) => return Err(bad(format!("unknown eps schedule {name:?}"))),
                    EpsSchedule::Entries(v) => v,
                };
                if entries.len() != stages {
                    return Err(bad(format!("eps schedule has {} entries for {stages} stages", entries.len())));
                }
                for e in &entries {
                    parse_positive("eps schedule entry", e)?;
                }
                self.eps_schedule = Some(EpsSchedule::Entries(entries));
                let caps = self.degree_caps.take().unwrap_or_else(|| vec![128]);
                let caps = match caps.len() {
                    1 => vec![caps[0]; stages],
                    n if n == stages => caps,
                    n => return Err(bad(format!("{n} degree caps for {stages} stages"))),
                };
                for &c in &caps {
                    positive("degree cap", c)?;
                }
                self.degree_caps = Some(caps);
                self.grid.get_or_insert(50);
                if let Some(list) = &self.polynomials {
                    if list.len() < stages {
                        return Err(bad(format!("{} polynomials listed for {stages} stages", list.len())));
                    }
                }
                self.require_out()?;
            }
            Pipeline::DensityReport => {
                self.require_input()?;
                self.grid.get_or_insert(50);
                if self.out.is_none() {
                    self.out = self.input.clone();
                }
            }
            Pipeline::DecomposeCubes => {
                self.require_input()?;
                let eps = self.eps.get_or_insert_with(|| "1/10".into()).clone();
                parse_positive("eps", &eps)?;
                if let Some(d) = self.dim {
                    if d == 0 || d % 2 != 0 {
                        return Err(bad(format!("dimension {d} is not a positive even number")));
                    }
                }
                self.require_out()?;
            }
            Pipeline::CertifyProducts => {
                if self.input.is_none() {
                    positive("count", *self.count.get_or_insert(2))?;
                }
                self.grid.get_or_insert(41);
                self.require_out()?;
            }
            Pipeline::TowersValidate | Pipeline::TowersBuild => {
                self.model.get_or_insert(ModelKind::Solenoid);
                let a = self.a.get_or_insert_with(|| vec![2, 16, 128]).clone();
                self.dim.get_or_insert(2);
                self.resolution.get_or_insert(8);
                positive("samples", *self.samples.get_or_insert(2000))?;
                if self.pipeline == Pipeline::TowersBuild {
                    let stages = positive("stages", *self.stages.get_or_insert(a.len()))?;
                    let caps = self.degree_caps.get_or_insert_with(|| vec![128]);
                    if caps.len() != 1 {
                        return Err(bad("towers-build takes a single degree cap"));
                    }
                    positive("degree cap", caps[0])?;
                    self.grid.get_or_insert(50);
                    if let Some(list) = &self.polynomials {
                        if list.len() < stages {
                            return Err(bad(format!("{} polynomials listed for {stages} stages", list.len())));
                        }
                    }
                    self.require_out()?;
                }
            }
        }
        if let Some(list) = &self.polynomials {
            for p in list {
                parse_polynomial(p)?;
            }
        }
        Ok(self)
    }

    fn require_input(&self) -> CliResult<()> {
        if self.input.is_none() {
            return Err(bad(format!("{:?} needs an input", self.pipeline)));
        }
        Ok(())
    }

    fn require_out(&self) -> CliResult<()> {
        if self.out.is_none() {
            return Err(bad(format!("{:?} needs an output path", self.pipeline)));
        }
        Ok(())
    }

    /// sha256 of the canonical JSON form, ignoring where artifacts are written.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        hex(&Sha256::digest(serde_json::to_vec(&c).expect("config serializes")))
    }

    pub fn eps_entries(&self) -> CliResult<Vec<Rational>> {
        match &self.eps_schedule {
            Some(EpsSchedule::Entries(v)) => v.iter().map(|e| parse_positive("eps schedule entry", e)).collect(),
            _ => Err(bad("eps schedule is unresolved")),
        }
    }

    pub fn planted(&self) -> CliResult<Option<Vec<Vec<ComplexRational>>>> {
        self.polynomials
            .as_ref()
            .map(|list| list.iter().map(|p| parse_polynomial(p)).collect())
            .transpose()
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn parse_positive(label: &str, s: &str) -> CliResult<Rational> {
    let r = exact::parse(s).map_err(|e| bad(format!("{label} {s:?}: {e}")))?;
    if !r.is_positive() {
        return Err(bad(format!("{label} {s:?} must be positive")));
    }
    Ok(r)
}

fn parse_polynomial(p: &[[String; 2]]) -> CliResult<Vec<ComplexRational>> {
    if p.is_empty() {
        return Err(bad("a planted polynomial needs at least one coefficient"));
    }
    p.iter()
        .map(|[re, im]| {
            let re = exact::parse(re).map_err(|e| bad(e.to_string()))?;
            let im = exact::parse(im).map_err(|e| bad(e.to_string()))?;
            Ok(exact::complex(re, im))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn build_config(extra: &str) -> CliResult<RunConfig> {
        RunConfig::from_toml(&format!("pipeline = \"build\"\nout = \"o\"\n{extra}"))?.resolve()
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml("pipeline = \"build\"\nradixx = [2]\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn zero_eps_entry_is_a_config_error() {
        let err = build_config("eps_schedule = [\"1\", \"0\", \"1/100\"]").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(build_config("eps_schedule = [\"1\", \"1/10\"]").is_err());
        assert!(build_config("eps_schedule = \"loose\"").is_err());
    }

    #[test]
    fn defaults_fill_the_build() {
        let c = build_config("precision = \"double\"").unwrap();
        assert_eq!(c.radix, Some(vec![2, 2, 2]));
        assert_eq!(c.degree_caps, Some(vec![128; 3]));
        let eps = c.eps_entries().unwrap();
        assert_eq!(eps, vec![exact::int(1), exact::ratio(1, 10), exact::ratio(1, 100)]);
        assert_eq!(EpsSchedule::from_flag("default"), EpsSchedule::Named("default".into()));
        assert_eq!(EpsSchedule::from_flag("1/2"), EpsSchedule::Entries(vec!["1/2".into()]));
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = build_config("precision = \"double\"").unwrap();
        let mut b = a.clone();
        b.out = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.seed = Some(3);
        assert_ne!(a.hash(), b.hash());
    }
}
