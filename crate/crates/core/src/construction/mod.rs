//! The staged construction of a cocycle `F_n` on the solenoid.
//!
//! Stage 1 sets `q_1 = p_1` on `S_1`. Stage `n` fits one polynomial `q_n` on the square
//! `S_n` that reproduces translated copies of `q_{n-1}` on the margin squares
//! `K_{n-1,ij}` and the newly planted `p_n` on `K_{n-1,00}`.

mod enumeration;

use num_complex::Complex;
use num_traits::{One, Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use twofloat::TwoFloat;

pub use enumeration::{nth_polynomial, PolynomialEnumeration};

use crate::error::{Error, Result};
use crate::exact::{self, ComplexRational, Rational};
use crate::runge::{fit_polynomial, ApproxReport, ComplexPolynomial, FitOptions, Piece, PiecewiseTarget, Region};
use crate::solenoid::{self, RadixSequence, SolenoidPoint};

/// Where the planted polynomials `p_n` come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PolySource {
    Enumeration,
    List { polynomials: Vec<ComplexPolynomial> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagePlan {
    pub radix: RadixSequence,
    pub stages: usize,
    pub polynomials: PolySource,
    /// `eps[n-1]` is the fit tolerance of stage `n`; the stage-1 entry is `1`.
    #[serde(with = "exact::serde_rat_vec")]
    pub eps: Vec<Rational>,
    /// `margins[n-1]` is the inset of the squares `K_{n-1,ij}`.
    #[serde(with = "exact::serde_rat_vec")]
    pub margins: Vec<Rational>,
    pub degree_caps: Vec<usize>,
    pub fit: FitOptions,
}

impl StagePlan {
    /// `eps_n = margin_n = 10^-(n-1)` with a uniform degree cap.
    pub fn standard(radix: RadixSequence, stages: usize, degree_cap: usize) -> Result<Self> {
        let sched: Vec<Rational> = (1..=stages).map(|n| exact::ten_pow_neg(n as u32 - 1)).collect();
        let plan = Self {
            radix,
            stages,
            polynomials: PolySource::Enumeration,
            eps: sched.clone(),
            margins: sched,
            degree_caps: vec![degree_cap; stages],
            fit: FitOptions::with_cap(degree_cap),
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn with_polynomials(mut self, list: Vec<ComplexPolynomial>) -> Result<Self> {
        self.polynomials = PolySource::List { polynomials: list };
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.radix.dim() != 2 {
            return Err(Error::Parameter("the staged construction runs in one complex dimension".into()));
        }
        if self.stages == 0 || self.stages > self.radix.len() {
            return Err(Error::Depth {
                requested: self.stages,
                available: self.radix.len(),
            });
        }
        if self.eps.len() != self.stages
            || self.margins.len() != self.stages
            || self.degree_caps.len() != self.stages
        {
            return Err(Error::Parameter("schedules must list one entry per stage".into()));
        }
        for n in 2..=self.stages {
            if !self.eps[n - 1].is_positive() {
                return Err(Error::Parameter(format!("eps of stage {n} must be positive")));
            }
            let m = &self.margins[n - 1];
            if !m.is_positive() || exact::int(2) * m >= self.radix.big_r_rat(n - 1) {
                return Err(Error::Parameter(format!(
                    "margin {} leaves no square inside tiles of side {}",
                    exact::format(m),
                    self.radix.big_r(n - 1)
                )));
            }
        }
        if let PolySource::List { polynomials } = &self.polynomials {
            if polynomials.len() < self.stages {
                return Err(Error::Parameter(format!(
                    "{} polynomials listed for {} stages",
                    polynomials.len(),
                    self.stages
                )));
            }
        }
        Ok(())
    }

    /// `p_n` for `1 <= n <= stages`.
    pub fn polynomial(&self, n: usize) -> ComplexPolynomial {
        match &self.polynomials {
            PolySource::Enumeration => ComplexPolynomial::from_monomials(&nth_polynomial(n)),
            PolySource::List { polynomials } => polynomials[n - 1].clone(),
        }
    }

    pub fn fit_options(&self, n: usize) -> FitOptions {
        FitOptions {
            degree_cap: self.degree_caps[n - 1],
            ..self.fit.clone()
        }
    }

    pub fn digest(&self) -> String {
        digest(&serde_json::to_vec(self).expect("plan serializes"))
    }

    /// Builds stages `1..=stages`, continuing after any already certified stages.
    pub fn build_from(&self, mut done: Vec<Stage>) -> Result<Vec<Stage>> {
        self.validate()?;
        if done.is_empty() {
            done.push(first_stage(&self.radix, &self.polynomial(1)));
        }
        for (i, s) in done.iter().enumerate() {
            if s.n != i + 1 {
                return Err(Error::Consistency(format!("stage list out of order at {}", i + 1)));
            }
        }
        while done.len() < self.stages {
            let n = done.len() + 1;
            let prev = done.last().expect("nonempty");
            let params = StageParams {
                big_r_prev: self.radix.big_r_rat(n - 1),
                eps: self.eps[n - 1].clone(),
                margin: self.margins[n - 1].clone(),
                fit: self.fit_options(n),
            };
            let stage = build_stage(prev, &self.polynomial(n), self.radix.r(n), &params)?;
            done.push(stage);
        }
        Ok(done)
    }

    pub fn build(&self) -> Result<Vec<Stage>> {
        self.build_from(Vec::new())
    }
}

fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KCube {
    pub i: u64,
    pub j: u64,
    pub square: Region,
    /// Translation `(i R_{n-1}, j R_{n-1})` of the tile containing the square.
    #[serde(with = "exact::serde_complex_rat")]
    pub offset: ComplexRational,
    /// Certified error of the fit on this square.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub n: usize,
    pub q: ComplexPolynomial,
    pub planted: ComplexPolynomial,
    pub cubes: Vec<KCube>,
    pub report: Option<ApproxReport>,
    #[serde(with = "exact::serde_rat")]
    pub eps: Rational,
    #[serde(with = "exact::serde_rat")]
    pub margin: Rational,
    /// `R_n`, the side of the square carrying `q_n`.
    #[serde(with = "exact::serde_rat")]
    pub side: Rational,
    /// Digest of the serialized stage `n-1`.
    pub parent: Option<String>,
}

impl Stage {
    pub fn digest(&self) -> String {
        digest(&serde_json::to_vec(self).expect("stage serializes"))
    }
}

pub struct StageParams {
    pub big_r_prev: Rational,
    pub eps: Rational,
    pub margin: Rational,
    pub fit: FitOptions,
}

/// `q_1 = p_1` on `S_1`, no fit.
pub fn first_stage(radix: &RadixSequence, p1: &ComplexPolynomial) -> Stage {
    Stage {
        n: 1,
        q: p1.clone(),
        planted: p1.clone(),
        cubes: Vec::new(),
        report: None,
        eps: Rational::one(),
        margin: Rational::one(),
        side: radix.big_r_rat(1),
        parent: None,
    }
}

/// `K_{n-1,ij}` with the standard margin `10^-(n-1)`.
pub fn margins(n: usize, big_r_prev: &Rational, i: u64, j: u64) -> Result<Region> {
    margin_square(&exact::ten_pow_neg(n as u32 - 1), big_r_prev, i, j)
}

/// `[iR + m, (i+1)R - m] x [jR + m, (j+1)R - m]`.
pub fn margin_square(m: &Rational, big_r: &Rational, i: u64, j: u64) -> Result<Region> {
    if exact::int(2) * m >= *big_r {
        return Err(Error::Parameter(format!(
            "margin {} leaves an empty square in a tile of side {}",
            exact::format(m),
            exact::format(big_r)
        )));
    }
    let fi = exact::int(i as i64);
    let fj = exact::int(j as i64);
    Region::rect(
        &fi * big_r + m,
        (&fi + exact::int(1)) * big_r - m,
        &fj * big_r + m,
        (&fj + exact::int(1)) * big_r - m,
    )
}

/// Fits `q_n` from `q_{n-1}` and the planted `p_n`.
pub fn build_stage(prev: &Stage, p_n: &ComplexPolynomial, r_n: u64, params: &StageParams) -> Result<Stage> {
    let n = prev.n + 1;
    if params.big_r_prev != prev.side {
        return Err(Error::Consistency(format!(
            "stage {} has side {} but the plan expects {}",
            prev.n,
            exact::format(&prev.side),
            exact::format(&params.big_r_prev)
        )));
    }
    let big_r = &params.big_r_prev;
    let mut pieces = Vec::new();
    let mut cubes = Vec::new();
    for i in 0..r_n {
        for j in 0..r_n {
            let square = margin_square(&params.margin, big_r, i, j)?;
            let offset = Complex::new(big_r * exact::int(i as i64), big_r * exact::int(j as i64));
            let piece = if i == 0 && j == 0 {
                Piece::new(square.clone(), p_n.clone())
            } else {
                Piece::with_shift(square.clone(), prev.q.clone(), offset.clone())
            };
            pieces.push(piece);
            cubes.push(KCube {
                i,
                j,
                square,
                offset,
                error: 0.0,
            });
        }
    }
    let target = PiecewiseTarget::new(pieces)?;
    let (q, report) = fit_polynomial(&target, &params.eps, &params.fit).map_err(|e| Error::Stage {
        stage: n,
        cell: 0,
        source: Box::new(e),
    })?;
    for (cube, err) in cubes.iter_mut().zip(&report.piece_errors) {
        cube.error = *err;
    }
    Ok(Stage {
        n,
        q,
        planted: p_n.clone(),
        cubes,
        report: Some(report),
        eps: params.eps.clone(),
        margin: params.margin.clone(),
        side: big_r * exact::int(r_n as i64),
        parent: Some(prev.digest()),
    })
}

fn point_of(t: &[Rational]) -> ComplexRational {
    Complex::new(t[0].clone(), t[1].clone())
}

/// `F_n^g(z) = q_n(t_n(T_z g))`.
pub fn evaluate(g: &SolenoidPoint, stage: &Stage, z: &ComplexRational) -> Result<Complex<TwoFloat>> {
    if g.depth() < stage.n {
        return Err(Error::Depth {
            requested: stage.n,
            available: g.depth(),
        });
    }
    if g.dim() != 2 {
        return Err(Error::Dimension {
            expected: 2,
            found: g.dim(),
        });
    }
    let moved = solenoid::translate(g, &[z.re.clone(), z.im.clone()]);
    Ok(stage.q.eval_exact(&point_of(moved.level(stage.n))))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCertificate {
    pub k: usize,
    pub n: usize,
    /// Translation taking the planted square into the final stage.
    #[serde(with = "exact::serde_complex_rat")]
    pub w: ComplexRational,
    /// Lower-left corner of the measured square, before translation.
    #[serde(with = "exact::serde_complex_rat")]
    pub corner: ComplexRational,
    /// Half side of the measured square; zero or negative means the square is empty.
    #[serde(with = "exact::serde_rat")]
    pub rho: Rational,
    pub measured: f64,
    #[serde(with = "exact::serde_rat")]
    pub bound: Rational,
    pub grid: usize,
    pub vacuous: bool,
    pub holds: bool,
}

fn sum(values: impl Iterator<Item = Rational>) -> Rational {
    values.fold(Rational::zero(), |a, b| a + b)
}

/// Follows tile `(0, 1)` at each later stage, checking the square stays inside a K-square.
fn chain_translation(stages: &[Stage], from: usize, lo: &Rational, hi: &Rational) -> Result<ComplexRational> {
    let mut w = exact::complex_zero();
    for stage in &stages[from..] {
        let cube = stage
            .cubes
            .iter()
            .find(|c| c.i == 0 && c.j == 1)
            .ok_or_else(|| Error::Consistency(format!("stage {} has no tile (0, 1)", stage.n)))?;
        w = &w + &cube.offset;
        let corners = [
            Complex::new(lo + &w.re, lo + &w.im),
            Complex::new(hi + &w.re, hi + &w.im),
        ];
        if !corners.iter().all(|c| cube.square.contains(c)) {
            return Err(Error::Consistency(format!(
                "chain leaves the K-square of stage {}",
                stage.n
            )));
        }
    }
    Ok(w)
}

fn measure_square(
    q: &ComplexPolynomial,
    reference: &ComplexPolynomial,
    w: &ComplexRational,
    lo: &Rational,
    hi: &Rational,
    grid: usize,
) -> f64 {
    let step = (hi - lo) / exact::int(grid as i64 - 1);
    let mut worst: f64 = 0.0;
    for a in 0..grid {
        for b in 0..grid {
            let z = Complex::new(lo + &step * exact::int(a as i64), lo + &step * exact::int(b as i64));
            let diff = q.eval_exact(&(&z + w)) - reference.eval_exact(&z);
            let d = crate::numeric::cabs(diff);
            worst = worst.max(d.hi() + d.lo());
        }
    }
    worst
}

/// Locates the planted copy of `p_k` inside `q_n` (the last stage) and measures the error.
///
/// The measured square has side `R_{k-1} - 2 sum_{m=k}^{n} margin_m`; the bound is
/// `sum_{m=k}^{n} eps_m`. When the square is empty the certificate is vacuous.
pub fn density_check(stages: &[Stage], k: usize, grid: usize) -> Result<DensityCertificate> {
    let n = stages.len();
    if k == 0 || k > n {
        return Err(Error::Depth {
            requested: k,
            available: n,
        });
    }
    for (i, s) in stages.iter().enumerate() {
        if s.n != i + 1 {
            return Err(Error::Consistency("stage list out of order".into()));
        }
    }
    let grid = grid.max(50);
    let bound = sum(stages[k - 1..].iter().map(|s| s.eps.clone()));
    let shrink = sum(stages[k - 1..].iter().map(|s| s.margin.clone()));
    let side_prev = if k == 1 {
        Rational::one()
    } else {
        stages[k - 2].side.clone()
    };
    let lo = shrink.clone();
    let hi = &side_prev - &shrink;
    let rho = (&hi - &lo) / exact::int(2);
    let corner = Complex::new(lo.clone(), lo.clone());
    if !rho.is_positive() {
        return Ok(DensityCertificate {
            k,
            n,
            w: exact::complex_zero(),
            corner,
            rho,
            measured: 0.0,
            bound,
            grid: 0,
            vacuous: true,
            holds: true,
        });
    }
    if k >= 2 {
        let planted = stages[k - 1]
            .cubes
            .iter()
            .find(|c| c.i == 0 && c.j == 0)
            .ok_or_else(|| Error::Consistency(format!("stage {k} has no planted square")))?;
        let z0 = Complex::new(lo.clone(), lo.clone());
        let z1 = Complex::new(hi.clone(), hi.clone());
        if !(planted.square.contains(&z0) && planted.square.contains(&z1)) {
            return Err(Error::Consistency("measured square leaves the planted square".into()));
        }
    }
    let w = chain_translation(stages, k, &lo, &hi)?;
    let measured = measure_square(&stages[n - 1].q, &stages[k - 1].planted, &w, &lo, &hi, grid);
    let holds = measured <= exact::to_f64(&bound);
    Ok(DensityCertificate {
        k,
        n,
        w,
        corner,
        rho,
        measured,
        bound,
        grid,
        vacuous: false,
        holds,
    })
}

/// Measures `|q_n(w + z) - q_m(z)|` along the chain of K-squares starting at stage `m`.
///
/// The bound is `sum_{l=m+1}^{n} eps_l` on the square `[s, R_m - s]^2` with
/// `s = sum_{l=m+1}^{n} margin_l`.
pub fn telescoping_check(stages: &[Stage], m: usize, grid: usize) -> Result<DensityCertificate> {
    let n = stages.len();
    if m == 0 || m >= n {
        return Err(Error::Depth {
            requested: m,
            available: n,
        });
    }
    let bound = sum(stages[m..].iter().map(|s| s.eps.clone()));
    let shrink = sum(stages[m..].iter().map(|s| s.margin.clone()));
    let lo = shrink.clone();
    let hi = &stages[m - 1].side - &shrink;
    let rho = (&hi - &lo) / exact::int(2);
    if !rho.is_positive() {
        return Err(Error::Consistency("telescoping square is empty".into()));
    }
    let w = chain_translation(stages, m, &lo, &hi)?;
    let grid = grid.max(50);
    let measured = measure_square(&stages[n - 1].q, &stages[m - 1].q, &w, &lo, &hi, grid);
    Ok(DensityCertificate {
        k: m,
        n,
        w,
        corner: Complex::new(lo.clone(), lo),
        rho,
        measured,
        holds: measured <= exact::to_f64(&bound),
        bound,
        grid,
        vacuous: false,
    })
}

/// `area(S_n minus the union of K-squares)`, exactly, and the bound `r^2 4 R m`.
pub fn uncovered_area(r_n: u64, big_r_prev: &Rational, margin: &Rational) -> (Rational, Rational) {
    let r = exact::int(r_n as i64);
    let side = &r * big_r_prev;
    let inner = big_r_prev - exact::int(2) * margin;
    let area = &side * &side - &r * &r * &inner * &inner;
    let bound = &r * &r * exact::int(4) * big_r_prev * margin;
    (area, bound)
}

/// Fraction of Haar samples `g` whose orbit patch `t_n(g) + [-radius, radius]^2` lies
/// inside one of the K-squares of stage `n`.
pub fn patch_fraction(
    radix: &RadixSequence,
    stage: &Stage,
    radius: &Rational,
    samples: usize,
    resolution: u64,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inside = 0usize;
    for _ in 0..samples {
        let g = solenoid::haar_sample_with(radix, stage.n, resolution, &mut rng)?;
        let t = g.level(stage.n);
        let lo = Complex::new(&t[0] - radius, &t[1] - radius);
        let hi = Complex::new(&t[0] + radius, &t[1] + radius);
        if stage
            .cubes
            .iter()
            .any(|c| c.square.contains(&lo) && c.square.contains(&hi))
        {
            inside += 1;
        }
    }
    Ok(inside as f64 / samples.max(1) as f64)
}
