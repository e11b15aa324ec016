use num_complex::Complex;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use super::{ComplexPolynomial, Region};
use crate::error::{Error, Result};
use crate::exact::{self, ComplexRational, Rational};
use crate::numeric::{self, cabs, Precision, Real};

type Cdd = Complex<TwoFloat>;

/// A region together with the polynomial `target(z - shift)` to approximate there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub region: Region,
    pub target: ComplexPolynomial,
    #[serde(with = "exact::serde_complex_rat")]
    pub shift: ComplexRational,
}

impl Piece {
    pub fn new(region: Region, target: ComplexPolynomial) -> Self {
        Self {
            region,
            target,
            shift: exact::complex_zero(),
        }
    }

    pub fn with_shift(region: Region, target: ComplexPolynomial, shift: ComplexRational) -> Self {
        Self {
            region,
            target,
            shift,
        }
    }

    /// The target as a polynomial in `z`.
    pub fn effective_target(&self) -> ComplexPolynomial {
        self.target.shifted(&self.shift)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseTarget {
    pieces: Vec<Piece>,
}

impl PiecewiseTarget {
    /// Pieces with different targets must be at positive distance; pieces carrying the
    /// same polynomial may touch or overlap.
    pub fn new(pieces: Vec<Piece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::Parameter("piecewise target without pieces".into()));
        }
        let effective: Vec<ComplexPolynomial> = pieces.iter().map(Piece::effective_target).collect();
        for i in 0..pieces.len() {
            for j in i + 1..pieces.len() {
                if !effective[i].same_function(&effective[j]) && !pieces[i].region.separated_from(&pieces[j].region) {
                    return Err(Error::Overlap(format!("pieces {i} and {j}")));
                }
            }
        }
        Ok(Self { pieces })
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn translated(&self, w: &ComplexRational) -> Self {
        Self {
            pieces: self
                .pieces
                .iter()
                .map(|p| Piece {
                    region: p.region.translated(w),
                    target: p.target.clone(),
                    shift: &p.shift + w,
                })
                .collect(),
        }
    }

    /// Bounding-box midpoint and a rational upper bound of the half diagonal.
    pub fn basis(&self) -> (ComplexRational, Rational) {
        let boxes: Vec<_> = self.pieces.iter().map(|p| p.region.bbox()).collect();
        let min = |f: fn(&(Rational, Rational, Rational, Rational)) -> &Rational| {
            boxes.iter().map(f).min().expect("nonempty").clone()
        };
        let max = |f: fn(&(Rational, Rational, Rational, Rational)) -> &Rational| {
            boxes.iter().map(f).max().expect("nonempty").clone()
        };
        let x0 = min(|b| &b.0);
        let x1 = max(|b| &b.1);
        let y0 = min(|b| &b.2);
        let y1 = max(|b| &b.3);
        let two = exact::int(2);
        let center = Complex::new((&x0 + &x1) / &two, (&y0 + &y1) / &two);
        let hx = (x1 - x0) / &two;
        let hy = (y1 - y0) / &two;
        let diag2 = &hx * &hx + &hy * &hy;
        let scale = if diag2.is_zero() {
            Rational::one()
        } else {
            exact::sqrt_upper(&diag2, 10)
        };
        (center, scale)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub degree_cap: usize,
    /// Base sampling density: boundary points per piece are at least `4 * grid_density`.
    pub grid_density: usize,
    pub precision: Precision,
    /// Validation must achieve `safety * eps`.
    pub safety: f64,
    pub start_degree: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            degree_cap: 128,
            grid_density: 8,
            precision: Precision::DoubleDouble,
            safety: 0.9,
            start_degree: 2,
        }
    }
}

impl FitOptions {
    pub fn with_cap(cap: usize) -> Self {
        Self {
            degree_cap: cap,
            ..Self::default()
        }
    }

    /// Degrees tried: `start, 2 start, 4 start, ...` below the cap, then the cap.
    pub fn schedule(&self) -> Vec<usize> {
        let cap = self.degree_cap.max(1);
        let mut out = Vec::new();
        let mut d = self.start_degree.max(1);
        while d < cap {
            out.push(d);
            d *= 2;
        }
        out.push(cap);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMethod {
    /// All pieces carry the same polynomial, which is returned unchanged.
    Exact,
    LeastSquares,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeAttempt {
    pub degree: usize,
    pub achieved_eps: f64,
    pub conditioning: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxReport {
    pub method: FitMethod,
    pub degree: usize,
    pub piece_errors: Vec<f64>,
    pub achieved_eps: f64,
    pub target_eps: f64,
    pub safety: f64,
    pub certified: bool,
    pub fit_points: usize,
    pub validation_points: usize,
    /// Boundary validation points per piece.
    pub validation_density: usize,
    pub conditioning: f64,
    pub precision: Precision,
    pub history: Vec<DegreeAttempt>,
}

fn finite(x: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        f64::MAX
    }
}

struct Sampling {
    boundary: usize,
    interior: usize,
}

fn fit_sampling(deg: usize, pieces: usize, opts: &FitOptions) -> Sampling {
    let per_piece = (3 * (deg + 1)).div_ceil(pieces);
    Sampling {
        boundary: (4 * opts.grid_density.max(1)).max(per_piece),
        interior: (opts.grid_density / 2).max(2),
    }
}

fn validation_sampling(fit: &Sampling) -> Sampling {
    Sampling {
        boundary: 4 * fit.boundary + 3,
        interior: 2 * fit.interior + 1,
    }
}

fn fit_points(region: &Region, s: &Sampling) -> Vec<Cdd> {
    let mut pts = region.boundary_points(s.boundary, 0.5);
    pts.extend(region.interior_points(s.interior, 0.5));
    pts
}

fn validation_points(region: &Region, s: &Sampling) -> Vec<Cdd> {
    let mut pts = region.boundary_points(s.boundary, 0.0);
    pts.extend(region.interior_points(s.interior, 0.25));
    pts
}

fn solve<T: numeric::Real>(ws: &[Cdd], values: &[Cdd], deg: usize) -> (Vec<Cdd>, f64) {
    let m = ws.len();
    let mut columns: Vec<Vec<Complex<T>>> = vec![Vec::with_capacity(m); deg + 1];
    for w in ws {
        let w: Complex<T> = numeric::dd_to_complex(*w);
        let mut p = Complex::new(T::one(), T::zero());
        for col in columns.iter_mut() {
            col.push(p);
            p = p * w;
        }
    }
    let b: Vec<Complex<T>> = values.iter().map(|v| numeric::dd_to_complex(*v)).collect();
    let tol = match std::mem::size_of::<T>() {
        8 => 1e-15,
        _ => 1e-30,
    };
    let ls = numeric::least_squares(columns, b, tol);
    let cond = ls.conditioning();
    (ls.solution.into_iter().map(numeric::complex_to_dd).collect(), cond)
}

/// Sup error of `poly` against every piece, measured on the validation grid.
fn validate(poly: &ComplexPolynomial, target: &PiecewiseTarget, s: &Sampling) -> (Vec<f64>, usize) {
    let eval = poly.evaluator();
    let mut total = 0;
    let errors = target
        .pieces()
        .iter()
        .map(|piece| {
            let t = piece.effective_target().evaluator();
            let pts = validation_points(&piece.region, s);
            total += pts.len();
            pts.iter()
                .map(|z| cabs(eval.eval(*z) - t.eval(*z)).to_f64())
                .fold(0.0, f64::max)
        })
        .collect();
    (errors, total)
}

fn attempt(
    target: &PiecewiseTarget,
    deg: usize,
    center: &ComplexRational,
    scale: &Rational,
    opts: &FitOptions,
    eps: f64,
) -> Result<(ComplexPolynomial, ApproxReport)> {
    let s = fit_sampling(deg, target.pieces().len(), opts);
    let c = exact::complex_to_dd(center);
    let inv_s = exact::to_dd(&(Rational::one() / scale));
    let mut ws = Vec::new();
    let mut values = Vec::new();
    for piece in target.pieces() {
        let t = piece.effective_target().evaluator();
        for z in fit_points(&piece.region, &s) {
            ws.push((z - c).scale(inv_s));
            values.push(t.eval(z));
        }
    }
    let (coeffs, conditioning) = match opts.precision {
        Precision::Double => solve::<f64>(&ws, &values, deg),
        Precision::DoubleDouble => solve::<TwoFloat>(&ws, &values, deg),
    };
    let poly = ComplexPolynomial::new(center.clone(), scale.clone(), coeffs)?;
    let vs = validation_sampling(&s);
    let (piece_errors, vcount) = validate(&poly, target, &vs);
    let achieved = piece_errors.iter().copied().fold(0.0, f64::max);
    let achieved = if achieved.is_nan() { f64::MAX } else { achieved };
    let report = ApproxReport {
        method: FitMethod::LeastSquares,
        degree: deg,
        piece_errors: piece_errors.into_iter().map(finite).collect(),
        achieved_eps: finite(achieved),
        target_eps: eps,
        safety: opts.safety,
        certified: achieved < opts.safety * eps,
        fit_points: ws.len(),
        validation_points: vcount,
        validation_density: vs.boundary,
        conditioning: finite(conditioning),
        precision: opts.precision,
        history: Vec::new(),
    };
    Ok((poly, report))
}

/// Fits a single polynomial to a piecewise target with sup error below `eps` on every piece.
///
/// Degrees follow [`FitOptions::schedule`]; the first degree whose validation error is
/// below `safety * eps` is returned. When every degree fails the error carries the
/// report of the best attempt.
pub fn fit_polynomial(
    target: &PiecewiseTarget,
    eps: &Rational,
    opts: &FitOptions,
) -> Result<(ComplexPolynomial, ApproxReport)> {
    if !eps.is_positive() {
        return Err(Error::Parameter("eps must be positive".into()));
    }
    let eps_f = exact::to_f64(eps);
    let first = target.pieces()[0].effective_target().canonical();
    if target
        .pieces()
        .iter()
        .all(|p| p.effective_target().same_function(&first))
    {
        let n = target.pieces().len();
        let report = ApproxReport {
            method: FitMethod::Exact,
            degree: first.degree(),
            piece_errors: vec![0.0; n],
            achieved_eps: 0.0,
            target_eps: eps_f,
            safety: opts.safety,
            certified: true,
            fit_points: 0,
            validation_points: 0,
            validation_density: 0,
            conditioning: 1.0,
            precision: opts.precision,
            history: Vec::new(),
        };
        return Ok((first, report));
    }
    let (center, scale) = target.basis();
    let mut history = Vec::new();
    let mut best: Option<ApproxReport> = None;
    for deg in opts.schedule() {
        let (poly, mut report) = attempt(target, deg, &center, &scale, opts, eps_f)?;
        history.push(DegreeAttempt {
            degree: deg,
            achieved_eps: report.achieved_eps,
            conditioning: report.conditioning,
        });
        if report.certified {
            report.history = history;
            return Ok((poly, report));
        }
        if best.as_ref().is_none_or(|b| report.achieved_eps < b.achieved_eps) {
            best = Some(report);
        }
    }
    let mut best = best.expect("at least one degree attempted");
    best.history = history;
    Err(Error::Approximation {
        context: format!("{} pieces, degree cap {}", target.pieces().len(), opts.degree_cap),
        best: best.achieved_eps,
        degree: best.degree,
        target: eps_f * opts.safety,
        report: Box::new(best),
    })
}

/// A polynomial with `|p| < bound` on every region of `a` and `|p - 1| < bound` on `b`.
pub fn separating_polynomial(
    a: &[Region],
    b: &[Region],
    bound: &Rational,
    opts: &FitOptions,
) -> Result<(ComplexPolynomial, ApproxReport)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Parameter("both sides must be nonempty".into()));
    }
    for (i, ra) in a.iter().enumerate() {
        for (j, rb) in b.iter().enumerate() {
            if !ra.separated_from(rb) {
                return Err(Error::Overlap(format!("A[{i}] and B[{j}]")));
            }
        }
    }
    let zero = ComplexPolynomial::zero();
    let one = ComplexPolynomial::constant_f64(1.0, 0.0);
    let pieces = a
        .iter()
        .map(|r| Piece::new(r.clone(), zero.clone()))
        .chain(b.iter().map(|r| Piece::new(r.clone(), one.clone())))
        .collect();
    fit_polynomial(&PiecewiseTarget::new(pieces)?, bound, opts)
}

/// A polynomial close to `p0` on `|z| <= r` whose translate by `3r` is close to `p1` there.
pub fn birkhoff_pair(
    p0: &ComplexPolynomial,
    p1: &ComplexPolynomial,
    r: &Rational,
    eps: &Rational,
    opts: &FitOptions,
) -> Result<(ComplexPolynomial, ApproxReport)> {
    if !r.is_positive() {
        return Err(Error::Parameter("radius must be positive".into()));
    }
    let shift = Complex::new(r * exact::int(3), Rational::zero());
    let pieces = vec![
        Piece::new(Region::disk(exact::complex_zero(), r.clone())?, p0.clone()),
        Piece::with_shift(Region::disk(shift.clone(), r.clone())?, p1.clone(), shift),
    ];
    fit_polynomial(&PiecewiseTarget::new(pieces)?, eps, opts)
}
