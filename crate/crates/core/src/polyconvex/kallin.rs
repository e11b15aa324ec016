use num_complex::Complex;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use super::boxes::RBox;
use super::certificate::{Checker, ReplayReport, Scope, SeparationCertificate, Separator, SplitStep};
use crate::error::{Error, Result};
use crate::exact::{self, ComplexRational, Rational};
use crate::numeric::cabs;
use crate::runge::{separating_polynomial, ApproxReport, ComplexPolynomial, FitOptions, Region};

type Cdd = Complex<TwoFloat>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessMethod {
    /// `(z - a) / (b - a)`, certified exactly at the corners.
    Affine,
    /// A least-squares separating polynomial, certified on sample grids.
    Fitted,
}

/// A polynomial `p(z) = p_0(z_coordinate)` with `|p| < 1/3` on `K1` and `|p - 1| < 1/3` on `K2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KallinWitness {
    pub axis: usize,
    #[serde(with = "exact::serde_rat")]
    pub c: Rational,
    pub coordinate: usize,
    pub poly: ComplexPolynomial,
    pub method: WitnessMethod,
    pub degree: usize,
    pub low_sup: f64,
    pub high_sup: f64,
    #[serde(with = "exact::serde_rat")]
    pub bound: Rational,
    pub certified: bool,
    pub sample_points: usize,
    pub report: Option<ApproxReport>,
}

impl KallinWitness {
    /// Evaluates the lifted polynomial at a point of `R^{2d}`.
    pub fn eval(&self, x: &[Rational]) -> Cdd {
        let z = Complex::new(x[2 * self.coordinate].clone(), x[2 * self.coordinate + 1].clone());
        self.poly.eval_exact(&z)
    }
}

/// The rectangle swept by `b` in the complex coordinate `coordinate`.
pub fn project(b: &RBox, coordinate: usize) -> Region {
    let (x, y) = (2 * coordinate, 2 * coordinate + 1);
    Region::Rect {
        re_lo: b.lo[x].clone(),
        re_hi: b.hi[x].clone(),
        im_lo: b.lo[y].clone(),
        im_hi: b.hi[y].clone(),
    }
}

fn bbox_center(regions: &[Region]) -> ComplexRational {
    let boxes: Vec<_> = regions.iter().map(Region::bbox).collect();
    let x0 = boxes.iter().map(|b| &b.0).min().expect("nonempty");
    let x1 = boxes.iter().map(|b| &b.1).max().expect("nonempty");
    let y0 = boxes.iter().map(|b| &b.2).min().expect("nonempty");
    let y1 = boxes.iter().map(|b| &b.3).max().expect("nonempty");
    let two = exact::int(2);
    Complex::new((x0 + x1) / &two, (y0 + y1) / &two)
}

fn norm2(z: &ComplexRational) -> Rational {
    &z.re * &z.re + &z.im * &z.im
}

/// `max |z - a|^2` over the corners of the rectangles.
fn corner_radius2(regions: &[Region], a: &ComplexRational) -> Rational {
    regions
        .iter()
        .flat_map(|r| r.corners().expect("projections are rectangles"))
        .map(|z| norm2(&(&z - a)))
        .max()
        .unwrap_or_else(Rational::zero)
}

/// Points of an `n x n` grid over a rectangle, edges included.
pub fn sample_grid(region: &Region, n: usize) -> Vec<ComplexRational> {
    let (x0, x1, y0, y1) = region.bbox();
    let steps = exact::int((n.max(2) - 1) as i64);
    let dx = (&x1 - &x0) / &steps;
    let dy = (&y1 - &y0) / &steps;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n.max(2) {
        for j in 0..n.max(2) {
            let z = Complex::new(&x0 + &dx * exact::int(i as i64), &y0 + &dy * exact::int(j as i64));
            if region.contains(&z) {
                out.push(z);
            }
        }
    }
    out
}

fn to_f64(v: Cdd) -> f64 {
    let a = cabs(v);
    a.hi() + a.lo()
}

/// `(sup |p| on a, sup |p - 1| on b, points)` on sample grids.
pub fn grid_sups(poly: &ComplexPolynomial, a: &[Region], b: &[Region], n: usize) -> (f64, f64, usize) {
    let one = Complex::new(TwoFloat::from(1.0), TwoFloat::from(0.0));
    let mut count = 0;
    let mut low: f64 = 0.0;
    for r in a {
        for z in sample_grid(r, n) {
            low = low.max(to_f64(poly.eval_exact(&z)));
            count += 1;
        }
    }
    let mut high: f64 = 0.0;
    for r in b {
        for z in sample_grid(r, n) {
            high = high.max(to_f64(poly.eval_exact(&z) - one));
            count += 1;
        }
    }
    (low, high, count)
}

const WITNESS_GRID: usize = 41;

/// Separates `K1 ⊂ {x_axis < c}` from `K2 ⊂ {x_axis > c}` by a polynomial in the complex
/// coordinate containing `axis`.
pub fn kallin_witness(k1: &[RBox], k2: &[RBox], axis: usize, c: &Rational, opts: &FitOptions) -> Result<KallinWitness> {
    if k1.is_empty() || k2.is_empty() {
        return Err(Error::Parameter("both sides need at least one box".into()));
    }
    let dim = k1[0].dim();
    if dim % 2 != 0 || axis >= dim {
        return Err(Error::Parameter(format!("axis {axis} in real dimension {dim}")));
    }
    if let Some(b) = k1.iter().chain(k2).find(|b| b.dim() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            found: b.dim(),
        });
    }
    if !k1.iter().all(|b| &b.hi[axis] < c) || !k2.iter().all(|b| &b.lo[axis] > c) {
        return Err(Error::Parameter(format!(
            "the hyperplane x_{axis} = {} does not strictly separate the two sides",
            exact::format(c)
        )));
    }
    let coordinate = axis / 2;
    let a_side: Vec<Region> = k1.iter().map(|b| project(b, coordinate)).collect();
    let b_side: Vec<Region> = k2.iter().map(|b| project(b, coordinate)).collect();
    let bound = exact::ratio(1, 3);

    let a = bbox_center(&a_side);
    let b = bbox_center(&b_side);
    let d2 = norm2(&(&b - &a));
    let ra = corner_radius2(&a_side, &a);
    let rb = corner_radius2(&b_side, &b);
    let nine = exact::int(9);
    if &nine * &ra < d2 && &nine * &rb < d2 {
        let poly = ComplexPolynomial::affine(&a, &b)?;
        return Ok(KallinWitness {
            axis,
            c: c.clone(),
            coordinate,
            poly,
            method: WitnessMethod::Affine,
            degree: 1,
            low_sup: exact::to_f64(&(ra / &d2)).sqrt(),
            high_sup: exact::to_f64(&(rb / &d2)).sqrt(),
            bound,
            certified: true,
            sample_points: 4 * (k1.len() + k2.len()),
            report: None,
        });
    }
    let (poly, report) = separating_polynomial(&a_side, &b_side, &bound, opts)?;
    let (low, high, count) = grid_sups(&poly, &a_side, &b_side, WITNESS_GRID);
    let limit = exact::to_f64(&bound);
    Ok(KallinWitness {
        axis,
        c: c.clone(),
        coordinate,
        degree: poly.degree(),
        poly,
        method: WitnessMethod::Fitted,
        low_sup: low,
        high_sup: high,
        bound,
        certified: low < limit && high < limit,
        sample_points: count,
        report: Some(report),
    })
}

/// The induction chain showing `union K_i x L_j` is polynomially convex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductUnionCertificate {
    pub ks: Vec<Region>,
    pub ls: Vec<Region>,
    #[serde(with = "exact::serde_rat")]
    pub bound: Rational,
    /// Leaf `j * a + i` is `K_i x L_j`.
    pub certificate: SeparationCertificate,
}

impl ProductUnionCertificate {
    pub fn leaf(&self, i: usize, j: usize) -> usize {
        j * self.ks.len() + i
    }
}

const PRODUCT_GRID: usize = 31;

fn check_disjoint(sets: &[Region], name: &str) -> Result<()> {
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            if !sets[i].separated_from(&sets[j]) {
                return Err(Error::Overlap(format!("{name}[{i}] and {name}[{j}]")));
            }
        }
    }
    Ok(())
}

fn with_step(e: Error, step: usize) -> Error {
    match e {
        Error::Approximation {
            context,
            best,
            degree,
            target,
            report,
        } => Error::Approximation {
            context: format!("product-union step {step}: {context}"),
            best,
            degree,
            target,
            report,
        },
        other => other,
    }
}

fn separating_step(low: &[Region], high: &Region, bound: &Rational, coordinate: usize, opts: &FitOptions, step: usize) -> Result<Separator> {
    let (poly, _) = separating_polynomial(low, std::slice::from_ref(high), bound, opts).map_err(|e| with_step(e, step))?;
    let (low_sup, high_sup, _) = grid_sups(&poly, low, std::slice::from_ref(high), PRODUCT_GRID);
    Ok(Separator::Polynomial {
        coordinate,
        poly,
        bound: bound.clone(),
        low_sup,
        high_sup,
    })
}

/// Emits the double induction: for each `L_j`, `K_1 x L_j, ..., K_a x L_j` are joined one
/// at a time, then the rows `K x L_1, ..., K x L_b`. Every join carries a one-variable
/// polynomial with `|p| <= 1/10` on the joined part and `|p - 1| <= 1/10` on the new set.
pub fn product_union_certificate(ks: &[Region], ls: &[Region], opts: &FitOptions) -> Result<ProductUnionCertificate> {
    if ks.is_empty() || ls.is_empty() {
        return Err(Error::Parameter("both factor lists must be nonempty".into()));
    }
    check_disjoint(ks, "K")?;
    check_disjoint(ls, "L")?;
    let (a, b) = (ks.len(), ls.len());
    let bound = exact::ratio(1, 10);
    let mut k_seps = Vec::with_capacity(a.saturating_sub(1));
    for u in 1..a {
        k_seps.push(separating_step(&ks[..u], &ks[u], &bound, 0, opts, u - 1)?);
    }
    let mut steps = Vec::new();
    let mut next = a * b;
    let mut rows = Vec::with_capacity(b);
    for j in 0..b {
        let mut acc = j * a;
        for (u, sep) in k_seps.iter().enumerate() {
            steps.push(SplitStep {
                scope: Scope::Factor,
                grid: None,
                host: None,
                separator: sep.clone(),
                low: acc,
                high: j * a + u + 1,
            });
            acc = next;
            next += 1;
        }
        rows.push(acc);
    }
    let mut acc = rows[0];
    for v in 1..b {
        let sep = separating_step(&ls[..v], &ls[v], &bound, 1, opts, steps.len())?;
        steps.push(SplitStep {
            scope: Scope::Factor,
            grid: None,
            host: None,
            separator: sep,
            low: acc,
            high: rows[v],
        });
        acc = next;
        next += 1;
    }
    Ok(ProductUnionCertificate {
        ks: ks.to_vec(),
        ls: ls.to_vec(),
        bound,
        certificate: SeparationCertificate { leaves: a * b, steps },
    })
}

/// Re-checks order and bounds of a product-union certificate on independent `grid x grid`
/// samples.
pub fn product_union_replay(cert: &ProductUnionCertificate, grid: usize) -> Result<ReplayReport> {
    let (a, b) = (cert.ks.len(), cert.ls.len());
    if cert.certificate.leaves != a * b {
        return Err(Error::Certificate("leaf count is not a * b".into()));
    }
    let steps = &cert.certificate.steps;
    if steps.len() != a * b - 1 {
        return Err(Error::Certificate(format!("{} steps for {} products", steps.len(), a * b)));
    }
    let nodes = cert.certificate.node_leaves()?;
    let limit = exact::to_f64(&cert.bound);
    let mut ck = Checker::new();
    for (s, step) in steps.iter().enumerate() {
        let Separator::Polynomial {
            coordinate,
            poly,
            low_sup,
            high_sup,
            ..
        } = &step.separator
        else {
            ck.check(false, || format!("step {s} has no polynomial"));
            continue;
        };
        let mut low: Vec<(usize, usize)> = nodes[step.low].iter().map(|&n| (n % a, n / a)).collect();
        let mut high: Vec<(usize, usize)> = nodes[step.high].iter().map(|&n| (n % a, n / a)).collect();
        low.sort();
        high.sort();
        let (want_coord, want_low, want_high, low_sets, high_set) = if s < b * (a - 1) {
            let (j, u) = (s / (a - 1), s % (a - 1) + 1);
            (
                0,
                (0..u).map(|i| (i, j)).collect::<Vec<_>>(),
                vec![(u, j)],
                cert.ks[..u].to_vec(),
                cert.ks[u].clone(),
            )
        } else {
            let v = s - b * (a - 1) + 1;
            let mut wl: Vec<(usize, usize)> = (0..a).flat_map(|i| (0..v).map(move |j| (i, j))).collect();
            wl.sort();
            (1, wl, (0..a).map(|i| (i, v)).collect(), cert.ls[..v].to_vec(), cert.ls[v].clone())
        };
        ck.check(step.scope == Scope::Factor && *coordinate == want_coord, || format!("step {s} uses the wrong factor"));
        ck.check(low == want_low && high == want_high, || format!("step {s} is out of induction order"));
        ck.check(*low_sup <= limit && *high_sup <= limit, || format!("step {s} records a bound above 1/10"));
        let (l, h, _) = grid_sups(poly, &low_sets, std::slice::from_ref(&high_set), grid);
        ck.check(l <= limit && h <= limit, || format!("step {s} exceeds 1/10 on the replay grid ({l:.3e}, {h:.3e})"));
    }
    Ok(ck.report())
}
