//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use dense_orbits::exact::{self, Rational};
use dense_orbits::runge::{ComplexPolynomial, Region};
use num_complex::Complex;

/// Sup of `|f(z)|` over an f64 grid of `n` boundary and `m x m` interior samples,
/// built without the library's sampling code.
pub fn grid_sup(region: &Region, n: usize, m: usize, f: impl Fn(f64, f64) -> f64) -> f64 {
    let mut pts = Vec::new();
    match region {
        Region::Rect { re_lo, re_hi, im_lo, im_hi } => {
            let (x0, x1) = (exact::to_f64(re_lo), exact::to_f64(re_hi));
            let (y0, y1) = (exact::to_f64(im_lo), exact::to_f64(im_hi));
            let per_side = n.div_ceil(4).max(2);
            for k in 0..=per_side {
                let t = k as f64 / per_side as f64;
                pts.push((x0 + t * (x1 - x0), y0));
                pts.push((x0 + t * (x1 - x0), y1));
                pts.push((x0, y0 + t * (y1 - y0)));
                pts.push((x1, y0 + t * (y1 - y0)));
            }
            for i in 0..=m {
                for j in 0..=m {
                    pts.push((
                        x0 + (x1 - x0) * i as f64 / m as f64,
                        y0 + (y1 - y0) * j as f64 / m as f64,
                    ));
                }
            }
        }
        Region::Disk { center, radius } => {
            let (cx, cy, r) = (exact::to_f64(&center.re), exact::to_f64(&center.im), exact::to_f64(radius));
            for k in 0..n {
                let th = std::f64::consts::TAU * k as f64 / n as f64;
                pts.push((cx + r * th.cos(), cy + r * th.sin()));
            }
            for i in 0..=m {
                for j in 0..=m {
                    let x = -r + 2.0 * r * i as f64 / m as f64;
                    let y = -r + 2.0 * r * j as f64 / m as f64;
                    if x * x + y * y <= r * r {
                        pts.push((cx + x, cy + y));
                    }
                }
            }
        }
    }
    pts.into_iter().map(|(x, y)| f(x, y)).fold(0.0, f64::max)
}

/// Sup of `|p(z) - target(z - shift)|` on a dense oracle grid.
pub fn oracle_error(
    p: &ComplexPolynomial,
    target: &ComplexPolynomial,
    shift: (f64, f64),
    region: &Region,
    n: usize,
    m: usize,
) -> f64 {
    grid_sup(region, n, m, |x, y| {
        let a = p.eval_f64(x, y);
        let b = target.eval_f64(x - shift.0, y - shift.1);
        (a - b).norm()
    })
}

pub fn c(re: f64, im: f64) -> Complex<f64> {
    Complex::new(re, im)
}

pub fn q(n: i64, d: i64) -> Rational {
    exact::ratio(n, d)
}

/// `m` pairwise disjoint closed unit cubes in `R^dim` with centers on a `1/8` lattice,
/// packed into a box of side about `m^(1/dim) + 2`, by rejection.
pub fn random_cubes(
    rng: &mut rand_chacha::ChaCha8Rng,
    dim: usize,
    m: usize,
) -> Vec<dense_orbits::polyconvex::UnitCube> {
    use dense_orbits::polyconvex::UnitCube;
    use rand::RngExt;
    let side = ((m as f64).powf(1.0 / dim as f64).ceil() as i64 + 2) * 8;
    let mut out: Vec<UnitCube> = Vec::new();
    let mut tries = 0;
    while out.len() < m && tries < 100_000 {
        tries += 1;
        let c = UnitCube::closed((0..dim).map(|_| exact::ratio(rng.random_range(0..side), 8)).collect());
        if out.iter().all(|o| !o.intersects(&c)) {
            out.push(c);
        }
    }
    out
}
