use num_complex::Complex;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::exact::{self, ComplexRational, Rational};

type Cdd = Complex<TwoFloat>;

/// A closed axis-parallel rectangle or closed disk in the complex plane.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Region {
    Rect {
        #[serde(with = "exact::serde_rat")]
        re_lo: Rational,
        #[serde(with = "exact::serde_rat")]
        re_hi: Rational,
        #[serde(with = "exact::serde_rat")]
        im_lo: Rational,
        #[serde(with = "exact::serde_rat")]
        im_hi: Rational,
    },
    Disk {
        #[serde(with = "exact::serde_complex_rat")]
        center: ComplexRational,
        #[serde(with = "exact::serde_rat")]
        radius: Rational,
    },
}

fn sq(x: &Rational) -> Rational {
    x * x
}

/// Distance along one axis between `[a0, a1]` and `[b0, b1]`; zero when they meet.
fn axis_gap(a0: &Rational, a1: &Rational, b0: &Rational, b1: &Rational) -> Rational {
    let g1 = b0 - a1;
    let g2 = a0 - b1;
    let g = if g1 > g2 { g1 } else { g2 };
    if g.is_positive() {
        g
    } else {
        Rational::zero()
    }
}

fn clamp(x: &Rational, lo: &Rational, hi: &Rational) -> Rational {
    exact::min_rat(exact::max_rat(x, lo), hi).clone()
}

impl Region {
    pub fn rect(re_lo: Rational, re_hi: Rational, im_lo: Rational, im_hi: Rational) -> Result<Self> {
        if re_lo > re_hi || im_lo > im_hi {
            return Err(Error::Parameter("rectangle with reversed bounds".into()));
        }
        Ok(Region::Rect {
            re_lo,
            re_hi,
            im_lo,
            im_hi,
        })
    }

    /// The closed square with the given centre and half side.
    pub fn square(center: &ComplexRational, half: &Rational) -> Result<Self> {
        if half.is_negative() {
            return Err(Error::Parameter("negative half side".into()));
        }
        Self::rect(
            &center.re - half,
            &center.re + half,
            &center.im - half,
            &center.im + half,
        )
    }

    pub fn disk(center: ComplexRational, radius: Rational) -> Result<Self> {
        if !radius.is_positive() {
            return Err(Error::Parameter("disk radius must be positive".into()));
        }
        Ok(Region::Disk { center, radius })
    }

    /// `(re_lo, re_hi, im_lo, im_hi)` of the bounding box.
    pub fn bbox(&self) -> (Rational, Rational, Rational, Rational) {
        match self {
            Region::Rect {
                re_lo,
                re_hi,
                im_lo,
                im_hi,
            } => (re_lo.clone(), re_hi.clone(), im_lo.clone(), im_hi.clone()),
            Region::Disk { center, radius } => (
                &center.re - radius,
                &center.re + radius,
                &center.im - radius,
                &center.im + radius,
            ),
        }
    }

    pub fn translated(&self, w: &ComplexRational) -> Self {
        match self {
            Region::Rect {
                re_lo,
                re_hi,
                im_lo,
                im_hi,
            } => Region::Rect {
                re_lo: re_lo + &w.re,
                re_hi: re_hi + &w.re,
                im_lo: im_lo + &w.im,
                im_hi: im_hi + &w.im,
            },
            Region::Disk { center, radius } => Region::Disk {
                center: center + w,
                radius: radius.clone(),
            },
        }
    }

    /// Squared Euclidean distance between the two closed sets, when it is exactly rational.
    fn distance_sq_exact(&self, other: &Region) -> Option<Rational> {
        match (self, other) {
            (Region::Rect { .. }, Region::Rect { .. }) => {
                let (a0, a1, a2, a3) = self.bbox();
                let (b0, b1, b2, b3) = other.bbox();
                Some(sq(&axis_gap(&a0, &a1, &b0, &b1)) + sq(&axis_gap(&a2, &a3, &b2, &b3)))
            }
            _ => None,
        }
    }

    /// Whether the two closed regions are at positive distance (exact).
    pub fn separated_from(&self, other: &Region) -> bool {
        if let Some(d2) = self.distance_sq_exact(other) {
            return d2.is_positive();
        }
        match (self, other) {
            (Region::Disk { center: c1, radius: r1 }, Region::Disk { center: c2, radius: r2 }) => {
                let d2 = sq(&(&c1.re - &c2.re)) + sq(&(&c1.im - &c2.im));
                d2 > sq(&(r1 + r2))
            }
            (Region::Disk { center, radius }, rect) | (rect, Region::Disk { center, radius }) => {
                let (x0, x1, y0, y1) = rect.bbox();
                let px = clamp(&center.re, &x0, &x1);
                let py = clamp(&center.im, &y0, &y1);
                sq(&(&center.re - px)) + sq(&(&center.im - py)) > sq(radius)
            }
            _ => unreachable!("rectangle pairs handled above"),
        }
    }

    /// Whether an exact point lies in the closed region.
    pub fn contains(&self, z: &ComplexRational) -> bool {
        match self {
            Region::Rect {
                re_lo,
                re_hi,
                im_lo,
                im_hi,
            } => &z.re >= re_lo && &z.re <= re_hi && &z.im >= im_lo && &z.im <= im_hi,
            Region::Disk { center, radius } => {
                sq(&(&z.re - &center.re)) + sq(&(&z.im - &center.im)) <= sq(radius)
            }
        }
    }

    /// Corner points of a rectangle; `None` for a disk.
    pub fn corners(&self) -> Option<[ComplexRational; 4]> {
        match self {
            Region::Rect {
                re_lo,
                re_hi,
                im_lo,
                im_hi,
            } => Some([
                Complex::new(re_lo.clone(), im_lo.clone()),
                Complex::new(re_hi.clone(), im_lo.clone()),
                Complex::new(re_hi.clone(), im_hi.clone()),
                Complex::new(re_lo.clone(), im_hi.clone()),
            ]),
            Region::Disk { .. } => None,
        }
    }

    /// `count` boundary points at uniform arclength, starting `phase` steps past the
    /// reference point (lower-left corner, or angle zero for disks).
    pub fn boundary_points(&self, count: usize, phase: f64) -> Vec<Cdd> {
        match self {
            Region::Rect {
                re_lo,
                re_hi,
                im_lo,
                im_hi,
            } => {
                let x0 = exact::to_dd(re_lo);
                let y0 = exact::to_dd(im_lo);
                let w = exact::to_dd(&(re_hi - re_lo));
                let h = exact::to_dd(&(im_hi - im_lo));
                let perimeter = exact::to_dd(&(Rational::from_integer(2.into()) * (re_hi - re_lo + (im_hi - im_lo))));
                let step = perimeter * exact::to_dd(&exact::ratio(1, count as i64));
                (0..count)
                    .map(|k| {
                        let s = step * TwoFloat::from(k as f64 + phase);
                        if s <= w {
                            Complex::new(x0 + s, y0)
                        } else if s <= w + h {
                            Complex::new(x0 + w, y0 + (s - w))
                        } else if s <= w + w + h {
                            Complex::new(x0 + w - (s - w - h), y0 + h)
                        } else {
                            Complex::new(x0, y0 + h - (s - w - w - h))
                        }
                    })
                    .collect()
            }
            Region::Disk { center, radius } => {
                let c = exact::complex_to_dd(center);
                let r = exact::to_dd(radius);
                (0..count)
                    .map(|k| {
                        let theta = std::f64::consts::TAU * (k as f64 + phase) / count as f64;
                        c + Complex::new(TwoFloat::from(theta.cos()), TwoFloat::from(theta.sin()))
                            .scale(r)
                    })
                    .collect()
            }
        }
    }

    /// Points of an `n x n` grid over the bounding box at offsets `(i + phase) / n`,
    /// restricted to the region.
    pub fn interior_points(&self, n: usize, phase: f64) -> Vec<Cdd> {
        let (x0, x1, y0, y1) = self.bbox();
        let x0d = exact::to_dd(&x0);
        let y0d = exact::to_dd(&y0);
        let w = exact::to_dd(&(x1 - &x0));
        let h = exact::to_dd(&(y1 - &y0));
        let inv_n = exact::to_dd(&exact::ratio(1, n as i64));
        let disk = match self {
            Region::Disk { center, radius } => {
                let c = exact::complex_to_dd(center);
                let r = exact::to_dd(radius);
                Some((c, r * r))
            }
            Region::Rect { .. } => None,
        };
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            let fx = (TwoFloat::from(i as f64 + phase)) * inv_n;
            for j in 0..n {
                let fy = (TwoFloat::from(j as f64 + phase)) * inv_n;
                let p = Complex::new(x0d + w * fx, y0d + h * fy);
                if let Some((c, r2)) = disk {
                    if (p - c).norm_sqr() > r2 {
                        continue;
                    }
                }
                out.push(p);
            }
        }
        out
    }
}
