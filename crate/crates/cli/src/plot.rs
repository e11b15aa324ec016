//! SVG rendering of a decomposition, projected onto two coordinate axes.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use dense_orbits::exact::{self, Rational};
use dense_orbits::polyconvex::{grid_cube, grid_incidence, DecompositionResult, RBox};

use crate::error::{CliError, CliResult};

const PX: f64 = 120.0;

/// Distinct projected rectangles per layer.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PlotCounts {
    pub cubes: usize,
    pub grid: usize,
    pub strips: usize,
    pub leaves: usize,
    pub retained: usize,
}

type Rect = [Rational; 4];

/// `[x_lo, x_hi, y_lo, y_hi]` of `b` on the axes `(i, j)`.
pub fn project(b: &RBox, (i, j): (usize, usize)) -> Rect {
    [b.lo[i].clone(), b.hi[i].clone(), b.lo[j].clone(), b.hi[j].clone()]
}

fn layer(boxes: impl IntoIterator<Item = RBox>, axes: (usize, usize)) -> Vec<Rect> {
    let set: BTreeSet<Rect> = boxes.into_iter().map(|b| project(&b, axes)).collect();
    set.into_iter().collect()
}

/// Checks the zero-based projection axes for a result of dimension `dim`; `None` is only
/// allowed in the plane.
pub fn resolve_axes(dim: usize, axes: Option<(usize, usize)>) -> CliResult<(usize, usize)> {
    let (i, j) = match axes {
        Some(a) => a,
        None if dim == 2 => (0, 1),
        None => return Err(CliError::Config(format!("a {dim}-dimensional result needs two projection axes"))),
    };
    if i == j || i >= dim || j >= dim {
        return Err(CliError::Config(format!("projection axes ({}, {}) are invalid in dimension {dim}", i + 1, j + 1)));
    }
    Ok((i, j))
}

/// Renders `result` as an SVG document on the zero-based axes `axes`.
pub fn render(result: &DecompositionResult, axes: Option<(usize, usize)>) -> CliResult<(String, PlotCounts)> {
    if result.cubes.is_empty() || result.boxes.is_empty() {
        return Err(CliError::Config("the decomposition is empty".into()));
    }
    let dim = result.cubes[0].dim();
    let axes = resolve_axes(dim, axes)?;
    let incidence = grid_incidence(&result.cubes)?;
    let cubes = layer(result.cubes.iter().map(|c| c.closure()), axes);
    let grid = layer(incidence.keys().map(|g| grid_cube(g)), axes);
    let leaves = layer(result.boxes.iter().map(|l| l.rbox.clone()), axes);
    let retained = layer(
        result.retained.iter().map(|r| r.inset.clone().unwrap_or_else(|| r.subcube.clone())),
        axes,
    );

    let mut window = grid[0].clone();
    for r in cubes.iter().chain(&grid) {
        window[0] = exact::min_rat(&window[0], &r[0]).clone();
        window[1] = exact::max_rat(&window[1], &r[1]).clone();
        window[2] = exact::min_rat(&window[2], &r[2]).clone();
        window[3] = exact::max_rat(&window[3], &r[3]).clone();
    }
    let strip_set: BTreeSet<Rect> = result
        .strips
        .iter()
        .filter(|s| s.axis == axes.0 || s.axis == axes.1)
        .map(|s| {
            let (lo, hi) = (&s.center - &s.half_width, &s.center + &s.half_width);
            let span = match &s.cell {
                Some(c) => project(c, axes),
                None => window.clone(),
            };
            if s.axis == axes.0 {
                [lo, hi, span[2].clone(), span[3].clone()]
            } else {
                [span[0].clone(), span[1].clone(), lo, hi]
            }
        })
        .collect();
    let strips: Vec<Rect> = strip_set.into_iter().collect();

    let pad = exact::ratio(1, 4);
    let x0 = exact::to_f64(&(&window[0] - &pad));
    let y1 = exact::to_f64(&(&window[3] + &pad));
    let width = exact::to_f64(&(&window[1] - &window[0] + &pad * exact::int(2))) * PX;
    let height = exact::to_f64(&(&window[3] - &window[2] + &pad * exact::int(2))) * PX;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.2}\" height=\"{height:.2}\" viewBox=\"0 0 {width:.2} {height:.2}\">"
    );
    let _ = writeln!(svg, "<title>axes {} and {}</title>", axes.0 + 1, axes.1 + 1);
    let _ = writeln!(svg, "<rect class=\"background\" x=\"0\" y=\"0\" width=\"{width:.2}\" height=\"{height:.2}\" fill=\"white\"/>");
    let layers: [(&str, &str, &[Rect]); 5] = [
        ("grid", "fill=\"none\" stroke=\"#999999\" stroke-dasharray=\"4 3\" stroke-width=\"1\"", &grid),
        ("cube", "fill=\"#f2e6c9\" fill-opacity=\"0.6\" stroke=\"#8a6d2f\" stroke-width=\"1.5\"", &cubes),
        ("leaf", "fill=\"#4f81bd\" fill-opacity=\"0.45\" stroke=\"#1f4e79\" stroke-width=\"0.5\"", &leaves),
        ("retained", "fill=\"none\" stroke=\"#2e8b57\" stroke-width=\"1\"", &retained),
        ("strip", "fill=\"black\" fill-opacity=\"0.85\"", &strips),
    ];
    for (class, style, rects) in layers {
        let _ = writeln!(svg, "<g class=\"{class}s\" {style}>");
        for r in rects {
            let [a, b, c, d] = r.each_ref().map(exact::to_f64);
            let _ = writeln!(
                svg,
                "<rect class=\"{class}\" x=\"{:.3}\" y=\"{:.3}\" width=\"{:.3}\" height=\"{:.3}\"/>",
                (a - x0) * PX,
                (y1 - d) * PX,
                (b - a) * PX,
                (d - c) * PX
            );
        }
        let _ = writeln!(svg, "</g>");
    }
    svg.push_str("</svg>\n");
    let counts = PlotCounts {
        cubes: cubes.len(),
        grid: grid.len(),
        strips: strips.len(),
        leaves: leaves.len(),
        retained: retained.len(),
    };
    Ok((svg, counts))
}

/// Number of `<rect class="{class}"` elements in an SVG document.
pub fn count_class(svg: &str, class: &str) -> usize {
    svg.matches(&format!("<rect class=\"{class}\"")).count()
}
