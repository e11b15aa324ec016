use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{self, Rational};
use crate::runge::ComplexPolynomial;

/// Where a split happens in the induction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    /// Between cells of one region (a grid cube, or a host box inside one).
    Local,
    /// Between the host boxes of one grid cube.
    Host,
    /// Between grid cubes, on the half-integer hyperplanes.
    Grid,
    /// Between products `K x L` by a one-variable polynomial.
    Factor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Separator {
    Hyperplane {
        axis: usize,
        #[serde(with = "exact::serde_rat")]
        c: Rational,
    },
    /// `|p| <= low_sup` on the low side and `|p - 1| <= high_sup` on the high side, as a
    /// function of one complex coordinate.
    Polynomial {
        coordinate: usize,
        poly: ComplexPolynomial,
        #[serde(with = "exact::serde_rat")]
        bound: Rational,
        low_sup: f64,
        high_sup: f64,
    },
}

impl Separator {
    /// The real axis of a hyperplane, or the complex coordinate of a polynomial.
    pub fn axis(&self) -> usize {
        match self {
            Separator::Hyperplane { axis, .. } => *axis,
            Separator::Polynomial { coordinate, .. } => *coordinate,
        }
    }
}

/// Joins nodes `low` and `high` into the next node. Nodes `0..leaves` are the leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitStep {
    pub scope: Scope,
    /// Grid cube of Local and Host steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<i64>>,
    /// Host box index of Local steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub host: Option<Vec<i64>>,
    pub separator: Separator,
    pub low: usize,
    pub high: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationCertificate {
    pub leaves: usize,
    pub steps: Vec<SplitStep>,
}

impl SeparationCertificate {
    /// Leaf sets of every node, checking that each node is consumed at most once and
    /// that the steps end in a single root holding every leaf.
    pub fn node_leaves(&self) -> Result<Vec<Vec<usize>>> {
        if self.leaves == 0 {
            return Err(Error::Certificate("no leaves".into()));
        }
        let mut nodes: Vec<Vec<usize>> = (0..self.leaves).map(|i| vec![i]).collect();
        let mut used = vec![false; self.leaves + self.steps.len()];
        for (s, step) in self.steps.iter().enumerate() {
            let here = self.leaves + s;
            for id in [step.low, step.high] {
                if id >= here {
                    return Err(Error::Certificate(format!("step {s} refers to node {id} before it exists")));
                }
                if used[id] {
                    return Err(Error::Certificate(format!("step {s} reuses node {id}")));
                }
                used[id] = true;
            }
            if step.low == step.high {
                return Err(Error::Certificate(format!("step {s} joins a node with itself")));
            }
            let mut joined = nodes[step.low].clone();
            joined.extend_from_slice(&nodes[step.high]);
            nodes.push(joined);
        }
        let roots = used.iter().filter(|u| !**u).count();
        if roots != 1 {
            return Err(Error::Certificate(format!("{roots} unjoined nodes remain")));
        }
        Ok(nodes)
    }
}

/// Appends steps merging `items` (key, node) axis by axis: pass `k` joins, in increasing
/// order of key component `k`, items agreeing on the components after `k`. Returns the
/// root node.
pub(crate) fn sweep(
    items: Vec<(Vec<i64>, usize)>,
    next_node: &mut usize,
    steps: &mut Vec<SplitStep>,
    mut make: impl FnMut(usize, i64) -> (Scope, Separator),
    grid: Option<&[i64]>,
    host: Option<&[i64]>,
) -> Option<usize> {
    let dim = items.first()?.0.len();
    let mut current = items;
    for axis in 0..dim {
        let mut groups: BTreeMap<Vec<i64>, Vec<(i64, usize)>> = BTreeMap::new();
        for (key, node) in current {
            groups.entry(key[1..].to_vec()).or_default().push((key[0], node));
        }
        current = Vec::new();
        for (rest, mut list) in groups {
            list.sort();
            let (mut last, mut acc) = list[0];
            for &(coord, node) in &list[1..] {
                let (scope, separator) = make(axis, last);
                steps.push(SplitStep {
                    scope,
                    grid: grid.map(<[i64]>::to_vec),
                    host: host.map(<[i64]>::to_vec),
                    separator,
                    low: acc,
                    high: node,
                });
                acc = *next_node;
                *next_node += 1;
                last = coord;
            }
            current.push((rest, acc));
        }
    }
    debug_assert_eq!(current.len(), 1);
    current.first().map(|(_, n)| *n)
}

/// Outcome of re-verifying a certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub passed: bool,
    pub checks: usize,
    pub first_violation: Option<String>,
}

pub(crate) struct Checker {
    pub checks: usize,
    pub violation: Option<String>,
}

impl Checker {
    pub fn new() -> Self {
        Self {
            checks: 0,
            violation: None,
        }
    }

    pub fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok && self.violation.is_none() {
            self.violation = Some(what());
        }
    }

    pub fn report(self) -> ReplayReport {
        ReplayReport {
            passed: self.violation.is_none(),
            checks: self.checks,
            first_violation: self.violation,
        }
    }
}
