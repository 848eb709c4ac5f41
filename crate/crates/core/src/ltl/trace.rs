use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::formula::{is_valid_atom_name, Formula};
use super::LtlError;

/// Atoms true at one step.
pub type Valuation = BTreeSet<String>;

/// The ultimately periodic trace `prefix · loop^ω`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LassoTrace {
    prefix: Vec<Valuation>,
    #[serde(rename = "loop")]
    cycle: Vec<Valuation>,
}

impl LassoTrace {
    pub fn new(prefix: Vec<Valuation>, cycle: Vec<Valuation>) -> Result<Self, LtlError> {
        if cycle.is_empty() {
            return Err(LtlError::EmptyLoop);
        }
        for name in prefix.iter().chain(cycle.iter()).flatten() {
            if !is_valid_atom_name(name) {
                return Err(LtlError::InvalidAtom(name.clone()));
            }
        }
        Ok(LassoTrace { prefix, cycle })
    }

    /// Builds a trace from slices of atom names; panics on invalid input.
    pub fn from_names(prefix: &[&[&str]], cycle: &[&[&str]]) -> Self {
        let conv = |steps: &[&[&str]]| -> Vec<Valuation> {
            steps
                .iter()
                .map(|s| s.iter().map(|a| a.to_string()).collect())
                .collect()
        };
        LassoTrace::new(conv(prefix), conv(cycle)).expect("valid lasso")
    }

    pub fn prefix(&self) -> &[Valuation] {
        &self.prefix
    }

    pub fn cycle(&self) -> &[Valuation] {
        &self.cycle
    }

    /// Number of distinct positions, `|prefix| + |loop|`.
    pub fn len(&self) -> usize {
        self.prefix.len() + self.cycle.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn at(&self, i: usize) -> &Valuation {
        if i < self.prefix.len() {
            &self.prefix[i]
        } else {
            &self.cycle[i - self.prefix.len()]
        }
    }

    fn successor(&self, i: usize) -> usize {
        if i + 1 < self.len() {
            i + 1
        } else {
            self.prefix.len()
        }
    }
}

/// Decides whether the infinite trace satisfies `f` at position 0.
pub fn evaluate_trace(f: &Formula, trace: &LassoTrace) -> bool {
    values(f, trace)[0]
}

/// Truth value of `f` at each of the `|prefix| + |loop|` positions.
fn values(f: &Formula, t: &LassoTrace) -> Vec<bool> {
    let n = t.len();
    match f {
        Formula::True => vec![true; n],
        Formula::False => vec![false; n],
        Formula::Atom(name) => (0..n).map(|i| t.at(i).contains(name)).collect(),
        Formula::Not(a) => values(a, t).into_iter().map(|v| !v).collect(),
        Formula::And(a, b) => zip(values(a, t), values(b, t), |x, y| x && y),
        Formula::Or(a, b) => zip(values(a, t), values(b, t), |x, y| x || y),
        Formula::Implies(a, b) => zip(values(a, t), values(b, t), |x, y| !x || y),
        Formula::Iff(a, b) => zip(values(a, t), values(b, t), |x, y| x == y),
        Formula::Next(a) => {
            let a = values(a, t);
            (0..n).map(|i| a[t.successor(i)]).collect()
        }
        Formula::Until(a, b) => least_fixpoint(t, &values(a, t), &values(b, t)),
        Formula::Release(a, b) => greatest_fixpoint(t, &values(a, t), &values(b, t)),
        Formula::Eventually(a) => least_fixpoint(t, &vec![true; n], &values(a, t)),
        Formula::Always(a) => greatest_fixpoint(t, &vec![false; n], &values(a, t)),
    }
}

fn zip(a: Vec<bool>, b: Vec<bool>, op: impl Fn(bool, bool) -> bool) -> Vec<bool> {
    a.into_iter().zip(b).map(|(x, y)| op(x, y)).collect()
}

/// `hold U goal`: smallest solution of `v[i] = goal[i] | (hold[i] & v[succ i])`.
fn least_fixpoint(t: &LassoTrace, hold: &[bool], goal: &[bool]) -> Vec<bool> {
    let mut v = vec![false; t.len()];
    loop {
        let mut changed = false;
        for i in (0..t.len()).rev() {
            let next = goal[i] || (hold[i] && v[t.successor(i)]);
            if next != v[i] {
                v[i] = next;
                changed = true;
            }
        }
        if !changed {
            return v;
        }
    }
}

/// `release R inv`: largest solution of `v[i] = inv[i] & (release[i] | v[succ i])`.
fn greatest_fixpoint(t: &LassoTrace, release: &[bool], inv: &[bool]) -> Vec<bool> {
    let mut v = vec![true; t.len()];
    loop {
        let mut changed = false;
        for i in (0..t.len()).rev() {
            let next = inv[i] && (release[i] || v[t.successor(i)]);
            if next != v[i] {
                v[i] = next;
                changed = true;
            }
        }
        if !changed {
            return v;
        }
    }
}
