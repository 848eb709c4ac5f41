//! Satisfiability, unsatisfiable cores and semantic equivalence for LTL.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ltl::{Formula, LassoTrace};

mod tableau;

pub use tableau::{Checker, SatResult, DEFAULT_STATE_CAP};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("tableau exceeded {cap} states; formula too large to decide")]
    ResourceLimit { cap: usize },
    #[error("internal error: extracted model does not satisfy {0}")]
    ModelRejected(String),
    #[error("duplicate requirement id `{0}`")]
    DuplicateId(String),
    #[error("cannot join an empty requirement list")]
    EmptyJoin,
    #[error("core minimization requires an unsatisfiable input")]
    NotUnsat,
}

/// A requirement formula tagged with its identifier and source text.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedFormula {
    pub id: String,
    #[serde(rename = "ltl", with = "crate::ltl::text_serde")]
    pub formula: Formula,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub origin: String,
}

impl NamedFormula {
    pub fn new(id: impl Into<String>, formula: Formula, origin: impl Into<String>) -> Self {
        NamedFormula {
            id: id.into(),
            formula,
            origin: origin.into(),
        }
    }
}

/// Verdict on a requirement set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum SatOutcome {
    Sat { model: LassoTrace },
    Unsat { core: Vec<String> },
}

impl SatOutcome {
    pub fn is_sat(&self) -> bool {
        matches!(self, SatOutcome::Sat { .. })
    }

    pub fn core(&self) -> Option<&[String]> {
        match self {
            SatOutcome::Unsat { core } => Some(core),
            SatOutcome::Sat { .. } => None,
        }
    }
}

/// Left fold of the members' formulas by conjunction, in list order.
pub fn join(reqs: &[NamedFormula]) -> Result<Formula, CheckError> {
    let mut it = reqs.iter().map(|r| r.formula.clone());
    let first = it.next().ok_or(CheckError::EmptyJoin)?;
    Ok(it.fold(first, Formula::and))
}

impl Checker {
    pub fn equivalent(&self, a: &Formula, b: &Formula) -> Result<bool, CheckError> {
        let a_not_b = Formula::and(a.clone(), Formula::not(b.clone()));
        if self.check_sat(&a_not_b)?.is_sat() {
            return Ok(false);
        }
        let b_not_a = Formula::and(b.clone(), Formula::not(a.clone()));
        Ok(!self.check_sat(&b_not_a)?.is_sat())
    }

    fn set_is_sat(&self, reqs: &[&NamedFormula]) -> Result<SatResult, CheckError> {
        let owned: Vec<NamedFormula> = reqs.iter().map(|r| (*r).clone()).collect();
        match join(&owned) {
            Ok(f) => self.check_sat(&f),
            Err(CheckError::EmptyJoin) => self.check_sat(&Formula::True),
            Err(e) => Err(e),
        }
    }

    /// Deletion-based minimal unsatisfiable subset, scanning in input order.
    pub fn minimize_core(&self, reqs: &[NamedFormula]) -> Result<Vec<String>, CheckError> {
        let mut kept: Vec<&NamedFormula> = reqs.iter().collect();
        if self.set_is_sat(&kept)?.is_sat() {
            return Err(CheckError::NotUnsat);
        }
        for r in reqs {
            let without: Vec<&NamedFormula> =
                kept.iter().copied().filter(|k| k.id != r.id).collect();
            if !self.set_is_sat(&without)?.is_sat() {
                kept = without;
            }
        }
        Ok(kept.into_iter().map(|r| r.id.clone()).collect())
    }

    pub fn check_set(&self, reqs: &[NamedFormula]) -> Result<SatOutcome, CheckError> {
        let mut ids = HashSet::new();
        for r in reqs {
            if !ids.insert(r.id.as_str()) {
                return Err(CheckError::DuplicateId(r.id.clone()));
            }
        }
        let all: Vec<&NamedFormula> = reqs.iter().collect();
        match self.set_is_sat(&all)? {
            SatResult::Sat(model) => Ok(SatOutcome::Sat { model }),
            SatResult::Unsat => Ok(SatOutcome::Unsat {
                core: self.minimize_core(reqs)?,
            }),
        }
    }
}

pub fn check_sat(f: &Formula) -> Result<SatResult, CheckError> {
    Checker::default().check_sat(f)
}

pub fn check_set(reqs: &[NamedFormula]) -> Result<SatOutcome, CheckError> {
    Checker::default().check_set(reqs)
}

pub fn minimize_core(reqs: &[NamedFormula]) -> Result<Vec<String>, CheckError> {
    Checker::default().minimize_core(reqs)
}

pub fn equivalent(a: &Formula, b: &Formula) -> Result<bool, CheckError> {
    Checker::default().equivalent(a, b)
}
