//! Accuracy and robustness metrics over labeled datasets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consistency::Checker;
use crate::guard::normalize_output;
use crate::ltl::{atoms, canonical_template, parse, print, substitute, Formula};
use crate::pipeline::{Pipeline, PipelineConfig, Requirement, REPORT_VERSION};

pub const DEMO_DATASET: &str = include_str!("../../assets/demo_dataset.jsonl");

/// Atom names scored as one proposition.
pub const SYNONYMS: &[(&str, &str)] = &[
    ("granted", "grant"),
    ("grants", "grant"),
    ("delivered", "deliver"),
    ("delivers", "deliver"),
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{results} results for {gold} gold entries")]
    LengthMismatch { results: usize, gold: usize },
    #[error("{0}")]
    Io(String),
}

/// One labeled requirement. `gold[0]` is the expert label, the rest are
/// acceptable readings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldEntry {
    pub nl: String,
    pub gold: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

impl GoldEntry {
    pub fn validate(&self) -> Result<(), String> {
        if self.nl.trim().is_empty() {
            return Err("empty `nl`".into());
        }
        if self.gold.is_empty() {
            return Err("`gold` is empty".into());
        }
        for g in &self.gold {
            parse(g).map_err(|d| format!("gold `{g}` does not parse: {d}"))?;
        }
        Ok(())
    }

    pub fn formulas(&self) -> Vec<Formula> {
        self.gold.iter().filter_map(|g| parse(g).ok()).collect()
    }
}

pub fn load_dataset(text: &str) -> Result<Vec<GoldEntry>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 1;
        let entry: GoldEntry = serde_json::from_str(line).map_err(|e| EvalError::Line {
            line: line_no,
            message: e.to_string(),
        })?;
        entry.validate().map_err(|message| EvalError::Line {
            line: line_no,
            message,
        })?;
        out.push(entry);
    }
    if out.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    Ok(out)
}

pub fn load_dataset_file(path: &Path) -> Result<Vec<GoldEntry>, EvalError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    load_dataset(&text)
}

pub fn demo_dataset() -> Vec<GoldEntry> {
    load_dataset(DEMO_DATASET).expect("shipped dataset is valid")
}

/// `m / n` as a percentage cut to one decimal; 0.0 when `n` is 0.
pub fn percent(m: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (m * 1000 / n) as f64 / 10.0
}

/// Percentage of outputs that are formulas.
pub fn score_syntactic(outputs: &[Option<Formula>]) -> f64 {
    percent(
        outputs.iter().filter(|o| o.is_some()).count(),
        outputs.len(),
    )
}

/// Maps synonymous atom names to one spelling.
pub fn normalize_synonyms(f: &Formula) -> Formula {
    substitute(f, &|name| {
        SYNONYMS
            .iter()
            .find(|(from, _)| *from == name)
            .map(|(_, to)| to.to_string())
            .unwrap_or_else(|| name.to_string())
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    S1,
    S2,
}

/// Equivalence after aligning atoms: by name when both sides use the same
/// atoms, otherwise through their canonical templates. `None` when the
/// checker gave up.
pub fn aligned_equivalent(checker: &Checker, result: &Formula, gold: &Formula) -> Option<bool> {
    let r = normalize_synonyms(result);
    let g = normalize_synonyms(gold);
    let ra: BTreeSet<String> = atoms(&r).into_iter().collect();
    let ga: BTreeSet<String> = atoms(&g).into_iter().collect();
    if ra == ga {
        return checker.equivalent(&r, &g).ok();
    }
    let (tr, _) = canonical_template(&r);
    let (tg, _) = canonical_template(&g);
    if tr == tg {
        return Some(true);
    }
    checker.equivalent(&tr, &tg).ok()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemanticScore {
    pub pct: f64,
    pub correct: Vec<bool>,
    /// Items where the checker hit its resource limit; scored incorrect.
    pub undecided: Vec<usize>,
}

pub fn score_semantic(
    outputs: &[Option<Formula>],
    gold: &[GoldEntry],
    mode: Mode,
) -> Result<SemanticScore, EvalError> {
    score_semantic_with(&Checker::default(), outputs, gold, mode)
}

pub fn score_semantic_with(
    checker: &Checker,
    outputs: &[Option<Formula>],
    gold: &[GoldEntry],
    mode: Mode,
) -> Result<SemanticScore, EvalError> {
    if outputs.len() != gold.len() {
        return Err(EvalError::LengthMismatch {
            results: outputs.len(),
            gold: gold.len(),
        });
    }
    let mut correct = Vec::with_capacity(outputs.len());
    let mut undecided = Vec::new();
    for (i, (out, entry)) in outputs.iter().zip(gold).enumerate() {
        let Some(f) = out else {
            correct.push(false);
            continue;
        };
        let accepted = entry.formulas();
        let candidates = match mode {
            Mode::S1 => &accepted[..accepted.len().min(1)],
            Mode::S2 => &accepted[..],
        };
        let mut ok = false;
        let mut gave_up = false;
        for g in candidates {
            match aligned_equivalent(checker, f, g) {
                Some(true) => {
                    ok = true;
                    break;
                }
                Some(false) => {}
                None => gave_up = true,
            }
        }
        if !ok && gave_up {
            undecided.push(i);
        }
        correct.push(ok);
    }
    let m = correct.iter().filter(|c| **c).count();
    Ok(SemanticScore {
        pct: percent(m, correct.len()),
        correct,
        undecided,
    })
}

/// A robustness score `m/n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fraction {
    pub m: usize,
    pub n: usize,
}

impl Fraction {
    pub fn value(self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.m as f64 / self.n as f64
        }
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.m, self.n)
    }
}

fn largest_class(outputs: &[Option<Formula>], key: impl Fn(&Formula) -> Formula) -> Fraction {
    let mut counts: BTreeMap<Formula, usize> = BTreeMap::new();
    for f in outputs.iter().flatten() {
        *counts.entry(key(&normalize_synonyms(f))).or_default() += 1;
    }
    Fraction {
        m: counts.values().copied().max().unwrap_or(0),
        n: outputs.len(),
    }
}

/// Atom renaming robustness: the largest group of outputs sharing one
/// template. Failed translations (`None`) only count toward `n`.
pub fn arr_score(outputs: &[Option<Formula>]) -> Fraction {
    largest_class(outputs, |f| canonical_template(f).0)
}

/// Rephrasing robustness: the largest group of identical outputs.
pub fn rr_score(outputs: &[Option<Formula>]) -> Fraction {
    largest_class(outputs, Formula::clone)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemRow {
    pub nl: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_ltl: Option<String>,
    pub syn: bool,
    pub s1: bool,
    pub s2: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub undecided: bool,
    /// The answer had several formula lines, scored as their conjunction.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub multi_formula: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupScore {
    pub group: String,
    pub arr: String,
    pub arr_value: f64,
    pub rr: String,
    pub rr_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub version: String,
    pub config: PipelineConfig,
    pub syn_pct: f64,
    pub sem_s1_pct: f64,
    pub sem_s2_pct: f64,
    pub items: Vec<ItemRow>,
    pub groups: Vec<GroupScore>,
    pub undecided: Vec<usize>,
}

fn is_multi_formula(raw: &str) -> bool {
    raw.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with("```"))
        .count()
        > 1
}

/// Scores already-produced outputs against `dataset`.
pub fn build_report(
    config: PipelineConfig,
    dataset: &[GoldEntry],
    outputs: &[Option<Formula>],
    raw: &[Option<String>],
) -> Result<EvalReport, EvalError> {
    if dataset.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let checker = Checker::default();
    let s1 = score_semantic_with(&checker, outputs, dataset, Mode::S1)?;
    let s2 = score_semantic_with(&checker, outputs, dataset, Mode::S2)?;
    let mut undecided: Vec<usize> = s1.undecided.iter().chain(&s2.undecided).copied().collect();
    undecided.sort_unstable();
    undecided.dedup();

    let items = dataset
        .iter()
        .enumerate()
        .map(|(i, e)| ItemRow {
            nl: e.nl.clone(),
            output_ltl: outputs[i].as_ref().map(print),
            syn: outputs[i].is_some(),
            s1: s1.correct[i],
            s2: s2.correct[i],
            group: e.group.clone(),
            undecided: undecided.contains(&i),
            multi_formula: raw
                .get(i)
                .and_then(|r| r.as_deref())
                .is_some_and(is_multi_formula),
        })
        .collect();

    let mut order: Vec<&str> = Vec::new();
    for e in dataset {
        if let Some(g) = e.group.as_deref() {
            if !order.contains(&g) {
                order.push(g);
            }
        }
    }
    let groups = order
        .into_iter()
        .map(|g| {
            let members: Vec<Option<Formula>> = dataset
                .iter()
                .zip(outputs)
                .filter(|(e, _)| e.group.as_deref() == Some(g))
                .map(|(_, o)| o.clone())
                .collect();
            let arr = arr_score(&members);
            let rr = rr_score(&members);
            GroupScore {
                group: g.to_string(),
                arr: arr.to_string(),
                arr_value: arr.value(),
                rr: rr.to_string(),
                rr_value: rr.value(),
            }
        })
        .collect();

    Ok(EvalReport {
        version: REPORT_VERSION.to_string(),
        config,
        syn_pct: score_syntactic(outputs),
        sem_s1_pct: s1.pct,
        sem_s2_pct: s2.pct,
        items,
        groups,
        undecided,
    })
}

/// Translates every entry with `pipeline` and scores the outputs.
pub fn run_eval(dataset: &[GoldEntry], pipeline: &Pipeline) -> Result<EvalReport, EvalError> {
    if dataset.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let mut outputs = Vec::with_capacity(dataset.len());
    let mut raw = Vec::with_capacity(dataset.len());
    for (i, e) in dataset.iter().enumerate() {
        let r = pipeline.translate_one(&Requirement {
            id: format!("E{}", i + 1),
            text: e.nl.clone(),
        });
        outputs.push(r.formula_text().and_then(|t| parse(t).ok()));
        raw.push(r.raw.clone());
    }
    build_report(pipeline.config().clone(), dataset, &outputs, &raw)
}

/// Conjunction of the lines of a multi-line answer, as the pipeline reads it.
pub fn read_answer(raw: &str) -> Option<Formula> {
    parse(&normalize_output(raw)).ok()
}
