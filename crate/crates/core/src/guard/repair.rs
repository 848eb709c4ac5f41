use serde::{Deserialize, Serialize};

use super::SENTINEL;
use crate::backend::{Backend, BackendError, GenParams, Prompt, PromptPurpose};
use crate::ltl::{parse, Formula, ParseDiagnostic};

/// One model answer and, when it did not parse, why.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub text: String,
    pub diagnostic: Option<ParseDiagnostic>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RepairOutcome {
    Repaired {
        formula: Formula,
        text: String,
        rounds: usize,
        history: Vec<Attempt>,
    },
    NotLtl {
        history: Vec<Attempt>,
    },
    Failure {
        history: Vec<Attempt>,
    },
}

impl RepairOutcome {
    pub fn history(&self) -> &[Attempt] {
        match self {
            RepairOutcome::Repaired { history, .. }
            | RepairOutcome::NotLtl { history }
            | RepairOutcome::Failure { history } => history,
        }
    }
}

/// True for the refusal reply, with or without a final period.
pub fn is_sentinel(text: &str) -> bool {
    let t = text.trim();
    t.strip_suffix('.').unwrap_or(t).trim() == SENTINEL
}

/// Normalizes a raw model answer: drops code fences and an `LTL:` label;
/// several formula lines are read as their conjunction.
pub fn normalize_output(raw: &str) -> String {
    let lines: Vec<&str> = raw
        .lines()
        .map(str::trim)
        .filter(|l| !l.starts_with("```"))
        .map(|l| l.strip_prefix("LTL:").map(str::trim).unwrap_or(l))
        .filter(|l| !l.is_empty())
        .collect();
    match lines.as_slice() {
        [] => String::new(),
        [one] => one.to_string(),
        many => many
            .iter()
            .map(|l| format!("({l})"))
            .collect::<Vec<_>>()
            .join(" & "),
    }
}

pub fn parse_output(raw: &str) -> Result<(String, Formula), ParseDiagnostic> {
    let text = normalize_output(raw);
    let f = parse(&text)?;
    Ok((text, f))
}

/// The original prompt plus the rejected answer and its parse diagnostic.
pub fn repair_prompt(original: &Prompt, candidate: &str, diagnostic: &ParseDiagnostic) -> Prompt {
    let user = format!(
        "{}\n\nYour previous answer was not a valid LTL formula:\n{}\nParser error {}: expected {}, found {}.\nReply with the corrected LTL formula only.",
        original.user, candidate, diagnostic, diagnostic.expected, diagnostic.found
    );
    Prompt {
        system: original.system.clone(),
        user,
        requirements: original.requirements.clone(),
        meta: crate::backend::PromptMeta {
            purpose: PromptPurpose::Repair,
            ..original.meta.clone()
        },
    }
}

/// Feeds parse errors back to the backend until an answer parses or
/// `max_rounds` re-queries have been spent.
pub fn repair_loop<B: Backend + ?Sized>(
    backend: &B,
    prompt: &Prompt,
    candidate: &str,
    max_rounds: usize,
    params: &GenParams,
) -> Result<RepairOutcome, BackendError> {
    let mut history = Vec::new();
    let mut current = candidate.to_string();
    let mut round = 0;
    loop {
        if is_sentinel(&current) {
            history.push(Attempt {
                text: current,
                diagnostic: None,
            });
            return Ok(RepairOutcome::NotLtl { history });
        }
        match parse_output(&current) {
            Ok((text, formula)) => {
                history.push(Attempt {
                    text: current,
                    diagnostic: None,
                });
                return Ok(RepairOutcome::Repaired {
                    formula,
                    text,
                    rounds: round,
                    history,
                });
            }
            Err(d) => {
                history.push(Attempt {
                    text: current.clone(),
                    diagnostic: Some(d.clone()),
                });
                if round == max_rounds {
                    return Ok(RepairOutcome::Failure { history });
                }
                round += 1;
                current = backend.complete(&repair_prompt(prompt, &current, &d), params)?;
            }
        }
    }
}
