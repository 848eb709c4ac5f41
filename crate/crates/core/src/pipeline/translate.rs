use std::collections::{BTreeSet, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use super::{
    ConflictRound, ExampleSource, JointReport, Outcome, PipelineConfig, PipelineError, Requirement,
    RetranslatedMember, RetrievedExample, SetResult, Timing, TranslationResult, REPORT_VERSION,
};
use crate::backend::{
    Backend, BackendError, Capability, GenParams, NextToken, Prompt, PromptMeta, PromptPurpose,
};
use crate::consistency::{join, Checker, NamedFormula, SatOutcome};
use crate::guard::{
    build_mask_store, constrained_generate, is_sentinel, parse_output, repair_loop, Attempt,
    Generated, GuardError, MaskStore, RepairOutcome, DEFAULT_STATE_BUDGET, SENTINEL,
};
use crate::ltl::print;
use crate::rafsl::{assemble_prompt, LiftedPair, SYSTEM_PROMPT};

/// Counts calls going through to the wrapped backend.
struct Counted<'a> {
    inner: &'a dyn Backend,
    complete: AtomicUsize,
    step: AtomicUsize,
}

impl Backend for Counted<'_> {
    fn capability(&self) -> Capability {
        self.inner.capability()
    }

    fn complete(&self, prompt: &Prompt, params: &GenParams) -> Result<String, BackendError> {
        self.complete.fetch_add(1, Ordering::Relaxed);
        self.inner.complete(prompt, params)
    }

    fn next_token_distribution(
        &self,
        prompt: &Prompt,
        generated: &[u8],
    ) -> Result<Vec<(NextToken, f64)>, BackendError> {
        self.step.fetch_add(1, Ordering::Relaxed);
        self.inner.next_token_distribution(prompt, generated)
    }
}

/// One configured translation run over a backend and an optional example
/// source.
pub struct Pipeline<'a> {
    config: PipelineConfig,
    backend: Counted<'a>,
    examples: Option<&'a dyn ExampleSource>,
    masks: OnceLock<Option<Arc<MaskStore>>>,
    checker: Checker,
    retrievals: AtomicUsize,
    checks: AtomicUsize,
    record_wall_time: bool,
}

struct Generation {
    outcome: Outcome,
    strict: bool,
    repair_rounds: usize,
    raw: Option<String>,
}

impl<'a> Pipeline<'a> {
    pub fn new(
        config: PipelineConfig,
        backend: &'a dyn Backend,
        examples: Option<&'a dyn ExampleSource>,
    ) -> Result<Self, PipelineError> {
        if config.components.retrieval && examples.is_none() {
            return Err(PipelineError::MissingIndex);
        }
        if config.k == 0 {
            return Err(PipelineError::ZeroK);
        }
        Ok(Pipeline {
            config,
            backend: Counted {
                inner: backend,
                complete: AtomicUsize::new(0),
                step: AtomicUsize::new(0),
            },
            examples,
            masks: OnceLock::new(),
            checker: Checker::default(),
            retrievals: AtomicUsize::new(0),
            checks: AtomicUsize::new(0),
            record_wall_time: false,
        })
    }

    /// Uses an existing mask store instead of building one on first use.
    pub fn with_mask_store(self, store: Arc<MaskStore>) -> Self {
        let _ = self.masks.set(Some(store));
        self
    }

    /// Adds wall-clock time to the report; off by default so reports are
    /// reproducible byte for byte.
    pub fn with_wall_time(mut self, on: bool) -> Self {
        self.record_wall_time = on;
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    fn params(&self) -> GenParams {
        GenParams {
            max_tokens: self.config.max_tokens,
            temperature: self.config.temperature,
            seed: self.config.seed,
        }
    }

    fn mask_store(&self) -> Option<Arc<MaskStore>> {
        self.masks
            .get_or_init(|| {
                let cap = self.backend.capability();
                match (cap.step_wise, cap.vocabulary) {
                    (true, Some(v)) => Some(Arc::new(build_mask_store(v, DEFAULT_STATE_BUDGET))),
                    _ => None,
                }
            })
            .clone()
    }

    fn retrieve(&self, query: &str) -> Result<Vec<RetrievedExample>, String> {
        match (self.config.components.retrieval, self.examples) {
            (true, Some(src)) => {
                self.retrievals.fetch_add(1, Ordering::Relaxed);
                src.examples(query, self.config.k)
                    .map_err(|e| e.to_string())
            }
            _ => Ok(vec![]),
        }
    }

    fn prompt(
        &self,
        examples: &[RetrievedExample],
        requirements: &[String],
        purpose: PromptPurpose,
    ) -> Prompt {
        let pairs: Vec<LiftedPair> = examples.iter().map(RetrievedExample::as_pair).collect();
        let refs: Vec<&LiftedPair> = pairs.iter().collect();
        let mut p = assemble_prompt(
            SYSTEM_PROMPT,
            &refs,
            requirements,
            self.config.components.grammar,
        );
        p.meta = PromptMeta {
            variant: self.config.variant.map(|v| v.name().to_string()),
            seed: self.config.seed,
            purpose,
        };
        p
    }

    /// Strict decoding when enabled and possible, otherwise full-text
    /// completion; then parse, with repair rounds when feedback is on.
    fn generate(&self, prompt: &Prompt) -> Generation {
        let params = self.params();
        let mut strict = false;
        let mut raw = None;
        if self.config.components.strict {
            if let Some(store) = self.mask_store() {
                match constrained_generate(&self.backend, prompt, &store, &params) {
                    Ok(Generated::NotLtl) => {
                        return Generation {
                            outcome: Outcome::NotLtl,
                            strict: true,
                            repair_rounds: 0,
                            raw: Some(SENTINEL.to_string()),
                        }
                    }
                    Ok(Generated::Formula(text)) => {
                        strict = true;
                        raw = Some(text);
                    }
                    Err(GuardError::DeadEnd { .. }) => {}
                    Err(e) => return backend_failure(e.to_string(), true),
                }
            }
        }
        let raw = match raw {
            Some(r) => r,
            None => match self.backend.complete(prompt, &params) {
                Ok(r) => r,
                Err(e) => return backend_failure(e.to_string(), strict),
            },
        };
        if is_sentinel(&raw) {
            return Generation {
                outcome: Outcome::NotLtl,
                strict,
                repair_rounds: 0,
                raw: Some(raw),
            };
        }
        match parse_output(&raw) {
            Ok((_, f)) => Generation {
                outcome: Outcome::Formula { ltl: print(&f) },
                strict,
                repair_rounds: 0,
                raw: Some(raw),
            },
            Err(diagnostic) if !self.config.components.feedback => Generation {
                outcome: Outcome::SyntaxFailure {
                    history: vec![Attempt {
                        text: raw.clone(),
                        diagnostic: Some(diagnostic),
                    }],
                },
                strict,
                repair_rounds: 0,
                raw: Some(raw),
            },
            Err(_) => match repair_loop(
                &self.backend,
                prompt,
                &raw,
                self.config.max_repairs,
                &params,
            ) {
                Ok(RepairOutcome::Repaired {
                    formula, rounds, ..
                }) => Generation {
                    outcome: Outcome::Formula {
                        ltl: print(&formula),
                    },
                    strict,
                    repair_rounds: rounds,
                    raw: Some(raw),
                },
                Ok(RepairOutcome::NotLtl { history }) => Generation {
                    outcome: Outcome::NotLtl,
                    strict,
                    repair_rounds: history.len() - 1,
                    raw: Some(raw),
                },
                Ok(RepairOutcome::Failure { history }) => Generation {
                    repair_rounds: history.len() - 1,
                    outcome: Outcome::SyntaxFailure { history },
                    strict,
                    raw: Some(raw),
                },
                Err(e) => backend_failure(e.to_string(), strict),
            },
        }
    }

    fn calls(&self) -> usize {
        self.backend.complete.load(Ordering::Relaxed) + self.backend.step.load(Ordering::Relaxed)
    }

    fn translate_with(
        &self,
        req: &Requirement,
        texts: &[String],
        purpose: PromptPurpose,
        extra: Option<&str>,
    ) -> TranslationResult {
        let before = self.calls();
        let retrieved = match self.retrieve(&req.text) {
            Ok(r) => r,
            Err(message) => {
                return TranslationResult {
                    id: req.id.clone(),
                    requirement: req.text.clone(),
                    outcome: Outcome::BackendFailure { message },
                    retrieved: vec![],
                    strict: false,
                    repair_rounds: 0,
                    raw: None,
                    alternatives: vec![],
                    backend_calls: 0,
                }
            }
        };
        let mut prompt = self.prompt(&retrieved, texts, purpose);
        if let Some(extra) = extra {
            prompt.user = format!("{}\n\n{}", prompt.user, extra);
        }
        let g = self.generate(&prompt);
        TranslationResult {
            id: req.id.clone(),
            requirement: req.text.clone(),
            outcome: g.outcome,
            retrieved,
            strict: g.strict,
            repair_rounds: g.repair_rounds,
            raw: g.raw,
            alternatives: vec![],
            backend_calls: self.calls() - before,
        }
    }

    pub fn translate_one(&self, req: &Requirement) -> TranslationResult {
        self.translate_with(
            req,
            std::slice::from_ref(&req.text),
            PromptPurpose::Translate,
            None,
        )
    }

    fn check(&self, members: &[NamedFormula]) -> Result<SatOutcome, String> {
        self.checks.fetch_add(1, Ordering::Relaxed);
        self.checker.check_set(members).map_err(|e| e.to_string())
    }

    pub fn translate_set(&self, reqs: &[Requirement]) -> Result<SetResult, PipelineError> {
        if reqs.is_empty() {
            return Err(PipelineError::NoRequirements);
        }
        let mut ids = HashSet::new();
        for r in reqs {
            if !ids.insert(r.id.as_str()) {
                return Err(PipelineError::DuplicateId(r.id.clone()));
            }
        }
        let start = Instant::now();

        let units: Vec<Requirement> = if self.config.joint {
            vec![Requirement {
                id: "joint".into(),
                text: reqs
                    .iter()
                    .map(|r| r.text.as_str())
                    .collect::<Vec<_>>()
                    .join("\n"),
            }]
        } else {
            reqs.to_vec()
        };
        let texts_for = |u: &Requirement| -> Vec<String> {
            if self.config.joint {
                reqs.iter().map(|r| r.text.clone()).collect()
            } else {
                vec![u.text.clone()]
            }
        };
        let mut results: Vec<TranslationResult> = units
            .iter()
            .map(|u| self.translate_with(u, &texts_for(u), PromptPurpose::Translate, None))
            .collect();

        let mut joint = self.joint_check(&results);
        let mut round = 0;
        while round < self.config.consistency_rounds {
            let Some(core) = joint.core.clone() else {
                break;
            };
            round += 1;
            let members = named_formulas(&results);
            let outcome = SatOutcome::Unsat { core: core.clone() };
            let feedback = conflict_feedback_prompt(&outcome, &members)?;
            let mut retranslated = Vec::new();
            for id in &core {
                let pos = results
                    .iter()
                    .position(|r| &r.id == id)
                    .expect("core ids come from results");
                let unit = &units[pos];
                let ask = format!("{feedback}\nNow give the corrected LTL formula for {id} only.");
                let fresh = self.translate_with(
                    unit,
                    &texts_for(unit),
                    PromptPurpose::Conflict,
                    Some(&ask),
                );
                retranslated.push(RetranslatedMember {
                    id: id.clone(),
                    outcome: fresh.outcome.clone(),
                });
                if matches!(fresh.outcome, Outcome::Formula { .. }) {
                    let calls = results[pos].backend_calls + fresh.backend_calls;
                    results[pos] = TranslationResult {
                        backend_calls: calls,
                        ..fresh
                    };
                }
            }
            let rounds = std::mem::take(&mut joint.rounds);
            let next = self.joint_check(&results);
            joint = JointReport { rounds, ..next };
            joint.rounds.push(ConflictRound {
                round,
                core,
                feedback,
                retranslated,
                verdict: joint.verdict.clone(),
                core_after: joint.core.clone(),
            });
        }

        let timing = Timing {
            backend_calls: self.backend.complete.load(Ordering::Relaxed),
            step_queries: self.backend.step.load(Ordering::Relaxed),
            retrievals: self.retrievals.load(Ordering::Relaxed),
            checker_calls: self.checks.load(Ordering::Relaxed),
            wall_ms: self
                .record_wall_time
                .then(|| start.elapsed().as_millis() as u64),
        };
        Ok(SetResult {
            version: REPORT_VERSION.to_string(),
            config: self.config.clone(),
            results,
            joint,
            timing,
        })
    }

    fn joint_check(&self, results: &[TranslationResult]) -> JointReport {
        let members = named_formulas(results);
        let excluded: Vec<String> = results
            .iter()
            .filter(|r| r.formula_text().is_none())
            .map(|r| r.id.clone())
            .collect();
        let mut report = JointReport {
            ltl: None,
            verdict: "empty".into(),
            model: None,
            core: None,
            error: None,
            excluded,
            rounds: vec![],
        };
        let Ok(f) = join(&members) else {
            return report;
        };
        report.ltl = Some(print(&f));
        match self.check(&members) {
            Ok(SatOutcome::Sat { model }) => {
                report.verdict = "sat".into();
                report.model = Some(model);
            }
            Ok(SatOutcome::Unsat { core }) => {
                report.verdict = "unsat".into();
                report.core = Some(core);
            }
            Err(e) => {
                report.verdict = "error".into();
                report.error = Some(e);
            }
        }
        report
    }
}

fn backend_failure(message: String, strict: bool) -> Generation {
    Generation {
        outcome: Outcome::BackendFailure { message },
        strict,
        repair_rounds: 0,
        raw: None,
    }
}

fn named_formulas(results: &[TranslationResult]) -> Vec<NamedFormula> {
    results
        .iter()
        .filter_map(|r| {
            let f = crate::ltl::parse(r.formula_text()?).expect("stored formulas parse");
            Some(NamedFormula::new(r.id.clone(), f, r.requirement.clone()))
        })
        .collect()
}

/// Lists each core member's id, requirement text and formula and asks for
/// corrected formulas for those ids.
pub fn conflict_feedback_prompt(
    outcome: &SatOutcome,
    members: &[NamedFormula],
) -> Result<String, PipelineError> {
    let core = outcome.core().ok_or(PipelineError::NotUnsat)?;
    let listed: BTreeSet<&str> = core.iter().map(String::as_str).collect();
    let mut out = format!(
        "The LTL formulas of requirements {} are jointly unsatisfiable: no system behaviour satisfies all of them together.\n",
        core.join(", ")
    );
    for id in core {
        let m = members
            .iter()
            .find(|m| &m.id == id)
            .ok_or_else(|| PipelineError::UnknownCoreMember(id.clone()))?;
        out.push_str(&format!(
            "\n{}: {}\nLTL: {}\n",
            m.id,
            m.origin,
            print(&m.formula)
        ));
    }
    out.push_str(&format!(
        "\nRevise the formulas for {} only, so that each faithfully translates its requirement.\n",
        listed.into_iter().collect::<Vec<_>>().join(", ")
    ));
    Ok(out)
}
