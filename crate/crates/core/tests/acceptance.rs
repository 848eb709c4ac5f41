//! One test per acceptance criterion, numbered 1 to 13.

mod common;

use std::collections::BTreeSet;
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use common::{
    all_subsets, oracle_valid_prefix, oracle_witness, random_formula, random_valid_prefix,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reqltl::backend::{
    default_vocabulary, Backend, BackendError, Capability, GenParams, MockBackend, MockScript,
    NextToken, Prompt, PromptPurpose, StepPolicy, StepScript,
};
use reqltl::consistency::{
    check_sat, check_set, equivalent, Checker, NamedFormula, SatOutcome, SatResult,
};
use reqltl::eval::{arr_score, rr_score};
use reqltl::guard::{
    build_mask_store, constrained_generate, Generated, RecognizerState, TokenId, Vocabulary,
    DEFAULT_STATE_BUDGET,
};
use reqltl::ltl::{evaluate_trace, parse, print, to_nnf, Formula, GRAMMAR_TEXT};
use reqltl::pipeline::{
    ExampleSource, Pipeline, PipelineConfig, Requirement, RetrievedExample, Variant,
};
use reqltl::rafsl::{build_index, shipped_corpus, BuiltinEmbedder, Embedder, RafslError};

fn f(s: &str) -> Formula {
    parse(s).unwrap()
}

fn named(items: &[(&str, &str)]) -> Vec<NamedFormula> {
    items
        .iter()
        .map(|(id, ltl)| NamedFormula::new(*id, f(ltl), ""))
        .collect()
}

fn conjunction(reqs: &[NamedFormula]) -> Formula {
    reqs.iter()
        .map(|r| r.formula.clone())
        .reduce(Formula::and)
        .unwrap_or(Formula::True)
}

/// Every subset of `reqs` is checked; returns the ids of the unsatisfiable
/// subsets that are minimal. A satisfiable verdict must come with a model the
/// trace semantics accepts.
fn minimal_unsat_subsets(reqs: &[NamedFormula]) -> Vec<BTreeSet<String>> {
    let unsat: Vec<BTreeSet<String>> = all_subsets(reqs)
        .into_iter()
        .filter(|s| {
            let c = conjunction(s);
            match check_sat(&c).unwrap() {
                SatResult::Sat(model) => {
                    assert!(evaluate_trace(&c, &model));
                    false
                }
                SatResult::Unsat => true,
            }
        })
        .map(|s| s.iter().map(|r| r.id.clone()).collect())
        .collect();
    unsat
        .iter()
        .filter(|s| !unsat.iter().any(|t| t != *s && t.is_subset(s)))
        .cloned()
        .collect()
}

fn ids(core: &[String]) -> BTreeSet<String> {
    core.iter().cloned().collect()
}

#[test]
fn criterion_01_request_grant_conflict_core_is_all_three() {
    let start = Instant::now();
    let reqs = named(&[
        ("R1", "G(request -> F granted)"),
        ("R2", "G !granted"),
        ("R3", "F request"),
    ]);
    let outcome = check_set(&reqs).unwrap();
    let elapsed = start.elapsed();
    let SatOutcome::Unsat { core } = outcome else {
        panic!("expected unsat")
    };
    let all: BTreeSet<String> = ["R1", "R2", "R3"].map(String::from).into();
    assert_eq!(ids(&core), all);
    assert_eq!(minimal_unsat_subsets(&reqs), vec![all]);
    assert!(elapsed < Duration::from_secs(1), "{elapsed:?}");
}

#[test]
fn criterion_02_mistranslated_variant_core_is_two_members() {
    let start = Instant::now();
    let reqs = named(&[
        ("R1", "G(request -> F granted)"),
        ("R2b", "G !request"),
        ("R3", "F request"),
    ]);
    let outcome = check_set(&reqs).unwrap();
    let elapsed = start.elapsed();
    let SatOutcome::Unsat { core } = outcome else {
        panic!("expected unsat")
    };
    let want: BTreeSet<String> = ["R2b", "R3"].map(String::from).into();
    assert_eq!(ids(&core), want);
    assert_eq!(minimal_unsat_subsets(&reqs), vec![want]);
    assert!(elapsed < Duration::from_secs(1), "{elapsed:?}");
}

#[test]
fn criterion_03_alternative_translation_is_also_unsat() {
    let reqs = named(&[
        ("R1", "G(request -> F granted)"),
        ("R2", "G(request -> G !granted)"),
        ("R3", "F request"),
    ]);
    let outcome = check_set(&reqs).unwrap();
    assert!(!outcome.is_sat());
    assert!(oracle_witness(&to_nnf(&conjunction(&reqs)), 3, 3).is_none());
}

#[test]
fn criterion_04_ambiguous_pairs_are_not_equivalent() {
    for (expected, actual) in [
        ("G F safe", "F safe"),
        ("G !(p & q)", "!(p & q)"),
        ("G(p -> G q)", "G(p -> X G q)"),
    ] {
        let (a, b) = (f(expected), f(actual));
        assert!(!equivalent(&a, &b).unwrap(), "{expected} vs {actual}");
        let a_not_b = to_nnf(&Formula::and(a.clone(), Formula::not(b.clone())));
        let b_not_a = to_nnf(&Formula::and(b.clone(), Formula::not(a.clone())));
        let witness = oracle_witness(&a_not_b, 4, 4).or_else(|| oracle_witness(&b_not_a, 4, 4));
        let t =
            witness.unwrap_or_else(|| panic!("no distinguishing lasso for {expected} vs {actual}"));
        assert_ne!(evaluate_trace(&a, &t), evaluate_trace(&b, &t));
    }
}

#[test]
fn criterion_05_checker_agrees_with_lasso_enumeration() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut sat, mut unsat) = (0, 0);
    for _ in 0..500 {
        let g = random_formula(&mut rng, 3, &["p", "q", "r"]);
        let witness = oracle_witness(&to_nnf(&g), 4, 4);
        match check_sat(&g).unwrap() {
            SatResult::Sat(model) => {
                assert!(evaluate_trace(&g, &model), "model rejected for {g}");
                assert!(witness.is_some(), "no lasso found for sat {g}");
                sat += 1;
            }
            SatResult::Unsat => {
                assert!(witness.is_none(), "lasso satisfies unsat {g}");
                unsat += 1;
            }
        }
    }
    assert!(sat > 0 && unsat > 0);
    assert!(
        start.elapsed() < Duration::from_secs(60),
        "{:?}",
        start.elapsed()
    );
}

#[test]
fn criterion_06_strict_decoding_always_parses() {
    let start = Instant::now();
    let store = build_mask_store(Arc::new(default_vocabulary()), DEFAULT_STATE_BUDGET);
    let prompt = Prompt {
        system: "Translate to LTL.".into(),
        user: "Every request is eventually granted.".into(),
        ..Prompt::default()
    };
    let mut parsed = 0;
    for seed in 0..100u64 {
        let favorite = ["P", "(", "->", ")", "&"][seed as usize % 5];
        let mock = MockBackend::new(MockScript {
            rules: vec![],
            step: Some(StepScript {
                vocabulary: None,
                policy: StepPolicy::Adversarial {
                    favorite: favorite.into(),
                },
                seed,
            }),
        })
        .unwrap();
        let params = GenParams {
            seed,
            ..GenParams::default()
        };
        if let Ok(Generated::Formula(text)) = constrained_generate(&mock, &prompt, &store, &params)
        {
            if parse(&text).is_ok() {
                parsed += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    assert_eq!(parsed, 100);
    assert!(elapsed < Duration::from_secs(5), "{elapsed:?}");
}

#[test]
fn criterion_07_mask_bits_match_brute_force() {
    let vocab = Arc::new(default_vocabulary());
    let store = build_mask_store(vocab.clone(), DEFAULT_STATE_BUDGET);
    let tokens: Vec<String> = vocab
        .iter()
        .map(|(_, b)| String::from_utf8(b.to_vec()).unwrap())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let prefix = random_valid_prefix(&mut rng, &tokens, 12);
        let state = RecognizerState::START.feed(prefix.as_bytes());
        let i = rng.gen_range(0..tokens.len());
        let want = oracle_valid_prefix(&format!("{prefix}{}", tokens[i]));
        if store.allowed(state, i as TokenId) != want {
            mismatches += 1;
        }
    }
    assert_eq!(mismatches, 0);
}

#[test]
fn criterion_08_retrieval_matches_exhaustive_scan() {
    let e = BuiltinEmbedder::default();
    let corpus = shipped_corpus();
    let index = build_index(corpus.clone(), &e).unwrap();
    let words: Vec<&str> = corpus
        .iter()
        .flat_map(|p| p.nl.split_whitespace())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let n = rng.gen_range(1..=8);
        let q: Vec<&str> = (0..n)
            .map(|_| words[rng.gen_range(0..words.len())])
            .collect();
        let q = q.join(" ");
        let k = rng.gen_range(1..=6);
        let mut qv = e.embed(&q).unwrap().vector;
        let norm = qv.iter().map(|x| x * x).sum::<f64>().sqrt();
        qv.iter_mut().for_each(|x| *x /= norm);
        let mut scan: Vec<(usize, f64)> = index
            .vectors()
            .iter()
            .enumerate()
            .map(|(i, v)| (i, v.iter().zip(&qv).map(|(a, b)| a * b).sum()))
            .collect();
        scan.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        scan.truncate(k);
        let got = index.search(&e, &q, k).unwrap();
        assert_eq!(
            got.iter().map(|g| g.0).collect::<Vec<_>>(),
            scan.iter().map(|s| s.0).collect::<Vec<_>>(),
            "{q}"
        );
        for (g, s) in got.iter().zip(&scan) {
            assert!((g.1 - s.1).abs() < 1e-9);
        }
    }
}

fn outs(texts: &[&str]) -> Vec<Option<Formula>> {
    texts.iter().map(|t| Some(f(t))).collect()
}

#[test]
fn criterion_09_robustness_cells_reproduce() {
    let correct = [
        "G(request -> F granted)",
        "G(message -> F delivered)",
        "G(button_press -> F processed)",
        "G(order -> F shipped)",
        "G(error -> F logged)",
        "G(task -> F completed)",
    ];
    let v1_arr = outs(&[
        correct[0],
        "G F delivered",
        correct[2],
        "G F shipped",
        correct[4],
        "G F completed",
    ]);
    let v6_arr = outs(&correct);
    let v7_arr = outs(&[
        correct[0],
        "G F delivered",
        correct[2],
        correct[3],
        correct[4],
        "G F completed",
    ]);
    let g1_v1 = outs(&["G(request -> F grant)"; 3]);
    let g1_v6 = outs(&[
        "G(request -> F grant)",
        "G(request -> F G granted)",
        "G(request -> F grant)",
    ]);
    let g1_v7 = outs(&[
        "G(request -> F grant)",
        "G(request -> F granted)",
        "G(request -> F grant)",
    ]);
    let g2_v1 = outs(&["G(F delivered)", "G(X d -> F d)", "G(F delivered)"]);
    let g2_v6 = outs(&[
        "G(message -> F delivered)",
        "G(delivered)",
        "G(message -> F delivered)",
    ]);
    let g2_v7 = outs(&[
        "G(F delivered)",
        "G(delivered)",
        "G(message -> F delivered)",
    ]);

    let cells = [
        arr_score(&v1_arr).to_string(),
        arr_score(&v6_arr).to_string(),
        arr_score(&v7_arr).to_string(),
        rr_score(&g1_v1).to_string(),
        rr_score(&g1_v6).to_string(),
        rr_score(&g1_v7).to_string(),
        rr_score(&g2_v1).to_string(),
        rr_score(&g2_v6).to_string(),
        rr_score(&g2_v7).to_string(),
    ];
    assert_eq!(
        cells,
        ["3/6", "6/6", "4/6", "3/3", "2/3", "3/3", "2/3", "2/3", "1/3"]
    );
}

/// Step-wise backend whose only tokens can never start a formula, so strict
/// decoding always dead-ends and the pipeline falls back to full text.
struct Instrumented {
    vocabulary: Arc<Vocabulary>,
    prompts: Mutex<Vec<Prompt>>,
    steps: AtomicUsize,
}

impl Instrumented {
    fn new() -> Self {
        Instrumented {
            vocabulary: Arc::new(Vocabulary::from_strs(&["&", ")"]).unwrap()),
            prompts: Mutex::new(vec![]),
            steps: AtomicUsize::new(0),
        }
    }
}

impl Backend for Instrumented {
    fn capability(&self) -> Capability {
        Capability {
            full_text: true,
            step_wise: true,
            vocabulary: Some(self.vocabulary.clone()),
        }
    }

    fn complete(&self, prompt: &Prompt, _: &GenParams) -> Result<String, BackendError> {
        self.prompts.lock().unwrap().push(prompt.clone());
        Ok(match prompt.meta.purpose {
            PromptPurpose::Repair => "G(p -> F q)".into(),
            _ => "G(p ->".into(),
        })
    }

    fn next_token_distribution(
        &self,
        _: &Prompt,
        _: &[u8],
    ) -> Result<Vec<(NextToken, f64)>, BackendError> {
        self.steps.fetch_add(1, Ordering::SeqCst);
        Ok(vec![
            (NextToken::Token(0), 0.6),
            (NextToken::Token(1), 0.3),
            (NextToken::End, 0.1),
        ])
    }
}

struct CountingSource(AtomicUsize);

impl ExampleSource for CountingSource {
    fn examples(&self, _: &str, k: usize) -> Result<Vec<RetrievedExample>, RafslError> {
        self.0.fetch_add(1, Ordering::SeqCst);
        Ok(shipped_corpus()
            .into_iter()
            .take(k)
            .enumerate()
            .map(|(index, p)| RetrievedExample {
                index,
                score: 1.0,
                nl: p.nl,
                ltl: p.ltl,
            })
            .collect())
    }
}

#[test]
fn criterion_10_variants_use_exactly_their_components() {
    let mut deviations = Vec::new();
    for v in Variant::ALL {
        let backend = Instrumented::new();
        let source = CountingSource(AtomicUsize::new(0));
        let pipeline =
            Pipeline::new(PipelineConfig::for_variant(v), &backend, Some(&source)).unwrap();
        pipeline
            .translate_set(&[Requirement {
                id: "R1".into(),
                text: "Every request is eventually granted.".into(),
            }])
            .unwrap();
        let prompts = backend.prompts.lock().unwrap();
        let observed = [
            prompts.iter().any(|p| p.system.contains(GRAMMAR_TEXT)),
            backend.steps.load(Ordering::SeqCst) > 0,
            source.0.load(Ordering::SeqCst) > 0,
            prompts
                .iter()
                .any(|p| p.meta.purpose == PromptPurpose::Repair),
        ];
        let c = v.components();
        let expected = [c.grammar, c.strict, c.retrieval, c.feedback];
        if observed != expected {
            deviations.push(format!("{v}: expected {expected:?}, observed {observed:?}"));
        }
    }
    assert!(deviations.is_empty(), "{}", deviations.join("\n"));
}

#[test]
fn criterion_11_print_parse_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut failures = Vec::new();
    for _ in 0..1000 {
        let depth = rng.gen_range(1..=6);
        let g = random_formula(&mut rng, depth, &["p", "q", "r", "req_1", "granted"]);
        let text = print(&g);
        if parse(&text).as_ref() != Ok(&g) {
            failures.push(text);
        }
    }
    assert!(failures.is_empty(), "{failures:?}");
}

#[test]
fn criterion_12_returned_cores_are_minimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let checker = Checker::default();
    let mut found = 0;
    while found < 50 {
        let n = rng.gen_range(2..=5);
        let reqs: Vec<NamedFormula> = (0..n)
            .map(|i| {
                NamedFormula::new(
                    format!("R{i}"),
                    random_formula(&mut rng, 3, &["p", "q"]),
                    "",
                )
            })
            .collect();
        let SatOutcome::Unsat { core } = checker.check_set(&reqs).unwrap() else {
            continue;
        };
        found += 1;
        let members: Vec<NamedFormula> = reqs
            .iter()
            .filter(|r| core.contains(&r.id))
            .cloned()
            .collect();
        assert!(!checker.check_sat(&conjunction(&members)).unwrap().is_sat());
        for subset in all_subsets(&members) {
            if subset.len() < members.len() {
                assert!(
                    checker.check_sat(&conjunction(&subset)).unwrap().is_sat(),
                    "core {core:?} of {reqs:?} is not minimal"
                );
            }
        }
    }
}

#[test]
fn criterion_13_cli_report_is_byte_identical() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let run = || {
        let out = Command::new(env!("CARGO_BIN_EXE_reqltl"))
            .args([
                "translate",
                "--input",
                &format!("{dir}/fixtures/requests.txt"),
                "--variant",
                "v6",
                "--backend",
                "mock",
                "--mock",
                &format!("{dir}/fixtures/requests_mock.json"),
                "--seed",
                "7",
            ])
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        out.stdout
    };
    let a = run();
    let b = run();
    assert!(!a.is_empty());
    assert_eq!(a, b);
    let report: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(report["results"].as_array().unwrap().len(), 3);
    assert_eq!(report["joint"]["verdict"], "unsat");
}
