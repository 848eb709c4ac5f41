mod common;

use std::collections::BTreeMap;

use common::random_formula;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reqltl::backend::{MockBackend, MockScript};
use reqltl::eval::{
    arr_score, build_report, demo_dataset, load_dataset, rr_score, run_eval, score_semantic,
    EvalError, GoldEntry, Mode,
};
use reqltl::ltl::{atoms, canonical_template, parse, print, rename_atoms, Formula};
use reqltl::pipeline::{Pipeline, PipelineConfig, Variant};

const POOL: [&str; 4] = ["p", "q", "r", "s"];

fn echo_eval(
    dataset: &[GoldEntry],
    reply: impl Fn(&GoldEntry) -> String,
) -> reqltl::eval::EvalReport {
    let replies: Vec<(String, String)> = dataset.iter().map(|e| (e.nl.clone(), reply(e))).collect();
    let mock = MockBackend::new(MockScript::by_requirement(
        replies.iter().map(|(a, b)| (a.as_str(), b.as_str())),
    ))
    .unwrap();
    let pipeline = Pipeline::new(PipelineConfig::for_variant(Variant::V1), &mock, None).unwrap();
    run_eval(dataset, &pipeline).unwrap()
}

#[test]
fn echoed_gold_scores_full_marks() {
    let data = demo_dataset();
    let report = echo_eval(&data, |e| e.gold[0].clone());
    assert_eq!(report.items.len(), 70);
    assert_eq!(report.syn_pct, 100.0);
    assert_eq!(report.sem_s1_pct, 100.0);
    assert_eq!(report.sem_s2_pct, 100.0);
    assert!(report.undecided.is_empty());
}

/// Renames the first atom of the expert label to `name`.
fn rename_first(gold: &str, name: &str) -> String {
    let f = parse(gold).unwrap();
    let map: BTreeMap<String, String> = atoms(&f)
        .into_iter()
        .enumerate()
        .map(|(i, a)| {
            let to = if i == 0 { name.to_string() } else { a.clone() };
            (a, to)
        })
        .collect();
    print(&rename_atoms(&f, &map).unwrap())
}

#[test]
fn renamed_atom_follows_alignment_rule() {
    let data = load_dataset(
        &[
            r#"{"nl":"Every request is eventually granted.","gold":["G(request -> F granted)"]}"#,
            r#"{"nl":"Reading and writing never occur together.","gold":["G !(reading & writing)"]}"#,
            r#"{"nl":"The light stays red until the button is pressed.","gold":["red U pressed"]}"#,
            r#"{"nl":"Power is always on and the fan eventually runs.","gold":["G power_on & F fan_on"]}"#,
        ]
        .join("\n"),
    )
    .unwrap();
    let fresh = echo_eval(&data, |e| rename_first(&e.gold[0], "zz_fresh"));
    assert_eq!(
        fresh.items.iter().map(|r| r.s1).collect::<Vec<_>>(),
        [true, true, true, true]
    );
    let merged = echo_eval(&data, |e| {
        let second = atoms(&parse(&e.gold[0]).unwrap())[1].clone();
        rename_first(&e.gold[0], &second)
    });
    // Merging two atoms changes the template: G(a1 -> F a1), G !(a1 & a1),
    // a1 U a1 and G a1 & F a1 are not equivalent to their labels' templates.
    assert_eq!(
        merged.items.iter().map(|r| r.s1).collect::<Vec<_>>(),
        [false, false, false, false]
    );
    assert_eq!(fresh.sem_s1_pct, 100.0);
    assert_eq!(merged.sem_s1_pct, 0.0);
}

#[test]
fn reports_are_byte_identical() {
    let data = demo_dataset();
    let a = serde_json::to_string(&echo_eval(&data, |e| e.gold[0].clone())).unwrap();
    let b = serde_json::to_string(&echo_eval(&data, |e| e.gold[0].clone())).unwrap();
    assert_eq!(a, b);
}

#[test]
fn empty_dataset_is_an_error() {
    let mock = MockBackend::new(MockScript::default()).unwrap();
    let pipeline = Pipeline::new(PipelineConfig::for_variant(Variant::V1), &mock, None).unwrap();
    assert_eq!(
        run_eval(&[], &pipeline).unwrap_err(),
        EvalError::EmptyDataset
    );
    assert_eq!(load_dataset(""), Err(EvalError::EmptyDataset));
}

#[test]
fn robustness_groups_are_reported() {
    let data = load_dataset(include_str!("../fixtures/robustness.jsonl")).unwrap();
    let report = echo_eval(&data, |e| e.gold[0].clone());
    let cells: Vec<(&str, &str, &str)> = report
        .groups
        .iter()
        .map(|g| (g.group.as_str(), g.arr.as_str(), g.rr.as_str()))
        .collect();
    assert_eq!(
        cells,
        [
            ("arr", "6/6", "1/6"),
            ("g1", "3/3", "3/3"),
            ("g2", "3/3", "3/3")
        ]
    );
}

fn bijection(rng: &mut ChaCha8Rng) -> BTreeMap<String, String> {
    let mut targets: Vec<String> = ["alpha", "beta", "gamma", "delta", "eps", "zeta"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    targets.shuffle(rng);
    POOL.iter().map(|p| p.to_string()).zip(targets).collect()
}

fn random_group(rng: &mut ChaCha8Rng) -> Vec<Option<Formula>> {
    let n = rng.gen_range(1..=6);
    let base: Vec<Formula> = (0..3).map(|_| random_formula(rng, 3, &POOL)).collect();
    (0..n)
        .map(|_| {
            if rng.gen_bool(0.15) {
                None
            } else {
                Some(base.choose(rng).unwrap().clone())
            }
        })
        .collect()
}

#[test]
fn arr_is_invariant_under_atom_bijection() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..300 {
        let group = random_group(&mut rng);
        let map = bijection(&mut rng);
        let renamed: Vec<Option<Formula>> = group
            .iter()
            .map(|f| f.as_ref().map(|f| rename_atoms(f, &map).unwrap()))
            .collect();
        assert_eq!(arr_score(&group), arr_score(&renamed));
        assert_eq!(rr_score(&group), rr_score(&renamed));
    }
}

#[test]
fn structurally_equal_implies_template_equal() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..300 {
        let group = random_group(&mut rng);
        let rr = rr_score(&group);
        let arr = arr_score(&group);
        assert!(rr.m <= arr.m, "{group:?}");
        let present: Vec<&Formula> = group.iter().flatten().collect();
        for a in &present {
            for b in &present {
                if a == b {
                    assert_eq!(canonical_template(a).0, canonical_template(b).0);
                }
            }
        }
    }
}

#[test]
fn s2_never_below_s1() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let n = rng.gen_range(1..=6);
        let gold: Vec<GoldEntry> = (0..n)
            .map(|i| GoldEntry {
                nl: format!("item {i}"),
                gold: (0..rng.gen_range(1..=3))
                    .map(|_| print(&random_formula(&mut rng, 2, &POOL)))
                    .collect(),
                group: None,
            })
            .collect();
        let outputs: Vec<Option<Formula>> = gold
            .iter()
            .map(|g| match rng.gen_range(0..4) {
                0 => None,
                1 => Some(parse(g.gold.last().unwrap()).unwrap()),
                _ => Some(random_formula(&mut rng, 2, &POOL)),
            })
            .collect();
        let s1 = score_semantic(&outputs, &gold, Mode::S1).unwrap();
        let s2 = score_semantic(&outputs, &gold, Mode::S2).unwrap();
        assert!(s2.pct >= s1.pct);
        for (a, b) in s1.correct.iter().zip(&s2.correct) {
            assert!(!a || *b);
        }
    }
}

#[test]
fn report_lengths_match_dataset() {
    let data = demo_dataset();
    let outputs: Vec<Option<Formula>> = data.iter().map(|_| None).collect();
    let report = build_report(PipelineConfig::default(), &data, &outputs, &[]).unwrap();
    assert_eq!(report.items.len(), data.len());
    assert_eq!(
        (report.syn_pct, report.sem_s1_pct, report.sem_s2_pct),
        (0.0, 0.0, 0.0)
    );
    assert!(matches!(
        build_report(PipelineConfig::default(), &data, &outputs[1..], &[]),
        Err(EvalError::LengthMismatch { .. })
    ));
}
