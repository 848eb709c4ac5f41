//! Test-only generators and an exhaustive bounded-lasso oracle.
//!
//! The oracle evaluates formulas directly on explicit lassos and never touches
//! the tableau, so it can cross-check satisfiability verdicts.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use reqltl::ltl::{atoms, Formula, LassoTrace, Valuation};

pub const ATOM_POOL: [&str; 4] = ["p", "q", "r", "s"];

/// Random surface formula of depth at most `depth` over `pool`.
pub fn random_formula(rng: &mut ChaCha8Rng, depth: usize, pool: &[&str]) -> Formula {
    if depth <= 1 || rng.gen_bool(0.2) {
        return match rng.gen_range(0..10) {
            0 => Formula::True,
            1 => Formula::False,
            _ => Formula::var(pool[rng.gen_range(0..pool.len())]),
        };
    }
    let sub = |rng: &mut ChaCha8Rng| random_formula(rng, depth - 1, pool);
    match rng.gen_range(0..11) {
        0 => Formula::not(sub(rng)),
        1 => Formula::next(sub(rng)),
        2 => Formula::eventually(sub(rng)),
        3 => Formula::always(sub(rng)),
        4 => Formula::and(sub(rng), sub(rng)),
        5 => Formula::or(sub(rng), sub(rng)),
        6 => Formula::implies(sub(rng), sub(rng)),
        7 => Formula::iff(sub(rng), sub(rng)),
        _ => Formula::until(sub(rng), sub(rng)),
    }
}

/// Subformulas in post-order; children always precede parents.
struct Indexed {
    nodes: Vec<Formula>,
    kids: Vec<Vec<usize>>,
}

impl Indexed {
    fn new(f: &Formula) -> Self {
        let mut ix = Indexed {
            nodes: vec![],
            kids: vec![],
        };
        ix.add(f);
        ix
    }

    fn add(&mut self, f: &Formula) -> usize {
        let kids: Vec<usize> = f.children().into_iter().map(|c| self.add(c)).collect();
        self.nodes.push(f.clone());
        self.kids.push(kids);
        self.nodes.len() - 1
    }

    fn root(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Values at one position given the letter there and the values one step later.
    fn step(&self, letter: &Valuation, next: &[bool]) -> Vec<bool> {
        let mut v = vec![false; self.nodes.len()];
        for i in 0..self.nodes.len() {
            let k = &self.kids[i];
            v[i] = match &self.nodes[i] {
                Formula::True => true,
                Formula::False => false,
                Formula::Atom(a) => letter.contains(a),
                Formula::Not(_) => !v[k[0]],
                Formula::And(..) => v[k[0]] && v[k[1]],
                Formula::Or(..) => v[k[0]] || v[k[1]],
                Formula::Implies(..) => !v[k[0]] || v[k[1]],
                Formula::Iff(..) => v[k[0]] == v[k[1]],
                Formula::Next(_) => next[k[0]],
                Formula::Eventually(_) => v[k[0]] || next[i],
                Formula::Always(_) => v[k[0]] && next[i],
                Formula::Until(..) => v[k[1]] || (v[k[0]] && next[i]),
                Formula::Release(..) => v[k[1]] && (v[k[0]] || next[i]),
            };
        }
        v
    }

    /// Values at every loop position of `cycle^ω`, one subformula at a time
    /// with explicit fixpoints for the temporal operators.
    fn loop_values(&self, cycle: &[Valuation]) -> Vec<Vec<bool>> {
        let l = cycle.len();
        let succ = |j: usize| (j + 1) % l;
        let mut val: Vec<Vec<bool>> = vec![vec![false; self.nodes.len()]; l];
        for i in 0..self.nodes.len() {
            let k = self.kids[i].clone();
            let fix = |val: &mut Vec<Vec<bool>>,
                       init: bool,
                       rule: &dyn Fn(&[Vec<bool>], usize) -> bool| {
                for row in val.iter_mut() {
                    row[i] = init;
                }
                loop {
                    let mut changed = false;
                    for j in (0..l).rev() {
                        let nv = rule(val, j);
                        if nv != val[j][i] {
                            val[j][i] = nv;
                            changed = true;
                        }
                    }
                    if !changed {
                        break;
                    }
                }
            };
            match &self.nodes[i] {
                Formula::Eventually(_) => fix(&mut val, false, &|v, j| v[j][k[0]] || v[succ(j)][i]),
                Formula::Always(_) => fix(&mut val, true, &|v, j| v[j][k[0]] && v[succ(j)][i]),
                Formula::Until(..) => fix(&mut val, false, &|v, j| {
                    v[j][k[1]] || (v[j][k[0]] && v[succ(j)][i])
                }),
                Formula::Release(..) => fix(&mut val, true, &|v, j| {
                    v[j][k[1]] && (v[j][k[0]] || v[succ(j)][i])
                }),
                node => {
                    for j in 0..l {
                        let x = |c: usize| val[j][k[c]];
                        val[j][i] = match node {
                            Formula::True => true,
                            Formula::False => false,
                            Formula::Atom(a) => cycle[j].contains(a),
                            Formula::Not(_) => !x(0),
                            Formula::And(..) => x(0) && x(1),
                            Formula::Or(..) => x(0) || x(1),
                            Formula::Implies(..) => !x(0) || x(1),
                            Formula::Iff(..) => x(0) == x(1),
                            Formula::Next(_) => val[succ(j)][k[0]],
                            _ => unreachable!(),
                        };
                    }
                }
            }
        }
        val
    }
}

/// All valuations over `names`.
pub fn letters(names: &[String]) -> Vec<Valuation> {
    (0..1usize << names.len())
        .map(|mask| {
            names
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, n)| n.clone())
                .collect()
        })
        .collect()
}

/// Every word of length `len` over `alphabet`.
pub fn words(alphabet: &[Valuation], len: usize) -> Vec<Vec<Valuation>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|w| {
                alphabet.iter().map(move |a| {
                    let mut w2 = w.clone();
                    w2.push(a.clone());
                    w2
                })
            })
            .collect();
    }
    out
}

/// Searches every lasso with `|prefix| <= max_prefix` and
/// `1 <= |loop| <= max_loop` over the atoms of `f` for one satisfying `f`.
pub fn oracle_witness(f: &Formula, max_prefix: usize, max_loop: usize) -> Option<LassoTrace> {
    let ix = Indexed::new(f);
    let root = ix.root();
    let alphabet = letters(&atoms(f));
    for l in 1..=max_loop {
        for cycle in words(&alphabet, l) {
            let start = ix.loop_values(&cycle).swap_remove(0);
            if start[root] {
                return Some(LassoTrace::new(vec![], cycle).unwrap());
            }
            // vector -> (letter index, successor vector) one step closer to the loop
            let mut parent: HashMap<Vec<bool>, Option<(usize, Vec<bool>)>> = HashMap::new();
            parent.insert(start.clone(), None);
            let mut frontier = vec![start];
            for _ in 0..max_prefix {
                let mut next_frontier = vec![];
                for v in &frontier {
                    for (li, letter) in alphabet.iter().enumerate() {
                        let w = ix.step(letter, v);
                        if parent.contains_key(&w) {
                            continue;
                        }
                        parent.insert(w.clone(), Some((li, v.clone())));
                        if w[root] {
                            let mut prefix = vec![];
                            let mut cur = w;
                            while let Some(Some((li, succ))) = parent.get(&cur).cloned() {
                                prefix.push(alphabet[li].clone());
                                cur = succ;
                            }
                            return Some(LassoTrace::new(prefix, cycle).unwrap());
                        }
                        next_frontier.push(w);
                    }
                }
                frontier = next_frontier;
            }
        }
    }
    None
}

/// Brute-force minimal-unsatisfiability check of a core: the subset is Unsat
/// and dropping any single member makes it Sat (by the tableau).
pub fn all_subsets<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    (0..1usize << items.len())
        .map(|mask| {
            items
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, x)| x.clone())
                .collect()
        })
        .collect()
}

pub fn atom_set(f: &Formula) -> BTreeSet<String> {
    atoms(f).into_iter().collect()
}

/// Prefix validity by the parser alone: `s` is a prefix of some sentence iff
/// one of a few canned completions makes it parse.
pub fn oracle_valid_prefix(s: &str) -> bool {
    let open = s.matches('(').count() as isize - s.matches(')').count() as isize;
    if open < 0 {
        return false;
    }
    let close = ")".repeat(open as usize);
    ["", ">", "->"].iter().any(|lexeme| {
        ["", " p"]
            .iter()
            .any(|operand| reqltl::ltl::parse(&format!("{s}{lexeme}{operand}{close}")).is_ok())
    })
}

/// A random token sequence over `vocab` that stays a valid prefix.
pub fn random_valid_prefix(rng: &mut ChaCha8Rng, vocab: &[String], max_tokens: usize) -> String {
    let mut s = String::new();
    for _ in 0..rng.gen_range(0..=max_tokens) {
        let valid: Vec<&String> = vocab
            .iter()
            .filter(|t| oracle_valid_prefix(&format!("{s}{t}")))
            .collect();
        if valid.is_empty() {
            break;
        }
        s.push_str(valid[rng.gen_range(0..valid.len())]);
    }
    s
}
