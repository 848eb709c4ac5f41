//! Explicit-state tableau for LTL satisfiability.
//!
//! A state is the set of NNF obligations the rest of the trace must meet.
//! Expanding a state yields one edge per consistent branch, labelled with the
//! atoms true at that step, the obligations handed to the successor, and which
//! eventualities (`U`, `F`) the branch left unfulfilled. A formula is
//! satisfiable iff some reachable non-trivial SCC has, for every eventuality,
//! an internal edge on which it is not pending.

use std::collections::{BTreeSet, HashMap, VecDeque};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use super::CheckError;
use crate::ltl::{closure, evaluate_trace, to_nnf, Formula, LassoTrace, Valuation};

type Obligations = BTreeSet<Formula>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SatResult {
    Sat(LassoTrace),
    Unsat,
}

impl SatResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SatResult::Sat(_))
    }
}

/// Default bound on tableau states.
pub const DEFAULT_STATE_CAP: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Checker {
    pub state_cap: usize,
}

impl Default for Checker {
    fn default() -> Self {
        Checker {
            state_cap: DEFAULT_STATE_CAP,
        }
    }
}

struct Edge {
    from: usize,
    to: usize,
    label: Valuation,
    fulfilled: Vec<bool>,
}

#[derive(Clone)]
struct Partial {
    todo: Vec<Formula>,
    seen: BTreeSet<Formula>,
    pos: BTreeSet<String>,
    neg: BTreeSet<String>,
    next: Obligations,
}

struct Branch {
    label: Valuation,
    next: Obligations,
    fulfilled: Vec<bool>,
}

impl Checker {
    pub fn new(state_cap: usize) -> Self {
        Checker { state_cap }
    }

    /// Decides satisfiability over infinite traces; a `Sat` answer carries a
    /// lasso that has been re-checked against the reference semantics.
    pub fn check_sat(&self, f: &Formula) -> Result<SatResult, CheckError> {
        let nnf = to_nnf(f);
        let eventualities: Vec<(Formula, Formula)> = closure(&nnf)
            .into_iter()
            .filter_map(|g| match &g {
                Formula::Until(_, goal) => Some((g.clone(), (**goal).clone())),
                Formula::Eventually(goal) => Some((g.clone(), (**goal).clone())),
                _ => None,
            })
            .collect();

        let mut ids: HashMap<Obligations, usize> = HashMap::new();
        let mut states: Vec<Obligations> = Vec::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut queue = VecDeque::new();

        let init: Obligations = BTreeSet::from([nnf]);
        ids.insert(init.clone(), 0);
        states.push(init);
        queue.push_back(0);

        while let Some(s) = queue.pop_front() {
            for branch in expand(&states[s], &eventualities) {
                let to = match ids.get(&branch.next) {
                    Some(&id) => id,
                    None => {
                        if states.len() >= self.state_cap {
                            return Err(CheckError::ResourceLimit {
                                cap: self.state_cap,
                            });
                        }
                        let id = states.len();
                        ids.insert(branch.next.clone(), id);
                        states.push(branch.next);
                        queue.push_back(id);
                        id
                    }
                };
                edges.push(Edge {
                    from: s,
                    to,
                    label: branch.label,
                    fulfilled: branch.fulfilled,
                });
            }
        }

        let Some(component) = accepting_component(states.len(), &edges, eventualities.len()) else {
            return Ok(SatResult::Unsat);
        };
        let trace = extract_lasso(states.len(), &edges, &component, eventualities.len());
        if !evaluate_trace(f, &trace) {
            return Err(CheckError::ModelRejected(crate::ltl::print(f)));
        }
        Ok(SatResult::Sat(trace))
    }
}

fn expand(state: &Obligations, eventualities: &[(Formula, Formula)]) -> Vec<Branch> {
    let start = Partial {
        todo: state.iter().rev().cloned().collect(),
        seen: BTreeSet::new(),
        pos: BTreeSet::new(),
        neg: BTreeSet::new(),
        next: BTreeSet::new(),
    };
    let mut raw = Vec::new();
    expand_partial(start, &mut raw);

    let mut out: Vec<Branch> = Vec::new();
    let mut dedup = BTreeSet::new();
    for p in raw {
        let fulfilled: Vec<bool> = eventualities
            .iter()
            .map(|(ev, goal)| !p.seen.contains(ev) || p.seen.contains(goal))
            .collect();
        if dedup.insert((p.pos.clone(), p.next.clone(), fulfilled.clone())) {
            out.push(Branch {
                label: p.pos,
                next: p.next,
                fulfilled,
            });
        }
    }
    out
}

fn expand_partial(mut p: Partial, out: &mut Vec<Partial>) {
    while let Some(f) = p.todo.pop() {
        if !p.seen.insert(f.clone()) {
            continue;
        }
        match f {
            Formula::True => {}
            Formula::False => return,
            Formula::Atom(a) => {
                if p.neg.contains(&a) {
                    return;
                }
                p.pos.insert(a);
            }
            Formula::Not(inner) => match *inner {
                Formula::Atom(a) => {
                    if p.pos.contains(&a) {
                        return;
                    }
                    p.neg.insert(a);
                }
                other => unreachable!("non-NNF negation of {other:?}"),
            },
            Formula::And(a, b) => {
                p.todo.push(*b);
                p.todo.push(*a);
            }
            Formula::Or(a, b) => {
                let mut alt = p.clone();
                alt.todo.push(*b);
                p.todo.push(*a);
                expand_partial(p, out);
                expand_partial(alt, out);
                return;
            }
            Formula::Next(a) => {
                p.next.insert(*a);
            }
            Formula::Always(a) => {
                p.next.insert(Formula::Always(a.clone()));
                p.todo.push(*a);
            }
            Formula::Eventually(ref a) => {
                let mut alt = p.clone();
                alt.next.insert(f.clone());
                p.todo.push((**a).clone());
                expand_partial(p, out);
                expand_partial(alt, out);
                return;
            }
            Formula::Until(ref a, ref b) => {
                let mut alt = p.clone();
                alt.todo.push((**a).clone());
                alt.next.insert(f.clone());
                p.todo.push((**b).clone());
                expand_partial(p, out);
                expand_partial(alt, out);
                return;
            }
            Formula::Release(ref a, ref b) => {
                let mut alt = p.clone();
                alt.todo.push((**b).clone());
                alt.next.insert(f.clone());
                p.todo.push((**b).clone());
                p.todo.push((**a).clone());
                expand_partial(p, out);
                expand_partial(alt, out);
                return;
            }
            Formula::Implies(..) | Formula::Iff(..) => unreachable!("non-NNF connective"),
        }
    }
    out.push(p);
}

/// The accepting SCC with the smallest member id, as a membership vector.
fn accepting_component(n: usize, edges: &[Edge], n_ev: usize) -> Option<Vec<bool>> {
    let mut graph: DiGraph<(), ()> = DiGraph::with_capacity(n, edges.len());
    for _ in 0..n {
        graph.add_node(());
    }
    for e in edges {
        graph.add_edge(NodeIndex::new(e.from), NodeIndex::new(e.to), ());
    }
    let mut sccs = tarjan_scc(&graph);
    sccs.sort_by_key(|c| c.iter().map(|i| i.index()).min());

    for scc in sccs {
        let mut member = vec![false; n];
        for i in &scc {
            member[i.index()] = true;
        }
        let internal: Vec<&Edge> = edges
            .iter()
            .filter(|e| member[e.from] && member[e.to])
            .collect();
        if internal.is_empty() {
            continue;
        }
        if (0..n_ev).all(|i| internal.iter().any(|e| e.fulfilled[i])) {
            return Some(member);
        }
    }
    None
}

/// Shortest path of edge indices from `from` to any state accepted by `goal`,
/// using only edges accepted by `usable`.
fn bfs_path(
    n: usize,
    edges: &[Edge],
    from: usize,
    goal: impl Fn(usize) -> bool,
    usable: impl Fn(&Edge) -> bool,
) -> Option<(Vec<usize>, usize)> {
    if goal(from) {
        return Some((vec![], from));
    }
    let mut out_edges: Vec<Vec<usize>> = vec![vec![]; n];
    for (i, e) in edges.iter().enumerate() {
        if usable(e) {
            out_edges[e.from].push(i);
        }
    }
    let mut via: Vec<Option<usize>> = vec![None; n];
    let mut visited = vec![false; n];
    visited[from] = true;
    let mut queue = VecDeque::from([from]);
    while let Some(s) = queue.pop_front() {
        for &ei in &out_edges[s] {
            let t = edges[ei].to;
            if visited[t] {
                continue;
            }
            visited[t] = true;
            via[t] = Some(ei);
            if goal(t) {
                let mut path = vec![];
                let mut cur = t;
                while let Some(ei) = via[cur] {
                    path.push(ei);
                    cur = edges[ei].from;
                    if cur == from {
                        break;
                    }
                }
                path.reverse();
                return Some((path, t));
            }
            queue.push_back(t);
        }
    }
    None
}

fn extract_lasso(n: usize, edges: &[Edge], member: &[bool], n_ev: usize) -> LassoTrace {
    let (prefix, entry) =
        bfs_path(n, edges, 0, |s| member[s], |_| true).expect("component is reachable");
    let inside = |e: &Edge| member[e.from] && member[e.to];

    let mut cycle: Vec<usize> = Vec::new();
    let mut covered = vec![false; n_ev];
    let mut cur = entry;
    for i in 0..n_ev {
        if covered[i] {
            continue;
        }
        let (target, _) = edges
            .iter()
            .enumerate()
            .find(|(_, e)| inside(e) && e.fulfilled[i])
            .expect("accepting component fulfils every eventuality");
        let source = edges[target].from;
        let (mut path, _) =
            bfs_path(n, edges, cur, |s| s == source, inside).expect("strongly connected");
        path.push(target);
        for &ei in &path {
            for (c, f) in covered.iter_mut().zip(&edges[ei].fulfilled) {
                *c |= *f;
            }
        }
        cur = edges[target].to;
        cycle.extend(path);
    }
    if cycle.is_empty() {
        let (first, _) = edges
            .iter()
            .enumerate()
            .find(|(_, e)| e.from == entry && inside(e))
            .expect("non-trivial component");
        cycle.push(first);
        cur = edges[first].to;
    }
    let (back, _) = bfs_path(n, edges, cur, |s| s == entry, inside).expect("strongly connected");
    cycle.extend(back);

    let labels = |path: &[usize]| -> Vec<Valuation> {
        path.iter().map(|&ei| edges[ei].label.clone()).collect()
    };
    LassoTrace::new(labels(&prefix), labels(&cycle)).expect("tableau labels are valid atoms")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::parse;

    fn sat(s: &str) -> bool {
        Checker::default()
            .check_sat(&parse(s).unwrap())
            .unwrap()
            .is_sat()
    }

    #[test]
    fn response_is_satisfiable() {
        match Checker::default()
            .check_sat(&parse("G(request -> F granted)").unwrap())
            .unwrap()
        {
            SatResult::Sat(model) => {
                assert!(evaluate_trace(
                    &parse("G(request -> F granted)").unwrap(),
                    &model
                ))
            }
            SatResult::Unsat => panic!("expected sat"),
        }
    }

    #[test]
    fn textbook_verdicts() {
        assert!(!sat("F p & G !p"));
        assert!(!sat("G(request -> F granted) & G !granted & F request"));
        assert!(!sat("G(request -> F granted) & G !request & F request"));
        assert!(sat("G F p & G F !p"));
        assert!(!sat("F G p & G F !p"));
        assert!(sat("p U q"));
        assert!(!sat("(p U q) & G !q"));
        assert!(sat("!(p U q) & F q"));
        assert!(!sat("false"));
        assert!(sat("true"));
        assert!(!sat("X p & X !p"));
        assert!(sat("X p & !p"));
        assert!(!sat("G(p -> X p) & p & F !p"));
    }

    #[test]
    fn state_cap_is_a_resource_limit() {
        let f = parse("G F a & G F b & G F c & (a U (b U c))").unwrap();
        assert_eq!(
            Checker::new(2).check_sat(&f),
            Err(CheckError::ResourceLimit { cap: 2 })
        );
    }
}
