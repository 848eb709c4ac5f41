use std::collections::BTreeSet;

use super::formula::Formula;

/// Negation normal form: negations only on atoms, `->` and `<->` expanded,
/// and negated `U` rewritten into `R` (and vice versa).
pub fn to_nnf(f: &Formula) -> Formula {
    use Formula::*;
    match f {
        Not(inner) => negate(inner),
        Implies(a, b) => Formula::or(negate(a), to_nnf(b)),
        Iff(a, b) => Formula::or(
            Formula::and(to_nnf(a), to_nnf(b)),
            Formula::and(negate(a), negate(b)),
        ),
        other => other.map_children(to_nnf),
    }
}

/// NNF of `!f`.
fn negate(f: &Formula) -> Formula {
    use Formula::*;
    match f {
        True => False,
        False => True,
        Atom(_) => Formula::not(f.clone()),
        Not(inner) => to_nnf(inner),
        And(a, b) => Formula::or(negate(a), negate(b)),
        Or(a, b) => Formula::and(negate(a), negate(b)),
        Implies(a, b) => Formula::and(to_nnf(a), negate(b)),
        Iff(a, b) => Formula::or(
            Formula::and(to_nnf(a), negate(b)),
            Formula::and(negate(a), to_nnf(b)),
        ),
        Next(a) => Formula::next(negate(a)),
        Eventually(a) => Formula::always(negate(a)),
        Always(a) => Formula::eventually(negate(a)),
        Until(a, b) => Formula::release(negate(a), negate(b)),
        Release(a, b) => Formula::until(negate(a), negate(b)),
    }
}

/// Fischer–Ladner closure of an NNF formula: every subformula, plus the
/// one-step unfolding `X φ` of each `U`, `R`, `F` and `G` subformula.
pub fn closure(f: &Formula) -> BTreeSet<Formula> {
    let mut out = BTreeSet::new();
    collect(f, &mut out);
    out
}

fn collect(f: &Formula, out: &mut BTreeSet<Formula>) {
    if !out.insert(f.clone()) {
        return;
    }
    if matches!(
        f,
        Formula::Until(..) | Formula::Release(..) | Formula::Eventually(_) | Formula::Always(_)
    ) {
        out.insert(Formula::next(f.clone()));
    }
    for c in f.children() {
        collect(c, out);
    }
}
