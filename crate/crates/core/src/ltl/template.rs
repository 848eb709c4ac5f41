use std::collections::{BTreeMap, HashSet};

use super::formula::{is_valid_atom_name, Formula};
use super::LtlError;

/// Atom names in order of first occurrence (pre-order, left to right).
pub fn atoms(f: &Formula) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    walk_atoms(f, &mut |name| {
        if seen.insert(name.to_string()) {
            out.push(name.to_string());
        }
    });
    out
}

fn walk_atoms(f: &Formula, visit: &mut impl FnMut(&str)) {
    if let Formula::Atom(name) = f {
        visit(name);
    }
    for c in f.children() {
        walk_atoms(c, visit);
    }
}

/// Substitutes atom names. Every atom of `f` must be mapped, and to a valid name.
pub fn rename_atoms(f: &Formula, mapping: &BTreeMap<String, String>) -> Result<Formula, LtlError> {
    for target in mapping.values() {
        if !is_valid_atom_name(target) {
            return Err(LtlError::InvalidAtom(target.clone()));
        }
    }
    for a in atoms(f) {
        if !mapping.contains_key(&a) {
            return Err(LtlError::UnmappedAtom(a));
        }
    }
    Ok(substitute(f, &|name| mapping[name].clone()))
}

pub(crate) fn substitute(f: &Formula, rename: &impl Fn(&str) -> String) -> Formula {
    match f {
        Formula::Atom(name) => Formula::Atom(rename(name)),
        other => other.map_children(|c| substitute(c, rename)),
    }
}

/// Placeholder name for the `index`-th distinct atom (1-based).
pub fn placeholder(index: usize) -> String {
    format!("atom_{index}")
}

/// Renames atoms to `atom_1, atom_2, …` by first occurrence.
///
/// Returns the template and the original → placeholder mapping. Two formulas
/// agree up to atom renaming iff their templates are equal.
pub fn canonical_template(f: &Formula) -> (Formula, BTreeMap<String, String>) {
    let mapping: BTreeMap<String, String> = atoms(f)
        .into_iter()
        .enumerate()
        .map(|(i, a)| (a, placeholder(i + 1)))
        .collect();
    let template = substitute(f, &|name| mapping[name].clone());
    (template, mapping)
}
