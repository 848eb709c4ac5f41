use std::fmt;

use super::LtlError;

/// An LTL formula.
///
/// `Release` only arises from [`to_nnf`](super::to_nnf); the surface grammar has
/// no token for it, and the printer renders it through its `U` dual.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    True,
    False,
    Atom(String),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Next(Box<Formula>),
    Eventually(Box<Formula>),
    Always(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
    Release(Box<Formula>, Box<Formula>),
}

/// Returns true when `name` is a legal atomic proposition: `[a-z][a-z0-9_]*`
/// and not one of the reserved words.
pub fn is_valid_atom_name(name: &str) -> bool {
    let mut bytes = name.bytes();
    match bytes.next() {
        Some(b'a'..=b'z') => {}
        _ => return false,
    }
    if !bytes.all(|b| matches!(b, b'a'..=b'z' | b'0'..=b'9' | b'_')) {
        return false;
    }
    name != "true" && name != "false"
}

impl Formula {
    pub fn atom(name: impl Into<String>) -> Result<Formula, LtlError> {
        let name = name.into();
        if is_valid_atom_name(&name) {
            Ok(Formula::Atom(name))
        } else {
            Err(LtlError::InvalidAtom(name))
        }
    }

    /// Atom constructor for names known to be valid (tests, fixtures).
    ///
    /// Panics on an invalid name.
    pub fn var(name: &str) -> Formula {
        Formula::atom(name).unwrap_or_else(|e| panic!("{e}"))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Formula {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    pub fn next(f: Formula) -> Formula {
        Formula::Next(Box::new(f))
    }

    pub fn eventually(f: Formula) -> Formula {
        Formula::Eventually(Box::new(f))
    }

    pub fn always(f: Formula) -> Formula {
        Formula::Always(Box::new(f))
    }

    pub fn until(a: Formula, b: Formula) -> Formula {
        Formula::Until(Box::new(a), Box::new(b))
    }

    pub fn release(a: Formula, b: Formula) -> Formula {
        Formula::Release(Box::new(a), Box::new(b))
    }

    /// Direct children, left to right.
    pub fn children(&self) -> Vec<&Formula> {
        use Formula::*;
        match self {
            True | False | Atom(_) => vec![],
            Not(a) | Next(a) | Eventually(a) | Always(a) => vec![a],
            And(a, b) | Or(a, b) | Implies(a, b) | Iff(a, b) | Until(a, b) | Release(a, b) => {
                vec![a, b]
            }
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        1 + self
            .children()
            .into_iter()
            .map(Formula::size)
            .sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self
            .children()
            .into_iter()
            .map(Formula::depth)
            .max()
            .unwrap_or(0)
    }

    /// Rebuilds the node with `f` applied to each child.
    pub(crate) fn map_children(&self, mut f: impl FnMut(&Formula) -> Formula) -> Formula {
        use Formula::*;
        let mut g = |x: &Formula| Box::new(f(x));
        match self {
            True | False | Atom(_) => self.clone(),
            Not(a) => Not(g(a)),
            Next(a) => Next(g(a)),
            Eventually(a) => Eventually(g(a)),
            Always(a) => Always(g(a)),
            And(a, b) => {
                let a = g(a);
                And(a, g(b))
            }
            Or(a, b) => {
                let a = g(a);
                Or(a, g(b))
            }
            Implies(a, b) => {
                let a = g(a);
                Implies(a, g(b))
            }
            Iff(a, b) => {
                let a = g(a);
                Iff(a, g(b))
            }
            Until(a, b) => {
                let a = g(a);
                Until(a, g(b))
            }
            Release(a, b) => {
                let a = g(a);
                Release(a, g(b))
            }
        }
    }

    /// True when negations only sit on atoms and no `->`/`<->` remain.
    pub fn is_nnf(&self) -> bool {
        match self {
            Formula::Not(inner) => matches!(**inner, Formula::Atom(_)),
            Formula::Implies(..) | Formula::Iff(..) => false,
            other => other.children().into_iter().all(Formula::is_nnf),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::print(self))
    }
}

impl std::str::FromStr for Formula {
    type Err = super::ParseDiagnostic;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        super::parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atom_names() {
        assert!(is_valid_atom_name("request"));
        assert!(is_valid_atom_name("atom_12"));
        assert!(!is_valid_atom_name("Request"));
        assert!(!is_valid_atom_name("1p"));
        assert!(!is_valid_atom_name("_p"));
        assert!(!is_valid_atom_name(""));
        assert!(!is_valid_atom_name("true"));
        assert!(Formula::atom("false").is_err());
    }

    #[test]
    fn size_and_depth() {
        let f = Formula::always(Formula::implies(
            Formula::var("p"),
            Formula::eventually(Formula::var("q")),
        ));
        assert_eq!(f.size(), 5);
        assert_eq!(f.depth(), 4);
    }

    #[test]
    fn nnf_detection() {
        assert!(Formula::not(Formula::var("p")).is_nnf());
        assert!(!Formula::not(Formula::always(Formula::var("p"))).is_nnf());
        assert!(!Formula::implies(Formula::var("p"), Formula::var("q")).is_nnf());
    }
}
