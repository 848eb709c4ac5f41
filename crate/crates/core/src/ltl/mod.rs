//! The LTL language: syntax tree, parser, printer, normal forms and the
//! reference semantics over lasso traces.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod formula;
mod lexer;
mod nnf;
mod parser;
mod printer;
mod template;
mod trace;

pub use formula::{is_valid_atom_name, Formula};
pub(crate) use lexer::{is_space, is_word_byte};
pub use lexer::{tokenize, Spanned, Token};
pub use nnf::{closure, to_nnf};
pub use parser::parse;
pub use printer::print;
pub(crate) use template::substitute;
pub use template::{atoms, canonical_template, placeholder, rename_atoms};
pub use trace::{evaluate_trace, LassoTrace, Valuation};

/// Grammar of the surface syntax, as given to models when the prompt grammar
/// is enabled.
pub const GRAMMAR_TEXT: &str = r#"formula  ::= iff
iff      ::= implies ( "<->" implies )*        (left-associative, loosest)
implies  ::= or ( "->" implies )?              (right-associative)
or       ::= and ( "|" and )*
and      ::= until ( "&" until )*
until    ::= unary ( "U" until )?              (right-associative)
unary    ::= ( "!" | "G" | "F" | "X" ) unary | primary
primary  ::= atom | "true" | "false" | "(" formula ")"
atom     ::= [a-z][a-z0-9_]*                   (lowercase; "true"/"false" reserved)
G = always, F = eventually, X = next, U = until, ! = not, & = and, | = or"#;

/// Where and why a formula failed to parse.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Error)]
pub struct ParseDiagnostic {
    /// Byte offset of the offending token (input length at end of input).
    pub offset: usize,
    pub expected: String,
    pub found: String,
    pub message: String,
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at byte {}: {}", self.offset, self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LtlError {
    #[error("invalid atom name `{0}`")]
    InvalidAtom(String),
    #[error("atom `{0}` has no entry in the renaming")]
    UnmappedAtom(String),
    #[error("lasso loop must contain at least one step")]
    EmptyLoop,
}

/// Serde adapter storing a [`Formula`] as its surface text.
pub mod text_serde {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    use super::Formula;

    pub fn serialize<S: Serializer>(f: &Formula, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::print(f))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Formula, D::Error> {
        let text = String::deserialize(d)?;
        super::parse(&text).map_err(|e| D::Error::custom(format!("`{text}`: {e}")))
    }
}
