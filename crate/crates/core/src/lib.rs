pub mod backend;
pub mod consistency;
pub mod eval;
pub mod guard;
pub mod ltl;
pub mod pipeline;
pub mod rafsl;
