//! Terminal front ends: the chat REPL and the corpus evaluation harness.

pub mod eval;
pub mod render;
pub mod repl;
