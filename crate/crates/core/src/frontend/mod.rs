//! A small imperative language: parsing, transition-formula semantics,
//! assertion checking and a concrete interpreter.

pub mod ast;
pub mod interp;
pub mod parser;
pub mod semantics;

pub use ast::{CmpOp, Cond, Expr, Pos, Program, Stmt};
pub use parser::{parse, parse_cond};
pub use semantics::{
    cond_formula, expr_term, program_vocab, summarize, verify, Analyzer, AssertResult,
    LoopSummary, Verdict, VerificationResult,
};
