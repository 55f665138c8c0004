//! Existential linear arithmetic over the integers and rationals:
//! syntax, an SMT-LIB2 solver client and the formula operations used by the
//! abstraction pipeline.

pub mod ops;
pub mod sexp;
pub mod smt;
pub mod syntax;

pub use ops::{
    affine_equalities, compose, entails, equivalent, exists_eliminating, fresh_tagged, is_sat,
    negate, select_cube,
    skolemize, skolemize_formula, EqualitySpace,
};
pub use smt::{formula_to_smt, parse_formula, transition_script, Solver, SolverConfig};
pub use syntax::{fresh_var, Formula, LinExpr, Model, Sort, Term, TransitionFormula, Var};
