//! A desk-scale laboratory for paranatural category theory over finite
//! categories: validated category/difunctor tables, paranatural
//! transformation checking and enumeration, diYoneda and exponential probes,
//! structural ends and coends (initial algebras, bisimilarity quotients),
//! free theorems for single-variable polymorphic types, and a difunctor
//! model of type theory.

pub mod bundle;
pub mod difun;
pub mod diyoneda;
pub mod engine;
pub mod fincat;
pub mod fixpoint;
pub mod freethm;
pub mod paranat;
pub mod poly;
pub mod report;
pub mod tymodel;
pub mod value;

pub use difun::{eval_difunctor_expr, struct_category, validate_difunctor, Difunctor, DifunctorExpr};
pub use fincat::{build_fixture, finset_fragment, validate_category, FinCategory, Fixture};
pub use value::Value;
