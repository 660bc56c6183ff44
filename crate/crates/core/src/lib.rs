//! Finite-domain constraint propagation with explanations, and declarative
//! diagnosis of missing answers.
//!
//! A [`Csp`] compiles into a [`Program`] of `X in r` operators. Chaotic
//! iteration reduces an environment (a set of variable/value pairs) to the
//! greatest common fixpoint of the operators and records, for every removed
//! pair, the deduction rule that removed it. Those records unfold into
//! [`ExplanationTree`]s, which a [`DiagnosisSession`] walks with the help of
//! an oracle to find the constraint responsible for a missing value.

pub mod diagnosis;
pub mod error;
pub mod indexical;
pub mod lang;
pub mod model;
pub mod propagate;

pub use diagnosis::{
    erroneous_operators, find_symptoms, question_sentence, scripted_oracle, verify_erroneous,
    Answer, Diagnosis, DiagnosisSession, Expectation, ExpectedEnv, Fault, NodeStatus, Progress,
    Strategy,
};
pub use error::{Error, Location, Result};
pub use indexical::{
    compile_constraint, dual_apply, verify_preservation, DeductionRule, IndexicalExpr, Operator,
    OperatorId,
};
pub use model::{
    union_solutions, Comparison, Constraint, ConstraintId, Csp, Environment, Relation, Tuple,
    Universe, ValuePair, VarId, Variable,
};
pub use propagate::{
    chaotic_iteration, upward_closure, Closure, ExplanationTree, Program, Schedule,
};
