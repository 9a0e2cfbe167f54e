//! Post-processing of probabilistic binary classifiers under group-fairness constraints.
//!
//! The base prediction `ŷ = 1{p(Y=1|x) > 0.5}` is flipped on instances selected by a linear
//! rule over per-instance bias scores. Scores are computed from the classifier's confidence
//! and an auxiliary model of group membership ([`scores`]); rules are fitted on a labeled
//! validation set ([`search`]) and can be compared with the exact finite-sample optimum
//! ([`oracle`]). [`synth`] provides a Gaussian-mixture ground truth and a small
//! softmax-regression auxiliary model.

pub mod criterion;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod oracle;
pub mod probs;
pub mod rule;
pub mod scores;
pub mod search;
pub mod synth;

/// Library version, recorded in provenance files.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use criterion::{estimate_priors, Component, CriterionKind, CriterionSpec, GroupEvent, Side};
pub use dataset::{load_labeled, Features, LabeledDataset, Schema};
pub use error::{Error, Result};
pub use metrics::{accuracy, apply_rule, composite, evaluate, signed_disparity, EvalReport};
pub use oracle::{LpInstance, LpSolution, LpStatus};
pub use probs::{load_probs, write_joint_csv, ProbTable};
pub use rule::{ModificationRule, Provenance};
pub use scores::{bias_scores, corrupt, BiasScores};
pub use search::{FrontierPoint, Method, SearchParams};
pub use synth::{GaussianMixtureSpec, SoftmaxModel};
