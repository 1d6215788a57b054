//! Solvers and certification tooling for simple bilevel convex optimization:
//! minimize an upper objective f over the solution set of a lower composite
//! problem h + ω, by running an accelerated proximal-gradient method on the
//! regularized composite h + η·f + ω with a single, budget-matched η.
//!
//! The crate provides:
//!
//! - [`solvers`]: the accelerated regularized method, its unaccelerated
//!   ablation, two baselines from the literature, and a lower-problem-only
//!   solver for reference optima — all recording full iterate traces;
//! - [`problems`]: analytically solvable test instances (a weakly sharp
//!   box-constrained family with closed-form solutions, and an ℓ1-ball
//!   least-squares family), plus CSV import of external data;
//! - [`bench`]: reference optima, per-iteration metric series, log-log rate
//!   estimation, iteration budgets, and — centrally — numerical certification
//!   of every inequality the method's analysis promises, on actual traces;
//! - [`prox`]: the supported nonsmooth terms with exact proximal operators
//!   and an independent optimality certifier for prox computations;
//! - [`oracles`]: problem descriptions as value/gradient/prox oracles with
//!   self-validation (finite differences, convexity and smoothness probes);
//! - [`numerics`], [`rng`]: a small dense-matrix kernel with a power-iteration
//!   spectral norm, and a reproducible splitmix64 generator.
//!
//! Everything is deterministic: given the same configuration and seed, every
//! solver produces bit-identical traces, and the CSV writers round-trip
//! floats exactly.

pub mod bench;
pub mod error;
pub mod numerics;
pub mod oracles;
pub mod problems;
pub mod prox;
pub mod rng;
pub mod solvers;

pub use bench::{
    certify_lemma_chain, certify_theorem1, compute_reference, estimate_rate, evaluate_trace,
    iteration_budget, proposition1_subopt_bound, trace_csv_path, write_trace_csv, BudgetMetric,
    CertReport, CheckStatus, InequalityCheck, MetricSeries, RateEstimate, Reference,
    ReferenceSource,
};
pub use error::{Error, Result};
pub use numerics::DenseMatrix;
pub use oracles::{GroundTruth, ProblemSpec, SmoothOracle, ValidationReport};
pub use problems::{
    load_regression_csv, make_sparse_regression, make_weak_sharp_box, save_regression_csv,
    seeded_weak_sharp_box, verify_weak_sharpness, RegressionData, SharpnessReport,
};
pub use prox::{certify_prox, project_l1_ball, ProxCertificate, ProxOp};
pub use rng::SplitMix64;
pub use solvers::{
    solve, EtaMode, GammaRule, IterateRecord, IterateTrace, SolverConfig, Variant,
};
