//! Self-consistent gate set tomography for small quantum systems.
//!
//! The crate models a device as a black box `{|rho>>, <<E|, {G_k}}` in
//! Hilbert-Schmidt space and provides:
//!
//! * closed-form linear-inversion estimation ([`lgst`]),
//! * maximum-likelihood refinement seeded by it ([`mle`]),
//! * gauge transformations and gauge fixing against a target ([`gauge`]),
//! * a standard-tomography baseline that trusts a reference frame ([`standard`]),
//! * seeded binomial simulation of experiments ([`dataset`]),
//! * and gauge-invariant predictive scoring with the log rule ([`scoring`]).

pub mod basis;
pub mod dataset;
pub mod design;
pub mod error;
pub mod gauge;
pub mod lgst;
pub mod mle;
pub mod model;
pub mod optimize;
pub mod pipeline;
pub mod scoring;
pub mod standard;
pub mod targets;

pub use basis::{pauli_basis, HermitianBasis};
pub use dataset::{simulate_counts, Counts, DataSet, ExactProbabilities, FrequencySource};
pub use design::{
    completeness_diagnostic, germ_power_design, lgst_design, select_fiducials, short_design,
    test_design, Experiment, ExperimentDesign, FiducialSet, Role,
};
pub use error::{GstError, Result};
pub use gauge::{
    apply_gauge, frobenius_discrepancy, gauge_optimize, GaugeFit, GaugeOptions, GaugeReport,
    GaugeTransform,
};
pub use lgst::{assemble, lgst_estimate, LgstDiagnostics, LgstIntermediates};
pub use mle::{
    mle_estimate, neg_log_likelihood, nll_gradient, project_to_feasible, FitReport, MleOptions,
    ParameterLayout, Projection,
};
pub use model::{
    density_to_vector, kraus_to_superop, parameter_count, unitary_to_superop, vector_to_density,
    EffectVector, GateSet, Sequence, StateVector, SuperOperator,
};
pub use pipeline::{run_demo, DemoConfig, DemoOutput, DemoSummary};
pub use scoring::{
    predict_clipped, score, score_comparison, ScoreReport, ScoreTable, SequenceScore,
};
pub use standard::{process_tomography, standard_gate_set, state_tomography};
