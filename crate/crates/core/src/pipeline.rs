//! End-to-end synthetic run: simulate training and test data from a noisy
//! qubit model, estimate it five ways, gauge-fix every estimate to the
//! targets and score them all on held-out sequences.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{
    simulate_counts, DataSet, DEFAULT_TEST_REPETITIONS, DEFAULT_TRAIN_REPETITIONS,
};
use crate::design::{germ_power_design, short_design, test_design, ExperimentDesign, FiducialSet};
use crate::error::Result;
use crate::gauge::{gauge_optimize, GaugeOptions, GaugeReport};
use crate::lgst::{lgst_estimate, LgstDiagnostics};
use crate::mle::{mle_estimate, FitReport, MleOptions};
use crate::model::GateSet;
use crate::scoring::{score_comparison, ScoreTable, DEFAULT_EPSILON};
use crate::standard::standard_gate_set;
use crate::targets::{ideal_targets, noisy_targets, rotate_spam, TARGET_LABELS};

pub const GERM_POWERS: [usize; 7] = [2, 4, 8, 16, 32, 64, 128];

pub const TARGET: &str = "target";
pub const LGST: &str = "lgst";
pub const ML_SHORT: &str = "ml-short";
pub const ML_LONG: &str = "ml-long";
pub const STANDARD: &str = "standard";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoConfig {
    pub seed: u64,
    pub over_rotation: f64,
    pub depolarization: f64,
    /// Rotation (radians, about y) of the true preparation and measurement
    /// away from the ideal frame assumed by standard tomography.
    pub spam_rotation: f64,
    pub n_train: u64,
    pub n_test: u64,
    pub test_length: usize,
    pub num_random: usize,
    pub epsilon: f64,
    pub mle: MleOptions,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            seed: 1,
            over_rotation: 0.01,
            depolarization: 0.005,
            spam_rotation: 0.0,
            n_train: DEFAULT_TRAIN_REPETITIONS,
            n_test: DEFAULT_TEST_REPETITIONS,
            test_length: 100,
            num_random: 5,
            epsilon: DEFAULT_EPSILON,
            mle: MleOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DemoOutput {
    pub config: DemoConfig,
    pub truth: GateSet,
    pub short_design: ExperimentDesign,
    pub long_design: ExperimentDesign,
    pub test_design: ExperimentDesign,
    pub train_data: DataSet,
    pub test_data: DataSet,
    /// Gauge-fixed estimates keyed by name.
    pub estimates: BTreeMap<String, GateSet>,
    pub fits: BTreeMap<String, FitReport>,
    pub gauge: BTreeMap<String, GaugeReport>,
    pub lgst: LgstDiagnostics,
    pub scores: ScoreTable,
}

/// Machine-readable summary of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoSummary {
    pub config: DemoConfig,
    pub design_sizes: BTreeMap<String, usize>,
    pub dataset_sizes: BTreeMap<String, usize>,
    pub lgst: LgstDiagnostics,
    pub fits: BTreeMap<String, FitReport>,
    pub gauge: BTreeMap<String, GaugeReport>,
    pub total_scores: BTreeMap<String, f64>,
}

impl DemoOutput {
    pub fn summary(&self) -> DemoSummary {
        let design_sizes = [
            ("short", self.short_design.len()),
            ("long", self.long_design.len()),
            ("test", self.test_design.len()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        let dataset_sizes = [
            ("train", self.train_data.len()),
            ("test", self.test_data.len()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        DemoSummary {
            config: self.config.clone(),
            design_sizes,
            dataset_sizes,
            lgst: self.lgst,
            fits: self.fits.clone(),
            gauge: self.gauge.clone(),
            total_scores: self.scores.totals.clone(),
        }
    }
}

/// The noisy model data is drawn from.
pub fn demo_truth(config: &DemoConfig) -> GateSet {
    let noisy = noisy_targets(config.over_rotation, config.depolarization);
    if config.spam_rotation == 0.0 {
        noisy
    } else {
        rotate_spam(&noisy, [0.0, 1.0, 0.0], config.spam_rotation)
    }
}

pub fn run_demo(config: &DemoConfig) -> Result<DemoOutput> {
    let labels: Vec<String> = TARGET_LABELS.iter().map(|s| s.to_string()).collect();
    let target = ideal_targets();
    let truth = demo_truth(config);
    let fids = FiducialSet::from_labels(&TARGET_LABELS)?;

    let short = short_design(&labels, &fids)?;
    let long = germ_power_design(&labels, &fids, &GERM_POWERS, Some("G4"))?;
    let test = test_design(&labels, config.test_length, config.num_random, config.seed)?;

    // The short data is the subset of the long run it needs.
    let train_data = simulate_counts(&truth, &long, config.n_train, config.seed)?;
    let short_data = train_data.restrict(&short)?;
    let test_data = simulate_counts(&truth, &test, config.n_test, config.seed.wrapping_add(1))?;

    let (lgst, inter) = lgst_estimate(&short_data, &short, &labels)?;
    let (ml_short, fit_short) = mle_estimate(&lgst, &short_data, &config.mle)?;
    let (ml_long, fit_long) = mle_estimate(&lgst, &train_data, &config.mle)?;
    let standard = standard_gate_set(&short_data, &short, &target, &labels)?;

    let mut estimates = BTreeMap::new();
    let mut gauge = BTreeMap::new();
    let raw = [
        (TARGET, target.clone()),
        (LGST, lgst),
        (ML_SHORT, ml_short),
        (ML_LONG, ml_long),
        (STANDARD, standard),
    ];
    for (name, gs) in raw {
        let fit = gauge_optimize(&gs, &target, &GaugeOptions::default())?;
        gauge.insert(name.to_string(), fit.report());
        estimates.insert(name.to_string(), fit.gate_set);
    }
    let scores = score_comparison(&estimates, &test_data, &test, config.epsilon)?;

    let mut fits = BTreeMap::new();
    fits.insert(ML_SHORT.to_string(), fit_short);
    fits.insert(ML_LONG.to_string(), fit_long);
    Ok(DemoOutput {
        config: config.clone(),
        truth,
        short_design: short,
        long_design: long,
        test_design: test,
        train_data,
        test_data,
        estimates,
        fits,
        gauge,
        lgst: inter.diagnostics(),
        scores,
    })
}
