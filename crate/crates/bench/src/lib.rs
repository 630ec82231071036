//! Shared fixtures for the benchmarks.

use gstkit::design::{germ_power_design, short_design, test_design, FiducialSet};
use gstkit::pipeline::GERM_POWERS;
use gstkit::targets::{noisy_targets, TARGET_LABELS};
use gstkit::{simulate_counts, DataSet, ExperimentDesign, GateSet};

pub struct Fixture {
    pub labels: Vec<String>,
    pub truth: GateSet,
    pub short: ExperimentDesign,
    pub long: ExperimentDesign,
    pub test: ExperimentDesign,
    pub short_data: DataSet,
    pub long_data: DataSet,
    pub test_data: DataSet,
}

/// The default synthetic experiment: 0.01 rad over-rotation, 0.5% depolarization.
pub fn fixture() -> Fixture {
    let labels: Vec<String> = TARGET_LABELS.iter().map(|s| s.to_string()).collect();
    let fids = FiducialSet::from_labels(&labels).expect("gate fiducials");
    let truth = noisy_targets(0.01, 0.005);
    let short = short_design(&labels, &fids).expect("short design");
    let long = germ_power_design(&labels, &fids, &GERM_POWERS, Some("G4")).expect("long design");
    let test = test_design(&labels, 100, 5, 1).expect("test design");
    let long_data = simulate_counts(&truth, &long, 1900, 1).expect("simulate");
    let short_data = long_data.restrict(&short).expect("restrict");
    let test_data = simulate_counts(&truth, &test, 950, 2).expect("simulate");
    Fixture {
        labels,
        truth,
        short,
        long,
        test,
        short_data,
        long_data,
        test_data,
    }
}
