//! Synthetic apps, logs with ground truth, and the experiment drivers.

pub mod builder;
pub mod compare;
pub mod depth;
pub mod fixtures;
pub mod gen;
pub mod run;

pub use compare::{adversarial_case, adversarial_params, agrees_with_truth, compare_strategies, write_rows_csv, ComparisonRow};
pub use run::{simulate, simulate_with, GroundTruth, RecordTruth, Scenario, SegmentTruth, SimError, Tag, ThreadTruth};
