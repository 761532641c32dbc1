//! Guided against plain backtracking on one simulated run.

use std::io;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::run::{GroundTruth, Tag};
use crate::graph::{AppModel, NodeId};
use crate::log::LogSequence;
use crate::matcher::{match_all, MatchConfig, MatchReport, SegmentStatus, Strategy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    #[serde(rename = "Sum of Logs")]
    pub logs: usize,
    #[serde(rename = "Sum of Nodes")]
    pub nodes: usize,
    #[serde(rename = "Sum of Branch Nodes")]
    pub branch_nodes: usize,
    #[serde(rename = "Guided Time (sec)")]
    pub guided_time: f64,
    #[serde(rename = "Guided Num of Visited Nodes")]
    pub guided_visited: u64,
    #[serde(rename = "Guided Correct?")]
    pub guided_correct: bool,
    #[serde(rename = "Backtracking Time (sec)")]
    pub backtracking_time: f64,
    #[serde(rename = "Backtracking Num of Visited Nodes")]
    pub backtracking_visited: u64,
    #[serde(rename = "Backtracking Correct?")]
    pub backtracking_correct: bool,
}

/// Whether every ground-truth segment was matched to exactly its node sequence.
pub fn agrees_with_truth(report: &MatchReport, truth: &GroundTruth) -> bool {
    let mut got: Vec<(u64, &[NodeId])> = report
        .segments()
        .filter(|s| s.status == SegmentStatus::Matched)
        .map(|s| (s.callback_seq, s.nodes.as_slice()))
        .collect();
    let mut want: Vec<(u64, &[NodeId])> = truth
        .segments()
        .map(|s| (s.callback_seq, s.node_sequence.as_slice()))
        .collect();
    got.sort_unstable();
    want.sort_unstable();
    got == want
}

fn visited(report: &MatchReport) -> u64 {
    report.segments().map(|s| s.visited).sum()
}

/// Match `log` with both strategies and score each against `truth`.
pub fn compare_strategies(model: &AppModel, log: &LogSequence, truth: &GroundTruth) -> ComparisonRow {
    let run = |strategy| {
        let cfg = MatchConfig::with_strategy(strategy);
        let t = Instant::now();
        let report = match_all(model, log, &cfg);
        (report, t.elapsed().as_secs_f64())
    };
    let (guided, guided_time) = run(Strategy::Guided);
    let (baseline, backtracking_time) = run(Strategy::Backtracking);
    ComparisonRow {
        logs: truth.count(Tag::App),
        nodes: model.node_count(),
        branch_nodes: model.branch_node_count(),
        guided_time,
        guided_visited: visited(&guided),
        guided_correct: agrees_with_truth(&guided, truth),
        backtracking_time,
        backtracking_visited: visited(&baseline),
        backtracking_correct: agrees_with_truth(&baseline, truth),
    }
}

pub fn write_rows_csv<W: io::Write>(w: W, rows: &[ComparisonRow]) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// Generator settings of the all-reflective comparison fixture.
pub fn adversarial_params() -> super::gen::GenParams {
    super::gen::GenParams {
        node_budget: 2600,
        branch_fraction: 0.23,
        reflective_fraction: 0.9,
        seed: 0,
        ..Default::default()
    }
}

/// The all-reflective model with a log simulated under full stacks.
pub fn adversarial_case() -> (AppModel, LogSequence, GroundTruth) {
    let model = super::gen::generate_app(&adversarial_params()).expect("feasible parameters");
    let sc = super::run::Scenario {
        k: 32,
        ..Default::default()
    };
    let (log, truth) = super::run::simulate_with(&model, &sc).expect("valid model");
    (model, log, truth)
}
