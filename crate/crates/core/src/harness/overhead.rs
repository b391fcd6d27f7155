//! Scoring-cost comparison between the small model, the target model over the
//! full dataset, and the target model over verification samples only.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scores::CountingOracle;
use crate::scoring::{ModelOracle, ScoreFunction, ScoreKind};
use crate::selection::{self, SelectionConfig};
use crate::toy::{Geometry, SyntheticTask, ToyModel};

#[derive(Debug, Clone, PartialEq)]
pub struct OverheadSpec {
    pub n: usize,
    pub regions: usize,
    pub verify_budget: usize,
    pub prune_rate: f64,
    pub input_dim: usize,
    pub classes: usize,
    pub seed: u64,
}

impl Default for OverheadSpec {
    fn default() -> Self {
        Self {
            n: 10_000,
            regions: 50,
            verify_budget: 10,
            prune_rate: 0.5,
            input_dim: 32,
            classes: 4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostRow {
    /// `small_full`, `target_full` or `target_verify`.
    pub pass: String,
    pub queries: usize,
    /// Estimated floating-point operations for the pass.
    pub flops: f64,
    pub seconds: f64,
    /// Flops relative to `target_full`.
    pub flop_ratio: f64,
    /// Wall time relative to `target_full`.
    pub time_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverheadReport {
    pub rows: Vec<CostRow>,
}

impl OverheadReport {
    pub fn row(&self, pass: &str) -> Option<&CostRow> {
        self.rows.iter().find(|r| r.pass == pass)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(w);
        for r in &self.rows {
            writer
                .serialize(r)
                .map_err(|e| Error::InvalidConfig(format!("csv: {e}")))?;
        }
        writer.flush().map_err(|e| Error::io("<csv>", e))
    }
}

/// Estimated flops to score one sample: a forward pass plus a backward pass
/// costed at twice the forward.
pub fn scoring_flops(model: &ToyModel) -> f64 {
    3.0 * model.forward_flops() as f64
}

pub fn overhead_probe(spec: &OverheadSpec) -> Result<OverheadReport> {
    let task = SyntheticTask::generate_geometry(
        spec.input_dim,
        spec.classes,
        Geometry::default(),
        (0, spec.n, 0),
        spec.seed,
    )?;
    let samples = task.generate()?.train;
    let ids: Vec<String> = samples.iter().map(|s| s.id.clone()).collect();
    let small = ToyModel::small(spec.input_dim, spec.classes, "home", spec.seed)?;
    let target = ToyModel::target(spec.input_dim, spec.classes, "home", spec.seed)?;

    let started = Instant::now();
    let speculative = ScoreFunction::with_model(ScoreKind::Effort, &small)?.score_all(&samples)?;
    let small_secs = started.elapsed().as_secs_f64();

    let started = Instant::now();
    ScoreFunction::with_model(ScoreKind::Effort, &target)?.score_all(&samples)?;
    let target_secs = started.elapsed().as_secs_f64();

    let cfg = SelectionConfig {
        prune_rate: spec.prune_rate,
        regions: spec.regions,
        verify_budget: spec.verify_budget,
        seed: spec.seed,
        ..SelectionConfig::default()
    };
    let oracle = CountingOracle::new(ModelOracle::new(
        ScoreFunction::with_model(ScoreKind::Effort, &target)?,
        &samples,
    ));
    let started = Instant::now();
    selection::staff_select(&ids, &speculative, &oracle, &cfg)?;
    let verify_secs = started.elapsed().as_secs_f64();
    let verify_queries = oracle.queries();

    let n = spec.n;
    let target_flops = scoring_flops(&target) * n as f64;
    let row = |pass: &str, queries: usize, model: &ToyModel, seconds: f64| {
        let flops = scoring_flops(model) * queries as f64;
        CostRow {
            pass: pass.to_string(),
            queries,
            flops,
            seconds,
            flop_ratio: flops / target_flops,
            time_ratio: if target_secs > 0.0 {
                seconds / target_secs
            } else {
                0.0
            },
        }
    };
    Ok(OverheadReport {
        rows: vec![
            row("small_full", n, &small, small_secs),
            row("target_full", n, &target, target_secs),
            row("target_verify", verify_queries, &target, verify_secs),
        ],
    })
}
