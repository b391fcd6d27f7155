use std::collections::HashSet;

use super::config::{Method, SweepSpec};
use super::family::{Family, FamilyScores};
use super::report::{sort_rows, MetricRow};
use crate::error::{Error, Result};
use crate::scores::CountingOracle;
use crate::scoring::{ModelOracle, ScoreFunction, ScoreKind};
use crate::selection::{self, Audit, Coreset, SelectionConfig};
use crate::toy::{finetune, TrainConfig};

pub const TEST_ACCURACY: &str = "test_accuracy";
pub const TEST_LOSS: &str = "test_loss";
pub const CORESET_SIZE: &str = "coreset_size";
/// Target-model score evaluations during selection (verification queries).
pub const TARGET_QUERIES: &str = "target_queries";
/// All target-model score evaluations, including full-dataset scoring passes.
pub const TARGET_SCORED: &str = "target_scored";

#[derive(Debug, Clone, Default)]
pub struct SweepResult {
    /// Rows in canonical (method, prune rate, seed, metric) order.
    pub rows: Vec<MetricRow>,
    pub audits: Vec<Audit>,
}

impl SweepResult {
    /// Values of one metric for one (method, rate) cell, in seed order.
    pub fn values(&self, method: Method, prune_rate: f64, metric: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| {
                r.method == method.as_str() && r.prune_rate == prune_rate && r.metric == metric
            })
            .map(|r| r.value)
            .collect()
    }
}

fn selection_config(
    spec: &SweepSpec,
    method: Method,
    prune_rate: f64,
    seed: u64,
) -> SelectionConfig {
    SelectionConfig {
        prune_rate,
        regions: spec.regions,
        verify_budget: spec.verify_budget,
        finetune_epochs: spec.finetune_epochs,
        seed,
        mode: method.mode(),
        topup: spec.topup,
    }
}

/// Runs one method at one pruning rate on a prepared family.
/// Returns the coreset and the number of target-model score evaluations it cost.
pub fn select_for(
    spec: &SweepSpec,
    family: &Family,
    scores: &FamilyScores,
    method: Method,
    prune_rate: f64,
) -> Result<(Coreset, usize)> {
    let cfg = selection_config(spec, method, prune_rate, family.seed);
    let ids = &family.train_ids;
    let n = ids.len();
    let staff = |spec_scores| -> Result<(Coreset, usize)> {
        let oracle = CountingOracle::new(ModelOracle::new(
            ScoreFunction::with_model(ScoreKind::Effort, &family.target)?,
            &family.data.train,
        ));
        let c = selection::staff_select(ids, spec_scores, &oracle, &cfg)?;
        Ok((c, oracle.queries()))
    };
    let (mut coreset, scored) = match method {
        Method::Staff => staff(&scores.speculative)?,
        Method::StaffForeign => staff(&scores.foreign)?,
        Method::StaffNoVerify => (
            selection::ablation_select(ids, &scores.speculative, &cfg)?,
            0,
        ),
        Method::StaffNoSmallModel => (selection::ablation_select(ids, &scores.target, &cfg)?, n),
        Method::Random => (
            selection::baseline_select(ids, &scores.speculative, &cfg)?,
            0,
        ),
        Method::Grand => (
            selection::baseline_select(ids, &scores.target_tuned_effort, &cfg)?,
            n,
        ),
        Method::El2n => (
            selection::baseline_select(ids, &scores.target_tuned_el2n, &cfg)?,
            n,
        ),
        Method::Ccs => (
            selection::baseline_select(ids, &scores.target_tuned_el2n, &cfg)?,
            n,
        ),
        Method::Full => {
            let cfg = selection_config(spec, Method::Full, 0.0, family.seed);
            (
                selection::baseline_select(ids, &scores.speculative, &cfg)?,
                0,
            )
        }
    };
    coreset.audit.method = method.as_str().to_string();
    Ok((coreset, scored))
}

/// Fine-tunes a copy of the pretrained target on the coreset (kept in dataset
/// order) and returns test accuracy and loss.
pub fn evaluate(spec: &SweepSpec, family: &Family, selected: &[String]) -> Result<(f64, f64)> {
    let chosen: HashSet<&str> = selected.iter().map(String::as_str).collect();
    let subset: Vec<_> = family
        .data
        .train
        .iter()
        .filter(|s| chosen.contains(s.id.as_str()))
        .cloned()
        .collect();
    let cfg = TrainConfig {
        epochs: spec.eval_epochs,
        batch_size: spec.train.batch_size,
        learning_rate: spec.train.learning_rate,
        seed: family.seed,
    };
    let model = finetune(family.target.clone(), &subset, &cfg)?;
    model.evaluate(&family.data.test)
}

fn cell<T>(method: Method, rate: f64, seed: u64, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Cell {
        cell: format!("method={method} prune_rate={rate} seed={seed}"),
        source: Box::new(e),
    })
}

fn run_family(
    spec: &SweepSpec,
    seed: u64,
    methods: &[Method],
    out: &mut SweepResult,
) -> Result<()> {
    let family = cell(Method::Full, 0.0, seed, Family::build(spec, seed))?;
    let scores = cell(Method::Full, 0.0, seed, family.scores())?;

    let mut grid: Vec<(Method, f64)> = vec![(Method::Full, 0.0)];
    for &m in methods.iter().filter(|m| **m != Method::Full) {
        for &p in &spec.prune_rates {
            grid.push((m, p));
        }
    }
    for (method, rate) in grid {
        let (coreset, scored) = cell(
            method,
            rate,
            seed,
            select_for(spec, &family, &scores, method, rate),
        )?;
        let (acc, loss) = cell(
            method,
            rate,
            seed,
            evaluate(spec, &family, &coreset.selected_ids),
        )?;
        let name = method.as_str();
        out.rows.extend([
            MetricRow::new(name, rate, seed, TEST_ACCURACY, acc),
            MetricRow::new(name, rate, seed, TEST_LOSS, loss),
            MetricRow::new(name, rate, seed, CORESET_SIZE, coreset.len() as f64),
            MetricRow::new(
                name,
                rate,
                seed,
                TARGET_QUERIES,
                coreset.audit.target_queries as f64,
            ),
            MetricRow::new(name, rate, seed, TARGET_SCORED, scored as f64),
        ]);
        out.audits.push(coreset.audit);
    }
    Ok(())
}

fn run(spec: &SweepSpec, methods: &[Method]) -> Result<SweepResult> {
    spec.validate()?;
    let mut out = SweepResult::default();
    for seed in spec.seeds.to_vec() {
        run_family(spec, seed, methods, &mut out)?;
    }
    sort_rows(&mut out.rows);
    out.audits.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(a.prune_rate.total_cmp(&b.prune_rate))
            .then(a.seed.cmp(&b.seed))
    });
    Ok(out)
}

/// Every configured method at every pruning rate and seed, plus the
/// full-dataset reference (`method = full`, `prune_rate = 0`) per seed.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    run(spec, &spec.methods)
}

/// The speculative pipeline and its three ablations over the sweep grid.
pub const ABLATIONS: [Method; 4] = [
    Method::Staff,
    Method::StaffNoVerify,
    Method::StaffNoSmallModel,
    Method::StaffForeign,
];

pub fn run_ablations(spec: &SweepSpec) -> Result<SweepResult> {
    run(spec, &ABLATIONS)
}
