//! Coreset selection: region partitioning, target-model verification,
//! verification-scaled budget allocation, the selection loop, and the
//! baselines and ablations built from the same pieces.

mod budget;
mod engine;
mod partition;
mod verify;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use budget::allocate_budget;
pub use engine::{ablation_select, baseline_select, select, staff_select};
pub use partition::{partition_regions, Region, RegionPartition};
pub use verify::{
    plan_verification, verification_sample, verify_region, PlanEntry, VerificationOutcome,
};

/// Selection strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Speculative scores, target verification, scaled budgets.
    Staff,
    /// Stratified selection on speculative scores with every ratio fixed to 1.
    StaffNoVerify,
    /// Stratified selection on target scores (no small model).
    StaffNoSmallModel,
    /// Uniform sample of the budget.
    Random,
    /// Highest scores first.
    #[serde(rename = "topk")]
    TopK,
    /// Equal budget per remaining region (coverage-centric).
    CcsEqual,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Staff => "staff",
            Mode::StaffNoVerify => "staff_no_verify",
            Mode::StaffNoSmallModel => "staff_no_small_model",
            Mode::Random => "random",
            Mode::TopK => "topk",
            Mode::CcsEqual => "ccs_equal",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.replace('-', "_").as_str() {
            "staff" => Mode::Staff,
            "staff_no_verify" => Mode::StaffNoVerify,
            "staff_no_small" | "staff_no_small_model" => Mode::StaffNoSmallModel,
            "random" => Mode::Random,
            "topk" => Mode::TopK,
            "ccs" | "ccs_equal" => Mode::CcsEqual,
            other => return Err(Error::InvalidConfig(format!("unknown mode {other:?}"))),
        })
    }
}

/// Parameters of one selection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Fraction of the dataset to drop, in `[0, 1)`.
    pub prune_rate: f64,
    /// Number of equal-width score regions.
    pub regions: usize,
    /// Samples per region scored by the target model.
    pub verify_budget: usize,
    /// Epochs of small-model fine-tuning before scoring.
    pub finetune_epochs: usize,
    pub seed: u64,
    pub mode: Mode,
    /// Fill any shortfall left by flooring with uniformly drawn unselected samples.
    pub topup: bool,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            prune_rate: 0.5,
            regions: 50,
            verify_budget: 10,
            finetune_epochs: 3,
            seed: 0,
            mode: Mode::Staff,
            topup: true,
        }
    }
}

impl SelectionConfig {
    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.prune_rate.is_nan() || self.prune_rate < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "prune rate must be in [0, 1), got {}",
                self.prune_rate
            )));
        }
        if self.prune_rate >= 1.0 {
            return Err(Error::EmptyBudget(self.prune_rate));
        }
        if self.regions == 0 {
            return Err(Error::InvalidConfig("regions must be positive".into()));
        }
        if self.verify_budget == 0 {
            return Err(Error::InvalidConfig(
                "verify budget must be positive".into(),
            ));
        }
        if self.finetune_epochs == 0 {
            return Err(Error::InvalidConfig(
                "finetune epochs must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Coreset size budget for a dataset of `n` samples.
    pub fn budget(&self, n: usize) -> Result<usize> {
        self.validate()?;
        Ok(coreset_budget(n, self.prune_rate))
    }
}

/// `⌊n·(1 − p)⌋`, tolerant of the representation error of decimal rates
/// (`1000 · (1 − 0.9)` evaluates to `99.999…` in binary floating point).
pub fn coreset_budget(n: usize, prune_rate: f64) -> usize {
    let exact = n as f64 * (1.0 - prune_rate);
    let m = (exact + 1e-9 * (n.max(1) as f64)).floor();
    (m.max(0.0) as usize).min(n)
}

/// Per-region entry of the selection audit, in processing order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub region: usize,
    pub lo: f64,
    pub hi: f64,
    pub size: usize,
    pub verified_ids: Vec<String>,
    /// Verification ratio used for this region's budget.
    pub v: f64,
    pub m_b: usize,
    pub n_taken: usize,
}

/// Everything needed to explain how a coreset came about.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Audit {
    /// Label used to join audits with metrics; the mode name unless a caller renames it.
    pub method: String,
    pub mode: Mode,
    pub prune_rate: f64,
    pub seed: u64,
    pub regions: usize,
    pub verify_budget: usize,
    pub topup: bool,
    pub dataset_size: usize,
    pub budget: usize,
    pub selected: usize,
    pub target_queries: usize,
    pub topup_added: usize,
    /// Region indices in processing order.
    pub order: Vec<usize>,
    pub records: Vec<RegionRecord>,
}

impl Audit {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("audit serializes");
        s.push('\n');
        s
    }
}

/// A selected subset plus its audit trail.
#[derive(Debug, Clone, PartialEq)]
pub struct Coreset {
    pub selected_ids: Vec<String>,
    pub budget: usize,
    pub audit: Audit,
}

impl Coreset {
    pub fn len(&self) -> usize {
        self.selected_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected_ids.is_empty()
    }

    /// Newline-separated ids with a trailing newline.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for id in &self.selected_ids {
            out.push_str(id);
            out.push('\n');
        }
        out
    }
}
