//! Sweep configuration, read from a TOML key-value file:
//!
//! ```toml
//! prune_rates = [0.2, 0.5, 0.7, 0.8, 0.9]
//! methods = ["staff", "random", "grand", "el2n", "ccs"]
//! seeds = 20            # or an explicit list: [3, 5, 8]
//! eval_epochs = 10
//! regions = 50
//! verify_budget = 10
//! finetune_epochs = 3
//! phi = "last"          # or "all"
//! topup = true
//!
//! [task]
//! input_dim = 32
//! classes = 4
//! n_pretrain = 3000
//! n_train = 2000
//! n_test = 2000
//!
//! [train]
//! pretrain_epochs = 5
//! batch_size = 32
//! learning_rate = 0.1
//! ```
//!
//! Every key is optional; missing keys take the defaults shown.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::selection::Mode;
use crate::toy::{Geometry, ParamScope};

/// A selection method as run by the harness. Baselines that need scores use
/// the target model after `finetune_epochs` of downstream training, as the
/// methods they stand in for do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Full training set, no pruning.
    Full,
    Staff,
    StaffNoVerify,
    StaffNoSmallModel,
    /// Staff with speculative scores from a small model pretrained on a foreign corpus.
    StaffForeign,
    Random,
    /// Top-k by target effort score (gradient norm).
    Grand,
    /// Top-k by target EL2N.
    El2n,
    /// Equal-budget stratified selection over target EL2N.
    Ccs,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Full,
        Method::Staff,
        Method::StaffNoVerify,
        Method::StaffNoSmallModel,
        Method::StaffForeign,
        Method::Random,
        Method::Grand,
        Method::El2n,
        Method::Ccs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Full => "full",
            Method::Staff => "staff",
            Method::StaffNoVerify => "staff_no_verify",
            Method::StaffNoSmallModel => "staff_no_small_model",
            Method::StaffForeign => "staff_foreign",
            Method::Random => "random",
            Method::Grand => "grand",
            Method::El2n => "el2n",
            Method::Ccs => "ccs",
        }
    }

    /// Selection mode the method runs under.
    pub fn mode(self) -> Mode {
        match self {
            Method::Staff | Method::StaffForeign => Mode::Staff,
            Method::StaffNoVerify => Mode::StaffNoVerify,
            Method::StaffNoSmallModel => Mode::StaffNoSmallModel,
            Method::Random | Method::Full => Mode::Random,
            Method::Grand | Method::El2n => Mode::TopK,
            Method::Ccs => Mode::CcsEqual,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == norm)
            .or(match norm.as_str() {
                "topk" => Some(Method::Grand),
                "ccs_equal" => Some(Method::Ccs),
                "staff_no_small" => Some(Method::StaffNoSmallModel),
                _ => None,
            })
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    Count(u64),
    List(Vec<u64>),
}

impl Seeds {
    pub fn to_vec(&self) -> Vec<u64> {
        match self {
            Seeds::Count(n) => (0..*n).collect(),
            Seeds::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSpec {
    pub input_dim: usize,
    pub classes: usize,
    pub n_pretrain: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub separation: f64,
    pub spread: f64,
    pub shift_angle: f64,
    pub shift_planes: usize,
}

impl Default for TaskSpec {
    fn default() -> Self {
        let g = Geometry::default();
        Self {
            input_dim: 32,
            classes: 4,
            n_pretrain: 3000,
            n_train: 2000,
            n_test: 2000,
            separation: g.separation,
            spread: g.spread,
            shift_angle: g.shift_angle,
            shift_planes: g.shift_planes,
        }
    }
}

impl TaskSpec {
    pub fn geometry(&self) -> Geometry {
        Geometry {
            separation: self.separation,
            spread: self.spread,
            shift_angle: self.shift_angle,
            shift_planes: self.shift_planes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSpec {
    pub pretrain_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for TrainSpec {
    fn default() -> Self {
        Self {
            pretrain_epochs: 5,
            batch_size: 32,
            learning_rate: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub prune_rates: Vec<f64>,
    #[serde(with = "method_names")]
    pub methods: Vec<Method>,
    pub seeds: Seeds,
    pub eval_epochs: usize,
    pub regions: usize,
    pub verify_budget: usize,
    pub finetune_epochs: usize,
    pub phi: ParamScope,
    pub topup: bool,
    pub task: TaskSpec,
    pub train: TrainSpec,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            prune_rates: vec![0.2, 0.5, 0.7, 0.8, 0.9],
            methods: vec![
                Method::Staff,
                Method::Random,
                Method::Grand,
                Method::El2n,
                Method::Ccs,
            ],
            seeds: Seeds::Count(20),
            eval_epochs: 10,
            regions: 50,
            verify_budget: 10,
            finetune_epochs: 3,
            phi: ParamScope::Last,
            topup: true,
            task: TaskSpec::default(),
            train: TrainSpec::default(),
        }
    }
}

mod method_names {
    use super::Method;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(methods: &[Method], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(methods.iter().map(|m| m.as_str()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Method>, D::Error> {
        Vec::<String>::deserialize(d)?
            .into_iter()
            .map(|s| s.parse().map_err(serde::de::Error::custom))
            .collect()
    }
}

impl SweepSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let spec: SweepSpec =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.prune_rates.iter().find(|p| !(0.0..1.0).contains(*p)) {
            return Err(Error::InvalidConfig(format!(
                "prune rate {p} outside [0, 1)"
            )));
        }
        if self.seeds.to_vec().is_empty() {
            return Err(Error::InvalidConfig("at least one seed is required".into()));
        }
        if self.regions == 0 || self.verify_budget == 0 || self.finetune_epochs == 0 {
            return Err(Error::InvalidConfig(
                "regions, verify_budget and finetune_epochs must be positive".into(),
            ));
        }
        if self.task.classes < 2 || self.task.input_dim < 2 {
            return Err(Error::InvalidConfig(
                "task needs input_dim >= 2 and classes >= 2".into(),
            ));
        }
        if self.task.n_train == 0 || self.task.n_test == 0 {
            return Err(Error::InvalidConfig(
                "n_train and n_test must be positive".into(),
            ));
        }
        Ok(())
    }
}
