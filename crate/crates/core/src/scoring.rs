//! Per-sample score functions.
//!
//! The effort score of a sample is the L2 norm of its loss gradient over the
//! learnable parameters φ: how far one step on that sample would move the
//! model. EL2N is the L2 distance between the predicted distribution and the
//! one-hot label. Scores for a whole dataset are computed sample by sample in
//! input order.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scores::{ScoreOracle, ScoreTable};
use crate::toy::{SampleRecord, ToyModel};

/// Models that can report a per-sample loss gradient over their learnable subset.
pub trait PerSampleGradient<S: ?Sized> {
    fn learnable_gradient(&self, sample: &S) -> Result<Vec<f64>>;
}

impl PerSampleGradient<SampleRecord> for ToyModel {
    fn learnable_gradient(&self, sample: &SampleRecord) -> Result<Vec<f64>> {
        ToyModel::learnable_gradient(self, sample)
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖∇_φ L(sample)‖₂`.
pub fn effort_score<M, S>(model: &M, sample: &S) -> Result<f64>
where
    M: PerSampleGradient<S> + ?Sized,
    S: ?Sized,
{
    let grad = model.learnable_gradient(sample)?;
    let score = l2_norm(&grad);
    if !score.is_finite() {
        return Err(Error::NumericalInstability(format!(
            "gradient norm is {score}"
        )));
    }
    Ok(score)
}

/// `‖softmax(model(x)) − onehot(y)‖₂`, at most √2.
pub fn el2n_score(model: &ToyModel, sample: &SampleRecord) -> Result<f64> {
    let probs = model.forward(&sample.features)?;
    if sample.label >= probs.len() {
        return Err(Error::DimensionMismatch {
            expected: probs.len(),
            actual: sample.label + 1,
        });
    }
    let err: Vec<f64> = probs
        .iter()
        .enumerate()
        .map(|(c, p)| p - f64::from(u8::from(c == sample.label)))
        .collect();
    let score = l2_norm(&err);
    if !score.is_finite() {
        return Err(Error::NumericalInstability(format!("EL2N is {score}")));
    }
    Ok(score)
}

/// Which score function to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScoreKind {
    Effort,
    El2n,
    FileBacked,
    /// Reserved; not implemented.
    Influence,
    /// Reserved; not implemented.
    Importance,
}

impl FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "effort" => ScoreKind::Effort,
            "el2n" => ScoreKind::El2n,
            "file" | "file_backed" => ScoreKind::FileBacked,
            "influence" => ScoreKind::Influence,
            "importance" => ScoreKind::Importance,
            other => return Err(Error::InvalidConfig(format!("unknown scorer {other:?}"))),
        })
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreKind::Effort => "effort",
            ScoreKind::El2n => "el2n",
            ScoreKind::FileBacked => "file_backed",
            ScoreKind::Influence => "influence",
            ScoreKind::Importance => "importance",
        })
    }
}

/// A score function bound to what it needs: a model for the model-based kinds,
/// a loaded table for the file-backed kind.
#[derive(Debug, Clone, Copy)]
pub enum ScoreFunction<'a> {
    Effort(&'a ToyModel),
    El2n(&'a ToyModel),
    FileBacked(&'a ScoreTable),
}

impl<'a> ScoreFunction<'a> {
    /// Binds a model-based kind to `model`. File-backed and reserved kinds are rejected.
    pub fn with_model(kind: ScoreKind, model: &'a ToyModel) -> Result<Self> {
        match kind {
            ScoreKind::Effort => Ok(ScoreFunction::Effort(model)),
            ScoreKind::El2n => Ok(ScoreFunction::El2n(model)),
            ScoreKind::FileBacked => Err(Error::InvalidConfig(
                "file-backed scoring needs a score table, not a model".into(),
            )),
            ScoreKind::Influence => Err(Error::NotImplemented("influence score")),
            ScoreKind::Importance => Err(Error::NotImplemented("importance score")),
        }
    }

    pub fn kind(&self) -> ScoreKind {
        match self {
            ScoreFunction::Effort(_) => ScoreKind::Effort,
            ScoreFunction::El2n(_) => ScoreKind::El2n,
            ScoreFunction::FileBacked(_) => ScoreKind::FileBacked,
        }
    }

    pub fn score(&self, sample: &SampleRecord) -> Result<f64> {
        match self {
            ScoreFunction::Effort(m) => effort_score(*m, sample),
            ScoreFunction::El2n(m) => el2n_score(m, sample),
            ScoreFunction::FileBacked(t) => t
                .get(&sample.id)
                .ok_or_else(|| Error::MissingScore(sample.id.clone())),
        }
    }

    /// Scores every sample, in input order.
    pub fn score_all(&self, samples: &[SampleRecord]) -> Result<ScoreTable> {
        let mut table = ScoreTable::new();
        for s in samples {
            table.insert(s.id.clone(), self.score(s)?)?;
        }
        Ok(table)
    }
}

/// Answers score queries by evaluating a score function on demand.
pub struct ModelOracle<'a> {
    function: ScoreFunction<'a>,
    samples: HashMap<&'a str, &'a SampleRecord>,
}

impl<'a> ModelOracle<'a> {
    pub fn new(function: ScoreFunction<'a>, samples: &'a [SampleRecord]) -> Self {
        Self {
            function,
            samples: samples.iter().map(|s| (s.id.as_str(), s)).collect(),
        }
    }
}

impl ScoreOracle for ModelOracle<'_> {
    fn score(&self, id: &str) -> Result<f64> {
        let sample = self
            .samples
            .get(id)
            .ok_or_else(|| Error::MissingScore(id.to_string()))?;
        self.function.score(sample)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use crate::toy::{ParamScope, TrainConfig};
    use rand::Rng;

    /// `y_hat = w·x`, loss `(y_hat − y)²`, learnable `w`.
    struct Linear {
        w: f64,
    }

    impl PerSampleGradient<(f64, f64)> for Linear {
        fn learnable_gradient(&self, &(x, y): &(f64, f64)) -> Result<Vec<f64>> {
            Ok(vec![2.0 * (self.w * x - y) * x])
        }
    }

    #[test]
    fn linear_squared_loss_closed_form() {
        assert_eq!(effort_score(&Linear { w: 0.0 }, &(1.0, 1.0)).unwrap(), 2.0);
        assert_eq!(effort_score(&Linear { w: 1.0 }, &(1.0, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn stationary_point_scores_zero() {
        // zero output weights and a bias that matches the label exactly
        // cannot reach zero loss under softmax, so use a one-hot confident model
        let mut m = ToyModel::small(2, 2, "f", 0).unwrap();
        let last = m.layers.len() - 1;
        m.layers[last].weights.iter_mut().for_each(|w| *w = 0.0);
        m.layers[last].bias = vec![800.0, -800.0];
        let s = SampleRecord {
            id: "a".into(),
            features: vec![0.1, 0.2],
            label: 0,
        };
        assert_eq!(effort_score(&m, &s).unwrap(), 0.0);
        assert_eq!(el2n_score(&m, &s).unwrap(), 0.0);
    }

    #[test]
    fn el2n_hand_values() {
        let mut m = ToyModel::small(2, 2, "f", 0).unwrap();
        let last = m.layers.len() - 1;
        m.layers[last].weights.iter_mut().for_each(|w| *w = 0.0);
        let s = SampleRecord {
            id: "a".into(),
            features: vec![1.0, 1.0],
            label: 0,
        };
        assert!((el2n_score(&m, &s).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn el2n_bounded_by_sqrt_two() {
        let mut rng = stream(1, Purpose::TaskSamples, 0);
        for seed in 0..20 {
            let mut m = ToyModel::small(4, 5, "f", seed).unwrap();
            let last = m.layers.len() - 1;
            m.layers[last].weights.iter_mut().for_each(|w| *w *= 50.0);
            for _ in 0..50 {
                let s = SampleRecord {
                    id: "x".into(),
                    features: (0..4).map(|_| rng.random_range(-3.0..3.0)).collect(),
                    label: rng.random_range(0..5),
                };
                let v = el2n_score(&m, &s).unwrap();
                assert!((0.0..=2f64.sqrt() + 1e-12).contains(&v));
            }
        }
    }

    #[test]
    fn effort_scope_excludes_frozen_layers() {
        // changing a frozen layer changes the score only through the forward
        // path, never by adding its own gradient entries
        let m = ToyModel::target(4, 3, "f", 1).unwrap();
        let s = SampleRecord {
            id: "x".into(),
            features: vec![0.5, -0.5, 1.0, 0.0],
            label: 1,
        };
        let last_only = m.learnable_gradient(&s).unwrap();
        assert_eq!(last_only.len(), 32 * 3 + 3);
        let all = m
            .clone()
            .with_scope(ParamScope::All)
            .learnable_gradient(&s)
            .unwrap();
        assert_eq!(all.len(), m.param_count());
        assert!(effort_score(&m, &s).unwrap() <= l2_norm(&all));
    }

    #[test]
    fn reserved_kinds_rejected() {
        let m = ToyModel::small(2, 2, "f", 0).unwrap();
        for k in ["influence", "importance"] {
            let kind: ScoreKind = k.parse().unwrap();
            assert!(matches!(
                ScoreFunction::with_model(kind, &m),
                Err(Error::NotImplemented(_))
            ));
        }
        assert!(ScoreFunction::with_model(ScoreKind::FileBacked, &m).is_err());
    }

    #[test]
    fn score_all_is_ordered_and_matches_oracle() {
        let task = crate::toy::SyntheticTask::generate_geometry(
            6,
            3,
            crate::toy::Geometry::default(),
            (0, 30, 0),
            2,
        )
        .unwrap();
        let data = task.generate().unwrap();
        let m = crate::toy::finetune(
            ToyModel::small(6, 3, "f", 0).unwrap(),
            &data.train,
            &TrainConfig::default(),
        )
        .unwrap();
        let f = ScoreFunction::with_model(ScoreKind::Effort, &m).unwrap();
        let table = f.score_all(&data.train).unwrap();
        let ids: Vec<&str> = data.train.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(table.ids(), ids.as_slice());
        let oracle = ModelOracle::new(f, &data.train);
        for (id, v) in table.iter() {
            assert_eq!(oracle.score(id).unwrap(), v);
        }
        assert!(oracle.score("nope").is_err());
        let el2n = ScoreFunction::with_model(ScoreKind::El2n, &m)
            .unwrap()
            .score_all(&data.train)
            .unwrap();
        assert_eq!(el2n.ids(), table.ids());
        assert_ne!(el2n.scores(), table.scores());
    }

    #[test]
    fn overflowing_gradient_is_instability() {
        struct Huge;
        impl PerSampleGradient<()> for Huge {
            fn learnable_gradient(&self, _: &()) -> Result<Vec<f64>> {
                Ok(vec![1e200, 1e200])
            }
        }
        assert!(matches!(
            effort_score(&Huge, &()),
            Err(Error::NumericalInstability(_))
        ));
        assert_eq!(l2_norm(&[3.0, 4.0]), 5.0);
    }
}
