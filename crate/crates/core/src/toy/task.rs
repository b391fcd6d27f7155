//! Synthetic Gaussian-mixture classification tasks.
//!
//! Each class is one Gaussian cluster. A task carries two mixtures: the
//! pretraining distribution and a downstream distribution derived from it by
//! rotating every class mean through a fixed angle in a set of random planes
//! and re-weighting the class priors. A foreign corpus with independently
//! drawn means stands in for a model family pretrained on different data.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// One labelled sample with a stable id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub features: Vec<f64>,
    pub label: usize,
}

/// Class-conditional Gaussians plus class priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixture {
    pub means: Vec<Vec<f64>>,
    /// Row-major `d × d` covariance per class.
    pub covariances: Vec<Vec<f64>>,
    pub priors: Vec<f64>,
}

impl Mixture {
    pub fn classes(&self) -> usize {
        self.means.len()
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let c = self.means.len();
        if c == 0 || self.covariances.len() != c || self.priors.len() != c {
            return Err(Error::InvalidConfig(
                "mixture component counts disagree".into(),
            ));
        }
        if self.means.iter().any(|m| m.len() != dim)
            || self.covariances.iter().any(|s| s.len() != dim * dim)
        {
            return Err(Error::InvalidConfig(format!(
                "mixture dimension is not {dim}"
            )));
        }
        if self.priors.iter().any(|p| !p.is_finite() || *p < 0.0)
            || self.priors.iter().sum::<f64>() <= 0.0
        {
            return Err(Error::InvalidConfig(
                "priors must be non-negative with positive sum".into(),
            ));
        }
        Ok(())
    }

    /// Cholesky factors of the class covariances.
    fn factors(&self, dim: usize) -> Result<Vec<DMatrix<f64>>> {
        self.covariances
            .iter()
            .enumerate()
            .map(|(c, cov)| {
                let m = DMatrix::from_row_slice(dim, dim, cov);
                if (&m - m.transpose()).abs().max() > 1e-12 {
                    return Err(Error::NotPositiveDefinite(c));
                }
                m.cholesky()
                    .map(|ch| ch.l())
                    .ok_or(Error::NotPositiveDefinite(c))
            })
            .collect()
    }

    /// Draws `n` samples with ids `{prefix}-{index:06}`.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        n: usize,
        prefix: &str,
        rng: &mut R,
    ) -> Result<Vec<SampleRecord>> {
        let dim = self.means.first().map(Vec::len).unwrap_or(0);
        self.validate(dim)?;
        let factors = self.factors(dim)?;
        let labels = WeightedIndex::new(&self.priors)
            .map_err(|e| Error::InvalidConfig(format!("priors: {e}")))?;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let label = labels.sample(rng);
            let z = DVector::from_iterator(dim, (0..dim).map(|_| StandardNormal.sample(&mut *rng)));
            let x = &factors[label] * z;
            let features = x
                .iter()
                .zip(&self.means[label])
                .map(|(a, m)| a + m)
                .collect();
            out.push(SampleRecord {
                id: format!("{prefix}-{i:06}"),
                features,
                label,
            });
        }
        Ok(out)
    }
}

/// A pretraining distribution, a shifted downstream distribution, and sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTask {
    pub input_dim: usize,
    pub classes: usize,
    pub pretrain: Mixture,
    pub downstream: Mixture,
    pub n_pretrain: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

/// Geometry knobs for [`SyntheticTask::generate_geometry`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// Standard deviation of the class means around the origin.
    pub separation: f64,
    /// Isotropic within-class standard deviation.
    pub spread: f64,
    /// Rotation applied to downstream means, radians.
    pub shift_angle: f64,
    /// Number of random planes the rotation acts in.
    pub shift_planes: usize,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            separation: 0.6,
            spread: 1.0,
            shift_angle: 1.2,
            shift_planes: 8,
        }
    }
}

/// Generated splits of a task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskData {
    pub pretrain: Vec<SampleRecord>,
    pub train: Vec<SampleRecord>,
    pub test: Vec<SampleRecord>,
}

impl SyntheticTask {
    /// Builds a task with random means drawn from the geometry stream of
    /// `seed`. Downstream means are the pretrain means rotated by
    /// `shift_angle` in `shift_planes` random coordinate planes; downstream
    /// priors are a linear ramp instead of uniform.
    pub fn generate_geometry(
        input_dim: usize,
        classes: usize,
        geometry: Geometry,
        sizes: (usize, usize, usize),
        seed: u64,
    ) -> Result<Self> {
        if input_dim < 2 || classes < 2 {
            return Err(Error::InvalidConfig(
                "need input_dim >= 2 and classes >= 2".into(),
            ));
        }
        let mut rng = stream(seed, Purpose::TaskGeometry, 0);
        let pretrain = random_mixture(input_dim, classes, geometry, &mut rng);

        let mut rotated = pretrain.means.clone();
        for _ in 0..geometry.shift_planes {
            let a = rng.random_range(0..input_dim);
            let mut b = rng.random_range(0..input_dim - 1);
            if b >= a {
                b += 1;
            }
            let (s, c) = geometry.shift_angle.sin_cos();
            for m in &mut rotated {
                let (x, y) = (m[a], m[b]);
                m[a] = c * x - s * y;
                m[b] = s * x + c * y;
            }
        }
        let ramp: Vec<f64> = (0..classes).map(|i| (i + 1) as f64).collect();
        let total: f64 = ramp.iter().sum();
        let downstream = Mixture {
            means: rotated,
            covariances: pretrain.covariances.clone(),
            priors: ramp.iter().map(|r| r / total).collect(),
        };
        Ok(Self {
            input_dim,
            classes,
            pretrain,
            downstream,
            n_pretrain: sizes.0,
            n_train: sizes.1,
            n_test: sizes.2,
            seed,
        })
    }

    /// A pretraining corpus for a different model family: same dimension,
    /// class count and spread, independently drawn means.
    pub fn foreign_corpus(&self, geometry: Geometry) -> Mixture {
        let mut rng = stream(self.seed, Purpose::TaskGeometry, 1);
        random_mixture(self.input_dim, self.classes, geometry, &mut rng)
    }

    /// Draws the pretraining set, downstream training set and downstream test set.
    pub fn generate(&self) -> Result<TaskData> {
        self.pretrain.validate(self.input_dim)?;
        self.downstream.validate(self.input_dim)?;
        Ok(TaskData {
            pretrain: self.pretrain.sample(
                self.n_pretrain,
                "pre",
                &mut stream(self.seed, Purpose::TaskSamples, 0),
            )?,
            train: self.downstream.sample(
                self.n_train,
                "train",
                &mut stream(self.seed, Purpose::TaskSamples, 1),
            )?,
            test: self.downstream.sample(
                self.n_test,
                "test",
                &mut stream(self.seed, Purpose::TaskSamples, 2),
            )?,
        })
    }

    /// Draws `n` samples of the foreign corpus.
    pub fn generate_foreign(&self, geometry: Geometry, n: usize) -> Result<Vec<SampleRecord>> {
        self.foreign_corpus(geometry).sample(
            n,
            "foreign",
            &mut stream(self.seed, Purpose::TaskSamples, 3),
        )
    }
}

fn random_mixture<R: Rng + ?Sized>(
    dim: usize,
    classes: usize,
    g: Geometry,
    rng: &mut R,
) -> Mixture {
    let means = (0..classes)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut *rng);
                    z * g.separation
                })
                .collect()
        })
        .collect();
    let mut cov = vec![0.0; dim * dim];
    for i in 0..dim {
        cov[i * dim + i] = g.spread * g.spread;
    }
    Mixture {
        means,
        covariances: vec![cov; classes],
        priors: vec![1.0 / classes as f64; classes],
    }
}

/// Reads samples from JSON Lines (`{"id":..,"features":[..],"label":..}`).
pub fn load_samples(path: impl AsRef<Path>) -> Result<Vec<SampleRecord>> {
    let path = path.as_ref();
    let origin = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SampleRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: origin.clone(),
            line: n + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn save_samples(path: impl AsRef<Path>, samples: &[SampleRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        for s in samples {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}
