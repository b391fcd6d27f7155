use super::config::SweepSpec;
use crate::error::Result;
use crate::scores::ScoreTable;
use crate::scoring::{ScoreFunction, ScoreKind};
use crate::toy::{
    finetune, pretrain_family, train, SyntheticTask, TaskData, ToyModel, TrainConfig,
};

/// Everything one seed of a sweep needs: the task splits, the pretrained
/// family members, their downstream-tuned variants, and the score tables the
/// methods select from.
pub struct Family {
    pub seed: u64,
    pub task: SyntheticTask,
    pub data: TaskData,
    /// Pretrained target; every evaluation fine-tunes a copy of it.
    pub target: ToyModel,
    /// Small member after `finetune_epochs` on the downstream train set.
    pub small_tuned: ToyModel,
    /// Small architecture pretrained on the foreign corpus, then tuned like `small_tuned`.
    pub foreign_tuned: ToyModel,
    /// Target after `finetune_epochs` on the downstream train set; scores the baselines.
    pub target_tuned: ToyModel,
    pub train_ids: Vec<String>,
}

/// Score tables over the downstream train set.
pub struct FamilyScores {
    /// Effort on the tuned small model.
    pub speculative: ScoreTable,
    /// Effort on the tuned foreign small model.
    pub foreign: ScoreTable,
    /// Effort on the pretrained target (verification source).
    pub target: ScoreTable,
    /// Effort on the tuned target.
    pub target_tuned_effort: ScoreTable,
    /// EL2N on the tuned target.
    pub target_tuned_el2n: ScoreTable,
}

impl Family {
    pub fn build(spec: &SweepSpec, seed: u64) -> Result<Self> {
        let t = &spec.task;
        let task = SyntheticTask::generate_geometry(
            t.input_dim,
            t.classes,
            t.geometry(),
            (t.n_pretrain, t.n_train, t.n_test),
            seed,
        )?;
        let data = task.generate()?;
        let foreign_corpus = task.generate_foreign(t.geometry(), t.n_pretrain)?;

        let pre = TrainConfig {
            epochs: spec.train.pretrain_epochs,
            batch_size: spec.train.batch_size,
            learning_rate: spec.train.learning_rate,
            seed,
        };
        let (small, target) = pretrain_family(
            ToyModel::small(t.input_dim, t.classes, "home", seed)?,
            ToyModel::target(t.input_dim, t.classes, "home", seed)?,
            &data.pretrain,
            &pre,
        )?;
        let mut foreign = ToyModel::small(t.input_dim, t.classes, "foreign", seed)?;
        train(&mut foreign, &foreign_corpus, &pre, false, 0)?;

        let tune = pre.with_epochs(spec.finetune_epochs);
        let small_tuned = finetune(small.with_scope(spec.phi), &data.train, &tune)?;
        let foreign_tuned = finetune(foreign.with_scope(spec.phi), &data.train, &tune)?;
        let target = target.with_scope(spec.phi);
        let target_tuned = finetune(target.clone(), &data.train, &tune)?;
        let train_ids = data.train.iter().map(|s| s.id.clone()).collect();
        Ok(Self {
            seed,
            task,
            data,
            target,
            small_tuned,
            foreign_tuned,
            target_tuned,
            train_ids,
        })
    }

    pub fn scores(&self) -> Result<FamilyScores> {
        let effort = |m: &ToyModel| {
            ScoreFunction::with_model(ScoreKind::Effort, m)?.score_all(&self.data.train)
        };
        Ok(FamilyScores {
            speculative: effort(&self.small_tuned)?,
            foreign: effort(&self.foreign_tuned)?,
            target: effort(&self.target)?,
            target_tuned_effort: effort(&self.target_tuned)?,
            target_tuned_el2n: ScoreFunction::with_model(ScoreKind::El2n, &self.target_tuned)?
                .score_all(&self.data.train)?,
        })
    }
}
