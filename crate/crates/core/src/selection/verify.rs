use rand::Rng;
use serde::{Deserialize, Serialize};

use super::partition::{partition_regions, Region};
use super::SelectionConfig;
use crate::error::{Error, Result};
use crate::rng::{sample_from, stream, Purpose};
use crate::scores::{ScoreOracle, ScoreTable};

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationOutcome {
    pub region_index: usize,
    pub sampled_ids: Vec<String>,
    /// Summed target score over summed speculative score on the sample;
    /// 1 when the speculative sum is zero.
    pub ratio: f64,
}

/// The members of `region` that verification will score, for a given root seed.
pub fn verification_sample(region: &Region, verify_budget: usize, seed: u64) -> Vec<String> {
    let mut rng = stream(seed, Purpose::Verify, region.index as u32);
    sample_from(
        &mut rng,
        &region.member_ids,
        verify_budget.min(region.len()),
    )
}

/// Scores `min(b_v, |region|)` uniformly drawn members on the target oracle and
/// compares them to their speculative scores. Only the drawn members are queried.
pub fn verify_region<O, R>(
    region: &Region,
    spec: &ScoreTable,
    target: &O,
    verify_budget: usize,
    rng: &mut R,
) -> Result<VerificationOutcome>
where
    O: ScoreOracle + ?Sized,
    R: Rng + ?Sized,
{
    if region.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "region {} is empty and cannot be verified",
            region.index
        )));
    }
    let sampled_ids = sample_from(rng, &region.member_ids, verify_budget.min(region.len()));

    let mut spec_sum = 0.0;
    let mut target_sum = 0.0;
    for id in &sampled_ids {
        spec_sum += spec
            .get(id)
            .ok_or_else(|| Error::MissingScore(id.clone()))?;
        let t = target
            .score(id)
            .and_then(|t| {
                if t.is_finite() && t >= 0.0 {
                    Ok(t)
                } else {
                    Err(Error::InvalidScore {
                        id: id.clone(),
                        value: t,
                    })
                }
            })
            .map_err(|e| Error::VerificationFailed {
                id: id.clone(),
                source: Box::new(e),
            })?;
        target_sum += t;
    }

    let ratio = if spec_sum > 0.0 {
        // overflow only with denormal speculative sums; saturate instead of going infinite
        (target_sum / spec_sum).min(f64::MAX)
    } else {
        1.0
    };
    Ok(VerificationOutcome {
        region_index: region.index,
        sampled_ids,
        ratio,
    })
}

/// One line of a verification plan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub region: usize,
    pub id: String,
}

/// The exact ids a staff run with this config would send to the target model,
/// grouped by region in processing order.
pub fn plan_verification(spec: &ScoreTable, cfg: &SelectionConfig) -> Result<Vec<PlanEntry>> {
    cfg.validate()?;
    let partition = partition_regions(spec, cfg.regions)?;
    let mut plan = Vec::new();
    for region in partition.processing_order() {
        for id in verification_sample(region, cfg.verify_budget, cfg.seed) {
            plan.push(PlanEntry {
                region: region.index,
                id,
            });
        }
    }
    Ok(plan)
}
