use std::collections::HashSet;

use super::budget::allocate_budget;
use super::partition::partition_regions;
use super::verify::verify_region;
use super::{Audit, Coreset, Mode, RegionRecord, SelectionConfig};
use crate::error::{Error, Result};
use crate::rng::{sample_from, stream, Purpose};
use crate::scores::{file_oracle, ScoreOracle, ScoreTable};

/// Where a region's budget ratio comes from.
enum Ratio<'a> {
    Verified(&'a dyn ScoreOracle),
    /// Every ratio is 1: equal share of the remaining budget per region.
    Unit,
}

fn check_ids(dataset_ids: &[String]) -> Result<()> {
    if dataset_ids.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut seen = HashSet::with_capacity(dataset_ids.len());
    for id in dataset_ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateId(id.clone()));
        }
    }
    Ok(())
}

fn empty_audit(cfg: &SelectionConfig, n: usize, m: usize) -> Audit {
    Audit {
        method: cfg.mode.as_str().to_string(),
        mode: cfg.mode,
        prune_rate: cfg.prune_rate,
        seed: cfg.seed,
        regions: cfg.regions,
        verify_budget: cfg.verify_budget,
        topup: cfg.topup,
        dataset_size: n,
        budget: m,
        selected: 0,
        target_queries: 0,
        topup_added: 0,
        order: Vec::new(),
        records: Vec::new(),
    }
}

/// The region loop shared by staff, its ablations, and the equal-budget baseline.
fn stratified(
    dataset_ids: &[String],
    partition_scores: &ScoreTable,
    ratio: Ratio<'_>,
    cfg: &SelectionConfig,
) -> Result<Coreset> {
    check_ids(dataset_ids)?;
    let m = cfg.budget(dataset_ids.len())?;
    let table = partition_scores.restrict(dataset_ids)?;
    let partition = partition_regions(&table, cfg.regions)?;
    let order = partition.processing_order();

    let mut audit = empty_audit(cfg, dataset_ids.len(), m);
    let mut selected: Vec<String> = Vec::with_capacity(m);
    let mut remaining = order.len();

    for region in order {
        let (verified_ids, v) = match ratio {
            Ratio::Verified(target) => {
                let mut rng = stream(cfg.seed, Purpose::Verify, region.index as u32);
                let out = verify_region(region, &table, target, cfg.verify_budget, &mut rng)?;
                audit.target_queries += out.sampled_ids.len();
                (out.sampled_ids, out.ratio)
            }
            Ratio::Unit => (Vec::new(), 1.0),
        };
        let m_b = allocate_budget(m, selected.len(), v, remaining);
        let take = m_b.min(region.len());
        let mut rng = stream(cfg.seed, Purpose::RegionSample, region.index as u32);
        selected.extend(sample_from(&mut rng, &region.member_ids, take));
        remaining -= 1;

        audit.order.push(region.index);
        audit.records.push(RegionRecord {
            region: region.index,
            lo: region.lo,
            hi: region.hi,
            size: region.len(),
            verified_ids,
            v,
            m_b,
            n_taken: take,
        });
    }

    finish(dataset_ids, selected, m, cfg, audit)
}

/// Applies the top-up rule and seals the audit.
fn finish(
    dataset_ids: &[String],
    mut selected: Vec<String>,
    m: usize,
    cfg: &SelectionConfig,
    mut audit: Audit,
) -> Result<Coreset> {
    if cfg.topup && selected.len() < m {
        let taken: HashSet<&str> = selected.iter().map(String::as_str).collect();
        let pool: Vec<String> = dataset_ids
            .iter()
            .filter(|id| !taken.contains(id.as_str()))
            .cloned()
            .collect();
        let shortfall = (m - selected.len()).min(pool.len());
        let mut rng = stream(cfg.seed, Purpose::TopUp, 0);
        selected.extend(sample_from(&mut rng, &pool, shortfall));
        audit.topup_added = shortfall;
    }
    debug_assert!(selected.len() <= m);
    audit.selected = selected.len();
    Ok(Coreset {
        selected_ids: selected,
        budget: m,
        audit,
    })
}

/// Speculative selection: partition by speculative scores, verify each region
/// on the target oracle, and scale each region's budget by its ratio.
pub fn staff_select(
    dataset_ids: &[String],
    spec: &ScoreTable,
    target: &dyn ScoreOracle,
    cfg: &SelectionConfig,
) -> Result<Coreset> {
    if cfg.mode != Mode::Staff {
        return Err(Error::InvalidConfig(format!(
            "staff_select needs mode staff, got {}",
            cfg.mode
        )));
    }
    stratified(dataset_ids, spec, Ratio::Verified(target), cfg)
}

/// Random, top-k, and equal-budget stratified baselines.
pub fn baseline_select(
    dataset_ids: &[String],
    scores: &ScoreTable,
    cfg: &SelectionConfig,
) -> Result<Coreset> {
    match cfg.mode {
        Mode::Random => {
            check_ids(dataset_ids)?;
            let m = cfg.budget(dataset_ids.len())?;
            let mut rng = stream(cfg.seed, Purpose::RandomBaseline, 0);
            let selected = sample_from(&mut rng, dataset_ids, m);
            finish(
                dataset_ids,
                selected,
                m,
                cfg,
                empty_audit(cfg, dataset_ids.len(), m),
            )
        }
        Mode::TopK => {
            check_ids(dataset_ids)?;
            let m = cfg.budget(dataset_ids.len())?;
            let table = scores.restrict(dataset_ids)?;
            let mut ranked: Vec<(&str, f64)> = table.iter().collect();
            ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
            let selected = ranked
                .iter()
                .take(m)
                .map(|(id, _)| id.to_string())
                .collect();
            finish(
                dataset_ids,
                selected,
                m,
                cfg,
                empty_audit(cfg, dataset_ids.len(), m),
            )
        }
        Mode::CcsEqual => stratified(dataset_ids, scores, Ratio::Unit, cfg),
        other => Err(Error::InvalidConfig(format!(
            "{other} is not a baseline mode"
        ))),
    }
}

/// The two ablations of the speculative pipeline. `scores` is the speculative
/// table for `staff_no_verify` and the target table for `staff_no_small_model`;
/// both run the region loop with every ratio fixed to 1 and make no target queries.
pub fn ablation_select(
    dataset_ids: &[String],
    scores: &ScoreTable,
    cfg: &SelectionConfig,
) -> Result<Coreset> {
    match cfg.mode {
        Mode::StaffNoVerify | Mode::StaffNoSmallModel => {
            stratified(dataset_ids, scores, Ratio::Unit, cfg)
        }
        other => Err(Error::InvalidConfig(format!(
            "{other} is not an ablation mode"
        ))),
    }
}

/// Dispatches on `cfg.mode` using score tables for both roles.
///
/// `target` is required for `staff` (looked up only for verified ids) and for
/// `staff_no_small_model` (which partitions by it). Other modes ignore it.
pub fn select(
    dataset_ids: &[String],
    spec: &ScoreTable,
    target: Option<&ScoreTable>,
    cfg: &SelectionConfig,
) -> Result<Coreset> {
    let need_target = || {
        target.ok_or_else(|| Error::InvalidConfig(format!("mode {} needs target scores", cfg.mode)))
    };
    match cfg.mode {
        Mode::Staff => staff_select(dataset_ids, spec, &file_oracle(need_target()?), cfg),
        Mode::StaffNoSmallModel => ablation_select(dataset_ids, need_target()?, cfg),
        Mode::StaffNoVerify => ablation_select(dataset_ids, spec, cfg),
        Mode::Random | Mode::TopK | Mode::CcsEqual => baseline_select(dataset_ids, spec, cfg),
    }
}
