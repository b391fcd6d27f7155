use crate::error::{Error, Result};
use crate::scores::ScoreTable;

/// One equal-width score bin. Members keep the score table's order.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub index: usize,
    pub lo: f64,
    pub hi: f64,
    pub member_ids: Vec<String>,
}

impl Region {
    pub fn len(&self) -> usize {
        self.member_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionPartition {
    pub regions: Vec<Region>,
    pub score_min: f64,
    pub score_max: f64,
    pub width: f64,
}

impl RegionPartition {
    /// Bin index for a score inside `[score_min, score_max]`.
    pub fn region_of(&self, score: f64) -> usize {
        bin_index(score, self.score_min, self.width, self.regions.len())
    }

    /// Non-empty regions ordered by ascending size, ties by ascending index.
    pub fn processing_order(&self) -> Vec<&Region> {
        let mut order: Vec<&Region> = self.regions.iter().filter(|r| !r.is_empty()).collect();
        order.sort_by_key(|r| (r.len(), r.index));
        order
    }
}

fn bin_index(score: f64, min: f64, width: f64, k: usize) -> usize {
    if width <= 0.0 {
        return 0;
    }
    // `as` saturates, so huge quotients land in the last bin
    (((score - min) / width).floor() as usize).min(k - 1)
}

/// Splits a score table into `k` regions of equal score width. The last region
/// is closed on the right. When every score is equal the width is zero and all
/// samples fall in region 0; the other regions stay empty.
pub fn partition_regions(scores: &ScoreTable, k: usize) -> Result<RegionPartition> {
    if scores.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if k == 0 {
        return Err(Error::InvalidConfig("regions must be positive".into()));
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for (id, s) in scores.iter() {
        if !s.is_finite() || s < 0.0 {
            return Err(Error::InvalidScore {
                id: id.to_string(),
                value: s,
            });
        }
        min = min.min(s);
        max = max.max(s);
    }
    let width = if max > min {
        (max - min) / k as f64
    } else {
        0.0
    };

    let mut regions: Vec<Region> = (0..k)
        .map(|i| Region {
            index: i,
            lo: min + i as f64 * width,
            hi: if i + 1 == k {
                max
            } else {
                min + (i + 1) as f64 * width
            },
            member_ids: Vec::new(),
        })
        .collect();
    for (id, s) in scores.iter() {
        regions[bin_index(s, min, width, k)]
            .member_ids
            .push(id.to_string());
    }
    Ok(RegionPartition {
        regions,
        score_min: min,
        score_max: max,
        width,
    })
}
