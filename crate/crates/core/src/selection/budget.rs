/// Selection budget for the region being processed:
/// `min(⌊(m − selected)·v / remaining⌋, m − selected)`.
///
/// `remaining` counts the regions still in play including the current one.
/// The clamp keeps the total at or under `m` whatever the ratio `v` is.
pub fn allocate_budget(
    m: usize,
    selected_so_far: usize,
    v: f64,
    remaining_regions: usize,
) -> usize {
    let left = m.saturating_sub(selected_so_far);
    if left == 0 || v.is_nan() || v <= 0.0 {
        return 0;
    }
    let raw = (left as f64 * v / remaining_regions.max(1) as f64).floor();
    if raw >= left as f64 {
        left
    } else {
        raw as usize
    }
}
