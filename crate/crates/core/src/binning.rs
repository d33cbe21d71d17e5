//! Equal-frequency discretization shared by the MI estimator and the
//! exhaustive sensitivity strategy.

/// Cut points splitting `values` into at most `bins` equally populated bins.
/// Duplicate cut points are merged, so heavily tied data yields fewer bins.
pub fn equal_frequency_edges(values: &[f64], bins: usize) -> Vec<f64> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if sorted.is_empty() || bins <= 1 {
        return Vec::new();
    }
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut edges: Vec<f64> = (1..bins).map(|k| sorted[(k * n / bins).min(n - 1)]).collect();
    edges.dedup();
    // a cut at the minimum would leave the first bin empty
    if edges.first() == Some(&sorted[0]) && edges.len() > 1 {
        edges.remove(0);
    }
    edges
}

/// Bin index of `v`: the number of cut points `<= v`.
pub fn assign_bin(edges: &[f64], v: f64) -> usize {
    edges.partition_point(|&e| e <= v)
}
