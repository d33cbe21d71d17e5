use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::acquisition::{Category, TerminationRule};
use crate::data::TaskDataset;
use crate::strategies::{mix_seed, run_episode, EpisodeOptions, Strategy};

/// Acquisition ranks (1 = first) per sampled episode, with feature columns
/// grouped by category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderMatrix {
    /// Feature index of each column.
    pub features: Vec<usize>,
    pub names: Vec<String>,
    pub categories: Vec<Category>,
    /// Dataset row of each matrix row.
    pub rows: Vec<usize>,
    pub ranks: Vec<Vec<Option<usize>>>,
}

impl OrderMatrix {
    /// Median rank of a feature over the episodes that acquired it.
    pub fn median_rank(&self, feature: usize) -> Option<f64> {
        let col = self.features.iter().position(|&f| f == feature)?;
        let mut r: Vec<usize> = self.ranks.iter().filter_map(|row| row[col]).collect();
        if r.is_empty() {
            return None;
        }
        r.sort_unstable();
        let n = r.len();
        Some(if n % 2 == 1 { r[n / 2] as f64 } else { (r[n / 2 - 1] + r[n / 2]) as f64 / 2.0 })
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["row".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for (row, ranks) in self.rows.iter().zip(&self.ranks) {
            let mut rec = vec![row.to_string()];
            rec.extend(ranks.iter().map(|r| r.map_or(String::new(), |v| v.to_string())));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    /// Rank-colored grid: earlier acquisitions are darker, blanks are white.
    pub fn to_svg(&self) -> String {
        let cell = 14;
        let left = 60;
        let top = 110;
        let width = left + cell * self.features.len() + 20;
        let height = top + cell * self.ranks.len() + 20;
        let max_rank = self.ranks.iter().flatten().flatten().copied().max().unwrap_or(1).max(1);
        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="9">"#);
        for (c, name) in self.names.iter().enumerate() {
            let x = left + c * cell + cell / 2;
            let _ = writeln!(s, r#"<text transform="translate({x},{}) rotate(-60)">{}</text>"#, top - 4, escape(name));
        }
        for (r, ranks) in self.ranks.iter().enumerate() {
            let y = top + r * cell;
            let _ = writeln!(s, r#"<text x="4" y="{}">{}</text>"#, y + cell - 3, self.rows[r]);
            for (c, rank) in ranks.iter().enumerate() {
                let fill = match rank {
                    Some(k) => {
                        let shade = (40.0 + 200.0 * (*k as f64 - 1.0) / max_rank as f64) as u8;
                        format!("rgb({shade},{shade},255)")
                    }
                    None => "white".to_string(),
                };
                let _ = writeln!(
                    s,
                    r##"<rect x="{}" y="{y}" width="{cell}" height="{cell}" fill="{fill}" stroke="#ccc"/>"##,
                    left + c * cell
                );
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

pub(super) fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Runs `n_samples` episodes on rows drawn from `rows` (without replacement
/// while rows last) and records each acquisition rank.
pub fn order_matrix(
    strategy: &Strategy,
    ds: &TaskDataset,
    rows: &[usize],
    n_samples: usize,
    rule: &TerminationRule,
    seed: u64,
) -> Result<OrderMatrix, EvalError> {
    if n_samples == 0 || rows.is_empty() {
        return Err(EvalError::InvalidInput("order matrix needs at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x6f72_6465));
    let mut pool = rows.to_vec();
    pool.shuffle(&mut rng);
    let sampled: Vec<usize> = pool.iter().cycle().take(n_samples).copied().collect();

    let catalog = &ds.catalog;
    let mut features: Vec<usize> = (0..catalog.len()).collect();
    features.sort_by_key(|&j| (catalog.entries()[j].category, j));
    let opts = EpisodeOptions::new(rule.clone(), seed);
    let episodes = sampled
        .par_iter()
        .map(|&r| run_episode(strategy, ds, r, &opts))
        .collect::<Result<Vec<_>, _>>()?;
    let ranks = episodes
        .iter()
        .map(|e| {
            let mut rank = vec![None; catalog.len()];
            for (k, &j) in e.order.iter().enumerate() {
                rank[j] = Some(k + 1);
            }
            features.iter().map(|&j| rank[j]).collect()
        })
        .collect();
    Ok(OrderMatrix {
        names: features.iter().map(|&j| catalog.entries()[j].name.clone()).collect(),
        categories: features.iter().map(|&j| catalog.entries()[j].category).collect(),
        features,
        rows: sampled,
        ranks,
    })
}
