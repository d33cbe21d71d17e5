//! Per-step acquisition logs: `episode_id,step,feature_index,cost,spent_after`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{AcquisitionError, Cost};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub episode_id: u64,
    pub step: usize,
    pub feature_index: usize,
    pub cost: Cost,
    pub spent_after: Cost,
}

pub fn write_trajectory_csv<W: Write>(
    writer: W,
    records: &[TrajectoryRecord],
) -> Result<(), AcquisitionError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["episode_id", "step", "feature_index", "cost", "spent_after"])?;
    for r in records {
        w.write_record([
            r.episode_id.to_string(),
            r.step.to_string(),
            r.feature_index.to_string(),
            r.cost.to_string(),
            r.spent_after.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory_csv<R: Read>(reader: R) -> Result<Vec<TrajectoryRecord>, AcquisitionError> {
    let mut r = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 5 {
            return Err(AcquisitionError::InvalidLog(format!("expected 5 fields, got {}", rec.len())));
        }
        let int = |i: usize| {
            rec[i]
                .trim()
                .parse::<u64>()
                .map_err(|_| AcquisitionError::InvalidLog(format!("bad integer {:?}", &rec[i])))
        };
        let cost = |i: usize| {
            rec[i].parse::<Cost>().map_err(|e| AcquisitionError::InvalidLog(e.to_string()))
        };
        out.push(TrajectoryRecord {
            episode_id: int(0)?,
            step: int(1)? as usize,
            feature_index: int(2)? as usize,
            cost: cost(3)?,
            spent_after: cost(4)?,
        });
    }
    Ok(out)
}

/// Replays a log and returns the total spent per episode. Fails when the
/// running sum disagrees with a logged `spent_after`, or when a feature is
/// bought twice in one episode.
pub fn replay_costs(records: &[TrajectoryRecord]) -> Result<BTreeMap<u64, Cost>, AcquisitionError> {
    let mut totals: BTreeMap<u64, (Cost, Vec<usize>)> = BTreeMap::new();
    for r in records {
        let (total, seen) = totals.entry(r.episode_id).or_default();
        if seen.contains(&r.feature_index) {
            return Err(AcquisitionError::InvalidLog(format!(
                "episode {} acquires feature {} twice",
                r.episode_id, r.feature_index
            )));
        }
        seen.push(r.feature_index);
        *total = *total + r.cost;
        if *total != r.spent_after {
            return Err(AcquisitionError::InvalidLog(format!(
                "episode {} step {}: replayed {} but logged {}",
                r.episode_id, r.step, total, r.spent_after
            )));
        }
    }
    Ok(totals.into_iter().map(|(k, (c, _))| (k, c)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replay_detects_inconsistency() {
        let rec = |e, s, j, c: u64, after: u64| TrajectoryRecord {
            episode_id: e,
            step: s,
            feature_index: j,
            cost: Cost::from_units(c),
            spent_after: Cost::from_units(after),
        };
        let good = vec![rec(0, 1, 2, 5, 5), rec(0, 2, 0, 2, 7), rec(1, 1, 1, 4, 4)];
        let totals = replay_costs(&good).unwrap();
        assert_eq!(totals[&0], Cost::from_units(7));
        assert_eq!(totals[&1], Cost::from_units(4));

        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &good).unwrap();
        assert_eq!(read_trajectory_csv(buf.as_slice()).unwrap(), good);

        assert!(replay_costs(&[rec(0, 1, 2, 5, 6)]).is_err());
        assert!(replay_costs(&[rec(0, 1, 2, 5, 5), rec(0, 2, 2, 5, 10)]).is_err());
    }
}
