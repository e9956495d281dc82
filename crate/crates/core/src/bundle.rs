//! The "inflow model bundle": fitted quantile family, regime transition
//! model, and conditional inflow histograms, serialized together as one JSON
//! document consumed by the MDP builder and the simulator.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantile_fit::QuantileFamily;
use crate::regime_chain::{ConditionalInflowDist, TransitionModel};
use crate::WEEKS_PER_YEAR;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InflowModelBundle {
    pub quantile: QuantileFamily,
    pub transition: TransitionModel,
    pub histogram: ConditionalInflowDist,
    /// Hash of the run configuration that produced this bundle.
    pub config_hash: Option<String>,
}

impl InflowModelBundle {
    pub fn n_regimes(&self) -> usize {
        self.quantile.n_regimes()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.quantile.n_regimes();
        if self.transition.n_regimes() != n {
            return Err(Error::ModelMismatch(format!(
                "transition model has {} regimes, quantile family {}",
                self.transition.n_regimes(),
                n
            )));
        }
        if self.histogram.n_regimes != n {
            return Err(Error::ModelMismatch(format!(
                "histogram has {} regimes, quantile family {}",
                self.histogram.n_regimes, n
            )));
        }
        if self.histogram.cells.iter().any(|row| row.len() != WEEKS_PER_YEAR) {
            return Err(Error::ModelMismatch("histogram must cover 52 weeks".into()));
        }
        Ok(())
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let bundle: InflowModelBundle = serde_json::from_str(&text)?;
        bundle.validate()?;
        Ok(bundle)
    }
}

/// Snaps histogram support into the cell's regime interval, allowing half a
/// bin of slack: week pooling can pull in neighbors whose inflow sits just
/// outside the cell week's quantile band. Out-of-band mass merges into the
/// nearest in-band bin. Returns the number of moved support points.
pub fn clamp_histogram_to_regimes(
    hist: &mut ConditionalInflowDist,
    family: &QuantileFamily,
) -> usize {
    let bin = hist.bin_mw;
    let mut moved = 0usize;
    for r in 1..=hist.n_regimes {
        for w in 1..=WEEKS_PER_YEAR as u32 {
            let (lo, hi) = family.regime_bounds(w, r);
            let k_min = (lo / bin - 0.5).ceil() as i64;
            let k_max = if hi.is_finite() {
                (hi / bin + 0.5).floor() as i64
            } else {
                i64::MAX
            };
            if k_min > k_max {
                continue; // interval narrower than a bin; leave the cell alone
            }
            let cell = &mut hist.cells[r - 1][w as usize - 1];
            let mut merged: std::collections::BTreeMap<i64, f64> = Default::default();
            let mut cell_moved = 0usize;
            for (&f, &p) in cell.support_mw.iter().zip(&cell.probs) {
                let k = (f / bin).round() as i64;
                let clamped = k.clamp(k_min, k_max);
                if clamped != k {
                    cell_moved += 1;
                }
                *merged.entry(clamped).or_insert(0.0) += p;
            }
            if cell_moved > 0 {
                moved += cell_moved;
                cell.support_mw = merged.keys().map(|&k| k as f64 * bin).collect();
                cell.probs = merged.values().copied().collect();
            }
        }
    }
    if moved > 0 {
        log::warn!("{moved} histogram support points fell outside their regime band and were merged inward");
    }
    moved
}
