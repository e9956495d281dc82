//! Single-file run configuration (TOML). The defaults reproduce the
//! reference reservoir: four inflow regimes from 10/50/90% quantiles,
//! 50 storage blocks of 100 MW, ten release actions, 1400 MW demand against
//! 900 MW of $50/MWh thermal, and $1000/MWh curtailment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::Digest;

use crate::convex_core::LpOptions;
use crate::error::{Error, Result};
use crate::ingest::{InflowUnits, SyntheticSpec};
use crate::mdp::SystemConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "snake_case")]
pub struct InflowConfig {
    /// "synthetic" or "csv".
    pub source: String,
    pub csv_path: Option<PathBuf>,
    pub units: InflowUnits,
    pub years: u32,
    pub seed: u64,
    pub synthetic: SyntheticSpec,
}

impl Default for InflowConfig {
    fn default() -> Self {
        InflowConfig {
            source: "synthetic".into(),
            csv_path: None,
            units: InflowUnits::Mw,
            years: 74,
            seed: 948,
            synthetic: SyntheticSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuantileConfig {
    pub levels: Vec<f64>,
    pub harmonics: usize,
    /// Seasonal frequency of both Fourier bases, rad/day.
    pub omega: f64,
}

impl Default for QuantileConfig {
    fn default() -> Self {
        QuantileConfig {
            levels: vec![0.10, 0.50, 0.90],
            harmonics: 2,
            // matches the synthetic generator's week-locked period so the
            // weekly regime grid stays in phase across a multi-decade record;
            // set 2π/365.25 for calendar-period data
            omega: crate::OMEGA_WEEKLY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransitionConfig {
    pub harmonics: usize,
}

impl Default for TransitionConfig {
    fn default() -> Self {
        TransitionConfig { harmonics: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HistogramConfig {
    pub bin_mw: f64,
    pub pool_weeks: usize,
}

impl Default for HistogramConfig {
    fn default() -> Self {
        HistogramConfig {
            bin_mw: 100.0,
            pool_weeks: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub tol_gap: f64,
    pub max_iters: usize,
    pub support_tol: f64,
    pub tie_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let lp = LpOptions::default();
        SolverConfig {
            tol_primal: lp.tol_primal,
            tol_dual: lp.tol_dual,
            tol_gap: lp.tol_gap,
            max_iters: lp.max_iters,
            support_tol: 1e-9,
            tie_tol: 1e-8,
        }
    }
}

impl SolverConfig {
    pub fn lp_options(&self) -> LpOptions {
        LpOptions {
            tol_primal: self.tol_primal,
            tol_dual: self.tol_dual,
            tol_gap: self.tol_gap,
            max_iters: self.max_iters,
            ..LpOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub years: u32,
    pub seed: u64,
    pub warmup_years: u32,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            years: 1000,
            seed: 2718,
            warmup_years: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExportConfig {
    /// Weeks whose value cross-sections go into the offer-curve export.
    pub offer_weeks: Vec<u32>,
    /// Empty list means every regime.
    pub offer_regimes: Vec<usize>,
}

impl Default for ExportConfig {
    fn default() -> Self {
        ExportConfig {
            offer_weeks: vec![26, 29, 32, 35, 38],
            offer_regimes: vec![],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub inflow: InflowConfig,
    pub quantile: QuantileConfig,
    pub transition: TransitionConfig,
    pub histogram: HistogramConfig,
    pub system: SystemConfig,
    pub solver: SolverConfig,
    pub simulation: SimulationConfig,
    pub export: ExportConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        match self.inflow.source.as_str() {
            "synthetic" => {}
            "csv" => {
                if self.inflow.csv_path.is_none() {
                    return Err(Error::Config("inflow.source = csv requires inflow.csv_path".into()));
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "inflow.source must be 'synthetic' or 'csv', got '{other}'"
                )))
            }
        }
        if self.quantile.levels.is_empty() {
            return Err(Error::Config("at least one quantile level required".into()));
        }
        if self.transition.harmonics != 1 {
            return Err(Error::Config("transition.harmonics must be 1".into()));
        }
        Ok(())
    }

    /// Stable hash of the full configuration, carried into every output.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = sha2::Sha256::digest(canonical.as_bytes());
        hex_prefix(&digest, 16)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }
}

fn hex_prefix(bytes: &[u8], chars: usize) -> String {
    let mut s = String::with_capacity(chars);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
        if s.len() >= chars {
            break;
        }
    }
    s.truncate(chars);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_reservoir() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.quantile.levels, vec![0.10, 0.50, 0.90]);
        assert_eq!(cfg.system.storage_blocks, 50);
        assert_eq!(cfg.system.block_mw, 100.0);
        assert_eq!(cfg.system.turbine_blocks, 9);
        assert_eq!(cfg.system.run_of_river_mw, 500.0);
        assert_eq!(cfg.system.demand_mw, 1400.0);
        assert_eq!(cfg.system.thermal_capacity_mw, 900.0);
        assert_eq!(cfg.system.fuel_price, 50.0);
        assert_eq!(cfg.system.curtailment_price, 1000.0);
        cfg.validate().unwrap();
    }

    #[test]
    fn hash_stable_and_sensitive() {
        let a = RunConfig::default();
        let mut b = RunConfig::default();
        assert_eq!(a.hash(), b.hash());
        b.system.demand_mw = 1500.0;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let cfg: RunConfig = toml::from_str("[system]\ndemand_mw = 1200.0\n").unwrap();
        assert_eq!(cfg.system.demand_mw, 1200.0);
        assert_eq!(cfg.system.storage_blocks, 50);
        assert_eq!(cfg.quantile.harmonics, 2);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }
}
