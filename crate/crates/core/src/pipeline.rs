//! End-to-end orchestration: inflow → fitted bundle → MDP → LP solution →
//! simulation. Used by the command-line interface and the C bindings.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bundle::{clamp_histogram_to_regimes, InflowModelBundle};
use crate::config::RunConfig;
use crate::convex_core::BarrierOptions;
use crate::error::{Error, Result};
use crate::ingest::{load_inflow_csv, synthesize_inflow, InflowSeries};
use crate::mdp::{build_model, MdpModel};
use crate::policy_pricing::{
    self, offer_curves, solve, OfferCurve, PolicySolution, PricingOptions, SolveReport,
    ValueSolution,
};
use crate::quantile_fit::{empirical_coverage, fit_family, FourierBasis};
use crate::regime_chain::{
    assign_regimes, fit_conditional_hist, fit_transition_mle, homogeneous_log_likelihood,
};
use crate::simulate::{simulate_policy, SimOptions, SimulationResult};

/// Quantile coverage and likelihood diagnostics printed after fitting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// (alpha, empirical coverage) per fitted level.
    pub coverage: Vec<(f64, f64)>,
    pub regime_counts: Vec<usize>,
    pub log_likelihood: f64,
    pub homogeneous_log_likelihood: f64,
    pub mle_kkt_residual: f64,
    pub noncrossing_adjustments: usize,
    pub histogram_support_moved: usize,
}

/// Solved artifacts written to / read from `solution.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionFile {
    pub policy: PolicySolution,
    pub values: ValueSolution,
    pub report: SolveReport,
    pub config_hash: String,
}

impl SolutionFile {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Stateful pipeline over one configuration.
pub struct Pipeline {
    pub config: RunConfig,
    pub config_hash: String,
    pub series: Option<InflowSeries>,
    pub bundle: Option<InflowModelBundle>,
    pub diagnostics: Option<FitDiagnostics>,
    pub model: Option<MdpModel>,
    pub solution: Option<SolutionFile>,
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let config_hash = config.hash();
        Ok(Pipeline {
            config,
            config_hash,
            series: None,
            bundle: None,
            diagnostics: None,
            model: None,
            solution: None,
        })
    }

    /// Loads the configured CSV or synthesizes the configured series.
    pub fn acquire_inflow(&mut self) -> Result<&InflowSeries> {
        if self.series.is_none() {
            let series = match self.config.inflow.source.as_str() {
                "csv" => {
                    let path = self.config.inflow.csv_path.as_ref().ok_or_else(|| {
                        Error::Config("inflow.source = csv requires inflow.csv_path".into())
                    })?;
                    load_inflow_csv(path, self.config.inflow.units)?
                }
                _ => synthesize_inflow(
                    &self.config.inflow.synthetic,
                    self.config.inflow.years,
                    self.config.inflow.seed,
                )?,
            };
            self.series = Some(series);
        }
        Ok(self.series.as_ref().unwrap())
    }

    pub fn set_series(&mut self, series: InflowSeries) {
        self.series = Some(series);
        self.bundle = None;
        self.model = None;
        self.solution = None;
    }

    /// Fits quantiles, regimes, the transition chain, and the histograms.
    pub fn fit(&mut self) -> Result<&InflowModelBundle> {
        if self.bundle.is_none() {
            self.acquire_inflow()?;
            let series = self.series.as_ref().unwrap();
            let qbasis =
                FourierBasis::new(self.config.quantile.omega, self.config.quantile.harmonics);
            let lp_opts = self.config.solver.lp_options();
            let family = fit_family(series, &self.config.quantile.levels, &qbasis, &lp_opts)?;
            let coverage: Vec<(f64, f64)> = family
                .models
                .iter()
                .map(|m| (m.alpha, empirical_coverage(series, m)))
                .collect();
            let regimes = assign_regimes(series, &family);
            let tbasis = FourierBasis::new(qbasis.omega, self.config.transition.harmonics);
            let transition = fit_transition_mle(&regimes, &tbasis, &BarrierOptions::default())?;
            let mut histogram = fit_conditional_hist(
                &regimes,
                self.config.histogram.bin_mw,
                self.config.histogram.pool_weeks,
            )?;
            let moved = clamp_histogram_to_regimes(&mut histogram, &family);
            self.diagnostics = Some(FitDiagnostics {
                coverage,
                regime_counts: regimes.regime_counts(),
                log_likelihood: transition.log_likelihood,
                homogeneous_log_likelihood: homogeneous_log_likelihood(&regimes),
                mle_kkt_residual: transition.kkt_residual,
                noncrossing_adjustments: family.noncrossing_adjustments,
                histogram_support_moved: moved,
            });
            let bundle = InflowModelBundle {
                quantile: family,
                transition,
                histogram,
                config_hash: Some(self.config_hash.clone()),
            };
            bundle.validate()?;
            self.bundle = Some(bundle);
        }
        Ok(self.bundle.as_ref().unwrap())
    }

    pub fn set_bundle(&mut self, bundle: InflowModelBundle) -> Result<()> {
        bundle.validate()?;
        self.bundle = Some(bundle);
        self.model = None;
        self.solution = None;
        Ok(())
    }

    pub fn build(&mut self) -> Result<&MdpModel> {
        if self.model.is_none() {
            self.fit()?;
            let model = build_model(&self.config.system, self.bundle.as_ref().unwrap())?;
            self.model = Some(model);
        }
        Ok(self.model.as_ref().unwrap())
    }

    pub fn solve(&mut self) -> Result<&SolutionFile> {
        if self.solution.is_none() {
            self.build()?;
            let opts = PricingOptions {
                lp: self.config.solver.lp_options(),
                support_tol: self.config.solver.support_tol,
                tie_tol: self.config.solver.tie_tol,
                explicit_dual: false,
            };
            let (policy, values, report) = solve(self.model.as_ref().unwrap(), &opts)?;
            self.solution = Some(SolutionFile {
                policy,
                values,
                report,
                config_hash: self.config_hash.clone(),
            });
        }
        Ok(self.solution.as_ref().unwrap())
    }

    pub fn simulate(&mut self, years: Option<u32>, seed: Option<u64>) -> Result<SimulationResult> {
        self.solve()?;
        let sim = &self.config.simulation;
        let opts = SimOptions {
            years: years.unwrap_or(sim.years),
            seed: seed.unwrap_or(sim.seed),
            warmup_years: sim.warmup_years,
            ..SimOptions::default()
        };
        simulate_policy(
            &self.solution.as_ref().unwrap().policy,
            self.bundle.as_ref().unwrap(),
            &self.config.system,
            &opts,
        )
    }

    /// Offer curves for the configured export weeks/regimes.
    pub fn export_offer_curves(&self) -> Result<Vec<OfferCurve>> {
        let solution = self
            .solution
            .as_ref()
            .ok_or_else(|| Error::Validation("solve before exporting curves".into()))?;
        let model = self.model.as_ref().unwrap();
        let dims = model
            .dims
            .ok_or_else(|| Error::ModelMismatch("offer curves need a reservoir model".into()))?;
        let regimes: Vec<usize> = if self.config.export.offer_regimes.is_empty() {
            (1..=dims.n_regimes).collect()
        } else {
            self.config.export.offer_regimes.clone()
        };
        offer_curves(
            &solution.values,
            &solution.policy,
            model,
            &self.config.export.offer_weeks,
            &regimes,
        )
    }

    /// Writes policy.csv, values.csv, and offer_curves.csv into `dir`.
    pub fn export_solution_csvs(&self, dir: &Path) -> Result<()> {
        let solution = self
            .solution
            .as_ref()
            .ok_or_else(|| Error::Validation("solve before exporting".into()))?;
        let model = self.model.as_ref().unwrap();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let hash = Some(self.config_hash.as_str());
        policy_pricing::write_policy_csv(&dir.join("policy.csv"), &solution.policy, model, hash)?;
        policy_pricing::write_values_csv(
            &dir.join("values.csv"),
            &solution.values,
            &solution.policy,
            model,
            hash,
        )?;
        let curves = self.export_offer_curves()?;
        policy_pricing::write_offer_curves_csv(&dir.join("offer_curves.csv"), &curves, hash)?;
        Ok(())
    }
}
