//! Monte-Carlo evaluation of an operating policy against sampled inflow
//! trajectories, cross-validating the LP gain and producing trajectory
//! statistics.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::bundle::InflowModelBundle;
use crate::error::{Error, Result};
use crate::mdp::{cost_given_hydro, delivered_hydro_mw, level_update, HydroDims, SystemConfig};
use crate::policy_pricing::PolicySolution;
use crate::regime_chain::sample_inflow;
use crate::WEEKS_PER_YEAR;

/// Optional per-week-of-year overrides applied during evaluation only; the
/// policy itself was derived under constant demand and fuel price.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SimOverrides {
    /// 52 values cycled annually.
    pub demand_mw: Option<Vec<f64>>,
    pub fuel_price: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimOptions {
    pub years: u32,
    pub seed: u64,
    /// Initial years discarded from all statistics.
    pub warmup_years: u32,
    /// Start level in blocks; defaults to half capacity.
    pub start_level: Option<usize>,
    /// Start regime; defaults to the median regime.
    pub start_regime: Option<usize>,
    #[serde(default)]
    pub overrides: SimOverrides,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            years: 1000,
            seed: 2718,
            warmup_years: 5,
            start_level: None,
            start_regime: None,
            overrides: SimOverrides::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeekLevelStat {
    pub week: u32,
    pub mean: f64,
    pub min: usize,
    pub max: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationResult {
    pub years: u32,
    pub warmup_years: u32,
    /// Total cost of each retained simulated year, $.
    pub yearly_costs: Vec<f64>,
    pub mean_weekly_cost: f64,
    pub mean_annual_cost: f64,
    /// Standard error of the weekly mean: std(yearly)/√years/52.
    pub std_error_weekly: f64,
    pub curtailment_events: u64,
    pub spill_events: u64,
    pub fallback_events: u64,
    pub level_stats: Vec<WeekLevelStat>,
    /// Post-warmup state visit frequencies (sums to 1).
    pub occupancy: Vec<f64>,
}

/// Resolves the release request at a state: the policy's action when the
/// state is supported, otherwise the action of the nearest supported level in
/// the same (regime, week) — ties to the lower level — defaulting to zero.
fn release_request(
    psol: &PolicySolution,
    dims: &HydroDims,
    level: usize,
    regime: usize,
    week: u32,
) -> (usize, bool) {
    let s = dims.state_index(level, regime, week);
    if let Some(a) = psol.policy[s] {
        return (a, false);
    }
    let mut best: Option<(usize, usize)> = None; // (distance, level)
    for l2 in 0..=dims.storage_blocks {
        let s2 = dims.state_index(l2, regime, week);
        if psol.policy[s2].is_some() {
            let dist = level.abs_diff(l2);
            let better = match best {
                None => true,
                Some((bd, bl)) => dist < bd || (dist == bd && l2 < bl),
            };
            if better {
                best = Some((dist, l2));
            }
        }
    }
    match best {
        Some((_, l2)) => {
            let a = psol.policy[dims.state_index(l2, regime, week)].unwrap();
            (a, true)
        }
        None => (0, true),
    }
}

/// Simulates the policy week by week. Sampling, release capping, and level
/// clamping mirror the kernel builder exactly, so on a deterministic model
/// the simulated average reproduces the LP gain. Deterministic per seed; each
/// simulated year draws from its own counter-based stream.
pub fn simulate_policy(
    psol: &PolicySolution,
    bundle: &InflowModelBundle,
    config: &SystemConfig,
    opts: &SimOptions,
) -> Result<SimulationResult> {
    config.validate()?;
    bundle.validate()?;
    let dims = HydroDims {
        storage_blocks: config.storage_blocks,
        n_regimes: bundle.n_regimes(),
        weeks: WEEKS_PER_YEAR,
        block_mw: config.block_mw,
        turbine_blocks: config.turbine_blocks,
    };
    if psol.policy.len() != dims.n_states() {
        return Err(Error::ModelMismatch(format!(
            "policy covers {} states, model has {}",
            psol.policy.len(),
            dims.n_states()
        )));
    }
    if opts.years <= opts.warmup_years {
        return Err(Error::Validation(format!(
            "need more than {} warmup years, got {} total",
            opts.warmup_years, opts.years
        )));
    }
    if let Some(d) = &opts.overrides.demand_mw {
        if d.len() != WEEKS_PER_YEAR {
            return Err(Error::Validation("demand override needs 52 values".into()));
        }
    }
    if let Some(f) = &opts.overrides.fuel_price {
        if f.len() != WEEKS_PER_YEAR {
            return Err(Error::Validation("fuel override needs 52 values".into()));
        }
    }

    let mut level = opts.start_level.unwrap_or(config.storage_blocks / 2);
    if level > config.storage_blocks {
        return Err(Error::Validation("start level above capacity".into()));
    }
    let mut regime = opts.start_regime.unwrap_or((dims.n_regimes + 1) / 2);
    if !(1..=dims.n_regimes).contains(&regime) {
        return Err(Error::Validation("start regime out of range".into()));
    }

    let mut yearly_costs = Vec::with_capacity((opts.years - opts.warmup_years) as usize);
    let mut curtailment_events = 0u64;
    let mut spill_events = 0u64;
    let mut fallback_events = 0u64;
    let mut level_sum = vec![0.0f64; WEEKS_PER_YEAR];
    let mut level_min = vec![usize::MAX; WEEKS_PER_YEAR];
    let mut level_max = vec![0usize; WEEKS_PER_YEAR];
    let mut occupancy = vec![0.0f64; dims.n_states()];

    for year in 0..opts.years {
        // one counter-based stream per simulated year
        let year_seed = opts
            .seed
            .wrapping_add((year as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut rng = ChaCha12Rng::seed_from_u64(year_seed);
        let retained = year >= opts.warmup_years;
        let mut year_cost = 0.0;
        for week in 1..=WEEKS_PER_YEAR as u32 {
            let t = 7.0 * (week as f64 - 1.0);
            let f_mw = sample_inflow(&bundle.histogram, regime, week, &mut rng)?;
            let next_regime = bundle.transition.sample_next(regime, t, &mut rng);
            let (request, fellback) = release_request(psol, &dims, level, regime, week);
            let f_blocks = (f_mw / config.block_mw).round() as usize;
            let (next_level, release, spill) =
                level_update(level, f_blocks, request, config.storage_blocks);
            let h = delivered_hydro_mw(release, config);
            let wi = week as usize - 1;
            let demand = opts
                .overrides
                .demand_mw
                .as_ref()
                .map_or(config.demand_mw, |d| d[wi]);
            let fuel = opts
                .overrides
                .fuel_price
                .as_ref()
                .map_or(config.fuel_price, |f| f[wi]);
            let cost = cost_given_hydro(
                h,
                demand,
                config.thermal_capacity_mw,
                fuel,
                config.curtailment_price,
                config.cost_hours,
            );
            year_cost += cost;
            if retained {
                if fellback {
                    fallback_events += 1;
                }
                if (demand - config.thermal_capacity_mw - h) > 0.0 {
                    curtailment_events += 1;
                }
                if spill > 0 {
                    spill_events += 1;
                }
                level_sum[wi] += level as f64;
                level_min[wi] = level_min[wi].min(level);
                level_max[wi] = level_max[wi].max(level);
                occupancy[dims.state_index(level, regime, week)] += 1.0;
            }
            level = next_level;
            regime = next_regime;
        }
        if retained {
            yearly_costs.push(year_cost);
        }
    }

    let n = yearly_costs.len() as f64;
    let mean_annual = yearly_costs.iter().sum::<f64>() / n;
    let var = if yearly_costs.len() > 1 {
        yearly_costs
            .iter()
            .map(|c| (c - mean_annual).powi(2))
            .sum::<f64>()
            / (n - 1.0)
    } else {
        0.0
    };
    let total_weeks = n * WEEKS_PER_YEAR as f64;
    for o in &mut occupancy {
        *o /= total_weeks;
    }
    Ok(SimulationResult {
        years: opts.years,
        warmup_years: opts.warmup_years,
        mean_weekly_cost: mean_annual / WEEKS_PER_YEAR as f64,
        mean_annual_cost: mean_annual,
        std_error_weekly: var.sqrt() / n.sqrt() / WEEKS_PER_YEAR as f64,
        yearly_costs,
        curtailment_events,
        spill_events,
        fallback_events,
        level_stats: (0..WEEKS_PER_YEAR)
            .map(|w| WeekLevelStat {
                week: w as u32 + 1,
                mean: level_sum[w] / n,
                min: if level_min[w] == usize::MAX { 0 } else { level_min[w] },
                max: level_max[w],
            })
            .collect(),
        occupancy,
    })
}

/// Total-variation distance between the simulated occupancy and the
/// state marginals of a state-action distribution.
pub fn occupancy_tv_distance(result: &SimulationResult, psol: &PolicySolution, n_actions: usize) -> f64 {
    let n_states = result.occupancy.len();
    let mut tv = 0.0;
    for s in 0..n_states {
        let marginal: f64 = (0..n_actions).map(|a| psol.y[s * n_actions + a]).sum();
        tv += (marginal - result.occupancy[s]).abs();
    }
    tv / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::tests::tiny_bundle;
    use crate::mdp::build_model;
    use crate::policy_pricing::{solve, PricingOptions};

    fn toy_setup() -> (InflowModelBundle, SystemConfig) {
        let bundle = tiny_bundle(1, 100.0);
        let cfg = SystemConfig {
            storage_blocks: 4,
            turbine_blocks: 2,
            ..SystemConfig::default()
        };
        (bundle, cfg)
    }

    #[test]
    fn deterministic_toy_matches_lp_gain_exactly() {
        let (bundle, cfg) = toy_setup();
        let model = build_model(&cfg, &bundle).unwrap();
        let (psol, _, _) = solve(&model, &PricingOptions::default()).unwrap();
        let opts = SimOptions {
            years: 20,
            seed: 1,
            warmup_years: 5,
            ..SimOptions::default()
        };
        let result = simulate_policy(&psol, &bundle, &cfg, &opts).unwrap();
        let rel = (result.mean_weekly_cost - psol.u_weekly).abs() / (1.0 + psol.u_weekly.abs());
        assert!(rel < 1e-12, "sim {} vs LP {}", result.mean_weekly_cost, psol.u_weekly);
    }

    #[test]
    fn same_seed_bit_identical() {
        let (bundle, cfg) = toy_setup();
        let model = build_model(&cfg, &bundle).unwrap();
        let (psol, _, _) = solve(&model, &PricingOptions::default()).unwrap();
        let opts = SimOptions {
            years: 12,
            seed: 99,
            warmup_years: 2,
            ..SimOptions::default()
        };
        let a = simulate_policy(&psol, &bundle, &cfg, &opts).unwrap();
        let b = simulate_policy(&psol, &bundle, &cfg, &opts).unwrap();
        assert_eq!(a.yearly_costs, b.yearly_costs);
        assert_eq!(a.occupancy, b.occupancy);
    }

    #[test]
    fn water_balance_reflected_in_levels() {
        // inflow fixed at 2 blocks; policy releases at most 2 → level never
        // exceeds capacity and never goes negative by construction; check the
        // trajectory stays within bounds and spills only at the top
        let (bundle, cfg) = toy_setup();
        let model = build_model(&cfg, &bundle).unwrap();
        let (psol, _, _) = solve(&model, &PricingOptions::default()).unwrap();
        let opts = SimOptions {
            years: 8,
            seed: 3,
            warmup_years: 1,
            ..SimOptions::default()
        };
        let result = simulate_policy(&psol, &bundle, &cfg, &opts).unwrap();
        for stat in &result.level_stats {
            assert!(stat.max <= cfg.storage_blocks);
        }
    }

    #[test]
    fn rejects_bad_override_length() {
        let (bundle, cfg) = toy_setup();
        let model = build_model(&cfg, &bundle).unwrap();
        let (psol, _, _) = solve(&model, &PricingOptions::default()).unwrap();
        let opts = SimOptions {
            years: 10,
            warmup_years: 2,
            overrides: SimOverrides {
                demand_mw: Some(vec![1400.0; 10]),
                fuel_price: None,
            },
            ..SimOptions::default()
        };
        assert!(simulate_policy(&psol, &bundle, &cfg, &opts).is_err());
    }
}
