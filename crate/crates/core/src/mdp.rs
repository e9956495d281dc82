//! The reservoir's operational Markov decision model: discretized states
//! (storage level, inflow regime, week), release actions, sparse transition
//! kernel, and expected per-week costs.

use serde::{Deserialize, Serialize};

use crate::bundle::InflowModelBundle;
use crate::error::{Error, Result};
use crate::{HOURS_PER_WEEK, WEEKS_PER_YEAR};

/// Physical and economic parameters of the reservoir system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemConfig {
    /// Storage levels run 0..=storage_blocks.
    pub storage_blocks: usize,
    /// MW-week of energy per storage/inflow/release block.
    pub block_mw: f64,
    /// Release actions run 0..=turbine_blocks blocks.
    pub turbine_blocks: usize,
    /// Firm run-of-river generation, delivered every week at no cost and
    /// independent of storage.
    pub run_of_river_mw: f64,
    pub demand_mw: f64,
    pub thermal_capacity_mw: f64,
    /// $/MWh.
    pub fuel_price: f64,
    /// $/MWh; at least the fuel price.
    pub curtailment_price: f64,
    /// Hours per step; costs are $(MW·h)=MWh-priced over this span. The
    /// argmin policy is invariant to this positive scale factor.
    pub cost_hours: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            storage_blocks: 50,
            block_mw: 100.0,
            turbine_blocks: 9,
            run_of_river_mw: 500.0,
            demand_mw: 1400.0,
            thermal_capacity_mw: 900.0,
            fuel_price: 50.0,
            curtailment_price: 1000.0,
            cost_hours: HOURS_PER_WEEK,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_mw <= 0.0 || self.cost_hours <= 0.0 {
            return Err(Error::Validation("block size and cost hours must be positive".into()));
        }
        if self.run_of_river_mw < 0.0
            || self.demand_mw < 0.0
            || self.thermal_capacity_mw < 0.0
            || self.fuel_price < 0.0
        {
            return Err(Error::Validation("capacities and prices must be nonnegative".into()));
        }
        if self.curtailment_price < self.fuel_price {
            return Err(Error::Validation(format!(
                "curtailment price {} must be at least the fuel price {}",
                self.curtailment_price, self.fuel_price
            )));
        }
        Ok(())
    }

    pub fn n_levels(&self) -> usize {
        self.storage_blocks + 1
    }

    pub fn n_actions(&self) -> usize {
        self.turbine_blocks + 1
    }
}

/// Dimension metadata carried by reservoir models (absent on ad-hoc MDPs).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HydroDims {
    pub storage_blocks: usize,
    pub n_regimes: usize,
    pub weeks: usize,
    pub block_mw: f64,
    pub turbine_blocks: usize,
}

impl HydroDims {
    /// Flat state index: ((week−1)·|R| + (regime−1))·(levels) + level.
    pub fn state_index(&self, level: usize, regime: usize, week: u32) -> usize {
        debug_assert!(level <= self.storage_blocks);
        debug_assert!((1..=self.n_regimes).contains(&regime));
        debug_assert!((1..=self.weeks as u32).contains(&week));
        ((week as usize - 1) * self.n_regimes + (regime - 1)) * (self.storage_blocks + 1) + level
    }

    /// Inverse of `state_index`: (level, regime, week).
    pub fn state_parts(&self, idx: usize) -> (usize, usize, u32) {
        let levels = self.storage_blocks + 1;
        let level = idx % levels;
        let rest = idx / levels;
        let regime = rest % self.n_regimes + 1;
        let week = (rest / self.n_regimes + 1) as u32;
        (level, regime, week)
    }

    pub fn n_states(&self) -> usize {
        (self.storage_blocks + 1) * self.n_regimes * self.weeks
    }
}

/// Sparse average-cost MDP: kernel rows indexed by (state, action).
#[derive(Debug, Clone)]
pub struct MdpModel {
    pub n_states: usize,
    pub n_actions: usize,
    kernel_offsets: Vec<usize>,
    kernel_targets: Vec<u32>,
    kernel_probs: Vec<f64>,
    /// Expected immediate cost per (state, action), $/step.
    pub costs: Vec<f64>,
    pub dims: Option<HydroDims>,
}

impl MdpModel {
    /// Builds a generic model from per-(s,a) successor lists, validating
    /// probability conservation.
    pub fn from_parts(
        n_states: usize,
        n_actions: usize,
        kernel: Vec<Vec<(usize, f64)>>,
        costs: Vec<f64>,
        dims: Option<HydroDims>,
    ) -> Result<Self> {
        if kernel.len() != n_states * n_actions || costs.len() != n_states * n_actions {
            return Err(Error::Validation("kernel/cost tables must cover S × A".into()));
        }
        let mut offsets = Vec::with_capacity(n_states * n_actions + 1);
        let mut targets = Vec::new();
        let mut probs = Vec::new();
        offsets.push(0);
        for (row_i, row) in kernel.iter().enumerate() {
            let mut sum = 0.0;
            for &(s2, p) in row {
                if s2 >= n_states {
                    return Err(Error::Validation(format!("successor {s2} out of range")));
                }
                if !(p.is_finite() && p >= 0.0) {
                    return Err(Error::Validation(format!("bad probability {p}")));
                }
                if p > 0.0 {
                    targets.push(s2 as u32);
                    probs.push(p);
                    sum += p;
                }
            }
            if (sum - 1.0).abs() > 1e-10 {
                return Err(Error::Validation(format!(
                    "kernel row {row_i} sums to {sum}, not 1"
                )));
            }
            offsets.push(targets.len());
        }
        Ok(MdpModel {
            n_states,
            n_actions,
            kernel_offsets: offsets,
            kernel_targets: targets,
            kernel_probs: probs,
            costs,
            dims,
        })
    }

    pub fn pair_index(&self, s: usize, a: usize) -> usize {
        s * self.n_actions + a
    }

    pub fn successors(&self, s: usize, a: usize) -> (&[u32], &[f64]) {
        let row = self.pair_index(s, a);
        let (lo, hi) = (self.kernel_offsets[row], self.kernel_offsets[row + 1]);
        (&self.kernel_targets[lo..hi], &self.kernel_probs[lo..hi])
    }

    pub fn kernel_nnz(&self) -> usize {
        self.kernel_targets.len()
    }

    pub fn n_pairs(&self) -> usize {
        self.n_states * self.n_actions
    }

    /// Max deviation of any (s,a) probability row from 1.
    pub fn max_row_sum_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for row in 0..self.n_pairs() {
            let (lo, hi) = (self.kernel_offsets[row], self.kernel_offsets[row + 1]);
            let sum: f64 = self.kernel_probs[lo..hi].iter().sum();
            worst = worst.max((sum - 1.0).abs());
        }
        worst
    }
}

/// Storage update shared by the kernel builder and the simulator.
/// Returns (next level, achieved release blocks, spilled blocks).
pub fn level_update(
    level: usize,
    inflow_blocks: usize,
    action_blocks: usize,
    storage_blocks: usize,
) -> (usize, usize, usize) {
    let available = level + inflow_blocks;
    let release = action_blocks.min(available);
    let after = available - release;
    let next = after.min(storage_blocks);
    let spill = after - next;
    (next, release, spill)
}

/// Thermal-plus-curtailment cost of one step given delivered hydro `h` MW:
/// clamp(δ − h, 0, τ)·fuel + max(δ − τ − h, 0)·curtailment, times `hours`.
pub fn cost_given_hydro(
    hydro_mw: f64,
    demand_mw: f64,
    thermal_capacity_mw: f64,
    fuel_price: f64,
    curtailment_price: f64,
    hours: f64,
) -> f64 {
    let thermal = (demand_mw - hydro_mw).min(thermal_capacity_mw).max(0.0);
    let curtailed = (demand_mw - thermal_capacity_mw - hydro_mw).max(0.0);
    (thermal * fuel_price + curtailed * curtailment_price) * hours
}

/// Delivered hydro: firm run-of-river output plus the achieved turbine
/// release. Run-of-river is energy equivalent to its nameplate each week and
/// does not draw on storage.
pub fn delivered_hydro_mw(release_blocks: usize, config: &SystemConfig) -> f64 {
    config.run_of_river_mw + release_blocks as f64 * config.block_mw
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModelDims {
    pub n_states: usize,
    pub n_actions: usize,
    pub n_state_actions: usize,
    pub kernel_nnz: usize,
    pub lp_rows: usize,
}

pub fn model_dimensions(model: &MdpModel) -> ModelDims {
    ModelDims {
        n_states: model.n_states,
        n_actions: model.n_actions,
        n_state_actions: model.n_pairs(),
        kernel_nnz: model.kernel_nnz(),
        lp_rows: model.n_states + 1,
    }
}

/// Assembles the reservoir MDP from the fitted inflow model bundle.
///
/// For each state (ℓ, r, w) and action a, the kernel enumerates all
/// (inflow bin, successor regime) pairs at t = 7(w−1): the release is capped
/// at available water, the level clamps to [0, capacity] (excess spills), and
/// the successor week is w % 52 + 1. Costs are expectations over the inflow
/// bins of the thermal/curtailment cost at the delivered hydro.
pub fn build_model(config: &SystemConfig, bundle: &InflowModelBundle) -> Result<MdpModel> {
    config.validate()?;
    bundle.validate()?;
    if (bundle.histogram.bin_mw - config.block_mw).abs() > 1e-9 {
        return Err(Error::ModelMismatch(format!(
            "histogram bin {} MW must equal the storage block {} MW",
            bundle.histogram.bin_mw, config.block_mw
        )));
    }
    let n_regimes = bundle.n_regimes();
    let dims = HydroDims {
        storage_blocks: config.storage_blocks,
        n_regimes,
        weeks: WEEKS_PER_YEAR,
        block_mw: config.block_mw,
        turbine_blocks: config.turbine_blocks,
    };
    let n_states = dims.n_states();
    let n_actions = config.n_actions();
    let levels = config.n_levels();

    let mut offsets = Vec::with_capacity(n_states * n_actions + 1);
    let mut targets: Vec<u32> = Vec::new();
    let mut probs: Vec<f64> = Vec::new();
    let mut costs = vec![0.0f64; n_states * n_actions];
    offsets.push(0);

    // scratch accumulator over (level', regime') pairs of the successor week
    let mut acc = vec![0.0f64; levels * n_regimes];
    let mut stamped: Vec<usize> = Vec::new();

    for week in 1..=WEEKS_PER_YEAR as u32 {
        let t = 7.0 * (week as f64 - 1.0);
        let trans = bundle.transition.transition_matrix(t);
        let next_week = week % WEEKS_PER_YEAR as u32 + 1;
        for regime in 1..=n_regimes {
            let cell = bundle.histogram.cell(regime, week);
            if cell.support_mw.is_empty() {
                return Err(Error::EmptyCell {
                    regime,
                    week: week as usize,
                });
            }
            let row_probs = &trans[regime - 1];
            for level in 0..levels {
                for action in 0..n_actions {
                    let pair = (dims.state_index(level, regime, week)) * n_actions + action;
                    let mut expected_cost = 0.0;
                    for (&f_mw, &p_f) in cell.support_mw.iter().zip(&cell.probs) {
                        let f_blocks = (f_mw / config.block_mw).round() as usize;
                        let (next_level, release, _spill) =
                            level_update(level, f_blocks, action, config.storage_blocks);
                        let h = delivered_hydro_mw(release, config);
                        expected_cost += p_f
                            * cost_given_hydro(
                                h,
                                config.demand_mw,
                                config.thermal_capacity_mw,
                                config.fuel_price,
                                config.curtailment_price,
                                config.cost_hours,
                            );
                        for (r2, &p_r) in row_probs.iter().enumerate() {
                            if p_r <= 0.0 {
                                continue;
                            }
                            let slot = next_level * n_regimes + r2;
                            if acc[slot] == 0.0 {
                                stamped.push(slot);
                            }
                            acc[slot] += p_f * p_r;
                        }
                    }
                    costs[pair] = expected_cost;
                    stamped.sort_unstable();
                    for &slot in &stamped {
                        let p = acc[slot];
                        acc[slot] = 0.0;
                        let next_level = slot / n_regimes;
                        let r2 = slot % n_regimes + 1;
                        targets.push(dims.state_index(next_level, r2, next_week) as u32);
                        probs.push(p);
                    }
                    stamped.clear();
                    offsets.push(targets.len());
                    debug_assert_eq!(offsets.len() - 1, pair + 1);
                }
            }
        }
    }

    // states are laid out (week, regime, level) but the loop above runs in
    // exactly that order, so offsets align with pair indices
    let model = MdpModel {
        n_states,
        n_actions,
        kernel_offsets: offsets,
        kernel_targets: targets,
        kernel_probs: probs,
        costs,
        dims: Some(dims),
    };
    let err = model.max_row_sum_error();
    if err > 1e-10 {
        return Err(Error::Internal(format!(
            "kernel probability conservation violated: worst row error {err:.3e}"
        )));
    }
    Ok(model)
}

#[derive(Debug, Serialize, Deserialize)]
struct DumpHeader {
    format: String,
    n_states: usize,
    n_actions: usize,
    kernel_nnz: usize,
    config_hash: Option<String>,
    dims: Option<HydroDims>,
}

/// Dumps the model: a JSON header line, then little-endian binary records —
/// per (s, a) row a u32 successor count followed by (u32 target, f64 prob)
/// pairs, then the dense f64 cost table.
pub fn save_model(model: &MdpModel, path: &std::path::Path, config_hash: Option<&str>) -> Result<()> {
    use std::io::Write;
    let header = DumpHeader {
        format: "hv-mdp-1".into(),
        n_states: model.n_states,
        n_actions: model.n_actions,
        kernel_nnz: model.kernel_nnz(),
        config_hash: config_hash.map(|s| s.to_string()),
        dims: model.dims,
    };
    let mut w = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
    );
    let io = |e| Error::io(path, e);
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n").map_err(io)?;
    for row in 0..model.n_pairs() {
        let (lo, hi) = (model.kernel_offsets[row], model.kernel_offsets[row + 1]);
        w.write_all(&((hi - lo) as u32).to_le_bytes()).map_err(io)?;
        for k in lo..hi {
            w.write_all(&model.kernel_targets[k].to_le_bytes()).map_err(io)?;
            w.write_all(&model.kernel_probs[k].to_le_bytes()).map_err(io)?;
        }
    }
    for c in &model.costs {
        w.write_all(&c.to_le_bytes()).map_err(io)?;
    }
    Ok(())
}

/// Loads a model dump; returns the model and the recorded config hash.
pub fn load_model(path: &std::path::Path) -> Result<(MdpModel, Option<String>)> {
    use std::io::{BufRead, Read};
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = std::io::BufReader::new(f);
    let mut header_line = String::new();
    r.read_line(&mut header_line).map_err(|e| Error::io(path, e))?;
    let header: DumpHeader = serde_json::from_str(header_line.trim_end())?;
    if header.format != "hv-mdp-1" {
        return Err(Error::Validation(format!(
            "unknown model dump format '{}'",
            header.format
        )));
    }
    let pairs = header.n_states * header.n_actions;
    let mut offsets = Vec::with_capacity(pairs + 1);
    let mut targets = Vec::with_capacity(header.kernel_nnz);
    let mut probs = Vec::with_capacity(header.kernel_nnz);
    offsets.push(0usize);
    let io = |e| Error::io(path, e);
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    for _ in 0..pairs {
        r.read_exact(&mut b4).map_err(io)?;
        let count = u32::from_le_bytes(b4) as usize;
        for _ in 0..count {
            r.read_exact(&mut b4).map_err(io)?;
            targets.push(u32::from_le_bytes(b4));
            r.read_exact(&mut b8).map_err(io)?;
            probs.push(f64::from_le_bytes(b8));
        }
        offsets.push(targets.len());
    }
    let mut costs = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        r.read_exact(&mut b8).map_err(io)?;
        costs.push(f64::from_le_bytes(b8));
    }
    let model = MdpModel {
        n_states: header.n_states,
        n_actions: header.n_actions,
        kernel_offsets: offsets,
        kernel_targets: targets,
        kernel_probs: probs,
        costs,
        dims: header.dims,
    };
    if model.max_row_sum_error() > 1e-9 {
        return Err(Error::Validation("model dump rows are not stochastic".into()));
    }
    Ok((model, header.config_hash))
}
