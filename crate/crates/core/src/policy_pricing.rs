//! Primal state-action LP and dual value LP over an average-cost MDP, policy
//! extraction at a vertex, state values, and weekly water-value offer curves.
//!
//! The primal program minimizes Σ c_{sa}·y_{sa} over state-action
//! distributions consistent with the kernel (one stationarity row per state
//! plus one normalization row). Its equality duals are the gain u and the
//! state values v of the paired dual program max u subject to
//! u + v_s ≤ c_{sa} + Σ p_{s'|sa} v_{s'}.
//!
//! The interior-point solution is pushed to a vertex by a crossover tailored
//! to the MDP structure: pick the reduced-cost-minimal action per state
//! (ties to the smallest action index), then solve the induced chain's
//! stationary equations exactly on its recurrent class. The result carries
//! exactly one supported action per supported state.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::convex_core::{
    default_pivot_order, solve_lp, CscMatrix, KktSolver, LinearProgram, LpOptions, LpStatus,
};
use crate::error::{Error, Result};
use crate::mdp::MdpModel;
use crate::{HOURS_PER_WEEK, WEEKS_PER_YEAR};

#[derive(Debug, Clone)]
pub struct PricingOptions {
    pub lp: LpOptions,
    /// A state-action pair with y above this is supported.
    pub support_tol: f64,
    /// Reduced costs within this (relative) distance of the row minimum tie;
    /// ties resolve to the smallest action index.
    pub tie_tol: f64,
    /// Solve the dual program as an explicit LP instead of reading the
    /// primal's equality duals.
    pub explicit_dual: bool,
}

impl Default for PricingOptions {
    fn default() -> Self {
        PricingOptions {
            lp: LpOptions::default(),
            support_tol: 1e-9,
            tie_tol: 1e-8,
            explicit_dual: false,
        }
    }
}

/// Purified primal solution: a state-action distribution at a vertex.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicySolution {
    /// y_{sa}, flat (s·|A| + a); sums to one.
    pub y: Vec<f64>,
    /// Expected cost per week (the LP objective at the vertex).
    pub u_weekly: f64,
    /// Annualized gain, 52 × weekly.
    pub u_annual: f64,
    /// Chosen action per supported state; `None` for unsupported states.
    pub policy: Vec<Option<usize>>,
    pub support: Vec<bool>,
    pub stationarity_residual: f64,
    pub lp_iterations: usize,
    pub lp_rel_gap: f64,
}

impl PolicySolution {
    pub fn support_fraction(&self) -> f64 {
        let supported = self.support.iter().filter(|&&s| s).count();
        supported as f64 / self.support.len() as f64
    }
}

/// Dual values: gain plus anchored per-state values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueSolution {
    pub u_weekly: f64,
    pub u_annual: f64,
    /// v_s anchored to zero at `anchor_state`.
    pub v: Vec<f64>,
    pub anchor_state: usize,
    /// Worst violation of u + v_s ≤ c_{sa} + Σ p v (negative slack), scaled.
    pub worst_slack: f64,
    /// Worst complementarity gap over supported pairs.
    pub worst_complementarity: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub n_states: usize,
    pub n_actions: usize,
    pub lp_variables: usize,
    pub lp_rows: usize,
    pub kernel_nnz: usize,
    pub duality_gap_rel: f64,
    pub support_fraction: f64,
    pub lp_iterations: usize,
    pub crossover_bottom_classes: usize,
    pub solve_seconds: f64,
}

/// Builds the primal state-action LP for the model.
pub fn primal_lp(model: &MdpModel) -> LinearProgram {
    let s_count = model.n_states;
    let a_count = model.n_actions;
    let ncols = s_count * a_count;
    let nrows = s_count + 1;
    let mut colptr = Vec::with_capacity(ncols + 1);
    let mut rowidx: Vec<usize> = Vec::with_capacity(model.kernel_nnz() + 2 * ncols);
    let mut values: Vec<f64> = Vec::with_capacity(model.kernel_nnz() + 2 * ncols);
    colptr.push(0);
    let mut entries: Vec<(usize, f64)> = Vec::new();
    for s in 0..s_count {
        for a in 0..a_count {
            entries.clear();
            entries.push((s, 1.0));
            let (targets, probs) = model.successors(s, a);
            for (&s2, &p) in targets.iter().zip(probs) {
                entries.push((s2 as usize, -p));
            }
            entries.push((s_count, 1.0)); // normalization row
            entries.sort_unstable_by_key(|&(r, _)| r);
            let mut i = 0;
            while i < entries.len() {
                let r = entries[i].0;
                let mut v = 0.0;
                while i < entries.len() && entries[i].0 == r {
                    v += entries[i].1;
                    i += 1;
                }
                if v != 0.0 {
                    rowidx.push(r);
                    values.push(v);
                }
            }
            colptr.push(rowidx.len());
        }
    }
    let a = CscMatrix::from_raw(nrows, ncols, colptr, rowidx, values);
    let mut rhs = vec![0.0; nrows];
    rhs[s_count] = 1.0;
    LinearProgram::standard_form(model.costs.clone(), a, rhs)
}

/// Reduced costs of every pair under dual values (u, v):
/// rc = c + Σ p v(s') − v(s) − u.
fn reduced_costs(model: &MdpModel, v: &[f64], u: f64) -> Vec<f64> {
    let mut rc = vec![0.0; model.n_pairs()];
    for s in 0..model.n_states {
        for a in 0..model.n_actions {
            let (targets, probs) = model.successors(s, a);
            let mut exp_v = 0.0;
            for (&s2, &p) in targets.iter().zip(probs) {
                exp_v += p * v[s2 as usize];
            }
            rc[model.pair_index(s, a)] = model.costs[model.pair_index(s, a)] + exp_v - v[s] - u;
        }
    }
    rc
}

/// Raises each v_s to min_a [c_sa + Σ p v(s') − u], the largest value the
/// dual constraints allow given the others. Interior-point duals sit in the
/// middle of the optimal face; off the primal support that leaves v strictly
/// below the best rational lower bound, which shows up as spurious
/// non-monotonicity in the value surface. The sweep is monotone nondecreasing
/// and preserves dual feasibility, converging to the maximal dual solution.
fn tighten_values(model: &MdpModel, u: f64, v: &mut [f64], tol: f64, max_sweeps: usize) -> usize {
    let n = model.n_states;
    let mut sweeps = 0;
    for _ in 0..max_sweeps {
        sweeps += 1;
        let mut changed = 0.0f64;
        for s in (0..n).rev() {
            let mut best = f64::INFINITY;
            for a in 0..model.n_actions {
                let (targets, probs) = model.successors(s, a);
                let mut q = model.costs[model.pair_index(s, a)] - u;
                for (&t, &p) in targets.iter().zip(probs) {
                    q += p * v[t as usize];
                }
                best = best.min(q);
            }
            if best > v[s] {
                changed = changed.max(best - v[s]);
                v[s] = best;
            }
        }
        if changed <= tol {
            break;
        }
    }
    sweeps
}

/// Reduced-cost-greedy deterministic policy; ties break to the smaller action.
fn greedy_policy(model: &MdpModel, rc: &[f64], tie_tol_abs: f64) -> Vec<usize> {
    (0..model.n_states)
        .map(|s| {
            let mut best = f64::INFINITY;
            for a in 0..model.n_actions {
                best = best.min(rc[model.pair_index(s, a)]);
            }
            (0..model.n_actions)
                .find(|&a| rc[model.pair_index(s, a)] <= best + tie_tol_abs)
                .unwrap()
        })
        .collect()
}

/// Strongly connected components (Tarjan, iterative); returns the component
/// id per node, ids in reverse topological order (bottom classes have
/// successors only within themselves).
fn tarjan_scc(n: usize, succ: impl Fn(usize) -> Vec<usize>) -> (Vec<usize>, usize) {
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut lowlink = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut comp = vec![UNSEEN; n];
    let mut next_index = 0usize;
    let mut n_comp = 0usize;
    // explicit DFS stack: (node, neighbor list, cursor)
    let mut dfs: Vec<(usize, Vec<usize>, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        dfs.push((root, succ(root), 0));
        index[root] = next_index;
        lowlink[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(frame) = dfs.last_mut() {
            let (node, neighbors, cursor) = (frame.0, &frame.1, &mut frame.2);
            if *cursor < neighbors.len() {
                let next = neighbors[*cursor];
                *cursor += 1;
                if index[next] == UNSEEN {
                    index[next] = next_index;
                    lowlink[next] = next_index;
                    next_index += 1;
                    stack.push(next);
                    on_stack[next] = true;
                    dfs.push((next, succ(next), 0));
                } else if on_stack[next] {
                    lowlink[node] = lowlink[node].min(index[next]);
                }
            } else {
                if lowlink[node] == index[node] {
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp[w] = n_comp;
                        if w == node {
                            break;
                        }
                    }
                    n_comp += 1;
                }
                let done = dfs.pop().unwrap().0;
                if let Some(parent) = dfs.last_mut() {
                    lowlink[parent.0] = lowlink[parent.0].min(lowlink[done]);
                }
            }
        }
    }
    (comp, n_comp)
}

/// Stationary distribution of the chain induced by `policy`, restricted to
/// the recurrent class containing most of the interior mass `y_hint`.
/// Returns (π over all states, number of bottom classes seen).
fn stationary_distribution(
    model: &MdpModel,
    policy: &[usize],
    y_hint: &[f64],
) -> Result<(Vec<f64>, usize)> {
    let n = model.n_states;
    let succ = |s: usize| -> Vec<usize> {
        let (targets, _) = model.successors(s, policy[s]);
        targets.iter().map(|&t| t as usize).collect()
    };
    let (comp, n_comp) = tarjan_scc(n, succ);
    // bottom classes: no edges leaving the component
    let mut is_bottom = vec![true; n_comp];
    for s in 0..n {
        for t in succ(s) {
            if comp[t] != comp[s] {
                is_bottom[comp[s]] = false;
            }
        }
    }
    // weight per bottom class: interior-point mass of its states
    let mut weight = vec![0.0f64; n_comp];
    for s in 0..n {
        if is_bottom[comp[s]] {
            let mass: f64 = (0..model.n_actions)
                .map(|a| y_hint[model.pair_index(s, a)])
                .sum();
            weight[comp[s]] += mass;
        }
    }
    let bottom_count = is_bottom.iter().filter(|&&b| b).count();
    let chosen = (0..n_comp)
        .filter(|&c| is_bottom[c])
        .max_by(|&a, &b| {
            weight[a]
                .partial_cmp(&weight[b])
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .ok_or_else(|| Error::Internal("policy chain has no bottom class".into()))?;
    let class: Vec<usize> = (0..n).filter(|&s| comp[s] == chosen).collect();
    let local: std::collections::HashMap<usize, usize> =
        class.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let k = class.len();

    let mut pi_local: Vec<f64>;
    if k == 1 {
        pi_local = vec![1.0];
    } else {
        // least-norm solve of [(Pᵀ − I); 1ᵀ] π = [0; 1] on the class
        let mut trips: Vec<(usize, usize, f64)> = Vec::new();
        for (j, &s) in class.iter().enumerate() {
            trips.push((j, j, -1.0));
            let (targets, probs) = model.successors(s, policy[s]);
            for (&t, &p) in targets.iter().zip(probs) {
                let i = *local
                    .get(&(t as usize))
                    .ok_or_else(|| Error::Internal("bottom class not closed".into()))?;
                trips.push((i, j, p));
            }
            trips.push((k, j, 1.0));
        }
        let a = CscMatrix::from_triplets(k + 1, k, &trips);
        let order = default_pivot_order(&a, &vec![false; k]);
        let mut kkt = KktSolver::new(&a, order, 1e-8);
        kkt.factor(&vec![1.0; k])?;
        let mut rhs = vec![0.0; k + 1];
        rhs[k] = 1.0;
        let (pi, _) = kkt.solve(&vec![0.0; k], &rhs, 12);
        pi_local = pi;
    }
    // clean interior-point dust and renormalize
    for p in &mut pi_local {
        if *p < 0.0 {
            *p = 0.0;
        }
    }
    let total: f64 = pi_local.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::Internal("stationary distribution solve failed".into()));
    }
    for p in &mut pi_local {
        *p /= total;
    }
    let mut pi = vec![0.0; n];
    for (j, &s) in class.iter().enumerate() {
        pi[s] = pi_local[j];
    }
    Ok((pi, bottom_count))
}

fn stationarity_residual(model: &MdpModel, y: &[f64]) -> f64 {
    let n = model.n_states;
    let mut inflow = vec![0.0f64; n];
    let mut outflow = vec![0.0f64; n];
    for s in 0..n {
        for a in 0..model.n_actions {
            let w = y[model.pair_index(s, a)];
            outflow[s] += w;
            if w != 0.0 {
                let (targets, probs) = model.successors(s, a);
                for (&t, &p) in targets.iter().zip(probs) {
                    inflow[t as usize] += p * w;
                }
            }
        }
    }
    (0..n).fold(0.0f64, |m, s| m.max((inflow[s] - outflow[s]).abs()))
}

/// Solves the primal/dual pair and extracts the vertex policy.
pub fn solve(
    model: &MdpModel,
    opts: &PricingOptions,
) -> Result<(PolicySolution, ValueSolution, SolveReport)> {
    let start = std::time::Instant::now();
    let lp = primal_lp(model);
    let sol = solve_lp(&lp, &opts.lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Lp {
            status: sol.status,
            detail: format!(
                "state-action LP did not reach optimality (a row-stochastic kernel \
                 cannot be infeasible; this signals a model bug): residuals p={:.2e} \
                 d={:.2e} gap={:.2e} after {} iterations",
                sol.primal_residual, sol.dual_residual, sol.rel_gap, sol.iterations
            ),
        });
    }

    let s_count = model.n_states;
    let u_ipm = sol.duals[s_count];
    let v_raw = &sol.duals[..s_count];

    // crossover: greedy reduced-cost policy, then exact stationary equations
    let rc = reduced_costs(model, v_raw, u_ipm);
    let cost_scale = 1.0 + model.costs.iter().fold(0.0f64, |m, &c| m.max(c.abs()));
    let policy_full = greedy_policy(model, &rc, opts.tie_tol * cost_scale);
    let (pi, bottom_classes) = stationary_distribution(model, &policy_full, &sol.x)?;
    if bottom_classes > 1 {
        log::warn!(
            "policy chain has {bottom_classes} closed classes; keeping the one under the LP mass"
        );
    }

    let mut y = vec![0.0; model.n_pairs()];
    let mut u_weekly = 0.0;
    for s in 0..s_count {
        if pi[s] > 0.0 {
            let pair = model.pair_index(s, policy_full[s]);
            y[pair] = pi[s];
            u_weekly += model.costs[pair] * pi[s];
        }
    }
    let support: Vec<bool> = (0..s_count)
        .map(|s| {
            (0..model.n_actions).any(|a| y[model.pair_index(s, a)] > opts.support_tol)
        })
        .collect();
    let policy: Vec<Option<usize>> = (0..s_count)
        .map(|s| support[s].then(|| policy_full[s]))
        .collect();
    let psol = PolicySolution {
        stationarity_residual: stationarity_residual(model, &y),
        y,
        u_weekly,
        u_annual: u_weekly * WEEKS_PER_YEAR as f64,
        policy,
        support,
        lp_iterations: sol.iterations,
        lp_rel_gap: sol.rel_gap,
    };

    // dual side: either the primal's equality duals or an explicit dual solve
    let (u_dual, v_anchored, anchor) = if opts.explicit_dual {
        let (u, v, anchor) = solve_dual_explicit_lp(model, &opts.lp)?;
        (u, v, anchor)
    } else {
        let anchor = anchor_state(model);
        let mut v = v_raw.to_vec();
        let sweeps = tighten_values(
            model,
            u_ipm,
            &mut v,
            1e-10 * (1.0 + u_ipm.abs()),
            20 * model.dims.map_or(4, |d| d.weeks),
        );
        log::debug!("dual tightening used {sweeps} sweeps");
        let shift = v[anchor];
        for vi in v.iter_mut() {
            *vi -= shift;
        }
        (u_ipm, v, anchor)
    };
    let rc_anch = reduced_costs(model, &v_anchored, u_dual);
    let mut worst_slack = 0.0f64;
    let mut worst_comp = 0.0f64;
    for s in 0..s_count {
        for a in 0..model.n_actions {
            let r = rc_anch[model.pair_index(s, a)];
            worst_slack = worst_slack.max(-r / cost_scale);
            if psol.y[model.pair_index(s, a)] > opts.support_tol {
                worst_comp = worst_comp.max(r.abs() / cost_scale);
            }
        }
    }
    let vsol = ValueSolution {
        u_weekly: u_dual,
        u_annual: u_dual * WEEKS_PER_YEAR as f64,
        v: v_anchored,
        anchor_state: anchor,
        worst_slack,
        worst_complementarity: worst_comp,
    };

    let report = SolveReport {
        n_states: s_count,
        n_actions: model.n_actions,
        lp_variables: lp.num_vars(),
        lp_rows: lp.num_rows(),
        kernel_nnz: model.kernel_nnz(),
        duality_gap_rel: (psol.u_weekly - vsol.u_weekly).abs() / (1.0 + psol.u_weekly.abs()),
        support_fraction: psol.support_fraction(),
        lp_iterations: sol.iterations,
        crossover_bottom_classes: bottom_classes,
        solve_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((psol, vsol, report))
}

pub fn solve_primal(model: &MdpModel) -> Result<PolicySolution> {
    solve(model, &PricingOptions::default()).map(|(p, _, _)| p)
}

pub fn solve_dual(model: &MdpModel) -> Result<ValueSolution> {
    solve(model, &PricingOptions::default()).map(|(_, v, _)| v)
}

/// Anchor state for the additive-shift freedom in v: full storage, median
/// regime, week 1 on reservoir models, state 0 otherwise.
pub fn anchor_state(model: &MdpModel) -> usize {
    match model.dims {
        Some(d) => d.state_index(d.storage_blocks, (d.n_regimes + 1) / 2, 1),
        None => 0,
    }
}

/// Explicit dual solve: max u s.t. u + v_s − Σ p v(s') + slack = c, slack ≥ 0.
/// Returns (u, anchored v, anchor).
fn solve_dual_explicit_lp(model: &MdpModel, lp_opts: &LpOptions) -> Result<(f64, Vec<f64>, usize)> {
    let s_count = model.n_states;
    let pairs = model.n_pairs();
    // variables: [u | v (s_count) | slack (pairs)]
    let ncols = 1 + s_count + pairs;
    let mut trips: Vec<(usize, usize, f64)> = Vec::with_capacity(model.kernel_nnz() + 3 * pairs);
    for s in 0..s_count {
        for a in 0..model.n_actions {
            let row = model.pair_index(s, a);
            trips.push((row, 0, 1.0));
            trips.push((row, 1 + s, 1.0));
            let (targets, probs) = model.successors(s, a);
            for (&t, &p) in targets.iter().zip(probs) {
                trips.push((row, 1 + t as usize, -p));
            }
            trips.push((row, 1 + s_count + row, 1.0));
        }
    }
    let a = CscMatrix::from_triplets(pairs, ncols, &trips);
    let mut objective = vec![0.0; ncols];
    objective[0] = -1.0; // maximize u
    let mut lower = vec![0.0; ncols];
    let mut upper = vec![f64::INFINITY; ncols];
    for j in 0..=s_count {
        lower[j] = f64::NEG_INFINITY;
        upper[j] = f64::INFINITY;
    }
    let lp = LinearProgram {
        objective,
        constraints: a,
        rhs: model.costs.clone(),
        lower,
        upper,
    };
    let sol = solve_lp(&lp, lp_opts)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Lp {
            status: sol.status,
            detail: "explicit dual LP failed".into(),
        });
    }
    let u = sol.x[0];
    let anchor = anchor_state(model);
    let mut v: Vec<f64> = (0..s_count).map(|s| sol.x[1 + s]).collect();
    tighten_values(model, u, &mut v, 1e-10 * (1.0 + u.abs()), 20 * model.dims.map_or(4, |d| d.weeks));
    let shift = v[anchor];
    for vi in v.iter_mut() {
        *vi -= shift;
    }
    Ok((u, v, anchor))
}

/// One weekly offer curve: marginal water values per storage level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OfferCurve {
    pub week: u32,
    pub regime: usize,
    /// (level ℓ, marginal value $/MWh of the block ℓ→ℓ+1, extrapolated flag)
    pub points: Vec<(usize, f64, bool)>,
    /// Number of adjacent level pairs where the marginal value increases
    /// with level (an offer stack expects non-increasing values).
    pub non_monotone_pairs: usize,
}

/// Marginal water values (v(ℓ) − v(ℓ+1)) / block-MWh per requested
/// (week, regime). Points touching unsupported states are flagged as
/// extrapolated: the dual only lower-bounds values off the support.
pub fn offer_curves(
    vsol: &ValueSolution,
    psol: &PolicySolution,
    model: &MdpModel,
    weeks: &[u32],
    regimes: &[usize],
) -> Result<Vec<OfferCurve>> {
    let dims = model
        .dims
        .ok_or_else(|| Error::ModelMismatch("offer curves need a reservoir model".into()))?;
    let block_energy_mwh = dims.block_mw * HOURS_PER_WEEK;
    let mut curves = Vec::new();
    for &week in weeks {
        if !(1..=dims.weeks as u32).contains(&week) {
            return Err(Error::Validation(format!("week {week} out of range")));
        }
        for &regime in regimes {
            if !(1..=dims.n_regimes).contains(&regime) {
                return Err(Error::Validation(format!("regime {regime} out of range")));
            }
            let mut points = Vec::with_capacity(dims.storage_blocks);
            let mut non_monotone = 0usize;
            let mut prev: Option<f64> = None;
            for level in 0..dims.storage_blocks {
                let s_lo = dims.state_index(level, regime, week);
                let s_hi = dims.state_index(level + 1, regime, week);
                let marginal = (vsol.v[s_lo] - vsol.v[s_hi]) / block_energy_mwh;
                let extrapolated = !(psol.support[s_lo] && psol.support[s_hi]);
                if let Some(p) = prev {
                    if marginal > p + 1e-9 {
                        non_monotone += 1;
                    }
                }
                prev = Some(marginal);
                points.push((level, marginal, extrapolated));
            }
            curves.push(OfferCurve {
                week,
                regime,
                points,
                non_monotone_pairs: non_monotone,
            });
        }
    }
    Ok(curves)
}

/// Dense policy table entry.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PolicyCell {
    pub week: u32,
    pub regime: usize,
    pub level: usize,
    /// Release in MW for supported states; `None` marks unsupported.
    pub release_mw: Option<f64>,
}

/// Dense 52 × |R| × (levels) table of the extracted policy.
pub fn policy_table(psol: &PolicySolution, model: &MdpModel) -> Result<Vec<PolicyCell>> {
    let dims = model
        .dims
        .ok_or_else(|| Error::ModelMismatch("policy tables need a reservoir model".into()))?;
    let mut out = Vec::with_capacity(model.n_states);
    for week in 1..=dims.weeks as u32 {
        for regime in 1..=dims.n_regimes {
            for level in 0..=dims.storage_blocks {
                let s = dims.state_index(level, regime, week);
                out.push(PolicyCell {
                    week,
                    regime,
                    level,
                    release_mw: psol.policy[s].map(|a| a as f64 * dims.block_mw),
                });
            }
        }
    }
    Ok(out)
}

fn file_writer(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

/// Writes policy.csv: week,regime,level,release_mw,supported.
pub fn write_policy_csv(
    path: &Path,
    psol: &PolicySolution,
    model: &MdpModel,
    config_hash: Option<&str>,
) -> Result<()> {
    let table = policy_table(psol, model)?;
    let mut w = file_writer(path)?;
    let io = |e| Error::io(path, e);
    if let Some(h) = config_hash {
        writeln!(w, "# config_hash={h}").map_err(io)?;
    }
    writeln!(w, "week,regime,level,release_mw,supported").map_err(io)?;
    for cell in table {
        match cell.release_mw {
            Some(r) => writeln!(w, "{},{},{},{},1", cell.week, cell.regime, cell.level, r),
            None => writeln!(w, "{},{},{},,0", cell.week, cell.regime, cell.level),
        }
        .map_err(io)?;
    }
    Ok(())
}

/// Writes values.csv: week,regime,level,v_dollars,supported.
pub fn write_values_csv(
    path: &Path,
    vsol: &ValueSolution,
    psol: &PolicySolution,
    model: &MdpModel,
    config_hash: Option<&str>,
) -> Result<()> {
    let dims = model
        .dims
        .ok_or_else(|| Error::ModelMismatch("value tables need a reservoir model".into()))?;
    let mut w = file_writer(path)?;
    let io = |e| Error::io(path, e);
    if let Some(h) = config_hash {
        writeln!(w, "# config_hash={h}").map_err(io)?;
    }
    writeln!(w, "week,regime,level,v_dollars,supported").map_err(io)?;
    for week in 1..=dims.weeks as u32 {
        for regime in 1..=dims.n_regimes {
            for level in 0..=dims.storage_blocks {
                let s = dims.state_index(level, regime, week);
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    week,
                    regime,
                    level,
                    vsol.v[s],
                    if psol.support[s] { 1 } else { 0 }
                )
                .map_err(io)?;
            }
        }
    }
    Ok(())
}

/// Writes offer_curves.csv: week,regime,level,marginal_value_per_mwh,extrapolated.
pub fn write_offer_curves_csv(
    path: &Path,
    curves: &[OfferCurve],
    config_hash: Option<&str>,
) -> Result<()> {
    let mut w = file_writer(path)?;
    let io = |e| Error::io(path, e);
    if let Some(h) = config_hash {
        writeln!(w, "# config_hash={h}").map_err(io)?;
    }
    writeln!(w, "week,regime,level,marginal_value_per_mwh,extrapolated").map_err(io)?;
    for c in curves {
        for &(level, marginal, extrapolated) in &c.points {
            writeln!(
                w,
                "{},{},{},{},{}",
                c.week,
                c.regime,
                level,
                marginal,
                if extrapolated { 1 } else { 0 }
            )
            .map_err(io)?;
        }
    }
    Ok(())
}
