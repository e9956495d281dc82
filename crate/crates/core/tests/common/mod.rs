//! Independent reference implementations used as oracles: a dense two-phase
//! simplex, brute-force vertex enumeration, relative value iteration, policy
//! iteration with exact dense policy evaluation, and random problem
//! generators. None of these share code with the solvers under test.

#![allow(dead_code)]

use hydrovalue::mdp::MdpModel;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

/// Outcome of the dense simplex oracle.
#[derive(Debug, PartialEq)]
pub enum SimplexOutcome {
    Optimal { objective: f64, x: Vec<f64> },
    Infeasible,
    Unbounded,
}

/// Two-phase dense simplex with Bland's rule for `min cᵀx, Ax = b, x ≥ 0`.
pub fn dense_simplex(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> SimplexOutcome {
    let m = a.len();
    let n = c.len();
    // phase 1: artificial variables with +1 on rows (b flipped nonnegative)
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for i in 0..m {
        let mut row = a[i].clone();
        let mut bi = b[i];
        if bi < 0.0 {
            for v in &mut row {
                *v = -*v;
            }
            bi = -bi;
        }
        rows.push(row);
        rhs.push(bi);
    }
    let total = n + m;
    let mut tab: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut row = rows[i].clone();
            row.resize(total, 0.0);
            row[n + i] = 1.0;
            row.push(rhs[i]);
            row
        })
        .collect();
    let mut basis: Vec<usize> = (n..n + m).collect();
    // phase-1 objective: minimize sum of artificials
    let mut cost1 = vec![0.0; total];
    for j in n..total {
        cost1[j] = 1.0;
    }
    if !simplex_core(&mut tab, &mut basis, &cost1, n + m) {
        return SimplexOutcome::Unbounded; // cannot happen in phase 1
    }
    let phase1_obj: f64 = basis
        .iter()
        .enumerate()
        .map(|(i, &j)| if j >= n { tab[i][total] } else { 0.0 })
        .sum();
    if phase1_obj > 1e-8 {
        return SimplexOutcome::Infeasible;
    }
    // drive remaining artificials out of the basis where possible
    for i in 0..m {
        if basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| tab[i][j].abs() > 1e-9) {
                pivot(&mut tab, &mut basis, i, j);
            }
        }
    }
    // phase 2 on original costs (artificial columns frozen)
    let mut cost2 = c.to_vec();
    cost2.resize(total, 1e30);
    if !simplex_core(&mut tab, &mut basis, &cost2, n) {
        return SimplexOutcome::Unbounded;
    }
    let mut x = vec![0.0; n];
    for (i, &j) in basis.iter().enumerate() {
        if j < n {
            x[j] = tab[i][total];
        }
    }
    let objective = c.iter().zip(&x).map(|(c, x)| c * x).sum();
    SimplexOutcome::Optimal { objective, x }
}

/// Runs Bland-rule simplex; returns false on unboundedness. Columns at index
/// ≥ `col_limit` are never allowed to enter.
fn simplex_core(tab: &mut [Vec<f64>], basis: &mut [usize], cost: &[f64], col_limit: usize) -> bool {
    let m = tab.len();
    let total = tab[0].len() - 1;
    for _ in 0..100_000 {
        // reduced costs from the current basis
        let mut y = vec![0.0; m];
        for (i, &bj) in basis.iter().enumerate() {
            y[i] = cost[bj];
        }
        let mut entering = None;
        for j in 0..col_limit.min(total) {
            if basis.contains(&j) {
                continue;
            }
            let mut rc = cost[j];
            for i in 0..m {
                rc -= y[i] * tab[i][j];
            }
            if rc < -1e-9 {
                entering = Some(j);
                break; // Bland: smallest index
            }
        }
        let Some(j) = entering else {
            return true;
        };
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            if tab[i][j] > 1e-11 {
                let ratio = tab[i][total] / tab[i][j];
                if ratio < best - 1e-12 || (ratio < best + 1e-12 && leave.map_or(true, |l| basis[i] < basis[l]))
                {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(i) = leave else {
            return false;
        };
        pivot(tab, basis, i, j);
    }
    panic!("simplex oracle exceeded its iteration cap");
}

fn pivot(tab: &mut [Vec<f64>], basis: &mut [usize], i: usize, j: usize) {
    let m = tab.len();
    let w = tab[0].len();
    let p = tab[i][j];
    for v in tab[i].iter_mut() {
        *v /= p;
    }
    for r in 0..m {
        if r != i && tab[r][j].abs() > 0.0 {
            let f = tab[r][j];
            for k in 0..w {
                tab[r][k] -= f * tab[i][k];
            }
        }
    }
    basis[i] = j;
}

/// Brute-force vertex enumeration for tiny standard-form LPs.
pub fn enumerate_vertices_min(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Option<f64> {
    let m = a.len();
    let n = c.len();
    let mut best: Option<f64> = None;
    let mut combo: Vec<usize> = (0..m).collect();
    loop {
        // solve A_B x_B = b for the current column subset
        let mut mat = nalgebra::DMatrix::zeros(m, m);
        for (k, &j) in combo.iter().enumerate() {
            for i in 0..m {
                mat[(i, k)] = a[i][j];
            }
        }
        let rhs = nalgebra::DVector::from_column_slice(b);
        if let Some(sol) = mat.lu().solve(&rhs) {
            if sol.iter().all(|&v| v >= -1e-9) {
                let obj: f64 = combo.iter().enumerate().map(|(k, &j)| c[j] * sol[k]).sum();
                best = Some(best.map_or(obj, |b: f64| b.min(obj)));
            }
        }
        // next combination of size m from 0..n
        let mut i = m;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if combo[i] != i + n - m {
                combo[i] += 1;
                for k in i + 1..m {
                    combo[k] = combo[k - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Relative value iteration for the average-cost gain of a unichain MDP,
/// with the standard aperiodicity transformation.
pub fn rvi_gain(model: &MdpModel, tol: f64) -> f64 {
    let n = model.n_states;
    let lambda = 0.5;
    let mut h = vec![0.0; n];
    let mut th = vec![0.0; n];
    for _ in 0..2_000_000 {
        for s in 0..n {
            let mut best = f64::INFINITY;
            for a in 0..model.n_actions {
                let (targets, probs) = model.successors(s, a);
                let mut v = model.costs[model.pair_index(s, a)];
                for (&t, &p) in targets.iter().zip(probs) {
                    v += p * h[t as usize];
                }
                best = best.min(v);
            }
            th[s] = (1.0 - lambda) * h[s] + lambda * best;
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in 0..n {
            let d = th[s] - h[s];
            lo = lo.min(d);
            hi = hi.max(d);
        }
        let anchor = th[0];
        for s in 0..n {
            h[s] = th[s] - anchor;
        }
        if hi - lo < tol * lambda {
            return 0.5 * (hi + lo) / lambda;
        }
    }
    panic!("relative value iteration did not converge");
}

/// Exact gain and bias of a fixed policy: solves g·1 + h = c_σ + P_σ h with
/// h(0) = 0 by a dense linear system.
pub fn evaluate_policy_dense(model: &MdpModel, policy: &[usize]) -> (f64, Vec<f64>) {
    let n = model.n_states;
    let mut mat = nalgebra::DMatrix::zeros(n + 1, n + 1);
    let mut rhs = nalgebra::DVector::zeros(n + 1);
    for s in 0..n {
        mat[(s, s)] += 1.0;
        mat[(s, n)] = 1.0; // gain column
        let (targets, probs) = model.successors(s, policy[s]);
        for (&t, &p) in targets.iter().zip(probs) {
            mat[(s, t as usize)] -= p;
        }
        rhs[s] = model.costs[model.pair_index(s, policy[s])];
    }
    mat[(n, 0)] = 1.0; // h(0) = 0
    let sol = mat.lu().solve(&rhs).expect("policy evaluation system");
    let gain = sol[n];
    let bias = (0..n).map(|s| sol[s]).collect();
    (gain, bias)
}

/// Howard policy iteration with exact evaluation; returns (gain, policy).
pub fn policy_iteration(model: &MdpModel) -> (f64, Vec<usize>) {
    let n = model.n_states;
    let mut policy = vec![0usize; n];
    for _ in 0..1000 {
        let (gain, bias) = evaluate_policy_dense(model, &policy);
        let mut improved = false;
        for s in 0..n {
            let mut best_a = policy[s];
            let mut best_v = f64::INFINITY;
            for a in 0..model.n_actions {
                let (targets, probs) = model.successors(s, a);
                let mut v = model.costs[model.pair_index(s, a)];
                for (&t, &p) in targets.iter().zip(probs) {
                    v += p * bias[t as usize];
                }
                if v < best_v - 1e-11 {
                    best_v = v;
                    best_a = a;
                }
            }
            if best_a != policy[s] {
                policy[s] = best_a;
                improved = true;
            }
        }
        if !improved {
            return (gain, policy);
        }
    }
    panic!("policy iteration did not converge");
}

/// Exact stationary distribution of the chain under a policy (dense solve);
/// valid for unichain models.
pub fn stationary_dense(model: &MdpModel, policy: &[usize]) -> Vec<f64> {
    let n = model.n_states;
    let mut mat = nalgebra::DMatrix::zeros(n, n);
    for s in 0..n {
        mat[(s, s)] -= 1.0;
        let (targets, probs) = model.successors(s, policy[s]);
        for (&t, &p) in targets.iter().zip(probs) {
            mat[(t as usize, s)] += p;
        }
    }
    // replace the last equation with normalization
    for s in 0..n {
        mat[(n - 1, s)] = 1.0;
    }
    let mut rhs = nalgebra::DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let sol = mat.lu().solve(&rhs).expect("stationary system");
    sol.iter().copied().collect()
}

/// Random unichain MDP: sparse kernels plus a small uniform reset to state 0,
/// which guarantees a single recurrent class under every policy.
pub fn random_unichain_mdp(n_states: usize, n_actions: usize, seed: u64) -> MdpModel {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let reset = 0.05;
    let mut kernel = Vec::with_capacity(n_states * n_actions);
    let mut costs = Vec::with_capacity(n_states * n_actions);
    for _s in 0..n_states {
        for _a in 0..n_actions {
            let k = rng.gen_range(1..=4usize.min(n_states));
            let mut weights: Vec<(usize, f64)> = (0..k)
                .map(|_| (rng.gen_range(0..n_states), rng.gen::<f64>() + 0.05))
                .collect();
            let total: f64 = weights.iter().map(|(_, w)| w).sum();
            for (_, w) in &mut weights {
                *w = (1.0 - reset) * *w / total;
            }
            weights.push((0, reset));
            kernel.push(weights);
            costs.push(rng.gen::<f64>() * 10.0);
        }
    }
    MdpModel::from_parts(n_states, n_actions, kernel, costs, None).expect("random model")
}

/// Random feasible standard-form LP with strictly positive costs (bounded).
pub fn random_feasible_lp(
    m: usize,
    n: usize,
    seed: u64,
) -> (Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut a: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            (0..n)
                .map(|_| {
                    if rng.gen::<f64>() < 0.3 {
                        rng.gen::<f64>() * 2.0 - 1.0
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    // anchor entries keep the rows independent even at low densities
    for i in 0..m {
        a[i][i % n] += 1.0;
        a[i][(i + m) % n] += 0.5;
    }
    let x0: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    let b: Vec<f64> = (0..m)
        .map(|i| (0..n).map(|j| a[i][j] * x0[j]).sum())
        .collect();
    let c: Vec<f64> = (0..n).map(|_| 0.1 + rng.gen::<f64>()).collect();
    (c, a, b)
}

pub fn to_csc(a: &[Vec<f64>]) -> hydrovalue::convex_core::CscMatrix {
    let m = a.len();
    let n = a[0].len();
    let mut trips = Vec::new();
    for (i, row) in a.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 {
                trips.push((i, j, v));
            }
        }
    }
    hydrovalue::convex_core::CscMatrix::from_triplets(m, n, &trips)
}
