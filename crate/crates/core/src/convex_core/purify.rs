//! Purification of an interior optimal point to a vertex (basic solution).
//!
//! Starting from the support of an interior-point solution, repeatedly finds
//! a direction in the null space of the support columns and pushes along it,
//! without worsening the objective, until a variable hits a bound; the
//! support shrinks until the remaining columns are linearly independent.
//!
//! Null directions are found cheaply by peeling singleton columns (columns
//! with one live entry pin a row, as happens with residual-splitting slacks)
//! and taking an SVD null vector of the small remaining core.

use super::ipm::{LinearProgram, LpSolution};
use super::sparse::CscMatrix;

#[derive(Debug, Clone)]
pub struct PurifyOptions {
    /// A variable within this (scaled) distance of a finite bound is treated
    /// as nonbasic and snapped.
    pub bound_tol: f64,
    /// Directions with |cᵀd| up to this (relative to ‖c‖∞) still count as
    /// objective-neutral; larger ascent directions are rejected.
    pub obj_tol: f64,
    /// Refuse dense core null-space computations beyond this dimension.
    pub max_core_dim: usize,
}

impl Default for PurifyOptions {
    fn default() -> Self {
        PurifyOptions {
            bound_tol: 1e-9,
            obj_tol: 1e-7,
            max_core_dim: 2000,
        }
    }
}

/// Pushes `sol.x` to a vertex of the feasible set with no worse objective.
/// Sets `basic = true` when the remaining support columns are independent.
pub fn purify_to_vertex(lp: &LinearProgram, sol: &mut LpSolution, opts: &PurifyOptions) {
    let n = lp.num_vars();
    let x = &mut sol.x;
    let cnorm = lp.objective.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1.0);
    let xscale = x.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1.0);

    let at_bound = |xj: f64, j: usize, tol: f64| -> Option<f64> {
        let lo = lp.lower[j];
        let up = lp.upper[j];
        if lo.is_finite() && (xj - lo).abs() <= tol * (1.0 + lo.abs()) {
            Some(lo)
        } else if up.is_finite() && (up - xj).abs() <= tol * (1.0 + up.abs()) {
            Some(up)
        } else {
            None
        }
    };

    // snap near-bound variables
    let mut in_support = vec![false; n];
    for j in 0..n {
        if let Some(b) = at_bound(x[j], j, opts.bound_tol * xscale.max(1.0)) {
            x[j] = b;
        } else {
            in_support[j] = true;
        }
    }

    let mut guard = in_support.iter().filter(|&&s| s).count() + 2;
    loop {
        guard = guard.saturating_sub(1);
        if guard == 0 {
            break;
        }
        let support: Vec<usize> = (0..n).filter(|&j| in_support[j]).collect();
        if support.is_empty() {
            sol.basic = true;
            break;
        }
        let d = match null_direction(&lp.constraints, &support, opts) {
            NullResult::Direction(d) => d,
            NullResult::FullRank => {
                sol.basic = true;
                break;
            }
            NullResult::TooLarge => {
                log::warn!("purification skipped: support core exceeds the dense limit");
                break;
            }
        };
        // orient: never increase the objective
        let mut cd: f64 = support.iter().map(|&j| lp.objective[j] * d[&j]).sum();
        let mut dir: std::collections::BTreeMap<usize, f64> = d;
        if cd > 0.0 {
            for v in dir.values_mut() {
                *v = -*v;
            }
            cd = -cd;
        }
        if cd > opts.obj_tol * cnorm {
            break; // ascent-only direction; numerical trouble, stop here
        }
        // ratio test toward the nearest bound
        let step_for = |dirmap: &std::collections::BTreeMap<usize, f64>| -> Option<(f64, usize)> {
            let mut alpha = f64::INFINITY;
            let mut blocker = usize::MAX;
            for (&j, &dj) in dirmap {
                if dj < -1e-14 && lp.lower[j].is_finite() {
                    let a = (x[j] - lp.lower[j]) / -dj;
                    if a < alpha {
                        alpha = a;
                        blocker = j;
                    }
                } else if dj > 1e-14 && lp.upper[j].is_finite() {
                    let a = (lp.upper[j] - x[j]) / dj;
                    if a < alpha {
                        alpha = a;
                        blocker = j;
                    }
                }
            }
            if blocker == usize::MAX {
                None
            } else {
                Some((alpha, blocker))
            }
        };
        let step = match step_for(&dir) {
            Some(s) => Some(s),
            None if cd.abs() <= opts.obj_tol * cnorm => {
                // objective-neutral: the reverse direction may hit a bound
                for v in dir.values_mut() {
                    *v = -*v;
                }
                step_for(&dir)
            }
            None => None,
        };
        let Some((alpha, blocker)) = step else {
            log::warn!("purification found an unblocked ray; leaving solution non-basic");
            break;
        };
        for (&j, &dj) in &dir {
            x[j] += alpha * dj;
        }
        // snap the blocker exactly and drop it from the support
        if let Some(b) = at_bound(x[blocker], blocker, 1e-7 * xscale.max(1.0)) {
            x[blocker] = b;
        }
        in_support[blocker] = false;
    }

    sol.objective = lp.objective.iter().zip(&sol.x).map(|(c, x)| c * x).sum();
    let ax = lp.constraints.mul_vec(&sol.x);
    sol.primal_residual = ax
        .iter()
        .zip(&lp.rhs)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
}

enum NullResult {
    Direction(std::collections::BTreeMap<usize, f64>),
    FullRank,
    TooLarge,
}

/// Finds a vector d ≠ 0 with A_support · d = 0, or reports full column rank.
fn null_direction(a: &CscMatrix, support: &[usize], opts: &PurifyOptions) -> NullResult {
    use std::collections::BTreeMap;
    let m = a.nrows();
    // live entries per support column, restricted to live rows
    let ns = support.len();
    let mut col_entries: Vec<Vec<(usize, f64)>> = Vec::with_capacity(ns);
    let mut row_entries: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m]; // (local col, val)
    for (k, &j) in support.iter().enumerate() {
        let (rows, vals) = a.col(j);
        let entries: Vec<(usize, f64)> = rows.iter().copied().zip(vals.iter().copied()).collect();
        for &(r, v) in &entries {
            row_entries[r].push((k, v));
        }
        col_entries.push(entries);
    }
    let mut row_live = vec![true; m];
    let mut col_live = vec![true; ns];
    let mut col_count: Vec<usize> = col_entries.iter().map(|e| e.len()).collect();

    // peel: (local col, pivot val, row's other live entries at peel time)
    let mut peels: Vec<(usize, f64, Vec<(usize, f64)>)> = Vec::new();
    let mut zero_col: Option<usize> = None;
    let mut queue: std::collections::VecDeque<usize> = (0..ns).collect();
    while let Some(k) = queue.pop_front() {
        if !col_live[k] {
            continue;
        }
        match col_count[k] {
            0 => {
                zero_col = Some(k);
                break;
            }
            1 => {
                // find its live row
                let &(r, piv) = col_entries[k]
                    .iter()
                    .find(|&&(r, _)| row_live[r])
                    .expect("count says one live entry");
                let others: Vec<(usize, f64)> = row_entries[r]
                    .iter()
                    .filter(|&&(kk, _)| kk != k && col_live[kk])
                    .copied()
                    .collect();
                // removing row r decrements counts of its other columns
                for &(kk, _) in &others {
                    col_count[kk] -= 1;
                    queue.push_back(kk);
                }
                row_live[r] = false;
                col_live[k] = false;
                peels.push((k, piv, others));
            }
            _ => {}
        }
    }

    let mut d_local = vec![0.0f64; ns];
    let found = if let Some(k0) = zero_col {
        d_local[k0] = 1.0;
        true
    } else {
        // dense core null space
        let core_cols: Vec<usize> = (0..ns).filter(|&k| col_live[k]).collect();
        if core_cols.is_empty() {
            false
        } else {
            let core_rows: Vec<usize> = (0..m).filter(|&r| row_live[r] && !row_entries[r].is_empty()).collect();
            if core_cols.len() > opts.max_core_dim || core_rows.len() > 50 * opts.max_core_dim {
                return NullResult::TooLarge;
            }
            let rmap: BTreeMap<usize, usize> =
                core_rows.iter().enumerate().map(|(i, &r)| (r, i)).collect();
            let mut mat = nalgebra::DMatrix::<f64>::zeros(core_rows.len().max(1), core_cols.len());
            let mut scale = 0.0f64;
            for (ci, &k) in core_cols.iter().enumerate() {
                for &(r, v) in &col_entries[k] {
                    if let Some(&ri) = rmap.get(&r) {
                        mat[(ri, ci)] = v;
                        scale = scale.max(v.abs());
                    }
                }
            }
            // kernel via the Gram matrix: wide cores have kernels a thin SVD
            // would not expose; eigenvalues of CᵀC are squared singular values
            let gram = mat.transpose() * &mat;
            let eig = nalgebra::SymmetricEigen::new(gram);
            let lmax = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
            let mut smallest = 0usize;
            for i in 1..eig.eigenvalues.len() {
                if eig.eigenvalues[i] < eig.eigenvalues[smallest] {
                    smallest = i;
                }
            }
            // σ_min/σ_max ≤ 1e-9 counts as rank-deficient
            let tol = lmax * 1e-18 + scale * scale * 1e-26 + f64::MIN_POSITIVE;
            if eig.eigenvalues[smallest] <= tol {
                for (ci, &k) in core_cols.iter().enumerate() {
                    d_local[k] = eig.eigenvectors[(ci, smallest)];
                }
                true
            } else {
                false
            }
        }
    };

    if !found {
        return NullResult::FullRank;
    }

    // back-substitute peels in reverse: each peeled column's row gives its value
    for (k, piv, others) in peels.iter().rev() {
        let mut acc = 0.0;
        for &(kk, v) in others {
            acc += v * d_local[kk];
        }
        d_local[*k] = -acc / piv;
    }

    // canonical sign: first nonzero positive
    if let Some(first) = d_local.iter().find(|v| v.abs() > 1e-14) {
        if *first < 0.0 {
            for v in &mut d_local {
                *v = -*v;
            }
        }
    }
    let norm = d_local.iter().fold(0.0f64, |mx, &v| mx.max(v.abs()));
    let dir: BTreeMap<usize, f64> = support
        .iter()
        .enumerate()
        .filter(|&(k, _)| d_local[k].abs() > 1e-13 * norm)
        .map(|(k, &j)| (j, d_local[k] / norm))
        .collect();
    if dir.is_empty() {
        return NullResult::FullRank;
    }
    NullResult::Direction(dir)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex_core::ipm::{solve_lp, LpOptions};

    #[test]
    fn purifies_degenerate_face_to_vertex() {
        // minimize 0 s.t. x + y = 1: interior point (0.5, 0.5) → a vertex
        let a = CscMatrix::from_triplets(1, 2, &[(0, 0, 1.0), (0, 1, 1.0)]);
        let lp = LinearProgram::standard_form(vec![0.0, 0.0], a, vec![1.0]);
        let mut sol = solve_lp(&lp, &LpOptions::default()).unwrap();
        purify_to_vertex(&lp, &mut sol, &PurifyOptions::default());
        assert!(sol.basic);
        let nonzero = sol.x.iter().filter(|&&v| v > 1e-9).count();
        assert_eq!(nonzero, 1, "vertex has a single supported column: {:?}", sol.x);
        assert!((sol.x[0] + sol.x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn residual_split_pairs_collapse() {
        // β free; β + u_i − v_i = f_i, i = 0,1; minimize Σ(u+v).
        // Optimum has pinball residuals; a vertex interpolates one point.
        let mut trips = vec![];
        for i in 0..2 {
            trips.push((i, 0, 1.0)); // β
            trips.push((i, 1 + i, 1.0)); // u_i
            trips.push((i, 3 + i, -1.0)); // v_i
        }
        let a = CscMatrix::from_triplets(2, 5, &trips);
        let lp = LinearProgram {
            objective: vec![0.0, 0.5, 0.5, 0.5, 0.5],
            constraints: a,
            rhs: vec![1.0, 3.0],
            lower: vec![f64::NEG_INFINITY, 0.0, 0.0, 0.0, 0.0],
            upper: vec![f64::INFINITY; 5],
        };
        let mut sol = solve_lp(&lp, &LpOptions::default()).unwrap();
        purify_to_vertex(&lp, &mut sol, &PurifyOptions::default());
        assert!(sol.basic);
        // median of {1, 3}: any β in [1,3] optimal; vertex interpolates a data point
        let beta = sol.x[0];
        assert!(
            (beta - 1.0).abs() < 1e-7 || (beta - 3.0).abs() < 1e-7,
            "vertex β should interpolate a point, got {beta}"
        );
        assert!((sol.objective - 1.0).abs() < 1e-7);
    }
}
