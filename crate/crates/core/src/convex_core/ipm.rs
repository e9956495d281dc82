//! Sparse primal-dual interior-point method with Mehrotra's
//! predictor-corrector, for equality-constrained LPs with variable bounds:
//!
//! ```text
//! minimize cᵀx   subject to  A x = b,  l ≤ x ≤ u
//! ```
//!
//! Newton systems are solved through the quasi-definite KKT factorization in
//! [`super::ldl`], refactorized each iteration with fixed symbolic analysis.
//! The solver is deterministic: no randomized heuristics, fixed orderings.

use super::ldl::{default_pivot_order, KktSolver};
use super::sparse::CscMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LinearProgram {
    /// Minimization objective coefficients, length n.
    pub objective: Vec<f64>,
    /// Equality constraint matrix A (m×n).
    pub constraints: CscMatrix,
    /// Right-hand side b, length m.
    pub rhs: Vec<f64>,
    /// Per-variable lower bounds; `f64::NEG_INFINITY` for unbounded below.
    pub lower: Vec<f64>,
    /// Per-variable upper bounds; `f64::INFINITY` for unbounded above.
    pub upper: Vec<f64>,
}

impl LinearProgram {
    /// Standard-form LP: x ≥ 0, no upper bounds.
    pub fn standard_form(objective: Vec<f64>, constraints: CscMatrix, rhs: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            objective,
            constraints,
            rhs,
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let m = self.num_rows();
        if self.constraints.ncols() != n || self.constraints.nrows() != m {
            return Err(Error::Validation(format!(
                "LP dimension mismatch: A is {}x{}, c has {}, b has {}",
                self.constraints.nrows(),
                self.constraints.ncols(),
                n,
                m
            )));
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::Validation("LP bound vectors must have length n".into()));
        }
        for (j, (&lo, &up)) in self.lower.iter().zip(&self.upper).enumerate() {
            if lo > up {
                return Err(Error::Validation(format!("variable {j}: lower {lo} > upper {up}")));
            }
            if lo.is_nan() || up.is_nan() {
                return Err(Error::Validation(format!("variable {j}: NaN bound")));
            }
        }
        if self.objective.iter().any(|v| !v.is_finite())
            || self.rhs.iter().any(|v| !v.is_finite())
            || self.constraints.values().iter().any(|v| !v.is_finite())
        {
            return Err(Error::Validation("LP data must be finite".into()));
        }
        Ok(())
    }

    /// Writes the program in CPLEX LP text format for cross-checking against
    /// external solvers.
    pub fn write_lp_format<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "Minimize")?;
        write!(w, " obj:")?;
        for (j, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                write!(w, " {} {} x{}", if c < 0.0 { "-" } else { "+" }, c.abs(), j)?;
            }
        }
        writeln!(w, "\nSubject To")?;
        let at = self.constraints.transpose();
        for i in 0..self.num_rows() {
            write!(w, " r{}:", i)?;
            let (cols, vals) = at.col(i);
            for (&j, &v) in cols.iter().zip(vals) {
                write!(w, " {} {} x{}", if v < 0.0 { "-" } else { "+" }, v.abs(), j)?;
            }
            writeln!(w, " = {}", self.rhs[i])?;
        }
        writeln!(w, "Bounds")?;
        for j in 0..self.num_vars() {
            let (lo, up) = (self.lower[j], self.upper[j]);
            match (lo.is_finite(), up.is_finite()) {
                (true, true) => writeln!(w, " {} <= x{} <= {}", lo, j, up)?,
                (true, false) => writeln!(w, " x{} >= {}", j, lo)?,
                (false, true) => writeln!(w, " -inf <= x{} <= {}", j, up)?,
                (false, false) => writeln!(w, " x{} free", j)?,
            }
        }
        writeln!(w, "End")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Multipliers for the equality rows.
    pub duals: Vec<f64>,
    /// c − Aᵀ·duals.
    pub reduced_costs: Vec<f64>,
    pub status: LpStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub rel_gap: f64,
    /// Farkas-type ray when infeasible (dual ray) or unbounded (primal ray).
    pub certificate: Option<Vec<f64>>,
    /// Set by vertex purification.
    pub basic: bool,
}

#[derive(Debug, Clone)]
pub struct LpOptions {
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub tol_gap: f64,
    pub max_iters: usize,
    pub reg: f64,
    pub refine_steps: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            tol_primal: 1e-9,
            tol_dual: 1e-9,
            tol_gap: 1e-10,
            max_iters: 200,
            reg: 1e-8,
            refine_steps: 6,
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum VarKind {
    Free,
    NonNeg,
    Boxed(f64), // range r = upper − lower after shifting to zero
}

/// Canonicalized problem: x̂ with classes Free / x̂ ≥ 0 / 0 ≤ x̂ ≤ r,
/// where x_orig = sign·x̂ + shift.
struct Canon {
    a: CscMatrix,
    c: Vec<f64>,
    b: Vec<f64>,
    kind: Vec<VarKind>,
    sign: Vec<f64>,
    shift: Vec<f64>,
    obj_const: f64,
    c_scale: f64,
}

fn canonicalize(lp: &LinearProgram) -> Canon {
    let n = lp.num_vars();
    let mut sign = vec![1.0; n];
    let mut shift = vec![0.0; n];
    let mut kind = vec![VarKind::Free; n];
    for j in 0..n {
        let (lo, up) = (lp.lower[j], lp.upper[j]);
        match (lo.is_finite(), up.is_finite()) {
            (true, false) => {
                kind[j] = VarKind::NonNeg;
                shift[j] = lo;
            }
            (true, true) => {
                kind[j] = VarKind::Boxed(up - lo);
                shift[j] = lo;
            }
            (false, true) => {
                // mirror: x̂ = u − x ≥ 0
                kind[j] = VarKind::NonNeg;
                sign[j] = -1.0;
                shift[j] = up;
            }
            (false, false) => kind[j] = VarKind::Free,
        }
    }
    // b̂ = b − A·shift, Â = A·diag(sign), ĉ = diag(sign)·c
    let mut b = lp.rhs.clone();
    let ashift = lp.constraints.mul_vec(&shift);
    for i in 0..b.len() {
        b[i] -= ashift[i];
    }
    let mut a = lp.constraints.clone();
    for j in 0..n {
        if sign[j] < 0.0 {
            let start = a.col_start(j);
            let end = start + a.col_nnz(j);
            for v in &mut a.values_mut()[start..end] {
                *v = -*v;
            }
        }
    }
    let mut c: Vec<f64> = (0..n).map(|j| lp.objective[j] * sign[j]).collect();
    let obj_const: f64 = (0..n).map(|j| lp.objective[j] * shift[j]).sum();
    let c_scale = c.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1.0);
    for v in &mut c {
        *v /= c_scale;
    }
    Canon {
        a,
        c,
        b,
        kind,
        sign,
        shift,
        obj_const,
        c_scale,
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

/// Solves the LP. Returns an `LpSolution` whose `status` distinguishes
/// optimality from detected infeasibility/unboundedness; hard numerical
/// failures surface as `Err`.
pub fn solve_lp(lp: &LinearProgram, opts: &LpOptions) -> Result<LpSolution> {
    lp.validate()?;
    let cn = canonicalize(lp);
    let n = cn.c.len();
    let m = cn.b.len();

    let free: Vec<bool> = cn.kind.iter().map(|k| *k == VarKind::Free).collect();
    let order = default_pivot_order(&cn.a, &free);
    let mut kkt = KktSolver::new(&cn.a, order, opts.reg);

    // --- starting point (least-squares heuristic) ---
    kkt.factor(&vec![1.0; n])?;
    let zero_x = vec![0.0; n];
    let zero_y = vec![0.0; m];
    let (x_ls, _) = kkt.solve(&zero_x, &cn.b, 2);
    let (negz, lam_ls) = kkt.solve(&cn.c, &zero_y, 2);
    let z_ls: Vec<f64> = negz.iter().map(|v| -v).collect();

    let mut x = x_ls;
    let mut lam = lam_ls;
    let mut z = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut w = vec![0.0; n];

    let bounded: Vec<usize> = (0..n).filter(|&j| cn.kind[j] != VarKind::Free).collect();
    if !bounded.is_empty() {
        let xmin = bounded.iter().map(|&j| x[j]).fold(f64::INFINITY, f64::min);
        let zmin = bounded.iter().map(|&j| z_ls[j]).fold(f64::INFINITY, f64::min);
        let dx = (-1.5 * xmin).max(0.0);
        let dz = (-1.5 * zmin).max(0.0);
        let mut xs = 0.0;
        for &j in &bounded {
            xs += (x[j] + dx) * (z_ls[j] + dz);
        }
        xs *= 0.5;
        let sum_z: f64 = bounded.iter().map(|&j| z_ls[j] + dz).sum();
        let sum_x: f64 = bounded.iter().map(|&j| x[j] + dx).sum();
        let dx2 = if sum_z > 0.0 { xs / sum_z } else { 1.0 };
        let dz2 = if sum_x > 0.0 { xs / sum_x } else { 1.0 };
        for &j in &bounded {
            x[j] = (x[j] + dx + dx2).max(1e-4);
            z[j] = (z_ls[j] + dz + dz2).max(1e-4);
            if let VarKind::Boxed(r) = cn.kind[j] {
                let margin = (0.1 * r).min(1.0).max(1e-8);
                x[j] = x[j].clamp(margin, r - margin);
                w[j] = r - x[j];
                s[j] = z[j];
            }
        }
    }

    let k_count = cn
        .kind
        .iter()
        .map(|k| match k {
            VarKind::Free => 0,
            VarKind::NonNeg => 1,
            VarKind::Boxed(_) => 2,
        })
        .sum::<usize>()
        .max(1);

    let bnorm = inf_norm(&cn.b);
    let cnorm = inf_norm(&cn.c);

    let mut status = LpStatus::IterationLimit;
    let mut certificate = None;
    let mut iterations = 0;

    let mut theta = vec![0.0; n];
    let mut rd = vec![0.0; n];
    let mut rp = vec![0.0; m];
    let mut rhs_x = vec![0.0; n];

    for iter in 0..opts.max_iters {
        iterations = iter;
        // residuals
        let ax = cn.a.mul_vec(&x);
        for i in 0..m {
            rp[i] = cn.b[i] - ax[i];
        }
        let atl = cn.a.tr_mul_vec(&lam);
        for j in 0..n {
            rd[j] = cn.c[j] - atl[j] - z[j] + s[j];
        }
        let mut gap = 0.0;
        for j in 0..n {
            match cn.kind[j] {
                VarKind::Free => {}
                VarKind::NonNeg => gap += x[j] * z[j],
                VarKind::Boxed(_) => gap += x[j] * z[j] + w[j] * s[j],
            }
        }
        let mu = gap / k_count as f64;
        let obj = cn.c.iter().zip(&x).map(|(c, x)| c * x).sum::<f64>();
        let rel_p = inf_norm(&rp) / (1.0 + bnorm);
        let rel_d = inf_norm(&rd) / (1.0 + cnorm);
        let rel_g = gap / (1.0 + obj.abs());

        if rel_p <= opts.tol_primal && rel_d <= opts.tol_dual && rel_g <= opts.tol_gap {
            status = LpStatus::Optimal;
            break;
        }

        // divergence-based infeasibility / unboundedness detection
        let dual_size = inf_norm(&lam).max(inf_norm(&z));
        if dual_size > 1e9 * (1.0 + cnorm) {
            let scale = inf_norm(&lam).max(1e-300);
            let ray: Vec<f64> = lam.iter().map(|v| v / scale).collect();
            let atr = cn.a.tr_mul_vec(&ray);
            let btr: f64 = cn.b.iter().zip(&ray).map(|(b, r)| b * r).sum();
            let feasible_ray = (0..n).all(|j| match cn.kind[j] {
                VarKind::Free => atr[j].abs() <= 1e-6,
                _ => atr[j] <= 1e-6,
            });
            if feasible_ray && btr > 1e-8 {
                status = LpStatus::Infeasible;
                certificate = Some(ray);
                break;
            }
        }
        let xsize = inf_norm(&x);
        if xsize > 1e9 * (1.0 + bnorm) {
            let ray: Vec<f64> = x.iter().map(|v| v / xsize).collect();
            let ar = cn.a.mul_vec(&ray);
            let cr: f64 = cn.c.iter().zip(&ray).map(|(c, r)| c * r).sum();
            let nonneg_ok = (0..n).all(|j| match cn.kind[j] {
                VarKind::NonNeg => ray[j] >= -1e-7,
                VarKind::Boxed(_) => ray[j].abs() <= 1e-7,
                VarKind::Free => true,
            });
            if inf_norm(&ar) <= 1e-6 && cr < -1e-8 && nonneg_ok {
                status = LpStatus::Unbounded;
                // report ray in original variable space
                let mut orig = vec![0.0; n];
                for j in 0..n {
                    orig[j] = cn.sign[j] * ray[j];
                }
                certificate = Some(orig);
                break;
            }
        }

        // scaling matrix
        for j in 0..n {
            theta[j] = match cn.kind[j] {
                VarKind::Free => 0.0,
                VarKind::NonNeg => z[j] / x[j],
                VarKind::Boxed(_) => z[j] / x[j] + s[j] / w[j],
            };
        }
        kkt.factor(&theta)?;

        // affine predictor
        for j in 0..n {
            rhs_x[j] = rd[j] + z[j] - s[j];
        }
        let (dxa, _dla) = kkt.solve(&rhs_x, &rp, opts.refine_steps);
        let mut dza = vec![0.0; n];
        let mut dsa = vec![0.0; n];
        for j in 0..n {
            match cn.kind[j] {
                VarKind::Free => {}
                VarKind::NonNeg => dza[j] = -z[j] - z[j] * dxa[j] / x[j],
                VarKind::Boxed(_) => {
                    dza[j] = -z[j] - z[j] * dxa[j] / x[j];
                    dsa[j] = -s[j] + s[j] * dxa[j] / w[j];
                }
            }
        }
        let (apa, ada) = step_lengths(&cn.kind, &x, &w, &z, &s, &dxa, &dza, &dsa);
        let mut gap_aff = 0.0;
        for j in 0..n {
            match cn.kind[j] {
                VarKind::Free => {}
                VarKind::NonNeg => gap_aff += (x[j] + apa * dxa[j]) * (z[j] + ada * dza[j]),
                VarKind::Boxed(_) => {
                    gap_aff += (x[j] + apa * dxa[j]) * (z[j] + ada * dza[j])
                        + (w[j] - apa * dxa[j]) * (s[j] + ada * dsa[j])
                }
            }
        }
        let mu_aff = gap_aff / k_count as f64;
        let sigma = ((mu_aff / mu).powi(3)).clamp(1e-8, 1.0);

        // corrector
        let target = sigma * mu;
        for j in 0..n {
            rhs_x[j] = rd[j];
            match cn.kind[j] {
                VarKind::Free => {}
                VarKind::NonNeg => {
                    let rxz = target - x[j] * z[j] - dxa[j] * dza[j];
                    rhs_x[j] -= rxz / x[j];
                }
                VarKind::Boxed(_) => {
                    let rxz = target - x[j] * z[j] - dxa[j] * dza[j];
                    let rws = target - w[j] * s[j] + dxa[j] * dsa[j];
                    rhs_x[j] -= rxz / x[j];
                    rhs_x[j] += rws / w[j];
                }
            }
        }
        let (dx, dl) = kkt.solve(&rhs_x, &rp, opts.refine_steps);
        let mut dz = vec![0.0; n];
        let mut ds = vec![0.0; n];
        for j in 0..n {
            match cn.kind[j] {
                VarKind::Free => {}
                VarKind::NonNeg => {
                    let rxz = target - x[j] * z[j] - dxa[j] * dza[j];
                    dz[j] = (rxz - z[j] * dx[j]) / x[j];
                }
                VarKind::Boxed(_) => {
                    let rxz = target - x[j] * z[j] - dxa[j] * dza[j];
                    let rws = target - w[j] * s[j] + dxa[j] * dsa[j];
                    dz[j] = (rxz - z[j] * dx[j]) / x[j];
                    ds[j] = (rws + s[j] * dx[j]) / w[j];
                }
            }
        }
        let (apm, adm) = step_lengths(&cn.kind, &x, &w, &z, &s, &dx, &dz, &ds);
        let eta = 0.9995;
        let ap = (eta * apm).min(1.0);
        let ad = (eta * adm).min(1.0);
        for j in 0..n {
            x[j] += ap * dx[j];
            match cn.kind[j] {
                VarKind::Free => {}
                VarKind::NonNeg => z[j] += ad * dz[j],
                VarKind::Boxed(r) => {
                    z[j] += ad * dz[j];
                    s[j] += ad * ds[j];
                    w[j] = r - x[j];
                }
            }
        }
        for i in 0..m {
            lam[i] += ad * dl[i];
        }
    }

    // recover original-space quantities
    let mut x_orig = vec![0.0; n];
    for j in 0..n {
        x_orig[j] = cn.sign[j] * x[j] + cn.shift[j];
    }
    let duals: Vec<f64> = lam.iter().map(|v| v * cn.c_scale).collect();
    let at_dual = lp.constraints.tr_mul_vec(&duals);
    let reduced_costs: Vec<f64> = (0..n).map(|j| lp.objective[j] - at_dual[j]).collect();
    let objective: f64 = lp.objective.iter().zip(&x_orig).map(|(c, x)| c * x).sum();

    let axb = lp.constraints.mul_vec(&x_orig);
    let primal_residual = axb
        .iter()
        .zip(&lp.rhs)
        .fold(0.0f64, |mx, (ax, b)| mx.max((ax - b).abs()));
    // dual residual in original space: rc must vanish on free vars and interior vars
    let mut dual_residual = 0.0f64;
    let mut dual_obj_canon: f64 = cn.b.iter().zip(&lam).map(|(b, l)| b * l).sum();
    for j in 0..n {
        match cn.kind[j] {
            VarKind::Free => dual_residual = dual_residual.max(reduced_costs[j].abs()),
            VarKind::NonNeg => {}
            VarKind::Boxed(r) => dual_obj_canon -= r * s[j],
        }
    }
    let dual_objective = dual_obj_canon * cn.c_scale + cn.obj_const;
    let rel_gap = (objective - dual_objective).abs() / (1.0 + objective.abs());
    // canonical dual residual, unscaled
    let atl = cn.a.tr_mul_vec(&lam);
    for j in 0..n {
        let r = (cn.c[j] - atl[j] - z[j] + s[j]) * cn.c_scale;
        dual_residual = dual_residual.max(r.abs());
    }

    if status == LpStatus::IterationLimit {
        log::warn!(
            "interior point hit the iteration limit ({}): residuals p={primal_residual:.2e} gap={rel_gap:.2e}",
            opts.max_iters
        );
    }

    Ok(LpSolution {
        x: x_orig,
        objective,
        duals,
        reduced_costs,
        status,
        iterations: iterations + 1,
        primal_residual,
        dual_residual,
        rel_gap,
        certificate,
        basic: false,
    })
}

#[allow(clippy::too_many_arguments)]
fn step_lengths(
    kind: &[VarKind],
    x: &[f64],
    w: &[f64],
    z: &[f64],
    s: &[f64],
    dx: &[f64],
    dz: &[f64],
    ds: &[f64],
) -> (f64, f64) {
    let mut ap = f64::INFINITY;
    let mut ad = f64::INFINITY;
    for j in 0..kind.len() {
        match kind[j] {
            VarKind::Free => {}
            VarKind::NonNeg => {
                if dx[j] < 0.0 {
                    ap = ap.min(-x[j] / dx[j]);
                }
                if dz[j] < 0.0 {
                    ad = ad.min(-z[j] / dz[j]);
                }
            }
            VarKind::Boxed(_) => {
                if dx[j] < 0.0 {
                    ap = ap.min(-x[j] / dx[j]);
                }
                if dx[j] > 0.0 {
                    ap = ap.min(w[j] / dx[j]);
                }
                if dz[j] < 0.0 {
                    ad = ad.min(-z[j] / dz[j]);
                }
                if ds[j] < 0.0 {
                    ad = ad.min(-s[j] / ds[j]);
                }
            }
        }
    }
    (ap.min(1e10), ad.min(1e10))
}
