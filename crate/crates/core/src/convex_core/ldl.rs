//! Sparse LDLᵀ factorization of symmetric quasi-definite matrices.
//!
//! Up-looking factorization with an elimination-tree symbolic phase, after
//! Davis's LDL. Quasi-definite matrices (negative-definite variable block,
//! positive-definite constraint block, plus regularization) factor without
//! numerical pivoting under any symmetric permutation, so the pivot order is
//! chosen purely for sparsity and stays fixed while values change across
//! interior-point iterations.

use super::sparse::CscMatrix;
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

/// Symbolic analysis: elimination tree and column counts of L for P·K·Pᵀ.
pub struct LdlSymbolic {
    n: usize,
    perm: Vec<usize>,
    pinv: Vec<usize>,
    parent: Vec<usize>,
    lcolptr: Vec<usize>,
}

impl LdlSymbolic {
    /// `k` must be structurally symmetric with a full (both triangles) pattern.
    /// `perm[k]` is the original index of the k-th pivot.
    pub fn analyze(k: &CscMatrix, perm: Vec<usize>) -> Self {
        let n = k.nrows();
        assert_eq!(k.ncols(), n);
        assert_eq!(perm.len(), n);
        let mut pinv = vec![NONE; n];
        for (i, &p) in perm.iter().enumerate() {
            assert!(pinv[p] == NONE, "perm is not a permutation");
            pinv[p] = i;
        }
        let mut parent = vec![NONE; n];
        let mut flag = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        for kk in 0..n {
            flag[kk] = kk;
            let (rows, _) = k.col(perm[kk]);
            for &r in rows {
                let mut i = pinv[r];
                if i >= kk {
                    continue;
                }
                while flag[i] != kk {
                    if parent[i] == NONE {
                        parent[i] = kk;
                    }
                    lnz[i] += 1;
                    flag[i] = kk;
                    i = parent[i];
                }
            }
        }
        let mut lcolptr = vec![0usize; n + 1];
        for i in 0..n {
            lcolptr[i + 1] = lcolptr[i] + lnz[i];
        }
        LdlSymbolic {
            n,
            perm,
            pinv,
            parent,
            lcolptr,
        }
    }

    pub fn l_nnz(&self) -> usize {
        self.lcolptr[self.n]
    }
}

/// Numeric LDLᵀ factor sharing a symbolic analysis.
pub struct LdlFactor {
    lrowidx: Vec<u32>,
    lvalues: Vec<f64>,
    d: Vec<f64>,
    // workspaces reused across refactorizations
    y: Vec<f64>,
    pattern: Vec<usize>,
    stack: Vec<usize>,
    flag: Vec<usize>,
    lnext: Vec<usize>,
}

impl LdlFactor {
    pub fn new(sym: &LdlSymbolic) -> Self {
        let n = sym.n;
        LdlFactor {
            lrowidx: vec![0; sym.l_nnz()],
            lvalues: vec![0.0; sym.l_nnz()],
            d: vec![0.0; n],
            y: vec![0.0; n],
            pattern: vec![0; n],
            stack: vec![0; n],
            flag: vec![NONE; n],
            lnext: vec![0; n],
        }
    }

    /// Refactorizes in place from the current values of `k`.
    pub fn factor(&mut self, sym: &LdlSymbolic, k: &CscMatrix) -> Result<()> {
        self.factor_signed(sym, k, None, 0.0)
    }

    /// Like `factor`, but with dynamic pivot regularization: when the pivot
    /// sign disagrees with `signs[k]` (or the pivot vanishes), it is replaced
    /// by `signs[k]·dyn_reg`. Exact cancellation in Schur complements of
    /// near-rank-deficient rows otherwise kills quasi-definite
    /// factorizations; iterative refinement absorbs the perturbation.
    pub fn factor_signed(
        &mut self,
        sym: &LdlSymbolic,
        k: &CscMatrix,
        signs: Option<&[i8]>,
        dyn_reg: f64,
    ) -> Result<()> {
        let n = sym.n;
        self.lnext.copy_from_slice(&sym.lcolptr[..n]);
        self.flag.iter_mut().for_each(|f| *f = NONE);
        for kk in 0..n {
            let mut top = n;
            self.flag[kk] = kk;
            self.y[kk] = 0.0;
            let (rows, vals) = k.col(sym.perm[kk]);
            for (&r, &v) in rows.iter().zip(vals) {
                let i0 = sym.pinv[r];
                if i0 > kk {
                    continue;
                }
                self.y[i0] += v;
                let mut len = 0;
                let mut i = i0;
                while i != kk && self.flag[i] != kk {
                    self.stack[len] = i;
                    len += 1;
                    self.flag[i] = kk;
                    i = sym.parent[i];
                }
                while len > 0 {
                    len -= 1;
                    top -= 1;
                    self.pattern[top] = self.stack[len];
                }
            }
            let mut dk = self.y[kk];
            self.y[kk] = 0.0;
            for t in top..n {
                let i = self.pattern[t];
                let yi = self.y[i];
                self.y[i] = 0.0;
                let p2 = self.lnext[i];
                for p in sym.lcolptr[i]..p2 {
                    self.y[self.lrowidx[p] as usize] -= self.lvalues[p] * yi;
                }
                let lki = yi / self.d[i];
                dk -= lki * yi;
                self.lrowidx[p2] = kk as u32;
                self.lvalues[p2] = lki;
                self.lnext[i] = p2 + 1;
            }
            if !dk.is_finite() {
                return Err(Error::Internal(format!(
                    "LDL pivot {kk} is {dk}; matrix not factorizable at this regularization"
                )));
            }
            if let Some(signs) = signs {
                let sign = signs[kk] as f64;
                if dk * sign <= 0.0 {
                    dk = sign * dyn_reg;
                }
            } else if dk == 0.0 {
                return Err(Error::Internal(format!(
                    "LDL pivot {kk} vanished; matrix not factorizable at this regularization"
                )));
            }
            self.d[kk] = dk;
        }
        Ok(())
    }

    /// Solves K x = b using the factorization (permutation applied internally).
    pub fn solve(&self, sym: &LdlSymbolic, b: &[f64]) -> Vec<f64> {
        let n = sym.n;
        let mut w: Vec<f64> = (0..n).map(|i| b[sym.perm[i]]).collect();
        // L w = w
        for j in 0..n {
            let wj = w[j];
            if wj != 0.0 {
                for p in sym.lcolptr[j]..sym.lcolptr[j + 1] {
                    w[self.lrowidx[p] as usize] -= self.lvalues[p] * wj;
                }
            }
        }
        for j in 0..n {
            w[j] /= self.d[j];
        }
        // Lᵀ w = w
        for j in (0..n).rev() {
            let mut acc = w[j];
            for p in sym.lcolptr[j]..sym.lcolptr[j + 1] {
                acc -= self.lvalues[p] * w[self.lrowidx[p] as usize];
            }
            w[j] = acc;
        }
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[sym.perm[i]] = w[i];
        }
        x
    }
}

/// Solver for the quasi-definite KKT systems
///
/// ```text
/// [ -Θ - ρI   Aᵀ ] [x]   [rhs_x]
/// [  A        δI ] [y] = [rhs_y]
/// ```
///
/// where Θ ≥ 0 is a diagonal updated every interior-point iteration. The
/// sparsity pattern (and therefore the symbolic factorization) is fixed at
/// construction; only diagonal values change between `factor` calls.
/// Solves are iteratively refined against the unregularized system.
pub struct KktSolver {
    n: usize,
    m: usize,
    kmat: CscMatrix,
    /// position in kmat.values of the diagonal entry for node i
    diag_pos: Vec<usize>,
    sym: LdlSymbolic,
    fac: LdlFactor,
    pub reg_primal: f64,
    pub reg_dual: f64,
    theta: Vec<f64>,
    /// Expected pivot signs in pivot order: −1 variables, +1 constraints.
    pivot_signs: Vec<i8>,
}

impl KktSolver {
    /// `a` is the m×n constraint matrix; `pivot_order` a permutation of the
    /// n + m KKT nodes (variables 0..n, constraints n..n+m).
    pub fn new(a: &CscMatrix, pivot_order: Vec<usize>, reg: f64) -> Self {
        let n = a.ncols();
        let m = a.nrows();
        let dim = n + m;
        let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * a.nnz() + dim);
        for i in 0..dim {
            triplets.push((i, i, 1.0)); // placeholder diagonals
        }
        for j in 0..n {
            let (rows, vals) = a.col(j);
            for (&r, &v) in rows.iter().zip(vals) {
                triplets.push((n + r, j, v));
                triplets.push((j, n + r, v));
            }
        }
        let kmat = CscMatrix::from_triplets(dim, dim, &triplets);
        let mut diag_pos = vec![usize::MAX; dim];
        for j in 0..dim {
            let (rows, _) = kmat.col(j);
            let base = rows.partition_point(|&r| r < j);
            debug_assert_eq!(rows[base], j);
            diag_pos[j] = kmat.col_start(j) + base;
        }
        let pivot_signs: Vec<i8> = pivot_order
            .iter()
            .map(|&p| if p < n { -1 } else { 1 })
            .collect();
        let sym = LdlSymbolic::analyze(&kmat, pivot_order);
        let fac = LdlFactor::new(&sym);
        KktSolver {
            n,
            m,
            kmat,
            diag_pos,
            sym,
            fac,
            reg_primal: reg,
            reg_dual: reg,
            theta: vec![0.0; n],
            pivot_signs,
        }
    }

    pub fn l_nnz(&self) -> usize {
        self.sym.l_nnz()
    }

    /// Refactorizes with the given variable scaling diagonal Θ.
    pub fn factor(&mut self, theta: &[f64]) -> Result<()> {
        assert_eq!(theta.len(), self.n);
        self.theta.copy_from_slice(theta);
        for j in 0..self.n {
            self.kmat.values_mut()[self.diag_pos[j]] = -theta[j] - self.reg_primal;
        }
        for i in 0..self.m {
            self.kmat.values_mut()[self.diag_pos[self.n + i]] = self.reg_dual;
        }
        self.fac
            .factor_signed(&self.sym, &self.kmat, Some(&self.pivot_signs), self.reg_dual.max(1e-10))
    }

    /// Solves the KKT system, refining toward the unregularized matrix.
    /// Returns (x, y).
    pub fn solve(&self, rhs_x: &[f64], rhs_y: &[f64], refine: usize) -> (Vec<f64>, Vec<f64>) {
        let dim = self.n + self.m;
        let mut rhs = vec![0.0; dim];
        rhs[..self.n].copy_from_slice(rhs_x);
        rhs[self.n..].copy_from_slice(rhs_y);
        let mut sol = self.fac.solve(&self.sym, &rhs);
        let mut resid = vec![0.0; dim];
        for _ in 0..refine {
            // residual against the UNregularized KKT matrix
            resid.copy_from_slice(&rhs);
            let mut kx = self.kmat.mul_vec(&sol);
            for j in 0..self.n {
                kx[j] += self.reg_primal * sol[j]; // undo -ρ on the diagonal
            }
            for i in 0..self.m {
                kx[self.n + i] -= self.reg_dual * sol[self.n + i];
            }
            for i in 0..dim {
                resid[i] -= kx[i];
            }
            let rnorm = resid.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            let bnorm = rhs.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            if rnorm <= 1e-14 * (1.0 + bnorm) {
                break;
            }
            let corr = self.fac.solve(&self.sym, &resid);
            for i in 0..dim {
                sol[i] += corr[i];
            }
        }
        let y = sol.split_off(self.n);
        (sol, y)
    }
}

/// Natural KKT pivot order: sparse bounded variables, then sparse constraint
/// rows, then free/dense variables, then dense rows. Keeps dense columns and
/// rows (which fill heavily) at the end of the elimination.
pub fn default_pivot_order(a: &CscMatrix, free_vars: &[bool]) -> Vec<usize> {
    let n = a.ncols();
    let m = a.nrows();
    let dense_col_cut = (m / 5).max(64);
    let mut row_nnz = vec![0usize; m];
    for (r, _, _) in a.iter() {
        row_nnz[r] += 1;
    }
    let dense_row_cut = (n / 5).max(64);
    let mut order = Vec::with_capacity(n + m);
    let mut tail = Vec::new();
    for j in 0..n {
        if free_vars[j] || a.col_nnz(j) > dense_col_cut {
            tail.push(j);
        } else {
            order.push(j);
        }
    }
    let mut dense_rows = Vec::new();
    for i in 0..m {
        if row_nnz[i] > dense_row_cut {
            dense_rows.push(n + i);
        } else {
            order.push(n + i);
        }
    }
    order.extend(tail);
    order.extend(dense_rows);
    order
}
