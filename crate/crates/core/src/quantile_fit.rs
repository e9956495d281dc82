//! Periodic quantile curves fitted to the inflow series by Fourier-basis
//! quantile regression.
//!
//! Each level α gets a curve q_α(t) = φ(t)·β_α where φ(t) is a constant plus
//! M harmonic pairs. β_α minimizes the pinball loss ρ_α(x) = max(αx, (α−1)x)
//! over the data, solved as a linear program with the residual split into
//! nonnegative parts. The fitted curves bound the inflow regimes.

use serde::{Deserialize, Serialize};

use crate::convex_core::{self, CscMatrix, LinearProgram, LpOptions, LpStatus, PurifyOptions};
use crate::error::{Error, Result};
use crate::ingest::InflowSeries;
use crate::WEEKS_PER_YEAR;

/// Fourier basis [1, cos(ωt), sin(ωt), …, cos(Mωt), sin(Mωt)].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierBasis {
    /// rad/day.
    pub omega: f64,
    /// Number of harmonic pairs M ≥ 1.
    pub harmonics: usize,
}

impl FourierBasis {
    pub fn new(omega: f64, harmonics: usize) -> Self {
        assert!(harmonics >= 1, "at least one harmonic required");
        FourierBasis { omega, harmonics }
    }

    pub fn dimension(&self) -> usize {
        1 + 2 * self.harmonics
    }

    pub fn period_days(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dimension());
        v.push(1.0);
        for k in 1..=self.harmonics {
            let arg = k as f64 * self.omega * t;
            v.push(arg.cos());
            v.push(arg.sin());
        }
        v
    }
}

pub fn fourier_basis_eval(basis: &FourierBasis, t: f64) -> Vec<f64> {
    basis.eval(t)
}

/// One fitted quantile curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileModel {
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub basis: FourierBasis,
}

impl QuantileModel {
    pub fn eval(&self, t: f64) -> f64 {
        self.basis
            .eval(t)
            .iter()
            .zip(&self.beta)
            .map(|(p, b)| p * b)
            .sum()
    }
}

/// The standard pinball loss ρ_α(x) = max(αx, (α−1)x).
pub fn pinball(alpha: f64, x: f64) -> f64 {
    (alpha * x).max((alpha - 1.0) * x)
}

/// Total pinball loss of a coefficient vector over the series.
pub fn total_pinball_loss(series: &InflowSeries, alpha: f64, basis: &FourierBasis, beta: &[f64]) -> f64 {
    series
        .records
        .iter()
        .map(|r| {
            let q: f64 = basis.eval(r.t_days).iter().zip(beta).map(|(p, b)| p * b).sum();
            pinball(alpha, r.inflow_mw - q)
        })
        .sum()
}

/// Fraction of observations with f ≤ q_α(t).
pub fn empirical_coverage(series: &InflowSeries, model: &QuantileModel) -> f64 {
    let n = series.len() as f64;
    let hits = series
        .records
        .iter()
        .filter(|r| r.inflow_mw <= model.eval(r.t_days))
        .count();
    hits as f64 / n
}

/// Fits one quantile curve by LP. Constant data short-circuits to the exact
/// constant curve with zero harmonic coefficients.
pub fn fit_quantile(series: &InflowSeries, alpha: f64, basis: &FourierBasis) -> Result<QuantileModel> {
    fit_quantile_with(series, alpha, basis, &LpOptions::default())
}

pub fn fit_quantile_with(
    series: &InflowSeries,
    alpha: f64,
    basis: &FourierBasis,
    opts: &LpOptions,
) -> Result<QuantileModel> {
    if series.is_empty() {
        return Err(Error::Validation("cannot fit a quantile to an empty series".into()));
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::Validation(format!("alpha must be in (0,1), got {alpha}")));
    }
    let d = basis.dimension();
    let n = series.len();

    let first = series.records[0].inflow_mw;
    if series.records.iter().all(|r| r.inflow_mw == first) {
        let mut beta = vec![0.0; d];
        beta[0] = first;
        return Ok(QuantileModel { alpha, beta, basis: *basis });
    }

    // variables: [β (free, d) | u (n) | v (n)]; row i: φᵀβ + u_i − v_i = f_i
    let mut trips = Vec::with_capacity(n * (d + 2));
    let mut rhs = Vec::with_capacity(n);
    for (i, r) in series.records.iter().enumerate() {
        for (k, p) in basis.eval(r.t_days).into_iter().enumerate() {
            trips.push((i, k, p));
        }
        trips.push((i, d + i, 1.0));
        trips.push((i, d + n + i, -1.0));
        rhs.push(r.inflow_mw);
    }
    let a = CscMatrix::from_triplets(n, d + 2 * n, &trips);
    let mut objective = vec![0.0; d + 2 * n];
    for i in 0..n {
        objective[d + i] = alpha;
        objective[d + n + i] = 1.0 - alpha;
    }
    let mut lower = vec![0.0; d + 2 * n];
    let mut upper = vec![f64::INFINITY; d + 2 * n];
    for j in 0..d {
        lower[j] = f64::NEG_INFINITY;
        upper[j] = f64::INFINITY;
    }
    let lp = LinearProgram {
        objective,
        constraints: a,
        rhs,
        lower,
        upper,
    };
    let mut sol = convex_core::solve_lp(&lp, opts)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Lp {
            status: sol.status,
            detail: format!(
                "quantile regression LP must be feasible by construction (alpha={alpha}); \
                 residuals p={:.2e} d={:.2e} gap={:.2e}",
                sol.primal_residual, sol.dual_residual, sol.rel_gap
            ),
        });
    }
    convex_core::purify_to_vertex(&lp, &mut sol, &PurifyOptions::default());
    Ok(QuantileModel {
        alpha,
        beta: sol.x[..d].to_vec(),
        basis: *basis,
    })
}

/// A family of fitted quantile curves α_1 < … < α_{|R|−1}, with implicit
/// boundaries q_0 = 0 and q_{|R|} = ∞. Regime assignment reads the weekly
/// `grid` values, which are pointwise sorted if the raw curves cross.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileFamily {
    pub levels: Vec<f64>,
    pub models: Vec<QuantileModel>,
    /// grid[k][w] = value of the k-th curve at week w+1 (t = 7w), after
    /// non-crossing enforcement.
    pub grid: Vec<Vec<f64>>,
    /// Number of grid points whose values were reordered.
    pub noncrossing_adjustments: usize,
}

impl QuantileFamily {
    pub fn n_regimes(&self) -> usize {
        self.levels.len() + 1
    }

    /// Regime of inflow f at week w (1-based): r such that
    /// q_{r−1} < f ≤ q_r on the grid, boundaries going to the lower index.
    pub fn regime_of(&self, week: u32, inflow_mw: f64) -> usize {
        let w = (week as usize - 1) % WEEKS_PER_YEAR;
        let below = self.grid.iter().filter(|g| g[w] < inflow_mw).count();
        below + 1
    }

    /// Grid bounds (lower, upper) of regime r at week w; regime 1 starts at 0
    /// and the top regime is unbounded.
    pub fn regime_bounds(&self, week: u32, regime: usize) -> (f64, f64) {
        let w = (week as usize - 1) % WEEKS_PER_YEAR;
        let lo = if regime <= 1 { 0.0 } else { self.grid[regime - 2][w] };
        let hi = if regime > self.levels.len() {
            f64::INFINITY
        } else {
            self.grid[regime - 1][w]
        };
        (lo, hi)
    }
}

/// Fits all levels and enforces non-crossing on the weekly grid.
pub fn fit_family(
    series: &InflowSeries,
    levels: &[f64],
    basis: &FourierBasis,
    opts: &LpOptions,
) -> Result<QuantileFamily> {
    if levels.is_empty() {
        return Err(Error::Validation("at least one quantile level required".into()));
    }
    if !levels.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Validation("quantile levels must be strictly increasing".into()));
    }
    if !levels.iter().all(|&a| 0.0 < a && a < 1.0) {
        return Err(Error::Validation("quantile levels must lie in (0,1)".into()));
    }
    let mut models = Vec::with_capacity(levels.len());
    for &alpha in levels {
        models.push(fit_quantile_with(series, alpha, basis, opts)?);
    }
    let family = QuantileFamily {
        levels: levels.to_vec(),
        grid: raw_grid(&models),
        models,
        noncrossing_adjustments: 0,
    };
    Ok(enforce_noncrossing(family))
}

fn raw_grid(models: &[QuantileModel]) -> Vec<Vec<f64>> {
    models
        .iter()
        .map(|m| (0..WEEKS_PER_YEAR).map(|w| m.eval(7.0 * w as f64)).collect())
        .collect()
}

/// Sorts grid values pointwise per week so the regime boundaries never cross.
/// The fitted coefficient vectors are left untouched; only the grid (which
/// downstream regime assignment consults) changes.
pub fn enforce_noncrossing(mut family: QuantileFamily) -> QuantileFamily {
    let k = family.grid.len();
    let mut adjustments = 0usize;
    for w in 0..WEEKS_PER_YEAR {
        let mut col: Vec<f64> = (0..k).map(|i| family.grid[i][w]).collect();
        let sorted = {
            let mut s = col.clone();
            s.sort_by(|a, b| a.partial_cmp(b).unwrap());
            s
        };
        if col != sorted {
            adjustments += 1;
            col = sorted;
            for i in 0..k {
                family.grid[i][w] = col[i];
            }
        }
    }
    if adjustments > 0 {
        log::warn!(
            "quantile curves crossed at {adjustments} of {WEEKS_PER_YEAR} grid weeks; \
             grid values sorted pointwise"
        );
    }
    family.noncrossing_adjustments = adjustments;
    family
}
