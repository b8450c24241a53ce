//! Entropically regularized transport via log-domain Sinkhorn scaling.
//!
//! The regularized problem
//!
//! ```text
//! min <T, M> + eps * sum_ij T_ij (ln T_ij - 1)
//! ```
//!
//! has the unique solution `T = diag(u) K diag(v)` with `K = exp(-M/eps)`.
//! Iterating the scalings in the log domain (`f = eps ln u`, `g = eps ln v`)
//! keeps the updates finite for small `eps`, where `K` itself underflows.
//! Marginal entries are clamped below at 1e-30 before taking logs so exact
//! zeros are tolerated; this is a numerical guard, not a model change.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preference::PreferenceDistribution;
use crate::transport::{validate_pair, CostMatrix, DualPotentials, TransportPlan};

/// Floor applied to marginal entries before `ln`.
const MARGINAL_FLOOR: f64 = 1e-30;

/// A converged Sinkhorn solve. `plan.cost` is the sharp transport cost
/// `<T, M>` of the regularized plan (comparable against the exact solver);
/// the regularized objective itself is available via [`entropic_objective`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinkhornSolution {
    pub plan: TransportPlan,
    pub potentials: DualPotentials,
    /// Iterations actually performed.
    pub iterations: usize,
    /// Worst marginal violation at the final iterate.
    pub residual: f64,
}

/// The last iterate of a solve that hit its iteration cap, carried inside
/// [`Error::NoConvergence`] so budget-bounded callers can still proceed.
#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornIterate {
    pub plan: TransportPlan,
    pub potentials: DualPotentials,
}

/// Run log-domain Sinkhorn until the largest marginal violation drops below
/// `tol` (converged) or `max_iter` is exhausted (reported as
/// [`Error::NoConvergence`] carrying the last iterate and residual).
pub fn solve_sinkhorn(
    mu: &PreferenceDistribution,
    nu: &PreferenceDistribution,
    cost: &CostMatrix,
    eps: f64,
    tol: f64,
    max_iter: usize,
) -> Result<SinkhornSolution> {
    validate_pair(mu, nu, cost)?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sinkhorn eps must be positive, got {eps}"
        )));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sinkhorn tol must be positive, got {tol}"
        )));
    }
    let d = mu.len();
    let log_a: Vec<f64> = mu
        .probs()
        .iter()
        .map(|&x| x.max(MARGINAL_FLOOR).ln())
        .collect();
    let log_b: Vec<f64> = nu
        .probs()
        .iter()
        .map(|&x| x.max(MARGINAL_FLOOR).ln())
        .collect();

    let mut f = vec![0.0; d];
    let mut g = vec![0.0; d];
    let mut scratch = vec![0.0; d];
    let mut residual = f64::INFINITY;

    for iteration in 1..=max_iter {
        for i in 0..d {
            for (j, slot) in scratch.iter_mut().enumerate() {
                *slot = (g[j] - cost.get(i, j)) / eps;
            }
            f[i] = eps * log_a[i] - eps * logsumexp(&scratch);
        }
        for j in 0..d {
            for (i, slot) in scratch.iter_mut().enumerate() {
                *slot = (f[i] - cost.get(i, j)) / eps;
            }
            g[j] = eps * log_b[j] - eps * logsumexp(&scratch);
        }

        // Columns are exact right after the g-update; rows carry the error.
        residual = 0.0;
        for i in 0..d {
            let mut row = 0.0;
            for j in 0..d {
                row += ((f[i] + g[j] - cost.get(i, j)) / eps).exp();
            }
            residual = residual.max((row - mu.probs()[i]).abs());
        }
        if residual < tol {
            return Ok(SinkhornSolution {
                plan: build_plan(&f, &g, cost, eps),
                potentials: DualPotentials { f, g },
                iterations: iteration,
                residual,
            });
        }
    }

    let plan = build_plan(&f, &g, cost, eps);
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual,
        last: Box::new(SinkhornIterate {
            plan,
            potentials: DualPotentials { f, g },
        }),
    })
}

fn build_plan(f: &[f64], g: &[f64], cost: &CostMatrix, eps: f64) -> TransportPlan {
    let d = f.len();
    let mut plan = vec![0.0; d * d];
    let mut sharp_cost = 0.0;
    for i in 0..d {
        for j in 0..d {
            let t = ((f[i] + g[j] - cost.get(i, j)) / eps).exp();
            plan[i * d + j] = t;
            sharp_cost += t * cost.get(i, j);
        }
    }
    TransportPlan::new(d, plan, sharp_cost)
}

/// The regularized objective `<T, M> + eps * sum T (ln T - 1)` of a plan.
/// This is the quantity whose gradient in the source marginal equals the
/// Sinkhorn potential `f`, which is why gradient finite-difference checks
/// probe it rather than the sharp cost.
pub fn entropic_objective(plan: &TransportPlan, cost: &CostMatrix, eps: f64) -> f64 {
    let d = plan.dim();
    let mut value = 0.0;
    for i in 0..d {
        for j in 0..d {
            let t = plan.get(i, j);
            value += t * cost.get(i, j);
            if t > 0.0 {
                value += eps * t * (t.ln() - 1.0);
            }
        }
    }
    value
}

fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let sum: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + sum.ln()
}
