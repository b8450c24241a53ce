//! Optimal transport between preference distributions.
//!
//! The ground cost between two categories is the absolute difference of
//! their scalar rewards, `M[i][j] = |r_i - r_j|`. Moving preference mass
//! between nearby categories (helpful vs. neutral-helpful) is cheap; moving
//! it across the helpful/harmful divide is expensive. On top of that cost
//! this module provides:
//!
//! * [`solve_exact`] — the transportation linear program, solved to
//!   optimality with a Bland-rule transportation simplex. Returns the plan
//!   and the dual potentials; strong duality holds to machine precision.
//! * [`solve_sinkhorn`] — entropically regularized transport in the
//!   log domain, `plan = diag(u) K diag(v)` with `K = exp(-M/eps)`. Smooth
//!   in its inputs, so it backs the training gradients.
//! * [`wasserstein_p`] — `W_p`: solve under the p-th power of the cost and
//!   take the p-th root of the optimum.
//! * [`w1_line_oracle`] — an independent closed form for the default cost:
//!   reward-difference costs embed the categories on the real line, where
//!   `W_1` is the area between sorted CDFs. Used to cross-check the LP.
//! * [`ot_grad_source`] — the (sub)gradient of transport cost in the source
//!   marginal: the optimal dual potential, reported mean-centred to fix the
//!   additive gauge.

mod exact;
mod sinkhorn;

pub use exact::solve_exact;
pub use sinkhorn::{entropic_objective, solve_sinkhorn, SinkhornIterate, SinkhornSolution};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preference::{CategorySchema, PreferenceDistribution};

/// Square matrix of non-negative transport costs between category bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    d: usize,
    /// Row-major entries.
    entries: Vec<f64>,
}

impl CostMatrix {
    /// Reward-difference cost: `entries[i][j] = |reward_i - reward_j|`.
    pub fn from_schema(schema: &CategorySchema) -> Self {
        let rewards = schema.rewards();
        let d = rewards.len();
        let mut entries = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                entries[i * d + j] = (rewards[i] - rewards[j]).abs();
            }
        }
        Self { d, entries }
    }

    /// Index-distance cost `|i - j|`, the conventional histogram ground
    /// metric when no reward scale is attached.
    pub fn index_distance(d: usize) -> Self {
        let mut entries = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                entries[i * d + j] = (i as f64 - j as f64).abs();
            }
        }
        Self { d, entries }
    }

    /// General constructor; entries must be finite and non-negative.
    /// Symmetry and the triangle inequality are properties of reward-built
    /// matrices, not construction requirements, so fault-injection harnesses
    /// can build deliberately broken costs.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = rows.len();
        if d < 2 {
            return Err(Error::InvalidParameter(format!(
                "cost matrix needs dimension >= 2, got {d}"
            )));
        }
        let mut entries = Vec::with_capacity(d * d);
        for row in &rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
            for &c in row {
                if !c.is_finite() || c < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "cost entries must be finite and non-negative, got {c}"
                    )));
                }
                entries.push(c);
            }
        }
        Ok(Self { d, entries })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.d + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.d..(i + 1) * self.d]
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.iter().cloned().fold(0.0, f64::max)
    }

    /// Entry-wise p-th power, used to realize `W_p` for `p != 1`.
    pub fn powi_entries(&self, p: f64) -> Self {
        Self {
            d: self.d,
            entries: self.entries.iter().map(|&c| c.powf(p)).collect(),
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        for i in 0..self.d {
            for j in (i + 1)..self.d {
                if (self.get(i, j) - self.get(j, i)).abs() > tol {
                    return false;
                }
            }
        }
        true
    }
}

/// A transport plan with its objective value `<T, M>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    d: usize,
    /// Row-major plan entries.
    plan: Vec<f64>,
    pub cost: f64,
}

impl TransportPlan {
    pub(crate) fn new(d: usize, plan: Vec<f64>, cost: f64) -> Self {
        Self { d, plan, cost }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.plan[i * self.d + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.plan
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.d)
            .map(|i| self.plan[i * self.d..(i + 1) * self.d].iter().sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.d)
            .map(|j| (0..self.d).map(|i| self.plan[i * self.d + j]).sum())
            .collect()
    }

    /// Largest violation of the marginal constraints against (mu, nu).
    pub fn marginal_violation(&self, mu: &[f64], nu: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (got, want) in self.row_sums().iter().zip(mu) {
            worst = worst.max((got - want).abs());
        }
        for (got, want) in self.col_sums().iter().zip(nu) {
            worst = worst.max((got - want).abs());
        }
        worst
    }
}

/// Dual variables of the transport problem. For the exact solver these are
/// LP duals with `f_i + g_j <= M_ij` and equality on the plan's support; for
/// Sinkhorn they are the log-domain scalings in cost units
/// (`u = exp(f/eps)`, `v = exp(g/eps)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPotentials {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

impl DualPotentials {
    /// Dual objective `<f, mu> + <g, nu>`.
    pub fn objective(&self, mu: &[f64], nu: &[f64]) -> f64 {
        let a: f64 = self.f.iter().zip(mu).map(|(x, y)| x * y).sum();
        let b: f64 = self.g.iter().zip(nu).map(|(x, y)| x * y).sum();
        a + b
    }
}

pub(crate) fn validate_pair(
    mu: &PreferenceDistribution,
    nu: &PreferenceDistribution,
    cost: &CostMatrix,
) -> Result<()> {
    if mu.len() != nu.len() {
        return Err(Error::DimensionMismatch {
            expected: mu.len(),
            got: nu.len(),
        });
    }
    if cost.dim() != mu.len() {
        return Err(Error::DimensionMismatch {
            expected: mu.len(),
            got: cost.dim(),
        });
    }
    for dist in [mu, nu] {
        if !dist.is_simplex(1e-9) {
            return Err(Error::InfeasibleInput(format!(
                "marginal off the simplex: sum = {}",
                dist.probs().iter().sum::<f64>()
            )));
        }
    }
    Ok(())
}

/// p-Wasserstein distance: exact transport under the entry-wise p-th power
/// of the cost, then the p-th root of the optimum. `p = 1` is plain
/// transport cost.
pub fn wasserstein_p(
    mu: &PreferenceDistribution,
    nu: &PreferenceDistribution,
    cost: &CostMatrix,
    p: f64,
) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "wasserstein order must satisfy p >= 1, got {p}"
        )));
    }
    if (p - 1.0).abs() < f64::EPSILON {
        let (plan, _) = solve_exact(mu, nu, cost)?;
        return Ok(plan.cost);
    }
    let powered = cost.powi_entries(p);
    let (plan, _) = solve_exact(mu, nu, &powered)?;
    Ok(plan.cost.max(0.0).powf(1.0 / p))
}

/// Closed-form `W_1` for reward-difference costs, independent of the LP.
///
/// Sorting categories by reward embeds them on the real line; `W_1` between
/// two distributions on the line is the integral of |CDF difference|:
/// tied reward positions merge, and each gap between consecutive distinct
/// rewards contributes `|cumulative(mu - nu)| * gap`.
pub fn w1_line_oracle(
    mu: &PreferenceDistribution,
    nu: &PreferenceDistribution,
    schema: &CategorySchema,
) -> Result<f64> {
    if mu.len() != nu.len() || mu.len() != schema.len() {
        return Err(Error::DimensionMismatch {
            expected: schema.len(),
            got: mu.len().max(nu.len()),
        });
    }
    let rewards = schema.rewards();
    let d = rewards.len();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        rewards[a]
            .partial_cmp(&rewards[b])
            .expect("schema rewards are finite")
            .then(a.cmp(&b))
    });

    let mut total = 0.0;
    let mut cum = 0.0;
    let mut k = 0;
    while k < d {
        let here = rewards[order[k]];
        while k < d && rewards[order[k]] == here {
            cum += mu.probs()[order[k]] - nu.probs()[order[k]];
            k += 1;
        }
        if k < d {
            total += cum.abs() * (rewards[order[k]] - here);
        }
    }
    Ok(total)
}

/// Gradient mode for [`ot_grad_source`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OtGradMode {
    /// Dual potential of the exact LP — a subgradient of the piecewise
    /// linear exact cost.
    ExactDual,
    /// Dual potential of the entropic problem — the exact gradient of the
    /// regularized objective (see [`entropic_objective`]).
    Sinkhorn { eps: f64 },
}

/// (Sub)gradient of transport cost with respect to the source marginal.
///
/// Equals the corresponding solver's source potential, mean-centred: any
/// additive constant in the duals is a gauge freedom that simplex-tangent
/// directions cannot see, so centring makes the report deterministic.
pub fn ot_grad_source(
    mu: &PreferenceDistribution,
    nu: &PreferenceDistribution,
    cost: &CostMatrix,
    mode: OtGradMode,
) -> Result<Vec<f64>> {
    let f = match mode {
        OtGradMode::ExactDual => solve_exact(mu, nu, cost)?.1.f,
        OtGradMode::Sinkhorn { eps } => {
            solve_sinkhorn(mu, nu, cost, eps, 1e-10, 200_000)?
                .potentials
                .f
        }
    };
    Ok(center(f))
}

pub(crate) fn center(mut v: Vec<f64>) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    for x in &mut v {
        *x -= mean;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preference::CategorySchema;
    use crate::rng::{rng_from, sample_simplex};

    fn schema() -> CategorySchema {
        CategorySchema::default_six()
    }

    fn dist(v: Vec<f64>) -> PreferenceDistribution {
        PreferenceDistribution::new(v).unwrap()
    }

    #[test]
    fn cost_matrix_row_one_matches_reward_gaps() {
        let m = CostMatrix::from_schema(&schema());
        assert_eq!(m.row(0), &[0.0, 0.5, 2.0, 2.0, 2.5, 4.0]);
    }

    #[test]
    fn cost_matrix_c3_c4_share_reward_so_cost_is_zero() {
        let m = CostMatrix::from_schema(&schema());
        assert_eq!(m.get(2, 3), 0.0);
        assert_eq!(m.get(3, 2), 0.0);
    }

    #[test]
    fn cost_matrix_has_zero_diagonal_and_symmetry() {
        let m = CostMatrix::from_schema(&schema());
        for i in 0..6 {
            assert_eq!(m.get(i, i), 0.0);
        }
        assert!(m.is_symmetric(0.0));
    }

    #[test]
    fn cost_matrix_triangle_inequality_from_rewards() {
        let m = CostMatrix::from_schema(&schema());
        for a in 0..6 {
            for b in 0..6 {
                for c in 0..6 {
                    assert!(m.get(a, c) <= m.get(a, b) + m.get(b, c) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn from_rows_validates_shape_and_signs() {
        assert!(CostMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).is_ok());
        assert!(CostMatrix::from_rows(vec![vec![0.0, 1.0]]).is_err());
        assert!(CostMatrix::from_rows(vec![vec![0.0, -1.0], vec![1.0, 0.0]]).is_err());
        assert!(CostMatrix::from_rows(vec![vec![0.0; 3]; 2]).is_err());
    }

    #[test]
    fn wasserstein_identity_is_zero_for_all_orders() {
        let m = CostMatrix::from_schema(&schema());
        let mut rng = rng_from(11);
        for _ in 0..20 {
            let mu = dist(sample_simplex(&mut rng, 6));
            for p in [1.0, 1.5, 2.0, 3.0] {
                let w = wasserstein_p(&mu, &mu, &m, p).unwrap();
                assert!(w.abs() < 1e-9, "W_{p} self-distance {w}");
            }
        }
    }

    #[test]
    fn wasserstein_forced_plans() {
        let m = CostMatrix::from_schema(&schema());
        let e1 = PreferenceDistribution::one_hot(6, 0);
        let e2 = PreferenceDistribution::one_hot(6, 1);
        let e6 = PreferenceDistribution::one_hot(6, 5);
        assert!((wasserstein_p(&e1, &e2, &m, 1.0).unwrap() - 0.5).abs() < 1e-12);
        assert!((wasserstein_p(&e1, &e6, &m, 1.0).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn wasserstein_rejects_bad_order() {
        let m = CostMatrix::from_schema(&schema());
        let e1 = PreferenceDistribution::one_hot(6, 0);
        assert!(wasserstein_p(&e1, &e1, &m, 0.5).is_err());
        assert!(wasserstein_p(&e1, &e1, &m, f64::NAN).is_err());
    }

    #[test]
    fn line_oracle_forced_and_identity_cases() {
        let s = schema();
        let e1 = PreferenceDistribution::one_hot(6, 0);
        let e6 = PreferenceDistribution::one_hot(6, 5);
        assert!((w1_line_oracle(&e1, &e6, &s).unwrap() - 4.0).abs() < 1e-12);
        assert!(w1_line_oracle(&e1, &e1, &s).unwrap().abs() < 1e-15);
    }

    #[test]
    fn line_oracle_matches_exact_solver_on_seeded_pairs() {
        let s = schema();
        let m = CostMatrix::from_schema(&s);
        let mut rng = rng_from(42);
        for _ in 0..1000 {
            let mu = dist(sample_simplex(&mut rng, 6));
            let nu = dist(sample_simplex(&mut rng, 6));
            let (plan, _) = solve_exact(&mu, &nu, &m).unwrap();
            let oracle = w1_line_oracle(&mu, &nu, &s).unwrap();
            assert!(
                (plan.cost - oracle).abs() < 1e-9,
                "lp {} vs line {}",
                plan.cost,
                oracle
            );
        }
    }

    #[test]
    fn w1_symmetry_on_seeded_pairs() {
        let m = CostMatrix::from_schema(&schema());
        let mut rng = rng_from(5);
        for _ in 0..200 {
            let mu = dist(sample_simplex(&mut rng, 6));
            let nu = dist(sample_simplex(&mut rng, 6));
            let ab = wasserstein_p(&mu, &nu, &m, 1.0).unwrap();
            let ba = wasserstein_p(&nu, &mu, &m, 1.0).unwrap();
            assert!((ab - ba).abs() < 1e-9);
        }
    }

    #[test]
    fn w1_triangle_inequality_on_seeded_triples() {
        let m = CostMatrix::from_schema(&schema());
        let mut rng = rng_from(6);
        for _ in 0..300 {
            let a = dist(sample_simplex(&mut rng, 6));
            let b = dist(sample_simplex(&mut rng, 6));
            let c = dist(sample_simplex(&mut rng, 6));
            let ac = wasserstein_p(&a, &c, &m, 1.0).unwrap();
            let ab = wasserstein_p(&a, &b, &m, 1.0).unwrap();
            let bc = wasserstein_p(&b, &c, &m, 1.0).unwrap();
            assert!(ac <= ab + bc + 1e-9);
        }
    }

    #[test]
    fn grad_exact_dual_bounded_at_identity() {
        let m = CostMatrix::from_schema(&schema());
        let mut rng = rng_from(7);
        for _ in 0..50 {
            let mu = dist(sample_simplex(&mut rng, 6));
            let g = ot_grad_source(&mu, &mu, &m, OtGradMode::ExactDual).unwrap();
            let bound = m.max_entry();
            for &x in &g {
                assert!(x.abs() <= bound + 1e-9, "|{x}| > {bound}");
            }
        }
    }

    #[test]
    fn grad_exact_dual_orders_like_cost_row_for_one_hot_target() {
        let m = CostMatrix::from_schema(&schema());
        let mut rng = rng_from(8);
        let mu = dist(sample_simplex(&mut rng, 6));
        let nu = PreferenceDistribution::one_hot(6, 0);
        let g = ot_grad_source(&mu, &nu, &m, OtGradMode::ExactDual).unwrap();
        // With a forced column plan, f_i = M_i1 + const, so orderings match.
        for i in 0..6 {
            for j in 0..6 {
                if m.get(i, 0) < m.get(j, 0) {
                    assert!(
                        g[i] <= g[j] + 1e-9,
                        "grad ordering broke at ({i},{j}): {} vs {}",
                        g[i],
                        g[j]
                    );
                }
            }
        }
    }

    #[test]
    fn plans_and_duals_export_as_row_major_json() {
        let m = CostMatrix::from_schema(&schema());
        let e1 = PreferenceDistribution::one_hot(6, 0);
        let e2 = PreferenceDistribution::one_hot(6, 1);
        let (plan, duals) = solve_exact(&e1, &e2, &m).unwrap();
        let plan_json = serde_json::to_value(&plan).unwrap();
        assert_eq!(plan_json["d"], 6);
        assert_eq!(plan_json["plan"].as_array().unwrap().len(), 36);
        // Row-major: the forced cell (0, 1) sits at flat index 1.
        assert_eq!(plan_json["plan"][1], 1.0);
        let duals_json = serde_json::to_value(&duals).unwrap();
        assert_eq!(duals_json["f"].as_array().unwrap().len(), 6);
        assert_eq!(duals_json["g"].as_array().unwrap().len(), 6);
    }

    #[test]
    fn grad_is_mean_centred() {
        let m = CostMatrix::from_schema(&schema());
        let mut rng = rng_from(9);
        let mu = dist(sample_simplex(&mut rng, 6));
        let nu = dist(sample_simplex(&mut rng, 6));
        for mode in [OtGradMode::ExactDual, OtGradMode::Sinkhorn { eps: 0.05 }] {
            let g = ot_grad_source(&mu, &nu, &m, mode).unwrap();
            let mean: f64 = g.iter().sum::<f64>() / 6.0;
            assert!(mean.abs() < 1e-12);
        }
    }

    #[test]
    fn sinkhorn_grad_matches_central_differences_of_entropic_objective() {
        let s = schema();
        let m = CostMatrix::from_schema(&s);
        let eps = 0.05;
        let delta = 1e-5;
        let mut rng = rng_from(13);
        let objective = |mu: &PreferenceDistribution, nu: &PreferenceDistribution| -> f64 {
            let sol = solve_sinkhorn(mu, nu, &m, eps, 1e-12, 500_000).unwrap();
            entropic_objective(&sol.plan, &m, eps)
        };
        for _ in 0..100 {
            // Keep marginals interior so the +/- delta probes stay on the simplex.
            let raw = sample_simplex(&mut rng, 6);
            let mu = dist(raw.iter().map(|&x| 0.9 * x + 0.1 / 6.0).collect());
            let nu = dist(sample_simplex(&mut rng, 6));
            let grad = ot_grad_source(&mu, &nu, &m, OtGradMode::Sinkhorn { eps }).unwrap();
            for k in 0..10 {
                // Random mean-zero tangent direction of unit max-norm.
                let mut h = sample_simplex(&mut rng, 6);
                let mean: f64 = h.iter().sum::<f64>() / 6.0;
                for x in &mut h {
                    *x -= mean;
                }
                let scale = h.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
                for x in &mut h {
                    *x /= scale.max(1e-12);
                }
                let plus = dist(
                    mu.probs()
                        .iter()
                        .zip(&h)
                        .map(|(a, b)| a + delta * b)
                        .collect(),
                );
                let minus = dist(
                    mu.probs()
                        .iter()
                        .zip(&h)
                        .map(|(a, b)| a - delta * b)
                        .collect(),
                );
                let fd = (objective(&plus, &nu) - objective(&minus, &nu)) / (2.0 * delta);
                let analytic: f64 = grad.iter().zip(&h).map(|(a, b)| a * b).sum();
                assert!(
                    (fd - analytic).abs() <= 1e-3,
                    "direction {k}: fd {fd} vs analytic {analytic}"
                );
            }
        }
    }
}
