//! Exact transportation solver.
//!
//! Solves `min <T, M>` subject to `T 1 = mu`, `T^T 1 = nu`, `T >= 0` with the
//! classical transportation simplex: a north-west-corner basic feasible tree,
//! MODI dual recomputation, and Bland's smallest-index rule for both the
//! entering and leaving variable so degenerate pivots cannot cycle. The basis
//! is always a spanning tree with exactly `2d - 1` cells, and flows are
//! sums/differences of the original marginals, so the returned plan is exact
//! up to floating-point addition.

use crate::error::{Error, Result};
use crate::preference::PreferenceDistribution;
use crate::transport::{validate_pair, CostMatrix, DualPotentials, TransportPlan};

/// Reduced costs this far below zero count as improving; scaled by the
/// cost magnitude so well-conditioned inputs terminate crisply.
const PIVOT_TOL: f64 = 1e-12;

/// Pivot budget. Bland's rule terminates long before this for d = 6; the cap
/// only guards against NaN-contaminated inputs sneaking past validation.
const MAX_PIVOTS: usize = 50_000;

#[derive(Debug, Clone, Copy)]
struct BasicCell {
    row: usize,
    col: usize,
    flow: f64,
}

/// Solve the transport LP exactly. Returns the optimal plan and a pair of
/// dual potentials satisfying complementary slackness: `f_i + g_j <= M_ij`
/// everywhere, with equality on every basic cell, and dual objective equal
/// to the primal cost.
pub fn solve_exact(
    mu: &PreferenceDistribution,
    nu: &PreferenceDistribution,
    cost: &CostMatrix,
) -> Result<(TransportPlan, DualPotentials)> {
    validate_pair(mu, nu, cost)?;
    let d = mu.len();
    let a = mu.probs();
    let b = nu.probs();

    let mut basis = northwest_corner(a, b);
    let tol = PIVOT_TOL * (1.0 + cost.max_entry());

    let mut u = vec![0.0; d];
    let mut v = vec![0.0; d];
    let mut is_basic = vec![false; d * d];

    for _ in 0..MAX_PIVOTS {
        compute_duals(&basis, cost, &mut u, &mut v)?;

        for flag in is_basic.iter_mut() {
            *flag = false;
        }
        for cell in &basis {
            is_basic[cell.row * d + cell.col] = true;
        }

        // Bland: first cell in row-major order with an improving reduced cost.
        let mut entering = None;
        'scan: for i in 0..d {
            for j in 0..d {
                if is_basic[i * d + j] {
                    continue;
                }
                if cost.get(i, j) - u[i] - v[j] < -tol {
                    entering = Some((i, j));
                    break 'scan;
                }
            }
        }
        let Some((ei, ej)) = entering else {
            return Ok(finish(&basis, cost, d, u, v));
        };

        let cycle = find_cycle(&basis, ei, ej, d);

        // Odd positions give up theta; the smallest-index minimum leaves.
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for &cell_idx in cycle.iter().skip(1).step_by(2) {
            let flow = basis[cell_idx].flow;
            let key = basis[cell_idx].row * d + basis[cell_idx].col;
            let better = leave == usize::MAX
                || flow < theta
                || (flow == theta && key < basis[leave].row * d + basis[leave].col);
            if better {
                theta = flow;
                leave = cell_idx;
            }
        }
        debug_assert!(leave != usize::MAX, "cycle must contain a donor cell");

        for (pos, &cell_idx) in cycle.iter().enumerate().skip(1) {
            if pos % 2 == 1 {
                basis[cell_idx].flow = (basis[cell_idx].flow - theta).max(0.0);
            } else {
                basis[cell_idx].flow += theta;
            }
        }
        basis[leave] = BasicCell {
            row: ei,
            col: ej,
            flow: theta,
        };
    }
    Err(Error::SolverStall(MAX_PIVOTS))
}

/// North-west corner rule, keeping exactly `2d - 1` basic cells (zero-flow
/// basics are inserted on degenerate steps) so the basis is a spanning tree.
fn northwest_corner(a: &[f64], b: &[f64]) -> Vec<BasicCell> {
    let m = a.len();
    let n = b.len();
    let mut rem_a = a.to_vec();
    let mut rem_b = b.to_vec();
    let mut basis = Vec::with_capacity(m + n - 1);
    let (mut i, mut j) = (0usize, 0usize);
    loop {
        let flow = rem_a[i].min(rem_b[j]).max(0.0);
        basis.push(BasicCell {
            row: i,
            col: j,
            flow,
        });
        if basis.len() == m + n - 1 {
            return basis;
        }
        rem_a[i] -= flow;
        rem_b[j] -= flow;
        if i + 1 < m && (rem_a[i] <= rem_b[j] || j + 1 >= n) {
            i += 1;
        } else {
            j += 1;
        }
    }
}

/// Solve `u_i + v_j = M_ij` over the basic tree, anchored at `u_0 = 0`.
fn compute_duals(
    basis: &[BasicCell],
    cost: &CostMatrix,
    u: &mut [f64],
    v: &mut [f64],
) -> Result<()> {
    let m = u.len();
    let n = v.len();
    let mut have_u = vec![false; m];
    let mut have_v = vec![false; n];
    u[0] = 0.0;
    have_u[0] = true;
    let mut assigned = 1;
    while assigned < m + n {
        let mut progressed = false;
        for cell in basis {
            match (have_u[cell.row], have_v[cell.col]) {
                (true, false) => {
                    v[cell.col] = cost.get(cell.row, cell.col) - u[cell.row];
                    have_v[cell.col] = true;
                    assigned += 1;
                    progressed = true;
                }
                (false, true) => {
                    u[cell.row] = cost.get(cell.row, cell.col) - v[cell.col];
                    have_u[cell.row] = true;
                    assigned += 1;
                    progressed = true;
                }
                _ => {}
            }
        }
        if !progressed {
            // A disconnected basis means the invariant machinery is broken.
            return Err(Error::SolverStall(0));
        }
    }
    Ok(())
}

/// The unique cycle created by adding the entering cell to the basis tree,
/// returned as basis indices ordered around the cycle; position 0 stands for
/// the entering cell itself (not yet in the basis) and is handled by the
/// caller, so the returned vector starts with `usize::MAX` as a marker.
///
/// Found by leaf peeling: drop any cell that is alone in its row or column
/// until only the cycle remains, then walk it row-wise/column-wise in
/// alternation starting from the entering cell.
fn find_cycle(basis: &[BasicCell], ei: usize, ej: usize, d: usize) -> Vec<usize> {
    // Cell list: basis cells plus the entering cell at index basis.len().
    let entering_idx = basis.len();
    let rows = |idx: usize| {
        if idx == entering_idx {
            ei
        } else {
            basis[idx].row
        }
    };
    let cols = |idx: usize| {
        if idx == entering_idx {
            ej
        } else {
            basis[idx].col
        }
    };

    let mut alive = vec![true; basis.len() + 1];
    let mut row_deg = vec![0usize; d];
    let mut col_deg = vec![0usize; d];
    for idx in 0..=basis.len() {
        row_deg[rows(idx)] += 1;
        col_deg[cols(idx)] += 1;
    }
    loop {
        let mut peeled = false;
        for idx in 0..=basis.len() {
            if alive[idx] && (row_deg[rows(idx)] == 1 || col_deg[cols(idx)] == 1) {
                alive[idx] = false;
                row_deg[rows(idx)] -= 1;
                col_deg[cols(idx)] -= 1;
                peeled = true;
            }
        }
        if !peeled {
            break;
        }
    }
    debug_assert!(alive[entering_idx], "entering cell must lie on the cycle");

    // Walk the cycle: from the entering cell move along its row, then
    // alternate column/row matches until the loop closes.
    let mut ordered = vec![usize::MAX]; // position 0: entering cell marker
    let mut used = vec![false; basis.len() + 1];
    used[entering_idx] = true;
    let mut cur_row = ei;
    let mut cur_col = ej;
    let mut match_row = true;
    loop {
        let mut next = None;
        for idx in 0..basis.len() {
            if !alive[idx] || used[idx] {
                continue;
            }
            let hit = if match_row {
                rows(idx) == cur_row
            } else {
                cols(idx) == cur_col
            };
            if hit {
                next = Some(idx);
                break;
            }
        }
        let Some(idx) = next else { break };
        used[idx] = true;
        ordered.push(idx);
        cur_row = rows(idx);
        cur_col = cols(idx);
        match_row = !match_row;
    }
    ordered
}

fn finish(
    basis: &[BasicCell],
    cost: &CostMatrix,
    d: usize,
    u: Vec<f64>,
    v: Vec<f64>,
) -> (TransportPlan, DualPotentials) {
    let mut plan = vec![0.0; d * d];
    let mut total = 0.0;
    for cell in basis {
        let flow = cell.flow.max(0.0);
        plan[cell.row * d + cell.col] += flow;
        total += flow * cost.get(cell.row, cell.col);
    }
    (
        TransportPlan::new(d, plan, total),
        DualPotentials { f: u, g: v },
    )
}
