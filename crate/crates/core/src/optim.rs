//! Levenberg-Marquardt nonlinear least squares over block-structured residuals.
//!
//! Residuals are grouped into independent blocks (one per view in the
//! calibration problems), each depending on a small set of parameters. The
//! Jacobian is built by forward differences block by block, so the cost of a
//! full Jacobian stays proportional to the number of (block, parameter)
//! incidences instead of `residuals x parameters`.

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;

/// A nonlinear least-squares problem split into residual blocks.
pub trait BlockProblem: Sync {
    fn num_params(&self) -> usize;
    fn num_blocks(&self) -> usize;
    /// Number of residuals in block `b`.
    fn block_len(&self, b: usize) -> usize;
    /// Indices of the parameters block `b` depends on.
    fn block_params(&self, b: usize) -> Vec<usize>;
    /// Evaluate block `b` into `out` (length `block_len(b)`).
    fn eval_block(&self, b: usize, params: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Relative cost change fell below the tolerance.
    CostTolerance,
    /// Iteration cap reached.
    MaxIterations,
    /// Damping grew past its cap without finding a downhill step; the current
    /// iterate is returned (it is never worse than the start).
    StepFailed,
    /// Started at (numerically) zero cost.
    AlreadyOptimal,
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
    pub accepted_steps: usize,
    pub termination: Termination,
    /// Near-null directions of the final normal matrix (gauge freedoms and
    /// unobservable parameters), when diagnosis was requested.
    pub unobservable_directions: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative cost-change tolerance.
    pub cost_tolerance: f64,
    /// Relative forward-difference step.
    pub fd_step: f64,
    pub initial_lambda: f64,
    pub max_lambda: f64,
    /// Compute the near-null-space dimension of the final normal matrix.
    pub diagnose_rank: bool,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            cost_tolerance: 1e-12,
            fd_step: 1e-6,
            initial_lambda: 1e-3,
            max_lambda: 1e12,
            diagnose_rank: false,
        }
    }
}

struct Layout {
    offsets: Vec<usize>,
    total: usize,
}

fn layout(problem: &impl BlockProblem) -> Layout {
    let mut offsets = Vec::with_capacity(problem.num_blocks() + 1);
    let mut total = 0;
    for b in 0..problem.num_blocks() {
        offsets.push(total);
        total += problem.block_len(b);
    }
    offsets.push(total);
    Layout { offsets, total }
}

fn eval_all(problem: &impl BlockProblem, layout: &Layout, params: &[f64], out: &mut [f64]) {
    let chunks: Vec<(usize, &mut [f64])> = {
        let mut rest = out;
        let mut chunks = Vec::with_capacity(problem.num_blocks());
        for b in 0..problem.num_blocks() {
            let (head, tail) = rest.split_at_mut(layout.offsets[b + 1] - layout.offsets[b]);
            chunks.push((b, head));
            rest = tail;
        }
        chunks
    };
    chunks
        .into_par_iter()
        .for_each(|(b, chunk)| problem.eval_block(b, params, chunk));
}

/// One block's local Jacobian: `rows x |params|`, column-major per parameter.
struct BlockJacobian {
    params: Vec<usize>,
    cols: Vec<Vec<f64>>,
}

fn block_jacobians(
    problem: &impl BlockProblem,
    layout: &Layout,
    params: &[f64],
    base: &[f64],
    fd_step: f64,
) -> Vec<BlockJacobian> {
    (0..problem.num_blocks())
        .into_par_iter()
        .map(|b| {
            let pids = problem.block_params(b);
            let rows = layout.offsets[b]..layout.offsets[b + 1];
            let r0 = &base[rows.clone()];
            let mut scratch = vec![0.0; r0.len()];
            let mut local = params.to_vec();
            let cols = pids
                .iter()
                .map(|&j| {
                    let h = fd_step * params[j].abs().max(1.0);
                    let saved = local[j];
                    local[j] = saved + h;
                    problem.eval_block(b, &local, &mut scratch);
                    local[j] = saved;
                    scratch
                        .iter()
                        .zip(r0)
                        .map(|(rp, r)| (rp - r) / h)
                        .collect()
                })
                .collect();
            BlockJacobian { params: pids, cols }
        })
        .collect()
}

fn assemble_normal_equations(
    n: usize,
    blocks: &[BlockJacobian],
    layout: &Layout,
    residuals: &[f64],
) -> (DMatrix<f64>, DVector<f64>) {
    let mut jtj = DMatrix::<f64>::zeros(n, n);
    let mut jtr = DVector::<f64>::zeros(n);
    for (b, bj) in blocks.iter().enumerate() {
        let r = &residuals[layout.offsets[b]..layout.offsets[b + 1]];
        for (ci, &pi) in bj.params.iter().enumerate() {
            let col_i = &bj.cols[ci];
            jtr[pi] += col_i.iter().zip(r).map(|(a, b)| a * b).sum::<f64>();
            for (cj, &pj) in bj.params.iter().enumerate().skip(ci) {
                let dot = col_i
                    .iter()
                    .zip(&bj.cols[cj])
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
                jtj[(pi, pj)] += dot;
                if pi != pj {
                    jtj[(pj, pi)] += dot;
                }
            }
        }
    }
    (jtj, jtr)
}

fn cost_of(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Minimize the sum of squared residuals starting from `x0`.
///
/// Only downhill steps are accepted, so the returned cost never exceeds the
/// initial cost.
pub fn solve(
    problem: &impl BlockProblem,
    x0: &[f64],
    opts: &LmOptions,
) -> (Vec<f64>, LmReport) {
    assert_eq!(x0.len(), problem.num_params());
    let lay = layout(problem);
    assert!(lay.total > 0, "problem has no residuals");

    let mut x = x0.to_vec();
    let mut r = vec![0.0; lay.total];
    eval_all(problem, &lay, &x, &mut r);
    let mut cost = cost_of(&r);
    let initial_cost = cost;

    let mut report = LmReport {
        initial_cost,
        final_cost: cost,
        iterations: 0,
        accepted_steps: 0,
        termination: Termination::MaxIterations,
        unobservable_directions: None,
    };

    if cost <= f64::MIN_POSITIVE {
        report.termination = Termination::AlreadyOptimal;
        return (x, report);
    }

    let n = problem.num_params();
    let mut lambda = opts.initial_lambda;
    let mut jac = block_jacobians(problem, &lay, &x, &r, opts.fd_step);
    let mut trial_r = vec![0.0; lay.total];
    let mut last_jtj: Option<DMatrix<f64>> = None;

    for iter in 0..opts.max_iterations {
        report.iterations = iter + 1;
        let (jtj, jtr) = assemble_normal_equations(n, &jac, &lay, &r);

        let mut accepted = false;
        while lambda <= opts.max_lambda {
            // Marquardt scaling: damp by the diagonal so mixed units
            // (radians, mm, pixels) are handled uniformly.
            let mut damped = jtj.clone();
            let floor = 1e-12 * jtj.diagonal().amax().max(f64::MIN_POSITIVE);
            for i in 0..n {
                damped[(i, i)] += lambda * jtj[(i, i)].max(floor);
            }
            let Some(chol) = Cholesky::new(damped) else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&jtr));
            let mut trial_x = x.clone();
            for i in 0..n {
                trial_x[i] += step[i];
            }
            eval_all(problem, &lay, &trial_x, &mut trial_r);
            let trial_cost = cost_of(&trial_r);
            if trial_cost < cost {
                let rel_change = (cost - trial_cost) / cost.max(f64::MIN_POSITIVE);
                x = trial_x;
                std::mem::swap(&mut r, &mut trial_r);
                cost = trial_cost;
                lambda = (lambda * 0.1).max(1e-15);
                accepted = true;
                report.accepted_steps += 1;
                if rel_change < opts.cost_tolerance {
                    report.termination = Termination::CostTolerance;
                    report.final_cost = cost;
                    last_jtj = Some(jtj);
                    finish(problem, &lay, &x, opts, &mut report, last_jtj);
                    return (x, report);
                }
                break;
            }
            lambda *= 10.0;
        }

        if !accepted {
            report.termination = Termination::StepFailed;
            report.final_cost = cost;
            finish(problem, &lay, &x, opts, &mut report, Some(jtj));
            return (x, report);
        }
        jac = block_jacobians(problem, &lay, &x, &r, opts.fd_step);
        last_jtj = None;
    }

    report.termination = Termination::MaxIterations;
    report.final_cost = cost;
    finish(problem, &lay, &x, opts, &mut report, last_jtj);
    (x, report)
}

fn finish(
    problem: &impl BlockProblem,
    lay: &Layout,
    x: &[f64],
    opts: &LmOptions,
    report: &mut LmReport,
    jtj: Option<DMatrix<f64>>,
) {
    if !opts.diagnose_rank {
        return;
    }
    let jtj = jtj.unwrap_or_else(|| {
        let mut r = vec![0.0; lay.total];
        eval_all(problem, lay, x, &mut r);
        let jac = block_jacobians(problem, lay, x, &r, opts.fd_step);
        assemble_normal_equations(problem.num_params(), &jac, lay, &r).0
    });
    let eig = jtj.symmetric_eigenvalues();
    let max_ev = eig.amax().max(f64::MIN_POSITIVE);
    report.unobservable_directions =
        Some(eig.iter().filter(|&&ev| ev.abs() < 1e-12 * max_ev).count());
}

/// Root-mean-square residual for a cost (sum of squares) over `m` residuals.
pub fn rms(cost: f64, m: usize) -> f64 {
    (cost / m.max(1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// y = a * exp(b * t) sampled on a grid; recover (a, b).
    struct ExpFit {
        t: Vec<f64>,
        y: Vec<f64>,
    }

    impl BlockProblem for ExpFit {
        fn num_params(&self) -> usize {
            2
        }
        fn num_blocks(&self) -> usize {
            self.t.len()
        }
        fn block_len(&self, _b: usize) -> usize {
            1
        }
        fn block_params(&self, _b: usize) -> Vec<usize> {
            vec![0, 1]
        }
        fn eval_block(&self, b: usize, p: &[f64], out: &mut [f64]) {
            out[0] = p[0] * (p[1] * self.t[b]).exp() - self.y[b];
        }
    }

    fn problem() -> ExpFit {
        let t: Vec<f64> = (0..40).map(|i| i as f64 * 0.05).collect();
        let y = t.iter().map(|&t| 2.5 * (-1.3_f64 * t).exp()).collect();
        ExpFit { t, y }
    }

    #[test]
    fn recovers_exponential_parameters() {
        let p = problem();
        let (x, rep) = solve(&p, &[1.0, 0.0], &LmOptions::default());
        assert!((x[0] - 2.5).abs() < 1e-8, "a = {}", x[0]);
        assert!((x[1] + 1.3).abs() < 1e-8, "b = {}", x[1]);
        assert!(rep.final_cost < 1e-16);
        assert!(rep.final_cost <= rep.initial_cost);
    }

    #[test]
    fn start_at_optimum_accepts_no_steps() {
        let p = problem();
        let (_, rep) = solve(&p, &[2.5, -1.3], &LmOptions::default());
        assert_eq!(rep.accepted_steps, 0);
        assert!(matches!(
            rep.termination,
            Termination::AlreadyOptimal | Termination::StepFailed
        ));
    }

    #[test]
    fn cost_is_monotone_under_perturbed_starts() {
        let p = problem();
        for s in 0..5 {
            let x0 = [1.0 + s as f64, -0.2 * s as f64];
            let (_, rep) = solve(&p, &x0, &LmOptions::default());
            assert!(rep.final_cost <= rep.initial_cost);
        }
    }

    #[test]
    fn rank_diagnosis_flags_unused_parameter() {
        // Third parameter never touches the residuals.
        struct Padded(ExpFit);
        impl BlockProblem for Padded {
            fn num_params(&self) -> usize {
                3
            }
            fn num_blocks(&self) -> usize {
                self.0.num_blocks()
            }
            fn block_len(&self, b: usize) -> usize {
                self.0.block_len(b)
            }
            fn block_params(&self, _b: usize) -> Vec<usize> {
                vec![0, 1, 2]
            }
            fn eval_block(&self, b: usize, p: &[f64], out: &mut [f64]) {
                self.0.eval_block(b, p, out);
            }
        }
        let p = Padded(problem());
        let opts = LmOptions {
            diagnose_rank: true,
            ..Default::default()
        };
        let (_, rep) = solve(&p, &[1.0, 0.0, 7.0], &opts);
        assert_eq!(rep.unobservable_directions, Some(1));
    }
}
