//! The time-marching scheme on the front-fixed domain.
//!
//! Each step, in order:
//!
//! 1. radius update from the two-history-level difference formula, with the
//!    boundary velocity extrapolated to the new level,
//! 2. collocation solve of the linearized parabolic equation: row j
//!    enforces, at Gauss node x_j,
//!    `b_i - h* g_n(x_j) b_i' - (4 h* D_p / R_{n+1}^2)(b_i'' + 2 b_i'/(x_j+1))`
//!    applied to the new coefficients against the history term g_n*,
//! 3. velocity reconstruction by integrating the elliptic equation from
//!    rho = -1 and dividing by (rho+1)^2 p(rho).
//!
//! The advection factor g_n(rho) = (rho+1)(2 v_n(1) - v_{n-1}(1))/R_{n+1}
//! and the reaction history h*(2 f(p_n) - f(p_{n-1})) linearize the
//! nonlinearities to second order, so each step is a single dense solve.

#![allow(clippy::needless_range_loop)]

use crate::error::{Error, TerminalReason};
use crate::linalg::SquareMatrix;
use crate::mms::{MmsCase, SpaceTimeFn};
use crate::model::{self, ModelParams};
use crate::polybasis::{BasisTables, QuadratureRule, TrialBasis};
use crate::Result;

/// Nodal products |(rho+1)^2 p| below this bound are not divided by;
/// the velocity there is filled in by interpolation instead.
pub const EPS_DIV: f64 = 1e-10;

/// Condition-estimate limit for the collocation system.
pub const CONDITION_LIMIT: f64 = 1e13;

/// Uniform time grid on [0, T] with the non-classical effective step
/// h* = 2h/3.
#[derive(Debug, Clone, Copy)]
pub struct TimeGrid {
    pub t_final: f64,
    pub steps: usize,
    pub h: f64,
    pub h_star: f64,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Result<Self> {
        if !t_final.is_finite() || t_final <= 0.0 {
            return Err(Error::InvalidDiscretization(
                "final time must be positive".into(),
            ));
        }
        if steps < 2 {
            return Err(Error::InvalidDiscretization(
                "need at least 2 time steps (two-level history)".into(),
            ));
        }
        let h = t_final / steps as f64;
        Ok(TimeGrid {
            t_final,
            steps,
            h,
            h_star: 2.0 * h / 3.0,
        })
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.h
    }
}

/// Radius update
/// R_{n+1} = R_n - (R_{n-1} - R_n)/3 + h* (2 v_n(1) - v_{n-1}(1)).
///
/// The extrapolation 2 v_n(1) - v_{n-1}(1) stands in for v(1, t_{n+1}),
/// keeping the local error O(h^3); a nonpositive result is a terminal
/// condition decided by the caller, not a panic.
pub fn radius_update(r_n: f64, r_nm1: f64, v1_n: f64, v1_nm1: f64, h_star: f64) -> f64 {
    r_n - (r_nm1 - r_n) / 3.0 + h_star * (2.0 * v1_n - v1_nm1)
}

/// Two time levels of the discrete solution.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub coeffs_n: Vec<f64>,
    pub coeffs_nm1: Vec<f64>,
    pub p_nodes_n: Vec<f64>,
    pub p_nodes_nm1: Vec<f64>,
    pub v_nodes_n: Vec<f64>,
    pub v1_n: f64,
    pub v1_nm1: f64,
    pub r_n: f64,
    pub r_nm1: f64,
    /// Index n of the current level.
    pub step_index: usize,
}

/// Velocity samples at the collocation nodes and at rho = 1. Indices in
/// `fallback` mark samples filled by interpolation because the nodal
/// product (rho+1)^2 p fell under [`EPS_DIV`]; index `at_nodes.len()`
/// denotes the rho = 1 sample.
#[derive(Debug, Clone)]
pub struct VelocityProfile {
    pub at_nodes: Vec<f64>,
    pub at_right: f64,
    pub fallback: Vec<usize>,
}

/// Source closures of a manufactured or perturbed problem.
#[derive(Clone, Copy)]
pub struct Sources<'a> {
    pub parabolic: &'a SpaceTimeFn,
    pub velocity: &'a SpaceTimeFn,
}

impl MmsCase {
    pub fn solver_sources(&self) -> Sources<'_> {
        Sources {
            parabolic: &*self.source_p,
            velocity: &*self.source_v,
        }
    }
}

/// How the second time level is produced.
#[derive(Clone, Copy)]
pub enum BootstrapMode<'a> {
    /// Backward Euler over [0, h], sub-stepped [`EULER_SUBSTEPS`] times.
    /// The reaction term is affine in p and taken implicitly, the
    /// advection velocity is lagged one substep. Locally O(h^2), so the
    /// global second order is preserved; the substeps damp the stiff
    /// startup transient at the near-axis node, which a single step of
    /// size h would leave large enough to dominate max-norm errors.
    BackwardEuler,
    /// Project the known exact solution at t_1 (manufactured runs).
    Exact(&'a MmsCase),
}

/// Substep count of the backward-Euler bootstrap.
pub const EULER_SUBSTEPS: usize = 32;

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct StepDiagnostics {
    pub condition: f64,
    pub velocity_fallbacks: usize,
}

/// Run controls for [`SpectralScheme::run`].
pub struct RunOptions<'a> {
    pub initial: &'a (dyn Fn(f64) -> f64 + Sync),
    pub sources: Option<Sources<'a>>,
    pub bootstrap: BootstrapMode<'a>,
    /// Keep every stride-th level (and always the final one) in the
    /// trajectory. Studies use stride 1.
    pub stride: usize,
}

/// Retained time levels of a run. `coeffs[k]` expands p at `times[k]` in
/// the trial basis; nodal values follow from the basis when needed.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub n_max: usize,
    pub nodes: Vec<f64>,
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    pub coeffs: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
    pub v1: Vec<f64>,
}

impl Trajectory {
    pub fn level_count(&self) -> usize {
        self.times.len()
    }
}

/// Outcome of a run: the (possibly partial) trajectory plus diagnostics
/// and the machine-readable reason if the march ended early.
#[derive(Debug)]
pub struct RunReport {
    pub terminal: Option<TerminalReason>,
    pub projection_residual: f64,
    pub max_condition: f64,
    pub velocity_fallbacks: usize,
}

/// Discretization bundle: parameters, grid, trial basis of size N+1 and
/// the Gauss rule with N+1 collocation nodes.
pub struct SpectralScheme {
    pub params: ModelParams,
    pub grid: TimeGrid,
    pub basis: TrialBasis,
    pub rule: QuadratureRule,
    tables: BasisTables,
    panel: QuadratureRule,
    projection_rule: QuadratureRule,
}

impl SpectralScheme {
    /// `n_max` is the basis cutoff N; collocation happens at the N+1 Gauss
    /// nodes so the step system is square.
    pub fn new(params: ModelParams, grid: TimeGrid, n_max: usize) -> Result<Self> {
        let basis = TrialBasis::new(n_max);
        let rule = QuadratureRule::gauss(n_max + 1)?;
        let tables = basis.tabulate(&rule.nodes);
        let panel = QuadratureRule::gauss(16)?;
        let projection_rule = QuadratureRule::gauss(n_max + 3)?;
        Ok(SpectralScheme {
            params,
            grid,
            basis,
            rule,
            tables,
            panel,
            projection_rule,
        })
    }

    pub fn node_count(&self) -> usize {
        self.rule.nodes.len()
    }

    /// Nodal values of a coefficient vector at the collocation nodes.
    pub fn nodal_values(&self, coeffs: &[f64]) -> Vec<f64> {
        self.tables.expansion_at_points(coeffs, self.node_count())
    }

    /// Discrete L2 projection onto the trial space using the (N+3)-point
    /// rule (exact for the Gram products). Returns the coefficients and
    /// the max-abs residual |f - projection| over a dense sample.
    pub fn project(&self, f: &dyn Fn(f64) -> f64) -> Result<(Vec<f64>, f64)> {
        let size = self.basis.size();
        let tab = self.basis.tabulate(&self.projection_rule.nodes);
        let mut gram = SquareMatrix::zeros(size);
        let mut rhs = vec![0.0; size];
        for (q, (&x, &w)) in self
            .projection_rule
            .nodes
            .iter()
            .zip(&self.projection_rule.weights)
            .enumerate()
        {
            let fx = f(x);
            for i in 0..size {
                let bi = tab.value(q, i);
                rhs[i] += w * bi * fx;
                for j in 0..size {
                    let prev = gram.get(i, j);
                    gram.set(i, j, prev + w * bi * tab.value(q, j));
                }
            }
        }
        let coeffs = gram.lu()?.solve(&rhs);
        let mut residual = 0.0_f64;
        for k in 0..=400 {
            let x = -1.0 + k as f64 / 200.0;
            residual = residual.max((f(x) - self.basis.eval_expansion(&coeffs, x)).abs());
        }
        Ok((coeffs, residual))
    }

    /// Integrate the elliptic equation from rho = -1 and divide by
    /// (rho+1)^2 p to recover the velocity at the nodes and at rho = 1.
    /// W(rho) accumulates over composite 16-point Gauss panels between
    /// consecutive nodes.
    pub fn reconstruct_velocity(
        &self,
        coeffs: &[f64],
        p_nodes: &[f64],
        radius: f64,
        t: f64,
        source: Option<&SpaceTimeFn>,
    ) -> VelocityProfile {
        let nodes = &self.rule.nodes;
        let n = nodes.len();
        let integrand = |x: f64| {
            let p = self.basis.eval_expansion(coeffs, x);
            let mut val = model::velocity_rhs(p, x, radius, t, &self.params);
            if let Some(src) = source {
                val += src(x, t);
            }
            val
        };

        // cumulative integral at every node, then up to rho = 1
        let mut w_cum = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        let mut left = -1.0;
        for &x in nodes {
            acc += self.panel.integrate_on(left, x, integrand);
            w_cum.push(acc);
            left = x;
        }
        acc += self.panel.integrate_on(left, 1.0, integrand);
        w_cum.push(acc);

        let mut at_nodes = vec![0.0; n];
        let mut good = vec![false; n];
        let mut fallback = Vec::new();
        for j in 0..n {
            let shift = nodes[j] + 1.0;
            let denom = shift * shift * p_nodes[j];
            if denom.abs() >= EPS_DIV {
                at_nodes[j] = w_cum[j] / denom;
                good[j] = true;
            }
        }
        let p_right = self.basis.eval_expansion(coeffs, 1.0);
        let denom_right = 4.0 * p_right;
        let mut at_right = 0.0;
        let mut right_good = false;
        if denom_right.abs() >= EPS_DIV {
            at_right = w_cum[n] / denom_right;
            right_good = true;
        }

        let interpolate = |x_target: f64, at_nodes: &[f64], good: &[bool]| -> Option<f64> {
            let mut candidates: Vec<usize> = (0..n).filter(|&j| good[j]).collect();
            if candidates.is_empty() {
                return None;
            }
            candidates.sort_by(|&a, &b| {
                (nodes[a] - x_target)
                    .abs()
                    .total_cmp(&(nodes[b] - x_target).abs())
            });
            candidates.truncate(4);
            let mut value = 0.0;
            for &i in &candidates {
                let mut weight = at_nodes[i];
                for &m in &candidates {
                    if m != i {
                        weight *= (x_target - nodes[m]) / (nodes[i] - nodes[m]);
                    }
                }
                value += weight;
            }
            Some(value)
        };

        for j in 0..n {
            if !good[j] {
                at_nodes[j] = interpolate(nodes[j], &at_nodes, &good).unwrap_or(0.0);
                fallback.push(j);
            }
        }
        if !right_good {
            at_right = interpolate(1.0, &at_nodes, &good).unwrap_or(0.0);
            fallback.push(n);
        }

        VelocityProfile {
            at_nodes,
            at_right,
            fallback,
        }
    }

    /// Collocation matrix and right-hand side for the step from level n to
    /// n+1, given the already-updated radius R_{n+1}.
    pub fn assemble_step_system(
        &self,
        state: &SolverState,
        r_np1: f64,
        source_p: Option<&SpaceTimeFn>,
    ) -> (SquareMatrix, Vec<f64>) {
        let n_nodes = self.node_count();
        let size = self.basis.size();
        let h_star = self.grid.h_star;
        let t_n = self.grid.time(state.step_index);
        let t_nm1 = self.grid.time(state.step_index - 1);
        let g_slope = (2.0 * state.v1_n - state.v1_nm1) / r_np1;
        let diff = 4.0 * h_star * self.params.d_p / (r_np1 * r_np1);

        let mut a = SquareMatrix::zeros(size);
        let mut rhs = vec![0.0; size];
        for j in 0..n_nodes {
            let x = self.rule.nodes[j];
            let adv = h_star * g_slope * (x + 1.0);
            let inv_shift = 2.0 / (x + 1.0);
            for i in 0..size {
                let b = self.tables.values[j * size + i];
                let b1 = self.tables.d1[j * size + i];
                let b2 = self.tables.d2[j * size + i];
                a.set(j, i, b - adv * b1 - diff * (b2 + inv_shift * b1));
            }
            let mut r = state.p_nodes_n[j] - (state.p_nodes_nm1[j] - state.p_nodes_n[j]) / 3.0
                + h_star
                    * (2.0 * model::reaction_f(state.p_nodes_n[j], t_n, &self.params)
                        - model::reaction_f(state.p_nodes_nm1[j], t_nm1, &self.params));
            if let Some(src) = source_p {
                r += h_star * (2.0 * src(x, t_n) - src(x, t_nm1));
            }
            rhs[j] = r;
        }
        (a, rhs)
    }

    /// One step of the scheme: radius first (R_{n+1} appears inside the
    /// operator), then the parabolic solve, then velocity reconstruction.
    pub fn advance(
        &self,
        state: &SolverState,
        sources: Option<Sources<'_>>,
    ) -> Result<(SolverState, StepDiagnostics)> {
        let step = state.step_index + 1;
        let t_np1 = self.grid.time(step);
        let r_np1 = radius_update(
            state.r_n,
            state.r_nm1,
            state.v1_n,
            state.v1_nm1,
            self.grid.h_star,
        );
        if r_np1 <= 0.0 {
            return Err(Error::Terminal(TerminalReason::RadiusCollapse {
                step,
                radius: r_np1,
            }));
        }
        let (a, rhs) = self.assemble_step_system(state, r_np1, sources.map(|s| s.parabolic));
        let lu = a.lu().map_err(|_| {
            Error::Terminal(TerminalReason::IllConditioned {
                step,
                condition: f64::INFINITY,
            })
        })?;
        let condition = lu.condition_estimate();
        if condition > CONDITION_LIMIT {
            return Err(Error::Terminal(TerminalReason::IllConditioned {
                step,
                condition,
            }));
        }
        let coeffs = lu.solve(&rhs);
        let p_nodes = self.nodal_values(&coeffs);
        let velocity =
            self.reconstruct_velocity(&coeffs, &p_nodes, r_np1, t_np1, sources.map(|s| s.velocity));

        let next = SolverState {
            coeffs_nm1: state.coeffs_n.clone(),
            p_nodes_nm1: state.p_nodes_n.clone(),
            v1_nm1: state.v1_n,
            r_nm1: state.r_n,
            v1_n: velocity.at_right,
            v_nodes_n: velocity.at_nodes,
            coeffs_n: coeffs,
            p_nodes_n: p_nodes,
            r_n: r_np1,
            step_index: step,
        };
        Ok((
            next,
            StepDiagnostics {
                condition,
                velocity_fallbacks: velocity.fallback.len(),
            },
        ))
    }

    /// Build the two starting levels. Returns the state at n = 1 together
    /// with level-0 data for the trajectory and the projection residual.
    #[allow(clippy::type_complexity)]
    pub fn bootstrap(
        &self,
        initial: &dyn Fn(f64) -> f64,
        sources: Option<Sources<'_>>,
        mode: BootstrapMode<'_>,
    ) -> Result<(SolverState, LevelZero, f64)> {
        let t1 = self.grid.time(1);
        let (coeffs_0, residual) = self.project(initial)?;
        let p_nodes_0 = self.nodal_values(&coeffs_0);
        let r_0 = match mode {
            BootstrapMode::Exact(case) => (case.exact_r)(0.0),
            BootstrapMode::BackwardEuler => 1.0,
        };
        let v_0 = self.reconstruct_velocity(
            &coeffs_0,
            &p_nodes_0,
            r_0,
            0.0,
            sources.map(|s| s.velocity),
        );

        let (coeffs_1, r_1) = match mode {
            BootstrapMode::Exact(case) => {
                let (c1, _) = self.project(&|x| (case.exact_p)(x, t1))?;
                (c1, (case.exact_r)(t1))
            }
            BootstrapMode::BackwardEuler => {
                let dt = self.grid.h / EULER_SUBSTEPS as f64;
                let size = self.basis.size();
                let mut coeffs = coeffs_0.clone();
                let mut p_nodes = p_nodes_0.clone();
                let mut radius = r_0;
                let mut v1 = v_0.at_right;
                for sub in 1..=EULER_SUBSTEPS {
                    let t_next = sub as f64 * dt;
                    let r_next = radius + dt * v1;
                    if r_next <= 0.0 {
                        return Err(Error::Terminal(TerminalReason::RadiusCollapse {
                            step: 1,
                            radius: r_next,
                        }));
                    }
                    let (c0, c1) = model::reaction_affine(t_next, &self.params);
                    let g_slope = v1 / r_next;
                    let diff = 4.0 * dt * self.params.d_p / (r_next * r_next);
                    let mut a = SquareMatrix::zeros(size);
                    let mut rhs = vec![0.0; size];
                    for j in 0..self.node_count() {
                        let x = self.rule.nodes[j];
                        let adv = dt * g_slope * (x + 1.0);
                        let inv_shift = 2.0 / (x + 1.0);
                        for i in 0..size {
                            let b = self.tables.values[j * size + i];
                            let b1 = self.tables.d1[j * size + i];
                            let b2 = self.tables.d2[j * size + i];
                            a.set(
                                j,
                                i,
                                b - adv * b1 - diff * (b2 + inv_shift * b1) - dt * c1 * b,
                            );
                        }
                        rhs[j] = p_nodes[j] + dt * c0;
                        if let Some(src) = sources.map(|s| s.parabolic) {
                            rhs[j] += dt * src(x, t_next);
                        }
                    }
                    let lu = a.lu().map_err(|_| {
                        Error::Terminal(TerminalReason::IllConditioned {
                            step: 1,
                            condition: f64::INFINITY,
                        })
                    })?;
                    coeffs = lu.solve(&rhs);
                    p_nodes = self.nodal_values(&coeffs);
                    let vel = self.reconstruct_velocity(
                        &coeffs,
                        &p_nodes,
                        r_next,
                        t_next,
                        sources.map(|s| s.velocity),
                    );
                    radius = r_next;
                    v1 = vel.at_right;
                }
                (coeffs, radius)
            }
        };
        let p_nodes_1 = self.nodal_values(&coeffs_1);
        let v_1 = self.reconstruct_velocity(
            &coeffs_1,
            &p_nodes_1,
            r_1,
            t1,
            sources.map(|s| s.velocity),
        );

        let level_zero = LevelZero {
            coeffs: coeffs_0.clone(),
            radius: r_0,
            v1: v_0.at_right,
        };
        let state = SolverState {
            coeffs_n: coeffs_1,
            coeffs_nm1: coeffs_0,
            p_nodes_n: p_nodes_1,
            p_nodes_nm1: p_nodes_0,
            v_nodes_n: v_1.at_nodes,
            v1_n: v_1.at_right,
            v1_nm1: v_0.at_right,
            r_n: r_1,
            r_nm1: r_0,
            step_index: 1,
        };
        Ok((state, level_zero, residual))
    }

    /// Full time march from the bootstrap to T. Terminal conditions end
    /// the run with the partial trajectory and the reason in the report.
    pub fn run(&self, options: RunOptions<'_>) -> Result<(Trajectory, RunReport)> {
        if options.stride == 0 {
            return Err(Error::InvalidDiscretization("stride must be >= 1".into()));
        }
        let steps = self.grid.steps;
        let mut trajectory = Trajectory {
            n_max: self.basis.size() - 1,
            nodes: self.rule.nodes.clone(),
            steps: Vec::new(),
            times: Vec::new(),
            coeffs: Vec::new(),
            radii: Vec::new(),
            v1: Vec::new(),
        };
        let retain = |n: usize| n.is_multiple_of(options.stride) || n == steps;

        let mut report = RunReport {
            terminal: None,
            projection_residual: 0.0,
            max_condition: 0.0,
            velocity_fallbacks: 0,
        };

        let boot = self.bootstrap(options.initial, options.sources, options.bootstrap);
        let (mut state, level_zero, residual) = match boot {
            Ok(v) => v,
            Err(Error::Terminal(reason)) => {
                report.terminal = Some(reason);
                return Ok((trajectory, report));
            }
            Err(other) => return Err(other),
        };
        report.projection_residual = residual;

        let push = |traj: &mut Trajectory, n: usize, coeffs: &[f64], r: f64, v1: f64| {
            traj.steps.push(n);
            traj.times.push(self.grid.time(n));
            traj.coeffs.push(coeffs.to_vec());
            traj.radii.push(r);
            traj.v1.push(v1);
        };
        if retain(0) {
            push(
                &mut trajectory,
                0,
                &level_zero.coeffs,
                level_zero.radius,
                level_zero.v1,
            );
        }
        if retain(1) {
            push(&mut trajectory, 1, &state.coeffs_n, state.r_n, state.v1_n);
        }

        while state.step_index < steps {
            match self.advance(&state, options.sources) {
                Ok((next, diag)) => {
                    report.max_condition = report.max_condition.max(diag.condition);
                    report.velocity_fallbacks += diag.velocity_fallbacks;
                    state = next;
                    if retain(state.step_index) {
                        push(&mut trajectory, state.step_index, &state.coeffs_n, state.r_n, state.v1_n);
                    }
                }
                Err(Error::Terminal(reason)) => {
                    report.terminal = Some(reason);
                    break;
                }
                Err(other) => return Err(other),
            }
        }
        Ok((trajectory, report))
    }
}

/// Level-0 data retained for trajectories.
#[derive(Debug, Clone)]
pub struct LevelZero {
    pub coeffs: Vec<f64>,
    pub radius: f64,
    pub v1: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mms;

    fn degenerate_params() -> ModelParams {
        // delta_p = delta_q = alpha_p = 1 identically and I = 1 make the
        // reaction and velocity right sides vanish for any p
        ModelParams::new_relaxed(ModelParams {
            w1: 1.0,
            w2: 1.0,
            delta1: 1.0,
            delta2: 1.0,
            theta1: 1.0,
            d_p: 0.0,
            inhibitor: 1.0,
            ..ModelParams::default()
        })
        .unwrap()
    }

    #[test]
    fn grid_invariants() {
        let g = TimeGrid::new(1.0, 100).unwrap();
        assert_eq!(g.h, 0.01);
        assert_eq!(g.h_star, 2.0 * g.h / 3.0);
        assert!(TimeGrid::new(1.0, 1).is_err());
        assert!(TimeGrid::new(0.0, 10).is_err());
    }

    #[test]
    fn radius_update_identities() {
        // fixed point
        assert_eq!(radius_update(1.0, 1.0, 0.0, 0.0, 0.01), 1.0);
        // equal past radii, steady boundary velocity v
        let (v, hs) = (-0.37, 0.02);
        assert!((radius_update(1.0, 1.0, v, v, hs) - (1.0 + hs * v)).abs() < 1e-15);
    }

    #[test]
    fn radius_update_is_locally_third_order() {
        // Exact data of the first verification case: R = 1/(t+1),
        // v(1, t) = -1/(t+1)^2. Error against R(t_{n+1}) must shrink ~8x
        // when h halves.
        let r = |t: f64| 1.0 / (t + 1.0);
        let v1 = |t: f64| -1.0 / ((t + 1.0) * (t + 1.0));
        let t_n = 0.4;
        let local_err = |h: f64| {
            let got = radius_update(r(t_n), r(t_n - h), v1(t_n), v1(t_n - h), 2.0 * h / 3.0);
            (got - r(t_n + h)).abs()
        };
        let e1 = local_err(1e-2);
        let e2 = local_err(5e-3);
        let ratio = e1 / e2;
        assert!(
            (6.0..10.0).contains(&ratio),
            "local order ratio {ratio}, errors {e1:.3e}/{e2:.3e}"
        );
    }

    #[test]
    fn degenerate_advance_is_identity() {
        // D_p = 0, g = 0, f = 0, no sources: the step reduces to
        // interpolation of the history term, which equals the current level
        // when both history levels agree.
        let params = degenerate_params();
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let scheme = SpectralScheme::new(params, grid, 8).unwrap();
        let coeffs: Vec<f64> = (0..9).map(|i| 0.4 - 0.05 * i as f64).collect();
        let p_nodes = scheme.nodal_values(&coeffs);
        let state = SolverState {
            coeffs_n: coeffs.clone(),
            coeffs_nm1: coeffs.clone(),
            p_nodes_n: p_nodes.clone(),
            p_nodes_nm1: p_nodes,
            v_nodes_n: vec![0.0; 9],
            v1_n: 0.0,
            v1_nm1: 0.0,
            r_n: 1.0,
            r_nm1: 1.0,
            step_index: 1,
        };
        let (next, _) = scheme.advance(&state, None).unwrap();
        assert_eq!(next.r_n, 1.0);
        for (a, b) in next.coeffs_n.iter().zip(&coeffs) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn degenerate_run_stays_constant() {
        let params = degenerate_params();
        let grid = TimeGrid::new(1.0, 2).unwrap();
        let scheme = SpectralScheme::new(params, grid, 6).unwrap();
        let (traj, report) = scheme
            .run(RunOptions {
                initial: &|_| 0.75,
                sources: None,
                bootstrap: BootstrapMode::BackwardEuler,
                stride: 1,
            })
            .unwrap();
        assert!(report.terminal.is_none());
        assert_eq!(traj.level_count(), 3);
        for level in 0..3 {
            let vals = TrialBasis::new(6)
                .tabulate(&traj.nodes)
                .expansion_at_points(&traj.coeffs[level], traj.nodes.len());
            for v in vals {
                assert!((v - 0.75).abs() < 1e-12);
            }
            assert!((traj.radii[level] - 1.0).abs() < 1e-12);
            assert!(traj.v1[level].abs() < 1e-12);
        }
    }

    #[test]
    fn projection_of_trial_space_function_is_exact() {
        let params = ModelParams::default();
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let scheme = SpectralScheme::new(params, grid, 5).unwrap();
        // 2(rho^3/3 - rho) has vanishing endpoint derivatives: inside the
        // trial space, so the projection residual is at rounding level
        let (_, residual) = scheme
            .project(&|x: f64| 2.0 * (x * x * x / 3.0 - x))
            .unwrap();
        assert!(residual < 1e-12, "residual {residual}");
        // a function with nonzero endpoint slope is not representable
        let (_, residual) = scheme.project(&|x: f64| x).unwrap();
        assert!(residual > 1e-3);
    }

    #[test]
    fn velocity_zero_integrand_gives_zero() {
        let params = degenerate_params();
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let scheme = SpectralScheme::new(params, grid, 8).unwrap();
        let (coeffs, _) = scheme.project(&|_| 1.0).unwrap();
        let p_nodes = scheme.nodal_values(&coeffs);
        let v = scheme.reconstruct_velocity(&coeffs, &p_nodes, 1.0, 0.0, None);
        for val in &v.at_nodes {
            assert!(val.abs() < 1e-14);
        }
        assert!(v.at_right.abs() < 1e-14);
        assert!(v.fallback.is_empty());
    }

    #[test]
    fn velocity_constant_source_has_cubic_antiderivative() {
        // p = 1 with the degenerate parameters zeroes the model integrand;
        // a source c (rho+1)^2 then gives v = c (rho+1)/3 exactly.
        let params = degenerate_params();
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let scheme = SpectralScheme::new(params, grid, 8).unwrap();
        let (coeffs, _) = scheme.project(&|_| 1.0).unwrap();
        let p_nodes = scheme.nodal_values(&coeffs);
        let c = 0.63;
        let src = move |x: f64, _t: f64| c * (x + 1.0) * (x + 1.0);
        let v = scheme.reconstruct_velocity(&coeffs, &p_nodes, 1.0, 0.0, Some(&src));
        for (j, &x) in scheme.rule.nodes.iter().enumerate() {
            let expect = c * (x + 1.0) / 3.0;
            assert!((v.at_nodes[j] - expect).abs() < 1e-12, "node {j}");
        }
        assert!((v.at_right - c * 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn velocity_matches_example1_exact() {
        // with the exact initial profile, the reconstructed boundary
        // velocity at t = 0 equals v(1, 0) = -1 for the printed fields
        let params = ModelParams::default();
        let case = mms::example1(params, true);
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let scheme = SpectralScheme::new(params, grid, 20).unwrap();
        let profile = case.initial_profile();
        let (coeffs, _) = scheme.project(&profile).unwrap();
        let p_nodes = scheme.nodal_values(&coeffs);
        let v = scheme.reconstruct_velocity(&coeffs, &p_nodes, 1.0, 0.0, Some(&*case.source_v));
        assert!(
            (v.at_right + 1.0).abs() < 1e-10,
            "v(1,0) = {} (want -1)",
            v.at_right
        );
        // interior nodes match the exact profile wherever no fallback fired
        for (j, &x) in scheme.rule.nodes.iter().enumerate() {
            if !v.fallback.contains(&j) {
                let expect = (case.exact_v)(x, 0.0);
                assert!(
                    (v.at_nodes[j] - expect).abs() < 1e-9,
                    "node {j}: {} vs {expect}",
                    v.at_nodes[j]
                );
            }
        }
    }

    #[test]
    fn velocity_division_guard_interpolates_zero_crossing() {
        // Example-1 initial profile vanishes at rho = 0, which is a
        // collocation node for even N (odd node count): the guard must
        // fill that node by interpolation and still be accurate.
        let params = ModelParams::default();
        let case = mms::example1(params, true);
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let scheme = SpectralScheme::new(params, grid, 20).unwrap(); // 21 nodes, middle at 0
        let profile = case.initial_profile();
        let (coeffs, _) = scheme.project(&profile).unwrap();
        let p_nodes = scheme.nodal_values(&coeffs);
        let v = scheme.reconstruct_velocity(&coeffs, &p_nodes, 1.0, 0.0, Some(&*case.source_v));
        let mid = scheme.node_count() / 2;
        assert_eq!(scheme.rule.nodes[mid], 0.0);
        assert!(v.fallback.contains(&mid), "guard did not fire at rho = 0");
        // 4-point Lagrange at node spacing ~0.15 carries O(dx^4) error;
        // the interior velocity is diagnostic only and never feeds back
        let expect = (case.exact_v)(0.0, 0.0);
        assert!(
            (v.at_nodes[mid] - expect).abs() < 1e-4,
            "interpolated {} vs exact {expect}",
            v.at_nodes[mid]
        );
    }

    #[test]
    fn assemble_matrix_shape_and_interpolation_limit() {
        let params = degenerate_params();
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let scheme = SpectralScheme::new(params, grid, 7).unwrap();
        let coeffs: Vec<f64> = (0..8).map(|i| (i as f64 * 0.9).sin() * 0.1).collect();
        let other: Vec<f64> = (0..8).map(|i| 0.2 - 0.03 * i as f64).collect();
        let state = SolverState {
            p_nodes_n: scheme.nodal_values(&coeffs),
            p_nodes_nm1: scheme.nodal_values(&other),
            coeffs_n: coeffs,
            coeffs_nm1: other,
            v_nodes_n: vec![0.0; 8],
            v1_n: 0.0,
            v1_nm1: 0.0,
            r_n: 1.0,
            r_nm1: 1.0,
            step_index: 3,
        };
        let (a, rhs) = scheme.assemble_step_system(&state, 1.0, None);
        assert_eq!(a.order(), 8);
        assert_eq!(rhs.len(), 8);
        // with every operator term gone the solve is pure interpolation of
        // the history combination
        let sol = a.lu().unwrap().solve(&rhs);
        for (j, &r) in rhs.iter().enumerate() {
            let interp = state.p_nodes_n[j] - (state.p_nodes_nm1[j] - state.p_nodes_n[j]) / 3.0;
            assert!((r - interp).abs() < 1e-15);
            let back: f64 = (0..8)
                .map(|i| sol[i] * scheme.tables.values[j * 8 + i])
                .sum();
            assert!((back - r).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_bootstrap_reproduces_known_levels() {
        let params = ModelParams::default();
        let case = mms::example1(params, true);
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let scheme = SpectralScheme::new(params, grid, 12).unwrap();
        let profile = case.initial_profile();
        let (state, level0, residual) = scheme
            .bootstrap(
                &profile,
                Some(case.solver_sources()),
                BootstrapMode::Exact(&case),
            )
            .unwrap();
        assert!(residual < 1e-12);
        assert_eq!(state.step_index, 1);
        assert!((level0.radius - 1.0).abs() < 1e-15);
        let t1 = grid.time(1);
        for (j, &x) in scheme.rule.nodes.iter().enumerate() {
            let expect = (case.exact_p)(x, t1);
            assert!((state.p_nodes_n[j] - expect).abs() < 1e-12);
        }
        assert!((state.r_n - (case.exact_r)(t1)).abs() < 1e-15);
    }

    #[test]
    fn single_step_matches_exact_solution_locally() {
        let params = ModelParams::default();
        let case = mms::example1(params, true);
        let grid = TimeGrid::new(1.0, 1000).unwrap();
        let scheme = SpectralScheme::new(params, grid, 20).unwrap();
        let profile = case.initial_profile();
        let (state, _, _) = scheme
            .bootstrap(
                &profile,
                Some(case.solver_sources()),
                BootstrapMode::Exact(&case),
            )
            .unwrap();
        let (next, _) = scheme.advance(&state, Some(case.solver_sources())).unwrap();
        let t2 = grid.time(2);
        let mut worst = 0.0_f64;
        for (j, &x) in scheme.rule.nodes.iter().enumerate() {
            worst = worst.max((next.p_nodes_n[j] - (case.exact_p)(x, t2)).abs());
        }
        assert!(worst < 1e-5, "one-step error {worst}");
    }

    #[test]
    fn stride_thins_trajectory() {
        let params = degenerate_params();
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let scheme = SpectralScheme::new(params, grid, 4).unwrap();
        let (traj, _) = scheme
            .run(RunOptions {
                initial: &|_| 0.5,
                sources: None,
                bootstrap: BootstrapMode::BackwardEuler,
                stride: 10,
            })
            .unwrap();
        assert_eq!(traj.level_count(), 11);
        assert_eq!(traj.steps.first(), Some(&0));
        assert_eq!(traj.steps.last(), Some(&100));
    }

    #[test]
    fn collapse_is_terminal_with_partial_trajectory() {
        // a large manufactured negative velocity source drives the radius
        // through zero quickly
        let params = ModelParams::default();
        let grid = TimeGrid::new(1.0, 50).unwrap();
        let scheme = SpectralScheme::new(params, grid, 6).unwrap();
        let src_v = |_x: f64, _t: f64| -80.0;
        let src_p = |_x: f64, _t: f64| 0.0;
        let sources = Sources {
            parabolic: &src_p,
            velocity: &src_v,
        };
        let (traj, report) = scheme
            .run(RunOptions {
                initial: &|_| 1.0,
                sources: Some(sources),
                bootstrap: BootstrapMode::BackwardEuler,
                stride: 1,
            })
            .unwrap();
        match report.terminal {
            Some(TerminalReason::RadiusCollapse { step, radius }) => {
                assert!(radius <= 0.0);
                assert!(step <= 50);
                assert!(traj.level_count() < 51);
            }
            other => panic!("expected collapse, got {other:?}"),
        }
    }
}
