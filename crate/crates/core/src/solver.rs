//! Penalized partial-likelihood solver and the named fitting procedures.
//!
//! The solver minimizes `loss(design * theta) + lambda * sum_j w_j *
//! (alpha |theta_j| + (1 - alpha)/2 theta_j^2)` by proximal Newton steps:
//! cyclic coordinate descent on the exact second-order model of the loss,
//! with a line search on the true objective. The model Hessian is carried
//! in factored form (diagonal term minus event-average outer products), so
//! a coordinate update costs O(n + events) and the d x d matrix never
//! materializes. Convergence is certified against the exact gradient
//! through the elastic-net KKT conditions, so the model only shapes the
//! path taken, never the result.
//!
//! On top of the solver sit the procedures: lasso, elastic net, one-step
//! SCAD, and their factor-augmented versions where the design is replaced
//! by `[U | F]` with the factor block left unpenalized.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::cox::{
    newton_cox, newton_quadratic, partial_loglik_loss, score_space_quadratic, NewtonOptions,
};
use crate::data::FailureIndex;
use crate::error::{Error, Result};
use crate::factor::{decompose, estimate_num_factors_act, FactorDecomposition};

/// SCAD concavity parameter used by the one-step refits.
pub const SCAD_A: f64 = 3.7;

/// Elastic-net mixing used by the `enet` procedure.
pub const ELASTIC_NET_ALPHA: f64 = 0.9;

/// Weighted elastic-net penalty
/// `lambda * sum_j w_j (alpha |t_j| + (1 - alpha)/2 t_j^2)`.
/// A zero weight exempts a coordinate entirely.
#[derive(Debug, Clone)]
pub struct PenaltySpec {
    pub lambda: f64,
    pub alpha: f64,
    pub weights: Array1<f64>,
}

impl PenaltySpec {
    pub fn uniform(lambda: f64, alpha: f64, d: usize) -> Self {
        Self {
            lambda,
            alpha,
            weights: Array1::ones(d),
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::InvalidInput(format!(
                "lambda must be finite and nonnegative, got {}",
                self.lambda
            )));
        }
        if !self.alpha.is_finite() || self.alpha <= 0.0 || self.alpha > 1.0 {
            return Err(Error::InvalidInput(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if self.weights.len() != d {
            return Err(Error::InvalidInput(format!(
                "{} penalty weights for {} coordinates",
                self.weights.len(),
                d
            )));
        }
        for (j, &w) in self.weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "penalty weight {w} at coordinate {j} must be finite and nonnegative"
                )));
            }
        }
        Ok(())
    }

    pub fn value(&self, theta: ArrayView1<f64>) -> f64 {
        let mut acc = 0.0;
        for (j, &t) in theta.iter().enumerate() {
            let w = self.weights[j];
            if w > 0.0 {
                acc += w * (self.alpha * t.abs() + 0.5 * (1.0 - self.alpha) * t * t);
            }
        }
        self.lambda * acc
    }

    /// Largest violation of the stationarity conditions at `theta` given the
    /// exact gradient of the smooth part. Zero at an exact optimum.
    pub fn kkt_violation(&self, gradient: ArrayView1<f64>, theta: ArrayView1<f64>) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..theta.len() {
            let g = gradient[j];
            let w = self.weights[j];
            let v = if w > 0.0 {
                let t = theta[j];
                if t != 0.0 {
                    (g + self.lambda * w * (self.alpha * t.signum() + (1.0 - self.alpha) * t))
                        .abs()
                } else {
                    (g.abs() - self.lambda * self.alpha * w).max(0.0)
                }
            } else {
                g.abs()
            };
            worst = worst.max(v);
        }
        worst
    }
}

/// Penalized fit with its optimality certificate. `converged` fits satisfy
/// the KKT criterion; a fit that ran out of budget is returned as the best
/// point reached so far with `converged = false` (the objective still never
/// increased along the way, so the point is usable where only the attained
/// loss matters, e.g. cross-validation scoring).
#[derive(Debug, Clone)]
pub struct FitResult {
    pub theta: Array1<f64>,
    /// Averaged negative log partial likelihood at `theta`.
    pub loss: f64,
    /// Loss plus penalty.
    pub objective: f64,
    /// Exact-gradient KKT violation at `theta`.
    pub kkt_violation: f64,
    /// Tolerance the violation was certified against.
    pub kkt_tol: f64,
    pub converged: bool,
    pub n_outer: usize,
    pub n_sweeps: usize,
    /// Objective value at the start of each outer iteration.
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Total budget across all outer iterations, counted in full-sweep cost
    /// equivalents (a dense-phase pass over `a` active coordinates charges
    /// `a^2 / (d (n + events))` of a sweep). Exhausting it yields a result
    /// flagged `converged = false`, not an error.
    pub max_sweeps: usize,
    pub max_outer: usize,
    /// KKT tolerance is `kkt_tol_factor * max(1, ||grad loss(0)||_inf)`.
    pub kkt_tol_factor: f64,
    /// A sweep converges when its largest update is below
    /// `coord_tol_factor * (1 + ||theta||_inf)`.
    pub coord_tol_factor: f64,
    pub max_backtracks: usize,
    /// Reuse of `max(1, ||grad loss(0)||_inf)` across warm-started fits on
    /// the same data; computed when absent.
    pub grad0_scale: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_sweeps: 10_000,
            max_outer: 1_000,
            kkt_tol_factor: 1e-6,
            coord_tol_factor: 1e-7,
            max_backtracks: 30,
            grad0_scale: None,
        }
    }
}

/// Once a subproblem has cost this many factored active-set sweeps, the
/// solver builds the dense restricted Hessian and finishes there.
const DENSE_PHASE_TRIGGER: usize = 8;

/// Largest active set the dense phase will materialize (bytes: 8 cap^2).
const DENSE_PHASE_CAP: usize = 600;

/// Soft threshold with an exact-zero snap: inputs within a relative hair of
/// the threshold map to zero, so boundary cases (lambda exactly at the
/// largest gradient) produce exact zeros instead of 1e-16 dust.
fn soft_threshold(z: f64, t: f64) -> f64 {
    if z.abs() <= t * (1.0 + 1e-12) {
        0.0
    } else if z > 0.0 {
        z - t
    } else {
        z + t
    }
}

/// Reusable solver state for one design (rows fixed): row- and column-major
/// copies of the design plus the gradient scale at zero. The row-major copy
/// feeds the per-outer risk-set passes, the transposed one gives each
/// coordinate update a contiguous column.
pub struct CdProblem<'a> {
    x: Array2<f64>,
    xt: Array2<f64>,
    index: &'a FailureIndex,
    grad0_scale: f64,
}

impl<'a> CdProblem<'a> {
    pub fn new(design: ArrayView2<f64>, index: &'a FailureIndex) -> Result<Self> {
        let n = index.n();
        if design.nrows() != n {
            return Err(Error::InvalidInput(format!(
                "design has {} rows for {} observations",
                design.nrows(),
                n
            )));
        }
        for (i, &v) in design.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    what: "design entry",
                    index: i,
                });
            }
        }
        let x = design.as_standard_layout().into_owned();
        // Standard layout so each xt row (a design column) is a contiguous
        // slice; a plain transpose-and-own would keep the flipped strides.
        let xt = design.t().as_standard_layout().into_owned();
        let quad0 = score_space_quadratic(Array1::zeros(n).view(), index)?;
        let grad0 = xt.dot(&quad0.eta_gradient);
        let grad0_scale = grad0.iter().fold(0.0f64, |a, &g| a.max(g.abs())).max(1.0);
        Ok(Self {
            x,
            xt,
            index,
            grad0_scale,
        })
    }

    fn d(&self) -> usize {
        self.xt.nrows()
    }

    fn n(&self) -> usize {
        self.xt.ncols()
    }

    fn eta(&self, theta: &Array1<f64>) -> Array1<f64> {
        // design * theta = (theta^T * xt)^T
        self.xt.t().dot(theta)
    }

    pub(crate) fn grad0_scale(&self) -> f64 {
        self.grad0_scale
    }

    /// View of the design rows this problem was built on (n x d).
    pub fn design_view(&self) -> ArrayView2<'_, f64> {
        self.xt.t()
    }

    /// One cyclic pass over `coords` of the exact quadratic model; returns
    /// the largest absolute update. `wr` carries minus the model gradient's
    /// diagonal part (so `dot` below is its inner product with the column),
    /// `v` the event-space image E^T (theta - theta0) of the step so far,
    /// and `heff` the per-coordinate curvature.
    #[allow(clippy::too_many_arguments)]
    fn sweep(
        &self,
        coords: &[usize],
        theta: &mut Array1<f64>,
        wr: &mut Array1<f64>,
        v: &mut Array1<f64>,
        major: &Array1<f64>,
        et: &Array2<f64>,
        heff: &Array1<f64>,
        penalty: &PenaltySpec,
    ) -> f64 {
        let n = self.n();
        let m = v.len();
        let mut max_update = 0.0f64;
        let wr_s = wr.as_slice_mut().expect("contiguous wr");
        let v_s = v.as_slice_mut().expect("contiguous v");
        let w_s = major.as_slice().expect("contiguous majorizer");
        for &j in coords {
            let h = heff[j];
            if h <= 0.0 {
                continue;
            }
            let xj = self.xt.row(j);
            let xj_s = xj.to_slice().expect("contiguous design row");
            let ej = et.row(j);
            let ej_s = ej.to_slice().expect("contiguous event row");
            let mut dot = 0.0f64;
            for i in 0..n {
                dot += wr_s[i] * xj_s[i];
            }
            // The event-coupling part of the model gradient enters with the
            // opposite sign: H = X^T diag(major) X - E E^T.
            let mut av = 0.0f64;
            for f in 0..m {
                av += ej_s[f] * v_s[f];
            }
            let pw = penalty.weights[j];
            let old = theta[j];
            let z = dot + av + old * h;
            let new = if pw > 0.0 {
                let denom = h + penalty.lambda * (1.0 - penalty.alpha) * pw;
                soft_threshold(z, penalty.lambda * penalty.alpha * pw) / denom
            } else {
                z / h
            };
            let delta = new - old;
            if delta != 0.0 {
                theta[j] = new;
                for i in 0..n {
                    wr_s[i] -= delta * w_s[i] * xj_s[i];
                }
                for f in 0..m {
                    v_s[f] += delta * ej_s[f];
                }
                max_update = max_update.max(delta.abs());
            }
        }
        max_update
    }

    /// Finishes one subproblem on a fixed coordinate set against a dense
    /// copy of the model Hessian restricted to it, so a coordinate visit
    /// costs O(|active|) instead of O(n + events). The factored state
    /// (`wr`, `v`) is resynchronized with the net movement afterwards.
    /// Returns the number of dense sweeps taken.
    #[allow(clippy::too_many_arguments)]
    fn dense_active_phase(
        &self,
        active: &[usize],
        theta: &mut Array1<f64>,
        wr: &mut Array1<f64>,
        v: &mut Array1<f64>,
        major: &Array1<f64>,
        et: &Array2<f64>,
        heff: &Array1<f64>,
        penalty: &PenaltySpec,
        options: &FitOptions,
    ) -> usize {
        let n = self.n();
        let a_len = active.len();
        // Gather sqrt(major)-scaled active columns and active event rows,
        // then H_AA = Xs^T Xs - Ea Ea^T.
        let mut xs = Array2::<f64>::zeros((n, a_len));
        let sm: Vec<f64> = major.iter().map(|&w| w.sqrt()).collect();
        for i in 0..n {
            let row = self.x.row(i);
            let row_s = row.to_slice().expect("contiguous design row");
            let out = xs.row_mut(i);
            let out_s = out.into_slice().expect("contiguous gather row");
            let s = sm[i];
            for (idx, &j) in active.iter().enumerate() {
                out_s[idx] = s * row_s[j];
            }
        }
        let mut ea = Array2::<f64>::zeros((a_len, et.ncols()));
        for (idx, &j) in active.iter().enumerate() {
            ea.row_mut(idx).assign(&et.row(j));
        }
        let mut ha = xs.t().dot(&xs);
        ha -= &ea.dot(&ea.t());

        // Model gradient on the active set from the factored state.
        let mut ga = Array1::<f64>::zeros(a_len);
        {
            let wr_s = wr.as_slice().expect("contiguous wr");
            let v_s = v.as_slice().expect("contiguous v");
            for (idx, &j) in active.iter().enumerate() {
                let xj = self.xt.row(j);
                let xj_s = xj.to_slice().expect("contiguous design row");
                let mut dot = 0.0f64;
                for (i, &x) in xj_s.iter().enumerate() {
                    dot += wr_s[i] * x;
                }
                let ej = et.row(j);
                let ej_s = ej.to_slice().expect("contiguous event row");
                let mut av = 0.0f64;
                for (f, &e) in ej_s.iter().enumerate() {
                    av += e * v_s[f];
                }
                ga[idx] = -(dot + av);
            }
        }

        let entered: Vec<f64> = active.iter().map(|&j| theta[j]).collect();
        let mut cur = entered.clone();
        let rest_max = theta.iter().fold(0.0f64, |a, &t| a.max(t.abs()));
        // Flop-bounded sweep budget: dense sweeps are cheap, so the cap can
        // be generous without letting a degenerate subproblem run away.
        let sweep_cap = (400_000_000 / (a_len * a_len + 1)).clamp(200, 200_000);
        let mut sweeps = 0usize;
        let ga_s = ga.as_slice_mut().expect("contiguous ga");
        while sweeps < sweep_cap {
            let mut max_update = 0.0f64;
            for idx in 0..a_len {
                let j = active[idx];
                let h = heff[j];
                if h <= 0.0 {
                    continue;
                }
                let old = cur[idx];
                let z = h * old - ga_s[idx];
                let pw = penalty.weights[j];
                let new = if pw > 0.0 {
                    let denom = h + penalty.lambda * (1.0 - penalty.alpha) * pw;
                    soft_threshold(z, penalty.lambda * penalty.alpha * pw) / denom
                } else {
                    z / h
                };
                let delta = new - old;
                if delta != 0.0 {
                    cur[idx] = new;
                    let ha_row = ha.row(idx);
                    let ha_s = ha_row.to_slice().expect("contiguous hessian row");
                    for (b, &hv) in ha_s.iter().enumerate() {
                        ga_s[b] += delta * hv;
                    }
                    max_update = max_update.max(delta.abs());
                }
            }
            sweeps += 1;
            let scale = cur.iter().fold(rest_max, |a, &t| a.max(t.abs()));
            if max_update <= options.coord_tol_factor * (1.0 + scale) {
                break;
            }
        }

        // Write back and bring wr and v up to date with the net movement.
        let mut delta = Array1::<f64>::zeros(a_len);
        let mut moved = false;
        for idx in 0..a_len {
            let d = cur[idx] - entered[idx];
            if d != 0.0 {
                moved = true;
            }
            delta[idx] = d;
            theta[active[idx]] = cur[idx];
        }
        if moved {
            let du = xs.dot(&delta);
            {
                let wr_s = wr.as_slice_mut().expect("contiguous wr");
                let du_s = du.as_slice().expect("contiguous du");
                for i in 0..n {
                    wr_s[i] -= sm[i] * du_s[i];
                }
            }
            for idx in 0..a_len {
                if delta[idx] != 0.0 {
                    v.scaled_add(delta[idx], &ea.row(idx));
                }
            }
        }
        sweeps
    }

    pub fn fit(
        &self,
        penalty: &PenaltySpec,
        init: Option<ArrayView1<f64>>,
        options: &FitOptions,
    ) -> Result<FitResult> {
        let d = self.d();
        let n = self.n();
        penalty.validate(d)?;
        let mut theta: Array1<f64> = match init {
            Some(t) => {
                if t.len() != d {
                    return Err(Error::InvalidInput(format!(
                        "init length {} does not match design width {d}",
                        t.len()
                    )));
                }
                t.to_owned()
            }
            None => Array1::zeros(d),
        };
        let grad0_scale = options.grad0_scale.unwrap_or(self.grad0_scale);
        let kkt_tol = options.kkt_tol_factor * grad0_scale;

        let mut eta = self.eta(&theta);
        let mut trace = Vec::new();
        let mut n_sweeps = 0usize;
        let mut increases = 0usize;
        let mut last_sweep_update = f64::INFINITY;
        let mut converged_at: Option<(f64, f64, f64, usize)> = None;
        let mut outers_run = 0usize;
        let mut out_of_budget = false;

        for outer in 0..options.max_outer {
            outers_run = outer + 1;
            let quad = newton_quadratic(self.x.view(), eta.view(), self.index)?;
            let gradient = self.xt.dot(&quad.eta_gradient);
            let obj = quad.loss + penalty.value(theta.view());
            trace.push(obj);
            let kkt = penalty.kkt_violation(gradient.view(), theta.view());
            let coord_tol = options.coord_tol_factor
                * (1.0 + theta.iter().fold(0.0f64, |a, &t| a.max(t.abs())));
            if kkt <= kkt_tol && last_sweep_update <= coord_tol {
                converged_at = Some((quad.loss, obj, kkt, outer));
                break;
            }

            // Exact second-order model at the current point. The linear part
            // rides in wr_i = -grad_i - major_i * u_i and the event coupling
            // in v = E^T (theta - theta0); both start at the current point,
            // so the model gradient matches the exact one there. Coordinate
            // curvature falls back to the diagonal majorizer term when the
            // split cancels to roundoff, which keeps steps bounded where the
            // exact curvature is degenerate.
            let major = quad.eta_majorizer;
            let et = quad.event_averages;
            let m = et.ncols();
            let mut wr = quad.eta_gradient.mapv(|g| -g);
            let mut v = Array1::<f64>::zeros(m);
            let mut heff = Array1::<f64>::zeros(d);
            {
                let w_s = major.as_slice().expect("contiguous majorizer");
                for j in 0..d {
                    let xj = self.xt.row(j);
                    let xj_s = xj.to_slice().expect("contiguous design row");
                    let mut acc = 0.0;
                    for i in 0..n {
                        acc += w_s[i] * xj_s[i] * xj_s[i];
                    }
                    let ej = et.row(j);
                    let ej_s = ej.to_slice().expect("contiguous event row");
                    let mut e2 = 0.0;
                    for &e in ej_s {
                        e2 += e * e;
                    }
                    let h = acc - e2;
                    heff[j] = if h >= 1e-8 * acc { h } else { acc };
                }
            }

            let theta_before = theta.clone();
            let all: Vec<usize> = (0..d).collect();
            let mut inner_update;
            // Easy subproblems finish in a handful of factored active-set
            // sweeps; anything slower switches to the dense phase, whose
            // cost is charged in full-sweep equivalents so the budget still
            // measures work.
            let mut factored_active_sweeps = 0usize;
            let full_sweep_cost = d * (n + m) + 1;
            loop {
                // Full sweep, then drive the active set to convergence,
                // then confirm with another full sweep.
                inner_update =
                    self.sweep(&all, &mut theta, &mut wr, &mut v, &major, &et, &heff, penalty);
                n_sweeps += 1;
                if n_sweeps > options.max_sweeps {
                    out_of_budget = true;
                    break;
                }
                let coord_tol_inner = options.coord_tol_factor
                    * (1.0 + theta.iter().fold(0.0f64, |a, &t| a.max(t.abs())));
                if inner_update <= coord_tol_inner {
                    break;
                }
                let active: Vec<usize> = (0..d)
                    .filter(|&j| theta[j] != 0.0 || penalty.weights[j] == 0.0)
                    .collect();
                loop {
                    if factored_active_sweeps >= DENSE_PHASE_TRIGGER
                        && active.len() <= DENSE_PHASE_CAP
                    {
                        let dense = self.dense_active_phase(
                            &active, &mut theta, &mut wr, &mut v, &major, &et, &heff, penalty,
                            options,
                        );
                        let equiv = (dense * active.len() * active.len()) / full_sweep_cost;
                        n_sweeps += equiv.max(1);
                        if n_sweeps > options.max_sweeps {
                            out_of_budget = true;
                        }
                        break;
                    }
                    let upd = self.sweep(
                        &active,
                        &mut theta,
                        &mut wr,
                        &mut v,
                        &major,
                        &et,
                        &heff,
                        penalty,
                    );
                    n_sweeps += 1;
                    factored_active_sweeps += 1;
                    if n_sweeps > options.max_sweeps {
                        out_of_budget = true;
                        break;
                    }
                    let tol = options.coord_tol_factor
                        * (1.0 + theta.iter().fold(0.0f64, |a, &t| a.max(t.abs())));
                    if upd <= tol {
                        break;
                    }
                }
                if out_of_budget {
                    break;
                }
            }
            last_sweep_update = inner_update;

            // Accept the inner solution only if the true objective does not
            // increase; otherwise shrink the step toward the previous point.
            let mut accepted = false;
            let mut t_step = 1.0f64;
            for _ in 0..=options.max_backtracks {
                let cand: Array1<f64> = if t_step == 1.0 {
                    theta.clone()
                } else {
                    &theta_before + &((&theta - &theta_before) * t_step)
                };
                let cand_eta = self.eta(&cand);
                let cand_loss = partial_loglik_loss(cand_eta.view(), self.index)?;
                let cand_obj = cand_loss + penalty.value(cand.view());
                if cand_obj.is_finite() && cand_obj <= obj + 1e-10 {
                    theta = cand;
                    eta = cand_eta;
                    accepted = true;
                    break;
                }
                t_step *= 0.5;
            }
            if !accepted {
                theta = theta_before;
                eta = self.eta(&theta);
                increases += 1;
                last_sweep_update = 0.0;
                if increases >= 3 {
                    let tail: Vec<f64> = trace.iter().rev().take(5).rev().copied().collect();
                    return Err(Error::Diverged {
                        count: increases,
                        tail,
                    });
                }
            } else {
                increases = 0;
            }
            if out_of_budget {
                break;
            }
        }

        match converged_at {
            Some((loss, objective, kkt, n_outer)) => Ok(FitResult {
                theta,
                loss,
                objective,
                kkt_violation: kkt,
                kkt_tol,
                converged: true,
                n_outer,
                n_sweeps,
                objective_trace: trace,
            }),
            None => {
                // Sweep or outer budget exhausted: hand back the current
                // point, flagged. The certificate fields still report the
                // exact gradient so callers can see how far off it stopped.
                let quad = score_space_quadratic(eta.view(), self.index)?;
                let gradient = self.xt.dot(&quad.eta_gradient);
                let kkt = penalty.kkt_violation(gradient.view(), theta.view());
                let objective = quad.loss + penalty.value(theta.view());
                trace.push(objective);
                Ok(FitResult {
                    theta,
                    loss: quad.loss,
                    objective,
                    kkt_violation: kkt,
                    kkt_tol,
                    converged: false,
                    n_outer: outers_run,
                    n_sweeps,
                    objective_trace: trace,
                })
            }
        }
    }
}

/// Minimizes the penalized averaged negative log partial likelihood by
/// coordinate descent. A result with `converged = true` certifies that the
/// exact-gradient KKT violation is below
/// `kkt_tol_factor * max(1, ||grad loss(0)||_inf)` and the last sweep moved
/// no coordinate by more than `coord_tol_factor * (1 + ||theta||_inf)`.
/// Exhausting the iteration budget returns the point reached so far with
/// `converged = false`; only divergence and invalid inputs are errors.
pub fn fit_weighted_enet_cox(
    design: ArrayView2<f64>,
    index: &FailureIndex,
    penalty: &PenaltySpec,
    init: Option<ArrayView1<f64>>,
    options: &FitOptions,
) -> Result<FitResult> {
    let problem = CdProblem::new(design, index)?;
    problem.fit(penalty, init, options)
}

/// Derivative of the SCAD penalty at `beta_abs >= 0`:
/// `lambda` on `[0, lambda]`, then a linear decay to zero at `a * lambda`.
pub fn scad_weight(beta_abs: f64, lambda: f64, a: f64) -> f64 {
    debug_assert!(a > 2.0, "SCAD needs a > 2");
    debug_assert!(beta_abs >= 0.0 && lambda >= 0.0);
    if beta_abs <= lambda {
        lambda
    } else {
        (a * lambda - beta_abs).max(0.0) / (a - 1.0)
    }
}

/// The named fitting procedures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// l1 penalty on the raw covariates.
    Lasso,
    /// Elastic net (alpha = 0.9) on the raw covariates.
    Enet,
    /// One-step SCAD: lasso initializer, then a weighted l1 refit.
    Scad,
    /// l1 penalty on the factor-augmented design, factors unpenalized.
    FarmhazardL,
    /// One-step SCAD on the factor-augmented design.
    FarmhazardS,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Lasso,
        Method::Enet,
        Method::Scad,
        Method::FarmhazardL,
        Method::FarmhazardS,
    ];

    pub fn alpha(self) -> f64 {
        match self {
            Method::Enet => ELASTIC_NET_ALPHA,
            _ => 1.0,
        }
    }

    pub fn is_factor_augmented(self) -> bool {
        matches!(self, Method::FarmhazardL | Method::FarmhazardS)
    }

    /// Whether the method is a one-step concave refit of a base procedure.
    pub fn concave_base(self) -> Option<Method> {
        match self {
            Method::Scad => Some(Method::Lasso),
            Method::FarmhazardS => Some(Method::FarmhazardL),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Lasso => "lasso",
            Method::Enet => "enet",
            Method::Scad => "scad",
            Method::FarmhazardL => "farmhazard-l",
            Method::FarmhazardS => "farmhazard-s",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lasso" => Ok(Method::Lasso),
            "enet" => Ok(Method::Enet),
            "scad" => Ok(Method::Scad),
            "farmhazard-l" => Ok(Method::FarmhazardL),
            "farmhazard-s" => Ok(Method::FarmhazardS),
            other => Err(Error::InvalidInput(format!(
                "unknown method {other:?}; expected one of lasso, enet, scad, farmhazard-l, farmhazard-s"
            ))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A design matrix readied for penalized fitting: penalized columns scaled
/// to unit standard deviation, an optional unpenalized factor block at the
/// end, and the bookkeeping to map coefficients back to the caller's scale.
#[derive(Debug, Clone)]
pub struct PreparedDesign {
    pub design: Array2<f64>,
    /// Divisor applied to each column (1.0 for factor and constant columns).
    pub scales: Array1<f64>,
    /// 1.0 for penalized coordinates, 0.0 for the factor block.
    pub penalty_weights: Array1<f64>,
    /// Number of penalized (original covariate) coordinates; they come first.
    pub n_penalized: usize,
    pub k: usize,
    pub decomposition: Option<FactorDecomposition>,
}

impl PreparedDesign {
    /// Total width of the prepared design.
    pub fn width(&self) -> usize {
        self.design.ncols()
    }

    /// Builds the prepared design for a method family. `augmented` adds the
    /// factor split with `k` factors (estimated from the correlation
    /// spectrum when `None`); `k = 0` degenerates to the raw design.
    pub fn build(x: ArrayView2<f64>, augmented: bool, k: Option<usize>) -> Result<Self> {
        let n = x.nrows();
        let p = x.ncols();
        if n < 2 || p == 0 {
            return Err(Error::InvalidInput(format!(
                "cannot prepare an {n}x{p} design"
            )));
        }
        let k_used = if augmented {
            let k_req = match k {
                Some(k) => k,
                None => estimate_num_factors_act(x)?,
            };
            // The decomposition needs k within the centered rank.
            k_req.min((n - 1).min(p).saturating_sub(1))
        } else {
            0
        };
        let (mut design, decomposition) = if k_used > 0 {
            let dec = decompose(x, k_used)?;
            (dec.augmented_design(), Some(dec))
        } else {
            (x.to_owned(), None)
        };
        let d = design.ncols();
        let mut scales = Array1::ones(d);
        let nm1 = (n - 1) as f64;
        for j in 0..p {
            let col = design.column(j);
            let mean = col.sum() / n as f64;
            let ss: f64 = col.iter().map(|&v| (v - mean) * (v - mean)).sum();
            let sd = (ss / nm1).sqrt();
            if sd > 1e-12 * (1.0 + mean.abs()) {
                scales[j] = sd;
            }
        }
        for j in 0..p {
            if scales[j] != 1.0 {
                let s = scales[j];
                design.column_mut(j).mapv_inplace(|v| v / s);
            }
        }
        let mut penalty_weights = Array1::zeros(d);
        for j in 0..p {
            penalty_weights[j] = 1.0;
        }
        Ok(Self {
            design,
            scales,
            penalty_weights,
            n_penalized: p,
            k: k_used,
            decomposition,
        })
    }

    /// Rows of the prepared design restricted to `rows`, sharing scales and
    /// penalty layout. Used by cross-validation folds.
    pub fn subset_rows(&self, rows: &[usize]) -> Array2<f64> {
        self.design.select(Axis(0), rows)
    }

    /// Coefficients in the caller's column scale from solver-space `theta`.
    pub fn unscale(&self, theta: ArrayView1<f64>) -> (Array1<f64>, Array1<f64>) {
        let p = self.n_penalized;
        let mut beta = Array1::zeros(p);
        for j in 0..p {
            beta[j] = theta[j] / self.scales[j];
        }
        let gamma = theta.slice(ndarray::s![p..]).to_owned();
        (beta, gamma)
    }

    /// Unpenalized-only starting point: zero on the penalized block, the
    /// factor block fit by Newton. This is the natural start of every
    /// lambda path and makes `lambda >= lambda_max` produce exact zeros.
    pub fn unpenalized_init(&self, index: &FailureIndex) -> Result<Array1<f64>> {
        self.unpenalized_init_on(self.design.view(), index)
    }

    /// Same starting point computed on an arbitrary row subset of this
    /// design (the rows must match `index`).
    pub fn unpenalized_init_on(
        &self,
        design_rows: ArrayView2<f64>,
        index: &FailureIndex,
    ) -> Result<Array1<f64>> {
        let d = self.width();
        let mut theta = Array1::zeros(d);
        if self.k > 0 {
            let p = self.n_penalized;
            let factor_block = design_rows.slice(ndarray::s![.., p..]).to_owned();
            let gamma = newton_cox(
                factor_block.view(),
                index,
                None,
                NewtonOptions::default(),
            )?;
            for (c, &g) in gamma.iter().enumerate() {
                theta[p + c] = g;
            }
        }
        Ok(theta)
    }
}

/// A fitted procedure with coefficients mapped back to the caller's scale.
#[derive(Debug, Clone)]
pub struct ProcedureFit {
    pub method: Method,
    /// Penalty level in the solver's standardized column space.
    pub lambda: f64,
    /// Number of factors in the augmented design (0 for raw methods).
    pub k: usize,
    /// Covariate coefficients, caller scale, length p.
    pub beta: Array1<f64>,
    /// Factor coefficients, length k.
    pub gamma: Array1<f64>,
    /// Indices with nonzero beta, ascending.
    pub support: Vec<usize>,
    /// Fitted linear predictor over the training rows.
    pub linear_predictor: Array1<f64>,
    pub loss: f64,
    pub kkt_violation: f64,
    pub kkt_tol: f64,
    /// False when the solver ran out of budget; see [`FitResult::converged`].
    pub converged: bool,
    pub n_outer: usize,
    pub n_sweeps: usize,
}

/// Fits one procedure at a single penalty level. `k` controls the factor
/// split for the augmented methods (estimated when `None`, ignored by raw
/// methods). Lambda lives in the standardized column space, the same space
/// used by the lambda grids.
pub fn fit_procedure(
    method: Method,
    x: ArrayView2<f64>,
    index: &FailureIndex,
    k: Option<usize>,
    lambda: f64,
    options: &FitOptions,
) -> Result<ProcedureFit> {
    let prepared = PreparedDesign::build(x, method.is_factor_augmented(), k)?;
    let problem = CdProblem::new(prepared.design.view(), index)?;
    fit_prepared(method, &prepared, &problem, index, lambda, options)
}

/// Same as [`fit_procedure`] against an already prepared design and solver
/// state; used by the tuning and simulation layers to amortize setup.
pub fn fit_prepared(
    method: Method,
    prepared: &PreparedDesign,
    problem: &CdProblem<'_>,
    index: &FailureIndex,
    lambda: f64,
    options: &FitOptions,
) -> Result<ProcedureFit> {
    let init = prepared.unpenalized_init_on(problem.design_view(), index)?;
    let fit = match method.concave_base() {
        None => {
            let penalty = PenaltySpec {
                lambda,
                alpha: method.alpha(),
                weights: prepared.penalty_weights.clone(),
            };
            problem.fit(&penalty, Some(init.view()), options)?
        }
        Some(base) => {
            let base_fit = fit_prepared(base, prepared, problem, index, lambda, options)?;
            let base_theta = rescale_theta(prepared, &base_fit);
            let penalty = concave_penalty(prepared, base_theta.view(), lambda);
            problem.fit(&penalty, Some(base_theta.view()), options)?
        }
    };
    Ok(package_fit(method, prepared, problem, fit, lambda))
}

/// Solver-space theta of a packaged fit.
pub(crate) fn rescale_theta(prepared: &PreparedDesign, fit: &ProcedureFit) -> Array1<f64> {
    let p = prepared.n_penalized;
    let mut theta = Array1::zeros(prepared.width());
    for j in 0..p {
        theta[j] = fit.beta[j] * prepared.scales[j];
    }
    for c in 0..prepared.k {
        theta[p + c] = fit.gamma[c];
    }
    theta
}

/// One-step concave refit penalty: weighted l1 with weights given by the
/// SCAD derivative at the initializer, expressed as elastic-net weights.
pub(crate) fn concave_penalty(
    prepared: &PreparedDesign,
    init_theta: ArrayView1<f64>,
    lambda: f64,
) -> PenaltySpec {
    let d = prepared.width();
    let mut weights = Array1::zeros(d);
    for j in 0..prepared.n_penalized {
        weights[j] = if lambda > 0.0 {
            scad_weight(init_theta[j].abs(), lambda, SCAD_A) / lambda
        } else {
            0.0
        };
    }
    PenaltySpec {
        lambda,
        alpha: 1.0,
        weights,
    }
}

pub(crate) fn package_fit(
    method: Method,
    prepared: &PreparedDesign,
    problem: &CdProblem<'_>,
    fit: FitResult,
    lambda: f64,
) -> ProcedureFit {
    let (beta, gamma) = prepared.unscale(fit.theta.view());
    let support: Vec<usize> = beta
        .iter()
        .enumerate()
        .filter(|(_, &b)| b != 0.0)
        .map(|(j, _)| j)
        .collect();
    let linear_predictor = problem.eta(&fit.theta);
    ProcedureFit {
        method,
        lambda,
        k: prepared.k,
        beta,
        gamma,
        support,
        linear_predictor,
        loss: fit.loss,
        kkt_violation: fit.kkt_violation,
        kkt_tol: fit.kkt_tol,
        converged: fit.converged,
        n_outer: fit.n_outer,
        n_sweeps: fit.n_sweeps,
    }
}

/// Warm-started fits along a descending lambda sequence for one method.
/// For concave refits the base path is fit alongside, with the base
/// solution at each lambda serving as initializer and weight source.
/// Returns solver-space thetas aligned with a prefix of `lambdas`: the path
/// stops early once the active penalized set saturates (more nonzeros than
/// half the event count) or a fit exhausts its budget, because smaller
/// lambdas from there on only overfit toward quasi-separation. Callers
/// score missing path points as unusable.
pub(crate) fn fit_path(
    method: Method,
    prepared: &PreparedDesign,
    problem: &CdProblem<'_>,
    index: &FailureIndex,
    lambdas: &[f64],
    options: &FitOptions,
) -> Result<Vec<Array1<f64>>> {
    for pair in lambdas.windows(2) {
        if pair[1] > pair[0] {
            return Err(Error::InvalidInput(
                "lambda sequence must be nonincreasing".into(),
            ));
        }
    }
    let init0 = prepared.unpenalized_init_on(problem.design_view(), index)?;
    let mut options = *options;
    options.grad0_scale = Some(problem.grad0_scale());
    let sat_cap = (index.n_events() / 2).max(20);
    let saturated = |theta: &Array1<f64>| {
        theta
            .iter()
            .take(prepared.n_penalized)
            .filter(|&&t| t != 0.0)
            .count()
            > sat_cap
    };

    match method.concave_base() {
        None => {
            let mut out = Vec::with_capacity(lambdas.len());
            let mut warm = init0;
            for &lambda in lambdas {
                let penalty = PenaltySpec {
                    lambda,
                    alpha: method.alpha(),
                    weights: prepared.penalty_weights.clone(),
                };
                let fit = problem.fit(&penalty, Some(warm.view()), &options)?;
                warm = fit.theta.clone();
                let stop = !fit.converged || saturated(&fit.theta);
                out.push(fit.theta);
                if stop {
                    break;
                }
            }
            Ok(out)
        }
        Some(base) => {
            let base_path = fit_path(base, prepared, problem, index, lambdas, &options)?;
            let mut out = Vec::with_capacity(base_path.len());
            for (&lambda, base_theta) in lambdas.iter().zip(&base_path) {
                let penalty = concave_penalty(prepared, base_theta.view(), lambda);
                let fit = problem.fit(&penalty, Some(base_theta.view()), &options)?;
                let stop = !fit.converged || saturated(&fit.theta);
                out.push(fit.theta);
                if stop {
                    break;
                }
            }
            Ok(out)
        }
    }
}

/// Weighted-l1 path from a frozen concave initializer. Unlike the coupled
/// path in [`fit_path`], the initializer `base_theta` stays fixed while the
/// penalty level moves: at each lambda the weights are the SCAD derivative
/// at `base_theta` evaluated for that lambda. This is the one-step refit
/// family used when the base procedure has already been tuned on its own.
/// Same prefix-and-stop contract as [`fit_path`].
pub(crate) fn fit_refit_path(
    prepared: &PreparedDesign,
    problem: &CdProblem<'_>,
    index: &FailureIndex,
    base_theta: ArrayView1<f64>,
    lambdas: &[f64],
    options: &FitOptions,
) -> Result<Vec<Array1<f64>>> {
    for pair in lambdas.windows(2) {
        if pair[1] > pair[0] {
            return Err(Error::InvalidInput(
                "lambda sequence must be nonincreasing".into(),
            ));
        }
    }
    let mut options = *options;
    options.grad0_scale = Some(problem.grad0_scale());
    let sat_cap = (index.n_events() / 2).max(20);
    let mut out = Vec::with_capacity(lambdas.len());
    let mut warm = base_theta.to_owned();
    for &lambda in lambdas {
        let penalty = concave_penalty(prepared, base_theta, lambda);
        let fit = problem.fit(&penalty, Some(warm.view()), &options)?;
        warm = fit.theta.clone();
        let active = fit
            .theta
            .iter()
            .take(prepared.n_penalized)
            .filter(|&&t| t != 0.0)
            .count();
        let stop = !fit.converged || active > sat_cap;
        out.push(fit.theta);
        if stop {
            break;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cox::cox_derivatives;
    use crate::data::SurvivalDataset;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_instance(
        n: usize,
        d: usize,
        seed: u64,
    ) -> (Array2<f64>, SurvivalDataset, FailureIndex) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut rng));
        let unif = rand::distr::Uniform::new(0.1f64, 5.0).unwrap();
        let times: Vec<f64> = (0..n).map(|_| unif.sample(&mut rng)).collect();
        let events: Vec<bool> = (0..n).map(|i| i % 3 != 0).collect();
        let ds = SurvivalDataset::new(times, events, x.clone(), None).unwrap();
        let index = FailureIndex::build(&ds).unwrap();
        (x, ds, index)
    }

    #[test]
    fn scad_weight_pinned_values() {
        assert_abs_diff_eq!(scad_weight(0.0, 0.7, SCAD_A), 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(scad_weight(2.0, 1.0, SCAD_A), 1.7 / 2.7, epsilon = 1e-12);
        assert_abs_diff_eq!(scad_weight(10.0, 1.0, SCAD_A), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(scad_weight(3.7, 1.0, SCAD_A), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn lambda_above_max_gives_exact_zeros() {
        let (x, _, index) = random_instance(40, 6, 5);
        // lambda_max from the gradient at zero (no unpenalized block).
        let derivs = cox_derivatives(x.view(), Array1::zeros(6).view(), &index, false).unwrap();
        let lambda_max = derivs.gradient.iter().fold(0.0f64, |a, &g| a.max(g.abs()));
        for lambda in [lambda_max, lambda_max * 1.1] {
            let penalty = PenaltySpec::uniform(lambda, 1.0, 6);
            let fit = fit_weighted_enet_cox(
                x.view(),
                &index,
                &penalty,
                None,
                &FitOptions::default(),
            )
            .unwrap();
            assert!(
                fit.theta.iter().all(|&t| t == 0.0),
                "expected exact zeros at lambda {lambda}, got {:?}",
                fit.theta
            );
        }
    }

    #[test]
    fn kkt_certificate_holds_on_random_instances() {
        for seed in 0..5 {
            let (x, _, index) = random_instance(50, 8, 100 + seed);
            let derivs =
                cox_derivatives(x.view(), Array1::zeros(8).view(), &index, false).unwrap();
            let lambda_max = derivs.gradient.iter().fold(0.0f64, |a, &g| a.max(g.abs()));
            for frac in [0.5, 0.1, 0.02] {
                let penalty = PenaltySpec::uniform(lambda_max * frac, 1.0, 8);
                let fit = fit_weighted_enet_cox(
                    x.view(),
                    &index,
                    &penalty,
                    None,
                    &FitOptions::default(),
                )
                .unwrap();
                assert!(fit.converged);
                assert!(
                    fit.kkt_violation <= fit.kkt_tol,
                    "kkt {} vs tol {} at frac {frac} seed {seed}",
                    fit.kkt_violation,
                    fit.kkt_tol
                );
                // Independent recomputation of the certificate.
                let at_fit =
                    cox_derivatives(x.view(), fit.theta.view(), &index, false).unwrap();
                let recheck = penalty.kkt_violation(at_fit.gradient.view(), fit.theta.view());
                assert!(recheck <= fit.kkt_tol * 1.0000001);
            }
        }
    }

    #[test]
    fn unpenalized_fit_matches_newton() {
        let (x, _, index) = random_instance(60, 3, 42);
        let penalty = PenaltySpec::uniform(0.0, 1.0, 3);
        let mut options = FitOptions::default();
        options.kkt_tol_factor = 1e-10;
        let fit = fit_weighted_enet_cox(x.view(), &index, &penalty, None, &options).unwrap();
        let newton = newton_cox(x.view(), &index, None, NewtonOptions::default()).unwrap();
        for j in 0..3 {
            assert_abs_diff_eq!(fit.theta[j], newton[j], epsilon = 1e-6);
        }
    }

    #[test]
    fn objective_trace_is_monotone() {
        let (x, _, index) = random_instance(50, 10, 9);
        let penalty = PenaltySpec::uniform(0.05, 0.9, 10);
        let fit =
            fit_weighted_enet_cox(x.view(), &index, &penalty, None, &FitOptions::default())
                .unwrap();
        for pair in fit.objective_trace.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-10,
                "objective increased: {:?}",
                fit.objective_trace
            );
        }
    }

    #[test]
    fn warm_start_agrees_with_cold_start() {
        let (x, _, index) = random_instance(45, 7, 77);
        let penalty = PenaltySpec::uniform(0.03, 1.0, 7);
        let cold =
            fit_weighted_enet_cox(x.view(), &index, &penalty, None, &FitOptions::default())
                .unwrap();
        // Warm start from a coarser solution.
        let coarse = fit_weighted_enet_cox(
            x.view(),
            &index,
            &PenaltySpec::uniform(0.08, 1.0, 7),
            None,
            &FitOptions::default(),
        )
        .unwrap();
        let warm = fit_weighted_enet_cox(
            x.view(),
            &index,
            &penalty,
            Some(coarse.theta.view()),
            &FitOptions::default(),
        )
        .unwrap();
        for j in 0..7 {
            assert_abs_diff_eq!(cold.theta[j], warm.theta[j], epsilon = 5e-6);
        }
    }

    #[test]
    fn one_dimensional_fit_matches_grid_search() {
        let (x_full, _, index) = random_instance(35, 1, 13);
        let lambda = 0.04;
        let penalty = PenaltySpec::uniform(lambda, 1.0, 1);
        let fit = fit_weighted_enet_cox(
            x_full.view(),
            &index,
            &penalty,
            None,
            &FitOptions::default(),
        )
        .unwrap();
        // Dense grid search over theta.
        let mut best = (f64::INFINITY, 0.0);
        let mut t = -3.0;
        while t <= 3.0 {
            let theta = array![t];
            let loss = crate::cox::partial_loglik(x_full.view(), theta.view(), &index).unwrap();
            let obj = loss + lambda * t.abs();
            if obj < best.0 {
                best = (obj, t);
            }
            t += 1e-4;
        }
        assert_abs_diff_eq!(fit.theta[0], best.1, epsilon = 2e-4);
        assert!(fit.objective <= best.0 + 1e-9);
    }

    #[test]
    fn scad_with_zero_initializer_is_lasso() {
        let (x, _, index) = random_instance(40, 5, 21);
        let lambda = 0.08;
        // Weights from a zero initializer equal lambda, i.e. plain l1.
        let prepared = PreparedDesign::build(x.view(), false, None).unwrap();
        let problem = CdProblem::new(prepared.design.view(), &index).unwrap();
        let zeros = Array1::zeros(prepared.width());
        let penalty = concave_penalty(&prepared, zeros.view(), lambda);
        for j in 0..5 {
            assert_abs_diff_eq!(penalty.weights[j], 1.0, epsilon = 1e-15);
        }
        let lasso = fit_prepared(
            Method::Lasso,
            &prepared,
            &problem,
            &index,
            lambda,
            &FitOptions::default(),
        )
        .unwrap();
        let refit = problem
            .fit(&penalty, None, &FitOptions::default())
            .unwrap();
        let (beta_refit, _) = prepared.unscale(refit.theta.view());
        for j in 0..5 {
            assert_abs_diff_eq!(lasso.beta[j], beta_refit[j], epsilon = 1e-6);
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            let parsed: Method = m.name().parse().unwrap();
            assert_eq!(parsed, m);
        }
        assert!("newton".parse::<Method>().is_err());
    }
}
