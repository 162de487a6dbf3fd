//! Cox partial-likelihood loss, derivatives, and design diagnostics.
//!
//! Everything here works on a linear score vector `eta` and a
//! [`FailureIndex`]; the scale is the averaged negative log partial
//! likelihood with Breslow handling of ties. Sweeps run over sorted
//! positions so each risk set is a suffix, which gives O(n d) loss and
//! gradient and O(n d^2) Hessian evaluation. Every exponential is taken
//! relative to the running maximum of the current risk set, so scores of
//! any magnitude stay finite.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::data::FailureIndex;
use crate::error::{Error, Result};

/// Largest dimension for which a dense Hessian is materialized by default.
pub const DEFAULT_HESSIAN_CAP: usize = 2000;

/// Loss with optional first and second derivatives in coefficient space.
#[derive(Debug, Clone)]
pub struct CoxDerivatives {
    /// Averaged negative log partial likelihood; nonnegative.
    pub loss: f64,
    pub gradient: Array1<f64>,
    pub hessian: Option<Array2<f64>>,
}

/// Loss plus per-observation gradient and curvature of the loss in score
/// space, the ingredients of one quadratic (IRLS) approximation.
#[derive(Debug, Clone)]
pub struct ScoreSpaceQuadratic {
    pub loss: f64,
    /// d loss / d eta_i, in dataset row order.
    pub eta_gradient: Array1<f64>,
    /// Diagonal of d^2 loss / d eta^2, in dataset row order; nonnegative.
    pub eta_curvature: Array1<f64>,
}

fn check_scores(eta: ArrayView1<f64>, index: &FailureIndex) -> Result<()> {
    if eta.len() != index.n() {
        return Err(Error::InvalidInput(format!(
            "score length {} does not match index length {}",
            eta.len(),
            index.n()
        )));
    }
    for (i, &e) in eta.iter().enumerate() {
        if !e.is_finite() {
            return Err(Error::NonFinite {
                what: "linear score",
                index: i,
            });
        }
    }
    Ok(())
}

/// Per failure (in time order), the log of its risk-set denominator
/// `log sum_{i in R} exp(eta_i)` in absolute units.
fn failure_log_denoms(sorted_eta: &[f64], index: &FailureIndex) -> Vec<f64> {
    let n = index.n();
    let mut log_denoms = vec![0.0; index.failures.len()];
    let mut q = n;
    let mut shift = f64::NEG_INFINITY;
    let mut s0 = 0.0f64;
    for (f_idx, failure) in index.failures.iter().enumerate().rev() {
        while q > failure.risk_start {
            q -= 1;
            let e = sorted_eta[q];
            if e > shift {
                if s0 > 0.0 {
                    s0 *= (shift - e).exp();
                }
                shift = e;
            }
            s0 += (sorted_eta[q] - shift).exp();
        }
        log_denoms[f_idx] = shift + s0.ln();
    }
    log_denoms
}

/// Averaged negative log partial likelihood at the given scores.
pub fn partial_loglik_loss(eta: ArrayView1<f64>, index: &FailureIndex) -> Result<f64> {
    check_scores(eta, index)?;
    let sorted_eta: Vec<f64> = index.order.iter().map(|&i| eta[i]).collect();
    let log_denoms = failure_log_denoms(&sorted_eta, index);
    let mut q_sum = 0.0;
    for (failure, ld) in index.failures.iter().zip(&log_denoms) {
        q_sum += sorted_eta[failure.position] - ld;
    }
    Ok(-q_sum / index.n() as f64)
}

/// Loss together with the exact per-observation gradient and the diagonal
/// curvature of the loss in score space.
///
/// For observation i, with `pi_{if} = exp(eta_i) / denom_f` its relative
/// risk inside failure f's set, the gradient is `(sum_f pi_{if} - delta_i)/n`
/// and the curvature `(sum_f pi_{if} (1 - pi_{if}))/n >= 0`.
pub fn score_space_quadratic(
    eta: ArrayView1<f64>,
    index: &FailureIndex,
) -> Result<ScoreSpaceQuadratic> {
    check_scores(eta, index)?;
    let n = index.n();
    let n_f = n as f64;
    let sorted_eta: Vec<f64> = index.order.iter().map(|&i| eta[i]).collect();
    let log_denoms = failure_log_denoms(&sorted_eta, index);

    let mut q_sum = 0.0;
    for (failure, ld) in index.failures.iter().zip(&log_denoms) {
        q_sum += sorted_eta[failure.position] - ld;
    }
    let loss = -q_sum / n_f;

    let event_at = index.event_at_position();
    let mut grad = Array1::zeros(n);
    let mut curv = Array1::zeros(n);
    // Prefix sums over failures with risk_start <= q, kept in a scaled
    // representation: p1 = exp(-m) * p1s with m the smallest log-denominator
    // seen so far (denominators shrink over time, so m only decreases).
    // Every observation in those risk sets has eta <= m, which keeps all
    // exponents nonpositive regardless of the score magnitudes.
    let mut p1s = 0.0f64;
    let mut p2s = 0.0f64;
    let mut m = f64::INFINITY;
    let mut f_ptr = 0usize;
    for q in 0..n {
        while f_ptr < index.failures.len() && index.failures[f_ptr].risk_start <= q {
            let ld = log_denoms[f_ptr];
            if ld < m {
                if m.is_finite() {
                    let factor = (ld - m).exp();
                    p1s *= factor;
                    p2s *= factor * factor;
                }
                m = ld;
            }
            p1s += (m - ld).exp();
            p2s += (2.0 * (m - ld)).exp();
            f_ptr += 1;
        }
        let row = index.order[q];
        if f_ptr == 0 {
            // Censored before the first failure: outside every risk set.
            grad[row] = 0.0;
            curv[row] = 0.0;
            continue;
        }
        let rel = sorted_eta[q] - m;
        let mu = rel.exp() * p1s;
        let nu = (2.0 * rel).exp() * p2s;
        let delta = if event_at[q] { 1.0 } else { 0.0 };
        grad[row] = (mu - delta) / n_f;
        curv[row] = ((mu - nu).max(0.0)) / n_f;
    }
    Ok(ScoreSpaceQuadratic {
        loss,
        eta_gradient: grad,
        eta_curvature: curv,
    })
}

/// Ingredients of the exact second-order model of the loss at `eta`, in a
/// form a coordinate solver can consume without ever materializing the
/// d x d Hessian:
///
///   H = X^T diag(eta_majorizer) X - E E^T
///
/// where `eta_majorizer` carries `sum_f pi_{if} / n` and column f of the
/// d x m matrix E is the risk-weighted design average of failure f's risk
/// set, scaled by 1/sqrt(n). Both pieces are built in one ascending and one
/// descending pass with the running-max rescaling, so the split is safe for
/// arbitrary score magnitudes; every exponent in it is nonpositive.
#[derive(Debug, Clone)]
pub struct NewtonQuadratic {
    pub loss: f64,
    /// d loss / d eta_i, in dataset row order.
    pub eta_gradient: Array1<f64>,
    /// `sum_f pi_{if} / n`: the diagonal of the first Hessian term, an upper
    /// bound for the exact per-observation curvature.
    pub eta_majorizer: Array1<f64>,
    /// d x m, one column per failure in time order.
    pub event_averages: Array2<f64>,
}

pub fn newton_quadratic(
    design: ArrayView2<f64>,
    eta: ArrayView1<f64>,
    index: &FailureIndex,
) -> Result<NewtonQuadratic> {
    check_scores(eta, index)?;
    let n = index.n();
    let d = design.ncols();
    if design.nrows() != n {
        return Err(Error::InvalidInput(format!(
            "design has {} rows for {} observations",
            design.nrows(),
            n
        )));
    }
    let n_f = n as f64;
    let sorted_eta: Vec<f64> = index.order.iter().map(|&i| eta[i]).collect();
    let log_denoms = failure_log_denoms(&sorted_eta, index);

    let mut q_sum = 0.0;
    for (failure, ld) in index.failures.iter().zip(&log_denoms) {
        q_sum += sorted_eta[failure.position] - ld;
    }
    let loss = -q_sum / n_f;

    // Forward pass: mu_i = sum over containing risk sets of pi_{if}, via the
    // same scaled prefix sum the diagonal quadratic uses.
    let event_at = index.event_at_position();
    let mut grad = Array1::zeros(n);
    let mut major = Array1::zeros(n);
    let mut p1s = 0.0f64;
    let mut m_run = f64::INFINITY;
    let mut f_ptr = 0usize;
    for q in 0..n {
        while f_ptr < index.failures.len() && index.failures[f_ptr].risk_start <= q {
            let ld = log_denoms[f_ptr];
            if ld < m_run {
                if m_run.is_finite() {
                    p1s *= (ld - m_run).exp();
                }
                m_run = ld;
            }
            p1s += (m_run - ld).exp();
            f_ptr += 1;
        }
        let row = index.order[q];
        if f_ptr == 0 {
            continue;
        }
        let mu = (sorted_eta[q] - m_run).exp() * p1s;
        let delta = if event_at[q] { 1.0 } else { 0.0 };
        grad[row] = (mu - delta) / n_f;
        major[row] = mu / n_f;
    }

    // Backward pass: for each failure, the risk-weighted average of the
    // design rows in its set. The accumulator tracks sum exp(eta_q - shift)
    // x_q with shift the running score maximum, so its entries stay within
    // n * max |x|, and the per-column scale exp(shift - ld_f) is at most 1
    // because ld_f is a log-sum-exp over the same rows.
    let m_fail = index.failures.len();
    let mut averages = Array2::<f64>::zeros((d, m_fail));
    let inv_sqrt_n = 1.0 / n_f.sqrt();
    let mut acc = Array1::<f64>::zeros(d);
    let mut shift = f64::NEG_INFINITY;
    let mut q = n;
    for (f_idx, failure) in index.failures.iter().enumerate().rev() {
        while q > failure.risk_start {
            q -= 1;
            let e = sorted_eta[q];
            if e > shift {
                if shift.is_finite() {
                    let factor = (shift - e).exp();
                    acc.mapv_inplace(|v| v * factor);
                }
                shift = e;
            }
            let w = (sorted_eta[q] - shift).exp();
            acc.scaled_add(w, &design.row(index.order[q]));
        }
        let scale = (shift - log_denoms[f_idx]).exp() * inv_sqrt_n;
        for (j, &a) in acc.iter().enumerate() {
            averages[[j, f_idx]] = a * scale;
        }
    }

    Ok(NewtonQuadratic {
        loss,
        eta_gradient: grad,
        eta_majorizer: major,
        event_averages: averages,
    })
}

/// Loss, gradient, and optional Hessian of the averaged negative log
/// partial likelihood at scores `eta`, with covariate rows taken from
/// `design`. Separating scores from covariates lets diagnostics mix risk
/// weights from one linear predictor with sums over another design.
pub fn cox_derivatives_at_scores(
    design: ArrayView2<f64>,
    eta: ArrayView1<f64>,
    index: &FailureIndex,
    want_hessian: bool,
) -> Result<CoxDerivatives> {
    cox_derivatives_at_scores_capped(design, eta, index, want_hessian, DEFAULT_HESSIAN_CAP)
}

pub fn cox_derivatives_at_scores_capped(
    design: ArrayView2<f64>,
    eta: ArrayView1<f64>,
    index: &FailureIndex,
    want_hessian: bool,
    hessian_cap: usize,
) -> Result<CoxDerivatives> {
    check_scores(eta, index)?;
    let n = index.n();
    let d = design.ncols();
    if design.nrows() != n {
        return Err(Error::InvalidInput(format!(
            "design has {} rows for {} observations",
            design.nrows(),
            n
        )));
    }
    if want_hessian && d > hessian_cap {
        return Err(Error::HessianTooLarge { d, cap: hessian_cap });
    }

    let quad = score_space_quadratic(eta, index)?;
    let gradient = design.t().dot(&quad.eta_gradient);

    let hessian = if want_hessian {
        Some(hessian_at_scores(design, eta, index))
    } else {
        None
    };
    Ok(CoxDerivatives {
        loss: quad.loss,
        gradient,
        hessian,
    })
}

/// Dense Hessian via one descending sweep: for each failure, the weighted
/// covariance of the design over its risk set, averaged over observations.
fn hessian_at_scores(
    design: ArrayView2<f64>,
    eta: ArrayView1<f64>,
    index: &FailureIndex,
) -> Array2<f64> {
    let n = index.n();
    let d = design.ncols();
    let n_f = n as f64;
    let sorted_eta: Vec<f64> = index.order.iter().map(|&i| eta[i]).collect();

    let mut hessian = Array2::<f64>::zeros((d, d));
    let mut s0 = 0.0f64;
    let mut s1 = Array1::<f64>::zeros(d);
    let mut s2 = Array2::<f64>::zeros((d, d));
    let mut shift = f64::NEG_INFINITY;
    let mut q = n;
    let mut a1 = Array1::<f64>::zeros(d);
    for failure in index.failures.iter().rev() {
        while q > failure.risk_start {
            q -= 1;
            let e = sorted_eta[q];
            if e > shift {
                if s0 > 0.0 {
                    let factor = (shift - e).exp();
                    s0 *= factor;
                    s1.mapv_inplace(|v| v * factor);
                    s2.mapv_inplace(|v| v * factor);
                }
                shift = e;
            }
            let w = (sorted_eta[q] - shift).exp();
            let row = design.row(index.order[q]);
            for a in 0..d {
                let wa = w * row[a];
                s1[a] += wa;
                let s2_row = s2.row_mut(a);
                let s2_slice = s2_row.into_slice().expect("contiguous hessian row");
                for (b, &rb) in row.iter().enumerate() {
                    s2_slice[b] += wa * rb;
                }
            }
            s0 += w;
        }
        // V_f = S2/S0 - (S1/S0)(S1/S0)^T, accumulated into H / n.
        a1.assign(&s1);
        a1.mapv_inplace(|v| v / s0);
        let inv_s0 = 1.0 / s0;
        for a in 0..d {
            let ha = hessian.row_mut(a);
            let ha_slice = ha.into_slice().expect("contiguous hessian row");
            let s2_row = s2.row(a);
            let s2_slice = s2_row.to_slice().expect("contiguous hessian row");
            let a1a = a1[a];
            for b in 0..d {
                ha_slice[b] += s2_slice[b] * inv_s0 - a1a * a1[b];
            }
        }
    }
    hessian.mapv_inplace(|v| v / n_f);
    // Exact symmetry by construction up to rounding; enforce it.
    for a in 0..d {
        for b in (a + 1)..d {
            let avg = 0.5 * (hessian[[a, b]] + hessian[[b, a]]);
            hessian[[a, b]] = avg;
            hessian[[b, a]] = avg;
        }
    }
    hessian
}

/// Derivatives at coefficients `theta`, scores formed as `design * theta`.
pub fn cox_derivatives(
    design: ArrayView2<f64>,
    theta: ArrayView1<f64>,
    index: &FailureIndex,
    want_hessian: bool,
) -> Result<CoxDerivatives> {
    if theta.len() != design.ncols() {
        return Err(Error::InvalidInput(format!(
            "theta length {} does not match design width {}",
            theta.len(),
            design.ncols()
        )));
    }
    let eta = design.dot(&theta);
    cox_derivatives_at_scores(design, eta.view(), index, want_hessian)
}

/// Loss at coefficients `theta` on `design`.
pub fn partial_loglik(
    design: ArrayView2<f64>,
    theta: ArrayView1<f64>,
    index: &FailureIndex,
) -> Result<f64> {
    if theta.len() != design.ncols() {
        return Err(Error::InvalidInput(format!(
            "theta length {} does not match design width {}",
            theta.len(),
            design.ncols()
        )));
    }
    let eta = design.dot(&theta);
    partial_loglik_loss(eta.view(), index)
}

/// Sup-norm of the score evaluated with risk weights from the true linear
/// predictor `x * beta_star` but covariate sums over `w_design`. When the
/// augmented design reproduces the true predictor exactly, this is the
/// gradient norm at the augmented pseudo-true coefficients, the quantity
/// that controls support recovery.
pub fn score_at_truth(
    x: ArrayView2<f64>,
    beta_star: ArrayView1<f64>,
    w_design: ArrayView2<f64>,
    index: &FailureIndex,
) -> Result<f64> {
    if beta_star.len() != x.ncols() {
        return Err(Error::InvalidInput(format!(
            "beta length {} does not match covariate width {}",
            beta_star.len(),
            x.ncols()
        )));
    }
    let eta = x.dot(&beta_star);
    let derivs = cox_derivatives_at_scores(w_design, eta.view(), index, false)?;
    Ok(derivs
        .gradient
        .iter()
        .fold(0.0f64, |acc, &g| acc.max(g.abs())))
}

/// Irrepresentable-condition diagnostic: with H the Hessian at
/// `design * theta_star` and S the support set, the max row sum of
/// `|H_{S^c S} H_{S S}^{-1}|`. Values comfortably below 1 indicate that
/// inactive coordinates are weakly coupled to the active block.
pub fn irrepresentable_stat(
    design: ArrayView2<f64>,
    theta_star: ArrayView1<f64>,
    support: &[usize],
    index: &FailureIndex,
) -> Result<f64> {
    irrepresentable_stat_capped(design, theta_star, support, index, DEFAULT_HESSIAN_CAP)
}

pub fn irrepresentable_stat_capped(
    design: ArrayView2<f64>,
    theta_star: ArrayView1<f64>,
    support: &[usize],
    index: &FailureIndex,
    hessian_cap: usize,
) -> Result<f64> {
    let d = design.ncols();
    let mut in_support = vec![false; d];
    for &j in support {
        if j >= d {
            return Err(Error::InvalidInput(format!(
                "support index {j} out of range for width {d}"
            )));
        }
        if in_support[j] {
            return Err(Error::InvalidInput(format!(
                "support index {j} listed twice"
            )));
        }
        in_support[j] = true;
    }
    let complement: Vec<usize> = (0..d).filter(|&j| !in_support[j]).collect();
    if support.is_empty() || complement.is_empty() {
        return Ok(0.0);
    }
    let derivs =
        cox_derivatives_at_scores_capped(design, design.dot(&theta_star).view(), index, true, hessian_cap)?;
    let hessian = derivs.hessian.expect("hessian requested");

    let s = support.len();
    let m = complement.len();
    let mut h_ss = nalgebra::DMatrix::<f64>::zeros(s, s);
    for (a, &ja) in support.iter().enumerate() {
        for (b, &jb) in support.iter().enumerate() {
            h_ss[(a, b)] = hessian[[ja, jb]];
        }
    }
    // Guard the inversion with the reciprocal condition number of the
    // (positive semidefinite) support block.
    let eigvals = h_ss.clone().symmetric_eigenvalues();
    let max_ev = eigvals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min_ev = eigvals.iter().cloned().fold(f64::INFINITY, f64::min);
    const RCOND_LIMIT: f64 = 1e-12;
    let rcond = if max_ev > 0.0 { min_ev / max_ev } else { 0.0 };
    if !rcond.is_finite() || rcond < RCOND_LIMIT {
        return Err(Error::IllConditioned {
            rcond,
            limit: RCOND_LIMIT,
        });
    }

    // M = H_{S^c S} H_{SS}^{-1}; with symmetric H_SS solve H_SS Z = H_{S S^c}
    // and read M = Z^T.
    let mut rhs = nalgebra::DMatrix::<f64>::zeros(s, m);
    for (a, &ja) in support.iter().enumerate() {
        for (b, &jb) in complement.iter().enumerate() {
            rhs[(a, b)] = hessian[[ja, jb]];
        }
    }
    let chol = h_ss
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Eigen("support block is not positive definite".into()))?;
    let z = chol.solve(&rhs);
    let mut max_row_sum = 0.0f64;
    for b in 0..m {
        let mut row_sum = 0.0;
        for a in 0..s {
            row_sum += z[(a, b)].abs();
        }
        max_row_sum = max_row_sum.max(row_sum);
    }
    Ok(max_row_sum)
}

/// Options for the damped Newton solver on the unpenalized loss.
#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            grad_tol: 1e-8,
            max_halvings: 30,
        }
    }
}

/// Damped Newton on the unpenalized partial-likelihood loss. Meant for
/// small designs (factor blocks, marginal fits, reference MLEs); the full
/// Hessian is formed each iteration.
pub fn newton_cox(
    design: ArrayView2<f64>,
    index: &FailureIndex,
    init: Option<ArrayView1<f64>>,
    options: NewtonOptions,
) -> Result<Array1<f64>> {
    let d = design.ncols();
    let mut theta = match init {
        Some(t) => t.to_owned(),
        None => Array1::zeros(d),
    };
    if theta.len() != d {
        return Err(Error::InvalidInput(format!(
            "init length {} does not match design width {d}",
            theta.len()
        )));
    }
    if d == 0 {
        return Ok(theta);
    }
    let mut derivs = cox_derivatives(design, theta.view(), index, true)?;
    for _ in 0..options.max_iter {
        let grad_norm = derivs.gradient.iter().fold(0.0f64, |a, &g| a.max(g.abs()));
        if grad_norm < options.grad_tol {
            return Ok(theta);
        }
        let hessian = derivs.hessian.as_ref().expect("hessian requested");
        let h = nalgebra::DMatrix::from_fn(d, d, |a, b| hessian[[a, b]]);
        let g = nalgebra::DVector::from_fn(d, |a, _| derivs.gradient[a]);
        // Small ridge keeps a nearly flat direction from aborting the solve.
        let ridge = 1e-12 * (1.0 + h.diagonal().amax());
        let h_reg = h + nalgebra::DMatrix::identity(d, d) * ridge;
        let step = h_reg
            .cholesky()
            .map(|c| c.solve(&g))
            .ok_or_else(|| Error::NewtonFailed("singular hessian".into()))?;
        let mut t = 1.0f64;
        let mut accepted = false;
        for _ in 0..=options.max_halvings {
            let mut cand = theta.clone();
            for a in 0..d {
                cand[a] -= t * step[a];
            }
            match cox_derivatives(design, cand.view(), index, true) {
                Ok(cand_derivs) if cand_derivs.loss.is_finite() && cand_derivs.loss <= derivs.loss => {
                    theta = cand;
                    derivs = cand_derivs;
                    accepted = true;
                    break;
                }
                _ => t *= 0.5,
            }
        }
        if !accepted {
            return Err(Error::NewtonFailed(format!(
                "no descent after {} halvings (gradient norm {grad_norm:.3e})",
                options.max_halvings
            )));
        }
    }
    let grad_norm = derivs.gradient.iter().fold(0.0f64, |a, &g| a.max(g.abs()));
    if grad_norm < options.grad_tol {
        Ok(theta)
    } else {
        Err(Error::NewtonFailed(format!(
            "gradient norm {grad_norm:.3e} above tolerance {:.1e} after {} iterations",
            options.grad_tol, options.max_iter
        )))
    }
}
