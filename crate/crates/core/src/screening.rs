//! Factor-augmented marginal screening and the sure-independence baseline.
//!
//! For each covariate the augmented procedure fits an unpenalized Cox model
//! on the standardized idiosyncratic column together with the estimated
//! factors, then ranks covariates by the magnitude of the idiosyncratic
//! coefficient. With zero factors this collapses to plain univariate
//! screening, which is also exposed directly as the baseline.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

use crate::cox::{newton_cox, NewtonOptions};
use crate::data::{FailureIndex, SurvivalDataset};
use crate::error::{Error, Result};
use crate::factor::{decompose, estimate_num_factors_act};

/// How the ranked list is cut down to a selected set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selector {
    /// Keep the `d` largest magnitudes; ties broken by ascending index.
    TopD(usize),
    /// Keep every covariate with magnitude at least the threshold.
    Threshold(f64),
}

/// Ranked marginal-screening output.
#[derive(Debug, Clone)]
pub struct ScreeningResult {
    /// Number of factors in the augmented fits (0 for the baseline).
    pub k: usize,
    /// Magnitude of the marginal coefficient per covariate, standardized
    /// column scale. Failed fits carry 0.
    pub beta_marginal: Array1<f64>,
    /// Covariate indices, largest magnitude first; failed fits last,
    /// ties broken by ascending index.
    pub ranking: Vec<usize>,
    /// Selected indices, ascending.
    pub selected: Vec<usize>,
    /// Indices whose marginal fit did not converge.
    pub failed: Vec<usize>,
}

/// Unpenalized Cox fit of one standardized idiosyncratic column alongside
/// the factor block. Returns the column's coefficient and the factor
/// coefficients. `f_hat` may have zero columns, giving the univariate fit.
pub fn marginal_augmented_fit(
    u_col: ArrayView1<f64>,
    f_hat: ArrayView2<f64>,
    index: &FailureIndex,
) -> Result<(f64, Array1<f64>)> {
    marginal_fit_impl(u_col, f_hat, index, None)
}

fn marginal_fit_impl(
    u_col: ArrayView1<f64>,
    f_hat: ArrayView2<f64>,
    index: &FailureIndex,
    gamma_init: Option<ArrayView1<f64>>,
) -> Result<(f64, Array1<f64>)> {
    let n = index.n();
    if u_col.len() != n || f_hat.nrows() != n {
        return Err(Error::InvalidInput(format!(
            "marginal fit rows mismatch: column {} / factors {} / index {}",
            u_col.len(),
            f_hat.nrows(),
            n
        )));
    }
    let k = f_hat.ncols();
    let mut design = Array2::zeros((n, 1 + k));
    design.column_mut(0).assign(&u_col);
    for c in 0..k {
        design.column_mut(1 + c).assign(&f_hat.column(c));
    }
    let init = gamma_init.map(|g| {
        let mut theta = Array1::zeros(1 + k);
        theta.slice_mut(ndarray::s![1..]).assign(&g);
        theta
    });
    let theta = newton_cox(
        design.view(),
        index,
        init.as_ref().map(|t| t.view()),
        NewtonOptions::default(),
    )?;
    let gamma = theta.slice(ndarray::s![1..]).to_owned();
    Ok((theta[0], gamma))
}

/// Column standardized to mean zero and unit standard deviation (1/(n-1)
/// convention). Near-constant columns come back as `None`.
fn standardize_column(col: ArrayView1<f64>) -> Option<Array1<f64>> {
    let n = col.len();
    let mean = col.sum() / n as f64;
    let ss: f64 = col.iter().map(|&v| (v - mean) * (v - mean)).sum();
    let sd = (ss / (n - 1) as f64).sqrt();
    if sd <= 1e-12 * (1.0 + mean.abs()) {
        return None;
    }
    Some(col.mapv(|v| (v - mean) / sd))
}

fn rank_and_select(
    beta_abs: &Array1<f64>,
    failed_mask: &[bool],
    selector: Selector,
) -> (Vec<usize>, Vec<usize>) {
    let p = beta_abs.len();
    let mut ranking: Vec<usize> = (0..p).collect();
    ranking.sort_by(|&a, &b| {
        failed_mask[a]
            .cmp(&failed_mask[b])
            .then(beta_abs[b].total_cmp(&beta_abs[a]))
            .then(a.cmp(&b))
    });
    let mut selected: Vec<usize> = match selector {
        Selector::TopD(d) => ranking[..d.min(p)].to_vec(),
        Selector::Threshold(xi) => (0..p).filter(|&j| beta_abs[j] >= xi).collect(),
    };
    selected.sort_unstable();
    (ranking, selected)
}

/// Factor-augmented screening: estimates the factor structure (count from
/// the correlation spectrum when `k` is absent), fits every augmented
/// marginal regression, and ranks by coefficient magnitude. `k = 0` gives
/// plain univariate screening on the standardized covariates.
pub fn screen(
    dataset: &SurvivalDataset,
    k: Option<usize>,
    selector: Selector,
) -> Result<ScreeningResult> {
    if dataset.has_missing() {
        return Err(Error::InvalidInput(
            "screening needs complete covariates; impute first".into(),
        ));
    }
    let x = dataset.covariates();
    let n = dataset.n();
    let p = dataset.d();
    let index = FailureIndex::build(dataset)?;
    let k_cap = (n - 1).min(p).saturating_sub(1);
    let k_used = match k {
        Some(k) => k.min(k_cap),
        None => estimate_num_factors_act(x.view())?.min(k_cap),
    };

    // Standardized per-covariate columns and the shared factor block.
    let (u_cols, f_std, gamma0): (Vec<Option<Array1<f64>>>, Array2<f64>, Array1<f64>) =
        if k_used == 0 {
            let cols = (0..p)
                .map(|j| standardize_column(x.column(j)))
                .collect();
            (cols, Array2::zeros((n, 0)), Array1::zeros(0))
        } else {
            let dec = decompose(x.view(), k_used)?;
            let cols = (0..p)
                .map(|j| standardize_column(dec.idiosyncratic.column(j)))
                .collect();
            let mut f_std = Array2::zeros((n, k_used));
            for c in 0..k_used {
                // Factor columns are exactly mean zero and unit variance by
                // construction; standardizing anyway guards numerical dust.
                // A degenerate factor column means the requested rank
                // exceeds the data's rank.
                let col = standardize_column(dec.factors.column(c)).ok_or_else(|| {
                    Error::DegenerateColumn {
                        name: format!("factor {}", c + 1),
                        context: "screening factor block".into(),
                    }
                })?;
                f_std.column_mut(c).assign(&col);
            }
            let gamma0 = newton_cox(f_std.view(), &index, None, NewtonOptions::default())?;
            (cols, f_std, gamma0)
        };

    let fits: Vec<(f64, bool)> = u_cols
        .par_iter()
        .map(|col| match col {
            // Constant idiosyncratic column: no marginal signal by
            // definition, not a failure.
            None => (0.0, false),
            Some(u) => {
                match marginal_fit_impl(u.view(), f_std.view(), &index, Some(gamma0.view())) {
                    Ok((beta, _)) => (beta.abs(), false),
                    Err(_) => (0.0, true),
                }
            }
        })
        .collect();

    let beta_marginal = Array1::from_iter(fits.iter().map(|&(b, _)| b));
    let failed_mask: Vec<bool> = fits.iter().map(|&(_, f)| f).collect();
    let failed: Vec<usize> = (0..p).filter(|&j| failed_mask[j]).collect();
    let (ranking, selected) = rank_and_select(&beta_marginal, &failed_mask, selector);
    Ok(ScreeningResult {
        k: k_used,
        beta_marginal,
        ranking,
        selected,
        failed,
    })
}

/// Sure independence screening: univariate Cox fits on the standardized raw
/// covariates, no factor adjustment.
pub fn sis_baseline(dataset: &SurvivalDataset, selector: Selector) -> Result<ScreeningResult> {
    screen(dataset, Some(0), selector)
}
