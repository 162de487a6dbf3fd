//! Data generators and the replication harness for the model-selection,
//! screening, and diagnostic experiments.
//!
//! Every replication draws from its own counter-derived RNG stream, so
//! reports are bit-identical across runs and across worker counts. Within a
//! replication the draw order is fixed: coefficients, covariates, survival
//! outcomes, then the fold seed shared by all methods in that replication.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::distr::Uniform;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;

use crate::cox::{irrepresentable_stat, score_at_truth};
use crate::data::{FailureIndex, SurvivalDataset};
use crate::error::{Error, Result};
use crate::metrics::{
    c_index, mean_se, model_size, screening_metrics, sign_consistency, wilson_interval, BinomialCI,
    ScreeningStats,
};
use crate::screening::{screen, sis_baseline, Selector};
use crate::solver::{CdProblem, FitOptions, Method, PreparedDesign, ProcedureFit};
use crate::tuning::{cv_select_lambda, cv_select_refit, fit_tuned, CvConfig, CvResult, CvRule};

/// Covariate models used by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Setting {
    /// X = F B' + U with standard normal factors and loadings and
    /// idiosyncratic noise of variance 2.
    Factor,
    /// Rows i.i.d. normal with unit variances and constant correlation.
    Equicorrelated { rho: f64 },
    /// The screening design: factor model with all entries standard normal
    /// (idiosyncratic variance 1).
    Screening,
}

/// Law of the nonzero coefficients, placed on the first `support_size`
/// coordinates.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ValueLaw {
    Fixed { value: f64 },
    /// Independent draws per replication.
    Uniform { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BetaSpec {
    pub support_size: usize,
    pub law: ValueLaw,
}

/// One experiment's generator and replication settings.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    /// Latent factor count for the factor settings; ignored by the
    /// equicorrelated design.
    pub k: usize,
    pub setting: Setting,
    pub beta: BetaSpec,
    /// Expected censored fraction; the censoring rate is this target's odds
    /// times the event rate.
    pub censor_rate_target: f64,
    pub replications: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidInput(format!("n = {} too small", self.n)));
        }
        if self.p == 0 {
            return Err(Error::InvalidInput("p must be positive".into()));
        }
        if self.beta.support_size > self.p {
            return Err(Error::InvalidInput(format!(
                "support size {} exceeds p = {}",
                self.beta.support_size, self.p
            )));
        }
        if let ValueLaw::Uniform { lo, hi } = self.beta.law {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "uniform coefficient range [{lo}, {hi}] is empty or non-finite"
                )));
            }
        }
        if !(0.0 < self.censor_rate_target && self.censor_rate_target < 1.0) {
            return Err(Error::InvalidInput(format!(
                "censoring target {} outside (0, 1)",
                self.censor_rate_target
            )));
        }
        if self.replications == 0 {
            return Err(Error::InvalidInput("replications must be positive".into()));
        }
        match self.setting {
            Setting::Equicorrelated { rho } => {
                if !(0.0..1.0).contains(&rho) {
                    return Err(Error::InvalidInput(format!(
                        "equicorrelation {rho} outside [0, 1)"
                    )));
                }
            }
            Setting::Factor | Setting::Screening => {
                if self.k == 0 {
                    return Err(Error::InvalidInput(
                        "factor settings need at least one latent factor".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// RNG stream for one replication: stream index `rep + 1` of the seed's
/// cipher, so replications never overlap and scheduling cannot matter.
pub fn rep_rng(seed: u64, rep: usize) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64 + 1);
    rng
}

/// A factor-model draw with its latent truth kept for diagnostics.
#[derive(Debug, Clone)]
pub struct FactorDesignTruth {
    pub x: Array2<f64>,
    /// n x k factor scores.
    pub factors: Array2<f64>,
    /// p x k loadings.
    pub loadings: Array2<f64>,
    /// n x p idiosyncratic noise.
    pub idiosyncratic: Array2<f64>,
}

/// Draws X = F B' + U with standard normal factors and loadings and
/// idiosyncratic standard deviation `idio_sd`. `k = 0` gives pure noise.
pub fn gen_factor_design(
    n: usize,
    p: usize,
    k: usize,
    idio_sd: f64,
    rng: &mut impl Rng,
) -> FactorDesignTruth {
    let loadings = Array2::from_shape_fn((p, k), |_| StandardNormal.sample(rng));
    let factors = Array2::from_shape_fn((n, k), |_| StandardNormal.sample(rng));
    let idiosyncratic = Array2::from_shape_fn((n, p), |_| {
        let e: f64 = StandardNormal.sample(rng);
        idio_sd * e
    });
    let x = factors.dot(&loadings.t()) + &idiosyncratic;
    FactorDesignTruth {
        x,
        factors,
        loadings,
        idiosyncratic,
    }
}

/// Rows i.i.d. N(0, sigma) with unit diagonal and constant off-diagonal
/// `rho`, generated by the one-factor construction
/// sqrt(rho) g + sqrt(1 - rho) eps.
pub fn gen_equicorrelated(n: usize, p: usize, rho: f64, rng: &mut impl Rng) -> Result<Array2<f64>> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidInput(format!(
            "equicorrelation {rho} outside [0, 1)"
        )));
    }
    let a = rho.sqrt();
    let b = (1.0 - rho).sqrt();
    let mut x = Array2::zeros((n, p));
    for i in 0..n {
        let g: f64 = StandardNormal.sample(rng);
        for j in 0..p {
            let e: f64 = StandardNormal.sample(rng);
            x[[i, j]] = a * g + b * e;
        }
    }
    Ok(x)
}

/// The coefficient vector: `support_size` leading entries from the law,
/// zeros elsewhere.
pub fn gen_beta(spec: &BetaSpec, p: usize, rng: &mut impl Rng) -> Result<Array1<f64>> {
    if spec.support_size > p {
        return Err(Error::InvalidInput(format!(
            "support size {} exceeds p = {}",
            spec.support_size, p
        )));
    }
    let mut beta = Array1::zeros(p);
    match spec.law {
        ValueLaw::Fixed { value } => {
            for j in 0..spec.support_size {
                beta[j] = value;
            }
        }
        ValueLaw::Uniform { lo, hi } => {
            let unif = Uniform::new(lo, hi)
                .map_err(|e| Error::InvalidInput(format!("coefficient law: {e}")))?;
            for j in 0..spec.support_size {
                beta[j] = unif.sample(rng);
            }
        }
    }
    Ok(beta)
}

/// Observed times and event flags under unit baseline hazard: the event
/// time is exponential with rate exp(x'beta), censoring is exponential with
/// that rate scaled by the target's odds, which censors the target fraction
/// on average regardless of x.
pub fn gen_survival(
    x: ArrayView2<f64>,
    beta: ArrayView1<f64>,
    censor_target: f64,
    rng: &mut impl Rng,
) -> Result<(Vec<f64>, Vec<bool>)> {
    if !(0.0 < censor_target && censor_target < 1.0) {
        return Err(Error::InvalidInput(format!(
            "censoring target {censor_target} outside (0, 1)"
        )));
    }
    let ratio = censor_target / (1.0 - censor_target);
    let eta = x.dot(&beta);
    let unit_exp = Exp::new(1.0).expect("unit exponential");
    // Standard exponential bounded away from zero, so observed times are
    // strictly positive.
    fn draw_positive<R: Rng + ?Sized>(unit: &Exp<f64>, rng: &mut R) -> f64 {
        let mut e: f64 = unit.sample(rng);
        while e == 0.0 {
            e = unit.sample(rng);
        }
        e
    }
    let n = x.nrows();
    let mut times = Vec::with_capacity(n);
    let mut events = Vec::with_capacity(n);
    for i in 0..n {
        if !eta[i].is_finite() {
            return Err(Error::NonFinite {
                what: "linear predictor",
                index: i,
            });
        }
        let rate = eta[i].exp();
        if rate == 0.0 || !rate.is_finite() {
            return Err(Error::NonFinite {
                what: "hazard rate",
                index: i,
            });
        }
        let t = draw_positive(&unit_exp, rng) / rate;
        let c = draw_positive(&unit_exp, rng) / (ratio * rate);
        times.push(t.min(c));
        events.push(t <= c);
    }
    Ok((times, events))
}

/// Covariate draw for the configured setting.
pub fn gen_design(config: &SimConfig, rng: &mut impl Rng) -> Result<Array2<f64>> {
    Ok(match config.setting {
        Setting::Factor => gen_factor_design(config.n, config.p, config.k, 2f64.sqrt(), rng).x,
        Setting::Screening => gen_factor_design(config.n, config.p, config.k, 1.0, rng).x,
        Setting::Equicorrelated { rho } => gen_equicorrelated(config.n, config.p, rho, rng)?,
    })
}

/// Default dimension penalty of the harness selection rule, on the summed
/// held-out log-likelihood scale. Raw criterion maximization estimates
/// prediction risk and over-selects badly when the target is support
/// recovery; charging each active coordinate about ln(events)/2 recovers
/// the sparse pick the selection tables are built from.
pub const DEFAULT_SPARSE_GAMMA: f64 = 2.5;

/// Knobs of the replication harness shared by all methods.
#[derive(Debug, Clone, Copy)]
pub struct HarnessOptions {
    pub cv_folds: usize,
    pub n_lambda: usize,
    /// How each method reads its lambda off the cross-validation curve.
    pub rule: CvRule,
    pub fit: FitOptions,
}

impl Default for HarnessOptions {
    fn default() -> Self {
        Self {
            cv_folds: 10,
            n_lambda: 100,
            rule: CvRule::Sparse {
                gamma: DEFAULT_SPARSE_GAMMA,
            },
            fit: FitOptions::default(),
        }
    }
}

/// Aggregated selection results for one method.
#[derive(Debug, Clone, serde::Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub replications_used: usize,
    pub failures: usize,
    pub sign_rate: BinomialCI,
    pub mean_model_size: f64,
    /// Two standard errors of the model size mean.
    pub model_size_2se: f64,
    pub mean_c_index: f64,
    pub c_index_2se: f64,
    /// Mean estimated factor count (zero for raw-design methods).
    pub mean_factor_count: f64,
}

/// One full table row set: per-method aggregates plus provenance.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ExperimentReport {
    pub config: SimConfig,
    pub methods: Vec<MethodSummary>,
}

struct MethodOutcome {
    sign_ok: bool,
    size: usize,
    c_index: f64,
    k: usize,
}

fn fit_one_method(
    method: Method,
    dataset: &SurvivalDataset,
    index: &FailureIndex,
    prepared: &PreparedDesign,
    problem: &CdProblem<'_>,
    beta_star: ArrayView1<f64>,
    fold_seed: u64,
    options: &HarnessOptions,
    cv_memo: &mut Vec<(Method, CvResult)>,
) -> Result<MethodOutcome> {
    let cv_config = CvConfig {
        k_folds: options.cv_folds,
        n_lambda: options.n_lambda,
        seed: fold_seed,
        rule: options.rule,
        options: options.fit,
    };
    // Convex stages are shared: a raw or augmented l1 curve computed as the
    // base of a one-step method is the same curve that method's own row
    // needs, and the fold seed makes the reuse exact.
    let convex_cv = |method: Method,
                     memo: &mut Vec<(Method, CvResult)>|
     -> Result<CvResult> {
        if let Some((_, cv)) = memo.iter().find(|(m, _)| *m == method) {
            return Ok(cv.clone());
        }
        let cv = cv_select_lambda(method, dataset, prepared, index, &cv_config)?;
        memo.push((method, cv.clone()));
        Ok(cv)
    };
    let cv = match method.concave_base() {
        None => convex_cv(method, cv_memo)?,
        Some(base) => {
            let base_cv = convex_cv(base, cv_memo)?;
            cv_select_refit(method, dataset, prepared, index, &cv_config, &base_cv)?
        }
    };
    let fit: ProcedureFit = fit_tuned(
        method,
        prepared,
        problem,
        index,
        &cv,
        options.rule,
        &options.fit,
    )?;
    let sign_ok = sign_consistency(
        fit.beta.as_slice().expect("contiguous beta"),
        beta_star.to_slice().expect("contiguous beta_star"),
    )?;
    let size = model_size(fit.beta.as_slice().expect("contiguous beta"));
    let ci = c_index(
        fit.linear_predictor.as_slice().expect("contiguous predictor"),
        dataset.times(),
        dataset.events(),
    )?;
    Ok(MethodOutcome {
        sign_ok,
        size,
        c_index: ci,
        k: fit.k,
    })
}

/// Runs the full selection experiment: per replication, draw data, tune
/// each method by cross-validation, fit, and score; then aggregate sign
/// rates with Wilson intervals and means with twice their standard error.
/// Failed method-replication pairs are excluded; any method failing on 1%
/// or more of replications aborts the report.
pub fn run_experiment(
    config: &SimConfig,
    methods: &[Method],
    options: &HarnessOptions,
) -> Result<ExperimentReport> {
    config.validate()?;
    if methods.is_empty() {
        return Err(Error::InvalidInput("no methods requested".into()));
    }
    let needs_raw = methods.iter().any(|m| !m.is_factor_augmented());
    let needs_aug = methods.iter().any(|m| m.is_factor_augmented());

    let per_rep: Vec<Vec<Option<MethodOutcome>>> = (0..config.replications)
        .into_par_iter()
        .map(|rep| {
            let run = || -> Result<Vec<Option<MethodOutcome>>> {
                let mut rng = rep_rng(config.seed, rep);
                let beta_star = gen_beta(&config.beta, config.p, &mut rng)?;
                let x = gen_design(config, &mut rng)?;
                let (times, events) =
                    gen_survival(x.view(), beta_star.view(), config.censor_rate_target, &mut rng)?;
                let fold_seed = rng.next_u64();
                let dataset = SurvivalDataset::new(times, events, x, None)?;
                let index = FailureIndex::build(&dataset)?;
                let raw = if needs_raw {
                    Some(PreparedDesign::build(dataset.covariates().view(), false, None)?)
                } else {
                    None
                };
                let aug = if needs_aug {
                    Some(PreparedDesign::build(dataset.covariates().view(), true, None)?)
                } else {
                    None
                };
                let raw_problem = match &raw {
                    Some(p) => Some(CdProblem::new(p.design.view(), &index)?),
                    None => None,
                };
                let aug_problem = match &aug {
                    Some(p) => Some(CdProblem::new(p.design.view(), &index)?),
                    None => None,
                };
                let mut outcomes = Vec::with_capacity(methods.len());
                let mut cv_memo: Vec<(Method, CvResult)> = Vec::new();
                for &method in methods {
                    let (prepared, problem) = if method.is_factor_augmented() {
                        (
                            aug.as_ref().expect("augmented prepared"),
                            aug_problem.as_ref().expect("augmented problem"),
                        )
                    } else {
                        (
                            raw.as_ref().expect("raw prepared"),
                            raw_problem.as_ref().expect("raw problem"),
                        )
                    };
                    outcomes.push(
                        fit_one_method(
                            method,
                            &dataset,
                            &index,
                            prepared,
                            problem,
                            beta_star.view(),
                            fold_seed,
                            options,
                            &mut cv_memo,
                        )
                        .ok(),
                    );
                }
                Ok(outcomes)
            };
            // A generation-level failure voids the whole replication.
            run().unwrap_or_else(|_| (0..methods.len()).map(|_| None).collect())
        })
        .collect();

    let mut rows = Vec::with_capacity(methods.len());
    for (m, &method) in methods.iter().enumerate() {
        let outcomes: Vec<&MethodOutcome> =
            per_rep.iter().filter_map(|rep| rep[m].as_ref()).collect();
        let failures = config.replications - outcomes.len();
        if failures as f64 >= 0.01 * config.replications as f64 && failures > 0 {
            return Err(Error::TooManyFailures {
                failures,
                replications: config.replications,
            });
        }
        let used = outcomes.len();
        let sign_successes = outcomes.iter().filter(|o| o.sign_ok).count();
        let sizes: Vec<f64> = outcomes.iter().map(|o| o.size as f64).collect();
        let cis: Vec<f64> = outcomes.iter().map(|o| o.c_index).collect();
        let ks: Vec<f64> = outcomes.iter().map(|o| o.k as f64).collect();
        let (mean_size, size_se) = mean_se(&sizes)?;
        let (mean_ci, ci_se) = mean_se(&cis)?;
        let (mean_k, _) = mean_se(&ks)?;
        rows.push(MethodSummary {
            method,
            replications_used: used,
            failures,
            sign_rate: wilson_interval(sign_successes, used, 0.95)?,
            mean_model_size: mean_size,
            model_size_2se: 2.0 * size_se,
            mean_c_index: mean_ci,
            c_index_2se: 2.0 * ci_se,
            mean_factor_count: mean_k,
        });
    }
    Ok(ExperimentReport {
        config: *config,
        methods: rows,
    })
}

/// Screening comparison: augmented marginal screening against the plain
/// univariate baseline at a common cut, with full operating curves.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ScreeningReport {
    pub config: SimConfig,
    pub top_d: usize,
    pub failures: usize,
    pub augmented: ScreeningStats,
    pub baseline: ScreeningStats,
}

/// Runs the screening experiment: each replication screens once with the
/// factor-augmented procedure (factor count from the correlation spectrum)
/// and once with the univariate baseline.
pub fn run_screening_experiment(config: &SimConfig, top_d: usize) -> Result<ScreeningReport> {
    config.validate()?;
    if top_d == 0 || top_d > config.p {
        return Err(Error::InvalidInput(format!(
            "top-d cut {top_d} outside 1..={}",
            config.p
        )));
    }
    if config.beta.support_size == 0 {
        return Err(Error::InvalidInput(
            "screening experiment needs a nonempty support".into(),
        ));
    }
    struct RepRankings {
        augmented: (Vec<usize>, Vec<usize>),
        baseline: (Vec<usize>, Vec<usize>),
    }
    let per_rep: Vec<Option<RepRankings>> = (0..config.replications)
        .into_par_iter()
        .map(|rep| {
            let run = || -> Result<RepRankings> {
                let mut rng = rep_rng(config.seed, rep);
                let beta_star = gen_beta(&config.beta, config.p, &mut rng)?;
                let x = gen_design(config, &mut rng)?;
                let (times, events) =
                    gen_survival(x.view(), beta_star.view(), config.censor_rate_target, &mut rng)?;
                let _fold_seed = rng.next_u64();
                let dataset = SurvivalDataset::new(times, events, x, None)?;
                let augmented = screen(&dataset, None, Selector::TopD(top_d))?;
                let baseline = sis_baseline(&dataset, Selector::TopD(top_d))?;
                Ok(RepRankings {
                    augmented: (augmented.ranking, augmented.selected),
                    baseline: (baseline.ranking, baseline.selected),
                })
            };
            run().ok()
        })
        .collect();

    let kept: Vec<&RepRankings> = per_rep.iter().flatten().collect();
    let failures = config.replications - kept.len();
    if failures as f64 >= 0.01 * config.replications as f64 && failures > 0 {
        return Err(Error::TooManyFailures {
            failures,
            replications: config.replications,
        });
    }
    let support: Vec<usize> = (0..config.beta.support_size).collect();
    let collect = |pick: fn(&RepRankings) -> &(Vec<usize>, Vec<usize>)| {
        let rankings: Vec<Vec<usize>> = kept.iter().map(|r| pick(r).0.clone()).collect();
        let selected: Vec<Vec<usize>> = kept.iter().map(|r| pick(r).1.clone()).collect();
        screening_metrics(&rankings, &selected, &support, config.p)
    };
    Ok(ScreeningReport {
        config: *config,
        top_d,
        failures,
        augmented: collect(|r| &r.augmented)?,
        baseline: collect(|r| &r.baseline)?,
    })
}

/// Per-replication sup-norm of the partial-likelihood score at the
/// pseudo-true coefficients of the factor-augmented standardized design.
/// This is the quantity whose decay in n drives support recovery.
pub fn eta_experiment(config: &SimConfig) -> Result<Vec<f64>> {
    config.validate()?;
    (0..config.replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rep_rng(config.seed, rep);
            let beta_star = gen_beta(&config.beta, config.p, &mut rng)?;
            let x = gen_design(config, &mut rng)?;
            let (times, events) =
                gen_survival(x.view(), beta_star.view(), config.censor_rate_target, &mut rng)?;
            let dataset = SurvivalDataset::new(times, events, x, None)?;
            let index = FailureIndex::build(&dataset)?;
            let prepared = PreparedDesign::build(dataset.covariates().view(), true, None)?;
            score_at_truth(
                dataset.covariates().view(),
                beta_star.view(),
                prepared.design.view(),
                &index,
            )
        })
        .collect()
}

/// Solver-space coefficients that reproduce the true linear predictor on a
/// prepared design, up to an immaterial constant shift: scaled true
/// coefficients on the penalized block, projected loadings on the factors.
fn pseudo_true_theta(prepared: &PreparedDesign, beta_star: ArrayView1<f64>) -> Array1<f64> {
    let p = prepared.n_penalized;
    let mut theta = Array1::zeros(prepared.width());
    for j in 0..p {
        theta[j] = beta_star[j] * prepared.scales[j];
    }
    if let Some(dec) = &prepared.decomposition {
        let projected = dec.loadings.t().dot(&beta_star);
        for c in 0..prepared.k {
            theta[p + c] = projected[c];
        }
    }
    theta
}

/// Per-replication irrepresentable diagnostics (raw design, augmented
/// design) at the pseudo-true coefficients. The augmented active block
/// includes the unpenalized factor coordinates.
pub fn irrepresentable_experiment(config: &SimConfig) -> Result<Vec<(f64, f64)>> {
    config.validate()?;
    (0..config.replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = rep_rng(config.seed, rep);
            let beta_star = gen_beta(&config.beta, config.p, &mut rng)?;
            let x = gen_design(config, &mut rng)?;
            let (times, events) =
                gen_survival(x.view(), beta_star.view(), config.censor_rate_target, &mut rng)?;
            let dataset = SurvivalDataset::new(times, events, x, None)?;
            let index = FailureIndex::build(&dataset)?;
            let support: Vec<usize> = beta_star
                .iter()
                .enumerate()
                .filter(|(_, &b)| b != 0.0)
                .map(|(j, _)| j)
                .collect();

            let raw = PreparedDesign::build(dataset.covariates().view(), false, None)?;
            let raw_theta = pseudo_true_theta(&raw, beta_star.view());
            let raw_stat =
                irrepresentable_stat(raw.design.view(), raw_theta.view(), &support, &index)?;

            let aug = PreparedDesign::build(dataset.covariates().view(), true, None)?;
            let aug_theta = pseudo_true_theta(&aug, beta_star.view());
            let mut aug_support = support.clone();
            aug_support.extend(aug.n_penalized..aug.width());
            let aug_stat =
                irrepresentable_stat(aug.design.view(), aug_theta.view(), &aug_support, &index)?;
            Ok((raw_stat, aug_stat))
        })
        .collect()
}
