//! Evaluation statistics: concordance, selection quality, binomial
//! intervals, and screening operating characteristics.

use statrs::distribution::ContinuousCDF;

use crate::error::{Error, Result};

/// Wilson score interval around an observed success rate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BinomialCI {
    pub successes: usize,
    pub trials: usize,
    pub rate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Wilson score interval for `k` successes in `n` trials at the given
/// two-sided confidence level.
pub fn wilson_interval(k: usize, n: usize, confidence: f64) -> Result<BinomialCI> {
    if n == 0 || k > n {
        return Err(Error::InvalidInput(format!(
            "wilson interval needs 0 <= k <= n with n >= 1, got k={k}, n={n}"
        )));
    }
    if !(0.0 < confidence && confidence < 1.0) {
        return Err(Error::InvalidInput(format!(
            "confidence {confidence} outside (0, 1)"
        )));
    }
    let normal = statrs::distribution::Normal::new(0.0, 1.0).expect("standard normal");
    let z = normal.inverse_cdf(0.5 * (1.0 + confidence));
    let nf = n as f64;
    let p_hat = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p_hat + z2 / (2.0 * nf)) / denom;
    let half = z * (p_hat * (1.0 - p_hat) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    // The exact bounds always bracket the rate inside [0, 1]; rounding can
    // break that by an ulp at the boundary cases, so clamp to the invariant.
    Ok(BinomialCI {
        successes: k,
        trials: n,
        rate: p_hat,
        lower: (center - half).max(0.0).min(p_hat),
        upper: (center + half).min(1.0).max(p_hat),
    })
}

/// Harrell-style concordance index. A pair with distinct observed times is
/// usable when the earlier member had an event; a pair tied in time is
/// usable only when exactly one member had an event, and that member counts
/// as the earlier one. Concordance means the earlier member has the higher
/// risk score; risk ties score half.
pub fn c_index(risks: &[f64], times: &[f64], events: &[bool]) -> Result<f64> {
    let n = risks.len();
    if times.len() != n || events.len() != n {
        return Err(Error::InvalidInput(format!(
            "c-index length mismatch: {} risks, {} times, {} events",
            n,
            times.len(),
            events.len()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidInput("c-index needs at least two samples".into()));
    }
    for (i, &r) in risks.iter().enumerate() {
        if !r.is_finite() {
            return Err(Error::NonFinite {
                what: "risk score",
                index: i,
            });
        }
    }
    let mut usable = 0u64;
    let mut concordant = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let (earlier, later) = if times[i] < times[j] {
                (i, j)
            } else if times[j] < times[i] {
                (j, i)
            } else {
                // Tied times: usable only when exactly one member has an
                // event; the event member is treated as earlier.
                match (events[i], events[j]) {
                    (true, false) => (i, j),
                    (false, true) => (j, i),
                    _ => continue,
                }
            };
            if !events[earlier] {
                continue;
            }
            usable += 1;
            if risks[earlier] > risks[later] {
                concordant += 1.0;
            } else if risks[earlier] == risks[later] {
                concordant += 0.5;
            }
        }
    }
    if usable == 0 {
        return Err(Error::InvalidInput(
            "no usable pairs: every comparison is censored or tied".into(),
        ));
    }
    Ok(concordant / usable as f64)
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Exact componentwise sign agreement, zeros included.
pub fn sign_consistency(beta_hat: &[f64], beta_star: &[f64]) -> Result<bool> {
    if beta_hat.len() != beta_star.len() {
        return Err(Error::InvalidInput(format!(
            "sign comparison of lengths {} and {}",
            beta_hat.len(),
            beta_star.len()
        )));
    }
    Ok(beta_hat
        .iter()
        .zip(beta_star)
        .all(|(&a, &b)| sign(a) == sign(b)))
}

/// Number of exactly nonzero coefficients.
pub fn model_size(beta_hat: &[f64]) -> usize {
    beta_hat.iter().filter(|&&b| b != 0.0).count()
}

/// Sample mean and standard error (zero for a single observation).
pub fn mean_se(values: &[f64]) -> Result<(f64, f64)> {
    let m = values.len();
    if m == 0 {
        return Err(Error::InvalidInput("mean of an empty sample".into()));
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    if m == 1 {
        return Ok((mean, 0.0));
    }
    let var = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1) as f64;
    Ok((mean, (var / m as f64).sqrt()))
}

/// Aggregated screening quality over replications.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ScreeningStats {
    /// Fraction of replications whose selected set contains the support.
    pub sure_rate: f64,
    /// Mean fraction of the support missing from the selected set.
    pub fnr_mean: f64,
    /// Mean (false positive rate, true positive rate) as the cut sweeps
    /// d = 1..=p down each replication's ranking.
    pub roc: Vec<(f64, f64)>,
    /// Sure-screening rate at each cut d = 1..=p.
    pub sure_rate_by_d: Vec<f64>,
    /// Mean false negative rate at each cut.
    pub fnr_by_d: Vec<f64>,
}

/// Computes sure-screening rate and mean FNR from the per-replication
/// selected sets, and the ROC / rate curves from the full rankings.
pub fn screening_metrics(
    rankings: &[Vec<usize>],
    selected_sets: &[Vec<usize>],
    true_support: &[usize],
    p: usize,
) -> Result<ScreeningStats> {
    let reps = rankings.len();
    if reps == 0 || selected_sets.len() != reps {
        return Err(Error::InvalidInput(format!(
            "screening metrics over {} rankings and {} selections",
            reps,
            selected_sets.len()
        )));
    }
    if true_support.is_empty() {
        return Err(Error::InvalidInput("empty true support".into()));
    }
    let mut is_true = vec![false; p];
    for &j in true_support {
        if j >= p {
            return Err(Error::InvalidInput(format!(
                "support index {j} out of range for p={p}"
            )));
        }
        is_true[j] = true;
    }
    let s = true_support.len();
    let s_f = s as f64;
    let negatives = (p - s) as f64;

    let mut sure_hits = 0usize;
    let mut fnr_total = 0.0f64;
    for selected in selected_sets {
        let tp = selected.iter().filter(|&&j| j < p && is_true[j]).count();
        if tp == s {
            sure_hits += 1;
        }
        fnr_total += (s - tp) as f64 / s_f;
    }

    let mut tpr_sum = vec![0.0f64; p];
    let mut fpr_sum = vec![0.0f64; p];
    let mut sure_sum = vec![0.0f64; p];
    for ranking in rankings {
        if ranking.len() != p {
            return Err(Error::InvalidInput(format!(
                "ranking of length {} for p={p}",
                ranking.len()
            )));
        }
        let mut tp = 0usize;
        for (d0, &j) in ranking.iter().enumerate() {
            if j >= p {
                return Err(Error::InvalidInput(format!(
                    "ranking entry {j} out of range for p={p}"
                )));
            }
            if is_true[j] {
                tp += 1;
            }
            tpr_sum[d0] += tp as f64 / s_f;
            if negatives > 0.0 {
                fpr_sum[d0] += (d0 + 1 - tp) as f64 / negatives;
            }
            if tp == s {
                sure_sum[d0] += 1.0;
            }
        }
    }
    let r = reps as f64;
    let roc: Vec<(f64, f64)> = (0..p).map(|d| (fpr_sum[d] / r, tpr_sum[d] / r)).collect();
    let sure_rate_by_d: Vec<f64> = sure_sum.iter().map(|&v| v / r).collect();
    let fnr_by_d: Vec<f64> = tpr_sum.iter().map(|&v| 1.0 - v / r).collect();
    Ok(ScreeningStats {
        sure_rate: sure_hits as f64 / r,
        fnr_mean: fnr_total / r,
        roc,
        sure_rate_by_d,
        fnr_by_d,
    })
}

/// Area under an ROC polyline, trapezoidal, with (0,0) and (1,1) anchors.
pub fn roc_auc(points: &[(f64, f64)]) -> f64 {
    let mut auc = 0.0;
    let mut prev = (0.0f64, 0.0f64);
    for &(x, y) in points.iter().chain(std::iter::once(&(1.0, 1.0))) {
        auc += (x - prev.0) * (y + prev.1) / 2.0;
        prev = (x, y);
    }
    auc
}

/// Linear interpolation of an ROC polyline at a false positive rate,
/// anchored at (0,0) and (1,1). Points must be sorted by FPR.
pub fn roc_tpr_at(points: &[(f64, f64)], fpr: f64) -> f64 {
    let mut prev = (0.0f64, 0.0f64);
    for &(x, y) in points.iter().chain(std::iter::once(&(1.0, 1.0))) {
        if fpr <= x {
            if x == prev.0 {
                return y.max(prev.1);
            }
            let t = (fpr - prev.0) / (x - prev.0);
            return prev.1 + t * (y - prev.1);
        }
        prev = (x, y);
    }
    1.0
}

/// Fraction of grid points where curve `a` sits at or above curve `b`,
/// within a small slack for ties.
pub fn roc_dominance_fraction(a: &[(f64, f64)], b: &[(f64, f64)], grid: &[f64]) -> f64 {
    if grid.is_empty() {
        return 1.0;
    }
    let wins = grid
        .iter()
        .filter(|&&f| roc_tpr_at(a, f) >= roc_tpr_at(b, f) - 1e-12)
        .count();
    wins as f64 / grid.len() as f64
}
