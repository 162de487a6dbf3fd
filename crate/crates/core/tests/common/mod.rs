//! Shared oracles for the integration tests.
//!
//! Everything here is written from the definitions, independent of the
//! library's internals: risk sets by direct comparison of observed times,
//! derivatives as explicit sums, Newton with dense linear algebra, and the
//! concordance index by exhaustive pair enumeration. Slow on purpose.

// Each test binary compiles its own copy and uses a different subset.
#![allow(dead_code)]

use farmhazard::{FailureIndex, SurvivalDataset};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

/// Average negative log partial likelihood straight from the definition:
/// for each event j, the risk set is everyone still observed at its time.
pub fn naive_loss(
    design: ArrayView2<f64>,
    theta: ArrayView1<f64>,
    times: &[f64],
    events: &[bool],
) -> f64 {
    let n = times.len();
    let eta: Vec<f64> = (0..n).map(|i| design.row(i).dot(&theta)).collect();
    let mut total = 0.0;
    for j in 0..n {
        if !events[j] {
            continue;
        }
        let mut denom = 0.0;
        for i in 0..n {
            if times[i] >= times[j] {
                denom += (eta[i]).exp();
            }
        }
        total += eta[j] - denom.ln();
    }
    -total / n as f64
}

/// Gradient of [`naive_loss`] as the explicit weighted-mean sum.
pub fn naive_gradient(
    design: ArrayView2<f64>,
    theta: ArrayView1<f64>,
    times: &[f64],
    events: &[bool],
) -> Array1<f64> {
    let n = times.len();
    let d = design.ncols();
    let eta: Vec<f64> = (0..n).map(|i| design.row(i).dot(&theta)).collect();
    let mut grad = Array1::<f64>::zeros(d);
    for j in 0..n {
        if !events[j] {
            continue;
        }
        let mut s0 = 0.0;
        let mut s1 = Array1::<f64>::zeros(d);
        for i in 0..n {
            if times[i] >= times[j] {
                let w = eta[i].exp();
                s0 += w;
                s1.scaled_add(w, &design.row(i));
            }
        }
        grad.scaled_add(-1.0, &design.row(j));
        grad.scaled_add(1.0 / s0, &s1);
    }
    grad / n as f64
}

/// Hessian of [`naive_loss`]: the per-event covariance of covariates under
/// the risk-set weights.
pub fn naive_hessian(
    design: ArrayView2<f64>,
    theta: ArrayView1<f64>,
    times: &[f64],
    events: &[bool],
) -> Array2<f64> {
    let n = times.len();
    let d = design.ncols();
    let eta: Vec<f64> = (0..n).map(|i| design.row(i).dot(&theta)).collect();
    let mut hess = Array2::<f64>::zeros((d, d));
    for j in 0..n {
        if !events[j] {
            continue;
        }
        let mut s0 = 0.0;
        let mut s1 = Array1::<f64>::zeros(d);
        let mut s2 = Array2::<f64>::zeros((d, d));
        for i in 0..n {
            if times[i] >= times[j] {
                let w = eta[i].exp();
                s0 += w;
                s1.scaled_add(w, &design.row(i));
                for a in 0..d {
                    for b in 0..d {
                        s2[[a, b]] += w * design[[i, a]] * design[[i, b]];
                    }
                }
            }
        }
        let mu = &s1 / s0;
        for a in 0..d {
            for b in 0..d {
                hess[[a, b]] += s2[[a, b]] / s0 - mu[a] * mu[b];
            }
        }
    }
    hess / n as f64
}

/// Central finite differences of a scalar function.
pub fn fd_gradient<F: FnMut(ArrayView1<f64>) -> f64>(
    mut f: F,
    theta: ArrayView1<f64>,
    h: f64,
) -> Array1<f64> {
    let d = theta.len();
    let mut grad = Array1::zeros(d);
    for j in 0..d {
        let mut hi = theta.to_owned();
        let mut lo = theta.to_owned();
        hi[j] += h;
        lo[j] -= h;
        grad[j] = (f(hi.view()) - f(lo.view())) / (2.0 * h);
    }
    grad
}

/// Newton's method implemented against the naive derivatives and a dense
/// solve, for cross-checking unpenalized fits.
pub fn newton_oracle(
    design: ArrayView2<f64>,
    times: &[f64],
    events: &[bool],
    max_iter: usize,
    tol: f64,
) -> Array1<f64> {
    let d = design.ncols();
    let mut theta = Array1::<f64>::zeros(d);
    for _ in 0..max_iter {
        let g = naive_gradient(design, theta.view(), times, events);
        if g.iter().all(|&v| v.abs() < tol) {
            break;
        }
        let h = naive_hessian(design, theta.view(), times, events);
        let hm = nalgebra::DMatrix::from_fn(d, d, |a, b| h[[a, b]]);
        let gv = nalgebra::DVector::from_fn(d, |a, _| g[a]);
        let ridge = 1e-10 * (1.0 + hm.diagonal().amax());
        let step = (hm + nalgebra::DMatrix::identity(d, d) * ridge)
            .cholesky()
            .expect("oracle hessian must be positive definite")
            .solve(&gv);
        // Halve until the loss stops increasing.
        let base = naive_loss(design, theta.view(), times, events);
        let mut t = 1.0;
        loop {
            let mut cand = theta.clone();
            for a in 0..d {
                cand[a] -= t * step[a];
            }
            let cand_loss = naive_loss(design, cand.view(), times, events);
            if cand_loss.is_finite() && cand_loss <= base {
                theta = cand;
                break;
            }
            t *= 0.5;
            assert!(t > 1e-12, "oracle line search exhausted");
        }
    }
    theta
}

/// Concordance by exhaustive enumeration over ordered pairs, written from
/// the verbal definition with the two orderings checked separately.
pub fn c_index_oracle(risks: &[f64], times: &[f64], events: &[bool]) -> Option<f64> {
    let n = risks.len();
    let mut usable = 0.0;
    let mut score = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            // Count each unordered pair once, from the side observed first.
            let i_first = if times[i] < times[j] {
                true
            } else if times[i] == times[j] {
                // Tie: the event member counts as first; skip unless
                // exactly one event. Order the pair by index to count once.
                if events[i] && !events[j] {
                    true
                } else {
                    false
                }
            } else {
                false
            };
            if !i_first || !events[i] {
                continue;
            }
            usable += 1.0;
            if risks[i] > risks[j] {
                score += 1.0;
            } else if risks[i] == risks[j] {
                score += 0.5;
            }
        }
    }
    if usable == 0.0 {
        None
    } else {
        Some(score / usable)
    }
}

/// Random survival instance with optional time ties and a mix of events.
pub fn random_instance(
    n: usize,
    d: usize,
    seed: u64,
    tie_prob: f64,
) -> (SurvivalDataset, FailureIndex, Array1<f64>) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((n, d), |_| StandardNormal.sample(&mut rng));
    let mut times: Vec<f64> = (0..n).map(|_| rng.random_range(0.05f64..4.0)).collect();
    for i in 1..n {
        if rng.random_bool(tie_prob) {
            times[i] = times[i - 1];
        }
    }
    let mut events: Vec<bool> = (0..n).map(|_| rng.random_bool(0.7)).collect();
    if !events.iter().any(|&e| e) {
        events[0] = true;
    }
    let theta = Array1::from_shape_fn(d, |_| {
        let v: f64 = StandardNormal.sample(&mut rng);
        0.5 * v
    });
    let ds = SurvivalDataset::new(times, events, x, None).expect("valid instance");
    let index = FailureIndex::build(&ds).expect("instance has events");
    (ds, index, theta)
}
