//! Approximate factor structure: covariance pilot, principal-component
//! decomposition, factor-count estimation, and decorrelation diagnostics.
//!
//! The decomposition splits a column-centered covariate matrix `X` into
//! `F B^T + U`: `B` holds scaled leading eigenvectors of the covariance
//! pilot, `F` the corresponding factor scores, and `U` the idiosyncratic
//! remainder. Computations route through the n x n Gram matrix, so wide
//! matrices (p >> n) stay cheap; the p x p pilot is only formed on demand.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Leading eigenpairs of a symmetric matrix, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct PilotEigen {
    pub values: Array1<f64>,
    /// One column per eigenpair, unit length, sign-fixed so the entry of
    /// largest magnitude is positive.
    pub vectors: Array2<f64>,
}

/// Rank-k split of a covariate matrix into factors and idiosyncratic parts.
#[derive(Debug, Clone)]
pub struct FactorDecomposition {
    pub k: usize,
    /// Loadings, p x k: column j is sqrt(lambda_j) times the j-th pilot
    /// eigenvector.
    pub loadings: Array2<f64>,
    /// Factor scores, n x k.
    pub factors: Array2<f64>,
    /// Idiosyncratic component, n x p: centered data minus `factors * loadings^T`.
    pub idiosyncratic: Array2<f64>,
    /// Leading eigenvalues of the covariance pilot, descending.
    pub eigenvalues: Array1<f64>,
    /// Column means removed before the decomposition.
    pub col_means: Array1<f64>,
}

fn column_means(x: ArrayView2<f64>) -> Array1<f64> {
    let n = x.nrows() as f64;
    x.sum_axis(Axis(0)) / n
}

fn check_matrix(x: ArrayView2<f64>, op: &str) -> Result<()> {
    if x.nrows() < 2 {
        return Err(Error::InvalidInput(format!(
            "{op} needs at least 2 rows, got {}",
            x.nrows()
        )));
    }
    if x.ncols() == 0 {
        return Err(Error::InvalidInput(format!("{op} needs at least 1 column")));
    }
    for (i, &v) in x.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                what: "covariate",
                index: i,
            });
        }
    }
    Ok(())
}

/// Sample covariance of the columns of `x`: centered, 1/(n-1) normalization.
pub fn pilot_covariance(x: ArrayView2<f64>) -> Result<Array2<f64>> {
    check_matrix(x, "pilot_covariance")?;
    let n = x.nrows() as f64;
    let means = column_means(x);
    let mut centered = x.to_owned();
    for (j, mut col) in centered.axis_iter_mut(Axis(1)).enumerate() {
        col.mapv_inplace(|v| v - means[j]);
    }
    let mut cov = centered.t().dot(&centered);
    cov.mapv_inplace(|v| v / (n - 1.0));
    Ok(cov)
}

/// Top-k eigenpairs of a symmetric matrix, eigenvalues descending, with a
/// deterministic sign convention. The input must be symmetric to rounding.
pub fn top_k_eigen(sym: &Array2<f64>, k: usize) -> Result<PilotEigen> {
    let p = sym.nrows();
    if sym.ncols() != p {
        return Err(Error::InvalidInput(format!(
            "matrix is {}x{}, expected square",
            p,
            sym.ncols()
        )));
    }
    if k < 1 || k > p {
        return Err(Error::InvalidInput(format!(
            "k = {k} outside 1..={p}"
        )));
    }
    let mut scale = 0.0f64;
    for &v in sym.iter() {
        scale = scale.max(v.abs());
    }
    for a in 0..p {
        for b in (a + 1)..p {
            if (sym[[a, b]] - sym[[b, a]]).abs() > 1e-8 * (1.0 + scale) {
                return Err(Error::InvalidInput(format!(
                    "matrix is not symmetric at ({a}, {b})"
                )));
            }
        }
    }
    let m = nalgebra::DMatrix::from_fn(p, p, |a, b| 0.5 * (sym[[a, b]] + sym[[b, a]]));
    let eig = nalgebra::SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut values = Array1::zeros(k);
    let mut vectors = Array2::zeros((p, k));
    for (c, &src) in order.iter().take(k).enumerate() {
        values[c] = eig.eigenvalues[src];
        let col = eig.eigenvectors.column(src);
        // Fix the sign so the largest-magnitude entry is positive; ties in
        // magnitude resolve to the earliest index.
        let mut pivot = 0usize;
        for a in 1..p {
            if col[a].abs() > col[pivot].abs() {
                pivot = a;
            }
        }
        let flip = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for a in 0..p {
            vectors[[a, c]] = flip * col[a];
        }
    }
    Ok(PilotEigen { values, vectors })
}

/// Rank-k principal-component decomposition of `x` (columns centered first).
///
/// Implemented through the n x n Gram matrix of the centered data: its unit
/// eigenvectors q_j and eigenvalues g_j give factors sqrt(n-1) q_j...
/// more precisely `F[:, j] = sqrt(n-1) q_j` and `B[:, j] = Y^T q_j / sqrt(n-1)`,
/// which reproduces the covariance-eigenvector construction
/// `B = (sqrt(lambda_j) xi_j)_j`, `F = Y B diag(lambda)^-1` exactly, with
/// `lambda_j = g_j / (n-1)`.
pub fn decompose(x: ArrayView2<f64>, k: usize) -> Result<FactorDecomposition> {
    check_matrix(x, "decompose")?;
    let n = x.nrows();
    let p = x.ncols();
    let rank_cap = (n - 1).min(p);
    if k < 1 || k > rank_cap {
        return Err(Error::InvalidInput(format!(
            "k = {k} outside 1..={rank_cap} for an {n}x{p} matrix"
        )));
    }
    let means = column_means(x);
    let mut centered = x.to_owned();
    for (j, mut col) in centered.axis_iter_mut(Axis(1)).enumerate() {
        col.mapv_inplace(|v| v - means[j]);
    }
    let gram = centered.dot(&centered.t());
    let eig = top_k_eigen(&gram, k)?;
    let nm1 = (n - 1) as f64;
    for j in 0..k {
        if eig.values[j] <= 1e-10 * (1.0 + eig.values[0].abs()) {
            return Err(Error::Eigen(format!(
                "rank deficient: eigenvalue {j} of the Gram matrix is not positive"
            )));
        }
    }
    let factors = eig.vectors.mapv(|v| v * nm1.sqrt());
    let loadings = centered.t().dot(&eig.vectors).mapv(|v| v / nm1.sqrt());
    let reconstruction = factors.dot(&loadings.t());
    let idiosyncratic = &centered - &reconstruction;
    let eigenvalues = eig.values.mapv(|g| g / nm1);
    Ok(FactorDecomposition {
        k,
        loadings,
        factors,
        idiosyncratic,
        eigenvalues,
        col_means: means,
    })
}

impl FactorDecomposition {
    /// Width of the original covariate matrix.
    pub fn p(&self) -> usize {
        self.loadings.nrows()
    }

    /// Augmented design `[U | F]` with the idiosyncratic block first.
    pub fn augmented_design(&self) -> Array2<f64> {
        let n = self.factors.nrows();
        let p = self.p();
        let mut design = Array2::zeros((n, p + self.k));
        design
            .slice_mut(ndarray::s![.., ..p])
            .assign(&self.idiosyncratic);
        design
            .slice_mut(ndarray::s![.., p..])
            .assign(&self.factors);
        design
    }

    /// Projects new rows in the original covariate space onto the fitted
    /// decomposition: centers with the stored means, regresses onto the
    /// loadings for factor scores, and keeps the remainder.
    pub fn project(&self, x_new: ArrayView2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        if x_new.ncols() != self.p() {
            return Err(Error::InvalidInput(format!(
                "projection input has {} columns, expected {}",
                x_new.ncols(),
                self.p()
            )));
        }
        let mut centered = x_new.to_owned();
        for (j, mut col) in centered.axis_iter_mut(Axis(1)).enumerate() {
            col.mapv_inplace(|v| v - self.col_means[j]);
        }
        let mut factors = centered.dot(&self.loadings);
        for (j, mut col) in factors.axis_iter_mut(Axis(1)).enumerate() {
            col.mapv_inplace(|v| v / self.eigenvalues[j]);
        }
        let idiosyncratic = &centered - &factors.dot(&self.loadings.t());
        Ok((idiosyncratic, factors))
    }
}

/// Eigenvalues of the sample correlation matrix of `x`, descending, padded
/// with zeros up to p. Wide inputs route through the n x n Gram of the
/// scaled columns. Errors on zero-variance columns.
fn correlation_eigenvalues(x: ArrayView2<f64>) -> Result<Vec<f64>> {
    let n = x.nrows();
    let p = x.ncols();
    let nm1 = (n - 1) as f64;
    let means = column_means(x);
    let mut scaled = x.to_owned();
    for (j, mut col) in scaled.axis_iter_mut(Axis(1)).enumerate() {
        let mean = means[j];
        col.mapv_inplace(|v| v - mean);
        let ss: f64 = col.iter().map(|&v| v * v).sum();
        let sd = (ss / nm1).sqrt();
        if sd <= 1e-12 * (1.0 + mean.abs()) {
            return Err(Error::DegenerateColumn {
                name: format!("column {j}"),
                context: "correlation matrix is undefined for constant columns".into(),
            });
        }
        col.mapv_inplace(|v| v / sd);
    }
    let small = if p <= n {
        let mut c = scaled.t().dot(&scaled);
        c.mapv_inplace(|v| v / nm1);
        c
    } else {
        let mut g = scaled.dot(&scaled.t());
        g.mapv_inplace(|v| v / nm1);
        g
    };
    let dim = small.nrows();
    let m = nalgebra::DMatrix::from_fn(dim, dim, |a, b| 0.5 * (small[[a, b]] + small[[b, a]]));
    let eigvals = m.symmetric_eigenvalues();
    let mut values: Vec<f64> = eigvals.iter().map(|&v| v.max(0.0)).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    values.resize(p, 0.0);
    Ok(values)
}

/// Estimates the number of common factors by thresholding bias-corrected
/// eigenvalues of the sample correlation matrix.
///
/// For the j-th eigenvalue the finite-sample bias is corrected through the
/// empirical Stieltjes transform of the trailing spectrum augmented by one
/// pseudo-eigenvalue `(3 lambda_j + lambda_{j+1}) / 4`, with effective
/// aspect ratio `(p - j) / (n - 1)`. The estimate is the number of corrected
/// eigenvalues above `1 + sqrt(p / n)`. Exactly invariant to rescaling
/// columns because only the correlation matrix enters.
pub fn estimate_num_factors_act(x: ArrayView2<f64>) -> Result<usize> {
    check_matrix(x, "estimate_num_factors_act")?;
    let n = x.nrows();
    let p = x.ncols();
    if n < 4 {
        return Err(Error::InvalidInput(format!(
            "factor-count estimation needs at least 4 rows, got {n}"
        )));
    }
    if p < 2 {
        return Err(Error::InvalidInput(
            "factor-count estimation needs at least 2 columns".into(),
        ));
    }
    let lambdas = correlation_eigenvalues(x)?;
    let threshold = 1.0 + (p as f64 / n as f64).sqrt();
    let j_max = p.saturating_sub(1).min(n - 2);
    let mut count = 0usize;
    for j in 1..=j_max {
        let lam_j = lambdas[j - 1];
        if lam_j <= 1e-12 {
            break;
        }
        let lam_next = lambdas[j];
        let pseudo = (3.0 * lam_j + lam_next) / 4.0;
        let mut sum = 1.0 / (pseudo - lam_j);
        for &lam in &lambdas[j..] {
            sum += 1.0 / (lam - lam_j);
        }
        let p_eff = (p - j) as f64;
        let c_nj = p_eff / (n - 1) as f64;
        let m_hat = sum / p_eff;
        let m_under = -(1.0 - c_nj) / lam_j + c_nj * m_hat;
        let corrected = -1.0 / m_under;
        if corrected > threshold {
            count += 1;
        }
    }
    Ok(count)
}

/// Off-diagonal correlation summary before and after factor adjustment.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DecorrelationReport {
    /// Largest absolute off-diagonal correlation among the raw columns.
    pub raw_max: f64,
    /// Mean absolute off-diagonal correlation among the raw columns.
    pub raw_mean: f64,
    /// Same maxima over the idiosyncratic columns.
    pub residual_max: f64,
    pub residual_mean: f64,
    /// Columns excluded because their variance was numerically zero.
    pub skipped_raw: usize,
    pub skipped_residual: usize,
}

fn offdiag_summary(x: ArrayView2<f64>) -> (f64, f64, usize) {
    let n = x.nrows() as f64;
    let p = x.ncols();
    let means = column_means(x);
    let mut centered = x.to_owned();
    for (j, mut col) in centered.axis_iter_mut(Axis(1)).enumerate() {
        col.mapv_inplace(|v| v - means[j]);
    }
    let mut keep = Vec::new();
    let mut norms = Vec::new();
    for j in 0..p {
        let col = centered.column(j);
        let norm = col.dot(&col).sqrt();
        if norm > 1e-12 * (n.sqrt() * (1.0 + means[j].abs())) {
            keep.push(j);
            norms.push(norm);
        }
    }
    let skipped = p - keep.len();
    if keep.len() < 2 {
        return (0.0, 0.0, skipped);
    }
    let kept = centered.select(Axis(1), &keep);
    let gram = kept.t().dot(&kept);
    let mut max_abs = 0.0f64;
    let mut sum_abs = 0.0f64;
    let mut pairs = 0usize;
    for a in 0..keep.len() {
        for b in (a + 1)..keep.len() {
            let corr = (gram[[a, b]] / (norms[a] * norms[b])).abs();
            max_abs = max_abs.max(corr);
            sum_abs += corr;
            pairs += 1;
        }
    }
    (max_abs, sum_abs / pairs as f64, skipped)
}

/// Compares pairwise column correlations of the raw matrix and of its
/// idiosyncratic part; the drop is the point of the factor adjustment.
pub fn decorrelation_report(
    x: ArrayView2<f64>,
    idiosyncratic: ArrayView2<f64>,
) -> Result<DecorrelationReport> {
    check_matrix(x, "decorrelation_report")?;
    if x.dim() != idiosyncratic.dim() {
        return Err(Error::InvalidInput(format!(
            "shape mismatch: raw {:?} vs idiosyncratic {:?}",
            x.dim(),
            idiosyncratic.dim()
        )));
    }
    let (raw_max, raw_mean, skipped_raw) = offdiag_summary(x);
    let (residual_max, residual_mean, skipped_residual) = offdiag_summary(idiosyncratic);
    Ok(DecorrelationReport {
        raw_max,
        raw_mean,
        residual_max,
        residual_mean,
        skipped_raw,
        skipped_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn randn(n: usize, p: usize, rng: &mut ChaCha12Rng) -> Array2<f64> {
        Array2::from_shape_fn((n, p), |_| StandardNormal.sample(rng))
    }

    #[test]
    fn pilot_covariance_identity_construction() {
        // Centered orthogonal columns of norm sqrt(n-1) give the identity.
        let x = array![
            [1.0, 1.0],
            [-1.0, 1.0],
            [1.0, -1.0],
            [-1.0, -1.0],
        ];
        let scale = (3.0f64 / 4.0).sqrt();
        let x = x.mapv(|v| v * scale);
        let cov = pilot_covariance(x.view()).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let expected = if a == b { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(cov[[a, b]], expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn top_k_eigen_diagonal_matrix() {
        let m = array![[2.0, 0.0, 0.0], [0.0, 5.0, 0.0], [0.0, 0.0, 3.0]];
        let eig = top_k_eigen(&m, 2).unwrap();
        assert_abs_diff_eq!(eig.values[0], 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eig.values[1], 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eig.vectors[[1, 0]], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eig.vectors[[2, 1]], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn noiseless_rank_one_recovers_exactly() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let f = randn(30, 1, &mut rng);
        let b = randn(8, 1, &mut rng);
        let x = f.dot(&b.t());
        let dec = decompose(x.view(), 1).unwrap();
        let max_resid = dec
            .idiosyncratic
            .iter()
            .fold(0.0f64, |a, &v| a.max(v.abs()));
        assert!(max_resid < 1e-8, "noiseless residual {max_resid}");
        let recon = dec.factors.dot(&dec.loadings.t());
        let centered_means = column_means(x.view());
        for ((i, j), &v) in x.indexed_iter() {
            assert_abs_diff_eq!(recon[[i, j]] + centered_means[j], v, epsilon = 1e-8);
        }
    }

    #[test]
    fn reconstruction_plus_centering_is_exact() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let x = randn(40, 12, &mut rng);
        let dec = decompose(x.view(), 3).unwrap();
        let recon = dec.factors.dot(&dec.loadings.t()) + &dec.idiosyncratic;
        for ((i, j), &v) in x.indexed_iter() {
            assert_abs_diff_eq!(recon[[i, j]] + dec.col_means[j], v, epsilon = 1e-10);
        }
    }

    #[test]
    fn gram_route_matches_covariance_eigen_construction() {
        // The decomposition must agree with building B and F from the
        // covariance pilot's eigenpairs directly.
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let n = 25;
        let p = 10;
        let k = 3;
        let x = randn(n, p, &mut rng);
        let dec = decompose(x.view(), k).unwrap();

        let cov = pilot_covariance(x.view()).unwrap();
        let eig = top_k_eigen(&cov, k).unwrap();
        let means = column_means(x.view());
        let mut centered = x.clone();
        for (j, mut col) in centered.axis_iter_mut(Axis(1)).enumerate() {
            col.mapv_inplace(|v| v - means[j]);
        }
        for j in 0..k {
            assert_abs_diff_eq!(dec.eigenvalues[j], eig.values[j], epsilon = 1e-8);
        }
        // B columns: sqrt(lambda_j) xi_j, up to the sign convention.
        for j in 0..k {
            let expected = eig.vectors.column(j).mapv(|v| v * eig.values[j].sqrt());
            let got = dec.loadings.column(j);
            let dot: f64 = expected
                .iter()
                .zip(got.iter())
                .map(|(&a, &b)| a * b)
                .sum();
            let sign = if dot < 0.0 { -1.0 } else { 1.0 };
            for a in 0..p {
                assert_abs_diff_eq!(sign * got[a], expected[a], epsilon = 1e-8);
            }
        }
        // F = Y B diag(lambda)^-1, and B = Y^T F / (n-1).
        let f_expected = {
            let mut f = centered.dot(&dec.loadings);
            for (j, mut col) in f.axis_iter_mut(Axis(1)).enumerate() {
                col.mapv_inplace(|v| v / dec.eigenvalues[j]);
            }
            f
        };
        for ((i, j), &v) in dec.factors.indexed_iter() {
            assert_abs_diff_eq!(v, f_expected[[i, j]], epsilon = 1e-8);
        }
        let b_back = centered.t().dot(&dec.factors).mapv(|v| v / (n as f64 - 1.0));
        for ((i, j), &v) in dec.loadings.indexed_iter() {
            assert_abs_diff_eq!(v, b_back[[i, j]], epsilon = 1e-8);
        }
    }

    #[test]
    fn act_is_scale_invariant() {
        let mut rng = ChaCha12Rng::seed_from_u64(19);
        let x = randn(50, 20, &mut rng);
        let k0 = estimate_num_factors_act(x.view()).unwrap();
        let mut scaled = x.clone();
        for (j, mut col) in scaled.axis_iter_mut(Axis(1)).enumerate() {
            let s = 0.1 + (j as f64) * 3.3;
            col.mapv_inplace(|v| v * s);
        }
        let k1 = estimate_num_factors_act(scaled.view()).unwrap();
        assert_eq!(k0, k1);
    }

    #[test]
    fn act_rejects_constant_column() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        let mut x = randn(20, 5, &mut rng);
        x.column_mut(3).fill(2.5);
        let err = estimate_num_factors_act(x.view()).unwrap_err();
        assert!(matches!(err, Error::DegenerateColumn { .. }));
    }

    #[test]
    fn projection_of_training_rows_reproduces_the_fit() {
        let mut rng = ChaCha12Rng::seed_from_u64(29);
        let x = randn(30, 9, &mut rng);
        let dec = decompose(x.view(), 2).unwrap();
        let (u, f) = dec.project(x.view()).unwrap();
        for ((i, j), &v) in dec.factors.indexed_iter() {
            assert_abs_diff_eq!(f[[i, j]], v, epsilon = 1e-8);
        }
        for ((i, j), &v) in dec.idiosyncratic.indexed_iter() {
            assert_abs_diff_eq!(u[[i, j]], v, epsilon = 1e-8);
        }
    }

    #[test]
    fn decorrelation_report_flags_equicorrelated_columns() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let n = 300;
        let p = 30;
        let rho: f64 = 0.8;
        let mut x = Array2::zeros((n, p));
        for i in 0..n {
            let g: f64 = StandardNormal.sample(&mut rng);
            for j in 0..p {
                let e: f64 = StandardNormal.sample(&mut rng);
                x[[i, j]] = rho.sqrt() * g + (1.0 - rho).sqrt() * e;
            }
        }
        let dec = decompose(x.view(), 1).unwrap();
        let report = decorrelation_report(x.view(), dec.idiosyncratic.view()).unwrap();
        assert!(report.raw_max > 0.6, "raw max {}", report.raw_max);
        assert!(
            report.residual_mean < 0.5 * report.raw_mean,
            "means {} vs {}",
            report.residual_mean,
            report.raw_mean
        );
    }
}
