//! Closed-form conjugate updates for Gaussian data.
//!
//! The univariate model puts a Normal-Inverse-Gamma prior on `(mu, sigma^2)`,
//! the multivariate model a Normal-Inverse-Wishart prior on `(mu, Sigma)`.
//! Both are closed under updating with complete Gaussian observations, and the
//! marginal posterior of the mean is a (multivariate) Student-t.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::student_t::{MultivariateTDist, ScaledTDist};

/// Normal-Inverse-Gamma hyper-parameters, prior or posterior.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NigParams {
    pub mu: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl NigParams {
    pub fn new(mu: f64, lambda: f64, alpha: f64, beta: f64) -> Result<Self> {
        let p = Self {
            mu,
            lambda,
            alpha,
            beta,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() {
            return Err(Error::InvalidParameters(format!("mu must be finite, got {}", self.mu)));
        }
        for (name, v) in [("lambda", self.lambda), ("alpha", self.alpha), ("beta", self.beta)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameters(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Joint density of `(mu, sigma2)` under these parameters.
    pub fn density(&self, mu: f64, sigma2: f64) -> f64 {
        if sigma2 <= 0.0 {
            return 0.0;
        }
        let ln = 0.5 * self.lambda.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
            + self.alpha * self.beta.ln()
            - ln_gamma(self.alpha)
            - (self.alpha + 1.5) * sigma2.ln()
            - (2.0 * self.beta + self.lambda * (mu - self.mu).powi(2)) / (2.0 * sigma2);
        ln.exp()
    }

    /// The equivalent one-dimensional Normal-Inverse-Wishart (`nu = 2 alpha`,
    /// `Sigma = 2 beta`).
    pub fn to_niw(&self) -> NiwParams {
        NiwParams {
            mu: DVector::from_element(1, self.mu),
            lambda: self.lambda,
            sigma: DMatrix::from_element(1, 1, 2.0 * self.beta),
            nu: 2.0 * self.alpha,
        }
    }
}

/// Posterior NIG parameters after observing `data`.
pub fn nig_update(prior: &NigParams, data: &[f64]) -> Result<NigParams> {
    prior.validate()?;
    if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite observation {bad}")));
    }
    if data.is_empty() {
        return Ok(*prior);
    }
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let ss: f64 = data.iter().map(|y| (y - mean).powi(2)).sum();
    let lambda_n = prior.lambda + n;
    Ok(NigParams {
        mu: (n * mean + prior.lambda * prior.mu) / lambda_n,
        lambda: lambda_n,
        alpha: prior.alpha + 0.5 * n,
        beta: prior.beta
            + 0.5 * ss
            + prior.lambda * n / (2.0 * lambda_n) * (mean - prior.mu).powi(2),
    })
}

/// Marginal posterior of the mean: `T_{2 alpha}(mu, beta / (alpha lambda))`.
pub fn nig_marginal_mean(posterior: &NigParams) -> Result<ScaledTDist> {
    posterior.validate()?;
    ScaledTDist::new(
        2.0 * posterior.alpha,
        posterior.mu,
        posterior.beta / (posterior.alpha * posterior.lambda),
    )
}

/// Posterior predictive law of one new observation:
/// `T_{2 alpha}(mu, beta (lambda + 1) / (alpha lambda))`.
pub fn nig_predictive(posterior: &NigParams) -> Result<ScaledTDist> {
    posterior.validate()?;
    ScaledTDist::new(
        2.0 * posterior.alpha,
        posterior.mu,
        posterior.beta * (posterior.lambda + 1.0) / (posterior.alpha * posterior.lambda),
    )
}

/// Normal-Inverse-Wishart hyper-parameters, prior or posterior.
#[derive(Clone, Debug, PartialEq)]
pub struct NiwParams {
    pub mu: DVector<f64>,
    pub lambda: f64,
    pub sigma: DMatrix<f64>,
    pub nu: f64,
}

impl NiwParams {
    pub fn new(mu: DVector<f64>, lambda: f64, sigma: DMatrix<f64>, nu: f64) -> Result<Self> {
        let p = Self {
            mu,
            lambda,
            sigma,
            nu,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if dim == 0 {
            return Err(Error::InvalidParameters("empty mean vector".into()));
        }
        if self.sigma.nrows() != dim || self.sigma.ncols() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: self.sigma.nrows().max(self.sigma.ncols()),
            });
        }
        if self.mu.iter().chain(self.sigma.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameters("non-finite NIW parameter".into()));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::InvalidParameters(format!(
                "lambda must be > 0, got {}",
                self.lambda
            )));
        }
        if !(self.nu.is_finite() && self.nu > dim as f64 - 1.0) {
            return Err(Error::InvalidParameters(format!(
                "nu must exceed P - 1 = {}, got {}",
                dim - 1,
                self.nu
            )));
        }
        let scale = self.sigma.amax().max(1.0);
        if (&self.sigma - self.sigma.transpose()).amax() > 1e-10 * scale {
            return Err(Error::InvalidParameters("Sigma is not symmetric".into()));
        }
        if self.sigma.clone().cholesky().is_none() {
            return Err(Error::InvalidParameters("Sigma is not positive-definite".into()));
        }
        Ok(())
    }
}

fn check_matrix(data: &DMatrix<f64>, dim: usize) -> Result<()> {
    if data.ncols() != dim {
        return Err(Error::Dimension {
            expected: dim,
            found: data.ncols(),
        });
    }
    if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite observation {bad}")));
    }
    Ok(())
}

fn column_means(data: &DMatrix<f64>) -> DVector<f64> {
    let n = data.nrows() as f64;
    DVector::from_iterator(data.ncols(), data.column_iter().map(|c| c.sum() / n))
}

/// Sum of outer products of the rows of `data` about `center`.
pub fn scatter_about(data: &DMatrix<f64>, center: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_matrix(data, center.len())?;
    let mut centered = data.clone();
    for mut row in centered.row_iter_mut() {
        row -= center.transpose();
    }
    Ok(centered.transpose() * &centered)
}

/// Posterior NIW parameters after observing the rows of `data` (N x P).
pub fn niw_update(prior: &NiwParams, data: &DMatrix<f64>) -> Result<NiwParams> {
    prior.validate()?;
    check_matrix(data, prior.dim())?;
    if data.nrows() == 0 {
        return Ok(prior.clone());
    }
    let n = data.nrows() as f64;
    let mean = column_means(data);
    let lambda_n = prior.lambda + n;
    let shift = &mean - &prior.mu;
    let mut sigma = &prior.sigma
        + scatter_about(data, &mean)?
        + (prior.lambda * n / lambda_n) * (&shift * shift.transpose());
    symmetrize(&mut sigma);
    Ok(NiwParams {
        mu: (n * mean + prior.lambda * &prior.mu) / lambda_n,
        lambda: lambda_n,
        sigma,
        nu: prior.nu + n,
    })
}

/// Marginal posterior of the mean vector:
/// `T_{nu - P + 1}(mu, Sigma / (lambda (nu - P + 1)))`.
pub fn niw_marginal_mean(posterior: &NiwParams) -> Result<MultivariateTDist> {
    let dim = posterior.dim();
    let df = posterior.nu - dim as f64 + 1.0;
    if !(df > 0.0) {
        return Err(Error::InsufficientDegreesOfFreedom {
            df,
            nu: posterior.nu,
            dim,
        });
    }
    posterior.validate()?;
    let scale = &posterior.sigma / (posterior.lambda * df);
    MultivariateTDist::new(df, posterior.mu.clone(), scale)
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn unit_prior() -> NigParams {
        NigParams::new(0.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn empty_data_keeps_prior() {
        assert_eq!(nig_update(&unit_prior(), &[]).unwrap(), unit_prior());
    }

    #[test]
    fn hand_evaluated_update() {
        let post = nig_update(&unit_prior(), &[2.0, 2.0, 2.0]).unwrap();
        assert_relative_eq!(post.mu, 1.5, epsilon = 1e-15);
        assert_relative_eq!(post.lambda, 4.0, epsilon = 1e-15);
        assert_relative_eq!(post.alpha, 2.5, epsilon = 1e-15);
        assert_relative_eq!(post.beta, 2.5, epsilon = 1e-15);
    }

    #[test]
    fn hand_evaluated_marginal() {
        let post = NigParams::new(1.5, 4.0, 2.5, 2.5).unwrap();
        let t = nig_marginal_mean(&post).unwrap();
        assert_eq!(t.df, 5.0);
        assert_eq!(t.location, 1.5);
        assert_relative_eq!(t.scale2, 0.25, epsilon = 1e-15);

        let unit = NigParams::new(-3.0, 2.0, 4.0, 8.0).unwrap();
        assert_relative_eq!(nig_marginal_mean(&unit).unwrap().scale2, 1.0);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            nig_update(&unit_prior(), &[1.0, f64::NAN]),
            Err(Error::InvalidInput(_))
        ));
        assert!(NigParams::new(0.0, 0.0, 1.0, 1.0).is_err());
        assert!(NigParams::new(0.0, 1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn niw_hand_evaluated_update() {
        let prior = NiwParams::new(DVector::zeros(2), 1.0, DMatrix::identity(2, 2), 4.0).unwrap();
        let data = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 2.0]);
        let post = niw_update(&prior, &data).unwrap();
        assert_relative_eq!(post.mu, DVector::from_vec(vec![2.0 / 3.0, 2.0 / 3.0]), epsilon = 1e-15);
        assert_eq!(post.lambda, 3.0);
        assert_eq!(post.nu, 6.0);
        let expected = DMatrix::identity(2, 2)
            + DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 2.0])
            + (2.0 / 3.0) * DMatrix::from_element(2, 2, 1.0);
        assert_relative_eq!(post.sigma, expected, epsilon = 1e-14);

        let t = niw_marginal_mean(&post).unwrap();
        assert_eq!(t.df, 5.0);
        assert_relative_eq!(t.scale, expected / 15.0, epsilon = 1e-14);
    }

    #[test]
    fn niw_empty_data_keeps_prior() {
        let prior = NiwParams::new(DVector::zeros(3), 2.0, DMatrix::identity(3, 3), 5.0).unwrap();
        assert_eq!(niw_update(&prior, &DMatrix::zeros(0, 3)).unwrap(), prior);
    }

    #[test]
    fn niw_dimension_and_finiteness_errors() {
        let prior = NiwParams::new(DVector::zeros(2), 1.0, DMatrix::identity(2, 2), 4.0).unwrap();
        assert!(matches!(
            niw_update(&prior, &DMatrix::zeros(3, 3)),
            Err(Error::Dimension { expected: 2, found: 3 })
        ));
        let mut bad = DMatrix::zeros(2, 2);
        bad[(1, 1)] = f64::INFINITY;
        assert!(matches!(niw_update(&prior, &bad), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn insufficient_df_is_reported() {
        // nu_N - P + 1 = 2 - 3 + 1 = 0
        let post = NiwParams {
            mu: DVector::zeros(3),
            lambda: 1.0,
            sigma: DMatrix::identity(3, 3),
            nu: 2.0,
        };
        assert!(matches!(
            niw_marginal_mean(&post),
            Err(Error::InsufficientDegreesOfFreedom { .. })
        ));
    }

    #[test]
    fn scatter_two_points() {
        let x = DMatrix::from_column_slice(2, 1, &[0.0, 2.0]);
        let s = scatter_about(&x, &DVector::from_element(1, 0.0)).unwrap();
        assert_eq!(s[(0, 0)], 4.0);
        let centered = scatter_about(&x, &DVector::from_element(1, 1.0)).unwrap();
        // 2 * (1 - 0)^2 + 2
        assert_eq!(2.0 * 1.0 + centered[(0, 0)], 4.0);
    }

    #[test]
    fn single_observation_is_proper() {
        let post = nig_update(&unit_prior(), &[3.0]).unwrap();
        assert!(nig_marginal_mean(&post).is_ok());
        let prior = NiwParams::new(DVector::zeros(2), 1.0, DMatrix::identity(2, 2), 4.0).unwrap();
        let post = niw_update(&prior, &DMatrix::from_row_slice(1, 2, &[1.0, -1.0])).unwrap();
        assert!(niw_marginal_mean(&post).is_ok());
    }

    fn finite_vec(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-20.0..20.0f64, 0..max_len)
    }

    proptest! {
        #[test]
        fn nig_sequential_equals_batch(
            mu in -5.0..5.0f64, lambda in 0.1..5.0f64, alpha in 0.1..5.0f64, beta in 0.1..5.0f64,
            first in finite_vec(8), second in finite_vec(8),
        ) {
            let prior = NigParams::new(mu, lambda, alpha, beta).unwrap();
            let seq = nig_update(&nig_update(&prior, &first).unwrap(), &second).unwrap();
            let all: Vec<f64> = first.iter().chain(&second).copied().collect();
            let batch = nig_update(&prior, &all).unwrap();
            prop_assert!((seq.mu - batch.mu).abs() < 1e-10);
            prop_assert!((seq.lambda - batch.lambda).abs() < 1e-12);
            prop_assert!((seq.alpha - batch.alpha).abs() < 1e-12);
            prop_assert!((seq.beta - batch.beta).abs() < 1e-9 * batch.beta.max(1.0));
        }

        #[test]
        fn niw_sequential_equals_batch(
            p in 1usize..4, n1 in 0usize..6, n2 in 0usize..6, seed in 0u64..1000,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let prior = NiwParams::new(
                DVector::from_fn(p, |_, _| rng.random_range(-2.0..2.0)),
                rng.random_range(0.5..3.0),
                DMatrix::identity(p, p) * rng.random_range(0.5..3.0),
                p as f64 + 2.0,
            ).unwrap();
            let a = DMatrix::from_fn(n1, p, |_, _| rng.random_range(-5.0..5.0));
            let b = DMatrix::from_fn(n2, p, |_, _| rng.random_range(-5.0..5.0));
            let seq = niw_update(&niw_update(&prior, &a).unwrap(), &b).unwrap();
            let mut all = DMatrix::zeros(n1 + n2, p);
            all.rows_mut(0, n1).copy_from(&a);
            all.rows_mut(n1, n2).copy_from(&b);
            let batch = niw_update(&prior, &all).unwrap();
            prop_assert!((&seq.mu - &batch.mu).amax() < 1e-10);
            prop_assert!((&seq.sigma - &batch.sigma).amax() < 1e-9 * batch.sigma.amax());
            prop_assert!((seq.nu - batch.nu).abs() < 1e-12 * batch.nu);
            prop_assert!((seq.lambda - batch.lambda).abs() < 1e-12 * batch.lambda);
        }

        #[test]
        fn niw_reduces_to_nig(
            mu in -5.0..5.0f64, lambda in 0.1..5.0f64, alpha in 0.6..5.0f64, beta in 0.1..5.0f64,
            data in finite_vec(10),
        ) {
            let nig = NigParams::new(mu, lambda, alpha, beta).unwrap();
            let nig_post = nig_update(&nig, &data).unwrap();
            let niw_post = niw_update(&nig.to_niw(), &DMatrix::from_column_slice(data.len(), 1, &data)).unwrap();
            prop_assert!((niw_post.mu[0] - nig_post.mu).abs() <= 1e-12 * nig_post.mu.abs().max(1.0));
            prop_assert!((niw_post.lambda - nig_post.lambda).abs() <= 1e-12);
            prop_assert!((niw_post.nu - 2.0 * nig_post.alpha).abs() <= 1e-12);
            prop_assert!((niw_post.sigma[(0, 0)] - 2.0 * nig_post.beta).abs() <= 1e-12 * nig_post.beta.max(1.0));

            let t_uni = nig_marginal_mean(&nig_post).unwrap();
            let t_multi = niw_marginal_mean(&niw_post).unwrap().marginal(0);
            prop_assert!((t_uni.df - t_multi.df).abs() <= 1e-12);
            prop_assert!((t_uni.location - t_multi.location).abs() <= 1e-12 * t_uni.location.abs().max(1.0));
            prop_assert!((t_uni.scale2 - t_multi.scale2).abs() <= 1e-12 * t_uni.scale2.max(1.0));
        }

        #[test]
        fn scatter_decomposition(p in prop::sample::select(vec![1usize, 2, 5]), n in 1usize..=10, seed in 0u64..10_000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(-10.0..10.0));
            let mu = DVector::from_fn(p, |_, _| rng.random_range(-10.0..10.0));
            let mean = column_means(&x);
            let lhs = scatter_about(&x, &mu).unwrap();
            let d = &mean - &mu;
            let rhs = n as f64 * (&d * d.transpose()) + scatter_about(&x, &mean).unwrap();
            let rel = (&lhs - &rhs).amax() / lhs.amax().max(f64::MIN_POSITIVE);
            prop_assert!(rel < 1e-10, "relative error {rel}");
        }
    }
}
