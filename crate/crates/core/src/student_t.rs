//! Non-standardised Student-t laws and their samplers.
//!
//! Draws use the normal / chi-squared construction
//! `x = location + L z sqrt(df / u)` with `u ~ Gamma(df / 2, 2)`, which stays
//! valid for non-integer degrees of freedom.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::conjugate::symmetrize;
use crate::error::{Error, Result};
use crate::rng::RngStream;

const JITTER_ATTEMPTS: usize = 3;
const JITTER_FACTOR: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaledTDist {
    pub df: f64,
    pub location: f64,
    pub scale2: f64,
}

impl ScaledTDist {
    pub fn new(df: f64, location: f64, scale2: f64) -> Result<Self> {
        if !(df.is_finite() && df > 0.0) {
            return Err(Error::InvalidParameters(format!("df must be > 0, got {df}")));
        }
        if !location.is_finite() {
            return Err(Error::InvalidParameters("non-finite location".into()));
        }
        if !(scale2.is_finite() && scale2 > 0.0) {
            return Err(Error::InvalidParameters(format!("scale2 must be > 0, got {scale2}")));
        }
        Ok(Self {
            df,
            location,
            scale2,
        })
    }

    pub fn mean(&self) -> Option<f64> {
        (self.df > 1.0).then_some(self.location)
    }

    pub fn variance(&self) -> Option<f64> {
        (self.df > 2.0).then(|| self.df / (self.df - 2.0) * self.scale2)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let nu = self.df;
        let z2 = (x - self.location).powi(2) / self.scale2;
        ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu)
            - 0.5 * (std::f64::consts::PI * nu * self.scale2).ln()
            - 0.5 * (nu + 1.0) * (z2 / nu).ln_1p()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.standard().cdf((x - self.location) / self.scale2.sqrt())
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.location + self.scale2.sqrt() * self.standard().inverse_cdf(p)
    }

    fn standard(&self) -> StudentsT {
        StudentsT::new(0.0, 1.0, self.df).expect("validated df")
    }

    pub fn sampler(&self) -> ScaledTSampler {
        ScaledTSampler {
            location: self.location,
            scale: self.scale2.sqrt(),
            df: self.df,
            chi2: chi_squared(self.df),
        }
    }
}

fn chi_squared(df: f64) -> Gamma<f64> {
    Gamma::new(0.5 * df, 2.0).expect("df > 0")
}

#[derive(Clone, Debug)]
pub struct ScaledTSampler {
    location: f64,
    scale: f64,
    df: f64,
    chi2: Gamma<f64>,
}

impl ScaledTSampler {
    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        let u = self.chi2.sample(rng);
        self.location + self.scale * z * (self.df / u).sqrt()
    }
}

/// `count` i.i.d. draws from `dist` on the stream `rng`.
pub fn sample_scaled_t(dist: &ScaledTDist, rng: &RngStream, count: usize) -> Vec<f64> {
    let sampler = dist.sampler();
    let mut gen = rng.rng();
    (0..count).map(|_| sampler.draw(&mut gen)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultivariateTDist {
    pub df: f64,
    pub location: DVector<f64>,
    pub scale: DMatrix<f64>,
}

impl MultivariateTDist {
    pub fn new(df: f64, location: DVector<f64>, scale: DMatrix<f64>) -> Result<Self> {
        if !(df.is_finite() && df > 0.0) {
            return Err(Error::InvalidParameters(format!("df must be > 0, got {df}")));
        }
        let dim = location.len();
        if scale.nrows() != dim || scale.ncols() != dim {
            return Err(Error::Dimension {
                expected: dim,
                found: scale.nrows(),
            });
        }
        Ok(Self {
            df,
            location,
            scale,
        })
    }

    pub fn dim(&self) -> usize {
        self.location.len()
    }

    /// Law of coordinate `p`.
    pub fn marginal(&self, p: usize) -> ScaledTDist {
        ScaledTDist {
            df: self.df,
            location: self.location[p],
            scale2: self.scale[(p, p)],
        }
    }

    pub fn sampler(&self) -> Result<MultivariateTSampler> {
        Ok(MultivariateTSampler {
            location: self.location.clone(),
            factor: cholesky_lower(&self.scale)?,
            df: self.df,
            chi2: chi_squared(self.df),
        })
    }
}

/// Lower Cholesky factor of `m` after symmetrization, retrying with a small
/// diagonal jitter when the factorization fails.
pub fn cholesky_lower(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut a = m.clone();
    symmetrize(&mut a);
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite);
    }
    let dim = a.nrows();
    let jitter = JITTER_FACTOR * a.diagonal().mean().abs().max(f64::MIN_POSITIVE);
    for attempt in 0..=JITTER_ATTEMPTS {
        if attempt > 0 {
            for i in 0..dim {
                a[(i, i)] += jitter;
            }
        }
        if let Some(chol) = a.clone().cholesky() {
            return Ok(chol.l());
        }
    }
    Err(Error::NotPositiveDefinite)
}

#[derive(Clone, Debug)]
pub struct MultivariateTSampler {
    location: DVector<f64>,
    factor: DMatrix<f64>,
    df: f64,
    chi2: Gamma<f64>,
}

impl MultivariateTSampler {
    pub fn dim(&self) -> usize {
        self.location.len()
    }

    /// Writes one draw into `out`, using `z` (length P) as scratch space.
    #[inline]
    pub fn draw_into(&self, rng: &mut ChaCha8Rng, z: &mut [f64], out: &mut [f64]) {
        let dim = self.dim();
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        let w = (self.df / self.chi2.sample(rng)).sqrt();
        for i in 0..dim {
            let mut acc = 0.0;
            for j in 0..=i {
                acc += self.factor[(i, j)] * z[j];
            }
            out[i] = self.location[i] + w * acc;
        }
    }
}

/// `count` draws from `dist`, one per row of the returned matrix.
pub fn sample_multivariate_t(
    dist: &MultivariateTDist,
    rng: &RngStream,
    count: usize,
) -> Result<DMatrix<f64>> {
    let sampler = dist.sampler()?;
    let dim = dist.dim();
    let mut gen = rng.rng();
    let mut out = DMatrix::zeros(count, dim);
    let mut z = vec![0.0; dim];
    let mut row = vec![0.0; dim];
    for r in 0..count {
        sampler.draw_into(&mut gen, &mut z, &mut row);
        for (p, v) in row.iter().enumerate() {
            out[(r, p)] = *v;
        }
    }
    Ok(out)
}
