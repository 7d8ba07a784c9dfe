//! The regularization measure `nu`, the Feynman-Thomas measure `mu` and its
//! positive majorant, estimated by Monte Carlo over `S ~ nu`.

use num_complex::Complex64;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gaussian::{abs_ga_mass, b_matrix, ga_fourier, ComplexGaussianParams, GaussianFactor};
use crate::lattice::CovarianceKernel;
use crate::montecarlo::{estimate, estimate_vec, stream_rng, Estimate, DEFAULT_BATCHES};

const UNDERFLOW_GUARD: f64 = 1e-300;

fn default_batches() -> usize {
    DEFAULT_BATCHES
}

/// Regularization schedule `beta_i = c i^delta`, weight exponent `gamma`,
/// dimension and sampler settings. `betas` overrides the power law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureConfig {
    pub n: usize,
    pub c: f64,
    pub delta: f64,
    pub gamma: f64,
    pub seed: u64,
    pub samples: usize,
    #[serde(default = "default_batches")]
    pub batches: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
}

impl MeasureConfig {
    pub fn new(n: usize, c: f64, delta: f64, gamma: f64) -> Self {
        Self {
            n,
            c,
            delta,
            gamma,
            seed: 0,
            samples: 10_000,
            batches: DEFAULT_BATCHES,
            betas: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    pub fn with_betas(mut self, betas: Vec<f64>) -> Self {
        self.betas = Some(betas);
        self
    }

    /// Same schedule and streams at another dimension.
    pub fn with_dim(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }

    pub fn is_power_law(&self) -> bool {
        self.betas.is_none()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("dimension n must be positive".into()));
        }
        if self.samples == 0 {
            return Err(Error::InvalidConfig("sample count must be positive".into()));
        }
        if self.batches == 0 {
            return Err(Error::InvalidConfig("batch count must be positive".into()));
        }
        if !self.delta.is_finite() || !self.gamma.is_finite() {
            return Err(Error::InvalidConfig(
                "delta and gamma must be finite".into(),
            ));
        }
        match &self.betas {
            None if !(self.c > 0.0 && self.c.is_finite()) => Err(Error::InvalidConfig(format!(
                "scale c must be positive, got {}",
                self.c
            ))),
            Some(b) if b.len() != self.n => Err(Error::InvalidConfig(format!(
                "betas has {} entries, expected {}",
                b.len(),
                self.n
            ))),
            Some(b) if b.iter().any(|v| !(*v > 0.0 && v.is_finite())) => Err(Error::InvalidConfig(
                "betas must be positive and finite".into(),
            )),
            _ => Ok(()),
        }
    }

    /// `beta_i`, 1-based.
    pub fn beta(&self, i: usize) -> f64 {
        match &self.betas {
            Some(b) => b[i - 1],
            None => self.c * (i as f64).powf(self.delta),
        }
    }

    pub fn betas(&self) -> Vec<f64> {
        (1..=self.n).map(|i| self.beta(i)).collect()
    }

    /// Green's-function widths `alpha_i = sqrt(beta_i / 2)`.
    pub fn alphas(&self) -> Vec<f64> {
        self.betas().into_iter().map(|b| (0.5 * b).sqrt()).collect()
    }
}

/// One draw `S = diag(s)` from `nu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegSample {
    pub s: Vec<f64>,
}

impl RegSample {
    pub fn new(s: Vec<f64>) -> Result<Self> {
        if s.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Domain(
                "regularization widths must be positive".into(),
            ));
        }
        Ok(Self { s })
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }
}

/// Independent exponential widths with means `beta_i`, drawn from stream
/// `stream` of the config seed. Coordinate `i` is the `i`-th draw, so
/// configs differing only in `n` share their leading coordinates.
pub fn sample_nu(config: &MeasureConfig, stream: u64) -> RegSample {
    let mut rng = stream_rng(config.seed, stream);
    let s = (1..=config.n)
        .map(|i| {
            let beta = config.beta(i);
            loop {
                let e: f64 = Exp1.sample(&mut rng);
                let v = beta * e;
                if v >= UNDERFLOW_GUARD {
                    break v;
                }
            }
        })
        .collect();
    RegSample { s }
}

/// `M_alpha(x) = exp(-|x|/alpha) / (2 alpha)`.
pub fn green_kernel(alpha: f64, x: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    Ok((-x.abs() / alpha).exp() / (2.0 * alpha))
}

fn prepare(config: &MeasureConfig, kernel: &CovarianceKernel) -> Result<()> {
    config.validate()?;
    check_dim(config.n, kernel.dim())
}

fn mc<F>(config: &MeasureConfig, kernel: &CovarianceKernel, f: F) -> Result<Estimate>
where
    F: Fn(&ComplexGaussianParams) -> Result<Complex64> + Sync,
{
    prepare(config, kernel)?;
    estimate(config.samples, config.batches, |k| {
        let params = ComplexGaussianParams::new(sample_nu(config, k).s, kernel)?;
        f(&params)
    })
}

/// Density of `mu` at `x`: the mean of `G_{S+iK}(x)` over `S ~ nu`.
pub fn mu_density(
    config: &MeasureConfig,
    kernel: &CovarianceKernel,
    x: &[f64],
) -> Result<Estimate> {
    check_dim(config.n, x.len())?;
    mc(config, kernel, |p| GaussianFactor::new(p)?.density(x))
}

/// Fourier transform of `mu` at `xi`.
pub fn mu_fourier(
    config: &MeasureConfig,
    kernel: &CovarianceKernel,
    xi: &[f64],
) -> Result<Estimate> {
    check_dim(config.n, xi.len())?;
    mc(config, kernel, |p| ga_fourier(p, xi))
}

/// Total mass of `mu`; every sample contributes exactly one.
pub fn mu_total_mass(config: &MeasureConfig, kernel: &CovarianceKernel) -> Result<Estimate> {
    mu_fourier(config, kernel, &vec![0.0; config.n])
}

/// Density of the majorant: the mean of `|G_{S+iK}(x)|`.
pub fn aux_density(
    config: &MeasureConfig,
    kernel: &CovarianceKernel,
    x: &[f64],
) -> Result<Estimate> {
    check_dim(config.n, x.len())?;
    mc(config, kernel, |p| {
        Ok(Complex64::new(
            GaussianFactor::new(p)?.density(x)?.norm(),
            0.0,
        ))
    })
}

/// `(mu density, majorant density)` at `x` from the same `S` draws.
pub fn paired_density(
    config: &MeasureConfig,
    kernel: &CovarianceKernel,
    x: &[f64],
) -> Result<(Estimate, Estimate)> {
    check_dim(config.n, x.len())?;
    prepare(config, kernel)?;
    let v = estimate_vec(config.samples, config.batches, 2, |k| {
        let params = ComplexGaussianParams::new(sample_nu(config, k).s, kernel)?;
        let d = GaussianFactor::new(&params)?.density(x)?;
        Ok(vec![d, Complex64::new(d.norm(), 0.0)])
    })?;
    Ok((v[0], v[1]))
}

/// `Phi_n(xi)`: the mean of `mass(S) exp(-<xi, B(S) xi>/2)`.
pub fn aux_fourier(
    config: &MeasureConfig,
    kernel: &CovarianceKernel,
    xi: &[f64],
) -> Result<Estimate> {
    check_dim(config.n, xi.len())?;
    mc(config, kernel, |p| {
        let b = b_matrix(p);
        let v = nalgebra::DVector::from_column_slice(xi);
        let form = v.dot(&(&b * &v));
        Ok(Complex64::new(abs_ga_mass(p) * (-0.5 * form).exp(), 0.0))
    })
}

/// Total mass of the majorant, `E_nu sqrt|det(I - i S^{-1} K)|`.
pub fn aux_norm(config: &MeasureConfig, kernel: &CovarianceKernel) -> Result<Estimate> {
    mc(config, kernel, |p| Ok(Complex64::new(abs_ga_mass(p), 0.0)))
}

/// One CSV result row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub quantity: String,
    pub n: usize,
    pub delta: f64,
    pub gamma: f64,
    pub estimate_re: f64,
    pub estimate_im: f64,
    pub stderr: f64,
    pub samples: usize,
    pub seed: u64,
}

impl EstimateRow {
    pub fn new(quantity: &str, config: &MeasureConfig, est: &Estimate) -> Self {
        Self {
            quantity: quantity.to_string(),
            n: config.n,
            delta: config.delta,
            gamma: config.gamma,
            estimate_re: est.mean.re,
            estimate_im: est.mean.im,
            stderr: est.stderr(),
            samples: est.samples,
            seed: config.seed,
        }
    }
}
