//! Lattice scattering: the classical-path substitution, the adjoint wave
//! operator kernel and the S-matrix under adiabatic switching
//! `lambda_j = e^{-eps |j|}`, extrapolated to `eps = 0`.
//!
//! The two-sided lattice `j = -n+1..=n` is anchored at `x_{-n} = 0`, so site
//! `j` is coordinate `j + n` of an ordinary unit-spacing min-kernel lattice.
//! Both pairings are estimated as `1 + <f - 1, F>`: the free part
//! `<1, F> = 1` is exact, and the Monte Carlo only sees the deviation.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::extrapolate::zero_weights;
use crate::lattice::{mbc_action, Boundary, CovarianceKernel, TimeGrid};
use crate::measure::MeasureConfig;
use crate::montecarlo::Estimate;
use crate::pairing::{pair_functional, PathFunctional, PotentialModel, PotentialPhase};

/// Per-`eps` seed offset; keeps the runs at different `eps` on unrelated streams.
const EPS_SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

/// Estimates at adjacent `eps` whose difference exceeds this many combined
/// standard errors count as a significant step.
const MONOTONE_SIGMAS: f64 = 3.0;

fn default_eps_list() -> Vec<f64> {
    vec![0.4, 0.2, 0.1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterConfig {
    /// Half-width `n`; the two-sided lattice has sites `-n+1..=n`.
    pub n_half: usize,
    pub k_in: f64,
    pub k_out: f64,
    pub x0: f64,
    #[serde(default = "default_eps_list")]
    pub eps_list: Vec<f64>,
    /// Pairing backend; its dimension is overridden per quantity.
    pub mc: MeasureConfig,
}

impl ScatterConfig {
    pub fn new(n_half: usize, k_in: f64, k_out: f64, x0: f64, mc: MeasureConfig) -> Self {
        Self {
            n_half,
            k_in,
            k_out,
            x0,
            eps_list: default_eps_list(),
            mc,
        }
    }

    pub fn with_eps(mut self, eps_list: Vec<f64>) -> Self {
        self.eps_list = eps_list;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_half == 0 {
            return Err(Error::InvalidConfig("n_half must be positive".into()));
        }
        if ![self.k_in, self.k_out, self.x0]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::InvalidConfig(
                "momenta and offset must be finite".into(),
            ));
        }
        if self.eps_list.is_empty() {
            return Err(Error::InvalidConfig("eps_list must not be empty".into()));
        }
        if self.eps_list.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::InvalidConfig(
                "eps values must be positive and finite".into(),
            ));
        }
        if self.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidConfig(
                "eps_list must be strictly decreasing".into(),
            ));
        }
        Ok(())
    }

    /// Lattice labels `j = -n+1..=n` of the two-sided coordinates.
    pub fn two_sided_sites(&self) -> impl Iterator<Item = i64> {
        let n = self.n_half as i64;
        -n + 1..=n
    }

    /// Classical-trajectory offsets `x0 + k_in min(j, 0) + k_out max(j, 0)`.
    pub fn two_sided_shifts(&self) -> Vec<f64> {
        self.two_sided_sites()
            .map(|j| self.x0 + self.k_in * j.min(0) as f64 + self.k_out * j.max(0) as f64)
            .collect()
    }

    pub fn two_sided_lambdas(&self, eps: f64) -> Vec<f64> {
        self.two_sided_sites()
            .map(|j| (-eps * j.abs() as f64).exp())
            .collect()
    }

    /// `e^{-i (k_out - k_in) x0}`, the free S-matrix.
    pub fn free_phase(&self) -> Complex64 {
        Complex64::from_polar(1.0, -(self.k_out - self.k_in) * self.x0)
    }
}

/// Both sides of the classical-path substitution on the unit lattice with
/// horizon `T`: the mixed action of `x_i + x0 + v i` (with `x_0 = 0`,
/// `v_T = v`) and `(1/2) sum (x_i - x_{i-1})^2 + v^2 T / 2 + v (x_n - x_0)`.
/// Values are the real coefficients of `i`.
pub fn shifted_action_identity_check(
    n: usize,
    v: f64,
    x0: f64,
    path: &[f64],
    horizon: f64,
) -> Result<(f64, f64)> {
    check_dim(n, path.len())?;
    if n == 0 || !(horizon > n as f64) {
        return Err(Error::InvalidGrid(format!(
            "need n >= 1 and T > n, got n = {n}, T = {horizon}"
        )));
    }
    let shifted: Vec<f64> = path
        .iter()
        .enumerate()
        .map(|(i, x)| x + x0 + v * (i + 1) as f64)
        .collect();
    let unit = |v_t| {
        TimeGrid::new(
            (1..=n).map(|i| i as f64).collect(),
            horizon,
            Boundary::Mixed { v_t },
        )
    };
    // The action only sees increments, so the constant x0 is taken off
    // before handing the path to an action pinned at the origin.
    let relative: Vec<f64> = shifted.iter().map(|y| y - x0).collect();
    let lhs = mbc_action(&unit(v)?, &relative)?;
    let fluctuation = mbc_action(&unit(0.0)?, path)?;
    let rhs = fluctuation + 0.5 * v * v * horizon + v * path[n - 1];
    Ok((lhs, rhs))
}

/// `f - 1` for a potential phase `f`; `D 1 = 1`.
struct Deviation<'p>(PotentialPhase<'p>);

impl PathFunctional for Deviation<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn value(&self, x: &[f64]) -> Complex64 {
        self.0.value(x) - 1.0
    }

    fn apply_d(&self, betas: &[f64], x: &[f64]) -> Complex64 {
        self.0.apply_d(betas, x) - 1.0
    }
}

/// `prefactor (1 + <f - 1, F>)` with `f = exp(-i sum lambda_j V(x_j + c_j))`.
fn shifted_pairing(
    mc: &MeasureConfig,
    pot: &PotentialModel,
    lambdas: Vec<f64>,
    shifts: Vec<f64>,
    prefactor: Complex64,
) -> Result<Estimate> {
    let n = lambdas.len();
    if pot.is_zero() {
        return Ok(Estimate::exact(prefactor, mc.samples));
    }
    let kernel = CovarianceKernel::min_kernel(n);
    let f = Deviation(PotentialPhase::with_shifts(pot, lambdas, shifts)?);
    let mut est = pair_functional(&mc.with_dim(n), &kernel, &f)?.estimate;
    est.mean += 1.0;
    Ok(est.scale(prefactor))
}

/// Kernel of the adjoint wave operator at switching rate `eps`:
/// `<exp(-i sum_{j=1}^n V(x_j + x0 + k_out j) lambda_j - i k_out x0), F>` on the
/// one-sided lattice `j = 1..=n_half`.
pub fn wave_operator_adjoint_at(
    config: &ScatterConfig,
    pot: &PotentialModel,
    eps: f64,
) -> Result<Estimate> {
    config.validate()?;
    pot.validate()?;
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "eps must be non-negative, got {eps}"
        )));
    }
    let sites = 1..=config.n_half;
    let lambdas = sites.clone().map(|j| (-eps * j as f64).exp()).collect();
    let shifts = sites.map(|j| config.x0 + config.k_out * j as f64).collect();
    let prefactor = Complex64::from_polar(1.0, -config.k_out * config.x0);
    shifted_pairing(&config.mc, pot, lambdas, shifts, prefactor)
}

/// [`wave_operator_adjoint_at`] at the smallest configured `eps`.
pub fn wave_operator_adjoint(config: &ScatterConfig, pot: &PotentialModel) -> Result<Estimate> {
    config.validate()?;
    let eps = *config.eps_list.last().expect("validated non-empty");
    wave_operator_adjoint_at(config, pot, eps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SMatrixResult {
    pub eps: Vec<f64>,
    pub estimates: Vec<Complex64>,
    pub stderr: Vec<f64>,
    pub extrapolated: Complex64,
    pub extrapolated_stderr: f64,
    pub reliable: bool,
    pub warnings: Vec<String>,
}

/// S-matrix element at one switching rate, on its own seed.
pub fn s_matrix_at(
    config: &ScatterConfig,
    pot: &PotentialModel,
    eps: f64,
    seed: u64,
) -> Result<Estimate> {
    config.validate()?;
    pot.validate()?;
    let mc = config.mc.clone().with_seed(seed);
    shifted_pairing(
        &mc,
        pot,
        config.two_sided_lambdas(eps),
        config.two_sided_shifts(),
        config.free_phase(),
    )
}

/// Seed used for the `idx`-th entry of `eps_list`.
pub fn eps_seed(base: u64, idx: usize) -> u64 {
    base.wrapping_add((idx as u64).wrapping_mul(EPS_SEED_STRIDE))
}

/// True if some component of the sequence turns around with both adjacent
/// steps beyond [`MONOTONE_SIGMAS`] combined standard errors.
fn significant_reversal(values: &[Estimate]) -> bool {
    type Part = fn(&Estimate) -> (f64, f64);
    let parts: [Part; 2] = [|e| (e.mean.re, e.stderr_re), |e| (e.mean.im, e.stderr_im)];
    parts.iter().any(|part| {
        let steps: Vec<f64> = values
            .windows(2)
            .map(|w| {
                let ((a, sa), (b, sb)) = (part(&w[0]), part(&w[1]));
                let d = b - a;
                if d.abs() > MONOTONE_SIGMAS * sa.hypot(sb) {
                    d.signum()
                } else {
                    0.0
                }
            })
            .collect();
        steps.windows(2).any(|s| s[0] * s[1] < 0.0)
    })
}

/// `<exp(-i sum_j V(x_j + c_j) lambda_j) e^{-i (k_out - k_in) x0}, F^sc>` per `eps`
/// and its polynomial extrapolation to `eps = 0`.
pub fn s_matrix(config: &ScatterConfig, pot: &PotentialModel) -> Result<SMatrixResult> {
    config.validate()?;
    pot.validate()?;
    let per_eps: Vec<Estimate> = config
        .eps_list
        .par_iter()
        .enumerate()
        .map(|(idx, &eps)| s_matrix_at(config, pot, eps, eps_seed(config.mc.seed, idx)))
        .collect::<Result<_>>()?;

    let weights = zero_weights(&config.eps_list);
    let extrapolated: Complex64 = weights.iter().zip(&per_eps).map(|(w, e)| e.mean * *w).sum();
    let var = |f: fn(&Estimate) -> f64| {
        weights
            .iter()
            .zip(&per_eps)
            .map(|(w, e)| (w * f(e)).powi(2))
            .sum::<f64>()
    };
    let extrapolated_stderr = (var(|e| e.stderr_re) + var(|e| e.stderr_im)).sqrt();

    let mut warnings = Vec::new();
    if significant_reversal(&per_eps) {
        warnings.push("estimates are not monotone in eps beyond Monte Carlo error".to_string());
    }
    if !pot.decays() {
        warnings.push(
            "potential does not decay; the eps -> 0 limit is not expected to exist".to_string(),
        );
    }
    Ok(SMatrixResult {
        eps: config.eps_list.clone(),
        estimates: per_eps.iter().map(|e| e.mean).collect(),
        stderr: per_eps.iter().map(Estimate::stderr).collect(),
        extrapolated,
        extrapolated_stderr,
        reliable: warnings.is_empty(),
        warnings,
    })
}
