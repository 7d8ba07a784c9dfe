//! Convergence diagnostics: kappa sums and the determinant majorant,
//! Hilbert-Schmidt norms, the two summability conditions, the existence
//! check and the tail lemma.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::lattice::{CovarianceKernel, KernelKind};
use crate::measure::{MeasureConfig, RegSample};
use crate::montecarlo::stream_rng;

/// `(1 - e^{-1/2})^{-1}`.
pub const SAZONOV_CONSTANT: f64 = 2.541_494_082_536_798;

/// Default largest `n` for partial-sum scans.
pub const DEFAULT_SCAN_MAX: usize = 1 << 14;

/// Largest `n` for scans of series diverging at the harmonic rate.
pub const SLOW_SCAN_MAX: usize = 1 << 18;

const BOUNDARY_TOL: f64 = 1e-12;

/// The weighted space `l^2_gamma` with `||xi||^2 = sum i^gamma xi_i^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedNorm {
    pub gamma: f64,
}

impl WeightedNorm {
    pub fn new(gamma: f64) -> Self {
        Self { gamma }
    }

    pub fn norm_sq(&self, xi: &[f64]) -> f64 {
        xi.iter()
            .enumerate()
            .map(|(i, x)| ((i + 1) as f64).powf(self.gamma) * x * x)
            .sum()
    }

    /// Norm in the dual space `l^2_{-gamma}`.
    pub fn dual_norm_sq(&self, x: &[f64]) -> f64 {
        WeightedNorm::new(-self.gamma).norm_sq(x)
    }

    /// Orthonormal basis vector `e_i` (1-based), `(e_i)_j = delta_ij j^{-gamma/2}`.
    pub fn basis_vector(&self, i: usize, n: usize) -> Vec<f64> {
        (1..=n)
            .map(|j| {
                if j == i {
                    (j as f64).powf(-0.5 * self.gamma)
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// `kappa_i = sqrt(sum_j K_ij^2 / (beta_i beta_j))`.
pub fn kappa(config: &MeasureConfig, kernel: &CovarianceKernel) -> Result<Vec<f64>> {
    config.validate()?;
    check_dim(config.n, kernel.dim())?;
    let betas = config.betas();
    Ok((0..config.n)
        .map(|i| {
            let s: f64 = (0..config.n)
                .map(|j| kernel.get(i, j).powi(2) / betas[j])
                .sum();
            (s / betas[i]).sqrt()
        })
        .collect())
}

/// `kappa` for the unit min-kernel in `O(n)`:
/// `sum_j min(i,j)^2 / beta_j = sum_{j<i} j^2/beta_j + i^2 sum_{j>=i} 1/beta_j`.
pub fn kappa_min_kernel(config: &MeasureConfig) -> Vec<f64> {
    let n = config.n;
    let betas = config.betas();
    let mut tail = vec![0.0; n + 1];
    for j in (0..n).rev() {
        tail[j] = tail[j + 1] + 1.0 / betas[j];
    }
    let mut head = 0.0;
    (0..n)
        .map(|i| {
            let fi = (i + 1) as f64;
            let v = ((head + fi * fi * tail[i]) / betas[i]).sqrt();
            head += fi * fi / betas[i];
            v
        })
        .collect()
}

/// `sum_i kappa_i^{(n)}` for the unit min-kernel at each requested `n`.
pub fn kappa_sum_partials(config: &MeasureConfig, ns: &[usize]) -> Vec<(usize, f64)> {
    ns.iter()
        .map(|&n| (n, kappa_min_kernel(&config.with_dim(n)).iter().sum()))
        .collect()
}

/// `prod_i sqrt(sum_j |A_ij|^2)`.
pub fn hadamard_bound(matrix: &DMatrix<Complex64>) -> f64 {
    matrix
        .row_iter()
        .map(|r| r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .product()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HadamardReport {
    pub trials: usize,
    pub violations: usize,
    /// Largest `|det| / bound` seen.
    pub worst_ratio: f64,
}

/// Check `|det A| <= hadamard_bound(A)` on random complex Gaussian matrices
/// of dimension `1..=n_max`.
pub fn hadamard_trials(trials: usize, n_max: usize, seed: u64) -> HadamardReport {
    let mut report = HadamardReport {
        trials,
        violations: 0,
        worst_ratio: 0.0,
    };
    for t in 0..trials {
        let mut rng = stream_rng(seed, t as u64);
        let n = rng.random_range(1..=n_max);
        let m = DMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        });
        let ratio = m.clone().lu().determinant().norm() / hadamard_bound(&m);
        report.worst_ratio = report.worst_ratio.max(ratio);
        if ratio > 1.0 + 1e-12 {
            report.violations += 1;
        }
    }
    report
}

/// Upper bounds for the majorant norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Majorant {
    /// `exp((9/4) sum kappa_i)`.
    pub exponential: f64,
    /// `prod (1 + (9/4) kappa_i)`.
    pub product: f64,
}

pub fn aux_norm_majorant(config: &MeasureConfig, kernel: &CovarianceKernel) -> Result<Majorant> {
    let k = kappa(config, kernel)?;
    Ok(Majorant {
        exponential: (2.25 * k.iter().sum::<f64>()).exp(),
        product: k.iter().map(|v| 1.0 + 2.25 * v).product(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Analytic {
    Converges,
    Diverges,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceVerdict {
    pub analytic: Analytic,
    /// `(n, partial sum)` at powers of two.
    pub partial_sums: Vec<(usize, f64)>,
    /// Partial sum at the largest `n` over the one at half of it.
    pub growth_ratio: f64,
    /// Divergence at the harmonic rate; the ratio test cannot see it.
    pub slow: bool,
}

impl ConvergenceVerdict {
    fn new(analytic: Analytic, partial_sums: Vec<(usize, f64)>, slow: bool) -> Self {
        let m = partial_sums.len();
        let growth_ratio = if m >= 2 {
            partial_sums[m - 1].1 / partial_sums[m - 2].1
        } else {
            f64::NAN
        };
        Self {
            analytic,
            partial_sums,
            growth_ratio,
            slow,
        }
    }

    /// Ratio of the last two dyadic increments of the partial sums.
    pub fn increment_ratio(&self) -> f64 {
        let p = &self.partial_sums;
        let m = p.len();
        if m < 3 {
            return f64::NAN;
        }
        (p[m - 1].1 - p[m - 2].1) / (p[m - 2].1 - p[m - 3].1)
    }

    /// Does the numeric trend agree with the analytic verdict? Convergent
    /// series must have growth ratio below 1.05, divergent ones above 1.2;
    /// slowly divergent ones must have dyadic increments that do not decay.
    pub fn trend_consistent(&self) -> bool {
        match self.analytic {
            Analytic::Converges => self.growth_ratio < 1.05,
            Analytic::Diverges if self.slow => self.increment_ratio() >= 0.9,
            Analytic::Diverges => self.growth_ratio > 1.2,
            Analytic::Inconclusive => true,
        }
    }
}

fn dyadic_points(n_max: usize) -> Vec<usize> {
    let mut pts = Vec::new();
    let mut n = 1;
    while n < n_max {
        pts.push(n);
        n *= 2;
    }
    pts.push(n_max);
    pts
}

fn scan_limit(config: &MeasureConfig, n_max: usize) -> usize {
    match &config.betas {
        Some(b) => n_max.min(b.len()),
        None => n_max,
    }
    .max(1)
}

/// `sum_i beta_i / i^gamma`: converges iff `gamma - delta > 1` for the power
/// schedule.
pub fn condition1(config: &MeasureConfig, n_max: usize) -> ConvergenceVerdict {
    let n_max = scan_limit(config, n_max);
    let full = config.with_dim(n_max);
    let mut partial = Vec::new();
    let mut sum = 0.0;
    let pts = dyadic_points(n_max);
    let mut next = pts.iter().peekable();
    for i in 1..=n_max {
        sum += full.beta(i) / (i as f64).powf(config.gamma);
        if next.peek() == Some(&&i) {
            partial.push((i, sum));
            next.next();
        }
    }
    let (analytic, slow) = if config.is_power_law() {
        let margin = config.gamma - config.delta - 1.0;
        if margin > BOUNDARY_TOL {
            (Analytic::Converges, false)
        } else {
            (Analytic::Diverges, margin.abs() <= BOUNDARY_TOL)
        }
    } else {
        (Analytic::Inconclusive, false)
    };
    ConvergenceVerdict::new(analytic, partial, slow)
}

fn is_unit_min_kernel(kernel: &CovarianceKernel) -> bool {
    kernel.kind() == KernelKind::Mixed
        && (0..kernel.dim()).all(|i| kernel.get(i, i) == (i + 1) as f64)
}

/// `sum_{i<=n} sqrt(sum_{j<=n} K_ij^2 / (beta_i j^gamma))` for the unit
/// min-kernel, evaluated with prefix and suffix sums.
fn condition2_min_kernel_sum(config: &MeasureConfig, n: usize) -> f64 {
    let cfg = config.with_dim(n);
    let g = config.gamma;
    let mut tail = vec![0.0; n + 1];
    for j in (1..=n).rev() {
        tail[j - 1] = tail[j] + (j as f64).powf(-g);
    }
    let mut head = 0.0;
    let mut total = 0.0;
    for i in 1..=n {
        let fi = i as f64;
        total += ((head + fi * fi * tail[i - 1]) / cfg.beta(i)).sqrt();
        head += fi * fi * fi.powf(-g);
    }
    total
}

/// `sum_i sqrt(sum_j |K_ij|^2 / (beta_i j^gamma))`.
///
/// For the unit min-kernel the partial sums are scanned up to `n_max` and,
/// under the power schedule, the series converges iff `gamma > 1` and
/// `delta + min(gamma, 3) > 5`. Other kernels are summed over their own
/// dimension without an analytic verdict.
pub fn condition2(
    config: &MeasureConfig,
    kernel: &CovarianceKernel,
    n_max: usize,
) -> ConvergenceVerdict {
    if !is_unit_min_kernel(kernel) {
        let n = kernel.dim().min(scan_limit(config, kernel.dim()));
        let full = config.with_dim(n);
        let mut partial = Vec::new();
        for m in dyadic_points(n) {
            let s: f64 = (1..=m)
                .map(|i| {
                    let inner: f64 = (1..=m)
                        .map(|j| kernel.get(i - 1, j - 1).powi(2) / (j as f64).powf(config.gamma))
                        .sum();
                    (inner / full.beta(i)).sqrt()
                })
                .sum();
            partial.push((m, s));
        }
        return ConvergenceVerdict::new(Analytic::Inconclusive, partial, false);
    }
    let n_max = scan_limit(config, n_max);
    let partial = dyadic_points(n_max)
        .into_iter()
        .map(|m| (m, condition2_min_kernel_sum(config, m)))
        .collect();
    let (analytic, slow) = if config.is_power_law() {
        let (d, g) = (config.delta, config.gamma);
        let margin = (g - 1.0).min(d + g.min(3.0) - 5.0);
        if margin > BOUNDARY_TOL {
            (Analytic::Converges, false)
        } else {
            (Analytic::Diverges, margin.abs() <= BOUNDARY_TOL)
        }
    } else {
        (Analytic::Inconclusive, false)
    };
    ConvergenceVerdict::new(analytic, partial, slow)
}

/// `(||u_S||^2_HS, ||u_Gamma||^2_HS)` for one draw:
/// `sum_i s_i i^{-gamma}` and `sum_{i,j} K_ji^2 i^{-gamma} / s_j`.
pub fn hs_norms(
    sample: &RegSample,
    config: &MeasureConfig,
    kernel: &CovarianceKernel,
) -> Result<(f64, f64)> {
    check_dim(config.n, sample.len())?;
    check_dim(config.n, kernel.dim())?;
    if let Some(bad) = sample.s.iter().find(|s| !(**s > 0.0)) {
        return Err(Error::Domain(format!("widths must be positive, got {bad}")));
    }
    let w = |i: usize| ((i + 1) as f64).powf(-config.gamma);
    let us = sample.s.iter().enumerate().map(|(i, s)| s * w(i)).sum();
    let mut ug = 0.0;
    for i in 0..config.n {
        for j in 0..config.n {
            ug += kernel.get(j, i).powi(2) * w(i) / sample.s[j];
        }
    }
    Ok((us, ug))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clause {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem31Report {
    pub delta: f64,
    pub gamma: f64,
    pub clauses: Vec<Clause>,
    pub passed: bool,
}

impl Theorem31Report {
    pub fn failing(&self) -> Vec<&str> {
        self.clauses
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect()
    }
}

/// Existence hypotheses for the unit min-kernel: `delta > 5/2` and both
/// summability conditions.
pub fn theorem31_check(config: &MeasureConfig) -> Theorem31Report {
    let c1 = condition1(config, DEFAULT_SCAN_MAX);
    let c2 = condition2(config, &CovarianceKernel::min_kernel(1), DEFAULT_SCAN_MAX);
    let delta_ok = config.is_power_law() && config.delta > 2.5;
    let verdict = |v: &ConvergenceVerdict| match v.analytic {
        Analytic::Converges => "converges",
        Analytic::Diverges => "diverges",
        Analytic::Inconclusive => "inconclusive",
    };
    let clauses = vec![
        Clause {
            name: "delta > 5/2".into(),
            passed: delta_ok,
            detail: format!("delta = {}", config.delta),
        },
        Clause {
            name: "condition1".into(),
            passed: c1.analytic == Analytic::Converges,
            detail: format!(
                "sum beta_i / i^gamma {} (growth ratio {:.4})",
                verdict(&c1),
                c1.growth_ratio
            ),
        },
        Clause {
            name: "condition2".into(),
            passed: c2.analytic == Analytic::Converges,
            detail: format!(
                "sum_i sqrt(sum_j K_ij^2 / (beta_i j^gamma)) {} (growth ratio {:.4})",
                verdict(&c2),
                c2.growth_ratio
            ),
        },
    ];
    Theorem31Report {
        delta: config.delta,
        gamma: config.gamma,
        passed: clauses.iter().all(|c| c.passed),
        clauses,
    }
}

/// Tail bound `c (eps + 2 Tr(A) / R^2)` with `c = (1 - e^{-1/2})^{-1}`.
pub fn sazonov_tail(a: &DMatrix<f64>, r: f64, eps: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {r}")));
    }
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            actual: a.ncols(),
        });
    }
    if eps < 0.0 {
        return Err(Error::Domain(format!(
            "eps must be non-negative, got {eps}"
        )));
    }
    Ok(SAZONOV_CONSTANT * (eps + 2.0 * a.trace() / (r * r)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    pub dim: usize,
    pub radius: f64,
    pub eps: f64,
    pub bound: f64,
    pub empirical: f64,
    pub draws: usize,
}

impl TailCheck {
    pub fn holds(&self) -> bool {
        self.empirical <= self.bound
    }
}

/// Smallest `eps` with `|1 - e^{-<xi, Sigma xi>/2}| <= eps` on
/// `<xi, A xi> <= 1`: `1 - exp(-lambda_max(A^{-1} Sigma) / 2)`.
pub fn gaussian_eps(sigma: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<f64> {
    let l = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Domain("A must be positive definite".into()))?
        .l();
    let li = l
        .try_inverse()
        .ok_or_else(|| Error::Domain("A must be positive definite".into()))?;
    let m = &li * sigma * li.transpose();
    let m = (&m + m.transpose()) * 0.5;
    let lmax = m.symmetric_eigenvalues().max();
    Ok(1.0 - (-0.5 * lmax).exp())
}

/// Empirical tail mass of `N(0, Sigma)` outside radius `R`, compared with
/// the lemma's bound for the tightest admissible `eps`.
pub fn sazonov_gaussian_check(
    sigma: &DMatrix<f64>,
    a: &DMatrix<f64>,
    r: f64,
    draws: usize,
    seed: u64,
) -> Result<TailCheck> {
    let n = sigma.nrows();
    let eps = gaussian_eps(sigma, a)?;
    let bound = sazonov_tail(a, r, eps)?;
    let l = sigma
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Domain("Sigma must be positive definite".into()))?
        .l();
    let mut rng = stream_rng(seed, 0);
    let mut outside = 0usize;
    for _ in 0..draws {
        let z = nalgebra::DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        if (&l * z).norm() > r {
            outside += 1;
        }
    }
    Ok(TailCheck {
        dim: n,
        radius: r,
        eps,
        bound,
        empirical: outside as f64 / draws as f64,
        draws,
    })
}
