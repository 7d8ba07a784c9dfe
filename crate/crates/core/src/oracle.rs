//! Independent reference computations: adaptive quadrature, closed forms and
//! series that the Monte Carlo estimators and fast paths are checked against.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::extrapolate::to_zero;
use crate::gaussian::{b_matrix, ComplexGaussianParams};
use crate::lattice::CovarianceKernel;
use crate::montecarlo::stream_rng;
use crate::pairing::PotentialModel;

const DEFAULT_TOL: f64 = 1e-12;

/// Double-exponential quadrature on `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    quadrature::integrate(f, a, b, tol).integral
}

/// `int_0^inf f(s) ds` through `s = (t / (1 - t))^2`, which also absorbs
/// `s^{-1/2}` singularities at the origin.
pub fn integrate_half_line<F: Fn(f64) -> f64>(f: F, tol: f64) -> f64 {
    integrate(
        |t| {
            if t <= 0.0 || t >= 1.0 {
                return 0.0;
            }
            let u = t / (1.0 - t);
            let jac = 2.0 * u / ((1.0 - t) * (1.0 - t));
            let v = f(u * u) * jac;
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        tol,
    )
}

/// `int_R f(x) dx`, folded onto the half line so a kink at the origin sits
/// on an endpoint.
pub fn integrate_real_line<F: Fn(f64) -> f64>(f: F, tol: f64) -> f64 {
    integrate_half_line(|x| f(x) + f(-x), tol)
}

fn complex_half_line<F: Fn(f64) -> Complex64>(f: F, tol: f64) -> Complex64 {
    Complex64::new(
        integrate_half_line(|s| f(s).re, tol),
        integrate_half_line(|s| f(s).im, tol),
    )
}

/// `int_0^inf (ds/beta) e^{-s/beta} e^{-x^2/2s} / sqrt(2 pi s)`.
pub fn subordinated_gaussian(beta: f64, x: f64) -> f64 {
    integrate_half_line(
        |s| (-s / beta - x * x / (2.0 * s)).exp() / (beta * (2.0 * PI * s).sqrt()),
        1e-14,
    )
}

/// One-dimensional `mu` density: `int nu(ds) G_{s+ik}(x)`.
pub fn mu_density_1d(beta: f64, k: f64, x: f64) -> Complex64 {
    complex_half_line(
        |s| {
            let a = Complex64::new(s, k);
            (-s / beta).exp() / beta * (-x * x / (2.0 * a)).exp() / (2.0 * PI * a).sqrt()
        },
        DEFAULT_TOL,
    )
}

/// One-dimensional majorant norm: `int (ds/beta) e^{-s/beta} (1 + k^2/s^2)^{1/4}`.
pub fn aux_norm_1d(beta: f64, k: f64) -> f64 {
    integrate_half_line(
        |s| (-s / beta).exp() / beta * (1.0 + (k / s).powi(2)).powf(0.25),
        DEFAULT_TOL,
    )
}

/// Per-factor majorant integral `int_0^inf e^{-s} (1 + kappa^2/s^2)^{1/4} ds`.
pub fn majorant_factor_integral(kappa: f64) -> f64 {
    aux_norm_1d(1.0, kappa)
}

/// `int |G_{s+ik}(x)| dx` by quadrature of the explicit modulus.
pub fn abs_gaussian_mass_1d(s: f64, k: f64) -> f64 {
    let a = Complex64::new(s, k);
    let re_inv = (1.0 / a).re;
    let amp = 1.0 / (2.0 * PI * a.norm()).sqrt();
    integrate_real_line(|x| amp * (-0.5 * re_inv * x * x).exp(), 1e-13)
}

/// `int |G_A(x)| dx` over `R^2` for `A = diag(s) + iK`, nested quadrature of
/// the explicit 2x2 inverse.
pub fn abs_gaussian_mass_2d(s: [f64; 2], k: [[f64; 2]; 2]) -> f64 {
    let a11 = Complex64::new(s[0], k[0][0]);
    let a22 = Complex64::new(s[1], k[1][1]);
    let a12 = Complex64::new(0.0, k[0][1]);
    let det = a11 * a22 - a12 * a12;
    let (p11, p22, p12) = ((a22 / det).re, (a11 / det).re, (-a12 / det).re);
    let amp = 1.0 / (2.0 * PI * det.norm().sqrt());
    integrate_real_line(
        |x| {
            integrate_real_line(
                |y| amp * (-0.5 * (p11 * x * x + 2.0 * p12 * x * y + p22 * y * y)).exp(),
                1e-13,
            )
        },
        1e-12,
    )
}

/// Largest relative deviation between `S + K S^-1 K` and `(Re A^-1)^-1` over
/// random instances of dimension `1..=n_max`.
pub fn b_dual_route(trials: usize, n_max: usize, seed: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let mut rng = stream_rng(seed, t as u64);
        let n = rng.random_range(1..=n_max);
        let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let sym = (&g + g.transpose()) * 0.5;
        let kernel = CovarianceKernel::general(sym).expect("symmetric by construction");
        let s: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..3.0)).collect();
        let params = ComplexGaussianParams::new(s, &kernel).expect("positive widths");
        let b = b_matrix(&params);
        let a_inv = params.a_matrix().try_inverse().expect("A is invertible");
        let re_inv = a_inv.map(|z| z.re);
        let dual = re_inv.try_inverse().expect("Re A^-1 is positive definite");
        worst = worst.max((&b - &dual).norm() / b.norm());
    }
    worst
}

/// Bessel function of the first kind `J_m(x)` of integer order, by its power
/// series (accurate for moderate `|x|`).
pub fn bessel_j(m: i32, x: f64) -> f64 {
    let order = m.unsigned_abs() as i32;
    let half = 0.5 * x;
    let mut term = half.powi(order) / (1..=order).map(f64::from).product::<f64>();
    let mut sum = term;
    let q = -half * half;
    for k in 1..200 {
        term *= q / (k as f64 * (k + order) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    if m < 0 && order % 2 == 1 {
        -sum
    } else {
        sum
    }
}

/// `<exp(-i sum_j lambda_j a cos(x_j)), F>` for the unit-spacing Feynman
/// distribution with kernel `K`, by the Jacobi-Anger expansion
/// `e^{-iz cos x} = sum_m (-i)^m J_m(z) e^{imx}` and
/// `<e^{i<m,x>}, F> = e^{-i<Km,m>/2}`. Dimension at most 2.
pub fn cosine_pairing_series(
    kernel: &CovarianceKernel,
    amplitude: f64,
    lambdas: &[f64],
) -> Complex64 {
    let n = kernel.dim();
    assert!(
        n == lambdas.len() && (1..=2).contains(&n),
        "series oracle covers n = 1, 2"
    );
    let mmax = 40;
    let coef = |m: i32, lam: f64| Complex64::new(0.0, -1.0).powi(m) * bessel_j(m, lam * amplitude);
    let mut total = Complex64::new(0.0, 0.0);
    if n == 1 {
        for m in -mmax..=mmax {
            let q = kernel.get(0, 0) * (m * m) as f64;
            total += coef(m, lambdas[0]) * Complex64::from_polar(1.0, -0.5 * q);
        }
    } else {
        for m1 in -mmax..=mmax {
            let c1 = coef(m1, lambdas[0]);
            for m2 in -mmax..=mmax {
                let m = [m1 as f64, m2 as f64];
                let q = kernel.quadratic_form(&m).expect("dimension 2");
                total += c1 * coef(m2, lambdas[1]) * Complex64::from_polar(1.0, -0.5 * q);
            }
        }
    }
    total
}

/// Backward free evolution of `exp(-x^2 / 2a)` by `steps` unit steps:
/// `sqrt(a / (a + i steps)) exp(-x^2 / 2(a + i steps))`.
pub fn free_gaussian_packet(a: f64, steps: usize, x: f64) -> Complex64 {
    let a0 = Complex64::new(a, 0.0);
    let at = Complex64::new(a, steps as f64);
    (a0 / at).sqrt() * (-x * x / (2.0 * at)).exp()
}

/// `<e^{-(x + c)^2 / 2w^2}, F_1>` for a one-site marginal with Fourier
/// transform `e^{-i k xi^2/2}`: `w / sqrt(w^2 + ik) exp(-c^2 / 2(w^2 + ik))`.
pub fn gaussian_smeared(width: f64, k: f64, c: f64) -> Complex64 {
    let v = Complex64::new(width * width, k);
    width / v.sqrt() * (-c * c / (2.0 * v)).exp()
}

/// Sum of Gaussian-bump site averages `sum_j lambda_j A <e^{-(x_j + c_j)^2/2w^2}, F>`,
/// the coefficient of `-i` in the first-order expansion of
/// `<exp(-i sum_j lambda_j V(x_j + c_j)), F>` for `V(x) = A e^{-x^2/2w^2}`.
pub fn gaussian_bump_born_sum(
    amplitude: f64,
    width: f64,
    kdiag: &[f64],
    lambdas: &[f64],
    shifts: &[f64],
) -> Complex64 {
    kdiag
        .iter()
        .zip(lambdas)
        .zip(shifts)
        .map(|((&k, &lam), &c)| lam * amplitude * gaussian_smeared(width, k, c))
        .sum()
}

/// Mollifier strengths for the oscillatory tensor quadrature.
pub const MOLLIFIER_LADDER: [f64; 3] = [0.02, 0.01, 0.005];

/// Trapezoid step for the oscillatory tensor quadrature.
pub const MOLLIFIER_STEP: f64 = 0.008;

/// Inner-sum rotations are re-seeded from `from_polar` this often.
const RESEED: usize = 512;

/// `(2 pi i)^{-n/2} int e^{iS(x)} e^{-i sum lambda_j V(x_j)} e^{-eta |x|^2} dx` for
/// the unit-spacing mixed action with `v_T = 0`, `n` in `{1, 2}`, by the
/// trapezoid rule with step `h` on `[-L, L]^n`, `L = sqrt(40 / eta)`.
pub fn mollified_pairing(pot: &PotentialModel, lambdas: &[f64], eta: f64, h: f64) -> Complex64 {
    let n = lambdas.len();
    assert!((1..=2).contains(&n), "tensor quadrature covers n = 1, 2");
    let half = ((40.0 / eta).sqrt() / h).ceil() as i64;
    let xs: Vec<f64> = (-half..=half).map(|k| k as f64 * h).collect();
    let weight = |x: f64, quad: f64, lam: f64| {
        Complex64::from_polar((-eta * x * x).exp(), quad * x * x - lam * pot.value(x))
    };
    let i = Complex64::new(0.0, 1.0);
    if n == 1 {
        let sum: Complex64 = xs.iter().map(|&x| weight(x, 0.5, lambdas[0])).sum();
        return sum * h / (2.0 * PI * i).sqrt();
    }
    // S(x) = x1^2 + x2^2 / 2 - x1 x2
    let a: Vec<Complex64> = xs.iter().map(|&x| weight(x, 1.0, lambdas[0])).collect();
    let b: Vec<Complex64> = xs.iter().map(|&x| weight(x, 0.5, lambdas[1])).collect();
    let sum: Complex64 = xs
        .par_iter()
        .zip(a.par_iter())
        .map(|(&x1, &a1)| {
            let step = Complex64::from_polar(1.0, -x1 * h);
            let mut inner = Complex64::new(0.0, 0.0);
            let mut rot = Complex64::new(0.0, 0.0);
            for (k, (&x2, &b2)) in xs.iter().zip(&b).enumerate() {
                if k % RESEED == 0 {
                    rot = Complex64::from_polar(1.0, -x1 * x2);
                }
                inner += b2 * rot;
                rot *= step;
            }
            a1 * inner
        })
        .sum();
    sum * h * h / (2.0 * PI * i)
}

/// Mollified values over [`MOLLIFIER_LADDER`] and their polynomial
/// extrapolation to `eta = 0`.
pub fn pairing_quadrature(pot: &PotentialModel, lambdas: &[f64]) -> (Vec<Complex64>, Complex64) {
    let values: Vec<Complex64> = MOLLIFIER_LADDER
        .iter()
        .map(|&eta| mollified_pairing(pot, lambdas, eta, MOLLIFIER_STEP))
        .collect();
    let limit = to_zero(&MOLLIFIER_LADDER, &values);
    (values, limit)
}
