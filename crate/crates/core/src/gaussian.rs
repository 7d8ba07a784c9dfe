//! Complex Gaussians `G_A` with `A = S + iK`, `S = diag(s)` positive and `K`
//! a real symmetric kernel.
//!
//! `Re A = S` is positive definite, so `A` is strictly accretive: its
//! eigenvalues and the pivots of symmetric elimination lie in the open right
//! half-plane. Summing the pivot arguments therefore gives a phase for
//! `det A` that is continuous along `K -> tK` and vanishes at `K = 0`; the
//! square root in the density uses that branch.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Dyn, LU};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::lattice::CovarianceKernel;

/// `A = diag(s) + iK`.
#[derive(Debug, Clone)]
pub struct ComplexGaussianParams<'k> {
    s: Vec<f64>,
    kernel: &'k CovarianceKernel,
}

impl<'k> ComplexGaussianParams<'k> {
    pub fn new(s: Vec<f64>, kernel: &'k CovarianceKernel) -> Result<Self> {
        check_dim(kernel.dim(), s.len())?;
        if let Some(bad) = s.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Domain(format!(
                "widths must be positive and finite, got {bad}"
            )));
        }
        Ok(Self { s, kernel })
    }

    pub fn dim(&self) -> usize {
        self.s.len()
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn kernel(&self) -> &CovarianceKernel {
        self.kernel
    }

    pub fn a_matrix(&self) -> DMatrix<Complex64> {
        let k = self.kernel.matrix();
        DMatrix::from_fn(self.dim(), self.dim(), |i, j| {
            let re = if i == j { self.s[i] } else { 0.0 };
            Complex64::new(re, k[(i, j)])
        })
    }

    /// `C = S^{-1/2} K S^{-1/2}`.
    pub fn scaled_kernel(&self) -> DMatrix<f64> {
        let k = self.kernel.matrix();
        DMatrix::from_fn(self.dim(), self.dim(), |i, j| {
            k[(i, j)] / (self.s[i] * self.s[j]).sqrt()
        })
    }
}

/// `det A = exp(log_modulus + i phase)` on the continuous branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDet {
    pub log_modulus: f64,
    pub phase: f64,
}

impl LogDet {
    pub fn det(&self) -> Complex64 {
        Complex64::from_polar(self.log_modulus.exp(), self.phase)
    }

    /// `det(A)^{-1/2}` on the same branch.
    pub fn inv_sqrt(&self) -> Complex64 {
        Complex64::from_polar((-0.5 * self.log_modulus).exp(), -0.5 * self.phase)
    }
}

/// Symmetric `LDL^T` elimination without pivoting; returns the pivots.
///
/// Only valid for strictly accretive complex symmetric matrices, where every
/// pivot has a positive real part.
fn symmetric_pivots(a: &DMatrix<Complex64>) -> Result<Vec<Complex64>> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut pivots = Vec::with_capacity(n);
    for k in 0..n {
        let p = m[(k, k)];
        if !(p.re > 0.0) {
            return Err(Error::Invariant(format!(
                "pivot {k} = {p} left the right half-plane"
            )));
        }
        pivots.push(p);
        for i in k + 1..n {
            let l = m[(i, k)] / p;
            if l == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in k + 1..=i {
                let update = l * m[(k, j)];
                m[(i, j)] -= update;
            }
        }
        // keep the lower triangle authoritative
        for i in k + 1..n {
            for j in k + 1..i {
                m[(j, i)] = m[(i, j)];
            }
        }
    }
    Ok(pivots)
}

pub fn log_det(params: &ComplexGaussianParams) -> LogDet {
    let pivots = symmetric_pivots(&params.a_matrix())
        .expect("Re A = S is positive definite, pivots stay in the right half-plane");
    pivots.iter().fold(
        LogDet {
            log_modulus: 0.0,
            phase: 0.0,
        },
        |acc, p| LogDet {
            log_modulus: acc.log_modulus + p.norm().ln(),
            phase: acc.phase + p.arg(),
        },
    )
}

/// Fourier transform `exp(-<xi, A xi>/2)`.
pub fn ga_fourier(params: &ComplexGaussianParams, xi: &[f64]) -> Result<Complex64> {
    check_dim(params.dim(), xi.len())?;
    let s_form: f64 = params.s.iter().zip(xi).map(|(s, x)| s * x * x).sum();
    let k_form = params.kernel.quadratic_form(xi)?;
    Ok((-0.5 * Complex64::new(s_form, k_form)).exp())
}

/// Density `(2 pi)^{-n/2} det(A)^{-1/2} exp(-<A^{-1} x, x>/2)`.
pub fn ga_density(params: &ComplexGaussianParams, x: &[f64]) -> Result<Complex64> {
    check_dim(params.dim(), x.len())?;
    GaussianFactor::new(params)?.density(x)
}

/// `B = S + K S^{-1} K`, the inverse of `Re(A^{-1})`.
pub fn b_matrix(params: &ComplexGaussianParams) -> DMatrix<f64> {
    let k = params.kernel.matrix();
    let n = params.dim();
    let k_scaled = DMatrix::from_fn(n, n, |i, j| k[(i, j)] / params.s[j]);
    let mut b = k_scaled * k;
    for i in 0..n {
        b[(i, i)] += params.s[i];
    }
    // symmetrize away the rounding in the product
    let bt = b.transpose();
    (b + bt) * 0.5
}

/// `int |G_A| = sqrt|det(I - iC)| = prod_k (1 + c_k^2)^{1/4}` over the
/// eigenvalues `c_k` of `C = S^{-1/2} K S^{-1/2}`. Always `>= 1`.
pub fn abs_ga_mass(params: &ComplexGaussianParams) -> f64 {
    let eig = params.scaled_kernel().symmetric_eigenvalues();
    (0.25 * eig.iter().map(|c| (c * c).ln_1p()).sum::<f64>()).exp()
}

/// The complex side of one `A`: LU factors and the branch-tracked determinant.
pub struct GaussianFactor {
    n: usize,
    lu: LU<Complex64, Dyn, Dyn>,
    log_det: LogDet,
}

impl GaussianFactor {
    pub fn new(params: &ComplexGaussianParams) -> Result<Self> {
        let a = params.a_matrix();
        let pivots = symmetric_pivots(&a)?;
        let log_det = LogDet {
            log_modulus: pivots.iter().map(|p| p.norm().ln()).sum(),
            phase: pivots.iter().map(|p| p.arg()).sum(),
        };
        Ok(Self {
            n: params.dim(),
            lu: a.lu(),
            log_det,
        })
    }

    pub fn log_det(&self) -> LogDet {
        self.log_det
    }

    /// Bilinear `<A^{-1} x, x>`.
    pub fn inverse_form(&self, x: &[f64]) -> Result<Complex64> {
        check_dim(self.n, x.len())?;
        let rhs = DVector::from_iterator(self.n, x.iter().map(|&v| Complex64::new(v, 0.0)));
        let sol = self
            .lu
            .solve(&rhs)
            .ok_or_else(|| Error::Invariant("A is singular".into()))?;
        Ok(sol.iter().zip(x).map(|(z, &v)| z * v).sum())
    }

    pub fn density(&self, x: &[f64]) -> Result<Complex64> {
        let form = self.inverse_form(x)?;
        let norm = (2.0 * PI).powf(-0.5 * self.n as f64);
        Ok(norm * self.log_det.inv_sqrt() * (-0.5 * form).exp())
    }

    /// `G_A(x) / |G_A(x)|`.
    pub fn phase(&self, x: &[f64]) -> Result<Complex64> {
        let form = self.inverse_form(x)?;
        Ok(Complex64::from_polar(
            1.0,
            -0.5 * (self.log_det.phase + form.im),
        ))
    }
}

/// The real side of one `A`: `|G_A| = mass * N(0, B)`.
pub struct MajorantFactor {
    n: usize,
    b: DMatrix<f64>,
    b_chol_l: DMatrix<f64>,
    mass: f64,
}

impl MajorantFactor {
    pub fn new(params: &ComplexGaussianParams) -> Result<Self> {
        let b = b_matrix(params);
        let b_chol_l = b
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Invariant("B = S + K S^-1 K is not positive definite".into()))?
            .l();
        Ok(Self {
            n: params.dim(),
            b,
            b_chol_l,
            mass: abs_ga_mass(params),
        })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// `exp(-<xi, B xi>/2)`.
    pub fn b_fourier(&self, xi: &[f64]) -> Result<f64> {
        check_dim(self.n, xi.len())?;
        let v = DVector::from_column_slice(xi);
        Ok((-0.5 * v.dot(&(&self.b * &v))).exp())
    }

    /// Draw from `N(0, B)`, the normalized `|G_A|`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z = DVector::from_iterator(
            self.n,
            (0..self.n).map(|_| rng.sample::<f64, _>(StandardNormal)),
        );
        (&self.b_chol_l * z).iter().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar(k: f64) -> CovarianceKernel {
        CovarianceKernel::general(DMatrix::from_element(1, 1, k)).unwrap()
    }

    fn random_kernel(rng: &mut ChaCha8Rng, n: usize) -> CovarianceKernel {
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let sym = &m * m.transpose();
        let sym = (&sym + sym.transpose()) * 0.5;
        CovarianceKernel::general(sym).unwrap()
    }

    fn direct_det(a: &DMatrix<Complex64>) -> Complex64 {
        // Laplace expansion, fine for n <= 8
        let n = a.nrows();
        if n == 1 {
            return a[(0, 0)];
        }
        (0..n)
            .map(|j| {
                let minor = a.clone().remove_row(0).remove_column(j);
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                a[(0, j)] * sign * direct_det(&minor)
            })
            .sum()
    }

    #[test]
    fn rejects_nonpositive_widths() {
        let k = CovarianceKernel::min_kernel(2);
        assert!(ComplexGaussianParams::new(vec![1.0, 0.0], &k).is_err());
        assert!(ComplexGaussianParams::new(vec![1.0], &k).is_err());
    }

    #[test]
    fn fourier_examples() {
        let k = scalar(1.0);
        let p = ComplexGaussianParams::new(vec![1.0], &k).unwrap();
        assert_eq!(ga_fourier(&p, &[0.0]).unwrap(), Complex64::new(1.0, 0.0));
        let z = ga_fourier(&p, &[1.0]).unwrap();
        let expected = (-Complex64::new(1.0, 1.0) / 2.0).exp();
        assert_relative_eq!((z - expected).norm(), 0.0, epsilon = 1e-15);

        let k = CovarianceKernel::min_kernel(3);
        let p = ComplexGaussianParams::new(vec![0.5, 2.0, 1.5], &k).unwrap();
        let xi = [0.3, -1.1, 0.8];
        let s_form: f64 = [0.5, 2.0, 1.5]
            .iter()
            .zip(&xi)
            .map(|(s, x)| s * x * x)
            .sum();
        assert_relative_eq!(
            ga_fourier(&p, &xi).unwrap().norm(),
            (-0.5 * s_form).exp(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn density_scalar_origin() {
        let k = scalar(1.0);
        let p = ComplexGaussianParams::new(vec![1.0], &k).unwrap();
        let z = ga_density(&p, &[0.0]).unwrap();
        let expected = (Complex64::new(2.0 * PI, 2.0 * PI)).sqrt().inv();
        assert_relative_eq!((z - expected).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn density_real_case_is_normal() {
        let k = CovarianceKernel::zeros(2);
        let p = ComplexGaussianParams::new(vec![0.7, 2.5], &k).unwrap();
        for x in [[0.0, 0.0], [1.0, -0.4], [-2.0, 3.0]] {
            let z = ga_density(&p, &x).unwrap();
            let expected = (-0.5 * (x[0] * x[0] / 0.7 + x[1] * x[1] / 2.5)).exp()
                / (2.0 * PI * (0.7f64 * 2.5).sqrt());
            assert_eq!(z.im, 0.0);
            assert!(z.re > 0.0);
            assert_relative_eq!(z.re, expected, max_relative = 1e-14);
        }
    }

    #[test]
    fn b_matrix_examples() {
        let k = scalar(1.0);
        let p = ComplexGaussianParams::new(vec![1.0], &k).unwrap();
        assert_relative_eq!(b_matrix(&p)[(0, 0)], 2.0);

        let k = CovarianceKernel::zeros(3);
        let p = ComplexGaussianParams::new(vec![0.3, 1.0, 4.0], &k).unwrap();
        assert_eq!(
            b_matrix(&p),
            DMatrix::from_diagonal(&DVector::from_vec(vec![0.3, 1.0, 4.0]))
        );
    }

    #[test]
    fn mass_examples() {
        let k = scalar(1.0);
        let p = ComplexGaussianParams::new(vec![1.0], &k).unwrap();
        assert_relative_eq!(abs_ga_mass(&p), 2f64.powf(0.25), max_relative = 1e-15);
        assert_relative_eq!(abs_ga_mass(&p), 1.189207115002721, max_relative = 1e-12);

        let k = CovarianceKernel::zeros(4);
        let p = ComplexGaussianParams::new(vec![0.1, 1.0, 3.0, 7.0], &k).unwrap();
        assert_eq!(abs_ga_mass(&p), 1.0);
    }

    #[test]
    fn mass_matches_sqrt_det_ratio() {
        // sqrt(det B) / sqrt|det A| is the other closed form of the same mass
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=6 {
            let k = random_kernel(&mut rng, n);
            let s: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..5.0)).collect();
            let p = ComplexGaussianParams::new(s, &k).unwrap();
            let ratio =
                (b_matrix(&p).determinant().ln() / 2.0 - log_det(&p).log_modulus / 2.0).exp();
            assert_relative_eq!(abs_ga_mass(&p), ratio, max_relative = 1e-10);
        }
    }

    #[test]
    fn log_det_reproduces_direct_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=8 {
            for _ in 0..5 {
                let k = random_kernel(&mut rng, n);
                let s: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..3.0)).collect();
                let p = ComplexGaussianParams::new(s, &k).unwrap();
                let ld = log_det(&p);
                let direct = direct_det(&p.a_matrix());
                assert!((ld.det() - direct).norm() <= 1e-9 * direct.norm(), "n={n}");
            }
        }
    }

    #[test]
    fn phase_is_continuous_along_homotopy() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=8 {
            let k = random_kernel(&mut rng, n);
            let s: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..3.0)).collect();
            let mut prev: Option<LogDet> = None;
            for step in 0..=100 {
                let tau = step as f64 / 100.0;
                let kt = CovarianceKernel::general(k.matrix() * tau).unwrap();
                let ld = log_det(&ComplexGaussianParams::new(s.clone(), &kt).unwrap());
                match prev {
                    None => assert_eq!(ld.phase, 0.0),
                    Some(p) => {
                        // a branch slip would show up as a 2 pi offset here
                        let principal = (ld.det() / p.det()).arg();
                        assert!(
                            (ld.phase - p.phase - principal).abs() < 1e-8,
                            "slip at tau={tau}: {} -> {}",
                            p.phase,
                            ld.phase
                        );
                    }
                }
                assert!(ld.phase.abs() < n as f64 * PI / 2.0);
                prev = Some(ld);
            }
        }
    }

    #[test]
    fn factor_sampling_has_covariance_b() {
        let k = CovarianceKernel::min_kernel(2);
        let p = ComplexGaussianParams::new(vec![0.8, 1.7], &k).unwrap();
        let f = MajorantFactor::new(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let draws = 200_000;
        let mut cov = [[0.0; 2]; 2];
        for _ in 0..draws {
            let x = f.sample(&mut rng);
            for i in 0..2 {
                for j in 0..2 {
                    cov[i][j] += x[i] * x[j] / draws as f64;
                }
            }
        }
        let b = f.b();
        for i in 0..2 {
            for j in 0..2 {
                assert!((cov[i][j] - b[(i, j)]).abs() < 0.02 * b[(i, i)].max(b[(j, j)]));
            }
        }
    }

    #[test]
    fn phase_times_modulus_is_density() {
        let k = CovarianceKernel::min_kernel(3);
        let p = ComplexGaussianParams::new(vec![0.4, 1.1, 2.0], &k).unwrap();
        let f = GaussianFactor::new(&p).unwrap();
        let x = [0.2, -0.7, 1.3];
        let d = f.density(&x).unwrap();
        assert_relative_eq!(
            (f.phase(&x).unwrap() * d.norm() - d).norm(),
            0.0,
            epsilon = 1e-14
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn mass_at_least_one(
            n in 1usize..=6,
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = random_kernel(&mut rng, n);
            let s: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..10.0)).collect();
            let p = ComplexGaussianParams::new(s, &k).unwrap();
            prop_assert!(abs_ga_mass(&p) >= 1.0);
        }

        #[test]
        fn b_is_symmetric_positive_definite(
            n in 1usize..=8,
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = random_kernel(&mut rng, n);
            let s: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..10.0)).collect();
            let p = ComplexGaussianParams::new(s, &k).unwrap();
            let b = b_matrix(&p);
            prop_assert_eq!(&b, &b.transpose());
            prop_assert!(b.cholesky().is_some());
        }
    }
}
