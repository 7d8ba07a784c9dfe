//! Time grids, discretized free actions and the covariance kernels of the
//! finite-dimensional Feynman distributions.
//!
//! The initial point is pinned at `x_0 = 0, t_0 = 0`. A grid carries either
//! Dirichlet data (a final position `X_T`) or mixed data (a final velocity
//! `v_T`).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Boundary {
    /// Fixed endpoints, `x(T) = X_T`.
    #[serde(rename = "DBC")]
    Dirichlet {
        #[serde(rename = "X_T")]
        x_t: f64,
    },
    /// Fixed initial position and final velocity `v_T`.
    #[serde(rename = "MBC")]
    Mixed {
        #[serde(rename = "v_T")]
        v_t: f64,
    },
}

/// A subdivision `0 < t_1 < ... < t_n < T` with boundary data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct TimeGrid {
    times: Vec<f64>,
    horizon: f64,
    bc: Boundary,
}

#[derive(Serialize, Deserialize)]
struct RawGrid {
    times: Vec<f64>,
    #[serde(rename = "T")]
    horizon: f64,
    bc: Boundary,
}

impl TryFrom<RawGrid> for TimeGrid {
    type Error = Error;
    fn try_from(raw: RawGrid) -> Result<Self> {
        TimeGrid::new(raw.times, raw.horizon, raw.bc)
    }
}

impl From<TimeGrid> for RawGrid {
    fn from(g: TimeGrid) -> Self {
        RawGrid {
            times: g.times,
            horizon: g.horizon,
            bc: g.bc,
        }
    }
}

impl TimeGrid {
    pub fn new(times: Vec<f64>, horizon: f64, bc: Boundary) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidGrid("at least one time is required".into()));
        }
        if !times.iter().all(|t| t.is_finite()) || !horizon.is_finite() {
            return Err(Error::InvalidGrid("times must be finite".into()));
        }
        let mut prev = 0.0;
        for (i, &t) in times.iter().enumerate() {
            if t <= prev {
                return Err(Error::InvalidGrid(format!(
                    "times must be strictly increasing from 0 (t_{} = {t})",
                    i + 1
                )));
            }
            prev = t;
        }
        if horizon <= prev {
            return Err(Error::InvalidGrid(format!(
                "horizon {horizon} must exceed the last time {prev}"
            )));
        }
        let finite_bc = match bc {
            Boundary::Dirichlet { x_t } => x_t.is_finite(),
            Boundary::Mixed { v_t } => v_t.is_finite(),
        };
        if !finite_bc {
            return Err(Error::InvalidGrid("boundary data must be finite".into()));
        }
        Ok(Self { times, horizon, bc })
    }

    /// Unit-spacing grid `t_i = i`, `i = 1..=n`, with horizon `n + 1`.
    pub fn unit(n: usize, bc: Boundary) -> Result<Self> {
        let times = (1..=n).map(|i| i as f64).collect();
        Self::new(times, n as f64 + 1.0, bc)
    }

    /// Reads `{"times": [...], "T": ..., "bc": {"kind": "MBC", "v_T": ...}}`.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn boundary(&self) -> Boundary {
        self.bc
    }

    /// Increments `t_i - t_{i-1}` for `i = 1..=n`.
    fn steps(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(0.0)
            .chain(self.times.iter().copied())
            .zip(self.times.iter().copied())
            .map(|(a, b)| b - a)
    }

    /// `sum (x_i - x_{i-1})^2 / (t_i - t_{i-1})` with `x_0 = 0`.
    fn kinetic_sum(&self, path: &[f64]) -> f64 {
        std::iter::once(0.0)
            .chain(path.iter().copied())
            .zip(path.iter().copied())
            .zip(self.steps())
            .map(|((a, b), dt)| (b - a) * (b - a) / dt)
            .sum()
    }
}

/// Discretized action with mixed boundary conditions.
pub fn mbc_action(grid: &TimeGrid, path: &[f64]) -> Result<f64> {
    let Boundary::Mixed { v_t } = grid.bc else {
        return Err(Error::WrongBoundary { expected: "mixed" });
    };
    check_dim(grid.len(), path.len())?;
    let tn = grid.times[grid.len() - 1];
    Ok(0.5 * (v_t * v_t * (grid.horizon - tn) + grid.kinetic_sum(path)))
}

/// Discretized action with Dirichlet boundary conditions.
pub fn dbc_action(grid: &TimeGrid, path: &[f64]) -> Result<f64> {
    let Boundary::Dirichlet { x_t } = grid.bc else {
        return Err(Error::WrongBoundary {
            expected: "Dirichlet",
        });
    };
    check_dim(grid.len(), path.len())?;
    let n = grid.len();
    let last = (x_t - path[n - 1]).powi(2) / (grid.horizon - grid.times[n - 1]);
    Ok(0.5 * (last + grid.kinetic_sum(path)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    #[serde(rename = "MBC")]
    Mixed,
    #[serde(rename = "DBC")]
    Dirichlet,
    /// Any symmetric kernel supplied by the caller.
    #[serde(rename = "general")]
    General,
}

/// Symmetric covariance kernel of a Feynman distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceKernel {
    entries: DMatrix<f64>,
    kind: KernelKind,
}

impl CovarianceKernel {
    /// `K_ij = min(i, j)`, the unit-spacing mixed kernel.
    pub fn min_kernel(n: usize) -> Self {
        let entries = DMatrix::from_fn(n, n, |i, j| (i.min(j) + 1) as f64);
        Self {
            entries,
            kind: KernelKind::Mixed,
        }
    }

    /// Wraps a caller-supplied matrix. It must be square and exactly symmetric.
    pub fn general(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::InvalidConfig(
                "kernel must be square and non-empty".into(),
            ));
        }
        let n = entries.nrows();
        for i in 0..n {
            for j in 0..i {
                if entries[(i, j)] != entries[(j, i)] {
                    return Err(Error::InvalidConfig(format!(
                        "kernel is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("kernel entries must be finite".into()));
        }
        Ok(Self {
            entries,
            kind: KernelKind::General,
        })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            entries: DMatrix::zeros(n, n),
            kind: KernelKind::General,
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn quadratic_form(&self, xi: &[f64]) -> Result<f64> {
        check_dim(self.dim(), xi.len())?;
        let n = self.dim();
        Ok((0..n)
            .map(|i| {
                xi[i]
                    * xi.iter()
                        .enumerate()
                        .map(|(j, x)| self.entries[(i, j)] * x)
                        .sum::<f64>()
            })
            .sum())
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.entries
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Covariance of the Feynman distribution on `grid`.
pub fn covariance(grid: &TimeGrid) -> CovarianceKernel {
    let t = &grid.times;
    let n = t.len();
    match grid.bc {
        Boundary::Mixed { .. } => CovarianceKernel {
            entries: DMatrix::from_fn(n, n, |i, j| t[i].min(t[j])),
            kind: KernelKind::Mixed,
        },
        Boundary::Dirichlet { .. } => {
            let horizon = grid.horizon;
            CovarianceKernel {
                entries: DMatrix::from_fn(n, n, |i, j| {
                    t[i].min(t[j]) * (1.0 - t[i].max(t[j]) / horizon)
                }),
                kind: KernelKind::Dirichlet,
            }
        }
    }
}

/// Fourier transform of the Feynman distribution evaluated at `xi`.
pub fn feynman_fourier(grid: &TimeGrid, xi: &[f64]) -> Result<Complex64> {
    let kernel = covariance(grid);
    let q = kernel.quadratic_form(xi)?;
    let i = Complex64::i();
    Ok(match grid.bc {
        Boundary::Mixed { .. } => (-0.5 * i * q).exp(),
        Boundary::Dirichlet { x_t } => {
            let horizon = grid.horizon;
            // principal root: arg(2 i pi T) = pi/2, so the root has arg pi/4
            let root = (Complex64::new(0.0, 2.0 * PI * horizon)).sqrt();
            (-0.5 * i * (q + x_t * x_t / horizon)).exp() / root
        }
    })
}

/// Tridiagonal coefficient matrix `Q` of the free action, so that the action
/// equals `<x, Q x> / 2` for vanishing boundary data. Its inverse is
/// [`covariance`]. For Dirichlet grids the last diagonal entry also carries
/// the `1 / (T - t_n)` term.
pub fn action_form_matrix(grid: &TimeGrid) -> DMatrix<f64> {
    let n = grid.len();
    let inv: Vec<f64> = grid.steps().map(|dt| 1.0 / dt).collect();
    let mut q = DMatrix::zeros(n, n);
    for i in 0..n {
        q[(i, i)] += inv[i];
        if i + 1 < n {
            q[(i, i)] += inv[i + 1];
            q[(i, i + 1)] = -inv[i + 1];
            q[(i + 1, i)] = -inv[i + 1];
        }
    }
    if let Boundary::Dirichlet { .. } = grid.bc {
        q[(n - 1, n - 1)] += 1.0 / (grid.horizon - grid.times[n - 1]);
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn mixed(times: &[f64], horizon: f64, v_t: f64) -> TimeGrid {
        TimeGrid::new(times.to_vec(), horizon, Boundary::Mixed { v_t }).unwrap()
    }

    fn dirichlet(times: &[f64], horizon: f64, x_t: f64) -> TimeGrid {
        TimeGrid::new(times.to_vec(), horizon, Boundary::Dirichlet { x_t }).unwrap()
    }

    #[test]
    fn mbc_action_examples() {
        assert_eq!(mbc_action(&mixed(&[1.0], 2.0, 0.0), &[0.0]).unwrap(), 0.0);
        assert_eq!(mbc_action(&mixed(&[1.0], 2.0, 0.0), &[2.0]).unwrap(), 2.0);
        assert_eq!(
            mbc_action(&mixed(&[1.0, 2.0], 3.0, 1.0), &[1.0, 2.0]).unwrap(),
            1.5
        );
    }

    #[test]
    fn dbc_action_examples() {
        assert_eq!(
            dbc_action(&dirichlet(&[1.0, 2.0], 3.0, 0.0), &[0.0, 0.0]).unwrap(),
            0.0
        );
        assert_eq!(
            dbc_action(&dirichlet(&[1.0], 2.0, 1.0), &[1.0]).unwrap(),
            0.5
        );
        assert_eq!(
            dbc_action(&dirichlet(&[1.0, 2.0], 3.0, 0.0), &[1.0, 0.0]).unwrap(),
            1.0
        );
    }

    #[test]
    fn action_errors() {
        let g = mixed(&[1.0, 2.0], 3.0, 0.0);
        assert_eq!(
            mbc_action(&g, &[1.0]),
            Err(Error::DimensionMismatch {
                expected: 2,
                actual: 1
            })
        );
        assert!(matches!(
            dbc_action(&g, &[1.0, 2.0]),
            Err(Error::WrongBoundary { .. })
        ));
    }

    #[test]
    fn invalid_grids_rejected() {
        let bc = Boundary::Mixed { v_t: 0.0 };
        assert!(TimeGrid::new(vec![], 1.0, bc).is_err());
        assert!(TimeGrid::new(vec![1.0, 1.0], 3.0, bc).is_err());
        assert!(TimeGrid::new(vec![2.0, 1.0], 3.0, bc).is_err());
        assert!(TimeGrid::new(vec![0.0, 1.0], 3.0, bc).is_err());
        assert!(TimeGrid::new(vec![1.0, 2.0], 2.0, bc).is_err());
        assert!(TimeGrid::new(vec![1.0, f64::NAN], 3.0, bc).is_err());
    }

    #[test]
    fn mbc_covariance_is_min() {
        let k = covariance(&mixed(&[1.0, 2.0, 3.0], 4.0, 0.0));
        let expected = DMatrix::from_row_slice(3, 3, &[1., 1., 1., 1., 2., 2., 1., 2., 3.]);
        assert_eq!(k.matrix(), &expected);
        assert_eq!(k, CovarianceKernel::min_kernel(3));
    }

    #[test]
    fn dbc_covariance_midpoint() {
        for horizon in [1.0, 2.0, 7.5] {
            let k = covariance(&dirichlet(&[horizon / 2.0], horizon, 0.3));
            assert_relative_eq!(k.get(0, 0), horizon / 4.0, max_relative = 1e-15);
        }
        let k = covariance(&dirichlet(&[0.5, 1.0 - 1e-9], 1.0, 0.0));
        assert!(k.get(1, 1).abs() < 1e-8);
        assert!(k.get(0, 1).abs() < 1e-8);
    }

    #[test]
    fn fourier_examples() {
        let g = TimeGrid::unit(2, Boundary::Mixed { v_t: 0.0 }).unwrap();
        assert_eq!(
            feynman_fourier(&g, &[0.0, 0.0]).unwrap(),
            Complex64::new(1.0, 0.0)
        );
        let z = feynman_fourier(&g, &[1.0, 0.0]).unwrap();
        assert_relative_eq!(z.re, (-0.5f64).cos(), epsilon = 1e-15);
        assert_relative_eq!(z.im, (-0.5f64).sin(), epsilon = 1e-15);

        let (horizon, x_t) = (3.0, 0.7);
        let g = dirichlet(&[1.0, 2.0], horizon, x_t);
        let z = feynman_fourier(&g, &[0.0, 0.0]).unwrap();
        let root = (2.0 * PI * horizon).sqrt() * Complex64::from_polar(1.0, PI / 4.0);
        let expected = Complex64::from_polar(1.0, -x_t * x_t / (2.0 * horizon)) / root;
        assert_relative_eq!((z - expected).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn action_form_examples() {
        let g = TimeGrid::unit(2, Boundary::Mixed { v_t: 0.0 }).unwrap();
        let q = action_form_matrix(&g);
        assert_eq!(q, DMatrix::from_row_slice(2, 2, &[2., -1., -1., 1.]));
        let inv = q.try_inverse().unwrap();
        assert_relative_eq!(
            inv,
            DMatrix::from_row_slice(2, 2, &[1., 1., 1., 2.]),
            epsilon = 1e-14
        );

        let tau = 0.37;
        let g = mixed(&[tau], 1.0, 0.0);
        let q = action_form_matrix(&g);
        assert_relative_eq!(q[(0, 0)], 1.0 / tau);
        assert_relative_eq!(
            1.0 / q[(0, 0)],
            covariance(&g).get(0, 0),
            max_relative = 1e-15
        );
    }

    #[test]
    fn dirichlet_form_inverts_dirichlet_kernel() {
        let g = dirichlet(&[0.3, 1.1, 1.7, 2.0], 2.6, 0.0);
        let prod = action_form_matrix(&g) * covariance(&g).matrix();
        assert_relative_eq!(prod, DMatrix::identity(4, 4), epsilon = 1e-12);
    }

    #[test]
    fn grid_json_round_trip() {
        let text = r#"{"times":[0.5,1.5],"T":2.0,"bc":{"kind":"MBC","v_T":0.25}}"#;
        let g = TimeGrid::from_json(text).unwrap();
        assert_eq!(g.times(), &[0.5, 1.5]);
        assert_eq!(g.boundary(), Boundary::Mixed { v_t: 0.25 });
        let dbc =
            TimeGrid::from_json(r#"{"times":[1],"T":3,"bc":{"kind":"DBC","X_T":-1}}"#).unwrap();
        assert_eq!(dbc.boundary(), Boundary::Dirichlet { x_t: -1.0 });
        assert!(
            TimeGrid::from_json(r#"{"times":[2,1],"T":3,"bc":{"kind":"DBC","X_T":0}}"#).is_err()
        );
    }

    fn grid_strategy(max_n: usize) -> impl Strategy<Value = TimeGrid> {
        (
            prop::collection::vec(0.05f64..3.0, 1..=max_n),
            0.05f64..3.0,
            -2.0f64..2.0,
            any::<bool>(),
        )
            .prop_map(|(steps, tail, data, dbc)| {
                let mut t = 0.0;
                let times: Vec<f64> = steps
                    .iter()
                    .map(|dt| {
                        t += dt;
                        t
                    })
                    .collect();
                let bc = if dbc {
                    Boundary::Dirichlet { x_t: data }
                } else {
                    Boundary::Mixed { v_t: data }
                };
                TimeGrid::new(times, t + tail, bc).unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn action_is_half_quadratic_form(
            grid in grid_strategy(12),
            seed in prop::collection::vec(-3.0f64..3.0, 12),
        ) {
            let n = grid.len();
            let path = &seed[..n];
            let q = action_form_matrix(&grid);
            let x = nalgebra::DVector::from_column_slice(path);
            let form = 0.5 * x.dot(&(&q * &x));
            let action = match grid.boundary() {
                Boundary::Mixed { .. } => {
                    let g = TimeGrid::new(grid.times().to_vec(), grid.horizon(), Boundary::Mixed { v_t: 0.0 }).unwrap();
                    mbc_action(&g, path).unwrap()
                }
                Boundary::Dirichlet { .. } => {
                    let g = TimeGrid::new(grid.times().to_vec(), grid.horizon(), Boundary::Dirichlet { x_t: 0.0 }).unwrap();
                    dbc_action(&g, path).unwrap()
                }
            };
            prop_assert!((action - form).abs() <= 1e-12 * action.abs().max(1e-300));
        }

        #[test]
        fn form_times_kernel_is_identity(grid in grid_strategy(12)) {
            let n = grid.len();
            let prod = action_form_matrix(&grid) * covariance(&grid).matrix();
            let err = (prod - DMatrix::<f64>::identity(n, n)).amax();
            prop_assert!(err <= 1e-9, "max deviation {err}");
        }

        #[test]
        fn kernels_symmetric_psd(grid in grid_strategy(12)) {
            let k = covariance(&grid);
            prop_assert_eq!(k.matrix(), &k.matrix().transpose());
            let scale = k.matrix().amax().max(1.0);
            prop_assert!(k.min_eigenvalue() / scale >= -1e-10);
        }

        #[test]
        fn fourier_modulus_is_constant(
            grid in grid_strategy(8),
            xi in prop::collection::vec(-4.0f64..4.0, 8),
        ) {
            let z = feynman_fourier(&grid, &xi[..grid.len()]).unwrap();
            let expected = match grid.boundary() {
                Boundary::Mixed { .. } => 1.0,
                Boundary::Dirichlet { .. } => (2.0 * PI * grid.horizon()).powf(-0.5),
            };
            prop_assert!((z.norm() - expected).abs() <= 1e-12 * expected);
        }
    }
}
