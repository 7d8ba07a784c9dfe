//! Backward recursion for wave functions,
//! `Psi_k(x) = e^{-i lambda_k V(x)} int e^{i(x'-x)^2/2} Psi_{k+1}(x') dx' / sqrt(2 i pi)`,
//! on a periodic grid, and the same recursion on atomic Fourier measures.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairing::{CouplingSchedule, PotentialModel};

pub const DEFAULT_BOUNDARY_TOL: f64 = 1e-8;
pub const DEFAULT_LEAK_THRESHOLD: f64 = 1e-3;
pub const DEFAULT_MERGE_TOL: f64 = 1e-12;
pub const DEFAULT_ATOM_CAP: usize = 1 << 16;

/// Periodic uniform grid `x_k = x_min + k dx`, `dx = (x_max - x_min) / m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub m: usize,
}

impl SpatialGrid {
    pub fn new(x_min: f64, x_max: f64, m: usize) -> Result<Self> {
        if !m.is_power_of_two() || m < 2 {
            return Err(Error::InvalidGrid(format!(
                "point count must be a power of two, got {m}"
            )));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "need x_min < x_max, got [{x_min}, {x_max})"
            )));
        }
        Ok(Self { x_min, x_max, m })
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.m as f64
    }

    pub fn x(&self, k: usize) -> f64 {
        self.x_min + k as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.m).map(|k| self.x(k)).collect()
    }

    /// Angular frequencies in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let m = self.m as i64;
        let scale = 2.0 * PI / (self.x_max - self.x_min);
        (0..m)
            .map(|j| if j < m / 2 { j } else { j - m } as f64 * scale)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveFunction {
    pub grid: SpatialGrid,
    pub values: Vec<Complex64>,
}

impl WaveFunction {
    pub fn new(grid: SpatialGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.m {
            return Err(Error::DimensionMismatch {
                expected: grid.m,
                actual: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn<F: Fn(f64) -> Complex64>(grid: SpatialGrid, f: F) -> Self {
        let values = grid.points().into_iter().map(f).collect();
        Self { grid, values }
    }

    /// Rows `(x, re, im)` on a uniform grid; the grid closes one spacing
    /// past the last abscissa.
    pub fn from_rows(rows: &[[f64; 3]]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::InvalidGrid("need at least two samples".into()));
        }
        let dx = rows[1][0] - rows[0][0];
        for (k, r) in rows.iter().enumerate() {
            let expected = rows[0][0] + k as f64 * dx;
            if (r[0] - expected).abs() > 1e-9 * (1.0 + expected.abs()) {
                return Err(Error::InvalidGrid(format!(
                    "sample {k} breaks uniform spacing"
                )));
            }
        }
        let grid = SpatialGrid::new(rows[0][0], rows[0][0] + rows.len() as f64 * dx, rows.len())?;
        Self::new(
            grid,
            rows.iter().map(|r| Complex64::new(r[1], r[2])).collect(),
        )
    }

    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let parsed: std::result::Result<Vec<f64>, _> =
                rec.iter().map(str::parse::<f64>).collect();
            match parsed {
                Ok(v) if v.len() == 3 => rows.push([v[0], v[1], v[2]]),
                Ok(v) => {
                    return Err(Error::Parse(format!(
                        "row {}: expected x,re,im, found {} columns",
                        line + 1,
                        v.len()
                    )))
                }
                Err(_) if line == 0 => continue,
                Err(e) => return Err(Error::Parse(format!("row {}: {e}", line + 1))),
            }
        }
        Self::from_rows(&rows)
    }

    pub fn to_csv_writer<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(["x", "re", "im"]).map_err(io)?;
        for (x, v) in self.grid.points().iter().zip(&self.values) {
            w.write_record(&[x.to_string(), v.re.to_string(), v.im.to_string()])
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))
    }

    /// Discrete `L^2` norm `sqrt(dx sum |psi|^2)`.
    pub fn norm(&self) -> f64 {
        (self.grid.dx() * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Discrete `L^2` distance to `other` on the same grid.
    pub fn distance(&self, other: &WaveFunction) -> f64 {
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        (self.grid.dx() * s).sqrt()
    }

    /// Largest amplitude in the outer `m/64` points on either side, relative
    /// to the largest amplitude overall.
    pub fn boundary_ratio(&self) -> f64 {
        let m = self.values.len();
        let band = (m / 64).max(1);
        let peak = self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        let edge = self.values[..band]
            .iter()
            .chain(&self.values[m - band..])
            .map(|v| v.norm())
            .fold(0.0, f64::max);
        edge / peak
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionOptions {
    /// Boundary ratio above which a step is flagged.
    pub boundary_tol: f64,
    /// Boundary ratio above which a trajectory is aborted.
    pub leak_threshold: f64,
    /// Off for genuinely periodic data.
    pub check_boundary: bool,
}

impl Default for EvolutionOptions {
    fn default() -> Self {
        Self {
            boundary_tol: DEFAULT_BOUNDARY_TOL,
            leak_threshold: DEFAULT_LEAK_THRESHOLD,
            check_boundary: true,
        }
    }
}

impl EvolutionOptions {
    pub fn periodic() -> Self {
        Self {
            check_boundary: false,
            ..Self::default()
        }
    }
}

/// Cached FFT plans and the free multiplier `e^{-i k^2 / 2}` for one grid.
pub struct Propagator {
    grid: SpatialGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    multiplier: Vec<Complex64>,
}

impl Propagator {
    pub fn new(grid: SpatialGrid) -> Self {
        let mut planner = FftPlanner::new();
        let multiplier = grid
            .wavenumbers()
            .iter()
            .map(|k| Complex64::from_polar(1.0, -0.5 * k * k))
            .collect();
        Self {
            grid,
            forward: planner.plan_fft_forward(grid.m),
            inverse: planner.plan_fft_inverse(grid.m),
            multiplier,
        }
    }

    fn check_grid(&self, psi: &WaveFunction) -> Result<()> {
        if psi.grid != self.grid {
            return Err(Error::InvalidGrid(
                "wave function lives on another grid".into(),
            ));
        }
        Ok(())
    }

    fn free(&self, values: &mut [Complex64], conjugate: bool) {
        self.forward.process(values);
        let scale = 1.0 / self.grid.m as f64;
        for (v, mlt) in values.iter_mut().zip(&self.multiplier) {
            *v *= if conjugate { mlt.conj() } else { *mlt } * scale;
        }
        self.inverse.process(values);
    }

    fn potential_phase(
        &self,
        values: &mut [Complex64],
        pot: &PotentialModel,
        lambda: f64,
        sign: f64,
    ) {
        if lambda == 0.0 || pot.is_zero() {
            return;
        }
        for (k, v) in values.iter_mut().enumerate() {
            *v *= Complex64::from_polar(1.0, -sign * lambda * pot.value(self.grid.x(k)));
        }
    }

    /// `Psi_k` from `Psi_{k+1}`: free propagation, then the potential phase.
    pub fn step(
        &self,
        psi: &WaveFunction,
        pot: &PotentialModel,
        lambda: f64,
    ) -> Result<WaveFunction> {
        self.check_grid(psi)?;
        let mut values = psi.values.clone();
        self.free(&mut values, false);
        self.potential_phase(&mut values, pot, lambda, 1.0);
        Ok(WaveFunction {
            grid: self.grid,
            values,
        })
    }

    /// Exact inverse of [`Propagator::step`].
    pub fn step_inverse(
        &self,
        psi: &WaveFunction,
        pot: &PotentialModel,
        lambda: f64,
    ) -> Result<WaveFunction> {
        self.check_grid(psi)?;
        let mut values = psi.values.clone();
        self.potential_phase(&mut values, pot, lambda, -1.0);
        self.free(&mut values, true);
        Ok(WaveFunction {
            grid: self.grid,
            values,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub psi: WaveFunction,
    pub boundary_ratio: f64,
    /// Boundary amplitude exceeded the tolerance; periodic wrap-around may
    /// have contaminated the result.
    pub leak_warning: bool,
}

pub fn evolve_step(
    psi_next: &WaveFunction,
    pot: &PotentialModel,
    lambda_k: f64,
    opts: &EvolutionOptions,
) -> Result<StepResult> {
    let psi = Propagator::new(psi_next.grid).step(psi_next, pot, lambda_k)?;
    let boundary_ratio = psi.boundary_ratio();
    Ok(StepResult {
        leak_warning: opts.check_boundary && boundary_ratio > opts.boundary_tol,
        boundary_ratio,
        psi,
    })
}

pub fn evolve_step_inverse(
    psi: &WaveFunction,
    pot: &PotentialModel,
    lambda_k: f64,
) -> Result<WaveFunction> {
    Propagator::new(psi.grid).step_inverse(psi, pot, lambda_k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostic {
    pub step: usize,
    /// Time label `k` of the state produced.
    pub site: usize,
    pub lambda: f64,
    pub norm: f64,
    pub boundary_ratio: f64,
    pub leak_warning: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// `Psi_{steps+1}, Psi_steps, ..., Psi_1`.
    pub states: Vec<WaveFunction>,
    pub diagnostics: Vec<StepDiagnostic>,
}

impl Trajectory {
    pub fn last(&self) -> &WaveFunction {
        self.states
            .last()
            .expect("trajectory holds the initial state")
    }
}

/// Runs `steps` backward steps from `Psi_{steps+1} = psi_t`. Step `s`
/// produces `Psi_{steps+1-s}` with coupling `lambda_{steps+1-s}`.
pub fn evolve_many(
    psi_t: &WaveFunction,
    pot: &PotentialModel,
    schedule: &CouplingSchedule,
    steps: usize,
    opts: &EvolutionOptions,
) -> Result<Trajectory> {
    schedule.validate(steps)?;
    let prop = Propagator::new(psi_t.grid);
    let mut states = vec![psi_t.clone()];
    let mut diagnostics = Vec::with_capacity(steps);
    for step in 1..=steps {
        let site = steps + 1 - step;
        let lambda = schedule.lambda(site);
        let psi = prop.step(states.last().expect("non-empty"), pot, lambda)?;
        let ratio = psi.boundary_ratio();
        if opts.check_boundary && ratio > opts.leak_threshold {
            return Err(Error::BoundaryLeak {
                step,
                ratio,
                threshold: opts.leak_threshold,
            });
        }
        diagnostics.push(StepDiagnostic {
            step,
            site,
            lambda,
            norm: psi.norm(),
            boundary_ratio: ratio,
            leak_warning: opts.check_boundary && ratio > opts.boundary_tol,
        });
        states.push(psi);
    }
    Ok(Trajectory {
        states,
        diagnostics,
    })
}

/// Finite complex atomic measure `sum_k w_k delta_{y_k}`, standing for the
/// function `x -> sum_k w_k e^{i y_k x}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasure {
    pub atoms: Vec<(f64, Complex64)>,
}

impl AtomicMeasure {
    pub fn new(atoms: Vec<(f64, Complex64)>) -> Self {
        Self { atoms }
    }

    pub fn dirac(y: f64) -> Self {
        Self::new(vec![(y, Complex64::new(1.0, 0.0))])
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_variation(&self) -> f64 {
        self.atoms.iter().map(|(_, w)| w.norm()).sum()
    }

    /// `int e^{ixy} mu(dy)`.
    pub fn fourier(&self, x: f64) -> Complex64 {
        self.atoms
            .iter()
            .map(|(y, w)| w * Complex64::from_polar(1.0, x * y))
            .sum()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::new(self.atoms.iter().map(|(y, w)| (*y, w * c)).collect())
    }

    /// Sorts atoms and merges runs whose neighbours lie within `tol`,
    /// adding weights; exact zeros are dropped.
    pub fn coalesce(&self, tol: f64) -> Self {
        let mut sorted = self.atoms.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, Complex64)> = Vec::with_capacity(sorted.len());
        let mut last_y = f64::NEG_INFINITY;
        for (y, w) in sorted {
            match out.last_mut() {
                Some(prev) if y - last_y <= tol => prev.1 += w,
                _ => out.push((y, w)),
            }
            last_y = y;
        }
        out.retain(|(_, w)| *w != Complex64::new(0.0, 0.0));
        Self::new(out)
    }

    /// Convolution `self * other`: atoms at all pairwise sums.
    pub fn convolve(&self, other: &AtomicMeasure) -> Self {
        let mut atoms = Vec::with_capacity(self.len() * other.len());
        for (y1, w1) in &self.atoms {
            for (y2, w2) in &other.atoms {
                atoms.push((y1 + y2, w1 * w2));
            }
        }
        Self::new(atoms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesOptions {
    pub merge_tol: f64,
    pub atom_cap: usize,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            merge_tol: DEFAULT_MERGE_TOL,
            atom_cap: DEFAULT_ATOM_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesStep {
    pub measure: AtomicMeasure,
    /// `||nu||^{p+1} ||mu_{k+1}|| / (p+1)!`.
    pub truncation_bound: f64,
}

/// `mu_k = sum_{n <= p} ((-i)^n / n!) nu^{*n} * (e^{-iy^2/2} mu_{k+1})`, the
/// step for `V = int e^{ixy} nu(dy)` (coupling absorbed into `nu`).
pub fn evolve_measure_step(
    mu_next: &AtomicMeasure,
    nu_pot: &AtomicMeasure,
    order_max: usize,
    opts: &SeriesOptions,
) -> Result<SeriesStep> {
    let free = AtomicMeasure::new(
        mu_next
            .atoms
            .iter()
            .map(|(y, w)| (*y, w * Complex64::from_polar(1.0, -0.5 * y * y)))
            .collect(),
    );
    let mut term = free.coalesce(opts.merge_tol);
    let mut total = term.atoms.clone();
    for n in 1..=order_max {
        if nu_pot.is_empty() {
            break;
        }
        term = term
            .convolve(nu_pot)
            .scale(Complex64::new(0.0, -1.0 / n as f64))
            .coalesce(opts.merge_tol);
        total.extend_from_slice(&term.atoms);
        if total.len() > opts.atom_cap {
            total = AtomicMeasure::new(total).coalesce(opts.merge_tol).atoms;
            if total.len() > opts.atom_cap {
                return Err(Error::AtomCap {
                    atoms: total.len(),
                    cap: opts.atom_cap,
                });
            }
        }
    }
    let measure = AtomicMeasure::new(total).coalesce(opts.merge_tol);
    let p1 = order_max + 1;
    let factorial: f64 = (1..=p1).map(|v| v as f64).product();
    let truncation_bound =
        nu_pot.total_variation().powi(p1 as i32) * mu_next.total_variation() / factorial;
    Ok(SeriesStep {
        measure,
        truncation_bound,
    })
}
