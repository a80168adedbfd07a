//! Time grids, Brownian increments, Euler–Maruyama simulation and the
//! Itô-to-Stratonovich drift correction.
//!
//! # Random numbers
//!
//! Noise comes from ChaCha20 (`rand_chacha::ChaCha20Rng`) seeded with
//! `seed_from_u64(seed)`. A batch of independent trajectories sharing one
//! seed uses ChaCha stream `i` for trajectory `i`
//! ([`sample_brownian_stream`]); [`sample_brownian`] is stream 0. Standard
//! normals are drawn with `rand_distr::StandardNormal` and scaled by
//! `sqrt(dt_i)`, one draw per step, in grid order.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::io::CsvTable;
use crate::model::SparseModel;

/// Strictly increasing sequence of observation instants.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
    uniform: bool,
}

impl TimeGrid {
    /// Uniform grid with `n_steps` equal steps on `[t0, t_end]`.
    pub fn uniform(t0: f64, t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t0.is_finite() && t_end.is_finite()) || t_end <= t0 {
            return Err(Error::InvalidArgument(format!(
                "grid span [{t0}, {t_end}] is empty"
            )));
        }
        if n_steps == 0 {
            return Err(Error::InvalidArgument(
                "grid needs at least one step".into(),
            ));
        }
        let h = (t_end - t0) / n_steps as f64;
        let mut times: Vec<f64> = (0..=n_steps).map(|i| t0 + i as f64 * h).collect();
        times[n_steps] = t_end;
        Ok(Self {
            times,
            uniform: true,
        })
    }

    /// Arbitrary strictly increasing grid; flagged uniform when every step is
    /// within 10^-12 of the span over `N`, relative to the span.
    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidArgument(
                "grid needs at least two instants".into(),
            ));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("non-finite grid instant".into()));
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(format!(
                "grid not strictly increasing at index {}",
                i + 1
            )));
        }
        let n = times.len() - 1;
        let h = (times[n] - times[0]) / n as f64;
        let uniform = times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-12 * (times[n] - times[0]));
        Ok(Self { times, uniform })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn t0(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// Step `t_{i+1} - t_i`.
    pub fn dt(&self, i: usize) -> f64 {
        self.times[i + 1] - self.times[i]
    }

    pub fn steps(&self) -> Vec<f64> {
        self.times.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Coarse grid through the given (strictly increasing) indices.
    pub fn subgrid(&self, indices: &[usize]) -> Result<Self> {
        let times = indices
            .iter()
            .map(|&j| {
                self.times
                    .get(j)
                    .copied()
                    .ok_or_else(|| Error::InvalidArgument(format!("index {j} outside grid")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut g = Self::from_times(times)?;
        // a sub-partition of a uniform grid with equal strides stays uniform
        if self.uniform {
            let stride = indices[1] - indices[0];
            if indices.windows(2).all(|w| w[1] - w[0] == stride) {
                g.uniform = true;
            }
        }
        Ok(g)
    }
}

/// `make_uniform_grid`
pub fn make_uniform_grid(t0: f64, t_end: f64, n_steps: usize) -> Result<TimeGrid> {
    TimeGrid::uniform(t0, t_end, n_steps)
}

/// Observed states on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
}

impl Trajectory {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "{} values for {} grid instants",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite state at index {i}"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn to_csv(&self) -> CsvTable {
        CsvTable::new()
            .float("t", self.grid.times().to_vec())
            .float("value", self.values.clone())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.to_csv().write(path)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let t = CsvTable::read(path)?;
        Self::new(TimeGrid::from_times(t.column("t")?)?, t.column("value")?)
    }
}

/// Which measure a Brownian path is a Brownian motion under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    /// The physical measure P driving the observed dynamics.
    Physical,
    /// The martingale measure Q under which the state has no drift.
    Martingale,
}

/// Increments of a driving noise on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    pub grid: TimeGrid,
    pub increments: Vec<f64>,
    pub measure: Measure,
    pub origin: f64,
}

impl BrownianPath {
    pub fn new(grid: TimeGrid, increments: Vec<f64>, measure: Measure) -> Result<Self> {
        if increments.len() != grid.n_steps() {
            return Err(Error::InvalidArgument(format!(
                "{} increments for a grid of {} steps",
                increments.len(),
                grid.n_steps()
            )));
        }
        Ok(Self {
            grid,
            increments,
            measure,
            origin: 0.0,
        })
    }

    /// Path values, anchored at the origin.
    pub fn values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.increments.len() + 1);
        let mut acc = self.origin;
        out.push(acc);
        for d in &self.increments {
            acc += d;
            out.push(acc);
        }
        out
    }

    /// Sums increments over the windows of a sub-partition.
    pub fn coarse_grain(&self, indices: &[usize]) -> Result<Self> {
        let grid = self.grid.subgrid(indices)?;
        let increments = indices
            .windows(2)
            .map(|w| self.increments[w[0]..w[1]].iter().sum())
            .collect();
        Ok(Self {
            grid,
            increments,
            measure: self.measure,
            origin: self.origin,
        })
    }

    /// Rows `t_i, dB_i` for `i < N`.
    pub fn to_csv(&self) -> CsvTable {
        CsvTable::new()
            .float("t", self.grid.times()[..self.grid.n_steps()].to_vec())
            .float("increment", self.increments.clone())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.to_csv().write(path)
    }

    /// Reads increments back onto a known grid.
    pub fn read_csv(path: &Path, grid: TimeGrid, measure: Measure) -> Result<Self> {
        let t = CsvTable::read(path)?;
        let times = t.column("t")?;
        if times.as_slice() != &grid.times()[..grid.n_steps()] {
            return Err(Error::Parse(format!(
                "{}: noise grid does not match trajectory grid",
                path.display()
            )));
        }
        Self::new(grid, t.column("increment")?, measure)
    }
}

/// `sample_brownian` on ChaCha stream 0.
pub fn sample_brownian(grid: &TimeGrid, seed: u64) -> BrownianPath {
    sample_brownian_stream(grid, seed, 0)
}

/// Brownian increments from ChaCha20 stream `stream` of `seed`.
pub fn sample_brownian_stream(grid: &TimeGrid, seed: u64, stream: u64) -> BrownianPath {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let increments = (0..grid.n_steps())
        .map(|i| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * grid.dt(i).sqrt()
        })
        .collect();
    BrownianPath {
        grid: grid.clone(),
        increments,
        measure: Measure::Physical,
        origin: 0.0,
    }
}

/// Drift and diffusion of an Itô SDE.
#[derive(Debug, Clone)]
pub struct CoefficientPair {
    pub mu: SparseModel,
    pub sigma: SparseModel,
}

impl CoefficientPair {
    pub fn new(mu: SparseModel, sigma: SparseModel) -> Self {
        Self { mu, sigma }
    }

    /// Polynomial drift and diffusion, coefficients in increasing degree.
    pub fn polynomial(mu: &[f64], sigma: &[f64]) -> Self {
        Self::new(SparseModel::polynomial(mu), SparseModel::polynomial(sigma))
    }
}

/// Itô Euler–Maruyama on the noise grid:
/// `X_{i+1} = X_i + mu(X_i) dt_i + sigma(X_i) dB_i`.
///
/// A non-zero diffusion model must stay strictly positive along the path; the
/// run aborts at the first index where it does not, or where the state stops
/// being finite.
pub fn simulate_euler_maruyama(
    coeffs: &CoefficientPair,
    x0: f64,
    noise: &BrownianPath,
) -> Result<Trajectory> {
    if noise.measure != Measure::Physical {
        return Err(Error::InvalidArgument(
            "simulation needs physical-measure noise".into(),
        ));
    }
    if !x0.is_finite() {
        return Err(Error::SimulationBlowup {
            index: 0,
            state: x0,
        });
    }
    let check_sigma = !coeffs.sigma.is_zero();
    let n = noise.grid.n_steps();
    let mut values = Vec::with_capacity(n + 1);
    let mut x = x0;
    values.push(x);
    for i in 0..n {
        let s = coeffs.sigma.eval(x);
        if check_sigma && !(s > 0.0) {
            return Err(Error::SimulationBlowup { index: i, state: x });
        }
        x += coeffs.mu.eval(x) * noise.grid.dt(i) + s * noise.increments[i];
        if !x.is_finite() {
            return Err(Error::SimulationBlowup {
                index: i + 1,
                state: x,
            });
        }
        values.push(x);
    }
    Trajectory::new(noise.grid.clone(), values)
}

/// `mu~(x) = mu(x) - sigma(x) sigma'(x) / 2`.
#[derive(Debug, Clone)]
pub struct StratonovichDrift {
    coeffs: CoefficientPair,
}

impl StratonovichDrift {
    pub fn eval(&self, x: f64) -> f64 {
        let s = self.coeffs.sigma.eval(x);
        let ds = self
            .coeffs
            .sigma
            .derivative(x, 1)
            .expect("differentiability checked at construction");
        self.coeffs.mu.eval(x) - 0.5 * s * ds
    }
}

pub fn ito_to_stratonovich_drift(coeffs: &CoefficientPair) -> Result<StratonovichDrift> {
    coeffs.sigma.check_differentiable()?;
    Ok(StratonovichDrift {
        coeffs: coeffs.clone(),
    })
}
