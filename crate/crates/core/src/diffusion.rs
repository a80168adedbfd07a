//! Windowed quadratic variation, pointwise diffusion estimates, martingale
//! Brownian increments and the sparse symbolic fit of `sigma`.

use std::ops::Range;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::io::CsvTable;
use crate::linalg;
use crate::model::{FunctionLibrary, SparseModel};
use crate::path::{BrownianPath, Measure, TimeGrid, Trajectory};

/// Coarse windows `[t_{j_k}, t_{j_{k+1}}]` over a fine grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SubPartition {
    fine_grid: TimeGrid,
    indices: Vec<usize>,
}

impl SubPartition {
    /// `m` windows of `N / m` fine steps each; `m` must divide `N`.
    pub fn uniform(fine_grid: &TimeGrid, m: usize) -> Result<Self> {
        let n = fine_grid.n_steps();
        if m == 0 || !n.is_multiple_of(m) {
            return Err(Error::InvalidArgument(format!(
                "{m} windows do not evenly divide {n} fine steps"
            )));
        }
        let l = n / m;
        Self::from_indices(fine_grid, (0..=m).map(|k| k * l).collect())
    }

    pub fn from_indices(fine_grid: &TimeGrid, indices: Vec<usize>) -> Result<Self> {
        let n = fine_grid.n_steps();
        if indices.len() < 2 {
            return Err(Error::InvalidArgument(
                "sub-partition needs a window".into(),
            ));
        }
        let m = indices.len() - 1;
        if indices[0] != 0 || indices[m] != n {
            return Err(Error::InvalidArgument(format!(
                "sub-partition must run from 0 to {n}"
            )));
        }
        if indices.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "sub-partition indices not strictly increasing".into(),
            ));
        }
        if m > n / 2 {
            return Err(Error::InvalidArgument(format!(
                "{m} windows exceed half of the {n} fine steps"
            )));
        }
        Ok(Self {
            fine_grid: fine_grid.clone(),
            indices,
        })
    }

    pub fn fine_grid(&self) -> &TimeGrid {
        &self.fine_grid
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn n_windows(&self) -> usize {
        self.indices.len() - 1
    }

    /// Fine-step range of window `k`.
    pub fn steps(&self, k: usize) -> Range<usize> {
        self.indices[k]..self.indices[k + 1]
    }

    /// Window length `delta_k`.
    pub fn delta(&self, k: usize) -> f64 {
        let t = self.fine_grid.times();
        t[self.indices[k + 1]] - t[self.indices[k]]
    }

    pub fn coarse_grid(&self) -> TimeGrid {
        self.fine_grid
            .subgrid(&self.indices)
            .expect("indices validated at construction")
    }

    /// States at the window anchors, `M + 1` values.
    pub fn coarse_states(&self, traj: &Trajectory) -> Vec<f64> {
        self.indices.iter().map(|&j| traj.values[j]).collect()
    }

    fn check_trajectory(&self, traj: &Trajectory) -> Result<()> {
        if traj.grid.len() != self.fine_grid.len() {
            return Err(Error::InvalidArgument(format!(
                "trajectory has {} points, sub-partition expects {}",
                traj.grid.len(),
                self.fine_grid.len()
            )));
        }
        Ok(())
    }
}

/// Sum of squared fine increments inside each window.
pub fn estimate_window_qv(traj: &Trajectory, sub: &SubPartition) -> Result<Vec<f64>> {
    sub.check_trajectory(traj)?;
    (0..sub.n_windows())
        .map(|k| {
            let r = sub.steps(k);
            if r.len() < 2 {
                return Err(Error::InsufficientResolution {
                    window: k,
                    steps: r.len(),
                    required: 2,
                });
            }
            Ok(r.map(|i| {
                let d = traj.values[i + 1] - traj.values[i];
                d * d
            })
            .sum())
        })
        .collect()
}

/// Pointwise diffusion values at the window anchors.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionEstimate {
    pub sub: SubPartition,
    /// `sigma_hat(X_{t_{j_k}}) = sqrt(qv_k / delta_k)`, k = 0..M-1
    pub sigma_values: Vec<f64>,
    pub qv_windows: Vec<f64>,
    /// Windows whose quadratic variation is exactly zero.
    pub zero_windows: Vec<usize>,
}

impl DiffusionEstimate {
    /// `(X_{t_{j_k}}, sigma_hat_k)` pairs for the symbolic fit.
    pub fn pairs(&self, traj: &Trajectory) -> Vec<(f64, f64)> {
        self.sub
            .indices()
            .iter()
            .zip(&self.sigma_values)
            .map(|(&j, &s)| (traj.values[j], s))
            .collect()
    }

    pub fn to_csv(&self, traj: &Trajectory) -> CsvTable {
        let m = self.sub.n_windows();
        let t = self.sub.fine_grid().times();
        let idx = &self.sub.indices()[..m];
        CsvTable::new()
            .index("k", (0..m).collect())
            .float("t", idx.iter().map(|&j| t[j]).collect())
            .float("x", idx.iter().map(|&j| traj.values[j]).collect())
            .float("sigma_hat", self.sigma_values.clone())
            .float("qv", self.qv_windows.clone())
    }

    pub fn write_csv(&self, path: &Path, traj: &Trajectory) -> Result<()> {
        self.to_csv(traj).write(path)
    }

    /// Reloads an estimate written by [`DiffusionEstimate::write_csv`].
    pub fn read_csv(path: &Path, sub: SubPartition) -> Result<Self> {
        let t = CsvTable::read(path)?;
        let sigma_values = t.column("sigma_hat")?;
        let qv_windows = t.column("qv")?;
        if sigma_values.len() != sub.n_windows() {
            return Err(Error::Parse(format!(
                "{}: {} windows, expected {}",
                path.display(),
                sigma_values.len(),
                sub.n_windows()
            )));
        }
        let zero_windows = qv_windows
            .iter()
            .enumerate()
            .filter(|(_, q)| **q == 0.0)
            .map(|(k, _)| k)
            .collect();
        Ok(Self {
            sub,
            sigma_values,
            qv_windows,
            zero_windows,
        })
    }
}

pub fn estimate_sigma_vector(traj: &Trajectory, sub: &SubPartition) -> Result<DiffusionEstimate> {
    let qv = estimate_window_qv(traj, sub)?;
    let sigma_values = qv
        .iter()
        .enumerate()
        .map(|(k, q)| (q / sub.delta(k)).sqrt())
        .collect();
    let zero_windows = qv
        .iter()
        .enumerate()
        .filter(|(_, q)| **q == 0.0)
        .map(|(k, _)| k)
        .collect();
    Ok(DiffusionEstimate {
        sub: sub.clone(),
        sigma_values,
        qv_windows: qv,
        zero_windows,
    })
}

/// Coarse martingale-measure increments
/// `dB^Q_k = sqrt(delta_k) (X_{j_{k+1}} - X_{j_k}) / sqrt(qv_k)`.
pub fn reconstruct_q_increments(
    traj: &Trajectory,
    est: &DiffusionEstimate,
) -> Result<BrownianPath> {
    est.sub.check_trajectory(traj)?;
    let idx = est.sub.indices();
    let increments = (0..est.sub.n_windows())
        .map(|k| {
            let qv = est.qv_windows[k];
            if !(qv > 0.0) {
                return Err(Error::DegenerateDiffusion { window: k });
            }
            let dx = traj.values[idx[k + 1]] - traj.values[idx[k]];
            Ok(est.sub.delta(k).sqrt() * dx / qv.sqrt())
        })
        .collect::<Result<Vec<_>>>()?;
    BrownianPath::new(est.sub.coarse_grid(), increments, Measure::Martingale)
}

/// Coarse martingale-measure increments `dB^Q_k = (X_{k+1} - X_k) / sigma_k`
/// for given diffusion values at the window anchors, e.g. a fitted model.
pub fn q_increments_from_sigma(
    states: &[f64],
    sigma: &[f64],
    grid: &TimeGrid,
) -> Result<BrownianPath> {
    let m = grid.n_steps();
    if states.len() != m + 1 || sigma.len() != m {
        return Err(Error::InvalidArgument(format!(
            "{} states and {} sigma values for {m} windows",
            states.len(),
            sigma.len()
        )));
    }
    let increments = (0..m)
        .map(|k| {
            if !(sigma[k] > 0.0) {
                return Err(Error::SingularDiffusion {
                    x: states[k],
                    window: k,
                });
            }
            Ok((states[k + 1] - states[k]) / sigma[k])
        })
        .collect::<Result<Vec<_>>>()?;
    BrownianPath::new(grid.clone(), increments, Measure::Martingale)
}

/// Settings for sequentially thresholded least squares.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StlsqOptions {
    /// Coefficients with magnitude below this are zeroed.
    pub threshold: f64,
    pub max_iters: usize,
    /// Ridge weight per row used while the active set is being selected;
    /// the final coefficients always come from unpenalized least squares.
    pub ridge: f64,
}

impl Default for StlsqOptions {
    fn default() -> Self {
        Self {
            threshold: 0.05,
            max_iters: 20,
            ridge: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StlsqFit {
    pub model: SparseModel,
    pub iterations: usize,
    /// Every coefficient was thresholded away.
    pub empty: bool,
}

/// Sparse fit of `sigma_hat` on a function library.
///
/// Selection alternates a (ridge-stabilized) least-squares fit on the active
/// terms with hard thresholding until the active set stops changing. The
/// same loop is then rerun with plain least squares from the selected set,
/// so with `ridge = 0` this is textbook STLSQ and with `threshold = 0` it is
/// OLS on the full library.
pub fn fit_sigma_stlsq(
    pairs: &[(f64, f64)],
    library: &FunctionLibrary,
    opts: StlsqOptions,
) -> Result<StlsqFit> {
    let p = library.len();
    if p == 0 {
        return Err(Error::InvalidArgument("empty function library".into()));
    }
    if pairs.len() < p {
        return Err(Error::InvalidArgument(format!(
            "{} pairs for a library of {p} terms",
            pairs.len()
        )));
    }
    if !(opts.threshold >= 0.0) || !(opts.ridge >= 0.0) || opts.max_iters == 0 {
        return Err(Error::InvalidArgument("bad STLSQ options".into()));
    }
    let n = pairs.len();
    let theta = DMatrix::from_fn(n, p, |i, j| library.terms()[j].eval(pairs[i].0));
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite library column".into()));
    }
    let y = DVector::from_iterator(n, pairs.iter().map(|pr| pr.1));
    let names = library.names();

    let mut active: Vec<usize> = (0..p).collect();
    let mut coef = vec![0.0; p];
    let mut iterations = 0;

    let phases: &[f64] = if opts.ridge > 0.0 {
        &[opts.ridge, 0.0]
    } else {
        &[0.0]
    };
    for &ridge in phases {
        for _ in 0..opts.max_iters {
            if active.is_empty() {
                break;
            }
            iterations += 1;
            let a = linalg::select_columns(&theta, &active);
            let c = if ridge > 0.0 {
                linalg::ridge_normal(&a, &y, ridge * n as f64)
            } else {
                linalg::lstsq(&a, &y).map_err(|cols| Error::RankDeficient {
                    columns: cols.iter().map(|&j| names[active[j]].clone()).collect(),
                })?
            };
            coef = vec![0.0; p];
            for (j, &col) in active.iter().enumerate() {
                coef[col] = c[j];
            }
            let next: Vec<usize> = active
                .iter()
                .copied()
                .filter(|&j| coef[j].abs() >= opts.threshold)
                .collect();
            if next == active {
                break;
            }
            active = next;
            if active.is_empty() {
                coef = vec![0.0; p];
            }
        }
    }
    // entries that were thresholded on the last pass
    for (j, c) in coef.iter_mut().enumerate() {
        if !active.contains(&j) {
            *c = 0.0;
        }
    }
    let empty = active.is_empty();
    Ok(StlsqFit {
        model: SparseModel::new(library.clone(), coef)?,
        iterations,
        empty,
    })
}

/// Exact value, first or second derivative of a fitted model.
pub fn eval_model_derivatives(model: &SparseModel, x: f64, order: u8) -> Result<f64> {
    model.derivative(x, order)
}
