use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Coefficients at or below this magnitude (in normalized units) count as zero.
pub const NONZERO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElasticNetOptions {
    /// Stop once no coefficient moves by more than this in a sweep.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Keep the objective value after every sweep.
    pub trace: bool,
}

impl Default for ElasticNetOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_sweeps: 100_000,
            trace: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ElasticNetFit {
    /// In the units of the unscaled design.
    pub coefficients: Vec<f64>,
    /// In the units of the scaled design, where the penalty applies.
    pub normalized: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    pub kkt_residual: f64,
    pub objective: f64,
    pub objective_trace: Vec<f64>,
}

impl ElasticNetFit {
    /// Indices whose normalized coefficient exceeds [`NONZERO_TOL`].
    pub fn support(&self) -> Vec<usize> {
        self.normalized
            .iter()
            .enumerate()
            .filter(|(_, c)| c.abs() > NONZERO_TOL)
            .map(|(j, _)| j)
            .collect()
    }
}

/// Root mean square of each column over `rows`; zero columns get scale 1.
pub fn column_rms(a: &DMatrix<f64>, rows: &[usize]) -> Vec<f64> {
    let n = rows.len().max(1) as f64;
    (0..a.ncols())
        .map(|j| {
            let s = (rows.iter().map(|&i| a[(i, j)] * a[(i, j)]).sum::<f64>() / n).sqrt();
            if s > 0.0 && s.is_finite() {
                s
            } else {
                1.0
            }
        })
        .collect()
}

/// Sufficient statistics of a scaled least-squares problem, each divided by
/// the row count: `A = G'G / n`, `c = G'y / n`, `yy = y'y / n`.
#[derive(Debug, Clone)]
pub(crate) struct Gram {
    p: usize,
    a: Vec<f64>,
    c: Vec<f64>,
    yy: f64,
}

impl Gram {
    /// Statistics of `design[rows] / scales`.
    pub(crate) fn from_rows(
        design: &DMatrix<f64>,
        target: &DVector<f64>,
        rows: &[usize],
        scales: &[f64],
    ) -> Self {
        let p = design.ncols();
        let n = rows.len() as f64;
        let mut a = vec![0.0; p * p];
        let mut c = vec![0.0; p];
        let mut yy = 0.0;
        let mut row = vec![0.0; p];
        for &i in rows {
            for j in 0..p {
                row[j] = design[(i, j)] / scales[j];
            }
            let y = target[i];
            yy += y * y;
            for j in 0..p {
                c[j] += row[j] * y;
                for l in j..p {
                    a[j * p + l] += row[j] * row[l];
                }
            }
        }
        for j in 0..p {
            for l in j..p {
                a[j * p + l] /= n;
                a[l * p + j] = a[j * p + l];
            }
            c[j] /= n;
        }
        Self {
            p,
            a,
            c,
            yy: yy / n,
        }
    }

    fn objective(&self, beta: &[f64], q: &[f64], alpha: f64, rho: f64) -> f64 {
        let mut fit = self.yy;
        let mut l1 = 0.0;
        let mut l2 = 0.0;
        for j in 0..self.p {
            fit += beta[j] * (q[j] - 2.0 * self.c[j]);
            l1 += beta[j].abs();
            l2 += beta[j] * beta[j];
        }
        fit + alpha * (rho * l1 + 0.5 * (1.0 - rho) * l2)
    }

    /// Worst violation of the optimality conditions.
    fn kkt(&self, beta: &[f64], q: &[f64], alpha: f64, rho: f64) -> f64 {
        (0..self.p)
            .map(|j| {
                let g = -2.0 * (self.c[j] - q[j]) + alpha * (1.0 - rho) * beta[j];
                if beta[j] != 0.0 {
                    (g + alpha * rho * beta[j].signum()).abs()
                } else {
                    (g.abs() - alpha * rho).max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }

    /// Cyclic coordinate descent with covariance updates, from zero.
    pub(crate) fn solve(&self, alpha: f64, rho: f64, opts: &ElasticNetOptions) -> Solution {
        let p = self.p;
        let mut beta = vec![0.0; p];
        // q = A beta
        let mut q = vec![0.0; p];
        let l1 = alpha * rho;
        let l2 = alpha * (1.0 - rho);
        let mut obj = self.objective(&beta, &q, alpha, rho);
        let mut trace = Vec::new();
        let mut sweeps = 0;
        let mut converged = false;
        while sweeps < opts.max_sweeps {
            sweeps += 1;
            let mut max_change: f64 = 0.0;
            for j in 0..p {
                let ajj = self.a[j * p + j];
                let denom = 2.0 * ajj + l2;
                let old = beta[j];
                let new = if denom > 0.0 {
                    let z = 2.0 * (self.c[j] - q[j] + ajj * old);
                    soft_threshold(z, l1) / denom
                } else {
                    0.0
                };
                let d = new - old;
                if d != 0.0 {
                    beta[j] = new;
                    let col = &self.a[j * p..(j + 1) * p];
                    for (qi, ai) in q.iter_mut().zip(col) {
                        *qi += d * ai;
                    }
                    max_change = max_change.max(d.abs());
                }
            }
            let next = self.objective(&beta, &q, alpha, rho);
            let slack = 1e-9 * (self.yy.abs() + obj.abs()) + 1e-300;
            assert!(
                next <= obj + slack,
                "elastic-net objective increased: {obj:e} -> {next:e}"
            );
            obj = next;
            if opts.trace {
                trace.push(obj);
            }
            if max_change < opts.tol {
                converged = true;
                break;
            }
        }
        let kkt_residual = self.kkt(&beta, &q, alpha, rho);
        Solution {
            beta,
            sweeps,
            converged,
            kkt_residual,
            objective: obj,
            trace,
        }
    }
}

pub(crate) struct Solution {
    pub beta: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    pub kkt_residual: f64,
    pub objective: f64,
    pub trace: Vec<f64>,
}

impl Solution {
    pub(crate) fn into_fit(self, scales: &[f64]) -> ElasticNetFit {
        ElasticNetFit {
            coefficients: self.beta.iter().zip(scales).map(|(b, s)| b / s).collect(),
            normalized: self.beta,
            sweeps: self.sweeps,
            converged: self.converged,
            kkt_residual: self.kkt_residual,
            objective: self.objective,
            objective_trace: self.trace,
        }
    }
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Minimizes `(1/n) |y - G b|^2 + alpha (rho |b|_1 + (1 - rho)/2 |b|^2)` where
/// `G` is `design` with column `j` divided by `scales[j]`. Returned
/// coefficients are in the units of the unscaled design.
pub fn elastic_net_fit(
    design: &DMatrix<f64>,
    target: &DVector<f64>,
    alpha: f64,
    rho: f64,
    scales: &[f64],
    opts: &ElasticNetOptions,
) -> Result<ElasticNetFit> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "alpha must be >= 0, got {alpha}"
        )));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidArgument(format!(
            "rho must lie in [0, 1], got {rho}"
        )));
    }
    if scales.len() != design.ncols() || scales.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidArgument(
            "scales must be positive, one per column".into(),
        ));
    }
    if target.len() != design.nrows() || design.nrows() == 0 {
        return Err(Error::InvalidArgument(
            "target length must match design rows".into(),
        ));
    }
    let rows: Vec<usize> = (0..design.nrows()).collect();
    let fit = Gram::from_rows(design, target, &rows, scales)
        .solve(alpha, rho, opts)
        .into_fit(scales);
    if fit.converged {
        Ok(fit)
    } else {
        Err(Error::ConvergenceFailure {
            sweeps: fit.sweeps,
            kkt_residual: fit.kkt_residual,
            coefficients: fit.coefficients,
        })
    }
}
