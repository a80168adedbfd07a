//! Drift recovery from the fitted diffusion and the window `psi_21`
//! coefficients, and the discrete Girsanov map back to physical noise.
//!
//! Matching iterated-integral coefficients of the two second-order
//! expansions gives, on each window,
//!
//! ```text
//! mu'(x) = a(x) mu(x) + b(x)
//! a(x)   = sigma'(x) / sigma(x)
//! b(x)   = (2 psi_21 + sigma(x) sigma'(x)^2 + sigma(x)^2 sigma''(x)) / (2 sigma(x))
//! ```
//!
//! which is stepped along the observed states with an explicit Euler
//! recursion in `x`, starting from the known `mu(X_0)`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::CsvTable;
use crate::model::SparseModel;
use crate::path::{BrownianPath, Measure, TimeGrid};

#[derive(Debug, Clone)]
pub struct DriftOdeCoeffs {
    sigma: SparseModel,
    pub psi21_per_window: Vec<f64>,
}

impl DriftOdeCoeffs {
    fn sigma_terms(&self, x: f64, window: usize) -> Result<(f64, f64, f64)> {
        let s = self.sigma.eval(x);
        if s == 0.0 || !s.is_finite() {
            return Err(Error::SingularDiffusion { x, window });
        }
        Ok((
            s,
            self.sigma.derivative(x, 1)?,
            self.sigma.derivative(x, 2)?,
        ))
    }

    /// `a(x) = sigma'(x) / sigma(x)`
    pub fn a(&self, x: f64, window: usize) -> Result<f64> {
        let (s, ds, _) = self.sigma_terms(x, window)?;
        Ok(ds / s)
    }

    /// `b(x)` with the `psi_21` of `window`.
    pub fn b(&self, x: f64, window: usize) -> Result<f64> {
        let psi21 = *self
            .psi21_per_window
            .get(window)
            .ok_or_else(|| Error::InvalidArgument(format!("no psi21 for window {window}")))?;
        let (s, ds, d2s) = self.sigma_terms(x, window)?;
        Ok((2.0 * psi21 + s * ds * ds + s * s * d2s) / (2.0 * s))
    }

    pub fn sigma(&self) -> &SparseModel {
        &self.sigma
    }
}

pub fn build_drift_ode(sigma_model: &SparseModel, psi21: &[f64]) -> Result<DriftOdeCoeffs> {
    sigma_model.check_differentiable()?;
    Ok(DriftOdeCoeffs {
        sigma: sigma_model.clone(),
        psi21_per_window: psi21.to_vec(),
    })
}

/// Moving median over `2w + 1` windows, truncated at the ends.
pub fn smooth_psi21(psi21: &[f64], w: usize) -> Vec<f64> {
    if w == 0 {
        return psi21.to_vec();
    }
    let n = psi21.len();
    (0..n)
        .map(|k| {
            let lo = k.saturating_sub(w);
            let hi = (k + w + 1).min(n);
            let mut v = psi21[lo..hi].to_vec();
            v.sort_by(f64::total_cmp);
            let m = v.len();
            if m % 2 == 1 {
                v[m / 2]
            } else {
                0.5 * (v[m / 2 - 1] + v[m / 2])
            }
        })
        .collect()
}

/// Drift values at the window anchors.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftVector {
    pub values: Vec<f64>,
    pub mu0: f64,
}

/// `mu_k = mu_{k-1} + (a(X_{k-1}) mu_{k-1} + b_{k-1}(X_{k-1})) (X_k - X_{k-1})`.
///
/// The step is the state increment, not the time step.
pub fn solve_mu_euler(coeffs: &DriftOdeCoeffs, states: &[f64], mu0: f64) -> Result<DriftVector> {
    if states.is_empty() {
        return Err(Error::InvalidArgument("no states".into()));
    }
    if states.len() - 1 > coeffs.psi21_per_window.len() {
        return Err(Error::InvalidArgument(format!(
            "{} states need {} psi21 values, got {}",
            states.len(),
            states.len() - 1,
            coeffs.psi21_per_window.len()
        )));
    }
    if let Some(k) = states.iter().position(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "non-finite state at anchor {k}"
        )));
    }
    if !mu0.is_finite() {
        return Err(Error::DriftBlowup { window: 0 });
    }
    let mut values = Vec::with_capacity(states.len());
    values.push(mu0);
    let mut mu = mu0;
    for k in 1..states.len() {
        let x = states[k - 1];
        let slope = coeffs.a(x, k - 1)? * mu + coeffs.b(x, k - 1)?;
        mu += slope * (states[k] - x);
        if !mu.is_finite() {
            return Err(Error::DriftBlowup { window: k });
        }
        values.push(mu);
    }
    Ok(DriftVector { values, mu0 })
}

/// `dB^P_k = dB^Q_k - (mu_k / sigma_k) dt_k`.
pub fn recover_p_increments(
    q_path: &BrownianPath,
    drift: &DriftVector,
    sigma_vals: &[f64],
    grid: &TimeGrid,
) -> Result<BrownianPath> {
    let m = q_path.increments.len();
    if grid.n_steps() != m || sigma_vals.len() < m || drift.values.len() < m {
        return Err(Error::InvalidArgument(format!(
            "Girsanov map: {m} increments, {} steps, {} sigma values, {} drift values",
            grid.n_steps(),
            sigma_vals.len(),
            drift.values.len()
        )));
    }
    let increments = (0..m)
        .map(|k| {
            let s = sigma_vals[k];
            if !(s > 0.0) {
                return Err(Error::DegenerateDiffusion { window: k });
            }
            Ok(q_path.increments[k] - drift.values[k] / s * grid.dt(k))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut p = BrownianPath::new(grid.clone(), increments, Measure::Physical)?;
    p.origin = 0.0;
    Ok(p)
}

/// Per-window drift and noise table `k,t,x,mu_hat,delta_bq,delta_bp`.
/// The last anchor has no increment; its noise columns are left out, so the
/// table has `M` rows.
pub fn drift_table(
    grid: &TimeGrid,
    states: &[f64],
    drift: &DriftVector,
    bq: &BrownianPath,
    bp: &BrownianPath,
) -> CsvTable {
    let m = bq.increments.len();
    CsvTable::new()
        .index("k", (0..m).collect())
        .float("t", grid.times()[..m].to_vec())
        .float("x", states[..m].to_vec())
        .float("mu_hat", drift.values[..m].to_vec())
        .float("delta_bq", bq.increments.clone())
        .float("delta_bp", bp.increments.clone())
}

/// Reloads `(mu_hat, delta_bq, delta_bp)`; the terminal drift value is
/// carried separately since the table stops one anchor short.
pub fn read_drift_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let t = CsvTable::read(path)?;
    Ok((
        t.column("mu_hat")?,
        t.column("delta_bq")?,
        t.column("delta_bp")?,
    ))
}
