//! Iterated Stratonovich integrals of `(t, B^Q)` on a window and the
//! per-window regression of the state on them.
//!
//! For a window starting at `s` the features at each instant `u` are
//!
//! ```text
//! I_1   = u - s                 I_B   = B_u - B_s
//! I_12  = int (r - s) o dB_r    I_21  = int (B_r - B_s) dr
//! I_22  = (B_u - B_s)^2 / 2     I_222 = (B_u - B_s)^3 / 6
//! ```
//!
//! `I_12` and `I_21` are midpoint sums; the last two use their closed
//! Stratonovich forms.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::diffusion::DiffusionEstimate;
use crate::error::{Error, Result};
use crate::io::CsvTable;
use crate::linalg;
use crate::path::{BrownianPath, Measure, Trajectory};

/// Minimum instants per window: one more than the number of regressors.
pub const MIN_WINDOW_INSTANTS: usize = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct SignatureFeatures {
    /// First and last fine-grid index of the window.
    pub start: usize,
    pub end: usize,
    pub i1: Vec<f64>,
    pub ib: Vec<f64>,
    pub i12: Vec<f64>,
    pub i21: Vec<f64>,
    pub i22: Vec<f64>,
    pub i222: Vec<f64>,
}

impl SignatureFeatures {
    pub fn len(&self) -> usize {
        self.i1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.i1.is_empty()
    }
}

/// Features on fine instants `start..=end` of `q_path`.
pub fn compute_signature_features(
    q_path: &BrownianPath,
    start: usize,
    end: usize,
) -> Result<SignatureFeatures> {
    if end > q_path.grid.n_steps() || end < start {
        return Err(Error::InvalidArgument(format!(
            "window {start}..={end} outside a path of {} steps",
            q_path.grid.n_steps()
        )));
    }
    let n = end - start + 1;
    if n < MIN_WINDOW_INSTANTS {
        return Err(Error::InsufficientResolution {
            window: start,
            steps: n,
            required: MIN_WINDOW_INSTANTS,
        });
    }
    let times = q_path.grid.times();
    let s = times[start];

    let mut i1 = Vec::with_capacity(n);
    let mut ib = Vec::with_capacity(n);
    let mut i12 = Vec::with_capacity(n);
    let mut i21 = Vec::with_capacity(n);
    let (mut b, mut a12, mut a21) = (0.0, 0.0, 0.0);
    i1.push(0.0);
    ib.push(0.0);
    i12.push(0.0);
    i21.push(0.0);
    for i in start..end {
        let db = q_path.increments[i];
        let b_next = b + db;
        let (u, u_next) = (times[i] - s, times[i + 1] - s);
        a12 += 0.5 * (u + u_next) * db;
        a21 += 0.5 * (b + b_next) * (u_next - u);
        b = b_next;
        i1.push(u_next);
        ib.push(b);
        i12.push(a12);
        i21.push(a21);
    }
    let i22 = ib.iter().map(|b| 0.5 * b * b).collect();
    let i222 = ib.iter().map(|b| b * b * b / 6.0).collect();
    Ok(SignatureFeatures {
        start,
        end,
        i1,
        ib,
        i12,
        i21,
        i22,
        i222,
    })
}

/// Fine-scale martingale increments `dX_i / sigma_hat_k`, using the anchored
/// estimate of the window containing step `i`.
pub fn fine_q_path(traj: &Trajectory, est: &DiffusionEstimate) -> Result<BrownianPath> {
    let sub = &est.sub;
    let mut increments = vec![0.0; traj.grid.n_steps()];
    for k in 0..sub.n_windows() {
        let s = est.sigma_values[k];
        if !(s > 0.0) {
            return Err(Error::DegenerateDiffusion { window: k });
        }
        for i in sub.steps(k) {
            increments[i] = (traj.values[i + 1] - traj.values[i]) / s;
        }
    }
    BrownianPath::new(traj.grid.clone(), increments, Measure::Martingale)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiOptions {
    /// Ridge weight relative to the squared largest singular value of the
    /// window design; 0 gives the least-squares (pseudo-inverse) solution.
    pub ridge: f64,
    /// Leave the level-3 `I_222` column out of the regression.
    pub drop_i222: bool,
}

impl Default for PsiOptions {
    fn default() -> Self {
        Self {
            ridge: 1e-10,
            drop_i222: false,
        }
    }
}

/// Fitted coefficients of one window, in the order
/// `(psi1, psi2, psi12, psi21, psi22, psi222)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiEstimate {
    pub k: usize,
    pub psi1: f64,
    pub psi2: f64,
    pub psi12: f64,
    pub psi21: f64,
    pub psi22: f64,
    pub psi222: f64,
    pub residual_rms: f64,
    pub condition_number: f64,
    /// Condition number above 1e12 with no ridge.
    pub ill_conditioned: bool,
}

impl PsiEstimate {
    pub fn coefficients(&self) -> [f64; 6] {
        [
            self.psi1,
            self.psi2,
            self.psi12,
            self.psi21,
            self.psi22,
            self.psi222,
        ]
    }
}

/// Regresses `X_u - X_s` on the six features over the window's instants
/// after the anchor.
pub fn fit_window_psi(
    traj: &Trajectory,
    feats: &SignatureFeatures,
    k: usize,
    opts: PsiOptions,
) -> Result<PsiEstimate> {
    if feats.end >= traj.values.len() {
        return Err(Error::InvalidArgument("window outside trajectory".into()));
    }
    if !(opts.ridge >= 0.0) {
        return Err(Error::InvalidArgument("negative ridge".into()));
    }
    let rows = feats.len() - 1;
    let cols: Vec<&[f64]> = {
        let mut c: Vec<&[f64]> = vec![&feats.i1, &feats.ib, &feats.i12, &feats.i21, &feats.i22];
        if !opts.drop_i222 {
            c.push(&feats.i222);
        }
        c
    };
    let a = DMatrix::from_fn(rows, cols.len(), |i, j| cols[j][i + 1]);
    let x_s = traj.values[feats.start];
    let y = DVector::from_fn(rows, |i, _| traj.values[feats.start + i + 1] - x_s);

    let probe = linalg::ridge_svd(&a, &y, 0.0);
    let lambda = opts.ridge * probe.s_max * probe.s_max;
    let solve = if lambda > 0.0 {
        linalg::ridge_svd(&a, &y, lambda)
    } else {
        probe
    };
    let c = &solve.coefficients;
    let resid = &y - &a * c;
    let residual_rms = (resid.norm_squared() / rows as f64).sqrt();
    let psi222 = if opts.drop_i222 { 0.0 } else { c[5] };
    let est = PsiEstimate {
        k,
        psi1: c[0],
        psi2: c[1],
        psi12: c[2],
        psi21: c[3],
        psi22: c[4],
        psi222,
        residual_rms,
        condition_number: solve.condition_number,
        ill_conditioned: opts.ridge == 0.0 && solve.condition_number > 1e12,
    };
    if est.coefficients().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "non-finite coefficients in window {k}"
        )));
    }
    Ok(est)
}

/// Features and regression for every window of the diffusion estimate's
/// sub-partition.
pub fn estimate_all_psi(
    traj: &Trajectory,
    est: &DiffusionEstimate,
    opts: PsiOptions,
) -> Result<Vec<PsiEstimate>> {
    let q = fine_q_path(traj, est)?;
    let idx = est.sub.indices();
    (0..est.sub.n_windows())
        .into_par_iter()
        .map(|k| {
            let feats =
                compute_signature_features(&q, idx[k], idx[k + 1]).map_err(|e| match e {
                    Error::InsufficientResolution {
                        steps, required, ..
                    } => Error::InsufficientResolution {
                        window: k,
                        steps,
                        required,
                    },
                    e => e,
                })?;
            fit_window_psi(traj, &feats, k, opts)
        })
        .collect()
}

pub fn psi_table(psis: &[PsiEstimate], coarse_times: &[f64]) -> CsvTable {
    let col = |f: fn(&PsiEstimate) -> f64| psis.iter().map(f).collect::<Vec<_>>();
    CsvTable::new()
        .index("k", psis.iter().map(|p| p.k).collect())
        .float("t", psis.iter().map(|p| coarse_times[p.k]).collect())
        .float("psi1", col(|p| p.psi1))
        .float("psi2", col(|p| p.psi2))
        .float("psi12", col(|p| p.psi12))
        .float("psi21", col(|p| p.psi21))
        .float("psi22", col(|p| p.psi22))
        .float("psi222", col(|p| p.psi222))
        .float("residual_rms", col(|p| p.residual_rms))
        .float("cond", col(|p| p.condition_number))
}

pub fn read_psi_csv(path: &Path) -> Result<Vec<PsiEstimate>> {
    let t = CsvTable::read(path)?;
    let k = t.column("k")?;
    let c = |n: &str| t.column(n);
    let (p1, p2, p12, p21, p22, p222, rr, cond) = (
        c("psi1")?,
        c("psi2")?,
        c("psi12")?,
        c("psi21")?,
        c("psi22")?,
        c("psi222")?,
        c("residual_rms")?,
        c("cond")?,
    );
    Ok((0..k.len())
        .map(|i| PsiEstimate {
            k: k[i] as usize,
            psi1: p1[i],
            psi2: p2[i],
            psi12: p12[i],
            psi21: p21[i],
            psi22: p22[i],
            psi222: p222[i],
            residual_rms: rr[i],
            condition_number: cond[i],
            ill_conditioned: false,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::{make_uniform_grid, sample_brownian, TimeGrid};

    fn path_from_values(grid: TimeGrid, values: &[f64]) -> BrownianPath {
        let inc = values.windows(2).map(|w| w[1] - w[0]).collect();
        BrownianPath::new(grid, inc, Measure::Martingale).unwrap()
    }

    #[test]
    fn smooth_identity_path() {
        // B_u = u on [s, s + h]: the discrete sums are exact for linear integrands
        let (s, h) = (0.3, 0.2);
        let g = make_uniform_grid(s, s + h, 64).unwrap();
        let b = path_from_values(g.clone(), g.times());
        let f = compute_signature_features(&b, 0, 64).unwrap();
        let e = 1e-15;
        assert!((f.i1[64] - h).abs() < e);
        assert!((f.ib[64] - h).abs() < e);
        assert!((f.i12[64] - h * h / 2.0).abs() < e);
        assert!((f.i21[64] - h * h / 2.0).abs() < e);
        assert!((f.i22[64] - h * h / 2.0).abs() < e);
        assert!((f.i222[64] - h * h * h / 6.0).abs() < e);
    }

    #[test]
    fn features_vanish_at_anchor() {
        let g = make_uniform_grid(0.0, 1.0, 100).unwrap();
        let b = sample_brownian(&g, 3);
        let f = compute_signature_features(&b, 20, 40).unwrap();
        for v in [&f.i1, &f.ib, &f.i12, &f.i21, &f.i22, &f.i222] {
            assert_eq!(v[0], 0.0);
        }
        assert_eq!(f.len(), 21);
    }

    #[test]
    fn too_few_instants() {
        let g = make_uniform_grid(0.0, 1.0, 100).unwrap();
        let b = sample_brownian(&g, 3);
        assert!(matches!(
            compute_signature_features(&b, 10, 15),
            Err(Error::InsufficientResolution { steps: 6, .. })
        ));
        assert!(compute_signature_features(&b, 10, 16).is_ok());
    }

    #[test]
    fn integration_by_parts_under_refinement() {
        // oracle: summation by parts on the discrete sums, at three resolutions
        for n in [64usize, 128, 256] {
            let g = make_uniform_grid(0.0, 0.01, n).unwrap();
            let b = sample_brownian(&g, 99);
            let f = compute_signature_features(&b, 0, n).unwrap();
            for u in 0..=n {
                let lhs = f.i12[u] + f.i21[u];
                let rhs = f.i1[u] * f.ib[u];
                let scale = f.i1[u].abs() * f.ib[u].abs() + f.i12[u].abs() + f.i21[u].abs();
                assert!(
                    (lhs - rhs).abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE),
                    "n {n} u {u}"
                );
            }
        }
    }

    #[test]
    fn exact_linear_combination_recovered() {
        let g = make_uniform_grid(0.0, 0.01, 100).unwrap();
        let b = sample_brownian(&g, 12);
        let f = compute_signature_features(&b, 0, 100).unwrap();
        let beta = [0.7, 0.3, -1.2, 2.5, 0.09, -0.4];
        let x0 = 1.3;
        let values: Vec<f64> = (0..=100)
            .map(|u| {
                x0 + beta[0] * f.i1[u]
                    + beta[1] * f.ib[u]
                    + beta[2] * f.i12[u]
                    + beta[3] * f.i21[u]
                    + beta[4] * f.i22[u]
                    + beta[5] * f.i222[u]
            })
            .collect();
        let traj = Trajectory::new(g, values).unwrap();
        let opts = PsiOptions {
            ridge: 0.0,
            drop_i222: false,
        };
        let est = fit_window_psi(&traj, &f, 0, opts).unwrap();
        for (got, want) in est.coefficients().iter().zip(beta) {
            assert!((got - want).abs() < 1e-8, "{got} vs {want}");
        }
        assert!(est.residual_rms < 1e-14);
    }

    #[test]
    fn zero_diffusion_window_is_pure_slope() {
        let g = make_uniform_grid(0.0, 0.01, 50).unwrap();
        let b = BrownianPath::new(g.clone(), vec![0.0; 50], Measure::Martingale).unwrap();
        let f = compute_signature_features(&b, 0, 50).unwrap();
        let traj =
            Trajectory::new(g.clone(), g.times().iter().map(|t| 2.0 + 0.8 * t).collect()).unwrap();
        for ridge in [0.0, 1e-10] {
            let est = fit_window_psi(
                &traj,
                &f,
                0,
                PsiOptions {
                    ridge,
                    drop_i222: false,
                },
            )
            .unwrap();
            assert!((est.psi1 - 0.8).abs() < 1e-9, "{}", est.psi1);
            for v in &est.coefficients()[1..] {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn drop_level_three_column() {
        let g = make_uniform_grid(0.0, 0.01, 100).unwrap();
        let b = sample_brownian(&g, 2);
        let f = compute_signature_features(&b, 0, 100).unwrap();
        let traj = Trajectory::new(
            g,
            f.ib.iter().map(|v| 1.0 + 0.4 * v + f64::sin(*v)).collect(),
        )
        .unwrap();
        let est = fit_window_psi(
            &traj,
            &f,
            0,
            PsiOptions {
                ridge: 0.0,
                drop_i222: true,
            },
        )
        .unwrap();
        assert_eq!(est.psi222, 0.0);
    }

    #[test]
    fn window_anchored_reconstruction_is_degenerate() {
        // dB^Q_i = dX_i / sigma_k makes X_u - X_s = sigma_k I_B exactly, so the
        // regression puts everything on psi2
        use crate::diffusion::{estimate_sigma_vector, SubPartition};
        use crate::path::{simulate_euler_maruyama, CoefficientPair};
        let g = make_uniform_grid(0.0, 1.0, 10_000).unwrap();
        let noise = sample_brownian(&g, 1);
        let c = CoefficientPair::polynomial(&[0.0, 0.5], &[0.0, 0.3]);
        let x = simulate_euler_maruyama(&c, 1.0, &noise).unwrap();
        let sub = SubPartition::uniform(&g, 100).unwrap();
        let est = estimate_sigma_vector(&x, &sub).unwrap();
        let psis = estimate_all_psi(
            &x,
            &est,
            PsiOptions {
                ridge: 0.0,
                drop_i222: false,
            },
        )
        .unwrap();
        for (p, s) in psis.iter().zip(&est.sigma_values) {
            assert!((p.psi2 - s).abs() < 1e-9 * s);
            assert!(p.psi21.abs() < 1e-6, "{}", p.psi21);
            assert!(p.residual_rms < 1e-12);
        }
    }
}
