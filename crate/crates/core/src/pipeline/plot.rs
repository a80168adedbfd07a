use std::path::{Path, PathBuf};

use super::{PipelineConfig, RunReport, DIFFUSION_FILE, DRIFT_FILE, NOISE_FILE, TRAJECTORY_FILE};
use crate::diffusion::SubPartition;
use crate::error::{Error, Result};
use crate::io::CsvTable;
use crate::model::SparseModel;
use crate::path::{BrownianPath, CoefficientPair, Measure, Trajectory};

/// Panel files: drift, diffusion, noise, state.
pub const PLOT_FILES: [&str; 4] = [
    "plot_a_drift.csv",
    "plot_b_diffusion.csv",
    "plot_c_noise.csv",
    "plot_d_state.csv",
];

/// Ground truth of a simulated run.
#[derive(Debug, Clone)]
pub struct Truth {
    pub coeffs: CoefficientPair,
    /// Fine physical noise that drove the simulation.
    pub noise: BrownianPath,
}

/// Truth for a simulated run in `dir`, if its noise file is present.
pub fn load_truth(cfg: &PipelineConfig, dir: &Path) -> Result<Option<Truth>> {
    let (Some(coeffs), true) = (cfg.truth(), cfg.mode.simulates()) else {
        return Ok(None);
    };
    let noise_path = dir.join(NOISE_FILE);
    if !noise_path.is_file() {
        return Ok(None);
    }
    let traj = Trajectory::read_csv(&dir.join(TRAJECTORY_FILE))?;
    let noise = BrownianPath::read_csv(&noise_path, traj.grid, Measure::Physical)?;
    Ok(Some(Truth { coeffs, noise }))
}

/// Euler recursion `x_{k+1} = x_k + mu(x_k) dt_k + sigma(x_k) dB_k` on the
/// given steps, without positivity checks.
pub fn resimulate(
    mu: &SparseModel,
    sigma: &SparseModel,
    x0: f64,
    dt: &[f64],
    db: &[f64],
) -> Vec<f64> {
    let mut xs = Vec::with_capacity(dt.len() + 1);
    let mut x = x0;
    xs.push(x);
    for (h, b) in dt.iter().zip(db) {
        x += mu.eval(x) * h + sigma.eval(x) * b;
        xs.push(x);
    }
    xs
}

fn cumulative(increments: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    std::iter::once(0.0)
        .chain(increments.iter().map(|d| {
            acc += d;
            acc
        }))
        .collect()
}

/// Writes the four panel tables for a finished identification run.
///
/// Each table has a `t` column and one column per series; truth columns
/// appear only when `truth` is given.
pub fn emit_plot_data(report: &RunReport, truth: Option<&Truth>) -> Result<Vec<PathBuf>> {
    let (Some(mu), Some(sigma), Some(sigma_stlsq)) =
        (&report.mu, &report.sigma, &report.sigma_stlsq)
    else {
        return Err(Error::InvalidArgument(
            "plot data needs a completed identification run".into(),
        ));
    };
    let dir = &report.output_dir;
    let traj = Trajectory::read_csv(&dir.join(TRAJECTORY_FILE))?;
    let diff = CsvTable::read(&dir.join(DIFFUSION_FILE))?;
    let drift = CsvTable::read(&dir.join(DRIFT_FILE))?;
    let m = diff.column("k")?.len();
    let sub = SubPartition::uniform(&traj.grid, m)?;
    let coarse = sub.coarse_grid();
    let t_all = coarse.times().to_vec();
    let t = t_all[..m].to_vec();
    let states = sub.coarse_states(&traj);
    let x = states[..m].to_vec();

    let mut a = CsvTable::new()
        .float("t", t.clone())
        .float("x", x.clone())
        .float("mu_ode", drift.column("mu_hat")?)
        .float("mu_hat", x.iter().map(|&v| mu.eval(v)).collect());
    let mut b = CsvTable::new()
        .float("t", t)
        .float("x", x.clone())
        .float("sigma_qv", diff.column("sigma_hat")?)
        .float(
            "sigma_stlsq",
            x.iter().map(|&v| sigma_stlsq.eval(v)).collect(),
        )
        .float("sigma_hat", x.iter().map(|&v| sigma.eval(v)).collect());
    let dbq = drift.column("delta_bq")?;
    let dbp = drift.column("delta_bp")?;
    let mut c = CsvTable::new()
        .float("t", t_all.clone())
        .float("b_q", cumulative(&dbq))
        .float("b_p", cumulative(&dbp));
    if let Some(tr) = truth {
        a = a.float("mu_true", x.iter().map(|&v| tr.coeffs.mu.eval(v)).collect());
        b = b.float(
            "sigma_true",
            x.iter().map(|&v| tr.coeffs.sigma.eval(v)).collect(),
        );
        let coarse_noise = tr.noise.coarse_grain(sub.indices())?;
        c = c.float("b_p_true", cumulative(&coarse_noise.increments));
    }
    let d = CsvTable::new()
        .float("t", t_all)
        .float("x_observed", states.clone())
        .float(
            "x_resim",
            resimulate(mu, sigma, states[0], &coarse.steps(), &dbp),
        );

    let mut written = Vec::new();
    for (table, name) in [a, b, c, d].iter().zip(PLOT_FILES) {
        let p = dir.join(name);
        table.write(&p)?;
        written.push(p);
    }
    Ok(written)
}
