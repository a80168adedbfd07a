//! End-to-end orchestration: configuration, staged execution with cached
//! intermediates, artifacts on disk and plot-ready tables.

mod config;
mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use config::{Mode, NoiseSigma, PipelineConfig, OUTPUT_DIR_ENV};
pub use plot::{emit_plot_data, load_truth, Truth, PLOT_FILES};

use crate::diffusion::{
    estimate_sigma_vector, fit_sigma_stlsq, q_increments_from_sigma, reconstruct_q_increments,
    DiffusionEstimate, SubPartition,
};
use crate::drift::{
    build_drift_ode, drift_table, read_drift_csv, recover_p_increments, smooth_psi21,
    solve_mu_euler,
};
use crate::error::{Error, Result};
use crate::io::CsvTable;
use crate::model::SparseModel;
use crate::path::{
    sample_brownian, simulate_euler_maruyama, BrownianPath, Measure, TimeGrid, Trajectory,
};
use crate::signature::{estimate_all_psi, psi_table, read_psi_csv, PsiEstimate};
use crate::sparse::{build_ssisde_design, ssisde_identify, CvReport};

pub const CONFIG_FILE: &str = "config.txt";
pub const PARTIAL_MARKER: &str = ".partial";
pub const REPORT_FILE: &str = "report.json";

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const NOISE_FILE: &str = "noise.csv";
pub const DIFFUSION_FILE: &str = "diffusion.csv";
pub const SIGMA_STLSQ_FILE: &str = "sigma_model.json";
pub const PSI_FILE: &str = "psi.csv";
pub const DRIFT_FILE: &str = "drift.csv";
pub const MU_MODEL_FILE: &str = "mu_model.json";
pub const SIGMA_MODEL_FILE: &str = "sigma_ssisde_model.json";
pub const CV_REPORT_FILE: &str = "cv_report.json";
pub const CV_SURFACE_FILE: &str = "cv_surface.csv";
pub const DELTA_FILE: &str = "delta_n.csv";

/// Pipeline stages in execution order, with the files each one owns.
pub const STAGES: &[(&str, &[&str])] = &[
    ("simulate", &[TRAJECTORY_FILE, NOISE_FILE]),
    ("diffusion", &[DIFFUSION_FILE, SIGMA_STLSQ_FILE]),
    ("signature", &[PSI_FILE]),
    ("drift", &[DRIFT_FILE]),
    (
        "sparse",
        &[
            MU_MODEL_FILE,
            SIGMA_MODEL_FILE,
            CV_REPORT_FILE,
            CV_SURFACE_FILE,
            DELTA_FILE,
        ],
    ),
];

/// Headline numbers of the cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub alpha_star: f64,
    pub rho_star: f64,
    pub epsilon: f64,
    pub alpha_dagger: f64,
    pub rho_dagger: f64,
    pub n_tilde: Option<usize>,
    pub n_tilde_mu: Option<usize>,
    pub n_tilde_sigma: Option<usize>,
    /// Grid cells with at least one fit that hit the sweep limit.
    pub unconverged_cells: usize,
}

impl CvSummary {
    fn from_report(r: &CvReport) -> Self {
        Self {
            alpha_star: r.alpha_star,
            rho_star: r.rho_star,
            epsilon: r.epsilon,
            alpha_dagger: r.alpha_dagger,
            rho_dagger: r.rho_dagger,
            n_tilde: r.delta_total.n_tilde,
            n_tilde_mu: r.delta_mu.n_tilde,
            n_tilde_sigma: r.delta_sigma.n_tilde,
            unconverged_cells: r.cells.iter().filter(|c| c.unconverged > 0).count(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: String,
    pub output_dir: PathBuf,
    /// Thresholded least-squares fit of the diffusion from windowed
    /// quadratic variation.
    pub sigma_stlsq: Option<SparseModel>,
    pub mu: Option<SparseModel>,
    pub sigma: Option<SparseModel>,
    /// In-sample mean squared one-step error of the final model.
    pub mse: Option<f64>,
    pub cv: Option<CvSummary>,
    /// Files written, relative to `output_dir`.
    pub manifest: Vec<String>,
    /// Wall-clock time per stage; left out of the report file.
    #[serde(skip)]
    pub timings: Vec<(String, Duration)>,
    /// Stages loaded from cached files rather than recomputed.
    #[serde(skip)]
    pub reused: Vec<String>,
}

impl RunReport {
    pub fn path(&self, file: &str) -> PathBuf {
        self.output_dir.join(file)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let mut r: RunReport = serde_json::from_str(&fs::read_to_string(dir.join(REPORT_FILE))?)?;
        r.output_dir = dir.to_path_buf();
        Ok(r)
    }
}

fn hint(stage: &str) -> &'static str {
    match stage {
        "simulate" => "check mu, sigma, x0 and the time grid; the diffusion must stay positive along the path",
        "diffusion" => "every window needs at least 2 fine steps; lower `windows` or raise `n_steps`",
        "q_increments" => "the trajectory is flat over a window or the fitted sigma is not positive there; try `noise_sigma = window` or a different `lib_sigma`",
        "sigma_fit" => "the sigma library is too rich for the observed state range; shrink `lib_sigma`",
        "signature" => "windows need at least 7 fine instants; lower `windows` or raise `n_steps`",
        "drift" => "the fitted sigma vanishes or the drift recursion diverges; check `lib_sigma`, `mu0` or enable `psi21_smoothing`",
        "sparse" => "narrow the libraries or the alpha grid, or raise `max_sweeps`",
        _ => "check the output directory and input files",
    }
}

fn tag<T>(stage: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        e @ Error::Stage { .. } => e,
        e => e.in_stage(stage, hint(stage)),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Bookkeeping shared by the stages of one run.
struct Run<'a> {
    cfg: &'a PipelineConfig,
    dir: PathBuf,
    /// Earlier outputs in `dir` belong to the same settings.
    cache_ok: bool,
    /// An upstream stage was recomputed, so nothing downstream is reusable.
    dirty: bool,
    report: RunReport,
}

impl Run<'_> {
    fn cached(&mut self, stage: &str) -> bool {
        let files = STAGES
            .iter()
            .find(|(s, _)| *s == stage)
            .map_or(&[][..], |(_, f)| *f);
        let hit = self.cache_ok && !self.dirty && files.iter().all(|f| self.dir.join(f).is_file());
        if hit {
            self.report.reused.push(stage.to_string());
            self.wrote(files);
        } else {
            self.dirty = true;
        }
        hit
    }

    fn wrote(&mut self, files: &[&str]) {
        for f in files {
            if !self.report.manifest.iter().any(|m| m == f) {
                self.report.manifest.push(f.to_string());
            }
        }
    }

    fn time<T>(&mut self, stage: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f(self);
        self.report
            .timings
            .push((stage.to_string(), start.elapsed()));
        out
    }
}

/// Intermediate results of the identification stages.
struct Diffusion {
    sub: SubPartition,
    est: DiffusionEstimate,
    bq: BrownianPath,
    sigma_model: SparseModel,
}

fn stage_simulate(run: &mut Run) -> Result<Trajectory> {
    let cfg = run.cfg;
    if cfg.mode.simulates() {
        if run.cached("simulate") {
            return tag(
                "simulate",
                Trajectory::read_csv(&run.dir.join(TRAJECTORY_FILE)),
            );
        }
        let coeffs = cfg.truth().expect("validated");
        let grid = tag(
            "simulate",
            TimeGrid::uniform(cfg.t0, cfg.t_end, cfg.n_steps),
        )?;
        let noise = sample_brownian(&grid, cfg.seed);
        let traj = tag("simulate", simulate_euler_maruyama(&coeffs, cfg.x0, &noise))?;
        tag("simulate", traj.write_csv(&run.dir.join(TRAJECTORY_FILE)))?;
        tag("simulate", noise.write_csv(&run.dir.join(NOISE_FILE)))?;
        run.wrote(&[TRAJECTORY_FILE, NOISE_FILE]);
        Ok(traj)
    } else {
        let input = cfg.input.as_ref().expect("validated");
        let traj = tag("input", Trajectory::read_csv(input))?;
        // a different input invalidates everything downstream
        run.dirty = true;
        tag("input", traj.write_csv(&run.dir.join(TRAJECTORY_FILE)))?;
        run.wrote(&[TRAJECTORY_FILE]);
        Ok(traj)
    }
}

fn stage_diffusion(run: &mut Run, traj: &Trajectory) -> Result<Diffusion> {
    let cfg = run.cfg;
    let sub = tag("diffusion", SubPartition::uniform(&traj.grid, cfg.windows))?;
    if run.cached("diffusion") {
        let est = tag(
            "diffusion",
            DiffusionEstimate::read_csv(&run.dir.join(DIFFUSION_FILE), sub.clone()),
        )?;
        let sigma_model: SparseModel =
            tag("diffusion", read_json(&run.dir.join(SIGMA_STLSQ_FILE)))?;
        let bq = tag("q_increments", reconstruct_q_increments(traj, &est))?;
        return Ok(Diffusion {
            sub,
            est,
            bq,
            sigma_model,
        });
    }
    let est = tag("diffusion", estimate_sigma_vector(traj, &sub))?;
    tag(
        "diffusion",
        est.write_csv(&run.dir.join(DIFFUSION_FILE), traj),
    )?;
    run.wrote(&[DIFFUSION_FILE]);
    let bq = tag("q_increments", reconstruct_q_increments(traj, &est))?;
    let fit = tag(
        "sigma_fit",
        fit_sigma_stlsq(&est.pairs(traj), &cfg.lib_sigma, cfg.stlsq()),
    )?;
    if fit.empty {
        return Err(Error::EmptyModel.in_stage("sigma_fit", hint("sigma_fit")));
    }
    tag(
        "sigma_fit",
        write_json(&run.dir.join(SIGMA_STLSQ_FILE), &fit.model),
    )?;
    run.wrote(&[SIGMA_STLSQ_FILE]);
    Ok(Diffusion {
        sub,
        est,
        bq,
        sigma_model: fit.model,
    })
}

fn stage_signature(run: &mut Run, traj: &Trajectory, d: &Diffusion) -> Result<Vec<PsiEstimate>> {
    let path = run.dir.join(PSI_FILE);
    if run.cached("signature") {
        return tag("signature", read_psi_csv(&path));
    }
    let psis = tag("signature", estimate_all_psi(traj, &d.est, run.cfg.psi()))?;
    tag(
        "signature",
        psi_table(&psis, d.sub.coarse_grid().times()).write(&path),
    )?;
    run.wrote(&[PSI_FILE]);
    Ok(psis)
}

/// Drift values and P-increments per window.
fn stage_drift(
    run: &mut Run,
    traj: &Trajectory,
    d: &Diffusion,
    psis: &[PsiEstimate],
) -> Result<(Vec<f64>, BrownianPath)> {
    let path = run.dir.join(DRIFT_FILE);
    let coarse = d.sub.coarse_grid();
    if run.cached("drift") {
        let (mu_hat, _, dbp) = tag("drift", read_drift_csv(&path))?;
        let bp = tag("drift", BrownianPath::new(coarse, dbp, Measure::Physical))?;
        return Ok((mu_hat, bp));
    }
    let cfg = run.cfg;
    let states = d.sub.coarse_states(traj);
    let mu0 = match (cfg.mu0, &cfg.mu) {
        (Some(m), _) => m,
        (None, Some(mu)) => mu.eval(states[0]),
        (None, None) => unreachable!("validated"),
    };
    let psi21: Vec<f64> = psis.iter().map(|p| p.psi21).collect();
    let psi21 = smooth_psi21(&psi21, cfg.psi21_smoothing);
    let ode = tag("drift", build_drift_ode(&d.sigma_model, &psi21))?;
    let drift = tag("drift", solve_mu_euler(&ode, &states, mu0))?;
    let m = d.bq.increments.len();
    let (bq, sigma_vals) = match cfg.noise_sigma {
        NoiseSigma::Window => (d.bq.clone(), d.est.sigma_values.clone()),
        NoiseSigma::Fitted => {
            let s: Vec<f64> = states[..m].iter().map(|&x| d.sigma_model.eval(x)).collect();
            (
                tag(
                    "q_increments",
                    q_increments_from_sigma(&states, &s, &coarse),
                )?,
                s,
            )
        }
    };
    let bp = tag(
        "girsanov",
        recover_p_increments(&bq, &drift, &sigma_vals, &coarse),
    )?;
    tag(
        "drift",
        drift_table(&coarse, &states, &drift, &bq, &bp).write(&path),
    )?;
    run.wrote(&[DRIFT_FILE]);
    Ok((drift.values[..m].to_vec(), bp))
}

fn stage_sparse(run: &mut Run, traj: &Trajectory, d: &Diffusion, bp: &BrownianPath) -> Result<()> {
    let cfg = run.cfg;
    let states = d.sub.coarse_states(traj);
    let dt = d.sub.coarse_grid().steps();
    let (mu, sigma, mse, report) = if run.cached("sparse") {
        let mu: SparseModel = tag("sparse", read_json(&run.dir.join(MU_MODEL_FILE)))?;
        let sigma: SparseModel = tag("sparse", read_json(&run.dir.join(SIGMA_MODEL_FILE)))?;
        let report = tag("sparse", CvReport::read_json(&run.dir.join(CV_REPORT_FILE)))?;
        let design = tag(
            "sparse",
            build_ssisde_design(&states, &dt, &bp.increments, &cfg.lib_mu, &cfg.lib_sigma),
        )?;
        let beta: Vec<f64> = mu
            .coefficients
            .iter()
            .chain(&sigma.coefficients)
            .copied()
            .collect();
        let mse = design.mse(&beta);
        (mu, sigma, mse, report)
    } else {
        let id = tag(
            "sparse",
            ssisde_identify(
                &states,
                &dt,
                &bp.increments,
                &cfg.lib_mu,
                &cfg.lib_sigma,
                &cfg.cv(),
            ),
        )?;
        if id.mu.is_zero() && id.sigma.is_zero() {
            return Err(Error::EmptyModel.in_stage("sparse", hint("sparse")));
        }
        let dir = &run.dir;
        tag("sparse", write_json(&dir.join(MU_MODEL_FILE), &id.mu))?;
        tag("sparse", write_json(&dir.join(SIGMA_MODEL_FILE), &id.sigma))?;
        tag("sparse", id.report.write_json(&dir.join(CV_REPORT_FILE)))?;
        tag(
            "sparse",
            id.report.surface_table().write(&dir.join(CV_SURFACE_FILE)),
        )?;
        tag("sparse", id.report.delta_csv().write(&dir.join(DELTA_FILE)))?;
        run.wrote(&[
            MU_MODEL_FILE,
            SIGMA_MODEL_FILE,
            CV_REPORT_FILE,
            CV_SURFACE_FILE,
            DELTA_FILE,
        ]);
        (id.mu, id.sigma, id.mse, id.report)
    };
    run.report.cv = Some(CvSummary::from_report(&report));
    run.report.mu = Some(mu);
    run.report.sigma = Some(sigma);
    run.report.mse = Some(mse);
    Ok(())
}

fn run_stages(run: &mut Run) -> Result<()> {
    let traj = run.time("simulate", stage_simulate)?;
    if !run.cfg.mode.identifies() {
        return Ok(());
    }
    let d = run.time("diffusion", |r| stage_diffusion(r, &traj))?;
    run.report.sigma_stlsq = Some(d.sigma_model.clone());
    let psis = run.time("signature", |r| stage_signature(r, &traj, &d))?;
    let (_, bp) = run.time("drift", |r| stage_drift(r, &traj, &d, &psis))?;
    run.time("sparse", |r| stage_sparse(r, &traj, &d, &bp))
}

/// Runs the configured stages, writing every artifact under the output
/// directory. Stages whose outputs already exist for the same settings are
/// loaded instead of recomputed. On failure a `.partial` marker naming the
/// failed stage is left next to the outputs written so far.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunReport> {
    tag("config", cfg.validate())?;
    let dir = cfg.output_dir.clone();
    tag("io", fs::create_dir_all(&dir).map_err(Error::from))?;
    let key = cfg.cache_key();
    let cache_ok = fs::read_to_string(dir.join(CONFIG_FILE))
        .is_ok_and(|old| PipelineConfig::parse(&old).is_ok_and(|c| c.cache_key() == key));
    let mut run = Run {
        cfg,
        dir: dir.clone(),
        cache_ok,
        dirty: false,
        report: RunReport {
            mode: cfg.mode.as_str().to_string(),
            output_dir: dir.clone(),
            sigma_stlsq: None,
            mu: None,
            sigma: None,
            mse: None,
            cv: None,
            manifest: Vec::new(),
            timings: Vec::new(),
            reused: Vec::new(),
        },
    };
    let marker = dir.join(PARTIAL_MARKER);
    let result = tag(
        "io",
        fs::write(dir.join(CONFIG_FILE), cfg.to_text()).map_err(Error::from),
    )
    .and_then(|_| run_stages(&mut run));
    match result {
        Ok(()) => {
            run.report.manifest.insert(0, CONFIG_FILE.to_string());
            run.report.manifest.push(REPORT_FILE.to_string());
            tag("io", write_json(&dir.join(REPORT_FILE), &run.report))?;
            if marker.exists() {
                tag("io", fs::remove_file(&marker).map_err(Error::from))?;
            }
            Ok(run.report)
        }
        Err(e) => {
            let stage = match &e {
                Error::Stage { stage, .. } => *stage,
                _ => "unknown",
            };
            // best effort; the original error matters more
            let _ = fs::write(&marker, format!("stage = {stage}\nerror = {e}\n"));
            Err(e)
        }
    }
}

/// Reads a table written by the pipeline.
pub fn read_table(dir: &Path, file: &str) -> Result<CsvTable> {
    CsvTable::read(&dir.join(file))
}
