use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::diffusion::StlsqOptions;
use crate::error::{Error, Result};
use crate::model::{Basis, FunctionLibrary, SparseModel};
use crate::path::CoefficientPair;
use crate::signature::PsiOptions;
use crate::sparse::{geomspace, CvConfig};

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "SSISDE_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Simulate only.
    Simulate,
    /// Identify from an existing trajectory.
    Identify,
    /// Simulate, then identify.
    Full,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Identify => "identify",
            Mode::Full => "full",
        }
    }

    pub fn simulates(self) -> bool {
        self != Mode::Identify
    }

    pub fn identifies(self) -> bool {
        self != Mode::Simulate
    }
}

/// Diffusion values that normalize the coarse noise increments and the
/// drift-to-diffusion ratio of the measure change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseSigma {
    /// The fitted diffusion model at the window anchors.
    Fitted,
    /// The windowed quadratic-variation estimates.
    Window,
}

impl NoiseSigma {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseSigma::Fitted => "fitted",
            NoiseSigma::Window => "window",
        }
    }
}

impl FromStr for NoiseSigma {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fitted" => Ok(NoiseSigma::Fitted),
            "window" => Ok(NoiseSigma::Window),
            _ => Err(Error::Parse(format!("unknown noise_sigma `{s}`"))),
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simulate" => Ok(Mode::Simulate),
            "identify" => Ok(Mode::Identify),
            "full" => Ok(Mode::Full),
            _ => Err(Error::Parse(format!("unknown mode `{s}`"))),
        }
    }
}

/// Run settings. Every field has a key in the flat `key = value` file format.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub mode: Mode,
    /// True drift, used when simulating.
    pub mu: Option<SparseModel>,
    /// True diffusion, used when simulating.
    pub sigma: Option<SparseModel>,
    pub x0: f64,
    /// `mu(X_0)`; taken from the true drift when unset.
    pub mu0: Option<f64>,
    pub t0: f64,
    pub t_end: f64,
    /// Fine steps `N`.
    pub n_steps: usize,
    /// Coarse windows `M`.
    pub windows: usize,
    pub seed: u64,
    /// Trajectory CSV for identify mode.
    pub input: Option<PathBuf>,
    pub lib_mu: FunctionLibrary,
    pub lib_sigma: FunctionLibrary,
    pub stlsq_threshold: f64,
    pub stlsq_ridge: f64,
    pub stlsq_max_iters: usize,
    pub cv_folds: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub alpha_count: usize,
    pub rhos: Vec<f64>,
    pub max_sweeps: usize,
    pub psi_ridge: f64,
    pub drop_i222: bool,
    /// Half-width of the moving median applied to `psi_21`; 0 disables it.
    pub psi21_smoothing: usize,
    pub noise_sigma: NoiseSigma,
    pub output_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let cv = CvConfig::default();
        let stlsq = StlsqOptions::default();
        let psi = PsiOptions::default();
        Self {
            mode: Mode::Full,
            mu: None,
            sigma: None,
            x0: 1.0,
            mu0: None,
            t0: 0.0,
            t_end: 1.0,
            n_steps: 100_000,
            windows: 1000,
            seed: 0,
            input: None,
            lib_mu: FunctionLibrary::monomials("mu", 5),
            lib_sigma: FunctionLibrary::monomials("sigma", 5),
            stlsq_threshold: stlsq.threshold,
            stlsq_ridge: stlsq.ridge,
            stlsq_max_iters: stlsq.max_iters,
            cv_folds: cv.k,
            alpha_min: 1e-5,
            alpha_max: 10.0,
            alpha_count: 35,
            rhos: cv.rhos,
            max_sweeps: cv.solver.max_sweeps,
            psi_ridge: psi.ridge,
            drop_i222: psi.drop_i222,
            psi21_smoothing: 0,
            noise_sigma: NoiseSigma::Fitted,
            output_dir: PathBuf::from("ssisde-out"),
        }
    }
}

/// `x:0.5, x^2:0.3` over the term names of `lib`.
fn parse_model(text: &str, lib_name: &str) -> Result<SparseModel> {
    let mut terms = Vec::new();
    let mut coefs = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, c) = part
            .rsplit_once(':')
            .ok_or_else(|| Error::Parse(format!("expected `term:coefficient`, got `{part}`")))?;
        terms.push(Basis::parse(name)?);
        coefs.push(parse_num::<f64>(c.trim(), "coefficient")?);
    }
    SparseModel::new(FunctionLibrary::new(lib_name, terms)?, coefs)
}

fn render_model(m: &SparseModel) -> String {
    m.library
        .names()
        .iter()
        .zip(&m.coefficients)
        .map(|(n, c)| format!("{n}:{c}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn parse_library(text: &str, name: &str) -> Result<FunctionLibrary> {
    let names: Vec<String> = text
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    FunctionLibrary::from_names(name, &names)
}

fn parse_num<T: FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Parse(format!("bad {what} `{s}`")))
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| parse_num(p, "number"))
        .collect()
}

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl PipelineConfig {
    /// Known keys, in the order they are written.
    pub const KEYS: &'static [&'static str] = &[
        "mode",
        "mu",
        "sigma",
        "x0",
        "mu0",
        "t0",
        "t_end",
        "n_steps",
        "windows",
        "seed",
        "input",
        "lib_mu",
        "lib_sigma",
        "stlsq_threshold",
        "stlsq_ridge",
        "stlsq_max_iters",
        "cv_folds",
        "alpha_min",
        "alpha_max",
        "alpha_count",
        "rhos",
        "max_sweeps",
        "psi_ridge",
        "drop_i222",
        "psi21_smoothing",
        "noise_sigma",
        "output_dir",
    ];

    /// Sets one key; an empty value clears optional keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "mode" => self.mode = v.parse()?,
            "mu" => self.mu = (!v.is_empty()).then(|| parse_model(v, "mu")).transpose()?,
            "sigma" => {
                self.sigma = (!v.is_empty())
                    .then(|| parse_model(v, "sigma"))
                    .transpose()?
            }
            "x0" => self.x0 = parse_num(v, "x0")?,
            "mu0" => self.mu0 = (!v.is_empty()).then(|| parse_num(v, "mu0")).transpose()?,
            "t0" => self.t0 = parse_num(v, "t0")?,
            "t_end" => self.t_end = parse_num(v, "t_end")?,
            "n_steps" => self.n_steps = parse_num(v, "n_steps")?,
            "windows" => self.windows = parse_num(v, "windows")?,
            "seed" => self.seed = parse_num(v, "seed")?,
            "input" => self.input = (!v.is_empty()).then(|| PathBuf::from(v)),
            "lib_mu" => self.lib_mu = parse_library(v, "mu")?,
            "lib_sigma" => self.lib_sigma = parse_library(v, "sigma")?,
            "stlsq_threshold" => self.stlsq_threshold = parse_num(v, "stlsq_threshold")?,
            "stlsq_ridge" => self.stlsq_ridge = parse_num(v, "stlsq_ridge")?,
            "stlsq_max_iters" => self.stlsq_max_iters = parse_num(v, "stlsq_max_iters")?,
            "cv_folds" => self.cv_folds = parse_num(v, "cv_folds")?,
            "alpha_min" => self.alpha_min = parse_num(v, "alpha_min")?,
            "alpha_max" => self.alpha_max = parse_num(v, "alpha_max")?,
            "alpha_count" => self.alpha_count = parse_num(v, "alpha_count")?,
            "rhos" => self.rhos = parse_list(v)?,
            "max_sweeps" => self.max_sweeps = parse_num(v, "max_sweeps")?,
            "psi_ridge" => self.psi_ridge = parse_num(v, "psi_ridge")?,
            "drop_i222" => self.drop_i222 = parse_num(v, "drop_i222")?,
            "psi21_smoothing" => self.psi21_smoothing = parse_num(v, "psi21_smoothing")?,
            "noise_sigma" => self.noise_sigma = v.parse()?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            other => return Err(Error::Parse(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            self.set(k, v)
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    fn value(&self, key: &str) -> String {
        match key {
            "mode" => self.mode.as_str().to_string(),
            "mu" => self.mu.as_ref().map(render_model).unwrap_or_default(),
            "sigma" => self.sigma.as_ref().map(render_model).unwrap_or_default(),
            "x0" => self.x0.to_string(),
            "mu0" => self.mu0.map(|v| v.to_string()).unwrap_or_default(),
            "t0" => self.t0.to_string(),
            "t_end" => self.t_end.to_string(),
            "n_steps" => self.n_steps.to_string(),
            "windows" => self.windows.to_string(),
            "seed" => self.seed.to_string(),
            "input" => self
                .input
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
            "lib_mu" => self.lib_mu.names().join(","),
            "lib_sigma" => self.lib_sigma.names().join(","),
            "stlsq_threshold" => self.stlsq_threshold.to_string(),
            "stlsq_ridge" => self.stlsq_ridge.to_string(),
            "stlsq_max_iters" => self.stlsq_max_iters.to_string(),
            "cv_folds" => self.cv_folds.to_string(),
            "alpha_min" => self.alpha_min.to_string(),
            "alpha_max" => self.alpha_max.to_string(),
            "alpha_count" => self.alpha_count.to_string(),
            "rhos" => join(&self.rhos),
            "max_sweeps" => self.max_sweeps.to_string(),
            "psi_ridge" => self.psi_ridge.to_string(),
            "drop_i222" => self.drop_i222.to_string(),
            "psi21_smoothing" => self.psi21_smoothing.to_string(),
            "noise_sigma" => self.noise_sigma.as_str().to_string(),
            "output_dir" => self.output_dir.display().to_string(),
            _ => unreachable!("unknown key {key}"),
        }
    }

    /// All keys as `key = value` lines; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for k in Self::KEYS {
            writeln!(out, "{k} = {}", self.value(k)).expect("write to string");
        }
        out
    }

    /// The settings that determine the numerical results, used to decide
    /// whether cached stage outputs can be reused.
    pub fn cache_key(&self) -> String {
        let mut out = String::new();
        for k in Self::KEYS
            .iter()
            .filter(|k| !matches!(**k, "mode" | "output_dir"))
        {
            writeln!(out, "{k} = {}", self.value(k)).expect("write to string");
        }
        out
    }

    /// True coefficients, when both are configured.
    pub fn truth(&self) -> Option<CoefficientPair> {
        Some(CoefficientPair::new(self.mu.clone()?, self.sigma.clone()?))
    }

    pub fn stlsq(&self) -> StlsqOptions {
        StlsqOptions {
            threshold: self.stlsq_threshold,
            max_iters: self.stlsq_max_iters,
            ridge: self.stlsq_ridge,
        }
    }

    pub fn psi(&self) -> PsiOptions {
        PsiOptions {
            ridge: self.psi_ridge,
            drop_i222: self.drop_i222,
        }
    }

    pub fn cv(&self) -> CvConfig {
        let mut cv = CvConfig {
            k: self.cv_folds,
            alphas: geomspace(self.alpha_min, self.alpha_max, self.alpha_count),
            rhos: self.rhos.clone(),
            ..Default::default()
        };
        cv.solver.max_sweeps = self.max_sweeps;
        cv
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.mode.simulates() {
            if self.truth().is_none() {
                return bad("simulation needs both `mu` and `sigma`".into());
            }
            if self.n_steps == 0 {
                return bad("n_steps must be positive".into());
            }
            if !(self.t_end > self.t0) {
                return bad("t_end must exceed t0".into());
            }
        }
        if self.mode == Mode::Identify && self.input.is_none() {
            return bad("identify mode needs `input`".into());
        }
        if self.mode.identifies() {
            if self.windows == 0 {
                return bad("windows must be positive".into());
            }
            if self.mode.simulates() && !self.n_steps.is_multiple_of(self.windows) {
                return bad(format!(
                    "n_steps ({}) must be a multiple of windows ({})",
                    self.n_steps, self.windows
                ));
            }
            if self.cv_folds < 2 {
                return bad("cv_folds must be at least 2".into());
            }
            if self.alpha_count == 0
                || !(self.alpha_min > 0.0)
                || !(self.alpha_max >= self.alpha_min)
            {
                return bad(
                    "alpha grid needs 0 < alpha_min <= alpha_max and alpha_count > 0".into(),
                );
            }
            if self.rhos.is_empty() || self.rhos.iter().any(|r| !(0.0..=1.0).contains(r)) {
                return bad("rhos must be a non-empty list in [0, 1]".into());
            }
            if self.mu0.is_none() && self.mu.is_none() {
                return bad("set `mu0` (the drift at the initial state)".into());
            }
        }
        Ok(())
    }
}
