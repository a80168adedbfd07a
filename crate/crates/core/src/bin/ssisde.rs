use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ssisde::pipeline::{
    emit_plot_data, load_truth, run_pipeline, Mode, PipelineConfig, RunReport, CONFIG_FILE,
    OUTPUT_DIR_ENV,
};
use ssisde::{Error, Result};

/// Identify the drift and diffusion of a scalar SDE from one trajectory.
#[derive(Parser)]
#[command(name = "ssisde", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a trajectory and its driving noise.
    Simulate(RunArgs),
    /// Identify a model from a trajectory CSV.
    Identify {
        #[command(flatten)]
        run: RunArgs,
        /// Trajectory CSV with columns `t,value`.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Drift at the initial state.
        #[arg(long, allow_negative_numbers = true)]
        mu0: Option<f64>,
    },
    /// Simulate, then identify.
    Full(RunArgs),
    /// Write plot tables for a finished run.
    PlotData {
        /// Output directory of the run.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file of `key = value` lines.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config file and the environment).
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override a configuration key, e.g. `--set windows=500`.
    #[arg(short, long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Also write the plot tables.
    #[arg(long)]
    plot: bool,
}

impl RunArgs {
    fn config(&self, mode: Mode) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::from_file(p)?,
            None => PipelineConfig::default(),
        };
        cfg.mode = mode;
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            cfg.output_dir = dir.into();
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected KEY=VALUE, got `{kv}`")))?;
            cfg.set(k, v)?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        Ok(cfg)
    }
}

fn print_report(r: &RunReport) {
    println!("mode: {}", r.mode);
    println!("output: {}", r.output_dir.display());
    if let Some(s) = &r.sigma_stlsq {
        println!("sigma (stlsq):  {s}");
    }
    if let (Some(mu), Some(sigma)) = (&r.mu, &r.sigma) {
        println!("mu_hat(x)    = {mu}");
        println!("sigma_hat(x) = {sigma}");
    }
    if let Some(mse) = r.mse {
        println!("one-step mse: {mse:.6e}");
    }
    if let Some(cv) = &r.cv {
        println!(
            "cv: alpha* = {:.3e}, rho* = {}, alpha = {:.3e}, rho = {}",
            cv.alpha_star, cv.rho_star, cv.alpha_dagger, cv.rho_dagger
        );
        if cv.unconverged_cells > 0 {
            println!(
                "cv: {} grid cells hit the sweep limit",
                cv.unconverged_cells
            );
        }
    }
    for (stage, d) in &r.timings {
        let note = if r.reused.contains(stage) {
            " (cached)"
        } else {
            ""
        };
        println!("  {stage:<10} {:>8.3}s{note}", d.as_secs_f64());
    }
    println!("files: {}", r.manifest.join(", "));
}

fn run(mode: Mode, args: &RunArgs, input: Option<PathBuf>, mu0: Option<f64>) -> Result<()> {
    let mut cfg = args.config(mode)?;
    if input.is_some() {
        cfg.input = input;
    }
    if mu0.is_some() {
        cfg.mu0 = mu0;
    }
    let report = run_pipeline(&cfg)?;
    print_report(&report);
    if args.plot && mode.identifies() {
        plot(&report, &cfg)?;
    }
    Ok(())
}

fn plot(report: &RunReport, cfg: &PipelineConfig) -> Result<()> {
    let truth = load_truth(cfg, &report.output_dir)?;
    for p in emit_plot_data(report, truth.as_ref())? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn plot_data(out: Option<PathBuf>) -> Result<()> {
    let dir = out
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PipelineConfig::default().output_dir);
    let mut cfg = PipelineConfig::from_file(&dir.join(CONFIG_FILE))?;
    cfg.output_dir = dir.clone();
    let report = RunReport::read(&dir)?;
    plot(&report, &cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => run(Mode::Simulate, &a, None, None),
        Command::Identify { run: a, input, mu0 } => run(Mode::Identify, &a, input, mu0),
        Command::Full(a) => run(Mode::Full, &a, None, None),
        Command::PlotData { out } => plot_data(out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
