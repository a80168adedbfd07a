use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ssisde::io::CsvTable;
use ssisde::pipeline::{
    CONFIG_FILE, MU_MODEL_FILE, NOISE_FILE, OUTPUT_DIR_ENV, PLOT_FILES, REPORT_FILE,
    TRAJECTORY_FILE,
};

const SMALL: &str =
    "mu = x:0.5\nsigma = x:0.3\nn_steps = 20000\nwindows = 200\nseed = 4\nalpha_count = 12\n";

fn ssisde(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ssisde"))
        .args(args)
        .current_dir(cwd)
        .env_remove(OUTPUT_DIR_ENV)
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    CsvTable::read(path).unwrap().column(name).unwrap()
}

fn corr(a: &[f64], b: &[f64]) -> f64 {
    let d = |v: &[f64]| -> Vec<f64> { v.windows(2).map(|w| w[1] - w[0]).collect() };
    let (a, b) = (d(a), d(b));
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn simulate_writes_only_the_path() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.txt"), SMALL).unwrap();
    ok(&ssisde(
        &["simulate", "-c", "c.txt", "-o", "run"],
        dir.path(),
    ));
    let run = dir.path().join("run");
    assert!(run.join(TRAJECTORY_FILE).is_file());
    assert!(run.join(NOISE_FILE).is_file());
    assert!(!run.join(MU_MODEL_FILE).exists());
    assert_eq!(column(&run.join(TRAJECTORY_FILE), "value").len(), 20001);
}

#[test]
fn full_run_with_plot_tables() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.txt"), SMALL).unwrap();
    let stdout = ok(&ssisde(
        &["full", "-c", "c.txt", "-o", "run", "--plot"],
        dir.path(),
    ));
    assert!(stdout.contains("mu_hat(x)"));
    let run = dir.path().join("run");
    for f in PLOT_FILES {
        assert!(run.join(f).is_file(), "{f} missing");
    }

    let c = run.join(PLOT_FILES[2]);
    assert_eq!(column(&c, "t").len(), 201);
    assert!(corr(&column(&c, "b_p"), &column(&c, "b_p_true")) >= 0.99);

    let d = run.join(PLOT_FILES[3]);
    let (obs, sim) = (column(&d, "x_observed"), column(&d, "x_resim"));
    let worst = obs
        .iter()
        .zip(&sim)
        .map(|(o, s)| ((o - s) / o).abs())
        .fold(0.0, f64::max);
    assert!(worst < 0.05, "resimulated path drifts by {worst}");

    let a = run.join(PLOT_FILES[0]);
    assert!(CsvTable::read(&a).unwrap().column("mu_true").is_ok());

    let before: Vec<Vec<u8>> = PLOT_FILES
        .iter()
        .map(|f| fs::read(run.join(f)).unwrap())
        .collect();
    for f in PLOT_FILES {
        fs::remove_file(run.join(f)).unwrap();
    }
    ok(&ssisde(&["plot-data", "-o", "run"], dir.path()));
    let after: Vec<Vec<u8>> = PLOT_FILES
        .iter()
        .map(|f| fs::read(run.join(f)).unwrap())
        .collect();
    assert_eq!(before, after);
}

#[test]
fn identify_from_a_trajectory_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.txt"), SMALL).unwrap();
    ok(&ssisde(
        &["simulate", "-c", "c.txt", "-o", "sim"],
        dir.path(),
    ));
    let input = dir.path().join("sim").join(TRAJECTORY_FILE);
    let out = ssisde(
        &[
            "identify",
            "--input",
            input.to_str().unwrap(),
            "--mu0",
            "0.5",
            "-s",
            "windows=200",
            "-s",
            "alpha_count=12",
            "-o",
            "id",
        ],
        dir.path(),
    );
    let stdout = ok(&out);
    assert!(stdout.contains("sigma_hat(x)"));
    let id = dir.path().join("id");
    assert!(id.join(REPORT_FILE).is_file());
    assert!(!id.join(NOISE_FILE).exists());
    let cfg = fs::read_to_string(id.join(CONFIG_FILE)).unwrap();
    assert!(cfg.contains("mode = identify"));
}

#[test]
fn identify_without_mu0_or_truth_fails() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.txt"), SMALL).unwrap();
    ok(&ssisde(
        &["simulate", "-c", "c.txt", "-o", "sim"],
        dir.path(),
    ));
    let input = dir.path().join("sim").join(TRAJECTORY_FILE);
    let out = ssisde(
        &["identify", "--input", input.to_str().unwrap(), "-o", "id"],
        dir.path(),
    );
    assert!(!out.status.success());
}

#[test]
fn bad_override_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = ssisde(&["full", "-s", "windows=many"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("error:"), "{stderr}");
    assert!(stderr.contains("many"));

    let out = ssisde(&["full", "-s", "no_such_key=1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn environment_sets_output_dir_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.txt"),
        format!("{SMALL}output_dir = from_file\n"),
    )
    .unwrap();
    let run = |extra: &[&str]| {
        let mut args = vec!["simulate", "-c", "c.txt"];
        args.extend_from_slice(extra);
        let out = Command::new(env!("CARGO_BIN_EXE_ssisde"))
            .args(&args)
            .current_dir(dir.path())
            .env(OUTPUT_DIR_ENV, "from_env")
            .output()
            .unwrap();
        ok(&out);
    };
    run(&[]);
    assert!(dir.path().join("from_env").join(TRAJECTORY_FILE).is_file());
    assert!(!dir.path().join("from_file").exists());
    run(&["-o", "from_flag"]);
    assert!(dir.path().join("from_flag").join(TRAJECTORY_FILE).is_file());
}
