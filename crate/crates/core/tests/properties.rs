use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use ssisde::drift::{recover_p_increments, DriftVector};
use ssisde::path::make_uniform_grid;
use ssisde::pipeline::PipelineConfig;
use ssisde::signature::compute_signature_features;
use ssisde::sparse::{
    column_rms, elastic_net_fit, fold_ranges, geomspace, CvCell, CvReport, ElasticNetOptions,
};
use ssisde::{BrownianPath, Measure, SparseModel};

fn q_path(increments: Vec<f64>) -> BrownianPath {
    let grid = make_uniform_grid(0.0, 1.0, increments.len()).unwrap();
    BrownianPath::new(grid, increments, Measure::Martingale).unwrap()
}

/// Largest violation of the elastic-net optimality conditions, computed from
/// the design directly.
fn kkt_violation(g: &DMatrix<f64>, y: &DVector<f64>, beta: &[f64], alpha: f64, rho: f64) -> f64 {
    let n = g.nrows() as f64;
    let b = DVector::from_column_slice(beta);
    let grad = -2.0 / n * g.transpose() * (y - g * &b);
    (0..beta.len())
        .map(|j| {
            let smooth = grad[j] + alpha * (1.0 - rho) * beta[j];
            if beta[j] != 0.0 {
                (smooth + alpha * rho * beta[j].signum()).abs()
            } else {
                (smooth.abs() - alpha * rho).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn integration_by_parts(incs in prop::collection::vec(-0.1f64..0.1, 8..200)) {
        let n = incs.len();
        let f = compute_signature_features(&q_path(incs), 0, n).unwrap();
        for i in 0..f.len() {
            let scale = f.i12[i].abs() + f.i21[i].abs();
            prop_assert!((f.i12[i] + f.i21[i] - f.i1[i] * f.ib[i]).abs() <= 1e-12 * scale.max(1e-300));
        }
    }

    #[test]
    fn power_of_two_scaling_is_exact(incs in prop::collection::vec(-0.1f64..0.1, 8..100), k in -3i32..4) {
        let c = 2f64.powi(k);
        let n = incs.len();
        let f = compute_signature_features(&q_path(incs.clone()), 0, n).unwrap();
        let g = compute_signature_features(&q_path(incs.iter().map(|d| c * d).collect()), 0, n).unwrap();
        for i in 0..f.len() {
            prop_assert_eq!(g.i1[i], f.i1[i]);
            prop_assert_eq!(g.ib[i], c * f.ib[i]);
            prop_assert_eq!(g.i12[i], c * f.i12[i]);
            prop_assert_eq!(g.i21[i], c * f.i21[i]);
            prop_assert_eq!(g.i22[i], c * c * f.i22[i]);
            prop_assert_eq!(g.i222[i], c * c * c * f.i222[i]);
        }
    }

    #[test]
    fn elastic_net_is_optimal(
        n in 10usize..60,
        p in 1usize..7,
        seed in any::<u64>(),
        log_alpha in -5.0f64..1.0,
        rho in 0.0f64..=1.0,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(n, p, |_, _| rng.random_range(-2.0..2.0));
        let y = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let alpha = 10f64.powf(log_alpha);
        let ones = vec![1.0; p];
        let fit = elastic_net_fit(&g, &y, alpha, rho, &ones, &ElasticNetOptions::default()).unwrap();
        prop_assert!(kkt_violation(&g, &y, &fit.coefficients, alpha, rho) < 1e-7);
        prop_assert!(fit.kkt_residual < 1e-8);

        let rows: Vec<usize> = (0..n).collect();
        let scales = column_rms(&g, &rows);
        let scaled = elastic_net_fit(&g, &y, alpha, rho, &scales, &ElasticNetOptions::default()).unwrap();
        let gs = DMatrix::from_fn(n, p, |i, j| g[(i, j)] / scales[j]);
        prop_assert!(kkt_violation(&gs, &y, &scaled.normalized, alpha, rho) < 1e-7);
    }

    #[test]
    fn folds_partition_rows(n in 1usize..500, k in 1usize..12) {
        prop_assume!(k <= n);
        let folds = fold_ranges(n, k);
        prop_assert_eq!(folds.len(), k);
        prop_assert_eq!(folds[0].start, 0);
        prop_assert_eq!(folds[k - 1].end, n);
        for w in folds.windows(2) {
            prop_assert_eq!(w[0].end, w[1].start);
            prop_assert!(w[0].len() >= w[1].len() && w[0].len() <= w[1].len() + 1);
        }
    }

    #[test]
    fn geomspace_is_geometric(lo in -6.0f64..0.0, span in 0.5f64..6.0, n in 2usize..50) {
        let (a, b) = (10f64.powf(lo), 10f64.powf(lo + span));
        let g = geomspace(a, b, n);
        prop_assert_eq!(g[0], a);
        prop_assert_eq!(g[n - 1], b);
        prop_assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn selection_stays_within_one_se(
        cells in prop::collection::vec((0.5f64..2.0, 0.0f64..0.3, 0usize..6), 1..40),
    ) {
        let cells: Vec<CvCell> = cells
            .iter()
            .enumerate()
            .map(|(i, &(mean, se, n))| CvCell {
                alpha: i as f64,
                rho: 1.0,
                fold_errors: vec![],
                mean,
                se,
                n_mu: n,
                n_sigma: 0,
                unconverged: 0,
            })
            .collect();
        let r = CvReport::from_cells(3, vec![], vec![], cells).unwrap();
        let best = &r.cells[r.best];
        prop_assert!((r.epsilon - (best.mean + best.se)).abs() == 0.0);
        let chosen = &r.cells[r.selected];
        prop_assert!(chosen.mean <= r.epsilon);
        for c in r.cells.iter().filter(|c| c.mean <= r.epsilon) {
            prop_assert!(c.support() >= chosen.support());
        }
    }

    #[test]
    fn girsanov_shift_is_linear(
        incs in prop::collection::vec(-0.1f64..0.1, 2..100),
        mu in -2.0f64..2.0,
        sigma in 0.05f64..2.0,
    ) {
        let q = q_path(incs.clone());
        let m = incs.len();
        let drift = DriftVector { values: vec![mu; m + 1], mu0: mu };
        let p = recover_p_increments(&q, &drift, &vec![sigma; m], &q.grid.clone()).unwrap();
        prop_assert_eq!(p.measure, Measure::Physical);
        for (k, (a, b)) in p.increments.iter().zip(&incs).enumerate() {
            let dt = q.grid.dt(k);
            prop_assert!((a - (b - mu / sigma * dt)).abs() <= 4.0 * f64::EPSILON * (b.abs() + (mu / sigma * dt).abs()));
        }
    }

    #[test]
    fn polynomial_derivatives(c in prop::collection::vec(-3.0f64..3.0, 1..6), x in -2.0f64..2.0) {
        let m = SparseModel::polynomial(&c);
        let d1: f64 = c.iter().enumerate().skip(1).map(|(k, ck)| k as f64 * ck * x.powi(k as i32 - 1)).sum();
        let d2: f64 = c.iter().enumerate().skip(2).map(|(k, ck)| (k * (k - 1)) as f64 * ck * x.powi(k as i32 - 2)).sum();
        prop_assert!((m.derivative(x, 1).unwrap() - d1).abs() <= 1e-12 * (1.0 + d1.abs()));
        prop_assert!((m.derivative(x, 2).unwrap() - d2).abs() <= 1e-12 * (1.0 + d2.abs()));
    }

    #[test]
    fn config_text_round_trip(seed in any::<u64>(), windows in 2usize..5000, x0 in 0.1f64..10.0, w in 0usize..9) {
        let mut cfg = PipelineConfig {
            seed,
            windows,
            x0,
            psi21_smoothing: w,
            ..Default::default()
        };
        cfg.set("mu", "x:0.5, x^2:-0.25").unwrap();
        let back = PipelineConfig::parse(&cfg.to_text()).unwrap();
        prop_assert_eq!(back.to_text(), cfg.to_text());
        prop_assert_eq!(back.seed, seed);
        prop_assert_eq!(back.x0, x0);
        prop_assert_eq!(back.cache_key(), cfg.cache_key());
    }
}
