use std::collections::BTreeMap;
use std::fs;
use std::ops::Range;
use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::design::{restricted_ls, SsisdeDesign};
use super::elastic_net::{column_rms, ElasticNetOptions, Gram, NONZERO_TOL};
use crate::error::{Error, Result};
use crate::io::CsvTable;
use crate::linalg;

/// `n` log-spaced values from `start` to `stop`, both endpoints exact.
pub fn geomspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let (a, b) = (start.log10(), stop.log10());
            let mut v: Vec<f64> = (0..n)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
                .collect();
            v[0] = start;
            v[n - 1] = stop;
            v
        }
    }
}

/// `k` contiguous blocks covering `0..n`; the first `n % k` are one longer.
pub fn fold_ranges(n: usize, k: usize) -> Vec<Range<usize>> {
    let (base, extra) = (n / k, n % k);
    let mut start = 0;
    (0..k)
        .map(|j| {
            let len = base + usize::from(j < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig {
    pub k: usize,
    pub alphas: Vec<f64>,
    pub rhos: Vec<f64>,
    pub solver: ElasticNetOptions,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            k: 7,
            alphas: geomspace(1e-5, 10.0, 35),
            rhos: vec![0.3, 0.4, 0.5, 0.7, 0.85, 0.95, 1.0],
            solver: ElasticNetOptions::default(),
        }
    }
}

/// JSON has no infinities; they are written as `null`.
mod nonfinite {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }

    pub mod vec {
        use serde::ser::SerializeSeq;
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for x in v {
                seq.serialize_element(&x.is_finite().then_some(*x))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Ok(Vec::<Option<f64>>::deserialize(d)?
                .into_iter()
                .map(|x| x.unwrap_or(f64::INFINITY))
                .collect())
        }
    }
}

/// One `(alpha, rho)` grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub alpha: f64,
    pub rho: f64,
    /// Root mean squared one-step error on each held-out block.
    #[serde(with = "nonfinite::vec")]
    pub fold_errors: Vec<f64>,
    #[serde(with = "nonfinite")]
    pub mean: f64,
    #[serde(with = "nonfinite")]
    pub se: f64,
    /// Active drift terms of the de-biased fit on all rows.
    pub n_mu: usize,
    /// Active diffusion terms of the de-biased fit on all rows.
    pub n_sigma: usize,
    /// Penalized fits (folds plus the full-data fit) that hit the sweep limit.
    pub unconverged: usize,
}

impl CvCell {
    /// Fills in the mean and its standard error
    /// `sqrt(sum (d_j - mean)^2 / (k (k - 1)))`.
    pub fn from_fold_errors(
        alpha: f64,
        rho: f64,
        fold_errors: Vec<f64>,
        n_mu: usize,
        n_sigma: usize,
    ) -> Self {
        let k = fold_errors.len() as f64;
        let mean = fold_errors.iter().sum::<f64>() / k;
        let se = if mean.is_finite() && k > 1.0 {
            let ss: f64 = fold_errors.iter().map(|d| (d - mean) * (d - mean)).sum();
            (ss / (k * (k - 1.0))).sqrt()
        } else {
            f64::INFINITY
        };
        Self {
            alpha,
            rho,
            fold_errors,
            mean,
            se,
            n_mu,
            n_sigma,
            unconverged: 0,
        }
    }

    pub fn support(&self) -> usize {
        self.n_mu + self.n_sigma
    }

    fn size(&self, kind: SupportKind) -> usize {
        match kind {
            SupportKind::Total => self.support(),
            SupportKind::Mu => self.n_mu,
            SupportKind::Sigma => self.n_sigma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SupportKind {
    Total,
    Mu,
    Sigma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub n: usize,
    pub delta: f64,
    pub se: f64,
    /// Grid point attaining `delta`.
    pub alpha: f64,
    pub rho: f64,
}

/// Best CV error at each realized support size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaTable {
    pub kind: SupportKind,
    pub rows: Vec<DeltaRow>,
    /// Smallest size whose error is within one standard error of the best.
    pub n_tilde: Option<usize>,
}

/// Minimum-error cell: lowest mean, first in grid order on ties.
fn minimizer(cells: &[CvCell]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, c) in cells.iter().enumerate() {
        if c.mean.is_finite() && best.is_none_or(|b| c.mean < cells[b].mean) {
            best = Some(i);
        }
    }
    best
}

/// Index of the simplest cell within one standard error of the minimum.
fn select_index(cells: &[CvCell]) -> Option<(usize, f64, usize)> {
    let best = minimizer(cells)?;
    let eps = cells[best].mean + cells[best].se;
    let chosen = cells
        .iter()
        .enumerate()
        .filter(|(_, c)| c.mean <= eps)
        .min_by(|(_, a), (_, b)| {
            a.support()
                .cmp(&b.support())
                .then(b.alpha.total_cmp(&a.alpha))
                .then(b.rho.total_cmp(&a.rho))
        })
        .map(|(i, _)| i)
        .unwrap_or(best);
    Some((best, eps, chosen))
}

fn delta_table(cells: &[CvCell], kind: SupportKind) -> DeltaTable {
    let mut groups: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, c) in cells.iter().enumerate() {
        if !c.mean.is_finite() {
            continue;
        }
        let n = c.size(kind);
        match groups.get(&n) {
            Some(&j) if cells[j].mean <= c.mean => {}
            _ => {
                groups.insert(n, i);
            }
        }
    }
    let rows: Vec<DeltaRow> = groups
        .iter()
        .map(|(&n, &i)| DeltaRow {
            n,
            delta: cells[i].mean,
            se: cells[i].se,
            alpha: cells[i].alpha,
            rho: cells[i].rho,
        })
        .collect();
    let n_tilde = rows
        .iter()
        .min_by(|a, b| a.delta.total_cmp(&b.delta))
        .map(|m| m.delta + m.se)
        .and_then(|thr| rows.iter().find(|r| r.delta <= thr).map(|r| r.n));
    DeltaTable {
        kind,
        rows,
        n_tilde,
    }
}

/// Outcome of the `(alpha, rho)` grid search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub alphas: Vec<f64>,
    pub rhos: Vec<f64>,
    /// Alpha-major, rho-minor.
    pub cells: Vec<CvCell>,
    /// Lowest-error cell.
    pub best: usize,
    /// `mean + se` of the lowest-error cell.
    pub epsilon: f64,
    pub selected: usize,
    pub alpha_star: f64,
    pub rho_star: f64,
    pub alpha_dagger: f64,
    pub rho_dagger: f64,
    pub delta_total: DeltaTable,
    pub delta_mu: DeltaTable,
    pub delta_sigma: DeltaTable,
}

impl CvReport {
    /// Derives the selections and the support curves from evaluated cells.
    pub fn from_cells(
        k: usize,
        alphas: Vec<f64>,
        rhos: Vec<f64>,
        cells: Vec<CvCell>,
    ) -> Result<Self> {
        let (best, epsilon, selected) = select_index(&cells).ok_or_else(|| {
            Error::InvalidArgument("no grid cell produced a finite CV error".into())
        })?;
        Ok(Self {
            k,
            alphas,
            rhos,
            best,
            epsilon,
            selected,
            alpha_star: cells[best].alpha,
            rho_star: cells[best].rho,
            alpha_dagger: cells[selected].alpha,
            rho_dagger: cells[selected].rho,
            delta_total: delta_table(&cells, SupportKind::Total),
            delta_mu: delta_table(&cells, SupportKind::Mu),
            delta_sigma: delta_table(&cells, SupportKind::Sigma),
            cells,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// `alpha,rho,mean,se,n_mu,n_sigma` per cell.
    pub fn surface_table(&self) -> CsvTable {
        let c = &self.cells;
        CsvTable::new()
            .float("alpha", c.iter().map(|c| c.alpha).collect())
            .float("rho", c.iter().map(|c| c.rho).collect())
            .float("mean", c.iter().map(|c| c.mean).collect())
            .float("se", c.iter().map(|c| c.se).collect())
            .index("n_mu", c.iter().map(|c| c.n_mu).collect())
            .index("n_sigma", c.iter().map(|c| c.n_sigma).collect())
    }

    /// `kind,n,delta,se` stacked for the total, drift and diffusion curves,
    /// with `kind` coded 0, 1, 2.
    pub fn delta_csv(&self) -> CsvTable {
        let tables = [&self.delta_total, &self.delta_mu, &self.delta_sigma];
        let mut kind = Vec::new();
        let mut n = Vec::new();
        let mut delta = Vec::new();
        let mut se = Vec::new();
        for (code, t) in tables.iter().enumerate() {
            for r in &t.rows {
                kind.push(code);
                n.push(r.n);
                delta.push(r.delta);
                se.push(r.se);
            }
        }
        CsvTable::new()
            .index("kind", kind)
            .index("n", n)
            .float("delta", delta)
            .float("se", se)
    }
}

/// `(alpha, rho)` of the simplest cell within one standard error of the
/// minimum CV error; ties go to larger alpha, then larger rho.
pub fn select_one_se(report: &CvReport) -> (f64, f64) {
    match select_index(&report.cells) {
        Some((_, _, i)) => (report.cells[i].alpha, report.cells[i].rho),
        None => (report.alpha_dagger, report.rho_dagger),
    }
}

pub fn delta_vs_support(report: &CvReport, kind: SupportKind) -> DeltaTable {
    delta_table(&report.cells, kind)
}

/// Rows, scaling and sufficient statistics of one training set.
struct Split {
    gram: Gram,
    train: nalgebra::DMatrix<f64>,
    train_y: DVector<f64>,
    test: nalgebra::DMatrix<f64>,
    test_y: DVector<f64>,
}

impl Split {
    fn new(design: &SsisdeDesign, train_rows: &[usize], test_rows: &[usize]) -> Self {
        let scales = column_rms(&design.matrix, train_rows);
        Self {
            gram: Gram::from_rows(&design.matrix, &design.target, train_rows, &scales),
            train: linalg::select_rows(&design.matrix, train_rows),
            train_y: linalg::select_entries(&design.target, train_rows),
            test: linalg::select_rows(&design.matrix, test_rows),
            test_y: linalg::select_entries(&design.target, test_rows),
        }
    }

    /// Penalized fit, then unpenalized refit on its support. `None` when
    /// the refit is rank deficient.
    fn fit(
        &self,
        alpha: f64,
        rho: f64,
        opts: &ElasticNetOptions,
        names: &[String],
    ) -> (Option<Vec<f64>>, bool) {
        let sol = self.gram.solve(alpha, rho, opts);
        let support: Vec<usize> = (0..sol.beta.len())
            .filter(|&j| sol.beta[j].abs() > NONZERO_TOL)
            .collect();
        let beta = if support.is_empty() {
            Some(vec![0.0; sol.beta.len()])
        } else {
            restricted_ls(&self.train, &self.train_y, &support, names).ok()
        };
        (beta, sol.converged)
    }

    fn rmse(&self, beta: &[f64]) -> f64 {
        let r = &self.test_y - &self.test * DVector::from_column_slice(beta);
        (r.norm_squared() / self.test_y.len() as f64).sqrt()
    }
}

/// Penalized fit on all rows followed by the unpenalized refit.
pub(crate) fn full_fit(
    design: &SsisdeDesign,
    alpha: f64,
    rho: f64,
    opts: &ElasticNetOptions,
) -> Result<(Vec<f64>, bool)> {
    let rows: Vec<usize> = (0..design.n_rows()).collect();
    let scales = column_rms(&design.matrix, &rows);
    let sol =
        Gram::from_rows(&design.matrix, &design.target, &rows, &scales).solve(alpha, rho, opts);
    let support: Vec<usize> = (0..sol.beta.len())
        .filter(|&j| sol.beta[j].abs() > NONZERO_TOL)
        .collect();
    let beta = restricted_ls(
        &design.matrix,
        &design.target,
        &support,
        &design.column_names(),
    )?;
    Ok((beta, sol.converged))
}

/// Grid search over `(alpha, rho)` with contiguous, unshuffled folds.
///
/// For each cell and fold the columns are scaled by their RMS over the
/// training rows, the elastic net is fitted there, refitted without penalty
/// on its support and scored on the held-out block. Support sizes come from
/// the same procedure on all rows.
pub fn cv_time_series(design: &SsisdeDesign, cfg: &CvConfig) -> Result<CvReport> {
    let n = design.n_rows();
    let k = cfg.k;
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 folds, got {k}"
        )));
    }
    if n < 2 * k {
        return Err(Error::InvalidArgument(format!(
            "{n} rows is too few for {k} folds"
        )));
    }
    if cfg.alphas.is_empty() || cfg.rhos.is_empty() {
        return Err(Error::InvalidArgument("empty alpha or rho grid".into()));
    }
    if cfg.alphas.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
        return Err(Error::InvalidArgument(
            "alpha grid must be finite and >= 0".into(),
        ));
    }
    if cfg.rhos.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Error::InvalidArgument("rho grid must lie in [0, 1]".into()));
    }
    let names = design.column_names();
    let splits: Vec<Split> = fold_ranges(n, k)
        .into_iter()
        .map(|test| {
            let train: Vec<usize> = (0..n).filter(|i| !test.contains(i)).collect();
            Split::new(design, &train, &test.collect::<Vec<_>>())
        })
        .collect();
    let all: Vec<usize> = (0..n).collect();
    let full = Split::new(design, &all, &[]);
    let n_mu_cols = design.lib_mu.len();

    let grid: Vec<(f64, f64)> = cfg
        .alphas
        .iter()
        .flat_map(|&a| cfg.rhos.iter().map(move |&r| (a, r)))
        .collect();
    let cells: Vec<CvCell> = grid
        .par_iter()
        .map(|&(alpha, rho)| {
            let mut unconverged = 0;
            let errors: Vec<f64> = splits
                .iter()
                .map(|s| {
                    let (beta, ok) = s.fit(alpha, rho, &cfg.solver, &names);
                    unconverged += usize::from(!ok);
                    beta.map_or(f64::INFINITY, |b| s.rmse(&b))
                })
                .collect();
            let (beta, ok) = full.fit(alpha, rho, &cfg.solver, &names);
            unconverged += usize::from(!ok);
            let (n_mu, n_sigma) = match beta {
                Some(b) => {
                    let nz = |r: Range<usize>| r.filter(|&j| b[j] != 0.0).count();
                    (nz(0..n_mu_cols), nz(n_mu_cols..b.len()))
                }
                None => (n_mu_cols, names.len() - n_mu_cols),
            };
            let mut cell = CvCell::from_fold_errors(alpha, rho, errors, n_mu, n_sigma);
            cell.unconverged = unconverged;
            cell
        })
        .collect();
    CvReport::from_cells(k, cfg.alphas.clone(), cfg.rhos.clone(), cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FunctionLibrary;
    use crate::sparse::build_ssisde_design;

    fn cell(alpha: f64, rho: f64, mean: f64, se: f64, n: usize) -> CvCell {
        CvCell {
            alpha,
            rho,
            fold_errors: vec![],
            mean,
            se,
            n_mu: n,
            n_sigma: 0,
            unconverged: 0,
        }
    }

    fn report(cells: Vec<CvCell>) -> CvReport {
        CvReport::from_cells(3, vec![], vec![], cells).unwrap()
    }

    #[test]
    fn geomspace_endpoints() {
        let g = geomspace(1e-5, 10.0, 35);
        assert_eq!(g.len(), 35);
        assert_eq!(g[0], 1e-5);
        assert_eq!(g[34], 10.0);
        let r = g[1] / g[0];
        assert!(g.windows(2).all(|w| (w[1] / w[0] / r - 1.0).abs() < 1e-12));
    }

    #[test]
    fn folds_are_contiguous() {
        let f = fold_ranges(10, 3);
        assert_eq!(f, vec![0..4, 4..7, 7..10]);
        assert_eq!(
            fold_ranges(999, 7).iter().map(|r| r.len()).sum::<usize>(),
            999
        );
    }

    #[test]
    fn standard_error_arithmetic() {
        let c = CvCell::from_fold_errors(1.0, 1.0, vec![1.0, 2.0, 3.0], 1, 0);
        assert_eq!(c.mean, 2.0);
        assert!((c.se - 0.5774).abs() < 5e-5);
        assert!((c.se - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn simplest_among_equals() {
        let r = report(vec![
            cell(1.0, 1.0, 1.0, 0.1, 3),
            cell(2.0, 1.0, 1.0, 0.1, 2),
            cell(3.0, 1.0, 1.0, 0.1, 5),
        ]);
        assert_eq!(select_one_se(&r), (2.0, 1.0));
        assert_eq!(r.selected, 1);
    }

    #[test]
    fn within_one_se_wins() {
        let r = report(vec![
            cell(1e-3, 1.0, 1.0, 0.1, 4),
            cell(1e-2, 1.0, 1.05, 0.2, 1),
        ]);
        assert!((r.epsilon - 1.1).abs() < 1e-15);
        assert_eq!(select_one_se(&r), (1e-2, 1.0));
        let r = report(vec![
            cell(1e-3, 1.0, 1.0, 0.1, 4),
            cell(1e-2, 1.0, 1.15, 0.2, 1),
        ]);
        assert_eq!(select_one_se(&r), (1e-3, 1.0));
    }

    #[test]
    fn ties_prefer_larger_alpha_then_rho() {
        let r = report(vec![
            cell(1e-3, 1.0, 1.0, 0.1, 2),
            cell(1e-2, 0.5, 1.0, 0.1, 2),
        ]);
        assert_eq!(select_one_se(&r), (1e-2, 0.5));
        let r = report(vec![
            cell(1e-2, 0.3, 1.0, 0.1, 2),
            cell(1e-2, 0.7, 1.0, 0.1, 2),
        ]);
        assert_eq!(select_one_se(&r), (1e-2, 0.7));
    }

    #[test]
    fn selection_always_qualifies() {
        let cells: Vec<CvCell> = (0..20)
            .map(|i| {
                cell(
                    i as f64,
                    1.0,
                    1.0 + ((i * 7) % 5) as f64 * 0.03,
                    0.02,
                    (i * 3) % 4,
                )
            })
            .collect();
        let r = report(cells);
        assert!(r.cells[r.selected].mean <= r.epsilon);
    }

    #[test]
    fn n_tilde_fixture() {
        let r = report(vec![
            cell(1.0, 1.0, 5.0, 0.1, 1),
            cell(1.0, 1.0, 1.0, 0.1, 2),
            cell(1.0, 1.0, 0.99, 0.05, 3),
            cell(1.0, 1.0, 1.4, 0.1, 4),
        ]);
        let t = delta_vs_support(&r, SupportKind::Total);
        assert_eq!(
            t.rows.iter().map(|r| r.delta).collect::<Vec<_>>(),
            vec![5.0, 1.0, 0.99, 1.4]
        );
        assert_eq!(t.n_tilde, Some(2));
        assert_eq!(r.delta_total, t);
    }

    #[test]
    fn n_tilde_left_edge_and_single_size() {
        let r = report(vec![
            cell(1.0, 1.0, 1.0, 0.1, 1),
            cell(1.0, 1.0, 0.95, 0.1, 2),
            cell(1.0, 1.0, 0.94, 0.1, 3),
        ]);
        assert_eq!(r.delta_total.n_tilde, Some(1));
        let r = report(vec![
            cell(1.0, 1.0, 1.0, 0.1, 4),
            cell(2.0, 1.0, 2.0, 0.1, 4),
        ]);
        assert_eq!(r.delta_total.rows.len(), 1);
        assert_eq!(r.delta_total.rows[0].delta, 1.0);
        assert_eq!(r.delta_total.n_tilde, Some(4));
    }

    #[test]
    fn json_round_trip_with_infinities() {
        let mut c = CvCell::from_fold_errors(0.1, 0.5, vec![1.0, f64::INFINITY], 1, 1);
        c.unconverged = 2;
        let r = report(vec![c, cell(1.0, 1.0, 0.5, 0.1, 2)]);
        let text = r.to_json().unwrap();
        let back: CvReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }

    fn exact_design(m: usize) -> SsisdeDesign {
        let dt = vec![1.0 / m as f64; m];
        let dbp: Vec<f64> = (0..m)
            .map(|i| 0.03 * ((i * 7919 % 211) as f64 / 105.0 - 1.0))
            .collect();
        let mut states = vec![1.0];
        for i in 0..m {
            let x = states[i];
            states.push(x + 0.5 * x * dt[i] + 0.3 * x * dbp[i]);
        }
        let lib = FunctionLibrary::monomials("lib", 2);
        build_ssisde_design(&states, &dt, &dbp, &lib, &lib).unwrap()
    }

    #[test]
    fn identical_halves_generalize_perfectly() {
        let d = exact_design(100);
        let cfg = CvConfig {
            k: 2,
            alphas: vec![1e-8],
            rhos: vec![1.0],
            ..Default::default()
        };
        let r = cv_time_series(&d, &cfg).unwrap();
        assert!(r.cells[0].fold_errors.iter().all(|e| *e < 1e-12));
    }

    #[test]
    fn default_grid_size() {
        let d = exact_design(70);
        let r = cv_time_series(
            &d,
            &CvConfig {
                solver: ElasticNetOptions {
                    max_sweeps: 200,
                    ..Default::default()
                },
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(r.cells.len(), 245);
        assert_eq!(r.k, 7);
        assert!(r.cells[r.selected].mean <= r.epsilon);
        assert_eq!(r.surface_table().render().unwrap().lines().count(), 246);
    }

    #[test]
    fn validation_rows_do_not_leak_into_training() {
        let d = exact_design(60);
        let folds = fold_ranges(60, 3);
        let test: Vec<usize> = folds[1].clone().collect();
        let train: Vec<usize> = (0..60).filter(|i| !test.contains(i)).collect();
        let a = Split::new(&d, &train, &test);
        let mut corrupted = d.clone();
        for &i in &test {
            for j in 0..corrupted.n_cols() {
                corrupted.matrix[(i, j)] = 3.0 * corrupted.matrix[(i, j)] + 7.0;
            }
        }
        let b = Split::new(&corrupted, &train, &test);
        let names = d.column_names();
        let o = ElasticNetOptions::default();
        assert_eq!(
            a.fit(1e-4, 0.7, &o, &names).0,
            b.fit(1e-4, 0.7, &o, &names).0
        );
    }

    #[test]
    fn contract_errors() {
        let d = exact_design(10);
        let cfg = |k| CvConfig {
            k,
            ..Default::default()
        };
        assert!(cv_time_series(&d, &cfg(1)).is_err());
        assert!(cv_time_series(&d, &cfg(6)).is_err());
    }
}
