use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{FunctionLibrary, SparseModel};

/// Regression problem `dX_i = Theta_mu(X_i) dt_i . xi_mu + Theta_sigma(X_i) dB^P_i . xi_sigma`.
#[derive(Debug, Clone)]
pub struct SsisdeDesign {
    pub matrix: DMatrix<f64>,
    pub target: DVector<f64>,
    pub lib_mu: FunctionLibrary,
    pub lib_sigma: FunctionLibrary,
}

impl SsisdeDesign {
    pub fn n_rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn mu_cols(&self) -> Range<usize> {
        0..self.lib_mu.len()
    }

    pub fn sigma_cols(&self) -> Range<usize> {
        self.lib_mu.len()..self.n_cols()
    }

    /// `mu:<term>` and `sigma:<term>` labels, in column order.
    pub fn column_names(&self) -> Vec<String> {
        self.lib_mu
            .names()
            .into_iter()
            .map(|n| format!("mu:{n}"))
            .chain(
                self.lib_sigma
                    .names()
                    .into_iter()
                    .map(|n| format!("sigma:{n}")),
            )
            .collect()
    }

    /// Splits a full coefficient vector into the two models.
    pub fn split(&self, beta: &[f64]) -> Result<(SparseModel, SparseModel)> {
        if beta.len() != self.n_cols() {
            return Err(Error::InvalidArgument(format!(
                "{} coefficients for {} columns",
                beta.len(),
                self.n_cols()
            )));
        }
        let m = self.lib_mu.len();
        Ok((
            SparseModel::new(self.lib_mu.clone(), beta[..m].to_vec())?,
            SparseModel::new(self.lib_sigma.clone(), beta[m..].to_vec())?,
        ))
    }

    pub fn predict(&self, beta: &[f64]) -> DVector<f64> {
        &self.matrix * DVector::from_column_slice(beta)
    }

    /// Mean squared one-step error of `beta` over all rows.
    pub fn mse(&self, beta: &[f64]) -> f64 {
        let r = &self.target - self.predict(beta);
        r.norm_squared() / self.n_rows() as f64
    }
}

pub fn build_ssisde_design(
    states: &[f64],
    dt: &[f64],
    dbp: &[f64],
    lib_mu: &FunctionLibrary,
    lib_sigma: &FunctionLibrary,
) -> Result<SsisdeDesign> {
    let m = dt.len();
    if states.len() != m + 1 || dbp.len() != m {
        return Err(Error::InvalidArgument(format!(
            "design needs M+1 states and M steps and increments; got {}, {}, {}",
            states.len(),
            dt.len(),
            dbp.len()
        )));
    }
    if lib_mu.len() + lib_sigma.len() == 0 {
        return Err(Error::InvalidArgument("both libraries are empty".into()));
    }
    let pm = lib_mu.len();
    let p = pm + lib_sigma.len();
    let mut matrix = DMatrix::zeros(m, p);
    for i in 0..m {
        let x = states[i];
        for (j, t) in lib_mu.terms().iter().enumerate() {
            matrix[(i, j)] = t.eval(x) * dt[i];
        }
        for (j, t) in lib_sigma.terms().iter().enumerate() {
            matrix[(i, pm + j)] = t.eval(x) * dbp[i];
        }
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite design entry".into()));
    }
    let target = DVector::from_iterator(m, (0..m).map(|i| states[i + 1] - states[i]));
    Ok(SsisdeDesign {
        matrix,
        target,
        lib_mu: lib_mu.clone(),
        lib_sigma: lib_sigma.clone(),
    })
}

/// OLS on the `support` columns; the returned vector has full length with
/// exact zeros off the support.
pub(crate) fn restricted_ls(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    support: &[usize],
    names: &[String],
) -> Result<Vec<f64>> {
    if support.is_empty() {
        return Err(Error::EmptyModel);
    }
    let sub = linalg::select_columns(a, support);
    let c = linalg::lstsq(&sub, y).map_err(|cols| Error::RankDeficient {
        columns: cols.iter().map(|&j| names[support[j]].clone()).collect(),
    })?;
    let mut beta = vec![0.0; a.ncols()];
    for (j, &col) in support.iter().enumerate() {
        beta[col] = c[j];
    }
    Ok(beta)
}

/// Unpenalized refit on the given support over all rows.
pub fn restricted_ls_debias(
    design: &SsisdeDesign,
    support: &[usize],
) -> Result<(SparseModel, SparseModel)> {
    if let Some(&j) = support.iter().find(|&&j| j >= design.n_cols()) {
        return Err(Error::InvalidArgument(format!(
            "support index {j} out of range"
        )));
    }
    let beta = restricted_ls(
        &design.matrix,
        &design.target,
        support,
        &design.column_names(),
    )?;
    design.split(&beta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lin() -> FunctionLibrary {
        FunctionLibrary::monomials("lin", 1)
    }

    #[test]
    fn single_row_by_substitution() {
        let d = build_ssisde_design(&[1.0, 2.0], &[0.1], &[0.2], &lin(), &lin()).unwrap();
        assert_eq!(d.matrix.shape(), (1, 4));
        let row: Vec<f64> = d.matrix.row(0).iter().copied().collect();
        let want = [0.1, 0.1, 0.2, 0.2];
        for (a, b) in row.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(d.target[0], 1.0);
        assert_eq!(d.column_names(), ["mu:1", "mu:x", "sigma:1", "sigma:x"]);
    }

    #[test]
    fn empty_sigma_library() {
        let d = build_ssisde_design(
            &[1.0, 2.0, 2.5],
            &[0.1, 0.1],
            &[0.2, -0.1],
            &lin(),
            &FunctionLibrary::empty("none"),
        )
        .unwrap();
        assert_eq!(d.matrix.shape(), (2, 2));
        assert_eq!(d.sigma_cols(), 2..2);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            build_ssisde_design(&[1.0, 2.0], &[0.1, 0.1], &[0.2], &lin(), &lin()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn debias_full_support_is_ols() {
        let states: Vec<f64> = (0..=20)
            .map(|i| 1.0 + 0.1 * (i as f64 * 0.7).sin())
            .collect();
        let dt = vec![0.05; 20];
        let dbp: Vec<f64> = (0..20).map(|i| 0.2 * (i as f64 * 1.3).cos()).collect();
        let d = build_ssisde_design(&states, &dt, &dbp, &lin(), &lin()).unwrap();
        let (mu, sigma) = restricted_ls_debias(&d, &[0, 1, 2, 3]).unwrap();
        let ols = crate::linalg::lstsq(&d.matrix, &d.target).unwrap();
        let got: Vec<f64> = mu
            .coefficients
            .iter()
            .chain(&sigma.coefficients)
            .copied()
            .collect();
        for (a, b) in got.iter().zip(ols.iter()) {
            assert!((a - b).abs() < 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn debias_recovers_exact_sparse_model() {
        let m = 200;
        let dt = vec![0.01; m];
        let dbp: Vec<f64> = (0..m)
            .map(|i| 0.1 * ((i * 7919 % 101) as f64 / 50.0 - 1.0))
            .collect();
        let mut states = vec![1.0];
        for i in 0..m {
            let x = states[i];
            states.push(x + 0.5 * x * dt[i] + (0.3 * x + 0.05 * x * x) * dbp[i]);
        }
        let lib = FunctionLibrary::monomials("m", 3);
        let d = build_ssisde_design(&states, &dt, &dbp, &lib, &lib).unwrap();
        let (mu, sigma) = restricted_ls_debias(&d, &[1, 5, 6]).unwrap();
        assert!((mu.coefficient("x") - 0.5).abs() < 1e-10);
        assert!((sigma.coefficient("x") - 0.3).abs() < 1e-10);
        assert!((sigma.coefficient("x^2") - 0.05).abs() < 1e-10);
        assert_eq!(mu.support(), vec![1]);
        assert_eq!(sigma.support(), vec![1, 2]);
    }

    #[test]
    fn debias_contract_errors() {
        let d = build_ssisde_design(&[1.0, 2.0, 3.0], &[0.1, 0.1], &[0.2, 0.3], &lin(), &lin())
            .unwrap();
        assert!(matches!(
            restricted_ls_debias(&d, &[]),
            Err(Error::EmptyModel)
        ));
        // 2 rows, 3 columns
        match restricted_ls_debias(&d, &[0, 1, 2]) {
            Err(Error::RankDeficient { columns }) => assert!(!columns.is_empty()),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }
}
