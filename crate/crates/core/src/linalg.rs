//! Small dense least-squares helpers on top of nalgebra's SVD.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff used for rank decisions.
fn rank_tol(rows: usize, cols: usize, s_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * s_max
}

/// Column Euclidean norms, with zero columns mapped to 1.
fn column_scales(a: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(
        a.ncols(),
        a.column_iter().map(|c| {
            let n = c.norm();
            if n > 0.0 {
                n
            } else {
                1.0
            }
        }),
    )
}

/// Ordinary least squares. Columns are equilibrated before the SVD so the
/// rank decision does not depend on column units. On rank deficiency the
/// indices of the columns taking part in the null space are returned.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>, Vec<usize>> {
    let p = a.ncols();
    if p == 0 {
        return Ok(DVector::zeros(0));
    }
    if a.nrows() < p {
        return Err((0..p).collect());
    }
    let scales = column_scales(a);
    let mut scaled = a.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col /= scales[j];
    }
    let svd = scaled.svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let s = &svd.singular_values;
    let s_max = s.max();
    let tol = rank_tol(a.nrows(), p, s_max);

    let null: Vec<usize> = (0..s.len()).filter(|&i| !(s[i] > tol)).collect();
    if !null.is_empty() {
        let mut cols = Vec::new();
        for &i in &null {
            let row = v_t.row(i);
            let m = row.amax();
            for j in 0..p {
                if row[j].abs() > 1e-6 * m && !cols.contains(&j) {
                    cols.push(j);
                }
            }
        }
        cols.sort_unstable();
        return Err(cols);
    }

    let utb = u.transpose() * b;
    let mut coef = DVector::zeros(p);
    for i in 0..s.len() {
        coef += v_t.row(i).transpose() * (utb[i] / s[i]);
    }
    Ok(coef.component_div(&scales))
}

/// Result of a (possibly ridge-stabilized) SVD solve.
#[derive(Debug, Clone)]
pub struct SvdSolve {
    pub coefficients: DVector<f64>,
    pub condition_number: f64,
    pub s_max: f64,
}

/// Minimizes `|a x - b|^2 + lambda |x|^2`. With `lambda = 0` singular values
/// below the rank tolerance are dropped (pseudo-inverse convention).
pub fn ridge_svd(a: &DMatrix<f64>, b: &DVector<f64>, lambda: f64) -> SvdSolve {
    let p = a.ncols();
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let s = &svd.singular_values;
    let s_max = if s.is_empty() { 0.0 } else { s.max() };
    let s_min = if s.len() < p { 0.0 } else { s.min() };
    let tol = rank_tol(a.nrows(), p, s_max);
    let utb = u.transpose() * b;
    let mut coef = DVector::zeros(p);
    for i in 0..s.len() {
        let si = s[i];
        let w = if lambda > 0.0 {
            si / (si * si + lambda)
        } else if si > tol {
            1.0 / si
        } else {
            0.0
        };
        if w != 0.0 {
            coef += v_t.row(i).transpose() * (utb[i] * w);
        }
    }
    let condition_number = if s_min > 0.0 {
        s_max / s_min
    } else {
        f64::INFINITY
    };
    SvdSolve {
        coefficients: coef,
        condition_number,
        s_max,
    }
}

/// Solves `(a^T a + lambda I) x = a^T b` by Cholesky on the normal
/// equations; falls back to the SVD route if the system is not positive
/// definite.
pub fn ridge_normal(a: &DMatrix<f64>, b: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let mut g = a.transpose() * a;
    for i in 0..g.nrows() {
        g[(i, i)] += lambda;
    }
    let rhs = a.transpose() * b;
    match g.cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => ridge_svd(a, b, lambda).coefficients,
    }
}

/// Gathers the listed columns into a new matrix.
pub fn select_columns(a: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), cols.len(), |i, j| a[(i, cols[j])])
}

/// Gathers the listed rows into a new matrix.
pub fn select_rows(a: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), a.ncols(), |i, j| a[(rows[i], j)])
}

pub fn select_entries(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}
