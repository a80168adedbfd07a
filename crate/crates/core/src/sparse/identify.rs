use super::cv::{cv_time_series, full_fit, CvConfig, CvReport};
use super::design::build_ssisde_design;
use crate::error::Result;
use crate::model::{FunctionLibrary, SparseModel};

/// Final symbolic drift and diffusion.
#[derive(Debug, Clone)]
pub struct Identification {
    pub mu: SparseModel,
    pub sigma: SparseModel,
    /// Mean squared one-step error over all rows.
    pub mse: f64,
    pub report: CvReport,
    /// The penalized fit on all rows hit the sweep limit.
    pub unconverged: bool,
}

/// Cross-validates, picks `(alpha, rho)` by the one-standard-error rule,
/// refits on all rows and de-biases on the selected support.
pub fn ssisde_identify(
    states: &[f64],
    dt: &[f64],
    dbp: &[f64],
    lib_mu: &FunctionLibrary,
    lib_sigma: &FunctionLibrary,
    cfg: &CvConfig,
) -> Result<Identification> {
    let design = build_ssisde_design(states, dt, dbp, lib_mu, lib_sigma)?;
    let report = cv_time_series(&design, cfg)?;
    let (beta, converged) = full_fit(&design, report.alpha_dagger, report.rho_dagger, &cfg.solver)?;
    let mse = design.mse(&beta);
    let (mu, sigma) = design.split(&beta)?;
    Ok(Identification {
        mu,
        sigma,
        mse,
        report,
        unconverged: !converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_rows_identify_exactly() {
        let m = 400;
        let dt = vec![1.0 / m as f64; m];
        let dbp: Vec<f64> = (0..m)
            .map(|i| 0.05 * ((i * 7919 % 211) as f64 / 105.0 - 1.0))
            .collect();
        let mut states = vec![1.0];
        for i in 0..m {
            let x = states[i];
            states.push(x + 0.5 * x * dt[i] + 0.3 * x * dbp[i]);
        }
        let lib = FunctionLibrary::monomials("lib", 2);
        let id = ssisde_identify(&states, &dt, &dbp, &lib, &lib, &CvConfig::default()).unwrap();
        assert_eq!(id.mu.support(), vec![1]);
        assert_eq!(id.sigma.support(), vec![1]);
        assert!((id.mu.coefficient("x") - 0.5).abs() < 1e-8);
        assert!((id.sigma.coefficient("x") - 0.3).abs() < 1e-8);
        assert!(id.mse < 1e-20);
    }
}
