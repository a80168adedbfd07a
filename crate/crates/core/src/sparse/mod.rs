//! Sparse identification of the final drift and diffusion models by
//! elastic-net regression with time-series cross-validation.

mod cv;
mod design;
mod elastic_net;
mod identify;

pub use cv::{
    cv_time_series, delta_vs_support, fold_ranges, geomspace, select_one_se, CvCell, CvConfig,
    CvReport, DeltaRow, DeltaTable, SupportKind,
};
pub use design::{build_ssisde_design, restricted_ls_debias, SsisdeDesign};
pub use elastic_net::{column_rms, elastic_net_fit, ElasticNetFit, ElasticNetOptions, NONZERO_TOL};
pub use identify::{ssisde_identify, Identification};
