//! Identification of the drift and diffusion of a scalar Itô SDE
//!
//! ```text
//! dX_t = mu(X_t) dt + sigma(X_t) dB_t
//! ```
//!
//! from one discretely observed trajectory. The pipeline runs in stages:
//!
//! 1. windowed quadratic variation gives pointwise diffusion values, a sparse
//!    symbolic fit of `sigma`, and increments of the martingale-measure
//!    Brownian motion `B^Q`;
//! 2. on each window the observed state is regressed on iterated
//!    Stratonovich integrals of `(t, B^Q)`;
//! 3. the `psi_21` coefficients feed a first-order ODE for the drift, solved
//!    by an Euler recursion in state space from the known `mu(X_0)`;
//! 4. a discrete Girsanov map turns `B^Q` back into the physical noise `B^P`;
//! 5. an elastic-net regression of `dX` on `Theta(X) dt` and
//!    `Theta(X) dB^P`, tuned by contiguous-fold time-series cross-validation
//!    and the one-standard-error rule, returns the final symbolic model.
//!
//! [`pipeline::run_pipeline`] wires everything together; each stage is also
//! usable on its own.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diffusion;
pub mod drift;
pub mod error;
pub mod io;
pub mod linalg;
pub mod model;
pub mod path;
pub mod pipeline;
pub mod signature;
pub mod sparse;

pub use error::{Error, Result};
pub use model::{Basis, FunctionLibrary, SparseModel};
pub use path::{BrownianPath, CoefficientPair, Measure, TimeGrid, Trajectory};
