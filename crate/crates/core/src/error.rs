use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("simulation blew up at step {index} (state {state})")]
    SimulationBlowup { index: usize, state: f64 },

    #[error("window {window} has {steps} fine steps, at least {required} required")]
    InsufficientResolution {
        window: usize,
        steps: usize,
        required: usize,
    },

    #[error("degenerate diffusion: zero quadratic variation in window {window}")]
    DegenerateDiffusion { window: usize },

    #[error("rank-deficient design; dependent columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },

    #[error("empty model: no active terms")]
    EmptyModel,

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("singular diffusion: sigma is not positive and finite at x = {x} (window {window})")]
    SingularDiffusion { x: f64, window: usize },

    #[error("drift recursion produced a non-finite value at window {window}")]
    DriftBlowup { window: usize },

    #[error(
        "coordinate descent did not converge after {sweeps} sweeps (kkt residual {kkt_residual:e})"
    )]
    ConvergenceFailure {
        sweeps: usize,
        kkt_residual: f64,
        coefficients: Vec<f64>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("stage `{stage}` failed: {source}\n  hint: {hint}")]
    Stage {
        stage: &'static str,
        hint: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn in_stage(self, stage: &'static str, hint: &'static str) -> Error {
        Error::Stage {
            stage,
            hint,
            source: Box::new(self),
        }
    }
}
