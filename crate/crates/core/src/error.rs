use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameters out of range: {0}")]
    InvalidParams(String),

    #[error("(alpha={alpha}, beta={beta}) is {class}, not in the forward-backward-forward region")]
    NotFdbdf { alpha: f64, beta: f64, class: String },

    #[error("flux value {value} outside the branch domain [{lo}, {hi}]")]
    BranchRange { value: f64, lo: f64, hi: f64 },

    #[error("density {value} outside the modified-flux domain [-1, 2]")]
    Domain { value: f64 },

    #[error("modified flux infeasible: {0}")]
    Infeasible(String),

    #[error("explicit step dt={dt} violates the stability limit dt <= {required}")]
    Cfl { dt: f64, required: f64 },

    #[error("non-finite value at step {step}")]
    NonFinite { step: usize },

    #[error("newton iteration did not converge at step {step} (residual {residual:e})")]
    Newton { step: usize, residual: f64 },

    #[error("initial datum incompatible: {0}")]
    Compatibility(String),

    #[error("condition not reached before t={t_max}; closest approach {closest}")]
    Timeout { t_max: f64, closest: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("horizon mismatch: field ends at {field}, test function at {test}")]
    Horizon { field: f64, test: f64 },

    #[error("laminate: {0}")]
    Laminate(String),

    #[error("closeness target eps={eps} infeasible for delta={delta}; minimal achievable sup deviation ~{achievable}")]
    EpsInfeasible { eps: f64, delta: f64, achievable: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
