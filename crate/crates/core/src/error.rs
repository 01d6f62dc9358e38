use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid chain: {0}")]
    InvalidChain(String),

    #[error("no absorption: every absorption rate is zero (C = 0)")]
    NoAbsorption,

    #[error("chain spec: {0}")]
    Spec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("distribution: {0}")]
    InvalidDistribution(String),

    #[error("conditioning event has vanishing probability (survival = {survival:e})")]
    VanishingSurvival { survival: f64 },

    #[error("ODE step too large: weight {value:e} at state {state} after t = {time}; use a smaller step")]
    StepTooLarge {
        state: String,
        value: f64,
        time: f64,
    },

    #[error("no convergence after {iterations} iterations (last delta {last_delta:e}, residual {residual:e})")]
    NotConverged {
        iterations: usize,
        last_delta: f64,
        residual: f64,
    },

    #[error("singular linear system")]
    Singular,

    #[error("ergodicity coefficient is zero; {0} requires alpha > 0")]
    NoRegeneration(&'static str),

    #[error("coupling from the past did not coalesce within {doublings} doublings (ancestry size {ancestry_size})")]
    NoCoalescence {
        doublings: u32,
        ancestry_size: usize,
    },

    #[error("report mismatch: {0}")]
    KeyMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
