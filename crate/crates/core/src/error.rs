use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("agent index {index} out of range for a game with {agents} agents")]
    AgentOutOfRange { index: usize, agents: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point is outside the constraint set (violation {violation:e})")]
    Infeasible { violation: f64 },

    #[error("dither amplitude for coordinate {coordinate} is zero")]
    ZeroAmplitude { coordinate: usize },

    #[error("step size is outside the contractive range (c = {c})")]
    NotContractive { c: f64 },

    #[error("pseudogradient is not strongly monotone on the sampled region (mu_hat = {mu_hat})")]
    NotMonotone { mu_hat: f64, lip_hat: f64 },

    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("sampling periods have no rational ratio within tolerance (agent {agent}, ratio {ratio})")]
    IrrationalPeriods { agent: usize, ratio: f64 },

    #[error("agents {first} and {second} jump simultaneously at t = {time}")]
    SimultaneousJump { first: usize, second: usize, time: f64 },

    #[error("no step size satisfies the epoch contraction inequality")]
    InfeasibleStepsize,

    #[error("epoch {epoch}: Lyapunov ratio {ratio} exceeds the contraction bound {bound}")]
    ContractionViolated { epoch: usize, ratio: f64, bound: f64 },

    #[error("fast state left its compact set at step {step}")]
    EscapedOmega { step: usize },

    #[error("resonant frequency combination {value} (distance {distance:e} from 2πZ)")]
    Resonant { value: f64, distance: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
