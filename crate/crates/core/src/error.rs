use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("coincident transceiver: AP and receiver share a position")]
    CoincidentTransceiver,

    #[error("degenerate receiver geometry for user {user} after {attempts} resampling attempts")]
    DegenerateReceiver { user: usize, attempts: usize },

    #[error("BIA requires >= 2 transmitters, got {0}")]
    TooFewTransmitters(usize),

    #[error("block too large: {slots} slots exceeds cap {cap}")]
    BlockTooLarge { slots: u128, cap: u64 },

    #[error("eye-safety parameter invalid: {0}")]
    EyeSafety(String),

    #[error("noise model: {0}")]
    Noise(String),

    #[error("non-positive noise variance")]
    NonPositiveNoise,

    #[error("singular noise covariance")]
    SingularCovariance,

    #[error("cannot form {groups} groups from {users} users")]
    TooFewUsers { users: usize, groups: usize },

    #[error("infeasible quality-of-service target in group {group}: requires {required:.4} bits/s/Hz, at most {achievable:.4} achievable")]
    InfeasibleQos {
        group: usize,
        required: f64,
        achievable: f64,
    },

    #[error("experiment `{0}`")]
    Experiment(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
