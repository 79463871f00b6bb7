use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("inverted element at point {point}: det(F) = {det:.6e}")]
    InvertedElement { point: usize, det: f64 },

    #[error("non-positive point volume at point {point}: v_p = {volume:.6e}")]
    NegativePointVolume { point: usize, volume: f64 },

    #[error("non-positive effective fluid density in cell {cell}: {value:.6e}")]
    NegativeDensity { cell: usize, value: f64 },

    #[error("non-positive internal energy in cell {cell}: {value:.6e}")]
    NegativeInternalEnergy { cell: usize, value: f64 },

    #[error("non-finite field detected: {0}")]
    NonFinite(String),

    #[error("vacuum formation in Riemann problem")]
    Vacuum,

    #[error("at step {step} (t = {time:.6e} s): {source}")]
    Step {
        step: u64,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("verification suite '{suite}' exceeded wall-clock budget of {budget_s} s")]
    Timeout { suite: String, budget_s: f64 },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn with_step(self, step: u64, time: f64) -> Self {
        Error::Step {
            step,
            time,
            source: Box::new(self),
        }
    }
}
