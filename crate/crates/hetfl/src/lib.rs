//! Command line, configuration files, CSV export and multi-seed experiments
//! on top of `hetfl-core`.

pub mod cli;
pub mod config;
pub mod experiments;
pub mod export;
pub mod stats;

pub use hetfl_core as core;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Sim(#[from] hetfl_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0} verification check(s) failed")]
    Verify(usize),
}

impl Error {
    /// Short tag used in the `ERROR:<code>:` prefix.
    pub fn code(&self) -> &'static str {
        use hetfl_core::Error as E;
        match self {
            Error::Config(_) => "config",
            Error::Usage(_) => "usage",
            Error::Sim(E::InvalidArgument(_) | E::NotRowStochastic { .. } | E::ZeroRate) => "config",
            Error::Sim(
                E::ThetaInfeasible
                | E::BfsBudget { .. }
                | E::NoCapacity(_)
                | E::ZfInfeasible(_)
                | E::BdInfeasible { .. }
                | E::BatteryUnderflow { .. },
            ) => "infeasible",
            Error::Sim(E::Diverged(_) | E::EmptyAggregation) => "runtime",
            Error::Io(_) | Error::Csv(_) => "io",
            Error::Verify(_) => "verify",
        }
    }

    /// 1 for bad input, 2 for an infeasible problem, 3 for anything that went
    /// wrong while running.
    pub fn exit_code(&self) -> i32 {
        match self.code() {
            "config" | "usage" => 1,
            "infeasible" => 2,
            _ => 3,
        }
    }
}
