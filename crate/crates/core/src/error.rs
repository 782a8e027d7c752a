use alloc::string::String;

/// Errors raised by the solvers and the simulator.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("transition matrix is not row-stochastic (row {row} sums to {sum})")]
    NotRowStochastic { row: usize, sum: f64 },
    #[error("ZF infeasible: {0}; resample channel")]
    ZfInfeasible(String),
    #[error("BD infeasible: null space of the interfering channels is too small ({rank} >= {n_cu})")]
    BdInfeasible { rank: usize, n_cu: usize },
    #[error("zero-rate transmission undefined")]
    ZeroRate,
    #[error("battery underflow: infeasible schedule (level would be {level} J)")]
    BatteryUnderflow { level: f64 },
    #[error("instance too large for BFS ({candidates} candidates, budget {budget})")]
    BfsBudget { candidates: f64, budget: f64 },
    #[error("infeasible: theta_max too tight")]
    ThetaInfeasible,
    #[error("MEC has no devices this round")]
    EmptyAggregation,
    #[error("learning rate too high (loss {0})")]
    Diverged(f64),
    #[error("no MEC has spare capacity for device {0}")]
    NoCapacity(usize),
}

pub type Result<T> = core::result::Result<T, Error>;
