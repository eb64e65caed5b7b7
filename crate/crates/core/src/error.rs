use thiserror::Error;

/// Errors raised by the graph layer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("a network needs at least two agents, got {0}")]
    TooFewAgents(usize),
    #[error("agent index {index} out of range for {n} agents")]
    AgentOutOfRange { index: usize, n: usize },
    #[error("self-loop on agent {0}: a_ii must be zero")]
    SelfLoop(usize),
    #[error("weight a[{i}][{j}] is not finite")]
    NonFiniteWeight { i: usize, j: usize },
    #[error("snapshot has {got} agents, schedule expects {expected}")]
    AgentCountMismatch { expected: usize, got: usize },
    #[error("schedule needs at least one snapshot")]
    EmptySchedule,
    #[error("dwell time {0} must be finite and strictly positive")]
    BadDwell(f64),
    #[error("{snapshots} snapshots but {dwells} dwell times")]
    DwellCountMismatch { snapshots: usize, dwells: usize },
    #[error("time {t} precedes the schedule start {t_start}")]
    BeforeStart { t: f64, t_start: f64 },
    #[error("interval [{t1}, {t2}) is empty or reversed")]
    BadInterval { t1: f64, t2: f64 },
    #[error("{name} must be finite and strictly positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("schedule is not eventually periodic")]
    UnsupportedSchedule,
    #[error("node set is empty")]
    EmptyNodeSet,
    #[error("node {node} is not reachable from the root set")]
    Unreachable { node: usize },
    #[error("exhaustive path search limited to {limit} nodes, graph has {n}")]
    Capacity { n: usize, limit: usize },
}

/// Errors raised while integrating the dynamics.
#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("gain condition violated: {0}")]
    Gain(String),
    #[error("root set mismatch: declared {declared:?}, detected {detected:?}")]
    RootSetMismatch {
        declared: Vec<usize>,
        detected: Option<Vec<usize>>,
    },
    #[error("no fixed root set: {0}")]
    NoRootSet(String),
    #[error("integration diverged after t = {last_valid_time}")]
    Diverged {
        last_valid_time: f64,
        partial: Box<crate::dynamics::Trajectory>,
    },
}

/// Errors raised by the certification layer.
#[derive(Debug, Error)]
pub enum CertifyError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("receiver set is empty: the constants are not applicable")]
    NotApplicable,
    #[error("longest path d0 = 0 while the receiver set is nonempty")]
    Inconsistent,
    #[error("{0} requires an open-loop trajectory")]
    Misuse(&'static str),
    #[error("horizon {horizon} too short: need at least {needed}")]
    HorizonTooShort { horizon: f64, needed: f64 },
}
