use thiserror::Error;

use crate::model::Violation;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("row sums to {sum}, outside tolerance")]
    RowSum { sum: f64 },
    #[error("negative or non-finite probability {value} for outcome {outcome}")]
    NegativeProbability { outcome: usize, value: f64 },
    #[error("distribution has empty support")]
    EmptySupport,
    #[error("model violates {} invariant(s): {}", .0.len(), .0.first().map(|v| v.to_string()).unwrap_or_default())]
    Invalid(Vec<Violation>),
    #[error("strategy has no choice for observation {0}")]
    StrategyIncomplete(String),
    #[error("strategy chooses action {action} which is not enabled at observation {observation}")]
    IllegalSupport { observation: String, action: String },
    #[error("unknown observation {0}")]
    UnknownObservation(String),
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("unsatisfiable scenario ranges: {0}")]
    InvalidRanges(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheckError {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainingError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("rejected trajectory: {0}")]
    RejectedTrajectory(String),
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("specification already satisfied, no counterexample needed")]
    NoCounterexampleNeeded,
    #[error("demonstrator failed: {0}")]
    Demonstrator(String),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
