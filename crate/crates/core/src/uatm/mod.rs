//! The UAM detour-management scenarios: embedded programs, location
//! pinning, typed outcomes, the network view, and answer validation.

mod network;
mod outcome;
mod scenario;
mod validate;

pub use network::{build_network_view, Corridor, Coverage, VertiportNetwork};
pub use outcome::{
    agent_snapshots, extract_outcome, outcome_from_atoms, AgentSnapshot, DetourOutcome, Outcome,
    RoundTripOutcome, StepPlan,
};
pub use scenario::{
    builtin_scenario, parse_pins, pin_locations, pin_program, run_query, sources, Pin, QueryKind,
    QueryRun, Scenario, SCENARIO_NAMES,
};
pub use validate::{validate_answer_set, validate_atoms, CheckResult, ValidationReport, Validator};

use thiserror::Error;

use crate::ground::GroundError;
use crate::solve::SolveError;
use crate::syntax::ParseError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PinError {
    #[error("malformed pin `{0}`, expected AGENT=U-V:WAYPOINT")]
    Format(String),
    #[error("pins name agents {given:?}, but the placement choice ranges over {expected:?}")]
    WrongAgents { expected: Vec<i64>, given: Vec<i64> },
    #[error("pin {0} is outside the agent's placement range")]
    OutOfRange(Pin),
    #[error("agents {} and {} are both pinned to waypoint {waypoint} of corridor ({}, {})",
        .agents.0, .agents.1, .corridor.0, .corridor.1)]
    DuplicateWaypoint {
        agents: (i64, i64),
        corridor: (i64, i64),
        waypoint: i64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("unknown scenario `{0}` (expected one of query01..query05)")]
    UnknownScenario(String),
    #[error(transparent)]
    Pin(#[from] PinError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("malformed environment: {0}")]
    MalformedEnvironment(String),
}
