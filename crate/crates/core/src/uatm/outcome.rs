use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::network::VertiportNetwork;
use super::scenario::{int_args, QueryKind, Scenario};
use crate::ground::{GroundAtom, GroundProgram};
use crate::solve::AnswerSet;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DetourOutcome {
    pub covered: BTreeSet<i64>,
    pub uncovered: BTreeSet<i64>,
    pub detour_requests: BTreeSet<(i64, i64)>,
    pub route_changes: BTreeSet<(i64, i64)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RoundTripOutcome {
    pub ahead: BTreeSet<i64>,
    pub covered_by_uatm2: BTreeSet<i64>,
    pub covered_by_other: BTreeSet<i64>,
    /// `(agent, target, step)`
    pub round_requests: BTreeSet<(i64, i64, i64)>,
    pub round_routes: BTreeSet<(i64, i64, i64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Detour(DetourOutcome),
    RoundTrip(RoundTripOutcome),
}

/// Reads the typed outcome of `kind` from a set of atoms; other predicates
/// are ignored.
pub fn outcome_from_atoms<'a>(
    kind: QueryKind,
    atoms: impl IntoIterator<Item = &'a GroundAtom>,
) -> Outcome {
    match kind {
        QueryKind::Detour => {
            let mut o = DetourOutcome::default();
            for a in atoms {
                if let Some(v) = int_args(a, "covered_by_uatm1", 1) {
                    o.covered.insert(v[0]);
                } else if let Some(v) = int_args(a, "uncovered_by_uatm1", 1) {
                    o.uncovered.insert(v[0]);
                } else if let Some(v) = int_args(a, "detour_request", 2) {
                    o.detour_requests.insert((v[0], v[1]));
                } else if let Some(v) = int_args(a, "change_route", 2) {
                    o.route_changes.insert((v[0], v[1]));
                }
            }
            Outcome::Detour(o)
        }
        QueryKind::RoundTrip => {
            let mut o = RoundTripOutcome::default();
            for a in atoms {
                if let Some(v) = int_args(a, "ahead_agents", 2) {
                    o.ahead.insert(v[0]);
                } else if let Some(v) = int_args(a, "covered_by_uatm2", 1) {
                    o.covered_by_uatm2.insert(v[0]);
                } else if let Some(v) = int_args(a, "covered_by_other", 1) {
                    o.covered_by_other.insert(v[0]);
                } else if let Some(v) = int_args(a, "round_request", 3) {
                    o.round_requests.insert((v[0], v[1], v[2]));
                } else if let Some(v) = int_args(a, "round_route", 3) {
                    o.round_routes.insert((v[0], v[1], v[2]));
                }
            }
            Outcome::RoundTrip(o)
        }
    }
}

pub fn extract_outcome(s: &Scenario, g: &GroundProgram, m: &AnswerSet) -> Outcome {
    outcome_from_atoms(s.kind(), m.symbols(g))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StepPlan {
    pub step: i64,
    pub edges: BTreeSet<(i64, i64)>,
}

/// Where one agent is and what it plans, as read from a model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AgentSnapshot {
    pub agent: i64,
    pub step: i64,
    pub corridor: (i64, i64),
    pub waypoint: i64,
    /// Plan edges at `step`.
    pub plan: BTreeSet<(i64, i64)>,
    /// Plan edges at every step the model mentions.
    pub plans: Vec<StepPlan>,
    pub target: Option<i64>,
    /// UATMs whose coverage includes the agent's waypoint.
    pub covered_by: Vec<i64>,
}

/// One snapshot per `loc/5` atom, ordered by agent.
pub fn agent_snapshots<'a>(
    atoms: impl IntoIterator<Item = &'a GroundAtom>,
    network: &VertiportNetwork,
) -> Vec<AgentSnapshot> {
    let mut locs = Vec::new();
    let mut plans: BTreeMap<i64, BTreeMap<i64, BTreeSet<(i64, i64)>>> = BTreeMap::new();
    let mut targets: BTreeMap<(i64, i64), i64> = BTreeMap::new();
    for a in atoms {
        if let Some(v) = int_args(a, "loc", 5) {
            locs.push(v);
        } else if let Some(v) = int_args(a, "plan", 4) {
            plans
                .entry(v[0])
                .or_default()
                .entry(v[1])
                .or_default()
                .insert((v[2], v[3]));
        } else if let Some(v) = int_args(a, "target", 3) {
            targets.insert((v[0], v[1]), v[2]);
        }
    }
    locs.sort();
    locs.into_iter()
        .map(|v| {
            let (agent, step) = (v[0], v[1]);
            let by_step = plans.get(&agent);
            AgentSnapshot {
                agent,
                step,
                corridor: (v[2], v[3]),
                waypoint: v[4],
                plan: by_step
                    .and_then(|p| p.get(&step))
                    .cloned()
                    .unwrap_or_default(),
                plans: by_step
                    .map(|p| {
                        p.iter()
                            .map(|(&step, edges)| StepPlan {
                                step,
                                edges: edges.clone(),
                            })
                            .collect()
                    })
                    .unwrap_or_default(),
                target: targets.get(&(agent, step)).copied(),
                covered_by: network.covering((v[2], v[3]), v[4]),
            }
        })
        .collect()
}
