//! The manager/UATM dialogue: a session over one scenario, the actions a
//! traffic manager can take, and the turn log they produce.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;
use uatm_asp::solve::{SolveOptions, Status};
use uatm_asp::uatm::{
    agent_snapshots, build_network_view, builtin_scenario, extract_outcome, parse_pins,
    pin_locations, run_query, validate_answer_set, AgentSnapshot, DomainError, Outcome, Pin,
    Scenario, ValidationReport, VertiportNetwork,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Actor {
    Manager,
    Uatm,
    UatmNetwork,
}

impl Actor {
    pub fn label(self) -> &'static str {
        match self {
            Actor::Manager => "manager",
            Actor::Uatm => "uatm",
            Actor::UatmNetwork => "uatm-network",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DialogueTurn {
    pub actor: Actor,
    pub utterance: String,
    pub triggered_query: Option<String>,
    pub outcome: Option<Outcome>,
}

impl DialogueTurn {
    fn say(actor: Actor, utterance: impl Into<String>) -> Self {
        DialogueTurn {
            actor,
            utterance: utterance.into(),
            triggered_query: None,
            outcome: None,
        }
    }
}

/// First model of the most recent query, with its validation.
#[derive(Debug, Clone, Serialize)]
pub struct LatestModel {
    pub query: String,
    pub status: Status,
    pub atoms: Vec<String>,
    pub outcome: Option<Outcome>,
    pub validation: Option<ValidationReport>,
    #[serde(skip)]
    pub agents: Vec<AgentSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActionError {
    #[error("corridor ({}, {}) is not in the network", .0.0, .0.1)]
    UnknownCorridor((i64, i64)),
    #[error("no {action} program for corridor ({}, {}); only (2, 3) is modelled", .corridor.0, .corridor.1)]
    UnsupportedCorridor {
        action: &'static str,
        corridor: (i64, i64),
    },
    #[error("the round trip is modelled behind agent 7 only, not agent {0}")]
    UnsupportedLeader(i64),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// One dialogue over a fixed environment and a (possibly pinned) set of
/// agents. Turns are only ever appended.
#[derive(Debug, Clone)]
pub struct Session {
    scenario: Scenario,
    network: VertiportNetwork,
    history: Vec<DialogueTurn>,
    latest: LatestModel,
}

fn list(items: impl IntoIterator<Item = i64>) -> String {
    let v: Vec<String> = items.into_iter().map(|a| a.to_string()).collect();
    if v.is_empty() {
        "none".into()
    } else {
        v.join(", ")
    }
}

/// `1..6, 8, 10..12`; `-` when empty.
pub fn ranges(v: &[i64]) -> String {
    let mut parts = Vec::new();
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[j] + 1 {
            j += 1;
        }
        parts.push(if j == i {
            v[i].to_string()
        } else {
            format!("{}..{}", v[i], v[j])
        });
        i = j + 1;
    }
    if parts.is_empty() {
        "-".into()
    } else {
        parts.join(", ")
    }
}

impl Session {
    /// Starts a dialogue on the agents of built-in scenario `name`, pinned
    /// when `pins` is non-empty, and solves that scenario once.
    pub fn new(name: &str, pins: &[Pin]) -> Result<Self, DomainError> {
        let scenario = pin_locations(&builtin_scenario(name)?, pins)?;
        let network = build_network_view(&scenario.environment)?;
        let latest = Self::solve(&scenario, &network)?;
        Ok(Session {
            scenario,
            network,
            history: Vec::new(),
            latest,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn network(&self) -> &VertiportNetwork {
        &self.network
    }

    pub fn history(&self) -> &[DialogueTurn] {
        &self.history
    }

    pub fn latest(&self) -> &LatestModel {
        &self.latest
    }

    fn solve(s: &Scenario, network: &VertiportNetwork) -> Result<LatestModel, DomainError> {
        let run = run_query(s, &SolveOptions::default())?;
        let m = run.result.models.first();
        Ok(LatestModel {
            query: s.name.clone(),
            status: run.result.status,
            atoms: m
                .map(|m| m.projected.iter().map(ToString::to_string).collect())
                .unwrap_or_default(),
            outcome: m.map(|m| extract_outcome(s, &run.program, m)),
            validation: m.map(|m| validate_answer_set(&run.program, m, 0)),
            agents: m
                .map(|m| agent_snapshots(m.symbols(&run.program), network))
                .unwrap_or_default(),
        })
    }

    /// Runs built-in query `query` over this session's agents.
    fn run_with_agents(&mut self, query: &str) -> Result<LatestModel, DomainError> {
        let mut s = builtin_scenario(query)?;
        s.agents = self.scenario.agents.clone();
        s.pins = self.scenario.pins.clone();
        let latest = Self::solve(&s, &self.network)?;
        self.latest = latest.clone();
        Ok(latest)
    }

    fn check_corridor(
        &self,
        action: &'static str,
        corridor: (i64, i64),
    ) -> Result<(), ActionError> {
        if self.network.corridor(corridor).is_none() {
            return Err(ActionError::UnknownCorridor(corridor));
        }
        if corridor != (2, 3) {
            return Err(ActionError::UnsupportedCorridor { action, corridor });
        }
        Ok(())
    }

    /// Appends `request` and the UATM's reply (an error turn on failure),
    /// returning the new turns.
    fn exchange(
        &mut self,
        request: String,
        respond: impl FnOnce(&mut Self) -> Result<Vec<DialogueTurn>, ActionError>,
    ) -> Result<Vec<DialogueTurn>, ActionError> {
        let start = self.history.len();
        self.history
            .push(DialogueTurn::say(Actor::Manager, request));
        let result = respond(self);
        match &result {
            Ok(turns) => self.history.extend(turns.iter().cloned()),
            Err(e) => self
                .history
                .push(DialogueTurn::say(Actor::Uatm, format!("error: {e}"))),
        }
        result.map(|_| self.history[start..].to_vec())
    }

    /// The corridor is congested: agents on vp1 → vp2 → vp3 are sent
    /// through vp7 instead.
    pub fn report_congestion(
        &mut self,
        corridor: (i64, i64),
    ) -> Result<Vec<DialogueTurn>, ActionError> {
        let request = format!(
            "The corridor between vp{} and vp{} is congested. Re-route the agents heading there.",
            corridor.0, corridor.1
        );
        self.exchange(request, |s| {
            s.check_corridor("congestion", corridor)?;
            let latest = s.run_with_agents("query04")?;
            let Some(Outcome::Detour(d)) = &latest.outcome else {
                return Ok(vec![DialogueTurn {
                    triggered_query: Some("query04".into()),
                    ..DialogueTurn::say(Actor::Uatm, "No consistent re-routing exists for these agents.")
                }]);
            };
            let rerouted: BTreeSet<i64> = d.route_changes.iter().map(|&(a, _)| a).collect();
            let relayed: Vec<i64> = rerouted.intersection(&d.uncovered).copied().collect();
            let steps: BTreeSet<i64> = d.route_changes.iter().map(|&(_, t)| t).collect();
            let text = if rerouted.is_empty() {
                "No agent on vp1 -> vp2 -> vp3 needs re-routing.".to_string()
            } else {
                format!(
                    "Rerouted agents {} via vp1 -> vp2 -> vp7 -> vp3 at step {}. Covered by UATM1: {}. \
                     Relayed via UATM Network: {}.",
                    list(rerouted.iter().copied()),
                    list(steps),
                    list(d.covered.iter().copied()),
                    list(relayed.iter().copied())
                )
            };
            let mut turns = vec![DialogueTurn {
                actor: Actor::Uatm,
                utterance: text,
                triggered_query: Some("query04".into()),
                outcome: latest.outcome.clone(),
            }];
            if !relayed.is_empty() {
                turns.push(DialogueTurn::say(
                    Actor::UatmNetwork,
                    format!("Relayed the new route to agents {}.", list(relayed)),
                ));
            }
            Ok(turns)
        })
    }

    /// Agents ahead of `behind` on the corridor make a round trip through
    /// vp7 so the corridor clears.
    pub fn clear_corridor(
        &mut self,
        corridor: (i64, i64),
        behind: i64,
    ) -> Result<Vec<DialogueTurn>, ActionError> {
        let request = format!(
            "Clear the corridor between vp{} and vp{} ahead of agent {behind}.",
            corridor.0, corridor.1
        );
        self.exchange(request, |s| {
            s.check_corridor("clearing", corridor)?;
            if behind != 7 {
                return Err(ActionError::UnsupportedLeader(behind));
            }
            let latest = s.run_with_agents("query05")?;
            let Some(Outcome::RoundTrip(o)) = &latest.outcome else {
                return Ok(vec![DialogueTurn {
                    triggered_query: Some("query05".into()),
                    ..DialogueTurn::say(
                        Actor::Uatm,
                        "No consistent round trip exists for these agents.",
                    )
                }]);
            };
            let routed: BTreeSet<i64> = o.round_routes.iter().map(|&(a, _, _)| a).collect();
            let relayed: Vec<i64> = routed.intersection(&o.covered_by_other).copied().collect();
            let text = if routed.is_empty() {
                format!("No agents are ahead of agent {behind} on the corridor; nothing to clear.")
            } else {
                format!(
                    "Round trip vp3 -> vp7 -> vp3 appended for agents {}. Covered by UATM2: {}. \
                     Relayed via UATM Network: {}.",
                    list(routed.iter().copied()),
                    list(o.covered_by_uatm2.iter().copied()),
                    list(relayed.iter().copied())
                )
            };
            let mut turns = vec![DialogueTurn {
                actor: Actor::Uatm,
                utterance: text,
                triggered_query: Some("query05".into()),
                outcome: latest.outcome.clone(),
            }];
            if !relayed.is_empty() {
                turns.push(DialogueTurn::say(
                    Actor::UatmNetwork,
                    format!("Relayed the round trip to agents {}.", list(relayed)),
                ));
            }
            Ok(turns)
        })
    }
}

pub fn render_network(net: &VertiportNetwork) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "vertiports: {}", list(net.vertiports.iter().copied()));
    for (uatm, vps) in &net.ownership {
        let _ = writeln!(
            out,
            "uatm{uatm} serves vertiports {}",
            list(vps.iter().copied())
        );
    }
    for c in &net.corridors {
        let _ = writeln!(
            out,
            "corridor ({}, {}): waypoints {}",
            c.from,
            c.to,
            ranges(&c.waypoints)
        );
        for cov in &c.coverage {
            let _ = writeln!(out, "  uatm{}: {}", cov.uatm, ranges(&cov.waypoints));
        }
        let _ = writeln!(out, "  uncovered: {}", ranges(&c.uncovered()));
    }
    out
}

fn edges(e: &BTreeSet<(i64, i64)>) -> String {
    e.iter()
        .map(|(u, v)| format!("{u}->{v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn render_agents(agents: &[AgentSnapshot]) -> String {
    let mut out = String::new();
    for a in agents {
        let target = a.target.map_or("-".to_string(), |t| format!("vp{t}"));
        let _ = writeln!(
            out,
            "agent {} at ({}, {}):{} step {} target {} covered by {}",
            a.agent,
            a.corridor.0,
            a.corridor.1,
            a.waypoint,
            a.step,
            target,
            if a.covered_by.is_empty() {
                "none".to_string()
            } else {
                a.covered_by
                    .iter()
                    .map(|u| format!("uatm{u}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            }
        );
        for p in &a.plans {
            let _ = writeln!(out, "  step {}: {}", p.step, edges(&p.edges));
        }
    }
    if out.is_empty() {
        out.push_str("no agents\n");
    }
    out
}

pub fn render_turns(turns: &[DialogueTurn]) -> String {
    turns
        .iter()
        .map(|t| format!("{}: {}\n", t.actor.label(), t.utterance))
        .collect()
}

pub const HELP: &str = "\
commands:
  network                          show vertiports, corridors, and coverage
  agents                           show agent positions and plans
  model                            show the latest model and its validation
  report congestion U V            re-route agents around corridor (U, V)
  clear corridor U V behind A      send agents ahead of A on a round trip
  session NAME [PIN...]            start over on scenario NAME (pins: A=U-V:WP)
  history                          show the dialogue so far
  help                             this text
  quit                             leave
";

/// Result of one REPL line.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dispatch {
    pub output: String,
    pub turns: Vec<DialogueTurn>,
    pub quit: bool,
}

impl Dispatch {
    fn text(output: impl Into<String>) -> Self {
        Dispatch {
            output: output.into(),
            ..Default::default()
        }
    }
}

fn ints(words: &[&str]) -> Option<Vec<i64>> {
    words.iter().map(|w| w.parse().ok()).collect()
}

fn action(result: Result<Vec<DialogueTurn>, ActionError>, session: &Session) -> Dispatch {
    let turns = match result {
        Ok(t) => t,
        // The failed exchange is already in the history.
        Err(_) => session.history()[session.history().len() - 2..].to_vec(),
    };
    Dispatch {
        output: render_turns(&turns),
        turns,
        quit: false,
    }
}

/// Interprets one REPL line against `session`.
pub fn repl_dispatch(line: &str, session: &mut Session) -> Dispatch {
    let words: Vec<&str> = line.split_whitespace().collect();
    match words.as_slice() {
        [] => Dispatch::default(),
        ["quit" | "exit"] => Dispatch {
            quit: true,
            ..Default::default()
        },
        ["help"] => Dispatch::text(HELP),
        ["network"] => Dispatch::text(render_network(session.network())),
        ["agents"] => Dispatch::text(render_agents(&session.latest().agents)),
        ["history"] => {
            let h = render_turns(session.history());
            Dispatch::text(if h.is_empty() {
                "no turns yet\n".into()
            } else {
                h
            })
        }
        ["model"] => {
            let m = session.latest();
            let mut out = format!("{} {}\n{}\n", m.query, m.status, m.atoms.join(" "));
            if let Some(v) = &m.validation {
                let _ = writeln!(
                    out,
                    "validation: {}",
                    if v.passed() { "pass" } else { "FAIL" }
                );
            }
            Dispatch::text(out)
        }
        ["report", "congestion", rest @ ..] => match ints(rest).as_deref() {
            Some(&[u, v]) => action(session.report_congestion((u, v)), session),
            _ => Dispatch::text(format!("usage: report congestion U V\n\n{HELP}")),
        },
        ["clear", "corridor", u, v, "behind", a] => match ints(&[u, v, a]).as_deref() {
            Some(&[u, v, a]) => action(session.clear_corridor((u, v), a), session),
            _ => Dispatch::text(format!("usage: clear corridor U V behind A\n\n{HELP}")),
        },
        ["session", name, pins @ ..] => {
            match parse_pins(pins)
                .map_err(DomainError::from)
                .and_then(|p| Session::new(name, &p))
            {
                Ok(s) => {
                    *session = s;
                    Dispatch::text(format!("session on {name}\n"))
                }
                Err(e) => Dispatch::text(format!("error: {e}\n")),
            }
        }
        _ => Dispatch::text(format!("unknown command `{}`\n\n{HELP}", line.trim())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_compression() {
        assert_eq!(ranges(&[]), "-");
        assert_eq!(ranges(&[1, 2, 3, 5, 7, 8]), "1..3, 5, 7..8");
    }

    #[test]
    fn unknown_command_shows_help() {
        let mut s = Session::new("query05", &[]).unwrap();
        let d = repl_dispatch("fly away", &mut s);
        assert!(d.output.contains("commands:"));
        assert!(d.turns.is_empty());
        assert!(repl_dispatch("quit", &mut s).quit);
    }
}
