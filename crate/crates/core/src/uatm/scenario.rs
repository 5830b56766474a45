use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::{DomainError, PinError};
use crate::ground::{ground, ground_detailed, GroundProgram, GroundRule, Value};
use crate::solve::{solve, SolveOptions, SolveResult};
use crate::syntax::{parse_program, Atom, Literal, Program, Statement, Term};

/// Verbatim program texts of the built-in scenarios.
pub mod sources {
    pub const ENV_INFO: &str = include_str!("../../programs/env_info.lp");
    pub const AGENT_INFO1: &str = include_str!("../../programs/agent_info1.lp");
    pub const AGENT_INFO2: &str = include_str!("../../programs/agent_info2.lp");
    pub const QUERY01: &str = include_str!("../../programs/query01.lp");
    pub const QUERY02: &str = include_str!("../../programs/query02.lp");
    pub const QUERY03: &str = include_str!("../../programs/query03.lp");
    pub const QUERY04: &str = include_str!("../../programs/query04.lp");
    pub const QUERY05: &str = include_str!("../../programs/query05.lp");

    /// `(file name, contents)` of every embedded program.
    pub const FILES: [(&str, &str); 8] = [
        ("env_info.lp", ENV_INFO),
        ("agent_info1.lp", AGENT_INFO1),
        ("agent_info2.lp", AGENT_INFO2),
        ("query01.lp", QUERY01),
        ("query02.lp", QUERY02),
        ("query03.lp", QUERY03),
        ("query04.lp", QUERY04),
        ("query05.lp", QUERY05),
    ];
}

pub const SCENARIO_NAMES: [&str; 5] = ["query01", "query02", "query03", "query04", "query05"];

/// Which typed outcome a scenario's models are read into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    Detour,
    RoundTrip,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub name: String,
    pub environment: Program,
    pub agents: Program,
    pub query: Program,
    /// Placements substituted for the agents' choice rule, if any.
    pub pins: Vec<Pin>,
}

impl Scenario {
    /// Environment, agents, and query, in that order.
    pub fn program(&self) -> Program {
        Program::concat([&self.environment, &self.agents, &self.query])
    }

    pub fn kind(&self) -> QueryKind {
        let defines = |p: &str| {
            self.query.statements.iter().any(|s| match s {
                Statement::Rule { head, .. } => head.predicate == p,
                _ => false,
            })
        };
        if defines("round_request") {
            QueryKind::RoundTrip
        } else {
            QueryKind::Detour
        }
    }

    /// Name of the agents file the scenario was built from.
    pub fn agents_file(&self) -> &'static str {
        if self.name == "query05" {
            "agent_info2.lp"
        } else {
            "agent_info1.lp"
        }
    }
}

fn parse_embedded(src: &str) -> Program {
    parse_program(src).expect("embedded programs parse")
}

pub fn builtin_scenario(name: &str) -> Result<Scenario, DomainError> {
    use sources::*;
    let (agents, query) = match name {
        "query01" => (AGENT_INFO1, QUERY01),
        "query02" => (AGENT_INFO1, QUERY02),
        "query03" => (AGENT_INFO1, QUERY03),
        "query04" => (AGENT_INFO1, QUERY04),
        "query05" => (AGENT_INFO2, QUERY05),
        other => return Err(DomainError::UnknownScenario(other.to_string())),
    };
    Ok(Scenario {
        name: name.to_string(),
        environment: parse_embedded(ENV_INFO),
        agents: parse_embedded(agents),
        query: parse_embedded(query),
        pins: Vec::new(),
    })
}

/// One fixed placement, written `agent=U-V:WP`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Pin {
    pub agent: i64,
    pub corridor: (i64, i64),
    pub waypoint: i64,
}

impl Pin {
    pub fn new(agent: i64, corridor: (i64, i64), waypoint: i64) -> Self {
        Pin {
            agent,
            corridor,
            waypoint,
        }
    }
}

impl fmt::Display for Pin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}={}-{}:{}",
            self.agent, self.corridor.0, self.corridor.1, self.waypoint
        )
    }
}

impl FromStr for Pin {
    type Err = PinError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PinError::Format(s.to_string());
        let (agent, rest) = s.split_once('=').ok_or_else(bad)?;
        let (corridor, wp) = rest.split_once(':').ok_or_else(bad)?;
        let (u, v) = corridor.split_once('-').ok_or_else(bad)?;
        let num = |t: &str| t.trim().parse::<i64>().map_err(|_| bad());
        Ok(Pin {
            agent: num(agent)?,
            corridor: (num(u)?, num(v)?),
            waypoint: num(wp)?,
        })
    }
}

/// Parses a list of pins, e.g. from repeated `--pin` flags.
pub fn parse_pins<S: AsRef<str>>(items: &[S]) -> Result<Vec<Pin>, PinError> {
    items.iter().map(|s| s.as_ref().parse()).collect()
}

fn is_loc(a: &Atom) -> bool {
    a.predicate == "loc" && a.arity() == 5
}

fn is_placement_choice(st: &Statement) -> bool {
    matches!(st, Statement::Choice(c) if c.elements.iter().any(|e| is_loc(&e.head)))
}

/// A constraint over two or more placements and nothing else but
/// comparisons: the pairwise-distinctness guard of a placement choice.
fn is_distinctness(st: &Statement) -> bool {
    let Statement::Constraint(body) = st else {
        return false;
    };
    let locs = body
        .iter()
        .filter(|l| matches!(l, Literal::Pos(a) if is_loc(a)))
        .count();
    locs >= 2
        && body
            .iter()
            .all(|l| matches!(l, Literal::Cmp(..)) || matches!(l, Literal::Pos(a) if is_loc(a)))
}

/// (step, corridor, waypoint) alternatives per agent.
type Placements = BTreeMap<i64, BTreeSet<(i64, (i64, i64), i64)>>;

/// Placement options of the agents' choice rule.
fn placement_options(s: &Scenario) -> Result<Placements, DomainError> {
    let mut p = s.environment.clone();
    p.statements.extend(
        s.agents
            .statements
            .iter()
            .filter(|st| is_placement_choice(st))
            .cloned(),
    );
    let g = ground(&p)?;
    let mut out: BTreeMap<i64, BTreeSet<_>> = BTreeMap::new();
    for r in &g.rules {
        if let GroundRule::Choice { heads, .. } = r {
            for &h in heads {
                let atom = g.atom(h);
                if atom.predicate.as_ref() != "loc" {
                    continue;
                }
                if let Some(a) = atom.int_args() {
                    out.entry(a[0])
                        .or_default()
                        .insert((a[1], (a[2], a[3]), a[4]));
                }
            }
        }
    }
    Ok(out)
}

/// Replaces the agents' placement choice (and its distinctness constraint)
/// by `loc` facts for `pins`.
pub fn pin_locations(s: &Scenario, pins: &[Pin]) -> Result<Scenario, DomainError> {
    if pins.is_empty() {
        return Ok(s.clone());
    }
    let options = placement_options(s)?;
    let expected: Vec<i64> = options.keys().copied().collect();
    let mut given: Vec<i64> = pins.iter().map(|p| p.agent).collect();
    given.sort_unstable();
    if given != expected {
        return Err(PinError::WrongAgents { expected, given }.into());
    }
    let mut seen: BTreeMap<((i64, i64), i64), i64> = BTreeMap::new();
    let mut facts = Vec::new();
    for pin in pins {
        let step = options[&pin.agent]
            .iter()
            .find(|(_, c, w)| *c == pin.corridor && *w == pin.waypoint)
            .map(|(t, _, _)| *t)
            .ok_or(PinError::OutOfRange(*pin))?;
        if let Some(&other) = seen.get(&(pin.corridor, pin.waypoint)) {
            return Err(PinError::DuplicateWaypoint {
                agents: (other, pin.agent),
                corridor: pin.corridor,
                waypoint: pin.waypoint,
            }
            .into());
        }
        seen.insert((pin.corridor, pin.waypoint), pin.agent);
        let args = [
            pin.agent,
            step,
            pin.corridor.0,
            pin.corridor.1,
            pin.waypoint,
        ]
        .into_iter()
        .map(Term::Int)
        .collect();
        facts.push(Statement::Fact(Atom::new("loc", args)));
    }

    let mut statements = Vec::with_capacity(s.agents.statements.len() + facts.len());
    let mut facts = Some(facts);
    for st in &s.agents.statements {
        if is_placement_choice(st) {
            if let Some(f) = facts.take() {
                statements.extend(f);
            }
        } else if !is_distinctness(st) {
            statements.push(st.clone());
        }
    }
    let mut sorted = pins.to_vec();
    sorted.sort();
    Ok(Scenario {
        agents: Program::new(statements),
        pins: sorted,
        ..s.clone()
    })
}

/// [`pin_locations`] for a whole program: the placement choice and its
/// distinctness constraint are found wherever they occur and replaced by
/// `loc` facts in place.
pub fn pin_program(p: &Program, pins: &[Pin]) -> Result<Program, DomainError> {
    if pins.is_empty() {
        return Ok(p.clone());
    }
    let (agents, rest): (Vec<_>, Vec<_>) = p
        .statements
        .iter()
        .cloned()
        .partition(|st| is_placement_choice(st) || is_distinctness(st));
    let s = Scenario {
        name: String::new(),
        environment: Program::new(rest),
        agents: Program::new(agents),
        query: Program::default(),
        pins: Vec::new(),
    };
    let pinned = pin_locations(&s, pins)?;
    // Put the facts where the choice was so the statement order survives.
    let mut facts = Some(pinned.agents.statements);
    let mut out = Vec::with_capacity(p.statements.len());
    for st in &p.statements {
        if is_placement_choice(st) {
            out.extend(facts.take().unwrap_or_default());
        } else if !is_distinctness(st) {
            out.push(st.clone());
        }
    }
    Ok(Program::new(out))
}

/// Ground program of a scenario plus the solver's answer.
#[derive(Debug, Clone)]
pub struct QueryRun {
    pub program: GroundProgram,
    pub result: SolveResult,
}

pub fn run_query(s: &Scenario, opts: &SolveOptions) -> Result<QueryRun, DomainError> {
    let program = ground_detailed(&s.program())?.program;
    let result = solve(&program, opts)?;
    Ok(QueryRun { program, result })
}

/// Integer arguments of `atom` when it is `pred/arity`.
pub(crate) fn int_args(
    atom: &crate::ground::GroundAtom,
    pred: &str,
    arity: usize,
) -> Option<Vec<i64>> {
    if atom.predicate.as_ref() != pred || atom.args.len() != arity {
        return None;
    }
    atom.args.iter().map(Value::as_int).collect()
}
