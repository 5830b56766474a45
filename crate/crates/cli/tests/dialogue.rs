use std::collections::BTreeSet;

use uatm_asp::uatm::{parse_pins, Outcome};
use uatm_cli::dialogue::{render_network, ActionError};
use uatm_cli::{repl_dispatch, Actor, Session};

const PLACEMENT4: [&str; 6] = [
    "3=1-2:1", "5=1-2:5", "1=1-2:6", "2=1-2:9", "4=1-2:18", "6=1-2:19",
];

fn placement4_session() -> Session {
    Session::new("query04", &parse_pins(&PLACEMENT4).unwrap()).unwrap()
}

#[test]
fn congestion_report_on_the_fourth_placement() {
    let mut s = placement4_session();
    let turns = s.report_congestion((2, 3)).unwrap();
    let actors: Vec<Actor> = turns.iter().map(|t| t.actor).collect();
    assert_eq!(actors, [Actor::Manager, Actor::Uatm, Actor::UatmNetwork]);
    let reply = &turns[1];
    assert_eq!(reply.triggered_query.as_deref(), Some("query04"));
    let Some(Outcome::Detour(d)) = &reply.outcome else {
        panic!("{reply:?}")
    };
    let rerouted: BTreeSet<i64> = d.route_changes.iter().map(|&(a, _)| a).collect();
    assert_eq!(rerouted, (1..=6).collect());
    let relayed: BTreeSet<i64> = rerouted.intersection(&d.uncovered).copied().collect();
    assert_eq!(relayed, [4, 6].into_iter().collect());
    assert!(reply.utterance.contains("Relayed via UATM Network: 4, 6."));
    assert!(turns[2].utterance.contains("4, 6"));
    assert_eq!(s.history(), turns.as_slice());
}

#[test]
fn agents_follow_the_detour() {
    let mut s = placement4_session();
    s.report_congestion((2, 3)).unwrap();
    let agents = &s.latest().agents;
    assert_eq!(agents.len(), 6);
    let via7: BTreeSet<(i64, i64)> = [(1, 2), (2, 7), (7, 3)].into_iter().collect();
    for a in agents {
        let step2 = a.plans.iter().find(|p| p.step == 2).unwrap();
        assert_eq!(step2.edges, via7, "agent {}", a.agent);
    }
    assert!(s.latest().validation.as_ref().unwrap().passed());
}

#[test]
fn clearing_behind_agent_7() {
    let mut s = Session::new("query05", &[]).unwrap();
    let turns = s.clear_corridor((2, 3), 7).unwrap();
    let Some(Outcome::RoundTrip(o)) = &turns[1].outcome else {
        panic!("{turns:?}")
    };
    let routed: BTreeSet<i64> = o.round_routes.iter().map(|&(a, _, _)| a).collect();
    assert_eq!(routed, (8..=12).collect());
    assert!(turns[1].utterance.contains("agents 8, 9, 10, 11, 12"));
    assert!(turns[1]
        .utterance
        .contains("Relayed via UATM Network: 9, 10, 11, 12."));
}

#[test]
fn failed_actions_leave_an_error_turn() {
    let mut s = placement4_session();
    assert_eq!(
        s.report_congestion((9, 9)),
        Err(ActionError::UnknownCorridor((9, 9)))
    );
    assert!(matches!(
        s.report_congestion((2, 7)),
        Err(ActionError::UnsupportedCorridor { .. })
    ));
    assert_eq!(
        s.clear_corridor((2, 3), 8),
        Err(ActionError::UnsupportedLeader(8))
    );
    let h = s.history();
    assert_eq!(h.len(), 6);
    assert!(h[1].utterance.starts_with("error: corridor (9, 9)"));
    assert!(h.iter().all(|t| t.outcome.is_none()));
}

#[test]
fn every_request_gets_one_reply() {
    let mut s = placement4_session();
    for line in [
        "report congestion 2 3",
        "report congestion 9 9",
        "clear corridor 2 3 behind 7",
        "network",
        "clear corridor 2 3 behind 5",
        "report congestion 2 3",
    ] {
        repl_dispatch(line, &mut s);
    }
    let h = s.history();
    assert_eq!(h.iter().filter(|t| t.actor == Actor::Manager).count(), 5);
    for (i, t) in h.iter().enumerate() {
        if t.actor == Actor::Manager {
            assert_eq!(h[i + 1].actor, Actor::Uatm);
            assert!(h.get(i + 2).is_none_or(|n| n.actor != Actor::Uatm));
        }
    }
}

#[test]
fn replaying_the_commands_reproduces_the_turns() {
    let commands = [
        "agents",
        "report congestion 2 3",
        "model",
        "report congestion 3 2",
        "session query05",
        "clear corridor 2 3 behind 7",
        "history",
    ];
    let play = || {
        let mut s = placement4_session();
        let outputs: Vec<String> = commands
            .iter()
            .map(|c| repl_dispatch(c, &mut s).output)
            .collect();
        (outputs, s.history().to_vec())
    };
    let (a, ha) = play();
    let (b, hb) = play();
    assert_eq!(a, b);
    assert_eq!(ha, hb);
    // The session switch starts a fresh log.
    assert_eq!(ha.len(), 3);
}

#[test]
fn network_text() {
    let s = placement4_session();
    let text = render_network(s.network());
    assert!(text.contains(
        "corridor (1, 2): waypoints 1..20\n  uatm1: 1..15\n  uatm2: 7..20\n  uncovered: -\n"
    ));
    assert!(text.contains(
        "corridor (2, 7): waypoints 1..22\n  uatm2: 1..7\n  uatm3: 20..22\n  uncovered: 8..19\n"
    ));
    let mut s = s;
    assert_eq!(repl_dispatch("network", &mut s).output, text);
    assert!(repl_dispatch("agents", &mut s)
        .output
        .contains("agent 4 at (1, 2):18"));
}

#[test]
fn bad_session_command_keeps_the_session() {
    let mut s = placement4_session();
    let d = repl_dispatch("session query04 1=1-2:1", &mut s);
    assert!(
        d.output.starts_with("error: pins name agents [1]"),
        "{}",
        d.output
    );
    assert_eq!(s.scenario().pins.len(), 6);
    let d = repl_dispatch("report congestion two three", &mut s);
    assert!(d.output.starts_with("usage: report congestion U V"));
}
