//! Properties of the scenarios with free agent placement.

use std::collections::{BTreeMap, BTreeSet};

use uatm_asp::ground::GroundAtom;
use uatm_asp::solve::SolveOptions;
use uatm_asp::syntax::parse_program;
use uatm_asp::uatm::*;

fn ints(a: &GroundAtom, pred: &str) -> Option<Vec<i64>> {
    (a.predicate.as_ref() == pred).then(|| a.int_args().unwrap())
}

fn locs<'a>(atoms: impl Iterator<Item = &'a GroundAtom>) -> BTreeMap<i64, Vec<i64>> {
    let mut out: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
    for a in atoms {
        if let Some(v) = ints(a, "loc") {
            out.entry(v[0]).or_default().push(v[4]);
        }
    }
    out
}

#[test]
fn placements_respect_choice_bounds() {
    for name in ["query01", "query02", "query03", "query04"] {
        let s = builtin_scenario(name).unwrap();
        let run = run_query(&s, &SolveOptions::models(100)).unwrap();
        assert_eq!(run.result.models.len(), 100, "{name}");
        for m in &run.result.models {
            let l = locs(m.symbols(&run.program));
            assert_eq!(
                l.keys().copied().collect::<Vec<_>>(),
                (1..=6).collect::<Vec<_>>()
            );
            assert!(l.values().all(|w| w.len() == 1));
            let wps: BTreeSet<i64> = l.values().map(|w| w[0]).collect();
            assert_eq!(wps.len(), 6);
        }
    }
}

#[test]
fn requested_detours_always_change_route() {
    for name in ["query02", "query04"] {
        let s = builtin_scenario(name).unwrap();
        let run = run_query(&s, &SolveOptions::models(100)).unwrap();
        for m in &run.result.models {
            let atoms: BTreeSet<&GroundAtom> = m.symbols(&run.program).collect();
            for a in &atoms {
                if let Some(v) = ints(a, "detour_request") {
                    let change = GroundAtom::ints("change_route", &[v[0], v[1]]);
                    assert!(atoms.contains(&change), "{name}: {a} without {change}");
                }
            }
        }
    }
}

#[test]
fn every_agent_is_rerouted_in_query04() {
    let s = builtin_scenario("query04").unwrap();
    let run = run_query(&s, &SolveOptions::models(100)).unwrap();
    let detour: BTreeSet<(i64, i64)> = [(1, 2), (2, 7), (7, 3)].into_iter().collect();
    for m in &run.result.models {
        let mut plan2: BTreeMap<i64, BTreeSet<(i64, i64)>> = BTreeMap::new();
        let mut requests = BTreeSet::new();
        let mut covered = BTreeSet::new();
        let mut uncovered = BTreeSet::new();
        for a in m.symbols(&run.program) {
            if let Some(v) = ints(a, "plan") {
                if v[1] == 2 {
                    plan2.entry(v[0]).or_default().insert((v[2], v[3]));
                }
            } else if let Some(v) = ints(a, "detour_request") {
                requests.insert((v[0], v[1]));
            } else if let Some(v) = ints(a, "covered_by_uatm1") {
                covered.insert(v[0]);
            } else if let Some(v) = ints(a, "uncovered_by_uatm1") {
                uncovered.insert(v[0]);
            }
        }
        for agent in 1..=6 {
            assert!(requests.contains(&(agent, 2)));
            assert_eq!(plan2[&agent], detour);
        }
        assert!(covered.is_disjoint(&uncovered));
    }
}

/// Placements of agents 1..=3 on waypoints 1..=20 of corridor (1, 2) that
/// satisfy the agents program's constraints, counted directly: distinct
/// waypoints, no zone holding every agent, and each zone non-empty.
fn three_agent_placements() -> BTreeSet<Vec<i64>> {
    let zone = |w: i64| match w {
        1..=6 => 0,
        7..=15 => 1,
        _ => 2,
    };
    let mut out = BTreeSet::new();
    for a in 1..=20 {
        for b in 1..=20 {
            for c in 1..=20 {
                if a == b || b == c || a == c {
                    continue;
                }
                let mut n = [0; 3];
                for w in [a, b, c] {
                    n[zone(w)] += 1;
                }
                if n.iter().all(|&k| k > 0 && k < 3) {
                    out.insert(vec![a, b, c]);
                }
            }
        }
    }
    out
}

#[test]
fn all_models_of_a_three_agent_variant() {
    let mut s = builtin_scenario("query01").unwrap();
    let agents = sources::AGENT_INFO1.replace("A <= 6", "A <= 3");
    assert_ne!(agents, sources::AGENT_INFO1);
    s.agents = parse_program(&agents).unwrap();
    let run = run_query(&s, &SolveOptions::all()).unwrap();
    assert!(run.result.stats.exhausted);
    let expected = three_agent_placements();
    assert_eq!(expected.len(), 1620);
    let found: BTreeSet<Vec<i64>> = run
        .result
        .models
        .iter()
        .map(|m| {
            locs(m.symbols(&run.program))
                .values()
                .map(|w| w[0])
                .collect()
        })
        .collect();
    assert_eq!(run.result.models.len(), found.len());
    assert_eq!(found, expected);
    let v = Validator::new(&run.program);
    for (i, m) in run.result.models.iter().enumerate() {
        assert!(v.validate(i, m.symbols(&run.program)).passed());
    }
}

#[test]
fn enumeration_is_deterministic() {
    let s = builtin_scenario("query02").unwrap();
    let a = run_query(&s, &SolveOptions::models(20)).unwrap();
    let b = run_query(&s, &SolveOptions::models(20)).unwrap();
    assert_eq!(a.program.dump(), b.program.dump());
    assert_eq!(a.result.models, b.result.models);
}
