use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use uatm_asp::solve::SolveOptions;
use uatm_asp::uatm::{builtin_scenario, extract_outcome, run_query};
use uatm_cli::format::mask_times;

fn programs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/programs")
}

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uatm-asp"))
        .args(args)
        .current_dir(programs())
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const PINS: [&[&str]; 4] = [
    &[
        "1=1-2:1", "2=1-2:11", "3=1-2:19", "4=1-2:16", "5=1-2:4", "6=1-2:2",
    ],
    &[
        "1=1-2:1", "3=1-2:3", "5=1-2:5", "2=1-2:10", "6=1-2:18", "4=1-2:19",
    ],
    &[
        "1=1-2:1", "2=1-2:8", "3=1-2:16", "4=1-2:2", "5=1-2:19", "6=1-2:17",
    ],
    &[
        "3=1-2:1", "5=1-2:5", "1=1-2:6", "2=1-2:9", "4=1-2:18", "6=1-2:19",
    ],
];

fn pinned_args(k: usize) -> Vec<String> {
    let (agents, query) = if k == 5 {
        ("agent_info2.lp", "query05.lp".to_string())
    } else {
        ("agent_info1.lp", format!("query0{k}.lp"))
    };
    let mut args: Vec<String> = vec!["solve".into(), "env_info.lp".into(), agents.into(), query];
    if k < 5 {
        for p in PINS[k - 1] {
            args.push("--pin".into());
            args.push(p.to_string());
        }
    }
    args
}

fn run_pinned(k: usize) -> Output {
    let args = pinned_args(k);
    bin(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

/// Golden comparison: banner skipped, times masked, answer lines compared
/// as atom sets.
fn assert_golden(actual: &str, golden: &str) {
    let a: Vec<&str> = actual.lines().collect();
    let g: Vec<&str> = golden.lines().collect();
    assert_eq!(a.len(), g.len(), "{actual}");
    assert!(a[0].starts_with("uatm-asp version "));
    for (i, (x, y)) in a.iter().zip(&g).enumerate().skip(1) {
        if i > 0 && g[i - 1].starts_with("Answer:") {
            let xs: BTreeSet<&str> = x.split_whitespace().collect();
            let ys: BTreeSet<&str> = y.split_whitespace().collect();
            assert_eq!(xs, ys, "line {i}");
        } else {
            assert_eq!(x, y, "line {i}");
        }
    }
}

#[test]
fn pinned_results_match_golden_files() {
    for k in 1..=5 {
        let out = run_pinned(k);
        assert_eq!(out.status.code(), Some(10), "query0{k}");
        let golden = std::fs::read_to_string(
            Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("tests/golden/query0{k}.txt")),
        )
        .unwrap();
        assert_golden(&mask_times(&stdout(&out)), &golden);
    }
}

/// The agents' placements are part of the round-trip model even though
/// query05 does not show `loc/5`.
#[test]
fn round_trip_placements_hold_in_the_model() {
    let expected = "covered_by_other(9) covered_by_other(10) covered_by_other(11) covered_by_other(12) \
        covered_by_uatm2(8) loc(7,2,2,3,2) loc(8,2,2,3,8) loc(9,2,2,3,9) loc(10,2,2,3,10) loc(11,2,2,3,11) \
        loc(12,2,2,3,12) round_request(9,3,3) round_request(10,3,3) round_request(11,3,3) round_request(12,3,3) \
        round_request(8,3,3) round_route(9,3,3) round_route(10,3,3) round_route(11,3,3) round_route(12,3,3) \
        round_route(8,3,3)";
    let run = run_query(&builtin_scenario("query05").unwrap(), &SolveOptions::all()).unwrap();
    let all: BTreeSet<String> = run.result.models[0]
        .symbols(&run.program)
        .map(ToString::to_string)
        .collect();
    for atom in expected.split_whitespace() {
        assert!(all.contains(atom), "{atom}");
    }
}

#[test]
fn unpinned_run_stops_at_the_bound() {
    let out = bin(&["solve", "env_info.lp", "agent_info1.lp", "query01.lp"]);
    assert_eq!(out.status.code(), Some(10));
    assert!(stdout(&out).contains("Models       : 1+\n"));
    let out = bin(&[
        "solve",
        "-n",
        "3",
        "env_info.lp",
        "agent_info1.lp",
        "query02.lp",
    ]);
    let text = stdout(&out);
    assert!(text.contains("Answer: 3\n") && !text.contains("Answer: 4"));
    assert!(text.contains("Models       : 3+\n"));
}

fn temp_file(name: &str, text: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("uatm-asp-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn trivial_program() {
    let p = temp_file("trivial.lp", "p.\n#show p/0.\n");
    let out = bin(&["solve", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(10));
    let text = stdout(&out);
    assert!(text.contains("Answer: 1\np\nSATISFIABLE\n"), "{text}");
}

#[test]
fn exit_codes() {
    assert_eq!(bin(&["--help"]).status.code(), Some(0));
    assert_eq!(bin(&["--version"]).status.code(), Some(0));
    assert_eq!(bin(&["solve", "--help"]).status.code(), Some(0));
    assert_eq!(bin(&[]).status.code(), Some(1));
    assert_eq!(bin(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(bin(&["solve", "no_such_file.lp"]).status.code(), Some(1));
    let unsat = temp_file("unsat.lp", "p. :- p.\n");
    let out = bin(&["solve", unsat.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(20));
    assert!(stdout(&out).contains("UNSATISFIABLE\n"));
    assert!(!stdout(&out).contains("Answer:"));
    assert_eq!(bin(&["scenario", "run", "query99"]).status.code(), Some(1));
    assert_eq!(bin(&["scenario", "list"]).status.code(), Some(0));
    let out = bin(&[
        "solve",
        "env_info.lp",
        "agent_info1.lp",
        "query01.lp",
        "--pin",
        "1=1-2",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn errors_name_file_and_position() {
    let bad = temp_file("bad.lp", "p(1).\nq(X) :- p(X\n");
    let out = bin(&["solve", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("bad.lp") && err.contains("at 2:12"), "{err}");
    let unsafe_rule = temp_file("unsafe.lp", "q(X) :- not p(X).\n");
    let out = bin(&["solve", unsafe_rule.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("X"), "{err}");
}

#[test]
fn dump_ground_prints_rules() {
    let p = temp_file("dump.lp", "a(1..2). b(X) :- a(X), not c(X). {c(1)}1.\n");
    let out = bin(&["solve", "--dump-ground", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("b(1):- not c(1)."), "{text}");
    assert!(text.contains("b(2)."), "{text}");
}

#[test]
fn scenario_report_lists_uncovered_agents() {
    let mut args = vec!["scenario", "run", "query03"];
    for p in PINS[2] {
        args.extend(["--pin", p]);
    }
    let out = bin(&args);
    assert_eq!(out.status.code(), Some(10));
    assert!(
        stdout(&out).contains("uncovered: 3, 5, 6\n"),
        "{}",
        stdout(&out)
    );
}

#[test]
fn unpinned_scenario_validates() {
    let out = bin(&["scenario", "run", "query01", "--validate", "-n", "20"]);
    assert_eq!(out.status.code(), Some(10));
    let text = stdout(&out);
    assert_eq!(text.matches("validation: pass").count(), 20);
    assert!(!text.contains("FAIL"));
}

#[test]
fn round_trip_as_json() {
    let out = bin(&["scenario", "run", "query05", "--json", "-n", "0"]);
    assert_eq!(out.status.code(), Some(10));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["models_found"], "1");
    let outcome = &v["models"][0]["outcome"];
    assert_eq!(outcome["kind"], "round_trip");
    assert_eq!(outcome["round_routes"].as_array().unwrap().len(), 5);
    let s = builtin_scenario("query05").unwrap();
    let run = run_query(&s, &SolveOptions::default()).unwrap();
    let expected =
        serde_json::to_value(extract_outcome(&s, &run.program, &run.result.models[0])).unwrap();
    assert_eq!(*outcome, expected);
}

#[test]
fn repl_over_stdin() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_uatm-asp"))
        .args(["repl", "--scenario", "query04"])
        .args(PINS[3].iter().flat_map(|p| ["--pin", p]))
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"report congestion 2 3\nreport congestion 9 9\nhistory\nquit\n")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("Rerouted agents 1, 2, 3, 4, 5, 6"), "{text}");
    assert!(text.contains("Relayed via UATM Network: 4, 6."), "{text}");
    assert!(
        text.contains("uatm: error: corridor (9, 9) is not in the network"),
        "{text}"
    );
}
