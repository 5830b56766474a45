use std::io::{self, BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;
use uatm_asp::ground::ground;
use uatm_asp::solve::{solve, SolveOptions};
use uatm_asp::syntax::{parse_program, Program};
use uatm_asp::uatm::{
    builtin_scenario, extract_outcome, parse_pins, pin_locations, pin_program, run_query,
    validate_answer_set, Outcome, ValidationReport,
};
use uatm_cli::api::SCHEMA_VERSION;
use uatm_cli::dialogue::{repl_dispatch, Session};
use uatm_cli::format::{exit_code, format_result, model_count, process_cpu_time, RunInfo};

#[derive(Parser)]
#[command(
    name = "uatm-asp",
    version,
    about = "Answer set solving for UAM detour management"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the concatenation of logic program files.
    Solve {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Number of models to compute; 0 for all.
        #[arg(short = 'n', long = "models", default_value_t = 1)]
        models: usize,
        /// Fix an agent's placement, as AGENT=U-V:WAYPOINT. Repeatable.
        #[arg(long = "pin")]
        pins: Vec<String>,
        /// Print the ground program instead of solving.
        #[arg(long)]
        dump_ground: bool,
    },
    /// Built-in scenarios.
    Scenario {
        #[command(subcommand)]
        command: ScenarioCommand,
    },
    /// Interactive manager/UATM dialogue.
    Repl {
        /// Scenario the session starts from.
        #[arg(long, default_value = "query04")]
        scenario: String,
        /// Fix an agent's placement, as AGENT=U-V:WAYPOINT. Repeatable.
        #[arg(long = "pin")]
        pins: Vec<String>,
    },
    /// Serve the JSON API for the operator console.
    Serve {
        /// Port to listen on, on all interfaces.
        #[arg(long, env = "UATM_ASP_PORT", default_value_t = 8080)]
        port: u16,
    },
}

#[derive(Subcommand)]
enum ScenarioCommand {
    /// Run query01..query05 and report its typed outcome.
    Run {
        name: String,
        /// Fix an agent's placement, as AGENT=U-V:WAYPOINT. Repeatable.
        #[arg(long = "pin")]
        pins: Vec<String>,
        /// Check every model with the independent validator.
        #[arg(long)]
        validate: bool,
        /// Print one JSON document instead of the text report.
        #[arg(long)]
        json: bool,
        /// Number of models to compute; 0 for all.
        #[arg(short = 'n', long, default_value_t = 1)]
        models: usize,
    },
    /// List the built-in scenarios.
    List,
}

fn read_programs(files: &[PathBuf]) -> Result<Program> {
    let mut parts = Vec::new();
    for f in files {
        let text =
            std::fs::read_to_string(f).with_context(|| format!("cannot read {}", f.display()))?;
        let p = parse_program(&text).with_context(|| format!("{}", f.display()))?;
        parts.push(p);
    }
    Ok(Program::concat(parts.iter()))
}

fn cmd_solve(files: &[PathBuf], models: usize, pins: &[String], dump: bool) -> Result<i32> {
    let start = Instant::now();
    let cpu = process_cpu_time();
    let mut program = read_programs(files)?;
    if !pins.is_empty() {
        program = pin_program(&program, &parse_pins(pins)?)?;
    }
    let g = ground(&program)?;
    if dump {
        print!("{}", g.dump());
        return Ok(0);
    }
    let opts = SolveOptions {
        max_models: models,
        ..SolveOptions::default()
    };
    let r = solve(&g, &opts)?;
    let info = RunInfo {
        source: files[0].display().to_string(),
        total: start.elapsed(),
        cpu: process_cpu_time().saturating_sub(cpu),
    };
    print!("{}", format_result(&r, &info));
    Ok(exit_code(r.status))
}

fn ids(v: impl IntoIterator<Item = i64>) -> String {
    ids_text(v.into_iter().map(|a| a.to_string()))
}

fn outcome_lines(o: &Outcome) -> Vec<String> {
    let pairs = |s: &std::collections::BTreeSet<(i64, i64)>| {
        ids_text(s.iter().map(|(a, t)| format!("{a}@{t}")))
    };
    let triples = |s: &std::collections::BTreeSet<(i64, i64, i64)>| {
        ids_text(s.iter().map(|(a, v, t)| format!("{a}->vp{v}@{t}")))
    };
    match o {
        Outcome::Detour(d) => vec![
            format!("covered: {}", ids(d.covered.iter().copied())),
            format!("uncovered: {}", ids(d.uncovered.iter().copied())),
            format!("detour requests: {}", pairs(&d.detour_requests)),
            format!("route changes: {}", pairs(&d.route_changes)),
        ],
        Outcome::RoundTrip(r) => vec![
            format!("ahead: {}", ids(r.ahead.iter().copied())),
            format!(
                "covered by uatm2: {}",
                ids(r.covered_by_uatm2.iter().copied())
            ),
            format!(
                "covered by other: {}",
                ids(r.covered_by_other.iter().copied())
            ),
            format!("round requests: {}", triples(&r.round_requests)),
            format!("round routes: {}", triples(&r.round_routes)),
        ],
    }
}

fn ids_text(items: impl Iterator<Item = String>) -> String {
    let v: Vec<String> = items.collect();
    if v.is_empty() {
        "none".into()
    } else {
        v.join(", ")
    }
}

fn verdict(v: &ValidationReport) -> String {
    if v.passed() {
        return "pass".into();
    }
    let failed: Vec<String> = [
        ("rule satisfaction", &v.rule_satisfaction),
        ("stability", &v.stability),
        ("reachability", &v.reachability),
    ]
    .into_iter()
    .filter(|(_, c)| !c.passed)
    .map(|(n, c)| format!("{n}: {}", c.detail.as_deref().unwrap_or("failed")))
    .collect();
    format!("FAIL ({})", failed.join("; "))
}

fn cmd_scenario_run(
    name: &str,
    pins: &[String],
    validate: bool,
    as_json: bool,
    models: usize,
) -> Result<i32> {
    let s = pin_locations(&builtin_scenario(name)?, &parse_pins(pins)?)?;
    let run = run_query(
        &s,
        &SolveOptions {
            max_models: models,
            ..SolveOptions::default()
        },
    )?;
    let r = &run.result;
    let reports: Vec<Option<ValidationReport>> = r
        .models
        .iter()
        .enumerate()
        .map(|(i, m)| validate.then(|| validate_answer_set(&run.program, m, i)))
        .collect();
    if as_json {
        let ms: Vec<_> = r
            .models
            .iter()
            .zip(&reports)
            .map(|(m, v)| {
                json!({
                    "atoms": m.projected.iter().map(ToString::to_string).collect::<Vec<_>>(),
                    "outcome": extract_outcome(&s, &run.program, m),
                    "validation": v,
                })
            })
            .collect();
        let out = json!({
            "schema_version": SCHEMA_VERSION,
            "scenario": s.name,
            "pins": s.pins.iter().map(ToString::to_string).collect::<Vec<_>>(),
            "status": r.status,
            "models_found": model_count(r),
            "exhausted": r.stats.exhausted,
            "models": ms,
        });
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        println!(
            "scenario {}: env_info.lp + {} + {}.lp",
            s.name,
            s.agents_file(),
            s.name
        );
        if !s.pins.is_empty() {
            let p: Vec<String> = s.pins.iter().map(ToString::to_string).collect();
            println!("pins: {}", p.join(" "));
        }
        for (i, (m, v)) in r.models.iter().zip(&reports).enumerate() {
            println!("Answer: {}", i + 1);
            let atoms: Vec<String> = m.projected.iter().map(ToString::to_string).collect();
            println!("{}", atoms.join(" "));
            for l in outcome_lines(&extract_outcome(&s, &run.program, m)) {
                println!("  {l}");
            }
            if let Some(v) = v {
                println!("  validation: {}", verdict(v));
            }
        }
        println!("{}", r.status);
        println!("Models       : {}", model_count(r));
    }
    if reports.iter().flatten().any(|v| !v.passed()) {
        bail!("validation failed");
    }
    Ok(exit_code(r.status))
}

fn cmd_repl(scenario: &str, pins: &[String]) -> Result<i32> {
    let mut session = Session::new(scenario, &parse_pins(pins)?)?;
    let stdin = io::stdin();
    let mut out = io::stdout();
    writeln!(out, "session on {scenario}; type `help` for commands")?;
    loop {
        write!(out, "> ")?;
        out.flush()?;
        let mut line = String::new();
        if stdin.lock().read_line(&mut line)? == 0 {
            break;
        }
        let d = repl_dispatch(&line, &mut session);
        write!(out, "{}", d.output)?;
        if d.quit {
            break;
        }
    }
    Ok(0)
}

fn cmd_serve(port: u16) -> Result<i32> {
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(uatm_cli::api::serve(port))
        .with_context(|| format!("cannot serve on port {port}"))?;
    Ok(0)
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Solve {
            files,
            models,
            pins,
            dump_ground,
        } => cmd_solve(&files, models, &pins, dump_ground),
        Command::Scenario { command } => match command {
            ScenarioCommand::Run {
                name,
                pins,
                validate,
                json,
                models,
            } => cmd_scenario_run(&name, &pins, validate, json, models),
            ScenarioCommand::List => {
                for name in uatm_asp::uatm::SCENARIO_NAMES {
                    let s = builtin_scenario(name)?;
                    println!("{name}  env_info.lp + {} + {name}.lp", s.agents_file());
                }
                Ok(0)
            }
        },
        Command::Repl { scenario, pins } => cmd_repl(&scenario, &pins),
        Command::Serve { port } => cmd_serve(port),
    }
}

fn main() -> ExitCode {
    // Die quietly on a closed pipe (`uatm-asp ... | head`) like other tools.
    // SAFETY: called before any other thread exists.
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
