//! Text layout of solver results, modelled on the usual ASP front-end
//! output: banner, input, one `Answer:` block per model, status, stats.

use std::fmt::Write as _;
use std::time::Duration;

use uatm_asp::solve::{SolveResult, Status};

pub const BANNER: &str = concat!("uatm-asp version ", env!("CARGO_PKG_VERSION"));

/// What the stats block needs beyond the solve result itself.
#[derive(Debug, Clone, Default)]
pub struct RunInfo {
    /// First input file, as given on the command line.
    pub source: String,
    /// Wall time from reading the input to the end of the search.
    pub total: Duration,
    /// Process CPU time spent over the same span.
    pub cpu: Duration,
}

/// Model count as printed: a `+` marks an enumeration cut off by the model
/// bound.
pub fn model_count(r: &SolveResult) -> String {
    if r.stats.exhausted {
        r.models.len().to_string()
    } else {
        format!("{}+", r.models.len())
    }
}

fn secs(d: Duration, places: usize) -> String {
    format!("{:.*}s", places, d.as_secs_f64())
}

/// Renders `r` in the familiar layout. Only the `Time` and `CPU Time` lines
/// depend on anything but the inputs.
pub fn format_result(r: &SolveResult, info: &RunInfo) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{BANNER}");
    let _ = writeln!(out, "Reading from {} ...", info.source);
    let _ = writeln!(out, "Solving...");
    for (i, m) in r.models.iter().enumerate() {
        let _ = writeln!(out, "Answer: {}", i + 1);
        let atoms: Vec<String> = m.projected.iter().map(ToString::to_string).collect();
        let _ = writeln!(out, "{}", atoms.join(" "));
    }
    let _ = writeln!(out, "{}", r.status);
    let _ = writeln!(out);
    let s = &r.stats;
    let first = s.first_model.unwrap_or_default();
    // Time spent after the last model proving there are no more.
    let unsat = if s.exhausted {
        s.elapsed.saturating_sub(s.last_model.unwrap_or_default())
    } else {
        Duration::ZERO
    };
    let _ = writeln!(out, "Models       : {}", model_count(r));
    let _ = writeln!(out, "Calls        : 1");
    let _ = writeln!(
        out,
        "Time         : {} (Solving: {} 1st Model: {} Unsat: {})",
        secs(info.total, 3),
        secs(s.elapsed, 2),
        secs(first, 2),
        secs(unsat, 2)
    );
    let _ = writeln!(out, "CPU Time     : {}", secs(info.cpu, 3));
    out
}

/// Replaces the measured parts of [`format_result`] output so two runs can
/// be compared byte for byte.
pub fn mask_times(text: &str) -> String {
    text.lines()
        .map(|l| {
            if l.starts_with("Time ") {
                "Time         : <masked>"
            } else if l.starts_with("CPU Time ") {
                "CPU Time     : <masked>"
            } else {
                l
            }
        })
        .fold(String::new(), |mut acc, l| {
            acc.push_str(l);
            acc.push('\n');
            acc
        })
}

/// CPU time consumed by this process so far.
pub fn process_cpu_time() -> Duration {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    // SAFETY: `ts` is a valid, writable timespec.
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_PROCESS_CPUTIME_ID, &mut ts) };
    if rc != 0 {
        return Duration::ZERO;
    }
    Duration::new(ts.tv_sec as u64, ts.tv_nsec as u32)
}

/// Exit status for a finished solve.
pub fn exit_code(status: Status) -> i32 {
    match status {
        Status::Satisfiable => 10,
        Status::Unsatisfiable => 20,
    }
}
