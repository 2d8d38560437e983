//! Batch front end for the kernel model checker.
//!
//! Exit codes: 0 pass, 1 violation or counterexample lasso, 2 incomplete
//! search (depth or state limit), 3 bad input.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rtmc_core::coverage::CoverageReport;
use rtmc_core::explorer::{
    dfs_safety, format_trace, reconstruct_trace, state_digest, Limits, SearchStats, Verdict,
};
use rtmc_core::ltl::{lasso_trace, verify_ltl, PropertySet};
use rtmc_core::{Config, KernelModel, Mutation};

pub mod manifest;

pub use manifest::RunManifest;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_INCOMPLETE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "rtmc",
    version,
    about = "Model checker for a preemptive ARMv7-M RTOS kernel model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exhaustive search for safety assertion violations.
    VerifySafety(Common),
    /// Nested-DFS search for a run violating an LTL property.
    VerifyLtl {
        #[command(flatten)]
        common: Common,
        /// Property name.
        #[arg(long)]
        prop: String,
        /// Property file (`name: formula` per line); defaults to the shipped properties.
        #[arg(long)]
        props_file: Option<PathBuf>,
    },
    /// Exhaustive search, then write the statement coverage report.
    Coverage(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Configuration file (`key = value` lines).
    config: PathBuf,
    /// Maximum search depth; overrides `max_depth` in the config.
    #[arg(long)]
    max_depth: Option<usize>,
    /// Stop with a resource error after storing this many states.
    #[arg(long)]
    max_states: Option<usize>,
    /// Where to write a counterexample (default: `<config>.trace`).
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Where to write the coverage report (`coverage` defaults to `<config>.coverage`).
    #[arg(long)]
    coverage_out: Option<PathBuf>,
    /// Format of the statistics printed on stderr.
    #[arg(long, value_enum, default_value_t = StatsFormat::Text)]
    stats: StatsFormat,
    /// Model mutation: none, drop-lock or drop-signal; overrides `mutate` in the config.
    #[arg(long)]
    mutate: Option<Mutation>,
    /// Also write the run manifest to this file.
    #[arg(long)]
    manifest_out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum StatsFormat {
    Text,
    Kv,
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Failure {
        Failure(e.to_string())
    }
}

fn with_suffix(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure(format!("cannot write {}: {e}", path.display())))
}

fn verdict_exit<P>(v: &Verdict<P>) -> i32 {
    match v {
        Verdict::Pass => EXIT_PASS,
        Verdict::Violation { .. } | Verdict::AcceptanceCycle { .. } => EXIT_VIOLATION,
        Verdict::Incomplete(_) => EXIT_INCOMPLETE,
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit code. The manifest goes to `out`, diagnostics and
/// statistics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() {
                EXIT_INPUT
            } else {
                EXIT_PASS
            };
        }
    };
    match execute(cli, out, err) {
        Ok(code) => code,
        Err(Failure(msg)) => {
            let _ = writeln!(err, "rtmc: {msg}");
            EXIT_INPUT
        }
    }
}

struct Prepared {
    model: KernelModel,
    limits: Limits,
}

fn prepare(c: &Common) -> Result<Prepared, Failure> {
    let text = fs::read_to_string(&c.config)
        .map_err(|e| Failure(format!("cannot read {}: {e}", c.config.display())))?;
    let mut cfg =
        Config::parse(&text).map_err(|e| Failure(format!("{}: {e}", c.config.display())))?;
    if let Some(m) = c.mutate {
        cfg.mutation = m;
    }
    if let Some(d) = c.max_depth {
        cfg.max_depth = d;
    }
    let limits = Limits {
        max_depth: cfg.max_depth,
        max_states: c.max_states,
    };
    let model =
        KernelModel::new(cfg).map_err(|e| Failure(format!("{}: {e}", c.config.display())))?;
    Ok(Prepared { model, limits })
}

fn manifest(
    command: &str,
    c: &Common,
    p: &Prepared,
    verdict: String,
    stats: SearchStats,
) -> RunManifest {
    RunManifest {
        command: command.into(),
        config_path: c.config.clone(),
        config: p.model.config().clone(),
        property: None,
        formula: None,
        max_depth: p.limits.max_depth,
        max_states: p.limits.max_states,
        verdict,
        violation: None,
        stats,
        trace_out: None,
        coverage_out: None,
        exit_code: 0,
    }
}

fn emit(
    m: &RunManifest,
    c: &Common,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    let text = m.to_text();
    out.write_all(text.as_bytes())?;
    if let Some(p) = &c.manifest_out {
        write_file(p, &text)?;
    }
    match c.stats {
        StatsFormat::Text => err.write_all(m.stats.to_text().as_bytes())?,
        StatsFormat::Kv => err.write_all(m.stats.to_kv().as_bytes())?,
    }
    Ok(m.exit_code)
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    match cli.command {
        Command::VerifySafety(c) => safety("verify-safety", &c, false, out, err),
        Command::Coverage(c) => safety("coverage", &c, true, out, err),
        Command::VerifyLtl {
            common,
            prop,
            props_file,
        } => ltl(&common, &prop, props_file.as_deref(), out, err),
    }
}

fn safety(
    command: &str,
    c: &Common,
    coverage_default: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    let p = prepare(c)?;
    let outcome = dfs_safety(&p.model, &p.limits);
    let mut m = manifest(command, c, &p, outcome.verdict.name().into(), outcome.stats);
    m.exit_code = verdict_exit(&outcome.verdict);
    if let Verdict::Violation { violation, path } = &outcome.verdict {
        let (steps, _) = reconstruct_trace(&p.model, path)?;
        let init = state_digest(&p.model, &p.model.initial_state());
        let mut text = format!("# violation: {violation}\n");
        text.push_str(&format_trace(init, &steps, None));
        let target = c
            .trace_out
            .clone()
            .unwrap_or_else(|| with_suffix(&c.config, ".trace"));
        write_file(&target, &text)?;
        writeln!(
            err,
            "violation: {violation} ({} steps, trace in {})",
            steps.len(),
            target.display()
        )?;
        m.violation = Some(violation.check.name().into());
        m.trace_out = Some(target);
    }
    let cov_target = match (&c.coverage_out, coverage_default) {
        (Some(p), _) => Some(p.clone()),
        (None, true) => Some(with_suffix(&c.config, ".coverage")),
        (None, false) => None,
    };
    if let Some(target) = cov_target {
        let report = CoverageReport::new(&p.model, &outcome.coverage);
        write_file(&target, &report.render())?;
        m.coverage_out = Some(target);
    }
    if let Verdict::Incomplete(_) = outcome.verdict {
        writeln!(
            err,
            "warning: search incomplete ({})",
            outcome.verdict.name()
        )?;
    }
    emit(&m, c, out, err)
}

fn ltl(
    c: &Common,
    prop: &str,
    props_file: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    let set = match props_file {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure(format!("cannot read {}: {e}", path.display())))?;
            PropertySet::parse(&text).map_err(|e| Failure(format!("{}: {e}", path.display())))?
        }
        None => PropertySet::defaults(),
    };
    let property = set.get(prop)?.clone();
    let p = prepare(c)?;
    let outcome = verify_ltl(&p.model, &property.formula, &p.limits)?;
    let mut m = manifest(
        "verify-ltl",
        c,
        &p,
        outcome.verdict.name().into(),
        outcome.stats,
    );
    m.property = Some(property.name.clone());
    m.formula = Some(property.text.clone());
    m.exit_code = verdict_exit(&outcome.verdict);
    if let Verdict::AcceptanceCycle { prefix, cycle } = &outcome.verdict {
        let (steps, cycle_at) = lasso_trace(&p.model, prefix, cycle)?;
        let init = state_digest(&p.model, &p.model.initial_state());
        let mut text = format!(
            "# property {}: {}\n# counterexample lasso\n",
            property.name, property.text
        );
        text.push_str(&format_trace(init, &steps, Some(cycle_at)));
        let target = c
            .trace_out
            .clone()
            .unwrap_or_else(|| with_suffix(&c.config, ".trace"));
        write_file(&target, &text)?;
        writeln!(
            err,
            "counterexample: prefix {} steps, cycle {} steps, trace in {}",
            cycle_at,
            steps.len() - cycle_at,
            target.display()
        )?;
        m.trace_out = Some(target);
    }
    if let Verdict::Incomplete(_) = outcome.verdict {
        writeln!(
            err,
            "warning: search incomplete ({})",
            outcome.verdict.name()
        )?;
    }
    emit(&m, c, out, err)
}
