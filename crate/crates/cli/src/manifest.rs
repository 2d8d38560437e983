//! Run manifests: a flat `key=value` record of one invocation.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Duration;

use rtmc_core::{Config, SearchStats};

#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub config_path: PathBuf,
    pub config: Config,
    pub property: Option<String>,
    pub formula: Option<String>,
    pub max_depth: usize,
    pub max_states: Option<usize>,
    pub verdict: String,
    pub violation: Option<String>,
    pub stats: SearchStats,
    pub trace_out: Option<PathBuf>,
    pub coverage_out: Option<PathBuf>,
    pub exit_code: i32,
}

#[derive(Debug, PartialEq, Eq)]
pub struct ManifestError(pub String);

impl std::fmt::Display for ManifestError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "bad manifest: {}", self.0)
    }
}

impl std::error::Error for ManifestError {}

const NONE: &str = "-";

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or(NONE.to_string(), T::to_string)
}

fn path(v: &Option<PathBuf>) -> String {
    v.as_ref()
        .map_or(NONE.to_string(), |p| p.display().to_string())
}

impl RunManifest {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "command={}", self.command).unwrap();
        writeln!(out, "config_path={}", self.config_path.display()).unwrap();
        for line in self.config.to_kv().lines() {
            writeln!(out, "config.{line}").unwrap();
        }
        writeln!(out, "property={}", opt(&self.property)).unwrap();
        writeln!(out, "formula={}", opt(&self.formula)).unwrap();
        writeln!(out, "limit.max_depth={}", self.max_depth).unwrap();
        writeln!(out, "limit.max_states={}", opt(&self.max_states)).unwrap();
        writeln!(out, "verdict={}", self.verdict).unwrap();
        writeln!(out, "violation={}", opt(&self.violation)).unwrap();
        for line in self.stats.to_kv().lines() {
            writeln!(out, "stats.{line}").unwrap();
        }
        writeln!(out, "trace_out={}", path(&self.trace_out)).unwrap();
        writeln!(out, "coverage_out={}", path(&self.coverage_out)).unwrap();
        writeln!(out, "exit_code={}", self.exit_code).unwrap();
        out
    }

    pub fn parse(text: &str) -> Result<RunManifest, ManifestError> {
        let mut fields = std::collections::BTreeMap::new();
        let mut config_kv = String::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ManifestError(format!("line without `=`: {line:?}")))?;
            if let Some(key) = k.strip_prefix("config.") {
                writeln!(config_kv, "{key}={v}").unwrap();
            } else if fields.insert(k.to_string(), v.to_string()).is_some() {
                return Err(ManifestError(format!("duplicate key `{k}`")));
            }
        }
        let mut take = |k: &str| {
            fields
                .remove(k)
                .ok_or_else(|| ManifestError(format!("missing `{k}`")))
        };
        fn num<T: std::str::FromStr>(k: &str, v: &str) -> Result<T, ManifestError> {
            v.parse()
                .map_err(|_| ManifestError(format!("bad value for `{k}`")))
        }
        let some = |v: String| if v == NONE { None } else { Some(v) };
        let config = Config::parse(&config_kv).map_err(|e| ManifestError(e.to_string()))?;
        let m = RunManifest {
            command: take("command")?,
            config_path: take("config_path")?.into(),
            config,
            property: some(take("property")?),
            formula: some(take("formula")?),
            max_depth: num("limit.max_depth", &take("limit.max_depth")?)?,
            max_states: some(take("limit.max_states")?)
                .map(|v| num("limit.max_states", &v))
                .transpose()?,
            verdict: take("verdict")?,
            violation: some(take("violation")?),
            stats: SearchStats {
                states_stored: num("stats.states_stored", &take("stats.states_stored")?)?,
                transitions_fired: num(
                    "stats.transitions_fired",
                    &take("stats.transitions_fired")?,
                )?,
                max_depth: num("stats.max_depth", &take("stats.max_depth")?)?,
                elapsed: Duration::from_millis(num(
                    "stats.elapsed_ms",
                    &take("stats.elapsed_ms")?,
                )?),
                memory_estimate: num("stats.memory_bytes", &take("stats.memory_bytes")?)?,
            },
            trace_out: some(take("trace_out")?).map(PathBuf::from),
            coverage_out: some(take("coverage_out")?).map(PathBuf::from),
            exit_code: num("exit_code", &take("exit_code")?)?,
        };
        if let Some(k) = fields.keys().next() {
            return Err(ManifestError(format!("unknown key `{k}`")));
        }
        Ok(m)
    }
}
