//! Exhaustive depth-first search with a visited store, counterexample
//! replay, statistics and statement coverage.

use std::fmt::{self, Write as _};
use std::hash::Hasher;
use std::time::{Duration, Instant};

use arrayvec::ArrayVec;
use rustc_hash::{FxHashSet, FxHasher};

use crate::check::{Check, Violation};
use crate::error::TraceError;

/// Result of firing one action.
#[derive(Clone, Debug)]
pub struct Step<S> {
    pub state: S,
    /// First check that failed while executing the action or in the
    /// resulting state.
    pub violation: Option<Violation>,
    /// Statement ordinals executed by the action (for coverage).
    pub covered: ArrayVec<u16, 8>,
}

impl<S> Step<S> {
    pub fn plain(state: S, stmt: u16) -> Step<S> {
        let mut covered = ArrayVec::new();
        covered.push(stmt);
        Step {
            state,
            violation: None,
            covered,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionInfo {
    pub owner: u8,
    pub stmt: u16,
    pub label: &'static str,
    pub text: String,
}

/// A finite-state system the search engines can explore.
pub trait TransitionSystem {
    type State: Clone;
    type Action: Copy + PartialEq + fmt::Debug;

    fn initial_state(&self) -> Self::State;
    /// Enabled actions in deterministic order.
    fn actions(&self, s: &Self::State, out: &mut Vec<Self::Action>);
    fn step(&self, s: &Self::State, a: Self::Action) -> Step<Self::State>;
    /// Canonical encoding; equal states must give equal bytes.
    fn encode(&self, s: &Self::State, out: &mut Vec<u8>);
    fn describe(&self, a: Self::Action) -> ActionInfo;
    fn statement_count(&self) -> usize;
    /// Whether a state without enabled actions is a safety violation.
    fn deadlock_is_violation(&self) -> bool {
        true
    }
}

/// Named state predicates for the LTL layer.
pub trait Propositions: TransitionSystem {
    fn prop_index(&self, name: &str) -> Option<usize>;
    fn eval_prop(&self, s: &Self::State, index: usize) -> bool;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub max_depth: usize,
    /// Stop with a resource error after storing this many states.
    pub max_states: Option<usize>,
}

impl Limits {
    pub fn depth(max_depth: usize) -> Limits {
        Limits {
            max_depth,
            max_states: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Incomplete {
    /// Some path was cut at the depth limit.
    Depth,
    /// The state store limit was hit.
    States,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict<P> {
    Pass,
    /// Finite counterexample: the path leads to a state violating the check.
    Violation {
        violation: Violation,
        path: Vec<P>,
    },
    /// Infinite counterexample: `prefix` then `cycle` repeated forever.
    AcceptanceCycle {
        prefix: Vec<P>,
        cycle: Vec<P>,
    },
    Incomplete(Incomplete),
}

impl<P> Verdict<P> {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Violation { .. } => "violation",
            Verdict::AcceptanceCycle { .. } => "acceptance-cycle",
            Verdict::Incomplete(Incomplete::Depth) => "incomplete-depth",
            Verdict::Incomplete(Incomplete::States) => "incomplete-resource",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SearchStats {
    pub states_stored: u64,
    pub transitions_fired: u64,
    pub max_depth: u64,
    pub elapsed: Duration,
    pub memory_estimate: u64,
}

impl SearchStats {
    pub fn to_text(&self) -> String {
        format!(
            "states stored:     {}\ntransitions fired: {}\nmax depth:         {}\n\
             elapsed:           {:.3} s\nmemory estimate:   {:.1} MiB\n",
            self.states_stored,
            self.transitions_fired,
            self.max_depth,
            self.elapsed.as_secs_f64(),
            self.memory_estimate as f64 / (1024.0 * 1024.0)
        )
    }

    pub fn to_kv(&self) -> String {
        format!(
            "states_stored={}\ntransitions_fired={}\nmax_depth={}\nelapsed_ms={}\nmemory_bytes={}\n",
            self.states_stored,
            self.transitions_fired,
            self.max_depth,
            self.elapsed.as_millis(),
            self.memory_estimate
        )
    }
}

#[derive(Clone, Debug)]
pub struct SafetyOutcome<A> {
    pub verdict: Verdict<A>,
    pub stats: SearchStats,
    /// Fire count per statement ordinal.
    pub coverage: Vec<u64>,
}

struct Frame<S, A> {
    state: S,
    actions: Vec<A>,
    next: usize,
}

/// Per-entry overhead assumed for the hash set (control byte, fat pointer,
/// allocator header).
pub(crate) const STORE_OVERHEAD: u64 = 1 + 16 + 16;

/// Exhaustive DFS checking every state for violations.
pub fn dfs_safety<T: TransitionSystem>(ts: &T, limits: &Limits) -> SafetyOutcome<T::Action> {
    let start = Instant::now();
    let mut stats = SearchStats::default();
    let mut coverage = vec![0u64; ts.statement_count()];
    let mut visited: FxHashSet<Box<[u8]>> = FxHashSet::default();
    let mut key = Vec::new();
    let mut key_bytes = 0u64;

    let init = ts.initial_state();
    ts.encode(&init, &mut key);
    key_bytes += key.len() as u64;
    visited.insert(key.as_slice().into());
    let mut actions = Vec::new();
    ts.actions(&init, &mut actions);
    let mut stack = Vec::new();
    let mut truncated = false;
    let finish =
        |verdict, mut stats: SearchStats, visited: &FxHashSet<Box<[u8]>>, key_bytes, coverage| {
            stats.states_stored = visited.len() as u64;
            stats.elapsed = start.elapsed();
            stats.memory_estimate = key_bytes + visited.len() as u64 * STORE_OVERHEAD;
            SafetyOutcome {
                verdict,
                stats,
                coverage,
            }
        };
    if actions.is_empty() && ts.deadlock_is_violation() {
        let violation = Violation::new(Check::InvalidEndState, "no enabled transition");
        let verdict = Verdict::Violation {
            violation,
            path: Vec::new(),
        };
        return finish(verdict, stats, &visited, key_bytes, coverage);
    }
    stack.push(Frame {
        state: init,
        actions,
        next: 0,
    });

    while let Some(top) = stack.last_mut() {
        if top.next == top.actions.len() {
            stack.pop();
            continue;
        }
        let a = top.actions[top.next];
        top.next += 1;
        let step = ts.step(&top.state, a);
        stats.transitions_fired += 1;
        for &id in &step.covered {
            coverage[id as usize] += 1;
        }
        let depth = stack.len();
        if let Some(violation) = step.violation {
            let verdict = Verdict::Violation {
                violation,
                path: stack_path(&stack),
            };
            return finish(verdict, stats, &visited, key_bytes, coverage);
        }
        key.clear();
        ts.encode(&step.state, &mut key);
        if visited.contains(key.as_slice()) {
            continue;
        }
        if depth > limits.max_depth {
            truncated = true;
            continue;
        }
        if limits.max_states.is_some_and(|m| visited.len() >= m) {
            return finish(
                Verdict::Incomplete(Incomplete::States),
                stats,
                &visited,
                key_bytes,
                coverage,
            );
        }
        key_bytes += key.len() as u64;
        visited.insert(key.as_slice().into());
        let mut actions = Vec::new();
        ts.actions(&step.state, &mut actions);
        if actions.is_empty() && ts.deadlock_is_violation() {
            let violation = Violation::new(Check::InvalidEndState, "no enabled transition");
            let verdict = Verdict::Violation {
                violation,
                path: stack_path(&stack),
            };
            return finish(verdict, stats, &visited, key_bytes, coverage);
        }
        stats.max_depth = stats.max_depth.max(depth as u64);
        stack.push(Frame {
            state: step.state,
            actions,
            next: 0,
        });
    }
    let verdict = if truncated {
        Verdict::Incomplete(Incomplete::Depth)
    } else {
        Verdict::Pass
    };
    finish(verdict, stats, &visited, key_bytes, coverage)
}

/// Actions taken on the current DFS path, root first.
fn stack_path<S, A: Copy>(stack: &[Frame<S, A>]) -> Vec<A> {
    stack.iter().map(|f| f.actions[f.next - 1]).collect()
}

/// Stable 64-bit digest of an encoded state.
pub fn digest(bytes: &[u8]) -> u64 {
    let mut h = FxHasher::default();
    h.write(bytes);
    h.finish()
}

pub fn state_digest<T: TransitionSystem>(ts: &T, s: &T::State) -> u64 {
    let mut buf = Vec::new();
    ts.encode(s, &mut buf);
    digest(&buf)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStep {
    pub step: usize,
    pub owner: u8,
    pub stmt: u16,
    pub label: &'static str,
    pub text: String,
    /// Digest of the state reached by this step.
    pub digest: u64,
}

/// Replays `path` from the initial state, checking every action is enabled
/// where it is taken. Returns the steps and the final state.
pub fn reconstruct_trace<T: TransitionSystem>(
    ts: &T,
    path: &[T::Action],
) -> Result<(Vec<TraceStep>, T::State), TraceError> {
    replay_from(ts, ts.initial_state(), path, 0)
}

/// Replays `path` starting from `s`, numbering steps from `first + 1`.
pub fn replay_from<T: TransitionSystem>(
    ts: &T,
    mut s: T::State,
    path: &[T::Action],
    first: usize,
) -> Result<(Vec<TraceStep>, T::State), TraceError> {
    let mut steps = Vec::with_capacity(path.len());
    let mut enabled = Vec::new();
    for (i, &a) in path.iter().enumerate() {
        ts.actions(&s, &mut enabled);
        if !enabled.contains(&a) {
            return Err(TraceError::NotEnabled {
                step: first + i + 1,
            });
        }
        s = ts.step(&s, a).state;
        let info = ts.describe(a);
        steps.push(TraceStep {
            step: first + i + 1,
            owner: info.owner,
            stmt: info.stmt,
            label: info.label,
            text: info.text,
            digest: state_digest(ts, &s),
        });
    }
    Ok((steps, s))
}

/// Statement number of a stutter step (a state without successors
/// repeating in an infinite trace).
pub const STUTTER_STMT: u16 = u16::MAX;

/// Marker line separating a lasso's prefix from its cycle in trace files.
pub const CYCLE_MARKER: &str = "-- cycle --";

/// Renders a trace: one `step# pid stmt# label digest` line per step,
/// preceded by step 0 for the initial state. `cycle_at` inserts the cycle
/// marker before that many prefix steps have been printed.
pub fn format_trace(initial_digest: u64, steps: &[TraceStep], cycle_at: Option<usize>) -> String {
    let mut out = String::new();
    writeln!(out, "0 - - init {initial_digest:016x}").unwrap();
    for (i, st) in steps.iter().enumerate() {
        if cycle_at == Some(i) {
            writeln!(out, "{CYCLE_MARKER}").unwrap();
        }
        if st.stmt == STUTTER_STMT {
            writeln!(out, "{} - - {} {:016x}", st.step, st.label, st.digest).unwrap();
        } else {
            writeln!(
                out,
                "{} {} {} {} {:016x}",
                st.step, st.owner, st.stmt, st.label, st.digest
            )
            .unwrap();
        }
    }
    if cycle_at == Some(steps.len()) {
        writeln!(out, "{CYCLE_MARKER}").unwrap();
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceLine {
    pub step: usize,
    pub owner: Option<u8>,
    pub stmt: Option<u16>,
    pub label: String,
    pub digest: u64,
}

/// Parses a trace file; returns the lines and the index of the first cycle
/// line, if the trace is a lasso. Lines starting with `#` are comments.
pub fn parse_trace(text: &str) -> Option<(Vec<TraceLine>, Option<usize>)> {
    let mut lines = Vec::new();
    let mut cycle = None;
    for raw in text.lines() {
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        if raw == CYCLE_MARKER {
            cycle = Some(lines.len());
            continue;
        }
        let f: Vec<&str> = raw.split_whitespace().collect();
        if f.len() != 5 {
            return None;
        }
        lines.push(TraceLine {
            step: f[0].parse().ok()?,
            owner: dash_or(f[1])?,
            stmt: dash_or(f[2])?,
            label: f[3].to_string(),
            digest: u64::from_str_radix(f[4], 16).ok()?,
        });
    }
    Some((lines, cycle))
}

fn dash_or<T: std::str::FromStr>(s: &str) -> Option<Option<T>> {
    if s == "-" {
        Some(None)
    } else {
        s.parse().ok().map(Some)
    }
}
