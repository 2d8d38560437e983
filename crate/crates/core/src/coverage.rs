//! Statement coverage after an exhaustive search, with known reasons for
//! the statements the kernel model never executes.

use std::fmt::Write as _;

use crate::model::{KernelModel, StmtKind};
use crate::program::{SpSite, SpStep};

/// Known reasons a statement is unreached on the standard workload.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Reason {
    /// Only the PendSV scheduling point inserts the current thread.
    SvcNoInsert,
    /// The active runqueue is never empty at an SVC scheduling point: an
    /// enqueue comes just before it, so no swap happens.
    NoSwap,
    /// Both runqueues are never empty together: idle is never elected.
    NeverIdle,
    /// Next equals current only in the yield system call.
    NoCtxswOutsideYield,
    /// The mutex-unlock scheduling point is never executed.
    UnlockSpNeverExecuted,
}

impl Reason {
    pub const ALL: [Reason; 5] = [
        Reason::SvcNoInsert,
        Reason::NoSwap,
        Reason::NeverIdle,
        Reason::NoCtxswOutsideYield,
        Reason::UnlockSpNeverExecuted,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Reason::SvcNoInsert => "svc-no-insert",
            Reason::NoSwap => "no-swap",
            Reason::NeverIdle => "never-idle",
            Reason::NoCtxswOutsideYield => "no-ctxsw-outside-yield",
            Reason::UnlockSpNeverExecuted => "unlock-sp-never-executed",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            Reason::SvcNoInsert => {
                "the PendSV scheduling point inserts the current task into the expired runqueue, SVC scheduling points do not"
            }
            Reason::NoSwap => {
                "the active runqueue always has elements (an enqueue point comes just before), so no swap is performed"
            }
            Reason::NeverIdle => "the runqueues are never both empty, the scheduler never switches to idle",
            Reason::NoCtxswOutsideYield => {
                "next equals current only in the pthread yield system call, elsewhere a context switch always happens"
            }
            Reason::UnlockSpNeverExecuted => "this mutex-unlock scheduling point is never executed",
        }
    }
}

/// The unlock scheduling points that cannot run: after a plain unlock the
/// caller is never blocked, after a condition wait it always is.
pub const DEAD_UNLOCK_SITES: [SpSite; 2] = [SpSite::UnlockA1, SpSite::UnlockB2];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverageEntry {
    pub id: u16,
    pub process: String,
    pub location: &'static str,
    pub text: String,
    pub label: &'static str,
    pub count: u64,
    pub reason: Option<Reason>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoverageReport {
    pub entries: Vec<CoverageEntry>,
}

/// Location names of the SVC branches leading into a dead unlock site.
fn dead_unlock_location(location: &str) -> bool {
    matches!(
        location,
        "unlock_sp1" | "cond_wait_unlock_requeue" | "cond_wait_unlock_sp2"
    )
}

fn reason_for(model: &KernelModel, id: u16) -> Option<Reason> {
    let info = &model.statements()[id as usize];
    if info.site.is_some_and(|s| DEAD_UNLOCK_SITES.contains(&s))
        || dead_unlock_location(info.location)
    {
        return Some(Reason::UnlockSpNeverExecuted);
    }
    if info.kind == StmtKind::Awaits
        && info.location == "unlock_branch"
        && info.text.starts_with("callerblocked")
    {
        return Some(Reason::UnlockSpNeverExecuted);
    }
    if info.location == "cond_wait_unlock_branch" && info.text.starts_with("callernotblocked") {
        return Some(Reason::UnlockSpNeverExecuted);
    }
    let (site, step) = (info.site?, info.step?);
    match step {
        SpStep::InsertCurrent if site.in_svc() => Some(Reason::SvcNoInsert),
        SpStep::Swap | SpStep::ElectAfterSwap => Some(Reason::NoSwap),
        SpStep::ElectIdle => Some(Reason::NeverIdle),
        SpStep::NoCtxsw if site != SpSite::Yield => Some(Reason::NoCtxswOutsideYield),
        _ => None,
    }
}

impl CoverageReport {
    /// Builds the report from per-statement fire counts. Reasons are only
    /// attached to unreached statements.
    pub fn new(model: &KernelModel, counts: &[u64]) -> CoverageReport {
        let entries = model
            .statements()
            .iter()
            .map(|info| {
                let count = counts[info.id as usize];
                CoverageEntry {
                    id: info.id,
                    process: info.process.clone(),
                    location: info.location,
                    text: info.text.clone(),
                    label: info.label.map_or("-", |l| l.name()),
                    count,
                    reason: if count == 0 {
                        reason_for(model, info.id)
                    } else {
                        None
                    },
                }
            })
            .collect();
        CoverageReport { entries }
    }

    pub fn total(&self) -> usize {
        self.entries.len()
    }

    pub fn unreached(&self) -> impl Iterator<Item = &CoverageEntry> {
        self.entries.iter().filter(|e| e.count == 0)
    }

    pub fn reached(&self) -> usize {
        self.entries.len() - self.unreached().count()
    }

    /// Unreached statements explained by `r`.
    pub fn explained_by(&self, r: Reason) -> impl Iterator<Item = &CoverageEntry> {
        self.unreached().filter(move |e| e.reason == Some(r))
    }

    /// Unreached statements with no known reason.
    pub fn unexplained(&self) -> impl Iterator<Item = &CoverageEntry> {
        self.unreached().filter(|e| e.reason.is_none())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let unreached = self.unreached().count();
        writeln!(
            out,
            "statements: {} reached: {} unreached: {}",
            self.total(),
            self.reached(),
            unreached
        )
        .unwrap();
        writeln!(out, "\nunreached:").unwrap();
        for e in self.unreached() {
            let why = e.reason.map_or("unexplained", Reason::name);
            writeln!(
                out,
                "  {:>4} {}:{} {} [{}] {}",
                e.id, e.process, e.location, e.text, e.label, why
            )
            .unwrap();
        }
        writeln!(out, "\nreasons:").unwrap();
        for r in Reason::ALL {
            writeln!(
                out,
                "  {} ({}): {}",
                r.name(),
                self.explained_by(r).count(),
                r.describe()
            )
            .unwrap();
        }
        writeln!(out, "  unexplained ({})", self.unexplained().count()).unwrap();
        writeln!(out, "\ncounts:").unwrap();
        for e in &self.entries {
            writeln!(
                out,
                "  {:>4} {:>12} {}:{} {}",
                e.id, e.count, e.process, e.location, e.text
            )
            .unwrap();
        }
        out
    }
}
