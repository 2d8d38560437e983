//! Per-process statement tables.
//!
//! A program is a list of locations; each location holds guarded edges. One
//! edge is one atomic model statement. Statement ordinals are assigned by
//! [`crate::model::KernelModel`] across all programs, with one copy per
//! scheduling-point expansion.

use crate::sched::Which;
use crate::state::Service;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Label {
    Want,
    Cs,
    NonCs,
}

impl Label {
    pub fn name(self) -> &'static str {
        match self {
            Label::Want => "want",
            Label::Cs => "cs",
            Label::NonCs => "noncs",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Guard {
    Always,
    BufferEmpty,
    BufferNotEmpty,
    BufferFull,
    BufferNotFull,
    TaskletEmpty,
    TaskletNonEmpty,
    MutexFree,
    MutexHeld,
    CallerBlocked,
    CallerNotBlocked,
    CondHasWaiter,
    CondNoWaiter,
}

/// The scheduling-point expansions. Each one gets its own statement ordinals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpSite {
    Lock,
    /// Standalone unlock, caller blocked branch.
    UnlockA1,
    /// Standalone unlock, after requeueing the caller.
    UnlockA2,
    /// Unlock inside cond_wait, caller blocked branch.
    UnlockB1,
    /// Unlock inside cond_wait, after requeueing the caller.
    UnlockB2,
    Yield,
    PendSv,
}

impl SpSite {
    pub const ALL: [SpSite; 7] = [
        SpSite::Lock,
        SpSite::UnlockA1,
        SpSite::UnlockA2,
        SpSite::UnlockB1,
        SpSite::UnlockB2,
        SpSite::Yield,
        SpSite::PendSv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SpSite::Lock => "sp_lock",
            SpSite::UnlockA1 => "sp_unlock_a1",
            SpSite::UnlockA2 => "sp_unlock_a2",
            SpSite::UnlockB1 => "sp_unlock_b1",
            SpSite::UnlockB2 => "sp_unlock_b2",
            SpSite::Yield => "sp_yield",
            SpSite::PendSv => "sp_pendsv",
        }
    }

    pub fn in_svc(self) -> bool {
        self != SpSite::PendSv
    }

    pub fn index(self) -> usize {
        SpSite::ALL.iter().position(|&s| s == self).unwrap()
    }
}

/// Branches inside one scheduling-point expansion, tracked for coverage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SpStep {
    InsertCurrent,
    ElectActive,
    Swap,
    ElectAfterSwap,
    ElectIdle,
    Ctxsw,
    NoCtxsw,
}

impl SpStep {
    pub const ALL: [SpStep; 7] = [
        SpStep::InsertCurrent,
        SpStep::ElectActive,
        SpStep::Swap,
        SpStep::ElectAfterSwap,
        SpStep::ElectIdle,
        SpStep::Ctxsw,
        SpStep::NoCtxsw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SpStep::InsertCurrent => "insert_current",
            SpStep::ElectActive => "elect_active",
            SpStep::Swap => "swap",
            SpStep::ElectAfterSwap => "elect_after_swap",
            SpStep::ElectIdle => "elect_idle",
            SpStep::Ctxsw => "ctxsw",
            SpStep::NoCtxsw => "no_ctxsw",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Action {
    Skip,
    /// Fast-path lock: ldrex the mutex word and branch on its value.
    LockLdrex {
        free: u8,
        held: u8,
    },
    LockStrex {
        ok: u8,
        retry: u8,
    },
    /// Fast-path unlock: ldrex and branch on whether anybody waits.
    UnlockLdrex {
        uncontended: u8,
        contended: u8,
    },
    UnlockStrex {
        ok: u8,
        retry: u8,
    },
    /// Rendezvous with the SVC handler; the edge target is the continuation.
    Syscall(Service),
    SetCs(bool),
    BufferDelta(i8),
    SoftirqRun,
    // SVC handler statements.
    LockGrant,
    LockBlock,
    UnlockRelease,
    RequeueCaller(Which),
    CondEnqueueCaller,
    SignalWake,
    YieldRequeue,
    SchedPoint(SpSite),
    SvcReturn,
    // Exception statements.
    ITake,
    PendSvTake,
    SystickBottomHalf,
    Iret,
}

impl Action {
    pub fn describe(self) -> String {
        match self {
            Action::Skip => "skip".into(),
            Action::LockLdrex { .. } => "ldrex(mutex) lock".into(),
            Action::LockStrex { .. } => "strex(mutex, 0)".into(),
            Action::UnlockLdrex { .. } => "ldrex(mutex) unlock".into(),
            Action::UnlockStrex { .. } => "strex(mutex, -1)".into(),
            Action::Syscall(svc) => format!("svc {}", svc.name()),
            Action::SetCs(v) => format!("cs := {}", v as u8),
            Action::BufferDelta(d) => format!("buffer += {d}"),
            Action::SoftirqRun => "run tasklet".into(),
            Action::LockGrant => "grant mutex".into(),
            Action::LockBlock => "block on mutex".into(),
            Action::UnlockRelease => "release mutex".into(),
            Action::RequeueCaller(w) => format!("requeue caller {w:?}").to_lowercase(),
            Action::CondEnqueueCaller => "cond enqueue caller".into(),
            Action::SignalWake => "signal wake".into(),
            Action::YieldRequeue => "requeue caller expired".into(),
            Action::SchedPoint(site) => site.name().into(),
            Action::SvcReturn => "svc return".into(),
            Action::ITake => "itake".into(),
            Action::PendSvTake => "pendsv take".into(),
            Action::SystickBottomHalf => "raise tasklet, pend pendsv".into(),
            Action::Iret => "iret".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Edge {
    pub guard: Guard,
    pub action: Action,
    pub target: u8,
}

#[derive(Clone, Debug)]
pub struct Location {
    pub name: &'static str,
    pub label: Option<Label>,
    pub edges: Vec<Edge>,
}

#[derive(Clone, Debug, Default)]
pub struct Program {
    pub locations: Vec<Location>,
}

impl Program {
    pub fn loc(&mut self, name: &'static str, label: Option<Label>) -> u8 {
        self.locations.push(Location {
            name,
            label,
            edges: Vec::new(),
        });
        (self.locations.len() - 1) as u8
    }

    pub fn edge(&mut self, from: u8, guard: Guard, action: Action, target: u8) {
        self.locations[from as usize].edges.push(Edge {
            guard,
            action,
            target,
        });
    }

    /// Location carrying `label`, if exactly one does.
    pub fn labeled(&self, label: Label) -> Option<u8> {
        let mut found = self
            .locations
            .iter()
            .enumerate()
            .filter(|(_, l)| l.label == Some(label));
        match (found.next(), found.next()) {
            (Some((i, _)), None) => Some(i as u8),
            _ => None,
        }
    }

    pub fn edge_count(&self) -> usize {
        self.locations.iter().map(|l| l.edges.len()).sum()
    }
}
