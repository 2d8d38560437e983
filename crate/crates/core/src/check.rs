//! Safety checks evaluated during exploration.

use std::fmt;

/// Every assertion the model can trip. The first thirteen are the kernel and
/// workload checks; the remaining ones guard model-internal consistency.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Check {
    /// Queue insertion never overflows and removal always succeeds.
    QueueBounds,
    /// A non-zero bitmap bit implies a non-empty queue at that level.
    BitmapConsistency,
    /// Electing idle is only legal when the current thread is not idle.
    IdleElection,
    /// Only an interrupt itself modifies its pending bit.
    PendingWriter,
    /// Tail-chaining only elects the highest-priority pending exception.
    TailChain,
    /// ATStack never overflows or underflows.
    AtStackBounds,
    /// PendSV only preempts a user-level thread.
    PendSvPreemptsUserOnly,
    /// Consumer and producer are never both inside their critical sections.
    Race,
    /// System calls are only made by user-level threads with nothing pending.
    SyscallNoPending,
    /// Context switches only happen from SVC/PendSV with no other exception active.
    CtxswNoActive,
    /// The bottom of ATStack is a user-level thread.
    AtStackBottomUser,
    /// A positive mutex value implies a non-empty wait list.
    MutexListNonEmpty,
    /// The mutex value never drops below -1.
    MutexLowerBound,
    /// A condition wait is only issued while holding the mutex.
    CondWaitOwnership,
    /// Buffer occupancy stays within `0..=capacity`.
    BufferBounds,
    /// No process can move (deadlock).
    InvalidEndState,
    /// Used by hand-built fixture models.
    Fixture(&'static str),
}

impl Check {
    /// The kernel/workload checks registered for every run.
    pub const KERNEL: [Check; 13] = [
        Check::QueueBounds,
        Check::BitmapConsistency,
        Check::IdleElection,
        Check::PendingWriter,
        Check::TailChain,
        Check::AtStackBounds,
        Check::PendSvPreemptsUserOnly,
        Check::Race,
        Check::SyscallNoPending,
        Check::CtxswNoActive,
        Check::AtStackBottomUser,
        Check::MutexListNonEmpty,
        Check::MutexLowerBound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::QueueBounds => "queue-bounds",
            Check::BitmapConsistency => "bitmap-consistency",
            Check::IdleElection => "idle-election",
            Check::PendingWriter => "pending-writer",
            Check::TailChain => "tail-chain",
            Check::AtStackBounds => "atstack-bounds",
            Check::PendSvPreemptsUserOnly => "pendsv-preempts-user-only",
            Check::Race => "race",
            Check::SyscallNoPending => "syscall-no-pending",
            Check::CtxswNoActive => "ctxsw-no-active",
            Check::AtStackBottomUser => "atstack-bottom-user",
            Check::MutexListNonEmpty => "mutex-list-nonempty",
            Check::MutexLowerBound => "mutex-lower-bound",
            Check::CondWaitOwnership => "condwait-ownership",
            Check::BufferBounds => "buffer-bounds",
            Check::InvalidEndState => "invalid-end-state",
            Check::Fixture(name) => name,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A failed check together with a short description of what went wrong.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub check: Check,
    pub detail: &'static str,
}

impl Violation {
    pub fn new(check: Check, detail: &'static str) -> Violation {
        Violation { check, detail }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.check, self.detail)
    }
}

/// Returns `Err` with the given check when `cond` does not hold.
pub(crate) fn ensure(cond: bool, check: Check, detail: &'static str) -> Result<(), Violation> {
    if cond {
        Ok(())
    } else {
        Err(Violation::new(check, detail))
    }
}
