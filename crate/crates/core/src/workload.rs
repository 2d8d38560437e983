//! Consumer/producer user programs, their atomic propositions, and the
//! registered safety checks.

use crate::check::Check;
use crate::config::{Layout, Mutation, Pid};
use crate::program::{Action, Guard, Label, Program};
use crate::state::{GlobalState, Service};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Consumer,
    Producer,
}

/// Builds one user task. Without mutation the loop is
///
/// ```text
/// lock (ldrex/strex fast path, else mutex_lock)
/// want: while buffer blocks progress: cond_wait
/// cs := 1; buffer -/+= 1; cs := 0
/// cond_signal
/// unlock (ldrex/strex fast path, else mutex_unlock)
/// noncs
/// ```
pub fn user_program(side: Side, mutation: Mutation) -> Program {
    use Action::*;
    let (blocked, ready, delta) = match side {
        Side::Consumer => (Guard::BufferEmpty, Guard::BufferNotEmpty, -1),
        Side::Producer => (Guard::BufferFull, Guard::BufferNotFull, 1),
    };
    let locked = mutation != Mutation::DropLock;
    let signal = locked && mutation != Mutation::DropSignal;

    let mut p = Program::default();
    let l0 = p.loc("lock", None);
    let (l1, l2) = if locked {
        (p.loc("lock_strex", None), p.loc("lock_svc", None))
    } else {
        (0, 0)
    };
    let want = p.loc("want", Some(Label::Want));
    let cs1 = p.loc("cs_enter", Some(Label::Cs));
    let cs2 = p.loc("cs_buffer", Some(Label::Cs));
    let cs3 = p.loc("cs_leave", Some(Label::Cs));
    let sig = if signal { p.loc("signal", None) } else { 0 };
    let (ul0, ul1, ul2) = if locked {
        (
            p.loc("unlock", None),
            p.loc("unlock_strex", None),
            p.loc("unlock_svc", None),
        )
    } else {
        (0, 0, 0)
    };
    let noncs = p.loc("noncs", Some(Label::NonCs));

    if locked {
        p.edge(l0, Guard::Always, LockLdrex { free: l1, held: l2 }, 0);
        p.edge(
            l1,
            Guard::Always,
            LockStrex {
                ok: want,
                retry: l0,
            },
            0,
        );
        p.edge(l2, Guard::Always, Syscall(Service::MutexLock), want);
        p.edge(want, blocked, Syscall(Service::CondWait), want);
    } else {
        p.edge(l0, Guard::Always, Skip, want);
        p.edge(want, blocked, Syscall(Service::PthreadYield), want);
    }
    p.edge(want, ready, Skip, cs1);
    p.edge(cs1, Guard::Always, SetCs(true), cs2);
    p.edge(cs2, Guard::Always, BufferDelta(delta), cs3);
    let after_cs = if signal {
        sig
    } else if locked {
        ul0
    } else {
        noncs
    };
    p.edge(cs3, Guard::Always, SetCs(false), after_cs);
    if signal {
        p.edge(sig, Guard::Always, Syscall(Service::CondSignal), ul0);
    }
    if locked {
        p.edge(
            ul0,
            Guard::Always,
            UnlockLdrex {
                uncontended: ul1,
                contended: ul2,
            },
            0,
        );
        p.edge(
            ul1,
            Guard::Always,
            UnlockStrex {
                ok: noncs,
                retry: ul0,
            },
            0,
        );
        p.edge(ul2, Guard::Always, Syscall(Service::MutexUnlock), noncs);
    }
    p.edge(noncs, Guard::Always, Skip, l0);
    p
}

/// The four atomic propositions of the workload.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AtomicProp {
    CsC,
    CsP,
    ConsumerAtWant,
    ProducerAtWant,
}

impl AtomicProp {
    pub const ALL: [AtomicProp; 4] = [
        AtomicProp::CsC,
        AtomicProp::CsP,
        AtomicProp::ConsumerAtWant,
        AtomicProp::ProducerAtWant,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AtomicProp::CsC => "cs_c",
            AtomicProp::CsP => "cs_p",
            AtomicProp::ConsumerAtWant => "consumer_at_want",
            AtomicProp::ProducerAtWant => "producer_at_want",
        }
    }

    pub fn from_name(name: &str) -> Option<AtomicProp> {
        AtomicProp::ALL.into_iter().find(|p| p.name() == name)
    }
}

/// Evaluates a proposition. `want` holds the want location of the first
/// consumer (task 0) and the first producer (task 1).
pub fn eval_ap(s: &GlobalState, layout: &Layout, want: [u8; 2], p: AtomicProp) -> bool {
    match p {
        AtomicProp::CsC => s.cs_c,
        AtomicProp::CsP => s.cs_p,
        AtomicProp::ConsumerAtWant => s.pc_of(layout.task(0)) == want[0],
        AtomicProp::ProducerAtWant => layout.user_tasks > 1 && s.pc_of(layout.task(1)) == want[1],
    }
}

/// The thirteen checks registered for every run. Statement-attached checks
/// fire inside transition effects; the rest are state predicates evaluated
/// after every transition by [`check_state`].
pub fn safety_assertions() -> [Check; 13] {
    Check::KERNEL
}

/// State predicates: race freedom, mutex bounds, bitmap consistency,
/// ATStack shape and buffer bounds.
pub fn check_state(
    s: &GlobalState,
    layout: &Layout,
    capacity: u8,
) -> Option<(Check, &'static str)> {
    if s.cs_c && s.cs_p {
        return Some((
            Check::Race,
            "consumer and producer both in critical section",
        ));
    }
    if s.mutex.value < -1 {
        return Some((Check::MutexLowerBound, "mutex value below -1"));
    }
    if s.mutex.value > 0 && s.mutex.wait_slot.is_empty() {
        return Some((
            Check::MutexListNonEmpty,
            "positive mutex value with empty wait list",
        ));
    }
    if s.runqueues.check_consistency().is_err() || s.tasklet.0.check_consistency().is_err() {
        return Some((
            Check::BitmapConsistency,
            "bitmap disagrees with queue contents",
        ));
    }
    if s.at_stack.len() > layout.at_stack_capacity() {
        return Some((Check::AtStackBounds, "ATStack overflow"));
    }
    if let Some(&bottom) = s.at_stack.first() {
        if !layout.is_user_level(bottom) {
            return Some((Check::AtStackBottomUser, "ATStack bottom is not user-level"));
        }
        if s.at_stack[1..].iter().any(|&p| layout.is_user_level(p)) {
            return Some((
                Check::AtStackBounds,
                "user-level process above the ATStack bottom",
            ));
        }
    }
    if s.buffer > capacity {
        return Some((Check::BufferBounds, "buffer above capacity"));
    }
    None
}

/// Which critical-section bit a user task drives.
pub fn side_of(layout: &Layout, pid: Pid) -> Side {
    if layout.is_consumer(pid) {
        Side::Consumer
    } else {
        Side::Producer
    }
}
