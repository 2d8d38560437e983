//! Kernel services: the SVC rendezvous and its five system calls, the
//! scheduling-point macro, and the exception handler bodies.

use arrayvec::ArrayVec;

use crate::check::{ensure, Check, Violation};
use crate::config::{Layout, Pid};
use crate::exception::{self, MUTEX_ADDR};
use crate::program::{Action, Guard, Program, SpSite, SpStep};
use crate::sched::{ElectPath, Which};
use crate::state::{Call, GlobalState, Service, ThreadState};

/// Entry locations of the SVC handler, one per service.
#[derive(Clone, Copy, Debug)]
pub struct SvcEntries {
    pub lock: u8,
    pub unlock: u8,
    pub cond_wait: u8,
    pub signal: u8,
    pub yield_: u8,
}

impl SvcEntries {
    pub fn entry(&self, svc: Service) -> u8 {
        match svc {
            Service::MutexLock => self.lock,
            Service::MutexUnlock => self.unlock,
            Service::CondWait => self.cond_wait,
            Service::CondSignal => self.signal,
            Service::PthreadYield => self.yield_,
        }
    }
}

pub fn svc_program() -> (Program, SvcEntries) {
    use Action::*;
    use Guard::*;
    let mut p = Program::default();
    let idle = p.loc("idle", None);
    debug_assert_eq!(idle, 0);
    let ret = p.loc("ret", None);

    let lock = p.loc("lock", None);
    let lock_sp = p.loc("lock_sp", None);
    p.edge(lock, MutexFree, LockGrant, ret);
    p.edge(lock, MutexHeld, LockBlock, lock_sp);
    p.edge(lock_sp, Always, SchedPoint(SpSite::Lock), ret);

    let unlock = p.loc("unlock", None);
    let ua_br = p.loc("unlock_branch", None);
    let ua_sp1 = p.loc("unlock_sp1", None);
    let ua_rq = p.loc("unlock_requeue", None);
    let ua_sp2 = p.loc("unlock_sp2", None);
    p.edge(unlock, Always, UnlockRelease, ua_br);
    p.edge(ua_br, CallerBlocked, Skip, ua_sp1);
    p.edge(ua_br, CallerNotBlocked, Skip, ua_rq);
    p.edge(ua_sp1, Always, SchedPoint(SpSite::UnlockA1), ret);
    p.edge(ua_rq, Always, RequeueCaller(Which::Active), ua_sp2);
    p.edge(ua_sp2, Always, SchedPoint(SpSite::UnlockA2), ret);

    let cond_wait = p.loc("cond_wait", None);
    let cw_rel = p.loc("cond_wait_release", None);
    let ub_br = p.loc("cond_wait_unlock_branch", None);
    let ub_sp1 = p.loc("cond_wait_unlock_sp1", None);
    let ub_rq = p.loc("cond_wait_unlock_requeue", None);
    let ub_sp2 = p.loc("cond_wait_unlock_sp2", None);
    p.edge(cond_wait, Always, CondEnqueueCaller, cw_rel);
    p.edge(cw_rel, Always, UnlockRelease, ub_br);
    p.edge(ub_br, CallerBlocked, Skip, ub_sp1);
    p.edge(ub_br, CallerNotBlocked, Skip, ub_rq);
    p.edge(ub_sp1, Always, SchedPoint(SpSite::UnlockB1), ret);
    p.edge(ub_rq, Always, RequeueCaller(Which::Active), ub_sp2);
    p.edge(ub_sp2, Always, SchedPoint(SpSite::UnlockB2), ret);

    let signal = p.loc("cond_signal", None);
    p.edge(signal, CondHasWaiter, SignalWake, ret);
    p.edge(signal, CondNoWaiter, Skip, ret);

    let yield_ = p.loc("yield", None);
    let yield_sp = p.loc("yield_sp", None);
    p.edge(yield_, Always, YieldRequeue, yield_sp);
    p.edge(yield_sp, Always, SchedPoint(SpSite::Yield), ret);

    p.edge(ret, Always, SvcReturn, idle);
    let entries = SvcEntries {
        lock,
        unlock,
        cond_wait,
        signal,
        yield_,
    };
    (p, entries)
}

/// PendSV: idle, scheduling point, return.
pub fn pendsv_program() -> Program {
    let mut p = Program::default();
    let idle = p.loc("idle", None);
    let sp = p.loc("sched", None);
    let ret = p.loc("ret", None);
    p.edge(idle, Guard::Always, Action::PendSvTake, sp);
    p.edge(sp, Guard::Always, Action::SchedPoint(SpSite::PendSv), ret);
    p.edge(ret, Guard::Always, Action::Iret, idle);
    p
}

/// Handler entry location shared by every interrupt program.
pub const HANDLER_BODY: u8 = 1;

pub fn systick_program() -> Program {
    let mut p = Program::default();
    let idle = p.loc("idle", None);
    let bh = p.loc("bottom_half", None);
    let ret = p.loc("ret", None);
    p.edge(idle, Guard::Always, Action::ITake, bh);
    p.edge(bh, Guard::Always, Action::SystickBottomHalf, ret);
    p.edge(ret, Guard::Always, Action::Iret, idle);
    p
}

/// Any other interrupt handler has an empty body.
pub fn irq_program() -> Program {
    let mut p = Program::default();
    let idle = p.loc("idle", None);
    let ret = p.loc("ret", None);
    p.edge(idle, Guard::Always, Action::ITake, ret);
    p.edge(ret, Guard::Always, Action::Iret, idle);
    p
}

/// Softirq: run queued tasklets, yield when there are none.
pub fn softirq_program() -> Program {
    let mut p = Program::default();
    let poll = p.loc("poll", None);
    p.edge(poll, Guard::TaskletNonEmpty, Action::SoftirqRun, poll);
    p.edge(
        poll,
        Guard::TaskletEmpty,
        Action::Syscall(Service::PthreadYield),
        poll,
    );
    p
}

/// Level at which the systick bottom half is queued.
pub const TASKLET_LEVEL: u8 = 0;

pub fn caller(s: &GlobalState) -> Pid {
    s.svc_channel
        .call
        .expect("SVC statement without an in-flight call")
        .caller
}

pub fn lock_ldrex(s: &mut GlobalState) -> bool {
    s.monitor.ldrex(MUTEX_ADDR);
    s.mutex.value == -1
}

pub fn lock_strex(s: &mut GlobalState, pid: Pid) -> bool {
    if s.monitor.strex(MUTEX_ADDR) {
        s.mutex.value = 0;
        s.mutex.owner = Some(pid);
        true
    } else {
        false
    }
}

/// Returns whether nobody waits on the mutex.
pub fn unlock_ldrex(s: &mut GlobalState) -> bool {
    s.monitor.ldrex(MUTEX_ADDR);
    s.mutex.value == 0
}

pub fn unlock_strex(s: &mut GlobalState) -> bool {
    if s.monitor.strex(MUTEX_ADDR) {
        s.mutex.value = -1;
        s.mutex.owner = None;
        true
    } else {
        false
    }
}

/// Enters the SVC handler on behalf of `caller`.
pub fn svc_call(
    s: &mut GlobalState,
    layout: &Layout,
    caller: Pid,
    service: Service,
    entry: u8,
) -> Result<(), Violation> {
    ensure(
        layout.is_user_level(caller) && s.at == caller && s.pending == 0 && s.active == 0,
        Check::SyscallNoPending,
        "system call with a pending or active exception",
    )?;
    debug_assert!(s.svc_channel.call.is_none());
    let svc = layout.svc();
    ensure(
        s.at_stack.is_empty(),
        Check::AtStackBounds,
        "system call with preempted frames",
    )?;
    s.at_stack.push(caller);
    s.svc_channel.call = Some(Call { caller, service });
    s.at = svc;
    s.active |= svc.bit();
    s.pc[svc.index()] = entry;
    Ok(())
}

pub fn svc_return(s: &mut GlobalState, layout: &Layout) -> Result<Option<Pid>, Violation> {
    s.svc_channel.call = None;
    exception::iret(s, layout, |_| crate::services::HANDLER_BODY)
}

fn wait_push(s: &mut GlobalState, pid: Pid) -> Result<(), Violation> {
    ensure(
        s.mutex.wait_slot.len() < s.mutex.capacity as usize,
        Check::QueueBounds,
        "mutex wait slot overflow",
    )?;
    s.mutex.wait_slot.push(pid);
    Ok(())
}

fn make_runnable(
    s: &mut GlobalState,
    layout: &Layout,
    pid: Pid,
    which: Which,
) -> Result<(), Violation> {
    s.runqueues.enqueue(which, pid, layout.priority(pid))?;
    s.thread_state[pid.index()] = ThreadState::runnable(which, s.runqueues.swap_bit());
    Ok(())
}

pub fn lock_grant(s: &mut GlobalState) {
    s.mutex.value = 0;
    s.mutex.owner = Some(caller(s));
}

pub fn lock_block(s: &mut GlobalState) -> Result<(), Violation> {
    let c = caller(s);
    s.mutex.value += 1;
    wait_push(s, c)?;
    s.runqueues.remove(c);
    s.thread_state[c.index()] = ThreadState::BLOCKED;
    Ok(())
}

/// Releases the caller's ownership; the head waiter (if any) is handed the
/// mutex and made runnable.
pub fn unlock_release(s: &mut GlobalState, layout: &Layout) -> Result<(), Violation> {
    ensure(
        s.mutex.value > -1,
        Check::MutexLowerBound,
        "unlock of a free mutex",
    )?;
    if s.mutex.value > 0 {
        ensure(
            !s.mutex.wait_slot.is_empty(),
            Check::MutexListNonEmpty,
            "waiters counted but wait slot empty",
        )?;
        let w = s.mutex.wait_slot.remove(0);
        s.mutex.value -= 1;
        s.mutex.owner = Some(w);
        make_runnable(s, layout, w, Which::Active)?;
    } else {
        s.mutex.value = -1;
        s.mutex.owner = None;
    }
    Ok(())
}

pub fn requeue_caller(s: &mut GlobalState, layout: &Layout, which: Which) -> Result<(), Violation> {
    let c = caller(s);
    make_runnable(s, layout, c, which)
}

pub fn cond_enqueue_caller(s: &mut GlobalState) -> Result<(), Violation> {
    let c = caller(s);
    ensure(
        s.mutex.owner == Some(c),
        Check::CondWaitOwnership,
        "cond_wait without holding the mutex",
    )?;
    ensure(
        s.condvar.waiters.len() < s.condvar.capacity as usize,
        Check::QueueBounds,
        "condition waiter overflow",
    )?;
    s.condvar.waiters.push(c);
    s.runqueues.remove(c);
    s.thread_state[c.index()] = ThreadState::BLOCKED;
    Ok(())
}

/// Moves the head condition waiter into the mutex protocol: granted at once
/// if the mutex is free, otherwise queued as a mutex waiter (still blocked).
pub fn signal_wake(s: &mut GlobalState, layout: &Layout) -> Result<(), Violation> {
    let w = s.condvar.waiters.remove(0);
    if s.mutex.value == -1 {
        s.mutex.value = 0;
        s.mutex.owner = Some(w);
        make_runnable(s, layout, w, Which::Active)
    } else {
        s.mutex.value += 1;
        wait_push(s, w)
    }
}

/// The scheduling-point macro. Records each branch taken in `steps`.
pub fn sched_point(
    s: &mut GlobalState,
    layout: &Layout,
    steps: &mut ArrayVec<SpStep, 4>,
) -> Result<(), Violation> {
    let current = s.at_stack.first().copied().unwrap_or(Pid::IDLE);
    if current != Pid::IDLE && !s.thread(current).is_blocked() && !s.runqueues.contains(current) {
        steps.push(SpStep::InsertCurrent);
        make_runnable(s, layout, current, Which::Expired)?;
    }
    let (next, path) = s.runqueues.sched_elect()?;
    match path {
        ElectPath::Active => steps.push(SpStep::ElectActive),
        ElectPath::AfterSwap => {
            steps.push(SpStep::Swap);
            steps.push(SpStep::ElectAfterSwap);
        }
        ElectPath::Idle => {
            steps.push(SpStep::Swap);
            steps.push(SpStep::ElectIdle);
            ensure(
                current != Pid::IDLE,
                Check::IdleElection,
                "idle elected while idle is current",
            )?;
        }
    }
    let next = match next {
        Some(pid) => {
            s.thread_state[pid.index()] =
                ThreadState::runnable(Which::Active, s.runqueues.swap_bit());
            pid
        }
        None => Pid::IDLE,
    };
    if next != current {
        steps.push(SpStep::Ctxsw);
        exception::ctxsw(s, layout, next)?;
        s.tick_credit.iter_mut().for_each(|c| *c = 0);
    } else {
        steps.push(SpStep::NoCtxsw);
    }
    Ok(())
}

/// Queues systick's bottom half and requests a reschedule. A request made
/// while PendSV is already pending or running is coalesced.
pub fn systick_bottom_half(s: &mut GlobalState, layout: &Layout) -> Result<(), Violation> {
    s.tasklet.raise(layout.systick(), TASKLET_LEVEL)?;
    let pendsv = layout.pendsv();
    if !s.is_active(pendsv) {
        exception::set_pending(s, layout, layout.systick(), pendsv)?;
    }
    Ok(())
}

pub fn softirq_run(s: &mut GlobalState) -> Result<(), Violation> {
    let ran = s.tasklet.pop()?;
    debug_assert!(ran.is_some());
    Ok(())
}
