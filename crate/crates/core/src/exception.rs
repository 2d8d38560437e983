//! Exception entry, return with tail-chaining, and the context switch.
//!
//! Priorities follow the ARM convention: the numerically lower level wins.
//! Thread mode runs at [`THREAD_BASE`], below every exception.

use crate::check::{ensure, Check, Violation};
use crate::config::{Layout, Pid, Role};
use crate::state::GlobalState;

/// Execution priority of thread mode; every exception level beats it.
pub const THREAD_BASE: u16 = 256;

/// Address tag of the single mutex word.
pub const MUTEX_ADDR: u8 = 0;

/// Single-core exclusive monitor. Only one address is marked at a time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct MonitorState {
    pub marked: Option<u8>,
}

impl MonitorState {
    /// Load-exclusive: replaces any previous mark.
    pub fn ldrex(&mut self, addr: u8) {
        self.marked = Some(addr);
    }

    /// Store-exclusive: succeeds and clears the mark only if `addr` is marked.
    pub fn strex(&mut self, addr: u8) -> bool {
        if self.marked == Some(addr) {
            self.marked = None;
            true
        } else {
            false
        }
    }

    pub fn clear(&mut self) {
        self.marked = None;
    }
}

fn level(layout: &Layout, pid: Pid) -> u16 {
    if layout.is_user_level(pid) {
        THREAD_BASE
    } else {
        layout.priority(pid) as u16
    }
}

pub fn exec_priority(s: &GlobalState, layout: &Layout) -> u16 {
    level(layout, s.at)
}

/// Most urgent pending interrupt; ties go to the lower pid.
pub fn highest_pending(s: &GlobalState, layout: &Layout) -> Option<Pid> {
    layout
        .interrupts()
        .filter(|&p| s.is_pending(p))
        .min_by_key(|&p| (layout.priority(p), p.0))
}

/// Sets an interrupt's pending bit on behalf of `actor`.
pub fn set_pending(
    s: &mut GlobalState,
    layout: &Layout,
    actor: Pid,
    target: Pid,
) -> Result<(), Violation> {
    if layout.is_interrupt(target) {
        ensure(
            actor == target,
            Check::PendingWriter,
            "interrupt pending bit written by another process",
        )?;
    }
    s.pending |= target.bit();
    Ok(())
}

fn push_at(s: &mut GlobalState, layout: &Layout) -> Result<(), Violation> {
    ensure(
        s.at_stack.len() < layout.at_stack_capacity(),
        Check::AtStackBounds,
        "ATStack overflow",
    )?;
    if let Some(&top) = s.at_stack.last() {
        ensure(
            level(layout, s.at) < level(layout, top) || layout.is_user_level(top),
            Check::AtStackBounds,
            "ATStack priorities not strictly increasing",
        )?;
    } else {
        ensure(
            layout.is_user_level(s.at),
            Check::AtStackBottomUser,
            "first preempted process is not user-level",
        )?;
    }
    s.at_stack.push(s.at);
    Ok(())
}

fn enter(s: &mut GlobalState, e: Pid, body: u8) {
    s.at = e;
    s.active |= e.bit();
    s.pending &= !e.bit();
    s.pc[e.index()] = body;
}

/// Interrupt arrival. Preempts when `e` strictly beats the execution priority
/// or is the tail-chain target in `ghost_direct_at`; otherwise `e` pends.
/// Returns whether `e` was entered.
pub fn itake(s: &mut GlobalState, layout: &Layout, e: Pid, body: u8) -> Result<bool, Violation> {
    debug_assert!(layout.is_interrupt(e));
    ensure(
        !s.is_active(e),
        Check::PendingWriter,
        "arrival of an active interrupt",
    )?;
    if s.ghost_direct_at == Some(e) {
        s.ghost_direct_at = None;
        enter(s, e, body);
        return Ok(true);
    }
    if level(layout, e) < exec_priority(s, layout) {
        push_at(s, layout)?;
        enter(s, e, body);
        Ok(true)
    } else {
        set_pending(s, layout, e, e)?;
        Ok(false)
    }
}

/// PendSV entry; only a user-level process may be preempted.
pub fn pendsv_take(s: &mut GlobalState, layout: &Layout, body: u8) -> Result<(), Violation> {
    let pendsv = layout.pendsv();
    debug_assert!(s.is_pending(pendsv));
    ensure(
        layout.is_user_level(s.at) && s.active == 0,
        Check::PendSvPreemptsUserOnly,
        "PendSV taken over an exception",
    )?;
    push_at(s, layout)?;
    enter(s, pendsv, body);
    Ok(())
}

/// Exception return. Clears the exclusive monitor, then either tail-chains
/// into the most urgent pending interrupt or resumes the top of ATStack.
/// `body` gives the handler entry location of an interrupt. Returns the
/// tail-chained interrupt, if any.
pub fn iret(
    s: &mut GlobalState,
    layout: &Layout,
    body: impl Fn(Pid) -> u8,
) -> Result<Option<Pid>, Violation> {
    let leaving = s.at;
    debug_assert!(layout.role(leaving).is_exception());
    s.active &= !leaving.bit();
    s.pc[leaving.index()] = 0;
    s.monitor.clear();
    let Some(&top) = s.at_stack.last() else {
        return Err(Violation::new(
            Check::AtStackBounds,
            "ATStack underflow at exception return",
        ));
    };
    if let Some(p) = highest_pending(s, layout) {
        if layout.is_user_level(top) || level(layout, p) <= level(layout, top) {
            let beaten = layout
                .interrupts()
                .any(|q| s.is_pending(q) && level(layout, q) < level(layout, p));
            ensure(
                !beaten,
                Check::TailChain,
                "tail-chained past a more urgent pending interrupt",
            )?;
            s.ghost_direct_at = Some(p);
            let entered = itake(s, layout, p, body(p))?;
            debug_assert!(entered && s.ghost_direct_at.is_none());
            return Ok(Some(p));
        }
    }
    s.at = s.at_stack.pop().expect("checked non-empty");
    Ok(None)
}

/// Replaces the preempted user-level thread at the bottom of ATStack.
pub fn ctxsw(s: &mut GlobalState, layout: &Layout, next: Pid) -> Result<(), Violation> {
    ensure(
        matches!(layout.role(s.at), Role::Svc | Role::PendSv) && s.active == s.at.bit(),
        Check::CtxswNoActive,
        "context switch with another exception active",
    )?;
    ensure(
        s.at_stack.len() == 1 && layout.is_user_level(s.at_stack[0]),
        Check::AtStackBottomUser,
        "context switch without a single user-level frame",
    )?;
    s.at_stack[0] = next;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use crate::state::Shape;

    fn setup(extra_irqs: usize) -> (Layout, Shape, GlobalState) {
        let cfg = Config {
            extra_irqs,
            irq_priority: (0..extra_irqs).map(|i| 2 + i as u8).collect(),
            ..Config::default()
        };
        let layout = Layout::new(&cfg);
        let shape = Shape::new(&cfg, &layout);
        let s = GlobalState::empty(&shape);
        (layout, shape, s)
    }

    #[test]
    fn exec_priority_by_role() {
        let (layout, _, mut s) = setup(0);
        assert_eq!(exec_priority(&s, &layout), THREAD_BASE);
        s.at = layout.systick();
        assert_eq!(exec_priority(&s, &layout), 1);
        s.at = layout.pendsv();
        assert_eq!(exec_priority(&s, &layout), 15);
    }

    #[test]
    fn systick_preempts_task() {
        let (layout, _, mut s) = setup(0);
        let st = layout.systick();
        assert!(itake(&mut s, &layout, st, 1).unwrap());
        assert_eq!(s.at, st);
        assert_eq!(s.at_stack.as_slice(), &[Pid(0)]);
        assert!(s.is_active(st) && !s.is_pending(st));
    }

    #[test]
    fn lower_or_equal_priority_pends() {
        let (layout, _, mut s) = setup(1);
        let irq = layout.irq(0);
        s.at = layout.systick();
        s.active = s.at.bit();
        s.at_stack.push(Pid(0));
        assert!(!itake(&mut s, &layout, irq, 1).unwrap());
        assert!(s.is_pending(irq));
        assert_eq!(s.at, layout.systick());
    }

    #[test]
    fn pendsv_only_over_user_level() {
        let (layout, _, mut s) = setup(0);
        s.pending = layout.pendsv().bit();
        let mut over_irq = s.clone();
        pendsv_take(&mut s, &layout, 1).unwrap();
        assert_eq!(s.at, layout.pendsv());
        assert_eq!(s.at_stack.as_slice(), &[Pid(0)]);

        over_irq.at = layout.systick();
        over_irq.active = over_irq.at.bit();
        let err = pendsv_take(&mut over_irq, &layout, 1).unwrap_err();
        assert_eq!(err.check, Check::PendSvPreemptsUserOnly);
    }

    #[test]
    fn iret_clears_monitor_and_resumes() {
        let (layout, _, mut s) = setup(0);
        itake(&mut s, &layout, layout.systick(), 1).unwrap();
        s.monitor.ldrex(MUTEX_ADDR);
        assert_eq!(iret(&mut s, &layout, |_| 1).unwrap(), None);
        assert_eq!(s.at, Pid(0));
        assert!(s.at_stack.is_empty());
        assert_eq!(s.monitor.marked, None);
        assert_eq!(s.active, 0);
    }

    #[test]
    fn iret_tail_chains_without_popping() {
        let (layout, _, mut s) = setup(1);
        let irq = layout.irq(0);
        itake(&mut s, &layout, layout.systick(), 1).unwrap();
        itake(&mut s, &layout, irq, 1).unwrap();
        assert_eq!(iret(&mut s, &layout, |_| 1).unwrap(), Some(irq));
        assert_eq!(s.at, irq);
        assert_eq!(s.at_stack.as_slice(), &[Pid(0)]);
        assert_eq!(s.ghost_direct_at, None);
        assert!(s.is_active(irq) && !s.is_pending(irq));
    }

    #[test]
    fn iret_underflow_is_reported() {
        let (layout, _, mut s) = setup(0);
        s.at = layout.systick();
        s.active = s.at.bit();
        assert_eq!(
            iret(&mut s, &layout, |_| 1).unwrap_err().check,
            Check::AtStackBounds
        );
    }

    #[test]
    fn ctxsw_rewrites_bottom_only_from_scheduler_exceptions() {
        let (layout, _, mut s) = setup(0);
        s.at_stack.push(Pid(0));
        s.at = layout.svc();
        s.active = s.at.bit();
        ctxsw(&mut s, &layout, Pid(1)).unwrap();
        assert_eq!(s.at_stack.as_slice(), &[Pid(1)]);

        s.active |= layout.systick().bit();
        assert_eq!(
            ctxsw(&mut s, &layout, Pid(0)).unwrap_err().check,
            Check::CtxswNoActive
        );
    }

    #[test]
    fn monitor_marks_one_address() {
        let mut m = MonitorState::default();
        m.ldrex(1);
        m.ldrex(2);
        assert!(!m.strex(1));
        assert!(m.strex(2));
        assert!(!m.strex(2));
    }

    /// Exhaustive election table over three interrupts (levels 1, 2, 3),
    /// every pending subset and every possible stack top.
    #[test]
    fn iret_matches_decision_table() {
        let (layout, _, base) = setup(2);
        let irqs: Vec<Pid> = layout.interrupts().collect();
        for leaving in &irqs {
            for top in std::iter::once(Pid(0)).chain(irqs.iter().copied()) {
                if top == *leaving {
                    continue;
                }
                if top != Pid(0) && layout.priority(top) <= layout.priority(*leaving) {
                    continue; // `leaving` could not have preempted `top`
                }
                for mask in 0u8..8 {
                    let pending: Vec<Pid> = (0..3)
                        .filter(|i| mask >> i & 1 == 1)
                        .map(|i| irqs[i])
                        .filter(|&p| p != *leaving && p != top)
                        .collect();
                    let mut s = base.clone();
                    s.at = *leaving;
                    s.active = leaving.bit();
                    s.at_stack.push(Pid(0));
                    if top != Pid(0) {
                        s.at_stack.push(top);
                        s.active |= top.bit();
                    }
                    for &p in &pending {
                        s.pending |= p.bit();
                    }
                    // Hand-written table: the most urgent pending interrupt is
                    // taken if it is at least as urgent as the stack top.
                    let best = pending.iter().copied().min_by_key(|&p| layout.priority(p));
                    let expected = match best {
                        Some(p) if top == Pid(0) => Some(p),
                        Some(p) if layout.priority(p) <= layout.priority(top) => Some(p),
                        _ => None,
                    };
                    let depth = s.at_stack.len();
                    let got = iret(&mut s, &layout, |_| 1).unwrap();
                    assert_eq!(
                        got, expected,
                        "leaving {leaving} top {top} pending {pending:?}"
                    );
                    match expected {
                        Some(p) => {
                            assert_eq!(s.at, p);
                            assert_eq!(s.at_stack.len(), depth);
                        }
                        None => {
                            assert_eq!(s.at, top);
                            assert_eq!(s.at_stack.len(), depth - 1);
                        }
                    }
                    assert_eq!(s.pending & s.active, 0);
                    assert_eq!(s.monitor.marked, None);
                }
            }
        }
    }
}
