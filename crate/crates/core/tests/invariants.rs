//! Reachable-state and per-transition invariants, exhaustively on small
//! configurations and by random walks on others.

mod common;

use common::*;
use proptest::prelude::*;
use rtmc_core::config::{Mutation, Pid, Role};
use rtmc_core::exception::exec_priority;
use rtmc_core::explorer::TransitionSystem;
use rtmc_core::model::{StmtKind, Transition};
use rtmc_core::state::GlobalState;
use rtmc_core::workload::AtomicProp;
use rtmc_core::KernelModel;

fn check_state_invariants(m: &KernelModel, s: &GlobalState) {
    let l = m.layout();
    assert!(!s.at_stack.contains(&s.at), "AT on ATStack");
    assert_eq!(s.pending & s.active, 0, "pending and active overlap");
    if let Some((&bottom, rest)) = s.at_stack.split_first() {
        assert!(l.is_user_level(bottom), "ATStack bottom not user-level");
        for &p in rest {
            assert!(l.role(p).is_exception());
        }
        // Preemption priority strictly increases toward the top (and AT).
        let levels: Vec<u16> = s.at_stack[1..]
            .iter()
            .chain([&s.at])
            .map(|&p| l.priority(p) as u16)
            .collect();
        assert!(levels.windows(2).all(|w| w[1] < w[0]), "{levels:?}");
    }
    assert!(s.runqueues.check_consistency().is_ok());
    assert!(m.runnable_threads_queued(s));
    assert!(!(s.cs_c && s.cs_p));
    assert!(s.buffer <= m.config().buffer_capacity);
    assert!(s.mutex.value >= -1);
    if s.mutex.value > 0 {
        assert_eq!(s.mutex.wait_slot.len(), s.mutex.value as usize);
    } else {
        assert!(s.mutex.wait_slot.is_empty());
    }
    assert_eq!(s.mutex.owner.is_some(), s.mutex.value >= 0);
    if let Some(call) = s.svc_channel.call {
        assert_ne!(s.at, call.caller, "caller runs while its call is in flight");
    }
}

fn is_return(m: &KernelModel, t: Transition) -> bool {
    let text = &m.statements()[t.stmt as usize].text;
    text == "iret" || text == "svc return"
}

fn check_transition_invariants(m: &KernelModel, s: &GlobalState, t: Transition) {
    let info = &m.statements()[t.stmt as usize];
    let arrival = matches!(info.kind, StmtKind::ITake | StmtKind::PendSvTake);
    if !arrival {
        assert_eq!(
            t.owner, s.at,
            "guarded statement fired by a process other than AT"
        );
    }
    let a = m.apply_transition(s, t).unwrap();
    let b = m.apply_transition(s, t).unwrap();
    assert_eq!(
        a.state, b.state,
        "transition is not a function of the state"
    );
    assert!(
        a.violation.is_none(),
        "{:?} at {}",
        a.violation,
        m.statement_text(t.stmt)
    );
    if is_return(m, t) {
        assert_eq!(
            a.state.monitor.marked, None,
            "mark survived exception return"
        );
    }
    if info.kind == StmtKind::ITake {
        assert_eq!(
            a.state.active & s.active,
            s.active,
            "itake dropped an active exception"
        );
        assert!(a.state.at_stack.len() >= s.at_stack.len());
        if a.state.at != s.at && !s.at_stack.is_empty() || a.state.at_stack.len() > s.at_stack.len()
        {
            // A preemption only happens by a strictly more urgent exception.
            assert!((m.layout().priority(t.owner) as u16) < exec_priority(s, m.layout()));
        }
    }
}

fn exhaustive(m: &KernelModel) -> usize {
    let states = bfs_reachable(m);
    let mut enabled = Vec::new();
    for s in &states {
        check_state_invariants(m, s);
        m.enabled_transitions(s, &mut enabled);
        assert!(!enabled.is_empty(), "deadlock");
        for &t in &enabled {
            check_transition_invariants(m, s, t);
        }
    }
    states.len()
}

#[test]
fn base_config_every_state_and_transition() {
    let m = base();
    assert_eq!(exhaustive(&m) as u64, BASE_STATES);
}

#[test]
fn extra_interrupt_every_state_and_transition() {
    exhaustive(&model_with(|c| {
        c.extra_irqs = 2;
        c.irq_priority = vec![2, 3];
    }));
}

#[test]
fn want_labels_are_reachable() {
    let m = base();
    let states = bfs_reachable(&m);
    for p in [AtomicProp::ConsumerAtWant, AtomicProp::ProducerAtWant] {
        assert!(states.iter().any(|s| m.eval_ap(s, p)), "{}", p.name());
    }
}

#[test]
fn tick_storm_without_gate_keeps_safety() {
    exhaustive(&model_with(|c| c.tick_interval = 0));
}

fn config_strategy() -> impl Strategy<Value = KernelModel> {
    (
        0u8..5,
        0usize..3,
        1u8..3,
        prop_oneof![Just(16u8), Just(10u8)],
        any::<bool>(),
    )
        .prop_map(|(k, irqs, cap, softirq, signal)| {
            model_with(|c| {
                c.tick_interval = k;
                c.extra_irqs = irqs;
                c.irq_priority = (0..irqs as u8).map(|i| 2 + i).collect();
                c.buffer_capacity = cap;
                c.softirq_priority = softirq;
                if signal {
                    c.mutation = Mutation::DropSignal;
                }
            })
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_walks_keep_invariants(m in config_strategy(), choices in prop::collection::vec(any::<u16>(), 1..400)) {
        let mut s = m.initial_state();
        let mut enabled = Vec::new();
        let shape = *m.shape();
        let mut buf = Vec::new();
        for c in choices {
            check_state_invariants(&m, &s);
            buf.clear();
            s.encode(&shape, &mut buf);
            prop_assert_eq!(buf.len(), shape.encoded_len());
            prop_assert_eq!(&GlobalState::decode(&shape, &buf).unwrap(), &s);
            m.actions(&s, &mut enabled);
            if enabled.is_empty() {
                break;
            }
            let t = enabled[c as usize % enabled.len()];
            check_transition_invariants(&m, &s, t);
            s = m.apply_transition(&s, t).unwrap().state;
        }
    }
}

#[test]
fn roles_cover_the_layout() {
    let m = base();
    let l = m.layout();
    let roles: Vec<Role> = l.pids().map(|p| l.role(p)).collect();
    assert_eq!(
        roles,
        [
            Role::UserTask,
            Role::UserTask,
            Role::Softirq,
            Role::Systick,
            Role::PendSv,
            Role::Svc
        ]
    );
    assert!(l.is_user_level(Pid::IDLE));
}
