mod common;

use common::*;
use rtmc_core::check::Check;
use rtmc_core::config::Mutation;
use rtmc_core::coverage::CoverageReport;
use rtmc_core::explorer::{
    dfs_safety, format_trace, parse_trace, reconstruct_trace, state_digest, Incomplete, Limits,
    TransitionSystem, Verdict,
};

fn limits() -> Limits {
    Limits::depth(1_000_000)
}

#[test]
fn base_config_passes_with_pinned_state_count() {
    let m = base();
    let out = dfs_safety(&m, &limits());
    assert_eq!(out.verdict, Verdict::Pass);
    assert_eq!(out.stats.states_stored, BASE_STATES);
    assert!(out.stats.states_stored <= out.stats.transitions_fired + 1);
}

#[test]
fn state_count_matches_bfs_oracle() {
    let configs = [
        model_with(|_| {}),
        model_with(|c| c.tick_interval = 0),
        model_with(|c| c.tick_interval = 1),
        model_with(|c| c.buffer_capacity = 2),
        model_with(|c| {
            c.extra_irqs = 1;
            c.irq_priority = vec![2];
        }),
        model_with(|c| c.mutation = Mutation::DropSignal),
    ];
    for m in &configs {
        let out = dfs_safety(m, &limits());
        assert_eq!(out.verdict, Verdict::Pass, "{:?}", m.config());
        let oracle = bfs_reachable(m).len() as u64;
        assert_eq!(out.stats.states_stored, oracle, "{:?}", m.config());
    }
}

#[test]
fn repeated_runs_are_identical() {
    let m = base();
    let a = dfs_safety(&m, &limits());
    let b = dfs_safety(&m, &limits());
    assert_eq!(a.stats.states_stored, b.stats.states_stored);
    assert_eq!(a.stats.transitions_fired, b.stats.transitions_fired);
    assert_eq!(a.stats.max_depth, b.stats.max_depth);
    assert_eq!(a.coverage, b.coverage);
    assert_eq!(
        CoverageReport::new(&m, &a.coverage).render(),
        CoverageReport::new(&m, &b.coverage).render()
    );
}

#[test]
fn depth_one_is_incomplete() {
    let out = dfs_safety(&base(), &Limits::depth(1));
    assert_eq!(out.verdict, Verdict::Incomplete(Incomplete::Depth));
}

#[test]
fn state_cap_is_a_resource_error() {
    let l = Limits {
        max_depth: 1_000_000,
        max_states: Some(100),
    };
    let out = dfs_safety(&base(), &l);
    assert_eq!(out.verdict, Verdict::Incomplete(Incomplete::States));
    assert_eq!(out.verdict.name(), "incomplete-resource");
}

#[test]
fn drop_lock_race_trace_replays() {
    let m = model_with(|c| c.mutation = Mutation::DropLock);
    let out = dfs_safety(&m, &limits());
    let Verdict::Violation { violation, path } = out.verdict else {
        panic!("expected a race, got {:?}", out.verdict.name());
    };
    assert_eq!(violation.check, Check::Race);
    let (steps, last) = reconstruct_trace(&m, &path).unwrap();
    assert!(last.cs_c && last.cs_p);
    assert_eq!(m.check_state(&last).map(|v| v.check), Some(Check::Race));
    assert_eq!(steps.last().unwrap().digest, state_digest(&m, &last));

    // The trace file round-trips and names every step.
    let text = format_trace(state_digest(&m, &m.initial_state()), &steps, None);
    let (lines, cycle) = parse_trace(&text).unwrap();
    assert_eq!(cycle, None);
    assert_eq!(lines.len(), steps.len() + 1);
    for (line, step) in lines[1..].iter().zip(&steps) {
        assert_eq!(line.owner, Some(step.owner));
        assert_eq!(line.stmt, Some(step.stmt));
        assert_eq!(line.digest, step.digest);
    }
}

#[test]
fn corrupt_path_is_rejected() {
    let m = model_with(|c| c.mutation = Mutation::DropLock);
    let Verdict::Violation { mut path, .. } = dfs_safety(&m, &limits()).verdict else {
        panic!("expected a race");
    };
    path.swap(0, 1);
    assert!(reconstruct_trace(&m, &path).is_err() || path[0] == path[1]);
}

#[test]
fn empty_path_is_the_initial_state() {
    let m = base();
    let (steps, s) = reconstruct_trace(&m, &[]).unwrap();
    assert!(steps.is_empty());
    assert_eq!(s, m.initial_state());
}

#[test]
fn trace_owners_are_enabled_processes() {
    let m = model_with(|c| c.mutation = Mutation::DropLock);
    let Verdict::Violation { path, .. } = dfs_safety(&m, &limits()).verdict else {
        panic!("expected a race");
    };
    let mut s = m.initial_state();
    let mut enabled = Vec::new();
    for t in path {
        m.actions(&s, &mut enabled);
        assert!(enabled.contains(&t));
        s = m.apply_transition(&s, t).unwrap().state;
    }
}

#[test]
fn coverage_on_base_config() {
    let m = base();
    let out = dfs_safety(&m, &limits());
    let report = CoverageReport::new(&m, &out.coverage);
    assert_eq!(report.total(), m.statements().len());
    assert_eq!(
        report.reached() + report.unreached().count(),
        report.total()
    );
    for e in &report.entries {
        assert_eq!(e.count == 0, report.unreached().any(|u| u.id == e.id));
    }
    // Every consumer critical-section statement runs.
    let cs: Vec<_> = report
        .entries
        .iter()
        .filter(|e| e.process.starts_with("consumer") && e.label == "cs")
        .collect();
    assert!(!cs.is_empty());
    assert!(cs.iter().all(|e| e.count > 0));
}
