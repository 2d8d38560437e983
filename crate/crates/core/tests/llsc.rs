mod common;

use common::*;
use rtmc_core::check::Check;
use rtmc_core::explorer::{dfs_safety, Limits, TransitionSystem, Verdict};

#[test]
fn fast_path_race_is_safe_with_monitor_clear() {
    let ts = LlscRace::new(false);
    let out = dfs_safety(&ts, &Limits::depth(10_000));
    assert_eq!(out.verdict, Verdict::Pass);
    // Both outcomes of each strex are exercised.
    for (i, name) in LLSC_STRINGS.iter().enumerate() {
        assert!(out.coverage[i] > 0, "{name} never ran");
    }
    assert_eq!(out.stats.states_stored, bfs_reachable(&ts).len() as u64);
}

#[test]
fn stale_mark_breaks_mutual_exclusion() {
    let ts = LlscRace::new(true);
    let out = dfs_safety(&ts, &Limits::depth(10_000));
    let Verdict::Violation { violation, path } = out.verdict else {
        panic!("broken monitor went unnoticed");
    };
    assert!(matches!(
        violation.check,
        Check::Fixture("one-strex-per-epoch") | Check::Fixture("mutual-exclusion")
    ));
    let mut s = ts.initial_state();
    for a in path {
        s = ts.step(&s, a).state;
    }
    assert!(s.pc.iter().filter(|&&p| p >= U_LDREX).count() > 1 || s.epoch_success);
}
