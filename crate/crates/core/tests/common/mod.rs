#![allow(dead_code)]

use std::collections::{HashMap, HashSet, VecDeque};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use rand::Rng;
use rtmc_core::check::{Check, Violation};
use rtmc_core::config::{Config, Layout, Pid};
use rtmc_core::exception;
use rtmc_core::explorer::{ActionInfo, Propositions, Step, TransitionSystem};
use rtmc_core::ltl::{Formula, ProductGraph};
use rtmc_core::services::{self, HANDLER_BODY};
use rtmc_core::state::{GlobalState, Shape};
use rtmc_core::KernelModel;

/// Reachable states of the base configuration, pinned after the first
/// exhaustive run.
pub const BASE_STATES: u64 = 9080;

pub fn base() -> KernelModel {
    KernelModel::new(Config::default()).unwrap()
}

pub fn model_with(f: impl FnOnce(&mut Config)) -> KernelModel {
    let mut cfg = Config::default();
    f(&mut cfg);
    KernelModel::new(cfg).unwrap()
}

/// Reachable states by breadth-first search, independent of the explorer.
/// Panics if two different states share an encoding.
pub fn bfs_reachable<T>(ts: &T) -> Vec<T::State>
where
    T: TransitionSystem,
    T::State: PartialEq + std::fmt::Debug,
{
    let mut seen: HashMap<Vec<u8>, usize> = HashMap::new();
    let mut states = Vec::new();
    let mut queue = VecDeque::new();
    let mut key = Vec::new();
    let s0 = ts.initial_state();
    ts.encode(&s0, &mut key);
    seen.insert(key.clone(), 0);
    states.push(s0);
    queue.push_back(0);
    let mut actions = Vec::new();
    while let Some(i) = queue.pop_front() {
        ts.actions(&states[i], &mut actions);
        for &a in &actions {
            let next = ts.step(&states[i], a).state;
            key.clear();
            ts.encode(&next, &mut key);
            match seen.get(&key) {
                Some(&j) => assert_eq!(states[j], next, "two states share an encoding"),
                None => {
                    seen.insert(key.clone(), states.len());
                    queue.push_back(states.len());
                    states.push(next);
                }
            }
        }
    }
    states
}

fn info(owner: u8, stmt: u16, label: &'static str) -> ActionInfo {
    ActionInfo {
        owner,
        stmt,
        label,
        text: label.into(),
    }
}

/// Two processes cycling NCS -> TRY -> CS -> NCS. With `locked`, entering
/// CS takes a shared lock atomically and leaving releases it.
pub struct ToyMutex {
    pub locked: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ToyState {
    pub pc: [u8; 2],
    pub lock: bool,
}

pub const NCS: u8 = 0;
pub const TRY: u8 = 1;
pub const CS: u8 = 2;

impl TransitionSystem for ToyMutex {
    type State = ToyState;
    type Action = u8;

    fn initial_state(&self) -> ToyState {
        ToyState {
            pc: [NCS, NCS],
            lock: false,
        }
    }

    fn actions(&self, s: &ToyState, out: &mut Vec<u8>) {
        out.clear();
        for p in 0..2 {
            let blocked = self.locked && s.pc[p] == TRY && s.lock;
            if !blocked {
                out.push(p as u8);
            }
        }
    }

    fn step(&self, s: &ToyState, p: u8) -> Step<ToyState> {
        let mut n = *s;
        let i = p as usize;
        n.pc[i] = match s.pc[i] {
            NCS => TRY,
            TRY => {
                if self.locked {
                    n.lock = true;
                }
                CS
            }
            _ => {
                if self.locked {
                    n.lock = false;
                }
                NCS
            }
        };
        let mut step = Step::plain(n, s.pc[i] as u16 + 3 * i as u16);
        if n.pc == [CS, CS] {
            step.violation = Some(Violation::new(
                Check::Fixture("mutual-exclusion"),
                "both in CS",
            ));
        }
        step
    }

    fn encode(&self, s: &ToyState, out: &mut Vec<u8>) {
        out.extend_from_slice(&[s.pc[0], s.pc[1], s.lock as u8]);
    }

    fn describe(&self, p: u8) -> ActionInfo {
        info(p, p as u16, "step")
    }

    fn statement_count(&self) -> usize {
        6
    }
}

impl Propositions for ToyMutex {
    fn prop_index(&self, name: &str) -> Option<usize> {
        ["cs1", "cs2", "try1", "try2"]
            .iter()
            .position(|&n| n == name)
    }

    fn eval_prop(&self, s: &ToyState, index: usize) -> bool {
        match index {
            0 => s.pc[0] == CS,
            1 => s.pc[1] == CS,
            2 => s.pc[0] == TRY,
            _ => s.pc[1] == TRY,
        }
    }
}

/// Two independent toggles; `p` is "a = 1" and `q` is "b = 1". Nothing
/// forces the scheduler to ever run b.
pub struct UnfairToy;

impl TransitionSystem for UnfairToy {
    type State = (u8, u8);
    type Action = u8;

    fn initial_state(&self) -> (u8, u8) {
        (0, 0)
    }

    fn actions(&self, _: &(u8, u8), out: &mut Vec<u8>) {
        out.clear();
        out.extend([0, 1]);
    }

    fn step(&self, &(a, b): &(u8, u8), which: u8) -> Step<(u8, u8)> {
        let next = if which == 0 { (a ^ 1, b) } else { (a, b ^ 1) };
        Step::plain(next, which as u16)
    }

    fn encode(&self, s: &(u8, u8), out: &mut Vec<u8>) {
        out.extend_from_slice(&[s.0, s.1]);
    }

    fn describe(&self, a: u8) -> ActionInfo {
        info(a, a as u16, "toggle")
    }

    fn statement_count(&self) -> usize {
        2
    }
}

impl Propositions for UnfairToy {
    fn prop_index(&self, name: &str) -> Option<usize> {
        ["p", "q"].iter().position(|&n| n == name)
    }

    fn eval_prop(&self, s: &(u8, u8), index: usize) -> bool {
        if index == 0 {
            s.0 == 1
        } else {
            s.1 == 1
        }
    }
}

/// Two user tasks racing through the mutex fast path (ldrex, strex, and
/// the matching unlock), driven by the kernel's own LL/SC and exception
/// code. An interrupt may arrive between any two instructions; its return
/// may switch to the other task.
pub struct LlscRace {
    pub layout: Layout,
    pub shape: Shape,
    /// Keep the mark across exception return (a monitor that is never
    /// cleared), to show the checks catch it.
    pub broken_monitor: bool,
}

/// Task program counters.
pub const L_LDREX: u8 = 0;
pub const L_STREX: u8 = 1;
pub const U_LDREX: u8 = 2;
pub const U_STREX: u8 = 3;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LlscState {
    pub k: GlobalState,
    pub pc: [u8; 2],
    /// A strex already succeeded since the last ldrex.
    pub epoch_success: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LlscAction {
    Task,
    ITake,
    /// Exception return, optionally switching to the other task first.
    Iret {
        switch: bool,
    },
}

pub const LLSC_STRINGS: [&str; 8] = [
    "lock ldrex",
    "lock strex ok",
    "lock strex fail",
    "unlock ldrex",
    "unlock strex ok",
    "unlock strex fail",
    "itake",
    "iret",
];

impl LlscRace {
    pub fn new(broken_monitor: bool) -> LlscRace {
        let cfg = Config::default();
        let layout = Layout::new(&cfg);
        let shape = Shape::new(&cfg, &layout);
        LlscRace {
            layout,
            shape,
            broken_monitor,
        }
    }

    fn task_index(&self, s: &LlscState) -> usize {
        let t = s.k.at_stack.first().copied().unwrap_or(s.k.at);
        if t == self.layout.task(0) {
            0
        } else {
            1
        }
    }
}

impl TransitionSystem for LlscRace {
    type State = LlscState;
    type Action = LlscAction;

    fn initial_state(&self) -> LlscState {
        let mut k = GlobalState::empty(&self.shape);
        k.at = self.layout.task(0);
        LlscState {
            k,
            pc: [L_LDREX, L_LDREX],
            epoch_success: false,
        }
    }

    fn actions(&self, s: &LlscState, out: &mut Vec<LlscAction>) {
        out.clear();
        if self.layout.is_user_level(s.k.at) {
            out.push(LlscAction::Task);
            out.push(LlscAction::ITake);
        } else {
            out.push(LlscAction::Iret { switch: false });
            out.push(LlscAction::Iret { switch: true });
        }
    }

    fn step(&self, s: &LlscState, a: LlscAction) -> Step<LlscState> {
        let mut n = s.clone();
        let mut violation = None;
        let stmt;
        match a {
            LlscAction::Task => {
                let i = self.task_index(s);
                let me = self.layout.task(i);
                match s.pc[i] {
                    L_LDREX => {
                        let free = services::lock_ldrex(&mut n.k);
                        n.epoch_success = false;
                        n.pc[i] = if free { L_STREX } else { L_LDREX };
                        stmt = 0;
                    }
                    L_STREX => {
                        let held_by_other = n.k.mutex.owner.is_some_and(|o| o != me);
                        if services::lock_strex(&mut n.k, me) {
                            if s.epoch_success || held_by_other {
                                violation = Some(Violation::new(
                                    Check::Fixture("one-strex-per-epoch"),
                                    "second strex success on one mark",
                                ));
                            }
                            n.epoch_success = true;
                            n.pc[i] = U_LDREX;
                            stmt = 1;
                        } else {
                            n.pc[i] = L_LDREX;
                            stmt = 2;
                        }
                    }
                    U_LDREX => {
                        services::unlock_ldrex(&mut n.k);
                        n.epoch_success = false;
                        n.pc[i] = U_STREX;
                        stmt = 3;
                    }
                    _ => {
                        if services::unlock_strex(&mut n.k) {
                            n.epoch_success = true;
                            n.pc[i] = L_LDREX;
                            stmt = 4;
                        } else {
                            n.pc[i] = U_LDREX;
                            stmt = 5;
                        }
                    }
                }
                let holders = n.pc.iter().filter(|&&p| p >= U_LDREX).count();
                if holders > 1 && violation.is_none() {
                    violation = Some(Violation::new(
                        Check::Fixture("mutual-exclusion"),
                        "both tasks hold the mutex",
                    ));
                }
            }
            LlscAction::ITake => {
                exception::itake(&mut n.k, &self.layout, self.layout.systick(), HANDLER_BODY)
                    .unwrap();
                stmt = 6;
            }
            LlscAction::Iret { switch } => {
                if switch {
                    let i = self.task_index(s);
                    n.k.at_stack[0] = self.layout.task(1 - i);
                }
                let mark = n.k.monitor.marked;
                exception::iret(&mut n.k, &self.layout, |_| HANDLER_BODY).unwrap();
                if self.broken_monitor {
                    n.k.monitor.marked = mark;
                } else if n.k.monitor.marked.is_some() {
                    violation = Some(Violation::new(
                        Check::Fixture("monitor-clear"),
                        "mark survived iret",
                    ));
                }
                stmt = 7;
            }
        }
        let mut step = Step::plain(n, stmt);
        step.violation = violation;
        step
    }

    fn encode(&self, s: &LlscState, out: &mut Vec<u8>) {
        s.k.encode(&self.shape, out);
        out.extend_from_slice(&[s.pc[0], s.pc[1], s.epoch_success as u8]);
    }

    fn describe(&self, a: LlscAction) -> ActionInfo {
        let (owner, label) = match a {
            LlscAction::Task => (0, "task"),
            LlscAction::ITake => (self.layout.systick().0, "itake"),
            LlscAction::Iret { .. } => (self.layout.systick().0, "iret"),
        };
        info(owner, 0, label)
    }

    fn statement_count(&self) -> usize {
        LLSC_STRINGS.len()
    }
}

pub fn pid(p: u8) -> Pid {
    Pid(p)
}

/// Explicit graph with node 0 initial, for nested-DFS oracle tests.
pub struct RandomGraph {
    pub succ: Vec<Vec<u32>>,
    pub accepting: Vec<bool>,
}

impl ProductGraph for RandomGraph {
    type Node = u32;
    type Move = u32;

    fn initial(&self, out: &mut Vec<u32>) {
        out.clear();
        out.push(0);
    }

    fn start(&self, m: u32) -> u32 {
        m
    }

    fn moves(&self, n: &u32, out: &mut Vec<u32>) {
        out.clear();
        out.extend(&self.succ[*n as usize]);
    }

    fn apply(&self, _: &u32, m: u32) -> u32 {
        m
    }

    fn accepting(&self, n: &u32) -> bool {
        self.accepting[*n as usize]
    }

    fn encode(&self, n: &u32, out: &mut Vec<u8>) {
        out.extend_from_slice(&n.to_le_bytes());
    }
}

/// Sparse random graph: out-degree 0..=3, a few accepting nodes, with a
/// bias toward back edges so cycles are common.
pub fn random_graph(rng: &mut impl Rng, n: usize) -> RandomGraph {
    let acc_rate = rng.random_range(0.0..0.05);
    let succ = (0..n)
        .map(|i| {
            let deg = rng.random_range(0..=3);
            (0..deg)
                .map(|_| {
                    if rng.random_bool(0.7) {
                        rng.random_range(i.saturating_sub(20)..n.min(i + 20)) as u32
                    } else {
                        rng.random_range(0..n) as u32
                    }
                })
                .collect()
        })
        .collect();
    let accepting = (0..n).map(|_| rng.random_bool(acc_rate)).collect();
    RandomGraph { succ, accepting }
}

/// Emptiness oracle via strongly connected components: some SCC reachable
/// from node 0 is non-trivial and contains an accepting node.
pub fn has_accepting_cycle(g: &RandomGraph) -> bool {
    let n = g.succ.len();
    let mut reach = vec![false; n];
    let mut work = vec![0usize];
    reach[0] = true;
    while let Some(v) = work.pop() {
        for &w in &g.succ[v] {
            if !reach[w as usize] {
                reach[w as usize] = true;
                work.push(w as usize);
            }
        }
    }
    let mut graph = DiGraph::<(), ()>::with_capacity(n, 0);
    let nodes: Vec<NodeIndex> = (0..n).map(|_| graph.add_node(())).collect();
    for (v, succ) in g.succ.iter().enumerate() {
        if reach[v] {
            for &w in succ {
                graph.add_edge(nodes[v], nodes[w as usize], ());
            }
        }
    }
    tarjan_scc(&graph).iter().any(|scc| {
        let members: HashSet<usize> = scc.iter().map(|n| n.index()).collect();
        let cyclic = scc.len() > 1 || g.succ[scc[0].index()].contains(&(scc[0].index() as u32));
        cyclic && members.iter().any(|&v| reach[v] && g.accepting[v])
    })
}

/// Calls `f` on every lasso word with `prefix.len() + cycle.len()` in
/// `min_len..=max_len` over `props` propositions.
pub fn for_each_word(
    props: usize,
    min_len: usize,
    max_len: usize,
    mut f: impl FnMut(&[u32], &[u32]),
) {
    let letters = 1u64 << props;
    let mut word = Vec::new();
    for len in min_len.max(1)..=max_len {
        let total = letters.pow(len as u32);
        for code in 0..total {
            word.clear();
            let mut c = code;
            for _ in 0..len {
                word.push((c % letters) as u32);
                c /= letters;
            }
            for p in 0..len {
                f(&word[..p], &word[p..]);
            }
        }
    }
}

/// Random lasso word with the given total length.
pub fn random_word(rng: &mut impl Rng, props: usize, len: usize) -> (Vec<u32>, Vec<u32>) {
    let p = rng.random_range(0..len);
    let word: Vec<u32> = (0..len)
        .map(|_| rng.random_range(0..1u32 << props))
        .collect();
    (word[..p].to_vec(), word[p..].to_vec())
}

/// Random formula over `a`, `b`, `c` with nesting depth at most `depth`.
pub fn random_formula(rng: &mut impl Rng, depth: usize) -> Formula {
    if depth == 0 || rng.random_bool(0.2) {
        return match rng.random_range(0..8) {
            0 => Formula::True,
            1 => Formula::False,
            i => Formula::prop(["a", "b", "c"][i % 3]),
        };
    }
    let d = depth - 1;
    match rng.random_range(0..6) {
        0 => Formula::not(random_formula(rng, d)),
        1 => Formula::globally(random_formula(rng, d)),
        2 => Formula::finally(random_formula(rng, d)),
        3 => Formula::and(random_formula(rng, d), random_formula(rng, d)),
        4 => Formula::or(random_formula(rng, d), random_formula(rng, d)),
        _ => Formula::implies(random_formula(rng, d), random_formula(rng, d)),
    }
}
