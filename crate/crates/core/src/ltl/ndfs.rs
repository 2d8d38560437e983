//! Nested depth-first search for accepting cycles, and the on-the-fly
//! product of a transition system with a Büchi automaton.

use std::fmt;
use std::time::Instant;

use rustc_hash::FxHashMap;

use super::buchi::Buchi;
use crate::explorer::{Incomplete, Limits, Propositions, SearchStats, Verdict, STORE_OVERHEAD};

/// A graph explored by [`nested_dfs`]. Successors are listed as moves and
/// materialized on demand, so a search stack holds one node per frame.
pub trait ProductGraph {
    type Node: Clone;
    type Move: Copy + PartialEq + fmt::Debug;

    fn initial(&self, out: &mut Vec<Self::Move>);
    /// The node an initial move leads to.
    fn start(&self, m: Self::Move) -> Self::Node;
    fn moves(&self, n: &Self::Node, out: &mut Vec<Self::Move>);
    fn apply(&self, n: &Self::Node, m: Self::Move) -> Self::Node;
    fn accepting(&self, n: &Self::Node) -> bool;
    fn encode(&self, n: &Self::Node, out: &mut Vec<u8>);
}

const BLUE: u8 = 1;
const RED: u8 = 2;
const CYAN: u8 = 4;

struct Frame<N, M> {
    node: N,
    key: Box<[u8]>,
    moves: Vec<M>,
    next: usize,
}

pub struct NdfsOutcome<M> {
    pub verdict: Verdict<M>,
    pub stats: SearchStats,
}

/// Classic blue/red nested DFS. The red search stops as soon as it touches
/// a state on the blue stack, which closes an accepting cycle. The returned
/// lasso starts with the initial move; `cycle` leads from the cycle's entry
/// state back to itself.
pub fn nested_dfs<G: ProductGraph>(g: &G, limits: &Limits) -> NdfsOutcome<G::Move> {
    let start = Instant::now();
    let mut stats = SearchStats::default();
    let mut flags: FxHashMap<Box<[u8]>, u8> = FxHashMap::default();
    let mut key_bytes = 0u64;
    let mut buf = Vec::new();
    let mut truncated = false;
    let mut roots = Vec::new();
    g.initial(&mut roots);

    let key_of = |n: &G::Node, buf: &mut Vec<u8>| -> Box<[u8]> {
        buf.clear();
        g.encode(n, buf);
        buf.as_slice().into()
    };
    let finish =
        |verdict, mut stats: SearchStats, flags: &FxHashMap<Box<[u8]>, u8>, key_bytes: u64| {
            stats.states_stored = flags.len() as u64;
            stats.elapsed = start.elapsed();
            stats.memory_estimate = key_bytes + flags.len() as u64 * (STORE_OVERHEAD + 1);
            NdfsOutcome { verdict, stats }
        };

    for &root in &roots {
        let node = g.start(root);
        let key = key_of(&node, &mut buf);
        if flags.get(&key).is_some_and(|f| f & BLUE != 0) {
            continue;
        }
        key_bytes += key.len() as u64;
        flags.insert(key.clone(), BLUE | CYAN);
        let mut moves = Vec::new();
        g.moves(&node, &mut moves);
        let mut blue = vec![Frame {
            node,
            key,
            moves,
            next: 0,
        }];
        // Move that led into each blue frame (the root's is `root`).
        let mut blue_moves = vec![root];

        while let Some(top) = blue.last_mut() {
            if top.next < top.moves.len() {
                let m = top.moves[top.next];
                top.next += 1;
                let succ = g.apply(&top.node, m);
                stats.transitions_fired += 1;
                let key = key_of(&succ, &mut buf);
                if flags.get(&key).is_some_and(|f| f & BLUE != 0) {
                    continue;
                }
                if blue.len() > limits.max_depth {
                    truncated = true;
                    continue;
                }
                if limits.max_states.is_some_and(|cap| flags.len() >= cap) {
                    return finish(
                        Verdict::Incomplete(Incomplete::States),
                        stats,
                        &flags,
                        key_bytes,
                    );
                }
                key_bytes += key.len() as u64;
                *flags.entry(key.clone()).or_insert(0) |= BLUE | CYAN;
                let mut moves = Vec::new();
                g.moves(&succ, &mut moves);
                blue.push(Frame {
                    node: succ,
                    key,
                    moves,
                    next: 0,
                });
                blue_moves.push(m);
                stats.max_depth = stats.max_depth.max(blue.len() as u64 - 1);
                continue;
            }
            // Post-order: launch the red search from accepting states.
            if g.accepting(&top.node) {
                if let Some(red_moves) = red_search(g, top, &mut flags, &mut stats, &mut buf) {
                    let (target_key, red_path) = red_moves;
                    let entry = blue
                        .iter()
                        .position(|f| f.key == target_key)
                        .expect("cyan state is on the blue stack");
                    let prefix = blue_moves[..=entry].to_vec();
                    let mut cycle = blue_moves[entry + 1..].to_vec();
                    cycle.extend(red_path);
                    return finish(
                        Verdict::AcceptanceCycle { prefix, cycle },
                        stats,
                        &flags,
                        key_bytes,
                    );
                }
            }
            let done = blue.pop().expect("non-empty");
            blue_moves.pop();
            if let Some(f) = flags.get_mut(&done.key) {
                *f &= !CYAN;
            }
        }
    }
    let verdict = if truncated {
        Verdict::Incomplete(Incomplete::Depth)
    } else {
        Verdict::Pass
    };
    finish(verdict, stats, &flags, key_bytes)
}

type RedHit<M> = (Box<[u8]>, Vec<M>);

/// Red DFS from `seed`. Returns the key of the cyan state reached and the
/// moves from `seed` to it.
fn red_search<G: ProductGraph>(
    g: &G,
    seed: &Frame<G::Node, G::Move>,
    flags: &mut FxHashMap<Box<[u8]>, u8>,
    stats: &mut SearchStats,
    buf: &mut Vec<u8>,
) -> Option<RedHit<G::Move>> {
    let mut moves = Vec::new();
    g.moves(&seed.node, &mut moves);
    let mut stack: Vec<(G::Node, Vec<G::Move>, usize)> = vec![(seed.node.clone(), moves, 0)];
    let mut path: Vec<G::Move> = Vec::new();
    while let Some((node, moves, next)) = stack.last_mut() {
        if *next == moves.len() {
            stack.pop();
            path.pop();
            continue;
        }
        let m = moves[*next];
        *next += 1;
        let succ = g.apply(node, m);
        stats.transitions_fired += 1;
        buf.clear();
        g.encode(&succ, buf);
        let f = flags.get(buf.as_slice()).copied().unwrap_or(0);
        if f & CYAN != 0 {
            path.push(m);
            return Some((buf.as_slice().into(), path));
        }
        if f & RED != 0 {
            continue;
        }
        // Red only visits blue-visited states, so the key is present.
        if let Some(slot) = flags.get_mut(buf.as_slice()) {
            *slot |= RED;
        } else {
            continue;
        }
        let mut succ_moves = Vec::new();
        g.moves(&succ, &mut succ_moves);
        path.push(m);
        stack.push((succ, succ_moves, 0));
    }
    None
}

/// Move in the product of a model with a Büchi automaton.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProductMove<A> {
    /// Start in the model's initial state with the automaton in `q`.
    Init(u32),
    /// Fire a model action; the automaton moves to `q`.
    Model(A, u32),
    /// The model has no enabled action and repeats its state.
    Stutter(u32),
}

impl<A> ProductMove<A> {
    pub fn automaton_state(&self) -> u32 {
        match *self {
            ProductMove::Init(q) | ProductMove::Model(_, q) | ProductMove::Stutter(q) => q,
        }
    }
}

/// On-the-fly synchronous product: the automaton reads the valuation of
/// each model state entered.
pub struct Product<'a, T: Propositions> {
    pub model: &'a T,
    pub buchi: &'a Buchi,
    /// Model proposition index for each automaton proposition bit.
    pub bind: Vec<usize>,
}

impl<'a, T: Propositions> Product<'a, T> {
    pub fn new(model: &'a T, buchi: &'a Buchi, bind: Vec<usize>) -> Self {
        Product { model, buchi, bind }
    }

    pub fn valuation(&self, s: &T::State) -> u32 {
        self.bind
            .iter()
            .enumerate()
            .filter(|&(_, &p)| self.model.eval_prop(s, p))
            .fold(0, |v, (i, _)| v | 1 << i)
    }

    fn automaton_moves(&self, q: usize, s: &T::State, out: &mut Vec<u32>) {
        let v = self.valuation(s);
        out.extend(self.buchi.successors(q, v).map(|t| t as u32));
    }
}

impl<T: Propositions> ProductGraph for Product<'_, T> {
    type Node = (T::State, u32);
    type Move = ProductMove<T::Action>;

    fn initial(&self, out: &mut Vec<Self::Move>) {
        out.clear();
        let s0 = self.model.initial_state();
        let mut qs = Vec::new();
        self.automaton_moves(self.buchi.init, &s0, &mut qs);
        out.extend(qs.into_iter().map(ProductMove::Init));
    }

    fn start(&self, m: Self::Move) -> Self::Node {
        (self.model.initial_state(), m.automaton_state())
    }

    fn moves(&self, (s, q): &Self::Node, out: &mut Vec<Self::Move>) {
        out.clear();
        let mut actions = Vec::new();
        self.model.actions(s, &mut actions);
        let mut qs = Vec::new();
        if actions.is_empty() {
            self.automaton_moves(*q as usize, s, &mut qs);
            out.extend(qs.into_iter().map(ProductMove::Stutter));
            return;
        }
        for a in actions {
            let next = self.model.step(s, a).state;
            qs.clear();
            self.automaton_moves(*q as usize, &next, &mut qs);
            out.extend(qs.iter().map(|&t| ProductMove::Model(a, t)));
        }
    }

    fn apply(&self, (s, _): &Self::Node, m: Self::Move) -> Self::Node {
        match m {
            ProductMove::Init(q) => (self.model.initial_state(), q),
            ProductMove::Model(a, q) => (self.model.step(s, a).state, q),
            ProductMove::Stutter(q) => (s.clone(), q),
        }
    }

    fn accepting(&self, (_, q): &Self::Node) -> bool {
        self.buchi.accepting[*q as usize]
    }

    fn encode(&self, (s, q): &Self::Node, out: &mut Vec<u8>) {
        self.model.encode(s, out);
        out.extend_from_slice(&(*q as u16).to_le_bytes());
    }
}

/// Product nodes visited by a lasso's prefix and cycle.
pub type ReplayedLasso<N> = (Vec<N>, Vec<N>);

/// Why a lasso failed to replay.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LassoReplayError {
    BadStart,
    NotEnabled { step: usize },
    CycleNotClosed,
    NoAcceptingState,
}

/// Replays a lasso through the product, checking every move is available,
/// the cycle returns to its entry state and passes an accepting state.
/// Returns the product nodes visited by prefix and cycle.
pub fn replay_lasso<G: ProductGraph>(
    g: &G,
    prefix: &[G::Move],
    cycle: &[G::Move],
) -> Result<ReplayedLasso<G::Node>, LassoReplayError> {
    let mut roots = Vec::new();
    g.initial(&mut roots);
    let (&first, rest) = prefix.split_first().ok_or(LassoReplayError::BadStart)?;
    if !roots.contains(&first) {
        return Err(LassoReplayError::BadStart);
    }
    let mut node = g.start(first);
    let mut moves = Vec::new();
    let mut pre = vec![node.clone()];
    for (i, &m) in rest.iter().enumerate() {
        g.moves(&node, &mut moves);
        if !moves.contains(&m) {
            return Err(LassoReplayError::NotEnabled { step: i + 1 });
        }
        node = g.apply(&node, m);
        pre.push(node.clone());
    }
    let mut entry = Vec::new();
    g.encode(&node, &mut entry);
    let mut cyc = Vec::new();
    let mut accepting = false;
    for (i, &m) in cycle.iter().enumerate() {
        g.moves(&node, &mut moves);
        if !moves.contains(&m) {
            return Err(LassoReplayError::NotEnabled {
                step: prefix.len() + i,
            });
        }
        node = g.apply(&node, m);
        accepting |= g.accepting(&node);
        cyc.push(node.clone());
    }
    let mut end = Vec::new();
    g.encode(&node, &mut end);
    if cycle.is_empty() || end != entry {
        return Err(LassoReplayError::CycleNotClosed);
    }
    if !accepting {
        return Err(LassoReplayError::NoAcceptingState);
    }
    Ok((pre, cyc))
}
