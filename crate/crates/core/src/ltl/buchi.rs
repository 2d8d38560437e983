//! Tableau translation from LTL to a Büchi automaton.
//!
//! The formula is put in negation normal form with `<>a = true U a` and
//! `[]a = false R a`, expanded into a generalized Büchi automaton by the
//! classic declarative tableau, then degeneralized with a counter. Useless
//! states are pruned and bisimilar states merged.
//!
//! Edges carry the guard of the state they enter, and runs start in a
//! dedicated initial state: `ι --g0--> q0 --g1--> q1 ...` reads the word
//! `w0 w1 ...` with `gi(wi)` holding.

use std::collections::{BTreeSet, HashMap, VecDeque};

use super::formula::Formula;

/// Conjunction of literals over proposition bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Guard {
    pub pos: u32,
    pub neg: u32,
}

impl Guard {
    pub const TRUE: Guard = Guard { pos: 0, neg: 0 };

    pub fn holds(self, valuation: u32) -> bool {
        valuation & self.pos == self.pos && valuation & self.neg == 0
    }

    /// `self` admits every valuation `other` admits.
    pub fn weaker_than(self, other: Guard) -> bool {
        self.pos & other.pos == self.pos && self.neg & other.neg == self.neg
    }

    pub fn render(self, props: &[String]) -> String {
        let mut lits = Vec::new();
        for (i, p) in props.iter().enumerate() {
            if self.pos >> i & 1 == 1 {
                lits.push(p.clone());
            }
            if self.neg >> i & 1 == 1 {
                lits.push(format!("!{p}"));
            }
        }
        if lits.is_empty() {
            "true".into()
        } else {
            lits.join(" && ")
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Buchi {
    /// Proposition names; bit `i` of a valuation is `props[i]`.
    pub props: Vec<String>,
    pub init: usize,
    pub edges: Vec<Vec<(Guard, usize)>>,
    pub accepting: Vec<bool>,
}

impl Buchi {
    pub fn state_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    /// Successor states of `q` when the next letter is `valuation`.
    pub fn successors(&self, q: usize, valuation: u32) -> impl Iterator<Item = usize> + '_ {
        self.edges[q]
            .iter()
            .filter(move |(g, _)| g.holds(valuation))
            .map(|&(_, t)| t)
    }

    /// True when no word is accepted.
    pub fn is_empty(&self) -> bool {
        self.edges[self.init].is_empty()
    }

    /// Membership of `prefix · cycle^ω`. `cycle` must be non-empty.
    pub fn accepts_lasso(&self, prefix: &[u32], cycle: &[u32]) -> bool {
        assert!(!cycle.is_empty());
        let p = prefix.len();
        let n = p + cycle.len();
        let letter = |i: usize| if i < p { prefix[i] } else { cycle[i - p] };
        let succ_pos = |i: usize| if i + 1 < n { i + 1 } else { p };
        let q_count = self.state_count();
        let node = |q: usize, i: usize| i * q_count + q;
        let total = n * q_count;
        let succs = |v: usize, out: &mut Vec<usize>| {
            out.clear();
            let (q, i) = (v % q_count, v / q_count);
            let j = succ_pos(i);
            out.extend(self.successors(q, letter(j)).map(|t| node(t, j)));
        };

        // Forward reachability from the initial edges.
        let mut reach = vec![false; total];
        let mut work: Vec<usize> = self
            .successors(self.init, letter(0))
            .map(|t| node(t, 0))
            .collect();
        for &v in &work {
            reach[v] = true;
        }
        let mut buf = Vec::new();
        while let Some(v) = work.pop() {
            succs(v, &mut buf);
            for &w in &buf {
                if !reach[w] {
                    reach[w] = true;
                    work.push(w);
                }
            }
        }
        // An accepting reachable node that reaches itself.
        let mut seen = vec![u32::MAX; total];
        for (v, &r) in reach.iter().enumerate() {
            if !r || !self.accepting[v % q_count] || v / q_count < p {
                continue;
            }
            let mark = v as u32;
            succs(v, &mut buf);
            let mut work: Vec<usize> = buf.clone();
            while let Some(w) = work.pop() {
                if w == v {
                    return true;
                }
                if seen[w] == mark {
                    continue;
                }
                seen[w] = mark;
                succs(w, &mut buf);
                work.extend_from_slice(&buf);
            }
        }
        false
    }

    /// Graphviz-free text rendering for diagnostics.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (q, edges) in self.edges.iter().enumerate() {
            let mark = if q == self.init { "init " } else { "" };
            let acc = if self.accepting[q] { " accepting" } else { "" };
            out.push_str(&format!("{mark}state {q}{acc}\n"));
            for (g, t) in edges {
                out.push_str(&format!("  [{}] -> {t}\n", g.render(&self.props)));
            }
        }
        out
    }
}

// Negation normal form over an interning arena.

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Nnf {
    True,
    False,
    Lit(usize, bool),
    And(usize, usize),
    Or(usize, usize),
    Until(usize, usize),
    Release(usize, usize),
}

#[derive(Default)]
struct Arena {
    nodes: Vec<Nnf>,
    ids: HashMap<Nnf, usize>,
}

impl Arena {
    fn intern(&mut self, n: Nnf) -> usize {
        if let Some(&id) = self.ids.get(&n) {
            return id;
        }
        self.nodes.push(n);
        self.ids.insert(n, self.nodes.len() - 1);
        self.nodes.len() - 1
    }

    fn build(&mut self, f: &Formula, positive: bool, props: &[String]) -> usize {
        let node = match (f, positive) {
            (Formula::True, true) | (Formula::False, false) => Nnf::True,
            (Formula::True, false) | (Formula::False, true) => Nnf::False,
            (Formula::Prop(p), pol) => Nnf::Lit(
                props.iter().position(|x| x == p).expect("prop indexed"),
                pol,
            ),
            (Formula::Not(a), pol) => return self.build(a, !pol, props),
            (Formula::And(a, b), true) | (Formula::Or(a, b), false) => Nnf::And(
                self.build(a, positive, props),
                self.build(b, positive, props),
            ),
            (Formula::Or(a, b), true) | (Formula::And(a, b), false) => Nnf::Or(
                self.build(a, positive, props),
                self.build(b, positive, props),
            ),
            (Formula::Implies(a, b), true) => {
                Nnf::Or(self.build(a, false, props), self.build(b, true, props))
            }
            (Formula::Implies(a, b), false) => {
                Nnf::And(self.build(a, true, props), self.build(b, false, props))
            }
            (Formula::Finally(a), true) | (Formula::Globally(a), false) => {
                let t = self.intern(Nnf::True);
                Nnf::Until(t, self.build(a, positive, props))
            }
            (Formula::Globally(a), true) | (Formula::Finally(a), false) => {
                let fl = self.intern(Nnf::False);
                Nnf::Release(fl, self.build(a, positive, props))
            }
        };
        self.intern(node)
    }
}

const INIT: usize = usize::MAX;

#[derive(Clone, Debug)]
struct TNode {
    incoming: BTreeSet<usize>,
    new: BTreeSet<usize>,
    old: BTreeSet<usize>,
    next: BTreeSet<usize>,
}

struct Tableau<'a> {
    arena: &'a Arena,
    done: Vec<TNode>,
}

impl Tableau<'_> {
    fn contradicts(&self, old: &BTreeSet<usize>, f: usize) -> bool {
        match self.arena.nodes[f] {
            Nnf::False => true,
            Nnf::Lit(p, pol) => old
                .iter()
                .any(|&g| self.arena.nodes[g] == Nnf::Lit(p, !pol)),
            _ => false,
        }
    }

    fn expand(&mut self, mut node: TNode) {
        let Some(&f) = node.new.iter().next() else {
            if let Some(existing) = self
                .done
                .iter_mut()
                .find(|d| d.old == node.old && d.next == node.next)
            {
                existing.incoming.extend(node.incoming);
                return;
            }
            let id = self.done.len();
            let succ = TNode {
                incoming: BTreeSet::from([id]),
                new: node.next.clone(),
                old: BTreeSet::new(),
                next: BTreeSet::new(),
            };
            self.done.push(node);
            self.expand(succ);
            return;
        };
        node.new.remove(&f);
        if node.old.contains(&f) {
            return self.expand(node);
        }
        match self.arena.nodes[f] {
            Nnf::True | Nnf::False | Nnf::Lit(..) => {
                if self.contradicts(&node.old, f) {
                    return;
                }
                node.old.insert(f);
                self.expand(node);
            }
            Nnf::And(a, b) => {
                node.old.insert(f);
                for g in [a, b] {
                    if !node.old.contains(&g) {
                        node.new.insert(g);
                    }
                }
                self.expand(node);
            }
            Nnf::Or(a, b) | Nnf::Until(a, b) | Nnf::Release(a, b) => {
                let (first_new, first_next, second_new): (Vec<usize>, Option<usize>, Vec<usize>) =
                    match self.arena.nodes[f] {
                        Nnf::Or(..) => (vec![a], None, vec![b]),
                        Nnf::Until(..) => (vec![a], Some(f), vec![b]),
                        _ => (vec![b], Some(f), vec![a, b]),
                    };
                node.old.insert(f);
                let mut n1 = node.clone();
                let mut n2 = node;
                for g in first_new {
                    if !n1.old.contains(&g) {
                        n1.new.insert(g);
                    }
                }
                if let Some(x) = first_next {
                    n1.next.insert(x);
                }
                for g in second_new {
                    if !n2.old.contains(&g) {
                        n2.new.insert(g);
                    }
                }
                self.expand(n1);
                self.expand(n2);
            }
        }
    }
}

/// Translates `f` (or `¬f` when `negate`) into a Büchi automaton over the
/// propositions of `f` in first-occurrence order.
pub fn to_buchi(f: &Formula, negate: bool) -> Buchi {
    let props = f.props();
    assert!(props.len() <= 32, "at most 32 propositions");
    let mut arena = Arena::default();
    let root = arena.build(f, !negate, &props);

    let mut tab = Tableau {
        arena: &arena,
        done: Vec::new(),
    };
    tab.expand(TNode {
        incoming: BTreeSet::from([INIT]),
        new: BTreeSet::from([root]),
        old: BTreeSet::new(),
        next: BTreeSet::new(),
    });
    let nodes = tab.done;

    let untils: Vec<(usize, usize)> = arena
        .nodes
        .iter()
        .enumerate()
        .filter_map(|(i, n)| match *n {
            Nnf::Until(_, b) => Some((i, b)),
            _ => None,
        })
        .collect();
    let in_f = |node: &TNode, k: usize| {
        let (u, b) = untils[k];
        !node.old.contains(&u) || node.old.contains(&b)
    };
    let guard = |node: &TNode| {
        let mut g = Guard::TRUE;
        for &x in &node.old {
            if let Nnf::Lit(p, pol) = arena.nodes[x] {
                if pol {
                    g.pos |= 1 << p;
                } else {
                    g.neg |= 1 << p;
                }
            }
        }
        g
    };

    let k = untils.len();
    let copies = k.max(1);
    let state = |n: usize, i: usize| 1 + n * copies + i;
    let total = 1 + nodes.len() * copies;
    let mut edges = vec![Vec::new(); total];
    let mut accepting = vec![false; total];
    for (n, node) in nodes.iter().enumerate() {
        let g = guard(node);
        for &m in &node.incoming {
            if m == INIT {
                edges[0].push((g, state(n, 0)));
                continue;
            }
            for i in 0..copies {
                let j = if k > 0 && in_f(&nodes[m], i) {
                    (i + 1) % k
                } else {
                    i
                };
                edges[state(m, i)].push((g, state(n, j)));
            }
        }
        accepting[state(n, 0)] = k == 0 || in_f(node, 0);
    }
    let raw = Buchi {
        props,
        init: 0,
        edges,
        accepting,
    };
    minimize(&prune(&raw))
}

/// Keeps states reachable from the initial state that can still reach an
/// accepting cycle.
fn prune(b: &Buchi) -> Buchi {
    let n = b.state_count();
    let fwd = |from: &[usize]| {
        let mut seen = vec![false; n];
        let mut work: VecDeque<usize> = from.iter().copied().collect();
        while let Some(q) = work.pop_front() {
            for &(_, t) in &b.edges[q] {
                if !seen[t] {
                    seen[t] = true;
                    work.push_back(t);
                }
            }
        }
        seen
    };
    let reachable = {
        let mut r = fwd(&[b.init]);
        r[b.init] = true;
        r
    };
    // Accepting states on a cycle: they reach themselves in >= 1 step.
    let cyclic: Vec<usize> = (0..n)
        .filter(|&q| reachable[q] && b.accepting[q] && fwd(&[q])[q])
        .collect();
    // Backward closure from the cyclic accepting states.
    let mut preds = vec![Vec::new(); n];
    for (q, es) in b.edges.iter().enumerate() {
        for &(_, t) in es {
            preds[t].push(q);
        }
    }
    let mut useful = vec![false; n];
    let mut work = cyclic.clone();
    for &q in &cyclic {
        useful[q] = true;
    }
    while let Some(q) = work.pop() {
        for &p in &preds[q] {
            if !useful[p] {
                useful[p] = true;
                work.push(p);
            }
        }
    }
    let keep: Vec<usize> = (0..n)
        .filter(|&q| q == b.init || (reachable[q] && useful[q]))
        .collect();
    let index: HashMap<usize, usize> = keep.iter().enumerate().map(|(i, &q)| (q, i)).collect();
    let edges = keep
        .iter()
        .map(|&q| {
            let mut es: Vec<(Guard, usize)> = b.edges[q]
                .iter()
                .filter_map(|&(g, t)| index.get(&t).map(|&t2| (g, t2)))
                .collect();
            simplify_edges(&mut es);
            es
        })
        .collect();
    Buchi {
        props: b.props.clone(),
        init: index[&b.init],
        edges,
        accepting: keep.iter().map(|&q| b.accepting[q]).collect(),
    }
}

/// Sorts edges and drops those subsumed by a weaker guard to the same target.
fn simplify_edges(es: &mut Vec<(Guard, usize)>) {
    es.sort_unstable_by_key(|&(g, t)| (t, g));
    es.dedup();
    let copy = es.clone();
    es.retain(|&(g, t)| {
        !copy
            .iter()
            .any(|&(h, u)| u == t && h != g && h.weaker_than(g))
    });
}

/// Merges bisimilar states by partition refinement.
fn minimize(b: &Buchi) -> Buchi {
    let n = b.state_count();
    let mut block: Vec<usize> = (0..n).map(|q| b.accepting[q] as usize).collect();
    loop {
        let mut sigs: HashMap<(usize, Vec<(Guard, usize)>), usize> = HashMap::new();
        let mut next = vec![0; n];
        for q in 0..n {
            let mut es: Vec<(Guard, usize)> =
                b.edges[q].iter().map(|&(g, t)| (g, block[t])).collect();
            simplify_edges(&mut es);
            let len = sigs.len();
            next[q] = *sigs.entry((block[q], es)).or_insert(len);
        }
        let stable = sigs.len() == block.iter().collect::<BTreeSet<_>>().len();
        block = next;
        if stable {
            break;
        }
    }
    // Renumber blocks in order of first state so the result is canonical.
    let mut order: HashMap<usize, usize> = HashMap::new();
    for &b in &block[..n] {
        let len = order.len();
        order.entry(b).or_insert(len);
    }
    let count = order.len();
    let mut edges = vec![Vec::new(); count];
    let mut accepting = vec![false; count];
    for q in 0..n {
        let bq = order[&block[q]];
        accepting[bq] = b.accepting[q];
        if edges[bq].is_empty() {
            let mut es: Vec<(Guard, usize)> = b.edges[q]
                .iter()
                .map(|&(g, t)| (g, order[&block[t]]))
                .collect();
            simplify_edges(&mut es);
            edges[bq] = es;
        }
    }
    Buchi {
        props: b.props.clone(),
        init: order[&block[b.init]],
        edges,
        accepting,
    }
}
