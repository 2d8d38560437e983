//! LTL verification of a transition system: negate, translate, search the
//! product, and turn the witness into a trace.

use super::buchi::{to_buchi, Buchi};
use super::formula::Formula;
use super::ndfs::{nested_dfs, NdfsOutcome, Product, ProductMove};
use crate::error::{LtlError, TraceError};
use crate::explorer::{
    state_digest, Limits, Propositions, SearchStats, TraceStep, Verdict, STUTTER_STMT,
};

pub struct LtlOutcome<A> {
    pub verdict: Verdict<ProductMove<A>>,
    pub stats: SearchStats,
    pub never_claim: Buchi,
}

/// Model proposition index for each proposition of `f`, in first-occurrence order.
pub fn bind<T: Propositions>(ts: &T, f: &Formula) -> Result<Vec<usize>, LtlError> {
    let props = f.props();
    if props.len() > 32 {
        return Err(LtlError::TooManyPropositions(props.len()));
    }
    props
        .iter()
        .map(|p| {
            ts.prop_index(p)
                .ok_or_else(|| LtlError::UnknownProposition(p.clone()))
        })
        .collect()
}

/// Searches for a run of `ts` violating `f`. The search looks for
/// acceptance cycles only: safety violations along the way are not
/// reported, and states without successors repeat forever.
pub fn verify_ltl<T: Propositions>(
    ts: &T,
    f: &Formula,
    limits: &Limits,
) -> Result<LtlOutcome<T::Action>, LtlError> {
    let bindings = bind(ts, f)?;
    let never_claim = to_buchi(f, true);
    let product = Product::new(ts, &never_claim, bindings);
    let NdfsOutcome { verdict, stats } = nested_dfs(&product, limits);
    Ok(LtlOutcome {
        verdict,
        stats,
        never_claim,
    })
}

/// Replays a product lasso against the model alone. Returns the steps and
/// the index of the first cycle step. Stutter steps appear with
/// [`STUTTER_STMT`].
pub fn lasso_trace<T: Propositions>(
    ts: &T,
    prefix: &[ProductMove<T::Action>],
    cycle: &[ProductMove<T::Action>],
) -> Result<(Vec<TraceStep>, usize), TraceError> {
    let mut s = ts.initial_state();
    let mut steps = Vec::new();
    let mut cycle_at = 0;
    let mut enabled = Vec::new();
    let moves = prefix.iter().chain(cycle);
    for (i, m) in moves.enumerate() {
        if i == prefix.len() {
            cycle_at = steps.len();
        }
        let n = steps.len() + 1;
        match *m {
            ProductMove::Init(_) => {
                if i != 0 {
                    return Err(TraceError::NotEnabled { step: n });
                }
            }
            ProductMove::Model(a, _) => {
                ts.actions(&s, &mut enabled);
                if !enabled.contains(&a) {
                    return Err(TraceError::NotEnabled { step: n });
                }
                s = ts.step(&s, a).state;
                let info = ts.describe(a);
                steps.push(TraceStep {
                    step: n,
                    owner: info.owner,
                    stmt: info.stmt,
                    label: info.label,
                    text: info.text,
                    digest: state_digest(ts, &s),
                });
            }
            ProductMove::Stutter(_) => {
                ts.actions(&s, &mut enabled);
                if !enabled.is_empty() {
                    return Err(TraceError::NotEnabled { step: n });
                }
                steps.push(TraceStep {
                    step: n,
                    owner: 0,
                    stmt: STUTTER_STMT,
                    label: "stutter",
                    text: "no enabled transition".into(),
                    digest: state_digest(ts, &s),
                });
            }
        }
    }
    if cycle.is_empty() {
        cycle_at = steps.len();
    }
    Ok((steps, cycle_at))
}

/// Valuation word of a lasso (one letter per state entered, starting with
/// the initial state), for checking witnesses against the direct evaluator.
pub fn lasso_word<T: Propositions>(
    ts: &T,
    bindings: &[usize],
    prefix: &[ProductMove<T::Action>],
    cycle: &[ProductMove<T::Action>],
) -> (Vec<u32>, Vec<u32>) {
    let val = |s: &T::State| {
        bindings
            .iter()
            .enumerate()
            .filter(|&(_, &p)| ts.eval_prop(s, p))
            .fold(0u32, |v, (i, _)| v | 1 << i)
    };
    let mut s = ts.initial_state();
    let mut advance = |m: &ProductMove<T::Action>| {
        match *m {
            ProductMove::Init(_) => s = ts.initial_state(),
            ProductMove::Model(a, _) => s = ts.step(&s, a).state,
            ProductMove::Stutter(_) => {}
        }
        val(&s)
    };
    let pre = prefix.iter().map(&mut advance).collect();
    let cyc = cycle.iter().map(&mut advance).collect();
    (pre, cyc)
}
