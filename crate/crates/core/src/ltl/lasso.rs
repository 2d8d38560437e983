//! Direct LTL evaluation on ultimately periodic words `prefix · cycle^ω`.

use super::formula::Formula;

/// A word of proposition valuations; bit `i` of a letter is proposition `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LassoWord {
    pub prefix: Vec<u32>,
    pub cycle: Vec<u32>,
}

impl LassoWord {
    pub fn len(&self) -> usize {
        self.prefix.len() + self.cycle.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn letter(&self, i: usize) -> u32 {
        if i < self.prefix.len() {
            self.prefix[i]
        } else {
            self.cycle[i - self.prefix.len()]
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum LassoError {
    #[error("lasso cycle must be non-empty")]
    EmptyCycle,
    #[error("proposition `{0}` not in the valuation alphabet")]
    UnknownProp(String),
}

/// Evaluates `f` at position 0 of the word. `props[i]` names bit `i`.
pub fn check_ltl_on_lasso(
    f: &Formula,
    props: &[String],
    word: &LassoWord,
) -> Result<bool, LassoError> {
    if word.cycle.is_empty() {
        return Err(LassoError::EmptyCycle);
    }
    let ev = Eval {
        word,
        props,
        n: word.len(),
        p: word.prefix.len(),
    };
    Ok(ev.eval(f)?[0])
}

struct Eval<'a> {
    word: &'a LassoWord,
    props: &'a [String],
    n: usize,
    p: usize,
}

impl Eval<'_> {
    /// Truth of `f` at each position.
    fn eval(&self, f: &Formula) -> Result<Vec<bool>, LassoError> {
        let zip = |a: Vec<bool>, b: Vec<bool>, op: fn(bool, bool) -> bool| -> Vec<bool> {
            a.into_iter().zip(b).map(|(x, y)| op(x, y)).collect()
        };
        Ok(match f {
            Formula::True => vec![true; self.n],
            Formula::False => vec![false; self.n],
            Formula::Prop(name) => {
                let bit = self
                    .props
                    .iter()
                    .position(|p| p == name)
                    .ok_or_else(|| LassoError::UnknownProp(name.clone()))?;
                (0..self.n)
                    .map(|i| self.word.letter(i) >> bit & 1 == 1)
                    .collect()
            }
            Formula::Not(a) => self.eval(a)?.into_iter().map(|x| !x).collect(),
            Formula::And(a, b) => zip(self.eval(a)?, self.eval(b)?, |x, y| x && y),
            Formula::Or(a, b) => zip(self.eval(a)?, self.eval(b)?, |x, y| x || y),
            Formula::Implies(a, b) => zip(self.eval(a)?, self.eval(b)?, |x, y| !x || y),
            Formula::Globally(a) => self.quantify(self.eval(a)?, true),
            Formula::Finally(a) => self.quantify(self.eval(a)?, false),
        })
    }

    /// `[]` (`all`) or `<>` over the future of each position. Every cycle
    /// position sees the whole cycle; a prefix position sees itself and
    /// the future of the next position.
    fn quantify(&self, m: Vec<bool>, all: bool) -> Vec<bool> {
        let cyc = if all {
            m[self.p..].iter().all(|&x| x)
        } else {
            m[self.p..].iter().any(|&x| x)
        };
        let mut out = vec![cyc; self.n];
        for i in (0..self.p).rev() {
            out[i] = if all {
                m[i] && out[i + 1]
            } else {
                m[i] || out[i + 1]
            };
        }
        out
    }
}
