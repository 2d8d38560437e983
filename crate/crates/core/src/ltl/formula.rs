//! LTL formulas over named propositions: `[]`, `<>`, `!`, `&&`, `||`, `->`.

use std::fmt;

use crate::error::LtlError;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Prop(String),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Globally(Box<Formula>),
    Finally(Box<Formula>),
}

impl Formula {
    pub fn prop(name: &str) -> Formula {
        Formula::Prop(name.to_string())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn globally(f: Formula) -> Formula {
        Formula::Globally(Box::new(f))
    }

    pub fn finally(f: Formula) -> Formula {
        Formula::Finally(Box::new(f))
    }

    /// Proposition names in order of first occurrence.
    pub fn props(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_props(&mut out);
        out
    }

    fn collect_props(&self, out: &mut Vec<String>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Prop(p) => {
                if !out.contains(p) {
                    out.push(p.clone());
                }
            }
            Formula::Not(a) | Formula::Globally(a) | Formula::Finally(a) => a.collect_props(out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.collect_props(out);
                b.collect_props(out);
            }
        }
    }

    /// Operator count.
    pub fn size(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Prop(_) => 0,
            Formula::Not(a) | Formula::Globally(a) | Formula::Finally(a) => 1 + a.size(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                1 + a.size() + b.size()
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Implies(..) => 1,
            Formula::Or(..) => 2,
            Formula::And(..) => 3,
            _ => 4,
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(f: &mut fmt::Formatter<'_>, x: &Formula, min: u8) -> fmt::Result {
            if x.precedence() < min {
                write!(f, "({x})")
            } else {
                write!(f, "{x}")
            }
        }
        match self {
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
            Formula::Prop(p) => f.write_str(p),
            Formula::Not(a) => {
                f.write_str("!")?;
                child(f, a, 4)
            }
            Formula::Globally(a) => {
                f.write_str("[]")?;
                child(f, a, 4)
            }
            Formula::Finally(a) => {
                f.write_str("<>")?;
                child(f, a, 4)
            }
            // && and || are associative, but the parser builds left-nested
            // trees, so a right operand of the same kind needs parentheses.
            Formula::And(a, b) => {
                child(f, a, 3)?;
                f.write_str(" && ")?;
                child(f, b, 4)
            }
            Formula::Or(a, b) => {
                child(f, a, 2)?;
                f.write_str(" || ")?;
                child(f, b, 3)
            }
            Formula::Implies(a, b) => {
                child(f, a, 2)?;
                f.write_str(" -> ")?;
                child(f, b, 1)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Always,
    Eventually,
    Not,
    And,
    Or,
    Implies,
    LParen,
    RParen,
    Ident(String),
    End,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Always => "`[]`".into(),
        Tok::Eventually => "`<>`".into(),
        Tok::Not => "`!`".into(),
        Tok::And => "`&&`".into(),
        Tok::Or => "`||`".into(),
        Tok::Implies => "`->`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::End => "end of input".into(),
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, LtlError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let two = bytes.get(i..i + 2);
        let tok = match two {
            Some(b"[]") => Some(Tok::Always),
            Some(b"<>") => Some(Tok::Eventually),
            Some(b"&&") => Some(Tok::And),
            Some(b"||") => Some(Tok::Or),
            Some(b"->") => Some(Tok::Implies),
            _ => None,
        };
        if let Some(tok) = tok {
            out.push((i, tok));
            i += 2;
            continue;
        }
        match c {
            b'!' => out.push((i, Tok::Not)),
            b'(' => out.push((i, Tok::LParen)),
            b')' => out.push((i, Tok::RParen)),
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((start, Tok::Ident(text[start..i].to_string())));
                continue;
            }
            _ => {
                return Err(LtlError::Syntax {
                    pos: i,
                    msg: format!(
                        "unexpected character {:?}",
                        text[i..].chars().next().unwrap()
                    ),
                })
            }
        }
        i += 1;
    }
    out.push((text.len(), Tok::End));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn pos(&self) -> usize {
        self.toks[self.at].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].1.clone();
        if t != Tok::End {
            self.at += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> LtlError {
        LtlError::Syntax {
            pos: self.pos(),
            msg: format!("expected {expected}, found {}", describe(self.peek())),
        }
    }

    fn implies(&mut self) -> Result<Formula, LtlError> {
        let lhs = self.or()?;
        if *self.peek() == Tok::Implies {
            self.bump();
            let rhs = self.implies()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula, LtlError> {
        let mut lhs = self.and()?;
        while *self.peek() == Tok::Or {
            self.bump();
            lhs = Formula::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, LtlError> {
        let mut lhs = self.unary()?;
        while *self.peek() == Tok::And {
            self.bump();
            lhs = Formula::and(lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, LtlError> {
        match self.peek().clone() {
            Tok::Not => {
                self.bump();
                Ok(Formula::not(self.unary()?))
            }
            Tok::Always => {
                self.bump();
                Ok(Formula::globally(self.unary()?))
            }
            Tok::Eventually => {
                self.bump();
                Ok(Formula::finally(self.unary()?))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.implies()?;
                if *self.peek() != Tok::RParen {
                    return Err(self.error("`)`"));
                }
                self.bump();
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump();
                Ok(match name.as_str() {
                    "true" => Formula::True,
                    "false" => Formula::False,
                    _ => Formula::Prop(name),
                })
            }
            _ => Err(self.error("a proposition, `(` or a unary operator")),
        }
    }
}

/// Parses a formula. Precedence from loosest: `->` (right-associative),
/// `||`, `&&`, then the unary operators `!`, `[]`, `<>`.
pub fn parse_ltl(text: &str) -> Result<Formula, LtlError> {
    let mut p = Parser {
        toks: lex(text)?,
        at: 0,
    };
    let f = p.implies()?;
    if *p.peek() != Tok::End {
        return Err(p.error("an operator or end of input"));
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(s: &str) -> Formula {
        Formula::prop(s)
    }

    #[test]
    fn mutual_exclusion_formula() {
        assert_eq!(
            parse_ltl("[]!(cs_c && cs_p)").unwrap(),
            Formula::globally(Formula::not(Formula::and(p("cs_c"), p("cs_p"))))
        );
    }

    #[test]
    fn starvation_formula_groups_around_implication() {
        let f = parse_ltl("[]<>consumer_at_want -> []<>cs_c").unwrap();
        assert_eq!(
            f,
            Formula::implies(
                Formula::globally(Formula::finally(p("consumer_at_want"))),
                Formula::globally(Formula::finally(p("cs_c")))
            )
        );
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(
            parse_ltl("a || b && c -> d -> e").unwrap(),
            Formula::implies(
                Formula::or(p("a"), Formula::and(p("b"), p("c"))),
                Formula::implies(p("d"), p("e"))
            )
        );
        assert_eq!(
            parse_ltl("!a && b").unwrap(),
            Formula::and(Formula::not(p("a")), p("b"))
        );
    }

    #[test]
    fn syntax_errors_carry_positions() {
        assert!(matches!(
            parse_ltl("[]("),
            Err(LtlError::Syntax { pos: 3, .. })
        ));
        assert!(matches!(
            parse_ltl("a &&"),
            Err(LtlError::Syntax { pos: 4, .. })
        ));
        assert!(matches!(
            parse_ltl("a b"),
            Err(LtlError::Syntax { pos: 2, .. })
        ));
        assert!(matches!(
            parse_ltl("a # b"),
            Err(LtlError::Syntax { pos: 2, .. })
        ));
        assert!(matches!(
            parse_ltl("(a"),
            Err(LtlError::Syntax { pos: 2, .. })
        ));
    }

    #[test]
    fn props_in_first_occurrence_order() {
        let f = parse_ltl("[]<>(b && a) -> []<>b").unwrap();
        assert_eq!(f.props(), vec!["b".to_string(), "a".to_string()]);
    }

    pub(crate) fn formula() -> impl Strategy<Value = Formula> {
        let leaf = prop_oneof![
            Just(Formula::True),
            Just(Formula::False),
            "[a-c]".prop_map(Formula::Prop),
        ];
        leaf.prop_recursive(5, 48, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(Formula::not),
                inner.clone().prop_map(Formula::globally),
                inner.clone().prop_map(Formula::finally),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
                (inner.clone(), inner).prop_map(|(a, b)| Formula::implies(a, b)),
            ]
        })
    }

    proptest! {
        #[test]
        fn printer_round_trips(f in formula()) {
            let text = f.to_string();
            prop_assert_eq!(parse_ltl(&text).unwrap(), f);
        }
    }
}
