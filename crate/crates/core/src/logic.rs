//! Propositions, symbolic states, formulas and their evaluation.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// Default bound on the number of pairs `relation_of` may enumerate.
pub const DEFAULT_PAIR_CAP: usize = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LogicError {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("undeclared proposition `{name}` at {pos}")]
    Undeclared { name: String, pos: usize },
    #[error("formula is not in the safety fragment: {0}")]
    NotSafety(String),
    #[error("formula is not boolean: {0}")]
    NotBoolean(String),
    #[error("enumeration of {pairs} pairs exceeds capacity {cap}")]
    Capacity { pairs: usize, cap: usize },
    #[error("invalid vocabulary: {0}")]
    Vocabulary(String),
}

/// Declared propositions in canonical order: world inputs, user inputs, outputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    world: Vec<String>,
    user: Vec<String>,
    outputs: Vec<String>,
}

const RESERVED: [&str; 6] = ["G", "F", "X", "U", "true", "false"];

impl Vocabulary {
    pub fn new<S: AsRef<str>>(world: &[S], user: &[S], outputs: &[S]) -> Result<Self, LogicError> {
        let own = |v: &[S]| v.iter().map(|s| s.as_ref().to_string()).collect::<Vec<_>>();
        let voc = Vocabulary { world: own(world), user: own(user), outputs: own(outputs) };
        let mut seen = BTreeSet::new();
        for name in voc.names() {
            if !is_ident(name) || RESERVED.contains(&name) {
                return Err(LogicError::Vocabulary(format!("bad proposition name `{name}`")));
            }
            if !seen.insert(name) {
                return Err(LogicError::Vocabulary(format!("duplicate proposition `{name}`")));
            }
        }
        if voc.len() > 30 {
            return Err(LogicError::Vocabulary("at most 30 propositions are supported".into()));
        }
        Ok(voc)
    }

    pub fn world(&self) -> &[String] {
        &self.world
    }
    pub fn user(&self) -> &[String] {
        &self.user
    }
    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    /// All names in canonical order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.world.iter().chain(&self.user).chain(&self.outputs).map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.world.len() + self.user.len() + self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names().position(|n| n == name)
    }

    pub fn name(&self, idx: usize) -> &str {
        self.names().nth(idx).expect("index in vocabulary")
    }

    pub fn world_mask(&self) -> u32 {
        (1u32 << self.world.len()) - 1
    }
    pub fn user_mask(&self) -> u32 {
        ((1u32 << self.user.len()) - 1) << self.world.len()
    }
    pub fn input_mask(&self) -> u32 {
        self.world_mask() | self.user_mask()
    }
    pub fn output_mask(&self) -> u32 {
        self.all_mask() & !self.input_mask()
    }
    pub fn all_mask(&self) -> u32 {
        if self.len() == 32 {
            u32::MAX
        } else {
            (1u32 << self.len()) - 1
        }
    }

    /// Bit of an output proposition by name.
    pub fn output_bit(&self, name: &str) -> Option<u32> {
        let i = self.outputs.iter().position(|n| n == name)?;
        Some(1 << (self.world.len() + self.user.len() + i))
    }

    /// Build a state from proposition names.
    pub fn state<S: AsRef<str>>(&self, names: &[S]) -> Result<State, LogicError> {
        let mut bits = 0;
        for n in names {
            let i = self
                .index(n.as_ref())
                .ok_or_else(|| LogicError::Undeclared { name: n.as_ref().into(), pos: 0 })?;
            bits |= 1 << i;
        }
        Ok(State(bits))
    }

    pub fn state_names(&self, s: State) -> Vec<&str> {
        self.names().enumerate().filter(|(i, _)| s.0 >> i & 1 == 1).map(|(_, n)| n).collect()
    }

    /// `{x0, y0}` style rendering.
    pub fn show(&self, s: State) -> String {
        format!("{{{}}}", self.state_names(s).join(", "))
    }
}

fn is_ident(s: &str) -> bool {
    let mut c = s.chars();
    matches!(c.next(), Some(ch) if ch.is_ascii_alphabetic() || ch == '_')
        && c.all(|ch| ch.is_ascii_alphanumeric() || ch == '_')
}

/// A set of true propositions, as a bit set over the canonical vocabulary order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct State(pub u32);

impl State {
    pub fn bits(self) -> u32 {
        self.0
    }
    pub fn has(self, idx: usize) -> bool {
        self.0 >> idx & 1 == 1
    }
    pub fn restrict(self, mask: u32) -> State {
        State(self.0 & mask)
    }
    pub fn union(self, other: State) -> State {
        State(self.0 | other.0)
    }
}

/// Vocabulary slices a state may range over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slice {
    /// World inputs only.
    World,
    /// World and user inputs.
    Inputs,
    /// Every proposition.
    All,
}

impl Slice {
    pub fn mask(self, v: &Vocabulary) -> u32 {
        match self {
            Slice::World => v.world_mask(),
            Slice::Inputs => v.input_mask(),
            Slice::All => v.all_mask(),
        }
    }
}

/// Vocabulary together with the admissible assignments of world inputs.
///
/// A grounding usually rules out most world assignments (two disjoint cells
/// can't hold at once); `full` admits all of them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSpace {
    pub vocab: Vocabulary,
    world: Vec<u32>,
}

impl StateSpace {
    pub fn full(vocab: Vocabulary) -> Self {
        let world = (0..=vocab.world_mask()).collect();
        StateSpace { vocab, world }
    }

    pub fn with_world(vocab: Vocabulary, mut world: Vec<State>) -> Self {
        world.sort();
        world.dedup();
        let mask = vocab.world_mask();
        StateSpace { world: world.into_iter().map(|s| s.0 & mask).collect(), vocab }
    }

    pub fn world_states(&self) -> Vec<State> {
        self.world.iter().map(|&b| State(b)).collect()
    }

    pub fn admits(&self, s: State) -> bool {
        self.world.binary_search(&(s.0 & self.vocab.world_mask())).is_ok()
    }

    /// Admissible states over a slice, in canonical order.
    pub fn states(&self, slice: Slice) -> Vec<State> {
        let v = &self.vocab;
        let nw = v.world.len();
        let nu = v.user.len();
        let no = if slice == Slice::All { v.outputs.len() } else { 0 };
        let nu = if slice == Slice::World { 0 } else { nu };
        let mut out = Vec::new();
        for rest in 0u32..(1 << (nu + no)) {
            let user = rest & ((1 << nu) - 1);
            let outs = rest >> nu;
            let hi = (user << nw) | (outs << (nw + v.user.len()));
            for &w in &self.world {
                out.push(State(w | hi));
            }
        }
        out.sort();
        out
    }
}

/// Formula syntax tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Atom(usize),
    /// Next-step reference written `p'`.
    Primed(usize),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
    Next(Box<Formula>),
    Always(Box<Formula>),
    Eventually(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }
    pub fn next(f: Formula) -> Formula {
        Formula::Next(Box::new(f))
    }
    pub fn always(f: Formula) -> Formula {
        Formula::Always(Box::new(f))
    }
    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }
    pub fn iff(a: Formula, b: Formula) -> Formula {
        Formula::Iff(Box::new(a), Box::new(b))
    }
    /// Conjunction; a single operand is returned as is.
    pub fn and(mut v: Vec<Formula>) -> Formula {
        match v.len() {
            0 => Formula::True,
            1 => v.pop().unwrap(),
            _ => Formula::And(v),
        }
    }
    /// Disjunction; a single operand is returned as is.
    pub fn or(mut v: Vec<Formula>) -> Formula {
        match v.len() {
            0 => Formula::False,
            1 => v.pop().unwrap(),
            _ => Formula::Or(v),
        }
    }

    pub fn display<'a>(&'a self, vocab: &'a Vocabulary) -> Printed<'a> {
        Printed { f: self, vocab }
    }

    pub fn to_text(&self, vocab: &Vocabulary) -> String {
        self.display(vocab).to_string()
    }

    fn is_temporal_free(&self) -> bool {
        use Formula::*;
        match self {
            True | False | Atom(_) => true,
            Primed(_) | Next(_) | Always(_) | Eventually(_) | Until(..) => false,
            Not(a) => a.is_temporal_free(),
            And(v) | Or(v) => v.iter().all(Formula::is_temporal_free),
            Implies(a, b) | Iff(a, b) => a.is_temporal_free() && b.is_temporal_free(),
        }
    }

    /// Replace the current-step atom `idx` by a constant.
    pub fn assign(&self, idx: usize, value: bool) -> Formula {
        use Formula::*;
        let b = |f: &Formula| Box::new(f.assign(idx, value));
        match self {
            Atom(i) if *i == idx => if value { True } else { False },
            True | False | Atom(_) | Primed(_) => self.clone(),
            Not(a) => Not(b(a)),
            And(v) => And(v.iter().map(|f| f.assign(idx, value)).collect()),
            Or(v) => Or(v.iter().map(|f| f.assign(idx, value)).collect()),
            Implies(x, y) => Implies(b(x), b(y)),
            Iff(x, y) => Iff(b(x), b(y)),
            Next(a) => Next(b(a)),
            Always(a) => Always(b(a)),
            Eventually(a) => Eventually(b(a)),
            Until(x, y) => Until(b(x), b(y)),
        }
    }

    /// Conjuncts of a top-level conjunction (or the formula itself).
    pub fn conjuncts(&self) -> Vec<&Formula> {
        match self {
            Formula::And(v) => v.iter().flat_map(|f| f.conjuncts()).collect(),
            f => vec![f],
        }
    }
}

/// `φ_σ`: every proposition of the slice, positive if in `s`, negated otherwise.
/// Positives come first, then negatives, each in canonical order.
pub fn state_formula(s: State, vocab: &Vocabulary, slice: Slice) -> Formula {
    let mask = slice.mask(vocab);
    let idx: Vec<usize> = (0..vocab.len()).filter(|i| mask >> i & 1 == 1).collect();
    let pos = idx.iter().filter(|&&i| s.has(i)).map(|&i| Formula::Atom(i));
    let neg = idx.iter().filter(|&&i| !s.has(i)).map(|&i| Formula::not(Formula::Atom(i)));
    Formula::and(pos.chain(neg).collect())
}

// ---------------------------------------------------------------- printing

pub struct Printed<'a> {
    f: &'a Formula,
    vocab: &'a Vocabulary,
}

// binding strength, higher binds tighter
fn prec(f: &Formula) -> u8 {
    use Formula::*;
    match f {
        Iff(..) => 1,
        Implies(..) => 2,
        Or(_) => 3,
        And(_) => 4,
        Until(..) => 5,
        _ => 6,
    }
}

impl fmt::Display for Printed<'_> {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_f(self.f, self.vocab, out)
    }
}

fn write_f(f: &Formula, v: &Vocabulary, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    use Formula::*;
    let sub = |g: &Formula, min: u8, out: &mut fmt::Formatter<'_>| -> fmt::Result {
        if prec(g) < min {
            write!(out, "(")?;
            write_f(g, v, out)?;
            write!(out, ")")
        } else {
            write_f(g, v, out)
        }
    };
    match f {
        True => write!(out, "true"),
        False => write!(out, "false"),
        Atom(i) => write!(out, "{}", v.name(*i)),
        Primed(i) => write!(out, "{}'", v.name(*i)),
        Not(a) => {
            write!(out, "!")?;
            sub(a, 6, out)
        }
        Next(a) | Always(a) | Eventually(a) => {
            let op = match f {
                Next(_) => "X",
                Always(_) => "G",
                _ => "F",
            };
            write!(out, "{op}(")?;
            write_f(a, v, out)?;
            write!(out, ")")
        }
        And(xs) | Or(xs) => {
            let (op, p) = if matches!(f, And(_)) { (" & ", 4) } else { (" | ", 3) };
            for (k, x) in xs.iter().enumerate() {
                if k > 0 {
                    write!(out, "{op}")?;
                }
                // a nested chain of the same operator needs parens to survive reparsing
                sub(x, p + 1, out)?;
            }
            Ok(())
        }
        Until(a, b) => {
            sub(a, 6, out)?;
            write!(out, " U ")?;
            sub(b, 6, out)
        }
        Implies(a, b) => {
            sub(a, 3, out)?;
            write!(out, " -> ")?;
            sub(b, 2, out)
        }
        Iff(a, b) => {
            sub(a, 2, out)?;
            write!(out, " <-> ")?;
            sub(b, 2, out)
        }
    }
}

// ----------------------------------------------------------------- parsing

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Prime,
    LParen,
    RParen,
    Not,
    And,
    Or,
    Implies,
    Iff,
    Eof,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, LogicError> {
    let b = text.as_bytes();
    let mut i = 0;
    let mut out = Vec::new();
    while i < b.len() {
        let c = b[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'!' => Tok::Not,
            b'&' => Tok::And,
            b'|' => Tok::Or,
            b'\'' => Tok::Prime,
            b'-' if b.get(i + 1) == Some(&b'>') => {
                i += 1;
                Tok::Implies
            }
            b'<' if b.get(i + 1) == Some(&b'-') && b.get(i + 2) == Some(&b'>') => {
                i += 2;
                Tok::Iff
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i + 1 < b.len() && (b[i + 1].is_ascii_alphanumeric() || b[i + 1] == b'_') {
                    i += 1;
                }
                Tok::Ident(text[start..=i].to_string())
            }
            _ => {
                return Err(LogicError::Syntax {
                    pos: start,
                    msg: format!("unexpected character `{}`", text[start..].chars().next().unwrap()),
                })
            }
        };
        i += 1;
        out.push((tok, start));
    }
    out.push((Tok::Eof, text.len()));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    vocab: &'a Vocabulary,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }
    fn pos(&self) -> usize {
        self.toks[self.at].1
    }
    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if t != Tok::Eof {
            self.at += 1;
        }
        t
    }
    fn err<T>(&self, msg: &str) -> Result<T, LogicError> {
        let what = match self.peek() {
            Tok::Eof => "end of input".to_string(),
            t => format!("{t:?}"),
        };
        Err(LogicError::Syntax { pos: self.pos(), msg: format!("{msg}, found {what}") })
    }

    fn iff(&mut self) -> Result<Formula, LogicError> {
        let a = self.implies()?;
        if *self.peek() == Tok::Iff {
            self.bump();
            let b = self.iff()?;
            return Ok(Formula::iff(a, b));
        }
        Ok(a)
    }

    fn implies(&mut self) -> Result<Formula, LogicError> {
        let a = self.or()?;
        if *self.peek() == Tok::Implies {
            self.bump();
            let b = self.implies()?;
            return Ok(Formula::implies(a, b));
        }
        Ok(a)
    }

    fn or(&mut self) -> Result<Formula, LogicError> {
        let mut v = vec![self.and()?];
        while *self.peek() == Tok::Or {
            self.bump();
            v.push(self.and()?);
        }
        Ok(Formula::or(v))
    }

    fn and(&mut self) -> Result<Formula, LogicError> {
        let mut v = vec![self.until()?];
        while *self.peek() == Tok::And {
            self.bump();
            v.push(self.until()?);
        }
        Ok(Formula::and(v))
    }

    fn until(&mut self) -> Result<Formula, LogicError> {
        let a = self.unary()?;
        if matches!(self.peek(), Tok::Ident(s) if s == "U") {
            self.bump();
            let b = self.unary()?;
            return Ok(Formula::Until(Box::new(a), Box::new(b)));
        }
        Ok(a)
    }

    fn unary(&mut self) -> Result<Formula, LogicError> {
        let pos = self.pos();
        if !matches!(self.peek(), Tok::Not | Tok::LParen | Tok::Ident(_)) {
            return self.err("expected a formula");
        }
        match self.bump() {
            Tok::Not => Ok(Formula::not(self.unary()?)),
            Tok::LParen => {
                let f = self.iff()?;
                if *self.peek() != Tok::RParen {
                    return self.err("expected `)`");
                }
                self.bump();
                Ok(f)
            }
            Tok::Ident(s) => match s.as_str() {
                "G" => Ok(Formula::always(self.unary()?)),
                "F" => Ok(Formula::Eventually(Box::new(self.unary()?))),
                "X" => Ok(Formula::next(self.unary()?)),
                "true" => Ok(Formula::True),
                "false" => Ok(Formula::False),
                "U" => Err(LogicError::Syntax { pos, msg: "`U` needs a left operand".into() }),
                name => {
                    let i = self
                        .vocab
                        .index(name)
                        .ok_or_else(|| LogicError::Undeclared { name: name.into(), pos })?;
                    if *self.peek() == Tok::Prime {
                        self.bump();
                        Ok(Formula::Primed(i))
                    } else {
                        Ok(Formula::Atom(i))
                    }
                }
            },
            _ => unreachable!(),
        }
    }
}

/// Parse formula text against a vocabulary.
pub fn parse_formula(text: &str, vocab: &Vocabulary) -> Result<Formula, LogicError> {
    let mut p = Parser { toks: lex(text)?, at: 0, vocab };
    let f = p.iff()?;
    if *p.peek() != Tok::Eof {
        return p.err("expected end of input");
    }
    Ok(f)
}

// --------------------------------------------------------------- evaluation

fn eval_bool(f: &Formula, now: State, next: State, shifted: bool) -> Result<bool, LogicError> {
    use Formula::*;
    Ok(match f {
        True => true,
        False => false,
        Atom(i) => if shifted { next.has(*i) } else { now.has(*i) },
        Primed(i) => {
            if shifted {
                return Err(LogicError::NotSafety("nested next".into()));
            }
            next.has(*i)
        }
        Next(a) => {
            if shifted {
                return Err(LogicError::NotSafety("nested next".into()));
            }
            eval_bool(a, now, next, true)?
        }
        Not(a) => !eval_bool(a, now, next, shifted)?,
        And(v) => {
            let mut r = true;
            for g in v {
                r &= eval_bool(g, now, next, shifted)?;
            }
            r
        }
        Or(v) => {
            let mut r = false;
            for g in v {
                r |= eval_bool(g, now, next, shifted)?;
            }
            r
        }
        Implies(a, b) => !eval_bool(a, now, next, shifted)? || eval_bool(b, now, next, shifted)?,
        Iff(a, b) => eval_bool(a, now, next, shifted)? == eval_bool(b, now, next, shifted)?,
        Always(_) | Eventually(_) | Until(..) => {
            return Err(LogicError::NotSafety("temporal operator below the outer G".into()))
        }
    })
}

/// Evaluate a safety formula on one step: unprimed atoms from `now`, primed from `next`.
///
/// Accepts `G(body)` and conjunctions of such formulas.
pub fn eval_step(f: &Formula, now: State, next: State) -> Result<bool, LogicError> {
    match f {
        Formula::Always(body) => eval_bool(body, now, next, false),
        Formula::And(v) => {
            let mut r = true;
            for g in v {
                r &= eval_step(g, now, next)?;
            }
            Ok(r)
        }
        Formula::True => Ok(true),
        _ => Err(LogicError::NotSafety("expected an outer G".into())),
    }
}

/// Checks the safety-fragment shape without evaluating.
pub fn check_safety(f: &Formula) -> Result<(), LogicError> {
    eval_step(f, State(0), State(0)).map(|_| ())
}

/// Evaluate a formula without temporal operators on a single state.
pub fn eval_state(f: &Formula, s: State) -> Result<bool, LogicError> {
    if !f.is_temporal_free() {
        return Err(LogicError::NotBoolean("temporal operator or primed atom".into()));
    }
    eval_bool(f, s, s, false)
}

/// A set of (current, next) pairs over declared slices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionRelation {
    pub domain: Slice,
    pub codomain: Slice,
    pub pairs: BTreeSet<(State, State)>,
}

impl TransitionRelation {
    pub fn empty(domain: Slice, codomain: Slice) -> Self {
        TransitionRelation { domain, codomain, pairs: BTreeSet::new() }
    }
    pub fn len(&self) -> usize {
        self.pairs.len()
    }
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
    pub fn contains(&self, a: State, b: State) -> bool {
        self.pairs.contains(&(a, b))
    }
    pub fn intersect(&self, other: &Self) -> Self {
        TransitionRelation {
            domain: self.domain,
            codomain: self.codomain,
            pairs: self.pairs.intersection(&other.pairs).copied().collect(),
        }
    }
}

/// All admissible pairs over the slices satisfying a safety formula.
pub fn relation_of(
    f: &Formula,
    space: &StateSpace,
    domain: Slice,
    codomain: Slice,
) -> Result<TransitionRelation, LogicError> {
    relation_of_capped(f, space, domain, codomain, DEFAULT_PAIR_CAP)
}

pub fn relation_of_capped(
    f: &Formula,
    space: &StateSpace,
    domain: Slice,
    codomain: Slice,
    cap: usize,
) -> Result<TransitionRelation, LogicError> {
    check_safety(f)?;
    let dom = space.states(domain);
    let cod = space.states(codomain);
    let pairs = dom.len().saturating_mul(cod.len());
    if pairs > cap {
        return Err(LogicError::Capacity { pairs, cap });
    }
    let mut rel = TransitionRelation::empty(domain, codomain);
    for &a in &dom {
        for &b in &cod {
            if eval_step(f, a, b)? {
                rel.pairs.insert((a, b));
            }
        }
    }
    Ok(rel)
}

#[cfg(test)]
mod test {
    use super::*;

    fn nine() -> Vocabulary {
        Vocabulary::new(&["x0", "x1", "x2", "y0", "y1", "y2"], &[], &["pi_L2R", "pi_R2L"]).unwrap()
    }

    #[test]
    fn parse_always_not() {
        let v = nine();
        let f = parse_formula("G(!(x2 & y0))", &v).unwrap();
        let x2 = Formula::Atom(2);
        let y0 = Formula::Atom(3);
        assert_eq!(f, Formula::always(Formula::not(Formula::And(vec![x2, y0]))));
    }

    #[test]
    fn parse_poss_changes_shape() {
        let v = nine();
        let f = parse_formula("G(x2 & !X(x0 | x2))", &v).unwrap();
        let want = Formula::always(Formula::And(vec![
            Formula::Atom(2),
            Formula::not(Formula::next(Formula::Or(vec![Formula::Atom(0), Formula::Atom(2)]))),
        ]));
        assert_eq!(f, want);
    }

    #[test]
    fn syntax_error_at_end() {
        let v = nine();
        let e = parse_formula("G(x0 & x1 &", &v).unwrap_err();
        assert_eq!(e, LogicError::Syntax { pos: 11, msg: "expected a formula, found end of input".into() });
    }

    #[test]
    fn undeclared_named() {
        let e = parse_formula("G(x0 & z9)", &nine()).unwrap_err();
        assert!(matches!(e, LogicError::Undeclared { ref name, pos: 7 } if name == "z9"));
    }

    #[test]
    fn primes_and_print() {
        let v = nine();
        let f = parse_formula("x0 -> x1' <-> !y0", &v).unwrap();
        assert_eq!(f.to_text(&v), "x0 -> x1' <-> !y0");
        let g = parse_formula("(x0 -> x1) -> y0", &v).unwrap();
        assert_eq!(g.to_text(&v), "(x0 -> x1) -> y0");
        assert_eq!(parse_formula(&g.to_text(&v), &v).unwrap(), g);
    }

    #[test]
    fn state_formula_orders_literals() {
        let v = nine();
        let s = v.state(&["x0", "y0"]).unwrap();
        let f = state_formula(s, &v, Slice::World);
        assert_eq!(f.to_text(&v), "x0 & y0 & !x1 & !x2 & !y1 & !y2");
        let p = Vocabulary::new(&["p"], &[], &[]).unwrap();
        assert_eq!(state_formula(State(0), &p, Slice::World).to_text(&p), "!p");
        assert_eq!(state_formula(State(1), &p, Slice::World).to_text(&p), "p");
    }

    #[test]
    fn eval_step_examples() {
        let v = nine();
        let f = parse_formula("G(!(x2 & y0 & pi_L2R & X x2 & X y0))", &v).unwrap();
        let now = v.state(&["x2", "y0", "pi_L2R"]).unwrap();
        let next = v.state(&["x2", "y0"]).unwrap();
        assert!(!eval_step(&f, now, next).unwrap());
        let g = parse_formula("G(pi_L2R -> X pi_L2R)", &v).unwrap();
        assert!(eval_step(&g, State(0), State(0)).unwrap());
        let h = parse_formula("G(x0 & y0 -> X(x1 & y0))", &v).unwrap();
        let a = v.state(&["x0", "y0"]).unwrap();
        let b = v.state(&["x1", "y0"]).unwrap();
        assert!(eval_step(&h, a, b).unwrap());
    }

    #[test]
    fn until_rejected() {
        let v = nine();
        let f = parse_formula("G(x0 U x1)", &v).unwrap();
        assert!(matches!(eval_step(&f, State(0), State(0)), Err(LogicError::NotSafety(_))));
    }

    #[test]
    fn tautology_relation_is_full() {
        let v = Vocabulary::new(&["p"], &[], &[]).unwrap();
        let sp = StateSpace::full(v.clone());
        let f = parse_formula("G(true)", &v).unwrap();
        assert_eq!(relation_of(&f, &sp, Slice::World, Slice::World).unwrap().len(), 4);
    }

    #[test]
    fn capacity_guard() {
        let v = nine();
        let sp = StateSpace::full(v.clone());
        let f = parse_formula("G(true)", &v).unwrap();
        let e = relation_of_capped(&f, &sp, Slice::All, Slice::All, 1000).unwrap_err();
        assert!(matches!(e, LogicError::Capacity { pairs: 65536, cap: 1000 }));
    }

    #[test]
    fn restricted_space_states() {
        let v = nine();
        let cells: Vec<State> = ["x0", "x1", "x2"]
            .iter()
            .flat_map(|x| ["y0", "y1", "y2"].map(|y| v.state(&[*x, y]).unwrap()))
            .collect();
        let sp = StateSpace::with_world(v, cells);
        assert_eq!(sp.states(Slice::World).len(), 9);
        assert_eq!(sp.states(Slice::All).len(), 36);
    }
}
