//! SMT-LIB 2 encodings of equation systems and an external solver driver.
//!
//! Carrier encodings:
//!
//! * Boolean: propositional variables, ⊕ = `or`, ⊙ = `and`.
//! * Tropical (QF_LIA): ∞ ↦ −1, values ≥ 0 map to themselves.
//! * Bounded tropical (QF_LIA or QF_BV): ∞ ↦ b+1, so the carrier is
//!   `0..=b+1`. Bit-vectors use `⌈log₂(2b+3)⌉` bits so that `t + t'` cannot
//!   overflow before it is clamped.
//! * Bottleneck (QF_LIA): −∞ ↦ −2, ∞ ↦ −1.
//!
//! Every declared variable gets a range constraint keeping it inside the
//! encoded carrier. Terms are written with `let` bindings for each shared
//! compound node, so the script stays linear in the size of the term DAG.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::equations::{EncodingMode, EqSystem, Equation, SystemDelta, Term, VarId};
use crate::semiring::{SemiringSpec, Weight};
use crate::wfa::{Alphabet, Wfa, WfaError, Word};

#[derive(Debug, Error)]
pub enum SmtError {
    #[error("encoding {encoding} cannot be used for the {spec} semiring")]
    EncodingMismatch { encoding: TheoryEncoding, spec: SemiringSpec },
    #[error("failed to start solver `{program}`: {source}")]
    Spawn { program: String, source: std::io::Error },
    #[error("solver crashed: {0}")]
    Crash(String),
    #[error("solver timed out")]
    Timeout,
    #[error("solver ran out of memory")]
    OutOfMemory,
    #[error("solver returned unknown: {0}")]
    Unknown(String),
    #[error("solver reported an error: {0}")]
    SolverError(String),
    #[error("cannot parse solver output: {0}")]
    UnparseableModel(String),
    #[error("model is missing variable {0}")]
    MissingVariable(String),
    #[error("session is fixed to {expected} states, got a system with {got}")]
    StateCountChanged { expected: usize, got: usize },
    #[error(transparent)]
    Wfa(#[from] WfaError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which decidable theory a semiring is mapped into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TheoryEncoding {
    PropositionalBoolean,
    TropicalLia,
    BoundedTropicalLia(u64),
    BoundedTropicalBv { bound: u64, width: u32 },
    BottleneckLia,
}

/// User-level choice between the integer and bit-vector encodings. Only the
/// bounded tropical semiring has a bit-vector encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EncodingChoice {
    Lia,
    Bv,
}

impl EncodingChoice {
    pub fn name(self) -> &'static str {
        match self {
            EncodingChoice::Lia => "lia",
            EncodingChoice::Bv => "bv",
        }
    }
}

impl std::str::FromStr for EncodingChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lia" => Ok(EncodingChoice::Lia),
            "bv" => Ok(EncodingChoice::Bv),
            _ => Err(format!("unknown encoding {s:?} (expected lia or bv)")),
        }
    }
}

/// Smallest `l` with `2^l ≥ 2b + 3`.
pub fn bv_width(bound: u64) -> u32 {
    let values = 2 * bound as u128 + 3;
    let mut width = 0;
    while (1u128 << width) < values {
        width += 1;
    }
    width
}

impl TheoryEncoding {
    pub fn for_spec(spec: SemiringSpec, choice: EncodingChoice) -> Result<Self, SmtError> {
        match (spec, choice) {
            (SemiringSpec::Boolean, _) => Ok(TheoryEncoding::PropositionalBoolean),
            (SemiringSpec::Tropical, EncodingChoice::Lia) => Ok(TheoryEncoding::TropicalLia),
            (SemiringSpec::BoundedTropical(b), EncodingChoice::Lia) => Ok(TheoryEncoding::BoundedTropicalLia(b)),
            (SemiringSpec::BoundedTropical(b), EncodingChoice::Bv) => {
                Ok(TheoryEncoding::BoundedTropicalBv { bound: b, width: bv_width(b) })
            }
            (SemiringSpec::Bottleneck, EncodingChoice::Lia) => Ok(TheoryEncoding::BottleneckLia),
            (spec, EncodingChoice::Bv) => Err(SmtError::EncodingMismatch {
                encoding: TheoryEncoding::BoundedTropicalBv { bound: 0, width: 0 },
                spec,
            }),
        }
    }

    pub fn matches(&self, spec: SemiringSpec) -> bool {
        matches!(
            (self, spec),
            (TheoryEncoding::PropositionalBoolean, SemiringSpec::Boolean)
                | (TheoryEncoding::TropicalLia, SemiringSpec::Tropical)
                | (TheoryEncoding::BottleneckLia, SemiringSpec::Bottleneck)
        ) || match (self, spec) {
            (TheoryEncoding::BoundedTropicalLia(b), SemiringSpec::BoundedTropical(c)) => *b == c,
            (TheoryEncoding::BoundedTropicalBv { bound, width }, SemiringSpec::BoundedTropical(c)) => {
                *bound == c && *width == bv_width(c)
            }
            _ => false,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TheoryEncoding::PropositionalBoolean => "propositional",
            TheoryEncoding::BoundedTropicalBv { .. } => "bv",
            _ => "lia",
        }
    }

    pub fn logic(&self) -> &'static str {
        match self {
            TheoryEncoding::PropositionalBoolean => "QF_UF",
            TheoryEncoding::BoundedTropicalBv { .. } => "QF_BV",
            _ => "QF_LIA",
        }
    }

    fn sort(&self) -> String {
        match self {
            TheoryEncoding::PropositionalBoolean => "Bool".into(),
            TheoryEncoding::BoundedTropicalBv { width, .. } => format!("(_ BitVec {width})"),
            _ => "Int".into(),
        }
    }

    /// Whether the operator encodings mention an operand more than once.
    fn duplicates_operands(&self) -> bool {
        !matches!(self, TheoryEncoding::PropositionalBoolean)
    }

    fn int(v: i64) -> String {
        if v < 0 {
            format!("(- {})", -v)
        } else {
            v.to_string()
        }
    }

    fn bv(&self, v: u64) -> String {
        match self {
            TheoryEncoding::BoundedTropicalBv { width, .. } => format!("(_ bv{v} {width})"),
            _ => unreachable!("bit-vector literal outside the bv encoding"),
        }
    }

    /// Encodes a weight as a constant of the theory.
    pub fn constant(&self, w: Weight) -> String {
        match (self, w) {
            (TheoryEncoding::PropositionalBoolean, Weight::Bit(b)) => b.to_string(),
            (TheoryEncoding::TropicalLia | TheoryEncoding::BottleneckLia, Weight::Finite(v)) => v.to_string(),
            (TheoryEncoding::TropicalLia | TheoryEncoding::BottleneckLia, Weight::PlusInf) => Self::int(-1),
            (TheoryEncoding::BottleneckLia, Weight::MinusInf) => Self::int(-2),
            (TheoryEncoding::BoundedTropicalLia(_), Weight::Finite(v)) => v.to_string(),
            (TheoryEncoding::BoundedTropicalLia(b), Weight::PlusInf) => (b + 1).to_string(),
            (TheoryEncoding::BoundedTropicalBv { .. }, Weight::Finite(v)) => self.bv(v),
            (TheoryEncoding::BoundedTropicalBv { bound, .. }, Weight::PlusInf) => self.bv(bound + 1),
            (enc, w) => unreachable!("weight {w} cannot occur under encoding {enc}"),
        }
    }

    /// Range constraint for a declared variable, if the sort is wider than
    /// the encoded carrier.
    pub fn range(&self, name: &str) -> Option<String> {
        match self {
            TheoryEncoding::PropositionalBoolean => None,
            TheoryEncoding::TropicalLia => Some(format!("(>= {name} (- 1))")),
            TheoryEncoding::BoundedTropicalLia(b) => Some(format!("(and (>= {name} 0) (<= {name} {}))", b + 1)),
            TheoryEncoding::BoundedTropicalBv { bound, .. } => Some(format!("(bvule {name} {})", self.bv(bound + 1))),
            TheoryEncoding::BottleneckLia => Some(format!("(>= {name} (- 2))")),
        }
    }

    /// `x ⊕ y` over encoded operands.
    pub fn add(&self, x: &str, y: &str) -> String {
        match self {
            TheoryEncoding::PropositionalBoolean => format!("(or {x} {y})"),
            TheoryEncoding::TropicalLia => format!(
                "(ite (or (= {x} (- 1)) (= {y} (- 1))) (ite (>= {x} {y}) {x} {y}) (ite (<= {x} {y}) {x} {y}))"
            ),
            TheoryEncoding::BoundedTropicalLia(_) => format!("(ite (<= {x} {y}) {x} {y})"),
            TheoryEncoding::BoundedTropicalBv { .. } => format!("(ite (bvule {x} {y}) {x} {y})"),
            TheoryEncoding::BottleneckLia => format!(
                "(ite (or (= {x} (- 1)) (= {y} (- 1))) (- 1) \
                 (ite (= {x} (- 2)) {y} (ite (= {y} (- 2)) {x} (ite (>= {x} {y}) {x} {y}))))"
            ),
        }
    }

    /// `x ⊙ y` over encoded operands.
    pub fn mul(&self, x: &str, y: &str) -> String {
        match self {
            TheoryEncoding::PropositionalBoolean => format!("(and {x} {y})"),
            TheoryEncoding::TropicalLia => format!("(ite (or (= {x} (- 1)) (= {y} (- 1))) (- 1) (+ {x} {y}))"),
            TheoryEncoding::BoundedTropicalLia(b) => {
                let top = b + 1;
                format!("(ite (<= (+ {x} {y}) {top}) (+ {x} {y}) {top})")
            }
            TheoryEncoding::BoundedTropicalBv { bound, .. } => {
                let top = self.bv(bound + 1);
                format!("(ite (bvule (bvadd {x} {y}) {top}) (bvadd {x} {y}) {top})")
            }
            TheoryEncoding::BottleneckLia => format!(
                "(ite (or (= {x} (- 2)) (= {y} (- 2))) (- 2) \
                 (ite (= {x} (- 1)) {y} (ite (= {y} (- 1)) {x} (ite (<= {x} {y}) {x} {y}))))"
            ),
        }
    }

    /// Maps a solver value back to a weight, rejecting values outside the
    /// encoded carrier.
    pub fn decode(&self, value: &Sexp) -> Result<Weight, SmtError> {
        let bad = || SmtError::UnparseableModel(format!("value {value} is outside the {self} carrier"));
        match self {
            TheoryEncoding::PropositionalBoolean => match value {
                Sexp::Atom(a) if a == "true" => Ok(Weight::Bit(true)),
                Sexp::Atom(a) if a == "false" => Ok(Weight::Bit(false)),
                _ => Err(bad()),
            },
            TheoryEncoding::TropicalLia => match value.as_int().ok_or_else(bad)? {
                -1 => Ok(Weight::PlusInf),
                v if v >= 0 => Ok(Weight::Finite(v as u64)),
                _ => Err(bad()),
            },
            TheoryEncoding::BottleneckLia => match value.as_int().ok_or_else(bad)? {
                -2 => Ok(Weight::MinusInf),
                -1 => Ok(Weight::PlusInf),
                v if v >= 0 => Ok(Weight::Finite(v as u64)),
                _ => Err(bad()),
            },
            TheoryEncoding::BoundedTropicalLia(b) => {
                let v = value.as_int().ok_or_else(bad)?;
                if v < 0 || v as u64 > b + 1 {
                    Err(bad())
                } else if v as u64 == b + 1 {
                    Ok(Weight::PlusInf)
                } else {
                    Ok(Weight::Finite(v as u64))
                }
            }
            TheoryEncoding::BoundedTropicalBv { bound, .. } => {
                let v = value.as_bv().ok_or_else(bad)?;
                if v > bound + 1 {
                    Err(bad())
                } else if v == bound + 1 {
                    Ok(Weight::PlusInf)
                } else {
                    Ok(Weight::Finite(v))
                }
            }
        }
    }
}

impl fmt::Display for TheoryEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TheoryEncoding::PropositionalBoolean => f.write_str("propositional"),
            TheoryEncoding::TropicalLia => f.write_str("tropical-lia"),
            TheoryEncoding::BoundedTropicalLia(b) => write!(f, "btropical({b})-lia"),
            TheoryEncoding::BoundedTropicalBv { bound, width } => write!(f, "btropical({bound})-bv{width}"),
            TheoryEncoding::BottleneckLia => f.write_str("bottleneck-lia"),
        }
    }
}

/// SMT-LIB symbol for a variable; names with brackets are `|quoted|`.
pub fn smt_symbol(v: &VarId, alphabet: &Alphabet) -> String {
    let name = v.name(alphabet);
    if name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        name
    } else {
        format!("|{name}|")
    }
}

/// Produces SMT-LIB text for equation systems under one encoding.
#[derive(Debug, Clone)]
pub struct Encoder {
    encoding: TheoryEncoding,
    alphabet: Alphabet,
}

impl Encoder {
    pub fn new(encoding: TheoryEncoding, alphabet: Alphabet) -> Self {
        Encoder { encoding, alphabet }
    }

    pub fn encoding(&self) -> TheoryEncoding {
        self.encoding
    }

    pub fn header(&self) -> String {
        format!("(set-option :produce-models true)\n(set-logic {})\n", self.encoding.logic())
    }

    pub fn declare(&self, v: &VarId) -> String {
        let name = smt_symbol(v, &self.alphabet);
        let mut s = format!("(declare-const {name} {})\n", self.encoding.sort());
        if let Some(r) = self.encoding.range(&name) {
            writeln!(s, "(assert {r})").unwrap();
        }
        s
    }

    /// One `assert` for the equation, sharing repeated subterms via `let`.
    pub fn assert_equation(&self, eq: &Equation) -> String {
        let mut refs: HashMap<*const Term, usize> = HashMap::new();
        count_refs(&eq.lhs, &mut refs);
        count_refs(&eq.rhs, &mut refs);
        let mut state = LetState { names: HashMap::new(), levels: Vec::new(), counter: 0, refs };
        let (l, _) = self.emit(&eq.lhs, &mut state, true);
        let (r, _) = self.emit(&eq.rhs, &mut state, true);
        let mut body = match (self.encoding, eq.lhs.as_ref(), eq.rhs.as_ref()) {
            (TheoryEncoding::PropositionalBoolean, Term::Const(Weight::Bit(true)), _) => r,
            (TheoryEncoding::PropositionalBoolean, Term::Const(Weight::Bit(false)), _) => format!("(not {r})"),
            _ => format!("(= {l} {r})"),
        };
        for level in state.levels.iter().rev() {
            if level.is_empty() {
                continue;
            }
            let binds: Vec<String> = level.iter().map(|(n, e)| format!("({n} {e})")).collect();
            body = format!("(let ({}) {body})", binds.join(" "));
        }
        format!("(assert {body})\n")
    }

    /// Returns the expression (or bound name) for `t` and its let level.
    fn emit(&self, t: &Arc<Term>, st: &mut LetState, root: bool) -> (String, usize) {
        let key = Arc::as_ptr(t);
        if let Some((name, lvl)) = st.names.get(&key) {
            return (name.clone(), *lvl);
        }
        match t.as_ref() {
            Term::Const(w) => (self.encoding.constant(*w), 0),
            Term::Var(v) => (smt_symbol(v, &self.alphabet), 0),
            Term::Add(l, r) | Term::Mul(l, r) => {
                let (ls, ll) = self.emit(l, st, false);
                let (rs, rl) = self.emit(r, st, false);
                let expr = if matches!(t.as_ref(), Term::Add(..)) {
                    self.encoding.add(&ls, &rs)
                } else {
                    self.encoding.mul(&ls, &rs)
                };
                let lvl = ll.max(rl);
                let shared = st.refs.get(&key).copied().unwrap_or(0) > 1;
                if root || !(shared || self.encoding.duplicates_operands()) {
                    return (expr, lvl);
                }
                let name = format!("_t{}", st.counter);
                st.counter += 1;
                let lvl = lvl + 1;
                if st.levels.len() < lvl {
                    st.levels.resize_with(lvl, Vec::new);
                }
                st.levels[lvl - 1].push((name.clone(), expr));
                st.names.insert(key, (name.clone(), lvl));
                (name, lvl)
            }
        }
    }

    /// Declarations and assertions for a whole system.
    pub fn encode_system(&self, sys: &EqSystem) -> String {
        let mut s = String::new();
        for v in sys.registry() {
            s.push_str(&self.declare(v));
        }
        for eq in sys.equations() {
            s.push_str(&self.assert_equation(eq));
        }
        s
    }

    /// Declarations and assertions for an increment.
    pub fn encode_delta(&self, delta: &SystemDelta) -> String {
        let mut s = String::new();
        for v in &delta.new_vars {
            s.push_str(&self.declare(v));
        }
        for eq in &delta.equations {
            s.push_str(&self.assert_equation(eq));
        }
        s
    }
}

struct LetState {
    names: HashMap<*const Term, (String, usize)>,
    levels: Vec<Vec<(String, String)>>,
    counter: usize,
    refs: HashMap<*const Term, usize>,
}

fn count_refs(t: &Arc<Term>, refs: &mut HashMap<*const Term, usize>) {
    let c = refs.entry(Arc::as_ptr(t)).or_insert(0);
    *c += 1;
    if *c > 1 {
        return;
    }
    if let Term::Add(l, r) | Term::Mul(l, r) = t.as_ref() {
        count_refs(l, refs);
        count_refs(r, refs);
    }
}

/// Minimal s-expression, enough for solver responses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

impl Sexp {
    pub fn parse(text: &str) -> Result<Sexp, SmtError> {
        let mut items = Self::parse_all(text)?;
        match items.len() {
            1 => Ok(items.remove(0)),
            _ => Err(SmtError::UnparseableModel(format!("expected one expression in {text:?}"))),
        }
    }

    pub fn parse_all(text: &str) -> Result<Vec<Sexp>, SmtError> {
        let err = |m: &str| SmtError::UnparseableModel(format!("{m} in {text:?}"));
        let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
        let mut chars = text.chars().peekable();
        while let Some(&c) = chars.peek() {
            match c {
                '(' => {
                    chars.next();
                    stack.push(Vec::new());
                }
                ')' => {
                    chars.next();
                    let done = stack.pop().ok_or_else(|| err("unbalanced `)`"))?;
                    stack.last_mut().ok_or_else(|| err("unbalanced `)`"))?.push(Sexp::List(done));
                }
                c if c.is_whitespace() => {
                    chars.next();
                }
                '|' => {
                    chars.next();
                    let mut s = String::new();
                    loop {
                        match chars.next() {
                            Some('|') => break,
                            Some(c) => s.push(c),
                            None => return Err(err("unterminated symbol")),
                        }
                    }
                    stack.last_mut().unwrap().push(Sexp::Atom(s));
                }
                '"' => {
                    chars.next();
                    let mut s = String::new();
                    loop {
                        match chars.next() {
                            Some('"') if chars.peek() == Some(&'"') => {
                                chars.next();
                                s.push('"');
                            }
                            Some('"') => break,
                            Some(c) => s.push(c),
                            None => return Err(err("unterminated string")),
                        }
                    }
                    stack.last_mut().unwrap().push(Sexp::Atom(s));
                }
                _ => {
                    let mut s = String::new();
                    while let Some(&c) = chars.peek() {
                        if c.is_whitespace() || c == '(' || c == ')' {
                            break;
                        }
                        s.push(c);
                        chars.next();
                    }
                    stack.last_mut().unwrap().push(Sexp::Atom(s));
                }
            }
        }
        if stack.len() != 1 {
            return Err(err("unbalanced `(`"));
        }
        Ok(stack.pop().unwrap())
    }

    fn as_int(&self) -> Option<i64> {
        match self {
            Sexp::Atom(a) => a.parse().ok(),
            Sexp::List(items) => match items.as_slice() {
                [Sexp::Atom(minus), inner] if minus == "-" => inner.as_int().map(|v| -v),
                _ => None,
            },
        }
    }

    fn as_bv(&self) -> Option<u64> {
        match self {
            Sexp::Atom(a) if a.starts_with("#b") => u64::from_str_radix(&a[2..], 2).ok(),
            Sexp::Atom(a) if a.starts_with("#x") => u64::from_str_radix(&a[2..], 16).ok(),
            Sexp::List(items) => match items.as_slice() {
                [Sexp::Atom(us), Sexp::Atom(bv), _] if us == "_" && bv.starts_with("bv") => bv[2..].parse().ok(),
                _ => None,
            },
            _ => None,
        }
    }
}

impl fmt::Display for Sexp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sexp::Atom(a) => f.write_str(a),
            Sexp::List(items) => {
                f.write_str("(")?;
                for (i, it) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{it}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// How to launch the solver.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub program: String,
    pub args: Vec<String>,
    /// Wall-clock limit per `check`; the process is killed when exceeded.
    pub timeout: Option<Duration>,
    /// Passed to z3 as `-memory:<MB>`.
    pub memory_mb: Option<u64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            program: std::env::var("WFALEARN_SOLVER").unwrap_or_else(|_| "z3".to_string()),
            args: vec!["-in".into(), "-smt2".into()],
            timeout: Some(Duration::from_secs(300)),
            memory_mb: None,
        }
    }
}

/// A running solver child process.
struct SolverProcess {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

impl SolverProcess {
    fn spawn(cfg: &SolverConfig) -> Result<Self, SmtError> {
        let mut cmd = Command::new(&cfg.program);
        cmd.args(&cfg.args);
        if let Some(mb) = cfg.memory_mb {
            cmd.arg(format!("-memory:{mb}"));
        }
        let mut child = cmd
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|source| SmtError::Spawn { program: cfg.program.clone(), source })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                match line {
                    Ok(l) => {
                        if tx.send(l).is_err() {
                            break;
                        }
                    }
                    Err(_) => break,
                }
            }
        });
        Ok(SolverProcess { child, stdin, lines: rx })
    }

    fn send(&mut self, text: &str) -> Result<(), SmtError> {
        self.stdin
            .write_all(text.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| SmtError::Crash(format!("write failed: {e}")))
    }

    /// Reads one complete response (balanced parentheses).
    fn response(&mut self, deadline: Option<Instant>) -> Result<String, SmtError> {
        let mut buf = String::new();
        let mut depth: i64 = 0;
        loop {
            let line = match deadline {
                Some(d) => {
                    let left = d.saturating_duration_since(Instant::now());
                    match self.lines.recv_timeout(left) {
                        Ok(l) => l,
                        Err(RecvTimeoutError::Timeout) => {
                            self.kill();
                            return Err(SmtError::Timeout);
                        }
                        Err(RecvTimeoutError::Disconnected) => return Err(self.died()),
                    }
                }
                None => self.lines.recv().map_err(|_| self.died())?,
            };
            let trimmed = line.trim();
            if trimmed.is_empty() && depth == 0 {
                continue;
            }
            depth += paren_balance(trimmed);
            if !buf.is_empty() {
                buf.push('\n');
            }
            buf.push_str(trimmed);
            if depth <= 0 {
                return Ok(buf);
            }
        }
    }

    fn died(&mut self) -> SmtError {
        match self.child.wait() {
            Ok(status) => SmtError::Crash(format!("solver exited with {status}")),
            Err(e) => SmtError::Crash(e.to_string()),
        }
    }

    fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for SolverProcess {
    fn drop(&mut self) {
        let _ = self.stdin.write_all(b"(exit)\n");
        let _ = self.stdin.flush();
        self.kill();
    }
}

fn paren_balance(s: &str) -> i64 {
    let mut depth = 0;
    let mut in_str = false;
    let mut in_sym = false;
    for c in s.chars() {
        match c {
            '"' if !in_sym => in_str = !in_str,
            '|' if !in_str => in_sym = !in_sym,
            '(' if !in_str && !in_sym => depth += 1,
            ')' if !in_str && !in_sym => depth -= 1,
            _ => {}
        }
    }
    depth
}

/// Incremental sessions keep one solver process and only append assertions;
/// one-shot sessions replay the whole script in a fresh process per check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionMode {
    Incremental,
    Oneshot,
}

/// A satisfying assignment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Model {
    values: HashMap<VarId, Weight>,
}

impl Model {
    pub fn new(values: HashMap<VarId, Weight>) -> Self {
        Model { values }
    }

    pub fn get(&self, v: &VarId) -> Option<Weight> {
        self.values.get(v).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VarId, &Weight)> {
        self.values.iter()
    }
}

/// A conversation with an SMT solver about one Φ(n, O) as it grows.
pub struct SolverSession {
    config: SolverConfig,
    encoder: Encoder,
    spec: SemiringSpec,
    mode: SessionMode,
    states: usize,
    declared: Vec<VarId>,
    by_name: HashMap<String, VarId>,
    script: String,
    process: Option<SolverProcess>,
    dump: Option<File>,
    checks: usize,
}

impl SolverSession {
    pub fn new(
        config: SolverConfig,
        encoding: TheoryEncoding,
        spec: SemiringSpec,
        alphabet: Alphabet,
        states: usize,
        mode: SessionMode,
    ) -> Result<Self, SmtError> {
        if !encoding.matches(spec) {
            return Err(SmtError::EncodingMismatch { encoding, spec });
        }
        let encoder = Encoder::new(encoding, alphabet);
        let script = encoder.header();
        let mut session = SolverSession {
            config,
            encoder,
            spec,
            mode,
            states,
            declared: Vec::new(),
            by_name: HashMap::new(),
            script,
            process: None,
            dump: None,
            checks: 0,
        };
        if mode == SessionMode::Incremental {
            let mut p = SolverProcess::spawn(&session.config)?;
            p.send(&session.script)?;
            session.process = Some(p);
        }
        Ok(session)
    }

    /// Appends every command sent from now on to `path`.
    pub fn dump_to(&mut self, path: &Path) -> Result<(), SmtError> {
        let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
        f.write_all(format!("; session: {} states, {:?}\n", self.states, self.mode).as_bytes())?;
        f.write_all(self.script.as_bytes())?;
        self.dump = Some(f);
        Ok(())
    }

    pub fn states(&self) -> usize {
        self.states
    }

    /// Changes the wall-clock limit applied to subsequent checks.
    pub fn set_timeout(&mut self, timeout: Option<Duration>) {
        self.config.timeout = timeout;
    }

    pub fn mode(&self) -> SessionMode {
        self.mode
    }

    pub fn encoding(&self) -> TheoryEncoding {
        self.encoder.encoding()
    }

    /// The full assertion log so far.
    pub fn script(&self) -> &str {
        &self.script
    }

    fn push_text(&mut self, text: &str) -> Result<(), SmtError> {
        self.script.push_str(text);
        if let Some(f) = &mut self.dump {
            f.write_all(text.as_bytes())?;
        }
        if let Some(p) = &mut self.process {
            p.send(text)?;
        }
        Ok(())
    }

    fn note_vars<'a>(&mut self, vars: impl IntoIterator<Item = &'a VarId>) {
        for v in vars {
            let name = v.name(self.encoder.alphabet_ref());
            if let std::collections::hash_map::Entry::Vacant(e) = self.by_name.entry(name) {
                e.insert(v.clone());
                self.declared.push(v.clone());
            }
        }
    }

    /// Submits a whole system (declarations and all equations).
    pub fn add_system(&mut self, sys: &EqSystem) -> Result<(), SmtError> {
        self.check_system(sys)?;
        let text = self.encoder.encode_system(sys);
        self.note_vars(sys.registry());
        self.push_text(&text)
    }

    /// Submits an increment produced by [`EqSystem::extend`].
    pub fn add_delta(&mut self, sys: &EqSystem, delta: &SystemDelta) -> Result<(), SmtError> {
        self.check_system(sys)?;
        let text = self.encoder.encode_delta(delta);
        self.note_vars(&delta.new_vars);
        self.push_text(&text)
    }

    fn check_system(&self, sys: &EqSystem) -> Result<(), SmtError> {
        if sys.states() != self.states {
            return Err(SmtError::StateCountChanged { expected: self.states, got: sys.states() });
        }
        if !self.encoder.encoding().matches(sys.spec()) {
            return Err(SmtError::EncodingMismatch { encoding: self.encoder.encoding(), spec: sys.spec() });
        }
        Ok(())
    }

    fn get_value_command(&self) -> String {
        if self.declared.is_empty() {
            return String::new();
        }
        let names: Vec<String> = self.declared.iter().map(|v| smt_symbol(v, self.encoder.alphabet_ref())).collect();
        format!("(get-value ({}))\n", names.join(" "))
    }

    /// Decides the current assertions. `Ok(None)` means unsatisfiable.
    pub fn check(&mut self) -> Result<Option<Model>, SmtError> {
        self.checks += 1;
        let deadline = self.config.timeout.map(|t| Instant::now() + t);
        let get_value = self.get_value_command();
        if let Some(f) = &mut self.dump {
            writeln!(f, "(check-sat)")?;
            f.write_all(get_value.as_bytes())?;
        }
        let mut fresh;
        let process = match self.mode {
            SessionMode::Incremental => self.process.as_mut().expect("incremental session has a process"),
            SessionMode::Oneshot => {
                fresh = SolverProcess::spawn(&self.config)?;
                fresh.send(&self.script)?;
                &mut fresh
            }
        };
        process.send("(check-sat)\n")?;
        let verdict = process.response(deadline)?;
        match verdict.as_str() {
            "unsat" => return Ok(None),
            "sat" => {}
            "unknown" => {
                process.send("(get-info :reason-unknown)\n")?;
                let reason = process.response(deadline)?;
                return Err(classify_unknown(&reason));
            }
            other => return Err(classify_error(other)),
        }
        let mut values = HashMap::new();
        if !get_value.is_empty() {
            process.send(&get_value)?;
            let reply = process.response(deadline)?;
            let parsed = Sexp::parse(&reply)?;
            let Sexp::List(pairs) = parsed else {
                return Err(classify_error(&reply));
            };
            for pair in pairs {
                let Sexp::List(kv) = pair else {
                    return Err(SmtError::UnparseableModel(reply.clone()));
                };
                let [Sexp::Atom(name), value] = kv.as_slice() else {
                    return Err(SmtError::UnparseableModel(reply.clone()));
                };
                let var = self
                    .by_name
                    .get(name)
                    .ok_or_else(|| SmtError::UnparseableModel(format!("unexpected variable {name}")))?;
                values.insert(var.clone(), self.encoder.encoding().decode(value)?);
            }
        }
        // Anything the solver did not report is unconstrained.
        for v in &self.declared {
            values.entry(v.clone()).or_insert_with(|| self.spec.zero());
        }
        Ok(Some(Model { values }))
    }

    pub fn checks(&self) -> usize {
        self.checks
    }
}

impl Encoder {
    fn alphabet_ref(&self) -> &Alphabet {
        &self.alphabet
    }
}

fn classify_unknown(reason: &str) -> SmtError {
    let r = reason.to_ascii_lowercase();
    if r.contains("memout") || r.contains("memory") {
        SmtError::OutOfMemory
    } else if r.contains("timeout") || r.contains("canceled") {
        SmtError::Timeout
    } else {
        SmtError::Unknown(reason.to_string())
    }
}

fn classify_error(reply: &str) -> SmtError {
    if reply.to_ascii_lowercase().contains("memory") {
        SmtError::OutOfMemory
    } else {
        SmtError::SolverError(reply.to_string())
    }
}

/// Builds the hypothesis automaton from a model of Φ(n, O). Witness systems
/// have no λ variables; the final weights are the generators at ε.
pub fn decode_wfa(
    model: &Model,
    n: usize,
    spec: SemiringSpec,
    alphabet: &Alphabet,
    source: EncodingMode,
) -> Result<Wfa, SmtError> {
    let get = |v: VarId| {
        model.get(&v).ok_or_else(|| SmtError::MissingVariable(v.name(alphabet)))
    };
    let iota = (0..n).map(|i| get(VarId::Iota(i))).collect::<Result<Vec<_>, _>>()?;
    let delta = (0..alphabet.len())
        .map(|symbol| {
            (0..n)
                .map(|from| (0..n).map(|to| get(VarId::Delta { symbol, from, to })).collect::<Result<Vec<_>, _>>())
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let lambda = (0..n)
        .map(|i| match source {
            EncodingMode::Naive => get(VarId::Lambda(i)),
            EncodingMode::Witness => get(VarId::Gen(i, Word::empty())),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Wfa::new(spec, alphabet.clone(), iota, delta, lambda)?)
}
