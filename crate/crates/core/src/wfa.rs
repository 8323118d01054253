//! Weighted finite automata, their semantics and state languages.

use std::collections::{HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::path::Path;

use thiserror::Error;

use crate::semiring::{SemiringError, SemiringKind, SemiringSpec, Weight};

#[derive(Debug, Error)]
pub enum WfaError {
    #[error("symbol {0:?} is not in the alphabet")]
    UnknownSymbol(String),
    #[error("word set is not suffix-closed: missing {0:?}")]
    NotSuffixClosed(String),
    #[error("malformed automaton: {0}")]
    Invalid(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Semiring(#[from] SemiringError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Ordered list of distinct single-character symbols. The order is the one
/// used for shortlex enumeration.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Alphabet {
    symbols: Vec<char>,
}

impl Alphabet {
    pub fn new(symbols: Vec<char>) -> Result<Self, WfaError> {
        if symbols.is_empty() {
            return Err(WfaError::Invalid("alphabet is empty".into()));
        }
        let mut seen = HashSet::new();
        for &c in &symbols {
            if !c.is_ascii_alphanumeric() {
                return Err(WfaError::Invalid(format!("symbol {c:?} is not ASCII alphanumeric")));
            }
            if !seen.insert(c) {
                return Err(WfaError::Invalid(format!("duplicate symbol {c:?}")));
            }
        }
        Ok(Alphabet { symbols })
    }

    /// The first `k` symbols of `a..z A..Z 0..9`.
    pub fn standard(k: usize) -> Result<Self, WfaError> {
        let pool: Vec<char> = ('a'..='z').chain('A'..='Z').chain('0'..='9').collect();
        if k == 0 || k > pool.len() {
            return Err(WfaError::Invalid(format!(
                "alphabet size must be in 1..={}, got {k}",
                pool.len()
            )));
        }
        Alphabet::new(pool[..k].to_vec())
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn symbol(&self, idx: usize) -> char {
        self.symbols[idx]
    }

    pub fn index_of(&self, c: char) -> Option<usize> {
        self.symbols.iter().position(|&s| s == c)
    }

    /// Parses a word written as a string of symbols; the empty string is ε.
    pub fn parse_word(&self, s: &str) -> Result<Word, WfaError> {
        s.chars()
            .map(|c| self.index_of(c).ok_or_else(|| WfaError::UnknownSymbol(c.to_string())))
            .collect::<Result<Vec<_>, _>>()
            .map(Word)
    }

    /// Renders a word as its symbol string (ε renders as the empty string).
    pub fn render(&self, w: &Word) -> String {
        w.0.iter().map(|&i| self.symbols.get(i).copied().unwrap_or('?')).collect()
    }

    /// Renders a word for humans, writing ε for the empty word.
    pub fn display(&self, w: &Word) -> String {
        if w.is_empty() {
            "ε".to_string()
        } else {
            self.render(w)
        }
    }
}

/// A finite sequence of symbol indices into an [`Alphabet`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }

    /// Splits `aw` into `(a, w)`.
    pub fn split_first(&self) -> Option<(usize, Word)> {
        self.0.split_first().map(|(&a, rest)| (a, Word(rest.to_vec())))
    }

    /// All suffixes, from the word itself down to ε.
    pub fn suffixes(&self) -> impl Iterator<Item = Word> + '_ {
        (0..=self.0.len()).map(move |k| Word(self.0[k..].to_vec()))
    }

    /// Shortlex comparison: length first, then symbol order.
    pub fn shortlex_cmp(&self, other: &Word) -> std::cmp::Ordering {
        self.len().cmp(&other.len()).then_with(|| self.0.cmp(&other.0))
    }
}

/// Iterator over Σ* in shortlex order.
pub struct Shortlex {
    k: usize,
    current: Option<Vec<usize>>,
}

impl Shortlex {
    pub fn new(alphabet_size: usize) -> Self {
        Shortlex { k: alphabet_size, current: Some(Vec::new()) }
    }
}

impl Iterator for Shortlex {
    type Item = Word;

    fn next(&mut self) -> Option<Word> {
        let cur = self.current.take()?;
        let out = Word(cur.clone());
        if self.k > 0 {
            let mut nxt = cur;
            let mut pos = nxt.len();
            loop {
                if pos == 0 {
                    nxt = vec![0; nxt.len() + 1];
                    break;
                }
                pos -= 1;
                if nxt[pos] + 1 < self.k {
                    nxt[pos] += 1;
                    for x in &mut nxt[pos + 1..] {
                        *x = 0;
                    }
                    break;
                }
            }
            self.current = Some(nxt);
        }
        Some(out)
    }
}

/// All words of length at most `max_len`, in shortlex order.
pub fn words_up_to(alphabet_size: usize, max_len: usize) -> impl Iterator<Item = Word> {
    Shortlex::new(alphabet_size).take_while(move |w| w.len() <= max_len)
}

/// An n-state WFA ⟨ι, δ, λ⟩ over a semiring.
///
/// Values are immutable after construction; all fields are validated by
/// [`Wfa::new`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Wfa {
    spec: SemiringSpec,
    alphabet: Alphabet,
    n: usize,
    iota: Vec<Weight>,
    /// One row-major n×n matrix per symbol.
    delta: Vec<Vec<Weight>>,
    lambda: Vec<Weight>,
}

impl Wfa {
    /// `delta[a][i][j]` is the weight of the `i → j` transition on symbol `a`.
    pub fn new(
        spec: SemiringSpec,
        alphabet: Alphabet,
        iota: Vec<Weight>,
        delta: Vec<Vec<Vec<Weight>>>,
        lambda: Vec<Weight>,
    ) -> Result<Self, WfaError> {
        let n = iota.len();
        if n == 0 {
            return Err(WfaError::Invalid("an automaton needs at least one state".into()));
        }
        if lambda.len() != n {
            return Err(WfaError::Invalid(format!("final vector has {} entries, expected {n}", lambda.len())));
        }
        if delta.len() != alphabet.len() {
            return Err(WfaError::Invalid(format!(
                "{} transition matrices for {} symbols",
                delta.len(),
                alphabet.len()
            )));
        }
        let mut flat = Vec::with_capacity(delta.len());
        for (a, m) in delta.into_iter().enumerate() {
            if m.len() != n || m.iter().any(|row| row.len() != n) {
                return Err(WfaError::Invalid(format!(
                    "transition matrix for {:?} is not {n}x{n}",
                    alphabet.symbol(a)
                )));
            }
            flat.push(m.into_iter().flatten().collect::<Vec<_>>());
        }
        for w in iota.iter().chain(&lambda).chain(flat.iter().flatten()) {
            spec.validate(*w)?;
        }
        Ok(Wfa { spec, alphabet, n, iota, delta: flat, lambda })
    }

    pub fn spec(&self) -> SemiringSpec {
        self.spec
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn states(&self) -> usize {
        self.n
    }

    pub fn iota(&self) -> &[Weight] {
        &self.iota
    }

    pub fn lambda(&self) -> &[Weight] {
        &self.lambda
    }

    pub fn delta(&self, symbol: usize, i: usize, j: usize) -> Weight {
        self.delta[symbol][i * self.n + j]
    }

    fn check_word(&self, w: &Word) -> Result<(), WfaError> {
        match w.0.iter().find(|&&a| a >= self.alphabet.len()) {
            Some(a) => Err(WfaError::UnknownSymbol(format!("#{a}"))),
            None => Ok(()),
        }
    }

    /// Advances a row vector by one symbol: `row × δ^a`.
    pub fn step(&self, row: &[Weight], symbol: usize) -> Result<Vec<Weight>, WfaError> {
        let m = &self.delta[symbol];
        let mut out = vec![self.spec.zero(); self.n];
        for (i, &r) in row.iter().enumerate() {
            if r == self.spec.zero() {
                continue;
            }
            for (j, o) in out.iter_mut().enumerate() {
                let t = self.spec.times(r, m[i * self.n + j])?;
                *o = self.spec.plus(*o, t);
            }
        }
        Ok(out)
    }

    /// Contracts a row vector with λ.
    pub fn finish(&self, row: &[Weight]) -> Result<Weight, WfaError> {
        let mut acc = self.spec.zero();
        for (&r, &l) in row.iter().zip(&self.lambda) {
            acc = self.spec.plus(acc, self.spec.times(r, l)?);
        }
        Ok(acc)
    }

    /// ⟦A⟧(w) = ι × δ^{a1} × … × δ^{ak} × λ, folded left to right.
    pub fn evaluate(&self, w: &Word) -> Result<Weight, WfaError> {
        self.check_word(w)?;
        let mut row = self.iota.clone();
        for &a in w.symbols() {
            row = self.step(&row, a)?;
        }
        self.finish(&row)
    }

    /// Computes ⟦A,q⟧(w) for every state q and every w in a suffix-closed
    /// set containing ε.
    pub fn state_languages<'a, I>(&self, words: I) -> Result<StateLanguages, WfaError>
    where
        I: IntoIterator<Item = &'a Word>,
    {
        let mut words: Vec<&Word> = words.into_iter().collect();
        let set: HashSet<&Word> = words.iter().copied().collect();
        if !set.contains(&Word::empty()) {
            return Err(WfaError::NotSuffixClosed(String::new()));
        }
        for w in &words {
            self.check_word(w)?;
            if let Some((_, rest)) = w.split_first() {
                if !set.contains(&rest) {
                    return Err(WfaError::NotSuffixClosed(self.alphabet.render(&rest)));
                }
            }
        }
        words.sort_by_key(|w| w.len());
        let mut table: HashMap<Word, Vec<Weight>> = HashMap::with_capacity(words.len());
        for w in words {
            if table.contains_key(w) {
                continue;
            }
            let column = match w.split_first() {
                None => self.lambda.clone(),
                Some((a, rest)) => {
                    let next = &table[&rest];
                    let m = &self.delta[a];
                    let mut col = Vec::with_capacity(self.n);
                    for i in 0..self.n {
                        let mut acc = self.spec.zero();
                        for (j, &f) in next.iter().enumerate() {
                            acc = self.spec.plus(acc, self.spec.times(m[i * self.n + j], f)?);
                        }
                        col.push(acc);
                    }
                    col
                }
            };
            table.insert(w.clone(), column);
        }
        Ok(StateLanguages { table })
    }

    /// ⊕_i ι_i ⊙ ⟦A,q_i⟧(w), computed through the state languages of `w`'s
    /// suffixes. Always equal to [`Wfa::evaluate`].
    pub fn decompose_check(&self, w: &Word) -> Result<Weight, WfaError> {
        self.check_word(w)?;
        let suffixes: Vec<Word> = w.suffixes().collect();
        let langs = self.state_languages(&suffixes)?;
        let mut acc = self.spec.zero();
        for (i, &init) in self.iota.iter().enumerate() {
            let f = langs.get(i, w).expect("word is in its own suffix set");
            acc = self.spec.plus(acc, self.spec.times(init, f)?);
        }
        Ok(acc)
    }

    /// Renders the automaton in the text format read by [`Wfa::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let join = |ws: &[Weight]| ws.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(" ");
        writeln!(s, "wfa 1").unwrap();
        writeln!(s, "semiring {}", self.spec.kind()).unwrap();
        if let Some(b) = self.spec.bound() {
            writeln!(s, "bound {b}").unwrap();
        }
        let syms: Vec<String> = self.alphabet.symbols().iter().map(|c| c.to_string()).collect();
        writeln!(s, "alphabet {}", syms.join(" ")).unwrap();
        writeln!(s, "states {}", self.n).unwrap();
        writeln!(s, "initial {}", join(&self.iota)).unwrap();
        writeln!(s, "final {}", join(&self.lambda)).unwrap();
        for (a, m) in self.delta.iter().enumerate() {
            writeln!(s, "delta {}", self.alphabet.symbol(a)).unwrap();
            for row in m.chunks(self.n) {
                writeln!(s, "{}", join(row)).unwrap();
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, WfaError> {
        Parser::new(text).parse()
    }

    pub fn load(path: &Path) -> Result<Self, WfaError> {
        Wfa::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), WfaError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

impl fmt::Display for Wfa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Table of state-language values ⟦A,q⟧(w).
#[derive(Debug, Clone)]
pub struct StateLanguages {
    table: HashMap<Word, Vec<Weight>>,
}

impl StateLanguages {
    pub fn get(&self, state: usize, w: &Word) -> Option<Weight> {
        self.table.get(w).and_then(|col| col.get(state)).copied()
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

struct Parser<'a> {
    lines: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = (usize, &'a str)> + 'a> = Box::new(
            text.lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
                .filter(|(_, l)| !l.is_empty()),
        );
        Parser { lines: it.peekable() }
    }

    fn line(&mut self) -> Result<(usize, &'a str), WfaError> {
        self.lines
            .next()
            .ok_or(WfaError::Parse { line: 0, msg: "unexpected end of input".into() })
    }

    fn keyed(&mut self, key: &str) -> Result<(usize, Vec<&'a str>), WfaError> {
        let (ln, l) = self.line()?;
        let mut parts = l.split_whitespace();
        if parts.next() != Some(key) {
            return Err(WfaError::Parse { line: ln, msg: format!("expected `{key}`") });
        }
        Ok((ln, parts.collect()))
    }

    fn weights(spec: SemiringSpec, ln: usize, toks: &[&str], n: usize) -> Result<Vec<Weight>, WfaError> {
        if toks.len() != n {
            return Err(WfaError::Parse { line: ln, msg: format!("expected {n} weights, found {}", toks.len()) });
        }
        toks.iter()
            .map(|t| spec.parse_weight(t).map_err(|e| WfaError::Parse { line: ln, msg: e.to_string() }))
            .collect()
    }

    fn single<T: std::str::FromStr>(ln: usize, toks: &[&str], what: &str) -> Result<T, WfaError> {
        match toks {
            [t] => t.parse().map_err(|_| WfaError::Parse { line: ln, msg: format!("bad {what} {t:?}") }),
            _ => Err(WfaError::Parse { line: ln, msg: format!("expected a single {what}") }),
        }
    }

    fn parse(mut self) -> Result<Wfa, WfaError> {
        let (ln, v) = self.keyed("wfa")?;
        if v != ["1"] {
            return Err(WfaError::Parse { line: ln, msg: "unsupported format version".into() });
        }
        let (ln, k) = self.keyed("semiring")?;
        let kind: SemiringKind = Self::single::<String>(ln, &k, "semiring")?
            .parse()
            .map_err(|e: SemiringError| WfaError::Parse { line: ln, msg: e.to_string() })?;
        let bound = match self.lines.peek() {
            Some((_, l)) if l.starts_with("bound") => {
                let (ln, b) = self.keyed("bound")?;
                Some(Self::single::<u64>(ln, &b, "bound")?)
            }
            _ => None,
        };
        let spec = SemiringSpec::new(kind, bound)?;
        let (ln, syms) = self.keyed("alphabet")?;
        let chars = syms
            .iter()
            .map(|s| {
                let mut cs = s.chars();
                match (cs.next(), cs.next()) {
                    (Some(c), None) => Ok(c),
                    _ => Err(WfaError::Parse { line: ln, msg: format!("symbol {s:?} is not a single character") }),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let alphabet = Alphabet::new(chars)?;
        let (ln, st) = self.keyed("states")?;
        let n: usize = Self::single(ln, &st, "state count")?;
        let (ln, toks) = self.keyed("initial")?;
        let iota = Self::weights(spec, ln, &toks, n)?;
        let (ln, toks) = self.keyed("final")?;
        let lambda = Self::weights(spec, ln, &toks, n)?;
        let mut delta = vec![None; alphabet.len()];
        for _ in 0..alphabet.len() {
            let (ln, toks) = self.keyed("delta")?;
            let c: char = Self::single(ln, &toks, "symbol")?;
            let a = alphabet
                .index_of(c)
                .ok_or_else(|| WfaError::Parse { line: ln, msg: format!("unknown symbol {c:?}") })?;
            if delta[a].is_some() {
                return Err(WfaError::Parse { line: ln, msg: format!("duplicate matrix for {c:?}") });
            }
            let mut m = Vec::with_capacity(n);
            for _ in 0..n {
                let (ln, row) = self.line()?;
                let toks: Vec<&str> = row.split_whitespace().collect();
                m.push(Self::weights(spec, ln, &toks, n)?);
            }
            delta[a] = Some(m);
        }
        if let Some((ln, _)) = self.lines.next() {
            return Err(WfaError::Parse { line: ln, msg: "trailing content".into() });
        }
        let delta = delta.into_iter().map(|m| m.expect("every symbol parsed once")).collect();
        Wfa::new(spec, alphabet, iota, delta, lambda)
    }
}

/// The 2-state tropical automaton over {a, b} used throughout the docs and
/// tests: ι = (4 5), δ^a = [[6 ∞] [∞ 4]], δ^b = [[6 8] [∞ 12]], λ = (∞ 3)ᵀ.
pub fn example_tropical() -> Wfa {
    use Weight::{Finite as F, PlusInf as I};
    Wfa::new(
        SemiringSpec::Tropical,
        Alphabet::new(vec!['a', 'b']).unwrap(),
        vec![F(4), F(5)],
        vec![vec![vec![F(6), I], vec![I, F(4)]], vec![vec![F(6), F(8)], vec![I, F(12)]]],
        vec![I, F(3)],
    )
    .unwrap()
}
