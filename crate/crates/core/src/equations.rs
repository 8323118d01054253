//! Equation systems over a semiring and the two builders for Φ(n, O).
//!
//! The naive system states `mem(w) = ι × δ^{a1} × … × δ^{ak} × λ` for every
//! observed word. The witness system introduces generator variables
//! `f_i^w` for every suffix `w` of an observation, constrained by
//!
//! * stabilization: `f_i^{aw} = ⊕_j δ^a_{i,j} ⊙ f_j^w`, and
//! * spanning: `mem(w) = ⊕_i ι_i ⊙ f_i^w` for `w ∈ O`,
//!
//! with λ recovered as `f_i^ε`. Both systems only ever grow when `O` grows,
//! which the incremental solver relies on.

use std::collections::{HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::sync::Arc;

use thiserror::Error;

use crate::semiring::{SemiringError, SemiringSpec, Weight};
use crate::teacher::{Teacher, TeacherError};
use crate::wfa::{Alphabet, Word};

#[derive(Debug, Error)]
pub enum EquationError {
    #[error("observation set is empty")]
    EmptyObservationSet,
    #[error("word {0:?} is already observed")]
    DuplicateWord(String),
    #[error("state count must be at least 1")]
    ZeroStates,
    #[error("variable {0} is not assigned")]
    Unassigned(String),
    #[error(transparent)]
    Teacher(#[from] TeacherError),
    #[error(transparent)]
    Semiring(#[from] SemiringError),
}

/// Which Φ(n, O) construction a system uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EncodingMode {
    Naive,
    Witness,
}

impl EncodingMode {
    pub fn name(self) -> &'static str {
        match self {
            EncodingMode::Naive => "naive",
            EncodingMode::Witness => "witness",
        }
    }
}

impl fmt::Display for EncodingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EncodingMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "naive" => Ok(EncodingMode::Naive),
            "witness" => Ok(EncodingMode::Witness),
            _ => Err(format!("unknown mode {s:?} (expected naive or witness)")),
        }
    }
}

/// Unknowns of Φ(n, O). State indices are 0-based here and printed 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarId {
    Iota(usize),
    Delta { symbol: usize, from: usize, to: usize },
    Lambda(usize),
    /// Generator `f_i^w`.
    Gen(usize, Word),
}

impl VarId {
    /// Name used in dumps and solver scripts: `iota_1`, `delta_a_1_2`,
    /// `lambda_1`, `f_1_[ab]`.
    pub fn name(&self, alphabet: &Alphabet) -> String {
        match self {
            VarId::Iota(i) => format!("iota_{}", i + 1),
            VarId::Delta { symbol, from, to } => {
                format!("delta_{}_{}_{}", alphabet.symbol(*symbol), from + 1, to + 1)
            }
            VarId::Lambda(i) => format!("lambda_{}", i + 1),
            VarId::Gen(i, w) => format!("f_{}_[{}]", i + 1, alphabet.render(w)),
        }
    }
}

/// Semiring term. Sums and products are binary; n-ary sums are
/// left-associated chains of `Add`. Subterms are shared.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Const(Weight),
    Var(VarId),
    Add(Arc<Term>, Arc<Term>),
    Mul(Arc<Term>, Arc<Term>),
}

impl Term {
    pub fn constant(w: Weight) -> Arc<Term> {
        Arc::new(Term::Const(w))
    }

    pub fn var(v: VarId) -> Arc<Term> {
        Arc::new(Term::Var(v))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(l: Arc<Term>, r: Arc<Term>) -> Arc<Term> {
        Arc::new(Term::Mul(l, r))
    }

    /// Left-associated sum; panics on an empty iterator (Φ never builds one).
    pub fn sum<I: IntoIterator<Item = Arc<Term>>>(items: I) -> Arc<Term> {
        items
            .into_iter()
            .reduce(|acc, t| Arc::new(Term::Add(acc, t)))
            .expect("sum over at least one term")
    }

    /// Evaluates the term under an assignment, sharing work across repeated
    /// subterms.
    pub fn eval<F>(self: &Arc<Self>, spec: SemiringSpec, assign: &F) -> Result<Weight, EquationError>
    where
        F: Fn(&VarId) -> Option<Weight>,
    {
        let mut memo = HashMap::new();
        self.eval_memo(spec, assign, &mut memo)
    }

    fn eval_memo<F>(
        self: &Arc<Self>,
        spec: SemiringSpec,
        assign: &F,
        memo: &mut HashMap<*const Term, Weight>,
    ) -> Result<Weight, EquationError>
    where
        F: Fn(&VarId) -> Option<Weight>,
    {
        let key = Arc::as_ptr(self);
        if let Some(w) = memo.get(&key) {
            return Ok(*w);
        }
        let out = match self.as_ref() {
            Term::Const(w) => spec.validate(*w)?,
            Term::Var(v) => {
                let w = assign(v).ok_or_else(|| EquationError::Unassigned(format!("{v:?}")))?;
                spec.validate(w)?
            }
            Term::Add(l, r) => spec.add(l.eval_memo(spec, assign, memo)?, r.eval_memo(spec, assign, memo)?)?,
            Term::Mul(l, r) => spec.mul(l.eval_memo(spec, assign, memo)?, r.eval_memo(spec, assign, memo)?)?,
        };
        memo.insert(key, out);
        Ok(out)
    }

    /// Collects every variable occurring in the term.
    pub fn vars(self: &Arc<Self>, out: &mut HashSet<VarId>) {
        let mut seen = HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(t) = stack.pop() {
            if !seen.insert(Arc::as_ptr(&t)) {
                continue;
            }
            match t.as_ref() {
                Term::Const(_) => {}
                Term::Var(v) => {
                    out.insert(v.clone());
                }
                Term::Add(l, r) | Term::Mul(l, r) => {
                    stack.push(l.clone());
                    stack.push(r.clone());
                }
            }
        }
    }

    fn render(&self, alphabet: &Alphabet, out: &mut String) {
        match self {
            Term::Const(w) => write!(out, "{w}").unwrap(),
            Term::Var(v) => out.push_str(&v.name(alphabet)),
            Term::Add(l, r) | Term::Mul(l, r) => {
                out.push('(');
                l.render(alphabet, out);
                out.push_str(if matches!(self, Term::Add(..)) { " + " } else { " * " });
                r.render(alphabet, out);
                out.push(')');
            }
        }
    }
}

/// Where an equation came from. Carries no semantics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Naive,
    Spanning,
    Stabilization,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::Naive => "naive",
            Provenance::Spanning => "spanning",
            Provenance::Stabilization => "stabilization",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Equation {
    pub lhs: Arc<Term>,
    pub rhs: Arc<Term>,
    pub provenance: Provenance,
}

impl Equation {
    pub fn holds<F>(&self, spec: SemiringSpec, assign: &F) -> Result<bool, EquationError>
    where
        F: Fn(&VarId) -> Option<Weight>,
    {
        Ok(self.lhs.eval(spec, assign)? == self.rhs.eval(spec, assign)?)
    }

    pub fn render(&self, alphabet: &Alphabet) -> String {
        let mut s = String::new();
        self.lhs.render(alphabet, &mut s);
        s.push_str(" = ");
        self.rhs.render(alphabet, &mut s);
        s
    }
}

/// Source of output-query answers for the builders.
pub trait OutputOracle {
    fn output(&mut self, w: &Word) -> Result<Weight, TeacherError>;
}

impl<F> OutputOracle for F
where
    F: FnMut(&Word) -> Result<Weight, TeacherError>,
{
    fn output(&mut self, w: &Word) -> Result<Weight, TeacherError> {
        self(w)
    }
}

/// Memoizes output queries so each distinct word is asked once per run.
#[derive(Debug, Default, Clone)]
pub struct MemCache {
    cache: HashMap<Word, Weight>,
}

impl MemCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn query(&mut self, teacher: &mut dyn Teacher, w: &Word) -> Result<Weight, TeacherError> {
        if let Some(v) = self.cache.get(w) {
            return Ok(*v);
        }
        let v = teacher.mem(w)?;
        self.cache.insert(w.clone(), v);
        Ok(v)
    }

    pub fn get(&self, w: &Word) -> Option<Weight> {
        self.cache.get(w).copied()
    }

    pub fn len(&self) -> usize {
        self.cache.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cache.is_empty()
    }
}

/// The union of the suffix sets of all words in `observations`, in shortlex
/// order. Always contains ε.
pub fn suffixes<'a, I>(observations: I) -> Result<Vec<Word>, EquationError>
where
    I: IntoIterator<Item = &'a Word>,
{
    let mut set = HashSet::new();
    let mut any = false;
    for w in observations {
        any = true;
        set.extend(w.suffixes());
    }
    if !any {
        return Err(EquationError::EmptyObservationSet);
    }
    let mut out: Vec<Word> = set.into_iter().collect();
    out.sort_by(|a, b| a.shortlex_cmp(b));
    Ok(out)
}

/// Equations and variables added by one [`EqSystem::extend`] call.
#[derive(Debug, Clone, Default)]
pub struct SystemDelta {
    pub equations: Vec<Equation>,
    pub new_vars: Vec<VarId>,
}

/// A conjunction of term equalities with a registry of declared variables.
#[derive(Debug, Clone)]
pub struct EqSystem {
    spec: SemiringSpec,
    alphabet: Alphabet,
    mode: EncodingMode,
    n: usize,
    observations: Vec<Word>,
    suffix_set: HashSet<Word>,
    equations: Vec<Equation>,
    registry: Vec<VarId>,
    registered: HashSet<VarId>,
}

impl EqSystem {
    /// An empty system over `n` states with the structural variables
    /// (ι, δ, and λ for naive systems) declared.
    pub fn empty(spec: SemiringSpec, alphabet: Alphabet, mode: EncodingMode, n: usize) -> Result<Self, EquationError> {
        if n == 0 {
            return Err(EquationError::ZeroStates);
        }
        let mut sys = EqSystem {
            spec,
            alphabet,
            mode,
            n,
            observations: Vec::new(),
            suffix_set: HashSet::new(),
            equations: Vec::new(),
            registry: Vec::new(),
            registered: HashSet::new(),
        };
        let mut initial = Vec::new();
        initial.extend((0..n).map(VarId::Iota));
        for symbol in 0..sys.alphabet.len() {
            for from in 0..n {
                initial.extend((0..n).map(|to| VarId::Delta { symbol, from, to }));
            }
        }
        if mode == EncodingMode::Naive {
            initial.extend((0..n).map(VarId::Lambda));
        }
        for v in initial {
            sys.register(v);
        }
        Ok(sys)
    }

    pub fn build<M: OutputOracle + ?Sized>(
        spec: SemiringSpec,
        alphabet: Alphabet,
        mode: EncodingMode,
        n: usize,
        observations: &[Word],
        mem: &mut M,
    ) -> Result<Self, EquationError> {
        if observations.is_empty() {
            return Err(EquationError::EmptyObservationSet);
        }
        let mut sys = EqSystem::empty(spec, alphabet, mode, n)?;
        for w in observations {
            sys.extend(mem, w)?;
        }
        Ok(sys)
    }

    pub fn build_naive<M: OutputOracle + ?Sized>(
        spec: SemiringSpec,
        alphabet: Alphabet,
        n: usize,
        observations: &[Word],
        mem: &mut M,
    ) -> Result<Self, EquationError> {
        Self::build(spec, alphabet, EncodingMode::Naive, n, observations, mem)
    }

    pub fn build_witness<M: OutputOracle + ?Sized>(
        spec: SemiringSpec,
        alphabet: Alphabet,
        n: usize,
        observations: &[Word],
        mem: &mut M,
    ) -> Result<Self, EquationError> {
        Self::build(spec, alphabet, EncodingMode::Witness, n, observations, mem)
    }

    fn register(&mut self, v: VarId) -> bool {
        if self.registered.insert(v.clone()) {
            self.registry.push(v);
            true
        } else {
            false
        }
    }

    /// Adds `word` to the observation set, appending its equations. Returns
    /// exactly what was appended.
    pub fn extend<M: OutputOracle + ?Sized>(&mut self, mem: &mut M, word: &Word) -> Result<SystemDelta, EquationError> {
        if self.observations.contains(word) {
            return Err(EquationError::DuplicateWord(self.alphabet.render(word)));
        }
        let value = self.spec.validate(mem.output(word)?)?;
        let eq_start = self.equations.len();
        let var_start = self.registry.len();
        match self.mode {
            EncodingMode::Naive => {
                let rhs = self.naive_product(word);
                self.equations.push(Equation { lhs: Term::constant(value), rhs, provenance: Provenance::Naive });
            }
            EncodingMode::Witness => {
                let mut fresh: Vec<Word> = word.suffixes().filter(|s| !self.suffix_set.contains(s)).collect();
                fresh.sort_by_key(|s| s.len());
                for s in fresh {
                    self.suffix_set.insert(s.clone());
                    for i in 0..self.n {
                        self.register(VarId::Gen(i, s.clone()));
                    }
                    if let Some((a, rest)) = s.split_first() {
                        for i in 0..self.n {
                            let rhs = Term::sum((0..self.n).map(|j| {
                                Term::mul(
                                    Term::var(VarId::Delta { symbol: a, from: i, to: j }),
                                    Term::var(VarId::Gen(j, rest.clone())),
                                )
                            }));
                            self.equations.push(Equation {
                                lhs: Term::var(VarId::Gen(i, s.clone())),
                                rhs,
                                provenance: Provenance::Stabilization,
                            });
                        }
                    }
                }
                let rhs = Term::sum(
                    (0..self.n).map(|i| Term::mul(Term::var(VarId::Iota(i)), Term::var(VarId::Gen(i, word.clone())))),
                );
                self.equations.push(Equation { lhs: Term::constant(value), rhs, provenance: Provenance::Spanning });
            }
        }
        self.observations.push(word.clone());
        Ok(SystemDelta {
            equations: self.equations[eq_start..].to_vec(),
            new_vars: self.registry[var_start..].to_vec(),
        })
    }

    /// Symbolic `ι × δ^{a1} × … × δ^{ak} × λ` by folding the row vector.
    fn naive_product(&self, word: &Word) -> Arc<Term> {
        let n = self.n;
        let mut row: Vec<Arc<Term>> = (0..n).map(|i| Term::var(VarId::Iota(i))).collect();
        for &a in word.symbols() {
            row = (0..n)
                .map(|to| {
                    Term::sum((0..n).map(|from| {
                        Term::mul(row[from].clone(), Term::var(VarId::Delta { symbol: a, from, to }))
                    }))
                })
                .collect();
        }
        Term::sum(row.into_iter().enumerate().map(|(i, t)| Term::mul(t, Term::var(VarId::Lambda(i)))))
    }

    pub fn spec(&self) -> SemiringSpec {
        self.spec
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn mode(&self) -> EncodingMode {
        self.mode
    }

    pub fn states(&self) -> usize {
        self.n
    }

    pub fn observations(&self) -> &[Word] {
        &self.observations
    }

    pub fn equations(&self) -> &[Equation] {
        &self.equations
    }

    pub fn registry(&self) -> &[VarId] {
        &self.registry
    }

    pub fn is_registered(&self, v: &VarId) -> bool {
        self.registered.contains(v)
    }

    /// Checks every equation under an assignment.
    pub fn satisfied_by<F>(&self, assign: &F) -> Result<bool, EquationError>
    where
        F: Fn(&VarId) -> Option<Weight>,
    {
        for eq in &self.equations {
            if !eq.holds(self.spec, assign)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// One equation per line, prefixed with its provenance tag.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for eq in &self.equations {
            writeln!(s, "[{}] {}", eq.provenance.name(), eq.render(&self.alphabet)).unwrap();
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wfa::example_tropical;
    use Weight::Finite;

    fn mem_example() -> impl FnMut(&Word) -> Result<Weight, TeacherError> {
        let a = example_tropical();
        move |w: &Word| Ok(a.evaluate(w)?)
    }

    fn words(a: &Alphabet, ws: &[&str]) -> Vec<Word> {
        ws.iter().map(|w| a.parse_word(w).unwrap()).collect()
    }

    fn ab() -> Alphabet {
        Alphabet::standard(2).unwrap()
    }

    #[test]
    fn suffix_sets() {
        let al = ab();
        let render = |ws: Vec<Word>| ws.iter().map(|w| al.render(w)).collect::<Vec<_>>();
        assert_eq!(render(suffixes(&words(&al, &["ab"])).unwrap()), ["", "b", "ab"]);
        assert_eq!(render(suffixes(&words(&al, &[""])).unwrap()), [""]);
        assert_eq!(render(suffixes(&words(&al, &["ab", "aab"])).unwrap()), ["", "b", "ab", "aab"]);
        assert!(matches!(suffixes(&[]), Err(EquationError::EmptyObservationSet)));
    }

    #[test]
    fn naive_example() {
        let al = ab();
        let sys = EqSystem::build_naive(SemiringSpec::Tropical, al.clone(), 2, &words(&al, &["ab"]), &mut mem_example()).unwrap();
        assert_eq!(sys.equations().len(), 1);
        assert_eq!(sys.registry().len(), 12);
        let mut used = HashSet::new();
        sys.equations()[0].rhs.vars(&mut used);
        assert_eq!(used.len(), 12);
        assert_eq!(sys.equations()[0].lhs.as_ref(), &Term::Const(Finite(21)));
    }

    #[test]
    fn naive_epsilon_single_state() {
        let al = ab();
        let sys = EqSystem::build_naive(SemiringSpec::Tropical, al.clone(), 1, &[Word::empty()], &mut mem_example()).unwrap();
        assert_eq!(sys.dump(), "[naive] 8 = (iota_1 * lambda_1)\n");
    }

    fn delta_depth(t: &Term) -> usize {
        match t {
            Term::Const(_) => 0,
            Term::Var(VarId::Delta { .. }) => 1,
            Term::Var(_) => 0,
            Term::Add(l, r) => delta_depth(l).max(delta_depth(r)),
            Term::Mul(l, r) => delta_depth(l) + delta_depth(r),
        }
    }

    #[test]
    fn naive_product_depth() {
        let al = ab();
        let sys = EqSystem::build_naive(SemiringSpec::Tropical, al.clone(), 2, &words(&al, &["ab", "aab"]), &mut mem_example()).unwrap();
        assert_eq!(sys.equations().len(), 2);
        assert!(sys.registry().iter().all(|v| !matches!(v, VarId::Gen(..))));
        assert_eq!(delta_depth(&sys.equations()[0].rhs), 2);
        assert_eq!(delta_depth(&sys.equations()[1].rhs), 3);
    }

    #[test]
    fn witness_example() {
        let al = ab();
        let sys = EqSystem::build_witness(SemiringSpec::Tropical, al.clone(), 2, &words(&al, &["ab"]), &mut mem_example()).unwrap();
        let count = |p| sys.equations().iter().filter(|e| e.provenance == p).count();
        assert_eq!(count(Provenance::Spanning), 1);
        assert_eq!(count(Provenance::Stabilization), 4);
        assert_eq!(
            sys.dump(),
            "[stabilization] f_1_[b] = ((delta_b_1_1 * f_1_[]) + (delta_b_1_2 * f_2_[]))\n\
             [stabilization] f_2_[b] = ((delta_b_2_1 * f_1_[]) + (delta_b_2_2 * f_2_[]))\n\
             [stabilization] f_1_[ab] = ((delta_a_1_1 * f_1_[b]) + (delta_a_1_2 * f_2_[b]))\n\
             [stabilization] f_2_[ab] = ((delta_a_2_1 * f_1_[b]) + (delta_a_2_2 * f_2_[b]))\n\
             [spanning] 21 = ((iota_1 * f_1_[ab]) + (iota_2 * f_2_[ab]))\n"
        );
        assert!(!sys.registry().iter().any(|v| matches!(v, VarId::Lambda(_))));
    }

    #[test]
    fn witness_epsilon_single_state() {
        let al = ab();
        let sys = EqSystem::build_witness(SemiringSpec::Tropical, al.clone(), 1, &[Word::empty()], &mut mem_example()).unwrap();
        assert_eq!(sys.dump(), "[spanning] 8 = (iota_1 * f_1_[])\n");
    }

    #[test]
    fn witness_extension_shares_suffixes() {
        let al = ab();
        let mut mem = mem_example();
        let mut sys = EqSystem::build_witness(SemiringSpec::Tropical, al.clone(), 2, &words(&al, &["ab"]), &mut mem).unwrap();
        let delta = sys.extend(&mut mem, &al.parse_word("aab").unwrap()).unwrap();
        let spanning = delta.equations.iter().filter(|e| e.provenance == Provenance::Spanning).count();
        let stab = delta.equations.iter().filter(|e| e.provenance == Provenance::Stabilization).count();
        assert_eq!((spanning, stab), (1, 2));
        let aab = al.parse_word("aab").unwrap();
        assert_eq!(delta.new_vars, vec![VarId::Gen(0, aab.clone()), VarId::Gen(1, aab)]);
        let mut used = HashSet::new();
        for e in &delta.equations {
            e.rhs.vars(&mut used);
        }
        assert!(used.contains(&VarId::Gen(0, al.parse_word("ab").unwrap())));
    }

    #[test]
    fn naive_extension_adds_one_equation() {
        let al = ab();
        let mut mem = mem_example();
        let mut sys = EqSystem::build_naive(SemiringSpec::Tropical, al.clone(), 2, &words(&al, &["ab"]), &mut mem).unwrap();
        let delta = sys.extend(&mut mem, &al.parse_word("aab").unwrap()).unwrap();
        assert_eq!(delta.equations.len(), 1);
        assert!(delta.new_vars.is_empty());
    }

    #[test]
    fn extension_matches_fresh_build() {
        let al = ab();
        let mut mem = mem_example();
        let all = words(&al, &["ab", "", "bab", "aab", "b"]);
        for mode in [EncodingMode::Naive, EncodingMode::Witness] {
            let mut grown = EqSystem::build(SemiringSpec::Tropical, al.clone(), mode, 2, &all[..1], &mut mem).unwrap();
            for w in &all[1..] {
                grown.extend(&mut mem, w).unwrap();
            }
            let fresh = EqSystem::build(SemiringSpec::Tropical, al.clone(), mode, 2, &all, &mut mem).unwrap();
            let lines = |s: &EqSystem| {
                let mut v: Vec<String> = s.dump().lines().map(str::to_string).collect();
                v.sort();
                v
            };
            assert_eq!(lines(&grown), lines(&fresh));
            let regs = |s: &EqSystem| s.registry().iter().cloned().collect::<HashSet<_>>();
            assert_eq!(regs(&grown), regs(&fresh));
        }
    }

    #[test]
    fn duplicate_word_is_rejected() {
        let al = ab();
        let mut mem = mem_example();
        let mut sys = EqSystem::build_witness(SemiringSpec::Tropical, al.clone(), 2, &words(&al, &["ab"]), &mut mem).unwrap();
        assert!(matches!(sys.extend(&mut mem, &al.parse_word("ab").unwrap()), Err(EquationError::DuplicateWord(_))));
        assert!(matches!(
            EqSystem::build_witness(SemiringSpec::Tropical, al, 2, &[], &mut mem),
            Err(EquationError::EmptyObservationSet)
        ));
    }

    #[test]
    fn every_variable_is_registered() {
        let al = ab();
        let mut mem = mem_example();
        let ws = words(&al, &["", "ab", "bba", "aab"]);
        for mode in [EncodingMode::Naive, EncodingMode::Witness] {
            let sys = EqSystem::build(SemiringSpec::Tropical, al.clone(), mode, 3, &ws, &mut mem).unwrap();
            let mut used = HashSet::new();
            for e in sys.equations() {
                e.lhs.vars(&mut used);
                e.rhs.vars(&mut used);
            }
            assert!(used.iter().all(|v| sys.is_registered(v)));
        }
    }

    #[test]
    fn true_automaton_satisfies_naive_system() {
        let a = example_tropical();
        let al = ab();
        let sys = EqSystem::build_naive(SemiringSpec::Tropical, al.clone(), 2, &words(&al, &["", "ab", "bba"]), &mut mem_example()).unwrap();
        let assign = |v: &VarId| match v {
            VarId::Iota(i) => Some(a.iota()[*i]),
            VarId::Lambda(i) => Some(a.lambda()[*i]),
            VarId::Delta { symbol, from, to } => Some(a.delta(*symbol, *from, *to)),
            VarId::Gen(..) => None,
        };
        assert!(sys.satisfied_by(&assign).unwrap());
    }

    #[test]
    fn naive_terms_stay_shared() {
        // 2^20 leaves if expanded as a tree; sharing keeps the build instant.
        let al = ab();
        let long = Word(vec![0; 20]);
        let sys = EqSystem::build_naive(SemiringSpec::Tropical, al, 2, &[long], &mut mem_example()).unwrap();
        let mut used = HashSet::new();
        sys.equations()[0].rhs.vars(&mut used);
        assert_eq!(used.len(), 2 + 4 + 2);
    }
}
