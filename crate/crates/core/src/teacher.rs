//! Teachers answer output queries and (budgeted) equivalence queries.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::semiring::{SemiringSpec, Weight};
use crate::wfa::{Alphabet, Wfa, WfaError, Word};

#[derive(Debug, Error)]
pub enum TeacherError {
    #[error("hypothesis alphabet does not match the target alphabet")]
    AlphabetMismatch,
    #[error("hypothesis semiring {hypothesis} does not match target semiring {target}")]
    SemiringMismatch { hypothesis: SemiringSpec, target: SemiringSpec },
    #[error(transparent)]
    Wfa(#[from] WfaError),
}

/// Answer to an equivalence query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EqAnswer {
    Equivalent,
    Counterexample(Word),
}

/// Query counters and time spent answering queries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TeacherStats {
    pub output_queries: u64,
    pub equivalence_queries: u64,
    /// Words checked by the most recent equivalence query.
    pub last_words_tested: u64,
    /// Words checked across all equivalence queries.
    pub total_words_tested: u64,
    pub time: Duration,
}

/// The (mem, eq) oracle pair the learner talks to.
pub trait Teacher {
    fn spec(&self) -> SemiringSpec;
    fn alphabet(&self) -> &Alphabet;
    /// Output query: the weight of `w` in the target language.
    fn mem(&mut self, w: &Word) -> Result<Weight, TeacherError>;
    /// Equivalence query on a hypothesis.
    fn eq(&mut self, hypothesis: &Wfa) -> Result<EqAnswer, TeacherError>;
    fn stats(&self) -> TeacherStats;
    /// Size of the equivalence-test budget, if the teacher has one.
    fn eq_budget(&self) -> Option<u64> {
        None
    }
}

pub const DEFAULT_BUDGET_MULTIPLIER: u64 = 5000;

/// Teacher holding a target automaton. Equivalence is checked on the first
/// `N = multiplier · |states| · |Σ|` words of Σ* in shortlex order.
#[derive(Debug, Clone)]
pub struct SimulatedTeacher {
    target: Wfa,
    budget: u64,
    stats: TeacherStats,
}

impl SimulatedTeacher {
    pub fn new(target: Wfa, budget_multiplier: u64) -> Self {
        assert!(budget_multiplier > 0, "budget multiplier must be positive");
        let budget = budget_multiplier * target.states() as u64 * target.alphabet().len() as u64;
        SimulatedTeacher { target, budget, stats: TeacherStats::default() }
    }

    pub fn target(&self) -> &Wfa {
        &self.target
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    /// Scans the first `budget` words in shortlex order and returns the first
    /// disagreement together with the number of words examined.
    ///
    /// Words are expanded breadth-first and both automata's forward vectors
    /// are carried along, so each word costs one matrix-vector step per
    /// automaton. The frontier is never extended past `budget` words.
    fn scan(&self, h: &Wfa) -> Result<(Option<Word>, u64), TeacherError> {
        let k = self.target.alphabet().len();
        let mut queue: VecDeque<(Word, Vec<Weight>, Vec<Weight>)> = VecDeque::new();
        queue.push_back((Word::empty(), self.target.iota().to_vec(), h.iota().to_vec()));
        let mut enqueued: u64 = 1;
        let mut tested: u64 = 0;
        while let Some((w, tr, hr)) = queue.pop_front() {
            tested += 1;
            if self.target.finish(&tr)? != h.finish(&hr)? {
                return Ok((Some(w), tested));
            }
            for a in 0..k {
                if enqueued >= self.budget {
                    break;
                }
                let mut next = w.0.clone();
                next.push(a);
                queue.push_back((Word(next), self.target.step(&tr, a)?, h.step(&hr, a)?));
                enqueued += 1;
            }
        }
        Ok((None, tested))
    }
}

impl Teacher for SimulatedTeacher {
    fn spec(&self) -> SemiringSpec {
        self.target.spec()
    }

    fn alphabet(&self) -> &Alphabet {
        self.target.alphabet()
    }

    fn mem(&mut self, w: &Word) -> Result<Weight, TeacherError> {
        let start = Instant::now();
        let out = self.target.evaluate(w);
        self.stats.time += start.elapsed();
        self.stats.output_queries += 1;
        Ok(out?)
    }

    fn eq(&mut self, h: &Wfa) -> Result<EqAnswer, TeacherError> {
        if h.spec() != self.target.spec() {
            return Err(TeacherError::SemiringMismatch { hypothesis: h.spec(), target: self.target.spec() });
        }
        if h.alphabet() != self.target.alphabet() {
            return Err(TeacherError::AlphabetMismatch);
        }
        let start = Instant::now();
        let scanned = self.scan(h);
        self.stats.time += start.elapsed();
        self.stats.equivalence_queries += 1;
        let (cex, tested) = scanned?;
        self.stats.last_words_tested = tested;
        self.stats.total_words_tested += tested;
        Ok(match cex {
            Some(w) => EqAnswer::Counterexample(w),
            None => EqAnswer::Equivalent,
        })
    }

    fn stats(&self) -> TeacherStats {
        self.stats.clone()
    }

    fn eq_budget(&self) -> Option<u64> {
        Some(self.budget)
    }
}
