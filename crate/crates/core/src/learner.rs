//! The learning loop: guess a state count, solve for an O-correct
//! hypothesis, ask for a counterexample, repeat.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::equations::{EncodingMode, EqSystem, EquationError, MemCache, OutputOracle};
use crate::semiring::SemiringSpec;
use crate::smt::{decode_wfa, EncodingChoice, SessionMode, SmtError, SolverConfig, SolverSession, TheoryEncoding};
use crate::teacher::{EqAnswer, Teacher, TeacherError};
use crate::wfa::{Alphabet, Wfa, WfaError, Word};

#[derive(Debug, Error)]
pub enum LearnError {
    #[error(transparent)]
    Smt(#[from] SmtError),
    #[error(transparent)]
    Equations(#[from] EquationError),
    #[error(transparent)]
    Teacher(#[from] TeacherError),
    #[error(transparent)]
    Wfa(#[from] WfaError),
    #[error("counterexample {0} is already an observation")]
    StaleCounterexample(String),
    #[error("hypothesis disagrees with the observation {0}")]
    NotObservationCorrect(String),
}

#[derive(Debug, Clone)]
pub struct LearnConfig {
    pub mode: EncodingMode,
    pub encoding: EncodingChoice,
    pub incremental: bool,
    /// Wall-clock budget for the whole run.
    pub time_limit: Option<Duration>,
    /// Memory budget handed to the solver.
    pub memory_limit_mb: Option<u64>,
    /// Print one line per iteration to stderr and check O-correctness of
    /// every hypothesis.
    pub trace: bool,
    pub solver: SolverConfig,
    pub dump_smt: Option<PathBuf>,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            mode: EncodingMode::Witness,
            encoding: EncodingChoice::Lia,
            incremental: true,
            time_limit: None,
            memory_limit_mb: None,
            trace: false,
            solver: SolverConfig::default(),
            dump_smt: None,
        }
    }
}

/// One solver verdict: state count, number of observations, satisfiable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verdict {
    pub states: usize,
    pub observations: usize,
    pub sat: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LearnResult {
    Learned(Wfa),
    Timeout,
    OutOfMemory,
    SolverError(String),
}

impl LearnResult {
    pub fn label(&self) -> &'static str {
        match self {
            LearnResult::Learned(_) => "ok",
            LearnResult::Timeout => "timeout",
            LearnResult::OutOfMemory => "oom",
            LearnResult::SolverError(_) => "solver-error",
        }
    }

    pub fn wfa(&self) -> Option<&Wfa> {
        match self {
            LearnResult::Learned(h) => Some(h),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LearnStats {
    pub learned_states: Option<usize>,
    /// Number of `get_aut` calls.
    pub iterations: usize,
    /// For each refuted state count, the observations that refuted it.
    pub unsat_record: Vec<(usize, Vec<Word>)>,
    pub verdicts: Vec<Verdict>,
    pub output_queries: u64,
    pub equivalence_queries: u64,
    pub counterexamples: Vec<Word>,
    pub total_time: Duration,
    pub teacher_time: Duration,
    pub solver_time: Duration,
    /// Words tested by the last equivalence query.
    pub last_eq_words: u64,
    /// Words tested across all equivalence queries.
    pub eq_words_total: u64,
    pub eq_budget: Option<u64>,
}

impl LearnStats {
    /// Total time minus time spent answering queries.
    pub fn learner_time(&self) -> Duration {
        self.total_time.saturating_sub(self.teacher_time)
    }

    /// Whether every state count below `n` was refuted.
    pub fn refutes_below(&self, n: usize) -> bool {
        (1..n).all(|m| self.unsat_record.iter().any(|(k, _)| *k == m))
    }
}

#[derive(Debug, Clone)]
pub struct LearnOutcome {
    pub result: LearnResult,
    pub stats: LearnStats,
    pub observations: Vec<Word>,
}

/// Decides whether an `n`-state WFA agrees with `mem` on `observations`, and
/// returns one if so.
pub fn get_aut<M: OutputOracle + ?Sized>(
    mem: &mut M,
    spec: SemiringSpec,
    alphabet: &Alphabet,
    observations: &[Word],
    n: usize,
    cfg: &LearnConfig,
) -> Result<Option<Wfa>, LearnError> {
    let encoding = TheoryEncoding::for_spec(spec, cfg.encoding)?;
    let sys = EqSystem::build(spec, alphabet.clone(), cfg.mode, n, observations, mem)?;
    let mut session = open_session(cfg, encoding, &sys, SessionMode::Oneshot)?;
    match session.check()? {
        None => Ok(None),
        Some(model) => Ok(Some(decode_wfa(&model, n, spec, alphabet, cfg.mode)?)),
    }
}

fn open_session(
    cfg: &LearnConfig,
    encoding: TheoryEncoding,
    sys: &EqSystem,
    mode: SessionMode,
) -> Result<SolverSession, SmtError> {
    let mut solver = cfg.solver.clone();
    if cfg.memory_limit_mb.is_some() {
        solver.memory_mb = cfg.memory_limit_mb;
    }
    let mut session = SolverSession::new(solver, encoding, sys.spec(), sys.alphabet().clone(), sys.states(), mode)?;
    if let Some(path) = &cfg.dump_smt {
        session.dump_to(path)?;
    }
    session.add_system(sys)?;
    Ok(session)
}

/// Runs the learning loop against `teacher`.
pub fn learn(teacher: &mut dyn Teacher, cfg: &LearnConfig) -> Result<LearnOutcome, LearnError> {
    let start = Instant::now();
    let spec = teacher.spec();
    let alphabet = teacher.alphabet().clone();
    let encoding = TheoryEncoding::for_spec(spec, cfg.encoding)?;
    let session_mode = if cfg.incremental { SessionMode::Incremental } else { SessionMode::Oneshot };
    let deadline = cfg.time_limit.map(|t| start + t);
    let mut cache = MemCache::new();
    let mut stats = LearnStats { eq_budget: teacher.eq_budget(), ..LearnStats::default() };
    let mut observations = vec![Word::empty()];
    let mut n = 1;
    let mut current: Option<(EqSystem, SolverSession)> = None;

    let result = loop {
        if deadline.is_some_and(|d| Instant::now() >= d) {
            break LearnResult::Timeout;
        }
        if current.is_none() {
            let mut mem = |w: &Word| cache.query(teacher, w);
            let sys = EqSystem::build(spec, alphabet.clone(), cfg.mode, n, &observations, &mut mem)?;
            let session = open_session(cfg, encoding, &sys, session_mode)?;
            current = Some((sys, session));
        }
        let (sys, session) = current.as_mut().expect("session was just opened");
        let per_check = match (cfg.solver.timeout, deadline) {
            (t, None) => t,
            (None, Some(d)) => Some(d.saturating_duration_since(Instant::now())),
            (Some(t), Some(d)) => Some(t.min(d.saturating_duration_since(Instant::now()))),
        };
        session.set_timeout(per_check);
        stats.iterations += 1;
        let solve_start = Instant::now();
        let checked = session.check();
        stats.solver_time += solve_start.elapsed();
        let model = match checked {
            Ok(m) => m,
            Err(SmtError::Timeout) => break LearnResult::Timeout,
            Err(SmtError::OutOfMemory) => break LearnResult::OutOfMemory,
            Err(e @ (SmtError::Crash(_) | SmtError::Unknown(_) | SmtError::SolverError(_) | SmtError::UnparseableModel(_))) => {
                break LearnResult::SolverError(e.to_string())
            }
            Err(e) => return Err(e.into()),
        };
        stats.verdicts.push(Verdict { states: n, observations: observations.len(), sat: model.is_some() });
        let Some(model) = model else {
            if cfg.trace {
                trace_line(&stats, n, &observations, "unsat", None, &alphabet, start, teacher);
            }
            stats.unsat_record.push((n, observations.clone()));
            n += 1;
            current = None;
            continue;
        };
        let hypothesis = decode_wfa(&model, n, spec, &alphabet, cfg.mode)?;
        if cfg.trace {
            for w in &observations {
                let expected = cache.get(w).expect("observations are always queried");
                if hypothesis.evaluate(w)? != expected {
                    return Err(LearnError::NotObservationCorrect(alphabet.display(w)));
                }
            }
        }
        let answer = teacher.eq(&hypothesis)?;
        stats.last_eq_words = teacher.stats().last_words_tested;
        match answer {
            EqAnswer::Equivalent => {
                if cfg.trace {
                    trace_line(&stats, n, &observations, "sat", None, &alphabet, start, teacher);
                }
                break LearnResult::Learned(hypothesis);
            }
            EqAnswer::Counterexample(w) => {
                if cfg.trace {
                    trace_line(&stats, n, &observations, "sat", Some(&w), &alphabet, start, teacher);
                }
                if observations.contains(&w) {
                    return Err(LearnError::StaleCounterexample(alphabet.display(&w)));
                }
                stats.counterexamples.push(w.clone());
                observations.push(w.clone());
                let mut mem = |w: &Word| cache.query(teacher, w);
                let delta = sys.extend(&mut mem, &w)?;
                session.add_delta(sys, &delta)?;
            }
        }
    };

    let teacher_stats = teacher.stats();
    stats.output_queries = teacher_stats.output_queries;
    stats.equivalence_queries = teacher_stats.equivalence_queries;
    stats.teacher_time = teacher_stats.time;
    stats.eq_words_total = teacher_stats.total_words_tested;
    stats.learned_states = result.wfa().map(Wfa::states);
    stats.total_time = start.elapsed();
    Ok(LearnOutcome { result, stats, observations })
}

#[allow(clippy::too_many_arguments)]
fn trace_line(
    stats: &LearnStats,
    n: usize,
    observations: &[Word],
    verdict: &str,
    cex: Option<&Word>,
    alphabet: &Alphabet,
    start: Instant,
    teacher: &dyn Teacher,
) {
    let cex = cex.map(|w| alphabet.display(w)).unwrap_or_else(|| "-".into());
    eprintln!(
        "iter={} n={} |O|={} {} cex={} total={:.3}s teacher={:.3}s solver={:.3}s",
        stats.iterations,
        n,
        observations.len(),
        verdict,
        cex,
        start.elapsed().as_secs_f64(),
        teacher.stats().time.as_secs_f64(),
        stats.solver_time.as_secs_f64()
    );
}
