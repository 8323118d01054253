//! Experiment plumbing: result rows, run matrices, isolated benchmark
//! processes and resumable CSV output.

use std::collections::HashSet;
use std::fs::{self, OpenOptions};
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitStatus, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benchgen::{Family, GenError, GenSpec, ManifestEntry, DEFAULT_DENSITY};
use crate::equations::EncodingMode;
use crate::learner::{learn, LearnConfig, LearnError, LearnOutcome};
use crate::semiring::{SemiringSpec, Weight};
use crate::smt::{EncodingChoice, SolverConfig, TheoryEncoding};
use crate::teacher::{EqAnswer, SimulatedTeacher, Teacher, TeacherError, DEFAULT_BUDGET_MULTIPLIER};
use crate::wfa::{words_up_to, Wfa, WfaError, Word};

pub const SCHEMA_VERSION: &str = "bench-v1";

/// Column order of the results CSV; matches the field order of [`BenchResult`].
pub const CSV_HEADER: [&str; 20] = [
    "benchmark_id",
    "semiring",
    "bound",
    "mode",
    "encoding",
    "incremental",
    "target_states",
    "alphabet_size",
    "learned_states",
    "outcome",
    "learner_time_s",
    "solver_time_s",
    "teacher_time_s",
    "output_queries",
    "equivalence_queries",
    "eq_budget_fraction",
    "seed",
    "total_time_s",
    "rng",
    "schema_version",
];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Wfa(#[from] WfaError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Teacher(#[from] TeacherError),
    #[error("{path}: unexpected CSV header (expected {expected})")]
    HeaderMismatch { path: PathBuf, expected: String },
    #[error("{path}: unknown schema version {found:?}")]
    SchemaVersion { path: PathBuf, found: String },
    #[error("learned and target automata differ in {0}")]
    Incomparable(&'static str),
}

/// One benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub benchmark_id: String,
    pub semiring: String,
    pub bound: Option<u64>,
    pub mode: String,
    pub encoding: String,
    pub incremental: bool,
    pub target_states: usize,
    pub alphabet_size: usize,
    pub learned_states: Option<usize>,
    pub outcome: String,
    pub learner_time_s: f64,
    pub solver_time_s: f64,
    pub teacher_time_s: f64,
    pub output_queries: u64,
    pub equivalence_queries: u64,
    pub eq_budget_fraction: f64,
    pub seed: Option<u64>,
    pub total_time_s: f64,
    pub rng: String,
    pub schema_version: String,
}

/// Identifies a row for resumption.
pub type RunKey = (String, String, String, bool);

impl BenchResult {
    pub fn key(&self) -> RunKey {
        (self.benchmark_id.clone(), self.mode.clone(), self.encoding.clone(), self.incremental)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunLimits {
    pub timeout: Duration,
    pub memory_mb: u64,
    pub eq_multiplier: u64,
}

impl Default for RunLimits {
    fn default() -> Self {
        RunLimits { timeout: Duration::from_secs(2 * 3600), memory_mb: 8192, eq_multiplier: DEFAULT_BUDGET_MULTIPLIER }
    }
}

/// One cell of a run matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub id: String,
    pub target: PathBuf,
    pub seed: Option<u64>,
    pub rng: String,
    pub mode: EncodingMode,
    pub encoding: EncodingChoice,
    pub incremental: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axes {
    pub modes: Vec<EncodingMode>,
    pub encodings: Vec<EncodingChoice>,
    pub incremental: Vec<bool>,
}

impl Default for Axes {
    fn default() -> Self {
        Axes { modes: vec![EncodingMode::Witness], encodings: vec![EncodingChoice::Lia], incremental: vec![true] }
    }
}

/// Every manifest entry crossed with every axis value, in manifest order.
/// Encodings that do not apply to an entry's semiring are skipped, and
/// choices that map to the same theory are run once.
pub fn matrix(entries: &[ManifestEntry], manifest_dir: &Path, axes: &Axes) -> Result<Vec<RunSpec>, HarnessError> {
    let mut runs = Vec::new();
    for e in entries {
        let spec = e.semiring_spec()?;
        for &mode in &axes.modes {
            let mut seen = HashSet::new();
            for &encoding in &axes.encodings {
                let Ok(theory) = TheoryEncoding::for_spec(spec, encoding) else { continue };
                if !seen.insert(theory.name()) {
                    continue;
                }
                for &incremental in &axes.incremental {
                    runs.push(RunSpec {
                        id: e.id.clone(),
                        target: e.resolve(manifest_dir),
                        seed: e.seed,
                        rng: e.rng.clone(),
                        mode,
                        encoding,
                        incremental,
                    });
                }
            }
        }
    }
    Ok(runs)
}

/// Desk-scale versions of the standard experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// Incremental against non-incremental solving.
    #[value(name = "rq1-incremental")]
    Rq1Incremental,
    /// Integer against bit-vector encodings of the bounded tropical semiring.
    #[value(name = "rq1-encoding")]
    Rq1Encoding,
    /// Naive against witness encodings.
    #[value(name = "rq2")]
    Rq2,
}

impl Preset {
    pub fn limits(self) -> RunLimits {
        RunLimits { timeout: Duration::from_secs(600), memory_mb: 2048, eq_multiplier: DEFAULT_BUDGET_MULTIPLIER }
    }

    pub fn axes(self) -> Axes {
        match self {
            Preset::Rq1Incremental => Axes {
                modes: vec![EncodingMode::Witness],
                encodings: vec![EncodingChoice::Lia],
                incremental: vec![true, false],
            },
            Preset::Rq1Encoding => Axes {
                modes: vec![EncodingMode::Witness],
                encodings: vec![EncodingChoice::Lia, EncodingChoice::Bv],
                incremental: vec![true],
            },
            Preset::Rq2 => Axes {
                modes: vec![EncodingMode::Naive, EncodingMode::Witness],
                encodings: vec![EncodingChoice::Lia],
                incremental: vec![true],
            },
        }
    }

    /// Targets generated by `gen --preset`.
    pub fn suite(self) -> Vec<Family> {
        let random = |sr: SemiringSpec, states: std::ops::RangeInclusive<usize>, seeds: u64| {
            states
                .flat_map(move |n| {
                    (0..seeds).map(move |s| {
                        let density = DEFAULT_DENSITY.min(n as f64);
                        Family::Random(GenSpec { density, ..GenSpec::new(sr, n, 2, s) })
                    })
                })
                .collect::<Vec<_>>()
        };
        match self {
            Preset::Rq1Incremental => {
                let mut v = random(SemiringSpec::BoundedTropical(100), 1..=3, 5);
                v.extend(random(SemiringSpec::Tropical, 1..=2, 5));
                v
            }
            Preset::Rq1Encoding => random(SemiringSpec::BoundedTropical(100), 1..=3, 7),
            Preset::Rq2 => {
                let mut v: Vec<Family> =
                    (2..=5).map(|n| Family::MinNfa { states: n, alphabet_size: 2 }).collect();
                v.extend(random(SemiringSpec::Boolean, 2..=3, 5));
                v
            }
        }
    }
}

/// Learner configuration for a run under the given limits.
pub fn learn_config(run: &RunSpec, limits: &RunLimits, solver: SolverConfig, dump_smt: Option<PathBuf>) -> LearnConfig {
    LearnConfig {
        mode: run.mode,
        encoding: run.encoding,
        incremental: run.incremental,
        time_limit: Some(limits.timeout),
        memory_limit_mb: Some(limits.memory_mb),
        trace: false,
        solver: SolverConfig { timeout: None, ..solver },
        dump_smt,
    }
}

fn row_base(run: &RunSpec, target: &Wfa) -> BenchResult {
    let spec = target.spec();
    let encoding = TheoryEncoding::for_spec(spec, run.encoding).map(|t| t.name()).unwrap_or("invalid");
    BenchResult {
        benchmark_id: run.id.clone(),
        semiring: spec.kind().name().to_string(),
        bound: spec.bound(),
        mode: run.mode.name().to_string(),
        encoding: encoding.to_string(),
        incremental: run.incremental,
        target_states: target.states(),
        alphabet_size: target.alphabet().len(),
        learned_states: None,
        outcome: String::new(),
        learner_time_s: 0.0,
        solver_time_s: 0.0,
        teacher_time_s: 0.0,
        output_queries: 0,
        equivalence_queries: 0,
        eq_budget_fraction: 0.0,
        seed: run.seed,
        total_time_s: 0.0,
        rng: run.rng.clone(),
        schema_version: SCHEMA_VERSION.to_string(),
    }
}

/// Converts a finished learning run into a CSV row.
pub fn result_row(run: &RunSpec, target: &Wfa, outcome: &LearnOutcome) -> BenchResult {
    let s = &outcome.stats;
    let fraction = match (s.eq_budget, s.equivalence_queries) {
        (Some(budget), q) if budget > 0 && q > 0 => s.eq_words_total as f64 / (budget as f64 * q as f64),
        _ => 0.0,
    };
    BenchResult {
        learned_states: s.learned_states,
        outcome: outcome.result.label().to_string(),
        learner_time_s: s.learner_time().as_secs_f64(),
        solver_time_s: s.solver_time.as_secs_f64(),
        teacher_time_s: s.teacher_time.as_secs_f64(),
        output_queries: s.output_queries,
        equivalence_queries: s.equivalence_queries,
        eq_budget_fraction: fraction,
        total_time_s: s.total_time.as_secs_f64(),
        ..row_base(run, target)
    }
}

/// Runs one benchmark in the current process.
pub fn run_in_process(
    run: &RunSpec,
    limits: &RunLimits,
    solver: SolverConfig,
    dump_smt: Option<PathBuf>,
) -> Result<(BenchResult, LearnOutcome), HarnessError> {
    let target = Wfa::load(&run.target)?;
    let mut teacher = SimulatedTeacher::new(target.clone(), limits.eq_multiplier);
    let cfg = learn_config(run, limits, solver, dump_smt);
    let outcome = learn(&mut teacher, &cfg)?;
    Ok((result_row(run, &target, &outcome), outcome))
}

/// Arguments for the hidden `run-one` subcommand that executes `run`.
pub fn run_one_args(run: &RunSpec, limits: &RunLimits) -> Vec<String> {
    let mut args = vec![
        "run-one".to_string(),
        "--target".into(),
        run.target.display().to_string(),
        "--id".into(),
        run.id.clone(),
        "--mode".into(),
        run.mode.name().into(),
        "--encoding".into(),
        run.encoding.name().into(),
        if run.incremental { "--incremental".into() } else { "--no-incremental".into() },
        "--timeout".into(),
        limits.timeout.as_secs_f64().to_string(),
        "--mem-limit".into(),
        limits.memory_mb.to_string(),
        "--eq-multiplier".into(),
        limits.eq_multiplier.to_string(),
    ];
    if let Some(seed) = run.seed {
        args.push("--seed".into());
        args.push(seed.to_string());
    }
    if !run.rng.is_empty() {
        args.push("--rng".into());
        args.push(run.rng.clone());
    }
    args
}

/// How `bench` executes its runs.
#[derive(Debug, Clone)]
pub struct BenchOptions {
    /// Binary providing the `run-one` subcommand.
    pub exe: PathBuf,
    pub limits: RunLimits,
    pub jobs: usize,
    pub csv: PathBuf,
    /// Slack after the learner's own time limit before the process is killed.
    pub grace: Duration,
}

/// Runs `run` in a child process with its own process group and address
/// space limit. A child that never reports is turned into a failure row.
pub fn run_isolated(run: &RunSpec, opts: &BenchOptions) -> BenchResult {
    let placeholder = || {
        Wfa::load(&run.target)
            .map(|t| row_base(run, &t))
            .unwrap_or_else(|_| BenchResult { benchmark_id: run.id.clone(), ..failed_row_without_target(run) })
    };
    let mut cmd = Command::new(&opts.exe);
    cmd.args(run_one_args(run, &opts.limits)).stdin(Stdio::null()).stdout(Stdio::piped()).stderr(Stdio::piped());
    let mem_bytes = opts.limits.memory_mb.saturating_mul(1024 * 1024);
    set_child_limits(&mut cmd, mem_bytes);
    let start = Instant::now();
    let mut child = match cmd.spawn() {
        Ok(c) => c,
        Err(_) => return BenchResult { outcome: "solver-error".into(), ..placeholder() },
    };
    let pgid = child.id() as i32;
    let stdout = drain(child.stdout.take().expect("piped stdout"));
    let stderr = drain(child.stderr.take().expect("piped stderr"));
    let hard_limit = opts.limits.timeout + opts.grace;
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break Some(status),
            Ok(None) if start.elapsed() >= hard_limit => {
                kill_group(pgid);
                let _ = child.wait();
                break None;
            }
            Ok(None) => thread::sleep(Duration::from_millis(10)),
            Err(_) => break None,
        }
    };
    kill_group(pgid);
    let elapsed = start.elapsed().as_secs_f64();
    let out = stdout.join().unwrap_or_default();
    let err = stderr.join().unwrap_or_default();
    if let Some(row) = out.lines().rev().find_map(|l| serde_json::from_str::<BenchResult>(l).ok()) {
        return row;
    }
    let outcome = match status {
        None => "timeout",
        Some(st) if looks_like_oom(&st, &err) => "oom",
        Some(_) => "solver-error",
    };
    BenchResult { outcome: outcome.into(), total_time_s: elapsed, learner_time_s: elapsed, ..placeholder() }
}

fn failed_row_without_target(run: &RunSpec) -> BenchResult {
    BenchResult {
        benchmark_id: run.id.clone(),
        semiring: String::new(),
        bound: None,
        mode: run.mode.name().into(),
        encoding: run.encoding.name().into(),
        incremental: run.incremental,
        target_states: 0,
        alphabet_size: 0,
        learned_states: None,
        outcome: "solver-error".into(),
        learner_time_s: 0.0,
        solver_time_s: 0.0,
        teacher_time_s: 0.0,
        output_queries: 0,
        equivalence_queries: 0,
        eq_budget_fraction: 0.0,
        seed: run.seed,
        total_time_s: 0.0,
        rng: run.rng.clone(),
        schema_version: SCHEMA_VERSION.into(),
    }
}

fn looks_like_oom(status: &ExitStatus, stderr: &str) -> bool {
    let lower = stderr.to_ascii_lowercase();
    !status.success() && (lower.contains("memory allocation") || lower.contains("out of memory"))
}

fn drain<R: Read + Send + 'static>(mut r: R) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = r.read_to_end(&mut buf);
        String::from_utf8_lossy(&buf).into_owned()
    })
}

#[cfg(unix)]
fn set_child_limits(cmd: &mut Command, mem_bytes: u64) {
    use std::os::unix::process::CommandExt;
    // SAFETY: only async-signal-safe libc calls between fork and exec.
    unsafe {
        cmd.pre_exec(move || {
            if libc::setpgid(0, 0) != 0 {
                return Err(std::io::Error::last_os_error());
            }
            if mem_bytes > 0 {
                let lim = libc::rlimit { rlim_cur: mem_bytes as libc::rlim_t, rlim_max: mem_bytes as libc::rlim_t };
                if libc::setrlimit(libc::RLIMIT_AS, &lim) != 0 {
                    return Err(std::io::Error::last_os_error());
                }
            }
            Ok(())
        });
    }
}

#[cfg(not(unix))]
fn set_child_limits(_cmd: &mut Command, _mem_bytes: u64) {}

#[cfg(unix)]
fn kill_group(pgid: i32) {
    // SAFETY: sending a signal has no memory-safety preconditions.
    unsafe {
        libc::kill(-pgid, libc::SIGKILL);
    }
}

#[cfg(not(unix))]
fn kill_group(_pgid: i32) {}

/// Keys of rows already present in `path`. A missing or empty file has none.
pub fn completed_runs(path: &Path) -> Result<HashSet<RunKey>, HarnessError> {
    Ok(read_results(path)?.iter().map(BenchResult::key).collect())
}

/// Reads a results CSV, checking the header and schema version.
pub fn read_results(path: &Path) -> Result<Vec<BenchResult>, HarnessError> {
    if !path.exists() || fs::metadata(path)?.len() == 0 {
        return Ok(Vec::new());
    }
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(HarnessError::HeaderMismatch { path: path.to_path_buf(), expected: CSV_HEADER.join(",") });
    }
    let mut rows = Vec::new();
    for row in r.deserialize::<BenchResult>() {
        let row = row?;
        if row.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::SchemaVersion { path: path.to_path_buf(), found: row.schema_version });
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Appends rows to `path`, writing the header first if the file is new.
pub struct ResultWriter {
    inner: csv::Writer<fs::File>,
}

impl ResultWriter {
    pub fn open(path: &Path) -> Result<Self, HarnessError> {
        read_results(path)?;
        let fresh = !path.exists() || fs::metadata(path)?.len() == 0;
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let mut inner = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        if fresh {
            inner.write_record(CSV_HEADER)?;
            inner.flush()?;
        }
        Ok(ResultWriter { inner })
    }

    pub fn append(&mut self, row: &BenchResult) -> Result<(), HarnessError> {
        self.inner.serialize(row)?;
        self.inner.flush()?;
        Ok(())
    }
}

/// Executes every run not yet recorded in the CSV, at most `jobs` at a time,
/// appending rows in matrix order. Returns the new rows.
pub fn run_matrix(runs: &[RunSpec], opts: &BenchOptions) -> Result<Vec<BenchResult>, HarnessError> {
    let mut writer = ResultWriter::open(&opts.csv)?;
    let done = completed_runs(&opts.csv)?;
    let pending: Vec<&RunSpec> = runs
        .iter()
        .filter(|r| {
            let enc = Wfa::load(&r.target)
                .ok()
                .and_then(|t| TheoryEncoding::for_spec(t.spec(), r.encoding).ok())
                .map(|t| t.name())
                .unwrap_or("invalid");
            !done.contains(&(r.id.clone(), r.mode.name().to_string(), enc.to_string(), r.incremental))
        })
        .collect();
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, BenchResult)>();
    let mut out = Vec::with_capacity(pending.len());
    thread::scope(|scope| -> Result<(), HarnessError> {
        for _ in 0..opts.jobs.max(1).min(pending.len().max(1)) {
            let tx = tx.clone();
            let (next, pending) = (&next, &pending);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(run) = pending.get(i) else { break };
                if tx.send((i, run_isolated(run, opts))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut buffered: Vec<Option<BenchResult>> = vec![None; pending.len()];
        let mut cursor = 0;
        for (i, row) in rx {
            buffered[i] = Some(row);
            while cursor < buffered.len() {
                let Some(row) = buffered[cursor].take() else { break };
                writer.append(&row)?;
                out.push(row);
                cursor += 1;
            }
        }
        Ok(())
    })?;
    Ok(out)
}

/// Result of comparing two automata on a finite word set.
#[derive(Debug, Clone, PartialEq)]
pub enum Agreement {
    Agree { words: u64 },
    Disagree { word: Word, learned: Weight, target: Weight },
}

/// Compares two automata on every word of length at most `max_len`.
pub fn verify_exhaustive(learned: &Wfa, target: &Wfa, max_len: usize) -> Result<Agreement, HarnessError> {
    check_comparable(learned, target)?;
    let mut words = 0;
    for w in words_up_to(target.alphabet().len(), max_len) {
        let (l, t) = (learned.evaluate(&w)?, target.evaluate(&w)?);
        if l != t {
            return Ok(Agreement::Disagree { word: w, learned: l, target: t });
        }
        words += 1;
    }
    Ok(Agreement::Agree { words })
}

/// Compares two automata on the teacher's equivalence test set.
pub fn verify_budget(learned: &Wfa, target: &Wfa, multiplier: u64) -> Result<Agreement, HarnessError> {
    check_comparable(learned, target)?;
    let mut teacher = SimulatedTeacher::new(target.clone(), multiplier);
    match teacher.eq(learned)? {
        EqAnswer::Equivalent => Ok(Agreement::Agree { words: teacher.stats().last_words_tested }),
        EqAnswer::Counterexample(w) => {
            Ok(Agreement::Disagree { learned: learned.evaluate(&w)?, target: target.evaluate(&w)?, word: w })
        }
    }
}

fn check_comparable(learned: &Wfa, target: &Wfa) -> Result<(), HarnessError> {
    if learned.spec() != target.spec() {
        return Err(HarnessError::Incomparable("semiring"));
    }
    if learned.alphabet() != target.alphabet() {
        return Err(HarnessError::Incomparable("alphabet"));
    }
    Ok(())
}
