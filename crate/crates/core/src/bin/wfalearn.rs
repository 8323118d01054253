use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use wfalearn::benchgen::{self, Family, GenSpec, DEFAULT_DENSITY, RNG_NAME};
use wfalearn::equations::EncodingMode;
use wfalearn::harness::{self, Agreement, Axes, BenchOptions, Preset, ResultWriter, RunLimits, RunSpec};
use wfalearn::learner::LearnResult;
use wfalearn::semiring::{SemiringKind, SemiringSpec};
use wfalearn::smt::{EncodingChoice, SolverConfig};
use wfalearn::teacher::DEFAULT_BUDGET_MULTIPLIER;
use wfalearn::wfa::Wfa;

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_LIMIT: u8 = 3;

#[derive(Parser)]
#[command(name = "wfalearn", version, about = "Learn minimal weighted finite automata with an SMT solver")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate benchmark targets and a manifest.
    Gen(GenArgs),
    /// Learn one target and print the hypothesis with statistics.
    Learn(LearnArgs),
    /// Run a configuration matrix over a manifest, one process per run.
    Bench(BenchArgs),
    /// Compare a learned automaton against its target.
    Verify(VerifyArgs),
    #[command(hide = true)]
    RunOne(RunOneArgs),
}

#[derive(Args, Clone)]
struct TargetArgs {
    #[arg(long, value_parser = parse_kind, default_value = "tropical")]
    semiring: SemiringKind,
    #[arg(long)]
    bound: Option<u64>,
    #[arg(long, default_value_t = 2)]
    alphabet: usize,
    #[arg(long, default_value_t = DEFAULT_DENSITY)]
    density: f64,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    target: TargetArgs,
    /// State counts to generate, e.g. `2,3,4`.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    states: Vec<usize>,
    /// `random` or `min-nfa`.
    #[arg(long, default_value = "random")]
    family: String,
    /// First seed; `--count` consecutive seeds are used per state count.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct LimitArgs {
    /// Wall-clock limit in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// Memory limit in MB.
    #[arg(long = "mem-limit")]
    mem_limit: Option<u64>,
    #[arg(long = "eq-multiplier", default_value_t = DEFAULT_BUDGET_MULTIPLIER)]
    eq_multiplier: u64,
}

#[derive(Args, Clone)]
struct LearnArgs {
    /// Target WFA file; without it a random target is generated.
    #[arg(long)]
    target: Option<PathBuf>,
    #[command(flatten)]
    gen: TargetArgs,
    #[arg(long, default_value_t = 2)]
    states: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_mode, default_value = "witness")]
    mode: EncodingMode,
    #[arg(long, value_parser = parse_encoding, default_value = "lia")]
    encoding: EncodingChoice,
    #[arg(long, overrides_with = "no_incremental")]
    incremental: bool,
    #[arg(long = "no-incremental")]
    no_incremental: bool,
    #[command(flatten)]
    limits: LimitArgs,
    /// Write every SMT-LIB command sent to the solver to this file.
    #[arg(long = "dump-smt")]
    dump_smt: Option<PathBuf>,
    /// Append a result row to this CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Save the learned WFA here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Log every iteration to stderr.
    #[arg(long)]
    trace: bool,
    /// Solver executable (default: z3, or $WFALEARN_SOLVER).
    #[arg(long)]
    solver: Option<String>,
}

#[derive(Args)]
struct RunOneArgs {
    #[command(flatten)]
    learn: LearnArgs,
    #[arg(long)]
    id: String,
    #[arg(long, default_value = "")]
    rng: String,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long, value_delimiter = ',', value_parser = parse_mode)]
    mode: Vec<EncodingMode>,
    #[arg(long, value_delimiter = ',', value_parser = parse_encoding)]
    encoding: Vec<EncodingChoice>,
    /// Include incremental runs (the default when neither flag is given).
    #[arg(long)]
    incremental: bool,
    /// Include non-incremental runs.
    #[arg(long = "no-incremental")]
    no_incremental: bool,
    #[command(flatten)]
    limits: LimitArgs,
    #[arg(long)]
    csv: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    solver: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    learned: PathBuf,
    #[arg(long)]
    target: PathBuf,
    /// Check every word up to this length.
    #[arg(long = "max-len", default_value_t = 6)]
    max_len: usize,
    /// Also check the teacher's test set of this multiplier.
    #[arg(long = "eq-multiplier")]
    eq_multiplier: Option<u64>,
}

fn parse_kind(s: &str) -> Result<SemiringKind, String> {
    s.parse().map_err(|e: wfalearn::semiring::SemiringError| e.to_string())
}

fn parse_mode(s: &str) -> Result<EncodingMode, String> {
    s.parse()
}

fn parse_encoding(s: &str) -> Result<EncodingChoice, String> {
    s.parse()
}

enum Failure {
    Usage(String),
    Run(String),
    Limit(String),
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Run(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Gen(a) => gen(a),
        Cmd::Learn(a) => learn(a, None),
        Cmd::RunOne(a) => learn(a.learn, Some((a.id, a.rng))),
        Cmd::Bench(a) => bench(a),
        Cmd::Verify(a) => verify(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_FAILURE)
        }
        Err(Failure::Limit(m)) => {
            eprintln!("{m}");
            ExitCode::from(EXIT_LIMIT)
        }
    }
}

fn spec_of(t: &TargetArgs) -> Result<SemiringSpec, Failure> {
    SemiringSpec::new(t.semiring, t.bound).map_err(|e| Failure::Usage(e.to_string()))
}

fn gen(a: GenArgs) -> Result<u8, Failure> {
    let families: Vec<Family> = if let Some(p) = a.preset {
        p.suite()
    } else if a.family == "min-nfa" {
        a.states.iter().map(|&n| Family::MinNfa { states: n, alphabet_size: a.target.alphabet }).collect()
    } else if a.family == "random" {
        let spec = spec_of(&a.target)?;
        let mut v = Vec::new();
        for &n in &a.states {
            for seed in a.seed..a.seed + a.count {
                v.push(Family::Random(GenSpec { density: a.target.density, ..GenSpec::new(spec, n, a.target.alphabet, seed) }));
            }
        }
        v
    } else {
        return Err(Failure::Usage(format!("unknown family {:?} (expected random or min-nfa)", a.family)));
    };
    let manifest = benchgen::write_suite(&a.out, &families)?;
    println!("wrote {} targets, manifest {}", families.len(), manifest.display());
    Ok(0)
}

fn limits_of(l: &LimitArgs, base: RunLimits) -> RunLimits {
    RunLimits {
        timeout: l.timeout.map(Duration::from_secs_f64).unwrap_or(base.timeout),
        memory_mb: l.mem_limit.unwrap_or(base.memory_mb),
        eq_multiplier: l.eq_multiplier,
    }
}

fn learn(a: LearnArgs, run_one: Option<(String, String)>) -> Result<u8, Failure> {
    let (target_path, generated, seed) = match &a.target {
        Some(p) => (p.clone(), None, a.seed),
        None => {
            let seed = a.seed.unwrap_or(0);
            let spec = spec_of(&a.gen)?;
            let g = GenSpec { density: a.gen.density, ..GenSpec::new(spec, a.states, a.gen.alphabet, seed) };
            let t = benchgen::gen_random_wfa(&g)?;
            let dir = std::env::temp_dir().join(format!("wfalearn-{}", std::process::id()));
            std::fs::create_dir_all(&dir)?;
            let p = dir.join("target.wfa");
            t.save(&p)?;
            (p, Some(dir), Some(seed))
        }
    };
    let json = run_one.is_some();
    let (id, rng) = match run_one {
        Some(pair) => pair,
        None => (
            target_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            if generated.is_some() { RNG_NAME.to_string() } else { String::new() },
        ),
    };
    let run = RunSpec {
        id,
        target: target_path,
        seed,
        rng,
        mode: a.mode,
        encoding: a.encoding,
        incremental: !a.no_incremental,
    };
    let base = RunLimits { timeout: Duration::from_secs(u64::MAX / 4), memory_mb: 0, ..RunLimits::default() };
    let limits = limits_of(&a.limits, base);
    let mut solver = SolverConfig::default();
    if let Some(s) = &a.solver {
        solver.program = s.clone();
    }
    let target = Wfa::load(&run.target)?;
    let mut cfg = harness::learn_config(&run, &limits, solver, a.dump_smt.clone());
    if a.limits.timeout.is_none() {
        cfg.time_limit = None;
    }
    if limits.memory_mb == 0 {
        cfg.memory_limit_mb = None;
    }
    cfg.trace = a.trace;
    let mut teacher = wfalearn::teacher::SimulatedTeacher::new(target.clone(), limits.eq_multiplier);
    let outcome = wfalearn::learner::learn(&mut teacher, &cfg)?;
    let row = harness::result_row(&run, &target, &outcome);
    if let Some(dir) = generated {
        let _ = std::fs::remove_dir_all(dir);
    }
    if let Some(csv) = &a.csv {
        ResultWriter::open(csv)?.append(&row)?;
    }
    if json {
        println!("{}", serde_json::to_string(&row)?);
        return Ok(0);
    }
    let s = &outcome.stats;
    if let LearnResult::Learned(h) = &outcome.result {
        if let Some(out) = &a.out {
            h.save(out)?;
        }
        print!("{}", h.to_text());
    }
    println!("# outcome: {}", row.outcome);
    println!("# learned states: {}", s.learned_states.map(|n| n.to_string()).unwrap_or_else(|| "-".into()));
    println!("# target states: {}", target.states());
    println!("# iterations: {}", s.iterations);
    for (n, obs) in &s.unsat_record {
        println!("# unsat at n = {n} with |O| = {}", obs.len());
    }
    println!("# output queries: {}", s.output_queries);
    println!("# equivalence queries: {}", s.equivalence_queries);
    let cex: Vec<String> = s.counterexamples.iter().map(|w| target.alphabet().display(w)).collect();
    println!("# counterexamples: {}", cex.join(" "));
    println!("# learner time: {:.3} s", row.learner_time_s);
    println!("# solver time: {:.3} s", row.solver_time_s);
    println!("# teacher time: {:.3} s", row.teacher_time_s);
    match outcome.result {
        LearnResult::Learned(_) => Ok(0),
        LearnResult::Timeout => Err(Failure::Limit("time limit exceeded".into())),
        LearnResult::OutOfMemory => Err(Failure::Limit("memory limit exceeded".into())),
        LearnResult::SolverError(m) => Err(Failure::Run(m)),
    }
}

fn bench(a: BenchArgs) -> Result<u8, Failure> {
    if a.jobs == 0 {
        return Err(Failure::Usage("--jobs must be positive".into()));
    }
    if let Some(s) = &a.solver {
        std::env::set_var("WFALEARN_SOLVER", s);
    }
    let (mut axes, base) = match a.preset {
        Some(p) => (p.axes(), p.limits()),
        None => (Axes::default(), RunLimits::default()),
    };
    if !a.mode.is_empty() {
        axes.modes = a.mode.clone();
    }
    if !a.encoding.is_empty() {
        axes.encodings = a.encoding.clone();
    }
    match (a.incremental, a.no_incremental) {
        (true, true) => axes.incremental = vec![true, false],
        (true, false) => axes.incremental = vec![true],
        (false, true) => axes.incremental = vec![false],
        (false, false) => {}
    }
    let entries = benchgen::read_manifest(&a.manifest)?;
    let dir = a.manifest.parent().map(Path::to_path_buf).unwrap_or_default();
    let runs = harness::matrix(&entries, &dir, &axes)?;
    let opts = BenchOptions {
        exe: std::env::current_exe()?,
        limits: limits_of(&a.limits, base),
        jobs: a.jobs,
        csv: a.csv.clone(),
        grace: Duration::from_secs(10),
    };
    let rows = harness::run_matrix(&runs, &opts)?;
    let ok = rows.iter().filter(|r| r.outcome == "ok").count();
    eprintln!(
        "{} runs in matrix, {} executed, {} ok, {} skipped as already recorded",
        runs.len(),
        rows.len(),
        ok,
        runs.len() - rows.len()
    );
    Ok(0)
}

fn verify(a: VerifyArgs) -> Result<u8, Failure> {
    let learned = Wfa::load(&a.learned)?;
    let target = Wfa::load(&a.target)?;
    let mut checks = vec![harness::verify_exhaustive(&learned, &target, a.max_len)?];
    if let Some(m) = a.eq_multiplier {
        checks.push(harness::verify_budget(&learned, &target, m)?);
    }
    for c in checks {
        match c {
            Agreement::Agree { words } => println!("agree ({words} words)"),
            Agreement::Disagree { word, learned, target: t } => {
                println!("disagree on {}: learned {learned}, target {t}", target.alphabet().display(&word));
                return Ok(EXIT_FAILURE);
            }
        }
    }
    Ok(0)
}
