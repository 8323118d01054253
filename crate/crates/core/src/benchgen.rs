//! Benchmark targets: a family of minimal NFAs and seeded random WFAs.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::semiring::{SemiringError, SemiringKind, SemiringSpec, Weight};
use crate::wfa::{Alphabet, Wfa, WfaError};

/// Recorded next to every generated target and result row.
pub const RNG_NAME: &str = "chacha8-seed_from_u64";

pub const DEFAULT_DENSITY: f64 = 1.25;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("the minimal-NFA family needs n >= 2 and at least 2 symbols (got n = {states}, |alphabet| = {alphabet})")]
    FamilyTooSmall { states: usize, alphabet: usize },
    #[error("density {density} is outside (0, {states}]")]
    BadDensity { density: f64, states: usize },
    #[error("invalid generator parameters: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Wfa(#[from] WfaError),
    #[error(transparent)]
    Semiring(#[from] SemiringError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Boolean WFA for Σ*·a·Σ^{n−2}, where `a` is the first symbol.
pub fn gen_min_nfa(n: usize, alphabet: &Alphabet) -> Result<Wfa, GenError> {
    if n < 2 || alphabet.len() < 2 {
        return Err(GenError::FamilyTooSmall { states: n, alphabet: alphabet.len() });
    }
    let spec = SemiringSpec::Boolean;
    let (zero, one) = (spec.zero(), spec.one());
    let mut delta = vec![vec![vec![zero; n]; n]; alphabet.len()];
    for (a, m) in delta.iter_mut().enumerate() {
        m[0][0] = one;
        if a == 0 {
            m[0][1] = one;
        }
        for i in 1..n - 1 {
            m[i][i + 1] = one;
        }
    }
    let mut iota = vec![zero; n];
    iota[0] = one;
    let mut lambda = vec![zero; n];
    lambda[n - 1] = one;
    Ok(Wfa::new(spec, alphabet.clone(), iota, delta, lambda)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub semiring: SemiringSpec,
    pub states: usize,
    pub alphabet_size: usize,
    /// Expected number of non-zero transitions per (state, symbol).
    pub density: f64,
    /// Largest sampled finite weight; `None` means `min(1000, b)`.
    pub weight_cap: Option<u64>,
    pub seed: u64,
}

impl GenSpec {
    pub fn new(semiring: SemiringSpec, states: usize, alphabet_size: usize, seed: u64) -> Self {
        GenSpec { semiring, states, alphabet_size, density: DEFAULT_DENSITY, weight_cap: None, seed }
    }

    pub fn effective_cap(&self) -> u64 {
        self.weight_cap.unwrap_or(match self.semiring {
            SemiringSpec::BoundedTropical(b) => b.min(1000),
            _ => 1000,
        })
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if self.states == 0 || self.alphabet_size == 0 {
            return Err(GenError::BadSpec("states and alphabet size must be positive".into()));
        }
        if !(self.density > 0.0 && self.density <= self.states as f64) {
            return Err(GenError::BadDensity { density: self.density, states: self.states });
        }
        if let (SemiringSpec::BoundedTropical(b), Some(cap)) = (self.semiring, self.weight_cap) {
            if cap > b {
                return Err(GenError::BadSpec(format!("weight cap {cap} exceeds the bound {b}")));
            }
        }
        Ok(())
    }
}

fn sample_nonzero(spec: SemiringSpec, cap: u64, rng: &mut ChaCha8Rng) -> Weight {
    match spec {
        SemiringSpec::Boolean => Weight::Bit(true),
        _ => Weight::Finite(rng.gen_range(0..=cap)),
    }
}

/// Random WFA: every transition, initial and final entry is non-zero with
/// probability `density / n`; at least one initial and one final entry is
/// forced non-zero.
pub fn gen_random_wfa(spec: &GenSpec) -> Result<Wfa, GenError> {
    spec.validate()?;
    let sr = spec.semiring;
    let n = spec.states;
    let cap = spec.effective_cap();
    let p = spec.density / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut delta = vec![vec![vec![sr.zero(); n]; n]; spec.alphabet_size];
    for m in delta.iter_mut() {
        for row in m.iter_mut() {
            for cell in row.iter_mut() {
                if rng.gen_bool(p) {
                    *cell = sample_nonzero(sr, cap, &mut rng);
                }
            }
        }
    }
    let vector = |rng: &mut ChaCha8Rng| {
        let mut v: Vec<Weight> =
            (0..n).map(|_| if rng.gen_bool(p) { sample_nonzero(sr, cap, rng) } else { sr.zero() }).collect();
        if v.iter().all(|w| *w == sr.zero()) {
            let i = rng.gen_range(0..n);
            v[i] = sample_nonzero(sr, cap, rng);
        }
        v
    };
    let iota = vector(&mut rng);
    let lambda = vector(&mut rng);
    let alphabet = Alphabet::standard(spec.alphabet_size)?;
    Ok(Wfa::new(sr, alphabet, iota, delta, lambda)?)
}

/// One generated benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub path: String,
    pub family: String,
    pub semiring: String,
    pub bound: Option<u64>,
    pub states: usize,
    pub alphabet: usize,
    pub density: Option<f64>,
    pub seed: Option<u64>,
    pub rng: String,
}

impl ManifestEntry {
    pub fn semiring_spec(&self) -> Result<SemiringSpec, GenError> {
        let kind: SemiringKind = self.semiring.parse()?;
        Ok(SemiringSpec::new(kind, self.bound)?)
    }

    /// Target path; relative paths are taken relative to the manifest.
    pub fn resolve(&self, manifest_dir: &Path) -> PathBuf {
        let p = Path::new(&self.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            manifest_dir.join(p)
        }
    }
}

/// What to generate.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    MinNfa { states: usize, alphabet_size: usize },
    Random(GenSpec),
}

impl Family {
    pub fn id(&self) -> String {
        match self {
            Family::MinNfa { states, alphabet_size } => format!("minnfa-n{states}-k{alphabet_size}"),
            Family::Random(g) => {
                let sr = match g.semiring {
                    SemiringSpec::BoundedTropical(b) => format!("btropical{b}"),
                    other => other.kind().name().to_string(),
                };
                format!("{sr}-n{}-k{}-s{}", g.states, g.alphabet_size, g.seed)
            }
        }
    }

    pub fn generate(&self) -> Result<Wfa, GenError> {
        match self {
            Family::MinNfa { states, alphabet_size } => gen_min_nfa(*states, &Alphabet::standard(*alphabet_size)?),
            Family::Random(g) => gen_random_wfa(g),
        }
    }

    fn entry(&self, path: String) -> ManifestEntry {
        match self {
            Family::MinNfa { states, alphabet_size } => ManifestEntry {
                id: self.id(),
                path,
                family: "min-nfa".into(),
                semiring: SemiringKind::Boolean.name().into(),
                bound: None,
                states: *states,
                alphabet: *alphabet_size,
                density: None,
                seed: None,
                rng: String::new(),
            },
            Family::Random(g) => ManifestEntry {
                id: self.id(),
                path,
                family: "random".into(),
                semiring: g.semiring.kind().name().into(),
                bound: g.semiring.bound(),
                states: g.states,
                alphabet: g.alphabet_size,
                density: Some(g.density),
                seed: Some(g.seed),
                rng: RNG_NAME.into(),
            },
        }
    }
}

pub const MANIFEST_FILE: &str = "manifest.csv";

/// Writes every target as `<id>.wfa` under `dir` plus a `manifest.csv`
/// listing them, and returns the manifest path.
pub fn write_suite(dir: &Path, families: &[Family]) -> Result<PathBuf, GenError> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(families.len());
    for fam in families {
        let file = format!("{}.wfa", fam.id());
        fam.generate()?.save(&dir.join(&file))?;
        entries.push(fam.entry(file));
    }
    let manifest = dir.join(MANIFEST_FILE);
    write_manifest(&manifest, &entries)?;
    Ok(manifest)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<(), GenError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(["id", "path", "family", "semiring", "bound", "states", "alphabet", "density", "seed", "rng"])?;
    for e in entries {
        w.serialize(e)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, GenError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        out.push(row?);
    }
    Ok(out)
}
