//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use wfalearn::equations::{EqSystem, VarId};
use wfalearn::semiring::{SemiringSpec, Weight};
use wfalearn::wfa::{Alphabet, Wfa, Word};

/// A Boolean automaton with its own subset-simulation semantics.
#[derive(Debug, Clone)]
pub struct BoolAut {
    pub n: usize,
    pub iota: Vec<bool>,
    pub delta: Vec<Vec<Vec<bool>>>,
    pub lambda: Vec<bool>,
}

impl BoolAut {
    fn from_bits(n: usize, k: usize, mut bits: u64) -> Self {
        let mut take = || {
            let b = bits & 1 == 1;
            bits >>= 1;
            b
        };
        let iota = (0..n).map(|_| take()).collect();
        let delta = (0..k).map(|_| (0..n).map(|_| (0..n).map(|_| take()).collect()).collect()).collect();
        let lambda = (0..n).map(|_| take()).collect();
        BoolAut { n, iota, delta, lambda }
    }

    /// Every `n`-state Boolean automaton over `k` symbols.
    pub fn all(n: usize, k: usize) -> Vec<BoolAut> {
        let params = 2 * n + k * n * n;
        (0..1u64 << params).map(|b| BoolAut::from_bits(n, k, b)).collect()
    }

    pub fn accepts(&self, w: &[usize]) -> bool {
        let mut cur = self.iota.clone();
        for &a in w {
            cur = (0..self.n).map(|j| (0..self.n).any(|i| cur[i] && self.delta[a][i][j])).collect();
        }
        (0..self.n).any(|j| cur[j] && self.lambda[j])
    }

    pub fn to_wfa(&self, alphabet: &Alphabet) -> Wfa {
        let bit = Weight::Bit;
        Wfa::new(
            SemiringSpec::Boolean,
            alphabet.clone(),
            self.iota.iter().copied().map(bit).collect(),
            self.delta.iter().map(|m| m.iter().map(|r| r.iter().copied().map(bit).collect()).collect()).collect(),
            self.lambda.iter().copied().map(bit).collect(),
        )
        .unwrap()
    }
}

/// All words of length at most `max_len`, shortest first, then by symbol.
pub fn all_words(k: usize, max_len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    let mut layer: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|w| (0..k).map(move |a| {
                let mut v = w.clone();
                v.push(a);
                v
            }))
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

/// Whether some automaton in `auts` matches every labelled word.
pub fn exists_consistent(auts: &[BoolAut], labelled: &[(Vec<usize>, bool)]) -> bool {
    auts.iter().any(|a| labelled.iter().all(|(w, b)| a.accepts(w) == *b))
}

/// Brute-force satisfiability of a Boolean witness system: enumerate the
/// free unknowns (initial weights, transitions and the generators at ε),
/// derive every other generator from the stabilization recurrence, and
/// evaluate the system's equations.
pub fn witness_system_satisfiable(sys: &EqSystem) -> bool {
    let n = sys.states();
    let k = sys.alphabet().len();
    let mut suffixes: Vec<Word> = sys
        .registry()
        .iter()
        .filter_map(|v| match v {
            VarId::Gen(0, w) => Some(w.clone()),
            _ => None,
        })
        .collect();
    suffixes.sort_by_key(|w| w.len());
    let params = n + k * n * n + n;
    for bits in 0..1u64 << params {
        let a = BoolAut::from_bits(n, k, bits);
        let mut assign: HashMap<VarId, Weight> = HashMap::new();
        for i in 0..n {
            assign.insert(VarId::Iota(i), Weight::Bit(a.iota[i]));
            assign.insert(VarId::Gen(i, Word::empty()), Weight::Bit(a.lambda[i]));
            for s in 0..k {
                for j in 0..n {
                    assign.insert(VarId::Delta { symbol: s, from: i, to: j }, Weight::Bit(a.delta[s][i][j]));
                }
            }
        }
        for w in &suffixes {
            let Some((first, rest)) = w.split_first() else { continue };
            for i in 0..n {
                let v = (0..n).any(|j| {
                    a.delta[first][i][j] && assign[&VarId::Gen(j, rest.clone())] == Weight::Bit(true)
                });
                assign.insert(VarId::Gen(i, w.clone()), Weight::Bit(v));
            }
        }
        if sys.satisfied_by(&|v: &VarId| assign.get(v).copied()).unwrap() {
            return true;
        }
    }
    false
}

/// Whether any `n`-state Boolean automaton agrees with `target` on all
/// words up to `max_len`.
pub fn has_smaller_equivalent(target: &Wfa, n: usize, max_len: usize) -> bool {
    let k = target.alphabet().len();
    let words = all_words(k, max_len);
    let labels: Vec<(Vec<usize>, bool)> =
        words.into_iter().map(|w| {
            let b = target.evaluate(&Word(w.clone())).unwrap() == Weight::Bit(true);
            (w, b)
        }).collect();
    exists_consistent(&BoolAut::all(n, k), &labels)
}
