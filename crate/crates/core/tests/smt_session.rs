mod common;

use std::collections::HashMap;
use std::time::Duration;

use wfalearn::equations::{EncodingMode, EqSystem, Equation, Provenance, Term, VarId};
use wfalearn::semiring::{SemiringSpec, Weight};
use wfalearn::smt::{
    decode_wfa, EncodingChoice, Encoder, SessionMode, SmtError, SolverConfig, SolverSession, TheoryEncoding,
};
use wfalearn::teacher::TeacherError;
use wfalearn::wfa::{example_tropical, Alphabet, Wfa, Word};

fn ab() -> Alphabet {
    Alphabet::standard(2).unwrap()
}

fn mem_of(target: &Wfa) -> impl FnMut(&Word) -> Result<Weight, TeacherError> + '_ {
    move |w: &Word| Ok(target.evaluate(w)?)
}

fn table(al: &Alphabet, rows: &[(&str, Weight)]) -> impl FnMut(&Word) -> Result<Weight, TeacherError> {
    let map: HashMap<Word, Weight> = rows.iter().map(|(w, v)| (al.parse_word(w).unwrap(), *v)).collect();
    move |w: &Word| Ok(map[w])
}

fn session(spec: SemiringSpec, choice: EncodingChoice, sys: &EqSystem, mode: SessionMode) -> SolverSession {
    let enc = TheoryEncoding::for_spec(spec, choice).unwrap();
    let mut s = SolverSession::new(SolverConfig::default(), enc, spec, sys.alphabet().clone(), sys.states(), mode).unwrap();
    s.add_system(sys).unwrap();
    s
}

#[test]
fn x_times_x_equal_to_zero_forces_zero() {
    let x = VarId::Iota(0);
    let eq = Equation {
        lhs: Term::constant(Weight::Finite(0)),
        rhs: Term::mul(Term::var(x.clone()), Term::var(x.clone())),
        provenance: Provenance::Naive,
    };
    let enc = Encoder::new(TheoryEncoding::TropicalLia, ab());
    let script = format!("{}{}{}(check-sat)\n(get-value (iota_1))\n", enc.header(), enc.declare(&x), enc.assert_equation(&eq));
    let out = std::process::Command::new("z3")
        .args(["-in", "-smt2"])
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .and_then(|mut c| {
            use std::io::Write;
            c.stdin.take().unwrap().write_all(script.as_bytes())?;
            c.wait_with_output()
        })
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.split_whitespace().collect::<Vec<_>>(), ["sat", "((iota_1", "0))"]);
}

#[test]
fn witness_model_decodes_to_observation_correct_wfa() {
    let target = example_tropical();
    let al = target.alphabet().clone();
    let obs = vec![al.parse_word("ab").unwrap()];
    let sys = EqSystem::build_witness(SemiringSpec::Tropical, al.clone(), 2, &obs, &mut mem_of(&target)).unwrap();
    let mut s = session(SemiringSpec::Tropical, EncodingChoice::Lia, &sys, SessionMode::Oneshot);
    let model = s.check().unwrap().expect("sat");
    assert_eq!(model.len(), sys.registry().len());
    let h = decode_wfa(&model, 2, SemiringSpec::Tropical, &al, EncodingMode::Witness).unwrap();
    assert_eq!(h.evaluate(&obs[0]).unwrap(), Weight::Finite(21));
    assert!(sys.satisfied_by(&|v: &VarId| model.get(v)).unwrap());
}

#[test]
fn boolean_single_state_contradiction_is_unsat() {
    let al = ab();
    let rows = [("", Weight::Bit(true)), ("a", Weight::Bit(false)), ("aa", Weight::Bit(true))];
    let obs: Vec<Word> = rows.iter().map(|(w, _)| al.parse_word(w).unwrap()).collect();
    for mode in [EncodingMode::Naive, EncodingMode::Witness] {
        let sys = EqSystem::build(SemiringSpec::Boolean, al.clone(), mode, 1, &obs, &mut table(&al, &rows)).unwrap();
        let mut s = session(SemiringSpec::Boolean, EncodingChoice::Lia, &sys, SessionMode::Incremental);
        assert!(s.check().unwrap().is_none(), "{mode}");
    }
    // The same oracle by enumeration of all 2^4 one-state automata.
    let labelled: Vec<(Vec<usize>, bool)> = vec![(vec![], true), (vec![0], false), (vec![0, 0], true)];
    assert!(!common::exists_consistent(&common::BoolAut::all(1, 2), &labelled));
}

#[test]
fn incremental_and_oneshot_agree_step_by_step() {
    let target = example_tropical();
    let al = target.alphabet().clone();
    let words = ["", "a", "b", "ab", "ba", "bb", "aab"];
    for n in [1, 2] {
        for mode in [EncodingMode::Naive, EncodingMode::Witness] {
            let first = vec![Word::empty()];
            let mut sys = EqSystem::build(SemiringSpec::Tropical, al.clone(), mode, n, &first, &mut mem_of(&target)).unwrap();
            let mut inc = session(SemiringSpec::Tropical, EncodingChoice::Lia, &sys, SessionMode::Incremental);
            let mut one = session(SemiringSpec::Tropical, EncodingChoice::Lia, &sys, SessionMode::Oneshot);
            for w in &words[1..] {
                let a = inc.check().unwrap().is_some();
                let b = one.check().unwrap().is_some();
                let fresh = EqSystem::build(SemiringSpec::Tropical, al.clone(), mode, n, sys.observations(), &mut mem_of(&target)).unwrap();
                let c = session(SemiringSpec::Tropical, EncodingChoice::Lia, &fresh, SessionMode::Oneshot).check().unwrap().is_some();
                assert_eq!((a, b), (c, c), "n={n} {mode} |O|={}", sys.observations().len());
                let delta = sys.extend(&mut mem_of(&target), &al.parse_word(w).unwrap()).unwrap();
                inc.add_delta(&sys, &delta).unwrap();
                one.add_delta(&sys, &delta).unwrap();
            }
        }
    }
}

#[test]
fn lia_and_bv_agree_on_bounded_systems() {
    let spec = SemiringSpec::BoundedTropical(100);
    let al = ab();
    let rows = [("", Weight::Finite(7)), ("a", Weight::Finite(40)), ("b", Weight::PlusInf), ("ab", Weight::Finite(99))];
    let obs: Vec<Word> = rows.iter().map(|(w, _)| al.parse_word(w).unwrap()).collect();
    for n in [1, 2] {
        for mode in [EncodingMode::Naive, EncodingMode::Witness] {
            let sys = EqSystem::build(spec, al.clone(), mode, n, &obs, &mut table(&al, &rows)).unwrap();
            let lia = session(spec, EncodingChoice::Lia, &sys, SessionMode::Oneshot).check().unwrap();
            let bv = session(spec, EncodingChoice::Bv, &sys, SessionMode::Oneshot).check().unwrap();
            assert_eq!(lia.is_some(), bv.is_some(), "n={n} {mode}");
            for model in lia.iter().chain(bv.iter()) {
                let h = decode_wfa(model, n, spec, &al, mode).unwrap();
                for (w, v) in &rows {
                    assert_eq!(h.evaluate(&al.parse_word(w).unwrap()).unwrap(), *v);
                }
            }
        }
    }
}

#[test]
fn bottleneck_round_trips_both_infinities() {
    let spec = SemiringSpec::Bottleneck;
    let al = ab();
    let rows = [("", Weight::MinusInf), ("a", Weight::PlusInf), ("b", Weight::Finite(5))];
    let obs: Vec<Word> = rows.iter().map(|(w, _)| al.parse_word(w).unwrap()).collect();
    let sys = EqSystem::build_naive(spec, al.clone(), 2, &obs, &mut table(&al, &rows)).unwrap();
    let model = session(spec, EncodingChoice::Lia, &sys, SessionMode::Incremental).check().unwrap().expect("sat");
    let h = decode_wfa(&model, 2, spec, &al, EncodingMode::Naive).unwrap();
    for (w, v) in &rows {
        assert_eq!(h.evaluate(&al.parse_word(w).unwrap()).unwrap(), *v);
    }
}

#[test]
fn session_rejects_other_state_counts_and_semirings() {
    let target = example_tropical();
    let al = target.alphabet().clone();
    let sys = EqSystem::build_naive(SemiringSpec::Tropical, al.clone(), 2, &[Word::empty()], &mut mem_of(&target)).unwrap();
    let mut s = SolverSession::new(SolverConfig::default(), TheoryEncoding::TropicalLia, SemiringSpec::Tropical, al.clone(), 3, SessionMode::Oneshot).unwrap();
    assert!(matches!(s.add_system(&sys), Err(SmtError::StateCountChanged { expected: 3, got: 2 })));
    assert!(matches!(
        SolverSession::new(SolverConfig::default(), TheoryEncoding::BottleneckLia, SemiringSpec::Tropical, al, 2, SessionMode::Oneshot),
        Err(SmtError::EncodingMismatch { .. })
    ));
}

#[test]
fn dump_contains_the_full_script() {
    let target = example_tropical();
    let al = target.alphabet().clone();
    let sys = EqSystem::build_witness(SemiringSpec::Tropical, al.clone(), 2, &[al.parse_word("ab").unwrap()], &mut mem_of(&target)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.smt2");
    let mut s = SolverSession::new(SolverConfig::default(), TheoryEncoding::TropicalLia, SemiringSpec::Tropical, al, 2, SessionMode::Incremental).unwrap();
    s.dump_to(&path).unwrap();
    s.add_system(&sys).unwrap();
    s.check().unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("(set-logic QF_LIA)"));
    assert_eq!(text.matches("(declare-const").count(), sys.registry().len());
    assert_eq!(text.matches("(assert (>=").count(), sys.registry().len());
    assert!(text.contains("(declare-const |f_1_[ab]| Int)"));
    assert!(text.contains("(check-sat)\n(get-value ("));
    // The dumped script runs as-is.
    let out = std::process::Command::new("z3").arg(&path).output().unwrap();
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("sat"));
}

fn fake_solver(script: &str, timeout_ms: u64) -> SolverSession {
    let cfg = SolverConfig {
        program: "sh".into(),
        args: vec!["-c".into(), script.into()],
        timeout: Some(Duration::from_millis(timeout_ms)),
        memory_mb: None,
    };
    let al = ab();
    let target = example_tropical();
    let sys = EqSystem::build_naive(SemiringSpec::Tropical, al.clone(), 1, &[Word::empty()], &mut mem_of(&target)).unwrap();
    let mut s = SolverSession::new(cfg, TheoryEncoding::TropicalLia, SemiringSpec::Tropical, al, 1, SessionMode::Oneshot).unwrap();
    s.add_system(&sys).unwrap();
    s
}

#[test]
fn solver_failures_are_distinguished() {
    assert!(matches!(fake_solver("cat > /dev/null & sleep 5", 200).check(), Err(SmtError::Timeout)));
    assert!(matches!(fake_solver("exit 3", 5000).check(), Err(SmtError::Crash(_))));
    assert!(matches!(fake_solver("echo sat; echo '(iota_1 0)'; sleep 1", 5000).check(), Err(SmtError::UnparseableModel(_))));
    assert!(matches!(
        fake_solver("echo sat; echo '((iota_1 (- 7)) (delta_a_1_1 0) (delta_b_1_1 0) (lambda_1 0))'; sleep 1", 5000).check(),
        Err(SmtError::UnparseableModel(_))
    ));
    assert!(matches!(fake_solver("echo '(error \"boom\")'; sleep 1", 5000).check(), Err(SmtError::SolverError(_))));
    assert!(matches!(
        fake_solver("echo unknown; echo '(:reason-unknown \"memout\")'; sleep 1", 5000).check(),
        Err(SmtError::OutOfMemory)
    ));
}

#[test]
fn unreported_variables_default_to_zero() {
    let mut s = fake_solver("echo sat; echo '((iota_1 3))'; sleep 1", 5000);
    let model = s.check().unwrap().unwrap();
    assert_eq!(model.get(&VarId::Iota(0)), Some(Weight::Finite(3)));
    assert_eq!(model.get(&VarId::Lambda(0)), Some(Weight::PlusInf));
    assert_eq!(model.len(), 4);
}

#[test]
fn missing_solver_binary_is_a_spawn_error() {
    let cfg = SolverConfig { program: "/nonexistent/solver".into(), ..SolverConfig::default() };
    let r = SolverSession::new(cfg, TheoryEncoding::TropicalLia, SemiringSpec::Tropical, ab(), 1, SessionMode::Incremental);
    assert!(matches!(r, Err(SmtError::Spawn { .. })));
}

#[test]
fn long_naive_words_stay_linear() {
    let al = ab();
    let spec = SemiringSpec::BoundedTropical(100);
    let w = Word(vec![0; 30]);
    let sys = EqSystem::build_naive(spec, al.clone(), 3, &[w], &mut |_: &Word| Ok::<_, TeacherError>(Weight::Finite(30))).unwrap();
    let enc = Encoder::new(TheoryEncoding::BoundedTropicalLia(100), al);
    let text = enc.encode_system(&sys);
    assert!(text.len() < 200_000, "script is {} bytes", text.len());
    let mut s = session(spec, EncodingChoice::Lia, &sys, SessionMode::Oneshot);
    assert!(s.check().unwrap().is_some());
}
