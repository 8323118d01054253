use std::path::Path;
use std::process::{Command, Output};

use wfalearn::harness::{read_results, CSV_HEADER};
use wfalearn::wfa::{example_tropical, Wfa};

fn wfalearn(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wfalearn")).args(args).current_dir(cwd).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn learn_example_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    example_tropical().save(&dir.path().join("example1.wfa")).unwrap();
    let o = wfalearn(
        &["learn", "--target", "example1.wfa", "--mode", "witness", "--encoding", "lia", "--incremental", "--out", "h.wfa"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("# learned states: 2"));
    assert!(text.contains("# unsat at n = 1"));
    let printed = Wfa::parse(&text).unwrap();
    let saved = Wfa::load(&dir.path().join("h.wfa")).unwrap();
    assert_eq!(printed, saved);
    assert_eq!(saved.states(), 2);
    let v = wfalearn(&["verify", "--learned", "h.wfa", "--target", "example1.wfa", "--max-len", "6"], dir.path());
    assert_eq!(v.status.code(), Some(0));
    assert_eq!(stdout(&v).trim(), "agree (127 words)");
}

#[test]
fn verify_identical_and_different() {
    let dir = tempfile::tempdir().unwrap();
    let t = example_tropical();
    t.save(&dir.path().join("t.wfa")).unwrap();
    let o = wfalearn(&["verify", "--learned", "t.wfa", "--target", "t.wfa", "--max-len", "5"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "agree (63 words)");
    std::fs::write(dir.path().join("h.wfa"), t.to_text().replace("initial 4 5", "initial 4 6")).unwrap();
    let o = wfalearn(&["verify", "--learned", "h.wfa", "--target", "t.wfa"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stdout(&o).trim(), "disagree on ε: learned 9, target 8");
}

#[test]
fn bench_on_empty_manifest_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("m.csv"), "id,path,family,semiring,bound,states,alphabet,density,seed,rng\n").unwrap();
    let o = wfalearn(&["bench", "--manifest", "m.csv", "--csv", "r.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    assert_eq!(csv, format!("{}\n", CSV_HEADER.join(",")));
}

#[test]
fn gen_then_bench_matrix_and_resume() {
    let dir = tempfile::tempdir().unwrap();
    let g = wfalearn(&["gen", "--semiring", "btropical", "--bound", "100", "--states", "2", "--seed", "3", "--out", "s"], dir.path());
    assert!(g.status.success());
    let args = [
        "bench", "--manifest", "s/manifest.csv", "--mode", "naive,witness", "--encoding", "lia,bv",
        "--incremental", "--no-incremental", "--csv", "r.csv", "--jobs", "2", "--timeout", "120", "--mem-limit", "2048",
    ];
    let o = wfalearn(&args, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_results(&dir.path().join("r.csv")).unwrap();
    assert_eq!(rows.len(), 8);
    let keys: Vec<_> = rows.iter().map(|r| (r.mode.as_str(), r.encoding.as_str(), r.incremental)).collect();
    assert_eq!(keys[0], ("naive", "lia", true));
    assert_eq!(keys[1], ("naive", "lia", false));
    assert_eq!(keys[7], ("witness", "bv", false));
    assert!(rows.iter().all(|r| r.outcome == "ok"));
    let learned: Vec<_> = rows.iter().map(|r| r.learned_states).collect();
    assert!(learned.iter().all(|n| *n == learned[0]));
    assert!(rows.iter().all(|r| (r.learner_time_s + r.teacher_time_s - r.total_time_s).abs() <= 0.05 * r.total_time_s + 1e-6));
    // A second invocation finds every run recorded.
    let again = wfalearn(&args, dir.path());
    assert!(again.status.success());
    assert_eq!(read_results(&dir.path().join("r.csv")).unwrap().len(), 8);
}

#[test]
fn bench_records_limits_as_rows() {
    let dir = tempfile::tempdir().unwrap();
    let g = wfalearn(&["gen", "--semiring", "tropical", "--states", "7", "--alphabet", "4", "--seed", "1", "--out", "s"], dir.path());
    assert!(g.status.success());
    let o = wfalearn(
        &["bench", "--manifest", "s/manifest.csv", "--mode", "naive", "--csv", "r.csv", "--timeout", "1"],
        dir.path(),
    );
    assert!(o.status.success());
    let rows = read_results(&dir.path().join("r.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].outcome, "timeout");
    assert_eq!(rows[0].learned_states, None);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(wfalearn(&["learn", "--no-such-flag"], dir.path()).status.code(), Some(2));
    assert_eq!(wfalearn(&["learn", "--target", "missing.wfa"], dir.path()).status.code(), Some(1));
    let o = wfalearn(&["learn", "--semiring", "tropical", "--states", "7", "--alphabet", "4", "--seed", "1", "--mode", "naive", "--timeout", "1"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(wfalearn(&["gen", "--family", "other", "--out", "x"], dir.path()).status.code(), Some(2));
}

#[test]
fn dump_smt_records_every_check() {
    let dir = tempfile::tempdir().unwrap();
    example_tropical().save(&dir.path().join("t.wfa")).unwrap();
    let o = wfalearn(&["learn", "--target", "t.wfa", "--no-incremental", "--dump-smt", "x.smt2"], dir.path());
    assert!(o.status.success());
    let text = std::fs::read_to_string(dir.path().join("x.smt2")).unwrap();
    assert!(text.contains("(set-logic QF_LIA)"));
    assert!(text.contains("|f_1_[]|"));
    assert!(text.matches("(check-sat)").count() >= 2);
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = wfalearn(&["gen", "--semiring", "bottleneck", "--states", "2,3", "--count", "3", "--out", out], dir.path());
        assert!(o.status.success());
    }
    let a = std::fs::read_to_string(dir.path().join("a/bottleneck-n3-k2-s2.wfa")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("b/bottleneck-n3-k2-s2.wfa")).unwrap();
    assert_eq!(a, b);
    let m = std::fs::read_to_string(dir.path().join("a/manifest.csv")).unwrap();
    assert_eq!(m.lines().count(), 7);
}
