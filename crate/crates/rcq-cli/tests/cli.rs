//! End-to-end runs of the binary against files on disk.

use std::path::Path;
use std::process::Command;

fn rcq() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rcq"))
}

fn write(dir: &Path, name: &str, content: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, content).unwrap();
    path
}

#[test]
fn translate_emits_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let query = write(
        dir.path(),
        "susp.rcq",
        "B(b) AND EXISTS u, s. FORALL p. P(b, p) -> S(p, u, s)",
    );
    let out = rcq()
        .arg("translate")
        .arg(&query)
        .arg("-o")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("fin:"), "{stdout}");
    for suffix in ["fin.sql", "inf.sql", "fin.ra", "inf.ra"] {
        let path = dir.path().join(format!("susp.{suffix}"));
        assert!(path.exists(), "missing {}", path.display());
    }
    let sql = std::fs::read_to_string(dir.path().join("susp.fin.sql")).unwrap();
    assert!(sql.starts_with("WITH"), "{sql}");
    assert!(sql.contains("LEFT JOIN"), "{sql}");
}

#[test]
fn run_reports_infinite_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let db = write(dir.path(), "db.facts", "@arity B 1\nB(1).\nB(2).\n");
    let neg = write(dir.path(), "neg.rcq", "NOT B(x)");
    let out = rcq().arg("run").arg(&neg).arg(&db).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "INFINITE");

    let pos = write(dir.path(), "pos.rcq", "B(x)");
    let out = rcq().arg("run").arg(&pos).arg(&db).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains('1') && stdout.contains('2'), "{stdout}");
}

#[test]
fn run_relative_safety_depends_on_data() {
    let dir = tempfile::tempdir().unwrap();
    let query = write(
        dir.path(),
        "user.rcq",
        "B(b) AND EXISTS s. FORALL p. P(b, p) -> S(p, u, s)",
    );
    let covered = write(
        dir.path(),
        "covered.facts",
        "B(1).\nP(1, 10).\nS(10, 20, 30).\n",
    );
    let out = rcq().arg("run").arg(&query).arg(&covered).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(!text.contains("INFINITE"), "{text}");
    assert!(text.contains("20"), "{text}");

    let uncovered = write(
        dir.path(),
        "uncovered.facts",
        "B(1).\nB(2).\nP(1, 10).\nS(10, 20, 30).\n",
    );
    let out = rcq().arg("run").arg(&query).arg(&uncovered).output().unwrap();
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "INFINITE");
}

#[test]
fn eval_oracle_agrees_with_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let db = write(
        dir.path(),
        "db.facts",
        "B(1).\nB(3).\nP2(1, 2).\nP2(3, 4).\n",
    );
    let query = write(dir.path(), "q.rcq", "B(x) AND NOT EXISTS y. P2(x, y)");
    let a = rcq().arg("eval").arg(&query).arg(&db).output().unwrap();
    let b = rcq()
        .arg("eval")
        .arg(&query)
        .arg(&db)
        .arg("--oracle")
        .output()
        .unwrap();
    assert_eq!(
        String::from_utf8_lossy(&a.stdout),
        String::from_utf8_lossy(&b.stdout)
    );
}

#[test]
fn classify_prints_flags() {
    let dir = tempfile::tempdir().unwrap();
    let query = write(
        dir.path(),
        "susp.rcq",
        "B(b) AND EXISTS u, s. FORALL p. P(b, p) -> S(p, u, s)",
    );
    let out = rcq().arg("classify").arg(&query).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("safe-range: false"), "{text}");
    assert!(text.contains("evaluable: true"), "{text}");
    assert!(text.contains("nongens: []"), "{text}");
}

#[test]
fn vgt_mode_rejects_non_evaluable() {
    let dir = tempfile::tempdir().unwrap();
    let query = write(
        dir.path(),
        "user.rcq",
        "B(b) AND EXISTS s. FORALL p. P(b, p) -> S(p, u, s)",
    );
    let out = rcq()
        .arg("translate")
        .arg(&query)
        .args(["--mode", "vgt"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("not evaluable"),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn datagolf_writes_deterministic_facts() {
    let dir = tempfile::tempdir().unwrap();
    let query = write(
        dir.path(),
        "q.rcq",
        "NOT EXISTS y. P2(x, y) AND NOT P3(x, y, z)",
    );
    let out1 = dir.path().join("one.facts");
    let out2 = dir.path().join("two.facts");
    for out in [&out1, &out2] {
        let res = rcq()
            .arg("datagolf")
            .args(["--query"])
            .arg(&query)
            .args(["--n", "3", "--strategy", "1", "--seed", "7", "-o"])
            .arg(out)
            .output()
            .unwrap();
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    assert_eq!(
        std::fs::read_to_string(&out1).unwrap(),
        std::fs::read_to_string(&out2).unwrap()
    );
}

#[test]
fn genquery_is_deterministic_and_normalize_works() {
    let a = rcq()
        .args(["genquery", "--seed", "3", "--size", "12"])
        .output()
        .unwrap();
    let b = rcq()
        .args(["genquery", "--seed", "3", "--size", "12"])
        .output()
        .unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);

    let dir = tempfile::tempdir().unwrap();
    let query = write(dir.path(), "q.rcq", "NOT (NOT B(x) AND NOT P1(x))");
    let out = rcq()
        .arg("normalize")
        .arg(&query)
        .args(["--to", "srnf"])
        .output()
        .unwrap();
    assert_eq!(
        String::from_utf8_lossy(&out.stdout).trim(),
        "(B(x) OR P1(x))"
    );
}

#[test]
fn bench_renders_a_table() {
    let out = rcq()
        .args(["bench", "--seeds", "2", "--size", "10", "--scale", "100", "--timeout", "60"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("query\tn\ttool"), "{text}");
    assert!(text.contains("rc2sql"), "{text}");
    assert!(text.contains("vgt"), "{text}");
    let lines = text.lines().count();
    assert!(lines >= 9, "expected bench cells, got {lines} lines:\n{text}");
}

#[test]
fn dbms_engine_without_database_reports_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let db = write(dir.path(), "db.facts", "B(1).\n");
    let query = write(dir.path(), "q.rcq", "B(x)");
    let out = rcq()
        .arg("run")
        .arg(&query)
        .arg(&db)
        .args(["--engine", "dbms", "--db-url", "postgres://nobody@localhost:1/none"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
