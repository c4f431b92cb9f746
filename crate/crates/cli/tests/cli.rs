use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tow-bombe"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn body(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn help_lists_flags_and_defaults() {
    let o = run(&["run-cbp", "--help"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for needle in ["--seed", "--samples", "--omega", "--amplitude", "--workers", "[default: 1000]", "[default: auto]"] {
        assert!(text.contains(needle), "missing {needle}");
    }
    let top = stdout(&run(&["--help"]));
    for cmd in ["run-bp", "run-cbp", "run-epd", "sweep", "verify-tables", "verify-invariants"] {
        assert!(top.contains(cmd), "missing {cmd}");
    }
}

#[test]
fn run_cbp_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let out = |name: &str| {
        let d = dir.path().join(name);
        let o = run(&[
            "run-cbp", "--samples", "6", "--plays", "300", "--seed", "9",
            "--out", d.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        d
    };
    let (a, b) = (out("a"), out("b"));
    for f in ["records.csv", "summary.csv", "clusters.csv"] {
        assert_eq!(body(&a.join(f)), body(&b.join(f)), "{f}");
    }
    let header = std::fs::read_to_string(a.join("records.csv")).unwrap();
    assert!(header.contains("# dynamics.seed = 9"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.ini");
    std::fs::write(
        &cfg,
        "[dynamics]\nsamples = 3\nplays = 200\nseed = 4\n[fluctuation]\nkind = fixed\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = run(&[
        "run-cbp", "--config", cfg.to_str().unwrap(), "--seed", "5",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("records.csv")).unwrap();
    assert!(text.contains("# dynamics.seed = 5"));
    assert!(text.contains("# dynamics.samples = 3"));
    assert!(text.contains("# fluctuation.kind = fixed"));
}

#[test]
fn verify_tables_reports_discrepancies_and_succeeds() {
    let o = run(&["verify-tables"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("27/27"));
    assert!(text.contains("(B,C,D)"));
}

#[test]
fn corrupt_table_exits_with_integrity_code() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("bad.csv");
    std::fs::write(&table, "pattern,deg_1,deg_2,deg_3,p_1,p_2,p_3\nAAA,0,0,0,0.5,0.5,0.5\n").unwrap();
    let o = run(&["verify-tables", "--epd-table", table.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bad_arguments_exit_with_usage_code() {
    assert_eq!(run(&["run-cbp", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(run(&["run-cbp", "--fluct", "wobbly"]).status.code(), Some(2));
    assert_eq!(run(&["run-cbp", "--players", "9"]).status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_with_io_code() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let out = blocker.join("out");
    let o = run(&["run-cbp", "--samples", "2", "--plays", "50", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("file"));
}

#[test]
fn run_bp_writes_a_regret_curve_per_learner() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "run-bp", "--samples", "20", "--plays", "200", "--baselines", "ucb1-tuned,softmax:0.2",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = body(&dir.path().join("regret.csv"));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("step,tow,ucb1-tuned,softmax:0.2"));
    assert_eq!(lines.count(), 200);
}

#[test]
fn verify_invariants_passes_on_a_small_budget() {
    let o = run(&["verify-invariants", "--steps", "2000", "--generations", "500", "--tuples", "100"]);
    assert!(o.status.success());
    assert!(!stdout(&o).contains("FAIL"));
}
