//! End-to-end runs of the `cca` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn cca(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cca")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

struct Built {
    dir: tempfile::TempDir,
}

impl Built {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn encrypt(src: &Path, extra: &[&str]) -> Built {
    let dir = tempfile::tempdir().unwrap();
    let (idx, keys) = (dir.path().join("app.idx"), dir.path().join("app.keys"));
    let mut args = vec!["encrypt", "--src", s(src), "--out-index", s(&idx), "--out-keys", s(&keys)];
    args.extend_from_slice(extra);
    let o = cca(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    Built { dir }
}

fn authorise(b: &Built, task: &str, extra: &[&str]) -> Output {
    let (keys, q) = (b.path("app.keys"), b.path(&format!("{task}.qry")));
    let mut args = vec!["authorise", "--task", task, "--keys", s(&keys), "--out", s(&q)];
    args.extend_from_slice(extra);
    cca(&args)
}

fn analyse(b: &Built, index: &Path, task: &str) -> Output {
    let (q, r) = (b.path(&format!("{task}.qry")), b.path(&format!("{task}.rpt")));
    cca(&["analyse", "--index", s(index), "--query", s(&q), "--out", s(&r)])
}

#[test]
fn reassign_roundtrip() {
    let b = encrypt(&corpus("reassign"), &[]);
    let o = cca(&["stats", "--index", s(&b.path("app.idx"))]);
    let text = stdout(&o);
    assert!(text.contains("entries:   6"), "{text}");
    assert!(text.contains("mode:      full"), "{text}");

    assert!(authorise(&b, "XSS", &[]).status.success());
    let o = analyse(&b, &b.path("app.idx"), "XSS");
    assert!(o.status.success(), "{}", stderr(&o));
    let json = b.path("findings.json");
    let o = cca(&["decrypt-report", "--report", s(&b.path("XSS.rpt")), "--keys", s(&b.path("app.keys")), "--out", s(&json)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("reassign.php:5"), "{}", stdout(&o));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    let f = &v["findings"];
    assert_eq!(f.as_array().unwrap().len(), 1);
    assert_eq!(f[0]["sink_line"], 5);
    assert_eq!(f[0]["source_line"], 1);
}

#[test]
fn report_matches_oracle_for_multi_file_apps() {
    for mode in [&[][..], &["--no-ore"][..], &["--no-encryption"][..]] {
        let src = corpus("apps/login");
        let b = encrypt(&src, mode);
        assert!(authorise(&b, "SQLi", &[]).status.success());
        assert!(analyse(&b, &b.path("app.idx"), "SQLi").status.success());
        let json = b.path("f.json");
        let o = cca(&["decrypt-report", "--report", s(&b.path("SQLi.rpt")), "--keys", s(&b.path("app.keys")), "--out", s(&json)]);
        assert!(o.status.success(), "{}", stderr(&o));
        let oracle = cca(&["oracle", "--src", s(&src), "--task", "SQLi"]);
        let want: serde_json::Value = serde_json::from_slice(&oracle.stdout).unwrap();
        let got: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
        assert_eq!(got, want, "{mode:?}");
        assert!(!want["findings"].as_array().unwrap().is_empty());
    }
}

#[test]
fn denied_task_exits_3() {
    let b = encrypt(&corpus("reassign"), &[]);
    let policy = b.path("policy.txt");
    fs::write(&policy, "deny sqli\nallow xss\n").unwrap();
    let o = authorise(&b, "SQLi", &["--policy", s(&policy)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(!b.path("SQLi.qry").exists());
    assert!(authorise(&b, "XSS", &["--policy", s(&policy)]).status.success());
}

#[test]
fn unknown_task_is_a_usage_error() {
    let b = encrypt(&corpus("reassign"), &[]);
    let o = authorise(&b, "CSRF", &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown task"), "{}", stderr(&o));
    assert_eq!(cca(&["analyse"]).status.code(), Some(1));
}

#[test]
fn query_from_other_keys_finds_nothing() {
    let a = encrypt(&corpus("reassign"), &[]);
    let b = encrypt(&corpus("reassign"), &[]);
    assert!(authorise(&b, "XSS", &[]).status.success());
    let o = analyse(&b, &a.path("app.idx"), "XSS");
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("no index entry matched"), "{}", stderr(&o));
    let rpt: serde_json::Value = serde_json::from_str(&fs::read_to_string(b.path("XSS.rpt")).unwrap()).unwrap();
    assert!(rpt["paths"].as_array().unwrap().is_empty());
}

#[test]
fn mismatched_mode_is_a_stage_error() {
    let a = encrypt(&corpus("reassign"), &["--no-ore"]);
    let b = encrypt(&corpus("reassign"), &[]);
    assert!(authorise(&b, "XSS", &[]).status.success());
    assert_eq!(analyse(&b, &a.path("app.idx"), "XSS").status.code(), Some(2));
}

#[test]
fn analyser_refuses_key_file() {
    let b = encrypt(&corpus("reassign"), &[]);
    let keys = b.path("app.keys");
    let o = cca(&["analyse", "--index", s(&b.path("app.idx")), "--query", s(&keys), "--out", s(&b.path("r"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("master key"), "{}", stderr(&o));
}

#[test]
fn empty_tree_gives_empty_index() {
    let src = tempfile::tempdir().unwrap();
    let b = encrypt(src.path(), &[]);
    let o = cca(&["stats", "--index", s(&b.path("app.idx"))]);
    assert!(stdout(&o).contains("entries:   0"), "{}", stdout(&o));
    let again = cca(&[
        "encrypt",
        "--src",
        s(src.path()),
        "--out-index",
        s(&b.path("x.idx")),
        "--out-keys",
        s(&b.path("x.keys")),
    ]);
    assert!(stderr(&again).contains("no PHP files") || stderr(&again).contains("empty"), "{}", stderr(&again));
}

#[test]
fn object_oriented_file_is_skipped() {
    let src = tempfile::tempdir().unwrap();
    fs::write(src.path().join("a.php"), "<?php\n$a = $_GET['x'];\necho $a;\n").unwrap();
    fs::write(src.path().join("b.php"), "<?php\nclass Foo { public $x; }\n$f = new Foo();\necho $f->x;\n").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (idx, keys) = (dir.path().join("i"), dir.path().join("k"));
    let o = cca(&["encrypt", "--src", s(src.path()), "--out-index", s(&idx), "--out-keys", s(&keys)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("b.php"), "{}", stderr(&o));
    assert!(stderr(&o).contains("indexed 1 files"), "{}", stderr(&o));
}

#[test]
fn dumps_and_bench() {
    let dir = tempfile::tempdir().unwrap();
    let (idx, keys) = (dir.path().join("i"), dir.path().join("k"));
    let src = corpus("reassign");
    let o = cca(&[
        "encrypt",
        "--src",
        s(&src),
        "--out-index",
        s(&idx),
        "--out-keys",
        s(&keys),
        "--no-encryption",
        "--dump-lextokens",
        "--dump-itl",
        "--dump-dcfg",
    ]);
    let out = stdout(&o);
    assert!(out.contains("(VAR0,1)(OP0,1)(INPUT,1)(END_ASSIGN,1)"), "{out}");
    assert!(out.contains("XSS_SENS -> (VAR2,6,0,0,0)"), "{out}");
    assert!(out.contains("VAR\t$a"), "{out}");

    let o = cca(&["bench", "--src", s(&src), "--runs", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("det-rnd"), "{}", stdout(&o));
    assert_eq!(cca(&["bench", "--src", s(&src), "--runs", "0"]).status.code(), Some(1));
}

#[test]
fn bad_inputs_exit_with_format_errors() {
    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk");
    fs::write(&junk, "not an index").unwrap();
    assert_eq!(cca(&["stats", "--index", s(&junk)]).status.code(), Some(2));
    let missing = dir.path().join("missing");
    assert_ne!(cca(&["stats", "--index", s(&missing)]).status.code(), Some(0));
    let rules = dir.path().join("rules.toml");
    fs::write(&rules, "[metacharacters]\ndrop = [\"NOPE\"]\n").unwrap();
    let o = cca(&[
        "encrypt",
        "--src",
        s(&corpus("reassign")),
        "--out-index",
        s(&dir.path().join("i")),
        "--out-keys",
        s(&dir.path().join("k")),
        "--rules",
        s(&rules),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}
