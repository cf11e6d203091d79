use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dbap::corpus::write_document;
use dbap::rst::rst_to_json;
use dbap::synth::micro_k002;

fn dbap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dbap"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = dbap(args);
    assert!(
        out.status.success(),
        "dbap {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, docs: usize, paraphrases: bool) -> (PathBuf, PathBuf) {
    let docs = docs.to_string();
    let mut args = vec!["synth", "--out", p(dir), "--docs", &docs];
    if paraphrases {
        args.push("--paraphrases");
    }
    ok(&args);
    (dir.join("corpus"), dir.join("rst"))
}

fn golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected =
        std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing {}", path.display()));
    assert_eq!(
        actual, expected,
        "{name} drifted; rerun with UPDATE_GOLDEN=1 if intended"
    );
}

#[test]
fn help_texts_match_golden_files() {
    golden("help.txt", &ok(&["--help"]));
    for cmd in [
        "convert",
        "agree",
        "train",
        "parse",
        "eval",
        "export-coeffs",
        "synth",
    ] {
        golden(&format!("{cmd}.txt"), &ok(&[cmd, "--help"]));
    }
}

#[test]
fn train_parse_and_score_a_synthetic_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, rst) = synth(dir.path(), 12, true);
    let model = dir.path().join("m.ckpt");
    ok(&[
        "train",
        "--corpus",
        p(&corpus),
        "--rst-dir",
        p(&rst),
        "--mode",
        "dbap7",
        "--augmented",
        "--max-epochs",
        "3",
        "--out",
        p(&model),
    ]);
    let history: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("m.ckpt.history.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(history["epochs"].as_array().unwrap().len(), 3);

    let parses = ok(&[
        "parse",
        "--model",
        p(&model),
        "--corpus",
        p(&corpus),
        "--rst-dir",
        p(&rst),
        "--scores",
    ]);
    let lines: Vec<serde_json::Value> = parses
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 24);
    let n = lines[0]["heads"].as_array().unwrap().len();
    assert_eq!(lines[0]["scores"].as_array().unwrap().len(), n);
    assert_eq!(lines[0]["scores"][0].as_array().unwrap().len(), n + 1);

    let coeffs = ok(&["export-coeffs", "--model", p(&model)]);
    assert!(coeffs.starts_with("relation\tdirection\tmean\tstd\tbucket\n"));
    assert!(coeffs.lines().count() > 2);
}

/// Gold trees written back as predictions score 100 everywhere.
#[test]
fn gold_predictions_score_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, _) = synth(dir.path(), 6, false);
    let mut pred = String::new();
    for entry in std::fs::read_dir(&corpus).unwrap() {
        let (doc, tree) = dbap::corpus::read_document(&entry.unwrap().path()).unwrap();
        let tree = tree.unwrap();
        pred.push_str(
            &serde_json::json!({"doc_id": doc.id, "heads": tree.heads, "functions": tree.functions}).to_string(),
        );
        pred.push('\n');
    }
    let path = dir.path().join("gold.jsonl");
    std::fs::write(&path, pred).unwrap();
    let report = ok(&[
        "eval",
        "--corpus",
        p(&corpus),
        "--pred",
        p(&path),
        "--format",
        "json",
    ]);
    let v: serde_json::Value = serde_json::from_str(&report).unwrap();
    let mean = &v[0]["report"]["mean"];
    for m in ["cc", "ro", "fu", "at", "uas", "las"] {
        assert_eq!(mean[m].as_f64(), Some(100.0), "{m}");
    }
}

#[test]
fn cross_validation_compares_modes() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, rst) = synth(dir.path(), 12, false);
    let splits = dir.path().join("splits.json");
    let table = ok(&[
        "eval",
        "--corpus",
        p(&corpus),
        "--rst-dir",
        p(&rst),
        "--modes",
        "bap,dbap5",
        "--folds",
        "3",
        "--max-epochs",
        "2",
        "--jobs",
        "2",
        "--save-splits",
        p(&splits),
    ]);
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[0], "model\tcc\tro\tfu\tat\tUAS\tLAS");
    assert!(rows[1].starts_with("bap\t"));
    assert!(rows[2].starts_with("dbap5\t"));
    let saved: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&splits).unwrap()).unwrap();
    assert_eq!(saved.as_array().unwrap().len(), 3);

    let again = ok(&[
        "eval",
        "--corpus",
        p(&corpus),
        "--rst-dir",
        p(&rst),
        "--modes",
        "bap,dbap5",
        "--splits",
        p(&splits),
        "--max-epochs",
        "2",
    ]);
    assert_eq!(again, table, "saved splits reproduce the run");
}

#[test]
fn identical_discourse_variants_agree_fully() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, rst) = synth(dir.path(), 5, true);
    let table = ok(&["agree", "--corpus", p(&corpus), "--rst-dir", p(&rst)]);
    let row: Vec<&str> = table.lines().nth(1).unwrap().split('\t').collect();
    assert_eq!(row[0], "en");
    assert_eq!(row[1], "5");
    for col in [2, 4, 6, 8] {
        assert_eq!(row[col], "1.0000");
    }
}

#[test]
fn end_to_end_segmentation_from_discourse_trees() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, rst) = (dir.path().join("corpus"), dir.path().join("rst"));
    std::fs::create_dir_all(&corpus).unwrap();
    std::fs::create_dir_all(&rst).unwrap();
    let k = micro_k002();
    write_document(&corpus.join("micro_k002.json"), &k.document, Some(&k.tree)).unwrap();
    let json = serde_json::to_string(&rst_to_json(&k.document.id, &k.rst)).unwrap();
    std::fs::write(rst.join("micro_k002.json"), json).unwrap();

    let model = dir.path().join("e2e.ckpt");
    ok(&[
        "train",
        "--corpus",
        p(&corpus),
        "--rst-dir",
        p(&rst),
        "--mode",
        "dbap6",
        "--segmentation",
        "e2e",
        "--max-epochs",
        "2",
        "--out",
        p(&model),
    ]);
    let line: serde_json::Value = serde_json::from_str(
        ok(&[
            "parse",
            "--model",
            p(&model),
            "--corpus",
            p(&corpus),
            "--rst-dir",
            p(&rst),
        ])
        .trim(),
    )
    .unwrap();
    assert_eq!(line["heads"].as_array().unwrap().len(), 8);

    let out = dbap(&[
        "train",
        "--corpus",
        p(&corpus),
        "--rst-dir",
        p(&rst),
        "--segmentation",
        "e2e",
        "--augmented",
        "--out",
        p(&model),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes_and_json_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, rst) = synth(dir.path(), 4, false);

    let out = dbap(&["train", "--out", "x", "--mode", "dbap9", "--json-errors"]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "usage");
    assert_eq!(err["error"]["code"], 2);

    let out = dbap(&[
        "parse",
        "--model",
        p(&dir.path().join("none.ckpt")),
        "--corpus",
        p(&corpus),
        "--json-errors",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "data");

    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        "[train]\nlr_head = 1e300\nlr_lm = 1e300\nmax_epochs = 3\n",
    )
    .unwrap();
    let out = dbap(&[
        "train",
        "--config",
        p(&config),
        "--corpus",
        p(&corpus),
        "--rst-dir",
        p(&rst),
        "--out",
        p(&dir.path().join("d.ckpt")),
        "--json-errors",
    ]);
    assert_eq!(
        out.status.code(),
        Some(4),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "divergence");
}

#[test]
fn training_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (corpus, rst) = synth(dir.path(), 8, false);
    let run = |name: &str| {
        let path = dir.path().join(name);
        ok(&[
            "train",
            "--corpus",
            p(&corpus),
            "--rst-dir",
            p(&rst),
            "--mode",
            "dbap6",
            "--max-epochs",
            "2",
            "--seed",
            "5",
            "--out",
            p(&path),
        ]);
        std::fs::read(path).unwrap()
    };
    assert_eq!(run("a.ckpt"), run("b.ckpt"));
}
