use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn stfp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stfp"))
        .current_dir(dir)
        .arg("--quiet")
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = stfp(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn tiny_corpus(dir: &Path) {
    let text = std::fs::read_to_string(data("memorize100.smi")).unwrap();
    let mut lines: Vec<&str> = text.lines().take(30).collect();
    lines.extend(["C1CC", "not a smiles", "C(("]);
    std::fs::write(dir.join("corpus.smi"), lines.join("\n")).unwrap();
}

const SMALL: &[&str] = &["--d-model", "16", "--layers", "1", "--heads", "2", "--batch-size", "8", "--epochs", "2"];

fn pretrain(dir: &Path, out: &str) {
    let mut args = vec!["pretrain", "--corpus", "corpus.smi", "--out", out];
    args.extend_from_slice(SMALL);
    ok(dir, &args);
}

fn small_dataset(dir: &Path) {
    let text = std::fs::read_to_string(data("esol.csv")).unwrap();
    let lines: Vec<&str> = text.lines().take(121).collect();
    std::fs::write(dir.join("small.csv"), lines.join("\n")).unwrap();
}

const TASK: &[&str] = &["--tasks", "measured log solubility in mols per litre"];

#[test]
fn pretraining_is_reproducible_and_reports_skips() {
    let dir = tempfile::tempdir().unwrap();
    tiny_corpus(dir.path());
    pretrain(dir.path(), "a.json");
    pretrain(dir.path(), "b.json");
    let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("a.bin"), read("b.bin"));
    let stats = String::from_utf8(read("a.stats.csv")).unwrap();
    let rows: Vec<&str> = stats.lines().collect();
    assert_eq!(rows[0], "epoch,step,mean_loss,perplexity,skipped");
    assert_eq!(rows.len(), 3);
    assert!(rows[1..].iter().all(|r| r.ends_with(",3")));
}

#[test]
fn embed_writes_one_row_per_line() {
    let dir = tempfile::tempdir().unwrap();
    tiny_corpus(dir.path());
    pretrain(dir.path(), "m.json");
    ok(dir.path(), &["embed", "--checkpoint", "m.json", "--input", "corpus.smi", "--output", "st.csv"]);
    let mut rd = csv::ReaderBuilder::new().flexible(true).from_path(dir.path().join("st.csv")).unwrap();
    assert_eq!(rd.headers().unwrap().len(), 1 + 64);
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 33);
    assert_eq!(rows.iter().filter(|r| r.len() == 2 && r[1].starts_with("error:")).count(), 1);

    ok(dir.path(), &["embed", "--input", "corpus.smi", "--kind", "ecfp", "--ecfp-bits", "512", "--output", "e.csv"]);
    let mut rd = csv::Reader::from_path(dir.path().join("e.csv")).unwrap();
    let first = rd.records().next().unwrap().unwrap();
    assert_eq!(first[1].len(), 128);

    ok(dir.path(), &["embed", "--input", "corpus.smi", "--kind", "random", "--random-dims", "32", "--output", "r.csv"]);
    let mut rd = csv::ReaderBuilder::new().flexible(true).from_path(dir.path().join("r.csv")).unwrap();
    assert_eq!(rd.headers().unwrap().len(), 33);
}

#[test]
fn bench_strata_and_project_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    tiny_corpus(dir.path());
    small_dataset(dir.path());
    pretrain(dir.path(), "m.json");
    let mut args = vec![
        "bench", "--checkpoint", "m.json", "--dataset", "small.csv", "--out-dir", "out", "--fingerprints",
        "st,ecfp,random", "--trials", "1", "--ladder", "0.2,0.5",
    ];
    args.extend_from_slice(TASK);
    ok(dir.path(), &args);
    let records = std::fs::read_to_string(dir.path().join("out/records.csv")).unwrap();
    assert_eq!(records.lines().count(), 1 + 3 * 2);
    let summary = std::fs::read_to_string(dir.path().join("out/summary.csv")).unwrap();
    assert!(summary.contains("small,st+linear,"), "{summary}");
    assert_eq!(std::fs::read_to_string(dir.path().join("out/plot.csv")).unwrap().lines().count(), 7);

    let mut args = vec![
        "strata", "--dataset", "small.csv", "--output", "strata.csv", "--fingerprints", "ecfp", "--trials", "2",
        "--groups", "3",
    ];
    args.extend_from_slice(TASK);
    ok(dir.path(), &args);
    let strata = std::fs::read_to_string(dir.path().join("strata.csv")).unwrap();
    assert_eq!(strata.lines().count(), 4);

    let mut args = vec!["project", "--checkpoint", "m.json", "--dataset", "small.csv", "--output", "pca.csv", "--k", "3"];
    args.extend_from_slice(TASK);
    ok(dir.path(), &args);
    let mut rd = csv::Reader::from_path(dir.path().join("pca.csv")).unwrap();
    assert_eq!(
        rd.headers().unwrap().iter().collect::<Vec<_>>(),
        ["smiles", "measured log solubility in mols per litre", "pc1", "pc2", "pc3"]
    );
    assert_eq!(rd.records().count(), 120);
}

#[test]
fn config_files_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    small_dataset(dir.path());
    std::fs::write(
        dir.path().join("run.cfg"),
        "fingerprints = random # control only\ntrials = 1\nladder = 0.5\nrandom_dims = 8\n",
    )
    .unwrap();
    let mut args = vec!["--config", "run.cfg", "bench", "--dataset", "small.csv", "--out-dir", "o"];
    args.extend_from_slice(TASK);
    ok(dir.path(), &args);
    assert_eq!(std::fs::read_to_string(dir.path().join("o/records.csv")).unwrap().lines().count(), 2);

    std::fs::write(dir.path().join("bad.cfg"), "trails = 3\n").unwrap();
    let out = stfp(dir.path(), &["--config", "bad.cfg", "bench", "--dataset", "small.csv", "--out-dir", "o"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown configuration key"));

    let out = stfp(dir.path(), &["embed", "--input", "small.csv", "--output", "x.csv"]);
    assert!(!out.status.success(), "st without a checkpoint must fail");
}

#[test]
fn help_lists_every_key() {
    let out = Command::new(env!("CARGO_BIN_EXE_stfp")).arg("--help").output().unwrap();
    let help = String::from_utf8(out.stdout).unwrap();
    for key in [
        "seed", "jobs", "layers", "heads", "d-model", "max-seq-len", "dropout", "epochs", "batch-size", "lr",
        "enumerate", "max-steps", "corpus-limit", "embed-batch", "fingerprints", "predictor", "lambda", "ladder",
        "trials", "task-type", "metric", "tasks", "smiles-column", "ecfp-bits", "ecfp-diameter", "random-dims",
        "standardize", "groups", "strata-fraction", "k",
    ] {
        assert!(help.contains(&format!("--{key} ")), "--{key} missing from help");
    }
}
