use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ced(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ced")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, samples: usize) -> PathBuf {
    let corpus = dir.join("corpus");
    let out = ced(&["synth", "--out", s(&corpus), "--samples", &samples.to_string(), "--clip-seconds", "1", "--seed", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    corpus
}

fn extract(corpus: &Path, out: &Path, k: u16, e: u16) -> Output {
    ced(&[
        "--threads", "1", "extract", "--corpus", s(corpus), "--out", s(out),
        "--top-k", &k.to_string(), "--stored-epochs", &e.to_string(), "--seed", "7",
    ])
}

#[test]
fn extract_writes_the_expected_store_size_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), 10);
    let a = dir.path().join("a");
    let out = extract(&corpus, &a, 3, 2);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let store = a.join("store.ceds");
    assert_eq!(std::fs::metadata(&store).unwrap().len(), 24 + 20 * 16);
    assert!(a.join("manifest.json").exists());

    let b = dir.path().join("b");
    assert!(extract(&corpus, &b, 3, 2).status.success());
    assert_eq!(std::fs::read(&store).unwrap(), std::fs::read(b.join("store.ceds")).unwrap());
    assert_eq!(
        std::fs::read(a.join("manifest.json")).unwrap().len(),
        std::fs::read(b.join("manifest.json")).unwrap().len()
    );
}

#[test]
fn top_k_above_class_count_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), 2);
    let out = ced(&["extract", "--corpus", s(&corpus), "--out", s(&dir.path().join("x")), "--top-k", "30", "--classes", "24"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("top-k"));
    let out = ced(&["extract", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_with_zero_epochs_keeps_initialization_and_mismatch_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), 6);
    let ex = dir.path().join("ex");
    assert!(extract(&corpus, &ex, 5, 1).status.success());
    let store = ex.join("store.ceds");

    let run = dir.path().join("run0");
    let out = ced(&["train", "--store", s(&store), "--corpus", s(&corpus), "--out", s(&run), "--epochs", "0", "--seed", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let init = ced_core::distillation::StudentModel::new(24, 64, 5);
    assert_eq!(std::fs::read(run.join("model.bin")).unwrap(), init.to_bytes());

    let run = dir.path().join("run1");
    let out = ced(&["train", "--store", s(&store), "--corpus", s(&corpus), "--out", s(&run), "--epochs", "2"]);
    assert!(out.status.success());
    let loss = std::fs::read_to_string(run.join("loss.csv")).unwrap();
    assert!(loss.starts_with("step,lr,loss\n"));
    assert_eq!(loss.lines().count(), 1 + 2);
    assert!(run.join("summary.json").exists() && run.join("manifest.json").exists());

    let cfg = dir.path().join("other.toml");
    std::fs::write(&cfg, "max_time_mask = 50\n").unwrap();
    let out = ced(&["train", "--store", s(&store), "--corpus", s(&corpus), "--out", s(&dir.path().join("r2")), "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("hash mismatch"));
    let out = ced(&["train", "--store", s(&store), "--corpus", s(&corpus), "--out", s(&dir.path().join("r3")), "--mixup", "beta"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_writes_per_class_ap() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), 12);
    let ex = dir.path().join("ex");
    assert!(extract(&corpus, &ex, 5, 2).status.success());
    let run = dir.path().join("run");
    assert!(ced(&["train", "--store", s(&ex.join("store.ceds")), "--corpus", s(&corpus), "--out", s(&run), "--epochs", "3"]).status.success());
    let ev = dir.path().join("eval");
    let out = ced(&["eval", "--model", s(&run.join("model.bin")), "--corpus", s(&corpus), "--out", s(&ev)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("mAP"));
    let ap = std::fs::read_to_string(ev.join("ap.csv")).unwrap();
    assert_eq!(ap.lines().count(), 1 + 24);
}

#[test]
fn inspect_reports_record_cost_and_rejects_truncation() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), 4);
    let ex = dir.path().join("ex");
    assert!(extract(&corpus, &ex, 20, 2).status.success());
    let store = ex.join("store.ceds");
    let out = ced(&["inspect", "--store", s(&store)]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().any(|l| l.starts_with("bytes/record") && l.trim_end().ends_with(" 84")), "{text}");
    assert!(text.contains("naive-f32") && text.contains("dense-f16"));

    let bytes = std::fs::read(&store).unwrap();
    std::fs::write(&store, &bytes[..bytes.len() - 10]).unwrap();
    let out = ced(&["inspect", "--store", s(&store)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("corrupt store"));
}

#[test]
fn verify_passes_then_flags_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), 6);
    let ex = dir.path().join("ex");
    assert!(extract(&corpus, &ex, 5, 2).status.success());
    let store = ex.join("store.ceds");
    let out = ced(&["verify", "--store", s(&store), "--corpus", s(&corpus), "--out", s(&dir.path().join("v"))]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(!String::from_utf8_lossy(&out.stdout).contains("FAIL"));

    // flip a value byte of (sample 2, epoch 1)
    let mut bytes = std::fs::read(&store).unwrap();
    let offset = 24 + (6 + 2) * 24;
    bytes[offset] ^= 0x01;
    std::fs::write(&store, &bytes).unwrap();
    let out = ced(&["verify", "--store", s(&store), "--corpus", s(&corpus)]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    let offenders: Vec<&str> = text.lines().filter(|l| l.starts_with("offender")).collect();
    assert_eq!(offenders, vec!["offender sample 2 epoch 1 (Record)"]);
}

#[test]
fn verify_detects_a_replaced_corpus_file() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), 5);
    let ex = dir.path().join("ex");
    assert!(extract(&corpus, &ex, 5, 1).status.success());
    std::fs::copy(corpus.join("clip_00000.wav"), corpus.join("clip_00003.wav")).unwrap();
    let out = ced(&["verify", "--store", s(&ex.join("store.ceds")), "--corpus", s(&corpus)]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("offender sample 3 epoch 0 (Replay)"), "{text}");
}
