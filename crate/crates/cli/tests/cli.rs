use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use etrig_core::corpus::{build_vocab, read_corpus, read_unlabeled, check_bio};
use etrig_core::embeddings::init_embeddings;
use etrig_core::eval::{round2, score_spans};
use etrig_core::model_io::load_embeddings;

fn etrig(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_etrig"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("run etrig")
}

fn ok(args: &[&str]) -> Output {
    let out = etrig(args);
    assert!(
        out.status.success(),
        "etrig {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small synthetic corpus in a fresh directory.
fn corpus(dir: &Path, seed: &str) -> PathBuf {
    let data = dir.join(format!("data{seed}"));
    ok(&[
        "synth", "--out", s(&data), "--seed", seed, "--train", "60", "--dev", "20", "--test", "20",
        "--unlabeled", "400",
    ]);
    data
}

const SMALL: &[&str] = &["--hidden", "12", "--epochs", "3", "--patience", "0"];

fn train_dnn(data: &Path, out: &Path, extra: &[&str]) -> Output {
    let (train, dev) = (data.join("train.txt"), data.join("dev.txt"));
    let mut args = vec!["train", "--train", s(&train), "--dev", s(&dev), "--out", s(out), "--dim", "8"];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(extra);
    ok(&args)
}

#[test]
fn synth_is_deterministic_and_disjoint() {
    let dir = tempfile::tempdir().unwrap();
    let a = corpus(dir.path(), "3");
    let b = dir.path().join("again");
    ok(&[
        "synth", "--out", s(&b), "--seed", "3", "--train", "60", "--dev", "20", "--test", "20",
        "--unlabeled", "400",
    ]);
    for f in ["train.txt", "dev.txt", "test.txt", "unlabeled.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let train = read_corpus(a.join("train.txt")).unwrap();
    let dev = read_corpus(a.join("dev.txt")).unwrap();
    let test = read_corpus(a.join("test.txt")).unwrap();
    assert_eq!((train.len(), dev.len(), test.len()), (60, 20, 20));
    assert_eq!(read_unlabeled(a.join("unlabeled.txt")).unwrap().len(), 400);
    for d in &dev {
        assert!(!train.iter().any(|t| t.chars() == d.chars()));
        assert!(!test.iter().any(|t| t.chars() == d.chars()));
    }
}

#[test]
fn synth_defaults_match_standard_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    ok(&["synth", "--out", s(&out), "--unlabeled", "10"]);
    let count = |f: &str| read_corpus(out.join(f)).unwrap().len();
    assert_eq!((count("train.txt"), count("dev.txt"), count("test.txt")), (2000, 200, 200));
}

#[test]
fn pretrain_with_zero_epochs_is_the_seeded_init() {
    let dir = tempfile::tempdir().unwrap();
    let data = corpus(dir.path(), "1");
    let out = dir.path().join("emb.bin");
    ok(&[
        "pretrain", s(&data.join("unlabeled.txt")), "--out", s(&out), "--epochs", "0", "--dim", "6",
        "--seed", "9",
    ]);
    let (table, _) = load_embeddings(&out).unwrap();
    let text = read_unlabeled(data.join("unlabeled.txt")).unwrap();
    let vocab = build_vocab(text.iter().map(Vec::as_slice), 5);
    assert_eq!(table, init_embeddings(&vocab, 6, 9));
    assert!(dir.path().join("emb.bin.txt").exists());
}

#[test]
fn missing_input_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = etrig(&["pretrain", "/no/such/file.txt", "--out", s(&dir.path().join("e"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/file.txt"));
    let out = etrig(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn train_tag_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = corpus(dir.path(), "2");
    let emb = dir.path().join("emb.bin");
    ok(&["pretrain", s(&data.join("unlabeled.txt")), "--out", s(&emb), "--dim", "8", "--epochs", "1", "--min-count", "1"]);

    let random = dir.path().join("random.dnn");
    let pre = dir.path().join("pre.dnn");
    let devpred = dir.path().join("devpred.txt");
    train_dnn(&data, &random, &["--dev-predictions", s(&devpred)]);
    train_dnn(&data, &pre, &["--init-embeddings", s(&emb)]);

    for m in [&random, &pre] {
        let log = fs::read_to_string(format!("{}.log.tsv", s(m))).unwrap();
        let lines: Vec<&str> = log.lines().collect();
        assert_eq!(lines[0], "epoch\tloss\tP\tR\tF1");
        assert_eq!(lines.len(), 4);
        assert!(lines[1..].iter().all(|l| l.split('\t').count() == 5));
    }

    // With patience 0 the last epoch is returned, so its F1 must match the
    // dumped predictions.
    let log = fs::read_to_string(format!("{}.log.tsv", s(&random))).unwrap();
    let last_f1 = log.lines().last().unwrap().split('\t').nth(4).unwrap().to_string();
    let pred = read_corpus(&devpred).unwrap();
    let gold = read_corpus(data.join("dev.txt")).unwrap();
    let score = score_spans(
        &pred.iter().map(|s| s.spans()).collect::<Vec<_>>(),
        &gold.iter().map(|s| s.spans()).collect::<Vec<_>>(),
    )
    .unwrap();
    assert_eq!(round2(score.f1), last_f1);

    let tagged = dir.path().join("tagged.txt");
    let tagged2 = dir.path().join("tagged2.txt");
    let test = data.join("test.txt");
    ok(&["tag", s(&test), "--labeled-input", "--model", s(&pre), "--out", s(&tagged)]);
    ok(&["tag", s(&test), "--labeled-input", "--model", s(&pre), "--out", s(&tagged2)]);
    assert_eq!(fs::read(&tagged).unwrap(), fs::read(&tagged2).unwrap());
    let out = read_corpus(&tagged).unwrap();
    assert_eq!(out.len(), 20);
    assert!(out.iter().all(|s| check_bio(s.tags()).is_ok()));

    let report = ok(&["eval", s(&test), s(&test), "--label", "DNN"]);
    assert_eq!(String::from_utf8_lossy(&report.stdout), "DNN  R=100.00 P=100.00 F1=100.00\n");
    let report = ok(&["eval", s(&tagged), s(&test)]);
    assert!(String::from_utf8_lossy(&report.stdout).starts_with("model  R="));

    let mismatch = etrig(&["eval", s(&data.join("dev.txt")), s(&test)]);
    assert_eq!(mismatch.status.code(), Some(2));
}

#[test]
fn training_is_reproducible_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let data = corpus(dir.path(), "4");
    let a = dir.path().join("a.dnn");
    let b = dir.path().join("b.dnn");
    let c = dir.path().join("c.dnn");
    train_dnn(&data, &a, &["--seed", "5"]);
    train_dnn(&data, &b, &["--seed", "5"]);
    train_dnn(&data, &c, &["--seed", "6"]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(
        fs::read(format!("{}.log.tsv", s(&a))).unwrap(),
        fs::read(format!("{}.log.tsv", s(&b))).unwrap()
    );
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());

    let emb = dir.path().join("e.bin");
    let emb2 = dir.path().join("e2.bin");
    for p in [&emb, &emb2] {
        ok(&["pretrain", s(&data.join("unlabeled.txt")), "--out", s(p), "--dim", "4", "--epochs", "1"]);
    }
    assert_eq!(fs::read(&emb).unwrap(), fs::read(&emb2).unwrap());
}

#[test]
fn maxent_trains_and_tags() {
    let dir = tempfile::tempdir().unwrap();
    let data = corpus(dir.path(), "5");
    let model = dir.path().join("m.maxent");
    ok(&[
        "train", "--kind", "maxent", "--train", s(&data.join("train.txt")), "--dev",
        s(&data.join("dev.txt")), "--out", s(&model), "--epochs", "4",
    ]);
    let log = fs::read_to_string(format!("{}.log.tsv", s(&model))).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("0\t") && lines[5].starts_with("4\t"));
    assert_eq!(lines[5].split('\t').count(), 5);
    let tagged = dir.path().join("t.txt");
    let table = dir.path().join("table.txt");
    fs::write(&table, "0 -inf 0\n-inf 0 0\n0 0 0\n0 -inf 0\n").unwrap();
    let forced = dir.path().join("forced.maxent");
    ok(&[
        "train", "--kind", "maxent", "--train", s(&data.join("train.txt")), "--dev",
        s(&data.join("dev.txt")), "--out", s(&forced), "--epochs", "1", "--transitions", s(&table),
    ]);
    let (tm, _) = etrig_core::model_io::load_transitions(format!("{}.trans", s(&forced))).unwrap();
    assert_eq!(tm.trans[0][0], f64::NEG_INFINITY);
    let raw = dir.path().join("raw.txt");
    let text: String = read_corpus(data.join("test.txt"))
        .unwrap()
        .iter()
        .map(|s| s.text() + "\n")
        .collect();
    fs::write(&raw, text).unwrap();
    ok(&["tag", s(&raw), "--model", s(&model), "--out", s(&tagged)]);
    assert_eq!(read_corpus(&tagged).unwrap().len(), 20);
    ok(&["tag", s(&raw), "--model", s(&model), "--transitions", s(&table), "--out", s(&tagged)]);
    let out = read_corpus(&tagged).unwrap();
    assert!(out.iter().all(|s| s.tags().windows(2).all(|w| w != [etrig_core::Tag::B, etrig_core::Tag::B])));
}

#[test]
fn embedding_dimension_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = corpus(dir.path(), "6");
    let emb = dir.path().join("e.bin");
    ok(&["pretrain", s(&data.join("unlabeled.txt")), "--out", s(&emb), "--dim", "4", "--epochs", "0"]);
    let out = etrig(&[
        "train", "--train", s(&data.join("train.txt")), "--dev", s(&data.join("dev.txt")),
        "--out", s(&dir.path().join("m")), "--init-embeddings", s(&emb), "--dim", "8",
    ]);
    assert_eq!(out.status.code(), Some(2));

    // Wrong archive kind for tagging.
    let out = etrig(&["tag", s(&data.join("unlabeled.txt")), "--model", s(&emb), "--out", s(&dir.path().join("t"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("wrong model kind"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = corpus(dir.path(), "7");
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# small run\nepochs = 1\nhidden = 5\npatience = 0\ndim = 4\n").unwrap();
    let model = dir.path().join("m.dnn");
    ok(&[
        "train", "--config", s(&cfg), "--train", s(&data.join("train.txt")), "--dev",
        s(&data.join("dev.txt")), "--out", s(&model), "--epochs", "2",
    ]);
    let log = fs::read_to_string(format!("{}.log.tsv", s(&model))).unwrap();
    assert_eq!(log.lines().count(), 3);
    let (m, kv) = etrig_core::model_io::load_dnn(&model).unwrap();
    assert_eq!(m.hidden_sizes(), vec![5]);
    assert_eq!(kv.get("epochs"), Some("2"));
}

#[test]
fn sweep_emits_one_row_per_dim() {
    let dir = tempfile::tempdir().unwrap();
    let data = corpus(dir.path(), "8");
    let run = |out: &Path| {
        ok(&[
            "sweep", "--train", s(&data.join("train.txt")), "--dev", s(&data.join("dev.txt")),
            "--unlabeled", s(&data.join("unlabeled.txt")), "--dims", "2,6", "--hidden", "8",
            "--epochs", "2", "--out", s(out),
        ]);
        fs::read_to_string(out).unwrap()
    };
    let a = run(&dir.path().join("a.tsv"));
    let b = run(&dir.path().join("b.tsv"));
    assert_eq!(a, b);
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "dim\tP\tR\tF1");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("2\t") && lines[2].starts_with("6\t"));
}
