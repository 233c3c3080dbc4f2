use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use superchars::dataset::{write_corpus, Record, Task};
use superchars::export::{decode_gray_png, read_manifest, read_tensor};
use superchars::glyph::INK;
use superchars::layout::{render, IMAGE_SIDE};
use superchars::matrix::read_predictions;
use superchars::synthetic::{figure_examples, planted_corpus};

fn superchars(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_superchars"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn corpus_file(dir: &Path, name: &str, records: &[Record]) -> PathBuf {
    let path = dir.join(name);
    write_corpus(&path, records).unwrap();
    path
}

fn words(n: usize) -> String {
    vec!["word"; n].join(" ")
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    assert_eq!(code(&superchars(&["--help"])), 0);
    assert_eq!(code(&superchars(&["--version"])), 0);
    assert_eq!(code(&superchars(&[])), 1);
    assert_eq!(code(&superchars(&["render", "x.csv", "--design", "five"])), 1);
    assert_eq!(code(&superchars(&["train", "x.csv", "--tasks", "Nope"])), 1);
}

#[test]
fn missing_or_empty_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&superchars(&["stats", s(&dir.path().join("absent.csv"))])), 2);
    let empty = corpus_file(dir.path(), "empty.csv", &[]);
    let out = superchars(&["stats", s(&empty)]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn stats_prints_one_bar_per_length() {
    let dir = tempfile::tempdir().unwrap();
    let recs: Vec<Record> = [3, 5, 8].iter().map(|&n| Record::from_text(format!("r{n}"), words(n))).collect();
    let csv = corpus_file(dir.path(), "three.csv", &recs);
    let out_dir = dir.path().join("stats");
    let out = superchars(&["stats", s(&csv), "--out", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let kv = std::fs::read_to_string(out_dir.join("stats.txt")).unwrap();
    let bars: Vec<&str> = kv.lines().filter(|l| l.starts_with("histogram.")).collect();
    assert_eq!(bars, ["histogram.3=1", "histogram.5=1", "histogram.8=1"]);
    assert!(kv.contains("row_count=3"));
    let (w, h, _) = decode_gray_png(&std::fs::read(out_dir.join("histogram.png")).unwrap()).unwrap();
    assert_eq!((w, h), (18, 200));
}

#[test]
fn render_matches_golden_and_embeds_attributes() {
    let dir = tempfile::tempdir().unwrap();
    let [(_, one), (two_scheme, two), _] = figure_examples();
    let csv = corpus_file(dir.path(), "fig.csv", &[one]);
    let out_dir = dir.path().join("r1");
    assert_eq!(code(&superchars(&["render", s(&csv), "--design", "one", "--out", s(&out_dir)])), 0);
    let (_, _, got) = decode_gray_png(&std::fs::read(out_dir.join("png/000000.png")).unwrap()).unwrap();
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden/option_one.png");
    let (_, _, want) = decode_gray_png(&std::fs::read(golden).unwrap()).unwrap();
    assert_eq!(got, want);

    let csv = corpus_file(dir.path(), "fig2.csv", std::slice::from_ref(&two));
    let out_dir = dir.path().join("r2");
    assert_eq!(code(&superchars(&["render", s(&csv), "--design", "two", "--out", s(&out_dir)])), 0);
    let tensor = read_tensor(&out_dir.join("images.schr")).unwrap();
    assert_eq!(tensor.len(), 1);
    assert_eq!(tensor[0].pixels, render(&two, &two_scheme.layout(), 0).pixels);
    // each of the three attribute rows carries ink
    for row in 5..8 {
        let band = &tensor[0].pixels[row * 28 * IMAGE_SIDE..(row + 1) * 28 * IMAGE_SIDE];
        assert!(band.contains(&INK), "attribute row {row} is empty");
    }
}

#[test]
fn augment_counts_follow_sentence_length() {
    let dir = tempfile::tempdir().unwrap();
    let lengths = [40usize, 42, 7, 55];
    let recs: Vec<Record> = lengths.iter().map(|&n| Record::from_text(format!("r{n}"), words(n))).collect();
    for (rec, want) in recs.iter().zip([3usize, 1]) {
        let csv = corpus_file(dir.path(), "single.csv", std::slice::from_ref(rec));
        let out_dir = dir.path().join(format!("a{want}"));
        assert_eq!(code(&superchars(&["augment", s(&csv), "--out", s(&out_dir)])), 0);
        assert_eq!(read_manifest(&out_dir.join("manifest.csv")).unwrap().len(), want);
    }
    let csv = corpus_file(dir.path(), "mixed.csv", &recs);
    let out_dir = dir.path().join("mixed");
    assert_eq!(code(&superchars(&["augment", s(&csv), "--out", s(&out_dir)])), 0);
    let expected: usize = lengths.iter().map(|&l| 43 - l.min(42)).sum();
    let manifest = read_manifest(&out_dir.join("manifest.csv")).unwrap();
    assert_eq!(manifest.len(), expected);
    assert_eq!(read_tensor(&out_dir.join("images.schr")).unwrap().len(), expected);
    assert_eq!(std::fs::read_dir(out_dir.join("png")).unwrap().count(), expected);
    assert!(manifest.iter().all(|m| m.design == "four"));
}

#[test]
fn folds_are_written_and_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let recs: Vec<Record> = (0..23).map(|i| Record::from_text(i.to_string(), "x")).collect();
    let csv = corpus_file(dir.path(), "c.csv", &recs);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        assert_eq!(code(&superchars(&["folds", s(&csv), "--k", "5", "--seed", "9", "--out", s(p)])), 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    // more folds than records is a bad --k, not bad data
    assert_eq!(code(&superchars(&["folds", s(&csv), "--k", "50", "--out", s(&a)])), 1);
}

fn train_args<'a>(csv: &'a str, out: &'a str) -> Vec<&'a str> {
    vec![
        "train", csv, "--design", "one", "--k", "2", "--only-folds", "0", "--tasks", "Support",
        "--desk-scale", "--arch", "compact", "--epochs", "2", "--seed", "3", "--jobs", "2", "--out", out,
    ]
}

#[test]
fn train_predict_quantize_eval() {
    let dir = tempfile::tempdir().unwrap();
    let labeled = planted_corpus(24, Task::Support, 1);
    let csv = corpus_file(dir.path(), "train.csv", &labeled);
    let runs = dir.path().join("runs");
    let out = superchars(&train_args(s(&csv), s(&runs)));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("config:"));
    let model = runs.join("models/Support_fold0.scnn");
    assert!(model.exists());

    // same seed, same bytes
    let again = dir.path().join("again");
    assert_eq!(code(&superchars(&train_args(s(&csv), s(&again)))), 0);
    for f in ["models/Support_fold0.scnn", "predictions/Support_fold0.csv", "manifests/Support_fold0.csv"] {
        assert_eq!(std::fs::read(runs.join(f)).unwrap(), std::fs::read(again.join(f)).unwrap(), "{f}");
    }

    let unlabeled: Vec<Record> = labeled
        .iter()
        .take(7)
        .map(|r| Record { task_labels: None, ..r.clone() })
        .collect();
    let test_csv = corpus_file(dir.path(), "test.csv", &unlabeled);
    let preds = dir.path().join("p.csv");
    assert_eq!(code(&superchars(&["predict", s(&test_csv), "--model", s(&model), "--out", s(&preds)])), 0);
    let rows = read_predictions(&preds).unwrap();
    assert_eq!(rows.len(), 7);
    assert!(rows.iter().all(|p| p.task == Task::Support && p.fold == 0));

    let fixed = dir.path().join("m.scfx");
    assert_eq!(code(&superchars(&["quantize", s(&model), "--bits", "8", "--out", s(&fixed)])), 0);
    let qpreds = dir.path().join("q.csv");
    let out = superchars(&[
        "predict", s(&test_csv), "--model", s(&fixed), "--task", "Support", "--fold", "0", "--out", s(&qpreds),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read_predictions(&qpreds).unwrap().len(), 7);
    let out = superchars(&["predict", s(&test_csv), "--model", s(&fixed), "--out", s(&qpreds)]);
    assert_eq!(code(&out), 1, "task and fold cannot be inferred from m.scfx");

    // fold 1 was never trained, so its row is n/a
    let report = dir.path().join("report");
    let out = superchars(&["eval", s(&csv), "--runs", s(&runs), "--out", s(&report)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("Design Option One fold0"));
    let csv_report = std::fs::read_to_string(report.join("report.csv")).unwrap();
    assert!(csv_report.starts_with("task,design,fold,acc,prec,rec,f1\n"));
    assert!(csv_report.lines().any(|l| l.starts_with("Support,one,0,") && !l.contains("n/a")));
}

#[test]
fn eval_marks_missing_folds() {
    let dir = tempfile::tempdir().unwrap();
    let labeled = planted_corpus(12, Task::Support, 4);
    let csv = corpus_file(dir.path(), "train.csv", &labeled);
    let runs = dir.path().join("runs");
    assert_eq!(code(&superchars(&train_args(s(&csv), s(&runs)))), 0);
    std::fs::remove_file(runs.join("predictions/Support_fold0.csv")).unwrap();
    let out = superchars(&["eval", s(&csv), "--runs", s(&runs)]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).lines().any(|l| l.starts_with("Design Option One fold0") && l.contains("n/a")));
}
