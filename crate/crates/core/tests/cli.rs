use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use diqa::imgproc::write_pgm;
use diqa::synth::{random_page, LabelFnConfig, LineSynthesizer, PageLayout, SynthConfig};
use diqa::GrayImage;

fn diqa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diqa"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json_lines(out: &[u8]) -> Vec<serde_json::Value> {
    String::from_utf8_lossy(out)
        .lines()
        .map(|l| serde_json::from_str(l).expect("stdout is JSON lines"))
        .collect()
}

fn page(path: &Path, sigma: f64, seed: u64) {
    let synth = LineSynthesizer::new(SynthConfig::default(), LabelFnConfig::default()).unwrap();
    let layout = PageLayout {
        width: 900,
        height: 1200,
        ..PageLayout::default()
    };
    write_pgm(path, &random_page(&synth, &layout, sigma, seed).unwrap().image).unwrap();
}

#[test]
fn synth_is_deterministic_and_rejects_empty_sets() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let o = diqa(&["synth", "--n", "6", "--out", s(d), "--seed", "3", "--scaling-group", "G3"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(json_lines(&o.stdout)[0]["count"], 6);
    }
    let ma = fs::read_to_string(a.join("manifest.jsonl")).unwrap();
    let mb = fs::read_to_string(b.join("manifest.jsonl")).unwrap();
    assert_eq!(ma.replace(s(&a), ""), mb.replace(s(&b), ""));

    let empty = dir.path().join("empty");
    assert_eq!(diqa(&["synth", "--n", "0", "--out", s(&empty)]).status.code(), Some(1));
    assert!(!empty.exists());
    let bad = diqa(&["synth", "--n", "2", "--out", s(&empty), "--set", "synth.sigma_range=[3,1]"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(!empty.exists());
}

#[test]
fn train_reports_recipe_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert!(diqa(&["synth", "--n", "8", "--out", s(&data), "--seed", "1"]).status.success());
    let mut ckpts = Vec::new();
    for name in ["m1.bin", "m2.bin"] {
        let out = dir.path().join(name);
        let o = diqa(&[
            "train", "--manifest", s(&data), "--out", s(&out), "--epochs", "1", "--seed", "1",
            "--set", "train.val_fraction=0.25",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let v = &json_lines(&o.stdout)[0];
        assert_eq!(v["learning_rate"], 5e-3);
        assert_eq!(v["weight_decay"], 1e-4);
        let log = fs::read_to_string(dir.path().join(format!("{name}.log.jsonl"))).unwrap();
        let first: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
        assert_eq!(first["lr"], 5e-3);
        ckpts.push(fs::read(&out).unwrap());
    }
    assert_eq!(ckpts[0], ckpts[1]);

    let missing = diqa(&["train", "--manifest", s(&dir.path().join("nope")), "--out", s(&dir.path().join("x"))]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn assess_blank_page_follows_no_text_policy() {
    let dir = tempfile::tempdir().unwrap();
    let blank = dir.path().join("blank.pgm");
    write_pgm(&blank, &GrayImage::new(600, 800, 255)).unwrap();

    let o = diqa(&["assess", s(&blank)]);
    assert_eq!(o.status.code(), Some(0));
    let v = &json_lines(&o.stdout)[0];
    assert_eq!(v["status"], "no_text");
    assert_eq!(v["overall"], 0.0);

    let o = diqa(&["assess", s(&blank), "--no-text-policy", "fail"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json_lines(&o.stdout)[0]["overall"], serde_json::Value::Null);
}

#[test]
fn assess_scores_pages_without_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let sharp = dir.path().join("a_sharp.pgm");
    let blurry = dir.path().join("b_blurry.pgm");
    page(&sharp, 0.8, 5);
    page(&blurry, 3.8, 5);

    let report = dir.path().join("report.jsonl");
    let o = diqa(&["assess", s(dir.path()), "--out", s(&report), "--jobs", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = json_lines(&fs::read(&report).unwrap());
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert_eq!(r["status"], "ok");
        assert_eq!(r["predictor"], "analytic");
        assert_eq!(r["detection"], "divided 4x6");
        assert!(r["overall_wp"].is_f64() && r["overall_median"].is_f64());
    }
    let (q_sharp, q_blurry) = (rows[0]["overall"].as_f64().unwrap(), rows[1]["overall"].as_f64().unwrap());
    assert!(q_sharp > q_blurry + 0.2, "{q_sharp} vs {q_blurry}");

    let whole = diqa(&["assess", s(&sharp), "--no-divide", "--strategy", "median"]);
    let v = &json_lines(&whole.stdout)[0];
    assert_eq!(v["detection"], "whole");
    assert_eq!(v["overall"], v["overall_median"]);

    let bad_ckpt = dir.path().join("junk.bin");
    fs::write(&bad_ckpt, b"not a model").unwrap();
    assert_eq!(diqa(&["assess", s(&sharp), "--predictor", s(&bad_ckpt)]).status.code(), Some(2));
    assert_eq!(diqa(&["assess", s(&sharp), "--grid", "0x2"]).status.code(), Some(1));
}

#[test]
fn eval_and_detect_debug() {
    let dir = tempfile::tempdir().unwrap();
    let pred = dir.path().join("pred.csv");
    let gt = dir.path().join("gt.csv");
    fs::write(&pred, "id,score\na,0.1\nb,0.5\nc,0.9\n").unwrap();
    fs::write(&gt, "id,engine,accuracy\na,x,0.2\na,y,0.4\nb,x,0.5\nb,y,0.5\nc,x,0.8\nc,y,1.0\n").unwrap();
    let o = diqa(&["eval", "--pred", s(&pred), "--gt", s(&gt)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = &json_lines(&o.stdout)[0];
    assert_eq!(v["n"], 3);
    assert!((v["srocc"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(diqa(&["eval", "--pred", s(&pred), "--gt", s(&dir.path().join("no.csv"))]).status.code(), Some(2));

    let img = dir.path().join("page.pgm");
    let overlay = dir.path().join("overlay.pgm");
    page(&img, 1.0, 9);
    let o = diqa(&["detect-debug", s(&img), "--no-divide", "--overlay", s(&overlay)]);
    assert!(o.status.success());
    let boxes = json_lines(&o.stdout);
    assert!(!boxes.is_empty());
    assert!(boxes.iter().all(|b| b["w"].as_u64().unwrap() > 0));
    assert!(overlay.exists());
}
