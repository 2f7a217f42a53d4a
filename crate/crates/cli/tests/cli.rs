use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

struct Env {
    cache: TempDir,
    work: TempDir,
}

impl Env {
    fn new() -> Self {
        Env { cache: tempfile::tempdir().unwrap(), work: tempfile::tempdir().unwrap() }
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_absakit"))
            .args(args)
            .arg("--json")
            .env("ABSAKIT_CACHE", self.cache.path())
            .env_remove("ABSAKIT_HUB_URL")
            .current_dir(self.work.path())
            .output()
            .unwrap()
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.work.path().join(rel)
    }
}

fn stdout_lines(o: &Output) -> Vec<serde_json::Value> {
    String::from_utf8_lossy(&o.stdout).lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const ASPECTS: [&str; 6] = ["food", "service", "screen", "battery", "staff", "price"];

fn asc_doc(n: usize, offset: usize) -> String {
    let mut out = String::new();
    for i in 0..n {
        let (word, pol) = if (i + offset).is_multiple_of(2) { ("good", "Positive") } else { ("bad", "Negative") };
        let aspect = ASPECTS[(i + offset) % ASPECTS.len()];
        out.push_str(&format!("the $T$ was really {word} today\n{aspect}\n{pol}\n"));
    }
    out
}

fn atesc_doc() -> String {
    let sentences: [(&str, usize, &str); 4] = [
        ("the staff was friendly", 1, "Positive"),
        ("rude staff and slow", 1, "Negative"),
        ("staff were so nice", 0, "Positive"),
        ("we liked the staff a lot", 3, "Positive"),
    ];
    let mut out = String::new();
    for (text, at, pol) in sentences {
        for (i, tok) in text.split(' ').enumerate() {
            if i == at {
                out.push_str(&format!("{tok} B-ASP {pol}\n"));
            } else {
                out.push_str(&format!("{tok} O -\n"));
            }
        }
        out.push('\n');
    }
    out
}

fn asc_dataset(env: &Env, name: &str) -> PathBuf {
    let dir = env.path(name);
    fs::create_dir_all(&dir).unwrap();
    fs::write(dir.join(format!("{name}.train.txt")), asc_doc(40, 0)).unwrap();
    fs::write(dir.join(format!("{name}.test.txt")), asc_doc(10, 1)).unwrap();
    dir
}

fn atesc_dataset(env: &Env) -> PathBuf {
    let dir = env.path("staff");
    fs::create_dir_all(&dir).unwrap();
    fs::write(dir.join("staff.train.txt"), atesc_doc()).unwrap();
    fs::write(dir.join("staff.valid.txt"), atesc_doc()).unwrap();
    dir
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn train_writes_checkpoint_and_report() {
    let env = Env::new();
    let data = asc_dataset(&env, "toy");
    let out = env.run(&["train", "--dataset", s(&data), "--report-dir", "report"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let lines = stdout_lines(&out);
    assert_eq!(lines.len(), 1);
    assert!(lines[0]["acc"].as_f64().unwrap() >= 0.9);
    let ckpt = PathBuf::from(lines[0]["checkpoint"].as_str().unwrap());
    assert!(ckpt.join("meta.json").is_file() && ckpt.join("weights.bin").is_file());
    assert!(env.path("report/summary.csv").is_file());
    assert!(env.path("report/metrics.csv").is_file());
    for kind in ["box", "violin", "scatter", "trajectory", "sk", "a12"] {
        assert!(env.path(&format!("report/{kind}.svg")).is_file(), "{kind}");
    }

    let list = env.run(&["checkpoints", "--task", "asc"]);
    assert!(list.status.success());
    let rows = stdout_lines(&list);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["task"], "ASC");
    let ate = env.run(&["checkpoints", "--task", "ate"]);
    assert!(ate.status.success());
    assert!(stdout_lines(&ate).is_empty());

    let report = env.run(&["report", "report/metrics.csv", "--out", "again", "--kinds", "box,sk"]);
    assert!(report.status.success(), "{}", stderr(&report));
    assert_eq!(stdout_lines(&report).len(), 3);
}

#[test]
fn seeds_multiply_trials() {
    let env = Env::new();
    let data = asc_dataset(&env, "toy");
    let out = env.run(&["train", "--dataset", s(&data), "--seeds", "1,2,3", "--set", "epochs=2", "--set", "checkpoint_save_mode=none"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let lines = stdout_lines(&out);
    let seeds: Vec<u64> = lines.iter().map(|l| l["seed"].as_u64().unwrap()).collect();
    assert_eq!(seeds, vec![1, 2, 3]);
    assert!(lines.iter().all(|l| l["checkpoint"].is_null()));
}

#[test]
fn bad_config_and_usage_exit_codes() {
    let env = Env::new();
    let data = asc_dataset(&env, "toy");
    let out = env.run(&["train", "--dataset", s(&data), "--set", "epochs=0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("epochs"), "{}", stderr(&out));
    let out = env.run(&["train", "--dataset", s(&data), "--model", "nonexistent"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("model_id"));
    assert_eq!(env.run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(env.run(&["train", "--dataset", s(&data), "--bogus"]).status.code(), Some(2));
    assert_eq!(env.run(&["train", "--dataset", s(&data), "--set", "noequals"]).status.code(), Some(2));
}

#[test]
fn fresh_store_has_no_checkpoints() {
    let env = Env::new();
    let out = env.run(&["checkpoints"]);
    assert!(out.status.success());
    assert!(stdout_lines(&out).is_empty());
    assert!(stderr(&out).contains("no checkpoints"));
}

#[test]
fn infer_lines_and_errors() {
    let env = Env::new();
    let data = atesc_dataset(&env);
    let train = env.run(&["train", "--task", "atesc", "--dataset", s(&data)]);
    assert!(train.status.success(), "{}", stderr(&train));
    let name = "perceptron-iob-staff-seed1";

    let out = env.run(&[
        "infer",
        "--checkpoint",
        name,
        "--text",
        "But the staff was so nice to us .",
        "--text",
        "But the staff was so horrible to us .",
        "--batch-size",
        "32",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let lines = stdout_lines(&out);
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["spans"][0]["aspect"], "staff");

    fs::write(env.path("empty.txt"), "").unwrap();
    let out = env.run(&["infer", "--checkpoint", name, "--file", "empty.txt"]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());

    fs::write(env.path("bad.txt"), "fine line\nbroken [B-ASP]open\nanother one\n").unwrap();
    let out = env.run(&["infer", "--checkpoint", name, "--file", "bad.txt"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
    let out = env.run(&["infer", "--checkpoint", name, "--file", "bad.txt", "--ignore-error"]);
    assert!(out.status.success());
    let lines: Vec<u64> = stdout_lines(&out).iter().map(|l| l["line"].as_u64().unwrap()).collect();
    assert_eq!(lines, vec![1, 3]);

    let out = env.run(&["infer", "--checkpoint", "no-such-model", "--text", "x"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn validate_augment_convert() {
    let env = Env::new();
    let data = asc_dataset(&env, "toy");
    let out = env.run(&["validate", "--dataset", s(&data)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let r = &stdout_lines(&out)[0];
    assert_eq!((r["train"].as_u64(), r["test"].as_u64()), (Some(40), Some(10)));

    let out = env.run(&["augment", "--dataset", s(&data), "--multiplier", "3"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout_lines(&out)[0]["augmented"], 120);
    let out = env.run(&["validate", "--dataset", s(&data), "--with-aug"]);
    assert_eq!(stdout_lines(&out)[0]["train"], 160);
    let out = env.run(&["validate", "--dataset", s(&data)]);
    assert_eq!(stdout_lines(&out)[0]["train"], 40);

    let train_file = data.join("toy.train.txt");
    let out = env.run(&["convert", s(&train_file), "--from", "asc", "--to", "atesc", "-o", "toy.atesc"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = env.run(&["validate", "toy.atesc", "--kind", "atesc"]);
    assert!(out.status.success());
    assert_eq!(stdout_lines(&out)[0]["spans"], 40);

    fs::write(env.path("broken.atesc"), "a O -\nb I-ASP Positive\n").unwrap();
    let out = env.run(&["validate", "broken.atesc"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout_lines(&out)[0]["diagnostics"].as_array().unwrap().len(), 1);
}
