use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use staff_core::toy::{checkpoint, save_samples, Geometry, SyntheticTask, ToyModel};

fn staff() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_staff"));
    cmd.env_remove("STAFF_SEED");
    cmd
}

fn run(dir: &Path, args: &[&str]) -> Output {
    staff().current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    run(dir, args).status.code().unwrap()
}

fn write_scores(path: &Path, scores: &[(String, f64)]) {
    let mut text = String::new();
    for (id, s) in scores {
        text.push_str(&format!("{{\"id\":\"{id}\",\"score\":{s}}}\n"));
    }
    fs::write(path, text).unwrap();
}

fn random_scores(n: usize, seed: u64) -> Vec<(String, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| (format!("x{i:05}"), rng.random_range(0.0..5.0f64).powi(2)))
        .collect()
}

fn lines(path: &Path) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    assert!(text.is_empty() || text.ends_with('\n'));
    text.lines().map(str::to_string).collect()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new(n: usize) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let spec = random_scores(n, 1);
        let target: Vec<_> = spec
            .iter()
            .map(|(id, s)| (id.clone(), s * 1.7 + 0.1))
            .collect();
        write_scores(&dir.path().join("spec.jsonl"), &spec);
        write_scores(&dir.path().join("target.jsonl"), &target);
        write_scores(&dir.path().join("same.jsonl"), &spec);
        Self { dir }
    }

    fn path(&self) -> &Path {
        self.dir.path()
    }

    fn file(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

#[test]
fn plan_matches_ids_queried_by_select() {
    let f = Fixture::new(500);
    ok(
        f.path(),
        &[
            "plan",
            "--spec-scores",
            "spec.jsonl",
            "--regions",
            "20",
            "--verify-budget",
            "7",
            "--prune-rate",
            "0.8",
            "--seed",
            "11",
            "--out",
            "plan.jsonl",
        ],
    );
    ok(
        f.path(),
        &[
            "select",
            "--spec-scores",
            "spec.jsonl",
            "--target-scores",
            "target.jsonl",
            "--regions",
            "20",
            "--verify-budget",
            "7",
            "--prune-rate",
            "0.8",
            "--seed",
            "11",
            "--out",
            "c.txt",
            "--audit",
            "a.json",
        ],
    );
    let plan: Vec<(u64, String)> = lines(&f.file("plan.jsonl"))
        .iter()
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            (
                v["region"].as_u64().unwrap(),
                v["id"].as_str().unwrap().to_string(),
            )
        })
        .collect();
    let audit = json(&f.file("a.json"));
    let mut verified = Vec::new();
    for rec in audit["records"].as_array().unwrap() {
        for id in rec["verified_ids"].as_array().unwrap() {
            verified.push((
                rec["region"].as_u64().unwrap(),
                id.as_str().unwrap().to_string(),
            ));
        }
    }
    assert_eq!(plan, verified);
    assert_eq!(
        audit["target_queries"].as_u64().unwrap() as usize,
        plan.len()
    );

    // Only the planned ids need target scores.
    let target: Vec<(String, f64)> = plan.iter().map(|(_, id)| (id.clone(), 1.0)).collect();
    write_scores(&f.file("planned.jsonl"), &target);
    ok(
        f.path(),
        &[
            "select",
            "--spec-scores",
            "spec.jsonl",
            "--target-scores",
            "planned.jsonl",
            "--regions",
            "20",
            "--verify-budget",
            "7",
            "--prune-rate",
            "0.8",
            "--seed",
            "11",
            "--out",
            "c2.txt",
            "--audit",
            "a2.json",
        ],
    );
}

#[test]
fn plan_single_region_and_reruns() {
    let f = Fixture::new(40);
    ok(
        f.path(),
        &[
            "plan",
            "--spec-scores",
            "spec.jsonl",
            "--regions",
            "1",
            "--verify-budget",
            "10",
            "--out",
            "p1.jsonl",
        ],
    );
    ok(
        f.path(),
        &[
            "plan",
            "--spec-scores",
            "spec.jsonl",
            "--regions",
            "1",
            "--verify-budget",
            "10",
            "--out",
            "p2.jsonl",
        ],
    );
    let p = lines(&f.file("p1.jsonl"));
    assert_eq!(p.len(), 10);
    assert_eq!(
        fs::read(f.file("p1.jsonl")).unwrap(),
        fs::read(f.file("p2.jsonl")).unwrap()
    );
    let ids: HashSet<String> = random_scores(40, 1).into_iter().map(|(id, _)| id).collect();
    for l in p {
        let v: serde_json::Value = serde_json::from_str(&l).unwrap();
        assert_eq!(v["region"], 0);
        assert!(ids.contains(v["id"].as_str().unwrap()));
    }
}

#[test]
fn staff_with_identical_scores_matches_ccs() {
    let f = Fixture::new(300);
    ok(
        f.path(),
        &[
            "select",
            "--spec-scores",
            "spec.jsonl",
            "--target-scores",
            "same.jsonl",
            "--mode",
            "staff",
            "--prune-rate",
            "0.7",
            "--seed",
            "5",
            "--out",
            "s.txt",
            "--audit",
            "s.json",
        ],
    );
    ok(
        f.path(),
        &[
            "select",
            "--spec-scores",
            "spec.jsonl",
            "--mode",
            "ccs",
            "--prune-rate",
            "0.7",
            "--seed",
            "5",
            "--out",
            "c.txt",
            "--audit",
            "c.json",
        ],
    );
    assert_eq!(
        fs::read(f.file("s.txt")).unwrap(),
        fs::read(f.file("c.txt")).unwrap()
    );
}

#[test]
fn budget_and_order_in_output() {
    let f = Fixture::new(1000);
    ok(
        f.path(),
        &[
            "select",
            "--spec-scores",
            "spec.jsonl",
            "--target-scores",
            "target.jsonl",
            "--prune-rate",
            "0.9",
            "--seed",
            "2",
            "--out",
            "c.txt",
            "--audit",
            "a.json",
        ],
    );
    let ids = lines(&f.file("c.txt"));
    assert_eq!(ids.len(), 100);
    assert_eq!(ids.iter().collect::<HashSet<_>>().len(), 100);
    let audit = json(&f.file("a.json"));
    let sizes: Vec<u64> = audit["records"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["size"].as_u64().unwrap())
        .collect();
    assert!(sizes.windows(2).all(|w| w[0] <= w[1]));
    assert!(fs::read_to_string(f.file("a.json"))
        .unwrap()
        .ends_with("}\n"));

    ok(
        f.path(),
        &[
            "select",
            "--spec-scores",
            "spec.jsonl",
            "--mode",
            "random",
            "--prune-rate",
            "0.9",
            "--no-topup",
            "--out",
            "r.txt",
            "--audit",
            "r.json",
        ],
    );
    assert_eq!(lines(&f.file("r.txt")).len(), 100);
}

#[test]
fn every_mode_runs() {
    let f = Fixture::new(200);
    for mode in [
        "staff",
        "random",
        "topk",
        "ccs",
        "staff-no-verify",
        "staff-no-small",
    ] {
        ok(
            f.path(),
            &[
                "select",
                "--spec-scores",
                "spec.jsonl",
                "--target-scores",
                "target.jsonl",
                "--mode",
                mode,
                "--prune-rate",
                "0.5",
                "--out",
                "c.txt",
                "--audit",
                "a.json",
            ],
        );
        assert_eq!(lines(&f.file("c.txt")).len(), 100, "{mode}");
    }
}

#[test]
fn seed_from_environment() {
    let f = Fixture::new(200);
    let select = |seed_flag: Option<&str>, env: Option<&str>, out: &str| {
        let mut cmd = staff();
        cmd.current_dir(f.path()).args([
            "select",
            "--spec-scores",
            "spec.jsonl",
            "--mode",
            "random",
            "--out",
            out,
            "--audit",
            "a.json",
        ]);
        if let Some(s) = seed_flag {
            cmd.args(["--seed", s]);
        }
        if let Some(e) = env {
            cmd.env("STAFF_SEED", e);
        }
        assert!(cmd.status().unwrap().success());
        fs::read(f.file(out)).unwrap()
    };
    let flag = select(Some("42"), None, "a.txt");
    assert_eq!(select(None, Some("42"), "b.txt"), flag);
    assert_eq!(select(Some("42"), Some("7"), "c.txt"), flag);
    assert_ne!(select(None, None, "d.txt"), flag);
}

#[test]
fn exit_codes() {
    let f = Fixture::new(100);
    let base = ["--prune-rate", "0.5", "--out", "c.txt", "--audit", "a.json"];
    let with = |extra: &[&str]| -> Vec<String> {
        ["select"]
            .iter()
            .chain(extra)
            .chain(base.iter())
            .map(|s| s.to_string())
            .collect()
    };
    let c = |args: Vec<String>| {
        code(
            f.path(),
            &args.iter().map(String::as_str).collect::<Vec<_>>(),
        )
    };

    assert_eq!(
        c(with(&["--spec-scores", "absent.jsonl", "--mode", "random"])),
        2
    );
    assert_eq!(
        c(with(&["--spec-scores", "spec.jsonl"])),
        3,
        "staff without target scores"
    );
    assert_eq!(
        c(with(&["--spec-scores", "spec.jsonl", "--mode", "nonsense"])),
        3
    );
    assert_eq!(
        c(with(&[
            "--spec-scores",
            "spec.jsonl",
            "--regions",
            "0",
            "--mode",
            "random"
        ])),
        3
    );
    assert_eq!(
        code(
            f.path(),
            &[
                "select",
                "--spec-scores",
                "spec.jsonl",
                "--mode",
                "random",
                "--prune-rate",
                "1.0",
                "--out",
                "c.txt",
                "--audit",
                "a.json"
            ]
        ),
        3
    );

    fs::write(
        f.file("dup.jsonl"),
        "{\"id\":\"a\",\"score\":1}\n{\"id\":\"a\",\"score\":2}\n",
    )
    .unwrap();
    fs::write(f.file("nan.jsonl"), "{\"id\":\"a\",\"score\":NaN}\n").unwrap();
    fs::write(f.file("neg.jsonl"), "{\"id\":\"a\",\"score\":-1}\n").unwrap();
    for bad in ["dup.jsonl", "nan.jsonl", "neg.jsonl"] {
        assert_eq!(
            c(with(&["--spec-scores", bad, "--mode", "random"])),
            3,
            "{bad}"
        );
    }

    write_scores(&f.file("partial.jsonl"), &random_scores(100, 1)[..3]);
    let _ = fs::remove_file(f.file("c.txt"));
    let out = run(
        f.path(),
        &with(&[
            "--spec-scores",
            "spec.jsonl",
            "--target-scores",
            "partial.jsonl",
        ])
        .iter()
        .map(String::as_str)
        .collect::<Vec<_>>(),
    );
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("score missing for id"));
    assert!(!f.file("c.txt").exists(), "no partial coreset");

    assert_eq!(
        code(
            f.path(),
            &[
                "select",
                "--spec-scores",
                "spec.jsonl",
                "--mode",
                "random",
                "--prune-rate",
                "0.5",
                "--out",
                "no/such/dir/c.txt",
                "--audit",
                "a.json"
            ]
        ),
        2
    );
    assert_eq!(code(f.path(), &["--help"]), 0);
}

fn toy_files(dir: &Path) {
    let task = SyntheticTask::generate_geometry(32, 4, Geometry::default(), (0, 50, 0), 3).unwrap();
    save_samples(dir.join("data.jsonl"), &task.generate().unwrap().train).unwrap();
    checkpoint::save(
        &ToyModel::small(32, 4, "home", 3).unwrap(),
        dir.join("m.ckpt"),
    )
    .unwrap();
}

#[test]
fn score_command() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    toy_files(d);
    ok(
        d,
        &[
            "score",
            "--model",
            "m.ckpt",
            "--data",
            "data.jsonl",
            "--scorer",
            "effort",
            "--out",
            "effort.jsonl",
        ],
    );
    ok(
        d,
        &[
            "score",
            "--model",
            "m.ckpt",
            "--data",
            "data.jsonl",
            "--scorer",
            "el2n",
            "--out",
            "el2n.jsonl",
        ],
    );
    ok(
        d,
        &[
            "score",
            "--model",
            "m.ckpt",
            "--data",
            "data.jsonl",
            "--phi",
            "all",
            "--out",
            "all.jsonl",
        ],
    );
    let parse = |name: &str| -> Vec<(String, f64)> {
        lines(&d.join(name))
            .iter()
            .map(|l| {
                let v: serde_json::Value = serde_json::from_str(l).unwrap();
                (
                    v["id"].as_str().unwrap().to_string(),
                    v["score"].as_f64().unwrap(),
                )
            })
            .collect()
    };
    let (effort, el2n, all) = (
        parse("effort.jsonl"),
        parse("el2n.jsonl"),
        parse("all.jsonl"),
    );
    assert_eq!(effort.len(), 50);
    let ids = |v: &[(String, f64)]| v.iter().map(|x| x.0.clone()).collect::<HashSet<_>>();
    assert_eq!(ids(&effort), ids(&el2n));
    assert_ne!(effort, el2n);
    // Gradient over every layer is at least as large as over the last alone.
    assert!(effort.iter().zip(&all).all(|(a, b)| b.1 >= a.1 - 1e-12));

    assert_eq!(
        code(
            d,
            &[
                "score",
                "--model",
                "absent.ckpt",
                "--data",
                "data.jsonl",
                "--out",
                "x.jsonl"
            ]
        ),
        2
    );
    assert_eq!(
        code(
            d,
            &[
                "score",
                "--model",
                "m.ckpt",
                "--data",
                "data.jsonl",
                "--scorer",
                "influence",
                "--out",
                "x.jsonl"
            ]
        ),
        3
    );
    fs::write(d.join("junk.ckpt"), b"not a checkpoint").unwrap();
    assert_eq!(
        code(
            d,
            &[
                "score",
                "--model",
                "junk.ckpt",
                "--data",
                "data.jsonl",
                "--out",
                "x.jsonl"
            ]
        ),
        3
    );
}

#[test]
fn report_command() {
    let f = Fixture::new(20);
    ok(f.path(), &["report", "--out", "empty.csv"]);
    assert_eq!(
        fs::read_to_string(f.file("empty.csv")).unwrap(),
        "method,prune_rate,seed,metric,value\n"
    );

    ok(
        f.path(),
        &[
            "select",
            "--spec-scores",
            "spec.jsonl",
            "--mode",
            "random",
            "--prune-rate",
            "0.5",
            "--seed",
            "3",
            "--out",
            "c.txt",
            "--audit",
            "a.json",
        ],
    );
    fs::write(
        f.file("m.csv"),
        "method,prune_rate,seed,metric,value\nrandom,0.5,3,test_accuracy,0.8\nrandom,0.5,4,test_accuracy,0.7\n",
    )
    .unwrap();
    ok(
        f.path(),
        &[
            "report",
            "--audit",
            "a.json",
            "--metrics",
            "m.csv",
            "--out",
            "r.csv",
        ],
    );
    assert_eq!(
        fs::read_to_string(f.file("r.csv")).unwrap(),
        "method,prune_rate,seed,metric,value\nrandom,0.5,3,test_accuracy,0.8\n"
    );
    fs::write(f.file("bad.csv"), "a,b\n1,2\n").unwrap();
    assert_eq!(
        code(
            f.path(),
            &["report", "--metrics", "bad.csv", "--out", "r.csv"]
        ),
        3
    );
    assert_eq!(
        code(
            f.path(),
            &["report", "--audit", "absent.json", "--out", "r.csv"]
        ),
        2
    );
}

#[test]
fn sweep_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("sweep.toml"),
        "prune_rates = [0.5]\nmethods = [\"staff\", \"random\"]\nseeds = 2\nregions = 10\neval_epochs = 2\n[task]\nn_pretrain = 400\nn_train = 200\nn_test = 200\n[train]\npretrain_epochs = 1\n",
    )
    .unwrap();
    ok(
        d,
        &[
            "sweep",
            "--config",
            "sweep.toml",
            "--out",
            "m.csv",
            "--audit-dir",
            "audits",
        ],
    );
    let metrics = lines(&d.join("m.csv"));
    // header + (full, staff, random) x 2 seeds x 5 metrics
    assert_eq!(metrics.len(), 1 + 3 * 2 * 5);
    let audits: Vec<String> = fs::read_dir(d.join("audits"))
        .unwrap()
        .map(|e| e.unwrap().path().display().to_string())
        .filter(|p| p.contains("staff_"))
        .collect();
    assert_eq!(audits.len(), 2);
    let mut args = vec!["report".to_string()];
    for a in &audits {
        args.extend(["--audit".to_string(), a.clone()]);
    }
    args.extend(["--metrics", "m.csv", "--out", "r.csv", "--aggregate"].map(String::from));
    ok(d, &args.iter().map(String::as_str).collect::<Vec<_>>());
    let report = lines(&d.join("r.csv"));
    assert_eq!(report.len(), 1 + 2 * 5 + 2 * 5);
    assert!(report.iter().skip(1).all(|l| l.starts_with("staff,0.5,")));

    ok(
        d,
        &["ablations", "--config", "sweep.toml", "--out", "abl.csv"],
    );
    let abl = fs::read_to_string(d.join("abl.csv")).unwrap();
    for m in [
        "staff,",
        "staff_no_verify,",
        "staff_no_small_model,",
        "staff_foreign,",
    ] {
        assert!(abl.contains(&format!("\n{m}")), "{m}");
    }
    ok(
        d,
        &[
            "toy-family",
            "--config",
            "sweep.toml",
            "--seed",
            "1",
            "--out-dir",
            "fam",
        ],
    );
    for f in [
        "small.ckpt",
        "target.ckpt",
        "foreign.ckpt",
        "train.jsonl",
        "test.jsonl",
    ] {
        assert!(d.join("fam").join(f).exists(), "{f}");
    }
    ok(d, &["overhead", "--n", "500", "--out", "o.csv"]);
    assert_eq!(lines(&d.join("o.csv")).len(), 4);
}
