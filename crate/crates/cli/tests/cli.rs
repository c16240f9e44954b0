use std::path::Path;
use std::process::{Command, Output};

use cqa_core::split_dev_test;

fn cqa(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cqa"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn synth(dir: &Path) {
    let out = cqa(
        dir,
        &["synth", "--out", "data", "--seed", "4", "--set", "synth.n_queries=10", "--set", "synth.n_distractors=6"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

const DATA: [&str; 4] = ["--corpus", "data/corpus.jsonl", "--queries", "data/queries.jsonl"];

/// Run-file lines without the trailing run tag.
fn untagged(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(' ').unwrap().0.to_owned())
        .collect()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    assert_eq!(code(&cqa(d, &["--help"])), 0);
    assert_eq!(code(&cqa(d, &["frobnicate"])), 1);
    assert_eq!(code(&cqa(d, &["retrieve", "--method", "nonsense"])), 1);
    assert_eq!(code(&cqa(d, &["retrieve", "--corpus", "data/corpus.jsonl", "--method", "lmir"])), 1);
    let bad_param = cqa(d, &[&["retrieve", "--method", "lmir", "--set", "mu=-3"][..], &DATA].concat());
    assert_eq!(code(&bad_param), 1, "{}", stderr(&bad_param));

    let missing = cqa(d, &["retrieve", "--corpus", "nope.jsonl", "--queries", "data/queries.jsonl", "--method", "lmir"]);
    assert_eq!(code(&missing), 2);
    assert!(stderr(&missing).contains("nope.jsonl"));
    std::fs::write(d.join("broken.jsonl"), "{\"id\": \"x\", \"title\": \n").unwrap();
    let broken = cqa(d, &["retrieve", "--corpus", "broken.jsonl", "--queries", "data/queries.jsonl", "--method", "lmir"]);
    assert_eq!(code(&broken), 2, "{}", stderr(&broken));
}

#[test]
fn contextual_methods_need_a_store() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path());
    for m in ["expELMo", "expELMoPRF-centrality"] {
        let out = cqa(dir.path(), &[&["retrieve", "--method", m][..], &DATA].concat());
        assert_eq!(code(&out), 1);
        assert!(stderr(&out).contains("--ctx-store"), "{}", stderr(&out));
    }
    let out = cqa(dir.path(), &[&["retrieve", "--method", "expAL"][..], &DATA].concat());
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("--embeddings"));
}

#[test]
fn elmo_without_feedback_weight_matches_lmir() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    let ctx = ["--ctx-store", "data/contextual.jsonl"];
    let lmir = cqa(d, &[&["retrieve", "--method", "lmir", "--out", "lmir.run"][..], &DATA].concat());
    assert_eq!(code(&lmir), 0, "{}", stderr(&lmir));
    let elmo = cqa(
        d,
        &[&["retrieve", "--method", "expELMo", "--set", "alpha_elmo=0", "--out", "elmo.run"][..], &DATA, &ctx].concat(),
    );
    assert_eq!(code(&elmo), 0, "{}", stderr(&elmo));
    assert_eq!(untagged(&d.join("lmir.run")), untagged(&d.join("elmo.run")));
    let tag = |p: &str| std::fs::read_to_string(d.join(p)).unwrap().lines().next().unwrap().rsplit(' ').next().unwrap().to_owned();
    assert!(tag("lmir.run").starts_with("lmir-"));
    assert!(tag("elmo.run").starts_with("expELMo-"));
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    std::fs::write(
        d.join("exp.conf"),
        "# shared settings\ncorpus = data/corpus.jsonl\nqueries = data/queries.jsonl\nmethod = bm25\ndepth = 3\n",
    )
    .unwrap();
    let out = cqa(d, &["retrieve", "--config", "exp.conf", "--out", "a.run"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let lines = std::fs::read_to_string(d.join("a.run")).unwrap();
    assert_eq!(lines.lines().count(), 10 * 3);
    assert!(lines.lines().all(|l| l.contains(" bm25-")));

    let out = cqa(d, &["retrieve", "--config", "exp.conf", "--method", "lmir", "--depth", "2"]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 20);
    assert!(stdout.contains(" lmir-"));

    std::fs::write(d.join("bad.conf"), "corpus = a\nflavour = mint\n").unwrap();
    assert_eq!(code(&cqa(d, &["retrieve", "--config", "bad.conf"])), 1);
}

#[test]
fn eval_reports_every_run_and_warns_on_orphans() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    for m in ["lmir", "bm25"] {
        let out = cqa(d, &[&["retrieve", "--method", m, "--out", &format!("{m}.run")][..], &DATA].concat());
        assert_eq!(code(&out), 0);
    }
    let mut qrels = std::fs::read_to_string(d.join("data/qrels.txt")).unwrap();
    qrels.push_str("ghost 0 c000 1\n");
    std::fs::write(d.join("qrels.txt"), qrels).unwrap();
    let out = cqa(d, &["eval", "--qrels", "qrels.txt", "lmir.run", "bm25.run"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(report.contains("lmir.run") && report.contains("bm25.run"));
    assert!(report.contains("t-test"));
    assert!(stderr(&out).contains("ghost"));
    assert_eq!(code(&cqa(d, &["eval", "lmir.run"])), 1);
}

#[test]
fn tune_reads_only_dev_judgments() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    let ids: Vec<String> = (0..10).map(|i| format!("in{i:03}")).collect();
    let (dev, test) = split_dev_test(&ids, 4).unwrap();
    assert_eq!((dev.len(), test.len()), (5, 5));

    // rewrite every judgment of a held-out query: tuning output must not move
    let qrels = std::fs::read_to_string(d.join("data/qrels.txt")).unwrap();
    let scrambled: String = qrels
        .lines()
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            if test.iter().any(|t| t == f[0]) {
                format!("{} 0 {} {}\n", f[0], f[2], if f[3] == "1" { "0" } else { "1" })
            } else {
                format!("{l}\n")
            }
        })
        .collect();
    std::fs::write(d.join("scrambled.txt"), scrambled).unwrap();

    let tune = |qrels: &str| {
        let out = cqa(
            d,
            &[
                &["tune", "--seed", "4", "--qrels", qrels, "--method", "lmir", "--grid", "mu=10,100,1000"][..],
                &DATA,
            ]
            .concat(),
        );
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        String::from_utf8(out.stdout).unwrap()
    };
    let report = tune("data/qrels.txt");
    assert_eq!(report, tune("scrambled.txt"));
    assert_eq!(report.lines().filter(|l| l.starts_with("mu=")).count(), 3);
    assert!(report.contains("5 dev queries"));
    assert_eq!(report.lines().filter(|l| l.ends_with('*')).count(), 1);
}

#[test]
fn expand_and_central_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d);
    let out = cqa(
        d,
        &[&["expand", "--method", "expAL-centrality", "--embeddings", "data/embeddings.txt"][..], &DATA].concat(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let lines: Vec<serde_json::Value> =
        String::from_utf8(out.stdout).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 10);
    for rec in &lines {
        let central = rec["central"]["set"].as_array().unwrap();
        assert!((1..=2).contains(&central.len()));
        assert_eq!(rec["excluded"].as_array().unwrap().len(), central.len());
    }

    let out = cqa(d, &[&["central"][..], &DATA].concat());
    assert_eq!(code(&out), 0);
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.starts_with("query\tterm\tcentrality"));
}
