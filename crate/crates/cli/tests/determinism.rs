mod common;

use std::fs;

use common::{fixtures, p, trig};

#[test]
fn eval_reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let bench = fixtures().join("eval_bench.jsonl");
    let responses = fixtures().join("eval_responses_s2.jsonl");
    let mut outputs = Vec::new();
    for (run, threads) in [(0, "1"), (1, "1"), (2, "8"), (3, "8")] {
        let out = dir.path().join(format!("r{run}.json"));
        let r = trig([
            "eval",
            "--bench",
            p(&bench),
            "--responses",
            p(&responses),
            "--setting",
            "2",
            "--format",
            "index",
            "--threads",
            threads,
            "--out",
            p(&out),
        ]);
        assert_eq!(r.code, 0, "{}", r.stderr);
        outputs.push((fs::read(&out).unwrap(), fs::read(out.with_extension("txt")).unwrap()));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn ground_reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let bench = fixtures().join("ground/bench.jsonl");
    let emb = fixtures().join("ground/emb");
    let mut outputs = Vec::new();
    for (run, threads) in [(0, "1"), (1, "1"), (2, "8"), (3, "8")] {
        let out = dir.path().join(format!("g{run}.json"));
        let r = trig([
            "ground",
            "--embeddings",
            p(&emb),
            "--bench",
            p(&bench),
            "--threads",
            threads,
            "--out",
            p(&out),
        ]);
        assert_eq!(r.code, 0, "{}", r.stderr);
        outputs.push(fs::read(&out).unwrap());
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}
