use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kg2corpus(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kg2corpus"))
        .args(args)
        .current_dir(dir)
        .env("KG2CORPUS_LOG", "warn")
        .env_remove("KG2CORPUS_OUT_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Dense clusters of eight entities with a few links between them, labelled
/// in English and French.
fn write_fixture(dir: &Path, clusters: usize) {
    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    let n = clusters * 8;
    let mut lexicon = String::new();
    for i in 0..n {
        writeln!(
            lexicon,
            r#"{{"id":"Q{i}","labels":{{"en":{{"label":"entity {i}","aliases":[]}},"fr":{{"label":"entité {i}","aliases":[]}}}}}}"#
        )
        .unwrap();
    }
    for r in 0..40 {
        writeln!(
            lexicon,
            r#"{{"id":"P{r}","labels":{{"en":{{"label":"relation {r}","aliases":[]}},"fr":{{"label":"relation {r} fr","aliases":[]}}}}}}"#
        )
        .unwrap();
    }
    let mut triples = String::new();
    for c in 0..clusters {
        for a in 0..8 {
            for b in a + 1..8 {
                if next() % 2 == 0 {
                    writeln!(triples, "Q{}\tP{}\tQ{}", c * 8 + a, next() % 40, c * 8 + b).unwrap();
                }
            }
        }
    }
    for _ in 0..n / 2 {
        let (h, t) = (next() as usize % n, next() as usize % n);
        if h != t {
            writeln!(triples, "Q{h}\tP{}\tQ{t}", next() % 40).unwrap();
        }
    }
    fs::write(dir.join("lexicon.jsonl"), lexicon).unwrap();
    fs::write(dir.join("triples.tsv"), triples).unwrap();
}

const CONFIG: &str = r#"
seed = 5
languages = ["en", "fr"]
out_dir = "out"

[ingest]
lexicon = "lexicon.jsonl"
triples = "triples.tsv"

[xlr]
train = 60
dev = 20
test_pool = 20
"#;

#[test]
fn run_all_then_stats() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), 60);
    fs::write(dir.path().join("kg2corpus.toml"), CONFIG).unwrap();
    let table = stdout(&kg2corpus(dir.path(), &["run-all", "--config", "kg2corpus.toml"]));
    assert!(table.contains("code switched synthetic sentences"), "{table}");
    assert!(table.contains("reasoning based training samples from length-4 cycles"));
    assert!(dir.path().join("out/mix/mixed.jsonl").is_file());

    let again = stdout(&kg2corpus(dir.path(), &["stats", "out"]));
    assert_eq!(again, table);
    let json: serde_json::Value =
        serde_json::from_str(&stdout(&kg2corpus(dir.path(), &["stats", "out/report.json", "--json"]))).unwrap();
    assert_eq!(json["table"]["languages"], 2);
    assert!(json["table"]["parallel_sentences"].as_u64().unwrap() > 0);
}

#[test]
fn stages_one_by_one() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path(), 60);
    let run = |args: &[&str]| stdout(&kg2corpus(dir.path(), args));
    run(&["ingest", "--lexicon", "lexicon.jsonl", "--triples", "triples.tsv", "--langs", "en,fr", "--out", "graph.snap"]);
    let snap = "graph.snap";
    let gen: serde_json::Value =
        serde_json::from_str(&run(&["gen", "--snapshot", snap, "--mode", "cs", "--seed", "1", "--out", "gen"])).unwrap();
    assert!(gen["emitted"].as_u64().unwrap() > 0, "{gen}");
    run(&["cycles", "--snapshot", snap, "--out", "cycles"]);
    run(&[
        "xlr", "--cycles", "cycles", "--snapshot", snap, "--train", "60", "--dev", "20", "--test-pool", "20", "--out", "xlr",
    ]);
    assert!(dir.path().join("xlr/train.jsonl").is_file());
    run(&["mask", "--in", "gen", "--task", "knowledge", "--out", "mask"]);
    run(&["mask", "--in", "xlr", "--task", "reason", "--out", "mask"]);

    let shown = run(&["inspect", "mask/knowledge.jsonl", "--filter", "task=knowledge", "--limit", "3"]);
    assert!(!shown.is_empty());
    let none = run(&["inspect", "mask/knowledge.jsonl", "--filter", "lang=zh"]);
    assert!(none.is_empty(), "{none}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| kg2corpus(dir.path(), args).status.code().unwrap();
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
    assert_eq!(code(&["gen", "--bogus"]), 1);
    assert_eq!(code(&["ingest", "--lexicon", "missing.jsonl", "--triples", "missing.tsv", "--out", "o"]), 1);
    assert_eq!(code(&["stats", "nowhere"]), 1);
    fs::write(dir.path().join("bad.toml"), "[mask]\nmlm_probabilty = 0.2\n").unwrap();
    assert_eq!(code(&["run-all", "--config", "bad.toml"]), 1);
    assert_eq!(code(&["mask", "--in", ".", "--task", "knowledge", "--out", "m"]), 1);
}
