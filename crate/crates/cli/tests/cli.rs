use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const CORPUS: &str = "\
In the beginning God created the heaven and the earth.
And the earth was without form, and void; and darkness was upon the face of the deep.
And the Spirit of God moved upon the face of the waters.
And God said, Let there be light: and there was light.
And God saw the light, that it was good: and God divided the light from the darkness.
And God called the light Day, and the darkness he called Night.
And the evening and the morning were the first day.
";

fn pst(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pst"))
        .args(args)
        .env_remove("PST_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8 output")
}

/// `key=value` lines that are not configuration echoes.
fn values(o: &Output) -> HashMap<String, String> {
    stdout(o)
        .lines()
        .filter(|l| !l.starts_with('#'))
        .flat_map(|l| l.split(' '))
        .filter_map(|kv| kv.split_once('='))
        .map(|(k, v)| (k.to_owned(), v.to_owned()))
        .collect()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = TempDir::new().expect("temp dir");
        std::fs::write(dir.path().join("corpus.txt"), CORPUS).expect("write corpus");
        Fixture { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn s(&self, name: &str) -> String {
        self.path(name).display().to_string()
    }

    fn train(&self, depth: &str) -> PathBuf {
        let o = pst(&[
            "train", "--depth", depth, "--alpha", "0.5", "--input", &self.s("corpus.txt"), "--model", &self.s("m.pst"),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        self.path("m.pst")
    }
}

fn p(path: &Path) -> String {
    path.display().to_string()
}

#[test]
fn train_reports_nodes_and_tokens() {
    let f = Fixture::new();
    let o = pst(&["train", "--depth", "5", "--alpha", "0.5", "--input", &f.s("corpus.txt"), "--model", &f.s("out.pst")]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("# command=train\n"));
    assert!(text.contains("# depth=5\n") && text.contains("# alpha=0.5\n") && text.contains("# prune=off\n"));
    let v = values(&o);
    assert_eq!(v["tokens"], "89");
    assert!(v["nodes"].parse::<usize>().unwrap() > 89);
    assert!(f.path("out.pst").exists());
}

#[test]
fn frozen_eval_is_repeatable() {
    let f = Fixture::new();
    let model = f.train("3");
    std::fs::write(f.path("test.txt"), "And God saw the waters, and the morning was good.").unwrap();
    let args = ["eval", "--model", &p(&model), "--input", &f.s("test.txt"), "--frozen"];
    let a = pst(&args);
    let b = pst(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v = values(&a);
    assert_eq!(v["tokens"], "10");
    let seen: usize = ["seen_here", "seen_elsewhere", "globally_new"]
        .iter()
        .map(|k| v[*k].parse::<usize>().unwrap())
        .sum();
    assert_eq!(seen, 10);
    // frozen evaluation leaves the file alone
    let before = std::fs::read(&model).unwrap();
    pst(&args);
    assert_eq!(before, std::fs::read(&model).unwrap());
}

#[test]
fn train_then_adapt_matches_a_single_online_pass() {
    let f = Fixture::new();
    let trained = pst(&["train", "--depth", "2", "--input", &f.s("corpus.txt"), "--model", &f.s("m.pst")]);
    let online = pst(&["eval", "--adapt", "--depth", "2", "--input", &f.s("corpus.txt")]);
    assert_eq!(online.status.code(), Some(0));
    let (t, o) = (values(&trained), values(&online));
    for key in ["tokens", "log2_prob", "perplexity", "seen_here", "seen_elsewhere", "globally_new"] {
        assert_eq!(t[key], o[key], "{key}");
    }
}

#[test]
fn adapt_continues_a_saved_model() {
    let f = Fixture::new();
    let model = f.train("2");
    let o = pst(&[
        "eval", "--adapt", "--model", &p(&model), "--input", &f.s("corpus.txt"), "--save", &f.s("more.pst"),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let stats = values(&pst(&["stats", "--model", &f.s("more.pst")]));
    assert_eq!(stats["tokens"], "178");
    // a second pass over the same text is much easier to predict
    let first: f64 = values(&pst(&["eval", "--adapt", "--depth", "2", "--input", &f.s("corpus.txt")]))["perplexity"]
        .parse()
        .unwrap();
    let second: f64 = values(&o)["perplexity"].parse().unwrap();
    assert!(second < first);
}

#[test]
fn rank_posteriors_normalize_scores() {
    let f = Fixture::new();
    let model = f.train("4");
    std::fs::write(
        f.path("alts.txt"),
        "and god said let there be light\nand god said let there be darkness\nand god saw let there be light\nlight be there let said god and\n",
    )
    .unwrap();
    // corruptions use known words: a never-seen word is charged only the
    // novel-event mass, which does not cancel across alternatives
    let o = pst(&["rank", "--model", &p(&model), "--candidates", &f.s("alts.txt")]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let rows: Vec<Vec<&str>> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("rank"))
        .map(|l| l.split('\t').collect())
        .collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][3], "and god said let there be light");
    let neg: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    let post: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    let want = pst_posteriors(&neg);
    for (p, w) in post.iter().zip(want) {
        assert!((p - w).abs() <= 0.002, "{p} vs {w}");
    }
    assert!((post.iter().sum::<f64>() - 1.0).abs() < 0.01);
    assert!(neg.windows(2).all(|w| w[0] <= w[1]));
}

fn pst_posteriors(neg: &[f64]) -> Vec<f64> {
    let best = neg.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = neg.iter().map(|l| (best - l).exp2()).collect();
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

#[test]
fn generate_requires_a_seed_and_repeats() {
    let f = Fixture::new();
    let model = f.train("3");
    let missing = pst(&["generate", "--model", &p(&model), "--words", "10"]);
    assert_eq!(missing.status.code(), Some(1));
    let a = pst(&["generate", "--model", &p(&model), "--words", "20", "--seed", "5"]);
    let b = pst(&["generate", "--model", &p(&model), "--words", "20", "--seed", "5"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let line = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(line.split(' ').count(), 20);
    let vocab = CORPUS.to_lowercase();
    for w in line.split(' ') {
        assert!(vocab.contains(w), "{w}");
    }
}

#[test]
fn prune_and_stats() {
    let f = Fixture::new();
    let model = f.train("3");
    let before: usize = values(&pst(&["stats", "--model", &p(&model)]))["nodes"].parse().unwrap();
    let o = pst(&["prune", "--model", &p(&model), "--prune-threshold", "2", "--output", &f.s("small.pst")]);
    assert_eq!(o.status.code(), Some(0));
    let v = values(&o);
    assert_eq!(v["nodes_before"].parse::<usize>().unwrap(), before);
    let after: usize = values(&pst(&["stats", "--model", &f.s("small.pst")]))["nodes"].parse().unwrap();
    assert!(after < before);
    assert_eq!(after, v["nodes_after"].parse::<usize>().unwrap());
    let huge = pst(&["prune", "--model", &f.s("small.pst"), "--prune-threshold", "1000000"]);
    assert_eq!(huge.status.code(), Some(0));
    assert_eq!(values(&pst(&["stats", "--model", &f.s("small.pst")]))["nodes"], "1");
}

#[test]
fn split_partitions_sentences() {
    let f = Fixture::new();
    let args = |seed: &str| {
        pst(&[
            "split", "--input", &f.s("corpus.txt"), "--seed", seed, "--train-fraction", "0.5", "--train-out",
            &f.s("train.txt"), "--test-out", &f.s("test.txt"),
        ])
    };
    let o = args("9");
    assert_eq!(o.status.code(), Some(0));
    let train = std::fs::read_to_string(f.path("train.txt")).unwrap();
    let test = std::fs::read_to_string(f.path("test.txt")).unwrap();
    assert_eq!(train.lines().count() + test.lines().count(), 7);
    let v = values(&o);
    assert_eq!(v["train_tokens"].parse::<usize>().unwrap() + v["test_tokens"].parse::<usize>().unwrap(), 89);
    args("9");
    assert_eq!(train, std::fs::read_to_string(f.path("train.txt")).unwrap());
    let no_seed = pst(&["split", "--input", &f.s("corpus.txt"), "--train-out", "a", "--test-out", "b"]);
    assert_eq!(no_seed.status.code(), Some(1));
}

#[test]
fn exit_codes() {
    let f = Fixture::new();
    assert_eq!(pst(&["train", "--bogus"]).status.code(), Some(1));
    assert_eq!(pst(&["eval", "--input", &f.s("corpus.txt")]).status.code(), Some(1));
    assert_eq!(pst(&["eval", "--input", &f.s("corpus.txt"), "--frozen", "--adapt"]).status.code(), Some(1));
    assert_eq!(pst(&["eval", "--input", &f.s("corpus.txt"), "--frozen"]).status.code(), Some(1));
    assert_eq!(pst(&["--help"]).status.code(), Some(0));

    let missing = pst(&["stats", "--model", &f.s("nope.pst")]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("error"));

    let model = f.train("2");
    let mut bytes = std::fs::read(&model).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    std::fs::write(f.path("bad.pst"), &bytes).unwrap();
    let bad = pst(&["stats", "--model", &f.s("bad.pst")]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("checksum"));

    let bad_alpha = pst(&["train", "--alpha", "1.5", "--input", &f.s("corpus.txt"), "--model", &f.s("x.pst")]);
    assert_eq!(bad_alpha.status.code(), Some(2));
    std::fs::write(f.path("empty.txt"), "  \n").unwrap();
    let empty = pst(&["eval", "--adapt", "--input", &f.s("empty.txt")]);
    assert_eq!(empty.status.code(), Some(2));
}
