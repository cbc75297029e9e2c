//! Acceptance criteria, one line per criterion.
//!
//! Runs as a plain binary so every line reaches the output. Exits non-zero if
//! a gating criterion fails; reported-only numbers never fail the run.

use std::time::Instant;

use pst_core::evaluation::{evaluate, evaluate_online, extract_map, posteriors, rank_candidates};
use pst_core::oracle::{bruteforce_log_mixture, enumerate_trees, explicit_next_probability};
use pst_core::{
    node_gamma, padded, split_corpus, word_prob_with_escape, Document, Model, ModelConfig, PrunePolicy, SentenceMode,
    SymbolTable, TokenStream, TokenizerRules, WordId,
};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const GENESIS: &str = include_str!("../data/genesis_leviticus.txt");
const PSALMS: &str = include_str!("../data/psalms.txt");

// tolerances
const ORACLE_LOG_TOL: f64 = 1e-9;
const RATIO_REL_TOL: f64 = 1e-9;
const NORM_TOL: f64 = 1e-12;
const SQRT2_TOL: f64 = 1e-9;
const POSTERIOR_TOL: f64 = 0.002;
const PRUNE_SOFT_CHANGE: f64 = 0.05;

const SPLIT_SEED: u64 = 1999;
const SWEEP_SEEDS: [u64; 4] = [1, 2, 3, 4];
const RANK_TRIALS: u64 = 50;
const PRUNE_INTERVAL: u64 = 20_000;

struct Outcome {
    pass: bool,
    gating: bool,
    detail: String,
}

impl Outcome {
    fn gate(pass: bool, detail: String) -> Self {
        Outcome {
            pass,
            gating: true,
            detail,
        }
    }

    fn report(pass: bool, detail: String) -> Self {
        Outcome {
            pass,
            gating: false,
            detail,
        }
    }
}

fn document(name: &str, text: &str, table: &mut SymbolTable) -> Document {
    Document::from_text(name, text, &TokenizerRules::default(), SentenceMode::Lines, table)
}

/// All streams over `{1, 2, 3}` of length `1..=max_len`.
fn all_streams(max_len: usize) -> Vec<Vec<WordId>> {
    let mut out = Vec::new();
    let mut level: Vec<Vec<WordId>> = vec![Vec::new()];
    for _ in 0..max_len {
        level = level
            .iter()
            .flat_map(|s| {
                (1..=3).map(move |w| {
                    let mut t = s.clone();
                    t.push(WordId(w));
                    t
                })
            })
            .collect();
        out.extend(level.iter().cloned());
    }
    out
}

fn online_log_likelihood(stream: &[WordId], depth: usize, alpha: f64) -> f64 {
    let mut m = Model::new(ModelConfig::new(depth, alpha)).expect("valid config");
    m.learn(stream).expect("fresh model").iter().map(|p| p.ln()).sum()
}

/// Criteria 1 and 2 share the enumeration.
fn oracle_equivalence_and_dominance() -> (Outcome, Outcome) {
    let streams = all_streams(8);
    let mut cases = 0usize;
    let mut worst = 0.0f64;
    let mut eq_fail = 0usize;
    let mut trees_checked = 0usize;
    let mut dom_fail = 0usize;
    let mut dom_margin = f64::INFINITY;
    for depth in [1, 2] {
        for alpha in [0.25, 0.5, 0.9] {
            for s in &streams {
                let online = online_log_likelihood(s, depth, alpha);
                let brute = bruteforce_log_mixture(s, depth, alpha).expect("small instance");
                let err = (online - brute).abs() / online.abs().max(brute.abs()).max(1.0);
                worst = worst.max(err);
                if err > ORACLE_LOG_TOL {
                    eq_fail += 1;
                }
                for t in enumerate_trees(s, depth, alpha).expect("small instance") {
                    trees_checked += 1;
                    let margin = online - t.log_joint();
                    dom_margin = dom_margin.min(margin);
                    if margin < -ORACLE_LOG_TOL {
                        dom_fail += 1;
                    }
                }
                cases += 1;
            }
        }
    }
    (
        Outcome::gate(
            eq_fail == 0,
            format!("{cases} instances, worst relative log error {worst:.2e}, {eq_fail} over {ORACLE_LOG_TOL:e}"),
        ),
        Outcome::gate(
            dom_fail == 0,
            format!("{trees_checked} trees, smallest log(mixture/joint) {dom_margin:.3e}, {dom_fail} violations"),
        ),
    )
}

fn ratio_identity() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(31);
    let cases = 1500;
    let mut worst = 0.0f64;
    let mut fails = 0;
    for _ in 0..cases {
        let depth = rng.random_range(0..=3usize);
        let alpha = rng.random_range(0.05..0.95);
        let vocab = rng.random_range(1..=4u32);
        let n = rng.random_range(0..10usize);
        let stream: Vec<WordId> = (0..=n).map(|_| WordId(rng.random_range(1..=vocab + 1))).collect();
        let mut m = Model::new(ModelConfig::new(depth, alpha)).expect("valid config");
        m.learn(&stream[..n]).expect("fresh model");
        let p = padded(&TokenStream::new("", stream[..n].to_vec()), depth).ids;
        let online = m.predict(&p[p.len() - depth..], stream[n]).probability();
        let explicit = explicit_next_probability(&stream, n, depth, alpha);
        let err = (online - explicit).abs() / explicit;
        worst = worst.max(err);
        if err > RATIO_REL_TOL {
            fails += 1;
        }
    }
    Outcome::gate(
        fails == 0,
        format!("{cases} random instances, worst relative error {worst:.2e}, {fails} over {RATIO_REL_TOL:e}"),
    )
}

fn normalization() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(47);
    let unseen = WordId(1000);
    let mut checks = 0usize;
    let mut worst = 0.0f64;
    let mut bad_chain = 0usize;
    let mut bad_mix = 0usize;
    for _ in 0..150 {
        let depth = rng.random_range(0..=3usize);
        let alpha = rng.random_range(0.05..0.95);
        let len = rng.random_range(1..40usize);
        let stream: Vec<WordId> = (0..len).map(|_| WordId(rng.random_range(1..=6))).collect();
        let mut m = Model::new(ModelConfig::new(depth, alpha)).expect("valid config");
        m.begin_stream().expect("fresh model");
        let p = padded(&TokenStream::new("", stream.clone()), depth).ids;
        for i in depth + 1..p.len() {
            m.update(&p[i - depth - 1..i], p[i]).expect("open model");
            let seen: Vec<WordId> = (1..=6).map(WordId).filter(|&w| m.successor_count(&[], w) > 0).collect();
            for id in m.trie().node_ids() {
                if m.trie().node(id).depth as usize > depth {
                    continue;
                }
                let g = node_gamma(&m, id);
                worst = worst.max((g.total_mass() - 1.0).abs());
                let mass: f64 =
                    seen.iter().map(|&w| word_prob_with_escape(&m, id, w)).sum::<f64>() + word_prob_with_escape(&m, id, unseen);
                if !(mass > 0.0 && mass <= 1.0 + NORM_TOL) {
                    bad_chain += 1;
                }
                checks += 1;
            }
            let history = &p[i + 1 - depth..=i];
            let mix: f64 = seen
                .iter()
                .chain(std::iter::once(&unseen))
                .map(|&w| m.predict(history, w).probability())
                .sum();
            if !(mix > 0.0 && mix <= 1.0 + NORM_TOL) {
                bad_mix += 1;
            }
        }
    }
    Outcome::gate(
        worst <= NORM_TOL && bad_chain == 0 && bad_mix == 0,
        format!(
            "{checks} node checks, worst |sum - 1| {worst:.2e}, escape-chain mass out of (0, 1]: {bad_chain}, mixture mass out of (0, 1]: {bad_mix}"
        ),
    )
}

fn hand_computed_perplexity() -> Outcome {
    let mut m = Model::new(ModelConfig::new(0, 0.5)).expect("valid config");
    let r = evaluate_online(&mut m, &TokenStream::new("aaaa", vec![WordId(1); 4]), false).expect("non-empty");
    let err = (r.perplexity - 2f64.sqrt()).abs();
    Outcome::gate(err <= SQRT2_TOL, format!("perplexity {:.12}, |error| {err:.1e}", r.perplexity))
}

fn online_trend(doc: &Document) -> Outcome {
    let mut values = Vec::new();
    for depth in 0..=3 {
        let mut m = Model::new(ModelConfig::new(depth, 0.5)).expect("valid config");
        let r = evaluate_online(&mut m, &doc.stream, false).expect("non-empty");
        values.push((depth, r.perplexity, m.node_count()));
    }
    let decreasing = values.windows(2).all(|w| w[1].1 < w[0].1);
    let cells: Vec<String> = values.iter().map(|(d, p, n)| format!("D={d}: {p:.1} ({n} nodes)")).collect();
    Outcome::gate(
        decreasing && doc.stream.len() >= 50_000,
        format!("{} tokens; {}", doc.stream.len(), cells.join(", ")),
    )
}

/// Mixture and MAP perplexities of the held-out side for `depths`.
fn batch_perplexities(doc: &Document, seed: u64, depths: std::ops::RangeInclusive<usize>) -> (usize, usize, Vec<(usize, f64, f64)>) {
    let (train, test) = split_corpus(doc, 0.15, seed).expect("valid fraction");
    let rows = depths
        .map(|depth| {
            let mut m = Model::new(ModelConfig::new(depth, 0.5)).expect("valid config");
            m.learn(&train.stream.ids).expect("fresh model");
            m.freeze();
            let mix = evaluate(&m, &test.stream, false).expect("non-empty").perplexity;
            let map = evaluate(&extract_map(&m), &test.stream, false).expect("non-empty").perplexity;
            (depth, mix, map)
        })
        .collect();
    (train.stream.len(), test.stream.len(), rows)
}

fn batch_trend(doc: &Document) -> (Outcome, Outcome) {
    let (train, test, rows) = batch_perplexities(doc, SPLIT_SEED, 0..=5);
    let ok = rows.iter().filter(|r| r.0 >= 2).all(|&(_, mix, map)| mix <= map);
    let cells: Vec<String> = rows.iter().map(|(d, mix, map)| format!("D={d}: {mix:.2} vs MAP {map:.2}")).collect();
    let mut sweep = Vec::new();
    for seed in SWEEP_SEEDS {
        let (_, _, rows) = batch_perplexities(doc, seed, 2..=5);
        let held = rows.iter().filter(|&&(_, mix, map)| mix <= map).count();
        sweep.push(format!("seed {seed}: {held}/4"));
    }
    (
        Outcome::gate(ok, format!("seed {SPLIT_SEED}, train {train} / test {test} tokens; {}", cells.join(", "))),
        Outcome::report(true, format!("depths 2..5 where mixture <= MAP, other seeds: {}", sweep.join(", "))),
    )
}

fn ranking_posteriors() -> Outcome {
    let neg = [74.125, 82.500, 75.250, 78.562, 83.625, 78.687, 81.812];
    let want = [0.642, 0.002, 0.295, 0.030, 0.001, 0.027, 0.003];
    let got = posteriors(&neg);
    let worst = got.iter().zip(want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
    let shown: Vec<String> = got.iter().map(|p| format!("{p:.4}")).collect();
    Outcome::gate(worst <= POSTERIOR_TOL, format!("posteriors [{}], worst deviation {worst:.4}", shown.join(", ")))
}

fn ranking_trials() -> Outcome {
    let mut table = SymbolTable::new();
    let doc = document("psalms", PSALMS, &mut table);
    let (train, test) = split_corpus(&doc, 0.9, SPLIT_SEED).expect("valid fraction");
    let mut m = Model::new(ModelConfig::new(4, 0.5)).expect("valid config");
    m.learn(&train.stream.ids).expect("fresh model");
    m.freeze();
    let trained: Vec<WordId> = (1..table.len() as u32)
        .map(WordId)
        .filter(|&w| m.successor_count(&[], w) > 0)
        .collect();
    let held_out: Vec<&[WordId]> = test.sentences().filter(|s| s.len() >= 6).collect();
    let mut wins = 0;
    for trial in 0..RANK_TRIALS {
        let mut rng = ChaCha20Rng::seed_from_u64(trial);
        let original = held_out.choose(&mut rng).expect("held-out sentences").to_vec();
        let mut candidates = vec![original.clone()];
        for _ in 0..6 {
            let mut c = original.clone();
            let pos = rng.random_range(0..c.len());
            loop {
                let w = *trained.choose(&mut rng).expect("vocabulary");
                if w != original[pos] {
                    c[pos] = w;
                    break;
                }
            }
            candidates.push(c);
        }
        let ranked = rank_candidates(&m, &candidates).expect("candidates");
        if ranked[0].index == 0 {
            wins += 1;
        }
    }
    Outcome::gate(
        2 * wins > RANK_TRIALS,
        format!(
            "held-out sentence ranked first in {wins}/{RANK_TRIALS} trials (D=4, {} training tokens, 6 single-word corruptions each)",
            train.stream.len()
        ),
    )
}

fn pruning(doc: &Document) -> (Outcome, Outcome) {
    let depth = 3;
    let mut plain = Model::new(ModelConfig::new(depth, 0.5)).expect("valid config");
    let base = evaluate_online(&mut plain, &doc.stream, false).expect("non-empty");
    let mut config = ModelConfig::new(depth, 0.5);
    config.prune = Some(PrunePolicy {
        interval: PRUNE_INTERVAL,
        threshold: 2,
    });
    let mut pruned = Model::new(config).expect("valid config");
    let after = evaluate_online(&mut pruned, &doc.stream, false).expect("non-empty");
    let change = (after.perplexity - base.perplexity) / base.perplexity;
    (
        Outcome::gate(
            pruned.node_count() < plain.node_count(),
            format!(
                "D={depth}, K={PRUNE_INTERVAL}, threshold 2: {} -> {} nodes",
                plain.node_count(),
                pruned.node_count()
            ),
        ),
        Outcome::report(
            change.abs() < PRUNE_SOFT_CHANGE,
            format!(
                "perplexity {:.2} -> {:.2} ({:+.2}%, soft bound {:.0}%)",
                base.perplexity,
                after.perplexity,
                100.0 * change,
                100.0 * PRUNE_SOFT_CHANGE
            ),
        ),
    )
}

fn locality_and_throughput(doc: &Document) -> (Outcome, Outcome) {
    let mut ok = true;
    let mut cells = Vec::new();
    let mut rates = Vec::new();
    for depth in [1, 3, 5] {
        let mut m = Model::new(ModelConfig::new(depth, 0.5)).expect("valid config");
        m.begin_stream().expect("fresh model");
        let p = padded(&doc.stream, depth).ids;
        let mut most = (0, 0);
        let start = Instant::now();
        for i in depth + 1..p.len() {
            let (_, trace) = m.update_traced(&p[i - depth - 1..i], p[i]).expect("open model");
            most = (most.0.max(trace.counted), most.1.max(trace.contexts));
        }
        let secs = start.elapsed().as_secs_f64();
        if most.0 > depth + 2 || most.1 > depth + 2 {
            ok = false;
        }
        cells.push(format!("D={depth}: max {} counted / {} contexts", most.0, most.1));
        rates.push(format!("D={depth}: {:.0} tokens/s", doc.stream.len() as f64 / secs));
    }
    (
        Outcome::gate(ok, format!("bound D+2 per traversal; {}", cells.join(", "))),
        Outcome::report(true, format!("online update throughput {}", rates.join(", "))),
    )
}

fn timed(rows: &mut Vec<(&'static str, Outcome, f64)>, names: &[&'static str], f: impl FnOnce() -> Vec<Outcome>) {
    let start = Instant::now();
    let outcomes = f();
    let secs = start.elapsed().as_secs_f64();
    for (name, o) in names.iter().zip(outcomes) {
        rows.push((name, o, secs));
    }
}

fn main() {
    let mut table = SymbolTable::new();
    let genesis = document("genesis_leviticus", GENESIS, &mut table);
    let mut rows = Vec::new();

    timed(&mut rows, &["1 oracle equivalence", "2 Bayes dominance"], || {
        let (a, b) = oracle_equivalence_and_dominance();
        vec![a, b]
    });
    timed(&mut rows, &["3 ratio identity"], || vec![ratio_identity()]);
    timed(&mut rows, &["4 normalization"], || vec![normalization()]);
    timed(&mut rows, &["5 hand-computed perplexity"], || vec![hand_computed_perplexity()]);
    timed(&mut rows, &["6 online depth trend"], || vec![online_trend(&genesis)]);
    timed(&mut rows, &["7 mixture vs MAP batch", "7 split seed sweep"], || {
        let (a, b) = batch_trend(&genesis);
        vec![a, b]
    });
    timed(&mut rows, &["8 ranking posteriors", "8 ranking held-out trials"], || {
        vec![ranking_posteriors(), ranking_trials()]
    });
    timed(&mut rows, &["9 pruning node count", "9 pruning perplexity"], || {
        let (a, b) = pruning(&genesis);
        vec![a, b]
    });
    timed(&mut rows, &["10 update locality", "10 throughput"], || {
        let (a, b) = locality_and_throughput(&genesis);
        vec![a, b]
    });

    let mut failed = 0;
    for (name, o, secs) in &rows {
        let status = match (o.pass, o.gating) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "WARN",
        };
        if !o.pass && o.gating {
            failed += 1;
        }
        println!("{status} {name:<28} {}  [{secs:.1}s]", o.detail);
    }
    if failed > 0 {
        println!("{failed} gating criteria failed");
        std::process::exit(1);
    }
    println!("all gating criteria passed");
}
