//! Perplexity, MAP-tree extraction and candidate ranking.
//!
//! Words the model never saw are charged the novel-event mass of every
//! context on the escape chain and nothing else, so perplexities of models
//! with different vocabularies are only comparable together with the
//! globally-new counts reported next to them.

use std::fmt::Write as _;

use crate::corpus::{padded, TokenStream, WordId};
use crate::error::{PstError, Result};
use crate::estimator::{classify, counts_along, escape_chain, NoveltyKind};
use crate::trie::{Model, NodeId};

/// Probability of one token and how the word related to its context.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub probability: f64,
    pub kind: NoveltyKind,
}

/// Anything that assigns next-word probabilities without changing state.
pub trait Predictor {
    fn max_depth(&self) -> usize;

    /// Scores `w` after the chronological `history`.
    fn score(&self, history: &[WordId], w: WordId) -> Scored;
}

impl Predictor for Model {
    fn max_depth(&self) -> usize {
        Model::max_depth(self)
    }

    fn score(&self, history: &[WordId], w: WordId) -> Scored {
        let pred = self.predict(history, w);
        Scored {
            probability: pred.probability(),
            kind: classify(pred.deepest_count(), pred.root_count()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenScore {
    pub word: WordId,
    pub log2_prob: f64,
    pub kind: NoveltyKind,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub token_count: usize,
    pub total_log2_prob: f64,
    pub perplexity: f64,
    pub seen_here: usize,
    pub seen_elsewhere: usize,
    pub globally_new: usize,
    pub trace: Option<Vec<TokenScore>>,
}

impl EvalReport {
    fn new(keep_trace: bool) -> Self {
        EvalReport {
            trace: keep_trace.then(Vec::new),
            ..Default::default()
        }
    }

    fn add(&mut self, word: WordId, scored: Scored) {
        let log2_prob = scored.probability.log2();
        self.token_count += 1;
        self.total_log2_prob += log2_prob;
        match scored.kind {
            NoveltyKind::SeenHere => self.seen_here += 1,
            NoveltyKind::SeenElsewhere => self.seen_elsewhere += 1,
            NoveltyKind::GloballyNew => self.globally_new += 1,
        }
        if let Some(trace) = &mut self.trace {
            trace.push(TokenScore {
                word,
                log2_prob,
                kind: scored.kind,
            });
        }
    }

    fn finish(mut self) -> Self {
        self.perplexity = (-self.total_log2_prob / self.token_count as f64).exp2();
        self
    }

    /// Merges reports of consecutive streams.
    pub fn merge(&mut self, other: &EvalReport) {
        self.token_count += other.token_count;
        self.total_log2_prob += other.total_log2_prob;
        self.seen_here += other.seen_here;
        self.seen_elsewhere += other.seen_elsewhere;
        self.globally_new += other.globally_new;
        if let (Some(a), Some(b)) = (&mut self.trace, &other.trace) {
            a.extend(b.iter().cloned());
        }
        if self.token_count > 0 {
            self.perplexity = (-self.total_log2_prob / self.token_count as f64).exp2();
        }
    }

    /// `key=value` lines: tokens, log2_prob, perplexity, seen_here,
    /// seen_elsewhere, globally_new.
    pub fn to_key_values(&self) -> String {
        format!(
            "tokens={}\nlog2_prob={:.6}\nperplexity={:.6}\nseen_here={}\nseen_elsewhere={}\nglobally_new={}\n",
            self.token_count,
            self.total_log2_prob,
            self.perplexity,
            self.seen_here,
            self.seen_elsewhere,
            self.globally_new
        )
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let pct = |n: usize| 100.0 * n as f64 / self.token_count.max(1) as f64;
        let _ = writeln!(out, "{:<16} {:>14}", "tokens", self.token_count);
        let _ = writeln!(out, "{:<16} {:>14.3}", "log2 prob", self.total_log2_prob);
        let _ = writeln!(out, "{:<16} {:>14.3}", "perplexity", self.perplexity);
        let _ = writeln!(out, "{:<16} {:>14} {:>6.2}%", "seen here", self.seen_here, pct(self.seen_here));
        let _ = writeln!(
            out,
            "{:<16} {:>14} {:>6.2}%",
            "seen elsewhere",
            self.seen_elsewhere,
            pct(self.seen_elsewhere)
        );
        let _ = writeln!(out, "{:<16} {:>14} {:>6.2}%", "globally new", self.globally_new, pct(self.globally_new));
        out
    }
}

/// Scores a stream without touching the predictor. The history starts from padding.
pub fn evaluate<P: Predictor + ?Sized>(predictor: &P, stream: &TokenStream, keep_trace: bool) -> Result<EvalReport> {
    if stream.is_empty() {
        return Err(PstError::EmptyStream);
    }
    let d = predictor.max_depth();
    let p = padded(stream, d).ids;
    let mut report = EvalReport::new(keep_trace);
    for i in d + 1..p.len() {
        let w = p[i];
        report.add(w, predictor.score(&p[i - d..i], w));
    }
    Ok(report.finish())
}

/// Scores a stream while adapting the model after every token.
pub fn evaluate_online(model: &mut Model, stream: &TokenStream, keep_trace: bool) -> Result<EvalReport> {
    if stream.is_empty() {
        return Err(PstError::EmptyStream);
    }
    model.begin_stream()?;
    let d = model.max_depth();
    let p = padded(stream, d).ids;
    let mut report = EvalReport::new(keep_trace);
    for i in d + 1..p.len() {
        let w = p[i];
        let history = &p[i - d - 1..i];
        // classification uses the pre-update counts
        let kind = Predictor::score(model, history, w).kind;
        let probability = model.update(history, w)?;
        report.add(w, Scored { probability, kind });
    }
    Ok(report.finish())
}

/// Online (`adapt`) or frozen evaluation.
pub fn perplexity(model: &mut Model, stream: &TokenStream, adapt: bool) -> Result<EvalReport> {
    if adapt {
        evaluate_online(model, stream, false)
    } else {
        evaluate(model, stream, false)
    }
}

/// The single tree obtained by making every context a leaf as soon as its
/// log-ratio is non-negative. Predicts with the leaf the history reaches.
#[derive(Debug, Clone)]
pub struct MapModel {
    model: Model,
    leaf: Vec<bool>,
}

/// Extracts the MAP tree. Descendants of a leaf are never reached; they stay
/// in the shared trie because their visit counts are successor counts of
/// other contexts.
pub fn extract_map(model: &Model) -> MapModel {
    let mut frozen = model.clone();
    frozen.freeze();
    let d = frozen.max_depth();
    let trie = frozen.trie();
    let leaf = trie
        .node_ids()
        .map(|id| {
            let n = trie.node(id);
            n.depth as usize >= d || n.log_ratio >= 0.0
        })
        .collect();
    MapModel { model: frozen, leaf }
}

impl MapModel {
    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.leaf[id.0 as usize]
    }

    /// Nodes of the MAP tree: every context reachable from the root without
    /// passing through a leaf.
    pub fn tree_size(&self) -> usize {
        let trie = self.model.trie();
        let mut stack = vec![NodeId::ROOT];
        let mut size = 0;
        while let Some(id) = stack.pop() {
            size += 1;
            if !self.is_leaf(id) {
                stack.extend(trie.children(id).map(|(_, c)| c));
            }
        }
        size
    }

    /// Path from the root to the leaf matched by `history`.
    pub fn leaf_path(&self, history: &[WordId]) -> Vec<NodeId> {
        let trie = self.model.trie();
        let mut path = vec![NodeId::ROOT];
        let mut node = NodeId::ROOT;
        for &w in history.iter().rev() {
            if self.is_leaf(node) {
                break;
            }
            match trie.child(node, w) {
                Some(c) => {
                    node = c;
                    path.push(c);
                }
                None => break,
            }
        }
        path
    }
}

impl Predictor for MapModel {
    fn max_depth(&self) -> usize {
        self.model.max_depth()
    }

    fn score(&self, history: &[WordId], w: WordId) -> Scored {
        let trie = self.model.trie();
        let path = self.leaf_path(history);
        let counts = counts_along(trie, history, w, path.len());
        let gammas = escape_chain(trie, &path, &counts);
        Scored {
            probability: *gammas.last().expect("path holds the root"),
            kind: classify(*counts.last().expect("path holds the root"), counts[0]),
        }
    }
}

/// `-log2` probability of a sentence scored on its own from padding.
pub fn sentence_neg_log2<P: Predictor + ?Sized>(predictor: &P, words: &[WordId]) -> f64 {
    let d = predictor.max_depth();
    let p = padded(&TokenStream::new("", words.to_vec()), d).ids;
    -(d + 1..p.len())
        .map(|i| predictor.score(&p[i - d..i], p[i]).probability.log2())
        .sum::<f64>()
}

/// Normalizes `2^(-ℓ_i)` over the candidates.
pub fn posteriors(neg_log2: &[f64]) -> Vec<f64> {
    let best = neg_log2.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = neg_log2.iter().map(|l| (best - l).exp2()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedCandidate {
    /// Position in the input list.
    pub index: usize,
    pub neg_log2: f64,
    pub posterior: f64,
}

/// Ranks `neg_log2` scores by posterior, highest first. Ties keep input order.
pub fn rank_scores(neg_log2: &[f64]) -> Result<Vec<RankedCandidate>> {
    if neg_log2.is_empty() {
        return Err(PstError::NoCandidates);
    }
    let post = posteriors(neg_log2);
    let mut ranked: Vec<RankedCandidate> = neg_log2
        .iter()
        .zip(post)
        .enumerate()
        .map(|(index, (&neg_log2, posterior))| RankedCandidate {
            index,
            neg_log2,
            posterior,
        })
        .collect();
    ranked.sort_by(|a, b| b.posterior.total_cmp(&a.posterior).then(a.index.cmp(&b.index)));
    Ok(ranked)
}

/// Scores each candidate sentence independently and ranks them, treating the
/// list as the complete set of alternatives.
pub fn rank_candidates<P: Predictor + ?Sized>(predictor: &P, candidates: &[Vec<WordId>]) -> Result<Vec<RankedCandidate>> {
    let scores: Vec<f64> = candidates.iter().map(|c| sentence_neg_log2(predictor, c)).collect();
    rank_scores(&scores)
}
