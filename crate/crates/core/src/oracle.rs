//! Slow reference implementations of the tree mixture, for testing.
//!
//! Nothing here touches the trie: counts come from rescanning the padded
//! stream prefix at every step. [`enumerate_trees`] lists every pruning of the
//! observed context tree with its prior and likelihood, and
//! [`explicit_log_mixture`] evaluates the leaf/subtree recursion with explicit
//! per-node likelihoods. All values are natural logs.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::corpus::WordId;
use crate::error::{PstError, Result};

/// Upper bound on the number of trees [`enumerate_trees`] will list.
pub const TREE_LIMIT: usize = 200_000;

type Context = Vec<WordId>;

/// A padded stream with the per-step quantities the references need.
struct Instance {
    padded: Vec<WordId>,
    depth: usize,
    alpha: f64,
    tokens: usize,
}

impl Instance {
    fn new(stream: &[WordId], depth: usize, alpha: f64) -> Self {
        let mut padded = vec![WordId::PAD; depth + 1];
        padded.extend_from_slice(stream);
        Instance {
            padded,
            depth,
            alpha,
            tokens: stream.len(),
        }
    }

    /// Position of token `i` (0-based) in the padded stream.
    fn pos(&self, i: usize) -> usize {
        self.depth + 1 + i
    }

    /// Depth-`k` context in force when token `i` is predicted (chronological).
    fn context(&self, i: usize, k: usize) -> &[WordId] {
        let p = self.pos(i);
        &self.padded[p - k..p]
    }

    /// `γ_s(w)` with escapes, using only tokens `0..i` as evidence.
    fn gamma(&self, i: usize, s: &[WordId], w: WordId) -> f64 {
        let mut total = 0u64;
        let mut count = 0u64;
        let mut successors = HashSet::new();
        for j in 0..i {
            if self.context(j, s.len()) == s {
                let next = self.padded[self.pos(j)];
                total += 1;
                successors.insert(next);
                if next == w {
                    count += 1;
                }
            }
        }
        let species = successors.len() as u64;
        if count > 0 {
            return count as f64 / (total + species) as f64;
        }
        let novel = if total == 0 {
            1.0
        } else {
            species as f64 / (total + species) as f64
        };
        if s.is_empty() {
            novel
        } else {
            novel * self.gamma(i, &s[1..], w)
        }
    }

    /// `ln γ` of each token at each context depth: `table[i][k]`.
    fn log_gamma_table(&self, tokens: usize) -> Vec<Vec<f64>> {
        (0..tokens)
            .map(|i| {
                let w = self.padded[self.pos(i)];
                (0..=self.depth).map(|k| self.gamma(i, self.context(i, k), w).ln()).collect()
            })
            .collect()
    }

    /// Contexts used by predictions of tokens `0..tokens`.
    fn observed_contexts(&self, tokens: usize) -> BTreeSet<Context> {
        (0..tokens)
            .flat_map(|i| (0..=self.depth).map(move |k| (i, k)))
            .map(|(i, k)| self.context(i, k).to_vec())
            .collect()
    }
}

fn children_of<'a>(nodes: &'a BTreeSet<Context>, s: &'a [WordId]) -> impl Iterator<Item = &'a Context> + 'a {
    nodes
        .iter()
        .filter(move |c| c.len() == s.len() + 1 && c[1..] == *s)
}

/// One pruning of the observed context tree.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeScore {
    /// Internal nodes; every other node reached is a leaf.
    pub internal: BTreeSet<Vec<WordId>>,
    pub log_prior: f64,
    pub log_likelihood: f64,
}

impl TreeScore {
    pub fn log_joint(&self) -> f64 {
        self.log_prior + self.log_likelihood
    }
}

fn count_trees(nodes: &BTreeSet<Context>, s: &[WordId], depth: usize) -> usize {
    if s.len() == depth {
        return 1;
    }
    let product = children_of(nodes, s).fold(1usize, |acc, c| {
        acc.saturating_mul(count_trees(nodes, c, depth))
    });
    product.saturating_add(1)
}

/// Every pruning below `s`, as sets of internal nodes with their log priors.
fn trees_below(nodes: &BTreeSet<Context>, s: &[WordId], depth: usize, alpha: f64) -> Vec<(BTreeSet<Context>, f64)> {
    if s.len() == depth {
        return vec![(BTreeSet::new(), 0.0)];
    }
    let mut out = vec![(BTreeSet::new(), alpha.ln())];
    let mut combos = vec![(BTreeSet::from([s.to_vec()]), (1.0 - alpha).ln())];
    for child in children_of(nodes, s) {
        let sub = trees_below(nodes, child, depth, alpha);
        combos = combos
            .iter()
            .flat_map(|(set, lp)| {
                sub.iter().map(move |(sub_set, sub_lp)| {
                    let mut merged = set.clone();
                    merged.extend(sub_set.iter().cloned());
                    (merged, lp + sub_lp)
                })
            })
            .collect();
    }
    out.extend(combos);
    out
}

/// Lists every pruning of the depth-`depth` tree over the contexts observed
/// in `stream`, with prior `α^leaves·(1−α)^internal` (depth-`depth` leaves
/// are forced and free) and online likelihood.
pub fn enumerate_trees(stream: &[WordId], depth: usize, alpha: f64) -> Result<Vec<TreeScore>> {
    let inst = Instance::new(stream, depth, alpha);
    let nodes = inst.observed_contexts(inst.tokens);
    if count_trees(&nodes, &[], depth) > TREE_LIMIT {
        return Err(PstError::TooManyTrees { limit: TREE_LIMIT });
    }
    let table = inst.log_gamma_table(inst.tokens);
    let trees = trees_below(&nodes, &[], depth, alpha);
    Ok(trees
        .into_iter()
        .map(|(internal, log_prior)| {
            let log_likelihood = (0..inst.tokens)
                .map(|i| {
                    let mut k = 0;
                    while k < depth && internal.contains(inst.context(i, k)) {
                        k += 1;
                    }
                    table[i][k]
                })
                .sum();
            TreeScore {
                internal,
                log_prior,
                log_likelihood,
            }
        })
        .collect())
}

fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `ln Σ_T P₀(T)·P(stream | T)` by enumeration.
pub fn bruteforce_log_mixture(stream: &[WordId], depth: usize, alpha: f64) -> Result<f64> {
    Ok(log_sum_exp(enumerate_trees(stream, depth, alpha)?.iter().map(TreeScore::log_joint)))
}

/// `ln Lmix(ε)` after the first `tokens` tokens of `stream`, from explicit
/// per-node leaf likelihoods and the recursion
/// `Lmix(s) = α·L(s) + (1−α)·Π_children Lmix(child)`, `Lmix(s) = L(s)` at full depth.
pub fn explicit_log_mixture(stream: &[WordId], tokens: usize, depth: usize, alpha: f64) -> f64 {
    let inst = Instance::new(stream, depth, alpha);
    let nodes = inst.observed_contexts(tokens);
    let mut log_leaf: BTreeMap<Context, f64> = nodes.iter().map(|s| (s.clone(), 0.0)).collect();
    for i in 0..tokens {
        let w = inst.padded[inst.pos(i)];
        for k in 0..=depth {
            let s = inst.context(i, k);
            *log_leaf.get_mut(s).expect("observed") += inst.gamma(i, s, w).ln();
        }
    }
    fn lmix(inst: &Instance, nodes: &BTreeSet<Context>, leaf: &BTreeMap<Context, f64>, s: &[WordId]) -> f64 {
        let l = leaf[s];
        if s.len() == inst.depth {
            return l;
        }
        let below: f64 = children_of(nodes, s).map(|c| lmix(inst, nodes, leaf, c)).sum();
        log_sum_exp([inst.alpha.ln() + l, (1.0 - inst.alpha).ln() + below])
    }
    if nodes.is_empty() {
        return 0.0;
    }
    lmix(&inst, &nodes, &log_leaf, &[])
}

/// Mixture probability of token `tokens` given the ones before it, as the
/// ratio of consecutive explicit mixture likelihoods.
pub fn explicit_next_probability(stream: &[WordId], tokens: usize, depth: usize, alpha: f64) -> f64 {
    (explicit_log_mixture(stream, tokens + 1, depth, alpha) - explicit_log_mixture(stream, tokens, depth, alpha)).exp()
}
