//! Per-context next-word estimates with a Witten–Bell novel-event mass.
//!
//! For a context seen `c` times with `r` distinct successors, a successor seen
//! `k` times gets `k / (c + r)` and the novel event gets `r / (c + r)`. A word
//! unseen in a context takes the novel mass times its probability in the next
//! shorter context; at the root a never-seen word takes the root's novel mass
//! alone (the spelling model for brand-new words is left out, it cancels in
//! every prediction ratio).

use std::collections::BTreeMap;

use crate::corpus::WordId;
use crate::trie::{Model, NodeId, Trie};

/// Probability of a successor seen `count` times.
#[inline]
pub fn seen_mass(count: u64, total: u64, species: u64) -> f64 {
    count as f64 / (total + species) as f64
}

/// Probability of the novel event; 1 for a context with no observations.
#[inline]
pub fn novel_mass(total: u64, species: u64) -> f64 {
    if total + species == 0 {
        1.0
    } else {
        species as f64 / (total + species) as f64
    }
}

/// Next-word distribution of one context over the words seen there.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub seen: BTreeMap<WordId, f64>,
    pub novel: f64,
}

impl Distribution {
    pub fn total_mass(&self) -> f64 {
        self.seen.values().sum::<f64>() + self.novel
    }
}

/// How a word relates to a context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoveltyKind {
    SeenHere,
    SeenElsewhere,
    GloballyNew,
}

/// Successor counts `c_s(w)` for the contexts on a matched path: entry `j`
/// is the count of `w` after the depth-`j` context. `history` is
/// chronological; `len` is the number of path nodes.
pub(crate) fn counts_along(trie: &Trie, history: &[WordId], w: WordId, len: usize) -> Vec<u64> {
    let mut counts = vec![0; len];
    if w.is_pad() || len == 0 {
        return counts;
    }
    let Some(mut node) = trie.child(NodeId::ROOT, w) else {
        return counts;
    };
    counts[0] = trie.node(node).visits;
    for (j, &h) in history.iter().rev().take(len - 1).enumerate() {
        match trie.child(node, h) {
            Some(next) => {
                node = next;
                counts[j + 1] = trie.node(node).visits;
            }
            None => break,
        }
    }
    counts
}

/// Escape-resolved probabilities for every node of a root-first path, given
/// the successor counts of the target word at each of them.
pub(crate) fn escape_chain(trie: &Trie, path: &[NodeId], counts: &[u64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(path.len());
    let mut shorter = 1.0;
    for (&id, &count) in path.iter().zip(counts) {
        let n = trie.node(id);
        let p = if count > 0 {
            seen_mass(count, n.succ_total, n.species)
        } else {
            novel_mass(n.succ_total, n.species) * shorter
        };
        out.push(p);
        shorter = p;
    }
    out
}

/// Root-first chain of the suffixes of `node` that exist in the trie, ending
/// at `node` itself, and the label of `node` (chronological).
fn suffix_chain(trie: &Trie, node: NodeId) -> (Vec<NodeId>, Vec<WordId>) {
    let label = trie.label(node);
    let mut chain = Vec::with_capacity(label.len() + 1);
    chain.push(NodeId::ROOT);
    let mut cur = NodeId::ROOT;
    for &w in label.iter().rev() {
        cur = trie.child(cur, w).expect("suffix closure");
        chain.push(cur);
    }
    (chain, label)
}

/// The node's own distribution `γ_s` over the words seen after it.
pub fn node_gamma(model: &Model, node: NodeId) -> Distribution {
    let trie = model.trie();
    let n = trie.node(node);
    let label = trie.label(node);
    let mut seen = BTreeMap::new();
    if n.succ_total > 0 {
        for (w, _) in trie.children(NodeId::ROOT) {
            let count = model.successor_count(&label, w);
            if count > 0 {
                seen.insert(w, seen_mass(count, n.succ_total, n.species));
            }
        }
    }
    Distribution {
        seen,
        novel: novel_mass(n.succ_total, n.species),
    }
}

/// Probability of `w` at `node`, escaping to shorter contexts when `w` was
/// never seen at `node`.
pub fn word_prob_with_escape(model: &Model, node: NodeId, w: WordId) -> f64 {
    let trie = model.trie();
    let (chain, label) = suffix_chain(trie, node);
    let counts = counts_along(trie, &label, w, chain.len());
    *escape_chain(trie, &chain, &counts).last().expect("chain holds the root")
}

pub fn novel_event_kind(model: &Model, node: NodeId, w: WordId) -> NoveltyKind {
    let label = model.trie().label(node);
    classify(model.successor_count(&label, w), model.successor_count(&[], w))
}

pub(crate) fn classify(here: u64, root: u64) -> NoveltyKind {
    if here > 0 {
        NoveltyKind::SeenHere
    } else if root > 0 {
        NoveltyKind::SeenElsewhere
    } else {
        NoveltyKind::GloballyNew
    }
}
