//! Bayesian mixture over every pruning of the context trie up to depth `D`.
//!
//! Each context node `s` keeps `R(s)`, the log of the posterior odds that `s`
//! is a leaf rather than an internal node whose subtrees keep mixing. A
//! prediction walks the matched path and blends from the deepest node up:
//!
//! ```text
//! mixed(deepest) = γ_deepest(w)
//! mixed(s)       = q(s)·γ_s(w) + (1 − q(s))·mixed(child)     q(s) = 1 / (1 + e^(−R(s)))
//! ```
//!
//! and `mixed(root)` is the probability of `w` under the whole mixture. After
//! the prediction every internal node on the path absorbs the outcome with
//! `R(s) += ln γ_s(w) − ln mixed(child)`, then the counts are recorded.
//! When the matched path stops short of depth `D` its deepest node acts as
//! the base case: an unvisited subtree predicts exactly what its root does.

use crate::corpus::{padded, TokenStream, WordId};
use crate::error::{PstError, Result};
use crate::estimator::{counts_along, escape_chain};
use crate::trie::{Model, NodeId, ObservationTrace};

/// Leaf weight for a node with log-ratio `log_ratio`.
#[inline]
pub fn mixing_weight(log_ratio: f64) -> f64 {
    1.0 / (1.0 + (-log_ratio).exp())
}

/// One node of a matched path as seen by a prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathEntry {
    pub node: NodeId,
    pub depth: usize,
    /// `γ_s(w)` with escapes resolved.
    pub gamma: f64,
    /// Leaf weight `q(s)`; ignored for the deepest entry, which is the base case.
    pub weight: f64,
    /// Mixture prediction of the subtree rooted here.
    pub mixed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathPrediction {
    /// Deepest node first; the last entry is the root.
    pub entries: Vec<PathEntry>,
    /// Successor count of the target word at each path node, root first.
    pub counts: Vec<u64>,
}

impl PathPrediction {
    /// Probability assigned to the word by the full mixture.
    pub fn probability(&self) -> f64 {
        self.entries.last().expect("path holds the root").mixed
    }

    pub fn deepest(&self) -> &PathEntry {
        &self.entries[0]
    }

    pub fn root_count(&self) -> u64 {
        self.counts[0]
    }

    pub fn deepest_count(&self) -> u64 {
        *self.counts.last().expect("path holds the root")
    }
}

impl Model {
    /// Mixture prediction for `w` after `history` (chronological, newest
    /// last). Reads only; `w` must not be the pad.
    pub fn predict(&self, history: &[WordId], w: WordId) -> PathPrediction {
        let trie = self.trie();
        let path = self.matched_path(history);
        let counts = counts_along(trie, history, w, path.len());
        let gammas = escape_chain(trie, &path, &counts);

        let mut entries = Vec::with_capacity(path.len());
        let mut mixed = *gammas.last().expect("path holds the root");
        for (depth, (&node, &gamma)) in path.iter().zip(&gammas).enumerate().rev() {
            let weight = mixing_weight(trie.node(node).log_ratio);
            if depth + 1 < path.len() {
                mixed = weight * gamma + (1.0 - weight) * mixed;
            }
            entries.push(PathEntry {
                node,
                depth,
                gamma,
                weight,
                mixed,
            });
        }
        PathPrediction { entries, counts }
    }

    /// Online step: predicts `w`, moves the log-ratios of the internal path
    /// nodes by the outcome, then records the observation. `history` must
    /// hold at least `D + 1` words. Returns the probability assigned to `w`
    /// before any state changed.
    pub fn update(&mut self, history: &[WordId], w: WordId) -> Result<f64> {
        self.update_traced(history, w).map(|(p, _)| p)
    }

    pub fn update_traced(&mut self, history: &[WordId], w: WordId) -> Result<(f64, ObservationTrace)> {
        if self.is_frozen() {
            return Err(PstError::Frozen);
        }
        if w.is_pad() {
            return Err(PstError::PadPredicted);
        }
        let need = self.max_depth() + 1;
        if history.len() < need {
            return Err(PstError::ShortHistory {
                got: history.len(),
                need,
            });
        }
        let history = &history[history.len() - need..];
        let prediction = self.predict(history, w);
        // entries[i + 1] is the parent of entries[i]
        for pair in prediction.entries.windows(2) {
            let (child, parent) = (pair[0], pair[1]);
            self.add_log_ratio(parent.node, parent.gamma.ln() - child.mixed.ln());
        }
        let mut window = Vec::with_capacity(need + 1);
        window.extend_from_slice(history);
        window.push(w);
        let trace = self.record_observation(&window)?;
        Ok((prediction.probability(), trace))
    }

    /// Runs the online algorithm over a fresh padded stream and returns the
    /// probability assigned to each token.
    pub fn learn(&mut self, ids: &[WordId]) -> Result<Vec<f64>> {
        self.begin_stream()?;
        let d = self.max_depth();
        let p = padded(&TokenStream::new("", ids.to_vec()), d).ids;
        (d + 1..p.len()).map(|i| self.update(&p[i - d - 1..i], p[i])).collect()
    }
}
