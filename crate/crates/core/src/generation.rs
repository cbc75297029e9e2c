//! Random walks over the mixture.
//!
//! Each step descends the matched path, stopping at a node with its leaf
//! weight `q(s)` (the deepest matched node always stops), then draws from
//! that node's `γ`. A novel-event draw moves to the next shorter context; a
//! novel-event draw at the root is redrawn from the root's seen words, so the
//! walk never leaves the vocabulary.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::corpus::WordId;
use crate::error::{PstError, Result};
use crate::mixture::mixing_weight;
use crate::trie::{Model, NodeId};

#[derive(Debug, Clone, PartialEq)]
pub struct WalkConfig {
    pub word_count: usize,
    pub seed: u64,
    /// Chronological starting history; padding when empty.
    pub history: Vec<WordId>,
}

impl WalkConfig {
    pub fn new(word_count: usize, seed: u64) -> Self {
        WalkConfig {
            word_count,
            seed,
            history: Vec::new(),
        }
    }
}

/// Word whose cumulative count first exceeds `t` among the successors of the
/// context with chronological `label`.
fn pick_successor(model: &Model, label: &[WordId], mut t: u64) -> WordId {
    let trie = model.trie();
    for (w, _) in trie.children(NodeId::ROOT) {
        if w.is_pad() {
            continue;
        }
        let c = model.successor_count(label, w);
        if t < c {
            return w;
        }
        t -= c;
    }
    unreachable!("successor counts sum to the context total")
}

/// One generated word after the chronological `history`.
pub fn walk_step<R: Rng + ?Sized>(model: &Model, history: &[WordId], rng: &mut R) -> Result<WordId> {
    let trie = model.trie();
    let root = trie.node(NodeId::ROOT);
    if root.succ_total == 0 {
        return Err(PstError::EmptyModel);
    }
    let path = model.matched_path(history);
    let mut stop = path.len() - 1;
    for (k, &id) in path.iter().enumerate().take(path.len() - 1) {
        if rng.random::<f64>() < mixing_weight(trie.node(id).log_ratio) {
            stop = k;
            break;
        }
    }

    for k in (0..=stop).rev() {
        let n = trie.node(path[k]);
        let total = n.succ_total + n.species;
        if total == 0 {
            continue;
        }
        let t = rng.random_range(0..total);
        if t < n.succ_total {
            let label = &history[history.len() - k..];
            return Ok(pick_successor(model, label, t));
        }
    }
    let t = rng.random_range(0..root.succ_total);
    Ok(pick_successor(model, &[], t))
}

/// Word ids of a walk seeded with [`ChaCha20Rng::seed_from_u64`].
pub fn generate_ids(model: &Model, config: &WalkConfig) -> Result<Vec<WordId>> {
    if config.word_count == 0 {
        return Err(PstError::ZeroWords);
    }
    let d = model.max_depth();
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let mut window = vec![WordId::PAD; d.saturating_sub(config.history.len())];
    window.extend_from_slice(&config.history[config.history.len().saturating_sub(d)..]);
    let mut out = Vec::with_capacity(config.word_count);
    for _ in 0..config.word_count {
        let w = walk_step(model, &window, &mut rng)?;
        out.push(w);
        if d > 0 {
            window.remove(0);
            window.push(w);
        }
    }
    Ok(out)
}

/// Surface words of a walk.
pub fn generate(model: &Model, config: &WalkConfig) -> Result<Vec<String>> {
    let ids = generate_ids(model, config)?;
    Ok(ids
        .into_iter()
        .map(|w| model.vocab().resolve(w).unwrap_or("<unk>").to_owned())
        .collect())
}
