//! The counting suffix trie shared by every member of the mixture.
//!
//! A node stands for a word sequence `s`. Its children extend `s` one word
//! further into the past, so the path from the root spells `s` newest word
//! first. A mixture of depth `D` keeps a trie of depth `D + 1`: nodes up to
//! depth `D` act as prediction contexts, and the visit count of the node for
//! `s·w` doubles as the count of `w` following `s`.
//!
//! The root keeps its children in a dense array indexed by word id; every
//! other node uses a splay tree from the shared [`SplayForest`]. Mutating
//! traversals splay, lookups through `&self` do not.

use crate::corpus::{SymbolTable, WordId};
use crate::error::{PstError, Result};
use crate::splay::{SplayForest, SplayRoot};

/// Largest supported maximum depth.
pub const MAX_DEPTH_LIMIT: usize = 64;

const NO_CHILD: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);

    #[inline]
    fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    /// Word on the edge from the parent; the oldest word of this node's label.
    pub word: WordId,
    pub parent: NodeId,
    pub depth: u16,
    /// Occurrences of this node's full sequence.
    pub visits: u64,
    /// Observations made with this node as the context.
    pub succ_total: u64,
    /// Distinct successors recorded for this context.
    pub species: u64,
    /// Log of the leaf-versus-subtree posterior odds.
    pub log_ratio: f64,
    children: SplayRoot,
}

impl Node {
    fn new(word: WordId, parent: NodeId, depth: u16, log_ratio: f64) -> Self {
        Node {
            word,
            parent,
            depth,
            visits: 0,
            succ_total: 0,
            species: 0,
            log_ratio,
            children: SplayRoot::EMPTY,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trie {
    nodes: Vec<Node>,
    forest: SplayForest,
    root_children: Vec<u32>,
}

impl Trie {
    pub fn new(root_log_ratio: f64) -> Self {
        Trie {
            nodes: vec![Node::new(WordId::PAD, NodeId::ROOT, 0, root_log_ratio)],
            forest: SplayForest::new(),
            root_children: Vec::new(),
        }
    }

    /// Number of nodes including the root.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    #[inline]
    pub(crate) fn node_mut(&mut self, id: NodeId) -> &mut Node {
        &mut self.nodes[id.index()]
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    /// Child of `id` along word `w`, without reorganizing anything.
    #[inline]
    pub fn child(&self, id: NodeId, w: WordId) -> Option<NodeId> {
        if id == NodeId::ROOT {
            match self.root_children.get(w.index()) {
                Some(&c) if c != NO_CHILD => Some(NodeId(c)),
                _ => None,
            }
        } else {
            self.forest.get(self.nodes[id.index()].children, w.0).map(NodeId)
        }
    }

    /// Like [`Trie::child`] but lets the splay tree adapt to the access.
    pub fn child_splay(&mut self, id: NodeId, w: WordId) -> Option<NodeId> {
        if id == NodeId::ROOT {
            return self.child(id, w);
        }
        let mut root = self.nodes[id.index()].children;
        let found = self.forest.get_splay(&mut root, w.0).map(NodeId);
        self.nodes[id.index()].children = root;
        found
    }

    /// Returns the child of `id` along `w`, creating it with `log_ratio` and
    /// zeroed counts if absent. The flag reports creation. Splays.
    pub fn child_or_insert(&mut self, id: NodeId, w: WordId, log_ratio: f64) -> (NodeId, bool) {
        let next = self.nodes.len() as u32;
        let depth = self.nodes[id.index()].depth + 1;
        let (child, created) = if id == NodeId::ROOT {
            if self.root_children.len() <= w.index() {
                self.root_children.resize(w.index() + 1, NO_CHILD);
            }
            let slot = &mut self.root_children[w.index()];
            if *slot == NO_CHILD {
                *slot = next;
                (next, true)
            } else {
                (*slot, false)
            }
        } else {
            let mut root = self.nodes[id.index()].children;
            let r = self.forest.get_or_insert_with(&mut root, w.0, || next);
            self.nodes[id.index()].children = root;
            r
        };
        if created {
            self.nodes.push(Node::new(w, id, depth, log_ratio));
        }
        (NodeId(child), created)
    }

    /// Children of `id` in ascending word order.
    pub fn children(&self, id: NodeId) -> Children<'_> {
        if id == NodeId::ROOT {
            Children::Dense(self.root_children.iter().enumerate())
        } else {
            Children::Splay(self.forest.iter(self.nodes[id.index()].children))
        }
    }

    /// The node's label in chronological order (oldest word first).
    pub fn label(&self, mut id: NodeId) -> Vec<WordId> {
        let mut out = Vec::with_capacity(self.node(id).depth as usize);
        while id != NodeId::ROOT {
            let n = self.node(id);
            out.push(n.word);
            id = n.parent;
        }
        out
    }

    /// Node for a chronological sequence, if present.
    pub fn find(&self, seq: &[WordId]) -> Option<NodeId> {
        seq.iter()
            .rev()
            .try_fold(NodeId::ROOT, |node, &w| self.child(node, w))
    }

    /// Rebuilds the trie keeping the root and every node whose visits reach
    /// `threshold` (and whose ancestors all do). Returns the number removed.
    pub fn retain_visits(&mut self, threshold: u64) -> usize {
        let before = self.nodes.len();
        let mut rebuilt = Trie {
            nodes: Vec::with_capacity(before),
            forest: SplayForest::new(),
            root_children: Vec::new(),
        };
        let mut root = self.nodes[0].clone();
        root.children = SplayRoot::EMPTY;
        rebuilt.nodes.push(root);
        // (old id, new parent id)
        let mut stack: Vec<(NodeId, NodeId)> = Vec::new();
        let push_children = |trie: &Trie, old: NodeId, new: NodeId, stack: &mut Vec<(NodeId, NodeId)>| {
            let kids: Vec<NodeId> = trie.children(old).map(|(_, c)| c).collect();
            stack.extend(kids.into_iter().rev().map(|c| (c, new)));
        };
        push_children(self, NodeId::ROOT, NodeId::ROOT, &mut stack);
        while let Some((old, new_parent)) = stack.pop() {
            let node = &self.nodes[old.index()];
            if node.visits < threshold {
                continue;
            }
            let (new_id, _) = rebuilt.child_or_insert(new_parent, node.word, node.log_ratio);
            let slot = rebuilt.node_mut(new_id);
            slot.visits = node.visits;
            slot.succ_total = node.succ_total;
            slot.species = node.species;
            push_children(self, old, new_id, &mut stack);
        }
        *self = rebuilt;
        before - self.nodes.len()
    }

    /// Appends a node during deserialization; the parent must already exist.
    pub(crate) fn push_loaded(&mut self, parent: NodeId, mut node: Node) -> Option<NodeId> {
        if parent.index() >= self.nodes.len() || self.child(parent, node.word).is_some() {
            return None;
        }
        let (id, _) = self.child_or_insert(parent, node.word, node.log_ratio);
        node.parent = parent;
        node.depth = self.nodes[id.index()].depth;
        node.children = SplayRoot::EMPTY;
        self.nodes[id.index()] = node;
        Some(id)
    }

    pub(crate) fn loaded_node(word: WordId, visits: u64, succ_total: u64, species: u64, log_ratio: f64) -> Node {
        Node {
            visits,
            succ_total,
            species,
            ..Node::new(word, NodeId::ROOT, 0, log_ratio)
        }
    }
}

pub enum Children<'a> {
    Dense(std::iter::Enumerate<std::slice::Iter<'a, u32>>),
    Splay(crate::splay::Iter<'a>),
}

impl Iterator for Children<'_> {
    type Item = (WordId, NodeId);

    fn next(&mut self) -> Option<(WordId, NodeId)> {
        match self {
            Children::Dense(it) => it
                .find(|(_, &c)| c != NO_CHILD)
                .map(|(w, &c)| (WordId(w as u32), NodeId(c))),
            Children::Splay(it) => it.next().map(|(w, c)| (WordId(w), NodeId(c))),
        }
    }
}

/// Periodic pruning: every `interval` observations drop nodes with fewer
/// than `threshold` visits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrunePolicy {
    pub interval: u64,
    pub threshold: u64,
}

impl Default for PrunePolicy {
    fn default() -> Self {
        PrunePolicy {
            interval: 1_000_000,
            threshold: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub max_depth: usize,
    pub alpha: f64,
    pub prune: Option<PrunePolicy>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            max_depth: 5,
            alpha: 0.5,
            prune: None,
        }
    }
}

impl ModelConfig {
    pub fn new(max_depth: usize, alpha: f64) -> Self {
        ModelConfig {
            max_depth,
            alpha,
            prune: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(PstError::InvalidAlpha(self.alpha));
        }
        if self.max_depth > MAX_DEPTH_LIMIT {
            return Err(PstError::DepthTooLarge(self.max_depth));
        }
        if matches!(self.prune, Some(p) if p.interval == 0) {
            return Err(PstError::InvalidPruneInterval);
        }
        Ok(())
    }

    /// `log(alpha / (1 - alpha))`, the log-ratio of a node that has seen nothing.
    pub fn prior_log_ratio(&self) -> f64 {
        (self.alpha / (1.0 - self.alpha)).ln()
    }
}

/// Work done by one [`Model::record_observation`] call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ObservationTrace {
    /// Nodes touched while counting the new sequence suffixes.
    pub counted: usize,
    /// Nodes touched while updating context totals.
    pub contexts: usize,
    pub created: usize,
    /// Nodes removed by a pruning pass triggered by this observation.
    pub pruned: usize,
}

/// A trained (or training) mixture: the trie, its hyperparameters and the
/// vocabulary its word ids refer to.
#[derive(Debug, Clone)]
pub struct Model {
    pub(crate) trie: Trie,
    pub(crate) config: ModelConfig,
    pub(crate) vocab: SymbolTable,
    pub(crate) tokens_seen: u64,
    pub(crate) since_prune: u64,
    pub(crate) frozen: bool,
}

impl Model {
    pub fn new(config: ModelConfig) -> Result<Self> {
        Self::with_vocab(config, SymbolTable::new())
    }

    pub fn with_vocab(config: ModelConfig, vocab: SymbolTable) -> Result<Self> {
        config.validate()?;
        Ok(Model {
            trie: Trie::new(config.prior_log_ratio()),
            config,
            vocab,
            tokens_seen: 0,
            since_prune: 0,
            frozen: false,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn max_depth(&self) -> usize {
        self.config.max_depth
    }

    pub fn alpha(&self) -> f64 {
        self.config.alpha
    }

    pub fn trie(&self) -> &Trie {
        &self.trie
    }

    pub fn vocab(&self) -> &SymbolTable {
        &self.vocab
    }

    pub fn vocab_mut(&mut self) -> &mut SymbolTable {
        &mut self.vocab
    }

    pub fn tokens_seen(&self) -> u64 {
        self.tokens_seen
    }

    pub fn node_count(&self) -> usize {
        self.trie.len()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Disallows further structural changes. Frozen models only read.
    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn set_prune_policy(&mut self, prune: Option<PrunePolicy>) -> Result<()> {
        let config = ModelConfig {
            prune,
            ..self.config.clone()
        };
        config.validate()?;
        self.config = config;
        Ok(())
    }

    fn ensure_mutable(&self) -> Result<()> {
        if self.frozen {
            Err(PstError::Frozen)
        } else {
            Ok(())
        }
    }

    /// Marks the start of a new padded stream: the all-pad context window
    /// counts as one occurrence.
    pub fn begin_stream(&mut self) -> Result<()> {
        self.ensure_mutable()?;
        let prior = self.config.prior_log_ratio();
        let mut node = NodeId::ROOT;
        self.trie.node_mut(node).visits += 1;
        for _ in 0..self.config.max_depth {
            node = self.trie.child_or_insert(node, WordId::PAD, prior).0;
            self.trie.node_mut(node).visits += 1;
        }
        Ok(())
    }

    /// Nodes matched by `history` (chronological, newest last), root first,
    /// descending until depth `D` or until a child is missing.
    pub fn matched_path(&self, history: &[WordId]) -> Vec<NodeId> {
        let mut path = Vec::with_capacity(self.config.max_depth + 1);
        let mut node = NodeId::ROOT;
        path.push(node);
        for &w in history.iter().rev().take(self.config.max_depth) {
            match self.trie.child(node, w) {
                Some(c) => {
                    node = c;
                    path.push(c);
                }
                None => break,
            }
        }
        path
    }

    /// Number of times `w` followed the chronological `context`.
    pub fn successor_count(&self, context: &[WordId], w: WordId) -> u64 {
        if w.is_pad() {
            return 0;
        }
        self.trie
            .child(NodeId::ROOT, w)
            .and_then(|n| context.iter().rev().try_fold(n, |node, &h| self.trie.child(node, h)))
            .map_or(0, |n| self.trie.node(n).visits)
    }

    /// Counts an observation. `window` is chronological and ends with the
    /// observed word; it must hold at least `D + 2` ids (use padding).
    ///
    /// The first traversal bumps the visits of every suffix of the window up
    /// to length `D + 1`; the second bumps the successor total of each
    /// context (suffixes of the window without its last word, length `0..=D`)
    /// and its species count when the extended node was new.
    pub fn record_observation(&mut self, window: &[WordId]) -> Result<ObservationTrace> {
        self.ensure_mutable()?;
        let depth = self.config.max_depth;
        let need = depth + 2;
        if window.len() < need {
            return Err(PstError::ShortHistory {
                got: window.len(),
                need,
            });
        }
        let (&w, history) = window.split_last().expect("window is non-empty");
        if w.is_pad() {
            return Err(PstError::PadPredicted);
        }
        let prior = self.config.prior_log_ratio();
        let mut trace = ObservationTrace::default();

        // created[k]: the node for the last k+1 words of the window is new
        let mut created = [false; MAX_DEPTH_LIMIT + 2];
        let mut node = NodeId::ROOT;
        self.trie.node_mut(node).visits += 1;
        trace.counted += 1;
        for (k, &word) in window.iter().rev().take(depth + 1).enumerate() {
            let (child, fresh) = self.trie.child_or_insert(node, word, prior);
            node = child;
            self.trie.node_mut(node).visits += 1;
            created[k] = fresh;
            trace.counted += 1;
            trace.created += fresh as usize;
        }

        let mut node = NodeId::ROOT;
        for k in 0..=depth {
            if k > 0 {
                let word = history[history.len() - k];
                let (child, fresh) = self.trie.child_or_insert(node, word, prior);
                if fresh {
                    // context lost to pruning: it still occurs right now
                    self.trie.node_mut(child).visits = 1;
                    trace.created += 1;
                }
                node = child;
            }
            let n = self.trie.node_mut(node);
            n.succ_total += 1;
            if created[k] {
                n.species += 1;
            }
            trace.contexts += 1;
        }

        self.tokens_seen += 1;
        if let Some(policy) = self.config.prune {
            self.since_prune += 1;
            if self.since_prune >= policy.interval {
                self.since_prune = 0;
                trace.pruned = self.trie.retain_visits(policy.threshold);
            }
        }
        Ok(trace)
    }

    /// Removes every non-root node with fewer than `threshold` visits along
    /// with its subtree. Successor totals and species counts of survivors are
    /// left untouched.
    pub fn prune(&mut self, threshold: u64) -> Result<usize> {
        self.ensure_mutable()?;
        Ok(self.trie.retain_visits(threshold))
    }

    /// Shifts the log-ratio of one node; used by the mixture update.
    pub(crate) fn add_log_ratio(&mut self, id: NodeId, delta: f64) {
        self.trie.node_mut(id).log_ratio += delta;
    }
}
