//! Bayesian mixtures of prediction suffix trees over an open word vocabulary.
//!
//! A [`Model`] keeps one counting trie of depth `D + 1` and a log-ratio per
//! context; together they represent the posterior mixture over every pruning
//! of the context tree. Predictions escape to shorter contexts with
//! Witten–Bell novel-event masses, so words never seen before still get
//! probability.
//!
//! ```
//! use pst_core::{Model, ModelConfig, SymbolTable, TokenStream, Token};
//!
//! let mut model = Model::new(ModelConfig::new(2, 0.5)).unwrap();
//! let tokens: Vec<Token> = "a b a b a".split(' ').filter_map(Token::new).collect();
//! let stream = TokenStream::from_tokens("doc", &tokens, model.vocab_mut());
//! let probs = model.learn(&stream.ids).unwrap();
//! assert_eq!(probs.len(), 5);
//! ```

pub mod corpus;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod generation;
pub mod mixture;
pub mod oracle;
pub mod persist;
pub mod splay;
pub mod trie;

pub use corpus::{
    padded, segment, split_corpus, tokenize, Document, SentenceMode, SymbolTable, Token, TokenStream, TokenizerRules,
    WordId,
};
pub use error::{PstError, Result};
pub use estimator::{node_gamma, novel_event_kind, word_prob_with_escape, Distribution, NoveltyKind};
pub use evaluation::{
    evaluate, evaluate_online, extract_map, perplexity, posteriors, rank_candidates, rank_scores, EvalReport, MapModel,
    Predictor, RankedCandidate,
};
pub use generation::{generate, generate_ids, walk_step, WalkConfig};
pub use mixture::{mixing_weight, PathPrediction};
pub use persist::PersistError;
pub use trie::{Model, ModelConfig, NodeId, PrunePolicy};
