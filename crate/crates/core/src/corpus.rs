//! Tokenization, word interning, padding and train/test splitting.
//!
//! Words are whitespace-delimited runs. The default rules fold case and strip
//! punctuation from both ends of each run, so `"The cab-driver's,"` becomes
//! `the cab-driver's`. Runs that are pure punctuation disappear.

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{PstError, Result};

/// Interned word identifier. Id 0 is reserved for the start-of-sequence pad.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WordId(pub u32);

impl WordId {
    pub const PAD: WordId = WordId(0);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn is_pad(self) -> bool {
        self == Self::PAD
    }
}

impl fmt::Display for WordId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A normalized word: non-empty and free of whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token(String);

impl Token {
    pub fn new(surface: impl Into<String>) -> Option<Token> {
        let surface = surface.into();
        if surface.is_empty() || surface.chars().any(char::is_whitespace) {
            None
        } else {
            Some(Token(surface))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Normalization applied by [`tokenize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenizerRules {
    pub lowercase: bool,
    pub strip_punctuation: bool,
}

impl Default for TokenizerRules {
    fn default() -> Self {
        TokenizerRules {
            lowercase: true,
            strip_punctuation: true,
        }
    }
}

/// How sentence boundaries are found when building a [`Document`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SentenceMode {
    /// Newlines and words ending in `.`, `!` or `?` close a sentence.
    #[default]
    Punctuation,
    /// Every non-empty line is one sentence.
    Lines,
}

fn normalize(raw: &str, rules: &TokenizerRules) -> Option<Token> {
    let trimmed = if rules.strip_punctuation {
        raw.trim_matches(|c: char| !c.is_alphanumeric())
    } else {
        raw
    };
    if rules.lowercase {
        Token::new(trimmed.to_lowercase())
    } else {
        Token::new(trimmed)
    }
}

/// Splits `text` into normalized tokens.
pub fn tokenize(text: &str, rules: &TokenizerRules) -> Vec<Token> {
    text.split_whitespace()
        .filter_map(|raw| normalize(raw, rules))
        .collect()
}

fn ends_sentence(raw: &str) -> bool {
    raw.trim_end_matches(['"', '\'', ')', ']'])
        .ends_with(['.', '!', '?'])
}

/// Splits `text` into sentences of normalized tokens. Empty sentences are dropped.
pub fn segment(text: &str, rules: &TokenizerRules, mode: SentenceMode) -> Vec<Vec<Token>> {
    let mut sentences = Vec::new();
    for line in text.lines() {
        let mut current = Vec::new();
        for raw in line.split_whitespace() {
            if let Some(token) = normalize(raw, rules) {
                current.push(token);
            }
            if mode == SentenceMode::Punctuation && ends_sentence(raw) && !current.is_empty() {
                sentences.push(std::mem::take(&mut current));
            }
        }
        if !current.is_empty() {
            sentences.push(current);
        }
    }
    sentences
}

/// Bidirectional word/id map over an open vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolTable {
    ids: HashMap<String, WordId>,
    words: Vec<String>,
}

impl SymbolTable {
    /// Number of ids reserved at construction (just the pad).
    pub const RESERVED: usize = 1;
    pub const PAD_SURFACE: &'static str = "<s>";

    pub fn new() -> Self {
        SymbolTable {
            ids: HashMap::new(),
            words: vec![Self::PAD_SURFACE.to_owned()],
        }
    }

    /// Returns the id of `token`, allocating the next free id if needed.
    pub fn intern(&mut self, token: &Token) -> WordId {
        if let Some(&id) = self.ids.get(token.as_str()) {
            return id;
        }
        let id = WordId(self.words.len() as u32);
        self.words.push(token.as_str().to_owned());
        self.ids.insert(token.as_str().to_owned(), id);
        id
    }

    pub fn get(&self, word: &str) -> Option<WordId> {
        self.ids.get(word).copied()
    }

    pub fn resolve(&self, id: WordId) -> Option<&str> {
        self.words.get(id.index()).map(String::as_str)
    }

    /// Table size including the reserved pad.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    /// True when no user word has been interned.
    pub fn is_empty(&self) -> bool {
        self.words.len() == Self::RESERVED
    }

    /// User words in id order.
    pub fn words(&self) -> impl Iterator<Item = (WordId, &str)> {
        self.words
            .iter()
            .enumerate()
            .skip(Self::RESERVED)
            .map(|(i, w)| (WordId(i as u32), w.as_str()))
    }

    pub(crate) fn from_words(words: Vec<String>) -> Self {
        let mut table = SymbolTable::new();
        for w in words {
            let id = WordId(table.words.len() as u32);
            table.ids.insert(w.clone(), id);
            table.words.push(w);
        }
        table
    }
}

impl Default for SymbolTable {
    fn default() -> Self {
        Self::new()
    }
}

/// An ordered sequence of word ids with a source label.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenStream {
    pub ids: Vec<WordId>,
    pub source: String,
}

impl TokenStream {
    pub fn new(source: impl Into<String>, ids: Vec<WordId>) -> Self {
        TokenStream {
            ids,
            source: source.into(),
        }
    }

    /// Interns every token of `tokens` into `table`.
    pub fn from_tokens(source: impl Into<String>, tokens: &[Token], table: &mut SymbolTable) -> Self {
        let ids = tokens.iter().map(|t| table.intern(t)).collect();
        Self::new(source, ids)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Prepends `depth + 1` pad ids so every real position has a full window.
pub fn padded(stream: &TokenStream, depth: usize) -> TokenStream {
    let mut ids = Vec::with_capacity(stream.len() + depth + 1);
    ids.resize(depth + 1, WordId::PAD);
    ids.extend_from_slice(&stream.ids);
    TokenStream::new(stream.source.clone(), ids)
}

/// A token stream together with its sentence boundaries.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Document {
    pub stream: TokenStream,
    /// Exclusive end offset of every sentence; the last equals `stream.len()`.
    pub boundaries: Vec<usize>,
}

impl Document {
    pub fn from_sentences(source: impl Into<String>, sentences: &[Vec<Token>], table: &mut SymbolTable) -> Self {
        let mut ids = Vec::new();
        let mut boundaries = Vec::with_capacity(sentences.len());
        for sentence in sentences.iter().filter(|s| !s.is_empty()) {
            ids.extend(sentence.iter().map(|t| table.intern(t)));
            boundaries.push(ids.len());
        }
        Document {
            stream: TokenStream::new(source, ids),
            boundaries,
        }
    }

    pub fn from_text(
        source: impl Into<String>,
        text: &str,
        rules: &TokenizerRules,
        mode: SentenceMode,
        table: &mut SymbolTable,
    ) -> Self {
        Self::from_sentences(source, &segment(text, rules, mode), table)
    }

    pub fn sentence_ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        let starts = std::iter::once(0).chain(self.boundaries.iter().copied());
        starts.zip(self.boundaries.iter().copied()).map(|(s, e)| s..e)
    }

    pub fn sentences(&self) -> impl Iterator<Item = &[WordId]> + '_ {
        self.sentence_ranges().map(move |r| &self.stream.ids[r])
    }

    pub fn sentence_count(&self) -> usize {
        self.boundaries.len()
    }

    fn push_sentence(&mut self, words: &[WordId]) {
        self.stream.ids.extend_from_slice(words);
        self.boundaries.push(self.stream.ids.len());
    }
}

/// Randomly assigns whole sentences to a training side with probability
/// `train_fraction`, using a ChaCha20 generator seeded from `seed`. Order is
/// preserved within each side.
pub fn split_corpus(doc: &Document, train_fraction: f64, seed: u64) -> Result<(Document, Document)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(PstError::InvalidFraction(train_fraction));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let source = &doc.stream.source;
    let mut train = Document {
        stream: TokenStream::new(format!("{source}#train"), Vec::new()),
        boundaries: Vec::new(),
    };
    let mut test = Document {
        stream: TokenStream::new(format!("{source}#test"), Vec::new()),
        boundaries: Vec::new(),
    };
    for sentence in doc.sentences() {
        if rng.random::<f64>() < train_fraction {
            train.push_sentence(sentence);
        } else {
            test.push_sentence(sentence);
        }
    }
    Ok((train, test))
}
