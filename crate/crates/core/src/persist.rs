//! Versioned binary model files.
//!
//! Layout, little-endian throughout:
//!
//! ```text
//! magic "PSTM" | version u32 | payload length u64 | payload | checksum [u8; 16]
//! ```
//!
//! The checksum is the first 16 bytes of SHA-256 over everything before it.
//! The payload holds the hyperparameters, counters, vocabulary and then the
//! trie in preorder, children in ascending word id, each node as
//! `word u32, visits u64, succ_total u64, species u64, log_ratio f64, children u32`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{SymbolTable, WordId};
use crate::trie::{Model, ModelConfig, NodeId, PrunePolicy, Trie};

pub const MAGIC: [u8; 4] = *b"PSTM";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;
const CHECKSUM_LEN: usize = 16;

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("not a model file")]
    BadMagic,

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("model file is truncated")]
    Truncated,

    #[error("model file checksum mismatch")]
    Checksum,

    #[error("malformed model file: {0}")]
    Malformed(String),
}

type Result<T> = std::result::Result<T, PersistError>;

fn checksum(bytes: &[u8]) -> [u8; CHECKSUM_LEN] {
    let digest = Sha256::digest(bytes);
    let mut out = [0; CHECKSUM_LEN];
    out.copy_from_slice(&digest[..CHECKSUM_LEN]);
    out
}

struct Encoder(Vec<u8>);

impl Encoder {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }
}

/// Serializes `model` to bytes.
pub fn to_bytes(model: &Model) -> Vec<u8> {
    let mut e = Encoder(Vec::new());
    let config = model.config();
    e.f64(config.alpha);
    e.u32(config.max_depth as u32);
    match config.prune {
        Some(p) => {
            e.u8(1);
            e.u64(p.interval);
            e.u64(p.threshold);
        }
        None => {
            e.u8(0);
            e.u64(0);
            e.u64(0);
        }
    }
    e.u64(model.tokens_seen);
    e.u64(model.since_prune);
    e.u8(model.frozen as u8);

    let vocab = model.vocab();
    e.u32((vocab.len() - SymbolTable::RESERVED) as u32);
    for (_, w) in vocab.words() {
        e.u32(w.len() as u32);
        e.0.extend_from_slice(w.as_bytes());
    }

    let trie = model.trie();
    e.u64(trie.len() as u64);
    let mut stack = vec![NodeId::ROOT];
    while let Some(id) = stack.pop() {
        let n = trie.node(id);
        let children: Vec<NodeId> = trie.children(id).map(|(_, c)| c).collect();
        e.u32(n.word.0);
        e.u64(n.visits);
        e.u64(n.succ_total);
        e.u64(n.species);
        e.f64(n.log_ratio);
        e.u32(children.len() as u32);
        stack.extend(children.into_iter().rev());
    }

    let payload = e.0;
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + CHECKSUM_LEN);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    let sum = checksum(&out);
    out.extend_from_slice(&sum);
    out
}

struct Decoder<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Decoder<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| PersistError::Malformed("record runs past the payload".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }
}

fn malformed(msg: impl Into<String>) -> PersistError {
    PersistError::Malformed(msg.into())
}

/// Parses a model from bytes produced by [`to_bytes`].
pub fn from_bytes(bytes: &[u8]) -> Result<Model> {
    if bytes.len() < 4 {
        return Err(PersistError::Truncated);
    }
    if bytes[..4] != MAGIC {
        return Err(PersistError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(PersistError::Truncated);
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(PersistError::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let payload_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let body_end = usize::try_from(payload_len)
        .ok()
        .and_then(|l| l.checked_add(HEADER_LEN))
        .ok_or(PersistError::Truncated)?;
    if bytes.len() < body_end + CHECKSUM_LEN {
        return Err(PersistError::Truncated);
    }
    if bytes.len() > body_end + CHECKSUM_LEN {
        return Err(malformed("trailing bytes after checksum"));
    }
    if checksum(&bytes[..body_end]) != bytes[body_end..] {
        return Err(PersistError::Checksum);
    }

    let mut d = Decoder {
        bytes: &bytes[HEADER_LEN..body_end],
        pos: 0,
    };
    let alpha = d.f64()?;
    let max_depth = d.u32()? as usize;
    let has_prune = d.u8()?;
    let interval = d.u64()?;
    let threshold = d.u64()?;
    let prune = match has_prune {
        0 => None,
        1 => Some(PrunePolicy { interval, threshold }),
        _ => return Err(malformed("bad prune flag")),
    };
    let config = ModelConfig {
        max_depth,
        alpha,
        prune,
    };
    config.validate().map_err(|e| malformed(e.to_string()))?;
    let tokens_seen = d.u64()?;
    let since_prune = d.u64()?;
    let frozen = match d.u8()? {
        0 => false,
        1 => true,
        _ => return Err(malformed("bad frozen flag")),
    };

    let word_count = d.u32()? as usize;
    let mut words = Vec::with_capacity(word_count.min(1 << 20));
    for _ in 0..word_count {
        let len = d.u32()? as usize;
        let w = std::str::from_utf8(d.take(len)?).map_err(|_| malformed("vocabulary is not UTF-8"))?;
        words.push(w.to_owned());
    }
    let vocab = SymbolTable::from_words(words);
    if vocab.words().any(|(id, w)| vocab.get(w) != Some(id)) {
        return Err(malformed("duplicate vocabulary entries"));
    }

    let node_count = d.u64()?;
    if node_count == 0 {
        return Err(malformed("missing root"));
    }
    let mut trie = Trie::new(0.0);
    // (node, children still to read)
    let mut open: Vec<(NodeId, u32)> = Vec::new();
    for i in 0..node_count {
        let word = WordId(d.u32()?);
        let visits = d.u64()?;
        let succ_total = d.u64()?;
        let species = d.u64()?;
        let log_ratio = d.f64()?;
        let children = d.u32()?;
        let id = if i == 0 {
            let root = trie.node_mut(NodeId::ROOT);
            root.visits = visits;
            root.succ_total = succ_total;
            root.species = species;
            root.log_ratio = log_ratio;
            NodeId::ROOT
        } else {
            while matches!(open.last(), Some((_, 0))) {
                open.pop();
            }
            let parent = open.last_mut().ok_or_else(|| malformed("more nodes than the tree holds"))?;
            parent.1 -= 1;
            let node = Trie::loaded_node(word, visits, succ_total, species, log_ratio);
            let id = trie
                .push_loaded(parent.0, node)
                .ok_or_else(|| malformed("duplicate child"))?;
            if trie.node(id).depth as usize > max_depth + 1 {
                return Err(malformed("node deeper than the model allows"));
            }
            id
        };
        open.push((id, children));
    }
    if open.iter().any(|&(_, left)| left > 0) {
        return Err(malformed("fewer nodes than declared children"));
    }
    if d.pos != d.bytes.len() {
        return Err(malformed("unread payload bytes"));
    }

    Ok(Model {
        trie,
        config,
        vocab,
        tokens_seen,
        since_prune,
        frozen,
    })
}

pub fn save<W: Write>(model: &Model, sink: &mut W) -> Result<()> {
    sink.write_all(&to_bytes(model))?;
    Ok(())
}

pub fn load<R: Read>(source: &mut R) -> Result<Model> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    from_bytes(&bytes)
}

pub fn save_to_path(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    save(model, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_from_path(path: impl AsRef<Path>) -> Result<Model> {
    load(&mut BufReader::new(File::open(path)?))
}
