//! Token id ↔ byte-string table and the prefix trie used by transduction.
//!
//! On disk a vocabulary is JSON lines: a header `{"eos_id": N, "size": M}`
//! followed by exactly `M` entries `{"id": i, "bytes_b64": "..."}` with ids
//! `0..M` in order. Token bytes are base64 because byte-level tokens are not
//! necessarily valid UTF-8.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type TokenId = u32;

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: expected id {expected}, found {found}")]
    IdGap { line: usize, expected: TokenId, found: TokenId },
    #[error("expected {expected} entries, found {found}")]
    WrongCount { expected: usize, found: usize },
    #[error("eos id {eos_id} missing from a vocabulary of size {size}")]
    MissingEos { eos_id: TokenId, size: usize },
    #[error("token {0} has an empty byte string (only the EOS token may)")]
    EmptyToken(TokenId),
    #[error("unknown token id {0}")]
    UnknownId(TokenId),
    #[error("cannot tokenize byte {byte:#04x} at offset {offset}")]
    Untokenizable { offset: usize, byte: u8 },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    eos_id: TokenId,
    size: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Entry {
    id: TokenId,
    bytes_b64: String,
}

/// Dense id → bytes table with a designated end-of-sequence id.
///
/// The EOS entry always holds the empty byte string: it is a control token
/// and never consumes pattern bytes. Duplicate byte strings across ids are
/// allowed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<Vec<u8>>,
    eos_id: TokenId,
}

impl Vocabulary {
    /// Builds a vocabulary from `entries` indexed by id. Whatever bytes sit at
    /// `eos_id` are discarded.
    pub fn new(mut entries: Vec<Vec<u8>>, eos_id: TokenId) -> Result<Self, VocabError> {
        if eos_id as usize >= entries.len() {
            return Err(VocabError::MissingEos { eos_id, size: entries.len() });
        }
        entries[eos_id as usize].clear();
        if let Some(i) = entries.iter().enumerate().position(|(i, e)| e.is_empty() && i != eos_id as usize) {
            return Err(VocabError::EmptyToken(i as TokenId));
        }
        Ok(Vocabulary { entries, eos_id })
    }

    /// Convenience constructor: `tokens` get ids `0..n`, EOS gets id `n`.
    pub fn from_strs<S: AsRef<[u8]>>(tokens: &[S]) -> Self {
        let mut entries: Vec<Vec<u8>> = tokens.iter().map(|t| t.as_ref().to_vec()).collect();
        let eos = entries.len() as TokenId;
        entries.push(Vec::new());
        Self::new(entries, eos).expect("non-empty token strings")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, VocabError> {
        Self::read(BufReader::new(File::open(path)?))
    }

    pub fn read(reader: impl BufRead) -> Result<Self, VocabError> {
        let mut lines = reader.lines().enumerate().filter_map(|(i, l)| match l {
            Ok(l) if l.trim().is_empty() => None,
            other => Some((i + 1, other)),
        });
        let (line, header) = lines
            .next()
            .ok_or(VocabError::Parse { line: 1, reason: "missing header".into() })?;
        let header: Header = serde_json::from_str(&header?)
            .map_err(|e| VocabError::Parse { line, reason: e.to_string() })?;

        let mut entries = Vec::with_capacity(header.size);
        for (line, text) in lines {
            let entry: Entry = serde_json::from_str(&text?)
                .map_err(|e| VocabError::Parse { line, reason: e.to_string() })?;
            let expected = entries.len() as TokenId;
            if entry.id != expected {
                return Err(VocabError::IdGap { line, expected, found: entry.id });
            }
            let bytes = B64
                .decode(entry.bytes_b64.as_bytes())
                .map_err(|e| VocabError::Parse { line, reason: format!("bad base64: {e}") })?;
            entries.push(bytes);
        }
        if entries.len() != header.size {
            return Err(VocabError::WrongCount { expected: header.size, found: entries.len() });
        }
        Self::new(entries, header.eos_id)
    }

    pub fn write(&self, mut w: impl Write) -> io::Result<()> {
        let header = Header { eos_id: self.eos_id, size: self.entries.len() };
        writeln!(w, "{}", serde_json::to_string(&header)?)?;
        for (id, bytes) in self.entries.iter().enumerate() {
            let e = Entry { id: id as TokenId, bytes_b64: B64.encode(bytes) };
            writeln!(w, "{}", serde_json::to_string(&e)?)?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> io::Result<()> {
        let mut f = io::BufWriter::new(File::create(path)?);
        self.write(&mut f)?;
        f.flush()
    }

    pub fn size(&self) -> usize {
        self.entries.len()
    }

    pub fn eos_id(&self) -> TokenId {
        self.eos_id
    }

    pub fn bytes(&self, id: TokenId) -> Option<&[u8]> {
        self.entries.get(id as usize).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (TokenId, &[u8])> {
        self.entries.iter().enumerate().map(|(i, b)| (i as TokenId, b.as_slice()))
    }

    /// Concatenated bytes of `tokens`; EOS contributes nothing.
    pub fn decode(&self, tokens: &[TokenId]) -> Result<Vec<u8>, VocabError> {
        let mut out = Vec::new();
        for &t in tokens {
            out.extend_from_slice(self.bytes(t).ok_or(VocabError::UnknownId(t))?);
        }
        Ok(out)
    }

    /// Greedy longest-match tokenization of `text`.
    pub fn encode_greedy(&self, trie: &TokenTrie, text: &[u8]) -> Result<Vec<TokenId>, VocabError> {
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < text.len() {
            let (len, id) = trie
                .longest_prefix(&text[pos..])
                .ok_or(VocabError::Untokenizable { offset: pos, byte: text[pos] })?;
            out.push(id);
            pos += len;
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, Default)]
pub struct TrieNode {
    /// Sorted by byte.
    children: Vec<(u8, u32)>,
    /// Token ids whose bytes end here, ascending.
    terminals: Vec<TokenId>,
}

impl TrieNode {
    pub fn children(&self) -> &[(u8, u32)] {
        &self.children
    }

    pub fn terminals(&self) -> &[TokenId] {
        &self.terminals
    }
}

/// Byte trie over every non-EOS token string. Node 0 is the root.
#[derive(Clone, Debug)]
pub struct TokenTrie {
    nodes: Vec<TrieNode>,
}

impl TokenTrie {
    pub const ROOT: u32 = 0;

    pub fn build(vocab: &Vocabulary) -> Self {
        let mut nodes = vec![TrieNode::default()];
        for (id, bytes) in vocab.iter() {
            if id == vocab.eos_id() {
                continue;
            }
            let mut cur = 0usize;
            for &b in bytes {
                cur = match nodes[cur].children.binary_search_by_key(&b, |&(c, _)| c) {
                    Ok(i) => nodes[cur].children[i].1 as usize,
                    Err(i) => {
                        let next = nodes.len();
                        nodes.push(TrieNode::default());
                        nodes[cur].children.insert(i, (b, next as u32));
                        next
                    }
                };
            }
            nodes[cur].terminals.push(id);
        }
        TokenTrie { nodes }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, id: u32) -> &TrieNode {
        &self.nodes[id as usize]
    }

    pub fn child(&self, node: u32, b: u8) -> Option<u32> {
        let children = &self.nodes[node as usize].children;
        children.binary_search_by_key(&b, |&(c, _)| c).ok().map(|i| children[i].1)
    }

    /// Token ids whose byte string is exactly `bytes`.
    pub fn lookup(&self, bytes: &[u8]) -> &[TokenId] {
        let mut cur = Self::ROOT;
        for &b in bytes {
            match self.child(cur, b) {
                Some(n) => cur = n,
                None => return &[],
            }
        }
        &self.nodes[cur as usize].terminals
    }

    /// Length and lowest id of the longest token that prefixes `text`.
    pub fn longest_prefix(&self, text: &[u8]) -> Option<(usize, TokenId)> {
        let mut best = None;
        let mut cur = Self::ROOT;
        for (i, &b) in text.iter().enumerate() {
            match self.child(cur, b) {
                Some(n) => cur = n,
                None => break,
            }
            if let Some(&id) = self.nodes[cur as usize].terminals.first() {
                best = Some((i + 1, id));
            }
        }
        best
    }
}
