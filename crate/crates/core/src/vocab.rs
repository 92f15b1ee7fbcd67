//! The 128-token alphabet and its text mapping.
//!
//! Id layout:
//!
//! | ids      | class       | contents                                   |
//! |----------|-------------|--------------------------------------------|
//! | 0        | special     | CTC blank                                  |
//! | 1..=5    | special     | pad, SOS, EOS, space, UNK                  |
//! | 6..=31   | letter      | `a`..`z`                                   |
//! | 32..=41  | digit       | `0`..`9`                                   |
//! | 42..=57  | punctuation | [`PUNCTUATION`], ASCII order               |
//! | 58..=101 | command     | [`COMMANDS`]                               |
//! | 102..=127| reserved    | unused; still own a chip so the bank is full |

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const VOCAB_SIZE: usize = 128;

/// Sixteen punctuation marks, in ASCII order.
pub const PUNCTUATION: [char; 16] = [
    '!', '"', '#', '%', '&', '\'', '(', ')', ',', '-', '.', '/', ':', ';', '?', '@',
];

/// The 44 robot command tokens. The first three are the ones every deployment
/// needs; the rest are a fixed table of motion, manipulation and link verbs.
pub const COMMANDS: [&str; 44] = [
    "<STOP>", "<ACK>", "<SCAN>", "<GO>", "<BACK>", "<LEFT>", "<RIGHT>", "<UP>", "<DOWN>",
    "<FWD>", "<TURN>", "<HALT>", "<WAIT>", "<PAUSE>", "<RESUME>", "<START>", "<HOME>",
    "<DOCK>", "<CHARGE>", "<GRAB>", "<DROP>", "<LIFT>", "<LOWER>", "<OPEN>", "<CLOSE>",
    "<FOLLOW>", "<LOCATE>", "<REPORT>", "<STATUS>", "<NACK>", "<RETRY>", "<RESET>", "<LOCK>",
    "<UNLOCK>", "<SPEED>", "<SLOW>", "<FAST>", "<ROTATE>", "<ALIGN>", "<PATROL>", "<RETURN>",
    "<MAP>", "<PING>", "<ALERT>",
];

/// Surface rendered for UNK. It is itself an unmapped character, so it
/// tokenizes back to UNK.
pub const UNK_SURFACE: &str = "\u{FFFD}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(u8);

impl TokenId {
    pub const BLANK: TokenId = TokenId(0);
    pub const PAD: TokenId = TokenId(1);
    pub const SOS: TokenId = TokenId(2);
    pub const EOS: TokenId = TokenId(3);
    pub const SPACE: TokenId = TokenId(4);
    pub const UNK: TokenId = TokenId(5);

    pub fn new(id: usize) -> Result<Self> {
        if id < VOCAB_SIZE {
            Ok(Self(id as u8))
        } else {
            Err(Error::InvalidTokenId(id))
        }
    }

    /// Every id in the alphabet, reserved ones included.
    pub fn all() -> impl Iterator<Item = TokenId> {
        (0..VOCAB_SIZE as u8).map(TokenId)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenClass {
    Letter,
    Digit,
    Punct,
    Special,
    Command,
    Reserved,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabEntry {
    pub id: TokenId,
    pub surface: String,
    pub class: TokenClass,
}

/// The alphabet. Immutable once built.
#[derive(Debug, Clone)]
pub struct Vocab {
    entries: Vec<VocabEntry>,
    by_surface: HashMap<String, TokenId>,
    max_surface_chars: usize,
}

impl PartialEq for Vocab {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

/// Returns the canonical table.
pub fn build_vocab() -> Vocab {
    let mut entries = Vec::with_capacity(VOCAB_SIZE);
    fn push(entries: &mut Vec<VocabEntry>, surface: String, class: TokenClass) {
        let id = TokenId(entries.len() as u8);
        entries.push(VocabEntry { id, surface, class });
    }
    for s in ["<blank>", "<pad>", "<sos>", "<eos>", " ", UNK_SURFACE] {
        push(&mut entries, s.to_string(), TokenClass::Special);
    }
    for c in 'a'..='z' {
        push(&mut entries, c.to_string(), TokenClass::Letter);
    }
    for c in '0'..='9' {
        push(&mut entries, c.to_string(), TokenClass::Digit);
    }
    for c in PUNCTUATION {
        push(&mut entries, c.to_string(), TokenClass::Punct);
    }
    for c in COMMANDS {
        push(&mut entries, c.to_string(), TokenClass::Command);
    }
    while entries.len() < VOCAB_SIZE {
        let s = format!("<reserved{}>", entries.len());
        push(&mut entries, s, TokenClass::Reserved);
    }
    Vocab::from_entries(entries).expect("canonical table is valid")
}

impl Vocab {
    /// Validates and indexes a table (ids must be 0..128 in order, surfaces unique).
    pub fn from_entries(entries: Vec<VocabEntry>) -> Result<Self> {
        if entries.len() != VOCAB_SIZE {
            return Err(Error::InvalidVocab(format!(
                "expected {VOCAB_SIZE} entries, got {}",
                entries.len()
            )));
        }
        let mut by_surface = HashMap::with_capacity(VOCAB_SIZE);
        for (i, e) in entries.iter().enumerate() {
            if e.id.index() != i {
                return Err(Error::InvalidVocab(format!("entry {i} has id {}", e.id)));
            }
            if e.surface.is_empty() {
                return Err(Error::InvalidVocab(format!("entry {i} has an empty surface")));
            }
            if by_surface.insert(e.surface.clone(), e.id).is_some() {
                return Err(Error::InvalidVocab(format!("duplicate surface {:?}", e.surface)));
            }
        }
        let max_surface_chars = entries
            .iter()
            .filter(|e| is_matchable(e))
            .map(|e| e.surface.chars().count())
            .max()
            .unwrap_or(1);
        Ok(Self {
            entries,
            by_surface,
            max_surface_chars,
        })
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    pub fn entry(&self, id: TokenId) -> &VocabEntry {
        &self.entries[id.index()]
    }

    pub fn id_of(&self, surface: &str) -> Option<TokenId> {
        self.by_surface.get(surface).copied()
    }

    pub fn ids_of_class(&self, class: TokenClass) -> Vec<TokenId> {
        self.entries
            .iter()
            .filter(|e| e.class == class)
            .map(|e| e.id)
            .collect()
    }

    /// Tokens that render to visible text: space, letters, digits,
    /// punctuation and commands.
    pub fn printable_ids(&self) -> Vec<TokenId> {
        self.entries
            .iter()
            .filter(|e| is_matchable(e))
            .map(|e| e.id)
            .collect()
    }

    /// Longest-match tokenization. Characters with no entry become UNK.
    pub fn tokenize(&self, text: &str) -> Vec<TokenId> {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut out = Vec::with_capacity(chars.len());
        let mut i = 0;
        while i < chars.len() {
            let start = chars[i].0;
            let mut matched = None;
            let longest = self.max_surface_chars.min(chars.len() - i);
            for n in (1..=longest).rev() {
                let end = chars.get(i + n).map_or(text.len(), |&(b, _)| b);
                if let Some(&id) = self.by_surface.get(&text[start..end]) {
                    if is_matchable(self.entry(id)) {
                        matched = Some((id, n));
                        break;
                    }
                }
            }
            match matched {
                Some((id, n)) => {
                    out.push(id);
                    i += n;
                }
                None => {
                    out.push(TokenId::UNK);
                    i += 1;
                }
            }
        }
        out
    }

    /// Concatenates surfaces. Blank, pad, SOS and EOS render as nothing.
    pub fn detokenize(&self, ids: &[TokenId]) -> String {
        let mut s = String::new();
        for &id in ids {
            match id {
                TokenId::BLANK | TokenId::PAD | TokenId::SOS | TokenId::EOS => {}
                _ => s.push_str(&self.entry(id).surface),
            }
        }
        s
    }

    /// Like [`Vocab::detokenize`] but for raw integer ids, rejecting ids ≥ 128.
    pub fn detokenize_raw(&self, ids: &[usize]) -> Result<String> {
        let ids = ids
            .iter()
            .map(|&i| TokenId::new(i))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.detokenize(&ids))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.entries)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let entries: Vec<VocabEntry> = serde_json::from_str(json)?;
        Self::from_entries(entries)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn is_matchable(e: &VocabEntry) -> bool {
    match e.class {
        TokenClass::Letter | TokenClass::Digit | TokenClass::Punct | TokenClass::Command => true,
        TokenClass::Special => e.id == TokenId::SPACE,
        TokenClass::Reserved => false,
    }
}
