use std::collections::HashMap;
use std::sync::RwLock;

/// Text <-> token id mapping used by the data pipeline.
pub trait Tokenizer: Sync {
    fn encode(&self, text: &str) -> Vec<u32>;
    fn decode(&self, ids: &[u32]) -> String;
    /// Reserved id never produced by [`Tokenizer::encode`].
    fn pad_id(&self) -> u32;
}

/// Deterministic word/punctuation splitter.
///
/// A token is an optional run of leading whitespace followed by either a
/// maximal alphanumeric run or a single other character; trailing whitespace
/// at the end of the text forms its own token. Ids are a stable FNV-1a hash
/// of the token text, so the same string always maps to the same id. Id 0 is
/// the pad token.
///
/// Decoding needs the id -> text table built up by `encode`, so only ids
/// this instance has produced decode back to text; unknown ids decode to
/// U+FFFD.
#[derive(Debug, Default)]
pub struct SplitTokenizer {
    vocab: RwLock<HashMap<u32, String>>,
}

pub const PAD_ID: u32 = 0;

fn fnv1a(s: &str) -> u32 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let folded = (h ^ (h >> 32)) as u32;
    if folded == PAD_ID {
        1
    } else {
        folded
    }
}

/// Splits text into the token strings described on [`SplitTokenizer`].
pub fn split_pieces(text: &str) -> Vec<&str> {
    let mut pieces = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        let end = if c.is_alphanumeric() {
            let mut end = i;
            while let Some(&(j, d)) = chars.peek() {
                if !d.is_alphanumeric() {
                    break;
                }
                end = j + d.len_utf8();
                chars.next();
            }
            end
        } else {
            chars.next();
            i + c.len_utf8()
        };
        pieces.push(&text[start..end]);
        start = end;
    }
    if start < text.len() {
        pieces.push(&text[start..]);
    }
    pieces
}

impl SplitTokenizer {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Tokenizer for SplitTokenizer {
    fn encode(&self, text: &str) -> Vec<u32> {
        let pieces = split_pieces(text);
        let ids: Vec<u32> = pieces.iter().map(|p| fnv1a(p)).collect();
        let missing: Vec<(u32, &str)> = {
            let vocab = self.vocab.read().expect("vocab lock");
            ids.iter()
                .zip(&pieces)
                .filter(|(id, _)| !vocab.contains_key(id))
                .map(|(id, p)| (*id, *p))
                .collect()
        };
        if !missing.is_empty() {
            let mut vocab = self.vocab.write().expect("vocab lock");
            for (id, p) in missing {
                vocab.entry(id).or_insert_with(|| p.to_string());
            }
        }
        ids
    }

    fn decode(&self, ids: &[u32]) -> String {
        let vocab = self.vocab.read().expect("vocab lock");
        ids.iter()
            .filter(|&&id| id != PAD_ID)
            .map(|id| vocab.get(id).map(String::as_str).unwrap_or("\u{FFFD}"))
            .collect()
    }

    fn pad_id(&self) -> u32 {
        PAD_ID
    }
}
