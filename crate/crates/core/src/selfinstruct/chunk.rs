use serde::{Deserialize, Serialize};

use super::{SelfInstructError, Tokenizer};

/// A window of a document's token stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentChunk {
    pub doc_id: String,
    pub chunk_index: usize,
    pub text: String,
    /// `[start, end)` in the document's token ids.
    pub token_span: (usize, usize),
}

/// Token windows of `chunk_tokens` with stride `chunk_tokens - overlap`. The
/// last window may be shorter.
pub fn chunk_document(
    doc_id: &str,
    doc: &str,
    tokenizer: &dyn Tokenizer,
    chunk_tokens: usize,
    overlap: usize,
) -> Result<Vec<DocumentChunk>, SelfInstructError> {
    if chunk_tokens == 0 || overlap >= chunk_tokens {
        return Err(SelfInstructError::InvalidSize(format!(
            "need chunk_tokens > overlap >= 0, got {chunk_tokens} and {overlap}"
        )));
    }
    let ids = tokenizer.encode(doc);
    if ids.is_empty() {
        return Err(SelfInstructError::EmptyDocument(doc_id.to_string()));
    }
    Ok(chunk_spans(ids.len(), chunk_tokens, overlap)
        .into_iter()
        .enumerate()
        .map(|(chunk_index, (s, e))| DocumentChunk {
            doc_id: doc_id.to_string(),
            chunk_index,
            text: tokenizer.decode(&ids[s..e]),
            token_span: (s, e),
        })
        .collect())
}

pub(crate) fn chunk_spans(n: usize, chunk_tokens: usize, overlap: usize) -> Vec<(usize, usize)> {
    let stride = chunk_tokens - overlap;
    let mut spans = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + chunk_tokens).min(n);
        spans.push((start, end));
        if end == n {
            break;
        }
        start += stride;
    }
    spans
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selfinstruct::SplitTokenizer;

    fn words(n: usize) -> String {
        (0..n).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn short_doc_single_chunk() {
        let t = SplitTokenizer::new();
        let c = chunk_document("a", &words(10), &t, 20, 0).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].token_span, (0, 10));
        assert_eq!(c[0].text, words(10));
    }

    #[test]
    fn tiling_without_overlap() {
        let t = SplitTokenizer::new();
        let c = chunk_document("a", &words(100), &t, 25, 0).unwrap();
        let spans: Vec<_> = c.iter().map(|c| c.token_span).collect();
        assert_eq!(spans, vec![(0, 25), (25, 50), (50, 75), (75, 100)]);
        let joined: String = c.iter().map(|c| c.text.as_str()).collect();
        assert_eq!(joined, words(100));
    }

    #[test]
    fn overlapping_stride() {
        assert_eq!(chunk_spans(100, 40, 10), vec![(0, 40), (30, 70), (60, 100)]);
    }

    #[test]
    fn errors() {
        let t = SplitTokenizer::new();
        assert!(matches!(
            chunk_document("a", "", &t, 10, 0),
            Err(SelfInstructError::EmptyDocument(_))
        ));
        assert!(chunk_document("a", "x", &t, 10, 10).is_err());
        assert!(chunk_document("a", "x", &t, 0, 0).is_err());
    }
}
