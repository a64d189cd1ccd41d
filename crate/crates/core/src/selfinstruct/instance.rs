use serde::{Deserialize, Serialize};

use super::templates::data_template_parts;
use super::{DocumentChunk, QAPair, SelfInstructError, Tokenizer};

/// Which tokens carry language-modeling loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossPolicy {
    /// Only response tokens.
    #[default]
    OutputOnly,
    /// Prompt and response tokens.
    IncludeInputLmLoss,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingInstance {
    pub prompt: String,
    pub response: String,
    pub token_ids: Vec<u32>,
    pub loss_mask: Vec<bool>,
    #[serde(skip)]
    pub loss_policy: LossPolicy,
    /// Document token range placed in the prompt.
    #[serde(skip)]
    pub document_window: Option<(usize, usize)>,
}

impl TrainingInstance {
    /// Instance from already-tokenized prompt and response.
    pub fn from_parts(
        prompt: String,
        response: String,
        prompt_ids: Vec<u32>,
        response_ids: &[u32],
        policy: LossPolicy,
    ) -> Self {
        let prompt_mask = policy == LossPolicy::IncludeInputLmLoss;
        let mut loss_mask = vec![prompt_mask; prompt_ids.len()];
        loss_mask.resize(prompt_ids.len() + response_ids.len(), true);
        let mut token_ids = prompt_ids;
        token_ids.extend_from_slice(response_ids);
        Self {
            prompt,
            response,
            token_ids,
            loss_mask,
            loss_policy: policy,
            document_window: None,
        }
    }

    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    pub(crate) fn check_mask(&self) -> Result<(), SelfInstructError> {
        if self.loss_mask.len() != self.token_ids.len() {
            return Err(SelfInstructError::MaskMismatch {
                tokens: self.token_ids.len(),
                mask: self.loss_mask.len(),
            });
        }
        Ok(())
    }
}

/// Document range of `budget` tokens that keeps `[s, e)`: the document
/// prefix when the chunk lies inside it, else a window centered on the chunk
/// and shifted back inside the document.
pub(crate) fn document_window(doc_len: usize, span: (usize, usize), budget: usize) -> (usize, usize) {
    if doc_len <= budget {
        return (0, doc_len);
    }
    let (s, e) = span;
    if e <= budget {
        return (0, budget);
    }
    let mid = (s + e) / 2;
    let start = mid.saturating_sub(budget / 2).min(doc_len - budget);
    (start, start + budget)
}

/// Fills the style's data template with the (possibly truncated) document and
/// the question; the answer becomes the response.
///
/// `max_context_tokens` bounds the whole instance. Token ids are the
/// concatenation of each template segment's encoding, so the document window
/// lands on exact token boundaries.
pub fn build_instance(
    full_doc: &str,
    chunk: &DocumentChunk,
    qa: &QAPair,
    tokenizer: &dyn Tokenizer,
    max_context_tokens: usize,
    loss_policy: LossPolicy,
) -> Result<TrainingInstance, SelfInstructError> {
    let doc_ids = tokenizer.encode(full_doc);
    let (s, e) = chunk.token_span;
    if s >= e || e > doc_ids.len() {
        return Err(SelfInstructError::ChunkSpanOutOfRange {
            start: s,
            end: e,
            doc_len: doc_ids.len(),
        });
    }
    let parts = data_template_parts(qa.style);
    let head = tokenizer.encode(parts.before_document);
    let mid = tokenizer.encode(parts.before_question);
    let question = tokenizer.encode(&qa.question);
    let tail = tokenizer.encode(parts.after_question);
    let answer = tokenizer.encode(&qa.answer);
    let fixed = head.len() + mid.len() + question.len() + tail.len() + answer.len();
    if max_context_tokens < fixed + (e - s) {
        return Err(SelfInstructError::BudgetTooSmall {
            budget: max_context_tokens,
            required: fixed + (e - s),
        });
    }
    let (ws, we) = document_window(doc_ids.len(), (s, e), max_context_tokens - fixed);
    let window = &doc_ids[ws..we];

    let prompt = [
        parts.before_document,
        &tokenizer.decode(window),
        parts.before_question,
        &qa.question,
        parts.after_question,
    ]
    .concat();
    let prompt_ids: Vec<u32> = [&head[..], window, &mid, &question, &tail].concat();
    let mut inst =
        TrainingInstance::from_parts(prompt, qa.answer.clone(), prompt_ids, &answer, loss_policy);
    inst.document_window = Some((ws, we));
    Ok(inst)
}
