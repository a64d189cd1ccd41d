//! Long-document QA data pipeline: chunk documents, render QA-generation
//! prompts, pull tagged QA pairs out of model responses, build training
//! instances from the data templates, then pack short instances or pad long
//! ones to a fixed sequence length.

mod chunk;
mod extract;
mod instance;
mod pack;
mod records;
mod templates;
mod tokenizer;

use thiserror::Error;

pub use chunk::{chunk_document, DocumentChunk};
pub use extract::{extract_qa, filter_pairs, wrap_qa, ExtractError, QAPair, QaFilter, Tag};
pub use instance::{build_instance, LossPolicy, TrainingInstance};
pub use pack::{pack_short_instances, pad_long_instance, Boundary, PackedBatch, PaddedInstance, DEFAULT_PACK_LENGTH};
pub use records::{read_ndjson, write_ndjson, DocumentRecord, RecordError};
pub use templates::{
    render_qa_prompt, QaStyle, ANSWER, FULL_DOCUMENT, NORMAL_ANSWER_DATA_TEMPLATE,
    NORMAL_ANSWER_PROMPT, QUESTION, SHORT_ANSWER_DATA_TEMPLATE, SHORT_ANSWER_PROMPT, TEXT_CHUNK,
};
pub use tokenizer::{split_pieces, SplitTokenizer, Tokenizer, PAD_ID};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SelfInstructError {
    #[error("document {0:?} is empty")]
    EmptyDocument(String),
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("context budget of {budget} tokens cannot hold {required} tokens of scaffolding, question, answer and chunk")]
    BudgetTooSmall { budget: usize, required: usize },
    #[error("chunk span ({start}, {end}) is outside a document of {doc_len} tokens")]
    ChunkSpanOutOfRange { start: usize, end: usize, doc_len: usize },
    #[error("instance {index} has {len} tokens, more than the sequence length {max}")]
    InstanceTooLong { index: usize, len: usize, max: usize },
    #[error("loss mask has {mask} entries for {tokens} tokens")]
    MaskMismatch { tokens: usize, mask: usize },
}
