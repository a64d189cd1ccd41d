use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{DocumentChunk, QaStyle};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAPair {
    pub question: String,
    pub answer: String,
    #[serde(default)]
    pub style: QaStyle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tag {
    Question,
    Answer,
}

impl Tag {
    fn name(self) -> &'static str {
        match self {
            Tag::Question => "question",
            Tag::Answer => "answer",
        }
    }
}

impl std::fmt::Display for Tag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("missing <{0}> tag")]
    MissingTag(Tag),
    #[error("unbalanced <{0}> tag")]
    UnbalancedTag(Tag),
    #[error("empty <{0}> field")]
    EmptyField(Tag),
}

/// Contents of the first `<tag>...</tag>` span, trimmed.
fn first_span(text: &str, tag: Tag) -> Result<&str, ExtractError> {
    let open = format!("<{}>", tag.name());
    let close = format!("</{}>", tag.name());
    let Some(start) = text.find(&open) else {
        return Err(if text.contains(&close) {
            ExtractError::UnbalancedTag(tag)
        } else {
            ExtractError::MissingTag(tag)
        });
    };
    let body_start = start + open.len();
    let Some(len) = text[body_start..].find(&close) else {
        return Err(ExtractError::UnbalancedTag(tag));
    };
    let body = text[body_start..body_start + len].trim();
    if body.is_empty() {
        return Err(ExtractError::EmptyField(tag));
    }
    Ok(body)
}

/// Pulls the first question and answer out of a tagged model response.
/// Surrounding prose is ignored; tags are case-sensitive.
pub fn extract_qa(response: &str, style: QaStyle) -> Result<QAPair, ExtractError> {
    let question = first_span(response, Tag::Question)?;
    let answer = first_span(response, Tag::Answer)?;
    Ok(QAPair {
        question: question.to_string(),
        answer: answer.to_string(),
        style,
    })
}

/// Wraps a pair in the tags `extract_qa` expects.
pub fn wrap_qa(pair: &QAPair) -> String {
    format!(
        "<question>{}</question>\n<answer>{}</answer>",
        pair.question, pair.answer
    )
}

/// Accept/reject hook applied to generated pairs before instance building,
/// e.g. a verification pass that re-checks the answer against its chunk.
pub trait QaFilter {
    fn accept(&self, pair: &QAPair, chunk: &DocumentChunk) -> bool;
}

impl<F> QaFilter for F
where
    F: Fn(&QAPair, &DocumentChunk) -> bool,
{
    fn accept(&self, pair: &QAPair, chunk: &DocumentChunk) -> bool {
        self(pair, chunk)
    }
}

/// Keeps the pairs the filter accepts, in order.
pub fn filter_pairs<'a>(
    pairs: impl IntoIterator<Item = (QAPair, &'a DocumentChunk)>,
    filter: &dyn QaFilter,
) -> Vec<(QAPair, &'a DocumentChunk)> {
    pairs
        .into_iter()
        .filter(|(p, c)| filter.accept(p, c))
        .collect()
}
