//! QA-generation prompts and long-context data templates, stored verbatim.
//! Line-final spaces are part of the templates.

use serde::{Deserialize, Serialize};

use super::DocumentChunk;

pub const TEXT_CHUNK: &str = "{TEXT_CHUNK}";
pub const FULL_DOCUMENT: &str = "{FULL_DOCUMENT}";
pub const QUESTION: &str = "{QUESTION}";
pub const ANSWER: &str = "{ANSWER}";

pub const NORMAL_ANSWER_PROMPT: &str = concat!(
    "[INST] You are given a text chunk (delimited by triple quotes) taken from a long \n",
    "text. Write a question about this text and provide the correct answer. The answer \n",
    "needs to be based on the text. This question will later be used as a reading \n",
    "comprehension test over the entire document. Wrap the question and answer using \n",
    "XML tags (<question> and </question>, <answer> and </answer>).\n",
    "\"\"\"\n",
    "{TEXT_CHUNK}\n",
    "\"\"\"\n",
    "[/INST]",
);

pub const SHORT_ANSWER_PROMPT: &str = concat!(
    "[INST] You are given a text chunk (delimited by triple quotes) from a long \n",
    "document. Based on information from the text, come up with a specific question \n",
    "**which can be answered in a few words or a single phrase** and provide the \n",
    "correct answer without explanation. The answer needs to be based on the text. \n",
    "This question will later be used as a reading comprehension test over the \n",
    "entire document. Wrap the question and answer using XML tags (<question> \n",
    "and </question>, <answer> and </answer>). Again, the answer needs to be short.\n",
    "\"\"\"\n",
    "{TEXT_CHUNK}\n",
    "\"\"\"\n",
    "[/INST]",
);

pub const NORMAL_ANSWER_DATA_TEMPLATE: &str = concat!(
    "[INST] You are given a long text (delimited by triple quotes) and a question. \n",
    "Read the text and answer the question in the end.\n",
    "\"\"\"\n",
    "{FULL_DOCUMENT}\n",
    "\"\"\"\n",
    "Question: {QUESTION} \n",
    "[/INST]\n",
    "{ANSWER}",
);

pub const SHORT_ANSWER_DATA_TEMPLATE: &str = concat!(
    "[INST] You are given a long text (delimited by triple quotes) and a question. \n",
    "Read the text and answer the question in the end as concisely as you can, \n",
    "using a single phrase or sentence if possible. Do not provide any explanation.\n",
    "\"\"\"\n",
    "{FULL_DOCUMENT}\n",
    "\"\"\"\n",
    "Question: {QUESTION} \n",
    "[/INST]\n",
    "{ANSWER}",
);

/// Long-form or short-form answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QaStyle {
    #[default]
    Normal,
    Short,
}

impl QaStyle {
    pub fn generation_prompt(self) -> &'static str {
        match self {
            QaStyle::Normal => NORMAL_ANSWER_PROMPT,
            QaStyle::Short => SHORT_ANSWER_PROMPT,
        }
    }

    pub fn data_template(self) -> &'static str {
        match self {
            QaStyle::Normal => NORMAL_ANSWER_DATA_TEMPLATE,
            QaStyle::Short => SHORT_ANSWER_DATA_TEMPLATE,
        }
    }
}

/// Splits `template` around its single `placeholder`.
pub(crate) fn split_at_placeholder<'a>(template: &'a str, placeholder: &str) -> (&'a str, &'a str) {
    let at = template
        .find(placeholder)
        .expect("template contains placeholder");
    (&template[..at], &template[at + placeholder.len()..])
}

/// Instantiates the QA-generation prompt for `chunk`. Only the chunk
/// placeholder changes; everything else is byte-identical to the template.
pub fn render_qa_prompt(chunk: &DocumentChunk, style: QaStyle) -> String {
    let (head, tail) = split_at_placeholder(style.generation_prompt(), TEXT_CHUNK);
    let mut out = String::with_capacity(head.len() + chunk.text.len() + tail.len());
    out.push_str(head);
    out.push_str(&chunk.text);
    out.push_str(tail);
    out
}

/// The three literal pieces of a data template around the document and
/// question placeholders; the answer placeholder ends the template.
pub(crate) struct DataTemplateParts {
    pub before_document: &'static str,
    pub before_question: &'static str,
    pub after_question: &'static str,
}

pub(crate) fn data_template_parts(style: QaStyle) -> DataTemplateParts {
    let (before_document, rest) = split_at_placeholder(style.data_template(), FULL_DOCUMENT);
    let (before_question, rest) = split_at_placeholder(rest, QUESTION);
    let (after_question, trailer) = split_at_placeholder(rest, ANSWER);
    debug_assert!(trailer.is_empty());
    DataTemplateParts {
        before_document,
        before_question,
        after_question,
    }
}
