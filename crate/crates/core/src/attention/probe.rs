use std::collections::HashMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::AttentionError;
use crate::exec::Exec;
use crate::export::{csv_table, fmt_f64};
use crate::pe::{decay_score, PeVariant};

/// Softmax of the last query row over all keys when every query and key is
/// the all-ones vector. Entry `n` is the weight on key position `n`.
///
/// Logits are `scale * g(seq_len - 1 - n)` with `g` the raw decay score.
pub fn allones_attention_distribution(
    exec: Exec,
    variant: &PeVariant,
    seq_len: usize,
    score_scale: f64,
) -> Result<Vec<f64>, AttentionError> {
    if seq_len == 0 {
        return Err(AttentionError::InvalidSize("seq_len must be >= 1".into()));
    }
    let last = seq_len - 1;
    let logits = exec.map(seq_len, |n| score_scale * decay_score(variant, (last - n) as f64));
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Attention mass the final position puts on `target` under all-ones
/// queries and keys with the default `1/sqrt(d)` scale.
pub fn allones_attention_mass(
    variant: &PeVariant,
    seq_len: usize,
    target: usize,
) -> Result<f64, AttentionError> {
    if target >= seq_len {
        return Err(AttentionError::TargetOutOfRange { target, seq_len });
    }
    let scale = (variant.head_dim() as f64).sqrt().recip();
    let dist = allones_attention_distribution(Exec::default(), variant, seq_len, scale)?;
    Ok(dist[target])
}

/// `seq_len,variant,mass_on_first` CSV.
pub fn probe_mass_csv(rows: &[(usize, PeVariant, f64)]) -> String {
    csv_table(
        &["seq_len", "variant", "mass_on_first"],
        rows.iter()
            .map(|(l, v, m)| vec![l.to_string(), v.label(), fmt_f64(*m)]),
    )
}

/// Synthetic "return the first sentence" task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProbeTask {
    pub sentences: Vec<Vec<u32>>,
    pub full_sequence: Vec<u32>,
    pub first_sentence_span: (usize, usize),
    pub context_length: usize,
}

impl ProbeTask {
    pub fn first_sentence(&self) -> &[u32] {
        let (s, e) = self.first_sentence_span;
        &self.full_sequence[s..e]
    }
}

/// Marker ids live above the filler vocabulary so they never collide.
const FILLER_VOCAB: u32 = 32_000;
const MARKER_SPACE: usize = 1 << 20;

/// Builds `n_sentences` random sentences. Each sentence opens with a marker
/// token unique within the task; the rest is filler.
pub fn make_first_sentence_task(
    n_sentences: usize,
    tokens_per_sentence: usize,
    seed: u64,
) -> Result<ProbeTask, AttentionError> {
    if n_sentences == 0 || tokens_per_sentence == 0 {
        return Err(AttentionError::InvalidSize(format!(
            "need at least one sentence and one token per sentence, got {n_sentences} x {tokens_per_sentence}"
        )));
    }
    if n_sentences > MARKER_SPACE {
        return Err(AttentionError::InvalidSize(format!(
            "at most {MARKER_SPACE} sentences"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let markers = sample(&mut rng, MARKER_SPACE, n_sentences);
    let sentences: Vec<Vec<u32>> = markers
        .iter()
        .map(|m| {
            std::iter::once(FILLER_VOCAB + m as u32)
                .chain((1..tokens_per_sentence).map(|_| rng.random_range(1..FILLER_VOCAB)))
                .collect()
        })
        .collect();
    let full_sequence: Vec<u32> = sentences.iter().flatten().copied().collect();
    Ok(ProbeTask {
        context_length: full_sequence.len(),
        first_sentence_span: (0, tokens_per_sentence),
        sentences,
        full_sequence,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FirstSentenceScore {
    pub exact_match: bool,
    /// Multiset overlap with the gold span, divided by the span length.
    pub token_overlap: f64,
}

pub fn score_first_sentence(task: &ProbeTask, response: &[u32]) -> FirstSentenceScore {
    let gold = task.first_sentence();
    let mut counts: HashMap<u32, usize> = HashMap::new();
    for &t in gold {
        *counts.entry(t).or_default() += 1;
    }
    let mut hits = 0usize;
    for t in response {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                hits += 1;
            }
        }
    }
    FirstSentenceScore {
        exact_match: response == gold,
        token_overlap: if gold.is_empty() {
            0.0
        } else {
            hits as f64 / gold.len() as f64
        },
    }
}
