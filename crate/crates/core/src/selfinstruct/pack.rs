use serde::{Deserialize, Serialize};

use super::{SelfInstructError, TrainingInstance};

pub const DEFAULT_PACK_LENGTH: usize = 16_384;

/// Slice `[start, end)` of a packed sequence holding tokens of one instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Boundary {
    pub instance_id: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackedBatch {
    pub sequence_length: usize,
    pub sequences: Vec<Vec<u32>>,
    pub loss_masks: Vec<Vec<bool>>,
    pub boundaries: Vec<Vec<Boundary>>,
    /// Tokens of the trailing partial sequence.
    pub dropped_tokens: usize,
}

/// Concatenates instances in order and cuts the stream every `seq_len`
/// tokens. Instances may straddle a cut. The trailing partial sequence is
/// dropped.
pub fn pack_short_instances(
    instances: &[TrainingInstance],
    seq_len: usize,
) -> Result<PackedBatch, SelfInstructError> {
    if seq_len == 0 {
        return Err(SelfInstructError::InvalidSize("sequence length must be >= 1".into()));
    }
    for (index, inst) in instances.iter().enumerate() {
        inst.check_mask()?;
        if inst.len() > seq_len {
            return Err(SelfInstructError::InstanceTooLong {
                index,
                len: inst.len(),
                max: seq_len,
            });
        }
    }
    let mut batch = PackedBatch {
        sequence_length: seq_len,
        sequences: Vec::new(),
        loss_masks: Vec::new(),
        boundaries: Vec::new(),
        dropped_tokens: 0,
    };
    let mut seq = Vec::with_capacity(seq_len);
    let mut mask = Vec::with_capacity(seq_len);
    let mut bounds = Vec::new();
    for (instance_id, inst) in instances.iter().enumerate() {
        let mut pos = 0;
        while pos < inst.len() {
            let take = (seq_len - seq.len()).min(inst.len() - pos);
            let start = seq.len();
            seq.extend_from_slice(&inst.token_ids[pos..pos + take]);
            mask.extend_from_slice(&inst.loss_mask[pos..pos + take]);
            bounds.push(Boundary {
                instance_id,
                start,
                end: start + take,
            });
            pos += take;
            if seq.len() == seq_len {
                batch.sequences.push(std::mem::take(&mut seq));
                batch.loss_masks.push(std::mem::take(&mut mask));
                batch.boundaries.push(std::mem::take(&mut bounds));
            }
        }
    }
    batch.dropped_tokens = seq.len();
    Ok(batch)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaddedInstance {
    pub token_ids: Vec<u32>,
    pub loss_mask: Vec<bool>,
}

/// Right-pads to exactly `seq_len` tokens; pad positions carry no loss.
pub fn pad_long_instance(
    instance: &TrainingInstance,
    seq_len: usize,
    pad_id: u32,
) -> Result<PaddedInstance, SelfInstructError> {
    instance.check_mask()?;
    if instance.len() > seq_len {
        return Err(SelfInstructError::InstanceTooLong {
            index: 0,
            len: instance.len(),
            max: seq_len,
        });
    }
    let mut token_ids = instance.token_ids.clone();
    let mut loss_mask = instance.loss_mask.clone();
    token_ids.resize(seq_len, pad_id);
    loss_mask.resize(seq_len, false);
    Ok(PaddedInstance {
        token_ids,
        loss_mask,
    })
}
