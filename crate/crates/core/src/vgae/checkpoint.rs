use super::model::{EncoderConfig, RgcnWeights};
use super::train::LatentEmbedding;
use super::VgaeError;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Structured-text container: config echo, weights and final embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config: EncoderConfig,
    pub weights: RgcnWeights,
    pub embedding: LatentEmbedding,
}

impl Checkpoint {
    pub fn new(config: EncoderConfig, weights: RgcnWeights, embedding: LatentEmbedding) -> Self {
        Self { version: CHECKPOINT_VERSION, config, weights, embedding }
    }
}

pub fn write_checkpoint<W: Write>(checkpoint: &Checkpoint, writer: W) -> Result<(), VgaeError> {
    serde_json::to_writer(writer, checkpoint).map_err(|e| VgaeError::Checkpoint(e.to_string()))
}

pub fn read_checkpoint<R: Read>(reader: R) -> Result<Checkpoint, VgaeError> {
    let c: Checkpoint = serde_json::from_reader(reader).map_err(|e| VgaeError::Checkpoint(e.to_string()))?;
    if c.version != CHECKPOINT_VERSION {
        return Err(VgaeError::Checkpoint(format!("unsupported version {}", c.version)));
    }
    Ok(c)
}

/// `node_id,mu_0,...,mu_{d-1}` rows.
pub fn write_embeddings_csv<W: Write>(embedding: &LatentEmbedding, writer: W) -> Result<(), VgaeError> {
    let io = |e: csv::Error| VgaeError::Checkpoint(e.to_string());
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["node_id".to_string()];
    header.extend((0..embedding.dim()).map(|d| format!("mu_{d}")));
    w.write_record(&header).map_err(io)?;
    for (row, id) in embedding.node_ids.iter().enumerate() {
        let mut rec = vec![id.to_string()];
        rec.extend(embedding.mu.row(row).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| VgaeError::Checkpoint(e.to_string()))
}
