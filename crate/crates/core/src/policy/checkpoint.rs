//! Parameter checkpoints: one JSON header line followed by little-endian f64 blocks.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::PolicyError;

pub const CHECKPOINT_FORMAT: &str = "closure-checkpoint-1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockInfo {
    pub name: String,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub seed: u64,
    /// Layer shapes, template description and anything else the writer wants back.
    pub meta: serde_json::Value,
    pub blocks: Vec<BlockInfo>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    pub meta: serde_json::Value,
    pub blocks: Vec<(String, Vec<f64>)>,
}

impl Checkpoint {
    pub fn block(&self, name: &str) -> Option<&[f64]> {
        self.blocks.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<(), PolicyError> {
        let header = CheckpointHeader {
            format: CHECKPOINT_FORMAT.to_string(),
            seed: self.seed,
            meta: self.meta.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|(name, v)| BlockInfo {
                    name: name.clone(),
                    len: v.len(),
                })
                .collect(),
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for (_, v) in &self.blocks {
            let mut bytes = Vec::with_capacity(v.len() * 8);
            for x in v {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
            w.write_all(&bytes)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: BufRead>(mut r: R) -> Result<Self, PolicyError> {
        let mut line = String::new();
        r.read_line(&mut line)?;
        let header: CheckpointHeader = serde_json::from_str(line.trim_end())?;
        if header.format != CHECKPOINT_FORMAT {
            return Err(PolicyError::Checkpoint(format!("unknown format {:?}", header.format)));
        }
        let mut blocks = Vec::with_capacity(header.blocks.len());
        for b in header.blocks {
            let mut bytes = vec![0u8; b.len * 8];
            r.read_exact(&mut bytes)
                .map_err(|_| PolicyError::Checkpoint(format!("block {:?} is truncated", b.name)))?;
            let v = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            blocks.push((b.name, v));
        }
        Ok(Self {
            seed: header.seed,
            meta: header.meta,
            blocks,
        })
    }
}
