//! Weight checkpoints: a flat little-endian f64 file plus a JSON manifest
//! naming the slice owned by each primitive.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Primitive, StochasticGraph};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSlice {
    pub node: String,
    /// Position of the primitive within the node's transform.
    pub primitive: usize,
    pub op: String,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightManifest {
    pub total: usize,
    pub slices: Vec<WeightSlice>,
}

impl WeightManifest {
    pub fn of(graph: &StochasticGraph) -> Self {
        let mut slices = Vec::new();
        for (i, node) in graph.nodes().iter().enumerate() {
            let mut off = graph.weight_range(i).start;
            for (j, p) in node.transform.primitives.iter().enumerate() {
                let len = p.n_weights();
                if len == 0 {
                    continue;
                }
                let op = match p {
                    Primitive::Affine { .. } => "affine",
                    Primitive::ScalePositive { .. } => "scale_positive",
                    _ => unreachable!("only affine and scale_positive carry weights"),
                };
                slices.push(WeightSlice {
                    node: node.id.clone(),
                    primitive: j,
                    op: op.into(),
                    offset: off,
                    len,
                });
                off += len;
            }
        }
        WeightManifest {
            total: graph.weights().len(),
            slices,
        }
    }
}

pub fn save_weights(graph: &StochasticGraph, bin: &Path, manifest: &Path) -> Result<()> {
    let bytes: Vec<u8> = graph.weights().iter().flat_map(|w| w.to_le_bytes()).collect();
    std::fs::write(bin, bytes)?;
    let text = serde_json::to_string_pretty(&WeightManifest::of(graph))?;
    std::fs::write(manifest, text + "\n")?;
    Ok(())
}

/// Loads weights into `graph`, checking the manifest against its layout.
pub fn load_weights(graph: &mut StochasticGraph, bin: &Path, manifest: &Path) -> Result<()> {
    let m: WeightManifest = serde_json::from_str(&std::fs::read_to_string(manifest)?)?;
    if m != WeightManifest::of(graph) {
        return Err(Error::Graph("weight manifest does not match the graph layout".into()));
    }
    let bytes = std::fs::read(bin)?;
    if bytes.len() != 8 * m.total {
        return Err(Error::Graph(format!(
            "weight file holds {} bytes, manifest expects {}",
            bytes.len(),
            8 * m.total
        )));
    }
    let w: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    graph.set_weights(&w)
}
