//! Versioned JSON interchange for grown forests, optionally gzip-wrapped.

use std::io::{Read, Write};

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use super::{Forest, GrowConfig, Node, Tree};
use crate::dataset::{Response, VariableSpec};
use crate::error::{Error, Result};

pub const FOREST_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct DocumentRef<'a> {
    version: u32,
    config: &'a GrowConfig,
    variables: &'a [VariableSpec],
    event_times: &'a [f64],
    response: &'a Response,
    trees: &'a [Tree],
    inbag: &'a [Vec<u32>],
}

#[derive(Deserialize)]
struct Document {
    version: u32,
    config: GrowConfig,
    variables: Vec<VariableSpec>,
    event_times: Vec<f64>,
    response: Response,
    trees: Vec<Tree>,
    inbag: Vec<Vec<u32>>,
}

#[derive(Deserialize)]
struct Header {
    version: u32,
}

pub fn serialize(forest: &Forest) -> Result<Vec<u8>> {
    let doc = DocumentRef {
        version: FOREST_SCHEMA_VERSION,
        config: &forest.config,
        variables: &forest.variables,
        event_times: &forest.event_times,
        response: &forest.response,
        trees: &forest.trees,
        inbag: &forest.inbag,
    };
    Ok(serde_json::to_vec(&doc)?)
}

/// Gzip container around the JSON document. The gzip header carries no
/// timestamp, so output bytes are stable.
pub fn serialize_gzip(forest: &Forest) -> Result<Vec<u8>> {
    let json = serialize(forest)?;
    let mut enc = GzEncoder::new(Vec::new(), Compression::new(6));
    enc.write_all(&json)?;
    Ok(enc.finish()?)
}

/// Parse a forest document, plain or gzip. Never returns a partially
/// populated forest.
pub fn deserialize(bytes: &[u8]) -> Result<Forest> {
    let owned;
    let json: &[u8] = if bytes.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(bytes)
            .read_to_end(&mut out)
            .map_err(|e| Error::Document(format!("gzip: {e}")))?;
        owned = out;
        &owned
    } else {
        bytes
    };

    let header: Header =
        serde_json::from_slice(json).map_err(|e| Error::Document(e.to_string()))?;
    if header.version != FOREST_SCHEMA_VERSION {
        return Err(Error::Version {
            found: header.version,
            expected: FOREST_SCHEMA_VERSION,
        });
    }
    let doc: Document = serde_json::from_slice(json).map_err(|e| Error::Document(e.to_string()))?;
    debug_assert_eq!(doc.version, FOREST_SCHEMA_VERSION);
    let forest = Forest {
        config: doc.config,
        variables: doc.variables,
        event_times: doc.event_times,
        response: doc.response,
        trees: doc.trees,
        inbag: doc.inbag,
    };
    validate(&forest)?;
    Ok(forest)
}

fn validate(f: &Forest) -> Result<()> {
    let bad = |msg: String| Err(Error::Document(msg));
    let n = f.response.len();
    if f.response.status.len() != n {
        return bad("response lengths differ".into());
    }
    if f.trees.len() != f.config.ntree || f.inbag.len() != f.trees.len() {
        return bad(format!(
            "config says {} trees; document has {} trees and {} inbag rows",
            f.config.ntree,
            f.trees.len(),
            f.inbag.len()
        ));
    }
    if f.event_times.windows(2).any(|w| !(w[0] < w[1])) {
        return bad("event times are not strictly ascending".into());
    }
    let p = f.variables.len();
    let g = f.event_times.len();
    for (t, (tree, inbag)) in f.trees.iter().zip(&f.inbag).enumerate() {
        if inbag.len() != n || inbag.iter().map(|&m| m as usize).sum::<usize>() != n {
            return bad(format!("tree {t}: inbag multiplicities do not sum to {n}"));
        }
        if tree.nodes.is_empty() {
            return bad(format!("tree {t} has no nodes"));
        }
        for (id, node) in tree.nodes.iter().enumerate() {
            match node {
                Node::Split { depth, split } => {
                    if split.variable >= p {
                        return bad(format!("tree {t} node {id}: variable index out of range"));
                    }
                    for child in [split.left, split.right] {
                        if child <= id
                            || child >= tree.nodes.len()
                            || tree.nodes[child].depth() != depth + 1
                        {
                            return bad(format!("tree {t} node {id}: bad child {child}"));
                        }
                    }
                }
                Node::Terminal { terminal, .. } => {
                    let c = &terminal.curve;
                    if c.survival.len() != c.index.len()
                        || c.cum_hazard.len() != c.index.len()
                        || c.index.iter().any(|&k| k as usize >= g)
                        || terminal.members.iter().any(|&r| r as usize >= n)
                    {
                        return bad(format!("tree {t} node {id}: malformed terminal"));
                    }
                }
            }
        }
    }
    Ok(())
}
