//! JSON network files.
//!
//! `{"activation": "relu" | {"repu": k}, "layers": [{"rows", "cols", "entries": [[i, j, v], ...], "bias"}]}`.
//! Entries must be sorted row-major, in range, unique and nonzero.

use super::{Activation, AffineLayer, SparseMatrix, SparseNetwork};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ActivationRepr {
    Name(String),
    Repu { repu: u32 },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRepr {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
    bias: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(try_from = "LayerRepr")]
struct CheckedLayer(AffineLayer);

impl TryFrom<LayerRepr> for CheckedLayer {
    type Error = String;
    fn try_from(l: LayerRepr) -> std::result::Result<Self, String> {
        if l.bias.len() != l.rows {
            return Err(format!("bias has {} entries, expected {}", l.bias.len(), l.rows));
        }
        let mut prev: Option<(usize, usize)> = None;
        for &(i, j, v) in &l.entries {
            if i >= l.rows || j >= l.cols {
                return Err(format!("entry ({i}, {j}) out of range for {}x{}", l.rows, l.cols));
            }
            if v == 0.0 {
                return Err(format!("zero weight stored at ({i}, {j})"));
            }
            if let Some(p) = prev {
                if (i, j) <= p {
                    return Err(format!("entries not sorted row-major at ({i}, {j})"));
                }
            }
            prev = Some((i, j));
        }
        let weights = SparseMatrix::from_triplets(l.rows, l.cols, l.entries).map_err(|e| e.to_string())?;
        AffineLayer::new(weights, l.bias).map(CheckedLayer).map_err(|e| e.to_string())
    }
}

#[derive(Serialize)]
struct NetOut<'a> {
    activation: ActivationRepr,
    layers: Vec<LayerRef<'a>>,
}

#[derive(Serialize)]
struct LayerRef<'a> {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
    bias: &'a [f64],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NetIn {
    activation: ActivationRepr,
    layers: Vec<CheckedLayer>,
}

pub fn serialize(net: &SparseNetwork) -> Vec<u8> {
    let activation = match net.activation() {
        Activation::Relu => ActivationRepr::Name("relu".into()),
        Activation::Repu(k) => ActivationRepr::Repu { repu: k },
    };
    let layers = net
        .layers()
        .iter()
        .map(|l| LayerRef { rows: l.output_dim(), cols: l.input_dim(), entries: l.weights.triplets(), bias: &l.bias })
        .collect();
    serde_json::to_vec(&NetOut { activation, layers }).expect("network serialization cannot fail")
}

fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut off = 0;
    for _ in 1..line {
        match bytes[off..].iter().position(|&b| b == b'\n') {
            Some(p) => off += p + 1,
            None => return bytes.len(),
        }
    }
    (off + column.saturating_sub(1)).min(bytes.len())
}

pub fn deserialize(bytes: &[u8]) -> Result<SparseNetwork> {
    let parsed: NetIn = serde_json::from_slice(bytes).map_err(|e| Error::Parse {
        offset: byte_offset(bytes, e.line(), e.column()),
        msg: e.to_string(),
    })?;
    let activation = match parsed.activation {
        ActivationRepr::Name(ref s) if s == "relu" => Activation::Relu,
        ActivationRepr::Name(s) => return Err(Error::Parse { offset: 0, msg: format!("unknown activation {s:?}") }),
        ActivationRepr::Repu { repu } => {
            Activation::repu(repu).map_err(|e| Error::Parse { offset: 0, msg: e.to_string() })?
        }
    };
    let layers = parsed.layers.into_iter().map(|l| l.0).collect();
    SparseNetwork::new(layers, activation)
}
