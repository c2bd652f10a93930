use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ModelConfig;
use super::params::{DgmsParams, RgcnLayer};
use crate::error::{Error, Result};
use crate::graph::RelationVocab;
use crate::tensor::Matrix;
use crate::train::AdamState;

const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorJson {
    shape: [usize; 2],
    data: Vec<f32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdamJson {
    step: u64,
    m: BTreeMap<String, TensorJson>,
    v: BTreeMap<String, TensorJson>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointJson {
    version: u32,
    config: ModelConfig,
    relations: Vec<String>,
    tensors: BTreeMap<String, TensorJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    adam: Option<AdamJson>,
}

/// Parameters plus optional optimizer state.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: DgmsParams<f32>,
    pub adam: Option<AdamState>,
}

impl Checkpoint {
    pub fn new(params: DgmsParams<f32>) -> Self {
        Self { params, adam: None }
    }

    /// Hex SHA-256 of the parameter-only encoding; identifies the weights an
    /// index was built with.
    pub fn fingerprint(&self) -> String {
        params_fingerprint(&self.params)
    }
}

pub fn params_fingerprint(params: &DgmsParams<f32>) -> String {
    let bytes = encode_checkpoint(&Checkpoint::new(params.clone()));
    hex::encode(Sha256::digest(&bytes))
}

fn tensor_map<'a>(names: &[String], tensors: impl IntoIterator<Item = &'a Matrix<f32>>) -> BTreeMap<String, TensorJson> {
    names
        .iter()
        .zip(tensors)
        .map(|(n, m)| {
            (
                n.clone(),
                TensorJson {
                    shape: [m.rows(), m.cols()],
                    data: m.data().to_vec(),
                },
            )
        })
        .collect()
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Vec<u8> {
    let names: Vec<String> = ck.params.named_tensors().into_iter().map(|(n, _)| n).collect();
    let json = CheckpointJson {
        version: VERSION,
        config: ck.params.config.clone(),
        relations: ck.params.relations.names().to_vec(),
        tensors: tensor_map(&names, ck.params.tensors()),
        adam: ck.adam.as_ref().map(|a| AdamJson {
            step: a.step,
            m: tensor_map(&names, &a.m),
            v: tensor_map(&names, &a.v),
        }),
    };
    serde_json::to_vec(&json).expect("checkpoint serializes")
}

fn take_tensors(
    names: &[(String, (usize, usize))],
    mut map: BTreeMap<String, TensorJson>,
    what: &str,
) -> Result<Vec<Matrix<f32>>> {
    let mut out = Vec::with_capacity(names.len());
    for (name, want) in names {
        let t = map
            .remove(name)
            .ok_or_else(|| Error::Format(format!("{what}: missing tensor {name}")))?;
        if (t.shape[0], t.shape[1]) != *want {
            return Err(Error::Format(format!(
                "{what}: tensor {name} has shape {:?}, expected {want:?}",
                t.shape
            )));
        }
        let m = Matrix::from_vec(t.shape[0], t.shape[1], t.data)
            .map_err(|e| Error::Format(format!("{what}: tensor {name}: {e}")))?;
        out.push(m);
    }
    if let Some(extra) = map.keys().next() {
        return Err(Error::Format(format!("{what}: unexpected tensor {extra}")));
    }
    Ok(out)
}

/// A single tensor in checkpoint format, `{"shape":[r,c],"data":[...]}`.
pub fn encode_tensor(m: &Matrix<f32>) -> Vec<u8> {
    serde_json::to_vec(&TensorJson {
        shape: [m.rows(), m.cols()],
        data: m.data().to_vec(),
    })
    .expect("tensor serializes")
}

pub fn decode_tensor(bytes: &[u8]) -> Result<Matrix<f32>> {
    let t: TensorJson = serde_json::from_slice(bytes)?;
    Matrix::from_vec(t.shape[0], t.shape[1], t.data).map_err(|e| Error::Format(format!("tensor: {e}")))
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    let json: CheckpointJson = serde_json::from_slice(bytes)?;
    if json.version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {}", json.version)));
    }
    json.config
        .validate()
        .map_err(|e| Error::Format(format!("checkpoint config: {e}")))?;
    let relations = RelationVocab::new(json.relations).map_err(|e| Error::Format(format!("checkpoint relations: {e}")))?;

    // Layout template: expected names and shapes come from the config.
    let c = &json.config;
    let template = DgmsParams {
        config: c.clone(),
        relations: relations.clone(),
        layers: (0..c.layers)
            .map(|l| {
                let (fi, fo) = c.layer_dims(l);
                RgcnLayer {
                    self_weight: Matrix::<f32>::zeros(fi, fo),
                    rel_weights: vec![Matrix::zeros(fi, fo); relations.len()],
                }
            })
            .collect(),
        fc_weight: Matrix::zeros(c.matched_dim(), c.agg_dim),
        fc_bias: Matrix::zeros(1, c.agg_dim),
    };
    let layout: Vec<_> = template
        .named_tensors()
        .into_iter()
        .map(|(n, m)| (n, m.shape()))
        .collect();
    let params = template.with_tensors(take_tensors(&layout, json.tensors, "checkpoint")?)?;
    for (name, m) in params.named_tensors() {
        if !m.is_finite() {
            return Err(Error::Format(format!("checkpoint tensor {name} is not finite")));
        }
    }
    let adam = json
        .adam
        .map(|a| -> Result<AdamState> {
            Ok(AdamState {
                step: a.step,
                m: take_tensors(&layout, a.m, "adam.m")?,
                v: take_tensors(&layout, a.v, "adam.v")?,
            })
        })
        .transpose()?;
    Ok(Checkpoint { params, adam })
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    fs::write(path, encode_checkpoint(ck)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
