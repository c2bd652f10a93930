use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::retrieval::PreparedCorpus;
use crate::error::{Error, Result};
use crate::model::{decode_tensor, encode_tensor, params_fingerprint, DgmsParams};
use crate::tensor::Matrix;

const MANIFEST: &str = "manifest.json";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestEntry {
    id: String,
    file: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    params_fingerprint: String,
    rgcn_dim: usize,
    count: usize,
    entries: Vec<ManifestEntry>,
}

/// Precomputed encoder outputs for every code graph of a corpus. Only the
/// encoder is query independent, so matching and pooling still run per pair.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingIndex {
    fingerprint: String,
    rgcn_dim: usize,
    ids: Vec<String>,
    embeddings: Vec<Matrix<f32>>,
    by_id: HashMap<String, usize>,
}

impl EmbeddingIndex {
    fn from_parts(fingerprint: String, rgcn_dim: usize, ids: Vec<String>, embeddings: Vec<Matrix<f32>>) -> Self {
        let by_id = ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        Self {
            fingerprint,
            rgcn_dim,
            ids,
            embeddings,
            by_id,
        }
    }

    pub fn build(corpus: &PreparedCorpus, params: &DgmsParams<f32>) -> Result<Self> {
        let embeddings = corpus
            .codes
            .par_iter()
            .map(|g| params.encode_nodes(g))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_parts(
            params_fingerprint(params),
            params.config.rgcn_dim,
            corpus.ids.clone(),
            embeddings,
        ))
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, id: &str) -> Option<&Matrix<f32>> {
        self.by_id.get(id).map(|&i| &self.embeddings[i])
    }

    /// Errors unless the index was built with exactly these parameters.
    pub fn check_params(&self, params: &DgmsParams<f32>) -> Result<()> {
        self.check_fingerprint(&params_fingerprint(params))
    }

    pub fn check_fingerprint(&self, expected: &str) -> Result<()> {
        if self.fingerprint != expected {
            return Err(Error::Fingerprint {
                expected: expected.to_string(),
                actual: self.fingerprint.clone(),
            });
        }
        Ok(())
    }

    /// Writes `manifest.json` plus one tensor file per entry into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut entries = Vec::with_capacity(self.len());
        for (i, (id, m)) in self.ids.iter().zip(&self.embeddings).enumerate() {
            let file = format!("{i:06}.json");
            let path = dir.join(&file);
            fs::write(&path, encode_tensor(m)).map_err(|e| Error::io(&path, e))?;
            entries.push(ManifestEntry { id: id.clone(), file });
        }
        let manifest = Manifest {
            params_fingerprint: self.fingerprint.clone(),
            rgcn_dim: self.rgcn_dim,
            count: self.len(),
            entries,
        };
        let path = dir.join(MANIFEST);
        fs::write(&path, serde_json::to_vec_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
    }

    /// Reads an index; with `expected_fingerprint`, a mismatch is an error.
    pub fn load(dir: &Path, expected_fingerprint: Option<&str>) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_slice(&bytes)?;
        if manifest.count != manifest.entries.len() {
            return Err(Error::Format(format!(
                "{}: count {} but {} entries",
                path.display(),
                manifest.count,
                manifest.entries.len()
            )));
        }
        if let Some(fp) = expected_fingerprint {
            if fp != manifest.params_fingerprint {
                return Err(Error::Fingerprint {
                    expected: fp.to_string(),
                    actual: manifest.params_fingerprint,
                });
            }
        }
        let mut ids = Vec::with_capacity(manifest.count);
        let mut embeddings = Vec::with_capacity(manifest.count);
        for e in manifest.entries {
            let p = dir.join(&e.file);
            let m = decode_tensor(&fs::read(&p).map_err(|err| Error::io(&p, err))?)?;
            if m.cols() != manifest.rgcn_dim {
                return Err(Error::Format(format!(
                    "{}: width {}, manifest says {}",
                    p.display(),
                    m.cols(),
                    manifest.rgcn_dim
                )));
            }
            ids.push(e.id);
            embeddings.push(m);
        }
        let index = Self::from_parts(manifest.params_fingerprint, manifest.rgcn_dim, ids, embeddings);
        if index.by_id.len() != index.ids.len() {
            return Err(Error::Format(format!("{}: duplicate ids", path.display())));
        }
        Ok(index)
    }
}
