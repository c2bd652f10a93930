use std::cmp::Ordering;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Candidates ordered by descending score, ties by ascending id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub entries: Vec<(String, f32)>,
    /// 1-based position of the ground truth, when there is one.
    pub frank: Option<usize>,
}

fn rank_order(a: &(String, f32), b: &(String, f32)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.0.cmp(&b.0))
}

/// Sorts `(id, score)` pairs and locates `truth`. NaN scores are rejected.
pub fn rank_scores(mut scored: Vec<(String, f32)>, truth: Option<&str>) -> Result<RankedList> {
    if let Some((id, _)) = scored.iter().find(|(_, s)| s.is_nan()) {
        return Err(Error::NonFinite(format!("score for candidate {id} is NaN")));
    }
    scored.sort_by(rank_order);
    let frank = match truth {
        Some(t) => Some(
            scored
                .iter()
                .position(|(id, _)| id == t)
                .ok_or_else(|| Error::Argument(format!("ground truth {t} not among candidates")))?
                + 1,
        ),
        None => None,
    };
    Ok(RankedList {
        entries: scored,
        frank,
    })
}

pub fn mrr(franks: &[usize]) -> Result<f64> {
    if franks.is_empty() {
        return Err(Error::Argument("mrr of an empty rank list".into()));
    }
    if franks.contains(&0) {
        return Err(Error::Argument("ranks are 1-based".into()));
    }
    Ok(franks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / franks.len() as f64)
}

pub fn success_at_k(franks: &[usize], k: usize) -> Result<f64> {
    if franks.is_empty() {
        return Err(Error::Argument("success@k of an empty rank list".into()));
    }
    if k == 0 {
        return Err(Error::Argument("k must be at least 1".into()));
    }
    Ok(franks.iter().filter(|&&r| r <= k).count() as f64 / franks.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidatePool {
    pub query: String,
    pub truth: String,
    pub distractors: Vec<String>,
    pub seed: u64,
}

impl CandidatePool {
    /// Ground truth first, then distractors.
    pub fn candidates(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.truth.as_str()).chain(self.distractors.iter().map(String::as_str))
    }

    pub fn size(&self) -> usize {
        1 + self.distractors.len()
    }
}

/// One pool per id: the id's own code plus `pool_size − 1` distinct others
/// drawn without replacement.
pub fn build_pools(ids: &[String], pool_size: usize, seed: u64) -> Result<Vec<CandidatePool>> {
    if pool_size == 0 {
        return Err(Error::Argument("pool size must be at least 1".into()));
    }
    if ids.len() < pool_size {
        return Err(Error::Argument(format!(
            "corpus has {} entries, fewer than the pool size {pool_size}",
            ids.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let distractors = sample(&mut rng, ids.len() - 1, pool_size - 1)
                .into_iter()
                .map(|j| ids[if j >= i { j + 1 } else { j }].clone())
                .collect();
            CandidatePool {
                query: id.clone(),
                truth: id.clone(),
                distractors,
                seed,
            }
        })
        .collect())
}
