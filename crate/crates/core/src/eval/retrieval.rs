use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::corpus::Corpus;
use super::index::EmbeddingIndex;
use super::metrics::{mrr, rank_scores, success_at_k, CandidatePool, RankedList};
use crate::error::{Error, Result};
use crate::features::EmbeddingTable;
use crate::graph::RelationVocab;
use crate::model::{prepare_graph, DgmsParams, PreparedGraph};
use crate::text_graph::text_graph_for;
use crate::train::PairSet;

/// A corpus with node features attached and adjacency built.
pub struct PreparedCorpus {
    pub ids: Vec<String>,
    pub texts: Vec<PreparedGraph<f32>>,
    pub codes: Vec<PreparedGraph<f32>>,
    by_id: HashMap<String, usize>,
}

impl PreparedCorpus {
    pub fn new(corpus: &Corpus, table: &EmbeddingTable, relations: &RelationVocab) -> Result<Self> {
        let prepared = corpus
            .entries
            .par_iter()
            .map(|e| {
                Ok((
                    prepare_graph(&e.text_graph, table, relations)?,
                    prepare_graph(&e.code_graph, table, relations)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let (texts, codes) = prepared.into_iter().unzip();
        let ids = corpus.ids();
        let by_id = ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        Ok(Self {
            ids,
            texts,
            codes,
            by_id,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn position(&self, id: &str) -> Result<usize> {
        self.by_id
            .get(id)
            .copied()
            .ok_or_else(|| Error::Argument(format!("unknown corpus id {id}")))
    }

    pub fn pairs(&self) -> PairSet<'_> {
        PairSet {
            texts: &self.texts,
            codes: &self.codes,
        }
    }
}

/// Text graph for a free-text query (flat parse unless `parse` is given).
pub fn prepare_query(
    query: &str,
    parse: Option<&str>,
    table: &EmbeddingTable,
    relations: &RelationVocab,
) -> Result<PreparedGraph<f32>> {
    prepare_graph(&text_graph_for(query, parse)?, table, relations)
}

/// Scores queries against corpus code graphs, optionally reading candidate
/// encodings from an index.
pub struct Retriever<'a> {
    params: &'a DgmsParams<f32>,
    corpus: &'a PreparedCorpus,
    index: Option<&'a EmbeddingIndex>,
}

impl<'a> Retriever<'a> {
    /// Verifies that `index`, if any, was built from `params` and covers the corpus.
    pub fn new(params: &'a DgmsParams<f32>, corpus: &'a PreparedCorpus, index: Option<&'a EmbeddingIndex>) -> Result<Self> {
        if let Some(ix) = index {
            ix.check_params(params)?;
            if let Some(missing) = corpus.ids.iter().find(|id| ix.get(id).is_none()) {
                return Err(Error::Format(format!("index has no entry for {missing}")));
            }
        }
        Ok(Self { params, corpus, index })
    }

    fn score_candidates<'c>(
        &self,
        query: &PreparedGraph<f32>,
        candidates: impl IntoIterator<Item = &'c str>,
    ) -> Result<Vec<(String, f32)>> {
        let candidates: Vec<&str> = candidates.into_iter().collect();
        match self.index {
            Some(ix) => {
                let q = self.params.encode_nodes(query)?;
                candidates
                    .par_iter()
                    .map(|&id| {
                        let e = ix
                            .get(id)
                            .ok_or_else(|| Error::Format(format!("index has no entry for {id}")))?;
                        Ok((id.to_string(), self.params.score_encoded(&q, e)?))
                    })
                    .collect()
            }
            None => candidates
                .par_iter()
                .map(|&id| {
                    let code = &self.corpus.codes[self.corpus.position(id)?];
                    Ok((id.to_string(), self.params.score(query, code)?))
                })
                .collect(),
        }
    }

    pub fn rank(&self, pool: &CandidatePool) -> Result<RankedList> {
        let query = &self.corpus.texts[self.corpus.position(&pool.query)?];
        let scored = self.score_candidates(query, pool.candidates())?;
        rank_scores(scored, Some(&pool.truth))
    }

    /// Ranks the whole corpus for `query` and keeps the first `top_k`.
    pub fn search(&self, query: &PreparedGraph<f32>, top_k: usize) -> Result<RankedList> {
        if top_k == 0 {
            return Ok(RankedList {
                entries: Vec::new(),
                frank: None,
            });
        }
        let scored = self.score_candidates(query, self.corpus.ids.iter().map(String::as_str))?;
        let mut ranked = rank_scores(scored, None)?;
        ranked.entries.truncate(top_k);
        Ok(ranked)
    }

    /// Ranks every pool and summarizes. Pools are scored in parallel; results
    /// keep pool order.
    pub fn evaluate(&self, pools: &[CandidatePool]) -> Result<(EvalReport, Vec<usize>)> {
        let franks = pools
            .par_iter()
            .map(|p| Ok(self.rank(p)?.frank.expect("pool has a ground truth")))
            .collect::<Result<Vec<_>>>()?;
        let mut s_at = BTreeMap::new();
        for k in [1usize, 5, 10] {
            s_at.insert(k.to_string(), success_at_k(&franks, k)?);
        }
        let report = EvalReport {
            mrr: mrr(&franks)?,
            s_at,
            pool_size: pools.first().map_or(0, CandidatePool::size),
            queries: pools.len(),
            seed: pools.first().map_or(0, |p| p.seed),
        };
        Ok((report, franks))
    }
}

/// Free-function form of [`Retriever::rank`].
pub fn rank_candidates(
    pool: &CandidatePool,
    params: &DgmsParams<f32>,
    corpus: &PreparedCorpus,
    index: Option<&EmbeddingIndex>,
) -> Result<RankedList> {
    Retriever::new(params, corpus, index)?.rank(pool)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mrr: f64,
    pub s_at: BTreeMap<String, f64>,
    pub pool_size: usize,
    pub queries: usize,
    pub seed: u64,
}
