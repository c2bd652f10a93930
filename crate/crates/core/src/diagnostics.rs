//! Random small graphs and the end-to-end gradient check.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::code::code_relations;
use crate::error::{Error, Result};
use crate::graph::{Edge, GraphKind, GraphNode, LabeledMultigraph};
use crate::model::{init_params, triple_loss, unified_relations, BoundParams, ModelConfig, PreparedGraph};
use crate::tensor::{grad_check, GradCheck, Matrix, Real, Tape};
use crate::text_graph::text_relations;

/// Random graph with `nodes` nodes: a spanning chain under relation 0 plus
/// each other ordered pair joined with probability `edge_prob` under a random
/// relation of the side's vocabulary.
pub fn random_graph(rng: &mut impl Rng, kind: GraphKind, nodes: usize, edge_prob: f64) -> LabeledMultigraph {
    let relations = match kind {
        GraphKind::Text => text_relations(),
        GraphKind::Code => code_relations(),
    };
    let node_list = (0..nodes).map(|i| GraphNode::new(format!("t{i}"), i % 2 == 1)).collect();
    let mut edges: Vec<Edge> = (1..nodes).map(|i| Edge::new(i - 1, i, 0)).collect();
    for s in 0..nodes {
        for d in 0..nodes {
            if s != d && rng.gen_bool(edge_prob) {
                edges.push(Edge::new(s, d, rng.gen_range(0..relations.len())));
            }
        }
    }
    LabeledMultigraph::new(kind, relations, node_list, edges).expect("valid random graph")
}

pub fn random_matrix<T: Real>(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix<T> {
    let data = (0..rows * cols)
        .map(|_| T::from_f64_lossy(rng.gen_range(-1.0..1.0)))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("sized buffer")
}

/// Random graph with random features, prepared against the unified vocabulary.
pub fn random_prepared<T: Real>(rng: &mut impl Rng, kind: GraphKind, nodes: usize, dim: usize) -> PreparedGraph<T> {
    let g = random_graph(rng, kind, nodes, 0.3);
    PreparedGraph::new(&g, random_matrix(rng, nodes, dim), &unified_relations()).expect("known relations")
}

/// A random permutation of `0..n`.
pub fn random_order(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckSummary {
    pub seed: u64,
    pub cases: usize,
    /// Draws discarded because a kink was within reach of the step or the
    /// hinge was inactive (zero gradient everywhere).
    pub resampled: usize,
    pub coordinates: usize,
    pub max_rel_error: f64,
}

/// Gradient check of the full triple loss (encoder, SubMul, FCMax, cosine,
/// hinge) in f64 on `cases` random (query, positive, negative) triples of
/// 3 to 8 nodes, fresh parameters per case.
pub fn triple_gradcheck(seed: u64, cases: usize, h: f64) -> Result<GradCheckSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let relations = unified_relations();
    let mut summary = GradCheckSummary {
        seed,
        cases: 0,
        resampled: 0,
        coordinates: 0,
        max_rel_error: 0.0,
    };
    let max_draws = cases * 50 + 10;
    while summary.cases < cases {
        if summary.cases + summary.resampled >= max_draws {
            return Err(Error::State(format!(
                "only {} usable draws out of {max_draws}",
                summary.cases
            )));
        }
        let config = ModelConfig {
            input_dim: 4,
            rgcn_dim: 3,
            agg_dim: 3,
            seed: rng.gen(),
            ..ModelConfig::default()
        };
        let params = init_params(&config, &relations)?.cast::<f64>();
        let mut graph = |kind| {
            let n = rng.gen_range(3..=8);
            random_prepared::<f64>(&mut rng, kind, n, config.input_dim)
        };
        let (q, pos, neg) = (graph(GraphKind::Text), graph(GraphKind::Code), graph(GraphKind::Code));
        let rel_count = relations.len();
        let active = {
            let tape = Tape::new();
            let bound = params.bind(&tape, false);
            let loss = triple_loss(&tape, &q, &pos, &neg, 0.5, &bound)?;
            let v = loss.value().item();
            v > 10.0 * h
        };
        if !active {
            summary.resampled += 1;
            continue;
        }
        let tensors: Vec<Matrix<f64>> = params.tensors().into_iter().cloned().collect();
        let result = grad_check(
            |tape, vars| {
                let bound = BoundParams::from_vars(&config, rel_count, vars)?;
                triple_loss(tape, &q, &pos, &neg, 0.5, &bound)
            },
            &tensors,
            h,
        )?;
        match result {
            GradCheck::Checked(report) => {
                summary.cases += 1;
                summary.coordinates += report.coordinates;
                summary.max_rel_error = summary.max_rel_error.max(report.max_rel_error);
            }
            _ => summary.resampled += 1,
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_graphs_are_connected_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_graph(&mut rng, GraphKind::Code, 6, 0.0);
        assert_eq!(g.edges().len(), 5);
        assert_eq!(g.relations().len(), 3);
    }

    #[test]
    fn small_gradcheck_passes() {
        let s = triple_gradcheck(3, 2, 1e-5).unwrap();
        assert_eq!(s.cases, 2);
        assert!(s.max_rel_error < 1e-4, "{s:?}");
    }
}
