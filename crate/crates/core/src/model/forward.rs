//! Forward computation on a tape: RGCN encoding, cross-attention matching,
//! pooling and cosine scoring.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::config::{AggOp, MatchOp};
use super::params::{BoundParams, DgmsParams};
use crate::error::{Error, Result};
use crate::features::{node_features, EmbeddingTable};
use crate::graph::{LabeledMultigraph, RelationVocab};
use crate::tensor::{Matrix, Real, SparseRows, Tape, Var};

/// A graph ready for the encoder: initial features plus, for every relation that
/// has edges, the row-normalized in-neighbor matrix (`A[i][j] = 1/|N_i^r|`).
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedGraph<T> {
    pub features: Matrix<T>,
    /// `(relation id in the parameter vocabulary, adjacency)`, ascending by id.
    pub adjacency: Vec<(usize, Arc<SparseRows<T>>)>,
}

impl<T: Real> PreparedGraph<T> {
    /// `g` is inverse-augmented first if it is not already. Every relation name in
    /// `g` must exist in `relations`.
    pub fn new(g: &LabeledMultigraph, features: Matrix<T>, relations: &RelationVocab) -> Result<Self> {
        if features.rows() != g.node_count() {
            return Err(Error::shape(
                "prepare_graph",
                format!("{} feature rows for {} nodes", features.rows(), g.node_count()),
            ));
        }
        let augmented;
        let g = if g.is_augmented() {
            g
        } else {
            augmented = g.augment_inverses()?;
            &augmented
        };
        let mut rel_map = Vec::with_capacity(g.relations().len());
        for name in g.relations().names() {
            let id = relations
                .id(name)
                .ok_or_else(|| Error::Argument(format!("relation {name:?} has no weights")))?;
            rel_map.push(id);
        }
        let n = g.node_count();
        // relation -> destination -> sources; edges are already deduplicated.
        let mut by_rel: BTreeMap<usize, Vec<Vec<usize>>> = BTreeMap::new();
        for e in g.edges() {
            by_rel.entry(rel_map[e.rel]).or_insert_with(|| vec![Vec::new(); n])[e.dst].push(e.src);
        }
        let adjacency = by_rel
            .into_iter()
            .map(|(rel, lists)| {
                let rows: Vec<Vec<(usize, T)>> = lists
                    .into_iter()
                    .map(|mut srcs| {
                        srcs.sort_unstable();
                        let w = if srcs.is_empty() {
                            T::zero()
                        } else {
                            T::one() / T::from_usize(srcs.len()).unwrap()
                        };
                        srcs.into_iter().map(|s| (s, w)).collect()
                    })
                    .collect();
                (rel, Arc::new(SparseRows::from_row_lists(n, &rows)))
            })
            .collect();
        Ok(Self {
            features,
            adjacency,
        })
    }

    pub fn node_count(&self) -> usize {
        self.features.rows()
    }

    pub fn cast<U: Real>(&self) -> PreparedGraph<U> {
        PreparedGraph {
            features: self.features.cast(),
            adjacency: self
                .adjacency
                .iter()
                .map(|(r, a)| (*r, Arc::new(a.cast())))
                .collect(),
        }
    }
}

/// Features from `table`, then [`PreparedGraph::new`].
pub fn prepare_graph(
    g: &LabeledMultigraph,
    table: &EmbeddingTable,
    relations: &RelationVocab,
) -> Result<PreparedGraph<f32>> {
    PreparedGraph::new(g, node_features(g, table)?, relations)
}

/// One RGCN layer:
/// `h_i = ReLU(W_Θ x_i + Σ_r Σ_{j ∈ N_i^r} x_j W_r / |N_i^r|)`, rows are nodes.
pub fn rgcn_forward<'t, T: Real>(
    graph: &PreparedGraph<T>,
    x: Var<'t, T>,
    params: &BoundParams<'t, T>,
    layer: usize,
) -> Result<Var<'t, T>> {
    let rows = x.shape().0;
    if rows != graph.node_count() {
        return Err(Error::shape(
            "rgcn_forward",
            format!("{rows} feature rows for {} nodes", graph.node_count()),
        ));
    }
    let weights = params
        .layers
        .get(layer)
        .ok_or_else(|| Error::Argument(format!("no layer {layer}")))?;
    let mut acc = x.matmul(&weights.self_weight)?;
    for (rel, adj) in &graph.adjacency {
        let w = weights
            .rel_weights
            .get(*rel)
            .ok_or_else(|| Error::Argument(format!("no weights for relation {rel}")))?;
        let msg = x.sparse_left_mul(Arc::clone(adj))?.matmul(w)?;
        acc = acc.add(&msg)?;
    }
    Ok(acc.relu())
}

/// Node embeddings after every RGCN layer.
pub fn encode<'t, T: Real>(
    tape: &'t Tape<T>,
    graph: &PreparedGraph<T>,
    params: &BoundParams<'t, T>,
) -> Result<Var<'t, T>> {
    let mut x = tape.constant(graph.features.clone());
    for l in 0..params.layers.len() {
        x = rgcn_forward(graph, x, params, l)?;
    }
    Ok(x)
}

/// `Alpha[i][j] = cosine(q_i, e_j)`; zero-norm rows give 0.
pub fn cross_attention<'t, T: Real>(q: Var<'t, T>, e: Var<'t, T>) -> Result<Var<'t, T>> {
    if q.shape().1 != e.shape().1 {
        return Err(Error::shape(
            "cross_attention",
            format!("{:?} vs {:?}", q.shape(), e.shape()),
        ));
    }
    q.row_normalize().matmul(&e.row_normalize().transpose())
}

/// Row `i` is `(1/N) Σ_j Alpha[i][j] e_j`.
pub fn context_repr<'t, T: Real>(alpha: Var<'t, T>, e: Var<'t, T>) -> Result<Var<'t, T>> {
    let n = e.shape().0;
    if alpha.shape().1 != n || n == 0 {
        return Err(Error::shape(
            "context_repr",
            format!("{:?} x {:?}", alpha.shape(), e.shape()),
        ));
    }
    Ok(alpha.matmul(&e)?.scale(T::one() / T::from_usize(n).unwrap()))
}

/// Compares each node with its context vector.
pub fn match_nodes<'t, T: Real>(x: Var<'t, T>, context: Var<'t, T>, op: MatchOp) -> Result<Var<'t, T>> {
    if x.shape() != context.shape() {
        return Err(Error::shape(
            "match_nodes",
            format!("{:?} vs {:?}", x.shape(), context.shape()),
        ));
    }
    let sub = || x.sub(&context)?.mul(&context.sub(&x)?);
    match op {
        MatchOp::None => Ok(x),
        MatchOp::Sub => sub(),
        MatchOp::Mul => x.mul(&context),
        MatchOp::SubMul => sub()?.concat_cols(&x.mul(&context)?),
    }
}

/// Pools node rows into a `1 × width` graph vector.
pub fn aggregate<'t, T: Real>(x: Var<'t, T>, params: &BoundParams<'t, T>, op: AggOp) -> Result<Var<'t, T>> {
    let rows = x.shape().0;
    if rows == 0 {
        return Err(Error::shape("aggregate", "empty input"));
    }
    let fc = || -> Result<Var<'t, T>> {
        x.matmul(&params.fc_weight)?
            .add(&params.fc_bias.broadcast_rows(rows)?)
    };
    match op {
        AggOp::FcMax => fc()?.col_max(),
        AggOp::FcAvg => fc()?.col_mean(),
        AggOp::Max => x.col_max(),
        AggOp::Average => x.col_mean(),
    }
}

/// Graph vectors `(H_q, H_e)` from already-encoded node embeddings. The code
/// side attends with the transposed attention matrix.
pub fn pooled_pair<'t, T: Real>(
    q: Var<'t, T>,
    e: Var<'t, T>,
    params: &BoundParams<'t, T>,
) -> Result<(Var<'t, T>, Var<'t, T>)> {
    let op = params.config.match_op;
    let (xq, xe) = if op == MatchOp::None {
        (q, e)
    } else {
        let alpha = cross_attention(q, e)?;
        let e_ctx = context_repr(alpha, e)?;
        let q_ctx = context_repr(alpha.transpose(), q)?;
        (match_nodes(q, e_ctx, op)?, match_nodes(e, q_ctx, op)?)
    };
    let agg = params.config.agg_op;
    Ok((aggregate(xq, params, agg)?, aggregate(xe, params, agg)?))
}

/// `cosine(H_q, H_e)` from encoded node embeddings.
pub fn score_embeddings<'t, T: Real>(
    q: Var<'t, T>,
    e: Var<'t, T>,
    params: &BoundParams<'t, T>,
) -> Result<Var<'t, T>> {
    let (hq, he) = pooled_pair(q, e, params)?;
    hq.cosine(&he)
}

/// Full forward for one (text, code) pair.
pub fn score_pair<'t, T: Real>(
    tape: &'t Tape<T>,
    text: &PreparedGraph<T>,
    code: &PreparedGraph<T>,
    params: &BoundParams<'t, T>,
) -> Result<Var<'t, T>> {
    let q = encode(tape, text, params)?;
    let e = encode(tape, code, params)?;
    score_embeddings(q, e, params)
}

/// Margin ranking loss `max(0, δ − sim(q, e) + sim(q, ë))`.
pub fn triple_loss<'t, T: Real>(
    tape: &'t Tape<T>,
    query: &PreparedGraph<T>,
    positive: &PreparedGraph<T>,
    negative: &PreparedGraph<T>,
    margin: T,
    params: &BoundParams<'t, T>,
) -> Result<Var<'t, T>> {
    let q = encode(tape, query, params)?;
    let pos = score_embeddings(q, encode(tape, positive, params)?, params)?;
    let neg = score_embeddings(q, encode(tape, negative, params)?, params)?;
    tape.constant(Matrix::scalar(margin))
        .sub(&pos)?
        .add(&neg)?
        .hinge()
}

impl<T: Real> DgmsParams<T> {
    /// Encoder output for one graph, off the gradient path.
    pub fn encode_nodes(&self, graph: &PreparedGraph<T>) -> Result<Matrix<T>> {
        let tape = Tape::new();
        let bound = self.bind(&tape, false);
        let out = encode(&tape, graph, &bound)?;
        let value = out.value();
        Ok((*value).clone())
    }

    pub fn score(&self, text: &PreparedGraph<T>, code: &PreparedGraph<T>) -> Result<T> {
        let tape = Tape::new();
        let bound = self.bind(&tape, false);
        let s = score_pair(&tape, text, code, &bound)?;
        let v = s.value().item();
        Ok(v)
    }

    /// Score from pre-encoded node embeddings of both sides.
    pub fn score_encoded(&self, text_nodes: &Matrix<T>, code_nodes: &Matrix<T>) -> Result<T> {
        let tape = Tape::new();
        let bound = self.bind(&tape, false);
        let q = tape.constant(text_nodes.clone());
        let e = tape.constant(code_nodes.clone());
        let s = score_embeddings(q, e, &bound)?;
        let v = s.value().item();
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Edge, GraphKind, GraphNode};
    use crate::model::config::ModelConfig;
    use crate::model::params::{init_params, RgcnLayer};

    fn vocab() -> RelationVocab {
        RelationVocab::new(["r"]).unwrap().with_inverses().unwrap()
    }

    fn graph(n: usize, edges: &[(usize, usize)]) -> LabeledMultigraph {
        LabeledMultigraph::new(
            GraphKind::Code,
            RelationVocab::new(["r"]).unwrap(),
            (0..n).map(|i| GraphNode::new(format!("n{i}"), true)).collect(),
            edges.iter().map(|&(s, d)| Edge::new(s, d, 0)),
        )
        .unwrap()
    }

    /// Identity-weight parameters of width 2; `self_scale` multiplies W_Θ.
    fn identity_params(self_scale: f64) -> DgmsParams<f64> {
        let config = ModelConfig {
            input_dim: 2,
            rgcn_dim: 2,
            agg_dim: 2,
            match_op: MatchOp::None,
            agg_op: AggOp::FcMax,
            ..ModelConfig::default()
        };
        DgmsParams {
            config,
            relations: vocab(),
            layers: vec![RgcnLayer {
                self_weight: Matrix::identity(2).scaled(self_scale),
                rel_weights: vec![Matrix::identity(2), Matrix::identity(2)],
            }],
            fc_weight: Matrix::identity(2),
            fc_bias: Matrix::zeros(1, 2),
        }
    }

    fn run_rgcn(p: &DgmsParams<f64>, g: &LabeledMultigraph, x: Matrix<f64>) -> Matrix<f64> {
        let prepared = PreparedGraph::new(g, x, &p.relations).unwrap();
        p.encode_nodes(&prepared).unwrap()
    }

    #[test]
    fn isolated_node_with_identity_self_weight() {
        let out = run_rgcn(&identity_params(1.0), &graph(1, &[]), Matrix::from_rows(&[&[0.5, -3.0]]));
        assert_eq!(out, Matrix::from_rows(&[&[0.5, 0.0]]));
    }

    #[test]
    fn single_in_neighbor_identity_weights() {
        // edge 1 -> 0 under r; the inverse edge 0 -> 1 feeds node 1 under r⁻¹.
        let x = Matrix::from_rows(&[&[1.0, -2.0], &[0.5, 1.0]]);
        let out = run_rgcn(&identity_params(1.0), &graph(2, &[(1, 0)]), x);
        assert_eq!(out.row(0), &[1.5, 0.0]);
        assert_eq!(out.row(1), &[1.5, 0.0]);
    }

    #[test]
    fn mean_over_two_in_neighbors() {
        let x = Matrix::from_rows(&[&[9.0, 9.0], &[1.0, -4.0], &[3.0, 2.0]]);
        let out = run_rgcn(&identity_params(0.0), &graph(3, &[(1, 0), (2, 0)]), x);
        assert_eq!(out.row(0), &[2.0, 0.0]);
    }

    #[test]
    fn unknown_relation_is_rejected() {
        let g = LabeledMultigraph::new(
            GraphKind::Text,
            RelationVocab::new(["zz"]).unwrap(),
            vec![GraphNode::new("a", true)],
            [],
        )
        .unwrap();
        assert!(PreparedGraph::<f64>::new(&g, Matrix::zeros(1, 2), &vocab()).is_err());
        assert!(PreparedGraph::<f64>::new(&graph(2, &[]), Matrix::zeros(1, 2), &vocab()).is_err());
    }

    #[test]
    fn attention_and_context_examples() {
        let tape = Tape::<f64>::new();
        let q = tape.constant(Matrix::from_rows(&[&[1.0, 2.0], &[0.0, 3.0]]));
        let e = tape.constant(Matrix::from_rows(&[&[1.0, 2.0], &[-5.0, 0.0], &[0.0, 0.0]]));
        let a = cross_attention(q, e).unwrap().value();
        assert!((a.get(0, 0) - 1.0).abs() < 1e-12);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.get(0, 2), 0.0);
        assert!(cross_attention(q, tape.constant(Matrix::zeros(1, 3))).is_err());

        let e = tape.constant(Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]));
        let alpha = tape.constant(Matrix::from_rows(&[&[1.0, 0.0]]));
        assert_eq!(*context_repr(alpha, e).unwrap().value(), Matrix::from_rows(&[&[0.5, 0.0]]));
        let zero = tape.constant(Matrix::zeros(1, 2));
        assert_eq!(*context_repr(zero, e).unwrap().value(), Matrix::zeros(1, 2));
        let e1 = tape.constant(Matrix::from_rows(&[&[0.3, -0.7]]));
        let one = tape.constant(Matrix::scalar(1.0));
        assert_eq!(*context_repr(one, e1).unwrap().value(), *e1.value());
    }

    #[test]
    fn matching_examples() {
        let tape = Tape::<f64>::new();
        let x = tape.constant(Matrix::from_rows(&[&[1.0, 2.0]]));
        let xb = tape.constant(Matrix::from_rows(&[&[0.0, 1.0]]));
        assert_eq!(*match_nodes(x, x, MatchOp::Sub).unwrap().value(), Matrix::zeros(1, 2));
        assert_eq!(*match_nodes(x, xb, MatchOp::Sub).unwrap().value(), Matrix::from_rows(&[&[-1.0, -1.0]]));
        assert_eq!(
            *match_nodes(x, x, MatchOp::SubMul).unwrap().value(),
            Matrix::from_rows(&[&[0.0, 0.0, 1.0, 4.0]])
        );
        assert_eq!(match_nodes(x, xb, MatchOp::None).unwrap().id(), x.id());
        assert!(match_nodes(x, tape.constant(Matrix::zeros(2, 2)), MatchOp::Mul).is_err());
    }

    #[test]
    fn aggregation_examples() {
        let p = identity_params(1.0);
        let tape = Tape::new();
        let b = p.bind(&tape, false);
        let x = tape.constant(Matrix::from_rows(&[&[1.0, -1.0], &[0.0, 3.0]]));
        assert_eq!(*aggregate(x, &b, AggOp::FcMax).unwrap().value(), Matrix::from_rows(&[&[1.0, 3.0]]));
        let y = tape.constant(Matrix::from_rows(&[&[1.0, 1.0], &[3.0, 3.0]]));
        assert_eq!(*aggregate(y, &b, AggOp::Average).unwrap().value(), Matrix::from_rows(&[&[2.0, 2.0]]));
        let row = tape.constant(Matrix::from_rows(&[&[0.25, -4.0]]));
        for op in AggOp::ALL {
            assert_eq!(*aggregate(row, &b, op).unwrap().value(), *row.value());
        }
        assert!(aggregate(tape.constant(Matrix::zeros(0, 2)), &b, AggOp::Max).is_err());
    }

    #[test]
    fn identical_sides_score_one() {
        let config = ModelConfig { input_dim: 4, rgcn_dim: 3, agg_dim: 3, seed: 5, ..ModelConfig::default() };
        let p = init_params(&config, &vocab()).unwrap();
        let g = graph(3, &[(0, 1), (1, 2)]);
        let x = Matrix::from_rows(&[&[0.1f32, 0.5, -0.3, 0.9], &[1.0, -0.2, 0.4, 0.3], &[-0.6, 0.8, 0.2, 0.1]]);
        let prepared = PreparedGraph::new(&g, x, &p.relations).unwrap();
        let s = p.score(&prepared, &prepared).unwrap();
        assert!((s - 1.0).abs() < 1e-6, "{s}");
    }

    #[test]
    fn single_node_sub_pools_to_zero() {
        // the context of a lone node is the node itself, so Sub vanishes and
        // cosine of two zero vectors is 0
        let config = ModelConfig { input_dim: 4, rgcn_dim: 3, agg_dim: 3, match_op: MatchOp::Sub, seed: 5, ..ModelConfig::default() };
        let p = init_params(&config, &vocab()).unwrap();
        let g = graph(1, &[]);
        let prepared = PreparedGraph::new(&g, Matrix::from_rows(&[&[0.1f32, 0.5, -0.3, 0.9]]), &p.relations).unwrap();
        assert_eq!(p.score(&prepared, &prepared).unwrap(), 0.0);
    }
}
