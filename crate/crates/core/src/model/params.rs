use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use crate::code::code_relations;
use crate::error::{Error, Result};
use crate::graph::RelationVocab;
use crate::tensor::{Matrix, Real, Tape, Var};
use crate::text_graph::text_relations;

/// Text relations, then code relations, then all their inverses.
pub fn unified_relations() -> RelationVocab {
    let names = text_relations()
        .names()
        .iter()
        .chain(code_relations().names())
        .cloned()
        .collect::<Vec<_>>();
    RelationVocab::new(names)
        .and_then(|v| v.with_inverses())
        .expect("static vocabulary")
}

#[derive(Clone, Debug, PartialEq)]
pub struct RgcnLayer<T> {
    /// `W_Θ`, `fan_in × fan_out`; applied to a node's own features.
    pub self_weight: Matrix<T>,
    /// One `fan_in × fan_out` matrix per relation in `DgmsParams::relations`.
    pub rel_weights: Vec<Matrix<T>>,
}

/// Every trainable tensor. One instance serves both the text and the code side.
#[derive(Clone, Debug, PartialEq)]
pub struct DgmsParams<T> {
    pub config: ModelConfig,
    pub relations: RelationVocab,
    pub layers: Vec<RgcnLayer<T>>,
    /// `d′ × d_agg`; only read by the FC aggregation variants.
    pub fc_weight: Matrix<T>,
    pub fc_bias: Matrix<T>,
}

fn glorot(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Matrix<f32> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt() as f32;
    let data = (0..fan_in * fan_out)
        .map(|_| rng.gen_range(-limit..limit))
        .collect();
    Matrix::from_vec(fan_in, fan_out, data).expect("sized buffer")
}

/// Glorot-uniform weights drawn from `config.seed`, zero bias.
pub fn init_params(config: &ModelConfig, relations: &RelationVocab) -> Result<DgmsParams<f32>> {
    config.validate()?;
    if relations.is_empty() {
        return Err(Error::Argument("empty relation vocabulary".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let layers = (0..config.layers)
        .map(|l| {
            let (fi, fo) = config.layer_dims(l);
            let self_weight = glorot(&mut rng, fi, fo);
            let rel_weights = (0..relations.len()).map(|_| glorot(&mut rng, fi, fo)).collect();
            RgcnLayer {
                self_weight,
                rel_weights,
            }
        })
        .collect();
    let fc_weight = glorot(&mut rng, config.matched_dim(), config.agg_dim);
    Ok(DgmsParams {
        config: config.clone(),
        relations: relations.clone(),
        layers,
        fc_weight,
        fc_bias: Matrix::zeros(1, config.agg_dim),
    })
}

impl<T: Real> DgmsParams<T> {
    /// Tensors in canonical order with their checkpoint names.
    pub fn named_tensors(&self) -> Vec<(String, &Matrix<T>)> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            out.push((format!("layer{l}.self"), &layer.self_weight));
            for (r, w) in layer.rel_weights.iter().enumerate() {
                let name = self.relations.name(r).unwrap_or("?");
                out.push((format!("layer{l}.rel.{name}"), w));
            }
        }
        out.push(("fc.weight".into(), &self.fc_weight));
        out.push(("fc.bias".into(), &self.fc_bias));
        out
    }

    pub fn tensors(&self) -> Vec<&Matrix<T>> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.push(&layer.self_weight);
            out.extend(layer.rel_weights.iter());
        }
        out.push(&self.fc_weight);
        out.push(&self.fc_bias);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix<T>> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            out.push(&mut layer.self_weight);
            out.extend(layer.rel_weights.iter_mut());
        }
        out.push(&mut self.fc_weight);
        out.push(&mut self.fc_bias);
        out
    }

    /// Rebuilds a parameter set of the same layout from tensors in canonical order.
    pub fn with_tensors<U: Real>(&self, tensors: Vec<Matrix<U>>) -> Result<DgmsParams<U>> {
        let expected = self.tensors().len();
        if tensors.len() != expected {
            return Err(Error::Argument(format!(
                "expected {expected} tensors, got {}",
                tensors.len()
            )));
        }
        let mut it = tensors.into_iter();
        let layers = self
            .layers
            .iter()
            .map(|layer| RgcnLayer {
                self_weight: it.next().unwrap(),
                rel_weights: (0..layer.rel_weights.len()).map(|_| it.next().unwrap()).collect(),
            })
            .collect();
        let out = DgmsParams {
            config: self.config.clone(),
            relations: self.relations.clone(),
            layers,
            fc_weight: it.next().unwrap(),
            fc_bias: it.next().unwrap(),
        };
        out.validate_shapes()?;
        Ok(out)
    }

    pub fn cast<U: Real>(&self) -> DgmsParams<U> {
        self.with_tensors(self.tensors().into_iter().map(|m| m.cast()).collect())
            .expect("same layout")
    }

    pub fn validate_shapes(&self) -> Result<()> {
        let c = &self.config;
        c.validate()?;
        let bad = |what: String, got: (usize, usize), want: (usize, usize)| {
            Err(Error::shape("params", format!("{what}: {got:?}, expected {want:?}")))
        };
        if self.layers.len() != c.layers {
            return Err(Error::shape(
                "params",
                format!("{} layers, config says {}", self.layers.len(), c.layers),
            ));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            let want = c.layer_dims(l);
            if layer.self_weight.shape() != want {
                return bad(format!("layer{l}.self"), layer.self_weight.shape(), want);
            }
            if layer.rel_weights.len() != self.relations.len() {
                return Err(Error::shape(
                    "params",
                    format!(
                        "layer{l}: {} relation weights for {} relations",
                        layer.rel_weights.len(),
                        self.relations.len()
                    ),
                ));
            }
            for (r, w) in layer.rel_weights.iter().enumerate() {
                if w.shape() != want {
                    return bad(format!("layer{l}.rel{r}"), w.shape(), want);
                }
            }
        }
        let fc = (c.matched_dim(), c.agg_dim);
        if self.fc_weight.shape() != fc {
            return bad("fc.weight".into(), self.fc_weight.shape(), fc);
        }
        if self.fc_bias.shape() != (1, c.agg_dim) {
            return bad("fc.bias".into(), self.fc_bias.shape(), (1, c.agg_dim));
        }
        Ok(())
    }

    /// Records every tensor on `tape`, trainable or constant.
    pub fn bind<'t>(&self, tape: &'t Tape<T>, trainable: bool) -> BoundParams<'t, T> {
        let leaf = |m: &Matrix<T>| {
            if trainable {
                tape.param(m.clone())
            } else {
                tape.constant(m.clone())
            }
        };
        let layers = self
            .layers
            .iter()
            .map(|layer| BoundLayer {
                self_weight: leaf(&layer.self_weight),
                rel_weights: layer.rel_weights.iter().map(leaf).collect(),
            })
            .collect();
        BoundParams {
            config: self.config.clone(),
            layers,
            fc_weight: leaf(&self.fc_weight),
            fc_bias: leaf(&self.fc_bias),
        }
    }
}

pub struct BoundLayer<'t, T> {
    pub self_weight: Var<'t, T>,
    pub rel_weights: Vec<Var<'t, T>>,
}

/// Parameters recorded on one tape.
pub struct BoundParams<'t, T> {
    pub config: ModelConfig,
    pub layers: Vec<BoundLayer<'t, T>>,
    pub fc_weight: Var<'t, T>,
    pub fc_bias: Var<'t, T>,
}

impl<'t, T: Real> BoundParams<'t, T> {
    /// Vars in the same canonical order as [`DgmsParams::tensors`].
    pub fn vars(&self) -> Vec<Var<'t, T>> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.push(layer.self_weight);
            out.extend(layer.rel_weights.iter().copied());
        }
        out.push(self.fc_weight);
        out.push(self.fc_bias);
        out
    }

    /// Rebuilds the structure from canonical-order vars (as produced by `vars`).
    pub fn from_vars(config: &ModelConfig, relation_count: usize, vars: &[Var<'t, T>]) -> Result<Self> {
        let per_layer = 1 + relation_count;
        let expected = config.layers * per_layer + 2;
        if vars.len() != expected {
            return Err(Error::Argument(format!(
                "expected {expected} parameter vars, got {}",
                vars.len()
            )));
        }
        let layers = (0..config.layers)
            .map(|l| {
                let base = l * per_layer;
                BoundLayer {
                    self_weight: vars[base],
                    rel_weights: vars[base + 1..base + per_layer].to_vec(),
                }
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            layers,
            fc_weight: vars[expected - 2],
            fc_bias: vars[expected - 1],
        })
    }
}
