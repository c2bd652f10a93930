//! Triplet sampling, margin ranking loss, Adam, and the epoch loop.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{triple_loss, DgmsParams, PreparedGraph};
use crate::tensor::{Matrix, Tape};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub margin: f32,
    pub learning_rate: f32,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
    /// Draw fresh negatives every epoch; when false, epoch 0's triples are reused.
    pub resample_negatives: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            margin: 0.5,
            learning_rate: 1e-4,
            batch_size: 10,
            epochs: 10,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            resample_negatives: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.margin.is_nan() || self.margin <= 0.0 {
            return Err(Error::Argument("margin must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Argument("batch size must be at least 1".into()));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Argument("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// `(query, positive code, negative code)` as indices into a pair set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub query: usize,
    pub positive: usize,
    pub negative: usize,
}

/// Stream id reserved for validation triples so they never coincide with an
/// epoch's stream.
const VALIDATION_STREAM: u64 = u64::MAX;

/// One shuffled triple per pair, negatives uniform over the other pairs. The
/// random stream is keyed by `(seed, epoch)`.
pub fn sample_triples(pairs: usize, epoch: u64, seed: u64) -> Result<Vec<Triple>> {
    if pairs < 2 {
        return Err(Error::Argument(format!(
            "need at least 2 pairs to sample negatives, got {pairs}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    let mut out: Vec<Triple> = (0..pairs)
        .map(|i| {
            // uniform over {0..pairs} \ {i}
            let mut neg = rng.gen_range(0..pairs - 1);
            if neg >= i {
                neg += 1;
            }
            Triple {
                query: i,
                positive: i,
                negative: neg,
            }
        })
        .collect();
    out.shuffle(&mut rng);
    Ok(out)
}

/// Paired text and code graphs; pair `i` is `(texts[i], codes[i])`.
#[derive(Clone, Copy)]
pub struct PairSet<'a> {
    pub texts: &'a [PreparedGraph<f32>],
    pub codes: &'a [PreparedGraph<f32>],
}

impl<'a> PairSet<'a> {
    pub fn new(texts: &'a [PreparedGraph<f32>], codes: &'a [PreparedGraph<f32>]) -> Result<Self> {
        if texts.len() != codes.len() {
            return Err(Error::Argument(format!(
                "{} texts but {} code graphs",
                texts.len(),
                codes.len()
            )));
        }
        Ok(Self { texts, codes })
    }

    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texts.is_empty()
    }
}

/// Loss value of one triple and, when it is positive, the gradient of every
/// parameter tensor in canonical order.
pub fn triple_loss_and_grads(
    params: &DgmsParams<f32>,
    pairs: &PairSet<'_>,
    t: Triple,
    margin: f32,
) -> Result<(f32, Option<Vec<Matrix<f32>>>)> {
    let tape = Tape::new();
    let bound = params.bind(&tape, true);
    let loss = triple_loss(
        &tape,
        &pairs.texts[t.query],
        &pairs.codes[t.positive],
        &pairs.codes[t.negative],
        margin,
        &bound,
    )?;
    let value = loss.value().item();
    if value <= 0.0 {
        return Ok((value, None));
    }
    let grads = tape.backward(loss)?;
    Ok((value, Some(bound.vars().into_iter().map(|v| grads.get_or_zeros(v)).collect())))
}

/// Loss value only.
pub fn triple_loss_value(params: &DgmsParams<f32>, pairs: &PairSet<'_>, t: Triple, margin: f32) -> Result<f32> {
    let tape = Tape::new();
    let bound = params.bind(&tape, false);
    let loss = triple_loss(
        &tape,
        &pairs.texts[t.query],
        &pairs.codes[t.positive],
        &pairs.codes[t.negative],
        margin,
        &bound,
    )?;
    let v = loss.value().item();
    Ok(v)
}

/// Mean loss over `triples` and the gradient of that mean. Triples are
/// evaluated in parallel; the reduction runs in input order.
pub fn batch_loss_and_grads(
    params: &DgmsParams<f32>,
    pairs: &PairSet<'_>,
    triples: &[Triple],
    margin: f32,
) -> Result<(f32, Vec<Matrix<f32>>)> {
    let results: Vec<_> = triples
        .par_iter()
        .map(|&t| triple_loss_and_grads(params, pairs, t, margin))
        .collect::<Result<_>>()?;
    let mut total: Vec<Matrix<f32>> = params
        .tensors()
        .iter()
        .map(|m| Matrix::zeros(m.rows(), m.cols()))
        .collect();
    let mut loss = 0.0f32;
    for (value, grads) in results {
        loss += value;
        if let Some(grads) = grads {
            for (acc, g) in total.iter_mut().zip(&grads) {
                acc.add_assign(g);
            }
        }
    }
    let inv = 1.0 / triples.len().max(1) as f32;
    for g in &mut total {
        *g = g.scaled(inv);
    }
    Ok((loss * inv, total))
}

pub fn mean_loss(params: &DgmsParams<f32>, pairs: &PairSet<'_>, triples: &[Triple], margin: f32) -> Result<f32> {
    let values: Vec<f32> = triples
        .par_iter()
        .map(|&t| triple_loss_value(params, pairs, t, margin))
        .collect::<Result<_>>()?;
    Ok(values.iter().sum::<f32>() / values.len().max(1) as f32)
}

/// Every triple `(i, i, j)` with `j ≠ i`, in lexicographic order.
pub fn all_triples(pairs: usize) -> Vec<Triple> {
    (0..pairs)
        .flat_map(|i| {
            (0..pairs).filter(move |&j| j != i).map(move |j| Triple {
                query: i,
                positive: i,
                negative: j,
            })
        })
        .collect()
}

/// First and second moment estimates plus the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Matrix<f32>>,
    pub v: Vec<Matrix<f32>>,
}

impl AdamState {
    pub fn new(params: &DgmsParams<f32>) -> Self {
        let zeros: Vec<_> = params
            .tensors()
            .iter()
            .map(|t| Matrix::zeros(t.rows(), t.cols()))
            .collect();
        Self {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(
    params: &mut DgmsParams<f32>,
    grads: &[Matrix<f32>],
    state: &mut AdamState,
    config: &TrainConfig,
) -> Result<()> {
    let mut tensors = params.tensors_mut();
    if grads.len() != tensors.len() || state.m.len() != tensors.len() {
        return Err(Error::shape(
            "adam_step",
            format!("{} grads for {} tensors", grads.len(), tensors.len()),
        ));
    }
    for (t, g) in tensors.iter().zip(grads) {
        if t.shape() != g.shape() {
            return Err(Error::shape(
                "adam_step",
                format!("gradient {:?} for tensor {:?}", g.shape(), t.shape()),
            ));
        }
    }
    state.step += 1;
    let (b1, b2) = (config.beta1, config.beta2);
    let bc1 = 1.0 - b1.powi(state.step as i32);
    let bc2 = 1.0 - b2.powi(state.step as i32);
    let lr = config.learning_rate;
    for ((p, g), (m, v)) in tensors
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        let cells = p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut().iter_mut().zip(v.data_mut()));
        for ((pi, &gi), (mi, vi)) in cells {
            *mi = b1 * *mi + (1.0 - b1) * gi;
            *vi = b2 * *vi + (1.0 - b2) * gi * gi;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *pi -= lr * m_hat / (v_hat.sqrt() + config.epsilon);
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f32,
    pub val_loss: f32,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters with the lowest validation loss (initial ones if `epochs == 0`).
    pub best: DgmsParams<f32>,
    pub best_adam: AdamState,
    /// 1-based epoch of `best`; 0 when no epoch ran.
    pub best_epoch: usize,
    pub best_val_loss: Option<f32>,
    /// Parameters after the last epoch.
    pub last: DgmsParams<f32>,
    pub history: Vec<EpochRecord>,
}

fn check_finite(v: f32, what: impl FnOnce() -> String) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{} = {v}", what())))
    }
}

/// Epoch loop: resample triples, mean-loss minibatches, Adam, then score the
/// fixed validation triples and keep the best parameters. `on_epoch` sees each
/// record as it is produced.
pub fn train(
    init: DgmsParams<f32>,
    train_pairs: &PairSet<'_>,
    val_pairs: &PairSet<'_>,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_pairs.is_empty() || val_pairs.is_empty() {
        return Err(Error::Argument("training and validation sets must be non-empty".into()));
    }
    let mut params = init;
    let mut adam = AdamState::new(&params);
    let mut outcome = TrainOutcome {
        best: params.clone(),
        best_adam: adam.clone(),
        best_epoch: 0,
        best_val_loss: None,
        last: params.clone(),
        history: Vec::new(),
    };
    if config.epochs == 0 {
        return Ok(outcome);
    }
    let val_triples = sample_triples(val_pairs.len(), VALIDATION_STREAM, config.seed)?;
    let frozen = if config.resample_negatives {
        None
    } else {
        Some(sample_triples(train_pairs.len(), 0, config.seed)?)
    };

    for epoch in 0..config.epochs {
        let started = Instant::now();
        let triples = match &frozen {
            Some(t) => t.clone(),
            None => sample_triples(train_pairs.len(), epoch as u64, config.seed)?,
        };
        let mut loss_sum = 0.0f64;
        for (b, batch) in triples.chunks(config.batch_size).enumerate() {
            let (loss, grads) = batch_loss_and_grads(&params, train_pairs, batch, config.margin)?;
            check_finite(loss, || format!("epoch {} batch {b} loss", epoch + 1))?;
            adam_step(&mut params, &grads, &mut adam, config)?;
            loss_sum += loss as f64 * batch.len() as f64;
        }
        let train_loss = (loss_sum / triples.len() as f64) as f32;
        let val_loss = mean_loss(&params, val_pairs, &val_triples, config.margin)?;
        check_finite(val_loss, || format!("epoch {} validation loss", epoch + 1))?;

        let record = EpochRecord {
            epoch: epoch + 1,
            train_loss,
            val_loss,
            seconds: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {}: train {:.5} val {:.5} ({:.1}s)",
            record.epoch,
            train_loss,
            val_loss,
            record.seconds
        );
        on_epoch(&record);
        if outcome.best_val_loss.is_none_or(|b| val_loss < b) {
            outcome.best = params.clone();
            outcome.best_adam = adam.clone();
            outcome.best_epoch = epoch + 1;
            outcome.best_val_loss = Some(val_loss);
        }
        outcome.history.push(record);
    }
    outcome.last = params;
    Ok(outcome)
}
