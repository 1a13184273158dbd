use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{EncodedExample, JointModel, ModelError, TrainConfig};
use crate::corpus::{build_vocab, Example};
use crate::exec::Exec;
use crate::heads::build_prior_mask;

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean per-sentence joint loss over the epoch.
    pub loss: f64,
    pub dev_f1: Option<f64>,
    pub dev_intent_acc: Option<f64>,
}

pub struct TrainOutcome {
    pub model: JointModel,
    pub metrics: Vec<EpochMetrics>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Adam {
    fn new(model: &JointModel) -> Self {
        let zeros: Vec<Vec<f64>> =
            model.params().iter().map(|(_, t)| vec![0.0; t.data().len()]).collect();
        Adam { m: zeros.clone(), v: zeros, t: 0 }
    }

    fn step(&mut self, model: &mut JointModel, grads: &[Vec<f64>], cfg: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t);
        let bc2 = 1.0 - cfg.beta2.powi(self.t);
        for (i, (_, tensor)) in model.params_mut().iter_mut().enumerate() {
            let (m, v, g) = (&mut self.m[i], &mut self.v[i], &grads[i]);
            for (j, p) in tensor.data_mut().iter_mut().enumerate() {
                m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
                v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
                let mh = m[j] / bc1;
                let vh = v[j] / bc2;
                *p -= cfg.learning_rate * mh / (vh.sqrt() + cfg.adam_eps);
            }
        }
    }
}

fn clip(grads: &mut [Vec<f64>], max_norm: f64) {
    if max_norm <= 0.0 {
        return;
    }
    let norm = grads.iter().flatten().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grads.iter_mut().flatten().for_each(|g| *g *= s);
    }
}

/// Per-example gradients of one minibatch, averaged. Examples are evaluated with `exec`;
/// the sum runs in batch order so the result does not depend on the strategy.
pub fn batch_gradients(
    model: &JointModel,
    batch: &[&EncodedExample],
    exec: Exec,
) -> Result<(f64, Vec<Vec<f64>>), ModelError> {
    let parts = exec.try_map(batch, |ex| model.loss_and_grads(ex))?;
    let mut iter = parts.into_iter();
    let (mut loss, mut total) = iter.next().expect("batches are nonempty");
    for (l, g) in iter {
        loss += l;
        for (acc, part) in total.iter_mut().zip(&g) {
            acc.iter_mut().zip(part).for_each(|(a, b)| *a += b);
        }
    }
    let k = batch.len() as f64;
    if batch.len() > 1 {
        total.iter_mut().flatten().for_each(|g| *g /= k);
    }
    Ok((loss, total))
}

/// Trains a fresh model on `data`.
///
/// Vocabularies and the prior mask come from `data`. With a nonempty `dev` the parameters
/// of the best dev epoch (slot F1, then intent accuracy) are returned, and training stops
/// early once dev scores are perfect or after `patience` epochs without improvement.
/// Without `dev` the final parameters are returned.
pub fn train(
    data: &[Example],
    dev: &[Example],
    cfg: &TrainConfig,
    exec: Exec,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainOutcome, ModelError> {
    if data.is_empty() {
        return Err(ModelError::Contract("training data is empty".into()));
    }
    let vocabs = build_vocab(data, cfg.min_count)?;
    let prior = build_prior_mask(data, &vocabs.intents, &vocabs.slots, cfg.model.smoothing_eps)?;
    let mut model = JointModel::new(cfg.model.clone(), vocabs, prior, cfg.seed)?;
    let encoded = data.iter().map(|e| model.encode_example(e)).collect::<Result<Vec<_>, _>>()?;
    let mut adam = Adam::new(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..encoded.len()).collect();

    let mut metrics = Vec::new();
    let mut best: Option<((f64, f64), usize, crate::params::ParamSet)> = None;
    let mut stale = 0usize;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&EncodedExample> = chunk.iter().map(|&i| &encoded[i]).collect();
            let (loss, mut grads) = batch_gradients(&model, &batch, exec)?;
            if !loss.is_finite() {
                return Err(ModelError::Divergence { epoch, loss });
            }
            total += loss;
            clip(&mut grads, cfg.clip_norm);
            adam.step(&mut model, &grads, cfg);
        }
        let mut m = EpochMetrics {
            epoch,
            loss: total / encoded.len() as f64,
            dev_f1: None,
            dev_intent_acc: None,
        };
        let mut stop = false;
        if !dev.is_empty() {
            let r = model.evaluate(exec, dev)?;
            m.dev_f1 = Some(r.slot_f1);
            m.dev_intent_acc = Some(r.intent_acc);
            let key = (r.slot_f1, r.intent_acc);
            if best.as_ref().is_none_or(|(b, _, _)| key > *b) {
                best = Some((key, epoch, model.params().clone()));
                stale = 0;
            } else {
                stale += 1;
            }
            stop = key == (1.0, 1.0) || (cfg.patience > 0 && stale >= cfg.patience);
        }
        on_epoch(&m);
        metrics.push(m);
        if stop {
            break;
        }
    }

    let mut best_epoch = metrics.len();
    if let Some((_, epoch, params)) = best {
        *model.params_mut() = params;
        best_epoch = epoch;
    }
    Ok(TrainOutcome { model, metrics, best_epoch })
}
