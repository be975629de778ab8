use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::Model;
use super::tape::Mat;
use crate::induction::ForcedStep;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    /// Examples whose gradients are summed before each update.
    pub accumulation: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 30, lr: 1e-3, seed: 0, accumulation: 1 }
    }
}

/// A question with its teacher-forced steps.
#[derive(Debug, Clone)]
pub struct TrainExample {
    pub id: String,
    pub question: Vec<String>,
    pub steps: Vec<ForcedStep>,
}

/// First-order optimizer with per-parameter moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Vec<Mat>,
    v: Vec<Mat>,
}

impl Adam {
    pub fn new(params: &[Mat], lr: f64) -> Self {
        let zeros: Vec<Mat> = params.iter().map(|p| Mat::zeros(p.rows, p.cols)).collect();
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: zeros.clone(), v: zeros }
    }

    /// Applies one update to every tensor with a gradient and `trainable(i)`.
    pub fn update(&mut self, params: &mut [Mat], grads: &[Option<Mat>], trainable: impl Fn(usize) -> bool) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (i, g) in grads.iter().enumerate() {
            let Some(g) = g else { continue };
            if !trainable(i) {
                continue;
            }
            let (p, m, v) = (&mut params[i], &mut self.m[i], &mut self.v[i]);
            for k in 0..g.data.len() {
                let gk = g.data[k];
                m.data[k] = self.beta1 * m.data[k] + (1.0 - self.beta1) * gk;
                v.data[k] = self.beta2 * v.data[k] + (1.0 - self.beta2) * gk * gk;
                p.data[k] -= self.lr * (m.data[k] / c1) / ((v.data[k] / c2).sqrt() + self.eps);
            }
        }
    }
}

fn accumulate(total: &mut Vec<Option<Mat>>, grads: Vec<Option<Mat>>) {
    if total.is_empty() {
        *total = grads;
        return;
    }
    for (t, g) in total.iter_mut().zip(grads) {
        match (t, g) {
            (Some(t), Some(g)) => {
                for (a, b) in t.data.iter_mut().zip(&g.data) {
                    *a += b;
                }
            }
            (slot @ None, g) => *slot = g,
            (Some(_), None) => {}
        }
    }
}

/// Trains with teacher forcing. `on_epoch` receives the epoch number
/// (from 1) and the mean per-example loss; returns the loss curve.
pub fn train(model: &mut Model, examples: &[TrainExample], config: &TrainConfig, mut on_epoch: impl FnMut(usize, f64)) -> Vec<f64> {
    let mut adam = Adam::new(model.params(), config.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut curve = Vec::with_capacity(config.epochs);
    let accumulation = config.accumulation.max(1);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut pending: Vec<Option<Mat>> = Vec::new();
        let mut in_batch = 0;
        for &i in &order {
            let ex = &examples[i];
            let (loss, grads) = model.loss_and_grads(&ex.question, &ex.steps);
            total += loss;
            accumulate(&mut pending, grads);
            in_batch += 1;
            if in_batch == accumulation {
                let trainable: Vec<bool> = (0..model.params().len()).map(|i| model.trainable(i)).collect();
                adam.update(model.params_mut(), &pending, |i| trainable[i]);
                pending.clear();
                in_batch = 0;
            }
        }
        if in_batch > 0 {
            let trainable: Vec<bool> = (0..model.params().len()).map(|i| model.trainable(i)).collect();
            adam.update(model.params_mut(), &pending, |i| trainable[i]);
        }
        let mean = if examples.is_empty() { 0.0 } else { total / examples.len() as f64 };
        on_epoch(epoch, mean);
        curve.push(mean);
    }
    curve
}
