use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{AdamState, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPS, DEFAULT_LR};
use super::layers::softmax_cross_entropy;
use super::model::{CnnModel, ModelGrads};
use super::NetError;
use crate::featmap::FeatureTensor;
use crate::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    /// Optimizer steps.
    pub iterations: usize,
    /// Examples per step; `0` or anything at least the set size means full batch.
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: DEFAULT_LR,
            iterations: 300,
            batch_size: 64,
            seed: 0,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            eps: DEFAULT_EPS,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: &str| Err(NetError::InvalidConfig(m.to_string()));
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad("learning rate must be positive");
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return bad("Adam epsilon must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: CnnModel,
    /// Mean mini-batch loss of every optimizer step.
    pub loss_trace: Vec<f64>,
}

/// Mini-batch Adam on softmax cross-entropy.
///
/// Batches are drawn from a fresh permutation each epoch; the permutation
/// stream is derived from `config.seed`, so identical inputs give identical
/// parameters.
pub fn train(
    mut model: CnnModel,
    tensors: &[FeatureTensor],
    config: &TrainConfig,
) -> Result<TrainOutcome, NetError> {
    config.validate()?;
    model.validate()?;
    if tensors.is_empty() {
        return Err(NetError::EmptyTrainingSet);
    }
    let has = |l: Label| tensors.iter().any(|t| t.label == l);
    if !(has(Label::Left) && has(Label::Right)) {
        return Err(NetError::SingleClass);
    }

    let n = tensors.len();
    let batch = if config.batch_size == 0 || config.batch_size >= n {
        n
    } else {
        config.batch_size
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut cursor = n;

    let lens: Vec<usize> = model.params().iter().map(|p| p.len()).collect();
    let mut adam = AdamState::new(&lens, config.lr);
    adam.beta1 = config.beta1;
    adam.beta2 = config.beta2;
    adam.eps = config.eps;

    let mut grads = ModelGrads::zeros_like(&model);
    let mut loss_trace = Vec::with_capacity(config.iterations);
    let mut picked = Vec::with_capacity(batch);
    for _ in 0..config.iterations {
        picked.clear();
        if batch == n {
            picked.extend(0..n);
        } else {
            while picked.len() < batch {
                if cursor == n {
                    order.shuffle(&mut rng);
                    cursor = 0;
                }
                picked.push(order[cursor]);
                cursor += 1;
            }
        }
        grads.clear();
        let mut loss = 0.0;
        for &i in &picked {
            let t = &tensors[i];
            let trace = model.forward(&t.planes)?;
            let (l, gl) = softmax_cross_entropy(&trace.logits, t.label.index())?;
            loss += l;
            model.backward(&trace, &gl, &mut grads)?;
        }
        let inv = 1.0 / picked.len() as f64;
        grads.scale(inv);
        loss_trace.push(loss * inv);
        adam.step(&mut model.params_mut(), &grads.slices())?;
    }
    Ok(TrainOutcome { model, loss_trace })
}
