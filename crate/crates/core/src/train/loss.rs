//! Batch losses. Each returns the mean loss plus, per sample, the gradient
//! of that mean loss with respect to the network's raw outputs (the logits
//! fed to the softmax, or the critic's outputs).

use crate::math::kl_divergence;
use crate::train::trajectory::Sample;

pub const KL_FLOOR: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    pub logit_grads: Vec<Vec<f64>>,
    /// Samples left out of the mean because their loss was not finite.
    pub skipped: usize,
}

impl LossOutput {
    fn finish(mut self, counted: usize) -> Self {
        if counted == 0 {
            self.loss = 0.0;
            return self;
        }
        let scale = 1.0 / counted as f64;
        self.loss *= scale;
        for g in &mut self.logit_grads {
            g.iter_mut().for_each(|v| *v *= scale);
        }
        self
    }
}

/// d log p_a / d logits = onehot(a) - p.
fn log_prob_grad(probs: &[f64], action: usize) -> Vec<f64> {
    probs
        .iter()
        .enumerate()
        .map(|(j, p)| if j == action { 1.0 - p } else { -p })
        .collect()
}

/// Per-sample clipped surrogate `min(rho A, clip(rho, 1-c, 1+c) A)` with
/// `rho = new[a] / old[a]`; the old probability is the behavior-time one.
pub fn clipped_objective(ratio: f64, advantage: f64, clip: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - clip, 1.0 + clip) * advantage)
}

/// Negated mean clipped surrogate.
pub fn ppo_clip_loss(batch: &[&Sample], new_probs: &[Vec<f64>], clip: f64) -> LossOutput {
    let mut out = LossOutput {
        loss: 0.0,
        logit_grads: Vec::with_capacity(batch.len()),
        skipped: 0,
    };
    for (s, probs) in batch.iter().zip(new_probs) {
        let ratio = probs[s.action] / s.old_probs[s.action];
        let unclipped = ratio * s.advantage;
        let objective = clipped_objective(ratio, s.advantage, clip);
        out.loss -= objective;
        // the clipped branch is constant in the parameters
        let active = unclipped <= objective;
        let mut g = log_prob_grad(probs, s.action);
        let coef = if active { -s.advantage * ratio } else { 0.0 };
        g.iter_mut().for_each(|v| *v *= coef);
        out.logit_grads.push(g);
    }
    out.finish(batch.len())
}

/// Negated mean of `A log new[a] / max(KL(new || old), 1e-4)`, both
/// distributions taken over the full action set.
pub fn kl_scaled_loss(batch: &[&Sample], new_probs: &[Vec<f64>]) -> LossOutput {
    let mut out = LossOutput {
        loss: 0.0,
        logit_grads: Vec::with_capacity(batch.len()),
        skipped: 0,
    };
    for (s, p) in batch.iter().zip(new_probs) {
        let n = p.len();
        let kl = kl_divergence(p, &s.old_probs);
        let log_p = p[s.action].ln();
        if !kl.is_finite() || !log_p.is_finite() {
            out.skipped += 1;
            out.logit_grads.push(vec![0.0; n]);
            continue;
        }
        let denom = kl.max(KL_FLOOR);
        let objective = s.advantage * log_p / denom;
        out.loss -= objective;
        let mut g: Vec<f64> = log_prob_grad(p, s.action)
            .into_iter()
            .map(|d| s.advantage * d / denom)
            .collect();
        if kl > KL_FLOOR {
            let scale = s.advantage * log_p / (denom * denom);
            for j in 0..n {
                let d_kl = if p[j] > 0.0 {
                    p[j] * ((p[j] / s.old_probs[j]).ln() - kl)
                } else {
                    0.0
                };
                g[j] -= scale * d_kl;
            }
        }
        g.iter_mut().for_each(|v| *v = -*v);
        out.logit_grads.push(g);
    }
    let counted = batch.len() - out.skipped;
    out.finish(counted)
}

/// Mean of `(values[i][a_i] - targets[i])^2`.
pub fn critic_loss(batch: &[&Sample], values: &[Vec<f64>], targets: &[f64]) -> LossOutput {
    let mut out = LossOutput {
        loss: 0.0,
        logit_grads: Vec::with_capacity(batch.len()),
        skipped: 0,
    };
    for ((s, v), t) in batch.iter().zip(values).zip(targets) {
        let err = v[s.action] - t;
        out.loss += err * err;
        let mut g = vec![0.0; v.len()];
        g[s.action] = 2.0 * err;
        out.logit_grads.push(g);
    }
    out.finish(batch.len())
}

/// Mean cross-entropy `-log new[target]` against crisp target actions.
pub fn imitation_loss(new_probs: &[Vec<f64>], targets: &[usize]) -> LossOutput {
    let mut out = LossOutput {
        loss: 0.0,
        logit_grads: Vec::with_capacity(targets.len()),
        skipped: 0,
    };
    for (p, &t) in new_probs.iter().zip(targets) {
        out.loss -= p[t].max(f64::MIN_POSITIVE).ln();
        out.logit_grads
            .push(log_prob_grad(p, t).into_iter().map(|d| -d).collect());
    }
    out.finish(targets.len())
}
