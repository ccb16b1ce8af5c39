use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::AgentKind;
use crate::compile::TreeSpec;
use crate::envs::ActionMode;
use crate::error::{Error, Result};
use crate::growth::{DeepenEvent, GrowthConfig, GrowthPair};
use crate::math::{argmax, softmax};
use crate::model::{GradientTape, Network, ProLoNet};
use crate::train::config::{CriticTarget, LossVariant, TrainerConfig};
use crate::train::loss::{critic_loss, imitation_loss, kl_scaled_loss, ppo_clip_loss, LossOutput};
use crate::train::rmsprop::RmsProp;
use crate::train::trajectory::{normalize_advantages, Decision, Sample};

/// Whether an update imitates the heuristic or follows the policy gradient.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateMode {
    Imitation,
    Rl,
}

/// Episodes before `loki_n` imitate the heuristic; later ones use RL.
pub fn loki_schedule(episode: usize, loki_n: usize) -> UpdateMode {
    if episode < loki_n {
        UpdateMode::Imitation
    } else {
        UpdateMode::Rl
    }
}

// an agent holds one policy, so the size gap between variants costs nothing
#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug)]
pub enum Policy {
    /// A ProLoNet trained together with its deeper shadow.
    Growing(GrowthPair),
    Network(Network),
    /// Crisp traversal; never learns.
    Heuristic(TreeSpec),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub actor: RmsProp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deep_actor: Option<RmsProp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critic: Option<RmsProp>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats {
    /// Mean actor loss over all minibatches of the update.
    pub loss: f64,
    pub critic_loss: f64,
    pub skipped: usize,
}

/// A policy with its critic and optimizer state.
#[derive(Clone, Debug)]
pub struct Agent {
    kind: AgentKind,
    policy: Policy,
    critic: Option<Network>,
    optimizer: OptimizerState,
    supervisor: Option<TreeSpec>,
}

trait Trainable {
    fn raw(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn accumulate(&self, x: &[f64], upstream: &[f64], tape: &mut GradientTape) -> Result<()>;
    fn param_count(&self) -> usize;
    fn flat_params(&self) -> Vec<f64>;
    fn assign(&mut self, values: &[f64]) -> Result<()>;
}

impl Trainable for ProLoNet {
    fn raw(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward_raw(x)
    }
    fn accumulate(&self, x: &[f64], upstream: &[f64], tape: &mut GradientTape) -> Result<()> {
        self.accumulate_backward(x, upstream, tape)
    }
    fn param_count(&self) -> usize {
        self.num_params()
    }
    fn flat_params(&self) -> Vec<f64> {
        self.params()
    }
    fn assign(&mut self, values: &[f64]) -> Result<()> {
        self.set_params(values)
    }
}

impl Trainable for Network {
    fn raw(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward_raw(x)
    }
    fn accumulate(&self, x: &[f64], upstream: &[f64], tape: &mut GradientTape) -> Result<()> {
        self.accumulate_backward(x, upstream, tape)
    }
    fn param_count(&self) -> usize {
        self.num_params()
    }
    fn flat_params(&self) -> Vec<f64> {
        self.params()
    }
    fn assign(&mut self, values: &[f64]) -> Result<()> {
        self.set_params(values)
    }
}

/// One gradient step of `model` on `batch`; `loss_fn` maps raw outputs to
/// a loss and its per-sample raw-output gradients.
fn gradient_step<M: Trainable>(
    model: &mut M,
    opt: &mut RmsProp,
    batch: &[&Sample],
    learning_rate: f64,
    loss_fn: impl FnOnce(&[Vec<f64>]) -> LossOutput,
) -> Result<LossOutput> {
    let raws = batch
        .iter()
        .map(|s| model.raw(&s.state))
        .collect::<Result<Vec<_>>>()?;
    let out = loss_fn(&raws);
    let mut tape = GradientTape::zeros(model.param_count());
    for (s, g) in batch.iter().zip(&out.logit_grads) {
        if g.iter().all(|v| *v == 0.0) {
            continue;
        }
        model.accumulate(&s.state, g, &mut tape)?;
    }
    if tape.as_slice().iter().any(|v| !v.is_finite()) {
        // a poisoned gradient would corrupt every parameter; drop the step
        return Ok(LossOutput {
            skipped: batch.len(),
            ..out
        });
    }
    let mut params = model.flat_params();
    opt.step(&mut params, tape.as_slice(), learning_rate)?;
    model.assign(&params)?;
    Ok(out)
}

fn policy_loss(
    batch: &[&Sample],
    raws: &[Vec<f64>],
    mode: UpdateMode,
    targets: &[usize],
    cfg: &TrainerConfig,
) -> LossOutput {
    let probs: Vec<Vec<f64>> = raws.iter().map(|r| softmax(r)).collect();
    match mode {
        UpdateMode::Imitation => imitation_loss(&probs, targets),
        UpdateMode::Rl => match cfg.loss_variant {
            LossVariant::PpoClip => ppo_clip_loss(batch, &probs, cfg.ppo_clip),
            LossVariant::PpoKlScaled => kl_scaled_loss(batch, &probs),
        },
    }
}

impl Agent {
    /// Wraps a policy. Learning policies get a critic that starts as an
    /// exact copy of the acting network.
    pub fn new(kind: AgentKind, policy: Policy, supervisor: Option<TreeSpec>) -> Self {
        let critic = match &policy {
            Policy::Growing(pair) => Some(Network::ProLoNet(pair.shallow().clone())),
            Policy::Network(net) => Some(net.clone()),
            Policy::Heuristic(_) => None,
        };
        let optimizer = match &policy {
            Policy::Growing(pair) => OptimizerState {
                actor: RmsProp::new(pair.shallow().num_params()),
                deep_actor: Some(RmsProp::new(pair.deep().num_params())),
                critic: critic.as_ref().map(|c| RmsProp::new(c.num_params())),
            },
            Policy::Network(net) => OptimizerState {
                actor: RmsProp::new(net.num_params()),
                deep_actor: None,
                critic: critic.as_ref().map(|c| RmsProp::new(c.num_params())),
            },
            Policy::Heuristic(_) => OptimizerState::default(),
        };
        Self {
            kind,
            policy,
            critic,
            optimizer,
            supervisor,
        }
    }

    pub fn kind(&self) -> AgentKind {
        self.kind
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn critic(&self) -> Option<&Network> {
        self.critic.as_ref()
    }

    pub fn optimizer(&self) -> &OptimizerState {
        &self.optimizer
    }

    pub fn supervisor(&self) -> Option<&TreeSpec> {
        self.supervisor.as_ref()
    }

    pub fn learns(&self) -> bool {
        !matches!(self.policy, Policy::Heuristic(_))
    }

    /// The acting network, when there is one.
    pub fn actor(&self) -> Option<Network> {
        match &self.policy {
            Policy::Growing(pair) => Some(Network::ProLoNet(pair.shallow().clone())),
            Policy::Network(net) => Some(net.clone()),
            Policy::Heuristic(_) => None,
        }
    }

    pub fn actor_prolonet(&self) -> Option<&ProLoNet> {
        match &self.policy {
            Policy::Growing(pair) => Some(pair.shallow()),
            Policy::Network(net) => net.as_prolonet(),
            Policy::Heuristic(_) => None,
        }
    }

    pub fn deep_actor(&self) -> Option<&ProLoNet> {
        match &self.policy {
            Policy::Growing(pair) => Some(pair.deep()),
            _ => None,
        }
    }

    pub fn set_growth_config(&mut self, config: GrowthConfig) {
        if let Policy::Growing(pair) = &mut self.policy {
            pair.set_epsilon(config.epsilon);
            pair.set_aggregation(config.aggregation);
        }
    }

    /// Action distribution in state `obs`.
    pub fn action_probs(&self, obs: &[f64]) -> Result<Vec<f64>> {
        match &self.policy {
            Policy::Growing(pair) => Ok(pair.shallow().forward(obs)?.probs),
            Policy::Network(net) => Ok(net.forward(obs)?.probs),
            Policy::Heuristic(tree) => {
                let mut p = vec![0.0; tree.action_names.len()];
                p[tree.decide(obs)?] = 1.0;
                Ok(p)
            }
        }
    }

    /// Critic value of a state under the current policy:
    /// `sum_a pi(a|s) Q(s, a)`; 0 without a critic.
    pub fn state_value(&self, obs: &[f64]) -> Result<f64> {
        match &self.critic {
            Some(c) => Ok(crate::math::dot(
                &self.action_probs(obs)?,
                &c.forward_raw(obs)?,
            )),
            None => Ok(0.0),
        }
    }

    pub fn decide<R: Rng + ?Sized>(
        &self,
        obs: &[f64],
        mode: ActionMode,
        rng: &mut R,
    ) -> Result<Decision> {
        let probs = self.action_probs(obs)?;
        let action = match mode {
            ActionMode::Greedy => argmax(&probs),
            ActionMode::Sample => sample_index(&probs, rng),
        };
        // an action-independent baseline keeps the policy gradient unbiased
        let value = match &self.critic {
            Some(c) => crate::math::dot(&probs, &c.forward_raw(obs)?),
            None => 0.0,
        };
        Ok(Decision {
            action,
            probs,
            value,
        })
    }

    /// Runs `cfg.epochs_per_episode` passes over `samples` in shuffled
    /// minibatches of `min(len, batch_cap)`, updating the acting network,
    /// the deep shadow (when growing) and the critic.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        samples: &mut [Sample],
        mode: UpdateMode,
        cfg: &TrainerConfig,
        rng: &mut R,
    ) -> Result<UpdateStats> {
        if !self.learns() || samples.is_empty() {
            return Ok(UpdateStats::default());
        }
        if mode == UpdateMode::Rl && cfg.normalize_advantages {
            normalize_advantages(samples);
        }
        let targets: Vec<usize> = match (mode, &self.supervisor) {
            (UpdateMode::Imitation, Some(tree)) => samples
                .iter()
                .map(|s| tree.decide(&s.state))
                .collect::<Result<_>>()?,
            (UpdateMode::Imitation, None) => {
                return Err(Error::Config("imitation requires a heuristic tree".into()))
            }
            (UpdateMode::Rl, _) => Vec::new(),
        };
        let batch_size = samples.len().min(cfg.batch_cap);
        let mut order: Vec<usize> = (0..samples.len()).collect();
        let mut stats = UpdateStats::default();
        let mut steps = 0usize;
        for _ in 0..cfg.epochs_per_episode {
            order.shuffle(rng);
            for chunk in order.chunks(batch_size) {
                let batch: Vec<&Sample> = chunk.iter().map(|&i| &samples[i]).collect();
                let chunk_targets: Vec<usize> = if targets.is_empty() {
                    Vec::new()
                } else {
                    chunk.iter().map(|&i| targets[i]).collect()
                };
                let lr = cfg.learning_rate;
                let loss = |raws: &[Vec<f64>]| policy_loss(&batch, raws, mode, &chunk_targets, cfg);
                let out = match &mut self.policy {
                    Policy::Growing(pair) => {
                        let out = gradient_step(
                            pair.shallow_mut(),
                            &mut self.optimizer.actor,
                            &batch,
                            lr,
                            loss,
                        )?;
                        if cfg.growth {
                            let deep_opt = self
                                .optimizer
                                .deep_actor
                                .as_mut()
                                .expect("growing agents track deep state");
                            gradient_step(pair.deep_mut(), deep_opt, &batch, lr, |raws| {
                                policy_loss(&batch, raws, mode, &chunk_targets, cfg)
                            })?;
                        }
                        out
                    }
                    Policy::Network(net) => {
                        gradient_step(net, &mut self.optimizer.actor, &batch, lr, loss)?
                    }
                    Policy::Heuristic(_) => unreachable!("heuristic agents return early"),
                };
                stats.loss += out.loss;
                stats.skipped += out.skipped;
                if let (Some(critic), Some(opt)) = (&mut self.critic, &mut self.optimizer.critic) {
                    let critic_targets: Vec<f64> = batch
                        .iter()
                        .map(|s| match cfg.critic_target {
                            CriticTarget::Return => s.ret,
                            CriticTarget::Reward => s.reward,
                        })
                        .collect();
                    let out = gradient_step(critic, opt, &batch, lr, |values| {
                        critic_loss(&batch, values, &critic_targets)
                    })?;
                    stats.critic_loss += out.loss;
                }
                steps += 1;
            }
        }
        stats.loss /= steps as f64;
        stats.critic_loss /= steps as f64;
        Ok(stats)
    }

    /// Deepens every shallow leaf that meets the growth condition,
    /// carrying optimizer state along with the parameters.
    pub fn grow(&mut self) -> Vec<DeepenEvent> {
        match &mut self.policy {
            Policy::Growing(pair) => {
                let deep = self
                    .optimizer
                    .deep_actor
                    .as_mut()
                    .expect("growing agents track deep state");
                pair.maybe_deepen_with_state(Some((
                    &mut self.optimizer.actor.square_avg,
                    &mut deep.square_avg,
                )))
            }
            _ => Vec::new(),
        }
    }
}

/// Inverse-CDF draw from a probability vector.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left a sliver above the cumulative sum
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(probs.len() - 1)
}
