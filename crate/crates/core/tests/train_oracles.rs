// index loops mirror the formulas being checked
#![allow(clippy::needless_range_loop)]

mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use prolonet::baselines::{build_agent, default_tree, AgentKind};
use prolonet::envs::{ActionMode, Domain};
use prolonet::model::Network;
use prolonet::train::{
    divergence, kl_scaled_loss, loki_schedule, play, ppo_clip_loss, Agent, RmsProp, Sample,
    TrainEvent, Trainer, TrainerConfig, Trajectory, Transition, UpdateMode,
};

fn softmax_ref(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

fn kl_scaled_reference(samples: &[Sample], logits: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for (s, z) in samples.iter().zip(logits) {
        let p = softmax_ref(z);
        let mut kl = 0.0;
        for j in 0..p.len() {
            kl += p[j] * (p[j] / s.old_probs[j]).ln();
        }
        total += s.advantage * p[s.action].ln() / kl.max(1e-4);
    }
    -total / samples.len() as f64
}

fn trajectory(rewards: &[f64], values: &[f64]) -> Trajectory {
    let mut t = Trajectory::default();
    for (r, v) in rewards.iter().zip(values) {
        t.push(Transition {
            state: vec![0.0],
            action: 0,
            action_probs: vec![1.0],
            reward: *r,
            value_estimate: *v,
        });
    }
    t
}

fn random_sample<R: Rng>(rng: &mut R, actions: usize) -> (Sample, Vec<f64>) {
    let old_logits: Vec<f64> = (0..actions).map(|_| rng.random_range(-2.0..2.0)).collect();
    let new_logits: Vec<f64> = old_logits
        .iter()
        .map(|v| v + rng.random_range(-0.6..0.6))
        .collect();
    let sample = Sample {
        state: vec![],
        action: rng.random_range(0..actions),
        old_probs: softmax_ref(&old_logits),
        ret: 0.0,
        reward: 0.0,
        advantage: rng.random_range(-2.0..2.0),
    };
    (sample, new_logits)
}

/// Central finite differences of `f` with respect to every logit.
fn logit_fd(logits: &[Vec<f64>], f: impl Fn(&[Vec<f64>]) -> f64) -> Vec<Vec<f64>> {
    let h = 1e-6;
    let mut out = vec![vec![0.0; logits[0].len()]; logits.len()];
    for i in 0..logits.len() {
        for j in 0..logits[i].len() {
            let mut plus = logits.to_vec();
            plus[i][j] += h;
            let mut minus = logits.to_vec();
            minus[i][j] -= h;
            out[i][j] = (f(&plus) - f(&minus)) / (2.0 * h);
        }
    }
    out
}

#[test]
fn returns_match_worked_cases() {
    let mut t = trajectory(&[1.0, 1.0, 1.0], &[0.0; 3]);
    t.compute_returns_advantages(0.0).unwrap();
    assert_eq!(t.returns, vec![1.0, 1.0, 1.0]);
    let mut t = trajectory(&[0.0, 0.0, 1.0], &[0.1, 0.2, 0.3]);
    t.compute_returns_advantages(0.5).unwrap();
    assert_eq!(t.returns, vec![0.25, 0.5, 1.0]);
    assert_eq!(t.advantages, vec![0.25 - 0.1, 0.5 - 0.2, 1.0 - 0.3]);
    assert!(Trajectory::default()
        .compute_returns_advantages(0.9)
        .is_err());
}

#[test]
fn ppo_loss_matches_straight_line_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let (samples, logits): (Vec<Sample>, Vec<Vec<f64>>) =
        (0..16).map(|_| random_sample(&mut rng, 3)).unzip();
    let refs: Vec<&Sample> = samples.iter().collect();
    let new_probs: Vec<Vec<f64>> = logits.iter().map(|z| softmax_ref(z)).collect();
    let out = ppo_clip_loss(&refs, &new_probs, 0.2);
    let actions: Vec<usize> = samples.iter().map(|s| s.action).collect();
    let adv: Vec<f64> = samples.iter().map(|s| s.advantage).collect();
    let old: Vec<Vec<f64>> = samples.iter().map(|s| s.old_probs.clone()).collect();
    let expected = common::ppo_loss_reference(&actions, &adv, &old, &new_probs, 0.2);
    assert!(
        (out.loss - expected).abs() <= 1e-12,
        "{} vs {expected}",
        out.loss
    );

    let fd = logit_fd(&logits, |z| {
        let p: Vec<Vec<f64>> = z.iter().map(|v| softmax_ref(v)).collect();
        common::ppo_loss_reference(&actions, &adv, &old, &p, 0.2)
    });
    for (g, n) in out.logit_grads.iter().zip(&fd) {
        for (a, b) in g.iter().zip(n) {
            assert!(common::rel_err(*a, *b, 1e-6) <= 1e-4, "{a} vs {b}");
        }
    }
}

#[test]
fn kl_scaled_loss_matches_reference_and_its_gradient() {
    let s = Sample {
        state: vec![],
        action: 0,
        old_probs: vec![0.5, 0.5],
        ret: 0.0,
        reward: 0.0,
        advantage: 1.0,
    };
    let kl = 0.8 * 1.6f64.ln() + 0.2 * 0.4f64.ln();
    assert!((kl - 0.19274).abs() < 1e-5);
    let out = kl_scaled_loss(&[&s], &[vec![0.8, 0.2]]);
    assert!((-out.loss - 0.8f64.ln() / kl).abs() < 1e-12);
    assert!((-out.loss + 1.1577).abs() < 1e-4);

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (samples, logits): (Vec<Sample>, Vec<Vec<f64>>) =
        (0..12).map(|_| random_sample(&mut rng, 4)).unzip();
    let refs: Vec<&Sample> = samples.iter().collect();
    let probs: Vec<Vec<f64>> = logits.iter().map(|z| softmax_ref(z)).collect();
    let out = kl_scaled_loss(&refs, &probs);
    assert_eq!(out.skipped, 0);
    let expected = kl_scaled_reference(&samples, &logits);
    assert!((out.loss - expected).abs() <= 1e-9 * expected.abs().max(1.0));
    let fd = logit_fd(&logits, |z| kl_scaled_reference(&samples, z));
    for (g, n) in out.logit_grads.iter().zip(&fd) {
        for (a, b) in g.iter().zip(n) {
            assert!(common::rel_err(*a, *b, 1e-4) <= 1e-4, "{a} vs {b}");
        }
    }
}

#[test]
fn rmsprop_matches_hand_arithmetic() {
    let mut opt = RmsProp::new(1);
    let mut p = vec![0.0];
    opt.step(&mut p, &[1.0], 0.01).unwrap();
    assert!((opt.square_avg[0] - 0.01).abs() < 1e-15);
    assert!((p[0] - -0.01 / (0.1 + 1e-8)).abs() < 1e-15);
    // second step by hand
    let v: f64 = 0.99 * 0.01 + 0.01 * 0.25;
    let expected = p[0] - 0.01 * 0.5 / (v.sqrt() + 1e-8);
    opt.step(&mut p, &[0.5], 0.01).unwrap();
    assert!((p[0] - expected).abs() < 1e-15);
    let before = p[0];
    opt.step(&mut p, &[0.0], 0.01).unwrap();
    assert_eq!(p[0], before);
    assert!((opt.square_avg[0] - 0.99 * v).abs() < 1e-15);
}

#[test]
fn loki_switches_after_n_episodes() {
    assert_eq!(loki_schedule(0, 0), UpdateMode::Rl);
    assert_eq!(loki_schedule(199, 200), UpdateMode::Imitation);
    assert_eq!(loki_schedule(200, 200), UpdateMode::Rl);
}

#[test]
fn critic_starts_as_a_copy_of_the_actor() {
    for kind in [AgentKind::ProlonetInit, AgentKind::ProlonetRandom] {
        let tree = default_tree(Domain::Cartpole);
        let agent = build_agent(kind, Domain::Cartpole, Some(&tree), 3).unwrap();
        let actor = agent.actor_prolonet().unwrap();
        let critic = agent.critic().unwrap().as_prolonet().unwrap();
        let d = divergence(actor, critic).unwrap();
        assert_eq!(
            (d.mse_weights, d.mse_comparators, d.mse_leaves),
            (0.0, 0.0, 0.0)
        );
    }
}

#[test]
fn zero_learning_rate_freezes_every_parameter() {
    for kind in [AgentKind::ProlonetInit, AgentKind::Mlp] {
        let tree = default_tree(Domain::Cartpole);
        let agent = build_agent(kind, Domain::Cartpole, Some(&tree), 2).unwrap();
        let actor = agent.actor().unwrap().params();
        let critic = agent.critic().unwrap().params();
        let cfg = TrainerConfig {
            learning_rate: 0.0,
            epsilon_growth: f64::INFINITY,
            ..Default::default()
        };
        let mut trainer = Trainer::new(agent, Domain::Cartpole, cfg, 2).unwrap();
        trainer.train(8, |_| true).unwrap();
        assert_eq!(trainer.agent().actor().unwrap().params(), actor);
        assert_eq!(trainer.agent().critic().unwrap().params(), critic);
    }
}

#[test]
fn behavior_distribution_is_recorded_at_selection_time() {
    let tree = default_tree(Domain::Cartpole);
    let agent = build_agent(AgentKind::ProlonetInit, Domain::Cartpole, Some(&tree), 4).unwrap();
    let mut env = Domain::Cartpole.make_env();
    let out = play(&agent, env.as_mut(), 4, 1, 0, ActionMode::Sample, None).unwrap();
    let traj = &out.trajectories[0];
    for t in &traj.transitions {
        assert_eq!(t.action_probs, agent.action_probs(&t.state).unwrap());
        let value = agent.state_value(&t.state).unwrap();
        assert_eq!(t.value_estimate, value);
    }

    // after an update the stored distribution must stay the pre-update one
    let mut traj = traj.clone();
    traj.compute_returns_advantages(0.99).unwrap();
    let mut samples = prolonet::train::samples_from(&[traj.clone()]);
    let mut updated = agent.clone();
    let cfg = TrainerConfig {
        learning_rate: 0.05,
        ..Default::default()
    };
    updated
        .update(
            &mut samples,
            UpdateMode::Rl,
            &cfg,
            &mut ChaCha8Rng::seed_from_u64(1),
        )
        .unwrap();
    let moved = traj
        .transitions
        .iter()
        .any(|t| updated.action_probs(&t.state).unwrap() != t.action_probs);
    assert!(moved);
    for (s, t) in samples.iter().zip(&traj.transitions) {
        assert_eq!(s.old_probs, t.action_probs);
    }
}

/// With one epoch and a cap at least the buffer size, an update is a single
/// full-batch RMSProp step on the vanilla policy gradient (ratio 1).
#[test]
fn full_batch_update_is_one_mean_gradient_step() {
    let agent = build_agent(AgentKind::Mlp, Domain::Cartpole, None, 6).unwrap();
    let net = agent.actor().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut samples: Vec<Sample> = (0..10)
        .map(|_| {
            let state = common::uniform_state(&mut rng, 4, 1.0);
            let probs = net.forward(&state).unwrap().probs;
            Sample {
                action: rng.random_range(0..2),
                old_probs: probs,
                state,
                ret: 0.0,
                reward: 0.0,
                advantage: rng.random_range(-1.0..1.0),
            }
        })
        .collect();
    let lr = 0.01;
    let mut grad = vec![0.0; net.num_params()];
    for s in &samples {
        let p = &s.old_probs;
        let upstream: Vec<f64> = (0..2)
            .map(|j| {
                let onehot = if j == s.action { 1.0 } else { 0.0 };
                -s.advantage * (onehot - p[j]) / samples.len() as f64
            })
            .collect();
        let tape = net.backward(&s.state, &upstream).unwrap();
        for (g, t) in grad.iter_mut().zip(tape.as_slice()) {
            *g += t;
        }
    }
    let expected: Vec<f64> = net
        .params()
        .iter()
        .zip(&grad)
        .map(|(p, g)| p - lr * g / ((0.01 * g * g).sqrt() + 1e-8))
        .collect();

    for (cap, update_seed) in [(10, 1), (64, 2)] {
        let mut a = agent.clone();
        let cfg = TrainerConfig {
            learning_rate: lr,
            epochs_per_episode: 1,
            batch_cap: cap,
            normalize_advantages: false,
            ..Default::default()
        };
        a.update(
            &mut samples,
            UpdateMode::Rl,
            &cfg,
            &mut ChaCha8Rng::seed_from_u64(update_seed),
        )
        .unwrap();
        for (x, y) in a.actor().unwrap().params().iter().zip(&expected) {
            assert!((x - y).abs() <= 1e-12, "{x} vs {y}");
        }
    }

    // a smaller cap splits the buffer into several steps
    let mut a = agent.clone();
    let cfg = TrainerConfig {
        learning_rate: lr,
        epochs_per_episode: 1,
        batch_cap: 3,
        normalize_advantages: false,
        ..Default::default()
    };
    a.update(
        &mut samples,
        UpdateMode::Rl,
        &cfg,
        &mut ChaCha8Rng::seed_from_u64(1),
    )
    .unwrap();
    let diff: f64 = a
        .actor()
        .unwrap()
        .params()
        .iter()
        .zip(&expected)
        .map(|(x, y)| (x - y).abs())
        .sum();
    assert!(diff > 1e-6);
}

fn run_curve(seed: u64, workers: usize) -> (Vec<f64>, Vec<f64>) {
    let tree = default_tree(Domain::Cartpole);
    let agent = build_agent(AgentKind::ProlonetInit, Domain::Cartpole, Some(&tree), seed).unwrap();
    let cfg = TrainerConfig {
        workers,
        ..Default::default()
    };
    let mut trainer = Trainer::new(agent, Domain::Cartpole, cfg, seed).unwrap();
    let report = trainer.train(30, |_| true).unwrap();
    (report.rewards(), trainer.agent().actor().unwrap().params())
}

#[test]
fn identical_seeds_give_identical_runs() {
    let a = run_curve(9, 1);
    let b = run_curve(9, 1);
    assert_eq!(a.0, b.0);
    assert_eq!(
        a.1.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.1.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
    let c = run_curve(9, 3);
    let d = run_curve(9, 3);
    assert_eq!(c.0, d.0);
    assert_eq!(c.1, d.1);
    assert_ne!(run_curve(10, 1).0, a.0);
}

fn held_out_cross_entropy(
    agent: &Agent,
    tree: &prolonet::compile::TreeSpec,
    states: &[Vec<f64>],
) -> f64 {
    states
        .iter()
        .map(|s| {
            let p = agent.action_probs(s).unwrap();
            -p[tree.decide(s).unwrap()].ln()
        })
        .sum::<f64>()
        / states.len() as f64
}

/// Held-out states come from the heuristic's own rollouts (the imitation
/// target's distribution) on seeds training never uses.
#[test]
fn imitation_phase_reduces_cross_entropy_to_the_heuristic() {
    let tree = default_tree(Domain::Cartpole);
    let heuristic = build_agent(AgentKind::Heuristic, Domain::Cartpole, Some(&tree), 0).unwrap();
    let mut env = Domain::Cartpole.make_env();
    let mut states = Vec::new();
    for k in 0..20 {
        let out = play(
            &heuristic,
            env.as_mut(),
            999,
            7,
            k,
            ActionMode::Greedy,
            None,
        )
        .unwrap();
        states.extend(
            out.trajectories[0]
                .transitions
                .iter()
                .step_by(10)
                .map(|t| t.state.clone()),
        );
    }
    let loki_n = 200;
    let mut mean_curve = [0.0; 3];
    for seed in 0..5 {
        let agent = build_agent(AgentKind::Loki, Domain::Cartpole, Some(&tree), seed).unwrap();
        let cfg = TrainerConfig {
            loki_n,
            ..Default::default()
        };
        let mut trainer = Trainer::new(agent, Domain::Cartpole, cfg, seed).unwrap();
        let mut curve = vec![held_out_cross_entropy(trainer.agent(), &tree, &states)];
        for _ in 0..2 {
            let report = trainer.train(loki_n / 2, |_| true).unwrap();
            assert!(report
                .metrics
                .iter()
                .all(|m| m.mode == UpdateMode::Imitation));
            curve.push(held_out_cross_entropy(trainer.agent(), &tree, &states));
        }
        assert!(curve[2] < curve[0], "seed {seed}: {curve:?}");
        for (m, c) in mean_curve.iter_mut().zip(&curve) {
            *m += c / 5.0;
        }
    }
    assert!(mean_curve.windows(2).all(|w| w[1] < w[0]), "{mean_curve:?}");
}

#[test]
fn rolled_back_updates_restore_the_previous_agent() {
    let tree = default_tree(Domain::Cartpole);
    let mut rollbacks = 0;
    for seed in 0..10 {
        let agent =
            build_agent(AgentKind::ProlonetInit, Domain::Cartpole, Some(&tree), seed).unwrap();
        let before = agent.actor().unwrap().params();
        let deep_before = agent.deep_actor().unwrap().params();
        let cfg = TrainerConfig {
            rollback: true,
            rollback_tolerance: 0.0,
            learning_rate: 0.5,
            ..Default::default()
        };
        let mut trainer = Trainer::new(agent, Domain::Cartpole, cfg, seed).unwrap();
        let mut rolled = false;
        trainer
            .train(1, |e| {
                if let TrainEvent::Episode(m) = e {
                    rolled = m.rolled_back;
                }
                true
            })
            .unwrap();
        if rolled {
            rollbacks += 1;
            assert_eq!(trainer.agent().actor().unwrap().params(), before);
            assert_eq!(trainer.agent().deep_actor().unwrap().params(), deep_before);
        } else {
            assert_ne!(trainer.agent().actor().unwrap().params(), before);
        }
    }
    assert!(rollbacks > 0, "a large step should hurt at least one probe");
}

#[test]
fn divergence_counts_each_category_separately() {
    let tree = default_tree(Domain::Cartpole);
    let net = prolonet::compile::compile_tree(&tree, 4, 2).unwrap();
    assert_eq!(
        divergence(&net, &net)
            .map(|d| (d.mse_weights, d.mse_comparators, d.mse_leaves))
            .unwrap(),
        (0.0, 0.0, 0.0)
    );
    let params: Vec<f64> = net.params();
    let mut shifted = net.clone();
    let mut p = params.clone();
    // set comparator 0 to 2.0 and negate: difference 4 in one of n comparators
    let n = net.nodes().len();
    let off = net.node_param_offset(0) + net.input_dim();
    p[off] = 2.0;
    let mut base = net.clone();
    base.set_params(&p).unwrap();
    p[off] = -2.0;
    shifted.set_params(&p).unwrap();
    let d = divergence(&base, &shifted).unwrap();
    assert_eq!(d.mse_comparators, 16.0 / n as f64);
    assert_eq!((d.mse_weights, d.mse_leaves), (0.0, 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn returns_match_double_loop(rewards in prop::collection::vec(-5.0f64..5.0, 1..30), gamma in 0.0f64..=1.0) {
        let values: Vec<f64> = rewards.iter().map(|r| r * 0.3).collect();
        let mut t = trajectory(&rewards, &values);
        t.compute_returns_advantages(gamma).unwrap();
        let expected = common::returns_double_loop(&rewards, gamma);
        prop_assert_eq!(t.returns.len(), t.transitions.len());
        for i in 0..rewards.len() {
            prop_assert!((t.returns[i] - expected[i]).abs() <= 1e-12 * expected[i].abs().max(1.0));
            prop_assert!((t.advantages[i] - (expected[i] - values[i])).abs() <= 1e-12 * expected[i].abs().max(1.0));
        }
    }

    #[test]
    fn rmsprop_is_deterministic(grads in prop::collection::vec(-3.0f64..3.0, 1..12), lr in 0.0f64..0.1) {
        let mut a = RmsProp::new(grads.len());
        let mut b = a.clone();
        let mut pa = vec![0.5; grads.len()];
        let mut pb = pa.clone();
        for _ in 0..3 {
            a.step(&mut pa, &grads, lr).unwrap();
            b.step(&mut pb, &grads, lr).unwrap();
        }
        prop_assert_eq!(pa, pb);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn ppo_gradient_at_unit_ratio_is_vanilla(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut s, _) = random_sample(&mut rng, 3);
        let p = s.old_probs.clone();
        s.advantage = rng.random_range(-2.0..2.0);
        let out = ppo_clip_loss(&[&s], std::slice::from_ref(&p), 0.2);
        for j in 0..3 {
            let onehot = if j == s.action { 1.0 } else { 0.0 };
            prop_assert!((out.logit_grads[0][j] - -s.advantage * (onehot - p[j])).abs() < 1e-12);
        }
    }

    #[test]
    fn network_json_round_trips(seed in any::<u64>(), nodes in 0usize..8) {
        let net = Network::ProLoNet(prolonet::compile::random_prolonet(nodes, 4, 3, seed).unwrap());
        let back = Network::from_json(&net.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, net);
    }
}
