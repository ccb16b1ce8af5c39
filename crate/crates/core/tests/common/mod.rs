//! Reference implementations written independently of the library, used
//! as oracles by the integration tests and the acceptance run.
#![allow(dead_code)]
// loops index explicitly to mirror the summations they check
#![allow(clippy::needless_range_loop)]

use prolonet::compile::{Comparison, RuleNode, TreeSpec};
use prolonet::model::{Network, Polarity, ProLoNet};

pub fn logistic(z: f64) -> f64 {
    let z = z.clamp(-500.0, 500.0);
    1.0 / (1.0 + f64::exp(-z))
}

/// Raw output by summing over every TRUE/FALSE assignment of the nodes:
/// each assignment has probability prod(sigma or 1 - sigma) and routes to
/// the leaves whose paths it satisfies.
pub fn enumerate_raw(net: &ProLoNet, x: &[f64]) -> Vec<f64> {
    let n = net.nodes().len();
    assert!(n <= 16, "enumeration oracle is exponential in node count");
    let sig: Vec<f64> = net
        .nodes()
        .iter()
        .map(|node| {
            let mut s = 0.0;
            for i in 0..x.len() {
                s += node.weights[i] * x[i];
            }
            logistic(node.alpha * (s - node.comparator))
        })
        .collect();
    let mut raw = vec![0.0; net.output_dim()];
    for mask in 0u32..(1u32 << n) {
        let truth = |k: usize| mask & (1 << k) != 0;
        let mut p = 1.0;
        for (k, s) in sig.iter().enumerate() {
            p *= if truth(k) { *s } else { 1.0 - s };
        }
        for leaf in net.leaves() {
            let satisfied = leaf.path.iter().all(|step| match step.polarity {
                Polarity::True => truth(step.node),
                Polarity::False => !truth(step.node),
            });
            if satisfied {
                for (r, w) in raw.iter_mut().zip(&leaf.action_weights) {
                    *r += p * w;
                }
            }
        }
    }
    raw
}

/// Crisp walk over the rule tree, independent of `TreeSpec::decide`.
pub fn crisp_walk(node: &RuleNode, x: &[f64]) -> usize {
    match node {
        RuleNode::Action(a) => *a,
        RuleNode::Check(c) => {
            let lhs: f64 = c.terms.iter().map(|t| t.weight * x[t.feature]).sum();
            let pass = match c.comparison {
                Comparison::Greater => lhs > c.value,
                Comparison::Less => lhs < c.value,
            };
            crisp_walk(if pass { &c.if_true } else { &c.if_false }, x)
        }
    }
}

/// Smallest distance between a check's weighted sum and its threshold
/// along the crisp path.
pub fn margin_on_path(spec: &TreeSpec, x: &[f64]) -> f64 {
    let mut node = &spec.root;
    let mut margin = f64::INFINITY;
    loop {
        match node {
            RuleNode::Action(_) => return margin,
            RuleNode::Check(c) => {
                let lhs: f64 = c.terms.iter().map(|t| t.weight * x[t.feature]).sum();
                margin = margin.min((lhs - c.value).abs());
                let pass = match c.comparison {
                    Comparison::Greater => lhs > c.value,
                    Comparison::Less => lhs < c.value,
                };
                node = if pass { &c.if_true } else { &c.if_false };
            }
        }
    }
}

/// Central finite-difference gradient of `upstream . raw(x)` with respect
/// to every flat parameter.
pub fn numeric_gradient(net: &Network, x: &[f64], upstream: &[f64], h: f64) -> Vec<f64> {
    let base = net.params();
    let mut probe = net.clone();
    let objective = |n: &Network| -> f64 {
        n.forward_raw(x)
            .unwrap()
            .iter()
            .zip(upstream)
            .map(|(r, u)| r * u)
            .sum()
    };
    (0..base.len())
        .map(|i| {
            let mut p = base.clone();
            p[i] = base[i] + h;
            probe.set_params(&p).unwrap();
            let plus = objective(&probe);
            p[i] = base[i] - h;
            probe.set_params(&p).unwrap();
            let minus = objective(&probe);
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Gaps at or below this are finite-difference rounding noise at h=1e-5,
/// not gradient errors.
pub const GRAD_ABS_FLOOR: f64 = 1e-7;

/// Relative error of an analytic partial against its finite difference,
/// or zero when the absolute gap is within [`GRAD_ABS_FLOOR`].
pub fn grad_err(analytic: f64, numeric: f64) -> f64 {
    let gap = (analytic - numeric).abs();
    if gap <= GRAD_ABS_FLOOR {
        0.0
    } else {
        gap / analytic.abs().max(numeric.abs())
    }
}

/// Relative error with an absolute floor on the denominator.
pub fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Returns-to-go by explicit double summation.
pub fn returns_double_loop(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let n = rewards.len();
    let mut out = vec![0.0; n];
    for t in 0..n {
        let mut total = 0.0;
        for k in t..n {
            total += gamma.powi((k - t) as i32) * rewards[k];
        }
        out[t] = total;
    }
    out
}

/// Straight-line clipped surrogate loss: negated batch mean.
pub fn ppo_loss_reference(
    actions: &[usize],
    advantages: &[f64],
    old: &[Vec<f64>],
    new: &[Vec<f64>],
    clip: f64,
) -> f64 {
    let mut total = 0.0;
    for i in 0..actions.len() {
        let a = actions[i];
        let ratio = new[i][a] / old[i][a];
        let lo = 1.0 - clip;
        let hi = 1.0 + clip;
        let clipped = if ratio < lo {
            lo
        } else if ratio > hi {
            hi
        } else {
            ratio
        };
        let u = ratio * advantages[i];
        let c = clipped * advantages[i];
        total += if u < c { u } else { c };
    }
    -total / actions.len() as f64
}

/// Gym-style cart-pole Euler step, coded from the published equations.
/// State order: x, x_dot, theta, theta_dot.
pub fn cartpole_reference_step(s: [f64; 4], push_right: bool) -> [f64; 4] {
    let (g, mc, mp, l, f_mag, tau) = (9.8, 1.0, 0.1, 0.5, 10.0, 0.02);
    let f = if push_right { f_mag } else { -f_mag };
    let [x, xd, th, thd] = s;
    let m = mc + mp;
    let pml = mp * l;
    let c = th.cos();
    let sn = th.sin();
    let tmp = (f + pml * thd * thd * sn) / m;
    let thacc = (g * sn - c * tmp) / (l * (4.0 / 3.0 - mp * c * c / m));
    let xacc = tmp - pml * thacc * c / m;
    [
        x + tau * xd,
        xd + tau * xacc,
        th + tau * thd,
        thd + tau * thacc,
    ]
}

pub fn cartpole_reference_failed(s: [f64; 4]) -> bool {
    s[0] < -2.4
        || s[0] > 2.4
        || s[2] < -12.0 * std::f64::consts::PI / 180.0
        || s[2] > 12.0 * std::f64::consts::PI / 180.0
}

/// Random rule tree with weighted multi-feature checks and both comparison
/// directions, grown by splitting uniformly chosen action leaves.
pub fn random_rule_tree<R: rand::Rng>(
    rng: &mut R,
    checks: usize,
    input_dim: usize,
    output_dim: usize,
) -> TreeSpec {
    use prolonet::compile::{Check, Term};
    fn leaves(node: &RuleNode) -> usize {
        match node {
            RuleNode::Action(_) => 1,
            RuleNode::Check(c) => leaves(&c.if_true) + leaves(&c.if_false),
        }
    }
    fn split(node: &mut RuleNode, k: &mut usize, with: &mut Option<RuleNode>) {
        match node {
            RuleNode::Action(_) => {
                if *k == 0 {
                    *node = with.take().unwrap();
                } else {
                    *k -= 1;
                }
            }
            RuleNode::Check(c) => {
                split(&mut c.if_true, k, with);
                if with.is_some() {
                    split(&mut c.if_false, k, with);
                }
            }
        }
    }
    let mut root = RuleNode::Action(rng.random_range(0..output_dim));
    for _ in 0..checks {
        let n_terms = rng.random_range(1..=input_dim.min(3));
        let terms = (0..n_terms)
            .map(|_| Term {
                feature: rng.random_range(0..input_dim),
                weight: rng.random_range(-2.0..2.0),
            })
            .collect();
        let check = Check {
            terms,
            comparison: if rng.random_bool(0.5) {
                Comparison::Greater
            } else {
                Comparison::Less
            },
            value: rng.random_range(-1.0..1.0),
            if_true: Box::new(RuleNode::Action(rng.random_range(0..output_dim))),
            if_false: Box::new(RuleNode::Action(rng.random_range(0..output_dim))),
        };
        let mut k = rng.random_range(0..leaves(&root));
        split(&mut root, &mut k, &mut Some(RuleNode::Check(check)));
    }
    TreeSpec {
        root,
        feature_names: (0..input_dim).map(|i| format!("f{i}")).collect(),
        action_names: (0..output_dim).map(|i| format!("a{i}")).collect(),
    }
}

pub fn uniform_state<R: rand::Rng>(rng: &mut R, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Fraction of states on which the compiled network at alpha = 1000 picks
/// the crisp tree's action, plus the number of disagreements at states
/// whose path margin is at least 1e-3 (which must be zero).
pub fn crisp_agreement<R: rand::Rng>(spec: &TreeSpec, states: usize, rng: &mut R) -> (f64, usize) {
    let dim = spec.feature_names.len();
    let mut net = prolonet::compile::compile_tree(spec, dim, spec.action_names.len()).unwrap();
    net.set_alpha(1000.0);
    let mut agree = 0;
    let mut clear_misses = 0;
    for _ in 0..states {
        let x = uniform_state(rng, dim, 2.0);
        let raw = net.forward_raw(&x).unwrap();
        let mut best = 0;
        for (i, r) in raw.iter().enumerate() {
            if *r > raw[best] {
                best = i;
            }
        }
        let crisp = crisp_walk(&spec.root, &x);
        // one-hot leaves can repeat an action, so compare the mass, not the index
        if best == crisp || raw[best] == raw[crisp] {
            agree += 1;
        } else if margin_on_path(spec, &x) >= 1e-3 {
            clear_misses += 1;
        }
    }
    (agree as f64 / states as f64, clear_misses)
}
