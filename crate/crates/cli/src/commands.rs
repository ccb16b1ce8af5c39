use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use prolonet::baselines::build_agent_with_mistakes;
use prolonet::compile::{compile_tree, parse_tree, tree_from_json};
use prolonet::envs::ActionMode;
use prolonet::run::{load_tree, render_trace, run_seed, write_trace_csv, SeedSummary};
use prolonet::train::{
    divergence, evaluate, list_checkpoints, write_divergence_csv, Agent, Checkpoint,
    DivergenceRecord, Policy,
};
use prolonet::{AgentKind, Domain, Network, RunConfig};

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn output_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| anyhow!("an output directory is required (--out)"))?;
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    Ok(out)
}

pub fn compile(tree: &Path, domain: Option<Domain>, out: Option<&Path>) -> Result<()> {
    let spec = match domain {
        Some(d) => load_tree(tree, d)?,
        None => {
            let text =
                fs::read_to_string(tree).with_context(|| format!("reading {}", tree.display()))?;
            if tree.extension().is_some_and(|e| e == "json") {
                tree_from_json(&text)?
            } else {
                parse_tree(&text)?
            }
        }
    };
    let net = compile_tree(&spec, spec.feature_names.len(), spec.action_names.len())?;
    println!("{}", net.size_summary());
    if let Some(path) = out {
        write(path, &net.to_json()?)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct RunSummary<'a> {
    seeds: &'a [SeedSummary],
    /// Mean over seeds of each seed's mean reward.
    mean_reward: f64,
}

/// Trains every seed of `cfg` into `out`. Failed seeds are reported and
/// skipped; the error lists them once all seeds have been tried.
fn train_seeds(cfg: &RunConfig, out: &Path) -> Result<Vec<SeedSummary>> {
    let tree = cfg.resolve_tree()?;
    let mut summaries = Vec::new();
    let mut failed = Vec::new();
    let mut curves = Vec::new();
    for &seed in &cfg.seeds {
        match run_seed(cfg, tree.as_ref(), seed, Some(out), |_| true) {
            Ok(run) => {
                let s = &run.summary;
                let trained = s
                    .trained
                    .as_ref()
                    .map_or("-".into(), |e| format!("{:.2}", e.mean_reward));
                let solved = s.solved_at.map_or("-".into(), |e| e.to_string());
                println!(
                    "seed {seed}: {} episodes, initial {:.2}, trained {trained}, mean training reward {:.2}, solved at {solved}",
                    s.episodes_run, s.initial.mean_reward, s.mean_reward
                );
                curves.push((seed, run.report.rewards()));
                summaries.push(run.summary);
            }
            Err(e) => {
                eprintln!("seed {seed} failed: {e}");
                failed.push(seed);
            }
        }
    }
    write_curves(&out.join("rewards.csv"), &curves)?;
    let mean = mean_of(&summaries);
    write(
        &out.join("summary.json"),
        &serde_json::to_string_pretty(&RunSummary {
            seeds: &summaries,
            mean_reward: mean,
        })?,
    )?;
    if !failed.is_empty() {
        bail!(
            "{} of {} seeds failed: {failed:?}",
            failed.len(),
            cfg.seeds.len()
        );
    }
    Ok(summaries)
}

fn mean_of(summaries: &[SeedSummary]) -> f64 {
    if summaries.is_empty() {
        return f64::NAN;
    }
    summaries.iter().map(|s| s.mean_reward).sum::<f64>() / summaries.len() as f64
}

/// One row per episode, one column per seed; seeds that stopped early
/// leave trailing cells empty.
fn write_curves(path: &Path, curves: &[(u64, Vec<f64>)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["episode".to_string()];
    header.extend(curves.iter().map(|(s, _)| format!("seed-{s}")));
    w.write_record(&header)?;
    let rows = curves.iter().map(|(_, c)| c.len()).max().unwrap_or(0);
    for e in 0..rows {
        let mut record = vec![e.to_string()];
        record.extend(
            curves
                .iter()
                .map(|(_, c)| c.get(e).map_or(String::new(), |r| r.to_string())),
        );
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn train(cfg: &RunConfig) -> Result<()> {
    let out = output_dir(cfg)?;
    write(&out.join("config.toml"), &cfg.to_toml()?)?;
    let summaries = train_seeds(cfg, &out)?;
    println!(
        "mean reward over {} seeds: {:.2}",
        summaries.len(),
        mean_of(&summaries)
    );
    Ok(())
}

#[derive(Serialize)]
struct AblationRow {
    mistake_rate: f64,
    mean_reward: f64,
    std_reward: f64,
    seeds: usize,
}

pub fn ablate(cfg: &RunConfig, rates: &[f64]) -> Result<()> {
    if rates.is_empty() {
        bail!("at least one mistake rate is required");
    }
    let out = output_dir(cfg)?;
    write(&out.join("config.toml"), &cfg.to_toml()?)?;
    let mut rows = Vec::new();
    for &rate in rates {
        let run = RunConfig {
            mistake_rate: rate,
            ..cfg.clone()
        };
        run.validate()?;
        let dir = out.join(format!("rate-{rate}"));
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let summaries = train_seeds(&run, &dir)?;
        let mean = mean_of(&summaries);
        let var = summaries
            .iter()
            .map(|s| (s.mean_reward - mean).powi(2))
            .sum::<f64>()
            / summaries.len() as f64;
        rows.push(AblationRow {
            mistake_rate: rate,
            mean_reward: mean,
            std_reward: var.sqrt(),
            seeds: summaries.len(),
        });
    }
    println!("{:>12} {:>14} {:>10}", "mistake_rate", "mean_reward", "std");
    for r in &rows {
        println!(
            "{:>12} {:>14.2} {:>10.2}",
            r.mistake_rate, r.mean_reward, r.std_reward
        );
    }
    let path = out.join("ablation.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub struct EvalRequest {
    pub domain: Domain,
    pub agent: AgentKind,
    pub tree: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub mistake_rate: f64,
    pub episodes: usize,
    pub seed: u64,
    pub greedy: bool,
    pub render_trace: Option<PathBuf>,
    pub json: bool,
}

#[derive(Serialize)]
struct EvalReport {
    episodes: usize,
    mean_reward: f64,
    std_reward: f64,
    mean_length: f64,
    mean_fire_distance: Option<f64>,
}

fn saved_agent(kind: AgentKind, actor: Network) -> Agent {
    Agent::new(kind, Policy::Network(actor), None)
}

pub fn eval(req: &EvalRequest) -> Result<()> {
    if req.episodes == 0 {
        bail!("--episodes must be at least 1");
    }
    let agent = if let Some(dir) = &req.checkpoint {
        saved_agent(req.agent, Checkpoint::load(dir)?.actor)
    } else if let Some(path) = &req.model {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        saved_agent(req.agent, Network::from_json(&text)?)
    } else {
        let tree = req
            .tree
            .as_deref()
            .map(|t| load_tree(t, req.domain))
            .transpose()?;
        build_agent_with_mistakes(
            req.agent,
            req.domain,
            tree.as_ref(),
            req.seed,
            req.mistake_rate,
        )?
    };
    let mode = if req.greedy {
        ActionMode::Greedy
    } else {
        ActionMode::Sample
    };
    let e = evaluate(&agent, req.domain, req.episodes, req.seed, mode)?;
    let report = EvalReport {
        episodes: e.episodes,
        mean_reward: e.mean_reward,
        std_reward: e.std_reward,
        mean_length: e.mean_length,
        mean_fire_distance: e.mean_diagnostic,
    };
    if req.json {
        println!("{}", serde_json::to_string(&report)?);
    } else {
        println!(
            "mean reward {:.3} +/- {:.3} over {} episodes, mean length {:.2}",
            report.mean_reward, report.std_reward, report.episodes, report.mean_length
        );
        if let Some(d) = report.mean_fire_distance {
            println!("mean fire distance {d:.2}");
        }
    }
    if let Some(path) = &req.render_trace {
        write_trace_csv(path, &render_trace(&agent, req.domain, req.seed)?)?;
    }
    Ok(())
}

pub fn diverge(init: &Path, checkpoints: &Path, out: Option<&Path>) -> Result<()> {
    let text = fs::read_to_string(init).with_context(|| format!("reading {}", init.display()))?;
    let init_net = Network::from_json(&text)?;
    let init_net = init_net
        .as_prolonet()
        .ok_or_else(|| anyhow!("{} is not a prolonet model", init.display()))?;
    let mut records = Vec::new();
    let zero = divergence(init_net, init_net)?;
    records.push(DivergenceRecord {
        checkpoint: "0".into(),
        episode: 0,
        mse_weights: zero.mse_weights,
        mse_comparators: zero.mse_comparators,
        mse_leaves: zero.mse_leaves,
    });
    let found = list_checkpoints(checkpoints)?;
    if found.is_empty() {
        bail!("no checkpoints under {}", checkpoints.display());
    }
    for (meta, dir) in found {
        let cp = Checkpoint::load(&dir)?;
        let current = cp
            .actor
            .as_prolonet()
            .ok_or_else(|| anyhow!("{} does not hold a prolonet actor", dir.display()))?;
        let d = divergence(init_net, current)?;
        records.push(DivergenceRecord {
            checkpoint: meta.label.name(),
            episode: meta.episode,
            mse_weights: d.mse_weights,
            mse_comparators: d.mse_comparators,
            mse_leaves: d.mse_leaves,
        });
    }
    let path = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| checkpoints.join("divergence.csv"));
    write_divergence_csv(&path, &records)?;
    for r in &records {
        println!(
            "{:>8} episode {:>6}: weights {:.6e} comparators {:.6e} leaves {:.6e}",
            r.checkpoint, r.episode, r.mse_weights, r.mse_comparators, r.mse_leaves
        );
    }
    Ok(())
}

pub fn serve(bind: &str, config: prolonet_service::ServiceConfig) -> Result<()> {
    let addr: SocketAddr = bind
        .parse()
        .with_context(|| format!("invalid bind address {bind:?}"))?;
    let runtime = tokio::runtime::Runtime::new()?;
    eprintln!("listening on http://{addr}");
    runtime.block_on(prolonet_service::serve(addr, config))?;
    Ok(())
}
