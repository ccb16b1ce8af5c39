mod args;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use args::RunArgs;
use prolonet::{AgentKind, Domain};

#[derive(Parser)]
#[command(
    name = "prolonet",
    version,
    about = "Rule-tree policies: compile, train, evaluate, ablate, serve"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a rule tree and report its size.
    Compile {
        tree: PathBuf,
        /// Resolve names against a domain's vocabulary instead of the file header.
        #[arg(long)]
        domain: Option<Domain>,
        /// Write the compiled model (prolonet-v1 JSON) here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one agent per seed, writing metrics and checkpoints.
    Train(RunArgs),
    /// Evaluate an agent, a saved model or a checkpoint without learning.
    Eval {
        #[arg(long, default_value = "cartpole")]
        domain: Domain,
        #[arg(long, default_value = "prolonet-init")]
        agent: AgentKind,
        #[arg(long)]
        tree: Option<PathBuf>,
        /// Model JSON to evaluate instead of building a fresh agent.
        #[arg(long, conflicts_with = "checkpoint")]
        model: Option<PathBuf>,
        /// Checkpoint directory to evaluate.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        mistake_rate: f64,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Take the most probable action instead of sampling.
        #[arg(long)]
        greedy: bool,
        /// Write per-step positions of one greedy episode to this CSV.
        #[arg(long)]
        render_trace: Option<PathBuf>,
        /// Print the result as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Train at several mistake rates and tabulate mean reward per rate.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated mistake rates.
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2")]
        rates: Vec<f64>,
    },
    /// Parameter drift of each checkpoint from an initial model.
    Diverge {
        /// Initial model JSON, e.g. `seed-0/initial_actor.json`.
        #[arg(long)]
        init: PathBuf,
        /// Directory holding `checkpoint-*` subdirectories.
        #[arg(long)]
        checkpoints: PathBuf,
        /// CSV destination; defaults to `divergence.csv` in the checkpoint directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long, env = prolonet_service::BIND_ENV, default_value = prolonet_service::DEFAULT_BIND)]
        bind: String,
        /// Where jobs write metrics and checkpoints.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Training jobs allowed to run at once.
        #[arg(long, default_value_t = 1)]
        max_jobs: usize,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Compile { tree, domain, out } => commands::compile(&tree, domain, out.as_deref()),
        Command::Train(run) => commands::train(&run.to_config()?),
        Command::Eval {
            domain,
            agent,
            tree,
            model,
            checkpoint,
            mistake_rate,
            episodes,
            seed,
            greedy,
            render_trace,
            json,
        } => commands::eval(&commands::EvalRequest {
            domain,
            agent,
            tree,
            model,
            checkpoint,
            mistake_rate,
            episodes,
            seed,
            greedy,
            render_trace,
            json,
        }),
        Command::Ablate { run, rates } => commands::ablate(&run.to_config()?, &rates),
        Command::Diverge {
            init,
            checkpoints,
            out,
        } => commands::diverge(&init, &checkpoints, out.as_deref()),
        Command::Serve {
            bind,
            data_dir,
            max_jobs,
        } => commands::serve(
            &bind,
            prolonet_service::ServiceConfig {
                max_concurrent_jobs: max_jobs,
                data_dir,
                ..Default::default()
            },
        ),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
