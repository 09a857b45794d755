use std::fs;
use std::io::{self, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use traptube::harness::{
    self, AgentFactory, Aggregation, EpisodeError, EpisodeTrace, PlannerAgents, RandomAgents,
};
use traptube::protocol;
use traptube::render::render_image;
use traptube::{planner, Agent, EnvState, PlannerAgent, RandomAgent, TaskConfig, TransferSet};

#[derive(Parser)]
#[command(
    name = "traptube",
    version,
    about = "Deterministic trap-tube gridworld"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct TaskArgs {
    /// Read the task from a TaskConfig JSON file
    #[arg(long, conflicts_with_all = ["set", "seed"])]
    config: Option<PathBuf>,
    /// Transfer set to sample from: base, or kernels like P,St,Sy
    #[arg(long, value_parser = parse_set)]
    set: Option<TransferSet>,
    /// Task seed
    #[arg(long)]
    seed: Option<u64>,
}

impl TaskArgs {
    fn load(&self) -> Result<TaskConfig> {
        match &self.config {
            Some(path) => read_config(path),
            None => {
                let set = self.set.unwrap_or(TransferSet::BASE);
                Ok(traptube::sample_task(set, self.seed.unwrap_or(0))?)
            }
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AgentKind {
    Random,
    Planner,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalAgent {
    Random,
    Planner,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Endpoint {
    /// Speak the protocol on standard input and output
    #[arg(long)]
    stdio: bool,
    /// Listen for TCP connections on addr:port
    #[arg(long, value_name = "ADDR")]
    listen: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Emit a sampled TaskConfig as JSON
    Gen {
        #[arg(long, value_parser = parse_set, default_value = "base")]
        set: TransferSet,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit the shortest plan for a task
    Solve {
        #[command(flatten)]
        task: TaskArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one episode and emit its EpisodeResult
    Play {
        #[arg(long, value_enum, default_value = "random")]
        agent: AgentKind,
        /// Seed of the random agent
        #[arg(long, default_value_t = 0)]
        agent_seed: u64,
        #[command(flatten)]
        task: TaskArgs,
        /// Also write the episode trace here
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Remote agents only: speak the protocol on stdin/stdout
        #[arg(long)]
        stdio: bool,
        /// Remote agents only: accept one TCP connection on addr:port
        #[arg(long, value_name = "ADDR", conflicts_with = "stdio")]
        listen: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate an agent on the base set and all seven transfer sets
    Eval {
        #[arg(long, value_enum, default_value = "random")]
        agent: EvalAgent,
        #[arg(long, default_value_t = 0)]
        agent_seed: u64,
        #[arg(long, default_value_t = 5)]
        trials: u32,
        /// Tasks per transfer set per trial
        #[arg(long, default_value_t = 100)]
        tasks: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Score a trial 1 if any task was solved
        #[arg(long)]
        any_success: bool,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Free-form timestamp recorded in the report metadata
        #[arg(long)]
        timestamp: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a task or one frame of a trace as a binary PPM
    Render {
        #[arg(long, conflicts_with = "trace")]
        config: Option<PathBuf>,
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Index of the trace state to draw
        #[arg(long, default_value_t = 0, requires = "trace")]
        frame: usize,
        #[arg(long, default_value_t = 8)]
        scale: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify a trace and write one PPM per state
    Replay {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 8)]
        scale: u32,
    },
    /// Serve the line protocol
    Serve {
        #[command(flatten)]
        endpoint: Endpoint,
        /// Stop after this many TCP sessions
        #[arg(long)]
        sessions: Option<usize>,
    },
}

fn parse_set(s: &str) -> Result<TransferSet, String> {
    s.parse()
}

fn read_config(path: &Path) -> Result<TaskConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    TaskConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_trace(path: &Path) -> Result<EpisodeTrace> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn emit_json(out: Option<&Path>, json: String) -> Result<()> {
    emit(out, (json + "\n").as_bytes())
}

fn frame(state: &EnvState, config: &TaskConfig, scale: u32) -> Vec<u8> {
    render_image(state, config.grid, &config.palette, config.symbols, scale)
}

fn play(
    agent: AgentKind,
    agent_seed: u64,
    config: &TaskConfig,
    trace: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let mut agent: Box<dyn Agent> = match agent {
        AgentKind::Random => Box::new(RandomAgent::new(agent_seed)),
        AgentKind::Planner => Box::new(PlannerAgent::new(config)?),
        AgentKind::Remote => unreachable!("handled by play_remote"),
    };
    let (result, recorded) = match harness::run_episode_traced(config, &mut agent) {
        Ok(pair) => pair,
        Err(EpisodeError::Agent { source, partial }) => {
            emit_json(out, traptube::json::canonical(&partial))?;
            bail!(source);
        }
        Err(e) => return Err(e.into()),
    };
    if let Some(path) = trace {
        fs::write(path, traptube::json::canonical(&recorded) + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    emit_json(out, traptube::json::canonical(&result))
}

fn play_remote(stdio: bool, listen: Option<&str>, out: Option<&Path>) -> Result<()> {
    let results = if stdio {
        if out.is_none() {
            bail!("--stdio needs --out, standard output carries the protocol");
        }
        protocol::serve(io::stdin().lock(), io::stdout().lock())?
    } else if let Some(addr) = listen {
        let listener = TcpListener::bind(addr).with_context(|| format!("binding {addr}"))?;
        eprintln!("listening on {}", listener.local_addr()?);
        protocol::serve_tcp(listener, Some(1))?
            .into_iter()
            .flatten()
            .collect()
    } else {
        bail!("remote agents need --stdio or --listen");
    };
    emit_json(out, traptube::json::canonical(&results))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { set, seed, out } => {
            let config = traptube::sample_task(set, seed)?;
            emit_json(out.as_deref(), config.to_canonical_json())
        }
        Command::Solve { task, out } => {
            let config = task.load()?;
            let plan = planner::solve(&config)?
                .ok_or_else(|| anyhow!("task has no solution within {} steps", config.horizon))?;
            emit_json(out.as_deref(), traptube::json::canonical(&plan))
        }
        Command::Play {
            agent,
            agent_seed,
            task,
            trace,
            stdio,
            listen,
            out,
        } => match agent {
            AgentKind::Remote => play_remote(stdio, listen.as_deref(), out.as_deref()),
            _ => {
                if stdio || listen.is_some() {
                    bail!("--stdio and --listen apply to remote agents only");
                }
                play(
                    agent,
                    agent_seed,
                    &task.load()?,
                    trace.as_deref(),
                    out.as_deref(),
                )
            }
        },
        Command::Eval {
            agent,
            agent_seed,
            trials,
            tasks,
            seed,
            any_success,
            format,
            timestamp,
            out,
        } => {
            let factory: Box<dyn AgentFactory> = match agent {
                EvalAgent::Random => Box::new(RandomAgents { seed: agent_seed }),
                EvalAgent::Planner => Box::new(PlannerAgents),
            };
            let aggregation = if any_success {
                Aggregation::AnySuccess
            } else {
                Aggregation::PerTask
            };
            let mut report =
                harness::experiment_eval(factory.as_ref(), trials, tasks, seed, aggregation)?;
            report.timestamp = timestamp;
            match format {
                Format::Json => emit_json(out.as_deref(), report.to_canonical_json()),
                Format::Text => emit(out.as_deref(), report.to_table().as_bytes()),
            }
        }
        Command::Render {
            config,
            trace,
            frame: index,
            scale,
            out,
        } => {
            let (config, state) = match (config, trace) {
                (Some(path), None) => {
                    let config = read_config(&path)?;
                    let state = traptube::env::reset(&config)?;
                    (config, state)
                }
                (None, Some(path)) => {
                    let trace = read_trace(&path)?;
                    let state = *trace.states.get(index).ok_or_else(|| {
                        anyhow!(
                            "frame {index} out of range, trace has {} states",
                            trace.states.len()
                        )
                    })?;
                    (trace.task, state)
                }
                _ => bail!("give --config or --trace"),
            };
            emit(out.as_deref(), &frame(&state, &config, scale))
        }
        Command::Replay {
            trace,
            out_dir,
            scale,
        } => {
            let trace = read_trace(&trace)?;
            let last = harness::replay(&trace)?;
            fs::create_dir_all(&out_dir)
                .with_context(|| format!("creating {}", out_dir.display()))?;
            for (i, state) in trace.states.iter().enumerate() {
                let path = out_dir.join(format!("frame_{i:03}.ppm"));
                fs::write(&path, frame(state, &trace.task, scale))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            let summary = serde_json::json!({
                "frames": trace.states.len(),
                "solved": traptube::env::is_success(&last),
                "steps": last.step_count,
            });
            emit_json(None, summary.to_string())
        }
        Command::Serve { endpoint, sessions } => {
            if endpoint.stdio {
                protocol::serve(io::stdin().lock(), io::stdout().lock())?;
            } else {
                let addr = endpoint.listen.expect("clap requires one endpoint");
                let listener =
                    TcpListener::bind(&addr).with_context(|| format!("binding {addr}"))?;
                eprintln!("listening on {}", listener.local_addr()?);
                protocol::serve_tcp(listener, sessions)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
