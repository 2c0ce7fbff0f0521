//! Command-line front end: instance solving, randomized benchmarks against
//! the brute-force oracle, two-step-game training, the rank check, and piece
//! counting.
//!
//! Exit codes: 0 ok, 2 missing input file, 3 parse or validation error,
//! 4 resource cap exceeded, 1 anything else.

use std::fmt::Write as _;
use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use nlcg::matrix_game::{
    rank_check, train_matrix_game_full, LearnerKind, OptimizerKind, TrainConfig,
};
use nlcg::{
    brute_force_max, count_pieces, enumerate_optimize, iterative_optimize, sample_instance,
    CoordinationGraph, Inner, IterativeOptions, Layer, MixingNetwork, PayoffTable, SolveResult,
    Termination, UtilityTable,
};

#[derive(Parser)]
#[command(name = "nlcg", version, about = "Coordination-graph solver with a non-linear mixing network")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one instance/network pair and print the result as JSON.
    Solve(SolveArgs),
    /// Benchmark solve methods against the brute-force oracle on random
    /// instances, emitting one CSV row per (instance, method).
    Bench(BenchArgs),
    /// Train a learner on the two-step game and report the learned values.
    TrainMatrix(TrainArgs),
    /// Print the ranks of the linear-fit system for the two-step game.
    RankCheck,
    /// Print how many affine pieces m hidden units cut out of d dimensions.
    CountPieces { m: u32, d: u32 },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Enumerate,
    Iterative,
    Brute,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Enumerate => "enumerate",
            Method::Iterative => "iterative",
            Method::Brute => "brute",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InnerArg {
    Maxsum,
    Exact,
}

#[derive(Args, Clone, Copy)]
struct MethodOpts {
    /// Inner per-piece maximizer for enumerate.
    #[arg(long, value_enum, default_value_t = InnerArg::Maxsum)]
    inner: InnerArg,
    /// Message rounds per inner weighted Max-Sum call.
    #[arg(long, default_value_t = 4)]
    rounds: usize,
    /// Piece budget of the iterative method.
    #[arg(long, default_value_t = 16)]
    n_max: usize,
    /// Base of the iterative annealing schedule.
    #[arg(long, default_value_t = 0.2)]
    epsilon0: f64,
    /// Swap the annealing break/jump probabilities.
    #[arg(long)]
    invert_annealing: bool,
}

impl MethodOpts {
    fn inner(&self) -> Inner {
        match self.inner {
            InnerArg::Maxsum => Inner::MaxSum { rounds: self.rounds },
            InnerArg::Exact => Inner::Exact,
        }
    }

    fn iterative(&self, seed: u64) -> IterativeOptions {
        IterativeOptions {
            rounds: self.rounds,
            n_max: self.n_max,
            epsilon0: self.epsilon0,
            invert_annealing: self.invert_annealing,
            seed,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Instance JSON: {n_agents, n_actions, edges?, utilities, payoffs}.
    instance: PathBuf,
    /// Mixing-network JSON: {alpha, layers: [{W, b}, ...]}.
    network: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Enumerate)]
    method: Method,
    #[command(flatten)]
    opts: MethodOpts,
    /// Seed of the iterative method's annealing draws.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Instance shapes as n_agents:n_actions:m triplets.
    #[arg(long, value_parser = parse_size, value_delimiter = ',', default_value = "3:2:3")]
    sizes: Vec<(usize, usize, usize)>,
    /// Instances per shape.
    #[arg(long, default_value_t = 20)]
    n_instances: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Method::Enumerate, Method::Iterative])]
    methods: Vec<Method>,
    /// Negative slope of sampled mixing networks.
    #[arg(long, default_value_t = 0.2)]
    alpha: f64,
    #[command(flatten)]
    opts: MethodOpts,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Add a wall-time column (timings vary run to run, so the default
    /// output stays byte-identical for a given seed).
    #[arg(long)]
    timing: bool,
    /// Write the CSV here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LearnerArg {
    Nlcg,
    Linear,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OptArg {
    Rmsprop,
    Sgd,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum, default_value_t = LearnerArg::Nlcg)]
    learner: LearnerArg,
    #[arg(long, default_value_t = 5000)]
    episodes: usize,
    /// Exploration rate (1 = uniformly random behavior).
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.99)]
    gamma: f64,
    /// Replay capacity in episodes.
    #[arg(long, default_value_t = 500)]
    buffer: usize,
    /// Episodes per update batch.
    #[arg(long, default_value_t = 32)]
    batch: usize,
    /// Episodes between target-model copies.
    #[arg(long, default_value_t = 100)]
    target_every: usize,
    #[arg(long, default_value_t = 5e-4)]
    lr: f64,
    /// Hidden width of the generated mixing network.
    #[arg(long, default_value_t = 4)]
    m_mix: usize,
    /// Negative slope of the mixing activations.
    #[arg(long, default_value_t = 0.2)]
    alpha: f64,
    /// Hidden width of the utility/payoff/hypernet MLPs.
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    #[arg(long, value_enum, default_value_t = OptArg::Rmsprop)]
    optimizer: OptArg,
    /// Episodes between learning-curve points.
    #[arg(long, default_value_t = 100)]
    eval_interval: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory receiving curve.csv, report.json, and checkpoint.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_size(s: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [n_agents, n_actions, m] = parts[..] else {
        return Err(format!("expected n_agents:n_actions:m, got {s:?}"));
    };
    let parse = |v: &str, what| {
        v.parse::<usize>().map_err(|e| format!("bad {what} {v:?}: {e}"))
    };
    Ok((parse(n_agents, "agent count")?, parse(n_actions, "action count")?, parse(m, "width")?))
}

struct CliError {
    code: u8,
    msg: String,
}

impl CliError {
    fn other(msg: impl Into<String>) -> Self {
        Self { code: 1, msg: msg.into() }
    }
}

impl From<nlcg::Error> for CliError {
    fn from(e: nlcg::Error) -> Self {
        let code = match e {
            nlcg::Error::InvalidArgument(_) | nlcg::Error::InvalidState(_) => 3,
            nlcg::Error::CapExceeded { .. } => 4,
            nlcg::Error::Overflow(_) => 1,
        };
        Self { code, msg: e.to_string() }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| {
        let code = if e.kind() == ErrorKind::NotFound { 2 } else { 1 };
        CliError { code, msg: format!("{}: {e}", path.display()) }
    })
}

fn parse_json<T: DeserializeOwned>(text: &str, what: &Path) -> Result<T, CliError> {
    serde_json::from_str(text)
        .map_err(|e| CliError { code: 3, msg: format!("{}: {e}", what.display()) })
}

fn write_out(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| CliError::other(format!("{}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    n_agents: usize,
    n_actions: usize,
    /// Sorted (low, high) pairs; omitted means the complete graph.
    #[serde(default)]
    edges: Option<Vec<(usize, usize)>>,
    utilities: UtilityTable,
    payoffs: PayoffTable,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    alpha: f64,
    layers: Vec<Layer>,
}

fn load_instance(path: &Path) -> Result<(CoordinationGraph, UtilityTable, PayoffTable), CliError> {
    let file: InstanceFile = parse_json(&read_file(path)?, path)?;
    let graph = match file.edges {
        Some(edges) => CoordinationGraph::new(file.n_agents, file.n_actions, edges)?,
        None => CoordinationGraph::complete(file.n_agents, file.n_actions)?,
    };
    Ok((graph, file.utilities, file.payoffs))
}

fn load_network(path: &Path) -> Result<MixingNetwork, CliError> {
    let file: NetworkFile = parse_json(&read_file(path)?, path)?;
    Ok(MixingNetwork::new(file.alpha, file.layers)?)
}

fn run_method(
    method: Method,
    opts: &MethodOpts,
    seed: u64,
    g: &CoordinationGraph,
    f_v: &UtilityTable,
    f_e: &PayoffTable,
    net: &MixingNetwork,
) -> Result<SolveResult, CliError> {
    Ok(match method {
        Method::Enumerate => enumerate_optimize(g, f_v, f_e, net, opts.inner())?,
        Method::Iterative => iterative_optimize(g, f_v, f_e, net, &opts.iterative(seed))?,
        Method::Brute => {
            let (q_max, a_max) = brute_force_max(g, f_v, f_e, net)?;
            SolveResult {
                a_max,
                q_max,
                pieces_visited: 0,
                value_trace: vec![q_max],
                terminated_by: Termination::BudgetExhausted,
            }
        }
    })
}

fn to_pretty_json<T: serde::Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::other(format!("serialize: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn cmd_solve(args: &SolveArgs) -> Result<(), CliError> {
    let (graph, f_v, f_e) = load_instance(&args.instance)?;
    let net = load_network(&args.network)?;
    let result = run_method(args.method, &args.opts, args.seed, &graph, &f_v, &f_e, &net)?;
    write_out(args.out.as_deref(), &to_pretty_json(&result)?)
}

fn cmd_bench(args: &BenchArgs) -> Result<(), CliError> {
    let mut csv = String::from("instance_seed,n_agents,n_actions,m,method,q_max,oracle_q,gap,pieces_visited");
    if args.timing {
        csv.push_str(",time_s");
    }
    csv.push('\n');
    // Per-method accumulators: (gap sum, gap count, time sum, row count).
    let mut stats = vec![(0.0, 0usize, 0.0, 0usize); args.methods.len()];
    for (size_idx, &(n_agents, n_actions, m)) in args.sizes.iter().enumerate() {
        for i in 0..args.n_instances {
            let iseed = args
                .seed
                .wrapping_add((size_idx * args.n_instances + i) as u64);
            let (g, f_v, f_e, net) = sample_instance(n_agents, n_actions, m, args.alpha, iseed)?;
            let oracle = match brute_force_max(&g, &f_v, &f_e, &net) {
                Ok((q, _)) => Some(q),
                Err(nlcg::Error::CapExceeded { .. }) => None,
                Err(e) => return Err(e.into()),
            };
            for (m_idx, &method) in args.methods.iter().enumerate() {
                let t0 = Instant::now();
                let r = run_method(method, &args.opts, iseed, &g, &f_v, &f_e, &net)?;
                let dt = t0.elapsed().as_secs_f64();
                let _ = write!(
                    csv,
                    "{iseed},{n_agents},{n_actions},{m},{},{}",
                    method.name(),
                    r.q_max
                );
                match oracle {
                    Some(o) => {
                        let _ = write!(csv, ",{o},{}", o - r.q_max);
                    }
                    None => csv.push_str(",NA,NA"),
                }
                let _ = write!(csv, ",{}", r.pieces_visited);
                if args.timing {
                    let _ = write!(csv, ",{dt}");
                }
                csv.push('\n');
                let s = &mut stats[m_idx];
                if let Some(o) = oracle {
                    s.0 += o - r.q_max;
                    s.1 += 1;
                }
                s.2 += dt;
                s.3 += 1;
            }
        }
    }
    for (&method, &(gap, gap_n, time, n)) in args.methods.iter().zip(&stats) {
        let mean_gap = if gap_n > 0 { format!("{:.6}", gap / gap_n as f64) } else { "NA".into() };
        eprintln!(
            "{}: mean gap {mean_gap}, mean time {:.6} s over {n} instances",
            method.name(),
            time / n.max(1) as f64
        );
    }
    write_out(args.out.as_deref(), &csv)
}

fn cmd_train_matrix(args: &TrainArgs) -> Result<(), CliError> {
    let cfg = TrainConfig {
        learner: match args.learner {
            LearnerArg::Nlcg => LearnerKind::NonLinear,
            LearnerArg::Linear => LearnerKind::Linear,
        },
        episodes: args.episodes,
        epsilon: args.epsilon,
        gamma: args.gamma,
        buffer_episodes: args.buffer,
        batch_episodes: args.batch,
        target_update_episodes: args.target_every,
        lr: args.lr,
        m_mix: args.m_mix,
        alpha: args.alpha,
        hidden: args.hidden,
        optimizer: match args.optimizer {
            OptArg::Rmsprop => OptimizerKind::RmsProp,
            OptArg::Sgd => OptimizerKind::Sgd,
        },
        eval_interval: args.eval_interval,
        seed: args.seed,
    };
    let (report, model) = train_matrix_game_full(&cfg)?;
    let report_json = to_pretty_json(&report)?;
    print!("{report_json}");
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::other(format!("{}: {e}", dir.display())))?;
        let mut curve = String::from("episode,eval_return,td_loss\n");
        for p in &report.curve {
            let _ = write!(curve, "{},{},", p.episode, p.eval_return);
            if let Some(loss) = p.td_loss {
                let _ = write!(curve, "{loss}");
            }
            curve.push('\n');
        }
        write_out(Some(&dir.join("curve.csv")), &curve)?;
        write_out(Some(&dir.join("report.json")), &report_json)?;
        write_out(Some(&dir.join("checkpoint.json")), &to_pretty_json(&model)?)?;
    }
    Ok(())
}

fn cmd_rank_check() -> Result<(), CliError> {
    let (coef, aug) = rank_check();
    println!("coef_rank={coef} aug_rank={aug}");
    if (coef, aug) == (3, 4) {
        Ok(())
    } else {
        Err(CliError::other(format!("unexpected ranks ({coef}, {aug})")))
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.cmd {
        Cmd::Solve(args) => cmd_solve(args),
        Cmd::Bench(args) => cmd_bench(args),
        Cmd::TrainMatrix(args) => cmd_train_matrix(args),
        Cmd::RankCheck => cmd_rank_check(),
        Cmd::CountPieces { m, d } => {
            println!("{}", count_pieces(*m, *d)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}
