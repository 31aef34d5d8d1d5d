//! Command-line front end for the experiment harness. Every subcommand
//! resolves its parameters as config-file values overridden by flags, runs
//! the replications, and writes a main CSV plus a `_summary` CSV.
//!
//! Exit codes: 0 success, 2 usage error, 3 runtime error.

use std::path::Path;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qnetlab::harness::{self, ExperimentSpec, HarnessError};

#[derive(Parser, Debug)]
#[command(
    name = "qnetlab",
    version,
    about = "Queueing and learning experiment suite"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug)]
struct Common {
    /// Master seed; replication seeds derive from it deterministically.
    #[arg(long)]
    seed: Option<String>,
    /// Number of independent replications.
    #[arg(long)]
    reps: Option<String>,
    /// Output CSV path; the aggregate lands next to it with a _summary suffix.
    #[arg(long)]
    out: Option<String>,
    /// key=value config file; command-line flags win on conflicts.
    #[arg(long)]
    config: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Repeated vector-payoff game steered toward a target set.
    Blackwell(BlackwellArgs),
    /// Regret minimization via the approachability reduction.
    Regret(RegretArgs),
    /// Switched-network scheduling under MaxWeight-family policies.
    Maxweight(MaxweightArgs),
    /// Single-server queue with perceptron-chosen service modes.
    Lindley(LindleyArgs),
    /// Admission control with a diversion budget and future information.
    Admission(AdmissionArgs),
    /// Many-server load balancing with bounded memory and idle messages.
    Balance(BalanceArgs),
}

#[derive(Args, Debug)]
struct BlackwellArgs {
    /// Payoff tensor file: header `rows cols dim`, then rows*cols lines of
    /// dim floats each, row-major.
    #[arg(long)]
    tensor: Option<String>,
    /// Target set: point:c1,.. | halfspace:n1,..;offset | orthant:d | box:l1,..;u1,..
    #[arg(long)]
    target: Option<String>,
    /// Rounds per replication.
    #[arg(long)]
    rounds: Option<String>,
    /// Column player: uniform | cycle:j1,j2,.. | fixed:w1,..
    #[arg(long)]
    adversary: Option<String>,
    /// Rounds at which rows are emitted (default: 1-2-5 ladder).
    #[arg(long)]
    checkpoints: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct RegretArgs {
    /// Reward matrix file (rows of floats) or the builtin `rps`.
    #[arg(long)]
    game: Option<String>,
    /// constant | cyclic | best-response | uniform | punish-last
    #[arg(long)]
    adversary: Option<String>,
    /// Rounds per replication.
    #[arg(long)]
    rounds: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct MaxweightArgs {
    /// Schedule-set file: one service vector per line.
    #[arg(long)]
    schedules: Option<String>,
    /// Arrivals: bernoulli:p1,..,pq | fixed:a1,..,aq | cycle:v1;v2;..
    #[arg(long)]
    arrivals: Option<String>,
    /// mw | wmw | fmw-square | fmw-log
    #[arg(long)]
    policy: Option<String>,
    /// Service success probabilities, required by policy=wmw.
    #[arg(long)]
    mu: Option<String>,
    /// Slots per replication.
    #[arg(long)]
    rounds: Option<String>,
    /// Slots at which rows are emitted (default: 1-2-5 ladder).
    #[arg(long)]
    checkpoints: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct LindleyArgs {
    /// Context dimension.
    #[arg(long)]
    dim: Option<String>,
    /// Radius D of the context ball.
    #[arg(long)]
    context_bound: Option<String>,
    /// Norm of the hidden separator.
    #[arg(long)]
    w_norm: Option<String>,
    /// Fast service time.
    #[arg(long)]
    tau_star: Option<String>,
    /// Slow service time (must exceed tau-star).
    #[arg(long)]
    tau_0: Option<String>,
    /// Poisson arrival rate (inter-arrivals land on the dyadic grid).
    #[arg(long)]
    arrival_rate: Option<String>,
    /// Customers per replication.
    #[arg(long)]
    rounds: Option<String>,
    /// Perceptron step size.
    #[arg(long)]
    alpha: Option<String>,
    /// Update trigger: mistake | hinge
    #[arg(long)]
    rule: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct AdmissionArgs {
    /// Arrival rate in (0, 1).
    #[arg(long)]
    lambda: Option<String>,
    /// Diversion budget in (0, 1).
    #[arg(long)]
    p: Option<String>,
    /// threshold | greedy | windowed
    #[arg(long)]
    policy: Option<String>,
    /// Queue cap for policy=threshold: integer | none | min-feasible
    #[arg(long)]
    threshold: Option<String>,
    /// Window length: number | inf | auto (scale * log(1/(1 - load)))
    #[arg(long)]
    lookahead: Option<String>,
    /// Constant in front of the auto window length.
    #[arg(long)]
    lookahead_scale: Option<String>,
    /// Run length in time units.
    #[arg(long)]
    horizon: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct BalanceArgs {
    /// Number of servers.
    #[arg(long)]
    n: Option<String>,
    /// Per-server load in (0, 1).
    #[arg(long)]
    lambda: Option<String>,
    /// Idle-message rate (use together with c).
    #[arg(long)]
    r: Option<String>,
    /// Memory capacity in server IDs (use together with r).
    #[arg(long)]
    c: Option<String>,
    /// Preset pair (r, c): high-message | high-memory | constrained
    #[arg(long)]
    regime: Option<String>,
    /// Message-rate multiplier for regime=high-memory.
    #[arg(long)]
    multiplier: Option<String>,
    /// Run length in time units.
    #[arg(long)]
    horizon: Option<String>,
    #[command(flatten)]
    common: Common,
}

/// Collects the flags the user actually passed as harness key=value pairs.
macro_rules! pairs {
    ($args:expr; $($field:ident => $key:expr),+ $(,)?) => {{
        let mut v: Vec<(String, String)> = Vec::new();
        $(
            if let Some(val) = &$args.$field {
                v.push(($key.to_string(), val.clone()));
            }
        )+
        v.extend(common_pairs(&$args.common));
        v
    }};
}

fn common_pairs(c: &Common) -> Vec<(String, String)> {
    let mut v = Vec::new();
    for (key, val) in [("seed", &c.seed), ("reps", &c.reps), ("out", &c.out)] {
        if let Some(val) = val {
            v.push((key.to_string(), val.clone()));
        }
    }
    v
}

fn split(cmd: &Cmd) -> (&'static str, Vec<(String, String)>, &Option<String>) {
    match cmd {
        Cmd::Blackwell(a) => (
            "blackwell",
            pairs!(a; tensor => "tensor", target => "target", rounds => "rounds",
                adversary => "adversary", checkpoints => "checkpoints"),
            &a.common.config,
        ),
        Cmd::Regret(a) => (
            "regret",
            pairs!(a; game => "game", adversary => "adversary", rounds => "rounds"),
            &a.common.config,
        ),
        Cmd::Maxweight(a) => (
            "maxweight",
            pairs!(a; schedules => "schedules", arrivals => "arrivals", policy => "policy",
                mu => "mu", rounds => "rounds", checkpoints => "checkpoints"),
            &a.common.config,
        ),
        Cmd::Lindley(a) => (
            "lindley",
            pairs!(a; dim => "dim", context_bound => "context-bound", w_norm => "w-norm",
                tau_star => "tau-star", tau_0 => "tau-0", arrival_rate => "arrival-rate",
                rounds => "rounds", alpha => "alpha", rule => "rule"),
            &a.common.config,
        ),
        Cmd::Admission(a) => (
            "admission",
            pairs!(a; lambda => "lambda", p => "p", policy => "policy",
                threshold => "threshold", lookahead => "lookahead",
                lookahead_scale => "lookahead-scale", horizon => "horizon"),
            &a.common.config,
        ),
        Cmd::Balance(a) => (
            "balance",
            pairs!(a; n => "n", lambda => "lambda", r => "r", c => "c",
                regime => "regime", multiplier => "multiplier", horizon => "horizon"),
            &a.common.config,
        ),
    }
}

fn run(cli: &Cli) -> Result<(), HarnessError> {
    let (name, cli_pairs, config) = split(&cli.cmd);
    let spec = ExperimentSpec::build(name, config.as_deref().map(Path::new), &cli_pairs)?;
    let output = harness::run_experiment(&spec)?;
    println!(
        "wrote {} rows to {} and {} summary rows to {}",
        output.main.rows().len(),
        spec.out.display(),
        output.summary.rows().len(),
        harness::summary_path(&spec.out).display(),
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version print to stdout and exit clean; real parse
            // errors are usage errors.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
