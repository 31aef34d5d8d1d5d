//! Experiment orchestration: parameter merging (config file + CLI overrides),
//! seeded replication, and CSV emission for the six experiment drivers.
//!
//! Every driver writes two files: a main CSV with one row per replication
//! (times one row per checkpoint where the output is a trajectory) and a
//! `_summary` CSV aggregated over replications. Identical spec and seed
//! produce byte-identical files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::admission::{self, AdmissionConfig};
use crate::balance::{self, ClusterConfig, Regime};
use crate::convex::TargetSet;
use crate::engine::{self, AdversaryRule, MixedAction, PayoffTensor, PlayerRule};
use crate::lindley::{self, ServiceModeModel, UpdateRule};
use crate::network::{self, ArrivalModel, DiscreteDist, Policy, ScheduleSet};
use crate::regret::{self, Adversary, ScalarGame};
use crate::rng::child_seed;
use crate::stats::{replicate, summarize};

/// Harness failures, split by exit code: usage errors (bad parameters,
/// unknown keys, malformed input files) exit 2, runtime errors (module
/// failures mid-run, I/O) exit 3.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) => 2,
            HarnessError::Runtime(_) => 3,
        }
    }
}

fn usage(msg: impl Into<String>) -> HarnessError {
    HarnessError::Usage(msg.into())
}

fn runtime(err: impl std::fmt::Display) -> HarnessError {
    HarnessError::Runtime(err.to_string())
}

/// Merged key=value parameters. Keys are the CLI long-flag names; config
/// files use the same names and CLI values win.
#[derive(Debug, Clone, Default)]
pub struct Params {
    map: BTreeMap<String, String>,
}

/// Parses a plain-text config file: one `key=value` per line, `#` comments
/// and blank lines ignored, later duplicates win.
pub fn parse_config_str(text: &str) -> Result<BTreeMap<String, String>, HarnessError> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            usage(format!(
                "config line {}: expected key=value, got `{line}`",
                lineno + 1
            ))
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(usage(format!("config line {}: empty key", lineno + 1)));
        }
        map.insert(key.to_string(), value.trim().to_string());
    }
    Ok(map)
}

impl Params {
    /// Config file first (if any), then CLI pairs on top.
    pub fn merged(config: Option<&Path>, cli: &[(String, String)]) -> Result<Self, HarnessError> {
        let mut map = match config {
            None => BTreeMap::new(),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
                parse_config_str(&text)?
            }
        };
        for (k, v) in cli {
            map.insert(k.clone(), v.clone());
        }
        Ok(Self { map })
    }

    pub fn from_pairs(pairs: &[(&str, &str)]) -> Self {
        Self {
            map: pairs
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    /// Rejects any key outside the subcommand's accepted set.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), HarnessError> {
        for key in self.map.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(usage(format!(
                    "unknown parameter `{key}`; accepted: {}",
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }

    pub fn f64(&self, key: &str, default: f64) -> Result<f64, HarnessError> {
        match self.get(key) {
            None => Ok(default),
            Some(s) => s
                .parse::<f64>()
                .map_err(|_| usage(format!("parameter `{key}`: expected a number, got `{s}`"))),
        }
    }

    pub fn u64(&self, key: &str, default: u64) -> Result<u64, HarnessError> {
        match self.get(key) {
            None => Ok(default),
            Some(s) => s.parse::<u64>().map_err(|_| {
                usage(format!(
                    "parameter `{key}`: expected a nonnegative integer, got `{s}`"
                ))
            }),
        }
    }

    pub fn usize(&self, key: &str, default: usize) -> Result<usize, HarnessError> {
        Ok(self.u64(key, default as u64)? as usize)
    }

    pub fn string(&self, key: &str, default: &str) -> String {
        self.get(key).unwrap_or(default).to_string()
    }

    pub fn require(&self, key: &str) -> Result<&str, HarnessError> {
        self.get(key)
            .ok_or_else(|| usage(format!("missing required parameter `{key}`")))
    }
}

/// A fully resolved experiment: subcommand, merged parameters, replication
/// count, master seed, output path. Replication seeds derive from the master
/// seed and the replication index, so reruns replay exactly.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub subcommand: String,
    pub params: Params,
    pub reps: u64,
    pub seed: u64,
    pub out: PathBuf,
}

impl ExperimentSpec {
    pub fn build(
        subcommand: &str,
        config: Option<&Path>,
        cli: &[(String, String)],
    ) -> Result<Self, HarnessError> {
        let params = Params::merged(config, cli)?;
        let reps = params.u64("reps", 1)?;
        if reps == 0 {
            return Err(usage("reps must be at least 1"));
        }
        let seed = params.u64("seed", 1)?;
        let out = PathBuf::from(params.string("out", &format!("{subcommand}.csv")));
        Ok(Self {
            subcommand: subcommand.to_string(),
            params,
            reps,
            seed,
            out,
        })
    }
}

/// `results.csv` -> `results_summary.csv`; extensionless paths get the
/// suffix appended.
pub fn summary_path(out: &Path) -> PathBuf {
    match (out.file_stem(), out.extension()) {
        (Some(stem), Some(ext)) => {
            let mut name = stem.to_os_string();
            name.push("_summary.");
            name.push(ext);
            out.with_file_name(name)
        }
        _ => {
            let mut name = out.as_os_str().to_os_string();
            name.push("_summary");
            PathBuf::from(name)
        }
    }
}

/// In-memory CSV: header plus rows of preformatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: vec![],
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width must match header");
        self.rows.push(row);
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_to(&self, path: &Path) -> Result<(), HarnessError> {
        std::fs::write(path, self.to_csv())
            .map_err(|e| HarnessError::Runtime(format!("cannot write {}: {e}", path.display())))
    }

    /// Parses a cell back to f64 (test and aggregation helper).
    pub fn cell_f64(&self, row: usize, col: &str) -> Option<f64> {
        let idx = self.header.iter().position(|h| h == col)?;
        self.rows.get(row)?.get(idx)?.parse().ok()
    }
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

/// Both result tables of one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub main: Table,
    pub summary: Table,
}

/// Dispatches to the named driver and writes both CSV files.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput, HarnessError> {
    let output = build_output(spec)?;
    output.main.write_to(&spec.out)?;
    output.summary.write_to(&summary_path(&spec.out))?;
    Ok(output)
}

/// Runs the named driver without touching the filesystem.
pub fn build_output(spec: &ExperimentSpec) -> Result<ExperimentOutput, HarnessError> {
    match spec.subcommand.as_str() {
        "blackwell" => run_blackwell(spec),
        "regret" => run_regret(spec),
        "maxweight" => run_maxweight(spec),
        "lindley" => run_lindley(spec),
        "admission" => run_admission(spec),
        "balance" => run_balance(spec),
        other => Err(usage(format!(
            "unknown subcommand `{other}`; expected blackwell, regret, maxweight, lindley, admission, or balance"
        ))),
    }
}

const COMMON_KEYS: [&str; 3] = ["seed", "reps", "out"];

fn allowed<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    let mut v: Vec<&'a str> = COMMON_KEYS.to_vec();
    v.extend_from_slice(extra);
    v
}

fn parse_f64_list(s: &str, what: &str) -> Result<Vec<f64>, HarnessError> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("{what}: `{tok}` is not a number")))
        })
        .collect()
}

fn parse_u64_list(s: &str, what: &str) -> Result<Vec<u64>, HarnessError> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<u64>()
                .map_err(|_| usage(format!("{what}: `{tok}` is not a nonnegative integer")))
        })
        .collect()
}

fn parse_usize_list(s: &str, what: &str) -> Result<Vec<usize>, HarnessError> {
    Ok(parse_u64_list(s, what)?
        .into_iter()
        .map(|v| v as usize)
        .collect())
}

/// 1-2-5 ladder up to and including `rounds`.
fn default_checkpoints(rounds: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut base: usize = 1;
    'outer: loop {
        for m in [1usize, 2, 5] {
            let v = base.saturating_mul(m);
            if v >= rounds {
                break 'outer;
            }
            out.push(v);
        }
        base = base.saturating_mul(10);
    }
    out.push(rounds);
    out
}

fn checkpoints_from(params: &Params, rounds: usize) -> Result<Vec<usize>, HarnessError> {
    let mut cps = match params.get("checkpoints") {
        None => default_checkpoints(rounds),
        Some(s) => parse_usize_list(s, "checkpoints")?,
    };
    cps.sort_unstable();
    cps.dedup();
    if cps.is_empty() || cps[0] == 0 || *cps.last().unwrap() > rounds {
        return Err(usage("checkpoints must be in 1..=rounds"));
    }
    Ok(cps)
}

fn non_comment_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

/// Payoff tensor file: first line `rows cols dim`, then rows*cols lines of
/// dim floats each, row-major (row action outer, column action inner).
pub fn load_tensor(path: &Path) -> Result<PayoffTensor, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read tensor {}: {e}", path.display())))?;
    let mut lines = non_comment_lines(&text);
    let head = lines.next().ok_or_else(|| usage("tensor file is empty"))?;
    let dims = parse_usize_list(
        &head.split_whitespace().collect::<Vec<_>>().join(","),
        "tensor header",
    )?;
    let [rows, cols, dim] = dims[..] else {
        return Err(usage("tensor header must be `rows cols dim`"));
    };
    if rows == 0 || cols == 0 || dim == 0 {
        return Err(usage("tensor dimensions must be positive"));
    }
    let mut entries = vec![vec![vec![0.0; dim]; cols]; rows];
    for (i, plane) in entries.iter_mut().enumerate() {
        for (j, cell) in plane.iter_mut().enumerate() {
            let line = lines.next().ok_or_else(|| {
                usage(format!("tensor file: expected {} entry lines", rows * cols))
            })?;
            let v = parse_f64_list(
                &line.split_whitespace().collect::<Vec<_>>().join(","),
                "tensor entry",
            )?;
            if v.len() != dim {
                return Err(usage(format!(
                    "tensor entry ({i},{j}): expected {dim} components, got {}",
                    v.len()
                )));
            }
            *cell = v;
        }
    }
    if lines.next().is_some() {
        return Err(usage("tensor file has trailing data"));
    }
    PayoffTensor::with_tight_rmax(entries).map_err(|e| usage(format!("tensor file: {e}")))
}

/// Target-set spec: `point:c1,..`, `halfspace:n1,..;offset`, `orthant:d`,
/// or `box:l1,..;u1,..`.
pub fn parse_target(s: &str) -> Result<TargetSet, HarnessError> {
    let (kind, rest) = s
        .split_once(':')
        .ok_or_else(|| usage(format!("target `{s}`: expected kind:args")))?;
    match kind {
        "point" => Ok(TargetSet::Singleton(parse_f64_list(rest, "target point")?)),
        "halfspace" => {
            let (n, o) = rest
                .split_once(';')
                .ok_or_else(|| usage("target halfspace: expected normal;offset"))?;
            Ok(TargetSet::HalfSpace {
                normal: parse_f64_list(n, "halfspace normal")?,
                offset: o
                    .trim()
                    .parse()
                    .map_err(|_| usage(format!("halfspace offset `{o}` is not a number")))?,
            })
        }
        "orthant" => Ok(TargetSet::NonpositiveOrthant(rest.trim().parse().map_err(
            |_| usage(format!("orthant dimension `{rest}` is not an integer")),
        )?)),
        "box" => {
            let (l, u) = rest
                .split_once(';')
                .ok_or_else(|| usage("target box: expected lower;upper"))?;
            Ok(TargetSet::Box {
                lower: parse_f64_list(l, "box lower")?,
                upper: parse_f64_list(u, "box upper")?,
            })
        }
        other => Err(usage(format!("unknown target kind `{other}`"))),
    }
}

/// Adversary spec for the vector game: `uniform`, `cycle:j1,j2,..`, or
/// `fixed:w1,..,wcols`.
fn parse_adversary_rule(s: &str, cols: usize) -> Result<AdversaryRule, HarnessError> {
    if s == "uniform" {
        return Ok(AdversaryRule::Uniform);
    }
    if let Some(rest) = s.strip_prefix("cycle:") {
        let script = parse_usize_list(rest, "adversary cycle")?;
        if script.is_empty() || script.iter().any(|&j| j >= cols) {
            return Err(usage(format!(
                "adversary cycle: indices must lie in 0..{cols}"
            )));
        }
        return Ok(AdversaryRule::Cycle(script));
    }
    if let Some(rest) = s.strip_prefix("fixed:") {
        let w = parse_f64_list(rest, "adversary weights")?;
        if w.len() != cols {
            return Err(usage(format!(
                "adversary weights: expected {cols} entries, got {}",
                w.len()
            )));
        }
        return Ok(AdversaryRule::Fixed(
            MixedAction::new(w).map_err(|e| usage(format!("adversary weights: {e}")))?,
        ));
    }
    Err(usage(format!(
        "unknown adversary `{s}`; expected uniform, cycle:.., or fixed:.."
    )))
}

fn run_blackwell(spec: &ExperimentSpec) -> Result<ExperimentOutput, HarnessError> {
    spec.params.check_keys(&allowed(&[
        "tensor",
        "target",
        "rounds",
        "adversary",
        "checkpoints",
    ]))?;
    let tensor = load_tensor(Path::new(spec.params.require("tensor")?))?;
    let target = parse_target(spec.params.require("target")?)?;
    if target.dim() != tensor.dim() {
        return Err(usage(format!(
            "target dimension {} does not match payoff dimension {}",
            target.dim(),
            tensor.dim()
        )));
    }
    let rounds = spec.params.usize("rounds", 1000)?;
    if rounds == 0 {
        return Err(usage("rounds must be at least 1"));
    }
    let adversary =
        parse_adversary_rule(&spec.params.string("adversary", "uniform"), tensor.cols())?;
    let cps = checkpoints_from(&spec.params, rounds)?;
    let r_max = tensor.r_max();

    let runs: Vec<Result<Vec<f64>, engine::EngineError>> =
        replicate(spec.reps, spec.seed, |_, mut rng| {
            let q0 = vec![0.0; tensor.dim()];
            let trace = engine::run_game(
                &tensor,
                &target,
                q0,
                &PlayerRule::Blackwell,
                &adversary,
                rounds,
                &mut rng,
            )?;
            Ok(cps.iter().map(|&t| trace.distances[t - 1]).collect())
        });
    let mut per_rep = Vec::with_capacity(runs.len());
    for r in runs {
        per_rep.push(r.map_err(runtime)?);
    }

    let mut main = Table::new(["rep", "t", "distance", "bound"]);
    for (rep, dists) in per_rep.iter().enumerate() {
        for (ci, &t) in cps.iter().enumerate() {
            let bound = r_max * (2.0 / t as f64).sqrt();
            main.push(vec![
                rep.to_string(),
                t.to_string(),
                fmt(dists[ci]),
                fmt(bound),
            ]);
        }
    }
    let mut summary = Table::new(["t", "distance_estimate", "bound"]);
    for (ci, &t) in cps.iter().enumerate() {
        let mean_sq = per_rep.iter().map(|d| d[ci] * d[ci]).sum::<f64>() / per_rep.len() as f64;
        let bound = r_max * (2.0 / t as f64).sqrt();
        summary.push(vec![t.to_string(), fmt(mean_sq.sqrt()), fmt(bound)]);
    }
    Ok(ExperimentOutput { main, summary })
}

/// Reward matrix file: one row of floats per line.
pub fn load_game(value: &str) -> Result<ScalarGame, HarnessError> {
    if value == "rps" {
        return Ok(ScalarGame::rock_paper_scissors());
    }
    let path = Path::new(value);
    let text = std::fs::read_to_string(path).map_err(|e| {
        usage(format!(
            "game `{value}` is neither `rps` nor a readable file: {e}"
        ))
    })?;
    let rows: Vec<Vec<f64>> = non_comment_lines(&text)
        .map(|l| {
            parse_f64_list(
                &l.split_whitespace().collect::<Vec<_>>().join(","),
                "reward row",
            )
        })
        .collect::<Result<_, _>>()?;
    ScalarGame::new(rows).map_err(|e| usage(format!("reward matrix: {e}")))
}

fn run_regret(spec: &ExperimentSpec) -> Result<ExperimentOutput, HarnessError> {
    spec.params
        .check_keys(&allowed(&["game", "adversary", "rounds"]))?;
    let game = load_game(&spec.params.string("game", "rps"))?;
    let name = spec.params.string("adversary", "uniform");
    let adversary =
        Adversary::by_name(&name).ok_or_else(|| usage(format!("unknown adversary `{name}`")))?;
    let rounds = spec.params.usize("rounds", 1000)?;
    if rounds == 0 {
        return Err(usage("rounds must be at least 1"));
    }

    let runs: Vec<Result<(f64, f64, f64), regret::RegretError>> =
        replicate(spec.reps, spec.seed, |_, mut rng| {
            let trace = regret::play(&game, &adversary, rounds, &mut rng)?;
            Ok((
                regret::regret(&trace)?,
                regret::expected_regret(&trace)?,
                trace.r_max,
            ))
        });
    let mut realized = Vec::with_capacity(runs.len());
    let mut expected = Vec::with_capacity(runs.len());
    let mut r_max = 0.0;
    let mut main = Table::new(["rep", "realized_regret", "expected_regret"]);
    for (rep, r) in runs.into_iter().enumerate() {
        let (rg, erg, rm) = r.map_err(runtime)?;
        main.push(vec![rep.to_string(), fmt(rg), fmt(erg)]);
        realized.push(rg);
        expected.push(erg);
        r_max = rm;
    }
    // Cumulative form of the per-round rate bound: T * r_max sqrt(2/T).
    let bound = rounds as f64 * regret::regret_bound(r_max, rounds);
    let mut summary = Table::new(["T", "realized_regret", "expected_regret", "bound"]);
    summary.push(vec![
        rounds.to_string(),
        fmt(summarize(&realized).map_err(runtime)?.mean),
        fmt(summarize(&expected).map_err(runtime)?.mean),
        fmt(bound),
    ]);
    Ok(ExperimentOutput { main, summary })
}

/// Schedule-set file: one service vector per line, nonnegative integers.
pub fn load_schedules(path: &Path) -> Result<ScheduleSet, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read schedule set {}: {e}", path.display())))?;
    let raw: Vec<Vec<u64>> = non_comment_lines(&text)
        .map(|l| {
            parse_u64_list(
                &l.split_whitespace().collect::<Vec<_>>().join(","),
                "schedule",
            )
        })
        .collect::<Result<_, _>>()?;
    ScheduleSet::monotone_closure(&raw).map_err(|e| usage(format!("schedule set: {e}")))
}

/// Arrival spec: `bernoulli:p1,..,pq`, `fixed:a1,..,aq`, or
/// `cycle:v1;v2;..` with each vector comma-separated.
fn parse_arrivals(s: &str, q: usize) -> Result<ArrivalModel, HarnessError> {
    let (kind, rest) = s
        .split_once(':')
        .ok_or_else(|| usage(format!("arrivals `{s}`: expected kind:args")))?;
    let check = |v: &[u64]| -> Result<(), HarnessError> {
        if v.len() != q {
            return Err(usage(format!(
                "arrival vector needs {q} components, got {}",
                v.len()
            )));
        }
        Ok(())
    };
    match kind {
        "bernoulli" => {
            let p = parse_f64_list(rest, "bernoulli rates")?;
            if p.len() != q {
                return Err(usage(format!(
                    "bernoulli rates need {q} components, got {}",
                    p.len()
                )));
            }
            Ok(ArrivalModel::Iid(
                DiscreteDist::bernoulli_product(&p).map_err(|e| usage(format!("arrivals: {e}")))?,
            ))
        }
        "fixed" => {
            let v = parse_u64_list(rest, "fixed arrivals")?;
            check(&v)?;
            Ok(ArrivalModel::AdversarialSequence(vec![v]))
        }
        "cycle" => {
            let seq: Vec<Vec<u64>> = rest
                .split(';')
                .map(|part| parse_u64_list(part, "cycle vector"))
                .collect::<Result<_, _>>()?;
            if seq.is_empty() {
                return Err(usage("cycle arrivals need at least one vector"));
            }
            for v in &seq {
                check(v)?;
            }
            Ok(ArrivalModel::AdversarialSequence(seq))
        }
        other => Err(usage(format!("unknown arrival kind `{other}`"))),
    }
}

fn run_maxweight(spec: &ExperimentSpec) -> Result<ExperimentOutput, HarnessError> {
    spec.params.check_keys(&allowed(&[
        "schedules",
        "arrivals",
        "policy",
        "mu",
        "rounds",
        "checkpoints",
    ]))?;
    let set = load_schedules(Path::new(spec.params.require("schedules")?))?;
    let q = set.queues();
    let arrivals = parse_arrivals(spec.params.require("arrivals")?, q)?;
    let policy_name = spec.params.string("policy", "mw");
    let mu = match spec.params.get("mu") {
        None => None,
        Some(s) => {
            let v = parse_f64_list(s, "mu")?;
            if v.len() != q {
                return Err(usage(format!("mu needs {q} components, got {}", v.len())));
            }
            Some(v)
        }
    };
    if mu.is_some() && policy_name != "wmw" {
        return Err(usage("mu is only meaningful with policy=wmw"));
    }
    if policy_name == "wmw" && mu.is_none() {
        return Err(usage("policy=wmw requires mu"));
    }
    let policy = Policy::by_name(&policy_name, mu).ok_or_else(|| {
        usage(format!(
            "unknown policy `{policy_name}`; expected mw, wmw, fmw-square, or fmw-log"
        ))
    })?;
    let rounds = spec.params.usize("rounds", 1000)?;
    if rounds == 0 {
        return Err(usage("rounds must be at least 1"));
    }
    let cps = checkpoints_from(&spec.params, rounds)?;

    // Per rep and checkpoint: queue vector, total, and running mean Lyapunov
    // increment (the empirical drift rate up to t).
    type Snap = (Vec<u64>, f64, f64);
    let runs: Vec<Result<Vec<Snap>, network::NetworkError>> =
        replicate(spec.reps, spec.seed, |_, mut rng| {
            let trace = network::simulate(&set, &arrivals, &policy, rounds, &mut rng)?;
            let mut cum = 0.0;
            let mut snaps = Vec::with_capacity(cps.len());
            let mut next = 0;
            for (t, inc) in trace.lyapunov_increments.iter().enumerate() {
                cum += inc;
                let slot = t + 1;
                while next < cps.len() && cps[next] == slot {
                    let queue = trace.queues[slot].clone();
                    let total = queue.iter().sum::<u64>() as f64;
                    snaps.push((queue, total, cum / slot as f64));
                    next += 1;
                }
            }
            Ok(snaps)
        });
    let mut per_rep = Vec::with_capacity(runs.len());
    for r in runs {
        per_rep.push(r.map_err(runtime)?);
    }

    let mut header = vec!["rep".to_string(), "t".to_string()];
    header.extend((1..=q).map(|j| format!("Q_{j}")));
    header.push("total".to_string());
    header.push("drift".to_string());
    let mut main = Table::new(header.clone());
    for (rep, snaps) in per_rep.iter().enumerate() {
        for (ci, &t) in cps.iter().enumerate() {
            let (queue, total, drift) = &snaps[ci];
            let mut row = vec![rep.to_string(), t.to_string()];
            row.extend(queue.iter().map(|v| v.to_string()));
            row.push(fmt(*total));
            row.push(fmt(*drift));
            main.push(row);
        }
    }
    let mut summary = Table::new(header[1..].to_vec());
    let n = per_rep.len() as f64;
    for (ci, &t) in cps.iter().enumerate() {
        let mut qmean = vec![0.0; q];
        let mut total = 0.0;
        let mut drift = 0.0;
        for snaps in &per_rep {
            for (j, &v) in snaps[ci].0.iter().enumerate() {
                qmean[j] += v as f64;
            }
            total += snaps[ci].1;
            drift += snaps[ci].2;
        }
        let mut row = vec![t.to_string()];
        row.extend(qmean.iter().map(|s| fmt(s / n)));
        row.push(fmt(total / n));
        row.push(fmt(drift / n));
        summary.push(row);
    }
    Ok(ExperimentOutput { main, summary })
}

fn run_lindley(spec: &ExperimentSpec) -> Result<ExperimentOutput, HarnessError> {
    spec.params.check_keys(&allowed(&[
        "dim",
        "context-bound",
        "w-norm",
        "tau-star",
        "tau-0",
        "arrival-rate",
        "rounds",
        "alpha",
        "rule",
    ]))?;
    let dim = spec.params.usize("dim", 4)?;
    let context_bound = spec.params.f64("context-bound", 2.0)?;
    let w_norm = spec.params.f64("w-norm", 3.0)?;
    let tau_star = spec.params.f64("tau-star", 1.0)?;
    let tau_0 = spec.params.f64("tau-0", 1.5)?;
    let arrival_rate = spec.params.f64("arrival-rate", 0.8)?;
    let rounds = spec.params.usize("rounds", 1000)?;
    let alpha = spec.params.f64("alpha", 1.0)?;
    let rule = match spec.params.string("rule", "mistake").as_str() {
        "mistake" => UpdateRule::MistakeOnly,
        "hinge" => UpdateRule::HingeStep,
        other => {
            return Err(usage(format!(
                "unknown rule `{other}`; expected mistake or hinge"
            )))
        }
    };
    if dim == 0 || rounds == 0 {
        return Err(usage("dim and rounds must be at least 1"));
    }
    if !(tau_0 > tau_star && tau_star > 0.0) {
        return Err(usage("need tau-0 > tau-star > 0"));
    }
    if !(arrival_rate > 0.0 && arrival_rate.is_finite()) || !(alpha > 0.0 && alpha.is_finite()) {
        return Err(usage("arrival-rate and alpha must be positive"));
    }
    if context_bound * w_norm < 1.0 {
        return Err(usage(
            "unit-margin separability needs context-bound * w-norm >= 1",
        ));
    }

    struct RepOut {
        wait_pi: Vec<f64>,
        wait_star: Vec<f64>,
        regret: Vec<f64>,
        mistakes_by_t: Vec<u64>,
        verdicts: lindley::QueueVerdicts,
        max_gap: f64,
    }
    let runs: Vec<Result<RepOut, lindley::LindleyError>> =
        replicate(spec.reps, spec.seed, |_, mut rng| {
            let w_star = lindley::sample_w_star(dim, w_norm, &mut rng);
            let model = ServiceModeModel::new(tau_star, tau_0, context_bound, w_star)?;
            let stream = lindley::gen_stream(&model, rounds, &mut rng)?;
            let inter = lindley::dyadic_exp_interarrivals(arrival_rate, rounds, &mut rng);
            let (trace, verdicts, _) =
                lindley::run_queue_with_perceptron(&model, &stream, &inter, alpha, rule)?;
            let mut regret = Vec::with_capacity(rounds + 1);
            let mut mistakes_by_t = Vec::with_capacity(rounds + 1);
            let mut cum = 0.0;
            let mut seen = 0u64;
            let mut next_mistake = trace.mistakes.iter().copied().peekable();
            regret.push(0.0);
            mistakes_by_t.push(0);
            for t in 0..rounds {
                cum += trace.service_pi[t] - tau_star;
                if next_mistake.peek() == Some(&t) {
                    next_mistake.next();
                    seen += 1;
                }
                regret.push(cum);
                mistakes_by_t.push(seen);
            }
            let max_gap = trace
                .wait_pi
                .iter()
                .zip(&trace.wait_star)
                .map(|(p, o)| p - o)
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(RepOut {
                wait_pi: trace.wait_pi,
                wait_star: trace.wait_star,
                regret,
                mistakes_by_t,
                verdicts,
                max_gap,
            })
        });
    let mut per_rep = Vec::with_capacity(runs.len());
    for r in runs {
        per_rep.push(r.map_err(runtime)?);
    }

    let mut main = Table::new([
        "rep",
        "mistakes",
        "mistake_bound",
        "last_mistake",
        "t_prime",
        "equal_after_t_prime",
        "max_gap",
        "gap_bound",
    ]);
    for (rep, out) in per_rep.iter().enumerate() {
        let v = &out.verdicts;
        main.push(vec![
            rep.to_string(),
            v.mistakes.to_string(),
            fmt(v.mistake_bound),
            v.last_mistake.map_or(String::new(), |m| m.to_string()),
            v.t_prime.map_or(String::new(), |t| t.to_string()),
            (v.equal_after_t_prime as u8).to_string(),
            fmt(out.max_gap),
            fmt(v.gap_bound),
        ]);
    }
    let mut summary = Table::new(["t", "W_pi", "W_star", "gap", "regret", "mistakes"]);
    let n = per_rep.len() as f64;
    for t in 0..=rounds {
        let mut w_pi = 0.0;
        let mut w_star = 0.0;
        let mut rg = 0.0;
        let mut mk = 0.0;
        for out in &per_rep {
            w_pi += out.wait_pi[t];
            w_star += out.wait_star[t];
            rg += out.regret[t];
            mk += out.mistakes_by_t[t] as f64;
        }
        summary.push(vec![
            t.to_string(),
            fmt(w_pi / n),
            fmt(w_star / n),
            fmt((w_pi - w_star) / n),
            fmt(rg / n),
            fmt(mk / n),
        ]);
    }
    Ok(ExperimentOutput { main, summary })
}

fn run_admission(spec: &ExperimentSpec) -> Result<ExperimentOutput, HarnessError> {
    spec.params.check_keys(&allowed(&[
        "lambda",
        "p",
        "policy",
        "threshold",
        "lookahead",
        "lookahead-scale",
        "horizon",
    ]))?;
    let lambda = spec.params.f64("lambda", 0.5)?;
    let p = spec.params.f64("p", 0.3)?;
    let horizon = spec.params.f64("horizon", 10_000.0)?;
    let scale = spec.params.f64("lookahead-scale", 2.0)?;
    let lookahead = match spec.params.string("lookahead", "inf").as_str() {
        "inf" => f64::INFINITY,
        // a * log(1/(1 - load)) with load measured as the normalized excess
        // over the diversion budget.
        "auto" => {
            if !(lambda > p && lambda < 1.0) {
                return Err(usage("lookahead=auto needs p < lambda < 1"));
            }
            let tilde = (lambda - p) / (1.0 - p);
            scale * (1.0 / (1.0 - tilde)).ln()
        }
        s => s
            .parse::<f64>()
            .map_err(|_| usage(format!("lookahead `{s}` is not a number, `inf`, or `auto`")))?,
    };
    let policy_name = spec.params.string("policy", "threshold");
    if !matches!(policy_name.as_str(), "threshold" | "greedy" | "windowed") {
        return Err(usage(format!(
            "unknown policy `{policy_name}`; expected threshold, greedy, or windowed"
        )));
    }
    if spec.params.get("threshold").is_some() && policy_name != "threshold" {
        return Err(usage("threshold is only meaningful with policy=threshold"));
    }
    let threshold = if policy_name == "threshold" {
        match spec.params.string("threshold", "min-feasible").as_str() {
            "none" => None,
            "min-feasible" => Some(
                admission::min_feasible_threshold(lambda, p).map_err(|e| usage(e.to_string()))?,
            ),
            s => Some(s.parse::<u64>().map_err(|_| {
                usage(format!(
                    "threshold `{s}` is not an integer, `none`, or `min-feasible`"
                ))
            })?),
        }
    } else {
        None
    };

    let runs: Vec<Result<admission::SimTrace, admission::AdmissionError>> =
        replicate(spec.reps, spec.seed, |rep, _| {
            let cfg =
                AdmissionConfig::new(lambda, p, lookahead, horizon, child_seed(spec.seed, rep))?;
            Ok(match policy_name.as_str() {
                "threshold" => admission::threshold_run(&cfg, threshold),
                "greedy" => admission::greedy_empty_run(&cfg),
                _ => admission::windowed_run(&cfg),
            })
        });
    let mut traces = Vec::with_capacity(runs.len());
    for r in runs {
        traces.push(r.map_err(|e| usage(e.to_string()))?);
    }

    let mut main = Table::new([
        "rep",
        "mean_queue",
        "diversion_rate",
        "admitted",
        "rejected",
        "rejections_at_nonempty",
        "budget_violations",
    ]);
    for (rep, tr) in traces.iter().enumerate() {
        main.push(vec![
            rep.to_string(),
            fmt(tr.mean_queue),
            fmt(tr.diversion_rate),
            tr.admitted.to_string(),
            tr.rejected.to_string(),
            tr.rejections_at_nonempty.to_string(),
            tr.budget_violations.to_string(),
        ]);
    }
    let eq: Vec<f64> = traces.iter().map(|t| t.mean_queue).collect();
    let dv: Vec<f64> = traces.iter().map(|t| t.diversion_rate).collect();
    let eq_stats = summarize(&eq).map_err(runtime)?;
    let mut summary = Table::new(["lambda", "policy", "EQ", "EQ_ci", "diversion_rate"]);
    summary.push(vec![
        fmt(lambda),
        policy_name.clone(),
        fmt(eq_stats.mean),
        fmt(eq_stats.ci_half),
        fmt(summarize(&dv).map_err(runtime)?.mean),
    ]);
    Ok(ExperimentOutput { main, summary })
}

fn run_balance(spec: &ExperimentSpec) -> Result<ExperimentOutput, HarnessError> {
    spec.params.check_keys(&allowed(&[
        "n",
        "lambda",
        "r",
        "c",
        "regime",
        "multiplier",
        "horizon",
    ]))?;
    let n = spec.params.usize("n", 100)?;
    let lambda = spec.params.f64("lambda", 0.9)?;
    let has_rc = spec.params.get("r").is_some() || spec.params.get("c").is_some();
    let (r, c) = match spec.params.get("regime") {
        Some(name) => {
            if has_rc {
                return Err(usage("give either regime or r and c, not both"));
            }
            let regime = match name {
                "high-message" => Regime::HighMessage,
                "high-memory" => Regime::HighMemory {
                    multiplier: spec.params.f64("multiplier", 1.2)?,
                },
                "constrained" => Regime::Constrained,
                other => {
                    return Err(usage(format!(
                    "unknown regime `{other}`; expected high-message, high-memory, or constrained"
                )))
                }
            };
            if spec.params.get("multiplier").is_some() && name != "high-memory" {
                return Err(usage(
                    "multiplier is only meaningful with regime=high-memory",
                ));
            }
            regime.parameters(n, lambda)
        }
        None => {
            if spec.params.get("multiplier").is_some() {
                return Err(usage(
                    "multiplier is only meaningful with regime=high-memory",
                ));
            }
            match (spec.params.get("r"), spec.params.get("c")) {
                (Some(_), Some(_)) => (spec.params.f64("r", 0.0)?, spec.params.usize("c", 0)?),
                _ => return Err(usage("give either regime or both r and c")),
            }
        }
    };
    let horizon = spec.params.f64("horizon", balance::default_horizon(n))?;
    ClusterConfig::new(n, lambda, r, c, horizon, spec.seed).map_err(|e| usage(e.to_string()))?;

    // Same per-replication seeds as the library aggregate: child(seed, rep+1).
    let stats: Vec<balance::RunStats> = replicate(spec.reps, spec.seed, |rep, _| {
        let cfg = ClusterConfig {
            n,
            lambda,
            r,
            c,
            horizon,
            seed: child_seed(spec.seed, rep + 1),
        };
        balance::simulate_cluster(&cfg)
    });

    let mut main = Table::new([
        "rep",
        "mean_delay",
        "mem_hit_fraction",
        "completed",
        "peak_memory",
        "stale_messages",
    ]);
    for (rep, st) in stats.iter().enumerate() {
        main.push(vec![
            rep.to_string(),
            fmt(st.mean_delay),
            fmt(st.mem_hit_fraction),
            st.completed.to_string(),
            st.peak_memory.to_string(),
            st.stale_messages.to_string(),
        ]);
    }
    let delays: Vec<f64> = stats.iter().map(|s| s.mean_delay).collect();
    let hits: Vec<f64> = stats.iter().map(|s| s.mem_hit_fraction).collect();
    let d = summarize(&delays).map_err(runtime)?;
    let mut summary = Table::new(["n", "r", "c", "mean_delay", "ci", "mem_hit_fraction"]);
    summary.push(vec![
        n.to_string(),
        fmt(r),
        c.to_string(),
        fmt(d.mean),
        fmt(d.ci_half),
        fmt(summarize(&hits).map_err(runtime)?.mean),
    ]);
    Ok(ExperimentOutput { main, summary })
}
