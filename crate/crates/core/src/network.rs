//! Switched queueing network: integer queue dynamics driven by a monotone
//! schedule set, the MaxWeight policy family, stability and transience
//! diagnostics, and the lift that rewrites scheduling as a vector-payoff
//! game with target {0}.

use crate::convex::TargetSet;
use crate::engine::{EngineError, PayoffTensor};
use crate::simplex::{solve_lp_max, LpError};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("schedule set must be a nonempty list of equal-length vectors")]
    BadScheduleSet,
    #[error("queue {0} is served by no schedule")]
    UnservedQueue(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("distribution needs matching supports/probabilities summing to 1 (sum {sum})")]
    BadDistribution { sum: f64 },
    #[error("service rates must lie in (0, 1]")]
    BadServiceRates,
    #[error("arrival mean is inside the schedule hull (margin {margin}); nothing to separate")]
    NotSupercritical { margin: f64 },
    #[error("lp: {0}")]
    Lp(#[from] LpError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Finite monotone set of feasible integer departure vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleSet {
    q: usize,
    schedules: Vec<Vec<u64>>,
    d_max: u64,
}

impl ScheduleSet {
    /// Builds the smallest monotone superset of `raw`: every componentwise
    /// smaller nonnegative vector of a member is a member. Schedules are
    /// stored sorted lexicographically, so index 0 is the zero schedule.
    pub fn monotone_closure(raw: &[Vec<u64>]) -> Result<Self, NetworkError> {
        if raw.is_empty() || raw[0].is_empty() {
            return Err(NetworkError::BadScheduleSet);
        }
        let q = raw[0].len();
        if raw.iter().any(|s| s.len() != q) {
            return Err(NetworkError::BadScheduleSet);
        }
        let mut set = std::collections::BTreeSet::new();
        for sigma in raw {
            // Enumerate the lower box of each generator.
            let mut cur = vec![0u64; q];
            loop {
                set.insert(cur.clone());
                let mut k = 0;
                loop {
                    if k == q {
                        break;
                    }
                    if cur[k] < sigma[k] {
                        cur[k] += 1;
                        for c in cur.iter_mut().take(k) {
                            *c = 0;
                        }
                        break;
                    }
                    k += 1;
                }
                if k == q {
                    break;
                }
            }
        }
        let schedules: Vec<Vec<u64>> = set.into_iter().collect();
        for j in 0..q {
            if !schedules.iter().any(|s| s[j] >= 1) {
                return Err(NetworkError::UnservedQueue(j));
            }
        }
        let d_max = schedules.iter().flatten().cloned().max().unwrap_or(0);
        Ok(Self {
            q,
            schedules,
            d_max,
        })
    }

    /// Serve exactly one queue per slot at unit rate (plus idling).
    pub fn one_at_a_time(q: usize) -> Self {
        let units: Vec<Vec<u64>> = (0..q)
            .map(|j| (0..q).map(|k| u64::from(k == j)).collect())
            .collect();
        Self::monotone_closure(&units).expect("unit vectors are well formed")
    }

    pub fn queues(&self) -> usize {
        self.q
    }
    pub fn schedules(&self) -> &[Vec<u64>] {
        &self.schedules
    }
    pub fn d_max(&self) -> u64 {
        self.d_max
    }

    /// Worst-case gap between the unrestricted weight Q.sigma and the weight
    /// of its feasible truncation, sum_j max_{0 <= k < sigma_j} k(sigma_j - k).
    /// Zero for 0/1 schedule sets.
    pub fn truncation_gap(&self) -> f64 {
        self.schedules
            .iter()
            .map(|s| {
                s.iter()
                    .map(|&sj| (0..sj).map(|k| (k * (sj - k)) as f64).fold(0.0, f64::max))
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

/// Distribution over integer arrival vectors.
#[derive(Debug, Clone)]
pub struct DiscreteDist {
    support: Vec<Vec<u64>>,
    probs: Vec<f64>,
}

impl DiscreteDist {
    pub fn new(support: Vec<Vec<u64>>, probs: Vec<f64>) -> Result<Self, NetworkError> {
        if support.is_empty() || support.len() != probs.len() || support[0].is_empty() {
            return Err(NetworkError::BadDistribution { sum: f64::NAN });
        }
        let q = support[0].len();
        if support.iter().any(|v| v.len() != q) {
            return Err(NetworkError::Dimension {
                expected: q,
                got: 0,
            });
        }
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|&p| !(0.0..=1.0 + 1e-9).contains(&p)) || (sum - 1.0).abs() > 1e-9 {
            return Err(NetworkError::BadDistribution { sum });
        }
        let probs = probs.into_iter().map(|p| p / sum).collect();
        Ok(Self { support, probs })
    }

    /// Independent Bernoulli(p_j) arrivals per queue.
    pub fn bernoulli_product(p: &[f64]) -> Result<Self, NetworkError> {
        if p.is_empty() || p.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(NetworkError::BadDistribution { sum: f64::NAN });
        }
        let q = p.len();
        let mut support = Vec::with_capacity(1 << q);
        let mut probs = Vec::with_capacity(1 << q);
        for mask in 0u64..(1 << q) {
            let v: Vec<u64> = (0..q).map(|j| (mask >> j) & 1).collect();
            let pr: f64 = (0..q)
                .map(|j| if v[j] == 1 { p[j] } else { 1.0 - p[j] })
                .product();
            support.push(v);
            probs.push(pr);
        }
        Self::new(support, probs)
    }

    pub fn mean(&self) -> Vec<f64> {
        let q = self.support[0].len();
        let mut m = vec![0.0; q];
        for (v, &p) in self.support.iter().zip(&self.probs) {
            for (mj, &vj) in m.iter_mut().zip(v) {
                *mj += p * vj as f64;
            }
        }
        m
    }

    pub fn max_component(&self) -> u64 {
        self.support.iter().flatten().cloned().max().unwrap_or(0)
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<u64> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (v, &p) in self.support.iter().zip(&self.probs) {
            acc += p;
            if u < acc {
                return v.clone();
            }
        }
        self.support.last().unwrap().clone()
    }
}

/// Arrival process variants; all componentwise bounded.
#[derive(Debug, Clone)]
pub enum ArrivalModel {
    Iid(DiscreteDist),
    /// Fixed list replayed cyclically.
    AdversarialSequence(Vec<Vec<u64>>),
    /// One distribution per step, cycled.
    TimeVaryingMean(Vec<DiscreteDist>),
}

impl ArrivalModel {
    pub fn a_max(&self) -> u64 {
        match self {
            ArrivalModel::Iid(d) => d.max_component(),
            ArrivalModel::AdversarialSequence(seq) => {
                seq.iter().flatten().cloned().max().unwrap_or(0)
            }
            ArrivalModel::TimeVaryingMean(ds) => {
                ds.iter().map(|d| d.max_component()).max().unwrap_or(0)
            }
        }
    }

    pub fn sample(&self, t: usize, rng: &mut ChaCha8Rng) -> Vec<u64> {
        match self {
            ArrivalModel::Iid(d) => d.sample(rng),
            ArrivalModel::AdversarialSequence(seq) => seq[t % seq.len()].clone(),
            ArrivalModel::TimeVaryingMean(ds) => ds[t % ds.len()].sample(rng),
        }
    }
}

/// Largest ε with abar + ε·1 in the convex hull of the schedule set
/// (negative when abar is outside). Solved as an LP over convex weights.
pub fn interior_margin(abar: &[f64], s: &ScheduleSet) -> Result<f64, NetworkError> {
    if abar.len() != s.q {
        return Err(NetworkError::Dimension {
            expected: s.q,
            got: abar.len(),
        });
    }
    let n = s.schedules.len();
    // Vars: lambda_1..n, eps+ , eps-. Maximize eps+ - eps-.
    let mut c = vec![0.0; n + 2];
    c[n] = 1.0;
    c[n + 1] = -1.0;
    let mut rows = Vec::new();
    let mut b = Vec::new();
    // Equality per queue: sum lambda sigma_j - eps = abar_j.
    for j in 0..s.q {
        let mut row = vec![0.0; n + 2];
        for (k, sigma) in s.schedules.iter().enumerate() {
            row[k] = sigma[j] as f64;
        }
        row[n] = -1.0;
        row[n + 1] = 1.0;
        b.push(abar[j]);
        rows.push(row.clone());
        for v in &mut row {
            *v = -*v;
        }
        b.push(-abar[j]);
        rows.push(row);
    }
    let mut ones = vec![1.0; n];
    ones.extend_from_slice(&[0.0, 0.0]);
    rows.push(ones.clone());
    b.push(1.0);
    rows.push(ones.iter().map(|v| -v).collect());
    b.push(-1.0);
    match solve_lp_max(&c, &rows, &b) {
        Ok(sol) => Ok(sol.value),
        Err(LpError::Infeasible(_)) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(NetworkError::Lp(e)),
    }
}

/// Index of the schedule maximizing sum_j w_j * sigma_j over schedules with
/// sigma <= cap componentwise; ties go to the lexicographically smallest
/// maximizer (schedules are stored in lexicographic order).
fn argmax_schedule(weights: &[f64], cap: Option<&[u64]>, s: &ScheduleSet) -> usize {
    let mut best = 0;
    let mut best_w = f64::NEG_INFINITY;
    for (k, sigma) in s.schedules.iter().enumerate() {
        if let Some(cap) = cap {
            if sigma.iter().zip(cap).any(|(sj, qj)| sj > qj) {
                continue;
            }
        }
        let w: f64 = sigma
            .iter()
            .zip(weights)
            .map(|(&sj, &wj)| sj as f64 * wj)
            .sum();
        if w > best_w {
            best_w = w;
            best = k;
        }
    }
    best
}

/// MaxWeight schedule: maximizes sum_j Q_j sigma_j over sigma in S with
/// sigma <= Q. Returns the index into `s.schedules()`.
pub fn maxweight(queue: &[u64], s: &ScheduleSet) -> Result<usize, NetworkError> {
    f_maxweight(queue, s, |x| x as f64)
}

/// MaxWeight with per-queue weights mu_j Q_j.
pub fn weighted_maxweight(
    queue: &[u64],
    s: &ScheduleSet,
    mu: &[f64],
) -> Result<usize, NetworkError> {
    if mu.len() != s.q {
        return Err(NetworkError::Dimension {
            expected: s.q,
            got: mu.len(),
        });
    }
    if mu.iter().any(|&m| m <= 0.0 || !m.is_finite()) {
        return Err(NetworkError::BadServiceRates);
    }
    if queue.len() != s.q {
        return Err(NetworkError::Dimension {
            expected: s.q,
            got: queue.len(),
        });
    }
    let weights: Vec<f64> = queue
        .iter()
        .zip(mu)
        .map(|(&qj, &mj)| mj * qj as f64)
        .collect();
    Ok(argmax_schedule(&weights, Some(queue), s))
}

/// MaxWeight with queue lengths fed through f (f(0) = 0, f nondecreasing).
pub fn f_maxweight(
    queue: &[u64],
    s: &ScheduleSet,
    f: impl Fn(u64) -> f64,
) -> Result<usize, NetworkError> {
    if queue.len() != s.q {
        return Err(NetworkError::Dimension {
            expected: s.q,
            got: queue.len(),
        });
    }
    let weights: Vec<f64> = queue.iter().map(|&qj| f(qj)).collect();
    Ok(argmax_schedule(&weights, Some(queue), s))
}

/// One slot of the queue recursion: Q'_j = Q_j + a_j - min(sigma_j, Q_j).
pub fn step(queue: &[u64], arrivals: &[u64], sigma: &[u64]) -> Vec<u64> {
    queue
        .iter()
        .zip(arrivals)
        .zip(sigma)
        .map(|((&qj, &aj), &sj)| qj + aj - sj.min(qj))
        .collect()
}

/// Scheduling policy selectable per run.
#[derive(Debug, Clone)]
pub enum Policy {
    MaxWeight,
    /// Bernoulli(mu_j)-thinned departures per served job, weights mu_j Q_j.
    WeightedMaxWeight(Vec<f64>),
    FMaxWeightSquare,
    FMaxWeightLog,
}

impl Policy {
    pub fn by_name(name: &str, mu: Option<Vec<f64>>) -> Option<Self> {
        match name {
            "mw" => Some(Policy::MaxWeight),
            "wmw" => mu.map(Policy::WeightedMaxWeight),
            "fmw-square" => Some(Policy::FMaxWeightSquare),
            "fmw-log" => Some(Policy::FMaxWeightLog),
            _ => None,
        }
    }
}

/// Simulation record: full queue trace plus the statistics the drift bound
/// needs.
#[derive(Debug, Clone)]
pub struct SimTrace {
    /// Q(t) for t = 0..=T.
    pub queues: Vec<Vec<u64>>,
    /// (1/T) sum_{t=1..T} of the total queue length.
    pub avg_total: f64,
    /// ||Q(t+1)||^2 - ||Q(t)||^2 per slot.
    pub lyapunov_increments: Vec<f64>,
    /// Mean of ||a(t) - d(t)||^2 over the run (d = realized departures).
    pub measured_c: f64,
    /// Realized departure vectors per slot.
    pub departures: Vec<Vec<u64>>,
    /// Realized arrival vectors per slot.
    pub arrivals: Vec<Vec<u64>>,
}

/// Runs the switched network for `horizon` slots from an empty queue.
pub fn simulate(
    s: &ScheduleSet,
    arrivals: &ArrivalModel,
    policy: &Policy,
    horizon: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SimTrace, NetworkError> {
    let q = s.q;
    let mut queue = vec![0u64; q];
    let mut queues = Vec::with_capacity(horizon + 1);
    queues.push(queue.clone());
    let mut lyapunov_increments = Vec::with_capacity(horizon);
    let mut departures = Vec::with_capacity(horizon);
    let mut arrivals_log = Vec::with_capacity(horizon);
    let mut total_sum = 0.0;
    let mut c_sum = 0.0;
    for t in 0..horizon {
        let a = arrivals.sample(t, rng);
        if a.len() != q {
            return Err(NetworkError::Dimension {
                expected: q,
                got: a.len(),
            });
        }
        let k = match policy {
            Policy::MaxWeight => maxweight(&queue, s)?,
            Policy::WeightedMaxWeight(mu) => weighted_maxweight(&queue, s, mu)?,
            Policy::FMaxWeightSquare => f_maxweight(&queue, s, |x| (x * x) as f64)?,
            Policy::FMaxWeightLog => f_maxweight(&queue, s, |x| (1.0 + x as f64).ln())?,
        };
        let sigma = &s.schedules[k];
        let mut d: Vec<u64> = sigma
            .iter()
            .zip(&queue)
            .map(|(&sj, &qj)| sj.min(qj))
            .collect();
        if let Policy::WeightedMaxWeight(mu) = policy {
            // Each served job departs independently with probability mu_j.
            for (dj, &mj) in d.iter_mut().zip(mu) {
                let served = *dj;
                let mut kept = 0;
                for _ in 0..served {
                    if rng.random::<f64>() < mj {
                        kept += 1;
                    }
                }
                *dj = kept;
            }
        }
        let old_norm2: f64 = queue.iter().map(|&x| (x * x) as f64).sum();
        let next = step(&queue, &a, &d);
        let new_norm2: f64 = next.iter().map(|&x| (x * x) as f64).sum();
        lyapunov_increments.push(new_norm2 - old_norm2);
        c_sum += a
            .iter()
            .zip(&d)
            .map(|(&aj, &dj)| {
                let diff = aj as f64 - dj as f64;
                diff * diff
            })
            .sum::<f64>();
        queue = next;
        total_sum += queue.iter().sum::<u64>() as f64;
        queues.push(queue.clone());
        departures.push(d);
        arrivals_log.push(a);
    }
    Ok(SimTrace {
        queues,
        avg_total: total_sum / horizon as f64,
        lyapunov_increments,
        measured_c: c_sum / horizon as f64,
        departures,
        arrivals: arrivals_log,
    })
}

/// Long-run bound on the time-averaged total queue implied by the quadratic
/// Lyapunov drift: (c + 2*kappa) / (2*margin), where kappa corrects for the
/// sigma <= Q truncation (zero for 0/1 schedule sets).
pub fn drift_bound(measured_c: f64, s: &ScheduleSet, margin: f64) -> Option<f64> {
    if margin <= 0.0 {
        return None;
    }
    Some((measured_c + 2.0 * s.truncation_gap()) / (2.0 * margin))
}

/// Separating direction for a supercritical arrival mean: n̂ in [0,1]^q and
/// ε̂ > 0 with n̂·(σ - ā) ≤ -ε̂ for every schedule, so n̂·Q(t) grows at
/// rate ε̂ regardless of policy.
pub fn transience_check(s: &ScheduleSet, abar: &[f64]) -> Result<(Vec<f64>, f64), NetworkError> {
    let margin = interior_margin(abar, s)?;
    if margin >= 0.0 {
        return Err(NetworkError::NotSupercritical { margin });
    }
    let q = s.q;
    // Vars: n_1..n_q in [0,1], eps >= 0. Maximize eps subject to
    // n.(sigma - abar) + eps <= 0 for every schedule.
    let mut c = vec![0.0; q + 1];
    c[q] = 1.0;
    let mut rows = Vec::new();
    let mut b = Vec::new();
    for sigma in &s.schedules {
        let mut row: Vec<f64> = (0..q).map(|j| sigma[j] as f64 - abar[j]).collect();
        row.push(1.0);
        rows.push(row);
        b.push(0.0);
    }
    for j in 0..q {
        let mut row = vec![0.0; q + 1];
        row[j] = 1.0;
        rows.push(row);
        b.push(1.0);
    }
    let sol = solve_lp_max(&c, &rows, &b)?;
    let eps = sol.value;
    if eps <= 1e-12 {
        return Err(NetworkError::NotSupercritical { margin });
    }
    Ok((sol.x[..q].to_vec(), eps))
}

/// The scheduling problem lifted to a vector-payoff game: rows are the
/// schedules, columns the integer arrival vectors whose mean can stay in the
/// schedule hull, payoff a - σ, target {0}.
#[derive(Debug, Clone)]
pub struct SwitchEmbedding {
    pub tensor: PayoffTensor,
    pub target: TargetSet,
    /// Row order of the tensor.
    pub schedules: Vec<Vec<u64>>,
    /// Column order of the tensor.
    pub arrivals: Vec<Vec<u64>>,
}

/// Block matrices of the lift: R^k is (1+q) x (q+1) with R^k[0][k] = 1 and
/// R^k[1+k][q] = -1, so [1, d]^T R^k [a, 1] = a_k - d_k.
pub fn embedding_blocks(q: usize) -> Vec<Vec<Vec<f64>>> {
    (0..q)
        .map(|k| {
            let mut block = vec![vec![0.0; q + 1]; 1 + q];
            block[0][k] = 1.0;
            block[1 + k][q] = -1.0;
            block
        })
        .collect()
}

/// Evaluates [1, d]^T R^k [a, 1] for each k.
pub fn block_payoff(blocks: &[Vec<Vec<f64>>], d: &[u64], a: &[u64]) -> Vec<f64> {
    let q = blocks.len();
    let mut dlift = vec![1.0];
    dlift.extend(d.iter().map(|&x| x as f64));
    let mut alift: Vec<f64> = a.iter().map(|&x| x as f64).collect();
    alift.push(1.0);
    (0..q)
        .map(|k| {
            let mut v = 0.0;
            for (u, du) in dlift.iter().enumerate() {
                for (w, aw) in alift.iter().enumerate() {
                    v += du * blocks[k][u][w] * aw;
                }
            }
            v
        })
        .collect()
}

/// Per-slot payoff of a replayed queue trace: arrivals minus realized
/// departures; its average telescopes to (Q(T) - Q(0)) / T exactly.
pub fn lift_payoff(arrivals: &[u64], departures: &[u64]) -> Vec<f64> {
    arrivals
        .iter()
        .zip(departures)
        .map(|(&a, &d)| a as f64 - d as f64)
        .collect()
}

/// Builds the game: every integer arrival vector bounded by a_max whose
/// point mass keeps the mean in the schedule hull becomes a column.
pub fn embed_as_game(s: &ScheduleSet, a_max: u64) -> Result<SwitchEmbedding, NetworkError> {
    let q = s.q;
    let mut arrivals = Vec::new();
    let mut cur = vec![0u64; q];
    loop {
        let as_f: Vec<f64> = cur.iter().map(|&x| x as f64).collect();
        if interior_margin(&as_f, s)? >= -1e-9 {
            arrivals.push(cur.clone());
        }
        let mut k = 0;
        loop {
            if k == q {
                break;
            }
            if cur[k] < a_max {
                cur[k] += 1;
                for c in cur.iter_mut().take(k) {
                    *c = 0;
                }
                break;
            }
            k += 1;
        }
        if k == q {
            break;
        }
    }
    let entries: Vec<Vec<Vec<f64>>> = s
        .schedules
        .iter()
        .map(|sigma| arrivals.iter().map(|a| lift_payoff(a, sigma)).collect())
        .collect();
    let tensor = PayoffTensor::with_tight_rmax(entries)?;
    Ok(SwitchEmbedding {
        tensor,
        target: TargetSet::Singleton(vec![0.0; q]),
        schedules: s.schedules.clone(),
        arrivals,
    })
}

/// Checks, for each recorded average-queue state, that the approachability
/// decision on the embedding puts weight only on schedules attaining the
/// MaxWeight objective max_sigma qbar . sigma.
pub fn verify_equivalence(
    embedding: &SwitchEmbedding,
    states: &[Vec<f64>],
) -> Result<bool, NetworkError> {
    for qbar in states {
        let d = crate::engine::blackwell_decision(qbar, &embedding.tensor, &embedding.target)?;
        let weights_of = |sigma: &[u64]| -> f64 {
            sigma
                .iter()
                .zip(qbar)
                .map(|(&sj, &wj)| sj as f64 * wj)
                .sum()
        };
        let best = embedding
            .schedules
            .iter()
            .map(|s| weights_of(s))
            .fold(f64::NEG_INFINITY, f64::max);
        let scale = 1.0f64.max(best.abs());
        for (k, w) in d.weights().iter().enumerate() {
            if *w > 1e-9 && (best - weights_of(&embedding.schedules[k])) > 1e-9 * scale {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
