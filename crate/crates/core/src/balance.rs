//! Memory- and communication-limited load balancing: n exponential servers,
//! Poisson job arrivals routed by a dispatcher that remembers at most c
//! idle-server IDs, fed by idle servers signalling at rate r.
//!
//! Event-driven, single priority queue per replication, deterministic
//! tie-breaking by sequence number. Idle-period message processes are
//! cancelled lazily: each message event carries the epoch of the idle
//! period that scheduled it and is dropped if the server has since flipped.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet, VecDeque};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

use crate::rng::child_rng;

#[derive(Debug, Error)]
pub enum BalanceError {
    #[error("config invalid: {0}")]
    BadConfig(&'static str),
}

#[derive(Debug, Clone)]
pub struct ClusterConfig {
    pub n: usize,
    /// Per-server load; the system arrival rate is lambda * n.
    pub lambda: f64,
    /// Message rate of each idle server; zero disables messaging.
    pub r: f64,
    /// Memory capacity in server-ID slots.
    pub c: usize,
    pub horizon: f64,
    pub seed: u64,
}

impl ClusterConfig {
    pub fn new(
        n: usize,
        lambda: f64,
        r: f64,
        c: usize,
        horizon: f64,
        seed: u64,
    ) -> Result<Self, BalanceError> {
        if n == 0 {
            return Err(BalanceError::BadConfig("need at least one server"));
        }
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(BalanceError::BadConfig("lambda must lie in (0, 1)"));
        }
        if !(r >= 0.0 && r.is_finite()) {
            return Err(BalanceError::BadConfig("r must be finite and >= 0"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(BalanceError::BadConfig("horizon must be finite and > 0"));
        }
        Ok(Self {
            n,
            lambda,
            r,
            c,
            horizon,
            seed,
        })
    }
}

/// Bounded set of distinct server IDs with uniform random removal.
#[derive(Debug, Default)]
pub struct DispatcherMemory {
    ids: Vec<u32>,
    members: HashSet<u32>,
    capacity: usize,
}

impl DispatcherMemory {
    pub fn new(capacity: usize) -> Self {
        Self {
            ids: Vec::new(),
            members: HashSet::new(),
            capacity,
        }
    }

    /// Remembers the ID; duplicates and a full memory are no-ops.
    pub fn insert(&mut self, id: u32) -> bool {
        if self.ids.len() >= self.capacity || !self.members.insert(id) {
            return false;
        }
        self.ids.push(id);
        true
    }

    /// Removes and returns a uniformly random remembered ID.
    pub fn take_random(&mut self, rng: &mut ChaCha8Rng) -> Option<u32> {
        if self.ids.is_empty() {
            return None;
        }
        let idx = rng.random_range(0..self.ids.len());
        let id = self.ids.swap_remove(idx);
        self.members.remove(&id);
        Some(id)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EventKind {
    Arrival,
    Departure { server: u32 },
    Message { server: u32, epoch: u64 },
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert for earliest-first order.
        other
            .time
            .total_cmp(&self.time)
            .then(other.seq.cmp(&self.seq))
    }
}

struct Server {
    /// Arrival times of queued jobs; the front one is in service.
    queue: VecDeque<f64>,
    /// Bumped on every idle<->busy flip; stale message events are dropped.
    epoch: u64,
    /// Waiting time of the job currently in service.
    current_wait: f64,
}

/// Single-replication outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunStats {
    /// Mean waiting time before service start over completed jobs after
    /// burn-in.
    pub mean_delay: f64,
    pub completed: u64,
    /// Fraction of post-burn-in arrivals routed via a remembered ID.
    pub mem_hit_fraction: f64,
    /// Largest memory occupancy observed.
    pub peak_memory: usize,
    /// Message events dropped because the idle period that scheduled them
    /// had ended.
    pub stale_messages: u64,
}

/// Cross-replication aggregate.
#[derive(Debug, Clone, Copy)]
pub struct DelayStats {
    pub mean_delay: f64,
    pub ci_half: f64,
    pub mem_hit_fraction: f64,
    pub reps: u64,
}

pub fn simulate_cluster(cfg: &ClusterConfig) -> RunStats {
    let mut rng = child_rng(cfg.seed, 0);
    let arrival_dist = Exp::new(cfg.lambda * cfg.n as f64).expect("positive arrival rate");
    let service_dist = Exp::new(1.0).expect("unit service rate");
    let message_dist = (cfg.r > 0.0).then(|| Exp::new(cfg.r).expect("positive message rate"));
    let burn_in = 0.2 * cfg.horizon;

    let mut servers: Vec<Server> = (0..cfg.n)
        .map(|_| Server {
            queue: VecDeque::new(),
            epoch: 0,
            current_wait: 0.0,
        })
        .collect();
    let mut memory = DispatcherMemory::new(cfg.c);
    let mut heap: BinaryHeap<Event> = BinaryHeap::new();
    let mut seq = 0u64;
    let push = |heap: &mut BinaryHeap<Event>, seq: &mut u64, time: f64, kind: EventKind| {
        heap.push(Event {
            time,
            seq: *seq,
            kind,
        });
        *seq += 1;
    };

    push(
        &mut heap,
        &mut seq,
        arrival_dist.sample(&mut rng),
        EventKind::Arrival,
    );
    if let Some(md) = &message_dist {
        for s in 0..cfg.n {
            push(
                &mut heap,
                &mut seq,
                md.sample(&mut rng),
                EventKind::Message {
                    server: s as u32,
                    epoch: 0,
                },
            );
        }
    }

    let mut delay_sum = 0.0;
    let mut completed = 0u64;
    let mut routed = 0u64;
    let mut hits = 0u64;
    let mut peak_memory = 0usize;
    let mut stale_messages = 0u64;

    while let Some(ev) = heap.pop() {
        let t = ev.time;
        if t >= cfg.horizon {
            break;
        }
        match ev.kind {
            EventKind::Arrival => {
                push(
                    &mut heap,
                    &mut seq,
                    t + arrival_dist.sample(&mut rng),
                    EventKind::Arrival,
                );
                let (target, via_memory) = match memory.take_random(&mut rng) {
                    Some(id) => (id as usize, true),
                    None => (rng.random_range(0..cfg.n), false),
                };
                if t >= burn_in {
                    routed += 1;
                    if via_memory {
                        hits += 1;
                    }
                }
                let server = &mut servers[target];
                let was_idle = server.queue.is_empty();
                server.queue.push_back(t);
                if was_idle {
                    server.epoch += 1;
                    server.current_wait = 0.0;
                    push(
                        &mut heap,
                        &mut seq,
                        t + service_dist.sample(&mut rng),
                        EventKind::Departure {
                            server: target as u32,
                        },
                    );
                }
            }
            EventKind::Departure { server } => {
                let s = &mut servers[server as usize];
                s.queue.pop_front().expect("departure from busy server");
                if t >= burn_in {
                    delay_sum += s.current_wait;
                    completed += 1;
                }
                if let Some(&next_arrival) = s.queue.front() {
                    s.current_wait = t - next_arrival;
                    push(
                        &mut heap,
                        &mut seq,
                        t + service_dist.sample(&mut rng),
                        EventKind::Departure { server },
                    );
                } else {
                    s.epoch += 1;
                    if let Some(md) = &message_dist {
                        push(
                            &mut heap,
                            &mut seq,
                            t + md.sample(&mut rng),
                            EventKind::Message {
                                server,
                                epoch: s.epoch,
                            },
                        );
                    }
                }
            }
            EventKind::Message { server, epoch } => {
                let s = &servers[server as usize];
                if s.queue.is_empty() && s.epoch == epoch {
                    memory.insert(server);
                    peak_memory = peak_memory.max(memory.len());
                    if let Some(md) = &message_dist {
                        push(
                            &mut heap,
                            &mut seq,
                            t + md.sample(&mut rng),
                            EventKind::Message { server, epoch },
                        );
                    }
                } else {
                    stale_messages += 1;
                }
            }
        }
        debug_assert!(memory.len() <= cfg.c);
    }

    RunStats {
        mean_delay: if completed > 0 {
            delay_sum / completed as f64
        } else {
            0.0
        },
        completed,
        mem_hit_fraction: if routed > 0 {
            hits as f64 / routed as f64
        } else {
            0.0
        },
        peak_memory,
        stale_messages,
    }
}

/// Independent replications with child seeds; the CI is 1.96 SE across
/// replications.
pub fn replicated_delay(cfg: &ClusterConfig, reps: u64) -> DelayStats {
    let outcomes = crate::stats::replicate(reps, cfg.seed, |rep, _| {
        let mut c = cfg.clone();
        c.seed = crate::rng::child_seed(cfg.seed, rep + 1);
        simulate_cluster(&c)
    });
    let delays: Vec<f64> = outcomes.iter().map(|o| o.mean_delay).collect();
    let hits: Vec<f64> = outcomes.iter().map(|o| o.mem_hit_fraction).collect();
    let d = crate::stats::summarize(&delays).expect("at least one replication");
    let h = crate::stats::summarize(&hits).expect("at least one replication");
    DelayStats {
        mean_delay: d.mean,
        ci_half: d.ci_half,
        mem_hit_fraction: h.mean,
        reps,
    }
}

/// Asymptotic regimes, desk-scaled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    /// Small fixed memory, message rate growing with n: c = 2, r = ln n.
    HighMessage,
    /// Unbounded memory (c = n) with the idle rate set so the average
    /// per-server message rate is `multiplier` times lambda:
    /// r = multiplier * lambda / (1 - lambda).
    HighMemory { multiplier: f64 },
    /// One memory slot, constant unit message rate.
    Constrained,
}

impl Regime {
    /// (r, c) for a given size and load.
    pub fn parameters(&self, n: usize, lambda: f64) -> (f64, usize) {
        match self {
            Regime::HighMessage => ((n as f64).ln(), 2),
            Regime::HighMemory { multiplier } => (multiplier * lambda / (1.0 - lambda), n),
            Regime::Constrained => (1.0, 1),
        }
    }
}

/// Default horizon per size: larger clusters reach steady state in fewer
/// time units and cost more per unit.
pub fn default_horizon(n: usize) -> f64 {
    if n >= 300 {
        150.0
    } else {
        500.0
    }
}

#[derive(Debug, Clone)]
pub struct RegimeRow {
    pub n: usize,
    pub r: f64,
    pub c: usize,
    pub mean_delay: f64,
    pub ci_half: f64,
    pub mem_hit_fraction: f64,
}

/// Runs one regime over a size list and reports delay per size.
pub fn regime_sweep(
    regime: Regime,
    ns: &[usize],
    lambda: f64,
    reps: u64,
    seed: u64,
) -> Result<Vec<RegimeRow>, BalanceError> {
    let mut rows = Vec::with_capacity(ns.len());
    for (i, &n) in ns.iter().enumerate() {
        let (r, c) = regime.parameters(n, lambda);
        let cfg = ClusterConfig::new(
            n,
            lambda,
            r,
            c,
            default_horizon(n),
            crate::rng::child_seed(seed, i as u64),
        )?;
        let stats = replicated_delay(&cfg, reps);
        rows.push(RegimeRow {
            n,
            r,
            c,
            mean_delay: stats.mean_delay,
            ci_half: stats.ci_half,
            mem_hit_fraction: stats.mem_hit_fraction,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_server_matches_mm1_waiting_time() {
        // Routing is irrelevant for n = 1; the wait oracle is lambda/(1-lambda).
        let cfg = ClusterConfig::new(1, 0.5, 1.0, 1, 4000.0, 70).unwrap();
        let outcomes = crate::stats::replicate(16, 70, |rep, _| {
            let mut c = cfg.clone();
            c.seed = 700 + rep;
            simulate_cluster(&c).mean_delay
        });
        let s = crate::stats::summarize(&outcomes).unwrap();
        assert!(
            (s.mean - 1.0).abs() <= 3.0 * s.se,
            "W {} se {}",
            s.mean,
            s.se
        );
    }

    #[test]
    fn no_memory_splits_into_independent_queues() {
        // Uniform random routing splits the Poisson stream exactly, so each
        // server is an M/M/1 at load lambda.
        let outcomes = crate::stats::replicate(12, 71, |rep, _| {
            let cfg = ClusterConfig::new(100, 0.5, 1.0, 0, 500.0, 710 + rep).unwrap();
            let run = simulate_cluster(&cfg);
            assert_eq!(run.peak_memory, 0);
            assert_eq!(run.mem_hit_fraction, 0.0);
            run.mean_delay
        });
        let s = crate::stats::summarize(&outcomes).unwrap();
        assert!(
            (s.mean - 1.0).abs() <= 3.0 * s.se,
            "W {} se {}",
            s.mean,
            s.se
        );
    }

    #[test]
    fn zero_message_rate_equals_no_memory() {
        let silent = crate::stats::replicate(10, 72, |rep, _| {
            let cfg = ClusterConfig::new(50, 0.6, 0.0, 2, 600.0, 720 + rep).unwrap();
            let run = simulate_cluster(&cfg);
            assert_eq!(run.peak_memory, 0);
            run.mean_delay
        });
        let bare = crate::stats::replicate(10, 73, |rep, _| {
            let cfg = ClusterConfig::new(50, 0.6, 1.0, 0, 600.0, 730 + rep).unwrap();
            simulate_cluster(&cfg).mean_delay
        });
        let a = crate::stats::summarize(&silent).unwrap();
        let b = crate::stats::summarize(&bare).unwrap();
        assert!(
            (a.mean - b.mean).abs() <= 3.0 * (a.se + b.se),
            "silent {} vs bare {}",
            a.mean,
            b.mean
        );
    }

    #[test]
    fn memory_stays_within_capacity() {
        for &c in &[1usize, 2, 5] {
            let cfg = ClusterConfig::new(20, 0.3, 5.0, c, 300.0, 74).unwrap();
            let run = simulate_cluster(&cfg);
            assert!(run.peak_memory <= c);
            assert!(run.mem_hit_fraction > 0.0);
        }
    }

    #[test]
    fn memory_set_semantics() {
        let mut m = DispatcherMemory::new(2);
        assert!(m.insert(3));
        assert!(!m.insert(3), "duplicate must be a no-op");
        assert!(m.insert(7));
        assert!(!m.insert(9), "full memory discards");
        assert_eq!(m.len(), 2);
        let mut rng = child_rng(75, 0);
        let mut seen = std::collections::HashSet::new();
        while let Some(id) = m.take_random(&mut rng) {
            assert!(seen.insert(id));
        }
        assert_eq!(seen, [3u32, 7].into_iter().collect());
    }

    #[test]
    fn high_message_regime_delay_decreases() {
        let rows = regime_sweep(Regime::HighMessage, &[10, 50, 100], 0.9, 6, 76).unwrap();
        assert!(
            rows.windows(2).all(|w| w[0].mean_delay > w[1].mean_delay),
            "delays {:?}",
            rows.iter().map(|r| r.mean_delay).collect::<Vec<_>>()
        );
    }

    #[test]
    fn high_memory_rate_threshold_separates() {
        // Average per-server message rate above lambda drives delay down;
        // below lambda it cannot.
        let fast =
            regime_sweep(Regime::HighMemory { multiplier: 1.2 }, &[200], 0.9, 8, 77).unwrap();
        let slow =
            regime_sweep(Regime::HighMemory { multiplier: 0.3 }, &[200], 0.9, 8, 78).unwrap();
        let gap = slow[0].mean_delay - fast[0].mean_delay;
        let se = (fast[0].ci_half + slow[0].ci_half) / 1.96;
        assert!(gap > 3.0 * se, "gap {gap} vs 3 SE {}", 3.0 * se);
        assert!(
            fast[0].mean_delay < 0.5,
            "fast arm delay {}",
            fast[0].mean_delay
        );
    }

    #[test]
    fn constrained_regime_delay_stays_positive() {
        let rows = regime_sweep(Regime::Constrained, &[200], 0.9, 8, 79).unwrap();
        let se = rows[0].ci_half / 1.96;
        assert!(
            rows[0].mean_delay > 5.0 * se,
            "delay {}",
            rows[0].mean_delay
        );
        assert!(rows[0].mean_delay > 1.0);
    }

    #[test]
    fn replay_is_deterministic() {
        let cfg = ClusterConfig::new(30, 0.8, 2.0, 2, 400.0, 80).unwrap();
        let a = simulate_cluster(&cfg);
        let b = simulate_cluster(&cfg);
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        assert!(ClusterConfig::new(0, 0.5, 1.0, 1, 10.0, 1).is_err());
        assert!(ClusterConfig::new(5, 1.0, 1.0, 1, 10.0, 1).is_err());
        assert!(ClusterConfig::new(5, 0.5, -1.0, 1, 10.0, 1).is_err());
        assert!(ClusterConfig::new(5, 0.5, 1.0, 1, 0.0, 1).is_err());
    }
}
