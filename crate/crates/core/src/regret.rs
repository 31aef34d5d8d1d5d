//! Regret minimization for scalar reward games by reduction to
//! approachability: the payoff vector at each round lists, per action i, how
//! much better i would have done than the action actually played. Driving
//! that vector's running average into the nonpositive orthant makes the
//! average regret against every fixed action vanish.

use crate::convex::{self, TargetSet};
use crate::engine::{blackwell_decision, EngineError, GameState, PayoffTensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegretError {
    #[error("reward matrix must be nonempty, rectangular, and finite")]
    BadGame,
    #[error("trace is empty")]
    EmptyTrace,
    #[error("adversary script is empty or references a missing column")]
    BadScript,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Scalar reward game: the player picks row i, the adversary column j, and
/// the player receives rewards[i][j].
#[derive(Debug, Clone)]
pub struct ScalarGame {
    rewards: Vec<Vec<f64>>,
}

impl ScalarGame {
    pub fn new(rewards: Vec<Vec<f64>>) -> Result<Self, RegretError> {
        if rewards.is_empty() || rewards[0].is_empty() {
            return Err(RegretError::BadGame);
        }
        let cols = rewards[0].len();
        if rewards.iter().any(|r| r.len() != cols) {
            return Err(RegretError::BadGame);
        }
        if rewards.iter().flatten().any(|v| !v.is_finite()) {
            return Err(RegretError::BadGame);
        }
        Ok(Self { rewards })
    }

    /// Rock-paper-scissors: +1 win, 0 draw, -1 loss; action k+1 beats k
    /// cyclically (paper beats rock, scissors beat paper, rock beats scissors).
    pub fn rock_paper_scissors() -> Self {
        let mut rewards = vec![vec![0.0; 3]; 3];
        for (i, row) in rewards.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = match (3 + i - j) % 3 {
                    0 => 0.0,
                    1 => 1.0,
                    _ => -1.0,
                };
            }
        }
        Self { rewards }
    }

    pub fn actions(&self) -> usize {
        self.rewards.len()
    }
    pub fn columns(&self) -> usize {
        self.rewards[0].len()
    }
    pub fn reward(&self, i: usize, j: usize) -> f64 {
        self.rewards[i][j]
    }
}

/// Vector payoff tensor of the regret reduction: entry (d, a) has component
/// i equal to r(i, a) - r(d, a), the per-round advantage of fixed action i
/// over the played action d. Target set: nonpositive orthant.
pub fn payoff_tensor(g: &ScalarGame) -> Result<PayoffTensor, RegretError> {
    let p = g.actions();
    let q = g.columns();
    let entries = (0..p)
        .map(|d| {
            (0..q)
                .map(|a| (0..p).map(|i| g.reward(i, a) - g.reward(d, a)).collect())
                .collect()
        })
        .collect();
    Ok(PayoffTensor::with_tight_rmax(entries)?)
}

pub fn orthant_target(p: usize) -> TargetSet {
    TargetSet::NonpositiveOrthant(p)
}

/// Scripted adversaries. Each sees the player's past realized actions but
/// commits to its column before the current round's action is sampled.
#[derive(Debug, Clone)]
pub enum Adversary {
    Constant(usize),
    Cyclic(Vec<usize>),
    /// Minimizes the player's expected reward against the player's empirical
    /// action frequencies so far (column 0 on the first round).
    BestResponse,
    Uniform,
    /// Minimizes the player's reward given the player's last realized action
    /// (column 0 on the first round).
    PunishLast,
}

impl Adversary {
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "constant" => Some(Adversary::Constant(0)),
            "cyclic" => Some(Adversary::Cyclic(vec![])),
            "best-response" => Some(Adversary::BestResponse),
            "uniform" => Some(Adversary::Uniform),
            "punish-last" => Some(Adversary::PunishLast),
            _ => None,
        }
    }

    fn pick(
        &self,
        g: &ScalarGame,
        t: usize,
        counts: &[u64],
        last: Option<usize>,
        rng: &mut ChaCha8Rng,
    ) -> usize {
        match self {
            Adversary::Constant(j) => *j,
            Adversary::Cyclic(script) => {
                if script.is_empty() {
                    t % g.columns()
                } else {
                    script[t % script.len()]
                }
            }
            Adversary::BestResponse => {
                let mut best = 0;
                let mut best_v = f64::INFINITY;
                for j in 0..g.columns() {
                    let v: f64 = (0..g.actions())
                        .map(|i| counts[i] as f64 * g.reward(i, j))
                        .sum();
                    if v < best_v - 1e-15 {
                        best_v = v;
                        best = j;
                    }
                }
                best
            }
            Adversary::Uniform => rng.random_range(0..g.columns()),
            Adversary::PunishLast => match last {
                None => 0,
                Some(d) => {
                    let mut best = 0;
                    let mut best_v = f64::INFINITY;
                    for j in 0..g.columns() {
                        if g.reward(d, j) < best_v - 1e-15 {
                            best_v = g.reward(d, j);
                            best = j;
                        }
                    }
                    best
                }
            },
        }
    }

    fn validate(&self, g: &ScalarGame) -> Result<(), RegretError> {
        match self {
            Adversary::Constant(j) if *j >= g.columns() => Err(RegretError::BadScript),
            Adversary::Cyclic(script) if script.iter().any(|&j| j >= g.columns()) => {
                Err(RegretError::BadScript)
            }
            _ => Ok(()),
        }
    }
}

/// Full log of a regret-minimization run.
#[derive(Debug, Clone)]
pub struct RegretTrace {
    pub player_actions: Vec<usize>,
    pub adversary_actions: Vec<usize>,
    /// Realized rewards r(d_t, a_t).
    pub rewards: Vec<f64>,
    /// Mixture-expected rewards E_{d ~ mix_t} r(d, a_t).
    pub expected_rewards: Vec<f64>,
    /// Cumulative reward each fixed action would have earned: sum_t r(i, a_t).
    pub cum_fixed: Vec<f64>,
    /// Final running average of the reduction's vector payoffs.
    pub final_qbar: Vec<f64>,
    /// q0 + sum of vector payoffs (the exact numerator of final_qbar).
    pub final_totals: Vec<f64>,
    pub r_max: f64,
}

/// Plays `rounds` rounds of the reduction with the approachability decision
/// rule against the given adversary.
pub fn play(
    g: &ScalarGame,
    adversary: &Adversary,
    rounds: usize,
    rng: &mut ChaCha8Rng,
) -> Result<RegretTrace, RegretError> {
    adversary.validate(g)?;
    let tensor = payoff_tensor(g)?;
    let target = orthant_target(g.actions());
    let mut state = GameState::new(vec![0.0; g.actions()], tensor.r_max())?;
    let mut counts = vec![0u64; g.actions()];
    let mut last = None;
    let mut trace = RegretTrace {
        player_actions: Vec::with_capacity(rounds),
        adversary_actions: Vec::with_capacity(rounds),
        rewards: Vec::with_capacity(rounds),
        expected_rewards: Vec::with_capacity(rounds),
        cum_fixed: vec![0.0; g.actions()],
        final_qbar: vec![],
        final_totals: vec![],
        r_max: tensor.r_max(),
    };
    for t in 0..rounds {
        // The adversary commits first, from history only.
        let j = adversary.pick(g, t, &counts, last, rng);
        let mix = blackwell_decision(&state.qbar(), &tensor, &target)?;
        let i = mix.sample(rng);
        let expected: f64 = mix
            .weights()
            .iter()
            .enumerate()
            .map(|(d, w)| w * g.reward(d, j))
            .sum();
        state.update_average(tensor.entry(i, j))?;
        counts[i] += 1;
        last = Some(i);
        trace.player_actions.push(i);
        trace.adversary_actions.push(j);
        trace.rewards.push(g.reward(i, j));
        trace.expected_rewards.push(expected);
        for (fx, row) in trace.cum_fixed.iter_mut().zip(0..g.actions()) {
            *fx += g.reward(row, j);
        }
    }
    trace.final_qbar = state.qbar();
    trace.final_totals = state.totals();
    Ok(trace)
}

/// Realized regret: best fixed action's cumulative reward minus the reward
/// actually collected.
pub fn regret(trace: &RegretTrace) -> Result<f64, RegretError> {
    if trace.rewards.is_empty() {
        return Err(RegretError::EmptyTrace);
    }
    let best = trace
        .cum_fixed
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(best - trace.rewards.iter().sum::<f64>())
}

/// Regret with the played rewards replaced by their per-round mixture
/// expectations.
pub fn expected_regret(trace: &RegretTrace) -> Result<f64, RegretError> {
    if trace.expected_rewards.is_empty() {
        return Err(RegretError::EmptyTrace);
    }
    let best = trace
        .cum_fixed
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(best - trace.expected_rewards.iter().sum::<f64>())
}

/// Theoretical per-round regret scale r_max * sqrt(2/T).
pub fn regret_bound(r_max: f64, rounds: usize) -> f64 {
    r_max * (2.0 / rounds as f64).sqrt()
}

/// Per-run links between regret and the reduction geometry. All three hold
/// pathwise: Rg/T = max_i qbar_i, and the max is at most both the sum and
/// the L2 norm of the positive parts, the latter being the distance to the
/// orthant.
#[derive(Debug, Clone, Copy)]
pub struct ChainLinks {
    pub regret_per_round: f64,
    pub max_component: f64,
    pub sum_positive: f64,
    pub distance: f64,
}

pub fn chain_links(trace: &RegretTrace) -> Result<ChainLinks, RegretError> {
    if trace.rewards.is_empty() {
        return Err(RegretError::EmptyTrace);
    }
    let t = trace.rewards.len() as f64;
    let rg = regret(trace)?;
    let max_component = trace
        .final_qbar
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let sum_positive: f64 = trace.final_qbar.iter().map(|&v| v.max(0.0)).sum();
    let distance = convex::project(
        &trace.final_qbar,
        &TargetSet::NonpositiveOrthant(trace.final_qbar.len()),
    )
    .expect("dimension fixed by construction")
    .1;
    Ok(ChainLinks {
        regret_per_round: rg / t,
        max_component,
        sum_positive,
        distance,
    })
}
