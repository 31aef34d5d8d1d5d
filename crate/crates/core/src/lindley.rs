//! Single-server queue with two service modes: Lindley waiting-time
//! recursion, the regret-to-waiting-time transfer, and an online linear
//! classifier (perceptron) choosing the mode from per-customer context.
//!
//! All queue arithmetic runs on a dyadic time grid (multiples of 2^-10), so
//! waiting times, regrets, and gap inequalities are exact in f64; the
//! pathwise checks below compare with `==` and `<=`, no tolerances.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use thiserror::Error;

/// Slots per time unit of the dyadic grid.
pub const GRID: f64 = 1024.0;

#[derive(Debug, Error)]
pub enum LindleyError {
    #[error("need tau_0 > tau_star > 0, positive D and dimension")]
    BadModel,
    #[error("sample {index} violates the unit margin: y<w*,x> = {margin}")]
    MarginViolated { index: usize, margin: f64 },
    #[error("margin 1 is unreachable: D * ||w*|| = {0} < 1")]
    MarginInfeasible(f64),
    #[error("rejection sampler exceeded its attempt budget")]
    GeneratorStuck,
    #[error("input lengths disagree")]
    LengthMismatch,
    #[error("empty input")]
    Empty,
}

/// Rounds a positive duration up to the dyadic grid, clamped to [1/GRID, 64].
pub fn grid_round_up(x: f64) -> f64 {
    ((x * GRID).ceil() / GRID).clamp(1.0 / GRID, 64.0)
}

/// Two-mode service model with linearly separable contexts.
#[derive(Debug, Clone)]
pub struct ServiceModeModel {
    pub tau_star: f64,
    pub tau_0: f64,
    pub dim: usize,
    pub context_bound: f64,
    pub w_star: Vec<f64>,
}

impl ServiceModeModel {
    pub fn new(
        tau_star: f64,
        tau_0: f64,
        context_bound: f64,
        w_star: Vec<f64>,
    ) -> Result<Self, LindleyError> {
        if !(tau_0 > tau_star && tau_star > 0.0) || context_bound <= 0.0 || w_star.is_empty() {
            return Err(LindleyError::BadModel);
        }
        Ok(Self {
            tau_star,
            tau_0,
            dim: w_star.len(),
            context_bound,
            w_star,
        })
    }

    /// D^2 ||w*||^2, the perceptron mistake budget.
    pub fn mistake_budget(&self) -> f64 {
        let norm2: f64 = self.w_star.iter().map(|v| v * v).sum();
        self.context_bound * self.context_bound * norm2
    }
}

pub fn lindley_step(wait: f64, tau: f64, interarrival: f64) -> f64 {
    (wait + tau - interarrival).max(0.0)
}

/// Waiting times W_0..W_n with W_0 = 0: W_{t+1} = max(0, W_t + tau_t - a_t).
pub fn lindley_trajectory(taus: &[f64], interarrivals: &[f64]) -> Vec<f64> {
    let mut w = Vec::with_capacity(taus.len() + 1);
    w.push(0.0);
    for (tau, a) in taus.iter().zip(interarrivals) {
        w.push(lindley_step(*w.last().unwrap(), *tau, *a));
    }
    w
}

/// Closed form W_{t+1} = max(0, max_{k<=t} sum_{s=k..t} (tau_s - a_s)).
pub fn suffix_max_wait(taus: &[f64], interarrivals: &[f64], t: usize) -> f64 {
    let mut best = 0.0f64;
    let mut run = 0.0f64;
    for s in (0..=t).rev() {
        run += taus[s] - interarrivals[s];
        best = best.max(run);
    }
    best
}

/// Coupled record of the policy queue and the always-fast oracle queue.
#[derive(Debug, Clone)]
pub struct WaitTrace {
    pub interarrivals: Vec<f64>,
    /// True fast mode per customer (+1/-1).
    pub labels: Vec<f64>,
    /// Mode the policy chose.
    pub modes: Vec<f64>,
    /// Realized service times of the policy queue.
    pub service_pi: Vec<f64>,
    pub tau_star: f64,
    pub tau_0: f64,
    /// W_0..W_n of the policy queue.
    pub wait_pi: Vec<f64>,
    /// W_0..W_n of the oracle queue.
    pub wait_star: Vec<f64>,
    /// Customer indices where the chosen mode was wrong.
    pub mistakes: Vec<usize>,
}

/// Builds the coupled trace from realized mode choices.
pub fn build_trace(
    interarrivals: Vec<f64>,
    labels: Vec<f64>,
    modes: Vec<f64>,
    tau_star: f64,
    tau_0: f64,
) -> Result<WaitTrace, LindleyError> {
    let n = interarrivals.len();
    if labels.len() != n || modes.len() != n {
        return Err(LindleyError::LengthMismatch);
    }
    if n == 0 {
        return Err(LindleyError::Empty);
    }
    let service_pi: Vec<f64> = labels
        .iter()
        .zip(&modes)
        .map(|(&y, &m)| if m == y { tau_star } else { tau_0 })
        .collect();
    let wait_pi = lindley_trajectory(&service_pi, &interarrivals);
    let wait_star = lindley_trajectory(&vec![tau_star; n], &interarrivals);
    let mistakes = labels
        .iter()
        .zip(&modes)
        .enumerate()
        .filter_map(|(t, (&y, &m))| (m != y).then_some(t))
        .collect();
    Ok(WaitTrace {
        interarrivals,
        labels,
        modes,
        service_pi,
        tau_star,
        tau_0,
        wait_pi,
        wait_star,
        mistakes,
    })
}

/// Cumulative extra service cost sum_{s<t} (tau^pi_s - tau*).
pub fn service_regret(trace: &WaitTrace, t: usize) -> f64 {
    trace.service_pi[..t]
        .iter()
        .map(|tau| tau - trace.tau_star)
        .sum()
}

/// Pathwise transfer inequality: for every t,
/// W^pi_{t+1} - W^*_{t+1} <= sum_{s=t0..t} (tau^pi_s - tau*), with t0 the
/// last customer index at or before t with W^pi = 0. Exact on the grid.
pub fn waiting_gap_check(trace: &WaitTrace) -> Vec<bool> {
    let n = trace.service_pi.len();
    let mut out = Vec::with_capacity(n);
    let mut t0 = 0usize;
    for t in 0..n {
        if trace.wait_pi[t] == 0.0 {
            t0 = t;
        }
        let rhs: f64 = trace.service_pi[t0..=t]
            .iter()
            .map(|tau| tau - trace.tau_star)
            .sum();
        out.push(trace.wait_pi[t + 1] - trace.wait_star[t + 1] <= rhs);
    }
    out
}

pub fn hinge_loss(w: &[f64], x: &[f64], y: f64) -> f64 {
    let dot: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
    (1.0 - y * dot).max(0.0)
}

/// +1 on the boundary: mode(+) whenever <w, x> >= 0.
pub fn classify(w: &[f64], x: &[f64]) -> f64 {
    let dot: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
    if dot >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone)]
pub struct PerceptronState {
    pub w: Vec<f64>,
    pub alpha: f64,
    /// Classification mistakes observed so far.
    pub mistake_count: u64,
    /// Updates actually applied so far.
    pub margin_update_count: u64,
}

impl PerceptronState {
    pub fn new(dim: usize, alpha: f64) -> Self {
        Self {
            w: vec![0.0; dim],
            alpha,
            mistake_count: 0,
            margin_update_count: 0,
        }
    }
}

/// When the learner moves its weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateRule {
    /// Hinge subgradient step: update when y<w,x> < 1. This is online
    /// gradient descent on the hinge loss.
    HingeStep,
    /// Classical perceptron: update only when y<w,x> <= 0. Mistake counts
    /// under this rule are exactly invariant to the learning rate.
    MistakeOnly,
}

/// One round under the chosen rule; returns true when an update fired.
pub fn perceptron_step(s: &mut PerceptronState, x: &[f64], y: f64, rule: UpdateRule) -> bool {
    if classify(&s.w, x) != y {
        s.mistake_count += 1;
    }
    let dot: f64 = s.w.iter().zip(x).map(|(a, b)| a * b).sum();
    let fire = match rule {
        UpdateRule::HingeStep => y * dot < 1.0,
        UpdateRule::MistakeOnly => y * dot <= 0.0,
    };
    if fire {
        for (wi, xi) in s.w.iter_mut().zip(x) {
            *wi += s.alpha * y * xi;
        }
        s.margin_update_count += 1;
    }
    fire
}

/// The hinge-step rule (update when y<w,x> < 1).
pub fn perceptron_update(s: &mut PerceptronState, x: &[f64], y: f64) -> bool {
    perceptron_step(s, x, y, UpdateRule::HingeStep)
}

/// Runs the mistake-invariant perceptron over a separable stream and returns
/// (mistakes, D^2 ||w*||^2). Errors when any sample breaks the unit margin.
pub fn mistake_bound_check(
    model: &ServiceModeModel,
    stream: &[(Vec<f64>, f64)],
    alpha: f64,
) -> Result<(u64, f64), LindleyError> {
    for (index, (x, y)) in stream.iter().enumerate() {
        let margin: f64 = model.w_star.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() * y;
        if margin < 1.0 - 1e-12 {
            return Err(LindleyError::MarginViolated { index, margin });
        }
    }
    let mut s = PerceptronState::new(model.dim, alpha);
    for (x, y) in stream {
        perceptron_step(&mut s, x, *y, UpdateRule::MistakeOnly);
    }
    Ok((s.mistake_count, model.mistake_budget()))
}

/// Online-gradient-descent trajectory on hinge losses with per-round steps;
/// returns w_1..w_{T+1} (w_1 = start).
pub fn ogd_hinge_trajectory(
    xs: &[Vec<f64>],
    ys: &[f64],
    alphas: &[f64],
    start: &[f64],
) -> Result<Vec<Vec<f64>>, LindleyError> {
    if xs.len() != ys.len() || xs.len() != alphas.len() {
        return Err(LindleyError::LengthMismatch);
    }
    let mut ws = Vec::with_capacity(xs.len() + 1);
    ws.push(start.to_vec());
    for ((x, &y), &alpha) in xs.iter().zip(ys).zip(alphas) {
        let w = ws.last().unwrap();
        let dot: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
        let mut next = w.clone();
        if y * dot < 1.0 {
            for (wi, xi) in next.iter_mut().zip(x) {
                *wi += alpha * y * xi;
            }
        }
        ws.push(next);
    }
    Ok(ws)
}

/// Evaluates both sides of the online-gradient-descent regret bound for a
/// hinge-loss trajectory against a fixed comparator:
///
///   sum_t l_t(w_t) - sum_t l_t(u)
///     <= ||w_1 - u||^2 / (2 a_1)
///      + sum_{t>=2} (||w_t - u||^2 / 2) (1/a_t - 1/a_{t-1})
///      + sum_t (a_t / 2) ||grad l_t(w_t)||^2.
///
/// Holds for any positive step sequence when the trajectory is generated by
/// the subgradient recursion of `ogd_hinge_trajectory`.
pub fn oco_bound_check(
    xs: &[Vec<f64>],
    ys: &[f64],
    ws: &[Vec<f64>],
    alphas: &[f64],
    comparator: &[f64],
) -> Result<(f64, f64), LindleyError> {
    let t_len = xs.len();
    if ys.len() != t_len || alphas.len() != t_len || ws.len() < t_len {
        return Err(LindleyError::LengthMismatch);
    }
    if t_len == 0 {
        return Err(LindleyError::Empty);
    }
    let dist2 = |w: &[f64]| -> f64 {
        w.iter()
            .zip(comparator)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    };
    let mut lhs = 0.0;
    let mut grad_term = 0.0;
    let mut middle = 0.0;
    for t in 0..t_len {
        lhs += hinge_loss(&ws[t], &xs[t], ys[t]) - hinge_loss(comparator, &xs[t], ys[t]);
        let dot: f64 = ws[t].iter().zip(&xs[t]).map(|(a, b)| a * b).sum();
        if ys[t] * dot < 1.0 {
            let g2: f64 = xs[t].iter().map(|v| v * v).sum();
            grad_term += alphas[t] / 2.0 * g2;
        }
        if t >= 1 {
            middle += dist2(&ws[t]) / 2.0 * (1.0 / alphas[t] - 1.0 / alphas[t - 1]);
        }
    }
    let rhs = dist2(&ws[0]) / (2.0 * alphas[0]) + middle + grad_term;
    Ok((lhs, rhs))
}

/// Outcome of the coupled queue run.
#[derive(Debug, Clone)]
pub struct QueueVerdicts {
    /// D^2 ||w*||^2 (tau_0 - tau*), the waiting-gap budget.
    pub gap_bound: f64,
    /// Gap inequality held at every index.
    pub gap_ok: bool,
    pub last_mistake: Option<usize>,
    /// First index at or after the last mistake's service where the policy
    /// queue empties; both queues coincide from here on.
    pub t_prime: Option<usize>,
    pub equal_after_t_prime: bool,
    pub mistakes: u64,
    pub mistake_bound: f64,
}

/// Simulates the perceptron-scheduled queue and the oracle queue on one
/// coupled arrival stream, then checks the waiting-gap bound and the
/// eventual-equality property.
pub fn run_queue_with_perceptron(
    model: &ServiceModeModel,
    stream: &[(Vec<f64>, f64)],
    interarrivals: &[f64],
    alpha: f64,
    rule: UpdateRule,
) -> Result<(WaitTrace, QueueVerdicts, PerceptronState), LindleyError> {
    if stream.len() != interarrivals.len() {
        return Err(LindleyError::LengthMismatch);
    }
    if stream.is_empty() {
        return Err(LindleyError::Empty);
    }
    let mut s = PerceptronState::new(model.dim, alpha);
    let mut modes = Vec::with_capacity(stream.len());
    let mut labels = Vec::with_capacity(stream.len());
    for (x, y) in stream {
        modes.push(classify(&s.w, x));
        labels.push(*y);
        perceptron_step(&mut s, x, *y, rule);
    }
    let trace = build_trace(
        interarrivals.to_vec(),
        labels,
        modes,
        model.tau_star,
        model.tau_0,
    )?;
    let gap_bound = model.mistake_budget() * (model.tau_0 - model.tau_star);
    let gap_ok = trace
        .wait_pi
        .iter()
        .zip(&trace.wait_star)
        .all(|(p, o)| p - o <= gap_bound);
    let last_mistake = trace.mistakes.last().copied();
    let search_from = last_mistake.map_or(0, |m| m + 1);
    let t_prime = (search_from..trace.wait_pi.len()).find(|&t| trace.wait_pi[t] == 0.0);
    let equal_after_t_prime = match t_prime {
        None => true,
        Some(tp) => (tp..trace.wait_pi.len()).all(|t| trace.wait_pi[t] == trace.wait_star[t]),
    };
    Ok((
        trace,
        QueueVerdicts {
            gap_bound,
            gap_ok,
            last_mistake,
            t_prime,
            equal_after_t_prime,
            mistakes: s.mistake_count,
            mistake_bound: model.mistake_budget(),
        },
        s,
    ))
}

/// Uniform point on the sphere of the given radius.
pub fn sample_w_star(dim: usize, norm: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let len: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if len > 1e-12 {
            return g.iter().map(|v| v / len * norm).collect();
        }
    }
}

/// Separable context stream: x uniform in the D-ball, rejected until
/// |<w*, x>| >= 1, labeled y = sign<w*, x>.
pub fn gen_stream(
    model: &ServiceModeModel,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(Vec<f64>, f64)>, LindleyError> {
    let norm: f64 = model.w_star.iter().map(|v| v * v).sum::<f64>().sqrt();
    let reach = model.context_bound * norm;
    if reach < 1.0 {
        return Err(LindleyError::MarginInfeasible(reach));
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut found = None;
        for _ in 0..100_000 {
            let g: Vec<f64> = (0..model.dim).map(|_| StandardNormal.sample(rng)).collect();
            let len: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if len <= 1e-12 {
                continue;
            }
            let u: f64 = rng.random();
            let r = model.context_bound * u.powf(1.0 / model.dim as f64);
            let x: Vec<f64> = g.iter().map(|v| v / len * r).collect();
            let dot: f64 = model.w_star.iter().zip(&x).map(|(a, b)| a * b).sum();
            if dot.abs() >= 1.0 {
                found = Some((x, if dot >= 0.0 { 1.0 } else { -1.0 }));
                break;
            }
        }
        out.push(found.ok_or(LindleyError::GeneratorStuck)?);
    }
    Ok(out)
}

/// Exponential inter-arrival times rounded up to the dyadic grid.
pub fn dyadic_exp_interarrivals(rate: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let exp = Exp::new(rate).expect("positive rate");
    (0..n).map(|_| grid_round_up(exp.sample(rng))).collect()
}
