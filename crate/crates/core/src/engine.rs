//! Vector-payoff repeated games: payoff tensors, mixed actions, running
//! averages, matrix-game solving, and the approachability decision rule.
//!
//! Orientation: the row player minimizes, the column player maximizes. The
//! decision rule keeps the running average payoff near a convex target by
//! solving, at each step, the zero-sum game obtained by scalarizing the
//! payoff tensor along the supporting half-space normal.

use crate::convex::{self, Hyperplane, Support, TargetSet};
use crate::simplex::{solve_lp_max, LpError};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("payoff tensor must be a nonempty rectangular array of equal-length vectors")]
    MalformedTensor,
    #[error("payoff entries must be finite")]
    NonFiniteEntry,
    #[error("r_max {r_max} is below the largest payoff norm {max_norm}")]
    RmaxTooSmall { r_max: f64, max_norm: f64 },
    #[error("mixed action must be nonempty, nonnegative, and sum to 1 (sum was {sum})")]
    BadMixture { sum: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("initial average norm {norm} exceeds r_max {r_max}")]
    StartOutOfRange { norm: f64, r_max: f64 },
    #[error("target half-space is not approachable: game value {value} > offset {offset}")]
    NotApproachable { value: f64, offset: f64 },
    #[error("matrix game solver: {0}")]
    Solver(#[from] LpError),
    #[error("matrix game certificate failed: duality gap {gap}")]
    Certificate { gap: f64 },
    #[error(transparent)]
    Convex(#[from] convex::ConvexError),
    #[error("cyclic adversary needs a nonempty script of valid column indices")]
    BadScript,
}

/// Payoff tensor R[i][j] in R^dim for row action i against column action j,
/// with a certified bound r_max >= max ||R[i][j]||_2.
#[derive(Debug, Clone)]
pub struct PayoffTensor {
    entries: Vec<Vec<Vec<f64>>>,
    rows: usize,
    cols: usize,
    dim: usize,
    r_max: f64,
}

impl PayoffTensor {
    /// Validates shape and finiteness, returning (rows, cols, dim, max payoff norm).
    fn validate(entries: &[Vec<Vec<f64>>]) -> Result<(usize, usize, usize, f64), EngineError> {
        let rows = entries.len();
        if rows == 0 || entries[0].is_empty() || entries[0][0].is_empty() {
            return Err(EngineError::MalformedTensor);
        }
        let cols = entries[0].len();
        let dim = entries[0][0].len();
        let mut max_norm = 0.0f64;
        for row in entries {
            if row.len() != cols {
                return Err(EngineError::MalformedTensor);
            }
            for cell in row {
                if cell.len() != dim {
                    return Err(EngineError::MalformedTensor);
                }
                if cell.iter().any(|v| !v.is_finite()) {
                    return Err(EngineError::NonFiniteEntry);
                }
                max_norm = max_norm.max(convex::norm(cell));
            }
        }
        Ok((rows, cols, dim, max_norm))
    }

    pub fn new(entries: Vec<Vec<Vec<f64>>>, r_max: f64) -> Result<Self, EngineError> {
        let (rows, cols, dim, max_norm) = Self::validate(&entries)?;
        if !r_max.is_finite() || r_max + 1e-12 < max_norm {
            return Err(EngineError::RmaxTooSmall { r_max, max_norm });
        }
        Ok(Self {
            entries,
            rows,
            cols,
            dim,
            r_max,
        })
    }

    /// Builds the tensor with r_max set to the exact largest payoff norm.
    pub fn with_tight_rmax(entries: Vec<Vec<Vec<f64>>>) -> Result<Self, EngineError> {
        let (rows, cols, dim, max_norm) = Self::validate(&entries)?;
        Ok(Self {
            entries,
            rows,
            cols,
            dim,
            r_max: max_norm,
        })
    }

    /// Scalar zero-sum game as a 1-dimensional payoff tensor.
    pub fn scalar(matrix: &[Vec<f64>]) -> Result<Self, EngineError> {
        let entries = matrix
            .iter()
            .map(|row| row.iter().map(|&v| vec![v]).collect())
            .collect();
        Self::with_tight_rmax(entries)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn r_max(&self) -> f64 {
        self.r_max
    }
    pub fn entry(&self, i: usize, j: usize) -> &[f64] {
        &self.entries[i][j]
    }

    /// m[i][j] = normal . R[i][j].
    pub fn scalarize(&self, normal: &[f64]) -> Result<Vec<Vec<f64>>, EngineError> {
        if normal.len() != self.dim {
            return Err(EngineError::Dimension {
                expected: self.dim,
                got: normal.len(),
            });
        }
        Ok(self
            .entries
            .iter()
            .map(|row| row.iter().map(|cell| convex::dot(normal, cell)).collect())
            .collect())
    }
}

/// Probability vector over a finite action set.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedAction {
    weights: Vec<f64>,
}

impl MixedAction {
    pub fn new(weights: Vec<f64>) -> Result<Self, EngineError> {
        if weights.is_empty() || weights.iter().any(|w| !w.is_finite() || *w < -1e-12) {
            return Err(EngineError::BadMixture { sum: f64::NAN });
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(EngineError::BadMixture { sum });
        }
        let weights = weights.into_iter().map(|w| (w / sum).max(0.0)).collect();
        Ok(Self { weights })
    }

    pub fn pure(index: usize, len: usize) -> Self {
        let mut weights = vec![0.0; len];
        weights[index] = 1.0;
        Self { weights }
    }

    pub fn uniform(len: usize) -> Self {
        Self {
            weights: vec![1.0 / len as f64; len],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Inverse-CDF sample; consumes exactly one f64 from the stream.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        self.weights.len() - 1
    }
}

/// Running average of payoffs: after t updates the average equals
/// (q0 + sum of payoffs) / t exactly; at t = 0 it reports q0 itself.
#[derive(Debug, Clone)]
pub struct GameState {
    t: u64,
    q0: Vec<f64>,
    sum: Vec<f64>,
}

impl GameState {
    pub fn new(q0: Vec<f64>, r_max: f64) -> Result<Self, EngineError> {
        let norm = convex::norm(&q0);
        if norm > r_max + 1e-12 {
            return Err(EngineError::StartOutOfRange { norm, r_max });
        }
        let sum = vec![0.0; q0.len()];
        Ok(Self { t: 0, q0, sum })
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn qbar(&self) -> Vec<f64> {
        if self.t == 0 {
            return self.q0.clone();
        }
        let t = self.t as f64;
        self.q0
            .iter()
            .zip(&self.sum)
            .map(|(q, s)| (q + s) / t)
            .collect()
    }

    /// q0 plus the running payoff sum: the exact numerator of qbar, useful
    /// for replay checks that must avoid the division.
    pub fn totals(&self) -> Vec<f64> {
        self.q0.iter().zip(&self.sum).map(|(q, s)| q + s).collect()
    }

    pub fn update_average(&mut self, payoff: &[f64]) -> Result<(), EngineError> {
        if payoff.len() != self.sum.len() {
            return Err(EngineError::Dimension {
                expected: self.sum.len(),
                got: payoff.len(),
            });
        }
        if payoff.iter().any(|v| !v.is_finite()) {
            return Err(EngineError::NonFiniteEntry);
        }
        for (s, r) in self.sum.iter_mut().zip(payoff) {
            *s += r;
        }
        self.t += 1;
        Ok(())
    }
}

/// Expected payoff of mixed row action d against mixed column action a.
pub fn payoff(
    tensor: &PayoffTensor,
    d: &MixedAction,
    a: &MixedAction,
) -> Result<Vec<f64>, EngineError> {
    if d.weights().len() != tensor.rows() {
        return Err(EngineError::Dimension {
            expected: tensor.rows(),
            got: d.weights().len(),
        });
    }
    if a.weights().len() != tensor.cols() {
        return Err(EngineError::Dimension {
            expected: tensor.cols(),
            got: a.weights().len(),
        });
    }
    let mut out = vec![0.0; tensor.dim()];
    for (i, wi) in d.weights().iter().enumerate() {
        if *wi == 0.0 {
            continue;
        }
        for (j, wj) in a.weights().iter().enumerate() {
            if *wj == 0.0 {
                continue;
            }
            let scale = wi * wj;
            for (o, v) in out.iter_mut().zip(tensor.entry(i, j)) {
                *o += scale * v;
            }
        }
    }
    Ok(out)
}

/// Minimax solution of a scalar matrix game (row minimizes, column
/// maximizes): optimal mixtures for both sides and the game value.
#[derive(Debug, Clone)]
pub struct GameSolution {
    pub row: MixedAction,
    pub col: MixedAction,
    pub value: f64,
}

fn cleanup_weights(raw: &[f64]) -> Vec<f64> {
    let mut w: Vec<f64> = raw
        .iter()
        .map(|&v| if v < 1e-12 { 0.0 } else { v })
        .collect();
    let sum: f64 = w.iter().sum();
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Solves min_d max_a d^T M a by two LPs and verifies an explicit duality
/// certificate: the cleaned strategies must bracket the value within 1e-8.
pub fn solve_matrix_game(m: &[Vec<f64>]) -> Result<GameSolution, EngineError> {
    let rows = m.len();
    if rows == 0 || m[0].is_empty() {
        return Err(EngineError::MalformedTensor);
    }
    let cols = m[0].len();
    if m.iter().any(|r| r.len() != cols) {
        return Err(EngineError::MalformedTensor);
    }
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return Err(EngineError::NonFiniteEntry);
    }

    // Row LP over (d, z+, z-): minimize z = z+ - z- subject to
    // (d^T M)_j <= z for all j, d a probability vector.
    let mut c = vec![0.0; rows + 2];
    c[rows] = -1.0;
    c[rows + 1] = 1.0;
    let mut a_rows = Vec::with_capacity(cols + 2);
    let mut b = Vec::with_capacity(cols + 2);
    for j in 0..cols {
        let mut row = vec![0.0; rows + 2];
        for (i, ri) in m.iter().enumerate() {
            row[i] = ri[j];
        }
        row[rows] = -1.0;
        row[rows + 1] = 1.0;
        a_rows.push(row);
        b.push(0.0);
    }
    let mut ones = vec![1.0; rows];
    ones.extend_from_slice(&[0.0, 0.0]);
    a_rows.push(ones.clone());
    b.push(1.0);
    a_rows.push(ones.iter().map(|v| -v).collect());
    b.push(-1.0);
    let row_sol = solve_lp_max(&c, &a_rows, &b)?;
    let d = cleanup_weights(&row_sol.x[..rows]);

    // Column LP over (a, w+, w-): maximize w = w+ - w- subject to
    // (M a)_i >= w for all i, a a probability vector.
    let mut c = vec![0.0; cols + 2];
    c[cols] = 1.0;
    c[cols + 1] = -1.0;
    let mut a_rows = Vec::with_capacity(rows + 2);
    let mut b = Vec::with_capacity(rows + 2);
    for ri in m {
        let mut row = vec![0.0; cols + 2];
        for (j, v) in ri.iter().enumerate() {
            row[j] = -v;
        }
        row[cols] = 1.0;
        row[cols + 1] = -1.0;
        a_rows.push(row);
        b.push(0.0);
    }
    let mut ones = vec![1.0; cols];
    ones.extend_from_slice(&[0.0, 0.0]);
    a_rows.push(ones.clone());
    b.push(1.0);
    a_rows.push(ones.iter().map(|v| -v).collect());
    b.push(-1.0);
    let col_sol = solve_lp_max(&c, &a_rows, &b)?;
    let a = cleanup_weights(&col_sol.x[..cols]);

    // Guarantees from the cleaned strategies: d caps the value at vr from
    // above, a pins it at vc from below; both must agree within 1e-8.
    let vr = (0..cols)
        .map(|j| (0..rows).map(|i| d[i] * m[i][j]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    let vc = (0..rows)
        .map(|i| (0..cols).map(|j| m[i][j] * a[j]).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    let value_row = -row_sol.value;
    let value_col = col_sol.value;
    let gap = (vr - vc).max((value_row - value_col).abs());
    if gap > 1e-8 {
        return Err(EngineError::Certificate { gap });
    }
    Ok(GameSolution {
        row: MixedAction::new(d)?,
        col: MixedAction::new(a)?,
        value: value_row,
    })
}

/// Fictitious-play bracket for the game value: returns empirical mixtures
/// (dbar, abar) and rigorous bounds lo <= value <= hi computed from them.
pub fn fictitious_play(m: &[Vec<f64>], iters: usize) -> (Vec<f64>, Vec<f64>, f64, f64) {
    let rows = m.len();
    let cols = m[0].len();
    let mut row_counts = vec![0.0f64; rows];
    let mut col_counts = vec![0.0f64; cols];
    let mut i_cur = 0usize;
    let mut j_cur = 0usize;
    for _ in 0..iters {
        row_counts[i_cur] += 1.0;
        col_counts[j_cur] += 1.0;
        // Best responses to the opponent's empirical play; lowest index wins ties.
        let mut best_i = 0;
        let mut best_iv = f64::INFINITY;
        for (i, row) in m.iter().enumerate() {
            let v: f64 = row.iter().zip(&col_counts).map(|(a, c)| a * c).sum();
            if v < best_iv - 1e-15 {
                best_iv = v;
                best_i = i;
            }
        }
        let mut best_j = 0;
        let mut best_jv = f64::NEG_INFINITY;
        for j in 0..cols {
            let v: f64 = m.iter().zip(&row_counts).map(|(row, c)| row[j] * c).sum();
            if v > best_jv + 1e-15 {
                best_jv = v;
                best_j = j;
            }
        }
        i_cur = best_i;
        j_cur = best_j;
    }
    let total: f64 = row_counts.iter().sum();
    let dbar: Vec<f64> = row_counts.iter().map(|c| c / total).collect();
    let abar: Vec<f64> = col_counts.iter().map(|c| c / total).collect();
    let hi = (0..cols)
        .map(|j| (0..rows).map(|i| dbar[i] * m[i][j]).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    let lo = (0..rows)
        .map(|i| (0..cols).map(|j| m[i][j] * abar[j]).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    (dbar, abar, lo, hi)
}

/// True when the scalarized game value is at most the half-space offset, so
/// the row player can force the average payoff into the half-space.
pub fn check_halfspace_approachable(
    tensor: &PayoffTensor,
    h: &Hyperplane,
) -> Result<bool, EngineError> {
    let m = tensor.scalarize(&h.normal)?;
    let sol = solve_matrix_game(&m)?;
    Ok(sol.value <= h.offset + 1e-8)
}

/// One approachability decision: pure action 0 when the average is already
/// in the target, otherwise the minimax mixture of the scalarized game
/// through the supporting half-space. Errors when that game's value exceeds
/// the half-space offset beyond tolerance.
pub fn blackwell_decision(
    qbar: &[f64],
    tensor: &PayoffTensor,
    z: &TargetSet,
) -> Result<MixedAction, EngineError> {
    if qbar.len() != tensor.dim() {
        return Err(EngineError::Dimension {
            expected: tensor.dim(),
            got: qbar.len(),
        });
    }
    match convex::supporting_halfspace(qbar, z)? {
        Support::Inside => Ok(MixedAction::pure(0, tensor.rows())),
        Support::Separating(h) => {
            let m = tensor.scalarize(&h.normal)?;
            let sol = solve_matrix_game(&m)?;
            if sol.value > h.offset + 1e-8 {
                return Err(EngineError::NotApproachable {
                    value: sol.value,
                    offset: h.offset,
                });
            }
            Ok(sol.row)
        }
    }
}

/// Row player's per-round rule.
#[derive(Debug, Clone)]
pub enum PlayerRule {
    /// Approachability decision toward the target each round.
    Blackwell,
    Fixed(MixedAction),
}

/// Column player's per-round rule.
#[derive(Debug, Clone)]
pub enum AdversaryRule {
    Fixed(MixedAction),
    Uniform,
    /// Plays script[t mod len] at round t.
    Cycle(Vec<usize>),
}

/// Realized trajectory of a repeated vector-payoff game.
#[derive(Debug, Clone)]
pub struct RunTrace {
    /// Distance from the running average to the target after rounds 1..=T.
    pub distances: Vec<f64>,
    pub final_qbar: Vec<f64>,
    pub row_actions: Vec<usize>,
    pub col_actions: Vec<usize>,
}

/// Plays `rounds` rounds with realized (sampled) pure actions on both sides.
pub fn run_game(
    tensor: &PayoffTensor,
    z: &TargetSet,
    q0: Vec<f64>,
    player: &PlayerRule,
    adversary: &AdversaryRule,
    rounds: usize,
    rng: &mut ChaCha8Rng,
) -> Result<RunTrace, EngineError> {
    if z.dim() != tensor.dim() {
        return Err(EngineError::Dimension {
            expected: tensor.dim(),
            got: z.dim(),
        });
    }
    if let AdversaryRule::Cycle(script) = adversary {
        if script.is_empty() || script.iter().any(|&j| j >= tensor.cols()) {
            return Err(EngineError::BadScript);
        }
    }
    let mut state = GameState::new(q0, tensor.r_max())?;
    let mut distances = Vec::with_capacity(rounds);
    let mut row_actions = Vec::with_capacity(rounds);
    let mut col_actions = Vec::with_capacity(rounds);
    let uniform_cols = MixedAction::uniform(tensor.cols());
    for t in 0..rounds {
        let d = match player {
            PlayerRule::Blackwell => blackwell_decision(&state.qbar(), tensor, z)?,
            PlayerRule::Fixed(d) => d.clone(),
        };
        let i = d.sample(rng);
        let j = match adversary {
            AdversaryRule::Fixed(a) => a.sample(rng),
            AdversaryRule::Uniform => uniform_cols.sample(rng),
            AdversaryRule::Cycle(script) => script[t % script.len()],
        };
        state.update_average(tensor.entry(i, j))?;
        distances.push(convex::project(&state.qbar(), z)?.1);
        row_actions.push(i);
        col_actions.push(j);
    }
    Ok(RunTrace {
        distances,
        final_qbar: state.qbar(),
        row_actions,
        col_actions,
    })
}
