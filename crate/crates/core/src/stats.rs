//! Replication statistics: summaries, confidence intervals, and a least-squares
//! line fit used by the heavy-traffic scaling checks.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("cannot summarize an empty sample")]
    EmptySample,
    #[error("fit needs at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("fit inputs have mismatched lengths ({x} vs {y})")]
    LengthMismatch { x: usize, y: usize },
}

/// Mean, standard error, and 95% confidence half-width of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStats {
    pub mean: f64,
    /// Sample standard deviation (n-1 denominator) divided by sqrt(n); 0 for n = 1.
    pub se: f64,
    /// 1.96 * se.
    pub ci_half: f64,
    pub count: usize,
}

pub fn summarize(samples: &[f64]) -> Result<SummaryStats, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let se = if n == 1 {
        0.0
    } else {
        let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    };
    Ok(SummaryStats {
        mean,
        se,
        ci_half: 1.96 * se,
        count: n,
    })
}

/// Ordinary least squares y = intercept + slope*x, returning (intercept, slope, r2).
///
/// r2 is defined as 1 when the response is constant (the fit is exact).
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(StatsError::TooFewPoints(x.len()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(u, v)| (u - mx) * (v - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(u, v)| {
            let e = v - (intercept + slope * u);
            e * e
        })
        .sum();
    let r2 = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok((intercept, slope, r2))
}

/// Runs `reps` independent replications in parallel and collects results in
/// replication order, so aggregation does not depend on scheduling.
pub fn replicate<T, F>(reps: u64, master_seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, rand_chacha::ChaCha8Rng) -> T + Sync,
{
    use rayon::prelude::*;
    (0..reps)
        .into_par_iter()
        .map(|i| f(i, crate::rng::child_rng(master_seed, i)))
        .collect()
}
