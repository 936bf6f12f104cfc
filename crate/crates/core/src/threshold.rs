//! Data-driven threshold choice.
//!
//! For a candidate threshold the tail index is refitted, and each exceedance
//! is mapped to `U_t = exp(-v(X_t) L_t)`. Under a correctly specified Pareto
//! tail these are uniform on (0, 1]. The candidate whose PIT sample is
//! closest to uniform in the squared-rank sense wins.

use rayon::prelude::*;

use crate::data::{PredictorResponsePairs, TailSide};
use crate::error::{invalid, GarError, Result};
use crate::stats;
use crate::tail_index::{fit_tail_index, TailFit};

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSearchResult {
    pub side: TailSide,
    pub chosen: f64,
    /// Candidate thresholds in grid order.
    pub grid: Vec<f64>,
    /// `D_T` per candidate; `NaN` marks an inadmissible one.
    pub discrepancies: Vec<f64>,
    pub tail_sizes: Vec<usize>,
    /// Position of `chosen` in `grid`.
    pub chosen_index: usize,
    /// Tail fit at the chosen threshold.
    pub fit: TailFit,
}

/// Upper-tail grid 0.75, 0.775, ..., 0.975 and its mirror image for the
/// lower tail.
pub fn default_grid(side: TailSide) -> Vec<f64> {
    (0..10)
        .map(|k| {
            let p = 0.75 + 0.025 * k as f64;
            match side {
                TailSide::Upper => p,
                TailSide::Lower => 1.0 - p,
            }
        })
        .collect()
}

/// Smallest tail sample a candidate threshold may leave.
pub fn min_exceedances(dim_beta: usize) -> usize {
    30.max(5 * dim_beta)
}

/// PIT value of every exceedance under `fit`, in observation order.
pub fn pit_values(fit: &TailFit, pairs: &PredictorResponsePairs) -> Vec<f64> {
    pairs
        .y
        .iter()
        .enumerate()
        .filter_map(|(i, &y)| {
            let l = fit.log_ratio(y)?;
            let xb: f64 = pairs.x.row(i).iter().zip(&fit.beta).map(|(a, b)| a * b).sum();
            Some((-xb.exp() * l).exp())
        })
        .collect()
}

/// Mean squared gap between each PIT value and its empirical CDF `rank/T0`,
/// with tied values sharing their average rank.
pub fn discrepancy(u: &[f64]) -> Result<f64> {
    if u.is_empty() {
        return Err(invalid("pit values", "need at least one value"));
    }
    let mut sorted = u.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let n_f = n as f64;
    let mut total = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j+1 share their mean.
        let rank = (i + j) as f64 / 2.0 + 1.0;
        let gap = sorted[i] - rank / n_f;
        total += gap * gap * (j - i + 1) as f64;
        i = j + 1;
    }
    Ok(total / n_f)
}

struct Candidate {
    threshold: f64,
    tail_size: usize,
    outcome: Option<(f64, TailFit)>,
}

/// Evaluate every grid quantile as a threshold and keep the one with the
/// smallest discrepancy. Exact ties go to the larger tail sample.
pub fn select_threshold(
    pairs: &PredictorResponsePairs,
    side: TailSide,
    grid_quantiles: &[f64],
) -> Result<ThresholdSearchResult> {
    if grid_quantiles.is_empty() {
        return Err(invalid("grid", "need at least one candidate quantile"));
    }
    if let Some(p) = grid_quantiles.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
        return Err(invalid("grid", format!("quantile {p} is not inside (0, 1)")));
    }
    let median = stats::median(&pairs.y);
    let required = min_exceedances(pairs.dim_beta());

    let candidates: Vec<Candidate> = grid_quantiles
        .par_iter()
        .map(|&p| {
            let threshold = stats::empirical_quantile(&pairs.y, p);
            let tail_size = pairs.y.iter().filter(|&&y| side.exceeds(y, threshold)).count();
            let admissible = tail_size >= required && side.beyond_median(threshold, median);
            let outcome = admissible
                .then(|| {
                    let fit = fit_tail_index(pairs, side, threshold).ok()?;
                    let d = discrepancy(&pit_values(&fit, pairs)).ok()?;
                    Some((d, fit))
                })
                .flatten();
            Candidate {
                threshold,
                tail_size,
                outcome,
            }
        })
        .collect();

    let mut best: Option<usize> = None;
    for (k, c) in candidates.iter().enumerate() {
        let Some((d, _)) = &c.outcome else { continue };
        best = match best {
            None => Some(k),
            Some(b) => {
                let (db, _) = candidates[b].outcome.as_ref().unwrap();
                let tb = candidates[b].tail_size;
                if *d < *db || (*d == *db && c.tail_size > tb) {
                    Some(k)
                } else {
                    Some(b)
                }
            }
        };
    }
    let chosen_index = best.ok_or(GarError::NoAdmissibleThreshold)?;

    let grid = candidates.iter().map(|c| c.threshold).collect();
    let discrepancies = candidates
        .iter()
        .map(|c| c.outcome.as_ref().map_or(f64::NAN, |(d, _)| *d))
        .collect();
    let tail_sizes = candidates.iter().map(|c| c.tail_size).collect();
    let chosen = candidates[chosen_index].threshold;
    let fit = candidates
        .into_iter()
        .nth(chosen_index)
        .and_then(|c| c.outcome)
        .map(|(_, f)| f)
        .unwrap();
    Ok(ThresholdSearchResult {
        side,
        chosen,
        grid,
        discrepancies,
        tail_sizes,
        chosen_index,
        fit,
    })
}
