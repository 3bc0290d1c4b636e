//! Signal-proportion estimation under dependence.
//!
//! Both forms take the larger of two estimates, one penalized by
//! `c_½ · δ^½` and one by `c_1 · δ`, and floor the result at zero. The
//! p-value form scans the interior order statistics and is the production
//! path. The discretized form scans the integer thresholds `1..=⌊√(5 ln m)⌋`.

use serde::{Deserialize, Serialize};

use crate::calibration::BoundingSequences;
use crate::error::{domain, Result};
use crate::normal::normal_sf;
use crate::statistic::{Scale, Sidedness, StatisticVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorVariant {
    PvalueForm,
    DiscretizedTForm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProportionEstimate {
    /// `max(pi_half, pi_one, 0)`.
    pub pi_hat: f64,
    pub pi_half: f64,
    pub pi_one: f64,
    /// 1-based rank (p-value form) or integer threshold `t` (discretized form)
    /// attaining the maximum.
    pub argmax_index: usize,
    pub variant: EstimatorVariant,
    /// `round(m · pi_hat)`, at least 1 whenever `pi_hat > 0`.
    pub s_hat: usize,
    /// Interior terms skipped because `p_(j) = 1`.
    pub skipped_terms: usize,
}

impl ProportionEstimate {
    pub fn detects_signal(&self) -> bool {
        self.pi_hat > 0.0
    }
}

/// `round(m π̂)` (half away from zero), floored at 1 when `π̂ > 0`.
pub fn s_hat(m: usize, pi_hat: f64) -> usize {
    let s = (m as f64 * pi_hat).round() as usize;
    if pi_hat > 0.0 {
        s.max(1)
    } else {
        s
    }
}

fn check_bounds(bounds: &BoundingSequences, m: usize) -> Result<()> {
    if bounds.m != m {
        return domain(format!("bounding sequences were calibrated for m = {}, data has m = {m}", bounds.m));
    }
    Ok(())
}

/// Proportion estimate from ascending p-values.
pub fn pi_hat_pvalue_form(p_sorted: &[f64], bounds: &BoundingSequences) -> Result<ProportionEstimate> {
    let m = p_sorted.len();
    if m < 3 {
        return domain(format!("need m >= 3 for an interior rank, got {m}"));
    }
    check_bounds(bounds, m)?;
    if p_sorted.windows(2).any(|w| w[0] > w[1]) {
        return domain("p-values must be sorted in ascending order");
    }
    let mf = m as f64;
    let mut pi_half = f64::NEG_INFINITY;
    let mut pi_one = f64::NEG_INFINITY;
    let mut best = (f64::NEG_INFINITY, 0usize);
    let mut skipped = 0;
    for (idx, &p) in p_sorted.iter().enumerate().take(m - 1).skip(1) {
        if p >= 1.0 {
            skipped += 1;
            continue;
        }
        let j = idx + 1;
        let gap = j as f64 / mf - p;
        let half = (gap - bounds.c_half * p.sqrt()) / (1.0 - p);
        let one = (gap - bounds.c_one * p) / (1.0 - p);
        pi_half = pi_half.max(half);
        pi_one = pi_one.max(one);
        let term = half.max(one);
        if term > best.0 {
            best = (term, j);
        }
    }
    let pi_hat = pi_half.max(pi_one).max(0.0);
    Ok(ProportionEstimate {
        pi_hat,
        pi_half,
        pi_one,
        argmax_index: best.1,
        variant: EstimatorVariant::PvalueForm,
        s_hat: s_hat(m, pi_hat),
        skipped_terms: skipped,
    })
}

/// Proportion estimate from any z- or p-scale statistics (ranks them first).
pub fn estimate_proportion(stats: &StatisticVector, bounds: &BoundingSequences) -> Result<ProportionEstimate> {
    let ranked = stats.ranked()?;
    pi_hat_pvalue_form(&ranked.p_sorted, bounds)
}

/// The integer threshold grid `[1, √(5 ln m)] ∩ ℕ`.
pub fn threshold_grid(m: usize) -> Result<Vec<u32>> {
    let upper = (5.0 * (m as f64).ln()).sqrt();
    if upper.is_nan() || upper < 1.0 {
        return domain(format!("threshold grid is empty for m = {m} (√(5 ln m) = {upper:.3} < 1)"));
    }
    Ok((1..=upper.floor() as u32).collect())
}

/// Discretized estimator over the integer threshold grid.
///
/// With `q(t)` the null tail probability of the statistic (`Φ̄(t)` one-sided,
/// `2Φ̄(t)` two-sided) and `R(t)` the count beyond `t` (`z > t`, or `|z| > t`),
/// each grid point contributes `(R(t)/m − q(t) − c·δ(q(t)))/(1 − q(t))`.
pub fn pi_hat_discretized(z: &StatisticVector, bounds: &BoundingSequences) -> Result<ProportionEstimate> {
    if z.scale() != Scale::Z {
        return domain(format!("discretized estimator expects z statistics, got {:?}", z.scale()));
    }
    let m = z.len();
    check_bounds(bounds, m)?;
    let grid = threshold_grid(m)?;
    let mf = m as f64;
    let mut pi_half = f64::NEG_INFINITY;
    let mut pi_one = f64::NEG_INFINITY;
    let mut best = (f64::NEG_INFINITY, 0usize);
    for &t in &grid {
        let t = t as f64;
        let (count, tail) = match z.sidedness() {
            Sidedness::OneSided => (z.values().iter().filter(|&&x| x > t).count(), normal_sf(t)),
            Sidedness::TwoSided => (z.values().iter().filter(|&&x| x.abs() > t).count(), 2.0 * normal_sf(t)),
        };
        let gap = count as f64 / mf - tail;
        let half = (gap - bounds.c_half * tail.sqrt()) / (1.0 - tail);
        let one = (gap - bounds.c_one * tail) / (1.0 - tail);
        pi_half = pi_half.max(half);
        pi_one = pi_one.max(one);
        if half.max(one) > best.0 {
            best = (half.max(one), t as usize);
        }
    }
    let pi_hat = pi_half.max(pi_one).max(0.0);
    Ok(ProportionEstimate {
        pi_hat,
        pi_half,
        pi_one,
        argmax_index: best.1,
        variant: EstimatorVariant::DiscretizedTForm,
        s_hat: s_hat(m, pi_hat),
        skipped_terms: 0,
    })
}
