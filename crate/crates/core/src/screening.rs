//! False negative control screening and the multiple-testing baselines.
//!
//! Statistics are ranked from most to least significant and the FNP estimate
//! `max{1 − j/s + (m − s) p_(j)/s, 0}` is evaluated rank by rank. FNC
//! screening selects the top `k`, where `k` is the first rank at which the
//! estimate drops below β. This corresponds to taking the supremum threshold
//! with estimated FNP below β. The "select ranks 1..k−1" reading of the
//! while-loop formulation would stop one rank short of that threshold and is
//! not used.
//!
//! Two-sided problems double the null tail inside the p-value (`2Φ̄(|z|)`), so
//! the one-sided formula applies unchanged to those p-values.

use serde::{Deserialize, Serialize};

use crate::calibration::BoundingSequences;
use crate::error::{domain, FncError, Result};
use crate::normal::{normal_isf, normal_sf};
use crate::proportion::{estimate_proportion, ProportionEstimate};
use crate::statistic::{Ranked, Sidedness, StatisticVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Fnc,
    Bh,
    Bonferroni,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SSource {
    Known,
    Estimated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Original indices of the selected statistics, most significant first.
    pub selected_indices: Vec<usize>,
    pub k: usize,
    /// Number of top ranks selected (equal to `k`).
    pub threshold_rank: usize,
    /// z-scale midpoint between the last selected and first unselected statistic;
    /// `+∞` when nothing is selected and `−∞` when everything is.
    pub threshold_z: f64,
    /// FNP estimate at rank `k` (FNC only).
    pub fnp_hat_at_k: Option<f64>,
    /// β for FNC, α for the baselines.
    pub level: f64,
    pub s_used: Option<usize>,
    pub s_source: Option<SSource>,
    pub method: Method,
    /// Set when an estimated `ŝ >= m` had to be reduced to `m − 1`.
    #[serde(default)]
    pub s_clipped: bool,
}

/// `max{1 − j/s + (m − s) p/s, 0}`; rank 0 (nothing selected) gives 1.
pub fn fnp_hat(j: usize, p_at_j: f64, s: usize, m: usize) -> Result<f64> {
    if s == 0 || s >= m {
        return domain(format!("FNP estimate needs 1 <= s < m, got s = {s}, m = {m}"));
    }
    if j > m {
        return domain(format!("rank {j} exceeds m = {m}"));
    }
    if j == 0 {
        return Ok(1.0);
    }
    Ok(fnp_hat_unchecked(j, p_at_j, s as f64, m as f64))
}

#[inline]
fn fnp_hat_unchecked(j: usize, p: f64, s: f64, m: f64) -> f64 {
    (1.0 - j as f64 / s + (m - s) * p / s).max(0.0)
}

/// Threshold form: `max{1 − R(t)/s + c(m − s)Φ̄(t)/s, 0}` with `c = 2` and
/// `R(t) = #{|z| > t}` for two-sided statistics.
pub fn fnp_hat_at_threshold(z: &StatisticVector, t: f64, s: usize) -> Result<f64> {
    let m = z.len();
    if s == 0 || s >= m {
        return domain(format!("FNP estimate needs 1 <= s < m, got s = {s}, m = {m}"));
    }
    let (r, tail) = match z.sidedness() {
        Sidedness::OneSided => (z.values().iter().filter(|&&x| x > t).count(), normal_sf(t)),
        Sidedness::TwoSided => (z.values().iter().filter(|&&x| x.abs() > t).count(), 2.0 * normal_sf(t)),
    };
    let (s, m) = (s as f64, m as f64);
    Ok((1.0 - r as f64 / s + (m - s) * tail / s).max(0.0))
}

/// First rank `k` in `1..=m` with `fnp_hat(k) < β`; `p_sorted` ascending.
pub fn fnc_rank(p_sorted: &[f64], s: usize, beta: f64) -> Result<(usize, f64)> {
    let m = p_sorted.len();
    check_level("beta", beta)?;
    if s == 0 || s >= m {
        return domain(format!("FNC screening needs 1 <= s < m, got s = {s}, m = {m}"));
    }
    let (sf, mf) = (s as f64, m as f64);
    for (idx, &p) in p_sorted.iter().enumerate() {
        let value = fnp_hat_unchecked(idx + 1, p, sf, mf);
        if value < beta {
            return Ok((idx + 1, value));
        }
    }
    // fnp_hat(m) <= max{(m − s)(p_(m) − 1)/s, 0} = 0 < β, so the scan always stops.
    unreachable!("FNP estimate at full selection is zero")
}

/// FNC screening with a given number of signals.
pub fn fnc_screen(stats: &StatisticVector, s: usize, beta: f64, s_source: SSource) -> Result<SelectionResult> {
    let ranked = stats.ranked()?;
    fnc_screen_ranked(&ranked, stats.sidedness(), s, beta, s_source)
}

pub(crate) fn fnc_screen_ranked(
    ranked: &Ranked,
    sidedness: Sidedness,
    s: usize,
    beta: f64,
    s_source: SSource,
) -> Result<SelectionResult> {
    let (k, value) = fnc_rank(&ranked.p_sorted, s, beta)?;
    Ok(SelectionResult {
        selected_indices: ranked.order[..k].to_vec(),
        k,
        threshold_rank: k,
        threshold_z: threshold_z(&ranked.p_sorted, k, sidedness),
        fnp_hat_at_k: Some(value),
        level: beta,
        s_used: Some(s),
        s_source: Some(s_source),
        method: Method::Fnc,
        s_clipped: false,
    })
}

/// FNC screening with `ŝ = round(m π̂)` from calibrated bounds.
///
/// Returns [`FncError::NoDetectableSignal`] when `π̂ = 0`. An `ŝ >= m` is
/// reduced to `m − 1` and flagged in `s_clipped`.
pub fn fnc_screen_estimated(
    stats: &StatisticVector,
    bounds: &BoundingSequences,
    beta: f64,
) -> Result<(SelectionResult, ProportionEstimate)> {
    check_level("beta", beta)?;
    let estimate = estimate_proportion(stats, bounds)?;
    let ranked = stats.ranked()?;
    let result = screen_with_estimate(&ranked, stats.sidedness(), &estimate, beta)?;
    Ok((result, estimate))
}

pub(crate) fn screen_with_estimate(
    ranked: &Ranked,
    sidedness: Sidedness,
    estimate: &ProportionEstimate,
    beta: f64,
) -> Result<SelectionResult> {
    if !estimate.detects_signal() {
        return Err(FncError::NoDetectableSignal);
    }
    let m = ranked.len();
    let clipped = estimate.s_hat >= m;
    let s = estimate.s_hat.min(m - 1);
    let mut result = fnc_screen_ranked(ranked, sidedness, s, beta, SSource::Estimated)?;
    result.s_clipped = clipped;
    Ok(result)
}

/// Benjamini–Hochberg step-up at level α.
pub fn bh_fdr(stats: &StatisticVector, alpha: f64) -> Result<SelectionResult> {
    check_level("alpha", alpha)?;
    let ranked = stats.ranked()?;
    Ok(bh_ranked(&ranked, stats.sidedness(), alpha))
}

pub(crate) fn bh_ranked(ranked: &Ranked, sidedness: Sidedness, alpha: f64) -> SelectionResult {
    let m = ranked.len() as f64;
    let k = ranked
        .p_sorted
        .iter()
        .enumerate()
        .rev()
        .find(|(idx, &p)| p <= (idx + 1) as f64 * alpha / m)
        .map_or(0, |(idx, _)| idx + 1);
    baseline_result(ranked, sidedness, k, alpha, Method::Bh)
}

/// Bonferroni: select every `p_j <= α / m_eff`.
pub fn bonferroni(stats: &StatisticVector, alpha: f64, m_eff: usize) -> Result<SelectionResult> {
    check_level("alpha", alpha)?;
    if m_eff == 0 {
        return domain("effective number of tests must be at least 1");
    }
    let ranked = stats.ranked()?;
    Ok(bonferroni_ranked(&ranked, stats.sidedness(), alpha, m_eff))
}

pub(crate) fn bonferroni_ranked(ranked: &Ranked, sidedness: Sidedness, alpha: f64, m_eff: usize) -> SelectionResult {
    let cutoff = alpha / m_eff as f64;
    let k = ranked.p_sorted.partition_point(|&p| p <= cutoff);
    baseline_result(ranked, sidedness, k, alpha, Method::Bonferroni)
}

fn baseline_result(ranked: &Ranked, sidedness: Sidedness, k: usize, level: f64, method: Method) -> SelectionResult {
    SelectionResult {
        selected_indices: ranked.order[..k].to_vec(),
        k,
        threshold_rank: k,
        threshold_z: threshold_z(&ranked.p_sorted, k, sidedness),
        fnp_hat_at_k: None,
        level,
        s_used: None,
        s_source: None,
        method,
        s_clipped: false,
    }
}

fn check_level(name: &str, level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return domain(format!("{name} must lie in the open interval (0, 1), got {level}"));
    }
    Ok(())
}

fn threshold_z(p_sorted: &[f64], k: usize, sidedness: Sidedness) -> f64 {
    let m = p_sorted.len();
    if k == 0 {
        return f64::INFINITY;
    }
    if k == m {
        return f64::NEG_INFINITY;
    }
    let to_z = |p: f64| {
        let tail = match sidedness {
            Sidedness::OneSided => p,
            Sidedness::TwoSided => p / 2.0,
        };
        if tail >= 1.0 {
            f64::NEG_INFINITY
        } else {
            normal_isf(tail).unwrap_or(f64::NAN)
        }
    };
    0.5 * (to_z(p_sorted[k - 1]) + to_z(p_sorted[k]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pv(values: &[f64]) -> StatisticVector {
        StatisticVector::p(values.to_vec(), Sidedness::OneSided).unwrap()
    }

    #[test]
    fn fnp_hat_examples() {
        assert_eq!(fnp_hat(0, 0.3, 2, 5).unwrap(), 1.0);
        assert!(fnp_hat(3, 1e-300, 3, 10).unwrap().abs() < 1e-12);
        assert!((fnp_hat(1, 0.001, 2, 5).unwrap() - 0.5015).abs() < 1e-12);
        assert_eq!(fnp_hat(2, 1.0, 1, 2).unwrap(), 0.0);
        assert!(fnp_hat(1, 0.1, 5, 5).is_err());
        assert!(fnp_hat(1, 0.1, 0, 5).is_err());
    }

    #[test]
    fn worked_five_value_example() {
        let p = pv(&[0.001, 0.01, 0.2, 0.5, 0.9]);
        let r = fnc_screen(&p, 2, 0.5, SSource::Known).unwrap();
        assert_eq!(r.k, 2);
        assert_eq!(r.selected_indices, vec![0, 1]);
        assert!((r.fnp_hat_at_k.unwrap() - 0.015).abs() < 1e-12);

        let r = fnc_screen(&p, 2, 0.6, SSource::Known).unwrap();
        assert_eq!(r.k, 1);
    }

    #[test]
    fn selects_everything_when_forced() {
        let p = pv(&[1.0, 1.0]);
        let r = fnc_screen(&p, 1, 0.999, SSource::Known).unwrap();
        assert_eq!(r.k, 2);
        assert_eq!(r.threshold_z, f64::NEG_INFINITY);
    }

    #[test]
    fn fnc_rejects_bad_parameters() {
        let p = pv(&[0.1, 0.2, 0.3]);
        assert!(fnc_screen(&p, 1, 1.5, SSource::Known).is_err());
        assert!(fnc_screen(&p, 1, 0.0, SSource::Known).is_err());
        assert!(fnc_screen(&p, 3, 0.2, SSource::Known).is_err());
    }

    #[test]
    fn refuses_when_no_signal_detected() {
        let m = 30;
        let p: Vec<f64> = (1..=m).map(|j| j as f64 / m as f64).collect();
        let bounds = BoundingSequences::manual(m, 0.5, 0.5).unwrap();
        assert!(matches!(fnc_screen_estimated(&pv(&p), &bounds, 0.2), Err(FncError::NoDetectableSignal)));
    }

    #[test]
    fn estimated_s_is_clipped_below_m() {
        let p = pv(&[1e-9, 2e-9, 3e-9, 4e-9, 0.9]);
        let bounds = BoundingSequences::manual(5, 0.0, 0.0).unwrap();
        let (r, est) = fnc_screen_estimated(&p, &bounds, 0.2).unwrap();
        assert!(est.s_hat <= 4);
        assert_eq!(r.s_source, Some(SSource::Estimated));

        let p = pv(&[1e-9, 2e-9, 3e-9]);
        let bounds = BoundingSequences::manual(3, 0.0, 0.0).unwrap();
        let (r, est) = fnc_screen_estimated(&p, &bounds, 0.2).unwrap();
        // π̂ ≈ 2/3 gives ŝ = 2 < m here; exercise the clip directly.
        assert_eq!(est.s_hat, 2);
        assert!(!r.s_clipped);
        let forced = ProportionEstimate { s_hat: 3, ..est };
        let r = screen_with_estimate(&p.ranked().unwrap(), Sidedness::OneSided, &forced, 0.2).unwrap();
        assert!(r.s_clipped);
        assert_eq!(r.s_used, Some(2));
    }

    #[test]
    fn bh_examples() {
        let r = bh_fdr(&pv(&[0.001, 0.01, 0.04, 0.5]), 0.05).unwrap();
        assert_eq!(r.k, 2);
        assert_eq!(r.selected_indices, vec![0, 1]);
        assert_eq!(bh_fdr(&pv(&[1.0; 6]), 0.05).unwrap().k, 0);
        assert_eq!(bh_fdr(&pv(&[1e-12; 6]), 0.05).unwrap().k, 6);
        // Step-up: a later rank can rescue earlier failures.
        assert_eq!(bh_fdr(&pv(&[0.02, 0.03, 0.035, 0.04]), 0.05).unwrap().k, 4);
        assert_eq!(bh_fdr(&pv(&[0.02, 0.03, 0.035, 0.04]), 0.05).unwrap().threshold_z, f64::NEG_INFINITY);
    }

    #[test]
    fn bonferroni_examples() {
        let r = bonferroni(&pv(&[0.009, 0.011, 0.5]), 0.05, 5).unwrap();
        assert_eq!(r.selected_indices, vec![0]);
        let r = bonferroni(&pv(&[0.04, 0.06]), 0.05, 1).unwrap();
        assert_eq!(r.selected_indices, vec![0]);
        let r = bonferroni(&pv(&[3e-4, 0.5]), 0.05, 149).unwrap();
        assert_eq!(r.k, 1);
        assert!(bonferroni(&pv(&[0.1, 0.2]), 0.05, 0).is_err());
    }

    #[test]
    fn threshold_midpoint() {
        let z = StatisticVector::z(vec![3.0, 1.0, 2.0], Sidedness::OneSided).unwrap();
        let r = bonferroni(&z, 0.05, 3).unwrap();
        assert_eq!(r.k, 1);
        assert!((r.threshold_z - 2.5).abs() < 1e-9);
        let none = bonferroni(&z, 1e-9, 3).unwrap();
        assert_eq!(none.threshold_z, f64::INFINITY);
    }

    #[test]
    fn threshold_form_matches_rank_form_between_statistics() {
        let z = StatisticVector::z(vec![4.0, 3.0, 0.5, -0.2, 1.5, 0.1], Sidedness::OneSided).unwrap();
        let ranked = z.ranked().unwrap();
        // At t = z_(2), R(t) = 1 and Φ̄(t) = p_(2).
        let t = 3.0;
        let by_threshold = fnp_hat_at_threshold(&z, t, 2).unwrap();
        let by_rank = fnp_hat(1, ranked.p_sorted[1], 2, 6).unwrap();
        assert!((by_threshold - by_rank).abs() < 1e-12);
    }

    fn brute_force_k(p_sorted: &[f64], s: usize, beta: f64) -> usize {
        let m = p_sorted.len();
        (0..=m)
            .find(|&j| {
                let v = if j == 0 { 1.0 } else { (1.0 - j as f64 / s as f64 + (m - s) as f64 * p_sorted[j - 1] / s as f64).max(0.0) };
                v < beta
            })
            .unwrap()
    }

    proptest! {
        #[test]
        fn fnc_matches_exhaustive_scan(p in prop::collection::vec(1e-6f64..=1.0, 2..40), s_frac in 0.0f64..1.0, beta in 0.01f64..0.99) {
            let m = p.len();
            let s = 1 + ((m - 1) as f64 * s_frac) as usize % (m - 1);
            let stats = pv(&p);
            let r = fnc_screen(&stats, s, beta, SSource::Known).unwrap();
            let mut sorted = p.clone();
            sorted.sort_by(|a, b| a.total_cmp(b));
            prop_assert_eq!(r.k, brute_force_k(&sorted, s, beta));
            prop_assert_eq!(r.selected_indices.len(), r.k);
        }

        #[test]
        fn bh_selects_the_smallest_pvalues(p in prop::collection::vec(1e-6f64..=1.0, 2..40), alpha in 0.01f64..0.5) {
            let stats = pv(&p);
            let r = bh_fdr(&stats, alpha).unwrap();
            let worst_selected = r.selected_indices.iter().map(|&j| p[j]).fold(0.0, f64::max);
            let best_unselected = (0..p.len()).filter(|j| !r.selected_indices.contains(j)).map(|j| p[j]).fold(1.0, f64::min);
            prop_assert!(r.k == 0 || worst_selected <= best_unselected);
        }
    }
}
