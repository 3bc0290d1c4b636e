//! Confusion-matrix accounting and the FNP / FDP / FM-index metrics.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// The true signal set `I₁` for a problem of dimension `m`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    signal_indices: Vec<usize>,
    m: usize,
}

impl GroundTruth {
    /// Requires `0 < s < m`, indices in range and distinct.
    pub fn new(mut signal_indices: Vec<usize>, m: usize) -> Result<Self> {
        signal_indices.sort_unstable();
        let before = signal_indices.len();
        signal_indices.dedup();
        if signal_indices.len() != before {
            return domain("signal indices contain duplicates");
        }
        if let Some(&last) = signal_indices.last() {
            if last >= m {
                return domain(format!("signal index {last} out of range for m = {m}"));
            }
        }
        let s = signal_indices.len();
        if s == 0 || s >= m {
            return domain(format!("need 0 < s < m, got s = {s}, m = {m}"));
        }
        Ok(Self { signal_indices, m })
    }

    pub fn signal_indices(&self) -> &[usize] {
        &self.signal_indices
    }

    pub fn s(&self) -> usize {
        self.signal_indices.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.m];
        for &j in &self.signal_indices {
            mask[j] = true;
        }
        mask
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub r: usize,
    pub m: usize,
}

impl ClassificationCounts {
    pub fn s(&self) -> usize {
        self.tp + self.fn_
    }
}

/// Count the selection against the truth by exact set intersection.
pub fn classify(selected: &[usize], truth: &GroundTruth, m: usize) -> Result<ClassificationCounts> {
    if truth.m() != m {
        return domain(format!("ground truth is for m = {}, selection for m = {m}", truth.m()));
    }
    classify_mask(selected, &truth.mask())
}

/// [`classify`] against a precomputed signal mask; duplicate selections count once.
pub fn classify_mask(selected: &[usize], is_signal: &[bool]) -> Result<ClassificationCounts> {
    let m = is_signal.len();
    let mut picked = vec![false; m];
    for &j in selected {
        if j >= m {
            return domain(format!("selected index {j} out of range for m = {m}"));
        }
        picked[j] = true;
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&sel, &sig) in picked.iter().zip(is_signal) {
        match (sel, sig) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(ClassificationCounts { tp, fp, fn_, tn, r: tp + fp, m })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub fnp: f64,
    pub fdp: f64,
    pub fm_index: f64,
}

/// FNP = FN/s, FDP = FP/R (0 when nothing is selected), FM = √((1−FNP)(1−FDP)).
pub fn metrics(counts: &ClassificationCounts) -> Result<Metrics> {
    let s = counts.s();
    if s == 0 {
        return domain("FNP is undefined when there are no signals (s = 0)");
    }
    let fnp = counts.fn_ as f64 / s as f64;
    let fdp = if counts.r == 0 { 0.0 } else { counts.fp as f64 / counts.r as f64 };
    Ok(Metrics { fnp, fdp, fm_index: fm_index(fnp, fdp) })
}

pub fn fm_index(fnp: f64, fdp: f64) -> f64 {
    ((1.0 - fnp) * (1.0 - fdp)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_counted_example() {
        let truth = GroundTruth::new(vec![0, 2], 5).unwrap();
        let c = classify(&[0, 1], &truth, 5).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_, c.tn, c.r, c.m), (1, 1, 1, 2, 2, 5));
    }

    #[test]
    fn empty_and_full_selection() {
        let truth = GroundTruth::new(vec![1, 3, 4], 7).unwrap();
        let c = classify(&[], &truth, 7).unwrap();
        assert_eq!((c.fn_, c.fp), (3, 0));
        let all: Vec<usize> = (0..7).collect();
        let c = classify(&all, &truth, 7).unwrap();
        assert_eq!((c.tp, c.fp), (3, 4));
        let m = metrics(&c).unwrap();
        assert_eq!(m.fnp, 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(GroundTruth::new(vec![], 5).is_err());
        assert!(GroundTruth::new(vec![0, 1, 2, 3, 4], 5).is_err());
        assert!(GroundTruth::new(vec![5], 5).is_err());
        assert!(GroundTruth::new(vec![1, 1], 5).is_err());
        let truth = GroundTruth::new(vec![0], 5).unwrap();
        assert!(classify(&[5], &truth, 5).is_err());
        assert!(classify(&[0], &truth, 6).is_err());
        let none = ClassificationCounts { tp: 0, fp: 2, fn_: 0, tn: 3, r: 2, m: 5 };
        assert!(metrics(&none).is_err());
    }

    #[test]
    fn metric_examples() {
        let perfect = ClassificationCounts { tp: 4, fp: 0, fn_: 0, tn: 6, r: 4, m: 10 };
        let m = metrics(&perfect).unwrap();
        assert_eq!((m.fnp, m.fdp, m.fm_index), (0.0, 0.0, 1.0));
        assert!((fm_index(0.2, 0.2) - 0.8).abs() < 1e-15);
        assert!((fm_index(0.201, 0.576) - 0.5820).abs() < 1e-4);
        let nothing = ClassificationCounts { tp: 0, fp: 0, fn_: 4, tn: 6, r: 0, m: 10 };
        let m = metrics(&nothing).unwrap();
        assert_eq!((m.fnp, m.fdp, m.fm_index), (1.0, 0.0, 0.0));
    }

    proptest! {
        #[test]
        fn counts_and_fm_identity_hold(
            m in 2usize..80,
            seed_sig in prop::collection::vec(any::<bool>(), 80),
            seed_sel in prop::collection::vec(any::<bool>(), 80),
        ) {
            let signals: Vec<usize> = (0..m).filter(|&j| seed_sig[j]).collect();
            prop_assume!(!signals.is_empty() && signals.len() < m);
            let truth = GroundTruth::new(signals, m).unwrap();
            let selected: Vec<usize> = (0..m).filter(|&j| seed_sel[j]).collect();
            let c = classify(&selected, &truth, m).unwrap();
            let s = truth.s();
            prop_assert_eq!(c.tp + c.fn_, s);
            prop_assert_eq!(c.fp + c.tn, m - s);
            prop_assert_eq!(c.r, c.tp + c.fp);
            prop_assert_eq!(c.r, selected.len());
            let mt = metrics(&c).unwrap();
            prop_assert!((mt.fm_index.powi(2) - (1.0 - mt.fnp) * (1.0 - mt.fdp)).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&mt.fnp) && (0.0..=1.0).contains(&mt.fdp));
        }
    }
}
