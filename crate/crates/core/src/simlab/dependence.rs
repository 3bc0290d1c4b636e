//! Sparsity and dependence calibration: η, the signal-intensity lower bound and
//! the phase boundary. All logarithms are natural.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::simlab::covariance::{sigma_l1_norm, CovarianceModel};

/// η with `‖Σ‖₁/m² = m^(−η)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eta {
    /// η clipped to `[0, 1]`.
    pub value: f64,
    pub unclipped: f64,
    pub l1_norm: f64,
}

impl Eta {
    pub fn was_clipped(&self) -> bool {
        self.value != self.unclipped
    }
}

pub fn eta(model: &CovarianceModel) -> Result<Eta> {
    let l1 = sigma_l1_norm(model)?;
    Ok(eta_from_l1(l1, model.m))
}

pub fn eta_from_l1(l1_norm: f64, m: usize) -> Eta {
    let m = m as f64;
    let unclipped = -(l1_norm / (m * m)).ln() / m.ln();
    Eta { value: unclipped.clamp(0.0, 1.0), unclipped, l1_norm }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuBounds {
    pub mu1: f64,
    pub mu2: f64,
    pub mu_min: f64,
}

/// `μ₁ = √(2γ ln m)`, `μ₂ = √((4γ − 2η)₊ ln m + 4 ln ln ln m)`, `μ_min = min(μ₁, μ₂)`.
pub fn mu_bounds(m: usize, gamma: f64, eta: f64) -> Result<MuBounds> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return domain(format!("gamma must lie in (0, 1), got {gamma}"));
    }
    if !(0.0..=1.0).contains(&eta) {
        return domain(format!("eta must lie in [0, 1], got {eta}"));
    }
    let log_m = (m as f64).ln();
    let log3 = log_m.ln().ln();
    if log3.is_nan() || log3 <= 0.0 {
        return domain(format!("ln ln ln m must be positive (m > e^e ≈ 15.15), got m = {m}"));
    }
    let mu1 = (2.0 * gamma * log_m).sqrt();
    let mu2 = ((4.0 * gamma - 2.0 * eta).max(0.0) * log_m + 4.0 * log3).sqrt();
    Ok(MuBounds { mu1, mu2, mu_min: mu1.min(mu2) })
}

/// Lower edge of the FNC-retainable region in the (γ, r) plane: `min(γ, 2γ − η)`.
/// Negative values mean any `r > 0` lies above the boundary.
pub fn phase_boundary(gamma: f64, eta: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return domain(format!("gamma must lie in (0, 1), got {gamma}"));
    }
    if !(0.0..=1.0).contains(&eta) {
        return domain(format!("eta must lie in [0, 1], got {eta}"));
    }
    Ok(gamma.min(2.0 * gamma - eta))
}

/// `(γ, r)` points of the boundary on an evenly spaced γ grid inside (0, 1).
pub fn phase_polyline(eta: f64, points: usize) -> Result<Vec<(f64, f64)>> {
    let points = points.max(2);
    (1..=points)
        .map(|i| {
            let gamma = i as f64 / (points + 1) as f64;
            phase_boundary(gamma, eta).map(|r| (gamma, r))
        })
        .collect()
}

/// Sparsity `π = m^(−γ)` and signal intensity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsitySpec {
    pub gamma: f64,
    pub intensity: Intensity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Intensity {
    Common(f64),
    PerSignal(Vec<f64>),
}

impl SparsitySpec {
    pub fn new(gamma: f64, intensity: Intensity) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return domain(format!("gamma must lie in (0, 1), got {gamma}"));
        }
        let ok = match &intensity {
            Intensity::Common(a) => a.is_finite() && *a >= 0.0,
            Intensity::PerSignal(a) => a.iter().all(|x| x.is_finite() && *x >= 0.0),
        };
        if !ok {
            return domain("signal intensities must be finite and non-negative");
        }
        Ok(Self { gamma, intensity })
    }

    /// `s = round(m^(1−γ))`, required to satisfy `1 <= s < m`.
    pub fn signal_count(&self, m: usize) -> Result<usize> {
        let s = signal_count(m, self.gamma);
        if s == 0 || s >= m {
            return domain(format!("gamma = {} gives s = {s} for m = {m}", self.gamma));
        }
        if let Intensity::PerSignal(a) = &self.intensity {
            if a.len() != s {
                return domain(format!("{} per-signal intensities for s = {s}", a.len()));
            }
        }
        Ok(s)
    }

    /// Intensity of the `i`-th signal.
    pub fn amplitude(&self, i: usize) -> f64 {
        match &self.intensity {
            Intensity::Common(a) => *a,
            Intensity::PerSignal(a) => a[i],
        }
    }
}

pub fn signal_count(m: usize, gamma: f64) -> usize {
    (m as f64).powf(1.0 - gamma).round() as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round2(x: f64) -> f64 {
        (x * 100.0).round() / 100.0
    }

    #[test]
    fn eta_of_reference_models() {
        let ar = eta(&CovarianceModel::autoregressive(2000, 0.2).unwrap()).unwrap();
        assert!((ar.value - 0.95).abs() < 0.005, "{}", ar.value);
        let block = eta(&CovarianceModel::block(2000, 40, 0.5).unwrap()).unwrap();
        assert!((block.value - 0.60).abs() < 0.005, "{}", block.value);
        let identity = eta(&CovarianceModel::identity(1234).unwrap()).unwrap();
        assert!((identity.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eta_extremes() {
        let ones = CovarianceModel::explicit(vec![vec![1.0; 4]; 4]).unwrap();
        let e = eta(&ones).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(!e.was_clipped() || e.unclipped.abs() < 1e-15);
        let clipped = eta_from_l1(2.0, 10);
        assert!(clipped.was_clipped());
        assert_eq!(clipped.value, 1.0);
    }

    #[test]
    fn mu_bounds_reproduce_calibration_rows() {
        let b = mu_bounds(2000, 0.3, 0.95).unwrap();
        assert_eq!((round2(b.mu1), round2(b.mu2), round2(b.mu_min)), (2.14, 1.68, 1.68));
        let b = mu_bounds(2000, 0.3, 0.60).unwrap();
        assert_eq!((round2(b.mu1), round2(b.mu2)), (2.14, 1.68));
        let b = mu_bounds(10000, 0.3, 0.96).unwrap();
        assert_eq!((round2(b.mu1), round2(b.mu2)), (2.35, 1.79));
        // At η = 0.22 exactly μ₂ = 2.9335.
        let b = mu_bounds(2000, 0.3, 0.22).unwrap();
        assert!((b.mu2 - 2.933_50).abs() < 1e-4, "{}", b.mu2);
    }

    #[test]
    fn mu_bounds_domain() {
        assert!(mu_bounds(15, 0.3, 0.5).is_err());
        assert!(mu_bounds(16, 0.3, 0.5).is_ok());
        assert!(mu_bounds(2000, 0.0, 0.5).is_err());
        assert!(mu_bounds(2000, 0.3, 1.5).is_err());
    }

    #[test]
    fn phase_boundary_arithmetic() {
        assert!((phase_boundary(0.7, 1.0).unwrap() - 0.4).abs() < 1e-15);
        assert!(phase_boundary(0.3, 0.6).unwrap().abs() < 1e-15);
        assert!((phase_boundary(0.3, 0.95).unwrap() + 0.35).abs() < 1e-15);
        for (g, r) in phase_polyline(1.0, 19).unwrap() {
            assert!((r - g.min(2.0 * g - 1.0)).abs() < 1e-15);
        }
    }

    #[test]
    fn signal_counts() {
        assert_eq!(signal_count(2000, 0.3), 205);
        assert_eq!(signal_count(2000, 0.5), 45);
        let spec = SparsitySpec::new(0.3, Intensity::PerSignal(vec![1.0; 3])).unwrap();
        assert!(spec.signal_count(2000).is_err());
    }
}
