//! Bounding sequences for the proportion estimator, computed from ensembles of
//! null p-values.
//!
//! For each null set the largest normalized deviation of the order statistics
//! from their uniform expectation is recorded, once with a `√p` divisor and
//! once with `p`. The bounding constants are the `1 − 1/√(ln m)` empirical
//! quantiles of those maxima (nearest rank, no interpolation).

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, FncError, Result};
use crate::rng::{substream, DOMAIN_NULL_ENSEMBLE};
use crate::simlab::covariance::{build_covariance, CovarianceModel};
use crate::statistic::{z_to_p, Sidedness, P_FLOOR};

/// Default number of null sets.
pub const DEFAULT_N_SETS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum EnsembleProvenance {
    ParametricGaussian { model: String, seed: u64, sidedness: Sidedness },
    External { path: PathBuf },
}

/// `N >= 2` null p-value vectors of common length `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct NullEnsemble {
    sets: Vec<Vec<f64>>,
    m: usize,
    provenance: EnsembleProvenance,
}

impl NullEnsemble {
    pub fn new(sets: Vec<Vec<f64>>, provenance: EnsembleProvenance) -> Result<Self> {
        if sets.len() < 2 {
            return domain(format!("a null ensemble needs at least 2 sets, got {}", sets.len()));
        }
        let m = sets[0].len();
        for (a, set) in sets.iter().enumerate() {
            if set.len() != m {
                return domain(format!("set {a} has length {}, expected {m}", set.len()));
            }
            if let Some(j) = set.iter().position(|p| !(*p > 0.0 && *p <= 1.0)) {
                return domain(format!("set {a} entry {j} = {} is outside (0, 1]", set[j]));
            }
        }
        Ok(Self { sets, m, provenance })
    }

    pub fn sets(&self) -> &[Vec<f64>] {
        &self.sets
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n_sets(&self) -> usize {
        self.sets.len()
    }

    pub fn provenance(&self) -> &EnsembleProvenance {
        &self.provenance
    }

    /// Read the CSV form: one set per row; an optional `set_id,p_1,...,p_m`
    /// header means every row carries a leading set id.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let reader = std::io::BufReader::new(file);
        let mut sets = Vec::new();
        let mut with_id = false;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = i + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
            if sets.is_empty() && !with_id && fields[0].parse::<f64>().is_err() {
                with_id = true;
                continue;
            }
            let values = if with_id { &fields[1..] } else { &fields[..] };
            let row = values
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| FncError::Parse { line: line_no, msg: format!("not a number: {f:?}") })
                })
                .collect::<Result<Vec<f64>>>()?;
            if let Some(bad) = row.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
                return Err(FncError::Parse { line: line_no, msg: format!("p-value {bad} outside (0, 1]") });
            }
            sets.push(row);
        }
        Self::new(sets, EnsembleProvenance::External { path: path.to_path_buf() })
    }

    /// Write with a `set_id,p_1,...,p_m` header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "set_id")?;
        for j in 1..=self.m {
            write!(out, ",p_{j}")?;
        }
        writeln!(out)?;
        for (a, set) in self.sets.iter().enumerate() {
            write!(out, "{}", a + 1)?;
            for p in set {
                write!(out, ",{p:e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingSequences {
    pub m: usize,
    pub n_sets: usize,
    pub quantile_level: f64,
    /// Constant for `δ(t) = Φ̄(t)^½`.
    pub c_half: f64,
    /// Constant for `δ(t) = Φ̄(t)`.
    pub c_one: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl BoundingSequences {
    /// Constants supplied directly rather than calibrated.
    pub fn manual(m: usize, c_half: f64, c_one: f64) -> Result<Self> {
        if !(c_half >= 0.0 && c_one >= 0.0 && c_half.is_finite() && c_one.is_finite()) {
            return domain(format!("bounding constants must be finite and >= 0, got ({c_half}, {c_one})"));
        }
        Ok(Self { m, n_sets: 0, quantile_level: quantile_level(m), c_half, c_one, seed: None })
    }
}

/// `1 − 1/√(ln m)`.
pub fn quantile_level(m: usize) -> f64 {
    1.0 - 1.0 / (m as f64).ln().sqrt()
}

/// `(V_½, V_1)` over the strict interior ranks `1 < j < m` of an ascending sequence.
pub fn v_statistics(p_sorted: &[f64]) -> Result<(f64, f64)> {
    let m = p_sorted.len();
    if m < 3 {
        return domain(format!("need m >= 3 for an interior rank, got {m}"));
    }
    let mf = m as f64;
    let mut v_half = 0.0_f64;
    let mut v_one = 0.0_f64;
    for (idx, &p) in p_sorted.iter().enumerate().take(m - 1).skip(1) {
        let dev = ((idx + 1) as f64 / mf - p).abs();
        v_half = v_half.max(dev / p.sqrt());
        v_one = v_one.max(dev / p);
    }
    Ok((v_half, v_one))
}

/// Nearest-rank empirical quantile: the `ceil(q N)`-th smallest value.
pub fn nearest_rank_quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

/// Compute `c_½` and `c_1` from a null ensemble.
pub fn bounding_sequences(ensemble: &NullEnsemble) -> Result<BoundingSequences> {
    let stats = ensemble
        .sets()
        .par_iter()
        .map(|set| {
            let mut sorted = set.clone();
            sorted.sort_by(|a, b| a.total_cmp(b));
            v_statistics(&sorted)
        })
        .collect::<Result<Vec<_>>>()?;
    let (halves, ones): (Vec<f64>, Vec<f64>) = stats.into_iter().unzip();
    let m = ensemble.m();
    let level = quantile_level(m);
    let seed = match ensemble.provenance() {
        EnsembleProvenance::ParametricGaussian { seed, .. } => Some(*seed),
        EnsembleProvenance::External { .. } => None,
    };
    Ok(BoundingSequences {
        m,
        n_sets: ensemble.n_sets(),
        quantile_level: level,
        c_half: nearest_rank_quantile(&halves, level),
        c_one: nearest_rank_quantile(&ones, level),
        seed,
    })
}

/// Draw `n_sets` null vectors `N(0, Σ)` and convert them to p-values.
/// Set `a` uses its own stream keyed by `(seed, a)`.
pub fn simulate_null_ensemble(
    model: &CovarianceModel,
    n_sets: usize,
    seed: u64,
    sidedness: Sidedness,
) -> Result<NullEnsemble> {
    if n_sets < 2 {
        return domain(format!("n_sets must be at least 2, got {n_sets}"));
    }
    let sampler = build_covariance(model)?;
    let m = model.m;
    let sets = (0..n_sets)
        .into_par_iter()
        .map(|a| {
            let mut rng = substream(seed, DOMAIN_NULL_ENSEMBLE, a as u64);
            let mut z = vec![0.0; m];
            sampler.fill_noise(&mut rng, &mut z);
            z.iter().map(|&x| z_to_p(x, sidedness).max(P_FLOOR)).collect()
        })
        .collect();
    NullEnsemble::new(sets, EnsembleProvenance::ParametricGaussian { model: model.label(), seed, sidedness })
}

/// Simulate and reduce in one pass without keeping the ensemble in memory.
pub fn calibrate_model(
    model: &CovarianceModel,
    n_sets: usize,
    seed: u64,
    sidedness: Sidedness,
) -> Result<BoundingSequences> {
    if n_sets < 2 {
        return domain(format!("n_sets must be at least 2, got {n_sets}"));
    }
    let sampler = build_covariance(model)?;
    let m = model.m;
    if m < 3 {
        return domain(format!("need m >= 3 for an interior rank, got {m}"));
    }
    let stats = (0..n_sets)
        .into_par_iter()
        .map(|a| {
            let mut rng = substream(seed, DOMAIN_NULL_ENSEMBLE, a as u64);
            let mut z = vec![0.0; m];
            sampler.fill_noise(&mut rng, &mut z);
            let mut p: Vec<f64> = z.iter().map(|&x| z_to_p(x, sidedness).max(P_FLOOR)).collect();
            p.sort_by(|a, b| a.total_cmp(b));
            v_statistics(&p)
        })
        .collect::<Result<Vec<_>>>()?;
    let (halves, ones): (Vec<f64>, Vec<f64>) = stats.into_iter().unzip();
    let level = quantile_level(m);
    Ok(BoundingSequences {
        m,
        n_sets,
        quantile_level: level,
        c_half: nearest_rank_quantile(&halves, level),
        c_one: nearest_rank_quantile(&ones, level),
        seed: Some(seed),
    })
}
