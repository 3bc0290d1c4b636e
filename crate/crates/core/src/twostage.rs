//! Two-stage screening and confirmation on independent sample splits.
//!
//! Stage 1 runs FNC screening on the statistics from a fraction of the
//! samples. Stage 2 applies Bonferroni at level α over the survivors, using
//! statistics from the remaining samples. The one-stage baseline applies
//! Bonferroni over `m_eff` to the inverse-variance combination of both
//! splits, which has mean `A √(n_total / n_ref)` and the same correlation.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{calibrate_model, BoundingSequences};
use crate::error::{FncError, Result};
use crate::proportion::pi_hat_pvalue_form;
use crate::rng::{substream, DOMAIN_STAGE_ONE, DOMAIN_STAGE_TWO};
use crate::screening::{bonferroni_ranked, fnc_screen_ranked, screen_with_estimate, SSource};
use crate::simlab::covariance::{build_covariance, CovarianceModel, CovarianceSampler};
use crate::simlab::experiment::CalibrationSpec;
use crate::simlab::dependence::Intensity;
use crate::statistic::{z_to_p, Sidedness, StatisticVector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoStageConfig {
    pub m: usize,
    /// Signal positions; empty for the global null.
    pub signal_indices: Vec<usize>,
    /// Effect on the z-scale at `n_ref` samples, common or per signal.
    pub effect: Intensity,
    pub n_total: f64,
    pub n_ref: f64,
    #[serde(default = "default_split")]
    pub split_fraction: f64,
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Bonferroni divisor of the one-stage baseline; defaults to `m`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_eff: Option<usize>,
    pub n_reps: usize,
    pub seed: u64,
    /// Noise correlation within each stage; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<CovarianceModel>,
    #[serde(default)]
    pub sidedness: Sidedness,
    #[serde(default = "default_s_source")]
    pub s_source: SSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundingSequences>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationSpec>,
}

fn default_split() -> f64 {
    0.3
}

fn default_beta() -> f64 {
    0.1
}

fn default_s_source() -> SSource {
    SSource::Estimated
}

impl TwoStageConfig {
    /// Config with the default split, β and identity noise.
    pub fn new(m: usize, signal_indices: Vec<usize>, effect: Intensity, alpha: f64, n_reps: usize, seed: u64) -> Self {
        Self {
            m,
            signal_indices,
            effect,
            n_total: 1.0,
            n_ref: 1.0,
            split_fraction: default_split(),
            alpha,
            beta: default_beta(),
            m_eff: None,
            n_reps,
            seed,
            model: None,
            sidedness: Sidedness::OneSided,
            s_source: SSource::Estimated,
            bounds: None,
            calibration: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(FncError::Config(msg));
        if self.m < 3 {
            return bad(format!("m must be at least 3, got {}", self.m));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return bad(format!("split_fraction must lie in (0, 1), got {}", self.split_fraction));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {v}"));
            }
        }
        if !(self.n_total > 0.0 && self.n_ref > 0.0 && self.n_total.is_finite() && self.n_ref.is_finite()) {
            return bad("n_total and n_ref must be positive".into());
        }
        if self.n_reps == 0 {
            return bad("n_reps must be at least 1".into());
        }
        if self.m_eff == Some(0) {
            return bad("m_eff must be at least 1".into());
        }
        let mut seen = vec![false; self.m];
        for &j in &self.signal_indices {
            if j >= self.m || std::mem::replace(&mut seen[j], true) {
                return bad(format!("signal index {j} is out of range or repeated"));
            }
        }
        match &self.effect {
            Intensity::Common(a) if a.is_finite() => {}
            Intensity::PerSignal(a) if a.len() == self.signal_indices.len() && a.iter().all(|x| x.is_finite()) => {}
            _ => return bad("effect must be finite and match the number of signals".into()),
        }
        if let Some(model) = &self.model {
            if model.m != self.m {
                return bad(format!("model dimension {} differs from m = {}", model.m, self.m));
            }
            model.validate()?;
        }
        match self.s_source {
            SSource::Known => {
                let s = self.signal_indices.len();
                if s == 0 || s >= self.m {
                    return bad(format!("known-s screening needs 1 <= s < m, got s = {s}"));
                }
            }
            SSource::Estimated => {
                if self.bounds.is_none() && self.calibration.is_none() {
                    return bad("estimated-s screening needs bounding sequences or a calibration setting".into());
                }
                if let Some(b) = &self.bounds {
                    if b.m != self.m {
                        return bad(format!("bounds were computed for m = {}, not {}", b.m, self.m));
                    }
                }
            }
        }
        Ok(())
    }

    fn n_stage_one(&self) -> f64 {
        self.split_fraction * self.n_total
    }

    fn n_stage_two(&self) -> f64 {
        (1.0 - self.split_fraction) * self.n_total
    }

    fn effect_of(&self, i: usize) -> f64 {
        match &self.effect {
            Intensity::Common(a) => *a,
            Intensity::PerSignal(a) => a[i],
        }
    }

    /// Stage mean vector for `n` samples.
    fn means(&self, n: f64) -> Vec<f64> {
        let scale = (n / self.n_ref).sqrt();
        let mut mu = vec![0.0; self.m];
        for (i, &j) in self.signal_indices.iter().enumerate() {
            mu[j] = self.effect_of(i) * scale;
        }
        mu
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoStageRecord {
    pub rep: usize,
    pub stage_one_selected: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_hat: Option<usize>,
    /// Stage 1 refused because `π̂ = 0`.
    pub refused: bool,
    pub stage_two_significant: Vec<usize>,
    /// Stage-2 p-values of the survivors, in `stage_one_selected` order.
    pub stage_two_pvalues: Vec<f64>,
    pub one_stage_significant: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignSummary {
    /// Fraction of replications with at least one null variant declared significant.
    pub fwer: f64,
    /// Mean fraction of signals declared significant; `NaN` without signals.
    pub power: f64,
    pub mean_significant: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoStageResult {
    pub config: TwoStageConfig,
    pub bounds: Option<BoundingSequences>,
    pub two_stage: DesignSummary,
    pub one_stage: DesignSummary,
    pub mean_stage_one_selected: f64,
    pub n_refused: usize,
    pub records: Vec<TwoStageRecord>,
}

impl TwoStageResult {
    pub fn write_summary_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "design,n_reps,fwer,power,mean_significant,mean_stage_one_selected,n_refused")?;
        let n = self.records.len();
        let d = &self.two_stage;
        writeln!(
            out,
            "two_stage,{n},{},{},{},{},{}",
            d.fwer, d.power, d.mean_significant, self.mean_stage_one_selected, self.n_refused
        )?;
        let d = &self.one_stage;
        writeln!(out, "one_stage,{n},{},{},{},,", d.fwer, d.power, d.mean_significant)?;
        Ok(())
    }

    /// `rep,variant,p,is_signal,significant` for every stage-2 p-value.
    pub fn write_stage_two_pvalues_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut is_signal = vec![false; self.config.m];
        for &j in &self.config.signal_indices {
            is_signal[j] = true;
        }
        writeln!(out, "rep,variant,p,is_signal,significant")?;
        for rec in &self.records {
            for (&j, &p) in rec.stage_one_selected.iter().zip(&rec.stage_two_pvalues) {
                let sig = rec.stage_two_significant.binary_search(&j).is_ok();
                writeln!(out, "{},{j},{p:e},{},{}", rec.rep, is_signal[j] as u8, sig as u8)?;
            }
        }
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }
}

/// Stage-1 and stage-2 statistics for one replication.
pub fn simulate_split_statistics(config: &TwoStageConfig, rep_seed: u64) -> Result<(StatisticVector, StatisticVector)> {
    config.validate()?;
    let sampler = sampler_for(config)?;
    let (z1, z2) = split_draws(config, &sampler, rep_seed, 0);
    Ok((StatisticVector::z(z1, config.sidedness)?, StatisticVector::z(z2, config.sidedness)?))
}

fn sampler_for(config: &TwoStageConfig) -> Result<CovarianceSampler> {
    match &config.model {
        Some(model) => build_covariance(model),
        None => build_covariance(&CovarianceModel::identity(config.m)?),
    }
}

fn split_draws(config: &TwoStageConfig, sampler: &CovarianceSampler, seed: u64, rep: u64) -> (Vec<f64>, Vec<f64>) {
    let mut z1 = vec![0.0; config.m];
    let mut z2 = vec![0.0; config.m];
    sampler.fill_sample(&mut substream(seed, DOMAIN_STAGE_ONE, rep), &config.means(config.n_stage_one()), &mut z1);
    sampler.fill_sample(&mut substream(seed, DOMAIN_STAGE_TWO, rep), &config.means(config.n_stage_two()), &mut z2);
    (z1, z2)
}

pub fn run_two_stage(config: &TwoStageConfig) -> Result<TwoStageResult> {
    config.validate()?;
    let sampler = sampler_for(config)?;
    let bounds = match (config.s_source, &config.bounds, &config.calibration) {
        (SSource::Known, _, _) => None,
        (SSource::Estimated, Some(b), _) => Some(b.clone()),
        (SSource::Estimated, None, Some(cal)) => {
            let model = match &config.model {
                Some(model) => model.clone(),
                None => CovarianceModel::identity(config.m)?,
            };
            Some(calibrate_model(&model, cal.n_sets, cal.seed, config.sidedness)?)
        }
        (SSource::Estimated, None, None) => unreachable!("rejected by validate"),
    };
    let m_eff = config.m_eff.unwrap_or(config.m);
    let f = config.split_fraction;
    let (w1, w2) = (f.sqrt(), (1.0 - f).sqrt());

    let records = (0..config.n_reps)
        .into_par_iter()
        .map(|rep| -> Result<TwoStageRecord> {
            let (z1, z2) = split_draws(config, &sampler, config.seed, rep as u64);
            let pooled: Vec<f64> = z1.iter().zip(&z2).map(|(a, b)| w1 * a + w2 * b).collect();

            let stage_one = StatisticVector::z(z1, config.sidedness)?.ranked()?;
            let (selection, s_hat) = match &bounds {
                None => {
                    let s = config.signal_indices.len();
                    (Some(fnc_screen_ranked(&stage_one, config.sidedness, s, config.beta, SSource::Known)?), None)
                }
                Some(b) => {
                    let est = pi_hat_pvalue_form(&stage_one.p_sorted, b)?;
                    match screen_with_estimate(&stage_one, config.sidedness, &est, config.beta) {
                        Ok(sel) => (Some(sel), Some(est.s_hat)),
                        Err(FncError::NoDetectableSignal) => (None, Some(0)),
                        Err(e) => return Err(e),
                    }
                }
            };
            let refused = selection.is_none();
            let mut survivors = selection.map(|s| s.selected_indices).unwrap_or_default();
            survivors.sort_unstable();

            let stage_two_pvalues: Vec<f64> = survivors.iter().map(|&j| z_to_p(z2[j], config.sidedness)).collect();
            let stage_two_significant = if survivors.is_empty() {
                Vec::new()
            } else {
                let cutoff = config.alpha / survivors.len() as f64;
                survivors
                    .iter()
                    .zip(&stage_two_pvalues)
                    .filter(|(_, &p)| p <= cutoff)
                    .map(|(&j, _)| j)
                    .collect()
            };

            let pooled = StatisticVector::z(pooled, config.sidedness)?.ranked()?;
            let mut one_stage_significant =
                bonferroni_ranked(&pooled, config.sidedness, config.alpha, m_eff).selected_indices;
            one_stage_significant.sort_unstable();

            debug_assert!(stage_two_significant.iter().all(|j| survivors.binary_search(j).is_ok()));
            Ok(TwoStageRecord {
                rep,
                stage_one_selected: survivors,
                s_hat,
                refused,
                stage_two_significant,
                stage_two_pvalues,
                one_stage_significant,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut is_signal = vec![false; config.m];
    for &j in &config.signal_indices {
        is_signal[j] = true;
    }
    let s = config.signal_indices.len();
    let summarize = |pick: fn(&TwoStageRecord) -> &[usize]| {
        let n = records.len() as f64;
        let errors = records.iter().filter(|r| pick(r).iter().any(|&j| !is_signal[j])).count();
        let power = if s == 0 {
            f64::NAN
        } else {
            records.iter().map(|r| pick(r).iter().filter(|&&j| is_signal[j]).count() as f64 / s as f64).sum::<f64>() / n
        };
        DesignSummary {
            fwer: errors as f64 / n,
            power,
            mean_significant: records.iter().map(|r| pick(r).len() as f64).sum::<f64>() / n,
        }
    };
    let two_stage = summarize(|r| &r.stage_two_significant);
    let one_stage = summarize(|r| &r.one_stage_significant);
    let n = records.len() as f64;
    Ok(TwoStageResult {
        config: config.clone(),
        bounds,
        two_stage,
        one_stage,
        mean_stage_one_selected: records.iter().map(|r| r.stage_one_selected.len() as f64).sum::<f64>() / n,
        n_refused: records.iter().filter(|r| r.refused).count(),
        records,
    })
}
