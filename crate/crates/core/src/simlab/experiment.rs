//! Replicated screening experiments on simulated Gaussian statistics.

use std::io::Write;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{calibrate_model, BoundingSequences, DEFAULT_N_SETS};
use crate::classify::{classify_mask, metrics, Metrics};
use crate::error::{FncError, Result};
use crate::proportion::{pi_hat_pvalue_form, ProportionEstimate};
use crate::rng::{derive_seed, substream, DOMAIN_CALIBRATION, DOMAIN_NOISE, DOMAIN_STRUCTURE, DOMAIN_TRUTH};
use crate::screening::{bh_ranked, bonferroni_ranked, fnc_screen_ranked, screen_with_estimate, Method, SSource};
use crate::simlab::covariance::{build_covariance, CovarianceModel, CovarianceSampler};
use crate::simlab::dependence::SparsitySpec;
use crate::statistic::{Sidedness, StatisticVector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub method: Method,
    /// β for FNC, α for BH and Bonferroni.
    pub level: f64,
    /// FNC only; defaults to known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_source: Option<SSource>,
}

impl MethodSpec {
    pub fn fnc(beta: f64, s_source: SSource) -> Self {
        Self { method: Method::Fnc, level: beta, s_source: Some(s_source) }
    }

    pub fn bh(alpha: f64) -> Self {
        Self { method: Method::Bh, level: alpha, s_source: None }
    }

    pub fn bonferroni(alpha: f64) -> Self {
        Self { method: Method::Bonferroni, level: alpha, s_source: None }
    }

    fn estimated(&self) -> bool {
        self.method == Method::Fnc && self.s_source == Some(SSource::Estimated)
    }

    pub fn label(&self) -> String {
        match self.method {
            Method::Fnc => {
                let src = if self.estimated() { "estimated" } else { "known" };
                format!("fnc(beta={},s={src})", self.level)
            }
            Method::Bh => format!("bh(alpha={})", self.level),
            Method::Bonferroni => format!("bonferroni(alpha={})", self.level),
        }
    }
}

/// Monte Carlo calibration settings for experiments that estimate `s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSpec {
    #[serde(default = "default_n_sets")]
    pub n_sets: usize,
    pub seed: u64,
}

fn default_n_sets() -> usize {
    DEFAULT_N_SETS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub m: usize,
    pub model: CovarianceModel,
    pub sparsity: SparsitySpec,
    pub methods: Vec<MethodSpec>,
    pub n_reps: usize,
    pub seed: u64,
    #[serde(default)]
    pub sidedness: Sidedness,
    /// Fixed bounding constants for estimated-`s` methods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundingSequences>,
    /// Calibrate bounding constants by simulation; ignored when `bounds` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationSpec>,
    /// Redraw seeded covariance structure (random block sizes, factor
    /// loadings) in every replication. With `calibration`, the bounds are then
    /// recalibrated per replication.
    #[serde(default)]
    pub resample_structure: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<usize> {
        if self.n_reps == 0 {
            return Err(FncError::Config("n_reps must be at least 1".into()));
        }
        if self.model.m != self.m {
            return Err(FncError::Config(format!("model dimension {} differs from m = {}", self.model.m, self.m)));
        }
        self.model.validate()?;
        if self.methods.is_empty() {
            return Err(FncError::Config("no methods configured".into()));
        }
        for spec in &self.methods {
            if !(spec.level > 0.0 && spec.level < 1.0) {
                return Err(FncError::Config(format!("{}: level must lie in (0, 1)", spec.label())));
            }
            if spec.method != Method::Fnc && spec.s_source.is_some() {
                return Err(FncError::Config(format!("{}: s_source applies to fnc only", spec.label())));
            }
        }
        if self.methods.iter().any(MethodSpec::estimated) && self.bounds.is_none() && self.calibration.is_none() {
            return Err(FncError::Config(
                "an estimated-s method needs bounding sequences or a calibration setting".into(),
            ));
        }
        if let Some(b) = &self.bounds {
            if b.m != self.m {
                return Err(FncError::Config(format!("bounds were computed for m = {}, not {}", b.m, self.m)));
            }
        }
        let s = self.sparsity.signal_count(self.m)?;
        Ok(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub k: usize,
    pub fnp: f64,
    pub fdp: f64,
    pub fm_index: f64,
    /// Estimated-`s` screening refused because `π̂ = 0`; scored as selecting nothing.
    #[serde(default)]
    pub refused: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub rep: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi_hat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_hat: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<(f64, f64)>,
    pub outcomes: Vec<MethodOutcome>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    /// Mean and `n − 1` standard deviation; the SD of a single value is 0.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, sd: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, sd }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub label: String,
    pub spec: MethodSpec,
    pub fnp: MeanSd,
    pub fdp: MeanSd,
    pub fm_index: MeanSd,
    pub mean_selected: f64,
    pub n_refused: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub config: ExperimentConfig,
    pub s: usize,
    pub methods: Vec<MethodSummary>,
    pub records: Vec<ReplicationRecord>,
}

impl ReplicationSummary {
    pub fn method(&self, spec: &MethodSpec) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| &m.spec == spec)
    }

    /// One row per method.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "method,level,s_source,n_reps,fnp_mean,fnp_sd,fdp_mean,fdp_sd,fm_mean,fm_sd,mean_selected,n_refused"
        )?;
        for m in &self.methods {
            let src = match m.spec.s_source {
                Some(SSource::Known) => "known",
                Some(SSource::Estimated) => "estimated",
                None if m.spec.method == Method::Fnc => "known",
                None => "",
            };
            let method = match m.spec.method {
                Method::Fnc => "fnc",
                Method::Bh => "bh",
                Method::Bonferroni => "bonferroni",
            };
            writeln!(
                out,
                "{method},{},{src},{},{},{},{},{},{},{},{},{}",
                m.spec.level,
                self.records.len(),
                m.fnp.mean,
                m.fnp.sd,
                m.fdp.mean,
                m.fdp.sd,
                m.fm_index.mean,
                m.fm_index.sd,
                m.mean_selected,
                m.n_refused
            )?;
        }
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }
}

/// Run every replication; records are returned in replication order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ReplicationSummary> {
    let s = config.validate()?;
    let needs_bounds = config.methods.iter().any(MethodSpec::estimated);

    let shared_sampler = if config.resample_structure && config.model.is_seeded() {
        None
    } else {
        Some(build_covariance(&config.model)?)
    };
    let shared_bounds = match (&config.bounds, &config.calibration) {
        (Some(b), _) => Some(b.clone()),
        (None, Some(cal)) if needs_bounds && shared_sampler.is_some() => {
            Some(calibrate_model(&config.model, cal.n_sets, cal.seed, config.sidedness)?)
        }
        _ => None,
    };

    let records = (0..config.n_reps)
        .into_par_iter()
        .map(|rep| {
            let local;
            let (sampler, bounds) = match &shared_sampler {
                Some(sampler) => (sampler, shared_bounds.clone()),
                None => {
                    let model = config.model.reseeded(derive_seed(config.seed, DOMAIN_STRUCTURE, rep as u64));
                    local = build_covariance(&model)?;
                    let bounds = match (&shared_bounds, &config.calibration) {
                        (Some(b), _) => Some(b.clone()),
                        (None, Some(cal)) if needs_bounds => Some(calibrate_model(
                            &model,
                            cal.n_sets,
                            derive_seed(cal.seed, DOMAIN_CALIBRATION, rep as u64),
                            config.sidedness,
                        )?),
                        _ => None,
                    };
                    (&local, bounds)
                }
            };
            run_replication(config, s, sampler, bounds.as_ref(), rep)
        })
        .collect::<Result<Vec<_>>>()?;

    let methods = config
        .methods
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let column = |f: fn(&MethodOutcome) -> f64| records.iter().map(|r| f(&r.outcomes[i])).collect::<Vec<_>>();
            MethodSummary {
                label: spec.label(),
                spec: spec.clone(),
                fnp: MeanSd::of(&column(|o| o.fnp)),
                fdp: MeanSd::of(&column(|o| o.fdp)),
                fm_index: MeanSd::of(&column(|o| o.fm_index)),
                mean_selected: MeanSd::of(&column(|o| o.k as f64)).mean,
                n_refused: records.iter().filter(|r| r.outcomes[i].refused).count(),
            }
        })
        .collect();

    Ok(ReplicationSummary { config: config.clone(), s, methods, records })
}

/// Signal positions for replication `rep`, in ascending order.
pub fn draw_signal_set(m: usize, s: usize, seed: u64, rep: u64) -> Vec<usize> {
    let mut rng = substream(seed, DOMAIN_TRUTH, rep);
    let mut idx = sample(&mut rng, m, s).into_vec();
    idx.sort_unstable();
    idx
}

/// Mean vector with amplitude `sparsity.amplitude(i)` at the `i`-th signal.
pub fn mean_vector(m: usize, signals: &[usize], sparsity: &SparsitySpec) -> Vec<f64> {
    let mut mu = vec![0.0; m];
    for (i, &j) in signals.iter().enumerate() {
        mu[j] = sparsity.amplitude(i);
    }
    mu
}

fn run_replication(
    config: &ExperimentConfig,
    s: usize,
    sampler: &CovarianceSampler,
    bounds: Option<&BoundingSequences>,
    rep: usize,
) -> Result<ReplicationRecord> {
    let m = config.m;
    let signals = draw_signal_set(m, s, config.seed, rep as u64);
    let mu = mean_vector(m, &signals, &config.sparsity);
    let mut is_signal = vec![false; m];
    for &j in &signals {
        is_signal[j] = true;
    }

    let mut rng = substream(config.seed, DOMAIN_NOISE, rep as u64);
    let mut z = vec![0.0; m];
    sampler.fill_sample(&mut rng, &mu, &mut z);
    let stats = StatisticVector::z(z, config.sidedness)?;
    let ranked = stats.ranked()?;

    let estimate: Option<ProportionEstimate> = match bounds {
        Some(b) if config.methods.iter().any(MethodSpec::estimated) => Some(pi_hat_pvalue_form(&ranked.p_sorted, b)?),
        _ => None,
    };

    let outcomes = config
        .methods
        .iter()
        .map(|spec| {
            let selection = match spec.method {
                Method::Fnc if spec.estimated() => {
                    let est = estimate.as_ref().expect("estimate present for estimated-s methods");
                    match screen_with_estimate(&ranked, config.sidedness, est, spec.level) {
                        Ok(sel) => Some(sel),
                        Err(FncError::NoDetectableSignal) => None,
                        Err(e) => return Err(e),
                    }
                }
                Method::Fnc => Some(fnc_screen_ranked(&ranked, config.sidedness, s, spec.level, SSource::Known)?),
                Method::Bh => Some(bh_ranked(&ranked, config.sidedness, spec.level)),
                Method::Bonferroni => Some(bonferroni_ranked(&ranked, config.sidedness, spec.level, m)),
            };
            let (selected, refused) = match &selection {
                Some(sel) => (sel.selected_indices.as_slice(), false),
                None => (&[][..], true),
            };
            let counts = classify_mask(selected, &is_signal)?;
            let Metrics { fnp, fdp, fm_index } = metrics(&counts)?;
            Ok(MethodOutcome { k: counts.r, fnp, fdp, fm_index, refused })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ReplicationRecord {
        rep,
        pi_hat: estimate.as_ref().map(|e| e.pi_hat),
        s_hat: estimate.as_ref().map(|e| e.s_hat),
        bounds: bounds.map(|b| (b.c_half, b.c_one)),
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simlab::dependence::Intensity;

    fn config(model: CovarianceModel, a: f64, methods: Vec<MethodSpec>, n_reps: usize) -> ExperimentConfig {
        ExperimentConfig {
            m: model.m,
            model,
            sparsity: SparsitySpec::new(0.3, Intensity::Common(a)).unwrap(),
            methods,
            n_reps,
            seed: 11,
            sidedness: Sidedness::OneSided,
            bounds: None,
            calibration: None,
            resample_structure: false,
        }
    }

    #[test]
    fn estimated_s_without_bounds_is_a_configuration_error() {
        let cfg = config(
            CovarianceModel::identity(200).unwrap(),
            3.0,
            vec![MethodSpec::fnc(0.1, SSource::Estimated)],
            2,
        );
        assert!(matches!(run_experiment(&cfg), Err(FncError::Config(_))));
    }

    #[test]
    fn mismatched_dimension_is_rejected() {
        let mut cfg = config(CovarianceModel::identity(200).unwrap(), 3.0, vec![MethodSpec::bh(0.1)], 2);
        cfg.m = 300;
        assert!(run_experiment(&cfg).is_err());
    }

    #[test]
    fn zero_intensity_stays_in_range() {
        let cfg = config(
            CovarianceModel::autoregressive(300, 0.2).unwrap(),
            0.0,
            vec![MethodSpec::fnc(0.2, SSource::Known), MethodSpec::fnc(0.05, SSource::Known), MethodSpec::bh(0.1)],
            8,
        );
        let out = run_experiment(&cfg).unwrap();
        for rec in &out.records {
            for o in &rec.outcomes {
                assert!((0.0..=1.0).contains(&o.fnp));
                assert!((0.0..=1.0).contains(&o.fdp));
                assert!(o.fm_index <= 1.0);
            }
        }
    }

    #[test]
    fn reruns_are_identical_and_thread_count_free() {
        let cfg = config(
            CovarianceModel::block(400, 20, 0.5).unwrap(),
            3.0,
            vec![MethodSpec::fnc(0.2, SSource::Known), MethodSpec::bh(0.05)],
            6,
        );
        let a = run_experiment(&cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| run_experiment(&cfg)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn signal_sets_are_resampled_per_replication() {
        let a = draw_signal_set(1000, 20, 3, 0);
        let b = draw_signal_set(1000, 20, 3, 1);
        assert_eq!(a.len(), 20);
        assert_ne!(a, b);
        assert_eq!(a, draw_signal_set(1000, 20, 3, 0));
    }

    #[test]
    fn estimated_s_with_calibration_runs() {
        let mut cfg = config(
            CovarianceModel::random_blocks(600, 6, 10, 100, 0.5, 1).unwrap(),
            5.0,
            vec![MethodSpec::fnc(0.1, SSource::Estimated)],
            3,
        );
        cfg.calibration = Some(CalibrationSpec { n_sets: 50, seed: 2 });
        cfg.resample_structure = true;
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.records.len(), 3);
        assert!(out.records.iter().all(|r| r.s_hat.is_some() && r.bounds.is_some()));
        let mut csv = Vec::new();
        out.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 2);
    }

    #[test]
    fn mean_sd() {
        let v = MeanSd::of(&[1.0, 2.0, 3.0]);
        assert_eq!(v.mean, 2.0);
        assert!((v.sd - 1.0).abs() < 1e-15);
        assert_eq!(MeanSd::of(&[4.0]).sd, 0.0);
    }
}
