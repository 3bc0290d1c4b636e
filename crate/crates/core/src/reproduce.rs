//! Canonical simulation designs and their tabular outputs.
//!
//! Tables: 1 dependence and signal-bound calibration; 2 and 5 known-`s`
//! screening against BH at `m = 2000` and `m = 10000`; 3 and 4 estimated-`s`
//! screening under random block covariance, varying intensity and then
//! sparsity and β.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{FncError, Result};
use crate::rng::{derive_seed, DOMAIN_FACTOR_LOADINGS};
use crate::screening::SSource;
use crate::simlab::covariance::CovarianceModel;
use crate::simlab::dependence::{eta, mu_bounds, phase_polyline, Intensity, SparsitySpec};
use crate::simlab::experiment::{run_experiment, CalibrationSpec, ExperimentConfig, MethodSpec, ReplicationSummary};
use crate::statistic::Sidedness;

pub const TABLE_IDS: [u8; 5] = [1, 2, 3, 4, 5];
pub const PHASE_ETAS: [f64; 3] = [0.2, 0.6, 1.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunScale {
    /// 100 replications.
    Desk,
    /// 1000 replications.
    Full,
}

impl RunScale {
    pub fn n_reps(self) -> usize {
        match self {
            RunScale::Desk => 100,
            RunScale::Full => 1000,
        }
    }
}

/// A rectangular table of formatted cells.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", self.columns.join(","))?;
        for row in &self.rows {
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Cell in `column` of the first row whose leading cells equal `key`.
    pub fn lookup(&self, key: &[&str], column: &str) -> Option<&str> {
        let c = self.columns.iter().position(|x| x == column)?;
        self.rows.iter().find(|r| r.iter().zip(key).all(|(a, b)| a == b)).map(|r| r[c].as_str())
    }
}

/// A labelled experiment within a table.
#[derive(Clone, Debug)]
pub struct Design {
    pub labels: Vec<String>,
    pub config: ExperimentConfig,
}

const GAMMA: f64 = 0.3;

/// The three dependence models with their fixed parameters.
pub fn standard_models(m: usize, seed: u64) -> Result<Vec<(&'static str, CovarianceModel)>> {
    Ok(vec![
        ("autoregressive", CovarianceModel::autoregressive(m, 0.2)?),
        ("block", CovarianceModel::block(m, 40, 0.5)?),
        ("factor", CovarianceModel::factor(m, 0.5, derive_seed(seed, DOMAIN_FACTOR_LOADINGS, m as u64))?),
    ])
}

/// `eta, mu1, mu2, mu_min` for each model at `m ∈ {2000, 10000}`, `γ = 0.3`.
pub fn table1(seed: u64) -> Result<Table> {
    let mut t = Table::new("table1", &["m", "model", "eta", "mu1", "mu2", "mu_min", "eta_unrounded", "mu2_unrounded"]);
    for m in [2000, 10000] {
        for (name, model) in standard_models(m, seed)? {
            let e = eta(&model)?;
            let b = mu_bounds(m, GAMMA, e.value)?;
            t.rows.push(vec![
                m.to_string(),
                name.into(),
                format!("{:.2}", e.value),
                format!("{:.2}", b.mu1),
                format!("{:.2}", b.mu2),
                format!("{:.2}", b.mu_min),
                format!("{:.6}", e.value),
                format!("{:.6}", b.mu2),
            ]);
        }
    }
    Ok(t)
}

fn base_config(model: CovarianceModel, gamma: f64, a: f64, methods: Vec<MethodSpec>, n_reps: usize, seed: u64) -> Result<ExperimentConfig> {
    Ok(ExperimentConfig {
        m: model.m,
        model,
        sparsity: SparsitySpec::new(gamma, Intensity::Common(a))?,
        methods,
        n_reps,
        seed,
        sidedness: Sidedness::OneSided,
        bounds: None,
        calibration: None,
        resample_structure: false,
    })
}

/// Known-`s` FNC (β ∈ {0.2, 0.1}) and BH (α ∈ {0.05, 0.2}) at `A ∈ {2, 3}`.
pub fn comparison_designs(m: usize, scale: RunScale, seed: u64) -> Result<Vec<Design>> {
    let methods = vec![
        MethodSpec::fnc(0.2, SSource::Known),
        MethodSpec::fnc(0.1, SSource::Known),
        MethodSpec::bh(0.05),
        MethodSpec::bh(0.2),
    ];
    let mut out = Vec::new();
    for (ai, a) in [2.0, 3.0].into_iter().enumerate() {
        for (mi, (name, model)) in standard_models(m, seed)?.into_iter().enumerate() {
            let cell_seed = derive_seed(seed, m as u64, (ai * 3 + mi) as u64);
            out.push(Design {
                labels: vec![format!("{a}"), name.into()],
                config: base_config(model, GAMMA, a, methods.clone(), scale.n_reps(), cell_seed)?,
            });
        }
    }
    Ok(out)
}

fn random_block_model(m: usize, seed: u64) -> Result<CovarianceModel> {
    CovarianceModel::random_blocks(m, 20, 10, 100, 0.5, seed)
}

fn estimated_config(gamma: f64, a: f64, betas: &[f64], scale: RunScale, seed: u64) -> Result<ExperimentConfig> {
    let methods = betas.iter().map(|&b| MethodSpec::fnc(b, SSource::Estimated)).collect();
    let mut cfg = base_config(random_block_model(2000, seed)?, gamma, a, methods, scale.n_reps(), seed)?;
    cfg.calibration = Some(CalibrationSpec { n_sets: 1000, seed: derive_seed(seed, 0, 0) });
    cfg.resample_structure = true;
    Ok(cfg)
}

/// Estimated-`s` FNC at β = 0.1 for `A ∈ {3, 4, 5}`, `γ = 0.3`.
pub fn intensity_designs(scale: RunScale, seed: u64) -> Result<Vec<Design>> {
    [3.0, 4.0, 5.0]
        .into_iter()
        .enumerate()
        .map(|(i, a)| {
            Ok(Design {
                labels: vec![format!("{a}")],
                config: estimated_config(GAMMA, a, &[0.1], scale, derive_seed(seed, 3, i as u64))?,
            })
        })
        .collect()
}

/// Estimated-`s` FNC at `A = 5` for `γ ∈ {0.3, 0.5}` and β ∈ {0.1, 0.2}.
pub fn sparsity_designs(scale: RunScale, seed: u64) -> Result<Vec<Design>> {
    [0.3, 0.5]
        .into_iter()
        .enumerate()
        .map(|(i, gamma)| {
            Ok(Design {
                labels: vec![format!("{gamma}")],
                config: estimated_config(gamma, 5.0, &[0.1, 0.2], scale, derive_seed(seed, 4, i as u64))?,
            })
        })
        .collect()
}

fn summary_rows(t: &mut Table, labels: &[String], summary: &ReplicationSummary, with_fm: bool) {
    let n = summary.records.len() as f64;
    for m in &summary.methods {
        let mut row = labels.to_vec();
        row.push(m.label.clone());
        let mut push = |v: &crate::simlab::experiment::MeanSd| {
            row.push(format!("{:.3}", v.mean));
            row.push(format!("{:.3}", v.sd));
            row.push(format!("{:.4}", v.sd / n.sqrt()));
        };
        push(&m.fnp);
        push(&m.fdp);
        if with_fm {
            push(&m.fm_index);
        }
        row.push(format!("{:.1}", m.mean_selected));
        row.push(m.n_refused.to_string());
        t.rows.push(row);
    }
}

const KNOWN_COLUMNS: [&str; 11] =
    ["A", "model", "method", "fnp_mean", "fnp_sd", "fnp_mc_se", "fdp_mean", "fdp_sd", "fdp_mc_se", "mean_selected", "n_refused"];

fn run_designs(name: &str, lead: &[&str], designs: Vec<Design>, with_fm: bool) -> Result<Table> {
    let mut columns: Vec<&str> = lead.to_vec();
    columns.extend(["method", "fnp_mean", "fnp_sd", "fnp_mc_se", "fdp_mean", "fdp_sd", "fdp_mc_se"]);
    if with_fm {
        columns.extend(["fm_mean", "fm_sd", "fm_mc_se"]);
    }
    columns.extend(["mean_selected", "n_refused"]);
    let mut t = Table::new(name, &columns);
    for d in designs {
        let summary = run_experiment(&d.config)?;
        summary_rows(&mut t, &d.labels, &summary, with_fm);
    }
    Ok(t)
}

/// Generate table `id` (1 to 5).
pub fn table(id: u8, scale: RunScale, seed: u64) -> Result<Table> {
    match id {
        1 => table1(seed),
        2 => run_designs("table2", &KNOWN_COLUMNS[..2], comparison_designs(2000, scale, seed)?, false),
        3 => run_designs("table3", &["A"], intensity_designs(scale, seed)?, true),
        4 => run_designs("table4", &["gamma"], sparsity_designs(scale, seed)?, true),
        5 => run_designs("table5", &KNOWN_COLUMNS[..2], comparison_designs(10000, scale, seed)?, false),
        _ => Err(FncError::Config(format!("unknown table {id}; valid tables are 1, 2, 3, 4, 5"))),
    }
}

/// Boundary polylines `(eta, gamma, r)` for each η in [`PHASE_ETAS`].
pub fn phase_table(points: usize) -> Result<Table> {
    let mut t = Table::new("phase", &["eta", "gamma", "r"]);
    for e in PHASE_ETAS {
        for (gamma, r) in phase_polyline(e, points)? {
            t.rows.push(vec![format!("{e}"), format!("{gamma:.6}"), format!("{r:.6}")]);
        }
    }
    Ok(t)
}
