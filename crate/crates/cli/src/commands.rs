//! Subcommands.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use fnc_core::calibration::{bounding_sequences, calibrate_model, simulate_null_ensemble, BoundingSequences, NullEnsemble};
use fnc_core::proportion::estimate_proportion;
use fnc_core::reproduce::{phase_table, table, RunScale, Table};
use fnc_core::screening::{fnc_screen, fnp_hat, SSource, SelectionResult};
use fnc_core::simlab::covariance::CovarianceModel;
use fnc_core::simlab::experiment::{run_experiment, ExperimentConfig};
use fnc_core::statistic::{Scale, Sidedness, StatisticVector};
use fnc_core::twostage::{run_two_stage, TwoStageConfig};
use fnc_core::FncError;
use serde::Serialize;
use serde_json::{json, Value};

use crate::io::{read_statistics, sibling, write_atomic, write_json_atomic};
use crate::manifest::{resolve_seed, ManifestBuilder};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "fnc", version, about = "False negative control screening")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Select the top-ranked statistics whose estimated false negative proportion is below β.
    Screen(ScreenArgs),
    /// Compute bounding constants from a covariance model or a null ensemble.
    Calibrate(CalibrateArgs),
    /// Regenerate a benchmark table or the phase-diagram polylines.
    Reproduce(ReproduceArgs),
    /// Run a replicated screening experiment from a JSON configuration.
    Experiment(ConfigArgs),
    /// Run the two-stage screening and confirmation simulation from a JSON configuration.
    Twostage(ConfigArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SidedArg {
    One,
    Two,
}

impl From<SidedArg> for Sidedness {
    fn from(s: SidedArg) -> Self {
        match s {
            SidedArg::One => Sidedness::OneSided,
            SidedArg::Two => Sidedness::TwoSided,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScaleArg {
    P,
    Z,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
enum SArg {
    Known(usize),
    Estimate,
}

impl FromStr for SArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("estimate") {
            return Ok(SArg::Estimate);
        }
        s.parse().map(SArg::Known).map_err(|_| format!("expected a positive integer or 'estimate', got {s:?}"))
    }
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("c_source").args(["null_ensemble", "bounds", "c_half"]).multiple(false)))]
struct ScreenArgs {
    /// CSV with columns `id,p` or `id,z`, header optional.
    input: PathBuf,
    /// Target false negative proportion, in (0, 1).
    #[arg(long)]
    beta: f64,
    /// Number of signals, or `estimate` to estimate it from calibrated bounds.
    #[arg(long = "s", value_name = "INT|estimate")]
    s: SArg,
    #[arg(long, value_enum, default_value = "one")]
    sided: SidedArg,
    /// Overrides the scale named by the header; headerless input defaults to p.
    #[arg(long, value_enum)]
    scale: Option<ScaleArg>,
    /// Null ensemble CSV to calibrate the bounding constants from.
    #[arg(long)]
    null_ensemble: Option<PathBuf>,
    /// Bounding constants JSON written by `fnc calibrate`.
    #[arg(long)]
    bounds: Option<PathBuf>,
    /// Square-root bounding constant, given directly.
    #[arg(long, requires = "c_one")]
    c_half: Option<f64>,
    /// Linear bounding constant, given directly.
    #[arg(long, requires = "c_half")]
    c_one: Option<f64>,
    /// Selection CSV; the summary and manifest are written beside it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").args(["model", "ensemble"]).required(true).multiple(false)))]
struct CalibrateArgs {
    /// Covariance model, e.g. `ar:0.2`, `block:40:0.5`, `factor:0.5:SEED`.
    #[arg(long, requires = "m")]
    model: Option<String>,
    /// Null ensemble CSV, one set of p-values per row.
    #[arg(long)]
    ensemble: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    n_sets: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "one")]
    sided: SidedArg,
    #[arg(long)]
    out: PathBuf,
    /// Also write the simulated ensemble (model source only).
    #[arg(long, requires = "model")]
    ensemble_out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FigureArg {
    Phase,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScaleRun {
    Desk,
    Full,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("selector").args(["table", "figure"]).required(true).multiple(false)))]
struct ReproduceArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
    table: Option<u8>,
    #[arg(long, value_enum)]
    figure: Option<FigureArg>,
    #[arg(long, value_enum, default_value = "desk")]
    scale: ScaleRun,
    #[arg(long)]
    seed: Option<u64>,
    /// Points per phase polyline.
    #[arg(long, default_value_t = 101)]
    points: usize,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configuration's seed; drawn from entropy when neither is given.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Screen(a) => screen(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Reproduce(a) => reproduce(a),
        Command::Experiment(a) => experiment(a),
        Command::Twostage(a) => twostage(a),
    }
}

fn output_error(e: std::io::Error) -> CliError {
    CliError::Output(e.to_string())
}

#[derive(Debug, Serialize)]
struct ScreenSummary {
    m: usize,
    beta: f64,
    k: usize,
    refused: bool,
    s_source: SSource,
    s_used: Option<usize>,
    s_clipped: bool,
    s_hat: Option<usize>,
    pi_hat: Option<f64>,
    pi_half: Option<f64>,
    pi_one: Option<f64>,
    c_half: Option<f64>,
    c_one: Option<f64>,
    threshold_z: Option<f64>,
    fnp_hat_at_k: Option<f64>,
    scale: Scale,
    sidedness: Sidedness,
    clamped_pvalues: usize,
}

fn screen(a: ScreenArgs) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new("screen");
    manifest.input(&a.input)?;
    let sidedness: Sidedness = a.sided.into();
    let scale = a.scale.map(|s| match s {
        ScaleArg::P => Scale::P,
        ScaleArg::Z => Scale::Z,
    });
    let stats = read_statistics(&a.input)?.into_vector(scale, sidedness)?;
    let m = stats.len();
    let clamped = match stats.scale() {
        Scale::Z => stats.to_pvalues()?.clamped,
        _ => 0,
    };
    if !(a.beta > 0.0 && a.beta < 1.0) {
        return Err(FncError::Domain(format!("beta must lie in the open interval (0, 1), got {}", a.beta)).into());
    }

    let bounds = match a.s {
        SArg::Known(_) => None,
        SArg::Estimate => Some(resolve_bounds(&a, m, &mut manifest)?),
    };
    let estimate = bounds.as_ref().map(|b| estimate_proportion(&stats, b)).transpose()?;
    let summary_path = sibling(&a.out, "summary.json");
    let manifest_path = sibling(&a.out, "manifest.json");
    manifest.config(json!({
        "input": a.input,
        "beta": a.beta,
        "s": a.s,
        "sidedness": sidedness,
        "scale": stats.scale(),
        "bounds": bounds,
        "out": a.out,
    }));

    let mut summary = ScreenSummary {
        m,
        beta: a.beta,
        k: 0,
        refused: false,
        s_source: if bounds.is_some() { SSource::Estimated } else { SSource::Known },
        s_used: None,
        s_clipped: false,
        s_hat: estimate.as_ref().map(|e| e.s_hat),
        pi_hat: estimate.as_ref().map(|e| e.pi_hat),
        pi_half: estimate.as_ref().map(|e| e.pi_half),
        pi_one: estimate.as_ref().map(|e| e.pi_one),
        c_half: bounds.as_ref().map(|b| b.c_half),
        c_one: bounds.as_ref().map(|b| b.c_one),
        threshold_z: None,
        fnp_hat_at_k: None,
        scale: stats.scale(),
        sidedness,
        clamped_pvalues: clamped,
    };

    let s = match (a.s, &estimate) {
        (SArg::Known(s), _) => s,
        (SArg::Estimate, Some(e)) if !e.detects_signal() => {
            summary.refused = true;
            write_json_atomic(&summary_path, &summary)?;
            manifest.write(&manifest_path, 2)?;
            return Err(FncError::NoDetectableSignal.into());
        }
        (SArg::Estimate, Some(e)) => {
            summary.s_clipped = e.s_hat >= m;
            e.s_hat.min(m - 1)
        }
        (SArg::Estimate, None) => unreachable!("estimate computed whenever bounds are"),
    };
    let selection = fnc_screen(&stats, s, a.beta, summary.s_source)?;
    summary.k = selection.k;
    summary.s_used = Some(s);
    summary.threshold_z = selection.threshold_z.is_finite().then_some(selection.threshold_z);
    summary.fnp_hat_at_k = selection.fnp_hat_at_k;

    write_selection_csv(&a.out, &stats, &selection, s)?;
    write_json_atomic(&summary_path, &summary)?;
    manifest.write(&manifest_path, 0)?;
    println!("selected {} of {m} (s = {s}, beta = {})", selection.k, a.beta);
    Ok(())
}

fn resolve_bounds(a: &ScreenArgs, m: usize, manifest: &mut ManifestBuilder) -> Result<BoundingSequences, CliError> {
    if let (Some(c_half), Some(c_one)) = (a.c_half, a.c_one) {
        return Ok(BoundingSequences::manual(m, c_half, c_one)?);
    }
    let bounds = if let Some(path) = &a.null_ensemble {
        manifest.input(path)?;
        bounding_sequences(&NullEnsemble::read_csv(path)?)?
    } else if let Some(path) = &a.bounds {
        manifest.input(path)?;
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(FncError::from)?
    } else {
        return Err(CliError::Usage(
            "--s estimate needs --null-ensemble, --bounds, or --c-half with --c-one".into(),
        ));
    };
    if bounds.m != m {
        return Err(FncError::Domain(format!("bounds were calibrated for m = {}, input has m = {m}", bounds.m)).into());
    }
    Ok(bounds)
}

fn write_selection_csv(path: &Path, stats: &StatisticVector, selection: &SelectionResult, s: usize) -> Result<(), CliError> {
    let ranked = stats.ranked()?;
    let m = ranked.len();
    write_atomic(path, |w| {
        writeln!(w, "id,rank,p,selected,fnp_hat_at_rank").map_err(output_error)?;
        for (r, (&idx, &p)) in ranked.order.iter().zip(&ranked.p_sorted).enumerate() {
            let rank = r + 1;
            let fnp = fnp_hat(rank, p, s, m)?;
            let selected = u8::from(rank <= selection.k);
            writeln!(w, "{},{rank},{p:e},{selected},{fnp}", stats.id(idx)).map_err(output_error)?;
        }
        Ok(())
    })
}

fn calibrate(a: CalibrateArgs) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new("calibrate");
    let sidedness: Sidedness = a.sided.into();
    let bounds = if let Some(spec) = &a.model {
        let m = a.m.ok_or_else(|| CliError::Usage("--model needs --m".into()))?;
        let model = CovarianceModel::parse(spec, m)?;
        let seed = resolve_seed(a.seed);
        manifest.seed("seed", seed);
        manifest.config(json!({
            "model": model,
            "n_sets": a.n_sets,
            "seed": seed,
            "sidedness": sidedness,
        }));
        match &a.ensemble_out {
            Some(path) => {
                let ensemble = simulate_null_ensemble(&model, a.n_sets, seed, sidedness)?;
                write_atomic(path, |w| Ok(ensemble.write_csv(w)?))?;
                bounding_sequences(&ensemble)?
            }
            None => calibrate_model(&model, a.n_sets, seed, sidedness)?,
        }
    } else {
        let path = a.ensemble.as_ref().expect("clap enforces one source");
        manifest.input(path)?;
        manifest.config(json!({ "ensemble": path }));
        bounding_sequences(&NullEnsemble::read_csv(path)?)?
    };
    write_json_atomic(&a.out, &bounds)?;
    manifest.write(&sibling(&a.out, "manifest.json"), 0)?;
    println!("c_half = {}, c_one = {} (m = {}, level = {:.4})", bounds.c_half, bounds.c_one, bounds.m, bounds.quantile_level);
    Ok(())
}

fn reproduce(a: ReproduceArgs) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new("reproduce");
    let scale = match a.scale {
        ScaleRun::Desk => RunScale::Desk,
        ScaleRun::Full => RunScale::Full,
    };
    let seed = resolve_seed(a.seed);
    manifest.seed("seed", seed);
    let table: Table = match (a.table, a.figure) {
        (Some(id), _) => {
            manifest.config(json!({ "table": id, "scale": scale, "seed": seed }));
            table(id, scale, seed)?
        }
        (None, Some(FigureArg::Phase)) => {
            manifest.config(json!({ "figure": "phase", "points": a.points, "seed": seed }));
            phase_table(a.points)?
        }
        (None, None) => unreachable!("clap enforces one selector"),
    };
    let path = a.out_dir.join(format!("{}.csv", table.name));
    write_atomic(&path, |w| Ok(table.write_csv(w)?))?;
    manifest.write(&sibling(&path, "manifest.json"), 0)?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Load a JSON configuration, filling in the top-level seed (and a missing
/// calibration seed) from `--seed` or system entropy.
fn load_config(a: &ConfigArgs, manifest: &mut ManifestBuilder) -> Result<(Value, u64), CliError> {
    manifest.input(&a.config)?;
    let text = std::fs::read_to_string(&a.config).map_err(|e| CliError::Input(format!("{}: {e}", a.config.display())))?;
    let mut value: Value = serde_json::from_str(&text).map_err(|e| FncError::Parse { line: e.line(), msg: e.to_string() })?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| FncError::Config("configuration must be a JSON object".into()))?;
    let seed = match (a.seed, obj.get("seed").and_then(Value::as_u64)) {
        (Some(s), _) | (None, Some(s)) => s,
        (None, None) => resolve_seed(None),
    };
    obj.insert("seed".into(), json!(seed));
    if let Some(cal) = obj.get_mut("calibration").and_then(Value::as_object_mut) {
        cal.entry("seed").or_insert(json!(seed));
    }
    manifest.seed("seed", seed);
    Ok((value, seed))
}

fn config_stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned())
}

fn experiment(a: ConfigArgs) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new("experiment");
    let (value, _) = load_config(&a, &mut manifest)?;
    let config: ExperimentConfig = serde_json::from_value(value).map_err(|e| FncError::Config(e.to_string()))?;
    manifest.config(serde_json::to_value(&config).map_err(FncError::from)?);
    let summary = run_experiment(&config)?;
    let stem = config_stem(&a.config);
    let csv = a.out_dir.join(format!("{stem}.summary.csv"));
    write_atomic(&csv, |w| Ok(summary.write_csv(w)?))?;
    write_atomic(&a.out_dir.join(format!("{stem}.json")), |w| Ok(summary.write_json(w)?))?;
    manifest.write(&a.out_dir.join(format!("{stem}.manifest.json")), 0)?;
    for method in &summary.methods {
        println!(
            "{}: FNP {:.4} ({:.4}), FDP {:.4} ({:.4})",
            method.label, method.fnp.mean, method.fnp.sd, method.fdp.mean, method.fdp.sd
        );
    }
    Ok(())
}

fn twostage(a: ConfigArgs) -> Result<(), CliError> {
    let mut manifest = ManifestBuilder::new("twostage");
    let (value, _) = load_config(&a, &mut manifest)?;
    let config: TwoStageConfig = serde_json::from_value(value).map_err(|e| FncError::Config(e.to_string()))?;
    manifest.config(serde_json::to_value(&config).map_err(FncError::from)?);
    let result = run_two_stage(&config)?;
    let stem = config_stem(&a.config);
    write_atomic(&a.out_dir.join(format!("{stem}.summary.csv")), |w| Ok(result.write_summary_csv(w)?))?;
    write_atomic(&a.out_dir.join(format!("{stem}.stage2_pvalues.csv")), |w| {
        Ok(result.write_stage_two_pvalues_csv(w)?)
    })?;
    write_atomic(&a.out_dir.join(format!("{stem}.json")), |w| Ok(result.write_json(w)?))?;
    manifest.write(&a.out_dir.join(format!("{stem}.manifest.json")), 0)?;
    println!(
        "two-stage FWER {:.4} power {:.4}; one-stage FWER {:.4} power {:.4}",
        result.two_stage.fwer, result.two_stage.power, result.one_stage.fwer, result.one_stage.power
    );
    Ok(())
}
