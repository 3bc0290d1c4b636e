use fnc_core::rng::substream;
use fnc_core::screening::SSource;
use fnc_core::simlab::experiment::{run_experiment, ExperimentConfig, MethodSpec};
use fnc_core::simlab::{build_covariance, eta, signal_count, CovarianceModel, Intensity, SparsitySpec};
use fnc_core::statistic::Sidedness;

#[test]
fn identity_has_unit_eta_and_full_dependence_has_zero() {
    assert_eq!(eta(&CovarianceModel::identity(700).unwrap()).unwrap().value, 1.0);
    let ones = vec![vec![1.0; 6]; 6];
    let e = eta(&CovarianceModel::explicit(ones).unwrap()).unwrap();
    assert!(e.value.abs() < 1e-12);
}

#[test]
fn signal_counts_at_both_sparsities() {
    assert_eq!(signal_count(2000, 0.3), 205);
    assert_eq!(signal_count(2000, 0.5), 45);
}

/// Sample variance of the false-positive count at t = 2 grows with ‖Σ‖₁.
#[test]
fn false_positive_variance_grows_with_dependence() {
    let m = 500;
    let equi = vec![vec![0.5; m]; m]
        .into_iter()
        .enumerate()
        .map(|(i, mut row)| {
            row[i] = 1.0;
            row
        })
        .collect();
    let models = [
        CovarianceModel::identity(m).unwrap(),
        CovarianceModel::block(m, 40, 0.5).unwrap(),
        CovarianceModel::explicit(equi).unwrap(),
    ];
    let variances: Vec<f64> = models
        .iter()
        .map(|model| {
            let sampler = build_covariance(model).unwrap();
            let counts: Vec<f64> = (0..500u64)
                .map(|rep| {
                    let mut z = vec![0.0; m];
                    sampler.fill_noise(&mut substream(77, 1, rep), &mut z);
                    z.iter().filter(|&&x| x > 2.0).count() as f64
                })
                .collect();
            let mean = counts.iter().sum::<f64>() / counts.len() as f64;
            counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (counts.len() - 1) as f64
        })
        .collect();
    assert!(variances[0] < variances[1] && variances[1] < variances[2], "{variances:?}");
}

#[test]
fn known_s_fnc_tracks_beta_under_ar() {
    let model = CovarianceModel::autoregressive(2000, 0.2).unwrap();
    let cfg = ExperimentConfig {
        m: 2000,
        model,
        sparsity: SparsitySpec::new(0.3, Intensity::Common(3.0)).unwrap(),
        methods: vec![MethodSpec::fnc(0.2, SSource::Known), MethodSpec::bh(0.05)],
        n_reps: 100,
        seed: 4242,
        sidedness: Sidedness::OneSided,
        bounds: None,
        calibration: None,
        resample_structure: false,
    };
    let out = run_experiment(&cfg).unwrap();
    let fnc = &out.methods[0];
    let bh = &out.methods[1];
    assert!((fnc.fnp.mean - 0.198).abs() < 0.03, "FNC mean FNP {}", fnc.fnp.mean);
    assert!((bh.fdp.mean - 0.044).abs() < 0.03, "BH mean FDP {}", bh.fdp.mean);
    for m in &out.methods {
        for v in [m.fnp, m.fdp, m.fm_index] {
            assert!(v.sd >= 0.0 && (0.0..=1.0).contains(&v.mean));
        }
    }
}

#[test]
fn experiment_config_json_round_trip() {
    let json = r#"{
        "m": 300,
        "model": {"m": 300, "kind": "block", "k": 30, "r": 0.4},
        "sparsity": {"gamma": 0.4, "intensity": 3.0},
        "methods": [{"method": "fnc", "level": 0.2, "s_source": "known"}, {"method": "bh", "level": 0.1}],
        "n_reps": 4,
        "seed": 1
    }"#;
    let cfg: ExperimentConfig = serde_json::from_str(json).unwrap();
    assert_eq!(cfg.sidedness, Sidedness::OneSided);
    let out = run_experiment(&cfg).unwrap();
    let text = serde_json::to_string(&out).unwrap();
    let back: fnc_core::simlab::ReplicationSummary = serde_json::from_str(&text).unwrap();
    assert_eq!(back.records.len(), 4);
    assert_eq!(back.config, cfg);
}
