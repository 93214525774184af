use gridcast::config::RunConfig;
use gridcast::eval::{mae, metrics_csv, run_backtest, write_report, ModelKind};
use gridcast::{Error, ErrorCategory};

fn small_config() -> RunConfig {
    RunConfig::from_json_str(
        r#"{
            "data": {"synth": {"n_hours": 700, "seed": 5}},
            "features": {"lookback": 48, "horizon": 24, "price_lags": [1, 2, 24, 48], "exog_lags": [1, 24]},
            "kan": {"hidden": [8], "train": {"max_steps": 30, "patience": 10, "learning_rate": 0.01}},
            "gbt": {"n_estimators": 10, "max_depth": 3},
            "backtest": {"n_folds": 4, "fold_len": 24},
            "seed": 3
        }"#,
    )
    .unwrap()
}

#[test]
fn report_structure_and_pooling() {
    let cfg = small_config();
    let ds = cfg.load_dataset().unwrap();
    let report = run_backtest(&ds, &cfg.plan()).unwrap();

    assert_eq!(report.models, ModelKind::ALL.to_vec());
    assert_eq!(report.folds.len(), 4);
    for f in &report.folds {
        assert_eq!(f.metrics.len(), 6);
        assert_eq!(f.actual.len(), 24);
        assert!(f.validation.hybrid <= f.validation.kan.min(f.validation.gbt));
    }
    assert_eq!(report.pooled.len(), 6);
    assert_eq!(report.extremes.len(), 6);
    assert_eq!(report.pooled[&ModelKind::Naive].rmae, Some(1.0));
    assert_eq!(report.ablation.len(), 7);
    assert!(report
        .ablation
        .windows(2)
        .all(|w| w[0].metrics.mae <= w[1].metrics.mae));

    // pooled MAE is the sample-weighted mean of fold MAEs
    for m in ModelKind::ALL {
        let weighted: f64 = report
            .folds
            .iter()
            .map(|f| f.metrics[&m].mae * f.actual.len() as f64)
            .sum::<f64>()
            / 96.0;
        assert!((weighted - report.pooled[&m].mae).abs() < 1e-9 * weighted.max(1.0));
    }

    // ablation rows are recomputed independently from the stored forecasts
    let actual: Vec<f64> = report.folds.iter().flat_map(|f| f.actual.clone()).collect();
    let kan: Vec<f64> = report
        .folds
        .iter()
        .flat_map(|f| f.forecasts[&ModelKind::Kan].clone())
        .collect();
    let gbt: Vec<f64> = report
        .folds
        .iter()
        .flat_map(|f| f.forecasts[&ModelKind::Gbt].clone())
        .collect();
    for row in &report.ablation {
        let blend: Vec<f64> = kan
            .iter()
            .zip(&gbt)
            .map(|(k, g)| (row.alpha_kan * k.asinh() + row.alpha_gbt * g.asinh()).sinh())
            .collect();
        let expected = mae(&blend, &actual).unwrap();
        assert!((expected - row.metrics.mae).abs() < 1e-6 * expected.max(1.0));
    }

    let exceed = &report.extremes[&ModelKind::Naive];
    assert!((exceed.exceedance_count as f64 - 0.05 * 96.0).abs() <= 1.0);
}

#[test]
fn model_filter_restricts_the_report() {
    let mut cfg = small_config();
    cfg.models = vec![ModelKind::Naive, ModelKind::Hybrid];
    let ds = cfg.load_dataset().unwrap();
    let report = run_backtest(&ds, &cfg.plan()).unwrap();
    assert_eq!(report.models, vec![ModelKind::Hybrid, ModelKind::Naive]);
    assert!(report
        .folds
        .iter()
        .all(|f| f.metrics.len() == 2 && f.forecasts.len() == 2));
    let keys: Vec<_> = report.pooled.keys().copied().collect();
    assert_eq!(keys, vec![ModelKind::Hybrid, ModelKind::Naive]);
    assert_eq!(metrics_csv(&report).lines().count(), 1 + 4 * 2 + 2);
}

#[test]
fn outputs_are_written_and_repeatable() {
    let cfg = small_config();
    let ds = cfg.load_dataset().unwrap();
    let a = run_backtest(&ds, &cfg.plan()).unwrap();
    let b = run_backtest(&ds, &cfg.plan()).unwrap();
    assert_eq!(metrics_csv(&a), metrics_csv(&b));

    let dir = tempfile::tempdir().unwrap();
    let written = write_report(&a, dir.path()).unwrap();
    assert_eq!(written.len(), 2 + 4);
    for k in 0..4 {
        let svg = std::fs::read_to_string(dir.path().join(format!("SYNTH_fold{k}.svg"))).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("polyline"));
    }
    let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert!(csv.starts_with("fold,model,mae,rmse,rmae\n"));
    assert_eq!(csv.lines().count(), 1 + 4 * 6 + 6);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    let pooled = json["pooled"].as_object().unwrap();
    for name in [
        "kan",
        "gbt",
        "hybrid",
        "naive",
        "seasonal_naive",
        "linear_arx",
    ] {
        assert!(pooled.contains_key(name), "{name}");
    }
    assert_eq!(json["metadata"]["region"], "SYNTH");
}

#[test]
fn seed_changes_learned_models_only() {
    let cfg = small_config();
    let ds = cfg.load_dataset().unwrap();
    let a = run_backtest(&ds, &cfg.plan()).unwrap();
    let mut other = cfg.clone();
    other.seed = 4;
    let b = run_backtest(&ds, &other.plan()).unwrap();
    assert_eq!(a.pooled[&ModelKind::Naive], b.pooled[&ModelKind::Naive]);
    assert_ne!(a.folds[0].parameter_hash, b.folds[0].parameter_hash);
}

#[test]
fn fold_errors_carry_the_fold_index() {
    let mut cfg = small_config();
    cfg.features.exog = Some(vec!["cloud_cover".into()]);
    let ds = cfg.load_dataset().unwrap();
    match run_backtest(&ds, &cfg.plan()) {
        Err(e @ Error::Fold { .. }) => assert_eq!(e.category(), ErrorCategory::Data),
        other => panic!("{other:?}"),
    }
}

#[test]
fn too_short_for_the_folds() {
    let mut cfg = small_config();
    cfg.backtest.n_folds = 30;
    let ds = cfg.load_dataset().unwrap();
    assert!(matches!(
        run_backtest(&ds, &cfg.plan()),
        Err(Error::TooShort { .. })
    ));
}
