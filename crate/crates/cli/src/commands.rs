use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use t2drisk::cohort::{ingest_reader, stratified_split_indices, write_csv, EncodedCohort, Subject};
use t2drisk::cox::{self, CoxModel, FitOptions};
use t2drisk::engine::PublishedModel;
use t2drisk::eval::{concordance_index, evaluate, forest_plot_csv};
use t2drisk::neural::{hyperparameter_search, train, NetConfig, NeuralCoxModel, SearchSpace};
use t2drisk::select::{backward_eliminate, clinical_review_filter, ReviewOverrides, SdRule, SelectOptions};
use t2drisk::synth::{generate, paper_preset, GeneratorConfig};

use crate::run::RunDir;
use crate::{Cli, Command, EvalArgs, FitArgs, PublishArgs, RuleArg, SelectArgs, ServeArgs, SynthArgs, TraindlArgs, UsageError};

pub fn run(cli: Cli) -> Result<()> {
    let seed = SeedFlag { value: cli.seed, strict: cli.strict };
    match cli.command {
        Command::Synth(a) => synth(a, seed),
        Command::Fit(a) => fit(a, seed),
        Command::Select(a) => select(a, seed),
        Command::Eval(a) => eval(a, seed),
        Command::Traindl(a) => traindl(a, seed),
        Command::Publish(a) => publish(a, seed),
        Command::Serve(a) => serve(a),
    }
}

#[derive(Clone, Copy)]
struct SeedFlag {
    value: Option<u64>,
    strict: bool,
}

impl SeedFlag {
    fn resolve(self, fallback: u64) -> Result<u64> {
        match (self.value, self.strict) {
            (Some(s), _) => Ok(s),
            (None, true) => Err(UsageError("--strict requires an explicit --seed".into()).into()),
            (None, false) => Ok(fallback),
        }
    }
}

fn read_text(run: &mut RunDir, role: &str, path: &Path) -> Result<String> {
    String::from_utf8(run.read_input(role, path)?).with_context(|| format!("{} is not UTF-8", path.display()))
}

fn load_cohort(run: &mut RunDir, path: &Path) -> Result<Vec<Subject>> {
    let bytes = run.read_input("cohort", path)?;
    let ingested = ingest_reader(bytes.as_slice()).with_context(|| format!("reading cohort {}", path.display()))?;
    if ingested.excluded > 0 {
        eprintln!("note: {} rows with missing values excluded", ingested.excluded);
    }
    Ok(ingested.subjects)
}

fn check_fraction(name: &str, f: f64) -> Result<()> {
    if !(f > 0.0 && f < 1.0) {
        return Err(UsageError(format!("--{name} must lie in (0, 1), got {f}")).into());
    }
    Ok(())
}

struct Split {
    train: EncodedCohort,
    test: EncodedCohort,
    test_rows: Vec<usize>,
}

/// Stratified split, then both parts standardized with training statistics.
fn split_standardized(subjects: &[Subject], test_fraction: f64, seed: u64) -> Result<Split> {
    let raw = EncodedCohort::from_subjects(subjects)?;
    let (train_rows, test_rows) = stratified_split_indices(&raw.events, test_fraction, seed)?;
    let train_raw = raw.select_rows(&train_rows);
    let s = train_raw.fit_standardization()?;
    Ok(Split { train: train_raw.standardized(&s)?, test: raw.select_rows(&test_rows).standardized(&s)?, test_rows })
}

fn csv_bytes(subjects: &[Subject]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_csv(&mut buf, subjects)?;
    Ok(buf)
}

#[derive(Serialize)]
struct SynthSettings {
    config: GeneratorConfig,
}

#[derive(Serialize)]
struct CohortSummary {
    n: usize,
    events: usize,
    event_rate: f64,
    baseline_rate: f64,
}

fn synth(a: SynthArgs, seed: SeedFlag) -> Result<()> {
    let mut run = RunDir::create(&a.out, "synth")?;
    let mut cfg = match &a.config {
        Some(p) => GeneratorConfig::from_toml_str(&read_text(&mut run, "config", p)?)?,
        None => paper_preset(),
    };
    cfg.seed = seed.resolve(cfg.seed)?;
    if let Some(n) = a.n {
        cfg.n = n;
    }
    let cohort = generate(&cfg)?;
    let events = cohort.subjects.iter().filter(|s| s.outcome.event).count();
    run.write("cohort.csv", csv_bytes(&cohort.subjects)?)?;
    run.write("config.toml", cfg.to_toml_string())?;
    let summary = CohortSummary {
        n: cohort.subjects.len(),
        events,
        event_rate: events as f64 / cohort.subjects.len() as f64,
        baseline_rate: cohort.baseline_rate,
    };
    run.write_json("summary.json", &summary)?;
    let dir = run.finish(&SynthSettings { config: cfg })?;
    println!("synth: {} subjects, {} events ({:.2}%) -> {}", summary.n, events, 100.0 * summary.event_rate, dir.display());
    Ok(())
}

#[derive(Serialize)]
struct FitSettings {
    seed: u64,
    test_fraction: f64,
    options: FitOptions,
}

/// Coefficient table: log hazard ratio, Wald interval and `-log2 p` per term.
fn coefficient_table(model: &CoxModel) -> Result<String> {
    let d = model.diagnostics.as_ref().context("model has no fit diagnostics")?;
    let mut s = String::from("feature,log_hazard_ratio,ci_low,ci_high,neg_log2_p,hazard_ratio,center,scale\n");
    for (k, name) in model.feature_names.iter().enumerate() {
        let b = model.coefficients[k];
        let t = model.standardization.columns[k];
        let _ = writeln!(s, "{name},{b},{},{},{},{},{},{}", d.ci95_low[k], d.ci95_high[k], d.neg_log2_p[k], b.exp(), t.center, t.scale);
    }
    Ok(s)
}

fn fit(a: FitArgs, seed: SeedFlag) -> Result<()> {
    check_fraction("test-fraction", a.test_fraction)?;
    let seed = seed.resolve(0)?;
    let mut run = RunDir::create(&a.out, "fit")?;
    let subjects = load_cohort(&mut run, &a.cohort)?;
    let split = split_standardized(&subjects, a.test_fraction, seed)?;
    let options = FitOptions { horizon: a.horizon, ridge: a.ridge, max_iter: a.max_iter, ..FitOptions::default() };
    let (model, diag) = cox::fit(&split.train, &options)?;
    if !diag.converged {
        eprintln!("warning: Newton iterations did not converge after {}", diag.iterations);
    }
    let test_subjects: Vec<Subject> = split.test_rows.iter().map(|&i| subjects[i].clone()).collect();
    run.write("model.json", model.to_json()? + "\n")?;
    run.write_json("diagnostics.json", &diag)?;
    run.write("coefficients.csv", coefficient_table(&model)?)?;
    run.write("test.csv", csv_bytes(&test_subjects)?)?;
    let dir = run.finish(&FitSettings { seed, test_fraction: a.test_fraction, options })?;
    println!(
        "fit: {} training subjects ({} events), {} iterations, log-likelihood {:.4} -> {}",
        split.train.n(),
        split.train.event_count(),
        diag.iterations,
        diag.final_loglik,
        dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct SelectSettings {
    seed: u64,
    folds: usize,
    rule: SdRule,
    ridge: f64,
}

#[derive(Serialize)]
struct SelectionReport {
    automatic: Vec<String>,
    removed: Vec<String>,
    overrides: Vec<t2drisk::select::OverrideRecord>,
    final_features: Vec<String>,
}

fn select(a: SelectArgs, seed: SeedFlag) -> Result<()> {
    let seed = seed.resolve(0)?;
    let mut run = RunDir::create(&a.out, "select")?;
    let overrides = match &a.config {
        Some(p) => toml::from_str::<ReviewOverrides>(&read_text(&mut run, "overrides", p)?)
            .map_err(|e| t2drisk::Error::InvalidConfig(e.to_string()))?,
        None => ReviewOverrides::default(),
    };
    let subjects = load_cohort(&mut run, &a.cohort)?;
    let cohort = t2drisk::cohort::encode(&subjects)?;
    let rule = match a.rule {
        RuleArg::Baseline => SdRule::Baseline,
        RuleArg::Candidate => SdRule::Candidate,
    };
    let fit = FitOptions { ridge: a.ridge, ..FitOptions::default() };
    let opts = SelectOptions { folds: a.folds, seed, rule, fit };
    let selection = backward_eliminate(&cohort, &opts)?;
    let universe: Vec<String> = cohort.feature_groups().into_iter().map(|(g, _)| g).collect();
    let (final_features, records) = clinical_review_filter(&selection.kept, &universe, &overrides)?;
    let mut ledger = Vec::new();
    selection.ledger.write_jsonl(&mut ledger)?;
    run.write("ledger.jsonl", ledger)?;
    let report = SelectionReport {
        removed: selection.ledger.removed().into_iter().map(String::from).collect(),
        automatic: selection.kept,
        overrides: records,
        final_features,
    };
    run.write_json("selection.json", &report)?;
    let dir = run.finish(&SelectSettings { seed, folds: a.folds, rule, ridge: a.ridge })?;
    println!(
        "select: kept {} of {} feature groups, removed [{}] -> {}",
        report.final_features.len(),
        universe.len(),
        report.removed.join(", "),
        dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct EvalSettings {
    seed: u64,
    bootstrap_rounds: usize,
    horizon: f64,
}

fn eval(a: EvalArgs, seed: SeedFlag) -> Result<()> {
    let seed = seed.resolve(0)?;
    let mut run = RunDir::create(&a.out, "eval")?;
    let model = CoxModel::from_json(&read_text(&mut run, "model", &a.model)?)?;
    let subjects = load_cohort(&mut run, &a.cohort)?;
    let scores = subjects.iter().map(|s| model.linear_predictor(&s.record)).collect::<t2drisk::Result<Vec<f64>>>()?;
    let risks = scores.iter().map(|&e| model.risk_from_eta(e, model.horizon)).collect::<t2drisk::Result<Vec<f64>>>()?;
    let times: Vec<f64> = subjects.iter().map(|s| s.outcome.time).collect();
    let events: Vec<bool> = subjects.iter().map(|s| s.outcome.event).collect();
    let report = evaluate(&times, &events, &scores, &risks, model.horizon, a.bootstrap_rounds, seed)?;
    run.write_json("report.json", &report)?;
    run.write("report.txt", report.render_text())?;
    run.write("calibration.csv", report.calibration_csv())?;
    if let Some(d) = &model.diagnostics {
        run.write("forest.csv", forest_plot_csv(&model.feature_names, &model.coefficients, &d.ci95_low, &d.ci95_high))?;
    }
    run.finish(&EvalSettings { seed, bootstrap_rounds: a.bootstrap_rounds, horizon: model.horizon })?;
    print!("{}", report.render_text());
    Ok(())
}

#[derive(Serialize)]
struct TraindlSettings {
    seed: u64,
    test_fraction: f64,
    search_trials: usize,
    validation_fraction: f64,
    config: NetConfig,
}

#[derive(Serialize)]
struct NeuralMetrics {
    train_n: usize,
    test_n: usize,
    test_c_index: f64,
    /// Linear Cox model fitted on the same training rows, for reference.
    cox_test_c_index: f64,
    final_loss: f64,
    skipped_batches: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    search_best_validation_c_index: Option<f64>,
}

fn traindl(a: TraindlArgs, seed: SeedFlag) -> Result<()> {
    check_fraction("test-fraction", a.test_fraction)?;
    check_fraction("validation-fraction", a.validation_fraction)?;
    let seed = seed.resolve(0)?;
    let mut run = RunDir::create(&a.out, "traindl")?;
    let mut cfg = match &a.config {
        Some(p) => toml::from_str::<NetConfig>(&read_text(&mut run, "config", p)?)
            .map_err(|e| t2drisk::Error::InvalidConfig(e.to_string()))?,
        None => NetConfig::default(),
    };
    cfg.seed = seed;
    cfg.validate()?;
    let subjects = load_cohort(&mut run, &a.cohort)?;
    let split = split_standardized(&subjects, a.test_fraction, seed)?;

    let mut search_best = None;
    if a.search_trials > 0 {
        let (fit_rows, val_rows) = stratified_split_indices(&split.train.events, a.validation_fraction, seed.wrapping_add(1))?;
        let outcome = hyperparameter_search(
            &split.train.select_rows(&fit_rows),
            &split.train.select_rows(&val_rows),
            &SearchSpace::published(),
            a.search_trials,
            seed,
        )?;
        let mut ledger = Vec::new();
        outcome.write_ledger(&mut ledger)?;
        run.write("search.jsonl", ledger)?;
        cfg = NetConfig { seed, ..outcome.best };
        search_best = Some(outcome.best_c_index);
    }

    let trained = train(&split.train, &cfg)?;
    let model = NeuralCoxModel::new(&split.train, trained.net);
    let scores = model.predict(&split.test)?;
    let test_c_index = concordance_index(&split.test.times, &split.test.events, &scores)?;
    let (beta, _) = cox::fit_coefficients(&split.train, &FitOptions::default())?;
    let cox_scores: Vec<f64> = split.test.matrix.rows().into_iter().map(|r| r.iter().zip(&beta).map(|(x, b)| x * b).sum()).collect();
    let cox_test_c_index = concordance_index(&split.test.times, &split.test.events, &cox_scores)?;

    let mut trace = String::from("epoch,loss,batches,skipped_batches\n");
    for r in &trained.trace {
        let _ = writeln!(trace, "{},{},{},{}", r.epoch, r.loss, r.batches, r.skipped_batches);
    }
    run.write("weights.ncox", model.to_bytes()?)?;
    run.write("loss_trace.csv", trace)?;
    run.write("netconfig.toml", toml::to_string(&cfg)?)?;
    let metrics = NeuralMetrics {
        train_n: split.train.n(),
        test_n: split.test.n(),
        test_c_index,
        cox_test_c_index,
        final_loss: trained.trace.last().map_or(f64::NAN, |r| r.loss),
        skipped_batches: trained.skipped_batches,
        search_best_validation_c_index: search_best,
    };
    run.write_json("metrics.json", &metrics)?;
    let dir = run.finish(&TraindlSettings {
        seed,
        test_fraction: a.test_fraction,
        search_trials: a.search_trials,
        validation_fraction: a.validation_fraction,
        config: cfg,
    })?;
    println!("traindl: test c-index {test_c_index:.4} (linear Cox {cox_test_c_index:.4}) -> {}", dir.display());
    Ok(())
}

#[derive(Serialize)]
struct PublishSettings {
    seed: u64,
    n: usize,
    target: f64,
    modifiable: Option<Vec<String>>,
}

fn publish(a: PublishArgs, seed: SeedFlag) -> Result<()> {
    let mut cfg = paper_preset();
    cfg.seed = seed.resolve(cfg.seed)?;
    if let Some(n) = a.n {
        cfg.n = n;
    }
    let mut run = RunDir::create(&a.out, "publish")?;
    let mut model = PublishedModel::build(&cfg, a.target)?;
    if let Some(fields) = &a.modifiable {
        let refs: Vec<&str> = fields.iter().map(String::as_str).collect();
        model = model.with_modifiable(&refs)?;
    }
    run.write("published-model.json", model.to_json()?)?;
    let dir = run.finish(&PublishSettings { seed: cfg.seed, n: cfg.n, target: a.target, modifiable: a.modifiable })?;
    println!(
        "publish: S0({}) = {:.6}, mean risk {:.4}% on {} reference subjects -> {}",
        model.horizon_years,
        model.baseline_survival,
        100.0 * model.calibration.achieved_mean_risk,
        cfg.n,
        dir.display()
    );
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let bytes = std::fs::read(&a.model).with_context(|| format!("reading {}", a.model.display()))?;
    let state = t2drisk_service::AppState::from_artifact(bytes).with_context(|| format!("loading {}", a.model.display()))?;
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    let config = t2drisk_service::ServiceConfig { cors_origins: a.cors_origins, access_log: a.access_log };
    let addr = std::net::SocketAddr::new(a.host, a.port);
    tokio::runtime::Runtime::new()?.block_on(t2drisk_service::serve(addr, state, &config))?;
    Ok(())
}
