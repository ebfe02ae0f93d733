use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::Args;
use modwatch_core::corpus::{sample_comments, Corpus, IngestReport, RecordKind, Tokenizer};
use modwatch_core::distance::{evolution_series, group_ks, EvolutionSeries};
use modwatch_core::features::{
    read_feature_csv, write_feature_csv, FeatureConfig, FeatureContext, FeatureRow, Lexicon,
    LexiconScoreMode, LexiconScorer, ScorerPlugin,
};
use modwatch_core::impact::{joining_impact, ImpactMetric, MetricContext};
use modwatch_core::models::{
    evaluate as evaluate_model, odds_ratios, protocol_run, simulate_continuous, window_dataset,
    ModelArtifact, ModelFlagger, ModelKind, SimulationConfig, Window,
};
use modwatch_core::sampling::SamplingStrategy;
use modwatch_core::synth::{generate as synthesize, SynthConfig};
use modwatch_core::vectors::{
    active_user_vectors, build_documents, build_token_corpus, vocabulary_vectors, write_sidecars,
    VectorKind, VectorSet,
};
use modwatch_core::MonthWindow;
use modwatch_service::{
    router, serve as serve_http, CorpusSource, EvolutionOptions, Service, ServiceConfig,
    ServiceError,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{Provenance, RunConfig};
use crate::CliError;

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn window(config: &RunConfig) -> Result<MonthWindow, CliError> {
    MonthWindow::new(config.corpus.start, config.corpus.end)
        .map_err(|e| CliError::Config(e.to_string()))
}

/// Ingest every `<kind>s.ndjson` present in the corpus directory.
fn load_corpus(
    config: &RunConfig,
) -> Result<(Corpus, BTreeMap<RecordKind, IngestReport>), CliError> {
    config.validate()?;
    let dir = &config.corpus.dir;
    if !dir.is_dir() {
        return Err(CliError::Config(format!(
            "corpus directory {} does not exist",
            dir.display()
        )));
    }
    let mut corpus = Corpus::new(window(config)?);
    let mut reports = BTreeMap::new();
    for kind in RecordKind::ALL {
        let path = dir.join(format!("{kind}s.ndjson"));
        if !path.exists() {
            log::info!("no {}", path.display());
            continue;
        }
        let report = corpus.ingest_events(BufReader::new(File::open(&path)?), kind)?;
        if report.skipped > 0 {
            log::warn!(
                "{}: skipped {} of {} records",
                path.display(),
                report.skipped,
                report.accepted + report.skipped
            );
        }
        reports.insert(kind, report);
    }
    Ok((corpus, reports))
}

fn scorer(config: &RunConfig) -> Result<Arc<dyn ScorerPlugin>, CliError> {
    let mode = match config.features.scorer_mode.as_str() {
        "hit_rate" => LexiconScoreMode::HitRate,
        _ => LexiconScoreMode::Indicator,
    };
    Ok(match &config.features.toxic_lexicon {
        Some(path) => {
            let tk = Tokenizer::default();
            let words = Lexicon::from_path(path, &tk)?;
            Arc::new(LexiconScorer::new(&words.name.clone(), words, tk, mode))
        }
        None => Arc::new(LexiconScorer::default_toxic().with_mode(mode)),
    })
}

fn feature_context<'a>(
    config: &RunConfig,
    corpus: &'a Corpus,
) -> Result<FeatureContext<'a>, CliError> {
    let tk = Tokenizer::default();
    let lexicon = match &config.features.lexicon {
        Some(path) => Lexicon::from_path(path, &tk)?,
        None => Lexicon::demo(&tk),
    };
    Ok(FeatureContext::builder(corpus)
        .lexicon(lexicon)
        .scorer(scorer(config)?)
        .config(FeatureConfig {
            sample_fraction: config.sampling.fraction,
            sample_seed: config.sampling.seed,
            toxicity_threshold: config.features.toxicity_threshold,
        })
        .build()?)
}

fn vectors(config: &RunConfig, corpus: &Corpus, kind: VectorKind) -> Result<VectorSet, CliError> {
    let states = corpus.build_states();
    Ok(match kind {
        VectorKind::User => {
            active_user_vectors(states.iter().map(|(id, s)| (id, &s.active_users))).into_set()
        }
        VectorKind::Vocabulary => {
            let sample = sample_comments(
                corpus.comments(),
                config.sampling.fraction,
                config.sampling.seed,
            )?;
            let docs = build_documents(corpus, &states, &sample, &Tokenizer::default());
            let tc = build_token_corpus(&docs, corpus.window().end)?;
            vocabulary_vectors(&docs, &tc)
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    Default,
    PolicyShift,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value = "default")]
    preset: Preset,
}

/// Writes `corpus/*.ndjson`, `synth.json` and a `modwatch.toml` pointing at them.
pub fn generate(config: RunConfig, args: GenerateArgs, out: &Path) -> Result<(), CliError> {
    let synth_config = SynthConfig {
        seed: config.seed,
        ..match args.preset {
            Preset::Default => SynthConfig::default(),
            Preset::PolicyShift => SynthConfig::policy_shift(),
        }
    };
    let synth = synthesize(&synth_config);
    synth.records.write_dir(&out.join("corpus"))?;
    let mut run = config.clone();
    run.corpus.dir = PathBuf::from("corpus");
    run.corpus.start = synth.window.start;
    run.corpus.end = synth.window.end;
    run.distance.group = synth.problematic.iter().cloned().collect();
    fs::write(
        out.join("modwatch.toml"),
        toml::to_string(&run).map_err(|e| CliError::Config(e.to_string()))?,
    )?;
    write_json(
        &out.join("synth.json"),
        &json!({
            "provenance": Provenance::new("generate", &config),
            "synth_config": synth_config,
            "window": synth.window,
            "comments": synth.records.comments.len(),
            "studied": synth.studied,
            "problematic": synth.problematic,
            "shifted": synth.shifted,
            "legacy": synth.legacy,
        }),
    )
}

pub fn ingest(config: RunConfig, out: &Path) -> Result<(), CliError> {
    let (corpus, reports) = load_corpus(&config)?;
    let states = corpus.build_states();
    fs::create_dir_all(out)?;
    write_json(
        &out.join("ingest.json"),
        &json!({
            "provenance": Provenance::new("ingest", &config),
            "window": corpus.window(),
            "reports": reports.iter().map(|(k, r)| (k.as_str(), r)).collect::<BTreeMap<_, _>>(),
            "states": states.len(),
            "subreddits": states.subreddits().len(),
            "interventions": corpus.intervention_months(),
        }),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum KindArg {
    Vocabulary,
    User,
    Both,
}

impl KindArg {
    fn kinds(self) -> Vec<VectorKind> {
        match self {
            Self::Vocabulary => vec![VectorKind::Vocabulary],
            Self::User => vec![VectorKind::User],
            Self::Both => vec![VectorKind::Vocabulary, VectorKind::User],
        }
    }
}

#[derive(Debug, Args)]
pub struct VectorizeArgs {
    #[arg(long, value_enum, default_value = "both")]
    kind: KindArg,
}

pub fn vectorize(config: RunConfig, args: VectorizeArgs, out: &Path) -> Result<(), CliError> {
    let (corpus, _) = load_corpus(&config)?;
    let dir = out.join("vectors");
    let mut summary = BTreeMap::new();
    for kind in args.kind.kinds() {
        let set = vectors(&config, &corpus, kind)?;
        let files = write_sidecars(&set, &dir)?;
        summary.insert(
            kind.as_str(),
            json!({"states": set.vectors.len(), "dim": set.dim, "months": files.len()}),
        );
    }
    write_json(
        &out.join("vectorize.json"),
        &json!({"provenance": Provenance::new("vectorize", &config), "kinds": summary}),
    )
}

#[derive(Debug, Args)]
pub struct DistancesArgs {
    /// Defaults to the config's distance.kind.
    #[arg(long)]
    kind: Option<VectorKind>,
    /// RBO persistence; defaults to the config's distance.persistence.
    #[arg(long)]
    p: Option<f64>,
}

/// Writes `distances_<kind>.csv` (one row per consecutive month pair) and
/// `distances_<kind>.json` with the KS comparison of the group against the rest.
pub fn distances(mut config: RunConfig, args: DistancesArgs, out: &Path) -> Result<(), CliError> {
    if let Some(k) = args.kind {
        config.distance.kind = k;
    }
    if let Some(p) = args.p {
        config.distance.persistence = p;
    }
    let (corpus, _) = load_corpus(&config)?;
    let kind = config.distance.kind;
    let set = vectors(&config, &corpus, kind)?;
    let subs: BTreeSet<String> = set.vectors.keys().map(|s| s.subreddit.clone()).collect();
    let series: Vec<EvolutionSeries> = subs
        .iter()
        .map(|s| evolution_series(s, &set, config.distance.persistence))
        .collect::<Result<_, _>>()?;
    let group: BTreeSet<String> = if config.distance.group.is_empty() {
        corpus.intervention_months().into_keys().collect()
    } else {
        config.distance.group.iter().cloned().collect()
    };
    fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join(format!("distances_{}.csv", kind.as_str())))?;
    w.write_record(["subreddit", "month_from", "month_to", "rbo_distance"])?;
    for s in &series {
        for p in &s.points {
            w.write_record([
                s.subreddit.clone(),
                p.month_from.to_string(),
                p.month_to.to_string(),
                p.rbo_distance.to_string(),
            ])?;
        }
    }
    w.flush()?;
    let ks = match group_ks(&series, &group) {
        Ok(r) => Some(r),
        Err(e) => {
            log::warn!("no KS comparison: {e}");
            None
        }
    };
    write_json(
        &out.join(format!("distances_{}.json", kind.as_str())),
        &json!({
            "provenance": Provenance::new("distances", &config),
            "kind": kind,
            "persistence": config.distance.persistence,
            "group": group,
            "ks": ks,
            "mean_distance": series.iter().map(|s| (s.subreddit.as_str(), s.mean_distance())).collect::<BTreeMap<_, _>>(),
        }),
    )
}

pub fn features(config: RunConfig, out: &Path) -> Result<(), CliError> {
    let (corpus, _) = load_corpus(&config)?;
    let ctx = feature_context(&config, &corpus)?;
    let (rows, errors) = ctx.extract_all();
    fs::create_dir_all(out)?;
    write_feature_csv(
        &rows,
        BufWriter::new(File::create(out.join("features.csv"))?),
    )?;
    let schema = modwatch_core::features::FeatureSchema::of_rows(&rows)?;
    write_json(
        &out.join("features.json"),
        &json!({
            "provenance": Provenance::new("features", &config),
            "rows": rows.len(),
            "schema": schema,
            "skipped": errors.iter().map(|(s, e)| (s.clone(), e.to_string())).collect::<BTreeMap<_, _>>(),
        }),
    )
}

fn read_rows(path: &Path) -> Result<Vec<FeatureRow>, CliError> {
    let f = File::open(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(read_feature_csv(BufReader::new(f))?)
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Feature table; defaults to `<out>/features.csv`.
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    model: Option<ModelKind>,
    /// Q1, Q1+Q2, Q1+Q2+Q3 or Total.
    #[arg(long)]
    window: Option<Window>,
    /// none, random_oversample, adasyn or ensemble_undersample.
    #[arg(long)]
    sampling: Option<SamplingStrategy>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SavedModel {
    run_config_hash: String,
    artifact_hash: String,
    artifact: ModelArtifact,
}

pub fn train(mut config: RunConfig, args: TrainArgs, out: &Path) -> Result<(), CliError> {
    if let Some(m) = args.model {
        config.model.kind = m;
    }
    if let Some(w) = args.window {
        config.model.window = w;
    }
    if let Some(s) = args.sampling {
        config.model.sampling = s;
    }
    let rows = read_rows(&args.features.unwrap_or_else(|| out.join("features.csv")))?;
    let m = &config.model;
    let (report, artifact) = protocol_run(
        &rows,
        m.window,
        m.kind,
        &m.hyperparameters,
        m.sampling,
        config.seed,
    )?;
    let mut top: Vec<(&String, &f64)> = report.base_importances.iter().collect();
    top.sort_by(|a, b| b.1.total_cmp(a.1).then_with(|| a.0.cmp(b.0)));
    let odds = odds_ratios(&artifact).ok();
    fs::create_dir_all(out)?;
    write_json(
        &out.join("model.json"),
        &SavedModel {
            run_config_hash: config.hash(),
            artifact_hash: artifact.hash(),
            artifact,
        },
    )?;
    write_json(
        &out.join("protocol.json"),
        &json!({
            "provenance": Provenance::new("train", &config),
            "report": report,
            "top_base_importances": top.into_iter().take(5).collect::<Vec<_>>(),
            "odds_ratios": odds,
        }),
    )
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Saved model; defaults to `<out>/model.json`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Feature table; defaults to `<out>/features.csv`.
    #[arg(long)]
    features: Option<PathBuf>,
}

pub fn evaluate(config: RunConfig, args: EvaluateArgs, out: &Path) -> Result<(), CliError> {
    let model_path = args.model.unwrap_or_else(|| out.join("model.json"));
    let saved: SavedModel = serde_json::from_slice(
        &fs::read(&model_path)
            .map_err(|e| CliError::Config(format!("{}: {e}", model_path.display())))?,
    )?;
    let artifact = saved.artifact;
    let window: Window = match &artifact.metadata.training_window {
        Some(w) => w.parse().map_err(CliError::Config)?,
        None => config.model.window,
    };
    let rows = read_rows(&args.features.unwrap_or_else(|| out.join("features.csv")))?;
    let wd = window_dataset(&rows, window)?;
    // reorder columns to the artifact's schema
    let columns: Vec<usize> = artifact
        .schema
        .names
        .iter()
        .map(|n| {
            wd.schema
                .names
                .iter()
                .position(|m| m == n)
                .ok_or_else(|| CliError::Config(format!("feature {n} missing from the table")))
        })
        .collect::<Result<_, _>>()?;
    let data: Vec<Vec<f64>> = wd
        .data
        .rows
        .iter()
        .map(|r| columns.iter().map(|&i| r[i]).collect())
        .collect();
    let mut report = evaluate_model(
        &artifact,
        &data,
        &wd.data.labels,
        config.model.hyperparameters.threshold,
    )?;
    report.window = Some(window);
    fs::create_dir_all(out)?;
    write_json(
        &out.join("evaluation.json"),
        &json!({
            "provenance": Provenance::new("evaluate", &config),
            "model_artifact_hash": artifact.hash(),
            "subreddits": wd.subreddits.len(),
            "report": report,
        }),
    )
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    model: Option<ModelKind>,
    #[arg(long)]
    sampling: Option<SamplingStrategy>,
}

pub fn simulate(mut config: RunConfig, args: SimulateArgs, out: &Path) -> Result<(), CliError> {
    if let Some(m) = args.model {
        config.model.kind = m;
    }
    if let Some(s) = args.sampling {
        config.model.sampling = s;
    }
    let (corpus, _) = load_corpus(&config)?;
    let ctx = feature_context(&config, &corpus)?;
    let m = &config.model;
    let mut flagger = ModelFlagger::new(m.kind, m.hyperparameters, m.sampling, config.seed);
    let s = config.simulate;
    let ledger = simulate_continuous(
        &ctx,
        &mut flagger,
        SimulationConfig {
            initial_start: s.initial_start,
            initial_end: s.initial_end,
            start: s.start,
            end: s.end,
            threshold: m.hyperparameters.threshold,
        },
    )?;
    fs::create_dir_all(out)?;
    let mut log = BufWriter::new(File::create(out.join("training_log.ndjson"))?);
    for e in &ledger.log {
        serde_json::to_writer(&mut log, e)?;
        log.write_all(b"\n")?;
    }
    log.flush()?;
    write_json(
        &out.join("simulation.json"),
        &json!({
            "provenance": Provenance::new("simulate", &config),
            "mean_lead_time": ledger.mean_lead_time(),
            "ledger": ledger,
        }),
    )
}

#[derive(Debug, Args)]
pub struct ImpactArgs {
    /// Community whose joiners are studied; defaults to impact.community.
    #[arg(long)]
    community: Option<String>,
    #[arg(long)]
    metric: Option<ImpactMetric>,
    /// Months either side of the joining month.
    #[arg(long)]
    k: Option<i64>,
}

pub fn impact(mut config: RunConfig, args: ImpactArgs, out: &Path) -> Result<(), CliError> {
    if let Some(c) = args.community {
        config.impact.community = Some(c);
    }
    if let Some(m) = args.metric {
        config.impact.metric = m;
    }
    if let Some(k) = args.k {
        config.impact.k = k;
    }
    let community = config.impact.community.clone().ok_or_else(|| {
        CliError::Config("no community given (--community or impact.community)".into())
    })?;
    let (corpus, _) = load_corpus(&config)?;
    let scorer = scorer(&config)?;
    let intervened: BTreeSet<String> = corpus.intervention_months().into_keys().collect();
    let ctx = MetricContext {
        scorer: scorer.as_ref(),
        threshold: config.features.toxicity_threshold,
        intervened: &intervened,
    };
    let study = joining_impact(
        &corpus,
        &community,
        config.impact.metric,
        config.impact.k,
        config.impact.lsh,
        &ctx,
    )?;
    fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("impact.csv"))?;
    w.write_record([
        "offset",
        "treatment",
        "control",
        "treatment_active",
        "control_active",
    ])?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for p in &study.series.points {
        w.write_record([
            p.offset.to_string(),
            opt(p.treatment),
            opt(p.control),
            p.treatment_active.to_string(),
            p.control_active.to_string(),
        ])?;
    }
    w.flush()?;
    write_json(
        &out.join("impact.json"),
        &json!({"provenance": Provenance::new("impact", &config), "study": study}),
    )
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    addr: Option<String>,
    /// Event log and snapshot directory.
    #[arg(long)]
    state_dir: Option<PathBuf>,
    /// Required in the token header of every POST when set.
    #[arg(long)]
    token: Option<String>,
}

pub fn serve(mut config: RunConfig, args: ServeArgs) -> Result<(), CliError> {
    if let Some(a) = args.addr {
        config.serve.addr = a;
    }
    if let Some(d) = args.state_dir {
        config.serve.state_dir = d;
    }
    if args.token.is_some() {
        config.serve.token = args.token;
    }
    let (corpus, _) = load_corpus(&config)?;
    // the source borrows the corpus for the life of the process
    let corpus: &'static Corpus = Box::leak(Box::new(corpus));
    let ctx = feature_context(&config, corpus)?;
    let source = Arc::new(CorpusSource::new(
        ctx,
        EvolutionOptions {
            sample_fraction: config.sampling.fraction,
            sample_seed: config.sampling.seed,
            persistence: config.distance.persistence,
        },
    ));
    let dir = config.serve.state_dir.clone();
    let service = match Service::open(source.clone(), &dir) {
        Ok(s) => {
            log::info!(
                "replayed {} events from {}",
                s.state().events,
                dir.display()
            );
            s
        }
        Err(ServiceError::NotFound(_)) => {
            let m = &config.model;
            let service_config = ServiceConfig {
                initial_start: config.simulate.initial_start,
                initial_end: config.simulate.initial_end,
                kind: m.kind,
                hyper: m.hyperparameters,
                sampling: m.sampling,
                seed: config.seed,
                threshold: m.hyperparameters.threshold,
                top_factors: config.serve.top_factors,
                snapshot_every: config.serve.snapshot_every,
            };
            Service::bootstrap(source, service_config, Some(&dir), chrono::Utc::now())?
        }
        Err(e) => return Err(e.into()),
    };
    let app = router(service, config.serve.token.clone());
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&config.serve.addr).await?;
        // port 0 binds anywhere, so report where
        println!(
            "{}",
            json!({"listening": listener.local_addr()?.to_string()})
        );
        std::io::stdout().flush()?;
        serve_http(listener, app).await
    })?;
    Ok(())
}
