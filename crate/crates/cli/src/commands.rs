//! Subcommand runners and the error-to-exit-code mapping.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use thiserror::Error;

use pdstream::{
    batch_pdp, eval_points, Dataset, DriftSchedule, FiDriftPipeline, HyperplaneConcept,
    HyperplaneGenerator, IncrementalModel, MultiExplainer, PdpConfig, SgdLinear, SgdLogistic,
    StaticModel, StreamError, StreamRecord,
};

use crate::config::{
    parse_type_map, BatchConfig, GenerateConfig, ModelSpec, RunConfig, SourceSpec, TrainOrder,
};
use crate::CommonArgs;

/// Errors grouped by exit code: 2 config, 3 ingestion, 4 runtime.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("ingestion failed")]
    Ingestion(#[source] StreamError),
    #[error("run failed: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Ingestion(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }

    fn config(err: impl std::fmt::Display) -> Self {
        CliError::Config(err.to_string())
    }

    fn runtime(err: impl std::fmt::Display) -> Self {
        CliError::Runtime(err.to_string())
    }
}

fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let contents = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read `{}`: {e}", path.display())))?;
    serde_json::from_str(&contents)
        .map_err(|e| CliError::Config(format!("cannot parse `{}`: {e}", path.display())))
}

enum Source {
    Hyperplane { schedule: DriftSchedule, steps: u64 },
    Pure { generator: HyperplaneGenerator, steps: u64 },
    Csv(pdstream::CsvSource),
}

impl Source {
    fn schema(&self) -> Vec<String> {
        match self {
            Source::Hyperplane { schedule, .. } => schedule.schema(),
            Source::Pure { generator, .. } => generator.schema(),
            Source::Csv(source) => source.schema().to_vec(),
        }
    }
}

impl Iterator for Source {
    type Item = Result<StreamRecord, StreamError>;

    fn next(&mut self) -> Option<Self::Item> {
        match self {
            Source::Hyperplane { schedule, steps } => {
                let (record, _) = schedule.next_with_noise();
                (record.t <= *steps).then_some(Ok(record))
            }
            Source::Pure { generator, steps } => {
                let (record, _) = generator.next_with_noise();
                (record.t <= *steps).then_some(Ok(record))
            }
            Source::Csv(source) => source.next(),
        }
    }
}

fn build_source(spec: &SourceSpec, seed: u64) -> Result<Source, CliError> {
    match spec {
        SourceSpec::Hyperplane {
            steps,
            switch_at,
            concept_a,
            concept_b,
        } => {
            let a = concept_a
                .as_ref()
                .map(|c| c.apply(HyperplaneConcept::concept_a()))
                .unwrap_or_else(HyperplaneConcept::concept_a);
            let b = concept_b
                .as_ref()
                .map(|c| c.apply(HyperplaneConcept::concept_b()))
                .unwrap_or_else(HyperplaneConcept::concept_b);
            match switch_at {
                Some(switch_at) => Ok(Source::Hyperplane {
                    schedule: DriftSchedule::new(a, b, *switch_at, seed)
                        .map_err(CliError::config)?,
                    steps: *steps,
                }),
                None => Ok(Source::Pure {
                    generator: HyperplaneGenerator::new(a, seed).map_err(CliError::config)?,
                    steps: *steps,
                }),
            }
        }
        SourceSpec::Csv {
            path,
            target,
            types,
        } => {
            let types = parse_type_map(types).map_err(CliError::config)?;
            let source =
                pdstream::CsvSource::open(path, target, &types).map_err(CliError::Ingestion)?;
            Ok(Source::Csv(source))
        }
    }
}

fn build_model(spec: &ModelSpec, schema: &[String]) -> Result<Box<dyn IncrementalModel>, CliError> {
    match spec {
        ModelSpec::SgdLogistic { learning_rate } => Ok(Box::new(
            SgdLogistic::with_learning_rate(schema.iter().cloned(), *learning_rate)
                .map_err(CliError::config)?,
        )),
        ModelSpec::SgdLinear { learning_rate } => Ok(Box::new(
            SgdLinear::with_learning_rate(schema.iter().cloned(), *learning_rate)
                .map_err(CliError::config)?,
        )),
        ModelSpec::Constant { value } => {
            let value = *value;
            Ok(Box::new(StaticModel::from_fn(move |_| value)))
        }
    }
}

struct PreparedRun {
    source: Source,
    model: Box<dyn IncrementalModel>,
    explainer: MultiExplainer,
    features: Vec<String>,
    cadence: u64,
    order: TrainOrder,
    detector_delta: f64,
    detector_max_buckets: usize,
    out: PathBuf,
}

fn prepare_run(args: &CommonArgs) -> Result<PreparedRun, CliError> {
    let mut cfg: RunConfig = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    if let Some(cadence) = args.cadence {
        cfg.cadence = cadence;
    }
    if let Some(alpha) = args.alpha {
        cfg.pdp.alpha = alpha;
    }
    if let Some(grid_size) = args.grid_size {
        cfg.pdp.grid_size = grid_size;
    }
    if cfg.cadence == 0 {
        return Err(CliError::Config("cadence must be at least 1".to_owned()));
    }
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| CliError::Config("output path required (config `out` or --out)".to_owned()))?;

    let source = build_source(&cfg.source, cfg.seed)?;
    let schema = source.schema();
    let features = match &cfg.features {
        Some(features) => {
            for f in features {
                if !schema.contains(f) {
                    return Err(CliError::Config(format!(
                        "feature `{f}` is not in the source schema {schema:?}"
                    )));
                }
            }
            features.clone()
        }
        None => schema.clone(),
    };
    let model = build_model(&cfg.model, &schema)?;
    for feature in cfg.pdp_overrides.keys() {
        if !features.contains(feature) {
            return Err(CliError::Config(format!(
                "pdp override for `{feature}` does not match an explained feature"
            )));
        }
    }
    let feature_configs = features
        .iter()
        .map(|feature| {
            let spec = cfg.pdp_overrides.get(feature).unwrap_or(&cfg.pdp);
            PdpConfig::new(spec.alpha, spec.grid_size, spec.range.to_strategy(), cfg.seed)
                .map(|c| (feature.clone(), c))
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::config)?;
    let explainer =
        MultiExplainer::with_feature_configs(feature_configs).map_err(CliError::config)?;

    Ok(PreparedRun {
        source,
        model,
        explainer,
        features,
        cadence: cfg.cadence,
        order: cfg.order,
        detector_delta: cfg.detector.delta,
        detector_max_buckets: cfg.detector.max_buckets,
        out,
    })
}

fn create_writer(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Runtime(format!("cannot create `{}`: {e}", path.display())))
}

enum Sink {
    Frames,
    Events(FiDriftPipeline),
}

fn run_loop(mut run: PreparedRun, mut sink: Sink) -> Result<(), CliError> {
    let mut writer = create_writer(&run.out)?;
    for record in run.source.by_ref() {
        let record = record.map_err(CliError::Ingestion)?;
        let frames = match run.order {
            TrainOrder::ExplainThenTrain => {
                let frames = run
                    .explainer
                    .observe(&*run.model, &record.x)
                    .map_err(CliError::runtime)?;
                run.model
                    .learn_one(&record.x, record.y)
                    .map_err(CliError::runtime)?;
                frames
            }
            TrainOrder::TrainThenExplain => {
                run.model
                    .learn_one(&record.x, record.y)
                    .map_err(CliError::runtime)?;
                run.explainer
                    .observe(&*run.model, &record.x)
                    .map_err(CliError::runtime)?
            }
        };
        for feature in &run.features {
            let Some(frame) = frames.get(feature) else {
                continue;
            };
            match &mut sink {
                Sink::Frames => {
                    if frame.t % run.cadence == 0 {
                        let line = serde_json::to_string(frame).map_err(CliError::runtime)?;
                        writeln!(writer, "{line}").map_err(CliError::runtime)?;
                    }
                }
                Sink::Events(pipeline) => {
                    if let Some(event) = pipeline.push(frame).map_err(CliError::runtime)? {
                        let line = serde_json::to_string(&event).map_err(CliError::runtime)?;
                        writeln!(writer, "{line}").map_err(CliError::runtime)?;
                    }
                }
            }
        }
    }
    writer.flush().map_err(CliError::runtime)
}

pub fn run_explain(args: &CommonArgs) -> Result<(), CliError> {
    let run = prepare_run(args)?;
    run_loop(run, Sink::Frames)
}

pub fn run_detect(args: &CommonArgs) -> Result<(), CliError> {
    let run = prepare_run(args)?;
    let pipeline =
        FiDriftPipeline::new(run.detector_delta, run.detector_max_buckets).map_err(CliError::config)?;
    run_loop(run, Sink::Events(pipeline))
}

pub fn run_batch_pdp(args: &CommonArgs) -> Result<(), CliError> {
    let mut cfg: BatchConfig = load_config(&args.config)?;
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    if let Some(grid_size) = args.grid_size {
        cfg.grid_size = grid_size;
    }
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| CliError::Config("output path required (config `out` or --out)".to_owned()))?;

    let types = parse_type_map(&cfg.data.types).map_err(CliError::config)?;
    let source = pdstream::CsvSource::open(&cfg.data.path, &cfg.data.target, &types)
        .map_err(CliError::Ingestion)?;
    let schema = source.schema().to_vec();
    let records: Vec<StreamRecord> = source
        .collect::<Result<_, _>>()
        .map_err(CliError::Ingestion)?;

    let mut model = build_model(&cfg.model, &schema)?;
    // one training pass in stream order
    for record in &records {
        model
            .learn_one(&record.x, record.y)
            .map_err(CliError::runtime)?;
    }

    let dataset = Dataset::new(records.into_iter().map(|r| r.x).collect())
        .map_err(CliError::runtime)?;
    let (min, max) = dataset
        .feature_range(&cfg.feature)
        .map_err(CliError::config)?;
    let grid = eval_points(min, max, cfg.grid_size).map_err(CliError::config)?;
    let estimates = batch_pdp(&*model, &dataset, &cfg.feature, &grid).map_err(CliError::runtime)?;

    let mut writer = create_writer(&out)?;
    if out.extension().is_some_and(|e| e == "csv") {
        writeln!(writer, "grid,estimate").map_err(CliError::runtime)?;
        for (g, e) in grid.iter().zip(&estimates) {
            writeln!(writer, "{g},{e}").map_err(CliError::runtime)?;
        }
    } else {
        let payload = serde_json::json!({
            "feature": cfg.feature,
            "grid": grid,
            "estimates": estimates,
        });
        writeln!(writer, "{payload}").map_err(CliError::runtime)?;
    }
    writer.flush().map_err(CliError::runtime)
}

pub fn run_generate(args: &CommonArgs) -> Result<(), CliError> {
    let mut cfg: GenerateConfig = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| CliError::Config("output path required (config `out` or --out)".to_owned()))?;
    if matches!(cfg.source, SourceSpec::Csv { .. }) {
        return Err(CliError::Config(
            "generate requires a generator source".to_owned(),
        ));
    }
    let source = build_source(&cfg.source, cfg.seed)?;
    let schema = source.schema();
    let records: Vec<StreamRecord> = source
        .collect::<Result<_, _>>()
        .map_err(CliError::Ingestion)?;
    pdstream::write_records_csv(&out, &schema, &cfg.target_name, &records)
        .map_err(CliError::runtime)
}
