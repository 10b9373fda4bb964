//! Command-line front end: `synth`, `train`, `assess`, `eval`, `detect-debug`.
//!
//! Settings come from an optional `key = value` config file, then `--set
//! key=value` overrides, then dedicated flags. Keys are `section.field` with
//! sections `synth`, `label`, `detect`, `train` and `assess`. Every section is
//! validated before any file is written.
//!
//! Machine-readable output is one JSON document per line on stdout; progress
//! and summaries go to stderr. Exit codes: 0 ok, 1 usage, 2 data, 3 internal.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::assess::{assess_document, AssessmentResult, AssessmentStatus, PoolingStrategy};
use crate::detect::{
    draw_boxes, BaselineDetector, Binarization, DetectorParams, ResizingDetector,
    TextLineDetector,
};
use crate::error::{Error, Result};
use crate::eval::{average_ground_truth, evaluate, pair_up, read_ground_truth_csv, read_predictions_csv};
use crate::imgproc::{read_pgm, write_pgm, GrayImage, GridSpec};
use crate::predict::{
    train_on, write_training_log, AnalyticPredictor, CnnPredictor, LinePredictor,
    SigmaEstimator, TrainConfig, TrainingSet,
};
use crate::synth::{generate_dataset, DatasetManifest, LabelFnConfig, SynthConfig, MANIFEST_FILE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "diqa", version, about = "Text-line based document image quality assessment")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct CommonArgs {
    /// Key-value config file (`section.key = value` per line, `#` comments).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labelled synthetic text-line dataset.
    Synth {
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Label-function preset G1..G6.
        #[arg(long)]
        scaling_group: Option<String>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train the line-quality regressor on a synthesized dataset.
    Train {
        /// Manifest file or the directory holding it.
        #[arg(long)]
        manifest: PathBuf,
        /// Checkpoint to write.
        #[arg(long)]
        out: PathBuf,
        /// Training log (JSON lines); defaults to `<out>.log.jsonl`.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        weight_decay: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Score document images (a PGM file or a directory of them).
    Assess {
        input: PathBuf,
        /// `analytic` or a checkpoint path.
        #[arg(long, default_value = "analytic")]
        predictor: String,
        #[arg(long)]
        strategy: Option<String>,
        #[command(flatten)]
        detection: DetectionArgs,
        /// What to do with pages without text: `reject` (score 0) or `fail`.
        #[arg(long)]
        no_text_policy: Option<String>,
        /// Write the reports here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// LCC and SROCC between predictions and averaged OCR accuracy.
    Eval {
        /// CSV with header `id,score`.
        #[arg(long)]
        pred: PathBuf,
        /// CSV with header `id,engine,accuracy`.
        #[arg(long)]
        gt: PathBuf,
    },
    /// Print detected boxes and optionally an annotated overlay.
    DetectDebug {
        input: PathBuf,
        #[command(flatten)]
        detection: DetectionArgs,
        #[arg(long)]
        overlay: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Debug, Args, Clone, Default)]
pub struct DetectionArgs {
    /// Segment grid such as `4x6`.
    #[arg(long, conflicts_with = "no_divide")]
    pub grid: Option<String>,
    /// Detect on the whole page.
    #[arg(long)]
    pub no_divide: bool,
    /// Detect on a copy resized to WxH (implies no dividing).
    #[arg(long, conflicts_with = "grid")]
    pub resize: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoTextPolicy {
    Reject,
    Fail,
}

impl std::str::FromStr for NoTextPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reject" => Ok(NoTextPolicy::Reject),
            "fail" => Ok(NoTextPolicy::Fail),
            other => Err(Error::param(format!(
                "unknown no-text policy {other:?} (expected reject or fail)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DetectionMode {
    Whole,
    Divided(GridSpec),
    Resized(usize, usize),
}

impl DetectionMode {
    pub fn describe(&self) -> String {
        match self {
            DetectionMode::Whole => "whole".into(),
            DetectionMode::Divided(g) => format!("divided {g}"),
            DetectionMode::Resized(w, h) => format!("resized {w}x{h}"),
        }
    }
}

/// All settings after merging file, overrides and flags.
#[derive(Clone, Debug)]
pub struct ToolConfig {
    pub synth: SynthConfig,
    pub label_fn: LabelFnConfig,
    pub detector: DetectorParams,
    pub train: TrainConfig,
    pub detection: DetectionMode,
    pub strategy: PoolingStrategy,
    pub no_text_policy: NoTextPolicy,
    pub estimator: SigmaEstimator,
}

impl Default for ToolConfig {
    fn default() -> Self {
        ToolConfig {
            synth: SynthConfig::default(),
            label_fn: LabelFnConfig::default(),
            detector: DetectorParams::default(),
            train: TrainConfig::default(),
            detection: DetectionMode::Divided(GridSpec::default()),
            strategy: PoolingStrategy::WeightedPool,
            no_text_policy: NoTextPolicy::Reject,
            estimator: SigmaEstimator::Spectral,
        }
    }
}

fn parse_pair(v: &str, what: &str) -> Result<(usize, usize)> {
    let (a, b) = v
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::param(format!("{what} must look like WxH, got {v:?}")))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::param(format!("{what} must look like WxH, got {v:?}")))
    };
    Ok((parse(a)?, parse(b)?))
}

/// Turns a config value into JSON: JSON literals pass through, comma lists
/// become arrays, anything else is a string.
fn value_to_json(raw: &str) -> Value {
    let raw = raw.trim();
    if let Ok(v) = serde_json::from_str::<Value>(raw) {
        return v;
    }
    if raw.contains(',') {
        return Value::Array(raw.split(',').map(value_to_json).collect());
    }
    Value::String(raw.to_string())
}

fn set_field<T>(target: &mut T, section: &str, field: &str, raw: &str) -> Result<()>
where
    T: serde::Serialize + serde::de::DeserializeOwned,
{
    let mut v = serde_json::to_value(&*target).expect("config serializes");
    let obj = v.as_object_mut().expect("config is a struct");
    if !obj.contains_key(field) {
        let mut keys: Vec<&String> = obj.keys().collect();
        keys.sort();
        return Err(Error::param(format!(
            "unknown key {section}.{field}; known: {}",
            keys.iter().map(|k| format!("{section}.{k}")).collect::<Vec<_>>().join(", ")
        )));
    }
    obj.insert(field.to_string(), value_to_json(raw));
    *target = serde_json::from_value(v)
        .map_err(|e| Error::param(format!("bad value {raw:?} for {section}.{field}: {e}")))?;
    Ok(())
}

impl ToolConfig {
    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        let (section, field) = key
            .split_once('.')
            .ok_or_else(|| Error::param(format!("config key {key:?} needs a section prefix")))?;
        match (section, field) {
            ("label", "group") => self.label_fn = LabelFnConfig::preset(raw.trim())?,
            ("label", _) => set_field(&mut self.label_fn, section, field, raw)?,
            ("synth", _) => set_field(&mut self.synth, section, field, raw)?,
            ("detect", "binarization") => self.detector.binarization = parse_binarization(raw)?,
            ("detect", _) => set_field(&mut self.detector, section, field, raw)?,
            ("train", _) => set_field(&mut self.train, section, field, raw)?,
            ("assess", "grid") => self.detection = DetectionMode::Divided(raw.trim().parse()?),
            ("assess", "divide") => {
                let on: bool = raw.trim().parse().map_err(|_| {
                    Error::param(format!("assess.divide must be true or false, got {raw:?}"))
                })?;
                self.detection = match (on, self.detection) {
                    (true, DetectionMode::Divided(g)) => DetectionMode::Divided(g),
                    (true, _) => DetectionMode::Divided(GridSpec::default()),
                    (false, _) => DetectionMode::Whole,
                };
            }
            ("assess", "resize") => {
                let (w, h) = parse_pair(raw, "assess.resize")?;
                self.detection = DetectionMode::Resized(w, h);
            }
            ("assess", "strategy") => self.strategy = raw.trim().parse()?,
            ("assess", "no_text_policy") => self.no_text_policy = raw.trim().parse()?,
            ("assess", "estimator") => {
                self.estimator = serde_json::from_value(Value::String(raw.trim().into()))
                    .map_err(|_| {
                        Error::param(format!(
                            "assess.estimator must be spectral or gradient-ratio, got {raw:?}"
                        ))
                    })?
            }
            _ => return Err(Error::param(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::param(format!("{origin}:{}: expected key = value", n + 1))
            })?;
            self.set(k.trim(), v)
                .map_err(|e| Error::param(format!("{origin}:{}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn from_common(common: &CommonArgs) -> Result<Self> {
        let mut cfg = ToolConfig::default();
        if let Some(path) = &common.config {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            cfg.apply_text(&text, &path.display().to_string())?;
        }
        for o in &common.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::param(format!("--set expects KEY=VALUE, got {o:?}")))?;
            cfg.set(k.trim(), v)?;
        }
        Ok(cfg)
    }

    fn apply_detection(&mut self, d: &DetectionArgs) -> Result<()> {
        if let Some(g) = &d.grid {
            self.detection = DetectionMode::Divided(g.parse()?);
        }
        if d.no_divide {
            self.detection = DetectionMode::Whole;
        }
        if let Some(r) = &d.resize {
            let (w, h) = parse_pair(r, "--resize")?;
            self.detection = DetectionMode::Resized(w, h);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.label_fn.validate()?;
        self.detector.validate()?;
        self.train.validate()
    }

    fn detector(&self) -> Result<Box<dyn TextLineDetector>> {
        let base = BaselineDetector::new(self.detector.clone())?;
        Ok(match self.detection {
            DetectionMode::Resized(w, h) => Box::new(ResizingDetector {
                inner: base,
                target: (w, h),
            }),
            _ => Box::new(base),
        })
    }

    fn grid(&self) -> Option<GridSpec> {
        match self.detection {
            DetectionMode::Divided(g) => Some(g),
            _ => None,
        }
    }
}

fn parse_binarization(raw: &str) -> Result<Binarization> {
    let raw = raw.trim();
    if raw == "otsu" {
        return Ok(Binarization::Otsu);
    }
    let rest = raw.strip_prefix("adaptive-mean").ok_or_else(|| {
        Error::param(format!(
            "detect.binarization must be otsu or adaptive-mean:WINDOW,OFFSET, got {raw:?}"
        ))
    })?;
    let (window, offset) = match rest.strip_prefix(':') {
        None if rest.is_empty() => (31, 10.0),
        Some(args) => {
            let (w, o) = args.split_once(',').unwrap_or((args, "10"));
            let w = w.trim().parse().map_err(|_| Error::param(format!("bad window in {raw:?}")))?;
            let o = o.trim().parse().map_err(|_| Error::param(format!("bad offset in {raw:?}")))?;
            (w, o)
        }
        None => return Err(Error::param(format!("bad binarization {raw:?}"))),
    };
    Ok(Binarization::AdaptiveMean { window, offset })
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parameter(_) | Error::Domain(_) => EXIT_USAGE,
        Error::Data(_)
        | Error::Io { .. }
        | Error::NoText
        | Error::NoSignal(_)
        | Error::Degenerate(_) => EXIT_DATA,
        Error::Training(_) | Error::Render(_) => EXIT_INTERNAL,
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render().ansi());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

fn with_jobs<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::param(format!("cannot start {jobs} workers: {e}")))?;
    Ok(pool.install(f))
}

fn emit(out: &mut dyn Write, v: &Value) -> Result<()> {
    writeln!(out, "{v}").map_err(|e| Error::io("<stdout>", e))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let res = (|| -> std::io::Result<()> {
        fs::File::create(&tmp)?.write_all(bytes)?;
        fs::rename(&tmp, path)
    })();
    res.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

fn execute(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Synth {
            n,
            out: dir,
            seed,
            scaling_group,
            common,
        } => {
            let mut cfg = ToolConfig::from_common(&common)?;
            if let Some(g) = scaling_group {
                cfg.label_fn = LabelFnConfig::preset(&g)?;
            }
            cfg.validate()?;
            let manifest = generate_dataset(&dir, n as usize, &cfg.synth, &cfg.label_fn, seed, common.jobs)?;
            let path = dir.join(MANIFEST_FILE);
            let _ = writeln!(err, "wrote {} samples to {}", manifest.count(), dir.display());
            emit(
                out,
                &json!({
                    "manifest": path,
                    "count": manifest.count(),
                    "seed": seed,
                    "label_fn": cfg.label_fn,
                }),
            )?;
            Ok(EXIT_OK)
        }
        Command::Train {
            manifest,
            out: model_path,
            log,
            epochs,
            seed,
            lr,
            weight_decay,
            batch_size,
            common,
        } => {
            let mut cfg = ToolConfig::from_common(&common)?;
            let t = &mut cfg.train;
            if let Some(v) = epochs {
                t.epochs = v;
            }
            if let Some(v) = seed {
                t.seed = v;
            }
            if let Some(v) = lr {
                t.learning_rate = v;
            }
            if let Some(v) = weight_decay {
                t.weight_decay = v;
            }
            if let Some(v) = batch_size {
                t.batch_size = v;
            }
            cfg.validate()?;
            let log_path = log.unwrap_or_else(|| {
                let mut p = model_path.clone().into_os_string();
                p.push(".log.jsonl");
                PathBuf::from(p)
            });
            let manifest_path = if manifest.is_dir() {
                manifest.join(MANIFEST_FILE)
            } else {
                manifest
            };
            let data = DatasetManifest::read(&manifest_path).map_err(|e| match e {
                Error::Io { path, source } => {
                    Error::data(format!("cannot read manifest {}: {source}", path.display()))
                }
                other => other,
            })?;
            if data.count() == 0 {
                return Err(Error::data("manifest has no records"));
            }
            let train_cfg = cfg.train.clone();
            let outcome = with_jobs(common.jobs, || -> Result<_> {
                let set = TrainingSet::from_manifest(&data)?;
                train_on(&set, &train_cfg, |e| {
                    let _ = writeln!(
                        std::io::stderr(),
                        "epoch {:>3}  train {:.6}  val {}  lr {}  wd {}",
                        e.epoch,
                        e.train_loss,
                        e.val_loss.map_or("-".into(), |v| format!("{v:.6}")),
                        e.lr,
                        e.weight_decay
                    );
                })
            })??;
            outcome.model.save(&model_path)?;
            write_training_log(&log_path, &outcome.log)?;
            emit(
                out,
                &json!({
                    "model": model_path,
                    "log": log_path,
                    "epochs": outcome.log.len(),
                    "best_epoch": outcome.best_epoch,
                    "learning_rate": cfg.train.learning_rate,
                    "weight_decay": cfg.train.weight_decay,
                    "final_train_loss": outcome.log.last().map(|e| e.train_loss),
                }),
            )?;
            Ok(EXIT_OK)
        }
        Command::Assess {
            input,
            predictor,
            strategy,
            detection,
            no_text_policy,
            out: out_path,
            common,
        } => {
            let mut cfg = ToolConfig::from_common(&common)?;
            cfg.apply_detection(&detection)?;
            if let Some(s) = strategy {
                cfg.strategy = s.parse()?;
            }
            if let Some(p) = no_text_policy {
                cfg.no_text_policy = p.parse()?;
            }
            cfg.validate()?;
            let inputs = list_inputs(&input)?;
            let predictor: Box<dyn LinePredictor> = if predictor == "analytic" {
                Box::new(AnalyticPredictor {
                    label_fn: cfg.label_fn,
                    estimator: cfg.estimator,
                })
            } else {
                Box::new(CnnPredictor::load(&predictor)?)
            };
            let detector = cfg.detector()?;
            let reports = with_jobs(common.jobs, || {
                inputs
                    .iter()
                    .map(|path| {
                        let img = read_pgm(path)?;
                        let r = assess_document(&img, detector.as_ref(), predictor.as_ref(), cfg.strategy, cfg.grid())?;
                        Ok((path.clone(), r))
                    })
                    .collect::<Result<Vec<(PathBuf, AssessmentResult)>>>()
            })??;
            let mut body = String::new();
            let mut no_text = 0;
            for (path, r) in &reports {
                if r.status == AssessmentStatus::NoText {
                    no_text += 1;
                }
                let overall = match (r.status, cfg.no_text_policy) {
                    (AssessmentStatus::Ok, _) => r.overall(),
                    (AssessmentStatus::NoText, NoTextPolicy::Reject) => Some(0.0),
                    (AssessmentStatus::NoText, NoTextPolicy::Fail) => None,
                };
                let mut v = serde_json::to_value(r).expect("report serializes");
                let obj = v.as_object_mut().expect("report is an object");
                obj.insert("file".into(), json!(path));
                obj.insert("predictor".into(), json!(predictor.name()));
                obj.insert("detection".into(), json!(cfg.detection.describe()));
                obj.insert("overall".into(), json!(overall));
                body.push_str(&v.to_string());
                body.push('\n');
            }
            match &out_path {
                Some(p) => write_atomic(p, body.as_bytes())?,
                None => out.write_all(body.as_bytes()).map_err(|e| Error::io("<stdout>", e))?,
            }
            let _ = writeln!(
                err,
                "assessed {} image(s), {} without text ({})",
                reports.len(),
                no_text,
                cfg.detection.describe()
            );
            if no_text > 0 && cfg.no_text_policy == NoTextPolicy::Fail {
                let _ = writeln!(err, "error: {no_text} image(s) contain no detectable text");
                return Ok(EXIT_DATA);
            }
            Ok(EXIT_OK)
        }
        Command::Eval { pred, gt } => {
            let predictions = read_predictions_csv(&pred)?;
            let truth = average_ground_truth(&read_ground_truth_csv(&gt)?)?;
            let report = evaluate(&pair_up(&predictions, &truth)?)?;
            let _ = writeln!(err, "n = {}  LCC = {:.4}  SROCC = {:.4}", report.n, report.lcc, report.srocc);
            emit(out, &serde_json::to_value(report).expect("report serializes"))?;
            Ok(EXIT_OK)
        }
        Command::DetectDebug {
            input,
            detection,
            overlay,
            common,
        } => {
            let mut cfg = ToolConfig::from_common(&common)?;
            cfg.apply_detection(&detection)?;
            cfg.validate()?;
            let img = read_pgm(&input)?;
            let lines = with_jobs(common.jobs, || detect_lines(&cfg, &img))??;
            for l in &lines {
                emit(out, &serde_json::to_value(l.bbox).expect("box serializes"))?;
            }
            if let Some(p) = overlay {
                let boxes: Vec<_> = lines.iter().map(|l| l.bbox).collect();
                write_pgm(&p, &draw_boxes(&img, &boxes))?;
            }
            let _ = writeln!(err, "{} line(s) ({})", lines.len(), cfg.detection.describe());
            Ok(EXIT_OK)
        }
    }
}

fn detect_lines(cfg: &ToolConfig, img: &GrayImage) -> Result<Vec<crate::detect::DetectedLine>> {
    let detector = cfg.detector()?;
    match cfg.grid() {
        Some(g) => crate::detect::detect_divided_with(detector.as_ref(), img, g),
        None => detector.detect(img),
    }
}

/// A single file, or every `.pgm` in a directory in name order.
fn list_inputs(input: &Path) -> Result<Vec<PathBuf>> {
    if input.is_dir() {
        let mut v: Vec<PathBuf> = fs::read_dir(input)
            .map_err(|e| Error::io(input, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
            .collect();
        v.sort();
        if v.is_empty() {
            return Err(Error::data(format!("no .pgm files in {}", input.display())));
        }
        Ok(v)
    } else if input.exists() {
        Ok(vec![input.to_path_buf()])
    } else {
        Err(Error::data(format!("{} does not exist", input.display())))
    }
}
