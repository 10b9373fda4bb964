use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::arch::ArchDescriptor;
use super::model::{init_model, PredictorModel};
use super::net::{self, Workspace};
use crate::error::{Error, Result};
use crate::imgproc::{normalize_for_model, ModelInput};
use crate::synth::{stream_rng, DatasetManifest};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Fraction of the dataset held out for validation.
    pub val_fraction: f64,
    pub arch: ArchDescriptor,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 5e-3,
            weight_decay: 1e-4,
            batch_size: 32,
            epochs: 20,
            seed: 0,
            val_fraction: 0.1,
            arch: ArchDescriptor::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::param(format!(
                "learning rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::param(format!(
                "weight decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch size must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(Error::param("epochs must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::param(format!(
                "validation fraction must be in [0, 1), got {}",
                self.val_fraction
            )));
        }
        self.arch.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean squared error over the epoch's batches, before each update.
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub lr: f64,
    pub weight_decay: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss (the last
    /// epoch when nothing is held out).
    pub model: PredictorModel,
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
}

/// Normalized inputs and labels ready for the optimizer.
#[derive(Clone, Debug, Default)]
pub struct TrainingSet {
    pub inputs: Vec<ModelInput>,
    pub labels: Vec<f32>,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn from_manifest(manifest: &DatasetManifest) -> Result<Self> {
        let inputs = manifest
            .records
            .par_iter()
            .map(|r| manifest.load_image(r).map(|img| normalize_for_model(&img)))
            .collect::<Result<Vec<_>>>()?;
        let labels = manifest.records.iter().map(|r| r.label as f32).collect();
        Ok(TrainingSet { inputs, labels })
    }
}

pub fn train(manifest: &DatasetManifest, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if manifest.count() == 0 {
        return Err(Error::param("cannot train on an empty dataset"));
    }
    train_on(&TrainingSet::from_manifest(manifest)?, cfg, |_| {})
}

/// Plain minibatch SGD on `data`; `on_epoch` sees each log entry as it is made.
pub fn train_on(
    data: &TrainingSet,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::param("cannot train on an empty dataset"));
    }
    if data.inputs.len() != data.labels.len() {
        return Err(Error::param("inputs and labels differ in length"));
    }
    let mut model = init_model(&cfg.arch, cfg.seed)?;
    for x in &data.inputs {
        model.check_input(x)?;
    }

    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut stream_rng(cfg.seed, 1));
    let n_val = if cfg.val_fraction > 0.0 && data.len() >= 2 {
        ((data.len() as f64 * cfg.val_fraction).round() as usize).clamp(1, data.len() - 1)
    } else {
        0
    };
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();

    let mut rng = stream_rng(cfg.seed, 2);
    let lr = cfg.learning_rate as f32;
    let decay = cfg.weight_decay as f32;
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Vec<f32>)> = None;

    for epoch in 1..=cfg.epochs {
        train_idx.shuffle(&mut rng);
        let mut sq_sum = 0.0f64;
        for batch in train_idx.chunks(cfg.batch_size) {
            let inputs: Vec<&[f32]> = batch.iter().map(|&i| data.inputs[i].data.as_slice()).collect();
            let targets: Vec<f32> = batch.iter().map(|&i| data.labels[i]).collect();
            let g = net::batch_gradients(&cfg.arch, &model.params, &inputs, &targets, decay)
                .map_err(|e| Error::Training(format!("epoch {epoch}: {e}")))?;
            sq_sum += f64::from(g.loss) * batch.len() as f64;
            model
                .params
                .iter_mut()
                .zip(&g.grad)
                .for_each(|(p, &d)| *p -= lr * d);
        }
        let val_loss = (!val_idx.is_empty()).then(|| mse(&model, data, val_idx));
        let entry = EpochLog {
            epoch,
            train_loss: sq_sum / train_idx.len() as f64,
            val_loss,
            lr: cfg.learning_rate,
            weight_decay: cfg.weight_decay,
        };
        on_epoch(&entry);
        log.push(entry);
        let score = val_loss.unwrap_or(f64::NEG_INFINITY);
        if best.as_ref().is_none_or(|(b, _, _)| score < *b || val_loss.is_none()) {
            best = Some((score, epoch, model.params.clone()));
        }
    }

    let (_, best_epoch, params) = best.expect("at least one epoch ran");
    model.params = params;
    Ok(TrainOutcome {
        model,
        best_epoch,
        log,
    })
}

fn mse(model: &PredictorModel, data: &TrainingSet, idx: &[usize]) -> f64 {
    let sq: Vec<f64> = idx
        .par_iter()
        .map_init(
            || Workspace::new(&model.arch),
            |ws, &i| {
                let p = f64::from(net::forward(&model.params, &data.inputs[i].data, ws));
                (p - f64::from(data.labels[i])).powi(2)
            },
        )
        .collect();
    sq.iter().sum::<f64>() / idx.len() as f64
}

pub fn write_training_log(path: impl AsRef<Path>, log: &[EpochLog]) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    for entry in log {
        serde_json::to_writer(&mut buf, entry).expect("log entries serialize");
        buf.push(b'\n');
    }
    let tmp = path.with_extension("tmp");
    let write = || -> std::io::Result<()> {
        fs::File::create(&tmp)?.write_all(&buf)?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}
