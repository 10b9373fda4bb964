//! Stage 2: per-line quality prediction.
//!
//! [`CnnPredictor`] wraps the learned regressor; [`AnalyticPredictor`]
//! estimates the blur level directly and maps it through the label function,
//! which makes it usable without any trained checkpoint.

mod analytic;
mod arch;
mod model;
pub mod net;
mod train;

pub use analytic::{analytic_predict, estimate_sigma, SigmaEstimator};
pub use arch::{ArchDescriptor, ConvLayout, ParamLayout};
pub use model::{init_model, PredictorModel, QualityScore, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use net::{loss_batch, BatchGradient};
pub use train::{train, train_on, write_training_log, EpochLog, TrainConfig, TrainOutcome, TrainingSet};

use crate::error::Result;
use crate::imgproc::{normalize_for_model, GrayImage};
use crate::synth::LabelFnConfig;

/// Scores a single text-line crop.
pub trait LinePredictor: Send + Sync {
    fn predict(&self, crop: &GrayImage) -> Result<QualityScore>;

    fn name(&self) -> String;
}

#[derive(Clone, Debug)]
pub struct CnnPredictor {
    pub model: PredictorModel,
}

impl CnnPredictor {
    pub fn new(model: PredictorModel) -> Result<Self> {
        model.validate()?;
        Ok(CnnPredictor { model })
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::new(PredictorModel::load(path)?)
    }
}

impl LinePredictor for CnnPredictor {
    fn predict(&self, crop: &GrayImage) -> Result<QualityScore> {
        self.model.forward(&normalize_for_model(crop))
    }

    fn name(&self) -> String {
        "cnn".into()
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct AnalyticPredictor {
    pub label_fn: LabelFnConfig,
    pub estimator: SigmaEstimator,
}

impl AnalyticPredictor {
    pub fn new(label_fn: LabelFnConfig) -> Self {
        AnalyticPredictor {
            label_fn,
            estimator: SigmaEstimator::default(),
        }
    }
}

impl LinePredictor for AnalyticPredictor {
    fn predict(&self, crop: &GrayImage) -> Result<QualityScore> {
        analytic::predict_with(crop, &self.label_fn, self.estimator)
    }

    fn name(&self) -> String {
        "analytic".into()
    }
}
