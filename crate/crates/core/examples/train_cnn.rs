//! Trains the line-quality CNN on freshly synthesized lines and saves a
//! checkpoint: `train_cnn [N_LINES] [EPOCHS] [CHECKPOINT]`.

use diqa::imgproc::normalize_for_model;
use diqa::predict::{train_on, CnnPredictor, LinePredictor, TrainConfig, TrainingSet};
use diqa::synth::{dataset_sample, LabelFnConfig, LineSynthesizer, SynthConfig};

fn main() -> diqa::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|v| v.parse().ok()).unwrap_or(400);
    let epochs: usize = args.next().and_then(|v| v.parse().ok()).unwrap_or(3);
    let out = args.next().unwrap_or_else(|| std::env::temp_dir().join("diqa-model.bin").display().to_string());

    let synth = LineSynthesizer::new(SynthConfig::default(), LabelFnConfig::default())?;
    let mut data = TrainingSet::default();
    for i in 0..n {
        let s = dataset_sample(&synth, 1, i)?;
        data.inputs.push(normalize_for_model(&s.image));
        data.labels.push(s.label as f32);
    }
    let cfg = TrainConfig { epochs, ..TrainConfig::default() };
    println!("{} parameters, lr {}, weight decay {}", cfg.arch.param_count(), cfg.learning_rate, cfg.weight_decay);
    let outcome = train_on(&data, &cfg, |e| {
        println!("epoch {:>2}  train {:.5}  val {:.5}", e.epoch, e.train_loss, e.val_loss.unwrap_or(f64::NAN))
    })?;
    outcome.model.save(&out)?;
    println!("best epoch {}, saved {out}", outcome.best_epoch);

    let predictor = CnnPredictor::load(&out)?;
    for sigma in [0.7, 2.5, 4.3] {
        let line = synth.render_with_sigma(9_999, sigma)?;
        println!("sigma {sigma}: label {:.3}, predicted {:.3}", line.label, predictor.predict(&line.image)?.value);
    }
    Ok(())
}
