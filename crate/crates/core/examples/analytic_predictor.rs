//! Scores lines without a trained model by estimating their blur directly.

use diqa::predict::{estimate_sigma, AnalyticPredictor, LinePredictor, SigmaEstimator};
use diqa::synth::{LabelFnConfig, LineSynthesizer, SynthConfig};

fn main() -> diqa::Result<()> {
    let synth = LineSynthesizer::new(SynthConfig::default(), LabelFnConfig::default())?;
    let predictor = AnalyticPredictor::new(LabelFnConfig::default());
    println!("{:>6} {:>8} {:>9} {:>9} {:>8}", "sigma", "label", "spectral", "grad-ratio", "score");
    for (i, sigma) in [0.6, 1.2, 2.0, 2.8, 3.6, 4.4].into_iter().enumerate() {
        let line = synth.render_with_sigma(100 + i as u64, sigma)?;
        let spectral = estimate_sigma(&line.image, SigmaEstimator::Spectral)?;
        let ratio = estimate_sigma(&line.image, SigmaEstimator::GradientRatio)?;
        let q = predictor.predict(&line.image)?;
        println!("{sigma:>6} {:>8.3} {spectral:>9.2} {ratio:>9.2} {:>8.3}", line.label, q.value);
    }
    Ok(())
}
