//! Renders one text line and shows how sharpness measures fall with blur.

use diqa::imgproc::{gaussian_blur, gradient_energy, laplacian_variance, BlurSpec};
use diqa::synth::{LabelFnConfig, LineSynthesizer, SynthConfig};

fn main() -> diqa::Result<()> {
    let synth = LineSynthesizer::new(SynthConfig::default(), LabelFnConfig::default())?;
    let recipe = synth.recipe_for_seed(42)?;
    let sharp = synth.render_sharp(&recipe)?;
    println!("line {:?} ({}x{})", recipe.text, sharp.width(), sharp.height());
    println!("{:>6} {:>12} {:>12}", "sigma", "laplacian", "gradient");
    for sigma in [0.5, 1.5, 2.5, 3.5, 4.5] {
        let img = gaussian_blur(&sharp, &BlurSpec::new(sigma))?;
        println!("{sigma:>6} {:>12.2} {:>12.2}", laplacian_variance(&img), gradient_energy(&img));
    }
    Ok(())
}
