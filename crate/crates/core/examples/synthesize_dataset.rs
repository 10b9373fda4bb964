//! Writes a small labelled line dataset: `synthesize_dataset [OUT_DIR] [N]`.

use diqa::synth::{generate_dataset, LabelFnConfig, SynthConfig};

fn main() -> diqa::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| std::env::temp_dir().join("diqa-lines").display().to_string());
    let n = args.next().and_then(|v| v.parse().ok()).unwrap_or(50);
    let manifest = generate_dataset(&out, n, &SynthConfig::default(), &LabelFnConfig::default(), 1, 0)?;
    for r in manifest.records.iter().take(5) {
        println!("{}  sigma={:.2} label={:.3} {:?} {}px {:?}", r.path, r.sigma, r.label, r.script, r.font_size, r.text);
    }
    let mean = manifest.records.iter().map(|r| r.label).sum::<f64>() / n as f64;
    println!("{n} lines in {out}, mean label {mean:.3}");
    Ok(())
}
