//! Blur-to-quality label curves for the six published scaling groups.

use diqa::synth::{invert_label, quality_label, LabelFnConfig, SCALING_GROUPS};

fn main() -> diqa::Result<()> {
    let sigmas = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5];
    print!("group ");
    for s in sigmas {
        print!("{s:>7}");
    }
    println!();
    for g in 1..=SCALING_GROUPS.len() {
        let cfg = LabelFnConfig::group(g)?;
        print!("G{g}    ");
        for s in sigmas {
            print!("{:>7.4}", quality_label(s, &cfg)?);
        }
        println!("{}", if cfg.follows_ordering_principle() { "" } else { "  (breaks s1<s2<1<s3<s4)" });
    }
    let g2 = LabelFnConfig::default();
    println!("\nG2 thresholds: q=0.746 at sigma {:.3}, q=0.35 at sigma {:.3}", invert_label(0.746, &g2)?, invert_label(0.35, &g2)?);
    Ok(())
}
