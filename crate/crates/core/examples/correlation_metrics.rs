//! LCC and SROCC, including tied values and OCR-accuracy averaging.

use std::collections::BTreeMap;

use diqa::eval::{average_ground_truth, average_ranks, evaluate, pair_up, pearson_lcc, spearman_srocc};

fn main() -> diqa::Result<()> {
    let predicted = [0.91, 0.35, 0.62, 0.62, 0.12];
    let accuracy = [0.97, 0.41, 0.80, 0.55, 0.30];
    println!("ranks with ties: {:?}", average_ranks(&predicted));
    println!("LCC {:.4}, SROCC {:.4}", pearson_lcc(&predicted, &accuracy)?, spearman_srocc(&predicted, &accuracy)?);

    let mut per_engine: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for (engine, scale) in [("engine-a", 1.0), ("engine-b", 0.9)] {
        let m = per_engine.entry(engine.into()).or_default();
        for (i, a) in accuracy.iter().enumerate() {
            m.insert(format!("doc{i}"), a * scale);
        }
    }
    let truth = average_ground_truth(&per_engine)?;
    let preds: Vec<(String, f64)> = predicted.iter().enumerate().map(|(i, p)| (format!("doc{i}"), *p)).collect();
    let report = evaluate(&pair_up(&preds, &truth)?)?;
    println!("against averaged OCR accuracy: {}", serde_json::to_string(&report).unwrap());
    Ok(())
}
