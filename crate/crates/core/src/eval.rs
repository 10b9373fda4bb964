//! Agreement between predicted document quality and ground truth.
//!
//! One LCC and one SROCC are computed over all documents pooled together.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct EvalPair {
    pub id: String,
    pub predicted: f64,
    pub ground_truth: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub lcc: f64,
    pub srocc: f64,
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::param(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::param("correlation needs at least two observations"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::param("correlation inputs must be finite"));
    }
    Ok(())
}

/// Pearson linear correlation coefficient.
pub fn pearson_lcc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("input has zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank-order correlation: Pearson correlation of average ranks.
pub fn spearman_srocc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson_lcc(&average_ranks(x), &average_ranks(y))
}

pub fn evaluate(pairs: &[EvalPair]) -> Result<EvalReport> {
    let pred: Vec<f64> = pairs.iter().map(|p| p.predicted).collect();
    let gt: Vec<f64> = pairs.iter().map(|p| p.ground_truth).collect();
    Ok(EvalReport {
        n: pairs.len(),
        lcc: pearson_lcc(&pred, &gt)?,
        srocc: spearman_srocc(&pred, &gt)?,
    })
}

/// Element-wise mean accuracy across engines, keyed by document id.
pub fn average_ground_truth(
    per_engine: &BTreeMap<String, BTreeMap<String, f64>>,
) -> Result<BTreeMap<String, f64>> {
    let mut engines = per_engine.iter();
    let Some((first_name, first)) = engines.next() else {
        return Err(Error::data("no OCR engines in ground truth"));
    };
    for (name, docs) in per_engine {
        for id in first.keys() {
            if !docs.contains_key(id) {
                return Err(Error::data(format!("engine {name} has no accuracy for {id}")));
            }
        }
        if let Some(extra) = docs.keys().find(|id| !first.contains_key(*id)) {
            return Err(Error::data(format!(
                "engine {first_name} has no accuracy for {extra}"
            )));
        }
    }
    let k = per_engine.len() as f64;
    Ok(first
        .keys()
        .map(|id| {
            let sum: f64 = per_engine.values().map(|docs| docs[id]).sum();
            (id.clone(), sum / k)
        })
        .collect())
}

#[derive(Deserialize)]
struct GroundTruthRow {
    id: String,
    engine: String,
    accuracy: f64,
}

#[derive(Deserialize)]
struct PredictionRow {
    id: String,
    score: f64,
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

/// Reads `id,engine,accuracy` rows grouped per engine.
pub fn read_ground_truth_csv(
    path: impl AsRef<Path>,
) -> Result<BTreeMap<String, BTreeMap<String, f64>>> {
    let path = path.as_ref();
    let mut out: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for row in csv_reader(path)?.deserialize() {
        let row: GroundTruthRow =
            row.map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
        if !(0.0..=1.0).contains(&row.accuracy) {
            return Err(Error::data(format!(
                "{}: accuracy {} for {} is outside [0, 1]",
                path.display(),
                row.accuracy,
                row.id
            )));
        }
        if out.entry(row.engine.clone()).or_default().insert(row.id.clone(), row.accuracy).is_some()
        {
            return Err(Error::data(format!(
                "{}: duplicate row for {} / {}",
                path.display(),
                row.id,
                row.engine
            )));
        }
    }
    Ok(out)
}

/// Reads `id,score` rows.
pub fn read_predictions_csv(path: impl AsRef<Path>) -> Result<Vec<(String, f64)>> {
    let path = path.as_ref();
    csv_reader(path)?
        .deserialize()
        .map(|row| {
            let row: PredictionRow =
                row.map_err(|e| Error::data(format!("{}: {e}", path.display())))?;
            Ok((row.id, row.score))
        })
        .collect()
}

/// Joins predictions with engine-averaged ground truth by document id.
pub fn pair_up(
    predictions: &[(String, f64)],
    ground_truth: &BTreeMap<String, f64>,
) -> Result<Vec<EvalPair>> {
    let mut seen = HashMap::new();
    predictions
        .iter()
        .map(|(id, score)| {
            if seen.insert(id.clone(), ()).is_some() {
                return Err(Error::data(format!("duplicate prediction for {id}")));
            }
            let gt = ground_truth
                .get(id)
                .ok_or_else(|| Error::data(format!("no ground truth for {id}")))?;
            Ok(EvalPair {
                id: id.clone(),
                predicted: *score,
                ground_truth: *gt,
            })
        })
        .collect()
}
