//! Stage 3: pooling line scores into one document score.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{detect_divided_with, BoundingBox, TextLineDetector};
use crate::error::{Error, Result};
use crate::imgproc::{GrayImage, GridSpec};
use crate::predict::{LinePredictor, QualityScore};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolingStrategy {
    /// Area-weighted mean of line scores.
    #[default]
    WeightedPool,
    Median,
}

impl std::str::FromStr for PoolingStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weighted_pool" | "weighted-pool" | "wp" => Ok(PoolingStrategy::WeightedPool),
            "median" => Ok(PoolingStrategy::Median),
            other => Err(Error::param(format!(
                "unknown pooling strategy {other:?} (expected weighted_pool or median)"
            ))),
        }
    }
}

/// `Σ w_j q_j` with `w_j = area_j / Σ area`.
pub fn weighted_pool(scores: &[f64], areas: &[f64]) -> Result<f64> {
    if scores.len() != areas.len() {
        return Err(Error::param(format!(
            "{} scores but {} areas",
            scores.len(),
            areas.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::NoText);
    }
    if let Some(a) = areas.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
        return Err(Error::param(format!("line area must be non-negative, got {a}")));
    }
    let total: f64 = areas.iter().sum();
    if total <= 0.0 {
        return Err(Error::param("total line area is zero"));
    }
    Ok(scores.iter().zip(areas).map(|(q, a)| q * a / total).sum())
}

/// Median of the scores; an even count averages the two middle values.
pub fn median_pool(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::NoText);
    }
    let mut v = scores.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineAssessment {
    pub bbox: BoundingBox,
    pub score: QualityScore,
    /// Area share of this line among all scored lines.
    pub weight: f64,
}

#[derive(Serialize)]
struct LineRecord {
    x: usize,
    y: usize,
    w: usize,
    h: usize,
    score: f64,
    weight: f64,
}

impl Serialize for LineAssessment {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let b = self.bbox;
        LineRecord {
            x: b.x,
            y: b.y,
            w: b.w,
            h: b.h,
            score: self.score.value,
            weight: self.weight,
        }
        .serialize(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssessmentStatus {
    Ok,
    NoText,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssessmentResult {
    pub status: AssessmentStatus,
    pub strategy: PoolingStrategy,
    pub overall_wp: Option<f64>,
    pub overall_median: Option<f64>,
    pub lines: Vec<LineAssessment>,
    /// Detected lines the predictor declined to score (too little signal).
    pub skipped_lines: usize,
}

impl AssessmentResult {
    pub fn no_text(strategy: PoolingStrategy, skipped_lines: usize) -> Self {
        AssessmentResult {
            status: AssessmentStatus::NoText,
            strategy,
            overall_wp: None,
            overall_median: None,
            lines: Vec::new(),
            skipped_lines,
        }
    }

    /// Pools already-scored lines; both strategies are always evaluated.
    pub fn from_scores(
        boxes_and_scores: Vec<(BoundingBox, QualityScore)>,
        strategy: PoolingStrategy,
        skipped_lines: usize,
    ) -> Result<Self> {
        if boxes_and_scores.is_empty() {
            return Ok(Self::no_text(strategy, skipped_lines));
        }
        let scores: Vec<f64> = boxes_and_scores.iter().map(|(_, q)| q.value).collect();
        let areas: Vec<f64> = boxes_and_scores.iter().map(|(b, _)| b.area() as f64).collect();
        let total: f64 = areas.iter().sum();
        let lines = boxes_and_scores
            .iter()
            .zip(&areas)
            .map(|(&(bbox, score), a)| LineAssessment {
                bbox,
                score,
                weight: a / total,
            })
            .collect();
        Ok(AssessmentResult {
            status: AssessmentStatus::Ok,
            strategy,
            overall_wp: Some(weighted_pool(&scores, &areas)?),
            overall_median: Some(median_pool(&scores)?),
            lines,
            skipped_lines,
        })
    }

    /// The overall score under the selected strategy.
    pub fn overall(&self) -> Option<f64> {
        match self.strategy {
            PoolingStrategy::WeightedPool => self.overall_wp,
            PoolingStrategy::Median => self.overall_median,
        }
    }
}

/// Detect, score and pool.
///
/// With a grid the detector runs on each segment. Lines for which the
/// predictor reports no signal are skipped; if none remain the result has
/// status `no_text`.
pub fn assess_document(
    img: &GrayImage,
    detector: &dyn TextLineDetector,
    predictor: &dyn LinePredictor,
    strategy: PoolingStrategy,
    grid: Option<GridSpec>,
) -> Result<AssessmentResult> {
    let lines = match grid {
        Some(g) => detect_divided_with(detector, img, g)?,
        None => detector.detect(img)?,
    };
    let scored: Vec<Result<Option<(BoundingBox, QualityScore)>>> = lines
        .par_iter()
        .map(|line| match predictor.predict(&line.crop) {
            Ok(q) => Ok(Some((line.bbox, q))),
            Err(Error::NoSignal(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect();
    let mut kept = Vec::with_capacity(scored.len());
    let mut skipped = 0;
    for s in scored {
        match s? {
            Some(pair) => kept.push(pair),
            None => skipped += 1,
        }
    }
    AssessmentResult::from_scores(kept, strategy, skipped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_example_from_area_weights() {
        let q = weighted_pool(&[0.35, 0.75, 0.9, 0.45], &[0.24, 0.62, 0.06, 0.08]).unwrap();
        // 0.084 + 0.465 + 0.054 + 0.036
        assert!((q - 0.639).abs() < 1e-12, "{q}");
    }

    #[test]
    fn simple_pools() {
        assert_eq!(weighted_pool(&[0.3], &[17.0]).unwrap(), 0.3);
        assert!((weighted_pool(&[0.2, 0.4, 0.6], &[5.0, 5.0, 5.0]).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(median_pool(&[0.9787, 0.9964, 0.1087]).unwrap(), 0.9787);
        assert_eq!(median_pool(&[0.4845, 0.1345, 0.1669]).unwrap(), 0.1669);
        assert_eq!(median_pool(&[0.2, 0.6]).unwrap(), 0.4);
    }

    #[test]
    fn pool_errors() {
        assert!(matches!(weighted_pool(&[], &[]), Err(Error::NoText)));
        assert!(matches!(median_pool(&[]), Err(Error::NoText)));
        assert!(matches!(weighted_pool(&[0.5, 0.5], &[0.0, 0.0]), Err(Error::Parameter(_))));
        assert!(matches!(weighted_pool(&[0.5], &[1.0, 2.0]), Err(Error::Parameter(_))));
        assert!(matches!(weighted_pool(&[0.5], &[-1.0]), Err(Error::Parameter(_))));
    }

    #[test]
    fn empty_scores_give_no_text() {
        let r = AssessmentResult::from_scores(vec![], PoolingStrategy::Median, 2).unwrap();
        assert_eq!(r.status, AssessmentStatus::NoText);
        assert_eq!(r.overall(), None);
        assert_eq!(r.skipped_lines, 2);
    }

    #[test]
    fn report_serializes_flat_lines() {
        let r = AssessmentResult::from_scores(
            vec![(BoundingBox::new(1, 2, 3, 4), QualityScore::from_raw(0.5))],
            PoolingStrategy::WeightedPool,
            0,
        )
        .unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["status"], "ok");
        assert_eq!(v["strategy"], "weighted_pool");
        assert_eq!(v["lines"][0]["w"], 3);
        assert_eq!(v["lines"][0]["weight"], 1.0);
        assert_eq!(v["overall_median"], 0.5);
    }

    fn scores_and_areas() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..20).prop_flat_map(|n| {
            (
                prop::collection::vec(0.0f64..=1.0, n),
                prop::collection::vec(0.01f64..1e4, n),
            )
        })
    }

    proptest! {
        #[test]
        fn area_scale_invariance((q, a) in scores_and_areas(), c in 1e-3f64..1e3) {
            let scaled: Vec<f64> = a.iter().map(|v| v * c).collect();
            let d = weighted_pool(&q, &a).unwrap() - weighted_pool(&q, &scaled).unwrap();
            prop_assert!(d.abs() < 1e-12);
        }

        #[test]
        fn pooled_values_are_bounded((q, a) in scores_and_areas()) {
            let lo = q.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for v in [weighted_pool(&q, &a).unwrap(), median_pool(&q).unwrap()] {
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }

        #[test]
        fn permutation_invariance((q, a) in scores_and_areas(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut idx: Vec<usize> = (0..q.len()).collect();
            idx.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let q2: Vec<f64> = idx.iter().map(|&i| q[i]).collect();
            let a2: Vec<f64> = idx.iter().map(|&i| a[i]).collect();
            prop_assert!((weighted_pool(&q, &a).unwrap() - weighted_pool(&q2, &a2).unwrap()).abs() < 1e-12);
            prop_assert_eq!(median_pool(&q).unwrap(), median_pool(&q2).unwrap());
        }

        #[test]
        fn raising_a_score_never_lowers_the_pool(
            (q, a) in scores_and_areas(), pick in any::<prop::sample::Index>(), bump in 0.0f64..1.0,
        ) {
            let i = pick.index(q.len());
            let mut raised = q.clone();
            raised[i] += bump;
            prop_assert!(weighted_pool(&raised, &a).unwrap() >= weighted_pool(&q, &a).unwrap() - 1e-12);
        }
    }
}
