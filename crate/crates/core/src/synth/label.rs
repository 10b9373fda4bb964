//! Piecewise blur-to-quality label function and its inverse.
//!
//! Quality decays as `1 / (1 + D(σ))` where `D` is piecewise linear in σ with
//! knots at 0.5, 1.5, 2.5, 3.5 and 4.5 and slopes `s1..s4`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SIGMA_MIN: f64 = 0.5;
pub const SIGMA_MAX: f64 = 4.5;
pub const KNOTS: [f64; 5] = [0.5, 1.5, 2.5, 3.5, 4.5];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelFnConfig {
    pub s: [f64; 4],
}

/// The six published scaling-factor groups, `G1` first.
pub const SCALING_GROUPS: [[f64; 4]; 6] = [
    [0.25, 0.5, 3.25, 15.0],
    [0.115, 0.225, 1.515, 17.145],
    [0.175, 0.365, 1.8, 16.65],
    [0.325, 0.215, 2.46, 16.0],
    [0.325, 0.675, 1.335, 16.665],
    [0.25, 1.25, 7.5, 90.0],
];

impl Default for LabelFnConfig {
    /// Group G2.
    fn default() -> Self {
        LabelFnConfig {
            s: SCALING_GROUPS[1],
        }
    }
}

impl LabelFnConfig {
    pub fn new(s: [f64; 4]) -> Result<Self> {
        let cfg = LabelFnConfig { s };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Preset `G1`..`G6` by 1-based group number.
    pub fn group(n: usize) -> Result<Self> {
        SCALING_GROUPS
            .get(n.wrapping_sub(1))
            .map(|&s| LabelFnConfig { s })
            .ok_or_else(|| Error::param(format!("scaling group must be G1..G6, got G{n}")))
    }

    /// Parses a preset name such as `"G2"` (case-insensitive).
    pub fn preset(name: &str) -> Result<Self> {
        let n = name
            .trim()
            .strip_prefix(['G', 'g'])
            .and_then(|d| d.parse().ok())
            .ok_or_else(|| Error::param(format!("unknown scaling group {name:?}")))?;
        Self::group(n)
    }

    /// Every factor must be finite and positive; that alone makes the label
    /// strictly decreasing and continuous.
    pub fn validate(&self) -> Result<()> {
        if self.s.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::param(format!(
                "scaling factors must be positive, got {:?}",
                self.s
            )))
        }
    }

    /// Whether `s1 < s2 < 1 < s3 < s4`, the recommended shape.
    ///
    /// Groups G4 and G6 of the published table do not satisfy it.
    pub fn follows_ordering_principle(&self) -> bool {
        let [s1, s2, s3, s4] = self.s;
        s1 < s2 && s2 < 1.0 && 1.0 < s3 && s3 < s4
    }

    /// Running sums `p1, p2, p3` (with `p0 = 0` implied).
    pub fn partial_sums(&self) -> [f64; 3] {
        let [s1, s2, s3, _] = self.s;
        let p1 = s1;
        let p2 = p1 + s2;
        let p3 = p2 + s3;
        [p1, p2, p3]
    }

    /// Label at `σ = 4.5`, the minimum of the range.
    pub fn min_label(&self) -> f64 {
        1.0 / (1.0 + self.partial_sums()[2] + self.s[3])
    }
}

/// Quality label for a line blurred with standard deviation `sigma`.
pub fn quality_label(sigma: f64, cfg: &LabelFnConfig) -> Result<f64> {
    if !(SIGMA_MIN..=SIGMA_MAX).contains(&sigma) {
        return Err(Error::Domain(format!(
            "sigma must lie in [{SIGMA_MIN}, {SIGMA_MAX}], got {sigma}"
        )));
    }
    let [s1, s2, s3, s4] = cfg.s;
    let [p1, p2, p3] = cfg.partial_sums();
    let d = if sigma < 1.5 {
        (sigma - 0.5) * s1
    } else if sigma < 2.5 {
        p1 + (sigma - 1.5) * s2
    } else if sigma < 3.5 {
        p2 + (sigma - 2.5) * s3
    } else {
        p3 + (sigma - 3.5) * s4
    };
    Ok(1.0 / (1.0 + d))
}

/// The unique σ whose label is `q`.
pub fn invert_label(q: f64, cfg: &LabelFnConfig) -> Result<f64> {
    let lo = cfg.min_label();
    if !(q.is_finite() && q <= 1.0 && q >= lo) {
        return Err(Error::Domain(format!(
            "quality must lie in [{lo}, 1], got {q}"
        )));
    }
    let [s1, s2, s3, s4] = cfg.s;
    let [p1, p2, p3] = cfg.partial_sums();
    let d = 1.0 / q - 1.0;
    let sigma = if d < p1 {
        0.5 + d / s1
    } else if d < p2 {
        1.5 + (d - p1) / s2
    } else if d < p3 {
        2.5 + (d - p2) / s3
    } else {
        3.5 + (d - p3) / s4
    };
    Ok(sigma.clamp(SIGMA_MIN, SIGMA_MAX))
}
