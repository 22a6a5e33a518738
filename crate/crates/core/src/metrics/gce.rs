use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability vector over named groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDistribution {
    pub labels: Vec<String>,
    pub probs: Vec<f64>,
}

impl GroupDistribution {
    pub fn new(labels: Vec<String>, probs: Vec<f64>) -> Result<Self> {
        if labels.len() != probs.len() {
            return Err(Error::InvalidInput(format!(
                "{} labels for {} probabilities",
                labels.len(),
                probs.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidInput(format!("probabilities must be non-negative: {probs:?}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("probabilities sum to {total}, not 1")));
        }
        Ok(GroupDistribution { labels, probs })
    }

    /// Normalizes non-negative masses; an all-zero mass gives the uniform distribution.
    pub fn from_masses(labels: Vec<String>, masses: &[f64]) -> (Self, bool) {
        let total: f64 = masses.iter().sum();
        let degenerate = total <= 0.0;
        let probs = if degenerate {
            vec![1.0 / masses.len() as f64; masses.len()]
        } else {
            masses.iter().map(|m| m / total).collect()
        };
        (GroupDistribution { labels, probs }, degenerate)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GceParams {
    pub beta: f64,
    /// Distance from 0 or 1 within which β uses the KL closed form.
    pub limit_tolerance: f64,
    /// Pseudo-count added to every item group's exposure.
    pub smoothing: f64,
}

impl Default for GceParams {
    fn default() -> Self {
        GceParams {
            beta: -1.0,
            limit_tolerance: 1e-9,
            smoothing: 1.0,
        }
    }
}

impl GceParams {
    pub fn validate(&self) -> Result<()> {
        if !self.beta.is_finite() || !(self.limit_tolerance >= 0.0) || !(self.smoothing >= 0.0) {
            return Err(Error::InvalidInput(format!("invalid GCE parameters {self:?}")));
        }
        Ok(())
    }
}

/// `Σ_j a_j ln(a_j / b_j)`; terms with `a_j = 0` vanish.
fn kl(a: &[f64], b: &[f64], what: &str) -> Result<f64> {
    let mut sum = 0.0;
    for (j, (&x, &y)) in a.iter().zip(b).enumerate() {
        if x == 0.0 {
            continue;
        }
        if y == 0.0 {
            return Err(Error::DivergentMeasure(format!("{what}: group {j} has zero mass")));
        }
        sum += x * (x / y).ln();
    }
    Ok(sum)
}

/// Generalized cross-entropy between a target `pf` and a model distribution `pm`.
///
/// `[Σ_j pf_j^β pm_j^(1−β) − 1] / (β(1−β))`, with the KL limits at β = 0 and β = 1. The value is
/// never positive and is exactly 0 when the distributions coincide. Zero entries that would make
/// the measure infinite are reported as errors.
pub fn gce(pf: &GroupDistribution, pm: &GroupDistribution, params: &GceParams) -> Result<f64> {
    gce_probs(&pf.probs, &pm.probs, params.beta, params.limit_tolerance)
}

pub fn gce_probs(pf: &[f64], pm: &[f64], beta: f64, tolerance: f64) -> Result<f64> {
    if pf.len() != pm.len() {
        return Err(Error::InvalidInput(format!(
            "distribution lengths differ: {} vs {}",
            pf.len(),
            pm.len()
        )));
    }
    if !beta.is_finite() {
        return Err(Error::InvalidInput(format!("beta must be finite, got {beta}")));
    }
    if pf == pm {
        return Ok(0.0);
    }
    if beta.abs() < tolerance {
        return kl(pm, pf, "target distribution at beta = 0").map(|v| -v);
    }
    if (beta - 1.0).abs() < tolerance {
        return kl(pf, pm, "model distribution at beta = 1").map(|v| -v);
    }
    let mut sum = 0.0;
    for (j, (&f, &m)) in pf.iter().zip(pm).enumerate() {
        let term = if f == 0.0 && m == 0.0 {
            0.0
        } else if f == 0.0 {
            if beta < 0.0 {
                return Err(Error::DivergentMeasure(format!(
                    "target group {j} has zero mass with beta = {beta}"
                )));
            }
            0.0
        } else if m == 0.0 {
            if beta > 1.0 {
                return Err(Error::DivergentMeasure(format!(
                    "model group {j} has zero mass with beta = {beta}; enable smoothing"
                )));
            }
            0.0
        } else {
            f.powf(beta) * m.powf(1.0 - beta)
        };
        sum += term;
    }
    Ok((sum - 1.0) / (beta * (1.0 - beta)))
}

/// Index of the smallest `|GCE|` among defined values; ties go to the lower index.
pub fn highlight(values: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.iter().enumerate() {
        if let Some(v) = v {
            if best.is_none_or(|(_, b)| v.abs() < b) {
                best = Some((i, v.abs()));
            }
        }
    }
    best.map(|(i, _)| i)
}
