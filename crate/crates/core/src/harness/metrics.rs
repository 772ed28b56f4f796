use serde::{Deserialize, Serialize};

use super::{HarnessError, Mode, TrialRecord};
use crate::objectives::Objective;

/// Box-plot summary: quartiles by linear interpolation, whiskers at the most
/// extreme data within 1.5 IQR of the box, everything beyond as outliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSummary {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl BoxSummary {
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q1 = quantile(&v, 0.25);
        let q3 = quantile(&v, 0.75);
        let iqr = q3 - q1;
        let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
        let inside: Vec<f64> = v.iter().copied().filter(|x| *x >= lo_fence && *x <= hi_fence).collect();
        Some(Self {
            n: v.len(),
            min: v[0],
            q1,
            median: quantile(&v, 0.5),
            q3,
            max: v[v.len() - 1],
            whisker_low: inside.first().copied().unwrap_or(q1),
            whisker_high: inside.last().copied().unwrap_or(q3),
            outliers: v.iter().copied().filter(|x| *x < lo_fence || *x > hi_fence).collect(),
        })
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    BoxSummary::from_values(values).map(|s| s.median)
}

/// Search-space reduction of the worst-case successful seed box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeMetrics {
    pub v_orig: f64,
    pub v_pre: f64,
    pub reduction: f64,
    pub minima_orig: Option<f64>,
    pub minima_pre: Option<f64>,
    /// Trial whose box was selected.
    pub trial_id: usize,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
}

/// Volume and trapped-minima counts for one box against the full bounds.
pub fn box_metrics(objective: &Objective, lb: &[f64], ub: &[f64]) -> (f64, f64, Option<f64>, Option<f64>) {
    let v_orig = objective.volume();
    let v_pre: f64 = lb.iter().zip(ub).map(|(l, u)| u - l).product();
    let lattice = objective.minima_lattice();
    let minima_pre = lattice.map(|lat| lb.iter().zip(ub).map(|(&l, &u)| lat.count_in(l, u) as f64).product());
    (v_orig, v_pre, objective.minima_count(), minima_pre)
}

/// Among correct hybrid trials of dimension `dims`, selects the seed box
/// with the largest volume and reports its reduction against the full
/// bounds.
pub fn volume_metrics(records: &[TrialRecord], objective: &Objective, dims: usize) -> Result<VolumeMetrics, HarnessError> {
    let mut best: Option<(&TrialRecord, f64)> = None;
    for r in records.iter().filter(|r| r.mode == Mode::Hybrid && r.dims == dims && r.correct) {
        let Some(sb) = &r.seedbox else { continue };
        let v = sb.volume();
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((r, v));
        }
    }
    let (rec, _) = best.ok_or(HarnessError::NoSuccessfulCapture { dims })?;
    let sb = rec.seedbox.as_ref().expect("selected record has a box");
    let (v_orig, v_pre, minima_orig, minima_pre) = box_metrics(objective, &sb.lb, &sb.ub);
    Ok(VolumeMetrics {
        v_orig,
        v_pre,
        reduction: v_orig / v_pre,
        minima_orig,
        minima_pre,
        trial_id: rec.trial_id,
        lb: sb.lb.clone(),
        ub: sb.ub.clone(),
    })
}
