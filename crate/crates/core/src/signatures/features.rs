//! Thirty-feature parameterization of a procedure and cohort standardization.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::sequence::{quartile_actions, quartile_tools, ActionSequence, ToolSequence};
use crate::error::{Error, Result};
use crate::stream::Action;

pub const NUM_FEATURES: usize = 30;

/// Feature names in vector order: action-major quartile features, tool
/// quartile features, then the six transition probabilities.
pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "cutting_q1",
    "cutting_q2",
    "cutting_q3",
    "cutting_q4",
    "tying_q1",
    "tying_q2",
    "tying_q3",
    "tying_q4",
    "suturing_q1",
    "suturing_q2",
    "suturing_q3",
    "suturing_q4",
    "electrocautery_q1",
    "electrocautery_q2",
    "electrocautery_q3",
    "electrocautery_q4",
    "needle_driver_q1",
    "needle_driver_q2",
    "needle_driver_q3",
    "needle_driver_q4",
    "forceps_q1",
    "forceps_q2",
    "forceps_q3",
    "forceps_q4",
    "p_cutting_tying",
    "p_cutting_suturing",
    "p_tying_cutting",
    "p_tying_suturing",
    "p_suturing_cutting",
    "p_suturing_tying",
];

/// Offset of the first tool feature.
pub const TOOL_OFFSET: usize = 12;
/// Offset of the first transition feature.
pub const TRANSITION_OFFSET: usize = 24;

/// Ordered `(from, to)` pairs of the transition features.
pub const TRANSITIONS: [(Action, Action); 6] = [
    (Action::Cutting, Action::Tying),
    (Action::Cutting, Action::Suturing),
    (Action::Tying, Action::Cutting),
    (Action::Tying, Action::Suturing),
    (Action::Suturing, Action::Cutting),
    (Action::Suturing, Action::Tying),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transitions {
    pub values: [f64; 6],
    /// Set when the sequence had fewer than two runs.
    pub degenerate: bool,
}

/// Probability of moving from one surgical action to another, over the
/// sequence with consecutive repeats collapsed. Background steps are ignored.
pub fn transition_probabilities(seq: &ActionSequence) -> Transitions {
    let mut runs: Vec<Action> = Vec::new();
    for &a in seq.labels.iter().filter(|a| !a.is_background()) {
        if runs.last() != Some(&a) {
            runs.push(a);
        }
    }
    let mut counts = [[0usize; 3]; 3];
    for w in runs.windows(2) {
        counts[w[0].index()][w[1].index()] += 1;
    }
    let values = TRANSITIONS.map(|(from, to)| {
        let out: usize = counts[from.index()].iter().sum();
        if out == 0 {
            0.0
        } else {
            counts[from.index()][to.index()] as f64 / out as f64
        }
    });
    let degenerate = runs.len() < 2;
    if degenerate {
        tracing::warn!(video = %seq.video_id, "fewer than two action runs; no transitions");
    }
    Transitions { values, degenerate }
}

/// One procedure's thirty features with an optional class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub video_id: String,
    pub label: Option<String>,
    pub values: [f64; NUM_FEATURES],
}

/// Features of one excised procedure. Tool features hold raw mean counts
/// until [`normalize_tool_features`] is applied across the cohort.
pub fn featurize(actions: &ActionSequence, tools: &ToolSequence) -> Result<FeatureVector> {
    if actions.is_empty() {
        return Err(Error::Empty(format!("{}: no non-background steps", actions.video_id)));
    }
    if actions.len() != tools.len() {
        return Err(Error::invariant(
            "ToolSequence.counts",
            format!("{}: tool and action lengths differ", actions.video_id),
        ));
    }
    let qa = quartile_actions(actions);
    let qt = quartile_tools(tools);
    let tr = transition_probabilities(actions);
    let mut values = [0.0; NUM_FEATURES];
    for c in 0..3 {
        for q in 0..4 {
            values[c * 4 + q] = qa.values[q][c];
            values[TOOL_OFFSET + c * 4 + q] = qt.values[q][c];
        }
    }
    values[TRANSITION_OFFSET..].copy_from_slice(&tr.values);
    Ok(FeatureVector {
        video_id: actions.video_id.clone(),
        label: None,
        values,
    })
}

/// Featurize every procedure and min-max normalize tool features across them.
/// Procedures with no surgical step are skipped with a warning.
pub fn featurize_cohort(procedures: &[(ActionSequence, ToolSequence)]) -> Result<Vec<FeatureVector>> {
    let mut out = Vec::with_capacity(procedures.len());
    for (a, t) in procedures {
        if a.is_empty() {
            tracing::warn!(video = %a.video_id, "no surgical steps; skipped");
            continue;
        }
        out.push(featurize(a, t)?);
    }
    normalize_tool_features(&mut out);
    Ok(out)
}

/// Min-max scale each tool class's four quartile features into [0, 1] using
/// the minimum and maximum over the whole cohort. A class that never varies
/// becomes 0.
pub fn normalize_tool_features(cohort: &mut [FeatureVector]) {
    for c in 0..3 {
        let cols = TOOL_OFFSET + c * 4..TOOL_OFFSET + c * 4 + 4;
        let (lo, hi) = cohort
            .iter()
            .flat_map(|f| f.values[cols.clone()].iter().copied())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let span = hi - lo;
        for f in cohort.iter_mut() {
            for v in &mut f.values[cols.clone()] {
                *v = if span > 0.0 { (*v - lo) / span } else { 0.0 };
            }
        }
    }
}

/// Standardized feature table with the statistics used.
#[derive(Debug, Clone, PartialEq)]
pub struct ZScore {
    /// Samples in rows.
    pub values: DMatrix<f64>,
    pub mean: Vec<f64>,
    /// Population standard deviation.
    pub sd: Vec<f64>,
    /// Dimensions with zero spread, left at 0.
    pub constant: Vec<usize>,
}

/// Standardize each column to zero mean and unit population standard deviation.
pub fn zscore(x: &DMatrix<f64>) -> Result<ZScore> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InsufficientData(format!("standardization needs >= 2 samples, got {n}")));
    }
    let mut values = x.clone();
    let mut mean = Vec::with_capacity(x.ncols());
    let mut sd = Vec::with_capacity(x.ncols());
    let mut constant = Vec::new();
    for (j, mut col) in values.column_iter_mut().enumerate() {
        let m = col.mean();
        let s = (col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt();
        if s > 0.0 {
            col.apply(|v| *v = (*v - m) / s);
        } else {
            col.fill(0.0);
            constant.push(j);
        }
        mean.push(m);
        sd.push(s);
    }
    if !constant.is_empty() {
        tracing::warn!(?constant, "constant feature dimensions");
    }
    Ok(ZScore {
        values,
        mean,
        sd,
        constant,
    })
}

/// Stack feature vectors into a samples-by-features matrix.
pub fn feature_matrix(features: &[FeatureVector]) -> DMatrix<f64> {
    DMatrix::from_fn(features.len(), NUM_FEATURES, |i, j| features[i].values[j])
}

pub fn write_features_csv<W: Write>(out: W, features: &[FeatureVector]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["video_id", "label"];
    header.extend(FEATURE_NAMES);
    w.write_record(&header)?;
    for f in features {
        let mut row = vec![f.video_id.clone(), f.label.clone().unwrap_or_default()];
        row.extend(f.values.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("features csv", e))?;
    Ok(())
}

pub fn read_features_csv<R: Read>(input: R) -> Result<Vec<FeatureVector>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let expected: Vec<&str> = ["video_id", "label"].into_iter().chain(FEATURE_NAMES).collect();
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Parse {
            line: 1,
            message: "unexpected feature header".into(),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let mut values = [0.0; NUM_FEATURES];
        for (j, v) in values.iter_mut().enumerate() {
            *v = rec[j + 2].parse().map_err(|e| Error::Parse {
                line,
                message: format!("{}: {e}", FEATURE_NAMES[j]),
            })?;
        }
        let label = (!rec[1].is_empty()).then(|| rec[1].to_string());
        out.push(FeatureVector {
            video_id: rec[0].to_string(),
            label,
            values,
        });
    }
    Ok(out)
}
