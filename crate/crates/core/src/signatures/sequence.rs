//! Fixed-resolution action and tool timelines, background excision and
//! quartile aggregation.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::{Action, VideoStream};

/// Default timeline resolution in seconds.
pub const DEFAULT_RESOLUTION_S: f64 = 5.0;

/// Hard action labels at a fixed time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSequence {
    pub video_id: String,
    pub resolution_s: f64,
    pub labels: Vec<Action>,
}

/// Mean per-frame detection count of each tool class at each step, in
/// [`Category::TOOLS`](crate::stream::Category::TOOLS) order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSequence {
    pub video_id: String,
    pub resolution_s: f64,
    pub counts: Vec<[f64; 3]>,
}

impl ActionSequence {
    pub fn new(video_id: impl Into<String>, resolution_s: f64, labels: Vec<Action>) -> Result<Self> {
        check_resolution(resolution_s)?;
        Ok(Self {
            video_id: video_id.into(),
            resolution_s,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

impl ToolSequence {
    pub fn new(video_id: impl Into<String>, resolution_s: f64, counts: Vec<[f64; 3]>) -> Result<Self> {
        check_resolution(resolution_s)?;
        if counts.iter().flatten().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::invariant("ToolSequence.counts", "counts must be >= 0"));
        }
        Ok(Self {
            video_id: video_id.into(),
            resolution_s,
            counts,
        })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

fn check_resolution(r: f64) -> Result<()> {
    if r.is_finite() && r > 0.0 {
        Ok(())
    } else {
        Err(Error::invariant("resolution_s", "must be > 0"))
    }
}

/// Resample a stream's per-frame labels and tool counts to `resolution_s` steps.
///
/// Each step takes the most frequent label among its frames (ties go to the
/// earlier action in [`Action::ALL`]); a step with no labelled frame is
/// background. Tool counts are averaged over the frames present in the step.
pub fn resample_stream(stream: &VideoStream, resolution_s: f64) -> Result<(ActionSequence, ToolSequence)> {
    check_resolution(resolution_s)?;
    let frames_per_step = stream.fps * resolution_s;
    let n_steps = (stream.covered_duration_s() / resolution_s).ceil().max(1.0) as usize;
    let mut votes = vec![[0usize; 4]; n_steps];
    let mut tool_sums = vec![[0.0f64; 3]; n_steps];
    let mut frames = vec![0usize; n_steps];
    for f in &stream.frames {
        let k = ((f.frame_index as f64 / frames_per_step).floor() as usize).min(n_steps - 1);
        if let Some(a) = f.action {
            votes[k][a.index()] += 1;
        }
        for (s, c) in tool_sums[k].iter_mut().zip(f.tool_counts()) {
            *s += c as f64;
        }
        frames[k] += 1;
    }
    let labels = votes
        .iter()
        .map(|v| {
            let mut best = Action::Background;
            let mut best_n = 0;
            for a in Action::ALL {
                if v[a.index()] > best_n {
                    best = a;
                    best_n = v[a.index()];
                }
            }
            best
        })
        .collect();
    let counts = tool_sums
        .iter()
        .zip(&frames)
        .map(|(s, &n)| {
            if n == 0 {
                [0.0; 3]
            } else {
                s.map(|x| x / n as f64)
            }
        })
        .collect();
    Ok((
        ActionSequence::new(&stream.video_id, resolution_s, labels)?,
        ToolSequence::new(&stream.video_id, resolution_s, counts)?,
    ))
}

/// Drop background steps, keeping the rest in order.
pub fn excise_background(seq: &ActionSequence) -> ActionSequence {
    let labels: Vec<Action> = seq.labels.iter().copied().filter(|a| !a.is_background()).collect();
    if labels.is_empty() && !seq.is_empty() {
        tracing::warn!(video = %seq.video_id, "sequence is entirely background");
    }
    ActionSequence {
        video_id: seq.video_id.clone(),
        resolution_s: seq.resolution_s,
        labels,
    }
}

/// Drop background steps from an action sequence and the matching tool steps.
pub fn excise_background_aligned(
    actions: &ActionSequence,
    tools: &ToolSequence,
) -> Result<(ActionSequence, ToolSequence)> {
    if actions.len() != tools.len() {
        return Err(Error::invariant(
            "ToolSequence.counts",
            format!("length {} differs from action length {}", tools.len(), actions.len()),
        ));
    }
    let counts = actions
        .labels
        .iter()
        .zip(&tools.counts)
        .filter(|(a, _)| !a.is_background())
        .map(|(_, c)| *c)
        .collect();
    Ok((
        excise_background(actions),
        ToolSequence {
            video_id: tools.video_id.clone(),
            resolution_s: tools.resolution_s,
            counts,
        },
    ))
}

/// Resample a stream and drop its background steps.
pub fn procedure_sequences(stream: &VideoStream, resolution_s: f64) -> Result<(ActionSequence, ToolSequence)> {
    let (a, t) = resample_stream(stream, resolution_s)?;
    excise_background_aligned(&a, &t)
}

/// Index ranges of the four contiguous quartiles of `n` steps. Sizes differ
/// by at most one; earlier quartiles take the remainder.
pub fn quartile_ranges(n: usize) -> [Range<usize>; 4] {
    let (base, rem) = (n / 4, n % 4);
    let mut start = 0;
    std::array::from_fn(|i| {
        let len = base + usize::from(i < rem);
        let r = start..start + len;
        start += len;
        r
    })
}

/// Per-quartile means of `C` per-step values. Empty quartiles hold zeros and
/// are marked in `empty`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quartiles<const C: usize> {
    pub values: [[f64; C]; 4],
    pub empty: [bool; 4],
}

impl<const C: usize> Quartiles<C> {
    pub fn any_empty(&self) -> bool {
        self.empty.iter().any(|&e| e)
    }
}

fn quartile_means<const C: usize>(steps: &[[f64; C]]) -> Quartiles<C> {
    let ranges = quartile_ranges(steps.len());
    let mut out = Quartiles {
        values: [[0.0; C]; 4],
        empty: [false; 4],
    };
    for (q, r) in ranges.into_iter().enumerate() {
        if r.is_empty() {
            out.empty[q] = true;
            continue;
        }
        let n = r.len() as f64;
        for step in &steps[r] {
            for (acc, v) in out.values[q].iter_mut().zip(step) {
                *acc += v;
            }
        }
        for v in &mut out.values[q] {
            *v /= n;
        }
    }
    if out.any_empty() {
        tracing::warn!(steps = steps.len(), "fewer than four steps; empty quartiles");
    }
    out
}

/// Fraction of steps in each quartile labelled with each surgical action, in
/// [`Action::SURGICAL`] order.
pub fn quartile_actions(seq: &ActionSequence) -> Quartiles<3> {
    let steps: Vec<[f64; 3]> = seq
        .labels
        .iter()
        .map(|a| Action::SURGICAL.map(|s| f64::from(u8::from(s == *a))))
        .collect();
    quartile_means(&steps)
}

/// Mean tool counts in each quartile.
pub fn quartile_tools(seq: &ToolSequence) -> Quartiles<3> {
    quartile_means(&seq.counts)
}
