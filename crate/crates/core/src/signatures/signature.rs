//! Aggregate action and tool profiles over normalized procedure time.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::sequence::{quartile_actions, quartile_tools, ActionSequence, ToolSequence};
use crate::error::{Error, Result};
use crate::stream::{Action, Category};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SignatureOptions {
    /// Number of points on the normalized time grid.
    pub grid: usize,
    /// Centered moving-average window in grid points; must be odd.
    pub window: usize,
}

impl Default for SignatureOptions {
    fn default() -> Self {
        Self { grid: 100, window: 5 }
    }
}

impl SignatureOptions {
    pub fn validate(&self) -> Result<()> {
        if self.grid < 2 {
            return Err(Error::Config("signature grid needs at least 2 points".into()));
        }
        if self.window == 0 || self.window % 2 == 0 {
            return Err(Error::Config(format!(
                "moving-average window must be odd, got {}",
                self.window
            )));
        }
        Ok(())
    }
}

/// Six curves over `t`: the three surgical actions then the three tools.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curves {
    pub actions: [Vec<f64>; 3],
    pub tools: [Vec<f64>; 3],
}

/// Averaged profile of a cohort of procedures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurgicalSignature {
    pub procedures: usize,
    pub t: Vec<f64>,
    pub raw: Curves,
    pub smoothed: Curves,
    /// Mean action fraction per quartile, averaged over procedures.
    pub quartile_actions: [[f64; 3]; 4],
    /// Mean tool count per quartile, averaged over procedures.
    pub quartile_tools: [[f64; 3]; 4],
}

/// Step of an `n`-step sequence covering normalized time `t`.
fn step_at(t: f64, n: usize) -> usize {
    ((t * n as f64).floor() as usize).min(n - 1)
}

/// Centered moving average; windows are truncated at the edges.
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..xs.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(xs.len());
            xs[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Average per-procedure indicator and tool curves on a common time grid
/// `t_k = k / (grid - 1)`, then smooth.
///
/// Sequences are expected to be background-excised; empty ones are skipped.
pub fn build_signature(
    actions: &[ActionSequence],
    tools: &[ToolSequence],
    opts: &SignatureOptions,
) -> Result<SurgicalSignature> {
    opts.validate()?;
    if actions.len() != tools.len() {
        return Err(Error::invariant(
            "build_signature.tools",
            "one tool sequence per action sequence",
        ));
    }
    let g = opts.grid;
    let t: Vec<f64> = (0..g).map(|k| k as f64 / (g - 1) as f64).collect();
    // integer action counts keep the average independent of procedure order
    let mut action_hits = [vec![0usize; g], vec![0usize; g], vec![0usize; g]];
    let mut tool_sum = [vec![0.0; g], vec![0.0; g], vec![0.0; g]];
    let mut qa = [[0.0; 3]; 4];
    let mut qt = [[0.0; 3]; 4];
    let mut used = 0usize;
    for (a, tl) in actions.iter().zip(tools) {
        if a.is_empty() {
            tracing::warn!(video = %a.video_id, "empty sequence skipped");
            continue;
        }
        if a.len() != tl.len() {
            return Err(Error::invariant(
                "build_signature.tools",
                format!("{}: tool and action lengths differ", a.video_id),
            ));
        }
        used += 1;
        for (k, &tk) in t.iter().enumerate() {
            let j = step_at(tk, a.len());
            if let Some(i) = Action::SURGICAL.iter().position(|s| *s == a.labels[j]) {
                action_hits[i][k] += 1;
            }
            for c in 0..3 {
                tool_sum[c][k] += tl.counts[j][c];
            }
        }
        let (qa1, qt1) = (quartile_actions(a), quartile_tools(tl));
        for q in 0..4 {
            for c in 0..3 {
                qa[q][c] += qa1.values[q][c];
                qt[q][c] += qt1.values[q][c];
            }
        }
    }
    if used == 0 {
        return Err(Error::Empty("no non-empty procedure for signature".into()));
    }
    let n = used as f64;
    let raw = Curves {
        actions: action_hits.map(|h| h.iter().map(|&c| c as f64 / n).collect()),
        tools: tool_sum.map(|s| s.iter().map(|v| v / n).collect()),
    };
    let smoothed = Curves {
        actions: raw.actions.clone().map(|c| moving_average(&c, opts.window)),
        tools: raw.tools.clone().map(|c| moving_average(&c, opts.window)),
    };
    Ok(SurgicalSignature {
        procedures: used,
        t,
        raw,
        smoothed,
        quartile_actions: qa.map(|r| r.map(|v| v / n)),
        quartile_tools: qt.map(|r| r.map(|v| v / n)),
    })
}

/// Write signatures as CSV. Each class contributes `raw` and `smoothed` rows
/// per grid point and one `quartile` row per quartile (at its midpoint time).
pub fn write_signature_csv<W: Write>(out: W, sigs: &[(String, SurgicalSignature)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["class", "section", "index", "t"];
    header.extend(Action::SURGICAL.iter().map(|a| a.as_str()));
    header.extend(Category::TOOLS.iter().map(|c| c.as_str()));
    w.write_record(&header)?;
    for (class, sig) in sigs {
        for (section, curves) in [("raw", &sig.raw), ("smoothed", &sig.smoothed)] {
            for (k, t) in sig.t.iter().enumerate() {
                let mut row = vec![class.clone(), section.into(), k.to_string(), t.to_string()];
                row.extend(curves.actions.iter().map(|c| c[k].to_string()));
                row.extend(curves.tools.iter().map(|c| c[k].to_string()));
                w.write_record(&row)?;
            }
        }
        for q in 0..4 {
            let mut row = vec![
                class.clone(),
                "quartile".into(),
                q.to_string(),
                ((q as f64 + 0.5) / 4.0).to_string(),
            ];
            row.extend(sig.quartile_actions[q].iter().map(|v| v.to_string()));
            row.extend(sig.quartile_tools[q].iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| Error::io("signature csv", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use Action::{Cutting as C, Suturing as S, Tying as T};

    fn pair(labels: &[Action]) -> (ActionSequence, ToolSequence) {
        let n = labels.len();
        (
            ActionSequence::new("v", 5.0, labels.to_vec()).unwrap(),
            ToolSequence::new("v", 5.0, (0..n).map(|i| [i as f64, 0.0, 1.0]).collect()).unwrap(),
        )
    }

    #[test]
    fn moving_average_truncates_edges() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let m = moving_average(&xs, 5);
        assert_eq!(m[0], 2.0); // (1+2+3)/3
        assert_eq!(m[1], 2.5); // (1+2+3+4)/4
        assert_eq!(m[2], 3.0);
        assert_eq!(m[5], 5.0);
        assert_eq!(moving_average(&xs, 1), xs.to_vec());
    }

    #[test]
    fn single_procedure_is_its_own_smoothed_indicators() {
        let (a, t) = pair(&[C, C, T, S]);
        let opts = SignatureOptions { grid: 8, window: 3 };
        let sig = build_signature(&[a.clone()], &[t], &opts).unwrap();
        // grid t_k = k/7 maps to steps floor(4k/7)
        let steps: Vec<usize> = (0..8).map(|k| (4 * k / 7).min(3)).collect();
        assert_eq!(steps, vec![0, 0, 1, 1, 2, 2, 3, 4usize.min(3)]);
        let cut: Vec<f64> = steps.iter().map(|&j| f64::from(u8::from(a.labels[j] == C))).collect();
        assert_eq!(sig.raw.actions[0], cut);
        assert_eq!(sig.smoothed.actions[0], moving_average(&cut, 3));
    }

    #[test]
    fn opposite_procedures_average_to_half() {
        let (a1, t1) = pair(&[C, T, C, T]);
        let (a2, t2) = pair(&[T, C, T, C]);
        let sig = build_signature(&[a1, a2], &[t1, t2], &SignatureOptions::default()).unwrap();
        assert!(sig.raw.actions[0].iter().all(|&v| v == 0.5));
        assert!(sig.raw.actions[1].iter().all(|&v| v == 0.5));
        assert!(sig.raw.actions[2].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn order_of_procedures_does_not_matter() {
        let (a1, t1) = pair(&[C, C, T, S, S]);
        let (a2, t2) = pair(&[C, S, T]);
        let (a3, t3) = pair(&[C, C, C, C, T, T, S]);
        let opts = SignatureOptions::default();
        let s1 = build_signature(&[a1.clone(), a2.clone(), a3.clone()], &[t1.clone(), t2.clone(), t3.clone()], &opts).unwrap();
        let s2 = build_signature(&[a3, a1, a2], &[t3, t1, t2], &opts).unwrap();
        assert_eq!(s1.raw.actions, s2.raw.actions);
        assert_eq!(s1.smoothed.actions, s2.smoothed.actions);
        for c in 0..3 {
            for (x, y) in s1.raw.tools[c].iter().zip(&s2.raw.tools[c]) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_empty_and_even_window() {
        assert!(build_signature(&[], &[], &SignatureOptions::default()).is_err());
        let (a, t) = pair(&[C]);
        let opts = SignatureOptions { grid: 10, window: 4 };
        assert!(build_signature(&[a], &[t], &opts).is_err());
    }
}
