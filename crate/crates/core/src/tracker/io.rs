//! Tracks file: a header line, then one line per frame with the reported
//! tracks keyed by track id.
//!
//! ```text
//! {"video_id":"v1","fps":30.0,"width":1280,"height":720}
//! {"frame":0,"t":0.0,"tracks":{"1":{"box":[..],"det":[..],"kps":[[x,y,v],..]}}}
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sort::{Tracker, TrackerConfig};
use crate::error::{Error, Result};
use crate::stream::format::RawHeader;
use crate::stream::{BBox, FrameRecord, VideoStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackEntry {
    /// Filtered box `[x0, y0, x1, y1]`.
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    /// Matched detection box.
    pub det: [f64; 4],
    /// Keypoints `[x, y, v]` attached to the matched detection, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kps: Option<Vec<[f64; 3]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackFrame {
    pub frame: u64,
    pub t: f64,
    pub tracks: BTreeMap<u64, TrackEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackedStream {
    pub video_id: String,
    pub fps: f64,
    pub width: u32,
    pub height: u32,
    pub frames: Vec<TrackFrame>,
}

/// Minimum IoU between a keypoint set's owner box and a detection for the
/// keypoints to be attached to that detection's track.
const KEYPOINT_OWNER_IOU: f64 = 0.5;

fn keypoints_for(frame: &FrameRecord, det: &BBox) -> Option<Vec<[f64; 3]>> {
    let mut best: Option<(f64, usize)> = None;
    for (i, k) in frame.keypoints.iter().enumerate() {
        let v = k.owner_box.iou(det);
        if v >= KEYPOINT_OWNER_IOU && best.map_or(true, |(b, _)| v > b) {
            best = Some((v, i));
        }
    }
    best.map(|(_, i)| {
        frame.keypoints[i]
            .points()
            .iter()
            .map(|p| [p.x, p.y, if p.visible { 1.0 } else { 0.0 }])
            .collect()
    })
}

/// Run the tracker over a whole stream.
pub fn track_stream(stream: &VideoStream, config: &TrackerConfig) -> Result<TrackedStream> {
    let mut tracker = Tracker::new(config.clone())?;
    let frames = stream
        .frames
        .iter()
        .map(|f| {
            let tracks = tracker
                .step(f)
                .into_iter()
                .map(|o| {
                    (
                        o.track_id,
                        TrackEntry {
                            bbox: o.bbox.as_array(),
                            det: o.detection.as_array(),
                            kps: keypoints_for(f, &o.detection),
                        },
                    )
                })
                .collect();
            TrackFrame {
                frame: f.frame_index,
                t: f.timestamp_s,
                tracks,
            }
        })
        .collect();
    Ok(TrackedStream {
        video_id: stream.video_id.clone(),
        fps: stream.fps,
        width: stream.width,
        height: stream.height,
        frames,
    })
}

pub fn write_tracks<W: Write>(ts: &TrackedStream, mut w: W) -> Result<()> {
    let io = |e| Error::io("<tracks>", e);
    let header = RawHeader {
        video_id: ts.video_id.clone(),
        fps: ts.fps,
        width: ts.width,
        height: ts.height,
        metadata: None,
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n").map_err(io)?;
    for f in &ts.frames {
        serde_json::to_writer(&mut w, f)?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn save_tracks(ts: &TrackedStream, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_tracks(ts, BufWriter::new(f))
}

pub fn read_tracks<R: BufRead>(reader: R) -> Result<TrackedStream> {
    let mut header: Option<RawHeader> = None;
    let mut frames = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |e: serde_json::Error| Error::Parse {
            line: lineno,
            message: e.to_string(),
        };
        if header.is_none() {
            header = Some(serde_json::from_str(&line).map_err(parse_err)?);
        } else {
            let f: TrackFrame = serde_json::from_str(&line).map_err(parse_err)?;
            for e in f.tracks.values() {
                for b in [e.bbox, e.det] {
                    BBox::new(b[0], b[1], b[2], b[3]).map_err(|e| e.at_line(lineno))?;
                }
            }
            frames.push(f);
        }
    }
    let h = header.ok_or_else(|| Error::Empty("tracks file has no header".into()))?;
    if frames.windows(2).any(|w| w[1].frame <= w[0].frame) {
        return Err(Error::invariant(
            "TrackFrame.frame",
            "frame indices must strictly increase",
        ));
    }
    Ok(TrackedStream {
        video_id: h.video_id,
        fps: h.fps,
        width: h.width,
        height: h.height,
        frames,
    })
}

pub fn load_tracks(path: impl AsRef<Path>) -> Result<TrackedStream> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_tracks(BufReader::new(f))
}
