//! Line-delimited JSON stream format.
//!
//! Line 1 is a header object; every following non-blank line is one frame:
//!
//! ```text
//! {"video_id":"v1","fps":30.0,"width":1280,"height":720,"metadata":{...}}
//! {"frame":0,"t":0.0,"dets":[["hand",0.97,10,20,110,120]],"kps":[{"points":[[x,y,1],...],"box":[10,20,110,120]}],"action":"cutting"}
//! ```
//!
//! See `docs/format.md` for the full schema.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::geometry::BBox;
use super::model::{
    Action, Category, Detection, FrameRecord, HandKeypoints, Keypoint, Metadata, VideoStream,
};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct RawHeader {
    pub video_id: String,
    pub fps: f64,
    #[serde(default)]
    pub width: u32,
    #[serde(default)]
    pub height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<Metadata>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawKeypoints {
    points: Vec<Vec<Value>>,
    #[serde(rename = "box")]
    owner_box: [f64; 4],
}

#[derive(Debug, Serialize, Deserialize)]
struct RawFrame {
    frame: u64,
    t: f64,
    #[serde(default)]
    dets: Vec<Vec<Value>>,
    #[serde(default)]
    kps: Vec<RawKeypoints>,
    #[serde(default)]
    action: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    probs: Option<BTreeMap<String, f64>>,
}

/// A parsed stream plus the non-fatal repairs made while reading it.
#[derive(Debug, Clone)]
pub struct ParsedStream {
    pub stream: VideoStream,
    pub warnings: Vec<String>,
}

/// Read and validate a stream file.
pub fn parse_stream(path: impl AsRef<Path>) -> Result<VideoStream> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let parsed = read_stream(BufReader::new(file))?;
    for w in &parsed.warnings {
        tracing::warn!(path = %path.display(), "{w}");
    }
    Ok(parsed.stream)
}

pub fn read_stream<R: BufRead>(reader: R) -> Result<ParsedStream> {
    let mut header: Option<RawHeader> = None;
    let mut frames: Vec<(usize, FrameRecord)> = Vec::new();

    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        match &header {
            None => {
                let h: RawHeader = serde_json::from_str(&line).map_err(|e| Error::Parse {
                    line: lineno,
                    message: format!("header: {e}"),
                })?;
                if !(h.fps.is_finite() && h.fps > 0.0) {
                    return Err(Error::Invariant {
                        line: Some(lineno),
                        field: "VideoStream.fps".into(),
                        message: format!("fps must be > 0, got {}", h.fps),
                    });
                }
                header = Some(h);
            }
            Some(_) => {
                let raw: RawFrame = serde_json::from_str(&line).map_err(|e| Error::Parse {
                    line: lineno,
                    message: e.to_string(),
                })?;
                let frame = convert_frame(raw, lineno).map_err(|e| e.at_line(lineno))?;
                frames.push((lineno, frame));
            }
        }
    }

    let header = header.ok_or_else(|| Error::Empty("stream has no header line".into()))?;
    if frames.is_empty() {
        return Err(Error::Empty(format!(
            "stream {} has no frame records",
            header.video_id
        )));
    }

    let mut warnings = Vec::new();
    if frames
        .windows(2)
        .any(|w| w[1].1.frame_index < w[0].1.frame_index)
    {
        warnings.push("frames out of order; re-sorted by frame index".to_string());
        frames.sort_by_key(|(_, f)| f.frame_index);
    }
    for w in frames.windows(2) {
        if w[0].1.frame_index == w[1].1.frame_index {
            return Err(Error::Invariant {
                line: Some(w[1].0),
                field: "FrameRecord.frame_index".into(),
                message: format!("duplicate frame index {}", w[1].1.frame_index),
            });
        }
    }

    let stream = VideoStream {
        video_id: header.video_id,
        fps: header.fps,
        width: header.width,
        height: header.height,
        frames: frames.into_iter().map(|(_, f)| f).collect(),
        metadata: header.metadata,
    };
    stream.validate()?;
    Ok(ParsedStream { stream, warnings })
}

fn number(v: &Value, field: &str) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| Error::invariant(field, format!("expected a number, got {v}")))
}

fn bbox_from(a: [f64; 4]) -> Result<BBox> {
    BBox::new(a[0], a[1], a[2], a[3])
}

fn convert_frame(raw: RawFrame, lineno: usize) -> Result<FrameRecord> {
    let mut detections = Vec::with_capacity(raw.dets.len());
    for det in &raw.dets {
        let (cls, conf, coords) = match det.len() {
            6 => (&det[0], Some(&det[1]), &det[2..]),
            5 => (&det[0], None, &det[1..]),
            n => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("detection must have 5 or 6 entries, got {n}"),
                })
            }
        };
        let cls = cls
            .as_str()
            .ok_or_else(|| Error::invariant("Detection.category", "class must be a string"))?;
        let category: Category = cls.parse()?;
        let confidence = match conf {
            None | Some(Value::Null) => 1.0,
            Some(v) => number(v, "Detection.confidence")?,
        };
        let mut c = [0.0; 4];
        for (slot, v) in c.iter_mut().zip(coords) {
            *slot = number(v, "BBox")?;
        }
        detections.push(Detection::new(bbox_from(c)?, category, confidence)?);
    }

    let mut keypoints = Vec::with_capacity(raw.kps.len());
    for k in &raw.kps {
        let mut points = Vec::with_capacity(k.points.len());
        for p in &k.points {
            if p.len() != 3 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("keypoint must be [x, y, v], got {} entries", p.len()),
                });
            }
            let visible = match &p[2] {
                Value::Bool(b) => *b,
                v => number(v, "Keypoint.visible")? != 0.0,
            };
            points.push(Keypoint {
                x: number(&p[0], "Keypoint.x")?,
                y: number(&p[1], "Keypoint.y")?,
                visible,
            });
        }
        keypoints.push(HandKeypoints::new(points, bbox_from(k.owner_box)?)?);
    }

    let action = raw.action.as_deref().map(str::parse::<Action>).transpose()?;
    let action_probs = match raw.probs {
        None => None,
        Some(m) => {
            let mut out = BTreeMap::new();
            for (k, p) in m {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::invariant(
                        "FrameRecord.probs",
                        format!("probability {p} for {k} outside [0, 1]"),
                    ));
                }
                out.insert(k.parse::<Action>()?, p);
            }
            Some(out)
        }
    };

    Ok(FrameRecord {
        frame_index: raw.frame,
        timestamp_s: raw.t,
        detections,
        keypoints,
        action,
        action_probs,
    })
}

fn frame_to_raw(f: &FrameRecord) -> RawFrame {
    let dets = f
        .detections
        .iter()
        .map(|d| {
            let [x0, y0, x1, y1] = d.bbox.as_array();
            vec![
                Value::from(d.category.as_str()),
                Value::from(d.confidence),
                Value::from(x0),
                Value::from(y0),
                Value::from(x1),
                Value::from(y1),
            ]
        })
        .collect();
    let kps = f
        .keypoints
        .iter()
        .map(|k| RawKeypoints {
            points: k
                .points()
                .iter()
                .map(|p| vec![Value::from(p.x), Value::from(p.y), Value::from(p.visible as u8)])
                .collect(),
            owner_box: k.owner_box.as_array(),
        })
        .collect();
    RawFrame {
        frame: f.frame_index,
        t: f.timestamp_s,
        dets,
        kps,
        action: f.action.map(|a| a.as_str().to_string()),
        probs: f.action_probs.as_ref().map(|m| {
            m.iter()
                .map(|(a, p)| (a.as_str().to_string(), *p))
                .collect()
        }),
    }
}

pub fn write_stream<W: Write>(stream: &VideoStream, mut w: W) -> Result<()> {
    let header = RawHeader {
        video_id: stream.video_id.clone(),
        fps: stream.fps,
        width: stream.width,
        height: stream.height,
        metadata: stream.metadata.clone(),
    };
    let io = |e| Error::io("<stream>", e);
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n").map_err(io)?;
    for f in &stream.frames {
        serde_json::to_writer(&mut w, &frame_to_raw(f))?;
        w.write_all(b"\n").map_err(io)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

pub fn save_stream(stream: &VideoStream, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_stream(stream, BufWriter::new(file))
}

/// Every `*.jsonl` file directly inside `dir`, sorted by file name.
pub fn list_stream_files(dir: impl AsRef<Path>) -> Result<Vec<std::path::PathBuf>> {
    let dir = dir.as_ref();
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.extension().is_some_and(|e| e == "jsonl") {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// Parse a single stream file, or every stream file in a directory.
pub fn load_streams(path: impl AsRef<Path>) -> Result<Vec<VideoStream>> {
    let path = path.as_ref();
    if path.is_dir() {
        list_stream_files(path)?
            .into_iter()
            .map(parse_stream)
            .collect()
    } else {
        Ok(vec![parse_stream(path)?])
    }
}
