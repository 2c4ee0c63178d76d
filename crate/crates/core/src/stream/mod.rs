//! Scene-stream data model, the stream file format, and shared box geometry.

pub mod format;
pub mod geometry;
pub mod model;

pub use format::{load_streams, parse_stream, read_stream, save_stream, write_stream, ParsedStream};
pub use geometry::{centroid, hand_size, iou, BBox, Point};
pub use model::{
    kp, Action, Category, Detection, FrameRecord, HandKeypoints, Keypoint, Metadata, VideoStream,
    NUM_KEYPOINTS,
};
