//! Axis-aligned pixel boxes and the elementary geometry built on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A 2-D point in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn sub(self, other: Point) -> Point {
        Point::new(self.x - other.x, self.y - other.y)
    }

    pub fn l2(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn l1(self) -> f64 {
        self.x.abs() + self.y.abs()
    }

    pub fn distance(self, other: Point) -> f64 {
        self.sub(other).l2()
    }
}

/// Axis-aligned bounding box in image pixels.
///
/// Always satisfies `0 <= x_min < x_max` and `0 <= y_min < y_max` with finite
/// coordinates; the only way to build one is through [`BBox::new`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let coords = [x_min, y_min, x_max, y_max];
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invariant("BBox", "coordinates must be finite"));
        }
        if coords.iter().any(|&c| c < 0.0) {
            return Err(Error::invariant("BBox", "coordinates must be >= 0"));
        }
        if !(x_min < x_max) {
            return Err(Error::invariant(
                "BBox",
                format!("x_min ({x_min}) must be < x_max ({x_max})"),
            ));
        }
        if !(y_min < y_max) {
            return Err(Error::invariant(
                "BBox",
                format!("y_min ({y_min}) must be < y_max ({y_max})"),
            ));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    /// Box from center, width and height, clipped to the non-negative quadrant.
    ///
    /// Returns `None` if nothing of positive extent remains after clipping.
    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Option<Self> {
        let x_min = (cx - w / 2.0).max(0.0);
        let y_min = (cy - h / 2.0).max(0.0);
        let x_max = cx + w / 2.0;
        let y_max = cy + h / 2.0;
        BBox::new(x_min, y_min, x_max, y_max).ok()
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn y_min(&self) -> f64 {
        self.y_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }

    /// Midpoint of the box.
    pub fn centroid(&self) -> Point {
        Point::new(
            (self.x_min + self.x_max) / 2.0,
            (self.y_min + self.y_max) / 2.0,
        )
    }

    /// Characteristic hand length: `(height + width) / 2`.
    pub fn hand_size(&self) -> f64 {
        (self.height() + self.width()) / 2.0
    }

    /// Intersection over union, in `[0, 1]`.
    pub fn iou(&self, other: &BBox) -> f64 {
        let iw = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let ih = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if iw <= 0.0 || ih <= 0.0 {
            return 0.0;
        }
        let inter = iw * ih;
        let union = self.area() + other.area() - inter;
        (inter / union).clamp(0.0, 1.0)
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Result<BBox> {
        BBox::new(
            self.x_min + dx,
            self.y_min + dy,
            self.x_max + dx,
            self.y_max + dy,
        )
    }

    pub fn scale(&self, factor: f64) -> Result<BBox> {
        BBox::new(
            self.x_min * factor,
            self.y_min * factor,
            self.x_max * factor,
            self.y_max * factor,
        )
    }
}

impl<'de> Deserialize<'de> for BBox {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            x_min: f64,
            y_min: f64,
            x_max: f64,
            y_max: f64,
        }
        let r = Raw::deserialize(d)?;
        BBox::new(r.x_min, r.y_min, r.x_max, r.y_max).map_err(serde::de::Error::custom)
    }
}

/// Free-function form of [`BBox::iou`].
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    a.iou(b)
}

/// Free-function form of [`BBox::hand_size`].
pub fn hand_size(b: &BBox) -> f64 {
    b.hand_size()
}

/// Free-function form of [`BBox::centroid`].
pub fn centroid(b: &BBox) -> Point {
    b.centroid()
}
