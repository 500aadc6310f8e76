//! Normalized coordinate primitives shared by annotations, planning, and
//! synthesis. All coordinates live in `[0.0, 1.0]` relative to some frame
//! (a full image or a single crop).

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Slack for float round-off when validating sums like `x + w <= 1`.
const EPS: f64 = 1e-9;

/// A point in normalized image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormPoint {
    pub x: f64,
    pub y: f64,
}

impl NormPoint {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if !in_unit(x) || !in_unit(y) {
            return Err(Error::Input(format!(
                "normalized point ({x}, {y}) outside [0, 1]"
            )));
        }
        Ok(Self {
            x: x.clamp(0.0, 1.0),
            y: y.clamp(0.0, 1.0),
        })
    }
}

/// An axis-aligned rectangle in normalized image coordinates, stored as
/// top-left corner plus width and height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormRect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl NormRect {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        for (name, v) in [("x", x), ("y", y), ("w", w), ("h", h)] {
            if !in_unit(v) {
                return Err(Error::Input(format!(
                    "normalized rect {name} = {v} outside [0, 1]"
                )));
            }
        }
        if x + w > 1.0 + EPS || y + h > 1.0 + EPS {
            return Err(Error::Input(format!(
                "normalized rect ({x}, {y}, {w}, {h}) extends past the frame"
            )));
        }
        let x = x.clamp(0.0, 1.0);
        let y = y.clamp(0.0, 1.0);
        Ok(Self {
            x,
            y,
            w: w.min(1.0 - x),
            h: h.min(1.0 - y),
        })
    }

    /// Corner form `(x0, y0, x1, y1)`.
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        (self.x, self.y, self.x + self.w, self.y + self.h)
    }
}

fn in_unit(v: f64) -> bool {
    v.is_finite() && (-EPS..=1.0 + EPS).contains(&v)
}
