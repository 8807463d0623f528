//! Coordinate math: crop regions, frame transforms, the convergence test and
//! point-in-box hit testing.
//!
//! Regions are integer pixel rectangles (crops must be realizable on a pixel
//! grid). Points stay real-valued until they are hit-tested.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Default fraction of a region's diagonal under which two consecutive
/// predictions count as converged.
pub const DEFAULT_STOP_RATIO: f64 = 1.0 / 6.0;

/// Default per-dimension shrink factor applied on every zoom step.
pub const DEFAULT_CROP_SCALE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("point ({x}, {y}) lies outside region {region}")]
    OutsideRegion { x: f64, y: f64, region: Region },
    #[error("crop scale must lie strictly between 0 and 1, got {0}")]
    InvalidScale(f64),
    #[error("size must be at least 1x1, got {width}x{height}")]
    EmptySize { width: u32, height: u32 },
    #[error("point coordinates must be finite")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point<T: Scalar = f64> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn cast<U: Scalar>(self) -> Point<U> {
        Point {
            x: U::from(self.x).unwrap_or_else(U::nan),
            y: U::from(self.y).unwrap_or_else(U::nan),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Size {
    pub width: u32,
    pub height: u32,
}

impl Size {
    pub fn new(width: u32, height: u32) -> Result<Self, GeometryError> {
        if width == 0 || height == 0 {
            return Err(GeometryError::EmptySize { width, height });
        }
        Ok(Self { width, height })
    }

    pub fn diagonal<T: Scalar>(&self) -> T {
        T::px(self.width).hypot(T::px(self.height))
    }

    pub fn min_side(&self) -> u32 {
        self.width.min(self.height)
    }
}

/// Axis-aligned pixel rectangle; `(x, y)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Region {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {}x{})", self.x, self.y, self.width, self.height)
    }
}

impl Region {
    pub fn new(x: u32, y: u32, width: u32, height: u32) -> Result<Self, GeometryError> {
        Size::new(width, height)?;
        Ok(Self { x, y, width, height })
    }

    /// The region covering a whole image.
    pub fn full(size: Size) -> Self {
        Self { x: 0, y: 0, width: size.width, height: size.height }
    }

    pub fn size(&self) -> Size {
        Size { width: self.width, height: self.height }
    }

    pub fn origin<T: Scalar>(&self) -> Point<T> {
        Point::new(T::px(self.x), T::px(self.y))
    }

    /// Exclusive right edge.
    pub fn right(&self) -> u64 {
        self.x as u64 + self.width as u64
    }

    /// Exclusive bottom edge.
    pub fn bottom(&self) -> u64 {
        self.y as u64 + self.height as u64
    }

    pub fn center<T: Scalar>(&self) -> Point<T> {
        let two = T::lit(2.0);
        Point::new(
            T::px(self.x) + T::px(self.width) / two,
            T::px(self.y) + T::px(self.height) / two,
        )
    }

    pub fn diagonal<T: Scalar>(&self) -> T {
        self.size().diagonal()
    }

    pub fn contains_region(&self, other: &Region) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.right() <= self.right()
            && other.bottom() <= self.bottom()
    }

    /// Closed-interval containment, identical to [`point_in_box`].
    pub fn contains_point<T: Scalar>(&self, p: &Point<T>) -> bool {
        point_in_box(p, self)
    }

    /// Clamps a point given in this region's local frame onto `[0, w] x [0, h]`.
    pub fn clamp_local<T: Scalar>(&self, p: Point<T>) -> Point<T> {
        let w = T::px(self.width);
        let h = T::px(self.height);
        Point::new(p.x.max(T::zero()).min(w), p.y.max(T::zero()).min(h))
    }

    /// Clamps a full-frame point into this region.
    pub fn clamp_global<T: Scalar>(&self, p: Point<T>) -> Point<T> {
        let o = self.origin::<T>();
        let local = self.clamp_local(Point::new(p.x - o.x, p.y - o.y));
        to_global(self, local)
    }
}

/// Size of the region that [`crop_around`] produces from a parent of size
/// `parent`: `ceil(scale * side)` per dimension, never zero and never larger
/// than the parent.
pub fn scaled_size<T: Scalar>(parent: Size, scale: T) -> Size {
    let side = |s: u32| -> u32 {
        let v = (scale * T::px(s)).ceil();
        v.to_u32().unwrap_or(s).clamp(1, s)
    };
    Size { width: side(parent.width), height: side(parent.height) }
}

/// Places a `scale`-sized window centered on `center` and slides it the
/// minimum distance needed to lie fully inside `parent`. The window keeps its
/// size; only its position is clamped.
pub fn crop_around<T: Scalar>(
    parent: &Region,
    center: Point<T>,
    scale: T,
) -> Result<Region, GeometryError> {
    if !(scale > T::zero() && scale < T::one()) {
        return Err(GeometryError::InvalidScale(scale.to_f64().unwrap_or(f64::NAN)));
    }
    if !center.is_finite() {
        return Err(GeometryError::NonFinite);
    }
    if !point_in_box(&center, parent) {
        return Err(outside(&center, parent));
    }
    let size = scaled_size(parent.size(), scale);
    let half = T::lit(0.5);
    let place = |c: T, lo: u32, parent_len: u32, len: u32| -> u32 {
        let start = (c - T::px(len) * half + half).floor();
        let max_start = lo as i64 + (parent_len - len) as i64;
        start.to_i64().unwrap_or(lo as i64).clamp(lo as i64, max_start) as u32
    };
    Ok(Region {
        x: place(center.x, parent.x, parent.width, size.width),
        y: place(center.y, parent.y, parent.height, size.height),
        width: size.width,
        height: size.height,
    })
}

/// Maps a point from `region`'s local frame into the full-image frame.
pub fn to_global<T: Scalar>(region: &Region, local: Point<T>) -> Point<T> {
    let o = region.origin::<T>();
    Point::new(local.x + o.x, local.y + o.y)
}

/// Maps a full-image point into `region`'s local frame.
pub fn to_local<T: Scalar>(region: &Region, global: Point<T>) -> Result<Point<T>, GeometryError> {
    if !point_in_box(&global, region) {
        return Err(outside(&global, region));
    }
    let o = region.origin::<T>();
    Ok(Point::new(global.x - o.x, global.y - o.y))
}

/// Convergence distance for predictions made inside `region`.
pub fn stop_threshold<T: Scalar>(region: &Region, ratio: T) -> T {
    region.diagonal::<T>() * ratio
}

/// True when `curr` lies closer to `prev` than one sixth of the diagonal of
/// `prev_region`, the region in which `prev` was predicted.
pub fn stop_condition<T: Scalar>(prev: &Point<T>, curr: &Point<T>, prev_region: &Region) -> bool {
    stop_condition_with_ratio(prev, curr, prev_region, T::lit(DEFAULT_STOP_RATIO))
}

pub fn stop_condition_with_ratio<T: Scalar>(
    prev: &Point<T>,
    curr: &Point<T>,
    prev_region: &Region,
    ratio: T,
) -> bool {
    prev.distance(curr) < stop_threshold(prev_region, ratio)
}

/// Closed-interval hit test on both edges.
pub fn point_in_box<T: Scalar>(p: &Point<T>, bx: &Region) -> bool {
    let x0 = T::px(bx.x);
    let y0 = T::px(bx.y);
    p.x >= x0
        && p.y >= y0
        && p.x <= x0 + T::px(bx.width)
        && p.y <= y0 + T::px(bx.height)
}

/// Coordinate frame a model reports points in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum CoordConvention {
    #[default]
    #[serde(rename = "pixels")]
    Pixels,
    #[serde(rename = "norm01")]
    Normalized01,
    #[serde(rename = "norm1000")]
    Normalized1000,
}

impl std::str::FromStr for CoordConvention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pixels" => Ok(Self::Pixels),
            "norm01" => Ok(Self::Normalized01),
            "norm1000" => Ok(Self::Normalized1000),
            other => Err(format!("unknown coordinate convention `{other}` (expected pixels, norm01 or norm1000)")),
        }
    }
}

impl CoordConvention {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Pixels => "pixels",
            Self::Normalized01 => "norm01",
            Self::Normalized1000 => "norm1000",
        }
    }
}

/// Converts a point reported under `convention` into pixels of `frame`.
pub fn denormalize<T: Scalar>(p: Point<T>, convention: CoordConvention, frame: Size) -> Point<T> {
    let w = T::px(frame.width);
    let h = T::px(frame.height);
    match convention {
        CoordConvention::Pixels => p,
        CoordConvention::Normalized01 => Point::new(p.x * w, p.y * h),
        CoordConvention::Normalized1000 => {
            let k = T::lit(1000.0);
            Point::new(p.x * w / k, p.y * h / k)
        }
    }
}

fn outside<T: Scalar>(p: &Point<T>, region: &Region) -> GeometryError {
    GeometryError::OutsideRegion {
        x: p.x.to_f64().unwrap_or(f64::NAN),
        y: p.y.to_f64().unwrap_or(f64::NAN),
        region: *region,
    }
}
