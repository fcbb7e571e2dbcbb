//! Mapping between equirectangular pixel coordinates, spherical coordinates
//! and unit vectors.
//!
//! Conventions:
//! - `lat` is colatitude in `[0, π]`; row 0 is the north pole.
//! - `lon` is in `[0, 2π)` and grows with the column index.
//! - Continuous pixel coordinates use the raw index, `i ∈ [0, h)`, with no
//!   half-pixel offset, so `lat = π·i/h` and `lon = 2π·j/w`.
//! - The unit-vector frame is right-handed with `z` as the polar (yaw) axis:
//!   `v = (sin lat·cos lon, sin lat·sin lon, cos lat)`.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Below this `|sin lat|` a point is treated as a pole and its longitude is set to 0.
pub const POLE_EPS: f64 = 1e-12;

/// Tolerance on `‖v‖ − 1` accepted by [`unitvec_to_sphere`].
pub const UNIT_TOL: f64 = 1e-9;

/// Height and width of an equirectangular raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct ImageDims {
    pub height: usize,
    pub width: usize,
}

impl ImageDims {
    /// Both sides must be at least 2. A non 2:1 aspect is accepted with a
    /// logged warning.
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height < 2 || width < 2 {
            return Err(Error::InvalidDimensions(format!(
                "{height}x{width}: height and width must be >= 2"
            )));
        }
        let dims = ImageDims { height, width };
        if !dims.is_standard_aspect() {
            log::warn!("non-standard ERP aspect {height}x{width} (width != 2*height)");
        }
        Ok(dims)
    }

    pub fn is_standard_aspect(&self) -> bool {
        self.width == 2 * self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }
}

impl std::fmt::Display for ImageDims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

/// Colatitude / longitude pair in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalCoord {
    lat: f64,
    lon: f64,
}

impl SphericalCoord {
    /// Clamps `lat` into `[0, π]` and wraps `lon` into `[0, 2π)`.
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !lon.is_finite() {
            return Err(Error::InvalidCoordinate(format!("lat={lat}, lon={lon}")));
        }
        Ok(SphericalCoord {
            lat: lat.clamp(0.0, PI),
            lon: wrap_angle(lon),
        })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

/// A 3-vector of unit length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl UnitVec3 {
    pub const X: UnitVec3 = UnitVec3 {
        x: 1.0,
        y: 0.0,
        z: 0.0,
    };
    pub const Y: UnitVec3 = UnitVec3 {
        x: 0.0,
        y: 1.0,
        z: 0.0,
    };
    pub const Z: UnitVec3 = UnitVec3 {
        x: 0.0,
        y: 0.0,
        z: 1.0,
    };

    /// Normalizes an arbitrary non-zero finite vector.
    pub fn normalized(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::InvalidVector { norm });
        }
        Ok(UnitVec3 {
            x: x / norm,
            y: y / norm,
            z: z / norm,
        })
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// Continuous pixel position; `i` is the row, `j` the column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelCoord {
    pub i: f64,
    pub j: f64,
}

impl PixelCoord {
    pub fn new(i: f64, j: f64) -> Self {
        PixelCoord { i, j }
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    // rem_euclid can return exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

pub fn pixel_to_sphere(p: PixelCoord, dims: ImageDims) -> Result<SphericalCoord> {
    if !p.i.is_finite() || !p.j.is_finite() {
        return Err(Error::InvalidCoordinate(format!(
            "pixel ({}, {})",
            p.i, p.j
        )));
    }
    let h = dims.height as f64;
    if p.i < 0.0 || p.i >= h {
        return Err(Error::InvalidCoordinate(format!(
            "row {} outside [0, {h})",
            p.i
        )));
    }
    let lat = PI * p.i / h;
    let lon = wrap_angle(TAU * p.j / dims.width as f64);
    Ok(SphericalCoord { lat, lon })
}

pub fn sphere_to_pixel(s: SphericalCoord, dims: ImageDims) -> PixelCoord {
    PixelCoord {
        i: s.lat * dims.height as f64 / PI,
        j: s.lon * dims.width as f64 / TAU,
    }
}

pub fn sphere_to_unitvec(s: SphericalCoord) -> UnitVec3 {
    let (sin_lat, cos_lat) = s.lat.sin_cos();
    let (sin_lon, cos_lon) = s.lon.sin_cos();
    UnitVec3 {
        x: sin_lat * cos_lon,
        y: sin_lat * sin_lon,
        z: cos_lat,
    }
}

/// Inverse of [`sphere_to_unitvec`]. Points within [`POLE_EPS`] of a pole
/// get `lon = 0`.
pub fn unitvec_to_sphere(v: UnitVec3) -> Result<SphericalCoord> {
    let norm = v.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::InvalidVector { norm });
    }
    Ok(unit_to_sphere_unchecked(v))
}

pub(crate) fn unit_to_sphere_unchecked(v: UnitVec3) -> SphericalCoord {
    let rho = v.x.hypot(v.y);
    // atan2 form equals arccos(clamp(z)) for unit input and stays accurate near the poles
    let lat = rho.atan2(v.z);
    if lat.sin().abs() < POLE_EPS {
        return SphericalCoord { lat, lon: 0.0 };
    }
    SphericalCoord {
        lat,
        lon: wrap_angle(v.y.atan2(v.x)),
    }
}
