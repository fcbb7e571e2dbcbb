//! Yaw / pitch / roll rotation matrices.
//!
//! `compose` builds `R = R_z(yaw) · R_y(pitch) · R_x(roll)`, evaluated as
//! `(R_z · R_y) · R_x`. Every matrix product sums `a[r][0]·b[0][c] +
//! a[r][1]·b[1][c] + a[r][2]·b[2][c]` left to right, so the result is
//! reproducible bit for bit by any evaluator using the same order.
//!
//! Angles cross the API in degrees and are converted to radians only when a
//! matrix is built.

use serde::{Deserialize, Serialize};

use crate::sphere::UnitVec3;

/// Yaw (about z), pitch (about y) and roll (about x), in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RotationAngles {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl RotationAngles {
    pub const ZERO: RotationAngles = RotationAngles {
        yaw: 0.0,
        pitch: 0.0,
        roll: 0.0,
    };

    pub fn new(yaw: f64, pitch: f64, roll: f64) -> Self {
        RotationAngles { yaw, pitch, roll }
    }

    pub fn is_finite(&self) -> bool {
        self.yaw.is_finite() && self.pitch.is_finite() && self.roll.is_finite()
    }

    pub fn is_zero(&self) -> bool {
        self.yaw == 0.0 && self.pitch == 0.0 && self.roll == 0.0
    }
}

/// Row-major 3×3 rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotMat(pub [[f64; 3]; 3]);

impl RotMat {
    pub const IDENTITY: RotMat = RotMat([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn rows(&self) -> &[[f64; 3]; 3] {
        &self.0
    }

    /// Matrix product `self · rhs`.
    pub fn mul(&self, rhs: &RotMat) -> RotMat {
        let a = &self.0;
        let b = &rhs.0;
        let mut out = [[0.0; 3]; 3];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = a[r][0] * b[0][c] + a[r][1] * b[1][c] + a[r][2] * b[2][c];
            }
        }
        RotMat(out)
    }

    pub fn transpose(&self) -> RotMat {
        let m = &self.0;
        RotMat([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Largest entry-wise deviation of `RᵀR` from the identity.
    pub fn orthogonality_error(&self) -> f64 {
        let p = self.transpose().mul(self);
        let mut worst = 0.0f64;
        for r in 0..3 {
            for c in 0..3 {
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((p.0[r][c] - target).abs());
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &RotMat) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..3 {
            for c in 0..3 {
                worst = worst.max((self.0[r][c] - other.0[r][c]).abs());
            }
        }
        worst
    }

    pub fn is_identity(&self) -> bool {
        *self == RotMat::IDENTITY
    }

    /// Raw matrix-vector product without renormalization.
    pub(crate) fn mul_vec(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }
}

/// Rotation about the x axis (roll).
pub fn rot_x(gamma_deg: f64) -> RotMat {
    let (s, c) = gamma_deg.to_radians().sin_cos();
    RotMat([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
}

/// Rotation about the y axis (pitch).
pub fn rot_y(beta_deg: f64) -> RotMat {
    let (s, c) = beta_deg.to_radians().sin_cos();
    RotMat([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
}

/// Rotation about the z axis (yaw).
pub fn rot_z(alpha_deg: f64) -> RotMat {
    let (s, c) = alpha_deg.to_radians().sin_cos();
    RotMat([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
}

pub fn compose(a: RotationAngles) -> RotMat {
    rot_z(a.yaw).mul(&rot_y(a.pitch)).mul(&rot_x(a.roll))
}

/// Rotates `v`, renormalizing if the result drifts from unit length by more
/// than 1e-12.
pub fn apply(r: &RotMat, v: UnitVec3) -> UnitVec3 {
    let [x, y, z] = r.mul_vec(v.as_array());
    let out = UnitVec3 { x, y, z };
    let norm = out.norm();
    if (norm - 1.0).abs() > 1e-12 {
        UnitVec3 {
            x: x / norm,
            y: y / norm,
            z: z / norm,
        }
    } else {
        out
    }
}

pub fn inverse(r: &RotMat) -> RotMat {
    r.transpose()
}
