//! The one-copy Poisson algebra `sl_q^κ(2)` in the S-basis.
//!
//! Brackets (ordering `S3, S+, S-`):
//!
//! ```text
//! {S3, S+} =  2 S+
//! {S3, S-} = -2 S-
//! {S+, S-} = κ (1 - e^{-2 z S3}) / (2z) + 2 z S+ S-
//! ```
//!
//! `(z, κ) = (0, 1)` is undeformed `sl(2)`, `κ = 1` is `sl_q(2)` and `κ = 0`
//! is the q-Poincaré algebra. Every quantity is continuous at `z = 0`; the
//! exact limit is taken below [`Z_EPS`].

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this magnitude `z` is treated as exactly zero.
pub const Z_EPS: f64 = 1e-12;

/// Deformation `z` and contraction parameter `κ ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeformParams {
    pub z: f64,
    pub kappa: f64,
}

impl DeformParams {
    pub fn new(z: f64, kappa: f64) -> Result<Self> {
        if !z.is_finite() {
            return Err(Error::Domain(format!("z must be finite, got {z}")));
        }
        if !kappa.is_finite() || kappa < 0.0 {
            return Err(Error::Domain(format!("kappa must be finite and >= 0, got {kappa}")));
        }
        Ok(Self { z, kappa })
    }

    /// Undeformed `sl(2)`.
    pub const fn sl2() -> Self {
        Self { z: 0.0, kappa: 1.0 }
    }

    /// `sl_q(2)` with `q = e^z`.
    pub const fn slq2(z: f64) -> Self {
        Self { z, kappa: 1.0 }
    }

    /// Non-coboundary q-Poincaré algebra.
    pub const fn q_poincare(z: f64) -> Self {
        Self { z, kappa: 0.0 }
    }

    pub fn is_undeformed(&self) -> bool {
        self.z.abs() < Z_EPS
    }
}

/// S-basis coordinates of one tensor-factor copy.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SiteState {
    pub s3: f64,
    pub splus: f64,
    pub sminus: f64,
}

impl SiteState {
    pub const fn new(s3: f64, splus: f64, sminus: f64) -> Self {
        Self { s3, splus, sminus }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.s3, self.splus, self.sminus)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.s3, self.splus, self.sminus]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn is_finite(&self) -> bool {
        self.s3.is_finite() && self.splus.is_finite() && self.sminus.is_finite()
    }
}

impl From<[f64; 3]> for SiteState {
    fn from(a: [f64; 3]) -> Self {
        Self::from_array(a)
    }
}

/// `(1 - e^{-2 z x}) / (2z)`, equal to `x` at `z = 0`.
pub fn deformed_linear(z: f64, x: f64) -> f64 {
    if z.abs() < Z_EPS {
        x
    } else {
        -(-2.0 * z * x).exp_m1() / (2.0 * z)
    }
}

/// `sinh(z x) / z`, equal to `x` at `z = 0`.
pub fn sinh_ratio(z: f64, x: f64) -> f64 {
    if z.abs() < Z_EPS {
        x
    } else {
        (z * x).sinh() / z
    }
}

/// `{S+, S-}` as a function of the site coordinates.
fn plus_minus_bracket(p: &DeformParams, s: &SiteState) -> f64 {
    p.kappa * deformed_linear(p.z, s.s3) + 2.0 * p.z * s.splus * s.sminus
}

/// Poisson tensor `J[i][j] = {x_i, x_j}` at `s`.
pub fn structure_matrix(p: &DeformParams, s: &SiteState) -> Matrix3<f64> {
    let j12 = 2.0 * s.splus;
    let j13 = -2.0 * s.sminus;
    let j23 = plus_minus_bracket(p, s);
    Matrix3::new(
        0.0, j12, j13, //
        -j12, 0.0, j23, //
        -j13, -j23, 0.0,
    )
}

/// `∂J/∂x_k` for `k = 0, 1, 2`.
pub fn structure_matrix_partials(p: &DeformParams, s: &SiteState) -> [Matrix3<f64>; 3] {
    let antisym = |j12: f64, j13: f64, j23: f64| {
        Matrix3::new(0.0, j12, j13, -j12, 0.0, j23, -j13, -j23, 0.0)
    };
    let d23_d3 = p.kappa * (-2.0 * p.z * s.s3).exp();
    [
        antisym(0.0, 0.0, d23_d3),
        antisym(2.0, 0.0, 2.0 * p.z * s.sminus),
        antisym(0.0, -2.0, 2.0 * p.z * s.splus),
    ]
}

/// `I = (κ/4) (sinh(z S3/2) / (z/2))² + S+ S- e^{z S3}`.
pub fn casimir(p: &DeformParams, s: &SiteState) -> f64 {
    let h = if p.z.abs() < Z_EPS {
        s.s3
    } else {
        (0.5 * p.z * s.s3).sinh() / (0.5 * p.z)
    };
    0.25 * p.kappa * h * h + s.splus * s.sminus * (p.z * s.s3).exp()
}

/// Analytic gradient of [`casimir`].
pub fn casimir_gradient(p: &DeformParams, s: &SiteState) -> Vector3<f64> {
    let e = (p.z * s.s3).exp();
    Vector3::new(
        0.5 * p.kappa * sinh_ratio(p.z, s.s3) + p.z * s.splus * s.sminus * e,
        s.sminus * e,
        s.splus * e,
    )
}

/// X-basis to S-basis: `S3 = X3`, `S± = e^{-z X3/2} X±`.
pub fn basis_from_x(p: &DeformParams, x3: f64, xplus: f64, xminus: f64) -> SiteState {
    let w = (-0.5 * p.z * x3).exp();
    SiteState::new(x3, w * xplus, w * xminus)
}

/// S-basis to X-basis, the inverse of [`basis_from_x`].
pub fn basis_to_x(p: &DeformParams, s: &SiteState) -> (f64, f64, f64) {
    let w = (0.5 * p.z * s.s3).exp();
    (s.s3, w * s.splus, w * s.sminus)
}

/// Largest absolute cyclic Jacobi sum over all generator triples.
///
/// Uses `{{x_i,x_j},x_k} = Σ_l ∂_l J_ij J_lk`.
pub fn jacobi_residual(p: &DeformParams, s: &SiteState) -> f64 {
    let j = structure_matrix(p, s);
    let dj = structure_matrix_partials(p, s);
    let nested = |i: usize, jj: usize, k: usize| -> f64 {
        (0..3).map(|l| dj[l][(i, jj)] * j[(l, k)]).sum()
    };
    let mut worst = 0.0f64;
    for i in 0..3 {
        for jj in 0..3 {
            for k in 0..3 {
                let cyc = nested(i, jj, k) + nested(jj, k, i) + nested(k, i, jj);
                worst = worst.max(cyc.abs());
            }
        }
    }
    worst
}
