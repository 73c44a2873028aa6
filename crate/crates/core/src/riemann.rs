//! Physics-based penalty flux at element faces.
//!
//! Face traces are rotated into a local orthonormal frame whose rows are
//! `(n, m, l)`. Per local direction the hat-variables solve the boundary or
//! interface condition while preserving the outgoing characteristic, and the
//! fluctuations `G` measure the mismatch between trace and hat. No
//! eigendecomposition of the flux Jacobian is ever formed.
//!
//! Sign convention: on every face the normal points in the `+xi` direction
//! of the reference coordinate, so at `xi = 0` it points into the element.
//! The outgoing characteristic is `q` at `xi = 0` and `p` at `xi = 1`.

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

/// Which end of the reference interval a face sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// `xi = 0`
    Lower,
    /// `xi = 1`
    Upper,
}

impl Side {
    pub fn is_upper(self) -> bool {
        self == Side::Upper
    }
}

/// Reflection coefficients of the linear boundary condition, one per local
/// direction `(n, m, l)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySpec {
    gamma: Vec3,
}

impl BoundarySpec {
    pub fn new(gamma: Vec3) -> Result<Self> {
        for (i, g) in gamma.iter().enumerate() {
            if !g.is_finite() || g.abs() > 1.0 {
                return Err(Error::Validation(format!(
                    "reflection coefficient gamma[{i}] = {g} violates |gamma| <= 1"
                )));
            }
        }
        Ok(BoundarySpec { gamma })
    }

    pub fn free_surface() -> Self {
        BoundarySpec { gamma: [1.0; 3] }
    }

    pub fn absorbing() -> Self {
        BoundarySpec { gamma: [0.0; 3] }
    }

    pub fn clamped() -> Self {
        BoundarySpec { gamma: [-1.0; 3] }
    }

    pub fn gamma(&self) -> Vec3 {
        self.gamma
    }
}

/// Velocity, traction and impedance of one face node in the local frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalTrace {
    pub v: Vec3,
    pub t: Vec3,
    pub z: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HatState {
    pub v: Vec3,
    pub t: Vec3,
}

/// Characteristic pair `(p, q)` with `q = (Z v + T) / 2` and `p = (Z v - T) / 2`.
#[inline]
pub fn characteristics(v: f64, t: f64, z: f64) -> (f64, f64) {
    (0.5 * (z * v - t), 0.5 * (z * v + t))
}

/// Hat-variables at an external face.
pub fn boundary_hat(tr: &LocalTrace, spec: &BoundarySpec, side: Side) -> HatState {
    let mut hat = HatState {
        v: [0.0; 3],
        t: [0.0; 3],
    };
    for e in 0..3 {
        let (p, q) = characteristics(tr.v[e], tr.t[e], tr.z[e]);
        let g = spec.gamma[e];
        match side {
            Side::Lower => {
                hat.v[e] = (1.0 + g) * q / tr.z[e];
                hat.t[e] = (1.0 - g) * q;
            }
            Side::Upper => {
                hat.v[e] = (1.0 + g) * p / tr.z[e];
                hat.t[e] = -(1.0 - g) * p;
            }
        }
    }
    hat
}

/// Hat-variables at an internal face between the element whose upper face it
/// is (`minus`) and the element whose lower face it is (`plus`). Both traces
/// use the same frame. The returned velocity is shared by both sides, so the
/// velocity jump vanishes identically.
pub fn interface_hat(minus: &LocalTrace, plus: &LocalTrace) -> HatState {
    let mut hat = HatState {
        v: [0.0; 3],
        t: [0.0; 3],
    };
    for e in 0..3 {
        let (zm, zp) = (minus.z[e], plus.z[e]);
        let (pm, _) = characteristics(minus.v[e], minus.t[e], zm);
        let (_, qp) = characteristics(plus.v[e], plus.t[e], zp);
        let alpha = zp * zm / (zp + zm);
        let phi = alpha * (2.0 * qp / zp - 2.0 * pm / zm);
        hat.t[e] = phi;
        hat.v[e] = 2.0 * (pm + qp) / (zp + zm);
    }
    hat
}

/// Checks impedances before an interface solve.
pub fn validate_impedances(z: &Vec3) -> Result<()> {
    if z.iter().all(|&v| v > 0.0 && v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Validation(format!("impedances must be positive, got {z:?}")))
    }
}

/// Fluctuations `(G, G/Z)` per local direction.
#[inline]
pub fn fluctuations(tr: &LocalTrace, hat: &HatState, side: Side) -> (Vec3, Vec3) {
    let mut g = [0.0; 3];
    let mut gt = [0.0; 3];
    for e in 0..3 {
        let dv = 0.5 * tr.z[e] * (tr.v[e] - hat.v[e]);
        let dt = 0.5 * (tr.t[e] - hat.t[e]);
        g[e] = match side {
            Side::Upper => dv + dt,
            Side::Lower => dv - dt,
        };
        gt[e] = g[e] / tr.z[e];
    }
    (g, gt)
}

/// `R a` with `R` stored by rows.
#[inline]
pub fn rotate(r: &Mat3, a: &Vec3) -> Vec3 {
    [
        r[0][0] * a[0] + r[0][1] * a[1] + r[0][2] * a[2],
        r[1][0] * a[0] + r[1][1] * a[1] + r[1][2] * a[2],
        r[2][0] * a[0] + r[2][1] * a[1] + r[2][2] * a[2],
    ]
}

/// `R^T a`.
#[inline]
pub fn rotate_back(r: &Mat3, a: &Vec3) -> Vec3 {
    [
        r[0][0] * a[0] + r[1][0] * a[1] + r[2][0] * a[2],
        r[0][1] * a[0] + r[1][1] * a[1] + r[2][1] * a[2],
        r[0][2] * a[0] + r[1][2] * a[1] + r[2][2] * a[2],
    ]
}

/// Traction `sigma n` for a Voigt stress vector.
#[inline]
pub fn traction(s: &[f64], n: &Vec3) -> Vec3 {
    [
        s[0] * n[0] + s[3] * n[1] + s[4] * n[2],
        s[3] * n[0] + s[1] * n[1] + s[5] * n[2],
        s[4] * n[0] + s[5] * n[1] + s[2] * n[2],
    ]
}

/// Cartesian fluctuation vector: `FL` at `xi = 0`, `FR` at `xi = 1`.
#[inline]
pub fn assemble_fluctuation_vector(g: &Vec3, gt: &Vec3, n: &Vec3, side: Side) -> [f64; 9] {
    let s = match side {
        Side::Upper => 1.0,
        Side::Lower => -1.0,
    };
    [
        g[0],
        g[1],
        g[2],
        s * n[0] * gt[0],
        s * n[1] * gt[1],
        s * n[2] * gt[2],
        s * (n[1] * gt[0] + n[0] * gt[1]),
        s * (n[2] * gt[0] + n[0] * gt[2]),
        s * (n[2] * gt[1] + n[1] * gt[2]),
    ]
}
