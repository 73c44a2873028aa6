//! Density and stiffness of linear elastic media, derived wavespeeds and
//! impedances.
//!
//! Stress vectors use the Voigt order `(sxx, syy, szz, sxy, sxz, syz)`
//! everywhere in the crate. The stiffness matrix acts on engineering
//! strains in the same order.

use nalgebra::Matrix6;

use crate::error::{Error, Result};

pub type Mat6 = [[f64; 6]; 6];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Orthotropic {
    pub c11: f64,
    pub c12: f64,
    pub c13: f64,
    pub c22: f64,
    pub c23: f64,
    pub c33: f64,
    pub c44: f64,
    pub c55: f64,
    pub c66: f64,
}

impl Orthotropic {
    fn stiffness(&self) -> Mat6 {
        let o = self;
        let mut c = [[0.0; 6]; 6];
        c[0][0] = o.c11;
        c[0][1] = o.c12;
        c[0][2] = o.c13;
        c[1][1] = o.c22;
        c[1][2] = o.c23;
        c[2][2] = o.c33;
        c[3][3] = o.c44;
        c[4][4] = o.c55;
        c[5][5] = o.c66;
        for i in 0..6 {
            for j in 0..i {
                c[i][j] = c[j][i];
            }
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaterialKind {
    Isotropic { lambda: f64, mu: f64 },
    Orthotropic(Orthotropic),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Material {
    pub rho: f64,
    pub kind: MaterialKind,
    stiffness: Mat6,
    compliance: Mat6,
    speeds: WavespeedSet,
}

/// Per-axis wavespeeds `[x, y, z]` for the three wave families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavespeedSet {
    pub cp: [f64; 3],
    pub csh: [f64; 3],
    pub csv: [f64; 3],
}

impl WavespeedSet {
    pub fn max_p(&self) -> f64 {
        self.cp.iter().cloned().fold(0.0, f64::max)
    }
}

impl Material {
    /// Isotropic medium from Lame parameters.
    pub fn isotropic(rho: f64, lambda: f64, mu: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Validation(format!("density must be positive, got {rho}")));
        }
        if !(mu > 0.0) {
            return Err(Error::Validation(format!("shear modulus mu > 0 violated (mu = {mu})")));
        }
        if !(3.0 * lambda + 2.0 * mu > 0.0) {
            return Err(Error::Validation(format!(
                "lambda > -2 mu / 3 violated (lambda = {lambda}, mu = {mu})"
            )));
        }
        let l2m = lambda + 2.0 * mu;
        let o = Orthotropic {
            c11: l2m,
            c12: lambda,
            c13: lambda,
            c22: l2m,
            c23: lambda,
            c33: l2m,
            c44: mu,
            c55: mu,
            c66: mu,
        };
        Self::finish(rho, MaterialKind::Isotropic { lambda, mu }, o.stiffness())
    }

    pub fn orthotropic(rho: f64, o: Orthotropic) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Validation(format!("density must be positive, got {rho}")));
        }
        let diag = [o.c11, o.c22, o.c33, o.c44, o.c55, o.c66];
        if diag.iter().any(|&c| !(c > 0.0)) {
            return Err(Error::Validation(
                "orthotropic diagonal stiffness entries must be positive".into(),
            ));
        }
        Self::finish(rho, MaterialKind::Orthotropic(o), o.stiffness())
    }

    fn finish(rho: f64, kind: MaterialKind, c: Mat6) -> Result<Self> {
        let m = Matrix6::from_fn(|i, j| c[i][j]);
        let chol = m.cholesky().ok_or_else(|| {
            Error::Validation("stiffness matrix is not symmetric positive definite".into())
        })?;
        let inv = chol.inverse();
        let mut s = [[0.0; 6]; 6];
        for i in 0..6 {
            for j in 0..6 {
                s[i][j] = 0.5 * (inv[(i, j)] + inv[(j, i)]);
            }
        }
        let speeds = match kind {
            MaterialKind::Isotropic { lambda, mu } => {
                let cp = ((lambda + 2.0 * mu) / rho).sqrt();
                let cs = (mu / rho).sqrt();
                WavespeedSet {
                    cp: [cp; 3],
                    csh: [cs; 3],
                    csv: [cs; 3],
                }
            }
            MaterialKind::Orthotropic(o) => {
                let r = |c: f64| (c / rho).sqrt();
                WavespeedSet {
                    cp: [r(o.c11), r(o.c22), r(o.c33)],
                    csh: [r(o.c44), r(o.c66), r(o.c55)],
                    csv: [r(o.c55), r(o.c44), r(o.c66)],
                }
            }
        };
        Ok(Material {
            rho,
            kind,
            stiffness: c,
            compliance: s,
            speeds,
        })
    }

    pub fn stiffness(&self) -> &Mat6 {
        &self.stiffness
    }

    pub fn compliance(&self) -> &Mat6 {
        &self.compliance
    }

    pub fn wavespeeds(&self) -> WavespeedSet {
        self.speeds
    }

    pub fn is_isotropic(&self) -> bool {
        matches!(self.kind, MaterialKind::Isotropic { .. })
    }

    /// `C * s` for a Voigt 6-vector, exploiting the orthotropic sparsity.
    #[inline]
    pub fn apply_stiffness(&self, s: &[f64]) -> [f64; 6] {
        let c = &self.stiffness;
        [
            c[0][0] * s[0] + c[0][1] * s[1] + c[0][2] * s[2],
            c[1][0] * s[0] + c[1][1] * s[1] + c[1][2] * s[2],
            c[2][0] * s[0] + c[2][1] * s[1] + c[2][2] * s[2],
            c[3][3] * s[3],
            c[4][4] * s[4],
            c[5][5] * s[5],
        ]
    }

    /// Strain energy `sigma^T S sigma` of a Voigt stress vector.
    #[inline]
    pub fn strain_energy(&self, sigma: &[f64]) -> f64 {
        let s = &self.compliance;
        let mut acc = 0.0;
        for i in 0..6 {
            let mut row = 0.0;
            for j in 0..6 {
                row += s[i][j] * sigma[j];
            }
            acc += sigma[i] * row;
        }
        acc
    }

    /// Energy density `0.5 (rho |v|^2 + sigma^T S sigma)` of a 9-component state.
    pub fn energy_density(&self, q: &[f64]) -> f64 {
        let kin = self.rho * (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]);
        0.5 * (kin + self.strain_energy(&q[3..9]))
    }

    /// Impedances `(Z_n, Z_m, Z_l)` for a unit face normal.
    pub fn impedances(&self, n: [f64; 3]) -> [f64; 3] {
        let (cn, cm, cl) = effective_normal_speeds(&self.speeds, n);
        [self.rho * cn, self.rho * cm, self.rho * cl]
    }
}

/// Isotropic medium from density and P/S wavespeeds.
pub fn isotropic_from_speeds(rho: f64, cp: f64, cs: f64) -> Result<Material> {
    if !(rho > 0.0 && cp > 0.0 && cs > 0.0) {
        return Err(Error::Validation(format!(
            "rho, cp, cs must be positive (got {rho}, {cp}, {cs})"
        )));
    }
    if !(cp > cs * (4.0f64 / 3.0).sqrt()) {
        return Err(Error::Validation(format!(
            "cp > cs * sqrt(4/3) violated (cp = {cp}, cs = {cs})"
        )));
    }
    let mu = rho * cs * cs;
    let lambda = rho * cp * cp - 2.0 * mu;
    Material::isotropic(rho, lambda, mu)
}

pub fn axis_wavespeeds(m: &Material) -> WavespeedSet {
    m.wavespeeds()
}

/// Effective wavespeeds `(c_n, c_m, c_l)` seen by a face with unit normal `n`.
pub fn effective_normal_speeds(ws: &WavespeedSet, n: [f64; 3]) -> (f64, f64, f64) {
    let norm2 = n[0] * n[0] + n[1] * n[1] + n[2] * n[2];
    assert!((norm2 - 1.0).abs() < 1e-10, "normal is not unit length: |n|^2 = {norm2}");
    let f = |c: &[f64; 3]| {
        ((n[0] * c[0]).powi(2) + (n[1] * c[1]).powi(2) + (n[2] * c[2]).powi(2)).sqrt()
    };
    (f(&ws.cp), f(&ws.csh), f(&ws.csv))
}

/// Apatite crystal in SI units.
pub fn apatite() -> Material {
    let gpa = 1e9;
    let c11 = 167.0 * gpa;
    let c12 = 13.1 * gpa;
    let c44 = 66.3 * gpa;
    Material::orthotropic(
        3190.0,
        Orthotropic {
            c11,
            c12,
            c13: 66.0 * gpa,
            c22: c11,
            c23: 66.0 * gpa,
            c33: 140.0 * gpa,
            c44,
            c55: c44,
            c66: 0.5 * (c11 - c12),
        },
    )
    .expect("apatite constants are admissible")
}
