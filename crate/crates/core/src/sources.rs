//! Point sources, their nodal injection, and receivers.
//!
//! A Dirac delta at reference point `xi0` of an element is represented by
//! the dual of point evaluation: node `p` receives
//! `L_p(xi0) / (h_p J_p)`, where `L_p` is the tensor Lagrange basis and
//! `h_p` the tensor quadrature weight. Moment tensors drive the stress
//! rows, single forces the velocity rows (divided by density).

use crate::discretization::{Discretization, NVAR};
use crate::error::{Error, Result};
use crate::geometry::Mesh;
use crate::riemann::Vec3;
use crate::specops::{build_quadrature, node_index, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeFunction {
    /// `g(t) = t / T^2 exp(-t / T)` for `t >= 0`.
    Loh1 { t: f64 },
    /// `g(t) = cos(2 pi (t - t0) f0) exp(-2 (t - t0)^2 f0^2)`.
    GaussCosine { f0: f64, t0: f64 },
    /// `g(t) = (1 - 2 a) exp(-a)` with `a = (pi f0 (t - t0))^2`.
    Ricker { f0: f64, t0: f64 },
}

impl TimeFunction {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            TimeFunction::Loh1 { t } => t > 0.0 && t.is_finite(),
            TimeFunction::GaussCosine { f0, t0 } | TimeFunction::Ricker { f0, t0 } => {
                f0 > 0.0 && f0.is_finite() && t0 >= 0.0 && t0.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid time function parameters: {self:?}")))
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TimeFunction::Loh1 { t: tau } => {
                if t < 0.0 {
                    0.0
                } else {
                    t / (tau * tau) * (-t / tau).exp()
                }
            }
            TimeFunction::GaussCosine { f0, t0 } => {
                let d = t - t0;
                (2.0 * std::f64::consts::PI * d * f0).cos() * (-2.0 * d * d * f0 * f0).exp()
            }
            TimeFunction::Ricker { f0, t0 } => {
                let a = (std::f64::consts::PI * f0 * (t - t0)).powi(2);
                (1.0 - 2.0 * a) * (-a).exp()
            }
        }
    }

    /// `int_a^b g(t) dt`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match *self {
            TimeFunction::Loh1 { t: tau } => {
                let anti = |t: f64| {
                    if t <= 0.0 {
                        0.0
                    } else {
                        1.0 - (1.0 + t / tau) * (-t / tau).exp()
                    }
                };
                anti(b) - anti(a)
            }
            TimeFunction::Ricker { f0, t0 } => {
                let anti = |t: f64| {
                    let d = t - t0;
                    d * (-(std::f64::consts::PI * f0 * d).powi(2)).exp()
                };
                anti(b) - anti(a)
            }
            TimeFunction::GaussCosine { .. } => {
                // 16-point Gauss rule per step, exact to round-off for the
                // step lengths a stable scheme can take
                let rule = build_quadrature(NodeKind::Gl, 15).expect("degree 15 is supported");
                let h = b - a;
                rule.integrate(|s| self.eval(a + s * h)) * h
            }
        }
    }
}

pub fn eval_time_function(tf: &TimeFunction, t: f64) -> f64 {
    tf.eval(t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceKind {
    /// Symmetric moment tensor in N m.
    Moment([[f64; 3]; 3]),
    /// Single force in N.
    Force(Vec3),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSource {
    pub kind: SourceKind,
    pub location: Vec3,
    pub time: TimeFunction,
}

/// Element and reference coordinates of a physical point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preimage {
    pub element: usize,
    pub xi: Vec3,
}

fn solve3(m: &[[f64; 3]; 3], b: &Vec3) -> Option<Vec3> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let mut out = [0.0; 3];
    for c in 0..3 {
        let mut mc = *m;
        for r in 0..3 {
            mc[r][c] = b[r];
        }
        out[c] = (mc[0][0] * (mc[1][1] * mc[2][2] - mc[1][2] * mc[2][1])
            - mc[0][1] * (mc[1][0] * mc[2][2] - mc[1][2] * mc[2][0])
            + mc[0][2] * (mc[1][0] * mc[2][1] - mc[1][1] * mc[2][0]))
            / det;
    }
    Some(out)
}

/// Tensor basis values at `xi`, one per volume node.
pub fn tensor_basis(mesh: &Mesh, xi: Vec3) -> Vec<f64> {
    let n = mesh.sbp.n();
    let basis = mesh.sbp.basis();
    let l: [Vec<f64>; 3] = std::array::from_fn(|d| basis.eval(xi[d]));
    let mut out = vec![0.0; n * n * n];
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                out[node_index(n, i, j, k)] = l[0][i] * l[1][j] * l[2][k];
            }
        }
    }
    out
}

fn map_point(mesh: &Mesh, e: usize, xi: Vec3) -> (Vec3, [[f64; 3]; 3]) {
    let n = mesh.sbp.n();
    let basis = mesh.sbp.basis();
    let l: [Vec<f64>; 3] = std::array::from_fn(|d| basis.eval(xi[d]));
    let dl: [Vec<f64>; 3] = std::array::from_fn(|d| basis.eval_derivative(xi[d]));
    let coords = &mesh.elements[e].coords;
    let mut x = [0.0; 3];
    let mut jac = [[0.0; 3]; 3];
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let p = coords[node_index(n, i, j, k)];
                let w = l[0][i] * l[1][j] * l[2][k];
                let dw = [
                    dl[0][i] * l[1][j] * l[2][k],
                    l[0][i] * dl[1][j] * l[2][k],
                    l[0][i] * l[1][j] * dl[2][k],
                ];
                for d in 0..3 {
                    x[d] += w * p[d];
                    for a in 0..3 {
                        jac[d][a] += dw[a] * p[d];
                    }
                }
            }
        }
    }
    (x, jac)
}

enum Newton {
    Converged(Vec3),
    Failed,
}

fn newton_preimage(mesh: &Mesh, e: usize, target: Vec3) -> Newton {
    let mut xi = [0.5; 3];
    let resid = |xi: Vec3| {
        let (x, _) = map_point(mesh, e, xi);
        [target[0] - x[0], target[1] - x[1], target[2] - x[2]]
    };
    let norm = |r: &Vec3| r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut r = resid(xi);
    for _ in 0..50 {
        let (_, jac) = map_point(mesh, e, xi);
        let Some(dx) = solve3(&jac, &r) else {
            return Newton::Failed;
        };
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..20 {
            let trial = [xi[0] + alpha * dx[0], xi[1] + alpha * dx[1], xi[2] + alpha * dx[2]];
            let rt = resid(trial);
            if norm(&rt) <= norm(&r) || alpha < 1e-4 {
                xi = trial;
                r = rt;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        let step = alpha * dx.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !accepted {
            return Newton::Failed;
        }
        if step < 1e-12 {
            return Newton::Converged(xi);
        }
        if xi.iter().any(|v| v.abs() > 10.0) {
            // far outside this element; the point belongs elsewhere
            return Newton::Converged(xi);
        }
    }
    Newton::Failed
}

/// Finds the lowest-index element containing `x`.
pub fn locate_point(mesh: &Mesh, x: Vec3) -> Result<Preimage> {
    let pad = 1e-9 * mesh.domain.diameter();
    let tol = 1e-10;
    let mut newton_failed = false;
    for (e, g) in mesh.elements.iter().enumerate() {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &g.coords {
            for d in 0..3 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        // polynomial faces can bulge past the node hull
        let slack: Vec<f64> = (0..3).map(|d| 0.05 * (hi[d] - lo[d]) + pad).collect();
        if (0..3).any(|d| x[d] < lo[d] - slack[d] || x[d] > hi[d] + slack[d]) {
            continue;
        }
        match newton_preimage(mesh, e, x) {
            Newton::Converged(xi) => {
                if xi.iter().all(|v| *v >= -tol && *v <= 1.0 + tol) {
                    let xi = [xi[0].clamp(0.0, 1.0), xi[1].clamp(0.0, 1.0), xi[2].clamp(0.0, 1.0)];
                    return Ok(Preimage { element: e, xi });
                }
            }
            Newton::Failed => newton_failed = true,
        }
    }
    if newton_failed {
        Err(Error::Mesh(format!(
            "preimage search did not converge for point ({}, {}, {})",
            x[0], x[1], x[2]
        )))
    } else {
        Err(Error::Config(format!(
            "point ({}, {}, {}) lies outside the mesh",
            x[0], x[1], x[2]
        )))
    }
}

/// Nodal forcing of one source inside one element.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceStencil {
    pub element: usize,
    /// `L_p(xi0) / (h_p J_p)` per node.
    pub weights: Vec<f64>,
    /// Per-component amplitude multiplying the weights.
    pub amplitude: [f64; 9],
    pub time: TimeFunction,
}

/// Voigt components of the symmetric part of a moment tensor.
pub fn moment_voigt(m: &[[f64; 3]; 3]) -> [f64; 6] {
    let s = |i: usize, j: usize| 0.5 * (m[i][j] + m[j][i]);
    [s(0, 0), s(1, 1), s(2, 2), s(0, 1), s(0, 2), s(1, 2)]
}

pub fn inject_source(source: &PointSource, mesh: &Mesh) -> Result<SourceStencil> {
    source.time.validate()?;
    let pre = locate_point(mesh, source.location)?;
    let e = pre.element;
    let n = mesh.sbp.n();
    let h = mesh.sbp.weights();
    let basis = tensor_basis(mesh, pre.xi);
    let jac = &mesh.elements[e].jac;
    let weights = (0..basis.len())
        .map(|p| {
            let (i, j, k) = crate::specops::node_coords(n, p);
            basis[p] / (h[i] * h[j] * h[k] * jac[p])
        })
        .collect();
    let mut amplitude = [0.0; 9];
    match source.kind {
        SourceKind::Moment(m) => amplitude[3..9].copy_from_slice(&moment_voigt(&m)),
        SourceKind::Force(f) => {
            let rho = mesh.materials[e].rho;
            for d in 0..3 {
                amplitude[d] = f[d] / rho;
            }
        }
    }
    Ok(SourceStencil {
        element: e,
        weights,
        amplitude,
        time: source.time,
    })
}

impl SourceStencil {
    /// Adds `scale * stencil` to the global state.
    pub fn add_scaled(&self, q: &mut [f64], nodes: usize, scale: f64) {
        if scale == 0.0 {
            return;
        }
        let base = self.element * nodes * NVAR;
        for (p, w) in self.weights.iter().enumerate() {
            let ws = w * scale;
            for c in 0..NVAR {
                if self.amplitude[c] != 0.0 {
                    q[base + p * NVAR + c] += ws * self.amplitude[c];
                }
            }
        }
    }

    /// Adds the exact source contribution over `[t, t + dt]`.
    pub fn add_step(&self, q: &mut [f64], nodes: usize, t: f64, dt: f64) {
        self.add_scaled(q, nodes, self.time.integral(t, t + dt));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Receiver {
    pub name: String,
    pub location: Vec3,
    pub preimage: Preimage,
    basis: Vec<f64>,
}

impl Receiver {
    pub fn new(name: impl Into<String>, location: Vec3, mesh: &Mesh) -> Result<Self> {
        let preimage = locate_point(mesh, location)?;
        let basis = tensor_basis(mesh, preimage.xi);
        Ok(Receiver {
            name: name.into(),
            location,
            preimage,
            basis,
        })
    }

    /// Interpolated 9-component state.
    pub fn sample(&self, q: &[f64], disc: &Discretization) -> [f64; 9] {
        let nn = disc.nodes_per_element();
        let base = self.preimage.element * nn * NVAR;
        let mut out = [0.0; 9];
        for (p, w) in self.basis.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            for c in 0..NVAR {
                out[c] += w * q[base + p * NVAR + c];
            }
        }
        out
    }
}

pub fn sample_receiver(q: &[f64], disc: &Discretization, r: &Receiver) -> [f64; 9] {
    r.sample(q, disc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Execution;
    use crate::geometry::{Domain, DomainBoundary, MeshSpec, SurfaceFn, Topography};
    use crate::material::isotropic_from_speeds;
    use crate::specops::SbpOperator1D;
    use std::sync::Arc;

    fn mesh(p: usize, topo: Topography) -> Mesh {
        let spec = MeshSpec {
            dims: [2, 2, 2],
            domain: Domain::new([0.0; 3], [2.0; 3]).unwrap(),
            topography: topo,
            boundaries: [DomainBoundary::free_surface(); 6],
        };
        Mesh::build(&spec, SbpOperator1D::new(NodeKind::Gll, p).unwrap(), &|_| {
            isotropic_from_speeds(2.0, 2.0, 1.0).unwrap()
        })
        .unwrap()
    }

    #[test]
    fn time_function_examples() {
        let loh = TimeFunction::Loh1 { t: 0.1 };
        assert_eq!(loh.eval(0.0), 0.0);
        assert!((loh.eval(0.1) - 10.0 * (-1.0f64).exp()).abs() < 1e-14);
        assert!((loh.eval(0.1) - 3.6788).abs() < 1e-4);
        let gc = TimeFunction::GaussCosine { f0: 2.0, t0: 0.7 };
        assert_eq!(gc.eval(0.7), 1.0);
        let at20 = 1.0 - 21.0 * (-20.0f64).exp();
        assert!((loh.integral(0.0, 20.0 * 0.1) - at20).abs() < 1e-15);
        assert!((loh.integral(0.0, 40.0 * 0.1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn integrals_match_quadrature() {
        let rule = build_quadrature(NodeKind::Gl, 15).unwrap();
        for tf in [
            TimeFunction::Loh1 { t: 0.1 },
            TimeFunction::Ricker { f0: 3.0, t0: 0.4 },
            TimeFunction::GaussCosine { f0: 1.5, t0: 0.5 },
        ] {
            let (a, b) = (0.2, 0.23);
            let q = rule.integrate(|s| tf.eval(a + s * (b - a))) * (b - a);
            assert!((tf.integral(a, b) - q).abs() < 1e-14, "{tf:?}");
        }
    }

    #[test]
    fn node_source_is_one_hot() {
        let m = mesh(2, Topography::Flat);
        let src = PointSource {
            kind: SourceKind::Force([1.0, 0.0, 0.0]),
            location: [0.5, 0.5, 0.5],
            time: TimeFunction::Loh1 { t: 0.1 },
        };
        let st = inject_source(&src, &m).unwrap();
        assert_eq!(st.element, 0);
        let nonzero: Vec<usize> = (0..st.weights.len()).filter(|p| st.weights[*p] != 0.0).collect();
        assert_eq!(nonzero, vec![node_index(3, 1, 1, 1)]);
        let h = m.sbp.weights()[1];
        let jac = m.elements[0].jac[nonzero[0]];
        assert!((st.weights[nonzero[0]] - 1.0 / (h * h * h * jac)).abs() < 1e-12);
        assert_eq!(st.amplitude[0], 0.5);
    }

    #[test]
    fn integral_consistency_and_symmetry() {
        let m = mesh(4, Topography::Flat);
        let src = PointSource {
            kind: SourceKind::Force([1.0, 0.0, 0.0]),
            location: [1.5, 1.5, 1.5],
            time: TimeFunction::Loh1 { t: 0.1 },
        };
        let st = inject_source(&src, &m).unwrap();
        let n = m.sbp.n();
        let h = m.sbp.weights();
        let g = &m.elements[st.element];
        let total: f64 = (0..st.weights.len())
            .map(|p| {
                let (i, j, k) = crate::specops::node_coords(n, p);
                st.weights[p] * h[i] * h[j] * h[k] * g.jac[p]
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-13);
        for p in 0..st.weights.len() {
            let (i, j, k) = crate::specops::node_coords(n, p);
            let r = node_index(n, n - 1 - i, n - 1 - j, n - 1 - k);
            assert!((st.weights[p] - st.weights[r]).abs() < 1e-13 * st.weights[p].abs().max(1.0));
        }
    }

    #[test]
    fn outside_point_is_config_error() {
        let m = mesh(2, Topography::Flat);
        assert!(matches!(locate_point(&m, [3.0, 1.0, 1.0]), Err(Error::Config(_))));
        // shared face goes to the lower index element
        assert_eq!(locate_point(&m, [1.0, 0.5, 0.5]).unwrap().element, 0);
    }

    #[test]
    fn preimage_on_curved_mesh() {
        let f: SurfaceFn = Arc::new(|x, z| 0.2 * (x * 1.3).sin() * (z * 0.7).cos());
        let m = mesh(4, Topography::Function(f));
        let target = [1.3, 1.9, 0.4];
        let pre = locate_point(&m, target).unwrap();
        let (x, _) = map_point(&m, pre.element, pre.xi);
        for d in 0..3 {
            assert!((x[d] - target[d]).abs() < 1e-10);
        }
    }

    #[test]
    fn receivers_reproduce_polynomials() {
        let m = mesh(3, Topography::Flat);
        let d = Discretization::new(m, Execution::Serial);
        let f = |x: &Vec3| x[0].powi(3) - x[1] * x[2] + 2.0;
        let nn = d.nodes_per_element();
        let mut q = d.zero_state();
        for e in 0..d.mesh().num_elements() {
            for p in 0..nn {
                for c in 0..NVAR {
                    q[(e * nn + p) * NVAR + c] = (c + 1) as f64 * f(&d.mesh().elements[e].coords[p]);
                }
            }
        }
        for loc in [[0.3, 1.7, 1.1], [1.0, 1.0, 1.0], [0.0, 0.0, 0.0]] {
            let r = Receiver::new("r", loc, d.mesh()).unwrap();
            let s = r.sample(&q, &d);
            for c in 0..NVAR {
                assert!((s[c] - (c + 1) as f64 * f(&loc)).abs() < 1e-12);
            }
        }
        let node = d.mesh().elements[5].coords[7];
        let r = Receiver::new("node", node, d.mesh()).unwrap();
        let owner = r.preimage.element;
        let pidx = (0..nn).find(|p| d.mesh().elements[owner].coords[*p] == node).unwrap();
        assert_eq!(r.sample(&q, &d)[4], q[(owner * nn + pidx) * NVAR + 4]);
    }

    #[test]
    fn moment_tensor_symmetrized_bitwise() {
        let m = [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]];
        let mt = [[1.0, 4.0, 7.0], [2.0, 5.0, 8.0], [3.0, 6.0, 9.0]];
        assert_eq!(moment_voigt(&m), moment_voigt(&mt));
    }
}
