//! Element-local semi-discrete operator in anti-symmetric split form.
//!
//! A global state vector stores, for each element, its `(P+1)^3` nodes with
//! the 9 components of each node contiguous:
//! `q[(e * nodes + p) * 9 + c]`.
//!
//! The right-hand side is
//!
//! ```text
//! dQ/dt = J^-1 P [ sum_xi D_xi F_xi(Q) + sum_xi B_xi(D_xi v) - Flux(Q) ]
//! ```
//!
//! with `P = blockdiag(rho^-1 I, C)`. This is applied by direct
//! multiplication, so no mass matrix is ever inverted.
//!
//! The flux phase is split from the volume phase. Face traces of every
//! element are published first; each element then solves the Riemann
//! problems on its own faces from its own trace and its neighbor's, in a
//! fixed (minus, plus) order, so both sides obtain identical hat-variables.

use crate::exec::{for_each_chunk, Execution};
use crate::geometry::{BoundaryTreatment, FaceLink, Mesh};
use crate::material::Material;
use crate::riemann::{
    assemble_fluctuation_vector, boundary_hat, fluctuations, interface_hat, rotate,
    rotate_back, traction, HatState, LocalTrace, Mat3, Side, Vec3,
};
use crate::specops::{apply_derivative_axis, axis_stride, face_line_base, NodeKind};

pub const NVAR: usize = 9;

/// Index of component `c` of node `p` in element `e`.
#[inline]
pub fn state_index(nodes: usize, e: usize, p: usize, c: usize) -> usize {
    (e * nodes + p) * NVAR + c
}

/// Conservative flux `F_xi`: velocity rows `J xi . sigma`, stress rows zero.
#[inline]
pub fn conservative_flux(q: &[f64], metric_row: &Vec3) -> [f64; 9] {
    let t = traction(&q[3..9], metric_row);
    [t[0], t[1], t[2], 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
}

/// Non-conservative product `B_xi`: velocity rows zero, stress rows the
/// symmetric gradient of `dv = d v / d xi` weighted by `J xi`.
#[inline]
pub fn ncp_flux(dv: &Vec3, m: &Vec3) -> [f64; 9] {
    [
        0.0,
        0.0,
        0.0,
        m[0] * dv[0],
        m[1] * dv[1],
        m[2] * dv[2],
        m[1] * dv[0] + m[0] * dv[1],
        m[2] * dv[0] + m[0] * dv[2],
        m[2] * dv[1] + m[1] * dv[2],
    ]
}

/// Frame data of one face node as used by the flux.
#[derive(Debug, Clone, Copy)]
pub struct FaceFrame {
    pub normal: Vec3,
    pub rotation: Mat3,
    pub impedance: Vec3,
    pub scale: f64,
}

/// Energy flow through faces split by origin. All terms are rates.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyBudget {
    /// Upwind dissipation `-sum S |G|^2 / Z`, never positive.
    pub fluctuation: f64,
    /// Power of the hat-variables on external faces.
    pub boundary: f64,
    /// Power of the hat-variables on internal faces; zero for locked
    /// interfaces up to round-off.
    pub interface: f64,
}

impl EnergyBudget {
    pub fn total(&self) -> f64 {
        self.fluctuation + self.boundary + self.interface
    }
}

/// Largest interface power mismatch over internal face nodes.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InterfaceJump {
    /// `max |T_hat [[v_hat]]|` with per-side velocities from the sided
    /// characteristic formulas.
    pub sided: f64,
    /// Same quantity for the hat-variables each side receives.
    pub scheme: f64,
    /// `max |T_hat| (|2p-| + |T_hat|) / Z-` and its `+` side mirror, the
    /// size of the terms whose difference forms the jump.
    pub scale: f64,
}

/// The semi-discrete operator on a mesh.
#[derive(Debug, Clone)]
pub struct Discretization {
    mesh: Mesh,
    exec: Execution,
    inv_rho_j: Vec<Vec<f64>>,
    inv_j: Vec<Vec<f64>>,
    frames: Vec<[Vec<FaceFrame>; 6]>,
}

impl Discretization {
    pub fn new(mesh: Mesh, exec: Execution) -> Self {
        let ne = mesh.num_elements();
        let nf = mesh.sbp.n() * mesh.sbp.n();
        let inv_j: Vec<Vec<f64>> = mesh
            .elements
            .iter()
            .map(|g| g.jac.iter().map(|j| 1.0 / j).collect())
            .collect();
        let inv_rho_j = mesh
            .elements
            .iter()
            .zip(&mesh.materials)
            .map(|(g, m)| g.jac.iter().map(|j| 1.0 / (m.rho * j)).collect())
            .collect();
        let mut frames = Vec::with_capacity(ne);
        for e in 0..ne {
            let f: [Vec<FaceFrame>; 6] = std::array::from_fn(|f| {
                // shared frame comes from the minus side of internal faces
                let (src_e, src_f) = match mesh.links[e][f] {
                    FaceLink::Interior { neighbor, minus: false } => (neighbor, f ^ 1),
                    _ => (e, f),
                };
                let src = &mesh.elements[src_e].faces[src_f];
                let own = &mesh.elements[e].faces[f];
                (0..nf)
                    .map(|p| FaceFrame {
                        normal: src.normal[p],
                        rotation: src.rotation[p],
                        impedance: mesh.materials[e].impedances(src.normal[p]),
                        scale: own.scale[p],
                    })
                    .collect()
            });
            frames.push(f);
        }
        Discretization {
            mesh,
            exec,
            inv_rho_j,
            inv_j,
            frames,
        }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn execution(&self) -> Execution {
        self.exec
    }

    pub fn set_execution(&mut self, exec: Execution) {
        self.exec = exec;
    }

    pub fn frames(&self, e: usize, face: usize) -> &[FaceFrame] {
        &self.frames[e][face]
    }

    pub fn nodes_per_element(&self) -> usize {
        self.mesh.nodes_per_element()
    }

    /// Length of a global state vector.
    pub fn state_len(&self) -> usize {
        self.mesh.num_elements() * self.nodes_per_element() * NVAR
    }

    pub fn zero_state(&self) -> Vec<f64> {
        vec![0.0; self.state_len()]
    }

    fn element_chunk(&self) -> usize {
        self.nodes_per_element() * NVAR
    }

    fn face_chunk(&self) -> usize {
        let n = self.mesh.sbp.n();
        6 * n * n * NVAR
    }

    /// Multiplies the bracket of an element by `J^-1 P` in place.
    fn apply_material_scaling(&self, e: usize, acc: &mut [f64]) {
        let mat: &Material = &self.mesh.materials[e];
        let irj = &self.inv_rho_j[e];
        let ij = &self.inv_j[e];
        for (p, node) in acc.chunks_exact_mut(NVAR).enumerate() {
            node[0] *= irj[p];
            node[1] *= irj[p];
            node[2] *= irj[p];
            let s = mat.apply_stiffness(&node[3..9]);
            for c in 0..6 {
                node[3 + c] = s[c] * ij[p];
            }
        }
    }

    /// Unscaled volume bracket of one element.
    pub fn element_volume_bracket(&self, e: usize, qe: &[f64], acc: &mut [f64]) {
        let sbp = &self.mesh.sbp;
        let g = &self.mesh.elements[e];
        let nn = sbp.volume_len();
        let mut buf = vec![0.0; nn * 6];
        let mut dbuf = vec![0.0; nn * 6];
        acc.iter_mut().for_each(|v| *v = 0.0);
        for axis in 0..3 {
            for p in 0..nn {
                let q = &qe[p * NVAR..(p + 1) * NVAR];
                let t = traction(&q[3..9], &g.metric[p][axis]);
                buf[p * 6..p * 6 + 3].copy_from_slice(&t);
                buf[p * 6 + 3..p * 6 + 6].copy_from_slice(&q[0..3]);
            }
            apply_derivative_axis(&buf, 6, axis, sbp, &mut dbuf);
            for p in 0..nn {
                let d = &dbuf[p * 6..p * 6 + 6];
                let b = ncp_flux(&[d[3], d[4], d[5]], &g.metric[p][axis]);
                let a = &mut acc[p * NVAR..(p + 1) * NVAR];
                a[0] += d[0];
                a[1] += d[1];
                a[2] += d[2];
                for c in 3..9 {
                    a[c] += b[c];
                }
            }
        }
    }

    /// `out = D q`: volume terms only, no face coupling.
    pub fn apply_volume(&self, q: &[f64], out: &mut [f64]) {
        assert_eq!(q.len(), self.state_len(), "state shape mismatch");
        let chunk = self.element_chunk();
        for_each_chunk(self.exec, out, chunk, |e, oe| {
            self.element_volume_bracket(e, &q[e * chunk..(e + 1) * chunk], oe);
            self.apply_material_scaling(e, oe);
        });
    }

    /// Cartesian `(v, sigma)` on all six faces of every element.
    pub fn face_traces(&self, q: &[f64]) -> Vec<f64> {
        let sbp = &self.mesh.sbp;
        let n = sbp.n();
        let chunk = self.element_chunk();
        let fchunk = self.face_chunk();
        let mut traces = vec![0.0; self.mesh.num_elements() * fchunk];
        let gll = sbp.rule.kind == NodeKind::Gll;
        for_each_chunk(self.exec, &mut traces, fchunk, |e, te| {
            let qe = &q[e * chunk..(e + 1) * chunk];
            for f in 0..6 {
                let (axis, upper) = (f / 2, f % 2 == 1);
                let stride = axis_stride(n, axis);
                let ev = sbp.e(upper);
                for b in 0..n {
                    for a in 0..n {
                        let base = face_line_base(n, axis, a, b);
                        let dst = ((f * n + b) * n + a) * NVAR;
                        let out = &mut te[dst..dst + NVAR];
                        if gll {
                            let p = base + if upper { (n - 1) * stride } else { 0 };
                            out.copy_from_slice(&qe[p * NVAR..(p + 1) * NVAR]);
                        } else {
                            out.iter_mut().for_each(|v| *v = 0.0);
                            for m in 0..n {
                                let p = base + m * stride;
                                for c in 0..NVAR {
                                    out[c] += ev[m] * qe[p * NVAR + c];
                                }
                            }
                        }
                    }
                }
            }
        });
        traces
    }

    fn local_trace(tr: &[f64], fr: &FaceFrame) -> LocalTrace {
        let v = [tr[0], tr[1], tr[2]];
        let t = traction(&tr[3..9], &fr.normal);
        LocalTrace {
            v: rotate(&fr.rotation, &v),
            t: rotate(&fr.rotation, &t),
            z: fr.impedance,
        }
    }

    /// Hat-variables and local trace of face node `(e, f, p)`. `None` for
    /// exact-trace boundaries.
    pub fn face_node_hat(
        &self,
        traces: &[f64],
        e: usize,
        f: usize,
        p: usize,
    ) -> Option<(LocalTrace, HatState)> {
        let n = self.mesh.sbp.n();
        let fchunk = self.face_chunk();
        let at = |el: usize, face: usize| {
            let i = el * fchunk + (face * n * n + p) * NVAR;
            &traces[i..i + NVAR]
        };
        let fr = &self.frames[e][f];
        let own = Self::local_trace(at(e, f), &fr[p]);
        let side = if f % 2 == 1 { Side::Upper } else { Side::Lower };
        let hat = match self.mesh.links[e][f] {
            FaceLink::Boundary(BoundaryTreatment::ExactTrace) => return None,
            FaceLink::Boundary(BoundaryTreatment::Riemann(spec)) => boundary_hat(&own, &spec, side),
            FaceLink::Interior { neighbor, minus } => {
                let of = f ^ 1;
                let other = Self::local_trace(at(neighbor, of), &self.frames[neighbor][of][p]);
                if minus {
                    interface_hat(&own, &other)
                } else {
                    interface_hat(&other, &own)
                }
            }
        };
        Some((own, hat))
    }

    /// Unscaled flux term `Flux(Q)` of one element, added to `acc`.
    fn element_flux_bracket(&self, e: usize, traces: &[f64], acc: &mut [f64]) {
        let sbp = &self.mesh.sbp;
        let n = sbp.n();
        let h = sbp.weights();
        for f in 0..6 {
            let (axis, upper) = (f / 2, f % 2 == 1);
            let side = if upper { Side::Upper } else { Side::Lower };
            let stride = axis_stride(n, axis);
            let ev = sbp.e(upper);
            for b in 0..n {
                for a in 0..n {
                    let p = a + n * b;
                    let Some((own, hat)) = self.face_node_hat(traces, e, f, p) else {
                        continue;
                    };
                    let fr = &self.frames[e][f][p];
                    let (g, gt) = fluctuations(&own, &hat, side);
                    let gc = rotate_back(&fr.rotation, &g);
                    let gtc = rotate_back(&fr.rotation, &gt);
                    let fv = assemble_fluctuation_vector(&gc, &gtc, &fr.normal, side);
                    let base = face_line_base(n, axis, a, b);
                    for m in 0..n {
                        if ev[m] == 0.0 {
                            continue;
                        }
                        let w = fr.scale * ev[m] / h[m];
                        let node = base + m * stride;
                        for c in 0..NVAR {
                            acc[node * NVAR + c] -= w * fv[c];
                        }
                    }
                }
            }
        }
    }

    /// `out = F q`: the penalty flux term only.
    pub fn apply_flux(&self, q: &[f64], out: &mut [f64]) {
        assert_eq!(q.len(), self.state_len(), "state shape mismatch");
        let traces = self.face_traces(q);
        let chunk = self.element_chunk();
        for_each_chunk(self.exec, out, chunk, |e, oe| {
            oe.iter_mut().for_each(|v| *v = 0.0);
            self.element_flux_bracket(e, &traces, oe);
            self.apply_material_scaling(e, oe);
        });
    }

    /// Full semi-discrete right-hand side `dQ/dt`.
    pub fn rhs(&self, q: &[f64], out: &mut [f64]) {
        assert_eq!(q.len(), self.state_len(), "state shape mismatch");
        let traces = self.face_traces(q);
        let chunk = self.element_chunk();
        for_each_chunk(self.exec, out, chunk, |e, oe| {
            self.element_volume_bracket(e, &q[e * chunk..(e + 1) * chunk], oe);
            self.element_flux_bracket(e, &traces, oe);
            self.apply_material_scaling(e, oe);
        });
    }

    /// Face energy flow predicted by the hat-variables.
    pub fn energy_budget(&self, q: &[f64]) -> EnergyBudget {
        let traces = self.face_traces(q);
        let n = self.mesh.sbp.n();
        let h = self.mesh.sbp.weights();
        let mut out = EnergyBudget::default();
        for e in 0..self.mesh.num_elements() {
            for f in 0..6 {
                let side = if f % 2 == 1 { Side::Upper } else { Side::Lower };
                for b in 0..n {
                    for a in 0..n {
                        let p = a + n * b;
                        let Some((own, hat)) = self.face_node_hat(&traces, e, f, p) else {
                            continue;
                        };
                        let fr = &self.frames[e][f][p];
                        let w = fr.scale * h[a] * h[b];
                        let (g, _) = fluctuations(&own, &hat, side);
                        let diss: f64 = (0..3).map(|k| g[k] * g[k] / own.z[k]).sum();
                        let power: f64 = (0..3).map(|k| hat.t[k] * hat.v[k]).sum();
                        let sign = if side == Side::Upper { 1.0 } else { -1.0 };
                        out.fluctuation -= w * diss;
                        match self.mesh.links[e][f] {
                            FaceLink::Interior { .. } => out.interface += sign * w * power,
                            FaceLink::Boundary(_) => out.boundary += sign * w * power,
                        }
                    }
                }
            }
        }
        out
    }

    /// Largest `|T_hat . [[v_hat]]|` over internal face nodes.
    ///
    /// The first value uses sided velocities from the per-side
    /// characteristic formulas `v- = (2p- + T)/Z-`, `v+ = (2q+ - T)/Z+`.
    /// The second uses the hat-variables each side actually receives from
    /// the scheme, computed independently for both elements.
    pub fn interface_jump_power(&self, q: &[f64]) -> InterfaceJump {
        let traces = self.face_traces(q);
        let n = self.mesh.sbp.n();
        let fchunk = self.face_chunk();
        let mut out = InterfaceJump::default();
        for e in 0..self.mesh.num_elements() {
            for f in 0..6 {
                let FaceLink::Interior { neighbor, minus: true } = self.mesh.links[e][f] else {
                    continue;
                };
                let of = f ^ 1;
                for p in 0..n * n {
                    let at = |el: usize, face: usize| {
                        let i = el * fchunk + (face * n * n + p) * NVAR;
                        &traces[i..i + NVAR]
                    };
                    let m = Self::local_trace(at(e, f), &self.frames[e][f][p]);
                    let pl = Self::local_trace(at(neighbor, of), &self.frames[neighbor][of][p]);
                    let hat = interface_hat(&m, &pl);
                    let (_, hm) = self.face_node_hat(&traces, e, f, p).expect("interior face");
                    let (_, hp) = self.face_node_hat(&traces, neighbor, of, p).expect("interior face");
                    for k in 0..3 {
                        let (pm, _) = crate::riemann::characteristics(m.v[k], m.t[k], m.z[k]);
                        let (_, qp) = crate::riemann::characteristics(pl.v[k], pl.t[k], pl.z[k]);
                        let phi = hat.t[k];
                        let v_minus = (2.0 * pm + phi) / m.z[k];
                        let v_plus = (2.0 * qp - phi) / pl.z[k];
                        out.sided = out.sided.max((phi * (v_plus - v_minus)).abs());
                        out.scheme = out.scheme.max((hm.t[k] * (hp.v[k] - hm.v[k])).abs());
                        out.scheme = out.scheme.max((hp.t[k] - hm.t[k]).abs() * hm.v[k].abs());
                        let size = ((2.0 * pm).abs() + phi.abs()) / m.z[k];
                        let size = size.max(((2.0 * qp).abs() + phi.abs()) / pl.z[k]);
                        out.scale = out.scale.max(phi.abs() * size);
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Domain, DomainBoundary, MeshSpec, Topography};
    use crate::material::isotropic_from_speeds;
    use crate::specops::SbpOperator1D;

    #[test]
    fn flux_examples() {
        assert_eq!(conservative_flux(&[1.0, 2.0, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], &[1.0, 0.0, 0.0]), [0.0; 9]);
        let f = conservative_flux(&[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0], &[1.0, 0.0, 0.0]);
        assert_eq!(f, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let f = conservative_flux(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 3.0, 0.0, 0.0], &[0.0, 2.0, 0.0]);
        assert_eq!(f[0], 6.0);
        assert_eq!(ncp_flux(&[0.0; 3], &[1.0, 2.0, 3.0]), [0.0; 9]);
        let b = ncp_flux(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]);
        assert_eq!(b, [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let b = ncp_flux(&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]);
        assert_eq!(b[7], 1.0);
    }

    #[test]
    fn hydrostatic_and_shear_traction() {
        let n = [0.6, 0.0, 0.8];
        assert_eq!(traction(&[2.0, 2.0, 2.0, 0.0, 0.0, 0.0], &n), [1.2, 0.0, 1.6]);
        assert_eq!(traction(&[0.0, 0.0, 0.0, 5.0, 0.0, 0.0], &[1.0, 0.0, 0.0]), [0.0, 5.0, 0.0]);
    }

    fn unit_mesh(p: usize, kind: NodeKind, bc: DomainBoundary) -> Discretization {
        let spec = MeshSpec::cube([2, 2, 2], Domain::unit(), bc);
        let mesh = Mesh::build(&spec, SbpOperator1D::new(kind, p).unwrap(), &|_| {
            isotropic_from_speeds(1.0, 2.0, 1.0).unwrap()
        })
        .unwrap();
        Discretization::new(mesh, Execution::Serial)
    }

    #[test]
    fn traction_free_constant_state_is_equilibrium() {
        let d = unit_mesh(3, NodeKind::Gll, DomainBoundary::free_surface());
        let mut q = d.zero_state();
        for node in q.chunks_exact_mut(NVAR) {
            node[0] = 0.3;
            node[1] = -0.2;
            node[2] = 0.1;
        }
        let mut out = d.zero_state();
        d.rhs(&q, &mut out);
        assert!(out.iter().all(|v| v.abs() < 1e-12), "{:e}", out.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    }

    #[test]
    fn rhs_is_linear_and_serial_matches_parallel() {
        let mut d = unit_mesh(2, NodeKind::Gll, DomainBoundary::absorbing());
        let q1: Vec<f64> = (0..d.state_len()).map(|i| ((i * 37 % 101) as f64 / 50.0) - 1.0).collect();
        let q2: Vec<f64> = (0..d.state_len()).map(|i| ((i * 53 % 97) as f64 / 40.0) - 1.2).collect();
        let (a, b) = (0.7, -1.3);
        let comb: Vec<f64> = q1.iter().zip(&q2).map(|(x, y)| a * x + b * y).collect();
        let mut r1 = d.zero_state();
        let mut r2 = d.zero_state();
        let mut rc = d.zero_state();
        d.rhs(&q1, &mut r1);
        d.rhs(&q2, &mut r2);
        d.rhs(&comb, &mut rc);
        let scale = r1.iter().chain(&r2).fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..rc.len() {
            assert!((rc[i] - (a * r1[i] + b * r2[i])).abs() < 1e-12 * scale);
        }
        d.set_execution(Execution::Parallel);
        let mut rp = d.zero_state();
        d.rhs(&q1, &mut rp);
        assert_eq!(rp, r1);
        let mut vol = d.zero_state();
        let mut flux = d.zero_state();
        d.apply_volume(&q1, &mut vol);
        d.apply_flux(&q1, &mut flux);
        for i in 0..vol.len() {
            assert!((vol[i] + flux[i] - r1[i]).abs() < 1e-13 * scale);
        }
    }

    #[test]
    fn gl_traces_are_polynomial_boundary_values() {
        let d = unit_mesh(4, NodeKind::Gl, DomainBoundary::free_surface());
        let mesh = d.mesh();
        let f = |x: &Vec3| x[0].powi(4) - 2.0 * x[1] * x[2] + x[2].powi(3);
        let mut q = d.zero_state();
        let nn = d.nodes_per_element();
        for e in 0..mesh.num_elements() {
            for p in 0..nn {
                for c in 0..NVAR {
                    q[state_index(nn, e, p, c)] = (c as f64 + 1.0) * f(&mesh.elements[e].coords[p]);
                }
            }
        }
        let tr = d.face_traces(&q);
        let n = mesh.sbp.n();
        for e in 0..mesh.num_elements() {
            for face in 0..6 {
                let fg = &mesh.elements[e].faces[face];
                for p in 0..n * n {
                    let i = e * 6 * n * n * NVAR + (face * n * n + p) * NVAR;
                    for c in 0..NVAR {
                        let exact = (c as f64 + 1.0) * f(&fg.coords[p]);
                        assert!((tr[i + c] - exact).abs() < 1e-11);
                    }
                }
            }
        }
    }

    fn plane_wave_rhs_error(p: usize, length: f64) -> f64 {
        // S-wave v_y = sin(k x), sigma_xy = -mu / cs sin(k x), unit wavelength
        let spec = MeshSpec {
            dims: [1, 1, 1],
            domain: Domain::new([0.0; 3], [length; 3]).unwrap(),
            topography: Topography::Flat,
            boundaries: [DomainBoundary::Condition(BoundaryTreatment::ExactTrace); 6],
        };
        let mesh = Mesh::build(&spec, SbpOperator1D::new(NodeKind::Gll, p).unwrap(), &|_| {
            isotropic_from_speeds(1.0, 2.0, 1.0).unwrap()
        })
        .unwrap();
        let d = Discretization::new(mesh, Execution::Serial);
        let k = 2.0 * std::f64::consts::PI;
        let nn = d.nodes_per_element();
        let mut q = d.zero_state();
        let mut exact = d.zero_state();
        for pnode in 0..nn {
            let x = d.mesh().elements[0].coords[pnode][0];
            q[pnode * NVAR + 1] = (k * x).sin();
            q[pnode * NVAR + 6] = -(k * x).sin();
            // rho dv_y/dt = d sigma_xy/dx, d sigma_xy/dt = mu dv_y/dx
            exact[pnode * NVAR + 1] = -k * (k * x).cos();
            exact[pnode * NVAR + 6] = k * (k * x).cos();
        }
        let mut out = d.zero_state();
        d.rhs(&q, &mut out);
        out.iter().zip(&exact).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    #[test]
    fn plane_wave_derivative_is_spectrally_accurate() {
        // quarter-wavelength element: error falls geometrically with P
        let errs: Vec<f64> = (2..=8).map(|p| plane_wave_rhs_error(p, 0.25)).collect();
        for w in errs.windows(2) {
            assert!(w[1] < 0.4 * w[0], "{errs:?}");
        }
        let fine = plane_wave_rhs_error(6, 1.0 / 32.0);
        assert!(fine < 1e-8, "{fine:e}");
    }
}
