//! ADER one-step time integration and the global CFL step.
//!
//! For `dQ/dt = (D + F) Q` with `D` the element-local volume operator and
//! `F` the face penalty, one step is
//!
//! ```text
//! Qbar = sum_{m=0..P} dt^(m+1) / (m+1)! D^m Q0
//! Q1   = Q0 + D Qbar + F Qbar
//! ```
//!
//! so the flux is evaluated once per step whatever the order.

use crate::discretization::{Discretization, NVAR};
use crate::error::{Error, Result};
use crate::material::effective_normal_speeds;

/// A linear operator split into a local part and a coupling part.
pub trait SplitOperator: Sync {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn apply_volume(&self, x: &[f64], out: &mut [f64]);
    fn apply_flux(&self, x: &[f64], out: &mut [f64]);
}

impl SplitOperator for Discretization {
    fn len(&self) -> usize {
        self.state_len()
    }

    fn apply_volume(&self, x: &[f64], out: &mut [f64]) {
        Discretization::apply_volume(self, x, out)
    }

    fn apply_flux(&self, x: &[f64], out: &mut [f64]) {
        Discretization::apply_flux(self, x, out)
    }
}

/// Taylor coefficients `D^m Q0` for `m = 0..=P` of the local predictor.
#[derive(Debug, Clone)]
pub struct AderWorkspace {
    pub coeffs: Vec<Vec<f64>>,
}

impl AderWorkspace {
    /// Predictor `sum tau^m / m! D^m Q0`.
    pub fn evaluate(&self, tau: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.coeffs[0].len()];
        let mut f = 1.0;
        for (m, c) in self.coeffs.iter().enumerate() {
            if m > 0 {
                f *= tau / m as f64;
            }
            out.iter_mut().zip(c).for_each(|(o, v)| *o += f * v);
        }
        out
    }
}

pub fn ader_predictor<O: SplitOperator + ?Sized>(op: &O, q0: &[f64], degree: usize) -> AderWorkspace {
    let mut coeffs = vec![q0.to_vec()];
    for m in 1..=degree {
        let mut next = vec![0.0; q0.len()];
        op.apply_volume(&coeffs[m - 1], &mut next);
        coeffs.push(next);
    }
    AderWorkspace { coeffs }
}

/// Exact integral of the predictor over `[0, dt]`.
pub fn ader_time_average(ws: &AderWorkspace, dt: f64) -> Vec<f64> {
    let mut out = vec![0.0; ws.coeffs[0].len()];
    let mut f = 1.0;
    for (m, c) in ws.coeffs.iter().enumerate() {
        f *= dt / (m + 1) as f64;
        out.iter_mut().zip(c).for_each(|(o, v)| *o += f * v);
    }
    out
}

/// One ADER step from the stored predictor; returns `Q1`.
pub fn ader_step<O: SplitOperator + ?Sized>(op: &O, q0: &[f64], dt: f64, degree: usize) -> Vec<f64> {
    let ws = ader_predictor(op, q0, degree);
    let avg = ader_time_average(&ws, dt);
    let mut tmp = vec![0.0; q0.len()];
    let mut q1 = q0.to_vec();
    op.apply_volume(&avg, &mut tmp);
    q1.iter_mut().zip(&tmp).for_each(|(a, b)| *a += b);
    op.apply_flux(&avg, &mut tmp);
    q1.iter_mut().zip(&tmp).for_each(|(a, b)| *a += b);
    q1
}

/// Reusable buffers for in-place ADER steps.
#[derive(Debug, Clone)]
pub struct AderStepper {
    degree: usize,
    cur: Vec<f64>,
    next: Vec<f64>,
    avg: Vec<f64>,
    tmp: Vec<f64>,
}

impl AderStepper {
    pub fn new(len: usize, degree: usize) -> Self {
        AderStepper {
            degree,
            cur: vec![0.0; len],
            next: vec![0.0; len],
            avg: vec![0.0; len],
            tmp: vec![0.0; len],
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Advances `q` by `dt` without sources.
    pub fn step<O: SplitOperator + ?Sized>(&mut self, op: &O, q: &mut [f64], dt: f64) {
        self.cur.copy_from_slice(q);
        self.avg.iter_mut().zip(q.iter()).for_each(|(a, v)| *a = dt * v);
        let mut f = dt;
        for m in 1..=self.degree {
            op.apply_volume(&self.cur, &mut self.next);
            std::mem::swap(&mut self.cur, &mut self.next);
            f *= dt / (m + 1) as f64;
            self.avg.iter_mut().zip(&self.cur).for_each(|(a, v)| *a += f * v);
        }
        op.apply_volume(&self.avg, &mut self.tmp);
        q.iter_mut().zip(&self.tmp).for_each(|(a, b)| *a += b);
        op.apply_flux(&self.avg, &mut self.tmp);
        q.iter_mut().zip(&self.tmp).for_each(|(a, b)| *a += b);
    }
}

/// Global step `dt = (CFL / 3) h_min / c_max` with `h_min` the reference
/// element length over `P + 1` and `c_max` the largest metric-scaled
/// effective P-wave speed over all nodes and axes.
pub fn cfl_timestep(disc: &Discretization, cfl: f64) -> Result<f64> {
    if !(cfl > 0.0 && cfl.is_finite()) {
        return Err(Error::Config(format!("CFL number must be positive, got {cfl}")));
    }
    let mesh = disc.mesh();
    if mesh.num_elements() == 0 {
        return Err(Error::Mesh("mesh has no elements".into()));
    }
    let mut cmax: f64 = 0.0;
    for (e, (g, mat)) in mesh.elements.iter().zip(&mesh.materials).enumerate() {
        let ws = mat.wavespeeds();
        for (p, metric) in g.metric.iter().enumerate() {
            for row in metric {
                let len = (row[0] * row[0] + row[1] * row[1] + row[2] * row[2]).sqrt();
                if !(len > 0.0) || !(g.jac[p] > 0.0) {
                    return Err(Error::Mesh(format!("degenerate element {e} at node {p}")));
                }
                let n = [row[0] / len, row[1] / len, row[2] / len];
                let (cn, _, _) = effective_normal_speeds(&ws, n);
                cmax = cmax.max(len / g.jac[p] * cn);
            }
        }
    }
    let p = mesh.degree() as f64;
    Ok(cfl / 3.0 * (1.0 / (p + 1.0)) / cmax)
}

/// Location and size of the largest or first non-finite state entry.
pub fn check_finite(disc: &Discretization, q: &[f64], step: usize) -> Result<()> {
    if q.iter().all(|v| v.is_finite()) {
        return Ok(());
    }
    let nn = disc.nodes_per_element();
    let (mut worst, mut at) = (0.0f64, 0usize);
    for (i, v) in q.iter().enumerate() {
        let m = if v.is_finite() { v.abs() } else { f64::INFINITY };
        if m > worst || (!v.is_finite() && worst.is_finite()) {
            worst = m;
            at = i;
        }
    }
    let node_global = at / NVAR;
    let (element, node) = (node_global / nn, node_global % nn);
    let x = disc.mesh().elements[element].coords[node];
    Err(Error::Divergence {
        step,
        magnitude: worst,
        element,
        node,
        x: x[0],
        y: x[1],
        z: x[2],
    })
}
