//! One-dimensional nodal spectral operators on the reference interval `[0, 1]`.
//!
//! Nodes are computed by Newton iteration on Legendre polynomials and mapped
//! from `[-1, 1]`. For a rule with `P + 1` nodes the derivative matrix
//! `D = H^{-1} A` satisfies the summation-by-parts identity
//!
//! ```text
//! H D + (H D)^T = e(1) e(1)^T - e(0) e(0)^T
//! ```
//!
//! whenever the rule integrates polynomials of degree `2P - 1` exactly, which
//! both supported rules do.
//!
//! Volume fields are stored lexicographically with `q` fastest:
//! node `(i, j, k)` lives at `i + n * (j + n * k)` with `n = P + 1`. Every
//! module in the crate uses this single layout.

use crate::error::{Error, Result};

/// Highest supported polynomial degree.
pub const MAX_DEGREE: usize = 15;

/// Quadrature family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    /// Gauss-Legendre-Lobatto: both endpoints are nodes.
    Gll,
    /// Gauss-Legendre: neither endpoint is a node.
    Gl,
}

impl NodeKind {
    pub fn name(self) -> &'static str {
        match self {
            NodeKind::Gll => "gll",
            NodeKind::Gl => "gl",
        }
    }
}

impl std::str::FromStr for NodeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gll" | "lobatto" => Ok(NodeKind::Gll),
            "gl" | "gauss" | "legendre" => Ok(NodeKind::Gl),
            other => Err(Error::Config(format!(
                "unknown node kind '{other}' (expected 'gll' or 'gl')"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub kind: NodeKind,
    pub degree: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Legendre polynomial `P_n(x)` and its derivative by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    // derivative from P_n and P_{n-1}; valid in the open interval
    let dp = if (1.0 - x * x).abs() > 1e-300 {
        n as f64 * (p0 - x * p1) / (1.0 - x * x)
    } else {
        let s = if x > 0.0 { 1.0 } else if n.is_multiple_of(2) { -1.0 } else { 1.0 };
        s * (n * (n + 1)) as f64 / 2.0
    };
    (p1, dp)
}

fn newton<F: Fn(f64) -> (f64, f64)>(mut x: f64, f: F) -> f64 {
    for _ in 0..100 {
        let (val, der) = f(x);
        let dx = val / der;
        x -= dx;
        if dx.abs() < 1e-15 {
            break;
        }
    }
    x
}

/// Standard rule on `[-1, 1]` as (nodes, weights), ascending.
fn standard_rule(kind: NodeKind, degree: usize) -> (Vec<f64>, Vec<f64>) {
    let npts = degree + 1;
    let mut x = vec![0.0; npts];
    let mut w = vec![0.0; npts];
    match kind {
        NodeKind::Gl => {
            let nf = npts as f64;
            for i in 0..npts {
                let guess = -(std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
                let root = newton(guess, |t| legendre(npts, t));
                let (_, dp) = legendre(npts, root);
                x[i] = root;
                w[i] = 2.0 / ((1.0 - root * root) * dp * dp);
            }
        }
        NodeKind::Gll => {
            let p = degree;
            let pf = p as f64;
            x[0] = -1.0;
            x[p] = 1.0;
            for i in 1..p {
                let guess = -(std::f64::consts::PI * i as f64 / pf).cos();
                // roots of P'_p; second derivative from the Legendre ODE
                let root = newton(guess, |t| {
                    let (lp, dlp) = legendre(p, t);
                    let d2 = (2.0 * t * dlp - pf * (pf + 1.0) * lp) / (1.0 - t * t);
                    (dlp, d2)
                });
                x[i] = root;
            }
            for i in 0..npts {
                let (lp, _) = legendre(p, x[i]);
                w[i] = 2.0 / (pf * (pf + 1.0) * lp * lp);
            }
        }
    }
    // symmetrize to remove round-off asymmetry
    for i in 0..npts / 2 {
        let j = npts - 1 - i;
        let xs = 0.5 * (x[j] - x[i]);
        let ws = 0.5 * (w[i] + w[j]);
        x[i] = -xs;
        x[j] = xs;
        w[i] = ws;
        w[j] = ws;
    }
    if npts % 2 == 1 {
        x[npts / 2] = 0.0;
    }
    (x, w)
}

/// Builds a quadrature rule with `degree + 1` nodes on `[0, 1]`.
pub fn build_quadrature(kind: NodeKind, degree: usize) -> Result<QuadratureRule> {
    if degree == 0 || degree > MAX_DEGREE {
        return Err(Error::Config(format!(
            "polynomial degree {degree} unsupported (1..={MAX_DEGREE})"
        )));
    }
    let (x, w) = standard_rule(kind, degree);
    let mut nodes: Vec<f64> = x.iter().map(|&t| 0.5 * (t + 1.0)).collect();
    let mut weights: Vec<f64> = w.iter().map(|&t| 0.5 * t).collect();
    if kind == NodeKind::Gll {
        nodes[0] = 0.0;
        nodes[degree] = 1.0;
    }
    // normalize so the weights sum to one exactly up to the last ulp
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(QuadratureRule {
        kind,
        degree,
        nodes,
        weights,
    })
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Lagrange basis on a fixed node set, evaluated with barycentric weights.
#[derive(Debug, Clone)]
pub struct LagrangeBasis {
    nodes: Vec<f64>,
    bary: Vec<f64>,
}

impl LagrangeBasis {
    pub fn new(nodes: &[f64]) -> Self {
        let n = nodes.len();
        let bary = (0..n)
            .map(|j| {
                let prod: f64 = (0..n)
                    .filter(|&k| k != j)
                    .map(|k| nodes[j] - nodes[k])
                    .product();
                1.0 / prod
            })
            .collect();
        LagrangeBasis {
            nodes: nodes.to_vec(),
            bary,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Values `L_j(x)` for all `j`. Exactly one-hot at a node.
    pub fn eval(&self, x: f64) -> Vec<f64> {
        let n = self.nodes.len();
        if let Some(i) = self.nodes.iter().position(|&xi| xi == x) {
            let mut out = vec![0.0; n];
            out[i] = 1.0;
            return out;
        }
        let terms: Vec<f64> = (0..n).map(|j| self.bary[j] / (x - self.nodes[j])).collect();
        let denom: f64 = terms.iter().sum();
        terms.into_iter().map(|t| t / denom).collect()
    }

    /// Derivatives `L'_j(x)` for all `j`.
    pub fn eval_derivative(&self, x: f64) -> Vec<f64> {
        let n = self.nodes.len();
        if let Some(i) = self.nodes.iter().position(|&xi| xi == x) {
            let mut out = vec![0.0; n];
            let mut diag = 0.0;
            for j in 0..n {
                if j != i {
                    out[j] = self.bary[j] / self.bary[i] / (x - self.nodes[j]);
                    diag -= out[j];
                }
            }
            out[i] = diag;
            return out;
        }
        // product rule on l(x) * w_j / (x - x_j)
        let l: Vec<f64> = self.eval(x);
        let s: f64 = (0..n).map(|k| 1.0 / (x - self.nodes[k])).sum();
        (0..n)
            .map(|j| l[j] * (s - 1.0 / (x - self.nodes[j])))
            .collect()
    }
}

/// A nodal SBP operator: quadrature rule, derivative matrix and boundary
/// projection vectors.
#[derive(Debug, Clone)]
pub struct SbpOperator1D {
    pub rule: QuadratureRule,
    /// Row-major `(P+1) x (P+1)`, `d[i * n + j] = L'_j(q_i)`.
    pub d: Vec<f64>,
    pub e0: Vec<f64>,
    pub e1: Vec<f64>,
    basis: LagrangeBasis,
}

pub fn build_sbp(rule: QuadratureRule) -> SbpOperator1D {
    let n = rule.len();
    let basis = LagrangeBasis::new(&rule.nodes);
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        let row = basis.eval_derivative(rule.nodes[i]);
        d[i * n..(i + 1) * n].copy_from_slice(&row);
    }
    let e0 = basis.eval(0.0);
    let e1 = basis.eval(1.0);
    SbpOperator1D {
        rule,
        d,
        e0,
        e1,
        basis,
    }
}

impl SbpOperator1D {
    pub fn new(kind: NodeKind, degree: usize) -> Result<Self> {
        let op = build_sbp(build_quadrature(kind, degree)?);
        if degree > 12 {
            log_conditioning_warning(degree);
        }
        Ok(op)
    }

    /// Number of nodes per direction, `P + 1`.
    pub fn n(&self) -> usize {
        self.rule.len()
    }

    pub fn degree(&self) -> usize {
        self.rule.degree
    }

    pub fn nodes(&self) -> &[f64] {
        &self.rule.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.rule.weights
    }

    pub fn basis(&self) -> &LagrangeBasis {
        &self.basis
    }

    /// Boundary projection vector for the face at `0` or `1`.
    pub fn e(&self, upper: bool) -> &[f64] {
        if upper {
            &self.e1
        } else {
            &self.e0
        }
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n() + j]
    }

    /// Max-norm residual of `HD + (HD)^T - (e1 e1^T - e0 e0^T)`.
    pub fn sbp_residual(&self) -> f64 {
        let n = self.n();
        let h = self.weights();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let lhs = h[i] * self.d(i, j) + h[j] * self.d(j, i);
                let rhs = self.e1[i] * self.e1[j] - self.e0[i] * self.e0[j];
                worst = worst.max((lhs - rhs).abs());
            }
        }
        worst
    }

    /// 1D derivative of nodal samples.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n();
        assert_eq!(u.len(), n);
        assert_eq!(out.len(), n);
        for i in 0..n {
            out[i] = (0..n).map(|j| self.d(i, j) * u[j]).sum();
        }
    }

    /// Number of nodes in a volume element, `(P+1)^3`.
    pub fn volume_len(&self) -> usize {
        let n = self.n();
        n * n * n
    }
}

fn log_conditioning_warning(degree: usize) {
    eprintln!("warning: derivative matrix for degree {degree} may be poorly conditioned");
}

/// Linear node index with `q` fastest.
#[inline]
pub fn node_index(n: usize, i: usize, j: usize, k: usize) -> usize {
    i + n * (j + n * k)
}

/// Stride of tensor axis `axis` (0 = q, 1 = r, 2 = s) in the volume layout.
#[inline]
pub fn axis_stride(n: usize, axis: usize) -> usize {
    match axis {
        0 => 1,
        1 => n,
        _ => n * n,
    }
}

/// Applies the 1D derivative along one tensor axis of a field with `ncomp`
/// interleaved components per node (`field[node * ncomp + c]`).
///
/// The Kronecker operator is never formed; each grid line is a small
/// matrix-vector product.
pub fn apply_derivative_axis(
    field: &[f64],
    ncomp: usize,
    axis: usize,
    sbp: &SbpOperator1D,
    out: &mut [f64],
) {
    let n = sbp.n();
    let nn = n * n * n;
    assert_eq!(field.len(), nn * ncomp, "field shape mismatch");
    assert_eq!(out.len(), nn * ncomp, "output shape mismatch");
    let stride = axis_stride(n, axis);
    for line in 0..n * n {
        // base node of the grid line
        let (a, b) = (line % n, line / n);
        let base = match axis {
            0 => node_index(n, 0, a, b),
            1 => node_index(n, a, 0, b),
            _ => node_index(n, a, b, 0),
        };
        for i in 0..n {
            let dst = (base + i * stride) * ncomp;
            for c in 0..ncomp {
                let mut acc = 0.0;
                for m in 0..n {
                    acc += sbp.d(i, m) * field[(base + m * stride) * ncomp + c];
                }
                out[dst + c] = acc;
            }
        }
    }
}

/// Scalar-field convenience wrapper of [`apply_derivative_axis`].
pub fn apply_derivative_3d(field: &[f64], axis: usize, sbp: &SbpOperator1D) -> Vec<f64> {
    let mut out = vec![0.0; field.len()];
    apply_derivative_axis(field, 1, axis, sbp, &mut out);
    out
}

/// Extrapolates a volume field with `ncomp` components onto face
/// `(axis, upper)`. Face nodes are ordered by the two remaining axes in
/// increasing axis order, the first one fastest.
pub fn face_trace(field: &[f64], ncomp: usize, axis: usize, upper: bool, sbp: &SbpOperator1D) -> Vec<f64> {
    let n = sbp.n();
    let e = sbp.e(upper);
    let stride = axis_stride(n, axis);
    let mut out = vec![0.0; n * n * ncomp];
    for b in 0..n {
        for a in 0..n {
            let base = face_line_base(n, axis, a, b);
            let dst = (a + n * b) * ncomp;
            for c in 0..ncomp {
                let mut acc = 0.0;
                for m in 0..n {
                    if e[m] != 0.0 {
                        acc += e[m] * field[(base + m * stride) * ncomp + c];
                    }
                }
                out[dst + c] = acc;
            }
        }
    }
    out
}

/// Volume index of the first node on the grid line through face node `(a, b)`
/// normal to `axis`.
#[inline]
pub fn face_line_base(n: usize, axis: usize, a: usize, b: usize) -> usize {
    match axis {
        0 => node_index(n, 0, a, b),
        1 => node_index(n, a, 0, b),
        _ => node_index(n, a, b, 0),
    }
}

/// Tensor coordinates `(i, j, k)` of a volume node.
#[inline]
pub fn node_coords(n: usize, idx: usize) -> (usize, usize, usize) {
    (idx % n, (idx / n) % n, idx / (n * n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule(kind: NodeKind, p: usize) -> QuadratureRule {
        build_quadrature(kind, p).unwrap()
    }

    #[test]
    fn gll_degree_one_is_trapezoid() {
        let r = rule(NodeKind::Gll, 1);
        assert_eq!(r.nodes, vec![0.0, 1.0]);
        assert!((r.weights[0] - 0.5).abs() < 1e-15);
        assert!((r.weights[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gll_degree_two_is_simpson() {
        let r = rule(NodeKind::Gll, 2);
        let expect_x = [0.0, 0.5, 1.0];
        let expect_w = [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0];
        for i in 0..3 {
            assert!((r.nodes[i] - expect_x[i]).abs() < 1e-15);
            assert!((r.weights[i] - expect_w[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn gl_degree_one_nodes() {
        let r = rule(NodeKind::Gl, 1);
        let s = 1.0 / 3f64.sqrt();
        assert!((r.nodes[0] - 0.5 * (1.0 - s)).abs() < 1e-15);
        assert!((r.nodes[1] - 0.5 * (1.0 + s)).abs() < 1e-15);
        assert!((r.weights[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rules_integrate_to_stated_exactness() {
        for p in 1..=MAX_DEGREE {
            for (kind, exact_deg) in [(NodeKind::Gll, 2 * p - 1), (NodeKind::Gl, 2 * p + 1)] {
                let r = rule(kind, p);
                assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
                assert!(r.weights.iter().all(|&w| w > 0.0));
                assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
                match kind {
                    NodeKind::Gll => assert!(r.nodes[0] == 0.0 && r.nodes[p] == 1.0),
                    NodeKind::Gl => assert!(r.nodes[0] > 0.0 && r.nodes[p] < 1.0),
                }
                for k in 0..=exact_deg {
                    let integral = r.integrate(|x| x.powi(k as i32));
                    let exact = 1.0 / (k as f64 + 1.0);
                    assert!(
                        (integral - exact).abs() < 1e-13,
                        "{kind:?} P={p} k={k}: {integral} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn unsupported_degree_is_config_error() {
        assert!(matches!(build_quadrature(NodeKind::Gll, 0), Err(Error::Config(_))));
        assert!(matches!(build_quadrature(NodeKind::Gl, 16), Err(Error::Config(_))));
    }

    #[test]
    fn gll_linear_derivative_matrix() {
        let op = SbpOperator1D::new(NodeKind::Gll, 1).unwrap();
        assert_eq!(op.d, vec![-1.0, 1.0, -1.0, 1.0]);
    }

    #[test]
    fn derivative_of_square_is_exact() {
        let op = SbpOperator1D::new(NodeKind::Gll, 2).unwrap();
        let u: Vec<f64> = op.nodes().iter().map(|x| x * x).collect();
        let mut du = vec![0.0; 3];
        op.apply(&u, &mut du);
        for (x, d) in op.nodes().iter().zip(&du) {
            assert!((d - 2.0 * x).abs() < 1e-14);
        }
    }

    #[test]
    fn sbp_identity_all_degrees() {
        for p in 1..=8 {
            for kind in [NodeKind::Gll, NodeKind::Gl] {
                let op = SbpOperator1D::new(kind, p).unwrap();
                let res = op.sbp_residual();
                assert!(res < 1e-13, "{kind:?} P={p}: residual {res:e}");
            }
        }
    }

    #[test]
    fn monomials_differentiated_exactly() {
        for p in 1..=10 {
            for kind in [NodeKind::Gll, NodeKind::Gl] {
                let op = SbpOperator1D::new(kind, p).unwrap();
                for k in 0..=p {
                    let u: Vec<f64> = op.nodes().iter().map(|x| x.powi(k as i32)).collect();
                    let mut du = vec![0.0; op.n()];
                    op.apply(&u, &mut du);
                    for (x, d) in op.nodes().iter().zip(&du) {
                        let exact = if k == 0 { 0.0 } else { k as f64 * x.powi(k as i32 - 1) };
                        assert!((d - exact).abs() <= 1e-12 * exact.abs().max(1.0) * (p as f64));
                    }
                }
            }
        }
    }

    #[test]
    fn gl_extrapolation_reproduces_endpoints() {
        for p in 1..=10 {
            let op = SbpOperator1D::new(NodeKind::Gl, p).unwrap();
            // f(x) = (1 + 2x)^p - x
            let f = |x: f64| (1.0 + 2.0 * x).powi(p as i32) - x;
            let u: Vec<f64> = op.nodes().iter().map(|&x| f(x)).collect();
            let at0: f64 = op.e0.iter().zip(&u).map(|(e, v)| e * v).sum();
            let at1: f64 = op.e1.iter().zip(&u).map(|(e, v)| e * v).sum();
            let scale = u.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            assert!((at0 - f(0.0)).abs() < 1e-12 * scale);
            assert!((at1 - f(1.0)).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn derivative_3d_examples() {
        let op = SbpOperator1D::new(NodeKind::Gll, 3).unwrap();
        let n = op.n();
        let x = op.nodes();
        let constant = vec![2.5; n * n * n];
        for axis in 0..3 {
            let d = apply_derivative_3d(&constant, axis, &op);
            assert!(d.iter().all(|v| v.abs() < 1e-13));
        }
        let mut fq = vec![0.0; n * n * n];
        let mut fqr = vec![0.0; n * n * n];
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    fq[node_index(n, i, j, k)] = x[i];
                    fqr[node_index(n, i, j, k)] = x[i] * x[j];
                }
            }
        }
        let d = apply_derivative_3d(&fq, 0, &op);
        assert!(d.iter().all(|v| (v - 1.0).abs() < 1e-13));
        let d = apply_derivative_3d(&fqr, 1, &op);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    assert!((d[node_index(n, i, j, k)] - x[i]).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    #[should_panic(expected = "shape mismatch")]
    fn derivative_shape_mismatch_panics() {
        let op = SbpOperator1D::new(NodeKind::Gll, 2).unwrap();
        apply_derivative_3d(&[0.0; 5], 0, &op);
    }

    #[test]
    fn face_trace_picks_boundary_layer_for_gll() {
        let op = SbpOperator1D::new(NodeKind::Gll, 2).unwrap();
        let n = op.n();
        let field: Vec<f64> = (0..n * n * n).map(|i| i as f64).collect();
        let tr = face_trace(&field, 1, 2, true, &op);
        for b in 0..n {
            for a in 0..n {
                assert_eq!(tr[a + n * b], node_index(n, a, b, n - 1) as f64);
            }
        }
    }
}
