//! Curvilinear hexahedral elements, metric terms, face frames and the
//! structured mesh.
//!
//! The vertical axis is `y`. Topography `h(x, z)` displaces the top of the
//! domain, `y_max + h(x, z)`, and the interior is sheared linearly down to a
//! flat bottom at `y_min`.
//!
//! Faces are numbered `2 * axis + upper`, so face 0 is `q = 0`, face 1 is
//! `q = 1`, and so on up to face 5 (`s = 1`).

use std::io::BufRead;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::material::Material;
use crate::riemann::{BoundarySpec, Mat3, Vec3};
use crate::specops::{
    apply_derivative_axis, face_line_base, node_index, NodeKind, SbpOperator1D,
};

/// Nodal geometry on one face, indexed by face node `a + n * b`.
#[derive(Debug, Clone)]
pub struct FaceGeometry {
    pub coords: Vec<Vec3>,
    pub normal: Vec<Vec3>,
    /// `J * |grad xi|`, the surface scaling of the face quadrature.
    pub scale: Vec<f64>,
    pub rotation: Vec<Mat3>,
}

#[derive(Debug, Clone)]
pub struct ElementGeometry {
    pub n: usize,
    pub coords: Vec<Vec3>,
    pub jac: Vec<f64>,
    /// `metric[node][axis] = (J xi_x, J xi_y, J xi_z)` for `xi = q, r, s`.
    pub metric: Vec<Mat3>,
    pub faces: [FaceGeometry; 6],
}

/// Rows `(n, m, l)` of the local face frame. `m` is Gram-Schmidt of `m0`
/// against `n`. If `m0` is nearly parallel to `n` the other of `e_y`, `e_z`
/// is used instead.
pub fn face_rotation_basis(n: Vec3, m0: Vec3) -> Mat3 {
    let dot = |a: &Vec3, b: &Vec3| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let m0 = if dot(&n, &m0).abs() > 0.99 {
        if m0 == [0.0, 0.0, 1.0] {
            [0.0, 1.0, 0.0]
        } else {
            [0.0, 0.0, 1.0]
        }
    } else {
        m0
    };
    let d = dot(&n, &m0);
    let mut m = [m0[0] - d * n[0], m0[1] - d * n[1], m0[2] - d * n[2]];
    let mn = dot(&m, &m).sqrt();
    m.iter_mut().for_each(|c| *c /= mn);
    let l = [
        n[1] * m[2] - n[2] * m[1],
        n[2] * m[0] - n[0] * m[2],
        n[0] * m[1] - n[1] * m[0],
    ];
    [n, m, l]
}

/// Frame with the repository-wide default `m0 = e_y`.
pub fn default_frame(n: Vec3) -> Mat3 {
    face_rotation_basis(n, [0.0, 1.0, 0.0])
}

/// Products `a * b` nodewise.
fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

fn deriv(f: &[f64], axis: usize, sbp: &SbpOperator1D) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    apply_derivative_axis(f, 1, axis, sbp, &mut out);
    out
}

/// Jacobian and contravariant metric terms from nodal coordinates.
///
/// The metric is assembled in curl form, so `sum_xi D_xi(J xi_x) = 0` holds
/// to round-off. `J` is the triple product of the covariant derivatives.
pub fn compute_metrics(coords: &[Vec3], sbp: &SbpOperator1D) -> Result<(Vec<f64>, Vec<Mat3>)> {
    let nn = sbp.volume_len();
    assert_eq!(coords.len(), nn, "coordinate shape mismatch");
    let x: [Vec<f64>; 3] = std::array::from_fn(|c| coords.iter().map(|p| p[c]).collect());
    // dx[c][axis]
    let dx: [[Vec<f64>; 3]; 3] =
        std::array::from_fn(|c| std::array::from_fn(|a| deriv(&x[c], a, sbp)));
    let mut jac = vec![0.0; nn];
    for p in 0..nn {
        let g = |c: usize, a: usize| dx[c][a][p];
        jac[p] = g(0, 0) * (g(1, 1) * g(2, 2) - g(1, 2) * g(2, 1))
            - g(0, 1) * (g(1, 0) * g(2, 2) - g(1, 2) * g(2, 0))
            + g(0, 2) * (g(1, 0) * g(2, 1) - g(1, 1) * g(2, 0));
    }
    let mut metric = vec![[[0.0; 3]; 3]; nn];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        for comp in 0..3 {
            let (m, l) = ((comp + 1) % 3, (comp + 2) % 3);
            let t1 = deriv(&mul(&x[l], &dx[m][j]), k, sbp);
            let t2 = deriv(&mul(&x[l], &dx[m][k]), j, sbp);
            let t3 = deriv(&mul(&x[m], &dx[l][k]), j, sbp);
            let t4 = deriv(&mul(&x[m], &dx[l][j]), k, sbp);
            for p in 0..nn {
                metric[p][i][comp] = 0.5 * ((t1[p] - t2[p]) + (t3[p] - t4[p]));
            }
        }
    }
    Ok((jac, metric))
}

/// Max over nodes and components of `|sum_xi D_xi(J xi_n)|`.
pub fn metric_identity_residual(g: &ElementGeometry, sbp: &SbpOperator1D) -> f64 {
    let nn = sbp.volume_len();
    let mut worst: f64 = 0.0;
    for comp in 0..3 {
        let mut acc = vec![0.0; nn];
        for axis in 0..3 {
            let f: Vec<f64> = g.metric.iter().map(|m| m[axis][comp]).collect();
            let d = deriv(&f, axis, sbp);
            acc.iter_mut().zip(&d).for_each(|(a, b)| *a += b);
        }
        worst = acc.iter().fold(worst, |w, v| w.max(v.abs()));
    }
    worst
}

impl ElementGeometry {
    /// Geometry from nodal coordinates ordered as in [`crate::specops`].
    pub fn from_coords(coords: Vec<Vec3>, sbp: &SbpOperator1D) -> Result<Self> {
        let n = sbp.n();
        let (jac, metric) = compute_metrics(&coords, sbp)?;
        if let Some((p, j)) = jac
            .iter()
            .enumerate()
            .find(|(_, j)| !(**j > 0.0 && j.is_finite()))
        {
            return Err(Error::Mesh(format!(
                "non-positive Jacobian {j:e} at node {p} ({:.6e}, {:.6e}, {:.6e})",
                coords[p][0], coords[p][1], coords[p][2]
            )));
        }
        let faces = std::array::from_fn(|f| face_geometry(&coords, &metric, f / 2, f % 2 == 1, sbp));
        for (f, face) in faces.iter().enumerate() {
            if face.scale.iter().any(|s| !(*s > 0.0)) {
                return Err(Error::Mesh(format!("degenerate surface scaling on face {f}")));
            }
        }
        Ok(ElementGeometry {
            n,
            coords,
            jac,
            metric,
            faces,
        })
    }

    /// Geometry of the image of a mapping of the reference cube.
    pub fn from_mapping<F: Fn(f64, f64, f64) -> Vec3>(map: F, sbp: &SbpOperator1D) -> Result<Self> {
        let n = sbp.n();
        let x = sbp.nodes();
        let mut coords = vec![[0.0; 3]; n * n * n];
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    coords[node_index(n, i, j, k)] = map(x[i], x[j], x[k]);
                }
            }
        }
        Self::from_coords(coords, sbp)
    }

    pub fn face(&self, axis: usize, upper: bool) -> &FaceGeometry {
        &self.faces[2 * axis + upper as usize]
    }

    pub fn centroid(&self) -> Vec3 {
        let n = self.coords.len() as f64;
        let mut c = [0.0; 3];
        for p in &self.coords {
            for d in 0..3 {
                c[d] += p[d] / n;
            }
        }
        c
    }

    /// Largest metric magnitude, used as the scale of round-off residuals.
    pub fn metric_scale(&self) -> f64 {
        self.metric
            .iter()
            .flat_map(|m| m.iter().flatten())
            .fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

fn face_geometry(
    coords: &[Vec3],
    metric: &[Mat3],
    axis: usize,
    upper: bool,
    sbp: &SbpOperator1D,
) -> FaceGeometry {
    let n = sbp.n();
    let nf = n * n;
    let stride = crate::specops::axis_stride(n, axis);
    let e = sbp.e(upper);
    let mut face = FaceGeometry {
        coords: vec![[0.0; 3]; nf],
        normal: vec![[0.0; 3]; nf],
        scale: vec![0.0; nf],
        rotation: vec![[[0.0; 3]; 3]; nf],
    };
    for b in 0..n {
        for a in 0..n {
            let base = face_line_base(n, axis, a, b);
            let mut x = [0.0; 3];
            let mut row = [0.0; 3];
            if sbp.rule.kind == NodeKind::Gll {
                let p = base + if upper { (n - 1) * stride } else { 0 };
                x = coords[p];
                row = metric[p][axis];
            } else {
                for m in 0..n {
                    let p = base + m * stride;
                    for d in 0..3 {
                        x[d] += e[m] * coords[p][d];
                        row[d] += e[m] * metric[p][axis][d];
                    }
                }
            }
            let s = (row[0] * row[0] + row[1] * row[1] + row[2] * row[2]).sqrt();
            let nrm = [row[0] / s, row[1] / s, row[2] / s];
            let f = a + n * b;
            face.coords[f] = x;
            face.normal[f] = nrm;
            face.scale[f] = s;
            face.rotation[f] = default_frame(nrm);
        }
    }
    face
}

/// Elevation samples on a regular `nx x nz` grid with bilinear interpolation.
/// The grid starts at the domain's `(x_min, z_min)` corner.
#[derive(Debug, Clone, PartialEq)]
pub struct TopographySurface {
    pub nx: usize,
    pub nz: usize,
    pub spacing: f64,
    pub elevation: Vec<f64>,
}

impl TopographySurface {
    pub fn flat(nx: usize, nz: usize, spacing: f64) -> Self {
        TopographySurface {
            nx,
            nz,
            spacing,
            elevation: vec![0.0; nx * nz],
        }
    }

    /// Elevation at offsets `(x, z)` from the grid origin; clamps outside.
    pub fn elevation_at(&self, x: f64, z: f64) -> f64 {
        let locate = |t: f64, count: usize| -> (usize, f64) {
            if count == 1 {
                return (0, 0.0);
            }
            let u = (t / self.spacing).clamp(0.0, (count - 1) as f64);
            let i = (u.floor() as usize).min(count - 2);
            (i, u - i as f64)
        };
        let (i, fx) = locate(x, self.nx);
        let (k, fz) = locate(z, self.nz);
        let at = |i: usize, k: usize| {
            self.elevation[i.min(self.nx - 1) + self.nx * k.min(self.nz - 1)]
        };
        let (i1, k1) = (i + 1, k + 1);
        (1.0 - fx) * (1.0 - fz) * at(i, k)
            + fx * (1.0 - fz) * at(i1, k)
            + (1.0 - fx) * fz * at(i, k1)
            + fx * fz * at(i1, k1)
    }
}

/// Reads `nx nz spacing` followed by `nx * nz` elevations, x fastest.
pub fn ingest_topography<R: BufRead>(reader: R) -> Result<TopographySurface> {
    let mut header: Option<(usize, usize, f64)> = None;
    let mut values = Vec::new();
    let mut last_line = 0;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        last_line = lineno;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if header.is_none() {
            let parts: Vec<&str> = content.split_whitespace().collect();
            let bad = || Error::Parse {
                line: lineno,
                msg: format!("expected header 'nx nz spacing', got '{content}'"),
            };
            if parts.len() != 3 {
                return Err(bad());
            }
            let nx: usize = parts[0].parse().map_err(|_| bad())?;
            let nz: usize = parts[1].parse().map_err(|_| bad())?;
            let sp: f64 = parts[2].parse().map_err(|_| bad())?;
            if nx == 0 || nz == 0 || !(sp > 0.0 && sp.is_finite()) {
                return Err(bad());
            }
            header = Some((nx, nz, sp));
            continue;
        }
        for tok in content.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("invalid elevation '{tok}'"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("non-finite elevation '{tok}'"),
                });
            }
            values.push(v);
        }
    }
    let (nx, nz, spacing) = header.ok_or(Error::Parse {
        line: last_line.max(1),
        msg: "missing header".into(),
    })?;
    if values.len() != nx * nz {
        return Err(Error::Parse {
            line: last_line.max(1),
            msg: format!("expected {} elevations, found {}", nx * nz, values.len()),
        });
    }
    Ok(TopographySurface {
        nx,
        nz,
        spacing,
        elevation: values,
    })
}

pub type SurfaceFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Shape of the top surface.
#[derive(Clone, Default)]
pub enum Topography {
    #[default]
    Flat,
    Grid(TopographySurface),
    /// Elevation as a function of absolute `(x, z)`.
    Function(SurfaceFn),
}

impl std::fmt::Debug for Topography {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Topography::Flat => write!(f, "Flat"),
            Topography::Grid(g) => write!(f, "Grid({}x{}, {} m)", g.nx, g.nz, g.spacing),
            Topography::Function(_) => write!(f, "Function"),
        }
    }
}

/// Axis-aligned box `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub min: Vec3,
    pub max: Vec3,
}

impl Domain {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self> {
        for d in 0..3 {
            if !(max[d] > min[d]) || !min[d].is_finite() || !max[d].is_finite() {
                return Err(Error::Config(format!(
                    "domain axis {d} is degenerate: [{}, {}]",
                    min[d], max[d]
                )));
            }
        }
        Ok(Domain { min, max })
    }

    pub fn unit() -> Self {
        Domain {
            min: [0.0; 3],
            max: [1.0; 3],
        }
    }

    pub fn diameter(&self) -> f64 {
        (0..3)
            .map(|d| (self.max[d] - self.min[d]).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Bounds of one element of the structured grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellBounds {
    pub x: [f64; 2],
    /// Vertical stretch parameter range inside `[0, 1]`.
    pub eta: [f64; 2],
    pub z: [f64; 2],
    pub y_min: f64,
    pub y_max: f64,
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    (1.0 - t) * a + t * b
}

/// Element mapping: affine in `x` and `z`, vertical shear in `y` towards a
/// top surface `y_max + h(x, z)`.
pub fn build_mapping(
    cell: &CellBounds,
    top: &dyn Fn(f64, f64) -> f64,
    sbp: &SbpOperator1D,
) -> Result<ElementGeometry> {
    let c = *cell;
    ElementGeometry::from_mapping(
        |q, r, s| {
            let x = lerp(c.x[0], c.x[1], q);
            let z = lerp(c.z[0], c.z[1], s);
            let eta = lerp(c.eta[0], c.eta[1], r);
            let y = c.y_min + eta * (c.y_max - c.y_min + top(x, z));
            [x, y, z]
        },
        sbp,
    )
}

/// What happens at a face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaceLink {
    Boundary(BoundaryTreatment),
    /// Internal face shared with `neighbor`. `minus` is true when this
    /// element owns the face as its upper face.
    Interior { neighbor: usize, minus: bool },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryTreatment {
    Riemann(BoundarySpec),
    /// Hat equals trace; used to isolate volume terms in verification.
    ExactTrace,
}

/// Condition on one of the six sides of the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainBoundary {
    Condition(BoundaryTreatment),
    Periodic,
}

impl DomainBoundary {
    pub fn free_surface() -> Self {
        DomainBoundary::Condition(BoundaryTreatment::Riemann(BoundarySpec::free_surface()))
    }

    pub fn absorbing() -> Self {
        DomainBoundary::Condition(BoundaryTreatment::Riemann(BoundarySpec::absorbing()))
    }

    pub fn clamped() -> Self {
        DomainBoundary::Condition(BoundaryTreatment::Riemann(BoundarySpec::clamped()))
    }
}

#[derive(Debug, Clone)]
pub struct MeshSpec {
    pub dims: [usize; 3],
    pub domain: Domain,
    pub topography: Topography,
    /// Sides in face order: x_min, x_max, y_min, y_max, z_min, z_max.
    pub boundaries: [DomainBoundary; 6],
}

impl MeshSpec {
    pub fn cube(dims: [usize; 3], domain: Domain, bc: DomainBoundary) -> Self {
        MeshSpec {
            dims,
            domain,
            topography: Topography::Flat,
            boundaries: [bc; 6],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub dims: [usize; 3],
    pub domain: Domain,
    pub elements: Vec<ElementGeometry>,
    pub materials: Vec<Material>,
    pub links: Vec<[FaceLink; 6]>,
    pub sbp: SbpOperator1D,
}

impl Mesh {
    /// Builds a structured mesh. `material` is evaluated at each element's
    /// centroid.
    pub fn build(
        spec: &MeshSpec,
        sbp: SbpOperator1D,
        material: &dyn Fn(Vec3) -> Material,
    ) -> Result<Self> {
        let [nx, ny, nz] = spec.dims;
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::Config("mesh dimensions must be positive".into()));
        }
        for axis in 0..3 {
            let lo = matches!(spec.boundaries[2 * axis], DomainBoundary::Periodic);
            let hi = matches!(spec.boundaries[2 * axis + 1], DomainBoundary::Periodic);
            if lo != hi {
                return Err(Error::Config(format!(
                    "periodic boundary on axis {axis} must be set on both sides"
                )));
            }
        }
        if matches!(spec.boundaries[2], DomainBoundary::Periodic)
            && !matches!(spec.topography, Topography::Flat)
        {
            return Err(Error::Config("vertical periodicity requires a flat top".into()));
        }
        let d = spec.domain;
        let lines = |a: f64, b: f64, count: usize| -> Vec<f64> {
            (0..=count).map(|i| lerp(a, b, i as f64 / count as f64)).collect()
        };
        let xs = lines(d.min[0], d.max[0], nx);
        let zs = lines(d.min[2], d.max[2], nz);
        let etas = lines(0.0, 1.0, ny);
        let origin = (d.min[0], d.min[2]);
        let top: Box<dyn Fn(f64, f64) -> f64> = match &spec.topography {
            Topography::Flat => Box::new(|_, _| 0.0),
            Topography::Grid(g) => {
                let g = g.clone();
                Box::new(move |x, z| g.elevation_at(x - origin.0, z - origin.1))
            }
            Topography::Function(f) => {
                let f = f.clone();
                Box::new(move |x, z| f(x, z))
            }
        };
        let ne = nx * ny * nz;
        let mut elements = Vec::with_capacity(ne);
        let mut materials = Vec::with_capacity(ne);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let cell = CellBounds {
                        x: [xs[i], xs[i + 1]],
                        eta: [etas[j], etas[j + 1]],
                        z: [zs[k], zs[k + 1]],
                        y_min: d.min[1],
                        y_max: d.max[1],
                    };
                    let eid = i + nx * (j + ny * k);
                    let g = build_mapping(&cell, &*top, &sbp).map_err(|e| match e {
                        Error::Mesh(m) => Error::Mesh(format!("element {eid} ({i}, {j}, {k}): {m}")),
                        other => other,
                    })?;
                    materials.push(material(g.centroid()));
                    elements.push(g);
                }
            }
        }
        let mut links = Vec::with_capacity(ne);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let idx = [i, j, k];
                    let l: [FaceLink; 6] = std::array::from_fn(|f| {
                        let axis = f / 2;
                        let upper = f % 2 == 1;
                        let count = spec.dims[axis];
                        let at_edge = if upper { idx[axis] + 1 == count } else { idx[axis] == 0 };
                        let mut nb = idx;
                        if at_edge {
                            match spec.boundaries[f] {
                                DomainBoundary::Condition(t) => return FaceLink::Boundary(t),
                                DomainBoundary::Periodic => {
                                    nb[axis] = if upper { 0 } else { count - 1 };
                                }
                            }
                        } else if upper {
                            nb[axis] += 1;
                        } else {
                            nb[axis] -= 1;
                        }
                        FaceLink::Interior {
                            neighbor: nb[0] + nx * (nb[1] + ny * nb[2]),
                            minus: upper,
                        }
                    });
                    links.push(l);
                }
            }
        }
        Ok(Mesh {
            dims: spec.dims,
            domain: spec.domain,
            elements,
            materials,
            links,
            sbp,
        })
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn nodes_per_element(&self) -> usize {
        self.sbp.volume_len()
    }

    pub fn degree(&self) -> usize {
        self.sbp.degree()
    }

    pub fn element_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn min_jacobian(&self) -> f64 {
        self.elements
            .iter()
            .flat_map(|e| e.jac.iter().cloned())
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest mismatch of shared face-node coordinates across non-periodic
    /// internal faces, and largest `|n_minus + n_plus_outward|` mismatch of
    /// unit normals.
    pub fn conformity(&self) -> (f64, f64) {
        let mut dx: f64 = 0.0;
        let mut dn: f64 = 0.0;
        for (e, links) in self.links.iter().enumerate() {
            for f in (1..6).step_by(2) {
                if let FaceLink::Interior { neighbor, .. } = links[f] {
                    let a = &self.elements[e].faces[f];
                    let b = &self.elements[neighbor].faces[f - 1];
                    let periodic = {
                        let axis = f / 2;
                        let ie = self.grid_coords(e)[axis];
                        ie + 1 == self.dims[axis]
                    };
                    for p in 0..a.coords.len() {
                        if !periodic {
                            for d in 0..3 {
                                dx = dx.max((a.coords[p][d] - b.coords[p][d]).abs());
                            }
                        }
                        for d in 0..3 {
                            // outward normal of the plus side is -b.normal
                            dn = dn.max((a.normal[p][d] - b.normal[p][d]).abs());
                        }
                    }
                }
            }
        }
        (dx, dn)
    }

    pub fn grid_coords(&self, e: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [e % nx, (e / nx) % ny, e / (nx * ny)]
    }

    /// Smallest element edge length along any grid axis, measured between
    /// element corner nodes.
    pub fn min_edge_length(&self) -> f64 {
        let n = self.sbp.n();
        let mut best = f64::INFINITY;
        for g in &self.elements {
            for axis in 0..3 {
                for b in [0, n - 1] {
                    for a in [0, n - 1] {
                        let base = face_line_base(n, axis, a, b);
                        let stride = crate::specops::axis_stride(n, axis);
                        let p0 = g.coords[base];
                        let p1 = g.coords[base + (n - 1) * stride];
                        let len = (0..3).map(|d| (p1[d] - p0[d]).powi(2)).sum::<f64>().sqrt();
                        best = best.min(len);
                    }
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::isotropic_from_speeds;
    use proptest::prelude::*;

    fn sbp(p: usize) -> SbpOperator1D {
        SbpOperator1D::new(NodeKind::Gll, p).unwrap()
    }

    fn unit_material(_: Vec3) -> Material {
        isotropic_from_speeds(1.0, 2.0, 1.0).unwrap()
    }

    #[test]
    fn identity_map() {
        let op = sbp(3);
        let g = ElementGeometry::from_mapping(|q, r, s| [q, r, s], &op).unwrap();
        for p in 0..g.coords.len() {
            assert!((g.jac[p] - 1.0).abs() < 1e-13);
            for i in 0..3 {
                for c in 0..3 {
                    let id = if i == c { 1.0 } else { 0.0 };
                    assert!((g.metric[p][i][c] - id).abs() < 1e-13);
                }
            }
        }
        let (i, j, k) = crate::specops::node_coords(4, 37);
        assert_eq!(g.coords[37], [op.nodes()[i], op.nodes()[j], op.nodes()[k]]);
    }

    #[test]
    fn affine_stretch() {
        let op = sbp(2);
        let g = ElementGeometry::from_mapping(|q, r, s| [2.0 * q, r, s], &op).unwrap();
        for p in 0..g.coords.len() {
            assert!((g.jac[p] - 2.0).abs() < 1e-13);
            assert!((g.metric[p][0][0] - 1.0).abs() < 1e-13);
            assert!((g.metric[p][1][1] - 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn rigid_rotation_metric_is_transpose() {
        let op = sbp(3);
        let (a, b) = (0.4f64, 1.1f64);
        // rotation about z by a, then about x by b
        let rz = [[a.cos(), -a.sin(), 0.0], [a.sin(), a.cos(), 0.0], [0.0, 0.0, 1.0]];
        let rx = [[1.0, 0.0, 0.0], [0.0, b.cos(), -b.sin()], [0.0, b.sin(), b.cos()]];
        let mut om = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                om[i][j] = (0..3).map(|k| rx[i][k] * rz[k][j]).sum();
            }
        }
        let g = ElementGeometry::from_mapping(
            |q, r, s| std::array::from_fn(|i| om[i][0] * q + om[i][1] * r + om[i][2] * s),
            &op,
        )
        .unwrap();
        for p in 0..g.coords.len() {
            assert!((g.jac[p] - 1.0).abs() < 1e-13);
            for i in 0..3 {
                for c in 0..3 {
                    assert!((g.metric[p][i][c] - om[c][i]).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn polynomial_map_metric_matches_closed_form() {
        let p = 4;
        let op = sbp(p);
        // x = q + 0.1 r^2, y = r + 0.1 s q, z = s + 0.05 q^2 (degree 2 <= P)
        let map = |q: f64, r: f64, s: f64| [q + 0.1 * r * r, r + 0.1 * s * q, s + 0.05 * q * q];
        let jacobian = |q: f64, r: f64, s: f64| -> [[f64; 3]; 3] {
            // d(x,y,z)/d(q,r,s)
            [[1.0, 0.2 * r, 0.0], [0.1 * s, 1.0, 0.1 * q], [0.1 * q, 0.0, 1.0]]
        };
        let g = ElementGeometry::from_mapping(map, &op).unwrap();
        let x = op.nodes();
        for kk in 0..=p {
            for jj in 0..=p {
                for ii in 0..=p {
                    let node = node_index(p + 1, ii, jj, kk);
                    let m = jacobian(x[ii], x[jj], x[kk]);
                    // cofactor matrix: J * d(xi)/d(x) = adj(m)
                    let cof = |r: usize, c: usize| {
                        let (r1, r2) = ((r + 1) % 3, (r + 2) % 3);
                        let (c1, c2) = ((c + 1) % 3, (c + 2) % 3);
                        m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]
                    };
                    let det: f64 = (0..3).map(|c| m[0][c] * cof(0, c)).sum();
                    assert!((g.jac[node] - det).abs() < 1e-12);
                    for i in 0..3 {
                        for c in 0..3 {
                            // J dxi_i/dx_c = cof(c, i)
                            assert!((g.metric[node][i][c] - cof(c, i)).abs() < 1e-12);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn fold_over_is_mesh_error() {
        let op = sbp(2);
        let err = ElementGeometry::from_mapping(|q, r, s| [-q, r, s], &op).unwrap_err();
        assert!(matches!(err, Error::Mesh(_)));
    }

    #[test]
    fn rotation_basis_examples() {
        let r = face_rotation_basis([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        assert_eq!(r, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let r = face_rotation_basis([0.0, 0.0, 1.0], [0.0, 1.0, 0.0]);
        assert_eq!(r, [[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]]);
        let r = default_frame([0.0, 1.0, 0.0]);
        assert_eq!(r[1], [0.0, 0.0, 1.0]);
    }

    proptest! {
        #[test]
        fn rotation_is_orthonormal(a in proptest::array::uniform3(-1.0..1.0f64)) {
            let len = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
            prop_assume!(len > 1e-3);
            let n = [a[0] / len, a[1] / len, a[2] / len];
            let r = default_frame(n);
            for i in 0..3 {
                for j in 0..3 {
                    let dot: f64 = (0..3).map(|k| r[i][k] * r[j][k]).sum();
                    let id = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((dot - id).abs() < 1e-14);
                }
            }
            let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
                - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
                + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
            prop_assert!((det - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn topography_ingest_and_bilinear() {
        let flat = ingest_topography("2 2 10.0\n0 0\n0 0\n".as_bytes()).unwrap();
        assert_eq!(flat.elevation_at(3.0, 7.0), 0.0);
        let hill = ingest_topography("2 2 10.0\n0 0 0 8\n".as_bytes()).unwrap();
        assert_eq!(hill.elevation_at(5.0, 5.0), 2.0);
        assert_eq!(hill.elevation_at(50.0, 50.0), 8.0);
        assert_eq!(hill.elevation_at(-5.0, -5.0), 0.0);
    }

    #[test]
    fn topography_errors_carry_line_numbers() {
        let e = ingest_topography("2 2\n0 0 0 0\n".as_bytes()).unwrap_err();
        assert_eq!(e, Error::Parse { line: 1, msg: "expected header 'nx nz spacing', got '2 2'".into() });
        let e = ingest_topography("2 2 1\n0 0\n0 x\n".as_bytes()).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }));
        let e = ingest_topography("2 2 1\n0 0\n0\n".as_bytes()).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }));
        let e = ingest_topography("1 1 1\ninf\n".as_bytes()).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
    }

    fn sine_mesh(p: usize, amp: f64) -> Mesh {
        let f: SurfaceFn = Arc::new(move |x, z| amp * (2.0 * std::f64::consts::PI * x).sin() * (std::f64::consts::PI * z).cos());
        let spec = MeshSpec {
            dims: [3, 3, 3],
            domain: Domain::unit(),
            topography: Topography::Function(f),
            boundaries: [DomainBoundary::free_surface(); 6],
        };
        Mesh::build(&spec, sbp(p), &unit_material).unwrap()
    }

    #[test]
    fn sinusoidal_top_metric_identity_and_watertight() {
        for p in 2..=5 {
            let mesh = sine_mesh(p, 0.1);
            for g in &mesh.elements {
                let res = metric_identity_residual(g, &mesh.sbp);
                assert!(res < 1e-11, "P={p}: {res:e}");
                assert!(g.jac.iter().all(|j| *j > 0.0));
                for f in &g.faces {
                    assert!(f.scale.iter().all(|s| *s > 0.0));
                }
            }
            let (dx, dn) = mesh.conformity();
            assert!(dx < 1e-9 * mesh.domain.diameter());
            assert!(dn < 1e-10);
        }
    }

    #[test]
    fn jacobian_varies_on_curved_mesh() {
        let mesh = sine_mesh(3, 0.1);
        let top = &mesh.elements[mesh.element_index(0, 2, 0)];
        let (lo, hi) = top.jac.iter().fold((f64::MAX, f64::MIN), |(a, b), j| (a.min(*j), b.max(*j)));
        assert!(hi - lo > 1e-3);
    }

    #[test]
    fn gaussian_hill_builds_when_resolved() {
        // hill width w = 0.5, amplitude 0.2 gives max slope ~0.49 < 1 (45 degrees)
        let hill: SurfaceFn = Arc::new(|x, z| {
            let r2 = (x - 1.0).powi(2) + (z - 1.0).powi(2);
            0.2 * (-r2 / (0.5f64 * 0.5)).exp()
        });
        let spec = MeshSpec {
            dims: [8, 2, 8],
            domain: Domain::new([0.0; 3], [2.0, 1.0, 2.0]).unwrap(),
            topography: Topography::Function(hill),
            boundaries: [DomainBoundary::absorbing(); 6],
        };
        let mesh = Mesh::build(&spec, sbp(3), &unit_material).unwrap();
        assert!(mesh.min_jacobian() > 0.0);
    }

    #[test]
    fn periodic_links_and_self_neighbor() {
        let spec = MeshSpec {
            dims: [1, 2, 1],
            domain: Domain::unit(),
            topography: Topography::Flat,
            boundaries: [
                DomainBoundary::Periodic,
                DomainBoundary::Periodic,
                DomainBoundary::free_surface(),
                DomainBoundary::free_surface(),
                DomainBoundary::absorbing(),
                DomainBoundary::absorbing(),
            ],
        };
        let mesh = Mesh::build(&spec, sbp(2), &unit_material).unwrap();
        assert_eq!(mesh.links[0][0], FaceLink::Interior { neighbor: 0, minus: false });
        assert_eq!(mesh.links[0][1], FaceLink::Interior { neighbor: 0, minus: true });
        assert_eq!(mesh.links[0][3], FaceLink::Interior { neighbor: 1, minus: true });
        assert_eq!(mesh.links[1][2], FaceLink::Interior { neighbor: 0, minus: false });
        assert!(matches!(mesh.links[1][3], FaceLink::Boundary(_)));
        let mut bad = spec.clone();
        bad.boundaries[1] = DomainBoundary::absorbing();
        assert!(matches!(Mesh::build(&bad, sbp(2), &unit_material), Err(Error::Config(_))));
    }

    #[test]
    fn gl_faces_extrapolate_geometry() {
        let op = SbpOperator1D::new(NodeKind::Gl, 3).unwrap();
        let g = ElementGeometry::from_mapping(|q, r, s| [q, r + 0.1 * q * q, s], &op).unwrap();
        let f = g.face(0, true);
        for (a, x) in f.coords.iter().enumerate() {
            assert!((x[0] - 1.0).abs() < 1e-12, "{a}");
        }
    }
}
