//! Executable property checks of the discretization.
//!
//! Each check measures one residual, compares it to a limit and reports the
//! outcome; nothing here panics on failure.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::{discrete_energy, error_norms, sample_state, tf_misfit, AccuracyClass, PlaneWave, WaveMode};
use crate::discretization::{conservative_flux, ncp_flux, Discretization, NVAR};
use crate::error::Result;
use crate::exec::Execution;
use crate::geometry::{
    BoundaryTreatment, Domain, DomainBoundary, ElementGeometry, Mesh, MeshSpec, Topography,
};
use crate::material::{apatite, isotropic_from_speeds, Material};
use crate::riemann::{
    boundary_hat, characteristics, interface_hat, BoundarySpec, LocalTrace, Side,
};
use crate::sources::TimeFunction;
use crate::specops::{apply_derivative_axis, NodeKind, SbpOperator1D};
use crate::timeint::{cfl_timestep, AderStepper, SplitOperator};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub measured: f64,
    pub limit: f64,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn below(name: &'static str, measured: f64, limit: f64, detail: String) -> Self {
        Check {
            name,
            measured,
            limit,
            passed: measured < limit,
            detail,
        }
    }

    fn at_least(name: &'static str, measured: f64, limit: f64, detail: String) -> Self {
        Check {
            name,
            measured,
            limit,
            passed: measured >= limit,
            detail,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: measured {:.3e}, limit {:.3e}; {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.limit,
            self.detail
        )
    }
}

/// `max |HD + (HD)^T - (e1 e1^T - e0 e0^T)|` over `P = 1..=8`, both node sets.
pub fn sbp_identity() -> Result<Check> {
    let mut worst: f64 = 0.0;
    for kind in [NodeKind::Gll, NodeKind::Gl] {
        for p in 1..=8 {
            worst = worst.max(SbpOperator1D::new(kind, p)?.sbp_residual());
        }
    }
    Ok(Check::below("sbp identity", worst, 1e-13, "P = 1..8, GLL and GL".into()))
}

fn random_trace(rng: &mut ChaCha8Rng) -> LocalTrace {
    let mut r3 = |lo: f64, hi: f64| -> [f64; 3] { std::array::from_fn(|_| rng.gen_range(lo..hi)) };
    LocalTrace {
        v: r3(-2.0, 2.0),
        t: r3(-5.0, 5.0),
        z: r3(0.2, 5.0),
    }
}

/// Boundary and interface identities of the hat-variables over random draws.
pub fn riemann_identities(draws: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut worst_consistency: f64 = 0.0;
    let mut sign_violations = 0usize;
    for i in 0..draws {
        let tr = random_trace(&mut rng);
        let gamma: [f64; 3] = match i % 4 {
            0 => [1.0, 0.0, -1.0],
            1 => [-1.0, 1.0, 0.0],
            _ => std::array::from_fn(|_| rng.gen_range(-1.0..=1.0)),
        };
        let spec = BoundarySpec::new(gamma).expect("|gamma| <= 1");
        for side in [Side::Lower, Side::Upper] {
            let hat = boundary_hat(&tr, &spec, side);
            for k in 0..3 {
                let (p, q) = characteristics(tr.v[k], tr.t[k], tr.z[k]);
                let (ph, qh) = characteristics(hat.v[k], hat.t[k], tr.z[k]);
                let scale = 1.0 + p.abs() + q.abs();
                let err = match side {
                    Side::Lower => (qh - q).abs(),
                    Side::Upper => (ph - p).abs(),
                };
                worst = worst.max(err / scale);
                // the residual boundary condition (1 - g) Z v = (1 + g) T at xi = 0, mirrored at xi = 1
                let g = gamma[k];
                let bc = match side {
                    Side::Lower => (1.0 - g) * tr.z[k] * hat.v[k] - (1.0 + g) * hat.t[k],
                    Side::Upper => (1.0 - g) * tr.z[k] * hat.v[k] + (1.0 + g) * hat.t[k],
                };
                worst = worst.max(bc.abs() / scale);
                let power = hat.t[k] * hat.v[k];
                let ok = match side {
                    Side::Lower => power >= -1e-12 * scale * scale,
                    Side::Upper => power <= 1e-12 * scale * scale,
                };
                if !ok {
                    sign_violations += 1;
                }
            }
        }
        let plus = random_trace(&mut rng);
        let hat = interface_hat(&tr, &plus);
        for k in 0..3 {
            let (pm, _) = characteristics(tr.v[k], tr.t[k], tr.z[k]);
            let (_, qp) = characteristics(plus.v[k], plus.t[k], plus.z[k]);
            let phi = hat.t[k];
            let v_minus = (2.0 * pm + phi) / tr.z[k];
            let v_plus = (2.0 * qp - phi) / plus.z[k];
            let scale = 1.0 + pm.abs() + qp.abs();
            worst = worst.max((phi * (v_plus - v_minus)).abs() / (scale * scale));
            let (ph_p, _) = characteristics(hat.v[k], phi, plus.z[k]);
            let (_, qh_m) = characteristics(hat.v[k], phi, tr.z[k]);
            let id_plus = plus.z[k] * phi * hat.v[k] - (qp * qp - ph_p * ph_p);
            let id_minus = -tr.z[k] * phi * hat.v[k] - (pm * pm - qh_m * qh_m);
            worst = worst.max(id_plus.abs().max(id_minus.abs()) / (scale * scale));
        }
        let same = LocalTrace { z: plus.z, ..tr };
        let cont = interface_hat(&tr, &same);
        for k in 0..3 {
            let e = (cont.v[k] - tr.v[k]).abs().max((cont.t[k] - tr.t[k]).abs());
            worst_consistency = worst_consistency.max(e / (1.0 + tr.v[k].abs() + tr.t[k].abs()));
        }
    }
    let measured = if sign_violations > 0 { f64::INFINITY } else { worst };
    let mut c = Check::below(
        "riemann identities",
        measured,
        1e-12,
        format!(
            "{draws} draws; interface consistency {worst_consistency:.2e} (limit 1e-13); {sign_violations} power sign violations"
        ),
    );
    c.passed &= worst_consistency < 1e-13;
    c
}

fn perturbed_element(p: usize, seed: u64) -> Result<(ElementGeometry, SbpOperator1D)> {
    let sbp = SbpOperator1D::new(NodeKind::Gll, p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: [[f64; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| rng.gen_range(-0.06..0.06)));
    let g = ElementGeometry::from_mapping(
        |q, r, s| {
            let b = [
                (std::f64::consts::PI * r).sin() * (2.0 * s).cos(),
                (std::f64::consts::PI * s).sin() * (1.5 * q).cos(),
                (std::f64::consts::PI * q).sin() * (r + s).cos(),
            ];
            [
                q + a[0][0] * b[0] + a[0][1] * b[1] + a[0][2] * b[2],
                1.3 * r + a[1][0] * b[0] + a[1][1] * b[1] + a[1][2] * b[2],
                0.8 * s + a[2][0] * b[0] + a[2][1] * b[1] + a[2][2] * b[2],
            ]
        },
        &sbp,
    )?;
    Ok((g, sbp))
}

/// Per axis: the split volume terms satisfy
/// `sum h Q^T (D F(Q) + B(D Q)) = [v^T F_v]` face terms, and the pointwise
/// cancellation `Q^T B(D Q) - (D Q)^T F(Q) = 0`.
pub fn antisymmetry(seed: u64) -> Result<Check> {
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in 2..=6 {
        let (g, sbp) = perturbed_element(p, seed + p as u64)?;
        let n = sbp.n();
        let nn = sbp.volume_len();
        let h = sbp.weights();
        let w: Vec<f64> = (0..nn)
            .map(|i| {
                let (a, b, c) = crate::specops::node_coords(n, i);
                h[a] * h[b] * h[c]
            })
            .collect();
        let q: Vec<f64> = (0..nn * NVAR).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for axis in 0..3 {
            let mut f = vec![0.0; nn * NVAR];
            for i in 0..nn {
                f[i * NVAR..(i + 1) * NVAR].copy_from_slice(&conservative_flux(&q[i * NVAR..(i + 1) * NVAR], &g.metric[i][axis]));
            }
            let mut df = vec![0.0; nn * NVAR];
            let mut dq = vec![0.0; nn * NVAR];
            apply_derivative_axis(&f, NVAR, axis, &sbp, &mut df);
            apply_derivative_axis(&q, NVAR, axis, &sbp, &mut dq);
            let (mut volume, mut cancel, mut scale) = (0.0, 0.0, 0.0);
            for i in 0..nn {
                let qi = &q[i * NVAR..(i + 1) * NVAR];
                let dqi = &dq[i * NVAR..(i + 1) * NVAR];
                let b = ncp_flux(&[dqi[0], dqi[1], dqi[2]], &g.metric[i][axis]);
                let fi = &f[i * NVAR..(i + 1) * NVAR];
                let qb: f64 = (0..NVAR).map(|c| qi[c] * b[c]).sum();
                let qdf: f64 = (0..NVAR).map(|c| qi[c] * df[i * NVAR + c]).sum();
                let dqf: f64 = (0..NVAR).map(|c| dqi[c] * fi[c]).sum();
                volume += w[i] * (qdf + qb);
                cancel += w[i] * (qb - dqf);
                scale += w[i] * (qdf.abs() + qb.abs());
            }
            // face term with the SBP boundary vectors
            let stride = crate::specops::axis_stride(n, axis);
            let mut face = 0.0;
            for bb in 0..n {
                for aa in 0..n {
                    let base = crate::specops::face_line_base(n, axis, aa, bb);
                    let (wa, wb) = (h[aa], h[bb]);
                    for (upper, sign) in [(true, 1.0), (false, -1.0)] {
                        let e = sbp.e(upper);
                        let mut qv = [0.0; NVAR];
                        let mut fv = [0.0; NVAR];
                        for m in 0..n {
                            let node = base + m * stride;
                            for c in 0..NVAR {
                                qv[c] += e[m] * q[node * NVAR + c];
                                fv[c] += e[m] * f[node * NVAR + c];
                            }
                        }
                        face += sign * wa * wb * (0..NVAR).map(|c| qv[c] * fv[c]).sum::<f64>();
                    }
                }
            }
            worst = worst.max((volume - face).abs() / scale).max(cancel.abs() / scale);
        }
    }
    Ok(Check::below(
        "discrete anti-symmetry",
        worst,
        1e-11,
        "random curved element, P = 2..6, residual relative to the volume quadratic form".into(),
    ))
}

fn topography_mesh(p: usize, boundaries: [DomainBoundary; 6], material: &dyn Fn([f64; 3]) -> Material) -> Result<Mesh> {
    let hill = Topography::Function(std::sync::Arc::new(|x: f64, z: f64| {
        0.15 * (-(((x - 0.5).powi(2) + (z - 0.4).powi(2)) / 0.08)).exp() + 0.03 * (5.0 * x).sin() * (4.0 * z).cos()
    }));
    let spec = MeshSpec {
        dims: [3, 3, 3],
        domain: Domain::unit(),
        topography: hill,
        boundaries,
    };
    Mesh::build(&spec, SbpOperator1D::new(NodeKind::Gll, p)?, material)
}

/// Constant states on a curved topography mesh are steady.
pub fn free_stream() -> Result<Check> {
    let mut worst: f64 = 0.0;
    let exact = [DomainBoundary::Condition(BoundaryTreatment::ExactTrace); 6];
    for p in 3..=5 {
        let mesh = topography_mesh(p, exact, &|_| isotropic_from_speeds(1.5, 2.0, 1.0).expect("valid medium"))?;
        let mut scale: f64 = 0.0;
        for (g, m) in mesh.elements.iter().zip(&mesh.materials) {
            let jmin = g.jac.iter().cloned().fold(f64::INFINITY, f64::min);
            let cmax = m.stiffness().iter().flatten().fold(1.0 / m.rho, |a, v| a.max(v.abs()));
            scale = scale.max(g.metric_scale() / jmin * cmax);
        }
        let d = Discretization::new(mesh, Execution::Serial);
        let c: [f64; 9] = [0.3, -1.2, 0.7, 2.0, -0.5, 1.1, 0.4, -0.9, 0.6];
        let qmax = c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let q = sample_state(&d, &|_| c);
        let mut out = d.zero_state();
        d.rhs(&q, &mut out);
        let r = out.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        worst = worst.max(r / (scale * qmax));
    }
    Ok(Check::below(
        "free-stream preservation",
        worst,
        1e-11,
        "3x3x3 topography mesh, P = 3..5, |dQ/dt| over metric * stiffness * |Q|".into(),
    ))
}

fn random_state(d: &Discretization, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..d.state_len()).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Outcome of one closed-configuration energy run.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyRun {
    pub label: &'static str,
    pub steps: usize,
    pub e0: f64,
    pub e_end: f64,
    /// Largest `E_{k+1} / E_k - 1`.
    pub max_growth: f64,
}

/// 1000-step ADER runs at CFL 0.9 on a 3x3x3 mesh: all free surface, all
/// absorbing, and mixed boundaries with an internal material contrast.
pub fn energy_runs(degree: usize, steps: usize, cfl: f64) -> Result<Vec<EnergyRun>> {
    let uniform = |_: [f64; 3]| isotropic_from_speeds(1.0, 2.0, 1.0).expect("valid medium");
    let layered = |x: [f64; 3]| {
        if x[1] > 2.0 / 3.0 {
            isotropic_from_speeds(1.0, 2.0, 1.0).expect("valid medium")
        } else {
            isotropic_from_speeds(2.5, 3.5, 1.9).expect("valid medium")
        }
    };
    let mut mixed = [DomainBoundary::absorbing(); 6];
    mixed[3] = DomainBoundary::free_surface();
    mixed[2] = DomainBoundary::clamped();
    mixed[4] = DomainBoundary::Condition(BoundaryTreatment::Riemann(BoundarySpec::new([0.5, -0.3, 0.8])?));
    type Case<'a> = (&'static str, [DomainBoundary; 6], &'a dyn Fn([f64; 3]) -> Material);
    let cases: [Case<'_>; 3] = [
        ("free surface", [DomainBoundary::free_surface(); 6], &uniform),
        ("absorbing", [DomainBoundary::absorbing(); 6], &uniform),
        ("mixed + interface", mixed, &layered),
    ];
    let mut out = Vec::new();
    for (i, (label, bc, mat)) in cases.into_iter().enumerate() {
        let mesh = topography_mesh(degree, bc, mat)?;
        let d = Discretization::new(mesh, Execution::default());
        let dt = cfl_timestep(&d, cfl)?;
        let mut q = random_state(&d, 40 + i as u64);
        let mut st = AderStepper::new(q.len(), degree);
        let e0 = discrete_energy(&q, &d);
        let mut prev = e0;
        let mut max_growth = f64::NEG_INFINITY;
        for _ in 0..steps {
            st.step(&d, &mut q, dt);
            let e = discrete_energy(&q, &d);
            if !e.is_finite() {
                max_growth = f64::INFINITY;
                prev = e;
                break;
            }
            max_growth = max_growth.max(e / prev - 1.0);
            prev = e;
        }
        out.push(EnergyRun {
            label,
            steps,
            e0,
            e_end: prev,
            max_growth,
        });
    }
    Ok(out)
}

pub fn energy_stability(degree: usize, steps: usize) -> Result<Check> {
    let runs = energy_runs(degree, steps, 0.9)?;
    let worst = runs.iter().map(|r| r.max_growth).fold(f64::NEG_INFINITY, f64::max);
    let decayed = runs[1].e_end < runs[1].e0;
    let mut c = Check::below(
        "energy stability",
        worst,
        1e-12,
        format!(
            "P = {degree}, {steps} steps at CFL 0.9 on a curved 3x3x3 mesh; {}; absorbing E_end/E0 = {:.3e}",
            runs.iter()
                .map(|r| format!("{} growth {:.2e}", r.label, r.max_growth))
                .collect::<Vec<_>>()
                .join(", "),
            runs[1].e_end / runs[1].e0
        ),
    );
    c.passed &= decayed;
    Ok(c)
}

/// L2 errors of a diagonal plane wave on fully periodic `N x N x 1` meshes.
pub fn plane_wave_errors(degree: usize, levels: &[usize], cfl: f64, t_end: f64) -> Result<Vec<f64>> {
    let mat = isotropic_from_speeds(1.0, 2.0, 1.0)?;
    let k = 2.0 * std::f64::consts::PI * 2f64.sqrt();
    let s = PlaneWave::new(&mat, WaveMode::S, [1.0, 1.0, 0.0], [0.0, 0.0, 1.0], k)?;
    let pw = PlaneWave::new(&mat, WaveMode::P, [1.0, 1.0, 0.0], [0.0, 0.0, 1.0], k)?.with_phase(0.7);
    let exact = move |x: [f64; 3], t: f64| -> [f64; 9] {
        let (a, b) = (s.eval(x, t), pw.eval(x, t));
        std::array::from_fn(|i| a[i] + b[i])
    };
    let mut errs = Vec::new();
    for &n in levels {
        let spec = MeshSpec {
            dims: [n, n, 1],
            domain: Domain::unit(),
            topography: Topography::Flat,
            boundaries: [DomainBoundary::Periodic; 6],
        };
        let m = mat.clone();
        let mesh = Mesh::build(&spec, SbpOperator1D::new(NodeKind::Gll, degree)?, &move |_| m.clone())?;
        let d = Discretization::new(mesh, Execution::default());
        let steps = (t_end / cfl_timestep(&d, cfl)?).ceil() as usize;
        let dt = t_end / steps as f64;
        let mut q = sample_state(&d, &|x| exact(x, 0.0));
        let mut st = AderStepper::new(q.len(), degree);
        for _ in 0..steps {
            st.step(&d, &mut q, dt);
        }
        errs.push(error_norms(&q, &d, &|x| exact(x, t_end)).l2);
    }
    Ok(errs)
}

/// Least-squares slope of `log e` against `log(1/h)`.
pub fn convergence_slope(levels: &[usize], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = levels.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| -e.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

/// Largest stable Courant number used for the convergence study.
pub fn convergence_cfl(degree: usize) -> f64 {
    if degree <= 3 {
        0.9
    } else {
        0.5
    }
}

pub fn convergence(degree: usize, levels: &[usize]) -> Result<Check> {
    let errs = plane_wave_errors(degree, levels, convergence_cfl(degree), 0.5)?;
    let slope = convergence_slope(levels, &errs);
    Ok(Check::at_least(
        "plane-wave convergence",
        slope,
        degree as f64 + 0.5,
        format!(
            "P = {degree}, N = {levels:?}, CFL {}, L2 errors {}",
            convergence_cfl(degree),
            errs.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(", ")
        ),
    ))
}

/// Apatite axis speeds against the reference values.
pub fn anisotropic_wavespeeds() -> Check {
    let ws = apatite().wavespeeds();
    let got = [ws.cp[0], ws.cp[2], ws.csh[0]];
    let want = [7235.0, 6624.0, 4559.0];
    let worst = got.iter().zip(&want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
    Check::below(
        "anisotropic wavespeeds",
        worst,
        1.0,
        format!("c_px = {:.2}, c_pz = {:.2}, c_shx = {:.2} m/s", got[0], got[1], got[2]),
    )
}

/// Envelope/phase misfit on synthetic Ricker pairs: identical traces, a 5%
/// amplitude scaling and one pair per accuracy class.
pub fn misfit_metrics() -> Result<Check> {
    let dt = 0.01;
    let tf = TimeFunction::Ricker { f0: 1.0, t0: 3.0 };
    let r: Vec<f64> = (0..800).map(|i| tf.eval(i as f64 * dt)).collect();
    let band = (0.13, 5.0);
    let same = tf_misfit(&r, &r, dt, band)?;
    let scaled: Vec<f64> = r.iter().map(|v| 1.05 * v).collect();
    let m = tf_misfit(&scaled, &r, dt, band)?;
    let mut classes_ok = same.class == AccuracyClass::A;
    for (s, class) in [
        (1.03, AccuracyClass::A),
        (1.08, AccuracyClass::B),
        (1.15, AccuracyClass::C),
        (1.30, AccuracyClass::Poor),
    ] {
        let sig: Vec<f64> = r.iter().map(|v| s * v).collect();
        classes_ok &= tf_misfit(&sig, &r, dt, band)?.class == class;
    }
    let mut c = Check::below(
        "misfit metrics",
        (m.em - 0.05).abs(),
        0.005,
        format!(
            "identical EM = {:.1e} PM = {:.1e}; 5% scaling EM = {:.5} PM = {:.1e}; classes {}",
            same.em,
            same.pm,
            m.em,
            m.pm,
            if classes_ok { "ok" } else { "wrong" }
        ),
    );
    c.passed &= same.em == 0.0 && same.pm == 0.0 && m.pm < 0.01 && classes_ok;
    Ok(c)
}

/// Dense linear surrogate `dQ/dt = (D + F) Q`.
pub struct LinearSurrogate {
    pub d: DMatrix<f64>,
    pub f: DMatrix<f64>,
}

impl LinearSurrogate {
    /// Skew-symmetric `D` with unit-scale entries and a dissipative `F` of
    /// size `eps`.
    pub fn random(dim: usize, eps: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0) / (dim as f64).sqrt());
        let b = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0) / (dim as f64).sqrt());
        LinearSurrogate {
            d: &a - a.transpose(),
            f: -(&b * b.transpose()) * eps,
        }
    }
}

impl SplitOperator for LinearSurrogate {
    fn len(&self) -> usize {
        self.d.nrows()
    }

    fn apply_volume(&self, x: &[f64], out: &mut [f64]) {
        let y = &self.d * DMatrix::from_column_slice(x.len(), 1, x);
        out.copy_from_slice(y.as_slice());
    }

    fn apply_flux(&self, x: &[f64], out: &mut [f64]) {
        let y = &self.f * DMatrix::from_column_slice(x.len(), 1, x);
        out.copy_from_slice(y.as_slice());
    }
}

/// One-step operator `I + (D + F) sum_m dt^(m+1)/(m+1)! D^m`.
pub fn ader_matrix(s: &LinearSurrogate, dt: f64, degree: usize) -> DMatrix<f64> {
    let n = s.d.nrows();
    let mut avg = DMatrix::<f64>::zeros(n, n);
    let mut pow = DMatrix::<f64>::identity(n, n);
    let mut f = 1.0;
    for m in 0..=degree {
        f *= dt / (m + 1) as f64;
        avg += &pow * f;
        pow = &s.d * pow;
    }
    DMatrix::identity(n, n) + (&s.d + &s.f) * avg
}

/// Single-step agreement with the matrix oracle and the temporal order
/// against `exp(T (D + F))`.
pub fn ader_oracle(degree: usize) -> Check {
    let s = LinearSurrogate::random(18, 1e-7, 11);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let q0: Vec<f64> = (0..18).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let dt = 0.1;
    let oracle = ader_matrix(&s, dt, degree) * DMatrix::from_column_slice(18, 1, &q0);
    let mut q = q0.clone();
    AderStepper::new(18, degree).step(&s, &mut q, dt);
    let one_step = q
        .iter()
        .zip(oracle.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let t_end = 2.0;
    let exact = (&(&s.d + &s.f) * t_end).exp() * DMatrix::from_column_slice(18, 1, &q0);
    let ladder = [10usize, 20, 40];
    let errs: Vec<f64> = ladder
        .iter()
        .map(|&steps| {
            let h = t_end / steps as f64;
            let mut q = q0.clone();
            let mut st = AderStepper::new(18, degree);
            for _ in 0..steps {
                st.step(&s, &mut q, h);
            }
            q.iter().zip(exact.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        })
        .collect();
    let slope = convergence_slope(&ladder, &errs);
    let mut c = Check::below(
        "ADER oracle",
        one_step,
        1e-13,
        format!(
            "18-dim surrogate, P = {degree}; dt ladder {ladder:?} errors {} slope {slope:.2} (limit {degree})",
            errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(", ")
        ),
    );
    c.passed &= slope >= degree as f64;
    c
}

/// The default suite. `full` adds the convergence study.
pub fn run_suite(full: bool) -> Result<Vec<Check>> {
    let mut out = vec![
        sbp_identity()?,
        riemann_identities(10_000, 7),
        antisymmetry(5)?,
        free_stream()?,
        energy_stability(3, if full { 1000 } else { 200 })?,
        anisotropic_wavespeeds(),
        misfit_metrics()?,
        ader_oracle(3),
    ];
    if full {
        out.push(convergence(2, &[4, 8, 16])?);
        out.push(convergence(3, &[2, 4, 8])?);
        out.push(convergence(4, &[2, 4, 8])?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cheap_checks_pass() {
        for c in [
            sbp_identity().unwrap(),
            riemann_identities(500, 1),
            antisymmetry(2).unwrap(),
            free_stream().unwrap(),
            anisotropic_wavespeeds(),
            misfit_metrics().unwrap(),
            ader_oracle(2),
            ader_oracle(3),
        ] {
            assert!(c.passed, "{}", c.line());
        }
    }

    #[test]
    fn ader_matrix_for_commuting_terms() {
        // F = 0: the step is the degree-(P+1) Taylor polynomial of exp(dt D)
        let mut s = LinearSurrogate::random(6, 0.0, 3);
        s.f.fill(0.0);
        let dt = 0.05;
        let m = ader_matrix(&s, dt, 3);
        let mut taylor = DMatrix::<f64>::identity(6, 6);
        let mut term = DMatrix::<f64>::identity(6, 6);
        for k in 1..=4 {
            term = &term * &s.d * (dt / k as f64);
            taylor += &term;
        }
        assert!((m - taylor).abs().max() < 1e-15);
    }

    #[test]
    fn slope_of_exact_power_law() {
        let levels = [2, 4, 8];
        let errs: Vec<f64> = levels.iter().map(|&n| 3.0 * (n as f64).powf(-4.0)).collect();
        assert!((convergence_slope(&levels, &errs) - 4.0).abs() < 1e-12);
    }
}
