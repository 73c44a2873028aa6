//! Discrete energy, error norms, plane-wave reference solutions and the
//! time-frequency envelope/phase misfit of seismograms.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::discretization::{Discretization, NVAR};
use crate::error::{Error, Result};
use crate::exec::map_indices;
use crate::material::Material;
use crate::riemann::Vec3;

fn node_weights(disc: &Discretization) -> Vec<f64> {
    let h = disc.mesh().sbp.weights();
    let n = h.len();
    let mut w = Vec::with_capacity(n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                w.push(h[i] * h[j] * h[k]);
            }
        }
    }
    w
}

/// Energy of each element, `sum_p 0.5 (rho |v|^2 + sigma^T S sigma) J_p h_p`.
pub fn element_energies(q: &[f64], disc: &Discretization) -> Vec<f64> {
    assert_eq!(q.len(), disc.state_len(), "state shape mismatch");
    let w = node_weights(disc);
    let nn = disc.nodes_per_element();
    let mesh = disc.mesh();
    map_indices(disc.execution(), mesh.num_elements(), |e| {
        let mat = &mesh.materials[e];
        let jac = &mesh.elements[e].jac;
        (0..nn)
            .map(|p| {
                let s = (e * nn + p) * NVAR;
                mat.energy_density(&q[s..s + NVAR]) * jac[p] * w[p]
            })
            .sum()
    })
}

/// Total discrete energy in joules.
pub fn discrete_energy(q: &[f64], disc: &Discretization) -> f64 {
    element_energies(q, disc).iter().sum()
}

/// Instantaneous rate `dE/dt` implied by a state and its time derivative.
pub fn energy_rate(q: &[f64], dqdt: &[f64], disc: &Discretization) -> f64 {
    assert_eq!(q.len(), dqdt.len(), "state shape mismatch");
    let w = node_weights(disc);
    let nn = disc.nodes_per_element();
    let mesh = disc.mesh();
    let parts = map_indices(disc.execution(), mesh.num_elements(), |e| {
        let mat = &mesh.materials[e];
        let jac = &mesh.elements[e].jac;
        let s = mat.compliance();
        let mut acc = 0.0;
        for p in 0..nn {
            let b = (e * nn + p) * NVAR;
            let (v, a) = (&q[b..b + NVAR], &dqdt[b..b + NVAR]);
            let mut local = mat.rho * (v[0] * a[0] + v[1] * a[1] + v[2] * a[2]);
            for i in 0..6 {
                let row: f64 = (0..6).map(|j| s[i][j] * a[3 + j]).sum();
                local += v[3 + i] * row;
            }
            acc += local * jac[p] * w[p];
        }
        acc
    });
    parts.iter().sum()
}

/// Sampled energy history.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyTrace {
    pub samples: Vec<(f64, f64)>,
}

impl EnergyTrace {
    pub fn push(&mut self, t: f64, e: f64) {
        self.samples.push((t, e));
    }

    /// First sample index `k` with `E_k > E_{k-1} (1 + rel_tol) + abs_tol`.
    pub fn first_increase(&self, rel_tol: f64, abs_tol: f64) -> Option<usize> {
        self.samples
            .windows(2)
            .position(|w| w[1].1 > w[0].1 * (1.0 + rel_tol) + abs_tol)
            .map(|k| k + 1)
    }

    /// Largest relative growth `E_k / E_{k-1} - 1` over consecutive samples.
    pub fn max_relative_growth(&self) -> f64 {
        self.samples
            .windows(2)
            .filter(|w| w[0].1 > 0.0)
            .map(|w| w[1].1 / w[0].1 - 1.0)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub l2: f64,
    pub linf: f64,
}

/// Quadrature-weighted L2 and nodal max error against `exact`, over all
/// nine components.
pub fn error_norms(q: &[f64], disc: &Discretization, exact: &(dyn Fn(Vec3) -> [f64; 9] + Sync)) -> ErrorNorms {
    assert_eq!(q.len(), disc.state_len(), "state shape mismatch");
    let w = node_weights(disc);
    let nn = disc.nodes_per_element();
    let mesh = disc.mesh();
    let parts = map_indices(disc.execution(), mesh.num_elements(), |e| {
        let g = &mesh.elements[e];
        let (mut l2, mut linf) = (0.0f64, 0.0f64);
        for p in 0..nn {
            let ex = exact(g.coords[p]);
            let b = (e * nn + p) * NVAR;
            for c in 0..NVAR {
                let d = q[b + c] - ex[c];
                l2 += d * d * g.jac[p] * w[p];
                linf = linf.max(d.abs());
            }
        }
        (l2, linf)
    });
    let (l2, linf) = parts.iter().fold((0.0, 0.0f64), |(a, b), (c, d)| (a + c, b.max(*d)));
    ErrorNorms { l2: l2.sqrt(), linf }
}

/// Fills a state from a pointwise field.
pub fn sample_state(disc: &Discretization, field: &dyn Fn(Vec3) -> [f64; 9]) -> Vec<f64> {
    let nn = disc.nodes_per_element();
    let mut q = disc.zero_state();
    for (e, g) in disc.mesh().elements.iter().enumerate() {
        for p in 0..nn {
            let b = (e * nn + p) * NVAR;
            q[b..b + NVAR].copy_from_slice(&field(g.coords[p]));
        }
    }
    q
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveMode {
    P,
    S,
}

/// Sinusoidal plane wave `v = a sin(k (n . x - c t) + phase)` in an
/// isotropic medium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneWave {
    pub direction: Vec3,
    pub polarization: Vec3,
    pub wavenumber: f64,
    pub speed: f64,
    pub phase: f64,
    stress: [f64; 6],
}

impl PlaneWave {
    /// `direction` need not be normalized. For S waves, `hint` is projected
    /// onto the plane normal to `direction` to fix the polarization.
    pub fn new(material: &Material, mode: WaveMode, direction: Vec3, hint: Vec3, wavenumber: f64) -> Result<Self> {
        let (cp, cs) = match material.kind {
            crate::material::MaterialKind::Isotropic { lambda, mu } => {
                (((lambda + 2.0 * mu) / material.rho).sqrt(), (mu / material.rho).sqrt())
            }
            _ => return Err(Error::Validation("plane waves need an isotropic medium".into())),
        };
        let norm = |a: Vec3| (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
        let ln = norm(direction);
        if !(ln > 0.0) {
            return Err(Error::Validation("zero propagation direction".into()));
        }
        let n = [direction[0] / ln, direction[1] / ln, direction[2] / ln];
        let (a, c) = match mode {
            WaveMode::P => (n, cp),
            WaveMode::S => {
                let d = hint[0] * n[0] + hint[1] * n[1] + hint[2] * n[2];
                let t = [hint[0] - d * n[0], hint[1] - d * n[1], hint[2] - d * n[2]];
                let lt = norm(t);
                if !(lt > 1e-12) {
                    return Err(Error::Validation("polarization parallel to direction".into()));
                }
                ([t[0] / lt, t[1] / lt, t[2] / lt], cs)
            }
        };
        // sigma = -(1/c) C sym(a (x) n) with engineering shears
        let strain = [
            a[0] * n[0],
            a[1] * n[1],
            a[2] * n[2],
            a[0] * n[1] + a[1] * n[0],
            a[0] * n[2] + a[2] * n[0],
            a[1] * n[2] + a[2] * n[1],
        ];
        let cs_ = material.apply_stiffness(&strain);
        let stress = std::array::from_fn(|i| -cs_[i] / c);
        Ok(PlaneWave {
            direction: n,
            polarization: a,
            wavenumber,
            speed: c,
            phase: 0.0,
            stress,
        })
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn eval(&self, x: Vec3, t: f64) -> [f64; 9] {
        let n = self.direction;
        let s = n[0] * x[0] + n[1] * x[1] + n[2] * x[2] - self.speed * t;
        let f = (self.wavenumber * s + self.phase).sin();
        let a = self.polarization;
        let st = self.stress;
        [
            a[0] * f,
            a[1] * f,
            a[2] * f,
            st[0] * f,
            st[1] * f,
            st[2] * f,
            st[3] * f,
            st[4] * f,
            st[5] * f,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AccuracyClass {
    A,
    B,
    C,
    Poor,
}

impl AccuracyClass {
    /// Class of a misfit pair: the strictest threshold both values meet.
    pub fn classify(em: f64, pm: f64) -> Self {
        let worst = em.max(pm);
        if worst <= 0.05 {
            AccuracyClass::A
        } else if worst <= 0.10 {
            AccuracyClass::B
        } else if worst <= 0.20 {
            AccuracyClass::C
        } else {
            AccuracyClass::Poor
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AccuracyClass::A => "A",
            AccuracyClass::B => "B",
            AccuracyClass::C => "C",
            AccuracyClass::Poor => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MisfitReport {
    pub em: f64,
    pub pm: f64,
    pub band: (f64, f64),
    pub class: AccuracyClass,
}

impl MisfitReport {
    /// `key=value` lines.
    pub fn key_values(&self) -> String {
        format!(
            "em={:.17e}\npm={:.17e}\nband_lo={}\nband_hi={}\nclass={}\n",
            self.em,
            self.pm,
            self.band.0,
            self.band.1,
            self.class.name()
        )
    }
}

/// Number of log-spaced analysis frequencies.
pub const MISFIT_FREQUENCIES: usize = 64;

/// Gaussian-windowed time-frequency representation `W(t_i, f_j)`, row per
/// frequency. The window at frequency `f` has standard deviation `1 / f`.
pub fn time_frequency(signal: &[f64], dt: f64, freqs: &[f64]) -> Vec<Vec<Complex64>> {
    let n = signal.len();
    let len = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let mut spec: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    spec.resize(len, Complex64::new(0.0, 0.0));
    fwd.process(&mut spec);
    let df = 1.0 / (len as f64 * dt);
    freqs
        .iter()
        .map(|&f| {
            // window in time exp(-t^2 / (2 s^2)), s = 1/f, has spectral width f / (2 pi)
            let sigma_f = f / (2.0 * std::f64::consts::PI);
            let mut buf: Vec<Complex64> = (0..len)
                .map(|i| {
                    let nu = if i <= len / 2 { i as f64 * df } else { (i as f64 - len as f64) * df };
                    let g = (-(nu - f).powi(2) / (2.0 * sigma_f * sigma_f)).exp();
                    spec[i] * g
                })
                .collect();
            inv.process(&mut buf);
            buf.truncate(n);
            buf.iter().map(|c| c / len as f64).collect()
        })
        .collect()
}

/// Log-spaced frequencies covering `band`.
pub fn misfit_frequencies(band: (f64, f64), count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![band.0];
    }
    let (a, b) = (band.0.ln(), band.1.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

/// Envelope and phase misfit of `signal` against `reference`.
pub fn tf_misfit(signal: &[f64], reference: &[f64], dt: f64, band: (f64, f64)) -> Result<MisfitReport> {
    if signal.len() != reference.len() {
        return Err(Error::Validation(format!(
            "trace lengths differ: {} vs {}",
            signal.len(),
            reference.len()
        )));
    }
    if signal.len() < 2 {
        return Err(Error::Validation("traces need at least two samples".into()));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Validation(format!("invalid sample interval {dt}")));
    }
    let nyquist = 0.5 / dt;
    if !(band.0 > 0.0 && band.1 > band.0 && band.1 <= nyquist) {
        return Err(Error::Validation(format!(
            "band ({}, {}) must satisfy 0 < lo < hi <= Nyquist = {nyquist}",
            band.0, band.1
        )));
    }
    let freqs = misfit_frequencies(band, MISFIT_FREQUENCIES);
    let ws = time_frequency(signal, dt, &freqs);
    let wr = time_frequency(reference, dt, &freqs);
    let (mut de, mut dp, mut norm) = (0.0, 0.0, 0.0);
    for (rs, rr) in ws.iter().zip(&wr) {
        for (s, r) in rs.iter().zip(rr) {
            let (as_, ar) = (s.norm(), r.norm());
            de += (as_ - ar).powi(2);
            let dphi = if as_ > 0.0 && ar > 0.0 { (s * r.conj()).arg() } else { 0.0 };
            dp += (ar * dphi / std::f64::consts::PI).powi(2);
            norm += ar * ar;
        }
    }
    if !(norm > 0.0) {
        return Err(Error::Validation("reference has no energy in the band".into()));
    }
    let em = (de / norm).sqrt();
    let pm = (dp / norm).sqrt();
    Ok(MisfitReport {
        em,
        pm,
        band,
        class: AccuracyClass::classify(em, pm),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Execution;
    use crate::geometry::{Domain, DomainBoundary, Mesh, MeshSpec, Topography};
    use crate::material::isotropic_from_speeds;
    use crate::sources::TimeFunction;
    use crate::specops::{NodeKind, SbpOperator1D};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn disc(p: usize, topo: Topography) -> Discretization {
        let mut spec = MeshSpec::cube([2, 2, 2], Domain::unit(), DomainBoundary::free_surface());
        spec.topography = topo;
        let mesh = Mesh::build(&spec, SbpOperator1D::new(NodeKind::Gll, p).unwrap(), &|x| {
            isotropic_from_speeds(2.0 + x[1], 2.0, 1.0).unwrap()
        })
        .unwrap();
        Discretization::new(mesh, Execution::Serial)
    }

    #[test]
    fn energy_examples() {
        let d = disc(3, Topography::Flat);
        assert_eq!(discrete_energy(&d.zero_state(), &d), 0.0);
        let spec = MeshSpec::cube([1, 1, 1], Domain::unit(), DomainBoundary::free_surface());
        let m = Mesh::build(&spec, SbpOperator1D::new(NodeKind::Gll, 2).unwrap(), &|_| {
            isotropic_from_speeds(2.0, 2.0, 1.0).unwrap()
        })
        .unwrap();
        let d1 = Discretization::new(m, Execution::Serial);
        let q = sample_state(&d1, &|_| [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!((discrete_energy(&q, &d1) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn energy_matches_brute_force() {
        let hill = Topography::Function(std::sync::Arc::new(|x: f64, z: f64| 0.1 * (3.0 * x).sin() * z));
        let d = disc(3, hill);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q: Vec<f64> = (0..d.state_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h = d.mesh().sbp.weights().to_vec();
        let n = h.len();
        let mut brute = 0.0;
        for (e, g) in d.mesh().elements.iter().enumerate() {
            let mat = &d.mesh().materials[e];
            let s = mat.compliance();
            for k in 0..n {
                for j in 0..n {
                    for i in 0..n {
                        let p = i + n * (j + n * k);
                        let v = &q[(e * n * n * n + p) * 9..][..9];
                        let mut dens = mat.rho * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
                        for a in 0..6 {
                            for b in 0..6 {
                                dens += v[3 + a] * s[a][b] * v[3 + b];
                            }
                        }
                        brute += 0.5 * dens * g.jac[p] * h[i] * h[j] * h[k];
                    }
                }
            }
        }
        let e = discrete_energy(&q, &d);
        assert!((e - brute).abs() < 1e-12 * brute);
    }

    #[test]
    fn energy_rate_matches_budget() {
        let d = disc(3, Topography::Flat);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let q: Vec<f64> = (0..d.state_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut dq = d.zero_state();
        d.rhs(&q, &mut dq);
        let rate = energy_rate(&q, &dq, &d);
        let budget = d.energy_budget(&q);
        assert!(budget.fluctuation <= 0.0);
        assert!((rate - budget.total()).abs() < 1e-10 * budget.fluctuation.abs(), "{rate} {budget:?}");
    }

    #[test]
    fn error_norm_examples() {
        let d = disc(2, Topography::Flat);
        let f = |x: Vec3| [x[0], x[1] * x[2], 0.0, 1.0, 0.0, 0.0, 0.0, x[0] * x[0], 0.0];
        let mut q = sample_state(&d, &f);
        let en = error_norms(&q, &d, &f);
        assert_eq!((en.l2, en.linf), (0.0, 0.0));
        for v in q.iter_mut().skip(4).step_by(9) {
            *v += 1e-3;
        }
        let en = error_norms(&q, &d, &f);
        assert!((en.linf - 1e-3).abs() < 1e-15);
        assert!((en.l2 - 1e-3).abs() < 1e-14);
    }

    #[test]
    fn plane_wave_satisfies_the_equations() {
        let mat = isotropic_from_speeds(2.5, 3.0, 1.7).unwrap();
        for mode in [WaveMode::P, WaveMode::S] {
            let w = PlaneWave::new(&mat, mode, [1.0, 2.0, -0.5], [0.0, 0.0, 1.0], 1.3).unwrap();
            let (x, t, h) = ([0.2, -0.4, 0.9], 0.37, 1e-5);
            let dt: Vec<f64> = (0..9)
                .map(|c| (w.eval(x, t + h)[c] - w.eval(x, t - h)[c]) / (2.0 * h))
                .collect();
            let grad = |c: usize, d: usize| {
                let mut xp = x;
                let mut xm = x;
                xp[d] += h;
                xm[d] -= h;
                (w.eval(xp, t)[c] - w.eval(xm, t)[c]) / (2.0 * h)
            };
            // rho dv/dt = div sigma
            let sidx = [[3, 6, 7], [6, 4, 8], [7, 8, 5]];
            for i in 0..3 {
                let div: f64 = (0..3).map(|j| grad(sidx[i][j], j)).sum();
                assert!((mat.rho * dt[i] - div).abs() < 1e-6);
            }
            // dsigma/dt = C eps(v)
            let eps = [
                grad(0, 0),
                grad(1, 1),
                grad(2, 2),
                grad(0, 1) + grad(1, 0),
                grad(0, 2) + grad(2, 0),
                grad(1, 2) + grad(2, 1),
            ];
            let s = mat.apply_stiffness(&eps);
            for c in 0..6 {
                assert!((dt[3 + c] - s[c]).abs() < 1e-4 * s[c].abs().max(1.0));
            }
        }
    }

    fn ricker(n: usize, dt: f64, shift: f64) -> Vec<f64> {
        let tf = TimeFunction::Ricker { f0: 1.0, t0: 3.0 + shift };
        (0..n).map(|i| tf.eval(i as f64 * dt)).collect()
    }

    #[test]
    fn misfit_examples() {
        let dt = 0.01;
        let r = ricker(800, dt, 0.0);
        let same = tf_misfit(&r, &r, dt, (0.13, 5.0)).unwrap();
        assert_eq!((same.em, same.pm, same.class), (0.0, 0.0, AccuracyClass::A));
        let scaled: Vec<f64> = r.iter().map(|v| 1.05 * v).collect();
        let m = tf_misfit(&scaled, &r, dt, (0.13, 5.0)).unwrap();
        assert!((m.em - 0.05).abs() < 0.005 && m.pm < 0.01, "{m:?}");
        let shifted = ricker(800, dt, 0.02);
        let m = tf_misfit(&shifted, &r, dt, (0.13, 5.0)).unwrap();
        assert!(m.pm > m.em, "{m:?}");
        assert!(tf_misfit(&r[..10], &r, dt, (0.13, 5.0)).is_err());
        assert!(tf_misfit(&r, &r, dt, (1.0, 80.0)).is_err());
        assert!(tf_misfit(&r, &r, dt, (2.0, 1.0)).is_err());
    }

    #[test]
    fn classification_thresholds() {
        assert_eq!(AccuracyClass::classify(0.05, 0.01), AccuracyClass::A);
        assert_eq!(AccuracyClass::classify(0.051, 0.01), AccuracyClass::B);
        assert_eq!(AccuracyClass::classify(0.02, 0.10), AccuracyClass::B);
        assert_eq!(AccuracyClass::classify(0.15, 0.01), AccuracyClass::C);
        assert_eq!(AccuracyClass::classify(0.2, 0.2), AccuracyClass::C);
        assert_eq!(AccuracyClass::classify(0.21, 0.0), AccuracyClass::Poor);
    }

    #[test]
    fn misfit_is_invariant_under_common_scaling() {
        let dt = 0.01;
        let r = ricker(600, dt, 0.0);
        let s = ricker(600, dt, 0.03);
        let a = tf_misfit(&s, &r, dt, (0.2, 4.0)).unwrap();
        let s2: Vec<f64> = s.iter().map(|v| -3.0 * v).collect();
        let r2: Vec<f64> = r.iter().map(|v| -3.0 * v).collect();
        let b = tf_misfit(&s2, &r2, dt, (0.2, 4.0)).unwrap();
        assert!((a.em - b.em).abs() < 1e-12 && (a.pm - b.pm).abs() < 1e-12);
    }

    #[test]
    fn energy_trace_monotonicity() {
        let mut tr = EnergyTrace::default();
        for (i, e) in [4.0, 3.0, 3.0, 2.5, 2.6].iter().enumerate() {
            tr.push(i as f64, *e);
        }
        assert_eq!(tr.first_increase(1e-12, 0.0), Some(4));
        assert!(tr.max_relative_growth() > 0.03);
    }
}
