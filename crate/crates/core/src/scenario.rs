//! Complete simulation setups, the built-in presets and the run loop.

use std::sync::Arc;

use crate::diagnostics::{discrete_energy, EnergyTrace};
use crate::discretization::{Discretization, InterfaceJump};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::{Domain, DomainBoundary, Mesh, MeshSpec, Topography};
use crate::material::{apatite, isotropic_from_speeds, Material};
use crate::riemann::Vec3;
use crate::sources::{inject_source, PointSource, Receiver, SourceKind, SourceStencil, TimeFunction};
use crate::specops::{NodeKind, SbpOperator1D};
use crate::timeint::{cfl_timestep, check_finite, AderStepper};

/// Material occupying depths `[top, bottom)` below the flat top `y_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub top: f64,
    pub bottom: f64,
    pub material: Material,
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum MaterialModel {
    Uniform(Material),
    /// Layers sorted by depth. Elements above the first layer take the
    /// first material, elements below the last take the last.
    Layered(Vec<Layer>),
}

impl MaterialModel {
    pub fn validate(&self) -> Result<()> {
        if let MaterialModel::Layered(layers) = self {
            if layers.is_empty() {
                return Err(Error::Config("layered medium needs at least one layer".into()));
            }
            for (i, l) in layers.iter().enumerate() {
                if !(l.bottom > l.top) {
                    return Err(Error::Config(format!(
                        "layer {i} has depth range [{}, {}) of non-positive thickness",
                        l.top, l.bottom
                    )));
                }
                if i > 0 && l.top < layers[i - 1].bottom {
                    return Err(Error::Config(format!("layer {i} overlaps layer {}", i - 1)));
                }
            }
        }
        Ok(())
    }

    /// Material at a point given the flat top height.
    pub fn at(&self, x: Vec3, y_top: f64) -> Material {
        match self {
            MaterialModel::Uniform(m) => m.clone(),
            MaterialModel::Layered(layers) => {
                let depth = y_top - x[1];
                layers
                    .iter()
                    .find(|l| depth < l.bottom)
                    .unwrap_or_else(|| layers.last().expect("validated non-empty"))
                    .material
                    .clone()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverSpec {
    pub name: String,
    pub location: Vec3,
    /// Sampling interval in seconds; `None` samples every step.
    pub interval: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSpec {
    pub t_end: f64,
    pub cfl: f64,
    pub max_steps: Option<usize>,
}

impl Default for TimeSpec {
    fn default() -> Self {
        TimeSpec {
            t_end: 1.0,
            cfl: 0.9,
            max_steps: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub degree: usize,
    pub nodes: NodeKind,
    pub mesh: MeshSpec,
    pub material: MaterialModel,
    pub sources: Vec<PointSource>,
    pub receivers: Vec<ReceiverSpec>,
    pub time: TimeSpec,
    /// Energy is sampled every this many steps, and at the last step.
    pub energy_every: usize,
    /// Samples the interface power mismatch alongside the energy.
    pub track_interfaces: bool,
}

pub const PRESETS: [&str; 3] = ["loh1-desk", "apatite-desk", "topography-desk"];

/// Built-in scenario by name.
pub fn preset(name: &str) -> Result<Scenario> {
    match name {
        "loh1-desk" => Ok(loh1_desk()),
        "apatite-desk" => Ok(apatite_desk()),
        "topography-desk" => Ok(topography_desk()),
        other => Err(Error::Config(format!(
            "unknown preset \"{other}\"; available: {}",
            PRESETS.join(", ")
        ))),
    }
}

fn free_top_absorbing_rest() -> [DomainBoundary; 6] {
    let mut b = [DomainBoundary::absorbing(); 6];
    b[3] = DomainBoundary::free_surface();
    b
}

/// Layer over a half-space on `9 x 9 x 9` elements of 1 km, `P = 3`.
///
/// Depth runs along `-y`, the benchmark's horizontal `(y, z)` offsets are
/// laid out along `(x, z)` from the epicentre.
pub fn loh1_desk() -> Scenario {
    let soft = isotropic_from_speeds(2600.0, 4000.0, 2000.0).expect("valid medium");
    let hard = isotropic_from_speeds(2700.0, 6000.0, 3464.0).expect("valid medium");
    let top = 9000.0;
    let epi = [4500.0, 4500.0];
    let mut m = [[0.0; 3]; 3];
    m[0][2] = 1e18;
    m[2][0] = 1e18;
    let receivers = [("r1", 0.0, 0.693), ("r4", 0.490, 0.490), ("r5", 3.919, 3.919), ("r7", 0.577, 0.384)]
        .iter()
        .map(|&(name, dx, dz)| ReceiverSpec {
            name: name.into(),
            location: [epi[0] + 1000.0 * dx, top, epi[1] + 1000.0 * dz],
            interval: None,
        })
        .collect();
    Scenario {
        name: "loh1-desk".into(),
        degree: 3,
        nodes: NodeKind::Gll,
        mesh: MeshSpec {
            dims: [9, 9, 9],
            domain: Domain {
                min: [0.0; 3],
                max: [9000.0, top, 9000.0],
            },
            topography: Topography::Flat,
            boundaries: free_top_absorbing_rest(),
        },
        material: MaterialModel::Layered(vec![
            Layer {
                top: 0.0,
                bottom: 1000.0,
                material: soft,
            },
            Layer {
                top: 1000.0,
                bottom: f64::INFINITY,
                material: hard,
            },
        ]),
        sources: vec![PointSource {
            kind: SourceKind::Moment(m),
            location: [epi[0], top - 2000.0, epi[1]],
            time: TimeFunction::Loh1 { t: 0.1 },
        }],
        receivers,
        time: TimeSpec {
            t_end: 4.0,
            cfl: 0.9,
            max_steps: None,
        },
        energy_every: 10,
        track_interfaces: true,
    }
}

/// Apatite crystal, 20 cm cube, single force on its free `z = 0` face.
pub fn apatite_desk() -> Scenario {
    let f0 = 250e3;
    let mut boundaries = [DomainBoundary::absorbing(); 6];
    boundaries[4] = DomainBoundary::free_surface();
    Scenario {
        name: "apatite-desk".into(),
        degree: 3,
        nodes: NodeKind::Gll,
        mesh: MeshSpec {
            dims: [6, 6, 6],
            domain: Domain {
                min: [0.0; 3],
                max: [0.2; 3],
            },
            topography: Topography::Flat,
            boundaries,
        },
        material: MaterialModel::Uniform(apatite()),
        sources: vec![PointSource {
            kind: SourceKind::Force([1.0, 0.0, 0.0]),
            location: [0.1, 0.1, 0.0],
            time: TimeFunction::GaussCosine {
                f0,
                t0: 3.0 / (2.0 * f0) + 5e-6,
            },
        }],
        receivers: vec![ReceiverSpec {
            name: "r1".into(),
            location: [0.1, 0.1, 0.15],
            interval: None,
        }],
        time: TimeSpec {
            t_end: 50e-6,
            cfl: 0.9,
            max_steps: None,
        },
        energy_every: 10,
        track_interfaces: false,
    }
}

/// Gaussian hill on an 8 km block with a buried double couple.
pub fn topography_desk() -> Scenario {
    let (amp, centre, width) = (1500.0, 4000.0, 1000.0);
    let hill: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync> = Arc::new(move |x: f64, z: f64| {
        amp * (-((x - centre).powi(2) + (z - centre).powi(2)) / (2.0 * width * width)).exp()
    });
    let h = hill.clone();
    let top = 8000.0;
    let receivers = [("s1", 3000.0), ("s2", 4000.0), ("s3", 5000.0)]
        .iter()
        .map(|&(name, c)| ReceiverSpec {
            name: name.into(),
            location: [c, top + h(c, c), c],
            interval: None,
        })
        .collect();
    let mut m = [[0.0; 3]; 3];
    m[0][2] = 1e16;
    m[2][0] = 1e16;
    Scenario {
        name: "topography-desk".into(),
        degree: 3,
        nodes: NodeKind::Gll,
        mesh: MeshSpec {
            dims: [8, 8, 8],
            domain: Domain {
                min: [0.0; 3],
                max: [8000.0, top, 8000.0],
            },
            topography: Topography::Function(hill),
            boundaries: free_top_absorbing_rest(),
        },
        material: MaterialModel::Uniform(isotropic_from_speeds(2670.0, 6000.0, 3464.0).expect("valid medium")),
        sources: vec![PointSource {
            kind: SourceKind::Moment(m),
            location: [1000.0, top - 2000.0, 1000.0],
            time: TimeFunction::Ricker { f0: 1.5, t0: 1.0 },
        }],
        receivers,
        time: TimeSpec {
            t_end: 3.0,
            cfl: 0.9,
            max_steps: None,
        },
        energy_every: 10,
        track_interfaces: false,
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        if !(self.time.t_end > 0.0 && self.time.t_end.is_finite()) {
            return Err(Error::Config(format!("time.t_end must be positive, got {}", self.time.t_end)));
        }
        if !(self.time.cfl > 0.0 && self.time.cfl.is_finite()) {
            return Err(Error::Config(format!("time.cfl must be positive, got {}", self.time.cfl)));
        }
        if self.time.max_steps == Some(0) {
            return Err(Error::Config("time.max_steps must be at least 1".into()));
        }
        if self.energy_every == 0 {
            return Err(Error::Config("energy cadence must be at least 1".into()));
        }
        for s in &self.sources {
            s.time.validate()?;
        }
        for r in &self.receivers {
            if let Some(dt) = r.interval {
                if !(dt > 0.0 && dt.is_finite()) {
                    return Err(Error::Config(format!("receiver {} has invalid interval {dt}", r.name)));
                }
            }
        }
        let mut names: Vec<&str> = self.receivers.iter().map(|r| r.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("duplicate receiver name \"{}\"", w[0])));
        }
        Ok(())
    }

    pub fn build_mesh(&self) -> Result<Mesh> {
        self.validate()?;
        let sbp = SbpOperator1D::new(self.nodes, self.degree)?;
        let top = self.mesh.domain.max[1];
        Mesh::build(&self.mesh, sbp, &|x| self.material.at(x, top))
    }
}

/// Recorded receiver time series.
#[derive(Debug, Clone, PartialEq)]
pub struct Seismogram {
    pub name: String,
    pub location: Vec3,
    pub times: Vec<f64>,
    pub samples: Vec<[f64; 9]>,
}

/// Static facts about an assembled simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshReport {
    pub elements: usize,
    pub nodes_per_element: usize,
    pub dofs: usize,
    pub min_jacobian: f64,
    pub min_edge_length: f64,
    pub dt: f64,
    pub steps: usize,
    pub t_end: f64,
    /// Largest coordinate and normal mismatch across internal faces.
    pub conformity: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: usize,
    pub dt: f64,
    pub t_end: f64,
    pub seismograms: Vec<Seismogram>,
    pub energy: EnergyTrace,
    /// Worst interface mismatch relative to its scale over sampled steps.
    pub interface_ratio: f64,
    pub interface: InterfaceJump,
}

/// Callback `(step, time, state, discretization)` after every step.
pub type Observer<'a> = dyn FnMut(usize, f64, &[f64], &Discretization) -> Result<()> + 'a;

/// Assembled state of a run.
pub struct Simulation {
    pub scenario: Scenario,
    pub disc: Discretization,
    pub dt: f64,
    pub steps: usize,
    stencils: Vec<SourceStencil>,
    receivers: Vec<(Receiver, usize)>,
    stepper: AderStepper,
    q: Vec<f64>,
    step: usize,
}

impl Simulation {
    pub fn new(scenario: Scenario, exec: Execution) -> Result<Self> {
        let mesh = scenario.build_mesh()?;
        let disc = Discretization::new(mesh, exec);
        let dt_max = cfl_timestep(&disc, scenario.time.cfl)?;
        let mut steps = (scenario.time.t_end / dt_max).ceil().max(1.0) as usize;
        let dt = scenario.time.t_end / steps as f64;
        if let Some(cap) = scenario.time.max_steps {
            steps = steps.min(cap);
        }
        let stencils = scenario
            .sources
            .iter()
            .map(|s| inject_source(s, disc.mesh()))
            .collect::<Result<Vec<_>>>()?;
        let receivers = scenario
            .receivers
            .iter()
            .map(|r| {
                let stride = r.interval.map_or(1, |iv| ((iv / dt).round() as usize).max(1));
                Receiver::new(r.name.clone(), r.location, disc.mesh()).map(|rec| (rec, stride))
            })
            .collect::<Result<Vec<_>>>()?;
        let q = disc.zero_state();
        let stepper = AderStepper::new(q.len(), scenario.degree);
        Ok(Simulation {
            scenario,
            disc,
            dt,
            steps,
            stencils,
            receivers,
            stepper,
            q,
            step: 0,
        })
    }

    pub fn report(&self) -> MeshReport {
        let mesh = self.disc.mesh();
        MeshReport {
            elements: mesh.num_elements(),
            nodes_per_element: mesh.nodes_per_element(),
            dofs: self.disc.state_len(),
            min_jacobian: mesh.min_jacobian(),
            min_edge_length: mesh.min_edge_length(),
            dt: self.dt,
            steps: self.steps,
            t_end: self.dt * self.steps as f64,
            conformity: mesh.conformity(),
        }
    }

    pub fn state(&self) -> &[f64] {
        &self.q
    }

    /// Replaces the current state, e.g. with initial data.
    pub fn set_state(&mut self, q: Vec<f64>) -> Result<()> {
        if q.len() != self.q.len() {
            return Err(Error::Validation(format!(
                "state has {} entries, expected {}",
                q.len(),
                self.q.len()
            )));
        }
        self.q = q;
        Ok(())
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    /// Advances one step, sources included.
    pub fn advance(&mut self) -> Result<()> {
        let t = self.time();
        self.stepper.step(&self.disc, &mut self.q, self.dt);
        let nn = self.disc.nodes_per_element();
        for s in &self.stencils {
            s.add_step(&mut self.q, nn, t, self.dt);
        }
        self.step += 1;
        check_finite(&self.disc, &self.q, self.step)
    }

    /// Runs to the end. `observer` sees the state after every step.
    pub fn run(&mut self, observer: &mut Observer<'_>) -> Result<RunSummary> {
        let mut seismograms: Vec<Seismogram> = self
            .receivers
            .iter()
            .map(|(r, _)| Seismogram {
                name: r.name.clone(),
                location: r.location,
                times: Vec::new(),
                samples: Vec::new(),
            })
            .collect();
        let mut energy = EnergyTrace::default();
        let mut interface = InterfaceJump::default();
        let mut interface_ratio: f64 = 0.0;
        let record = |sim: &Simulation, seis: &mut Vec<Seismogram>| {
            for ((r, stride), s) in sim.receivers.iter().zip(seis.iter_mut()) {
                if sim.step.is_multiple_of(*stride) {
                    s.times.push(sim.time());
                    s.samples.push(r.sample(&sim.q, &sim.disc));
                }
            }
        };
        let mut sample_energy = |sim: &Simulation, energy: &mut EnergyTrace| {
            energy.push(sim.time(), discrete_energy(&sim.q, &sim.disc));
            if sim.scenario.track_interfaces {
                let j = sim.disc.interface_jump_power(&sim.q);
                interface.sided = interface.sided.max(j.sided);
                interface.scheme = interface.scheme.max(j.scheme);
                interface.scale = interface.scale.max(j.scale);
                if j.scale > 0.0 {
                    interface_ratio = interface_ratio.max(j.sided.max(j.scheme) / j.scale);
                }
            }
        };
        record(self, &mut seismograms);
        sample_energy(self, &mut energy);
        while self.step < self.steps {
            self.advance()?;
            record(self, &mut seismograms);
            if self.step.is_multiple_of(self.scenario.energy_every) || self.step == self.steps {
                sample_energy(self, &mut energy);
            }
            observer(self.step, self.time(), &self.q, &self.disc)?;
        }
        Ok(RunSummary {
            steps: self.steps,
            dt: self.dt,
            t_end: self.time(),
            seismograms,
            energy,
            interface_ratio,
            interface,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(mut s: Scenario, dims: usize, steps: usize) -> Scenario {
        s.mesh.dims = [dims; 3];
        s.time.max_steps = Some(steps);
        s.degree = 2;
        s
    }

    #[test]
    fn presets_resolve() {
        for name in PRESETS {
            let s = preset(name).unwrap();
            assert_eq!(s.name, name);
            s.validate().unwrap();
        }
        assert!(matches!(preset("loh2"), Err(Error::Config(_))));
    }

    #[test]
    fn loh1_preset_values() {
        let s = loh1_desk();
        let MaterialModel::Layered(layers) = &s.material else {
            panic!("expected layers")
        };
        let ws = layers[0].material.wavespeeds();
        assert_eq!(layers[0].material.rho, 2600.0);
        assert!((ws.cp[0] - 4000.0).abs() < 1e-9 && (ws.csh[0] - 2000.0).abs() < 1e-9);
        let ws = layers[1].material.wavespeeds();
        assert_eq!(layers[1].material.rho, 2700.0);
        assert!((ws.cp[0] - 6000.0).abs() < 1e-9 && (ws.csh[0] - 3464.0).abs() < 1e-9);
        assert_eq!((s.dims(), s.degree), ([9, 9, 9], 3));
    }

    impl Scenario {
        fn dims(&self) -> [usize; 3] {
            self.mesh.dims
        }
    }

    #[test]
    fn layered_lookup_uses_depth() {
        let s = loh1_desk();
        let top = s.mesh.domain.max[1];
        assert_eq!(s.material.at([0.0, 8500.0, 0.0], top).rho, 2600.0);
        assert_eq!(s.material.at([0.0, 7500.0, 0.0], top).rho, 2700.0);
        assert_eq!(s.material.at([0.0, 9500.0, 0.0], top).rho, 2600.0);
    }

    #[test]
    fn zero_source_run_stays_zero() {
        let mut s = small(loh1_desk(), 3, 5);
        s.mesh.domain.max = [3000.0, 9000.0, 3000.0];
        s.sources.clear();
        s.receivers = vec![ReceiverSpec {
            name: "a".into(),
            location: [1500.0, 9000.0, 1500.0],
            interval: None,
        }];
        let mut sim = Simulation::new(s, Execution::Serial).unwrap();
        let out = sim.run(&mut |_, _, _, _| Ok(())).unwrap();
        assert_eq!(out.seismograms[0].samples.len(), 6);
        assert!(out.seismograms[0].samples.iter().all(|v| v.iter().all(|c| *c == 0.0)));
        assert!(out.energy.samples.iter().all(|s| s.1 == 0.0));
    }

    #[test]
    fn runs_are_deterministic_and_thread_independent() {
        let mut s = small(topography_desk(), 3, 6);
        s.mesh.domain.max = [8000.0, 8000.0, 8000.0];
        let a = Simulation::new(s.clone(), Execution::Serial).unwrap().run(&mut |_, _, _, _| Ok(())).unwrap();
        let b = Simulation::new(s, Execution::Parallel).unwrap().run(&mut |_, _, _, _| Ok(())).unwrap();
        assert_eq!(a, b);
        assert!(a.seismograms.iter().any(|s| s.samples.iter().any(|v| v[1] != 0.0)));
    }

    #[test]
    fn receiver_interval_sets_stride() {
        let mut s = small(apatite_desk(), 2, 8);
        let sim = Simulation::new(s.clone(), Execution::Serial).unwrap();
        s.receivers[0].interval = Some(3.0 * sim.dt);
        let mut sim = Simulation::new(s, Execution::Serial).unwrap();
        let out = sim.run(&mut |_, _, _, _| Ok(())).unwrap();
        assert_eq!(out.seismograms[0].times.len(), 3);
    }

    #[test]
    fn invalid_scenarios_are_config_errors() {
        let mut s = loh1_desk();
        s.time.t_end = -1.0;
        assert!(matches!(s.validate(), Err(Error::Config(_))));
        let mut s = loh1_desk();
        s.receivers[1].name = "r1".into();
        assert!(matches!(s.validate(), Err(Error::Config(_))));
        let mut s = small(loh1_desk(), 3, 1);
        s.sources[0].location = [1e6, 0.0, 0.0];
        assert!(matches!(Simulation::new(s, Execution::Serial), Err(Error::Config(_))));
    }

    #[test]
    fn divergence_is_reported() {
        let mut s = small(loh1_desk(), 3, 5000);
        s.time.cfl = 20.0;
        s.time.t_end = 1e6;
        s.sources.clear();
        s.receivers.clear();
        let mut sim = Simulation::new(s, Execution::Serial).unwrap();
        let q: Vec<f64> = (0..sim.state().len()).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        sim.set_state(q).unwrap();
        assert!(matches!(sim.run(&mut |_, _, _, _| Ok(())), Err(Error::Divergence { .. })));
    }
}
