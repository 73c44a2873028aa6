//! Batch driver for the elastodg solver.

pub mod config;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use elastodg::diagnostics::tf_misfit;
use elastodg::exec::{configure_threads, Execution};
use elastodg::scenario::Simulation;
use elastodg::Error;

use config::{parse_config, RunConfig};
use output::{energy_csv, read_trace, report_lines, seismogram_csv, snapshot_vtk, write_atomic};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_MESH: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;

/// A failed command: message for stderr and the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Failure::new(EXIT_FAILURE, format!("cannot write {}: {e}", path.display()))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::Validation(_) | Error::Parse { .. } => EXIT_CONFIG,
            Error::Mesh(_) => EXIT_MESH,
            Error::Divergence { .. } => EXIT_DIVERGENCE,
        };
        Failure::new(code, e.to_string())
    }
}

impl From<config::ConfigError> for Failure {
    fn from(e: config::ConfigError) -> Self {
        Failure::new(EXIT_CONFIG, e.to_string())
    }
}

pub type Outcome = Result<String, Failure>;

/// Worker count: `SOLVER_THREADS` wins over the configuration.
pub fn thread_request(cfg: Option<usize>) -> Result<Option<usize>, Failure> {
    match std::env::var("SOLVER_THREADS") {
        Ok(v) if !v.trim().is_empty() => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Failure::new(
                EXIT_CONFIG,
                format!("SOLVER_THREADS must be a positive integer, got \"{v}\""),
            )),
        },
        _ => Ok(cfg),
    }
}

fn assemble(cfg: &RunConfig) -> Result<Simulation, Failure> {
    let threads = configure_threads(thread_request(cfg.threads)?);
    let exec = if threads > 1 { Execution::Parallel } else { Execution::Serial };
    Ok(Simulation::new(cfg.scenario.clone(), exec)?)
}

/// `check`: validates the configuration and reports mesh and step size.
pub fn check(path: &Path) -> Outcome {
    let cfg = parse_config(path)?;
    let sim = assemble(&cfg)?;
    let r = sim.report();
    let mut out = format!("configuration {} is valid\n", path.display());
    out.push_str(&format!(
        "scenario {}: P = {} ({}), {} sources, {} receivers\n",
        cfg.scenario.name,
        cfg.scenario.degree,
        cfg.scenario.nodes.name(),
        cfg.scenario.sources.len(),
        cfg.scenario.receivers.len()
    ));
    for line in report_lines(&r, None).lines() {
        out.push_str(line.trim_start_matches("# "));
        out.push('\n');
    }
    Ok(out)
}

/// `run`: solves and writes seismograms, energy trace, snapshots and the
/// manifest into the output directory.
pub fn run(path: &Path) -> Outcome {
    let cfg = parse_config(path)?;
    let mut sim = assemble(&cfg)?;
    let dir = cfg.output.directory.clone();
    std::fs::create_dir_all(&dir).map_err(|e| Failure::io(&dir, e))?;
    let start = Instant::now();
    let mut snapshot_error: Option<Failure> = None;
    let mut write_snapshot = |step: usize, t: f64, q: &[f64], disc: &elastodg::discretization::Discretization| {
        let p = dir.join(format!("snapshot_{step:06}.vtk"));
        if let Err(e) = write_atomic(&p, snapshot_vtk(disc, q, t).as_bytes()) {
            snapshot_error.get_or_insert(Failure::io(&p, e));
        }
    };
    if cfg.output.snapshot_every.is_some() {
        write_snapshot(0, 0.0, sim.state(), &sim.disc);
    }
    let every = cfg.output.snapshot_every;
    let summary = sim.run(&mut |step, t, q, disc| {
        if let Some(n) = every {
            if step % n == 0 {
                write_snapshot(step, t, q, disc);
            }
        }
        Ok(())
    })?;
    if let Some(e) = snapshot_error {
        return Err(e);
    }
    let wall = start.elapsed().as_secs_f64();
    for s in &summary.seismograms {
        let p = dir.join(format!("seismogram_{}.csv", s.name));
        write_atomic(&p, seismogram_csv(s).as_bytes()).map_err(|e| Failure::io(&p, e))?;
    }
    let p = dir.join("energy.csv");
    write_atomic(&p, energy_csv(&summary.energy.samples).as_bytes()).map_err(|e| Failure::io(&p, e))?;
    let report = sim.report();
    let manifest = format!(
        "# elastodg run manifest; the statements below reproduce this run\n{}\n{}",
        report_lines(&report, Some((&summary, wall))),
        cfg.to_toml()
    );
    let p = dir.join("manifest.toml");
    write_atomic(&p, manifest.as_bytes()).map_err(|e| Failure::io(&p, e))?;
    let mut out = format!(
        "{}: {} steps of {:e} s to t = {:.6e} in {:.2} s\n",
        cfg.scenario.name, summary.steps, summary.dt, summary.t_end, wall
    );
    if let Some((_, e)) = summary.energy.samples.last() {
        out.push_str(&format!("final energy {e:.6e}\n"));
    }
    if summary.interface.scale > 0.0 {
        out.push_str(&format!("interface power mismatch ratio {:.3e}\n", summary.interface_ratio));
    }
    out.push_str(&format!("outputs written to {}\n", dir.display()));
    Ok(out)
}

/// `verify`: property suites; fails with exit code 1 if any check fails.
pub fn verify(full: bool) -> Outcome {
    let checks = elastodg::verify::run_suite(full)?;
    let mut out = String::new();
    for c in &checks {
        out.push_str(&c.line());
        out.push('\n');
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    out.push_str(&format!("{} checks, {} failed\n", checks.len(), failed));
    if failed > 0 {
        Err(Failure::new(EXIT_FAILURE, out))
    } else {
        Ok(out)
    }
}

fn load_trace(path: &Path) -> Result<output::Trace, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_CONFIG, format!("cannot read {}: {e}", path.display())))?;
    read_trace(&text).map_err(|e| Failure::new(EXIT_CONFIG, format!("{}: {e}", path.display())))
}

/// Parses `lo,hi` in Hz.
pub fn parse_band(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [lo, hi] = parts.as_slice() else {
        return Err(format!("band must be lo,hi, got \"{s}\""));
    };
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad lower band edge \"{lo}\""))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad upper band edge \"{hi}\""))?;
    Ok((lo, hi))
}

/// `misfit`: envelope and phase misfit of `signal` against `reference`.
/// Without `component`, every velocity component with a non-zero reference
/// is compared and the overall class is the worst one.
pub fn misfit(signal: &Path, reference: &Path, band: (f64, f64), component: Option<&str>) -> Outcome {
    let a = load_trace(signal)?;
    let b = load_trace(reference)?;
    if a.times.len() != b.times.len() {
        return Err(Failure::new(
            EXIT_CONFIG,
            format!("traces have {} and {} samples", a.times.len(), b.times.len()),
        ));
    }
    let dt = a.uniform_dt().map_err(|e| Failure::new(EXIT_CONFIG, format!("{}: {e}", signal.display())))?;
    let dtb = b.uniform_dt().map_err(|e| Failure::new(EXIT_CONFIG, format!("{}: {e}", reference.display())))?;
    if (dt - dtb).abs() > 1e-9 * dt {
        return Err(Failure::new(EXIT_CONFIG, format!("sample intervals differ: {dt:e} and {dtb:e}")));
    }
    let names: Vec<String> = match component {
        Some(c) => vec![c.to_string()],
        None => ["v_x", "v_y", "v_z"]
            .iter()
            .filter(|c| b.column(c).is_some_and(|v| v.iter().any(|x| *x != 0.0)))
            .map(|c| c.to_string())
            .collect(),
    };
    if names.is_empty() {
        return Err(Failure::new(EXIT_CONFIG, "reference has no non-zero velocity component"));
    }
    let mut summary = format!(
        "misfit of {} against {} in [{}, {}] Hz\n",
        signal.display(),
        reference.display(),
        band.0,
        band.1
    );
    let mut block = String::new();
    let mut worst = elastodg::diagnostics::AccuracyClass::A;
    for name in &names {
        let missing = |p: &Path| Failure::new(EXIT_CONFIG, format!("{} has no column {name}", p.display()));
        let s = a.column(name).ok_or_else(|| missing(signal))?;
        let r = b.column(name).ok_or_else(|| missing(reference))?;
        let m = tf_misfit(&s, &r, dt, band)?;
        worst = worst.max(m.class);
        summary.push_str(&format!(
            "{name}: EM = {:.4} PM = {:.4} class {}\n",
            m.em,
            m.pm,
            m.class.name()
        ));
        for line in m.key_values().lines() {
            block.push_str(&format!("{name}.{line}\n"));
        }
    }
    summary.push_str(&format!("overall class {}\n\n", worst.name()));
    summary.push_str(&block);
    summary.push_str(&format!("class={}\n", worst.name()));
    Ok(summary)
}

/// Resolved output directory of a configuration, for callers that need it.
pub fn output_dir(path: &Path) -> Result<PathBuf, Failure> {
    Ok(parse_config(path)?.output.directory)
}
