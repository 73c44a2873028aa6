//! Output files. Every file is written to a temporary sibling and renamed, so
//! a failed run never leaves a truncated file behind.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use elastodg::discretization::{Discretization, NVAR};
use elastodg::scenario::{MeshReport, RunSummary, Seismogram};

pub const COLUMNS: [&str; 10] = [
    "t", "v_x", "v_y", "v_z", "sigma_xx", "sigma_yy", "sigma_zz", "sigma_xy", "sigma_xz", "sigma_yz",
];

pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// 17 significant digits; round-trips every `f64`.
fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn seismogram_csv(s: &Seismogram) -> String {
    let mut out = COLUMNS.join(",");
    out.push('\n');
    for (t, q) in s.times.iter().zip(&s.samples) {
        out.push_str(&sci(*t));
        for v in q {
            out.push(',');
            out.push_str(&sci(*v));
        }
        out.push('\n');
    }
    out
}

pub fn energy_csv(samples: &[(f64, f64)]) -> String {
    let mut out = String::from("t,E\n");
    for (t, e) in samples {
        let _ = writeln!(out, "{},{}", sci(*t), sci(*e));
    }
    out
}

/// A seismogram read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub columns: Vec<String>,
    pub times: Vec<f64>,
    pub data: Vec<Vec<f64>>,
}

impl Trace {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.data.iter().map(|row| row[i]).collect())
    }

    /// Uniform sample spacing, if the time column has one.
    pub fn uniform_dt(&self) -> Result<f64, String> {
        if self.times.len() < 2 {
            return Err("need at least two samples".into());
        }
        let dt = (self.times[self.times.len() - 1] - self.times[0]) / (self.times.len() - 1) as f64;
        let uniform = self
            .times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-6 * dt.abs());
        if dt > 0.0 && uniform {
            Ok(dt)
        } else {
            Err("time column is not uniformly spaced".into())
        }
    }
}

pub fn read_trace(text: &str) -> Result<Trace, String> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or("empty file")?;
    let columns: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
    if columns.first().map(String::as_str) != Some("t") {
        return Err("first column must be t".into());
    }
    let mut times = Vec::new();
    let mut data = Vec::new();
    for (idx, line) in lines {
        let row: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| format!("line {}: {e}", idx + 1))?;
        if row.len() != columns.len() {
            return Err(format!("line {}: expected {} values, found {}", idx + 1, columns.len(), row.len()));
        }
        times.push(row[0]);
        data.push(row);
    }
    Ok(Trace { columns, times, data })
}

/// Legacy VTK structured grid over all volume nodes, element-duplicated
/// nodes included, with velocity and stress point data.
pub fn snapshot_vtk(disc: &Discretization, q: &[f64], time: f64) -> String {
    let mesh = disc.mesh();
    let n = mesh.sbp.n();
    let nn = disc.nodes_per_element();
    let dims = [mesh.dims[0] * n, mesh.dims[1] * n, mesh.dims[2] * n];
    let points = dims[0] * dims[1] * dims[2];
    let mut order = Vec::with_capacity(points);
    for kk in 0..dims[2] {
        for jj in 0..dims[1] {
            for ii in 0..dims[0] {
                let e = mesh.element_index(ii / n, jj / n, kk / n);
                let p = (ii % n) + n * ((jj % n) + n * (kk % n));
                order.push((e, p));
            }
        }
    }
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "elastodg snapshot t = {}", sci(time));
    let _ = writeln!(out, "ASCII\nDATASET STRUCTURED_GRID");
    let _ = writeln!(out, "DIMENSIONS {} {} {}", dims[0], dims[1], dims[2]);
    let _ = writeln!(out, "POINTS {points} double");
    for &(e, p) in &order {
        let x = mesh.elements[e].coords[p];
        let _ = writeln!(out, "{} {} {}", sci(x[0]), sci(x[1]), sci(x[2]));
    }
    let _ = writeln!(out, "POINT_DATA {points}");
    let _ = writeln!(out, "VECTORS velocity double");
    for &(e, p) in &order {
        let b = (e * nn + p) * NVAR;
        let _ = writeln!(out, "{} {} {}", sci(q[b]), sci(q[b + 1]), sci(q[b + 2]));
    }
    for (c, name) in COLUMNS[4..].iter().enumerate() {
        let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for &(e, p) in &order {
            let _ = writeln!(out, "{}", sci(q[(e * nn + p) * NVAR + 3 + c]));
        }
    }
    out
}

/// Mesh and run statistics as TOML comment lines.
pub fn report_lines(r: &MeshReport, summary: Option<(&RunSummary, f64)>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# elements = {}", r.elements);
    let _ = writeln!(out, "# nodes_per_element = {}", r.nodes_per_element);
    let _ = writeln!(out, "# dofs = {}", r.dofs);
    let _ = writeln!(out, "# min_jacobian = {:e}", r.min_jacobian);
    let _ = writeln!(out, "# min_edge_length = {:e}", r.min_edge_length);
    let _ = writeln!(out, "# conformity = {:e} {:e}", r.conformity.0, r.conformity.1);
    let _ = writeln!(out, "# dt = {}", sci(r.dt));
    let _ = writeln!(out, "# steps = {}", r.steps);
    let _ = writeln!(out, "# t_end = {}", sci(r.t_end));
    if let Some((s, wall)) = summary {
        let _ = writeln!(out, "# wall_time_s = {wall:.3}");
        if let Some((_, e)) = s.energy.samples.last() {
            let _ = writeln!(out, "# final_energy = {}", sci(*e));
        }
        if s.interface.scale > 0.0 {
            let _ = writeln!(out, "# interface_ratio = {:e}", s.interface_ratio);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let s = Seismogram {
            name: "a".into(),
            location: [0.0; 3],
            times: vec![0.0, 0.1, 0.2],
            samples: vec![[0.0; 9], [1.0 / 3.0; 9], [-2.5e-300; 9]],
        };
        let text = seismogram_csv(&s);
        assert!(text.starts_with("t,v_x,v_y,v_z,sigma_xx,"));
        let tr = read_trace(&text).unwrap();
        assert_eq!(tr.times, s.times);
        assert_eq!(tr.column("v_y").unwrap(), vec![0.0, 1.0 / 3.0, -2.5e-300]);
        assert!((tr.uniform_dt().unwrap() - 0.1).abs() < 1e-15);
        let digits = text.lines().nth(2).unwrap().split(',').nth(1).unwrap();
        assert_eq!(digits.split('e').next().unwrap().replace(['.', '-'], "").len(), 17);
    }

    #[test]
    fn malformed_traces_rejected() {
        assert!(read_trace("").is_err());
        assert!(read_trace("x,v_x\n0,1\n").is_err());
        assert!(read_trace("t,v_x\n0,1\n1\n").is_err());
        assert!(read_trace("t,v_x\n0,1\n1,2\n3,4\n").unwrap().uniform_dt().is_err());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
