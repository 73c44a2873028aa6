//! Run configuration: TOML parsing with line-numbered, aggregated errors and
//! a canonical echo that parses back to the same configuration.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use elastodg::geometry::{
    ingest_topography, BoundaryTreatment, Domain, DomainBoundary, MeshSpec, Topography, TopographySurface,
};
use elastodg::material::{Material, MaterialKind, Orthotropic};
use elastodg::riemann::BoundarySpec;
use elastodg::scenario::{self, Layer, MaterialModel, ReceiverSpec, Scenario, TimeSpec};
use elastodg::sources::{PointSource, SourceKind, TimeFunction};
use elastodg::specops::NodeKind;
use toml::{Table, Value};

pub const FACE_KEYS: [&str; 6] = ["x_min", "x_max", "y_min", "y_max", "z_min", "z_max"];

const MATERIAL_KEYS: [&str; 14] = [
    "kind", "rho", "cp", "cs", "lambda", "mu", "c11", "c12", "c13", "c22", "c23", "c33", "c44", "c55",
];

const ORTHO_KEYS: [&str; 9] = ["c11", "c12", "c13", "c22", "c23", "c33", "c44", "c55", "c66"];

/// Every accepted key path, used for unknown-key suggestions.
fn valid_paths() -> Vec<String> {
    let mut v: Vec<String> = ["name", "preset"].iter().map(|s| s.to_string()).collect();
    let sections: [(&str, &[&str]); 7] = [
        ("solver", &["degree", "nodes", "threads"]),
        ("mesh", &["nx", "ny", "nz", "domain", "topography_file"]),
        ("boundary", &["all", "x_min", "x_max", "y_min", "y_max", "z_min", "z_max"]),
        ("time", &["t_end", "cfl", "max_steps"]),
        ("sources", &["type", "location", "M", "force", "time_function", "T", "f0", "t0"]),
        ("receivers", &["name", "location", "interval"]),
        ("output", &["directory", "energy_every", "snapshot_every", "track_interfaces"]),
    ];
    for (s, keys) in sections {
        v.extend(keys.iter().map(|k| format!("{s}.{k}")));
    }
    for k in MATERIAL_KEYS.iter().chain(["c66"].iter()) {
        v.push(format!("material.{k}"));
        v.push(format!("layers.{k}"));
    }
    v.push("layers.top".into());
    v.push("layers.bottom".into());
    v
}

/// Closest accepted key path by edit distance.
pub fn nearest_key(path: &str) -> Option<String> {
    valid_paths()
        .into_iter()
        .map(|p| (strsim::levenshtein(path, &p), p))
        .min_by_key(|(d, _)| *d)
        .filter(|(d, _)| *d <= 4)
        .map(|(_, p)| p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    pub line: Option<usize>,
    pub message: String,
}

/// All problems found in one configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub origin: PathBuf,
    pub issues: Vec<Issue>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            match issue.line {
                Some(l) => write!(f, "{}:{}: {}", self.origin.display(), l, issue.message)?,
                None => write!(f, "{}: {}", self.origin.display(), issue.message)?,
            }
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Snapshot cadence in steps; `None` writes no snapshots.
    pub snapshot_every: Option<usize>,
}

/// Where the top surface comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum TopographySource {
    Flat,
    File(PathBuf, TopographySurface),
    /// The preset's built-in surface.
    Preset,
}

/// Validated configuration of one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub preset: Option<String>,
    pub topography: TopographySource,
    pub threads: Option<usize>,
    pub output: OutputConfig,
}

impl PartialEq for RunConfig {
    fn eq(&self, o: &Self) -> bool {
        let (a, b) = (&self.scenario, &o.scenario);
        a.name == b.name
            && a.degree == b.degree
            && a.nodes == b.nodes
            && a.mesh.dims == b.mesh.dims
            && a.mesh.domain == b.mesh.domain
            && a.mesh.boundaries == b.mesh.boundaries
            && a.material == b.material
            && a.sources == b.sources
            && a.receivers == b.receivers
            && a.time == b.time
            && a.energy_every == b.energy_every
            && a.track_interfaces == b.track_interfaces
            && self.preset == o.preset
            && self.topography == o.topography
            && self.threads == o.threads
            && self.output == o.output
    }
}

struct Ctx {
    lines: HashMap<String, usize>,
    issues: Vec<Issue>,
    base_dir: PathBuf,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

fn index_spans(text: &str) -> HashMap<String, usize> {
    use toml::de::{DeTable, DeValue};
    fn walk(text: &str, prefix: &str, t: &DeTable<'_>, out: &mut HashMap<String, usize>) {
        for (k, v) in t.iter() {
            let path = if prefix.is_empty() {
                k.get_ref().to_string()
            } else {
                format!("{prefix}.{}", k.get_ref())
            };
            out.entry(path.clone()).or_insert_with(|| line_of(text, k.span().start));
            match v.get_ref() {
                DeValue::Table(sub) => walk(text, &path, sub, out),
                DeValue::Array(items) => {
                    for (i, item) in items.iter().enumerate() {
                        let ip = format!("{path}[{i}]");
                        out.entry(ip.clone()).or_insert_with(|| line_of(text, item.span().start));
                        if let DeValue::Table(sub) = item.get_ref() {
                            walk(text, &ip, sub, out);
                        }
                    }
                }
                _ => {}
            }
        }
    }
    let mut out = HashMap::new();
    if let Ok(t) = DeTable::parse(text) {
        walk(text, "", t.get_ref(), &mut out);
    }
    out
}

impl Ctx {
    fn line(&self, path: &str) -> Option<usize> {
        let mut p = path;
        loop {
            if let Some(l) = self.lines.get(p) {
                return Some(*l);
            }
            p = &p[..p.rfind(['.', '['])?];
        }
    }

    fn err(&mut self, path: &str, message: impl Into<String>) {
        let line = self.line(path);
        self.issues.push(Issue {
            line,
            message: message.into(),
        });
    }

    fn unknown(&mut self, path: &str, value: &Value) {
        if let Value::Table(t) = value {
            if !t.is_empty() {
                for (k, v) in t {
                    self.unknown(&format!("{path}.{k}"), v);
                }
                return;
            }
        }
        let generic = strip_indices(path);
        let msg = match nearest_key(&generic) {
            Some(s) => format!("unknown key \"{path}\"; did you mean \"{s}\"?"),
            None => format!("unknown key \"{path}\""),
        };
        self.err(path, msg);
    }

    fn check_keys(&mut self, path: &str, t: &Table, allowed: &[&str]) {
        for (k, v) in t {
            if !allowed.contains(&k.as_str()) {
                self.unknown(&join(path, k), v);
            }
        }
    }

    fn table<'a>(&mut self, root: &'a Table, key: &str) -> Option<&'a Table> {
        match root.get(key) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                self.err(key, format!("\"{key}\" must be a table"));
                None
            }
        }
    }

    fn f64(&mut self, t: &Table, path: &str, key: &str) -> Option<f64> {
        let full = join(path, key);
        match t.get(key)? {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            _ => {
                self.err(&full, format!("{full} must be a number"));
                None
            }
        }
    }

    fn usize(&mut self, t: &Table, path: &str, key: &str) -> Option<usize> {
        let full = join(path, key);
        match t.get(key)? {
            Value::Integer(i) if *i >= 0 => Some(*i as usize),
            _ => {
                self.err(&full, format!("{full} must be a non-negative integer"));
                None
            }
        }
    }

    fn string<'a>(&mut self, t: &'a Table, path: &str, key: &str) -> Option<&'a str> {
        let full = join(path, key);
        match t.get(key)? {
            Value::String(s) => Some(s),
            _ => {
                self.err(&full, format!("{full} must be a string"));
                None
            }
        }
    }

    fn bool(&mut self, t: &Table, path: &str, key: &str) -> Option<bool> {
        let full = join(path, key);
        match t.get(key)? {
            Value::Boolean(b) => Some(*b),
            _ => {
                self.err(&full, format!("{full} must be true or false"));
                None
            }
        }
    }

    fn reals<const N: usize>(&mut self, t: &Table, path: &str, key: &str) -> Option<[f64; N]> {
        let full = join(path, key);
        let v = t.get(key)?;
        let parsed = match v {
            Value::Array(a) if a.len() == N => a
                .iter()
                .map(|x| match x {
                    Value::Float(f) => Some(*f),
                    Value::Integer(i) => Some(*i as f64),
                    _ => None,
                })
                .collect::<Option<Vec<f64>>>(),
            _ => None,
        };
        match parsed {
            Some(p) => Some(p.try_into().expect("length checked")),
            None => {
                self.err(&full, format!("{full} must be an array of {N} numbers"));
                None
            }
        }
    }

    fn required<T>(&mut self, value: Option<T>, t: &Table, path: &str, key: &str) -> Option<T> {
        if value.is_none() && !t.contains_key(key) {
            let full = join(path, key);
            self.err(path, format!("missing required key \"{full}\""));
        }
        value
    }

    fn resolve(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn strip_indices(path: &str) -> String {
    let mut out = String::new();
    let mut depth = 0;
    for c in path.chars() {
        match c {
            '[' => depth += 1,
            ']' => depth -= 1,
            _ if depth == 0 => out.push(c),
            _ => {}
        }
    }
    out
}

/// Parses `free_surface | absorbing | clamped | gamma:a,b,c`.
pub fn parse_boundary(s: &str) -> Result<DomainBoundary, String> {
    match s.trim() {
        "free_surface" => Ok(DomainBoundary::free_surface()),
        "absorbing" => Ok(DomainBoundary::absorbing()),
        "clamped" => Ok(DomainBoundary::clamped()),
        other => {
            let Some(list) = other.strip_prefix("gamma:") else {
                return Err(format!(
                    "unknown boundary condition \"{other}\"; expected free_surface, absorbing, clamped or gamma:<a>,<b>,<c>"
                ));
            };
            let vals: Vec<f64> = list
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| format!("gamma needs three reals, got \"{list}\""))?;
            let g: [f64; 3] = vals
                .try_into()
                .map_err(|_| format!("gamma needs three reals, got \"{list}\""))?;
            BoundarySpec::new(g)
                .map(|b| DomainBoundary::Condition(BoundaryTreatment::Riemann(b)))
                .map_err(|e| e.to_string())
        }
    }
}

pub fn boundary_name(b: &DomainBoundary) -> Option<String> {
    match b {
        DomainBoundary::Condition(BoundaryTreatment::Riemann(s)) => {
            let g = s.gamma();
            Some(match g {
                [1.0, 1.0, 1.0] => "free_surface".into(),
                [0.0, 0.0, 0.0] => "absorbing".into(),
                [-1.0, -1.0, -1.0] => "clamped".into(),
                _ => format!("gamma:{},{},{}", num(g[0]), num(g[1]), num(g[2])),
            })
        }
        _ => None,
    }
}

fn parse_material(ctx: &mut Ctx, t: &Table, path: &str, extra: &[&str]) -> Option<Material> {
    let mut allowed: Vec<&str> = MATERIAL_KEYS.to_vec();
    allowed.push("c66");
    allowed.extend_from_slice(extra);
    ctx.check_keys(path, t, &allowed);
    let kind = ctx.string(t, path, "kind").unwrap_or("isotropic");
    let rho = ctx.f64(t, path, "rho");
    let rho = ctx.required(rho, t, path, "rho")?;
    let result = match kind {
        "isotropic" => {
            let speeds = (ctx.f64(t, path, "cp"), ctx.f64(t, path, "cs"));
            let lame = (ctx.f64(t, path, "lambda"), ctx.f64(t, path, "mu"));
            if let Some(k) = ORTHO_KEYS.iter().find(|k| t.contains_key(**k)) {
                ctx.err(&join(path, k), format!("{} applies only to kind = \"orthotropic\"", join(path, k)));
                return None;
            }
            match (speeds, lame) {
                ((Some(cp), Some(cs)), (None, None)) => elastodg::material::isotropic_from_speeds(rho, cp, cs),
                ((None, None), (Some(l), Some(m))) => Material::isotropic(rho, l, m),
                _ => {
                    ctx.err(path, format!("{path} needs either cp and cs or lambda and mu"));
                    return None;
                }
            }
        }
        "orthotropic" => {
            let mut c = [0.0; 9];
            let mut ok = true;
            for (i, k) in ORTHO_KEYS.iter().enumerate() {
                let v = ctx.f64(t, path, k);
                match ctx.required(v, t, path, k) {
                    Some(v) => c[i] = v,
                    None => ok = false,
                }
            }
            for k in ["cp", "cs", "lambda", "mu"] {
                if t.contains_key(k) {
                    ctx.err(&join(path, k), format!("{} applies only to kind = \"isotropic\"", join(path, k)));
                    ok = false;
                }
            }
            if !ok {
                return None;
            }
            Material::orthotropic(
                rho,
                Orthotropic {
                    c11: c[0],
                    c12: c[1],
                    c13: c[2],
                    c22: c[3],
                    c23: c[4],
                    c33: c[5],
                    c44: c[6],
                    c55: c[7],
                    c66: c[8],
                },
            )
        }
        other => {
            ctx.err(
                &join(path, "kind"),
                format!("{path}.kind \"{other}\" is not isotropic or orthotropic"),
            );
            return None;
        }
    };
    match result {
        Ok(m) => Some(m),
        Err(e) => {
            ctx.err(path, format!("{path}: {e}"));
            None
        }
    }
}

fn parse_time_function(ctx: &mut Ctx, t: &Table, path: &str) -> Option<TimeFunction> {
    let name = ctx.string(t, path, "time_function");
    let name = ctx.required(name, t, path, "time_function")?;
    let tf = match name {
        "loh1" => {
            let period = ctx.f64(t, path, "T");
            TimeFunction::Loh1 {
                t: ctx.required(period, t, path, "T")?,
            }
        }
        "ricker" | "gauss_cosine" => {
            let f0 = ctx.f64(t, path, "f0");
            let t0 = ctx.f64(t, path, "t0");
            let f0 = ctx.required(f0, t, path, "f0");
            let t0 = ctx.required(t0, t, path, "t0");
            let (f0, t0) = (f0?, t0?);
            if name == "ricker" {
                TimeFunction::Ricker { f0, t0 }
            } else {
                TimeFunction::GaussCosine { f0, t0 }
            }
        }
        other => {
            ctx.err(
                &join(path, "time_function"),
                format!("{path}.time_function \"{other}\" is not loh1, ricker or gauss_cosine"),
            );
            return None;
        }
    };
    let unused: &[&str] = match tf {
        TimeFunction::Loh1 { .. } => &["f0", "t0"],
        _ => &["T"],
    };
    for k in unused {
        if t.contains_key(*k) {
            ctx.err(&join(path, k), format!("{} does not apply to time_function = \"{name}\"", join(path, k)));
        }
    }
    if let Err(e) = tf.validate() {
        ctx.err(path, format!("{path}: {e}"));
        return None;
    }
    Some(tf)
}

fn parse_source(ctx: &mut Ctx, t: &Table, path: &str) -> Option<PointSource> {
    ctx.check_keys(path, t, &["type", "location", "M", "force", "time_function", "T", "f0", "t0"]);
    let kind = ctx.string(t, path, "type");
    let kind = ctx.required(kind, t, path, "type");
    let location = ctx.reals::<3>(t, path, "location");
    let location = ctx.required(location, t, path, "location");
    let tf = parse_time_function(ctx, t, path);
    let kind = match kind? {
        "moment" => {
            if t.contains_key("force") {
                ctx.err(&join(path, "force"), format!("{path}.force does not apply to a moment source"));
            }
            let m = ctx.reals::<6>(t, path, "M");
            let m = ctx.required(m, t, path, "M")?;
            SourceKind::Moment([[m[0], m[3], m[4]], [m[3], m[1], m[5]], [m[4], m[5], m[2]]])
        }
        "force" => {
            if t.contains_key("M") {
                ctx.err(&join(path, "M"), format!("{path}.M does not apply to a force source"));
            }
            let f = ctx.reals::<3>(t, path, "force");
            SourceKind::Force(ctx.required(f, t, path, "force")?)
        }
        other => {
            ctx.err(&join(path, "type"), format!("{path}.type \"{other}\" is not moment or force"));
            return None;
        }
    };
    Some(PointSource {
        kind,
        location: location?,
        time: tf?,
    })
}

fn array_of_tables<'a>(ctx: &mut Ctx, root: &'a Table, key: &str) -> Option<Vec<&'a Table>> {
    match root.get(key)? {
        Value::Array(items) => {
            let mut out = Vec::new();
            for (i, it) in items.iter().enumerate() {
                match it {
                    Value::Table(t) => out.push(t),
                    _ => ctx.err(&format!("{key}[{i}]"), format!("{key} entries must be tables ([[{key}]])")),
                }
            }
            Some(out)
        }
        _ => {
            ctx.err(key, format!("{key} must be an array of tables ([[{key}]])"));
            None
        }
    }
}

fn skeleton() -> Scenario {
    Scenario {
        name: "run".into(),
        degree: 0,
        nodes: NodeKind::Gll,
        mesh: MeshSpec::cube([0; 3], Domain::unit(), DomainBoundary::free_surface()),
        material: MaterialModel::Uniform(
            elastodg::material::isotropic_from_speeds(1.0, 2.0, 1.0).expect("valid medium"),
        ),
        sources: Vec::new(),
        receivers: Vec::new(),
        time: TimeSpec::default(),
        energy_every: 10,
        track_interfaces: false,
    }
}

/// Reads and validates a configuration file. Relative paths inside it are
/// resolved against the file's directory.
pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        origin: path.to_path_buf(),
        issues: vec![Issue {
            line: None,
            message: format!("cannot read configuration: {e}"),
        }],
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    parse_str(&text, path, &base, stem.as_deref())
}

/// Parses configuration text. `origin` names the source in messages.
pub fn parse_str(text: &str, origin: &Path, base_dir: &Path, default_name: Option<&str>) -> Result<RunConfig, ConfigError> {
    let fail = |issues: Vec<Issue>| ConfigError {
        origin: origin.to_path_buf(),
        issues,
    };
    let root: Table = match text.parse() {
        Ok(t) => t,
        Err(e) => {
            let e: toml::de::Error = e;
            return Err(fail(vec![Issue {
                line: e.span().map(|s| line_of(text, s.start)),
                message: format!("syntax error: {}", e.message()),
            }]));
        }
    };
    let mut ctx = Ctx {
        lines: index_spans(text),
        issues: Vec::new(),
        base_dir: base_dir.to_path_buf(),
    };
    let cfg = build(&mut ctx, &root, default_name);
    match cfg {
        Some(c) if ctx.issues.is_empty() => Ok(c),
        _ => {
            let mut issues = ctx.issues;
            if issues.is_empty() {
                issues.push(Issue {
                    line: None,
                    message: "invalid configuration".into(),
                });
            }
            issues.sort_by_key(|i| i.line.unwrap_or(0));
            Err(fail(issues))
        }
    }
}

fn build(ctx: &mut Ctx, root: &Table, default_name: Option<&str>) -> Option<RunConfig> {
    const TOP: [&str; 11] = [
        "name", "preset", "solver", "mesh", "boundary", "material", "layers", "time", "sources", "receivers", "output",
    ];
    ctx.check_keys("", root, &TOP);
    let preset = ctx.string(root, "", "preset").map(str::to_string);
    let mut s = match &preset {
        Some(p) => match scenario::preset(p) {
            Ok(s) => s,
            Err(e) => {
                ctx.err("preset", e.to_string().trim_start_matches("configuration error: ").to_string());
                return None;
            }
        },
        None => {
            let mut s = skeleton();
            if let Some(n) = default_name {
                s.name = n.to_string();
            }
            s
        }
    };
    let have_preset = preset.is_some();
    if let Some(n) = ctx.string(root, "", "name") {
        s.name = n.to_string();
    }

    let empty = Table::new();
    let solver = ctx.table(root, "solver").unwrap_or(&empty);
    ctx.check_keys("solver", solver, &["degree", "nodes", "threads"]);
    let degree = ctx.usize(solver, "solver", "degree");
    let degree = if have_preset { degree } else { ctx.required(degree, solver, "solver", "degree") };
    match degree {
        Some(p) if (1..=elastodg::specops::MAX_DEGREE).contains(&p) => s.degree = p,
        Some(p) => ctx.err(
            "solver.degree",
            format!("solver.degree = {p} is outside 1..={}", elastodg::specops::MAX_DEGREE),
        ),
        None => {}
    }
    if let Some(n) = ctx.string(solver, "solver", "nodes") {
        match n.parse::<NodeKind>() {
            Ok(k) => s.nodes = k,
            Err(e) => ctx.err("solver.nodes", format!("solver.nodes: {e}")),
        }
    }
    let threads = match ctx.usize(solver, "solver", "threads") {
        Some(0) => {
            ctx.err("solver.threads", "solver.threads must be at least 1");
            None
        }
        t => t,
    };

    let mut topography = if have_preset {
        match s.mesh.topography {
            Topography::Flat => TopographySource::Flat,
            _ => TopographySource::Preset,
        }
    } else {
        TopographySource::Flat
    };
    match ctx.table(root, "mesh") {
        Some(m) => {
            ctx.check_keys("mesh", m, &["nx", "ny", "nz", "domain", "topography_file"]);
            for (i, k) in ["nx", "ny", "nz"].iter().enumerate() {
                let v = ctx.usize(m, "mesh", k);
                let v = if have_preset { v } else { ctx.required(v, m, "mesh", k) };
                match v {
                    Some(0) => ctx.err(&join("mesh", k), format!("mesh.{k} must be at least 1")),
                    Some(n) => s.mesh.dims[i] = n,
                    None => {}
                }
            }
            let d = ctx.reals::<6>(m, "mesh", "domain");
            let d = if have_preset { d } else { ctx.required(d, m, "mesh", "domain") };
            if let Some(d) = d {
                match Domain::new([d[0], d[1], d[2]], [d[3], d[4], d[5]]) {
                    Ok(dom) => s.mesh.domain = dom,
                    Err(e) => ctx.err("mesh.domain", format!("mesh.domain: {e}")),
                }
            }
            if let Some(f) = ctx.string(m, "mesh", "topography_file") {
                let path = ctx.resolve(f);
                match std::fs::File::open(&path) {
                    Ok(file) => match ingest_topography(std::io::BufReader::new(file)) {
                        Ok(surface) => {
                            let path = path.canonicalize().unwrap_or(path);
                            s.mesh.topography = Topography::Grid(surface.clone());
                            topography = TopographySource::File(path, surface);
                        }
                        Err(e) => ctx.err("mesh.topography_file", format!("{}: {e}", path.display())),
                    },
                    Err(e) => ctx.err(
                        "mesh.topography_file",
                        format!("topography file {} cannot be opened: {e}", path.display()),
                    ),
                }
            }
        }
        None if !have_preset => ctx.err("", "missing required section [mesh]"),
        None => {}
    }

    match ctx.table(root, "boundary") {
        Some(b) => {
            ctx.check_keys("boundary", b, &["all", "x_min", "x_max", "y_min", "y_max", "z_min", "z_max"]);
            let mut set = [have_preset; 6];
            if let Some(all) = ctx.string(b, "boundary", "all") {
                match parse_boundary(all) {
                    Ok(bc) => {
                        s.mesh.boundaries = [bc; 6];
                        set = [true; 6];
                    }
                    Err(e) => ctx.err("boundary.all", format!("boundary.all: {e}")),
                }
            }
            for (i, k) in FACE_KEYS.iter().enumerate() {
                if let Some(v) = ctx.string(b, "boundary", k) {
                    match parse_boundary(v) {
                        Ok(bc) => {
                            s.mesh.boundaries[i] = bc;
                            set[i] = true;
                        }
                        Err(e) => ctx.err(&join("boundary", k), format!("boundary.{k}: {e}")),
                    }
                } else if !set[i] && !b.contains_key("all") {
                    ctx.err("boundary", format!("missing required key \"boundary.{k}\" (or boundary.all)"));
                }
            }
        }
        None if !have_preset => ctx.err("", "missing required section [boundary]"),
        None => {}
    }

    let material = ctx.table(root, "material");
    let layers = array_of_tables(ctx, root, "layers");
    match (material, layers) {
        (Some(_), Some(_)) => ctx.err("layers", "give either [material] or [[layers]], not both"),
        (Some(m), None) => {
            if let Some(mat) = parse_material(ctx, m, "material", &[]) {
                s.material = MaterialModel::Uniform(mat);
            }
        }
        (None, Some(ls)) => {
            let mut out = Vec::new();
            for (i, t) in ls.iter().enumerate() {
                let path = format!("layers[{i}]");
                let top = ctx.f64(t, &path, "top");
                let top = ctx.required(top, t, &path, "top");
                let bottom = ctx.f64(t, &path, "bottom").unwrap_or(f64::INFINITY);
                let mat = parse_material(ctx, t, &path, &["top", "bottom"]);
                if let (Some(top), Some(material)) = (top, mat) {
                    out.push(Layer { top, bottom, material });
                }
            }
            if out.is_empty() {
                ctx.err("layers", "[[layers]] needs at least one layer");
            } else {
                s.material = MaterialModel::Layered(out);
            }
        }
        (None, None) if !have_preset => ctx.err("", "missing required section [material] or [[layers]]"),
        (None, None) => {}
    }

    match ctx.table(root, "time") {
        Some(t) => {
            ctx.check_keys("time", t, &["t_end", "cfl", "max_steps"]);
            let te = ctx.f64(t, "time", "t_end");
            let te = if have_preset { te } else { ctx.required(te, t, "time", "t_end") };
            if let Some(v) = te {
                s.time.t_end = v;
            }
            if let Some(v) = ctx.f64(t, "time", "cfl") {
                s.time.cfl = v;
            }
            if let Some(v) = ctx.usize(t, "time", "max_steps") {
                s.time.max_steps = Some(v);
            }
        }
        None if !have_preset => ctx.err("", "missing required section [time]"),
        None => {}
    }

    if let Some(list) = array_of_tables(ctx, root, "sources") {
        s.sources = list
            .iter()
            .enumerate()
            .filter_map(|(i, t)| parse_source(ctx, t, &format!("sources[{i}]")))
            .collect();
    }
    if let Some(list) = array_of_tables(ctx, root, "receivers") {
        let mut out = Vec::new();
        for (i, t) in list.iter().enumerate() {
            let path = format!("receivers[{i}]");
            ctx.check_keys(&path, t, &["name", "location", "interval"]);
            let name = ctx.string(t, &path, "name").map(str::to_string).unwrap_or(format!("r{}", i + 1));
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
                ctx.err(&join(&path, "name"), format!("{path}.name \"{name}\" must be non-empty ASCII letters, digits, '-', '_' or '.'"));
            }
            let loc = ctx.reals::<3>(t, &path, "location");
            let interval = ctx.f64(t, &path, "interval");
            if let Some(location) = ctx.required(loc, t, &path, "location") {
                out.push(ReceiverSpec { name, location, interval });
            }
        }
        s.receivers = out;
    }

    let mut output = OutputConfig {
        directory: ctx.resolve("output"),
        snapshot_every: None,
    };
    if let Some(o) = ctx.table(root, "output") {
        ctx.check_keys("output", o, &["directory", "energy_every", "snapshot_every", "track_interfaces"]);
        if let Some(d) = ctx.string(o, "output", "directory") {
            output.directory = ctx.resolve(d);
        }
        if let Some(e) = ctx.usize(o, "output", "energy_every") {
            s.energy_every = e;
        }
        match ctx.usize(o, "output", "snapshot_every") {
            Some(0) | None => {}
            Some(n) => output.snapshot_every = Some(n),
        }
        if let Some(b) = ctx.bool(o, "output", "track_interfaces") {
            s.track_interfaces = b;
        }
    }

    if ctx.issues.is_empty() {
        if let Err(e) = s.validate() {
            let msg = e.to_string();
            ctx.err("", msg.trim_start_matches("configuration error: ").to_string());
        }
    }
    Some(RunConfig {
        scenario: s,
        preset,
        topography,
        threads,
        output,
    })
}

/// Shortest decimal that parses back to the same `f64`, valid as TOML.
pub fn num(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:?}");
    if s.contains(['.', 'e', 'n']) {
        s
    } else {
        format!("{s}.0")
    }
}

fn toml_str(s: &str) -> String {
    Value::String(s.to_string()).to_string()
}

fn reals(xs: &[f64]) -> String {
    format!("[{}]", xs.iter().map(|x| num(*x)).collect::<Vec<_>>().join(", "))
}

fn write_material(out: &mut String, m: &Material) {
    match m.kind {
        MaterialKind::Isotropic { lambda, mu } => {
            let _ = writeln!(out, "kind = \"isotropic\"\nrho = {}\nlambda = {}\nmu = {}", num(m.rho), num(lambda), num(mu));
        }
        MaterialKind::Orthotropic(o) => {
            let _ = writeln!(out, "kind = \"orthotropic\"\nrho = {}", num(m.rho));
            let c = [o.c11, o.c12, o.c13, o.c22, o.c23, o.c33, o.c44, o.c55, o.c66];
            for (k, v) in ORTHO_KEYS.iter().zip(c) {
                let _ = writeln!(out, "{k} = {}", num(v));
            }
        }
    }
}

impl RunConfig {
    /// Canonical TOML text that parses back to an equal configuration.
    pub fn to_toml(&self) -> String {
        let s = &self.scenario;
        let mut out = String::new();
        let _ = writeln!(out, "name = {}", toml_str(&s.name));
        if let Some(p) = &self.preset {
            let _ = writeln!(out, "preset = {}", toml_str(p));
        }
        let _ = writeln!(out, "\n[solver]\ndegree = {}\nnodes = \"{}\"", s.degree, s.nodes.name());
        if let Some(t) = self.threads {
            let _ = writeln!(out, "threads = {t}");
        }
        let d = &s.mesh.domain;
        let _ = writeln!(
            out,
            "\n[mesh]\nnx = {}\nny = {}\nnz = {}\ndomain = {}",
            s.mesh.dims[0],
            s.mesh.dims[1],
            s.mesh.dims[2],
            reals(&[d.min[0], d.min[1], d.min[2], d.max[0], d.max[1], d.max[2]])
        );
        if let TopographySource::File(p, _) = &self.topography {
            let _ = writeln!(out, "topography_file = {}", toml_str(&p.to_string_lossy()));
        }
        let _ = writeln!(out, "\n[boundary]");
        for (k, b) in FACE_KEYS.iter().zip(&s.mesh.boundaries) {
            let name = boundary_name(b).unwrap_or_else(|| "unsupported".into());
            let _ = writeln!(out, "{k} = \"{name}\"");
        }
        match &s.material {
            MaterialModel::Uniform(m) => {
                let _ = writeln!(out, "\n[material]");
                write_material(&mut out, m);
            }
            MaterialModel::Layered(ls) => {
                for l in ls {
                    let _ = writeln!(out, "\n[[layers]]\ntop = {}\nbottom = {}", num(l.top), num(l.bottom));
                    write_material(&mut out, &l.material);
                }
            }
        }
        let _ = writeln!(out, "\n[time]\nt_end = {}\ncfl = {}", num(s.time.t_end), num(s.time.cfl));
        if let Some(m) = s.time.max_steps {
            let _ = writeln!(out, "max_steps = {m}");
        }
        for src in &s.sources {
            let _ = writeln!(out, "\n[[sources]]");
            match src.kind {
                SourceKind::Moment(m) => {
                    let _ = writeln!(
                        out,
                        "type = \"moment\"\nM = {}",
                        reals(&[m[0][0], m[1][1], m[2][2], m[0][1], m[0][2], m[1][2]])
                    );
                }
                SourceKind::Force(f) => {
                    let _ = writeln!(out, "type = \"force\"\nforce = {}", reals(&f));
                }
            }
            let _ = writeln!(out, "location = {}", reals(&src.location));
            let _ = match src.time {
                TimeFunction::Loh1 { t } => writeln!(out, "time_function = \"loh1\"\nT = {}", num(t)),
                TimeFunction::Ricker { f0, t0 } => {
                    writeln!(out, "time_function = \"ricker\"\nf0 = {}\nt0 = {}", num(f0), num(t0))
                }
                TimeFunction::GaussCosine { f0, t0 } => {
                    writeln!(out, "time_function = \"gauss_cosine\"\nf0 = {}\nt0 = {}", num(f0), num(t0))
                }
            };
        }
        for r in &s.receivers {
            let _ = writeln!(out, "\n[[receivers]]\nname = {}\nlocation = {}", toml_str(&r.name), reals(&r.location));
            if let Some(i) = r.interval {
                let _ = writeln!(out, "interval = {}", num(i));
            }
        }
        let _ = writeln!(
            out,
            "\n[output]\ndirectory = {}\nenergy_every = {}\ntrack_interfaces = {}",
            toml_str(&self.output.directory.to_string_lossy()),
            s.energy_every,
            s.track_interfaces
        );
        if let Some(n) = self.output.snapshot_every {
            let _ = writeln!(out, "snapshot_every = {n}");
        }
        out
    }
}
