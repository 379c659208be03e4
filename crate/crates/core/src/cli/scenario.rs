//! Scenario files: JSON description of a connection, a mapping and run
//! settings, validated in one pass that reports every problem found.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agmap::{AgmapError, Generator, MappingInstance};
use crate::audit::{ReadingOverrides, Tolerances};
use crate::curvature::CurvatureMode;
use crate::expr::ExprAst;
use crate::space::{parse_key, ConnectionField, Kind};
use crate::tensor::{Bounds, Dense, DiffMode, Grid, TensorField};

pub const MAX_DIM: usize = 8;
pub const DEFAULT_FD_STEP: f64 = 1e-4;
pub const DEFAULT_PATH_STEPS: usize = 512;
pub const DEFAULT_PATH_TOL: f64 = 1e-6;

/// On-disk form. Every block except `n` is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<u8>,
    /// `"i,j,k"` (one-based) to expression; absent components are zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connection: Option<BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<InstanceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<ToleranceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curvature_mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readings: Option<ReadingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths: Option<Vec<PathSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
}

/// Explicit mapping data; absent fields are zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    #[serde(default)]
    pub e: i8,
    /// Rows indexed by the upper index.
    #[serde(rename = "F", default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub e: i8,
    #[serde(rename = "F0")]
    pub f0: Vec<Vec<f64>>,
    pub p: Vec<String>,
    pub q: Vec<String>,
    pub sigma: Vec<String>,
    pub psi: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<[f64; 2]>>,
}

/// Overrides for the active differentiation mode.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algebraic: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivative: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadingSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairing: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contraction: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_hat: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ricci_trace: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weyl_trace: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSpec {
    pub x0: Vec<f64>,
    pub l0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

/// A validated path request.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRequest {
    pub x0: Vec<f64>,
    pub l0: Vec<f64>,
    pub t_end: f64,
    pub steps: usize,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Explicit,
    Generated,
}

/// A fully validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    /// SHA-256 of the file bytes, lowercase hex.
    pub digest: String,
    pub source: Source,
    pub connection: ConnectionField<f64>,
    pub instance: MappingInstance<f64>,
    pub grid: Grid<f64>,
    pub fd_step: f64,
    pub tolerances: ToleranceSpec,
    pub curvature: CurvatureMode,
    pub readings: ReadingOverrides,
    pub paths: Vec<PathRequest>,
    pub points: Vec<Vec<f64>>,
}

impl Scenario {
    pub fn dim(&self) -> usize {
        self.connection.dim()
    }

    pub fn mode(&self, fd: bool, step: Option<f64>) -> DiffMode<f64> {
        if fd {
            DiffMode::Fd(step.unwrap_or(self.fd_step))
        } else {
            DiffMode::Exact
        }
    }

    /// Default tolerances with the scenario overrides applied to `mode`.
    pub fn tolerances_for(&self, mode: DiffMode<f64>) -> Tolerances<f64> {
        let mut t = Tolerances::default();
        let exact = mode.is_exact();
        if let Some(a) = self.tolerances.algebraic {
            *(if exact { &mut t.algebraic_exact } else { &mut t.algebraic_fd }) = a;
        }
        if let Some(d) = self.tolerances.derivative {
            *(if exact { &mut t.derivative_exact } else { &mut t.derivative_fd }) = d;
        }
        t
    }
}

/// One validation problem, located by a field path such as
/// `generator.p[2]` or `connection["1,2,3"]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed scenario at {field}: {message}")]
    Syntax { field: String, message: String },
    #[error("invalid scenario:\n{}", list(.0))]
    Invalid(Vec<Issue>),
}

fn list(issues: &[Issue]) -> String {
    issues.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n")
}

impl LoadError {
    pub fn issues(&self) -> &[Issue] {
        match self {
            LoadError::Invalid(v) => v,
            _ => &[],
        }
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, LoadError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&bytes)
}

pub fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn parse_scenario(bytes: &[u8]) -> Result<Scenario, LoadError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|err| LoadError::Syntax {
        field: err.path().to_string(),
        message: err.inner().to_string(),
    })?;
    validate(file, digest(bytes))
}

struct Issues(Vec<Issue>);

impl Issues {
    fn push(&mut self, field: impl Into<String>, message: impl fmt::Display) {
        self.0.push(Issue {
            field: field.into(),
            message: message.to_string(),
        });
    }

    fn expr(&mut self, field: String, text: &str, n: usize) -> ExprAst<f64> {
        match ExprAst::parse(text, n) {
            Ok(e) => e,
            Err(err) => {
                self.push(field, err);
                ExprAst::zero()
            }
        }
    }

    fn covector(&mut self, field: &str, texts: Option<&Vec<String>>, n: usize) -> TensorField<f64> {
        let Some(texts) = texts else {
            return TensorField::zeros(n, 0, 1);
        };
        if texts.len() != n {
            self.push(field, format!("expected {n} components, got {}", texts.len()));
            return TensorField::zeros(n, 0, 1);
        }
        let comps = texts
            .iter()
            .enumerate()
            .map(|(i, t)| self.expr(format!("{field}[{i}]"), t, n))
            .collect();
        TensorField::new(n, 0, 1, comps).expect("component count checked")
    }

    fn affinor(&mut self, field: &str, rows: Option<&Vec<Vec<String>>>, n: usize) -> TensorField<f64> {
        let Some(rows) = rows else {
            return TensorField::zeros(n, 1, 1);
        };
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            self.push(field, format!("expected a {n}x{n} matrix"));
            return TensorField::zeros(n, 1, 1);
        }
        let comps = rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, t)| (i, j, t)))
            .map(|(i, j, t)| self.expr(format!("{field}[{i}][{j}]"), t, n))
            .collect();
        TensorField::new(n, 1, 1, comps).expect("component count checked")
    }

    fn positive(&mut self, field: &str, v: Option<f64>) {
        if let Some(v) = v {
            if !(v.is_finite() && v > 0.0) {
                self.push(field, format!("must be a positive finite number, got {v}"));
            }
        }
    }

    fn reading<R: FromStr<Err = String>>(&mut self, field: &str, v: &Option<String>) -> Option<R> {
        let text = v.as_ref()?;
        match text.parse() {
            Ok(r) => Some(r),
            Err(msg) => {
                self.push(field, msg);
                None
            }
        }
    }
}

fn validate(file: ScenarioFile, digest: String) -> Result<Scenario, LoadError> {
    let mut issues = Issues(Vec::new());
    let n = file.n;
    if !(2..=MAX_DIM).contains(&n) {
        issues.push("n", format!("dimension must be between 2 and {MAX_DIM}, got {n}"));
        return Err(LoadError::Invalid(issues.0));
    }
    let theta = match file.theta.unwrap_or(1) {
        1 => Kind::First,
        2 => Kind::Second,
        t => {
            issues.push("theta", format!("must be 1 or 2, got {t}"));
            Kind::First
        }
    };

    let explicit = file.connection.is_some() || file.instance.is_some();
    let (source, connection, instance) = match (&file.generator, explicit) {
        (Some(_), true) => {
            issues.push("generator", "cannot be combined with connection/instance");
            (Source::Generated, ConnectionField::zero(n), MappingInstance::zero(n))
        }
        (None, false) => {
            issues.push("connection", "either an explicit connection or a generator block is required");
            (Source::Explicit, ConnectionField::zero(n), MappingInstance::zero(n))
        }
        (None, true) => {
            let (l, inst) = explicit_pair(&mut issues, &file, n, theta);
            (Source::Explicit, l, inst)
        }
        (Some(g), false) => {
            if theta != Kind::First {
                issues.push("theta", "the generator family is constructed for theta = 1");
            }
            let (l, inst) = generated_pair(&mut issues, g, n);
            (Source::Generated, l, inst)
        }
    };

    let grid_spec = file.grid.clone().unwrap_or_default();
    let count = grid_spec.count.unwrap_or(Grid::<f64>::DEFAULT_COUNT);
    if count == 0 {
        issues.push("grid.count", "must be at least 1");
    }
    let bounds: Bounds<f64> = match &grid_spec.bounds {
        None => Grid::default_bounds(n),
        Some(b) => {
            if b.len() != n {
                issues.push("grid.bounds", format!("expected {n} intervals, got {}", b.len()));
            }
            for (i, [lo, hi]) in b.iter().enumerate() {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    issues.push(format!("grid.bounds[{i}]"), format!("need lo < hi, got [{lo}, {hi}]"));
                }
            }
            b.iter().map(|[lo, hi]| (*lo, *hi)).collect()
        }
    };

    issues.positive("fd_step", file.fd_step);
    let tolerances = file.tolerances.clone().unwrap_or_default();
    issues.positive("tolerances.algebraic", tolerances.algebraic);
    issues.positive("tolerances.derivative", tolerances.derivative);

    let curvature = match &file.curvature_mode {
        None => CurvatureMode::Paper,
        Some(s) => s.parse().unwrap_or_else(|msg: String| {
            issues.push("curvature_mode", msg);
            CurvatureMode::Paper
        }),
    };

    let r = file.readings.clone().unwrap_or_default();
    let readings = ReadingOverrides {
        pairing: issues.reading("readings.pairing", &r.pairing),
        contraction: issues.reading("readings.contraction", &r.contraction),
        rho: issues.reading("readings.rho", &r.rho),
        nu_hat: issues.reading("readings.nu_hat", &r.nu_hat),
        ricci_trace: issues.reading("readings.ricci_trace", &r.ricci_trace),
        weyl_trace: issues.reading("readings.weyl_trace", &r.weyl_trace),
    };

    let mut paths = Vec::new();
    for (k, p) in file.paths.iter().flatten().enumerate() {
        let field = format!("paths[{k}]");
        if p.x0.len() != n {
            issues.push(format!("{field}.x0"), format!("expected {n} coordinates, got {}", p.x0.len()));
        }
        if p.l0.len() != n {
            issues.push(format!("{field}.l0"), format!("expected {n} components, got {}", p.l0.len()));
        } else if p.l0.iter().all(|v| *v == 0.0) {
            issues.push(format!("{field}.l0"), "initial tangent must be nonzero");
        }
        let steps = p.steps.unwrap_or(DEFAULT_PATH_STEPS);
        if steps < 16 {
            issues.push(format!("{field}.steps"), format!("at least 16 steps are required, got {steps}"));
        }
        issues.positive(&format!("{field}.t_end"), p.t_end);
        issues.positive(&format!("{field}.tolerance"), p.tolerance);
        paths.push(PathRequest {
            x0: p.x0.clone(),
            l0: p.l0.clone(),
            t_end: p.t_end.unwrap_or(1.0),
            steps,
            tolerance: p.tolerance.unwrap_or(DEFAULT_PATH_TOL),
        });
    }

    let points = file.points.clone().unwrap_or_default();
    for (k, p) in points.iter().enumerate() {
        if p.len() != n {
            issues.push(format!("points[{k}]"), format!("expected {n} coordinates, got {}", p.len()));
        }
    }

    if !issues.0.is_empty() {
        return Err(LoadError::Invalid(issues.0));
    }
    let grid = Grid::generate(grid_spec.seed.unwrap_or(0), count, bounds);
    Ok(Scenario {
        fd_step: file.fd_step.unwrap_or(DEFAULT_FD_STEP),
        file,
        digest,
        source,
        connection,
        instance,
        grid,
        tolerances,
        curvature,
        readings,
        paths,
        points,
    })
}

fn explicit_pair(
    issues: &mut Issues,
    file: &ScenarioFile,
    n: usize,
    theta: Kind,
) -> (ConnectionField<f64>, MappingInstance<f64>) {
    let mut comps = vec![ExprAst::zero(); n * n * n];
    for (key, text) in file.connection.iter().flatten() {
        let field = format!("connection[\"{key}\"]");
        match parse_key(key, n, 3) {
            Ok(ix) => comps[(ix[0] * n + ix[1]) * n + ix[2]] = issues.expr(field, text, n),
            Err(err) => issues.push(field, err),
        }
    }
    let l = ConnectionField::new(TensorField::new(n, 1, 2, comps).expect("component count"))
        .expect("valence 1,2");
    let spec = file.instance.clone().unwrap_or_default();
    if !(-1..=1).contains(&spec.e) {
        issues.push("instance.e", format!("must be -1, 0 or 1, got {}", spec.e));
    }
    let f = issues.affinor("instance.F", spec.f.as_ref(), n);
    let psi = issues.covector("instance.psi", spec.psi.as_ref(), n);
    let sigma = issues.covector("instance.sigma", spec.sigma.as_ref(), n);
    let mu = issues.covector("instance.mu", spec.mu.as_ref(), n);
    let nu = issues.covector("instance.nu", spec.nu.as_ref(), n);
    let inst = MappingInstance::new(psi, sigma, f, mu, nu, spec.e.clamp(-1, 1), theta).expect("shapes checked");
    (l, inst)
}

fn generated_pair(issues: &mut Issues, g: &GeneratorSpec, n: usize) -> (ConnectionField<f64>, MappingInstance<f64>) {
    let fallback = (ConnectionField::zero(n), MappingInstance::zero(n));
    let before = issues.0.len();
    if g.f0.len() != n || g.f0.iter().any(|r| r.len() != n) {
        issues.push("generator.F0", format!("expected a {n}x{n} matrix"));
    }
    let p = issues.covector("generator.p", Some(&g.p), n);
    let q = issues.covector("generator.q", Some(&g.q), n);
    let sigma = issues.covector("generator.sigma", Some(&g.sigma), n);
    let psi = issues.covector("generator.psi", Some(&g.psi), n);
    if issues.0.len() > before {
        return fallback;
    }
    let gen = Generator {
        e: g.e,
        f0: Dense::from_fn(n, 2, |ix| g.f0[ix[0]][ix[1]]),
        p,
        q,
        sigma,
        psi,
    };
    let violations = gen.violations();
    for v in &violations {
        let field = match v {
            AgmapError::BadE(_) | AgmapError::Parity(_) => "generator.e",
            AgmapError::Affinor { .. } => "generator.F0",
            _ => "generator",
        };
        issues.push(field, v);
    }
    if !violations.is_empty() {
        return fallback;
    }
    match gen.build() {
        Ok(pair) => pair,
        Err(err) => {
            issues.push("generator", err);
            fallback
        }
    }
}

/// Explicit form of a scenario: the generator block replaced by the
/// connection and instance it produces.
pub fn materialize(s: &Scenario) -> ScenarioFile {
    let n = s.dim();
    let text = |e: &ExprAst<f64>| e.to_string();
    let coeffs = s.connection.coeffs();
    let mut connection = BTreeMap::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let e = coeffs.comp(&[i, j, k]);
                if !e.is_zero() {
                    connection.insert(format!("{},{},{}", i + 1, j + 1, k + 1), text(e));
                }
            }
        }
    }
    let inst = &s.instance;
    let cov = |t: &TensorField<f64>| Some((0..n).map(|i| text(t.comp(&[i]))).collect());
    let instance = InstanceSpec {
        e: inst.e,
        f: Some((0..n).map(|i| (0..n).map(|j| text(inst.f.comp(&[i, j]))).collect()).collect()),
        psi: cov(&inst.psi),
        sigma: cov(&inst.sigma),
        mu: cov(&inst.mu),
        nu: cov(&inst.nu),
    };
    ScenarioFile {
        theta: Some(inst.theta.index()),
        connection: Some(connection),
        instance: Some(instance),
        generator: None,
        ..s.file.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<Scenario, LoadError> {
        parse_scenario(text.as_bytes())
    }

    #[test]
    fn minimal_zero_scenario() {
        let s = load(r#"{"n": 2, "connection": {}}"#).unwrap();
        assert_eq!(s.source, Source::Explicit);
        assert_eq!(s.grid.len(), 50);
        assert!(s.connection.coeffs().components().iter().all(|c| c.is_zero()));
    }

    #[test]
    fn out_of_range_coordinate_names_the_field() {
        let err = load(r#"{"n": 2, "connection": {"1,1,2": "x3"}}"#).unwrap_err();
        assert_eq!(err.issues()[0].field, "connection[\"1,1,2\"]");
    }

    #[test]
    fn issues_are_exhaustive() {
        let err = load(
            r#"{"n": 2, "theta": 3, "connection": {"1,1,3": "x1", "2,2,2": "x1 +"},
                "instance": {"e": 4, "psi": ["x1"]}, "curvature_mode": "odd",
                "readings": {"rho": "maybe"}, "points": [[0.1]]}"#,
        )
        .unwrap_err();
        let fields: Vec<&str> = err.issues().iter().map(|i| i.field.as_str()).collect();
        for f in [
            "theta",
            "connection[\"1,1,3\"]",
            "connection[\"2,2,2\"]",
            "instance.e",
            "instance.psi",
            "curvature_mode",
            "readings.rho",
            "points[0]",
        ] {
            assert!(fields.contains(&f), "{f} missing from {fields:?}");
        }
    }

    #[test]
    fn structural_errors_carry_a_path() {
        match load(r#"{"n": 2, "grid": {"count": "many"}}"#).unwrap_err() {
            LoadError::Syntax { field, .. } => assert_eq!(field, "grid.count"),
            other => panic!("{other}"),
        }
        assert!(matches!(load(r#"{"n": 2, "conection": {}}"#), Err(LoadError::Syntax { .. })));
    }

    #[test]
    fn exactly_one_source() {
        assert!(load(r#"{"n": 2}"#).is_err());
        let both = r#"{"n": 2, "connection": {}, "generator": {"e": 1, "F0": [[1,0],[0,1]],
            "p": ["0","0"], "q": ["0","0"], "sigma": ["0","0"], "psi": ["0","0"]}}"#;
        assert_eq!(load(both).unwrap_err().issues()[0].field, "generator");
    }

    #[test]
    fn generator_checks_the_affinor() {
        let bad = r#"{"n": 2, "generator": {"e": 1, "F0": [[1,1],[0,1]],
            "p": ["0","0"], "q": ["0","0"], "sigma": ["0","0"], "psi": ["0","0"]}}"#;
        assert_eq!(load(bad).unwrap_err().issues()[0].field, "generator.F0");
        let odd = r#"{"n": 3, "generator": {"e": -1, "F0": [[0,1,0],[-1,0,0],[0,0,1]],
            "p": ["0","0","0"], "q": ["0","0","0"], "sigma": ["0","0","0"], "psi": ["0","0","0"]}}"#;
        assert!(load(odd).unwrap_err().issues().iter().any(|i| i.field == "generator.e"));
    }

    #[test]
    fn materialized_scenario_reloads_to_the_same_fields() {
        let s = load(
            r#"{"n": 2, "generator": {"e": 1, "F0": [[1,0],[0,-1]],
            "p": ["x2","0.5"], "q": ["x1*x2","0"], "sigma": ["1","x1"], "psi": ["x2","0"]}}"#,
        )
        .unwrap();
        let text = serde_json::to_string(&materialize(&s)).unwrap();
        let t = load(&text).unwrap();
        assert_eq!(t.source, Source::Explicit);
        let x = [0.3, -0.4];
        assert_eq!(s.connection.eval(&x), t.connection.eval(&x));
        assert_eq!(s.instance.mu.eval(&x), t.instance.mu.eval(&x));
        assert_eq!(s.instance.nu.eval(&x), t.instance.nu.eval(&x));
    }
}
