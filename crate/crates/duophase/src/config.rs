//! Line-oriented `section.key = value` problem configs.
//!
//! Unknown keys are rejected so typos fail fast. Expression values are
//! quoted: `problem.p1 = expr "2 + x/2"`. Every key has a default, so an
//! empty file describes the default 1D power-kernel problem on [0, 1].

use crate::energy::ProblemSpec;
use crate::error::{Error, Result};
use crate::exponent::{Domain, ExponentField, PowerPair};
use crate::expr::Expression;
use crate::kernels::Kernel;
use crate::mesh::{GridFunction, Mesh};
use crate::solver::QuotientConfig;
use crate::weights::WeightFamily;
use std::collections::BTreeMap;
use std::sync::Arc;

/// `const <v>` or `expr "<grammar over x, y>"`.
#[derive(Debug, Clone)]
pub enum FieldSpec {
    Const(f64),
    Expr(Expression),
}

impl FieldSpec {
    fn parse(raw: &str, context: &str) -> Result<Self> {
        let raw = raw.trim();
        if let Some(rest) = raw.strip_prefix("const") {
            let v: f64 = rest
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{context}: bad constant `{rest}`")))?;
            return Ok(FieldSpec::Const(v));
        }
        if let Some(rest) = raw.strip_prefix("expr") {
            let body = unquote(rest.trim())
                .ok_or_else(|| Error::Config(format!("{context}: expr value must be quoted")))?;
            return Ok(FieldSpec::Expr(Expression::parse(&body)?));
        }
        Err(Error::Config(format!(
            "{context}: expected `const <v>` or `expr \"...\"`, got `{raw}`"
        )))
    }

    fn exponent_field(&self, domain: Domain) -> Result<ExponentField> {
        match self {
            FieldSpec::Const(v) => ExponentField::constant(domain, *v),
            FieldSpec::Expr(e) => {
                let e = e.clone();
                ExponentField::new(domain, move |p| e.eval(p[0], p[1], 0.0))
            }
        }
    }

    fn grid_function(&self, mesh: &Arc<Mesh>) -> Result<GridFunction> {
        match self {
            FieldSpec::Const(v) => {
                let v = *v;
                mesh.interpolate(|_| v)
            }
            FieldSpec::Expr(e) => mesh.interpolate(|p| e.eval(p[0], p[1], 0.0)),
        }
    }
}

#[derive(Debug, Clone)]
pub enum KernelChoice {
    Power,
    MeanCurvature,
    Capillarity,
    Expr(Expression),
}

impl KernelChoice {
    fn parse(raw: &str, context: &str) -> Result<Self> {
        let raw = raw.trim();
        match raw {
            "power" => Ok(KernelChoice::Power),
            "mean_curvature" => Ok(KernelChoice::MeanCurvature),
            "capillarity" => Ok(KernelChoice::Capillarity),
            other => {
                if let Some(rest) = other.strip_prefix("expr") {
                    let body = unquote(rest.trim()).ok_or_else(|| {
                        Error::Config(format!("{context}: expr kernel must be quoted"))
                    })?;
                    Ok(KernelChoice::Expr(Expression::parse(&body)?))
                } else {
                    Err(Error::Config(format!(
                        "{context}: unknown kernel `{other}` (power, mean_curvature, capillarity, expr \"...\")"
                    )))
                }
            }
        }
    }

    fn kernel(&self, exponent: ExponentField) -> Kernel {
        match self {
            KernelChoice::Power => Kernel::power(exponent),
            KernelChoice::MeanCurvature => Kernel::mean_curvature(exponent),
            KernelChoice::Capillarity => Kernel::capillarity(exponent),
            KernelChoice::Expr(e) => Kernel::from_expression(exponent, e.clone()),
        }
    }
}

/// Parsed and resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub domain: Domain,
    pub mesh: (usize, usize),
    pub p1: FieldSpec,
    pub p2: FieldSpec,
    pub p3: FieldSpec,
    pub r: f64,
    pub s: f64,
    pub phi: KernelChoice,
    pub psi: KernelChoice,
    pub theta: KernelChoice,
    pub weight: FieldSpec,
    pub solver: QuotientConfig,
    resolved: BTreeMap<String, String>,
}

fn unquote(raw: &str) -> Option<String> {
    let raw = raw.trim();
    if raw.len() >= 2 && raw.starts_with('"') && raw.ends_with('"') {
        Some(raw[1..raw.len() - 1].to_string())
    } else {
        None
    }
}

/// Strip a trailing comment, respecting a quoted segment.
fn strip_comment(line: &str) -> &str {
    let mut in_quotes = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quotes = !in_quotes,
            '#' if !in_quotes => return &line[..i],
            _ => {}
        }
    }
    line
}

const KNOWN_KEYS: &[&str] = &[
    "problem.domain",
    "problem.mesh",
    "problem.p1",
    "problem.p2",
    "problem.p3",
    "problem.r",
    "problem.s",
    "problem.phi",
    "problem.psi",
    "problem.theta",
    "problem.weight",
    "solver.seed",
    "solver.restarts",
    "solver.max_iterations",
    "solver.initial_step",
    "solver.armijo_factor",
    "solver.sufficient_decrease",
    "solver.quotient_change_tol",
    "solver.stall_iterations",
    "solver.residual_stop_tol",
    "solver.residual_tolerance",
    "solver.nontriviality_floor",
];

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = strip_comment(raw_line).trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected `section.key = value`, got `{line}`",
                    lineno + 1
                )));
            };
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::Config(format!(
                    "line {}: unknown key `{key}`",
                    lineno + 1
                )));
            }
            if entries
                .insert(key.clone(), value.trim().to_string())
                .is_some()
            {
                return Err(Error::Config(format!(
                    "line {}: duplicate key `{key}`",
                    lineno + 1
                )));
            }
        }
        Self::from_entries(entries)
    }

    pub fn parse_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn from_entries(entries: BTreeMap<String, String>) -> Result<Self> {
        let get = |key: &str, default: &str| -> String {
            entries
                .get(key)
                .cloned()
                .unwrap_or_else(|| default.to_string())
        };
        let num = |key: &str, default: &str| -> Result<f64> {
            get(key, default)
                .parse()
                .map_err(|_| Error::Config(format!("{key}: not a number")))
        };
        let int = |key: &str, default: &str| -> Result<u64> {
            get(key, default)
                .parse()
                .map_err(|_| Error::Config(format!("{key}: not an integer")))
        };

        let domain_raw = get("problem.domain", "interval 0 1");
        let parts: Vec<&str> = domain_raw.split_whitespace().collect();
        let domain = match parts.as_slice() {
            ["interval", a, b] => Domain::interval(
                a.parse().map_err(|_| Error::Config("bad interval bound".into()))?,
                b.parse().map_err(|_| Error::Config("bad interval bound".into()))?,
            )?,
            ["rectangle", ax, bx, ay, by] => {
                let p = |s: &&str| -> Result<f64> {
                    s.parse()
                        .map_err(|_| Error::Config("bad rectangle bound".into()))
                };
                Domain::rectangle(p(ax)?, p(bx)?, p(ay)?, p(by)?)?
            }
            _ => {
                return Err(Error::Config(format!(
                    "problem.domain: expected `interval a b` or `rectangle ax bx ay by`, got `{domain_raw}`"
                )))
            }
        };

        let default_mesh = match domain.dimension() {
            1 => "256".to_string(),
            _ => "64 64".to_string(),
        };
        let mesh_raw = get("problem.mesh", &default_mesh);
        let mesh = parse_mesh_spec(&mesh_raw, domain.dimension())?;

        let r = num("problem.r", "3")?;
        let s = num("problem.s", "4")?;

        let mut resolved = BTreeMap::new();
        resolved.insert("problem.domain".into(), domain_raw.clone());
        resolved.insert(
            "problem.mesh".into(),
            if domain.dimension() == 1 {
                format!("{}", mesh.0)
            } else {
                format!("{} {}", mesh.0, mesh.1)
            },
        );
        for key in KNOWN_KEYS {
            if *key == "problem.domain" || *key == "problem.mesh" {
                continue;
            }
            let default = match *key {
                "problem.p1" => "const 2",
                "problem.p2" => "const 5",
                "problem.p3" => "const 3.5",
                "problem.r" => "3",
                "problem.s" => "4",
                "problem.phi" | "problem.psi" | "problem.theta" => "power",
                "problem.weight" => "const 0",
                "solver.seed" => "42",
                "solver.restarts" => "8",
                "solver.max_iterations" => "20000",
                "solver.initial_step" => "1.0",
                "solver.armijo_factor" => "0.5",
                "solver.sufficient_decrease" => "1e-4",
                "solver.quotient_change_tol" => "1e-10",
                "solver.stall_iterations" => "5",
                "solver.residual_stop_tol" => "1e-8",
                "solver.residual_tolerance" => "1e-6",
                "solver.nontriviality_floor" => "1e-6",
                _ => "",
            };
            resolved.insert((*key).into(), get(key, default));
        }

        let solver = QuotientConfig {
            initial_step: num("solver.initial_step", "1.0")?,
            armijo_factor: num("solver.armijo_factor", "0.5")?,
            sufficient_decrease: num("solver.sufficient_decrease", "1e-4")?,
            max_iterations: int("solver.max_iterations", "20000")? as usize,
            restarts: int("solver.restarts", "8")? as usize,
            seed: int("solver.seed", "42")?,
            quotient_change_tol: num("solver.quotient_change_tol", "1e-10")?,
            stall_iterations: int("solver.stall_iterations", "5")? as usize,
            residual_stop_tol: num("solver.residual_stop_tol", "1e-8")?,
            residual_tolerance: num("solver.residual_tolerance", "1e-6")?,
            nontriviality_floor: num("solver.nontriviality_floor", "1e-6")?,
        };

        Ok(RunConfig {
            domain,
            mesh,
            p1: FieldSpec::parse(&get("problem.p1", "const 2"), "problem.p1")?,
            p2: FieldSpec::parse(&get("problem.p2", "const 5"), "problem.p2")?,
            p3: FieldSpec::parse(&get("problem.p3", "const 3.5"), "problem.p3")?,
            r,
            s,
            phi: KernelChoice::parse(&get("problem.phi", "power"), "problem.phi")?,
            psi: KernelChoice::parse(&get("problem.psi", "power"), "problem.psi")?,
            theta: KernelChoice::parse(&get("problem.theta", "power"), "problem.theta")?,
            weight: FieldSpec::parse(&get("problem.weight", "const 0"), "problem.weight")?,
            solver,
            resolved,
        })
    }

    /// Override the per-axis element counts (CLI `--mesh`).
    pub fn override_mesh(&mut self, raw: &str) -> Result<()> {
        self.mesh = parse_mesh_spec(raw, self.domain.dimension())?;
        self.resolved.insert(
            "problem.mesh".into(),
            if self.domain.dimension() == 1 {
                format!("{}", self.mesh.0)
            } else {
                format!("{} {}", self.mesh.0, self.mesh.1)
            },
        );
        Ok(())
    }

    /// Override the solver seed (CLI `--seed`).
    pub fn override_seed(&mut self, seed: u64) {
        self.solver.seed = seed;
        self.resolved.insert("solver.seed".into(), seed.to_string());
    }

    /// Build the mesh and problem instance.
    pub fn build(&self) -> Result<(ProblemSpec, QuotientConfig)> {
        let mesh = match self.domain {
            Domain::Interval { a, b } => Mesh::interval(a, b, self.mesh.0)?,
            Domain::Rectangle { x, y } => {
                Mesh::rectangle(x.0, x.1, y.0, y.1, self.mesh.0, self.mesh.1)?
            }
        };
        let spec = ProblemSpec::new(
            Arc::clone(&mesh),
            self.phi.kernel(self.p1.exponent_field(self.domain)?),
            self.psi.kernel(self.p2.exponent_field(self.domain)?),
            self.theta.kernel(self.p3.exponent_field(self.domain)?),
            self.weight.grid_function(&mesh)?,
            PowerPair::new(self.r, self.s)?,
        )?;
        Ok((spec, self.solver.clone().validated()?))
    }

    /// The resolved `key = value` lines echoed into run manifests.
    pub fn manifest(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.resolved {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

fn parse_mesh_spec(raw: &str, dimension: usize) -> Result<(usize, usize)> {
    let cleaned = raw.replace(',', " ");
    let parts: Vec<&str> = cleaned.split_whitespace().collect();
    let parse_one = |s: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::Config(format!("bad mesh size `{s}`")))
    };
    match (dimension, parts.as_slice()) {
        (1, [n]) => Ok((parse_one(n)?, 0)),
        (2, [n]) => {
            let n = parse_one(n)?;
            Ok((n, n))
        }
        (2, [n, m]) => Ok((parse_one(n)?, parse_one(m)?)),
        _ => Err(Error::Config(format!(
            "problem.mesh: expected `n` (1D) or `n m` (2D), got `{raw}`"
        ))),
    }
}

/// Parse a weight-family file: one `name = const <v>` or `name = expr "..."`
/// per line, interpolated onto the given mesh.
pub fn parse_weight_family(text: &str, mesh: &Arc<Mesh>) -> Result<WeightFamily> {
    let mut entries = Vec::new();
    for (lineno, raw_line) in text.lines().enumerate() {
        let line = strip_comment(raw_line).trim();
        if line.is_empty() {
            continue;
        }
        let Some((name, value)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "weights line {}: expected `name = const|expr ...`",
                lineno + 1
            )));
        };
        let name = name.trim().to_string();
        if name.is_empty() {
            return Err(Error::Config(format!(
                "weights line {}: empty weight name",
                lineno + 1
            )));
        }
        let spec = FieldSpec::parse(value, &format!("weight `{name}`"))?;
        entries.push((name, spec.grid_function(mesh)?));
    }
    WeightFamily::new(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_default_problem() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg.mesh, (256, 0));
        assert_eq!(cfg.r, 3.0);
        assert_eq!(cfg.s, 4.0);
        assert_eq!(cfg.solver.seed, 42);
        let (spec, _) = cfg.build().unwrap();
        assert!(spec.validate().passed());
        assert_eq!(spec.mesh().n_elements(), 256);
    }

    #[test]
    fn parses_sections_comments_and_expressions() {
        let text = r#"
# a 2D problem
problem.domain = rectangle 0 1 0 2
problem.mesh = 8 6
problem.p1 = expr "2 + x / 2"   # variable exponent
problem.weight = expr "sin(3 * x) * y"
solver.seed = 7
"#;
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.mesh, (8, 6));
        assert_eq!(cfg.solver.seed, 7);
        let (spec, solver) = cfg.build().unwrap();
        assert_eq!(solver.seed, 7);
        assert_eq!(spec.mesh().n_elements(), 2 * 8 * 6);
        let manifest = cfg.manifest();
        assert!(manifest.contains("solver.seed = 7"));
        assert!(manifest.contains("problem.p2 = const 5"));
    }

    #[test]
    fn rejects_unknown_and_malformed_keys() {
        assert!(RunConfig::parse("problem.unknown = 3").is_err());
        assert!(RunConfig::parse("problem.p1 = const two").is_err());
        assert!(RunConfig::parse("problem.p1 expr").is_err());
        assert!(RunConfig::parse("problem.domain = triangle 0 1").is_err());
        assert!(RunConfig::parse("problem.p1 = expr 2 + x").is_err()); // unquoted
        assert!(RunConfig::parse("problem.r = 3\nproblem.r = 4").is_err());
    }

    #[test]
    fn mesh_and_seed_overrides() {
        let mut cfg = RunConfig::parse("").unwrap();
        cfg.override_mesh("128").unwrap();
        cfg.override_seed(9);
        assert_eq!(cfg.mesh, (128, 0));
        assert_eq!(cfg.solver.seed, 9);
        assert!(cfg.manifest().contains("problem.mesh = 128"));
    }

    #[test]
    fn expression_kernel_problem_solves_like_its_power_twin() {
        // theta = xi^1.5 is exactly the power kernel with p3 = 3.5; the
        // expression path goes through quadrature densities and the
        // finite-difference derivative fallback
        let text = r#"
problem.mesh = 32
problem.theta = expr "xi ^ 1.5"
problem.weight = expr "0.5 - x"
solver.restarts = 2
"#;
        let cfg = RunConfig::parse(text).unwrap();
        let (spec, solver) = cfg.build().unwrap();
        assert!(spec.theta().derivative_is_approximate());
        assert!(spec.validate().passed());

        let twin = RunConfig::parse(
            "problem.mesh = 32\nproblem.weight = expr \"0.5 - x\"\nsolver.restarts = 2\n",
        )
        .unwrap()
        .build()
        .unwrap()
        .0;
        let u = spec
            .mesh()
            .interpolate(|p| p[0] * (1.0 - p[0]) * (1.0 + p[0]))
            .unwrap();
        let v = twin
            .mesh()
            .interpolate(|p| p[0] * (1.0 - p[0]) * (1.0 + p[0]))
            .unwrap();
        let a = spec.energies(&u).unwrap();
        let b = twin.energies(&v).unwrap();
        assert!((a.theta_value - b.theta_value).abs() <= 1e-9 * b.theta_value.abs().max(1.0));

        let first = crate::solver::minimize_r1(&spec, &solver).unwrap();
        let twin_first = crate::solver::minimize_r1(&twin, &solver).unwrap();
        assert!((first.value - twin_first.value).abs() <= 1e-5 * twin_first.value);
    }

    #[test]
    fn weight_family_file() {
        let mesh = Mesh::interval(0.0, 1.0, 8).unwrap();
        let text = "zero = const 0\nbump = expr \"x * (1 - x)\"  # parabola\n";
        let family = parse_weight_family(text, &mesh).unwrap();
        assert_eq!(family.len(), 2);
        assert!(parse_weight_family("", &mesh).is_err());
        assert!(parse_weight_family("name const 1", &mesh).is_err());
    }
}
