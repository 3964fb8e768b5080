//! Line-oriented experiment configuration: `section.key = value`, `#` comments.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domains::{make_domain, Domain2D, DomainSpec, Template, TrigPoly};
use crate::error::{Error, Result};
use crate::expr;
use crate::fem::{manufactured_problem, AssemblyOptions, SolverKind};
use crate::hardy::{LevelRule, Thresholds};
use crate::mesh::Grading;
use crate::metric::CoefficientField;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Mesh,
    Solve,
    Converge,
    Hardy,
    Stability,
    GeometryCheck,
    NormsCheck,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Mesh => "mesh",
            ExperimentKind::Solve => "solve",
            ExperimentKind::Converge => "converge",
            ExperimentKind::Hardy => "hardy",
            ExperimentKind::Stability => "stability",
            ExperimentKind::GeometryCheck => "geometry-check",
            ExperimentKind::NormsCheck => "norms-check",
        }
    }

    const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Mesh,
        ExperimentKind::Solve,
        ExperimentKind::Converge,
        ExperimentKind::Hardy,
        ExperimentKind::Stability,
        ExperimentKind::GeometryCheck,
        ExperimentKind::NormsCheck,
    ];

    fn default_levels(self) -> usize {
        match self {
            ExperimentKind::Converge | ExperimentKind::NormsCheck => 4,
            ExperimentKind::Hardy => 6,
            ExperimentKind::Stability => 5,
            _ => 1,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment kind '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig {
    pub lambda: f64,
    pub epsilon: f64,
    /// Powers of `f` for the stability sweep.
    pub s: Vec<f64>,
    /// Exponents for the Hardy trichotomy.
    pub lambdas: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshConfig {
    pub grading: Grading,
    pub levels: usize,
    pub rule: LevelRule,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FemConfig {
    pub degree: usize,
    pub solver: SolverKind,
    pub tol: f64,
    pub assembly: AssemblyOptions,
    pub problem: String,
    pub coefficient: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentParams {
    pub seed: u64,
    pub samples: usize,
    /// Innermost sampling radius of the geometry probes.
    pub r_min: f64,
    pub thresholds: Thresholds,
    pub eig_tol: f64,
    /// Number of trailing levels used in rate fits and stability verdicts.
    pub fit_points: usize,
    /// Center (in `log r`) and width of the stability load bump.
    pub bump_center: f64,
    pub bump_width: f64,
    pub epsilons: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub svg: bool,
}

/// Fully resolved configuration; echoed verbatim into every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub domain: DomainSpec,
    pub weight: WeightConfig,
    pub mesh: MeshConfig,
    pub fem: FemConfig,
    pub experiment: ExperimentParams,
    pub output: OutputConfig,
}

const KNOWN_KEYS: &[&str] = &[
    "domain.template",
    "domain.omega",
    "domain.alpha",
    "domain.y0",
    "domain.y1",
    "domain.r_cut",
    "domain.f0",
    "domain.f1",
    "domain.t_max",
    "domain.neumann",
    "weight.lambda",
    "weight.epsilon",
    "weight.s",
    "weight.lambdas",
    "mesh.sigma",
    "mesh.layers",
    "mesh.n",
    "mesh.kappa",
    "mesh.h",
    "mesh.min_angle",
    "mesh.levels",
    "mesh.rule",
    "fem.degree",
    "fem.quadrature",
    "fem.solver",
    "fem.tol",
    "fem.workers",
    "fem.problem",
    "fem.coefficient",
    "experiment.kind",
    "experiment.seed",
    "experiment.samples",
    "experiment.r_min",
    "experiment.stable",
    "experiment.decay",
    "experiment.eig_tol",
    "experiment.fit_points",
    "experiment.bump_center",
    "experiment.bump_width",
    "experiment.epsilons",
    "output.dir",
    "output.svg",
];

/// Raw `key -> (line, value)` entries.
#[derive(Clone, Debug, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (usize, String)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<RawConfig> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {n}: expected 'section.key = value'")))?;
            let (key, value) = (key.trim(), value.trim());
            if !KNOWN_KEYS.contains(&key) {
                return Err(Error::Config(format!("line {n}: unknown key '{key}'")));
            }
            if value.is_empty() {
                return Err(Error::Config(format!("line {n}: empty value for '{key}'")));
            }
            if let Some((first, _)) = entries.insert(key.to_string(), (n, value.to_string())) {
                return Err(Error::Config(format!("line {n}: '{key}' already set on line {first}")));
            }
        }
        Ok(RawConfig { entries })
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), (0, value.to_string()));
    }

    fn line(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.0)
    }

    fn str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.1.as_str())
    }

    fn fail(&self, key: &str, msg: impl fmt::Display) -> Error {
        match self.line(key) {
            0 => Error::Config(format!("{key}: {msg}")),
            n => Error::Config(format!("line {n}: {key}: {msg}")),
        }
    }

    fn num(&self, key: &str) -> Result<Option<f64>> {
        self.str(key)
            .map(|v| expr::eval(v).map_err(|e| self.fail(key, e)))
            .transpose()
    }

    fn num_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.num(key)?.unwrap_or(default))
    }

    fn count(&self, key: &str) -> Result<Option<usize>> {
        self.str(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| self.fail(key, format!("expected a nonnegative integer, got '{v}'")))
            })
            .transpose()
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.str(key)
            .map(|v| {
                v.split(',')
                    .map(|x| expr::eval(x.trim()).map_err(|e| self.fail(key, e)))
                    .collect()
            })
            .transpose()
    }

    fn flag(&self, key: &str, default: bool) -> Result<bool> {
        match self.str(key) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(self.fail(key, format!("expected true or false, got '{v}'"))),
        }
    }

    fn required(&self, key: &str, needed_by: &str) -> Result<f64> {
        self.num(key)?.ok_or_else(|| {
            let by = self.line(needed_by);
            Error::Config(format!(
                "line {by}: {needed_by} = {} requires {key}",
                self.str(needed_by).unwrap_or("")
            ))
        })
    }

    fn domain(&self) -> Result<DomainSpec> {
        let key = "domain.template";
        let name = self
            .str(key)
            .ok_or_else(|| Error::Config("missing required key domain.template".into()))?;
        let template = match name {
            "sector" => Template::Sector {
                omega: self.required("domain.omega", key)?,
            },
            "cusp" => Template::Cusp {
                alpha: self.required("domain.alpha", key)?,
                y0: self.num_or("domain.y0", -1.0)?,
                y1: self.num_or("domain.y1", 1.0)?,
                r_cut: self.num_or("domain.r_cut", 0.0)?,
            },
            "oscillating" => {
                let poly = |k: &str| -> Result<TrigPoly> {
                    let src = self.str(k).ok_or_else(|| {
                        Error::Config(format!("line {}: {key} = oscillating requires {k}", self.line(key)))
                    })?;
                    TrigPoly::parse(src).map_err(|e| self.fail(k, e))
                };
                Template::OscillatingCone {
                    f0: poly("domain.f0")?,
                    f1: poly("domain.f1")?,
                    t_max: self.required("domain.t_max", key)?,
                }
            }
            "circle-cusp" => Template::CircleCusp,
            other => {
                return Err(self.fail(
                    key,
                    format!("unknown template '{other}' (expected sector, cusp, oscillating or circle-cusp)"),
                ))
            }
        };
        let mut spec = DomainSpec::new(template);
        spec.lambda = self.num_or("weight.lambda", 1.0)?;
        spec.epsilon = self.num_or("weight.epsilon", 0.5)?;
        if let Some(list) = self.str("domain.neumann") {
            spec.neumann = list
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect();
        }
        Ok(spec)
    }

    /// Resolves defaults for `kind` and validates every parameter.
    pub fn resolve(&self, kind: ExperimentKind) -> Result<ExperimentConfig> {
        if let Some(k) = self.str("experiment.kind") {
            let declared: ExperimentKind = k.parse().map_err(|e| self.fail("experiment.kind", e))?;
            if declared != kind {
                return Err(self.fail(
                    "experiment.kind",
                    format!("config declares '{declared}' but '{kind}' was requested"),
                ));
            }
        }
        let domain = self.domain()?;
        let d = make_domain(&domain).map_err(|e| self.fail("domain.template", e))?;

        let hardy = kind == ExperimentKind::Hardy;
        let mut grading = if hardy {
            Grading::new(0.35, 0.0).with_layers(4)
        } else {
            Grading::default()
        };
        if let Some(v) = self.num("mesh.sigma")? {
            grading.sigma = v;
        }
        if let Some(v) = self.count("mesh.layers")? {
            grading.layers = Some(v);
        }
        if let Some(v) = self.count("mesh.n")? {
            grading.n = Some(v);
        }
        if let Some(v) = self.num("mesh.kappa")? {
            grading.kappa = v;
        }
        if let Some(v) = self.num("mesh.h")? {
            grading.h = v;
        }
        if let Some(v) = self.num("mesh.min_angle")? {
            grading.min_angle_deg = v;
        }
        grading.validate().map_err(|e| self.fail("mesh.kappa", e))?;
        let levels = self.count("mesh.levels")?.unwrap_or(kind.default_levels());
        if levels == 0 {
            return Err(self.fail("mesh.levels", "must be >= 1"));
        }
        let rule = match self.str("mesh.rule") {
            None if hardy => LevelRule::Deepen,
            None | Some("refine") => LevelRule::Refine,
            Some("deepen") => LevelRule::Deepen,
            Some(v) => return Err(self.fail("mesh.rule", format!("expected refine or deepen, got '{v}'"))),
        };

        let degree = self.count("fem.degree")?.unwrap_or(1);
        if !(1..=2).contains(&degree) {
            return Err(self.fail("fem.degree", format!("must be 1 or 2, got {degree}")));
        }
        let solver = match self.str("fem.solver") {
            None => SolverKind::Auto,
            Some(v) => v.parse().map_err(|e| self.fail("fem.solver", e))?,
        };
        let tol = self.num_or("fem.tol", 1e-10)?;
        if !(tol > 0.0) {
            return Err(self.fail("fem.tol", "must be > 0"));
        }
        let assembly = AssemblyOptions {
            quadrature_degree: self.count("fem.quadrature")?.unwrap_or(4) as u32,
            workers: self.count("fem.workers")?.unwrap_or(0),
            ..AssemblyOptions::default()
        };
        assembly.rules().map_err(|e| self.fail("fem.quadrature", e))?;
        let default_problem = match d.template() {
            Template::Sector { .. } => "corner",
            Template::Cusp { .. } => "cusp-chart",
            _ => "smooth",
        };
        let problem = self.str("fem.problem").unwrap_or(default_problem).to_string();
        manufactured_problem(Some(&d), &problem).map_err(|e| self.fail("fem.problem", e))?;
        let coefficient = self.str("fem.coefficient").unwrap_or("identity").to_string();
        coefficient_by_name(&coefficient).map_err(|e| self.fail("fem.coefficient", e))?;

        let weight = WeightConfig {
            lambda: domain.lambda,
            epsilon: domain.epsilon,
            s: self.list("weight.s")?.unwrap_or_else(|| vec![-0.1, 0.0, 0.1]),
            lambdas: self.list("weight.lambdas")?.unwrap_or_else(|| vec![0.5, 1.0, 1.5]),
        };
        if weight.lambdas.iter().any(|&l| !(l > 0.0)) {
            return Err(self.fail("weight.lambdas", "exponents must be > 0"));
        }

        let thresholds = Thresholds {
            stable: self.num_or("experiment.stable", Thresholds::default().stable)?,
            decay: self.num_or("experiment.decay", Thresholds::default().decay)?,
        };
        let fit_points = self.count("experiment.fit_points")?.unwrap_or(3);
        if fit_points < 3 {
            return Err(self.fail("experiment.fit_points", "rate fits need at least 3 points"));
        }
        if kind == ExperimentKind::Converge && levels < fit_points.max(4) {
            return Err(self.fail(
                "mesh.levels",
                format!(
                    "convergence studies need at least {} levels, got {levels}",
                    fit_points.max(4)
                ),
            ));
        }
        let r_min = self.num_or("experiment.r_min", 1e-6)?;
        if !(r_min > 0.0 && r_min < 1.0) {
            return Err(self.fail("experiment.r_min", "must lie in (0, 1)"));
        }
        let epsilons = self
            .list("experiment.epsilons")?
            .unwrap_or_else(|| (1..=8).map(|k| (-(k as f64)).exp()).collect());
        if epsilons.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return Err(self.fail("experiment.epsilons", "cutoffs must lie in (0, 1)"));
        }
        let experiment = ExperimentParams {
            seed: self.count("experiment.seed")?.unwrap_or(7) as u64,
            samples: self.count("experiment.samples")?.unwrap_or(1000),
            r_min,
            thresholds,
            eig_tol: self.num_or("experiment.eig_tol", 1e-8)?,
            fit_points,
            bump_center: self.num_or("experiment.bump_center", -2.0)?,
            bump_width: self.num_or("experiment.bump_width", 0.5)?,
            epsilons,
        };
        if experiment.samples == 0 {
            return Err(self.fail("experiment.samples", "must be >= 1"));
        }
        if !(experiment.bump_width > 0.0) {
            return Err(self.fail("experiment.bump_width", "must be > 0"));
        }
        let output = OutputConfig {
            dir: PathBuf::from(self.str("output.dir").unwrap_or("out")),
            svg: self.flag("output.svg", true)?,
        };
        Ok(ExperimentConfig {
            kind,
            domain,
            weight,
            mesh: MeshConfig { grading, levels, rule },
            fem: FemConfig {
                degree,
                solver,
                tol,
                assembly,
                problem,
                coefficient,
            },
            experiment,
            output,
        })
    }
}

pub fn coefficient_by_name(name: &str) -> Result<CoefficientField> {
    let catalog = CoefficientField::catalog();
    let names: Vec<&str> = catalog.iter().map(|(n, _)| *n).collect();
    catalog
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, c)| c)
        .ok_or_else(|| Error::Config(format!("unknown coefficient '{name}' (known: {})", names.join(", "))))
}

impl ExperimentConfig {
    pub fn parse(text: &str, kind: ExperimentKind) -> Result<ExperimentConfig> {
        RawConfig::parse(text)?.resolve(kind)
    }

    pub fn domain2d(&self) -> Result<Domain2D> {
        make_domain(&self.domain)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const L_SHAPE: &str = "\
# re-entrant corner
domain.template = sector
domain.omega = 3*pi/2
mesh.h = 0.25
mesh.kappa = 0.5
mesh.levels = 5
";

    #[test]
    fn resolves_defaults() {
        let cfg = ExperimentConfig::parse(L_SHAPE, ExperimentKind::Converge).unwrap();
        assert!((cfg.domain2d().unwrap().singular_points[0].lambda - 1.0).abs() < 1e-15);
        assert_eq!(cfg.mesh.levels, 5);
        assert_eq!(cfg.fem.problem, "corner");
        assert_eq!(cfg.mesh.rule, LevelRule::Refine);
        assert_eq!(cfg.weight.s, vec![-0.1, 0.0, 0.1]);
        let json = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn missing_angle_names_the_template_line() {
        let err = ExperimentConfig::parse("\n\ndomain.template = sector\n", ExperimentKind::Solve).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3") && msg.contains("domain.omega"), "{msg}");
    }

    #[test]
    fn diagnostics_carry_line_numbers() {
        let cases = [
            ("domain.template = sector\ndomain.omega = 1\nmesh.bogus = 2\n", "line 3"),
            ("domain.template = sector\nfoo\n", "line 2"),
            (
                "domain.template = sector\ndomain.omega = 1\ndomain.omega = 2\n",
                "line 3",
            ),
            ("domain.template = sector\ndomain.omega = 1+\n", "line 2"),
            ("domain.template = sector\ndomain.omega = 1\nmesh.kappa = 2\n", "line 3"),
            (
                "domain.template = sector\ndomain.omega = 1\nfem.problem = nope\n",
                "line 3",
            ),
            ("domain.template = sector\ndomain.omega = 7\n", "line 1"),
        ];
        for (text, expected) in cases {
            let msg = ExperimentConfig::parse(text, ExperimentKind::Solve)
                .unwrap_err()
                .to_string();
            assert!(msg.contains(expected), "{text:?} -> {msg}");
        }
    }

    #[test]
    fn declared_kind_must_match() {
        let text = format!("{L_SHAPE}experiment.kind = hardy\n");
        assert!(ExperimentConfig::parse(&text, ExperimentKind::Converge).is_err());
        assert!(ExperimentConfig::parse(&text, ExperimentKind::Hardy).is_ok());
    }

    #[test]
    fn hardy_defaults_use_geometric_layers() {
        let cfg =
            ExperimentConfig::parse("domain.template = sector\ndomain.omega = pi/2\n", ExperimentKind::Hardy).unwrap();
        assert_eq!(cfg.mesh.rule, LevelRule::Deepen);
        assert_eq!(cfg.mesh.grading.kappa, 0.0);
        assert_eq!(cfg.mesh.levels, 6);
    }

    #[test]
    fn oscillating_profiles_parse() {
        let text = "domain.template = oscillating\ndomain.f0 = 0.5 + 0.1*sin(t)\ndomain.f1 = 2 + 0.1*cos(2*t)\ndomain.t_max = 4\n";
        let cfg = ExperimentConfig::parse(text, ExperimentKind::Stability).unwrap();
        assert_eq!(cfg.fem.problem, "smooth");
        assert!(ExperimentConfig::parse(
            "domain.template = oscillating\ndomain.f0 = 1\ndomain.t_max = 4\n",
            ExperimentKind::Stability
        )
        .is_err());
    }
}
