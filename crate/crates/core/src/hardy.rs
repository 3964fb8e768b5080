//! Discrete Hardy-Poincare constants: the smallest eigenvalue of the pencil
//! `(A, M_rho)` with `A` the Dirichlet form and `M_rho` the `rho^-2` weighted mass.

use std::fmt::{self, Write as _};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domains::{make_domain, DomainSpec, Factor, Weight};
use crate::error::{Error, Result};
use crate::fem::solve::{cg, SkylineCholesky, CHOLESKY_MAX_DOF};
use crate::fem::{apply_bc, assemble, AssemblyOptions, BoundaryData, Csr, FEFunction, FESpace};
use crate::geometry::Point;
use crate::mesh::{deepen, grade_mesh, refine, Grading, Mesh};
use crate::metric::CoefficientField;

/// Cap on inner solves.
pub const MAX_OUTER_ITERATIONS: usize = 500;

#[derive(Clone, Debug)]
pub struct HardyResult {
    pub lambda_min: f64,
    /// Normalized so that `int rho^-2 u^2 = 1`.
    pub eigenfunction: FEFunction,
    pub iterations: usize,
    /// `|A u - lambda M u| / |M u|`.
    pub residual: f64,
    pub level: usize,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

enum Inverse {
    Direct(SkylineCholesky),
    Iterative(Csr),
}

impl Inverse {
    fn new(a: &Csr) -> Result<Inverse> {
        if a.n <= CHOLESKY_MAX_DOF {
            Ok(Inverse::Direct(SkylineCholesky::factor(a)?))
        } else {
            Ok(Inverse::Iterative(a.clone()))
        }
    }

    fn apply(&self, b: &[f64]) -> Result<Vec<f64>> {
        match self {
            Inverse::Direct(c) => Ok(c.solve(b)),
            Inverse::Iterative(a) => Ok(cg(a, b, 1e-13)?.0),
        }
    }
}

/// Krylov dimension of one restart cycle.
const KRYLOV_DIM: usize = 24;

fn m_dot(m: &Csr, x: &[f64], y: &[f64]) -> f64 {
    m.bilinear(x, y)
}

/// Smallest eigenpair of `A x = lambda M x` by zero-shift inverse iteration,
/// accelerated with Rayleigh-Ritz on the restarted Krylov space of `A^-1 M`.
/// Returns `(lambda, x, solves, residual)` with `x^T M x = 1`.
pub fn smallest_eigenpair(a: &Csr, m: &Csr, tol: f64) -> Result<(f64, Vec<f64>, usize, f64)> {
    let n = a.n;
    if n == 0 {
        return Err(Error::InvalidParameter("empty eigenproblem".into()));
    }
    if m.diagonal().iter().any(|&d| !(d > 0.0)) {
        return Err(Error::IndefiniteMass);
    }
    let inverse = Inverse::new(a)?;
    let dim = KRYLOV_DIM.min(n);
    let mut x = vec![1.0; n];
    let mut solves = 0;
    let mut residual = f64::INFINITY;
    while solves < MAX_OUTER_ITERATIONS {
        let nx = m_dot(m, &x, &x).sqrt();
        if !(nx > 0.0) {
            return Err(Error::IndefiniteMass);
        }
        let mut basis = vec![x.iter().map(|v| v / nx).collect::<Vec<f64>>()];
        while basis.len() < dim && solves < MAX_OUTER_ITERATIONS {
            let mut w = inverse.apply(&m.matvec(basis.last().unwrap()))?;
            solves += 1;
            let start = m_dot(m, &w, &w).sqrt();
            for _ in 0..2 {
                for v in &basis {
                    let c = m_dot(m, v, &w);
                    w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= c * vi);
                }
            }
            let nw = m_dot(m, &w, &w).sqrt();
            if !(nw > 1e-10 * start) {
                break;
            }
            w.iter_mut().for_each(|v| *v /= nw);
            basis.push(w);
        }
        let k = basis.len();
        let av: Vec<Vec<f64>> = basis.iter().map(|v| a.matvec(v)).collect();
        let t = nalgebra::DMatrix::from_fn(k, k, |i, j| {
            0.5 * (crate::geometry::compensated_sum(basis[i].iter().zip(&av[j]).map(|(p, q)| p * q))
                + crate::geometry::compensated_sum(basis[j].iter().zip(&av[i]).map(|(p, q)| p * q)))
        });
        let eig = t.symmetric_eigen();
        let (imin, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
        let y = eig.eigenvectors.column(imin);
        x = vec![0.0; n];
        for (j, v) in basis.iter().enumerate() {
            x.iter_mut().zip(v).for_each(|(xi, vi)| *xi += y[j] * vi);
        }
        let nx = m_dot(m, &x, &x).sqrt();
        x.iter_mut().for_each(|v| *v /= nx);
        let ax = a.matvec(&x);
        let mx = m.matvec(&x);
        let lambda = crate::geometry::compensated_sum(ax.iter().zip(&x).map(|(p, q)| p * q));
        let r: Vec<f64> = ax.iter().zip(&mx).map(|(p, q)| p - lambda * q).collect();
        residual = norm(&r) / norm(&mx);
        if residual <= tol {
            if x.iter().sum::<f64>() < 0.0 {
                x.iter_mut().for_each(|v| *v = -*v);
            }
            return Ok((lambda, x, solves, residual));
        }
    }
    Err(Error::EigenNonConvergence {
        iterations: solves,
        residual,
    })
}

/// Centers where `rho^-2` times a function vanishing linearly is not integrable.
fn non_integrable_centers(rho: &Weight) -> Vec<Point> {
    rho.factors
        .iter()
        .filter_map(|f| match *f {
            Factor::RadialPower { center, exponent } | Factor::MollifiedDistancePower { center, exponent, .. }
                if exponent >= 2.0 =>
            {
                Some(center)
            }
            Factor::ExponentialCusp { center, scale, .. } if scale > 0.0 => Some(center),
            _ => None,
        })
        .collect()
}

/// Dofs of elements touching such a center: no nonzero function in their span has
/// finite weighted mass, so they are held at zero.
fn non_integrable_dofs(space: &FESpace, rho: &Weight) -> Vec<bool> {
    let centers = non_integrable_centers(rho);
    let mut fixed = vec![false; space.scalar_dofs()];
    for (t, tri) in space.mesh.triangles.iter().enumerate() {
        if tri.iter().any(|&v| centers.contains(&space.mesh.vertices[v])) {
            for &dof in &space.element_dofs[t] {
                fixed[dof] = true;
            }
        }
    }
    fixed
}

/// Best discrete constant `C` in `int |grad u|^2 >= C int rho^-2 u^2` over the
/// space with its Dirichlet constraints.
pub fn hardy_constant(
    space: &Arc<FESpace>,
    rho: &Weight,
    tol: f64,
    opts: &AssemblyOptions,
    level: usize,
) -> Result<HardyResult> {
    if !space.dirichlet.iter().any(|&b| b) {
        return Err(Error::InvalidParameter(
            "Hardy probe needs a nonempty Dirichlet boundary".into(),
        ));
    }
    let sys = assemble(space, &CoefficientField::identity(), Some(rho), None, &[], opts)?;
    let fixed = non_integrable_dofs(space, rho);
    let cs = apply_bc(
        &sys,
        BoundaryData {
            fixed: Some(&fixed),
            ..Default::default()
        },
    )?;
    let mw = cs.restrict(sys.mw.as_ref().expect("weighted mass assembled"));
    let (lambda_min, x, iterations, residual) = smallest_eigenpair(&cs.a, &mw, tol)?;
    Ok(HardyResult {
        lambda_min,
        eigenfunction: FEFunction {
            space: Arc::clone(space),
            coeffs: cs.expand(&x),
        },
        iterations,
        residual,
        level,
    })
}

/// P1 Dirichlet eigenvalue of `-u'' = lambda u` on the unit interval with `n` interior nodes.
pub fn interval_constant(n: usize, tol: f64) -> Result<f64> {
    let h = 1.0 / (n + 1) as f64;
    let mut ta = Vec::new();
    let mut tm = Vec::new();
    for i in 0..n {
        ta.push((i, i, 2.0 / h));
        tm.push((i, i, 4.0 * h / 6.0));
        if i + 1 < n {
            for (r, c) in [(i, i + 1), (i + 1, i)] {
                ta.push((r, c, -1.0 / h));
                tm.push((r, c, h / 6.0));
            }
        }
    }
    let (lambda, ..) = smallest_eigenpair(&Csr::from_triplets(n, &ta), &Csr::from_triplets(n, &tm), tol)?;
    Ok(lambda)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Holds,
    Fails,
    Inconclusive,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Holds => "HOLDS",
            Classification::Fails => "FAILS",
            Classification::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Largest relative change over the last two levels counted as stabilized.
    pub stable: f64,
    /// Consecutive-level ratio below which the constant is decaying.
    pub decay: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            stable: 0.05,
            decay: 0.75,
        }
    }
}

/// HOLDS when the last relative change is below `stable`, FAILS when the last two
/// consecutive ratios are both below `decay`.
pub fn classify(values: &[f64], th: &Thresholds) -> Classification {
    let n = values.len();
    if n < 2 {
        return Classification::Inconclusive;
    }
    let (a, b) = (values[n - 2], values[n - 1]);
    if ((b - a) / a).abs() < th.stable {
        return Classification::Holds;
    }
    if n >= 3 && values[n - 2] / values[n - 3] < th.decay && b / a < th.decay {
        return Classification::Fails;
    }
    Classification::Inconclusive
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LevelRule {
    /// One more geometric layer per level (nested for geometric sector meshes).
    Deepen,
    Refine,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrichotomyConfig {
    /// Template and boundary tags; its exponent is replaced by each entry of `lambdas`.
    pub domain: DomainSpec,
    pub lambdas: Vec<f64>,
    pub levels: usize,
    pub grading: Grading,
    pub rule: LevelRule,
    pub degree: usize,
    pub tol: f64,
    pub thresholds: Thresholds,
    pub assembly: AssemblyOptions,
}

impl TrichotomyConfig {
    pub fn new(domain: DomainSpec, lambdas: Vec<f64>, levels: usize) -> Self {
        TrichotomyConfig {
            domain,
            lambdas,
            levels,
            grading: Grading::new(0.35, 0.0).with_layers(4),
            rule: LevelRule::Deepen,
            degree: 1,
            tol: 1e-8,
            thresholds: Thresholds::default(),
            assembly: AssemblyOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrichotomyRow {
    pub template: String,
    pub lambda: f64,
    pub level: usize,
    pub dof: usize,
    pub lambda_min: f64,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrichotomySeries {
    pub lambda: f64,
    pub rows: Vec<TrichotomyRow>,
    pub classification: Classification,
    /// `lambda_min` ratios between consecutive levels.
    pub ratios: Vec<f64>,
}

fn level_meshes(cfg: &TrichotomyConfig, spec: &DomainSpec) -> Result<Vec<Mesh>> {
    let d = make_domain(spec)?;
    let mut meshes = vec![grade_mesh(&d, &cfg.grading)?];
    for _ in 1..cfg.levels {
        let last = meshes.last().unwrap();
        meshes.push(match cfg.rule {
            LevelRule::Deepen => deepen(last)?,
            LevelRule::Refine => refine(last)?,
        });
    }
    Ok(meshes)
}

fn run_series(cfg: &TrichotomyConfig, lambda: f64) -> Result<TrichotomySeries> {
    let spec = cfg.domain.clone().with_lambda(lambda);
    let d = make_domain(&spec)?;
    let rho = d.rho(true);
    let mut rows = Vec::with_capacity(cfg.levels);
    for (level, mesh) in level_meshes(cfg, &spec)?.into_iter().enumerate() {
        let space = FESpace::new(Arc::new(mesh), cfg.degree)?;
        let r = hardy_constant(&space, &rho, cfg.tol, &cfg.assembly, level)?;
        rows.push(TrichotomyRow {
            template: d.template().name().to_string(),
            lambda,
            level,
            dof: space.ndof(),
            lambda_min: r.lambda_min,
            iterations: r.iterations,
            residual: r.residual,
        });
    }
    let values: Vec<f64> = rows.iter().map(|r| r.lambda_min).collect();
    Ok(TrichotomySeries {
        lambda,
        classification: classify(&values, &cfg.thresholds),
        ratios: values.windows(2).map(|w| w[1] / w[0]).collect(),
        rows,
    })
}

/// Hardy constants across levels for every exponent, one parallel job per exponent.
pub fn hardy_trichotomy(cfg: &TrichotomyConfig) -> Result<Vec<TrichotomySeries>> {
    if cfg.levels < 2 {
        return Err(Error::InvalidParameter("trichotomy needs at least 2 levels".into()));
    }
    cfg.lambdas.par_iter().map(|&l| run_series(cfg, l)).collect()
}

pub fn trichotomy_csv(series: &[TrichotomySeries]) -> String {
    let mut out = String::from("template,lambda,level,dof,lambda_min,classification\n");
    for s in series {
        for r in &s.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.12e},{}",
                r.template, r.lambda, r.level, r.dof, r.lambda_min, s.classification
            );
        }
    }
    out
}
