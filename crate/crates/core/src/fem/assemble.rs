use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::solve::{solve_linear, SolveReport, SolverKind};
use super::sparse::Csr;
use super::{barycentric_gradients, element_rule, local_basis, FEFunction, FESpace, Manufactured};
use crate::domains::{BoundaryTag, Weight};
use crate::error::{Error, Result};
use crate::geometry::{compensated_sum, Point};
use crate::metric::CoefficientField;
use crate::quadrature::{gauss_legendre, TriangleRule};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssemblyOptions {
    /// 4 or 6.
    pub quadrature_degree: u32,
    /// Worker threads for element loops; 0 uses all cores.
    pub workers: usize,
    /// Gauss points per direction of the collapsed rule on singular elements.
    pub collapsed_order: usize,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            quadrature_degree: 4,
            workers: 0,
            collapsed_order: 8,
        }
    }
}

impl AssemblyOptions {
    pub fn rules(&self) -> Result<(TriangleRule, [TriangleRule; 3])> {
        if !matches!(self.quadrature_degree, 4 | 6) {
            return Err(Error::InvalidParameter(format!(
                "quadrature degree must be 4 or 6, got {}",
                self.quadrature_degree
            )));
        }
        let n = self.collapsed_order.max(2);
        Ok((
            TriangleRule::for_degree(self.quadrature_degree),
            [
                TriangleRule::collapsed(n, 0),
                TriangleRule::collapsed(n, 1),
                TriangleRule::collapsed(n, 2),
            ],
        ))
    }

    /// Runs `f` inside a pool of the configured size.
    pub fn run<R: Send>(&self, f: impl FnOnce() -> R + Send) -> Result<R> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
        Ok(pool.install(f))
    }
}

/// Parallel map over elements with results in element order.
pub(crate) fn map_elements<R: Send>(
    opts: &AssemblyOptions,
    count: usize,
    f: impl Fn(usize) -> Result<R> + Sync + Send,
) -> Result<Vec<R>> {
    opts.run(|| (0..count).into_par_iter().map(f).collect::<Result<Vec<R>>>())?
}

#[derive(Clone, Debug)]
pub struct SparseSystem {
    pub space: Arc<FESpace>,
    /// Stiffness plus zeroth-order term.
    pub a: Csr,
    pub m: Csr,
    /// `int w^-2 u v` when a weight is supplied.
    pub mw: Option<Csr>,
    pub b: Vec<f64>,
}

type Load<'a> = Option<&'a (dyn Fn(Point) -> f64 + Sync)>;

struct Local {
    k: Vec<f64>,
    m: Vec<f64>,
    mw: Vec<f64>,
    b: Vec<f64>,
}

/// Assembles with the same coefficient on every component.
pub fn assemble(
    space: &Arc<FESpace>,
    a: &CoefficientField,
    w: Option<&Weight>,
    load: Load<'_>,
    singular: &[Point],
    opts: &AssemblyOptions,
) -> Result<SparseSystem> {
    let blocks = vec![a.clone(); space.components];
    assemble_blocks(space, &blocks, w, load, singular, opts)
}

/// Block-diagonal assembly: component `c` uses `blocks[c]`.
pub fn assemble_blocks(
    space: &Arc<FESpace>,
    blocks: &[CoefficientField],
    w: Option<&Weight>,
    load: Load<'_>,
    singular: &[Point],
    opts: &AssemblyOptions,
) -> Result<SparseSystem> {
    let d = space.components;
    if blocks.len() != d {
        return Err(Error::InvalidParameter(format!(
            "{} coefficient blocks for {d} components",
            blocks.len()
        )));
    }
    let mut singular = singular.to_vec();
    if let Some(w) = w {
        singular.extend(w.centers());
    }
    let (standard, collapsed) = opts.rules()?;
    let mesh = &space.mesh;
    let nl = space.local_count();
    let locals = map_elements(opts, mesh.triangles.len(), |t| {
        let rule = element_rule(mesh, t, &singular, &standard, &collapsed)?;
        let p = mesh.triangle_points(t);
        let area = mesh.area(t);
        let g = barycentric_gradients(p);
        let mut loc = Local {
            k: vec![0.0; d * nl * nl],
            m: vec![0.0; nl * nl],
            mw: vec![0.0; if w.is_some() { nl * nl } else { 0 }],
            b: vec![0.0; nl],
        };
        let mut val = [0.0; 6];
        let mut grad = [Point::ORIGIN; 6];
        for (l, &wq) in rule.points.iter().zip(&rule.weights) {
            let x = p[0].scale(l[0]) + p[1].scale(l[1]) + p[2].scale(l[2]);
            let dx = wq * area;
            local_basis(space.degree, *l, &g, &mut val, &mut grad);
            for (c, block) in blocks.iter().enumerate() {
                let am = block.checked_a(x)?;
                let cx = block.c.eval(x);
                let kc = &mut loc.k[c * nl * nl..(c + 1) * nl * nl];
                for i in 0..nl {
                    let agi = am.apply(grad[i]);
                    for j in 0..nl {
                        kc[i * nl + j] += dx * (agi.dot(grad[j]) + cx * val[i] * val[j]);
                    }
                }
            }
            for i in 0..nl {
                for j in 0..nl {
                    loc.m[i * nl + j] += dx * val[i] * val[j];
                }
            }
            if let Some(w) = w {
                let inv = w.eval(x)?.powi(-2);
                for i in 0..nl {
                    for j in 0..nl {
                        loc.mw[i * nl + j] += dx * inv * val[i] * val[j];
                    }
                }
            }
            if let Some(f) = load {
                let fx = f(x);
                for i in 0..nl {
                    loc.b[i] += dx * fx * val[i];
                }
            }
        }
        Ok(loc)
    })?;

    let n = space.ndof();
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
    for dofs in &space.element_dofs {
        for &i in dofs {
            for &j in dofs {
                for c in 0..d {
                    rows[i * d + c].push(j * d + c);
                }
            }
        }
    }
    for r in &mut rows {
        r.sort_unstable();
        r.dedup();
    }
    let mut a = Csr::from_pattern(rows);
    let mut m = a.clone();
    let mut mw = w.map(|_| a.clone());
    let mut b = vec![0.0; n];
    for (dofs, loc) in space.element_dofs.iter().zip(&locals) {
        for (i, &gi) in dofs.iter().enumerate() {
            for c in 0..d {
                let row = gi * d + c;
                b[row] += loc.b[i];
                for (j, &gj) in dofs.iter().enumerate() {
                    let col = gj * d + c;
                    *a.entry_mut(row, col).unwrap() += loc.k[c * nl * nl + i * nl + j];
                    *m.entry_mut(row, col).unwrap() += loc.m[i * nl + j];
                    if let Some(mw) = mw.as_mut() {
                        *mw.entry_mut(row, col).unwrap() += loc.mw[i * nl + j];
                    }
                }
            }
        }
    }
    Ok(SparseSystem {
        space: Arc::clone(space),
        a,
        m,
        mw,
        b,
    })
}

/// Boundary data: Dirichlet values on the essential part (zero when absent) and the
/// conormal flux `g(x, n)` with `n` the outward unit normal on the natural part.
#[derive(Clone, Copy, Default)]
pub struct BoundaryData<'a> {
    pub dirichlet: Option<&'a (dyn Fn(Point) -> f64 + Sync)>,
    pub neumann: Option<&'a (dyn Fn(Point, Point) -> f64 + Sync)>,
    /// Extra scalar dofs held at zero.
    pub fixed: Option<&'a [bool]>,
}

/// System reduced to the free unknowns by symmetric elimination.
#[derive(Clone, Debug)]
pub struct ConstrainedSystem {
    pub a: Csr,
    pub b: Vec<f64>,
    pub free: Vec<usize>,
    pub map: Vec<Option<usize>>,
    /// Full-length vector holding the prescribed values at constrained unknowns.
    pub values: Vec<f64>,
    pub warnings: Vec<String>,
}

impl ConstrainedSystem {
    pub fn restrict(&self, m: &Csr) -> Csr {
        m.principal(&self.free, &self.map)
    }

    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        let mut full = self.values.clone();
        for (k, &i) in self.free.iter().enumerate() {
            full[i] = x[k];
        }
        full
    }
}

pub fn apply_bc(sys: &SparseSystem, data: BoundaryData<'_>) -> Result<ConstrainedSystem> {
    let space = &sys.space;
    let d = space.components;
    let n = space.ndof();
    let mut b = sys.b.clone();
    let mut warnings = Vec::new();

    if let Some(g) = data.neumann {
        let edge_mid: HashMap<(usize, usize), usize> = if space.degree == 2 {
            let mut map = HashMap::new();
            for (t, tri) in space.mesh.triangles.iter().enumerate() {
                for (e, (i, j)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
                    let key = (tri[i].min(tri[j]), tri[i].max(tri[j]));
                    map.insert(key, space.element_dofs[t][3 + e]);
                }
            }
            map
        } else {
            HashMap::new()
        };
        let gauss = gauss_legendre(4);
        for e in &space.mesh.boundary_edges {
            if e.tag.kind != BoundaryTag::Neumann {
                continue;
            }
            let [ia, ib] = e.v;
            let (pa, pb) = (space.mesh.vertices[ia], space.mesh.vertices[ib]);
            let len = pa.dist(pb);
            let dir = (pb - pa).scale(1.0 / len);
            let normal = Point::new(dir.y, -dir.x);
            for &(s, wq) in &gauss {
                let x = pa.scale(1.0 - s) + pb.scale(s);
                let flux = g(x, normal) * wq * len;
                let contributions: Vec<(usize, f64)> = if space.degree == 1 {
                    vec![(ia, 1.0 - s), (ib, s)]
                } else {
                    let mid = edge_mid[&(ia.min(ib), ia.max(ib))];
                    vec![
                        (ia, (1.0 - s) * (1.0 - 2.0 * s)),
                        (mid, 4.0 * s * (1.0 - s)),
                        (ib, s * (2.0 * s - 1.0)),
                    ]
                };
                for (dof, phi) in contributions {
                    for c in 0..d {
                        b[dof * d + c] += flux * phi;
                    }
                }
            }
        }
    }

    let mut values = vec![0.0; n];
    let mut map = vec![None; n];
    let mut free = Vec::new();
    for i in 0..space.scalar_dofs() {
        for c in 0..d {
            let k = i * d + c;
            if data.fixed.is_some_and(|f| f[i]) {
                values[k] = 0.0;
            } else if space.dirichlet[i] {
                values[k] = data.dirichlet.map_or(0.0, |f| f(space.dof_points[i]));
            } else {
                map[k] = Some(free.len());
                free.push(k);
            }
        }
    }
    if free.len() == n {
        let ones = vec![1.0; n];
        let kernel = sys.a.matvec(&ones).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let scale = sys.a.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if kernel <= 1e-10 * scale {
            warnings.push("no essential boundary and no zeroth-order term: constants span the kernel".into());
        }
    }
    // b_f - A_fc g_c
    let ag = sys.a.matvec(&values);
    let b_free: Vec<f64> = free.iter().map(|&i| b[i] - ag[i]).collect();
    Ok(ConstrainedSystem {
        a: sys.a.principal(&free, &map),
        b: b_free,
        free,
        map,
        values,
        warnings,
    })
}

pub fn solve(
    space: &Arc<FESpace>,
    cs: &ConstrainedSystem,
    kind: SolverKind,
    tol: f64,
) -> Result<(FEFunction, SolveReport)> {
    if let Some(w) = cs.warnings.first() {
        if cs.free.len() == space.ndof() && kind != SolverKind::Cg {
            return Err(Error::SingularSystem(w.clone()));
        }
    }
    let (x, report) = if cs.free.is_empty() {
        (
            Vec::new(),
            SolveReport {
                iterations: 0,
                residual: 0.0,
            },
        )
    } else {
        solve_linear(&cs.a, &cs.b, kind, tol)?
    };
    Ok((
        FEFunction {
            space: Arc::clone(space),
            coeffs: cs.expand(&x),
        },
        report,
    ))
}

fn integrate_error(
    uh: &FEFunction,
    singular: &[Point],
    opts: &AssemblyOptions,
    integrand: impl Fn(Point, f64, Point) -> f64 + Sync + Send,
) -> Result<f64> {
    let (standard, collapsed) = opts.rules()?;
    let mesh = &uh.space.mesh;
    let parts = map_elements(opts, mesh.triangles.len(), |t| {
        let rule = element_rule(mesh, t, singular, &standard, &collapsed)?;
        let p = mesh.triangle_points(t);
        let area = mesh.area(t);
        Ok(compensated_sum(rule.points.iter().zip(&rule.weights).map(
            |(l, &wq)| {
                let x = p[0].scale(l[0]) + p[1].scale(l[1]) + p[2].scale(l[2]);
                let (v, g) = uh.eval_local(t, *l, 0);
                wq * area * integrand(x, v, g)
            },
        )))
    })?;
    Ok(compensated_sum(parts).max(0.0).sqrt())
}

/// `|u - u_h|_{L2}` for component 0.
pub fn l2_error(uh: &FEFunction, exact: &Manufactured, opts: &AssemblyOptions) -> Result<f64> {
    integrate_error(uh, &exact.singular, opts, |x, v, _| (exact.value(x) - v).powi(2))
}

/// Energy norm `(int a grad e . grad e + c e^2)^(1/2)` of the error, component 0.
pub fn energy_error(
    uh: &FEFunction,
    exact: &Manufactured,
    a: &CoefficientField,
    opts: &AssemblyOptions,
) -> Result<f64> {
    integrate_error(uh, &exact.singular, opts, |x, v, g| {
        let e = exact.gradient(x) - g;
        let ev = exact.value(x) - v;
        a.a(x).apply(e).dot(e) + a.c.eval(x) * ev * ev
    })
}
