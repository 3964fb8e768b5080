//! Lagrange P1/P2 finite elements for `-div(a grad u) + c u = F` with Dirichlet
//! and conormal boundary parts.

mod assemble;
pub(crate) use assemble::map_elements;
mod manufactured;
pub mod solve;
pub mod sparse;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::domains::BoundaryTag;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::mesh::Mesh;
use crate::quadrature::TriangleRule;

pub use assemble::{
    apply_bc, assemble, assemble_blocks, energy_error, l2_error, solve, AssemblyOptions, BoundaryData,
    ConstrainedSystem, SparseSystem,
};
pub use manufactured::{manufactured_problem, Manufactured, Solution, CATALOG as PROBLEMS};
pub use solve::{SolveReport, SolverKind};
pub use sparse::Csr;

/// Scalar degrees of freedom of a P1/P2 space, possibly with `components` copies.
#[derive(Clone, Debug)]
pub struct FESpace {
    pub mesh: Arc<Mesh>,
    pub degree: usize,
    pub components: usize,
    /// Scalar dofs per element: vertices, then edge midpoints `(0,1), (1,2), (2,0)` for P2.
    pub element_dofs: Vec<Vec<usize>>,
    pub dof_points: Vec<Point>,
    /// Scalar dofs lying on Dirichlet-tagged boundary edges.
    pub dirichlet: Vec<bool>,
}

impl FESpace {
    pub fn new(mesh: Arc<Mesh>, degree: usize) -> Result<Arc<FESpace>> {
        FESpace::with_components(mesh, degree, 1)
    }

    pub fn with_components(mesh: Arc<Mesh>, degree: usize, components: usize) -> Result<Arc<FESpace>> {
        if !(1..=2).contains(&degree) {
            return Err(Error::InvalidParameter(format!(
                "polynomial degree must be 1 or 2, got {degree}"
            )));
        }
        if components == 0 {
            return Err(Error::InvalidParameter("component count must be >= 1".into()));
        }
        let nv = mesh.vertices.len();
        let mut dof_points = mesh.vertices.clone();
        let mut edge_dof: HashMap<(usize, usize), usize> = HashMap::new();
        let mut element_dofs = Vec::with_capacity(mesh.triangles.len());
        for tri in &mesh.triangles {
            let mut dofs = tri.to_vec();
            if degree == 2 {
                for (a, b) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
                    let key = (a.min(b), a.max(b));
                    let id = *edge_dof.entry(key).or_insert_with(|| {
                        dof_points.push((mesh.vertices[a] + mesh.vertices[b]).scale(0.5));
                        dof_points.len() - 1
                    });
                    dofs.push(id);
                }
            }
            element_dofs.push(dofs);
        }
        let mut dirichlet = vec![false; dof_points.len()];
        for e in &mesh.boundary_edges {
            if e.tag.kind != BoundaryTag::Dirichlet {
                continue;
            }
            let [a, b] = e.v;
            dirichlet[a] = true;
            dirichlet[b] = true;
            if degree == 2 {
                let id = edge_dof
                    .get(&(a.min(b), a.max(b)))
                    .ok_or_else(|| Error::InvalidMesh(format!("boundary edge ({a}, {b}) not in mesh")))?;
                dirichlet[*id] = true;
            }
        }
        debug_assert!(degree == 2 || dof_points.len() == nv);
        Ok(Arc::new(FESpace {
            mesh,
            degree,
            components,
            element_dofs,
            dof_points,
            dirichlet,
        }))
    }

    /// Scalar dof count.
    pub fn scalar_dofs(&self) -> usize {
        self.dof_points.len()
    }

    /// Total unknowns including components.
    pub fn ndof(&self) -> usize {
        self.scalar_dofs() * self.components
    }

    /// Boundary dof of a P2 edge, if any.
    pub fn edge_dof(&self, t: usize, local_edge: usize) -> Option<usize> {
        (self.degree == 2).then(|| self.element_dofs[t][3 + local_edge])
    }

    pub fn local_count(&self) -> usize {
        if self.degree == 1 {
            3
        } else {
            6
        }
    }

    pub fn interpolate(self: &Arc<Self>, u: impl Fn(Point) -> f64) -> FEFunction {
        let d = self.components;
        let mut coeffs = vec![0.0; self.ndof()];
        for (i, &p) in self.dof_points.iter().enumerate() {
            let v = u(p);
            for c in 0..d {
                coeffs[i * d + c] = v;
            }
        }
        FEFunction {
            space: Arc::clone(self),
            coeffs,
        }
    }
}

/// Gradients of the barycentric coordinates of a positively oriented triangle.
pub fn barycentric_gradients(p: [Point; 3]) -> [Point; 3] {
    let two_area = (p[1] - p[0]).cross(p[2] - p[0]);
    let g = |j: usize, k: usize| Point::new(p[j].y - p[k].y, p[k].x - p[j].x).scale(1.0 / two_area);
    [g(1, 2), g(2, 0), g(0, 1)]
}

/// Values and gradients of the local basis at barycentric point `l`.
pub fn local_basis(degree: usize, l: [f64; 3], g: &[Point; 3], val: &mut [f64], grad: &mut [Point]) {
    if degree == 1 {
        val[..3].copy_from_slice(&l);
        grad[..3].copy_from_slice(g);
        return;
    }
    for i in 0..3 {
        val[i] = l[i] * (2.0 * l[i] - 1.0);
        grad[i] = g[i].scale(4.0 * l[i] - 1.0);
    }
    for (e, (i, j)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
        val[3 + e] = 4.0 * l[i] * l[j];
        grad[3 + e] = (g[j].scale(l[i]) + g[i].scale(l[j])).scale(4.0);
    }
}

/// Triangle rule for element `t`: collapsed at a vertex sitting on a singular point,
/// the symmetric rule of `degree` otherwise.
pub fn element_rule<'a>(
    mesh: &Mesh,
    t: usize,
    singular: &[Point],
    standard: &'a TriangleRule,
    collapsed: &'a [TriangleRule; 3],
) -> Result<&'a TriangleRule> {
    let p = mesh.triangle_points(t);
    let diam = p[0].dist(p[1]).max(p[1].dist(p[2])).max(p[2].dist(p[0]));
    for (k, v) in p.iter().enumerate() {
        if singular.iter().any(|s| s.dist(*v) <= 1e-12 * diam) {
            return Ok(&collapsed[k]);
        }
    }
    for b in &standard.points {
        let x = p[0].scale(b[0]) + p[1].scale(b[1]) + p[2].scale(b[2]);
        if singular.iter().any(|s| s.dist(x) <= 1e-14 * diam) {
            return Err(Error::SingularQuadraturePoint(t));
        }
    }
    Ok(standard)
}

/// Coefficient vector on a space; `d` components are interleaved per scalar dof.
#[derive(Clone, Debug)]
pub struct FEFunction {
    pub space: Arc<FESpace>,
    pub coeffs: Vec<f64>,
}

impl FEFunction {
    pub fn zero(space: Arc<FESpace>) -> FEFunction {
        let n = space.ndof();
        FEFunction {
            space,
            coeffs: vec![0.0; n],
        }
    }

    /// Value and gradient of component `c` in element `t` at barycentric point `l`.
    pub fn eval_local(&self, t: usize, l: [f64; 3], c: usize) -> (f64, Point) {
        let s = &self.space;
        let p = s.mesh.triangle_points(t);
        let g = barycentric_gradients(p);
        let mut val = [0.0; 6];
        let mut grad = [Point::ORIGIN; 6];
        local_basis(s.degree, l, &g, &mut val, &mut grad);
        let d = s.components;
        let mut u = 0.0;
        let mut du = Point::ORIGIN;
        for (k, &dof) in s.element_dofs[t].iter().enumerate() {
            let coef = self.coeffs[dof * d + c];
            u += coef * val[k];
            du = du + grad[k].scale(coef);
        }
        (u, du)
    }

    pub fn scaled(&self, factor: f64) -> FEFunction {
        FEFunction {
            space: Arc::clone(&self.space),
            coeffs: self.coeffs.iter().map(|v| v * factor).collect(),
        }
    }

    /// CSV dump `dof,x,y,value` (component 0 for systems, one value column per component).
    pub fn to_csv(&self) -> String {
        let d = self.space.components;
        let mut s = String::from("dof,x,y");
        for c in 0..d {
            if d == 1 {
                s.push_str(",value");
            } else {
                let _ = write!(s, ",value{c}");
            }
        }
        s.push('\n');
        for (i, p) in self.space.dof_points.iter().enumerate() {
            let _ = write!(s, "{i},{},{}", p.x, p.y);
            for c in 0..d {
                let _ = write!(s, ",{}", self.coeffs[i * d + c]);
            }
            s.push('\n');
        }
        s
    }
}
