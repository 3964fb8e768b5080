//! Conforming triangulations graded towards singular boundary points.
//!
//! Meshes are built in a chart adapted to each template and pushed forward:
//! `(log r, theta)` for sectors and oscillating cones, `(log r, y)` for cusps.
//! The construction is deterministic and single-threaded.

mod build;
mod io;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domains::{BoundaryTag, DomainSpec, Weight};
use crate::error::{Error, Result};
use crate::geometry::{signed_area, Point};

pub use build::{deepen, grade_mesh, refine};

pub const DEFAULT_MIN_ANGLE_DEG: f64 = 15.0;

/// Boundary condition kind plus the index of the domain curve carrying the edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EdgeTag {
    pub kind: BoundaryTag,
    pub curve: usize,
}

impl fmt::Display for EdgeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.kind.letter(), self.curve)
    }
}

impl std::str::FromStr for EdgeTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("malformed boundary tag '{s}'"));
        let mut chars = s.chars();
        let kind = match chars.next() {
            Some('D') => BoundaryTag::Dirichlet,
            Some('N') => BoundaryTag::Neumann,
            _ => return Err(bad()),
        };
        let curve = chars.as_str().parse().map_err(|_| bad())?;
        Ok(EdgeTag { kind, curve })
    }
}

/// Boundary edge oriented with the domain on its left.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub v: [usize; 2],
    pub tag: EdgeTag,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grading {
    /// Ratio between consecutive layer radii.
    pub sigma: f64,
    /// Number of geometric layers; chosen from `h` and `kappa` when absent.
    pub layers: Option<usize>,
    /// Angular (or transverse) cell count in the outermost layer.
    pub n: Option<usize>,
    /// Element size behaves like `h r^(1 - kappa)`; 1 is quasi-uniform, 0 geometric.
    pub kappa: f64,
    pub h: f64,
    pub min_angle_deg: f64,
}

impl Default for Grading {
    fn default() -> Self {
        Grading {
            sigma: 0.5,
            layers: None,
            n: None,
            kappa: 1.0,
            h: 0.2,
            min_angle_deg: DEFAULT_MIN_ANGLE_DEG,
        }
    }
}

impl Grading {
    pub fn new(h: f64, kappa: f64) -> Self {
        Grading {
            h,
            kappa,
            ..Grading::default()
        }
    }

    pub fn with_layers(mut self, layers: usize) -> Self {
        self.layers = Some(layers);
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.h > 0.0 && self.h < 1.0) {
            return bad(format!("mesh size H must lie in (0, 1), got {}", self.h));
        }
        if !(0.0..=1.0).contains(&self.kappa) {
            return bad(format!("grading exponent must lie in [0, 1], got {}", self.kappa));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return bad(format!("layer ratio must lie in (0, 1), got {}", self.sigma));
        }
        if self.layers == Some(0) {
            return bad("layer count must be >= 1".into());
        }
        if self.n == Some(0) {
            return bad("cell count n must be >= 1".into());
        }
        if !(self.min_angle_deg >= 0.0 && self.min_angle_deg < 60.0) {
            return bad(format!("minimum angle must lie in [0, 60), got {}", self.min_angle_deg));
        }
        Ok(())
    }

    /// Layer count, defaulting so that the innermost radius matches `h^(1/kappa)`.
    pub fn resolved_layers(&self) -> usize {
        self.layers.unwrap_or_else(|| {
            if self.kappa > 0.0 {
                let l = (self.h.ln() / (self.kappa * self.sigma.ln())).ceil();
                (l as usize).max(1)
            } else {
                16
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Template {
        spec: DomainSpec,
        grading: Grading,
    },
    Rectangle {
        lower: Point,
        upper: Point,
        nx: usize,
        ny: usize,
        neumann: Vec<usize>,
    },
}

/// Sorted vertex pair to edge number.
pub type EdgeIndex = HashMap<(usize, usize), usize>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub grading: Option<Grading>,
    pub provenance: Option<Provenance>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeshQuality {
    pub min_angle_deg: f64,
    pub max_aspect: f64,
    pub elements: usize,
    pub min_diameter: f64,
    pub max_diameter: f64,
    pub min_g_diameter: f64,
    pub max_g_diameter: f64,
}

/// Smallest interior angle of a triangle in degrees.
pub fn min_angle_deg(a: Point, b: Point, c: Point) -> f64 {
    let angle = |p: Point, q: Point, r: Point| {
        let (u, v) = (q - p, r - p);
        u.cross(v).abs().atan2(u.dot(v))
    };
    angle(a, b, c).min(angle(b, c, a)).min(angle(c, a, b)).to_degrees()
}

fn diameter(p: [Point; 3]) -> f64 {
    p[0].dist(p[1]).max(p[1].dist(p[2])).max(p[2].dist(p[0]))
}

impl Mesh {
    /// `nx x ny` structured triangulation of an axis-parallel rectangle. Curves are
    /// numbered bottom, right, top, left; those listed in `neumann` get natural conditions.
    pub fn rectangle(lower: Point, upper: Point, nx: usize, ny: usize, neumann: &[usize]) -> Result<Mesh> {
        if nx == 0 || ny == 0 || !(upper.x > lower.x && upper.y > lower.y) {
            return Err(Error::InvalidParameter(format!(
                "rectangle needs nx, ny >= 1 and a positive extent (nx = {nx}, ny = {ny})"
            )));
        }
        if let Some(&c) = neumann.iter().find(|&&c| c > 3) {
            return Err(Error::InvalidParameter(format!("rectangle has curves 0..=3, got {c}")));
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push(Point::new(
                    lower.x + (upper.x - lower.x) * i as f64 / nx as f64,
                    lower.y + (upper.y - lower.y) * j as f64 / ny as f64,
                ));
            }
        }
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        let tag = |curve: usize| EdgeTag {
            kind: if neumann.contains(&curve) {
                BoundaryTag::Neumann
            } else {
                BoundaryTag::Dirichlet
            },
            curve,
        };
        let mut boundary_edges = Vec::new();
        for i in 0..nx {
            boundary_edges.push(BoundaryEdge {
                v: [id(i, 0), id(i + 1, 0)],
                tag: tag(0),
            });
        }
        for j in 0..ny {
            boundary_edges.push(BoundaryEdge {
                v: [id(nx, j), id(nx, j + 1)],
                tag: tag(1),
            });
        }
        for i in (0..nx).rev() {
            boundary_edges.push(BoundaryEdge {
                v: [id(i + 1, ny), id(i, ny)],
                tag: tag(2),
            });
        }
        for j in (0..ny).rev() {
            boundary_edges.push(BoundaryEdge {
                v: [id(0, j + 1), id(0, j)],
                tag: tag(3),
            });
        }
        Ok(Mesh {
            vertices,
            triangles,
            boundary_edges,
            grading: None,
            provenance: Some(Provenance::Rectangle {
                lower,
                upper,
                nx,
                ny,
                neumann: neumann.to_vec(),
            }),
        })
    }

    pub fn unit_square(n: usize) -> Result<Mesh> {
        Mesh::rectangle(Point::ORIGIN, Point::new(1.0, 1.0), n, n, &[])
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        crate::geometry::compensated_sum((0..self.triangles.len()).map(|t| self.area(t)))
    }

    /// Copy scaled by `factor` about the origin; provenance is dropped.
    pub fn scaled(&self, factor: f64) -> Mesh {
        Mesh {
            vertices: self.vertices.iter().map(|&p| p.scale(factor)).collect(),
            triangles: self.triangles.clone(),
            boundary_edges: self.boundary_edges.clone(),
            grading: None,
            provenance: None,
        }
    }

    /// Unique undirected edges `(min, max)` in first-seen order over the triangles.
    pub fn edges(&self) -> (Vec<[usize; 2]>, EdgeIndex) {
        let mut list = Vec::new();
        let mut index = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                index.entry(key).or_insert_with(|| {
                    list.push([key.0, key.1]);
                    list.len() - 1
                });
            }
        }
        (list, index)
    }

    /// Conformity, orientation and boundary-tag consistency.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidMesh(m));
        let nv = self.vertices.len();
        let mut count: HashMap<(usize, usize), usize> = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return bad(format!("triangle {t} references a missing vertex"));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return bad(format!("triangle {t} repeats a vertex"));
            }
            if !(self.area(t) > 0.0) {
                return bad(format!("triangle {t} is not positively oriented"));
            }
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let mut boundary: HashMap<(usize, usize), usize> = HashMap::new();
        for e in &self.boundary_edges {
            let [a, b] = e.v;
            *boundary.entry((a.min(b), a.max(b))).or_default() += 1;
        }
        for (edge, &c) in &count {
            let on_boundary = boundary.get(edge).copied().unwrap_or(0);
            match (c, on_boundary) {
                (1, 1) | (2, 0) => {}
                (1, 0) => return bad(format!("edge {edge:?} is untagged boundary")),
                _ => {
                    return bad(format!(
                        "edge {edge:?} shared by {c} triangles with {on_boundary} boundary records"
                    ))
                }
            }
        }
        if let Some(edge) = boundary.keys().find(|e| !count.contains_key(e)) {
            return bad(format!("boundary edge {edge:?} is not a triangle edge"));
        }
        Ok(())
    }

    /// Shape statistics; g-diameters use `rho` at the element centroid (1 when absent).
    pub fn quality(&self, rho: Option<&Weight>) -> Result<MeshQuality> {
        let mut q = MeshQuality {
            min_angle_deg: f64::INFINITY,
            max_aspect: 0.0,
            elements: self.triangles.len(),
            min_diameter: f64::INFINITY,
            max_diameter: 0.0,
            min_g_diameter: f64::INFINITY,
            max_g_diameter: 0.0,
        };
        for t in 0..self.triangles.len() {
            let p = self.triangle_points(t);
            let diam = diameter(p);
            // aspect: longest edge over the inscribed-circle diameter
            let perimeter = p[0].dist(p[1]) + p[1].dist(p[2]) + p[2].dist(p[0]);
            let inradius = 2.0 * self.area(t) / perimeter;
            let centroid = (p[0] + p[1] + p[2]).scale(1.0 / 3.0);
            let g_diam = match rho {
                Some(w) => diam / w.eval(centroid)?,
                None => diam,
            };
            q.min_angle_deg = q.min_angle_deg.min(min_angle_deg(p[0], p[1], p[2]));
            q.max_aspect = q.max_aspect.max(diam / (2.0 * inradius));
            q.min_diameter = q.min_diameter.min(diam);
            q.max_diameter = q.max_diameter.max(diam);
            q.min_g_diameter = q.min_g_diameter.min(g_diam);
            q.max_g_diameter = q.max_g_diameter.max(g_diam);
        }
        Ok(q)
    }

    /// Tags in use, sorted by curve.
    pub fn tags(&self) -> Vec<EdgeTag> {
        let mut tags: Vec<EdgeTag> = self.boundary_edges.iter().map(|e| e.tag).collect();
        tags.sort_by_key(|t| (t.curve, t.kind.letter()));
        tags.dedup();
        tags
    }
}

pub fn mesh_quality(m: &Mesh, rho: Option<&Weight>) -> Result<MeshQuality> {
    m.quality(rho)
}
