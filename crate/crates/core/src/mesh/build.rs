//! Template-specific chart meshes.

use std::f64::consts::FRAC_PI_4;

use super::{min_angle_deg, BoundaryEdge, EdgeTag, Grading, Mesh, Provenance};
use crate::domains::{make_domain, Domain2D, Template, TrigPoly};
use crate::error::{Error, Result};
use crate::geometry::{signed_area, Point};

struct Builder {
    vertices: Vec<Point>,
    /// Chart coordinates used for the shape check when `chart_angles` is set.
    chart: Vec<Point>,
    chart_angles: bool,
    triangles: Vec<[usize; 3]>,
    /// `(layer, checked)` per triangle.
    info: Vec<(usize, bool)>,
    edges: Vec<BoundaryEdge>,
}

impl Builder {
    fn new(chart_angles: bool) -> Self {
        Builder {
            vertices: Vec::new(),
            chart: Vec::new(),
            chart_angles,
            triangles: Vec::new(),
            info: Vec::new(),
            edges: Vec::new(),
        }
    }

    fn vertex(&mut self, p: Point, chart: Point) -> usize {
        self.vertices.push(p);
        self.chart.push(chart);
        self.vertices.len() - 1
    }

    fn triangle(&mut self, a: usize, b: usize, c: usize, layer: usize, checked: bool) {
        let v = &self.vertices;
        let tri = if signed_area(v[a], v[b], v[c]) < 0.0 {
            [a, c, b]
        } else {
            [a, b, c]
        };
        self.triangles.push(tri);
        self.info.push((layer, checked));
    }

    /// Triangulates the strip between two open polylines with parameters `i / (len - 1)`.
    fn strip(&mut self, outer: &[usize], inner: &[usize], layer: usize) {
        let (a, b) = (outer.len() - 1, inner.len() - 1);
        if a == b {
            for i in 0..a {
                self.triangle(outer[i], outer[i + 1], inner[i + 1], layer, true);
                self.triangle(outer[i], inner[i + 1], inner[i], layer, true);
            }
            return;
        }
        let (mut i, mut k) = (0, 0);
        while i < a || k < b {
            // advance along whichever polyline has the smaller next parameter
            let advance_outer = k == b || (i < a && (i + 1) * b <= (k + 1) * a);
            if advance_outer {
                self.triangle(outer[i], outer[i + 1], inner[k], layer, true);
                i += 1;
            } else {
                self.triangle(outer[i], inner[k + 1], inner[k], layer, true);
                k += 1;
            }
        }
    }

    fn boundary(&mut self, path: &[usize], tag: EdgeTag) {
        for w in path.windows(2) {
            self.edges.push(BoundaryEdge { v: [w[0], w[1]], tag });
        }
    }

    fn finish(self, grading: &Grading, provenance: Provenance) -> Result<Mesh> {
        let threshold = grading.min_angle_deg;
        for (t, tri) in self.triangles.iter().enumerate() {
            let (layer, checked) = self.info[t];
            if !checked {
                continue;
            }
            let pts = if self.chart_angles { &self.chart } else { &self.vertices };
            let angle = min_angle_deg(pts[tri[0]], pts[tri[1]], pts[tri[2]]);
            if !(angle >= threshold) {
                return Err(Error::GradingDegenerate {
                    layer,
                    angle_deg: angle,
                    threshold_deg: threshold,
                });
            }
        }
        let mesh = Mesh {
            vertices: self.vertices,
            triangles: self.triangles,
            boundary_edges: self.edges,
            grading: Some(grading.clone()),
            provenance: Some(provenance),
        };
        mesh.validate()?;
        Ok(mesh)
    }
}

fn tag(d: &Domain2D, curve: usize) -> EdgeTag {
    EdgeTag {
        kind: d.boundary[curve].tag,
        curve,
    }
}

/// Radius of sub-ring `k` of `m` inside layer `j`.
fn layer_radius(sigma: f64, j: usize, k: usize, m: usize) -> f64 {
    sigma.powi(j as i32) * (-(k as f64) * (-sigma.ln()) / m as f64).exp()
}

/// Smallest apex angle of the closing fan.
const FAN_ANGLE: f64 = std::f64::consts::PI / 8.0;

fn rounded(x: f64) -> usize {
    x.round().max(1.0) as usize
}

/// Builds the graded mesh for a domain template.
pub fn grade_mesh(d: &Domain2D, grading: &Grading) -> Result<Mesh> {
    grading.validate()?;
    let mut g = grading.clone();
    g.layers = Some(grading.resolved_layers());
    let provenance = Provenance::Template {
        spec: d.spec.clone(),
        grading: g.clone(),
    };
    match d.template() {
        &Template::Sector { omega } => sector(d, omega, &g, provenance),
        &Template::Cusp { alpha, y0, y1, r_cut } => cusp(d, alpha, y0, y1, r_cut, &g, provenance),
        Template::OscillatingCone { f0, f1, t_max } => oscillating(d, f0, f1, *t_max, &g, provenance),
        Template::CircleCusp => Err(Error::UnsupportedTemplate("circle-cusp has no chart mesh".into())),
    }
}

fn sector(d: &Domain2D, omega: f64, g: &Grading, provenance: Provenance) -> Result<Mesh> {
    let layers = g.layers.unwrap_or(1);
    let lsig = -g.sigma.ln();
    let n_min = ((omega / FRAC_PI_4).ceil() as usize).max(1);
    let dt = |j: usize| g.h * g.sigma.powf(-g.kappa * j as f64);
    let cells = |j: usize| {
        let n = match g.n {
            Some(n0) => n0 as f64 * g.sigma.powf(g.kappa * j as f64),
            None => omega / dt(j),
        };
        rounded(n).max(n_min)
    };
    // (radius, angular cells, layer)
    let mut rings = Vec::new();
    for j in 0..layers {
        let m = rounded(lsig / dt(j));
        for k in 0..m {
            rings.push((layer_radius(g.sigma, j, k, m), cells(j), j));
        }
    }
    rings.push((g.sigma.powi(layers as i32), cells(layers), layers));
    // halve the angular count until the fan apex angle reaches FAN_ANGLE
    let fan_cells = ((omega / FAN_ANGLE + 1e-9).floor() as usize).max(1);
    while let Some(&(r, n, _)) = rings.last().filter(|ring| ring.1 > fan_cells) {
        let coarse = n.div_ceil(2).max(fan_cells);
        rings.push((r * (-omega / coarse as f64).exp(), coarse, layers));
    }

    let mut b = Builder::new(false);
    let ids: Vec<Vec<usize>> = rings
        .iter()
        .map(|&(r, n, _)| {
            (0..=n)
                .map(|i| {
                    let theta = omega * i as f64 / n as f64;
                    b.vertex(Point::polar(r, theta), Point::new(r.ln(), theta))
                })
                .collect()
        })
        .collect();
    let origin = b.vertex(Point::ORIGIN, Point::new(f64::NEG_INFINITY, 0.0));
    for (a, ring) in rings.iter().enumerate().take(rings.len() - 1) {
        b.strip(&ids[a], &ids[a + 1], ring.2);
    }
    let last = ids.last().expect("at least one ring");
    for w in last.windows(2) {
        b.triangle(origin, w[0], w[1], layers, true);
    }

    let mut edge0 = vec![origin];
    edge0.extend(ids.iter().rev().map(|r| r[0]));
    b.boundary(&edge0, tag(d, 0));
    b.boundary(&ids[0], tag(d, 1));
    let mut edge1: Vec<usize> = ids.iter().map(|r| *r.last().unwrap()).collect();
    edge1.push(origin);
    b.boundary(&edge1, tag(d, 2));
    b.finish(g, provenance)
}

fn cusp(d: &Domain2D, alpha: f64, y0: f64, y1: f64, r_cut: f64, g: &Grading, provenance: Provenance) -> Result<Mesh> {
    let lsig = -g.sigma.ln();
    let ny = g.n.unwrap_or_else(|| rounded((y1 - y0) / g.h).max(2));
    // (radius, layer) per chart column, outermost first
    let columns: Vec<(f64, usize)> = if r_cut > 0.0 {
        let nt = rounded(-r_cut.ln() / g.h);
        (0..=nt).map(|c| (r_cut.powf(c as f64 / nt as f64), c)).collect()
    } else {
        let layers = g.layers.unwrap_or(1);
        let m = rounded(lsig / g.h);
        (0..=layers * m)
            .map(|c| {
                let (j, k) = (c / m, c % m);
                (layer_radius(g.sigma, j, k, m), j)
            })
            .collect()
    };

    let mut b = Builder::new(true);
    let ids: Vec<Vec<usize>> = columns
        .iter()
        .map(|&(r, _)| {
            (0..=ny)
                .map(|i| {
                    let y = y0 + (y1 - y0) * i as f64 / ny as f64;
                    b.vertex(Point::new(r, r.powf(alpha) * y), Point::new(r.ln(), y))
                })
                .collect()
        })
        .collect();
    for c in 0..columns.len() - 1 {
        b.strip(&ids[c], &ids[c + 1], columns[c].1);
    }
    let last = ids.last().expect("at least one column");
    let mut lower: Vec<usize> = Vec::new();
    let mut upper: Vec<usize> = ids.iter().map(|col| col[ny]).collect();
    if r_cut > 0.0 {
        lower.extend(ids.iter().rev().map(|col| col[0]));
    } else {
        let origin = b.vertex(Point::ORIGIN, Point::new(f64::NEG_INFINITY, 0.0));
        let layer = columns.last().unwrap().1;
        for w in last.windows(2) {
            b.triangle(origin, w[0], w[1], layer, false);
        }
        lower.push(origin);
        lower.extend(ids.iter().rev().map(|col| col[0]));
        upper.push(origin);
    }
    b.boundary(&lower, tag(d, 0));
    b.boundary(&ids[0], tag(d, 1));
    b.boundary(&upper, tag(d, 2));
    if r_cut > 0.0 {
        let tip: Vec<usize> = last.iter().rev().copied().collect();
        b.boundary(&tip, tag(d, 3));
    }
    b.finish(g, provenance)
}

fn oscillating(
    d: &Domain2D,
    f0: &TrigPoly,
    f1: &TrigPoly,
    t_max: f64,
    g: &Grading,
    provenance: Provenance,
) -> Result<Mesh> {
    let nt = rounded(t_max / g.h);
    let ne = g.n.unwrap_or_else(|| {
        let samples = 64;
        let mean = (0..samples)
            .map(|i| {
                let t = -t_max * (i as f64 + 0.5) / samples as f64;
                f1.eval(t) - f0.eval(t)
            })
            .sum::<f64>()
            / samples as f64;
        rounded(mean / g.h).max(2)
    });
    let mut b = Builder::new(false);
    let ids: Vec<Vec<usize>> = (0..=nt)
        .map(|c| {
            let t = -t_max * c as f64 / nt as f64;
            let (a, w) = (f0.eval(t), f1.eval(t) - f0.eval(t));
            (0..=ne)
                .map(|i| {
                    let eta = i as f64 / ne as f64;
                    b.vertex(Point::polar(t.exp(), a + eta * w), Point::new(t, eta))
                })
                .collect()
        })
        .collect();
    for c in 0..nt {
        b.strip(&ids[c], &ids[c + 1], c);
    }
    let lower: Vec<usize> = ids.iter().rev().map(|col| col[0]).collect();
    let upper: Vec<usize> = ids.iter().map(|col| col[ne]).collect();
    let inner: Vec<usize> = ids[nt].iter().rev().copied().collect();
    b.boundary(&lower, tag(d, 0));
    b.boundary(&ids[0], tag(d, 1));
    b.boundary(&upper, tag(d, 2));
    b.boundary(&inner, tag(d, 3));
    b.finish(g, provenance)
}

fn regenerate(m: &Mesh, adjust: impl Fn(&Template, &mut Grading) -> Result<()>) -> Result<Mesh> {
    match m.provenance.as_ref().ok_or(Error::ProvenanceMissing)? {
        Provenance::Template { spec, grading } => {
            let d = make_domain(spec)?;
            let mut g = grading.clone();
            adjust(d.template(), &mut g)?;
            grade_mesh(&d, &g)
        }
        Provenance::Rectangle { .. } => Err(Error::UnsupportedTemplate("rectangle meshes have no layers".into())),
    }
}

/// Next member of the rate-study family: `H / 2`, doubled `n`, and enough extra
/// layers to keep the innermost element size consistent with the grading.
pub fn refine(m: &Mesh) -> Result<Mesh> {
    if let Some(Provenance::Rectangle {
        lower,
        upper,
        nx,
        ny,
        neumann,
    }) = &m.provenance
    {
        return Mesh::rectangle(*lower, *upper, 2 * nx, 2 * ny, neumann);
    }
    regenerate(m, |template, g| {
        let layers = g.resolved_layers();
        g.h *= 0.5;
        g.n = g.n.map(|n| 2 * n);
        g.layers = Some(match template {
            Template::Sector { .. } if g.kappa > 0.0 => {
                let extra = (1.0 / (g.kappa * (1.0 / g.sigma).log2())).ceil() as usize;
                layers + extra
            }
            Template::Cusp { .. } => layers + 1,
            _ => layers,
        });
        Ok(())
    })
}

/// Same chart resolution with one more geometric layer. For geometric sector
/// meshes (`kappa = 0`) the result contains the previous mesh's P1 space.
pub fn deepen(m: &Mesh) -> Result<Mesh> {
    regenerate(m, |template, g| match template {
        Template::Sector { .. } => {
            g.layers = Some(g.resolved_layers() + 1);
            Ok(())
        }
        Template::Cusp { r_cut, .. } if *r_cut == 0.0 => {
            g.layers = Some(g.resolved_layers() + 1);
            Ok(())
        }
        other => Err(Error::UnsupportedTemplate(format!(
            "{} meshes have no geometric layers",
            other.name()
        ))),
    })
}
