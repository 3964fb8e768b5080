//! Parametrized boundary curves. Every curve is parametrized over `[0, 1]` and
//! traversed with the domain interior on its left.

use serde::{Deserialize, Serialize};

use super::trig::TrigPoly;
use crate::geometry::Point;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryTag {
    /// Essential (Dirichlet) part of the boundary.
    Dirichlet,
    /// Natural (conormal / Neumann) part of the boundary.
    Neumann,
}

impl BoundaryTag {
    pub fn letter(self) -> char {
        match self {
            BoundaryTag::Dirichlet => 'D',
            BoundaryTag::Neumann => 'N',
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CurveGeom {
    Segment {
        a: Point,
        b: Point,
    },
    Arc {
        center: Point,
        radius: f64,
        theta0: f64,
        theta1: f64,
    },
    /// `r -> (r, r^alpha * y)` for `r` running from `r0` to `r1`.
    PowerWall {
        alpha: f64,
        y: f64,
        r0: f64,
        r1: f64,
    },
    /// `t -> e^t (cos f(t), sin f(t))` for `t` running from `t0` to `t1`.
    ProfileWall {
        profile: TrigPoly,
        t0: f64,
        t1: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurve {
    pub name: String,
    pub geom: CurveGeom,
    pub tag: BoundaryTag,
}

/// Position with first and second parameter derivatives.
#[derive(Clone, Copy, Debug)]
pub struct CurveJet {
    pub pos: Point,
    pub d1: Point,
    pub d2: Point,
}

impl CurveJet {
    /// Signed curvature; positive when the curve turns towards its left (interior) side.
    pub fn curvature(&self) -> f64 {
        self.d1.cross(self.d2) / self.d1.norm().powi(3)
    }

    /// Unit normal pointing into the domain.
    pub fn inward_normal(&self) -> Point {
        let t = self.d1.scale(1.0 / self.d1.norm());
        t.perp()
    }
}

impl CurveGeom {
    pub fn jet(&self, s: f64) -> CurveJet {
        match self {
            CurveGeom::Segment { a, b } => CurveJet {
                pos: *a + s * (*b - *a),
                d1: *b - *a,
                d2: Point::ORIGIN,
            },
            CurveGeom::Arc {
                center,
                radius,
                theta0,
                theta1,
            } => {
                let span = theta1 - theta0;
                let th = theta0 + s * span;
                let (sn, cs) = th.sin_cos();
                CurveJet {
                    pos: *center + Point::new(radius * cs, radius * sn),
                    d1: Point::new(-radius * sn * span, radius * cs * span),
                    d2: Point::new(-radius * cs * span * span, -radius * sn * span * span),
                }
            }
            CurveGeom::PowerWall { alpha, y, r0, r1 } => {
                let dr = r1 - r0;
                let r = r0 + s * dr;
                let (a, y) = (*alpha, *y);
                let (p, p1, p2) = if r > 0.0 {
                    (r.powf(a), a * r.powf(a - 1.0), a * (a - 1.0) * r.powf(a - 2.0))
                } else {
                    (0.0, 0.0, f64::INFINITY)
                };
                CurveJet {
                    pos: Point::new(r, p * y),
                    d1: Point::new(dr, p1 * y * dr),
                    d2: Point::new(0.0, p2 * y * dr * dr),
                }
            }
            CurveGeom::ProfileWall { profile, t0, t1 } => {
                let dt = t1 - t0;
                let t = t0 + s * dt;
                let (f, f1, f2) = profile.eval3(t);
                let e = t.exp();
                let (sn, cs) = f.sin_cos();
                // z(t) = e^{t + i f(t)}: z' = (1 + i f') z, z'' = ((1 + i f')^2 + i f'') z
                let z = Point::new(e * cs, e * sn);
                let mul = |a: f64, b: f64, w: Point| Point::new(a * w.x - b * w.y, a * w.y + b * w.x);
                let zp = mul(1.0, f1, z);
                let (re, im) = (1.0 - f1 * f1, 2.0 * f1 + f2);
                let zpp = mul(re, im, z);
                CurveJet {
                    pos: z,
                    d1: zp.scale(dt),
                    d2: zpp.scale(dt * dt),
                }
            }
        }
    }

    pub fn point(&self, s: f64) -> Point {
        self.jet(s).pos
    }

    pub fn start(&self) -> Point {
        self.point(0.0)
    }

    pub fn end(&self) -> Point {
        self.point(1.0)
    }

    /// Polyline with `n` segments.
    pub fn polyline(&self, n: usize) -> Vec<Point> {
        (0..=n).map(|i| self.point(i as f64 / n as f64)).collect()
    }
}
