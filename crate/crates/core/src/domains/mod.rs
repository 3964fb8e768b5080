//! Catalog of singular planar domains and the weights attached to their singular points.

pub mod curve;
pub mod trig;
pub mod weight;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub use curve::{BoundaryCurve, BoundaryTag, CurveGeom, CurveJet};
pub use trig::TrigPoly;
pub use weight::{eval_log_gradient, eval_weight, Factor, Weight};

use crate::error::{Error, Result};
use crate::geometry::{point_segment_distance, segments_intersect, Point};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SingularKind {
    Conical {
        omega: f64,
    },
    Cusp {
        alpha: f64,
    },
    /// Oscillating cone; `min_gap` is a certified lower bound of `f1 - f0`.
    Oscillating {
        min_gap: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularPoint {
    pub position: Point,
    pub kind: SingularKind,
    pub lambda: f64,
    pub epsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Template {
    /// `{0 < theta < omega, r < 1}`.
    Sector { omega: f64 },
    /// Image of `(r, y) -> (r, r^alpha y)` over `(r_cut, 1) x [y0, y1]`.
    Cusp { alpha: f64, y0: f64, y1: f64, r_cut: f64 },
    /// `{f0(log r) < theta < f1(log r)}` truncated to `log r in [-t_max, 0]`.
    OscillatingCone { f0: TrigPoly, f1: TrigPoly, t_max: f64 },
    /// `[-2, 2] x [0, 3]` minus the closed unit disk centered at `(0, 1)`; the
    /// disk touches the bottom edge at the origin, which carries two cusps.
    CircleCusp,
}

impl Template {
    pub fn name(&self) -> &'static str {
        match self {
            Template::Sector { .. } => "sector",
            Template::Cusp { .. } => "cusp",
            Template::OscillatingCone { .. } => "oscillating",
            Template::CircleCusp => "circle-cusp",
        }
    }
}

/// Minimum profile gap accepted for oscillating cones.
pub const MIN_PROFILE_GAP: f64 = 1e-3;

/// Corners of the circle-cusp example.
pub const CIRCLE_CUSP_CORNERS: [Point; 4] = [
    Point::new(2.0, 0.0),
    Point::new(2.0, 3.0),
    Point::new(-2.0, 3.0),
    Point::new(-2.0, 0.0),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub template: Template,
    /// Weight exponent attached to every singular point (circle-cusp uses its own defaults).
    pub lambda: f64,
    pub epsilon: f64,
    /// Names of curves carrying the natural condition; all others are Dirichlet.
    pub neumann: Vec<String>,
}

impl DomainSpec {
    pub fn new(template: Template) -> Self {
        DomainSpec {
            template,
            lambda: 1.0,
            epsilon: 0.5,
            neumann: Vec::new(),
        }
    }

    pub fn sector(omega: f64) -> Self {
        DomainSpec::new(Template::Sector { omega })
    }

    pub fn cusp(alpha: f64, y0: f64, y1: f64) -> Self {
        DomainSpec::new(Template::Cusp {
            alpha,
            y0,
            y1,
            r_cut: 0.0,
        })
    }

    pub fn oscillating(f0: TrigPoly, f1: TrigPoly, t_max: f64) -> Self {
        DomainSpec::new(Template::OscillatingCone { f0, f1, t_max })
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_neumann(mut self, names: &[&str]) -> Self {
        self.neumann = names.iter().map(|s| s.to_string()).collect();
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain2D {
    pub spec: DomainSpec,
    pub singular_points: Vec<SingularPoint>,
    pub boundary: Vec<BoundaryCurve>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub fn make_domain(spec: &DomainSpec) -> Result<Domain2D> {
    if !(spec.lambda > 0.0) {
        return Err(invalid(format!("lambda must be > 0, got {}", spec.lambda)));
    }
    if !(spec.epsilon > 0.0) {
        return Err(invalid(format!("epsilon must be > 0, got {}", spec.epsilon)));
    }
    let (lambda, epsilon) = (spec.lambda, spec.epsilon);
    let point = |position, kind| SingularPoint {
        position,
        kind,
        lambda,
        epsilon,
    };
    let seg = |name: &str, a, b| (name.to_string(), CurveGeom::Segment { a, b });

    let (singular_points, curves): (Vec<SingularPoint>, Vec<(String, CurveGeom)>) = match &spec.template {
        &Template::Sector { omega } => {
            if !(omega > 0.0 && omega <= 2.0 * PI) {
                return Err(invalid(format!("sector angle must lie in (0, 2pi], got {omega}")));
            }
            let tip = Point::polar(1.0, omega);
            (
                vec![point(Point::ORIGIN, SingularKind::Conical { omega })],
                vec![
                    seg("edge0", Point::ORIGIN, Point::new(1.0, 0.0)),
                    (
                        "arc".into(),
                        CurveGeom::Arc {
                            center: Point::ORIGIN,
                            radius: 1.0,
                            theta0: 0.0,
                            theta1: omega,
                        },
                    ),
                    seg("edge1", tip, Point::ORIGIN),
                ],
            )
        }
        &Template::Cusp { alpha, y0, y1, r_cut } => {
            if !(alpha > 1.0) {
                return Err(invalid(format!("cusp order must be > 1, got {alpha}")));
            }
            if !(y0 < y1) {
                return Err(invalid(format!("cusp interval must satisfy y0 < y1, got [{y0}, {y1}]")));
            }
            if !(0.0..1.0).contains(&r_cut) {
                return Err(invalid(format!("r_cut must lie in [0, 1), got {r_cut}")));
            }
            let mut curves = vec![
                (
                    "lower".into(),
                    CurveGeom::PowerWall {
                        alpha,
                        y: y0,
                        r0: r_cut,
                        r1: 1.0,
                    },
                ),
                seg("cap", Point::new(1.0, y0), Point::new(1.0, y1)),
                (
                    "upper".into(),
                    CurveGeom::PowerWall {
                        alpha,
                        y: y1,
                        r0: 1.0,
                        r1: r_cut,
                    },
                ),
            ];
            if r_cut > 0.0 {
                let p = r_cut.powf(alpha);
                curves.push(seg("tip", Point::new(r_cut, p * y1), Point::new(r_cut, p * y0)));
            }
            (vec![point(Point::ORIGIN, SingularKind::Cusp { alpha })], curves)
        }
        Template::OscillatingCone { f0, f1, t_max } => {
            let t_max = *t_max;
            if !(t_max > 0.0) {
                return Err(invalid(format!("truncation T must be > 0, got {t_max}")));
            }
            let gap = f1.difference(f0).min_lower_bound(-t_max, 0.0);
            if !(gap >= MIN_PROFILE_GAP) {
                return Err(invalid(format!(
                    "profiles must satisfy f1 - f0 >= {MIN_PROFILE_GAP}; certified lower bound is {gap:.3e}"
                )));
            }
            let lo = f0.min_lower_bound(-t_max, 0.0);
            let hi = f1.max_upper_bound(-t_max, 0.0);
            if !(lo > 0.0 && hi < 2.0 * PI) {
                return Err(invalid(format!(
                    "profiles must take values in (0, 2pi); observed range [{lo:.4}, {hi:.4}]"
                )));
            }
            let inner = (-t_max).exp();
            (
                vec![point(Point::ORIGIN, SingularKind::Oscillating { min_gap: gap })],
                vec![
                    (
                        "lower".into(),
                        CurveGeom::ProfileWall {
                            profile: f0.clone(),
                            t0: -t_max,
                            t1: 0.0,
                        },
                    ),
                    (
                        "outer".into(),
                        CurveGeom::Arc {
                            center: Point::ORIGIN,
                            radius: 1.0,
                            theta0: f0.eval(0.0),
                            theta1: f1.eval(0.0),
                        },
                    ),
                    (
                        "upper".into(),
                        CurveGeom::ProfileWall {
                            profile: f1.clone(),
                            t0: 0.0,
                            t1: -t_max,
                        },
                    ),
                    (
                        "inner".into(),
                        CurveGeom::Arc {
                            center: Point::ORIGIN,
                            radius: inner,
                            theta0: f1.eval(-t_max),
                            theta1: f0.eval(-t_max),
                        },
                    ),
                ],
            )
        }
        Template::CircleCusp => {
            let [a1, a2, a3, a4] = CIRCLE_CUSP_CORNERS;
            let corner = |p| SingularPoint {
                position: p,
                kind: SingularKind::Conical { omega: 0.5 * PI },
                lambda: 1.0,
                epsilon,
            };
            let cusp = || SingularPoint {
                position: Point::ORIGIN,
                kind: SingularKind::Cusp { alpha: 2.0 },
                lambda: 2.0,
                epsilon: 1.0,
            };
            (
                // the origin is doubled: one record per cusp branch
                vec![cusp(), cusp(), corner(a1), corner(a2), corner(a3), corner(a4)],
                vec![
                    seg("bottom-right", Point::ORIGIN, a1),
                    seg("right", a1, a2),
                    seg("top", a2, a3),
                    seg("left", a3, a4),
                    seg("bottom-left", a4, Point::ORIGIN),
                    (
                        "circle".into(),
                        CurveGeom::Arc {
                            center: Point::new(0.0, 1.0),
                            radius: 1.0,
                            theta0: -0.5 * PI,
                            theta1: -2.5 * PI,
                        },
                    ),
                ],
            )
        }
    };

    for name in &spec.neumann {
        if !curves.iter().any(|(n, _)| n == name) {
            let known: Vec<&str> = curves.iter().map(|(n, _)| n.as_str()).collect();
            return Err(invalid(format!(
                "unknown boundary curve '{name}' (known: {})",
                known.join(", ")
            )));
        }
    }
    let boundary = curves
        .into_iter()
        .map(|(name, geom)| {
            let tag = if spec.neumann.contains(&name) {
                BoundaryTag::Neumann
            } else {
                BoundaryTag::Dirichlet
            };
            BoundaryCurve { name, geom, tag }
        })
        .collect();
    let domain = Domain2D {
        spec: spec.clone(),
        singular_points,
        boundary,
    };
    domain.validate()?;
    Ok(domain)
}

impl Domain2D {
    pub fn template(&self) -> &Template {
        &self.spec.template
    }

    /// Checks chain closure, simplicity away from singular points, and that every
    /// singular point lies on the boundary.
    pub fn validate(&self) -> Result<()> {
        let n = self.boundary.len();
        let scale = 1e-9;
        for i in 0..n {
            let end = self.boundary[i].geom.end();
            let next = self.boundary[(i + 1) % n].geom.start();
            if end.dist(next) > scale {
                return Err(invalid(format!(
                    "boundary chain is open between '{}' and '{}'",
                    self.boundary[i].name,
                    self.boundary[(i + 1) % n].name
                )));
            }
        }
        let polys: Vec<Vec<Point>> = self.boundary.iter().map(|c| c.geom.polyline(96)).collect();
        for i in 0..n {
            for j in i..n {
                for (a, sa) in polys[i].windows(2).enumerate() {
                    for (b, sb) in polys[j].windows(2).enumerate() {
                        if i == j && a.abs_diff(b) <= 1 {
                            continue;
                        }
                        if segments_intersect(sa[0], sa[1], sb[0], sb[1]) {
                            return Err(Error::SelfIntersecting { first: i, second: j });
                        }
                    }
                }
            }
        }
        let truncation = match self.spec.template {
            Template::OscillatingCone { t_max, .. } => (-t_max).exp(),
            Template::Cusp { r_cut, .. } => r_cut,
            _ => 0.0,
        };
        for sp in &self.singular_points {
            let d = polys
                .iter()
                .flat_map(|p| p.windows(2).map(|s| point_segment_distance(sp.position, s[0], s[1])))
                .fold(f64::INFINITY, f64::min);
            if d > truncation * (1.0 + 1e-9) + 1e-9 {
                return Err(invalid(format!(
                    "singular point ({}, {}) is not on the boundary",
                    sp.position.x, sp.position.y
                )));
            }
        }
        Ok(())
    }

    pub fn curve_index(&self, name: &str) -> Option<usize> {
        self.boundary.iter().position(|c| c.name == name)
    }

    /// Distinct singular positions with the first record's exponent.
    pub fn singular_positions(&self) -> Vec<(Point, f64, f64)> {
        let mut out: Vec<(Point, f64, f64)> = Vec::new();
        for sp in &self.singular_points {
            if !out.iter().any(|(p, _, _)| *p == sp.position) {
                out.push((sp.position, sp.lambda, sp.epsilon));
            }
        }
        out
    }

    /// `rho`: product over singular points of `|x - P|^lambda_P`, mollified unless `exact`.
    pub fn rho(&self, exact: bool) -> Weight {
        let factors = self
            .singular_positions()
            .into_iter()
            .flat_map(|(p, lambda, _)| {
                if exact {
                    Weight::radial_power_at(p, lambda).factors
                } else {
                    Weight::mollified(p, lambda).factors
                }
            })
            .collect();
        Weight { factors }
    }

    /// Second weight `f`: `|x - P|` (mollified unless `exact`) where `lambda = 1`
    /// and `exp(-(r/eps)^-eps)` times it where `lambda = 1 + eps > 1`.
    pub fn f_weight(&self, exact: bool) -> Weight {
        let mut factors = Vec::new();
        for (p, lambda, eps) in self.singular_positions() {
            if lambda > 1.0 {
                factors.push(Factor::ExponentialCusp {
                    center: p,
                    epsilon: eps,
                    scale: 1.0,
                });
            } else if exact {
                factors.push(Factor::RadialPower {
                    center: p,
                    exponent: lambda,
                });
            } else {
                factors.extend(Weight::mollified(p, lambda).factors);
            }
        }
        Weight { factors }
    }
}

/// The weights of the circle-cusp example in closed form:
/// `rho = r^2 prod |x - A_i|` and `f = e^{-1/r} prod |x - A_i|`.
pub fn circle_cusp_weights() -> (Weight, Weight) {
    let corners: Vec<Factor> = CIRCLE_CUSP_CORNERS
        .iter()
        .map(|&c| Factor::RadialPower {
            center: c,
            exponent: 1.0,
        })
        .collect();
    let mut rho = vec![Factor::RadialPower {
        center: Point::ORIGIN,
        exponent: 2.0,
    }];
    rho.extend(corners.iter().cloned());
    let mut f = vec![Factor::ExponentialCusp {
        center: Point::ORIGIN,
        epsilon: 1.0,
        scale: 1.0,
    }];
    f.extend(corners);
    (Weight { factors: rho }, Weight { factors: f })
}

pub fn distance_to_singular_set(d: &Domain2D, x: Point) -> f64 {
    d.singular_points
        .iter()
        .map(|sp| sp.position.dist(x))
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sector_three_halves_pi() {
        let d = make_domain(&DomainSpec::sector(1.5 * PI)).unwrap();
        assert_eq!(d.singular_points.len(), 1);
        assert!(matches!(
            d.singular_points[0].kind,
            SingularKind::Conical { omega } if omega == 1.5 * PI
        ));
        assert_eq!(d.boundary.len(), 3);
        let names: Vec<_> = d.boundary.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["edge0", "arc", "edge1"]);
        assert!(d.boundary.iter().all(|c| c.tag == BoundaryTag::Dirichlet));
    }

    #[test]
    fn cusp_domain_walls_follow_chart() {
        let d = make_domain(&DomainSpec::cusp(2.0, -1.0, 1.0)).unwrap();
        assert_eq!(d.boundary.len(), 3);
        let lower = &d.boundary[0].geom;
        let p = lower.point(0.5);
        assert_eq!(p, Point::new(0.5, -0.25));
        let cap = &d.boundary[1].geom;
        assert_eq!(cap.start(), Point::new(1.0, -1.0));
        assert_eq!(cap.end(), Point::new(1.0, 1.0));
        assert_eq!(d.boundary[2].geom.point(0.5), Point::new(0.5, 0.25));
    }

    #[test]
    fn oscillating_cone_requires_gap() {
        let f0 = TrigPoly::constant(PI / 4.0);
        let f1 = TrigPoly::constant(0.75 * PI).with_term(0.2, 1.0, trig::Harmonic::Sin);
        assert!(make_domain(&DomainSpec::oscillating(f0.clone(), f1, 5.0)).is_ok());
        let err = make_domain(&DomainSpec::oscillating(f0.clone(), f0, 5.0)).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(m) if m.contains("f1 - f0")));
    }

    #[test]
    fn invalid_parameters_are_reported() {
        assert!(make_domain(&DomainSpec::sector(0.0)).is_err());
        assert!(make_domain(&DomainSpec::sector(7.0)).is_err());
        assert!(make_domain(&DomainSpec::cusp(1.0, -1.0, 1.0)).is_err());
        assert!(make_domain(&DomainSpec::cusp(2.0, 1.0, -1.0)).is_err());
        assert!(make_domain(&DomainSpec::sector(1.0).with_lambda(0.0)).is_err());
        assert!(make_domain(&DomainSpec::sector(1.0).with_neumann(&["nope"])).is_err());
    }

    #[test]
    fn neumann_tags_apply_to_whole_curves() {
        let d = make_domain(&DomainSpec::sector(PI / 2.0).with_neumann(&["arc"])).unwrap();
        let tags: Vec<_> = d.boundary.iter().map(|c| c.tag).collect();
        assert_eq!(
            tags,
            [BoundaryTag::Dirichlet, BoundaryTag::Neumann, BoundaryTag::Dirichlet]
        );
    }

    #[test]
    fn circle_cusp_is_valid_with_double_origin() {
        let d = make_domain(&DomainSpec::new(Template::CircleCusp)).unwrap();
        let at_origin = d.singular_points.iter().filter(|s| s.position == Point::ORIGIN).count();
        assert_eq!(at_origin, 2);
        assert_eq!(distance_to_singular_set(&d, Point::ORIGIN), 0.0);
        // mirror symmetry of the boundary
        for c in &d.boundary {
            for i in 0..=8 {
                let p = c.geom.point(i as f64 / 8.0);
                let m = Point::new(-p.x, p.y);
                let dmin = d
                    .boundary
                    .iter()
                    .flat_map(|c| c.geom.polyline(2048))
                    .map(|q| q.dist(m))
                    .fold(f64::INFINITY, f64::min);
                assert!(dmin < 2e-3, "mirror of {p:?} not on boundary");
            }
        }
    }

    #[test]
    fn circle_cusp_rho_at_unit_point() {
        let (rho, _) = circle_cusp_weights();
        let x = Point::new(1.0, 0.0);
        // r = 1; corners (2,0), (2,3), (-2,3), (-2,0)
        let expect = 1.0 * 1.0 * 10f64.sqrt() * 18f64.sqrt() * 3.0;
        assert!((rho.eval(x).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn distances_to_singular_set() {
        let d = make_domain(&DomainSpec::sector(1.0)).unwrap();
        assert!((distance_to_singular_set(&d, Point::new(0.3, 0.4)) - 0.5).abs() < 1e-15);
        let mut two = d.clone();
        two.singular_points.push(SingularPoint {
            position: Point::new(1.0, 0.0),
            kind: SingularKind::Conical { omega: 1.0 },
            lambda: 1.0,
            epsilon: 0.5,
        });
        assert!((distance_to_singular_set(&two, Point::new(0.6, 0.0)) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn f_equals_rho_near_points_when_lambda_is_one() {
        let d = make_domain(&DomainSpec::sector(PI / 2.0)).unwrap();
        let (rho, f) = (d.rho(false), d.f_weight(false));
        for i in 1..=25 {
            let x = Point::polar(0.01 * i as f64, 0.7);
            assert_eq!(rho.eval(x).unwrap(), f.eval(x).unwrap());
        }
    }

    #[test]
    fn self_intersection_detected() {
        let mut d = make_domain(&DomainSpec::sector(PI / 2.0)).unwrap();
        // a cap that crosses the first edge
        d.boundary[1].geom = CurveGeom::Segment {
            a: Point::new(1.0, 0.0),
            b: Point::new(0.45, -0.5),
        };
        d.boundary.insert(
            2,
            BoundaryCurve {
                name: "x".into(),
                geom: CurveGeom::Segment {
                    a: Point::new(0.45, -0.5),
                    b: Point::new(0.45, 0.5),
                },
                tag: BoundaryTag::Dirichlet,
            },
        );
        d.boundary[3].geom = CurveGeom::Segment {
            a: Point::new(0.45, 0.5),
            b: Point::ORIGIN,
        };
        assert!(matches!(d.validate(), Err(Error::SelfIntersecting { .. })));
    }
}
