use std::f64::consts::PI;

use crate::domains::{Domain2D, Template};
use crate::error::{Error, Result};
use crate::geometry::{Mat2, Point};
use crate::metric::CoefficientField;

#[derive(Clone, Debug, PartialEq)]
pub enum Solution {
    /// `Im z^gamma = r^gamma sin(gamma theta)`, `theta` in `[0, 2pi)`.
    Corner { gamma: f64 },
    /// `sin(pi x) sin(pi y)`.
    Smooth,
    /// `x^2 + y^2`.
    Quadratic,
    /// `a x + b y + c`.
    Affine { a: f64, b: f64, c: f64 },
    /// `x^beta phi(y / x^alpha)` with `phi` a half sine vanishing on both walls.
    CuspChart { alpha: f64, beta: f64, y0: f64, y1: f64 },
}

/// Closed-form solution with its derivatives; data are derived from it.
#[derive(Clone, Debug, PartialEq)]
pub struct Manufactured {
    pub id: String,
    pub solution: Solution,
    /// Points where the solution is not smooth.
    pub singular: Vec<Point>,
}

pub const CATALOG: [&str; 5] = ["corner", "smooth", "quadratic", "affine", "cusp-chart"];

/// Exponent of the cusp-chart solution.
pub const CUSP_CHART_BETA: f64 = 1.5;

pub fn manufactured_problem(d: Option<&Domain2D>, id: &str) -> Result<Manufactured> {
    let template = d.map(Domain2D::template);
    let (solution, singular) = match (id, template) {
        ("corner", Some(&Template::Sector { omega })) => (Solution::Corner { gamma: PI / omega }, vec![Point::ORIGIN]),
        ("corner", _) => {
            return Err(Error::UnknownProblem("corner requires a sector domain".into()));
        }
        ("smooth", _) => (Solution::Smooth, Vec::new()),
        ("quadratic", _) => (Solution::Quadratic, Vec::new()),
        ("affine", _) => (
            Solution::Affine {
                a: 1.0,
                b: -0.5,
                c: 0.25,
            },
            Vec::new(),
        ),
        ("cusp-chart", Some(&Template::Cusp { alpha, y0, y1, .. })) => (
            Solution::CuspChart {
                alpha,
                beta: CUSP_CHART_BETA,
                y0,
                y1,
            },
            vec![Point::ORIGIN],
        ),
        ("cusp-chart", _) => {
            return Err(Error::UnknownProblem("cusp-chart requires a cusp domain".into()));
        }
        _ => {
            return Err(Error::UnknownProblem(format!("'{id}' (known: {})", CATALOG.join(", "))));
        }
    };
    Ok(Manufactured {
        id: id.to_string(),
        solution,
        singular,
    })
}

fn polar_angle(x: Point) -> f64 {
    let t = x.angle();
    if t < 0.0 {
        t + 2.0 * PI
    } else {
        t
    }
}

/// `(phi, phi', phi'')` of the cusp profile.
fn half_sine(eta: f64, y0: f64, y1: f64) -> (f64, f64, f64) {
    let k = PI / (y1 - y0);
    let (s, c) = (k * (eta - y0)).sin_cos();
    (s, k * c, -k * k * s)
}

impl Manufactured {
    pub fn value(&self, x: Point) -> f64 {
        match self.solution {
            Solution::Corner { gamma } => {
                let r = x.norm();
                if r == 0.0 {
                    0.0
                } else {
                    r.powf(gamma) * (gamma * polar_angle(x)).sin()
                }
            }
            Solution::Smooth => (PI * x.x).sin() * (PI * x.y).sin(),
            Solution::Quadratic => x.norm_sq(),
            Solution::Affine { a, b, c } => a * x.x + b * x.y + c,
            Solution::CuspChart { alpha, beta, y0, y1 } => {
                if x.x <= 0.0 {
                    return 0.0;
                }
                let (phi, _, _) = half_sine(x.y * x.x.powf(-alpha), y0, y1);
                x.x.powf(beta) * phi
            }
        }
    }

    pub fn gradient(&self, x: Point) -> Point {
        match self.solution {
            Solution::Corner { gamma } => {
                let r = x.norm();
                let t = polar_angle(x);
                // F' = gamma z^(gamma-1); u_x = Im F', u_y = Re F'
                let m = gamma * r.powf(gamma - 1.0);
                let a = (gamma - 1.0) * t;
                Point::new(m * a.sin(), m * a.cos())
            }
            Solution::Smooth => {
                let (sx, cx) = (PI * x.x).sin_cos();
                let (sy, cy) = (PI * x.y).sin_cos();
                Point::new(PI * cx * sy, PI * sx * cy)
            }
            Solution::Quadratic => x.scale(2.0),
            Solution::Affine { a, b, .. } => Point::new(a, b),
            Solution::CuspChart { alpha, beta, y0, y1 } => {
                let eta = x.y * x.x.powf(-alpha);
                let (phi, dphi, _) = half_sine(eta, y0, y1);
                let g = beta * phi - alpha * eta * dphi;
                Point::new(x.x.powf(beta - 1.0) * g, x.x.powf(beta - alpha) * dphi)
            }
        }
    }

    pub fn hessian(&self, x: Point) -> Mat2 {
        match self.solution {
            Solution::Corner { gamma } => {
                let r = x.norm();
                let t = polar_angle(x);
                let m = gamma * (gamma - 1.0) * r.powf(gamma - 2.0);
                let a = (gamma - 2.0) * t;
                let (im, re) = (m * a.sin(), m * a.cos());
                Mat2([[im, re], [re, -im]])
            }
            Solution::Smooth => {
                let (sx, cx) = (PI * x.x).sin_cos();
                let (sy, cy) = (PI * x.y).sin_cos();
                let p2 = PI * PI;
                Mat2([[-p2 * sx * sy, p2 * cx * cy], [p2 * cx * cy, -p2 * sx * sy]])
            }
            Solution::Quadratic => Mat2::diag(2.0, 2.0),
            Solution::Affine { .. } => Mat2::ZERO,
            Solution::CuspChart { alpha, beta, y0, y1 } => {
                let eta = x.y * x.x.powf(-alpha);
                let (phi, dphi, ddphi) = half_sine(eta, y0, y1);
                let g = beta * phi - alpha * eta * dphi;
                let dg = (beta - alpha) * dphi - alpha * eta * ddphi;
                let uxx = x.x.powf(beta - 2.0) * ((beta - 1.0) * g - alpha * eta * dg);
                let uxy = x.x.powf(beta - alpha - 1.0) * dg;
                let uyy = x.x.powf(beta - 2.0 * alpha) * ddphi;
                Mat2([[uxx, uxy], [uxy, uyy]])
            }
        }
    }

    /// Load `F = -div(a grad u) + c u`.
    pub fn rhs(&self, a: &CoefficientField) -> Result<impl Fn(Point) -> f64 + Send + Sync + '_> {
        if a.tensor.divergence(Point::ORIGIN).is_none() {
            return Err(Error::InvalidParameter(
                "manufactured load needs a coefficient with a closed-form divergence".into(),
            ));
        }
        let a = a.clone();
        Ok(move |x: Point| {
            let am = a.a(x);
            let h = self.hessian(x);
            let contraction: f64 = (0..2)
                .flat_map(|i| (0..2).map(move |j| (i, j)))
                .map(|(i, j)| am.0[i][j] * h.0[i][j])
                .sum();
            let div = a.tensor.divergence(x).unwrap_or(Point::ORIGIN);
            -(contraction + div.dot(self.gradient(x))) + a.c.eval(x) * self.value(x)
        })
    }

    /// Conormal flux `(a grad u) . n`.
    pub fn flux<'a>(&'a self, a: &'a CoefficientField) -> impl Fn(Point, Point) -> f64 + Send + Sync + 'a {
        move |x: Point, n: Point| a.a(x).apply(self.gradient(x)).dot(n)
    }
}
