//! Closed-form positive weights built as products of radial factors.
//!
//! Every non-constant factor is a function of the distance `d = |x - c|` to its
//! center and is stored through its log-profile `h(d) = log w(d)` together with
//! `h'` and `h''`, so values, log-gradients and Hessians are all analytic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Mat2, Point};

pub const DEFAULT_R0: f64 = 0.25;
pub const DEFAULT_R1: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Factor {
    /// `|x - center|^exponent` inside `r0`, constant outside `r1`, monotone in between.
    MollifiedDistancePower {
        center: Point,
        exponent: f64,
        r0: f64,
        r1: f64,
    },
    /// `exp(-scale * (r / epsilon)^(-epsilon))`; `scale` is 1 for the plain cusp weight.
    ExponentialCusp {
        center: Point,
        epsilon: f64,
        scale: f64,
    },
    /// `|x - center|^exponent`.
    RadialPower {
        center: Point,
        exponent: f64,
    },
    Constant(f64),
}

/// Log-profile `(h, h', h'')` of a radial factor at distance `d`.
fn radial_profile(factor: &Factor, d: f64) -> (f64, f64, f64) {
    match *factor {
        Factor::RadialPower { exponent, .. } => (exponent * d.ln(), exponent / d, -exponent / (d * d)),
        Factor::ExponentialCusp { epsilon, scale, .. } => {
            let c = scale * epsilon.powf(epsilon);
            let p = d.powf(-epsilon);
            (
                -c * p,
                c * epsilon * p / d,
                -c * epsilon * (epsilon + 1.0) * p / (d * d),
            )
        }
        Factor::MollifiedDistancePower { exponent, r0, r1, .. } => {
            let (phi, dphi, ddphi) = mollified_log(d.ln(), r0.ln(), r1.ln());
            (exponent * phi, exponent * dphi / d, exponent * (ddphi - dphi) / (d * d))
        }
        Factor::Constant(c) => (c.ln(), 0.0, 0.0),
    }
}

/// `phi(s)` with `phi = s` below `s0`, constant above `s1` and `phi' = 1 - S(tau)`
/// in between, `S` the C^3 septic smoothstep. Returns `(phi, phi', phi'')`.
fn mollified_log(s: f64, s0: f64, s1: f64) -> (f64, f64, f64) {
    let width = s1 - s0;
    let tau = (s - s0) / width;
    if tau <= 0.0 {
        (s, 1.0, 0.0)
    } else if tau >= 1.0 {
        (s0 + 0.5 * width, 0.0, 0.0)
    } else {
        let t2 = tau * tau;
        let t3 = t2 * tau;
        let t4 = t3 * tau;
        let step = t4 * (35.0 - 84.0 * tau + 70.0 * t2 - 20.0 * t3);
        let step_int = t4 * tau * (7.0 - 14.0 * tau + 10.0 * t2 - 2.5 * t3);
        let step_der = 140.0 * t3 * (1.0 - tau).powi(3);
        (s0 + width * (tau - step_int), 1.0 - step, -step_der / width)
    }
}

impl Factor {
    pub fn center(&self) -> Option<Point> {
        match *self {
            Factor::MollifiedDistancePower { center, .. }
            | Factor::ExponentialCusp { center, .. }
            | Factor::RadialPower { center, .. } => Some(center),
            Factor::Constant(_) => None,
        }
    }

    fn check(&self) -> Result<()> {
        let ok = match *self {
            Factor::MollifiedDistancePower { exponent, r0, r1, .. } => exponent.is_finite() && r0 > 0.0 && r1 > r0,
            Factor::ExponentialCusp { epsilon, scale, .. } => epsilon > 0.0 && scale.is_finite(),
            Factor::RadialPower { exponent, .. } => exponent.is_finite(),
            Factor::Constant(c) => c > 0.0 && c.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("bad weight factor {self:?}")))
        }
    }

    /// `(log w, d log w, Hess log w)` at `x`.
    fn log_jet(&self, x: Point) -> Result<(f64, Point, Mat2)> {
        let Some(center) = self.center() else {
            let (h, _, _) = radial_profile(self, 1.0);
            return Ok((h, Point::ORIGIN, Mat2::ZERO));
        };
        let v = x - center;
        let d = v.norm();
        if d == 0.0 {
            return Err(Error::Domain(format!(
                "weight factor evaluated at its singular center ({}, {})",
                center.x, center.y
            )));
        }
        let (h, h1, h2) = radial_profile(self, d);
        let e = v.scale(1.0 / d);
        let ee = Mat2::outer(e, e);
        let hess = ee.scale(h2).add(&Mat2::IDENTITY.sub(&ee).scale(h1 / d));
        Ok((h, e.scale(h1), hess))
    }
}

/// Product of primitive factors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    pub factors: Vec<Factor>,
}

impl Weight {
    pub fn new(factors: Vec<Factor>) -> Result<Self> {
        for f in &factors {
            f.check()?;
        }
        Ok(Weight { factors })
    }

    pub fn one() -> Self {
        Weight {
            factors: vec![Factor::Constant(1.0)],
        }
    }

    pub fn constant(c: f64) -> Result<Self> {
        Weight::new(vec![Factor::Constant(c)])
    }

    /// `r^exponent` about the origin.
    pub fn radial_power(exponent: f64) -> Self {
        Weight::radial_power_at(Point::ORIGIN, exponent)
    }

    pub fn radial_power_at(center: Point, exponent: f64) -> Self {
        Weight {
            factors: vec![Factor::RadialPower { center, exponent }],
        }
    }

    pub fn exponential_cusp(center: Point, epsilon: f64) -> Result<Self> {
        Weight::new(vec![Factor::ExponentialCusp {
            center,
            epsilon,
            scale: 1.0,
        }])
    }

    pub fn mollified(center: Point, exponent: f64) -> Self {
        Weight {
            factors: vec![Factor::MollifiedDistancePower {
                center,
                exponent,
                r0: DEFAULT_R0,
                r1: DEFAULT_R1,
            }],
        }
    }

    pub fn times(mut self, other: &Weight) -> Self {
        self.factors.extend(other.factors.iter().cloned());
        self
    }

    /// `w^s`, obtained by scaling every factor's exponent.
    pub fn pow(&self, s: f64) -> Self {
        let factors = self
            .factors
            .iter()
            .map(|f| match *f {
                Factor::MollifiedDistancePower {
                    center,
                    exponent,
                    r0,
                    r1,
                } => Factor::MollifiedDistancePower {
                    center,
                    exponent: exponent * s,
                    r0,
                    r1,
                },
                Factor::ExponentialCusp { center, epsilon, scale } => Factor::ExponentialCusp {
                    center,
                    epsilon,
                    scale: scale * s,
                },
                Factor::RadialPower { center, exponent } => Factor::RadialPower {
                    center,
                    exponent: exponent * s,
                },
                Factor::Constant(c) => Factor::Constant(c.powf(s)),
            })
            .collect();
        Weight { factors }
    }

    /// Centers of all non-constant factors.
    pub fn centers(&self) -> Vec<Point> {
        self.factors.iter().filter_map(Factor::center).collect()
    }

    /// `(log w, d log w, Hess log w)`.
    pub fn log_jet(&self, x: Point) -> Result<(f64, Point, Mat2)> {
        let mut h = 0.0;
        let mut g = Point::ORIGIN;
        let mut hess = Mat2::ZERO;
        for f in &self.factors {
            let (fh, fg, fhess) = f.log_jet(x)?;
            h += fh;
            g = g + fg;
            hess = hess.add(&fhess);
        }
        Ok((h, g, hess))
    }

    pub fn eval(&self, x: Point) -> Result<f64> {
        Ok(self.log_jet(x)?.0.exp())
    }

    pub fn log_gradient(&self, x: Point) -> Result<Point> {
        Ok(self.log_jet(x)?.1)
    }

    pub fn log_hessian(&self, x: Point) -> Result<Mat2> {
        Ok(self.log_jet(x)?.2)
    }

    pub fn gradient(&self, x: Point) -> Result<Point> {
        let (h, g, _) = self.log_jet(x)?;
        Ok(g.scale(h.exp()))
    }

    /// `Hess w = w (Hess log w + d log w (x) d log w)`.
    pub fn hessian(&self, x: Point) -> Result<Mat2> {
        let (h, g, hess) = self.log_jet(x)?;
        Ok(hess.add(&Mat2::outer(g, g)).scale(h.exp()))
    }
}

pub fn eval_weight(w: &Weight, x: Point) -> Result<f64> {
    w.eval(x)
}

pub fn eval_log_gradient(w: &Weight, x: Point) -> Result<Point> {
    w.log_gradient(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_log_gradient(w: &Weight, x: Point, h: f64) -> Point {
        let lw = |p: Point| w.eval(p).unwrap().ln();
        let ex = Point::new(h, 0.0);
        let ey = Point::new(0.0, h);
        Point::new(
            (lw(x + ex) - lw(x - ex)) / (2.0 * h),
            (lw(x + ey) - lw(x - ey)) / (2.0 * h),
        )
    }

    fn catalog() -> Vec<Weight> {
        let c = Point::new(0.1, -0.2);
        vec![
            Weight::radial_power(1.0),
            Weight::radial_power(0.5),
            Weight::radial_power_at(c, 2.0),
            Weight::exponential_cusp(Point::ORIGIN, 0.5).unwrap(),
            Weight::mollified(Point::ORIGIN, 1.0),
            Weight::mollified(c, 1.5).times(&Weight::radial_power_at(Point::new(1.0, 1.0), 1.0)),
            Weight::constant(3.0).unwrap(),
            Weight::radial_power(1.0).pow(-0.3),
        ]
    }

    #[test]
    fn radial_power_value() {
        let w = Weight::radial_power(1.0);
        assert_eq!(w.eval(Point::new(0.5, 0.0)).unwrap(), 0.5);
    }

    #[test]
    fn exponential_cusp_value_at_epsilon() {
        let w = Weight::exponential_cusp(Point::ORIGIN, 0.5).unwrap();
        let v = w.eval(Point::new(0.5, 0.0)).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn log_gradient_examples() {
        let g = Weight::radial_power(1.0).log_gradient(Point::new(0.5, 0.0)).unwrap();
        assert_eq!(g, Point::new(2.0, 0.0));

        let w = Weight::exponential_cusp(Point::ORIGIN, 0.5).unwrap();
        let g = w.log_gradient(Point::new(0.0, 0.25)).unwrap();
        // eps^{1+eps} r^{-eps-1} = 0.5^1.5 * 0.25^-1.5
        let expect = 0.5f64.powf(1.5) * 0.25f64.powf(-1.5);
        assert!((g.norm() - expect).abs() < 1e-12);
        assert!((g.norm() - 2.8284).abs() < 1e-4);

        let z = Weight::constant(3.0)
            .unwrap()
            .log_gradient(Point::new(0.3, 0.7))
            .unwrap();
        assert_eq!(z, Point::ORIGIN);
    }

    #[test]
    fn evaluation_at_center_is_a_domain_error() {
        let w = Weight::radial_power(-1.0);
        assert!(matches!(w.eval(Point::ORIGIN), Err(Error::Domain(_))));
        assert!(Weight::mollified(Point::ORIGIN, 1.0)
            .log_gradient(Point::ORIGIN)
            .is_err());
    }

    #[test]
    fn log_gradient_matches_centered_differences() {
        let samples = [
            Point::new(0.3, 0.1),
            Point::new(-0.2, 0.35),
            Point::new(0.05, 0.02),
            Point::new(0.4, -0.3),
            Point::new(0.7, 0.6),
        ];
        for w in catalog() {
            for &x in &samples {
                let dist = w.centers().iter().map(|c| c.dist(x)).fold(1.0f64, f64::min);
                let g = w.log_gradient(x).unwrap();
                let fd = fd_log_gradient(&w, x, 1e-5 * dist);
                let scale = g.norm().max(1e-300);
                if g.norm() == 0.0 {
                    assert!(fd.norm() < 1e-9);
                } else {
                    assert!((g - fd).norm() / scale <= 1e-6, "{w:?} at {x:?}: {g:?} vs {fd:?}");
                }
            }
        }
    }

    #[test]
    fn hessian_matches_differences_of_gradient() {
        let x = Point::new(0.31, 0.12);
        for w in catalog() {
            let h = 1e-6;
            let hess = w.log_hessian(x).unwrap();
            let gx = (w.log_gradient(x + Point::new(h, 0.0)).unwrap()
                - w.log_gradient(x - Point::new(h, 0.0)).unwrap())
            .scale(0.5 / h);
            let gy = (w.log_gradient(x + Point::new(0.0, h)).unwrap()
                - w.log_gradient(x - Point::new(0.0, h)).unwrap())
            .scale(0.5 / h);
            let tol = 1e-6 * hess.frobenius().max(1.0);
            assert!((hess.0[0][0] - gx.x).abs() < tol, "{w:?}");
            assert!((hess.0[1][0] - gx.y).abs() < tol, "{w:?}");
            assert!((hess.0[0][1] - gy.x).abs() < tol, "{w:?}");
            assert!((hess.0[1][1] - gy.y).abs() < tol, "{w:?}");
        }
    }

    #[test]
    fn mollified_power_is_exact_inside_and_flat_outside() {
        let w = Weight::mollified(Point::ORIGIN, 1.0);
        let r = Weight::radial_power(1.0);
        for d in [0.01, 0.1, 0.2, 0.25] {
            let x = Point::polar(d, 0.4);
            assert!((w.eval(x).unwrap() - r.eval(x).unwrap()).abs() < 1e-15);
        }
        for d in [0.5, 0.6, 2.0] {
            let x = Point::polar(d, 1.1);
            assert_eq!(w.log_gradient(x).unwrap(), Point::ORIGIN);
            assert!((w.eval(x).unwrap() - (DEFAULT_R0 * DEFAULT_R1).sqrt()).abs() < 1e-15);
        }
        // monotone across the transition
        let mut prev = 0.0;
        for i in 0..=100 {
            let d = 0.2 + 0.4 * i as f64 / 100.0;
            let v = w.eval(Point::new(d, 0.0)).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn power_scales_log_quantities() {
        let w = Weight::radial_power(1.0);
        let x = Point::new(0.3, 0.4);
        let ws = w.pow(2.5);
        assert!((ws.eval(x).unwrap() - 0.5f64.powf(2.5)).abs() < 1e-15);
        let g = ws.log_gradient(x).unwrap();
        assert!((g.norm() - 2.5 / 0.5).abs() < 1e-14);
    }
}
