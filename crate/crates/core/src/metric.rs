//! Conformal rescaling `g = rho^-2 g0` and sampled certificates for the structural
//! hypotheses: weight admissibility, strong Legendre bounds, boundary curvature and
//! completeness of the rescaled metric.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domains::{Domain2D, Template, Weight};
use crate::error::{Error, Result};
use crate::geometry::{Mat2, Point};
use crate::quadrature::integrate_adaptive;

/// `g = rho^-2 g0` on the plane (dimension 2).
#[derive(Clone, Debug, PartialEq)]
pub struct ConformalMetric {
    pub rho: Weight,
}

impl ConformalMetric {
    pub const DIM: usize = 2;

    pub fn new(rho: Weight) -> Self {
        ConformalMetric { rho }
    }

    /// Scalar factor of the metric tensor, `rho^-2`.
    pub fn metric_factor(&self, x: Point) -> Result<f64> {
        Ok(self.rho.eval(x)?.powi(-2))
    }

    /// Density of `dvol_g` with respect to Lebesgue measure, `rho^-m`.
    pub fn volume_factor(&self, x: Point) -> Result<f64> {
        Ok(self.rho.eval(x)?.powi(-(Self::DIM as i32)))
    }

    /// `|xi|_g = rho |xi|_g0` for a covector `xi`.
    pub fn covector_norm(&self, x: Point, xi: Point) -> Result<f64> {
        Ok(self.rho.eval(x)? * xi.norm())
    }

    /// Gaussian curvature `rho^2 Laplace(log rho)` of the rescaled flat metric.
    pub fn gaussian_curvature(&self, x: Point) -> Result<f64> {
        let rho = self.rho.eval(x)?;
        Ok(rho * rho * self.rho.log_hessian(x)?.trace())
    }
}

/// Which metric measures covectors.
#[derive(Clone, Copy, Debug)]
pub enum MetricChoice<'a> {
    Euclidean,
    Conformal(&'a ConformalMetric),
}

#[derive(Clone)]
pub enum TensorField {
    Constant(Mat2),
    /// `(1 + c x^2) I`.
    QuadraticIsotropic {
        c: f64,
    },
    /// `R(phi) diag(major, minor) R(phi)^T` with `phi = twist (x + y)`.
    RotatedAnisotropic {
        major: f64,
        minor: f64,
        twist: f64,
    },
    /// `diag(2 + sin(k x), 1 + cos(k y) / 2)`.
    OscillatingDiagonal {
        k: f64,
    },
    /// Arbitrary field; its divergence is not available.
    Custom(Arc<dyn Fn(Point) -> Mat2 + Send + Sync>),
}

impl fmt::Debug for TensorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TensorField::Constant(m) => write!(f, "Constant({m:?})"),
            TensorField::QuadraticIsotropic { c } => write!(f, "QuadraticIsotropic({c})"),
            TensorField::RotatedAnisotropic { major, minor, twist } => {
                write!(f, "RotatedAnisotropic({major}, {minor}, {twist})")
            }
            TensorField::OscillatingDiagonal { k } => write!(f, "OscillatingDiagonal({k})"),
            TensorField::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl TensorField {
    pub fn eval(&self, x: Point) -> Mat2 {
        match self {
            TensorField::Constant(m) => *m,
            TensorField::QuadraticIsotropic { c } => Mat2::IDENTITY.scale(1.0 + c * x.x * x.x),
            &TensorField::RotatedAnisotropic { major, minor, twist } => {
                let (s, c) = (twist * (x.x + x.y)).sin_cos();
                let off = (major - minor) * c * s;
                Mat2([
                    [major * c * c + minor * s * s, off],
                    [off, major * s * s + minor * c * c],
                ])
            }
            TensorField::OscillatingDiagonal { k } => Mat2::diag(2.0 + (k * x.x).sin(), 1.0 + 0.5 * (k * x.y).cos()),
            TensorField::Custom(f) => f(x),
        }
    }

    /// Column divergence `(div a)_j = sum_i d_i a_ij`.
    pub fn divergence(&self, x: Point) -> Option<Point> {
        match self {
            TensorField::Constant(_) => Some(Point::ORIGIN),
            TensorField::QuadraticIsotropic { c } => Some(Point::new(2.0 * c * x.x, 0.0)),
            &TensorField::RotatedAnisotropic { major, minor, twist } => {
                let phi = twist * (x.x + x.y);
                let (s2, c2) = (2.0 * phi).sin_cos();
                let d = major - minor;
                // da/dphi = [[-d sin2phi, d cos2phi], [d cos2phi, d sin2phi]]
                Some(Point::new(twist * (-d * s2 + d * c2), twist * (d * c2 + d * s2)))
            }
            TensorField::OscillatingDiagonal { k } => Some(Point::new(k * (k * x.x).cos(), -0.5 * k * (k * x.y).sin())),
            TensorField::Custom(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ZerothOrder {
    Zero,
    Constant(f64),
    /// `amplitude (1 + sin(k x) sin(k y))`, nonnegative for `amplitude >= 0`.
    Oscillating {
        amplitude: f64,
        k: f64,
    },
}

impl ZerothOrder {
    pub fn eval(&self, x: Point) -> f64 {
        match *self {
            ZerothOrder::Zero => 0.0,
            ZerothOrder::Constant(c) => c,
            ZerothOrder::Oscillating { amplitude, k } => amplitude * (1.0 + (k * x.x).sin() * (k * x.y).sin()),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ZerothOrder::Zero) || matches!(self, ZerothOrder::Constant(c) if *c == 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricRef {
    Euclidean,
    Rescaled,
}

/// Leading coefficient `a` (a form on gradients) plus an optional zeroth-order term.
#[derive(Clone, Debug)]
pub struct CoefficientField {
    pub tensor: TensorField,
    pub c: ZerothOrder,
    pub reference: MetricRef,
}

impl CoefficientField {
    pub fn new(tensor: TensorField) -> Self {
        CoefficientField {
            tensor,
            c: ZerothOrder::Zero,
            reference: MetricRef::Euclidean,
        }
    }

    pub fn identity() -> Self {
        CoefficientField::new(TensorField::Constant(Mat2::IDENTITY))
    }

    pub fn diag(a: f64, b: f64) -> Self {
        CoefficientField::new(TensorField::Constant(Mat2::diag(a, b)))
    }

    pub fn with_c(mut self, c: ZerothOrder) -> Self {
        self.c = c;
        self
    }

    pub fn a(&self, x: Point) -> Mat2 {
        self.tensor.eval(x)
    }

    /// Symmetric-tensor check at one point.
    pub fn checked_a(&self, x: Point) -> Result<Mat2> {
        let a = self.a(x);
        let asym = a.asymmetry();
        if asym > 1e-12 * a.frobenius().max(1.0) {
            return Err(Error::NonSymmetric {
                x: x.x,
                y: x.y,
                asymmetry: asym,
            });
        }
        Ok(a)
    }

    /// Catalog used by the invariance checks.
    pub fn catalog() -> Vec<(&'static str, CoefficientField)> {
        vec![
            ("identity", CoefficientField::identity()),
            ("diag(2,1)", CoefficientField::diag(2.0, 1.0)),
            (
                "(1+x^2)I",
                CoefficientField::new(TensorField::QuadraticIsotropic { c: 1.0 }),
            ),
            (
                "rotated",
                CoefficientField::new(TensorField::RotatedAnisotropic {
                    major: 3.0,
                    minor: 0.5,
                    twist: 2.0,
                }),
            ),
            (
                "oscillating",
                CoefficientField::new(TensorField::OscillatingDiagonal { k: 7.0 })
                    .with_c(ZerothOrder::Oscillating { amplitude: 0.5, k: 5.0 }),
            ),
        ]
    }
}

/// Suprema over samples of `|nabla^j log w|_g`, `j = 1..=order`.
pub fn admissibility_probe(w: &Weight, g: &ConformalMetric, samples: &[Point], order: usize) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if !(1..=2).contains(&order) {
        return Err(Error::InvalidParameter(format!(
            "admissibility order must be 1 or 2, got {order}"
        )));
    }
    let mut sup = vec![0.0f64; order];
    for &x in samples {
        let rho = g.rho.eval(x)?;
        let (_, dl, hl) = w.log_jet(x)?;
        sup[0] = sup[0].max(rho * dl.norm());
        if order >= 2 {
            // Christoffel symbols of e^{2 phi} g0, phi = -log rho:
            // Gamma^k_ij = d_i phi delta_jk + d_j phi delta_ik - delta_ij d_k phi
            let dphi = -g.rho.log_gradient(x)?;
            let corr = Mat2::outer(dphi, dl)
                .add(&Mat2::outer(dl, dphi))
                .sub(&Mat2::IDENTITY.scale(dphi.dot(dl)));
            let cov = hl.sub(&corr);
            sup[1] = sup[1].max(rho * rho * cov.frobenius());
        }
    }
    Ok(sup)
}

/// `(c_min, c_max)`: extreme eigenvalues of `a(x)` measured against the covector inner
/// product of the chosen metric, over all samples.
pub fn legendre_bounds(a: &CoefficientField, metric: MetricChoice<'_>, samples: &[Point]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in samples {
        let m = a.checked_a(x)?;
        let (l, h) = match metric {
            MetricChoice::Euclidean => m.sym_eigenvalues(),
            MetricChoice::Conformal(g) => {
                // |xi|_g^2 = rho^2 |xi|^2
                let r2 = g.rho.eval(x)?.powi(2);
                let (l, h) = m.sym_eigenvalues();
                (l / r2, h / r2)
            }
        };
        lo = lo.min(l);
        hi = hi.max(h);
    }
    Ok((lo, hi))
}

/// Two-component coefficient tensor `A^{ab}_{ij}` acting on gradients of `R^2`-valued maps.
#[derive(Clone, Debug)]
pub enum SystemTensor {
    /// Component `i` uses its own scalar field.
    BlockDiagonal(Vec<CoefficientField>),
    /// Isotropic elasticity with Lame constants; Legendre-Hadamard but not strong Legendre.
    Elasticity { lambda: f64, mu: f64 },
}

impl SystemTensor {
    /// The quadratic form on 2x2 gradient matrices, index `2 i + a` for `xi^i_a`.
    pub fn form(&self, x: Point) -> Result<nalgebra::Matrix4<f64>> {
        let mut m = nalgebra::Matrix4::zeros();
        match self {
            SystemTensor::BlockDiagonal(blocks) => {
                if blocks.len() != 2 {
                    return Err(Error::InvalidParameter(format!(
                        "block system needs 2 blocks, got {}",
                        blocks.len()
                    )));
                }
                for (i, b) in blocks.iter().enumerate() {
                    let a = b.checked_a(x)?;
                    for al in 0..2 {
                        for be in 0..2 {
                            m[(2 * i + al, 2 * i + be)] = a.0[al][be];
                        }
                    }
                }
            }
            &SystemTensor::Elasticity { lambda, mu } => {
                let d = |p: usize, q: usize| f64::from(u8::from(p == q));
                for i in 0..2 {
                    for al in 0..2 {
                        for j in 0..2 {
                            for be in 0..2 {
                                m[(2 * i + al, 2 * j + be)] =
                                    lambda * d(i, al) * d(j, be) + mu * (d(i, j) * d(al, be) + d(i, be) * d(j, al));
                            }
                        }
                    }
                }
            }
        }
        Ok(m)
    }
}

/// Extreme eigenvalues of the system form over all gradient matrices; a positive
/// lower bound certifies strong Legendre at the samples.
pub fn system_legendre_bounds(a: &SystemTensor, samples: &[Point]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in samples {
        let eig = a.form(x)?.symmetric_eigen().eigenvalues;
        lo = lo.min(eig.min());
        hi = hi.max(eig.max());
    }
    Ok((lo, hi))
}

/// Errors unless the system satisfies strong Legendre with a margin at every sample.
pub fn require_strong_legendre(a: &SystemTensor, samples: &[Point]) -> Result<(f64, f64)> {
    let (lo, hi) = system_legendre_bounds(a, samples)?;
    if !(lo > 1e-12 * hi.abs().max(1.0)) {
        return Err(Error::InvalidParameter(format!(
            "coefficient system is not strongly Legendre (smallest eigenvalue {lo:.3e})"
        )));
    }
    Ok((lo, hi))
}

/// Maximum over samples of the difference between the Rayleigh bounds of `a` against
/// `g0` and of `rho^2 a` against `g = rho^-2 g0`.
pub fn conformal_symbol_check(a: &CoefficientField, rho: &Weight, samples: &[Point]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut worst = 0.0f64;
    for &x in samples {
        let m = a.checked_a(x)?;
        let r2 = rho.eval(x)?.powi(2);
        let (l0, h0) = m.sym_eigenvalues();
        let (l1, h1) = m.scale(r2).sym_eigenvalues();
        worst = worst.max((l1 / r2 - l0).abs()).max((h1 / r2 - h0).abs());
    }
    Ok(worst)
}

/// A point on boundary curve `curve` at parameter `param in [0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundarySample {
    pub curve: usize,
    pub param: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CurvatureProfile {
    pub points: Vec<Point>,
    pub euclidean: Vec<f64>,
    pub geodesic: Vec<f64>,
    pub sup: f64,
}

/// Geodesic curvature of boundary samples in `g = rho^-2 g0`:
/// `kappa_g = rho (kappa_E + d_n log rho)`, `n` the inward unit normal.
pub fn boundary_curvature_profile(d: &Domain2D, rho: &Weight, samples: &[BoundarySample]) -> Result<CurvatureProfile> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut out = CurvatureProfile {
        points: Vec::new(),
        euclidean: Vec::new(),
        geodesic: Vec::new(),
        sup: 0.0,
    };
    for s in samples {
        let curve = d
            .boundary
            .get(s.curve)
            .ok_or_else(|| Error::OffBoundary(format!("curve index {} (domain has {})", s.curve, d.boundary.len())))?;
        if !(0.0..=1.0).contains(&s.param) {
            return Err(Error::OffBoundary(format!(
                "parameter {} outside [0, 1] on '{}'",
                s.param, curve.name
            )));
        }
        let jet = curve.geom.jet(s.param);
        let kappa_e = jet.curvature();
        let (log_rho, dlog, _) = rho.log_jet(jet.pos)?;
        let kappa_g = log_rho.exp() * (kappa_e + dlog.dot(jet.inward_normal()));
        out.points.push(jet.pos);
        out.euclidean.push(kappa_e);
        out.geodesic.push(kappa_g);
        out.sup = out.sup.max(kappa_g.abs());
    }
    Ok(out)
}

/// Path from the first singular point into the domain, parametrized by `r in (0, 1]`,
/// returning position and speed.
fn radial_path(d: &Domain2D) -> impl Fn(f64) -> (Point, f64) + '_ {
    move |r: f64| match d.template() {
        Template::Sector { omega } => (Point::polar(r, 0.5 * omega), 1.0),
        Template::Cusp { alpha, y0, y1, .. } => {
            let y = 0.5 * (y0 + y1);
            let p = Point::new(r, r.powf(*alpha) * y);
            let dy = alpha * r.powf(alpha - 1.0) * y;
            (p, (1.0 + dy * dy).sqrt())
        }
        Template::OscillatingCone { f0, f1, .. } => {
            let t = r.ln();
            let (a, da, _) = f0.eval3(t);
            let (b, db, _) = f1.eval3(t);
            let m = 0.5 * (a + b);
            let dm = 0.5 * (da + db);
            (Point::polar(r, m), (1.0 + dm * dm).sqrt())
        }
        Template::CircleCusp => {
            // between y = 0 and the circle y ~ x^2 / 2
            let p = Point::new(r, 0.25 * r * r);
            (p, (1.0 + 0.25 * r * r).sqrt())
        }
    }
}

/// `L(eps)`: g-length of the path from `r = eps` to `r = 1`, by adaptive quadrature in `log r`.
pub fn completeness_probe(d: &Domain2D, rho: &Weight, epsilons: &[f64]) -> Result<Vec<f64>> {
    let path = radial_path(d);
    epsilons
        .iter()
        .map(|&eps| {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "completeness cutoff must lie in (0, 1), got {eps}"
                )));
            }
            let integrand = |u: f64| {
                let r = u.exp();
                let (p, speed) = path(r);
                match rho.eval(p) {
                    Ok(v) => r * speed / v,
                    Err(_) => f64::NAN,
                }
            };
            integrate_adaptive(integrand, eps.ln(), 0.0, 1e-13, 1e-300, 20_000)
        })
        .collect()
}

/// Interior sample grid, `n_r x n_a` points, log-spaced towards the first singular point.
pub fn sample_grid(d: &Domain2D, n_r: usize, n_a: usize, r_min: f64) -> Vec<Point> {
    let mut out = Vec::with_capacity(n_r * n_a);
    let radius = |i: usize| (r_min.ln() * (1.0 - (i as f64 + 0.5) / n_r as f64)).exp();
    let frac = |j: usize| (j as f64 + 0.5) / n_a as f64;
    match d.template() {
        &Template::Sector { omega } => {
            for i in 0..n_r {
                for j in 0..n_a {
                    out.push(Point::polar(radius(i), omega * frac(j)));
                }
            }
        }
        &Template::Cusp { alpha, y0, y1, .. } => {
            for i in 0..n_r {
                let r = radius(i);
                for j in 0..n_a {
                    out.push(Point::new(r, r.powf(alpha) * (y0 + (y1 - y0) * frac(j))));
                }
            }
        }
        Template::OscillatingCone { f0, f1, t_max } => {
            for i in 0..n_r {
                let t = -t_max * (1.0 - (i as f64 + 0.5) / n_r as f64);
                let (a, b) = (f0.eval(t), f1.eval(t));
                for j in 0..n_a {
                    out.push(Point::polar(t.exp(), a + (b - a) * frac(j)));
                }
            }
        }
        Template::CircleCusp => {
            for i in 0..n_r {
                for j in 0..n_a {
                    let p = Point::new(-2.0 + 4.0 * frac(i), 3.0 * frac(j));
                    if p.dist(Point::new(0.0, 1.0)) > 1.0 {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

/// Seeded uniform samples inside the domain (rejection on the template's chart).
pub fn random_samples(d: &Domain2D, n: usize, r_min: f64, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let u: f64 = rng.gen();
        let v: f64 = rng.gen();
        let r = (r_min.ln() * (1.0 - u)).exp();
        let p = match d.template() {
            &Template::Sector { omega } => Point::polar(r, omega * v),
            &Template::Cusp { alpha, y0, y1, .. } => Point::new(r, r.powf(alpha) * (y0 + (y1 - y0) * v)),
            Template::OscillatingCone { f0, f1, .. } => {
                let t = r.ln();
                let (a, b) = (f0.eval(t), f1.eval(t));
                Point::polar(r, a + (b - a) * v)
            }
            Template::CircleCusp => {
                let p = Point::new(-2.0 + 4.0 * u, 3.0 * v);
                if p.dist(Point::new(0.0, 1.0)) <= 1.0 || p.y <= 0.0 {
                    continue;
                }
                p
            }
        };
        out.push(p);
    }
    out
}

/// Samples along every boundary curve, avoiding the curve endpoints.
pub fn boundary_samples(d: &Domain2D, per_curve: usize) -> Vec<BoundarySample> {
    (0..d.boundary.len())
        .flat_map(|c| {
            (0..per_curve).map(move |i| BoundarySample {
                curve: c,
                param: (i as f64 + 0.5) / per_curve as f64,
            })
        })
        .collect()
}

/// Boundary samples on one curve with parameters log-spaced towards its start or end.
pub fn graded_boundary_samples(curve: usize, n: usize, p_min: f64, towards_start: bool) -> Vec<BoundarySample> {
    (0..n)
        .map(|i| {
            let p = (p_min.ln() * (1.0 - i as f64 / (n - 1).max(1) as f64)).exp();
            BoundarySample {
                curve,
                param: if towards_start { p } else { 1.0 - p },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{make_domain, DomainSpec};
    use std::f64::consts::PI;

    fn sector(omega: f64) -> Domain2D {
        make_domain(&DomainSpec::sector(omega)).unwrap()
    }

    #[test]
    fn covector_norm_identity() {
        let g = ConformalMetric::new(Weight::radial_power(1.3));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let x = Point::new(rng.gen_range(0.01..1.0), rng.gen_range(-1.0..1.0));
            let xi = Point::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let lhs = g.covector_norm(x, xi).unwrap();
            let rhs = x.norm().powf(1.3) * xi.norm();
            assert!((lhs - rhs).abs() <= 1e-14 * rhs.max(1.0));
        }
    }

    #[test]
    fn admissibility_closed_forms() {
        let d = sector(PI / 2.0);
        let samples = sample_grid(&d, 64, 64, 1e-4);
        let r = Weight::radial_power(1.0);
        let g = ConformalMetric::new(r.clone());
        let sup = admissibility_probe(&r, &g, &samples, 2).unwrap();
        assert!((sup[0] - 1.0).abs() < 1e-12);
        // log r is g-parallel: the covariant Hessian vanishes
        assert!(sup[1] < 1e-10, "{}", sup[1]);

        let eps = 0.5;
        let f = Weight::exponential_cusp(Point::ORIGIN, eps).unwrap();
        let g = ConformalMetric::new(Weight::radial_power(1.0 + eps));
        let sup = admissibility_probe(&f, &g, &samples, 1).unwrap();
        assert!((sup[0] - 0.5f64.powf(1.5)).abs() < 1e-12);
        assert!((sup[0] - 0.353553).abs() < 1e-6);

        let c = Weight::constant(2.0).unwrap();
        let sup = admissibility_probe(&c, &g, &samples, 2).unwrap();
        assert_eq!(sup, vec![0.0, 0.0]);
        assert!(matches!(admissibility_probe(&c, &g, &[], 1), Err(Error::EmptySamples)));
    }

    #[test]
    fn admissibility_is_sampling_stable_for_lambda_at_least_one() {
        let d = sector(1.5 * PI);
        for lambda in [1.0, 1.5, 2.0] {
            let rho = d.clone().rho(false);
            let rho = rho.pow(lambda);
            let g = ConformalMetric::new(rho.clone());
            let coarse = admissibility_probe(&rho, &g, &sample_grid(&d, 200, 16, 1e-3), 1).unwrap();
            let fine = admissibility_probe(&rho, &g, &sample_grid(&d, 400, 32, 1e-3), 1).unwrap();
            assert!(coarse[0].is_finite());
            assert!((fine[0] - coarse[0]).abs() < 0.01 * fine[0]);
        }
    }

    #[test]
    fn legendre_examples() {
        let d = sector(PI / 2.0);
        let s = sample_grid(&d, 8, 8, 1e-3);
        assert_eq!(
            legendre_bounds(&CoefficientField::identity(), MetricChoice::Euclidean, &s).unwrap(),
            (1.0, 1.0)
        );
        assert_eq!(
            legendre_bounds(&CoefficientField::diag(2.0, 1.0), MetricChoice::Euclidean, &s).unwrap(),
            (1.0, 2.0)
        );
        let g = ConformalMetric::new(Weight::radial_power(1.0));
        let rescaled = CoefficientField::new(TensorField::Custom(Arc::new(|x: Point| {
            Mat2::IDENTITY.scale(x.norm_sq())
        })));
        let (lo, hi) = legendre_bounds(&rescaled, MetricChoice::Conformal(&g), &s).unwrap();
        assert!((lo - 1.0).abs() < 1e-14 && (hi - 1.0).abs() < 1e-14);
    }

    #[test]
    fn legendre_rejects_nonsymmetric_tensors() {
        let a = CoefficientField::new(TensorField::Constant(Mat2([[1.0, 0.5], [0.0, 1.0]])));
        let err = legendre_bounds(&a, MetricChoice::Euclidean, &[Point::new(0.1, 0.1)]);
        assert!(matches!(err, Err(Error::NonSymmetric { .. })));
    }

    #[test]
    fn conformal_symbol_check_examples() {
        let d = sector(PI / 2.0);
        let s = random_samples(&d, 100, 1e-3, 3);
        let r2 = Weight::radial_power(2.0);
        let v = conformal_symbol_check(&CoefficientField::identity(), &r2, &s).unwrap();
        assert!(v <= 1e-14);
        let v = conformal_symbol_check(&CoefficientField::diag(2.0, 1.0), &r2, &s).unwrap();
        assert!(v <= 1e-12);
        let a = CoefficientField::new(TensorField::QuadraticIsotropic { c: 1.0 });
        assert!(conformal_symbol_check(&a, &r2, &s).unwrap() <= 1e-12);
    }

    #[test]
    fn tensor_divergence_matches_differences() {
        let x = Point::new(0.3, -0.2);
        for (_, field) in CoefficientField::catalog() {
            let div = field.tensor.divergence(x).unwrap();
            let h = 1e-6;
            let dx = field
                .a(x + Point::new(h, 0.0))
                .sub(&field.a(x - Point::new(h, 0.0)))
                .scale(0.5 / h);
            let dy = field
                .a(x + Point::new(0.0, h))
                .sub(&field.a(x - Point::new(0.0, h)))
                .scale(0.5 / h);
            let fd = Point::new(dx.0[0][0] + dy.0[1][0], dx.0[0][1] + dy.0[1][1]);
            assert!((div - fd).norm() < 1e-7, "{field:?}");
        }
    }

    #[test]
    fn sector_edges_are_geodesic() {
        let d = sector(PI / 2.0);
        let rho = Weight::radial_power(1.7);
        let mut samples = graded_boundary_samples(0, 20, 1e-4, true);
        samples.extend(graded_boundary_samples(2, 20, 1e-4, false));
        let prof = boundary_curvature_profile(&d, &rho, &samples).unwrap();
        assert!(prof.sup < 1e-12, "{}", prof.sup);
    }

    #[test]
    fn arc_curvature_with_flat_and_cylindrical_weights() {
        let d = sector(PI / 2.0);
        let arc = (0..10)
            .map(|i| BoundarySample {
                curve: 1,
                param: 0.05 + 0.09 * i as f64,
            })
            .collect::<Vec<_>>();
        let flat = boundary_curvature_profile(&d, &Weight::one(), &arc).unwrap();
        assert!(flat.geodesic.iter().all(|k| (k - 1.0).abs() < 1e-14));
        // mollified weight is constant near r = 1
        let moll = Weight::mollified(Point::ORIGIN, 1.0);
        let c = moll.eval(Point::new(1.0, 0.0)).unwrap();
        let prof = boundary_curvature_profile(&d, &moll, &arc).unwrap();
        assert!(prof.geodesic.iter().all(|k| (k - c).abs() < 1e-14));
        // rho = r turns the unit circle into a closed geodesic of the cylinder
        let cyl = boundary_curvature_profile(&d, &Weight::radial_power(1.0), &arc).unwrap();
        assert!(cyl.sup < 1e-14);
    }

    #[test]
    fn cusp_wall_curvature_stays_bounded() {
        let d = make_domain(&DomainSpec::cusp(2.0, -1.0, 1.0)).unwrap();
        let rho = Weight::radial_power(2.0);
        let samples = graded_boundary_samples(0, 60, 1e-4, true);
        let prof = boundary_curvature_profile(&d, &rho, &samples).unwrap();
        assert!(prof.sup.is_finite() && prof.sup < 10.0);
        // values decay towards the tip like r^2
        let first = prof.geodesic[0].abs();
        assert!(first < 1e-6, "{first}");
    }

    #[test]
    fn off_boundary_samples_are_rejected() {
        let d = sector(1.0);
        let bad = [BoundarySample { curve: 9, param: 0.5 }];
        assert!(matches!(
            boundary_curvature_profile(&d, &Weight::one(), &bad),
            Err(Error::OffBoundary(_))
        ));
        let bad = [BoundarySample { curve: 0, param: 1.5 }];
        assert!(boundary_curvature_profile(&d, &Weight::one(), &bad).is_err());
    }

    #[test]
    fn completeness_lengths() {
        let d = sector(PI / 2.0);
        let l = completeness_probe(&d, &Weight::radial_power(1.0), &[(-3.0f64).exp()]).unwrap();
        assert!((l[0] - 3.0).abs() < 1e-8);
        let l = completeness_probe(&d, &Weight::radial_power(2.0), &[0.1]).unwrap();
        assert!((l[0] - 9.0).abs() < 1e-8);
        let eps: Vec<f64> = (1..=8).map(|k| 10f64.powi(-k)).collect();
        let l = completeness_probe(&d, &Weight::radial_power(0.5), &eps).unwrap();
        for (e, v) in eps.iter().zip(&l) {
            assert!((v - 2.0 * (1.0 - e.sqrt())).abs() < 1e-8);
        }
        assert!((l[7] - 2.0).abs() < 1e-3);
    }

    #[test]
    fn rescaled_cone_metric_is_flat() {
        let g = ConformalMetric::new(Weight::radial_power(1.5));
        for x in [Point::new(0.3, 0.1), Point::new(-0.01, 0.2)] {
            assert!(g.gaussian_curvature(x).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn elasticity_is_rejected_and_block_systems_pass() {
        let d = make_domain(&DomainSpec::sector(PI / 2.0)).unwrap();
        let samples = random_samples(&d, 50, 1e-3, 3);
        let el = SystemTensor::Elasticity { lambda: 1.0, mu: 1.0 };
        let (lo, hi) = system_legendre_bounds(&el, &samples).unwrap();
        assert!(lo.abs() < 1e-12);
        assert!((hi - 4.0).abs() < 1e-12);
        assert!(require_strong_legendre(&el, &samples).is_err());
        let blocks = SystemTensor::BlockDiagonal(vec![CoefficientField::identity(), CoefficientField::diag(2.0, 1.0)]);
        assert_eq!(require_strong_legendre(&blocks, &samples).unwrap(), (1.0, 2.0));
    }
}
