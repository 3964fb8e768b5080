//! Weighted Kondratiev norms `f^s K^{l,p}_(rho)` of finite element and closed-form
//! functions, and the comparison with the Sobolev norm of the conformal metric.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::domains::Weight;
use crate::error::{Error, Result};
use crate::fem::{element_rule, map_elements, AssemblyOptions, FEFunction, Manufactured};
use crate::geometry::{compensated_sum, Mat2, Point};
use crate::mesh::Mesh;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedNormSpec {
    pub ell: usize,
    pub p: f64,
    pub rho: Weight,
    pub f: Weight,
    /// Power applied to `f`.
    pub s: f64,
}

impl WeightedNormSpec {
    pub fn new(ell: usize, rho: Weight, f: Weight) -> Self {
        WeightedNormSpec {
            ell,
            p: 2.0,
            rho,
            f,
            s: 1.0,
        }
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn with_s(mut self, s: f64) -> Self {
        self.s = s;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p >= 1.0) {
            return Err(Error::InvalidParameter(format!("p must be >= 1, got {}", self.p)));
        }
        if self.ell > 2 {
            return Err(Error::InvalidParameter(format!(
                "ell must be 0, 1 or 2, got {}",
                self.ell
            )));
        }
        Ok(())
    }

    fn singular(&self) -> Vec<Point> {
        let mut c = self.rho.centers();
        c.extend(self.f.centers());
        c
    }
}

/// A function that can be sampled with derivatives inside a mesh element.
#[derive(Clone, Copy)]
pub enum Field<'a> {
    Fe(&'a FEFunction),
    Exact(&'a Manufactured),
    /// `exact - u_h`.
    Error(&'a Manufactured, &'a FEFunction),
    Closure {
        value: &'a (dyn Fn(Point) -> f64 + Sync),
        gradient: Option<&'a (dyn Fn(Point) -> Point + Sync)>,
    },
}

struct Jet {
    v: f64,
    g: Option<Point>,
    h: Option<Mat2>,
}

impl Field<'_> {
    fn max_order(&self) -> usize {
        match self {
            Field::Fe(_) | Field::Error(..) => 1,
            Field::Exact(_) => 2,
            Field::Closure { gradient, .. } => usize::from(gradient.is_some()),
        }
    }

    fn mesh(&self) -> Option<&Mesh> {
        match self {
            Field::Fe(u) | Field::Error(_, u) => Some(&u.space.mesh),
            _ => None,
        }
    }

    fn jet(&self, t: usize, l: [f64; 3], x: Point) -> Jet {
        match *self {
            Field::Fe(u) => {
                let (v, g) = u.eval_local(t, l, 0);
                Jet { v, g: Some(g), h: None }
            }
            Field::Exact(m) => Jet {
                v: m.value(x),
                g: Some(m.gradient(x)),
                h: Some(m.hessian(x)),
            },
            Field::Error(m, u) => {
                let (v, g) = u.eval_local(t, l, 0);
                Jet {
                    v: m.value(x) - v,
                    g: Some(m.gradient(x) - g),
                    h: None,
                }
            }
            Field::Closure { value, gradient } => Jet {
                v: value(x),
                g: gradient.map(|g| g(x)),
                h: None,
            },
        }
    }
}

fn integrate(
    mesh: &Mesh,
    singular: &[Point],
    opts: &AssemblyOptions,
    integrand: impl Fn(usize, [f64; 3], Point) -> Result<f64> + Sync + Send,
) -> Result<f64> {
    let (standard, collapsed) = opts.rules()?;
    let parts = map_elements(opts, mesh.triangles.len(), |t| {
        let rule = element_rule(mesh, t, singular, &standard, &collapsed)?;
        let p = mesh.triangle_points(t);
        let area = mesh.area(t);
        let mut acc = Vec::with_capacity(rule.weights.len());
        for (l, &w) in rule.points.iter().zip(&rule.weights) {
            let x = p[0].scale(l[0]) + p[1].scale(l[1]) + p[2].scale(l[2]);
            acc.push(w * area * integrand(t, *l, x)?);
        }
        Ok(compensated_sum(acc))
    })?;
    Ok(compensated_sum(parts))
}

fn resolve_mesh<'a>(u: &'a Field<'a>, mesh: Option<&'a Mesh>) -> Result<&'a Mesh> {
    mesh.or_else(|| u.mesh())
        .ok_or_else(|| Error::InvalidParameter("closed-form norms need a mesh for quadrature".into()))
}

fn check_order(u: &Field<'_>, ell: usize) -> Result<()> {
    if ell > u.max_order() {
        return Err(Error::InvalidParameter(format!(
            "ell = {ell} needs derivatives of order {ell}, the function provides {}",
            u.max_order()
        )));
    }
    Ok(())
}

/// `(sum_{j <= l} int |rho^j grad^j (f^-s u)|^p dx)^(1/p)`.
pub fn kondratiev_norm(
    u: &Field<'_>,
    spec: &WeightedNormSpec,
    mesh: Option<&Mesh>,
    opts: &AssemblyOptions,
) -> Result<f64> {
    spec.validate()?;
    check_order(u, spec.ell)?;
    let mesh = resolve_mesh(u, mesh)?;
    let fs = spec.f.pow(spec.s);
    let p = spec.p;
    let total = integrate(mesh, &spec.singular(), opts, |t, l, x| {
        let jet = u.jet(t, l, x);
        let (log_f, dlog_f, hlog_f) = fs.log_jet(x)?;
        let scale = (-log_f).exp();
        let mut sum = (scale * jet.v).abs().powf(p);
        if spec.ell >= 1 {
            let rho = spec.rho.eval(x)?;
            let g = jet.g.unwrap_or(Point::ORIGIN);
            // grad(f^-s u) = f^-s (grad u - u grad log f^s)
            let dv = (g - dlog_f.scale(jet.v)).scale(scale);
            sum += (rho * dv.norm()).powf(p);
            if spec.ell == 2 {
                let h = jet.h.unwrap_or(Mat2::ZERO);
                let cross = Mat2::outer(g, dlog_f).add(&Mat2::outer(dlog_f, g));
                let hv = h
                    .sub(&cross)
                    .sub(&hlog_f.scale(jet.v))
                    .add(&Mat2::outer(dlog_f, dlog_f).scale(jet.v))
                    .scale(scale);
                sum += (rho * rho * hv.frobenius()).powf(p);
            }
        }
        Ok(sum)
    })?;
    Ok(total.max(0.0).powf(1.0 / p))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RelationRatio {
    /// Kondratiev norm on the flat side.
    pub kondratiev: f64,
    /// `W^{l,p}(g)` norm of `rho^(2/p) f^-1 u`.
    pub sobolev: f64,
}

impl RelationRatio {
    pub fn ratio(&self) -> f64 {
        self.kondratiev / self.sobolev
    }

    pub fn inverse(&self) -> f64 {
        self.sobolev / self.kondratiev
    }
}

/// Compares `f K^{l,p}_(rho)(g0)` with `f rho^(-2/p) W^{l,p}(g)`, `g = rho^-2 g0`,
/// on the same quadrature points.
pub fn relation_check(
    u: &Field<'_>,
    rho: &Weight,
    f: &Weight,
    ell: usize,
    p: f64,
    mesh: Option<&Mesh>,
    opts: &AssemblyOptions,
) -> Result<RelationRatio> {
    if ell > 1 {
        return Err(Error::InvalidParameter(format!(
            "relation check supports ell <= 1, got {ell}"
        )));
    }
    let spec = WeightedNormSpec::new(ell, rho.clone(), f.clone()).with_p(p);
    let kondratiev = kondratiev_norm(u, &spec, mesh, opts)?;
    check_order(u, ell)?;
    let mesh = resolve_mesh(u, mesh)?;
    let m = 2.0;
    let total = integrate(mesh, &spec.singular(), opts, |t, l, x| {
        let jet = u.jet(t, l, x);
        let (log_rho, dlog_rho, _) = rho.log_jet(x)?;
        let (log_f, dlog_f, _) = f.log_jet(x)?;
        let rho_v = log_rho.exp();
        let vol = rho_v.powf(-m);
        let factor = (m / p * log_rho - log_f).exp();
        let v = factor * jet.v;
        let mut sum = v.abs().powf(p) * vol;
        if ell == 1 {
            let g = jet.g.unwrap_or(Point::ORIGIN);
            let dlog = dlog_rho.scale(m / p) - dlog_f;
            let dv = (g + dlog.scale(jet.v)).scale(factor);
            sum += (rho_v * dv.norm()).powf(p) * vol;
        }
        Ok(sum)
    })?;
    Ok(RelationRatio {
        kondratiev,
        sobolev: total.max(0.0).powf(1.0 / p),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormRow {
    pub level: usize,
    pub ell: usize,
    pub p: f64,
    pub s: f64,
    pub norm: f64,
}

pub fn norm_table_csv(rows: &[NormRow]) -> String {
    let mut out = String::from("level,ell,p,s,norm\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{:.12e}", r.level, r.ell, r.p, r.s, r.norm);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domains::{make_domain, DomainSpec};
    use crate::fem::{manufactured_problem, FESpace};
    use crate::mesh::{grade_mesh, refine, Grading};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn quarter() -> Mesh {
        let d = make_domain(&DomainSpec::sector(PI / 2.0)).unwrap();
        grade_mesh(&d, &Grading::new(0.2, 0.5)).unwrap()
    }

    #[test]
    fn weight_itself_has_the_area_as_norm() {
        let mesh = quarter();
        let opts = AssemblyOptions::default();
        let f = Weight::radial_power(1.0);
        let value = |x: Point| x.norm();
        let gradient = |x: Point| x.scale(1.0 / x.norm());
        let u = Field::Closure {
            value: &value,
            gradient: Some(&gradient),
        };
        let area = mesh.total_area();
        for ell in [0, 1] {
            let spec = WeightedNormSpec::new(ell, f.clone(), f.clone());
            let n = kondratiev_norm(&u, &spec, Some(&mesh), &opts).unwrap();
            assert!((n - area.sqrt()).abs() < 1e-12, "{ell} {n}");
        }
        assert!((area - PI / 4.0).abs() < 1e-2);
    }

    #[test]
    fn homogeneity_monotonicity_and_weight_scaling() {
        let mesh = Arc::new(quarter());
        let space = FESpace::new(Arc::clone(&mesh), 2).unwrap();
        let uh = space.interpolate(|x| x.x * (1.0 - x.y) + 0.3);
        let opts = AssemblyOptions::default();
        let rho = Weight::radial_power(1.0);
        let f = Weight::radial_power(0.5);
        let spec0 = WeightedNormSpec::new(0, rho.clone(), f.clone());
        let spec1 = WeightedNormSpec::new(1, rho.clone(), f.clone());
        let n0 = kondratiev_norm(&Field::Fe(&uh), &spec0, None, &opts).unwrap();
        let n1 = kondratiev_norm(&Field::Fe(&uh), &spec1, None, &opts).unwrap();
        assert!(n1 >= n0);
        let scaled = uh.scaled(-3.0);
        let n1s = kondratiev_norm(&Field::Fe(&scaled), &spec1, None, &opts).unwrap();
        assert!((n1s - 3.0 * n1).abs() <= 1e-12 * n1s);
        let doubled = f.clone().times(&Weight::constant(2.0).unwrap());
        let spec2 = WeightedNormSpec::new(1, rho, doubled);
        let n2 = kondratiev_norm(&Field::Fe(&uh), &spec2, None, &opts).unwrap();
        assert!((2.0 * n2 - n1).abs() <= 1e-12 * n1);
    }

    #[test]
    fn level_zero_relation_is_an_identity() {
        let mesh = Arc::new(quarter());
        let space = FESpace::new(mesh, 1).unwrap();
        let uh = space.interpolate(|x| (3.0 * x.x).sin() + x.y);
        let opts = AssemblyOptions::default();
        for p in [1.0, 2.0, 4.0] {
            let r = relation_check(
                &Field::Fe(&uh),
                &Weight::radial_power(1.5),
                &Weight::radial_power(0.5),
                0,
                p,
                None,
                &opts,
            )
            .unwrap();
            assert!((r.ratio() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn level_one_relation_constant_is_mesh_independent() {
        let d = make_domain(&DomainSpec::sector(PI / 2.0)).unwrap();
        let prob = manufactured_problem(Some(&d), "corner").unwrap();
        let rho = d.rho(true);
        let f = d.f_weight(true);
        let opts = AssemblyOptions::default();
        let mut mesh = grade_mesh(&d, &Grading::new(0.3, 0.5)).unwrap();
        let mut ratios = Vec::new();
        for _ in 0..3 {
            let r = relation_check(&Field::Exact(&prob), &rho, &f, 1, 2.0, Some(&mesh), &opts).unwrap();
            ratios.push(r.ratio());
            mesh = refine(&mesh).unwrap();
        }
        let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
        let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max / min < 1.2 && max <= 5.0 && 1.0 / min <= 5.0, "{ratios:?}");
    }

    #[test]
    fn second_order_norm_of_a_quadratic() {
        // f = 1, rho = 1: |u|^2 + |grad u|^2 + |Hess u|^2 over the mesh
        let mesh = Mesh::unit_square(4).unwrap();
        let prob = manufactured_problem(None, "quadratic").unwrap();
        let one = Weight::one();
        let spec = WeightedNormSpec::new(2, one.clone(), one);
        let n = kondratiev_norm(&Field::Exact(&prob), &spec, Some(&mesh), &AssemblyOptions::default()).unwrap();
        // int (x^2+y^2)^2 = 28/45, int 4(x^2+y^2) = 8/3, |Hess|^2 = 8
        let expected = (28.0 / 45.0 + 8.0 / 3.0 + 8.0f64).sqrt();
        assert!((n - expected).abs() < 1e-12);
        let err = kondratiev_norm(
            &Field::Fe(&FESpace::new(Arc::new(mesh), 1).unwrap().interpolate(|x| x.x)),
            &WeightedNormSpec::new(2, Weight::one(), Weight::one()),
            None,
            &AssemblyOptions::default(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn csv_rows() {
        let csv = norm_table_csv(&[NormRow {
            level: 0,
            ell: 1,
            p: 2.0,
            s: -0.1,
            norm: 0.5,
        }]);
        assert_eq!(csv, "level,ell,p,s,norm\n0,1,2,-0.1,5.000000000000e-1\n");
    }
}
