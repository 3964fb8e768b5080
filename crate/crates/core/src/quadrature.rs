//! Quadrature rules: Gauss-Legendre on intervals, adaptive Gauss-Kronrod, symmetric
//! triangle rules and collapsed (Duffy) rules for elements touching a singular vertex.

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Newton iteration on P_n from the Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

const GK_NODES: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const GAUSS7_WEIGHTS: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = GK_WEIGHTS[7] * fc;
    let mut gauss = GAUSS7_WEIGHTS[3] * fc;
    for j in 0..7 {
        let dx = h * GK_NODES[j];
        let s = f(c - dx) + f(c + dx);
        kron += GK_WEIGHTS[j] * s;
        if j % 2 == 1 {
            gauss += GAUSS7_WEIGHTS[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Globally adaptive Gauss-Kronrod (7/15) integration of `f` over `[a, b]`.
pub fn integrate_adaptive(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_intervals: usize,
) -> Result<f64> {
    let mut parts = vec![(a, b, gk15(&f, a, b))];
    loop {
        let total: f64 = parts.iter().map(|p| p.2 .0).sum();
        let err: f64 = parts.iter().map(|p| p.2 .1).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        if parts.len() >= max_intervals || !total.is_finite() {
            return Err(Error::QuadratureNonConvergence {
                estimate: err,
                intervals: parts.len(),
            });
        }
        let worst = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let (lo, hi, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        parts.push((lo, mid, gk15(&f, lo, mid)));
        parts.push((mid, hi, gk15(&f, mid, hi)));
    }
}

/// Quadrature rule on the reference triangle `{(s, t): s, t >= 0, s + t <= 1}` given
/// as barycentric coordinates and weights summing to 1.
#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    /// Symmetric rule exact for polynomials of degree 4 (6 points).
    pub fn degree4() -> Self {
        let a1 = 0.445948490915965;
        let w1 = 0.223381589678011;
        let a2 = 0.091576213509771;
        let w2 = 0.109951743655322;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (a, w) in [(a1, w1), (a2, w2)] {
            let b = 1.0 - 2.0 * a;
            for p in [[b, a, a], [a, b, a], [a, a, b]] {
                points.push(p);
                weights.push(w);
            }
        }
        TriangleRule { points, weights }
    }

    /// Symmetric rule exact for polynomials of degree 6 (12 points).
    pub fn degree6() -> Self {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (a, w) in [
            (0.249286745170910, 0.116786275726379),
            (0.063089014491502, 0.050844906370207),
        ] {
            let b = 1.0 - 2.0 * a;
            for p in [[b, a, a], [a, b, a], [a, a, b]] {
                points.push(p);
                weights.push(w);
            }
        }
        let (a, b, w) = (0.053145049844817, 0.310352451033784, 0.082851075618374);
        let c = 1.0 - a - b;
        for p in [[a, b, c], [b, c, a], [c, a, b], [a, c, b], [b, a, c], [c, b, a]] {
            points.push(p);
            weights.push(w);
        }
        TriangleRule { points, weights }
    }

    pub fn for_degree(degree: u32) -> Self {
        if degree <= 4 {
            TriangleRule::degree4()
        } else {
            TriangleRule::degree6()
        }
    }

    /// Collapsed Gauss rule with `n x n` points whose degenerate edge sits at
    /// barycentric vertex `apex`; no point lies on the apex.
    pub fn collapsed(n: usize, apex: usize) -> Self {
        let g = gauss_legendre(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for &(s, ws) in &g {
            for &(t, wt) in &g {
                // x = apex + s [(1 - t)(b - apex) + t (c - apex)], Jacobian 2 |T| s
                let mut bary = [0.0; 3];
                bary[apex] = 1.0 - s;
                bary[(apex + 1) % 3] = s * (1.0 - t);
                bary[(apex + 2) % 3] = s * t;
                points.push(bary);
                weights.push(2.0 * s * ws * wt);
            }
        }
        TriangleRule { points, weights }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate_monomial(rule: &TriangleRule, i: i32, j: i32) -> f64 {
        // reference triangle area 1/2; weights sum to 1
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(b, w)| w * b[1].powi(i) * b[2].powi(j))
            .sum::<f64>()
            * 0.5
    }

    fn exact_monomial(i: i32, j: i32) -> f64 {
        // int s^i t^j over the reference triangle = i! j! / (i + j + 2)!
        let fact = |n: i32| (1..=n).map(|k| k as f64).product::<f64>();
        fact(i) * fact(j) / fact(i + j + 2)
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..8 {
            let g = gauss_legendre(n);
            let w: f64 = g.iter().map(|p| p.1).sum();
            assert!((w - 1.0).abs() < 1e-14);
            for k in 0..(2 * n) {
                let v: f64 = g.iter().map(|(x, w)| w * x.powi(k as i32)).sum();
                assert!((v - 1.0 / (k as f64 + 1.0)).abs() < 1e-13, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn triangle_rules_are_exact_to_their_degree() {
        for (rule, deg) in [
            (TriangleRule::degree4(), 4),
            (TriangleRule::degree6(), 6),
            (TriangleRule::collapsed(5, 0), 8),
            (TriangleRule::collapsed(5, 2), 8),
        ] {
            for i in 0..=deg {
                for j in 0..=(deg - i) {
                    let got = integrate_monomial(&rule, i, j);
                    let want = exact_monomial(i, j);
                    assert!((got - want).abs() < 1e-12, "deg {deg} s^{i} t^{j}");
                }
            }
        }
    }

    #[test]
    fn adaptive_integration_of_log_singularity() {
        let v = integrate_adaptive(|x: f64| 1.0 / x.sqrt(), 1e-12, 1.0, 1e-12, 0.0, 10_000).unwrap();
        assert!((v - 2.0 * (1.0 - 1e-6)).abs() < 1e-9);
    }
}
