//! Linear solvers for symmetric positive definite systems.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::sparse::Csr;
use crate::error::{Error, Result};

/// Largest system accepted by the direct solver.
pub const CHOLESKY_MAX_DOF: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolverKind {
    Cg,
    Cholesky,
    /// Cholesky up to [`CHOLESKY_MAX_DOF`], CG beyond.
    Auto,
}

impl std::str::FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cg" => Ok(SolverKind::Cg),
            "cholesky" => Ok(SolverKind::Cholesky),
            "auto" => Ok(SolverKind::Auto),
            _ => Err(Error::InvalidParameter(format!(
                "unknown solver '{s}' (expected cg, cholesky or auto)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative residual `|b - A x| / |b|`.
    pub residual: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn relative_residual(a: &Csr, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let nb = norm(b);
    if nb == 0.0 {
        norm(&r)
    } else {
        norm(&r) / nb
    }
}

/// Jacobi-preconditioned conjugate gradients, capped at `10 n` iterations.
pub fn cg(a: &Csr, b: &[f64], tol: f64) -> Result<(Vec<f64>, SolveReport)> {
    cg_capped(a, b, tol, 10 * a.n.max(1))
}

pub fn cg_capped(a: &Csr, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveReport)> {
    let n = a.n;
    let mut x = vec![0.0; n];
    let nb = norm(b);
    if nb == 0.0 {
        return Ok((
            x,
            SolveReport {
                iterations: 0,
                residual: 0.0,
            },
        ));
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .enumerate()
        .map(|(i, d)| {
            if d > 0.0 {
                Ok(1.0 / d)
            } else {
                Err(Error::IndefinitePivot { row: i, pivot: d })
            }
        })
        .collect::<Result<_>>()?;
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        a.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::IndefinitePivot { row: it, pivot: pap });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let res = norm(&r) / nb;
        if res <= tol {
            return Ok((
                x,
                SolveReport {
                    iterations: it,
                    residual: res,
                },
            ));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::CgNonConvergence {
        iterations: max_iter,
        residual: norm(&r) / nb,
    })
}

/// Reverse Cuthill-McKee ordering of the symmetric pattern; `perm[new] = old`.
pub fn rcm(a: &Csr) -> Vec<usize> {
    let n = a.n;
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).0.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = a.row(v).0.iter().copied().filter(|&j| !visited[j]).collect();
            next.sort_by_key(|&j| (degree[j], j));
            for j in next {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order
}

/// Skyline (variable band) Cholesky factor `P A P^T = L L^T`.
#[derive(Clone, Debug)]
pub struct SkylineCholesky {
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    values: Vec<f64>,
}

impl SkylineCholesky {
    pub fn factor(a: &Csr) -> Result<SkylineCholesky> {
        let n = a.n;
        if n > CHOLESKY_MAX_DOF {
            return Err(Error::InvalidParameter(format!(
                "direct solver limited to {CHOLESKY_MAX_DOF} unknowns, system has {n}"
            )));
        }
        let perm = rcm(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (old, &i) in inv.iter().enumerate() {
            for &j in a.row(old).0 {
                let jn = inv[j];
                if jn < i {
                    first[i] = first[i].min(jn);
                }
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + (i - first[i] + 1));
        }
        let mut values = vec![0.0; start[n]];
        for (old, &i) in inv.iter().enumerate() {
            let (cols, vals) = a.row(old);
            for (&j, &v) in cols.iter().zip(vals) {
                let jn = inv[j];
                if jn <= i {
                    values[start[i] + jn - first[i]] = v;
                }
            }
        }
        for i in 0..n {
            let (fi, si) = (first[i], start[i]);
            for j in fi..i {
                let (fj, sj) = (first[j], start[j]);
                let k0 = fi.max(fj);
                let mut s = values[si + j - fi];
                for k in k0..j {
                    s -= values[si + k - fi] * values[sj + k - fj];
                }
                values[si + j - fi] = s / values[sj + j - fj];
            }
            let row = &values[si..si + i - fi];
            let d = values[si + i - fi] - row.iter().map(|v| v * v).sum::<f64>();
            if !(d > 0.0) {
                return Err(Error::IndefinitePivot { row: perm[i], pivot: d });
            }
            values[si + i - fi] = d.sqrt();
        }
        Ok(SkylineCholesky {
            perm,
            first,
            start,
            values,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let (fi, si) = (self.first[i], self.start[i]);
            let mut s = y[i];
            for k in fi..i {
                s -= self.values[si + k - fi] * y[k];
            }
            y[i] = s / self.values[si + i - fi];
        }
        for i in (0..n).rev() {
            let (fi, si) = (self.first[i], self.start[i]);
            y[i] /= self.values[si + i - fi];
            let yi = y[i];
            for k in fi..i {
                y[k] -= self.values[si + k - fi] * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    /// Stored profile size.
    pub fn profile(&self) -> usize {
        self.values.len()
    }
}

pub fn solve_linear(a: &Csr, b: &[f64], kind: SolverKind, tol: f64) -> Result<(Vec<f64>, SolveReport)> {
    let direct = match kind {
        SolverKind::Cg => false,
        SolverKind::Cholesky => true,
        SolverKind::Auto => a.n <= CHOLESKY_MAX_DOF,
    };
    if direct {
        let x = SkylineCholesky::factor(a)?.solve(b);
        let residual = relative_residual(a, &x, b);
        Ok((
            x,
            SolveReport {
                iterations: 1,
                residual,
            },
        ))
    } else {
        cg(a, b, tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> Csr {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        Csr::from_triplets(n, &t)
    }

    #[test]
    fn identity_system_takes_one_iteration() {
        let b = vec![1.0, -2.0, 3.5];
        let (x, rep) = cg(&Csr::identity(3), &b, 1e-10).unwrap();
        assert_eq!(rep.iterations, 1);
        assert_eq!(x, b);
    }

    #[test]
    fn cholesky_and_cg_agree() {
        let a = laplace_1d(200);
        let b: Vec<f64> = (0..200).map(|i| ((i * 7) % 13) as f64 - 6.0).collect();
        let (x1, _) = solve_linear(&a, &b, SolverKind::Cholesky, 1e-12).unwrap();
        let (x2, rep) = solve_linear(&a, &b, SolverKind::Cg, 1e-13).unwrap();
        assert!(rep.residual <= 1e-13);
        let err = x1.iter().zip(&x2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = x1.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(err <= 1e-8 * scale);
        assert!(relative_residual(&a, &x1, &b) < 1e-12);
    }

    #[test]
    fn rcm_is_a_permutation_and_narrows_the_profile() {
        // scrambled path graph
        let n = 60;
        let label = |i: usize| (i * 37) % n;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((label(i), label(i), 2.5));
            if i > 0 {
                t.push((label(i), label(i - 1), -1.0));
                t.push((label(i - 1), label(i), -1.0));
            }
        }
        let a = Csr::from_triplets(n, &t);
        let mut p = rcm(&a);
        let chol = SkylineCholesky::factor(&a).unwrap();
        assert!(chol.profile() <= 2 * n);
        p.sort_unstable();
        assert_eq!(p, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn indefinite_matrix_is_reported() {
        let a = Csr::from_triplets(2, &[(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(
            SkylineCholesky::factor(&a),
            Err(Error::IndefinitePivot { .. })
        ));
    }

    #[test]
    fn cg_iteration_cap() {
        let a = laplace_1d(400);
        let b = vec![1.0; 400];
        match cg_capped(&a, &b, 1e-10, 5) {
            Err(Error::CgNonConvergence { iterations, residual }) => {
                assert_eq!(iterations, 5);
                assert!(residual > 1e-10);
            }
            other => panic!("{other:?}"),
        }
    }
}
