//! Compressed sparse row matrices.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

impl Csr {
    /// Zero matrix with the given sorted, duplicate-free column lists per row.
    pub fn from_pattern(rows: Vec<Vec<usize>>) -> Csr {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col = Vec::new();
        for r in rows {
            col.extend(r);
            row_ptr.push(col.len());
        }
        let nnz = col.len();
        Csr {
            n,
            row_ptr,
            col,
            val: vec![0.0; nnz],
        }
    }

    /// Sums duplicate entries in the order given.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Csr {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(i, j, _) in triplets {
            rows[i].push(j);
        }
        for r in &mut rows {
            r.sort_unstable();
            r.dedup();
        }
        let mut m = Csr::from_pattern(rows);
        for &(i, j, v) in triplets {
            *m.entry_mut(i, j).expect("entry in pattern") += v;
        }
        m
    }

    pub fn identity(n: usize) -> Csr {
        Csr {
            n,
            row_ptr: (0..=n).collect(),
            col: (0..n).collect(),
            val: vec![1.0; n],
        }
    }

    pub fn nnz(&self) -> usize {
        self.col.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col[r.clone()], &self.val[r])
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let start = self.row_ptr[i];
        self.col[start..self.row_ptr[i + 1]]
            .binary_search(&j)
            .ok()
            .map(|k| start + k)
    }

    pub fn entry_mut(&mut self, i: usize, j: usize) -> Option<&mut f64> {
        self.position(i, j).map(move |k| &mut self.val[k])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.val[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        crate::geometry::compensated_sum(self.matvec(y).iter().zip(x).map(|(a, b)| a * b))
    }

    /// `max |A - A^T|` relative to `max |A|`.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.val.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    pub fn check_symmetric(&self, tol: f64) -> Result<()> {
        let asym = self.asymmetry();
        if asym > tol {
            return Err(Error::SingularSystem(format!(
                "matrix is not symmetric: relative asymmetry {asym:e}"
            )));
        }
        Ok(())
    }

    /// Principal submatrix on `keep` (sorted); `map[i]` is the new index of row `i`.
    pub fn principal(&self, keep: &[usize], map: &[Option<usize>]) -> Csr {
        let mut row_ptr = Vec::with_capacity(keep.len() + 1);
        row_ptr.push(0);
        let mut col = Vec::new();
        let mut val = Vec::new();
        for &i in keep {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if let Some(k) = map[j] {
                    col.push(k);
                    val.push(v);
                }
            }
            row_ptr.push(col.len());
        }
        Csr {
            n: keep.len(),
            row_ptr,
            col,
            val,
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                row[j] = v;
            }
        }
        d
    }

    /// `csr v1 <n> <nnz>` followed by the row pointers, columns and values.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "csr v1 {} {}", self.n, self.nnz());
        let join = |it: &mut dyn Iterator<Item = String>| it.collect::<Vec<_>>().join(" ");
        let _ = writeln!(s, "{}", join(&mut self.row_ptr.iter().map(|v| v.to_string())));
        let _ = writeln!(s, "{}", join(&mut self.col.iter().map(|v| v.to_string())));
        let _ = writeln!(s, "{}", join(&mut self.val.iter().map(|v| v.to_string())));
        s
    }

    pub fn from_text(text: &str) -> Result<Csr> {
        let bad = |m: &str| Error::Parse(format!("csr: {m}"));
        let mut lines = text.lines();
        let head: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
        if head.len() != 4 || head[0] != "csr" || head[1] != "v1" {
            return Err(bad("expected header 'csr v1 <n> <nnz>'"));
        }
        let n: usize = head[2].parse().map_err(|_| bad("bad n"))?;
        let nnz: usize = head[3].parse().map_err(|_| bad("bad nnz"))?;
        let mut next = |what: &str| -> Result<Vec<&str>> {
            Ok(lines
                .next()
                .ok_or_else(|| bad(&format!("missing {what} line")))?
                .split_whitespace()
                .collect())
        };
        let row_ptr = next("row pointer")?
            .into_iter()
            .map(|s| s.parse().map_err(|_| bad("bad row pointer")))
            .collect::<Result<Vec<usize>>>()?;
        let col = next("column")?
            .into_iter()
            .map(|s| s.parse().map_err(|_| bad("bad column")))
            .collect::<Result<Vec<usize>>>()?;
        let val = next("value")?
            .into_iter()
            .map(|s| s.parse().map_err(|_| bad("bad value")))
            .collect::<Result<Vec<f64>>>()?;
        if row_ptr.len() != n + 1 || col.len() != nnz || val.len() != nnz || row_ptr[n] != nnz {
            return Err(bad("inconsistent sizes"));
        }
        Ok(Csr { n, row_ptr, col, val })
    }
}
