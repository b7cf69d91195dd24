//! Symmetric sparse matrices in CSR form, an incomplete Cholesky
//! factorisation with zero fill, and preconditioned conjugate gradients.
//! Used to build descent directions, so solves only need to be approximate.

use std::collections::BTreeMap;

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

/// Accumulates `(row, col, value)` contributions; duplicates are summed.
#[derive(Debug, Default)]
pub struct TripletBuilder {
    n: usize,
    rows: Vec<BTreeMap<usize, f64>>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            rows: vec![BTreeMap::new(); n],
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        *self.rows[i].entry(j).or_insert(0.0) += v;
    }

    pub fn build(self) -> CsrMatrix {
        let mut row_ptr = Vec::with_capacity(self.n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in self.rows {
            for (j, v) in row {
                cols.push(j);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix {
            n: self.n,
            row_ptr,
            cols,
            vals,
        }
    }
}

impl CsrMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mul(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            y[i] = s;
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .find(|&k| self.cols[k] == i)
                    .map_or(0.0, |k| self.vals[k])
            })
            .collect()
    }
}

/// Incomplete Cholesky `A ~ L L^T` restricted to the sparsity of `A`.
#[derive(Debug, Clone)]
pub struct IncompleteCholesky {
    n: usize,
    // strictly lower part of L by rows, plus its diagonal
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<f64>,
}

impl IncompleteCholesky {
    /// Factorises `A + shift * (diag(A) + max diag(A) I)`, increasing the
    /// shift until every pivot is positive.
    pub fn new(a: &CsrMatrix) -> Self {
        let mut shift = 0.0;
        loop {
            if let Some(f) = Self::try_factor(a, shift) {
                return f;
            }
            shift = if shift == 0.0 { 1e-8 } else { shift * 10.0 };
        }
    }

    fn try_factor(a: &CsrMatrix, shift: f64) -> Option<Self> {
        let n = a.n;
        let mut row_ptr = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut diag = vec![0.0; n];
        let adiag = a.diag();
        let top = adiag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let top = if top > 0.0 { top } else { 1.0 };
        // dense scatter of the current row of L
        let mut work = vec![0.0; n];
        let mut in_row = vec![false; n];
        for i in 0..n {
            let lo = a.row_ptr[i];
            let hi = a.row_ptr[i + 1];
            let mut pattern = Vec::new();
            for k in lo..hi {
                let j = a.cols[k];
                if j < i {
                    work[j] = a.vals[k];
                    in_row[j] = true;
                    pattern.push(j);
                }
            }
            let mut d = adiag[i] * (1.0 + shift) + shift * top;
            for &j in &pattern {
                // L[i][j] = (A[i][j] - sum_{k<j} L[i][k] L[j][k]) / L[j][j]
                let mut s = work[j];
                for kk in row_ptr[j]..row_ptr[j + 1] {
                    let k = cols[kk];
                    if in_row[k] {
                        s -= work[k] * vals[kk];
                    }
                }
                let lij = s / diag[j];
                work[j] = lij;
                d -= lij * lij;
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            diag[i] = d.sqrt();
            for &j in &pattern {
                cols.push(j);
                vals.push(work[j]);
                work[j] = 0.0;
                in_row[j] = false;
            }
            row_ptr.push(cols.len());
        }
        Some(Self {
            n,
            row_ptr,
            cols,
            vals,
            diag,
        })
    }

    /// Solves `L L^T x = b` in place.
    pub fn apply(&self, b: &mut [f64]) {
        for i in 0..self.n {
            let mut s = b[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s -= self.vals[k] * b[self.cols[k]];
            }
            b[i] = s / self.diag[i];
        }
        for i in (0..self.n).rev() {
            b[i] /= self.diag[i];
            let bi = b[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                b[self.cols[k]] -= self.vals[k] * bi;
            }
        }
    }
}

/// Preconditioned conjugate gradients from a zero initial guess. Every
/// iterate `x` satisfies `b . x > 0` for SPD `A`, so a truncated solve still
/// yields a descent direction.
pub fn pcg(a: &CsrMatrix, pre: &IncompleteCholesky, b: &[f64], rel_tol: f64, max_iter: usize) -> Vec<f64> {
    let n = a.n;
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return x;
    }
    let mut z = r.clone();
    pre.apply(&mut z);
    let mut d = z.clone();
    let mut rz = dot(&r, &z);
    let mut ad = vec![0.0; n];
    for _ in 0..max_iter {
        a.mul(&d, &mut ad);
        let dad = dot(&d, &ad);
        if !(dad > 0.0) {
            break;
        }
        let step = rz / dad;
        for i in 0..n {
            x[i] += step * d[i];
            r[i] -= step * ad[i];
        }
        if dot(&r, &r).sqrt() <= rel_tol * bnorm {
            break;
        }
        z.copy_from_slice(&r);
        pre.apply(&mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            d[i] = z[i] + beta * d[i];
        }
    }
    x
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
