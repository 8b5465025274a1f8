//! Small sparse-matrix kernel for operators on the truncated atom⊗Fock⊗Fock
//! space, plus the few dense helpers the solvers need.

use faer::Mat;
use num_complex::Complex64 as C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Square complex matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseMatrix {
    pub fn zeros(dim: usize) -> Self {
        SparseMatrix { dim, row_ptr: vec![0; dim + 1], cols: Vec::new(), vals: Vec::new() }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_triplets(dim, (0..dim).map(|i| (i, i, C64::new(1.0, 0.0))))
    }

    /// Duplicate entries are summed; exact zeros are dropped.
    pub fn from_triplets(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, C64)>) -> Self {
        let mut t: Vec<(usize, usize, C64)> = triplets.into_iter().collect();
        t.sort_by_key(|&(i, j, _)| (i, j));
        let mut merged: Vec<(usize, usize, C64)> = Vec::with_capacity(t.len());
        for (i, j, v) in t {
            assert!(i < dim && j < dim, "triplet ({i}, {j}) out of range for dim {dim}");
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += v,
                _ => merged.push((i, j, v)),
            }
        }
        merged.retain(|&(_, _, v)| v != ZERO);

        let mut row_ptr = vec![0; dim + 1];
        for &(i, _, _) in &merged {
            row_ptr[i + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix {
            dim,
            row_ptr,
            cols: merged.iter().map(|t| t.1).collect(),
            vals: merged.iter().map(|t| t.2).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.row(i).find(|&(c, _)| c == j).map_or(ZERO, |(_, v)| v)
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.dim, self.triplets().map(|(i, j, v)| (j, i, v.conj())))
    }

    pub fn scale(&self, c: C64) -> Self {
        Self::from_triplets(self.dim, self.triplets().map(|(i, j, v)| (i, j, v * c)))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self::from_triplets(self.dim, self.triplets().chain(other.triplets()))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut t = Vec::new();
        for i in 0..self.dim {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    t.push((i, j, a * b));
                }
            }
        }
        Self::from_triplets(self.dim, t)
    }

    /// `out = A x`
    pub fn mul_vec(&self, x: &[C64], out: &mut [C64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.dim) {
            let mut acc = ZERO;
            for (j, v) in self.row(i) {
                acc += v * x[j];
            }
            *o = acc;
        }
    }

    /// `out += alpha · A X` for a row-major `dim × dim` matrix `X`.
    pub fn mul_dense_acc(&self, x: &[C64], out: &mut [C64], alpha: C64) {
        let d = self.dim;
        for i in 0..d {
            let out_row = &mut out[i * d..(i + 1) * d];
            for (k, v) in self.row(i) {
                let c = alpha * v;
                let x_row = &x[k * d..(k + 1) * d];
                for (o, xv) in out_row.iter_mut().zip(x_row) {
                    *o += c * xv;
                }
            }
        }
    }

    /// `⟨x|A|x⟩` for a vector, or `tr(A ρ)` when called through [`Self::trace_with`].
    pub fn expectation(&self, x: &[C64]) -> C64 {
        let mut acc = ZERO;
        for i in 0..self.dim {
            let mut row = ZERO;
            for (j, v) in self.row(i) {
                row += v * x[j];
            }
            acc += x[i].conj() * row;
        }
        acc
    }

    /// `tr(A ρ)` for a row-major density matrix.
    pub fn trace_with(&self, rho: &[C64]) -> C64 {
        let d = self.dim;
        let mut acc = ZERO;
        for i in 0..d {
            for (j, v) in self.row(i) {
                acc += v * rho[j * d + i];
            }
        }
        acc
    }

    pub fn to_dense(&self) -> Mat<C64> {
        let mut m = Mat::<C64>::zeros(self.dim, self.dim);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    /// Largest entry of `A − A†`.
    pub fn hermiticity_defect(&self) -> f64 {
        let adj = self.adjoint();
        self.add(&adj.scale(C64::new(-1.0, 0.0))).vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

pub fn norm_sqr(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}

/// `exp(A)` by Taylor series on `A / 2^s` followed by `s` squarings.
pub fn expm(a: &Mat<C64>) -> Mat<C64> {
    let n = a.nrows();
    let norm1 = (0..n).map(|j| (0..n).map(|i| a[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max);
    let s = if norm1 > 0.25 { (norm1 / 0.25).log2().ceil() as u32 } else { 0 };
    let scale = 0.5f64.powi(s as i32);
    let a_scaled = Mat::<C64>::from_fn(n, n, |i, j| a[(i, j)] * scale);

    let mut result = Mat::<C64>::identity(n, n);
    let mut term = Mat::<C64>::identity(n, n);
    for k in 1..=18 {
        term = &term * &a_scaled;
        let inv = 1.0 / k as f64;
        term = Mat::<C64>::from_fn(n, n, |i, j| term[(i, j)] * inv);
        let size =
            (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| term[(i, j)].norm()).fold(0.0, f64::max);
        result = &result + &term;
        if size < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        result = &result * &result;
    }
    result
}

/// `out = M x` for a dense matrix.
pub fn dense_mul_vec(m: &Mat<C64>, x: &[C64], out: &mut [C64]) {
    let n = m.nrows();
    for o in out.iter_mut().take(n) {
        *o = ZERO;
    }
    // Column-major storage: accumulate column by column.
    for (j, &xj) in x.iter().enumerate().take(m.ncols()) {
        if xj == ZERO {
            continue;
        }
        let col = m.col(j);
        for i in 0..n {
            out[i] += col[i] * xj;
        }
    }
}
