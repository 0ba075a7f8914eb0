//! Minimal CSR matrix used by the time stepper.
//!
//! The public contract of the crate is dense ([`crate::hilbert::OperatorMatrix`]);
//! this is an internal optimization for the Lindblad right-hand side, where the
//! Hamiltonian and collapse operators are very sparse while ρ stays dense.

use nalgebra::DMatrix;
use num_complex::Complex64;

#[derive(Debug, Clone)]
pub(crate) struct CsrMatrix {
    pub dim: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub vals: Vec<Complex64>,
}

impl CsrMatrix {
    pub fn from_dense(m: &DMatrix<Complex64>, drop_tol: f64) -> Self {
        let dim = m.nrows();
        assert_eq!(dim, m.ncols(), "CSR conversion needs a square matrix");
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..dim {
            for j in 0..dim {
                let v = m[(i, j)];
                if v.norm_sqr() > drop_tol * drop_tol {
                    col_idx.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            dim,
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn adjoint(&self) -> Self {
        // transpose via column counting, then conjugate
        let dim = self.dim;
        let mut counts = vec![0usize; dim + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for j in 0..dim {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let nnz = self.vals.len();
        let mut col_idx = vec![0usize; nnz];
        let mut vals = vec![Complex64::default(); nnz];
        let mut next = row_ptr.clone();
        for i in 0..dim {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[p];
                let q = next[j];
                col_idx[q] = i;
                vals[q] = self.vals[p].conj();
                next[j] += 1;
            }
        }
        CsrMatrix {
            dim,
            row_ptr,
            col_idx,
            vals,
        }
    }

    /// out += scale · (self · b), b and out dense dim×dim.
    pub fn mul_dense_acc(
        &self,
        b: &DMatrix<Complex64>,
        scale: Complex64,
        out: &mut DMatrix<Complex64>,
    ) {
        let dim = self.dim;
        let bs = b.as_slice(); // column-major
        let os = out.as_mut_slice();
        for i in 0..dim {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let k = self.col_idx[p];
                let v = scale * self.vals[p];
                // out[i, j] += v * b[k, j] for all j
                let mut bi = k;
                let mut oi = i;
                for _ in 0..dim {
                    os[oi] += v * bs[bi];
                    bi += dim;
                    oi += dim;
                }
            }
        }
    }

    /// out += scale · (b · self), b and out dense dim×dim.
    pub fn dense_mul_acc(
        &self,
        b: &DMatrix<Complex64>,
        scale: Complex64,
        out: &mut DMatrix<Complex64>,
    ) {
        let dim = self.dim;
        let bs = b.as_slice();
        let os = out.as_mut_slice();
        for k in 0..dim {
            for p in self.row_ptr[k]..self.row_ptr[k + 1] {
                let j = self.col_idx[p];
                let v = scale * self.vals[p];
                // out[i, j] += b[i, k] * v for all i
                let bcol = &bs[k * dim..(k + 1) * dim];
                let ocol = &mut os[j * dim..(j + 1) * dim];
                for (o, b) in ocol.iter_mut().zip(bcol) {
                    *o += *b * v;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn random_like(dim: usize, seed: u64) -> DMatrix<Complex64> {
        // cheap deterministic fill, good enough for structural tests
        let mut s = seed;
        DMatrix::from_fn(dim, dim, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = ((s >> 33) as f64) / (u32::MAX as f64) - 0.5;
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let b = ((s >> 33) as f64) / (u32::MAX as f64) - 0.5;
            Complex64::new(a, b)
        })
    }

    #[test]
    fn csr_products_match_dense() {
        let dim = 7;
        let mut a = random_like(dim, 1);
        // sparsify
        for i in 0..dim {
            for j in 0..dim {
                if (i * 3 + j) % 4 != 0 {
                    a[(i, j)] = Complex64::default();
                }
            }
        }
        let b = random_like(dim, 2);
        let csr = CsrMatrix::from_dense(&a, 0.0);
        let scale = Complex64::new(0.7, -0.3);

        let mut out = DMatrix::zeros(dim, dim);
        csr.mul_dense_acc(&b, scale, &mut out);
        let expect = &a * &b * scale;
        assert!((out - &expect).norm() < 1e-12);

        let mut out2 = DMatrix::zeros(dim, dim);
        csr.dense_mul_acc(&b, scale, &mut out2);
        let expect2 = &b * &a * scale;
        assert!((out2 - &expect2).norm() < 1e-12);

        let mut out3 = DMatrix::zeros(dim, dim);
        csr.adjoint().mul_dense_acc(&b, Complex64::new(1.0, 0.0), &mut out3);
        let expect3 = a.adjoint() * &b;
        assert!((out3 - &expect3).norm() < 1e-12);
    }
}
