//! Dense and sparse kernels for the forward and backward passes.
//!
//! Everything is `f64`; gradient checks at 1e-5 relative tolerance need the
//! headroom. Kernels parallelize over output rows and keep a fixed reduction
//! order inside each row, so results are bit-identical for any thread count.

use crate::error::{Error, Result};
use crate::parallel::for_each_row;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "dense buffer length mismatch");
        DenseMatrix { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// In-place elementwise addition.
    pub fn add_assign(&mut self, other: &DenseMatrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// In-place Hadamard product.
    pub fn mul_assign_elementwise(&mut self, other: &DenseMatrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a *= b;
        }
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Compressed sparse row matrix. Column indices are sorted within each row
/// and explicit zeros are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Build from triplets. Duplicate (i, j) entries are summed; zero values
    /// are dropped.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (u32, u32, f64)>,
    ) -> Self {
        let mut per_row: Vec<Vec<(u32, f64)>> = vec![Vec::new(); rows];
        for (i, j, v) in triplets {
            assert!((i as usize) < rows && (j as usize) < cols, "triplet out of range");
            per_row[i as usize].push((j, v));
        }
        let mut row_offsets = Vec::with_capacity(rows + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for entries in &mut per_row {
            entries.sort_unstable_by_key(|&(j, _)| j);
            let mut k = 0;
            while k < entries.len() {
                let j = entries[k].0;
                let mut v = 0.0;
                while k < entries.len() && entries[k].0 == j {
                    v += entries[k].1;
                    k += 1;
                }
                if v != 0.0 {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        SparseMatrix {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// (column, value) pairs of one row, column-sorted.
    pub fn row_entries(&self, i: usize) -> impl Iterator<Item = (u32, f64)> + '_ {
        let lo = self.row_offsets[i];
        let hi = self.row_offsets[i + 1];
        self.col_indices[lo..hi]
            .iter()
            .zip(&self.values[lo..hi])
            .map(|(&j, &v)| (j, v))
    }

    pub fn iter_entries(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        (0..self.rows).flat_map(move |i| self.row_entries(i).map(move |(j, v)| (i as u32, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let lo = self.row_offsets[i];
        let hi = self.row_offsets[i + 1];
        match self.col_indices[lo..hi].binary_search(&(j as u32)) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn transpose(&self) -> SparseMatrix {
        SparseMatrix::from_triplets(
            self.cols,
            self.rows,
            self.iter_entries().map(|(i, j, v)| (j, i, v)),
        )
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.iter_entries() {
            out.set(i as usize, j as usize, v);
        }
        out
    }
}

fn check_shapes(op: &str, inner_a: usize, inner_b: usize) -> Result<()> {
    if inner_a != inner_b {
        return Err(Error::shape(
            op,
            format!("inner dimensions {inner_a} and {inner_b} differ"),
        ));
    }
    Ok(())
}

/// Sparse-times-dense product `S * B`.
pub fn spmm(s: &SparseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    check_shapes("spmm", s.cols, b.rows())?;
    let mut out = DenseMatrix::zeros(s.rows, b.cols());
    let cols = b.cols();
    for_each_row(out.data_mut(), cols.max(1), |i, row| {
        if cols == 0 {
            return;
        }
        for (j, v) in s.row_entries(i) {
            let brow = b.row(j as usize);
            for (o, x) in row.iter_mut().zip(brow) {
                *o += v * x;
            }
        }
    });
    Ok(out)
}

/// `S^T * B` without materializing the transpose at the call site.
pub fn spmm_transposed(s: &SparseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    check_shapes("spmm_transposed", s.rows, b.rows())?;
    spmm(&s.transpose(), b)
}

/// Dense product `A * B`.
pub fn gemm(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    check_shapes("gemm", a.cols(), b.rows())?;
    let mut out = DenseMatrix::zeros(a.rows(), b.cols());
    let n = b.cols();
    for_each_row(out.data_mut(), n.max(1), |i, row| {
        if n == 0 {
            return;
        }
        let arow = a.row(i);
        for (k, &aik) in arow.iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            let brow = b.row(k);
            for (o, x) in row.iter_mut().zip(brow) {
                *o += aik * x;
            }
        }
    });
    Ok(out)
}

/// `A^T * B` (for weight gradients: the output is small, the shared inner
/// dimension is the node count).
pub fn gemm_tn(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    check_shapes("gemm_tn", a.rows(), b.rows())?;
    let mut out = DenseMatrix::zeros(a.cols(), b.cols());
    let n = b.cols();
    let inner = a.rows();
    let a_cols = a.cols();
    for_each_row(out.data_mut(), n.max(1), |i, row| {
        if n == 0 {
            return;
        }
        for k in 0..inner {
            let aki = a.data()[k * a_cols + i];
            if aki == 0.0 {
                continue;
            }
            let brow = b.row(k);
            for (o, x) in row.iter_mut().zip(brow) {
                *o += aki * x;
            }
        }
    });
    Ok(out)
}

/// `A * B^T` (for input gradients: `B` is a small weight slice).
pub fn gemm_nt(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    check_shapes("gemm_nt", a.cols(), b.cols())?;
    let mut out = DenseMatrix::zeros(a.rows(), b.rows());
    let n = b.rows();
    for_each_row(out.data_mut(), n.max(1), |i, row| {
        if n == 0 {
            return;
        }
        let arow = a.row(i);
        for (j, o) in row.iter_mut().enumerate() {
            let brow = b.row(j);
            let mut acc = 0.0;
            for (x, y) in arow.iter().zip(brow) {
                acc += x * y;
            }
            *o = acc;
        }
    });
    Ok(out)
}

/// Scale row `i` of `B` by `v[i]`. A zero entry zeroes the row, which is how
/// nodes without motif instances drop their motif term.
pub fn row_scale(v: &[f64], b: &DenseMatrix) -> Result<DenseMatrix> {
    if v.len() != b.rows() {
        return Err(Error::shape(
            "row_scale",
            format!("vector length {} vs {} rows", v.len(), b.rows()),
        ));
    }
    let mut out = b.clone();
    let cols = b.cols();
    for_each_row(out.data_mut(), cols.max(1), |i, row| {
        let s = v[i];
        for x in row.iter_mut() {
            *x *= s;
        }
    });
    Ok(out)
}

/// Elementwise map.
pub fn map_elementwise<F>(f: F, b: &DenseMatrix) -> DenseMatrix
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    let mut out = b.clone();
    let cols = b.cols();
    for_each_row(out.data_mut(), cols.max(1), |_, row| {
        for x in row.iter_mut() {
            *x = f(*x);
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dense(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
        let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        DenseMatrix::from_vec(rows, cols, data)
    }

    fn random_sparse(rng: &mut ChaCha8Rng, rows: usize, cols: usize, density: f64) -> SparseMatrix {
        let mut triplets = Vec::new();
        for i in 0..rows as u32 {
            for j in 0..cols as u32 {
                if rng.gen_bool(density) {
                    triplets.push((i, j, rng.gen_range(-2.0..2.0)));
                }
            }
        }
        SparseMatrix::from_triplets(rows, cols, triplets)
    }

    #[test]
    fn spmm_identity_and_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = random_dense(&mut rng, 5, 3);
        let id = SparseMatrix::from_triplets(5, 5, (0..5).map(|i| (i, i, 1.0)));
        assert_eq!(spmm(&id, &b).unwrap(), b);
        let zero = SparseMatrix::from_triplets(5, 5, std::iter::empty());
        assert_eq!(spmm(&zero, &b).unwrap(), DenseMatrix::zeros(5, 3));
    }

    #[test]
    fn spmm_matches_dense_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = random_sparse(&mut rng, 8, 8, 0.3);
        let b = random_dense(&mut rng, 8, 4);
        let via_sparse = spmm(&s, &b).unwrap();
        let via_dense = gemm(&s.to_dense(), &b).unwrap();
        assert!(via_sparse.max_abs_diff(&via_dense) < 1e-12);
    }

    #[test]
    fn spmm_transposed_symmetric_equals_spmm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // Symmetric pattern with symmetric values.
        let mut triplets = Vec::new();
        for i in 0..6u32 {
            for j in (i + 1)..6u32 {
                if rng.gen_bool(0.4) {
                    let v = rng.gen_range(-1.0..1.0);
                    triplets.push((i, j, v));
                    triplets.push((j, i, v));
                }
            }
        }
        let s = SparseMatrix::from_triplets(6, 6, triplets);
        let b = random_dense(&mut rng, 6, 3);
        assert_eq!(
            spmm_transposed(&s, &b).unwrap(),
            spmm(&s, &b).unwrap()
        );
    }

    #[test]
    fn spmm_transposed_permutation_inverts() {
        // Permutation matrix P: row i has a one in column perm[i].
        let perm = [2u32, 0, 3, 1];
        let p = SparseMatrix::from_triplets(4, 4, perm.iter().enumerate().map(|(i, &j)| (i as u32, j, 1.0)));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = random_dense(&mut rng, 4, 2);
        let permuted = spmm(&p, &b).unwrap();
        let back = spmm_transposed(&p, &permuted).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn spmm_transposed_matches_dense_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_sparse(&mut rng, 7, 5, 0.35);
        let b = random_dense(&mut rng, 7, 3);
        let expected = gemm(&s.to_dense().transpose(), &b).unwrap();
        assert!(spmm_transposed(&s, &b).unwrap().max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn gemm_tn_and_nt_match_explicit_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_dense(&mut rng, 6, 4);
        let b = random_dense(&mut rng, 6, 3);
        let expected = gemm(&a.transpose(), &b).unwrap();
        assert!(gemm_tn(&a, &b).unwrap().max_abs_diff(&expected) < 1e-12);

        let c = random_dense(&mut rng, 5, 4);
        let d = random_dense(&mut rng, 7, 4);
        let expected = gemm(&c, &d.transpose()).unwrap();
        assert!(gemm_nt(&c, &d).unwrap().max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn row_scale_zero_row_and_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let b = random_dense(&mut rng, 4, 3);
        let v = [1.0, 0.0, 2.0, -1.0];
        let scaled = row_scale(&v, &b).unwrap();
        assert!(scaled.row(1).iter().all(|&x| x == 0.0));

        let w = [0.5, 3.0, 1.0, 0.0];
        let twice = row_scale(&v, &row_scale(&w, &b).unwrap()).unwrap();
        let vw: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a * b).collect();
        let once = row_scale(&vw, &b).unwrap();
        assert!(twice.max_abs_diff(&once) < 1e-15);
    }

    #[test]
    fn map_elementwise_relu() {
        let b = DenseMatrix::from_vec(2, 2, vec![-1.0, 0.0, 2.5, -0.1]);
        let r = map_elementwise(|x| x.max(0.0), &b);
        assert_eq!(r.data(), &[0.0, 0.0, 2.5, 0.0]);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let s = SparseMatrix::from_triplets(3, 3, std::iter::empty());
        let b = DenseMatrix::zeros(4, 2);
        assert!(matches!(spmm(&s, &b), Err(Error::ShapeMismatch { .. })));
        let a = DenseMatrix::zeros(2, 3);
        assert!(matches!(gemm(&a, &b), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn csr_from_triplets_sums_duplicates_and_sorts() {
        let s = SparseMatrix::from_triplets(2, 4, vec![(0, 3, 1.0), (0, 1, 2.0), (0, 3, 2.0), (1, 0, -1.0), (1, 2, 1.0), (1, 2, -1.0)]);
        let row0: Vec<_> = s.row_entries(0).collect();
        assert_eq!(row0, vec![(1, 2.0), (3, 3.0)]);
        // (1,2) summed to zero and dropped.
        let row1: Vec<_> = s.row_entries(1).collect();
        assert_eq!(row1, vec![(0, -1.0)]);
        assert_eq!(s.nnz(), 3);
    }
}
