//! Dense row-major matrices over f64 and the multiply kernel used by the
//! classifier.
//!
//! Reproducibility contract for [`Matrix::matmul`]: every output element is
//! computed as a chain of fused multiply-adds over the inner index in
//! ascending order, folded over fixed-size inner panels (first panel stored,
//! later panels added in order). The chain depends only on the operand
//! shapes, never on which code path executes, so results are bitwise
//! identical across the vectorized and scalar paths and across runs, and
//! `a.matmul(b).transpose()` equals `b.transpose().matmul(&a.transpose())`
//! exactly, element for element.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from row-major data, rejecting length mismatches and
    /// non-finite elements.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Matrix> {
        if data.len() != rows * cols {
            return Err(Error::Shape {
                op: "from_vec",
                detail: format!(
                    "{rows}x{cols} needs {} elements, got {}",
                    rows * cols,
                    data.len()
                ),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "matrix element at row {}, column {} is not finite",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape {
                op: "from_rows",
                detail: "rows have unequal lengths".into(),
            });
        }
        Matrix::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// New matrix holding the listed rows of `self`, in the listed order.
    pub fn gather_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = vec![0.0; self.data.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        Matrix {
            rows: self.cols,
            cols: self.rows,
            data: out,
        }
    }

    /// Standard matrix product. Errors name both operand shapes on an inner
    /// dimension mismatch.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::Shape {
                op: "matmul",
                detail: format!(
                    "left is {}x{}, right is {}x{}",
                    self.rows, self.cols, rhs.rows, rhs.cols
                ),
            });
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        kernel::matmul_into(
            &self.data,
            &rhs.data,
            &mut out.data,
            self.rows,
            self.cols,
            rhs.cols,
        );
        Ok(out)
    }

    /// Index of the largest element in each row; ties resolve to the lowest
    /// index. Errors on an empty matrix.
    pub fn argmax_rows(&self) -> Result<Vec<usize>> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Shape {
                op: "argmax_rows",
                detail: format!("matrix is {}x{}", self.rows, self.cols),
            });
        }
        Ok(self
            .rows_iter()
            .map(|row| {
                let mut best = 0;
                for (j, &v) in row.iter().enumerate().skip(1) {
                    if v > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect())
    }
}

/// Panel-packed multiply kernel.
///
/// B is repacked into `KC x 16` column panels (zero-padded on the right when
/// the width is not a multiple of 16), then blocks of 8 output rows are
/// accumulated in registers. An AVX-512 tile is used when the CPU supports
/// it; the fallback tiles perform the identical operation sequence per
/// element, so the dispatch never changes results.
mod kernel {
    const KC: usize = 256;
    const JB: usize = 16;

    pub fn matmul_into(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize) {
        if m == 0 || n == 0 {
            return;
        }
        if k == 0 {
            c.iter_mut().for_each(|x| *x = 0.0);
            return;
        }
        if n % JB == 0 {
            run(a, b, c, m, k, n, n);
        } else {
            let npad = (n / JB + 1) * JB;
            let mut cpad = vec![0.0; m * npad];
            run(a, b, &mut cpad, m, k, n, npad);
            for i in 0..m {
                c[i * n..(i + 1) * n].copy_from_slice(&cpad[i * npad..i * npad + n]);
            }
        }
    }

    fn run(a: &[f64], b: &[f64], c: &mut [f64], m: usize, k: usize, n: usize, npad: usize) {
        let jtiles = npad / JB;
        let mut pack = vec![0.0; KC.min(k) * npad];
        let mut k0 = 0;
        while k0 < k {
            let kc = KC.min(k - k0);
            for jt in 0..jtiles {
                let j = jt * JB;
                let width = JB.min(n - j);
                for kk in 0..kc {
                    let dst = jt * kc * JB + kk * JB;
                    let src = (k0 + kk) * n + j;
                    pack[dst..dst + width].copy_from_slice(&b[src..src + width]);
                    pack[dst + width..dst + JB].iter_mut().for_each(|x| *x = 0.0);
                }
            }
            let first = k0 == 0;
            let mut i = 0;
            while i + 8 <= m {
                let arows: [&[f64]; 8] =
                    std::array::from_fn(|r| &a[(i + r) * k + k0..(i + r) * k + k0 + kc]);
                for jt in 0..jtiles {
                    let panel = &pack[jt * kc * JB..(jt + 1) * kc * JB];
                    tile8(&arows, panel, kc, c, i, jt * JB, npad, first);
                }
                i += 8;
            }
            while i < m {
                let arow = &a[i * k + k0..i * k + k0 + kc];
                for jt in 0..jtiles {
                    let panel = &pack[jt * kc * JB..(jt + 1) * kc * JB];
                    tile1(arow, panel, kc, c, i, jt * JB, npad, first);
                }
                i += 1;
            }
            k0 += kc;
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn tile8(
        arows: &[&[f64]; 8],
        panel: &[f64],
        kc: usize,
        c: &mut [f64],
        i: usize,
        j: usize,
        npad: usize,
        first: bool,
    ) {
        #[cfg(target_arch = "x86_64")]
        {
            if avx512_available() {
                // Safety: panel holds kc*JB elements, each arow holds kc, and
                // the c rows i..i+8 extend at least j+JB columns.
                unsafe {
                    tile8_avx512(arows, panel, kc, c, i, j, npad, first);
                }
                return;
            }
            if fma_available() {
                // Safety as above; the target features were detected at runtime.
                unsafe {
                    tile4_fma(
                        [arows[0], arows[1], arows[2], arows[3]],
                        panel,
                        kc,
                        c,
                        i,
                        j,
                        npad,
                        first,
                    );
                    tile4_fma(
                        [arows[4], arows[5], arows[6], arows[7]],
                        panel,
                        kc,
                        c,
                        i + 4,
                        j,
                        npad,
                        first,
                    );
                }
                return;
            }
        }
        tile4(
            [arows[0], arows[1], arows[2], arows[3]],
            panel,
            kc,
            c,
            i,
            j,
            npad,
            first,
        );
        tile4(
            [arows[4], arows[5], arows[6], arows[7]],
            panel,
            kc,
            c,
            i + 4,
            j,
            npad,
            first,
        );
    }

    #[cfg(target_arch = "x86_64")]
    fn avx512_available() -> bool {
        use std::sync::OnceLock;
        static AVAILABLE: OnceLock<bool> = OnceLock::new();
        *AVAILABLE.get_or_init(|| is_x86_feature_detected!("avx512f"))
    }

    #[cfg(target_arch = "x86_64")]
    fn fma_available() -> bool {
        use std::sync::OnceLock;
        static AVAILABLE: OnceLock<bool> = OnceLock::new();
        *AVAILABLE.get_or_init(|| {
            is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma")
        })
    }

    /// 8x16 register tile. Per element: ascending-k FMA chain over the
    /// panel, then a single store (first panel) or add (later panels),
    /// matching `tile4`/`tile1` exactly.
    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx512f")]
    #[allow(clippy::too_many_arguments)]
    unsafe fn tile8_avx512(
        arows: &[&[f64]; 8],
        panel: &[f64],
        kc: usize,
        c: &mut [f64],
        i: usize,
        j: usize,
        npad: usize,
        first: bool,
    ) {
        use std::arch::x86_64::*;
        let mut acc: [[__m512d; 2]; 8] = [[_mm512_setzero_pd(); 2]; 8];
        let p = panel.as_ptr();
        for kk in 0..kc {
            let b0 = _mm512_loadu_pd(p.add(kk * JB));
            let b1 = _mm512_loadu_pd(p.add(kk * JB + 8));
            for r in 0..8 {
                let x = _mm512_set1_pd(*arows[r].get_unchecked(kk));
                acc[r][0] = _mm512_fmadd_pd(x, b0, acc[r][0]);
                acc[r][1] = _mm512_fmadd_pd(x, b1, acc[r][1]);
            }
        }
        for r in 0..8 {
            let dst = c.as_mut_ptr().add((i + r) * npad + j);
            if first {
                _mm512_storeu_pd(dst, acc[r][0]);
                _mm512_storeu_pd(dst.add(8), acc[r][1]);
            } else {
                _mm512_storeu_pd(dst, _mm512_add_pd(_mm512_loadu_pd(dst), acc[r][0]));
                _mm512_storeu_pd(
                    dst.add(8),
                    _mm512_add_pd(_mm512_loadu_pd(dst.add(8)), acc[r][1]),
                );
            }
        }
    }

    /// Same tile body compiled with FMA codegen; results are identical to
    /// the plain build because `mul_add` is a fused operation either way.
    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2,fma")]
    #[allow(clippy::too_many_arguments)]
    unsafe fn tile4_fma(
        arows: [&[f64]; 4],
        panel: &[f64],
        kc: usize,
        c: &mut [f64],
        i: usize,
        j: usize,
        npad: usize,
        first: bool,
    ) {
        tile4(arows, panel, kc, c, i, j, npad, first);
    }

    #[inline(always)]
    #[allow(clippy::too_many_arguments)]
    fn tile4(
        arows: [&[f64]; 4],
        panel: &[f64],
        kc: usize,
        c: &mut [f64],
        i: usize,
        j: usize,
        npad: usize,
        first: bool,
    ) {
        let mut acc0 = [0.0f64; JB];
        let mut acc1 = [0.0f64; JB];
        let mut acc2 = [0.0f64; JB];
        let mut acc3 = [0.0f64; JB];
        for kk in 0..kc {
            let bv = &panel[kk * JB..kk * JB + JB];
            let x0 = arows[0][kk];
            let x1 = arows[1][kk];
            let x2 = arows[2][kk];
            let x3 = arows[3][kk];
            for l in 0..JB {
                acc0[l] = x0.mul_add(bv[l], acc0[l]);
                acc1[l] = x1.mul_add(bv[l], acc1[l]);
                acc2[l] = x2.mul_add(bv[l], acc2[l]);
                acc3[l] = x3.mul_add(bv[l], acc3[l]);
            }
        }
        for (r, acc) in [(0, &acc0), (1, &acc1), (2, &acc2), (3, &acc3)] {
            let dst = &mut c[(i + r) * npad + j..(i + r) * npad + j + JB];
            if first {
                dst.copy_from_slice(acc);
            } else {
                for l in 0..JB {
                    dst[l] += acc[l];
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn tile1(
        arow: &[f64],
        panel: &[f64],
        kc: usize,
        c: &mut [f64],
        i: usize,
        j: usize,
        npad: usize,
        first: bool,
    ) {
        let mut acc = [0.0f64; JB];
        for kk in 0..kc {
            let x = arow[kk];
            let bv = &panel[kk * JB..kk * JB + JB];
            for l in 0..JB {
                acc[l] = x.mul_add(bv[l], acc[l]);
            }
        }
        let dst = &mut c[i * npad + j..i * npad + j + JB];
        if first {
            dst.copy_from_slice(&acc);
        } else {
            for l in 0..JB {
                dst[l] += acc[l];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for kk in 0..a.cols() {
                    s += a.get(i, kk) * b.get(kk, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    fn random_matrix(rows: usize, cols: usize, rng: &mut crate::rng::RngStream) -> Matrix {
        Matrix::from_vec(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn worked_product() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![5.0], vec![6.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.as_slice(), &[17.0, 39.0]);
    }

    #[test]
    fn identity_multiply() {
        let mut eye = Matrix::zeros(3, 3);
        for i in 0..3 {
            eye.set(i, i, 1.0);
        }
        let mut rng = crate::rng::RngStream::new(1);
        let a = random_matrix(3, 3, &mut rng);
        assert_eq!(a.matmul(&eye).unwrap(), a);
    }

    #[test]
    fn mismatch_names_both_shapes() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(4, 2);
        let err = a.matmul(&b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2x3") && msg.contains("4x2"), "{msg}");
    }

    #[test]
    fn matches_naive_product_on_many_shapes() {
        let mut rng = crate::rng::RngStream::new(7);
        for (m, k, n) in [
            (1, 1, 1),
            (2, 3, 4),
            (5, 7, 3),
            (8, 16, 16),
            (9, 17, 18),
            (33, 300, 47),
            (20, 513, 31),
        ] {
            let a = random_matrix(m, k, &mut rng);
            let b = random_matrix(k, n, &mut rng);
            let fast = a.matmul(&b).unwrap();
            let slow = naive_matmul(&a, &b);
            for (x, y) in fast.as_slice().iter().zip(slow.as_slice()) {
                assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn transpose_of_product_is_bitwise_product_of_transposes() {
        let mut rng = crate::rng::RngStream::new(11);
        for (m, k, n) in [(2, 2, 2), (5, 7, 3), (13, 300, 2), (16, 513, 21)] {
            let a = random_matrix(m, k, &mut rng);
            let b = random_matrix(k, n, &mut rng);
            let left = a.matmul(&b).unwrap().transpose();
            let right = b.transpose().matmul(&a.transpose()).unwrap();
            assert_eq!(left.as_slice(), right.as_slice(), "shape {m}x{k}x{n}");
        }
    }

    #[test]
    fn nan_rejected_at_construction() {
        let err = Matrix::from_vec(1, 2, vec![1.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
    }

    #[test]
    fn argmax_takes_lowest_index_on_ties() {
        let m = Matrix::from_rows(&[
            vec![1.0, 3.0, 3.0],
            vec![2.0, 2.0, 2.0],
            vec![-1.0, -2.0, 0.0],
        ])
        .unwrap();
        assert_eq!(m.argmax_rows().unwrap(), vec![1, 0, 2]);
    }

    #[test]
    fn argmax_of_empty_is_shape_error() {
        let m = Matrix::zeros(0, 4);
        assert!(matches!(
            m.argmax_rows().unwrap_err(),
            Error::Shape { .. }
        ));
    }

    #[test]
    fn transpose_round_trip() {
        let mut rng = crate::rng::RngStream::new(3);
        let a = random_matrix(4, 9, &mut rng);
        assert_eq!(a.transpose().transpose(), a);
    }

    #[test]
    fn gather_rows_picks_in_order() {
        let m = Matrix::from_rows(&[vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, 5.0]]).unwrap();
        let g = m.gather_rows(&[2, 0]);
        assert_eq!(g.as_slice(), &[4.0, 5.0, 0.0, 1.0]);
    }
}
