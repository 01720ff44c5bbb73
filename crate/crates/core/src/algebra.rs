//! Dense complex linear algebra for the tiny matrices that appear in
//! dispersion and factorization checks (never larger than a few rows).
//!
//! Rank and kernels use Gaussian elimination with full pivoting and a
//! relative pivot threshold `tol × max|entry|`.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Row-major dense complex matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("matrix must be non-empty, got {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|z| !z.is_finite()) {
            return Err(Error::Input(format!(
                "non-finite entry at ({}, {})",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|row| row.len() != c) {
            return Err(Error::Shape(format!("row {bad} has a different length than row 0")));
        }
        Self::new(r, c, rows.concat())
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<Complex64>> = rows
            .iter()
            .map(|row| row.iter().map(|&x| Complex64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn diagonal(values: &[Complex64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// Largest entry modulus; the scale used by the relative tolerances.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn conj(&self) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Shape(format!(
                "{}x{} and {}x{} operands",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.cols {
            return Err(Error::Shape(format!(
                "vector of length {} against {} columns",
                v.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Determinant by LU with partial pivoting.
    pub fn determinant(&self) -> Result<Complex64> {
        if !self.is_square() {
            return Err(Error::Shape(format!("determinant of a {}x{} matrix", self.rows, self.cols)));
        }
        let n = self.rows;
        let mut a = self.data.clone();
        let mut det = ONE;
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a[i * n + k].norm().total_cmp(&a[j * n + k].norm()))
                .unwrap_or(k);
            if a[p * n + k] == ZERO {
                return Ok(ZERO);
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                det = -det;
            }
            let pivot = a[k * n + k];
            det *= pivot;
            for i in k + 1..n {
                let f = a[i * n + k] / pivot;
                if f == ZERO {
                    continue;
                }
                for j in k..n {
                    let akj = a[k * n + j];
                    a[i * n + j] -= f * akj;
                }
            }
        }
        Ok(det)
    }

    /// Inverse by Gauss–Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::Shape(format!("inverse of a {}x{} matrix", self.rows, self.cols)));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        let scale = self.max_abs();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a[(i, k)].norm().total_cmp(&a[(j, k)].norm()))
                .unwrap_or(k);
            if a[(p, k)].norm() <= f64::EPSILON * scale {
                return Err(Error::Singularity("matrix is not invertible".into()));
            }
            if p != k {
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                    inv.data.swap(k * n + j, p * n + j);
                }
            }
            let pivot = a[(k, k)];
            for j in 0..n {
                a[(k, j)] /= pivot;
                inv[(k, j)] /= pivot;
            }
            for i in 0..n {
                if i == k {
                    continue;
                }
                let f = a[(i, k)];
                if f == ZERO {
                    continue;
                }
                for j in 0..n {
                    let akj = a[(k, j)];
                    let ikj = inv[(k, j)];
                    a[(i, j)] -= f * akj;
                    inv[(i, j)] -= f * ikj;
                }
            }
        }
        Ok(inv)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Display for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|z| format!("{z}")).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Result of full-pivot elimination: the reduced upper-trapezoidal factor in
/// permuted coordinates.
struct Reduction {
    rank: usize,
    upper: ComplexMatrix,
    col_perm: Vec<usize>,
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::Input(format!("tolerance must be positive, got {tol}")))
    }
}

fn full_pivot_reduce(m: &ComplexMatrix, tol: f64) -> Reduction {
    let (rows, cols) = (m.rows, m.cols);
    let mut a = m.clone();
    let mut col_perm: Vec<usize> = (0..cols).collect();
    let threshold = tol * m.max_abs();
    let mut rank = 0;
    for k in 0..rows.min(cols) {
        let mut best = (k, k, -1.0_f64);
        for i in k..rows {
            for j in k..cols {
                let mag = a[(i, j)].norm();
                if mag > best.2 {
                    best = (i, j, mag);
                }
            }
        }
        let (pi, pj, mag) = best;
        if mag <= threshold || mag == 0.0 {
            break;
        }
        if pi != k {
            for j in 0..cols {
                a.data.swap(k * cols + j, pi * cols + j);
            }
        }
        if pj != k {
            for i in 0..rows {
                a.data.swap(i * cols + k, i * cols + pj);
            }
            col_perm.swap(k, pj);
        }
        let pivot = a[(k, k)];
        for i in k + 1..rows {
            let f = a[(i, k)] / pivot;
            a[(i, k)] = ZERO;
            if f == ZERO {
                continue;
            }
            for j in k + 1..cols {
                let akj = a[(k, j)];
                a[(i, j)] -= f * akj;
            }
        }
        rank += 1;
    }
    Reduction { rank, upper: a, col_perm }
}

/// Numerical rank: number of full-pivot elimination pivots whose modulus
/// exceeds `tol × max|entry|`. The zero matrix has rank 0.
pub fn rank_with_tolerance(m: &ComplexMatrix, tol: f64) -> Result<usize> {
    check_tol(tol)?;
    Ok(full_pivot_reduce(m, tol).rank)
}

/// Orthonormal basis of the right kernel `{v : M v = 0}`.
///
/// Returns `cols − rank` vectors, orthonormalised by modified Gram–Schmidt
/// under the Hermitian inner product. Every vector satisfies
/// `|M v|∞ ≤ 10·tol·max|entry|`; a violation is reported as an error
/// rather than returned silently.
pub fn kernel_basis(m: &ComplexMatrix, tol: f64) -> Result<Vec<Vec<Complex64>>> {
    check_tol(tol)?;
    let Reduction { rank, upper, col_perm } = full_pivot_reduce(m, tol);
    let n = m.cols;
    let mut raw = Vec::with_capacity(n - rank);
    for free in rank..n {
        let mut x = vec![ZERO; n];
        x[free] = ONE;
        for k in (0..rank).rev() {
            let s: Complex64 = (k + 1..n).map(|l| upper[(k, l)] * x[l]).sum();
            x[k] = -s / upper[(k, k)];
        }
        let mut v = vec![ZERO; n];
        for (k, &orig) in col_perm.iter().enumerate() {
            v[orig] = x[k];
        }
        raw.push(v);
    }
    let basis = modified_gram_schmidt(raw)?;
    let bound = 10.0 * tol * m.max_abs();
    for v in &basis {
        let mv = m.mul_vec(v)?;
        let worst = mv.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if worst > bound {
            return Err(Error::Degenerate(format!(
                "kernel vector residual {worst:e} exceeds {bound:e}; matrix is ill-conditioned at this tolerance"
            )));
        }
    }
    Ok(basis)
}

/// Modified Gram–Schmidt under `<a, b> = Σ conj(a_i) b_i`.
pub fn modified_gram_schmidt(vectors: Vec<Vec<Complex64>>) -> Result<Vec<Vec<Complex64>>> {
    let mut out: Vec<Vec<Complex64>> = Vec::with_capacity(vectors.len());
    for mut v in vectors {
        for q in &out {
            let proj: Complex64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= proj * qi;
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm <= f64::EPSILON {
            return Err(Error::Degenerate("linearly dependent vectors in Gram–Schmidt".into()));
        }
        v.iter_mut().for_each(|z| *z /= norm);
        out.push(v);
    }
    Ok(out)
}

/// Membership in SO(q, ℂ): `max|LᵀL − I| ≤ tol` and `|det L − 1| ≤ tol`.
///
/// Uses the plain transpose, so complex rotations qualify.
pub fn is_special_orthogonal(l: &ComplexMatrix, tol: f64) -> Result<bool> {
    if !l.is_square() {
        return Err(Error::Shape(format!("rotation must be square, got {}x{}", l.rows, l.cols)));
    }
    let gram = l.transpose().mul(l)?;
    let deviation = gram.sub(&ComplexMatrix::identity(l.rows))?.max_abs();
    let det = l.determinant()?;
    Ok(deviation <= tol && (det - ONE).norm() <= tol)
}

/// Largest modulus in a vector.
pub fn max_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// The rank-test matrix of the plasticity subsystem at λ = (λ₁, λ₂).
    fn plasticity_symbol(l1: Complex64, l2: Complex64) -> ComplexMatrix {
        let z = ZERO;
        ComplexMatrix::from_rows(&[
            vec![l2, -l1, z, z],
            vec![z, z, l1, l2],
            vec![z, z, l2, -l1],
        ])
        .unwrap()
    }

    #[test]
    fn test_rank_identity_and_zero() {
        assert_eq!(rank_with_tolerance(&ComplexMatrix::identity(2), 1e-10).unwrap(), 2);
        assert_eq!(rank_with_tolerance(&ComplexMatrix::zeros(3, 4), 1e-10).unwrap(), 0);
    }

    #[test]
    fn test_rank_plasticity_symbol_is_deficient() {
        // Rows 2 and 3 become (0,0,1,i) and (0,0,i,-1) = i·(0,0,1,i).
        let m = plasticity_symbol(ONE, c(0.0, 1.0));
        assert_eq!(rank_with_tolerance(&m, 1e-10).unwrap(), 2);
        let generic = plasticity_symbol(ONE, c(0.5, 0.0));
        assert_eq!(rank_with_tolerance(&generic, 1e-10).unwrap(), 3);
    }

    #[test]
    fn test_rank_rejects_bad_tolerance() {
        assert!(rank_with_tolerance(&ComplexMatrix::identity(2), 0.0).is_err());
    }

    #[test]
    fn test_non_finite_entry_rejected() {
        let err = ComplexMatrix::new(1, 2, vec![ONE, c(f64::NAN, 0.0)]).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn test_kernel_identity_is_empty() {
        assert!(kernel_basis(&ComplexMatrix::identity(2), 1e-10).unwrap().is_empty());
    }

    #[test]
    fn test_kernel_of_plasticity_symbol() {
        let m = plasticity_symbol(ONE, c(0.0, 1.0));
        let basis = kernel_basis(&m, 1e-10).unwrap();
        assert_eq!(basis.len(), 2);
        for v in &basis {
            assert!(max_norm(&m.mul_vec(v).unwrap()) <= 1e-12);
        }
        // Brute-force check: the kernel is spanned by (1, i, 0, 0) and (0, 0, 1, i).
        let expected = [[ONE, c(0.0, 1.0), ZERO, ZERO], [ZERO, ZERO, ONE, c(0.0, 1.0)]];
        for e in expected {
            let mut residual = e.to_vec();
            for q in &basis {
                let proj: Complex64 = q.iter().zip(&e).map(|(a, b)| a.conj() * b).sum();
                for (r, qi) in residual.iter_mut().zip(q) {
                    *r -= proj * qi;
                }
            }
            assert!(max_norm(&residual) < 1e-12);
        }
        let gram: Complex64 = basis[0].iter().zip(&basis[1]).map(|(a, b)| a.conj() * b).sum();
        assert!(gram.norm() < 1e-14);
    }

    #[test]
    fn test_kernel_row_vector() {
        let m = ComplexMatrix::from_real_rows(&[&[1.0, -1.0]]).unwrap();
        let basis = kernel_basis(&m, 1e-10).unwrap();
        assert_eq!(basis.len(), 1);
        let v = &basis[0];
        let h = std::f64::consts::FRAC_1_SQRT_2;
        // Unique up to a unimodular phase.
        let phase = v[0] / h;
        assert!((phase.norm() - 1.0).abs() < 1e-14);
        assert!((v[1] - phase * h).norm() < 1e-14);
    }

    #[test]
    fn test_special_orthogonal_examples() {
        assert!(is_special_orthogonal(&ComplexMatrix::identity(2), 1e-12).unwrap());
        let a: f64 = 0.3;
        let rot = ComplexMatrix::from_real_rows(&[&[a.cos(), -a.sin()], &[a.sin(), a.cos()]]).unwrap();
        assert!(is_special_orthogonal(&rot, 1e-12).unwrap());
        let reflect = ComplexMatrix::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]]).unwrap();
        assert!(!is_special_orthogonal(&reflect, 1e-12).unwrap());
    }

    #[test]
    fn test_complex_rotation_is_special_orthogonal() {
        // cos²w + sin²w = 1 holds for complex w.
        let w = c(0.4, 0.9);
        let rot = ComplexMatrix::from_rows(&[vec![w.cos(), -w.sin()], vec![w.sin(), w.cos()]]).unwrap();
        assert!(is_special_orthogonal(&rot, 1e-12).unwrap());
    }

    #[test]
    fn test_determinant_and_inverse() {
        let m = ComplexMatrix::from_rows(&[vec![c(1.0, 1.0), c(2.0, 0.0)], vec![c(0.0, -1.0), c(3.0, 0.5)]])
            .unwrap();
        let det = m.determinant().unwrap();
        let expected = c(1.0, 1.0) * c(3.0, 0.5) - c(2.0, 0.0) * c(0.0, -1.0);
        assert!((det - expected).norm() < 1e-14);
        let prod = m.mul(&m.inverse().unwrap()).unwrap();
        assert!(prod.sub(&ComplexMatrix::identity(2)).unwrap().max_abs() < 1e-14);
    }

    fn small_complex() -> impl Strategy<Value = Complex64> {
        (-3i32..=3, -3i32..=3).prop_map(|(a, b)| c(a as f64, b as f64))
    }

    fn matrix_strategy() -> impl Strategy<Value = ComplexMatrix> {
        (1usize..=4, 1usize..=5).prop_flat_map(|(r, k)| {
            // Product of an r×k and a k×5 factor gives controlled rank deficiency.
            (
                proptest::collection::vec(small_complex(), r * k),
                proptest::collection::vec(small_complex(), k * 5),
            )
                .prop_map(move |(a, b)| {
                    let a = ComplexMatrix::new(r, k, a).unwrap();
                    let b = ComplexMatrix::new(k, 5, b).unwrap();
                    a.mul(&b).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn prop_rank_invariant_under_permutation_and_scaling(
            m in matrix_strategy(),
            seed in any::<u64>(),
            moduli in proptest::collection::vec(0.5f64..2.0, 4),
            phases in proptest::collection::vec(0.0f64..std::f64::consts::TAU, 4),
        ) {
            let rank = rank_with_tolerance(&m, 1e-10).unwrap();
            let (r, cols) = (m.rows(), m.cols());
            let mut row_order: Vec<usize> = (0..r).collect();
            let mut col_order: Vec<usize> = (0..cols).collect();
            row_order.rotate_left((seed as usize) % r);
            col_order.reverse();
            col_order.rotate_left((seed as usize / 7) % cols);
            let mut data = Vec::with_capacity(r * cols);
            for (k, &i) in row_order.iter().enumerate() {
                let s = Complex64::from_polar(moduli[k], phases[k]);
                for &j in &col_order {
                    data.push(m[(i, j)] * s);
                }
            }
            let permuted = ComplexMatrix::new(r, cols, data).unwrap();
            prop_assert_eq!(rank_with_tolerance(&permuted, 1e-10).unwrap(), rank);
        }

        #[test]
        fn prop_kernel_vectors_annihilated(m in matrix_strategy()) {
            let basis = kernel_basis(&m, 1e-10).unwrap();
            prop_assert_eq!(basis.len(), m.cols() - rank_with_tolerance(&m, 1e-10).unwrap());
            for v in &basis {
                prop_assert!(max_norm(&m.mul_vec(v).unwrap()) <= 10.0 * 1e-10 * m.max_abs().max(1.0));
            }
        }

        #[test]
        fn prop_special_orthogonal_closed_under_product(a in -3.0f64..3.0, b in -3.0f64..3.0, c_im in -1.0f64..1.0) {
            let rot = |w: Complex64| ComplexMatrix::from_rows(&[vec![w.cos(), -w.sin()], vec![w.sin(), w.cos()]]).unwrap();
            let l = rot(c(a, c_im));
            let k = rot(c(b, 0.0));
            prop_assert!(is_special_orthogonal(&l, 1e-10).unwrap());
            prop_assert!(is_special_orthogonal(&k, 1e-10).unwrap());
            prop_assert!(is_special_orthogonal(&l.mul(&k).unwrap(), 1e-10).unwrap());
        }
    }
}
