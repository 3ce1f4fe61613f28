//! Dense complex matrices for the small sizes this crate works with
//! (at most `2r + b`, a dozen or so). Plain O(n³) kernels throughout.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix<T: Real> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Self {
        assert_eq!(rows * cols, data.len(), "shape does not match storage");
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, vec![Complex::zero(); rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_real(rows: usize, cols: usize, values: &[T]) -> Self {
        assert_eq!(rows * cols, values.len());
        Self::new(rows, cols, values.iter().map(|&x| Complex::new(x, T::zero())).collect())
    }

    pub fn diag(values: &[Complex<T>]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Matrix unit `E_{ij}`.
    pub fn unit(rows: usize, cols: usize, i: usize, j: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        m[(i, j)] = Complex::one();
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

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self::new(self.rows, self.cols, self.data.iter().map(|z| z.conj()).collect())
    }

    pub fn scale(&self, c: Complex<T>) -> Self {
        Self::new(self.rows, self.cols, self.data.iter().map(|&z| z * c).collect())
    }

    pub fn scale_real(&self, c: T) -> Self {
        Self::new(self.rows, self.cols, self.data.iter().map(|&z| z * c).collect())
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).fold(Complex::zero(), |a, b| a + b)
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).fold(T::zero(), |a, b| a + b).sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> T {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].norm()).fold(T::zero(), |a, b| a + b))
            .fold(T::zero(), T::max)
    }

    /// Hermitian inner product `tr(self · other*)`.
    pub fn inner(&self, other: &Self) -> Complex<T> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| *a * b.conj())
            .fold(Complex::zero(), |a, b| a + b)
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &Self) {
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
    }

    /// Commutator `[self, other]`.
    pub fn bracket(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = T::one().max(self.max_abs());
        (0..self.rows).all(|i| (0..self.cols).all(|j| (self[(i, j)] - self[(j, i)].conj()).norm() <= tol * scale))
    }

    fn lu(&self) -> Lu<T> {
        assert!(self.is_square(), "LU of a non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = T::one();
        let mut singular = false;
        for k in 0..n {
            let (p, best) = (k..n)
                .map(|i| (i, a[(i, k)].norm()))
                .fold((k, -T::one()), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best == T::zero() {
                singular = true;
                continue;
            }
            if p != k {
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = a[(k, k)];
            for i in (k + 1)..n {
                let l = a[(i, k)] / pivot;
                a[(i, k)] = l;
                for j in (k + 1)..n {
                    let u = a[(k, j)];
                    a[(i, j)] -= l * u;
                }
            }
        }
        Lu { lu: a, perm, sign, singular }
    }

    /// Determinant by LU with partial pivoting; singular matrices give exactly 0.
    pub fn det(&self) -> Complex<T> {
        let lu = self.lu();
        if lu.singular {
            return Complex::zero();
        }
        (0..self.rows).fold(Complex::new(lu.sign, T::zero()), |acc, i| acc * lu.lu[(i, i)])
    }

    /// Solves `self · X = rhs`.
    pub fn solve(&self, rhs: &Self) -> Result<Self> {
        let lu = self.lu();
        if lu.singular {
            return Err(Error::Degenerate("singular matrix in solve".into()));
        }
        let n = self.rows;
        let mut x = Self::zeros(n, rhs.cols);
        for c in 0..rhs.cols {
            let mut y: Vec<Complex<T>> = (0..n).map(|i| rhs[(lu.perm[i], c)]).collect();
            for i in 0..n {
                for k in 0..i {
                    let t = lu.lu[(i, k)] * y[k];
                    y[i] -= t;
                }
            }
            for i in (0..n).rev() {
                for k in (i + 1)..n {
                    let t = lu.lu[(i, k)] * y[k];
                    y[i] -= t;
                }
                y[i] = y[i] / lu.lu[(i, i)];
            }
            for i in 0..n {
                x[(i, c)] = y[i];
            }
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<Self> {
        self.solve(&Self::identity(self.rows))
    }

    /// One-norm condition number, `‖A‖₁ ‖A⁻¹‖₁`; infinite for singular input.
    pub fn condition(&self) -> T {
        match self.inverse() {
            Ok(inv) => self.norm_one() * inv.norm_one(),
            Err(_) => T::infinity(),
        }
    }

    /// Thin QR of a full-column-rank matrix by twice-iterated Gram–Schmidt.
    /// `R` has a positive real diagonal.
    pub fn qr(&self) -> Result<(Self, Self)> {
        let (m, n) = (self.rows, self.cols);
        if n > m {
            return Err(Error::Shape(format!("qr needs rows >= cols, got {m}x{n}")));
        }
        let mut q = self.clone();
        let mut r = Self::zeros(n, n);
        for j in 0..n {
            for _pass in 0..2 {
                for k in 0..j {
                    let mut dot = Complex::zero();
                    for i in 0..m {
                        dot += q[(i, k)].conj() * q[(i, j)];
                    }
                    r[(k, j)] += dot;
                    for i in 0..m {
                        let t = q[(i, k)] * dot;
                        q[(i, j)] -= t;
                    }
                }
            }
            let norm = (0..m).map(|i| q[(i, j)].norm_sqr()).fold(T::zero(), |a, b| a + b).sqrt();
            if norm <= T::epsilon() * T::lit(1e3) * T::one().max(self.max_abs()) {
                return Err(Error::Degenerate("rank-deficient input to qr".into()));
            }
            r[(j, j)] = Complex::new(norm, T::zero());
            for i in 0..m {
                q[(i, j)] = q[(i, j)] / norm;
            }
        }
        Ok((q, r))
    }

    /// Cholesky pivots of a Hermitian matrix; `None` once a pivot is non-positive.
    fn cholesky_pivots(&self) -> Option<Vec<T>> {
        let n = self.rows;
        let mut l = Self::zeros(n, n);
        let mut pivots = Vec::with_capacity(n);
        for j in 0..n {
            let mut d = self[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > T::zero()) {
                return None;
            }
            pivots.push(d);
            let dj = d.sqrt();
            l[(j, j)] = Complex::new(dj, T::zero());
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)].conj();
                }
                l[(i, j)] = s / dj;
            }
        }
        Some(pivots)
    }

    /// `true` iff the Hermitian matrix is positive definite with every Cholesky pivot above `1e-13`.
    pub fn is_strictly_positive(&self) -> Result<bool> {
        if !self.is_hermitian(T::lit(1e-12)) {
            return Err(Error::NotHermitian);
        }
        Ok(self
            .cholesky_pivots()
            .map(|p| p.iter().all(|&x| x > T::lit(1e-13)))
            .unwrap_or(false))
    }

    /// Matrix exponential by scaling and squaring with a Taylor polynomial.
    pub fn expm(&self) -> Self {
        assert!(self.is_square(), "expm of a non-square matrix");
        let n = self.rows;
        let norm = self.norm_one();
        let mut squarings = 0u32;
        let mut scale = T::one();
        while norm * scale > T::lit(0.5) {
            scale = scale * T::lit(0.5);
            squarings += 1;
        }
        let a = self.scale_real(scale);
        let mut term = Self::identity(n);
        let mut sum = Self::identity(n);
        for k in 1..=24 {
            term = (&term * &a).scale_real(T::one() / T::of(k));
            let small = term.max_abs();
            sum = &sum + &term;
            if small <= T::epsilon() * T::lit(1e-3) {
                break;
            }
        }
        for _ in 0..squarings {
            sum = &sum * &sum;
        }
        sum
    }

    /// Eigenvalues of a Hermitian matrix, ascending.
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<T>> {
        if !self.is_hermitian(T::lit(1e-10)) {
            return Err(Error::NotHermitian);
        }
        let n = self.rows;
        // Real symmetric embedding [[Re, -Im], [Im, Re]] doubles each eigenvalue.
        let mut emb = vec![T::zero(); 4 * n * n];
        for i in 0..n {
            for j in 0..n {
                let z = self[(i, j)];
                emb[i * 2 * n + j] = z.re;
                emb[i * 2 * n + j + n] = -z.im;
                emb[(i + n) * 2 * n + j] = z.im;
                emb[(i + n) * 2 * n + j + n] = z.re;
            }
        }
        let (vals, _) = symmetric_eigen(&emb, 2 * n);
        Ok(vals.into_iter().step_by(2).collect())
    }
}

struct Lu<T: Real> {
    lu: CMatrix<T>,
    perm: Vec<usize>,
    sign: T,
    singular: bool,
}

/// Cyclic Jacobi eigen-decomposition of a real symmetric `n × n` matrix (row-major).
/// Returns ascending eigenvalues and the matching eigenvectors as columns (row-major `n × n`).
pub fn symmetric_eigen<T: Real>(a: &[T], n: usize) -> (Vec<T>, Vec<T>) {
    assert_eq!(a.len(), n * n);
    let mut a = a.to_vec();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let total: T = a.iter().map(|&x| x * x).fold(T::zero(), |s, x| s + x);
    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .fold(T::zero(), |s, x| s + x);
        if off <= T::epsilon() * T::epsilon() * total.max(T::min_positive_value()) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].partial_cmp(&a[j * n + j]).unwrap());
    let vals = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vecs = vec![T::zero(); n * n];
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vecs[k * n + new] = v[k * n + old];
        }
    }
    (vals, vecs)
}

impl<T: Real> Index<(usize, usize)> for CMatrix<T> {
    type Output = Complex<T>;
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T: Real> IndexMut<(usize, usize)> for CMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<'a, T: Real> Mul<&'a CMatrix<T>> for &'a CMatrix<T> {
    type Output = CMatrix<T>;
    fn mul(self, rhs: &'a CMatrix<T>) -> CMatrix<T> {
        assert_eq!(self.cols, rhs.rows, "dimension mismatch in product");
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.is_zero() {
                    continue;
                }
                let row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }
}

impl<'a, T: Real> Add<&'a CMatrix<T>> for &'a CMatrix<T> {
    type Output = CMatrix<T>;
    fn add(self, rhs: &'a CMatrix<T>) -> CMatrix<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix::new(self.rows, self.cols, self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect())
    }
}

impl<'a, T: Real> Sub<&'a CMatrix<T>> for &'a CMatrix<T> {
    type Output = CMatrix<T>;
    fn sub(self, rhs: &'a CMatrix<T>) -> CMatrix<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMatrix::new(self.rows, self.cols, self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect())
    }
}

impl<T: Real> Neg for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn neg(self) -> CMatrix<T> {
        CMatrix::new(self.rows, self.cols, self.data.iter().map(|z| -z).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type C = Complex<f64>;

    fn random(n: usize, seed: u64, scale: f64) -> CMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMatrix::from_fn(n, n, |_, _| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale)
    }

    #[test]
    fn det_small_cases() {
        assert_eq!(CMatrix::<f64>::identity(3).det(), C::new(1.0, 0.0));
        let d = CMatrix::diag(&[C::new(2.0, 0.0), C::new(0.0, 3.0)]).det();
        assert!((d - C::new(0.0, 6.0)).norm() < 1e-15);
        assert_eq!(CMatrix::<f64>::zeros(2, 2).det(), C::new(0.0, 0.0));
    }

    #[test]
    fn det_is_multiplicative() {
        let a = random(4, 1, 1.0);
        let b = random(4, 2, 1.0);
        let lhs = (&a * &b).det();
        let rhs = a.det() * b.det();
        assert!((lhs - rhs).norm() <= 1e-12 * rhs.norm());
    }

    #[test]
    fn positivity_examples() {
        assert!(CMatrix::<f64>::identity(2).is_strictly_positive().unwrap());
        let d = CMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, -0.5]);
        assert!(!d.is_strictly_positive().unwrap());
        let z = CMatrix::from_real(1, 2, &[0.9, 0.0]);
        let h = &CMatrix::identity(1) - &(&z * &z.adjoint());
        assert!(h.is_strictly_positive().unwrap());
        let bad = CMatrix::new(2, 2, vec![C::new(1.0, 0.0), C::new(1.0, 0.0), C::new(0.0, 0.0), C::new(1.0, 0.0)]);
        assert!(matches!(bad.is_strictly_positive(), Err(Error::NotHermitian)));
    }

    #[test]
    fn expm_examples() {
        assert_eq!(CMatrix::<f64>::zeros(3, 3).expm(), CMatrix::identity(3));
        let t = 0.7;
        let mut x = CMatrix::<f64>::zeros(3, 3);
        x[(0, 1)] = C::new(t, 0.0);
        x[(1, 0)] = C::new(t, 0.0);
        let e = x.expm();
        let mut want = CMatrix::<f64>::identity(3);
        want[(0, 0)] = C::new(t.cosh(), 0.0);
        want[(1, 1)] = C::new(t.cosh(), 0.0);
        want[(0, 1)] = C::new(t.sinh(), 0.0);
        want[(1, 0)] = C::new(t.sinh(), 0.0);
        assert!((&e - &want).max_abs() < 1e-14);
        let y = random(4, 3, 0.5);
        let prod = &y.expm() * &(-&y).expm();
        assert!((&prod - &CMatrix::identity(4)).max_abs() < 1e-12);
    }

    #[test]
    fn det_of_exp_is_exp_of_trace() {
        for seed in 0..10 {
            let x = random(5, seed, 0.4);
            let lhs = x.expm().det();
            let rhs = x.trace().exp();
            assert!((lhs - rhs).norm() <= 1e-10 * rhs.norm());
        }
    }

    #[test]
    fn qr_is_unitary_with_positive_diagonal() {
        let a = random(5, 9, 1.0);
        let (q, r) = a.qr().unwrap();
        let qq = &q.adjoint() * &q;
        assert!((&qq - &CMatrix::identity(5)).max_abs() < 1e-12);
        assert!((&(&q * &r) - &a).max_abs() < 1e-12);
        for i in 0..5 {
            assert!(r[(i, i)].re > 0.0 && r[(i, i)].im == 0.0);
        }
    }

    #[test]
    fn inverse_and_solve() {
        let a = random(4, 11, 1.0);
        let inv = a.inverse().unwrap();
        assert!((&(&a * &inv) - &CMatrix::identity(4)).max_abs() < 1e-12);
        assert!(CMatrix::<f64>::zeros(2, 2).inverse().is_err());
    }

    #[test]
    fn hermitian_eigenvalues_match_trace_and_known_case() {
        let h = CMatrix::new(2, 2, vec![C::new(2.0, 0.0), C::new(0.0, 1.0), C::new(0.0, -1.0), C::new(2.0, 0.0)]);
        let ev = h.hermitian_eigenvalues().unwrap();
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn works_in_single_precision() {
        let a = CMatrix::<f32>::from_real(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        assert!((a.det().re - 5.0).abs() < 1e-5);
        let e = CMatrix::<f32>::zeros(2, 2).expm();
        assert_eq!(e, CMatrix::identity(2));
    }

    proptest::proptest! {
        #[test]
        fn operations_are_repeatable(seed in 0u64..1000) {
            let a = random(4, seed, 1.0);
            proptest::prop_assert_eq!(a.det(), a.det());
            proptest::prop_assert_eq!(a.expm(), a.expm());
        }
    }
}
