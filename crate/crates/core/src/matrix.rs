//! Dense complex matrices and the kernels shared by every other module:
//! tensor products, the matrix exponential, partial trace over the bath
//! factor, and the norms used as error metrics.
//!
//! Tensor products are always ordered `system ⊗ bath`, so a composite index
//! is `s * d_bath + b` with the bath index running fastest.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Which operator norm a residual is measured in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    /// Largest singular value.
    Spectral,
    Frobenius,
}

/// A dense complex matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    inner: DMatrix<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            inner: DMatrix::zeros(rows, cols),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: DMatrix::identity(n, n),
        }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self {
            inner: DMatrix::from_fn(rows, cols, f),
        }
    }

    /// Builds a matrix from row-major entries, rejecting NaN/Inf.
    pub fn from_row_major(rows: usize, cols: usize, entries: &[C64]) -> Result<Self> {
        if rows * cols != entries.len() {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if let Some(pos) = entries.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols.max(1),
                col: pos % cols.max(1),
            });
        }
        Ok(Self {
            inner: DMatrix::from_row_slice(rows, cols, entries),
        })
    }

    /// Builds a matrix from a list of equally long rows.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch(format!(
                "row {bad} has {} entries, expected {cols}",
                rows[bad].len()
            )));
        }
        let flat: Vec<C64> = rows.iter().flatten().copied().collect();
        Self::from_row_major(rows.len(), cols, &flat)
    }

    /// Convenience for real-valued literals in tests and instances.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn diag(entries: &[C64]) -> Self {
        let n = entries.len();
        Self::from_fn(n, n, |r, c| if r == c { entries[r] } else { ZERO })
    }

    pub fn real_diag(entries: &[f64]) -> Self {
        let n = entries.len();
        Self::from_fn(n, n, |r, c| {
            if r == c {
                C64::new(entries[r], 0.0)
            } else {
                ZERO
            }
        })
    }

    pub fn from_nalgebra(inner: DMatrix<C64>) -> Self {
        Self { inner }
    }

    pub fn as_nalgebra(&self) -> &DMatrix<C64> {
        &self.inner
    }

    pub fn into_nalgebra(self) -> DMatrix<C64> {
        self.inner
    }

    pub fn rows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn cols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    /// Side length of a square matrix.
    pub fn dim(&self) -> Result<usize> {
        self.require_square()?;
        Ok(self.rows())
    }

    fn require_square(&self) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::NotSquare {
                rows: self.rows(),
                cols: self.cols(),
            })
        }
    }

    /// Entries in row-major order.
    pub fn row_major(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for r in 0..self.rows() {
            for c in 0..self.cols() {
                out.push(self.inner[(r, c)]);
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Self {
            inner: self.inner.adjoint(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            inner: self.inner.transpose(),
        }
    }

    pub fn trace(&self) -> C64 {
        self.inner.diagonal().iter().sum()
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self {
            inner: &self.inner * factor,
        }
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(C64::new(factor, 0.0))
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.inner.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.inner.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Copies the `nrows x ncols` sub-block starting at `(row, col)`.
    pub fn block(&self, row: usize, col: usize, nrows: usize, ncols: usize) -> Self {
        Self {
            inner: self.inner.view((row, col), (nrows, ncols)).into_owned(),
        }
    }

    /// Picks rows `row_idx` and columns `col_idx` (in that order).
    pub fn select(&self, row_idx: &[usize], col_idx: &[usize]) -> Self {
        Self::from_fn(row_idx.len(), col_idx.len(), |r, c| {
            self.inner[(row_idx[r], col_idx[c])]
        })
    }

    pub fn norm(&self, norm: Norm) -> f64 {
        match norm {
            Norm::Spectral => spectral_norm(self),
            Norm::Frobenius => frobenius_norm(self),
        }
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows(), self.cols())?;
        for r in 0..self.rows() {
            write!(f, "  ")?;
            for c in 0..self.cols() {
                let z = self.inner[(r, c)];
                write!(f, "{:+.6e}{:+.6e}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.inner[idx]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, idx: (usize, usize)) -> &mut C64 {
        &mut self.inner[idx]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix {
            inner: &self.inner + &rhs.inner,
        }
    }
}

impl Add for ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix {
            inner: self.inner + rhs.inner,
        }
    }
}

impl AddAssign<&ComplexMatrix> for ComplexMatrix {
    fn add_assign(&mut self, rhs: &ComplexMatrix) {
        self.inner += &rhs.inner;
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix {
            inner: &self.inner - &rhs.inner,
        }
    }
}

impl Sub for ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix {
            inner: self.inner - rhs.inner,
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix {
            inner: &self.inner * &rhs.inner,
        }
    }
}

impl Mul for ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix {
            inner: self.inner * rhs.inner,
        }
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix {
            inner: -&self.inner,
        }
    }
}

/// Kronecker product; entry `((i1,i2),(j1,j2))` is `a[i1,j1] * b[i2,j2]`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (br, bc) = (b.rows(), b.cols());
    ComplexMatrix::from_fn(a.rows() * br, a.cols() * bc, |r, c| {
        a[(r / br, c / bc)] * b[(r % br, c % bc)]
    })
}

// Padé coefficients b_0..b_m and 1-norm thresholds theta_m for unit roundoff
// 2^-53 (scaling and squaring with the [m/m] diagonal approximant).
const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152;

fn one_norm(m: &DMatrix<C64>) -> f64 {
    m.column_iter()
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a diagonal Padé
/// approximant of degree at most 13. Backward error is bounded by the unit
/// roundoff for every input.
pub fn mat_exp(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let n = a.dim()?;
    if n == 0 {
        return Ok(ComplexMatrix::zeros(0, 0));
    }
    if !a.is_finite() {
        return Err(Error::invalid("mat_exp input", "matrix has non-finite entries"));
    }
    let am = &a.inner;
    let norm = one_norm(am);
    let eye = DMatrix::<C64>::identity(n, n);

    for &(m, theta) in &THETA {
        if norm <= theta {
            let coeffs: &[f64] = match m {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            let (u, v) = pade_low(am, coeffs, &eye);
            return solve_pade(u, v).map(ComplexMatrix::from_nalgebra);
        }
    }

    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil().max(0.0) as u32
    } else {
        0
    };
    let scaled = am * C64::new(0.5f64.powi(squarings as i32), 0.0);
    let (u, v) = pade13(&scaled, &eye);
    let mut r = solve_pade(u, v)?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(ComplexMatrix::from_nalgebra(r))
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn pade_low(a: &DMatrix<C64>, b: &[f64], eye: &DMatrix<C64>) -> (DMatrix<C64>, DMatrix<C64>) {
    let a2 = a * a;
    let mut even_pow = eye.clone();
    let mut u_acc = eye * real(b[1]);
    let mut v_acc = eye * real(b[0]);
    let mut k = 1;
    while 2 * k < b.len() {
        even_pow = &even_pow * &a2;
        v_acc += &even_pow * real(b[2 * k]);
        if 2 * k + 1 < b.len() {
            u_acc += &even_pow * real(b[2 * k + 1]);
        }
        k += 1;
    }
    (a * u_acc, v_acc)
}

fn pade13(a: &DMatrix<C64>, eye: &DMatrix<C64>) -> (DMatrix<C64>, DMatrix<C64>) {
    let b = &PADE13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * (&a6 * real(b[13]) + &a4 * real(b[11]) + &a2 * real(b[9]));
    let u = a
        * (inner_u + &a6 * real(b[7]) + &a4 * real(b[5]) + &a2 * real(b[3]) + eye * real(b[1]));
    let inner_v = &a6 * (&a6 * real(b[12]) + &a4 * real(b[10]) + &a2 * real(b[8]));
    let v = inner_v + &a6 * real(b[6]) + &a4 * real(b[4]) + &a2 * real(b[2]) + eye * real(b[0]);
    (u, v)
}

fn solve_pade(u: DMatrix<C64>, v: DMatrix<C64>) -> Result<DMatrix<C64>> {
    let p = &v + &u;
    let q = v - u;
    q.lu().solve(&p).ok_or(Error::Singular("Padé denominator"))
}

/// Traces out the bath factor of a `system ⊗ bath` operator.
pub fn partial_trace_bath(x: &ComplexMatrix, d_sys: usize, d_bath: usize) -> Result<ComplexMatrix> {
    let dim = x.dim()?;
    if dim != d_sys * d_bath {
        return Err(Error::DimensionMismatch(format!(
            "operator is {dim}-dimensional, expected {d_sys}*{d_bath}"
        )));
    }
    Ok(ComplexMatrix::from_fn(d_sys, d_sys, |r, c| {
        (0..d_bath)
            .map(|b| x[(r * d_bath + b, c * d_bath + b)])
            .sum()
    }))
}

pub fn singular_values(a: &ComplexMatrix) -> Vec<f64> {
    if a.rows() == 0 || a.cols() == 0 {
        return Vec::new();
    }
    a.inner
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect()
}

pub fn spectral_norm(a: &ComplexMatrix) -> f64 {
    singular_values(a).into_iter().fold(0.0, f64::max)
}

pub fn frobenius_norm(a: &ComplexMatrix) -> f64 {
    a.inner.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Sum of singular values.
pub fn trace_norm(a: &ComplexMatrix) -> Result<f64> {
    a.require_square()?;
    Ok(singular_values(a).into_iter().sum())
}

/// `‖a − a†‖` in the requested norm.
pub fn hermitian_residual(a: &ComplexMatrix, norm: Norm) -> Result<f64> {
    a.require_square()?;
    Ok((a - &a.adjoint()).norm(norm))
}

/// `‖a†a − I‖` in the requested norm.
pub fn unitary_residual(a: &ComplexMatrix, norm: Norm) -> Result<f64> {
    let n = a.dim()?;
    Ok((&(&a.adjoint() * a) - &ComplexMatrix::identity(n)).norm(norm))
}

/// Eigenvalues of the Hermitian part `(a + a†)/2`, ascending.
pub fn hermitian_eigenvalues(a: &ComplexMatrix) -> Result<Vec<f64>> {
    let n = a.dim()?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let sym = (a + &a.adjoint()).scale_real(0.5);
    let mut vals: Vec<f64> = sym
        .inner
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

pub fn min_hermitian_eigenvalue(a: &ComplexMatrix) -> Result<f64> {
    Ok(hermitian_eigenvalues(a)?
        .first()
        .copied()
        .unwrap_or(f64::INFINITY))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sigma_x() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()
    }

    fn sigma_z() -> ComplexMatrix {
        ComplexMatrix::real_diag(&[1.0, -1.0])
    }

    fn taylor_exp(a: &ComplexMatrix, terms: usize) -> ComplexMatrix {
        let n = a.rows();
        let mut term = ComplexMatrix::identity(n);
        let mut acc = ComplexMatrix::identity(n);
        for k in 1..terms {
            term = (&term * a).scale_real(1.0 / k as f64);
            acc += &term;
        }
        acc
    }

    #[test]
    fn kron_identities_and_diagonals() {
        assert_eq!(
            kron(&ComplexMatrix::identity(2), &ComplexMatrix::identity(3)),
            ComplexMatrix::identity(6)
        );
        assert_eq!(
            kron(&ComplexMatrix::real_diag(&[1.0, 2.0]), &ComplexMatrix::identity(2)),
            ComplexMatrix::real_diag(&[1.0, 1.0, 2.0, 2.0])
        );
    }

    #[test]
    fn kron_sigma_x_flips_both_qubits() {
        let xx = kron(&sigma_x(), &sigma_x());
        let e00 = ComplexMatrix::from_fn(4, 1, |r, _| if r == 0 { ONE } else { ZERO });
        let out = &xx * &e00;
        for r in 0..4 {
            let expected = if r == 3 { ONE } else { ZERO };
            assert_eq!(out[(r, 0)], expected);
        }
    }

    #[test]
    fn exp_of_zero_and_diagonal() {
        assert_eq!(mat_exp(&ComplexMatrix::zeros(3, 3)).unwrap(), ComplexMatrix::identity(3));
        let thetas = [0.3, -1.7, 12.5];
        let a = ComplexMatrix::diag(&thetas.map(|t| C64::new(0.0, t)));
        let e = mat_exp(&a).unwrap();
        for (k, t) in thetas.iter().enumerate() {
            assert_abs_diff_eq!((e[(k, k)] - C64::from_polar(1.0, *t)).norm(), 0.0, epsilon = 1e-13);
        }
        assert!(frobenius_norm(&(&e - &ComplexMatrix::diag(&[e[(0, 0)], e[(1, 1)], e[(2, 2)]]))) < 1e-14);
    }

    #[test]
    fn exp_of_rotation_generator_matches_series_and_closed_form() {
        for theta in [0.01, 0.7, std::f64::consts::PI / 3.0, 2.5] {
            let a = sigma_x().scale(C64::new(0.0, -theta));
            let closed = &ComplexMatrix::identity(2).scale_real(theta.cos())
                - &sigma_x().scale(C64::new(0.0, theta.sin()));
            let series = taylor_exp(&a, 60);
            let e = mat_exp(&a).unwrap();
            assert!(spectral_norm(&(&e - &series)) < 1e-12);
            assert!(spectral_norm(&(&e - &closed)) < 1e-13);
        }
    }

    #[test]
    fn exp_rejects_rectangular_input() {
        assert_eq!(
            mat_exp(&ComplexMatrix::zeros(2, 3)),
            Err(Error::NotSquare { rows: 2, cols: 3 })
        );
    }

    #[test]
    fn exp_large_norm_uses_squaring() {
        let a = ComplexMatrix::from_real_rows(&[&[0.0, 30.0], &[-30.0, 0.0]]).unwrap();
        let e = mat_exp(&a).unwrap();
        assert_abs_diff_eq!(e[(0, 0)].re, 30f64.cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(e[(0, 1)].re, 30f64.sin(), epsilon = 1e-12);
    }

    #[test]
    fn partial_trace_cases() {
        let a = ComplexMatrix::from_real_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let rho = ComplexMatrix::real_diag(&[0.25, 0.5, 0.25]);
        let pt = partial_trace_bath(&kron(&a, &rho), 2, 3).unwrap();
        assert!(frobenius_norm(&(&pt - &a)) < 1e-15);

        let pt = partial_trace_bath(&ComplexMatrix::identity(6), 2, 3).unwrap();
        assert_eq!(pt, ComplexMatrix::identity(2).scale_real(3.0));

        let x = ComplexMatrix::from_fn(4, 4, |r, c| C64::new((r * 4 + c) as f64, (r as f64) - (c as f64)));
        let pt = partial_trace_bath(&x, 2, 2).unwrap();
        for s1 in 0..2 {
            for s2 in 0..2 {
                let expected = x[(2 * s1, 2 * s2)] + x[(2 * s1 + 1, 2 * s2 + 1)];
                assert_eq!(pt[(s1, s2)], expected);
            }
        }
        assert!(matches!(
            partial_trace_bath(&x, 3, 2),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn trace_norm_cases() {
        assert_eq!(trace_norm(&ComplexMatrix::zeros(3, 3)).unwrap(), 0.0);
        assert_abs_diff_eq!(
            trace_norm(&ComplexMatrix::real_diag(&[1.0, -2.0])).unwrap(),
            3.0,
            epsilon = 1e-14
        );
        // |0> and cos t|0> + e^{i phi} sin t|1>, overlap c = cos t
        for (t, phi) in [(0.3, 0.0), (1.1, 0.7), (0.05, -2.0)] {
            let psi = [ONE, ZERO];
            let chi = [C64::new(f64::cos(t), 0.0), C64::from_polar(f64::sin(t), phi)];
            let proj = |v: &[C64; 2]| ComplexMatrix::from_fn(2, 2, |r, c| v[r] * v[c].conj());
            let diff = &proj(&psi) - &proj(&chi);
            let c: f64 = f64::cos(t);
            assert_abs_diff_eq!(
                trace_norm(&diff).unwrap(),
                2.0 * (1.0 - c * c).sqrt(),
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn residual_cases() {
        assert_eq!(hermitian_residual(&sigma_z(), Norm::Spectral).unwrap(), 0.0);
        assert_eq!(
            unitary_residual(&ComplexMatrix::identity(4), Norm::Spectral).unwrap(),
            0.0
        );
        assert_abs_diff_eq!(
            unitary_residual(&ComplexMatrix::real_diag(&[1.0, 2.0]), Norm::Frobenius).unwrap(),
            3.0,
            epsilon = 1e-15
        );
        assert!(hermitian_residual(&ComplexMatrix::zeros(1, 2), Norm::Frobenius).is_err());
    }

    #[test]
    fn from_row_major_rejects_nan() {
        let err = ComplexMatrix::from_row_major(1, 2, &[ONE, C64::new(f64::NAN, 0.0)]);
        assert_eq!(err, Err(Error::NonFinite { row: 0, col: 1 }));
    }

    #[test]
    fn hermitian_eigenvalues_ascending() {
        let vals = hermitian_eigenvalues(&ComplexMatrix::real_diag(&[3.0, -1.0, 2.0])).unwrap();
        assert_eq!(vals.len(), 3);
        assert_abs_diff_eq!(vals[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(vals[2], 3.0, epsilon = 1e-14);
    }
}
