// SPDX-License-Identifier: Apache-2.0

//! Finite-dimensional operator algebra.
//!
//! [`Operator`] wraps a dense square complex matrix. Two-level systems use the
//! basis `(|e>, |g>)`, so `sigma_z |e> = |e>` and `sigma_- = |g><e|`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tolerances;
use crate::C64;

const ZERO: C64 = Complex64::new(0.0, 0.0);
const ONE: C64 = Complex64::new(1.0, 0.0);
const I: C64 = Complex64::new(0.0, 1.0);

/// Dense operator on a finite Hilbert space.
#[derive(Clone, PartialEq)]
pub struct Operator {
    mat: DMatrix<C64>,
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Operator({}x{}) {}", self.dim(), self.dim(), self.mat)
    }
}

impl Operator {
    /// Wraps a matrix, rejecting non-square, empty or non-finite input.
    pub fn from_matrix(mat: DMatrix<C64>) -> Result<Self> {
        if mat.nrows() == 0 || mat.nrows() != mat.ncols() {
            return Err(Error::InvalidOperator);
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidOperator);
        }
        Ok(Self { mat })
    }

    /// Builds an operator from row-major rows.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidOperator);
        }
        Self::from_matrix(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub(crate) fn from_matrix_unchecked(mat: DMatrix<C64>) -> Self {
        debug_assert!(mat.is_square());
        Self { mat }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_matrix_unchecked(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_matrix_unchecked(DMatrix::identity(dim, dim))
    }

    /// Diagonal operator from real entries.
    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_matrix_unchecked(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(diag[i], 0.0)
            } else {
                ZERO
            }
        }))
    }

    /// `|a><b|`.
    pub fn outer(a: &DVector<C64>, b: &DVector<C64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.len(),
                found: b.len(),
            });
        }
        Self::from_matrix(a * b.adjoint())
    }

    /// Normalised projector `|psi><psi| / <psi|psi>`.
    pub fn pure_state(psi: &DVector<C64>) -> Result<Self> {
        let norm = psi.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NotDensity("zero or non-finite state vector".into()));
        }
        let unit = psi / C64::new(norm, 0.0);
        Self::outer(&unit, &unit)
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.mat
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.mat[(row, col)]
    }

    pub fn dagger(&self) -> Self {
        Self::from_matrix_unchecked(self.mat.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    pub fn scale(&self, c: C64) -> Self {
        Self::from_matrix_unchecked(&self.mat * c)
    }

    /// `[self, other]`.
    pub fn commutator(&self, other: &Operator) -> Self {
        Self::from_matrix_unchecked(&self.mat * &other.mat - &other.mat * &self.mat)
    }

    /// `{self, other}`.
    pub fn anticommutator(&self, other: &Operator) -> Self {
        Self::from_matrix_unchecked(&self.mat * &other.mat + &other.mat * &self.mat)
    }

    /// Tensor product `self ⊗ other`; `self` indexes the slow (outer) factor.
    pub fn kron(&self, other: &Operator) -> Self {
        Self::from_matrix_unchecked(self.mat.kronecker(&other.mat))
    }

    /// `Tr[rho self]`.
    pub fn expectation(&self, rho: &Operator) -> C64 {
        debug_assert_eq!(self.dim(), rho.dim());
        // Tr[AB] = sum_ij A_ij B_ji without forming the product.
        let n = self.dim();
        let mut acc = ZERO;
        for i in 0..n {
            for j in 0..n {
                acc += rho.mat[(i, j)] * self.mat[(j, i)];
            }
        }
        acc
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        self.mat
            .iter()
            .zip(other.mat.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.mat.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..=i).all(|j| (self.mat[(i, j)] - self.mat[(j, i)].conj()).norm() <= tol))
    }

    /// Hermitian, unit trace and positive semidefinite, all up to `tol`.
    pub fn is_density(&self, tol: f64) -> bool {
        self.check_density(tol).is_ok()
    }

    pub(crate) fn check_density(&self, tol: f64) -> Result<()> {
        if !self.is_hermitian(tol) {
            return Err(Error::NotDensity("not Hermitian".into()));
        }
        let tr = self.trace();
        if (tr - ONE).norm() > tol {
            return Err(Error::NotDensity(format!("trace {tr} != 1")));
        }
        let min = self.min_eigenvalue();
        if min < -tol {
            return Err(Error::NotDensity(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let herm = (&self.mat + self.mat.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = herm.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.hermitian_eigenvalues()[0]
    }

    /// Column-stacked vectorisation (`vec(C)[i + j*dim] = C[i, j]`).
    pub fn vectorize(&self) -> DVector<C64> {
        DVector::from_column_slice(self.mat.as_slice())
    }

    pub fn from_vectorized(v: &DVector<C64>, dim: usize) -> Self {
        debug_assert_eq!(v.len(), dim * dim);
        Self::from_matrix_unchecked(DMatrix::from_column_slice(dim, dim, v.as_slice()))
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator::from_matrix_unchecked(&self.mat + &rhs.mat)
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator::from_matrix_unchecked(&self.mat - &rhs.mat)
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator::from_matrix_unchecked(&self.mat * &rhs.mat)
    }
}

impl Mul<C64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: C64) -> Operator {
        self.scale(rhs)
    }
}

impl Mul<f64> for &Operator {
    type Output = Operator;
    fn mul(self, rhs: f64) -> Operator {
        self.scale(C64::new(rhs, 0.0))
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        self.scale(-ONE)
    }
}

/// Basis ket `|index>` in dimension `dim`.
pub fn ket(dim: usize, index: usize) -> DVector<C64> {
    let mut v = DVector::zeros(dim);
    v[index] = ONE;
    v
}

// ---------------------------------------------------------------------------
// Two-level systems
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Pauli matrix in the `(|e>, |g>)` basis.
pub fn pauli(axis: Axis) -> Operator {
    let m = match axis {
        Axis::X => [[ZERO, ONE], [ONE, ZERO]],
        Axis::Y => [[ZERO, -I], [I, ZERO]],
        Axis::Z => [[ONE, ZERO], [ZERO, -ONE]],
    };
    Operator::from_matrix_unchecked(DMatrix::from_fn(2, 2, |i, j| m[i][j]))
}

/// `sigma_+ = |e><g|`.
pub fn sigma_plus() -> Operator {
    Operator::from_matrix_unchecked(DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]))
}

/// `sigma_- = |g><e|`.
pub fn sigma_minus() -> Operator {
    Operator::from_matrix_unchecked(DMatrix::from_row_slice(2, 2, &[ZERO, ZERO, ONE, ZERO]))
}

/// `v . sigma` for a possibly complex 3-vector.
pub fn pauli_dot(v: [C64; 3]) -> Operator {
    let (x, y, z) = (pauli(Axis::X), pauli(Axis::Y), pauli(Axis::Z));
    &(&(&x * v[0]) + &(&y * v[1])) + &(&z * v[2])
}

/// Real 3-vector on (or inside) the Bloch sphere.
#[derive(Clone, Copy, Debug, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, o: &BlochVector) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(&self, o: &BlochVector) -> BlochVector {
        BlochVector::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn to_complex(self) -> [C64; 3] {
        [self.x, self.y, self.z].map(|c| C64::new(c, 0.0))
    }

    /// `(1 + v.sigma) / 2`.
    pub fn to_density(self) -> Result<Operator> {
        bloch_to_density(self)
    }

    pub fn from_density(rho: &Operator) -> Result<Self> {
        density_to_bloch(rho)
    }
}

/// Density matrix `(1 + v.sigma)/2`; fails when `|v| > 1 + 1e-12`.
pub fn bloch_to_density(v: BlochVector) -> Result<Operator> {
    let norm = v.norm();
    if !norm.is_finite() || norm > 1.0 + tolerances::STRUCTURAL {
        return Err(Error::NormTooLarge { norm });
    }
    let half = C64::new(0.5, 0.0);
    let m = DMatrix::from_row_slice(
        2,
        2,
        &[
            half * (1.0 + v.z),
            half * C64::new(v.x, -v.y),
            half * C64::new(v.x, v.y),
            half * (1.0 - v.z),
        ],
    );
    Ok(Operator::from_matrix_unchecked(m))
}

/// Inverse of [`bloch_to_density`].
pub fn density_to_bloch(rho: &Operator) -> Result<BlochVector> {
    if rho.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: rho.dim(),
        });
    }
    rho.check_density(tolerances::DENSITY)?;
    let c = rho.get(0, 1);
    Ok(BlochVector::new(
        2.0 * c.re,
        -2.0 * c.im,
        (rho.get(0, 0) - rho.get(1, 1)).re,
    ))
}

// ---------------------------------------------------------------------------
// Truncated Fock space
// ---------------------------------------------------------------------------

/// Single bosonic mode truncated at `n_max` quanta (dimension `n_max + 1`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FockSpace {
    pub n_max: usize,
    pub omega_f: f64,
    pub hbar: f64,
}

impl FockSpace {
    pub const DEFAULT_N_MAX: usize = 20;

    pub fn new(n_max: usize, omega_f: f64) -> Result<Self> {
        Self::with_hbar(n_max, omega_f, 1.0)
    }

    pub fn with_hbar(n_max: usize, omega_f: f64, hbar: f64) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::InvalidParameter("n_max must be positive".into()));
        }
        if !(omega_f > 0.0 && omega_f.is_finite()) || !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidParameter(
                "omega_f and hbar must be positive and finite".into(),
            ));
        }
        Ok(Self {
            n_max,
            omega_f,
            hbar,
        })
    }

    pub fn dim(&self) -> usize {
        self.n_max + 1
    }

    /// Annihilation and creation operators, `a|n> = sqrt(n)|n-1>`.
    pub fn ladder(&self) -> (Operator, Operator) {
        let n = self.dim();
        let a = DMatrix::from_fn(n, n, |i, j| {
            if j == i + 1 {
                C64::new((j as f64).sqrt(), 0.0)
            } else {
                ZERO
            }
        });
        let a = Operator::from_matrix_unchecked(a);
        let ad = a.dagger();
        (a, ad)
    }

    pub fn number_operator(&self) -> Operator {
        Operator::diagonal(&(0..self.dim()).map(|k| k as f64).collect::<Vec<_>>())
    }

    /// `sqrt(hbar / 2 omega_f)`, the position-quadrature scale.
    pub fn q_scale(&self) -> f64 {
        (self.hbar / (2.0 * self.omega_f)).sqrt()
    }

    /// `sqrt(hbar omega_f / 2)`, the momentum-quadrature scale.
    pub fn p_scale(&self) -> f64 {
        (self.hbar * self.omega_f / 2.0).sqrt()
    }

    /// `Q = sqrt(hbar/2w)(a^+ + a)`, `P = i sqrt(hbar w/2)(a^+ - a)`.
    pub fn quadratures(&self) -> (Operator, Operator) {
        let (a, ad) = self.ladder();
        let q = &(&ad + &a) * self.q_scale();
        let p = &(&ad - &a) * C64::new(0.0, self.p_scale());
        (q, p)
    }

    /// Pointer of the Rabi coupling, `N = a^+ + a = sqrt(2w/hbar) Q`.
    pub fn pointer(&self) -> Operator {
        let (a, ad) = self.ladder();
        &ad + &a
    }

    /// `e^{iwt} a^+ + e^{-iwt} a` scaled by `scale`, optionally with the
    /// momentum-like phase `i(e^{iwt} a^+ - e^{-iwt} a)`.
    pub(crate) fn rotated(&self, time: f64, scale: f64, momentum_like: bool) -> Operator {
        let (a, ad) = self.ladder();
        let ph = C64::from_polar(1.0, self.omega_f * time);
        if momentum_like {
            &(&(&ad * ph) - &(&a * ph.conj())) * C64::new(0.0, scale)
        } else {
            &(&(&ad * ph) + &(&a * ph.conj())) * scale
        }
    }

    /// `N_I(time)` in the interaction picture of the free field.
    pub fn pointer_interaction(&self, time: f64) -> Operator {
        self.rotated(time, 1.0, false)
    }

    pub fn q_interaction(&self, time: f64) -> Operator {
        self.rotated(time, self.q_scale(), false)
    }

    pub fn p_interaction(&self, time: f64) -> Operator {
        self.rotated(time, self.p_scale(), true)
    }

    /// Projector on `|n>`.
    pub fn number_state(&self, n: usize) -> Result<Operator> {
        if n > self.n_max {
            return Err(Error::InvalidParameter(format!(
                "number state {n} beyond truncation {}",
                self.n_max
            )));
        }
        let mut diag = vec![0.0; self.dim()];
        diag[n] = 1.0;
        Ok(Operator::diagonal(&diag))
    }

    /// Thermal state with mean occupation `n_eq`, truncated and renormalised.
    pub fn thermal_state(&self, n_eq: f64) -> Result<Operator> {
        if !(n_eq >= 0.0) || !n_eq.is_finite() {
            return Err(Error::InvalidParameter(format!("thermal occupation {n_eq}")));
        }
        if n_eq == 0.0 {
            return self.number_state(0);
        }
        let ratio = n_eq / (1.0 + n_eq);
        let mut diag: Vec<f64> = (0..self.dim()).map(|k| ratio.powi(k as i32)).collect();
        let z: f64 = diag.iter().sum();
        diag.iter_mut().for_each(|p| *p /= z);
        Ok(Operator::diagonal(&diag))
    }
}

// ---------------------------------------------------------------------------
// Six-level J_g = 1/2 <-> J_e = 3/2 system
// ---------------------------------------------------------------------------

/// Level of the six-level system, labelled by twice its magnetic number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SodiumLevel {
    Excited(i8),
    Ground(i8),
}

impl SodiumLevel {
    pub const DIM: usize = 6;

    /// Basis index. Magnetic numbers increase within each block; the four
    /// excited levels come first, then the two ground levels.
    pub fn index(self) -> usize {
        match self {
            SodiumLevel::Excited(m2) => {
                assert!(matches!(m2, -3 | -1 | 1 | 3), "excited 2m must be odd in [-3, 3]");
                ((m2 + 3) / 2) as usize
            }
            SodiumLevel::Ground(m2) => {
                assert!(matches!(m2, -1 | 1), "ground 2m must be +-1");
                4 + ((m2 + 1) / 2) as usize
            }
        }
    }

    pub fn ket(self) -> DVector<C64> {
        ket(Self::DIM, self.index())
    }

    pub fn is_ground(self) -> bool {
        matches!(self, SodiumLevel::Ground(_))
    }

    pub fn all() -> [SodiumLevel; 6] {
        use SodiumLevel::*;
        [
            Excited(-3),
            Excited(-1),
            Excited(1),
            Excited(3),
            Ground(-1),
            Ground(1),
        ]
    }

    pub fn ground_indices() -> [usize; 2] {
        [SodiumLevel::Ground(-1).index(), SodiumLevel::Ground(1).index()]
    }
}

/// `J_y` of the six-level system (`hbar = 1`).
pub fn jy_six_level() -> Operator {
    let s3 = 3f64.sqrt() / 2.0;
    let mut m = DMatrix::zeros(6, 6);
    let mut put = |i: usize, j: usize, v: f64| {
        m[(i, j)] = C64::new(0.0, v);
        m[(j, i)] = C64::new(0.0, -v);
    };
    put(0, 1, s3);
    put(1, 2, 1.0);
    put(2, 3, s3);
    put(4, 5, 0.5);
    Operator::from_matrix_unchecked(m)
}

/// Polarisation label of a spontaneous-emission jump.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Polarization {
    Pi,
    Minus,
    Plus,
}

impl Polarization {
    pub fn label(self) -> &'static str {
        match self {
            Polarization::Pi => "0",
            Polarization::Minus => "-",
            Polarization::Plus => "+",
        }
    }
}

/// Jump operators `L_q |J_e, m_g + q> = C |J_g, m_g>` with the Clebsch-Gordan
/// amplitudes of the `1/2 <-> 3/2` transition.
pub fn sodium_jump_operators() -> Vec<(Operator, Polarization)> {
    use SodiumLevel::{Excited as E, Ground as G};
    let build = |terms: &[(f64, SodiumLevel, SodiumLevel)]| {
        let mut m = DMatrix::zeros(6, 6);
        for &(amp, g, e) in terms {
            m[(g.index(), e.index())] += C64::new(amp, 0.0);
        }
        Operator::from_matrix_unchecked(m)
    };
    let r23 = (2.0f64 / 3.0).sqrt();
    let r13 = 1.0 / 3f64.sqrt();
    vec![
        (
            build(&[(r23, G(-1), E(-1)), (r23, G(1), E(1))]),
            Polarization::Pi,
        ),
        (
            build(&[(1.0, G(-1), E(-3)), (r13, G(1), E(-1))]),
            Polarization::Minus,
        ),
        (
            build(&[(r13, G(-1), E(1)), (1.0, G(1), E(3))]),
            Polarization::Plus,
        ),
    ]
}
