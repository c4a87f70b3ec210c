//! Rotation algebra on the Bloch sphere.
//!
//! A local unitary `u ∈ SU(2)` acts on Pauli coefficient vectors by the
//! rotation `R ∈ SO(3)` defined through `u† (c·σ) u = (Rc)·σ`. This module
//! holds both sides of that correspondence, the handful of named rotations the
//! scheme constructions need, and a cyclic Jacobi eigensolver for the real
//! symmetric matrices that show up everywhere else.

use nalgebra::{DMatrix, Matrix2, Matrix3, Vector3};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

/// Entrywise tolerance for the orthogonality and determinant of a [`Rotation3`].
pub const ROTATION_TOL: f64 = 1e-12;
/// Unitarity residual above which a [`SpinUnitary`] is rejected.
pub const UNITARY_TOL: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Bloch-sphere axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Axis> {
        Axis::ALL.get(i).copied()
    }

    /// Pauli matrix for this axis.
    pub fn pauli(self) -> Matrix2<Complex64> {
        match self {
            Axis::X => Matrix2::new(ZERO, ONE, ONE, ZERO),
            Axis::Y => Matrix2::new(ZERO, -I, I, ZERO),
            Axis::Z => Matrix2::new(ONE, ZERO, ZERO, -ONE),
        }
    }
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            other => Err(Error::InvalidParameter(format!("unknown axis {other:?}"))),
        }
    }
}

/// A 2×2 special-unitary matrix acting on a single spin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinUnitary(Matrix2<Complex64>);

impl SpinUnitary {
    pub fn new(entries: Matrix2<Complex64>) -> Result<Self> {
        let residual = (entries.adjoint() * entries - Matrix2::identity())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if !(residual <= UNITARY_TOL) {
            return Err(Error::NotUnitary { residual });
        }
        let det = (entries.determinant() - ONE).norm();
        if !(det <= UNITARY_TOL) {
            return Err(Error::NotSpecial { residual: det });
        }
        Ok(SpinUnitary(entries))
    }

    pub fn identity() -> Self {
        SpinUnitary(Matrix2::identity())
    }

    /// `w·1 + i(x σx + y σy + z σz)` for a unit quaternion `(w, x, y, z)`.
    fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Self {
        SpinUnitary(Matrix2::new(
            Complex64::new(w, z),
            Complex64::new(y, x),
            Complex64::new(-y, x),
            Complex64::new(w, -z),
        ))
    }

    pub fn matrix(&self) -> &Matrix2<Complex64> {
        &self.0
    }

    pub fn adjoint(&self) -> Self {
        SpinUnitary(self.0.adjoint())
    }

    /// The other preimage of the same rotation.
    pub fn negated(&self) -> Self {
        SpinUnitary(-self.0)
    }
}

impl std::ops::Mul for SpinUnitary {
    type Output = SpinUnitary;

    fn mul(self, rhs: SpinUnitary) -> SpinUnitary {
        SpinUnitary(self.0 * rhs.0)
    }
}

/// A proper rotation of the Bloch sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation3(Matrix3<f64>);

impl Rotation3 {
    pub fn new(entries: Matrix3<f64>) -> Result<Self> {
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::NotRotation("non-finite entry".into()));
        }
        let residual = (entries.transpose() * entries - Matrix3::identity()).amax();
        if residual > ROTATION_TOL {
            return Err(Error::NotRotation(format!(
                "orthogonality residual {residual:.3e}"
            )));
        }
        let det = entries.determinant();
        if (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::NotRotation(format!("determinant {det:.6}")));
        }
        Ok(Rotation3(entries))
    }

    /// Wraps a matrix known to be a rotation by construction.
    pub(crate) fn from_matrix_unchecked(entries: Matrix3<f64>) -> Self {
        debug_assert!(Rotation3::new(entries).is_ok());
        Rotation3(entries)
    }

    pub fn identity() -> Self {
        Rotation3(Matrix3::identity())
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation3(self.0.transpose())
    }

    /// `R · m · Rᵀ`.
    pub fn conjugate(&self, m: &Matrix3<f64>) -> Matrix3<f64> {
        self.0 * m * self.0.transpose()
    }

    pub fn pow(&self, k: u32) -> Self {
        (0..k).fold(Rotation3::identity(), |acc, _| acc * *self)
    }

    /// Rotation by π about `axis`. Equals the action of conjugation by `iσ_axis`.
    pub fn pi_about(axis: Axis) -> Self {
        let mut d = Vector3::from_element(-1.0);
        d[axis.index()] = 1.0;
        Rotation3(Matrix3::from_diagonal(&d))
    }

    /// Quarter turn in the `(from, to)` plane with `e_from → e_to` and
    /// `e_to → −e_from`; the remaining axis is fixed.
    pub fn quarter_turn(from: Axis, to: Axis) -> Result<Self> {
        if from == to {
            return Err(Error::InvalidParameter(format!(
                "quarter turn needs two distinct axes, got {from} twice"
            )));
        }
        let (f, t) = (from.index(), to.index());
        let other = 3 - f - t;
        let mut m = Matrix3::zeros();
        m[(t, f)] = 1.0;
        m[(f, t)] = -1.0;
        m[(other, other)] = 1.0;
        Ok(Rotation3(m))
    }

    /// Rodrigues rotation by `angle` about the (normalized) `axis`.
    pub fn about(axis: Vector3<f64>, angle: f64) -> Result<Self> {
        let norm = axis.norm();
        if !(norm > 0.0) || !angle.is_finite() {
            return Err(Error::InvalidParameter("degenerate rotation axis".into()));
        }
        let n = axis / norm;
        let k = n.cross_matrix();
        let m = Matrix3::identity() + k * angle.sin() + k * k * (1.0 - angle.cos());
        Ok(Rotation3(m))
    }

    /// Largest entrywise distance to `other`.
    pub fn distance(&self, other: &Rotation3) -> f64 {
        (self.0 - other.0).amax()
    }
}

impl std::ops::Mul for Rotation3 {
    type Output = Rotation3;

    fn mul(self, rhs: Rotation3) -> Rotation3 {
        Rotation3(self.0 * rhs.0)
    }
}

/// The Bloch rotation induced by conjugation with `u`.
///
/// Because the action is `u† · u`, products compose in reverse:
/// `su2_to_so3(u·v) = su2_to_so3(v)·su2_to_so3(u)`.
///
/// Column `α` holds the Pauli coefficients of `u† σ_α u`, read off with the
/// trace inner product `½ tr(σ_β · ·)`.
pub fn su2_to_so3(u: &SpinUnitary) -> Rotation3 {
    let m = u.matrix();
    let mut r = Matrix3::zeros();
    for alpha in Axis::ALL {
        let conj = m.adjoint() * alpha.pauli() * m;
        for beta in Axis::ALL {
            let c = (beta.pauli() * conj).trace() * 0.5;
            r[(beta.index(), alpha.index())] = c.re;
        }
    }
    Rotation3(r)
}

/// One of the two SU(2) preimages of `r`.
///
/// The rotation angle is taken in `[0, π]`; at exactly `π` the axis sign is
/// fixed by making the first nonzero of its (z, y, x) components positive.
pub fn so3_to_su2(r: &Rotation3) -> SpinUnitary {
    let m = r.matrix();
    let tr = m.trace();
    let (d0, d1, d2) = (m[(0, 0)], m[(1, 1)], m[(2, 2)]);
    // Shepperd's method: divide by the largest of the four squared components.
    let (mut w, mut x, mut y, mut z);
    if tr >= d0 && tr >= d1 && tr >= d2 {
        let s = 2.0 * (1.0 + tr).max(0.0).sqrt();
        w = 0.25 * s;
        x = (m[(2, 1)] - m[(1, 2)]) / s;
        y = (m[(0, 2)] - m[(2, 0)]) / s;
        z = (m[(1, 0)] - m[(0, 1)]) / s;
    } else if d0 >= d1 && d0 >= d2 {
        let s = 2.0 * (1.0 + d0 - d1 - d2).max(0.0).sqrt();
        w = (m[(2, 1)] - m[(1, 2)]) / s;
        x = 0.25 * s;
        y = (m[(0, 1)] + m[(1, 0)]) / s;
        z = (m[(0, 2)] + m[(2, 0)]) / s;
    } else if d1 >= d2 {
        let s = 2.0 * (1.0 + d1 - d0 - d2).max(0.0).sqrt();
        w = (m[(0, 2)] - m[(2, 0)]) / s;
        x = (m[(0, 1)] + m[(1, 0)]) / s;
        y = 0.25 * s;
        z = (m[(1, 2)] + m[(2, 1)]) / s;
    } else {
        let s = 2.0 * (1.0 + d2 - d0 - d1).max(0.0).sqrt();
        w = (m[(1, 0)] - m[(0, 1)]) / s;
        x = (m[(0, 2)] + m[(2, 0)]) / s;
        y = (m[(1, 2)] + m[(2, 1)]) / s;
        z = 0.25 * s;
    }
    const EDGE: f64 = 1e-14;
    let flip = if w < -EDGE {
        true
    } else if w.abs() <= EDGE {
        w = 0.0;
        [z, y, x]
            .into_iter()
            .find(|c| c.abs() > EDGE)
            .is_some_and(|c| c < 0.0)
    } else {
        false
    };
    if flip {
        (w, x, y, z) = (-w, -x, -y, -z);
    }
    let norm = (w * w + x * x + y * y + z * z).sqrt();
    SpinUnitary::from_quaternion(w / norm, x / norm, y / norm, z / norm)
}

/// Cyclic axis permutation `x → y → z → x`.
pub fn axis_cycle() -> Rotation3 {
    Rotation3(Matrix3::new(0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0))
}

/// Haar-random SU(2) element.
pub fn random_spin_unitary<R: Rng + ?Sized>(rng: &mut R) -> SpinUnitary {
    let q = random_unit_quaternion(rng);
    SpinUnitary::from_quaternion(q[0], q[1], q[2], q[3])
}

/// Haar-random SO(3) element.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Rotation3 {
    su2_to_so3(&random_spin_unitary(rng))
}

fn random_unit_quaternion<R: Rng + ?Sized>(rng: &mut R) -> [f64; 4] {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n2: f64 = q.iter().map(|c| c * c).sum();
        if n2 > 1e-6 && n2 <= 1.0 {
            let n = n2.sqrt();
            return q.map(|c| c / n);
        }
    }
}

/// Spectrum of a real symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymSpectrum {
    /// Sorted in descending order.
    pub eigenvalues: Vec<f64>,
    /// Orthogonal, `det = +1`; column `i` belongs to `eigenvalues[i]`.
    pub eigenvectors: DMatrix<f64>,
}

impl SymSpectrum {
    pub fn max(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// `Q · diag(λ) · Qᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let q = &self.eigenvectors;
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.eigenvalues));
        q * d * q.transpose()
    }
}

const SYMMETRY_TOL: f64 = 1e-12;
const JACOBI_OFF_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Full eigendecomposition of a real symmetric matrix by cyclic Jacobi sweeps.
///
/// Pivots visit the upper triangle in row-major order, so the result is
/// bit-reproducible for a given input.
pub fn sym_eig(m: &DMatrix<f64>) -> Result<SymSpectrum> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: m.ncols(),
        });
    }
    let scale = m.norm();
    if !scale.is_finite() {
        return Err(Error::InvalidParameter("non-finite matrix entry".into()));
    }
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric { residual: asym });
    }

    let mut a = (m + m.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    let target = JACOBI_OFF_TOL * scale;

    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&a) <= target {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let eigenvalues = order.iter().map(|&i| a[(i, i)]).collect();
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        eigenvectors.set_column(col, &v.column(i));
    }
    if n > 0 && eigenvectors.determinant() < 0.0 {
        let mut last = eigenvectors.column_mut(n - 1);
        last.neg_mut();
    }
    Ok(SymSpectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// [`sym_eig`] for a 3×3 matrix, with the eigenvector frame as a rotation.
pub fn sym_eig3(m: &Matrix3<f64>) -> Result<(Vector3<f64>, Rotation3)> {
    let dm = DMatrix::from_column_slice(3, 3, m.as_slice());
    let spec = sym_eig(&dm)?;
    let q = Matrix3::from_column_slice(spec.eigenvectors.as_slice());
    Ok((
        Vector3::from_column_slice(&spec.eigenvalues),
        Rotation3::from_matrix_unchecked(q),
    ))
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}
