//! Exact dense dynamics on the `2ⁿ`-dimensional space, used as an oracle for
//! the coupling-space calculus.
//!
//! Spin 0 is the leftmost tensor factor, i.e. the most significant bit of a
//! basis index.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::coupling::CouplingMatrix;
use crate::error::{Error, Result};
use crate::rotalg::{so3_to_su2, Rotation3};
use crate::schemes::{verify, Scheme, SchemeKind};

pub const MAX_SPINS: usize = 10;
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance at which a scheme must verify before it is simulated.
pub const CYCLE_VERIFY_TOL: f64 = 1e-9;
/// Errors below this everywhere mean the cycle is exact.
pub const EXACT_TOL: f64 = 1e-13;
/// Samples outside `[FIT_MIN, FIT_MAX]` are excluded from the slope fit.
pub const FIT_MIN: f64 = 1e-12;
pub const FIT_MAX: f64 = 0.1;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq)]
pub struct ManyBodyOperator {
    n: usize,
    matrix: DMatrix<Complex64>,
}

impl ManyBodyOperator {
    pub fn new(n: usize, matrix: DMatrix<Complex64>) -> Result<Self> {
        check_spins(n)?;
        let dim = 1usize << n;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: matrix.nrows().max(matrix.ncols()),
            });
        }
        Ok(ManyBodyOperator { n, matrix })
    }

    pub fn identity(n: usize) -> Result<Self> {
        check_spins(n)?;
        let dim = 1usize << n;
        Ok(ManyBodyOperator {
            n,
            matrix: DMatrix::identity(dim, dim),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn adjoint(&self) -> ManyBodyOperator {
        ManyBodyOperator {
            n: self.n,
            matrix: self.matrix.adjoint(),
        }
    }

    /// `‖M − M†‖_op / ‖M‖_op`, zero for the zero operator.
    pub fn hermiticity_residual(&self) -> f64 {
        let scale = op_norm(&self.matrix);
        if scale == 0.0 {
            return 0.0;
        }
        op_norm(&(&self.matrix - self.matrix.adjoint())) / scale
    }

    /// `‖M†M − 1‖_op`.
    pub fn unitarity_residual(&self) -> f64 {
        let dim = self.dim();
        op_norm(&(self.matrix.adjoint() * &self.matrix - DMatrix::identity(dim, dim)))
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    pub fn op_norm(&self) -> f64 {
        op_norm(&self.matrix)
    }

    /// `self† · m · self`.
    pub fn sandwich(&self, m: &ManyBodyOperator) -> ManyBodyOperator {
        ManyBodyOperator {
            n: self.n,
            matrix: self.matrix.adjoint() * &m.matrix * &self.matrix,
        }
    }
}

impl std::ops::Mul for &ManyBodyOperator {
    type Output = ManyBodyOperator;

    fn mul(self, rhs: &ManyBodyOperator) -> ManyBodyOperator {
        ManyBodyOperator {
            n: self.n,
            matrix: &self.matrix * &rhs.matrix,
        }
    }
}

fn check_spins(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one spin".into()));
    }
    if n > MAX_SPINS {
        return Err(Error::TooManySpins { n, max: MAX_SPINS });
    }
    Ok(())
}

/// Largest singular value, from the top eigenvalue of `M†M`.
pub fn op_norm(m: &DMatrix<Complex64>) -> f64 {
    if m.iter().all(|z| *z == ZERO) {
        return 0.0;
    }
    // scale first so tiny differences do not underflow when squared
    let s = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let scaled = m.unscale(s);
    let gram = scaled.adjoint() * &scaled;
    let top = gram.symmetric_eigenvalues().max().max(0.0);
    s * top.sqrt()
}

/// Applies `σ_α` to one bit of a basis state: returns the amplitude factor
/// and the new state.
fn pauli_on(alpha: usize, bit: usize, state: usize) -> (Complex64, usize) {
    let b = (state >> bit) & 1;
    let sign = if b == 0 { 1.0 } else { -1.0 };
    match alpha {
        0 => (ONE, state ^ (1 << bit)),
        1 => (I * sign, state ^ (1 << bit)),
        _ => (Complex64::new(sign, 0.0), state),
    }
}

/// `H_J = Σ_{k<l} Σ_{αβ} J_{kl;αβ} σ_α⁽ᵏ⁾ σ_β⁽ˡ⁾`.
pub fn build_hamiltonian(j: &CouplingMatrix) -> Result<ManyBodyOperator> {
    let n = j.n();
    check_spins(n)?;
    let dim = 1usize << n;
    let mut h = DMatrix::from_element(dim, dim, ZERO);
    for k in 0..n {
        for l in k + 1..n {
            let block = j.block(k, l);
            let (bk, bl) = (n - 1 - k, n - 1 - l);
            for alpha in 0..3 {
                for beta in 0..3 {
                    let c = block[(alpha, beta)];
                    if c == 0.0 {
                        continue;
                    }
                    for state in 0..dim {
                        let (a1, s1) = pauli_on(beta, bl, state);
                        let (a2, s2) = pauli_on(alpha, bk, s1);
                        h[(s2, state)] += a1 * a2 * c;
                    }
                }
            }
        }
    }
    Ok(ManyBodyOperator { n, matrix: h })
}

/// `⊗ₖ uₖ` with `uₖ = so3_to_su2(Rₖ)`; `negate[k]` picks the other preimage.
pub fn lift_assembly_signed(rotations: &[Rotation3], negate: &[bool]) -> Result<ManyBodyOperator> {
    let n = rotations.len();
    check_spins(n)?;
    if negate.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: negate.len(),
        });
    }
    let mut v = DMatrix::from_element(1, 1, ONE);
    for (r, &neg) in rotations.iter().zip(negate) {
        let mut u = so3_to_su2(r);
        if neg {
            u = u.negated();
        }
        let m = u.matrix();
        let u = DMatrix::from_fn(2, 2, |i, j| m[(i, j)]);
        v = v.kronecker(&u);
    }
    Ok(ManyBodyOperator { n, matrix: v })
}

pub fn lift_assembly(rotations: &[Rotation3]) -> Result<ManyBodyOperator> {
    lift_assembly_signed(rotations, &vec![false; rotations.len()])
}

/// `‖v†·H_J·v − H_{VJVᵀ}‖_op / ‖H_J‖_op`, zero when `H_J = 0`.
pub fn conjugation_consistency(j: &CouplingMatrix, rotations: &[Rotation3]) -> Result<f64> {
    let n = j.n();
    if rotations.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rotations.len(),
        });
    }
    let h = build_hamiltonian(j)?;
    let v = lift_assembly(rotations)?;
    let lhs = v.sandwich(&h);

    let mut vm = DMatrix::zeros(3 * n, 3 * n);
    for (k, r) in rotations.iter().enumerate() {
        vm.fixed_view_mut::<3, 3>(3 * k, 3 * k).copy_from(r.matrix());
    }
    let conj = CouplingMatrix::from_matrix_unchecked(n, &vm * j.matrix() * vm.transpose());
    let rhs = build_hamiltonian(&conj)?;

    let scale = h.op_norm();
    if scale == 0.0 {
        return Ok(op_norm(&(lhs.matrix - rhs.matrix)));
    }
    Ok(op_norm(&(lhs.matrix - rhs.matrix)) / scale)
}

/// Reusable `exp(−iHt)` from one Hermitian eigendecomposition.
pub struct Propagator {
    n: usize,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<Complex64>,
}

impl Propagator {
    pub fn new(h: &ManyBodyOperator) -> Result<Self> {
        let residual = h.hermiticity_residual();
        if residual > HERMITIAN_TOL {
            return Err(Error::NotHermitian { residual });
        }
        let herm = (&h.matrix + h.matrix.adjoint()).scale(0.5);
        let eig = SymmetricEigen::new(herm);
        Ok(Propagator {
            n: h.n,
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        })
    }

    /// `exp(−iHt)`, and `exp(+iH|t|)` for negative `t`.
    pub fn at(&self, t: f64) -> ManyBodyOperator {
        let q = &self.eigenvectors;
        let phases = self.eigenvalues.map(|lam| Complex64::from_polar(1.0, -lam * t));
        let mut scaled = q.clone();
        for (c, ph) in phases.iter().enumerate() {
            scaled.column_mut(c).iter_mut().for_each(|z| *z *= ph);
        }
        ManyBodyOperator {
            n: self.n,
            matrix: scaled * q.adjoint(),
        }
    }
}

pub fn evolve(h: &ManyBodyOperator, t: f64) -> Result<ManyBodyOperator> {
    Ok(Propagator::new(h)?.at(t))
}

fn check_cycle_inputs(j: &CouplingMatrix, s: &Scheme, epsilon: f64) -> Result<()> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    if s.n() != j.n() {
        return Err(Error::DimensionMismatch {
            expected: j.n(),
            found: s.n(),
        });
    }
    if s.kind() != SchemeKind::Inversion {
        return Err(Error::InvalidScheme("cycle simulation needs an inversion scheme".into()));
    }
    // nothing to average for the zero coupling
    if !j.is_zero() {
        let v = verify(s, j, CYCLE_VERIFY_TOL)?;
        if !v.ok {
            return Err(Error::NotVerified {
                residual: v.residual,
                tol: CYCLE_VERIFY_TOL,
            });
        }
    }
    Ok(())
}

fn cycle(
    prop: &Propagator,
    lifts: &[ManyBodyOperator],
    s: &Scheme,
    epsilon: f64,
) -> ManyBodyOperator {
    let n = s.n();
    let mut c = ManyBodyOperator::identity(n).expect("spin count checked");
    for (step, v) in s.steps().iter().zip(lifts) {
        let u = v.sandwich(&prop.at(step.t * epsilon));
        c = &u * &c;
    }
    c
}

fn lifts_for(s: &Scheme, flip: bool) -> Result<Vec<ManyBodyOperator>> {
    s.steps()
        .iter()
        .enumerate()
        .map(|(i, step)| {
            let neg: Vec<bool> = (0..step.rotations.len()).map(|k| flip && (i + k) % 2 == 0).collect();
            lift_assembly_signed(&step.rotations, &neg)
        })
        .collect()
}

/// `C(ε) = Π_{j=N..1} v_j† exp(−i H_J t_j ε) v_j`, step 1 acting first.
pub fn run_cycle(j: &CouplingMatrix, s: &Scheme, epsilon: f64) -> Result<ManyBodyOperator> {
    check_cycle_inputs(j, s, epsilon)?;
    let prop = Propagator::new(&build_hamiltonian(j)?)?;
    Ok(cycle(&prop, &lifts_for(s, false)?, s, epsilon))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleErrorSample {
    pub epsilon: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorScaling {
    pub samples: Vec<CycleErrorSample>,
    /// Least-squares slope of `log error` against `log ε`; `None` when exact.
    pub slope: Option<f64>,
    pub exact: bool,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    epsilons: Vec<f64>,
    errors: Vec<f64>,
    slope: &'a Option<f64>,
    exact: bool,
}

impl ErrorScaling {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(ErrorReport {
            epsilons: self.samples.iter().map(|s| s.epsilon).collect(),
            errors: self.samples.iter().map(|s| s.error).collect(),
            slope: &self.slope,
            exact: self.exact,
        })
        .expect("plain numbers serialize")
    }
}

/// Per-cycle error `‖C(ε) − exp(+iH_J ε)‖_op` and its log-log slope.
pub fn error_scaling(j: &CouplingMatrix, s: &Scheme, epsilons: &[f64]) -> Result<ErrorScaling> {
    if epsilons.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "need at least 3 epsilon values, got {}",
            epsilons.len()
        )));
    }
    if let Some(e) = epsilons.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {e}")));
    }
    let mut sorted = epsilons.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidParameter("epsilon values must be distinct".into()));
    }
    check_cycle_inputs(j, s, epsilons[0])?;

    let prop = Propagator::new(&build_hamiltonian(j)?)?;
    let lifts = lifts_for(s, false)?;
    let samples: Vec<CycleErrorSample> = epsilons
        .iter()
        .map(|&eps| {
            let c = cycle(&prop, &lifts, s, eps);
            let target = prop.at(-eps);
            CycleErrorSample {
                epsilon: eps,
                error: op_norm(&(c.matrix - target.matrix)),
            }
        })
        .collect();

    if samples.iter().all(|s| s.error < EXACT_TOL) {
        return Ok(ErrorScaling {
            samples,
            slope: None,
            exact: true,
        });
    }
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| (FIT_MIN..=FIT_MAX).contains(&s.error))
        .map(|s| (s.epsilon.ln(), s.error.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::DegenerateFit(format!(
            "only {} samples have error in [{FIT_MIN:e}, {FIT_MAX}]",
            pts.len()
        )));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(ErrorScaling {
        samples,
        slope: Some(sxy / sxx),
        exact: false,
    })
}
