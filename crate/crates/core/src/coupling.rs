//! Coupling matrices `J`, the factored form `J = W ⊗ A`, and case
//! classification of the coupling type.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::Rng;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rotalg::{sym_eig, sym_eig3};

/// Default relative tolerance for classification.
pub const CLASSIFY_TOL: f64 = 1e-9;
const SYMMETRY_TOL: f64 = 1e-12;

/// Symmetric 3×3 matrix fixing the common interaction type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TypeMatrix(Matrix3<f64>);

impl TypeMatrix {
    pub fn new(a: Matrix3<f64>) -> Result<Self> {
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidType("non-finite entry".into()));
        }
        let asym = (a - a.transpose()).amax();
        if asym > SYMMETRY_TOL * a.norm().max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidType(format!(
                "not symmetric (max asymmetry {asym:.3e})"
            )));
        }
        Ok(TypeMatrix((a + a.transpose()) * 0.5))
    }

    pub fn diagonal(ax: f64, ay: f64, az: f64) -> Self {
        TypeMatrix(Matrix3::from_diagonal(&Vector3::new(ax, ay, az)))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Descending eigenvalues.
    pub fn eigenvalues(&self) -> Vector3<f64> {
        sym_eig3(&self.0).expect("type matrix is symmetric").0
    }
}

/// Symmetric `n × n` weight matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix(DMatrix<f64>);

impl WeightMatrix {
    pub fn new(w: DMatrix<f64>) -> Result<Self> {
        let n = w.nrows();
        if w.ncols() != n {
            return Err(Error::InvalidWeights(format!(
                "must be square, got {}x{}",
                n,
                w.ncols()
            )));
        }
        if n < 2 {
            return Err(Error::InvalidWeights(format!("need at least 2 spins, got {n}")));
        }
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidWeights("non-finite entry".into()));
        }
        if let Some(k) = (0..n).find(|&k| w[(k, k)] != 0.0) {
            return Err(Error::InvalidWeights(format!(
                "diagonal entry ({k},{k}) is {} but must be zero",
                w[(k, k)]
            )));
        }
        let asym = (&w - w.transpose()).amax();
        if asym > SYMMETRY_TOL * w.norm().max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidWeights(format!(
                "not symmetric (max asymmetry {asym:.3e})"
            )));
        }
        Ok(WeightMatrix((&w + w.transpose()) * 0.5))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn weight(&self, k: usize, l: usize) -> f64 {
        self.0[(k, l)]
    }

    /// True when every pair of distinct spins is coupled.
    pub fn is_complete(&self) -> bool {
        let n = self.n();
        (0..n).all(|k| (0..n).all(|l| k == l || self.0[(k, l)] != 0.0))
    }
}

/// Weight matrix of the complete graph: every off-diagonal entry is one.
pub fn complete_weights(n: usize) -> Result<WeightMatrix> {
    if n < 2 {
        return Err(Error::InvalidWeights(format!("need at least 2 spins, got {n}")));
    }
    WeightMatrix::new(DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 }))
}

/// Weights drawn uniformly from `[−1, 1)` for every pair.
pub fn random_weights<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<WeightMatrix> {
    let mut w = DMatrix::zeros(n, n);
    for k in 0..n {
        for l in k + 1..n {
            let x = rng.random_range(-1.0..1.0);
            w[(k, l)] = x;
            w[(l, k)] = x;
        }
    }
    WeightMatrix::new(w)
}

/// Truncated dipole-dipole type `diag(1, 1, −2)`.
pub fn dipole_type() -> TypeMatrix {
    TypeMatrix::diagonal(1.0, 1.0, -2.0)
}

/// Strong scalar (Heisenberg) type, the identity.
pub fn scalar_type() -> TypeMatrix {
    TypeMatrix(Matrix3::identity())
}

/// Symmetric `3n × 3n` coupling matrix with zero 3×3 diagonal blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingMatrix {
    n: usize,
    j: DMatrix<f64>,
}

impl CouplingMatrix {
    /// Validates the coupling invariants, then stores an exactly symmetric copy
    /// with exactly zero diagonal blocks.
    pub fn new(j: DMatrix<f64>) -> Result<Self> {
        let dim = j.nrows();
        if j.ncols() != dim {
            return Err(Error::InvalidCoupling(format!(
                "must be square, got {}x{}",
                dim,
                j.ncols()
            )));
        }
        if !dim.is_multiple_of(3) {
            return Err(Error::InvalidCoupling(format!(
                "dimension {dim} is not a multiple of 3"
            )));
        }
        let n = dim / 3;
        if n < 2 {
            return Err(Error::InvalidCoupling(format!("need at least 2 spins, got {n}")));
        }
        if j.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidCoupling("non-finite entry".into()));
        }
        let tol = SYMMETRY_TOL * j.norm().max(f64::MIN_POSITIVE);
        let asym = (&j - j.transpose()).amax();
        if asym > tol {
            return Err(Error::InvalidCoupling(format!(
                "block (l,k) must be the transpose of block (k,l) (max asymmetry {asym:.3e})"
            )));
        }
        for k in 0..n {
            let diag = j.view((3 * k, 3 * k), (3, 3)).amax();
            if diag > tol {
                return Err(Error::InvalidCoupling(format!(
                    "diagonal block ({k},{k}) must be zero (max entry {diag:.3e})"
                )));
            }
        }
        let mut j = (&j + j.transpose()) * 0.5;
        for k in 0..n {
            j.view_mut((3 * k, 3 * k), (3, 3)).fill(0.0);
        }
        Ok(CouplingMatrix { n, j })
    }

    /// The zero coupling on `n` spins.
    pub fn zeros(n: usize) -> Result<Self> {
        CouplingMatrix::new(DMatrix::zeros(3 * n, 3 * n))
    }

    pub(crate) fn from_matrix_unchecked(n: usize, j: DMatrix<f64>) -> Self {
        CouplingMatrix { n, j }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.j
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.j
    }

    /// Block `J_kl` coupling spins `k` and `l`.
    pub fn block(&self, k: usize, l: usize) -> Matrix3<f64> {
        self.j.fixed_view::<3, 3>(3 * k, 3 * l).into_owned()
    }

    pub fn norm(&self) -> f64 {
        self.j.norm()
    }

    pub fn is_zero(&self) -> bool {
        self.j.iter().all(|&x| x == 0.0)
    }

    /// `λ_max` and `λ_min` of `J`.
    pub fn extreme_eigenvalues(&self) -> (f64, f64) {
        let spec = sym_eig(&self.j).expect("coupling matrix is symmetric");
        (spec.max(), spec.min())
    }

    pub fn scaled(&self, c: f64) -> CouplingMatrix {
        CouplingMatrix {
            n: self.n,
            j: &self.j * c,
        }
    }
}

/// `J = W ⊗ A`: block `(k, l)` is `w_kl · A`.
pub fn tensor_coupling(w: &WeightMatrix, a: &TypeMatrix) -> CouplingMatrix {
    let n = w.n();
    let mut j = DMatrix::zeros(3 * n, 3 * n);
    for k in 0..n {
        for l in 0..n {
            if k != l {
                j.fixed_view_mut::<3, 3>(3 * k, 3 * l)
                    .copy_from(&(a.matrix() * w.weight(k, l)));
            }
        }
    }
    CouplingMatrix::from_matrix_unchecked(n, j)
}

/// A coupling as supplied by the user: factored or raw.
#[derive(Debug, Clone, PartialEq)]
pub enum CouplingSpec {
    Factored { w: WeightMatrix, a: TypeMatrix },
    Raw(CouplingMatrix),
}

impl CouplingSpec {
    pub fn n(&self) -> usize {
        match self {
            CouplingSpec::Factored { w, .. } => w.n(),
            CouplingSpec::Raw(j) => j.n(),
        }
    }

    pub fn coupling(&self) -> CouplingMatrix {
        match self {
            CouplingSpec::Factored { w, a } => tensor_coupling(w, a),
            CouplingSpec::Raw(j) => j.clone(),
        }
    }

    pub fn factors(&self) -> Option<(&WeightMatrix, &TypeMatrix)> {
        match self {
            CouplingSpec::Factored { w, a } => Some((w, a)),
            CouplingSpec::Raw(_) => None,
        }
    }
}

/// The three coupling-type regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseLabel {
    /// Traceless type matrix.
    Case1,
    /// Mixed-sign eigenvalues with nonzero trace.
    Case2,
    /// Semidefinite type matrix.
    Case3,
}

impl CaseLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            CaseLabel::Case1 => "1",
            CaseLabel::Case2 => "2",
            CaseLabel::Case3 => "3",
        }
    }
}

impl std::fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for CaseLabel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

/// Classification with the quantities that decided it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub case: CaseLabel,
    pub eigenvalues: [f64; 3],
    pub trace: f64,
    /// `|tr A| − tol·‖A‖_F`; non-positive means the trace counted as zero.
    pub trace_margin: f64,
    pub tol: f64,
}

pub fn classify_type(a: &TypeMatrix, tol: f64) -> Result<CaseLabel> {
    classify_detailed(a, tol).map(|c| c.case)
}

pub fn classify_detailed(a: &TypeMatrix, tol: f64) -> Result<Classification> {
    if !(tol >= 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be >= 0")));
    }
    let scale = a.matrix().norm();
    if scale == 0.0 {
        return Err(Error::ZeroType);
    }
    let eig = a.eigenvalues();
    let threshold = tol * scale;
    let trace = a.trace();
    let case = if trace.abs() <= threshold {
        CaseLabel::Case1
    } else {
        let nonzero = eig.iter().filter(|l| l.abs() > threshold);
        let (pos, neg) = nonzero.fold((0, 0), |(p, q), &l| {
            if l > 0.0 {
                (p + 1, q)
            } else {
                (p, q + 1)
            }
        });
        if pos == 0 || neg == 0 {
            CaseLabel::Case3
        } else {
            CaseLabel::Case2
        }
    };
    Ok(Classification {
        case,
        eigenvalues: [eig[0], eig[1], eig[2]],
        trace,
        trace_margin: trace.abs() - threshold,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotalg::random_rotation;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dipole_pair_blocks() {
        let w = complete_weights(2).unwrap();
        let j = tensor_coupling(&w, &dipole_type());
        assert_eq!(j.matrix().nrows(), 6);
        assert_eq!(j.block(0, 1), *dipole_type().matrix());
        assert_eq!(j.block(1, 0), *dipole_type().matrix());
        assert_eq!(j.block(0, 0), Matrix3::zeros());
        assert_eq!(j.matrix().trace(), 0.0);
    }

    #[test]
    fn zero_type_gives_zero_coupling() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = random_weights(4, &mut rng).unwrap();
        let j = tensor_coupling(&w, &TypeMatrix::diagonal(0.0, 0.0, 0.0));
        assert!(j.is_zero());
    }

    #[test]
    fn three_spin_heisenberg_spectrum() {
        let j = tensor_coupling(&complete_weights(3).unwrap(), &scalar_type());
        let spec = sym_eig(j.matrix()).unwrap();
        let expected = [2.0, 2.0, 2.0, -1.0, -1.0, -1.0, -1.0, -1.0, -1.0];
        for (l, x) in spec.eigenvalues.iter().zip(expected) {
            assert!((l - x).abs() < 1e-12);
        }
    }

    #[test]
    fn complete_weights_shapes() {
        let w2 = complete_weights(2).unwrap();
        assert_eq!(*w2.matrix(), DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let w3 = complete_weights(3).unwrap();
        for k in 0..3 {
            assert_eq!(w3.matrix().row(k).sum(), 2.0);
        }
        let spec = sym_eig(complete_weights(4).unwrap().matrix()).unwrap();
        for (l, x) in spec.eigenvalues.iter().zip([3.0, -1.0, -1.0, -1.0]) {
            assert!((l - x).abs() < 1e-12);
        }
        assert!(complete_weights(1).is_err());
        assert!(w3.is_complete());
    }

    #[test]
    fn named_types() {
        let d = dipole_type();
        assert_eq!(d.trace(), 0.0);
        assert_eq!(d.eigenvalues(), Vector3::new(1.0, 1.0, -2.0));
        assert_eq!(classify_type(&d, CLASSIFY_TOL).unwrap(), CaseLabel::Case1);
        let s = scalar_type();
        assert_eq!(s.trace(), 3.0);
        assert_eq!(s.eigenvalues(), Vector3::new(1.0, 1.0, 1.0));
        assert_eq!(classify_type(&s, CLASSIFY_TOL).unwrap(), CaseLabel::Case3);
    }

    #[test]
    fn classify_examples() {
        let mixed = TypeMatrix::diagonal(2.0, 1.0, -1.0);
        assert_eq!(classify_type(&mixed, CLASSIFY_TOL).unwrap(), CaseLabel::Case2);
        let rank_two = TypeMatrix::diagonal(1.0, 1.0, 0.0);
        assert_eq!(classify_type(&rank_two, CLASSIFY_TOL).unwrap(), CaseLabel::Case3);
        let neg = TypeMatrix::diagonal(-1.0, -3.0, 0.0);
        assert_eq!(classify_type(&neg, CLASSIFY_TOL).unwrap(), CaseLabel::Case3);
        assert_eq!(
            classify_type(&TypeMatrix::diagonal(0.0, 0.0, 0.0), CLASSIFY_TOL),
            Err(Error::ZeroType)
        );
    }

    #[test]
    fn classify_near_boundary_reports_margin() {
        let barely = TypeMatrix::diagonal(1.0, 1.0, -2.0 + 1e-12);
        let c = classify_detailed(&barely, CLASSIFY_TOL).unwrap();
        assert_eq!(c.case, CaseLabel::Case1);
        assert!(c.trace_margin < 0.0);
        let off = TypeMatrix::diagonal(1.0, 1.0, -2.0 + 1e-6);
        let c = classify_detailed(&off, CLASSIFY_TOL).unwrap();
        assert_eq!(c.case, CaseLabel::Case2);
        assert!(c.trace_margin > 0.0);
    }

    #[test]
    fn coupling_validation() {
        let mut j = DMatrix::zeros(6, 6);
        j[(0, 0)] = 1.0;
        let err = CouplingMatrix::new(j).unwrap_err().to_string();
        assert!(err.contains("diagonal block"), "{err}");

        let mut j = DMatrix::zeros(6, 6);
        j[(0, 4)] = 1.0;
        let err = CouplingMatrix::new(j).unwrap_err().to_string();
        assert!(err.contains("transpose"), "{err}");

        assert!(CouplingMatrix::new(DMatrix::zeros(5, 5)).is_err());
        assert!(CouplingMatrix::new(DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn weight_validation() {
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 0.0]);
        assert!(WeightMatrix::new(w).unwrap_err().to_string().contains("diagonal"));
        let w = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]);
        assert!(WeightMatrix::new(w).unwrap_err().to_string().contains("symmetric"));
        let w = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        assert!(!WeightMatrix::new(w).unwrap().is_complete());
    }

    proptest! {
        #[test]
        fn tensor_spectrum_is_pairwise_products(seed in any::<u64>(), n in 2usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = random_weights(n, &mut rng).unwrap();
            let a = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let a = TypeMatrix::new(a + a.transpose()).unwrap();
            let j = tensor_coupling(&w, &a);
            let got = sym_eig(j.matrix()).unwrap().eigenvalues;
            let wl = sym_eig(w.matrix()).unwrap().eigenvalues;
            let al = a.eigenvalues();
            let mut expected: Vec<f64> = wl.iter().flat_map(|x| al.iter().map(move |y| x * y)).collect();
            expected.sort_by(|x, y| y.total_cmp(x));
            for (g, e) in got.iter().zip(&expected) {
                prop_assert!((g - e).abs() <= 1e-9, "{got:?} vs {expected:?}");
            }
        }

        #[test]
        fn classification_is_frame_and_scale_invariant(
            seed in any::<u64>(),
            diag in prop::array::uniform3(-3.0f64..3.0),
            scale in 0.01f64..100.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = TypeMatrix::diagonal(diag[0], diag[1], diag[2]);
            prop_assume!(a.matrix().norm() > 1e-3);
            let base = classify_type(&a, CLASSIFY_TOL).unwrap();
            let r = random_rotation(&mut rng);
            let rotated = TypeMatrix::new(r.conjugate(a.matrix())).unwrap();
            prop_assert_eq!(classify_type(&rotated, CLASSIFY_TOL).unwrap(), base);
            let scaled = TypeMatrix::new(a.matrix() * scale).unwrap();
            prop_assert_eq!(classify_type(&scaled, CLASSIFY_TOL).unwrap(), base);
            let negated = TypeMatrix::new(-a.matrix()).unwrap();
            prop_assert_eq!(classify_type(&negated, CLASSIFY_TOL).unwrap(), base);
        }
    }
}
