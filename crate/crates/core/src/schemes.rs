//! Pulse schemes in coupling space.
//!
//! A step applies one rotation per spin for a relative time `t`; its effect
//! on a coupling is `J ↦ V J Vᵀ` with `V` the block-diagonal assembly of the
//! step's rotations. A scheme inverts `J` when `Σ t_j V_j J V_jᵀ = −J` and
//! decouples it when the same sum vanishes.

use nalgebra::{DMatrix, Matrix3};

use crate::coupling::{classify_type, CaseLabel, CouplingMatrix, TypeMatrix, WeightMatrix, CLASSIFY_TOL};
use crate::error::{Error, Result};
use crate::rotalg::{axis_cycle, sym_eig3, Axis, Rotation3};

/// Tolerance under which two rotations count as the same pulse.
pub const COLLECTIVE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    Inversion,
    Decoupling,
}

impl SchemeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemeKind::Inversion => "inversion",
            SchemeKind::Decoupling => "decoupling",
        }
    }
}

/// One time step: wait for relative time `t` conjugated by per-spin rotations.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub t: f64,
    pub rotations: Vec<Rotation3>,
}

impl Step {
    pub fn new(t: f64, rotations: Vec<Rotation3>) -> Self {
        Step { t, rotations }
    }

    /// Every spin receives the same rotation.
    pub fn collective(t: f64, rotation: Rotation3, n: usize) -> Self {
        Step {
            t,
            rotations: vec![rotation; n],
        }
    }

    pub fn is_collective(&self) -> bool {
        self.rotations
            .windows(2)
            .all(|w| w[0].distance(&w[1]) <= COLLECTIVE_TOL)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scheme {
    kind: SchemeKind,
    n: usize,
    steps: Vec<Step>,
}

impl Scheme {
    pub fn new(kind: SchemeKind, n: usize, steps: Vec<Step>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidScheme("spin count must be positive".into()));
        }
        if steps.is_empty() {
            return Err(Error::InvalidScheme("scheme has no steps".into()));
        }
        for (j, step) in steps.iter().enumerate() {
            if !(step.t > 0.0 && step.t.is_finite()) {
                return Err(Error::InvalidScheme(format!(
                    "step {j} has time {} but times must be positive",
                    step.t
                )));
            }
            if step.rotations.len() != n {
                return Err(Error::InvalidScheme(format!(
                    "step {j} has {} rotations for {n} spins",
                    step.rotations.len()
                )));
            }
        }
        Ok(Scheme { kind, n, steps })
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn tau(&self) -> f64 {
        self.steps.iter().map(|s| s.t).sum()
    }

    pub fn stats(&self) -> SchemeStats {
        scheme_stats(self)
    }

    /// Same steps with every rotation replaced by `f(rotation)`.
    pub fn map_rotations(&self, f: impl Fn(&Rotation3) -> Rotation3) -> Scheme {
        Scheme {
            kind: self.kind,
            n: self.n,
            steps: self
                .steps
                .iter()
                .map(|s| Step::new(s.t, s.rotations.iter().map(&f).collect()))
                .collect(),
        }
    }

    pub fn with_kind(mut self, kind: SchemeKind) -> Scheme {
        self.kind = kind;
        self
    }
}

/// Step count, time overhead and selectivity of a scheme.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SchemeStats {
    #[serde(rename = "N")]
    pub steps: usize,
    pub tau: f64,
    pub collective: bool,
}

pub fn scheme_stats(s: &Scheme) -> SchemeStats {
    SchemeStats {
        steps: s.len(),
        tau: s.tau(),
        collective: s.steps.iter().all(Step::is_collective),
    }
}

/// `Σ_j t_j V_j J V_jᵀ` over a list of steps.
pub fn average_steps(steps: &[Step], j: &CouplingMatrix) -> Result<DMatrix<f64>> {
    let n = j.n();
    if let Some(bad) = steps.iter().find(|s| s.rotations.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bad.rotations.len(),
        });
    }
    let mut out = DMatrix::zeros(3 * n, 3 * n);
    for k in 0..n {
        for l in k + 1..n {
            let jkl = j.block(k, l);
            if jkl == Matrix3::zeros() {
                continue;
            }
            let mut acc = Matrix3::zeros();
            for step in steps {
                let uk = step.rotations[k].matrix();
                let ul = step.rotations[l].matrix();
                acc += (uk * jkl * ul.transpose()) * step.t;
            }
            out.fixed_view_mut::<3, 3>(3 * k, 3 * l).copy_from(&acc);
            out.fixed_view_mut::<3, 3>(3 * l, 3 * k)
                .copy_from(&acc.transpose());
        }
    }
    Ok(out)
}

/// Time-weighted average of the conjugated couplings.
pub fn average_coupling(s: &Scheme, j: &CouplingMatrix) -> Result<DMatrix<f64>> {
    if s.n != j.n() {
        return Err(Error::DimensionMismatch {
            expected: j.n(),
            found: s.n,
        });
    }
    average_steps(&s.steps, j)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Verification {
    pub ok: bool,
    /// Relative Frobenius distance from the target average.
    pub residual: f64,
}

/// Checks the first-order condition for the scheme's kind.
pub fn verify(s: &Scheme, j: &CouplingMatrix, tol: f64) -> Result<Verification> {
    let norm = j.norm();
    if norm == 0.0 {
        return Err(Error::ZeroCoupling);
    }
    let avg = average_coupling(s, j)?;
    let residual = match s.kind {
        SchemeKind::Inversion => (avg + j.matrix()).norm() / norm,
        SchemeKind::Decoupling => avg.norm() / norm,
    };
    Ok(Verification {
        ok: residual <= tol,
        residual,
    })
}

/// Turns a decoupling scheme with steps `0..=N` into an inversion scheme with
/// steps `1..=N`, rotations `V₀ᵀV_j` and times `t_j / t₀`.
pub fn decoupling_to_inversion(s: &Scheme) -> Result<Scheme> {
    if s.kind != SchemeKind::Decoupling {
        return Err(Error::InvalidScheme(
            "expected a decoupling scheme".into(),
        ));
    }
    if s.steps.len() < 2 {
        return Err(Error::InvalidScheme(format!(
            "decoupling scheme needs at least 2 steps, has {}",
            s.steps.len()
        )));
    }
    let first = &s.steps[0];
    let steps = s.steps[1..]
        .iter()
        .map(|step| {
            let rotations = first
                .rotations
                .iter()
                .zip(&step.rotations)
                .map(|(v0, vj)| v0.transpose() * *vj)
                .collect();
            Step::new(step.t / first.t, rotations)
        })
        .collect();
    Scheme::new(SchemeKind::Inversion, s.n, steps)
}

/// Prepends an identity step of unit time.
pub fn inversion_to_decoupling(s: &Scheme) -> Result<Scheme> {
    if s.kind != SchemeKind::Inversion {
        return Err(Error::InvalidScheme("expected an inversion scheme".into()));
    }
    let mut steps = Vec::with_capacity(s.steps.len() + 1);
    steps.push(Step::collective(1.0, Rotation3::identity(), s.n));
    steps.extend(s.steps.iter().cloned());
    Scheme::new(SchemeKind::Decoupling, s.n, steps)
}

fn require_case(a: &TypeMatrix, expected: CaseLabel) -> Result<()> {
    let found = classify_type(a, CLASSIFY_TOL)?;
    if found != expected {
        return Err(Error::WrongCase {
            expected: expected.to_string(),
            found: found.to_string(),
        });
    }
    Ok(())
}

/// Two-step collective inversion for a traceless type matrix.
///
/// In the eigenframe `A = Q D Qᵀ` the cyclic permutation `S` satisfies
/// `S D Sᵀ + S² D S²ᵀ = tr(D)·1 − D = −D`, so the steps apply `Q Sʲ Qᵀ`
/// (`j = 1, 2`) to every spin for unit time.
pub fn synthesize_case1(w: &WeightMatrix, a: &TypeMatrix) -> Result<Scheme> {
    require_case(a, CaseLabel::Case1)?;
    let (_, q) = sym_eig3(a.matrix())?;
    let s = axis_cycle();
    let n = w.n();
    let steps = (1..=2)
        .map(|j| Step::collective(1.0, q * s.pow(j) * q.transpose(), n))
        .collect();
    Scheme::new(SchemeKind::Inversion, n, steps)
}

/// Sylvester Hadamard matrix of order `m`, a power of two.
pub fn hadamard_matrix(m: usize) -> Result<DMatrix<i8>> {
    if m == 0 || !m.is_power_of_two() {
        return Err(Error::UnsupportedOrder(m));
    }
    Ok(DMatrix::from_fn(m, m, |i, j| {
        if (i & j).count_ones() % 2 == 0 {
            1
        } else {
            -1
        }
    }))
}

/// Equal-time steps that keep the `axis`-`axis` coupling component and
/// average the other two diagonal components of any `W ⊗ diag(a)` to zero.
///
/// With `m` the smallest power of two `≥ n`, step `c` flips spin `k` by a π
/// rotation about `axis` (conjugation by `iσ_axis`) iff `H[k][c] = −1`. For
/// `k ≠ l` the sign pattern `H[k][c]·H[l][c]` sums to zero over `c`.
pub fn selective_decoupling(n: usize, axis: Axis) -> Result<Vec<Step>> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "selective decoupling needs at least 2 spins, got {n}"
        )));
    }
    let m = n.next_power_of_two();
    let h = hadamard_matrix(m)?;
    let flip = Rotation3::pi_about(axis);
    let t = 1.0 / m as f64;
    Ok((0..m)
        .map(|c| {
            let rotations = (0..n)
                .map(|k| {
                    if h[(k, c)] < 0 {
                        flip
                    } else {
                        Rotation3::identity()
                    }
                })
                .collect();
            Step::new(t, rotations)
        })
        .collect())
}

/// One inverted component of a selective inversion scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentInversion {
    pub target: Axis,
    pub pivot: Axis,
    /// `|a_target / a_pivot|`, the relative time spent on this component.
    pub weight: f64,
}

/// Pivot plan for inverting each nonzero eigen-component of `A` through an
/// opposite-sign component of maximal magnitude.
pub fn selective_plan(a: &TypeMatrix) -> Result<Vec<ComponentInversion>> {
    let eig = a.eigenvalues();
    let zero = CLASSIFY_TOL * a.matrix().norm();
    let mut plan = Vec::new();
    for target in Axis::ALL {
        let at = eig[target.index()];
        if at.abs() <= zero {
            continue;
        }
        let mut pivot: Option<Axis> = None;
        for cand in Axis::ALL {
            let ac = eig[cand.index()];
            if ac.abs() <= zero || ac.signum() == at.signum() {
                continue;
            }
            if pivot.is_none_or(|p| ac.abs() > eig[p.index()].abs()) {
                pivot = Some(cand);
            }
        }
        let pivot = pivot.ok_or_else(|| {
            Error::InvalidParameter(format!(
                "eigenvalue {at} of the type matrix has no opposite-sign partner"
            ))
        })?;
        plan.push(ComponentInversion {
            target,
            pivot,
            weight: (at / eig[pivot.index()]).abs(),
        });
    }
    if plan.is_empty() {
        return Err(Error::ZeroType);
    }
    Ok(plan)
}

/// Selective inversion built from Hadamard decoupling fragments, without the
/// case check. Works whenever every nonzero eigenvalue of `A` has an
/// opposite-sign partner.
pub fn selective_inversion(w: &WeightMatrix, a: &TypeMatrix) -> Result<Scheme> {
    let plan = selective_plan(a)?;
    let (_, q) = sym_eig3(a.matrix())?;
    let n = w.n();
    let mut steps = Vec::new();
    for part in plan {
        // keeps a_pivot on the pivot axis, then carries it onto the target axis
        let carry = Rotation3::quarter_turn(part.pivot, part.target)?;
        for frag in selective_decoupling(n, part.pivot)? {
            let rotations = frag
                .rotations
                .iter()
                .map(|f| q * carry * *f * q.transpose())
                .collect();
            steps.push(Step::new(frag.t * part.weight, rotations));
        }
    }
    Scheme::new(SchemeKind::Inversion, n, steps)
}

/// Inversion for a type matrix with mixed-sign eigenvalues and nonzero trace.
///
/// The overhead `Σ_α |a_α / a_pivot(α)|` depends only on the spectrum of `A`;
/// the step count is at most `3m` with `m` the next power of two `≥ n`.
pub fn synthesize_case2(w: &WeightMatrix, a: &TypeMatrix) -> Result<Scheme> {
    require_case(a, CaseLabel::Case2)?;
    selective_inversion(w, a)
}

/// Constructive inversion for Case 1 and Case 2 couplings.
pub fn synthesize(w: &WeightMatrix, a: &TypeMatrix) -> Result<Scheme> {
    match classify_type(a, CLASSIFY_TOL)? {
        CaseLabel::Case1 => synthesize_case1(w, a),
        CaseLabel::Case2 => synthesize_case2(w, a),
        CaseLabel::Case3 => Err(Error::WrongCase {
            expected: "1 or 2".into(),
            found: "3".into(),
        }),
    }
}
