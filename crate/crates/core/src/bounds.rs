//! Lower bounds on the step count `N` and time overhead `τ` of any
//! first-order inversion scheme, and an audit of schemes against them.

use serde::Serialize;

use crate::coupling::{classify_type, CaseLabel, CouplingMatrix, CouplingSpec, TypeMatrix, WeightMatrix, CLASSIFY_TOL};
use crate::error::{Error, Result};
use crate::schemes::{scheme_stats, verify, Scheme, SchemeKind, SchemeStats};

/// Tolerance for a scheme to count as verified before it is audited.
pub const AUDIT_VERIFY_TOL: f64 = 1e-9;
/// Slack allowed on the overhead bound during an audit.
pub const AUDIT_TAU_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spectral {
    pub lambda_min: f64,
    pub lambda_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    /// `None` for raw couplings that are not given in factored form.
    pub case: Option<CaseLabel>,
    pub tau_lower: f64,
    pub steps_lower: usize,
    pub spectral: Spectral,
    pub notes: Vec<String>,
}

/// `τ ≥ −λ_max(J) / λ_min(J)`, valid for every inversion scheme of `J`.
///
/// Each conjugate `V_j J V_jᵀ` has the spectrum of `J`, so the smallest
/// eigenvalue of the average is at least `τ·λ_min`. The average must equal
/// `−J`, whose smallest eigenvalue is `−λ_max`.
pub fn tau_lower_bound(j: &CouplingMatrix) -> Result<f64> {
    spectral_bound(j).map(|(tau, _)| tau)
}

fn spectral_bound(j: &CouplingMatrix) -> Result<(f64, Spectral)> {
    if j.is_zero() {
        return Err(Error::ZeroCoupling);
    }
    let (lambda_max, lambda_min) = j.extreme_eigenvalues();
    // a nonzero traceless symmetric matrix has λ_min < 0 < λ_max
    debug_assert!(lambda_min < 0.0 && lambda_max > 0.0);
    Ok((
        -lambda_max / lambda_min,
        Spectral {
            lambda_min,
            lambda_max,
        },
    ))
}

/// `N ≥ n − 1` for a semidefinite type matrix on a complete coupling graph.
///
/// Every pair must be coupled; the weights themselves are irrelevant because
/// an inversion scheme for `W ⊗ A` inverts any blockwise rescaling of it.
pub fn steps_lower_bound(w: &WeightMatrix, a: &TypeMatrix) -> Result<usize> {
    let case = classify_type(a, CLASSIFY_TOL)?;
    if case != CaseLabel::Case3 {
        return Err(Error::BoundNotApplicable(format!(
            "the n-1 step bound needs a semidefinite type matrix, got case {case}"
        )));
    }
    if !w.is_complete() {
        return Err(Error::BoundNotApplicable(
            "the n-1 step bound is only established when every pair of spins is coupled".into(),
        ));
    }
    Ok(w.n() - 1)
}

/// `N ≥ ⌈log n / log p⌉` for Case 2, with `p` the size of a partition of
/// SO(3) into classes that cannot flip the trace of `A`. Computed as the
/// smallest `N` with `pᴺ ≥ n`.
pub fn steps_lower_bound_case2(n: usize, p: usize) -> Result<usize> {
    if p < 2 {
        return Err(Error::InvalidParameter(format!("partition size p = {p} must be at least 2")));
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 spins, got {n}")));
    }
    let mut steps = 0;
    let mut reach: u128 = 1;
    while reach < n as u128 {
        reach = reach.saturating_mul(p as u128);
        steps += 1;
    }
    Ok(steps)
}

/// Every bound that applies to the given coupling.
pub fn bounds_report(spec: &CouplingSpec, p: Option<usize>) -> Result<BoundsReport> {
    let j = spec.coupling();
    let (tau_lower, spectral) = spectral_bound(&j)?;
    let mut notes = vec![format!(
        "tau >= -lambda_max/lambda_min = {tau_lower:.12}"
    )];
    let mut steps_lower = 1;
    let case = match spec.factors() {
        None => {
            notes.push("raw coupling: only the spectral overhead bound applies".into());
            if p.is_some() {
                notes.push("p ignored: requires a factored coupling".into());
            }
            None
        }
        Some((w, a)) => {
            let case = classify_type(a, CLASSIFY_TOL)?;
            match case {
                CaseLabel::Case1 => {
                    notes.push("case 1: a 2-step collective scheme with tau = 2 exists".into());
                }
                CaseLabel::Case2 => {
                    notes.push("case 2: collective schemes cannot invert (block trace sign)".into());
                    match p {
                        Some(p) => {
                            steps_lower = steps_lower_bound_case2(w.n(), p)?;
                            notes.push(format!("N >= ceil(log n / log p) = {steps_lower} with p = {p}"));
                        }
                        None => notes.push("case 2 step bound needs a partition size p".into()),
                    }
                }
                CaseLabel::Case3 => {
                    notes.push("case 3: collective schemes cannot invert (block trace sign)".into());
                    match steps_lower_bound(w, a) {
                        Ok(bound) => {
                            steps_lower = bound.max(1);
                            notes.push(format!("N >= n - 1 = {bound} (rank argument)"));
                        }
                        Err(e) => notes.push(format!("no step bound: {e}")),
                    }
                }
            }
            if p.is_some() && case != CaseLabel::Case2 {
                notes.push("p ignored: only used for case 2".into());
            }
            Some(case)
        }
    };
    Ok(BoundsReport {
        case,
        tau_lower,
        steps_lower,
        spectral,
        notes,
    })
}

/// Outcome of comparing a verified scheme with the lower bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsAudit {
    pub pass: bool,
    pub tau: f64,
    pub tau_lower: f64,
    /// `τ − τ_lower`; negative means the bound is violated.
    pub tau_margin: f64,
    #[serde(rename = "N")]
    pub steps: usize,
    pub steps_lower: Option<usize>,
    pub steps_margin: Option<i64>,
}

/// Checks a scheme's statistics against bounds. A verified scheme that fails
/// here points to a software defect.
pub fn audit(stats: &SchemeStats, tau_lower: f64, steps_lower: Option<usize>) -> BoundsAudit {
    let tau_margin = stats.tau - tau_lower;
    let steps_margin = steps_lower.map(|b| stats.steps as i64 - b as i64);
    let pass = tau_margin >= -AUDIT_TAU_SLACK && steps_margin.is_none_or(|m| m >= 0);
    BoundsAudit {
        pass,
        tau: stats.tau,
        tau_lower,
        tau_margin,
        steps: stats.steps,
        steps_lower,
        steps_margin,
    }
}

/// Verifies `s` as an inversion of the coupling, then audits it.
pub fn check_scheme_against_bounds(s: &Scheme, spec: &CouplingSpec) -> Result<BoundsAudit> {
    if s.kind() != SchemeKind::Inversion {
        return Err(Error::InvalidScheme("only inversion schemes can be audited".into()));
    }
    let j = spec.coupling();
    let v = verify(s, &j, AUDIT_VERIFY_TOL)?;
    if !v.ok {
        return Err(Error::NotVerified {
            residual: v.residual,
            tol: AUDIT_VERIFY_TOL,
        });
    }
    let tau_lower = tau_lower_bound(&j)?;
    let steps_lower = spec
        .factors()
        .and_then(|(w, a)| steps_lower_bound(w, a).ok());
    Ok(audit(&scheme_stats(s), tau_lower, steps_lower))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{complete_weights, dipole_type, random_weights, scalar_type, tensor_coupling};
    use crate::rotalg::{random_rotation, Axis, Rotation3};
    use crate::schemes::{synthesize_case1, synthesize_case2, Step};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn factored(w: WeightMatrix, a: TypeMatrix) -> CouplingSpec {
        CouplingSpec::Factored { w, a }
    }

    #[test]
    fn heisenberg_overhead_bound_is_n_minus_one() {
        for n in 2..=16 {
            let j = tensor_coupling(&complete_weights(n).unwrap(), &scalar_type());
            let tau = tau_lower_bound(&j).unwrap();
            assert!((tau - (n - 1) as f64).abs() <= 1e-9, "n={n}: {tau}");
        }
    }

    #[test]
    fn dipole_pair_bound() {
        let j = tensor_coupling(&complete_weights(2).unwrap(), &dipole_type());
        let (lmax, lmin) = j.extreme_eigenvalues();
        assert!((lmax - 2.0).abs() < 1e-12 && (lmin + 2.0).abs() < 1e-12);
        assert!((tau_lower_bound(&j).unwrap() - 1.0).abs() < 1e-12);
        assert!((tau_lower_bound(&j.scaled(7.5)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_coupling_rejected() {
        assert_eq!(tau_lower_bound(&CouplingMatrix::zeros(3).unwrap()), Err(Error::ZeroCoupling));
    }

    #[test]
    fn step_bound_examples() {
        let w5 = complete_weights(5).unwrap();
        assert_eq!(steps_lower_bound(&w5, &scalar_type()).unwrap(), 4);
        assert_eq!(steps_lower_bound(&complete_weights(2).unwrap(), &scalar_type()).unwrap(), 1);
        assert_eq!(steps_lower_bound(&w5, &TypeMatrix::diagonal(1.0, 1.0, 0.0)).unwrap(), 4);
        assert!(matches!(
            steps_lower_bound(&w5, &dipole_type()),
            Err(Error::BoundNotApplicable(_))
        ));
        let path = WeightMatrix::new(DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
        ))
        .unwrap();
        assert!(matches!(
            steps_lower_bound(&path, &scalar_type()),
            Err(Error::BoundNotApplicable(_))
        ));
    }

    #[test]
    fn case2_log_bound() {
        assert_eq!(steps_lower_bound_case2(16, 2).unwrap(), 4);
        assert_eq!(steps_lower_bound_case2(10, 3).unwrap(), 3);
        assert_eq!((10f64.ln() / 3f64.ln()).ceil() as usize, 3);
        for p in 2..10 {
            assert_eq!(steps_lower_bound_case2(2, p).unwrap(), 1);
        }
        assert!(steps_lower_bound_case2(10, 1).is_err());
        assert_eq!(steps_lower_bound_case2(usize::MAX, 2).unwrap(), 64);
    }

    #[test]
    fn report_contents() {
        let r = bounds_report(&factored(complete_weights(6).unwrap(), scalar_type()), None).unwrap();
        assert_eq!(r.case, Some(CaseLabel::Case3));
        assert!((r.tau_lower - 5.0).abs() < 1e-9);
        assert_eq!(r.steps_lower, 5);
        assert!(r.spectral.lambda_min < 0.0);

        let r = bounds_report(&factored(complete_weights(6).unwrap(), dipole_type()), None).unwrap();
        assert_eq!(r.case, Some(CaseLabel::Case1));
        assert_eq!(r.steps_lower, 1);

        let mixed = TypeMatrix::diagonal(2.0, 1.0, -1.0);
        let r = bounds_report(&factored(complete_weights(10).unwrap(), mixed), Some(3)).unwrap();
        assert_eq!(r.case, Some(CaseLabel::Case2));
        assert_eq!(r.steps_lower, 3);

        let raw = CouplingSpec::Raw(tensor_coupling(&complete_weights(3).unwrap(), &scalar_type()));
        let r = bounds_report(&raw, Some(3)).unwrap();
        assert_eq!(r.case, None);
        assert!((r.tau_lower - 2.0).abs() < 1e-9);
    }

    #[test]
    fn audit_of_verified_schemes() {
        let w = complete_weights(3).unwrap();
        let s = synthesize_case1(&w, &dipole_type()).unwrap();
        let a = check_scheme_against_bounds(&s, &factored(w.clone(), dipole_type())).unwrap();
        assert!(a.pass);
        // W eigenvalues (2, -1, -1) times A eigenvalues (1, 1, -2): λ_max = 2, λ_min = -4
        assert!((a.tau_lower - 0.5).abs() < 1e-12);
        assert_eq!(a.steps_lower, None);

        let mixed = TypeMatrix::diagonal(2.0, 1.0, -1.0);
        let s = synthesize_case2(&w, &mixed).unwrap();
        assert!(check_scheme_against_bounds(&s, &factored(w.clone(), mixed)).unwrap().pass);

        // three single-spin π flips invert the n = 2 Heisenberg pair
        let steps = Axis::ALL
            .iter()
            .map(|&ax| Step::new(1.0, vec![Rotation3::identity(), Rotation3::pi_about(ax)]))
            .collect();
        let s = Scheme::new(SchemeKind::Inversion, 2, steps).unwrap();
        let a = check_scheme_against_bounds(&s, &factored(complete_weights(2).unwrap(), scalar_type())).unwrap();
        assert!(a.pass);
        assert_eq!((a.tau, a.steps_lower), (3.0, Some(1)));
    }

    #[test]
    fn audit_rejects_unverified_and_flags_violations() {
        let w = complete_weights(3).unwrap();
        let s = Scheme::new(SchemeKind::Inversion, 3, vec![Step::collective(1.0, Rotation3::identity(), 3)]).unwrap();
        assert!(matches!(
            check_scheme_against_bounds(&s, &factored(w, dipole_type())),
            Err(Error::NotVerified { .. })
        ));
        let edited = SchemeStats { steps: 2, tau: 0.5, collective: true };
        let a = audit(&edited, 1.0, None);
        assert!(!a.pass);
        assert!(a.tau_margin < 0.0);
        let a = audit(&SchemeStats { steps: 1, tau: 5.0, collective: false }, 2.0, Some(2));
        assert!(!a.pass);
        assert_eq!(a.steps_margin, Some(-1));
    }

    #[test]
    fn tau_bound_invariances() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let n = rng.random_range(2..6);
            let a = nalgebra::Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let a = TypeMatrix::new(a + a.transpose()).unwrap();
            let j = tensor_coupling(&random_weights(n, &mut rng).unwrap(), &a);
            let base = tau_lower_bound(&j).unwrap();
            let scaled = tau_lower_bound(&j.scaled(rng.random_range(0.1..10.0))).unwrap();
            assert!((base - scaled).abs() <= 1e-9 * base.max(1.0));
            let rots: Vec<_> = (0..n).map(|_| random_rotation(&mut rng)).collect();
            let conj = crate::schemes::average_steps(&[Step::new(1.0, rots)], &j).unwrap();
            let conj = tau_lower_bound(&CouplingMatrix::new(conj).unwrap()).unwrap();
            assert!((base - conj).abs() <= 1e-9 * base.max(1.0));
        }
    }

    #[test]
    fn tau_bound_is_monotone_in_n() {
        for a in [scalar_type(), TypeMatrix::diagonal(1.0, 1.0, 0.0), TypeMatrix::diagonal(3.0, 0.5, 0.0)] {
            let mut last = 0.0;
            for n in 2..=10 {
                let tau = tau_lower_bound(&tensor_coupling(&complete_weights(n).unwrap(), &a)).unwrap();
                assert!(tau >= last - 1e-12);
                last = tau;
            }
        }
    }
}
