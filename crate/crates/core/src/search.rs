//! Numerical discovery of inversion schemes over finite candidate pools.
//!
//! For a fixed list of candidate steps the inversion condition is linear in
//! the step times, so finding times reduces to nonnegative least squares on
//! the vectorized `k < l` blocks of the conjugated couplings. Greedy growth
//! adds random octahedral assemblies when the pool is not yet feasible.

use nalgebra::{DMatrix, DVector, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds::tau_lower_bound;
use crate::coupling::{CaseLabel, CouplingMatrix};
use crate::error::{Error, Result};
use crate::nnls::nnls;
use crate::rotalg::{axis_cycle, Axis, Rotation3};
use crate::schemes::{verify, Scheme, SchemeKind, Step};

/// Times at or below this are dropped from a found scheme.
pub const PRUNE_TOL: f64 = 1e-12;
/// Fixed slack on the overhead bound for search results.
pub const BOUND_SLACK: f64 = 1e-6;
/// Random assemblies scored per greedy round.
pub const CANDIDATES_PER_ROUND: usize = 32;
/// Default cap on active-set iterations per solve.
pub const DEFAULT_MAX_STEPS: usize = 10_000;

/// The 24 proper rotations that permute the coordinate axes up to sign.
/// The identity comes first; the order is fixed.
pub fn octahedral_group() -> Vec<Rotation3> {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::with_capacity(24);
    for perm in PERMS {
        for signs in 0..8u8 {
            let mut m = Matrix3::zeros();
            for (col, &row) in perm.iter().enumerate() {
                m[(row, col)] = if signs & (1 << col) != 0 { -1.0 } else { 1.0 };
            }
            if m.determinant() > 0.0 {
                out.push(Rotation3::from_matrix_unchecked(m));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolSource {
    OctahedralRandom,
    CollectiveCyclic,
    PairPiRotations,
    UserProvided,
}

impl std::str::FromStr for PoolSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "octahedral" | "octahedral_random" => Ok(PoolSource::OctahedralRandom),
            "cyclic" | "collective_cyclic" => Ok(PoolSource::CollectiveCyclic),
            "pi" | "pair_pi_rotations" => Ok(PoolSource::PairPiRotations),
            other => Err(Error::InvalidParameter(format!("unknown pool source {other:?}"))),
        }
    }
}

/// Candidate scheme steps, each a per-spin rotation list.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePool {
    assemblies: Vec<Vec<Rotation3>>,
    source: PoolSource,
    seed: u64,
}

impl CandidatePool {
    pub fn new(assemblies: Vec<Vec<Rotation3>>, source: PoolSource, seed: u64) -> Result<Self> {
        let Some(first) = assemblies.first() else {
            return Err(Error::EmptyPool);
        };
        let n = first.len();
        if let Some(bad) = assemblies.iter().find(|a| a.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        Ok(CandidatePool {
            assemblies,
            source,
            seed,
        })
    }

    pub fn user(assemblies: Vec<Vec<Rotation3>>) -> Result<Self> {
        CandidatePool::new(assemblies, PoolSource::UserProvided, 0)
    }

    /// A π rotation about each axis applied to a single spin, for every spin.
    pub fn pair_pi_rotations(n: usize) -> Result<Self> {
        let mut assemblies = Vec::with_capacity(3 * n);
        for k in 0..n {
            for axis in Axis::ALL {
                let mut rots = vec![Rotation3::identity(); n];
                rots[k] = Rotation3::pi_about(axis);
                assemblies.push(rots);
            }
        }
        CandidatePool::new(assemblies, PoolSource::PairPiRotations, 0)
    }

    /// Collective `S` and `S²` for the axis cycle `S`.
    pub fn collective_cyclic(n: usize) -> Result<Self> {
        let s = axis_cycle();
        CandidatePool::new(
            vec![vec![s; n], vec![s.pow(2); n]],
            PoolSource::CollectiveCyclic,
            0,
        )
    }

    /// `size` assemblies with independent uniformly drawn octahedral rotations.
    pub fn octahedral_random(n: usize, size: usize, seed: u64) -> Result<Self> {
        let group = octahedral_group();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let assemblies = (0..size).map(|_| random_assembly(&group, n, &mut rng)).collect();
        CandidatePool::new(assemblies, PoolSource::OctahedralRandom, seed)
    }

    /// Pool suited to the coupling case.
    pub fn default_for(case: Option<CaseLabel>, n: usize, seed: u64) -> Result<Self> {
        let pool = match case {
            Some(CaseLabel::Case1) => CandidatePool::collective_cyclic(n)?,
            _ => CandidatePool::pair_pi_rotations(n)?,
        };
        Ok(pool.with_seed(seed))
    }

    pub fn from_source(source: PoolSource, n: usize, seed: u64) -> Result<Self> {
        match source {
            PoolSource::OctahedralRandom => CandidatePool::octahedral_random(n, 3 * n, seed),
            PoolSource::CollectiveCyclic => Ok(CandidatePool::collective_cyclic(n)?.with_seed(seed)),
            PoolSource::PairPiRotations => Ok(CandidatePool::pair_pi_rotations(n)?.with_seed(seed)),
            PoolSource::UserProvided => Err(Error::InvalidParameter(
                "user pools are built from explicit assemblies".into(),
            )),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn n(&self) -> usize {
        self.assemblies[0].len()
    }

    pub fn len(&self) -> usize {
        self.assemblies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assemblies.is_empty()
    }

    pub fn assemblies(&self) -> &[Vec<Rotation3>] {
        &self.assemblies
    }

    pub fn source(&self) -> PoolSource {
        self.source
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

fn random_assembly(group: &[Rotation3], n: usize, rng: &mut impl Rng) -> Vec<Rotation3> {
    (0..n).map(|_| group[rng.random_range(0..group.len())]).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    /// Present only when the scheme verifies at the requested tolerance.
    pub scheme: Option<Scheme>,
    /// Relative Frobenius residual of the pruned scheme, as computed by `verify`.
    pub residual: f64,
    pub tau: f64,
    /// Active-set iterations for a single solve, greedy rounds for growth.
    pub iterations: usize,
    pub seed: u64,
    /// NNLS objective (relative) after each solve.
    pub objective_history: Vec<f64>,
    pub diagnostics: Vec<String>,
}

/// Vectorized `k < l` blocks, 9 entries per pair.
fn upper_blocks(m: &DMatrix<f64>, n: usize) -> DVector<f64> {
    let mut v = Vec::with_capacity(9 * n * (n - 1) / 2);
    for k in 0..n {
        for l in k + 1..n {
            for c in 0..3 {
                for r in 0..3 {
                    v.push(m[(3 * k + r, 3 * l + c)]);
                }
            }
        }
    }
    DVector::from_vec(v)
}

fn conjugated_column(j: &CouplingMatrix, assembly: &[Rotation3]) -> DVector<f64> {
    let n = j.n();
    let mut v = Vec::with_capacity(9 * n * (n - 1) / 2);
    for k in 0..n {
        for l in k + 1..n {
            let block = assembly[k].matrix() * j.block(k, l) * assembly[l].matrix().transpose();
            v.extend_from_slice(block.as_slice());
        }
    }
    DVector::from_vec(v)
}

struct Solve {
    times: DVector<f64>,
    /// `b − A t`.
    residual: DVector<f64>,
    objective: f64,
    iterations: usize,
    converged: bool,
}

fn solve_times(design: &DMatrix<f64>, target: &DVector<f64>, max_steps: usize) -> Result<Solve> {
    let sol = nnls(design, target, max_steps)?;
    let residual = target - design * &sol.x;
    Ok(Solve {
        objective: sol.residual_norm / target.norm(),
        times: sol.x,
        residual,
        iterations: sol.iterations,
        converged: sol.converged,
    })
}

fn check_inputs(j: &CouplingMatrix, pool: &CandidatePool) -> Result<()> {
    if j.is_zero() {
        return Err(Error::ZeroCoupling);
    }
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    if pool.n() != j.n() {
        return Err(Error::DimensionMismatch {
            expected: j.n(),
            found: pool.n(),
        });
    }
    Ok(())
}

/// Builds the pruned scheme for the solved times and checks it against `tol`
/// and the spectral overhead bound.
fn assemble(
    j: &CouplingMatrix,
    assemblies: &[Vec<Rotation3>],
    solve: &Solve,
    tol: f64,
) -> Result<(Option<Scheme>, f64, f64, Vec<String>)> {
    let mut diagnostics = Vec::new();
    if !solve.converged {
        diagnostics.push("active-set iteration cap reached".to_string());
    }
    let steps: Vec<Step> = solve
        .times
        .iter()
        .zip(assemblies)
        .filter(|(&t, _)| t > PRUNE_TOL)
        .map(|(&t, rots)| Step::new(t, rots.clone()))
        .collect();
    if steps.is_empty() {
        diagnostics.push("no candidate received positive time".to_string());
        return Ok((None, 1.0, 0.0, diagnostics));
    }
    let scheme = Scheme::new(SchemeKind::Inversion, j.n(), steps)?;
    let v = verify(&scheme, j, tol)?;
    let tau = scheme.tau();
    if !v.ok || !solve.converged {
        diagnostics.push(format!("best residual {:.3e} exceeds tolerance {tol:.1e}", v.residual));
        return Ok((None, v.residual, tau, diagnostics));
    }
    let bound = tau_lower_bound(j)?;
    let (_, lambda_min) = j.extreme_eigenvalues();
    let slack = BOUND_SLACK + v.residual * j.norm() / lambda_min.abs();
    if tau < bound - slack {
        return Err(Error::InvalidScheme(format!(
            "search produced tau = {tau} below the spectral bound {bound}; this is a defect"
        )));
    }
    Ok((Some(scheme), v.residual, tau, diagnostics))
}

/// Nonnegative times over a fixed pool that best realize `Σ t_j V_j J V_jᵀ = −J`.
pub fn find_inversion_nnls(
    j: &CouplingMatrix,
    pool: &CandidatePool,
    tol: f64,
    max_steps: usize,
) -> Result<SearchResult> {
    check_inputs(j, pool)?;
    let n = j.n();
    let target = -upper_blocks(j.matrix(), n);
    let columns: Vec<DVector<f64>> = pool
        .assemblies
        .iter()
        .map(|a| conjugated_column(j, a))
        .collect();
    let design = DMatrix::from_columns(&columns);
    let solve = solve_times(&design, &target, max_steps)?;
    let (scheme, residual, tau, diagnostics) = assemble(j, &pool.assemblies, &solve, tol)?;
    Ok(SearchResult {
        scheme,
        residual,
        tau,
        iterations: solve.iterations,
        seed: pool.seed,
        objective_history: vec![solve.objective],
        diagnostics,
    })
}

/// Column generation: add the best of a batch of random octahedral
/// assemblies until the pool is feasible or holds `max_pool` candidates.
pub fn greedy_pool_growth(
    j: &CouplingMatrix,
    base_pool: &CandidatePool,
    target_tol: f64,
    max_pool: usize,
) -> Result<SearchResult> {
    check_inputs(j, base_pool)?;
    let n = j.n();
    let group = octahedral_group();
    let mut rng = ChaCha8Rng::seed_from_u64(base_pool.seed);
    let target = -upper_blocks(j.matrix(), n);
    let mut assemblies = base_pool.assemblies.clone();
    let mut columns: Vec<DVector<f64>> = assemblies.iter().map(|a| conjugated_column(j, a)).collect();
    let mut history = Vec::new();
    let mut rounds = 0;
    let scale = target.norm();

    loop {
        let design = DMatrix::from_columns(&columns);
        let solve = solve_times(&design, &target, DEFAULT_MAX_STEPS)?;
        if let Some(&last) = history.last() {
            // more columns can only lower the optimum
            assert!(
                solve.objective <= last + 1e-12,
                "NNLS objective increased from {last} to {}",
                solve.objective
            );
        }
        history.push(solve.objective);
        let feasible = solve.objective <= target_tol;
        if feasible || assemblies.len() >= max_pool || rounds >= max_pool {
            let (scheme, residual, tau, mut diagnostics) = assemble(j, &assemblies, &solve, target_tol)?;
            if scheme.is_none() && !feasible {
                diagnostics.push(format!(
                    "stopped with {} candidates after {rounds} rounds",
                    assemblies.len()
                ));
            }
            return Ok(SearchResult {
                scheme,
                residual,
                tau,
                iterations: rounds,
                seed: base_pool.seed,
                objective_history: history,
                diagnostics,
            });
        }
        rounds += 1;
        let batch: Vec<Vec<Rotation3>> = (0..CANDIDATES_PER_ROUND)
            .map(|_| random_assembly(&group, n, &mut rng))
            .collect();
        let mut best: Option<(f64, Vec<Rotation3>, DVector<f64>)> = None;
        for cand in batch {
            let col = conjugated_column(j, &cand);
            let score = col.dot(&solve.residual);
            if score > 1e-12 * scale * col.norm() && best.as_ref().is_none_or(|b| score > b.0) {
                best = Some((score, cand, col));
            }
        }
        if let Some((_, cand, col)) = best {
            assemblies.push(cand);
            columns.push(col);
        }
    }
}
