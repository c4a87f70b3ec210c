//! JSON file formats for couplings, schemes and search results.
//!
//! Coupling: `{"n", "W", "A"}` or `{"n", "J"}`. Scheme:
//! `{"kind", "n", "steps": [{"t", "rotations": [3×3, …]}]}` with rotations
//! listed per spin as row-major nested arrays.

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::coupling::{CouplingMatrix, CouplingSpec, TypeMatrix, WeightMatrix};
use crate::error::{Error, Result};
use crate::rotalg::Rotation3;
use crate::schemes::{Scheme, SchemeKind, Step};
use crate::search::SearchResult;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CouplingFile {
    n: usize,
    #[serde(rename = "W")]
    w: Option<Vec<Vec<f64>>>,
    #[serde(rename = "A")]
    a: Option<Vec<Vec<f64>>>,
    #[serde(rename = "J")]
    j: Option<Vec<Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepFile {
    t: f64,
    rotations: Vec<[[f64; 3]; 3]>,
}

#[derive(Deserialize)]
struct SchemeFile {
    kind: String,
    n: usize,
    steps: Vec<StepFile>,
}

fn parse_err(e: serde_json::Error) -> Error {
    Error::Parse(e.to_string())
}

fn dense(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(Error::Parse(format!("{what} is empty")));
    }
    if let Some(r) = rows.iter().position(|r| r.len() != ncols) {
        return Err(Error::Parse(format!(
            "{what} row {r} has {} entries, expected {ncols}",
            rows[r].len()
        )));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

fn nested(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn check_n(n: usize, found: usize) -> Result<()> {
    if n != found {
        return Err(Error::DimensionMismatch { expected: n, found });
    }
    Ok(())
}

pub fn parse_coupling(text: &str) -> Result<CouplingSpec> {
    let f: CouplingFile = serde_json::from_str(text).map_err(parse_err)?;
    match (f.w, f.a, f.j) {
        (Some(w), Some(a), None) => {
            let w = WeightMatrix::new(dense(&w, "W")?)?;
            check_n(f.n, w.n())?;
            let a = dense(&a, "A")?;
            if a.shape() != (3, 3) {
                return Err(Error::InvalidType(format!("A must be 3x3, got {}x{}", a.nrows(), a.ncols())));
            }
            let a = TypeMatrix::new(Matrix3::from_fn(|i, j| a[(i, j)]))?;
            Ok(CouplingSpec::Factored { w, a })
        }
        (None, None, Some(j)) => {
            let j = CouplingMatrix::new(dense(&j, "J")?)?;
            check_n(f.n, j.n())?;
            Ok(CouplingSpec::Raw(j))
        }
        _ => Err(Error::Parse("coupling needs either both \"W\" and \"A\" or only \"J\"".into())),
    }
}

pub fn coupling_to_json(spec: &CouplingSpec) -> Value {
    match spec {
        CouplingSpec::Factored { w, a } => {
            let a = DMatrix::from_fn(3, 3, |i, j| a.matrix()[(i, j)]);
            json!({"n": w.n(), "W": nested(w.matrix()), "A": nested(&a)})
        }
        CouplingSpec::Raw(j) => json!({"n": j.n(), "J": nested(j.matrix())}),
    }
}

pub fn parse_scheme(text: &str) -> Result<Scheme> {
    let f: SchemeFile = serde_json::from_str(text).map_err(parse_err)?;
    let kind = match f.kind.as_str() {
        "inversion" => SchemeKind::Inversion,
        "decoupling" => SchemeKind::Decoupling,
        other => return Err(Error::Parse(format!("unknown scheme kind {other:?}"))),
    };
    let steps = f
        .steps
        .into_iter()
        .map(|s| {
            let rotations = s
                .rotations
                .iter()
                .map(|r| Rotation3::new(Matrix3::from_fn(|i, j| r[i][j])))
                .collect::<Result<Vec<_>>>()?;
            Ok(Step::new(s.t, rotations))
        })
        .collect::<Result<Vec<_>>>()?;
    Scheme::new(kind, f.n, steps)
}

pub fn scheme_to_json(s: &Scheme) -> Value {
    let steps: Vec<StepFile> = s
        .steps()
        .iter()
        .map(|step| StepFile {
            t: step.t,
            rotations: step
                .rotations
                .iter()
                .map(|r| std::array::from_fn(|i| std::array::from_fn(|j| r.matrix()[(i, j)])))
                .collect(),
        })
        .collect();
    json!({"kind": s.kind().as_str(), "n": s.n(), "steps": steps})
}

/// Scheme JSON plus a `metadata` block; `{"found": false, ...}` without a scheme.
pub fn search_result_to_json(r: &SearchResult) -> Value {
    let metadata = json!({
        "residual": r.residual,
        "iterations": r.iterations,
        "seed": r.seed,
        "tau": r.tau,
        "objective_history": r.objective_history,
        "diagnostics": r.diagnostics,
    });
    match &r.scheme {
        Some(s) => {
            let mut v = scheme_to_json(s);
            v["metadata"] = metadata;
            v
        }
        None => json!({"found": false, "metadata": metadata}),
    }
}
