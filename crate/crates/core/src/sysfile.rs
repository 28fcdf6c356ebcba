//! TOML system files.
//!
//! ```toml
//! name = "planar rotor"
//! proper_action = true
//! hamiltonian = "(q1*p2 - q2*p1) + q1^2 + q2^2 + p1^2 + p2^2"
//!
//! [phase_space]
//! dof = 2
//! coordinates = ["q1", "q2", "p1", "p2"]
//! periodic = []
//!
//! [algebra]
//! dim = 1
//! structure_constants = []      # [i, j, k, value], 1-based, i < j
//! inner_product = [[1.0]]
//!
//! [[generators]]
//! label = "rotation"
//! A = [[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0]]
//! ```
//!
//! Every generator may omit `A` and `b` (zero) and `c` (zero). Moment
//! constants are re-solved on load for equivariance.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use toml::Spanned;

use crate::expr;
use crate::liealg::{AlgebraError, LieAlgebra};
use crate::linalg::RankPolicy;
use crate::phasespace::{ActionGenerator, Numerics, PhaseSpace, SystemDef, SystemError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadErrorKind {
    /// Malformed TOML, wrong shapes or an unparseable expression.
    Parse,
    /// Well-formed file that fails a mathematical validator.
    Validation,
}

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[error("{}{message}", location(*line, *column))]
pub struct LoadError {
    pub kind: LoadErrorKind,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

fn location(line: Option<usize>, column: Option<usize>) -> String {
    match (line, column) {
        (Some(l), Some(c)) => format!("line {l}, column {c}: "),
        (Some(l), None) => format!("line {l}: "),
        _ => String::new(),
    }
}

impl LoadError {
    fn at(kind: LoadErrorKind, text: &str, offset: Option<usize>, message: String) -> LoadError {
        let (line, column) = match offset {
            Some(o) => {
                let o = o.min(text.len());
                let before = &text[..o];
                let line = before.matches('\n').count() + 1;
                let column = before.rfind('\n').map_or(o, |nl| o - nl - 1) + 1;
                (Some(line), Some(column))
            }
            None => (None, None),
        };
        LoadError { kind, line, column, message }
    }
}

/// Canonical content of a system file; the digest is taken over this.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemFile {
    pub name: String,
    pub proper_action: bool,
    pub hamiltonian: String,
    pub numerics: NumericsFile,
    pub phase_space: PhaseSpaceFile,
    pub algebra: AlgebraFile,
    pub generators: Vec<GeneratorFile>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsFile {
    pub rank_relative: Option<f64>,
    pub rank_absolute: Option<f64>,
    pub definiteness: Option<f64>,
    pub residual_tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpaceFile {
    pub dof: usize,
    pub coordinates: Vec<String>,
    #[serde(default)]
    pub periodic: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraFile {
    pub dim: usize,
    #[serde(default)]
    pub labels: Option<Vec<String>>,
    #[serde(default)]
    pub structure_constants: Vec<(usize, usize, usize, f64)>,
    #[serde(default)]
    pub inner_product: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorFile {
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default, rename = "A")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub b: Option<Vec<f64>>,
    #[serde(default)]
    pub c: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    name: String,
    #[serde(default)]
    proper_action: bool,
    hamiltonian: Spanned<String>,
    #[serde(default)]
    numerics: Option<Spanned<NumericsFile>>,
    phase_space: Spanned<PhaseSpaceFile>,
    algebra: Spanned<AlgebraFile>,
    #[serde(default)]
    generators: Vec<Spanned<GeneratorFile>>,
}

/// Byte ranges used to anchor validation messages.
#[derive(Debug, Clone, Default)]
struct Anchors {
    hamiltonian: Option<Range<usize>>,
    numerics: Option<Range<usize>>,
    phase_space: Option<Range<usize>>,
    algebra: Option<Range<usize>>,
    generators: Vec<Range<usize>>,
}

/// A validated system with its canonical file and digest.
#[derive(Debug, Clone)]
pub struct LoadedSystem {
    pub file: SystemFile,
    pub system: SystemDef,
    /// Hex SHA-256 of the canonical JSON encoding of `file`.
    pub digest: String,
}

impl SystemFile {
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("system file serializes");
        hex::encode(Sha256::digest(&json))
    }
}

pub fn parse_system_file(text: &str) -> Result<SystemFile, LoadError> {
    parse_raw(text).map(|(f, _)| f)
}

fn parse_raw(text: &str) -> Result<(SystemFile, Anchors), LoadError> {
    let raw: RawFile = toml::from_str(text).map_err(|e| {
        LoadError::at(LoadErrorKind::Parse, text, e.span().map(|s| s.start), e.message().to_string())
    })?;
    let anchors = Anchors {
        hamiltonian: Some(raw.hamiltonian.span()),
        numerics: raw.numerics.as_ref().map(|n| n.span()),
        phase_space: Some(raw.phase_space.span()),
        algebra: Some(raw.algebra.span()),
        generators: raw.generators.iter().map(|g| g.span()).collect(),
    };
    let file = SystemFile {
        name: raw.name,
        proper_action: raw.proper_action,
        hamiltonian: raw.hamiltonian.into_inner(),
        numerics: raw.numerics.map(|n| n.into_inner()).unwrap_or_default(),
        phase_space: raw.phase_space.into_inner(),
        algebra: raw.algebra.into_inner(),
        generators: raw.generators.into_iter().map(|g| g.into_inner()).collect(),
    };
    Ok((file, anchors))
}

pub fn load_system(text: &str) -> Result<LoadedSystem, LoadError> {
    let (file, anchors) = parse_raw(text)?;
    let system = build(&file, &anchors, text)?;
    let digest = file.digest();
    Ok(LoadedSystem { file, system, digest })
}

pub fn load_system_path(path: &std::path::Path) -> Result<LoadedSystem, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|e| LoadError {
        kind: LoadErrorKind::Parse,
        line: None,
        column: None,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    load_system(&text)
}

/// Builds the system from canonical content with no source anchors.
pub fn build_system(file: &SystemFile) -> Result<SystemDef, LoadError> {
    build(file, &Anchors::default(), "")
}

fn build(file: &SystemFile, anchors: &Anchors, text: &str) -> Result<SystemDef, LoadError> {
    let start = |r: &Option<Range<usize>>| r.as_ref().map(|r| r.start);
    let parse_err = |at: Option<usize>, msg: String| LoadError::at(LoadErrorKind::Parse, text, at, msg);
    let invalid = |at: Option<usize>, msg: String| LoadError::at(LoadErrorKind::Validation, text, at, msg);

    let ps = &file.phase_space;
    let ps_at = start(&anchors.phase_space);
    if ps.coordinates.len() != 2 * ps.dof {
        return Err(parse_err(
            ps_at,
            format!("dof = {} needs {} coordinates, got {}", ps.dof, 2 * ps.dof, ps.coordinates.len()),
        ));
    }
    let space = PhaseSpace::new(ps.coordinates.clone(), &ps.periodic).map_err(|e| parse_err(ps_at, e.to_string()))?;
    let dim = space.dim();

    let numerics = numerics_from(&file.numerics).map_err(|m| parse_err(start(&anchors.numerics), m))?;

    let al = &file.algebra;
    let al_at = start(&anchors.algebra);
    let d = al.dim;
    let labels = al.labels.clone().unwrap_or_else(|| (1..=d).map(|i| format!("e{i}")).collect());
    let metric = match &al.inner_product {
        None => DMatrix::identity(d, d),
        Some(rows) => dense(rows, d, d).map_err(|m| parse_err(al_at, format!("inner_product: {m}")))?,
    };
    let mut triples = Vec::with_capacity(al.structure_constants.len());
    for &(i, j, k, v) in &al.structure_constants {
        if i == 0 || j == 0 || k == 0 {
            return Err(parse_err(al_at, format!("structure constant [{i}, {j}, {k}, {v}]: indices are 1-based")));
        }
        triples.push((i - 1, j - 1, k - 1, v));
    }
    let algebra = LieAlgebra::new(labels, &triples, metric).map_err(|e| {
        let kind = match e {
            AlgebraError::Jacobi { .. } | AlgebraError::MetricNotPositive { .. } => LoadErrorKind::Validation,
            _ => LoadErrorKind::Parse,
        };
        LoadError::at(kind, text, al_at, algebra_message(&e))
    })?;

    if file.generators.len() != d {
        return Err(parse_err(al_at, format!("algebra has dim = {d} but {} generators are given", file.generators.len())));
    }
    let gen_at = |i: usize| anchors.generators.get(i).map(|r| r.start);
    let mut generators = Vec::with_capacity(d);
    for (i, g) in file.generators.iter().enumerate() {
        let a = match &g.a {
            None => DMatrix::zeros(dim, dim),
            Some(rows) => dense(rows, dim, dim).map_err(|m| parse_err(gen_at(i), format!("generator {}: A: {m}", i + 1)))?,
        };
        let b = match &g.b {
            None => DVector::zeros(dim),
            Some(v) if v.len() == dim => DVector::from_column_slice(v),
            Some(v) => {
                return Err(parse_err(gen_at(i), format!("generator {}: b has length {}, expected {dim}", i + 1, v.len())))
            }
        };
        let label = g.label.clone().unwrap_or_else(|| format!("generator {}", i + 1));
        generators.push(ActionGenerator::new(label, a, b, g.c.unwrap_or(0.0)));
    }

    let h = expr::parse(&file.hamiltonian, ps.coordinates.as_slice()).map_err(|e| {
        // Offset inside the string literal, skipping the opening quote.
        let at = anchors.hamiltonian.as_ref().map(|r| r.start + 1 + e.offset);
        parse_err(at, format!("hamiltonian: {e}"))
    })?;

    let system = SystemDef::new(file.name.clone(), space, algebra, generators, h, numerics).map_err(|e| {
        let at = match &e {
            SystemError::GeneratorShape { index, .. }
            | SystemError::GeneratorNonFinite { index }
            | SystemError::NotSymplectic { index, .. }
            | SystemError::PeriodicMixing { index, .. }
            | SystemError::PeriodicMoment { index, .. } => gen_at(*index),
            SystemError::NotEquivariant { i, .. } => gen_at(*i),
            SystemError::InconsistentConstants { .. } | SystemError::GeneratorCount { .. } => al_at,
            SystemError::PeriodicHamiltonian { .. }
            | SystemError::HamiltonianArity { .. }
            | SystemError::NotInvariant { .. }
            | SystemError::Eval(_) => start(&anchors.hamiltonian),
            SystemError::OddDimension(_)
            | SystemError::DuplicateCoordinate(_)
            | SystemError::ReservedCoordinate(_)
            | SystemError::UnknownPeriodic(_) => ps_at,
        };
        invalid(at, e.to_string())
    })?;
    Ok(system.with_proper_action(file.proper_action))
}

fn algebra_message(e: &AlgebraError) -> String {
    // Report indices 1-based, as written in the file.
    match *e {
        AlgebraError::Jacobi { i, j, k, residual } => {
            format!("Jacobi identity fails for (e{}, e{}, e{}): residual {residual:e}", i + 1, j + 1, k + 1)
        }
        AlgebraError::IndexOutOfRange { i, j, k, dim } => {
            format!("structure constant ({}, {}, {}) is out of range for dimension {dim}", i + 1, j + 1, k + 1)
        }
        AlgebraError::NotUpperTriangular { i, j, k } => {
            format!("structure constant ({}, {}, {}) must have i < j", i + 1, j + 1, k + 1)
        }
        AlgebraError::Duplicate { i, j, k } => format!("structure constant ({}, {}, {}) given twice", i + 1, j + 1, k + 1),
        AlgebraError::NonFinite { i, j, k } => format!("structure constant ({}, {}, {}) is not finite", i + 1, j + 1, k + 1),
        _ => e.to_string(),
    }
}

fn numerics_from(n: &NumericsFile) -> Result<Numerics, String> {
    let d = Numerics::default();
    let pick = |v: Option<f64>, default: f64, name: &str| match v {
        None => Ok(default),
        Some(x) if x.is_finite() && x > 0.0 => Ok(x),
        Some(x) => Err(format!("numerics.{name} must be positive and finite, got {x}")),
    };
    Ok(Numerics {
        rank: RankPolicy {
            relative: pick(n.rank_relative, d.rank.relative, "rank_relative")?,
            absolute: pick(n.rank_absolute, d.rank.absolute, "rank_absolute")?,
        },
        definiteness: pick(n.definiteness, d.definiteness, "definiteness")?,
        residual_tolerance: pick(n.residual_tolerance, d.residual_tolerance, "residual_tolerance")?,
    })
}

fn dense(rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DMatrix<f64>, String> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(format!("expected a {nrows}x{ncols} matrix"));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}
