//! JSON report schema (version 1).

use nalgebra::{DMatrix, DVector};
use relstab::dynamics::{GrowthFit, ProbeConfig, ProbeResult, RadiusSummary};
use relstab::equilibria::{REFINE_TOLERANCE, ORTHOGONALITY_TOLERANCE};
use relstab::liealg::INVARIANCE_TOLERANCE;
use relstab::slice::{Definiteness, Signature, CONTAINMENT_TOLERANCE, DESCENT_TOLERANCE, KERNEL_MATCH_TOLERANCE};
use relstab::{Analysis, LoadedSystem};
use serde::Serialize;

pub const SCHEMA: u32 = 1;

fn vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn columns(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[derive(Serialize)]
pub struct Report {
    pub schema: u32,
    pub tool_version: &'static str,
    pub system: SystemInfo,
    pub thresholds: Thresholds,
    pub input: Input,
    pub equilibrium: Equilibrium,
    pub slice: Slice,
    pub stability: Stability,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe: Option<Probe>,
}

#[derive(Serialize)]
pub struct SystemInfo {
    pub name: String,
    pub digest: String,
    pub coordinates: Vec<String>,
    /// Properness of the action is asserted by the file, never checked.
    pub proper_action_asserted: bool,
}

#[derive(Serialize)]
pub struct Thresholds {
    pub rank_relative: f64,
    pub rank_absolute: f64,
    pub definiteness_relative: f64,
    pub residual_tolerance: f64,
    pub refine_tolerance: f64,
    pub orthogonality: f64,
    pub containment: f64,
    pub descent: f64,
    pub kernel_match: f64,
    pub invariance: f64,
}

#[derive(Serialize)]
pub struct Input {
    pub point: Vec<f64>,
    pub xi: Option<Vec<f64>>,
    pub refine: bool,
}

#[derive(Serialize)]
pub struct Equilibrium {
    pub point: Vec<f64>,
    pub xi: Vec<f64>,
    pub residual: f64,
    pub initial_residual: f64,
    pub mu: Vec<f64>,
    pub isotropy_algebra: Vec<Vec<f64>>,
    pub xi_in_coadjoint_isotropy: bool,
    pub coadjoint_defect: f64,
    pub xi_orthogonal_to_isotropy: bool,
    pub orthogonality_defect: f64,
    pub newton_iterations: usize,
}

#[derive(Serialize)]
pub struct Slice {
    pub kernel_dim: usize,
    pub group_tangent_dim: usize,
    pub isotropy_tangent_dim: usize,
    pub coadjoint_isotropy_dim: usize,
    pub slice_dim: usize,
    pub moment_rank: usize,
    pub omega_det: f64,
    pub kernel: Vec<Vec<f64>>,
    pub isotropy_tangent: Vec<Vec<f64>>,
    pub slice: Vec<Vec<f64>>,
    pub omega: Vec<Vec<f64>>,
    pub hessian: Vec<Vec<f64>>,
}

#[derive(Serialize)]
pub struct Stability {
    pub verdict: &'static str,
    pub definiteness: Definiteness,
    pub eigenvalues: Vec<f64>,
    pub signature: Signature,
    pub threshold: f64,
    pub kernel_match: bool,
    pub kernel_verdict: &'static str,
    pub kernel_eigenvalues: Vec<f64>,
    pub regular_point: bool,
    pub invariance_residual: f64,
    pub descent_defect: f64,
    pub notes: Vec<String>,
}

#[derive(Serialize)]
pub struct Probe {
    pub verdict: relstab::dynamics::ProbeVerdict,
    pub disclaimer: &'static str,
    pub radii: Vec<f64>,
    pub horizon: f64,
    pub dt: f64,
    pub samples_per_radius: usize,
    pub seed: u64,
    pub escape_radius: f64,
    pub offset: Option<Vec<f64>>,
    pub frozen: Vec<String>,
    pub per_radius: Vec<RadiusSummary>,
    pub samples: Vec<Sample>,
    pub growth: Option<GrowthFit>,
    pub orbit_grid_size: usize,
    pub orbit_axis_fallback: bool,
}

#[derive(Serialize)]
pub struct Sample {
    pub radius: f64,
    pub index: usize,
    pub initial: Vec<f64>,
    pub initial_distance: f64,
    pub max_distance: f64,
    pub escape_time: Option<f64>,
    pub max_energy_drift: f64,
    pub max_moment_drift: f64,
}

pub fn build(loaded: &LoadedSystem, input: Input, a: &Analysis) -> Report {
    let sys = &loaded.system;
    let n = sys.numerics();
    let re = &a.equilibrium;
    let r = &a.report;
    Report {
        schema: SCHEMA,
        tool_version: env!("CARGO_PKG_VERSION"),
        system: SystemInfo {
            name: sys.name().to_string(),
            digest: loaded.digest.clone(),
            coordinates: sys.space().names().to_vec(),
            proper_action_asserted: sys.proper_action(),
        },
        thresholds: Thresholds {
            rank_relative: n.rank.relative,
            rank_absolute: n.rank.absolute,
            definiteness_relative: n.definiteness,
            residual_tolerance: n.residual_tolerance,
            refine_tolerance: REFINE_TOLERANCE,
            orthogonality: ORTHOGONALITY_TOLERANCE,
            containment: CONTAINMENT_TOLERANCE,
            descent: DESCENT_TOLERANCE,
            kernel_match: KERNEL_MATCH_TOLERANCE,
            invariance: INVARIANCE_TOLERANCE,
        },
        input,
        equilibrium: Equilibrium {
            point: vec(&re.point),
            xi: vec(&re.xi),
            residual: re.residual,
            initial_residual: a.initial.residual,
            mu: vec(&re.mu),
            isotropy_algebra: columns(re.g_m.basis()),
            xi_in_coadjoint_isotropy: re.xi_in_g_mu,
            coadjoint_defect: re.coadjoint_defect,
            xi_orthogonal_to_isotropy: re.xi_orthogonal_to_g_m,
            orthogonality_defect: re.orthogonality_defect,
            newton_iterations: re.iterations,
        },
        slice: Slice {
            kernel_dim: a.slice.kernel.ncols(),
            group_tangent_dim: a.slice.group_tangent.ncols(),
            isotropy_tangent_dim: a.slice.isotropy_tangent.ncols(),
            coadjoint_isotropy_dim: a.slice.g_mu.rank(),
            slice_dim: a.slice.dim(),
            moment_rank: a.slice.moment_rank,
            omega_det: a.slice.omega_det,
            kernel: columns(&a.slice.kernel),
            isotropy_tangent: columns(&a.slice.isotropy_tangent),
            slice: columns(&a.slice.slice),
            omega: rows(&a.slice.omega),
            hessian: rows(&sys.augmented_hessian(&re.point, &re.xi).unwrap_or_else(|_| DMatrix::zeros(0, 0))),
        },
        stability: Stability {
            verdict: r.verdict.as_str(),
            definiteness: r.slice.definiteness,
            eigenvalues: r.slice.eigenvalues.clone(),
            signature: r.slice.signature,
            threshold: r.slice.threshold,
            kernel_match: r.kernel_match,
            kernel_verdict: r.kernel_verdict.as_str(),
            kernel_eigenvalues: r.kernel.eigenvalues.clone(),
            regular_point: r.regular_point,
            invariance_residual: r.invariance.residual,
            descent_defect: r.descent_defect,
            notes: r.notes.clone(),
        },
        probe: None,
    }
}

pub fn probe(loaded: &LoadedSystem, config: &ProbeConfig, result: &ProbeResult) -> Probe {
    let names = loaded.system.space().names();
    Probe {
        verdict: result.verdict,
        disclaimer: "sampled evidence only: escape refutes stability, containment does not prove it",
        radii: config.radii.clone(),
        horizon: config.horizon,
        dt: config.dt,
        samples_per_radius: config.samples_per_radius,
        seed: config.seed,
        escape_radius: result.escape_radius,
        offset: config.offset.as_ref().map(vec),
        frozen: config.frozen.iter().map(|&i| names[i].clone()).collect(),
        per_radius: result.per_radius.clone(),
        samples: result
            .samples
            .iter()
            .map(|s| Sample {
                radius: s.radius,
                index: s.index,
                initial: vec(&s.initial),
                initial_distance: s.initial_distance,
                max_distance: s.max_distance,
                escape_time: s.escape_time,
                max_energy_drift: s.max_energy_drift,
                max_moment_drift: s.max_moment_drift,
            })
            .collect(),
        growth: result.growth.clone(),
        orbit_grid_size: result.orbit_grid_size,
        orbit_axis_fallback: result.orbit_axis_fallback,
    }
}
