//! Implicit-midpoint integration, conservation monitors, distances to group
//! orbits and the perturbation probe.
//!
//! The probe is evidence, never a certificate: an escape refutes stability
//! for the sampled neighborhood, while containment only supports it.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::equilibria::{group_action, RelEquilibrium};
use crate::expr::EvalError;
use crate::liealg::Subspace;
use crate::linalg;
use crate::phasespace::{symplectic_matrix, SystemDef};

pub const NEWTON_TOLERANCE: f64 = 1e-13;
pub const NEWTON_MAX_ITERATIONS: usize = 20;
pub const MAX_HALVINGS: u32 = 4;
pub const ORBIT_GRID_BUDGET: usize = 10_000;
const ORBIT_REFINE_TOLERANCE: f64 = 1e-9;
/// Grid ticks per axis by dim h; Gauss-Newton polishes from the nearest tick.
const SEED_TICKS: [usize; 3] = [512, 64, 16];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("time step must be finite and non-negative, got {0}")]
    BadStep(f64),
    #[error("implicit midpoint Newton solve failed at t = {time} even after {halvings} halvings")]
    NoConvergence { time: f64, halvings: u32 },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Newton solve of `z' = z + dt X_h((z + z') / 2)` with the exact Jacobian
/// `I - dt/2 Omega Hess h`; returns `None` when it does not converge.
fn midpoint_newton(sys: &SystemDef, z: &DVector<f64>, dt: f64, hess: &mut [f64]) -> Result<Option<DVector<f64>>, EvalError> {
    let n = z.len();
    let omega = symplectic_matrix(n / 2);
    let tol = NEWTON_TOLERANCE * (1.0 + z.norm());
    let mut next = z + sys.vector_field(z.as_slice())? * dt;
    for _ in 0..NEWTON_MAX_ITERATIONS {
        let mid = (z + &next) * 0.5;
        let residual = &next - z - sys.vector_field(mid.as_slice())? * dt;
        sys.energy_hessian_into(mid.as_slice(), hess)?;
        let h = DMatrix::from_row_slice(n, n, hess);
        let jac = DMatrix::identity(n, n) - &omega * h * (0.5 * dt);
        let Some(delta) = jac.lu().solve(&residual) else { return Ok(None) };
        next -= &delta;
        if !next.iter().all(|x| x.is_finite()) {
            return Ok(None);
        }
        if delta.norm() <= tol {
            return Ok(Some(next));
        }
    }
    Ok(None)
}

/// One implicit-midpoint step; on Newton failure the step is split into
/// `2^k` substeps for `k` up to 4.
pub fn step_implicit_midpoint(sys: &SystemDef, z: &DVector<f64>, dt: f64) -> Result<DVector<f64>, StepError> {
    if !dt.is_finite() || dt < 0.0 {
        return Err(StepError::BadStep(dt));
    }
    if dt == 0.0 {
        return Ok(z.clone());
    }
    let mut hess = vec![0.0; z.len() * z.len()];
    'halving: for k in 0..=MAX_HALVINGS {
        let pieces = 1usize << k;
        let h = dt / pieces as f64;
        let mut cur = z.clone();
        for _ in 0..pieces {
            match midpoint_newton(sys, &cur, h, &mut hess)? {
                Some(next) => cur = next,
                None => continue 'halving,
            }
        }
        return Ok(cur);
    }
    Err(StepError::NoConvergence { time: 0.0, halvings: MAX_HALVINGS })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub horizon: f64,
    pub stride: usize,
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub energy: Vec<f64>,
    pub moments: Vec<DVector<f64>>,
    pub moment_norm_sq: Vec<f64>,
}

impl Trajectory {
    fn new(dt: f64, horizon: f64, stride: usize) -> Trajectory {
        Trajectory {
            dt,
            horizon,
            stride,
            times: Vec::new(),
            states: Vec::new(),
            energy: Vec::new(),
            moments: Vec::new(),
            moment_norm_sq: Vec::new(),
        }
    }

    fn record(&mut self, sys: &SystemDef, t: f64, z: &DVector<f64>) -> Result<(), EvalError> {
        self.times.push(t);
        self.energy.push(sys.energy(z.as_slice())?);
        let mu = sys.moment_map(z);
        self.moment_norm_sq.push(sys.algebra().dual_norm_sq(&mu));
        self.moments.push(mu);
        self.states.push(z.clone());
        Ok(())
    }

    /// `max_k |h(z_k) - h(z_0)|`
    pub fn max_energy_drift(&self) -> f64 {
        let e0 = self.energy.first().copied().unwrap_or(0.0);
        self.energy.iter().map(|e| (e - e0).abs()).fold(0.0, f64::max)
    }

    /// `max_k |Phi_i(z_k) - Phi_i(z_0)|` over all components.
    pub fn max_moment_drift(&self) -> f64 {
        let Some(m0) = self.moments.first() else { return 0.0 };
        self.moments.iter().map(|m| (m - m0).amax()).fold(0.0, f64::max)
    }

    /// CSV with header `t,<coords>,h,phi_1..phi_d,phi_norm_sq`.
    pub fn write_csv<W: Write>(&self, names: &[String], mut out: W) -> io::Result<()> {
        let d = self.moments.first().map_or(0, |m| m.len());
        let mut header: Vec<String> = vec!["t".into()];
        header.extend(names.iter().cloned());
        header.push("h".into());
        header.extend((1..=d).map(|i| format!("phi_{i}")));
        header.push("phi_norm_sq".into());
        writeln!(out, "{}", header.join(","))?;
        for k in 0..self.times.len() {
            let mut row = vec![self.times[k]];
            row.extend(self.states[k].iter());
            row.push(self.energy[k]);
            row.extend(self.moments[k].iter());
            row.push(self.moment_norm_sq[k]);
            let cells: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

fn step_count(horizon: f64, dt: f64) -> Result<usize, StepError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(StepError::BadStep(dt));
    }
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(StepError::BadStep(horizon));
    }
    Ok((horizon / dt).round() as usize)
}

/// Integrates to `horizon`, recording every `stride` steps and the last one.
pub fn integrate(sys: &SystemDef, z0: &DVector<f64>, horizon: f64, dt: f64, stride: usize) -> Result<Trajectory, StepError> {
    let steps = step_count(horizon, dt)?;
    let stride = stride.max(1);
    let mut traj = Trajectory::new(dt, horizon, stride);
    let mut z = z0.clone();
    traj.record(sys, 0.0, &z)?;
    for k in 1..=steps {
        z = step_implicit_midpoint(sys, &z, dt).map_err(|e| match e {
            StepError::NoConvergence { halvings, .. } => StepError::NoConvergence { time: (k - 1) as f64 * dt, halvings },
            other => other,
        })?;
        if k % stride == 0 || k == steps {
            traj.record(sys, k as f64 * dt, &z)?;
        }
    }
    Ok(traj)
}

/// `sum_i <Phi(z), eta_i>^2` over a Q-orthonormal basis of `h`; bounded by
/// `|Phi(z)|^2` in the dual metric.
pub fn projected_moment_sq(sys: &SystemDef, h: &Subspace, z: &DVector<f64>) -> f64 {
    let mu = sys.moment_map(z);
    h.vectors().iter().map(|eta| mu.dot(eta).powi(2)).sum()
}

/// Distance from phase-space points to the orbit `H.m`, with `H` generated
/// by a Q-orthonormal basis of `h`.
#[derive(Debug, Clone)]
pub struct OrbitSampler<'a> {
    sys: &'a SystemDef,
    m: DVector<f64>,
    h: Subspace,
    /// Orbit points `a.m` on the parameter grid, identity first.
    grid: Vec<DVector<f64>>,
    /// Sampling fell back to one-parameter subgroups (dim h > 3).
    pub axis_fallback: bool,
}

impl<'a> OrbitSampler<'a> {
    pub fn new(sys: &'a SystemDef, m: &DVector<f64>, h: Subspace) -> OrbitSampler<'a> {
        let k = h.rank();
        let basis = h.basis().clone();
        let mut grid = vec![m.clone()];
        let axis_fallback = k > 3;
        let exp_point = |t: &[f64]| {
            let xi = &basis * DVector::from_column_slice(t);
            group_action(sys, &xi, 1.0, m)
        };
        if k > 0 && !axis_fallback {
            let per_axis = ((ORBIT_GRID_BUDGET as f64).powf(1.0 / k as f64).floor() as usize).min(SEED_TICKS[k - 1]);
            let ticks: Vec<f64> = (0..per_axis)
                .map(|i| -std::f64::consts::PI + 2.0 * std::f64::consts::PI * i as f64 / per_axis as f64)
                .collect();
            let mut index = vec![0usize; k];
            'grid: loop {
                let t: Vec<f64> = index.iter().map(|&i| ticks[i]).collect();
                if t.iter().any(|&x| x != 0.0) {
                    grid.push(exp_point(&t));
                }
                for slot in index.iter_mut() {
                    *slot += 1;
                    if *slot < per_axis {
                        continue 'grid;
                    }
                    *slot = 0;
                }
                break;
            }
        } else if axis_fallback {
            let per_axis = ORBIT_GRID_BUDGET / k;
            for axis in 0..k {
                for i in 0..per_axis {
                    let mut t = vec![0.0; k];
                    t[axis] = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * i as f64 / per_axis as f64;
                    if t[axis] != 0.0 {
                        grid.push(exp_point(&t));
                    }
                }
            }
        }
        OrbitSampler { sys, m: m.clone(), h, grid, axis_fallback }
    }

    pub fn grid_size(&self) -> usize {
        self.grid.len()
    }

    pub fn base_point(&self) -> &DVector<f64> {
        &self.m
    }

    /// Wrapped distance from `z` to the sampled orbit, polished by
    /// Gauss-Newton along the group directions.
    pub fn distance(&self, z: &DVector<f64>) -> f64 {
        let space = self.sys.space();
        let (mut best, mut dist) = (self.grid[0].clone(), space.distance(z, &self.grid[0]));
        for p in &self.grid[1..] {
            let d = space.distance(z, p);
            if d < dist {
                dist = d;
                best = p.clone();
            }
        }
        if self.h.rank() == 0 {
            return dist;
        }
        let policy = self.sys.numerics().rank;
        for _ in 0..20 {
            let r = space.displacement(z, &best);
            let jac = self.sys.infinitesimal_action(&best) * self.h.basis();
            let s = linalg::min_norm_solve(&jac, &r, policy);
            if s.norm() < ORBIT_REFINE_TOLERANCE {
                break;
            }
            let mut scale = 1.0;
            let mut improved = false;
            for _ in 0..30 {
                let cand = group_action(self.sys, &(self.h.basis() * &s), scale, &best);
                let d = space.distance(z, &cand);
                if d < dist {
                    dist = d;
                    best = cand;
                    improved = true;
                    break;
                }
                scale *= 0.5;
            }
            if !improved {
                break;
            }
        }
        dist
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeConfig {
    pub radii: Vec<f64>,
    pub horizon: f64,
    pub dt: f64,
    pub samples_per_radius: usize,
    pub seed: u64,
    /// Escape radius is `escape_factor * max(radii)`.
    pub escape_factor: f64,
    /// Fixed displacement added to every initial condition.
    pub offset: Option<DVector<f64>>,
    /// Coordinates left unperturbed by the random sphere samples.
    pub frozen: Vec<usize>,
    /// Orbit distances are evaluated every this many steps.
    pub check_every: usize,
    /// Keep full trajectories (at `check_every` resolution).
    pub record: bool,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            radii: vec![1e-3, 1e-2],
            horizon: 100.0,
            dt: 1e-3,
            samples_per_radius: 8,
            seed: 0,
            escape_factor: 100.0,
            offset: None,
            frozen: Vec::new(),
            check_every: 100,
            record: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProbeVerdict {
    NoEscapeObserved,
    EscapeObserved,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutcome {
    pub radius: f64,
    pub index: usize,
    pub initial: DVector<f64>,
    pub initial_distance: f64,
    pub max_distance: f64,
    pub escape_time: Option<f64>,
    /// `(t, orbit distance)` at every check.
    pub distances: Vec<(f64, f64)>,
    pub max_energy_drift: f64,
    pub max_moment_drift: f64,
    pub trajectory: Option<Trajectory>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadiusSummary {
    pub radius: f64,
    pub samples: usize,
    pub escapes: usize,
    pub max_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthFit {
    pub rate: f64,
    pub r_squared: f64,
    pub samples: usize,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub escape_radius: f64,
    pub per_radius: Vec<RadiusSummary>,
    pub samples: Vec<SampleOutcome>,
    pub growth: Option<GrowthFit>,
    pub verdict: ProbeVerdict,
    pub orbit_grid_size: usize,
    pub orbit_axis_fallback: bool,
}

/// Minimum number of escaping samples before a growth rate is fitted.
pub const MIN_ESCAPES_FOR_FIT: usize = 10;

pub fn stability_probe(sys: &SystemDef, re: &RelEquilibrium, config: &ProbeConfig) -> Result<ProbeResult, StepError> {
    let policy = sys.numerics().rank;
    let h = sys.algebra().coadjoint_isotropy(&re.mu, policy);
    let sampler = OrbitSampler::new(sys, &re.point, h);
    let max_radius = config.radii.iter().copied().fold(0.0, f64::max);
    let escape_radius = config.escape_factor * max_radius;
    let steps = step_count(config.horizon, config.dt)?;
    let check_every = config.check_every.max(1);
    let dim = sys.dim();
    let free: Vec<usize> = (0..dim).filter(|i| !config.frozen.contains(i)).collect();

    let jobs: Vec<(usize, f64, usize)> = config
        .radii
        .iter()
        .enumerate()
        .flat_map(|(ri, &r)| (0..config.samples_per_radius).map(move |s| (ri, r, s)))
        .collect();
    let samples: Vec<SampleOutcome> = jobs
        .par_iter()
        .enumerate()
        .map(|(global, &(_, radius, index))| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(global as u64);
            let mut dir = DVector::zeros(dim);
            for &i in &free {
                dir[i] = StandardNormal.sample(&mut rng);
            }
            let norm = dir.norm();
            if norm > 0.0 {
                dir /= norm;
            }
            let mut z = &re.point + dir * radius;
            if let Some(off) = &config.offset {
                z += off;
            }
            run_sample(sys, &sampler, z, radius, index, steps, check_every, escape_radius, config)
        })
        .collect::<Result<_, _>>()?;

    let per_radius = config
        .radii
        .iter()
        .map(|&r| {
            let group: Vec<&SampleOutcome> = samples.iter().filter(|s| s.radius == r).collect();
            RadiusSummary {
                radius: r,
                samples: group.len(),
                escapes: group.iter().filter(|s| s.escape_time.is_some()).count(),
                max_distance: group.iter().map(|s| s.max_distance).fold(0.0, f64::max),
            }
        })
        .collect();
    let escaping: Vec<&SampleOutcome> = samples.iter().filter(|s| s.escape_time.is_some()).collect();
    let growth = if escaping.len() >= MIN_ESCAPES_FOR_FIT { fit_growth(&escaping) } else { None };
    let verdict = if escaping.is_empty() { ProbeVerdict::NoEscapeObserved } else { ProbeVerdict::EscapeObserved };
    Ok(ProbeResult {
        escape_radius,
        per_radius,
        samples,
        growth,
        verdict,
        orbit_grid_size: sampler.grid_size(),
        orbit_axis_fallback: sampler.axis_fallback,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_sample(
    sys: &SystemDef,
    sampler: &OrbitSampler,
    z0: DVector<f64>,
    radius: f64,
    index: usize,
    steps: usize,
    check_every: usize,
    escape_radius: f64,
    config: &ProbeConfig,
) -> Result<SampleOutcome, StepError> {
    let mut traj = Trajectory::new(config.dt, config.horizon, check_every);
    traj.record(sys, 0.0, &z0)?;
    let e0 = traj.energy[0];
    let m0 = traj.moments[0].clone();
    let initial_distance = sampler.distance(&z0);
    let mut distances = vec![(0.0, initial_distance)];
    let mut max_distance = initial_distance;
    let mut escape_time = None;
    let (mut energy_drift, mut moment_drift) = (0.0f64, 0.0f64);
    let mut z = z0.clone();
    for k in 1..=steps {
        let t = k as f64 * config.dt;
        z = step_implicit_midpoint(sys, &z, config.dt)
            .map_err(|e| match e {
                StepError::NoConvergence { halvings, .. } => StepError::NoConvergence { time: t - config.dt, halvings },
                other => other,
            })?;
        if k % check_every == 0 || k == steps {
            let d = sampler.distance(&z);
            distances.push((t, d));
            max_distance = max_distance.max(d);
            energy_drift = energy_drift.max((sys.energy(z.as_slice())? - e0).abs());
            moment_drift = moment_drift.max((sys.moment_map(&z) - &m0).amax());
            if config.record {
                traj.record(sys, t, &z)?;
            }
            if d > escape_radius {
                escape_time = Some(t);
                break;
            }
        }
    }
    Ok(SampleOutcome {
        radius,
        index,
        initial: z0,
        initial_distance,
        max_distance,
        escape_time,
        distances,
        max_energy_drift: energy_drift,
        max_moment_drift: moment_drift,
        trajectory: config.record.then_some(traj),
    })
}

/// Pooled within-sample slope of `log d` against `t` with one intercept per
/// sample, using only the upper half (in log scale) of each escaping run.
fn fit_growth(escaping: &[&SampleOutcome]) -> Option<GrowthFit> {
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    let mut points = 0;
    let mut used = 0;
    let mut windows = Vec::new();
    for s in escaping {
        let logs: Vec<(f64, f64)> = s.distances.iter().filter(|(_, d)| *d > 0.0).map(|&(t, d)| (t, d.ln())).collect();
        let (Some(first), Some(last)) = (logs.first(), logs.last()) else { continue };
        let cut = first.1 + 0.5 * (last.1 - first.1);
        let window: Vec<(f64, f64)> = logs.iter().copied().filter(|&(_, y)| y >= cut).collect();
        if window.len() < 3 {
            continue;
        }
        let n = window.len() as f64;
        let tm = window.iter().map(|p| p.0).sum::<f64>() / n;
        let ym = window.iter().map(|p| p.1).sum::<f64>() / n;
        for &(t, y) in &window {
            sxy += (t - tm) * (y - ym);
            sxx += (t - tm) * (t - tm);
            syy += (y - ym) * (y - ym);
        }
        points += window.len();
        used += 1;
        windows.push((tm, ym, window));
    }
    if used == 0 || sxx == 0.0 {
        return None;
    }
    let rate = sxy / sxx;
    let mut ss_res = 0.0;
    for (tm, ym, window) in &windows {
        for &(t, y) in window {
            let r = (y - ym) - rate * (t - tm);
            ss_res += r * r;
        }
    }
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Some(GrowthFit { rate, r_squared, samples: used, points })
}
