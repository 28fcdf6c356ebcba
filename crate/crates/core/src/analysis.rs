//! End-to-end pipeline: velocity, optional refinement, slice and verdict.

use nalgebra::DVector;
use thiserror::Error;

use crate::equilibria::{self, RefineError, RelEquilibrium, VelocitySolution};
use crate::expr::EvalError;
use crate::phasespace::SystemDef;
use crate::slice::{self, SliceData, SliceError, StabilityReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("point has dimension {got}, expected {expected}")]
    PointDimension { got: usize, expected: usize },
    #[error("velocity has dimension {got}, expected {expected}")]
    VelocityDimension { got: usize, expected: usize },
    #[error("not a relative equilibrium: |xi_M(m) - X_h(m)| = {residual:e} exceeds {tolerance:e}")]
    NotRelativeEquilibrium { residual: f64, tolerance: f64 },
    #[error(transparent)]
    Refine(#[from] RefineError),
    #[error(transparent)]
    Slice(#[from] SliceError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum VelocityChoice {
    Auto,
    Given(DVector<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    /// Velocity at the input point before any refinement.
    pub initial: VelocitySolution,
    pub equilibrium: RelEquilibrium,
    pub slice: SliceData,
    pub report: StabilityReport,
    /// Newton refinement ran and moved the point or velocity.
    pub refined: bool,
}

/// Points within the residual tolerance are polished by Newton; others are
/// rejected unless `refine` asks to search from them.
pub fn analyze(sys: &SystemDef, m: &DVector<f64>, xi: &VelocityChoice, refine: bool) -> Result<Analysis, AnalysisError> {
    if m.len() != sys.dim() {
        return Err(AnalysisError::PointDimension { got: m.len(), expected: sys.dim() });
    }
    let initial = match xi {
        VelocityChoice::Auto => equilibria::solve_velocity(sys, m)?,
        VelocityChoice::Given(x) => {
            if x.len() != sys.algebra().dim() {
                return Err(AnalysisError::VelocityDimension { got: x.len(), expected: sys.algebra().dim() });
            }
            let re = equilibria::characterize(sys, m, x, 0)?;
            VelocitySolution { xi: x.clone(), residual: re.residual, coadjoint_defect: re.coadjoint_defect }
        }
    };
    let tolerance = sys.numerics().residual_tolerance;
    let equilibrium = if initial.residual <= tolerance {
        match equilibria::refine_relative_equilibrium(sys, m, &initial.xi) {
            Ok(re) if re.residual <= initial.residual => re,
            _ => equilibria::characterize(sys, m, &initial.xi, 0)?,
        }
    } else if refine {
        equilibria::refine_relative_equilibrium(sys, m, &initial.xi)?
    } else {
        return Err(AnalysisError::NotRelativeEquilibrium { residual: initial.residual, tolerance });
    };
    let refined = equilibrium.iterations > 0;
    let slice = slice::symplectic_slice(sys, &equilibrium.point)?;
    let report = slice::stability_verdict(sys, &equilibrium)?;
    Ok(Analysis { initial, equilibrium, slice, report, refined })
}
