use crate::error::{Error, Result};
use crate::sets::{h_ladder, tangent_residual, SetOracle};

use super::CharProblem;

/// Smallest step of the fiber-residual ladder, relative to `h`.
const LADDER_DEPTH: f64 = 1e-6;
/// Cone residual and membership tolerance.
const INVARIANCE_TOL: f64 = 1e-6;

/// Outcome of the checks on an output constraint `Φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceReport {
    /// Samples with `y ∈ Φ(t, x)` on which the cone test ran.
    pub checked: usize,
    /// Samples skipped because `y ∉ Φ(t, x)`.
    pub skipped: usize,
    pub max_cone_residual: f64,
    pub cone_failures: usize,
    /// Samples with `u₀(x) ∉ Φ(0, x)`.
    pub initial_failures: usize,
    /// Boundary samples with `v_Γ(t, x) ∉ Φ(t, x)`.
    pub boundary_failures: usize,
    pub holds: bool,
}

/// `min_h d(y + h g, Φ(t + h, x + h φ)) / h` over a ladder down to
/// `1e-6 · h`: the residual of `g ∈ DΦ(t, x, y)(1, φ)`.
fn fiber_residual(prob: &CharProblem, phi_map: &dyn Fn(f64, &[f64]) -> SetOracle, t: f64, x: &[f64], y: &[f64], h: f64) -> f64 {
    let mut fx = vec![0.0; x.len()];
    prob.drift.eval_into(t, x, y, &mut fx);
    let mut gy = vec![0.0; y.len()];
    (prob.g)(t, x, y, &mut gy);
    h_ladder(LADDER_DEPTH * h, h)
        .into_iter()
        .map(|s| {
            let xs: Vec<f64> = x.iter().zip(&fx).map(|(a, v)| a + s * v).collect();
            let ys: Vec<f64> = y.iter().zip(&gy).map(|(a, v)| a + s * v).collect();
            phi_map(t + s, &xs).distance(&ys) / s
        })
        .fold(f64::INFINITY, f64::min)
}

/// Checks on samples `(t, x, y)` that `g` points into the fibers of `Φ`
/// along `(1, φ)`, that `u₀(x) ∈ Φ(0, x)`, and that `v_Γ(t, x) ∈ Φ(t, x)`
/// at samples on `∂K`.
pub fn phi_invariance_check(prob: &CharProblem, samples: &[(f64, Vec<f64>, Vec<f64>)], h: f64) -> Result<InvarianceReport> {
    let phi_map = prob
        .phi_constraint
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("no output constraint declared".into()))?;
    if !(h > 0.0) {
        return Err(Error::InvalidInput(format!("step must be positive, got {h}")));
    }
    let mut rep = InvarianceReport {
        checked: 0,
        skipped: 0,
        max_cone_residual: 0.0,
        cone_failures: 0,
        initial_failures: 0,
        boundary_failures: 0,
        holds: true,
    };
    for (t, x, y) in samples {
        if x.len() != prob.x_dim || y.len() != prob.y_dim {
            return Err(Error::DimMismatch {
                expected: prob.x_dim + prob.y_dim,
                got: x.len() + y.len(),
            });
        }
        let fiber = phi_map(*t, x);
        if fiber.distance(y) > INVARIANCE_TOL {
            rep.skipped += 1;
        } else {
            rep.checked += 1;
            let r = fiber_residual(prob, phi_map.as_ref(), *t, x, y, h);
            rep.max_cone_residual = rep.max_cone_residual.max(r);
            if r > INVARIANCE_TOL {
                rep.cone_failures += 1;
            }
        }
        if phi_map(0.0, x).distance(&(prob.data.u0)(x)) > INVARIANCE_TOL {
            rep.initial_failures += 1;
        }
        if prob.k.boundary_distance(x) <= prob.data.x_tol
            && prob.data.at_impulse(*t)
            && fiber.distance(&(prob.data.v_gamma)(*t, x)) > INVARIANCE_TOL
        {
            rep.boundary_failures += 1;
        }
    }
    rep.holds = rep.cone_failures == 0 && rep.initial_failures == 0 && rep.boundary_failures == 0;
    Ok(rep)
}

/// Largest tangent residual of `φ(0, x)` to `K` over the given points; a
/// value near zero supports forward invariance of `K` on the sample.
pub fn check_forward_invariance(prob: &CharProblem, points: &[Vec<f64>]) -> Result<f64> {
    let phi = prob
        .phi()
        .ok_or_else(|| Error::Unsupported("forward invariance needs an output-independent drift".into()))?;
    Ok(points
        .iter()
        .map(|x| tangent_residual(&prob.k, x, &phi.eval(0.0, x), 1e-8, 1e-2))
        .fold(0.0, f64::max))
}
