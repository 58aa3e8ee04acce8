use std::io::{self, Write};

use crate::grid::GridField;
use crate::io::{header, write_row};
use crate::linalg::{dot, norm};
use crate::{is_inf, INF};

use super::LagrangianProblem;

/// Relative size of the direction perturbations in the epiderivative stencil.
const STENCIL: f64 = 0.01;

/// `{c, 2c, 4c}` with `c` the largest grid spacing.
pub fn default_ladder(field: &GridField) -> Vec<f64> {
    let c = (0..field.grid.dim()).map(|i| field.grid.spacing(i)).fold(0.0, f64::max);
    vec![c, 2.0 * c, 4.0 * c]
}

/// Lower difference quotient `min (u(x + h v') − u(x)) / h` over the ladder
/// and the stencil `v' ∈ {v, v ± 0.01‖v‖ e_i}`, with multilinear
/// interpolation of the sampled `u`. Probes that leave the grid are skipped;
/// [`INF`] if all do or if `u(x) = +∞`.
pub fn epiderivative(u: &GridField, x: &[f64], v: &[f64], ladder: &[f64]) -> f64 {
    let base = match u.interpolate(x) {
        Some(b) if !is_inf(b) => b,
        _ => return INF,
    };
    let mut dirs = vec![v.to_vec()];
    let bump = STENCIL * norm(v);
    if bump > 0.0 {
        for i in 0..v.len() {
            for sign in [-1.0, 1.0] {
                let mut w = v.to_vec();
                w[i] += sign * bump;
                dirs.push(w);
            }
        }
    }
    let mut best = INF;
    let mut probe = vec![0.0; x.len()];
    for &h in ladder {
        for w in &dirs {
            for i in 0..x.len() {
                probe[i] = x[i] + h * w[i];
            }
            if let Some(val) = u.interpolate(&probe) {
                if !is_inf(val) {
                    best = best.min((val - base) / h);
                }
            }
        }
    }
    best
}

/// Residual and complementarity tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HjTolerance {
    pub residual: f64,
    pub complementarity: f64,
}

impl Default for HjTolerance {
    fn default() -> Self {
        Self {
            residual: 0.05,
            complementarity: 0.05,
        }
    }
}

/// Residuals at one sample; `NaN` marks a clause that does not apply.
#[derive(Debug, Clone, PartialEq)]
pub struct HjRow {
    pub x: Vec<f64>,
    pub residual_fwd: f64,
    pub residual_bwd: f64,
    pub complementarity: f64,
    /// Violated obstacle bound (`v ≥ u` for sup, `0 ≤ v ≤ u` for inf).
    pub bound_violated: bool,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HjReport {
    pub rows: Vec<HjRow>,
    pub tol: HjTolerance,
}

impl HjReport {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| r.violated).count()
    }

    pub fn max_residual_fwd(&self) -> f64 {
        max_finite(self.rows.iter().map(|r| r.residual_fwd))
    }

    pub fn max_residual_bwd(&self) -> f64 {
        max_finite(self.rows.iter().map(|r| r.residual_bwd))
    }

    pub fn max_complementarity(&self) -> f64 {
        max_finite(self.rows.iter().map(|r| r.complementarity))
    }

    /// CSV `x1,...,xn,residual_fwd,residual_bwd,complementarity`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.rows.first().map_or(0, |r| r.x.len());
        writeln!(w, "{}", header(&[], "x", n, &["residual_fwd", "residual_bwd", "complementarity"]))?;
        for r in &self.rows {
            let mut row = r.x.clone();
            row.extend([r.residual_fwd, r.residual_bwd, r.complementarity]);
            write_row(&mut w, row)?;
        }
        Ok(())
    }
}

fn max_finite(it: impl Iterator<Item = f64>) -> f64 {
    it.filter(|v| !v.is_nan()).fold(f64::NEG_INFINITY, f64::max)
}

fn exceeds(v: f64, tol: f64) -> bool {
    !v.is_nan() && v > tol
}

/// Checks a candidate `v` (sampled on a grid) for the supremum problem:
/// `v ≥ u`, the forward inequality `D↑v(x)(f) + l + a v ≤ 0` everywhere, the
/// backward inequality `D↑v(x)(−f) − l − a v ≤ 0` where `u < v − tol`, and
/// the complementarity slack `min((v − u)⁺, (−r_fwd)⁺)`.
pub fn hj_check_sup(p: &LagrangianProblem, v: &GridField, samples: &[Vec<f64>], tol: HjTolerance) -> HjReport {
    let ladder = default_ladder(v);
    let rows = samples
        .iter()
        .filter_map(|x| {
            let vx = v.interpolate(x)?;
            if is_inf(vx) {
                return None;
            }
            let ux = p.u.eval(x);
            let fx = p.f.eval(0.0, x);
            let l = p.l.eval(x, &fx);
            let neg: Vec<f64> = fx.iter().map(|c| -c).collect();
            let fwd = epiderivative(v, x, &fx, &ladder) + l + p.a * vx;
            let bwd = if ux < vx - tol.residual {
                epiderivative(v, x, &neg, &ladder) - l - p.a * vx
            } else {
                f64::NAN
            };
            let comp = (vx - ux).max(0.0).min((-fwd).max(0.0));
            let bound_violated = vx < ux - tol.residual;
            let violated = exceeds(fwd, tol.residual)
                || exceeds(bwd, tol.residual)
                || exceeds(comp, tol.complementarity)
                || bound_violated;
            Some(HjRow {
                x: x.clone(),
                residual_fwd: fwd,
                residual_bwd: bwd,
                complementarity: comp,
                bound_violated,
                violated,
            })
        })
        .collect();
    HjReport { rows, tol }
}

/// Checks a candidate `v` for the stopping problem: `0 ≤ v ≤ u`, the forward
/// inequality where `v < u − tol`, the backward inequality at every sample of
/// `Dom(v)`, and the slack `min((u − v)⁺, |r_fwd|)`.
pub fn hj_check_inf(p: &LagrangianProblem, v: &GridField, samples: &[Vec<f64>], tol: HjTolerance) -> HjReport {
    let ladder = default_ladder(v);
    let rows = samples
        .iter()
        .filter_map(|x| {
            let vx = v.interpolate(x)?;
            if is_inf(vx) {
                return None;
            }
            let ux = p.u.eval(x);
            let fx = p.f.eval(0.0, x);
            let l = p.l.eval(x, &fx);
            let neg: Vec<f64> = fx.iter().map(|c| -c).collect();
            let fwd = if vx < ux - tol.residual {
                epiderivative(v, x, &fx, &ladder) + l + p.a * vx
            } else {
                f64::NAN
            };
            let bwd = epiderivative(v, x, &neg, &ladder) - l - p.a * vx;
            let comp = if fwd.is_nan() {
                0.0
            } else {
                let gap = if is_inf(ux) { INF } else { (ux - vx).max(0.0) };
                gap.min(fwd.abs())
            };
            let bound_violated = vx < -tol.residual || vx > ux + tol.residual;
            let violated = exceeds(fwd, tol.residual)
                || exceeds(bwd, tol.residual)
                || exceeds(comp, tol.complementarity)
                || bound_violated;
            Some(HjRow {
                x: x.clone(),
                residual_fwd: fwd,
                residual_bwd: bwd,
                complementarity: comp,
                bound_violated,
                violated,
            })
        })
        .collect();
    HjReport { rows, tol }
}

/// Sample estimates of the constants of the repeller test for the lifted
/// system on `X × R_+`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepellerReport {
    /// `min ⟨x, f(x)⟩ / (‖x‖ (‖x‖ + 1))` over nonzero samples.
    pub gamma_minus: f64,
    /// `min l(x, f(x)) / (‖x‖ + 1)`.
    pub delta_minus: f64,
    /// `a + γ₋ > 0` and `δ₋ > 0`.
    pub holds: bool,
}

/// Spot-checks the sufficient repeller condition on the samples. A `true`
/// answer is evidence, not a proof.
pub fn repeller_condition(p: &LagrangianProblem, samples: &[Vec<f64>]) -> RepellerReport {
    let mut gamma = f64::INFINITY;
    let mut delta = f64::INFINITY;
    for x in samples {
        let fx = p.f.eval(0.0, x);
        let r = norm(x);
        if r > 0.0 {
            gamma = gamma.min(dot(x, &fx) / r / (r + 1.0));
        }
        delta = delta.min(p.l.eval(x, &fx) / (r + 1.0));
    }
    RepellerReport {
        gamma_minus: gamma,
        delta_minus: delta,
        holds: gamma.is_finite() && delta.is_finite() && p.a + gamma > 0.0 && delta > 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epi_hj::{Lagrangian, Obstacle};
    use crate::fields;
    use crate::grid::GridSpec;

    fn line(f: impl Fn(f64) -> f64) -> GridField {
        GridField::from_fn(GridSpec::line(-2.0, 2.0, 401).unwrap(), |x| f(x[0]))
    }

    #[test]
    fn epiderivative_examples() {
        let sq = line(|x| x * x);
        let lad = default_ladder(&sq);
        assert!((epiderivative(&sq, &[1.0], &[1.0], &lad) - 2.0).abs() < 5e-2);
        let abs = line(f64::abs);
        assert!((epiderivative(&abs, &[0.0], &[1.0], &lad) - 1.0).abs() < 5e-2);
        let ind = line(|x| if (0.0..=1.0).contains(&x) { 0.0 } else { INF });
        assert_eq!(epiderivative(&ind, &[1.0], &[1.0], &lad), INF);
        assert_eq!(epiderivative(&ind, &[1.0], &[-1.0], &lad), 0.0);
    }

    #[test]
    fn constant_field_has_zero_residuals() {
        let p = LagrangianProblem::new(fields::rotation(1.0), Lagrangian::Zero, 0.0, Obstacle::zero());
        let grid = GridSpec::new(vec![-1.0, -1.0], vec![1.0, 1.0], vec![41, 41]).unwrap();
        let v = GridField::from_fn(grid, |_| 3.0);
        let samples = vec![vec![0.2, 0.3], vec![-0.4, 0.1]];
        let rep = hj_check_sup(&p, &v, &samples, HjTolerance::default());
        assert_eq!(rep.violations(), 0);
        assert!(rep.rows.iter().all(|r| r.residual_fwd.abs() < 1e-12));
    }

    #[test]
    fn stopping_check_on_obstacle_itself() {
        // v = u: the forward clause never applies
        let p = LagrangianProblem::new(fields::transport(vec![1.0]), Lagrangian::Zero, 0.0, Obstacle::function(1.0, |x| x[0] + 2.0));
        let v = line(|x| x + 2.0);
        let samples: Vec<Vec<f64>> = (0..9).map(|i| vec![-1.0 + 0.25 * i as f64]).collect();
        let rep = hj_check_inf(&p, &v, &samples, HjTolerance::default());
        assert_eq!(rep.violations(), 0);
        assert!(rep.rows.iter().all(|r| r.residual_fwd.is_nan()));
    }

    #[test]
    fn repeller_examples() {
        let samples: Vec<Vec<f64>> = (1..=20).map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 } * i as f64 * 0.5]).collect();
        let p = LagrangianProblem::new(fields::scaled_identity(1, 1.0), Lagrangian::Constant(1.0), 0.0, Obstacle::zero());
        let rep = repeller_condition(&p, &samples[1..]);
        assert!(rep.holds && rep.gamma_minus >= 0.5 - 1e-12);
        let p = LagrangianProblem::new(fields::scaled_identity(1, 1.0), Lagrangian::Zero, 0.0, Obstacle::zero());
        assert!(!repeller_condition(&p, &samples).holds);
        let p = LagrangianProblem::new(fields::scaled_identity(1, -1.0), Lagrangian::Constant(1.0), 0.0, Obstacle::zero());
        let rep = repeller_condition(&p, &samples[1..]);
        assert!(!rep.holds && rep.gamma_minus <= -0.5);
    }
}
