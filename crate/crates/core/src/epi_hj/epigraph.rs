use crate::dynamics::VectorField;
use crate::error::{Error, Result};
use crate::grid::{GridField, GridSpec};
use crate::kernels::{capt_field, viab_field};
use crate::sets::SetOracle;
use crate::is_inf;

use super::{LagrangianProblem, Obstacle};

/// Which value function the epigraph computation produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpigraphMode {
    /// Viability kernel of the epigraph: `u^⊤`.
    Sup,
    /// Capture basin of the epigraph: `u^⊥`.
    Inf,
}

/// `g(x, y) = (f(x), −a y − l(x, f(x)))` on `R^{n+1}`.
pub fn lifted_field(p: &LagrangianProblem) -> VectorField {
    let n = p.dim();
    let f = p.f.clone();
    let l = p.l.clone();
    let a = p.a;
    VectorField::new(n + 1, move |t, z, out| {
        let (x, y) = z.split_at(n);
        f.eval_into(t, x, &mut out[..n]);
        let cost = l.eval(x, &out[..n]);
        out[n] = -a * y[0] - cost;
    })
}

/// `{(x, y) : y ≥ u(x)}` as a set oracle on `R^{n+1}`.
pub fn epigraph_set(p: &LagrangianProblem) -> SetOracle {
    let n = p.dim();
    match &p.u {
        Obstacle::Function { lipschitz, .. } => {
            let u = p.u.clone();
            let lip = (1.0 + lipschitz * lipschitz).sqrt();
            SetOracle::sublevel(n + 1, lip, move |z| {
                let v = u.eval(&z[..n]);
                if is_inf(v) {
                    f64::INFINITY
                } else {
                    v - z[n]
                }
            })
        }
        Obstacle::Indicator(c) => SetOracle::Product(vec![c.clone(), SetOracle::interval(0.0, f64::INFINITY)]),
    }
}

/// Lower envelope of the kernel (`Sup`) or capture basin (`Inf`) of the
/// epigraph, computed on a grid over `(x, y)` whose last axis is `y`.
///
/// The result lives on the state grid: for each state node, the least `y`
/// node in the set. The `y` range must cover `[0, value_cap]`; a column
/// whose envelope reaches its top node (or that has no member) raises
/// `CapTooSmall`.
pub fn epigraph_value_field(
    p: &LagrangianProblem,
    grid: &GridSpec,
    mode: EpigraphMode,
    t_max: f64,
    h: f64,
) -> Result<GridField> {
    let n = p.dim();
    if grid.dim() != n + 1 {
        return Err(Error::DimMismatch {
            expected: n + 1,
            got: grid.dim(),
        });
    }
    if grid.lo[n] > 0.0 || grid.hi[n] < p.value_cap {
        return Err(Error::InvalidInput(format!(
            "y-range [{}, {}] must cover [0, {}]",
            grid.lo[n], grid.hi[n], p.value_cap
        )));
    }
    let g = lifted_field(p);
    let ep = epigraph_set(p);
    let times = match mode {
        EpigraphMode::Sup => viab_field(&g, &ep, grid, t_max, h)?,
        EpigraphMode::Inf => capt_field(&g, &ep, grid, t_max, h)?,
    };
    let member = |k: usize| match mode {
        EpigraphMode::Sup => times.in_domain[k] && is_inf(times.values[k]),
        EpigraphMode::Inf => !is_inf(times.values[k]),
    };
    let state = GridSpec::new(grid.lo[..n].to_vec(), grid.hi[..n].to_vec(), grid.counts[..n].to_vec())?;
    let ny = grid.counts[n];
    let mut values = Vec::with_capacity(state.len());
    for s in 0..state.len() {
        let first = (0..ny).find(|&j| member(s * ny + j));
        match first {
            Some(j) if j + 1 < ny => values.push(grid.coord(n, j)),
            _ => return Err(Error::CapTooSmall { x: state.node(s) }),
        }
    }
    let in_domain = vec![true; state.len()];
    Ok(GridField::new(state, values, in_domain))
}
