//! Method of characteristics for first-order systems
//!
//! ```text
//! ∂u/∂t + (∂u/∂x) f(t, x, u) = g(t, x, u)   on R₊ × K
//! u(0, x) = u₀(x),   u(t, ξ) = v_Γ(t, ξ) on ∂K
//! ```
//!
//! For a drift `φ(x)` that does not depend on `u`, every `(t, x)` is reached
//! by exactly one characteristic: following `−φ` backwards from `x` until it
//! leaves `K` (or time runs out) gives the foot `(s, c)` of the
//! characteristic, the data `Ψ(s, c)` is read there and the output equation
//! is integrated forward. For a drift depending on `u` the graph of the
//! (set-valued) solution is sampled by sweeping characteristics forward
//! from the data manifold; crossings are shocks.

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use crate::dynamics::{integrate, VectorField};
use crate::error::{Error, Result};
use crate::io::{header, write_row};
use crate::kernels::exit_time;
use crate::sets::SetOracle;
use crate::INF;

mod demo4d;
mod graph;
mod invariance;

pub use demo4d::{Demo4d, Regime};
pub use graph::{
    default_graph_ladder, gridded_graph,
    frankowska_residual, graph_sample, query_graph, verify_provenance, FrankowskaReport, GraphCloud, ProvenanceReport,
    SeedPlan,
};
pub use invariance::{check_forward_invariance, phi_invariance_check, InvarianceReport};

/// Default tolerance on `s` for the initial slice.
pub const DEFAULT_S_TOL: f64 = 1e-8;
/// Default tolerance for membership of the boundary `∂K`.
pub const DEFAULT_X_TOL: f64 = 1e-6;

type StateData = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type BoundaryFn = Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>;
type JointFn = Arc<dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync>;
type ConstraintFn = Arc<dyn Fn(f64, &[f64]) -> SetOracle + Send + Sync>;

/// Initial and boundary data `Ψ(u₀, v_Γ)`.
#[derive(Clone)]
pub struct BoundaryData {
    pub u0: StateData,
    pub v_gamma: BoundaryFn,
    /// When set, boundary data exist only at these times.
    pub impulse_times: Option<Vec<f64>>,
    pub s_tol: f64,
    pub x_tol: f64,
}

impl BoundaryData {
    pub fn new<U, V>(u0: U, v_gamma: V) -> Self
    where
        U: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        V: Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            u0: Arc::new(u0),
            v_gamma: Arc::new(v_gamma),
            impulse_times: None,
            s_tol: DEFAULT_S_TOL,
            x_tol: DEFAULT_X_TOL,
        }
    }

    pub fn with_impulses(mut self, times: Vec<f64>) -> Self {
        self.impulse_times = Some(times);
        self
    }

    pub fn with_tolerances(mut self, s_tol: f64, x_tol: f64) -> Self {
        self.s_tol = s_tol;
        self.x_tol = x_tol;
        self
    }

    fn at_impulse(&self, s: f64) -> bool {
        match &self.impulse_times {
            None => true,
            Some(ts) => ts.iter().any(|t| (s - t).abs() <= self.s_tol),
        }
    }
}

impl fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundaryData")
            .field("impulse_times", &self.impulse_times)
            .field("s_tol", &self.s_tol)
            .field("x_tol", &self.x_tol)
            .finish_non_exhaustive()
    }
}

/// `Ψ(u₀, v_Γ)(s, c)`: `u₀(c)` on the initial slice `s ≤ s_tol` (this also
/// settles the corner `{0} × ∂K`), `v_Γ(s, c)` when `c` lies on `∂K` within
/// `x_tol` at an admissible time, and `None` otherwise.
pub fn boundary_trace(data: &BoundaryData, s: f64, c: &[f64], k: &SetOracle) -> Option<Vec<f64>> {
    if s <= data.s_tol {
        return Some((data.u0)(c));
    }
    if k.boundary_distance(c) <= data.x_tol && data.at_impulse(s) {
        return Some((data.v_gamma)(s, c));
    }
    None
}

/// Drift of the state along characteristics.
#[derive(Clone)]
pub enum Drift {
    /// `x' = φ(t, x)`, independent of the output.
    Phi(VectorField),
    /// `x' = f(t, x, y)`.
    Full(JointFn),
}

impl Drift {
    pub fn full<F>(f: F) -> Self
    where
        F: Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self::Full(Arc::new(f))
    }

    pub fn eval_into(&self, t: f64, x: &[f64], y: &[f64], out: &mut [f64]) {
        match self {
            Self::Phi(phi) => phi.eval_into(t, x, out),
            Self::Full(f) => f(t, x, y, out),
        }
    }
}

/// A boundary-value problem for the characteristic system
/// `τ' = 1, x' = f(τ, x, y), y' = g(τ, x, y)`.
#[derive(Clone)]
pub struct CharProblem {
    pub drift: Drift,
    pub g: JointFn,
    pub k: SetOracle,
    pub data: BoundaryData,
    /// Optional constraint `Φ(t, x)` on the output.
    pub phi_constraint: Option<ConstraintFn>,
    pub x_dim: usize,
    pub y_dim: usize,
}

impl fmt::Debug for CharProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CharProblem")
            .field("x_dim", &self.x_dim)
            .field("y_dim", &self.y_dim)
            .field("k", &self.k.kind())
            .field("data", &self.data)
            .finish_non_exhaustive()
    }
}

impl CharProblem {
    pub fn new<G>(drift: Drift, g: G, k: SetOracle, data: BoundaryData, y_dim: usize) -> Self
    where
        G: Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        let x_dim = k.dim();
        Self {
            drift,
            g: Arc::new(g),
            k,
            data,
            phi_constraint: None,
            x_dim,
            y_dim,
        }
    }

    pub fn with_constraint<P>(mut self, phi: P) -> Self
    where
        P: Fn(f64, &[f64]) -> SetOracle + Send + Sync + 'static,
    {
        self.phi_constraint = Some(Arc::new(phi));
        self
    }

    pub fn phi(&self) -> Option<&VectorField> {
        match &self.drift {
            Drift::Phi(phi) => Some(phi),
            Drift::Full(_) => None,
        }
    }

    /// The joint field `(f, g)` on `R^{n+p}`.
    pub fn joint_field(&self) -> VectorField {
        let n = self.x_dim;
        let drift = self.drift.clone();
        let g = Arc::clone(&self.g);
        VectorField::new(n + self.y_dim, move |t, z, out| {
            let (x, y) = z.split_at(n);
            let (ox, oy) = out.split_at_mut(n);
            drift.eval_into(t, x, y, ox);
            g(t, x, y, oy);
        })
    }
}

/// `z'(r) = −F(t_end − r, z)`: runs `F` backwards in time from `t_end`.
pub(crate) fn backward_from(field: &VectorField, t_end: f64) -> VectorField {
    let f = field.clone();
    VectorField::new(field.dim(), move |r, z, out| {
        f.eval_into(t_end - r, z, out);
        for v in out.iter_mut() {
            *v = -*v;
        }
    })
}

/// `min(t, τ_K^{−φ}(x))`: how long the backward characteristic from `(t, x)`
/// stays in `K`, capped at `t`.
pub fn backward_exit_time(phi: &VectorField, k: &SetOracle, t: f64, x: &[f64], h: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidInput(format!("time must be nonnegative, got {t}")));
    }
    if t == 0.0 || !k.contains(x) {
        return Ok(0.0);
    }
    let tau = exit_time(&backward_from(phi, t), k, x, t, h)?;
    Ok(tau.min(t))
}

/// The foot of the characteristic through `(t, x)`: `s = t − τ` and
/// `c = ϑ_{−φ}(τ, x)`, with `τ` the capped backward exit time.
pub fn exitor(phi: &VectorField, k: &SetOracle, t: f64, x: &[f64], h: f64) -> Result<(f64, Vec<f64>)> {
    let tau = backward_exit_time(phi, k, t, x, h)?;
    if tau == 0.0 {
        return Ok((t, x.to_vec()));
    }
    let traj = integrate(&backward_from(phi, t), x, 0.0, tau, h)?;
    Ok((t - tau, traj.last_state().to_vec()))
}

/// `min_j τ_{K_j}^{−φ_j}(x_j)` for a drift and a set that split into blocks;
/// each entry pairs the block's field with its set. [`INF`] when no block is
/// left before `t_max`.
pub fn product_exit_time(axes: &[(VectorField, SetOracle)], x: &[f64], t_max: f64, h: f64) -> Result<f64> {
    let total: usize = axes.iter().map(|(f, _)| f.dim()).sum();
    if total != x.len() {
        return Err(Error::DimMismatch {
            expected: total,
            got: x.len(),
        });
    }
    let mut start = 0;
    let mut best = INF;
    for (phi, k) in axes {
        let end = start + phi.dim();
        let tau = exit_time(&phi.reversed(), k, &x[start..end], t_max, h)?;
        best = best.min(tau);
        start = end;
    }
    Ok(best)
}

/// Single-valued solution at `(t, x)` for a drift independent of the output:
/// the output equation is integrated along the characteristic from its foot
/// `(s, c)` with initial value `Ψ(s, c)`. `None` where `Ψ` is empty.
pub fn solve_char(prob: &CharProblem, t: f64, x: &[f64], h: f64) -> Result<Option<Vec<f64>>> {
    let phi = prob
        .phi()
        .ok_or_else(|| Error::Unsupported("solve_char needs an output-independent drift".into()))?;
    let (s, c) = exitor(phi, &prob.k, t, x, h)?;
    let y0 = match boundary_trace(&prob.data, s, &c, &prob.k) {
        Some(y) => y,
        None => return Ok(None),
    };
    if y0.len() != prob.y_dim {
        return Err(Error::DimMismatch {
            expected: prob.y_dim,
            got: y0.len(),
        });
    }
    if t - s <= 0.0 {
        return Ok(Some(y0));
    }
    let mut z0 = c;
    z0.extend_from_slice(&y0);
    let traj = integrate(&prob.joint_field(), &z0, s, t, h)?;
    Ok(Some(traj.last_state()[prob.x_dim..].to_vec()))
}

/// Solution values on an evaluation lattice of times and states.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionField {
    pub x_dim: usize,
    pub y_dim: usize,
    /// `(t, x, u)`; `u` is `None` where `Ψ` is empty.
    pub rows: Vec<(f64, Vec<f64>, Option<Vec<f64>>)>,
}

impl SolutionField {
    /// CSV `t,x1,...,xn,u1,...,up`; empty values print as `nan`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let us: Vec<String> = (1..=self.y_dim).map(|i| format!("u{i}")).collect();
        let us: Vec<&str> = us.iter().map(String::as_str).collect();
        writeln!(w, "{}", header(&["t"], "x", self.x_dim, &us))?;
        for (t, x, u) in &self.rows {
            let mut row = vec![*t];
            row.extend_from_slice(x);
            match u {
                Some(u) => row.extend_from_slice(u),
                None => row.extend(std::iter::repeat(f64::NAN).take(self.y_dim)),
            }
            write_row(&mut w, row)?;
        }
        Ok(())
    }
}

/// [`solve_char`] at every pair of `times × states`, in that order.
pub fn solve_field(prob: &CharProblem, times: &[f64], states: &[Vec<f64>], h: f64) -> Result<SolutionField> {
    use rayon::prelude::*;
    let pairs: Vec<(f64, Vec<f64>)> = times
        .iter()
        .flat_map(|&t| states.iter().map(move |x| (t, x.clone())))
        .collect();
    let rows = pairs
        .into_par_iter()
        .map(|(t, x)| {
            let u = solve_char(prob, t, &x, h)?;
            Ok((t, x, u))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SolutionField {
        x_dim: prob.x_dim,
        y_dim: prob.y_dim,
        rows,
    })
}

/// Axis-aligned bounds of a box-like set (boxes, whole space, products of
/// those).
pub(crate) fn box_bounds(k: &SetOracle) -> Option<(Vec<f64>, Vec<f64>)> {
    match k {
        SetOracle::Box { lo, hi } => Some((lo.clone(), hi.clone())),
        SetOracle::Whole { dim } => Some((vec![f64::NEG_INFINITY; *dim], vec![f64::INFINITY; *dim])),
        SetOracle::Product(parts) => {
            let mut lo = Vec::new();
            let mut hi = Vec::new();
            for p in parts {
                let (l, h) = box_bounds(p)?;
                lo.extend(l);
                hi.extend(h);
            }
            Some((lo, hi))
        }
        _ => None,
    }
}
