//! Value functions of the stopping and supremum problems attached to an
//! obstacle `u`, a Lagrangian `l` and a discount `a`:
//!
//! ```text
//! J(t) = e^{at} u(x(t)) + ∫₀ᵗ e^{aτ} l(x(τ), x'(τ)) dτ
//! u^⊤(x) = sup_t J(t),    u^⊥(x) = inf_t J(t)
//! ```
//!
//! Both are computed directly along the trajectory and, independently, as
//! lower envelopes of viability kernels / capture basins of the epigraph of
//! `u` under the lifted field `g(x, y) = (f(x), −a y − l(x, f(x)))`.
//! Residuals of the Hamilton-Jacobi inequalities are checked through
//! contingent epiderivatives estimated on grids.

use std::fmt;
use std::sync::Arc;

use crate::dynamics::VectorField;
use crate::linalg::norm;
use crate::sets::SetOracle;
use crate::INF;

mod epigraph;
mod residual;
mod value;

pub use epigraph::{epigraph_set, epigraph_value_field, lifted_field, EpigraphMode};
pub use residual::{
    default_ladder, epiderivative, hj_check_inf, hj_check_sup, repeller_condition, HjReport, HjRow, HjTolerance,
    RepellerReport,
};
pub use value::{lyapunov, minimal_length, minimal_time, running_cost_path, value_inf, value_sup, CostPath};

/// Default roof standing for `+∞` in values.
pub const DEFAULT_VALUE_CAP: f64 = 1e6;

type StateFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type CostFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// Running cost `l(x, p)` with `p = f(x)`.
#[derive(Clone)]
pub enum Lagrangian {
    Zero,
    Constant(f64),
    /// `‖p‖`, the arc-length integrand.
    Speed,
    Custom(CostFn),
}

impl Lagrangian {
    pub fn custom<L>(l: L) -> Self
    where
        L: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::Custom(Arc::new(l))
    }

    pub fn eval(&self, x: &[f64], p: &[f64]) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Constant(c) => *c,
            Self::Speed => norm(p),
            Self::Custom(l) => l(x, p),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero) || matches!(self, Self::Constant(c) if *c == 0.0)
    }
}

impl fmt::Debug for Lagrangian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::Constant(c) => write!(f, "Constant({c})"),
            Self::Speed => write!(f, "Speed"),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Nonnegative extended-real obstacle `u`.
#[derive(Clone)]
pub enum Obstacle {
    /// Finite-valued `u` with a Lipschitz constant; values of `f64::INFINITY`
    /// or above [`INF`] are read as `+∞`.
    Function { u: StateFn, lipschitz: f64 },
    /// `ψ_C`: 0 on `C`, `+∞` elsewhere.
    Indicator(SetOracle),
}

impl Obstacle {
    pub fn function<U>(lipschitz: f64, u: U) -> Self
    where
        U: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::Function {
            u: Arc::new(u),
            lipschitz,
        }
    }

    pub fn zero() -> Self {
        Self::function(0.0, |_| 0.0)
    }

    pub fn constant(c: f64) -> Self {
        Self::function(0.0, move |_| c)
    }

    /// `‖x‖`, the distance to the origin.
    pub fn norm() -> Self {
        Self::function(1.0, norm)
    }

    pub fn indicator(c: SetOracle) -> Self {
        Self::Indicator(c)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Self::Function { u, .. } => {
                let v = u(x);
                if v >= INF {
                    INF
                } else {
                    v
                }
            }
            Self::Indicator(c) => {
                if c.contains(x) {
                    0.0
                } else {
                    INF
                }
            }
        }
    }
}

impl fmt::Debug for Obstacle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Function { lipschitz, .. } => write!(f, "Function {{ lipschitz: {lipschitz} }}"),
            Self::Indicator(c) => write!(f, "Indicator({:?})", c.kind()),
        }
    }
}

/// The data `(f, l, a, u)` of a value problem, plus the finite roof used for
/// `+∞` in epigraph grids.
#[derive(Debug, Clone)]
pub struct LagrangianProblem {
    pub f: VectorField,
    pub l: Lagrangian,
    pub a: f64,
    pub u: Obstacle,
    pub value_cap: f64,
}

impl LagrangianProblem {
    pub fn new(f: VectorField, l: Lagrangian, a: f64, u: Obstacle) -> Self {
        Self {
            f,
            l,
            a,
            u,
            value_cap: DEFAULT_VALUE_CAP,
        }
    }

    pub fn with_cap(mut self, cap: f64) -> Self {
        self.value_cap = cap;
        self
    }

    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    /// `l(x, f(x))`.
    pub fn cost(&self, x: &[f64]) -> f64 {
        let p = self.f.eval(0.0, x);
        self.l.eval(x, &p)
    }
}
