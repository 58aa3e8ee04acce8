//! Closed forms for the age-structured example on
//! `K = R₊ × [0, r₂] × R₊ × [0, b]` with drift
//! `φ(x) = (1, −ρ x₂, σ x₃, β (b − x₄) x₄)` and `g(t, x, y) = −A(t, x) y`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::demographic4d;
use crate::sets::SetOracle;

use super::{BoundaryData, CharProblem, Drift};

type Coefficient = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;
type Data4 = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type Face = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

/// Panels of the composite Simpson rule for `∫ A`.
const SIMPSON_PANELS: usize = 256;

/// Which piece of the closed form applies at `(t, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// The characteristic starts on the initial slice.
    Initial,
    /// It enters through the birth face `x₁ = 0`.
    Birth,
    /// It enters through the face `x₂ = r₂`.
    Upper,
}

/// Parameters and data of the example. `v1(t, (x₂, x₃, x₄))` is the birth
/// datum and `v_r2(t, (x₁, x₃, x₄))` the datum on `x₂ = r₂`.
#[derive(Clone)]
pub struct Demo4d {
    pub rho: f64,
    pub sigma: f64,
    pub beta: f64,
    pub b: f64,
    pub r2: f64,
    pub a: Coefficient,
    pub u0: Data4,
    pub v1: Face,
    pub v_r2: Face,
}

impl std::fmt::Debug for Demo4d {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Demo4d")
            .field("rho", &self.rho)
            .field("sigma", &self.sigma)
            .field("beta", &self.beta)
            .field("b", &self.b)
            .field("r2", &self.r2)
            .finish_non_exhaustive()
    }
}

impl Demo4d {
    pub fn new<A, U, V1, V2>(rho: f64, sigma: f64, beta: f64, b: f64, r2: f64, a: A, u0: U, v1: V1, v_r2: V2) -> Result<Self>
    where
        A: Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
        U: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        V1: Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
        V2: Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    {
        if !(rho > 0.0 && sigma > 0.0 && beta > 0.0 && b > 0.0 && r2 > 0.0) {
            return Err(Error::ParamDomain("rho, sigma, beta, b and r2 must be positive".into()));
        }
        Ok(Self {
            rho,
            sigma,
            beta,
            b,
            r2,
            a: Arc::new(a),
            u0: Arc::new(u0),
            v1: Arc::new(v1),
            v_r2: Arc::new(v_r2),
        })
    }

    pub fn domain(&self) -> SetOracle {
        SetOracle::boxed(vec![0.0, 0.0, 0.0, 0.0], vec![f64::INFINITY, self.r2, f64::INFINITY, self.b])
    }

    fn check(&self, t: f64, x: &[f64]) -> Result<()> {
        if x.len() != 4 {
            return Err(Error::DimMismatch { expected: 4, got: x.len() });
        }
        if !(t >= 0.0) {
            return Err(Error::ParamDomain(format!("t = {t} must be nonnegative")));
        }
        if !(x[0] >= 0.0) || !(x[2] >= 0.0) {
            return Err(Error::ParamDomain("x1 and x3 must be nonnegative".into()));
        }
        if !(x[1] > 0.0 && x[1] <= self.r2) {
            return Err(Error::ParamDomain(format!("x2 = {} outside (0, r2]", x[1])));
        }
        if !(x[3] > 0.0 && x[3] < self.b) {
            return Err(Error::ParamDomain(format!("x4 = {} outside (0, b)", x[3])));
        }
        Ok(())
    }

    /// `(1/ρ) log(r₂ / x₂)`: backward time to reach `x₂ = r₂`.
    pub fn upper_time(&self, x2: f64) -> f64 {
        (self.r2 / x2).ln() / self.rho
    }

    /// Backward exit time `min(t, x₁, (1/ρ) log(r₂/x₂))`.
    pub fn exit_time(&self, t: f64, x: &[f64]) -> Result<f64> {
        self.check(t, x)?;
        Ok(t.min(x[0]).min(self.upper_time(x[1])))
    }

    /// Ties go to the initial regime first, then to the birth face.
    pub fn regime(&self, t: f64, x: &[f64]) -> Result<Regime> {
        self.check(t, x)?;
        let tu = self.upper_time(x[1]);
        Ok(if t <= x[0].min(tu) {
            Regime::Initial
        } else if x[0] <= t.min(tu) {
            Regime::Birth
        } else {
            Regime::Upper
        })
    }

    /// `ϑ_{−φ}(τ, x)`.
    pub fn backtrack(&self, tau: f64, x: &[f64]) -> [f64; 4] {
        [
            x[0] - tau,
            (self.rho * tau).exp() * x[1],
            (-self.sigma * tau).exp() * x[2],
            self.b / (1.0 + (self.b / x[3] - 1.0) * (self.beta * self.b * tau).exp()),
        ]
    }

    /// The exitor `(s, c)`. On the upper face the closed form uses
    /// `e^{ρτ} = r₂/x₂`, so `c₂ = r₂`, `c₃ = (x₂/r₂)^{σ/ρ} x₃` and the logistic
    /// factor is `(r₂/x₂)^{βb/ρ}`.
    pub fn exitor(&self, t: f64, x: &[f64]) -> Result<(f64, [f64; 4])> {
        Ok(match self.regime(t, x)? {
            Regime::Initial => (0.0, self.backtrack(t, x)),
            Regime::Birth => {
                let mut c = self.backtrack(x[0], x);
                c[0] = 0.0;
                (t - x[0], c)
            }
            Regime::Upper => {
                let tu = self.upper_time(x[1]);
                let ratio = self.r2 / x[1];
                let c = [
                    x[0] - tu,
                    self.r2,
                    (x[1] / self.r2).powf(self.sigma / self.rho) * x[2],
                    self.b / (1.0 + (self.b / x[3] - 1.0) * ratio.powf(self.beta * self.b / self.rho)),
                ];
                (t - tu, c)
            }
        })
    }

    /// `A(t, x; τ) = A(τ, ϑ_{−φ}(t − τ, x))`.
    pub fn coefficient_along(&self, t: f64, x: &[f64], tau: f64) -> f64 {
        (self.a)(tau, &self.backtrack(t - tau, x))
    }

    /// `∫_s^t A(t, x; τ) dτ` by composite Simpson.
    pub fn integrated_coefficient(&self, t: f64, x: &[f64], s: f64) -> f64 {
        if t <= s {
            return 0.0;
        }
        let n = SIMPSON_PANELS;
        let w = (t - s) / n as f64;
        let mut acc = self.coefficient_along(t, x, s) + self.coefficient_along(t, x, t);
        for i in 1..n {
            let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += weight * self.coefficient_along(t, x, s + i as f64 * w);
        }
        acc * w / 3.0
    }

    /// `u(t, x) = e^{−∫_s^t A} Ψ(s, c)`.
    pub fn solution(&self, t: f64, x: &[f64]) -> Result<f64> {
        let regime = self.regime(t, x)?;
        let (s, c) = self.exitor(t, x)?;
        let datum = match regime {
            Regime::Initial => (self.u0)(&c),
            Regime::Birth => (self.v1)(s, &[c[1], c[2], c[3]]),
            Regime::Upper => (self.v_r2)(s, &[c[0], c[2], c[3]]),
        };
        Ok((-self.integrated_coefficient(t, x, s)).exp() * datum)
    }

    /// The same problem for the generic solver: boundary data dispatch to
    /// `v1` on `x₁ = 0` (within `x_tol`) and to `v_r2` elsewhere on `∂K`.
    pub fn char_problem(&self) -> CharProblem {
        let u0 = Arc::clone(&self.u0);
        let v1 = Arc::clone(&self.v1);
        let v_r2 = Arc::clone(&self.v_r2);
        let data = BoundaryData::new(
            move |c| vec![u0(c)],
            move |s, c| {
                if c[0].abs() <= super::DEFAULT_X_TOL {
                    vec![v1(s, &[c[1], c[2], c[3]])]
                } else {
                    vec![v_r2(s, &[c[0], c[2], c[3]])]
                }
            },
        );
        let a = Arc::clone(&self.a);
        CharProblem::new(
            Drift::Phi(demographic4d(self.rho, self.sigma, self.beta, self.b)),
            move |t, x, y, out| out[0] = -a(t, x) * y[0],
            self.domain(),
            data,
            1,
        )
    }
}
