//! Time-dependent right-hand sides, fixed-step RK4 integration and flows.
//!
//! A [`VectorField`] is a shared closure `(t, x, out)` together with the
//! constants (linear growth, Lipschitz, monotonicity) the caller is willing to
//! declare about it. Time dependence is handled by passing `t` to the closure;
//! no state augmentation is materialized.
//!
//! Only the RK4-selected solution is ever computed. For merely continuous
//! fields the solution set may contain more than one trajectory; everything
//! downstream treats the computed one as *the* solution.

use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::linalg::norm;

/// States whose norm exceeds this value are treated as a finite-time blow-up.
pub const BLOW_UP_NORM: f64 = 1e12;

type Rhs = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;

/// A right-hand side `(t, x) ↦ f(t, x)` on `R^dim`.
#[derive(Clone)]
pub struct VectorField {
    dim: usize,
    rhs: Arc<Rhs>,
    /// `‖f(t,x)‖ ≤ c (‖x‖ + 1)`.
    pub growth_c: Option<f64>,
    pub lipschitz: Option<f64>,
    /// `⟨f(x1) − f(x2), x1 − x2⟩ ≤ −μ ‖x1 − x2‖²`.
    pub monotone_mu: Option<f64>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("dim", &self.dim)
            .field("growth_c", &self.growth_c)
            .field("lipschitz", &self.lipschitz)
            .field("monotone_mu", &self.monotone_mu)
            .finish_non_exhaustive()
    }
}

impl VectorField {
    pub fn new<F>(dim: usize, f: F) -> Self
    where
        F: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        assert!(dim > 0, "vector field dimension must be positive");
        Self {
            dim,
            rhs: Arc::new(f),
            growth_c: None,
            lipschitz: None,
            monotone_mu: None,
        }
    }

    /// A field that ignores `t`.
    pub fn autonomous<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self::new(dim, move |_t, x, out| f(x, out))
    }

    pub fn with_growth(mut self, c: f64) -> Self {
        self.growth_c = Some(c);
        self
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    pub fn with_monotone(mut self, mu: f64) -> Self {
        self.monotone_mu = Some(mu);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn eval_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.rhs)(t, x, out)
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, x, &mut out);
        out
    }

    /// The field driving time backwards: `s ↦ x(−s)` solves `z' = −f(−s, z)`.
    ///
    /// For autonomous fields this is simply `−f`.
    pub fn reversed(&self) -> VectorField {
        let rhs = Arc::clone(&self.rhs);
        VectorField {
            dim: self.dim,
            rhs: Arc::new(move |t, x, out| {
                rhs(-t, x, out);
                for v in out.iter_mut() {
                    *v = -*v;
                }
            }),
            growth_c: self.growth_c,
            lipschitz: self.lipschitz,
            monotone_mu: None,
        }
    }
}

/// Sampled solution `(t_i, x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub step: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    /// CSV with header `t,x1,...,xn`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.dim();
        let mut header = String::from("t");
        for i in 1..=n {
            header.push_str(&format!(",x{i}"));
        }
        writeln!(w, "{header}")?;
        for (t, x) in self.times.iter().zip(&self.states) {
            let mut row = fmt_f64(*t);
            for v in x {
                row.push(',');
                row.push_str(&fmt_f64(*v));
            }
            writeln!(w, "{row}")?;
        }
        Ok(())
    }
}

/// Classical fourth-order Runge-Kutta step with reusable scratch buffers.
pub(crate) struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub(crate) fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    pub(crate) fn step(&mut self, field: &VectorField, t: f64, x: &[f64], h: f64, out: &mut [f64]) {
        let n = x.len();
        field.eval_into(t, x, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k1[i];
        }
        field.eval_into(t + 0.5 * h, &self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k2[i];
        }
        field.eval_into(t + 0.5 * h, &self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = x[i] + h * self.k3[i];
        }
        field.eval_into(t + h, &self.tmp, &mut self.k4);
        for i in 0..n {
            out[i] = x[i] + h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// Number of fixed steps covering `span`; the last one may be shorter.
pub(crate) fn step_count(span: f64, step: f64) -> usize {
    if span <= 0.0 {
        return 0;
    }
    let ratio = span / step;
    // absorb the rounding of spans that are exact multiples of `step`
    let n = (ratio - 1e-9 * ratio.max(1.0)).ceil();
    (n as usize).max(1)
}

/// Time of node `k` on the grid `t0, t0 + step, …, t1`.
#[inline]
pub(crate) fn node_time(t0: f64, t1: f64, step: f64, k: usize, n: usize) -> f64 {
    if k == n {
        t1
    } else {
        t0 + k as f64 * step
    }
}

#[inline]
pub(crate) fn check_finite(t: f64, x: &[f64]) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) || norm(x) > BLOW_UP_NORM {
        return Err(Error::NonFinite { t });
    }
    Ok(())
}

fn validate(field: &VectorField, x0: &[f64], step: f64) -> Result<()> {
    if x0.len() != field.dim() {
        return Err(Error::DimMismatch {
            expected: field.dim(),
            got: x0.len(),
        });
    }
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidInput(format!("step must be positive, got {step}")));
    }
    Ok(())
}

/// Fixed-step RK4 from `(t0, x0)` to `t1`.
pub fn integrate(field: &VectorField, x0: &[f64], t0: f64, t1: f64, step: f64) -> Result<Trajectory> {
    validate(field, x0, step)?;
    if !(t1 >= t0) {
        return Err(Error::InvalidInput(format!("t1 = {t1} precedes t0 = {t0}")));
    }
    check_finite(t0, x0)?;
    let n = step_count(t1 - t0, step);
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    times.push(t0);
    states.push(x0.to_vec());
    let mut rk = Rk4::new(field.dim());
    let mut x = x0.to_vec();
    let mut next = vec![0.0; field.dim()];
    for k in 0..n {
        let t = node_time(t0, t1, step, k, n);
        let t_next = node_time(t0, t1, step, k + 1, n);
        rk.step(field, t, &x, t_next - t, &mut next);
        check_finite(t_next, &next)?;
        std::mem::swap(&mut x, &mut next);
        times.push(t_next);
        states.push(x.clone());
    }
    Ok(Trajectory { times, states, step })
}

/// Final state only; avoids storing the trajectory.
pub(crate) fn integrate_endpoint(
    field: &VectorField,
    x0: &[f64],
    t0: f64,
    t1: f64,
    step: f64,
) -> Result<Vec<f64>> {
    validate(field, x0, step)?;
    let n = step_count(t1 - t0, step);
    let mut rk = Rk4::new(field.dim());
    let mut x = x0.to_vec();
    let mut next = vec![0.0; field.dim()];
    for k in 0..n {
        let t = node_time(t0, t1, step, k, n);
        let t_next = node_time(t0, t1, step, k + 1, n);
        rk.step(field, t, &x, t_next - t, &mut next);
        check_finite(t_next, &next)?;
        std::mem::swap(&mut x, &mut next);
    }
    Ok(x)
}

/// The reachable map `ϑ_f(t, x)` started at time 0; negative `t` runs the
/// backward flow `ϑ_{−f}(|t|, x)`.
pub fn flow(field: &VectorField, t: f64, x: &[f64], step: f64) -> Result<Vec<f64>> {
    validate(field, x, step)?;
    if t == 0.0 {
        return Ok(x.to_vec());
    }
    if t > 0.0 {
        integrate_endpoint(field, x, 0.0, t, step)
    } else {
        integrate_endpoint(&field.reversed(), x, 0.0, -t, step)
    }
}

/// Pointwise image `{ϑ_f(t, c)}` of the seeds, in order. Seeds whose
/// trajectory blows up carry their own error; the others are still returned.
pub fn reach_set(field: &VectorField, t: f64, seeds: &[Vec<f64>], step: f64) -> Result<Vec<Result<Vec<f64>>>> {
    if !(t >= 0.0) {
        return Err(Error::InvalidInput(format!("reach time must be nonnegative, got {t}")));
    }
    Ok(seeds.par_iter().map(|c| flow(field, t, c, step)).collect())
}
