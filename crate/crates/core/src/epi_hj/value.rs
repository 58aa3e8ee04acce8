use std::io::{self, Write};

use crate::dynamics::{integrate, Rk4};
use crate::error::{Error, Result};
use crate::io::write_row;
use crate::kernels::hitting_time;
use crate::sets::SetOracle;
use crate::{is_inf, INF};

use super::{Lagrangian, LagrangianProblem, Obstacle};

const GOLDEN_TOL: f64 = 1e-8;
const DESCENT_TOL: f64 = 1e-6;

/// Sampled `J(t)` along the computed trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct CostPath {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// `∫₀^{t_k} e^{aτ} l dτ` by the trapezoid rule.
    pub integral: Vec<f64>,
    /// `J(t_k)`, with [`INF`] for `+∞` and for values above the cap.
    pub values: Vec<f64>,
}

impl CostPath {
    /// CSV `t,J`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,J")?;
        for (t, j) in self.times.iter().zip(&self.values) {
            write_row(&mut w, [*t, *j])?;
        }
        Ok(())
    }
}

fn discounted_cost(p: &LagrangianProblem, t: f64, x: &[f64]) -> f64 {
    (p.a * t).exp() * p.cost(x)
}

fn clamp(p: &LagrangianProblem, v: f64) -> f64 {
    if v.is_nan() || v > p.value_cap || is_inf(v) {
        INF
    } else {
        v
    }
}

fn j_value(p: &LagrangianProblem, t: f64, x: &[f64], integral: f64) -> f64 {
    let u = p.u.eval(x);
    if is_inf(u) {
        return INF;
    }
    clamp(p, (p.a * t).exp() * u + integral)
}

/// `J(t_k)` on the RK4 grid of `[0, T_max]`; `J(0) = u(x)`.
pub fn running_cost_path(p: &LagrangianProblem, x: &[f64], t_max: f64, h: f64) -> Result<CostPath> {
    let traj = integrate(&p.f, x, 0.0, t_max, h)?;
    let mut integral = Vec::with_capacity(traj.len());
    let mut acc = 0.0;
    let mut prev = discounted_cost(p, 0.0, &traj.states[0]);
    integral.push(0.0);
    for k in 1..traj.len() {
        let cur = discounted_cost(p, traj.times[k], &traj.states[k]);
        acc += 0.5 * (traj.times[k] - traj.times[k - 1]) * (prev + cur);
        integral.push(acc);
        prev = cur;
    }
    let values = traj
        .times
        .iter()
        .zip(&traj.states)
        .zip(&integral)
        .map(|((t, s), i)| j_value(p, *t, s, *i))
        .collect();
    Ok(CostPath {
        times: traj.times,
        states: traj.states,
        integral,
        values,
    })
}

/// `sup_{t ∈ [0, T_max]} J(t)` over the samples. Reported as [`INF`] when
/// the cap is exceeded or when the supremum sits at the final sample with
/// `J` still increasing there (the horizon truncates a divergent sup).
pub fn value_sup(p: &LagrangianProblem, x: &[f64], t_max: f64, h: f64) -> Result<f64> {
    let path = running_cost_path(p, x, t_max, h)?;
    Ok(sup_of(&path.values))
}

fn sup_of(values: &[f64]) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for (k, &v) in values.iter().enumerate() {
        if is_inf(v) {
            return INF;
        }
        if v > best {
            best = v;
            arg = k;
        }
    }
    let n = values.len();
    if n >= 2 && arg == n - 1 {
        let rise = values[n - 1] - values[n - 2];
        if rise > 1e-12 * values[n - 1].abs().max(1.0) {
            return INF;
        }
    }
    best
}

/// `inf_{t ∈ [0, T_max]} J(t)`.
///
/// For a finite obstacle the sampled minimizer is refined by golden-section
/// search over its two neighboring steps to `1e-8` in `t`. For an indicator
/// obstacle `ψ_C` the infimum is the running cost accumulated up to the
/// hitting time of `C`.
pub fn value_inf(p: &LagrangianProblem, x: &[f64], t_max: f64, h: f64) -> Result<f64> {
    match &p.u {
        Obstacle::Indicator(c) => indicator_inf(p, c, x, t_max, h),
        Obstacle::Function { .. } => function_inf(p, x, t_max, h),
    }
}

fn function_inf(p: &LagrangianProblem, x: &[f64], t_max: f64, h: f64) -> Result<f64> {
    let path = running_cost_path(p, x, t_max, h)?;
    let (mut arg, mut best) = (0, INF);
    for (k, &v) in path.values.iter().enumerate() {
        if v < best {
            best = v;
            arg = k;
        }
    }
    if is_inf(best) {
        return Ok(INF);
    }
    if best == 0.0 {
        return Ok(0.0);
    }
    let last = path.times.len() - 1;
    if last == 0 {
        return Ok(best);
    }
    let base = arg.saturating_sub(1).min(last - 1);
    let top = (arg + 1).min(last);
    let t0 = path.times[base];
    let x0 = path.states[base].clone();
    let i0 = path.integral[base];
    let mut rk = Rk4::new(p.dim());
    let mut j_at = |t: f64| -> f64 {
        let s = t - t0;
        if s <= 0.0 {
            return j_value(p, t0, &x0, i0);
        }
        let mut mid = vec![0.0; x0.len()];
        let mut end = vec![0.0; x0.len()];
        rk.step(&p.f, t0, &x0, 0.5 * s, &mut mid);
        rk.step(&p.f, t0, &x0, s, &mut end);
        let simpson = s / 6.0
            * (discounted_cost(p, t0, &x0) + 4.0 * discounted_cost(p, t0 + 0.5 * s, &mid) + discounted_cost(p, t, &end));
        j_value(p, t, &end, i0 + simpson)
    };
    let (mut a, mut b) = (t0, path.times[top]);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = j_at(c);
    let mut fd = j_at(d);
    while b - a > GOLDEN_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = j_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = j_at(d);
        }
    }
    Ok(best.min(fc).min(fd))
}

fn indicator_inf(p: &LagrangianProblem, c: &SetOracle, x: &[f64], t_max: f64, h: f64) -> Result<f64> {
    let omega = hitting_time(&p.f, c, x, t_max, h)?;
    if is_inf(omega) {
        return Ok(INF);
    }
    if omega == 0.0 {
        return Ok(0.0);
    }
    let traj = integrate(&p.f, x, 0.0, omega, h)?;
    let mut acc = 0.0;
    for k in 1..traj.len() {
        let dt = traj.times[k] - traj.times[k - 1];
        acc += 0.5 * dt * (discounted_cost(p, traj.times[k - 1], &traj.states[k - 1]) + discounted_cost(p, traj.times[k], &traj.states[k]));
    }
    Ok(clamp(p, acc))
}

/// `sup_t e^{at} u(x(t))` for a problem without running cost, after
/// verifying the descent `u(x(t)) ≤ e^{−at} · value` along the trajectory.
pub fn lyapunov(p: &LagrangianProblem, x: &[f64], t_max: f64, h: f64) -> Result<f64> {
    if !p.l.is_zero() {
        return Err(Error::InvalidInput("lyapunov needs a zero Lagrangian".into()));
    }
    let path = running_cost_path(p, x, t_max, h)?;
    let value = sup_of(&path.values);
    if is_inf(value) {
        return Ok(INF);
    }
    for (t, s) in path.times.iter().zip(&path.states) {
        let lhs = p.u.eval(s);
        let rhs = (-p.a * t).exp() * value;
        if lhs > rhs + DESCENT_TOL {
            return Err(Error::DescentViolation { t: *t, lhs, rhs });
        }
    }
    Ok(value)
}

/// Minimal time to reach `K`: the stopping value with `u = ψ_K`, `l ≡ 1`.
pub fn minimal_time(f: &crate::VectorField, k: &SetOracle, x: &[f64], t_max: f64, h: f64) -> Result<f64> {
    let p = LagrangianProblem::new(f.clone(), Lagrangian::Constant(1.0), 0.0, Obstacle::indicator(k.clone()));
    value_inf(&p, x, t_max, h)
}

/// Minimal length of the path to `K`: `u = ψ_K`, `l(x, p) = ‖p‖`.
pub fn minimal_length(f: &crate::VectorField, k: &SetOracle, x: &[f64], t_max: f64, h: f64) -> Result<f64> {
    let p = LagrangianProblem::new(f.clone(), Lagrangian::Speed, 0.0, Obstacle::indicator(k.clone()));
    value_inf(&p, x, t_max, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields;
    use crate::kernels::hitting_time;

    fn decay() -> crate::VectorField {
        fields::scaled_identity(1, -1.0)
    }

    #[test]
    fn cost_paths() {
        let p = LagrangianProblem::new(decay(), Lagrangian::Zero, 1.0, Obstacle::norm());
        let path = running_cost_path(&p, &[2.0], 3.0, 1e-3).unwrap();
        assert!(path.values.iter().all(|v| (v - 2.0).abs() < 1e-9));
        let clock = LagrangianProblem::new(fields::scaled_identity(1, 0.0), Lagrangian::Constant(1.0), 0.0, Obstacle::zero());
        let path = running_cost_path(&clock, &[0.3], 2.0, 0.1).unwrap();
        for (t, j) in path.times.iter().zip(&path.values) {
            assert!((t - j).abs() < 1e-12);
        }
    }

    #[test]
    fn sup_values() {
        let p = LagrangianProblem::new(decay(), Lagrangian::Zero, 0.0, Obstacle::norm());
        assert!((value_sup(&p, &[0.7], 10.0, 1e-3).unwrap() - 0.7).abs() < 1e-12);
        let p = LagrangianProblem::new(decay(), Lagrangian::Zero, 2.0, Obstacle::norm());
        assert_eq!(value_sup(&p, &[0.7], 10.0, 1e-3).unwrap(), INF);
        assert_eq!(value_sup(&p, &[0.0], 10.0, 1e-3).unwrap(), 0.0);
        let p = LagrangianProblem::new(decay(), Lagrangian::Constant(1.0), 0.0, Obstacle::zero());
        assert_eq!(value_sup(&p, &[0.5], 10.0, 1e-3).unwrap(), INF);
    }

    #[test]
    fn inf_values() {
        let p = LagrangianProblem::new(decay(), Lagrangian::Constant(1.0), 0.0, Obstacle::norm());
        let v = value_inf(&p, &[std::f64::consts::E], 10.0, 1e-3).unwrap();
        assert!((v - 2.0).abs() < 1e-6, "{v}");
        assert_eq!(value_inf(&p, &[0.0], 10.0, 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn lyapunov_values() {
        let p = LagrangianProblem::new(decay(), Lagrangian::Zero, 0.5, Obstacle::norm());
        assert!((lyapunov(&p, &[1.5], 10.0, 1e-3).unwrap() - 1.5).abs() < 1e-9);
        let p = LagrangianProblem::new(decay(), Lagrangian::Zero, 0.5, Obstacle::zero());
        assert_eq!(lyapunov(&p, &[1.5], 10.0, 1e-3).unwrap(), 0.0);
        let p = LagrangianProblem::new(fields::scaled_identity(1, 1.0), Lagrangian::Zero, 0.0, Obstacle::norm());
        assert_eq!(lyapunov(&p, &[1.0], 20.0, 1e-3).unwrap(), INF);
        let p = LagrangianProblem::new(decay(), Lagrangian::Constant(1.0), 0.0, Obstacle::norm());
        assert!(lyapunov(&p, &[1.0], 1.0, 1e-3).is_err());
    }

    #[test]
    fn minimal_time_and_length() {
        let unit = fields::transport(vec![1.0]);
        let target = SetOracle::ball(vec![1.0], 1e-9);
        let t = minimal_time(&unit, &target, &[0.0], 5.0, 1e-3).unwrap();
        assert!((t - 1.0).abs() < 1e-6);
        assert_eq!(t, hitting_time(&unit, &target, &[0.0], 5.0, 1e-3).unwrap());
        assert_eq!(minimal_time(&unit, &target, &[1.0], 5.0, 1e-3).unwrap(), 0.0);
        let origin = SetOracle::points(vec![vec![0.0]], 0.0);
        assert_eq!(minimal_time(&decay(), &origin, &[1.0], 5.0, 1e-3).unwrap(), INF);

        let small = SetOracle::ball(vec![0.0], 0.1);
        let len = minimal_length(&decay(), &small, &[1.0], 10.0, 1e-3).unwrap();
        assert!((len - 0.9).abs() < 1e-4, "{len}");
        let corner = SetOracle::ball(vec![1.0, 0.0], 1e-5);
        let arc = minimal_length(&fields::rotation(1.0), &corner, &[0.0, 1.0], 10.0, 1e-3).unwrap();
        assert!((arc - 1.5 * std::f64::consts::PI).abs() < 1e-3, "{arc}");
    }
}
