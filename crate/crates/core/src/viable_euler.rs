//! Projected Euler scheme: each explicit Euler step is followed by a
//! projection back onto `K`, so every node stays in `K`.

use crate::dynamics::{check_finite, node_time, step_count, Trajectory, VectorField};
use crate::error::{Error, Result};
use crate::linalg::dist;
use crate::sets::SetOracle;

/// `Π_K(x + h f(t, x))`.
pub fn viable_step(field: &VectorField, k: &SetOracle, t: f64, x: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidInput(format!("step must be positive, got {h}")));
    }
    let v = field.eval(t, x);
    let y: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + h * b).collect();
    k.project(&y)
}

/// Output of [`viable_trajectory`].
#[derive(Debug, Clone, PartialEq)]
pub struct ViableTrajectory {
    /// Nodes of the scheme; linear interpolation between them.
    pub trajectory: Trajectory,
    /// `max_j ‖f(t_j, x_j) − u_j‖` with `u_j = (x_{j+1} − x_j) / h_j`.
    pub substitution_error: f64,
}

/// Projected Euler nodes on `[0, T]` with step `h` (the last step may be
/// shorter).
pub fn viable_trajectory(field: &VectorField, k: &SetOracle, x0: &[f64], t_end: f64, h: f64) -> Result<ViableTrajectory> {
    if x0.len() != field.dim() || k.dim() != field.dim() {
        return Err(Error::DimMismatch {
            expected: field.dim(),
            got: x0.len(),
        });
    }
    if !k.contains(x0) {
        return Err(Error::InvalidInput("initial state lies outside K".into()));
    }
    if !(h > 0.0) || !(t_end >= 0.0) {
        return Err(Error::InvalidInput("need h > 0 and T >= 0".into()));
    }
    let n = step_count(t_end, h);
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    times.push(0.0);
    states.push(x0.to_vec());
    let mut sub_err: f64 = 0.0;
    for j in 0..n {
        let t = node_time(0.0, t_end, h, j, n);
        let t_next = node_time(0.0, t_end, h, j + 1, n);
        let hj = t_next - t;
        let x = &states[j];
        let v = field.eval(t, x);
        let y: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + hj * b).collect();
        let next = k.project(&y)?;
        check_finite(t_next, &next)?;
        // ‖f − u_j‖ = ‖y − x_{j+1}‖ / h_j
        sub_err = sub_err.max(dist(&y, &next) / hj);
        times.push(t_next);
        states.push(next);
    }
    Ok(ViableTrajectory {
        trajectory: Trajectory { times, states, step: h },
        substitution_error: sub_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields;

    #[test]
    fn circle_step() {
        let circle = SetOracle::sphere(vec![0.0, 0.0], 1.0);
        let up = crate::fields::transport(vec![0.0, 1.0]);
        let x = viable_step(&up, &circle, 0.0, &[1.0, 0.0], 0.1).unwrap();
        let n = (1.01f64).sqrt();
        assert!((x[0] - 1.0 / n).abs() < 1e-12 && (x[1] - 0.1 / n).abs() < 1e-12);
        assert!((x[0] - 0.99504).abs() < 1e-5 && (x[1] - 0.09950).abs() < 1e-5);
    }

    #[test]
    fn rotation_on_circle() {
        let circle = SetOracle::sphere(vec![0.0, 0.0], 1.0);
        let out = viable_trajectory(&fields::rotation(1.0), &circle, &[1.0, 0.0], 2.0 * std::f64::consts::PI, 1e-3).unwrap();
        assert!(out.trajectory.states.iter().all(|x| circle.distance(x) <= 1e-9));
        assert!(out.substitution_error <= 1e-3);
        let end = out.trajectory.last_state();
        assert!((end[0] - 1.0).abs() < 1e-2 && end[1].abs() < 1e-2, "{end:?}");
    }

    #[test]
    fn stays_below_equilibrium() {
        let k = SetOracle::interval(-1.0, 1.0);
        let f = VectorField::autonomous(1, |x, out| out[0] = 1.0 - x[0] * x[0]);
        let out = viable_trajectory(&f, &k, &[0.0], 5.0, 0.01).unwrap();
        let xs: Vec<f64> = out.trajectory.states.iter().map(|x| x[0]).collect();
        assert!(xs.windows(2).all(|w| w[1] >= w[0]));
        assert!(xs.iter().all(|&v| v <= 1.0));
        assert!(*xs.last().unwrap() > 0.99);
    }

    #[test]
    fn singleton_equilibrium() {
        let k = SetOracle::points(vec![vec![0.0]], 0.0);
        let f = fields::scaled_identity(1, -1.0);
        let out = viable_trajectory(&f, &k, &[0.0], 1.0, 0.1).unwrap();
        assert!(out.trajectory.states.iter().all(|x| x[0] == 0.0));
        assert_eq!(viable_step(&fields::scaled_identity(1, 0.0), &k, 0.0, &[0.0], 0.5).unwrap(), vec![0.0]);
    }
}
