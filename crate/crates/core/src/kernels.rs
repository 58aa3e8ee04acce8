//! Exit and hitting times, the capture margin, viability kernels and
//! capture basins on grids.
//!
//! All time functionals are evaluated along the single RK4-computed
//! solution started at `t = 0`. Infinite times use the [`INF`] sentinel.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::dynamics::{check_finite, flow, node_time, step_count, Rk4, VectorField};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, TimeField};
use crate::io::{header, write_row};
use crate::linalg::{dist, norm};
use crate::sets::SetOracle;
use crate::{is_inf, INF};

/// Relative resolution of exit and hitting times: `δ = 1e-8 · T_max`.
pub const TIME_RESOLUTION: f64 = 1e-8;

fn check_args(field: &VectorField, set: &SetOracle, x: &[f64], t_max: f64, h: f64) -> Result<()> {
    if x.len() != field.dim() || set.dim() != field.dim() {
        return Err(Error::DimMismatch {
            expected: field.dim(),
            got: x.len(),
        });
    }
    if !(t_max > 0.0) || !(h > 0.0) {
        return Err(Error::InvalidInput("need T_max > 0 and h > 0".into()));
    }
    Ok(())
}

/// `τ_K(x) = inf{t : x(t) ∉ K}`, or [`INF`] when the solution stays in `K`
/// on `[0, T_max]`. The bracketing step is bisected with RK4 substeps to a
/// width of `1e-8 · T_max` and the upper end is returned. Zero for `x ∉ K`.
pub fn exit_time(field: &VectorField, k: &SetOracle, x: &[f64], t_max: f64, h: f64) -> Result<f64> {
    check_args(field, k, x, t_max, h)?;
    if !k.contains(x) {
        return Ok(0.0);
    }
    let delta = TIME_RESOLUTION * t_max;
    let n = step_count(t_max, h);
    let mut rk = Rk4::new(field.dim());
    let mut cur = x.to_vec();
    let mut next = vec![0.0; field.dim()];
    let mut probe = vec![0.0; field.dim()];
    for j in 0..n {
        let t = node_time(0.0, t_max, h, j, n);
        let hj = node_time(0.0, t_max, h, j + 1, n) - t;
        rk.step(field, t, &cur, hj, &mut next);
        check_finite(t + hj, &next)?;
        if !k.contains(&next) {
            let (mut lo, mut hi) = (0.0, hj);
            while hi - lo > delta {
                let mid = 0.5 * (lo + hi);
                rk.step(field, t, &cur, mid, &mut probe);
                if k.contains(&probe) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(t + hi);
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(INF)
}

/// `ω_C(x) = inf{t : x(t) ∈ C}`, or [`INF`] if `C` is not reached on
/// `[0, T_max]`.
///
/// Entry is located on the lattice `t_j + m δ` (`δ = 1e-8 · T_max`) of each
/// step that comes close to `C`, by conservative advancement: from a lattice
/// point at distance `d` the solution cannot reach `C` within `d / v_max`,
/// with `v_max` twice the largest observed speed on the step. The first
/// lattice point in `C` is returned, so hitting times of unions are exactly
/// the minima of the parts.
pub fn hitting_time(field: &VectorField, c: &SetOracle, x: &[f64], t_max: f64, h: f64) -> Result<f64> {
    check_args(field, c, x, t_max, h)?;
    if c.contains(x) {
        return Ok(0.0);
    }
    let delta = TIME_RESOLUTION * t_max;
    let n = step_count(t_max, h);
    let mut rk = Rk4::new(field.dim());
    let mut cur = x.to_vec();
    let mut next = vec![0.0; field.dim()];
    let mut probe = vec![0.0; field.dim()];
    let mut f_cur = vec![0.0; field.dim()];
    let mut f_next = vec![0.0; field.dim()];
    for j in 0..n {
        let t = node_time(0.0, t_max, h, j, n);
        let hj = node_time(0.0, t_max, h, j + 1, n) - t;
        rk.step(field, t, &cur, hj, &mut next);
        check_finite(t + hj, &next)?;
        field.eval_into(t, &cur, &mut f_cur);
        field.eval_into(t + hj, &next, &mut f_next);
        let disp = dist(&cur, &next);
        let speed = norm(&f_cur).max(norm(&f_next)).max(disp / hj);
        let d0 = c.distance(&cur);
        let near = d0 <= 2.0 * (disp.max(hj * norm(&f_cur)).max(hj * norm(&f_next)));
        if c.contains(&next) || near {
            let vmax = 2.0 * speed;
            if vmax > 0.0 {
                let last = (hj / delta).ceil() as u64;
                let mut m: u64 = 0;
                let mut d = d0;
                while m < last {
                    let jump = ((d / (vmax * delta)).floor() as u64).max(1);
                    m = m.saturating_add(jump).min(last);
                    let s = (m as f64 * delta).min(hj);
                    let state: &[f64] = if m == last {
                        &next
                    } else {
                        rk.step(field, t, &cur, s, &mut probe);
                        &probe
                    };
                    if c.contains(state) {
                        return Ok(t + s);
                    }
                    d = c.distance(state);
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(INF)
}

/// `γ_(K,C)(x) = ω_C(x) − τ_K(x)`; `+∞` when `C` is never reached and
/// `−∞` when `C` is reached but `K` is never left. For `C = K` this is
/// `−τ_K(x)`.
pub fn capture_margin(field: &VectorField, k: &SetOracle, c: &SetOracle, x: &[f64], t_max: f64, h: f64) -> Result<f64> {
    let omega = hitting_time(field, c, x, t_max, h)?;
    let tau = exit_time(field, k, x, t_max, h)?;
    Ok(margin(omega, tau))
}

fn margin(omega: f64, tau: f64) -> f64 {
    if is_inf(omega) {
        INF
    } else if is_inf(tau) {
        -INF
    } else {
        omega - tau
    }
}

/// Exit time at every grid node in `K`. Nodes outside `K` get value 0 and
/// `in_domain = false`; nodes whose integration fails also record 0.
pub fn viab_field(field: &VectorField, k: &SetOracle, grid: &GridSpec, t_max: f64, h: f64) -> Result<TimeField> {
    sweep(grid, |x| {
        if k.contains(x) {
            (exit_time(field, k, x, t_max, h).unwrap_or(0.0), true)
        } else {
            (0.0, false)
        }
    })
}

/// Hitting time of `C` at every grid node; failed integrations record
/// [`INF`] (the target is not reached).
pub fn capt_field(field: &VectorField, c: &SetOracle, grid: &GridSpec, t_max: f64, h: f64) -> Result<TimeField> {
    sweep(grid, |x| (hitting_time(field, c, x, t_max, h).unwrap_or(INF), true))
}

/// Capture margin at every grid node in `K`; `{γ ≤ 0}` is the viable-capture
/// basin.
pub fn viable_capt_field(
    field: &VectorField,
    k: &SetOracle,
    c: &SetOracle,
    grid: &GridSpec,
    t_max: f64,
    h: f64,
) -> Result<TimeField> {
    sweep(grid, |x| {
        if k.contains(x) {
            (capture_margin(field, k, c, x, t_max, h).unwrap_or(INF), true)
        } else {
            (0.0, false)
        }
    })
}

fn sweep(grid: &GridSpec, node: impl Fn(&[f64]) -> (f64, bool) + Sync) -> Result<TimeField> {
    let pairs: Vec<(f64, bool)> = (0..grid.len()).into_par_iter().map(|i| node(&grid.node(i))).collect();
    let (values, in_domain) = pairs.into_iter().unzip();
    Ok(TimeField::new(grid.clone(), values, in_domain))
}

/// A subset of grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet {
    pub grid: GridSpec,
    pub members: Vec<bool>,
}

impl NodeSet {
    pub fn indices(&self) -> Vec<usize> {
        (0..self.members.len()).filter(|&i| self.members[i]).collect()
    }

    pub fn count(&self) -> usize {
        self.members.iter().filter(|&&m| m).count()
    }

    /// CSV `x1,...,xn,member` with `member ∈ {0, 1}` for every node.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", header(&[], "x", self.grid.dim(), &["member"]))?;
        for (i, &m) in self.members.iter().enumerate() {
            let mut row = self.grid.node(i);
            row.push(if m { 1.0 } else { 0.0 });
            write_row(&mut w, row)?;
        }
        Ok(())
    }
}

/// Discrete viability kernel by deletion to a fixed point.
///
/// Start from the nodes in `K`; a node survives a sweep if its image
/// `ϑ_f(h, x)` lies within `r = (diag / 2)(1 + e^{hL})` of a survivor,
/// where `diag` is the cell diagonal and `L` the declared Lipschitz constant
/// (estimated by finite differences on the grid when absent). Any true
/// kernel point within half a cell of a node keeps that node alive, so the
/// result is an outer approximation.
pub fn discrete_kernel(field: &VectorField, k: &SetOracle, grid: &GridSpec, h: f64) -> Result<NodeSet> {
    if !(h > 0.0) {
        return Err(Error::InvalidInput(format!("step must be positive, got {h}")));
    }
    if grid.dim() != field.dim() || k.dim() != field.dim() {
        return Err(Error::DimMismatch {
            expected: field.dim(),
            got: grid.dim(),
        });
    }
    let n = grid.len();
    let inside: Vec<bool> = (0..n).into_par_iter().map(|i| k.contains(&grid.node(i))).collect();
    let lip = match field.lipschitz {
        Some(l) => l,
        None => estimate_lipschitz(field, grid, &inside),
    };
    let radius = 0.5 * grid.cell_diag() * (1.0 + (h * lip).exp()) * (1.0 + 1e-9);
    let sub = h / (h / 0.01).ceil();
    let images: Vec<Option<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            if inside[i] {
                flow(field, h, &grid.node(i), sub).ok()
            } else {
                None
            }
        })
        .collect();
    let mut alive = inside;
    let mut iterations = 0;
    loop {
        let next: Vec<bool> = (0..n)
            .into_par_iter()
            .map(|i| alive[i] && images[i].as_ref().map_or(false, |y| has_member_within(grid, &alive, y, radius)))
            .collect();
        if next == alive {
            break;
        }
        alive = next;
        iterations += 1;
        if iterations > n {
            return Err(Error::NoConvergence { iterations });
        }
    }
    Ok(NodeSet {
        grid: grid.clone(),
        members: alive,
    })
}

fn has_member_within(grid: &GridSpec, alive: &[bool], y: &[f64], r: f64) -> bool {
    let d = grid.dim();
    let mut lo = vec![0usize; d];
    let mut hi = vec![0usize; d];
    for axis in 0..d {
        let dx = grid.spacing(axis);
        let top = (grid.counts[axis] - 1) as f64;
        let a = ((y[axis] - r - grid.lo[axis]) / dx).ceil().max(0.0);
        let b = ((y[axis] + r - grid.lo[axis]) / dx).floor().min(top);
        if a > b {
            return false;
        }
        lo[axis] = a as usize;
        hi[axis] = b as usize;
    }
    let mut idx = lo.clone();
    loop {
        let flat = grid.flat_index(&idx);
        if alive[flat] && dist(&grid.node(flat), y) <= r {
            return true;
        }
        let mut axis = d;
        loop {
            if axis == 0 {
                return false;
            }
            axis -= 1;
            if idx[axis] < hi[axis] {
                idx[axis] += 1;
                break;
            }
            idx[axis] = lo[axis];
        }
    }
}

/// Largest finite-difference slope `‖Δf‖ / ε` over nodes in the domain.
fn estimate_lipschitz(field: &VectorField, grid: &GridSpec, inside: &[bool]) -> f64 {
    let eps = 1e-6 * grid.cell_diag().max(1e-12);
    (0..grid.len())
        .into_par_iter()
        .filter(|&i| inside[i])
        .map(|i| {
            let x = grid.node(i);
            let f0 = field.eval(0.0, &x);
            let mut total = 0.0;
            for axis in 0..x.len() {
                let mut xp = x.clone();
                xp[axis] += eps;
                let f1 = field.eval(0.0, &xp);
                total += (dist(&f1, &f0) / eps).powi(2);
            }
            total.sqrt()
        })
        .reduce(|| 0.0, f64::max)
}

/// Whether every node of `K` leaves `K` before `T_max`, together with the
/// largest finite exit time over those nodes (0 when `K` has no nodes).
pub fn repeller_check(field: &VectorField, k: &SetOracle, grid: &GridSpec, t_max: f64, h: f64) -> Result<(bool, f64)> {
    let tau = viab_field(field, k, grid, t_max, h)?;
    let mut all_exit = true;
    let mut sup: f64 = 0.0;
    for i in tau.select(|_| true) {
        let v = tau.values[i];
        if is_inf(v) {
            all_exit = false;
        } else {
            sup = sup.max(v);
        }
    }
    Ok((all_exit, sup))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields;

    fn unit() -> VectorField {
        fields::transport(vec![1.0])
    }

    fn grow() -> VectorField {
        fields::scaled_identity(1, 1.0)
    }

    fn decay() -> VectorField {
        fields::scaled_identity(1, -1.0)
    }

    #[test]
    fn exit_time_examples() {
        let k = SetOracle::interval(0.0, 1.0);
        assert!((exit_time(&unit(), &k, &[0.3], 10.0, 1e-3).unwrap() - 0.7).abs() < 1e-6);
        let k = SetOracle::interval(-1.0, 1.0);
        let t = exit_time(&grow(), &k, &[0.5], 10.0, 1e-3).unwrap();
        assert!((t - 2f64.ln()).abs() < 1e-6, "{t}");
        assert_eq!(exit_time(&grow(), &k, &[0.0], 10.0, 1e-3).unwrap(), INF);
        assert_eq!(exit_time(&grow(), &k, &[2.0], 10.0, 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn hitting_time_examples() {
        let small = SetOracle::ball(vec![0.0], 0.1);
        assert_eq!(hitting_time(&decay(), &small, &[0.05], 10.0, 1e-3).unwrap(), 0.0);
        let t = hitting_time(&decay(), &small, &[1.0], 10.0, 1e-3).unwrap();
        assert!((t - 10f64.ln()).abs() < 1e-6, "{t}");
        let origin = SetOracle::points(vec![vec![0.0]], 0.0);
        assert_eq!(hitting_time(&decay(), &origin, &[1.0], 10.0, 1e-3).unwrap(), INF);
    }

    #[test]
    fn margin_examples() {
        let k = SetOracle::interval(0.0, 2.0);
        let c = SetOracle::interval(1.0, 2.0);
        let g = capture_margin(&unit(), &k, &c, &[0.5], 10.0, 1e-3).unwrap();
        assert!((g + 1.0).abs() < 1e-6, "{g}");
        let g = capture_margin(&unit(), &k, &k, &[0.5], 10.0, 1e-3).unwrap();
        let tau = exit_time(&unit(), &k, &[0.5], 10.0, 1e-3).unwrap();
        assert_eq!(g, -tau);
        let g = capture_margin(&unit(), &k, &c, &[1.5], 10.0, 1e-3).unwrap();
        assert!(g <= 0.0);
    }

    #[test]
    fn viab_field_transport() {
        let k = SetOracle::interval(0.0, 1.0);
        let grid = GridSpec::line(0.0, 1.0, 11).unwrap();
        let tau = viab_field(&unit(), &k, &grid, 5.0, 1e-3).unwrap();
        for i in 0..grid.len() {
            let x = grid.node(i)[0];
            assert!((tau.values[i] - (1.0 - x)).abs() < 1e-6);
        }
        let (rep, tbar) = repeller_check(&unit(), &k, &grid, 5.0, 1e-3).unwrap();
        assert!(rep && (tbar - 1.0).abs() < 1e-6);
    }

    #[test]
    fn capt_field_transport() {
        let grid = GridSpec::line(0.0, 1.0, 11).unwrap();
        let c = SetOracle::interval(1.0 - 0.05, 1.0 + 0.05);
        let omega = capt_field(&unit(), &c, &grid, 5.0, 1e-3).unwrap();
        for i in 0..grid.len() {
            let x = grid.node(i)[0];
            assert!((omega.values[i] - (0.95 - x).max(0.0)).abs() < 1e-6);
        }
        let all = SetOracle::interval(-1.0, 2.0);
        assert!(capt_field(&unit(), &all, &grid, 5.0, 1e-3).unwrap().values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn viable_capture_examples() {
        let grid = GridSpec::line(0.0, 2.0, 9).unwrap();
        let k = SetOracle::interval(0.0, 2.0);
        let origin = SetOracle::points(vec![vec![0.0]], 0.0);
        let gamma = viable_capt_field(&unit(), &k, &origin, &grid, 5.0, 1e-3).unwrap();
        let basin: Vec<usize> = gamma.select(|v| v <= 0.0);
        assert_eq!(basin, vec![0]);
        let c = SetOracle::interval(1.0, 2.0);
        let gamma = viable_capt_field(&unit(), &k, &c, &grid, 5.0, 1e-3).unwrap();
        assert!(gamma.select(|v| v <= 0.0).len() == grid.len());
    }

    #[test]
    fn discrete_kernel_saddle() {
        let grid = GridSpec::line(-1.0, 1.0, 401).unwrap();
        let k = SetOracle::interval(-1.0, 1.0);
        let ker = discrete_kernel(&grow(), &k, &grid, 1.0).unwrap();
        assert_eq!(ker.indices(), vec![199, 200, 201]);
        let empty = SetOracle::empty(1);
        assert_eq!(discrete_kernel(&grow(), &empty, &grid, 1.0).unwrap().count(), 0);
    }

    #[test]
    fn lipschitz_estimate_is_close() {
        let grid = GridSpec::line(-1.0, 1.0, 21).unwrap();
        let f = VectorField::autonomous(1, |x, o| o[0] = 3.0 * x[0]);
        let l = estimate_lipschitz(&f, &grid, &[true; 21]);
        assert!((l - 3.0).abs() < 1e-6);
    }
}
