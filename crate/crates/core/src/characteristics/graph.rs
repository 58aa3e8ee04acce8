use std::io::{self, Write};

use rayon::prelude::*;

use crate::dynamics::{integrate, VectorField};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::io::{header, write_row};
use crate::kernels::{capt_field, NodeSet};
use crate::linalg::dist;
use crate::sets::{dedup_indices, tangent_residual, PointCloud, SetOracle};
use crate::is_inf;

use super::{backward_from, boundary_trace, box_bounds, CharProblem};

/// Where the characteristics start: every node of `region` lying in `K`
/// seeds the initial slice, and its projection on each finite face of the
/// box `K` seeds the lateral boundary at `per_face` times in `(0, T]`
/// (or at the impulse times when those are declared).
#[derive(Debug, Clone)]
pub struct SeedPlan {
    pub region: GridSpec,
    pub per_face: usize,
}

/// Sampled graph of the solution map: rows `(t, x, y)` with the seed and
/// step each row came from.
#[derive(Debug, Clone)]
pub struct GraphCloud {
    pub points: Vec<Vec<f64>>,
    /// `(seed index, step index)` per point.
    pub provenance: Vec<(usize, usize)>,
    /// Seed rows `(s, c, Ψ(s, c))`.
    pub seeds: Vec<Vec<f64>>,
    pub tol: f64,
    pub x_dim: usize,
    pub y_dim: usize,
}

impl GraphCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_point_cloud(&self) -> PointCloud {
        PointCloud::new(self.points.clone(), self.tol)
    }

    /// CSV `t,x1,...,xn,y1,...,yp`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let ys: Vec<String> = (1..=self.y_dim).map(|i| format!("y{i}")).collect();
        let ys: Vec<&str> = ys.iter().map(String::as_str).collect();
        writeln!(w, "{}", header(&["t"], "x", self.x_dim, &ys))?;
        for p in &self.points {
            write_row(&mut w, p.iter().copied())?;
        }
        Ok(())
    }
}

fn seed_states(prob: &CharProblem, plan: &SeedPlan, t_end: f64) -> Vec<(f64, Vec<f64>)> {
    let nodes = plan.region.nodes();
    let mut seeds: Vec<(f64, Vec<f64>)> = nodes.iter().filter(|x| prob.k.contains(x)).map(|x| (0.0, x.clone())).collect();
    let times: Vec<f64> = match &prob.data.impulse_times {
        Some(ts) => ts.iter().copied().filter(|&t| t > 0.0 && t <= t_end).collect(),
        None if plan.per_face > 0 && t_end > 0.0 => (1..=plan.per_face).map(|j| j as f64 * t_end / plan.per_face as f64).collect(),
        None => Vec::new(),
    };
    if let Some((lo, hi)) = box_bounds(&prob.k) {
        let mut face_points = Vec::new();
        for axis in 0..lo.len() {
            for bound in [lo[axis], hi[axis]] {
                if !bound.is_finite() {
                    continue;
                }
                for x in &nodes {
                    let mut c = prob.k.project(x).unwrap_or_else(|_| x.clone());
                    c[axis] = bound;
                    face_points.push(c);
                }
            }
        }
        let keep = dedup_indices(&face_points, 1e-12);
        for &s in &times {
            seeds.extend(keep.iter().map(|&i| (s, face_points[i].clone())));
        }
    }
    seeds
}

/// Sweeps the characteristic system `τ' = 1, x' = f, y' = g` forward to `T`
/// from seeds `(s, c, Ψ(s, c))`, recording `(τ, x, y)` at every step while
/// `x` stays within `tol` of `K`. Seeds whose sweep blows up are skipped.
/// The merged cloud drops points within `tol / 2` of an earlier one.
pub fn graph_sample(prob: &CharProblem, plan: &SeedPlan, t_end: f64, h: f64, tol: f64) -> Result<GraphCloud> {
    if plan.region.dim() != prob.x_dim {
        return Err(Error::DimMismatch {
            expected: prob.x_dim,
            got: plan.region.dim(),
        });
    }
    if !(t_end >= 0.0) || !(h > 0.0) || !(tol > 0.0) {
        return Err(Error::InvalidInput("graph_sample needs T ≥ 0, h > 0 and tol > 0".into()));
    }
    let seeds: Vec<Vec<f64>> = seed_states(prob, plan, t_end)
        .into_iter()
        .filter_map(|(s, c)| {
            let y = boundary_trace(&prob.data, s, &c, &prob.k)?;
            let mut row = vec![s];
            row.extend(c);
            row.extend(y);
            Some(row)
        })
        .collect();
    for row in &seeds {
        if row.len() != 1 + prob.x_dim + prob.y_dim {
            return Err(Error::DimMismatch {
                expected: prob.y_dim,
                got: row.len() - 1 - prob.x_dim,
            });
        }
    }
    let joint = prob.joint_field();
    let n = prob.x_dim;
    let sweeps: Vec<Vec<Vec<f64>>> = seeds
        .par_iter()
        .map(|seed| {
            let s = seed[0];
            if s >= t_end {
                return vec![seed.clone()];
            }
            let traj = match integrate(&joint, &seed[1..], s, t_end, h) {
                Ok(traj) => traj,
                Err(_) => return Vec::new(),
            };
            let mut rows = Vec::new();
            for (t, z) in traj.times.iter().zip(&traj.states) {
                if prob.k.distance(&z[..n]) > tol {
                    break;
                }
                let mut row = vec![*t];
                row.extend_from_slice(z);
                rows.push(row);
            }
            rows
        })
        .collect();
    let mut points = Vec::new();
    let mut provenance = Vec::new();
    for (i, rows) in sweeps.into_iter().enumerate() {
        for (j, row) in rows.into_iter().enumerate() {
            points.push(row);
            provenance.push((i, j));
        }
    }
    let keep = dedup_indices(&points, 0.5 * tol);
    let points = keep.iter().map(|&i| points[i].clone()).collect();
    let provenance = keep.iter().map(|&i| provenance[i]).collect();
    Ok(GraphCloud {
        points,
        provenance,
        seeds,
        tol,
        x_dim: prob.x_dim,
        y_dim: prob.y_dim,
    })
}

/// Outputs recorded near `(t, x)`: the `y` parts of points with
/// `|τ − t| ≤ radius` and `‖ξ − x‖ ≤ radius`, merged by single linkage at
/// `cloud.tol` and returned as sorted cluster centroids.
pub fn query_graph(cloud: &GraphCloud, t: f64, x: &[f64], radius: f64) -> Vec<Vec<f64>> {
    let n = cloud.x_dim;
    let ys: Vec<&[f64]> = cloud
        .points
        .iter()
        .filter(|p| (p[0] - t).abs() <= radius && dist(&p[1..=n], x) <= radius)
        .map(|p| &p[1 + n..])
        .collect();
    let mut parent: Vec<usize> = (0..ys.len()).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..ys.len() {
        for j in 0..i {
            if dist(ys[i], ys[j]) <= cloud.tol {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut sums: Vec<(usize, Vec<f64>, usize)> = Vec::new();
    for i in 0..ys.len() {
        let r = root(&mut parent, i);
        match sums.iter_mut().find(|(id, _, _)| *id == r) {
            Some((_, acc, count)) => {
                for (a, v) in acc.iter_mut().zip(ys[i]) {
                    *a += v;
                }
                *count += 1;
            }
            None => sums.push((r, ys[i].to_vec(), 1)),
        }
    }
    let mut out: Vec<Vec<f64>> = sums
        .into_iter()
        .map(|(_, acc, count)| acc.into_iter().map(|v| v / count as f64).collect())
        .collect();
    out.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    out
}

/// Cone residuals at sampled cloud points.
#[derive(Debug, Clone, PartialEq)]
pub struct FrankowskaReport {
    pub samples: Vec<usize>,
    /// Residual of `(1, f, g)`.
    pub forward: Vec<f64>,
    /// Residual of `(−1, −f, −g)`; `NaN` at seed points, where it is exempt.
    pub backward: Vec<f64>,
}

impl FrankowskaReport {
    pub fn max_forward(&self) -> f64 {
        self.forward.iter().copied().filter(|v| !v.is_nan()).fold(0.0, f64::max)
    }

    pub fn max_backward(&self) -> f64 {
        self.backward.iter().copied().filter(|v| !v.is_nan()).fold(0.0, f64::max)
    }

    pub fn max_residual(&self) -> f64 {
        self.max_forward().max(self.max_backward())
    }
}

/// Ladder `[h/4, 4h]` used by default around a sweep step `h`.
pub fn default_graph_ladder(h: f64) -> (f64, f64) {
    (0.25 * h, 4.0 * h)
}

/// Tangent residuals of `(1, f, g)` and, away from the seeds, of
/// `(−1, −f, −g)` to the cloud viewed as a subset of `(t, x, y)`-space.
pub fn frankowska_residual(cloud: &GraphCloud, prob: &CharProblem, samples: &[usize], ladder: (f64, f64)) -> Result<FrankowskaReport> {
    let (h_min, h_max) = ladder;
    if !(0.0 < h_min && h_min < h_max) {
        return Err(Error::InvalidInput("ladder needs 0 < h_min < h_max".into()));
    }
    if let Some(&bad) = samples.iter().find(|&&i| i >= cloud.len()) {
        return Err(Error::InvalidInput(format!("sample index {bad} outside the cloud")));
    }
    let oracle = SetOracle::Points(cloud.to_point_cloud());
    let joint = prob.joint_field();
    let rows: Vec<(f64, f64)> = samples
        .par_iter()
        .map(|&i| {
            let p = &cloud.points[i];
            let mut dir = vec![1.0];
            dir.extend(joint.eval(p[0], &p[1..]));
            let fwd = tangent_residual(&oracle, p, &dir, h_min, h_max);
            let bwd = if cloud.provenance[i].1 == 0 {
                f64::NAN
            } else {
                let neg: Vec<f64> = dir.iter().map(|v| -v).collect();
                tangent_residual(&oracle, p, &neg, h_min, h_max)
            };
            (fwd, bwd)
        })
        .collect();
    Ok(FrankowskaReport {
        samples: samples.to_vec(),
        forward: rows.iter().map(|r| r.0).collect(),
        backward: rows.iter().map(|r| r.1).collect(),
    })
}

/// Replay of cloud points back to their seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProvenanceReport {
    pub checked: usize,
    pub max_error: f64,
}

/// Integrates every `stride`-th cloud point backwards to its seed time and
/// measures the distance to the recorded seed.
pub fn verify_provenance(cloud: &GraphCloud, prob: &CharProblem, h: f64, stride: usize) -> Result<ProvenanceReport> {
    let joint = prob.joint_field();
    let picks: Vec<usize> = (0..cloud.len()).step_by(stride.max(1)).collect();
    let errors = picks
        .par_iter()
        .map(|&i| {
            let p = &cloud.points[i];
            let seed = &cloud.seeds[cloud.provenance[i].0];
            let span = p[0] - seed[0];
            if span <= 0.0 {
                return Ok(dist(&p[1..], &seed[1..]));
            }
            let traj = integrate(&backward_from(&joint, p[0]), &p[1..], 0.0, span, h)?;
            Ok(dist(traj.last_state(), &seed[1..]))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ProvenanceReport {
        checked: picks.len(),
        max_error: errors.into_iter().fold(0.0, f64::max),
    })
}

/// Gridded cross-check for one state and one output dimension: the capture
/// basin, under `(−1, −f, −g)` within `t_max`, of the seed rows thickened
/// by `tol`, on a grid over `(t, x, y)`.
pub fn gridded_graph(prob: &CharProblem, seeds: &[Vec<f64>], grid: &GridSpec, tol: f64, t_max: f64, h: f64) -> Result<NodeSet> {
    if prob.x_dim != 1 || prob.y_dim != 1 || grid.dim() != 3 {
        return Err(Error::Unsupported("gridded graph needs one state and one output dimension".into()));
    }
    let joint = prob.joint_field();
    let field = VectorField::new(3, move |_, z, out| {
        let v = joint.eval(z[0], &z[1..]);
        out[0] = -1.0;
        out[1] = -v[0];
        out[2] = -v[1];
    });
    let cloud = PointCloud::new(seeds.to_vec(), 0.0);
    let target = SetOracle::sublevel(3, 1.0, move |z| cloud.nearest(z).map_or(f64::INFINITY, |(_, d)| d) - tol);
    let times = capt_field(&field, &target, grid, t_max, h)?;
    let members = times.values.iter().map(|&v| !is_inf(v)).collect();
    Ok(NodeSet {
        grid: grid.clone(),
        members,
    })
}
