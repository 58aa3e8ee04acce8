//! Closed sets given by oracles: membership, distance, best approximation.
//!
//! Primitive kinds (box, ball, sphere, halfspace, point cloud, product of
//! primitives) answer all three queries exactly. Composites are exact where a
//! closed form exists; an intersection reports the certified lower bound
//! `max_i d(x, K_i)` as its distance and exposes an alternating-projection
//! upper bound through [`SetOracle::distance_bounds`].

use std::collections::HashMap;
use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::io::write_row;
use crate::linalg::{dist, dot, norm, sub};

/// Tolerance on `| ‖x − c‖ − r |` for sphere membership.
pub const SPHERE_TOL: f64 = 1e-12;

/// Default rungs of the difference-quotient ladder.
pub const DEFAULT_H_MIN: f64 = 1e-6;
pub const DEFAULT_H_MAX: f64 = 1e-2;

const INTERSECTION_ITERS: usize = 50;

/// Label of an oracle's construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetKind {
    Whole,
    Empty,
    Box,
    Ball,
    Sphere,
    Halfspace,
    Product,
    PointCloud,
    Complement,
    Intersection,
    Union,
    Sublevel,
}

/// `{x : g(x) ≤ 0}` for a function `g` with Lipschitz constant `lipschitz`,
/// so that `max(g(x), 0) / lipschitz` is a lower bound on the distance.
#[derive(Clone)]
pub struct Sublevel {
    dim: usize,
    g: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    lipschitz: f64,
}

impl Sublevel {
    pub fn new<G>(dim: usize, lipschitz: f64, g: G) -> Self
    where
        G: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        assert!(lipschitz > 0.0, "sublevel sets need a positive Lipschitz bound");
        Self {
            dim,
            g: Arc::new(g),
            lipschitz,
        }
    }

    pub fn level(&self, x: &[f64]) -> f64 {
        (self.g)(x)
    }
}

impl fmt::Debug for Sublevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Sublevel")
            .field("dim", &self.dim)
            .field("lipschitz", &self.lipschitz)
            .finish_non_exhaustive()
    }
}

/// Finite set of points; no two points closer than `tol / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec<f64>>,
    pub tol: f64,
}

impl PointCloud {
    /// Builds a cloud, dropping every point within `tol / 2` of an earlier one.
    pub fn new(points: Vec<Vec<f64>>, tol: f64) -> Self {
        let points = dedup_points(points, 0.5 * tol);
        Self { points, tol }
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    /// Index and distance of the nearest point (lowest index among ties).
    pub fn nearest(&self, x: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in self.points.iter().enumerate() {
            let d2: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.map_or(true, |(_, b)| d2 < b) {
                best = Some((i, d2));
            }
        }
        best.map(|(i, d2)| (i, d2.sqrt()))
    }

    /// One state per row, header `x1,...,xn`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", crate::io::header(&[], "x", self.dim(), &[]))?;
        for p in &self.points {
            write_row(&mut w, p.iter().copied())?;
        }
        Ok(())
    }

    pub fn read_csv<R: io::BufRead>(r: R, tol: f64) -> io::Result<Self> {
        Ok(Self::new(crate::io::read_rows(r)?, tol))
    }
}

/// Greedy first-come merge on a hash grid of cell `radius`.
pub(crate) fn dedup_points(points: Vec<Vec<f64>>, radius: f64) -> Vec<Vec<f64>> {
    let keep = dedup_indices(&points, radius);
    let mut slots: Vec<Option<Vec<f64>>> = points.into_iter().map(Some).collect();
    keep.into_iter().map(|i| slots[i].take().expect("indices are unique")).collect()
}

/// Indices of the points kept by a greedy merge: a point is dropped when it
/// lies within `radius` of an earlier kept point.
pub(crate) fn dedup_indices(points: &[Vec<f64>], radius: f64) -> Vec<usize> {
    if !(radius > 0.0) {
        return (0..points.len()).collect();
    }
    let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    let mut kept: Vec<usize> = Vec::with_capacity(points.len());
    let key = |p: &[f64]| -> Vec<i64> { p.iter().map(|v| (v / radius).floor() as i64).collect() };
    'outer: for (idx, p) in points.iter().enumerate() {
        let k = key(p);
        let mut offsets = vec![-1i64; k.len()];
        loop {
            let probe: Vec<i64> = k.iter().zip(&offsets).map(|(a, b)| a + b).collect();
            if let Some(ids) = buckets.get(&probe) {
                if ids.iter().any(|&i| dist(&points[i], p) < radius) {
                    continue 'outer;
                }
            }
            // odometer over {-1, 0, 1}^d
            let mut axis = 0;
            while axis < offsets.len() {
                offsets[axis] += 1;
                if offsets[axis] <= 1 {
                    break;
                }
                offsets[axis] = -1;
                axis += 1;
            }
            if axis == offsets.len() {
                break;
            }
        }
        buckets.entry(k).or_default().push(idx);
        kept.push(idx);
    }
    kept
}

/// A closed subset of `R^n` accessed through membership, distance and
/// projection queries.
#[derive(Debug, Clone)]
pub enum SetOracle {
    Whole { dim: usize },
    Empty { dim: usize },
    /// Componentwise bounds; infinite bounds are allowed.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Sphere { center: Vec<f64>, radius: f64 },
    /// `{x : ⟨normal, x⟩ ≤ offset}`
    Halfspace { normal: Vec<f64>, offset: f64 },
    /// Cartesian product; coordinates are split in factor order.
    Product(Vec<SetOracle>),
    Points(PointCloud),
    /// Closure of the complement of a box, ball or halfspace.
    Complement(Box<SetOracle>),
    Intersection(Vec<SetOracle>),
    Union(Vec<SetOracle>),
    Sublevel(Sublevel),
}

impl SetOracle {
    pub fn whole(dim: usize) -> Self {
        Self::Whole { dim }
    }

    pub fn empty(dim: usize) -> Self {
        Self::Empty { dim }
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len());
        assert!(lo.iter().zip(&hi).all(|(a, b)| a <= b), "box bounds must satisfy lo <= hi");
        Self::Box { lo, hi }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        Self::boxed(vec![lo], vec![hi])
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        assert!(radius >= 0.0);
        Self::Ball { center, radius }
    }

    pub fn sphere(center: Vec<f64>, radius: f64) -> Self {
        assert!(radius >= 0.0);
        Self::Sphere { center, radius }
    }

    pub fn halfspace(normal: Vec<f64>, offset: f64) -> Self {
        assert!(norm(&normal) > 0.0, "halfspace normal must be nonzero");
        Self::Halfspace { normal, offset }
    }

    pub fn points(points: Vec<Vec<f64>>, tol: f64) -> Self {
        Self::Points(PointCloud::new(points, tol))
    }

    /// Closure of `R^n \ inner`; `inner` must be a box, ball or halfspace.
    pub fn complement(inner: SetOracle) -> Result<Self> {
        match inner {
            Self::Box { .. } | Self::Ball { .. } | Self::Halfspace { .. } => Ok(Self::Complement(Box::new(inner))),
            other => Err(Error::Unsupported(format!(
                "complement of a {:?} set has no analytic oracle",
                other.kind()
            ))),
        }
    }

    pub fn sublevel<G>(dim: usize, lipschitz: f64, g: G) -> Self
    where
        G: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::Sublevel(Sublevel::new(dim, lipschitz, g))
    }

    pub fn kind(&self) -> SetKind {
        match self {
            Self::Whole { .. } => SetKind::Whole,
            Self::Empty { .. } => SetKind::Empty,
            Self::Box { .. } => SetKind::Box,
            Self::Ball { .. } => SetKind::Ball,
            Self::Sphere { .. } => SetKind::Sphere,
            Self::Halfspace { .. } => SetKind::Halfspace,
            Self::Product(_) => SetKind::Product,
            Self::Points(_) => SetKind::PointCloud,
            Self::Complement(_) => SetKind::Complement,
            Self::Intersection(_) => SetKind::Intersection,
            Self::Union(_) => SetKind::Union,
            Self::Sublevel(_) => SetKind::Sublevel,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Whole { dim } | Self::Empty { dim } => *dim,
            Self::Box { lo, .. } => lo.len(),
            Self::Ball { center, .. } | Self::Sphere { center, .. } => center.len(),
            Self::Halfspace { normal, .. } => normal.len(),
            Self::Product(parts) => parts.iter().map(SetOracle::dim).sum(),
            Self::Points(c) => c.dim(),
            Self::Complement(inner) => inner.dim(),
            Self::Intersection(parts) | Self::Union(parts) => parts.first().map_or(0, SetOracle::dim),
            Self::Sublevel(s) => s.dim,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Self::Whole { .. } => true,
            Self::Empty { .. } => false,
            Self::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| *a <= *v && *v <= *b),
            Self::Ball { center, radius } => dist(x, center) <= *radius,
            Self::Sphere { center, radius } => (dist(x, center) - radius).abs() <= SPHERE_TOL * radius.max(1.0),
            Self::Halfspace { normal, offset } => dot(normal, x) <= *offset,
            Self::Product(parts) => split(parts, x).all(|(p, xi)| p.contains(xi)),
            Self::Points(c) => c.points.iter().any(|p| p.as_slice() == x),
            Self::Complement(inner) => match inner.as_ref() {
                Self::Box { lo, hi } => x.iter().zip(lo.iter().zip(hi)).any(|(v, (a, b))| *v <= *a || *v >= *b),
                Self::Ball { center, radius } => dist(x, center) >= *radius,
                Self::Halfspace { normal, offset } => dot(normal, x) >= *offset,
                _ => unreachable!("checked at construction"),
            },
            Self::Intersection(parts) => parts.iter().all(|p| p.contains(x)),
            Self::Union(parts) => parts.iter().any(|p| p.contains(x)),
            Self::Sublevel(s) => s.level(x) <= 0.0,
        }
    }

    /// `d(x, K)`; `+∞` for the empty set.
    pub fn distance(&self, x: &[f64]) -> f64 {
        match self {
            Self::Whole { .. } => 0.0,
            Self::Empty { .. } => f64::INFINITY,
            Self::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (a, b))| {
                    let d = if v < a {
                        a - v
                    } else if v > b {
                        v - b
                    } else {
                        0.0
                    };
                    d * d
                })
                .sum::<f64>()
                .sqrt(),
            Self::Ball { center, radius } => (dist(x, center) - radius).max(0.0),
            Self::Sphere { center, radius } => (dist(x, center) - radius).abs(),
            Self::Halfspace { normal, offset } => ((dot(normal, x) - offset) / norm(normal)).max(0.0),
            Self::Product(parts) => split(parts, x).map(|(p, xi)| p.distance(xi).powi(2)).sum::<f64>().sqrt(),
            Self::Points(c) => c.nearest(x).map_or(f64::INFINITY, |(_, d)| d),
            Self::Complement(inner) => match inner.as_ref() {
                Self::Box { lo, hi } => x
                    .iter()
                    .zip(lo.iter().zip(hi))
                    .map(|(v, (a, b))| (v - a).min(b - v).max(0.0))
                    .fold(f64::INFINITY, f64::min),
                Self::Ball { center, radius } => (radius - dist(x, center)).max(0.0),
                Self::Halfspace { normal, offset } => ((offset - dot(normal, x)) / norm(normal)).max(0.0),
                _ => unreachable!("checked at construction"),
            },
            Self::Intersection(parts) => parts.iter().map(|p| p.distance(x)).fold(0.0, f64::max),
            Self::Union(parts) => parts.iter().map(|p| p.distance(x)).fold(f64::INFINITY, f64::min),
            Self::Sublevel(s) => (s.level(x) / s.lipschitz).max(0.0),
        }
    }

    /// `(lower, upper)` bounds on `d(x, K)`. Only intersections have a gap:
    /// the upper bound is the distance to the alternating-projection iterate
    /// when that iterate lands in every member, `+∞` otherwise.
    pub fn distance_bounds(&self, x: &[f64]) -> (f64, f64) {
        match self {
            Self::Intersection(parts) => {
                let lower = self.distance(x);
                if lower == 0.0 && self.contains(x) {
                    return (0.0, 0.0);
                }
                let upper = match dykstra(parts, x) {
                    Ok(p) if parts.iter().all(|k| k.distance(&p) <= 1e-9) => dist(&p, x).max(lower),
                    _ => f64::INFINITY,
                };
                (lower, upper)
            }
            Self::Sublevel(_) => (self.distance(x), if self.contains(x) { 0.0 } else { f64::INFINITY }),
            _ => {
                let d = self.distance(x);
                (d, d)
            }
        }
    }

    /// A best approximation of `y` in `K`.
    ///
    /// Ties follow each primitive's analytic rule: boxes clamp componentwise,
    /// balls and spheres scale radially (the center of a sphere maps to
    /// `center + r e_1`), point clouds take the lowest index, complements of
    /// boxes push through the nearest face (lowest axis, lower face first).
    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.dim() {
            return Err(Error::DimMismatch {
                expected: self.dim(),
                got: y.len(),
            });
        }
        match self {
            Self::Whole { .. } => Ok(y.to_vec()),
            Self::Empty { .. } => Err(Error::Unsupported("projection onto the empty set".into())),
            Self::Box { lo, hi } => Ok(y.iter().zip(lo.iter().zip(hi)).map(|(v, (a, b))| v.max(*a).min(*b)).collect()),
            Self::Ball { center, radius } => {
                let d = dist(y, center);
                if d <= *radius {
                    Ok(y.to_vec())
                } else {
                    Ok(radial(center, y, *radius, d))
                }
            }
            Self::Sphere { center, radius } => {
                let d = dist(y, center);
                if d == 0.0 {
                    let mut p = center.clone();
                    p[0] += radius;
                    Ok(p)
                } else {
                    Ok(radial(center, y, *radius, d))
                }
            }
            Self::Halfspace { normal, offset } => {
                let excess = dot(normal, y) - offset;
                if excess <= 0.0 {
                    return Ok(y.to_vec());
                }
                let nn = dot(normal, normal);
                Ok(y.iter().zip(normal).map(|(v, n)| v - excess / nn * n).collect())
            }
            Self::Product(parts) => {
                let mut out = Vec::with_capacity(y.len());
                for (p, yi) in split(parts, y) {
                    out.extend(p.project(yi)?);
                }
                Ok(out)
            }
            Self::Points(c) => c
                .nearest(y)
                .map(|(i, _)| c.points[i].clone())
                .ok_or_else(|| Error::Unsupported("projection onto an empty point cloud".into())),
            Self::Complement(inner) => {
                if self.contains(y) {
                    return Ok(y.to_vec());
                }
                match inner.as_ref() {
                    Self::Box { lo, hi } => {
                        let mut best = (f64::INFINITY, 0usize, 0.0);
                        for (i, v) in y.iter().enumerate() {
                            for bound in [lo[i], hi[i]] {
                                let gap = (v - bound).abs();
                                if gap < best.0 {
                                    best = (gap, i, bound);
                                }
                            }
                        }
                        let mut p = y.to_vec();
                        p[best.1] = best.2;
                        Ok(p)
                    }
                    Self::Ball { center, radius } => {
                        let d = dist(y, center);
                        if d == 0.0 {
                            return Err(Error::Unsupported(
                                "projection from the center of a ball complement is not unique".into(),
                            ));
                        }
                        Ok(radial(center, y, *radius, d))
                    }
                    Self::Halfspace { normal, offset } => {
                        let deficit = offset - dot(normal, y);
                        let nn = dot(normal, normal);
                        Ok(y.iter().zip(normal).map(|(v, n)| v + deficit / nn * n).collect())
                    }
                    _ => unreachable!("checked at construction"),
                }
            }
            Self::Intersection(parts) => dykstra(parts, y),
            Self::Union(parts) => {
                let mut best: Option<(usize, f64)> = None;
                for (i, p) in parts.iter().enumerate() {
                    let d = p.distance(y);
                    if best.map_or(true, |(_, b)| d < b) {
                        best = Some((i, d));
                    }
                }
                match best {
                    Some((i, _)) => parts[i].project(y),
                    None => Err(Error::Unsupported("projection onto an empty union".into())),
                }
            }
            Self::Sublevel(_) => Err(Error::Unsupported("sublevel sets have no analytic projection".into())),
        }
    }

    /// Distance from `x ∈ K` to the complement of `K` (zero on `∂K`); for
    /// `x ∉ K` this is `d(x, K)`. Used to decide whether a point lies on the
    /// boundary within a tolerance.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        if !self.contains(x) {
            return self.distance(x);
        }
        match self {
            Self::Whole { .. } => f64::INFINITY,
            Self::Empty { .. } => f64::INFINITY,
            Self::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (a, b))| (v - a).min(b - v))
                .fold(f64::INFINITY, f64::min),
            Self::Ball { center, radius } => radius - dist(x, center),
            Self::Sphere { .. } | Self::Points(_) => 0.0,
            Self::Halfspace { normal, offset } => (offset - dot(normal, x)) / norm(normal),
            Self::Product(parts) => split(parts, x).map(|(p, xi)| p.boundary_distance(xi)).fold(f64::INFINITY, f64::min),
            Self::Complement(inner) => inner.distance(x),
            Self::Intersection(parts) => parts.iter().map(|p| p.boundary_distance(x)).fold(f64::INFINITY, f64::min),
            Self::Union(parts) => parts
                .iter()
                .filter(|p| p.contains(x))
                .map(|p| p.boundary_distance(x))
                .fold(0.0, f64::max),
            Self::Sublevel(s) => -s.level(x) / s.lipschitz,
        }
    }
}

fn radial(center: &[f64], y: &[f64], radius: f64, d: f64) -> Vec<f64> {
    center.iter().zip(y).map(|(c, v)| c + radius * (v - c) / d).collect()
}

fn split<'a>(parts: &'a [SetOracle], x: &'a [f64]) -> impl Iterator<Item = (&'a SetOracle, &'a [f64])> + 'a {
    let mut start = 0;
    parts.iter().map(move |p| {
        let end = start + p.dim();
        let xi = &x[start..end];
        start = end;
        (p, xi)
    })
}

/// Dykstra's alternating projections, at most 50 sweeps.
fn dykstra(parts: &[SetOracle], y: &[f64]) -> Result<Vec<f64>> {
    let mut x = y.to_vec();
    let mut incr = vec![vec![0.0; y.len()]; parts.len()];
    for _ in 0..INTERSECTION_ITERS {
        let before = x.clone();
        for (p, inc) in parts.iter().zip(incr.iter_mut()) {
            let shifted: Vec<f64> = x.iter().zip(inc.iter()).map(|(a, b)| a + b).collect();
            let proj = p.project(&shifted)?;
            for i in 0..x.len() {
                inc[i] = shifted[i] - proj[i];
            }
            x = proj;
        }
        if dist(&before, &x) <= 1e-15 * (1.0 + norm(&x)) {
            break;
        }
    }
    Ok(x)
}

/// Geometric ladder `h_max, h_max/2, …` down to `h_min` (always included).
pub fn h_ladder(h_min: f64, h_max: f64) -> Vec<f64> {
    let mut hs = Vec::new();
    let mut h = h_max;
    while h > h_min {
        hs.push(h);
        h *= 0.5;
    }
    hs.push(h_min);
    hs
}

/// `min_h d(x + h v, K) / h` over the ladder `[h_min, h_max]` with ratio ½.
///
/// A value near zero certifies numerically that `v` is contingent to `K` at
/// `x`; for a transversal direction it approaches `‖v‖ sin(angle)`.
pub fn tangent_residual(k: &SetOracle, x: &[f64], v: &[f64], h_min: f64, h_max: f64) -> f64 {
    assert!(0.0 < h_min && h_min < h_max, "ladder needs 0 < h_min < h_max");
    let mut probe = vec![0.0; x.len()];
    h_ladder(h_min, h_max)
        .into_iter()
        .map(|h| {
            for i in 0..x.len() {
                probe[i] = x[i] + h * v[i];
            }
            k.distance(&probe) / h
        })
        .fold(f64::INFINITY, f64::min)
}

/// Which Painlevé–Kuratowski limit to approximate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitMode {
    /// Cluster points: near at least half of the tail clouds.
    Upper,
    /// Limit points: near every tail cloud.
    Lower,
}

/// Finite proxy for set limits of a sequence of clouds. The tail is the
/// second half of the sequence; candidates are the tail's own points.
pub fn set_limit(clouds: &[PointCloud], mode: LimitMode, eps: f64) -> Result<PointCloud> {
    if clouds.len() < 2 {
        return Err(Error::InvalidInput("set_limit needs at least two clouds".into()));
    }
    let tail = &clouds[clouds.len() / 2..];
    let mut kept = Vec::new();
    for cloud in tail {
        for p in cloud.points() {
            let near = tail
                .iter()
                .filter(|c| c.nearest(p).map_or(false, |(_, d)| d <= eps))
                .count();
            let accept = match mode {
                LimitMode::Upper => 2 * near >= tail.len(),
                LimitMode::Lower => near == tail.len(),
            };
            if accept {
                kept.push(p.clone());
            }
        }
    }
    Ok(PointCloud::new(kept, eps))
}

/// `y − x` for `x = Π_K(y)`; a proximal normal at `x`.
pub fn proximal_normal(k: &SetOracle, y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let x = k.project(y)?;
    let n = sub(y, &x);
    Ok((x, n))
}
