//! TOML problem files for the command-line front end.
//!
//! Sections: `[field]`, `[set]`, `[target]`, `[grid]`, `[run]`,
//! `[problem]`, `[pde]` and `[demo4d]`. Each subcommand reads the sections
//! it needs; a missing one is reported by name.

use serde::Deserialize;

use crate::characteristics::{BoundaryData, CharProblem, Demo4d, Drift};
use crate::dynamics::VectorField;
use crate::epi_hj::{Lagrangian, LagrangianProblem, Obstacle, DEFAULT_VALUE_CAP};
use crate::fields::{self, Monomial};
use crate::grid::GridSpec;
use crate::sets::SetOracle;

/// A configuration problem, reported with exit code 2.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

impl ConfigError {
    fn section(name: &str, msg: impl std::fmt::Display) -> Self {
        Self(format!("[{name}]: {msg}"))
    }
}

type Res<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Deserialize)]
pub struct Config {
    pub field: Option<FieldSpec>,
    pub set: Option<SetSpec>,
    pub target: Option<SetSpec>,
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub run: RunConfig,
    pub problem: Option<ProblemConfig>,
    pub pde: Option<PdeConfig>,
    pub demo4d: Option<Demo4dConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FieldSpec {
    Linear { matrix: Vec<Vec<f64>> },
    Scaled { dim: usize, lambda: f64 },
    Rotation {
        #[serde(default = "one")]
        omega: f64,
    },
    Logistic { beta: f64, b: f64 },
    Transport { velocity: Vec<f64> },
    Demographic4d { rho: f64, sigma: f64, beta: f64, b: f64 },
    Polynomial { components: Vec<Vec<MonomialSpec>> },
}

#[derive(Debug, Clone, Deserialize)]
pub struct MonomialSpec {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SetSpec {
    Whole { dim: usize },
    Empty { dim: usize },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Interval { lo: f64, hi: f64 },
    Ball { center: Vec<f64>, radius: f64 },
    Sphere { center: Vec<f64>, radius: f64 },
    Halfspace { normal: Vec<f64>, offset: f64 },
    Points {
        points: Vec<Vec<f64>>,
        #[serde(default)]
        tol: f64,
    },
    Product { parts: Vec<SetSpec> },
    Union { parts: Vec<SetSpec> },
    Intersection { parts: Vec<SetSpec> },
    Complement { inner: std::boxed::Box<SetSpec> },
}

#[derive(Debug, Clone, Deserialize)]
pub struct GridConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub t_max: f64,
    pub h: f64,
    pub t0: f64,
    pub t1: f64,
    /// Horizon for `flow` and `reach`.
    pub t: f64,
    pub x0: Option<Vec<f64>>,
    /// Evaluation points for pointwise subcommands.
    pub points: Vec<Vec<f64>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            t_max: 10.0,
            h: 1e-2,
            t0: 0.0,
            t1: 1.0,
            t: 1.0,
            x0: None,
            points: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LagrangianSpec {
    Zero,
    Constant { value: f64 },
    Speed,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ObstacleSpec {
    Zero,
    Constant { value: f64 },
    Norm,
    /// Indicator of the `[target]` set.
    Indicator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Direct,
    Epigraph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Sup,
    Inf,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ProblemConfig {
    pub lagrangian: LagrangianSpec,
    #[serde(default)]
    pub a: f64,
    pub obstacle: ObstacleSpec,
    #[serde(default = "default_cap")]
    pub cap: f64,
    #[serde(default = "default_method")]
    pub method: Method,
    /// Which value `hj-check` verifies.
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "default_tol")]
    pub residual_tol: f64,
    #[serde(default = "default_tol")]
    pub complementarity_tol: f64,
}

/// `offset + coeffs · z` composed with an outer function.
#[derive(Debug, Clone, Deserialize)]
pub struct ScalarFn {
    #[serde(default)]
    pub kind: Outer,
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outer {
    #[default]
    Affine,
    Sin,
    Cos,
    Exp,
    Abs,
}

impl ScalarFn {
    pub fn eval(&self, z: &[f64]) -> f64 {
        let s = self.offset + self.coeffs.iter().zip(z).map(|(c, v)| c * v).sum::<f64>();
        match self.kind {
            Outer::Affine => s,
            Outer::Sin => s.sin(),
            Outer::Cos => s.cos(),
            Outer::Exp => s.exp(),
            Outer::Abs => s.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftSpec {
    /// `x' = φ(x)` from `[field]`.
    Field,
    /// `x' = y`.
    Output,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PdeConfig {
    pub drift: DriftSpec,
    /// `g = −decay · y + source`, componentwise.
    #[serde(default)]
    pub decay: f64,
    #[serde(default)]
    pub source: f64,
    /// One function of `x` per output component.
    pub u0: Vec<ScalarFn>,
    /// One function of `(t, ξ)` per output component.
    pub v: Vec<ScalarFn>,
    pub impulse_times: Option<Vec<f64>>,
    /// Evaluation times for `pde-char`; states are the `[grid]` nodes.
    #[serde(default)]
    pub times: Vec<f64>,
    /// Sweep horizon and seeding for `pde-graph`.
    #[serde(default = "one")]
    pub t_end: f64,
    #[serde(default = "default_per_face")]
    pub per_face: usize,
    #[serde(default = "default_graph_tol")]
    pub tol: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Demo4dConfig {
    pub rho: f64,
    pub sigma: f64,
    pub beta: f64,
    pub b: f64,
    pub r2: f64,
    /// Constant coefficient `A`.
    pub a: f64,
    /// Function of `x`.
    pub u0: ScalarFn,
    /// Function of `(t, x₂, x₃, x₄)`.
    pub v1: ScalarFn,
    /// Function of `(t, x₁, x₃, x₄)`.
    pub v_r2: ScalarFn,
    pub times: Vec<f64>,
}

fn one() -> f64 {
    1.0
}
fn default_cap() -> f64 {
    DEFAULT_VALUE_CAP
}
fn default_method() -> Method {
    Method::Direct
}
fn default_mode() -> Mode {
    Mode::Sup
}
fn default_tol() -> f64 {
    0.05
}
fn default_per_face() -> usize {
    10
}
fn default_graph_tol() -> f64 {
    1e-3
}

fn missing(name: &str) -> ConfigError {
    ConfigError(format!("missing section [{name}]"))
}

impl Config {
    pub fn parse(text: &str) -> Res<Self> {
        toml::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn field(&self) -> Res<VectorField> {
        self.field.as_ref().ok_or_else(|| missing("field"))?.build()
    }

    pub fn set(&self) -> Res<SetOracle> {
        self.set.as_ref().ok_or_else(|| missing("set"))?.build("set")
    }

    pub fn target(&self) -> Res<SetOracle> {
        self.target.as_ref().ok_or_else(|| missing("target"))?.build("target")
    }

    pub fn grid(&self) -> Res<GridSpec> {
        let g = self.grid.as_ref().ok_or_else(|| missing("grid"))?;
        GridSpec::new(g.lo.clone(), g.hi.clone(), g.counts.clone()).map_err(|e| ConfigError::section("grid", e))
    }

    pub fn run(&self) -> Res<&RunConfig> {
        let r = &self.run;
        if !(r.h > 0.0) || !(r.t_max > 0.0) {
            return Err(ConfigError::section("run", "h and t_max must be positive"));
        }
        Ok(r)
    }

    pub fn problem_config(&self) -> Res<&ProblemConfig> {
        self.problem.as_ref().ok_or_else(|| missing("problem"))
    }

    pub fn problem(&self) -> Res<LagrangianProblem> {
        let p = self.problem_config()?;
        let l = match p.lagrangian {
            LagrangianSpec::Zero => Lagrangian::Zero,
            LagrangianSpec::Constant { value } => Lagrangian::Constant(value),
            LagrangianSpec::Speed => Lagrangian::Speed,
        };
        let u = match p.obstacle {
            ObstacleSpec::Zero => Obstacle::zero(),
            ObstacleSpec::Constant { value } => Obstacle::constant(value),
            ObstacleSpec::Norm => Obstacle::norm(),
            ObstacleSpec::Indicator => Obstacle::indicator(self.target()?),
        };
        if !(p.cap > 0.0) {
            return Err(ConfigError::section("problem", "cap must be positive"));
        }
        Ok(LagrangianProblem::new(self.field()?, l, p.a, u).with_cap(p.cap))
    }

    pub fn pde(&self) -> Res<&PdeConfig> {
        self.pde.as_ref().ok_or_else(|| missing("pde"))
    }

    pub fn char_problem(&self) -> Res<CharProblem> {
        let p = self.pde()?;
        let k = self.set()?;
        let n = k.dim();
        let m = p.u0.len();
        if m == 0 || p.v.len() != m {
            return Err(ConfigError::section("pde", "u0 and v need the same positive number of components"));
        }
        let drift = match p.drift {
            DriftSpec::Field => {
                let f = self.field()?;
                if f.dim() != n {
                    return Err(ConfigError::section("pde", "field and set dimensions differ"));
                }
                Drift::Phi(f)
            }
            DriftSpec::Output => {
                if m != n {
                    return Err(ConfigError::section("pde", "drift = \"output\" needs as many outputs as states"));
                }
                Drift::full(|_, _, y, out| out.copy_from_slice(y))
            }
        };
        let u0 = p.u0.clone();
        let v = p.v.clone();
        let mut data = BoundaryData::new(
            move |x| u0.iter().map(|f| f.eval(x)).collect(),
            move |t, xi| {
                let mut z = vec![t];
                z.extend_from_slice(xi);
                v.iter().map(|f| f.eval(&z)).collect()
            },
        );
        if let Some(ts) = &p.impulse_times {
            data = data.with_impulses(ts.clone());
        }
        let (decay, source) = (p.decay, p.source);
        Ok(CharProblem::new(
            drift,
            move |_, _, y, out| {
                for (o, v) in out.iter_mut().zip(y) {
                    *o = -decay * v + source;
                }
            },
            k,
            data,
            m,
        ))
    }

    pub fn demo4d(&self) -> Res<(Demo4d, Vec<f64>)> {
        let d = self.demo4d.as_ref().ok_or_else(|| missing("demo4d"))?;
        let a = d.a;
        let (u0, v1, v_r2) = (d.u0.clone(), d.v1.clone(), d.v_r2.clone());
        let demo = Demo4d::new(
            d.rho,
            d.sigma,
            d.beta,
            d.b,
            d.r2,
            move |_, _| a,
            move |x| u0.eval(x),
            move |t, z| v1.eval(&[t, z[0], z[1], z[2]]),
            move |t, z| v_r2.eval(&[t, z[0], z[1], z[2]]),
        )
        .map_err(|e| ConfigError::section("demo4d", e))?;
        Ok((demo, d.times.clone()))
    }
}

impl FieldSpec {
    pub fn build(&self) -> Res<VectorField> {
        let bad = |msg: &str| ConfigError::section("field", msg);
        Ok(match self {
            Self::Linear { matrix } => {
                let n = matrix.len();
                if n == 0 || matrix.iter().any(|r| r.len() != n) {
                    return Err(bad("matrix must be square and nonempty"));
                }
                fields::linear(matrix.clone())
            }
            Self::Scaled { dim, lambda } => {
                if *dim == 0 {
                    return Err(bad("dim must be positive"));
                }
                fields::scaled_identity(*dim, *lambda)
            }
            Self::Rotation { omega } => fields::rotation(*omega),
            Self::Logistic { beta, b } => fields::logistic(*beta, *b),
            Self::Transport { velocity } => {
                if velocity.is_empty() {
                    return Err(bad("velocity must be nonempty"));
                }
                fields::transport(velocity.clone())
            }
            Self::Demographic4d { rho, sigma, beta, b } => fields::demographic4d(*rho, *sigma, *beta, *b),
            Self::Polynomial { components } => {
                let n = components.len();
                if n == 0 || components.iter().flatten().any(|m| m.powers.len() != n) {
                    return Err(bad("every monomial needs one power per component"));
                }
                fields::polynomial(
                    components
                        .iter()
                        .map(|c| {
                            c.iter()
                                .map(|m| Monomial {
                                    coeff: m.coeff,
                                    powers: m.powers.clone(),
                                })
                                .collect()
                        })
                        .collect(),
                )
            }
        })
    }
}

impl SetSpec {
    pub fn build(&self, section: &str) -> Res<SetOracle> {
        let bad = |msg: String| ConfigError::section(section, msg);
        let parts = |ps: &[SetSpec]| -> Res<Vec<SetOracle>> {
            if ps.is_empty() {
                return Err(bad("parts must be nonempty".into()));
            }
            ps.iter().map(|p| p.build(section)).collect()
        };
        Ok(match self {
            Self::Whole { dim } => SetOracle::whole(*dim),
            Self::Empty { dim } => SetOracle::empty(*dim),
            Self::Box { lo, hi } => {
                if lo.len() != hi.len() || lo.is_empty() || lo.iter().zip(hi).any(|(a, b)| a > b) {
                    return Err(bad("box needs lo ≤ hi of equal nonzero length".into()));
                }
                SetOracle::boxed(lo.clone(), hi.clone())
            }
            Self::Interval { lo, hi } => {
                if lo > hi {
                    return Err(bad("interval needs lo ≤ hi".into()));
                }
                SetOracle::interval(*lo, *hi)
            }
            Self::Ball { center, radius } => SetOracle::ball(center.clone(), *radius),
            Self::Sphere { center, radius } => SetOracle::sphere(center.clone(), *radius),
            Self::Halfspace { normal, offset } => SetOracle::halfspace(normal.clone(), *offset),
            Self::Points { points, tol } => SetOracle::points(points.clone(), *tol),
            Self::Product { parts: ps } => SetOracle::Product(parts(ps)?),
            Self::Union { parts: ps } => SetOracle::Union(parts(ps)?),
            Self::Intersection { parts: ps } => SetOracle::Intersection(parts(ps)?),
            Self::Complement { inner } => SetOracle::complement(inner.build(section)?).map_err(|e| bad(e.to_string()))?,
        })
    }
}
