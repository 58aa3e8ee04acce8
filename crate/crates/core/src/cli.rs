//! Batch front end: `viability <subcommand> --config FILE --out DIR`.
//!
//! Exit codes: 0 on success, 1 on I/O failure, 2 on configuration errors,
//! 3 on numerical failures.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::characteristics::{graph_sample, solve_char, solve_field, Regime, SeedPlan};
use crate::config::{Config, ConfigError, Method, Mode};
use crate::dynamics::{flow, integrate, reach_set};
use crate::epi_hj::{self, EpigraphMode, HjTolerance};
use crate::error::Error;
use crate::grid::{GridField, GridSpec};
use crate::io::{header, write_row};
use crate::kernels::{capt_field, discrete_kernel, exit_time, hitting_time, viab_field, viable_capt_field};
use crate::sets::PointCloud;

#[derive(Debug, Parser)]
#[command(name = "viability", version, about = "Viability kernels, capture basins, value functions and characteristics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// Problem file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for the CSV files.
    #[arg(long, env = "VIABILITY_OUT_DIR", default_value = ".")]
    out: PathBuf,
    /// Worker threads for grid sweeps (0: all cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// RK4 trajectory from `run.x0` over `[run.t0, run.t1]`.
    Integrate(Common),
    /// State reached from `run.x0` at time `run.t`.
    Flow(Common),
    /// Images at time `run.t` of the grid nodes (or `run.points`).
    Reach(Common),
    /// Exit time from `[set]` at the evaluation points.
    ExitTime(Common),
    /// Hitting time of `[target]` at the evaluation points.
    HittingTime(Common),
    /// Exit-time field of `[set]` on `[grid]`.
    Viab(Common),
    /// Hitting-time field of `[target]` on `[grid]`.
    Capt(Common),
    /// Capture-margin field for `[set]` and `[target]`.
    ViableCapt(Common),
    /// Discrete viability kernel of `[set]` on `[grid]`.
    Kernel(Common),
    /// Supremum value function on `[grid]`.
    ValueSup(Common),
    /// Infimum (stopping) value function on `[grid]`.
    ValueInf(Common),
    /// Lyapunov value function on `[grid]`.
    Lyapunov(Common),
    /// Minimal time to `[target]` on `[grid]`.
    Mintime(Common),
    /// Minimal length to `[target]` on `[grid]`.
    Minlength(Common),
    /// Hamilton-Jacobi residuals of the computed value function.
    HjCheck(Common),
    /// Characteristics solution on `pde.times × [grid]`.
    PdeChar(Common),
    /// Sampled solution graph for a general drift.
    PdeGraph(Common),
    /// Closed-form age-structured example and its comparison with the solver.
    Demo4d(Common),
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Self::Integrate(c) => ("integrate", c),
            Self::Flow(c) => ("flow", c),
            Self::Reach(c) => ("reach", c),
            Self::ExitTime(c) => ("exit-time", c),
            Self::HittingTime(c) => ("hitting-time", c),
            Self::Viab(c) => ("viab", c),
            Self::Capt(c) => ("capt", c),
            Self::ViableCapt(c) => ("viable-capt", c),
            Self::Kernel(c) => ("kernel", c),
            Self::ValueSup(c) => ("value-sup", c),
            Self::ValueInf(c) => ("value-inf", c),
            Self::Lyapunov(c) => ("lyapunov", c),
            Self::Mintime(c) => ("mintime", c),
            Self::Minlength(c) => ("minlength", c),
            Self::HjCheck(c) => ("hj-check", c),
            Self::PdeChar(c) => ("pde-char", c),
            Self::PdeGraph(c) => ("pde-graph", c),
            Self::Demo4d(c) => ("demo4d", c),
        }
    }
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Numeric(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Self::Io(_) => 1,
            Self::Config(_) => 2,
            Self::Numeric(_) => 3,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Self::Config(format!("config error: {e}"))
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self::Io(format!("i/o error: {e}"))
    }
}

/// Tags a library error with the operation that raised it.
fn op(name: &'static str) -> impl Fn(Error) -> Failure {
    move |e| match e {
        Error::NonFinite { .. } | Error::CapTooSmall { .. } | Error::NoConvergence { .. } | Error::DescentViolation { .. } => {
            Failure::Numeric(format!("{name} failed: {e}"))
        }
        _ => Failure::Config(format!("{name}: {e}")),
    }
}

/// Runs the front end on `argv` (program name first) and returns the exit
/// code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (name, common) = cli.command.parts();
    let result = if common.workers > 0 {
        match rayon::ThreadPoolBuilder::new().num_threads(common.workers).build() {
            Ok(pool) => pool.install(|| dispatch(&cli.command, common)),
            Err(e) => Err(Failure::Io(e.to_string())),
        }
    } else {
        dispatch(&cli.command, common)
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            let msg = match &f {
                Failure::Config(m) | Failure::Numeric(m) | Failure::Io(m) => m,
            };
            eprintln!("viability {name}: {msg}");
            f.code()
        }
    }
}

fn dispatch(cmd: &Command, common: &Common) -> Result<(), Failure> {
    let text = fs::read_to_string(&common.config)
        .map_err(|e| Failure::Config(format!("config error: cannot read {}: {e}", common.config.display())))?;
    let cfg = Config::parse(&text)?;
    let out = common.out.as_path();
    fs::create_dir_all(out)?;
    match cmd {
        Command::Integrate(_) => cmd_integrate(&cfg, out),
        Command::Flow(_) => cmd_flow(&cfg, out),
        Command::Reach(_) => cmd_reach(&cfg, out),
        Command::ExitTime(_) => cmd_pointwise(&cfg, out, false),
        Command::HittingTime(_) => cmd_pointwise(&cfg, out, true),
        Command::Viab(_) => {
            let r = cfg.run()?;
            let field = viab_field(&cfg.field()?, &cfg.set()?, &cfg.grid()?, r.t_max, r.h).map_err(op("viab"))?;
            write_file(out, "viab.csv", |w| field.write_csv(w))
        }
        Command::Capt(_) => {
            let r = cfg.run()?;
            let field = capt_field(&cfg.field()?, &cfg.target()?, &cfg.grid()?, r.t_max, r.h).map_err(op("capt"))?;
            write_file(out, "capt.csv", |w| field.write_csv(w))
        }
        Command::ViableCapt(_) => {
            let r = cfg.run()?;
            let field = viable_capt_field(&cfg.field()?, &cfg.set()?, &cfg.target()?, &cfg.grid()?, r.t_max, r.h)
                .map_err(op("viable-capt"))?;
            write_file(out, "viable_capt.csv", |w| field.write_csv(w))
        }
        Command::Kernel(_) => {
            let r = cfg.run()?;
            let nodes = discrete_kernel(&cfg.field()?, &cfg.set()?, &cfg.grid()?, r.h).map_err(op("kernel"))?;
            write_file(out, "kernel.csv", |w| nodes.write_csv(w))
        }
        Command::ValueSup(_) => cmd_value(&cfg, out, Mode::Sup),
        Command::ValueInf(_) => cmd_value(&cfg, out, Mode::Inf),
        Command::Lyapunov(_) => {
            let r = cfg.run()?;
            let p = cfg.problem()?;
            let field = node_field(&cfg.grid()?, |x| epi_hj::lyapunov(&p, x, r.t_max, r.h)).map_err(op("lyapunov"))?;
            write_file(out, "lyapunov.csv", |w| field.write_csv(w))
        }
        Command::Mintime(_) | Command::Minlength(_) => {
            let r = cfg.run()?;
            let (f, c) = (cfg.field()?, cfg.target()?);
            let (name, file) = match cmd {
                Command::Mintime(_) => ("mintime", "mintime.csv"),
                _ => ("minlength", "minlength.csv"),
            };
            let field = node_field(&cfg.grid()?, |x| match cmd {
                Command::Mintime(_) => epi_hj::minimal_time(&f, &c, x, r.t_max, r.h),
                _ => epi_hj::minimal_length(&f, &c, x, r.t_max, r.h),
            })
            .map_err(op(name))?;
            write_file(out, file, |w| field.write_csv(w))
        }
        Command::HjCheck(_) => cmd_hj_check(&cfg, out),
        Command::PdeChar(_) => {
            let r = cfg.run()?;
            let prob = cfg.char_problem()?;
            let times = &cfg.pde()?.times;
            let field = solve_field(&prob, times, &cfg.grid()?.nodes(), r.h).map_err(op("pde-char"))?;
            write_file(out, "pde_char.csv", |w| field.write_csv(w))
        }
        Command::PdeGraph(_) => {
            let r = cfg.run()?;
            let prob = cfg.char_problem()?;
            let pde = cfg.pde()?;
            let plan = SeedPlan {
                region: cfg.grid()?,
                per_face: pde.per_face,
            };
            let cloud = graph_sample(&prob, &plan, pde.t_end, r.h, pde.tol).map_err(op("pde-graph"))?;
            println!("graph points: {}", cloud.len());
            write_file(out, "pde_graph.csv", |w| cloud.write_csv(w))
        }
        Command::Demo4d(_) => cmd_demo4d(&cfg, out),
    }
}

fn write_file(dir: &Path, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), Failure> {
    let path = dir.join(name);
    let mut w = BufWriter::new(File::create(&path)?);
    body(&mut w)?;
    w.flush()?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Evaluates `f` at every node, in node order.
fn node_field(grid: &GridSpec, f: impl Fn(&[f64]) -> crate::Result<f64> + Sync) -> crate::Result<GridField> {
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| f(&grid.node(i)))
        .collect::<crate::Result<Vec<f64>>>()?;
    Ok(GridField::new(grid.clone(), values, vec![true; grid.len()]))
}

fn required_x0(cfg: &Config) -> Result<Vec<f64>, Failure> {
    cfg.run.x0.clone().ok_or_else(|| Failure::Config("config error: [run]: x0 is required".into()))
}

fn eval_points(cfg: &Config) -> Result<Vec<Vec<f64>>, Failure> {
    if !cfg.run.points.is_empty() {
        return Ok(cfg.run.points.clone());
    }
    Ok(cfg.grid()?.nodes())
}

fn cmd_integrate(cfg: &Config, out: &Path) -> Result<(), Failure> {
    let r = cfg.run()?;
    let traj = integrate(&cfg.field()?, &required_x0(cfg)?, r.t0, r.t1, r.h).map_err(op("integrate"))?;
    write_file(out, "trajectory.csv", |w| traj.write_csv(w))
}

fn cmd_flow(cfg: &Config, out: &Path) -> Result<(), Failure> {
    let r = cfg.run()?;
    let x = flow(&cfg.field()?, r.t, &required_x0(cfg)?, r.h).map_err(op("flow"))?;
    write_file(out, "flow.csv", |w| {
        writeln!(w, "{}", header(&[], "x", x.len(), &[]))?;
        write_row(w, x.iter().copied())
    })
}

fn cmd_reach(cfg: &Config, out: &Path) -> Result<(), Failure> {
    let r = cfg.run()?;
    let seeds = eval_points(cfg)?;
    let images = reach_set(&cfg.field()?, r.t, &seeds, r.h).map_err(op("reach"))?;
    let kept: Vec<Vec<f64>> = images.into_iter().filter_map(|x| x.ok()).collect();
    let cloud = PointCloud::new(kept, 0.0);
    write_file(out, "reach.csv", |w| cloud.write_csv(w))
}

fn cmd_pointwise(cfg: &Config, out: &Path, hitting: bool) -> Result<(), Failure> {
    let r = cfg.run()?;
    let f = cfg.field()?;
    let (name, file, set) = if hitting {
        ("hitting-time", "hitting_time.csv", cfg.target()?)
    } else {
        ("exit-time", "exit_time.csv", cfg.set()?)
    };
    let points = eval_points(cfg)?;
    let values = points
        .par_iter()
        .map(|x| {
            if hitting {
                hitting_time(&f, &set, x, r.t_max, r.h)
            } else {
                exit_time(&f, &set, x, r.t_max, r.h)
            }
        })
        .collect::<crate::Result<Vec<f64>>>()
        .map_err(op(name))?;
    write_file(out, file, |w| {
        writeln!(w, "{}", header(&[], "x", f.dim(), &["value"]))?;
        for (x, v) in points.iter().zip(&values) {
            write_row(w, x.iter().copied().chain([*v]))?;
        }
        Ok(())
    })
}

fn direct_value(cfg: &Config, mode: Mode, grid: &GridSpec) -> Result<GridField, Failure> {
    let r = cfg.run()?;
    let p = cfg.problem()?;
    let name = match mode {
        Mode::Sup => "value-sup",
        Mode::Inf => "value-inf",
    };
    node_field(grid, |x| match mode {
        Mode::Sup => epi_hj::value_sup(&p, x, r.t_max, r.h),
        Mode::Inf => epi_hj::value_inf(&p, x, r.t_max, r.h),
    })
    .map_err(op(name))
}

fn cmd_value(cfg: &Config, out: &Path, mode: Mode) -> Result<(), Failure> {
    let (name, file) = match mode {
        Mode::Sup => ("value-sup", "value_sup.csv"),
        Mode::Inf => ("value-inf", "value_inf.csv"),
    };
    let field = match cfg.problem_config()?.method {
        Method::Direct => direct_value(cfg, mode, &cfg.grid()?)?,
        Method::Epigraph => {
            let r = cfg.run()?;
            let em = match mode {
                Mode::Sup => EpigraphMode::Sup,
                Mode::Inf => EpigraphMode::Inf,
            };
            epi_hj::epigraph_value_field(&cfg.problem()?, &cfg.grid()?, em, r.t_max, r.h).map_err(op(name))?
        }
    };
    write_file(out, file, |w| field.write_csv(w))
}

fn cmd_hj_check(cfg: &Config, out: &Path) -> Result<(), Failure> {
    let pc = cfg.problem_config()?;
    let grid = cfg.grid()?;
    let v = direct_value(cfg, pc.mode, &grid)?;
    let p = cfg.problem()?;
    let tol = HjTolerance {
        residual: pc.residual_tol,
        complementarity: pc.complementarity_tol,
    };
    let samples = eval_points(cfg)?;
    let report = match pc.mode {
        Mode::Sup => epi_hj::hj_check_sup(&p, &v, &samples, tol),
        Mode::Inf => epi_hj::hj_check_inf(&p, &v, &samples, tol),
    };
    println!("violations: {} of {}", report.violations(), report.rows.len());
    write_file(out, "hj_check.csv", |w| report.write_csv(w))
}

fn cmd_demo4d(cfg: &Config, out: &Path) -> Result<(), Failure> {
    let r = cfg.run()?;
    let (demo, times) = cfg.demo4d()?;
    let grid = cfg.grid()?;
    if grid.dim() != 4 {
        return Err(Failure::Config("config error: [grid]: demo4d needs a 4-dimensional grid".into()));
    }
    let prob = demo.char_problem();
    let pairs: Vec<(f64, Vec<f64>)> = times.iter().flat_map(|&t| grid.nodes().into_iter().map(move |x| (t, x))).collect();
    let rows = pairs
        .par_iter()
        .map(|(t, x)| {
            let regime = match demo.regime(*t, x) {
                Ok(regime) => regime,
                Err(Error::ParamDomain(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
            let exact = demo.solution(*t, x)?;
            let numeric = solve_char(&prob, *t, x, r.h)?.map_or(f64::NAN, |u| u[0]);
            Ok(Some((*t, x.clone(), regime, exact, numeric)))
        })
        .collect::<crate::Result<Vec<_>>>()
        .map_err(op("demo4d"))?;
    let rows: Vec<_> = rows.into_iter().flatten().collect();
    let max_diff = rows.iter().map(|r| (r.3 - r.4).abs()).fold(0.0, f64::max);
    println!("points: {}, max |closed form - solver|: {max_diff:e}", rows.len());
    write_file(out, "demo4d.csv", |w| {
        writeln!(w, "{}", header(&["t"], "x", 4, &["u", "regime"]))?;
        for (t, x, regime, exact, _) in &rows {
            let k = match regime {
                Regime::Initial => 1.0,
                Regime::Birth => 2.0,
                Regime::Upper => 3.0,
            };
            write_row(w, [*t].into_iter().chain(x.iter().copied()).chain([*exact, k]))?;
        }
        Ok(())
    })?;
    write_file(out, "demo4d_diff.csv", |w| {
        writeln!(w, "{}", header(&["t"], "x", 4, &["closed_form", "solver", "diff"]))?;
        for (t, x, _, exact, numeric) in &rows {
            write_row(w, [*t].into_iter().chain(x.iter().copied()).chain([*exact, *numeric, (exact - numeric).abs()]))?;
        }
        Ok(())
    })
}
