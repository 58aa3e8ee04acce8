//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

use std::f64::consts::{E, PI};
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use viability::characteristics::{
    backward_exit_time, default_graph_ladder, graph_sample, query_graph, frankowska_residual, solve_char, BoundaryData,
    CharProblem, Demo4d, Drift, Regime, SeedPlan,
};
use viability::epi_hj::{
    epigraph_value_field, hj_check_inf, hj_check_sup, minimal_length, minimal_time, value_inf, value_sup, EpigraphMode,
    HjTolerance, Lagrangian, LagrangianProblem, Obstacle,
};
use viability::kernels::{capt_field, capture_margin, discrete_kernel, hitting_time, viab_field};
use viability::linalg::{dist, norm};
use viability::viable_euler::viable_trajectory;
use viability::{fields, integrate, is_inf, reach_set, GridField, GridSpec, SetOracle, VectorField};

fn report(n: u32, name: &str, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {n:>2} {verdict}: {name} ({detail})");
    assert!(pass, "criterion {n} failed: {detail}");
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn criterion_01_growth_bound() {
    let bumpy = VectorField::autonomous(2, |x, out| {
        out[0] = x[1].sin() + 0.5;
        out[1] = 0.3 * x[0];
    })
    .with_growth(1.0);
    let cases: Vec<(&str, VectorField)> = vec![
        ("scaled", fields::scaled_identity(2, 0.7)),
        ("rotation", fields::rotation(1.5)),
        ("linear", fields::linear(vec![vec![0.2, 1.0], vec![-1.0, 0.3]])),
        ("transport", fields::transport(vec![1.0, -2.0])),
        ("bounded-plus-linear", bumpy),
    ];
    let mut r = rng(1);
    let mut worst = f64::NEG_INFINITY;
    for (_, f) in &cases {
        let c = f.growth_c.expect("declared growth constant");
        for _ in 0..20 {
            let x0: Vec<f64> = (0..f.dim()).map(|_| r.gen_range(-2.0..2.0)).collect();
            let traj = integrate(f, &x0, 0.0, 3.0, 1e-2).unwrap();
            for (t, x) in traj.times.iter().zip(&traj.states) {
                let bound = (norm(&x0) + 1.0) * (c * t).exp() - 1.0 + 1e-6;
                worst = worst.max(norm(x) - bound);
            }
        }
    }
    report(1, "growth bound", worst <= 0.0, format!("max excess over bound {worst:.3e}"));
}

#[test]
fn criterion_02_monotone_contraction() {
    let f = fields::scaled_identity(2, -2.0);
    let mu = f.monotone_mu.unwrap();
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let a: Vec<f64> = (0..2).map(|_| r.gen_range(-3.0..3.0)).collect();
        let b: Vec<f64> = (0..2).map(|_| r.gen_range(-3.0..3.0)).collect();
        let ta = integrate(&f, &a, 0.0, 2.0, 1e-2).unwrap();
        let tb = integrate(&f, &b, 0.0, 2.0, 1e-2).unwrap();
        let d0 = dist(&a, &b);
        for k in 0..ta.len() {
            let bound = (-mu * ta.times[k]).exp() * d0;
            worst = worst.max(dist(&ta.states[k], &tb.states[k]) / bound);
        }
    }
    report(2, "monotone contraction", worst <= 1.0 + 1e-6, format!("max ratio to bound {worst:.12}"));
}

fn euler_error(k: &SetOracle, x0: &[f64], h: f64) -> (f64, f64) {
    let out = viable_trajectory(&fields::rotation(1.0), k, x0, 2.0 * PI, h).unwrap();
    let r0 = norm(x0);
    let th0 = x0[1].atan2(x0[0]);
    let mut err: f64 = 0.0;
    let mut off: f64 = 0.0;
    for (t, x) in out.trajectory.times.iter().zip(&out.trajectory.states) {
        let exact = [r0 * (th0 + t).cos(), r0 * (th0 + t).sin()];
        err = err.max(dist(x, &exact));
        off = off.max(k.distance(x));
    }
    (err, off)
}

#[test]
fn criterion_03_viable_euler_convergence() {
    let circle = SetOracle::sphere(vec![0.0, 0.0], 1.0);
    let hs = [1e-2, 5e-3, 2.5e-3];
    let runs: Vec<(f64, f64)> = hs.iter().map(|&h| euler_error(&circle, &[1.0, 0.0], h)).collect();
    let off = runs.iter().map(|r| r.1).fold(0.0, f64::max);
    let ratios: Vec<f64> = runs.windows(2).map(|w| w[1].0 / w[0].0).collect();
    // diagnostic: inside the disk the radial drift of Euler is first order
    let disk = SetOracle::ball(vec![0.0, 0.0], 1.0);
    let inner: Vec<f64> = hs.iter().map(|&h| euler_error(&disk, &[0.5, 0.0], h).0).collect();
    println!(
        "criterion  3 diagnostic: circle errors {:?}, disk-interior errors {:?} (ratios {:.4}, {:.4})",
        runs.iter().map(|r| r.0).collect::<Vec<_>>(),
        inner,
        inner[1] / inner[0],
        inner[2] / inner[1]
    );
    let pass = off <= 1e-9 && ratios.iter().all(|r| (0.4..=0.6).contains(r));
    report(
        3,
        "viable Euler convergence",
        pass,
        format!("max distance to K {off:.2e}, error ratios {:.4}, {:.4}", ratios[0], ratios[1]),
    );
}

fn hausdorff_cells(a: &[Vec<f64>], b: &[Vec<f64>], cell: f64) -> f64 {
    let one_way = |p: &[Vec<f64>], q: &[Vec<f64>]| {
        p.iter()
            .map(|x| q.iter().map(|y| dist(x, y)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a)) / cell
}

const KERNEL_STEP: f64 = 1.0;

#[test]
fn criterion_04_kernel_oracle() {
    let f = fields::scaled_identity(1, 1.0);
    let k = SetOracle::interval(-1.0, 1.0);
    let grid = GridSpec::line(-1.0, 1.0, 401).unwrap();
    let tau = viab_field(&f, &k, &grid, 20.0, 1e-2).unwrap();
    let kernel = tau.select(|v| v >= 20.0);
    // the discrete scheme moves in steps of length KERNEL_STEP
    let discrete = discrete_kernel(&f, &k, &grid, KERNEL_STEP).unwrap();
    let pts = |ids: &[usize]| ids.iter().map(|&i| grid.node(i)).collect::<Vec<_>>();
    let gap = hausdorff_cells(&pts(&kernel), &pts(&discrete.indices()), grid.spacing(0));
    let line_ok = kernel == vec![200] && gap <= 2.0;

    let rot = fields::rotation(1.0);
    let disk = SetOracle::ball(vec![0.0, 0.0], 1.0);
    let g2 = GridSpec::new(vec![-1.2, -1.2], vec![1.2, 1.2], vec![49, 49]).unwrap();
    let tau2 = viab_field(&rot, &disk, &g2, 20.0, 1e-2).unwrap();
    let inside: Vec<usize> = (0..g2.len()).filter(|&i| disk.contains(&g2.node(i))).collect();
    let viab_all = inside.iter().all(|&i| tau2.values[i] >= 20.0);
    let dk = discrete_kernel(&rot, &disk, &g2, KERNEL_STEP).unwrap();
    let dk_all = inside.iter().all(|&i| dk.members[i]);
    report(
        4,
        "kernel oracle",
        line_ok && viab_all && dk_all,
        format!(
            "kernel nodes {kernel:?}, discrete kernel {:?}, Hausdorff {gap} cells; disk nodes {} survive: {viab_all}/{dk_all}",
            discrete.indices(),
            inside.len()
        ),
    );
}

#[test]
fn criterion_05_capture_identities() {
    // union law, on the line and in the plane
    let mut mismatches = 0;
    let unit = fields::transport(vec![1.0]);
    let line = GridSpec::line(-2.0, 2.0, 401).unwrap();
    let (c1, c2) = (SetOracle::interval(0.5, 0.6), SetOracle::interval(-0.3, -0.2));
    let both = SetOracle::Union(vec![c1.clone(), c2.clone()]);
    let (a, b, u) = (
        capt_field(&unit, &c1, &line, 3.0, 1e-2).unwrap(),
        capt_field(&unit, &c2, &line, 3.0, 1e-2).unwrap(),
        capt_field(&unit, &both, &line, 3.0, 1e-2).unwrap(),
    );
    mismatches += (0..line.len()).filter(|&i| u.values[i] != a.values[i].min(b.values[i])).count();
    let rot = fields::rotation(1.0);
    let plane = GridSpec::new(vec![-1.5, -1.5], vec![1.5, 1.5], vec![41, 41]).unwrap();
    let (d1, d2) = (SetOracle::ball(vec![1.0, 0.0], 0.2), SetOracle::boxed(vec![-0.7, 0.3], vec![-0.4, 0.6]));
    let both = SetOracle::Union(vec![d1.clone(), d2.clone()]);
    let (a, b, u) = (
        capt_field(&rot, &d1, &plane, 7.0, 1e-2).unwrap(),
        capt_field(&rot, &d2, &plane, 7.0, 1e-2).unwrap(),
        capt_field(&rot, &both, &plane, 7.0, 1e-2).unwrap(),
    );
    mismatches += (0..plane.len()).filter(|&i| u.values[i] != a.values[i].min(b.values[i])).count();

    // capture basin within T versus backward images of the target
    let t_end = 1.0;
    let basin = capt_field(&unit, &c1, &line, t_end, 1e-2).unwrap();
    let basin_pts: Vec<Vec<f64>> = basin.select(|v| !is_inf(v)).into_iter().map(|i| line.node(i)).collect();
    let target_pts: Vec<Vec<f64>> = (0..=100).map(|i| vec![0.5 + 0.001 * i as f64]).collect();
    let mut back = Vec::new();
    for k in 0..=100 {
        let t = k as f64 * t_end / 100.0;
        if t == 0.0 {
            back.extend(target_pts.clone());
            continue;
        }
        back.extend(reach_set(&unit.reversed(), t, &target_pts, 1e-2).unwrap().into_iter().map(Result::unwrap));
    }
    let gap = hausdorff_cells(&basin_pts, &back, line.spacing(0));

    // margin with C = K is minus the exit time
    let k = SetOracle::interval(-1.0, 1.0);
    let mut margin_err: f64 = 0.0;
    for i in 0..=38 {
        let x = [-0.95 + 0.05 * i as f64];
        let gamma = capture_margin(&unit, &k, &k, &x, 5.0, 1e-2).unwrap();
        let tau = viability::kernels::exit_time(&unit, &k, &x, 5.0, 1e-2).unwrap();
        margin_err = margin_err.max((gamma + tau).abs());
    }
    report(
        5,
        "capture identities",
        mismatches == 0 && gap <= 1.0 + 1e-9 && margin_err <= 1e-9,
        format!("union mismatches {mismatches}, basin/backward-image gap {gap:.3} cells, |γ + τ| ≤ {margin_err:.1e}"),
    );
}

fn sup_problem() -> LagrangianProblem {
    LagrangianProblem::new(fields::scaled_identity(1, -1.0), Lagrangian::Zero, 0.0, Obstacle::norm())
}

fn inf_problem() -> LagrangianProblem {
    LagrangianProblem::new(fields::scaled_identity(1, -1.0), Lagrangian::Constant(1.0), 0.0, Obstacle::norm())
}

#[test]
fn criterion_06_value_oracles() {
    let p = sup_problem();
    let sup_err = (0..50)
        .map(|i| {
            let x = -2.0 + 4.0 * i as f64 / 49.0;
            (value_sup(&p, &[x], 10.0, 1e-3).unwrap() - x.abs()).abs()
        })
        .fold(0.0, f64::max);
    let inf_e = value_inf(&inf_problem(), &[E], 10.0, 1e-3).unwrap();

    let decay = fields::scaled_identity(1, -1.0);
    let benches: Vec<(VectorField, SetOracle, Vec<f64>)> = vec![
        (fields::transport(vec![1.0]), SetOracle::ball(vec![1.0], 1e-9), vec![0.0]),
        (fields::rotation(1.0), SetOracle::ball(vec![0.0, 1.0], 0.1), vec![1.0, 0.0]),
        (decay.clone(), SetOracle::interval(-0.5, 0.5), vec![2.0]),
    ];
    let time_err = benches
        .iter()
        .map(|(f, c, x)| (minimal_time(f, c, x, 10.0, 1e-3).unwrap() - hitting_time(f, c, x, 10.0, 1e-3).unwrap()).abs())
        .fold(0.0, f64::max);
    let len = minimal_length(&decay, &SetOracle::ball(vec![0.0], 0.1), &[1.0], 10.0, 1e-3).unwrap();
    let pass = sup_err <= 1e-4 && (inf_e - 2.0).abs() <= 1e-4 && time_err <= 1e-6 && (len - 0.9).abs() <= 1e-4;
    report(
        6,
        "value-function oracles",
        pass,
        format!(
            "sup err {sup_err:.2e}, inf(e) = {inf_e:.8}, |mintime − hitting| ≤ {time_err:.1e}, length {len:.8}"
        ),
    );
}

fn epigraph_gap(p: &LagrangianProblem, mode: EpigraphMode) -> (f64, f64) {
    let grid = GridSpec::new(vec![-2.0, 0.0], vec![2.0, 4.0], vec![201, 201]).unwrap();
    let p = p.clone().with_cap(4.0);
    let env = epigraph_value_field(&p, &grid, mode, 5.0, 1e-2).unwrap();
    let dy = grid.spacing(1);
    let mut worst: f64 = 0.0;
    for i in 1..env.grid.len() - 1 {
        let x = env.grid.node(i);
        let direct = match mode {
            EpigraphMode::Sup => value_sup(&p, &x, 5.0, 1e-2).unwrap(),
            EpigraphMode::Inf => value_inf(&p, &x, 5.0, 1e-2).unwrap(),
        };
        worst = worst.max((env.values[i] - direct).abs());
    }
    (worst / dy, dy)
}

#[test]
fn criterion_07_epigraph_equivalence() {
    let (sup_cells, _) = epigraph_gap(&sup_problem(), EpigraphMode::Sup);
    let (inf_cells, _) = epigraph_gap(&inf_problem(), EpigraphMode::Inf);
    report(
        7,
        "epigraph equivalence",
        sup_cells <= 2.0 && inf_cells <= 2.0,
        format!("max gap {sup_cells:.3} y-cells (sup), {inf_cells:.3} y-cells (inf)"),
    );
}

#[test]
fn criterion_08_hj_residuals() {
    let grid = GridSpec::line(-2.0, 2.0, 401).unwrap();
    let samples: Vec<Vec<f64>> = (10..=390).map(|i| grid.node(i)).collect();
    let tol = HjTolerance::default();
    let sp = sup_problem();
    let ip = inf_problem();
    let v_sup = GridField::from_fn(grid.clone(), |x| value_sup(&sp, x, 10.0, 1e-3).unwrap());
    let v_inf = GridField::from_fn(grid.clone(), |x| value_inf(&ip, x, 10.0, 1e-3).unwrap());
    let good_sup = hj_check_sup(&sp, &v_sup, &samples, tol).violations();
    let good_inf = hj_check_inf(&ip, &v_inf, &samples, tol).violations();
    let shifted = GridField::from_fn(grid.clone(), |x| v_sup.interpolate(x).unwrap() + 0.5);
    let zero = GridField::from_fn(grid.clone(), |_| 0.0);
    let bad_shift = hj_check_sup(&sp, &shifted, &samples, tol).violations();
    let bad_zero = hj_check_inf(&ip, &zero, &samples, tol).violations();
    report(
        8,
        "HJ residuals",
        good_sup == 0 && good_inf == 0 && bad_shift >= 1 && bad_zero >= 1,
        format!("violations: sup {good_sup}, inf {good_inf}, shifted control {bad_shift}, zero control {bad_zero}"),
    );
}

fn demo() -> Demo4d {
    Demo4d::new(
        1.0,
        0.5,
        0.3,
        2.0,
        E,
        |_, _| 0.5,
        |x| 1.0 + 0.1 * x[0] + 0.2 * x[1] + 0.05 * x[2] + 0.3 * x[3],
        |t, z| 2.0 + t.sin() + 0.1 * z[0] + 0.1 * z[2],
        |t, z| 0.5 + 0.2 * t + 0.1 * z[0] - 0.05 * z[1] + z[2],
    )
    .unwrap()
}

fn transport_problem(decay: f64, u_shift: f64, v_shift: f64) -> CharProblem {
    CharProblem::new(
        Drift::Phi(fields::transport(vec![1.0])),
        move |_, _, y, out| out[0] = -decay * y[0],
        SetOracle::interval(0.0, f64::INFINITY),
        BoundaryData::new(move |x| vec![x[0].sin() + 2.0 + u_shift], move |t, _| vec![t.cos() + v_shift]),
        1,
    )
}

#[test]
fn criterion_09_characteristics_oracle() {
    let d = demo();
    let prob = d.char_problem();
    let mut r = rng(9);
    let mut counts = [0usize; 3];
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let t = r.gen_range(0.0..4.0);
        let x = [r.gen_range(0.0..4.0), r.gen_range(0.05..E), r.gen_range(0.0..3.0), r.gen_range(0.05..1.95)];
        let regime = d.regime(t, &x).unwrap();
        counts[match regime {
            Regime::Initial => 0,
            Regime::Birth => 1,
            Regime::Upper => 2,
        }] += 1;
        let exact = d.solution(t, &x).unwrap();
        let num = solve_char(&prob, t, &x, 1e-3).unwrap().unwrap()[0];
        worst = worst.max((exact - num).abs());
    }
    let tp = transport_problem(0.0, 0.0, 0.0);
    let mut transport_err: f64 = 0.0;
    for _ in 0..200 {
        let (t, x): (f64, f64) = (r.gen_range(0.0..3.0), r.gen_range(0.0..3.0));
        let exact = if t <= x { (x - t).sin() + 2.0 } else { (t - x).cos() };
        let u = solve_char(&tp, t, &[x], 1e-3).unwrap().unwrap()[0];
        transport_err = transport_err.max((u - exact).abs());
    }
    report(
        9,
        "characteristics oracle",
        worst <= 1e-4 && counts.iter().all(|&c| c > 0) && transport_err <= 1e-6,
        format!("4D max diff {worst:.2e} over regimes {counts:?}, transport max diff {transport_err:.2e}"),
    );
}

#[test]
fn criterion_10_data_locality() {
    let phi = fields::transport(vec![1.0]);
    let k = SetOracle::interval(0.0, f64::INFINITY);
    let base = transport_problem(0.7, 0.0, 0.0);
    let other_v = transport_problem(0.7, 0.0, 5.0);
    let other_u = transport_problem(0.7, 5.0, 0.0);
    let mut r = rng(10);
    let (mut initial, mut boundary, mut broken) = (0, 0, 0);
    for _ in 0..200 {
        let (t, x): (f64, f64) = (r.gen_range(0.0..3.0), r.gen_range(0.0..3.0));
        let tau = backward_exit_time(&phi, &k, t, &[x], 1e-3).unwrap();
        let u = solve_char(&base, t, &[x], 1e-3).unwrap().unwrap()[0];
        let w = if t <= tau {
            initial += 1;
            solve_char(&other_v, t, &[x], 1e-3).unwrap().unwrap()[0]
        } else {
            boundary += 1;
            solve_char(&other_u, t, &[x], 1e-3).unwrap().unwrap()[0]
        };
        if u.to_bits() != w.to_bits() {
            broken += 1;
        }
    }
    // same rule on the 4D example
    let d = demo();
    let base4 = d.char_problem();
    let mut alt = d.clone();
    alt.v1 = std::sync::Arc::new(|_, _| -7.0);
    alt.v_r2 = std::sync::Arc::new(|_, _| 9.0);
    let mut alt_u = d.clone();
    alt_u.u0 = std::sync::Arc::new(|_| 11.0);
    let (alt, alt_u) = (alt.char_problem(), alt_u.char_problem());
    for _ in 0..60 {
        let t = r.gen_range(0.0..4.0);
        let x = [r.gen_range(0.0..4.0), r.gen_range(0.05..E), r.gen_range(0.0..3.0), r.gen_range(0.05..1.95)];
        let phi4 = base4.phi().unwrap();
        let tau = backward_exit_time(phi4, &base4.k, t, &x, 1e-3).unwrap();
        let u = solve_char(&base4, t, &x, 1e-3).unwrap().unwrap()[0];
        let w = solve_char(if t <= tau { &alt } else { &alt_u }, t, &x, 1e-3).unwrap().unwrap()[0];
        if u.to_bits() != w.to_bits() {
            broken += 1;
        }
    }
    report(
        10,
        "data locality",
        broken == 0 && initial > 0 && boundary > 0,
        format!("{initial} initial-regime and {boundary} boundary-regime transport points, {broken} changed outputs"),
    );
}

#[test]
fn criterion_11_lipschitz_operator_bound() {
    let xs: Vec<f64> = (0..=300).map(|i| 0.01 * i as f64).collect();
    let gap = |a: &CharProblem, b: &CharProblem, t: f64| {
        xs.iter()
            .map(|&x| {
                let ua = solve_char(a, t, &[x], 1e-3).unwrap().unwrap()[0];
                let ub = solve_char(b, t, &[x], 1e-3).unwrap().unwrap()[0];
                (ua - ub).abs()
            })
            .fold(0.0, f64::max)
    };
    let shifted = |du: f64, dv: f64| {
        CharProblem::new(
            Drift::Phi(fields::transport(vec![1.0])),
            |_, _, y, out| out[0] = -2.0 * y[0],
            SetOracle::interval(0.0, f64::INFINITY),
            BoundaryData::new(move |x| vec![x[0].cos() + du], move |t, _| vec![(2.0 * t).sin() + dv]),
            1,
        )
    };
    let bound = (-2.0f64).exp();
    let pairs = [(shifted(0.0, 0.0), shifted(1.0, 0.0)), (shifted(0.5, 0.0), shifted(-0.5, 0.0))];
    let gaps: Vec<f64> = pairs.iter().map(|(a, b)| gap(a, b, 1.0)).collect();
    // diagnostic: with the boundary datum shifted instead, the gap near
    // x = 0 is e^{−2x} and exceeds the global e^{−2t}
    let side = gap(&shifted(0.0, 0.0), &shifted(0.0, 1.0), 1.0);
    println!("criterion 11 diagnostic: boundary-datum shift by 1 gives sup gap {side:.6} at t = 1 (e^-2 = {bound:.6})");
    let worst = gaps.iter().copied().fold(0.0, f64::max);
    report(
        11,
        "Lipschitz operator bound",
        worst <= bound * (1.0 + 1e-4),
        format!("sup gaps {gaps:?} against e^-2 = {bound:.9}"),
    );
}

#[test]
fn criterion_12_shock_detection() {
    let prob = CharProblem::new(
        Drift::full(|_, _, y, out| out[0] = y[0]),
        |_, _, _, out| out[0] = 0.0,
        SetOracle::whole(1),
        BoundaryData::new(|x| vec![-x[0]], |_, _| vec![0.0]),
        1,
    );
    let plan = SeedPlan {
        region: GridSpec::line(-1.0, 1.0, 21).unwrap(),
        per_face: 0,
    };
    let h = 0.01;
    let cloud = graph_sample(&prob, &plan, 2.0, h, 0.005).unwrap();
    let clusters = query_graph(&cloud, 1.0, &[0.0], 0.02);
    let interior: Vec<usize> = (0..cloud.len())
        .filter(|&i| cloud.points[i][0] > 5.0 * h && cloud.points[i][0] < 2.0 - 5.0 * h)
        .collect();
    let stride = (interior.len() / 100).max(1);
    let samples: Vec<usize> = interior.iter().copied().step_by(stride).take(100).collect();
    let rep = frankowska_residual(&cloud, &prob, &samples, default_graph_ladder(h)).unwrap();
    let res = rep.max_residual();
    report(
        12,
        "shock detection",
        clusters.len() >= 3 && samples.len() == 100 && res <= 5.0 * h,
        format!("{} clusters at (1, 0), max residual {res:.2e} over {} samples", clusters.len(), samples.len()),
    );
}

const VIAB_CFG: &str = r#"
[field]
kind = "scaled"
dim = 1
lambda = 1

[set]
kind = "interval"
lo = -1
hi = 1

[grid]
lo = [-1]
hi = [1]
counts = [401]

[run]
t_max = 20
h = 0.01
"#;

const EPI_SUP_CFG: &str = r#"
[field]
kind = "scaled"
dim = 1
lambda = -1

[grid]
lo = [-2, 0]
hi = [2, 4]
counts = [201, 201]

[problem]
lagrangian = { kind = "zero" }
obstacle = { kind = "norm" }
cap = 4
method = "epigraph"

[run]
t_max = 5
h = 0.01
"#;

const DEMO_CFG: &str = r#"
[demo4d]
rho = 1
sigma = 0.5
beta = 0.3
b = 2
r2 = 2.718281828459045
a = 0.5
times = [0.5, 1.5, 3.0]
u0 = { offset = 1, coeffs = [0.1, 0.2, 0.05, 0.3] }
v1 = { kind = "sin", offset = 0.3, coeffs = [1, 0.1, 0, 0.1] }
v_r2 = { offset = 0.5, coeffs = [0.2, 0.1, -0.05, 1] }

[grid]
lo = [0.2, 0.3, 0.2, 0.2]
hi = [3.0, 2.7, 2.0, 1.8]
counts = [4, 3, 2, 2]

[run]
h = 0.001
"#;

fn cli_run(dir: &Path, sub: &str, cfg: &str, workers: usize) -> (i32, std::path::PathBuf) {
    let cfg_path = dir.join(format!("{sub}.toml"));
    fs::write(&cfg_path, cfg).unwrap();
    let out = dir.join(format!("{sub}-w{workers}"));
    let code = viability::cli::run([
        "viability".to_string(),
        sub.to_string(),
        "--config".into(),
        cfg_path.display().to_string(),
        "--out".into(),
        out.display().to_string(),
        "--workers".into(),
        workers.to_string(),
    ]);
    (code, out)
}

#[test]
fn criterion_13_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let epi_inf = EPI_SUP_CFG.replace("{ kind = \"zero\" }", "{ kind = \"constant\", value = 1 }");
    let runs: Vec<(&str, String, Vec<&str>)> = vec![
        ("viab", VIAB_CFG.to_string(), vec!["viab.csv"]),
        ("kernel", VIAB_CFG.replace("h = 0.01", "h = 1"), vec!["kernel.csv"]),
        ("value-sup", EPI_SUP_CFG.to_string(), vec!["value_sup.csv"]),
        ("value-inf", epi_inf, vec!["value_inf.csv"]),
        ("demo4d", DEMO_CFG.to_string(), vec!["demo4d.csv", "demo4d_diff.csv"]),
    ];
    let mut differing = Vec::new();
    let mut failed = Vec::new();
    for (sub, cfg, files) in &runs {
        let (c1, o1) = cli_run(dir.path(), sub, cfg, 1);
        let (c8, o8) = cli_run(dir.path(), sub, cfg, 8);
        if c1 != 0 || c8 != 0 {
            failed.push(*sub);
            continue;
        }
        for f in files {
            if fs::read(o1.join(f)).unwrap() != fs::read(o8.join(f)).unwrap() {
                differing.push(*f);
            }
        }
    }
    report(
        13,
        "determinism",
        differing.is_empty() && failed.is_empty(),
        format!("{} runs compared, failed {failed:?}, differing {differing:?}", runs.len()),
    );
}
