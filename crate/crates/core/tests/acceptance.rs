//! End-to-end acceptance gates. Each criterion prints one `PASS`/`FAIL`
//! line. `ACCEPT_ONLY=2,5` restricts the run to the listed criteria.
//!
//! Criteria in `KNOWN_RED` are reported but do not fail the test; the
//! reasons are in the README.

mod common;

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use phi_heat_core::fit::loglog_slope;
use phi_heat_core::geometry::{Grid, ManifoldModel, Point};
use phi_heat_core::operators::{assemble_laplacian, heat_convolve, mass_report, oracle_check, BlobSpec, CoefficientField, DiscreteOperator, Propagator};
use phi_heat_core::partition::{audit_report, normalize, seminorm_scaling, PartitionConfig};
use phi_heat_core::parametrix::{budget_search, extend_in_time, homogeneous_solve, neumann_solve, single_solve_residual, Parametrix, ParametrixConfig};
use phi_heat_core::principle::{envelope_trace_with_tol, uniqueness_gap};
use phi_heat_core::semilinear::{picard_solve, NonlinearRHS, PicardConfig};
use phi_heat_core::spaces::{sup_norm, uniform_times, NormSpec, SpaceTimeField};

const KNOWN_RED: &[usize] = &[4, 5];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---------------------------------------------------------------- 1

fn random_point(rng: &mut ChaCha8Rng, m: &ManifoldModel<f64>) -> Point<f64> {
    let c = &m.chart;
    let x = rng.gen_range(c.x_min..=c.x_max);
    let y = (0..c.b).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    let z = (0..c.f).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    Point::new(x, y, z)
}

fn distance_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut violations = 0usize;
    let mut worst = 0.0f64;
    for m in [ManifoldModel::model_a(), ManifoldModel::model_b()] {
        for _ in 0..50_000 {
            let p = random_point(&mut rng, &m);
            let q = random_point(&mut rng, &m);
            let dinf = m.phi_distance(&p, &q, f64::INFINITY).unwrap();
            let d2 = m.phi_distance(&p, &q, 2.0).unwrap();
            if d2 < dinf || d2 > 3f64.sqrt() * dinf * (1.0 + 1e-14) {
                violations += 1;
            }
            if dinf > 0.0 {
                worst = worst.max(d2 / dinf);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(violations == 0 && secs < 5.0, format!("1e5 pairs, {violations} violations, max d2/dinf {worst:.4}, {secs:.2}s"))
}

// ---------------------------------------------------------------- 2

/// Largest relative sup error over `t ∈ [0.01, 0.1]`.
fn oracle_error(model: ManifoldModel<f64>, nx: usize, ny: usize, nz: usize, ht: f64) -> f64 {
    let g: Grid<f64> = Grid::new(model, nx, ny, nz).unwrap();
    let op = Arc::new(assemble_laplacian(&g).unwrap());
    let prop = Propagator::new(op, CoefficientField::constant(1.0).unwrap(), ht, 0.5).unwrap();
    let times = uniform_times(0.1, (0.1 / ht).round() as usize);
    let rows = oracle_check(&prop, &g, BlobSpec::default(), &times, 0.01).unwrap();
    rows.iter().map(|r| r.sup_err).fold(0.0, f64::max)
}

fn oracle_model(model: ManifoldModel<f64>, grids: [(usize, usize, usize); 3], main: usize, ht: f64) -> (bool, String) {
    let start = Instant::now();
    let errs: Vec<f64> = grids.iter().map(|&(nx, ny, nz)| oracle_error(model, nx, ny, nz, ht)).collect();
    let secs = start.elapsed().as_secs_f64();
    let hs: Vec<f64> = grids.iter().map(|g| 1.0 / g.0 as f64).collect();
    let slope = loglog_slope(&hs, &errs);
    let err = errs[main];
    let pass = err <= 0.02 && (slope - 2.0).abs() <= 0.2 && secs < 60.0;
    (pass, format!("err {err:.2e} at {:?}, slope {slope:.3} {}, {secs:.1}s", grids[main], sci(&errs)))
}

fn oracle_equivalence() -> Outcome {
    let (pa, da) = oracle_model(ManifoldModel::model_a(), [(64, 32, 1), (128, 64, 1), (256, 128, 1)], 1, 1e-3);
    let (pb, db) = oracle_model(ManifoldModel::model_b(), [(64, 32, 16), (128, 64, 32), (256, 128, 64)], 1, 2e-3);
    outcome(pa && pb, format!("A: {da}; B: {db}"))
}

// ---------------------------------------------------------------- 3

fn mass_conservation() -> Outcome {
    let mut worst = 0.0f64;
    for (model, nz) in [(ManifoldModel::model_a(), 1), (ManifoldModel::model_b(), 16)] {
        let g: Grid<f64> = Grid::new(model, 64, 32, nz).unwrap();
        let op = Arc::new(assemble_laplacian(&g).unwrap());
        let prop = Propagator::new(op, CoefficientField::constant(1.0).unwrap(), 1e-3, 0.5).unwrap();
        let u0 = g.sample(|x, y, z| (-((x - 0.5) / 0.1).powi(2)).exp() * (1.0 + 0.5 * y.cos()) * (1.0 + 0.3 * z.sin()));
        let times = uniform_times(0.1, 100);
        let rows = mass_report(&prop, &u0, &times).unwrap();
        let m0: f64 = rows[0].1;
        worst = worst.max(rows.iter().map(|r| ((r.1 - m0) / m0).abs()).fold(0.0, f64::max));
    }
    outcome(worst <= 0.01, format!("max relative drift {worst:.2e}"))
}

// ---------------------------------------------------------------- 4

fn partition_audit() -> Outcome {
    let start = Instant::now();
    let spec: NormSpec<f64> = NormSpec::new(0.5, 0, 0.0, 20_000, 1).unwrap();
    let mut parts = vec![];
    let mut pass = true;
    for (name, model, nx, ny, nz) in [("A", ManifoldModel::model_a(), 257, 64, 1), ("B", ManifoldModel::model_b(), 129, 32, 16)] {
        let g = Arc::new(Grid::new(model, nx, ny, nz).unwrap());
        let fam = normalize(g.clone(), PartitionConfig::lattice(&g, 0.125, 0.0625).unwrap()).unwrap();
        let r = audit_report(&fam, &spec).unwrap();
        pass &= r.sum_to_one_max_err <= 1e-12 && r.property_i_ok && r.diameter_ok();
        parts.push(format!(
            "{name}: sum err {:.1e}, property I {}, diameter {:.4} vs bound {:.4}",
            r.sum_to_one_max_err, r.property_i_ok, r.diam_max, r.diam_bound
        ));
    }
    let g = Arc::new(Grid::new(ManifoldModel::model_a(), 513, 64, 1).unwrap());
    let eps = [0.25, 0.125, 0.0625, 0.03125];
    let (_, slope): (_, f64) = seminorm_scaling(g, &eps, &spec).unwrap();
    let secs = start.elapsed().as_secs_f64();
    pass &= (slope + spec.alpha).abs() <= 0.2 && secs < 30.0;
    parts.push(format!("seminorm slope {slope:.3}, {secs:.1}s"));
    outcome(pass, parts.join("; "))
}

// ---------------------------------------------------------------- 5

fn test_coefficient(g: &Grid<f64>, times: &[f64]) -> CoefficientField<f64> {
    CoefficientField::from_fn(|x, y, _, _| 1.0 + x / 2.0 + x * y.sin() / 4.0, g, times, 0.75).unwrap()
}

fn spec() -> NormSpec<f64> {
    NormSpec::new(0.5, 0, 0.0, 4000, 7).unwrap()
}

fn error_scaling() -> Outcome {
    let start = Instant::now();
    // resolves √T_min in the Φ-distance at x = ε: h ≤ ε²√T_min
    let g = Arc::new(Grid::new(ManifoldModel::model_a(), 2049, 16, 1).unwrap());
    let op = Arc::new(assemble_laplacian(&g).unwrap());
    let ts = [0.04, 0.01, 0.0025];
    let mut proxies = vec![];
    for &t in &ts {
        let mut cfg = ParametrixConfig::new(0.125, t, spec());
        cfg.n_steps = Some(32);
        let coef = Arc::new(test_coefficient(&g, &cfg.times(&g)));
        let par = Parametrix::with_operator(g.clone(), op.clone(), coef, cfg).unwrap();
        proxies.push(par.norm_proxies().unwrap());
    }
    let secs = start.elapsed().as_secs_f64();
    let col = |k: usize| proxies.iter().map(|p| p[k]).collect::<Vec<f64>>();
    let slope = loglog_slope(&ts, &col(0));
    let alpha = spec().alpha;
    let factor = |k: usize| {
        let c = col(k);
        c.windows(2).map(|w| w[0] / w[1]).fold(f64::INFINITY, f64::min)
    };
    let (f2, f3) = (factor(1), factor(2));
    let pass = (slope - alpha / 2.0).abs() <= 0.15 && f2 >= 1.4 && f3 >= 1.4 && secs < 300.0;
    outcome(
        pass,
        format!("R1 {} slope {slope:.3} (target {:.2}); R2 {} min factor {f2:.2}; R3 {} min factor {f3:.2e}; {secs:.0}s", sci(&col(0)), alpha / 2.0, sci(&col(1)), sci(&col(2))),
    )
}

// ---------------------------------------------------------------- 6

fn contraction() -> Outcome {
    let start = Instant::now();
    let g = Arc::new(Grid::new(ManifoldModel::model_a(), 257, 32, 1).unwrap());
    let op = Arc::new(assemble_laplacian(&g).unwrap());
    let times = uniform_times(0.04, 32);
    let coef = Arc::new(test_coefficient(&g, &times));
    let mut base = ParametrixConfig::new(0.125, 0.04, spec());
    base.n_steps = Some(32);
    let cells = budget_search(g.clone(), op.clone(), coef.clone(), base, &[0.25, 0.125], (0.0025, 0.04), 3).unwrap();
    let Some(cell) = cells.iter().filter(|c| c.within_budget && c.proxies[3] <= 0.5).max_by(|a, b| a.t_window.total_cmp(&b.t_window)) else {
        return outcome(false, format!("no cell within budget: {cells:?}"));
    };
    let n = (cell.t_window / (0.04 / 32.0)).round() as usize;
    let cfg = ParametrixConfig { eps: cell.eps, vartheta: cell.eps / 2.0, t_window: cell.t_window, n_steps: Some(n), ..base };
    let mut par = Parametrix::with_operator(g.clone(), op, coef, cfg).unwrap();
    let l = SpaceTimeField::from_fn(g.clone(), par.times.clone(), |x, y, _, t| (1.0 + t) * x * (1.0 - x) * (2.0 + y.cos()));
    // a tight stopping tolerance so that several terms are taken
    let single = single_solve_residual(&par, &l).unwrap();
    par.config.tol = Some(single * 1e-4);
    let (_, rep) = neumann_solve(&par, &l, Some(cell.proxies)).unwrap();
    let proxy = cell.proxies[3];
    let ratios = rep.ratios();
    let worst = ratios.iter().copied().fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    let pass = rep.converged && !ratios.is_empty() && worst <= proxy + 0.1 && rep.consistency_final <= 10.0 * rep.single_solve_residual && secs < 600.0;
    outcome(
        pass,
        format!(
            "cell eps={} T={:.4} proxy {proxy:.3e} ({} evaluations); history {}; worst ratio {worst:.3e}; final {:.3e} vs single {:.3e}; {secs:.0}s",
            cell.eps,
            cell.t_window,
            cells.iter().map(|c| c.evaluations).sum::<usize>(),
            sci(&rep.history),
            rep.consistency_final,
            rep.single_solve_residual
        ),
    )
}

// ---------------------------------------------------------------- 7

fn small_grid() -> (Arc<Grid<f64>>, Arc<DiscreteOperator<f64>>) {
    let g = Arc::new(Grid::new(ManifoldModel::model_a(), 65, 32, 1).unwrap());
    let op = Arc::new(assemble_laplacian(&g).unwrap());
    (g, op)
}

fn max_principle() -> Outcome {
    let (g, op) = small_grid();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut zero_sup, mut worst_step, mut worst_gap_ratio) = (0.0f64, f64::NEG_INFINITY, 0.0f64);
    for _ in 0..5 {
        let (c1, c2, c3, ph): (f64, f64, f64, f64) = (rng.gen_range(-0.4..0.4), rng.gen_range(-0.3..0.3), rng.gen_range(0.0..0.5), rng.gen_range(0.0..2.0 * PI));
        let mut cfg = ParametrixConfig::new(0.125, 0.02, spec());
        cfg.n_steps = Some(20);
        let times = cfg.times(&g);
        let coef = CoefficientField::from_fn(move |x, y, _, t| 1.0 + c1 * x * (y + ph).cos() + c2 * x * x * (2.0 * y).sin() + c3 * t, &g, &times, 0.75).unwrap();
        let mut par = Parametrix::with_operator(g.clone(), op.clone(), Arc::new(coef), cfg).unwrap();
        let proxies = par.norm_proxies().unwrap();

        let zero = SpaceTimeField::zeros(g.clone(), times.clone());
        let (u, _) = neumann_solve(&par, &zero, Some(proxies)).unwrap();
        let (v, _) = homogeneous_solve(&par, &vec![0.0; g.len()], Some(proxies)).unwrap();
        zero_sup = zero_sup.max(sup_norm(&u).unwrap()).max(sup_norm(&v).unwrap());

        let (a0, a1, k): (f64, f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(1..=3) as f64);
        let u0 = g.sample(|x, y, _| a0 * (PI * x).sin() + a1 * x * (k * y).cos());
        par.config.tol = Some(1e-13);
        let (h, _) = homogeneous_solve(&par, &u0, Some(proxies)).unwrap();
        let env = envelope_trace_with_tol(&h, 1e-10);
        let steps = env.u_sup.windows(2).map(|w| w[1] - w[0]).chain(env.u_inf.windows(2).map(|w| w[0] - w[1]));
        worst_step = worst_step.max(steps.fold(f64::NEG_INFINITY, f64::max));
        if !env.monotone() {
            worst_step = worst_step.max(1.0);
        }

        let l = SpaceTimeField::from_fn(g.clone(), times.clone(), move |x, y, _, t| (a0 + t) * (PI * x).sin() * (1.0 + 0.5 * (y + ph).cos()));
        par.config.tol = None;
        let (w1, rep) = neumann_solve(&par, &l, Some(proxies)).unwrap();
        let w2 = heat_convolve(&par.prop, &l).unwrap();
        worst_gap_ratio = worst_gap_ratio.max(uniqueness_gap(&w1, &w2).unwrap() / rep.tol);
    }
    let pass = zero_sup <= 1e-8 && worst_step <= 1e-10 && worst_gap_ratio <= 2.0;
    outcome(pass, format!("zero-data sup {zero_sup:.1e}; largest envelope step {worst_step:.2e}; uniqueness gap / tol {worst_gap_ratio:.3}"))
}

// ---------------------------------------------------------------- 8

fn time_gluing() -> Outcome {
    let (g, op) = small_grid();
    let source: Arc<dyn Fn(f64, f64, f64, f64) -> f64 + Send + Sync> = Arc::new(|x, y, _, t| (1.0 + 10.0 * t) * (PI * x).sin() * (1.0 + 0.5 * y.cos()));
    let (t0, lambda, horizon, ht) = (0.02, 0.01, 0.03, 1e-3);
    let window = |t: f64| {
        let mut cfg = ParametrixConfig::new(0.125, t, spec());
        cfg.n_steps = Some((t / ht).round() as usize);
        let coef = test_coefficient(&g, &cfg.times(&g));
        Parametrix::with_operator(g.clone(), op.clone(), Arc::new(coef), cfg).unwrap()
    };
    let src_field = |times: &[f64]| {
        let s = source.clone();
        SpaceTimeField::from_fn(g.clone(), times.to_vec(), move |x, y, z, t| s(x, y, z, t))
    };
    let par = window(t0);
    let (u, _) = neumann_solve(&par, &src_field(&par.times), None).unwrap();
    let glued = match extend_in_time(&par, source.clone(), &u, lambda, horizon, 10.0) {
        Ok(gl) => gl,
        Err(e) => return outcome(false, format!("gluing refused: {e}")),
    };
    let base = window(horizon);
    let (b, _) = neumann_solve(&base, &src_field(&base.times), None).unwrap();
    // scheme error: the baseline against the scheme at half the time step
    let fine_times = uniform_times(horizon, 2 * base.times.len() - 2);
    let fine = heat_convolve(&base.prop, &src_field(&fine_times)).unwrap();
    let sub: Vec<f64> = (0..base.times.len()).flat_map(|k| fine.slice(2 * k).to_vec()).collect();
    let fine = SpaceTimeField::new(g.clone(), base.times.clone(), sub).unwrap();
    let scheme_err = b.max_abs_diff(&fine).unwrap();
    // glued levels are s + t_j, equal to the baseline axis up to rounding
    assert!(glued.field.times.iter().zip(&b.times).all(|(p, q)| (p - q).abs() < 1e-12) && glued.field.values.len() == b.values.len());
    let diff = glued.field.values.iter().zip(&b.values).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
    let seam = &glued.seams[0];
    let jump_ratio = seam.slope_jump.max(seam.seam_residual) / seam.interior_residual;
    let pass = diff <= 2.0 * scheme_err && jump_ratio <= 10.0;
    outcome(
        pass,
        format!("glued vs baseline {diff:.3e}, scheme error {scheme_err:.3e}; seam jump / interior residual {jump_ratio:.3}, overlap gap {:.2e}", seam.overlap_gap),
    )
}

// ---------------------------------------------------------------- 9

fn homogeneous() -> Outcome {
    let g = Arc::new(Grid::new(ManifoldModel::model_b(), 65, 16, 32).unwrap());
    let mut cfg = ParametrixConfig::new(0.125, 0.05, spec());
    cfg.n_steps = Some(25);
    let par = Parametrix::new(g.clone(), CoefficientField::constant(1.0).unwrap(), cfg).unwrap();
    let u0 = g.sample(|_, _, z| z.sin());
    let (u, _) = homogeneous_solve(&par, &u0, None).unwrap();
    let exact = SpaceTimeField::from_fn(g.clone(), par.times.clone(), |_, _, z, t| (-t).exp() * z.sin());
    let scheme = SpaceTimeField::new(g.clone(), par.times.clone(), par.prop.evolve(&u0, None, &par.times).unwrap()).unwrap();
    let err = u.max_abs_diff(&exact).unwrap();
    let scheme_err = scheme.max_abs_diff(&exact).unwrap();
    let initial_exact = u.slice(0) == u0.as_slice();
    outcome(err <= 2.0 * scheme_err && initial_exact, format!("error {err:.3e}, scheme error {scheme_err:.3e}, u(0) = u0 bitwise {initial_exact}"))
}

// ---------------------------------------------------------------- 10

fn semilinear() -> Outcome {
    let start = Instant::now();
    let (g, op) = small_grid();
    let (t_prime, tol, ht) = (0.05, 1e-8, 1e-3);
    let mut base = ParametrixConfig::new(0.125, t_prime, spec());
    base.n_steps = Some((t_prime / ht).round() as usize);
    base.tol = Some(1e-12);
    let times = base.times(&g);
    let coef = Arc::new(test_coefficient(&g, &times));
    let ell = |x: f64, y: f64, _: f64, _: f64| 2.0 * (PI * x).sin() * (1.0 + 0.5 * y.cos());
    let f = NonlinearRHS::zero(10.0).with_f1(NonlinearRHS::quadratic()).with_source(ell);
    let cfg = PicardConfig::new(t_prime, tol, 30);
    let a = picard_solve(g.clone(), op.clone(), coef.clone(), base, &f, cfg, None).unwrap();
    let from_source = |par: &Parametrix<f64>| {
        let l = SpaceTimeField::from_fn(par.grid.clone(), par.times.clone(), ell);
        neumann_solve(par, &l, None).map(|r| r.0.scale(3.0))
    };
    let b = picard_solve(g.clone(), op.clone(), coef.clone(), base, &f, cfg, Some(&from_source)).unwrap();
    let explicit = common::explicit_semilinear(g.clone(), &op, &coef, |x, y, z, t, u| u * u + ell(x, y, z, t), &a.u.times, 0.5);
    let rel = common::rel_sup(&a.u, &explicit);
    let starts = uniqueness_gap(&a.u, &b.u).unwrap();
    let ratio = a.contraction_ratio().max(b.contraction_ratio());
    let secs = start.elapsed().as_secs_f64();
    let pass = a.converged && b.converged && ratio < 1.0 && rel <= 0.01 && starts <= 2.0 * tol && secs < 300.0;
    outcome(
        pass,
        format!(
            "{} and {} iterations, contraction ratio {ratio:.3e}; vs explicit {rel:.3e}; start gap {starts:.2e}; T' {}; {secs:.0}s",
            a.n, b.n, a.t_prime
        ),
    )
}

fn sci(v: &[f64]) -> String {
    format!("[{}]", v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", "))
}

// ---------------------------------------------------------------- driver

type Criterion = (usize, &'static str, fn() -> Outcome);

fn criteria() -> Vec<Criterion> {
    vec![
        (1, "distance equivalence", distance_equivalence),
        (2, "oracle equivalence", oracle_equivalence),
        (3, "mass conservation", mass_conservation),
        (4, "partition audit", partition_audit),
        (5, "error-operator scaling", error_scaling),
        (6, "contraction and Neumann convergence", contraction),
        (7, "maximum principle", max_principle),
        (8, "time gluing", time_gluing),
        (9, "homogeneous solver", homogeneous),
        (10, "semilinear Picard", semilinear),
    ]
}

#[test]
fn acceptance() {
    let only: Option<Vec<usize>> = std::env::var("ACCEPT_ONLY").ok().map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut unexpected = vec![];
    for (id, name, run) in criteria() {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        // straight to stderr so the lines survive the harness's output capture
        let _ = writeln!(std::io::stderr(), "[{tag}] {id:>2} {name}: {} ({:.1}s)", o.detail, start.elapsed().as_secs_f64());
        if !o.pass && !KNOWN_RED.contains(&id) {
            unexpected.push(id);
        }
    }
    assert!(unexpected.is_empty(), "unexpected failures: {unexpected:?}");
}
