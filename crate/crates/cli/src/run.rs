use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use phi_heat_core::geometry::Grid;
use phi_heat_core::operators::{assemble_laplacian, mass_report, oracle_check, BlobSpec, CoefficientField, DiscreteOperator, Propagator};
use phi_heat_core::parametrix::{homogeneous_solve, neumann_solve, Parametrix, ParametrixConfig, ParametrixReport};
use phi_heat_core::partition::{audit_report, normalize, PartitionConfig};
use phi_heat_core::principle::{envelope_trace_with_tol, envelope_tolerance, omori_yau_point};
use phi_heat_core::semilinear::{picard_solve, NonlinearRHS, PicardConfig};
use phi_heat_core::spaces::{k_alpha_norm, uniform_times, NormSpec, SpaceTimeField};
use phi_heat_core::{PhiError, Result};

use crate::config::RunConfig;
use crate::manifest::{fmt_f, Csv, RunManifest};

/// Experiment drivers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Solve,
    OracleCheck,
    Norms,
    AuditPartition,
    AuditParametrix,
    MaxPrinciple,
    Semilinear,
}

impl Subcommand {
    pub const ALL: [Subcommand; 7] = [
        Subcommand::Solve,
        Subcommand::OracleCheck,
        Subcommand::Norms,
        Subcommand::AuditPartition,
        Subcommand::AuditParametrix,
        Subcommand::MaxPrinciple,
        Subcommand::Semilinear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Solve => "solve",
            Subcommand::OracleCheck => "oracle-check",
            Subcommand::Norms => "norms",
            Subcommand::AuditPartition => "audit-partition",
            Subcommand::AuditParametrix => "audit-parametrix",
            Subcommand::MaxPrinciple => "maxprinciple",
            Subcommand::Semilinear => "semilinear",
        }
    }

    fn csv_name(self) -> &'static str {
        match self {
            Subcommand::Solve => "solution.csv",
            Subcommand::OracleCheck => "oracle.csv",
            Subcommand::Norms => "norms.csv",
            Subcommand::AuditPartition => "partition.csv",
            Subcommand::AuditParametrix => "phase_diagram.csv",
            Subcommand::MaxPrinciple => "maxprinciple.csv",
            Subcommand::Semilinear => "picard.csv",
        }
    }
}

impl std::str::FromStr for Subcommand {
    type Err = PhiError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|c| c.name()).collect();
            PhiError::Configuration(format!("unknown subcommand `{s}`; expected one of {}", names.join(", ")))
        })
    }
}

/// What one sweep cell produced.
#[derive(Debug, Default)]
struct CellOutput {
    files: Vec<(String, Csv)>,
    checks: Vec<(String, bool)>,
    stages: Vec<(String, f64)>,
}

struct Setup {
    grid: Arc<Grid<f64>>,
    op: Arc<DiscreteOperator<f64>>,
    coef: Arc<CoefficientField<f64>>,
    spec: NormSpec<f64>,
    times: Vec<f64>,
}

fn steps(cfg: &RunConfig, t: f64) -> usize {
    ((t / cfg.ht).round() as usize).max(1)
}

fn setup(cfg: &RunConfig) -> Result<Setup> {
    let grid = Arc::new(cfg.grid()?);
    let op = Arc::new(assemble_laplacian(&grid)?);
    let times = uniform_times(cfg.t_end, steps(cfg, cfg.t_end));
    let coef = match cfg.a_expr.constant_value() {
        Some(c) => CoefficientField::constant(c)?,
        None => {
            let e = cfg.a_expr.clone();
            let c = CoefficientField::from_fn(move |x, y, z, t| e.eval(x, y, z, t, 0.0), &grid, &times, cfg.beta)?;
            if cfg.a_expr.depends_only_on_x() {
                c.assume_radial()
            } else {
                c
            }
        }
    };
    let spec = NormSpec::new(cfg.alpha, cfg.k, cfg.gamma, cfg.pair_budget, cfg.seed)?;
    Ok(Setup { grid, op, coef: Arc::new(coef), spec, times })
}

fn parametrix_config(cfg: &RunConfig, spec: NormSpec<f64>, t: f64) -> ParametrixConfig<f64> {
    let mut p = ParametrixConfig::new(cfg.eps, t, spec);
    p.vartheta = cfg.vartheta;
    p.delta = cfg.delta;
    p.neumann_cap = cfg.neumann_cap;
    p.probes = cfg.probes;
    p.theta = cfg.theta;
    p.n_steps = Some(steps(cfg, t));
    p
}

fn field_of(s: &Setup, times: &[f64], e: &crate::expr::Expression) -> SpaceTimeField<f64> {
    let e = e.clone();
    SpaceTimeField::from_fn(s.grid.clone(), times.to_vec(), move |x, y, z, t| e.eval(x, y, z, t, 0.0))
}

fn timed<R>(stages: &mut Vec<(String, f64)>, name: &str, f: impl FnOnce() -> Result<R>) -> Result<R> {
    let t = Instant::now();
    let r = f();
    stages.push((name.to_string(), t.elapsed().as_secs_f64()));
    r
}

fn history_rows(csv: &mut Csv, label: &str, rep: &ParametrixReport<f64>) {
    for (k, r) in rep.history.iter().enumerate() {
        csv.push(vec![label.to_string(), (k + 1).to_string(), fmt_f(*r)]);
    }
}

fn run_solve(cfg: &RunConfig) -> Result<CellOutput> {
    let mut out = CellOutput::default();
    let s = timed(&mut out.stages, "assemble", || setup(cfg))?;
    let nn = s.grid.len();
    let par = timed(&mut out.stages, "parametrix", || {
        Parametrix::with_operator(s.grid.clone(), s.op.clone(), s.coef.clone(), parametrix_config(cfg, s.spec, cfg.t_end))
    })?;
    let u0 = field_of(&s, &[0.0], &cfg.u0_expr).values;
    let l = field_of(&s, &par.times, &cfg.rhs_expr);
    let mut u = SpaceTimeField::zeros(s.grid.clone(), par.times.clone());
    let mut hist = Csv::new(&["solve", "k", "residual"]);
    let need = !cfg.u0_expr.is_zero() || !cfg.rhs_expr.is_zero();
    let proxies = if need { Some(timed(&mut out.stages, "proxies", || par.norm_proxies())?) } else { None };
    if !cfg.u0_expr.is_zero() {
        let (v, rep) = timed(&mut out.stages, "homogeneous", || homogeneous_solve(&par, &u0, proxies))?;
        history_rows(&mut hist, "homogeneous", &rep);
        out.checks.push(("homogeneous_converged".into(), rep.converged));
        u.add_assign(&v)?;
    }
    if !cfg.rhs_expr.is_zero() {
        let (w, rep) = timed(&mut out.stages, "source", || neumann_solve(&par, &l, proxies))?;
        history_rows(&mut hist, "source", &rep);
        out.checks.push(("source_converged".into(), rep.converged));
        u.add_assign(&w)?;
    }
    let mut sol = Csv::new(&["t", "x", "y", "z", "u"]);
    let nt = par.times.len();
    let count = cfg.snapshots.max(2).min(nt);
    let mut levels: Vec<usize> = (0..count).map(|j| j * (nt - 1) / (count - 1)).collect();
    levels.dedup();
    for k in levels {
        for n in 0..nn {
            let (x, y, z) = s.grid.xyz(n);
            sol.push(vec![fmt_f(par.times[k]), fmt_f(x), fmt_f(y), fmt_f(z), fmt_f(u.at(n, k))]);
        }
    }
    out.files.push(("solution.csv".into(), sol));
    out.files.push(("residuals.csv".into(), hist));
    Ok(out)
}

fn run_oracle(cfg: &RunConfig) -> Result<CellOutput> {
    let mut out = CellOutput::default();
    let s = timed(&mut out.stages, "assemble", || setup(cfg))?;
    if s.coef.constant.is_none() {
        return Err(PhiError::Configuration("oracle-check: a_expr must be constant for the closed-form kernel".into()));
    }
    let prop = Propagator::with_solver(
        Arc::new(phi_heat_core::operators::ShiftedSolver::new(s.op.clone())),
        s.coef.clone(),
        cfg.ht,
        cfg.theta,
    )?;
    let blob = BlobSpec::default();
    let rows = timed(&mut out.stages, "oracle", || oracle_check(&prop, &s.grid, blob, &s.times, 0.01))?;
    let u0 = blob.exact(&s.grid, 0.0)?;
    let masses = timed(&mut out.stages, "mass", || mass_report(&prop, &u0, &s.times))?;
    let m0 = masses[0].1;
    let drift = masses.iter().map(|m| ((m.1 - m0) / m0).abs()).fold(0.0, f64::max);
    let mut csv = Csv::new(&["t", "sup_err", "l2_err", "mass"]);
    for r in &rows {
        csv.push(vec![fmt_f(r.t), fmt_f(r.sup_err), fmt_f(r.l2_err), fmt_f(r.mass)]);
    }
    out.checks.push(("sup_err_le_0.02".into(), rows.iter().all(|r| r.sup_err <= 0.02)));
    out.checks.push(("mass_drift_le_0.01".into(), drift <= 0.01));
    out.files.push(("oracle.csv".into(), csv));
    Ok(out)
}

fn run_norms(cfg: &RunConfig) -> Result<CellOutput> {
    let mut out = CellOutput::default();
    let s = timed(&mut out.stages, "assemble", || setup(cfg))?;
    let fields = [("a", &cfg.a_expr), ("rhs", &cfg.rhs_expr), ("u0", &cfg.u0_expr)];
    let mut csv = Csv::new(&["field_id", "k", "alpha", "gamma", "sup_norm", "seminorm", "total", "argmax_pair"]);
    for (id, e) in fields {
        let f = field_of(&s, &s.times, e);
        let r = timed(&mut out.stages, &format!("norm_{id}"), || k_alpha_norm(&f, &s.spec))?;
        let pair = r.argmax_pair.map_or_else(|| "none".to_string(), |p| p.describe(&s.grid, &s.times).replace(',', ";"));
        csv.push(vec![id.into(), cfg.k.to_string(), fmt_f(cfg.alpha), fmt_f(cfg.gamma), fmt_f(r.sup_norm), fmt_f(r.alpha_seminorm), fmt_f(r.total), pair]);
        out.checks.push((format!("{id}_finite"), r.total.is_finite()));
    }
    out.files.push(("norms.csv".into(), csv));
    Ok(out)
}

fn partition_header() -> Csv {
    Csv::new(&["epsilon", "anchor_count", "max_overlap", "diam_max", "seminorm", "seminorm_times_eps_alpha", "property_I_ok", "sum_to_one_max_err"])
}

fn run_partition(cfg: &RunConfig) -> Result<CellOutput> {
    let mut out = CellOutput::default();
    let s = timed(&mut out.stages, "assemble", || setup(cfg))?;
    let fam = timed(&mut out.stages, "normalize", || normalize(s.grid.clone(), PartitionConfig::lattice(&s.grid, cfg.eps, cfg.vartheta)?))?;
    let a = timed(&mut out.stages, "audit", || audit_report(&fam, &s.spec))?;
    let mut csv = partition_header();
    csv.push(vec![
        fmt_f(a.eps),
        a.anchor_count.to_string(),
        a.max_overlap.to_string(),
        fmt_f(a.diam_max),
        fmt_f(a.seminorm),
        fmt_f(a.seminorm_times_eps_alpha),
        a.property_i_ok.to_string(),
        fmt_f(a.sum_to_one_max_err),
    ]);
    out.checks.push(("sum_to_one".into(), a.sum_to_one_max_err <= 1e-12));
    out.checks.push(("property_I".into(), a.property_i_ok));
    out.checks.push(("diameter".into(), a.diameter_ok()));
    out.files.push(("partition.csv".into(), csv));
    Ok(out)
}

fn parametrix_header() -> Csv {
    Csv::new(&["eps", "T", "r1_proxy", "r2_proxy", "r3_proxy", "r_total_proxy", "converged", "neumann_terms", "residual_final", "seconds"])
}

fn run_parametrix(cfg: &RunConfig) -> Result<CellOutput> {
    let mut out = CellOutput::default();
    let start = Instant::now();
    let s = timed(&mut out.stages, "assemble", || setup(cfg))?;
    let par = timed(&mut out.stages, "parametrix", || {
        Parametrix::with_operator(s.grid.clone(), s.op.clone(), s.coef.clone(), parametrix_config(cfg, s.spec, cfg.t_end))
    })?;
    let p = timed(&mut out.stages, "proxies", || par.norm_proxies())?;
    let l = field_of(&s, &par.times, &cfg.rhs_expr);
    let solved = if p[3] < 1.0 {
        match timed(&mut out.stages, "neumann", || neumann_solve(&par, &l, Some(p))) {
            Ok((_, rep)) => Some(rep),
            Err(PhiError::ContractionBudget { .. }) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let (converged, terms, res) = solved.as_ref().map_or((false, 0, f64::NAN), |r| (r.converged, r.terms, r.residual_final()));
    let mut csv = parametrix_header();
    csv.push(vec![
        fmt_f(cfg.eps),
        fmt_f(par.config.t_window),
        fmt_f(p[0]),
        fmt_f(p[1]),
        fmt_f(p[2]),
        fmt_f(p[3]),
        converged.to_string(),
        terms.to_string(),
        fmt_f(res),
        format!("{:.3}", start.elapsed().as_secs_f64()),
    ]);
    // cells inside the budget must converge; the others are data
    out.checks.push(("within_budget_converges".into(), p[3] > cfg.delta || converged));
    out.files.push(("phase_diagram.csv".into(), csv));
    Ok(out)
}

fn run_maxprinciple(cfg: &RunConfig) -> Result<CellOutput> {
    let mut out = CellOutput::default();
    let s = timed(&mut out.stages, "assemble", || setup(cfg))?;
    let mut pc = parametrix_config(cfg, s.spec, cfg.t_end);
    pc.tol = Some(cfg.tol);
    let par = timed(&mut out.stages, "parametrix", || Parametrix::with_operator(s.grid.clone(), s.op.clone(), s.coef.clone(), pc))?;
    let u0 = field_of(&s, &[0.0], &cfg.u0_expr).values;
    let (u, rep) = timed(&mut out.stages, "homogeneous", || homogeneous_solve(&par, &u0, None))?;
    let scale = u0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = envelope_tolerance(&par.prop, &par.times, scale).max(rep.residual_final() * par.h_t());
    let e = envelope_trace_with_tol(&u, tol);
    let mut csv = Csv::new(&["t", "u_sup", "u_inf", "sup_flag", "inf_flag", "argmax_x", "deficit_value", "deficit_laplacian"]);
    for k in 0..e.times.len() {
        let p = omori_yau_point(u.slice(k), 10, &s.op)?;
        csv.push(vec![
            fmt_f(e.times[k]),
            fmt_f(e.u_sup[k]),
            fmt_f(e.u_inf[k]),
            e.sup_flags[k].to_string(),
            e.inf_flags[k].to_string(),
            fmt_f(s.grid.x_of(e.argmax[k])),
            fmt_f(p.deficit_value),
            fmt_f(p.deficit_laplacian),
        ]);
    }
    out.checks.push(("envelopes_monotone".into(), e.monotone()));
    out.checks.push(("homogeneous_converged".into(), rep.converged));
    out.files.push(("maxprinciple.csv".into(), csv));
    Ok(out)
}

fn run_semilinear(cfg: &RunConfig) -> Result<CellOutput> {
    let mut out = CellOutput::default();
    let s = timed(&mut out.stages, "assemble", || setup(cfg))?;
    let mut f = NonlinearRHS::zero(f64::INFINITY);
    if !cfg.f1_expr.is_zero() {
        let e = cfg.f1_expr.clone();
        f = f.with_f1(NonlinearRHS::pointwise(move |x, y, z, t, u| e.eval(x, y, z, t, u)));
    }
    if !cfg.f2_expr.is_zero() {
        let e = cfg.f2_expr.clone();
        f = f.with_f2(NonlinearRHS::pointwise(move |x, y, z, t, u| e.eval(x, y, z, t, u)));
    }
    if !cfg.rhs_expr.is_zero() {
        let e = cfg.rhs_expr.clone();
        f = f.with_source(move |x, y, z, t| e.eval(x, y, z, t, 0.0));
    }
    let base = parametrix_config(cfg, s.spec.with_k(cfg.k), cfg.t_prime);
    let pc = PicardConfig::new(cfg.t_prime, cfg.tol, cfg.max_iter);
    let st = timed(&mut out.stages, "picard", || picard_solve(s.grid.clone(), s.op.clone(), s.coef.clone(), base, &f, pc, None))?;
    let mut csv = Csv::new(&["n", "gap", "residual", "T_prime_current"]);
    for (n, g) in st.gaps.iter().enumerate() {
        csv.push(vec![(n + 1).to_string(), fmt_f(*g), fmt_f(st.residuals[n]), fmt_f(st.t_prime)]);
    }
    out.checks.push(("picard_converged".into(), st.converged));
    out.files.push(("picard.csv".into(), csv));
    Ok(out)
}

fn run_cell(sub: Subcommand, cfg: &RunConfig) -> Result<CellOutput> {
    match sub {
        Subcommand::Solve => run_solve(cfg),
        Subcommand::OracleCheck => run_oracle(cfg),
        Subcommand::Norms => run_norms(cfg),
        Subcommand::AuditPartition => run_partition(cfg),
        Subcommand::AuditParametrix => run_parametrix(cfg),
        Subcommand::MaxPrinciple => run_maxprinciple(cfg),
        Subcommand::Semilinear => run_semilinear(cfg),
    }
}

/// Runs every sweep cell, writes CSVs and the manifest under `out` (or the
/// configured `out_dir`). With several cells each gets `cell_NNN/`, and the
/// subcommand CSV is also concatenated at the top level.
pub fn run(sub: Subcommand, cells: &[RunConfig], out: Option<&Path>) -> Result<RunManifest> {
    let first = cells.first().ok_or_else(|| PhiError::Configuration("no run cells".into()))?;
    let root: PathBuf = out.map(Path::to_path_buf).unwrap_or_else(|| first.out_dir.clone());
    let mut m = RunManifest::new(sub.name());
    m.config = first.echo.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
    if cells.len() > 1 {
        // sweep keys are the ones whose values differ across cells
        for (k, v) in m.config.iter_mut() {
            let vals: Vec<&String> = cells.iter().map(|c| &c.echo[k]).collect();
            if vals.iter().any(|x| *x != vals[0]) {
                let mut uniq: Vec<&String> = Vec::new();
                for x in vals {
                    if !uniq.contains(&x) {
                        uniq.push(x);
                    }
                }
                *v = uniq.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ");
            }
        }
    }
    let results: Vec<Result<CellOutput>> = cells.par_iter().map(|c| run_cell(sub, c)).collect();
    let mut summary: Option<Csv> = None;
    for (i, r) in results.into_iter().enumerate() {
        let tag = if cells.len() > 1 { format!("cell_{i:03}") } else { String::new() };
        let prefix = |name: &str| if tag.is_empty() { name.to_string() } else { format!("{tag}.{name}") };
        match r {
            Ok(c) => {
                for (name, secs) in c.stages {
                    m.stages.push((prefix(&name), secs));
                }
                for (name, ok) in c.checks {
                    m.checks.push((prefix(&name), ok));
                }
                for (name, csv) in c.files {
                    let rel = if tag.is_empty() { PathBuf::from(&name) } else { PathBuf::from(&tag).join(&name) };
                    m.emit(&root, rel, &csv.render())?;
                    if cells.len() > 1 && name == sub.csv_name() {
                        let s = summary.get_or_insert_with(|| Csv { header: csv.header.clone(), rows: Vec::new() });
                        s.rows.extend(csv.rows.iter().cloned());
                    }
                }
            }
            Err(e) => {
                m.failed_stage = Some((if tag.is_empty() { sub.name().to_string() } else { format!("{}:{tag}", sub.name()) }, e.to_string()));
                break;
            }
        }
    }
    if let Some(s) = summary {
        m.emit(&root, sub.csv_name(), &s.render())?;
    }
    m.write(&root)?;
    Ok(m)
}
