use std::collections::BTreeMap;
use std::path::PathBuf;

use phi_heat_core::geometry::{Grid, ManifoldModel, ModelId};
use phi_heat_core::{PhiError, Result};

use crate::expr::Expression;

/// Keys accepted by [`parse_config`] with their defaults.
pub const KEYS: [(&str, &str); 31] = [
    ("model", "A"),
    ("grid_nx", "128"),
    ("grid_ny", "64"),
    ("grid_nz", "16"),
    ("x_min", "0.015625"),
    ("x_max", "1"),
    ("eps", "0.125"),
    ("vartheta", ""),
    ("alpha", "0.5"),
    ("beta", "0.75"),
    ("gamma", "0"),
    ("k", "0"),
    ("delta", "0.5"),
    ("T", "0.05"),
    ("ht", ""),
    ("theta", "0.5"),
    ("a_min", "0"),
    ("a_expr", "1"),
    ("rhs_expr", "0"),
    ("u0_expr", "0"),
    ("F1_expr", "0"),
    ("F2_expr", "0"),
    ("T_prime", ""),
    ("tol", "1e-8"),
    ("max_iter", "30"),
    ("seed", "0"),
    ("pair_budget", "4000"),
    ("probes", "24"),
    ("neumann_cap", "12"),
    ("snapshots", "5"),
    ("out_dir", "out"),
];

/// One fully resolved run cell.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelId,
    pub grid_nx: usize,
    pub grid_ny: usize,
    pub grid_nz: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub eps: f64,
    pub vartheta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub k: usize,
    pub delta: f64,
    pub t_end: f64,
    pub ht: f64,
    pub theta: f64,
    pub a_min: f64,
    pub a_expr: Expression,
    pub rhs_expr: Expression,
    pub u0_expr: Expression,
    pub f1_expr: Expression,
    pub f2_expr: Expression,
    pub t_prime: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub pair_budget: usize,
    pub probes: usize,
    pub neumann_cap: usize,
    pub snapshots: usize,
    pub out_dir: PathBuf,
    /// `key = value` pairs as resolved, in key order
    pub echo: BTreeMap<String, String>,
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| PhiError::Configuration(format!("{key}: `{v}` is not a valid number")))
}

fn is_expression(key: &str) -> bool {
    key.ends_with("_expr") || key == "out_dir" || key == "model"
}

/// Raw `key → value list` entries in file order; comma lists become sweeps.
pub fn parse_entries(text: &str) -> Result<Vec<(String, Vec<String>)>> {
    let mut out: Vec<(String, Vec<String>)> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| PhiError::Configuration(format!("line {}: expected `key = value`, got `{line}`", ln + 1)))?;
        let k = k.trim();
        if !KEYS.iter().any(|(n, _)| *n == k) {
            let valid: Vec<&str> = KEYS.iter().map(|(n, _)| *n).collect();
            return Err(PhiError::Configuration(format!("unknown key `{k}`; valid keys: {}", valid.join(", "))));
        }
        let vals: Vec<String> =
            if is_expression(k) { vec![v.trim().to_string()] } else { v.split(',').map(|s| s.trim().to_string()).collect() };
        if vals.iter().any(|s| s.is_empty()) {
            return Err(PhiError::Configuration(format!("{k}: empty value")));
        }
        if out.iter().any(|(n, _)| n == k) {
            return Err(PhiError::Configuration(format!("{k}: key given twice")));
        }
        out.push((k.to_string(), vals));
    }
    Ok(out)
}

/// Parses a config and expands every comma list into one cell per
/// combination (the key listed last varies fastest).
pub fn parse_config(text: &str) -> Result<Vec<RunConfig>> {
    let entries = parse_entries(text)?;
    let mut cells: Vec<BTreeMap<String, String>> = vec![BTreeMap::new()];
    for (k, vals) in &entries {
        cells = cells
            .into_iter()
            .flat_map(|c| {
                vals.iter().map(move |v| {
                    let mut c = c.clone();
                    c.insert(k.clone(), v.clone());
                    c
                })
            })
            .collect();
    }
    cells.iter().map(resolve).collect()
}

/// Single-cell convenience: errors when the text contains a sweep.
pub fn parse_single(text: &str) -> Result<RunConfig> {
    let mut v = parse_config(text)?;
    if v.len() != 1 {
        return Err(PhiError::Configuration(format!("expected one run, the sweep expands to {}", v.len())));
    }
    Ok(v.remove(0))
}

fn resolve(set: &BTreeMap<String, String>) -> Result<RunConfig> {
    let mut echo = BTreeMap::new();
    for (k, d) in KEYS {
        echo.insert(k.to_string(), set.get(k).cloned().unwrap_or_else(|| d.to_string()));
    }
    let g = |k: &str| echo[k].clone();
    let model: ModelId = g("model").parse()?;
    let eps: f64 = num("eps", &g("eps"))?;
    let grid_nx: usize = num("grid_nx", &g("grid_nx"))?;
    let x_min: f64 = num("x_min", &g("x_min"))?;
    let x_max: f64 = num("x_max", &g("x_max"))?;
    let t_end: f64 = num("T", &g("T"))?;
    let hx = (x_max - x_min) / (grid_nx.max(2) - 1) as f64;
    let ht = if g("ht").is_empty() { hx.min(1e-3) } else { num("ht", &g("ht"))? };
    let vartheta = if g("vartheta").is_empty() { eps / 2.0 } else { num("vartheta", &g("vartheta"))? };
    let t_prime = if g("T_prime").is_empty() { t_end } else { num("T_prime", &g("T_prime"))? };
    let mut cfg = RunConfig {
        model,
        grid_nx,
        grid_ny: num("grid_ny", &g("grid_ny"))?,
        grid_nz: if model == ModelId::A { 1 } else { num("grid_nz", &g("grid_nz"))? },
        x_min,
        x_max,
        eps,
        vartheta,
        alpha: num("alpha", &g("alpha"))?,
        beta: num("beta", &g("beta"))?,
        gamma: num("gamma", &g("gamma"))?,
        k: num("k", &g("k"))?,
        delta: num("delta", &g("delta"))?,
        t_end,
        ht,
        theta: num("theta", &g("theta"))?,
        a_min: num("a_min", &g("a_min"))?,
        a_expr: Expression::parse("a_expr", &g("a_expr"), false)?,
        rhs_expr: Expression::parse("rhs_expr", &g("rhs_expr"), false)?,
        u0_expr: Expression::parse("u0_expr", &g("u0_expr"), false)?,
        f1_expr: Expression::parse("F1_expr", &g("F1_expr"), true)?,
        f2_expr: Expression::parse("F2_expr", &g("F2_expr"), true)?,
        t_prime,
        tol: num("tol", &g("tol"))?,
        max_iter: num("max_iter", &g("max_iter"))?,
        seed: num("seed", &g("seed"))?,
        pair_budget: num("pair_budget", &g("pair_budget"))?,
        probes: num("probes", &g("probes"))?,
        neumann_cap: num("neumann_cap", &g("neumann_cap"))?,
        snapshots: num("snapshots", &g("snapshots"))?,
        out_dir: PathBuf::from(g("out_dir")),
        echo: BTreeMap::new(),
    };
    // echo resolved defaults rather than blanks
    echo.insert("ht".into(), ht.to_string());
    echo.insert("vartheta".into(), vartheta.to_string());
    echo.insert("T_prime".into(), t_prime.to_string());
    cfg.echo = echo;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |k: &str, c: &str| Err(PhiError::Configuration(format!("{k}: {c}")));
        if !(self.alpha > 0.0 && self.alpha < self.beta && self.beta <= 1.0) {
            return bad("alpha", &format!("need 0 < alpha < beta <= 1 (the Hölder exponent of a must exceed the working exponent), got alpha={}, beta={}", self.alpha, self.beta));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return bad("eps", "must lie in (0,1)");
        }
        if !(self.vartheta > 0.0 && self.vartheta < 1.0) {
            return bad("vartheta", "must lie in (0,1)");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta", "must lie in (0,1)");
        }
        if !(self.t_end > 0.0) {
            return bad("T", "must be positive");
        }
        if !(self.ht > 0.0 && self.ht <= self.t_end) {
            return bad("ht", "must lie in (0, T]");
        }
        if !(self.theta >= 0.0 && self.theta <= 1.0) {
            return bad("theta", "must lie in [0,1]");
        }
        if !(self.t_prime > 0.0) {
            return bad("T_prime", "must be positive");
        }
        if !(self.tol > 0.0) {
            return bad("tol", "must be positive");
        }
        if self.pair_budget < 1000 {
            return bad("pair_budget", "must be >= 1000");
        }
        if self.neumann_cap < 1 || self.max_iter < 1 {
            return bad("neumann_cap", "neumann_cap and max_iter must be >= 1");
        }
        if self.a_min < 0.0 {
            return bad("a_min", "must be >= 0");
        }
        let grid = self.grid()?;
        self.coefficient_bounds(&grid).map(|_| ())
    }

    pub fn manifold(&self) -> Result<ManifoldModel<f64>> {
        ManifoldModel::new(self.model, self.x_min, self.x_max)
    }

    pub fn grid(&self) -> Result<Grid<f64>> {
        Grid::new(self.manifold()?, self.grid_nx, self.grid_ny, self.grid_nz)
    }

    /// Samples `a_expr` on the grid at `t ∈ {0, T/2, T}`; errors unless the
    /// minimum is positive and at least `a_min`.
    pub fn coefficient_bounds(&self, grid: &Grid<f64>) -> Result<(f64, f64)> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for t in [0.0, 0.5 * self.t_end, self.t_end] {
            for n in 0..grid.len() {
                let (x, y, z) = grid.xyz(n);
                let a = self.a_expr.eval(x, y, z, t, 0.0);
                if !a.is_finite() {
                    return Err(PhiError::Configuration(format!("a_expr is not finite at x={x}, y={y}, z={z}, t={t}")));
                }
                lo = lo.min(a);
                hi = hi.max(a);
            }
        }
        if !(lo > 0.0) || lo < self.a_min {
            return Err(PhiError::Configuration(format!(
                "a_expr: sampled minimum {lo} violates a > 0 and a >= a_min = {}",
                self.a_min
            )));
        }
        Ok((lo, hi))
    }
}
