//! One function per subcommand. Sweeps run in parallel and are written in
//! parameter order.

use kitaev_ness::negativity::{default_ell_grid, fermionic_negativity, negativity_of_covariance};
use kitaev_ness::oracle::{
    build_dense_operators, covariance_from_density, evolve_master_equation, liouvillian_summary, max_entry_error,
    max_z_score, sample_trajectories, OracleConfig, Unraveling, LIOUVILLIAN_MAX_L, TRAJECTORY_MAX_L,
};
use kitaev_ness::spatial::{correlations_real_space, fit_correlation_length, scan_with_retry, xi_upper_bound, FitWindow};
use kitaev_ness::spectrum::{build_structure_matrix_dense, gap_for, rapidities};
use kitaev_ness::{c64, Error, ModelParams};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{CommandKind, RunConfig};
use crate::output::{Cell, Table};

/// Why a run stopped, which decides the exit code.
#[derive(Debug)]
pub enum Failure {
    Input(String),
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Numerical(m) => m,
        }
    }
}

fn at(p: &ModelParams, e: Error) -> Failure {
    let msg = format!("mu={} gamma={} q={} L={}: {e}", p.mu(), p.gamma(), p.q(), p.l());
    match e {
        Error::InvalidParams(_) | Error::InvalidWindow { .. } | Error::TooLarge { .. } => Failure::Input(msg),
        _ => Failure::Numerical(msg),
    }
}

pub enum Output {
    Table(Table),
    Json(Value),
}

pub fn run(cfg: &RunConfig) -> Result<Output, Failure> {
    let points: Vec<ModelParams> = cfg
        .points()
        .into_iter()
        .collect::<kitaev_ness::Result<_>>()
        .map_err(|e| Failure::Input(e.to_string()))?;
    match cfg.command {
        CommandKind::Steady => steady(&points[0]).map(Output::Table),
        CommandKind::Negativity => negativity(cfg, &points[0]).map(Output::Table),
        CommandKind::Oracle => oracle(cfg, &points[0]).map(Output::Json),
        CommandKind::Xi => sweep_rows(&points, XI_COLUMNS, |p| xi_row(cfg, p)).map(Output::Table),
        CommandKind::Gap => sweep_rows(&points, GAP_COLUMNS, gap_row).map(Output::Table),
        CommandKind::Sweep => sweep_rows(&points, MAP_COLUMNS, |p| map_row(cfg, p)).map(Output::Table),
    }
}

const XI_COLUMNS: &[&str] = &["mu", "gamma", "q", "L", "xi_up", "xi_fit", "alpha", "r2"];
const GAP_COLUMNS: &[&str] = &["mu", "gamma", "q", "L", "gap"];
const MAP_COLUMNS: &[&str] = &["mu", "gamma", "q", "L", "xi_up", "gap"];

fn param_cells(p: &ModelParams) -> Vec<Cell> {
    vec![Cell::Float(p.mu()), Cell::Float(p.gamma()), Cell::Float(p.q()), Cell::Int(p.l())]
}

fn sweep_rows<F>(points: &[ModelParams], columns: &'static [&'static str], f: F) -> Result<Table, Failure>
where
    F: Fn(&ModelParams) -> Result<Vec<Cell>, Failure> + Sync,
{
    let rows: Vec<Result<Vec<Cell>, Failure>> = points.par_iter().map(&f).collect();
    Ok(Table { columns, rows: rows.into_iter().collect::<Result<_, _>>()? })
}

fn steady(p: &ModelParams) -> Result<Table, Failure> {
    let corr = correlations_real_space(p).map_err(|e| at(p, e))?;
    let rows = corr
        .blocks
        .iter()
        .enumerate()
        .map(|(x, b)| {
            vec![Cell::Int(x), Cell::Float(b[0][0]), Cell::Float(b[0][1]), Cell::Float(b[1][0]), Cell::Float(b[1][1])]
        })
        .collect();
    Ok(Table { columns: &["x", "g11", "g12", "g21", "g22"], rows })
}

fn xi_row(cfg: &RunConfig, p: &ModelParams) -> Result<Vec<Cell>, Failure> {
    let corr = correlations_real_space(p).map_err(|e| at(p, e))?;
    let fit = fit_correlation_length(&corr, FitWindow::default_for(p.l()), (0, 1)).map_err(|e| at(p, e))?;
    let scan = scan_with_retry(p, cfg.scan).map_err(|e| at(p, e))?;
    let mut row = param_cells(p);
    row.extend([
        Cell::Float(xi_upper_bound(&scan)),
        Cell::Float(fit.xi),
        Cell::Float(fit.alpha),
        Cell::Float(fit.r2),
    ]);
    Ok(row)
}

fn gap_row(p: &ModelParams) -> Result<Vec<Cell>, Failure> {
    let mut row = param_cells(p);
    row.push(Cell::Float(gap_for(p).map_err(|e| at(p, e))?));
    Ok(row)
}

fn map_row(cfg: &RunConfig, p: &ModelParams) -> Result<Vec<Cell>, Failure> {
    let scan = scan_with_retry(p, cfg.scan).map_err(|e| at(p, e))?;
    let mut row = param_cells(p);
    row.push(Cell::Float(xi_upper_bound(&scan)));
    row.push(Cell::Float(gap_for(p).map_err(|e| at(p, e))?));
    Ok(row)
}

fn negativity(cfg: &RunConfig, p: &ModelParams) -> Result<Table, Failure> {
    let corr = correlations_real_space(p).map_err(|e| at(p, e))?;
    let ells = cfg.ell.clone().unwrap_or_else(|| default_ell_grid(p.l()));
    let results: Vec<_> = ells.par_iter().map(|&ell| fermionic_negativity(&corr, ell)).collect();
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        let r = r.map_err(|e| at(p, e))?;
        rows.push(vec![Cell::Int(r.ell), Cell::Float(r.chord), Cell::Float(r.value)]);
    }
    Ok(Table { columns: &["ell", "chord", "negativity"], rows })
}

fn check(name: &str, value: f64, tolerance: f64) -> Value {
    let v = if value.is_finite() { json!(value) } else { json!(value.to_string()) };
    json!({ "name": name, "value": v, "tolerance": tolerance, "pass": value < tolerance })
}

/// Every brute-force comparison available at this size.
fn oracle(cfg: &RunConfig, p: &ModelParams) -> Result<Value, Failure> {
    let ocfg = OracleConfig {
        seed: cfg.seed,
        n_traj: cfg.n_traj.max(1),
        traj_time: cfg.traj_time,
        ..OracleConfig::for_params(p)
    };
    let ops = build_dense_operators(p).map_err(|e| at(p, e))?;
    let state = evolve_master_equation(p, &ocfg).map_err(|e| at(p, e))?;
    let (cov, residue) = covariance_from_density(&state.rho, &ops);
    let corr = correlations_real_space(p).map_err(|e| at(p, e))?;
    let are = corr.full_matrix();
    let half = p.l() / 2;
    let n_oracle = negativity_of_covariance(&cov, half).map_err(|e| at(p, e))?.value;
    let n_are = fermionic_negativity(&corr, half).map_err(|e| at(p, e))?.value;
    let mut checks = vec![
        check("covariance_vs_riccati", max_entry_error(&cov, &are), 1e-6),
        check("trace_drift", state.trace_drift, 1e-8),
        check("covariance_imaginary_residue", residue, 1e-10),
        check("negativity_half_chain", (n_oracle - n_are).abs(), 1e-6),
    ];
    if p.l() <= LIOUVILLIAN_MAX_L {
        let s = liouvillian_summary(p).map_err(|e| at(p, e))?;
        let sm = build_structure_matrix_dense(p).map_err(|e| at(p, e))?;
        let r = rapidities(&sm).map_err(|e| at(p, e))?;
        let sum: c64 = r.beta.iter().sum();
        let offset = (s.lambda0 - (sum - c64::new(sm.a0(), 0.0)) * 0.5).norm();
        checks.push(check("gap_dense_vs_rapidities", (s.even_gap - r.gap).abs(), 1e-8));
        checks.push(check("steady_eigenvalue_offset", offset, 1e-8));
    }
    if cfg.n_traj > 0 && p.l() <= TRAJECTORY_MAX_L {
        for (name, u) in [("trajectories_biased_discard", Unraveling::BiasedDiscard), ("trajectories_undetected_mixing", Unraveling::UndetectedMixing)] {
            let e = sample_trajectories(p, &ocfg, u).map_err(|e| at(p, e))?;
            checks.push(check(&format!("{name}_max_z"), max_z_score(&e.covariance, &cov, &e.std_err), 3.0));
        }
    }
    let pass = checks.iter().all(|c| c["pass"] == json!(true));
    Ok(json!({
        "params": { "mu": p.mu(), "gamma": p.gamma(), "q": p.q(), "L": p.l() },
        "integration": { "dt": ocfg.dt, "time": state.time, "residual": state.residual },
        "checks": checks,
        "pass": pass,
    }))
}
