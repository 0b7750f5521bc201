//! Executes a configured sweep and writes its tables, plots and sidecar.

use std::path::{Path, PathBuf};

use adsis_core::allocation::{c_max, solve_allocation, AllocationKind};
use adsis_core::bounds::{alpha_u_from_kappa, kappa, kappa0, sis_alpha_u};
use adsis_core::exact::{build_transition_matrix, decay_rate_exact};
use adsis_core::gp::SolverOptions;
use adsis_core::simulator::{estimate_decay_rate, estimate_infection_probabilities, DecayMethod, MonteCarloConfig};
use adsis_core::{CostModel, ModelParams, NodeStateVector, Seed, SimError};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ConfigError, ExperimentConfig, ExperimentKind, Network};
use crate::error::CliError;
use crate::plot::emit_plot;
use crate::stats::{ranks, spearman};
use crate::table::{Cell, ResultTable};

pub const NODES_TABLE: &str = "nodes";

/// Everything a run produces, in deterministic order.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    /// `(file stem, table)`; the first entry is the main table.
    pub tables: Vec<(String, ResultTable)>,
    /// `(file name, svg)`.
    pub plots: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

impl Artifacts {
    pub fn main(&self) -> &ResultTable {
        &self.tables[0].1
    }

    pub fn table(&self, suffix: &str) -> Option<&ResultTable> {
        self.tables.iter().find(|(name, _)| name.ends_with(&format!("_{suffix}"))).map(|t| &t.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Target {
    BudgetFraction(f64),
    AlphaBar(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Point {
    m: usize,
    beta: f64,
    delta: f64,
    chi_lower: f64,
    pi_lower: f64,
    target: Option<Target>,
}

impl Point {
    fn describe(&self) -> String {
        let mut s = format!("m={}, beta={}, delta={}", self.m, self.beta, self.delta);
        if let Some(t) = self.target {
            s += &format!(", chi_lower={}, pi_lower={}", self.chi_lower, self.pi_lower);
            match t {
                Target::BudgetFraction(f) => s += &format!(", budget_fraction={f}"),
                Target::AlphaBar(a) => s += &format!(", alpha_bar={a}"),
            }
        }
        s
    }
}

fn sweep_points(config: &ExperimentConfig) -> Vec<Point> {
    let s = &config.sweep;
    let mut points = Vec::new();
    for &m in &s.m {
        for &beta in &s.beta {
            for &delta in &s.delta {
                let base = Point { m, beta, delta, chi_lower: 1.0, pi_lower: 1.0, target: None };
                match &config.allocation {
                    Some(a) if config.kind == ExperimentKind::Allocate => {
                        let targets: Vec<Target> = a
                            .budget_fraction
                            .iter()
                            .map(|&f| Target::BudgetFraction(f))
                            .chain(a.alpha_bar.iter().map(|&x| Target::AlphaBar(x)))
                            .collect();
                        for &chi_lower in &a.chi_lower {
                            for &pi_lower in &a.pi_lower {
                                for &t in &targets {
                                    points.push(Point { chi_lower, pi_lower, target: Some(t), ..base });
                                }
                            }
                        }
                    }
                    _ => points.push(base),
                }
            }
        }
    }
    points
}

fn columns(kind: ExperimentKind) -> &'static [&'static str] {
    match kind {
        ExperimentKind::Simulate => &[
            "n", "m", "beta", "delta", "runs", "alpha_hat", "standard_error", "method", "stop_time",
            "reached_threshold", "kappa", "alpha_u", "discrepancy",
        ],
        ExperimentKind::Bound => {
            &["n", "m", "beta", "delta", "kappa", "kappa0", "rho_b", "alpha_u", "alpha_u_no_adaptation"]
        }
        ExperimentKind::Exact => &["n", "m", "beta", "delta", "alpha_exact", "kappa", "alpha_u", "discrepancy"],
        ExperimentKind::Allocate => &[
            "n", "m", "beta", "delta", "chi_lower", "pi_lower", "p", "q", "target_kind", "target", "budget",
            "c_max", "alpha_u_unmitigated", "alpha_u_star", "kappa_star", "alpha_u_check", "total_cost",
            "spearman_activity", "solver_status", "newton_steps", "kkt_residual", "snapped",
        ],
    }
}

const NODE_COLUMNS: &[&str] = &[
    "m", "beta", "delta", "chi_lower", "pi_lower", "target", "node", "activity", "activity_rank", "chi", "pi",
    "investment_f", "investment_g", "investment_total",
];

struct PointOutput {
    row: Vec<Cell>,
    nodes: Vec<Vec<Cell>>,
    warnings: Vec<String>,
}

/// Runs the sweep on the current rayon pool.
pub fn run(config: &ExperimentConfig) -> Result<Artifacts, CliError> {
    config.validate()?;
    let network = config.model.network(config.seed)?;
    let points = sweep_points(config);
    let outputs: Vec<Result<PointOutput, CliError>> = points
        .par_iter()
        .enumerate()
        .map(|(index, point)| run_point(config, &network, point, index as u64))
        .collect();

    let name = config.name();
    let mut main = ResultTable::new(columns(config.kind).iter().copied());
    let mut nodes = ResultTable::new(NODE_COLUMNS.iter().copied());
    let mut warnings = Vec::new();
    for out in outputs {
        let out = out?;
        main.push(out.row)?;
        for r in out.nodes {
            nodes.push(r)?;
        }
        warnings.extend(out.warnings);
    }
    let mut artifacts = Artifacts { tables: vec![(name.clone(), main)], plots: Vec::new(), warnings };
    if config.kind == ExperimentKind::Allocate {
        artifacts.tables.push((format!("{name}_{NODES_TABLE}"), nodes));
    }
    for spec in &config.output.plots {
        let table = match spec.table.as_deref() {
            None => artifacts.main(),
            Some(t) => artifacts.table(t).ok_or_else(|| ConfigError::UnknownTable(t.to_string()))?,
        };
        artifacts.plots.extend(emit_plot(table, spec)?);
    }
    Ok(artifacts)
}

/// Runs the sweep on a dedicated pool of `workers` threads, or on the
/// global pool when `workers` is `None`.
pub fn run_with_workers(config: &ExperimentConfig, workers: Option<usize>) -> Result<Artifacts, CliError> {
    match workers {
        None => run(config),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| CliError::Pool(e.to_string()))?
            .install(|| run(config)),
    }
}

fn params_at(network: &Network, point: &Point) -> Result<ModelParams, CliError> {
    ModelParams::new(point.m, network.a.clone(), network.chi.clone(), network.pi.clone(), point.beta, point.delta)
        .map_err(|e| CliError::at(point.describe(), e))
}

fn run_point(config: &ExperimentConfig, network: &Network, point: &Point, index: u64) -> Result<PointOutput, CliError> {
    let params = params_at(network, point)?;
    let at = |e: adsis_core::Error| CliError::at(point.describe(), e);
    let n = params.n;
    let coords: Vec<Cell> = vec![n.into(), point.m.into(), point.beta.into(), point.delta.into()];
    let mut warnings = Vec::new();
    let mut nodes = Vec::new();
    let k = kappa(&params).map_err(|e| at(e.into()))?;
    let alpha_u = alpha_u_from_kappa(&params, k);
    let tail: Vec<Cell> = match config.kind {
        ExperimentKind::Simulate => {
            let mc = &config.monte_carlo;
            let seed = Seed(config.seed.expect("validated")).child(index);
            let mcc = MonteCarloConfig {
                runs: mc.runs,
                stop_threshold: mc.stop_threshold,
                max_horizon: mc.max_horizon,
                seed,
            };
            let series = estimate_infection_probabilities(&params, &NodeStateVector::all_infected(n), &mcc)
                .map_err(|e| at(e.into()))?;
            if !series.reached_threshold {
                warnings.push(format!("{}: horizon cap reached before the stop threshold", point.describe()));
            }
            let est = match estimate_decay_rate(&series, mc.method) {
                Err(SimError::TooShort { len, .. }) if mc.method == DecayMethod::TailSlope => {
                    warnings.push(format!(
                        "{}: series has {len} points, too short for tail-slope; used paper-literal",
                        point.describe()
                    ));
                    estimate_decay_rate(&series, DecayMethod::PaperLiteral)
                }
                r => r,
            };
            // A series that drops to zero in one step has no estimate.
            let est = match est {
                Ok(e) => Some(e),
                Err(e @ (SimError::TooShort { .. } | SimError::NoPositiveTail)) => {
                    warnings.push(format!("{}: no decay-rate estimate: {e}", point.describe()));
                    None
                }
                Err(e) => return Err(at(e.into())),
            };
            let method = est.map(|e| match e.method {
                DecayMethod::TailSlope => "tail-slope",
                DecayMethod::PaperLiteral => "paper-literal",
            });
            let alpha_hat = est.map(|e| e.alpha_hat);
            vec![
                mc.runs.into(),
                alpha_hat.into(),
                est.and_then(|e| e.standard_error).into(),
                method.into(),
                (series.len() - 1).into(),
                series.reached_threshold.into(),
                k.into(),
                alpha_u.into(),
                alpha_hat.map(|a| alpha_u - a).into(),
            ]
        }
        ExperimentKind::Bound => {
            let k0 = kappa0(&params).map_err(|e| at(e.into()))?;
            let sis = sis_alpha_u(&params).map_err(|e| at(e.into()))?;
            vec![k.into(), k0.into(), (k * params.bar_m()).into(), alpha_u.into(), sis.into()]
        }
        ExperimentKind::Exact => {
            let q = build_transition_matrix(&params).map_err(|e| at(e.into()))?;
            let rho = decay_rate_exact(&q).map_err(|e| at(e.into()))?;
            vec![rho.into(), k.into(), alpha_u.into(), (alpha_u - rho).into()]
        }
        ExperimentKind::Allocate => {
            let a = config.allocation.as_ref().expect("validated");
            let cost = CostModel::uniform(n, a.p, a.q, point.chi_lower, point.pi_lower);
            let cmax = c_max(&cost);
            let (kind, target_kind, target, budget) = match point.target.expect("allocation point") {
                Target::BudgetFraction(f) => {
                    (AllocationKind::CostConstrained { budget: f * cmax }, "budget_fraction", f, Some(f * cmax))
                }
                Target::AlphaBar(x) => (AllocationKind::PerformanceConstrained { alpha_bar: x }, "alpha_bar", x, None),
            };
            let r = solve_allocation(&params, &cost, kind, &SolverOptions::default()).map_err(|e| at(e.into()))?;
            if r.solver_status != "optimal" {
                warnings.push(format!("{}: solver status {}", point.describe(), r.solver_status));
            }
            let unmitigated = ModelParams { chi: vec![1.0; n], pi: vec![1.0; n], ..params.clone() };
            let alpha_one = adsis_core::bounds::alpha_u(&unmitigated).map_err(|e| at(e.into()))?;
            let solved = ModelParams { chi: r.chi_star.clone(), pi: r.pi_star.clone(), ..params.clone() };
            let k_star = kappa(&solved).map_err(|e| at(e.into()))?;
            let totals: Vec<f64> = (0..n).map(|i| r.investment(i)).collect();
            let rank = ranks(&params.a);
            for i in 0..n {
                nodes.push(vec![
                    point.m.into(),
                    point.beta.into(),
                    point.delta.into(),
                    point.chi_lower.into(),
                    point.pi_lower.into(),
                    target.into(),
                    i.into(),
                    params.a[i].into(),
                    rank[i].into(),
                    r.chi_star[i].into(),
                    r.pi_star[i].into(),
                    r.investments_f[i].into(),
                    r.investments_g[i].into(),
                    totals[i].into(),
                ]);
            }
            vec![
                point.chi_lower.into(),
                point.pi_lower.into(),
                a.p.into(),
                a.q.into(),
                target_kind.into(),
                target.into(),
                budget.into(),
                cmax.into(),
                alpha_one.into(),
                r.alpha_u_star.into(),
                k_star.into(),
                r.alpha_u_check.into(),
                r.total_cost.into(),
                spearman(&totals, &params.a).into(),
                r.solver_status.clone().into(),
                r.newton_steps.into(),
                r.kkt_residual.into(),
                r.snapped.into(),
            ]
        }
    };
    let mut row = coords;
    row.extend(tail);
    Ok(PointOutput { row, nodes, warnings })
}

#[derive(Serialize)]
struct Sidecar<'a> {
    toolkit_version: &'static str,
    name: &'a str,
    seed: Option<u64>,
    config_hash: String,
    created_unix: u64,
    config: &'a serde_json::Value,
    tables: Vec<TableMeta<'a>>,
    plots: Vec<&'a str>,
    warnings: &'a [String],
}

#[derive(Serialize)]
struct TableMeta<'a> {
    file: String,
    rows: usize,
    columns: &'a [String],
}

/// SHA-256 of the compact JSON form of `config`.
pub fn config_hash(config: &serde_json::Value) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(config.to_string().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Writes `<stem>.csv` per table, the SVGs and `<name>.json`; returns the
/// paths in that order.
pub fn write_artifacts(
    dir: &Path,
    name: &str,
    seed: Option<u64>,
    config: &serde_json::Value,
    artifacts: &Artifacts,
) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    let mut written = Vec::new();
    for (stem, table) in &artifacts.tables {
        let path = dir.join(format!("{stem}.csv"));
        write_file(&path, table.to_csv_string()?.as_bytes())?;
        written.push(path);
    }
    for (file, svg) in &artifacts.plots {
        let path = dir.join(file);
        write_file(&path, svg.as_bytes())?;
        written.push(path);
    }
    let created_unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let sidecar = Sidecar {
        toolkit_version: env!("CARGO_PKG_VERSION"),
        name,
        seed,
        config_hash: config_hash(config),
        created_unix,
        config,
        tables: artifacts
            .tables
            .iter()
            .map(|(stem, t)| TableMeta { file: format!("{stem}.csv"), rows: t.len(), columns: &t.columns })
            .collect(),
        plots: artifacts.plots.iter().map(|p| p.0.as_str()).collect(),
        warnings: &artifacts.warnings,
    };
    let path = dir.join(format!("{name}.json"));
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    write_file(&path, (json + "\n").as_bytes())?;
    written.push(path);
    Ok(written)
}
