//! Figure-reproduction recipes.
//!
//! | figure | content |
//! |--------|---------|
//! | fig3 | decay rate and bound vs `delta`, Case 1, `beta = 0.8`, one plot per `m` |
//! | fig4 | discrepancy heatmap over `(beta, delta)`, Case 1, one plot per `m` |
//! | fig5 | the fig3 and fig4 layouts for Case 2 |
//! | fig6 | optimal investments vs activity rank, Case 1, per `(m, pi_lower)` |
//! | fig7 | the fig6 layout for Case 2 |
//! | fig8 | cost function `f(chi)` for several exponents `p` |
//!
//! Desk scale is `n = 50` with 2000 replicates per point; `--full` uses
//! `n = 250` with 10 000. `m` values above `n - 1` are capped at `n - 1`.

use adsis_core::allocation::cost_f;
use adsis_core::ActivityDistribution;

use crate::config::{
    AllocationSettings, ExperimentConfig, ExperimentKind, ModelSpec, MonteCarloSettings, OutputSettings, RateSpec,
    Sweep,
};
use crate::error::CliError;
use crate::plot::{emit_plot, PlotKind, PlotSpec};
use crate::run::{run, Artifacts, NODES_TABLE};
use crate::table::ResultTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Figure {
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scale {
    pub n: usize,
    pub runs: usize,
}

impl Scale {
    pub const DESK: Self = Self { n: 50, runs: 2000 };
    pub const FULL: Self = Self { n: 250, runs: 10_000 };

    pub fn new(full: bool) -> Self {
        if full {
            Self::FULL
        } else {
            Self::DESK
        }
    }

    pub fn m_values(&self) -> Vec<usize> {
        let mut m: Vec<usize> = [2, 10, 50].iter().map(|&m| m.min(self.n - 1)).collect();
        m.dedup();
        m
    }
}

/// `0.1, 0.2, ..., 1.0`.
pub fn delta_grid() -> Vec<f64> {
    (1..=10).map(|k| k as f64 / 10.0).collect()
}

/// `0.2, 0.4, ..., 1.0`.
pub fn beta_grid() -> Vec<f64> {
    (1..=5).map(|k| k as f64 / 5.0).collect()
}

pub const ALLOCATION_BETA: f64 = 0.8;
pub const ALLOCATION_DELTA: f64 = 0.5;

fn sampled(scale: Scale, activities: ActivityDistribution) -> ModelSpec {
    ModelSpec::Sampled { n: scale.n, activities, chi: RateSpec::default(), pi: RateSpec::default() }
}

fn simulate(name: &str, scale: Scale, seed: u64, dist: ActivityDistribution, beta: Vec<f64>, plot: PlotSpec) -> ExperimentConfig {
    ExperimentConfig {
        kind: ExperimentKind::Simulate,
        seed: Some(seed),
        model: sampled(scale, dist),
        sweep: Sweep { m: scale.m_values(), beta, delta: delta_grid() },
        monte_carlo: MonteCarloSettings { runs: scale.runs, ..MonteCarloSettings::default() },
        allocation: None,
        output: OutputSettings { name: Some(name.into()), dir: None, plots: vec![plot] },
    }
}

fn comparison_plot(name: &str, case: &str) -> PlotSpec {
    PlotSpec {
        name: name.into(),
        kind: PlotKind::Line,
        table: None,
        x: "delta".into(),
        y: vec!["alpha_hat".into(), "alpha_u".into()],
        z: None,
        series: None,
        facet: vec!["m".into()],
        title: Some(format!("Decay rate and upper bound, {case}, beta = 0.8")),
    }
}

fn discrepancy_plot(name: &str, case: &str) -> PlotSpec {
    PlotSpec {
        name: name.into(),
        kind: PlotKind::Heatmap,
        table: None,
        x: "delta".into(),
        y: vec!["beta".into()],
        z: Some("discrepancy".into()),
        series: None,
        facet: vec!["m".into()],
        title: Some(format!("alpha_u - alpha_hat, {case}")),
    }
}

fn allocate(name: &str, scale: Scale, seed: u64, dist: ActivityDistribution, case: &str) -> ExperimentConfig {
    ExperimentConfig {
        kind: ExperimentKind::Allocate,
        seed: Some(seed),
        model: sampled(scale, dist),
        sweep: Sweep { m: scale.m_values(), beta: vec![ALLOCATION_BETA], delta: vec![ALLOCATION_DELTA] },
        monte_carlo: MonteCarloSettings::default(),
        allocation: Some(AllocationSettings {
            p: 0.01,
            q: 0.01,
            chi_lower: vec![0.8],
            pi_lower: vec![0.2, 0.7, 0.9],
            budget_fraction: vec![0.25],
            alpha_bar: Vec::new(),
        }),
        output: OutputSettings {
            name: Some(name.into()),
            dir: None,
            plots: vec![PlotSpec {
                name: name.into(),
                kind: PlotKind::Scatter,
                table: Some(NODES_TABLE.into()),
                x: "activity_rank".into(),
                y: vec!["investment_f".into(), "investment_g".into()],
                z: None,
                series: None,
                facet: vec!["m".into(), "pi_lower".into()],
                title: Some(format!("Optimal investments, {case}, budget C_max/4")),
            }],
        },
    }
}

/// The experiment configs behind `figure`; fig8 needs none.
pub fn recipe(figure: Figure, full: bool, seed: u64) -> Vec<ExperimentConfig> {
    let scale = Scale::new(full);
    let (c1, c2) = (ActivityDistribution::CASE_1, ActivityDistribution::CASE_2);
    match figure {
        Figure::Fig3 => vec![simulate("fig3", scale, seed, c1, vec![0.8], comparison_plot("fig3", "Case 1"))],
        Figure::Fig4 => vec![simulate("fig4", scale, seed, c1, beta_grid(), discrepancy_plot("fig4", "Case 1"))],
        Figure::Fig5 => vec![
            simulate("fig5_comparison", scale, seed, c2, vec![0.8], comparison_plot("fig5_comparison", "Case 2")),
            simulate("fig5_discrepancy", scale, seed, c2, beta_grid(), discrepancy_plot("fig5_discrepancy", "Case 2")),
        ],
        Figure::Fig6 => vec![allocate("fig6", scale, seed, c1, "Case 1")],
        Figure::Fig7 => vec![allocate("fig7", scale, seed, c2, "Case 2")],
        Figure::Fig8 => Vec::new(),
    }
}

/// Cost curves `f(chi)` on `[chi_lower, 1]`, long format.
pub fn cost_curves(exponents: &[f64], chi_lower: f64, points: usize) -> Result<ResultTable, CliError> {
    let mut t = ResultTable::new(["p", "chi_lower", "chi", "cost"]);
    for &p in exponents {
        for k in 0..points {
            let chi = chi_lower + (1.0 - chi_lower) * k as f64 / (points - 1) as f64;
            let cost = cost_f(chi, p, chi_lower).map_err(|e| CliError::at(format!("p={p}, chi={chi}"), e))?;
            t.push(vec![p.into(), chi_lower.into(), chi.into(), cost.into()])?;
        }
    }
    Ok(t)
}

pub struct FigureOutput {
    pub name: String,
    pub seed: Option<u64>,
    /// Echoed into the sidecar.
    pub config: serde_json::Value,
    pub artifacts: Artifacts,
}

/// Runs every experiment of `figure` on the current rayon pool.
pub fn reproduce(figure: Figure, full: bool, seed: u64) -> Result<Vec<FigureOutput>, CliError> {
    if figure == Figure::Fig8 {
        let exponents = [0.01, 1.0, 10.0, 100.0];
        let table = cost_curves(&exponents, 0.5, 101)?;
        let spec = PlotSpec {
            name: "fig8".into(),
            kind: PlotKind::Line,
            table: None,
            x: "chi".into(),
            y: vec!["cost".into()],
            z: None,
            series: Some("p".into()),
            facet: Vec::new(),
            title: Some("Cost function f(chi), chi_lower = 0.5".into()),
        };
        let plots = emit_plot(&table, &spec)?;
        let config = serde_json::json!({ "figure": "fig8", "p": exponents, "chi_lower": 0.5, "points": 101, "plots": [spec] });
        return Ok(vec![FigureOutput {
            name: "fig8".into(),
            seed: None,
            config,
            artifacts: Artifacts { tables: vec![("fig8".into(), table)], plots, warnings: Vec::new() },
        }]);
    }
    recipe(figure, full, seed)
        .into_iter()
        .map(|config| {
            let artifacts = run(&config)?;
            Ok(FigureOutput {
                name: config.name(),
                seed: config.seed,
                config: serde_json::to_value(&config).expect("config serializes"),
                artifacts,
            })
        })
        .collect()
}
