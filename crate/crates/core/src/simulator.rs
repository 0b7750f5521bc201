//! Monte Carlo simulation of the activity-driven A-SIS process.
//!
//! One time step: every node activates independently (probability `a_i`, or
//! `chi_i a_i` when infected); each active node proposes edges to `m`
//! distinct uniformly chosen others; a proposal to an infected node is
//! accepted with that node's `pi`. The accepted proposals form a simple
//! undirected graph that lives for this step only. Then every infected node
//! recovers with probability `delta` and every susceptible node is infected by
//! each infected neighbour independently with probability `beta`, all on the
//! time-`t` state.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::ModelParams;
use crate::rng::{Seed, StreamDomain};

/// Default stop threshold on `|p(t)|_1`.
pub const DEFAULT_STOP_THRESHOLD: f64 = 0.1;
/// Replicates are split into this many groups for jackknife errors.
pub const JACKKNIFE_GROUPS: usize = 20;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("need at least one replicate")]
    NoRuns,
    #[error("initial state has {got} nodes, model has {expected}")]
    StateLength { expected: usize, got: usize },
    #[error("series has {len} points, the estimator needs at least {needed}")]
    TooShort { len: usize, needed: usize },
    #[error("series has fewer than two positive norms in the fitting window")]
    NoPositiveTail,
}

/// Infection indicators `x_i(t)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NodeStateVector(pub Vec<bool>);

impl NodeStateVector {
    pub fn all_infected(n: usize) -> Self {
        Self(vec![true; n])
    }

    pub fn all_susceptible(n: usize) -> Self {
        Self(vec![false; n])
    }

    /// Bit `i` of `mask` is node `i`.
    pub fn from_mask(n: usize, mask: usize) -> Self {
        Self((0..n).map(|i| mask >> i & 1 == 1).collect())
    }

    pub fn mask(&self) -> usize {
        self.0.iter().enumerate().filter(|(_, &x)| x).map(|(i, _)| 1 << i).sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn infected_count(&self) -> usize {
        self.0.iter().filter(|&&x| x).count()
    }

    pub fn is_healthy(&self) -> bool {
        !self.0.iter().any(|&x| x)
    }
}

/// Undirected edges `(i, j)` with `i < j`, sorted and without duplicates.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EdgeList(Vec<(usize, usize)>);

impl EdgeList {
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        let key = (i.min(j), i.max(j));
        self.0.binary_search(&key).is_ok()
    }

    fn normalize(&mut self) {
        for e in &mut self.0 {
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
        }
        self.0.sort_unstable();
        self.0.dedup();
    }
}

fn sample_snapshot_into<R: Rng + ?Sized>(
    params: &ModelParams,
    states: &[bool],
    rng: &mut R,
    out: &mut EdgeList,
) {
    out.0.clear();
    let n = params.n;
    for i in 0..n {
        let rate = if states[i] { params.chi[i] * params.a[i] } else { params.a[i] };
        if !rng.random_bool(rate) {
            continue;
        }
        for k in sample(rng, n - 1, params.m) {
            let j = if k < i { k } else { k + 1 };
            if !states[j] || rng.random_bool(params.pi[j]) {
                out.0.push((i, j));
            }
        }
    }
    out.normalize();
}

/// Draws the time-`t` snapshot graph.
pub fn sample_snapshot_graph<R: Rng + ?Sized>(
    params: &ModelParams,
    states: &NodeStateVector,
    rng: &mut R,
) -> EdgeList {
    let mut out = EdgeList::default();
    sample_snapshot_into(params, &states.0, rng, &mut out);
    out
}

fn sis_update_into<R: Rng + ?Sized>(
    states: &[bool],
    edges: &EdgeList,
    beta: f64,
    delta: f64,
    rng: &mut R,
    exposure: &mut Vec<u32>,
    next: &mut Vec<bool>,
) {
    exposure.clear();
    exposure.resize(states.len(), 0);
    for &(i, j) in edges.edges() {
        match (states[i], states[j]) {
            (true, false) => exposure[j] += 1,
            (false, true) => exposure[i] += 1,
            _ => {}
        }
    }
    next.clear();
    for (i, &infected) in states.iter().enumerate() {
        next.push(if infected {
            !rng.random_bool(delta)
        } else if exposure[i] > 0 {
            rng.random_bool(1.0 - (1.0 - beta).powi(exposure[i] as i32))
        } else {
            false
        });
    }
}

/// One SIS step on a fixed graph.
pub fn sis_update<R: Rng + ?Sized>(
    states: &NodeStateVector,
    edges: &EdgeList,
    beta: f64,
    delta: f64,
    rng: &mut R,
) -> NodeStateVector {
    let mut next = Vec::with_capacity(states.len());
    sis_update_into(&states.0, edges, beta, delta, rng, &mut Vec::new(), &mut next);
    NodeStateVector(next)
}

/// Reusable buffers for stepping one replicate.
struct Stepper<'a> {
    params: &'a ModelParams,
    edges: EdgeList,
    exposure: Vec<u32>,
    next: Vec<bool>,
}

impl<'a> Stepper<'a> {
    fn new(params: &'a ModelParams) -> Self {
        Self { params, edges: EdgeList::default(), exposure: Vec::new(), next: Vec::new() }
    }

    fn step<R: Rng + ?Sized>(&mut self, state: &mut Vec<bool>, rng: &mut R) {
        sample_snapshot_into(self.params, state, rng, &mut self.edges);
        let p = self.params;
        sis_update_into(state, &self.edges, p.beta, p.delta, rng, &mut self.exposure, &mut self.next);
        std::mem::swap(state, &mut self.next);
    }
}

/// `horizon + 1` states starting with `init`.
pub fn run_trajectory<R: Rng + ?Sized>(
    params: &ModelParams,
    init: &NodeStateVector,
    horizon: usize,
    rng: &mut R,
) -> Result<Vec<NodeStateVector>, SimError> {
    check_init(params, init)?;
    let mut stepper = Stepper::new(params);
    let mut state = init.0.clone();
    let mut out = Vec::with_capacity(horizon + 1);
    out.push(init.clone());
    for _ in 0..horizon {
        stepper.step(&mut state, rng);
        out.push(NodeStateVector(state.clone()));
    }
    Ok(out)
}

fn check_init(params: &ModelParams, init: &NodeStateVector) -> Result<(), SimError> {
    if init.len() != params.n {
        return Err(SimError::StateLength { expected: params.n, got: init.len() });
    }
    Ok(())
}

/// Monte Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub runs: usize,
    pub stop_threshold: f64,
    /// `None` means `10 ceil(1/delta) + 1000`.
    pub max_horizon: Option<usize>,
    pub seed: Seed,
}

impl MonteCarloConfig {
    pub fn new(runs: usize, seed: Seed) -> Self {
        Self { runs, stop_threshold: DEFAULT_STOP_THRESHOLD, max_horizon: None, seed }
    }

    pub fn horizon_for(&self, delta: f64) -> usize {
        self.max_horizon.unwrap_or_else(|| 10 * (1.0 / delta).ceil() as usize + 1000)
    }
}

/// Per-group sums of `|x(t)|_1` for jackknife standard errors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct JackknifeGroups {
    pub runs: Vec<usize>,
    /// `norm_sums[g][t]`: total number of infected nodes at `t` over group `g`.
    pub norm_sums: Vec<Vec<f64>>,
}

/// Estimated (or exact) infection probabilities `p[t][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilitySeries {
    pub p: Vec<Vec<f64>>,
    /// Replicates behind the estimate; 0 for an exact series.
    pub runs: usize,
    pub threshold: f64,
    /// False when the horizon cap was hit before `|p(t)|_1 < threshold`.
    pub reached_threshold: bool,
    pub groups: JackknifeGroups,
}

impl ProbabilitySeries {
    pub fn exact(p: Vec<Vec<f64>>) -> Self {
        Self { p, runs: 0, threshold: 0.0, reached_threshold: true, groups: JackknifeGroups::default() }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// `|p(t)|_1` for every `t`.
    pub fn norms(&self) -> Vec<f64> {
        self.p.iter().map(|v| v.iter().sum()).collect()
    }

    /// Binomial standard error of `p[t][i]`.
    pub fn standard_error(&self, t: usize, i: usize) -> f64 {
        let p = self.p[t][i];
        (p * (1.0 - p) / self.runs as f64).sqrt()
    }
}

#[derive(Clone)]
struct Tally {
    counts: Vec<Vec<u64>>,
    group_sums: Vec<Vec<u64>>,
    group_runs: Vec<usize>,
}

impl Tally {
    fn new(groups: usize) -> Self {
        Self { counts: Vec::new(), group_sums: vec![Vec::new(); groups], group_runs: vec![0; groups] }
    }

    fn record(&mut self, t: usize, group: usize, state: &[bool]) {
        if self.counts.len() <= t {
            self.counts.resize(t + 1, vec![0; state.len()]);
        }
        let mut total = 0;
        for (c, &x) in self.counts[t].iter_mut().zip(state) {
            *c += x as u64;
            total += x as u64;
        }
        let g = &mut self.group_sums[group];
        if g.len() <= t {
            g.resize(t + 1, 0);
        }
        g[t] += total;
    }

    fn merge(mut self, other: Tally) -> Tally {
        if self.counts.len() < other.counts.len() {
            return other.merge(self);
        }
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.group_sums.iter_mut().zip(other.group_sums) {
            if a.len() < b.len() {
                a.resize(b.len(), 0);
            }
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.group_runs.iter_mut().zip(other.group_runs) {
            *a += b;
        }
        self
    }
}

/// Averages `x(t)` over independent replicates. Replicate `r` uses stream `r`
/// of `config.seed` and runs until absorbed or the horizon cap; the series is
/// cut at the first `t` with `|p(t)|_1 < threshold`. Counts are integers, so
/// the result does not depend on how replicates are scheduled.
pub fn estimate_infection_probabilities(
    params: &ModelParams,
    init: &NodeStateVector,
    config: &MonteCarloConfig,
) -> Result<ProbabilitySeries, SimError> {
    check_init(params, init)?;
    if config.runs == 0 {
        return Err(SimError::NoRuns);
    }
    let n = params.n;
    let horizon = config.horizon_for(params.delta);
    let groups = JACKKNIFE_GROUPS.min(config.runs);
    let tally = (0..config.runs)
        .into_par_iter()
        .fold(
            || (Tally::new(groups), Stepper::new(params), Vec::new()),
            |(mut tally, mut stepper, mut state), r| {
                let mut rng = config.seed.stream(StreamDomain::Replicate, r as u64);
                let g = r % groups;
                tally.group_runs[g] += 1;
                state.clear();
                state.extend_from_slice(&init.0);
                tally.record(0, g, &state);
                for t in 1..=horizon {
                    if !state.iter().any(|&x| x) {
                        break;
                    }
                    stepper.step(&mut state, &mut rng);
                    tally.record(t, g, &state);
                }
                (tally, stepper, state)
            },
        )
        .map(|(tally, _, _)| tally)
        .reduce(|| Tally::new(groups), Tally::merge);

    let runs = config.runs as f64;
    let mut p: Vec<Vec<f64>> = Vec::new();
    let mut reached = false;
    for t in 0..=horizon {
        let row: Vec<f64> = match tally.counts.get(t) {
            Some(c) => c.iter().map(|&k| k as f64 / runs).collect(),
            None => vec![0.0; n],
        };
        let norm: f64 = row.iter().sum();
        p.push(row);
        if norm < config.stop_threshold {
            reached = true;
            break;
        }
    }
    let len = p.len();
    let norm_sums = tally
        .group_sums
        .into_iter()
        .map(|mut g| {
            g.resize(len, 0);
            g.into_iter().map(|k| k as f64).collect()
        })
        .collect();
    Ok(ProbabilitySeries {
        p,
        runs: config.runs,
        threshold: config.stop_threshold,
        reached_threshold: reached,
        groups: JackknifeGroups { runs: tally.group_runs, norm_sums },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DecayMethod {
    /// `exp` of the least-squares slope of `log |p(t)|_1` over the last half
    /// of the series (at least 5 points).
    #[default]
    TailSlope,
    /// `max_{t >= 1} exp(log(|p(t)|_1 / |p(0)|_1) / t)`.
    PaperLiteral,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayEstimate {
    pub alpha_hat: f64,
    pub method: DecayMethod,
    pub stop_time: usize,
    pub threshold: f64,
    /// Jackknife standard error over replicate groups, when available.
    pub standard_error: Option<f64>,
}

const MIN_TAIL: usize = 5;

fn tail_slope(norms: &[f64]) -> Result<f64, SimError> {
    let len = norms.len();
    let w = len.div_ceil(2).max(MIN_TAIL);
    let pts: Vec<(f64, f64)> = (len - w..len)
        .filter(|&t| norms[t] > 0.0)
        .map(|t| (t as f64, norms[t].ln()))
        .collect();
    if pts.len() < 2 {
        return Err(SimError::NoPositiveTail);
    }
    let k = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm) * (p.0 - tm)).sum();
    Ok((sxy / sxx).exp())
}

fn paper_literal(norms: &[f64]) -> Result<f64, SimError> {
    let n0 = norms[0];
    if !(n0 > 0.0) {
        return Err(SimError::NoPositiveTail);
    }
    norms
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &v)| v > 0.0)
        .map(|(t, &v)| ((v / n0).ln() / t as f64).exp())
        .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))))
        .ok_or(SimError::NoPositiveTail)
}

fn estimate(norms: &[f64], method: DecayMethod) -> Result<f64, SimError> {
    match method {
        DecayMethod::TailSlope => tail_slope(norms),
        DecayMethod::PaperLiteral => paper_literal(norms),
    }
}

pub fn estimate_decay_rate(
    series: &ProbabilitySeries,
    method: DecayMethod,
) -> Result<DecayEstimate, SimError> {
    let norms = series.norms();
    let needed = match method {
        DecayMethod::TailSlope => MIN_TAIL,
        DecayMethod::PaperLiteral => 2,
    };
    if norms.len() < needed {
        return Err(SimError::TooShort { len: norms.len(), needed });
    }
    let alpha_hat = estimate(&norms, method)?;
    Ok(DecayEstimate {
        alpha_hat,
        method,
        stop_time: norms.len() - 1,
        threshold: series.threshold,
        standard_error: jackknife(series, method),
    })
}

/// Delete-one-group jackknife of the estimator.
fn jackknife(series: &ProbabilitySeries, method: DecayMethod) -> Option<f64> {
    let g = &series.groups;
    let k = g.runs.len();
    if k < 2 {
        return None;
    }
    let len = series.len();
    let totals: Vec<f64> = (0..len).map(|t| g.norm_sums.iter().map(|s| s[t]).sum()).collect();
    let mut leave_out = Vec::with_capacity(k);
    for (runs, sums) in g.runs.iter().zip(&g.norm_sums) {
        let rest = (series.runs - runs) as f64;
        let norms: Vec<f64> = (0..len).map(|t| (totals[t] - sums[t]) / rest).collect();
        leave_out.push(estimate(&norms, method).ok()?);
    }
    let mean = leave_out.iter().sum::<f64>() / k as f64;
    let var = leave_out.iter().map(|x| (x - mean).powi(2)).sum::<f64>() * (k - 1) as f64 / k as f64;
    Some(var.sqrt())
}
