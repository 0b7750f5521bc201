//! The full Markov chain on `{0,1}^n` for small `n`.
//!
//! State `x` is a bitmask, bit `i` set iff node `i` is infected. Only edges
//! between a susceptible and an infected node influence the next state, so
//! each row is built from the distribution of the susceptible-infected
//! adjacency pattern. That pattern is the union of independent per-node
//! contributions (each node's activation, neighbour choice and acceptance
//! coins), which are combined by an OR-convolution over at most
//! `floor(n/2) ceil(n/2)` pair bits. Given the pattern, infections and
//! recoveries are independent per node.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::linalg::spectral_radius_by_squaring;
use crate::model::ModelParams;
use crate::simulator::ProbabilitySeries;

/// Largest supported node count.
pub const MAX_NODES: usize = 6;
const ROW_SUM_TOL: f64 = 1e-12;
const DECAY_TOL: f64 = 1e-14;
const MAX_SQUARINGS: u32 = 60;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExactError {
    #[error("exact chain supports n <= {cap}, got n = {n}")]
    TooLarge { n: usize, cap: usize },
    #[error("row {row} sums to {sum}")]
    RowSum { row: usize, sum: f64 },
    #[error("initial distribution has length {got}, expected {expected}")]
    InitLength { expected: usize, got: usize },
    #[error("transient block has a negative entry {0}")]
    NegativeEntry(f64),
    #[error("spectral radius did not converge; last estimate {estimate}")]
    NotConverged { estimate: f64 },
}

/// Row-stochastic `2^n x 2^n` matrix, `q[(x, y)] = P(x(t+1) = y | x(t) = x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub q: DMatrix<f64>,
    pub n: usize,
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// All `k`-subsets of `0..n` as index vectors, in lexicographic order.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(binomial(n, k));
    let mut cur: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let Some(pos) = (0..k).rev().find(|&p| cur[p] < n - k + p) else {
            return out;
        };
        cur[pos] += 1;
        for q in pos + 1..k {
            cur[q] = cur[q - 1] + 1;
        }
    }
}

/// Sparse distribution over pair-bit masks.
type MaskDist = Vec<(u32, f64)>;

fn row(params: &ModelParams, x: usize, choices: &[Vec<usize>]) -> Vec<(usize, f64)> {
    if x == 0 {
        return vec![(0, 1.0)];
    }
    let n = params.n;
    let infected = |i: usize| x >> i & 1 == 1;
    let sus: Vec<usize> = (0..n).filter(|&i| !infected(i)).collect();
    let inf: Vec<usize> = (0..n).filter(|&i| infected(i)).collect();
    // bit index of the pair {s, i}
    let mut pair_bit = vec![vec![None; n]; n];
    for (k, &s) in sus.iter().enumerate() {
        for (l, &i) in inf.iter().enumerate() {
            let b = (k * inf.len() + l) as u32;
            pair_bit[s][i] = Some(b);
            pair_bit[i][s] = Some(b);
        }
    }
    let pairs = sus.len() * inf.len();

    let mut edges = vec![0.0; 1 << pairs];
    edges[0] = 1.0;
    let mut scratch = vec![0.0; 1 << pairs];
    for u in 0..n {
        let act = if infected(u) { params.chi[u] * params.a[u] } else { params.a[u] };
        let contrib = node_contribution(params, u, act, choices, &pair_bit, &infected);
        scratch.iter_mut().for_each(|v| *v = 0.0);
        for (mask, &p) in edges.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for &(c, q) in &contrib {
                scratch[mask | c as usize] += p * q;
            }
        }
        std::mem::swap(&mut edges, &mut scratch);
    }

    // distribution of the set of newly infected susceptibles
    let beta = params.beta;
    let mut newly = vec![0.0; 1 << sus.len()];
    for (mask, &p) in edges.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let q: Vec<f64> = (0..sus.len())
            .map(|k| {
                let hits = (mask >> (k * inf.len()) & ((1 << inf.len()) - 1)).count_ones();
                1.0 - (1.0 - beta).powi(hits as i32)
            })
            .collect();
        for (sub, slot) in newly.iter_mut().enumerate() {
            let mut w = p;
            for (k, qk) in q.iter().enumerate() {
                w *= if sub >> k & 1 == 1 { *qk } else { 1.0 - qk };
            }
            *slot += w;
        }
    }

    let delta = params.delta;
    let mut out = Vec::with_capacity(newly.len() << inf.len());
    for (sub, &pn) in newly.iter().enumerate() {
        if pn == 0.0 {
            continue;
        }
        let base: usize = sus.iter().enumerate().filter(|(k, _)| sub >> k & 1 == 1).map(|(_, &s)| 1 << s).sum();
        for stay in 0..1usize << inf.len() {
            let mut w = pn;
            let mut y = base;
            for (l, &i) in inf.iter().enumerate() {
                if stay >> l & 1 == 1 {
                    w *= 1.0 - delta;
                    y |= 1 << i;
                } else {
                    w *= delta;
                }
            }
            if w != 0.0 {
                out.push((y, w));
            }
        }
    }
    out
}

/// Distribution of the pair bits set by node `u`'s own proposals.
fn node_contribution(
    params: &ModelParams,
    u: usize,
    act: f64,
    choices: &[Vec<usize>],
    pair_bit: &[Vec<Option<u32>>],
    infected: &dyn Fn(usize) -> bool,
) -> MaskDist {
    let mut dist: Vec<(u32, f64)> = vec![(0, 1.0 - act)];
    let share = act / choices.len() as f64;
    for choice in choices {
        let mut partial: MaskDist = vec![(0, share)];
        for &k in choice {
            let v = if k < u { k } else { k + 1 };
            let Some(b) = pair_bit[u][v] else { continue };
            let accept = if infected(v) { params.pi[v] } else { 1.0 };
            let mut next = Vec::with_capacity(partial.len() * 2);
            for &(m, p) in &partial {
                next.push((m | 1 << b, p * accept));
                if accept < 1.0 {
                    next.push((m, p * (1.0 - accept)));
                }
            }
            partial = next;
        }
        dist.extend(partial);
    }
    dist.sort_unstable_by_key(|e| e.0);
    let mut merged: MaskDist = Vec::with_capacity(dist.len());
    for (m, p) in dist {
        match merged.last_mut() {
            Some(last) if last.0 == m => last.1 += p,
            _ => merged.push((m, p)),
        }
    }
    merged
}

/// Builds `Q` exactly; rows are computed in parallel.
pub fn build_transition_matrix(params: &ModelParams) -> Result<TransitionMatrix, ExactError> {
    let n = params.n;
    if n > MAX_NODES {
        return Err(ExactError::TooLarge { n, cap: MAX_NODES });
    }
    let size = 1usize << n;
    let choices = subsets(n - 1, params.m);
    let rows: Vec<Vec<(usize, f64)>> = (0..size).into_par_iter().map(|x| row(params, x, &choices)).collect();
    let mut q = DMatrix::zeros(size, size);
    for (x, entries) in rows.into_iter().enumerate() {
        for (y, w) in entries {
            q[(x, y)] += w;
        }
        let sum: f64 = q.row(x).sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(ExactError::RowSum { row: x, sum });
        }
    }
    Ok(TransitionMatrix { q, n })
}

impl TransitionMatrix {
    pub fn states(&self) -> usize {
        self.q.nrows()
    }

    /// Point mass on state `mask`.
    pub fn point_mass(&self, mask: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.states()];
        v[mask] = 1.0;
        v
    }

    /// `Q` without the row and column of the all-susceptible state.
    pub fn transient_block(&self) -> DMatrix<f64> {
        let s = self.states();
        self.q.view((1, 1), (s - 1, s - 1)).into_owned()
    }
}

/// Exact `p_i(t)` for `t = 0..=horizon` from an initial distribution over states.
pub fn exact_infection_probabilities(
    q: &TransitionMatrix,
    init: &[f64],
    horizon: usize,
) -> Result<ProbabilitySeries, ExactError> {
    let s = q.states();
    if init.len() != s {
        return Err(ExactError::InitLength { expected: s, got: init.len() });
    }
    let marginals = |d: &[f64]| -> Vec<f64> {
        (0..q.n)
            .map(|i| d.iter().enumerate().filter(|(x, _)| x >> i & 1 == 1).map(|(_, p)| p).sum())
            .collect()
    };
    let mut dist = init.to_vec();
    let mut p = vec![marginals(&dist)];
    for _ in 0..horizon {
        let mut next = vec![0.0; s];
        for (x, &w) in dist.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (y, slot) in next.iter_mut().enumerate() {
                *slot += w * q.q[(x, y)];
            }
        }
        dist = next;
        p.push(marginals(&dist));
    }
    Ok(ProbabilitySeries::exact(p))
}

/// Largest modulus among eigenvalues of `Q` below one: the spectral radius
/// of the transient block, which is nonnegative so its Perron root dominates.
pub fn decay_rate_exact(q: &TransitionMatrix) -> Result<f64, ExactError> {
    let block = q.transient_block();
    if let Some(&neg) = block.iter().find(|&&v| v < 0.0) {
        return Err(ExactError::NegativeEntry(neg));
    }
    let (rho, _, converged) = spectral_radius_by_squaring(&block, DECAY_TOL, MAX_SQUARINGS);
    if !converged {
        return Err(ExactError::NotConverged { estimate: rho });
    }
    Ok(rho)
}

/// Same quantity from a dense eigendecomposition.
pub fn decay_rate_dense(q: &TransitionMatrix) -> f64 {
    q.transient_block()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_are_enumerated() {
        assert_eq!(subsets(4, 2).len(), 6);
        assert_eq!(subsets(3, 3), vec![vec![0, 1, 2]]);
        assert_eq!(subsets(5, 1).len(), 5);
    }

    #[test]
    fn recovery_only_transition() {
        let p = ModelParams::homogeneous(2, 1, 0.6, 0.5, 0.7, 0.0, 0.35).unwrap();
        let q = build_transition_matrix(&p).unwrap();
        assert!((q.q[(0b01, 0b00)] - 0.35).abs() < 1e-12);
    }

    #[test]
    fn forced_edge_transition() {
        let p = ModelParams::homogeneous(2, 1, 1.0, 1.0, 1.0, 0.6, 0.3).unwrap();
        let q = build_transition_matrix(&p).unwrap();
        assert!((q.q[(0b01, 0b11)] - 0.7 * 0.6).abs() < 1e-15);
    }

    #[test]
    fn two_node_periodic_block() {
        let p = ModelParams::homogeneous(2, 1, 1.0, 1.0, 1.0, 0.45, 1.0).unwrap();
        let q = build_transition_matrix(&p).unwrap();
        let rho = decay_rate_exact(&q).unwrap();
        assert!((rho - 0.45).abs() < 1e-12, "{rho}");
        assert!((decay_rate_dense(&q) - 0.45).abs() < 1e-12);
    }

    #[test]
    fn too_many_nodes() {
        let p = ModelParams::homogeneous(7, 1, 0.5, 0.5, 0.5, 0.5, 0.5).unwrap();
        assert_eq!(build_transition_matrix(&p), Err(ExactError::TooLarge { n: 7, cap: 6 }));
    }
}
