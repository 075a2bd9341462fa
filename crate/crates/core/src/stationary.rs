//! Truncated transition matrices of the one- and two-point motions and
//! their stationary distributions.
//!
//! Truncation at `N_max` reflects: the upward move out of `{0..N_max}` is
//! removed and the row renormalized, which for unit-step chains sends that
//! mass down. Periodic chains are handled through their cyclic
//! decomposition: the `d`-step chain is power-iterated on one cyclic class
//! and the result is pushed through `P` to populate the other classes.

use std::collections::{HashMap, VecDeque};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::ReactionNetwork;
use crate::twopoint::coupled_moves;

/// Mass allowed at the truncation boundary before a chain is flagged.
pub const TAIL_MASS_LIMIT: f64 = 1e-12;
pub const DEFAULT_STATIONARY_TOL: f64 = 1e-13;
pub const DEFAULT_MAX_ITERATIONS: usize = 5_000_000;

/// A state of a truncated chain: `[x]` for the one-point motion, `[x, y]` for pairs.
pub type ChainState = Vec<u64>;

/// Row-major sparse matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                match cols.last() {
                    Some(&last) if cols.len() > row_ptr[row_ptr.len() - 1] && last == c => {
                        *vals.last_mut().unwrap() += v;
                    }
                    _ => {
                        cols.push(c);
                        vals.push(v);
                    }
                }
            }
            row_ptr.push(cols.len());
        }
        SparseMatrix { n, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    /// `out = v^T P`.
    pub fn left_mul(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out[self.cols[k]] += vi * self.vals[k];
            }
        }
    }
}

/// A finite, row-stochastic realization of an embedded chain.
#[derive(Clone, Debug)]
pub struct TruncatedChain {
    states: Vec<ChainState>,
    index: HashMap<ChainState, usize>,
    matrix: SparseMatrix,
    truncation_bound: u64,
    /// Estimated stationary mass at the boundary, when computable.
    pub tail_mass_estimate: Option<f64>,
    /// Set when the estimate exceeds [`TAIL_MASS_LIMIT`].
    pub truncation_warning: bool,
}

impl TruncatedChain {
    fn new(states: Vec<ChainState>, rows: Vec<Vec<(usize, f64)>>, truncation_bound: u64) -> Self {
        let index = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        TruncatedChain {
            states,
            index,
            matrix: SparseMatrix::from_rows(rows),
            truncation_bound,
            tail_mass_estimate: None,
            truncation_warning: false,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[ChainState] {
        &self.states
    }

    pub fn index_of(&self, s: &[u64]) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn truncation_bound(&self) -> u64 {
        self.truncation_bound
    }

    /// `P(from, to)`; zero when either state is not enumerated.
    pub fn prob(&self, from: &[u64], to: &[u64]) -> f64 {
        match (self.index_of(from), self.index_of(to)) {
            (Some(i), Some(j)) => self.matrix.get(i, j),
            _ => 0.0,
        }
    }

    /// Largest deviation of a row sum from one.
    pub fn max_row_defect(&self) -> f64 {
        (0..self.len())
            .map(|i| (self.matrix.row(i).map(|(_, v)| v).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    fn adjacency(&self) -> DiGraph<(), ()> {
        let mut g = DiGraph::with_capacity(self.len(), self.matrix.nnz());
        let nodes: Vec<_> = (0..self.len()).map(|_| g.add_node(())).collect();
        for i in 0..self.len() {
            for (j, v) in self.matrix.row(i) {
                if v > 0.0 {
                    g.add_edge(nodes[i], nodes[j], ());
                }
            }
        }
        g
    }

    /// Communication classes (strongly connected components), each sorted.
    pub fn communication_classes(&self) -> Vec<Vec<usize>> {
        let mut classes: Vec<Vec<usize>> = tarjan_scc(&self.adjacency())
            .into_iter()
            .map(|c| {
                let mut v: Vec<usize> = c.into_iter().map(|n| n.index()).collect();
                v.sort_unstable();
                v
            })
            .collect();
        classes.sort();
        classes
    }

    /// `v^T P`.
    pub fn push_forward(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.matrix.left_mul(v, &mut out);
        out
    }
}

/// A probability vector over the states of a truncated chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionVector {
    pub states: Vec<ChainState>,
    pub weights: Vec<f64>,
}

impl DistributionVector {
    pub fn new(states: Vec<ChainState>, weights: Vec<f64>) -> Result<Self> {
        if states.len() != weights.len() {
            return Err(Error::invalid("states and weights differ in length"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("weights must be finite and non-negative"));
        }
        Ok(DistributionVector { states, weights })
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn weight_of(&self, s: &[u64]) -> f64 {
        self.states
            .iter()
            .position(|t| t.as_slice() == s)
            .map_or(0.0, |i| self.weights[i])
    }

    fn as_map(&self) -> HashMap<&[u64], f64> {
        let mut m: HashMap<&[u64], f64> = HashMap::new();
        for (s, w) in self.states.iter().zip(&self.weights) {
            *m.entry(s.as_slice()).or_insert(0.0) += w;
        }
        m
    }

    /// `sum_s |p(s) - q(s)|` over the union of both supports.
    pub fn l1_distance(&self, other: &DistributionVector) -> f64 {
        let a = self.as_map();
        let b = other.as_map();
        let mut d: f64 = a.iter().map(|(s, w)| (w - b.get(s).copied().unwrap_or(0.0)).abs()).sum();
        d += b.iter().filter(|(s, _)| !a.contains_key(*s)).map(|(_, w)| w.abs()).sum::<f64>();
        d
    }

    pub fn total_variation(&self, other: &DistributionVector) -> f64 {
        0.5 * self.l1_distance(other)
    }

    /// Image of the distribution under `f`, merging states with the same image.
    /// Used to compare pair distributions with one-point ones.
    pub fn map_states(&self, f: impl Fn(&[u64]) -> ChainState) -> DistributionVector {
        let mut merged: Vec<(ChainState, f64)> = Vec::new();
        let mut pos: HashMap<ChainState, usize> = HashMap::new();
        for (s, &w) in self.states.iter().zip(&self.weights) {
            let t = f(s);
            match pos.get(&t) {
                Some(&i) => merged[i].1 += w,
                None => {
                    pos.insert(t.clone(), merged.len());
                    merged.push((t, w));
                }
            }
        }
        let (states, weights) = merged.into_iter().unzip();
        DistributionVector { states, weights }
    }
}

/// One-point embedded chain of a single-species network on `{0..n_max}`.
pub fn build_one_point_chain(net: &ReactionNetwork, n_max: u64) -> Result<TruncatedChain> {
    net.require_single_species("build_one_point_chain")?;
    if n_max < 2 {
        return Err(Error::invalid(format!("truncation bound must be at least 2, got {n_max}")));
    }
    let states: Vec<ChainState> = (0..=n_max).map(|x| vec![x]).collect();
    let mut rows = Vec::with_capacity(states.len());
    for x in 0..=n_max {
        let law = net.jump_law(x)?;
        if law.is_empty() {
            rows.push(vec![(x as usize, 1.0)]);
            continue;
        }
        let kept: Vec<(usize, f64)> = law
            .iter()
            .filter_map(|&(dx, p)| {
                let y = x as i64 + dx;
                (0..=n_max as i64).contains(&y).then_some((y as usize, p))
            })
            .collect();
        let mass: f64 = kept.iter().map(|(_, p)| p).sum();
        if mass <= 0.0 {
            return Err(Error::Numerical(format!("every move from state {x} leaves the truncation")));
        }
        rows.push(kept.into_iter().map(|(y, p)| (y, p / mass)).collect());
    }
    let mut chain = TruncatedChain::new(states, rows, n_max);
    if let Ok(zeta) = zeta_partial_sums(net, n_max) {
        // rho(N)/sum rho with rho(0) = 1 and rho(x) = term_x
        let log_norm = log_sum_exp(std::iter::once(0.0).chain(zeta.log_terms.iter().copied()));
        let tail = (zeta.log_terms.last().copied().unwrap_or(0.0) - log_norm).exp();
        chain.tail_mass_estimate = Some(tail);
        chain.truncation_warning = tail > TAIL_MASS_LIMIT;
    }
    Ok(chain)
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Cyclic decomposition of an irreducible chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CyclicClasses {
    pub period: usize,
    /// `classes[k]` is visited at steps congruent to `k` modulo the period,
    /// starting from the class containing state index 0.
    pub classes: Vec<Vec<usize>>,
}

fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Period and cyclic classes, by BFS levels: the period is the gcd of
/// `level(u) + 1 - level(v)` over all edges `u -> v`.
pub fn cyclic_classes(chain: &TruncatedChain) -> Result<CyclicClasses> {
    if chain.is_empty() {
        return Err(Error::EmptyClass("chain has no states".into()));
    }
    let comm = chain.communication_classes();
    if comm.len() > 1 {
        return Err(Error::Reducible { classes: comm });
    }
    let n = chain.len();
    let mut level = vec![usize::MAX; n];
    level[0] = 0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for (v, p) in chain.matrix.row(u) {
            if p > 0.0 && level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut period = 0;
    for u in 0..n {
        for (v, p) in chain.matrix.row(u) {
            if p > 0.0 {
                period = gcd(period, (level[u] + 1).abs_diff(level[v]));
            }
        }
    }
    let period = period.max(1);
    let mut classes = vec![Vec::new(); period];
    for (i, &l) in level.iter().enumerate() {
        classes[l % period].push(i);
    }
    Ok(CyclicClasses { period, classes })
}

/// Stationary distribution of an irreducible truncated chain with
/// `||rho^T P - rho^T||_1 <= tol`.
pub fn stationary_distribution(chain: &TruncatedChain, tol: f64) -> Result<DistributionVector> {
    stationary_distribution_capped(chain, tol, DEFAULT_MAX_ITERATIONS)
}

pub fn stationary_distribution_capped(chain: &TruncatedChain, tol: f64, max_iterations: usize) -> Result<DistributionVector> {
    let cyc = cyclic_classes(chain)?;
    let d = cyc.period;
    let n = chain.len();
    let base = &cyc.classes[0];

    let mut v = vec![0.0; n];
    for &i in base {
        v[i] = 1.0 / base.len() as f64;
    }
    let mut tmp = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    let check_every = 16;
    while iterations < max_iterations {
        // one application of P^d
        next.copy_from_slice(&v);
        for _ in 0..d {
            chain.matrix.left_mul(&next, &mut tmp);
            std::mem::swap(&mut next, &mut tmp);
        }
        iterations += 1;
        let step: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut v, &mut next);
        if iterations % check_every == 0 || step < tol * 1e-3 {
            let rho = recombine(chain, &v, d);
            residual = stationarity_residual(chain, &rho);
            if residual <= tol {
                return DistributionVector::new(chain.states.clone(), rho);
            }
        }
    }
    Err(Error::NoConvergence { iterations, residual })
}

/// `rho = (1/d) sum_{k<d} v P^k`, normalized.
fn recombine(chain: &TruncatedChain, v: &[f64], d: usize) -> Vec<f64> {
    let mut acc = v.to_vec();
    let mut cur = v.to_vec();
    let mut tmp = vec![0.0; v.len()];
    for _ in 1..d {
        chain.matrix.left_mul(&cur, &mut tmp);
        std::mem::swap(&mut cur, &mut tmp);
        acc.iter_mut().zip(&cur).for_each(|(a, c)| *a += c);
    }
    let total: f64 = acc.iter().sum();
    acc.iter_mut().for_each(|a| *a /= total);
    acc
}

/// `||rho^T P - rho^T||_1`.
pub fn stationarity_residual(chain: &TruncatedChain, rho: &[f64]) -> f64 {
    chain.push_forward(rho).iter().zip(rho).map(|(a, b)| (a - b).abs()).sum()
}

/// `rho` restricted to `class` (state indices) and renormalized; the state list is kept.
pub fn conditioned_stationary(rho: &DistributionVector, class: &[usize]) -> Result<DistributionVector> {
    let mass: f64 = class.iter().map(|&i| rho.weights.get(i).copied().unwrap_or(0.0)).sum();
    if !(mass > 0.0) {
        return Err(Error::EmptyClass("class carries no stationary mass".into()));
    }
    let mut weights = vec![0.0; rho.weights.len()];
    for &i in class {
        weights[i] = rho.weights[i] / mass;
    }
    DistributionVector::new(rho.states.clone(), weights)
}

/// Partial sums of `zeta = sum_{x>=1} prod_{j<x} P_1(j) / P_{-1}(j+1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZetaSeries {
    /// `ln` of the term at `x = 1, 2, ...`.
    pub log_terms: Vec<f64>,
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    /// First `x` whose term is below `1e-12` times the running sum.
    pub converged_at: Option<u64>,
}

impl ZetaSeries {
    pub fn converged(&self) -> bool {
        self.converged_at.is_some()
    }

    pub fn sum(&self) -> f64 {
        self.partial_sums.last().copied().unwrap_or(0.0)
    }
}

pub fn zeta_partial_sums(net: &ReactionNetwork, x_max: u64) -> Result<ZetaSeries> {
    if !net.is_unit_step_single_species() {
        return Err(Error::Unsupported(
            "the zeta criterion needs a single-species network with unit state changes".into(),
        ));
    }
    let mut series = ZetaSeries {
        log_terms: Vec::with_capacity(x_max as usize),
        terms: Vec::with_capacity(x_max as usize),
        partial_sums: Vec::with_capacity(x_max as usize),
        converged_at: None,
    };
    let mut log_term = 0.0;
    let mut log_sum = f64::NEG_INFINITY;
    for x in 1..=x_max {
        let j = x - 1;
        let up = net.up_probability(j)?;
        let down = 1.0 - net.up_probability(x)?;
        log_term += up.ln() - down.ln();
        log_sum = if log_sum == f64::NEG_INFINITY {
            log_term
        } else {
            let m = log_sum.max(log_term);
            m + ((log_sum - m).exp() + (log_term - m).exp()).ln()
        };
        series.log_terms.push(log_term);
        series.terms.push(log_term.exp());
        series.partial_sums.push(log_sum.exp());
        if series.converged_at.is_none() && log_term < log_sum + (1e-12f64).ln() {
            series.converged_at = Some(x);
        }
    }
    Ok(series)
}

/// Which closed class of the two-point motion to keep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairClass {
    /// The diagonal `x = y`.
    Diagonal,
    /// The closed class reached from an odd-distance seed pair.
    OffDiagonal { seed: (u64, u64) },
}

impl PairClass {
    /// Off-diagonal class reached from `(0, 1)`.
    pub fn off_diagonal() -> Self {
        PairClass::OffDiagonal { seed: (0, 1) }
    }
}

/// Two-point motion of a unit-step single-species network on `{0..n_max}^2`,
/// restricted to the closed communicating class selected by `class`.
///
/// Transitions use the exact common-noise law ([`coupled_moves`]); a
/// coordinate at `n_max` that would step up steps down instead. The class is
/// found by BFS from the seed pair followed by a search for the unique
/// closed strongly connected component among the reached pairs.
pub fn build_two_point_chain(net: &ReactionNetwork, n_max: u64, class: PairClass) -> Result<TruncatedChain> {
    if !net.is_unit_step_single_species() {
        return Err(Error::Unsupported(
            "two-point chains need a single-species network with unit state changes".into(),
        ));
    }
    if n_max < 2 {
        return Err(Error::invalid(format!("truncation bound must be at least 2, got {n_max}")));
    }
    let seed = match class {
        PairClass::Diagonal => (0, 0),
        PairClass::OffDiagonal { seed } => {
            if seed.0 == seed.1 {
                return Err(Error::invalid("off-diagonal seed must have x != y"));
            }
            seed
        }
    };
    if seed.0 > n_max || seed.1 > n_max {
        return Err(Error::invalid("seed pair lies outside the truncation"));
    }

    // BFS over reachable pairs
    let reflect = |x: u64, dx: i64| -> u64 {
        let y = x as i64 + dx;
        if y > n_max as i64 {
            (x as i64 - dx) as u64
        } else {
            y as u64
        }
    };
    let mut states: Vec<ChainState> = vec![vec![seed.0, seed.1]];
    let mut index: HashMap<ChainState, usize> = HashMap::from([(states[0].clone(), 0)]);
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut head = 0;
    while head < states.len() {
        let (x, y) = (states[head][0], states[head][1]);
        let mut row = Vec::with_capacity(4);
        for ((dx, dy), p) in coupled_moves(net, x, y)? {
            if p <= 0.0 {
                continue;
            }
            let t = vec![reflect(x, dx), reflect(y, dy)];
            let j = match index.get(&t) {
                Some(&j) => j,
                None => {
                    let j = states.len();
                    index.insert(t.clone(), j);
                    states.push(t);
                    j
                }
            };
            row.push((j, p));
        }
        rows.push(row);
        head += 1;
    }
    let full = TruncatedChain::new(states, rows, n_max);

    let comm = full.communication_classes();
    let closed: Vec<&Vec<usize>> = comm
        .iter()
        .filter(|c| {
            c.iter()
                .all(|&i| full.matrix.row(i).all(|(j, p)| p <= 0.0 || c.binary_search(&j).is_ok()))
        })
        .collect();
    let members = match closed.as_slice() {
        [] => return Err(Error::EmptyClass("no closed class reachable from the seed pair".into())),
        [one] => *one,
        many => {
            return Err(Error::Reducible {
                classes: many.iter().map(|c| (*c).clone()).collect(),
            })
        }
    };

    // renumber the class in lexicographic state order
    let mut members = members.clone();
    members.sort_by(|&i, &j| full.states[i].cmp(&full.states[j]));
    let local: HashMap<usize, usize> = members.iter().enumerate().map(|(k, &i)| (i, k)).collect();
    let sub_states: Vec<ChainState> = members.iter().map(|&i| full.states[i].clone()).collect();
    let sub_rows: Vec<Vec<(usize, f64)>> = members
        .iter()
        .map(|&i| full.matrix.row(i).filter(|&(_, p)| p > 0.0).map(|(j, p)| (local[&j], p)).collect())
        .collect();
    Ok(TruncatedChain::new(sub_states, sub_rows, n_max))
}
