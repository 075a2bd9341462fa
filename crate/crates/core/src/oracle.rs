//! Independent references used to cross-check the simulation and the
//! chain computations: the exit-probability recursion, the deterministic
//! rate equations, the closed-form birth-death stationary law and an exact
//! enumeration of the small two-point chain.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Builtin, ReactionNetwork, State};
use crate::rds::step_embedded;
use crate::stationary::DistributionVector;

/// Values above this are rescaled while iterating the recursion.
const RESCALE_AT: f64 = 1e150;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecursionTrace {
    pub alpha: f64,
    pub d: i64,
    /// `p_0, p_1, ...`; entries that overflow a double are infinite.
    pub values: Vec<f64>,
    /// `ln |p_x|`, finite even where `values` overflowed.
    pub log_abs: Vec<f64>,
}

impl RecursionTrace {
    /// First `x` with `p_x > bound`.
    pub fn first_exceeding(&self, bound: f64) -> Option<usize> {
        let lb = bound.ln();
        self.values
            .iter()
            .zip(&self.log_abs)
            .position(|(&v, &l)| v > 0.0 && l > lb)
    }
}

/// Iterates `p_{x+2} = (1 + a(x+d+1)) (p_{x+1} - a(x+1)/(1 + a(x+1)) p_x)`
/// from `p_1 = (1 + a d) p_0`, carrying a common log scale once values grow large.
pub fn lemma_recursion(alpha: f64, d: i64, p0: f64, x_max: usize) -> Result<RecursionTrace> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    if d < 1 {
        return Err(Error::invalid(format!("level offset must be at least 1, got {d}")));
    }
    if !(p0 >= 0.0 && p0.is_finite()) {
        return Err(Error::invalid(format!("p0 must be finite and non-negative, got {p0}")));
    }
    let mut scale = 0.0f64;
    let record = |p: f64, scale: f64| -> (f64, f64) {
        let l = p.abs().ln() + scale;
        let v = if scale == 0.0 { p } else { p.signum() * l.exp() };
        (v, l)
    };
    let mut values = Vec::with_capacity(x_max + 1);
    let mut log_abs = Vec::with_capacity(x_max + 1);
    let (mut prev, mut cur) = (p0, (1.0 + alpha * d as f64) * p0);
    for (v, l) in [record(prev, 0.0), record(cur, 0.0)].into_iter().take(x_max + 1) {
        values.push(v);
        log_abs.push(l);
    }
    for x in 0..x_max.saturating_sub(1) {
        let xf = x as f64;
        let next = (1.0 + alpha * (xf + d as f64 + 1.0)) * (cur - alpha * (xf + 1.0) / (1.0 + alpha * (xf + 1.0)) * prev);
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE_AT {
            scale += RESCALE_AT.ln();
            prev /= RESCALE_AT;
            cur /= RESCALE_AT;
        }
        let (v, l) = record(cur, scale);
        values.push(v);
        log_abs.push(l);
    }
    Ok(RecursionTrace { alpha, d, values, log_abs })
}

/// Polynomial coefficients (ascending) of the deterministic rate equation.
fn rre_coefficients(model: Builtin, rates: &[f64]) -> Result<Vec<f64>> {
    if rates.len() != model.rate_count() {
        return Err(Error::DimensionMismatch {
            expected: model.rate_count(),
            got: rates.len(),
        });
    }
    if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(Error::invalid("rates must be finite and non-negative"));
    }
    if rates[0] <= 0.0 || rates[rates.len() - 1] <= 0.0 {
        return Err(Error::invalid("the inflow and the highest-order outflow rate must be positive"));
    }
    Ok(match model {
        Builtin::BirthDeath => vec![rates[0], -rates[1]],
        Builtin::Schloegl => vec![rates[0], -rates[1], rates[2], -rates[3]],
    })
}

fn horner(coef: &[f64], c: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, &a| acc * c + a)
}

fn derivative(coef: &[f64]) -> Vec<f64> {
    coef.iter().enumerate().skip(1).map(|(k, &a)| k as f64 * a).collect()
}

pub fn rre_rhs(model: Builtin, rates: &[f64], c: f64) -> Result<f64> {
    if !(c >= 0.0) {
        return Err(Error::invalid(format!("concentration must be non-negative, got {c}")));
    }
    Ok(horner(&rre_coefficients(model, rates)?, c))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Degenerate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub root: f64,
    pub stability: Stability,
}

fn bisect(coef: &[f64], mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = horner(coef, lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = horner(coef, mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Non-negative real roots of the rate equation in increasing order.
///
/// The half-line is cut at the critical points of the polynomial into
/// monotone pieces; each piece with a sign change holds one root, found by
/// bisection. A critical point where the polynomial vanishes is a
/// degenerate root.
pub fn rre_equilibria(model: Builtin, rates: &[f64]) -> Result<Vec<Equilibrium>> {
    let coef = rre_coefficients(model, rates)?;
    let dcoef = derivative(&coef);
    let lead = coef[coef.len() - 1].abs();
    let bound = 1.0 + coef[..coef.len() - 1].iter().map(|a| a.abs() / lead).fold(0.0, f64::max);

    let mut cuts = vec![0.0];
    if dcoef.len() == 3 {
        let (a, b, c) = (dcoef[2], dcoef[1], dcoef[0]);
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let s = disc.sqrt();
            let mut crit = [(-b - s) / (2.0 * a), (-b + s) / (2.0 * a)];
            crit.sort_by(f64::total_cmp);
            cuts.extend(crit.into_iter().filter(|&t| t > 0.0 && t < bound));
        }
    }
    cuts.push(bound);
    cuts.dedup();

    let scale = coef.iter().map(|a| a.abs()).fold(0.0, f64::max);
    let classify = |root: f64| {
        let slope = horner(&dcoef, root);
        if slope.abs() <= 1e-12 * scale {
            Stability::Degenerate
        } else if slope < 0.0 {
            Stability::Stable
        } else {
            Stability::Unstable
        }
    };

    let mut roots: Vec<Equilibrium> = Vec::new();
    if coef.len() == 2 {
        let root = -coef[0] / coef[1];
        roots.push(Equilibrium {
            root,
            stability: classify(root),
        });
        return Ok(roots);
    }
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (flo, fhi) = (horner(&coef, lo), horner(&coef, hi));
        if flo == 0.0 && lo > 0.0 {
            if roots.last().is_none_or(|r| r.root != lo) {
                roots.push(Equilibrium {
                    root: lo,
                    stability: classify(lo),
                });
            }
        } else if (flo > 0.0) != (fhi > 0.0) && fhi != 0.0 {
            let root = bisect(&coef, lo, hi);
            roots.push(Equilibrium {
                root,
                stability: classify(root),
            });
        }
    }
    // tangential roots at interior critical points
    for &t in &cuts[1..cuts.len() - 1] {
        if horner(&coef, t).abs() <= 1e-12 * scale && !roots.iter().any(|r| (r.root - t).abs() < 1e-9) {
            roots.push(Equilibrium {
                root: t,
                stability: Stability::Degenerate,
            });
        }
    }
    roots.sort_by(|a, b| a.root.total_cmp(&b.root));
    if roots.is_empty() {
        return Err(Error::Numerical("rate equation has no non-negative equilibrium".into()));
    }
    Ok(roots)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RrePath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl RrePath {
    pub fn last(&self) -> f64 {
        *self.values.last().expect("path has its initial point")
    }
}

/// Classical fourth-order Runge-Kutta with a fixed step; the last step is
/// shortened to land on `t_end`.
pub fn rre_integrate(model: Builtin, rates: &[f64], c0: f64, t_end: f64, dt: f64) -> Result<RrePath> {
    let coef = rre_coefficients(model, rates)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    if !(t_end >= 0.0 && t_end.is_finite()) || !(c0 >= 0.0 && c0.is_finite()) {
        return Err(Error::invalid("t_end and c0 must be finite and non-negative"));
    }
    let f = |c: f64| horner(&coef, c);
    let steps = (t_end / dt).ceil() as usize;
    let mut path = RrePath {
        times: Vec::with_capacity(steps + 1),
        values: Vec::with_capacity(steps + 1),
    };
    let (mut t, mut c) = (0.0, c0);
    path.times.push(t);
    path.values.push(c);
    let limit = 1e6 * (1.0 + c0);
    for i in 0..steps {
        let h = if i + 1 == steps { t_end - t } else { dt };
        let k1 = f(c);
        let k2 = f(c + 0.5 * h * k1);
        let k3 = f(c + 0.5 * h * k2);
        let k4 = f(c + h * k3);
        c += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t = if i + 1 == steps { t_end } else { t + h };
        if !c.is_finite() || c.abs() > limit {
            return Err(Error::Numerical(format!("integration diverged at t = {t}; reduce dt")));
        }
        path.times.push(t);
        path.values.push(c);
    }
    Ok(path)
}

/// `rho(x)` proportional to `prod_{j<x} P_1(j) / P_{-1}(j+1)` on `0..=n`,
/// with `P_1(j) = g1 / (g1 + g2 j)`, accumulated in log space.
pub fn birth_death_stationary_product(gamma1: f64, gamma2: f64, n: u64) -> Result<DistributionVector> {
    if !(gamma1 > 0.0 && gamma2 > 0.0 && gamma1.is_finite() && gamma2.is_finite()) {
        return Err(Error::invalid("rates must be positive and finite"));
    }
    let mut logs = Vec::with_capacity(n as usize + 1);
    let mut acc = 0.0;
    logs.push(acc);
    for j in 0..n {
        let jf = j as f64;
        let up = gamma1 / (gamma1 + gamma2 * jf);
        let down = gamma2 * (jf + 1.0) / (gamma1 + gamma2 * (jf + 1.0));
        acc += up.ln() - down.ln();
        logs.push(acc);
    }
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logs.iter().map(|l| (l - m).exp()).sum();
    let weights = logs.iter().map(|l| (l - m).exp() / z).collect();
    DistributionVector::new((0..=n).map(|x| vec![x]).collect(), weights)
}

/// Largest truncation accepted by [`enumerate_two_point_chain`].
pub const ENUMERATION_LIMIT: u64 = 60;

/// The two-point chain on `{0..n}^2`, row by row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnumeratedPairChain {
    pub n: u64,
    /// Row `i * (n + 1) + j` is the state `(i, j)`.
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl EnumeratedPairChain {
    pub fn index(&self, x: u64, y: u64) -> usize {
        (x * (self.n + 1) + y) as usize
    }

    pub fn state(&self, i: usize) -> (u64, u64) {
        let w = self.n as usize + 1;
        ((i / w) as u64, (i % w) as u64)
    }

    pub fn prob(&self, from: (u64, u64), to: (u64, u64)) -> f64 {
        let j = self.index(to.0, to.1);
        self.rows[self.index(from.0, from.1)]
            .iter()
            .filter(|(c, _)| *c == j)
            .map(|(_, p)| p)
            .sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let m = self.rows.len();
        self.rows
            .iter()
            .map(|r| {
                let mut d = vec![0.0; m];
                for &(c, p) in r {
                    d[c] += p;
                }
                d
            })
            .collect()
    }

    /// Communicating classes by pairwise reachability, each with a closed flag.
    pub fn communication_classes(&self) -> Vec<(Vec<(u64, u64)>, bool)> {
        let m = self.rows.len();
        let reach: Vec<Vec<bool>> = (0..m)
            .map(|s| {
                let mut seen = vec![false; m];
                seen[s] = true;
                let mut queue = VecDeque::from([s]);
                while let Some(u) = queue.pop_front() {
                    for &(v, p) in &self.rows[u] {
                        if p > 0.0 && !seen[v] {
                            seen[v] = true;
                            queue.push_back(v);
                        }
                    }
                }
                seen
            })
            .collect();
        let mut assigned = vec![false; m];
        let mut out = Vec::new();
        for s in 0..m {
            if assigned[s] {
                continue;
            }
            let class: Vec<usize> = (0..m).filter(|&t| reach[s][t] && reach[t][s]).collect();
            for &t in &class {
                assigned[t] = true;
            }
            let closed = class
                .iter()
                .all(|&u| self.rows[u].iter().all(|&(v, p)| p <= 0.0 || class.contains(&v)));
            out.push((class.into_iter().map(|i| self.state(i)).collect(), closed));
        }
        out
    }
}

/// Cumulative propensity ratios `c_k / mu` of a single-species state.
fn breakpoints(net: &ReactionNetwork, x: u64) -> Result<Vec<f64>> {
    let props = net.propensities(&State::scalar(x))?;
    let total: f64 = props.iter().sum();
    if total <= 0.0 {
        return Err(Error::Absorbing { state: vec![x], step: 0 });
    }
    let mut acc = 0.0;
    Ok(props
        .iter()
        .map(|a| {
            acc += a;
            acc / total
        })
        .collect())
}

/// Exact two-point transition matrix on `{0..n}^2` for a single-species
/// unit-step network. The coupled step is constant in `q` between the
/// merged breakpoints of both coordinates, so each piece is evaluated once
/// at its midpoint and weighted by its length. Moves above `n` are
/// reflected.
pub fn enumerate_two_point_chain(net: &ReactionNetwork, n: u64) -> Result<EnumeratedPairChain> {
    if !net.is_unit_step_single_species() {
        return Err(Error::Unsupported("enumeration needs a single-species unit-step network".into()));
    }
    if n > ENUMERATION_LIMIT {
        return Err(Error::ResourceLimit(format!(
            "enumeration is limited to n <= {ENUMERATION_LIMIT}, got {n}"
        )));
    }
    if n < 1 {
        return Err(Error::invalid("enumeration needs n >= 1"));
    }
    let bps: Vec<Vec<f64>> = (0..=n).map(|x| breakpoints(net, x)).collect::<Result<_>>()?;
    let reflect = |from: u64, to: u64| if to > n { 2 * from - to } else { to };
    let w = n as usize + 1;
    let mut rows = Vec::with_capacity(w * w);
    for x in 0..=n {
        for y in 0..=n {
            let mut cuts: Vec<f64> = std::iter::once(0.0)
                .chain(bps[x as usize].iter().copied())
                .chain(bps[y as usize].iter().copied())
                .collect();
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            let mut row: Vec<(usize, f64)> = Vec::new();
            for seg in cuts.windows(2) {
                let len = seg[1] - seg[0];
                if len <= 0.0 {
                    continue;
                }
                let mid = 0.5 * (seg[0] + seg[1]);
                let nx = reflect(x, step_embedded(net, &State::scalar(x), mid)?.counts()[0]);
                let ny = reflect(y, step_embedded(net, &State::scalar(y), mid)?.counts()[0]);
                let j = nx as usize * w + ny as usize;
                match row.iter_mut().find(|(c, _)| *c == j) {
                    Some(e) => e.1 += len,
                    None => row.push((j, len)),
                }
            }
            row.sort_by_key(|&(c, _)| c);
            rows.push(row);
        }
    }
    Ok(EnumeratedPairChain { n, rows })
}
