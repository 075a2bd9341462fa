//! Pullback limits and the two-point random attractor.
//!
//! `a_x(q)` is approximated by `v_n = phi^{2n}(theta^{-2n} q, x)` for
//! `n = 1, 2, ...`. Depths are visited linearly: with counter-based noise
//! nothing is shared between depths, so doubling would only skip the point
//! of stabilization.
//!
//! Constancy of `v_n` alone is a weak detector: from `x = 0` the sequence is
//! non-decreasing with plateaus that often outlast a ten-depth window. Two
//! same-parity paths of a unit-step chain cannot cross without meeting, so
//! the pullbacks from `x` and from a high start `M` of the same parity
//! bracket every start in between. The default rule therefore also requires
//! those two pullbacks to agree over the window. `M` is placed where the
//! stationary tail is negligible.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{ReactionNetwork, State};
use crate::noise::NoiseFiber;
use crate::rds::{phi_in_place, step_in_place};
use crate::stationary::{zeta_partial_sums, DistributionVector};

pub const DEFAULT_PULLBACK_DEPTH: u64 = 10_000;
pub const DEFAULT_WINDOW: u64 = 10;
/// Stationary mass allowed above the automatic ceiling.
const CEILING_TAIL: f64 = 1e-16;
const CEILING_SEARCH_LIMIT: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilizationRule {
    /// `v_n` constant over the window.
    Window,
    /// `v_n` constant over the window and equal to the pullback from the ceiling.
    Bracketed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PullbackConfig {
    /// Largest pullback depth `n` (the walk runs `2n` steps).
    pub n_max: u64,
    /// Number of consecutive depths that must agree.
    pub window: u64,
    pub rule: StabilizationRule,
    /// Upper bracketing start; chosen from the stationary tail when `None`.
    pub ceiling: Option<u64>,
}

impl Default for PullbackConfig {
    fn default() -> Self {
        PullbackConfig {
            n_max: DEFAULT_PULLBACK_DEPTH,
            window: DEFAULT_WINDOW,
            rule: StabilizationRule::Bracketed,
            ceiling: None,
        }
    }
}

impl PullbackConfig {
    pub fn new(n_max: u64, window: u64) -> Self {
        PullbackConfig {
            n_max,
            window,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::invalid("constancy window must be positive"));
        }
        if self.n_max < self.window {
            return Err(Error::invalid("pullback depth must be at least the window"));
        }
        Ok(())
    }

    /// Fixes the ceiling for `net` so repeated calls skip the tail computation.
    pub fn resolved(&self, net: &ReactionNetwork) -> Result<Self> {
        if self.rule == StabilizationRule::Window || self.ceiling.is_some() {
            return Ok(*self);
        }
        Ok(PullbackConfig {
            ceiling: Some(automatic_ceiling(net)?),
            ..*self
        })
    }
}

/// Smallest state beyond the stationary mode whose stationary tail mass
/// (estimated from the product terms) is below `1e-16`.
pub fn automatic_ceiling(net: &ReactionNetwork) -> Result<u64> {
    let mut x_max = 256;
    loop {
        let z = zeta_partial_sums(net, x_max)?;
        if z.converged() {
            let logs: Vec<f64> = std::iter::once(0.0).chain(z.log_terms.iter().copied()).collect();
            let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let log_norm = m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
            let mode = logs.iter().position(|&l| l == m).unwrap_or(0);
            // terms decay geometrically past the mode, so one term bounds its tail up to a constant
            if let Some(x) = (mode..logs.len()).find(|&x| logs[x] - log_norm < CEILING_TAIL.ln()) {
                return Ok(x as u64);
            }
        }
        if x_max >= CEILING_SEARCH_LIMIT {
            return Err(Error::Unsupported(
                "stationary tail does not decay; pass an explicit ceiling".into(),
            ));
        }
        x_max *= 4;
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PullbackReport {
    /// Stable value, or the last `v_n` computed when not converged.
    pub value: u64,
    /// First depth of the accepted window.
    pub stabilization_depth: u64,
    pub converged: bool,
    pub depth_reached: u64,
    /// Upper bracketing start used, if any.
    pub ceiling: Option<u64>,
}

/// `phi^{2n}` started at `x` from time `-2n`.
pub fn pullback_value(net: &ReactionNetwork, fiber: &NoiseFiber, x: u64, n: u64) -> Result<u64> {
    net.require_single_species("pullback")?;
    let steps = n.checked_mul(2).filter(|s| *s < (1 << 62)).ok_or(Error::ShiftOverflow)?;
    let past = fiber.shift(-(steps as i64))?;
    let mut buf = [x];
    phi_in_place(net, &past, steps, &mut buf)?;
    Ok(buf[0])
}

pub fn pullback_point(net: &ReactionNetwork, fiber: &NoiseFiber, x: u64, cfg: &PullbackConfig) -> Result<PullbackReport> {
    net.require_single_species("pullback_point")?;
    cfg.validate()?;
    let cfg = cfg.resolved(net)?;
    let upper = match cfg.rule {
        StabilizationRule::Window => None,
        StabilizationRule::Bracketed => {
            let c = cfg.ceiling.expect("resolved").max(x);
            Some(if (c - x).is_multiple_of(2) { c } else { c + 1 })
        }
    };
    let mut last = x;
    let mut run_start = 0;
    let mut run_len = 0;
    for n in 1..=cfg.n_max {
        let v = pullback_value(net, fiber, x, n)?;
        let agree = match upper {
            Some(m) => pullback_value(net, fiber, m, n)? == v,
            None => true,
        };
        if !agree {
            run_len = 0;
            last = v;
            continue;
        }
        if run_len > 0 && v == last {
            run_len += 1;
        } else {
            last = v;
            run_start = n;
            run_len = 1;
        }
        if run_len >= cfg.window {
            return Ok(PullbackReport {
                value: v,
                stabilization_depth: run_start,
                converged: true,
                depth_reached: n,
                ceiling: upper,
            });
        }
    }
    Ok(PullbackReport {
        value: last,
        stabilization_depth: run_start,
        converged: false,
        depth_reached: cfg.n_max,
        ceiling: upper,
    })
}

/// Re-evaluates the pullback at depths beyond stabilization, densely for a
/// while and then geometrically up to `up_to`. Returns the first depth whose
/// value differs, if any.
pub fn pullback_stability_check(
    net: &ReactionNetwork,
    fiber: &NoiseFiber,
    x: u64,
    report: &PullbackReport,
    up_to: u64,
) -> Result<Option<u64>> {
    if !report.converged {
        return Err(Error::invalid("stability check needs a converged pullback"));
    }
    let mut n = report.stabilization_depth;
    let dense_end = n + 100;
    while n <= up_to {
        if pullback_value(net, fiber, x, n)? != report.value {
            return Ok(Some(n));
        }
        n = if n < dense_end { n + 1 } else { n + n / 2 };
    }
    if pullback_value(net, fiber, x, up_to)? != report.value {
        return Ok(Some(up_to));
    }
    Ok(None)
}

/// The fiber `A_q = {a_0(q), a_1(q)}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttractorFiber {
    pub a0: u64,
    pub a1: u64,
    /// Larger of the two stabilization depths.
    pub stabilization_depth: u64,
    pub converged: bool,
}

impl AttractorFiber {
    pub fn points(&self) -> [u64; 2] {
        [self.a0, self.a1]
    }

    pub fn contains(&self, x: u64) -> bool {
        x == self.a0 || x == self.a1
    }

    pub fn distance(&self) -> u64 {
        self.a0.abs_diff(self.a1)
    }

    /// Rejects fibers that cannot come from a parity-preserving pullback.
    pub fn check_consistency(&self) -> Result<()> {
        if self.a0 == self.a1 {
            return Err(Error::ContractViolation(format!("attractor fiber collapsed to the single point {}", self.a0)));
        }
        if !self.a0.is_multiple_of(2) || self.a1.is_multiple_of(2) {
            return Err(Error::ContractViolation(format!(
                "attractor fiber ({}, {}) does not have an even and an odd point",
                self.a0, self.a1
            )));
        }
        Ok(())
    }
}

pub fn attractor_fiber(net: &ReactionNetwork, fiber: &NoiseFiber, cfg: &PullbackConfig) -> Result<AttractorFiber> {
    let cfg = &cfg.resolved(net)?;
    let p0 = pullback_point(net, fiber, 0, cfg)?;
    let p1 = pullback_point(net, fiber, 1, cfg)?;
    let af = AttractorFiber {
        a0: p0.value,
        a1: p1.value,
        stabilization_depth: p0.stabilization_depth.max(p1.stabilization_depth),
        converged: p0.converged && p1.converged,
    };
    if net.is_unit_step_single_species() {
        af.check_consistency()?;
    }
    Ok(af)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MismatchKind {
    /// `phi^1_q(a_i(q)) != a_{1-i}(theta q)`; `index` is `i`.
    OrbitRelation { index: u8 },
    /// `phi^n_q(A_q) != A_{theta^n q}`.
    ForwardInvariance,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbitMismatch {
    pub shift: u64,
    pub kind: MismatchKind,
    pub expected: Vec<u64>,
    pub got: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbitReport {
    pub seed: u64,
    pub depth: u64,
    pub fibers: Vec<AttractorFiber>,
    pub nonconverged: u64,
    pub mismatches: Vec<OrbitMismatch>,
}

impl OrbitReport {
    pub fn passed(&self) -> bool {
        self.nonconverged == 0 && self.mismatches.is_empty()
    }
}

/// Checks the period-two orbit relation at shifts `0..depth` and forward
/// invariance of the fibers along the same stretch of noise.
pub fn verify_periodic_orbit(
    net: &ReactionNetwork,
    fiber: &NoiseFiber,
    depth: u64,
    cfg: &PullbackConfig,
) -> Result<OrbitReport> {
    let cfg = &cfg.resolved(net)?;
    let fibers = (0..=depth)
        .map(|k| attractor_fiber(net, &fiber.shift(k as i64)?, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut report = OrbitReport {
        seed: fiber.seed(),
        depth,
        nonconverged: fibers.iter().filter(|f| !f.converged).count() as u64,
        fibers,
        mismatches: Vec::new(),
    };

    for k in 0..depth {
        let here = &report.fibers[k as usize];
        let next = &report.fibers[k as usize + 1];
        let q = fiber.q(k as i64);
        for (i, (from, to)) in [(here.a0, next.a1), (here.a1, next.a0)].into_iter().enumerate() {
            let mut x = [from];
            step_in_place(net, &mut x, q, k)?;
            if x[0] != to {
                report.mismatches.push(OrbitMismatch {
                    shift: k,
                    kind: MismatchKind::OrbitRelation { index: i as u8 },
                    expected: vec![to],
                    got: vec![x[0]],
                });
            }
        }
    }

    let mut image = report.fibers[0].points();
    for n in 1..=depth {
        let q = fiber.q(n as i64 - 1);
        for x in image.iter_mut() {
            let mut b = [*x];
            step_in_place(net, &mut b, q, n - 1)?;
            *x = b[0];
        }
        let target = &report.fibers[n as usize];
        let got: BTreeSet<u64> = image.iter().copied().collect();
        let expected: BTreeSet<u64> = target.points().into_iter().collect();
        if got != expected {
            report.mismatches.push(OrbitMismatch {
                shift: n,
                kind: MismatchKind::ForwardInvariance,
                expected: expected.into_iter().collect(),
                got: got.into_iter().collect(),
            });
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMeasureReport {
    /// Average of `(delta_{a0} + delta_{a1}) / 2` over converged fibers.
    pub measure: DistributionVector,
    pub fibers: Vec<(u64, AttractorFiber)>,
    pub converged: u64,
    pub excluded: u64,
    /// Total variation to the reference, when one is given.
    pub tv_to_reference: Option<f64>,
}

/// Empirical mean sample measure over `seeds`, computed in parallel.
pub fn sample_measure_stats(
    net: &ReactionNetwork,
    seeds: &[u64],
    cfg: &PullbackConfig,
    reference: Option<&DistributionVector>,
) -> Result<SampleMeasureReport> {
    let cfg = &cfg.resolved(net)?;
    let fibers = seeds
        .par_iter()
        .map(|&s| attractor_fiber(net, &NoiseFiber::new(s), cfg).map(|f| (s, f)))
        .collect::<Result<Vec<_>>>()?;
    let mut counts: BTreeMap<u64, f64> = BTreeMap::new();
    let mut converged = 0u64;
    for (_, f) in fibers.iter().filter(|(_, f)| f.converged) {
        converged += 1;
        *counts.entry(f.a0).or_insert(0.0) += 0.5;
        *counts.entry(f.a1).or_insert(0.0) += 0.5;
    }
    let excluded = fibers.len() as u64 - converged;
    let (states, weights): (Vec<Vec<u64>>, Vec<f64>) = counts
        .into_iter()
        .map(|(x, c)| (vec![x], if converged > 0 { c / converged as f64 } else { 0.0 }))
        .unzip();
    let measure = DistributionVector::new(states, weights)?;
    let tv_to_reference = reference.map(|r| measure.total_variation(r));
    Ok(SampleMeasureReport {
        measure,
        fibers,
        converged,
        excluded,
        tv_to_reference,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForwardAttraction {
    /// Smallest `N` with `phi^N_q(B)` inside `A_{theta^N q}`; `None` when censored.
    pub first_contained: Option<u64>,
    /// Containment held over the whole verification window after `N`.
    pub persisted: bool,
    pub steps_run: u64,
}

/// Pushes the finite set `b` forward under the common noise until it lies in
/// the attractor fiber over the current time.
pub fn forward_attraction_check(
    net: &ReactionNetwork,
    fiber: &NoiseFiber,
    b: &[u64],
    n_max: u64,
    verify_window: u64,
    cfg: &PullbackConfig,
) -> Result<ForwardAttraction> {
    if b.is_empty() {
        return Err(Error::invalid("the attracted set must be non-empty"));
    }
    let cfg = &cfg.resolved(net)?;
    let mut set: Vec<u64> = b.to_vec();
    set.sort_unstable();
    set.dedup();

    let contained_at = |set: &[u64], n: u64| -> Result<bool> {
        if set.len() > 2 {
            return Ok(false);
        }
        let a = attractor_fiber(net, &fiber.shift(n as i64)?, cfg)?;
        Ok(a.converged && set.iter().all(|&x| a.contains(x)))
    };
    let advance = |set: &mut Vec<u64>, n: u64| -> Result<()> {
        let q = fiber.q(n as i64);
        for x in set.iter_mut() {
            let mut buf = [*x];
            step_in_place(net, &mut buf, q, n)?;
            *x = buf[0];
        }
        set.sort_unstable();
        set.dedup();
        Ok(())
    };

    let mut n = 0;
    loop {
        if contained_at(&set, n)? {
            break;
        }
        if n >= n_max {
            return Ok(ForwardAttraction {
                first_contained: None,
                persisted: false,
                steps_run: n,
            });
        }
        advance(&mut set, n)?;
        n += 1;
    }
    let first = n;
    let mut persisted = true;
    for _ in 0..verify_window {
        advance(&mut set, n)?;
        n += 1;
        if !contained_at(&set, n)? {
            persisted = false;
            break;
        }
    }
    Ok(ForwardAttraction {
        first_contained: Some(first),
        persisted,
        steps_run: n,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiberDistanceStats {
    /// `|a0 - a1|` to number of converged fibers.
    pub histogram: BTreeMap<u64, u64>,
    pub converged: u64,
    pub nonconverged: u64,
    pub mean_distance: f64,
}

/// Distribution of `|a0(q) - a1(q)|` over seeds. Nothing is assumed about its shape.
pub fn fiber_distance_stats(net: &ReactionNetwork, seeds: &[u64], cfg: &PullbackConfig) -> Result<FiberDistanceStats> {
    let cfg = &cfg.resolved(net)?;
    let fibers = seeds
        .par_iter()
        .map(|&s| attractor_fiber(net, &NoiseFiber::new(s), cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut histogram = BTreeMap::new();
    let mut total = 0u64;
    let mut converged = 0u64;
    for f in fibers.iter().filter(|f| f.converged) {
        *histogram.entry(f.distance()).or_insert(0) += 1;
        total += f.distance();
        converged += 1;
    }
    Ok(FiberDistanceStats {
        histogram,
        converged,
        nonconverged: fibers.len() as u64 - converged,
        mean_distance: if converged > 0 { total as f64 / converged as f64 } else { f64::NAN },
    })
}

/// `State` wrapper for callers working with the general state type.
pub fn pullback_state(net: &ReactionNetwork, fiber: &NoiseFiber, x: &State, cfg: &PullbackConfig) -> Result<PullbackReport> {
    net.check_dim(x.counts())?;
    pullback_point(net, fiber, x.counts()[0], cfg)
}
