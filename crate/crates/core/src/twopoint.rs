//! Two-point motion under common noise and synchronization detection.
//!
//! Both coordinates of a pair are driven by the same fiber, step for step.
//! For single-species networks the pair lives on levels `I_d = {x - y = d}`
//! and the thick diagonal is `|x - y| <= 1`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{ReactionNetwork, State};
use crate::noise::NoiseFiber;
use crate::rds::AugmentedWalk;

pub const DEFAULT_N_MAX: u64 = 100_000;
pub const DEFAULT_VERIFY_WINDOW: u64 = 100;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairState {
    pub x: State,
    pub y: State,
}

/// Signed level `d = x - y`.
pub fn level_of(x: u64, y: u64) -> i64 {
    x as i64 - y as i64
}

/// One-step law of a unit-step pair, keyed by the moves `(z1, z2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairTransitionProbs {
    /// `(+1, +1)`
    pub up_up: f64,
    /// `(-1, +1)`
    pub down_up: f64,
    /// `(+1, -1)`
    pub up_down: f64,
    /// `(-1, -1)`
    pub down_down: f64,
}

impl PairTransitionProbs {
    pub fn get(&self, z1: i64, z2: i64) -> Option<f64> {
        match (z1, z2) {
            (1, 1) => Some(self.up_up),
            (-1, 1) => Some(self.down_up),
            (1, -1) => Some(self.up_down),
            (-1, -1) => Some(self.down_down),
            _ => None,
        }
    }

    pub fn sum(&self) -> f64 {
        self.up_up + self.down_up + self.up_down + self.down_down
    }

    /// Entries in the order `(1,1), (-1,1), (1,-1), (-1,-1)`.
    pub fn as_array(&self) -> [((i64, i64), f64); 4] {
        [
            ((1, 1), self.up_up),
            ((-1, 1), self.down_up),
            ((1, -1), self.up_down),
            ((-1, -1), self.down_down),
        ]
    }
}

/// The monotone-coupling pair law built from `P_1`:
/// `P(1,1) = min{P1(x), P1(y)}`, `P(-1,1) = max{0, P1(y) - P1(x)}`,
/// `P(1,-1) = max{0, P1(x) - P1(y)}`, `P(-1,-1) = 1 - max{P1(x), P1(y)}`.
///
/// This is the exact law of the simulated pair whenever every upward
/// reaction precedes every downward one in reaction order (birth-death).
/// For other orders use [`coupled_transition_probs`].
pub fn pair_transition_probs(net: &ReactionNetwork, x: u64, y: u64) -> Result<PairTransitionProbs> {
    net.require_single_species("pair_transition_probs")?;
    let px = net.up_probability(x)?;
    let py = net.up_probability(y)?;
    Ok(PairTransitionProbs {
        up_up: px.min(py),
        down_up: (py - px).max(0.0),
        up_down: (px - py).max(0.0),
        down_down: 1.0 - px.max(py),
    })
}

/// Cumulative-propensity breakpoints `c_k / mu` of the reaction selector at `x`,
/// paired with the state change of reaction `k`. Zero-propensity reactions are skipped.
fn selector_partition(net: &ReactionNetwork, x: u64) -> Result<Vec<(f64, i64)>> {
    let props = net.propensities(&State::scalar(x))?;
    let total: f64 = props.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Absorbing { state: vec![x], step: 0 });
    }
    let mut cumulative = 0.0;
    let mut out = Vec::with_capacity(props.len());
    for (a, r) in props.iter().zip(net.reactions()) {
        if *a > 0.0 {
            cumulative += a;
            out.push((cumulative / total, r.change()[0]));
        }
    }
    Ok(out)
}

/// Exact law of `(f_q(x), f_q(y))` for common `q ~ U(0,1)` on a single-species
/// network: `((dx, dy), probability)` for every move with positive probability.
///
/// The selector partitions `[0, 1)` into one interval per reaction; the pair
/// law is the overlap length of the two partitions.
pub fn coupled_moves(net: &ReactionNetwork, x: u64, y: u64) -> Result<Vec<((i64, i64), f64)>> {
    net.require_single_species("coupled_moves")?;
    let px = selector_partition(net, x)?;
    let py = selector_partition(net, y)?;
    let mut moves: Vec<((i64, i64), f64)> = Vec::new();
    let (mut i, mut j) = (0, 0);
    let mut lo = 0.0;
    while i < px.len() && j < py.len() {
        let hi = px[i].0.min(py[j].0);
        if hi > lo {
            let key = (px[i].1, py[j].1);
            match moves.iter_mut().find(|(k, _)| *k == key) {
                Some((_, p)) => *p += hi - lo,
                None => moves.push((key, hi - lo)),
            }
            lo = hi;
        }
        if px[i].0 <= hi {
            i += 1;
        }
        if j < py.len() && py[j].0 <= hi {
            j += 1;
        }
    }
    moves.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(moves)
}

/// [`coupled_moves`] for unit-step networks, as the four-entry pair law.
pub fn coupled_transition_probs(net: &ReactionNetwork, x: u64, y: u64) -> Result<PairTransitionProbs> {
    if !net.is_unit_step_single_species() {
        return Err(Error::Unsupported(
            "coupled_transition_probs requires a single-species network with unit state changes".into(),
        ));
    }
    let mut p = PairTransitionProbs {
        up_up: 0.0,
        down_up: 0.0,
        up_down: 0.0,
        down_down: 0.0,
    };
    for ((dx, dy), w) in coupled_moves(net, x, y)? {
        match (dx, dy) {
            (1, 1) => p.up_up += w,
            (-1, 1) => p.down_up += w,
            (1, -1) => p.up_down += w,
            _ => p.down_down += w,
        }
    }
    Ok(p)
}

/// Two augmented walks on one fiber, advanced in lock-step.
#[derive(Clone, Debug)]
pub struct PairWalk<'a> {
    pub a: AugmentedWalk<'a>,
    pub b: AugmentedWalk<'a>,
}

impl<'a> PairWalk<'a> {
    pub fn new(net: &'a ReactionNetwork, fiber: NoiseFiber, x0: &State, y0: &State) -> Result<Self> {
        net.check_dim(&x0.0)?;
        net.check_dim(&y0.0)?;
        Ok(PairWalk {
            a: AugmentedWalk::new(net, fiber, x0.clone(), 0.0),
            b: AugmentedWalk::new(net, fiber, y0.clone(), 0.0),
        })
    }

    #[inline]
    pub fn advance(&mut self) -> Result<()> {
        self.a.advance()?;
        self.b.advance()?;
        Ok(())
    }

    pub fn steps(&self) -> u64 {
        self.a.steps()
    }

    pub fn met(&self) -> bool {
        self.a.counts() == self.b.counts()
    }

    /// `x_n - y_n` for single-species pairs.
    pub fn level(&self) -> i64 {
        level_of(self.a.counts()[0], self.b.counts()[0])
    }

    pub fn pair(&self) -> PairState {
        PairState {
            x: State(self.a.counts().to_vec()),
            y: State(self.b.counts().to_vec()),
        }
    }
}

/// `(phi^n(x0), phi^n(y0))` for `n = 0..=n_max`.
pub fn two_point_trajectory(
    net: &ReactionNetwork,
    fiber: &NoiseFiber,
    x0: &State,
    y0: &State,
    n_max: u64,
) -> Result<Vec<PairState>> {
    let mut walk = PairWalk::new(net, *fiber, x0, y0)?;
    let mut out = Vec::with_capacity(n_max as usize + 1);
    out.push(walk.pair());
    for _ in 0..n_max {
        walk.advance()?;
        out.push(walk.pair());
    }
    Ok(out)
}

/// First `n <= n_max` with `|phi^n(x0) - phi^n(y0)| <= 1`; `None` on timeout.
pub fn hitting_time_thick_diagonal(
    net: &ReactionNetwork,
    fiber: &NoiseFiber,
    x0: &State,
    y0: &State,
    n_max: u64,
) -> Result<Option<u64>> {
    net.require_single_species("thick-diagonal hitting time")?;
    let mut walk = PairWalk::new(net, *fiber, x0, y0)?;
    loop {
        if walk.level().abs() <= 1 {
            return Ok(Some(walk.steps()));
        }
        if walk.steps() >= n_max {
            return Ok(None);
        }
        walk.advance()?;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyncConfig {
    /// Largest meeting index searched for.
    pub n_max: u64,
    /// Steps after the meeting over which equality is re-verified.
    pub verify_window: u64,
    /// Also re-measure the time delay at every verified step.
    pub check_delay: bool,
}

impl Default for SyncConfig {
    fn default() -> Self {
        SyncConfig {
            n_max: DEFAULT_N_MAX,
            verify_window: DEFAULT_VERIFY_WINDOW,
            check_delay: cfg!(debug_assertions),
        }
    }
}

impl SyncConfig {
    pub fn with_n_max(n_max: u64) -> Self {
        SyncConfig {
            n_max,
            ..Self::default()
        }
    }
}

/// Per-run counts of pair-invariant violations (single-species runs).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairInvariantCounts {
    /// Pair steps observed.
    pub steps: u64,
    /// Steps that left the thick diagonal after first reaching it.
    pub thick_diagonal_exits: u64,
    /// Steps where an even-distance pair changed order without meeting.
    pub crossings: u64,
    /// Steps that increased `|x - y|`.
    pub moves_away: u64,
}

impl PairInvariantCounts {
    fn observe(&mut self, before: i64, after: i64, in_thick_diagonal: bool) {
        self.steps += 1;
        if in_thick_diagonal && after.abs() > 1 {
            self.thick_diagonal_exits += 1;
        }
        if before % 2 == 0 && before != 0 && after != 0 && before.signum() != after.signum() {
            self.crossings += 1;
        }
        if after.abs() > before.abs() {
            self.moves_away += 1;
        }
    }

    pub fn violations(&self) -> u64 {
        self.thick_diagonal_exits + self.crossings + self.moves_away
    }

    pub fn merge(&mut self, other: &PairInvariantCounts) {
        self.steps += other.steps;
        self.thick_diagonal_exits += other.thick_diagonal_exits;
        self.crossings += other.crossings;
        self.moves_away += other.moves_away;
    }
}

/// Outcome of one coupled run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyncReport {
    /// Hitting index of the thick diagonal (single-species networks only).
    pub tau_d: Option<u64>,
    /// First index with equal states.
    pub n0: Option<u64>,
    /// `|T_{n0}(x) - T_{n0}(y)|`.
    pub delay: Option<f64>,
    /// `T_{n0}` of the path started at `x0`.
    pub t_sync_x: Option<f64>,
    /// `T_{n0}` of the path started at `y0`.
    pub t_sync_y: Option<f64>,
    pub meeting_state: Option<State>,
    pub steps_run: u64,
    /// Birth-death pair invariants checked on every step before the meeting.
    pub invariants: PairInvariantCounts,
}

impl SyncReport {
    pub fn synchronized(&self) -> bool {
        self.n0.is_some()
    }
}

/// Runs the coupled pair until it meets on the diagonal or `n_max` steps pass.
///
/// After a meeting the pair is stepped for `verify_window` more steps and
/// equality (and, optionally, constancy of the delay) is re-checked; a
/// failure is reported as [`Error::ContractViolation`].
pub fn detect_synchronization(
    net: &ReactionNetwork,
    fiber: &NoiseFiber,
    x0: &State,
    y0: &State,
    cfg: &SyncConfig,
) -> Result<SyncReport> {
    let single = net.species_count() == 1;
    let mut walk = PairWalk::new(net, *fiber, x0, y0)?;
    let mut tau_d = None;
    let mut report = SyncReport {
        tau_d: None,
        n0: None,
        delay: None,
        t_sync_x: None,
        t_sync_y: None,
        meeting_state: None,
        steps_run: 0,
        invariants: PairInvariantCounts::default(),
    };
    loop {
        if single && tau_d.is_none() && walk.level().abs() <= 1 {
            tau_d = Some(walk.steps());
        }
        if walk.met() {
            break;
        }
        if walk.steps() >= cfg.n_max {
            report.tau_d = tau_d;
            report.steps_run = walk.steps();
            return Ok(report);
        }
        let before = if single { walk.level() } else { 0 };
        walk.advance()?;
        if single {
            report.invariants.observe(before, walk.level(), tau_d.is_some());
        }
    }

    let n0 = walk.steps();
    let (tx, ty) = (walk.a.time(), walk.b.time());
    let delay = (tx - ty).abs();
    report.tau_d = tau_d;
    report.n0 = Some(n0);
    report.delay = Some(delay);
    report.t_sync_x = Some(tx);
    report.t_sync_y = Some(ty);
    report.meeting_state = Some(State(walk.a.counts().to_vec()));

    for _ in 0..cfg.verify_window {
        walk.advance()?;
        if !walk.met() {
            return Err(Error::ContractViolation(format!(
                "pair separated at step {} after meeting at {n0}",
                walk.steps()
            )));
        }
        if cfg.check_delay {
            let r = (walk.a.time() - walk.b.time()).abs();
            let tol = 1e-9 * walk.a.time().abs().max(1.0);
            if (r - delay).abs() > tol {
                return Err(Error::ContractViolation(format!(
                    "time delay drifted from {delay} to {r} at step {}",
                    walk.steps()
                )));
            }
        }
    }
    report.steps_run = walk.steps();
    Ok(report)
}

/// Per-pair summary of a seed sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub x0: u64,
    pub y0: u64,
    pub runs: u64,
    pub synchronized: u64,
    /// Runs that did not meet within `n_max`.
    pub censored: u64,
    pub sync_frequency: f64,
    pub hit_thick_diagonal: u64,
    pub mean_tau_d: Option<f64>,
    pub mean_n0: Option<f64>,
    pub mean_delay: Option<f64>,
    pub sd_delay: Option<f64>,
    pub invariants: PairInvariantCounts,
}

fn mean_sd(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        Some((values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
    } else {
        None
    };
    (Some(mean), sd)
}

/// Synchronization statistics for every `(x0, y0)` over every seed.
///
/// Jobs run in parallel on the current rayon pool; rows come back in the
/// order of `pairs` and reductions follow the order of `seeds`, so the
/// output does not depend on the thread count.
pub fn sync_sweep(net: &ReactionNetwork, seeds: &[u64], pairs: &[(u64, u64)], cfg: &SyncConfig) -> Result<Vec<SweepRow>> {
    net.require_single_species("sync_sweep")?;
    let jobs: Vec<(usize, u64)> = (0..pairs.len())
        .flat_map(|p| seeds.iter().map(move |&s| (p, s)))
        .collect();
    let reports: Vec<SyncReport> = jobs
        .par_iter()
        .map(|&(p, seed)| {
            let (x0, y0) = pairs[p];
            detect_synchronization(net, &NoiseFiber::new(seed), &State::scalar(x0), &State::scalar(y0), cfg)
        })
        .collect::<Result<_>>()?;

    Ok(pairs
        .iter()
        .zip(reports.chunks(seeds.len().max(1)))
        .map(|(&(x0, y0), chunk)| {
            let synced: Vec<&SyncReport> = chunk.iter().filter(|r| r.synchronized()).collect();
            let taus: Vec<f64> = chunk.iter().filter_map(|r| r.tau_d).map(|t| t as f64).collect();
            let n0s: Vec<f64> = synced.iter().filter_map(|r| r.n0).map(|n| n as f64).collect();
            let delays: Vec<f64> = synced.iter().filter_map(|r| r.delay).collect();
            let (mean_delay, sd_delay) = mean_sd(&delays);
            let runs = chunk.len() as u64;
            let mut invariants = PairInvariantCounts::default();
            for r in chunk {
                invariants.merge(&r.invariants);
            }
            SweepRow {
                x0,
                y0,
                runs,
                synchronized: synced.len() as u64,
                censored: runs - synced.len() as u64,
                sync_frequency: if runs == 0 { 0.0 } else { synced.len() as f64 / runs as f64 },
                hit_thick_diagonal: taus.len() as u64,
                mean_tau_d: mean_sd(&taus).0,
                mean_n0: mean_sd(&n0s).0,
                mean_delay,
                sd_delay,
                invariants,
            }
        })
        .collect())
}
