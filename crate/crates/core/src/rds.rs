//! Cocycles of the embedded and augmented Markov chains.
//!
//! Step `n` of any trajectory consumes exactly `q_n` (reaction selection)
//! and `r_n` (waiting time) of the fiber, so two trajectories driven by the
//! same fiber see common noise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{ReactionNetwork, State};
use crate::noise::NoiseFiber;

/// Default cap on the number of jumps of a single trajectory.
pub const DEFAULT_MAX_STEPS: u64 = 10_000_000;

/// Smallest `k` (0-based) with `sum_{j<=k} alpha_j(x) > q * mu(x)`.
pub fn kappa(net: &ReactionNetwork, x: &State, q: f64) -> Result<usize> {
    net.check_dim(&x.0)?;
    let total = net.total_propensity_unchecked(&x.0);
    select(net, &x.0, q, total).ok_or_else(|| Error::Absorbing { state: x.0.clone(), step: 0 })
}

#[inline]
fn select(net: &ReactionNetwork, x: &[u64], q: f64, total: f64) -> Option<usize> {
    if !(total > 0.0) {
        return None;
    }
    let threshold = q * total;
    let mut cumulative = 0.0;
    let mut last_positive = None;
    for (k, r) in net.reactions().iter().enumerate() {
        let a = r.propensity_unchecked(x);
        if a > 0.0 {
            cumulative += a;
            if cumulative > threshold {
                return Some(k);
            }
            last_positive = Some(k);
        }
    }
    // only reachable when rounding puts q * mu at mu
    last_positive
}

/// Waiting time `log(1/r) / mu(x)`.
pub fn tau(net: &ReactionNetwork, x: &State, r: f64) -> Result<f64> {
    net.check_dim(&x.0)?;
    let total = net.total_propensity_unchecked(&x.0);
    if !(total > 0.0) {
        return Err(Error::Absorbing { state: x.0.clone(), step: 0 });
    }
    Ok(waiting_time(r, total))
}

#[inline]
fn waiting_time(r: f64, total: f64) -> f64 {
    -r.ln() / total
}

/// The one-step map `f_q(x) = x + nu_{kappa(x, q)}`.
pub fn step_embedded(net: &ReactionNetwork, x: &State, q: f64) -> Result<State> {
    net.check_dim(&x.0)?;
    let mut y = x.clone();
    step_in_place(net, &mut y.0, q, 0)?;
    Ok(y)
}

/// Applies `f_q` in place and returns the total propensity at the pre-jump state.
#[inline]
pub(crate) fn step_in_place(net: &ReactionNetwork, x: &mut [u64], q: f64, step: u64) -> Result<f64> {
    let total = net.total_propensity_unchecked(x);
    let k = select(net, x, q, total).ok_or_else(|| Error::Absorbing { state: x.to_vec(), step })?;
    net.fire_in_place(x, k)?;
    Ok(total)
}

/// Cocycle of the embedded chain: `phi^n_q(x)`, reading `q_0, ..., q_{n-1}`.
pub fn phi(net: &ReactionNetwork, fiber: &NoiseFiber, n: u64, x: &State) -> Result<State> {
    net.check_dim(&x.0)?;
    let mut y = x.clone();
    phi_in_place(net, fiber, n, &mut y.0)?;
    Ok(y)
}

pub(crate) fn phi_in_place(net: &ReactionNetwork, fiber: &NoiseFiber, n: u64, x: &mut [u64]) -> Result<()> {
    for i in 0..n {
        step_in_place(net, x, fiber.q(i as i64), i)?;
    }
    Ok(())
}

/// A point `(X_n, T_n)` of the augmented chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentedPoint {
    pub state: State,
    pub time: f64,
}

/// Cocycle of the augmented chain: `psi^n_omega(x, t)`.
pub fn psi(net: &ReactionNetwork, fiber: &NoiseFiber, n: u64, x: &State, t: f64) -> Result<AugmentedPoint> {
    net.check_dim(&x.0)?;
    let mut walk = AugmentedWalk::new(net, *fiber, x.clone(), t);
    for _ in 0..n {
        walk.advance()?;
    }
    Ok(walk.point())
}

/// Stepwise evaluation of the augmented chain on a fixed fiber.
///
/// After `k` calls to [`advance`](Self::advance) the walk holds `psi^k(x, t)`.
#[derive(Clone, Debug)]
pub struct AugmentedWalk<'a> {
    net: &'a ReactionNetwork,
    fiber: NoiseFiber,
    state: Vec<u64>,
    time: f64,
    steps: u64,
}

impl<'a> AugmentedWalk<'a> {
    pub fn new(net: &'a ReactionNetwork, fiber: NoiseFiber, x: State, t: f64) -> Self {
        AugmentedWalk {
            net,
            fiber,
            state: x.0,
            time: t,
            steps: 0,
        }
    }

    /// Applies `h_{theta^k omega}`; returns the waiting time that was added.
    #[inline]
    pub fn advance(&mut self) -> Result<f64> {
        let n = self.steps;
        let total = step_in_place(self.net, &mut self.state, self.fiber.q(n as i64), n)?;
        let dt = waiting_time(self.fiber.r(n as i64), total);
        self.time += dt;
        self.steps += 1;
        Ok(dt)
    }

    pub fn counts(&self) -> &[u64] {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn point(&self) -> AugmentedPoint {
        AugmentedPoint {
            state: State(self.state.clone()),
            time: self.time,
        }
    }

    /// Time of the next jump, or `None` at an absorbing state.
    pub fn peek_time(&self) -> Option<f64> {
        let total = self.net.total_propensity_unchecked(&self.state);
        (total > 0.0).then(|| self.time + waiting_time(self.fiber.r(self.steps as i64), total))
    }

    pub fn is_absorbing(&self) -> bool {
        !(self.net.total_propensity_unchecked(&self.state) > 0.0)
    }
}

/// Right-continuous piecewise-constant path: `X_n` on `[T_n, T_{n+1})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CtTrajectory {
    pub initial_state: State,
    pub initial_time: f64,
    /// `T_1, T_2, ...`
    pub jump_times: Vec<f64>,
    /// `X_1, X_2, ...`, the state entered at the matching jump time.
    pub states: Vec<State>,
    /// Set when the path stopped at an absorbing state before its horizon.
    pub absorbed: bool,
}

impl CtTrajectory {
    pub fn jump_count(&self) -> usize {
        self.jump_times.len()
    }

    /// `X_n` and `T_n` for `n = 0..=jump_count()`.
    pub fn point(&self, n: usize) -> Option<(&State, f64)> {
        if n == 0 {
            Some((&self.initial_state, self.initial_time))
        } else {
            Some((self.states.get(n - 1)?, self.jump_times[n - 1]))
        }
    }

    /// Value of the path at time `t`; `None` before the start time.
    pub fn state_at(&self, t: f64) -> Option<&State> {
        if t < self.initial_time {
            return None;
        }
        // number of jumps with T_n <= t
        let n = self.jump_times.partition_point(|&s| s <= t);
        Some(if n == 0 { &self.initial_state } else { &self.states[n - 1] })
    }
}

/// Continuous-time realization `Phi^t_omega(x0)` on `[0, t_end]`.
pub fn trajectory_ct(net: &ReactionNetwork, fiber: &NoiseFiber, x0: &State, t_end: f64) -> Result<CtTrajectory> {
    trajectory_ct_capped(net, fiber, x0, t_end, DEFAULT_MAX_STEPS)
}

pub fn trajectory_ct_capped(
    net: &ReactionNetwork,
    fiber: &NoiseFiber,
    x0: &State,
    t_end: f64,
    max_steps: u64,
) -> Result<CtTrajectory> {
    if !(t_end > 0.0) {
        return Err(Error::invalid(format!("t_end must be positive, got {t_end}")));
    }
    net.check_dim(&x0.0)?;
    let mut traj = empty_trajectory(x0);
    let mut walk = AugmentedWalk::new(net, *fiber, x0.clone(), 0.0);
    loop {
        let Some(next_time) = walk.peek_time() else {
            traj.absorbed = true;
            break;
        };
        if next_time > t_end {
            break;
        }
        if walk.steps() >= max_steps {
            return Err(Error::ResourceLimit(format!("trajectory exceeded {max_steps} jumps before t = {t_end}")));
        }
        walk.advance()?;
        traj.jump_times.push(walk.time());
        traj.states.push(State(walk.counts().to_vec()));
    }
    Ok(traj)
}

/// The first `steps` jumps of the augmented chain started at `(x0, 0)`.
pub fn trajectory_steps(net: &ReactionNetwork, fiber: &NoiseFiber, x0: &State, steps: u64) -> Result<CtTrajectory> {
    net.check_dim(&x0.0)?;
    let mut traj = empty_trajectory(x0);
    let mut walk = AugmentedWalk::new(net, *fiber, x0.clone(), 0.0);
    for _ in 0..steps {
        if walk.is_absorbing() {
            traj.absorbed = true;
            break;
        }
        walk.advance()?;
        traj.jump_times.push(walk.time());
        traj.states.push(State(walk.counts().to_vec()));
    }
    Ok(traj)
}

fn empty_trajectory(x0: &State) -> CtTrajectory {
    CtTrajectory {
        initial_state: x0.clone(),
        initial_time: 0.0,
        jump_times: Vec::new(),
        states: Vec::new(),
        absorbed: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Builtin, Reaction};
    use proptest::prelude::*;

    fn bd() -> ReactionNetwork {
        ReactionNetwork::builtin(Builtin::BirthDeath, &[10.0, 1.0]).unwrap()
    }

    fn schloegl() -> ReactionNetwork {
        ReactionNetwork::builtin(Builtin::Schloegl, &[6.0, 3.5, 0.4, 0.0105]).unwrap()
    }

    /// Independent selector: materialize the cumulative sums, then scan.
    fn kappa_brute(props: &[f64], q: f64) -> usize {
        let cum: Vec<f64> = props
            .iter()
            .scan(0.0, |s, a| {
                *s += a;
                Some(*s)
            })
            .collect();
        let total = *cum.last().unwrap();
        cum.iter().position(|&c| c > q * total).unwrap()
    }

    #[test]
    fn kappa_examples() {
        let s = State::scalar;
        assert_eq!(kappa(&bd(), &s(0), 0.999).unwrap(), 0);
        assert_eq!(kappa(&bd(), &s(10), 0.4999).unwrap(), 0);
        assert_eq!(kappa(&bd(), &s(10), 0.5001).unwrap(), 1);
        // cumulative (6, 16.5, 18.9, 18.963) / 18.963: 16.5 / 18.963 = 0.870116
        let props = schloegl().propensities(&s(3)).unwrap();
        assert_eq!(kappa(&schloegl(), &s(3), 0.87).unwrap(), 1);
        assert_eq!(kappa_brute(&props, 0.87), 1);
        assert_eq!(kappa(&schloegl(), &s(3), 0.871).unwrap(), 2);
        assert_eq!(kappa_brute(&props, 0.871), 2);
    }

    #[test]
    fn kappa_agrees_with_cumulative_scan() {
        let net = schloegl();
        let f = NoiseFiber::new(5);
        for x in 0..80u64 {
            let props = net.propensities(&State::scalar(x)).unwrap();
            for i in 0..50 {
                let q = f.q(i);
                assert_eq!(kappa(&net, &State::scalar(x), q).unwrap(), kappa_brute(&props, q));
            }
        }
    }

    #[test]
    fn tau_examples() {
        let r = (-20.0f64).exp();
        assert!((tau(&bd(), &State::scalar(10), r).unwrap() - 1.0).abs() < 1e-15);
        assert!((tau(&bd(), &State::scalar(0), 0.5).unwrap() - 0.0693147).abs() < 1e-7);
        let a = tau(&bd(), &State::scalar(3), 0.9).unwrap();
        let b = tau(&bd(), &State::scalar(3), 0.999999).unwrap();
        assert!(b < a && b > 0.0);
    }

    #[test]
    fn step_examples() {
        let s = State::scalar;
        let f = NoiseFiber::new(1);
        for i in 0..20 {
            assert_eq!(step_embedded(&bd(), &s(0), f.q(i)).unwrap(), s(1));
        }
        assert_eq!(step_embedded(&bd(), &s(10), 0.6).unwrap(), s(9));
        assert_eq!(step_embedded(&schloegl(), &s(3), 0.87).unwrap(), s(2));
        assert_eq!(step_embedded(&schloegl(), &s(3), 0.871).unwrap(), s(4));
    }

    #[test]
    fn absorbing_state_is_an_error() {
        // S -> 0 only: x = 0 is absorbing
        let net = ReactionNetwork::new("decay", vec!["S".into()], vec![Reaction::new(vec![1], vec![0], 1.0).unwrap()])
            .unwrap();
        let f = NoiseFiber::new(3);
        let err = phi(&net, &f, 10, &State::scalar(4)).unwrap_err();
        assert!(matches!(err, Error::Absorbing { step: 4, .. }), "{err:?}");
        assert!(kappa(&net, &State::scalar(0), 0.5).is_err());
        assert!(tau(&net, &State::scalar(0), 0.5).is_err());
        let traj = trajectory_ct(&net, &f, &State::scalar(4), 1e6).unwrap();
        assert!(traj.absorbed);
        assert_eq!(traj.states.last().unwrap(), &State::scalar(0));
    }

    #[test]
    fn phi_zero_steps_is_identity() {
        let f = NoiseFiber::new(11);
        assert_eq!(phi(&bd(), &f, 0, &State::scalar(7)).unwrap(), State::scalar(7));
        let p = psi(&bd(), &f, 0, &State::scalar(7), 2.5).unwrap();
        assert_eq!((p.state, p.time), (State::scalar(7), 2.5));
    }

    #[test]
    fn psi_time_is_sum_of_drawn_waiting_times() {
        let net = schloegl();
        let f = NoiseFiber::new(77);
        let x0 = State::scalar(12);
        let mut x = x0.clone();
        let mut t = 0.0;
        for j in 0..40 {
            t += tau(&net, &x, f.r(j)).unwrap();
            x = step_embedded(&net, &x, f.q(j)).unwrap();
        }
        let p = psi(&net, &f, 40, &x0, 0.0).unwrap();
        assert_eq!(p.state, x);
        assert_eq!(p.time.to_bits(), t.to_bits());
    }

    #[test]
    fn trajectory_reconstruction() {
        let f = NoiseFiber::new(4);
        let traj = trajectory_ct(&bd(), &f, &State::scalar(5), 3.0).unwrap();
        assert_eq!(traj.state_at(0.0), Some(&State::scalar(5)));
        assert!(traj.jump_times.windows(2).all(|w| w[0] < w[1]));
        assert!(*traj.jump_times.last().unwrap() <= 3.0);
        for n in 0..traj.jump_count() {
            let (x, t) = traj.point(n).unwrap();
            assert_eq!(traj.state_at(t), Some(x));
            let next = traj.jump_times[n];
            assert_eq!(traj.state_at(0.5 * (t + next)), Some(x));
        }
        let steps = trajectory_steps(&bd(), &f, &State::scalar(5), 100).unwrap();
        assert_eq!(steps.jump_count(), 100);
        assert_eq!(steps.states[..traj.jump_count()], traj.states[..]);
        assert!(trajectory_ct(&bd(), &f, &State::scalar(5), 0.0).is_err());
        assert!(matches!(
            trajectory_ct_capped(&bd(), &f, &State::scalar(5), 1e9, 10),
            Err(Error::ResourceLimit(_))
        ));
    }

    #[test]
    fn even_distance_paths_become_time_shifted_copies() {
        let net = bd();
        let f = NoiseFiber::new(8);
        let a = trajectory_steps(&net, &f, &State::scalar(5), 2000).unwrap();
        let b = trajectory_steps(&net, &f, &State::scalar(15), 2000).unwrap();
        let n0 = a.states.iter().zip(&b.states).position(|(x, y)| x == y).expect("paths meet");
        assert_eq!(a.states[n0..], b.states[n0..]);
        let r0 = a.jump_times[n0] - b.jump_times[n0];
        for n in n0..2000 {
            let r = a.jump_times[n] - b.jump_times[n];
            assert!((r - r0).abs() < 1e-9, "delay drifted at {n}");
        }
    }

    proptest! {
        #[test]
        fn cocycle_property(seed: u64, x in 0u64..60, n in 0u64..50, m in 0u64..50, schl: bool) {
            let net = if schl { schloegl() } else { bd() };
            let f = NoiseFiber::new(seed);
            let x = State::scalar(x);
            let lhs = phi(&net, &f, n + m, &x).unwrap();
            let mid = phi(&net, &f, m, &x).unwrap();
            let rhs = phi(&net, &f.shift(m as i64).unwrap(), n, &mid).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn birth_death_parity(seed: u64, x in 0u64..100, n in 0u64..200) {
            let y = phi(&bd(), &NoiseFiber::new(seed), n, &State::scalar(x)).unwrap();
            prop_assert_eq!(y.0[0] % 2, (x + n) % 2);
        }

        #[test]
        fn psi_projects_to_phi(seed: u64, x in 0u64..60, n in 0u64..80, t in 0.0f64..100.0) {
            let net = schloegl();
            let f = NoiseFiber::new(seed);
            let x = State::scalar(x);
            let p = psi(&net, &f, n, &x, t).unwrap();
            let p0 = psi(&net, &f, n, &x, 0.0).unwrap();
            prop_assert_eq!(&p.state, &phi(&net, &f, n, &x).unwrap());
            prop_assert!((p.time - p0.time - t).abs() <= 1e-9 * (1.0 + p.time));
        }
    }
}
