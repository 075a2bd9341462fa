//! Data files behind the reference figures. Plotting is left to external tools.

use std::path::Path;

use anyhow::Result;
use rdsjump_core::oracle::rre_integrate;
use rdsjump_core::twopoint::{detect_synchronization, SyncConfig};
use rdsjump_core::{stationary_distribution, trajectory_ct, Builtin, NoiseFiber, ReactionNetwork, State};

use crate::commands::{chain_for, distribution_table, pair_table, stability_name, trajectory_table};
use crate::output::{row, Session, Table};
use crate::{Experiment, Which};

const STATIONARY_TOL: f64 = 1e-13;

/// Even- and odd-distance starting pairs for the realization figures.
const BD_PAIRS: [(&str, (u64, u64)); 2] = [("even", (5, 15)), ("odd", (5, 10))];
const SCHLOEGL_PAIRS: [(&str, (u64, u64)); 2] = [("even", (5, 25)), ("odd", (5, 24))];

const RRE_STARTS: [(Builtin, [f64; 3]); 2] = [
    (Builtin::BirthDeath, [0.0, 5.0, 20.0]),
    // on both sides of the unstable root near 9.62
    (Builtin::Schloegl, [0.0, 9.5, 40.0]),
];

fn builtin(b: Builtin) -> Result<ReactionNetwork> {
    Ok(ReactionNetwork::builtin(b, b.default_rates())?)
}

pub fn run(argv: Vec<String>, experiment: Experiment, seed: u64, out_dir: &Path) -> Result<()> {
    let mut s = Session::new(argv, &format!("report {}", name(experiment)));
    s.use_dir(out_dir)?;
    match experiment {
        Experiment::Fig1 => fig1(&mut s, out_dir)?,
        Experiment::Fig2 => realizations(&mut s, out_dir, "fig2", Builtin::BirthDeath, &BD_PAIRS, seed, 10.0)?,
        Experiment::Fig3 => pair_paths(&mut s, out_dir, "fig3", Builtin::BirthDeath, &BD_PAIRS, seed, 300)?,
        Experiment::Fig5 => fig5(&mut s, out_dir, seed)?,
        Experiment::Fig6 => stationary_set(&mut s, out_dir, "fig6", Builtin::BirthDeath, 100, false)?,
        Experiment::Fig7 => {
            realizations(&mut s, out_dir, "fig7", Builtin::Schloegl, &SCHLOEGL_PAIRS, seed, 10.0)?;
            pair_paths(&mut s, out_dir, "fig7", Builtin::Schloegl, &SCHLOEGL_PAIRS, seed, 1000)?;
        }
        Experiment::Fig8 => stationary_set(&mut s, out_dir, "fig8", Builtin::Schloegl, 120, true)?,
    }
    s.finish()
}

fn name(e: Experiment) -> &'static str {
    match e {
        Experiment::Fig1 => "fig1",
        Experiment::Fig2 => "fig2",
        Experiment::Fig3 => "fig3",
        Experiment::Fig5 => "fig5",
        Experiment::Fig6 => "fig6",
        Experiment::Fig7 => "fig7",
        Experiment::Fig8 => "fig8",
    }
}

fn fig1(s: &mut Session, dir: &Path) -> Result<()> {
    let mut eq = Table::new(&["model", "root", "stability"]);
    for (model, starts) in RRE_STARTS {
        let rates = model.default_rates();
        let mut t = Table::new(&["c0", "t", "c"]);
        for c0 in starts {
            let path = rre_integrate(model, rates, c0, 10.0, 1e-3)?;
            for (time, c) in path.times.iter().zip(&path.values).step_by(10) {
                t.push(row![c0, *time, *c]);
            }
        }
        s.emit(Some(&dir.join(format!("fig1_rre_{}.csv", model.name()))), &t)?;
        for e in rdsjump_core::oracle::rre_equilibria(model, rates)? {
            eq.push(row![model.name(), e.root, stability_name(e.stability)]);
        }
    }
    s.emit(Some(&dir.join("fig1_equilibria.csv")), &eq)?;
    s.summary("t_end", 10.0)?;
    s.summary("dt", 1e-3)
}

fn realizations(
    s: &mut Session,
    dir: &Path,
    tag: &str,
    model: Builtin,
    pairs: &[(&str, (u64, u64))],
    seed: u64,
    t_end: f64,
) -> Result<()> {
    let net = builtin(model)?;
    s.network(&net)?;
    s.seeds(seed, 1);
    let fiber = NoiseFiber::new(seed);
    for &(label, (x0, y0)) in pairs {
        for (which, start) in [("x", x0), ("y", y0)] {
            let traj = trajectory_ct(&net, &fiber, &State::scalar(start), t_end)?;
            s.emit(
                Some(&dir.join(format!("{tag}_ct_{label}_{which}{start}.csv"))),
                &trajectory_table(&net, &traj),
            )?;
        }
    }
    s.summary("t_end", t_end)
}

fn pair_paths(
    s: &mut Session,
    dir: &Path,
    tag: &str,
    model: Builtin,
    pairs: &[(&str, (u64, u64))],
    seed: u64,
    n_max: u64,
) -> Result<()> {
    let net = builtin(model)?;
    s.network(&net)?;
    s.seeds(seed, 1);
    let fiber = NoiseFiber::new(seed);
    for &(label, (x0, y0)) in pairs {
        let (t, met) = pair_table(&net, &fiber, x0, y0, n_max)?;
        s.emit(Some(&dir.join(format!("{tag}_pair_{label}.csv"))), &t)?;
        s.summary(&format!("{label}_first_meeting"), met)?;
    }
    s.summary("n_max", n_max)
}

/// n0, T_syn, T'_syn and R = |T_syn - T'_syn| for the even birth-death pair.
fn fig5(s: &mut Session, dir: &Path, seed: u64) -> Result<()> {
    let net = builtin(Builtin::BirthDeath)?;
    s.network(&net)?;
    s.seeds(seed, 1);
    let (x0, y0) = BD_PAIRS[0].1;
    let cfg = SyncConfig::with_n_max(100_000);
    let r = detect_synchronization(&net, &NoiseFiber::new(seed), &State::scalar(x0), &State::scalar(y0), &cfg)?;
    let mut t = Table::new(&["seed", "x0", "y0", "tau_d", "n0", "T_syn", "T_syn_prime", "R", "meeting_state"]);
    t.push(row![
        seed,
        x0,
        y0,
        r.tau_d,
        r.n0,
        r.t_sync_x,
        r.t_sync_y,
        r.delay,
        r.meeting_state.as_ref().and_then(State::as_scalar),
    ]);
    s.emit(Some(&dir.join("fig5.csv")), &t)?;
    s.summary("synchronized", r.synchronized())
}

fn stationary_set(s: &mut Session, dir: &Path, tag: &str, model: Builtin, nmax: u64, log_column: bool) -> Result<()> {
    let net = builtin(model)?;
    s.network(&net)?;
    let off_name = if model == Builtin::Schloegl { "pi_S" } else { "pi_off_diagonal" };
    for (which, file) in [(Which::One, "rho"), (Which::TwoDiag, "pi_diagonal"), (Which::TwoOff, off_name)] {
        let chain = chain_for(&net, nmax, which)?;
        let dist = stationary_distribution(&chain, STATIONARY_TOL)?;
        s.emit(Some(&dir.join(format!("{tag}_{file}.csv"))), &distribution_table(&dist, log_column))?;
        s.summary(&format!("{file}_states"), chain.len())?;
    }
    s.summary("nmax", nmax)
}
