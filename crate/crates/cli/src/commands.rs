use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use rdsjump_core::attractor::{sample_measure_stats, verify_periodic_orbit, StabilizationRule};
use rdsjump_core::oracle::{lemma_recursion, rre_equilibria, rre_integrate, Stability};
use rdsjump_core::stationary::{stationarity_residual, zeta_partial_sums, TruncatedChain, DEFAULT_STATIONARY_TOL};
use rdsjump_core::rds::trajectory_steps;
use rdsjump_core::twopoint::{sync_sweep as run_sweep, PairWalk, SyncConfig};
use rdsjump_core::{
    attractor_fiber, build_one_point_chain, build_two_point_chain, stationary_distribution, trajectory_ct,
    AttractorFiber, Builtin, CtTrajectory, DistributionVector, NoiseFiber, PairClass,
    PullbackConfig, ReactionNetwork, State,
};

use crate::output::{row, Session, Table};
use crate::{NetArgs, PullbackArgs, Rule, Which};

/// Pairs used when `sync-sweep` is given none: three even and two odd distances.
pub const DEFAULT_PAIRS: [(u64, u64); 5] = [(0, 2), (5, 15), (1, 7), (0, 1), (5, 10)];

fn seed_range(first: u64, count: u64) -> Result<Vec<u64>> {
    if count == 0 {
        bail!("--seeds must be positive");
    }
    let last = first.checked_add(count - 1).context("seed range overflows u64")?;
    Ok((first..=last).collect())
}

pub fn trajectory_table(net: &ReactionNetwork, traj: &CtTrajectory) -> Table {
    let mut header = vec!["n".to_string(), "T_n".to_string()];
    if net.species_count() == 1 {
        header.push("X_n".into());
    } else {
        header.extend(net.species().iter().cloned());
    }
    let mut t = Table::new(&header);
    for n in 0..=traj.jump_count() {
        let (x, time) = traj.point(n).expect("n within jump count");
        let mut r = row![n, time];
        r.extend(x.counts().iter().map(|c| c.to_string()));
        t.push(r);
    }
    t
}

pub fn simulate(
    argv: Vec<String>,
    net_args: &NetArgs,
    seed: u64,
    x0: Vec<u64>,
    steps: Option<u64>,
    t_end: Option<f64>,
    out: Option<&Path>,
) -> Result<()> {
    let net = net_args.load()?;
    let mut s = Session::new(argv, "simulate");
    s.network(&net)?;
    s.seeds(seed, 1);
    let fiber = NoiseFiber::new(seed);
    let x0 = State::new(x0);
    let traj = match (steps, t_end) {
        (_, Some(t)) => trajectory_ct(&net, &fiber, &x0, t)?,
        (Some(n), None) => trajectory_steps(&net, &fiber, &x0, n)?,
        (None, None) => bail!("give either --steps or --t-end"),
    };
    s.emit(out, &trajectory_table(&net, &traj))?;
    s.summary("jumps", traj.jump_count())?;
    s.summary("absorbed", traj.absorbed)?;
    s.finish()
}

pub fn pair_table(net: &ReactionNetwork, fiber: &NoiseFiber, x0: u64, y0: u64, n_max: u64) -> Result<(Table, Option<u64>)> {
    if net.species_count() != 1 {
        bail!("two-point output needs a single-species network");
    }
    let mut walk = PairWalk::new(net, *fiber, &State::scalar(x0), &State::scalar(y0))?;
    let mut t = Table::new(&["n", "x_n", "y_n", "d_n", "T_n_x", "T_n_y"]);
    let mut met = None;
    loop {
        let (x, y) = (walk.a.counts()[0], walk.b.counts()[0]);
        if met.is_none() && x == y {
            met = Some(walk.steps());
        }
        t.push(row![walk.steps(), x, y, x as i64 - y as i64, walk.a.time(), walk.b.time()]);
        if walk.steps() >= n_max {
            break;
        }
        walk.advance()?;
    }
    Ok((t, met))
}

pub fn twopoint(
    argv: Vec<String>,
    net_args: &NetArgs,
    seed: u64,
    x0: u64,
    y0: u64,
    n_max: u64,
    out: Option<&Path>,
) -> Result<()> {
    let net = net_args.load()?;
    let mut s = Session::new(argv, "twopoint");
    s.network(&net)?;
    s.seeds(seed, 1);
    let (t, met) = pair_table(&net, &NoiseFiber::new(seed), x0, y0, n_max)?;
    s.emit(out, &t)?;
    s.summary("first_meeting", met)?;
    s.finish()
}

/// Reads pairs from a file if `spec` names one, else from `x:y,x:y`.
pub fn parse_pairs(spec: &str) -> Result<Vec<(u64, u64)>> {
    let path = Path::new(spec);
    let (text, sep): (String, &[char]) = if path.is_file() {
        (std::fs::read_to_string(path).with_context(|| format!("reading {spec}"))?, &['\n'])
    } else {
        (spec.to_string(), &[','])
    };
    let mut pairs = Vec::new();
    for (i, item) in text.split(sep).map(str::trim).enumerate() {
        if item.is_empty() || item.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = item.split([',', ':', ' ', '\t']).filter(|f| !f.is_empty()).collect();
        let parsed = match fields.as_slice() {
            [a, b] => a.parse::<u64>().ok().zip(b.parse::<u64>().ok()),
            _ => None,
        };
        match parsed {
            Some(p) => pairs.push(p),
            // tolerate a header line
            None if i == 0 && path.is_file() => continue,
            None => bail!("cannot read pair `{item}`"),
        }
    }
    if pairs.is_empty() {
        bail!("no pairs given");
    }
    Ok(pairs)
}

pub fn sync_sweep(
    argv: Vec<String>,
    net_args: &NetArgs,
    seed: u64,
    seeds: u64,
    pairs: Option<&str>,
    n_max: u64,
    out: Option<&Path>,
) -> Result<()> {
    let net = net_args.load()?;
    let pairs = match pairs {
        Some(p) => parse_pairs(p)?,
        None => DEFAULT_PAIRS.to_vec(),
    };
    let mut s = Session::new(argv, "sync-sweep");
    s.network(&net)?;
    s.seeds(seed, seeds);
    let rows = run_sweep(&net, &seed_range(seed, seeds)?, &pairs, &SyncConfig::with_n_max(n_max))?;
    let mut t = Table::new(&[
        "x0",
        "y0",
        "runs",
        "synchronized",
        "censored",
        "sync_frequency",
        "hit_thick_diagonal",
        "mean_tau_d",
        "mean_n0",
        "mean_delay",
        "sd_delay",
        "pair_steps",
        "invariant_violations",
    ]);
    let mut violations = 0;
    for r in &rows {
        violations += r.invariants.violations();
        t.push(row![
            r.x0,
            r.y0,
            r.runs,
            r.synchronized,
            r.censored,
            r.sync_frequency,
            r.hit_thick_diagonal,
            r.mean_tau_d,
            r.mean_n0,
            r.mean_delay,
            r.sd_delay,
            r.invariants.steps,
            r.invariants.violations(),
        ]);
    }
    s.emit(out, &t)?;
    s.summary("n_max", n_max)?;
    s.summary("invariant_violations", violations)?;
    s.finish()
}

pub fn distribution_table(dist: &DistributionVector, log_column: bool) -> Table {
    let dim = dist.states.first().map_or(1, Vec::len);
    let mut header: Vec<&str> = match dim {
        1 => vec!["x"],
        2 => vec!["x", "y"],
        _ => vec![],
    };
    let names: Vec<String> = (0..dim).map(|i| format!("s{i}")).collect();
    if header.is_empty() {
        header = names.iter().map(String::as_str).collect();
    }
    header.push("weight");
    if log_column {
        header.push("log10_weight");
    }
    let mut t = Table::new(&header);
    for (state, &w) in dist.states.iter().zip(&dist.weights) {
        let mut r: Vec<String> = state.iter().map(u64::to_string).collect();
        r.extend(row![w]);
        if log_column {
            r.extend(row![if w > 0.0 { Some(w.log10()) } else { None }]);
        }
        t.push(r);
    }
    t
}

pub fn chain_for(net: &ReactionNetwork, nmax: u64, which: Which) -> Result<TruncatedChain> {
    Ok(match which {
        Which::One => build_one_point_chain(net, nmax)?,
        Which::TwoDiag => build_two_point_chain(net, nmax, PairClass::Diagonal)?,
        Which::TwoOff => build_two_point_chain(net, nmax, PairClass::off_diagonal())?,
    })
}

pub fn stationary(
    argv: Vec<String>,
    net_args: &NetArgs,
    nmax: u64,
    which: Which,
    tol: f64,
    out: Option<&Path>,
) -> Result<()> {
    let net = net_args.load()?;
    let mut s = Session::new(argv, "stationary");
    s.network(&net)?;
    let chain = chain_for(&net, nmax, which)?;
    let rho = stationary_distribution(&chain, tol)?;
    s.emit(out, &distribution_table(&rho, false))?;
    s.summary("states", chain.len())?;
    s.summary("residual", stationarity_residual(&chain, &rho.weights))?;
    s.summary("tail_mass_estimate", chain.tail_mass_estimate)?;
    if chain.truncation_warning {
        eprintln!("warning: stationary mass at the truncation bound exceeds the tail limit; raise --nmax");
    }
    s.finish()
}

pub fn zeta(argv: Vec<String>, net_args: &NetArgs, xmax: u64, out: Option<&Path>) -> Result<()> {
    let net = net_args.load()?;
    let mut s = Session::new(argv, "zeta");
    s.network(&net)?;
    let z = zeta_partial_sums(&net, xmax)?;
    let mut t = Table::new(&["x", "log_term", "term", "partial_sum"]);
    for (i, ((l, v), p)) in z.log_terms.iter().zip(&z.terms).zip(&z.partial_sums).enumerate() {
        t.push(row![i as u64 + 1, *l, *v, *p]);
    }
    s.emit(out, &t)?;
    s.summary("converged_at", z.converged_at)?;
    s.summary("sum", z.sum())?;
    s.finish()
}

fn pullback_config(net: &ReactionNetwork, args: &PullbackArgs) -> Result<PullbackConfig> {
    let cfg = PullbackConfig {
        rule: match args.rule {
            Rule::Bracketed => StabilizationRule::Bracketed,
            Rule::Window => StabilizationRule::Window,
        },
        ceiling: args.ceiling,
        ..PullbackConfig::new(args.n_max, args.window)
    };
    Ok(cfg.resolved(net)?)
}

pub fn fiber_table(fibers: &[(u64, AttractorFiber)]) -> Table {
    let mut t = Table::new(&["seed", "a0", "a1", "depth", "converged"]);
    for (seed, f) in fibers {
        t.push(row![*seed, f.a0, f.a1, f.stabilization_depth, f.converged]);
    }
    t
}

pub fn attractor(
    argv: Vec<String>,
    net_args: &NetArgs,
    pullback: &PullbackArgs,
    seed: u64,
    seeds: u64,
    orbit_shifts: u64,
    out: Option<&Path>,
) -> Result<()> {
    let net = net_args.load()?;
    let cfg = pullback_config(&net, pullback)?;
    let mut s = Session::new(argv, "attractor");
    s.network(&net)?;
    s.seeds(seed, seeds);
    let seeds = seed_range(seed, seeds)?;
    let fibers = seeds
        .par_iter()
        .map(|&sd| attractor_fiber(&net, &NoiseFiber::new(sd), &cfg).map(|f| (sd, f)))
        .collect::<rdsjump_core::Result<Vec<_>>>()?;
    s.emit(out, &fiber_table(&fibers))?;

    let mut histogram: BTreeMap<u64, u64> = BTreeMap::new();
    for (_, f) in fibers.iter().filter(|(_, f)| f.converged) {
        *histogram.entry(f.distance()).or_insert(0) += 1;
    }
    s.summary("converged", fibers.iter().filter(|(_, f)| f.converged).count())?;
    s.summary("distance_histogram", &histogram)?;
    s.summary("ceiling", cfg.ceiling)?;
    if orbit_shifts > 0 {
        let reports = seeds
            .par_iter()
            .map(|&sd| verify_periodic_orbit(&net, &NoiseFiber::new(sd), orbit_shifts, &cfg))
            .collect::<rdsjump_core::Result<Vec<_>>>()?;
        let failed: Vec<u64> = reports.iter().filter(|r| !r.passed()).map(|r| r.seed).collect();
        s.summary("orbit_shifts", orbit_shifts)?;
        s.summary("orbit_failed_seeds", &failed)?;
    }
    s.finish()
}

pub fn sample_measure(
    argv: Vec<String>,
    net_args: &NetArgs,
    pullback: &PullbackArgs,
    seed: u64,
    seeds: u64,
    reference_nmax: u64,
    out: Option<&Path>,
) -> Result<()> {
    let net = net_args.load()?;
    let cfg = pullback_config(&net, pullback)?;
    let mut s = Session::new(argv, "sample-measure");
    s.network(&net)?;
    s.seeds(seed, seeds);
    let rho = stationary_distribution(&build_one_point_chain(&net, reference_nmax)?, DEFAULT_STATIONARY_TOL)?;
    let report = sample_measure_stats(&net, &seed_range(seed, seeds)?, &cfg, Some(&rho))?;

    let mut support: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    for (st, &w) in report.measure.states.iter().zip(&report.measure.weights) {
        support.entry(st[0]).or_default().0 = w;
    }
    for (st, &w) in rho.states.iter().zip(&rho.weights) {
        support.entry(st[0]).or_default().1 = w;
    }
    let mut t = Table::new(&["x", "weight", "rho"]);
    for (x, (w, r)) in support {
        t.push(row![x, w, r]);
    }
    s.emit(out, &t)?;
    s.summary("converged", report.converged)?;
    s.summary("excluded", report.excluded)?;
    s.summary("tv_to_rho", report.tv_to_reference)?;
    s.finish()
}

pub fn lemma(argv: Vec<String>, alpha: f64, d: i64, p0: f64, xmax: usize, out: Option<&Path>) -> Result<()> {
    let mut s = Session::new(argv, "oracle lemma");
    let trace = lemma_recursion(alpha, d, p0, xmax)?;
    let mut t = Table::new(&["x", "p_x", "log_abs"]);
    for (x, (v, l)) in trace.values.iter().zip(&trace.log_abs).enumerate() {
        // log|0| is reported as an empty cell
        t.push(row![x, *v, l.is_finite().then_some(*l)]);
    }
    s.emit(out, &t)?;
    s.summary("first_above_1e6", trace.first_exceeding(1e6))?;
    s.finish()
}

fn model_rates(model: Builtin, rates: Option<Vec<f64>>) -> Vec<f64> {
    rates.unwrap_or_else(|| model.default_rates().to_vec())
}

pub fn rre(
    argv: Vec<String>,
    model: Builtin,
    rates: Option<Vec<f64>>,
    c0: f64,
    t_end: f64,
    dt: f64,
    out: Option<&Path>,
) -> Result<()> {
    let rates = model_rates(model, rates);
    let mut s = Session::new(argv, "oracle rre");
    s.network(&ReactionNetwork::builtin(model, &rates)?)?;
    let path = rre_integrate(model, &rates, c0, t_end, dt)?;
    let mut t = Table::new(&["t", "c"]);
    for (time, c) in path.times.iter().zip(&path.values) {
        t.push(row![*time, *c]);
    }
    s.emit(out, &t)?;
    s.summary("c_end", path.last())?;
    s.finish()
}

pub fn stability_name(st: Stability) -> &'static str {
    match st {
        Stability::Stable => "stable",
        Stability::Unstable => "unstable",
        Stability::Degenerate => "degenerate",
    }
}

pub fn equilibria_table(model: Builtin, rates: &[f64]) -> Result<Table> {
    let mut t = Table::new(&["root", "stability"]);
    for e in rre_equilibria(model, rates)? {
        t.push(row![e.root, stability_name(e.stability)]);
    }
    Ok(t)
}

pub fn equilibria(argv: Vec<String>, model: Builtin, rates: Option<Vec<f64>>, out: Option<&Path>) -> Result<()> {
    let rates = model_rates(model, rates);
    let mut s = Session::new(argv, "oracle equilibria");
    s.network(&ReactionNetwork::builtin(model, &rates)?)?;
    s.emit(out, &equilibria_table(model, &rates)?)?;
    s.finish()
}
