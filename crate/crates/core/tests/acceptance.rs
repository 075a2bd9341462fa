//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//!     cargo test -p rdsjump-core --test acceptance
//!     cargo test -p rdsjump-core --test acceptance -- attractor   # substring filter

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

use rdsjump_core::attractor::{sample_measure_stats, verify_periodic_orbit, PullbackConfig};
use rdsjump_core::oracle::{
    birth_death_stationary_product, enumerate_two_point_chain, lemma_recursion, rre_equilibria, Stability,
};
use rdsjump_core::rds::{phi, step_embedded};
use rdsjump_core::stationary::{build_one_point_chain, stationary_distribution, zeta_partial_sums};
use rdsjump_core::twopoint::{sync_sweep, SweepRow, SyncConfig};
use rdsjump_core::{Builtin, NoiseFiber, ReactionNetwork, State};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

const BD_RATES: [f64; 2] = [10.0, 1.0];
const SCHLOEGL_RATES: [f64; 4] = [6.0, 3.5, 0.4, 0.0105];

fn bd() -> ReactionNetwork {
    ReactionNetwork::builtin(Builtin::BirthDeath, &BD_RATES).unwrap()
}

fn schloegl() -> ReactionNetwork {
    ReactionNetwork::builtin(Builtin::Schloegl, &SCHLOEGL_RATES).unwrap()
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn within(budget: Duration, start: Instant) -> Result<(), String> {
    let took = start.elapsed();
    if took > budget {
        Err(format!("took {took:.2?}, budget {budget:?}"))
    } else {
        Ok(())
    }
}

fn cocycle_law() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(0xC0C1_C1E5);
    let mut checks = 0;
    for (net, x_hi) in [(bd(), 60u64), (schloegl(), 150)] {
        for _ in 0..5_000 {
            let fiber = NoiseFiber::new(rng.random()).shift(rng.random_range(-1_000..=1_000)).map_err(err)?;
            let x = State::scalar(rng.random_range(0..=x_hi));
            let n = rng.random_range(0..=50u64);
            let m = rng.random_range(0..=50u64);
            let lhs = phi(&net, &fiber, n + m, &x).map_err(err)?;
            let mid = phi(&net, &fiber, m, &x).map_err(err)?;
            let rhs = phi(&net, &fiber.shift(m as i64).map_err(err)?, n, &mid).map_err(err)?;
            ensure!(lhs == rhs, "seed {} x {x} n {n} m {m}: {lhs} != {rhs}", fiber.seed());
            checks += 1;
        }
    }
    within(Duration::from_secs(5), start)?;
    Ok(format!("{checks} exact checks"))
}

/// Upward probability written out from the rate laws.
fn reference_up(model: Builtin, x: u64) -> f64 {
    let x = x as f64;
    match model {
        Builtin::BirthDeath => BD_RATES[0] / (BD_RATES[0] + BD_RATES[1] * x),
        Builtin::Schloegl => {
            let [g1, g2, g3, g4] = SCHLOEGL_RATES;
            let up = g1 + g3 * x * (x - 1.0);
            up / (up + g2 * x + g4 * x * (x - 1.0) * (x - 2.0))
        }
    }
}

fn transition_statistics() -> Outcome {
    const DRAWS: i64 = 1_000_000;
    let mut worst: f64 = 0.0;
    for (model, net) in [(Builtin::BirthDeath, bd()), (Builtin::Schloegl, schloegl())] {
        for x in [0u64, 5, 10, 25] {
            let fiber = NoiseFiber::new(0x57A7 + x);
            let from = State::scalar(x);
            let mut ups = 0u64;
            for i in 0..DRAWS {
                if step_embedded(&net, &from, fiber.q(i)).map_err(err)?.counts()[0] == x + 1 {
                    ups += 1;
                }
            }
            let p = reference_up(model, x);
            let freq = ups as f64 / DRAWS as f64;
            let se = (p * (1.0 - p) / DRAWS as f64).sqrt();
            let z = if se > 0.0 { (freq - p).abs() / se } else if freq == p { 0.0 } else { f64::INFINITY };
            ensure!(z <= 3.0, "{model} x={x}: frequency {freq} vs {p} ({z:.2} SE)");
            worst = worst.max(z);
        }
    }
    Ok(format!("8 cases, largest deviation {worst:.2} SE"))
}

static SWEEP: OnceLock<Result<(Vec<SweepRow>, Duration), String>> = OnceLock::new();

fn birth_death_sweep() -> Result<&'static (Vec<SweepRow>, Duration), String> {
    SWEEP
        .get_or_init(|| {
            let start = Instant::now();
            let seeds: Vec<u64> = (0..1_000).collect();
            let pairs = [(0, 2), (5, 15), (1, 7), (0, 1), (5, 10)];
            let rows = sync_sweep(&bd(), &seeds, &pairs, &SyncConfig::with_n_max(100_000)).map_err(err)?;
            Ok((rows, start.elapsed()))
        })
        .as_ref()
        .map_err(Clone::clone)
}

fn partial_synchronization() -> Outcome {
    let (rows, took) = birth_death_sweep()?;
    ensure!(*took < Duration::from_secs(60), "sweep took {took:.2?}, budget 60s");
    let mut summary = Vec::new();
    for row in rows {
        let same_parity = (row.x0 + row.y0) % 2 == 0;
        if same_parity {
            ensure!(
                row.sync_frequency >= 0.999,
                "({},{}) synchronized in {}/{} runs",
                row.x0,
                row.y0,
                row.synchronized,
                row.runs
            );
        } else {
            ensure!(row.synchronized == 0, "({},{}) synchronized {} times", row.x0, row.y0, row.synchronized);
            ensure!(
                row.hit_thick_diagonal == row.runs,
                "({},{}) reached distance 1 in only {}/{} runs",
                row.x0,
                row.y0,
                row.hit_thick_diagonal,
                row.runs
            );
            ensure!(
                row.invariants.thick_diagonal_exits == 0,
                "({},{}) left distance 1 {} times",
                row.x0,
                row.y0,
                row.invariants.thick_diagonal_exits
            );
        }
        summary.push(format!("({},{}): {:.3}", row.x0, row.y0, row.sync_frequency));
    }
    Ok(format!("{} in {took:.2?}", summary.join(", ")))
}

fn thick_diagonal_invariance() -> Outcome {
    let (rows, _) = birth_death_sweep()?;
    let mut total = rdsjump_core::twopoint::PairInvariantCounts::default();
    for row in rows {
        total.merge(&row.invariants);
    }
    ensure!(total.steps >= 100_000_000, "only {} pair steps observed", total.steps);
    ensure!(
        total.violations() == 0,
        "exits {}, crossings {}, moves away {}",
        total.thick_diagonal_exits,
        total.crossings,
        total.moves_away
    );
    Ok(format!("{} pair steps, 0 violations", total.steps))
}

fn stationary_oracle() -> Outcome {
    let start = Instant::now();
    let chain = build_one_point_chain(&bd(), 200).map_err(err)?;
    let rho = stationary_distribution(&chain, 1e-13).map_err(err)?;
    let product = birth_death_stationary_product(BD_RATES[0], BD_RATES[1], 200).map_err(err)?;
    let l1 = rho.l1_distance(&product);
    ensure!(l1 <= 1e-8, "L1 distance {l1:e}");
    let zeta = zeta_partial_sums(&bd(), 200).map_err(err)?;
    let at = zeta.converged_at.ok_or("zeta partial sums did not converge")?;
    let tail = zeta.terms.last().unwrap() / zeta.sum();
    ensure!(tail < 1e-12, "last zeta term relative to sum is {tail:e}");
    within(Duration::from_secs(1), start)?;
    Ok(format!("L1 {l1:.1e}, zeta converged at x={at}, final term/sum {tail:.1e}"))
}

fn attractor_structure() -> Outcome {
    let start = Instant::now();
    let net = bd();
    let cfg = PullbackConfig::new(10_000, 10).resolved(&net).map_err(err)?;
    let mut fibers = 0;
    for seed in 0..100u64 {
        let rep = verify_periodic_orbit(&net, &NoiseFiber::new(seed), 50, &cfg).map_err(err)?;
        ensure!(rep.nonconverged == 0, "seed {seed}: {} fibers did not converge", rep.nonconverged);
        for (k, f) in rep.fibers.iter().enumerate() {
            ensure!(f.distance() == 1, "seed {seed} shift {k}: fiber ({}, {})", f.a0, f.a1);
        }
        ensure!(rep.mismatches.is_empty(), "seed {seed}: {:?}", rep.mismatches[0]);
        fibers += rep.fibers.len();
    }
    within(Duration::from_secs(120), start)?;
    Ok(format!("100 seeds x 50 shifts, {fibers} fibers converged with |a0-a1| = 1"))
}

fn sample_measures() -> Outcome {
    let start = Instant::now();
    let net = bd();
    let rho = stationary_distribution(&build_one_point_chain(&net, 200).map_err(err)?, 1e-13).map_err(err)?;
    let seeds: Vec<u64> = (0..10_000).map(|s| 1_000_000 + s).collect();
    let rep = sample_measure_stats(&net, &seeds, &PullbackConfig::new(10_000, 10), Some(&rho)).map_err(err)?;
    let tv = rep.tv_to_reference.unwrap();
    ensure!(rep.excluded == 0, "{} fibers excluded", rep.excluded);
    ensure!(tv <= 0.02, "TV distance {tv:.4}");
    within(Duration::from_secs(600), start)?;
    Ok(format!("TV {tv:.4} over {} fibers", rep.converged))
}

fn lemma_dichotomy() -> Outcome {
    let t = lemma_recursion(0.1, 1, 1.0, 30).map_err(err)?;
    ensure!(t.values[1] == 1.1, "p1 = {}", t.values[1]);
    let x = t.first_exceeding(1e6).ok_or("p_x stayed below 1e6 up to x = 30")?;
    let zero = lemma_recursion(0.1, 1, 0.0, 30).map_err(err)?;
    ensure!(zero.values.iter().all(|&v| v == 0.0), "p0 = 0 produced non-zero values");
    Ok(format!("p1 = 1.1, p_x > 1e6 first at x = {x}, p0 = 0 stays 0"))
}

fn rre_anchors() -> Outcome {
    let bd_eq = rre_equilibria(Builtin::BirthDeath, &BD_RATES).map_err(err)?;
    ensure!(
        bd_eq.len() == 1 && bd_eq[0].root == 10.0 && bd_eq[0].stability == Stability::Stable,
        "birth-death equilibria {bd_eq:?}"
    );
    let s = rre_equilibria(Builtin::Schloegl, &SCHLOEGL_RATES).map_err(err)?;
    ensure!(s.len() == 3, "Schlögl equilibria {s:?}");
    ensure!((s[1].root - 9.6201).abs() <= 1e-3, "middle root {}", s[1].root);
    ensure!(s[1].stability == Stability::Unstable, "middle root is {:?}", s[1].stability);
    Ok(format!(
        "birth-death 10.0; Schlögl {:.4} / {:.4} (unstable) / {:.4}",
        s[0].root, s[1].root, s[2].root
    ))
}

fn schloegl_empirics() -> Outcome {
    let net = schloegl();
    let rho = stationary_distribution(&build_one_point_chain(&net, 200).map_err(err)?, 1e-13).map_err(err)?;
    let w = &rho.weights;
    let maxima: Vec<usize> = (0..w.len())
        .filter(|&i| (i == 0 || w[i] > w[i - 1]) && (i + 1 == w.len() || w[i] > w[i + 1]))
        .collect();
    ensure!(maxima.len() == 2, "local maxima at {maxima:?}");
    let e = enumerate_two_point_chain(&net, 40).map_err(err)?;
    let mut leaving = 0;
    for i in 0..e.rows.len() {
        let (x, y) = e.state(i);
        if x.abs_diff(y) == 1 {
            leaving += e.rows[i]
                .iter()
                .filter(|&&(j, p)| {
                    let (a, b) = e.state(j);
                    p > 0.0 && a.abs_diff(b) > 1
                })
                .count();
        }
    }
    ensure!(leaving > 0, "no transition leaves the thick diagonal");
    Ok(format!("modes at {maxima:?}; {leaving} transitions leave the thick diagonal at N=40"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("cocycle law", cocycle_law),
        ("transition statistics", transition_statistics),
        ("birth-death partial synchronization", partial_synchronization),
        ("thick-diagonal invariance and non-crossing", thick_diagonal_invariance),
        ("stationary oracle equivalence", stationary_oracle),
        ("attractor structure", attractor_structure),
        ("sample measures", sample_measures),
        ("lemma recursion dichotomy", lemma_dichotomy),
        ("rate equation anchors", rre_anchors),
        ("Schlögl empirics", schloegl_empirics),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (name, run) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS  {name} [{took:.2?}]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name} [{took:.2?}]: {detail}");
            }
        }
    }
    println!("{} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
