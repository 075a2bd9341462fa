use rdsjump_core::{NoiseFiber, Stream};

#[test]
fn golden_values_are_bit_exact() {
    let golden = include_str!("data/noise_golden.csv");
    let f = NoiseFiber::new(1);
    let mut rows = 0;
    for line in golden.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let n: i64 = cols[0].parse().unwrap();
        let bits = u64::from_str_radix(cols[1], 16).unwrap();
        assert_eq!(f.uniform(Stream::Q, n).to_bits(), bits, "index {n}");
        rows += 1;
    }
    assert_eq!(rows, 5);
}

/// One-sample Kolmogorov-Smirnov statistic against the uniform law.
fn ks_statistic(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).max((i + 1) as f64 / n - x))
        .fold(0.0, f64::max)
}

#[test]
fn streams_pass_kolmogorov_smirnov() {
    const N: i64 = 100_000;
    // asymptotic 1% critical value
    let critical = 1.628 / (N as f64).sqrt();
    for stream in [Stream::Q, Stream::R] {
        let passed = (0..100u64)
            .filter(|&seed| {
                let f = NoiseFiber::new(seed);
                // straddle the origin so negative indices are covered too
                ks_statistic((-N / 2..N / 2).map(|n| f.uniform(stream, n)).collect()) < critical
            })
            .count();
        assert!(passed >= 95, "{stream:?}: {passed}/100 seeds below the 1% critical value");
    }
}

#[test]
fn q_and_r_are_uncorrelated() {
    let f = NoiseFiber::new(77);
    let n = 200_000;
    let mut s = 0.0;
    for i in 0..n {
        s += (f.q(i) - 0.5) * (f.r(i) - 0.5);
    }
    let corr = s / n as f64 * 12.0;
    assert!(corr.abs() < 4.0 / (n as f64).sqrt(), "correlation {corr}");
}

#[test]
fn neighbouring_seeds_are_uncorrelated() {
    let (a, b) = (NoiseFiber::new(1000), NoiseFiber::new(1001));
    let n = 200_000;
    let corr = (0..n).map(|i| (a.q(i) - 0.5) * (b.q(i) - 0.5)).sum::<f64>() / n as f64 * 12.0;
    assert!(corr.abs() < 4.0 / (n as f64).sqrt(), "correlation {corr}");
}
