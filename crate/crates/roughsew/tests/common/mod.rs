//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use roughsew::rng::XorShift64Star;
use roughsew::roughpath::Samples;

/// Random piecewise-linear path with `segments` pieces and increasing,
/// irregular sample times.
pub fn random_pl(rng: &mut XorShift64Star, dim: usize, segments: usize) -> Samples {
    let mut times = vec![0.0];
    let mut points: Vec<f64> = (0..dim).map(|_| rng.range(-1.0, 1.0)).collect();
    for i in 1..=segments {
        times.push(times[i - 1] + rng.range(0.05, 1.0));
        for c in 0..dim {
            let prev = points[(i - 1) * dim + c];
            points.push(prev + rng.range(-1.0, 1.0));
        }
    }
    Samples::new(times, points, dim).unwrap()
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre quadrature of `f` over `[a, b]`.
pub fn quadrature(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let mid = a + (k as f64 + 0.5) * h;
        total += x.iter().zip(&w).map(|(xi, wi)| wi * f(mid + 0.5 * h * xi)).sum::<f64>() * 0.5 * h;
    }
    total
}

/// All sub-partitions of `0..n` that keep both endpoints.
pub fn subsets(n: usize) -> Vec<Vec<usize>> {
    (0u32..1 << (n - 2))
        .map(|mask| {
            let mut part = vec![0];
            part.extend((0..n - 2).filter(|b| mask >> b & 1 == 1).map(|b| b + 1));
            part.push(n - 1);
            part
        })
        .collect()
}

/// p-variation by enumerating every sub-partition.
pub fn exhaustive_pvar(n: usize, f: impl Fn(usize, usize) -> f64, p: f64) -> f64 {
    let mut best = 0.0f64;
    for part in subsets(n) {
        let mut s = 0.0;
        for w in part.windows(2) {
            s += f(w[0], w[1]).abs().powf(p);
        }
        best = best.max(s);
    }
    best.powf(1.0 / p)
}

/// Mixed (p,q)-variation by enumerating both axes' sub-partitions.
pub fn exhaustive_mixed(m: usize, n: usize, a: impl Fn(usize, usize, usize, usize) -> f64, p: f64, q: f64) -> f64 {
    let mut best = 0.0f64;
    let rows = subsets(m);
    for cols in subsets(n) {
        for part in &rows {
            let mut outer = 0.0;
            for c in cols.windows(2) {
                let inner: f64 = part.windows(2).map(|r| a(r[0], r[1], c[0], c[1]).abs().powf(p)).sum();
                outer += inner.powf(q / p);
            }
            best = best.max(outer);
        }
    }
    best.powf(1.0 / q)
}

/// `I_0(2) = Σ 1/(n!)²`.
pub fn bessel_i0_at_2() -> f64 {
    let mut term = 1.0;
    let mut total = 1.0;
    for n in 1..40 {
        term /= (n * n) as f64;
        total += term;
    }
    total
}
