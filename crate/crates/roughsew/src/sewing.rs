//! Sewing of local approximations into additive functions.
//!
//! Partitions live on a sample grid and are represented by sorted grid
//! indices. The integrator starts from a strided sub-grid and inserts index
//! midpoints each round, so the finest reachable partition is the grid itself.

use rayon::prelude::*;

use crate::controlled::{delta_defect, local_from, ControlledPath};
use crate::controls::{ratio, Control, NormValue};
use crate::error::{Error, Result};
use crate::special::zeta;
use crate::tensor::{norm, sub};

/// Sewing constant `2^{1/β} ζ(1/β)` for `β ∈ (0, 1)`.
pub fn sewing_constant(beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidArgument(format!("β must lie in (0,1), got {beta}")));
    }
    Ok(2f64.powf(1.0 / beta) * zeta(1.0 / beta)?)
}

/// Settings for [`sew`].
#[derive(Debug, Clone)]
pub struct SewConfig {
    /// Stop once successive sums differ by less than this (max-abs).
    pub tol: f64,
    /// Number of midpoint-insertion rounds; the start stride is `2^max_rounds`.
    pub max_rounds: usize,
    /// Treat reaching the full sample grid as convergence.
    pub accept_exhausted: bool,
    /// Estimate `‖δΞ‖` and the error bound.
    pub estimate_bound: bool,
}

impl Default for SewConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_rounds: 14,
            accept_exhausted: false,
            estimate_bound: true,
        }
    }
}

/// Result of [`sew`].
#[derive(Debug, Clone)]
pub struct SewOutcome {
    pub value: Vec<f64>,
    /// Estimated `‖δΞ‖_{β,ω}` over sampled triples of the finest partition.
    pub delta_norm: Option<NormValue>,
    /// `2^{1/β} ζ(1/β) ω(s,t)^{1/β} ‖δΞ‖_{β,ω}`.
    pub bound: Option<NormValue>,
    /// Riemann sums per round.
    pub sums: Vec<Vec<f64>>,
    /// Partition sizes (points) per round.
    pub sizes: Vec<usize>,
    /// The finest partition used.
    pub partition: Vec<usize>,
    /// Whether the full sample grid was reached.
    pub exhausted: bool,
}

/// Strided start partition of `[s, t]`.
pub fn start_partition(s: usize, t: usize, max_rounds: usize) -> Vec<usize> {
    let n = t - s;
    let mut stride = 1usize;
    while stride < n && stride < (1usize << max_rounds) {
        stride <<= 1;
    }
    let mut part: Vec<usize> = (s..t).step_by(stride).collect();
    part.push(t);
    part
}

/// Inserts index midpoints; `None` when every gap is already one.
pub fn refine(part: &[usize]) -> Option<Vec<usize>> {
    if part.windows(2).all(|w| w[1] - w[0] <= 1) {
        return None;
    }
    let mut out = Vec::with_capacity(part.len() * 2);
    for w in part.windows(2) {
        out.push(w[0]);
        if w[1] - w[0] >= 2 {
            out.push((w[0] + w[1]) / 2);
        }
    }
    out.push(*part.last().unwrap());
    Some(out)
}

/// Ordered sum `Σ Ξ_{s_{m−1}, s_m}` over a partition.
pub fn riemann_sum<F>(xi: &F, part: &[usize]) -> Vec<f64>
where
    F: Fn(usize, usize) -> Vec<f64> + Sync,
{
    let terms: Vec<Vec<f64>> = if part.len() > 256 {
        part.par_windows(2).map(|w| xi(w[0], w[1])).collect()
    } else {
        part.windows(2).map(|w| xi(w[0], w[1])).collect()
    };
    let mut acc = vec![0.0; terms.first().map_or(0, |t| t.len())];
    for t in &terms {
        for (a, b) in acc.iter_mut().zip(t) {
            *a += b;
        }
    }
    acc
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Evenly spread subsample of at most `k` entries, keeping both ends.
pub(crate) fn subsample(part: &[usize], k: usize) -> Vec<usize> {
    if part.len() <= k {
        return part.to_vec();
    }
    let mut out: Vec<usize> = (0..k).map(|i| part[i * (part.len() - 1) / (k - 1)]).collect();
    out.dedup();
    out
}

/// Sup of `|δΞ_{a,b,c}| / ω(a,c)^{1/β}` over a triple sample of `part`:
/// every triple of a ≤33-point subsample and up to 4096 consecutive triples.
pub fn estimate_delta_norm<F>(xi: &F, times: &[f64], part: &[usize], control: &dyn Control, beta: f64) -> NormValue
where
    F: Fn(usize, usize) -> Vec<f64> + Sync,
{
    let mut triples = Vec::new();
    let sub = subsample(part, 33);
    for i in 0..sub.len() {
        for j in i + 1..sub.len() {
            for k in j + 1..sub.len() {
                triples.push((sub[i], sub[j], sub[k]));
            }
        }
    }
    if part.len() >= 3 {
        let count = part.len() - 2;
        let step = count.div_ceil(4096).max(1);
        for i in (0..count).step_by(step) {
            triples.push((part[i], part[i + 1], part[i + 2]));
        }
    }
    let vals: Vec<NormValue> = triples
        .par_iter()
        .map(|&(a, b, c)| {
            let d = delta_defect(&xi(a, c), &xi(a, b), &xi(b, c));
            ratio(norm(&d), control.eval(times[a], times[c]).powf(1.0 / beta))
        })
        .collect();
    vals.into_iter().fold(NormValue::Finite(0.0), NormValue::max)
}

/// Sews `Ξ` over the grid interval `[s, t]`.
///
/// `xi(a, b)` is the local approximation between grid indices `a < b`.
pub fn sew<F>(
    xi: F,
    times: &[f64],
    s: usize,
    t: usize,
    control: &dyn Control,
    beta: f64,
    cfg: &SewConfig,
) -> Result<SewOutcome>
where
    F: Fn(usize, usize) -> Vec<f64> + Sync,
{
    if s >= t || t >= times.len() {
        return Err(Error::InvalidArgument(format!("bad sewing interval [{s}, {t}]")));
    }
    let mut part = start_partition(s, t, cfg.max_rounds);
    let mut sums = vec![riemann_sum(&xi, &part)];
    let mut sizes = vec![part.len()];
    let mut exhausted = false;
    loop {
        let Some(next) = refine(&part) else {
            exhausted = true;
            if sums.len() == 1 || cfg.accept_exhausted {
                break;
            }
            let n = sums.len();
            return Err(Error::NonConvergence {
                rounds: n - 1,
                previous: sums[n - 2].clone(),
                last: sums[n - 1].clone(),
                decay: decay_exponent(&sums),
            });
        };
        part = next;
        let sum = riemann_sum(&xi, &part);
        let diff = max_abs_diff(&sum, sums.last().unwrap());
        sums.push(sum);
        sizes.push(part.len());
        if diff < cfg.tol {
            break;
        }
    }
    let value = sums.last().unwrap().clone();
    let (delta_norm, bound) = if cfg.estimate_bound {
        let dn = estimate_delta_norm(&xi, times, &part, control, beta);
        let k = sewing_constant(beta)?;
        let w = control.eval(times[s], times[t]).powf(1.0 / beta);
        let b = match dn {
            NormValue::Finite(v) => NormValue::Finite(k * w * v),
            NormValue::Infinite => NormValue::Infinite,
        };
        (Some(dn), Some(b))
    } else {
        (None, None)
    };
    Ok(SewOutcome {
        value,
        delta_norm,
        bound,
        sums,
        sizes,
        partition: part,
        exhausted,
    })
}

/// Mesh-decay exponent from the last three sums (halving mesh per round).
pub fn decay_exponent(sums: &[Vec<f64>]) -> Option<f64> {
    let n = sums.len();
    if n < 3 {
        return None;
    }
    let d1 = max_abs_diff(&sums[n - 2], &sums[n - 3]);
    let d2 = max_abs_diff(&sums[n - 1], &sums[n - 2]);
    (d1 > 0.0 && d2 > 0.0).then(|| (d1 / d2).log2())
}

/// Outcome of one Young point removal.
#[derive(Debug, Clone, PartialEq)]
pub struct Removal {
    /// Position of the removed point within the partition (1-based interior).
    pub index: usize,
    /// `|δΞ_{s_{m−1}, s_m, s_{m+1}}|` at the removed point.
    pub cost: f64,
    /// `(2 ω(s,t) ‖δΞ‖^β / (m_0 − 1))^{1/β}`, the asserted ceiling on `cost`.
    pub ceiling: f64,
}

/// Exact `‖δΞ‖_{β,ω}` over all triples of a partition.
pub fn partition_delta_norm<F>(xi: &F, times: &[f64], part: &[usize], control: &dyn Control, beta: f64) -> NormValue
where
    F: Fn(usize, usize) -> Vec<f64>,
{
    let mut acc = NormValue::Finite(0.0);
    for i in 0..part.len() {
        for j in i + 1..part.len() {
            for k in j + 1..part.len() {
                let (a, b, c) = (part[i], part[j], part[k]);
                let d = delta_defect(&xi(a, c), &xi(a, b), &xi(b, c));
                acc = acc.max(ratio(norm(&d), control.eval(times[a], times[c]).powf(1.0 / beta)));
            }
        }
    }
    acc
}

/// Picks the interior point whose removal changes `Σ Ξ` the least.
///
/// Ties go to the smallest index. Fails with an invariant error if the cost
/// exceeds the point-removal ceiling.
pub fn young_remove_point<F>(xi: &F, times: &[f64], part: &[usize], beta: f64, control: &dyn Control) -> Result<Removal>
where
    F: Fn(usize, usize) -> Vec<f64>,
{
    if part.len() < 3 {
        return Err(Error::PartitionTooSmall(part.len()));
    }
    let mut best = (0usize, f64::INFINITY);
    for m in 1..part.len() - 1 {
        let (a, b, c) = (part[m - 1], part[m], part[m + 1]);
        let cost = norm(&delta_defect(&xi(a, c), &xi(a, b), &xi(b, c)));
        if cost < best.1 {
            best = (m, cost);
        }
    }
    let m0 = (part.len() - 1) as f64;
    let w = control.eval(times[part[0]], times[*part.last().unwrap()]);
    let dn = partition_delta_norm(xi, times, part, control, beta);
    let ceiling = match dn {
        NormValue::Finite(v) => (2.0 * w * v.powf(beta) / (m0 - 1.0)).powf(1.0 / beta),
        NormValue::Infinite => f64::MAX,
    };
    if best.1 > ceiling * (1.0 + 1e-9) + 1e-300 {
        return Err(Error::Invariant(format!(
            "point removal cost {} above ceiling {ceiling}",
            best.1
        )));
    }
    Ok(Removal {
        index: best.0,
        cost: best.1,
        ceiling,
    })
}

/// Removes points one at a time down to `{s, t}`; returns the total cost and
/// `|Σ_𝒟 Ξ − Ξ_{s,t}|`.
pub fn young_reduce<F>(xi: &F, times: &[f64], part: &[usize], beta: f64, control: &dyn Control) -> Result<(f64, f64)>
where
    F: Fn(usize, usize) -> Vec<f64>,
{
    let full: Vec<f64> = {
        let mut acc = vec![];
        for w in part.windows(2) {
            let v = xi(w[0], w[1]);
            if acc.is_empty() {
                acc = vec![0.0; v.len()];
            }
            for (a, b) in acc.iter_mut().zip(&v) {
                *a += b;
            }
        }
        acc
    };
    let direct = xi(part[0], *part.last().unwrap());
    let mut cur = part.to_vec();
    let mut total = 0.0;
    while cur.len() > 2 {
        let r = young_remove_point(xi, times, &cur, beta, control)?;
        total += r.cost;
        cur.remove(r.index);
    }
    Ok((total, norm(&sub(&full, &direct))))
}

/// Result of [`rough_integral`].
#[derive(Debug, Clone)]
pub struct RoughIntegral {
    pub value: Vec<f64>,
    /// `2^θ ζ(θ) ω(s,t)^θ Σ_j ‖X^{j+1}‖_{p/(j+1)} ‖R^{(j)}‖_{p/(⌊p⌋−j)}`.
    pub bound: Option<NormValue>,
    pub sew: SewOutcome,
}

/// Pairs sampled for norm estimates: all pairs of ≤`k`-point subsample plus
/// consecutive pairs of `part` (at most 4096).
pub(crate) fn sample_pairs(part: &[usize], k: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    if part.len() <= 129 {
        for i in 0..part.len() {
            for j in i + 1..part.len() {
                pairs.push((part[i], part[j]));
            }
        }
        return pairs;
    }
    let sub = subsample(part, k);
    for i in 0..sub.len() {
        for j in i + 1..sub.len() {
            pairs.push((sub[i], sub[j]));
        }
    }
    let count = part.len() - 1;
    let step = count.div_ceil(4096).max(1);
    for i in (0..count).step_by(step) {
        pairs.push((part[i], part[i + 1]));
    }
    pairs
}

/// Rough integral `∫_s^t Y dX` of a controlled path over grid indices.
pub fn rough_integral(y: &ControlledPath<'_>, s: usize, t: usize, cfg: &SewConfig) -> Result<RoughIntegral> {
    let x = y.driver();
    let w = y.out_dim()?;
    let n = y.order();
    let floor_p = x.floor_p() as f64;
    let p = x.p();
    let theta = (floor_p + 1.0) / p;
    if theta <= 1.0 {
        return Err(Error::InvalidArgument(format!("θ = {theta} must exceed 1")));
    }
    let xi = |a: usize, b: usize| -> Vec<f64> {
        let ys = y.derivatives(a).expect("grid node");
        let lv = x.levels(a, b, n + 1).expect("grid interval");
        local_from(&ys, &lv, w)
    };
    // validate once outside the closure
    y.derivatives(s)?;
    let sewn = sew(
        xi,
        x.times(),
        s,
        t,
        x.control(),
        1.0 / theta,
        &SewConfig {
            estimate_bound: false,
            ..cfg.clone()
        },
    )?;
    let bound = if cfg.estimate_bound {
        let pairs = sample_pairs(&sewn.partition, 33);
        let mut total = NormValue::Finite(0.0);
        for j in 0..=n {
            let ex = (j as f64 + 1.0) / p;
            let er = (floor_p - j as f64) / p;
            let mut nx = NormValue::Finite(0.0);
            let mut nr = NormValue::Finite(0.0);
            for &(a, b) in &pairs {
                let om = x.omega(a, b);
                nx = nx.max(ratio(norm(&x.eval(j + 1, a, b)?), om.powf(ex)));
                nr = nr.max(ratio(norm(&y.remainder(j, a, b)?), om.powf(er)));
            }
            total = match (total, nx, nr) {
                (NormValue::Finite(acc), NormValue::Finite(u), NormValue::Finite(v)) => NormValue::Finite(acc + u * v),
                _ => NormValue::Infinite,
            };
        }
        let k = 2f64.powf(theta) * zeta(theta)?;
        let om = x.omega(s, t).powf(theta);
        Some(match total {
            NormValue::Finite(v) => NormValue::Finite(k * om * v),
            NormValue::Infinite => NormValue::Infinite,
        })
    } else {
        None
    };
    Ok(RoughIntegral {
        value: sewn.value.clone(),
        bound,
        sew: sewn,
    })
}
