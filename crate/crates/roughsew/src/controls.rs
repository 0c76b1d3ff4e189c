//! Controls, p-variation, mixed (p,q)-variation and ω-controlled norms.
//!
//! Variations are suprema over sub-partitions of a fixed finite grid; the
//! grids are addressed by position `0..n` and the caller maps positions to
//! whatever the increments depend on.

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};

/// Largest axis size accepted by exact mixed variation.
pub const EXACT_CAP: usize = 12;

/// A control `ω(s,t)` on the simplex.
pub trait Control: Send + Sync {
    fn eval(&self, s: f64, t: f64) -> f64;
}

impl<C: Control + ?Sized> Control for Arc<C> {
    fn eval(&self, s: f64, t: f64) -> f64 {
        (**self).eval(s, t)
    }
}

impl<C: Control + ?Sized> Control for &C {
    fn eval(&self, s: f64, t: f64) -> f64 {
        (**self).eval(s, t)
    }
}

/// `ω(s,t) = scale · (t − s)`.
#[derive(Debug, Clone, Copy)]
pub struct TimeControl {
    pub scale: f64,
}

impl TimeControl {
    pub fn new(scale: f64) -> Self {
        Self { scale }
    }
}

impl Control for TimeControl {
    fn eval(&self, s: f64, t: f64) -> f64 {
        self.scale * (t - s).max(0.0)
    }
}

/// Sum of controls, again a control.
#[derive(Clone)]
pub struct SumControl {
    parts: Vec<Arc<dyn Control>>,
}

impl SumControl {
    pub fn new(parts: Vec<Arc<dyn Control>>) -> Self {
        Self { parts }
    }
}

impl Control for SumControl {
    fn eval(&self, s: f64, t: f64) -> f64 {
        self.parts.iter().map(|c| c.eval(s, t)).sum()
    }
}

/// Control given by a closure.
pub struct FnControl<F>(pub F);

impl<F: Fn(f64, f64) -> f64 + Send + Sync> Control for FnControl<F> {
    fn eval(&self, s: f64, t: f64) -> f64 {
        (self.0)(s, t)
    }
}

/// Exact p-variation (to the power p) of a piecewise-linear path.
///
/// For `p ≥ 1` the supremum over real partitions is attained on the knots,
/// so every query reduces to a dynamic program over sample points. Rows of
/// the DP table (one per start knot) are computed on first use.
pub struct PVarControl {
    times: Vec<f64>,
    points: Vec<f64>,
    dim: usize,
    p: f64,
    rows: Vec<OnceLock<Vec<f64>>>,
}

impl PVarControl {
    /// `points` is row-major, `dim` values per sample.
    pub fn new(times: &[f64], points: &[f64], dim: usize, p: f64) -> Result<Self> {
        if p < 1.0 || !p.is_finite() {
            return Err(Error::InvalidExponent(p));
        }
        if dim == 0 || points.len() != times.len() * dim {
            return Err(Error::InvalidArgument("sample shape does not match times".into()));
        }
        check_increasing(times)?;
        Ok(Self {
            times: times.to_vec(),
            points: points.to_vec(),
            dim,
            p,
            rows: (0..times.len()).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    fn row(&self, i: usize) -> &[f64] {
        self.rows[i].get_or_init(|| {
            let n = self.times.len() - i;
            let mut v = vec![0.0; n];
            for k in 1..n {
                let xk = self.point(i + k);
                let mut best: f64 = 0.0;
                for m in 0..k {
                    let cand = v[m] + dist(xk, self.point(i + m)).powf(self.p);
                    best = best.max(cand);
                }
                v[k] = best;
            }
            v
        })
    }

    /// `ω` between two sample indices.
    pub fn eval_index(&self, a: usize, b: usize) -> f64 {
        if b <= a {
            return 0.0;
        }
        self.row(a)[b - a]
    }

    fn locate(&self, t: f64) -> Option<usize> {
        self.times.binary_search_by(|x| x.partial_cmp(&t).unwrap()).ok()
    }

    fn interpolate(&self, t: f64) -> Vec<f64> {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.point(0).to_vec();
        }
        if t >= self.times[n - 1] {
            return self.point(n - 1).to_vec();
        }
        let k = self.times.partition_point(|&x| x <= t);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = (t - t0) / (t1 - t0);
        self.point(k - 1)
            .iter()
            .zip(self.point(k))
            .map(|(a, b)| a + w * (b - a))
            .collect()
    }

    /// Off-grid evaluation: DP over the interpolated endpoints and interior knots.
    fn eval_off_grid(&self, s: f64, t: f64) -> f64 {
        let mut pts = vec![self.interpolate(s)];
        for (i, &ti) in self.times.iter().enumerate() {
            if ti > s && ti < t {
                pts.push(self.point(i).to_vec());
            }
        }
        pts.push(self.interpolate(t));
        let n = pts.len();
        p_variation_pow(n, |a, b| dist(&pts[a], &pts[b]), self.p)
    }
}

impl Control for PVarControl {
    fn eval(&self, s: f64, t: f64) -> f64 {
        if t <= s {
            return 0.0;
        }
        match (self.locate(s), self.locate(t)) {
            (Some(a), Some(b)) => self.eval_index(a, b),
            _ => self.eval_off_grid(s, t),
        }
    }
}

pub(crate) fn check_increasing(times: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return Err(Error::PartitionTooSmall(times.len()));
    }
    for (i, w) in times.windows(2).enumerate() {
        if w[1] <= w[0] || !w[0].is_finite() || !w[1].is_finite() {
            return Err(Error::NonMonotoneTimes(i + 1));
        }
    }
    Ok(())
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// A norm value that may be infinite (`ω = 0` with a nonzero numerator).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormValue {
    Finite(f64),
    Infinite,
}

impl NormValue {
    pub fn is_finite(&self) -> bool {
        matches!(self, NormValue::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match *self {
            NormValue::Finite(v) => Some(v),
            NormValue::Infinite => None,
        }
    }

    pub fn max(self, other: NormValue) -> NormValue {
        match (self, other) {
            (NormValue::Finite(a), NormValue::Finite(b)) => NormValue::Finite(a.max(b)),
            _ => NormValue::Infinite,
        }
    }

    /// Result of a finite-valued computation, or an invariant error.
    pub fn require(self, what: &str) -> Result<f64> {
        self.finite()
            .ok_or_else(|| Error::Invariant(format!("{what}: infinite ω-norm")))
    }
}

/// Ratio `|a| / w`, skipping `w = 0, a = 0` and flagging `w = 0, a ≠ 0`.
pub fn ratio(a: f64, w: f64) -> NormValue {
    if w > 0.0 {
        NormValue::Finite(a.abs() / w)
    } else if a == 0.0 {
        NormValue::Finite(0.0)
    } else {
        NormValue::Infinite
    }
}

/// `sup |A_{s,t}| / ω(s,t)^{1/p}` over all pairs of sample positions.
///
/// `a(i, j)` returns `|A|` and `w(i, j)` returns `ω` between positions `i < j`.
pub fn omega_norm(n: usize, a: impl Fn(usize, usize) -> f64, w: impl Fn(usize, usize) -> f64, inv_p: f64) -> NormValue {
    let mut acc = NormValue::Finite(0.0);
    for i in 0..n {
        for j in i + 1..n {
            acc = acc.max(ratio(a(i, j), w(i, j).powf(inv_p)));
            if !acc.is_finite() {
                return acc;
            }
        }
    }
    acc
}

/// `sup |A(s,t;u,v)| / (ω(s,t)^{1/p} ω̃(u,v)^{1/q})` over sampled rectangles.
#[allow(clippy::too_many_arguments)]
pub fn mixed_omega_norm(
    m: usize,
    n: usize,
    a: impl Fn(usize, usize, usize, usize) -> f64,
    w1: impl Fn(usize, usize) -> f64,
    w2: impl Fn(usize, usize) -> f64,
    inv_p: f64,
    inv_q: f64,
) -> NormValue {
    let mut acc = NormValue::Finite(0.0);
    for i in 0..m {
        for j in i + 1..m {
            let ws = w1(i, j).powf(inv_p);
            for k in 0..n {
                for l in k + 1..n {
                    acc = acc.max(ratio(a(i, j, k, l), ws * w2(k, l).powf(inv_q)));
                    if !acc.is_finite() {
                        return acc;
                    }
                }
            }
        }
    }
    acc
}

/// `sup_D Σ |f(s_m, s_{m+1})|^p` over sub-partitions of `0..n` keeping both ends.
pub(crate) fn p_variation_pow(n: usize, f: impl Fn(usize, usize) -> f64, p: f64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let mut v = vec![0.0f64; n];
    for k in 1..n {
        let mut best = f64::NEG_INFINITY;
        for m in 0..k {
            best = best.max(v[m] + f(m, k).abs().powf(p));
        }
        v[k] = best;
    }
    v[n - 1]
}

/// Exact p-variation over sub-partitions of a grid of `n` points.
///
/// `f(i, j)` is the increment between grid positions `i < j`.
pub fn p_variation(n: usize, f: impl Fn(usize, usize) -> f64, p: f64) -> Result<f64> {
    if p < 1.0 || !p.is_finite() {
        return Err(Error::InvalidExponent(p));
    }
    if n < 2 {
        return Err(Error::PartitionTooSmall(n));
    }
    Ok(p_variation_pow(n, f, p).powf(1.0 / p))
}

/// Search strategy for [`mixed_variation`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixedMode {
    /// Exact supremum; both axes limited to [`EXACT_CAP`] points.
    Exact,
    /// Value of a greedily chosen sub-partition: a lower bound on `Exact`.
    Greedy,
}

/// Table of `|A(cell)|^p` over all sub-rectangles of an `m × n` grid.
struct CellTable {
    m: usize,
    n: usize,
    vals: Vec<f64>,
}

impl CellTable {
    fn new(m: usize, n: usize, a: impl Fn(usize, usize, usize, usize) -> f64, p: f64) -> Self {
        let mut vals = vec![0.0; m * m * n * n];
        for i in 0..m {
            for j in i + 1..m {
                for k in 0..n {
                    for l in k + 1..n {
                        vals[((i * m + j) * n + k) * n + l] = a(i, j, k, l).abs().powf(p);
                    }
                }
            }
        }
        Self { m, n, vals }
    }

    #[inline]
    fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.vals[((i * self.m + j) * self.n + k) * self.n + l]
    }

    /// Best outer sum over axis-2 sub-partitions for a fixed axis-1 partition.
    fn best_outer(&self, part: &[usize], q_over_p: f64) -> f64 {
        let n = self.n;
        let mut w = vec![0.0f64; n];
        for b in 1..n {
            let mut best = f64::NEG_INFINITY;
            for a in 0..b {
                let inner: f64 = part.windows(2).map(|c| self.get(c[0], c[1], a, b)).sum();
                best = best.max(w[a] + inner.powf(q_over_p));
            }
            w[b] = best;
        }
        w[n - 1]
    }
}

/// Mixed (p,q)-variation `sup (Σ_n (Σ_m |A(s_m,s_{m+1};u_n,u_{n+1})|^p)^{q/p})^{1/q}`
/// over sub-partitions of an `m × n` grid.
///
/// Exact mode enumerates the axis-1 sub-partitions; for each one the outer
/// sum is additive over axis-2 intervals and is maximised by a DP.
pub fn mixed_variation(
    m: usize,
    n: usize,
    a: impl Fn(usize, usize, usize, usize) -> f64,
    p: f64,
    q: f64,
    mode: MixedMode,
) -> Result<f64> {
    for e in [p, q] {
        if e < 1.0 || !e.is_finite() {
            return Err(Error::InvalidExponent(e));
        }
    }
    if m < 2 || n < 2 {
        return Err(Error::PartitionTooSmall(m.min(n)));
    }
    if mode == MixedMode::Exact && m.max(n) > EXACT_CAP {
        return Err(Error::SizeCap {
            cap: EXACT_CAP,
            got: m.max(n),
        });
    }
    let table = CellTable::new(m, n, a, p);
    let qp = q / p;
    let best = match mode {
        MixedMode::Exact => {
            let interior = m - 2;
            let mut best = 0.0f64;
            let mut part = Vec::with_capacity(m);
            for mask in 0u32..(1u32 << interior) {
                part.clear();
                part.push(0);
                part.extend((0..interior).filter(|b| mask >> b & 1 == 1).map(|b| b + 1));
                part.push(m - 1);
                best = best.max(table.best_outer(&part, qp));
            }
            best
        }
        MixedMode::Greedy => {
            let mut part: Vec<usize> = (0..m).collect();
            let mut best = table.best_outer(&part, qp);
            loop {
                let mut improved: Option<(usize, f64)> = None;
                for r in 1..part.len().saturating_sub(1) {
                    let mut trial = part.clone();
                    trial.remove(r);
                    let v = table.best_outer(&trial, qp);
                    if v > improved.map_or(best, |x| x.1) {
                        improved = Some((r, v));
                    }
                }
                match improved {
                    Some((r, v)) => {
                        part.remove(r);
                        best = v;
                    }
                    None => break,
                }
            }
            best
        }
    };
    Ok(best.max(0.0).powf(1.0 / q))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pvar_control_monotone_path() {
        let times: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
        let c = PVarControl::new(&times, &times, 1, 1.0).unwrap();
        for i in 0..=8 {
            for j in i..=8 {
                let w = c.eval(times[i], times[j]);
                assert!((w - (times[j] - times[i])).abs() < 1e-15);
            }
        }
        // off-grid queries on a monotone path are still t - s
        assert!((c.eval(0.1, 0.77) - 0.67).abs() < 1e-14);
    }

    #[test]
    fn pvar_control_constant_path() {
        let times = [0.0, 0.5, 1.0];
        let c = PVarControl::new(&times, &[2.0, 2.0, 2.0, 2.0, 2.0, 2.0], 2, 2.0).unwrap();
        assert_eq!(c.eval(0.0, 1.0), 0.0);
    }

    #[test]
    fn pvar_rejects_small_p() {
        assert!(matches!(
            p_variation(3, |_, _| 1.0, 0.5),
            Err(Error::InvalidExponent(_))
        ));
        assert!(PVarControl::new(&[0.0, 1.0], &[0.0, 1.0], 1, 0.9).is_err());
        assert!(matches!(
            PVarControl::new(&[0.0, 1.0, 1.0], &[0.0, 1.0, 2.0], 1, 2.0),
            Err(Error::NonMonotoneTimes(2))
        ));
    }

    #[test]
    fn p_variation_trivial() {
        assert_eq!(p_variation(5, |_, _| 0.0, 2.0).unwrap(), 0.0);
        let x = [0.0, 0.1, 0.5, 0.6, 1.0];
        let v = p_variation(5, |i, j| x[j] - x[i], 1.0).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mixed_trivial_cases() {
        let v = mixed_variation(4, 4, |_, _, _, _| 0.0, 2.0, 2.0, MixedMode::Exact).unwrap();
        assert_eq!(v, 0.0);
        let v = mixed_variation(2, 2, |_, _, _, _| -3.5, 1.5, 2.5, MixedMode::Exact).unwrap();
        assert!((v - 3.5).abs() < 1e-14);
        assert!(matches!(
            mixed_variation(13, 2, |_, _, _, _| 1.0, 2.0, 2.0, MixedMode::Exact),
            Err(Error::SizeCap { .. })
        ));
    }

    #[test]
    fn omega_norm_examples() {
        assert_eq!(omega_norm(5, |_, _| 0.0, |_, _| 1.0, 1.0), NormValue::Finite(0.0));
        let t: Vec<f64> = (0..=16).map(|i| i as f64 / 16.0).collect();
        let v = omega_norm(17, |i, j| (t[j] - t[i]).powf(0.6), |i, j| t[j] - t[i], 0.5);
        assert!((v.finite().unwrap() - 1.0).abs() < 1e-15);
        let v = omega_norm(17, |i, j| t[j] - t[i], |i, j| t[j] - t[i], 1.0);
        assert!((v.finite().unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(omega_norm(3, |_, _| 1.0, |_, _| 0.0, 1.0), NormValue::Infinite);
    }
}
