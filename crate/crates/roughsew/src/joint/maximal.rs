//! Variation quantities, the maximal inequality and point removal on grids.

use rayon::prelude::*;

use super::local::{gamma2_from, gamma_from, omega_from, r1_from, r2_from, rr1_from, rr2_from, Corners};
use super::{check_rect_grid, Constants, Exponents, GridPartition, JointDerivs, JointPath};
use crate::controls::{mixed_omega_norm, mixed_variation, p_variation, MixedMode, EXACT_CAP};
use crate::error::{Error, Result};
use crate::tensor::norm;

/// Signature levels over one grid interval.
type Levels = Vec<Vec<f64>>;

/// Node derivatives and axis signatures over a grid partition.
pub(crate) struct GridCache {
    m1: usize,
    m2: usize,
    nodes: Vec<JointDerivs>,
    sig1: Vec<Vec<Vec<f64>>>,
    sig2: Vec<Vec<Vec<f64>>>,
    pub omega1: Vec<f64>,
    pub omega2: Vec<f64>,
}

impl GridCache {
    pub fn new<J: JointPath + ?Sized>(jp: &J, g: &GridPartition) -> Result<Self> {
        check_rect_grid(jp, g)?;
        let (m1, m2) = (g.axis1.len(), g.axis2.len());
        let nodes: Vec<JointDerivs> = (0..m1 * m2)
            .into_par_iter()
            .map(|i| jp.derivs(g.axis1[i / m2], g.axis2[i % m2]))
            .collect();
        let table = |axis: &[usize], x: &crate::roughpath::RoughPath| -> Result<(Vec<Levels>, Vec<f64>)> {
            let m = axis.len();
            let mut sig = vec![Vec::new(); m * m];
            let mut om = vec![0.0; m * m];
            for a in 0..m {
                for b in a + 1..m {
                    sig[a * m + b] = x.levels(axis[a], axis[b], x.order() + 1)?;
                    om[a * m + b] = x.omega(axis[a], axis[b]);
                }
            }
            Ok((sig, om))
        };
        let (sig1, omega1) = table(&g.axis1, jp.driver1())?;
        let (sig2, omega2) = table(&g.axis2, jp.driver2())?;
        Ok(Self {
            m1,
            m2,
            nodes,
            sig1,
            sig2,
            omega1,
            omega2,
        })
    }

    pub fn sizes(&self) -> (usize, usize) {
        (self.m1, self.m2)
    }

    #[inline]
    pub fn node(&self, a: usize, b: usize) -> &JointDerivs {
        &self.nodes[a * self.m2 + b]
    }

    #[inline]
    pub fn x(&self, a: usize, b: usize) -> &[Vec<f64>] {
        &self.sig1[a * self.m1 + b]
    }

    #[inline]
    pub fn xt(&self, a: usize, b: usize) -> &[Vec<f64>] {
        &self.sig2[a * self.m2 + b]
    }

    pub fn w1(&self, a: usize, b: usize) -> f64 {
        self.omega1[a * self.m1 + b]
    }

    pub fn w2(&self, a: usize, b: usize) -> f64 {
        self.omega2[a * self.m2 + b]
    }

    fn corners(&self, a: usize, b: usize, c: usize, e: usize) -> Corners<'_> {
        Corners {
            su: self.node(a, c),
            sv: self.node(a, e),
            tu: self.node(b, c),
            tv: self.node(b, e),
        }
    }

    /// `Ω` on the rectangle with axis positions `[a,b] × [c,e]`.
    pub fn omega(&self, a: usize, b: usize, c: usize, e: usize) -> f64 {
        omega_from(self.node(a, c), self.x(a, b), self.xt(c, e))
    }

    /// `Γ(s_a, s_m, s_b; u_c, u_e)` through its remainder identity.
    pub fn gamma(&self, a: usize, m: usize, b: usize, c: usize, e: usize) -> f64 {
        gamma_from(
            self.node(a, c),
            self.node(m, c),
            self.x(a, m),
            self.x(m, b),
            self.xt(c, e),
        )
    }

    /// Axis-2 analogue of [`GridCache::gamma`].
    pub fn gamma2(&self, c: usize, m: usize, e: usize, a: usize, b: usize) -> f64 {
        gamma2_from(
            self.node(a, c),
            self.node(a, m),
            self.xt(c, m),
            self.xt(m, e),
            self.x(a, b),
        )
    }

    pub fn r1(&self, j: usize, k: usize, a: usize, c: usize, e: usize) -> Vec<f64> {
        r1_from(self.node(a, c), self.node(a, e), self.xt(c, e), j, k)
    }

    pub fn r2(&self, k: usize, j: usize, c: usize, a: usize, b: usize) -> Vec<f64> {
        r2_from(self.node(a, c), self.node(b, c), self.x(a, b), k, j)
    }

    pub fn rr1(&self, j: usize, k: usize, a: usize, b: usize, c: usize, e: usize) -> Vec<f64> {
        rr1_from(&self.corners(a, b, c, e), self.x(a, b), self.xt(c, e), j, k)
    }

    pub fn rr2(&self, k: usize, j: usize, a: usize, b: usize, c: usize, e: usize) -> Vec<f64> {
        rr2_from(&self.corners(a, b, c, e), self.x(a, b), self.xt(c, e), k, j)
    }

    /// Grid sum over the sub-grid given by axis positions.
    pub fn sum(&self, p1: &[usize], p2: &[usize]) -> f64 {
        let mut acc = 0.0;
        for w in p1.windows(2) {
            for z in p2.windows(2) {
                acc += self.omega(w[0], w[1], z[0], z[1]);
            }
        }
        acc
    }
}

/// How mixed variations are evaluated on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariationMode {
    /// Exact when both axes have at most [`EXACT_CAP`] points, else `Envelope`.
    Auto,
    /// Exact supremum over sub-partitions.
    Exact,
    /// `‖𝐑‖ ω(s,t)^{1/q} ω̃(u,v)^{1/q̃}` with the norm over all grid rectangles.
    Envelope,
}

/// The quantities entering the maximal inequality on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MaximalQuantities {
    /// `V^{p/(j+1)}(X^{j+1})` over axis 1.
    pub var1: Vec<f64>,
    /// `V^{p̃/(k+1)}(X̃^{k+1})` over axis 2.
    pub var2: Vec<f64>,
    /// `mixed1[j][k] = V^{q_j, q̃_k}(𝐑^{(1;j,k)})`.
    pub mixed1: Vec<Vec<f64>>,
    /// `mixed2[k][j] = V^{q̃_k, q_j}(𝐑^{(2;k,j)})`.
    pub mixed2: Vec<Vec<f64>>,
    /// `𝐕^{(1)}`.
    pub v1: f64,
    /// `𝐕^{(2)}`.
    pub v2: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub constants: Constants,
    /// Whether the mixed variations are exact.
    pub exact: bool,
}

impl MaximalQuantities {
    /// `C″ (min(𝐕^{(1)}, 𝐕^{(2)}) + η^{(1)} + η^{(2)})`.
    pub fn maximal_bound(&self) -> f64 {
        self.constants.c2 * (self.v1.min(self.v2) + self.eta1 + self.eta2)
    }
}

fn mixed_value(
    cache: &GridCache,
    f: impl Fn(usize, usize, usize, usize) -> f64 + Sync,
    q1: f64,
    q2: f64,
    exact: bool,
    swap: bool,
) -> Result<f64> {
    let (m1, m2) = cache.sizes();
    if exact {
        return mixed_variation(m1, m2, f, q1, q2, MixedMode::Exact);
    }
    let nv = mixed_omega_norm(
        m1,
        m2,
        f,
        |a, b| cache.w1(a, b),
        |c, e| cache.w2(c, e),
        1.0 / q1,
        1.0 / q2,
    );
    let n = nv.require(if swap {
        "second-family mixed norm"
    } else {
        "first-family mixed norm"
    })?;
    Ok(n * cache.w1(0, m1 - 1).powf(1.0 / q1) * cache.w2(0, m2 - 1).powf(1.0 / q2))
}

pub(crate) fn quantities_on(
    cache: &GridCache,
    exps: &Exponents,
    alpha: f64,
    mode: VariationMode,
) -> Result<MaximalQuantities> {
    let constants = Constants::new(exps, alpha)?;
    let (m1, m2) = cache.sizes();
    let n1 = exps.q1.len() - 1;
    let n2 = exps.q2.len() - 1;
    let exact = match mode {
        VariationMode::Exact => true,
        VariationMode::Envelope => false,
        VariationMode::Auto => m1.max(m2) <= EXACT_CAP,
    };
    let var1: Vec<f64> = (0..=n1)
        .map(|j| p_variation(m1, |a, b| norm(&cache.x(a, b)[j + 1]), exps.pv1[j]))
        .collect::<Result<_>>()?;
    let var2: Vec<f64> = (0..=n2)
        .map(|k| p_variation(m2, |c, e| norm(&cache.xt(c, e)[k + 1]), exps.pv2[k]))
        .collect::<Result<_>>()?;
    let mut mixed1 = vec![vec![0.0; n2 + 1]; n1 + 1];
    let mut mixed2 = vec![vec![0.0; n1 + 1]; n2 + 1];
    let mut v1: f64 = 0.0;
    let mut v2: f64 = 0.0;
    let mut eta1 = 0.0;
    let mut eta2 = 0.0;
    for j in 0..=n1 {
        for k in 0..=n2 {
            let a = mixed_value(
                cache,
                |a, b, c, e| norm(&cache.rr1(j, k, a, b, c, e)),
                exps.q1[j],
                exps.q2[k],
                exact,
                false,
            )?;
            // the second family is indexed (u-interval, s-interval) in the variation
            let b = if exact {
                mixed_variation(
                    m2,
                    m1,
                    |c, e, a, b| norm(&cache.rr2(k, j, a, b, c, e)),
                    exps.q2[k],
                    exps.q1[j],
                    MixedMode::Exact,
                )?
            } else {
                mixed_value(
                    cache,
                    |a, b, c, e| norm(&cache.rr2(k, j, a, b, c, e)),
                    exps.q1[j],
                    exps.q2[k],
                    false,
                    true,
                )?
            };
            mixed1[j][k] = a;
            mixed2[k][j] = b;
            v1 = v1.max(var1[j] * var2[k] * a);
            v2 = v2.max(var1[j] * var2[k] * b);
            let rv2 = p_variation(m1, |a, b| norm(&cache.r2(k, j, 0, a, b)), exps.q1[j])?;
            let rv1 = p_variation(m2, |c, e| norm(&cache.r1(j, k, 0, c, e)), exps.q2[k])?;
            let xt_uv = norm(&cache.xt(0, m2 - 1)[k + 1]);
            let x_st = norm(&cache.x(0, m1 - 1)[j + 1]);
            eta1 += (xt_uv * var1[j] * rv2).powf(alpha);
            eta2 += (x_st * var2[k] * rv1).powf(alpha);
        }
    }
    Ok(MaximalQuantities {
        var1,
        var2,
        mixed1,
        mixed2,
        v1,
        v2,
        eta1: eta1.powf(1.0 / alpha),
        eta2: eta2.powf(1.0 / alpha),
        constants,
        exact,
    })
}

/// `𝐕^{(1)}, 𝐕^{(2)}, η^{(1)}, η^{(2)}` on the grid `g`, whose extents are the rectangle.
pub fn maximal_quantities<J: JointPath + ?Sized>(
    jp: &J,
    g: &GridPartition,
    alpha: Option<f64>,
    mode: VariationMode,
) -> Result<MaximalQuantities> {
    let exps = Exponents::for_path(jp);
    let alpha = alpha.unwrap_or_else(|| exps.default_alpha());
    let cache = GridCache::new(jp, g)?;
    quantities_on(&cache, &exps, alpha, mode)
}

/// Both sides of `|Σ_{𝒟×𝒟′} Ω − Ω(s,t;u,v)| ≤ C″(min 𝐕 + η^{(1)} + η^{(2)})`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaximalCheck {
    pub grid_sum: f64,
    pub omega: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub quantities: MaximalQuantities,
}

impl MaximalCheck {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + 1e-9) + 1e-12
    }
}

pub fn check_maximal_inequality<J: JointPath + ?Sized>(
    jp: &J,
    g: &GridPartition,
    alpha: Option<f64>,
    mode: VariationMode,
) -> Result<MaximalCheck> {
    let exps = Exponents::for_path(jp);
    let alpha = alpha.unwrap_or_else(|| exps.default_alpha());
    let cache = GridCache::new(jp, g)?;
    let quantities = quantities_on(&cache, &exps, alpha, mode)?;
    let (m1, m2) = cache.sizes();
    let p1: Vec<usize> = (0..m1).collect();
    let p2: Vec<usize> = (0..m2).collect();
    let grid_sum = cache.sum(&p1, &p2);
    let omega = cache.omega(0, m1 - 1, 0, m2 - 1);
    let rhs = quantities.maximal_bound();
    Ok(MaximalCheck {
        grid_sum,
        omega,
        lhs: (grid_sum - omega).abs(),
        rhs,
        quantities,
    })
}

/// One point removal on a grid partition.
#[derive(Debug, Clone, PartialEq)]
pub struct PointRemoval {
    pub axis: usize,
    /// Position of the removed point within its axis.
    pub position: usize,
    pub partition: GridPartition,
    /// `|Δ|`: change of the grid sum.
    pub cost: f64,
    /// `C‴ (1/(m0−1))^{1/α} (𝐕 + η)` for the axis.
    pub ceiling: f64,
}

/// `Δ^{(1;m)} = Σ_n Γ(s_{m−1}, s_m, s_{m+1}; u_{n−1}, u_n)` for interior `m` of `p1`.
fn deltas1(cache: &GridCache, p1: &[usize], p2: &[usize]) -> Vec<f64> {
    (1..p1.len() - 1)
        .map(|m| {
            p2.windows(2)
                .map(|z| cache.gamma(p1[m - 1], p1[m], p1[m + 1], z[0], z[1]))
                .sum()
        })
        .collect()
}

fn deltas2(cache: &GridCache, p1: &[usize], p2: &[usize]) -> Vec<f64> {
    (1..p2.len() - 1)
        .map(|n| {
            p1.windows(2)
                .map(|w| cache.gamma2(p2[n - 1], p2[n], p2[n + 1], w[0], w[1]))
                .sum()
        })
        .collect()
}

/// First index of the smallest `|Δ|`.
fn argmin_abs(ds: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, d) in ds.iter().enumerate() {
        if d.abs() < best.1 {
            best = (i, d.abs());
        }
    }
    best
}

/// Removes the interior point of `axis` whose removal changes the grid sum least.
///
/// Returns [`Error::Invariant`] if the change exceeds the removal ceiling.
pub fn remove_point<J: JointPath + ?Sized>(
    jp: &J,
    g: &GridPartition,
    axis: usize,
    alpha: Option<f64>,
) -> Result<PointRemoval> {
    if axis != 1 && axis != 2 {
        return Err(Error::InvalidArgument(format!("axis must be 1 or 2, got {axis}")));
    }
    let m0 = g.axis(axis).len() - 1;
    if m0 < 2 {
        return Err(Error::PartitionTooSmall(m0 + 1));
    }
    let exps = Exponents::for_path(jp);
    let alpha = alpha.unwrap_or_else(|| exps.default_alpha());
    let cache = GridCache::new(jp, g)?;
    let q = quantities_on(&cache, &exps, alpha, VariationMode::Auto)?;
    let (m1, m2) = cache.sizes();
    let p1: Vec<usize> = (0..m1).collect();
    let p2: Vec<usize> = (0..m2).collect();
    let (ds, vol) = if axis == 1 {
        (deltas1(&cache, &p1, &p2), q.v1 + q.eta1)
    } else {
        (deltas2(&cache, &p1, &p2), q.v2 + q.eta2)
    };
    let (i, cost) = argmin_abs(&ds);
    let ceiling = q.constants.c3 * (1.0 / (m0 as f64 - 1.0)).powf(1.0 / alpha) * vol;
    if cost > ceiling * (1.0 + 1e-9) {
        return Err(Error::Invariant(format!(
            "removal cost {cost:e} exceeds ceiling {ceiling:e}"
        )));
    }
    Ok(PointRemoval {
        axis,
        position: i + 1,
        partition: g.remove(axis, i + 1)?,
        cost,
        ceiling,
    })
}

/// Totals of the three successive-removal reductions to the trivial partition.
#[derive(Debug, Clone, PartialEq)]
pub struct EndpointReport {
    /// `Σ|Δ|` reducing `𝒟 × {u,v}` along axis 1.
    pub axis1_total: f64,
    /// `ζ(1/α) η^{(1)}`.
    pub axis1_bound: f64,
    pub axis2_total: f64,
    /// `ζ(1/α) η^{(2)}`.
    pub axis2_bound: f64,
    /// `|Σ_{𝒟×𝒟′} − Σ_{𝒟×{u,v}} − Σ_{{s,t}×𝒟′} + Ω(s,t;u,v)|`.
    pub endpoint_term: f64,
    /// `C′ min(𝐕^{(1)}, 𝐕^{(2)})`.
    pub endpoint_bound: f64,
}

impl EndpointReport {
    pub fn holds(&self) -> bool {
        let ok = |a: f64, b: f64| a <= b * (1.0 + 1e-9) + 1e-12;
        ok(self.axis1_total, self.axis1_bound)
            && ok(self.axis2_total, self.axis2_bound)
            && ok(self.endpoint_term, self.endpoint_bound)
    }
}

pub fn endpoint_reductions<J: JointPath + ?Sized>(
    jp: &J,
    g: &GridPartition,
    alpha: Option<f64>,
) -> Result<EndpointReport> {
    let exps = Exponents::for_path(jp);
    let alpha = alpha.unwrap_or_else(|| exps.default_alpha());
    let cache = GridCache::new(jp, g)?;
    let q = quantities_on(&cache, &exps, alpha, VariationMode::Auto)?;
    let (m1, m2) = cache.sizes();
    let ends1 = [0, m1 - 1];
    let ends2 = [0, m2 - 1];
    let mut p1: Vec<usize> = (0..m1).collect();
    let mut axis1_total = 0.0;
    while p1.len() > 2 {
        let (i, c) = argmin_abs(&deltas1(&cache, &p1, &ends2));
        axis1_total += c;
        p1.remove(i + 1);
    }
    let mut p2: Vec<usize> = (0..m2).collect();
    let mut axis2_total = 0.0;
    while p2.len() > 2 {
        let (i, c) = argmin_abs(&deltas2(&cache, &ends1, &p2));
        axis2_total += c;
        p2.remove(i + 1);
    }
    let full1: Vec<usize> = (0..m1).collect();
    let full2: Vec<usize> = (0..m2).collect();
    let endpoint_term = (cache.sum(&full1, &full2) - cache.sum(&full1, &ends2) - cache.sum(&ends1, &full2)
        + cache.omega(0, m1 - 1, 0, m2 - 1))
    .abs();
    let z = q.constants.zeta_inv_alpha;
    Ok(EndpointReport {
        axis1_total,
        axis1_bound: z * q.eta1,
        axis2_total,
        axis2_bound: z * q.eta2,
        endpoint_term,
        endpoint_bound: q.constants.c1 * q.v1.min(q.v2),
    })
}
