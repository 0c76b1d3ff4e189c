//! Distances between joint paths and the local Lipschitz estimate.

use super::maximal::GridCache;
use super::{grid_sum, Exponents, GridPartition, JointPath};
use crate::controls::{mixed_omega_norm, omega_norm, p_variation, NormValue};
use crate::error::{Error, Result};
use crate::roughpath::RoughPath;
use crate::tensor::{norm, sub};

/// `Σ_{l=1}^{⌊p⌋} V^{p/l}(X^l − X′^l)` over sub-partitions of the given grid points.
pub fn driver_distance(x: &RoughPath, y: &RoughPath, points: &[usize]) -> Result<f64> {
    if x.times() != y.times() || x.dim() != y.dim() {
        return Err(Error::InvalidArgument("drivers must share the sample grid".into()));
    }
    let m = points.len();
    let top = x.floor_p();
    let mut diffs = vec![Vec::new(); m * m];
    for a in 0..m {
        for b in a + 1..m {
            let lx = x.levels(points[a], points[b], top)?;
            let ly = y.levels(points[a], points[b], top)?;
            diffs[a * m + b] = (1..=top).map(|l| norm(&sub(&lx[l], &ly[l]))).collect::<Vec<f64>>();
        }
    }
    let mut total = 0.0;
    for l in 1..=top {
        total += p_variation(m, |a, b| diffs[a * m + b][l - 1], x.p() / l as f64)?;
    }
    Ok(total)
}

fn add(acc: NormValue, v: NormValue) -> NormValue {
    match (acc, v) {
        (NormValue::Finite(a), NormValue::Finite(b)) => NormValue::Finite(a + b),
        _ => NormValue::Infinite,
    }
}

/// `d(Y, Y′) = Σ_{j,k} |Y^{(1;j,k)}_{s,u} − Y′^{(1;j,k)}_{s,u}| + ‖ΔR^{(1;j,k)}_s‖
/// + ‖ΔR^{(2;k,j)}_u‖ + ‖Δ𝐑^{(1;j,k)}‖` over the rectangles of `g`.
///
/// Norms use `ω = ω_X + ω_{X′}` on each axis.
pub fn joint_distance<J1, J2>(a: &J1, b: &J2, g: &GridPartition) -> Result<NormValue>
where
    J1: JointPath + ?Sized,
    J2: JointPath + ?Sized,
{
    for (x, y) in [(a.driver1(), b.driver1()), (a.driver2(), b.driver2())] {
        if x.times() != y.times() || x.dim() != y.dim() {
            return Err(Error::InvalidArgument("joint paths must share sample grids".into()));
        }
    }
    if a.order1() != b.order1() || a.order2() != b.order2() {
        return Err(Error::InvalidArgument("joint paths must have equal orders".into()));
    }
    let ca = GridCache::new(a, g)?;
    let cb = GridCache::new(b, g)?;
    let (m1, m2) = ca.sizes();
    let w1 = |i: usize, j: usize| ca.w1(i, j) + cb.w1(i, j);
    let w2 = |i: usize, j: usize| ca.w2(i, j) + cb.w2(i, j);
    let exps = Exponents::for_path(a);
    let mut total = NormValue::Finite(0.0);
    for j in 0..=a.order1() {
        for k in 0..=a.order2() {
            let corner = norm(&sub(ca.node(0, 0).f1(j, k), cb.node(0, 0).f1(j, k)));
            total = add(total, NormValue::Finite(corner));
            let r1 = omega_norm(
                m2,
                |c, e| norm(&sub(&ca.r1(j, k, 0, c, e), &cb.r1(j, k, 0, c, e))),
                w2,
                1.0 / exps.q2[k],
            );
            let r2 = omega_norm(
                m1,
                |i, l| norm(&sub(&ca.r2(k, j, 0, i, l), &cb.r2(k, j, 0, i, l))),
                w1,
                1.0 / exps.q1[j],
            );
            let rr = mixed_omega_norm(
                m1,
                m2,
                |i, l, c, e| norm(&sub(&ca.rr1(j, k, i, l, c, e), &cb.rr1(j, k, i, l, c, e))),
                w1,
                w2,
                1.0 / exps.q1[j],
                1.0 / exps.q2[k],
            );
            total = add(add(add(total, r1), r2), rr);
        }
    }
    Ok(total)
}

/// One row of a stability sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// `d(Y, Y′)` on the norm grid.
    pub distance: NormValue,
    pub driver_distance1: f64,
    pub driver_distance2: f64,
    pub integral: f64,
    pub integral_other: f64,
}

impl StabilityReport {
    pub fn gap(&self) -> f64 {
        (self.integral - self.integral_other).abs()
    }

    /// `d(Y,Y′) + ρ(X,X′) + ρ(X̃,X̃′)`.
    pub fn total_distance(&self) -> NormValue {
        add(
            self.distance,
            NormValue::Finite(self.driver_distance1 + self.driver_distance2),
        )
    }
}

/// Distances on `norm_grid` and grid-sum integrals on the fixed `int_grid`.
pub fn stability<J1, J2>(a: &J1, b: &J2, norm_grid: &GridPartition, int_grid: &GridPartition) -> Result<StabilityReport>
where
    J1: JointPath + ?Sized,
    J2: JointPath + ?Sized,
{
    Ok(StabilityReport {
        distance: joint_distance(a, b, norm_grid)?,
        driver_distance1: driver_distance(a.driver1(), b.driver1(), &int_grid.axis1)?,
        driver_distance2: driver_distance(a.driver2(), b.driver2(), &int_grid.axis2)?,
        integral: grid_sum(a, int_grid)?,
        integral_other: grid_sum(b, int_grid)?,
    })
}
