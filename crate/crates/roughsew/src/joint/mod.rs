//! Jointly controlled two-parameter paths with scalar codomain.
//!
//! A joint path over drivers `X` (axis 1, variable `s`, order `N`) and `X̃`
//! (axis 2, variable `u`, order `Ñ`) is described by two derivative families
//! at every grid node `(s, u)`:
//!
//! * `Y^{(1;j,k)}` stored as a `d^k × d^j` array `[y][x]`;
//! * `Y^{(2;k,j)}` stored as a `d^j × d^k` array `[x][y]`.
//!
//! The first index of each array is the argument applied first, so expansion
//! along that variable is a prefix contraction. The integrand pairs the last
//! letter of `X^{j+1}` with the last letter of `X̃^{k+1}` through the
//! Euclidean inner product.

mod integral;
mod local;
mod maximal;
mod stability;

pub use integral::*;
pub use local::*;
pub use maximal::*;
pub use stability::*;

use crate::controlled::ControlledPath;
use crate::error::{Error, Result};
use crate::roughpath::RoughPath;
use crate::special::zeta;
use crate::tensor::{kron, pow, transpose};

/// Both derivative families at one grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDerivs {
    pub dim: usize,
    pub n1: usize,
    pub n2: usize,
    /// `f1[j * (n2 + 1) + k]` is `Y^{(1;j,k)}` as `[y][x]`.
    pub f1: Vec<Vec<f64>>,
    /// `f2[k * (n1 + 1) + j]` is `Y^{(2;k,j)}` as `[x][y]`.
    pub f2: Vec<Vec<f64>>,
}

impl JointDerivs {
    /// Builds both families from the first; the second is its transpose.
    pub fn from_family1(dim: usize, n1: usize, n2: usize, f1: Vec<Vec<f64>>) -> Self {
        let mut f2 = vec![Vec::new(); f1.len()];
        for j in 0..=n1 {
            for k in 0..=n2 {
                f2[k * (n1 + 1) + j] = transpose(&f1[j * (n2 + 1) + k], pow(dim, k), pow(dim, j));
            }
        }
        Self { dim, n1, n2, f1, f2 }
    }

    pub fn zeros(dim: usize, n1: usize, n2: usize) -> Self {
        let mut f1 = Vec::new();
        for j in 0..=n1 {
            for k in 0..=n2 {
                f1.push(vec![0.0; pow(dim, j) * pow(dim, k)]);
            }
        }
        Self::from_family1(dim, n1, n2, f1)
    }

    #[inline]
    pub fn f1(&self, j: usize, k: usize) -> &[f64] {
        &self.f1[j * (self.n2 + 1) + k]
    }

    #[inline]
    pub fn f2(&self, k: usize, j: usize) -> &[f64] {
        &self.f2[k * (self.n1 + 1) + j]
    }

    /// Largest entry-wise deviation from `Y^{(1;j,k)}(y)(x) = Y^{(2;k,j)}(x)(y)`.
    pub fn symmetry_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for j in 0..=self.n1 {
            for k in 0..=self.n2 {
                let t = transpose(self.f2(k, j), pow(d, j), pow(d, k));
                for (a, b) in self.f1(j, k).iter().zip(&t) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
        worst
    }

    /// Largest absolute entry, used as a scale for relative checks.
    pub fn scale(&self) -> f64 {
        self.f1.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// A jointly `(X, X̃)`-controlled path with scalar codomain.
pub trait JointPath: Sync {
    fn driver1(&self) -> &RoughPath;
    fn driver2(&self) -> &RoughPath;
    /// Derivative families at grid node `(s, u)`.
    fn derivs(&self, s: usize, u: usize) -> JointDerivs;

    fn order1(&self) -> usize {
        self.driver1().order()
    }

    fn order2(&self) -> usize {
        self.driver2().order()
    }

    fn dim(&self) -> usize {
        self.driver1().dim()
    }
}

impl<J: JointPath + ?Sized> JointPath for &J {
    fn driver1(&self) -> &RoughPath {
        (**self).driver1()
    }
    fn driver2(&self) -> &RoughPath {
        (**self).driver2()
    }
    fn derivs(&self, s: usize, u: usize) -> JointDerivs {
        (**self).derivs(s, u)
    }
}

pub(crate) fn check_rect_grid<J: JointPath + ?Sized>(jp: &J, g: &GridPartition) -> Result<()> {
    local::check_rect(jp, g.rect())
}

pub(crate) fn check_drivers(x: &RoughPath, y: &RoughPath) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch(x.dim(), y.dim()));
    }
    Ok(())
}

/// `Y ≡ c`: only `Y^{(1;0,0)} = c` is nonzero.
pub struct ConstantJoint<'a> {
    x: &'a RoughPath,
    y: &'a RoughPath,
    c: f64,
}

impl<'a> ConstantJoint<'a> {
    pub fn new(x: &'a RoughPath, y: &'a RoughPath, c: f64) -> Result<Self> {
        check_drivers(x, y)?;
        Ok(Self { x, y, c })
    }
}

impl JointPath for ConstantJoint<'_> {
    fn driver1(&self) -> &RoughPath {
        self.x
    }
    fn driver2(&self) -> &RoughPath {
        self.y
    }
    fn derivs(&self, _s: usize, _u: usize) -> JointDerivs {
        let mut d = JointDerivs::zeros(self.dim(), self.order1(), self.order2());
        d.f1[0][0] = self.c;
        d.f2[0][0] = self.c;
        d
    }
}

/// `Y_{s,u} = a_s b_u` for scalar controlled paths `a` over `X` and `b` over `X̃`.
pub struct ProductJoint<'a> {
    a: ControlledPath<'a>,
    b: ControlledPath<'a>,
}

impl<'a> ProductJoint<'a> {
    pub fn new(a: ControlledPath<'a>, b: ControlledPath<'a>) -> Result<Self> {
        if a.codim() != 1 || b.codim() != 1 {
            return Err(Error::InvalidArgument("product factors must be scalar".into()));
        }
        check_drivers(a.driver(), b.driver())?;
        Ok(Self { a, b })
    }

    pub fn factors(&self) -> (&ControlledPath<'a>, &ControlledPath<'a>) {
        (&self.a, &self.b)
    }
}

impl JointPath for ProductJoint<'_> {
    fn driver1(&self) -> &RoughPath {
        self.a.driver()
    }
    fn driver2(&self) -> &RoughPath {
        self.b.driver()
    }
    fn derivs(&self, s: usize, u: usize) -> JointDerivs {
        let da = self.a.derivatives(s).expect("grid node");
        let db = self.b.derivatives(u).expect("grid node");
        let (n1, n2) = (da.len() - 1, db.len() - 1);
        let mut f1 = Vec::new();
        for aj in &da {
            for bk in &db {
                f1.push(kron(bk, aj));
            }
        }
        let mut f2 = Vec::new();
        for bk in &db {
            for aj in &da {
                f2.push(kron(aj, bk));
            }
        }
        JointDerivs {
            dim: self.dim(),
            n1,
            n2,
            f1,
            f2,
        }
    }
}

/// `c · Y` for a joint path `Y`.
pub struct ScaledJoint<J> {
    pub inner: J,
    pub factor: f64,
}

impl<J: JointPath> JointPath for ScaledJoint<J> {
    fn driver1(&self) -> &RoughPath {
        self.inner.driver1()
    }
    fn driver2(&self) -> &RoughPath {
        self.inner.driver2()
    }
    fn derivs(&self, s: usize, u: usize) -> JointDerivs {
        let mut d = self.inner.derivs(s, u);
        for v in d.f1.iter_mut().chain(d.f2.iter_mut()).flatten() {
            *v *= self.factor;
        }
        d
    }
}

/// Grid-like partition `𝒟 × 𝒟′` given by sample indices of each driver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridPartition {
    pub axis1: Vec<usize>,
    pub axis2: Vec<usize>,
}

impl GridPartition {
    pub fn new(axis1: Vec<usize>, axis2: Vec<usize>) -> Result<Self> {
        for a in [&axis1, &axis2] {
            if a.len() < 2 {
                return Err(Error::PartitionTooSmall(a.len()));
            }
            if a.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidArgument(
                    "partition points must be strictly increasing".into(),
                ));
            }
        }
        Ok(Self { axis1, axis2 })
    }

    /// `{s, t} × {u, v}`.
    pub fn trivial(rect: Rect) -> Result<Self> {
        Self::new(vec![rect.s, rect.t], vec![rect.u, rect.v])
    }

    /// Every sample point of the rectangle.
    pub fn full(rect: Rect) -> Result<Self> {
        Self::new((rect.s..=rect.t).collect(), (rect.u..=rect.v).collect())
    }

    /// Every `stride`-th sample point of each axis (endpoints kept).
    pub fn strided(rect: Rect, stride: usize) -> Result<Self> {
        let axis = |a: usize, b: usize| {
            let mut v: Vec<usize> = (a..b).step_by(stride.max(1)).collect();
            v.push(b);
            v
        };
        Self::new(axis(rect.s, rect.t), axis(rect.u, rect.v))
    }

    pub fn rect(&self) -> Rect {
        Rect {
            s: self.axis1[0],
            t: *self.axis1.last().unwrap(),
            u: self.axis2[0],
            v: *self.axis2.last().unwrap(),
        }
    }

    pub fn axis(&self, axis: usize) -> &[usize] {
        if axis == 1 {
            &self.axis1
        } else {
            &self.axis2
        }
    }

    /// Largest adjacent time gap on each axis.
    pub fn mesh(&self, times1: &[f64], times2: &[f64]) -> (f64, f64) {
        let m = |a: &[usize], t: &[f64]| a.windows(2).map(|w| t[w[1]] - t[w[0]]).fold(0.0, f64::max);
        (m(&self.axis1, times1), m(&self.axis2, times2))
    }

    /// Midpoint refinement of both axes; `None` once neither axis can be refined.
    pub fn refine(&self) -> Option<Self> {
        let a = crate::sewing::refine(&self.axis1);
        let b = crate::sewing::refine(&self.axis2);
        if a.is_none() && b.is_none() {
            return None;
        }
        Some(Self {
            axis1: a.unwrap_or_else(|| self.axis1.clone()),
            axis2: b.unwrap_or_else(|| self.axis2.clone()),
        })
    }

    /// Removes the interior point at position `pos` of the given axis.
    pub fn remove(&self, axis: usize, pos: usize) -> Result<Self> {
        let mut g = self.clone();
        let a = if axis == 1 { &mut g.axis1 } else { &mut g.axis2 };
        if pos == 0 || pos + 1 >= a.len() {
            return Err(Error::InvalidArgument(format!("position {pos} is not interior")));
        }
        a.remove(pos);
        Ok(g)
    }
}

/// Rectangle `[s,t] × [u,v]` in sample indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub s: usize,
    pub t: usize,
    pub u: usize,
    pub v: usize,
}

impl Rect {
    pub fn new(s: usize, t: usize, u: usize, v: usize) -> Self {
        Self { s, t, u, v }
    }
}

/// Exponent tables for both drivers.
#[derive(Debug, Clone, PartialEq)]
pub struct Exponents {
    /// `q_j` (remainder exponents) for axis 1.
    pub q1: Vec<f64>,
    /// `p/(j+1)` for axis 1.
    pub pv1: Vec<f64>,
    pub q2: Vec<f64>,
    pub pv2: Vec<f64>,
}

impl Exponents {
    /// Defaults `q_l = p/(⌊p⌋ − l)` and `p_l = p/(l + 1)`.
    pub fn default_for(p1: f64, p2: f64) -> Self {
        let tab = |p: f64| {
            let fp = p.floor() as usize;
            let q: Vec<f64> = (0..fp).map(|l| p / (fp - l) as f64).collect();
            let pv: Vec<f64> = (0..fp).map(|l| p / (l + 1) as f64).collect();
            (q, pv)
        };
        let (q1, pv1) = tab(p1);
        let (q2, pv2) = tab(p2);
        Self { q1, pv1, q2, pv2 }
    }

    pub fn for_path<J: JointPath + ?Sized>(j: &J) -> Self {
        Self::default_for(j.driver1().p(), j.driver2().p())
    }

    fn thetas(&self) -> impl Iterator<Item = f64> + '_ {
        let a = self.q1.iter().zip(&self.pv1).map(|(q, p)| 1.0 / q + 1.0 / p);
        let b = self.q2.iter().zip(&self.pv2).map(|(q, p)| 1.0 / q + 1.0 / p);
        a.chain(b)
    }

    /// `θ_* = min θ_l`.
    pub fn theta_lo(&self) -> f64 {
        self.thetas().fold(f64::INFINITY, f64::min)
    }

    /// `θ^* = max θ_l`.
    pub fn theta_hi(&self) -> f64 {
        self.thetas().fold(0.0, f64::max)
    }

    /// Default `α = (1/θ_* + 1)/2`.
    pub fn default_alpha(&self) -> f64 {
        (1.0 / self.theta_lo() + 1.0) / 2.0
    }
}

/// Constants of the maximal inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    pub alpha: f64,
    pub theta_lo: f64,
    pub theta_hi: f64,
    /// `ζ(1/α)`.
    pub zeta_inv_alpha: f64,
    /// `ζ(α θ_*)`.
    pub zeta_alpha_theta: f64,
    /// `C = P^{1 + αθ^*/2}` with `P = ⌊p⌋⌊p̃⌋`.
    pub c: f64,
    /// `C′ = ζ(1/α) (C ζ(αθ_*))^{1/α}`.
    pub c1: f64,
    /// `C″ = C′ + 2ζ(1/α)`.
    pub c2: f64,
    /// `C‴ = 2^{(1−α)/α} ((C ζ(αθ_*))^{1/α} + 1)`.
    pub c3: f64,
}

impl Constants {
    pub fn new(exps: &Exponents, alpha: f64) -> Result<Self> {
        let theta_lo = exps.theta_lo();
        let theta_hi = exps.theta_hi();
        if !(alpha > 1.0 / theta_lo && alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "α = {alpha} outside (1/θ_*, 1) = ({}, 1)",
                1.0 / theta_lo
            )));
        }
        let pairs = (exps.q1.len() * exps.q2.len()) as f64;
        let c = pairs.powf(1.0 + alpha * theta_hi / 2.0);
        let zeta_inv_alpha = zeta(1.0 / alpha)?;
        let zeta_alpha_theta = zeta(alpha * theta_lo)?;
        let k = (c * zeta_alpha_theta).powf(1.0 / alpha);
        let c1 = zeta_inv_alpha * k;
        let c2 = c1 + 2.0 * zeta_inv_alpha;
        let c3 = 2f64.powf((1.0 - alpha) / alpha) * (k + 1.0);
        Ok(Self {
            alpha,
            theta_lo,
            theta_hi,
            zeta_inv_alpha,
            zeta_alpha_theta,
            c,
            c1,
            c2,
            c3,
        })
    }
}


#[cfg(test)]
#[path = "tests.rs"]
mod joint_tests;
