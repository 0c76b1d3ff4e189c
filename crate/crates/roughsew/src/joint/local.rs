//! Local expansions: remainders, `Ω`, its defects and grid sums.

use rayon::prelude::*;

use super::{GridPartition, JointDerivs, JointPath, Rect};
use crate::error::{Error, Result};
use crate::tensor::{contract_inner_prefix, contract_prefix, pow, sub_assign};

/// `Σ_{r,c,z} f[r][c] a[r·d + z] b[c·d + z]` for a `rows × cols` array `f`.
pub(crate) fn pair(f: &[f64], rows: usize, cols: usize, a: &[f64], b: &[f64], d: usize) -> f64 {
    debug_assert_eq!(f.len(), rows * cols);
    let mut acc = 0.0;
    for r in 0..rows {
        let ar = &a[r * d..(r + 1) * d];
        for c in 0..cols {
            let v = f[r * cols + c];
            if v == 0.0 {
                continue;
            }
            let bc = &b[c * d..(c + 1) * d];
            acc += v * ar.iter().zip(bc).map(|(x, y)| x * y).sum::<f64>();
        }
    }
    acc
}

/// `Ω = Σ_{j,k} Y^{(1;j,k)}_{s,u}(X̃^{k+1}_{u,v})(X^{j+1}_{s,t})`.
pub(crate) fn omega_from(ds: &JointDerivs, x: &[Vec<f64>], xt: &[Vec<f64>]) -> f64 {
    let d = ds.dim;
    let mut acc = 0.0;
    for j in 0..=ds.n1 {
        for k in 0..=ds.n2 {
            acc += pair(ds.f1(j, k), pow(d, k), pow(d, j), &xt[k + 1], &x[j + 1], d);
        }
    }
    acc
}

/// `Ω` through the second family, `Σ Y^{(2;k,j)}_{s,u}(X^{j+1}_{s,t})(X̃^{k+1}_{u,v})`.
pub(crate) fn omega2_from(ds: &JointDerivs, x: &[Vec<f64>], xt: &[Vec<f64>]) -> f64 {
    let d = ds.dim;
    let mut acc = 0.0;
    for k in 0..=ds.n2 {
        for j in 0..=ds.n1 {
            acc += pair(ds.f2(k, j), pow(d, j), pow(d, k), &x[j + 1], &xt[k + 1], d);
        }
    }
    acc
}

/// `R^{(1;j,k)}_{s;u,v}` from derivatives at `(s,u)`, `(s,v)` and `X̃_{u,v}`.
pub(crate) fn r1_from(d_su: &JointDerivs, d_sv: &JointDerivs, xt: &[Vec<f64>], j: usize, k: usize) -> Vec<f64> {
    let d = d_su.dim;
    let inner = pow(d, k) * pow(d, j);
    let mut r = d_sv.f1(j, k).to_vec();
    for l in 0..=d_su.n2 - k {
        sub_assign(&mut r, &contract_prefix(d_su.f1(j, k + l), &xt[l], inner));
    }
    r
}

/// `R^{(2;k,j)}_{u;s,t}` from derivatives at `(s,u)`, `(t,u)` and `X_{s,t}`.
pub(crate) fn r2_from(d_su: &JointDerivs, d_tu: &JointDerivs, x: &[Vec<f64>], k: usize, j: usize) -> Vec<f64> {
    let d = d_su.dim;
    let inner = pow(d, j) * pow(d, k);
    let mut r = d_tu.f2(k, j).to_vec();
    for m in 0..=d_su.n1 - j {
        sub_assign(&mut r, &contract_prefix(d_su.f2(k, j + m), &x[m], inner));
    }
    r
}

/// Corner derivatives of a rectangle: `(s,u)`, `(s,v)`, `(t,u)`, `(t,v)`.
pub(crate) struct Corners<'a> {
    pub su: &'a JointDerivs,
    pub sv: &'a JointDerivs,
    pub tu: &'a JointDerivs,
    pub tv: &'a JointDerivs,
}

/// `𝐑^{(1;j,k)}_{s,t;u,v} = R^{(1;j,k)}_{t;u,v} − Σ_{m=0}^{N−j} R^{(1;j+m,k)}_{s;u,v}(X^m_{s,t})`.
pub(crate) fn rr1_from(c: &Corners<'_>, x: &[Vec<f64>], xt: &[Vec<f64>], j: usize, k: usize) -> Vec<f64> {
    let d = c.su.dim;
    let mut r = r1_from(c.tu, c.tv, xt, j, k);
    for m in 0..=c.su.n1 - j {
        let low = r1_from(c.su, c.sv, xt, j + m, k);
        sub_assign(&mut r, &contract_inner_prefix(&low, pow(d, k), &x[m], pow(d, j)));
    }
    r
}

/// `𝐑^{(2;k,j)}_{u,v;s,t} = R^{(2;k,j)}_{v;s,t} − Σ_{n=0}^{Ñ−k} R^{(2;k+n,j)}_{u;s,t}(X̃^n_{u,v})`.
pub(crate) fn rr2_from(c: &Corners<'_>, x: &[Vec<f64>], xt: &[Vec<f64>], k: usize, j: usize) -> Vec<f64> {
    let d = c.su.dim;
    let mut r = r2_from(c.sv, c.tv, x, k, j);
    for n in 0..=c.su.n2 - k {
        let low = r2_from(c.su, c.tu, x, k + n, j);
        sub_assign(&mut r, &contract_inner_prefix(&low, pow(d, j), &xt[n], pow(d, k)));
    }
    r
}

/// `Σ_{j,k} R^{(2;k,j)}_{u;s,s'}(X^{j+1}_{s',t})(X̃^{k+1}_{u,v})`.
pub(crate) fn gamma_from(
    d_su: &JointDerivs,
    d_mu: &JointDerivs,
    x_sm: &[Vec<f64>],
    x_mt: &[Vec<f64>],
    xt: &[Vec<f64>],
) -> f64 {
    let d = d_su.dim;
    let mut acc = 0.0;
    for k in 0..=d_su.n2 {
        for j in 0..=d_su.n1 {
            let r = r2_from(d_su, d_mu, x_sm, k, j);
            acc += pair(&r, pow(d, j), pow(d, k), &x_mt[j + 1], &xt[k + 1], d);
        }
    }
    acc
}

/// `Σ_{j,k} R^{(1;j,k)}_{s;u,u'}(X̃^{k+1}_{u',v})(X^{j+1}_{s,t})`.
pub(crate) fn gamma2_from(
    d_su: &JointDerivs,
    d_sm: &JointDerivs,
    xt_um: &[Vec<f64>],
    xt_mv: &[Vec<f64>],
    x: &[Vec<f64>],
) -> f64 {
    let d = d_su.dim;
    let mut acc = 0.0;
    for j in 0..=d_su.n1 {
        for k in 0..=d_su.n2 {
            let r = r1_from(d_su, d_sm, xt_um, j, k);
            acc += pair(&r, pow(d, k), pow(d, j), &xt_mv[k + 1], &x[j + 1], d);
        }
    }
    acc
}

/// `Σ_{j,k} 𝐑^{(1;j,k)}_{s,s';u,u'}(X̃^{k+1}_{u',v})(X^{j+1}_{s',t})`.
pub(crate) fn theta_from(
    c: &Corners<'_>,
    x_sm: &[Vec<f64>],
    x_mt: &[Vec<f64>],
    xt_um: &[Vec<f64>],
    xt_mv: &[Vec<f64>],
) -> f64 {
    let d = c.su.dim;
    let mut acc = 0.0;
    for j in 0..=c.su.n1 {
        for k in 0..=c.su.n2 {
            let r = rr1_from(c, x_sm, xt_um, j, k);
            acc += pair(&r, pow(d, k), pow(d, j), &xt_mv[k + 1], &x_mt[j + 1], d);
        }
    }
    acc
}

fn check_interval(len: usize, a: usize, b: usize) -> Result<()> {
    if a >= b || b >= len {
        return Err(Error::InvalidArgument(format!("bad grid interval [{a}, {b}]")));
    }
    Ok(())
}

pub(crate) fn check_rect<J: JointPath + ?Sized>(jp: &J, r: Rect) -> Result<()> {
    check_interval(jp.driver1().len(), r.s, r.t)?;
    check_interval(jp.driver2().len(), r.u, r.v)
}

fn check_orders(n: usize, max: usize) -> Result<()> {
    if n > max {
        return Err(Error::LevelOutOfRange { level: n, max });
    }
    Ok(())
}

fn lv1<J: JointPath + ?Sized>(jp: &J, a: usize, b: usize) -> Result<Vec<Vec<f64>>> {
    jp.driver1().levels(a, b, jp.order1() + 1)
}

fn lv2<J: JointPath + ?Sized>(jp: &J, a: usize, b: usize) -> Result<Vec<Vec<f64>>> {
    jp.driver2().levels(a, b, jp.order2() + 1)
}

/// `R^{(1;j,k)}_{s;u,v}` as a `d^k × d^j` array.
pub fn first_remainder1<J: JointPath + ?Sized>(
    jp: &J,
    j: usize,
    k: usize,
    s: usize,
    u: usize,
    v: usize,
) -> Result<Vec<f64>> {
    check_orders(j, jp.order1())?;
    check_orders(k, jp.order2())?;
    check_interval(jp.driver2().len(), u, v)?;
    if s >= jp.driver1().len() {
        return Err(Error::InvalidArgument(format!("node {s} off the grid")));
    }
    Ok(r1_from(&jp.derivs(s, u), &jp.derivs(s, v), &lv2(jp, u, v)?, j, k))
}

/// `R^{(2;k,j)}_{u;s,t}` as a `d^j × d^k` array.
pub fn first_remainder2<J: JointPath + ?Sized>(
    jp: &J,
    k: usize,
    j: usize,
    u: usize,
    s: usize,
    t: usize,
) -> Result<Vec<f64>> {
    check_orders(j, jp.order1())?;
    check_orders(k, jp.order2())?;
    check_interval(jp.driver1().len(), s, t)?;
    if u >= jp.driver2().len() {
        return Err(Error::InvalidArgument(format!("node {u} off the grid")));
    }
    Ok(r2_from(&jp.derivs(s, u), &jp.derivs(t, u), &lv1(jp, s, t)?, k, j))
}

/// `𝐑^{(1;j,k)}_{s,t;u,v}` as a `d^k × d^j` array.
pub fn second_remainder1<J: JointPath + ?Sized>(jp: &J, j: usize, k: usize, r: Rect) -> Result<Vec<f64>> {
    check_orders(j, jp.order1())?;
    check_orders(k, jp.order2())?;
    check_rect(jp, r)?;
    let (su, sv, tu, tv) = (
        jp.derivs(r.s, r.u),
        jp.derivs(r.s, r.v),
        jp.derivs(r.t, r.u),
        jp.derivs(r.t, r.v),
    );
    let c = Corners {
        su: &su,
        sv: &sv,
        tu: &tu,
        tv: &tv,
    };
    Ok(rr1_from(&c, &lv1(jp, r.s, r.t)?, &lv2(jp, r.u, r.v)?, j, k))
}

/// `𝐑^{(2;k,j)}_{u,v;s,t}` as a `d^j × d^k` array.
pub fn second_remainder2<J: JointPath + ?Sized>(jp: &J, k: usize, j: usize, r: Rect) -> Result<Vec<f64>> {
    check_orders(j, jp.order1())?;
    check_orders(k, jp.order2())?;
    check_rect(jp, r)?;
    let (su, sv, tu, tv) = (
        jp.derivs(r.s, r.u),
        jp.derivs(r.s, r.v),
        jp.derivs(r.t, r.u),
        jp.derivs(r.t, r.v),
    );
    let c = Corners {
        su: &su,
        sv: &sv,
        tu: &tu,
        tv: &tv,
    };
    Ok(rr2_from(&c, &lv1(jp, r.s, r.t)?, &lv2(jp, r.u, r.v)?, k, j))
}

/// Local approximation `Ω(s,t;u,v)` through the first family.
pub fn omega_local<J: JointPath + ?Sized>(jp: &J, r: Rect) -> Result<f64> {
    check_rect(jp, r)?;
    Ok(omega_from(
        &jp.derivs(r.s, r.u),
        &lv1(jp, r.s, r.t)?,
        &lv2(jp, r.u, r.v)?,
    ))
}

/// `Ω(s,t;u,v)` through the second family; agrees with [`omega_local`].
pub fn omega_local2<J: JointPath + ?Sized>(jp: &J, r: Rect) -> Result<f64> {
    check_rect(jp, r)?;
    Ok(omega2_from(
        &jp.derivs(r.s, r.u),
        &lv1(jp, r.s, r.t)?,
        &lv2(jp, r.u, r.v)?,
    ))
}

/// A defect computed from its definition and from its remainder identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefectPair {
    pub definition: f64,
    pub identity: f64,
}

impl DefectPair {
    pub fn residual(&self) -> f64 {
        (self.definition - self.identity).abs()
    }
}

/// `Γ(s,s',t;u,v) = Ω(s,s';u,v) + Ω(s',t;u,v) − Ω(s,t;u,v)` along axis 1.
pub fn gamma_defect<J: JointPath + ?Sized>(
    jp: &J,
    s: usize,
    sm: usize,
    t: usize,
    u: usize,
    v: usize,
) -> Result<DefectPair> {
    check_interval(jp.driver1().len(), s, sm)?;
    check_interval(jp.driver1().len(), sm, t)?;
    let om = |a, b| omega_local(jp, Rect::new(a, b, u, v));
    let definition = om(s, sm)? + om(sm, t)? - om(s, t)?;
    let identity = gamma_from(
        &jp.derivs(s, u),
        &jp.derivs(sm, u),
        &lv1(jp, s, sm)?,
        &lv1(jp, sm, t)?,
        &lv2(jp, u, v)?,
    );
    Ok(DefectPair { definition, identity })
}

/// Axis-2 analogue: `Ω(s,t;u,u') + Ω(s,t;u',v) − Ω(s,t;u,v)`.
pub fn gamma2_defect<J: JointPath + ?Sized>(
    jp: &J,
    u: usize,
    um: usize,
    v: usize,
    s: usize,
    t: usize,
) -> Result<DefectPair> {
    check_interval(jp.driver2().len(), u, um)?;
    check_interval(jp.driver2().len(), um, v)?;
    let om = |a, b| omega_local(jp, Rect::new(s, t, a, b));
    let definition = om(u, um)? + om(um, v)? - om(u, v)?;
    let identity = gamma2_from(
        &jp.derivs(s, u),
        &jp.derivs(s, um),
        &lv2(jp, u, um)?,
        &lv2(jp, um, v)?,
        &lv1(jp, s, t)?,
    );
    Ok(DefectPair { definition, identity })
}

/// `Θ = Γ(s,s',t;u,u') + Γ(s,s',t;u',v) − Γ(s,s',t;u,v)`.
pub fn theta_defect<J: JointPath + ?Sized>(
    jp: &J,
    (s, sm, t): (usize, usize, usize),
    (u, um, v): (usize, usize, usize),
) -> Result<DefectPair> {
    check_interval(jp.driver2().len(), u, um)?;
    check_interval(jp.driver2().len(), um, v)?;
    let g = |a, b| gamma_defect(jp, s, sm, t, a, b).map(|p| p.definition);
    let definition = g(u, um)? + g(um, v)? - g(u, v)?;
    let (su, sv, tu, tv) = (jp.derivs(s, u), jp.derivs(s, um), jp.derivs(sm, u), jp.derivs(sm, um));
    let c = Corners {
        su: &su,
        sv: &sv,
        tu: &tu,
        tv: &tv,
    };
    let identity = theta_from(
        &c,
        &lv1(jp, s, sm)?,
        &lv1(jp, sm, t)?,
        &lv2(jp, u, um)?,
        &lv2(jp, um, v)?,
    );
    Ok(DefectPair { definition, identity })
}

/// Ordered grid sum `Σ_{m,n} Ω(s_m,s_{m+1}; u_n,u_{n+1})`.
///
/// Rows are evaluated in parallel and summed in row order.
pub fn grid_sum<J: JointPath + ?Sized>(jp: &J, g: &GridPartition) -> Result<f64> {
    check_rect(jp, g.rect())?;
    let x: Vec<Vec<Vec<f64>>> = g.axis1.windows(2).map(|w| lv1(jp, w[0], w[1])).collect::<Result<_>>()?;
    let xt: Vec<Vec<Vec<f64>>> = g.axis2.windows(2).map(|w| lv2(jp, w[0], w[1])).collect::<Result<_>>()?;
    let rows: Vec<f64> = (0..x.len())
        .into_par_iter()
        .map(|m| {
            let s = g.axis1[m];
            let mut acc = 0.0;
            for (n, xtn) in xt.iter().enumerate() {
                acc += omega_from(&jp.derivs(s, g.axis2[n]), &x[m], xtn);
            }
            acc
        })
        .collect();
    Ok(rows.iter().sum())
}
