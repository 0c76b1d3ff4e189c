//! The signature kernel as a jointly controlled path.
//!
//! `K(s,u) = Σ_l ⟨X^l_{s0,s}, X̃^l_{u0,u}⟩` is truncated at `L_ser`, with the
//! Gubinelli derivatives
//! `Y^{(1;j,k)}_{s,u}(y)(x) = Σ_{l ≥ max(j,k)} ⟨X̃^{l−k}_{u0,u} ⊗ y, X^{l−j}_{s0,s} ⊗ x⟩`.
//! [`goursat_oracle`] solves the kernel PDE independently for comparison.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::joint::{JointDerivs, JointPath, Rect};
use crate::roughpath::{RoughPath, Samples};
use crate::sewing::subsample;
use crate::tensor::{kron, norm, pow};

/// Default series truncation.
pub const DEFAULT_SERIES_LEVEL: usize = 12;

/// `m[y][x] += Σ_i a[i / d^j] b[i / d^k]` over words `i` of length `l`,
/// where `y = i mod d^k` and `x = i mod d^j` are the trailing letters.
fn accumulate(m: &mut [f64], a: &[f64], b: &[f64], j: usize, k: usize, d: usize) {
    let (dj, dk) = (pow(d, j), pow(d, k));
    let total = a.len() * dj;
    debug_assert_eq!(total, b.len() * dk);
    for i in 0..total {
        let av = a[i / dj];
        if av == 0.0 {
            continue;
        }
        m[(i % dk) * dj + i % dj] += av * b[i / dk];
    }
}

/// Signature kernel over two drivers with base points `(s0, u0)`.
pub struct KernelInstance<'a> {
    x: &'a RoughPath,
    y: &'a RoughPath,
    s0: usize,
    u0: usize,
    lser: usize,
    /// `sx[s − s0][l] = X^l_{s0,s}`.
    sx: Vec<Vec<Vec<f64>>>,
    sy: Vec<Vec<Vec<f64>>>,
    beta_x: f64,
    beta_y: f64,
}

/// A truncated kernel value with its tail estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub value: f64,
    pub tail: f64,
}

impl<'a> KernelInstance<'a> {
    /// Requires both drivers lifted to at least `lser` levels and `lser ≥ 2⌊p⌋`.
    pub fn new(x: &'a RoughPath, y: &'a RoughPath, s0: usize, u0: usize, lser: usize) -> Result<Self> {
        crate::joint::check_drivers(x, y)?;
        let need = 2 * x.floor_p().max(y.floor_p());
        if lser < need {
            return Err(Error::InvalidArgument(format!(
                "series level {lser} below 2⌊p⌋ = {need}"
            )));
        }
        for r in [x, y] {
            if r.level() < lser {
                return Err(Error::LevelOutOfRange {
                    level: lser,
                    max: r.level(),
                });
            }
        }
        let prefix = |r: &RoughPath, base: usize| -> Result<Vec<Vec<Vec<f64>>>> {
            Ok(r.prefix_signatures(base, lser)?
                .into_iter()
                .map(|t| t.into_levels())
                .collect())
        };
        let sx = prefix(x, s0)?;
        let sy = prefix(y, u0)?;
        let beta_x = fit_beta(x, s0, lser)?;
        let beta_y = fit_beta(y, u0, lser)?;
        Ok(Self {
            x,
            y,
            s0,
            u0,
            lser,
            sx,
            sy,
            beta_x,
            beta_y,
        })
    }

    pub fn series_level(&self) -> usize {
        self.lser
    }

    pub fn base(&self) -> (usize, usize) {
        (self.s0, self.u0)
    }

    /// Fitted decay constants `β` of both drivers.
    pub fn betas(&self) -> (f64, f64) {
        (self.beta_x, self.beta_y)
    }

    fn check_node(&self, s: usize, u: usize) -> Result<()> {
        if s < self.s0 || s >= self.x.len() || u < self.u0 || u >= self.y.len() {
            return Err(Error::InvalidArgument(format!(
                "node ({s}, {u}) outside the kernel domain"
            )));
        }
        Ok(())
    }

    fn check_orders(&self, j: usize, k: usize) -> Result<()> {
        if j > self.x.order() {
            return Err(Error::LevelOutOfRange {
                level: j,
                max: self.x.order(),
            });
        }
        if k > self.y.order() {
            return Err(Error::LevelOutOfRange {
                level: k,
                max: self.y.order(),
            });
        }
        Ok(())
    }

    /// `Σ_{l ≤ L_ser} ⟨X^l_{s0,s}, X̃^l_{u0,u}⟩` with its tail bound.
    pub fn kernel_value(&self, s: usize, u: usize) -> Result<KernelValue> {
        self.check_node(s, u)?;
        let (a, b) = (&self.sx[s - self.s0], &self.sy[u - self.u0]);
        let value = (0..=self.lser).map(|l| crate::tensor::dot(&a[l], &b[l])).sum();
        Ok(KernelValue {
            value,
            tail: self.tail_bound(s, u),
        })
    }

    /// `Σ_{l > L_ser} ω^{l/p} ω̃^{l/p̃} / (β Γ(l/p + 1) β̃ Γ(l/p̃ + 1))`.
    pub fn tail_bound(&self, s: usize, u: usize) -> f64 {
        let (w, wt) = (self.x.omega(self.s0, s), self.y.omega(self.u0, u));
        if w == 0.0 || wt == 0.0 {
            return 0.0;
        }
        let (p, pt) = (self.x.p(), self.y.p());
        let mut acc = 0.0;
        for l in self.lser + 1..self.lser + 400 {
            let lf = l as f64;
            let ln = lf / p * w.ln() + lf / pt * wt.ln()
                - ln_gamma(lf / p + 1.0)
                - ln_gamma(lf / pt + 1.0)
                - (self.beta_x * self.beta_y).ln();
            let term = ln.exp();
            acc += term;
            if term < 1e-18 * acc.max(f64::MIN_POSITIVE) && l > self.lser + 8 {
                break;
            }
        }
        acc
    }

    /// `Y^{(1;j,k)}_{s,u}` as a `d^k × d^j` array `[y][x]`.
    pub fn kernel_derivative(&self, j: usize, k: usize, s: usize, u: usize) -> Result<Vec<f64>> {
        self.check_orders(j, k)?;
        self.check_node(s, u)?;
        Ok(self.derivative_unchecked(j, k, s, u))
    }

    fn derivative_unchecked(&self, j: usize, k: usize, s: usize, u: usize) -> Vec<f64> {
        let d = self.x.dim();
        let (a, b) = (&self.sx[s - self.s0], &self.sy[u - self.u0]);
        let mut m = vec![0.0; pow(d, j) * pow(d, k)];
        for l in j.max(k)..=self.lser {
            accumulate(&mut m, &a[l - j], &b[l - k], j, k, d);
        }
        m
    }

    /// Closed-form `R^{(1;j,k)}_{s;u,v}` as `[y][x]`.
    pub fn kernel_first_remainder1(&self, j: usize, k: usize, s: usize, u: usize, v: usize) -> Result<Vec<f64>> {
        self.check_orders(j, k)?;
        self.check_node(s, u)?;
        self.check_node(s, v)?;
        if u > v {
            return Err(Error::InvalidArgument(format!("bad interval [{u}, {v}]")));
        }
        let d = self.x.dim();
        let l_ = self.lser;
        let a = &self.sx[s - self.s0];
        let b = &self.sy[u - self.u0];
        let inc = self.y.levels(u, v, l_)?;
        let mut m = vec![0.0; pow(d, j) * pow(d, k)];
        for n in self.y.floor_p().saturating_sub(k)..=l_ - k {
            for l in (n + k).max(j)..=l_ {
                accumulate(&mut m, &a[l - j], &kron(&b[l - k - n], &inc[n]), j, k, d);
            }
        }
        Ok(m)
    }

    /// Closed-form `R^{(2;k,j)}_{u;s,t}` as `[x][y]`.
    pub fn kernel_first_remainder2(&self, k: usize, j: usize, u: usize, s: usize, t: usize) -> Result<Vec<f64>> {
        self.check_orders(j, k)?;
        self.check_node(s, u)?;
        self.check_node(t, u)?;
        if s > t {
            return Err(Error::InvalidArgument(format!("bad interval [{s}, {t}]")));
        }
        let d = self.x.dim();
        let l_ = self.lser;
        let a = &self.sx[s - self.s0];
        let b = &self.sy[u - self.u0];
        let inc = self.x.levels(s, t, l_)?;
        // accumulate in [y][x] with the roles of the drivers kept, then transpose
        let mut m = vec![0.0; pow(d, j) * pow(d, k)];
        for mm in self.x.floor_p().saturating_sub(j)..=l_ - j {
            for l in (mm + j).max(k)..=l_ {
                accumulate(&mut m, &kron(&a[l - j - mm], &inc[mm]), &b[l - k], j, k, d);
            }
        }
        Ok(crate::tensor::transpose(&m, pow(d, k), pow(d, j)))
    }

    /// Closed-form `𝐑^{(1;j,k)}_{s,t;u,v}` as `[y][x]`.
    pub fn kernel_second_remainder1(&self, j: usize, k: usize, r: Rect) -> Result<Vec<f64>> {
        self.check_orders(j, k)?;
        self.check_node(r.s, r.u)?;
        self.check_node(r.t, r.v)?;
        if r.s > r.t || r.u > r.v {
            return Err(Error::InvalidArgument("bad rectangle".into()));
        }
        let d = self.x.dim();
        let l_ = self.lser;
        let a = &self.sx[r.s - self.s0];
        let b = &self.sy[r.u - self.u0];
        let ix = self.x.levels(r.s, r.t, l_)?;
        let iy = self.y.levels(r.u, r.v, l_)?;
        let mut m = vec![0.0; pow(d, j) * pow(d, k)];
        let (fp, fpt) = (self.x.floor_p(), self.y.floor_p());
        for l in 0..=l_ {
            if l < j + fp.saturating_sub(j) || l < k + fpt.saturating_sub(k) {
                continue;
            }
            for mm in fp.saturating_sub(j)..=l - j {
                let xa = kron(&a[l - j - mm], &ix[mm]);
                for n in fpt.saturating_sub(k)..=l - k {
                    accumulate(&mut m, &xa, &kron(&b[l - k - n], &iy[n]), j, k, d);
                }
            }
        }
        Ok(m)
    }
}

impl JointPath for KernelInstance<'_> {
    fn driver1(&self) -> &RoughPath {
        self.x
    }

    fn driver2(&self) -> &RoughPath {
        self.y
    }

    fn derivs(&self, s: usize, u: usize) -> JointDerivs {
        self.check_node(s, u).expect("kernel node");
        let (n1, n2) = (self.x.order(), self.y.order());
        let mut f1 = Vec::with_capacity((n1 + 1) * (n2 + 1));
        for j in 0..=n1 {
            for k in 0..=n2 {
                f1.push(self.derivative_unchecked(j, k, s, u));
            }
        }
        JointDerivs::from_family1(self.x.dim(), n1, n2, f1)
    }
}

/// Largest `β` with `‖X^l_{a,b}‖ ≤ ω(a,b)^{l/p} / (β Γ(l/p + 1))` on sampled pairs,
/// `1 ≤ l ≤ level`. Pairs are `(base, s)` for every `s` plus all pairs of a
/// 17-point subsample.
pub fn fit_beta(x: &RoughPath, base: usize, level: usize) -> Result<f64> {
    let p = x.p();
    let nodes: Vec<usize> = (base..x.len()).collect();
    let mut pairs: Vec<(usize, usize)> = nodes.iter().skip(1).map(|&s| (base, s)).collect();
    let sub = subsample(&nodes, 17);
    for i in 0..sub.len() {
        for j in i + 1..sub.len() {
            pairs.push((sub[i], sub[j]));
        }
    }
    let mut beta = f64::INFINITY;
    for (a, b) in pairs {
        let sig = x.levels(a, b, level)?;
        let w = x.omega(a, b);
        for (l, lv) in sig.iter().enumerate().skip(1) {
            let n = norm(lv);
            if n == 0.0 {
                continue;
            }
            let lf = l as f64;
            let cand = ((lf / p) * w.ln() - ln_gamma(lf / p + 1.0) - n.ln()).exp();
            beta = beta.min(cand);
        }
    }
    Ok(if beta.is_finite() { beta } else { 1.0 })
}

/// Kernel field from the Goursat PDE `k_{su} = ⟨ẋ_s, x̃̇_u⟩ k` at the sample nodes.
#[derive(Debug, Clone)]
pub struct GoursatField {
    /// Row-major `n1 × n2` values at the sample nodes.
    pub values: Vec<f64>,
    pub n1: usize,
    pub n2: usize,
    /// Richardson error estimate `max |K_{2r} − K_r| / 3`.
    pub error: f64,
}

impl GoursatField {
    pub fn at(&self, s: usize, u: usize) -> f64 {
        self.values[s * self.n2 + u]
    }
}

/// Second-order scheme with every segment split into `r` pieces.
fn goursat_solve(x: &Samples, y: &Samples, r: usize) -> Vec<f64> {
    let d = x.dim;
    let inc = |p: &Samples, i: usize| -> Vec<f64> {
        let (a, b) = (p.point(i), p.point(i + 1));
        b.iter().zip(a).map(|(u, v)| (u - v) / r as f64).collect()
    };
    let (n1, n2) = (x.len(), y.len());
    let m2 = (n2 - 1) * r;
    // inner products of refined increments along axis 2 for a fixed axis-1 segment
    let dy: Vec<Vec<f64>> = (0..n2 - 1).map(|j| inc(y, j)).collect();
    let mut row = vec![1.0; m2 + 1];
    let mut out = vec![0.0; n1 * n2];
    for u in 0..n2 {
        out[u] = 1.0;
    }
    for i in 0..n1 - 1 {
        let dx = inc(x, i);
        let a: Vec<f64> = dy.iter().map(|v| (0..d).map(|c| dx[c] * v[c]).sum()).collect();
        for _ in 0..r {
            let mut next = vec![1.0; m2 + 1];
            for jj in 0..m2 {
                let aa = a[jj / r];
                next[jj + 1] = next[jj] + row[jj + 1] - row[jj] + 0.5 * aa * (next[jj] + row[jj + 1]);
            }
            row = next;
        }
        for u in 0..n2 {
            out[(i + 1) * n2 + u] = row[u * r];
        }
    }
    out
}

/// Goursat-PDE kernel of the piecewise-linear paths through the samples.
///
/// Solves with `r` and `2r` sub-steps per segment and returns the Richardson
/// extrapolation. Fails when the error estimate exceeds `tol`.
pub fn goursat_oracle(x: &Samples, y: &Samples, r: usize, tol: f64) -> Result<GoursatField> {
    if x.dim != y.dim {
        return Err(Error::DimensionMismatch(x.dim, y.dim));
    }
    if r == 0 || x.len() < 2 || y.len() < 2 {
        return Err(Error::InvalidArgument(
            "Goursat oracle needs r ≥ 1 and two samples per path".into(),
        ));
    }
    let coarse = goursat_solve(x, y, r);
    let fine = goursat_solve(x, y, 2 * r);
    let mut error: f64 = 0.0;
    let values: Vec<f64> = coarse
        .iter()
        .zip(&fine)
        .map(|(c, f)| {
            error = error.max((f - c).abs() / 3.0);
            (4.0 * f - c) / 3.0
        })
        .collect();
    if error > tol {
        return Err(Error::InvalidArgument(format!(
            "resolution {r} too coarse: error estimate {error:e} > {tol:e}"
        )));
    }
    Ok(GoursatField {
        values,
        n1: x.len(),
        n2: y.len(),
        error,
    })
}
