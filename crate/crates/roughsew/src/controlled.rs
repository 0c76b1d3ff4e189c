//! Paths controlled by a rough path.
//!
//! `Y^{(j)}` takes values in `Hom(V^{⊗j}, E)` with `E = R^e` and is stored as
//! a row-major `d^j × e` array: the tensor slots come first, so applying
//! `X^k` to the first `k` slots of `Y^{(j+k)}` is a prefix contraction.
//! When `E = Hom(V, R^w)` (`e = d·w`, the integrable case) the one-form slot
//! is the last tensor slot and `Y^{(j)}` reads as `d^{j+1} × w`.

use crate::error::{Error, Result};
use crate::roughpath::RoughPath;
use crate::tensor::{contract_prefix, norm, pow, sub_assign};

/// Gubinelli derivatives `(Y^{(0)}, ..., Y^{(N)})` at a grid node.
pub trait DerivativeSource: Send + Sync {
    /// Arrays for `j = 0..=N` at grid index `node`, each `d^j × e`.
    fn derivatives(&self, node: usize) -> Vec<Vec<f64>>;
}

impl<F> DerivativeSource for F
where
    F: Fn(usize) -> Vec<Vec<f64>> + Send + Sync,
{
    fn derivatives(&self, node: usize) -> Vec<Vec<f64>> {
        self(node)
    }
}

/// One-parameter controlled path over a [`RoughPath`].
pub struct ControlledPath<'a> {
    driver: &'a RoughPath,
    order: usize,
    codim: usize,
    source: Box<dyn DerivativeSource + 'a>,
}

impl<'a> ControlledPath<'a> {
    /// Tabulated or computed derivatives with codomain dimension `e`.
    pub fn new(driver: &'a RoughPath, codim: usize, source: impl DerivativeSource + 'a) -> Self {
        Self {
            driver,
            order: driver.order(),
            codim,
            source: Box::new(source),
        }
    }

    /// `Y_t = x_t` viewed as a one-form through the inner product, `Y^{(1)} = id`.
    pub fn tautological(driver: &'a RoughPath) -> Self {
        let d = driver.dim();
        let n = driver.order();
        Self::new(driver, d, move |node: usize| {
            let mut out = Vec::with_capacity(n + 1);
            out.push(driver.point(node).to_vec());
            for j in 1..=n {
                let mut a = vec![0.0; pow(d, j) * d];
                if j == 1 {
                    for i in 0..d {
                        a[i * d + i] = 1.0;
                    }
                }
                out.push(a);
            }
            out
        })
    }

    /// Constant path with vanishing derivatives.
    pub fn constant(driver: &'a RoughPath, value: Vec<f64>) -> Self {
        let d = driver.dim();
        let n = driver.order();
        let e = value.len();
        Self::new(driver, e, move |_node: usize| {
            let mut out = vec![value.clone()];
            out.extend((1..=n).map(|j| vec![0.0; pow(d, j) * e]));
            out
        })
    }

    /// `Y_t = f(x_t)` with `Y^{(j)} = D^j f(x_t)`.
    ///
    /// `df(x, j)` returns the `j`-th derivative of `f` at `x` as a `d^j × e`
    /// array (symmetric in the tensor slots).
    pub fn from_function<F>(driver: &'a RoughPath, codim: usize, df: F) -> Self
    where
        F: Fn(&[f64], usize) -> Vec<f64> + Send + Sync + 'a,
    {
        let n = driver.order();
        Self::new(driver, codim, move |node: usize| {
            let x = driver.point(node);
            (0..=n).map(|j| df(x, j)).collect()
        })
    }

    pub fn driver(&self) -> &'a RoughPath {
        self.driver
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Codomain dimension `e`.
    pub fn codim(&self) -> usize {
        self.codim
    }

    /// Output dimension `w = e / d` of the integral.
    pub fn out_dim(&self) -> Result<usize> {
        let d = self.driver.dim();
        if !self.codim.is_multiple_of(d) {
            return Err(Error::InvalidArgument(format!(
                "codomain dimension {} is not a one-form over R^{d}",
                self.codim
            )));
        }
        Ok(self.codim / d)
    }

    /// All derivatives at a grid node, validated against the expected shapes.
    pub fn derivatives(&self, node: usize) -> Result<Vec<Vec<f64>>> {
        if node >= self.driver.len() {
            return Err(Error::InvalidArgument(format!("node {node} off the grid")));
        }
        let ys = self.source.derivatives(node);
        if ys.len() != self.order + 1 {
            return Err(Error::InvalidArgument(format!(
                "expected {} derivative levels, got {}",
                self.order + 1,
                ys.len()
            )));
        }
        let d = self.driver.dim();
        for (j, y) in ys.iter().enumerate() {
            if y.len() != pow(d, j) * self.codim {
                return Err(Error::InvalidArgument(format!(
                    "derivative {j} has wrong size {}",
                    y.len()
                )));
            }
        }
        Ok(ys)
    }

    /// `Y^{(j)}` at a grid node.
    pub fn derivative(&self, j: usize, node: usize) -> Result<Vec<f64>> {
        self.check_level(j)?;
        Ok(self.derivatives(node)?.swap_remove(j))
    }

    fn check_level(&self, j: usize) -> Result<()> {
        if j > self.order {
            return Err(Error::LevelOutOfRange {
                level: j,
                max: self.order,
            });
        }
        Ok(())
    }

    /// `R^{(j)}_{s,t} = Y^{(j)}_t − Σ_{k=0}^{N−j} Y^{(j+k)}_s(X^k_{s,t})` on grid indices.
    pub fn remainder(&self, j: usize, s: usize, t: usize) -> Result<Vec<f64>> {
        self.check_level(j)?;
        let ys = self.derivatives(s)?;
        let yt = self.derivatives(t)?;
        let x = self.driver.levels(s, t, self.order - j)?;
        Ok(remainder_from(&ys, &yt[j], &x, j, self.driver.dim(), self.codim))
    }

    /// All remainders `R^{(0)}, ..., R^{(N)}` over `[s, t]`.
    pub fn remainders(&self, s: usize, t: usize) -> Result<Vec<Vec<f64>>> {
        let ys = self.derivatives(s)?;
        let yt = self.derivatives(t)?;
        let x = self.driver.levels(s, t, self.order)?;
        let d = self.driver.dim();
        Ok((0..=self.order)
            .map(|j| remainder_from(&ys, &yt[j], &x, j, d, self.codim))
            .collect())
    }

    /// Local approximation `Ξ_{s,t} = Σ_j Y^{(j)}_s(X^{j+1}_{s,t})`.
    pub fn local_approx(&self, s: usize, t: usize) -> Result<Vec<f64>> {
        let w = self.out_dim()?;
        let ys = self.derivatives(s)?;
        let x = self.driver.levels(s, t, self.order + 1)?;
        Ok(local_from(&ys, &x, w))
    }

    /// Residual of `−δΞ_{s,s',t} = Σ_j R^{(j)}_{s,s'}(X^{j+1}_{s',t})`.
    ///
    /// Returns `(residual, scale)` where `scale` is the largest norm among
    /// the terms involved, so `residual / scale` is a relative error.
    pub fn defect_identity_check(&self, s: usize, sm: usize, t: usize) -> Result<(f64, f64)> {
        let w = self.out_dim()?;
        let xi_st = self.local_approx(s, t)?;
        let xi_ss = self.local_approx(s, sm)?;
        let xi_mt = self.local_approx(sm, t)?;
        let delta = delta_defect(&xi_st, &xi_ss, &xi_mt);
        let rems = self.remainders(s, sm)?;
        let x = self.driver.levels(sm, t, self.order + 1)?;
        let mut resid = delta.clone();
        let mut scale = norm(&xi_st).max(norm(&xi_ss)).max(norm(&xi_mt));
        for (j, r) in rems.iter().enumerate() {
            let term = contract_prefix(r, &x[j + 1], w);
            scale = scale.max(norm(&term));
            for (a, b) in resid.iter_mut().zip(&term) {
                *a += b;
            }
        }
        Ok((norm(&resid), scale))
    }
}

/// `R^{(j)}` from derivatives at `s`, `Y^{(j)}_t` and levels of `X_{s,t}`.
pub(crate) fn remainder_from(ys: &[Vec<f64>], yt_j: &[f64], x: &[Vec<f64>], j: usize, d: usize, e: usize) -> Vec<f64> {
    let inner = pow(d, j) * e;
    let mut r = yt_j.to_vec();
    for (k, y) in ys.iter().enumerate().skip(j) {
        sub_assign(&mut r, &contract_prefix(y, &x[k - j], inner));
    }
    r
}

/// `Σ_j Y^{(j)}(X^{j+1})` with output dimension `w`.
pub(crate) fn local_from(ys: &[Vec<f64>], x: &[Vec<f64>], w: usize) -> Vec<f64> {
    let mut out = vec![0.0; w];
    for (j, y) in ys.iter().enumerate() {
        for (o, v) in out.iter_mut().zip(contract_prefix(y, &x[j + 1], w)) {
            *o += v;
        }
    }
    out
}

/// `δΞ_{s,s',t} = Ξ_{s,t} − Ξ_{s,s'} − Ξ_{s',t}`.
pub fn delta_defect(xi_st: &[f64], xi_ss: &[f64], xi_mt: &[f64]) -> Vec<f64> {
    xi_st
        .iter()
        .zip(xi_ss)
        .zip(xi_mt)
        .map(|((a, b), c)| a - b - c)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roughpath::{uniform_times, Samples};

    fn zigzag() -> RoughPath {
        let times = uniform_times(0.0, 1.0, 6);
        let s = Samples::from_fn(&times, 2, |t| vec![(5.0 * t).sin(), t * t - 0.3 * t]).unwrap();
        RoughPath::lift(s, 2.0, 3).unwrap()
    }

    #[test]
    fn constant_has_zero_remainders() {
        let x = zigzag();
        let y = ControlledPath::constant(&x, vec![1.0, 0.0, 0.0, 1.0]);
        for j in 0..=1 {
            assert!(y.remainder(j, 1, 5).unwrap().iter().all(|&v| v == 0.0));
        }
        // Y = id: integral of dx is the increment
        let xi = y.local_approx(0, 6).unwrap();
        let inc = x.eval(1, 0, 6).unwrap();
        assert_eq!(xi, inc);
    }

    #[test]
    fn tautological_remainder_vanishes() {
        let x = zigzag();
        let y = ControlledPath::tautological(&x);
        for s in 0..6 {
            for t in s..7 {
                assert!(y.remainder(0, s, t).unwrap().iter().all(|v| v.abs() < 1e-15));
            }
        }
        assert!(matches!(y.remainder(2, 0, 1), Err(Error::LevelOutOfRange { .. })));
    }

    #[test]
    fn top_remainder_is_increment() {
        let x = zigzag();
        let y = ControlledPath::from_function(&x, 2, |p: &[f64], j: usize| match j {
            0 => vec![p[0] * p[1], p[0].sin()],
            _ => vec![p[1], p[0].cos(), p[0], 0.0],
        });
        let r = y.remainder(1, 2, 5).unwrap();
        let d5 = y.derivative(1, 5).unwrap();
        let d2 = y.derivative(1, 2).unwrap();
        let inc: Vec<f64> = d5.iter().zip(&d2).map(|(a, b)| a - b).collect();
        assert_eq!(r, inc);
    }

    #[test]
    fn local_approx_by_hand() {
        // N = 1: Ξ = Y_s ΔX + Y'_s(X²)
        let x = zigzag();
        let y = ControlledPath::from_function(&x, 2, |p: &[f64], j: usize| match j {
            0 => vec![p[0] * p[1], p[0].sin()],
            _ => vec![p[1], p[0].cos(), p[0], 0.0],
        });
        let (s, t) = (1, 4);
        let xs = x.point(s);
        let x1 = x.eval(1, s, t).unwrap();
        let x2 = x.eval(2, s, t).unwrap();
        let y0 = [xs[0] * xs[1], xs[0].sin()];
        // Y'(a)(b) with a the derivative slot, b the one-form slot
        let y1 = [[xs[1], xs[0].cos()], [xs[0], 0.0]];
        let mut expect = y0[0] * x1[0] + y0[1] * x1[1];
        for a in 0..2 {
            for b in 0..2 {
                expect += y1[a][b] * x2[a * 2 + b];
            }
        }
        let got = y.local_approx(s, t).unwrap();
        assert!((got[0] - expect).abs() < 1e-14);
        assert!(y.local_approx(3, 3).unwrap()[0] == 0.0);
    }

    #[test]
    fn delta_defect_examples() {
        // Ξ_{s,t} = (t − s)²
        let (s, m, t) = (0.1, 0.35, 0.9);
        let d = delta_defect(&[(t - s) * (t - s)], &[(m - s) * (m - s)], &[(t - m) * (t - m)]);
        assert!((d[0] - 2.0 * (m - s) * (t - m)).abs() < 1e-15);
        let f = |x: f64| x.exp();
        let add = delta_defect(&[f(t) - f(s)], &[f(m) - f(s)], &[f(t) - f(m)]);
        assert!(add[0].abs() < 1e-15);
    }
}
