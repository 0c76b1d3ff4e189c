//! Joint integrals by grid refinement and iterated one-parameter integrals.

use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;

use super::local::check_rect;
use super::maximal::{quantities_on, GridCache, VariationMode};
use super::{grid_sum, Exponents, GridPartition, JointPath, Rect};
use crate::controlled::{local_from, ControlledPath};
use crate::error::{Error, Result};
use crate::sewing::{decay_exponent, rough_integral, start_partition, subsample, SewConfig};
use crate::tensor::pow;

/// Settings for [`joint_integral`].
#[derive(Debug, Clone)]
pub struct JointConfig {
    /// Stop once successive grid sums differ by less than this.
    pub tol: f64,
    /// Refinement rounds per axis; start strides are `2^max_rounds`.
    pub max_rounds: usize,
    /// Treat reaching the full sample grid as convergence.
    pub accept_exhausted: bool,
    /// Exponent `α`; defaults to `(1/θ_* + 1)/2`.
    pub alpha: Option<f64>,
    /// Estimate the maximal-inequality bound on a sub-grid of the final grid.
    pub estimate_bound: bool,
}

impl Default for JointConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_rounds: 10,
            accept_exhausted: false,
            alpha: None,
            estimate_bound: true,
        }
    }
}

/// Result of [`joint_integral`].
#[derive(Debug, Clone)]
pub struct JointIntegral {
    pub value: f64,
    /// `Ω(s,t;u,v)` on the whole rectangle.
    pub omega: f64,
    /// `C″(min 𝐕 + η^{(1)} + η^{(2)})` estimated on a ≤17-point-per-axis sub-grid.
    pub bound: Option<f64>,
    pub sums: Vec<f64>,
    /// Grid sizes `(points on axis 1, points on axis 2)` per round.
    pub sizes: Vec<(usize, usize)>,
    pub partition: GridPartition,
    pub exhausted: bool,
}

/// `∬ Y d⟨X, X̃⟩` over a rectangle as the limit of grid sums.
pub fn joint_integral<J: JointPath + ?Sized>(jp: &J, rect: Rect, cfg: &JointConfig) -> Result<JointIntegral> {
    check_rect(jp, rect)?;
    let mut g = GridPartition::new(
        start_partition(rect.s, rect.t, cfg.max_rounds),
        start_partition(rect.u, rect.v, cfg.max_rounds),
    )?;
    let mut sums = vec![grid_sum(jp, &g)?];
    let mut sizes = vec![(g.axis1.len(), g.axis2.len())];
    let mut exhausted = false;
    loop {
        let Some(next) = g.refine() else {
            exhausted = true;
            if sums.len() == 1 || cfg.accept_exhausted {
                break;
            }
            let n = sums.len();
            let wrapped: Vec<Vec<f64>> = sums.iter().map(|v| vec![*v]).collect();
            return Err(Error::NonConvergence {
                rounds: n - 1,
                previous: vec![sums[n - 2]],
                last: vec![sums[n - 1]],
                decay: decay_exponent(&wrapped),
            });
        };
        g = next;
        let sum = grid_sum(jp, &g)?;
        let diff = (sum - sums.last().unwrap()).abs();
        sums.push(sum);
        sizes.push((g.axis1.len(), g.axis2.len()));
        if diff < cfg.tol {
            break;
        }
    }
    let omega = super::omega_local(jp, rect)?;
    let bound = if cfg.estimate_bound {
        let coarse = GridPartition::new(subsample(&g.axis1, 17), subsample(&g.axis2, 17))?;
        let exps = Exponents::for_path(jp);
        let alpha = cfg.alpha.unwrap_or_else(|| exps.default_alpha());
        let cache = GridCache::new(jp, &coarse)?;
        Some(quantities_on(&cache, &exps, alpha, VariationMode::Envelope)?.maximal_bound())
    } else {
        None
    };
    Ok(JointIntegral {
        value: *sums.last().unwrap(),
        omega,
        bound,
        sums,
        sizes,
        partition: g,
        exhausted,
    })
}

/// Inner integrals `Z^{(1;j)}_s = ∫_u^v Y^{(1;j,·)}_{s,r} dX̃_r`, `j = 0..=N`,
/// each a `d^j × d` array `[x][c]`.
fn inner1<J: JointPath + ?Sized>(jp: &J, s: usize, u: usize, v: usize, cfg: &SewConfig) -> Result<Vec<Vec<f64>>> {
    let d = jp.dim();
    let (n1, n2) = (jp.order1(), jp.order2());
    let widths: Vec<usize> = (0..=n1).map(|j| pow(d, j + 1)).collect();
    let w: usize = widths.iter().sum();
    let x2 = jp.driver2();
    let wd = widths.clone();
    // derivative k: [y][c'][ (j, x, c) ] with a Kronecker delta between c' and c
    let path = ControlledPath::new(x2, d * w, move |r: usize| {
        let dv = jp.derivs(s, r);
        (0..=n2)
            .map(|k| {
                let rows = pow(d, k);
                let mut a = vec![0.0; rows * d * w];
                for y in 0..rows {
                    for cp in 0..d {
                        let base = (y * d + cp) * w;
                        let mut off = 0;
                        for j in 0..=n1 {
                            let f = dv.f1(j, k);
                            let cols = pow(d, j);
                            for x in 0..cols {
                                a[base + off + x * d + cp] = f[y * cols + x];
                            }
                            off += wd[j];
                        }
                    }
                }
                a
            })
            .collect()
    });
    let value = rough_integral(&path, u, v, cfg)?.value;
    let mut out = Vec::with_capacity(n1 + 1);
    let mut off = 0;
    for wj in widths {
        out.push(value[off..off + wj].to_vec());
        off += wj;
    }
    Ok(out)
}

/// Inner integrals `Z^{(2;k)}_u = ∫_s^t Y^{(2;k,·)}_{r,u} dX_r`, each `d^k × d`.
fn inner2<J: JointPath + ?Sized>(jp: &J, u: usize, s: usize, t: usize, cfg: &SewConfig) -> Result<Vec<Vec<f64>>> {
    let d = jp.dim();
    let (n1, n2) = (jp.order1(), jp.order2());
    let widths: Vec<usize> = (0..=n2).map(|k| pow(d, k + 1)).collect();
    let w: usize = widths.iter().sum();
    let x1 = jp.driver1();
    let wd = widths.clone();
    let path = ControlledPath::new(x1, d * w, move |r: usize| {
        let dv = jp.derivs(r, u);
        (0..=n1)
            .map(|j| {
                let rows = pow(d, j);
                let mut a = vec![0.0; rows * d * w];
                for x in 0..rows {
                    for c in 0..d {
                        let base = (x * d + c) * w;
                        let mut off = 0;
                        for k in 0..=n2 {
                            let f = dv.f2(k, j);
                            let cols = pow(d, k);
                            for y in 0..cols {
                                a[base + off + y * d + c] = f[x * cols + y];
                            }
                            off += wd[k];
                        }
                    }
                }
                a
            })
            .collect()
    });
    let value = rough_integral(&path, s, t, cfg)?.value;
    let mut out = Vec::with_capacity(n2 + 1);
    let mut off = 0;
    for wk in widths {
        out.push(value[off..off + wk].to_vec());
        off += wk;
    }
    Ok(out)
}

/// Memoized inner integrals indexed by outer grid node.
struct InnerTable<'f> {
    cells: Vec<OnceLock<Vec<Vec<f64>>>>,
    failure: Mutex<Option<Error>>,
    compute: Box<dyn Fn(usize) -> Result<Vec<Vec<f64>>> + Send + Sync + 'f>,
    shapes: Vec<usize>,
}

impl<'f> InnerTable<'f> {
    fn get(&self, node: usize) -> Vec<Vec<f64>> {
        self.cells[node]
            .get_or_init(|| match (self.compute)(node) {
                Ok(v) => v,
                Err(e) => {
                    self.failure.lock().unwrap().get_or_insert(e);
                    self.shapes.iter().map(|&n| vec![0.0; n]).collect()
                }
            })
            .clone()
    }

    fn check(&self) -> Result<()> {
        match self.failure.lock().unwrap().take() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

/// The two iterated integrals over a rectangle.
#[derive(Debug, Clone)]
pub struct IteratedIntegrals {
    /// `∫_s^t (∫_u^v Y dX̃) dX`.
    pub i12: f64,
    /// `∫_u^v (∫_s^t Y dX) dX̃`.
    pub i21: f64,
}

fn inner_cfg(cfg: &SewConfig) -> SewConfig {
    SewConfig {
        accept_exhausted: true,
        estimate_bound: false,
        ..cfg.clone()
    }
}

/// Iterated integrals via nested sewing. Inner integrals accept the full
/// sample grid as converged; the outer integrals follow `cfg`.
pub fn iterated_integrals<J: JointPath + ?Sized>(jp: &J, rect: Rect, cfg: &SewConfig) -> Result<IteratedIntegrals> {
    check_rect(jp, rect)?;
    let d = jp.dim();
    let icfg = inner_cfg(cfg);
    let ocfg = SewConfig {
        estimate_bound: false,
        ..cfg.clone()
    };
    let t1 = InnerTable {
        cells: (0..jp.driver1().len()).map(|_| OnceLock::new()).collect(),
        failure: Mutex::new(None),
        compute: Box::new(|s| inner1(jp, s, rect.u, rect.v, &icfg)),
        shapes: (0..=jp.order1()).map(|j| pow(d, j + 1)).collect(),
    };
    let outer1 = ControlledPath::new(jp.driver1(), d, |s: usize| t1.get(s));
    let i12 = rough_integral(&outer1, rect.s, rect.t, &ocfg);
    t1.check()?;
    let t2 = InnerTable {
        cells: (0..jp.driver2().len()).map(|_| OnceLock::new()).collect(),
        failure: Mutex::new(None),
        compute: Box::new(|u| inner2(jp, u, rect.s, rect.t, &icfg)),
        shapes: (0..=jp.order2()).map(|k| pow(d, k + 1)).collect(),
    };
    let outer2 = ControlledPath::new(jp.driver2(), d, |u: usize| t2.get(u));
    let i21 = rough_integral(&outer2, rect.u, rect.v, &ocfg);
    t2.check()?;
    Ok(IteratedIntegrals {
        i12: i12?.value[0],
        i21: i21?.value[0],
    })
}

/// One row of a Fubini sweep at a fixed mesh partition.
#[derive(Debug, Clone)]
pub struct MeshSums {
    /// Points per axis of the mesh partition.
    pub points: (usize, usize),
    /// Outer Riemann sum over `𝒟` of inner integrals over `[u,v]`.
    pub i12: f64,
    /// Outer Riemann sum over `𝒟′` of inner integrals over `[s,t]`.
    pub i21: f64,
    /// Joint grid sum over `𝒟 × 𝒟′`.
    pub joint: f64,
}

impl MeshSums {
    /// Largest pairwise gap among the three sums.
    pub fn max_gap(&self) -> f64 {
        (self.i12 - self.i21)
            .abs()
            .max((self.i12 - self.joint).abs())
            .max((self.i21 - self.joint).abs())
    }
}

/// Inner integrals as full sample-grid sums of the local approximations.
fn full_grid_cfg() -> SewConfig {
    SewConfig {
        tol: 0.0,
        max_rounds: 0,
        accept_exhausted: true,
        estimate_bound: false,
    }
}

/// Iterated and joint sums at the mesh of `g`. Inner integrals are the
/// sums over every sample of the inner interval.
pub fn iterated_on_mesh<J: JointPath + ?Sized>(jp: &J, g: &GridPartition) -> Result<MeshSums> {
    Ok(fubini_sweep(jp, std::slice::from_ref(g))?.pop().unwrap())
}

/// [`iterated_on_mesh`] for several partitions of one rectangle, sharing the
/// inner integrals between meshes.
pub fn fubini_sweep<J: JointPath + ?Sized>(jp: &J, grids: &[GridPartition]) -> Result<Vec<MeshSums>> {
    let Some(first) = grids.first() else {
        return Ok(Vec::new());
    };
    let rect = first.rect();
    check_rect(jp, rect)?;
    if grids.iter().any(|g| g.rect() != rect) {
        return Err(Error::InvalidArgument(
            "sweep partitions must share the rectangle".into(),
        ));
    }
    let cfg = full_grid_cfg();
    let mut nodes1: Vec<usize> = grids.iter().flat_map(|g| g.axis1.iter().copied()).collect();
    let mut nodes2: Vec<usize> = grids.iter().flat_map(|g| g.axis2.iter().copied()).collect();
    for v in [&mut nodes1, &mut nodes2] {
        v.sort_unstable();
        v.dedup();
    }
    let z1: Vec<Vec<Vec<f64>>> = nodes1[..nodes1.len() - 1]
        .par_iter()
        .map(|&s| inner1(jp, s, rect.u, rect.v, &cfg))
        .collect::<Result<_>>()?;
    let z2: Vec<Vec<Vec<f64>>> = nodes2[..nodes2.len() - 1]
        .par_iter()
        .map(|&u| inner2(jp, u, rect.s, rect.t, &cfg))
        .collect::<Result<_>>()?;
    let (x1, x2) = (jp.driver1(), jp.driver2());
    let mut out = Vec::with_capacity(grids.len());
    for g in grids {
        let mut i12 = 0.0;
        for w in g.axis1.windows(2) {
            let z = &z1[nodes1.binary_search(&w[0]).unwrap()];
            i12 += local_from(z, &x1.levels(w[0], w[1], jp.order1() + 1)?, 1)[0];
        }
        let mut i21 = 0.0;
        for w in g.axis2.windows(2) {
            let z = &z2[nodes2.binary_search(&w[0]).unwrap()];
            i21 += local_from(z, &x2.levels(w[0], w[1], jp.order2() + 1)?, 1)[0];
        }
        out.push(MeshSums {
            points: (g.axis1.len(), g.axis2.len()),
            i12,
            i21,
            joint: grid_sum(jp, g)?,
        });
    }
    Ok(out)
}
