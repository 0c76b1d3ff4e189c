//! Truncated tensor algebra over `R^d`.
//!
//! Level `l` of a [`TensorSequence`] is a dense row-major array of `d^l`
//! entries; the word `(i_1, ..., i_l)` sits at `sum_k i_k d^(l-k)`.

use crate::error::{Error, Result};

/// Default truncation level.
pub const DEFAULT_LEVEL: usize = 8;
/// Hard cap on the truncation level unless overridden by `ROUGHSEW_MAX_LEVEL`.
pub const HARD_LEVEL_CAP: usize = 16;
/// Largest admissible number of entries in a single level.
pub const MAX_LEVEL_ENTRIES: usize = 10_000_000;

/// Current level cap, honouring the `ROUGHSEW_MAX_LEVEL` environment override.
pub fn level_cap() -> usize {
    std::env::var("ROUGHSEW_MAX_LEVEL")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(HARD_LEVEL_CAP)
}

/// Validates a `(dim, level)` pair against the level cap and memory guard.
pub fn check_shape(dim: usize, level: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    if level > level_cap() {
        return Err(Error::LevelCap { dim, level });
    }
    let mut n: usize = 1;
    for _ in 0..level {
        n = n.saturating_mul(dim);
        if n > MAX_LEVEL_ENTRIES {
            return Err(Error::LevelCap { dim, level });
        }
    }
    Ok(())
}

/// `d^l`.
#[inline]
pub fn pow(d: usize, l: usize) -> usize {
    d.pow(l as u32)
}

/// Element of the truncated tensor algebra `T^L(R^d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSequence {
    dim: usize,
    levels: Vec<Vec<f64>>,
}

impl TensorSequence {
    /// All-zero element (level 0 included).
    pub fn zeros(dim: usize, max_level: usize) -> Result<Self> {
        check_shape(dim, max_level)?;
        let levels = (0..=max_level).map(|l| vec![0.0; pow(dim, l)]).collect();
        Ok(Self { dim, levels })
    }

    /// The unit `(1, 0, 0, ...)`.
    pub fn unit(dim: usize, max_level: usize) -> Result<Self> {
        let mut t = Self::zeros(dim, max_level)?;
        t.levels[0][0] = 1.0;
        Ok(t)
    }

    /// Builds an element from explicit levels, checking their sizes.
    pub fn from_levels(dim: usize, levels: Vec<Vec<f64>>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidArgument("at least level 0 is required".into()));
        }
        check_shape(dim, levels.len() - 1)?;
        for (l, lv) in levels.iter().enumerate() {
            if lv.len() != pow(dim, l) {
                return Err(Error::InvalidArgument(format!(
                    "level {l} has {} entries, expected {}",
                    lv.len(),
                    pow(dim, l)
                )));
            }
        }
        Ok(Self { dim, levels })
    }

    /// Signature of a linear segment: level `l` is `x^{⊗l} / l!`.
    pub fn segment_exp(increment: &[f64], max_level: usize) -> Result<Self> {
        let dim = increment.len();
        check_shape(dim, max_level)?;
        let mut levels = Vec::with_capacity(max_level + 1);
        levels.push(vec![1.0]);
        for l in 1..=max_level {
            let prev: &Vec<f64> = &levels[l - 1];
            let mut next = Vec::with_capacity(prev.len() * dim);
            let inv = 1.0 / l as f64;
            for &a in prev {
                for &x in increment {
                    next.push(a * x * inv);
                }
            }
            levels.push(next);
        }
        Ok(Self { dim, levels })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_level(&self) -> usize {
        self.levels.len() - 1
    }

    /// Level `l` as a flat slice.
    pub fn level(&self, l: usize) -> Result<&[f64]> {
        self.levels.get(l).map(|v| v.as_slice()).ok_or(Error::LevelOutOfRange {
            level: l,
            max: self.max_level(),
        })
    }

    pub fn level_mut(&mut self, l: usize) -> Result<&mut [f64]> {
        let max = self.max_level();
        self.levels
            .get_mut(l)
            .map(|v| v.as_mut_slice())
            .ok_or(Error::LevelOutOfRange { level: l, max })
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    pub fn into_levels(self) -> Vec<Vec<f64>> {
        self.levels
    }

    /// Drops every level above `max_level`.
    pub fn truncate(&self, max_level: usize) -> Self {
        let keep = max_level.min(self.max_level());
        Self {
            dim: self.dim,
            levels: self.levels[..=keep].to_vec(),
        }
    }

    /// Concatenation product, truncated at the smaller of the two levels.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.mul_truncated(other, self.max_level().min(other.max_level()))
    }

    /// Concatenation product truncated at `max_level` (at most the smaller level).
    pub fn mul_truncated(&self, other: &Self, max_level: usize) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(self.dim, other.dim));
        }
        let top = max_level.min(self.max_level()).min(other.max_level());
        let mut levels = Vec::with_capacity(top + 1);
        for l in 0..=top {
            let mut out = vec![0.0; pow(self.dim, l)];
            for i in 0..=l {
                kron_add(&mut out, &self.levels[i], &other.levels[l - i]);
            }
            levels.push(out);
        }
        Ok(Self { dim: self.dim, levels })
    }

    /// Euclidean inner product of level `l`.
    pub fn level_inner(&self, other: &Self, l: usize) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(self.dim, other.dim));
        }
        let a = self.level(l)?;
        let b = other.level(l)?;
        Ok(dot(a, b))
    }

    /// Euclidean norm of level `l`.
    pub fn level_norm(&self, l: usize) -> Result<f64> {
        Ok(norm(self.level(l)?))
    }
}

/// `out += a ⊗ b` on flat indices: `out[i * b.len() + j] += a[i] * b[j]`.
#[inline]
pub fn kron_add(out: &mut [f64], a: &[f64], b: &[f64]) {
    debug_assert_eq!(out.len(), a.len() * b.len());
    let nb = b.len();
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        let row = &mut out[i * nb..(i + 1) * nb];
        for (o, &bj) in row.iter_mut().zip(b) {
            *o += ai * bj;
        }
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() * b.len()];
    kron_add(&mut out, a, b);
    out
}

/// Contracts the leading block of `y` against `x`.
///
/// `y` is viewed as an `x.len() × inner` row-major matrix and the result is
/// `x^T y`, of length `inner`. This is how a tensor in the first slots of a
/// multilinear map is applied.
pub fn contract_prefix(y: &[f64], x: &[f64], inner: usize) -> Vec<f64> {
    debug_assert_eq!(y.len(), x.len() * inner);
    let mut out = vec![0.0; inner];
    for (a, &xa) in x.iter().enumerate() {
        if xa == 0.0 {
            continue;
        }
        for (o, &v) in out.iter_mut().zip(&y[a * inner..(a + 1) * inner]) {
            *o += xa * v;
        }
    }
    out
}

/// Applies [`contract_prefix`] to each of `outer` consecutive row blocks of `y`.
pub fn contract_inner_prefix(y: &[f64], outer: usize, x: &[f64], inner: usize) -> Vec<f64> {
    let block = x.len() * inner;
    debug_assert_eq!(y.len(), outer * block);
    let mut out = Vec::with_capacity(outer * inner);
    for r in 0..outer {
        out.extend(contract_prefix(&y[r * block..(r + 1) * block], x, inner));
    }
    out
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Component-wise `a - b`.
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `a += b`.
pub fn add_assign(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

/// `a -= b`.
pub fn sub_assign(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x -= y;
    }
}

/// Transpose of a row-major `rows × cols` matrix.
pub fn transpose(m: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    debug_assert_eq!(m.len(), rows * cols);
    let mut out = vec![0.0; m.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = m[r * cols + c];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_and_annihilator() {
        let b = TensorSequence::segment_exp(&[0.3, -1.2], 4).unwrap();
        let u = TensorSequence::unit(2, 4).unwrap();
        assert_eq!(u.mul(&b).unwrap(), b);
        assert_eq!(b.mul(&u).unwrap(), b);
        let z = TensorSequence::zeros(2, 4).unwrap();
        let p = z.mul(&b).unwrap();
        assert!(p.levels().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn one_dimensional_product() {
        let a = TensorSequence::from_levels(1, vec![vec![1.0], vec![2.0], vec![0.0]]).unwrap();
        let b = TensorSequence::from_levels(1, vec![vec![1.0], vec![3.0], vec![0.0]]).unwrap();
        let c = a.mul(&b).unwrap();
        assert_eq!(c.levels(), &[vec![1.0], vec![5.0], vec![6.0]]);
    }

    #[test]
    fn segment_exp_values() {
        let e = TensorSequence::segment_exp(&[2.0], 3).unwrap();
        assert_eq!(e.level(0).unwrap(), &[1.0]);
        assert_eq!(e.level(1).unwrap(), &[2.0]);
        assert_eq!(e.level(2).unwrap(), &[2.0]);
        assert!((e.level(3).unwrap()[0] - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(e.level_norm(2).unwrap(), 2.0);
        let z = TensorSequence::segment_exp(&[0.0, 0.0], 3).unwrap();
        assert_eq!(z, TensorSequence::unit(2, 3).unwrap());
    }

    #[test]
    fn level_errors() {
        let e = TensorSequence::segment_exp(&[1.0, 2.0], 2).unwrap();
        assert!(matches!(e.level(3), Err(Error::LevelOutOfRange { .. })));
        let f = TensorSequence::unit(3, 2).unwrap();
        assert!(matches!(e.mul(&f), Err(Error::DimensionMismatch(2, 3))));
        assert!(TensorSequence::unit(4, 12).is_err());
        assert!(TensorSequence::unit(1, 17).is_err());
    }

    #[test]
    fn prefix_contraction() {
        // y as a 2x3 matrix, x = (1, 2): x^T y
        let y = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert_eq!(contract_prefix(&y, &[1.0, 2.0], 3), vec![9.0, 12.0, 15.0]);
        let m = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert_eq!(transpose(&m, 2, 3), vec![1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
    }
}
