//! Signature lift of piecewise-linear sample paths.
//!
//! Each adjacent sample interval carries the signature of its linear
//! segment. Signatures over longer grid intervals are composed from a sparse
//! table of aligned dyadic blocks, folded left to right in time order, so an
//! arbitrary `X_{s,t}` costs `O(log M)` products and is reproducible.

use std::io::Read;
use std::path::Path;

use crate::controls::{check_increasing, PVarControl};
use crate::error::{Error, Result};
use crate::tensor::{check_shape, TensorSequence};

/// Sample path: strictly increasing times and row-major `d`-vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub times: Vec<f64>,
    pub points: Vec<f64>,
    pub dim: usize,
}

impl Samples {
    pub fn new(times: Vec<f64>, points: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || points.len() != times.len() * dim {
            return Err(Error::InvalidArgument("sample shape does not match times".into()));
        }
        check_increasing(&times)?;
        Ok(Self { times, points, dim })
    }

    /// Builds samples from a path function evaluated at the given times.
    pub fn from_fn(times: &[f64], dim: usize, f: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let mut points = Vec::with_capacity(times.len() * dim);
        for &t in times {
            let x = f(t);
            if x.len() != dim {
                return Err(Error::DimensionMismatch(x.len(), dim));
            }
            points.extend(x);
        }
        Self::new(times.to_vec(), points, dim)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Reads `t,x1,...,xd` CSV with a header row.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Input(e.to_string()))?.clone();
        if headers.len() < 2 || &headers[0] != "t" {
            return Err(Error::Input("header must be t,x1,...,xd".into()));
        }
        let dim = headers.len() - 1;
        let mut times = Vec::new();
        let mut points = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Input(e.to_string()))?;
            if rec.len() != dim + 1 {
                return Err(Error::Input(format!("row {} has {} fields", row + 1, rec.len())));
            }
            for (c, field) in rec.iter().enumerate() {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::Input(format!("row {}: bad number {field:?}", row + 1)))?;
                if !v.is_finite() {
                    return Err(Error::Input(format!("row {}: non-finite value", row + 1)));
                }
                if c == 0 {
                    times.push(v);
                } else {
                    points.push(v);
                }
            }
        }
        Self::new(times, points, dim)
    }

    pub fn read_csv_file(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        Self::read_csv(std::io::BufReader::new(f))
    }

    /// Samples multiplied by `factor` (times unchanged).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            times: self.times.clone(),
            points: self.points.iter().map(|x| x * factor).collect(),
            dim: self.dim,
        }
    }
}

/// A geometric p-rough path over a sample grid.
pub struct RoughPath {
    samples: Samples,
    p: f64,
    level: usize,
    /// `blocks[r][i]` is the signature over sample indices `[i 2^r, (i+1) 2^r]`.
    blocks: Vec<Vec<TensorSequence>>,
    control: PVarControl,
}

impl std::fmt::Debug for RoughPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RoughPath")
            .field("dim", &self.samples.dim)
            .field("p", &self.p)
            .field("level", &self.level)
            .field("samples", &self.samples.len())
            .finish()
    }
}

impl RoughPath {
    /// Lifts samples to a rough path with signatures stored up to `level`.
    pub fn lift(samples: Samples, p: f64, level: usize) -> Result<Self> {
        if p < 1.0 || !p.is_finite() {
            return Err(Error::InvalidExponent(p));
        }
        let floor_p = p.floor() as usize;
        if level < floor_p {
            return Err(Error::InvalidArgument(format!(
                "signature level {level} below floor(p) = {floor_p}"
            )));
        }
        check_shape(samples.dim, level)?;
        check_increasing(&samples.times)?;
        let m = samples.len() - 1;
        let base: Vec<TensorSequence> = (0..m)
            .map(|i| {
                let inc: Vec<f64> = samples
                    .point(i + 1)
                    .iter()
                    .zip(samples.point(i))
                    .map(|(b, a)| b - a)
                    .collect();
                TensorSequence::segment_exp(&inc, level)
            })
            .collect::<Result<_>>()?;
        let mut blocks = vec![base];
        loop {
            let prev = blocks.last().unwrap();
            if prev.len() < 2 {
                break;
            }
            let next: Vec<TensorSequence> = prev.chunks_exact(2).map(|c| c[0].mul(&c[1])).collect::<Result<_>>()?;
            blocks.push(next);
        }
        let control = PVarControl::new(&samples.times, &samples.points, samples.dim, p)?;
        Ok(Self {
            samples,
            p,
            level,
            blocks,
            control,
        })
    }

    pub fn dim(&self) -> usize {
        self.samples.dim
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `⌊p⌋`.
    pub fn floor_p(&self) -> usize {
        self.p.floor() as usize
    }

    /// Controlled-path order `N = ⌊p⌋ − 1`.
    pub fn order(&self) -> usize {
        self.floor_p() - 1
    }

    /// Stored signature level.
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn samples(&self) -> &Samples {
        &self.samples
    }

    pub fn times(&self) -> &[f64] {
        &self.samples.times
    }

    /// Number of sample points.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.samples.point(i)
    }

    pub fn control(&self) -> &PVarControl {
        &self.control
    }

    /// `ω` between sample indices.
    pub fn omega(&self, a: usize, b: usize) -> f64 {
        self.control.eval_index(a, b)
    }

    /// Exact grid index of time `t`.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        self.samples
            .times
            .binary_search_by(|x| x.partial_cmp(&t).unwrap_or(std::cmp::Ordering::Less))
            .map_err(|_| Error::OffGrid(t))
    }

    fn check_pair(&self, a: usize, b: usize) -> Result<()> {
        if a > b || b >= self.len() {
            return Err(Error::InvalidArgument(format!("bad grid interval [{a}, {b}]")));
        }
        Ok(())
    }

    /// Signature over grid indices `[a, b]` truncated at `level`.
    pub fn signature_to(&self, a: usize, b: usize, level: usize) -> Result<TensorSequence> {
        self.check_pair(a, b)?;
        if level > self.level {
            return Err(Error::LevelOutOfRange { level, max: self.level });
        }
        let mut acc = TensorSequence::unit(self.dim(), level)?;
        let mut i = a;
        while i < b {
            let mut r = 0;
            while r + 1 < self.blocks.len() && i.is_multiple_of(1 << (r + 1)) && i + (1 << (r + 1)) <= b {
                r += 1;
            }
            acc = acc.mul_truncated(&self.blocks[r][i >> r], level)?;
            i += 1 << r;
        }
        Ok(acc)
    }

    /// Full stored-level signature over `[a, b]`.
    pub fn signature(&self, a: usize, b: usize) -> Result<TensorSequence> {
        self.signature_to(a, b, self.level)
    }

    /// Levels `0..=top` of the signature over `[a, b]`.
    pub fn levels(&self, a: usize, b: usize, top: usize) -> Result<Vec<Vec<f64>>> {
        Ok(self.signature_to(a, b, top)?.into_levels())
    }

    /// `X^j_{a,b}` on grid indices.
    pub fn eval(&self, j: usize, a: usize, b: usize) -> Result<Vec<f64>> {
        Ok(self.signature_to(a, b, j)?.into_levels().pop().unwrap())
    }

    /// `X^j_{s,t}` on grid times; off-grid times are rejected.
    pub fn eval_at(&self, j: usize, s: f64, t: f64) -> Result<Vec<f64>> {
        let a = self.index_of(s)?;
        let b = self.index_of(t)?;
        self.eval(j, a, b)
    }

    /// Signatures `S_{base, i}` for every `i ≥ base`, built by successive segments.
    pub fn prefix_signatures(&self, base: usize, level: usize) -> Result<Vec<TensorSequence>> {
        self.check_pair(base, base)?;
        if level > self.level {
            return Err(Error::LevelOutOfRange { level, max: self.level });
        }
        let mut out = Vec::with_capacity(self.len() - base);
        let mut acc = TensorSequence::unit(self.dim(), level)?;
        out.push(acc.clone());
        for i in base..self.len() - 1 {
            acc = acc.mul_truncated(&self.blocks[0][i], level)?;
            out.push(acc.clone());
        }
        Ok(out)
    }
}

/// Uniform grid of `n` intervals on `[a, b]`.
pub fn uniform_times(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_segment() {
        let s = Samples::new(vec![0.0, 1.0], vec![0.0, 1.0], 1).unwrap();
        let x = RoughPath::lift(s, 2.0, 3).unwrap();
        let mut f = 1.0;
        for l in 0..=3 {
            if l > 0 {
                f *= l as f64;
            }
            assert!((x.eval(l, 0, 1).unwrap()[0] - 1.0 / f).abs() < 1e-15);
        }
        assert_eq!(x.order(), 1);
    }

    #[test]
    fn degenerate_and_level_one() {
        let s = Samples::new(vec![0.0, 0.5, 2.0], vec![0.0, 1.0, 1.0, -1.0, 3.0, 0.5], 2).unwrap();
        let x = RoughPath::lift(s, 2.5, 3).unwrap();
        assert_eq!(x.eval(0, 1, 1).unwrap(), vec![1.0]);
        assert_eq!(x.eval(1, 1, 1).unwrap(), vec![0.0, 0.0]);
        assert_eq!(x.eval(2, 2, 2).unwrap(), vec![0.0; 4]);
        let inc = x.eval_at(1, 0.0, 2.0).unwrap();
        assert!((inc[0] - 3.0).abs() < 1e-15 && (inc[1] + 0.5).abs() < 1e-15);
        assert!(matches!(x.eval_at(1, 0.25, 2.0), Err(Error::OffGrid(_))));
    }

    #[test]
    fn lift_errors() {
        let s = Samples::new(vec![0.0, 1.0], vec![0.0, 1.0], 1).unwrap();
        assert!(RoughPath::lift(s.clone(), 3.2, 2).is_err());
        assert!(RoughPath::lift(s, 0.5, 2).is_err());
        assert!(matches!(
            Samples::new(vec![0.0, 1.0, 0.5], vec![0.0; 3], 1),
            Err(Error::NonMonotoneTimes(2))
        ));
    }

    #[test]
    fn csv_roundtrip() {
        let text = "t,x1,x2\n0,0,1\n0.5,1,1\n1,2,0\n";
        let s = Samples::read_csv(text.as_bytes()).unwrap();
        assert_eq!(s.dim, 2);
        assert_eq!(s.point(2), &[2.0, 0.0]);
        assert!(Samples::read_csv("x,y\n0,1\n".as_bytes()).is_err());
        assert!(Samples::read_csv("t,x1\n0,1\n0,2\n".as_bytes()).is_err());
        assert!(Samples::read_csv("t,x1\n0,a\n1,2\n".as_bytes()).is_err());
    }
}
