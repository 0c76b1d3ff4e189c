//! Experiment driver behind the `roughsew` binary.
//!
//! Every subcommand writes one CSV table (header row, fixed column order,
//! floats as `{:.16e}`) to standard output or `--out`. Exit codes: 0 on
//! success, 2 on bad input, 3 on non-convergence, 4 on an invariant violation.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::controlled::ControlledPath;
use crate::controls::{mixed_variation, p_variation, MixedMode, NormValue, EXACT_CAP};
use crate::error::{Error, Result};
use crate::joint::{
    check_maximal_inequality, fubini_sweep, iterated_integrals, joint_integral, stability, ConstantJoint, Constants,
    Exponents, GridPartition, JointConfig, JointPath, MeshSums, ProductJoint, Rect, StabilityReport, VariationMode,
};
use crate::rng::XorShift64Star;
use crate::roughpath::{uniform_times, RoughPath, Samples};
use crate::sewing::{rough_integral, SewConfig};
use crate::sigkernel::KernelInstance;
use crate::special::zeta;
use crate::tensor::{norm, pow};

#[derive(Debug, Parser)]
#[command(name = "roughsew", version, about = "Two-parameter rough integration experiments")]
pub struct Cli {
    /// Write the CSV report here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Signature entries of a sampled path.
    #[command(name = "signature")]
    Signature(SignatureArgs),
    /// One-parameter rough integral with its error bound.
    #[command(name = "integrate1d")]
    Integrate1d(Integrate1dArgs),
    /// Joint integral and both iterated integrals over the full rectangle.
    #[command(name = "integrate2d")]
    Integrate2d(Integrate2dArgs),
    /// Maximal inequality on random grid partitions of a kernel instance.
    #[command(name = "maximal-check")]
    MaximalCheck(MaximalArgs),
    /// Gap between iterated and joint sums as the mesh shrinks.
    #[command(name = "fubini-sweep")]
    FubiniSweep(FubiniArgs),
    /// p-variation and mixed-variation tables.
    #[command(name = "variation")]
    Variation(VariationArgs),
    /// Integral gap against the joint-path distance under perturbation.
    #[command(name = "stability")]
    Stability(StabilityArgs),
}

#[derive(Debug, Args)]
pub struct SignatureArgs {
    #[arg(long)]
    pub path: PathBuf,
    #[arg(long)]
    pub level: usize,
    /// Start time (a sample time); defaults to the first sample.
    #[arg(long)]
    pub s: Option<f64>,
    /// End time (a sample time); defaults to the last sample.
    #[arg(long)]
    pub t: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Integrand1d {
    /// `Y = x` as a one-form.
    Taut,
    /// `Y = (1, ..., 1)`.
    Const,
    /// `Y_i = cos x_i`.
    Fn,
}

#[derive(Debug, Args)]
pub struct Integrate1dArgs {
    #[arg(long)]
    pub path: PathBuf,
    #[arg(long)]
    pub p: f64,
    #[arg(long, value_enum)]
    pub integrand: Integrand1d,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 14)]
    pub max_rounds: usize,
    /// Accept the full sample grid as converged.
    #[arg(long)]
    pub accept_exhausted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Integrand2d {
    /// Signature kernel of the two drivers.
    Kernel,
    /// `Y = 1`.
    Const,
    /// `Y_{s,u} = cos(x¹_s) cos(x̃¹_u)`.
    Product,
}

#[derive(Debug, Args)]
pub struct Integrate2dArgs {
    #[arg(long)]
    pub path: PathBuf,
    /// Second driver; defaults to `--path`.
    #[arg(long)]
    pub path2: Option<PathBuf>,
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, value_enum)]
    pub integrand: Integrand2d,
    #[arg(long, default_value_t = 10)]
    pub max_rounds: usize,
    /// Series truncation level of the kernel.
    #[arg(long, default_value_t = 6)]
    pub series_level: usize,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub accept_exhausted: bool,
}

#[derive(Debug, Clone, Args)]
pub struct MaximalArgs {
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Samples per random-walk driver.
    #[arg(long, default_value_t = 129)]
    pub points: usize,
    /// Largest number of grid points per axis.
    #[arg(long, default_value_t = 12)]
    pub max_grid: usize,
    #[arg(long, default_value_t = 6)]
    pub series_level: usize,
    #[arg(long)]
    pub alpha: Option<f64>,
}

impl Default for MaximalArgs {
    fn default() -> Self {
        Self {
            trials: 100,
            seed: 0,
            points: 129,
            max_grid: 12,
            series_level: 6,
            alpha: None,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FubiniArgs {
    /// Mesh sizes in intervals per axis; each must divide `--intervals`.
    #[arg(long, value_delimiter = ',', default_value = "32,64,128,256,512")]
    pub meshes: Vec<usize>,
    /// Sample intervals of each synthetic driver.
    #[arg(long, default_value_t = 1024)]
    pub intervals: usize,
    #[arg(long, default_value_t = 0.5)]
    pub scale: f64,
    #[arg(long, default_value_t = 6)]
    pub series_level: usize,
}

impl Default for FubiniArgs {
    fn default() -> Self {
        Self {
            meshes: vec![32, 64, 128, 256, 512],
            intervals: 1024,
            scale: 0.5,
            series_level: 6,
        }
    }
}

#[derive(Debug, Args)]
pub struct VariationArgs {
    #[arg(long)]
    pub path: PathBuf,
    #[arg(long)]
    pub p: f64,
    /// Second exponent of the mixed variation; defaults to `--p`.
    #[arg(long)]
    pub q: Option<f64>,
    /// Mixed variation of `⟨x_t − x_s, y_v − y_u⟩` instead of level variations.
    #[arg(long)]
    pub twod: bool,
    /// Second path for `--twod`; defaults to `--path`.
    #[arg(long)]
    pub path2: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct StabilityArgs {
    #[arg(long, value_delimiter = ',', default_value = "1e-2,1e-3,1e-4,1e-5")]
    pub eps_sweep: Vec<f64>,
    #[arg(long, default_value_t = 128)]
    pub intervals: usize,
    /// Grid points per axis for the joint-path distance.
    #[arg(long, default_value_t = 9)]
    pub norm_points: usize,
    #[arg(long, default_value_t = 6)]
    pub series_level: usize,
}

impl Default for StabilityArgs {
    fn default() -> Self {
        Self {
            eps_sweep: vec![1e-2, 1e-3, 1e-4, 1e-5],
            intervals: 128,
            norm_points: 9,
            series_level: 6,
        }
    }
}

/// A CSV report plus an optional invariant violation.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub violation: Option<String>,
}

impl Report {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            ..Default::default()
        }
    }

    fn with_constants(header: &[&str]) -> Self {
        let mut r = Self::new(header);
        r.header.extend(CONSTANT_COLUMNS.iter().map(|s| s.to_string()));
        r
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Input(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row).map_err(io)?;
        }
        w.into_inner().map_err(|e| Error::Input(e.to_string()))
    }
}

const CONSTANT_COLUMNS: [&str; 9] = [
    "alpha",
    "theta_lo",
    "theta_hi",
    "zeta_inv_alpha",
    "zeta_alpha_theta",
    "c",
    "c1",
    "c2",
    "c3",
];

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_norm(v: NormValue) -> String {
    match v {
        NormValue::Finite(x) => fmt(x),
        NormValue::Infinite => "inf".into(),
    }
}

fn constant_cells(c: &Constants) -> Vec<String> {
    [
        c.alpha,
        c.theta_lo,
        c.theta_hi,
        c.zeta_inv_alpha,
        c.zeta_alpha_theta,
        c.c,
        c.c1,
        c.c2,
        c.c3,
    ]
    .into_iter()
    .map(fmt)
    .collect()
}

fn constants_for<J: JointPath + ?Sized>(jp: &J, alpha: Option<f64>) -> Result<Constants> {
    let exps = Exponents::for_path(jp);
    Constants::new(&exps, alpha.unwrap_or_else(|| exps.default_alpha()))
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonConvergence { .. } => 3,
        Error::Invariant(_) => 4,
        _ => 2,
    }
}

/// Parses `args` (including the program name), runs the subcommand and
/// writes its report. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let report = match execute(&cli.command) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let bytes = match report.to_csv() {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let written = match &cli.out {
        Some(p) => std::fs::write(p, &bytes),
        None => std::io::stdout().lock().write_all(&bytes),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write report: {e}");
        return 2;
    }
    match report.violation {
        Some(v) => {
            eprintln!("invariant violated: {v}");
            4
        }
        None => 0,
    }
}

pub fn execute(cmd: &Command) -> Result<Report> {
    match cmd {
        Command::Signature(a) => signature(a),
        Command::Integrate1d(a) => integrate1d(a),
        Command::Integrate2d(a) => integrate2d(a),
        Command::MaximalCheck(a) => maximal_check(a),
        Command::FubiniSweep(a) => fubini(a),
        Command::Variation(a) => variation(a),
        Command::Stability(a) => stability_sweep(a),
    }
}

fn load(path: &Path) -> Result<Samples> {
    Samples::read_csv_file(path)
}

fn index_or(x: &RoughPath, t: Option<f64>, default: usize) -> Result<usize> {
    t.map_or(Ok(default), |t| x.index_of(t))
}

/// Letters of the word at row-major position `i` of level `l`, 1-based and
/// separated by `.`.
fn word(i: usize, d: usize, l: usize) -> String {
    (0..l)
        .rev()
        .map(|m| ((i / pow(d, m)) % d + 1).to_string())
        .collect::<Vec<_>>()
        .join(".")
}

fn signature(a: &SignatureArgs) -> Result<Report> {
    let x = RoughPath::lift(load(&a.path)?, 1.0, a.level.max(1))?;
    let s = index_or(&x, a.s, 0)?;
    let t = index_or(&x, a.t, x.len() - 1)?;
    let sig = x.signature_to(s, t, a.level)?;
    let mut r = Report::new(&["level", "word", "value"]);
    for (l, lv) in sig.levels().iter().enumerate() {
        for (i, v) in lv.iter().enumerate() {
            r.rows.push(vec![l.to_string(), word(i, x.dim(), l), fmt(*v)]);
        }
    }
    Ok(r)
}

/// Position of the word `(i, ..., i)` in a row-major level-`j` tensor.
fn diagonal(i: usize, d: usize, j: usize) -> usize {
    (0..j).map(|m| i * pow(d, m)).sum()
}

/// `(cos x_1, ..., cos x_d)` as a one-form with its derivatives.
pub fn cosine_form(x: &RoughPath) -> ControlledPath<'_> {
    let d = x.dim();
    ControlledPath::from_function(x, d, move |y: &[f64], j| {
        let mut out = vec![0.0; pow(d, j) * d];
        for (i, &yi) in y.iter().enumerate() {
            out[diagonal(i, d, j) * d + i] = (yi + j as f64 * std::f64::consts::FRAC_PI_2).cos();
        }
        out
    })
}

/// `cos(x¹)` as a scalar controlled path.
pub fn cosine_scalar(x: &RoughPath) -> ControlledPath<'_> {
    ControlledPath::from_function(x, 1, |y: &[f64], j| {
        let d = y.len();
        let mut out = vec![0.0; pow(d, j)];
        out[0] = (y[0] + j as f64 * std::f64::consts::FRAC_PI_2).cos();
        out
    })
}

fn integrate1d(a: &Integrate1dArgs) -> Result<Report> {
    let x = RoughPath::lift(load(&a.path)?, a.p, a.p.floor() as usize)?;
    let y = match a.integrand {
        Integrand1d::Taut => ControlledPath::tautological(&x),
        Integrand1d::Const => ControlledPath::constant(&x, vec![1.0; x.dim()]),
        Integrand1d::Fn => cosine_form(&x),
    };
    let cfg = SewConfig {
        tol: a.tol,
        max_rounds: a.max_rounds,
        accept_exhausted: a.accept_exhausted,
        estimate_bound: true,
    };
    let n = x.len() - 1;
    let ri = rough_integral(&y, 0, n, &cfg)?;
    let local = y.local_approx(0, n)?;
    let theta = (x.floor_p() as f64 + 1.0) / a.p;
    let zt = zeta(theta)?;
    let mut r = Report::new(&[
        "integrand",
        "component",
        "value",
        "local",
        "bound",
        "theta",
        "zeta_theta",
        "rounds",
        "points",
        "exhausted",
    ]);
    let name = format!("{:?}", a.integrand).to_lowercase();
    for (i, (v, l)) in ri.value.iter().zip(&local).enumerate() {
        r.rows.push(vec![
            name.clone(),
            i.to_string(),
            fmt(*v),
            fmt(*l),
            ri.bound.map_or_else(String::new, fmt_norm),
            fmt(theta),
            fmt(zt),
            (ri.sew.sums.len() - 1).to_string(),
            ri.sew.partition.len().to_string(),
            ri.sew.exhausted.to_string(),
        ]);
    }
    Ok(r)
}

fn integrate2d(a: &Integrate2dArgs) -> Result<Report> {
    let level = match a.integrand {
        Integrand2d::Kernel => a.series_level,
        _ => a.p.floor() as usize,
    };
    let s1 = load(&a.path)?;
    let s2 = match &a.path2 {
        Some(p) => load(p)?,
        None => s1.clone(),
    };
    let x = RoughPath::lift(s1, a.p, level)?;
    let y = RoughPath::lift(s2, a.p, level)?;
    let mut r = Report::with_constants(&[
        "integrand",
        "joint",
        "i12",
        "i21",
        "omega",
        "bound",
        "gap_12_21",
        "gap_12_joint",
        "gap_21_joint",
        "rounds",
        "points1",
        "points2",
    ]);
    let row = match a.integrand {
        Integrand2d::Kernel => integrate2d_row("kernel", &KernelInstance::new(&x, &y, 0, 0, a.series_level)?, a)?,
        Integrand2d::Const => integrate2d_row("const", &ConstantJoint::new(&x, &y, 1.0)?, a)?,
        Integrand2d::Product => {
            integrate2d_row("product", &ProductJoint::new(cosine_scalar(&x), cosine_scalar(&y))?, a)?
        }
    };
    r.rows.push(row);
    Ok(r)
}

fn integrate2d_row<J: JointPath + ?Sized>(name: &str, jp: &J, a: &Integrate2dArgs) -> Result<Vec<String>> {
    let rect = Rect::new(0, jp.driver1().len() - 1, 0, jp.driver2().len() - 1);
    let jcfg = JointConfig {
        tol: a.tol,
        max_rounds: a.max_rounds,
        accept_exhausted: a.accept_exhausted,
        alpha: a.alpha,
        estimate_bound: true,
    };
    let constants = constants_for(jp, a.alpha)?;
    let ji = joint_integral(jp, rect, &jcfg)?;
    let scfg = SewConfig {
        tol: a.tol,
        max_rounds: a.max_rounds,
        accept_exhausted: a.accept_exhausted,
        estimate_bound: false,
    };
    let it = iterated_integrals(jp, rect, &scfg)?;
    let (m1, m2) = *ji.sizes.last().unwrap();
    let mut row = vec![
        name.to_string(),
        fmt(ji.value),
        fmt(it.i12),
        fmt(it.i21),
        fmt(ji.omega),
        ji.bound.map_or_else(String::new, fmt),
        fmt((it.i12 - it.i21).abs()),
        fmt((it.i12 - ji.value).abs()),
        fmt((it.i21 - ji.value).abs()),
        (ji.sums.len() - 1).to_string(),
        m1.to_string(),
        m2.to_string(),
    ];
    row.extend(constant_cells(&constants));
    Ok(row)
}

/// Seed salt separating the driver stream from the per-trial streams.
const PATH_SALT: u64 = 0xD1B5_4A32_D192_ED03;

/// A `d`-dimensional random walk on `[0, 1]` with `n` intervals and
/// uniform steps of variance `scale² / n` per coordinate.
pub fn random_walk(rng: &mut XorShift64Star, n: usize, d: usize, scale: f64) -> Result<Samples> {
    let step = scale * (3.0 / n as f64).sqrt();
    let mut points = vec![0.0; (n + 1) * d];
    for i in 1..=n {
        for c in 0..d {
            points[i * d + c] = points[(i - 1) * d + c] + rng.range(-step, step);
        }
    }
    Samples::new(uniform_times(0.0, 1.0, n), points, d)
}

/// Smooth two-dimensional test driver with `n` intervals.
pub fn smooth_samples(n: usize, phase: f64, scale: f64) -> Result<Samples> {
    Samples::from_fn(&uniform_times(0.0, 1.0, n), 2, |t| {
        vec![
            scale * ((3.0 * t + phase).sin() + 0.3 * (7.0 * t).cos()),
            scale * ((2.0 * t * t - phase).cos() + 0.2 * (5.0 * t + phase).sin()),
        ]
    })
}

/// One maximal-inequality trial.
#[derive(Debug, Clone)]
pub struct MaximalTrial {
    pub trial: usize,
    pub seed: u64,
    pub grid: GridPartition,
    pub grid_sum: f64,
    pub omega: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub v1: f64,
    pub v2: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub constants: Constants,
}

impl MaximalTrial {
    pub fn ratio(&self) -> f64 {
        if self.rhs > 0.0 {
            self.lhs / self.rhs
        } else if self.lhs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Random grid partitions of a p = 2 kernel instance between two random
/// walks, each checked with envelope mixed variations.
pub fn maximal_trials(a: &MaximalArgs) -> Result<Vec<MaximalTrial>> {
    if a.points < 4 || a.max_grid < 3 || a.max_grid > a.points {
        return Err(Error::InvalidArgument(
            "need points ≥ 4 and 3 ≤ max-grid ≤ points".into(),
        ));
    }
    let mut prng = XorShift64Star::new(a.seed ^ PATH_SALT);
    let x = RoughPath::lift(random_walk(&mut prng, a.points - 1, 2, 1.0)?, 2.0, a.series_level)?;
    let y = RoughPath::lift(random_walk(&mut prng, a.points - 1, 2, 1.0)?, 2.0, a.series_level)?;
    let ki = KernelInstance::new(&x, &y, 0, 0, a.series_level)?;
    (0..a.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = a.seed.wrapping_add(trial as u64);
            let mut rng = XorShift64Star::new(seed);
            let m1 = 3 + rng.below(a.max_grid - 2);
            let m2 = 3 + rng.below(a.max_grid - 2);
            let grid = GridPartition::new(rng.sample_sorted(a.points, m1), rng.sample_sorted(a.points, m2))?;
            let chk = check_maximal_inequality(&ki, &grid, a.alpha, VariationMode::Envelope)?;
            let q = &chk.quantities;
            Ok(MaximalTrial {
                trial,
                seed,
                grid_sum: chk.grid_sum,
                omega: chk.omega,
                lhs: chk.lhs,
                rhs: chk.rhs,
                v1: q.v1,
                v2: q.v2,
                eta1: q.eta1,
                eta2: q.eta2,
                constants: q.constants,
                grid,
            })
        })
        .collect()
}

fn maximal_check(a: &MaximalArgs) -> Result<Report> {
    let trials = maximal_trials(a)?;
    let mut r = Report::with_constants(&[
        "trial", "seed", "points1", "points2", "s", "t", "u", "v", "grid_sum", "omega", "lhs", "rhs", "ratio", "v1",
        "v2", "eta1", "eta2",
    ]);
    for tr in &trials {
        let (a1, a2) = (&tr.grid.axis1, &tr.grid.axis2);
        let mut row = vec![
            tr.trial.to_string(),
            tr.seed.to_string(),
            a1.len().to_string(),
            a2.len().to_string(),
            a1[0].to_string(),
            a1[a1.len() - 1].to_string(),
            a2[0].to_string(),
            a2[a2.len() - 1].to_string(),
        ];
        row.extend(
            [
                tr.grid_sum,
                tr.omega,
                tr.lhs,
                tr.rhs,
                tr.ratio(),
                tr.v1,
                tr.v2,
                tr.eta1,
                tr.eta2,
            ]
            .map(fmt),
        );
        row.extend(constant_cells(&tr.constants));
        r.rows.push(row);
        if r.violation.is_none() && tr.ratio() > 1.0 {
            r.violation = Some(format!(
                "trial {} (seed {}): axis1 {:?}, axis2 {:?}, lhs {:e} > rhs {:e}",
                tr.trial, tr.seed, a1, a2, tr.lhs, tr.rhs
            ));
        }
    }
    Ok(r)
}

/// Least-squares slope of `ys` against `xs`.
pub fn fitted_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Result of a Fubini sweep.
#[derive(Debug, Clone)]
pub struct FubiniReport {
    pub meshes: Vec<usize>,
    pub sums: Vec<MeshSums>,
    /// Fitted decay order of the maximal gap in the mesh width.
    pub order: f64,
    /// `θ_* − 1`.
    pub target: f64,
    pub constants: Constants,
}

/// Sweep on a p = 2 kernel instance between two smooth drivers.
pub fn fubini_report(a: &FubiniArgs) -> Result<FubiniReport> {
    let n = a.intervals;
    if a.meshes.len() < 2 || a.meshes.iter().any(|&m| m == 0 || !n.is_multiple_of(m)) {
        return Err(Error::InvalidArgument(format!("need at least two meshes dividing {n}")));
    }
    let x = RoughPath::lift(smooth_samples(n, 0.3, a.scale)?, 2.0, a.series_level)?;
    let y = RoughPath::lift(smooth_samples(n, 1.2, a.scale)?, 2.0, a.series_level)?;
    let ki = KernelInstance::new(&x, &y, 0, 0, a.series_level)?;
    let rect = Rect::new(0, n, 0, n);
    let grids: Vec<GridPartition> = a
        .meshes
        .iter()
        .map(|&m| GridPartition::strided(rect, n / m))
        .collect::<Result<_>>()?;
    let sums = fubini_sweep(&ki, &grids)?;
    let lx: Vec<f64> = a.meshes.iter().map(|&m| (1.0 / m as f64).ln()).collect();
    let ly: Vec<f64> = sums.iter().map(|s| s.max_gap().ln()).collect();
    let constants = constants_for(&ki, None)?;
    Ok(FubiniReport {
        meshes: a.meshes.clone(),
        sums,
        order: fitted_slope(&lx, &ly),
        target: constants.theta_lo - 1.0,
        constants,
    })
}

fn fubini(a: &FubiniArgs) -> Result<Report> {
    let rep = fubini_report(a)?;
    let mut r = Report::with_constants(&[
        "mesh",
        "i12",
        "i21",
        "joint",
        "gap",
        "rel_gap",
        "local_order",
        "fitted_order",
        "target",
    ]);
    for (i, (m, s)) in rep.meshes.iter().zip(&rep.sums).enumerate() {
        let local = if i == 0 {
            String::new()
        } else {
            let prev = &rep.sums[i - 1];
            fmt((prev.max_gap() / s.max_gap()).ln() / (*m as f64 / rep.meshes[i - 1] as f64).ln())
        };
        let mut row = vec![
            m.to_string(),
            fmt(s.i12),
            fmt(s.i21),
            fmt(s.joint),
            fmt(s.max_gap()),
            fmt(s.max_gap() / s.joint.abs()),
            local,
            fmt(rep.order),
            fmt(rep.target),
        ];
        row.extend(constant_cells(&rep.constants));
        r.rows.push(row);
    }
    Ok(r)
}

fn variation(a: &VariationArgs) -> Result<Report> {
    let s1 = load(&a.path)?;
    let mut r = Report::new(&["kind", "level", "p", "q", "points1", "points2", "mode", "value"]);
    if !a.twod {
        let x = RoughPath::lift(s1, a.p, a.p.floor() as usize)?;
        let n = x.len();
        for l in 1..=x.floor_p() {
            let incr = |i: usize, j: usize| norm(&x.eval(l, i, j).expect("grid interval"));
            let v = p_variation(n, incr, a.p / l as f64)?;
            r.rows.push(vec![
                "pvar".into(),
                l.to_string(),
                fmt(a.p / l as f64),
                String::new(),
                n.to_string(),
                String::new(),
                "exact".into(),
                fmt(v),
            ]);
        }
        return Ok(r);
    }
    let s2 = match &a.path2 {
        Some(p) => load(p)?,
        None => s1.clone(),
    };
    if s1.dim != s2.dim {
        return Err(Error::DimensionMismatch(s1.dim, s2.dim));
    }
    const MAX_POINTS: usize = 64;
    let (m, n) = (s1.len(), s2.len());
    if m.max(n) > MAX_POINTS {
        return Err(Error::InvalidArgument(format!(
            "mixed variation limited to {MAX_POINTS} points per axis"
        )));
    }
    let q = a.q.unwrap_or(a.p);
    let cell = |i: usize, j: usize, k: usize, l: usize| {
        let dx = s1.point(j).iter().zip(s1.point(i)).map(|(b, a)| b - a);
        let dy = s2.point(l).iter().zip(s2.point(k)).map(|(b, a)| b - a);
        dx.zip(dy).map(|(u, v)| u * v).sum::<f64>()
    };
    let mode = if m.max(n) <= EXACT_CAP {
        MixedMode::Exact
    } else {
        MixedMode::Greedy
    };
    let v = mixed_variation(m, n, cell, a.p, q, mode)?;
    r.rows.push(vec![
        "mixed".into(),
        String::new(),
        fmt(a.p),
        fmt(q),
        m.to_string(),
        n.to_string(),
        format!("{mode:?}").to_lowercase(),
        fmt(v),
    ]);
    Ok(r)
}

/// Stability sweep rows with the fitted log-log slope of gap against distance.
#[derive(Debug, Clone)]
pub struct StabilitySweep {
    pub eps: Vec<f64>,
    pub reports: Vec<StabilityReport>,
    pub slope: f64,
    pub constants: Constants,
}

/// Kernel instances of `(X, X̃)` and `(X + ε h, X̃)` for each `ε`.
pub fn stability_report(a: &StabilityArgs) -> Result<StabilitySweep> {
    let n = a.intervals;
    if a.eps_sweep.len() < 2 || a.norm_points < 2 || a.norm_points > n + 1 {
        return Err(Error::InvalidArgument(
            "need two ε values and 2 ≤ norm-points ≤ intervals + 1".into(),
        ));
    }
    let lift = |s: Samples| RoughPath::lift(s, 2.0, a.series_level);
    let base = smooth_samples(n, 0.3, 1.0)?;
    let x = lift(base.clone())?;
    let y = lift(smooth_samples(n, 1.2, 1.0)?)?;
    let ka = KernelInstance::new(&x, &y, 0, 0, a.series_level)?;
    let rect = Rect::new(0, n, 0, n);
    let int_grid = GridPartition::full(rect)?;
    let pick = |k: usize| k * n / (a.norm_points - 1);
    let axis: Vec<usize> = (0..a.norm_points).map(pick).collect();
    let norm_grid = GridPartition::new(axis.clone(), axis)?;
    let reports = a
        .eps_sweep
        .iter()
        .map(|&eps| {
            let mut points = base.points.clone();
            for (i, &t) in base.times.iter().enumerate() {
                points[2 * i] += eps * (5.0 * t).cos();
                points[2 * i + 1] += eps * (3.0 * t).sin();
            }
            let pert = Samples::new(base.times.clone(), points, 2)?;
            let xe = lift(pert)?;
            let kb = KernelInstance::new(&xe, &y, 0, 0, a.series_level)?;
            stability(&ka, &kb, &norm_grid, &int_grid)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for rep in &reports {
        let d = rep.total_distance().require("joint-path distance")?;
        lx.push(d.ln());
        ly.push(rep.gap().ln());
    }
    Ok(StabilitySweep {
        eps: a.eps_sweep.clone(),
        slope: fitted_slope(&lx, &ly),
        constants: constants_for(&ka, None)?,
        reports,
    })
}

fn stability_sweep(a: &StabilityArgs) -> Result<Report> {
    let sw = stability_report(a)?;
    let mut r = Report::with_constants(&[
        "eps",
        "distance",
        "driver_distance1",
        "driver_distance2",
        "total_distance",
        "integral",
        "integral_other",
        "gap",
        "fitted_slope",
    ]);
    for (eps, rep) in sw.eps.iter().zip(&sw.reports) {
        let mut row = vec![
            fmt(*eps),
            fmt_norm(rep.distance),
            fmt(rep.driver_distance1),
            fmt(rep.driver_distance2),
            fmt_norm(rep.total_distance()),
            fmt(rep.integral),
            fmt(rep.integral_other),
            fmt(rep.gap()),
            fmt(sw.slope),
        ];
        row.extend(constant_cells(&sw.constants));
        r.rows.push(row);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn words_are_row_major() {
        assert_eq!(word(0, 2, 0), "");
        assert_eq!(word(1, 2, 2), "1.2");
        assert_eq!(word(5, 3, 2), "2.3");
        assert_eq!(diagonal(1, 3, 2), 4);
    }

    #[test]
    fn slope_of_line() {
        assert!((fitted_slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn bad_flags_exit_two() {
        assert_eq!(run(["roughsew", "signature", "--level", "2"]), 2);
        assert_eq!(
            run(["roughsew", "signature", "--path", "/nonexistent.csv", "--level", "2"]),
            2
        );
    }
}
