//! Monte Carlo harness: replicate simulation of U/V-statistics, moment and
//! distribution-function diagnostics against the standard normal law.
//!
//! Replicate `i` at sample size `n` draws its path from the stream
//! `derive_seed(seed, [n, i])`, so results do not depend on scheduling or on
//! the number of worker threads.

use crate::conditions::{trend, variance_scaling_estimate, ScalingEstimate, VariancePoint, Verdict};
use crate::kernel::{BuiltinKernel, Kernel, KernelSpec};
use crate::process::{Process, ProcessSpec};
use crate::rng::{derive_seed, path_rng};
use crate::stat::{degenerate_variance_threshold, exact_moments, statistic, MomentMethod, MomentPair};
use crate::sum::{mean_var, CompensatedSum};
use crate::{combin, Error, Mode, Result, ENUMERATION_BUDGET};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Number of delete-one-block jackknife blocks.
pub const JACKKNIFE_BLOCKS: usize = 100;

/// Smallest admissible replicate count.
pub const MIN_REPLICATES: usize = 100;

/// Standard normal distribution function, `Φ(x) = erfc(−x/√2)/2`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `E Z^k` for a standard normal `Z`: zero for odd `k`, `(k−1)!!` otherwise.
pub fn normal_moment(k: u32) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    (1..k).step_by(2).map(f64::from).product()
}

/// `sup_x |F̂(x) − Φ(x)|` for the empirical distribution function of `sample`.
pub fn ks_distance(sample: &[f64]) -> f64 {
    if sample.is_empty() {
        return f64::NAN;
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let phi = normal_cdf(x);
            ((i + 1) as f64 / n - phi).max(phi - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Raw moments `(1/N) Σ z^k` for `k = 1..=max_order`.
pub fn empirical_moments(z: &[f64], max_order: usize) -> Vec<f64> {
    let mut sums = vec![CompensatedSum::new(); max_order];
    for &x in z {
        let mut p = 1.0;
        for s in &mut sums {
            p *= x;
            s.add(p);
        }
    }
    sums.iter().map(|s| s.value() / z.len() as f64).collect()
}

fn standardize_all(values: &[f64], mean: f64, var: f64) -> Vec<f64> {
    let sd = var.sqrt();
    values.iter().map(|x| (x - mean) / sd).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub k: usize,
    pub value: f64,
    /// Delete-one-block jackknife standard error.
    pub se: f64,
}

/// Moments of the standardized sample with jackknife standard errors.
///
/// With `fixed = None` the standardization uses the sample's own mean and
/// population variance and is recomputed inside every jackknife replicate.
pub fn jackknife_moments(values: &[f64], max_order: usize, fixed: Option<(f64, f64)>) -> Vec<MomentEstimate> {
    let stats = |xs: &[f64]| {
        let (mean, var) = fixed.unwrap_or_else(|| mean_var(xs));
        empirical_moments(&standardize_all(xs, mean, var), max_order)
    };
    let full = stats(values);
    let blocks = JACKKNIFE_BLOCKS.min(values.len());
    if blocks < 2 {
        return full.iter().enumerate().map(|(i, &v)| MomentEstimate { k: i + 1, value: v, se: f64::NAN }).collect();
    }
    let size = values.len() / blocks;
    let mut rest = Vec::with_capacity(values.len());
    let leave_out: Vec<Vec<f64>> = (0..blocks)
        .map(|b| {
            let lo = b * size;
            let hi = if b + 1 == blocks { values.len() } else { lo + size };
            rest.clear();
            rest.extend_from_slice(&values[..lo]);
            rest.extend_from_slice(&values[hi..]);
            stats(&rest)
        })
        .collect();
    let g = blocks as f64;
    full.iter()
        .enumerate()
        .map(|(k, &value)| {
            let mean = leave_out.iter().map(|m| m[k]).sum::<f64>() / g;
            let ss: f64 = leave_out.iter().map(|m| (m[k] - mean).powi(2)).sum();
            MomentEstimate { k: k + 1, value, se: ((g - 1.0) / g * ss).sqrt() }
        })
        .collect()
}

/// Long-run variance of a stationary series from non-overlapping batch means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchMeans {
    /// `batch_size · Var(batch means)`.
    pub estimate: f64,
    /// `estimate · √(2/(batches − 1))`.
    pub std_error: f64,
    pub batches: usize,
    pub batch_size: usize,
}

pub fn batch_means(series: &[f64], batches: usize) -> Result<BatchMeans> {
    if batches < 2 || series.len() < 2 * batches {
        return Err(Error::InvalidArgument(format!("{} observations cannot form {batches} batches", series.len())));
    }
    let size = series.len() / batches;
    let means: Vec<f64> = series.chunks_exact(size).take(batches).map(|c| crate::sum::sum(c) / size as f64).collect();
    let (_, pop) = mean_var(&means);
    let k = batches as f64;
    let estimate = size as f64 * pop * k / (k - 1.0);
    Ok(BatchMeans { estimate, std_error: estimate * (2.0 / (k - 1.0)).sqrt(), batches, batch_size: size })
}

fn run_parallel<T: Send>(jobs: Option<usize>, work: impl FnOnce() -> T + Send) -> Result<T> {
    #[cfg(feature = "parallel")]
    {
        if let Some(j) = jobs {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j.max(1))
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            return Ok(pool.install(work));
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = jobs;
    Ok(work())
}

/// Statistic values for replicates `first..first + count` at sample size `n`.
pub fn simulate_statistics(
    process: &Process,
    kernel: &dyn Kernel,
    mode: Mode,
    n: usize,
    seed: u64,
    first: usize,
    count: usize,
) -> Result<Vec<f64>> {
    if n == 0 || (mode == Mode::U && n < kernel.order()) {
        return Err(Error::InvalidArgument(format!("n = {n} is too small for a kernel of order {}", kernel.order())));
    }
    let one = |buf: &mut Vec<f64>, i: usize| {
        let mut rng = path_rng(derive_seed(seed, &[n as u64, i as u64]));
        process.fill_path(&mut rng, buf);
        statistic(buf, kernel, mode)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (first..first + count).into_par_iter().map_init(|| vec![0.0; n], one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut buf = vec![0.0; n];
        (first..first + count).map(|i| one(&mut buf, i)).collect()
    }
}

/// Monte Carlo mean and variance of the statistic with standard errors.
pub fn monte_carlo_moments(
    process: &Process,
    kernel: &dyn Kernel,
    mode: Mode,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<MomentPair> {
    if replicates < 2 {
        return Err(Error::InvalidArgument("need at least two replicates".into()));
    }
    let values = simulate_statistics(process, kernel, mode, n, seed, 0, replicates)?;
    Ok(sample_moment_pair(&values))
}

fn sample_moment_pair(values: &[f64]) -> MomentPair {
    let (mean, var) = mean_var(values);
    let n = values.len() as f64;
    let m4 = values.iter().map(|x| (x - mean).powi(4)).collect::<CompensatedSum>().value() / n;
    MomentPair {
        mean,
        variance: var,
        method: MomentMethod::MonteCarlo {
            replicates: values.len(),
            mean_se: (var / n).sqrt(),
            variance_se: ((m4 - var * var).max(0.0) / n).sqrt(),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Centering {
    /// Exact oracle when the enumeration fits the budget, estimated otherwise.
    #[default]
    Auto,
    ExactOracle,
    Estimated,
}

/// Checks that turn a completed run into a pass/fail outcome.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Largest admissible KS distance at the largest `n`.
    pub ks_final_max: Option<f64>,
    /// Smallest admissible KS distance at the largest `n` (negative controls).
    pub ks_final_min: Option<f64>,
    /// KS must decrease strictly across the whole grid.
    pub ks_strictly_decreasing: bool,
    /// KS must decrease strictly across the upper half of the grid.
    pub ks_decreasing_top_half: bool,
    /// Bound on `|m̂₃|` at the largest `n`.
    pub m3_abs_max: Option<f64>,
    /// Bound on `|m̂₄ − 3|` at the largest `n`.
    pub m4_dev_max: Option<f64>,
    /// Required value of the variance-scaling flag.
    pub scaling_flagged: Option<bool>,
}

impl Thresholds {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessOverride {
    pub n: usize,
    pub process: ProcessSpec,
}

fn default_max_moment() -> usize {
    6
}

fn default_mode() -> Mode {
    Mode::U
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub process: ProcessSpec,
    /// Per-`n` process laws for triangular arrays; `process` applies elsewhere.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub process_by_n: Vec<ProcessOverride>,
    pub kernel: KernelSpec,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default)]
    pub centering: Centering,
    #[serde(default = "default_max_moment")]
    pub max_moment: usize,
    /// Worker threads; `None` uses every core. Results do not depend on it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(default, skip_serializing_if = "Thresholds::is_empty")]
    pub thresholds: Thresholds,
}

impl ExperimentConfig {
    pub fn new(
        process: ProcessSpec,
        kernel: KernelSpec,
        mode: Mode,
        n_grid: Vec<usize>,
        replicates: usize,
        seed: u64,
    ) -> Self {
        Self {
            process,
            process_by_n: Vec::new(),
            kernel,
            mode,
            n_grid,
            replicates,
            seed,
            centering: Centering::Auto,
            max_moment: default_max_moment(),
            jobs: None,
            thresholds: Thresholds::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < MIN_REPLICATES {
            return Err(Error::InvalidArgument(format!(
                "replicates = {} is below the minimum of {MIN_REPLICATES}",
                self.replicates
            )));
        }
        if self.n_grid.is_empty() || self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("n_grid must be nonempty and strictly increasing".into()));
        }
        if self.max_moment == 0 {
            return Err(Error::InvalidArgument("max_moment must be positive".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::InvalidArgument("jobs must be positive".into()));
        }
        let kernel = BuiltinKernel::new(self.kernel.clone())?;
        let r = kernel.order();
        if let Some(&n) = self.n_grid.iter().find(|&&n| n == 0 || (self.mode == Mode::U && n < r)) {
            return Err(Error::InvalidArgument(format!("n = {n} is too small for a kernel of order {r}")));
        }
        for o in &self.process_by_n {
            if !self.n_grid.contains(&o.n) {
                return Err(Error::InvalidArgument(format!("process override for n = {} not in n_grid", o.n)));
            }
        }
        Ok(())
    }

    pub fn process_at(&self, n: usize) -> &ProcessSpec {
        self.process_by_n.iter().find(|o| o.n == n).map_or(&self.process, |o| &o.process)
    }
}

/// What a run will do at one sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub n: usize,
    pub centering: Centering,
    pub path_count: Option<f64>,
    pub terms: f64,
    pub kernel_evaluations: f64,
}

fn choose_centering(requested: Centering, process: &Process, n: usize) -> Result<(Centering, Option<f64>)> {
    let paths = process.path_count(n).ok();
    let affordable = paths.is_some_and(|p| p <= ENUMERATION_BUDGET as f64);
    let chosen = match requested {
        Centering::Auto if affordable => Centering::ExactOracle,
        Centering::Auto => Centering::Estimated,
        Centering::ExactOracle if !affordable => {
            return Err(match paths {
                Some(needed) => Error::BudgetExceeded {
                    needed,
                    budget: ENUMERATION_BUDGET as f64,
                    hint: "use estimated centering for this n",
                },
                None => Error::NotDiscrete(format!("exact centering needs a discrete process (n = {n})")),
            });
        }
        c => c,
    };
    Ok((chosen, paths))
}

/// Resolve the centering and cost at every grid point without simulating.
pub fn plan(config: &ExperimentConfig) -> Result<Vec<PlanEntry>> {
    config.validate()?;
    let kernel = BuiltinKernel::new(config.kernel.clone())?;
    config
        .n_grid
        .iter()
        .map(|&n| {
            let process = Process::new(config.process_at(n).clone())?;
            let (centering, path_count) = choose_centering(config.centering, &process, n)?;
            let terms = combin::term_count(n, kernel.order(), config.mode);
            Ok(PlanEntry { n, centering, path_count, terms, kernel_evaluations: terms * config.replicates as f64 })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Status {
    Ok,
    VarianceConditionViolated { reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub min: f64,
    pub q05: f64,
    pub median: f64,
    pub q95: f64,
    pub max: f64,
}

impl SampleSummary {
    fn of(z: &[f64]) -> Self {
        let mut s = z.to_vec();
        s.sort_by(f64::total_cmp);
        let q = |p: f64| s[((p * (s.len() - 1) as f64).round() as usize).min(s.len() - 1)];
        Self { min: s[0], q05: q(0.05), median: q(0.5), q95: q(0.95), max: s[s.len() - 1] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerN {
    pub n: usize,
    pub status: Status,
    pub centering: Centering,
    pub mean: f64,
    pub var: f64,
    pub var_method: MomentMethod,
    pub summary: Option<SampleSummary>,
    pub moments: Vec<MomentEstimate>,
    pub ks: Option<f64>,
    /// Wall-clock seconds; left empty in reproducible outputs.
    pub seconds: Option<f64>,
}

impl PerN {
    pub fn moment(&self, k: usize) -> Option<MomentEstimate> {
        self.moments.iter().find(|m| m.k == k).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub per_n: Vec<PerN>,
    pub scaling: Option<ScalingEstimate>,
    pub checks: Vec<CheckOutcome>,
    pub passed: bool,
}

impl ExperimentResult {
    /// Copy with every timing removed, for byte-reproducible output.
    pub fn without_timings(&self) -> Self {
        let mut out = self.clone();
        out.per_n.iter_mut().for_each(|p| p.seconds = None);
        out
    }

    pub fn ks_series(&self) -> Vec<f64> {
        self.per_n.iter().map(|p| p.ks.unwrap_or(f64::NAN)).collect()
    }
}

#[cfg(not(target_arch = "wasm32"))]
fn clock() -> impl FnOnce() -> Option<f64> {
    let start = std::time::Instant::now();
    move || Some(start.elapsed().as_secs_f64())
}

#[cfg(target_arch = "wasm32")]
fn clock() -> impl FnOnce() -> Option<f64> {
    || None
}

fn run_one(config: &ExperimentConfig, kernel: &BuiltinKernel, n: usize) -> Result<PerN> {
    let stop = clock();
    let process = Process::new(config.process_at(n).clone())?;
    let (centering, _) = choose_centering(config.centering, &process, n)?;
    let values = simulate_statistics(&process, kernel, config.mode, n, config.seed, 0, config.replicates)?;
    let pair = match centering {
        Centering::ExactOracle => exact_moments(&process, kernel, config.mode, n)?,
        _ => sample_moment_pair(&values),
    };
    let floor = degenerate_variance_threshold(kernel.bound(), n, kernel.order(), config.mode);
    let mut out = PerN {
        n,
        status: Status::Ok,
        centering,
        mean: pair.mean,
        var: pair.variance,
        var_method: pair.method,
        summary: None,
        moments: Vec::new(),
        ks: None,
        seconds: None,
    };
    if !(pair.variance > floor) {
        out.status = Status::VarianceConditionViolated {
            reason: format!("variance {} is not above the degeneracy floor {floor}", pair.variance),
        };
    } else {
        let fixed = (centering == Centering::ExactOracle).then_some((pair.mean, pair.variance));
        let z = standardize_all(&values, pair.mean, pair.variance);
        out.summary = Some(SampleSummary::of(&z));
        out.ks = Some(ks_distance(&z));
        out.moments = jackknife_moments(&values, config.max_moment, fixed);
    }
    out.seconds = stop();
    Ok(out)
}

fn evaluate(t: &Thresholds, per_n: &[PerN], scaling: Option<&ScalingEstimate>) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let mut check =
        |name: &str, passed: bool, detail: String| out.push(CheckOutcome { name: name.to_string(), passed, detail });
    let last = per_n.last();
    let ks: Vec<f64> = per_n.iter().map(|p| p.ks.unwrap_or(f64::NAN)).collect();
    let final_ks = ks.last().copied().unwrap_or(f64::NAN);
    if let Some(max) = t.ks_final_max {
        check("ks_final_max", final_ks <= max, format!("final KS {final_ks} vs maximum {max}"));
    }
    if let Some(min) = t.ks_final_min {
        check("ks_final_min", final_ks >= min, format!("final KS {final_ks} vs minimum {min}"));
    }
    if t.ks_strictly_decreasing {
        let ok = ks.windows(2).all(|w| w[1] < w[0]);
        check("ks_strictly_decreasing", ok, format!("KS series {ks:?}"));
    }
    if t.ks_decreasing_top_half {
        let ok = trend(&ks, f64::INFINITY) == Verdict::Decreasing;
        check("ks_decreasing_top_half", ok, format!("KS series {ks:?}"));
    }
    let moment = |k| last.and_then(|p| p.moment(k)).map_or(f64::NAN, |m| m.value);
    if let Some(max) = t.m3_abs_max {
        let m3 = moment(3);
        check("m3_abs_max", m3.abs() <= max, format!("m3 = {m3} vs maximum |m3| {max}"));
    }
    if let Some(max) = t.m4_dev_max {
        let m4 = moment(4);
        check("m4_dev_max", (m4 - 3.0).abs() <= max, format!("m4 = {m4} vs maximum |m4 - 3| {max}"));
    }
    if let Some(want) = t.scaling_flagged {
        let got = scaling.map(|s| s.flagged);
        check("scaling_flagged", got == Some(want), format!("flag {got:?}, expected {want}"));
    }
    out
}

/// Simulate every grid point and evaluate the configured thresholds.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let kernel = BuiltinKernel::new(config.kernel.clone())?;
    let per_n = run_parallel(config.jobs, || {
        config.n_grid.iter().map(|&n| run_one(config, &kernel, n)).collect::<Result<Vec<_>>>()
    })??;
    let points: Vec<VariancePoint> =
        per_n.iter().filter(|p| p.status == Status::Ok).map(|p| VariancePoint { n: p.n, d: p.var }).collect();
    let scaling = if points.len() >= 3 { variance_scaling_estimate(&points, kernel.order()).ok() } else { None };
    let checks = evaluate(&config.thresholds, &per_n, scaling.as_ref());
    let passed = checks.iter().all(|c| c.passed);
    Ok(ExperimentResult { config: config.clone(), per_n, scaling, checks, passed })
}

fn csv_float(x: Option<f64>) -> String {
    x.map(crate::report::fmt_f64).unwrap_or_default()
}

/// Flat table with columns `n, mean, var, m1..mK, ks, seconds`.
pub fn results_csv(result: &ExperimentResult) -> String {
    let k = result.config.max_moment;
    let mut s = String::from("n,mean,var");
    for i in 1..=k {
        let _ = write!(s, ",m{i}");
    }
    s.push_str(",ks,seconds\n");
    for p in &result.per_n {
        let _ = write!(s, "{},{},{}", p.n, csv_float(Some(p.mean)), csv_float(Some(p.var)));
        for i in 1..=k {
            let _ = write!(s, ",{}", csv_float(p.moment(i).map(|m| m.value)));
        }
        let _ = writeln!(s, ",{},{}", csv_float(p.ks), csv_float(p.seconds));
    }
    s
}

/// Plot-ready table: `n, ks, abs_m4_minus_3`.
pub fn plot_csv(result: &ExperimentResult) -> String {
    let mut s = String::from("n,ks,abs_m4_minus_3\n");
    for p in &result.per_n {
        let m4 = p.moment(4).map(|m| (m.value - 3.0).abs());
        let _ = writeln!(s, "{},{},{}", p.n, csv_float(p.ks), csv_float(m4));
    }
    s
}
