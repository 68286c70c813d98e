//! Numeric evaluation of the asymptotic-normality conditions.
//!
//! The conditions are statements about limits. Here they are evaluated on a
//! finite grid of sample sizes and summarized by a trend verdict: a term
//! "decreases" when it is strictly decreasing over the upper half of the grid
//! and its last value lies below a threshold.

use crate::combin::term_count;
use crate::depgraph::{self, GraphSpec};
use crate::process::{Process, ProcessSpec};
use crate::{Error, Mode, Result};
use serde::{Deserialize, Serialize};

/// Largest admissible exponent `b`.
pub const B_MAX: f64 = 2.0 / 3.0;

/// Variance exponents at or below this value are flagged as violating the
/// variance growth condition.
pub const KAPPA_FLAG_THRESHOLD: f64 = 0.2;

const B_SLACK: f64 = 1e-12;

fn check_b(b: f64) -> Result<()> {
    if !(b > 0.0 && b <= B_MAX + B_SLACK) {
        return Err(Error::InvalidArgument(format!("b = {b} is not in (0, 2/3]")));
    }
    Ok(())
}

fn check_d(d: f64) -> Result<()> {
    if !(d > 0.0) {
        return Err(Error::Degenerate(format!("variance D = {d} is not positive")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Terms {
    pub t1: f64,
    pub t2: f64,
}

/// `T1 = F²·m^{2−b}·n^{2(r−1)+b}·r^{4−2b}/D` and `T2 = β(m)^b·F²·n^{2r}/D`.
///
/// The same expressions serve both statistic families; `mode` only matters
/// through the variance `D` supplied by the caller.
#[allow(clippy::too_many_arguments)]
pub fn theorem1_terms(
    n: usize,
    m_n: usize,
    b: f64,
    bound: f64,
    r: usize,
    d: f64,
    beta_mn: f64,
    _mode: Mode,
) -> Result<Theorem1Terms> {
    check_b(b)?;
    check_d(d)?;
    if m_n == 0 || n == 0 || r == 0 {
        return Err(Error::InvalidArgument("n, m_n and r must be positive".into()));
    }
    if !(0.0..=1.0).contains(&beta_mn) {
        return Err(Error::InvalidArgument(format!("β(m) = {beta_mn} is not in [0, 1]")));
    }
    let (n, m, r) = (n as f64, m_n as f64, r as f64);
    let f2 = bound * bound;
    let t1 = f2 * m.powf(2.0 - b) * n.powf(2.0 * (r - 1.0) + b) * r.powf(4.0 - 2.0 * b) / d;
    let t2 = if beta_mn == 0.0 { 0.0 } else { beta_mn.powf(b) * f2 * n.powf(2.0 * r) / d };
    Ok(Theorem1Terms { t1, t2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TcTerms {
    pub term1: f64,
    pub term2: f64,
}

/// `M^b·Q^{2−b}/D` and `γ^b·(F·T)²/D`.
pub fn tc_terms(m: f64, q: f64, gamma: f64, bound: f64, t: f64, d: f64, b: f64) -> Result<TcTerms> {
    check_b(b)?;
    check_d(d)?;
    if m < 0.0 || q < 0.0 || gamma < 0.0 {
        return Err(Error::InvalidArgument("M, Q and γ must be nonnegative".into()));
    }
    let term2 = if gamma == 0.0 { 0.0 } else { gamma.powf(b) * (bound * t).powi(2) / d };
    Ok(TcTerms { term1: m.powf(b) * q.powf(2.0 - b) / d, term2 })
}

/// Constants `(K1, K2)` with `term1 ≤ K1·T1` and `term2 ≤ K2·T2` when the
/// graph bounds are substituted into [`tc_terms`] and `m ≥ 1`:
/// `K1 = (3R)^{2−b}` (from `2m+1 ≤ 3m` and `C(n,s) ≤ n^s`), `K2 = (8R)^b`.
pub fn tc_theorem1_constants(b: f64, big_r: usize) -> (f64, f64) {
    let r = big_r as f64;
    ((3.0 * r).powf(2.0 - b), (8.0 * r).powf(b))
}

/// `m_n = ⌊n^{(κ−b0)/4}⌋`, at least 1. Requires `0 < b0 < min(2/3, κ)`.
pub fn block_schedule(n: usize, kappa: f64, b0: f64) -> Result<usize> {
    if !(b0 > 0.0 && b0 <= B_MAX + B_SLACK && b0 < kappa) {
        return Err(Error::InvalidArgument(format!("b0 = {b0} must satisfy 0 < b0 ≤ 2/3 and b0 < κ = {kappa}")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let x = (n as f64).powf((kappa - b0) / 4.0);
    // Guard exact powers such as 16^{1/4} against landing just below an integer.
    let m = (x * (1.0 + 1e-12)).floor();
    Ok((m as usize).max(1))
}

/// The function `h` in `β(t) ≤ t^{−h(t)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum HFunction {
    Ln,
    ScaledLn { scale: f64 },
    Power { exponent: f64 },
    Constant { value: f64 },
}

impl HFunction {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            HFunction::Ln => t.ln(),
            HFunction::ScaledLn { scale } => scale * t.ln(),
            HFunction::Power { exponent } => t.powf(exponent),
            HFunction::Constant { value } => value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundModel {
    Constant {
        value: f64,
    },
    /// `c·n^exponent`.
    Power {
        c: f64,
        exponent: f64,
    },
}

impl BoundModel {
    pub fn at(&self, n: usize) -> f64 {
        match *self {
            BoundModel::Constant { value } => value,
            BoundModel::Power { c, exponent } => c * (n as f64).powf(exponent),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariancePoint {
    pub n: usize,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VarianceModel {
    /// `D(n) = c·n^{2(r−1)+κ}`.
    Parametric { c: f64, kappa: f64 },
    /// Values at the grid points, e.g. from the moment oracle or Monte Carlo.
    Measured { points: Vec<VariancePoint> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BetaModel {
    FromProcess {
        process: ProcessSpec,
    },
    /// `β(t) = min(1, t^{−h(t)})`.
    Power {
        h: HFunction,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateModel {
    pub r: usize,
    pub bound: BoundModel,
    pub variance: VarianceModel,
    pub beta: BetaModel,
}

/// A validated [`RateModel`].
pub struct Rates {
    model: RateModel,
    process: Option<Process>,
    kappa: f64,
    kappa_source: &'static str,
}

impl Rates {
    pub fn new(model: RateModel) -> Result<Self> {
        if model.r == 0 {
            return Err(Error::InvalidArgument("r must be positive".into()));
        }
        let (kappa, kappa_source) = match &model.variance {
            VarianceModel::Parametric { c, kappa } => {
                if !(*c > 0.0 && *kappa > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "variance model needs C > 0 and κ > 0 (C = {c}, κ = {kappa})"
                    )));
                }
                (*kappa, "parametric")
            }
            VarianceModel::Measured { points } => {
                let est = variance_scaling_estimate(points, model.r)?;
                if !(est.kappa_hat > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "measured variances grow with exponent κ̂ = {} ≤ 0",
                        est.kappa_hat
                    )));
                }
                (est.kappa_hat, "estimated")
            }
        };
        let process = match &model.beta {
            BetaModel::FromProcess { process } => Some(Process::new(process.clone())?),
            BetaModel::Power { .. } => None,
        };
        Ok(Self { model, process, kappa, kappa_source })
    }

    pub fn model(&self) -> &RateModel {
        &self.model
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn variance(&self, n: usize) -> Result<f64> {
        match &self.model.variance {
            VarianceModel::Parametric { c, kappa } => {
                Ok(c * (n as f64).powf(2.0 * (self.model.r as f64 - 1.0) + kappa))
            }
            VarianceModel::Measured { points } => points
                .iter()
                .find(|p| p.n == n)
                .map(|p| p.d)
                .ok_or_else(|| Error::InvalidArgument(format!("no measured variance at n = {n}"))),
        }
    }

    pub fn beta(&self, t: usize) -> Result<f64> {
        match (&self.model.beta, &self.process) {
            (_, Some(p)) => depgraph::beta_at(p, t),
            (BetaModel::Power { h }, None) => {
                let t = t as f64;
                Ok(t.powf(-h.eval(t)).min(1.0))
            }
            (BetaModel::FromProcess { .. }, None) => unreachable!("process is built in Rates::new"),
        }
    }

    /// `h` on the integers `lo..=hi`; `None` when the model is not of power form.
    fn h_diverges_on(&self, lo: usize, hi: usize) -> Option<bool> {
        let BetaModel::Power { h } = &self.model.beta else { return None };
        let values: Vec<f64> = (lo..=hi).map(|t| h.eval(t as f64)).collect();
        let nondecreasing = values.windows(2).all(|w| w[1] >= w[0]);
        Some(nondecreasing && values.last() > values.first())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Decreasing,
    NonDecreasing,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Decreasing => "decreasing",
            Verdict::NonDecreasing => "non-decreasing",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Trend of a sequence indexed by increasing `n`.
///
/// An identically zero sequence counts as decreasing. Otherwise the sequence
/// must decrease strictly over its upper half and end below `threshold`.
pub fn trend(values: &[f64], threshold: f64) -> Verdict {
    if values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
        return Verdict::Inconclusive;
    }
    if values.iter().all(|&v| v == 0.0) {
        return Verdict::Decreasing;
    }
    let top = &values[values.len() / 2..];
    let top = if top.len() < 2 { &values[values.len() - 2..] } else { top };
    let falling = top.windows(2).all(|w| w[1] < w[0]);
    if falling && *values.last().unwrap() < threshold {
        Verdict::Decreasing
    } else {
        Verdict::NonDecreasing
    }
}

fn combine(verdicts: impl IntoIterator<Item = Verdict>) -> Verdict {
    let mut out = Verdict::Decreasing;
    for v in verdicts {
        match v {
            Verdict::NonDecreasing => return Verdict::NonDecreasing,
            Verdict::Inconclusive => out = Verdict::Inconclusive,
            Verdict::Decreasing => {}
        }
    }
    out
}

fn default_b0() -> f64 {
    B_MAX
}

fn default_big_r() -> usize {
    1
}

fn default_threshold() -> f64 {
    0.1
}

fn default_mode() -> Mode {
    Mode::U
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionConfig {
    pub model: RateModel,
    pub n_grid: Vec<usize>,
    /// Defaults to `[b0]`.
    #[serde(default)]
    pub b_grid: Vec<f64>,
    #[serde(default = "default_b0")]
    pub b0: f64,
    #[serde(default = "default_big_r", rename = "R")]
    pub big_r: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    /// Also evaluate the general-graph terms with the closed-form bounds.
    #[serde(default)]
    pub include_tc: bool,
}

impl ConditionConfig {
    pub fn new(model: RateModel, n_grid: Vec<usize>, b_grid: Vec<f64>, b0: f64) -> Self {
        Self {
            model,
            n_grid,
            b_grid,
            b0,
            big_r: default_big_r(),
            threshold: default_threshold(),
            mode: default_mode(),
            include_tc: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub n: usize,
    pub b: f64,
    pub m_n: usize,
    pub d: f64,
    pub beta_mn: f64,
    pub t1: f64,
    pub t2: f64,
    /// `m^{2−b}·n^{b−κ}`.
    pub reduced_first: f64,
    /// `m^{−h(m)·b}·n^{2(r−1)−κ}`; `None` unless `β` has power form.
    pub reduced_second: Option<f64>,
    pub tc: Option<TcTerms>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermVerdicts {
    pub t1: Verdict,
    pub t2: Verdict,
    pub reduced_first: Verdict,
    pub reduced_second: Option<Verdict>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentCheck {
    pub b: f64,
    /// `(κ−b0)/4·(2−b) + b − κ`.
    pub analytic: f64,
    /// Log-log slope of `m^{2−b}·n^{b−κ}` over the grid with the unrounded
    /// schedule `m = n^{(κ−b0)/4}`.
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub r: usize,
    pub mode: Mode,
    pub b0: f64,
    #[serde(rename = "R")]
    pub big_r: usize,
    pub kappa: f64,
    pub kappa_source: String,
    pub threshold: f64,
    pub points: Vec<GridPoint>,
    pub per_b: Vec<(f64, TermVerdicts)>,
    pub exponents: Vec<ExponentCheck>,
    pub verdict: Verdict,
    pub warnings: Vec<String>,
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Evaluate the conditions on every `(n, b)` grid point.
pub fn theorem2_check(config: &ConditionConfig) -> Result<ConditionReport> {
    let rates = Rates::new(config.model.clone())?;
    let r = config.model.r;
    let mut n_grid = config.n_grid.clone();
    if n_grid.is_empty() {
        return Err(Error::InvalidArgument("n grid is empty".into()));
    }
    n_grid.sort_unstable();
    n_grid.dedup();
    let b_grid = if config.b_grid.is_empty() { vec![config.b0] } else { config.b_grid.clone() };
    for &b in &b_grid {
        check_b(b)?;
        if b > config.b0 + B_SLACK {
            return Err(Error::InvalidArgument(format!("b = {b} exceeds b0 = {}", config.b0)));
        }
    }
    if config.big_r == 0 {
        return Err(Error::InvalidArgument("R must be positive".into()));
    }
    let kappa = rates.kappa();
    let schedule: Vec<usize> = n_grid.iter().map(|&n| block_schedule(n, kappa, config.b0)).collect::<Result<_>>()?;

    let mut warnings = Vec::new();
    let (lo, hi) = (schedule[0], *schedule.last().unwrap());
    if rates.h_diverges_on(lo, hi) == Some(false) {
        warnings.push(format!(
            "h is not increasing over the block lengths {lo}..={hi}; the rate assumption cannot be confirmed on this grid"
        ));
    }
    if let VarianceModel::Measured { .. } = config.model.variance {
        if kappa <= KAPPA_FLAG_THRESHOLD {
            warnings.push(format!("estimated variance exponent κ̂ = {kappa} is at most {KAPPA_FLAG_THRESHOLD}"));
        }
    }

    let mut points = Vec::new();
    for &b in &b_grid {
        for (&n, &m_n) in n_grid.iter().zip(&schedule) {
            let bound = rates.model.bound.at(n);
            let d = rates.variance(n)?;
            let beta_mn = rates.beta(m_n)?;
            let terms = theorem1_terms(n, m_n, b, bound, r, d, beta_mn, config.mode)?;
            let (nf, mf) = (n as f64, m_n as f64);
            let reduced_first = mf.powf(2.0 - b) * nf.powf(b - kappa);
            let reduced_second = match &rates.model.beta {
                BetaModel::Power { h } => Some(mf.powf(-h.eval(mf) * b) * nf.powf(2.0 * (r as f64 - 1.0) - kappa)),
                BetaModel::FromProcess { .. } => None,
            };
            let tc = if config.include_tc {
                let graph = GraphSpec::new(n, r, m_n, config.mode)?;
                let g = depgraph::gamma(config.big_r, beta_mn)?;
                Some(tc_terms(
                    depgraph::m_bound(bound, &graph),
                    depgraph::q_bound(config.big_r, bound, &graph),
                    g.value,
                    bound,
                    term_count(n, r, config.mode),
                    d,
                    b,
                )?)
            } else {
                None
            };
            points.push(GridPoint {
                n,
                b,
                m_n,
                d,
                beta_mn,
                t1: terms.t1,
                t2: terms.t2,
                reduced_first,
                reduced_second,
                tc,
            });
        }
    }

    let th = config.threshold;
    let per_b: Vec<(f64, TermVerdicts)> = b_grid
        .iter()
        .map(|&b| {
            let row: Vec<&GridPoint> = points.iter().filter(|p| p.b == b).collect();
            let col = |f: &dyn Fn(&GridPoint) -> f64| row.iter().map(|p| f(p)).collect::<Vec<_>>();
            let reduced_second = row[0].reduced_second.map(|_| trend(&col(&|p| p.reduced_second.unwrap()), th));
            (
                b,
                TermVerdicts {
                    t1: trend(&col(&|p| p.t1), th),
                    t2: trend(&col(&|p| p.t2), th),
                    reduced_first: trend(&col(&|p| p.reduced_first), th),
                    reduced_second,
                },
            )
        })
        .collect();
    let verdict =
        combine(per_b.iter().flat_map(|(_, v)| [v.t1, v.t2, v.reduced_first].into_iter().chain(v.reduced_second)));

    let logs: Vec<f64> = n_grid.iter().map(|&n| (n as f64).ln()).collect();
    let exponents = b_grid
        .iter()
        .map(|&b| {
            let e = (kappa - config.b0) / 4.0;
            let ys: Vec<f64> = n_grid
                .iter()
                .map(|&n| {
                    let n = n as f64;
                    (n.powf(e).powf(2.0 - b) * n.powf(b - kappa)).ln()
                })
                .collect();
            ExponentCheck {
                b,
                analytic: e * (2.0 - b) + b - kappa,
                numeric: if n_grid.len() > 1 { slope(&logs, &ys) } else { f64::NAN },
            }
        })
        .collect();

    Ok(ConditionReport {
        r,
        mode: config.mode,
        b0: config.b0,
        big_r: config.big_r,
        kappa,
        kappa_source: rates.kappa_source.to_string(),
        threshold: th,
        points,
        per_b,
        exponents,
        verdict,
        warnings,
    })
}

/// Least-squares fit of `ln D` against `ln n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingEstimate {
    pub exponent: f64,
    pub intercept: f64,
    /// Root mean square residual on the log scale.
    pub residual: f64,
    /// `exponent − 2(r−1)`.
    pub kappa_hat: f64,
    /// `κ̂ ≤ 0.2`: the variance condition is not met.
    pub flagged: bool,
}

pub fn variance_scaling_estimate(points: &[VariancePoint], r: usize) -> Result<ScalingEstimate> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument("at least three grid points are needed".into()));
    }
    if let Some(p) = points.iter().find(|p| !(p.d > 0.0 && p.d.is_finite()) || p.n == 0) {
        return Err(Error::Degenerate(format!("variance {} at n = {} is not positive", p.d, p.n)));
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.d.ln()).collect();
    if xs.iter().all(|&x| x == xs[0]) {
        return Err(Error::InvalidArgument("grid needs at least two distinct n".into()));
    }
    let exponent = slope(&xs, &ys);
    let k = xs.len() as f64;
    let intercept = (ys.iter().sum::<f64>() - exponent * xs.iter().sum::<f64>()) / k;
    let residual = (xs.iter().zip(&ys).map(|(x, y)| (y - intercept - exponent * x).powi(2)).sum::<f64>() / k).sqrt();
    let kappa_hat = exponent - 2.0 * (r as f64 - 1.0);
    Ok(ScalingEstimate { exponent, intercept, residual, kappa_hat, flagged: kappa_hat <= KAPPA_FLAG_THRESHOLD })
}
