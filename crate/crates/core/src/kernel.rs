//! Bounded kernels of order `r`, the Hoeffding projection `f_1` and the
//! long-run variance `σ²` of `f_1` along the sequence.
//!
//! Kernels carry no normalization: a U-statistic is the plain sum of kernel
//! values over index tuples, and the classical average is computed at the
//! statistic level.

use crate::process::{Marginal, Process};
use crate::rng::stream_rng;
use crate::sum::CompensatedSum;
use crate::{Error, Result, ENUMERATION_BUDGET};
use gauss_quad::legendre::GaussLegendre;
use serde::{Deserialize, Serialize};
use std::num::NonZeroUsize;
use std::sync::OnceLock;

/// A bounded measurable kernel `f_{n; j1..jr}`.
///
/// `indices` are the 1-based positions `j1, …, jr` of the arguments; kernels
/// that are not index dependent ignore them.
pub trait Kernel: Send + Sync {
    fn order(&self) -> usize;

    /// Uniform bound `F` with `|eval(·, ·)| ≤ F`.
    fn bound(&self) -> f64;

    /// Invariance under simultaneous permutation of the arguments.
    fn is_symmetric(&self) -> bool;

    fn is_index_dependent(&self) -> bool;

    fn eval(&self, indices: &[usize], values: &[f64]) -> f64;

    /// `Some(c)` when the kernel is identically `c`.
    fn constant_value(&self) -> Option<f64> {
        None
    }
}

/// Coefficients `c_{j1 j2}` of the weighted product kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightScheme {
    /// `(-1)^{j1 + j2}`
    Alternating,
    /// `c` for every pair.
    Constant { c: f64 },
    /// `rate^{|j1 - j2|}`
    Geometric { rate: f64 },
}

impl WeightScheme {
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        match *self {
            WeightScheme::Alternating => {
                if (i + j).is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                }
            }
            WeightScheme::Constant { c } => c,
            WeightScheme::Geometric { rate } => rate.powi(i.abs_diff(j) as i32),
        }
    }
}

fn one() -> f64 {
    1.0
}

/// Kernel descriptor as it appears in configuration files:
/// `{"name": "clipped_gini", "params": {"clip": 1.0}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// `x·y`; `bound` must dominate `|x·y|` on the alphabet.
    Product {
        #[serde(default = "one")]
        bound: f64,
    },
    /// `1{x = y}`
    MatchIndicator,
    /// `sign(x − y)`
    KendallSign,
    /// `min(|x − y|, clip)`
    ClippedGini { clip: f64 },
    /// `c_{j1 j2}·x·y` with `|c| ≤ 1`.
    WeightedProduct {
        weights: WeightScheme,
        #[serde(default = "one")]
        bound: f64,
    },
    /// `(x − μ)(y − μ)`
    DegenerateProduct { mu: f64, bound: f64 },
    /// Order-one `x`.
    Identity {
        #[serde(default = "one")]
        bound: f64,
    },
    /// Constant `value` of the given order.
    Constant { order: usize, value: f64 },
}

/// Validated built-in kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltinKernel {
    spec: KernelSpec,
}

fn positive(x: f64, what: &str) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidKernel(format!("{what} must be positive and finite, got {x}")))
    }
}

impl BuiltinKernel {
    pub fn new(spec: KernelSpec) -> Result<Self> {
        match &spec {
            KernelSpec::Product { bound } | KernelSpec::Identity { bound } => positive(*bound, "bound")?,
            KernelSpec::ClippedGini { clip } => positive(*clip, "clip")?,
            KernelSpec::WeightedProduct { weights, bound } => {
                positive(*bound, "bound")?;
                let ok = match weights {
                    WeightScheme::Alternating => true,
                    WeightScheme::Constant { c } => c.abs() <= 1.0,
                    WeightScheme::Geometric { rate } => rate.abs() <= 1.0,
                };
                if !ok {
                    return Err(Error::InvalidKernel("weights must satisfy |c| ≤ 1".into()));
                }
            }
            KernelSpec::DegenerateProduct { mu, bound } => {
                positive(*bound, "bound")?;
                if !mu.is_finite() {
                    return Err(Error::InvalidKernel("mu must be finite".into()));
                }
            }
            KernelSpec::Constant { order, value } => {
                if *order == 0 {
                    return Err(Error::InvalidKernel("order must be positive".into()));
                }
                if !value.is_finite() {
                    return Err(Error::InvalidKernel("value must be finite".into()));
                }
            }
            KernelSpec::MatchIndicator | KernelSpec::KendallSign => {}
        }
        Ok(BuiltinKernel { spec })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }
}

/// Build a kernel from its name and a JSON parameter object.
pub fn builtin_kernel(name: &str, params: &serde_json::Value) -> Result<BuiltinKernel> {
    let mut obj = serde_json::Map::new();
    obj.insert("name".into(), serde_json::Value::String(name.to_string()));
    if !params.is_null() {
        obj.insert("params".into(), params.clone());
    }
    let spec: KernelSpec = serde_json::from_value(serde_json::Value::Object(obj))
        .map_err(|e| Error::InvalidKernel(format!("{name}: {e}")))?;
    BuiltinKernel::new(spec)
}

impl Kernel for BuiltinKernel {
    fn order(&self) -> usize {
        match self.spec {
            KernelSpec::Identity { .. } => 1,
            KernelSpec::Constant { order, .. } => order,
            _ => 2,
        }
    }

    fn bound(&self) -> f64 {
        match self.spec {
            KernelSpec::Product { bound }
            | KernelSpec::WeightedProduct { bound, .. }
            | KernelSpec::DegenerateProduct { bound, .. }
            | KernelSpec::Identity { bound } => bound,
            KernelSpec::MatchIndicator | KernelSpec::KendallSign => 1.0,
            KernelSpec::ClippedGini { clip } => clip,
            KernelSpec::Constant { value, .. } => value.abs(),
        }
    }

    fn is_symmetric(&self) -> bool {
        !matches!(self.spec, KernelSpec::KendallSign)
    }

    fn is_index_dependent(&self) -> bool {
        matches!(self.spec, KernelSpec::WeightedProduct { .. })
    }

    #[inline]
    fn eval(&self, indices: &[usize], values: &[f64]) -> f64 {
        match self.spec {
            KernelSpec::Product { .. } => values[0] * values[1],
            KernelSpec::MatchIndicator => {
                if values[0] == values[1] {
                    1.0
                } else {
                    0.0
                }
            }
            KernelSpec::KendallSign => {
                let d = values[0] - values[1];
                if d > 0.0 {
                    1.0
                } else if d < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            KernelSpec::ClippedGini { clip } => (values[0] - values[1]).abs().min(clip),
            KernelSpec::WeightedProduct { weights, .. } => {
                weights.weight(indices[0], indices[1]) * values[0] * values[1]
            }
            KernelSpec::DegenerateProduct { mu, .. } => (values[0] - mu) * (values[1] - mu),
            KernelSpec::Identity { .. } => values[0],
            KernelSpec::Constant { value, .. } => value,
        }
    }

    fn constant_value(&self) -> Option<f64> {
        match self.spec {
            KernelSpec::Constant { value, .. } => Some(value),
            _ => None,
        }
    }
}

/// Kernel backed by a closure, for library users.
pub struct FnKernel<F> {
    order: usize,
    bound: f64,
    symmetric: bool,
    index_dependent: bool,
    f: F,
}

impl<F> FnKernel<F>
where
    F: Fn(&[usize], &[f64]) -> f64 + Send + Sync,
{
    pub fn new(order: usize, bound: f64, symmetric: bool, index_dependent: bool, f: F) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidKernel("order must be positive".into()));
        }
        if !(bound.is_finite() && bound >= 0.0) {
            return Err(Error::InvalidKernel(format!("bound must be finite and nonnegative, got {bound}")));
        }
        Ok(FnKernel { order, bound, symmetric, index_dependent, f })
    }
}

impl<F> Kernel for FnKernel<F>
where
    F: Fn(&[usize], &[f64]) -> f64 + Send + Sync,
{
    fn order(&self) -> usize {
        self.order
    }
    fn bound(&self) -> f64 {
        self.bound
    }
    fn is_symmetric(&self) -> bool {
        self.symmetric
    }
    fn is_index_dependent(&self) -> bool {
        self.index_dependent
    }
    fn eval(&self, indices: &[usize], values: &[f64]) -> f64 {
        (self.f)(indices, values)
    }
}

/// Largest `|f|` over the full `alphabet^r` grid at the given index tuple.
pub fn max_abs_on_grid(kernel: &dyn Kernel, alphabet: &[f64], indices: &[usize]) -> Result<f64> {
    let r = kernel.order();
    let cells = (alphabet.len() as f64).powi(r as i32);
    if cells > ENUMERATION_BUDGET as f64 {
        return Err(Error::BudgetExceeded {
            needed: cells,
            budget: ENUMERATION_BUDGET as f64,
            hint: "boundedness audit grid too large",
        });
    }
    let mut digits = vec![0usize; r];
    let mut values = vec![0.0; r];
    let mut worst: f64 = 0.0;
    loop {
        for (v, &d) in values.iter_mut().zip(&digits) {
            *v = alphabet[d];
        }
        worst = worst.max(kernel.eval(indices, &values).abs());
        if !advance_digits(&mut digits, alphabet.len()) {
            return Ok(worst);
        }
    }
}

fn advance_digits(digits: &mut [usize], base: usize) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

fn identity_indices(r: usize) -> Vec<usize> {
    (1..=r).collect()
}

/// How the expectations in a projection were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ExpectationMethod {
    Exact,
    /// Composite Gauss–Legendre rule with this many nodes per unit interval.
    Quadrature {
        nodes: usize,
    },
    MonteCarlo {
        samples: usize,
    },
}

/// Options for Monte Carlo expectations on continuous marginals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloOptions {
    pub samples: usize,
    pub seed: u64,
}

impl Default for MonteCarloOptions {
    fn default() -> Self {
        MonteCarloOptions { samples: 200_000, seed: 0x5eed }
    }
}

/// Representation of `f_1`.
#[derive(Debug, Clone, PartialEq)]
pub enum ProjectionTable {
    /// Discrete marginal: support, probabilities and `f_1` at each support point.
    Tabulated { values: Vec<f64>, probs: Vec<f64>, f1: Vec<f64> },
    /// Uniform marginal: `f_1` at the nodes of a composite Gauss–Legendre
    /// rule on `[0, 1]`.
    Quadrature { nodes: Vec<f64>, weights: Vec<f64>, f1: Vec<f64> },
    /// Continuous marginal: `f_1(x)` is the mean of `f(x, d)` over stored
    /// draws `d` of the remaining `r − 1` arguments.
    Sampled { draws: Vec<Vec<f64>> },
}

/// `θ = E f(X̃_1..X̃_r)` and `f_1(x) = E f(x, X̃_2..X̃_r)` over independent
/// copies of `X_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub theta: f64,
    /// Standard error of `theta` (zero when exact).
    pub theta_se: f64,
    pub table: ProjectionTable,
    pub method: ExpectationMethod,
}

impl ProjectionResult {
    /// `f_1(x)`.
    pub fn f1(&self, kernel: &dyn Kernel, x: f64) -> f64 {
        let r = kernel.order();
        let idx = identity_indices(r);
        let mut args = vec![0.0; r];
        args[0] = x;
        match &self.table {
            ProjectionTable::Tabulated { values, probs, f1 } => {
                if let Some(i) = values.iter().position(|&v| v == x) {
                    return f1[i];
                }
                let mut acc = CompensatedSum::new();
                for_each_cell(values, probs, r - 1, |tail, p| {
                    args[1..].copy_from_slice(tail);
                    acc.add(p * kernel.eval(&idx, &args));
                });
                acc.value()
            }
            ProjectionTable::Quadrature { .. } => uniform_f1(kernel, x),
            ProjectionTable::Sampled { draws } => {
                let mut acc = CompensatedSum::new();
                for d in draws {
                    args[1..].copy_from_slice(d);
                    acc.add(kernel.eval(&idx, &args));
                }
                acc.value() / draws.len() as f64
            }
        }
    }
}

/// Visit every `len`-tuple over a discrete support with its product probability.
fn for_each_cell<F: FnMut(&[f64], f64)>(values: &[f64], probs: &[f64], len: usize, mut visit: F) {
    let mut digits = vec![0usize; len];
    let mut tuple = vec![0.0; len];
    loop {
        let mut p = 1.0;
        for (t, &d) in tuple.iter_mut().zip(&digits) {
            *t = values[d];
            p *= probs[d];
        }
        visit(&tuple, p);
        if !advance_digits(&mut digits, values.len()) {
            return;
        }
    }
}

const PANELS: usize = 16;
const DEGREE: usize = 16;

/// Composite Gauss–Legendre nodes and weights on `[a, b]`.
fn composite_rule(a: f64, b: f64) -> Vec<(f64, f64)> {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    let rule = RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(DEGREE).unwrap()));
    let h = (b - a) / PANELS as f64;
    let mut out = Vec::with_capacity(PANELS * DEGREE);
    for k in 0..PANELS {
        let lo = a + k as f64 * h;
        for &(x, w) in rule.as_node_weight_pairs() {
            out.push((lo + 0.5 * h * (x + 1.0), 0.5 * h * w));
        }
    }
    out
}

/// `∫_0^1 f(x, y) dy`, split at `y = x` where most kernels have a kink or jump.
fn uniform_f1(kernel: &dyn Kernel, x: f64) -> f64 {
    let idx = identity_indices(kernel.order());
    if kernel.order() == 1 {
        return kernel.eval(&idx, &[x]);
    }
    let mut acc = CompensatedSum::new();
    for (lo, hi) in [(0.0, x), (x, 1.0)] {
        if hi > lo {
            for (y, w) in composite_rule(lo, hi) {
                acc.add(w * kernel.eval(&idx, &[x, y]));
            }
        }
    }
    acc.value()
}

fn require_classical(kernel: &dyn Kernel) -> Result<()> {
    if kernel.is_index_dependent() {
        return Err(Error::InvalidKernel("Hoeffding projection is defined only for index-independent kernels".into()));
    }
    if !kernel.is_symmetric() {
        return Err(Error::InvalidKernel("Hoeffding projection is defined only for symmetric kernels".into()));
    }
    Ok(())
}

fn sample_marginal(process: &Process, rng: &mut crate::rng::PathRng) -> f64 {
    let mut x = [0.0];
    process.fill_path(rng, &mut x);
    x[0]
}

/// Number of stored draws used to represent a sampled `f_1`.
const F1_DRAWS: usize = 4096;

/// Hoeffding projection. Exact for discrete marginals, Monte Carlo with a
/// reported standard error otherwise.
pub fn hoeffding_projection(process: &Process, kernel: &dyn Kernel, mc: MonteCarloOptions) -> Result<ProjectionResult> {
    require_classical(kernel)?;
    let r = kernel.order();
    let idx = identity_indices(r);
    match process.marginal()? {
        Marginal::Discrete { values, probs } => {
            let cells = (values.len() as f64).powi(r as i32);
            if cells > ENUMERATION_BUDGET as f64 {
                return Err(Error::BudgetExceeded {
                    needed: cells,
                    budget: ENUMERATION_BUDGET as f64,
                    hint: "alphabet^r too large for an exact projection",
                });
            }
            let mut f1 = Vec::with_capacity(values.len());
            let mut args = vec![0.0; r];
            for &x in &values {
                let mut acc = CompensatedSum::new();
                args[0] = x;
                for_each_cell(&values, &probs, r - 1, |tail, p| {
                    args[1..].copy_from_slice(tail);
                    acc.add(p * kernel.eval(&idx, &args));
                });
                f1.push(acc.value());
            }
            let theta = probs.iter().zip(&f1).map(|(p, v)| p * v).collect::<CompensatedSum>().value();
            Ok(ProjectionResult {
                theta,
                theta_se: 0.0,
                table: ProjectionTable::Tabulated { values, probs, f1 },
                method: ExpectationMethod::Exact,
            })
        }
        Marginal::Continuous if process.is_iid_uniform() && r <= 2 => {
            let (nodes, weights): (Vec<f64>, Vec<f64>) = composite_rule(0.0, 1.0).into_iter().unzip();
            let f1: Vec<f64> = nodes.iter().map(|&x| uniform_f1(kernel, x)).collect();
            let theta = weights.iter().zip(&f1).map(|(w, v)| w * v).collect::<CompensatedSum>().value();
            let count = nodes.len();
            Ok(ProjectionResult {
                theta,
                theta_se: 0.0,
                table: ProjectionTable::Quadrature { nodes, weights, f1 },
                method: ExpectationMethod::Quadrature { nodes: count },
            })
        }
        Marginal::Continuous => {
            if mc.samples < 2 {
                return Err(Error::InvalidArgument("Monte Carlo needs at least 2 samples".into()));
            }
            let mut rng = stream_rng(mc.seed, &[1]);
            let mut args = vec![0.0; r];
            let mut sum = CompensatedSum::new();
            let mut sum_sq = CompensatedSum::new();
            for _ in 0..mc.samples {
                for a in args.iter_mut() {
                    *a = sample_marginal(process, &mut rng);
                }
                let v = kernel.eval(&idx, &args);
                sum.add(v);
                sum_sq.add(v * v);
            }
            let n = mc.samples as f64;
            let theta = sum.value() / n;
            let var = (sum_sq.value() / n - theta * theta).max(0.0) * n / (n - 1.0);
            let mut draw_rng = stream_rng(mc.seed, &[2]);
            let draws = (0..F1_DRAWS.min(mc.samples))
                .map(|_| (1..r).map(|_| sample_marginal(process, &mut draw_rng)).collect())
                .collect();
            Ok(ProjectionResult {
                theta,
                theta_se: (var / n).sqrt(),
                table: ProjectionTable::Sampled { draws },
                method: ExpectationMethod::MonteCarlo { samples: mc.samples },
            })
        }
    }
}

/// Long-run variance of `f_1` along the sequence, truncated at a lag cutoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sigma2Estimate {
    /// `(E f_1²(X_1) − θ²) + 2 Σ_{t=1}^{T0} (E f_1(X_1) f_1(X_{t+1}) − θ²)`
    pub sigma2: f64,
    /// Monte Carlo standard error (zero when every term is exact).
    pub std_error: f64,
    pub variance_term: f64,
    pub lag_terms: Vec<f64>,
    pub lag_cutoff: usize,
    /// `4 F² Σ_{t > T0} β(t)`: each omitted lag covariance is at most
    /// `2 F² β(t)` and enters `σ²` twice.
    pub tail_bound: f64,
    /// Whether `tail_bound` is within the requested tolerance.
    pub tail_within_tolerance: bool,
    pub method: ExpectationMethod,
}

/// Default tolerance for the truncated tail, relative to `F²`.
pub const SIGMA2_TAIL_TOLERANCE: f64 = 1e-6;

/// Smallest cutoff whose tail bound is below `SIGMA2_TAIL_TOLERANCE · F²`,
/// capped at 10 000 lags.
pub fn default_lag_cutoff(process: &Process) -> usize {
    if process.is_iid() {
        return 1;
    }
    let target = 0.25 * SIGMA2_TAIL_TOLERANCE;
    let mut t0 = 1;
    while t0 < 10_000 && process.beta_tail_sum(t0) > target {
        t0 = (t0 * 2).min(10_000);
    }
    // Narrow down between t0/2 and t0.
    let (mut lo, mut hi) = (t0 / 2, t0);
    while lo + 1 < hi {
        let mid = (lo + hi) / 2;
        if process.beta_tail_sum(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi.max(1)
}

/// Long-run variance `σ²` of `f_1` along the sequence for a bounded kernel.
///
/// Lag covariances are exact for discrete processes (via two-point laws) and
/// estimated with an unbiased Monte Carlo scheme otherwise. Terms at lags
/// where the process is independent are exactly zero.
pub fn yoshihara_sigma2(
    process: &Process,
    kernel: &dyn Kernel,
    projection: &ProjectionResult,
    lag_cutoff: usize,
    mc: MonteCarloOptions,
) -> Result<Sigma2Estimate> {
    require_classical(kernel)?;
    if lag_cutoff == 0 {
        return Err(Error::InvalidArgument("lag cutoff must be at least 1".into()));
    }
    let f = kernel.bound();
    let tail_bound = 4.0 * f * f * process.beta_tail_sum(lag_cutoff);
    let tolerance = SIGMA2_TAIL_TOLERANCE * f * f;
    let tail_within_tolerance = tail_bound <= tolerance;
    if !tail_within_tolerance {
        log::warn!("σ² truncated at lag {lag_cutoff}: tail bound {tail_bound:e} exceeds tolerance {tolerance:e}");
    }
    // Lags at which X_1 and X_{t+1} are independent contribute nothing.
    let dependent_lags =
        (1..=lag_cutoff).take_while(|&t| process.beta(t).map(|b| b.value > 0.0).unwrap_or(true)).count();

    match &projection.table {
        ProjectionTable::Tabulated { values, probs, f1 } => {
            let theta = projection.theta;
            let second: f64 = probs.iter().zip(f1).map(|(p, v)| p * v * v).collect::<CompensatedSum>().value();
            let variance_term = second - theta * theta;
            let lookup = |x: f64| -> f64 {
                values.iter().position(|&v| v == x).map(|i| f1[i]).unwrap_or_else(|| projection.f1(kernel, x))
            };
            let mut lag_terms = vec![0.0; lag_cutoff];
            for (t, law) in process.two_point_laws(dependent_lags)?.into_iter().enumerate() {
                let cross = law.iter().map(|&(x, y, p)| p * lookup(x) * lookup(y)).collect::<CompensatedSum>().value();
                lag_terms[t] = cross - theta * theta;
            }
            let sigma2 = variance_term + 2.0 * lag_terms.iter().copied().collect::<CompensatedSum>().value();
            Ok(Sigma2Estimate {
                sigma2,
                std_error: 0.0,
                variance_term,
                lag_terms,
                lag_cutoff,
                tail_bound,
                tail_within_tolerance,
                method: ExpectationMethod::Exact,
            })
        }
        ProjectionTable::Quadrature { weights, f1, .. } => {
            // Uniform marginals arise only for i.i.d. sequences here, so
            // every lag term vanishes.
            debug_assert_eq!(dependent_lags, 0);
            let theta = projection.theta;
            let second = weights.iter().zip(f1).map(|(w, v)| w * v * v).collect::<CompensatedSum>().value();
            let variance_term = second - theta * theta;
            Ok(Sigma2Estimate {
                sigma2: variance_term,
                std_error: 0.0,
                variance_term,
                lag_terms: vec![0.0; lag_cutoff],
                lag_cutoff,
                tail_bound,
                tail_within_tolerance,
                method: projection.method,
            })
        }
        ProjectionTable::Sampled { .. } => {
            let r = kernel.order();
            let idx = identity_indices(r);
            let samples = mc.samples;
            if samples < 2 {
                return Err(Error::InvalidArgument("Monte Carlo needs at least 2 samples".into()));
            }
            // For lag t (t = 0 is the variance term) each draw contributes
            //   d = f(X_1, Y)·f(X_{1+t}, Y') − f(X_1, Y)·f(X'', Y'')
            // with Y, Y', Y'' independent (r−1)-tuples and X'' an independent
            // copy of X_1, so E d = E f_1(X_1) f_1(X_{1+t}) − θ².
            let estimate = |t: usize, stream: u64| -> (f64, f64) {
                let mut rng = stream_rng(mc.seed, &[3, stream]);
                let mut path = vec![0.0; t + 1];
                let mut a = vec![0.0; r];
                let mut b = vec![0.0; r];
                let mut c = vec![0.0; r];
                let mut sum = CompensatedSum::new();
                let mut sum_sq = CompensatedSum::new();
                for _ in 0..samples {
                    process.fill_path(&mut rng, &mut path);
                    a[0] = path[0];
                    b[0] = path[t];
                    c[0] = sample_marginal(process, &mut rng);
                    for k in 1..r {
                        a[k] = sample_marginal(process, &mut rng);
                        b[k] = sample_marginal(process, &mut rng);
                        c[k] = sample_marginal(process, &mut rng);
                    }
                    let fa = kernel.eval(&idx, &a);
                    let d = fa * (kernel.eval(&idx, &b) - kernel.eval(&idx, &c));
                    sum.add(d);
                    sum_sq.add(d * d);
                }
                let n = samples as f64;
                let mean = sum.value() / n;
                let var = (sum_sq.value() / n - mean * mean).max(0.0) * n / (n - 1.0);
                (mean, var / n)
            };
            let (variance_term, mut se2) = estimate(0, 0);
            let mut lag_terms = vec![0.0; lag_cutoff];
            for t in 1..=dependent_lags {
                let (m, v) = estimate(t, t as u64);
                lag_terms[t - 1] = m;
                se2 += 4.0 * v;
            }
            let sigma2 = variance_term + 2.0 * lag_terms.iter().copied().collect::<CompensatedSum>().value();
            Ok(Sigma2Estimate {
                sigma2,
                std_error: se2.sqrt(),
                variance_term,
                lag_terms,
                lag_cutoff,
                tail_bound,
                tail_within_tolerance,
                method: ExpectationMethod::MonteCarlo { samples },
            })
        }
    }
}
