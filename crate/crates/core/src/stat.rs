//! U- and V-statistics, classical normalization, standardization and the
//! exact-enumeration moment oracle.

use crate::combin::{binomial, binomial_exact, first_combination, next_combination, next_tuple, term_count};
use crate::kernel::{Kernel, KernelSpec};
use crate::process::Process;
use crate::sum::CompensatedSum;
use crate::{Error, Mode, Result};
use serde::{Deserialize, Serialize};

/// Which statistic to evaluate and at what sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatisticConfig {
    pub mode: Mode,
    pub n: usize,
    pub kernel: KernelSpec,
}

/// How a [`MomentPair`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MomentMethod {
    ExactEnumeration,
    MonteCarlo { replicates: usize, mean_se: f64, variance_se: f64 },
}

/// Mean and variance of a statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentPair {
    pub mean: f64,
    pub variance: f64,
    pub method: MomentMethod,
}

fn check_len(path: &[f64], r: usize) -> Result<()> {
    if path.len() < r || path.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "path of length {} is shorter than the kernel order {r}",
            path.len()
        )));
    }
    Ok(())
}

/// Partial U-sum over the increasing tuples whose leading index is `j1`.
fn u_chunk(path: &[f64], kernel: &dyn Kernel, j1: usize) -> CompensatedSum {
    let n = path.len();
    let r = kernel.order();
    let mut acc = CompensatedSum::new();
    match r {
        1 => acc.add(kernel.eval(&[j1], &path[j1 - 1..j1])),
        2 => {
            let mut idx = [j1, 0];
            let mut vals = [path[j1 - 1], 0.0];
            for j2 in j1 + 1..=n {
                idx[1] = j2;
                vals[1] = path[j2 - 1];
                acc.add(kernel.eval(&idx, &vals));
            }
        }
        _ => {
            let Some(mut tail) = first_combination(n - j1, r - 1) else {
                return acc;
            };
            let mut idx = vec![j1; r];
            let mut vals = vec![path[j1 - 1]; r];
            loop {
                for k in 0..r - 1 {
                    idx[k + 1] = tail[k] + j1;
                    vals[k + 1] = path[idx[k + 1] - 1];
                }
                acc.add(kernel.eval(&idx, &vals));
                if !next_combination(&mut tail, n - j1) {
                    break;
                }
            }
        }
    }
    acc
}

/// Partial V-sum over the ordered tuples whose leading index is `j1`.
fn v_chunk(path: &[f64], kernel: &dyn Kernel, j1: usize) -> CompensatedSum {
    let n = path.len();
    let r = kernel.order();
    let mut acc = CompensatedSum::new();
    match r {
        1 => acc.add(kernel.eval(&[j1], &path[j1 - 1..j1])),
        2 => {
            let mut idx = [j1, 0];
            let mut vals = [path[j1 - 1], 0.0];
            for j2 in 1..=n {
                idx[1] = j2;
                vals[1] = path[j2 - 1];
                acc.add(kernel.eval(&idx, &vals));
            }
        }
        _ => {
            let mut tail = vec![1usize; r - 1];
            let mut idx = vec![j1; r];
            let mut vals = vec![path[j1 - 1]; r];
            loop {
                for k in 0..r - 1 {
                    idx[k + 1] = tail[k];
                    vals[k + 1] = path[tail[k] - 1];
                }
                acc.add(kernel.eval(&idx, &vals));
                if !next_tuple(&mut tail, n) {
                    break;
                }
            }
        }
    }
    acc
}

fn leading_indices(n: usize, r: usize, mode: Mode) -> std::ops::RangeInclusive<usize> {
    match mode {
        Mode::U => 1..=n + 1 - r,
        Mode::V => 1..=n,
    }
}

fn evaluate(path: &[f64], kernel: &dyn Kernel, mode: Mode) -> Result<f64> {
    let r = kernel.order();
    match mode {
        Mode::U => check_len(path, r)?,
        Mode::V => check_len(path, 1)?,
    }
    if let Some(c) = kernel.constant_value() {
        return Ok(c * term_count(path.len(), r, mode));
    }
    let chunk = match mode {
        Mode::U => u_chunk,
        Mode::V => v_chunk,
    };
    let mut total = CompensatedSum::new();
    for j1 in leading_indices(path.len(), r, mode) {
        total.merge(&chunk(path, kernel, j1));
    }
    Ok(total.value())
}

/// `Σ_{1 ≤ j1 < … < jr ≤ n} f(j; x_{j1}, …, x_{jr})`, enumerated in
/// lexicographic order with compensated summation.
pub fn u_statistic(path: &[f64], kernel: &dyn Kernel) -> Result<f64> {
    evaluate(path, kernel, Mode::U)
}

/// `Σ_{j ∈ {1..n}^r} f(j; x_{j1}, …, x_{jr})`, diagonals included.
pub fn v_statistic(path: &[f64], kernel: &dyn Kernel) -> Result<f64> {
    evaluate(path, kernel, Mode::V)
}

/// U or V statistic depending on `mode`.
pub fn statistic(path: &[f64], kernel: &dyn Kernel, mode: Mode) -> Result<f64> {
    evaluate(path, kernel, mode)
}

/// Same value as [`statistic`], with the leading-index chunks evaluated in
/// parallel. Chunk sums are merged in index order, so the result is bitwise
/// identical to the serial one.
#[cfg(feature = "parallel")]
pub fn statistic_par(path: &[f64], kernel: &dyn Kernel, mode: Mode) -> Result<f64> {
    use rayon::prelude::*;
    let r = kernel.order();
    match mode {
        Mode::U => check_len(path, r)?,
        Mode::V => check_len(path, 1)?,
    }
    if let Some(c) = kernel.constant_value() {
        return Ok(c * term_count(path.len(), r, mode));
    }
    let chunk = match mode {
        Mode::U => u_chunk,
        Mode::V => v_chunk,
    };
    let parts: Vec<CompensatedSum> =
        leading_indices(path.len(), r, mode).into_par_iter().map(|j1| chunk(path, kernel, j1)).collect();
    let mut total = CompensatedSum::new();
    for p in &parts {
        total.merge(p);
    }
    Ok(total.value())
}

/// Classical U-statistic `U_n / C(n, r)`.
///
/// `C(n, r)` is exact in integer arithmetic; if it overflows `u128` a
/// floating-point value is used and a warning is logged.
pub fn classical_u(path: &[f64], kernel: &dyn Kernel) -> Result<f64> {
    let u = u_statistic(path, kernel)?;
    let (n, r) = (path.len() as u64, kernel.order() as u64);
    let divisor = match binomial_exact(n, r) {
        Some(c) => c as f64,
        None => {
            log::warn!("C({n}, {r}) overflows exact integers; dividing in floating point");
            binomial(n, r)
        }
    };
    Ok(u / divisor)
}

/// `(value − mean) / √variance`.
pub fn standardize(value: f64, moments: &MomentPair) -> Result<f64> {
    if !(moments.variance > 0.0 && moments.variance.is_finite()) {
        return Err(Error::Degenerate(format!(
            "variance {} is not positive; the statistic cannot be standardized",
            moments.variance
        )));
    }
    Ok((value - moments.mean) / moments.variance.sqrt())
}

/// Variance below which a statistic with `T` terms bounded by `F` is treated
/// as degenerate: `1e−12 · (F·T)²`.
pub fn degenerate_variance_threshold(bound: f64, n: usize, r: usize, mode: Mode) -> f64 {
    let scale = bound * term_count(n, r, mode);
    1e-12 * scale * scale
}

/// Exact `E` and `D` of the statistic by enumerating every path of length `n`
/// weighted by its probability.
pub fn exact_moments(process: &Process, kernel: &dyn Kernel, mode: Mode, n: usize) -> Result<MomentPair> {
    if mode == Mode::U && n < kernel.order() {
        return Err(Error::InvalidArgument(format!("n = {n} is smaller than the kernel order {}", kernel.order())));
    }
    let mut values = Vec::new();
    let mut weights = Vec::new();
    let mut failure = None;
    process.enumerate_paths(n, |path, p| {
        if p == 0.0 || failure.is_some() {
            return;
        }
        match statistic(path, kernel, mode) {
            Ok(v) => {
                values.push(v);
                weights.push(p);
            }
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let total: f64 = weights.iter().copied().collect::<CompensatedSum>().value();
    let mean = values.iter().zip(&weights).map(|(v, w)| v * w).collect::<CompensatedSum>().value() / total;
    let variance =
        values.iter().zip(&weights).map(|(v, w)| w * (v - mean) * (v - mean)).collect::<CompensatedSum>().value()
            / total;
    Ok(MomentPair { mean, variance, method: MomentMethod::ExactEnumeration })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{builtin_kernel, BuiltinKernel, FnKernel};
    use crate::process::ProcessSpec;
    use approx::assert_abs_diff_eq;
    use serde_json::json;

    fn product() -> BuiltinKernel {
        builtin_kernel("product", &json!({"bound": 9.0})).unwrap()
    }

    #[test]
    fn u_statistic_hand_enumeration() {
        assert_eq!(u_statistic(&[1.0, 2.0, 3.0], &product()).unwrap(), 11.0);
        let id = builtin_kernel("identity", &json!({"bound": 1.0})).unwrap();
        assert_eq!(u_statistic(&[0.0; 7], &id).unwrap(), 0.0);
        assert!(u_statistic(&[1.0], &product()).is_err());
    }

    #[test]
    fn u_statistic_match_counts() {
        // Σ_{i<j} 1{x_i = x_j} = C(k0, 2) + C(k1, 2)
        let m = builtin_kernel("match_indicator", &serde_json::Value::Null).unwrap();
        let process = Process::new(ProcessSpec::bernoulli(0.5)).unwrap();
        for seed in 0..20 {
            let path = process.sample_path(8, seed).unwrap();
            let k1 = path.iter().filter(|&&x| x == 1.0).count() as u64;
            let k0 = 8 - k1;
            let expected = (binomial_exact(k0, 2).unwrap() + binomial_exact(k1, 2).unwrap()) as f64;
            assert_eq!(u_statistic(&path, &m).unwrap(), expected);
        }
    }

    #[test]
    fn v_statistic_examples() {
        let p = product();
        assert_eq!(v_statistic(&[1.0, 2.0, 3.0], &p).unwrap(), 36.0);
        let diag: f64 = [1.0f64, 2.0, 3.0].iter().map(|x| x * x).sum();
        assert_eq!(2.0 * u_statistic(&[1.0, 2.0, 3.0], &p).unwrap() + diag, 36.0);
        assert_eq!(v_statistic(&[2.5], &p).unwrap(), 6.25);
        assert!(v_statistic(&[], &p).is_err());
    }

    #[test]
    fn order_three_matches_brute_force() {
        let k = FnKernel::new(3, 10.0, false, true, |j: &[usize], x: &[f64]| {
            (j[0] as f64) * x[0] - x[1] * x[2] + (j[2] % 3) as f64
        })
        .unwrap();
        let path: Vec<f64> = (0..9).map(|i| ((i * 7) % 5) as f64 / 5.0).collect();
        let mut u = 0.0;
        let mut v = 0.0;
        for a in 1..=9 {
            for b in 1..=9 {
                for c in 1..=9 {
                    let val = k.eval(&[a, b, c], &[path[a - 1], path[b - 1], path[c - 1]]);
                    v += val;
                    if a < b && b < c {
                        u += val;
                    }
                }
            }
        }
        assert_abs_diff_eq!(u_statistic(&path, &k).unwrap(), u, epsilon = 1e-10);
        assert_abs_diff_eq!(v_statistic(&path, &k).unwrap(), v, epsilon = 1e-10);
    }

    #[test]
    fn classical_u_examples() {
        assert_abs_diff_eq!(classical_u(&[1.0, 2.0, 3.0], &product()).unwrap(), 11.0 / 3.0, epsilon = 1e-15);
        let c = builtin_kernel("constant", &json!({"order": 2, "value": 1.75})).unwrap();
        assert_eq!(classical_u(&[0.3; 10], &c).unwrap(), 1.75);
        let c5 = builtin_kernel("constant", &json!({"order": 5, "value": 1.0})).unwrap();
        let path = vec![0.0; 52];
        assert_eq!(u_statistic(&path, &c5).unwrap(), 2_598_960.0);
        assert_eq!(classical_u(&path, &c5).unwrap(), 1.0);
    }

    #[test]
    fn standardize_examples() {
        let m = MomentPair { mean: 0.75, variance: 0.9375, method: MomentMethod::ExactEnumeration };
        assert_eq!(standardize(0.75, &m).unwrap(), 0.0);
        assert_abs_diff_eq!(standardize(0.75 + 0.9375f64.sqrt(), &m).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(standardize(1.0, &m).unwrap(), 0.2582, epsilon = 1e-4);
        let zero = MomentPair { variance: 0.0, ..m };
        assert!(matches!(standardize(1.0, &zero), Err(Error::Degenerate(_))));
    }

    #[test]
    fn exact_moments_bernoulli_product() {
        // U = C(k, 2) for k ones among 3 fair bits.
        let process = Process::new(ProcessSpec::bernoulli(0.5)).unwrap();
        let k = builtin_kernel("product", &json!({"bound": 1.0})).unwrap();
        let m = exact_moments(&process, &k, Mode::U, 3).unwrap();
        let (mut e, mut e2) = (0.0, 0.0);
        for (ones, count) in [(0u64, 1.0), (1, 3.0), (2, 3.0), (3, 1.0)] {
            let u = binomial_exact(ones, 2).unwrap() as f64;
            e += count / 8.0 * u;
            e2 += count / 8.0 * u * u;
        }
        assert_abs_diff_eq!(m.mean, e, epsilon = 1e-15);
        assert_abs_diff_eq!(m.variance, e2 - e * e, epsilon = 1e-15);
        assert_abs_diff_eq!(m.mean, 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(m.variance, 0.9375, epsilon = 1e-15);
    }

    #[test]
    fn exact_moments_constant_kernel() {
        let process = Process::new(ProcessSpec::two_state(0.2, 0.6)).unwrap();
        let c = builtin_kernel("constant", &json!({"order": 2, "value": 0.5})).unwrap();
        let m = exact_moments(&process, &c, Mode::U, 6).unwrap();
        assert_abs_diff_eq!(m.mean, 0.5 * 15.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.variance, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn exact_moments_budget() {
        let process = Process::new(ProcessSpec::bernoulli(0.5)).unwrap();
        let m = builtin_kernel("match_indicator", &serde_json::Value::Null).unwrap();
        assert!(matches!(exact_moments(&process, &m, Mode::U, 23), Err(Error::BudgetExceeded { .. })));
        assert!(exact_moments(&process, &m, Mode::U, 1).is_err());
    }

    #[test]
    fn degenerate_threshold_scales_with_terms() {
        assert_abs_diff_eq!(degenerate_variance_threshold(1.0, 10, 2, Mode::U), 1e-12 * 45.0 * 45.0, epsilon = 1e-20);
        assert_abs_diff_eq!(degenerate_variance_threshold(2.0, 10, 2, Mode::V), 1e-12 * 200.0 * 200.0, epsilon = 1e-18);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_matches_serial_bitwise() {
        let gini = builtin_kernel("clipped_gini", &json!({"clip": 1.0})).unwrap();
        let path = Process::new(ProcessSpec::IidUniform01 {}).unwrap().sample_path(300, 5).unwrap();
        for mode in [Mode::U, Mode::V] {
            let a = statistic(&path, &gini, mode).unwrap();
            let b = statistic_par(&path, &gini, mode).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
