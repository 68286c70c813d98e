//! The characterizing graph `Γ_{n,m}` on kernel terms.
//!
//! Vertices are index tuples `α = (j1, …, jr)`: increasing tuples for
//! U-statistics and all of `{1..n}^r` for V-statistics. Two vertices are
//! adjacent when they coincide or when some pair of coordinates lies within
//! distance `m`. The graph is never materialized; adjacency is a predicate and
//! neighbourhoods are enumerated only for small instances.

use crate::combin::{binomial, first_combination, next_combination, next_tuple, term_count};
use crate::kernel::Kernel;
use crate::process::Process;
use crate::sum::CompensatedSum;
use crate::{Error, Mode, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Largest vertex count for which neighbourhoods are enumerated exactly.
pub const NEIGHBORHOOD_BUDGET: f64 = 1e7;

pub type Vertex = Vec<usize>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub n: usize,
    pub r: usize,
    pub m: usize,
    pub mode: Mode,
}

impl GraphSpec {
    pub fn new(n: usize, r: usize, m: usize, mode: Mode) -> Result<Self> {
        let spec = Self { n, r, m, mode };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.r == 0 {
            return Err(Error::InvalidArgument("graph needs n ≥ 1 and r ≥ 1".into()));
        }
        if self.mode == Mode::U && self.n < self.r {
            return Err(Error::InvalidArgument(format!("U-mode graph needs n ≥ r (n = {}, r = {})", self.n, self.r)));
        }
        Ok(())
    }

    /// `C(n, r)` in U-mode, `n^r` in V-mode.
    pub fn vertex_count(&self) -> f64 {
        term_count(self.n, self.r, self.mode)
    }

    /// `C(n, s)` or `n^s`, the count that replaces the binomial in V-mode.
    fn count(&self, s: usize) -> f64 {
        match self.mode {
            Mode::U => binomial(self.n as u64, s as u64),
            Mode::V => (self.n as f64).powi(s as i32),
        }
    }

    pub fn check_vertex(&self, v: &[usize]) -> Result<()> {
        let bad = |why: &str| Err(Error::InvalidArgument(format!("vertex {v:?} {why}")));
        if v.len() != self.r {
            return bad(&format!("does not have {} coordinates", self.r));
        }
        if v.iter().any(|&j| j == 0 || j > self.n) {
            return bad(&format!("has a coordinate outside 1..={}", self.n));
        }
        if self.mode == Mode::U && v.windows(2).any(|w| w[0] >= w[1]) {
            return bad("is not strictly increasing");
        }
        Ok(())
    }

    /// Visit every vertex in lexicographic order.
    pub fn for_each_vertex<F: FnMut(&[usize])>(&self, mut visit: F) {
        match self.mode {
            Mode::U => {
                if let Some(mut t) = first_combination(self.n, self.r) {
                    loop {
                        visit(&t);
                        if !next_combination(&mut t, self.n) {
                            break;
                        }
                    }
                }
            }
            Mode::V => {
                let mut t = vec![1; self.r];
                loop {
                    visit(&t);
                    if !next_tuple(&mut t, self.n) {
                        break;
                    }
                }
            }
        }
    }

    fn check_enumerable(&self) -> Result<()> {
        let needed = self.vertex_count();
        if needed > NEIGHBORHOOD_BUDGET {
            return Err(Error::BudgetExceeded {
                needed,
                budget: NEIGHBORHOOD_BUDGET,
                hint: "use neighborhood_bound for graphs of this size",
            });
        }
        Ok(())
    }
}

#[inline]
fn close(a: &[usize], b: &[usize], m: usize) -> bool {
    a == b || a.iter().any(|&j| b.iter().any(|&k| j.abs_diff(k) <= m))
}

/// Edge (or loop) between `a` and `b` in `Γ_{n,m}`.
pub fn adjacent(a: &[usize], b: &[usize], spec: &GraphSpec) -> Result<bool> {
    spec.check_vertex(a)?;
    spec.check_vertex(b)?;
    Ok(close(a, b, spec.m))
}

/// Exact `|L(α)|`, counting `α` itself.
pub fn neighborhood_count(a: &[usize], spec: &GraphSpec) -> Result<u64> {
    strong_set_count(&[a.to_vec()], spec)
}

/// Exact `|L(V′)|`: vertices adjacent to at least one member of `set`.
pub fn strong_set_count(set: &[Vertex], spec: &GraphSpec) -> Result<u64> {
    spec.validate()?;
    for v in set {
        spec.check_vertex(v)?;
    }
    spec.check_enumerable()?;
    let mut count = 0;
    spec.for_each_vertex(|t| {
        if set.iter().any(|v| close(v, t, spec.m)) {
            count += 1;
        }
    });
    Ok(count)
}

/// `r²(2m+1)·C(n, r−1)`, or with `n^{r−1}` in V-mode.
pub fn neighborhood_bound(spec: &GraphSpec) -> f64 {
    strong_set_bound(1, spec)
}

/// `r²·|V′|·(2m+1)·C(n, r−1)`, or with `n^{r−1}` in V-mode.
pub fn strong_set_bound(set_size: usize, spec: &GraphSpec) -> f64 {
    let r = spec.r as f64;
    r * r * set_size as f64 * (2 * spec.m + 1) as f64 * spec.count(spec.r - 1)
}

/// `r²·R·F·(2m+1)·C(n, r−1)`, an upper bound on `Q_{R,n,m}`.
pub fn q_bound(big_r: usize, bound: f64, spec: &GraphSpec) -> f64 {
    strong_set_bound(big_r, spec) * bound
}

/// `F·C(n, r)` (or `F·n^r`), an upper bound on `M_n = Σ_α E|w(α)|`.
pub fn m_bound(bound: f64, spec: &GraphSpec) -> f64 {
    bound * spec.count(spec.r)
}

/// `γ_R = 8·R·β(m)`; `out_of_range` marks values outside `(0, 1)` from above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gamma {
    pub value: f64,
    pub out_of_range: bool,
}

pub fn gamma(big_r: usize, beta_m: f64) -> Result<Gamma> {
    if big_r == 0 {
        return Err(Error::InvalidArgument("R must be positive".into()));
    }
    if !(0.0..=1.0).contains(&beta_m) {
        return Err(Error::InvalidArgument(format!("β(m) = {beta_m} is not in [0, 1]")));
    }
    let value = 8.0 * big_r as f64 * beta_m;
    Ok(Gamma { value, out_of_range: value >= 1.0 })
}

/// All closed-form quantities of the graph for given `R`, `F` and `β(m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphBounds {
    pub neighborhood_bound: f64,
    pub strong_set_bound: f64,
    pub q_bound: f64,
    pub m_bound: f64,
    pub gamma: Gamma,
}

impl GraphBounds {
    /// `strong_set_bound` is evaluated at `|V′| = R`.
    pub fn compute(spec: &GraphSpec, big_r: usize, bound: f64, beta_m: f64) -> Result<Self> {
        spec.validate()?;
        if !(bound >= 0.0 && bound.is_finite()) {
            return Err(Error::InvalidArgument(format!("F = {bound} must be finite and nonnegative")));
        }
        Ok(Self {
            neighborhood_bound: neighborhood_bound(spec),
            strong_set_bound: strong_set_bound(big_r, spec),
            q_bound: q_bound(big_r, bound, spec),
            m_bound: m_bound(bound, spec),
            gamma: gamma(big_r, beta_m)?,
        })
    }
}

/// `β(m)`, with the trivial value 1 at lag 0.
pub fn beta_at(process: &Process, m: usize) -> Result<f64> {
    if m == 0 {
        Ok(1.0)
    } else {
        Ok(process.beta(m)?.value)
    }
}

/// One row of a neighbourhood audit: the largest exact count over all
/// vertices against the closed-form bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub n: usize,
    pub r: usize,
    pub m: usize,
    pub mode: Mode,
    pub vertices: u64,
    pub max_count: u64,
    pub bound: f64,
    pub ratio: f64,
}

pub fn audit_neighborhoods(spec: &GraphSpec) -> Result<AuditRow> {
    spec.validate()?;
    spec.check_enumerable()?;
    let mut all = Vec::new();
    spec.for_each_vertex(|v| all.push(v.to_vec()));
    // Counting is quadratic in the vertex count.
    let pairs = (all.len() as f64).powi(2);
    if pairs > NEIGHBORHOOD_BUDGET * 100.0 {
        return Err(Error::BudgetExceeded {
            needed: pairs,
            budget: NEIGHBORHOOD_BUDGET * 100.0,
            hint: "audit a smaller graph",
        });
    }
    let max_count = all.iter().map(|a| all.iter().filter(|b| close(a, b, spec.m)).count() as u64).max().unwrap_or(0);
    let bound = neighborhood_bound(spec);
    Ok(AuditRow {
        n: spec.n,
        r: spec.r,
        m: spec.m,
        mode: spec.mode,
        vertices: all.len() as u64,
        max_count,
        bound,
        ratio: max_count as f64 / bound,
    })
}

fn term(kernel: &dyn Kernel, alpha: &[usize], path: &[f64], scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend(alpha.iter().map(|&j| path[j - 1]));
    kernel.eval(alpha, scratch)
}

fn check_kernel(kernel: &dyn Kernel, spec: &GraphSpec) -> Result<()> {
    if kernel.order() != spec.r {
        return Err(Error::InvalidArgument(format!(
            "kernel order {} does not match graph order {}",
            kernel.order(),
            spec.r
        )));
    }
    Ok(())
}

fn max_index(sets: &[&[Vertex]]) -> usize {
    sets.iter().flat_map(|s| s.iter().flatten()).copied().max().unwrap_or(1)
}

/// Result of an exact factorization audit for a vertex partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorizationGap {
    pub gap: f64,
    pub bound: f64,
    /// No edge joins `V1` and `V2`; the bound applies only when this holds.
    pub separated: bool,
}

/// `|E∏_{V1∪V2} w − E∏_{V1} w · E∏_{V2} w|` by exact path enumeration,
/// with the bound `8·|V′|·F^{|V′|}·β(m)`.
pub fn factorization_gap(
    process: &Process,
    kernel: &dyn Kernel,
    v1: &[Vertex],
    v2: &[Vertex],
    spec: &GraphSpec,
) -> Result<FactorizationGap> {
    spec.validate()?;
    check_kernel(kernel, spec)?;
    if v1.is_empty() || v2.is_empty() {
        return Err(Error::InvalidArgument("both vertex sets must be nonempty".into()));
    }
    for v in v1.iter().chain(v2) {
        spec.check_vertex(v)?;
    }
    if v1.iter().any(|a| v2.contains(a)) {
        return Err(Error::Precondition("vertex sets must be disjoint".into()));
    }
    let separated = !v1.iter().any(|a| v2.iter().any(|b| close(a, b, spec.m)));
    let len = max_index(&[v1, v2]);
    let (mut e1, mut e2, mut e12) = (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
    let mut scratch = Vec::with_capacity(spec.r);
    process.enumerate_paths(len, |path, p| {
        let a: f64 = v1.iter().map(|v| term(kernel, v, path, &mut scratch)).product();
        let b: f64 = v2.iter().map(|v| term(kernel, v, path, &mut scratch)).product();
        e1.add(p * a);
        e2.add(p * b);
        e12.add(p * a * b);
    })?;
    let size = (v1.len() + v2.len()) as f64;
    let f = kernel.bound();
    Ok(FactorizationGap {
        gap: (e12.value() - e1.value() * e2.value()).abs(),
        bound: 8.0 * size * f.powf(size) * beta_at(process, spec.m)?,
        separated,
    })
}

/// A bounded function of the sequence at fixed positions.
pub struct Observable<'a> {
    /// 1-based positions, passed to `f` in this order.
    pub indices: Vec<usize>,
    pub bound: f64,
    pub f: &'a dyn Fn(&[f64]) -> f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceGap {
    pub gap: f64,
    pub bound: f64,
}

/// `|E g1·g2 − E g1·E g2|` by exact enumeration, with the bound
/// `8(|I|+|I′|)·F′·F″·β(gap_m)`. Requires every position of `g1` to be more
/// than `gap_m` away from every position of `g2`.
pub fn covariance_gap(process: &Process, g1: &Observable, g2: &Observable, gap_m: usize) -> Result<CovarianceGap> {
    for g in [g1, g2] {
        if g.indices.is_empty() || g.indices.contains(&0) {
            return Err(Error::InvalidArgument("positions must be nonempty and 1-based".into()));
        }
        if !(g.bound >= 0.0 && g.bound.is_finite()) {
            return Err(Error::InvalidArgument(format!("bound {} must be finite and nonnegative", g.bound)));
        }
    }
    let closest =
        g1.indices.iter().flat_map(|&i| g2.indices.iter().map(move |&k| i.abs_diff(k))).min().unwrap_or(usize::MAX);
    if closest <= gap_m {
        return Err(Error::Precondition(format!("positions are {closest} apart, which is not more than {gap_m}")));
    }
    let len = g1.indices.iter().chain(&g2.indices).copied().max().unwrap_or(1);
    let (mut e1, mut e2, mut e12) = (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
    let mut worst = 0.0_f64;
    let (mut x1, mut x2) = (Vec::new(), Vec::new());
    process.enumerate_paths(len, |path, p| {
        x1.clear();
        x1.extend(g1.indices.iter().map(|&i| path[i - 1]));
        x2.clear();
        x2.extend(g2.indices.iter().map(|&i| path[i - 1]));
        let (a, b) = ((g1.f)(&x1), (g2.f)(&x2));
        if p > 0.0 {
            worst = worst.max((a.abs() - g1.bound).max(b.abs() - g2.bound));
        }
        e1.add(p * a);
        e2.add(p * b);
        e12.add(p * a * b);
    })?;
    if worst > 0.0 {
        return Err(Error::Precondition(format!("a function exceeds its bound by {worst}")));
    }
    let size = (g1.indices.len() + g2.indices.len()) as f64;
    Ok(CovarianceGap {
        gap: (e12.value() - e1.value() * e2.value()).abs(),
        bound: 8.0 * size * g1.bound * g2.bound * beta_at(process, gap_m)?,
    })
}

/// Exact `M_n = Σ_α E|w(α)|` by path enumeration.
pub fn exact_m(process: &Process, kernel: &dyn Kernel, spec: &GraphSpec) -> Result<f64> {
    spec.validate()?;
    check_kernel(kernel, spec)?;
    spec.check_enumerable()?;
    let mut vertices = Vec::new();
    spec.for_each_vertex(|v| vertices.push(v.to_vec()));
    let mut total = CompensatedSum::new();
    let mut scratch = Vec::with_capacity(spec.r);
    process.enumerate_paths(spec.n, |path, p| {
        for v in &vertices {
            total.add(p * term(kernel, v, path, &mut scratch).abs());
        }
    })?;
    Ok(total.value())
}

/// Largest value of `Σ_{α̃ ∈ L(V′)} E(|w(α̃)| | w(α), α ∈ V′)` over the
/// atoms of positive probability, for one set `V′`.
pub fn conditional_strong_sum(process: &Process, kernel: &dyn Kernel, set: &[Vertex], spec: &GraphSpec) -> Result<f64> {
    spec.validate()?;
    check_kernel(kernel, spec)?;
    for v in set {
        spec.check_vertex(v)?;
    }
    spec.check_enumerable()?;
    let mut strong = Vec::new();
    spec.for_each_vertex(|t| {
        if set.iter().any(|v| close(v, t, spec.m)) {
            strong.push(t.to_vec());
        }
    });
    let mut atoms: HashMap<Vec<u64>, (f64, f64)> = HashMap::new();
    let mut scratch = Vec::with_capacity(spec.r);
    process.enumerate_paths(spec.n, |path, p| {
        if p <= 0.0 {
            return;
        }
        let key: Vec<u64> = set.iter().map(|v| term(kernel, v, path, &mut scratch).to_bits()).collect();
        let s: f64 = strong.iter().map(|v| term(kernel, v, path, &mut scratch).abs()).sum();
        let slot = atoms.entry(key).or_insert((0.0, 0.0));
        slot.0 += p;
        slot.1 += p * s;
    })?;
    Ok(atoms.values().map(|&(p, s)| s / p).fold(0.0, f64::max))
}

/// `Q_{R,n,m}` by exhaustive search over all sets of at most `R` vertices.
pub fn empirical_q(process: &Process, kernel: &dyn Kernel, big_r: usize, spec: &GraphSpec) -> Result<f64> {
    let mut vertices = Vec::new();
    spec.validate()?;
    spec.check_enumerable()?;
    spec.for_each_vertex(|v| vertices.push(v.to_vec()));
    let mut best = 0.0_f64;
    for size in 1..=big_r.min(vertices.len()) {
        let Some(mut pick) = first_combination(vertices.len(), size) else { break };
        loop {
            let set: Vec<Vertex> = pick.iter().map(|&i| vertices[i - 1].clone()).collect();
            best = best.max(conditional_strong_sum(process, kernel, &set, spec)?);
            if !next_combination(&mut pick, vertices.len()) {
                break;
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{BuiltinKernel, KernelSpec};
    use crate::process::ProcessSpec;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn g(n: usize, r: usize, m: usize, mode: Mode) -> GraphSpec {
        GraphSpec::new(n, r, m, mode).unwrap()
    }

    fn chain(p: f64, q: f64) -> Process {
        Process::new(ProcessSpec::two_state(p, q)).unwrap()
    }

    fn matcher() -> BuiltinKernel {
        BuiltinKernel::new(KernelSpec::MatchIndicator).unwrap()
    }

    #[test]
    fn adjacency_examples() {
        let s = g(12, 2, 1, Mode::U);
        assert!(adjacent(&[1, 5], &[6, 9], &s).unwrap());
        assert!(!adjacent(&[1, 2], &[10, 12], &s).unwrap());
        assert!(adjacent(&[3, 7], &[3, 7], &g(12, 2, 0, Mode::U)).unwrap());
        assert!(adjacent(&[2, 1], &[3, 4], &s).is_err());
        assert!(adjacent(&[1, 13], &[3, 4], &s).is_err());
        assert!(adjacent(&[2, 2], &[3, 4], &g(12, 2, 1, Mode::V)).unwrap());
    }

    #[test]
    fn spec_validation() {
        assert!(GraphSpec::new(2, 3, 1, Mode::U).is_err());
        assert!(GraphSpec::new(2, 3, 1, Mode::V).is_ok());
        assert!(GraphSpec::new(0, 1, 1, Mode::V).is_err());
        assert_eq!(g(10, 2, 1, Mode::U).vertex_count(), 45.0);
        assert_eq!(g(10, 2, 1, Mode::V).vertex_count(), 100.0);
    }

    #[test]
    fn neighborhood_examples() {
        assert_eq!(neighborhood_count(&[3], &g(5, 1, 0, Mode::U)).unwrap(), 1);
        assert_eq!(neighborhood_count(&[3], &g(5, 1, 1, Mode::U)).unwrap(), 3);
        let s = g(10, 2, 1, Mode::U);
        let c = neighborhood_count(&[1, 5], &s).unwrap();
        assert!(c as f64 <= 120.0);
        // Brute force: pairs with a coordinate in {1,2,4,5,6}.
        let near = |j: usize| [1, 2, 4, 5, 6].contains(&j);
        let brute =
            (1..=10).flat_map(|a| (a + 1..=10).map(move |b| (a, b))).filter(|&(a, b)| near(a) || near(b)).count();
        assert_eq!(c as usize, brute);
    }

    #[test]
    fn closed_form_bounds() {
        assert_eq!(neighborhood_bound(&g(10, 2, 1, Mode::U)), 120.0);
        assert_eq!(neighborhood_bound(&g(10, 2, 1, Mode::V)), 120.0);
        assert_eq!(neighborhood_bound(&g(7, 1, 0, Mode::U)), 1.0);
        assert_eq!(strong_set_bound(3, &g(10, 2, 1, Mode::U)), 360.0);
        assert_eq!(strong_set_bound(1, &g(9, 3, 2, Mode::V)), neighborhood_bound(&g(9, 3, 2, Mode::V)));
        assert_eq!(q_bound(3, 0.5, &g(100, 2, 2, Mode::U)), 3000.0);
        assert_eq!(q_bound(1, 1.0, &g(30, 3, 1, Mode::U)), neighborhood_bound(&g(30, 3, 1, Mode::U)));
        assert_eq!(m_bound(1.0, &g(5, 2, 1, Mode::U)), 10.0);
        assert_eq!(m_bound(0.0, &g(5, 2, 1, Mode::U)), 0.0);
        assert_eq!(m_bound(1.0, &g(5, 2, 1, Mode::V)), 25.0);
    }

    #[test]
    fn gamma_values() {
        assert_eq!(gamma(4, 0.0).unwrap(), Gamma { value: 0.0, out_of_range: false });
        let big = gamma(3, 0.1).unwrap();
        assert_abs_diff_eq!(big.value, 2.4, epsilon = 1e-15);
        assert!(big.out_of_range);
        let beta = chain(0.3, 0.3).beta(5).unwrap().value;
        assert_abs_diff_eq!(beta, 0.5 * 0.4f64.powi(5), epsilon = 1e-15);
        let small = gamma(2, beta).unwrap();
        assert_abs_diff_eq!(small.value, 0.08192, epsilon = 1e-14);
        assert!(!small.out_of_range);
        assert!(gamma(0, 0.1).is_err());
        assert!(gamma(1, 1.5).is_err());
    }

    #[test]
    fn graph_bounds_bundle() {
        let b = GraphBounds::compute(&g(100, 2, 2, Mode::U), 3, 0.5, 0.1).unwrap();
        assert_eq!(b.q_bound, 3000.0);
        assert_eq!(b.strong_set_bound, 6000.0);
        assert_eq!(b.m_bound, 0.5 * 4950.0);
        assert!(b.gamma.out_of_range);
    }

    #[test]
    fn strong_set_count_within_bound() {
        let s = g(12, 2, 2, Mode::U);
        let set = vec![vec![1, 4], vec![6, 11], vec![2, 9]];
        let exact = strong_set_count(&set, &s).unwrap();
        let union = {
            let mut all = Vec::new();
            s.for_each_vertex(|t| all.push(t.to_vec()));
            all.iter().filter(|t| set.iter().any(|v| adjacent(v, t, &s).unwrap())).count() as u64
        };
        assert_eq!(exact, union);
        assert!(exact as f64 <= strong_set_bound(3, &s));
    }

    #[test]
    fn exhaustive_neighborhood_audit() {
        for mode in [Mode::U, Mode::V] {
            for r in 1..=3 {
                for m in 0..=2 {
                    for n in r.max(1)..=12 {
                        let row = audit_neighborhoods(&g(n, r, m, mode)).unwrap();
                        assert!(
                            row.max_count as f64 <= row.bound,
                            "n={n} r={r} m={m} {mode}: {} > {}",
                            row.max_count,
                            row.bound
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn neighborhood_budget() {
        let huge = g(1000, 3, 1, Mode::U);
        assert!(matches!(neighborhood_count(&[1, 2, 3], &huge), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn m_oracle_for_match_indicator() {
        let process = Process::new(ProcessSpec::bernoulli(0.5)).unwrap();
        let m = exact_m(&process, &matcher(), &g(5, 2, 1, Mode::U)).unwrap();
        assert_abs_diff_eq!(m, 5.0, epsilon = 1e-12);
        assert!(m <= m_bound(1.0, &g(5, 2, 1, Mode::U)));
    }

    #[test]
    fn empirical_q_within_bound() {
        for (p, q) in [(0.3, 0.3), (0.2, 0.5)] {
            for m in 0..=1 {
                for big_r in 1..=2 {
                    let s = g(5, 2, m, Mode::U);
                    let emp = empirical_q(&chain(p, q), &matcher(), big_r, &s).unwrap();
                    assert!(emp <= q_bound(big_r, 1.0, &s) + 1e-12, "{emp}");
                    assert!(emp > 0.0);
                }
            }
        }
    }

    #[test]
    fn factorization_iid_is_exact() {
        let process = Process::new(ProcessSpec::bernoulli(0.3)).unwrap();
        let s = g(8, 2, 1, Mode::U);
        let out = factorization_gap(&process, &matcher(), &[vec![1, 2]], &[vec![5, 7]], &s).unwrap();
        assert!(out.separated);
        assert!(out.gap < 1e-15, "{}", out.gap);
        assert!(out.gap <= out.bound + 1e-15);
    }

    #[test]
    fn factorization_chain_example() {
        let s = g(6, 2, 2, Mode::U);
        let process = chain(0.3, 0.3);
        let out = factorization_gap(&process, &matcher(), &[vec![1, 2]], &[vec![5, 6]], &s).unwrap();
        assert!(out.separated);
        assert_abs_diff_eq!(out.bound, 1.28, epsilon = 1e-14);
        // Brute force over the 64 paths.
        let p = [[0.7, 0.3], [0.3, 0.7]];
        let (mut e1, mut e2, mut e12) = (0.0, 0.0, 0.0);
        for code in 0..64u32 {
            let x: Vec<usize> = (0..6).map(|i| ((code >> (5 - i)) & 1) as usize).collect();
            let prob = 0.5 * (1..6).map(|i| p[x[i - 1]][x[i]]).product::<f64>();
            let a = f64::from(x[0] == x[1]);
            let b = f64::from(x[4] == x[5]);
            e1 += prob * a;
            e2 += prob * b;
            e12 += prob * a * b;
        }
        assert_abs_diff_eq!(out.gap, (e12 - e1 * e2).abs(), epsilon = 1e-15);
        assert!(out.gap <= out.bound);
    }

    #[test]
    fn factorization_contracts() {
        let s = g(6, 2, 2, Mode::U);
        let process = chain(0.3, 0.3);
        let out = factorization_gap(&process, &matcher(), &[vec![1, 2]], &[vec![3, 6]], &s).unwrap();
        assert!(!out.separated);
        assert!(matches!(
            factorization_gap(&process, &matcher(), &[vec![1, 2]], &[vec![1, 2]], &s),
            Err(Error::Precondition(_))
        ));
        assert!(factorization_gap(&process, &matcher(), &[], &[vec![1, 2]], &s).is_err());
    }

    fn id() -> impl Fn(&[f64]) -> f64 {
        |x: &[f64]| x[0]
    }

    #[test]
    fn covariance_examples() {
        let f = id();
        let one = |i: usize| Observable { indices: vec![i], bound: 1.0, f: &f };
        let process = chain(0.3, 0.3);
        let out = covariance_gap(&process, &one(1), &one(4), 2).unwrap();
        assert_abs_diff_eq!(out.gap, 0.016, epsilon = 1e-15);
        assert_abs_diff_eq!(out.bound, 1.28, epsilon = 1e-14);

        let iid = Process::new(ProcessSpec::bernoulli(0.4)).unwrap();
        assert!(covariance_gap(&iid, &one(1), &one(4), 2).unwrap().gap < 1e-16);

        let sum = |x: &[f64]| x[0] + x[1] - 1.0;
        let pair = Observable { indices: vec![1, 7], bound: 1.0, f: &sum };
        let out = covariance_gap(&process, &pair, &one(4), 2).unwrap();
        assert!(out.gap <= out.bound);
        assert!(out.gap > 0.0);

        assert!(matches!(covariance_gap(&process, &one(1), &one(3), 2), Err(Error::Precondition(_))));
        let loose = Observable { indices: vec![1], bound: 0.5, f: &f };
        assert!(matches!(covariance_gap(&process, &loose, &one(5), 2), Err(Error::Precondition(_))));
    }

    #[test]
    fn factorization_gap_audit() {
        let kernels = [
            matcher(),
            BuiltinKernel::new(KernelSpec::DegenerateProduct { mu: 0.5, bound: 0.25 }).unwrap(),
            BuiltinKernel::new(KernelSpec::KendallSign).unwrap(),
        ];
        let mut checked = 0;
        for p in [0.2, 0.3, 0.5] {
            for q in [0.2, 0.3, 0.5] {
                let process = chain(p, q);
                for m in 1..=2 {
                    let s = g(8, 2, m, Mode::U);
                    let mut all = Vec::new();
                    s.for_each_vertex(|v| all.push(v.to_vec()));
                    for (i, a) in all.iter().enumerate() {
                        for (k, b) in all.iter().enumerate() {
                            if close(a, b, m) {
                                continue;
                            }
                            let mut sets = vec![(vec![a.clone()], vec![b.clone()])];
                            let third = &all[(i * 7 + k * 3) % all.len()];
                            if third != a && !close(third, b, m) {
                                sets.push((vec![a.clone(), third.clone()], vec![b.clone()]));
                            }
                            for (v1, v2) in sets {
                                let kernel = &kernels[(i + k) % kernels.len()];
                                let out = factorization_gap(&process, kernel, &v1, &v2, &s).unwrap();
                                assert!(out.separated);
                                assert!(out.gap <= out.bound + 1e-15, "{v1:?} {v2:?}: {} > {}", out.gap, out.bound);
                                checked += 1;
                            }
                        }
                    }
                }
            }
        }
        assert!(checked > 1000);
    }

    #[test]
    fn covariance_gap_audit() {
        let sign = |x: &[f64]| if x.iter().sum::<f64>() > 0.5 { 1.0 } else { -1.0 };
        let prod = |x: &[f64]| x.iter().product::<f64>();
        type Func<'a> = &'a dyn Fn(&[f64]) -> f64;
        let funcs: [Func; 2] = [&sign, &prod];
        let sets: Vec<Vec<usize>> =
            vec![vec![1], vec![2], vec![1, 2], vec![1, 3], vec![2, 9], vec![7], vec![8, 9], vec![5, 9]];
        let mut checked = 0;
        for p in [0.2, 0.3, 0.5] {
            for q in [0.2, 0.3, 0.5] {
                let process = chain(p, q);
                for gap_m in 1..=3 {
                    for a in &sets {
                        for b in &sets {
                            if a.len() + b.len() > 4 {
                                continue;
                            }
                            let closest = a.iter().flat_map(|i| b.iter().map(move |k| i.abs_diff(*k))).min().unwrap();
                            if closest <= gap_m {
                                continue;
                            }
                            for (fa, fb) in [(0, 0), (0, 1), (1, 1)] {
                                let g1 = Observable { indices: a.clone(), bound: 1.0, f: funcs[fa] };
                                let g2 = Observable { indices: b.clone(), bound: 1.0, f: funcs[fb] };
                                let out = covariance_gap(&process, &g1, &g2, gap_m).unwrap();
                                assert!(out.gap <= out.bound);
                                checked += 1;
                            }
                        }
                    }
                }
            }
        }
        assert!(checked > 100);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn adjacency_is_symmetric(
            n in 3usize..40,
            m in 0usize..4,
            a in proptest::collection::vec(1usize..40, 3),
            b in proptest::collection::vec(1usize..40, 3),
        ) {
            let s = GraphSpec::new(n, 3, m, Mode::V).unwrap();
            let clamp = |v: Vec<usize>| v.into_iter().map(|j| 1 + (j - 1) % n).collect::<Vec<_>>();
            let (a, b) = (clamp(a), clamp(b));
            prop_assert_eq!(adjacent(&a, &b, &s).unwrap(), adjacent(&b, &a, &s).unwrap());
        }
    }
}
