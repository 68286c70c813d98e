//! Strictly stationary real-valued sequences with computable absolute
//! regularity (β-mixing) coefficients.
//!
//! A [`ProcessSpec`] is plain configuration data (it round-trips through
//! JSON). [`Process::new`] validates it once; sampling and enumeration never
//! fail because of invalid configuration afterwards.
//!
//! For a stationary finite Markov chain with transition matrix `P` and
//! stationary law `π`,
//!
//! ```text
//! β(t) = Σ_x π(x) · TV(P^t(x, ·), π)
//! ```
//!
//! where `TV` is half the L1 distance: by the Markov property the supremum
//! over the future σ-algebra is attained on the state at lag `t`.

use crate::rng::{path_rng, PathRng};
use crate::{Error, Result, ENUMERATION_BUDGET};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

const PROB_TOL: f64 = 1e-12;

/// Stationary sequence model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessSpec {
    /// i.i.d. draws from a finite alphabet.
    IidDiscrete { alphabet: Vec<f64>, probs: Vec<f64> },
    /// i.i.d. Uniform(0, 1).
    IidUniform01 {},
    /// `X_t = g(ε_t, …, ε_{t+w-1})` for i.i.d. innovations `ε`.
    MDependentWindow { window: usize, base: Innovation, map: WindowMap },
    /// Finite-state Markov chain started from its stationary law.
    FiniteMarkov { states: Vec<f64>, transition: Vec<Vec<f64>> },
}

/// Innovation law of a moving-window process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Innovation {
    IidDiscrete { alphabet: Vec<f64>, probs: Vec<f64> },
    IidUniform01 {},
}

/// Bounded map applied to a window of innovations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowMap {
    Mean,
    Sum,
    Max,
    Min,
    Product,
}

impl WindowMap {
    pub fn apply(self, window: &[f64]) -> f64 {
        match self {
            WindowMap::Mean => window.iter().sum::<f64>() / window.len() as f64,
            WindowMap::Sum => window.iter().sum(),
            WindowMap::Max => window.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            WindowMap::Min => window.iter().copied().fold(f64::INFINITY, f64::min),
            WindowMap::Product => window.iter().product(),
        }
    }
}

impl ProcessSpec {
    /// Two-state chain on `{0, 1}` with `P(0→1) = p`, `P(1→0) = q`.
    pub fn two_state(p: f64, q: f64) -> Self {
        ProcessSpec::FiniteMarkov { states: vec![0.0, 1.0], transition: vec![vec![1.0 - p, p], vec![q, 1.0 - q]] }
    }

    /// Bernoulli(`p`) i.i.d. sequence on `{0, 1}`.
    pub fn bernoulli(p: f64) -> Self {
        ProcessSpec::IidDiscrete { alphabet: vec![0.0, 1.0], probs: vec![1.0 - p, p] }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidSpec(e.to_string()))
    }
}

/// Whether a reported β value is exact or only an upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exactness {
    Exact,
    UpperBound,
}

impl std::fmt::Display for Exactness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Exactness::Exact => "exact",
            Exactness::UpperBound => "upper_bound",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaValue {
    pub t: usize,
    pub value: f64,
    pub exactness: Exactness,
}

/// One-dimensional marginal law.
#[derive(Debug, Clone, PartialEq)]
pub enum Marginal {
    /// Distinct support points with their probabilities.
    Discrete {
        values: Vec<f64>,
        probs: Vec<f64>,
    },
    Continuous,
}

#[derive(Debug, Clone)]
struct Categorical {
    values: Vec<f64>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl Categorical {
    fn new(values: &[f64], probs: &[f64], what: &str) -> Result<Self> {
        check_probability_vector(probs, what)?;
        if values.len() != probs.len() {
            return Err(Error::InvalidSpec(format!(
                "{what}: {} values but {} probabilities",
                values.len(),
                probs.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec(format!("{what}: non-finite value")));
        }
        Ok(Categorical { values: values.to_vec(), probs: probs.to_vec(), cumulative: cumulative(probs) })
    }

    #[inline]
    fn sample_index(&self, rng: &mut PathRng) -> usize {
        draw_index(&self.cumulative, rng)
    }
}

#[derive(Debug, Clone)]
struct Chain {
    states: Vec<f64>,
    transition: DMatrix<f64>,
    stationary: Vec<f64>,
    cum_stationary: Vec<f64>,
    cum_rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
enum Base {
    Discrete(Categorical),
    Uniform,
}

#[derive(Debug, Clone)]
enum Model {
    IidDiscrete(Categorical),
    IidUniform,
    Window { window: usize, base: Base, map: WindowMap },
    Markov(Chain),
}

/// Validated process ready for sampling, β computation and enumeration.
#[derive(Debug, Clone)]
pub struct Process {
    spec: ProcessSpec,
    model: Model,
}

fn cumulative(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect()
}

#[inline]
fn draw_index(cumulative: &[f64], rng: &mut PathRng) -> usize {
    let u: f64 = rng.random();
    cumulative.iter().position(|&c| u < c).unwrap_or(cumulative.len() - 1)
}

fn check_probability_vector(probs: &[f64], what: &str) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::InvalidSpec(format!("{what}: empty probability vector")));
    }
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::InvalidSpec(format!("{what}: negative or non-finite probability")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidSpec(format!("{what}: probabilities sum to {total}, not 1")));
    }
    Ok(())
}

fn to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let s = rows.len();
    if s == 0 {
        return Err(Error::InvalidSpec("transition matrix is empty".into()));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != s {
            return Err(Error::InvalidSpec(format!(
                "transition matrix is not square: row {i} has {} entries, expected {s}",
                row.len()
            )));
        }
        check_probability_vector(row, &format!("transition row {i}"))?;
    }
    Ok(DMatrix::from_fn(s, s, |i, j| rows[i][j]))
}

fn reachable_all(adj: &[Vec<usize>], start: usize) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen.iter().all(|&s| s)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Period of an irreducible chain from BFS levels: gcd of `level(u) + 1 − level(v)`
/// over all edges `u → v`.
fn period(adj: &[Vec<usize>]) -> usize {
    let mut level = vec![usize::MAX; adj.len()];
    level[0] = 0;
    let mut queue = VecDeque::from([0]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut g = 0;
    for (u, nbrs) in adj.iter().enumerate() {
        for &v in nbrs {
            g = gcd(g, (level[u] + 1).abs_diff(level[v]));
        }
    }
    g
}

fn check_ergodic(p: &DMatrix<f64>) -> Result<()> {
    let s = p.nrows();
    let adj: Vec<Vec<usize>> = (0..s).map(|i| (0..s).filter(|&j| p[(i, j)] > 0.0).collect()).collect();
    let rev: Vec<Vec<usize>> = (0..s).map(|j| (0..s).filter(|&i| p[(i, j)] > 0.0).collect()).collect();
    if !reachable_all(&adj, 0) || !reachable_all(&rev, 0) {
        return Err(Error::InvalidSpec("transition matrix is reducible".into()));
    }
    let d = period(&adj);
    if d != 1 {
        return Err(Error::InvalidSpec(format!("chain is periodic with period {d}")));
    }
    Ok(())
}

/// Stationary law `π` of an irreducible aperiodic row-stochastic matrix.
pub fn stationary_distribution(transition: &[Vec<f64>]) -> Result<Vec<f64>> {
    let p = to_matrix(transition)?;
    check_ergodic(&p)?;
    solve_stationary(&p)
}

fn solve_stationary(p: &DMatrix<f64>) -> Result<Vec<f64>> {
    let s = p.nrows();
    // (Pᵀ − I) π = 0 with the last equation replaced by Σ π = 1.
    let mut a = p.transpose() - DMatrix::identity(s, s);
    for j in 0..s {
        a[(s - 1, j)] = 1.0;
    }
    let mut rhs = DVector::zeros(s);
    rhs[s - 1] = 1.0;
    let pi = a.lu().solve(&rhs).ok_or_else(|| Error::InvalidSpec("stationary equations are singular".into()))?;
    let residual = (p.transpose() * &pi - &pi).amax();
    if !residual.is_finite() || residual > 1e-10 || pi.iter().any(|&x| x <= 0.0) {
        return Err(Error::InvalidSpec(format!("stationary distribution did not converge (residual {residual:e})")));
    }
    let total = pi.sum();
    Ok(pi.iter().map(|x| x / total).collect())
}

impl Chain {
    fn new(states: &[f64], rows: &[Vec<f64>]) -> Result<Self> {
        let transition = to_matrix(rows)?;
        if states.len() != transition.nrows() {
            return Err(Error::InvalidSpec(format!(
                "{} states but a {}x{} transition matrix",
                states.len(),
                transition.nrows(),
                transition.ncols()
            )));
        }
        if states.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("non-finite state value".into()));
        }
        check_ergodic(&transition)?;
        let stationary = solve_stationary(&transition)?;
        Ok(Chain {
            states: states.to_vec(),
            cum_stationary: cumulative(&stationary),
            cum_rows: rows.iter().map(|r| cumulative(r)).collect(),
            stationary,
            transition,
        })
    }

    fn beta_from_deviation(&self, dev: &DMatrix<f64>) -> f64 {
        let s = self.states.len();
        (0..s)
            .map(|x| {
                let row: f64 = (0..s).map(|y| dev[(x, y)].abs()).sum();
                self.stationary[x] * 0.5 * row
            })
            .sum::<f64>()
            .clamp(0.0, 1.0)
    }

    /// `P^t - 1πᵀ`, advanced by right multiplication so it decays without a rounding floor.
    fn deviation(&self, t: usize) -> DMatrix<f64> {
        let s = self.states.len();
        let mut dev = self.transition.clone();
        for x in 0..s {
            for y in 0..s {
                dev[(x, y)] -= self.stationary[y];
            }
        }
        for _ in 1..t {
            dev = self.advance(&dev);
        }
        dev
    }

    /// One step `D ← D·P`, re-projected so that `πᵀD = 0` holds exactly.
    fn advance(&self, dev: &DMatrix<f64>) -> DMatrix<f64> {
        let s = self.states.len();
        let mut next = dev * &self.transition;
        for y in 0..s {
            let drift: f64 = (0..s).map(|x| self.stationary[x] * next[(x, y)]).sum();
            for x in 0..s {
                next[(x, y)] -= drift;
            }
        }
        next
    }

    fn matrix_power(&self, t: usize) -> DMatrix<f64> {
        let s = self.states.len();
        let mut acc = DMatrix::identity(s, s);
        for _ in 0..t {
            acc = &acc * &self.transition;
        }
        acc
    }
}

impl Process {
    pub fn new(spec: ProcessSpec) -> Result<Self> {
        let model = match &spec {
            ProcessSpec::IidDiscrete { alphabet, probs } => {
                Model::IidDiscrete(Categorical::new(alphabet, probs, "alphabet")?)
            }
            ProcessSpec::IidUniform01 {} => Model::IidUniform,
            ProcessSpec::MDependentWindow { window, base, map } => {
                if *window == 0 {
                    return Err(Error::InvalidSpec("window must be positive".into()));
                }
                let base = match base {
                    Innovation::IidDiscrete { alphabet, probs } => {
                        Base::Discrete(Categorical::new(alphabet, probs, "innovation alphabet")?)
                    }
                    Innovation::IidUniform01 {} => Base::Uniform,
                };
                Model::Window { window: *window, base, map: *map }
            }
            ProcessSpec::FiniteMarkov { states, transition } => Model::Markov(Chain::new(states, transition)?),
        };
        Ok(Process { spec, model })
    }

    pub fn spec(&self) -> &ProcessSpec {
        &self.spec
    }

    /// Stationary law for Markov specs.
    pub fn stationary(&self) -> Option<&[f64]> {
        match &self.model {
            Model::Markov(c) => Some(&c.stationary),
            _ => None,
        }
    }

    pub fn is_iid(&self) -> bool {
        matches!(self.model, Model::IidDiscrete(_) | Model::IidUniform)
            || matches!(self.model, Model::Window { window: 1, .. })
    }

    /// Whether `X_t` is uniform on `[0, 1]` and the sequence is i.i.d.
    pub fn is_iid_uniform(&self) -> bool {
        matches!(self.model, Model::IidUniform)
            || matches!(self.model, Model::Window { window: 1, base: Base::Uniform, .. })
    }

    pub fn is_discrete(&self) -> bool {
        match &self.model {
            Model::IidDiscrete(_) | Model::Markov(_) => true,
            Model::Window { base, .. } => matches!(base, Base::Discrete(_)),
            Model::IidUniform => false,
        }
    }

    /// Absolute regularity coefficient at lag `t ≥ 1`.
    pub fn beta(&self, t: usize) -> Result<BetaValue> {
        if t == 0 {
            return Err(Error::InvalidArgument("β(t) is defined for t ≥ 1".into()));
        }
        Ok(*self.beta_profile(t)?.last().expect("t ≥ 1"))
    }

    /// `β(1), …, β(t_max)`.
    pub fn beta_profile(&self, t_max: usize) -> Result<Vec<BetaValue>> {
        match &self.model {
            Model::IidDiscrete(_) | Model::IidUniform => {
                Ok((1..=t_max).map(|t| BetaValue { t, value: 0.0, exactness: Exactness::Exact }).collect())
            }
            Model::Window { window, .. } => Ok((1..=t_max)
                .map(|t| {
                    if t >= *window {
                        BetaValue { t, value: 0.0, exactness: Exactness::Exact }
                    } else {
                        BetaValue { t, value: 1.0, exactness: Exactness::UpperBound }
                    }
                })
                .collect()),
            Model::Markov(chain) => {
                let mut dev = chain.deviation(1);
                let mut out = Vec::with_capacity(t_max);
                for t in 1..=t_max {
                    if t > 1 {
                        dev = chain.advance(&dev);
                    }
                    out.push(BetaValue { t, value: chain.beta_from_deviation(&dev), exactness: Exactness::Exact });
                }
                Ok(out)
            }
        }
    }

    /// `Σ_{t > from} β(t)`, summed until the terms are negligible.
    pub fn beta_tail_sum(&self, from: usize) -> f64 {
        match &self.model {
            Model::IidDiscrete(_) | Model::IidUniform => 0.0,
            Model::Window { window, .. } => window.saturating_sub(from + 1) as f64,
            Model::Markov(chain) => {
                let mut dev = chain.deviation(from + 1);
                let mut total = 0.0;
                for _ in 0..1_000_000 {
                    let b = chain.beta_from_deviation(&dev);
                    total += b;
                    if b <= 1e-17 * total || b < 1e-300 {
                        break;
                    }
                    dev = chain.advance(&dev);
                }
                total
            }
        }
    }

    /// One-dimensional marginal law (`Continuous` when the innovations are uniform).
    pub fn marginal(&self) -> Result<Marginal> {
        match &self.model {
            Model::IidDiscrete(c) => Ok(merge_support(&c.values, &c.probs)),
            Model::Markov(chain) => Ok(merge_support(&chain.states, &chain.stationary)),
            Model::IidUniform => Ok(Marginal::Continuous),
            Model::Window { window, base, map } => match base {
                Base::Uniform => Ok(Marginal::Continuous),
                Base::Discrete(cat) => {
                    check_budget((cat.values.len() as f64).powi(*window as i32))?;
                    let mut values = Vec::new();
                    let mut probs = Vec::new();
                    odometer_iid(cat, *window, |digits, prob| {
                        let w: Vec<f64> = digits.iter().map(|&d| cat.values[d]).collect();
                        values.push(map.apply(&w));
                        probs.push(prob);
                    });
                    Ok(merge_support(&values, &probs))
                }
            },
        }
    }

    /// Exact joint law of `(X_1, X_{1+t})` for discrete specs, as
    /// `(x, y, probability)` triples.
    pub fn two_point_law(&self, t: usize) -> Result<Vec<(f64, f64, f64)>> {
        match &self.model {
            Model::Markov(chain) => {
                let power = chain.matrix_power(t);
                let s = chain.states.len();
                let mut out = Vec::with_capacity(s * s);
                for x in 0..s {
                    for y in 0..s {
                        out.push((chain.states[x], chain.states[y], chain.stationary[x] * power[(x, y)]));
                    }
                }
                Ok(out)
            }
            _ if t == 0 => match self.marginal()? {
                Marginal::Discrete { values, probs } => {
                    Ok(values.iter().zip(&probs).map(|(&v, &p)| (v, v, p)).collect())
                }
                Marginal::Continuous => Err(self.not_discrete()),
            },
            Model::Window { window, base: Base::Discrete(_), .. } if t < *window => {
                let mut out = Vec::new();
                self.enumerate_paths(t + 1, |path, prob| out.push((path[0], path[t], prob)))?;
                Ok(out)
            }
            _ => match self.marginal()? {
                Marginal::Discrete { values, probs } => {
                    let mut out = Vec::with_capacity(values.len() * values.len());
                    for (x, px) in values.iter().zip(&probs) {
                        for (y, py) in values.iter().zip(&probs) {
                            out.push((*x, *y, px * py));
                        }
                    }
                    Ok(out)
                }
                Marginal::Continuous => Err(self.not_discrete()),
            },
        }
    }

    /// Joint laws of `(X_1, X_{1+t})` for `t = 1..=t_max`.
    pub fn two_point_laws(&self, t_max: usize) -> Result<Vec<Vec<(f64, f64, f64)>>> {
        match &self.model {
            Model::Markov(chain) => {
                let s = chain.states.len();
                let mut power = DMatrix::identity(s, s);
                let mut out = Vec::with_capacity(t_max);
                for _ in 0..t_max {
                    power = &power * &chain.transition;
                    let mut law = Vec::with_capacity(s * s);
                    for x in 0..s {
                        for y in 0..s {
                            law.push((chain.states[x], chain.states[y], chain.stationary[x] * power[(x, y)]));
                        }
                    }
                    out.push(law);
                }
                Ok(out)
            }
            _ => (1..=t_max).map(|t| self.two_point_law(t)).collect(),
        }
    }

    fn not_discrete(&self) -> Error {
        Error::NotDiscrete(format!("{:?} has no finite alphabet", self.spec))
    }

    /// Number of distinct innovation sequences an exact enumeration of
    /// `n`-paths must visit.
    pub fn path_count(&self, n: usize) -> Result<f64> {
        match &self.model {
            Model::IidDiscrete(c) => Ok((c.values.len() as f64).powi(n as i32)),
            Model::Markov(c) => Ok((c.states.len() as f64).powi(n as i32)),
            Model::Window { window, base: Base::Discrete(c), .. } => {
                Ok((c.values.len() as f64).powi((n + window - 1) as i32))
            }
            _ => Err(self.not_discrete()),
        }
    }

    /// Visit every length-`n` path with its exact probability.
    ///
    /// Paths are visited in lexicographic order of the underlying state (or
    /// innovation) indices.
    pub fn enumerate_paths<F: FnMut(&[f64], f64)>(&self, n: usize, mut visit: F) -> Result<()> {
        if n == 0 {
            return Err(Error::InvalidArgument("path length must be positive".into()));
        }
        check_budget(self.path_count(n)?)?;
        match &self.model {
            Model::IidDiscrete(cat) => {
                let mut path = vec![0.0; n];
                odometer_iid(cat, n, |digits, prob| {
                    for (x, &d) in path.iter_mut().zip(digits) {
                        *x = cat.values[d];
                    }
                    visit(&path, prob);
                });
            }
            Model::Window { window, base: Base::Discrete(cat), map } => {
                let mut path = vec![0.0; n];
                let mut innov = vec![0.0; n + window - 1];
                odometer_iid(cat, n + window - 1, |digits, prob| {
                    for (e, &d) in innov.iter_mut().zip(digits) {
                        *e = cat.values[d];
                    }
                    for (t, x) in path.iter_mut().enumerate() {
                        *x = map.apply(&innov[t..t + window]);
                    }
                    visit(&path, prob);
                });
            }
            Model::Markov(chain) => {
                let s = chain.states.len();
                let mut digits = vec![0usize; n];
                let mut prefix = vec![0.0; n];
                let mut path = vec![chain.states[0]; n];
                let refresh = |from: usize, digits: &[usize], prefix: &mut [f64], path: &mut [f64]| {
                    for i in from..digits.len() {
                        path[i] = chain.states[digits[i]];
                        prefix[i] = if i == 0 {
                            chain.stationary[digits[0]]
                        } else {
                            prefix[i - 1] * chain.transition[(digits[i - 1], digits[i])]
                        };
                    }
                };
                refresh(0, &digits, &mut prefix, &mut path);
                loop {
                    visit(&path, prefix[n - 1]);
                    let mut i = n;
                    loop {
                        if i == 0 {
                            return Ok(());
                        }
                        i -= 1;
                        if digits[i] + 1 < s {
                            digits[i] += 1;
                            digits[i + 1..].iter_mut().for_each(|d| *d = 0);
                            break;
                        }
                    }
                    refresh(i, &digits, &mut prefix, &mut path);
                }
            }
            _ => return Err(self.not_discrete()),
        }
        Ok(())
    }

    /// Deterministic path of length `n` from `seed`.
    pub fn sample_path(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::InvalidArgument("path length must be positive".into()));
        }
        let mut rng = path_rng(seed);
        let mut out = vec![0.0; n];
        self.fill_path(&mut rng, &mut out);
        Ok(out)
    }

    /// Overwrite `out` with a fresh stationary path drawn from `rng`.
    pub fn fill_path(&self, rng: &mut PathRng, out: &mut [f64]) {
        let n = out.len();
        if n == 0 {
            return;
        }
        match &self.model {
            Model::IidDiscrete(cat) => {
                for x in out.iter_mut() {
                    *x = cat.values[cat.sample_index(rng)];
                }
            }
            Model::IidUniform => {
                for x in out.iter_mut() {
                    *x = rng.random();
                }
            }
            Model::Window { window, base, map } => {
                let mut innov = Vec::with_capacity(n + window - 1);
                for _ in 0..n + window - 1 {
                    innov.push(match base {
                        Base::Discrete(cat) => cat.values[cat.sample_index(rng)],
                        Base::Uniform => rng.random(),
                    });
                }
                for (t, x) in out.iter_mut().enumerate() {
                    *x = map.apply(&innov[t..t + window]);
                }
            }
            Model::Markov(chain) => {
                let mut state = draw_index(&chain.cum_stationary, rng);
                out[0] = chain.states[state];
                for x in out.iter_mut().skip(1) {
                    state = draw_index(&chain.cum_rows[state], rng);
                    *x = chain.states[state];
                }
            }
        }
    }
}

/// Deterministic path of length `n` for `spec` and `seed`.
pub fn sample_path(spec: &ProcessSpec, n: usize, seed: u64) -> Result<Vec<f64>> {
    Process::new(spec.clone())?.sample_path(n, seed)
}

/// `β(t)` with its exactness flag.
pub fn beta_coefficient(spec: &ProcessSpec, t: usize) -> Result<BetaValue> {
    Process::new(spec.clone())?.beta(t)
}

pub(crate) fn check_budget(needed: f64) -> Result<()> {
    if needed > ENUMERATION_BUDGET as f64 {
        Err(Error::BudgetExceeded {
            needed,
            budget: ENUMERATION_BUDGET as f64,
            hint: "use Monte Carlo instead of exact enumeration",
        })
    } else {
        Ok(())
    }
}

fn odometer_iid<F: FnMut(&[usize], f64)>(cat: &Categorical, len: usize, mut visit: F) {
    let k = cat.values.len();
    let mut digits = vec![0usize; len];
    let mut prefix = vec![0.0; len];
    let refresh = |from: usize, digits: &[usize], prefix: &mut [f64]| {
        for i in from..digits.len() {
            let p = cat.probs[digits[i]];
            prefix[i] = if i == 0 { p } else { prefix[i - 1] * p };
        }
    };
    refresh(0, &digits, &mut prefix);
    loop {
        visit(&digits, prefix[len - 1]);
        let mut i = len;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if digits[i] + 1 < k {
                digits[i] += 1;
                digits[i + 1..].iter_mut().for_each(|d| *d = 0);
                break;
            }
        }
        refresh(i, &digits, &mut prefix);
    }
}

fn merge_support(values: &[f64], probs: &[f64]) -> Marginal {
    let mut pairs: Vec<(f64, f64)> = values.iter().copied().zip(probs.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut vals: Vec<f64> = Vec::new();
    let mut ps: Vec<f64> = Vec::new();
    for (v, p) in pairs {
        if vals.last() == Some(&v) {
            *ps.last_mut().expect("nonempty") += p;
        } else {
            vals.push(v);
            ps.push(p);
        }
    }
    Marginal::Discrete { values: vals, probs: ps }
}
