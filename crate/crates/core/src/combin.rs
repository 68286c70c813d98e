//! Binomial coefficients and index-tuple enumeration.
//!
//! Tuples are 1-based positions. Increasing tuples (`1 ≤ j1 < … < jr ≤ n`) and
//! ordered tuples (`{1..n}^r`) are both advanced in lexicographic order by an
//! explicit successor function.

/// Exact binomial coefficient, `None` on `u128` overflow.
pub fn binomial_exact(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k as u128 {
        // acc * (n - k + i) is divisible by i at every step.
        acc = acc.checked_mul(n as u128 - k as u128 + i)? / i;
    }
    Some(acc)
}

/// Binomial coefficient as a float (exact whenever the integer fits in 53 bits).
pub fn binomial(n: u64, k: u64) -> f64 {
    match binomial_exact(n, k) {
        Some(c) => c as f64,
        None => {
            let k = k.min(n - k);
            (1..=k).fold(1.0, |acc, i| acc * (n - k + i) as f64 / i as f64)
        }
    }
}

/// Number of terms in a U-statistic (`C(n, r)`) or a V-statistic (`n^r`).
pub fn term_count(n: usize, r: usize, mode: crate::Mode) -> f64 {
    match mode {
        crate::Mode::U => binomial(n as u64, r as u64),
        crate::Mode::V => (n as f64).powi(r as i32),
    }
}

/// First increasing tuple `(1, 2, …, r)`, or `None` when `r > n`.
pub fn first_combination(n: usize, r: usize) -> Option<Vec<usize>> {
    (r <= n).then(|| (1..=r).collect())
}

/// Advance an increasing tuple to its lexicographic successor in place.
/// Returns `false` when `tuple` was the last one.
#[inline]
pub fn next_combination(tuple: &mut [usize], n: usize) -> bool {
    let r = tuple.len();
    let mut i = r;
    while i > 0 {
        i -= 1;
        if tuple[i] < n - (r - 1 - i) {
            tuple[i] += 1;
            for k in i + 1..r {
                tuple[k] = tuple[k - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Advance an ordered tuple over `{1..n}^r` in place (odometer order).
#[inline]
pub fn next_tuple(tuple: &mut [usize], n: usize) -> bool {
    let mut i = tuple.len();
    while i > 0 {
        i -= 1;
        if tuple[i] < n {
            tuple[i] += 1;
            for t in &mut tuple[i + 1..] {
                *t = 1;
            }
            return true;
        }
    }
    false
}

/// All vertices of the given family in lexicographic order.
pub fn all_tuples(n: usize, r: usize, mode: crate::Mode) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    match mode {
        crate::Mode::U => {
            if let Some(mut t) = first_combination(n, r) {
                loop {
                    out.push(t.clone());
                    if !next_combination(&mut t, n) {
                        break;
                    }
                }
            }
        }
        crate::Mode::V => {
            if n == 0 {
                return out;
            }
            let mut t = vec![1; r];
            loop {
                out.push(t.clone());
                if !next_tuple(&mut t, n) {
                    break;
                }
            }
        }
    }
    out
}
