//! Closed-form guarantees and the quantities behind them.
//!
//! All logarithms are base 2. Real-valued bounds are compared with a slack
//! of [`SLACK`]; integer quantities such as `f(h, k)` are exact.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Comparison slack when asserting `achieved >= bound`.
pub const SLACK: f64 = 1e-9;

/// Upper end of the δ range where `beta(δ) > 0`: 1/3 - 1/(3√2).
pub fn beta_delta_limit() -> f64 {
    1.0 / 3.0 - 1.0 / (3.0 * 2f64.sqrt())
}

fn check_open(name: &str, x: f64, lo: f64, hi: f64) -> Result<()> {
    if x.is_finite() && x > lo && x < hi {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {x} must lie in ({lo}, {hi})")))
    }
}

/// `(1 + log(1-δ)) / (1 - log δ)`, for δ in (0, 1/2).
pub fn alpha(delta: f64) -> Result<f64> {
    check_open("delta", delta, 0.0, 0.5)?;
    Ok((1.0 + (1.0 - delta).log2()) / (1.0 - delta.log2()))
}

/// `(1 + 2 log(1-3δ)) / (log(1-3δ) - log δ)`, for δ in (0, 1/3 - 1/(3√2)).
pub fn beta(delta: f64) -> Result<f64> {
    check_open("delta", delta, 0.0, beta_delta_limit())?;
    let l = (1.0 - 3.0 * delta).log2();
    Ok((1.0 + 2.0 * l) / (l - delta.log2()))
}

/// Maximum of a unimodal function on `[lo, hi]` by golden-section search.
pub fn golden_section_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

/// Maximum over a uniform grid with `steps` interior points, refined once
/// around the best point.
pub fn grid_search_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, steps: usize) -> f64 {
    let scan = |a: f64, b: f64| {
        let h = (b - a) / (steps + 1) as f64;
        (1..=steps)
            .map(|i| a + h * i as f64)
            .fold((a + h, f64::NEG_INFINITY), |best, x| {
                let y = f(x);
                if y > best.1 {
                    (x, y)
                } else {
                    best
                }
            })
    };
    let h = (hi - lo) / (steps + 1) as f64;
    let (x0, _) = scan(lo, hi);
    let (x1, _) = scan((x0 - h).max(lo), (x0 + h).min(hi));
    x1
}

/// The δ maximizing `alpha` and the maximum value.
pub fn optimal_delta_match1() -> (f64, f64) {
    let f = |d: f64| alpha(d).unwrap_or(f64::NEG_INFINITY);
    let d = golden_section_max(f, 1e-9, 0.5 - 1e-9, 1e-10);
    (d, f(d))
}

/// The δ maximizing `beta` and the maximum value.
pub fn optimal_delta_match2() -> (f64, f64) {
    let f = |d: f64| beta(d).unwrap_or(f64::NEG_INFINITY);
    let d = golden_section_max(f, 1e-9, beta_delta_limit() - 1e-9, 1e-10);
    (d, f(d))
}

/// Lower bound for Match1 on a balanced tree of height `m` against a tree
/// on `t` of its leaves: `(m log(1-δ) + log t) / (1 - log δ)`. Not clamped.
pub fn match1_bound(m: u32, t: usize, delta: f64) -> Result<f64> {
    check_open("delta", delta, 0.0, 0.5)?;
    if t == 0 {
        return Err(Error::Domain("t must be at least 1".into()));
    }
    Ok((m as f64 * (1.0 - delta).log2() + (t as f64).log2()) / (1.0 - delta.log2()))
}

/// Exponent `g(m1, m2, t)` of the Match2 guarantee.
pub fn match2_exponent(m1: u32, m2: u32, t: usize, delta: f64) -> Result<f64> {
    check_open("delta", delta, 0.0, 0.25)?;
    if t == 0 {
        return Err(Error::Domain("t must be at least 1".into()));
    }
    let l = (1.0 - 3.0 * delta).log2();
    Ok(((m1 + m2) as f64 * l + (t as f64).log2()) / (l - delta.log2()))
}

/// `max(1, 2^g(m1, m2, t))`.
pub fn match2_bound(m1: u32, m2: u32, t: usize, delta: f64) -> Result<f64> {
    Ok(match2_exponent(m1, m2, t, delta)?.exp2().max(1.0))
}

/// Additive loss `c = (log 3 - 1) / (log(1-3δ) - log δ)` for two unrooted
/// trees with a central vertex.
pub fn t2_constant(delta: f64) -> Result<f64> {
    check_open("delta", delta, 0.0, 0.25)?;
    let l = (1.0 - 3.0 * delta).log2();
    Ok((3f64.log2() - 1.0) / (l - delta.log2()))
}

/// `(1 + k log(1-δ)) / (1 - log δ)`; the numerator must be positive.
pub fn alpha_k(k: f64, delta: f64) -> Result<f64> {
    check_open("delta", delta, 0.0, 0.5)?;
    if !(k > 0.0) {
        return Err(Error::Domain(format!("k = {k} must be positive")));
    }
    let num = 1.0 + k * (1.0 - delta).log2();
    if num <= 0.0 {
        return Err(Error::Domain(format!("1 + k log(1-δ) = {num} is not positive")));
    }
    Ok(num / (1.0 - delta.log2()))
}

/// `(1 + 2k log(1-3δ)) / (log(1-3δ) - log δ)`; the numerator must be positive.
pub fn beta_k(k: f64, delta: f64) -> Result<f64> {
    check_open("delta", delta, 0.0, 0.25)?;
    if !(k > 0.0) {
        return Err(Error::Domain(format!("k = {k} must be positive")));
    }
    let l = (1.0 - 3.0 * delta).log2();
    let num = 1.0 + 2.0 * k * l;
    if num <= 0.0 {
        return Err(Error::Domain(format!("1 + 2k log(1-3δ) = {num} is not positive")));
    }
    Ok(num / (l - delta.log2()))
}

/// δ with `1 + k log(1-δ) = 1/2`.
pub fn delta_for_alpha_k(k: f64) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::Domain(format!("k = {k} must be positive")));
    }
    Ok((1.0 - (-0.5 / k).exp2()).min(0.5 - 1e-9))
}

/// δ with `1 + 2k log(1-3δ) = 1/2`.
pub fn delta_for_beta_k(k: f64) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::Domain(format!("k = {k} must be positive")));
    }
    Ok(((1.0 - (-0.25 / k).exp2()) / 3.0).min(0.25 - 1e-9))
}

fn check_hk(h: u32, k: u32) -> Result<()> {
    if k > h {
        Err(Error::Domain(format!("need 0 <= k <= h, got h = {h}, k = {k}")))
    } else {
        Ok(())
    }
}

/// Exact binomial coefficient; zero when `k > n`.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// `f(h, k)` by the sum `Σ_{i=0}^{k} C(h-i-1, k-i) 2^i` (and `2^k` when
/// `h = k` or `k = 0`).
pub fn f_closed(h: u32, k: u32) -> Result<u128> {
    check_hk(h, k)?;
    if h == k || k == 0 {
        return Ok(1u128 << k);
    }
    Ok((0..=k)
        .map(|i| binomial((h - i - 1) as u64, (k - i) as u64) << i)
        .sum())
}

/// `f(h, k)` by the recurrence `f(h-1, k) + f(h-1, k-1)`.
pub fn f_recurrence(h: u32, k: u32) -> Result<u128> {
    check_hk(h, k)?;
    // row[j] holds f(hh, j) for the current hh
    let mut row: Vec<u128> = vec![1];
    for hh in 1..=h {
        let mut next = vec![0u128; hh as usize + 1];
        for j in 0..=hh as usize {
            next[j] = if j == 0 || j == hh as usize {
                1u128 << j
            } else {
                row[j] + row[j - 1]
            };
        }
        row = next;
    }
    Ok(row[k as usize])
}

/// Whether `f(h, k) <= (2h)^k`.
pub fn fhk_upper(h: u32, k: u32) -> Result<bool> {
    if k < 1 || k > h {
        return Err(Error::Domain(format!("need 1 <= k <= h, got h = {h}, k = {k}")));
    }
    let f = f_closed(h, k)?;
    Ok(match (2 * h as u128).checked_pow(k) {
        Some(rhs) => f <= rhs,
        None => true,
    })
}

fn check_n(n: usize) -> Result<()> {
    if n <= 2 {
        Err(Error::Domain(format!("n = {n} must exceed 2")))
    } else {
        Ok(())
    }
}

/// `φ(n, a) = (log n)^a / 2`.
pub fn phi(n: usize, a: f64) -> Result<f64> {
    check_n(n)?;
    check_open("a", a, 0.0, 1.0)?;
    Ok((n as f64).log2().powf(a) / 2.0)
}

/// `ψ(n, b) = (log n)^b / log log n`.
pub fn psi(n: usize, b: f64) -> Result<f64> {
    check_n(n)?;
    check_open("b", b, 0.0, 1.0)?;
    let ln = (n as f64).log2();
    Ok(ln.powf(b) / ln.log2())
}

/// Path-length threshold `(log n)^ψ(n, b)`.
pub fn path_threshold(n: usize, b: f64) -> Result<f64> {
    Ok((n as f64).log2().powf(psi(n, b)?))
}

/// The chain `k log(2h) < log n` at `k = φ(n, a)`, `h = (log n)^ψ(n, b)`.
pub fn ramsey_chain_holds(n: usize, a: f64, b: f64) -> Result<bool> {
    let k = phi(n, a)?;
    let h = path_threshold(n, b)?;
    Ok(k * (2.0 * h).log2() < (n as f64).log2())
}

/// `(α*/2) √(log n) + α* log(2/3)` with α* the optimum of `alpha`.
pub fn general_bound(n: usize) -> Result<f64> {
    check_n(n)?;
    let (_, a) = optimal_delta_match1();
    Ok(a / 2.0 * (n as f64).log2().sqrt() + a * (2.0f64 / 3.0).log2())
}

/// Result of one guarantee check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeReport {
    pub algorithm: String,
    /// The raw bound, possibly below 1.
    pub bound_value: f64,
    pub achieved: usize,
    pub params: BTreeMap<String, f64>,
}

impl GuaranteeReport {
    pub fn new(algorithm: &str, bound_value: f64, achieved: usize) -> Self {
        GuaranteeReport {
            algorithm: algorithm.to_string(),
            bound_value,
            achieved,
            params: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Self {
        self.params.insert(name.to_string(), value);
        self
    }

    /// `max(1, bound_value)`: one common leaf always agrees.
    pub fn clamped_bound(&self) -> f64 {
        self.bound_value.max(1.0)
    }

    pub fn met(&self) -> bool {
        self.achieved as f64 >= self.clamped_bound() - SLACK
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_at_reported_optimum() {
        let a = alpha(0.1705).unwrap();
        assert!((a - 0.2055).abs() < 1e-3, "{a}");
    }

    #[test]
    fn alpha_limit_at_zero() {
        // (1 + log(1-δ)) / (1 - log δ) -> 0 as δ -> 0; the ratio's numerator
        // tends to 1 while the denominator grows, so α -> 0+.
        let a = alpha(1e-12).unwrap();
        assert!(a > 0.0 && a < 0.03, "{a}");
    }

    #[test]
    fn alpha_quarter() {
        // log2(0.75) = ln 0.75 / ln 2, evaluated independently of the
        // library's log2 path.
        let l = 0.75f64.ln() / 2f64.ln();
        let expect = (1.0 + l) / 3.0;
        assert!((alpha(0.25).unwrap() - expect).abs() < 1e-15);
        assert!((expect - 0.194_987_500_240_385).abs() < 1e-12);
    }

    #[test]
    fn alpha_domain() {
        assert!(alpha(0.0).is_err());
        assert!(alpha(0.5).is_err());
        assert!(alpha(f64::NAN).is_err());
    }

    #[test]
    fn optimal_alpha() {
        let (d, a) = optimal_delta_match1();
        assert!((d - 0.1705).abs() < 3e-3, "{d}");
        assert!((a - 0.2055).abs() < 1e-3, "{a}");
        assert!(a >= alpha(d - 0.01).unwrap());
        assert!(a >= alpha(d + 0.01).unwrap());
        let f = |x: f64| alpha(x).unwrap_or(f64::NEG_INFINITY);
        let g = grid_search_max(f, 0.0, 0.5, 100_000);
        assert!((g - d).abs() < 1e-5, "{g} vs {d}");
    }

    #[test]
    fn optimal_beta() {
        let (d, b) = optimal_delta_match2();
        assert!(b > 0.0);
        let f = |x: f64| beta(x).unwrap_or(f64::NEG_INFINITY);
        let g = grid_search_max(f, 0.0, beta_delta_limit(), 100_000);
        assert!((g - d).abs() < 1e-5, "{g} vs {d}");
        assert!(beta(0.02).unwrap() > 0.0 && beta(0.03).unwrap() > 0.0);
        let edge = beta(beta_delta_limit() - 1e-9).unwrap();
        assert!(edge > 0.0 && edge < 1e-6);
        assert!(beta(beta_delta_limit()).is_err());
    }

    #[test]
    fn match1_bound_examples() {
        assert_eq!(match1_bound(0, 1, 0.1705).unwrap(), 0.0);
        for m in 0..20 {
            let d = 0.1705;
            let lhs = match1_bound(m, 1 << m, d).unwrap();
            let rhs = alpha(d).unwrap() * m as f64;
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
        }
        let v = match1_bound(10, 1024, 0.1705).unwrap();
        assert!((v - 2.056).abs() < 2e-3, "{v}");
        assert!(match1_bound(1, 0, 0.1).is_err());
    }

    #[test]
    fn match2_bound_examples() {
        assert!(match2_exponent(1, 0, 1, 0.1).unwrap() <= 0.0);
        assert_eq!(match2_bound(0, 1, 1, 0.1).unwrap(), 1.0);
        let d = 0.05;
        for m in 1..12 {
            let g = match2_exponent(m, m, 1 << m, d).unwrap();
            assert!((g - beta(d).unwrap() * m as f64).abs() < 1e-12);
        }
        let b = match2_bound(3, 3, 8, 0.02).unwrap();
        assert!((b - 1.36).abs() < 0.01, "{b}");
        assert!(match2_bound(3, 3, 8, 0.25).is_err());
    }

    #[test]
    fn k_constants() {
        assert_eq!(alpha_k(1.0, 0.1705).unwrap(), alpha(0.1705).unwrap());
        let d = delta_for_alpha_k(2.0).unwrap();
        assert!(1.0 + 2.0 * (1.0 - d).log2() > 0.0);
        assert!(alpha_k(2.0, d).unwrap() > 0.0);
        let d = delta_for_beta_k(2.0).unwrap();
        assert!(beta_k(2.0, d).unwrap() > 0.0);
        assert!(alpha_k(10.0, 0.4).is_err());
    }

    #[test]
    fn f_values() {
        for k in 0..10 {
            assert_eq!(f_closed(k, k).unwrap(), 1 << k);
            assert_eq!(f_closed(k + 3, 0).unwrap(), 1);
        }
        for h in 1..30 {
            assert_eq!(f_closed(h, 1).unwrap(), h as u128 + 1);
        }
        assert_eq!(f_recurrence(3, 2).unwrap(), 7);
        assert_eq!(f_recurrence(4, 2).unwrap(), 11);
        assert_eq!(f_closed(3, 2).unwrap(), 7);
        assert_eq!(f_closed(4, 2).unwrap(), 11);
        assert!(f_closed(2, 3).is_err());
    }

    #[test]
    fn fhk_upper_examples() {
        assert!(fhk_upper(2, 1).unwrap());
        for k in 1..15 {
            assert!(fhk_upper(k, k).unwrap());
        }
        assert!(fhk_upper(3, 0).is_err());
    }

    #[test]
    fn phi_psi_examples() {
        let n = 1usize << 16;
        assert!((phi(n, 0.5).unwrap() - 2.0).abs() < 1e-12);
        assert!((psi(n, 0.5).unwrap() - 1.0).abs() < 1e-12);
        assert!((path_threshold(n, 0.5).unwrap() - 16.0).abs() < 1e-9);
        assert!(ramsey_chain_holds(16, 0.5, 0.5).unwrap());
        assert!(phi(2, 0.5).is_err());
    }

    #[test]
    fn general_bound_values() {
        let v = general_bound(1 << 16).unwrap();
        assert!((v - 0.29).abs() < 0.01, "{v}");
        let mut prev = general_bound(3).unwrap();
        for n in 4..2000 {
            let cur = general_bound(n).unwrap();
            assert!(cur > prev);
            prev = cur;
        }
    }
}
