//! Mass-concentration bound calculus.
//!
//! The central object is the polynomial
//!
//! ```text
//! Psi(p, q; b, l) = sum over I(b, l) of  b!/(u! v! w!) p^u (1-q)^v (q-p)^w
//! I(b, l) = { (u, v, w) : u+v+w = b, u >= 1, v >= 1, w <= l-1 }
//! ```
//!
//! which lower-bounds the probability that an i.i.d. b-sample from a
//! (b, c_beta)-connected measure fails to be beta-connected when split across
//! a reference set of mass `p`, the complement of its `l*beta`-extension of
//! mass `1-q`, and the shell in between. From `1 - c_beta >= Psi(p, q)` the
//! minimal extension mass `R_{b,c_beta}(p, l)` follows by inverting the
//! monotone-in-q polynomial. A trinomial enumeration over the full simplex
//! serves as an independent oracle, and a Monte Carlo driver validates the
//! inequality end to end on samplable synthetic measures.
//!
//! Conventions: `0^0 = 1` so the `q = p` and `q = 1` boundary terms are the
//! combinatorially correct ones; all arithmetic is in f64 with factorials
//! from a precomputed table (`b <= 64`) and pairwise term summation.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::persistence::{euclidean, is_beta_connected, PointCloud};
use crate::seeds;
use crate::synthetic::DistributionSpec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Largest supported sub-batch size for the polynomial calculus.
pub const MAX_B: u32 = 64;

const FACTORIALS: [f64; (MAX_B + 1) as usize] = {
    let mut t = [1.0_f64; (MAX_B + 1) as usize];
    let mut i = 1;
    while i < (MAX_B + 1) as usize {
        t[i] = t[i - 1] * i as f64;
        i += 1;
    }
    t
};

/// A member (u, v, w) of the index set I(b, l): u points in the reference
/// set, v outside the extension, w in the shell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IndexTriple {
    pub u: u32,
    pub v: u32,
    pub w: u32,
}

fn validate_b_l(b: u32, l: u32) -> Result<()> {
    if b == 0 || b > MAX_B {
        return Err(Error::invalid_input(format!(
            "b must be in [1, {MAX_B}], got {b}"
        )));
    }
    if l == 0 {
        return Err(Error::invalid_input("l must be a positive integer"));
    }
    Ok(())
}

fn validate_unit(name: &str, x: f64) -> Result<()> {
    if !x.is_finite() || !(0.0..=1.0).contains(&x) {
        return Err(Error::invalid_input(format!("{name} must be in [0, 1], got {x}")));
    }
    Ok(())
}

fn validate_pq(p: f64, q: f64) -> Result<()> {
    validate_unit("p", p)?;
    validate_unit("q", q)?;
    if p > q {
        return Err(Error::invalid_input(format!("p must not exceed q, got p={p}, q={q}")));
    }
    Ok(())
}

/// Enumerates I(b, l) in ascending (u, v) order. Empty for `b < 2` since no
/// triple can satisfy `u, v >= 1`.
pub fn index_set(b: u32, l: u32) -> Vec<IndexTriple> {
    let mut out = Vec::new();
    if b < 2 {
        return out;
    }
    for u in 1..b {
        for v in 1..=(b - u) {
            let w = b - u - v;
            if w <= l - 1 {
                out.push(IndexTriple { u, v, w });
            }
        }
    }
    out
}

/// `x^e` under the convention `0^0 = 1`.
fn pow0(x: f64, e: u32) -> f64 {
    if e == 0 {
        1.0
    } else {
        x.powi(e as i32)
    }
}

fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        3 => xs[0] + xs[1] + xs[2],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

fn multinomial(b: u32, u: u32, v: u32, w: u32) -> f64 {
    FACTORIALS[b as usize] / (FACTORIALS[u as usize] * FACTORIALS[v as usize] * FACTORIALS[w as usize])
}

/// Evaluates Psi(p, q; b, l) by direct enumeration of I(b, l).
///
/// The result lies in [0, 1] because it is a partial sum of a trinomial
/// probability mass function; no clamping is applied, an out-of-range value
/// would be a bug.
pub fn psi(p: f64, q: f64, b: u32, l: u32) -> Result<f64> {
    validate_pq(p, q)?;
    validate_b_l(b, l)?;
    let terms: Vec<f64> = index_set(b, l)
        .iter()
        .map(|t| multinomial(b, t.u, t.v, t.w) * pow0(p, t.u) * pow0(1.0 - q, t.v) * pow0(q - p, t.w))
        .collect();
    Ok(pairwise_sum(&terms))
}

fn g_cutoff(b: u32, x: u32, l: u32) -> u32 {
    // max{1, b - x - l + 1} evaluated without unsigned underflow.
    let v = b as i64 - x as i64 - l as i64 + 1;
    v.max(1) as u32
}

/// Evaluates Psi three ways: direct enumeration plus the two nested-sum
/// rearrangements with inner cutoff `g(x) = max{1, b - x - l + 1}` (outer
/// index running over the reference-set count and over the complement count,
/// respectively). The three results agree to 1e-12 on valid inputs.
pub fn psi_rewrite_check(p: f64, q: f64, b: u32, l: u32) -> Result<(f64, f64, f64)> {
    let direct = psi(p, q, b, l)?;
    if b < 2 {
        return Ok((direct, 0.0, 0.0));
    }

    let mut terms_u_outer = Vec::new();
    for n1 in 1..b {
        for n2 in g_cutoff(b, n1, l)..=(b - n1) {
            let n3 = b - n1 - n2;
            terms_u_outer.push(
                multinomial(b, n1, n2, n3) * pow0(p, n1) * pow0(1.0 - q, n2) * pow0(q - p, n3),
            );
        }
    }

    let mut terms_v_outer = Vec::new();
    for n2 in 1..b {
        for n1 in g_cutoff(b, n2, l)..=(b - n2) {
            let n3 = b - n1 - n2;
            terms_v_outer.push(
                multinomial(b, n1, n2, n3) * pow0(p, n1) * pow0(1.0 - q, n2) * pow0(q - p, n3),
            );
        }
    }

    Ok((direct, pairwise_sum(&terms_u_outer), pairwise_sum(&terms_v_outer)))
}

/// The boundary value Psi(p, p; b, l) = 1 - p^b - (1-p)^b, i.e. the
/// probability that a b-sample hits both the reference set and its complement.
pub fn critical_mass_threshold(p: f64, b: u32) -> f64 {
    1.0 - pow0(p, b) - pow0(1.0 - p, b)
}

/// True iff `1 - c_beta < 1 - p^b - (1-p)^b`, the regime in which the minimal
/// extension mass strictly exceeds `p` (mass concentration is strict).
pub fn critical_mass_holds(p: f64, b: u32, c_beta: f64) -> Result<bool> {
    validate_unit("p", p)?;
    validate_unit("c_beta", c_beta)?;
    validate_b_l(b, 1)?;
    Ok(1.0 - c_beta < critical_mass_threshold(p, b))
}

const BISECTION_TOL: f64 = 1e-10;
const BISECTION_MAX_ITERS: u32 = 100;

/// The minimal extension mass `R_{b,c_beta}(p, l) = min { q in [p, 1] :
/// 1 - c_beta >= Psi(p, q; b, l) }`.
///
/// Computed by bisection, which converges because Psi is nonincreasing in q
/// on [p, 1] and vanishes at q = 1 (so the feasible set is nonempty).
/// Absolute tolerance 1e-10.
pub fn min_extension_mass(p: f64, l: u32, b: u32, c_beta: f64) -> Result<f64> {
    validate_unit("p", p)?;
    validate_unit("c_beta", c_beta)?;
    validate_b_l(b, l)?;
    let target = 1.0 - c_beta;
    if psi(p, p, b, l)? <= target {
        return Ok(p);
    }
    // Invariant: Psi(lo) > target >= Psi(hi).
    let mut lo = p;
    let mut hi = 1.0;
    let mut iters = 0;
    while hi - lo > BISECTION_TOL && iters < BISECTION_MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        if psi(p, mid, b, l)? <= target {
            hi = mid;
        } else {
            lo = mid;
        }
        iters += 1;
    }
    Ok(hi)
}

fn binomial_u128(n: u32, k: u32) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 1..=k as u128 {
        c = c * (n as u128 - k as u128 + i) / i;
    }
    c
}

/// Independent oracle for Psi: sums the trinomial pmf with cell probabilities
/// `(p_m, 1 - p_m - p_o, p_o)` over all count vectors `(n1, n2, n3)` with
/// `n1 >= 1`, `n2 >= 1`, `n3 <= l - 1`. Coefficients are exact integer
/// binomial products, so `trinomial_event_probability(p_m, p_o, b, l)` equals
/// `psi(p_m, p_m + p_o, b, l)` up to rounding.
pub fn trinomial_event_probability(p_m: f64, p_o: f64, b: u32, l: u32) -> Result<f64> {
    validate_b_l(b, l)?;
    if !p_m.is_finite() || !p_o.is_finite() || p_m < 0.0 || p_o < 0.0 || p_m + p_o > 1.0 + 1e-12 {
        return Err(Error::invalid_input(format!(
            "(p_m, p_o) = ({p_m}, {p_o}) is not a valid point of the probability simplex"
        )));
    }
    let p_n = (1.0 - p_m - p_o).max(0.0);
    let mut total = 0.0;
    for n1 in 1..=b {
        for n2 in 1..=(b - n1) {
            let n3 = b - n1 - n2;
            if n3 > l - 1 {
                continue;
            }
            let coeff = (binomial_u128(b, n1) * binomial_u128(b - n1, n2)) as f64;
            total += coeff * pow0(p_m, n1) * pow0(p_n, n2) * pow0(p_o, n3);
        }
    }
    Ok(total)
}

/// One row of an `R` sweep.
#[derive(Debug, Clone, Copy)]
pub struct RCurvePoint {
    pub p: f64,
    pub l: u32,
    pub r: f64,
}

/// Sweeps `R_{b,c_beta}(p, l)` over a uniform p-grid for each requested `l`.
/// Rows are sorted by `(l, p)`.
pub fn r_curve(b: u32, l_list: &[u32], c_beta: f64, p_steps: usize) -> Result<Vec<RCurvePoint>> {
    if p_steps < 2 {
        return Err(Error::invalid_input("p-steps must be at least 2"));
    }
    if l_list.is_empty() {
        return Err(Error::invalid_input("at least one l value is required"));
    }
    let mut ls = l_list.to_vec();
    ls.sort_unstable();
    ls.dedup();
    let mut rows = Vec::with_capacity(ls.len() * p_steps);
    for &l in &ls {
        for i in 0..p_steps {
            let p = i as f64 / (p_steps - 1) as f64;
            rows.push(RCurvePoint {
                p,
                l,
                r: min_extension_mass(p, l, b, c_beta)?,
            });
        }
    }
    Ok(rows)
}

/// One row of the critical-mass sweep: the largest `1 - c_beta` for which
/// concentration at reference mass `p` is still strict.
#[derive(Debug, Clone, Copy)]
pub struct CriticalMassPoint {
    pub p: f64,
    pub threshold: f64,
}

pub fn critical_mass_curve(b: u32, p_steps: usize) -> Result<Vec<CriticalMassPoint>> {
    if p_steps < 2 {
        return Err(Error::invalid_input("p-steps must be at least 2"));
    }
    validate_b_l(b, 1)?;
    Ok((0..p_steps)
        .map(|i| {
            let p = i as f64 / (p_steps - 1) as f64;
            CriticalMassPoint {
                p,
                threshold: critical_mass_threshold(p, b),
            }
        })
        .collect())
}

/// One row of a fixed-p Psi sweep over q.
#[derive(Debug, Clone, Copy)]
pub struct PsiSweepPoint {
    pub p: f64,
    pub q: f64,
    pub psi: f64,
}

pub fn psi_sweep(p: f64, b: u32, l: u32, q_steps: usize) -> Result<Vec<PsiSweepPoint>> {
    if q_steps < 2 {
        return Err(Error::invalid_input("q-steps must be at least 2"));
    }
    validate_unit("p", p)?;
    let mut rows = Vec::with_capacity(q_steps);
    for i in 0..q_steps {
        let q = p + (1.0 - p) * i as f64 / (q_steps - 1) as f64;
        rows.push(PsiSweepPoint {
            p,
            q,
            psi: psi(p, q, b, l)?,
        });
    }
    Ok(rows)
}

/// Sample counts and seed for the Monte Carlo validation run.
#[derive(Debug, Clone, Copy)]
pub struct MonteCarloConfig {
    /// Number of independent b-samples used to estimate c_beta.
    pub connectivity_samples: usize,
    /// Number of draws used to estimate the reference and extension masses.
    pub mass_samples: usize,
    pub seed: u64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            connectivity_samples: 100_000,
            mass_samples: 100_000,
            seed: 0,
        }
    }
}

/// Estimates and residuals from one Monte Carlo validation of the
/// connectivity bound `1 - c_beta >= Psi(p, q; b, l)`.
#[derive(Debug, Clone, Copy)]
pub struct TheoremCheck {
    pub c_beta_hat: f64,
    pub c_beta_se: f64,
    pub p_hat: f64,
    pub p_se: f64,
    pub q_hat: f64,
    pub q_se: f64,
    pub psi_value: f64,
    /// `(1 - c_beta_hat) - psi_value`; nonnegative up to sampling noise.
    pub slack: f64,
    /// Combined standard error of the slack (connectivity SE plus the mass
    /// SEs propagated through Psi).
    pub sigma: f64,
    /// True iff `slack >= -3 * sigma`.
    pub inequality_holds: bool,
}

/// Validates the connectivity bound on a samplable measure against a union of
/// closed balls of the given radius around `anchors` (the reference set),
/// extended by `l * beta`.
///
/// c_beta is the fraction of `connectivity_samples` i.i.d. b-samples that are
/// beta-connected; the masses are empirical fractions over `mass_samples`
/// draws. Sample counts of at least 1e4 are recommended for the standard
/// errors to be meaningful. Trials derive per-index seeds, so results are
/// independent of thread count.
pub fn monte_carlo_theorem1(
    dist: &DistributionSpec,
    anchors: &PointCloud,
    radius: f64,
    b: u32,
    l: u32,
    beta: f64,
    cfg: &MonteCarloConfig,
) -> Result<TheoremCheck> {
    dist.validate()?;
    validate_b_l(b, l)?;
    if b < 2 {
        return Err(Error::invalid_input("connectivity of a b-sample needs b >= 2"));
    }
    if dist.dim() != anchors.dim() {
        return Err(Error::invalid_input(format!(
            "distribution dimension {} does not match anchor dimension {}",
            dist.dim(),
            anchors.dim()
        )));
    }
    if !radius.is_finite() || radius < 0.0 {
        return Err(Error::invalid_input("reference radius must be nonnegative"));
    }
    if !beta.is_finite() || beta <= 0.0 {
        return Err(Error::invalid_input("beta must be positive"));
    }
    if cfg.connectivity_samples < 2 || cfg.mass_samples < 2 {
        return Err(Error::invalid_input("sample counts must be at least 2"));
    }

    let n_c = cfg.connectivity_samples;
    let connected: u64 = (0..n_c as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(cfg.seed, 1, t));
            let pts: Vec<Vec<f64>> = (0..b).map(|_| dist.sample(&mut rng)).collect();
            let cloud = PointCloud::new(pts).expect("synthetic samples are finite");
            u64::from(is_beta_connected(&cloud, beta).expect("beta validated"))
        })
        .sum();

    let ext = radius + l as f64 * beta;
    let n_m = cfg.mass_samples;
    let (in_m, in_ext) = (0..n_m as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(cfg.seed, 2, t));
            let z = dist.sample(&mut rng);
            let d = anchors
                .points()
                .iter()
                .map(|a| euclidean(&z, a))
                .fold(f64::INFINITY, f64::min);
            (u64::from(d <= radius), u64::from(d <= ext))
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));

    let c_hat = connected as f64 / n_c as f64;
    let p_hat = in_m as f64 / n_m as f64;
    let q_hat = in_ext as f64 / n_m as f64;
    let psi_value = psi(p_hat, q_hat, b, l)?;

    let c_se = (c_hat * (1.0 - c_hat) / n_c as f64).sqrt();
    let p_se = (p_hat * (1.0 - p_hat) / n_m as f64).sqrt();
    let q_se = (q_hat * (1.0 - q_hat) / n_m as f64).sqrt();

    // Propagate mass noise through Psi via central differences.
    let h = 1e-6;
    let dpsi_dp = {
        let lo = (p_hat - h).max(0.0);
        let hi = (p_hat + h).min(q_hat);
        if hi > lo {
            (psi(hi, q_hat, b, l)? - psi(lo, q_hat, b, l)?) / (hi - lo)
        } else {
            0.0
        }
    };
    let dpsi_dq = {
        let lo = (q_hat - h).max(p_hat);
        let hi = (q_hat + h).min(1.0);
        if hi > lo {
            (psi(p_hat, hi, b, l)? - psi(p_hat, lo, b, l)?) / (hi - lo)
        } else {
            0.0
        }
    };

    let sigma = (c_se * c_se + (dpsi_dp * p_se).powi(2) + (dpsi_dq * q_se).powi(2)).sqrt();
    let slack = (1.0 - c_hat) - psi_value;
    Ok(TheoremCheck {
        c_beta_hat: c_hat,
        c_beta_se: c_se,
        p_hat,
        p_se,
        q_hat,
        q_se,
        psi_value,
        slack,
        sigma,
        inequality_holds: slack >= -3.0 * sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triples(ts: &[(u32, u32, u32)]) -> Vec<IndexTriple> {
        ts.iter().map(|&(u, v, w)| IndexTriple { u, v, w }).collect()
    }

    #[test]
    fn index_set_enumerations() {
        assert_eq!(index_set(2, 1), triples(&[(1, 1, 0)]));
        assert_eq!(index_set(4, 1), triples(&[(1, 3, 0), (2, 2, 0), (3, 1, 0)]));
        assert_eq!(index_set(3, 2), triples(&[(1, 1, 1), (1, 2, 0), (2, 1, 0)]));
        assert!(index_set(1, 3).is_empty());
    }

    #[test]
    fn psi_vanishes_at_q_one() {
        for &(p, b, l) in &[(0.0, 4, 1), (0.3, 7, 2), (1.0, 3, 5)] {
            assert_eq!(psi(p, 1.0, b, l).unwrap(), 0.0);
        }
    }

    #[test]
    fn psi_frozen_value() {
        // Term-by-term enumeration over I(4, 1) gives exactly 847/5000.
        let v = psi(0.1, 0.3, 4, 1).unwrap();
        assert!((v - 0.1694).abs() < 1e-15, "{v}");
    }

    #[test]
    fn psi_diagonal_matches_critical_mass_threshold() {
        for &(p, b) in &[(0.2, 5), (0.5, 8), (0.9, 3)] {
            let lhs = psi(p, p, b, 4).unwrap();
            let rhs = critical_mass_threshold(p, b);
            assert!((lhs - rhs).abs() < 1e-14);
        }
    }

    #[test]
    fn psi_rejects_p_above_q() {
        assert!(psi(0.4, 0.3, 4, 1).is_err());
    }

    #[test]
    fn psi_rejects_out_of_range() {
        assert!(psi(-0.1, 0.5, 4, 1).is_err());
        assert!(psi(0.1, 1.5, 4, 1).is_err());
        assert!(psi(0.1, 0.5, 0, 1).is_err());
        assert!(psi(0.1, 0.5, 65, 1).is_err());
        assert!(psi(0.1, 0.5, 4, 0).is_err());
    }

    #[test]
    fn rewrites_agree_with_direct() {
        let (a, b_, c) = psi_rewrite_check(0.1, 0.3, 4, 1).unwrap();
        assert!((a - 0.1694).abs() < 1e-15);
        assert!((b_ - a).abs() < 1e-15);
        assert!((c - a).abs() < 1e-15);

        let (a, b_, c) = psi_rewrite_check(0.2, 0.5, 8, 3).unwrap();
        assert!((a - 0.489548).abs() < 1e-12, "{a}");
        assert!((b_ - a).abs() < 1e-13);
        assert!((c - a).abs() < 1e-13);

        let (a, b_, c) = psi_rewrite_check(0.7, 1.0, 6, 2).unwrap();
        assert_eq!((a, b_, c), (0.0, 0.0, 0.0));
    }

    #[test]
    fn critical_mass_examples() {
        assert!(!critical_mass_holds(0.0, 8, 0.5).unwrap());
        assert!(critical_mass_holds(0.5, 8, 0.5).unwrap());
        assert!(!critical_mass_holds(1.0, 8, 0.5).unwrap());
        assert!((critical_mass_threshold(0.5, 8) - 0.9921875).abs() < 1e-15);
    }

    #[test]
    fn min_extension_mass_boundary_cases() {
        assert_eq!(min_extension_mass(0.3, 1, 8, 0.0).unwrap(), 0.3);
        assert_eq!(min_extension_mass(0.5, 1, 8, 1.0).unwrap(), 1.0);
        assert_eq!(min_extension_mass(0.0, 2, 8, 1.0).unwrap(), 0.0);
        assert_eq!(min_extension_mass(1.0, 2, 8, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn min_extension_mass_frozen_value() {
        // Root of (p + 1 - q)^8 - (1 - q)^8 - p^8 = 0.1 at p = 0.1.
        let r = min_extension_mass(0.1, 1, 8, 0.9).unwrap();
        assert!((r - 0.310352436438111).abs() < 1e-9, "{r}");
        // Re-verify against the defining inequality on both sides.
        assert!(psi(0.1, r + 1e-8, 8, 1).unwrap() <= 0.1);
        assert!(psi(0.1, r - 1e-8, 8, 1).unwrap() > 0.1);
    }

    #[test]
    fn trinomial_oracle_matches_psi() {
        let t = trinomial_event_probability(0.1, 0.2, 4, 1).unwrap();
        assert!((t - 0.1694).abs() < 1e-15);
        let direct = psi(0.1, 0.1 + 0.2, 4, 1).unwrap();
        assert!((t - direct).abs() < 1e-15);
    }

    #[test]
    fn trinomial_binomial_reduction() {
        for &pm in &[0.1, 0.4, 0.9] {
            let t = trinomial_event_probability(pm, 0.0, 8, 1).unwrap();
            let expect = 1.0 - pm.powi(8) - (1.0 - pm).powi(8);
            assert!((t - expect).abs() < 1e-14);
        }
        assert_eq!(trinomial_event_probability(0.0, 0.3, 6, 2).unwrap(), 0.0);
    }

    #[test]
    fn trinomial_rejects_invalid_simplex() {
        assert!(trinomial_event_probability(0.7, 0.5, 4, 1).is_err());
        assert!(trinomial_event_probability(-0.1, 0.2, 4, 1).is_err());
    }

    #[test]
    fn r_curve_rows_sorted_and_monotone() {
        let rows = r_curve(8, &[2, 1], 0.9, 11).unwrap();
        assert_eq!(rows.len(), 22);
        assert!(rows.windows(2).all(|w| (w[0].l, w[0].p) <= (w[1].l, w[1].p)));
        for w in rows.windows(2) {
            if w[0].l == w[1].l {
                assert!(w[0].r <= w[1].r + 1e-12);
            }
        }
    }

    #[test]
    fn point_mass_monte_carlo() {
        let dist = DistributionSpec::PointMass { point: vec![0.5, 0.5] };
        let anchors = PointCloud::new(vec![vec![0.5, 0.5]]).unwrap();
        let check = monte_carlo_theorem1(
            &dist,
            &anchors,
            0.1,
            4,
            1,
            0.5,
            &MonteCarloConfig { connectivity_samples: 100, mass_samples: 100, seed: 1 },
        )
        .unwrap();
        assert_eq!(check.c_beta_hat, 1.0);
        assert_eq!(check.p_hat, 1.0);
        assert_eq!(check.q_hat, 1.0);
        assert_eq!(check.psi_value, 0.0);
        assert!(check.inequality_holds);
    }

    #[test]
    fn monte_carlo_rejects_dimension_mismatch() {
        let dist = DistributionSpec::Gaussian { mean: vec![0.0, 0.0], std: 1.0 };
        let anchors = PointCloud::new(vec![vec![0.0]]).unwrap();
        assert!(monte_carlo_theorem1(&dist, &anchors, 1.0, 4, 1, 0.5, &MonteCarloConfig::default()).is_err());
    }
}
