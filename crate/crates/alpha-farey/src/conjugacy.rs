//! The conjugating homeomorphism `theta` between each alpha-Farey system and
//! the tent system: `theta o F_alpha = T o theta`.
//!
//! For `x = [l1, l2, ...]` the series is `theta(x) = -2 sum_k (-1)^k
//! 2^{-(l1+..+lk)}`, an alternating series whose remainder after k terms is at
//! most `2^{-(l1+..+lk)}`. It equals the distribution function of the measure
//! of maximal entropy, which puts mass `2^{-n}` on every level-n Farey
//! cylinder; inversion therefore descends the cylinder tree, halving an exact
//! dyadic bracket at every level.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::codec::{
    farey_cylinder, luroth_digits, luroth_digits_exact, CylinderInterval, FareyWord, LurothDigits,
    ValueWithError,
};
use crate::dynamics::{farey_digit_step, tent};
use crate::error::{Error, Result};
use crate::partition::Partition;

/// A theta evaluation with certified truncation error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ThetaValue {
    pub value: f64,
    pub error_bound: f64,
    pub terms_used: usize,
}

impl ThetaValue {
    /// Whether the certified bound meets a requested tolerance.
    pub fn meets(&self, tol: f64) -> bool {
        self.error_bound <= tol
    }
}

/// Right-to-left evaluation of `theta` on a digit prefix:
/// `theta([l | rest]) = 2^{1-l} - 2^{-l} theta(rest)`.
fn theta_horner(digits: &[u64], terminal: f64) -> f64 {
    let mut v = terminal;
    for &l in digits.iter().rev() {
        let p = (-(l as f64)).exp2();
        v = 2.0 * p - p * v;
    }
    v
}

fn check_horizon(p: &Partition, digits: &[u64]) -> Result<()> {
    for &l in digits {
        if l == 0 || l > p.horizon() {
            return Err(Error::BeyondHorizon { n: l, horizon: p.horizon() });
        }
    }
    Ok(())
}

/// Evaluate `theta` on a digit sequence.
///
/// Finite and eventually periodic digits evaluate in closed form with error
/// bound 0. Truncated digits consume digits until the alternating-series
/// remainder drops below `target_error` or the digits run out; in the latter
/// case the result carries the (larger) achieved bound rather than failing.
pub fn theta(p: &Partition, d: &LurothDigits, target_error: f64) -> Result<ThetaValue> {
    match d {
        LurothDigits::Finite(v) => {
            check_horizon(p, v)?;
            Ok(ThetaValue { value: theta_horner(v, 0.0), error_bound: 0.0, terms_used: v.len() })
        }
        LurothDigits::EventuallyPeriodic { pre, period } => {
            check_horizon(p, pre)?;
            check_horizon(p, period)?;
            let c0 = theta_horner(period, 0.0);
            let c1 = theta_horner(period, 1.0) - c0;
            let cycle = c0 / (1.0 - c1);
            Ok(ThetaValue {
                value: theta_horner(pre, cycle),
                error_bound: 0.0,
                terms_used: pre.len() + period.len(),
            })
        }
        LurothDigits::Truncated(v) => {
            check_horizon(p, v)?;
            let mut sum: u64 = 0;
            let mut k = 0usize;
            for &l in v {
                sum += l;
                k += 1;
                if (-(sum as f64)).exp2() <= target_error {
                    break;
                }
            }
            let error_bound = (-(sum as f64)).exp2();
            Ok(ThetaValue { value: theta_horner(&v[..k], 0.0), error_bound, terms_used: k })
        }
    }
}

/// Exact rational `theta` for finite or eventually periodic digits.
pub fn theta_exact(d: &LurothDigits) -> Result<BigRational> {
    fn horner(digits: &[u64], terminal: BigRational) -> Result<BigRational> {
        let mut v = terminal;
        for &l in digits.iter().rev() {
            if l > 100_000 {
                return Err(Error::Numerical(format!("digit {l} too large for exact theta")));
            }
            let p = BigRational::new(BigInt::one(), BigInt::from(2u8).pow(l as u32));
            v = &p * BigRational::from_integer(BigInt::from(2)) - p * v;
        }
        Ok(v)
    }
    match d {
        LurothDigits::Finite(v) => horner(v, BigRational::zero()),
        LurothDigits::EventuallyPeriodic { pre, period } => {
            let c0 = horner(period, BigRational::zero())?;
            let c1 = horner(period, BigRational::one())? - &c0;
            let cycle = c0 / (BigRational::one() - c1);
            horner(pre, cycle)
        }
        LurothDigits::Truncated(_) => {
            Err(Error::Precondition("exact theta needs finite or periodic digits".into()))
        }
    }
}

/// `theta` at a real point, extracting digits first (exact-rational extraction
/// when the partition supports it, float extraction capped at depth otherwise).
///
/// A digit beyond the partition horizon stops the extraction instead of
/// failing: the unresolved theta mass past such a digit is below
/// `2^{-horizon}` and the truncation bound already covers it.
pub fn theta_at(p: &Partition, x: f64, depth: usize, target_error: f64) -> Result<ThetaValue> {
    if x == 0.0 {
        return Ok(ThetaValue { value: 0.0, error_bound: 0.0, terms_used: 0 });
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfDomain { value: x, domain: "[0, 1]" });
    }
    let (digits, horizon_stopped) = if p.has_exact_tails() {
        let xr = BigRational::from_float(x).ok_or(Error::OutOfDomain { value: x, domain: "finite reals" })?;
        extract_capped_exact(p, &xr, depth.max(1))?
    } else {
        extract_capped_float(p, x, depth.clamp(1, crate::codec::FLOAT_DEPTH_CAP))?
    };
    let mut t = theta(p, &digits, target_error)?;
    if horizon_stopped {
        // the unresolved digit exceeds the horizon, so the remaining series
        // mass is below 2^{1 - S_k - horizon}
        let s_k: u64 = digits.iter().take(t.terms_used).sum();
        t.error_bound = t.error_bound.min((1.0 - s_k as f64 - p.horizon() as f64).exp2());
    }
    Ok(t)
}

fn extract_capped_exact(p: &Partition, x: &BigRational, depth: usize) -> Result<(LurothDigits, bool)> {
    match luroth_digits_exact(p, x, depth) {
        Ok(d) => Ok((d, false)),
        Err(Error::BeyondHorizon { .. }) => {
            // retry digit by digit, stopping at the unresolvable one
            let mut digits = Vec::new();
            let mut cur = x.clone();
            for _ in 0..depth {
                let n = match p.atom_index_exact(&cur) {
                    Ok(n) => n,
                    Err(Error::BeyondHorizon { .. }) => return Ok((LurothDigits::Truncated(digits), true)),
                    Err(e) => return Err(e),
                };
                let t = p.tail_exact(n).expect("exact tails checked by caller");
                digits.push(n);
                if cur == t {
                    return Ok((LurothDigits::Finite(digits), false));
                }
                let a = p.atom_exact(n).expect("exact tails checked by caller");
                cur = (t - cur) / a;
            }
            Ok((LurothDigits::Truncated(digits), false))
        }
        Err(e) => Err(e),
    }
}

fn extract_capped_float(p: &Partition, x: f64, depth: usize) -> Result<(LurothDigits, bool)> {
    match luroth_digits(p, x, depth) {
        Ok(d) => Ok((d, false)),
        Err(Error::BeyondHorizon { .. }) => {
            let mut digits = Vec::new();
            let mut cur = x;
            for _ in 0..depth {
                let n = match p.atom_index(cur) {
                    Ok(n) => n,
                    Err(_) => return Ok((LurothDigits::Truncated(digits), true)),
                };
                let t = p.tail_unchecked(n);
                digits.push(n);
                if cur == t {
                    return Ok((LurothDigits::Finite(digits), false));
                }
                cur = (t - cur) / p.atom_unchecked(n);
                if cur <= 0.0 {
                    return Ok((LurothDigits::Finite(digits), false));
                }
                if cur > 1.0 {
                    cur = 1.0;
                }
            }
            Ok((LurothDigits::Truncated(digits), false))
        }
        Err(e) => Err(e),
    }
}

/// Result of descending the cylinder tree to invert `theta`.
#[derive(Debug, Clone, Serialize)]
pub struct ThetaInverse {
    pub word: FareyWord,
    pub interval: CylinderInterval,
    /// Exact dyadic bracket `[lo, hi]` with `theta(interval) = [lo, hi]` and
    /// `lo <= y <= hi`; `hi - lo = 2^{-depth}`.
    pub theta_lo: f64,
    pub theta_hi: f64,
}

/// Invert `theta` by descending the Farey cylinder tree to `depth` levels.
///
/// Every level halves the exact dyadic theta-bracket; the child is chosen by
/// comparing `y` against the theta-image of the shared child endpoint, which
/// is exactly the bracket midpoint. Ties at dyadic `y` resolve to the left
/// cylinder. The orientation of the bit choice follows the endpoint parity
/// rule: `[blocks]` is the left endpoint iff the block count is even.
pub fn theta_inverse(p: &Partition, y: f64, depth: u32) -> Result<ThetaInverse> {
    if !(0.0..=1.0).contains(&y) {
        return Err(Error::OutOfDomain { value: y, domain: "[0, 1]" });
    }
    if depth == 0 || depth as u64 > p.horizon() {
        return Err(Error::Precondition(format!("depth must be in 1..={}", p.horizon())));
    }
    let y_exact = BigRational::from_float(y).ok_or(Error::OutOfDomain { value: y, domain: "finite reals" })?;
    // bracket [c/2^n, (c+1)/2^n]
    let mut c = BigInt::zero();
    let mut blocks: Vec<u64> = Vec::new();
    let mut m: u64 = 0;
    let mut bits = Vec::with_capacity(depth as usize);
    for level in 0..depth {
        let mid = BigRational::new(&c * 2 + 1, BigInt::from(2u8).pow(level + 1));
        let go_left = y_exact <= mid;
        let bit = blocks.len().is_multiple_of(2) != go_left; // left child is bit 0 iff block count even
        bits.push(bit);
        if bit {
            blocks.push(m + 1);
            m = 0;
        } else {
            m += 1;
        }
        c = &c * 2 + if go_left { 0 } else { 1 };
    }
    let word = FareyWord::finite(bits);
    let interval = farey_cylinder(p, &word)?;
    let denom = (depth as f64).exp2();
    let lo = c.to_f64().unwrap_or(0.0) / denom;
    Ok(ThetaInverse { word, interval, theta_lo: lo, theta_hi: lo + 1.0 / denom })
}

/// Log of the maximal-entropy mass of a cylinder word: `-|w| log 2`.
pub fn mu_cylinder(w: &FareyWord) -> Result<f64> {
    if !w.is_finite() || w.bits().is_empty() {
        return Err(Error::Precondition("mu_cylinder needs a nonempty finite word".into()));
    }
    Ok(-(w.len() as f64) * std::f64::consts::LN_2)
}

/// `mu_alpha([a, b)) = theta(b) - theta(a)` with combined error bounds.
pub fn mu_interval(p: &Partition, a: f64, b: f64, depth: usize) -> Result<ValueWithError> {
    if a > b {
        return Err(Error::Precondition(format!("need a <= b, got {a} > {b}")));
    }
    let tol = 0.0; // consume as many digits as depth allows
    let ta = theta_at(p, a, depth, tol)?;
    let tb = theta_at(p, b, depth, tol)?;
    Ok(ValueWithError { value: tb.value - ta.value, error_bound: ta.error_bound + tb.error_bound })
}

/// Maximum conjugacy residual `|theta(F_alpha(x)) - T(theta(x))|` along the
/// orbit coded by `d`, over `n_steps` Farey steps.
pub fn check_conjugacy(p: &Partition, d: &LurothDigits, n_steps: u64) -> Result<f64> {
    let tol = 1e-12;
    let mut cur = d.clone();
    let mut max_residual = 0.0f64;
    for step in 0..n_steps {
        let here = theta(p, &cur, tol)?;
        let next = match farey_digit_step(&cur) {
            Some(n) => n,
            None => {
                return Err(Error::InsufficientDigits { needed: n_steps, available: step });
            }
        };
        let there = theta(p, &next, tol)?;
        let residual = (there.value - tent(here.value.clamp(0.0, 1.0))).abs();
        max_residual = max_residual.max(residual);
        cur = next;
    }
    Ok(max_residual)
}

/// Cross-partition conjugacy `theta_dst^{-1} o theta_src` applied to the point
/// with digits `d` under `p_src`. The result `x'` satisfies
/// `|theta_dst(x') - theta_src(x)| <= 2^{-depth+1}`.
pub fn conjugate_between(
    p_src: &Partition,
    p_dst: &Partition,
    d: &LurothDigits,
    depth: u32,
) -> Result<f64> {
    let target = (-(depth as f64) - 1.0).exp2();
    let y = theta(p_src, d, target)?;
    let y_val = y.value.clamp(0.0, 1.0);
    let inv = theta_inverse(p_dst, y_val, depth)?;
    Ok(0.5 * (inv.interval.left + inv.interval.right))
}
