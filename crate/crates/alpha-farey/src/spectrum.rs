//! Free-energy functions of the alpha-Farey system and the Legendre-transform
//! dimension spectrum of Lyapunov level sets.
//!
//! `v(u) = inf { r : sum_n a_n^u e^{-rn} <= 1 }` and its dual `t(v)` are
//! computed by bisection on certified pressure sums: partitions with exactly
//! geometric atom tails close their remainder in closed form, power-law tails
//! use exact integrable envelopes. The spectrum value is
//! `sigma(s) = inf_u { u + v(u)/s }`, minimized by golden section under a
//! pre-scan guard; all levels are in nats.

use std::collections::HashMap;

use serde::Serialize;

use crate::codec::ValueWithError;
use crate::error::{Error, Result};
use crate::partition::{Family, Partition, TailClass, TailModel};

const LN2: f64 = std::f64::consts::LN_2;
const SUM_TOL: f64 = 1e-13;
const BISECT_TOL: f64 = 1e-13;
const GOLDEN_TOL: f64 = 1e-10;

/// How the atom sequence behaves past a starting index.
enum AtomTail {
    /// `a_n = C rho^{-n}` exactly for n >= start.
    ExactGeometric { start: u64, log_c: f64, rho: f64 },
    /// `a_n = C (n^{-tau} - (n+1)^{-tau})` for n >= start, so
    /// `C tau (n+1)^{-(tau+1)} <= a_n <= C tau n^{-(tau+1)}`.
    Power { start: u64, log_c: f64, tau: f64 },
}

fn atom_tail(p: &Partition) -> AtomTail {
    match p.family() {
        Family::Dyadic => AtomTail::ExactGeometric { start: 1, log_c: 0.0, rho: 2.0 },
        Family::Geometric { tau } => {
            AtomTail::ExactGeometric { start: 1, log_c: (tau - 1.0).ln(), rho: *tau }
        }
        Family::Harmonic => AtomTail::Power { start: 1, log_c: 0.0, tau: 1.0 },
        Family::PowerLaw { tau } => AtomTail::Power { start: 1, log_c: 0.0, tau: *tau },
        Family::Custom { tails, model } => {
            let k = tails.len() as u64;
            let t_k = tails[tails.len() - 1];
            match model {
                TailModel::GeometricRatio(rho) => AtomTail::ExactGeometric {
                    start: k,
                    // a_n = t_K (1 - 1/rho) rho^{K} rho^{-n} for n >= K
                    log_c: t_k.ln() + (1.0 - 1.0 / rho).ln() + k as f64 * rho.ln(),
                    rho: *rho,
                },
                TailModel::PowerExponent(tau) => AtomTail::Power {
                    start: k,
                    log_c: t_k.ln() + tau * (k as f64).ln(),
                    tau: *tau,
                },
            }
        }
    }
}

/// Outcome of a pressure-sum evaluation.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum SumOutcome {
    Converged { value: f64, tail_bound: f64, terms: u64 },
    Divergent,
}

impl SumOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            SumOutcome::Converged { value, .. } => Some(*value),
            SumOutcome::Divergent => None,
        }
    }
}

/// `sum_n a_n^u e^{-rn}` with a certified truncation bound at most `tol`, or
/// `Divergent` outside the convergence region.
pub fn partition_sum(p: &Partition, u: f64, r: f64, tol: f64) -> Result<SumOutcome> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::Precondition("tol must be positive".into()));
    }
    match atom_tail(p) {
        AtomTail::ExactGeometric { start, .. } => {
            // term ratio beyond `start` is exactly q = e^{-(u ln rho + r)}
            let (log_q, _) = geometric_log_q(p, u, r);
            if log_q >= 0.0 {
                return Ok(SumOutcome::Divergent);
            }
            let q = log_q.exp();
            let explicit = start + 63;
            let mut sum = 0.0;
            for n in 1..=explicit {
                sum += (u * p.log_atom_unchecked(n) - r * n as f64).exp();
            }
            let first_tail = (u * p.log_atom_unchecked(explicit + 1) - r * (explicit + 1) as f64).exp();
            let remainder = first_tail / (1.0 - q);
            sum += remainder;
            Ok(SumOutcome::Converged {
                value: sum,
                tail_bound: (remainder * 1e-14).max(f64::MIN_POSITIVE),
                terms: explicit,
            })
        }
        AtomTail::Power { start, log_c, tau } => {
            let beta = (tau + 1.0) * u;
            if r < 0.0 || (r == 0.0 && beta <= 1.0) {
                return Ok(SumOutcome::Divergent);
            }
            power_tail_sum(p, u, r, tol, start, log_c, tau, beta)
        }
    }
}

fn geometric_log_q(p: &Partition, u: f64, r: f64) -> (f64, f64) {
    match atom_tail(p) {
        AtomTail::ExactGeometric { rho, log_c, .. } => (-(u * rho.ln() + r), log_c),
        AtomTail::Power { .. } => unreachable!("geometric tails only"),
    }
}

#[allow(clippy::too_many_arguments)]
fn power_tail_sum(
    p: &Partition,
    u: f64,
    r: f64,
    tol: f64,
    start: u64,
    log_c: f64,
    tau: f64,
    beta: f64,
) -> Result<SumOutcome> {
    // envelope scale: a_n <= e^{log_env} tau n^{-(tau+1)} for n >= start
    let log_env = log_c + tau.ln();
    let max_terms: u64 = 20_000_000;
    // all the tail bounds below decrease in n, so if none of them reaches tol
    // at the term cap the loop cannot succeed: bail out without spinning
    {
        let cap = max_terms as f64;
        let env_cap = (u * log_env - beta * cap.ln() - r * cap).exp();
        let feasible = if r > 0.0 {
            let q_cap = (-r).exp() * ((cap + 2.0) / cap).powf(beta.abs());
            let ratio_ok = q_cap < 1.0 && env_cap / (1.0 - q_cap) <= tol;
            let int_ok = beta > 1.0
                && (-r * (cap + 1.0)).exp() * (u * log_env).exp() * cap.powf(1.0 - beta)
                    / (beta - 1.0)
                    <= tol;
            ratio_ok || int_ok
        } else {
            let scale = (u * log_env).exp();
            0.5 * scale * (cap.powf(1.0 - beta) - (cap + 2.0).powf(1.0 - beta)) / (beta - 1.0)
                <= tol
        };
        if !feasible {
            return Err(Error::Numerical(format!(
                "pressure sum at (u={u}, r={r}) cannot certify tol {tol} within {max_terms} terms"
            )));
        }
    }
    let mut sum = 0.0;
    let mut n = 0u64;
    let mut next_check = start + 9;
    loop {
        n += 1;
        if n > max_terms {
            return Err(Error::Numerical(format!(
                "pressure sum at (u={u}, r={r}) did not reach tol {tol} within {max_terms} terms"
            )));
        }
        sum += (u * p.log_atom_unchecked(n) - r * n as f64).exp();
        if n < next_check {
            continue;
        }
        // bound evaluations cost several transcendentals; amortize them
        next_check = n + (n / 8).max(1);
        // envelope value at n+1 (upper for u >= 0 uses n^{-beta}, for u < 0
        // the roles of the two envelope ends swap)
        let env_next = |m: u64| -> f64 {
            if u >= 0.0 {
                (u * log_env - beta * (m as f64).ln() - r * m as f64).exp()
            } else {
                (u * log_env - beta * (m as f64 + 1.0).ln() - r * m as f64).exp()
            }
        };
        if r > 0.0 {
            // rigorous term-ratio bound: q <= e^{-r} ((n+2)/n)^{|beta|}
            let q = (-r).exp() * ((n as f64 + 2.0) / n as f64).powf(beta.abs());
            if q < 1.0 {
                let bound = env_next(n + 1) / (1.0 - q);
                if bound <= tol {
                    return Ok(SumOutcome::Converged { value: sum, tail_bound: bound, terms: n });
                }
            }
            // integral bound is often tighter for tiny r and beta > 1
            if beta > 1.0 {
                let bound = (-r * (n as f64 + 1.0)).exp()
                    * (u * log_env).exp()
                    * (n as f64).powf(1.0 - beta)
                    / (beta - 1.0);
                if bound <= tol {
                    return Ok(SumOutcome::Converged { value: sum, tail_bound: bound, terms: n });
                }
            }
        } else {
            // r == 0, beta > 1: integral sandwich with midpoint correction
            let scale = (u * log_env).exp();
            let hi = scale * (n as f64).powf(1.0 - beta) / (beta - 1.0);
            let lo = scale * (n as f64 + 2.0).powf(1.0 - beta) / (beta - 1.0);
            let width = 0.5 * (hi - lo);
            if width <= tol {
                return Ok(SumOutcome::Converged {
                    value: sum + 0.5 * (hi + lo),
                    tail_bound: width,
                    terms: n,
                });
            }
        }
    }
}

/// A free-energy value; `boundary_branch` marks the infimum branch where no
/// interior root exists (power-law tails with the sum below 1 at r = 0).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FreeEnergyValue {
    pub value: f64,
    pub boundary_branch: bool,
}

/// Safeguarded false-position (Illinois) root finder on a certified bracket
/// with `f(lo) > 0 > f(hi)`; falls back to bisection steps whenever the
/// interpolant degenerates (e.g. an infinite endpoint value).
fn bracketed_root(
    mut f: impl FnMut(f64) -> Result<f64>,
    mut lo: f64,
    mut hi: f64,
    mut flo: f64,
    mut fhi: f64,
    tol: f64,
) -> Result<f64> {
    let mut side = 0i8;
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mut mid = (flo * hi - fhi * lo) / (flo - fhi);
        if !(mid > lo && mid < hi) || !mid.is_finite() {
            mid = 0.5 * (lo + hi);
        }
        let fm = f(mid)?;
        if fm > 0.0 {
            lo = mid;
            flo = fm;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = mid;
            fhi = fm;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Pressure sum for bisection sign tests: a coarse certified pass settles the
/// sign of `S - 1` away from the root cheaply, the full-tolerance pass only
/// runs near it.
fn sum_at(p: &Partition, u: f64, r: f64) -> Result<f64> {
    const COARSE: f64 = 1e-4;
    match partition_sum(p, u, r, COARSE)? {
        SumOutcome::Converged { value, tail_bound, .. } => {
            if (value - 1.0).abs() > tail_bound + COARSE {
                return Ok(value);
            }
        }
        SumOutcome::Divergent => return Ok(f64::INFINITY),
    }
    Ok(match partition_sum(p, u, r, SUM_TOL)? {
        SumOutcome::Converged { value, .. } => value,
        SumOutcome::Divergent => f64::INFINITY,
    })
}

/// `v(u) = inf { r : sum a_n^u e^{-rn} <= 1 }`, by bisection in r (the sum is
/// strictly decreasing in r). Power-law tails with the r = 0 sum below 1 take
/// the infimum branch and return exactly 0.
pub fn free_energy_v(p: &Partition, u: f64) -> Result<FreeEnergyValue> {
    if (u - 1.0).abs() <= 1e-12 {
        // sum a_n = 1 by definition, so the root sits at r = 0; within the
        // band the value differs by at most |v'| * 1e-12, below bisection
        // resolution (and for power-law tails the near-0 root is not
        // reachable by direct summation anyway)
        return Ok(FreeEnergyValue { value: 0.0, boundary_branch: false });
    }
    let (mut lo, mut lo_known_above): (f64, bool);
    let r_min: f64;
    match atom_tail(p) {
        AtomTail::ExactGeometric { rho, .. } => {
            r_min = -u * rho.ln();
            lo = f64::NAN;
            lo_known_above = false;
        }
        AtomTail::Power { .. } => {
            // Termwise a_n^u vs a_n settles the r = 0 sign without summing:
            // above 1 for u < 1 (root is interior), strictly below 1 for
            // u > 1. In the latter case r < 0 diverges, so the infimum branch
            // returns exactly 0.
            if u > 1.0 {
                return Ok(FreeEnergyValue { value: 0.0, boundary_branch: true });
            }
            r_min = 0.0;
            lo = 0.0;
            lo_known_above = true;
        }
    }
    // upper bracket: expand geometrically above r_min
    let mut span = 1.0f64;
    let mut hi = r_min + span;
    while sum_at(p, u, hi)? > 1.0 {
        span *= 2.0;
        hi = r_min + span;
        if span > 1e6 {
            return Err(Error::Numerical(format!("no upper bracket for v({u})")));
        }
    }
    // lower bracket for geometric tails: approach r_min until the sum exceeds 1
    if !lo_known_above {
        let mut delta = span / 2.0;
        loop {
            lo = r_min + delta;
            if lo < hi && sum_at(p, u, lo)? > 1.0 {
                lo_known_above = true;
                break;
            }
            if lo < hi {
                hi = lo; // still below 1: tighten from above
            }
            delta /= 4.0;
            if delta < 1e-14 {
                return Err(Error::Numerical(format!(
                    "sum never exceeds 1 approaching the convergence boundary for v({u})"
                )));
            }
        }
    }
    debug_assert!(lo_known_above);
    let flo = if lo == 0.0 { f64::INFINITY } else { sum_at(p, u, lo)? - 1.0 };
    let fhi = sum_at(p, u, hi)? - 1.0;
    let root = bracketed_root(|r| Ok(sum_at(p, u, r)? - 1.0), lo, hi, flo, fhi, BISECT_TOL)?;
    Ok(FreeEnergyValue { value: root, boundary_branch: false })
}

/// Dual free energy `t(v) = inf { u : sum a_n^u e^{-nv} <= 1 }`, by bisection
/// in u (the sum is strictly decreasing in u since every a_n < 1).
pub fn free_energy_t(p: &Partition, v: f64) -> Result<FreeEnergyValue> {
    if v.abs() <= 1e-12 && v >= 0.0 {
        // sum a_n^u at v = 0 strictly exceeds 1 for u < 1 and equals 1 at u = 1
        return Ok(FreeEnergyValue { value: 1.0, boundary_branch: false });
    }
    let u_min: Option<f64> = match atom_tail(p) {
        AtomTail::ExactGeometric { rho, .. } => Some(-v / rho.ln()),
        AtomTail::Power { tau, .. } => {
            if v < 0.0 {
                return Err(Error::Precondition(format!(
                    "sum diverges for every u when v = {v} < 0 under power-law tails"
                )));
            }
            if v == 0.0 {
                Some(1.0 / (tau + 1.0))
            } else {
                None
            }
        }
    };
    let s1 = sum_at(p, 1.0, v)?;
    if (s1 - 1.0).abs() <= 5e-11 {
        return Ok(FreeEnergyValue { value: 1.0, boundary_branch: false });
    }
    let base = u_min.unwrap_or(0.0);
    // upper bracket
    let mut span = 1.0f64;
    let mut hi = base + span;
    while sum_at(p, hi, v)? > 1.0 {
        span *= 2.0;
        hi = base + span;
        if span > 1e6 {
            return Err(Error::Numerical(format!("no upper bracket for t({v})")));
        }
    }
    // lower bracket
    let mut lo;
    match u_min {
        Some(m) => {
            let mut delta = span / 2.0;
            loop {
                lo = m + delta;
                if lo < hi && sum_at(p, lo, v)? > 1.0 {
                    break;
                }
                if lo < hi {
                    hi = lo;
                }
                delta /= 4.0;
                if delta < 1e-14 {
                    return Err(Error::Numerical(format!(
                        "sum never exceeds 1 approaching the convergence boundary for t({v})"
                    )));
                }
            }
        }
        None => {
            // v > 0 with power tails: every u converges, expand downward
            let mut step = 1.0f64;
            lo = 0.0;
            while sum_at(p, lo, v)? <= 1.0 {
                lo -= step;
                step *= 2.0;
                if step > 1e6 {
                    return Err(Error::Numerical(format!("no lower bracket for t({v})")));
                }
            }
        }
    }
    let flo = sum_at(p, lo, v)? - 1.0;
    let fhi = sum_at(p, hi, v)? - 1.0;
    let root = bracketed_root(|uu| Ok(sum_at(p, uu, v)? - 1.0), lo, hi, flo, fhi, BISECT_TOL)?;
    Ok(FreeEnergyValue { value: root, boundary_branch: false })
}

/// The admissible level range `[s_-, s_+]` with attainment witnesses.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SRange {
    pub s_minus: f64,
    pub s_plus: f64,
    /// Index attaining the infimum, `None` when it is only a limit.
    pub minus_attained: Option<u64>,
    pub plus_attained: Option<u64>,
}

/// `s_- = inf { -log(a_n)/n }`, `s_+ = sup { -log(a_n)/n }`: scan of the
/// first 10^4 indices combined with the analytic tail limit.
pub fn s_range(p: &Partition) -> SRange {
    let scan_to = 10_000u64.min(p.horizon());
    let mut min_v = f64::INFINITY;
    let mut min_at = 1u64;
    let mut max_v = f64::NEG_INFINITY;
    let mut max_at = 1u64;
    for n in 1..=scan_to {
        let f = -p.log_atom_unchecked(n) / n as f64;
        if f < min_v {
            min_v = f;
            min_at = n;
        }
        if f > max_v {
            max_v = f;
            max_at = n;
        }
    }
    let limit = match atom_tail(p) {
        AtomTail::ExactGeometric { rho, .. } => rho.ln(),
        AtomTail::Power { .. } => 0.0,
    };
    let (s_minus, minus_attained) =
        if limit < min_v { (limit, None) } else { (min_v, Some(min_at)) };
    let (s_plus, plus_attained) = if limit > max_v { (limit, None) } else { (max_v, Some(max_at)) };
    SRange { s_minus, s_plus, minus_attained, plus_attained }
}

/// One sample of the dimension spectrum.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpectrumPoint {
    pub s: f64,
    pub u_star: f64,
    pub v_at_u: f64,
    pub sigma: f64,
    pub boundary_branch: bool,
}

struct VCache<'a> {
    p: &'a Partition,
    memo: HashMap<u64, FreeEnergyValue>,
}

impl<'a> VCache<'a> {
    fn new(p: &'a Partition) -> Self {
        VCache { p, memo: HashMap::new() }
    }

    fn get(&mut self, u: f64) -> Result<FreeEnergyValue> {
        if let Some(v) = self.memo.get(&u.to_bits()) {
            return Ok(*v);
        }
        let v = free_energy_v(self.p, u)?;
        self.memo.insert(u.to_bits(), v);
        Ok(v)
    }
}

fn require_spectrum_hypotheses(p: &Partition) -> Result<()> {
    if p.is_dyadic() {
        return Err(Error::DyadicExcluded(
            "the dyadic partition has a degenerate one-point level range".into(),
        ));
    }
    let c = p.classify();
    match c.class {
        TailClass::Expanding { .. } | TailClass::Expansive { .. } => {}
        _ => {
            return Err(Error::Hypothesis(
                "spectrum requires an expanding or expansive partition".into(),
            ))
        }
    }
    if !c.eventually_decreasing {
        return Err(Error::Hypothesis("partition atoms must be eventually decreasing".into()));
    }
    Ok(())
}

/// Dimension spectrum sample `sigma(s) = inf_u { u + v(u)/s }` for
/// `s in (s_-, s_+)`.
///
/// A 50-point pre-scan brackets the minimum (expanding the u-window when the
/// argmin hits its edge, since the minimizer escapes to +-infinity near the
/// endpoints of the level range); golden section then refines to 1e-10 in u,
/// falling back to a fine grid if the scan is not unimodal.
pub fn legendre_sigma(p: &Partition, s: f64) -> Result<SpectrumPoint> {
    require_spectrum_hypotheses(p)?;
    let range = s_range(p);
    if s.is_nan() || s <= range.s_minus || s >= range.s_plus {
        return Err(Error::SOutOfRange { s, s_minus: range.s_minus, s_plus: range.s_plus });
    }
    let mut cache = VCache::new(p);
    let mut lo = -5.0f64;
    let mut hi = 5.0f64;
    let scan_points = 50usize;
    let (bracket_lo, bracket_hi);
    loop {
        let step = (hi - lo) / scan_points as f64;
        let mut best_i = 0usize;
        let mut best = f64::INFINITY;
        let mut values = Vec::with_capacity(scan_points + 1);
        for i in 0..=scan_points {
            let u = lo + i as f64 * step;
            let f = u + cache.get(u)?.value / s;
            values.push(f);
            if f < best {
                best = f;
                best_i = i;
            }
        }
        if best_i == 0 || best_i == scan_points {
            if hi - lo >= 128.0 {
                return Err(Error::Numerical(format!(
                    "Legendre minimizer escaped the u-window for s = {s}"
                )));
            }
            lo *= 2.0;
            hi *= 2.0;
            continue;
        }
        // unimodality guard: a second valley sends us to a fine grid
        let mut valleys = 0;
        for i in 1..values.len() - 1 {
            if values[i] < values[i - 1] && values[i] <= values[i + 1] {
                valleys += 1;
            }
        }
        if valleys > 1 {
            let fine = 1000usize;
            let fstep = (hi - lo) / fine as f64;
            let mut fbest_i = 0usize;
            let mut fbest = f64::INFINITY;
            for i in 0..=fine {
                let u = lo + i as f64 * fstep;
                let f = u + cache.get(u)?.value / s;
                if f < fbest {
                    fbest = f;
                    fbest_i = i;
                }
            }
            bracket_lo = lo + fbest_i.saturating_sub(1) as f64 * fstep;
            bracket_hi = lo + (fbest_i + 1).min(fine) as f64 * fstep;
        } else {
            bracket_lo = lo + (best_i - 1) as f64 * step;
            bracket_hi = lo + (best_i + 1) as f64 * step;
        }
        break;
    }
    // golden section on the bracket
    let gr = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut a = bracket_lo;
    let mut b = bracket_hi;
    let mut c = b - gr * (b - a);
    let mut d = a + gr * (b - a);
    let mut fc = c + cache.get(c)?.value / s;
    let mut fd = d + cache.get(d)?.value / s;
    while b - a > GOLDEN_TOL {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = c + cache.get(c)?.value / s;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = d + cache.get(d)?.value / s;
        }
    }
    let u_star = 0.5 * (a + b);
    let vv = cache.get(u_star)?;
    let sigma = (u_star + vv.value / s).clamp(0.0, 1.0);
    Ok(SpectrumPoint { s, u_star, v_at_u: vv.value, sigma, boundary_branch: vv.boundary_branch })
}

/// The dimension triple of the derivative sets.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ThetaDimensions {
    pub dim_theta_inf: f64,
    pub dim_theta_sim: f64,
    pub dim_theta_0: f64,
    pub at_log2: SpectrumPoint,
}

/// `dim Theta_inf = dim Theta_sim = sigma(log 2) < dim Theta_0 = 1`, for
/// non-dyadic expanding/expansive eventually-decreasing partitions whose
/// level range contains log 2.
pub fn theorem_dimensions(p: &Partition) -> Result<ThetaDimensions> {
    require_spectrum_hypotheses(p)?;
    let range = s_range(p);
    if LN2 <= range.s_minus || LN2 >= range.s_plus {
        return Err(Error::Hypothesis(format!(
            "level range ({:.6}, {:.6}) excludes log 2; the dimension identity does not apply",
            range.s_minus, range.s_plus
        )));
    }
    let at_log2 = legendre_sigma(p, LN2)?;
    if at_log2.sigma >= 1.0 - 1e-9 {
        return Err(Error::Numerical(format!(
            "strictness check failed: sigma(log 2) = {} is not < 1 - 1e-9",
            at_log2.sigma
        )));
    }
    Ok(ThetaDimensions {
        dim_theta_inf: at_log2.sigma,
        dim_theta_sim: at_log2.sigma,
        dim_theta_0: 1.0,
        at_log2,
    })
}

/// `K(tau) = -log(tau - 1) / log(2/tau)`: the digit-frequency threshold at
/// which the one-sided derivative factor of the untwisted conjugacy flips
/// between 0 and infinity.
pub fn pvb_threshold(tau: f64) -> Result<f64> {
    if !tau.is_finite() || tau <= 1.0 {
        return Err(Error::Precondition(format!("K(tau) needs tau > 1, got {tau}")));
    }
    if tau == 2.0 {
        return Err(Error::Hypothesis("tau = 2 is the dyadic case: log(2/tau) = 0 pole".into()));
    }
    Ok(-(tau - 1.0).ln() / (2.0 / tau).ln())
}

/// `log((2/tau)^q (tau-1))` for digit-frequency level `q`; its sign flips as
/// `q` crosses `K(tau)`.
pub fn pvb_discriminant(tau: f64, q: f64) -> f64 {
    q * (2.0 / tau).ln() + (tau - 1.0).ln()
}

/// The Lebesgue-typical level `s* = sum a_n log(1/a_n) / sum n a_n`, when the
/// mean digit `sum n a_n` is finite (`None` otherwise). At `s*` the spectrum
/// attains dimension 1.
pub fn typical_level(p: &Partition) -> Result<Option<ValueWithError>> {
    match atom_tail(p) {
        AtomTail::ExactGeometric { start, rho, .. } => {
            // close both sums exactly past the explicit prefix:
            // sum_{n>N} n x^n = x^{N+1}((N+1) - N x)/(1-x)^2
            let x = 1.0 / rho;
            let explicit = start + 32;
            let mut num = 0.0;
            let mut den = 0.0;
            for n in 1..=explicit {
                let a = p.atom_unchecked(n);
                num += a * (-p.log_atom_unchecked(n));
                den += n as f64 * a;
            }
            // a_n = C x^n beyond: tail of sum n a_n and of -sum a_n log a_n
            let log_a = |n: u64| p.log_atom_unchecked(n);
            let c_log = log_a(explicit + 1) + (explicit as f64 + 1.0) * rho.ln();
            let c = c_log.exp();
            let np1 = explicit as f64 + 1.0;
            let tail_n_xn = x.powf(np1) * (np1 - (np1 - 1.0) * x) / ((1.0 - x) * (1.0 - x));
            let tail_xn = x.powf(np1) / (1.0 - x);
            den += c * tail_n_xn;
            num += c * (rho.ln() * tail_n_xn - c_log * tail_xn);
            Ok(Some(ValueWithError { value: num / den, error_bound: 1e-12 }))
        }
        AtomTail::Power { tau, .. } => {
            if tau <= 1.0 {
                return Ok(None); // mean digit diverges
            }
            // direct sums with integral-envelope tail bounds on sum n a_n
            let mut num = 0.0;
            let mut den = 0.0;
            let cap = 2_000_000u64.min(p.horizon());
            for n in 1..=cap {
                let a = p.atom_unchecked(n);
                num += a * (-p.log_atom_unchecked(n));
                den += n as f64 * a;
            }
            // n a_n <= C tau n^{-tau}: tail <= C tau cap^{1-tau}/(tau-1)
            let den_bound = tau * (cap as f64).powf(1.0 - tau) / (tau - 1.0);
            let ratio = num / den;
            Ok(Some(ValueWithError {
                value: ratio,
                error_bound: (den_bound / den) * ratio.abs() + den_bound,
            }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geo_v_closed(u: f64, tau: f64) -> f64 {
        (1.0 + (tau - 1.0).powf(u)).ln() - u * tau.ln()
    }

    #[test]
    fn sum_basics() {
        for p in [
            Partition::dyadic(),
            Partition::harmonic(),
            Partition::geometric(3.0).unwrap(),
            Partition::power_law(1.5).unwrap(),
        ] {
            let s = partition_sum(&p, 1.0, 0.0, 1e-12).unwrap().value().unwrap();
            assert!((s - 1.0).abs() < 5e-11, "{p}: sum a_n = {s}");
        }
        // dyadic closed form q/(1-q)
        let d = Partition::dyadic();
        for (u, r) in [(0.7, 0.3), (1.5, -0.2), (0.0, 0.1)] {
            let q = (-(u * LN2 + r)).exp();
            if q < 1.0 {
                let s = partition_sum(&d, u, r, 1e-12).unwrap().value().unwrap();
                assert!((s - q / (1.0 - q)).abs() < 1e-10, "u={u} r={r}");
            }
        }
    }

    #[test]
    fn harmonic_u2_sum_matches_closed_form() {
        // telescoping: sum 1/(n(n+1))^2 = 2 zeta(2) - 3 = pi^2/3 - 3
        let h = Partition::harmonic();
        let s = partition_sum(&h, 2.0, 0.0, 1e-12).unwrap().value().unwrap();
        let closed = std::f64::consts::PI * std::f64::consts::PI / 3.0 - 3.0;
        assert!((s - closed).abs() < 1e-11, "{s} vs {closed}");
        assert!((s - 0.289868133696).abs() < 1e-11);
    }

    #[test]
    fn sum_divergence_tagging() {
        let h = Partition::harmonic();
        assert!(matches!(partition_sum(&h, 0.4, 0.0, 1e-10).unwrap(), SumOutcome::Divergent));
        assert!(matches!(partition_sum(&h, 2.0, -0.1, 1e-10).unwrap(), SumOutcome::Divergent));
        let g = Partition::geometric(3.0).unwrap();
        assert!(matches!(
            partition_sum(&g, 1.0, -3.0f64.ln() - 0.1, 1e-10).unwrap(),
            SumOutcome::Divergent
        ));
    }

    #[test]
    fn free_energy_closed_forms() {
        let d = Partition::dyadic();
        for i in 0..=40 {
            let u = -2.0 + i as f64 * 0.1;
            let v = free_energy_v(&d, u).unwrap().value;
            assert!((v - (1.0 - u) * LN2).abs() < 1e-10, "dyadic u={u}: {v}");
        }
        for tau in [1.5, 3.0] {
            let g = Partition::geometric(tau).unwrap();
            for i in 0..=40 {
                let u = -2.0 + i as f64 * 0.1;
                let v = free_energy_v(&g, u).unwrap().value;
                assert!((v - geo_v_closed(u, tau)).abs() < 1e-10, "geo({tau}) u={u}: {v}");
            }
        }
    }

    #[test]
    fn v_at_one_is_zero() {
        for p in [
            Partition::dyadic(),
            Partition::harmonic(),
            Partition::geometric(3.0).unwrap(),
            Partition::geometric(1.5).unwrap(),
            Partition::power_law(1.5).unwrap(),
        ] {
            let v = free_energy_v(&p, 1.0).unwrap();
            assert!(v.value.abs() <= 1e-12, "{p}: v(1) = {}", v.value);
        }
    }

    #[test]
    fn boundary_branch_for_power_law() {
        let h = Partition::harmonic();
        let v = free_energy_v(&h, 1.5).unwrap();
        assert_eq!(v.value, 0.0);
        assert!(v.boundary_branch);
        let v = free_energy_v(&h, 0.9).unwrap();
        assert!(v.value > 0.0 && !v.boundary_branch);
        // geometric tails always have an interior root
        let g = Partition::geometric(3.0).unwrap();
        let v = free_energy_v(&g, 1.5).unwrap();
        assert!(v.value < 0.0 && !v.boundary_branch);
    }

    #[test]
    fn v_monotone_convex() {
        for p in [Partition::harmonic(), Partition::geometric(3.0).unwrap()] {
            let us: Vec<f64> = (0..50).map(|i| -1.0 + i as f64 * (2.0 / 49.0)).collect();
            let vs: Vec<f64> = us.iter().map(|&u| free_energy_v(&p, u).unwrap().value).collect();
            for w in vs.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{p}: v must be nonincreasing");
            }
            for i in 1..vs.len() - 1 {
                let d2 = vs[i + 1] - 2.0 * vs[i] + vs[i - 1];
                assert!(d2 >= -1e-8, "{p}: convexity violated at {}", us[i]);
            }
        }
    }

    #[test]
    fn duality() {
        let d = Partition::dyadic();
        for v in [-0.5, 0.0, 0.3, 1.0] {
            let t = free_energy_t(&d, v).unwrap().value;
            assert!((t - (1.0 - v / LN2)).abs() < 1e-9, "dyadic t({v}) = {t}");
        }
        for p in [Partition::harmonic(), Partition::geometric(3.0).unwrap()] {
            for u in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let v = free_energy_v(&p, u).unwrap().value;
                let t = free_energy_t(&p, v).unwrap().value;
                assert!((t - u).abs() < 1e-8, "{p}: t(v({u})) = {t}");
            }
        }
        for p in [
            Partition::dyadic(),
            Partition::harmonic(),
            Partition::geometric(3.0).unwrap(),
        ] {
            assert!((free_energy_t(&p, 0.0).unwrap().value - 1.0).abs() < 1e-10, "{p}");
        }
        assert!(free_energy_t(&Partition::harmonic(), -0.1).is_err());
    }

    #[test]
    fn s_ranges() {
        let r = s_range(&Partition::harmonic());
        assert_eq!(r.s_minus, 0.0);
        assert!(r.minus_attained.is_none());
        assert!((r.s_plus - 6.0f64.ln() / 2.0).abs() < 1e-14);
        assert_eq!(r.plus_attained, Some(2));

        let r = s_range(&Partition::geometric(3.0).unwrap());
        assert!((r.s_minus - 1.5f64.ln()).abs() < 1e-14);
        assert_eq!(r.minus_attained, Some(1));
        assert!((r.s_plus - 3.0f64.ln()).abs() < 1e-12);
        assert!(r.plus_attained.is_none());

        let r = s_range(&Partition::geometric(1.5).unwrap());
        assert!((r.s_plus - 3.0f64.ln()).abs() < 1e-14);
        assert_eq!(r.plus_attained, Some(1));
        assert!((r.s_minus - 1.5f64.ln()).abs() < 1e-12);

        let r = s_range(&Partition::dyadic());
        assert!((r.s_minus - LN2).abs() < 1e-15 && (r.s_plus - LN2).abs() < 1e-15);
    }

    #[test]
    fn sigma_geometric3_at_log2() {
        let g = Partition::geometric(3.0).unwrap();
        let pt = legendre_sigma(&g, LN2).unwrap();
        // stationarity closed form: 2^u/(1+2^u) = log(3/2)/log 2
        let rhs = 1.5f64.ln() / LN2;
        let u_closed = (rhs / (1.0 - rhs)).ln() / LN2;
        let sigma_closed = u_closed + geo_v_closed(u_closed, 3.0) / LN2;
        assert!((pt.u_star - u_closed).abs() < 1e-6, "u* = {} vs {}", pt.u_star, u_closed);
        assert!((pt.sigma - sigma_closed).abs() < 1e-9, "sigma = {}", pt.sigma);
        assert!((pt.sigma - 0.9791).abs() < 1e-3);
        // spectrum point invariant
        assert!((pt.sigma - (pt.u_star + pt.v_at_u / LN2)).abs() < 1e-12);
    }

    #[test]
    fn sigma_attains_one_at_typical_level() {
        for tau in [1.5, 3.0] {
            let g = Partition::geometric(tau).unwrap();
            let s_star = typical_level(&g).unwrap().unwrap();
            let closed = tau.ln() - (tau - 1.0) * (tau - 1.0).ln() / tau;
            assert!((s_star.value - closed).abs() < 1e-10, "s* = {} vs {closed}", s_star.value);
            let pt = legendre_sigma(&g, s_star.value).unwrap();
            assert!((pt.sigma - 1.0).abs() < 1e-6, "sigma(s*) = {}", pt.sigma);
            assert!((pt.u_star - 1.0).abs() < 1e-4);
        }
        assert!(typical_level(&Partition::harmonic()).unwrap().is_none());
        let s_star = typical_level(&Partition::power_law(1.5).unwrap()).unwrap().unwrap();
        assert!(s_star.value > 0.0 && s_star.error_bound < 1e-2);
    }

    #[test]
    fn sigma_range_errors() {
        let g = Partition::geometric(3.0).unwrap();
        assert!(matches!(legendre_sigma(&g, 0.1), Err(Error::SOutOfRange { .. })));
        assert!(matches!(legendre_sigma(&g, 2.0), Err(Error::SOutOfRange { .. })));
        assert!(matches!(legendre_sigma(&Partition::dyadic(), LN2), Err(Error::DyadicExcluded(_))));
        assert!(matches!(
            legendre_sigma(&Partition::geometric(2.0).unwrap(), LN2),
            Err(Error::DyadicExcluded(_))
        ));
    }

    #[test]
    fn dimensions_report() {
        let g = Partition::geometric(3.0).unwrap();
        let dims = theorem_dimensions(&g).unwrap();
        assert!((dims.dim_theta_inf - 0.9791).abs() < 1e-3);
        assert_eq!(dims.dim_theta_inf, dims.dim_theta_sim);
        assert_eq!(dims.dim_theta_0, 1.0);
        assert!(dims.dim_theta_inf < 1.0 - 1e-9);

        // harmonic regression constant from the pre-registered oracle
        let h = Partition::harmonic();
        let dims = theorem_dimensions(&h).unwrap();
        assert!(
            (dims.dim_theta_inf - 0.9594363).abs() < 2e-6,
            "sigma_H(log 2) = {}",
            dims.dim_theta_inf
        );

        for tau in [1.5, 4.0] {
            let dims = theorem_dimensions(&Partition::geometric(tau).unwrap()).unwrap();
            assert!(dims.dim_theta_inf < 1.0 - 1e-9, "tau={tau}");
        }
        assert!(theorem_dimensions(&Partition::dyadic()).is_err());
    }

    #[test]
    fn pvb_values() {
        assert!((pvb_threshold(3.0).unwrap() - LN2 / 1.5f64.ln()).abs() < 1e-14);
        assert!((pvb_threshold(3.0).unwrap() - 1.7095).abs() < 1e-4);
        assert!((pvb_threshold(1.5).unwrap() - 2.4094).abs() < 1e-4);
        assert!(pvb_threshold(2.0).is_err());
        assert!(pvb_threshold(1.0).is_err());
        // discriminant flips sign exactly at K
        let k = pvb_threshold(3.0).unwrap();
        assert!(pvb_discriminant(3.0, k - 0.01) > 0.0);
        assert!(pvb_discriminant(3.0, k + 0.01) < 0.0);
        assert!(pvb_discriminant(3.0, k).abs() < 1e-12);
    }
}
