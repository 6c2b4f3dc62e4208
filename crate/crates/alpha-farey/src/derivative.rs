//! Classification of the generalized derivative of theta: ratio sequences
//! `2^{-n} / lambda(I_n(x))` along the Farey cylinder tree, approximant ratios
//! at alpha-rationals, the set `M = {i : a_i = 2^{-i}}` with the B_M
//! non-existence rule, and classifiers returning Theta_0 / Theta_inf /
//! Theta_sim membership with the rule used.
//!
//! All levels are in nats; log 2 is the entropy threshold separating the
//! derivative-zero and derivative-infinity regimes.

use serde::Serialize;

use crate::codec::LurothDigits;
use crate::dynamics::lyapunov_cycle;
use crate::error::{Error, Result};
use crate::partition::{Partition, TailClass, TailModel};

const LN2: f64 = std::f64::consts::LN_2;

/// Relative half-width of the band around log 2 inside which an exact cycle
/// level is treated as equal to log 2.
const LOG2_BAND_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Zero,
    Infinity,
    NotExist,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    LevelBelowLog2,
    LevelAboveLog2,
    Straddle,
    BmSet,
    AlphaRationalFactor,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RatioSample {
    pub n: u64,
    /// `log(2^{-n} / lambda(I_n))`.
    pub log_ratio: f64,
}

/// Classification outcome with the evidence that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct DerivativeVerdict {
    pub verdict: Verdict,
    pub rule: Rule,
    pub s_liminf: f64,
    pub s_limsup: f64,
    pub n_used: u64,
    pub evidence: Vec<RatioSample>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Walks Farey levels along a digit sequence, yielding `log lambda(I_n)`.
/// Finite digit strings continue with trailing zeros (the canonical coding of
/// the alpha-rational endpoint).
struct LevelWalker<'a> {
    p: &'a Partition,
    d: &'a LurothDigits,
    digit_index: usize,
    /// zeros consumed inside the current (not yet completed) block
    run: u64,
    /// sum of log a over completed blocks
    cum_log_atoms: f64,
    finite: bool,
}

impl<'a> LevelWalker<'a> {
    fn new(p: &'a Partition, d: &'a LurothDigits) -> Self {
        LevelWalker {
            p,
            d,
            digit_index: 0,
            run: 0,
            cum_log_atoms: 0.0,
            finite: matches!(d, LurothDigits::Finite(_)),
        }
    }

    /// Advance one Farey level; returns `log lambda(I_n)` for the next n.
    fn step(&mut self) -> Result<f64> {
        match self.d.digit(self.digit_index) {
            Some(l) => {
                if l > self.p.horizon() {
                    return Err(Error::BeyondHorizon { n: l, horizon: self.p.horizon() });
                }
                if self.run + 1 == l {
                    // this level completes the block
                    self.cum_log_atoms += self.p.log_atom_unchecked(l);
                    self.run = 0;
                    self.digit_index += 1;
                    Ok(self.cum_log_atoms)
                } else {
                    self.run += 1;
                    if self.run + 1 > self.p.horizon() {
                        return Err(Error::BeyondHorizon { n: self.run + 1, horizon: self.p.horizon() });
                    }
                    Ok(self.cum_log_atoms + self.p.log_tail_unchecked(self.run + 1))
                }
            }
            None if self.finite => {
                // trailing zeros of the alpha-rational coding
                self.run += 1;
                if self.run + 1 > self.p.horizon() {
                    return Err(Error::BeyondHorizon { n: self.run + 1, horizon: self.p.horizon() });
                }
                Ok(self.cum_log_atoms + self.p.log_tail_unchecked(self.run + 1))
            }
            None => Err(Error::InsufficientDigits {
                needed: 0,
                available: self.d.farey_levels().unwrap_or(0),
            }),
        }
    }
}

/// `log(2^{-n}/lambda(I_n(x)))` for `n = 1..=n_max`, in exact log-domain sums.
pub fn ratio_sequence(p: &Partition, d: &LurothDigits, n_max: u64) -> Result<Vec<f64>> {
    if let Some(cover) = d.farey_levels() {
        if !matches!(d, LurothDigits::Finite(_)) && cover < n_max {
            return Err(Error::InsufficientDigits { needed: n_max, available: cover });
        }
    }
    let mut walker = LevelWalker::new(p, d);
    let mut out = Vec::with_capacity(n_max as usize);
    for n in 1..=n_max {
        let log_lambda = walker.step()?;
        out.push(-(n as f64) * LN2 - log_lambda);
    }
    Ok(out)
}

/// Running levels `s_n = -(1/n) log lambda(I_n)` for `n = 1..=n_max`.
pub fn level_sequence(p: &Partition, d: &LurothDigits, n_max: u64) -> Result<Vec<f64>> {
    let ratios = ratio_sequence(p, d, n_max)?;
    Ok(ratios
        .iter()
        .enumerate()
        .map(|(i, r)| r / (i as f64 + 1.0) + LN2)
        .collect())
}

/// Log of the mu/lambda ratio over the approximant interval
/// `[r_k, r_{k+1}]`: `log 2 - (l_1+..+l_{k+1}) log 2 - sum_{i<=k} log a_{l_i}
/// - log t_{l_{k+1}}`.
pub fn approximant_ratio(p: &Partition, d: &LurothDigits, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Precondition("approximant ratio needs k >= 1".into()));
    }
    let mut digit_sum = 0u64;
    let mut log_atoms = 0.0;
    for i in 0..=k {
        let l = d.digit(i).ok_or(Error::InsufficientDigits {
            needed: (k + 1) as u64,
            available: i as u64,
        })?;
        if l > p.horizon() {
            return Err(Error::BeyondHorizon { n: l, horizon: p.horizon() });
        }
        digit_sum += l;
        if i < k {
            log_atoms += p.log_atom_unchecked(l);
        }
    }
    let l_last = d.digit(k).unwrap();
    Ok(LN2 - (digit_sum as f64) * LN2 - log_atoms - p.log_tail_unchecked(l_last))
}

/// Log of the Theta_0 criterion quantity
/// `2 * 2^{-(l_1+..+l_{k+1})} / (a_{l_1} .. a_{l_{k+1}})`.
pub fn theta_zero_criterion(p: &Partition, d: &LurothDigits, k: usize) -> Result<f64> {
    let appr = approximant_ratio(p, d, k)?;
    let l_last = d.digit(k).unwrap();
    Ok(appr + p.log_tail_unchecked(l_last) - p.log_atom_unchecked(l_last))
}

/// Limit behavior of `2^{-m}/t_m` as m grows, per tail family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "limit", rename_all = "snake_case")]
pub enum FactorLimit {
    Zero,
    Finite { value: f64 },
    Infinite,
    Divergent,
}

/// Analytic limit of `2^{-m}/t_m`: zero when tails decay slower than 2^{-m}
/// (power-law, geometric with rho < 2), infinite when faster (geometric with
/// rho > 2), and the constant 1/2 in the dyadic case.
pub fn alpha_rational_factor(p: &Partition) -> FactorLimit {
    if p.is_dyadic() {
        return FactorLimit::Finite { value: 0.5 };
    }
    match p.classify().class {
        TailClass::Dyadic => FactorLimit::Finite { value: 0.5 },
        TailClass::Expansive { .. } => FactorLimit::Zero,
        TailClass::Expanding { rho } => {
            if rho > 2.0 {
                FactorLimit::Infinite
            } else if rho < 2.0 {
                FactorLimit::Zero
            } else {
                // exactly ratio-2 tails but not dyadic: 2^{-m}/t_m is eventually
                // the constant 2^{-K}/t_K at the prefix end K
                match p.family() {
                    crate::partition::Family::Custom { tails, model: TailModel::GeometricRatio(_) } => {
                        let k = tails.len();
                        FactorLimit::Finite {
                            value: 0.5f64.powi(k as i32) / tails[k - 1],
                        }
                    }
                    _ => FactorLimit::Finite { value: 0.5 },
                }
            }
        }
        TailClass::Other => FactorLimit::Divergent,
    }
}

/// Asymptotic tail-decay rate `lim -(1/m) log t_m` (the level of
/// alpha-rational points).
fn tail_rate(p: &Partition) -> f64 {
    match p.classify().class {
        TailClass::Dyadic => LN2,
        TailClass::Expanding { rho } => rho.ln(),
        TailClass::Expansive { .. } => 0.0,
        TailClass::Other => f64::NAN,
    }
}

/// The set `M = {i : a_i = 2^{-i}}` probed up to an index bound.
#[derive(Debug, Clone, Serialize)]
pub struct MSet {
    pub members: Vec<u64>,
    /// Whether the tail model settles membership for every larger index.
    pub complete: bool,
    /// True when every index beyond the probe range is a member (near-dyadic
    /// custom tails).
    pub tail_all_members: bool,
    /// False when membership was decided by float comparison at 1e-15
    /// relative rather than exact arithmetic.
    pub exact: bool,
}

/// Exact membership test `a_i = 2^{-i}` where the family allows it.
pub fn is_m_member(p: &Partition, i: u64) -> (bool, bool) {
    use num_bigint::BigInt;
    use num_rational::BigRational;
    if let Some(a) = p.atom_exact(i) {
        if i <= 4096 {
            let pow = BigRational::new(BigInt::from(1), BigInt::from(2u8).pow(i as u32));
            return (a == pow, true);
        }
    }
    let rel = (p.atom_unchecked(i) * (i as f64).exp2() - 1.0).abs();
    (rel <= 1e-15, false)
}

pub fn m_set(p: &Partition, probe_to: u64) -> MSet {
    if p.is_dyadic() {
        let members: Vec<u64> = (1..=probe_to.min(64)).collect();
        return MSet { members, complete: true, tail_all_members: true, exact: true };
    }
    let cap = probe_to.min(p.horizon()).min(4096);
    let mut members = Vec::new();
    let mut exact = true;
    for i in 1..=cap {
        let (m, e) = is_m_member(p, i);
        exact &= e;
        if m {
            members.push(i);
        }
    }
    // a_i 2^i is eventually monotone away from 1 for every supported tail
    // model except exact ratio-2 tails, where it is eventually constant
    let tail_all_members = match p.family() {
        crate::partition::Family::Custom { tails, model: TailModel::GeometricRatio(rho) }
            if *rho == 2.0 =>
        {
            is_m_member(p, tails.len() as u64).0
        }
        _ => false,
    };
    MSet { members, complete: true, tail_all_members, exact }
}

fn reject_dyadic(p: &Partition) -> Result<()> {
    if p.is_dyadic() {
        return Err(Error::DyadicExcluded(
            "theta is the identity for the dyadic partition; classification vacuous".into(),
        ));
    }
    Ok(())
}

fn evidence_samples(p: &Partition, d: &LurothDigits, n_max: u64) -> Vec<RatioSample> {
    let n_max = n_max.max(1);
    match ratio_sequence(p, d, n_max) {
        Ok(seq) => {
            let stride = (seq.len() / 32).max(1);
            seq.iter()
                .enumerate()
                .filter(|(i, _)| i % stride == 0 || *i == seq.len() - 1)
                .map(|(i, r)| RatioSample { n: i as u64 + 1, log_ratio: *r })
                .collect()
        }
        Err(_) => Vec::new(),
    }
}

/// Classify an eventually periodic point by its exact cycle level
/// `s = sum_period(-log a_l) / sum_period l`.
///
/// `s > log 2` places the point in Theta_inf, `s < log 2` in Theta_0 (at
/// 1e-12 relative resolution). On the band boundary the only decidable rule is
/// the B_M test (all period digits in M); anything else is reported
/// `Undetermined` rather than guessed.
pub fn classify_periodic(p: &Partition, d: &LurothDigits) -> Result<DerivativeVerdict> {
    reject_dyadic(p)?;
    let period = match d {
        LurothDigits::EventuallyPeriodic { period, .. } => period,
        _ => {
            return Err(Error::Precondition(
                "classify_periodic needs eventually periodic digits".into(),
            ))
        }
    };
    let s = lyapunov_cycle(p, d)?;
    let band = LOG2_BAND_REL * LN2;
    let n_used = 1000u64;
    let evidence = evidence_samples(p, d, n_used);
    let (verdict, rule, note) = if s > LN2 + band {
        (Verdict::Infinity, Rule::LevelAboveLog2, None)
    } else if s < LN2 - band {
        (Verdict::Zero, Rule::LevelBelowLog2, None)
    } else {
        let all_in_m = period.iter().all(|&l| is_m_member(p, l).0);
        if all_in_m {
            (Verdict::NotExist, Rule::BmSet, Some("cycle level equals log 2 and all periodic digits lie in M".to_string()))
        } else {
            (
                Verdict::Undetermined,
                Rule::Inconclusive,
                Some("cycle level equals log 2 but digits leave M; boundary case undecided".to_string()),
            )
        }
    };
    Ok(DerivativeVerdict { verdict, rule, s_liminf: s, s_limsup: s, n_used, evidence, note })
}

/// Digit sequence alternating runs of `block_a` and `block_b`, run lengths
/// growing like `growth^k`, covering at least `min_levels` Farey levels.
pub fn oscillating_digits(block_a: u64, block_b: u64, growth: f64, min_levels: u64) -> LurothDigits {
    let mut digits = Vec::new();
    let mut covered = 0u64;
    let mut k = 1u32;
    loop {
        let run = growth.powi(k as i32).ceil() as u64;
        let block = if k % 2 == 1 { block_a } else { block_b };
        for _ in 0..run {
            digits.push(block);
            covered += block;
            if covered >= min_levels {
                return LurothDigits::Truncated(digits);
            }
        }
        k += 1;
    }
}

/// Classify a constructed oscillating point: runs of two digit blocks with
/// super-linearly growing run lengths, whose block levels straddle log 2.
pub fn classify_oscillating(
    p: &Partition,
    block_a: u64,
    block_b: u64,
    run_growth: f64,
) -> Result<DerivativeVerdict> {
    reject_dyadic(p)?;
    if block_a == 0 || block_b == 0 || block_a > p.horizon() || block_b > p.horizon() {
        return Err(Error::BeyondHorizon { n: block_a.max(block_b), horizon: p.horizon() });
    }
    if !run_growth.is_finite() || run_growth <= 1.0 {
        return Err(Error::Precondition(format!(
            "run growth must exceed 1 for super-linear runs, got {run_growth}"
        )));
    }
    let s_a = -p.log_atom_unchecked(block_a) / block_a as f64;
    let s_b = -p.log_atom_unchecked(block_b) / block_b as f64;
    if (s_a - LN2).signum() == (s_b - LN2).signum() {
        return Err(Error::Precondition(format!(
            "block levels s({block_a}) = {s_a:.6} and s({block_b}) = {s_b:.6} lie on the same side of log 2 = {LN2:.6}; use classify_periodic"
        )));
    }
    let n_used = 20_000u64;
    let d = oscillating_digits(block_a, block_b, run_growth, n_used);
    let evidence = evidence_samples(p, &d, n_used);
    Ok(DerivativeVerdict {
        verdict: Verdict::NotExist,
        rule: Rule::Straddle,
        s_liminf: s_a.min(s_b),
        s_limsup: s_a.max(s_b),
        n_used,
        evidence,
        note: Some(format!("liminf/limsup are the block levels; runs grow by factor {run_growth}")),
    })
}

/// Finite-data classifier on the running level `s_n = -(1/n) log lambda(I_n)`
/// over the last quarter of `n <= n_max`. Decides Zero/Infinity only outside
/// the caller's margin around log 2 and never claims non-existence from
/// finite data.
pub fn classify_empirical(
    p: &Partition,
    d: &LurothDigits,
    n_max: u64,
    margin: f64,
) -> Result<DerivativeVerdict> {
    reject_dyadic(p)?;
    if n_max < 100 {
        return Err(Error::Precondition(format!("n_max must be >= 100, got {n_max}")));
    }
    if !margin.is_finite() || margin <= 0.0 {
        return Err(Error::Precondition("margin must be positive".into()));
    }
    let levels = level_sequence(p, d, n_max)?;
    let from = (3 * n_max as usize) / 4;
    let window = &levels[from.min(levels.len() - 1)..];
    let min_s = window.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_s = window.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (verdict, rule) = if min_s - LN2 > margin {
        (Verdict::Infinity, Rule::LevelAboveLog2)
    } else if max_s - LN2 < -margin {
        (Verdict::Zero, Rule::LevelBelowLog2)
    } else {
        (Verdict::Undetermined, Rule::Inconclusive)
    };
    let stride = (levels.len() / 32).max(1);
    let evidence = levels
        .iter()
        .enumerate()
        .filter(|(i, _)| i % stride == 0 || *i == levels.len() - 1)
        .map(|(i, s)| RatioSample {
            n: i as u64 + 1,
            log_ratio: (i as f64 + 1.0) * (s - LN2),
        })
        .collect();
    Ok(DerivativeVerdict {
        verdict,
        rule,
        s_liminf: min_s,
        s_limsup: max_s,
        n_used: n_max,
        evidence,
        note: Some(format!(
            "finite-sample rule over the last quarter window with margin {margin}; consistent with but not a proof of the limit criteria"
        )),
    })
}

/// Classify an alpha-rational point from the tail-factor limit of
/// `2^{-m}/t_m`: zero limit gives Theta_0, infinite gives Theta_inf, and a
/// finite nonzero limit at a non-dyadic partition contradicts the 0-or-infinity
/// dichotomy, so the derivative cannot exist.
pub fn classify_finite(p: &Partition, d: &LurothDigits) -> Result<DerivativeVerdict> {
    reject_dyadic(p)?;
    if !matches!(d, LurothDigits::Finite(_)) {
        return Err(Error::Precondition("classify_finite needs finite digits".into()));
    }
    let s = tail_rate(p);
    let n_used = 1000u64;
    let evidence = evidence_samples(p, d, n_used);
    let (verdict, rule, note) = match alpha_rational_factor(p) {
        FactorLimit::Zero => (Verdict::Zero, Rule::AlphaRationalFactor, None),
        FactorLimit::Infinite => (Verdict::Infinity, Rule::AlphaRationalFactor, None),
        FactorLimit::Finite { value } => (
            Verdict::NotExist,
            Rule::AlphaRationalFactor,
            Some(format!(
                "tail factor limit {value} is finite and nonzero at a non-dyadic partition; a finite nonzero derivative is impossible, so the derivative does not exist"
            )),
        ),
        FactorLimit::Divergent => (
            Verdict::NotExist,
            Rule::AlphaRationalFactor,
            Some("tail factor limit does not exist".to_string()),
        ),
    };
    Ok(DerivativeVerdict { verdict, rule, s_liminf: s, s_limsup: s, n_used, evidence, note })
}
