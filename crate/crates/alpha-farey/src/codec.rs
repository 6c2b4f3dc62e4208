//! Digit codecs: Lüroth digit sequences, binary Farey coding words, the block
//! substitution between them, and cylinder intervals with exact endpoints and
//! log-measures.
//!
//! Conventions. A finite expansion `[l1..lk, 1]` equals `[l1..l_{k-1}, lk+1]`;
//! the form not ending in 1 (unless of length 1) is canonical, and digit
//! extraction produces canonical forms by construction. Measure arithmetic is
//! done in the log domain; linear values are derived views.

use std::collections::HashMap;
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::partition::Partition;

/// Maximum digit-extraction depth in float mode; deeper extraction loses
/// digits to accumulated error ~ prod(1/a_{l_i}) and must go through the
/// exact-rational path instead.
pub const FLOAT_DEPTH_CAP: usize = 40;

const MAX_WORD_BITS: u64 = 100_000_000;

/// A point represented by its Lüroth digit sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LurothDigits {
    /// Finite expansion (the point is alpha-rational).
    Finite(Vec<u64>),
    /// Infinite expansion, eventually periodic: preperiod then repeating period.
    EventuallyPeriodic { pre: Vec<u64>, period: Vec<u64> },
    /// Known prefix of an otherwise unknown infinite expansion.
    Truncated(Vec<u64>),
}

impl LurothDigits {
    pub fn finite(digits: Vec<u64>) -> Result<Self> {
        if digits.is_empty() {
            return Err(Error::InvalidDigits("finite expansion must be nonempty".into()));
        }
        check_digits(&digits)?;
        Ok(LurothDigits::Finite(digits))
    }

    pub fn eventually_periodic(pre: Vec<u64>, period: Vec<u64>) -> Result<Self> {
        if period.is_empty() {
            return Err(Error::InvalidDigits("period must be nonempty".into()));
        }
        check_digits(&pre)?;
        check_digits(&period)?;
        Ok(LurothDigits::EventuallyPeriodic { pre, period })
    }

    pub fn periodic(period: Vec<u64>) -> Result<Self> {
        Self::eventually_periodic(Vec::new(), period)
    }

    pub fn truncated(digits: Vec<u64>) -> Result<Self> {
        check_digits(&digits)?;
        Ok(LurothDigits::Truncated(digits))
    }

    /// The i-th digit (0-based); `None` past the end of a finite or truncated
    /// sequence, always `Some` for eventually periodic ones.
    pub fn digit(&self, i: usize) -> Option<u64> {
        match self {
            LurothDigits::Finite(v) | LurothDigits::Truncated(v) => v.get(i).copied(),
            LurothDigits::EventuallyPeriodic { pre, period } => {
                if i < pre.len() {
                    Some(pre[i])
                } else {
                    Some(period[(i - pre.len()) % period.len()])
                }
            }
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, LurothDigits::EventuallyPeriodic { .. })
    }

    /// Digits iterator; infinite for eventually periodic sequences.
    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        (0..).map_while(move |i| self.digit(i))
    }

    /// Total Farey levels covered by the known digits (sum of digits);
    /// `None` when infinite.
    pub fn farey_levels(&self) -> Option<u64> {
        match self {
            LurothDigits::Finite(v) | LurothDigits::Truncated(v) => Some(v.iter().sum()),
            LurothDigits::EventuallyPeriodic { .. } => None,
        }
    }

    /// Canonical form: finite expansions are rewritten not to end in digit 1
    /// (`[.., lk, 1] -> [.., lk+1]`), unless of length 1.
    pub fn canonical(self) -> Self {
        match self {
            LurothDigits::Finite(mut v) => {
                while v.len() > 1 && *v.last().unwrap() == 1 {
                    v.pop();
                    *v.last_mut().unwrap() += 1;
                }
                LurothDigits::Finite(v)
            }
            other => other,
        }
    }

    /// The other expansion of the same alpha-rational, when one exists.
    pub fn twin_form(&self) -> Option<Self> {
        match self {
            LurothDigits::Finite(v) if v.len() > 1 && *v.last().unwrap() == 1 => {
                let mut w = v[..v.len() - 1].to_vec();
                *w.last_mut().unwrap() += 1;
                Some(LurothDigits::Finite(w))
            }
            LurothDigits::Finite(v) if *v.last().unwrap() > 1 => {
                let mut w = v.clone();
                *w.last_mut().unwrap() -= 1;
                w.push(1);
                Some(LurothDigits::Finite(w))
            }
            _ => None,
        }
    }

    /// Parse the digit-string grammar: `[2,3,1]` finite, `[1;(2,5)]` or
    /// `[(2,5)]` eventually periodic, `[2,3,...]` truncated, `[2 per]` as a
    /// shorthand for a pure period.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let inner = s
            .strip_prefix('[')
            .and_then(|t| t.strip_suffix(']'))
            .ok_or_else(|| Error::Parse(format!("digit string must be bracketed: `{s}`")))?
            .trim();
        if let Some(body) = inner.strip_suffix(" per").or_else(|| inner.strip_suffix(",per")) {
            return Self::periodic(parse_list(body)?);
        }
        if let Some(rest) = inner.strip_suffix("...") {
            let rest = rest.trim().trim_end_matches(',');
            return Self::truncated(parse_list(rest)?);
        }
        if let Some(open) = inner.find('(') {
            let close = inner
                .rfind(')')
                .ok_or_else(|| Error::Parse(format!("unclosed period in `{s}`")))?;
            let period = parse_list(&inner[open + 1..close])?;
            let pre_part = inner[..open].trim().trim_end_matches(';').trim_end_matches(',');
            let pre = if pre_part.is_empty() { Vec::new() } else { parse_list(pre_part)? };
            return Self::eventually_periodic(pre, period);
        }
        Self::finite(parse_list(inner)?)
    }
}

fn check_digits(digits: &[u64]) -> Result<()> {
    if let Some(pos) = digits.iter().position(|&d| d == 0) {
        return Err(Error::InvalidDigits(format!("digit at position {pos} must be >= 1")));
    }
    Ok(())
}

fn parse_list(s: &str) -> Result<Vec<u64>> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<u64>()
                .map_err(|_| Error::Parse(format!("bad digit `{}`", tok.trim())))
        })
        .collect()
}

impl fmt::Display for LurothDigits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn join(v: &[u64]) -> String {
            v.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",")
        }
        match self {
            LurothDigits::Finite(v) => write!(f, "[{}]", join(v)),
            LurothDigits::Truncated(v) => {
                if v.is_empty() {
                    write!(f, "[...]")
                } else {
                    write!(f, "[{},...]", join(v))
                }
            }
            LurothDigits::EventuallyPeriodic { pre, period } => {
                if pre.is_empty() {
                    write!(f, "[({})]", join(period))
                } else {
                    write!(f, "[{};({})]", join(pre), join(period))
                }
            }
        }
    }
}

impl Serialize for LurothDigits {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Binary alpha-Farey coding word: finite bits, optionally followed by a
/// repeating period. Every word over {0,1} is admissible (full shift).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FareyWord {
    bits: Vec<bool>,
    period: Vec<bool>,
}

impl FareyWord {
    pub fn finite(bits: Vec<bool>) -> Self {
        FareyWord { bits, period: Vec::new() }
    }

    pub fn with_period(bits: Vec<bool>, period: Vec<bool>) -> Self {
        FareyWord { bits, period }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn period(&self) -> &[bool] {
        &self.period
    }

    pub fn is_finite(&self) -> bool {
        self.period.is_empty()
    }

    /// Length of the finite part.
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty() && self.period.is_empty()
    }

    pub fn push(&mut self, bit: bool) {
        debug_assert!(self.is_finite());
        self.bits.push(bit);
    }

    pub fn bit(&self, i: usize) -> Option<bool> {
        if i < self.bits.len() {
            Some(self.bits[i])
        } else if self.period.is_empty() {
            None
        } else {
            Some(self.period[(i - self.bits.len()) % self.period.len()])
        }
    }

    /// Parse `0100` or `01(001)`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let parse_bits = |part: &str| -> Result<Vec<bool>> {
            part.chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    other => Err(Error::Parse(format!("bad word symbol `{other}`"))),
                })
                .collect()
        };
        if let Some(open) = s.find('(') {
            let close = s
                .rfind(')')
                .ok_or_else(|| Error::Parse(format!("unclosed period in `{s}`")))?;
            Ok(FareyWord::with_period(parse_bits(&s[..open])?, parse_bits(&s[open + 1..close])?))
        } else {
            Ok(FareyWord::finite(parse_bits(s)?))
        }
    }
}

impl fmt::Display for FareyWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.bits {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        if !self.period.is_empty() {
            f.write_str("(")?;
            for b in &self.period {
                f.write_str(if *b { "1" } else { "0" })?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl Serialize for FareyWord {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Value of a partial expansion together with a certified error bound.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ValueWithError {
    pub value: f64,
    pub error_bound: f64,
}

/// An alpha-Farey (or alpha-Lüroth) cylinder interval.
#[derive(Debug, Clone, Serialize)]
pub struct CylinderInterval {
    pub level: u64,
    pub left: f64,
    pub right: f64,
    /// log of the Lebesgue measure, from the analytic atom/tail logs.
    pub log_lambda: f64,
    /// log of the maximal-entropy measure: exactly `-level * ln 2`.
    pub log_mu: f64,
    pub word: FareyWord,
}

fn digit_blocks(digits: &[u64]) -> Result<Vec<bool>> {
    let total: u64 = digits.iter().sum();
    if total > MAX_WORD_BITS {
        return Err(Error::InvalidDigits(format!("word would need {total} bits")));
    }
    let mut bits = Vec::with_capacity(total as usize);
    for &l in digits {
        bits.extend(std::iter::repeat_n(false, (l - 1) as usize));
        bits.push(true);
    }
    Ok(bits)
}

/// Block substitution `l -> 0^{l-1} 1` from Lüroth digits to the Farey coding.
/// Truncated digits yield the known finite prefix of the word.
pub fn luroth_to_farey(d: &LurothDigits) -> Result<FareyWord> {
    match d {
        LurothDigits::Finite(v) | LurothDigits::Truncated(v) => Ok(FareyWord::finite(digit_blocks(v)?)),
        LurothDigits::EventuallyPeriodic { pre, period } => {
            Ok(FareyWord::with_period(digit_blocks(pre)?, digit_blocks(period)?))
        }
    }
}

/// Inverse block parse. A finite word ending in `0^m` yields its completed
/// digits plus the unresolved trailing-zero count `m`. Periodic words realign
/// the bit period onto a digit period (m = 0); a word that is eventually all
/// zeros codes an alpha-rational and comes back as `Finite`.
pub fn farey_to_luroth(w: &FareyWord) -> Result<(LurothDigits, u64)> {
    let mut digits = Vec::new();
    let mut run: u64 = 0;
    for &b in &w.bits {
        if b {
            digits.push(run + 1);
            run = 0;
        } else {
            run += 1;
        }
    }
    if w.period.is_empty() {
        return Ok((LurothDigits::Truncated(digits), run));
    }
    if w.period.iter().all(|&b| !b) {
        // eventually all zeros: the coding of an alpha-rational (or of 0)
        if digits.is_empty() {
            return Err(Error::InvalidDigits("all-zero word codes the fixed point 0".into()));
        }
        return Ok((LurothDigits::Finite(digits), 0));
    }
    // Realign: keep reading period copies; a repeated (phase at block start)
    // pins down the digit period.
    let plen = w.period.len();
    let mut seen: HashMap<usize, usize> = HashMap::new();
    let mut i = w.bits.len();
    if run == 0 {
        seen.insert(0, digits.len());
    }
    loop {
        let b = w.period[(i - w.bits.len()) % plen];
        i += 1;
        if b {
            digits.push(run + 1);
            run = 0;
            let phase = (i - w.bits.len()) % plen;
            if let Some(&start) = seen.get(&phase) {
                let pre = digits[..start].to_vec();
                let period = digits[start..].to_vec();
                return Ok((LurothDigits::EventuallyPeriodic { pre, period }, 0));
            }
            seen.insert(phase, digits.len());
        } else {
            run += 1;
        }
    }
}

fn check_digit_horizon(p: &Partition, digits: &[u64]) -> Result<()> {
    for &l in digits {
        if l == 0 || l > p.horizon() {
            return Err(Error::BeyondHorizon { n: l, horizon: p.horizon() });
        }
    }
    Ok(())
}

/// Right-to-left Horner evaluation of the alternating expansion series:
/// `x = t_{l1} - a_{l1}(t_{l2} - a_{l2}(...))`.
fn horner_f64(p: &Partition, digits: &[u64], terminal: f64) -> f64 {
    let mut v = terminal;
    for &l in digits.iter().rev() {
        v = p.tail_unchecked(l) - p.atom_unchecked(l) * v;
    }
    v
}

fn horner_exact(p: &Partition, digits: &[u64], terminal: BigRational) -> Result<BigRational> {
    let mut v = terminal;
    for &l in digits.iter().rev() {
        let t = p.tail_exact(l).ok_or_else(|| Error::ExactUnavailable(p.spec_string().into()))?;
        let a = p.atom_exact(l).ok_or_else(|| Error::ExactUnavailable(p.spec_string().into()))?;
        v = t - a * v;
    }
    Ok(v)
}

/// Partial (or exact) value of a digit sequence under `p`.
///
/// Finite and eventually periodic digits evaluate in closed form with error
/// bound 0; truncated digits evaluate through at most `depth` terms with the
/// alternating-series bound `prod a_{l_i}` over the digits consumed.
pub fn luroth_value(p: &Partition, d: &LurothDigits, depth: usize) -> Result<ValueWithError> {
    match d {
        LurothDigits::Finite(v) => {
            check_digit_horizon(p, v)?;
            Ok(ValueWithError { value: horner_f64(p, v, 0.0), error_bound: 0.0 })
        }
        LurothDigits::EventuallyPeriodic { pre, period } => {
            check_digit_horizon(p, pre)?;
            check_digit_horizon(p, period)?;
            // cycle value solves V = c0 + c1 V (affine Horner over one period)
            let c0 = horner_f64(p, period, 0.0);
            let c1 = horner_f64(p, period, 1.0) - c0;
            let cycle = c0 / (1.0 - c1);
            Ok(ValueWithError { value: horner_f64(p, pre, cycle), error_bound: 0.0 })
        }
        LurothDigits::Truncated(v) => {
            let used = &v[..depth.min(v.len())];
            check_digit_horizon(p, used)?;
            let log_prod: f64 = used.iter().map(|&l| p.log_atom_unchecked(l)).sum();
            Ok(ValueWithError { value: horner_f64(p, used, 0.0), error_bound: log_prod.exp() })
        }
    }
}

/// Exact rational value; truncated digits yield the approximant of their prefix.
pub fn luroth_value_exact(p: &Partition, d: &LurothDigits) -> Result<BigRational> {
    match d {
        LurothDigits::Finite(v) | LurothDigits::Truncated(v) => {
            check_digit_horizon(p, v)?;
            horner_exact(p, v, BigRational::zero())
        }
        LurothDigits::EventuallyPeriodic { pre, period } => {
            check_digit_horizon(p, pre)?;
            check_digit_horizon(p, period)?;
            let c0 = horner_exact(p, period, BigRational::zero())?;
            let c1 = horner_exact(p, period, BigRational::one())? - &c0;
            let cycle = c0 / (BigRational::one() - c1);
            horner_exact(p, pre, cycle)
        }
    }
}

/// Float-mode digit extraction: iterate `L_alpha` on an f64, reading one digit
/// per step; terminates with `Finite` when an iterate hits some `t_n` exactly.
/// Depth is capped at [`FLOAT_DEPTH_CAP`]; deeper workflows should construct
/// digits directly or use [`luroth_digits_exact`].
pub fn luroth_digits(p: &Partition, x: f64, depth: usize) -> Result<LurothDigits> {
    if x == 0.0 {
        return Err(Error::OutOfDomain { value: x, domain: "(0, 1] (0 is the fixed point, no expansion)" });
    }
    if !(x > 0.0 && x <= 1.0) {
        return Err(Error::OutOfDomain { value: x, domain: "(0, 1]" });
    }
    if depth == 0 || depth > FLOAT_DEPTH_CAP {
        return Err(Error::Precondition(format!(
            "float-mode depth must be in 1..={FLOAT_DEPTH_CAP} (got {depth}); use exact mode for deeper extraction"
        )));
    }
    let mut digits = Vec::with_capacity(depth);
    let mut cur = x;
    for _ in 0..depth {
        let n = p.atom_index(cur)?;
        let t = p.tail_unchecked(n);
        digits.push(n);
        if cur == t {
            return Ok(LurothDigits::Finite(digits));
        }
        cur = (t - cur) / p.atom_unchecked(n);
        if cur <= 0.0 {
            // rounding collapsed onto the endpoint; indistinguishable from a hit
            return Ok(LurothDigits::Finite(digits));
        }
        if cur > 1.0 {
            cur = 1.0;
        }
    }
    Ok(LurothDigits::Truncated(digits))
}

/// Exact digit extraction for rational points of rational-tail partitions.
/// Detects orbit cycles, returning `EventuallyPeriodic` digits when the point
/// is preperiodic under `L_alpha`; otherwise returns `Truncated` after `depth`
/// digits.
pub fn luroth_digits_exact(p: &Partition, x: &BigRational, depth: usize) -> Result<LurothDigits> {
    if x.is_zero() {
        return Err(Error::OutOfDomain { value: 0.0, domain: "(0, 1] (0 is the fixed point, no expansion)" });
    }
    if x.is_negative() || x > &BigRational::one() {
        return Err(Error::OutOfDomain { value: x.to_f64().unwrap_or(f64::NAN), domain: "(0, 1]" });
    }
    let mut digits = Vec::new();
    let mut cur = x.clone();
    let mut seen: HashMap<BigRational, usize> = HashMap::new();
    for step in 0..depth {
        if let Some(&start) = seen.get(&cur) {
            let pre = digits[..start].to_vec();
            let period = digits[start..].to_vec();
            return Ok(LurothDigits::EventuallyPeriodic { pre, period });
        }
        seen.insert(cur.clone(), step);
        let n = p.atom_index_exact(&cur)?;
        let t = p.tail_exact(n).ok_or_else(|| Error::ExactUnavailable(p.spec_string().into()))?;
        digits.push(n);
        if cur == t {
            return Ok(LurothDigits::Finite(digits));
        }
        let a = p.atom_exact(n).ok_or_else(|| Error::ExactUnavailable(p.spec_string().into()))?;
        cur = (t - cur) / a;
    }
    Ok(LurothDigits::Truncated(digits))
}

/// A parsed real input: the f64 view plus the exact rational the text
/// denotes, when it denotes one (`p/q` fractions and finite decimals do).
#[derive(Debug, Clone)]
pub struct ParsedReal {
    pub value: f64,
    pub exact: Option<BigRational>,
}

/// Parse `0.4375`, `7/16`, or `1` into a real with exact rational companion.
pub fn parse_real(s: &str) -> Result<ParsedReal> {
    use num_bigint::BigInt;
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num.trim().parse().map_err(|_| Error::Parse(format!("bad numerator `{num}`")))?;
        let d: BigInt = den.trim().parse().map_err(|_| Error::Parse(format!("bad denominator `{den}`")))?;
        if d == BigInt::from(0) {
            return Err(Error::Parse("zero denominator".into()));
        }
        let exact = BigRational::new(n, d);
        let value = exact.to_f64().ok_or_else(|| Error::Parse(format!("`{s}` out of f64 range")))?;
        return Ok(ParsedReal { value, exact: Some(exact) });
    }
    let value: f64 = s.parse().map_err(|_| Error::Parse(format!("bad real `{s}`")))?;
    let exact = if let Some((int_part, frac_part)) = s.split_once('.') {
        let digits = format!("{int_part}{frac_part}");
        digits.parse::<BigInt>().ok().map(|n| {
            BigRational::new(n, BigInt::from(10u8).pow(frac_part.len() as u32))
        })
    } else {
        s.parse::<BigInt>().ok().map(BigRational::from_integer)
    };
    Ok(ParsedReal { value, exact })
}

/// Rationality test mode for [`is_alpha_rational`].
#[derive(Debug, Clone, Copy)]
pub enum RationalityMode {
    /// Exact rational iteration (rational-tail families only).
    Exact { max_steps: usize },
    /// Float iteration, declaring a hit within `tol` of an atom endpoint.
    Numeric { tol: f64, max_steps: usize },
}

/// Exact rationality test: whether digit extraction of the rational `x`
/// terminates within `max_steps` (and within the partition horizon). `false`
/// means "no termination detected within the budget".
pub fn is_alpha_rational_exact(p: &Partition, x: &BigRational, max_steps: usize) -> Result<bool> {
    if !p.has_exact_tails() {
        return Err(Error::ExactUnavailable(format!(
            "{} has irrational tails; use numeric mode",
            p.spec_string()
        )));
    }
    match luroth_digits_exact(p, x, max_steps) {
        Ok(LurothDigits::Finite(_)) => Ok(true),
        Ok(_) => Ok(false),
        Err(Error::BeyondHorizon { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Whether `x` has a finite expansion, i.e. digit extraction terminates within
/// the step budget. Exact mode converts the f64 to the exact rational it
/// denotes — pass a true rational through [`is_alpha_rational_exact`] when the
/// intended point is not f64-representable (e.g. 1/3).
pub fn is_alpha_rational(p: &Partition, x: f64, mode: RationalityMode) -> Result<bool> {
    match mode {
        RationalityMode::Exact { max_steps } => {
            let x = BigRational::from_float(x)
                .ok_or(Error::OutOfDomain { value: x, domain: "finite reals" })?;
            is_alpha_rational_exact(p, &x, max_steps)
        }
        RationalityMode::Numeric { tol, max_steps } => {
            if x == 0.0 {
                return Err(Error::OutOfDomain { value: x, domain: "(0, 1]" });
            }
            let mut cur = x;
            for _ in 0..max_steps {
                let n = p.atom_index(cur)?;
                let t = p.tail_unchecked(n);
                if (cur - t).abs() <= tol {
                    return Ok(true);
                }
                cur = (t - cur) / p.atom_unchecked(n);
                if cur <= tol {
                    return Ok(true);
                }
            }
            Ok(false)
        }
    }
}

/// Parse a finite word into completed digit blocks plus trailing zeros.
fn split_word(w: &FareyWord) -> Result<(Vec<u64>, u64)> {
    if !w.is_finite() {
        return Err(Error::Precondition("cylinder words must be finite".into()));
    }
    match farey_to_luroth(w)? {
        (LurothDigits::Truncated(blocks), m) => Ok((blocks, m)),
        _ => unreachable!("finite words parse to truncated digits"),
    }
}

/// The Lüroth cylinder of a digit prefix, as a Farey cylinder of level `sum l_i`.
pub fn luroth_cylinder(p: &Partition, digits: &[u64]) -> Result<CylinderInterval> {
    if digits.is_empty() {
        return Err(Error::InvalidDigits("cylinder needs at least one digit".into()));
    }
    farey_cylinder(p, &luroth_to_farey(&LurothDigits::Truncated(digits.to_vec()))?)
}

/// The alpha-Farey cylinder of a finite word `blocks + 0^m`.
///
/// Endpoints come from the expansions `[blocks, m+1]` and `[blocks]` (the
/// latter read as 0 when there are no completed blocks); which one is left is
/// resolved numerically, with the parity rule as a debug cross-check. The
/// Lebesgue measure is `prod a_{l_i} * t_{m+1}` in log form.
pub fn farey_cylinder(p: &Partition, w: &FareyWord) -> Result<CylinderInterval> {
    if w.bits().is_empty() {
        return Err(Error::Precondition("empty word (cylinder words need a finite prefix)".into()));
    }
    let (blocks, m) = split_word(w)?;
    check_digit_horizon(p, &blocks)?;
    if m + 1 > p.horizon() {
        return Err(Error::BeyondHorizon { n: m + 1, horizon: p.horizon() });
    }
    let mut with_next = blocks.clone();
    with_next.push(m + 1);
    let e1 = horner_f64(p, &with_next, 0.0);
    let e2 = if blocks.is_empty() { 0.0 } else { horner_f64(p, &blocks, 0.0) };
    let (left, right) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
    // parity cross-check: [blocks] is the left endpoint iff blocks.len() is even
    debug_assert!(
        e1 == e2 || (blocks.len() % 2 == 0) == (e2 < e1),
        "orientation parity mismatch for word {w}"
    );
    let log_lambda: f64 = blocks.iter().map(|&l| p.log_atom_unchecked(l)).sum::<f64>()
        + p.log_tail_unchecked(m + 1);
    let level = w.len() as u64;
    Ok(CylinderInterval {
        level,
        left,
        right,
        log_lambda,
        log_mu: -(level as f64) * std::f64::consts::LN_2,
        word: w.clone(),
    })
}

/// Exact cylinder endpoints `(left, right)` for rational-tail partitions.
pub fn farey_cylinder_endpoints_exact(
    p: &Partition,
    w: &FareyWord,
) -> Result<(BigRational, BigRational)> {
    let (blocks, m) = split_word(w)?;
    check_digit_horizon(p, &blocks)?;
    let mut with_next = blocks.clone();
    with_next.push(m + 1);
    let e1 = horner_exact(p, &with_next, BigRational::zero())?;
    let e2 = if blocks.is_empty() {
        BigRational::zero()
    } else {
        horner_exact(p, &blocks, BigRational::zero())?
    };
    Ok(if e1 <= e2 { (e1, e2) } else { (e2, e1) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn digits(s: &str) -> LurothDigits {
        LurothDigits::parse(s).unwrap()
    }

    #[test]
    fn parse_display_roundtrip() {
        for s in ["[2,3,1]", "[1;(2,5)]", "[(2)]", "[2,3,...]", "[7]"] {
            let d = digits(s);
            assert_eq!(d.to_string(), s);
        }
        assert_eq!(digits("[2 per]"), digits("[(2)]"));
        assert_eq!(digits("[ 2, 3 ]"), LurothDigits::Finite(vec![2, 3]));
        assert!(LurothDigits::parse("[0]").is_err());
        assert!(LurothDigits::parse("2,3").is_err());
        assert!(LurothDigits::parse("[]").is_err());
    }

    #[test]
    fn canonical_forms() {
        assert_eq!(digits("[2,1]").canonical(), digits("[3]"));
        assert_eq!(digits("[1,1]").canonical(), digits("[2]"));
        assert_eq!(digits("[2,1,1]").canonical(), digits("[2,2]"));
        assert_eq!(digits("[1]").canonical(), digits("[1]"));
        assert_eq!(digits("[3]").twin_form().unwrap(), digits("[2,1]"));
        assert_eq!(digits("[2,1]").twin_form().unwrap(), digits("[3]"));
        assert!(digits("[1]").twin_form().is_none());
    }

    #[test]
    fn harmonic_values() {
        let h = Partition::harmonic();
        assert_eq!(luroth_value(&h, &digits("[2]"), 8).unwrap().value, 0.5);
        assert!((luroth_value(&h, &digits("[1,2]"), 8).unwrap().value - 0.75).abs() < 1e-15);
        assert!((luroth_value(&h, &digits("[2,3]"), 8).unwrap().value - 4.0 / 9.0).abs() < 1e-15);
        // twins agree
        let v1 = luroth_value_exact(&h, &digits("[3,1,1]")).unwrap();
        let v2 = luroth_value_exact(&h, &digits("[3,1,1]").canonical()).unwrap();
        assert_eq!(v1, v2);
        assert_eq!(v1, rat(7, 24));
        // periodic closed form: all-1 digits give 1/(1+a_1) = 2/3
        assert_eq!(luroth_value_exact(&h, &digits("[(1)]")).unwrap(), rat(2, 3));
        assert!((luroth_value(&h, &digits("[(1)]"), 64).unwrap().value - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn truncated_error_bound() {
        let h = Partition::harmonic();
        let v = luroth_value(&h, &digits("[2,3,...]"), 8).unwrap();
        let exact = luroth_value_exact(&h, &digits("[2,3;(2)]")).unwrap().to_f64().unwrap();
        assert!((v.value - exact).abs() <= v.error_bound);
        // bound is the cylinder diameter a_2 a_3 = 1/72
        assert!((v.error_bound - 1.0 / 72.0).abs() < 1e-16);
    }

    #[test]
    fn digit_extraction() {
        let h = Partition::harmonic();
        assert_eq!(luroth_digits(&h, 0.75, 10).unwrap(), digits("[1,2]"));
        let d = Partition::dyadic();
        assert_eq!(luroth_digits(&d, 0.5, 10).unwrap(), digits("[2]"));
        assert_eq!(
            luroth_digits(&h, 2.0 / 3.0, 10).unwrap(),
            LurothDigits::Truncated(vec![1; 10])
        );
        assert!(luroth_digits(&h, 0.0, 10).is_err());
        assert!(luroth_digits(&h, 0.5, 100).is_err());
    }

    #[test]
    fn digit_extraction_exact() {
        let h = Partition::harmonic();
        assert_eq!(luroth_digits_exact(&h, &rat(3, 4), 50).unwrap(), digits("[1,2]"));
        // 2/3 is the fixed point of the digit-1 branch
        assert_eq!(luroth_digits_exact(&h, &rat(2, 3), 50).unwrap(), digits("[(1)]"));
        let d = Partition::dyadic();
        assert_eq!(luroth_digits_exact(&d, &rat(5, 8), 50).unwrap(), digits("[1,1,2]"));
    }

    #[test]
    fn rationality() {
        let h = Partition::harmonic();
        // true rationals go through the exact API: the f64 nearest 1/3 is a
        // different (dyadic-denominator) number
        assert!(is_alpha_rational_exact(&h, &rat(1, 3), 50).unwrap());
        assert!(!is_alpha_rational_exact(&h, &rat(2, 3), 50).unwrap());
        let d = Partition::dyadic();
        assert!(is_alpha_rational(&d, 5.0 / 8.0, RationalityMode::Exact { max_steps: 50 }).unwrap());
        // numeric mode tolerates the f64 representation error
        assert!(is_alpha_rational(
            &h,
            1.0 / 3.0,
            RationalityMode::Numeric { tol: 1e-12, max_steps: 50 }
        )
        .unwrap());
        assert!(is_alpha_rational(
            &Partition::power_law(1.5).unwrap(),
            0.5,
            RationalityMode::Exact { max_steps: 10 }
        )
        .is_err());
    }

    #[test]
    fn word_conversions() {
        assert_eq!(luroth_to_farey(&digits("[2,3]")).unwrap().to_string(), "01001");
        assert_eq!(luroth_to_farey(&digits("[1,1,1]")).unwrap().to_string(), "111");
        let (d, m) = farey_to_luroth(&FareyWord::parse("01001").unwrap()).unwrap();
        assert_eq!((d, m), (LurothDigits::Truncated(vec![2, 3]), 0));
        let (d, m) = farey_to_luroth(&FareyWord::parse("0100").unwrap()).unwrap();
        assert_eq!((d, m), (LurothDigits::Truncated(vec![2]), 2));
        // periodic words realign onto digit periods
        let w = luroth_to_farey(&digits("[2;(3)]")).unwrap();
        assert_eq!(w.to_string(), "01(001)");
        let (d, m) = farey_to_luroth(&w).unwrap();
        assert_eq!(m, 0);
        assert_eq!(d, digits("[2;(3)]"));
        // offset period: 0(100) is eventually (001) after pre 01
        let (d, _) = farey_to_luroth(&FareyWord::parse("0(100)").unwrap()).unwrap();
        assert_eq!(d, digits("[2;(3)]"));
        // eventually-zero word is an alpha-rational coding
        let (d, _) = farey_to_luroth(&FareyWord::parse("01(0)").unwrap()).unwrap();
        assert_eq!(d, digits("[2]"));
        assert!(farey_to_luroth(&FareyWord::parse("(0)").unwrap()).is_err());
    }

    #[test]
    fn cylinders() {
        let h = Partition::harmonic();
        let c = luroth_cylinder(&h, &[2]).unwrap();
        assert!((c.left - 1.0 / 3.0).abs() < 1e-15);
        assert!((c.right - 0.5).abs() < 1e-15);
        assert!((c.log_lambda - (1.0f64 / 6.0).ln()).abs() < 1e-14);
        assert_eq!(c.level, 2);

        let c = farey_cylinder(&h, &FareyWord::parse("0").unwrap()).unwrap();
        assert_eq!(c.left, 0.0);
        assert_eq!(c.right, 0.5);
        assert!((c.log_lambda - 0.5f64.ln()).abs() < 1e-15);
        assert_eq!(c.log_mu, -std::f64::consts::LN_2);

        let c = farey_cylinder(&h, &FareyWord::parse("0100").unwrap()).unwrap();
        assert!((c.left - 4.0 / 9.0).abs() < 1e-15);
        assert!((c.right - 0.5).abs() < 1e-15);
        assert!((c.log_lambda - (1.0f64 / 18.0).ln()).abs() < 1e-14);

        let (l, r) = farey_cylinder_endpoints_exact(&h, &FareyWord::parse("0100").unwrap()).unwrap();
        assert_eq!(l, rat(4, 9));
        assert_eq!(r, rat(1, 2));

        assert!(farey_cylinder(&h, &FareyWord::finite(vec![])).is_err());
    }

    #[test]
    fn cylinder_nesting_and_measure() {
        let h = Partition::harmonic();
        let parent = farey_cylinder(&h, &FareyWord::parse("0100").unwrap()).unwrap();
        for bit in [false, true] {
            let mut bits: Vec<bool> = FareyWord::parse("0100").unwrap().bits().to_vec();
            bits.push(bit);
            let child = farey_cylinder(&h, &FareyWord::finite(bits)).unwrap();
            assert!(child.left >= parent.left - 1e-15 && child.right <= parent.right + 1e-15);
        }
        // measure identity over a spread of words
        for w in ["1", "10", "0011", "010010", "1101"] {
            let c = farey_cylinder(&h, &FareyWord::parse(w).unwrap()).unwrap();
            let width = c.right - c.left;
            assert!(
                (width - c.log_lambda.exp()).abs() < 1e-12 * width.max(1e-300),
                "word {w}"
            );
        }
    }
}
