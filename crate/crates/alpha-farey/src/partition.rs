//! Countable interval partitions of (0,1] with atoms accumulating only at the
//! origin, described by atom masses `a_n` and tails `t_n = sum_{k>=n} a_k`.
//!
//! Built-in families keep `t_n` in closed form so tails, atoms and their logs
//! are evaluated analytically (never as logs of rounded products). Custom
//! partitions supply an explicit tail prefix plus a tail model for everything
//! beyond it, so infinite series over the partition always have analytic tail
//! bounds.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use serde::Deserialize;

use crate::error::{Error, Result};

/// Default maximum index with guaranteed evaluation.
pub const DEFAULT_HORIZON: u64 = 1_000_000;

/// Analytic description of tails beyond a custom partition's explicit prefix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailModel {
    /// `t_n = t_K * rho^{-(n-K)}` past the prefix end `K`; requires `rho > 1`.
    GeometricRatio(f64),
    /// `t_n = t_K * (K/n)^tau` past the prefix end `K`; requires `tau > 0`.
    PowerExponent(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `t_n = 2^{-(n-1)}`, `a_n = 2^{-n}`.
    Dyadic,
    /// `t_n = 1/n`, `a_n = 1/(n(n+1))`.
    Harmonic,
    /// `t_n = tau^{-(n-1)}`, `a_n = (tau-1) tau^{-n}`, `tau > 1`.
    Geometric { tau: f64 },
    /// `t_n = n^{-tau}`, `tau > 0` (slowly-varying correction fixed to 1).
    PowerLaw { tau: f64 },
    /// Explicit tail prefix plus a tail model for larger indices.
    Custom { tails: Vec<f64>, model: TailModel },
}

/// Tail-decay classification.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum TailClass {
    Dyadic,
    Expanding { rho: f64 },
    Expansive { tau: f64 },
    Other,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct Classification {
    #[serde(flatten)]
    pub class: TailClass,
    pub eventually_decreasing: bool,
    /// Smallest verified index from which `a_n > a_{n+1}` holds onward.
    pub decreasing_from: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Partition {
    family: Family,
    horizon: u64,
    spec: String,
}

#[derive(Deserialize)]
struct CustomFile {
    tails: Vec<f64>,
    tail_model: CustomFileModel,
}

#[derive(Deserialize)]
struct CustomFileModel {
    kind: String,
    param: f64,
}

impl Partition {
    pub fn dyadic() -> Self {
        Partition { family: Family::Dyadic, horizon: DEFAULT_HORIZON, spec: "dyadic".into() }
    }

    pub fn harmonic() -> Self {
        Partition { family: Family::Harmonic, horizon: DEFAULT_HORIZON, spec: "harmonic".into() }
    }

    pub fn geometric(tau: f64) -> Result<Self> {
        if !tau.is_finite() || tau <= 1.0 {
            return Err(Error::InvalidPartition(format!(
                "geometric partition requires tau > 1, got {tau}"
            )));
        }
        Ok(Partition {
            family: Family::Geometric { tau },
            horizon: DEFAULT_HORIZON,
            spec: format!("geometric:{tau}"),
        })
    }

    pub fn power_law(tau: f64) -> Result<Self> {
        if !tau.is_finite() || tau <= 0.0 {
            return Err(Error::InvalidPartition(format!(
                "power-law partition requires tau > 0, got {tau}"
            )));
        }
        Ok(Partition {
            family: Family::PowerLaw { tau },
            horizon: DEFAULT_HORIZON,
            spec: format!("powerlaw:{tau}"),
        })
    }

    /// Custom partition from an explicit tail prefix and a tail model.
    ///
    /// `tails[0]` must be exactly 1 and the prefix strictly decreasing and
    /// positive; the model must decay. A bare finite list without a model is
    /// unrepresentable by construction.
    pub fn custom(tails: Vec<f64>, model: TailModel) -> Result<Self> {
        if tails.is_empty() {
            return Err(Error::InvalidPartition("custom partition needs at least t_1".into()));
        }
        if tails[0] != 1.0 {
            return Err(Error::BadTail { index: 1, reason: format!("t_1 must be exactly 1, got {}", tails[0]) });
        }
        for (i, w) in tails.windows(2).enumerate() {
            if !w[1].is_finite() || w[1] <= 0.0 {
                return Err(Error::BadTail {
                    index: i as u64 + 2,
                    reason: format!("tail must be positive and finite, got {}", w[1]),
                });
            }
            if w[1] >= w[0] {
                return Err(Error::BadTail {
                    index: i as u64 + 2,
                    reason: format!("tails must be strictly decreasing: t_{} = {} >= t_{} = {}", i + 2, w[1], i + 1, w[0]),
                });
            }
        }
        match model {
            TailModel::GeometricRatio(rho) if !(rho.is_finite() && rho > 1.0) => {
                return Err(Error::InvalidPartition(format!("tail model ratio must be > 1, got {rho}")));
            }
            TailModel::PowerExponent(tau) if !(tau.is_finite() && tau > 0.0) => {
                return Err(Error::InvalidPartition(format!("tail model exponent must be > 0, got {tau}")));
            }
            _ => {}
        }
        Ok(Partition {
            family: Family::Custom { tails, model },
            horizon: DEFAULT_HORIZON,
            spec: "custom".into(),
        })
    }

    pub fn with_horizon(mut self, horizon: u64) -> Result<Self> {
        let min = match &self.family {
            Family::Custom { tails, .. } => tails.len() as u64,
            _ => 2,
        };
        if horizon < min {
            return Err(Error::InvalidPartition(format!(
                "horizon {horizon} below minimum {min} for this partition"
            )));
        }
        self.horizon = horizon;
        Ok(self)
    }

    /// Parse a partition spec string: `dyadic`, `harmonic`, `geometric:<tau>`,
    /// `powerlaw:<tau>`, `custom:<path>` (JSON file with `tails` and `tail_model`).
    pub fn from_spec(spec: &str) -> Result<Self> {
        let s = spec.trim();
        if s == "dyadic" {
            return Ok(Self::dyadic());
        }
        if s == "harmonic" {
            return Ok(Self::harmonic());
        }
        if let Some(rest) = s.strip_prefix("geometric:") {
            let tau: f64 = rest.parse().map_err(|_| Error::Parse(format!("bad tau `{rest}`")))?;
            return Self::geometric(tau);
        }
        if let Some(rest) = s.strip_prefix("powerlaw:") {
            let tau: f64 = rest.parse().map_err(|_| Error::Parse(format!("bad tau `{rest}`")))?;
            return Self::power_law(tau);
        }
        if let Some(path) = s.strip_prefix("custom:") {
            let text = std::fs::read_to_string(path)?;
            let file: CustomFile = serde_json::from_str(&text)
                .map_err(|e| Error::Parse(format!("custom partition file {path}: {e}")))?;
            let model = match file.tail_model.kind.as_str() {
                "geometric" => TailModel::GeometricRatio(file.tail_model.param),
                "power" => TailModel::PowerExponent(file.tail_model.param),
                other => return Err(Error::Parse(format!("unknown tail model kind `{other}`"))),
            };
            let mut p = Self::custom(file.tails, model)?;
            p.spec = s.to_string();
            return Ok(p);
        }
        Err(Error::Parse(format!("unknown partition spec `{s}`")))
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    /// Canonical spec string, echoed in reports and CLI output.
    pub fn spec_string(&self) -> &str {
        &self.spec
    }

    /// Whether this partition equals the dyadic partition as a set
    /// (`t_n = 2^{-(n-1)}` for every n), under any parametrisation.
    pub fn is_dyadic(&self) -> bool {
        match &self.family {
            Family::Dyadic => true,
            Family::Geometric { tau } => *tau == 2.0,
            Family::Custom { tails, model: TailModel::GeometricRatio(rho) } => {
                *rho == 2.0
                    && tails.iter().enumerate().all(|(i, t)| *t == 0.5f64.powi(i as i32))
            }
            _ => false,
        }
    }

    fn check_range(&self, n: u64) -> Result<()> {
        if n == 0 || n > self.horizon {
            return Err(Error::BeyondHorizon { n, horizon: self.horizon });
        }
        Ok(())
    }

    /// `t_n`, valid for `1 <= n <= horizon`.
    pub fn tail(&self, n: u64) -> Result<f64> {
        self.check_range(n)?;
        Ok(self.tail_unchecked(n))
    }

    /// `log t_n`, computed from the analytic form.
    pub fn log_tail(&self, n: u64) -> Result<f64> {
        self.check_range(n)?;
        Ok(self.log_tail_unchecked(n))
    }

    /// `a_n = t_n - t_{n+1}`, valid for `1 <= n <= horizon`.
    pub fn atom(&self, n: u64) -> Result<f64> {
        self.check_range(n)?;
        Ok(self.atom_unchecked(n))
    }

    /// `log a_n`, computed from the analytic form.
    pub fn log_atom(&self, n: u64) -> Result<f64> {
        self.check_range(n)?;
        Ok(self.log_atom_unchecked(n))
    }

    pub(crate) fn tail_unchecked(&self, n: u64) -> f64 {
        match &self.family {
            Family::Dyadic => 0.5f64.powi((n - 1) as i32),
            Family::Harmonic => 1.0 / n as f64,
            Family::Geometric { tau } => (-((n - 1) as f64) * tau.ln()).exp(),
            Family::PowerLaw { tau } => (-tau * (n as f64).ln()).exp(),
            Family::Custom { tails, model } => {
                let k = tails.len() as u64;
                if n <= k {
                    tails[(n - 1) as usize]
                } else {
                    let t_k = tails[(k - 1) as usize];
                    match model {
                        TailModel::GeometricRatio(rho) => t_k * (-((n - k) as f64) * rho.ln()).exp(),
                        TailModel::PowerExponent(tau) => t_k * (tau * ((k as f64).ln() - (n as f64).ln())).exp(),
                    }
                }
            }
        }
    }

    pub(crate) fn log_tail_unchecked(&self, n: u64) -> f64 {
        match &self.family {
            Family::Dyadic => -((n - 1) as f64) * std::f64::consts::LN_2,
            Family::Harmonic => -(n as f64).ln(),
            Family::Geometric { tau } => -((n - 1) as f64) * tau.ln(),
            Family::PowerLaw { tau } => -tau * (n as f64).ln(),
            Family::Custom { tails, model } => {
                let k = tails.len() as u64;
                if n <= k {
                    tails[(n - 1) as usize].ln()
                } else {
                    let log_t_k = tails[(k - 1) as usize].ln();
                    match model {
                        TailModel::GeometricRatio(rho) => log_t_k - ((n - k) as f64) * rho.ln(),
                        TailModel::PowerExponent(tau) => log_t_k + tau * ((k as f64).ln() - (n as f64).ln()),
                    }
                }
            }
        }
    }

    pub(crate) fn atom_unchecked(&self, n: u64) -> f64 {
        match &self.family {
            Family::Dyadic => 0.5f64.powi(n as i32),
            Family::Harmonic => 1.0 / (n as f64 * (n as f64 + 1.0)),
            // the linear-domain atom is the literal tail difference, so the
            // telescoping identity holds to the last ulp; logs stay analytic
            _ => self.tail_unchecked(n) - self.tail_unchecked(n + 1),
        }
    }

    pub(crate) fn log_atom_unchecked(&self, n: u64) -> f64 {
        match &self.family {
            Family::Dyadic => -(n as f64) * std::f64::consts::LN_2,
            Family::Harmonic => -((n as f64).ln() + (n as f64 + 1.0).ln()),
            Family::Geometric { tau } => (tau - 1.0).ln() - (n as f64) * tau.ln(),
            Family::PowerLaw { tau } => {
                // a_n = n^-tau (1 - (1+1/n)^-tau), expm1/ln_1p keep the bracket accurate
                -tau * (n as f64).ln() + (-(-tau * (1.0 / n as f64).ln_1p()).exp_m1()).ln()
            }
            Family::Custom { tails, model } => {
                let k = tails.len() as u64;
                if n < k {
                    (tails[(n - 1) as usize] - tails[n as usize]).ln()
                } else if n == k {
                    // junction atom: explicit t_n minus first modelled tail
                    (self.tail_unchecked(n) - self.tail_unchecked(n + 1)).ln()
                } else {
                    match model {
                        TailModel::GeometricRatio(rho) => {
                            self.log_tail_unchecked(n) + (1.0 - 1.0 / rho).ln()
                        }
                        TailModel::PowerExponent(tau) => {
                            self.log_tail_unchecked(n)
                                + (-(-tau * (1.0 / n as f64).ln_1p()).exp_m1()).ln()
                        }
                    }
                }
            }
        }
    }

    /// Exact rational `t_n`, when the family admits it (dyadic, harmonic,
    /// geometric with the parameter taken as the exact rational the float
    /// denotes, power-law with integer exponent, custom with exact prefix).
    pub fn tail_exact(&self, n: u64) -> Option<BigRational> {
        match &self.family {
            Family::Dyadic => Some(BigRational::new(BigInt::one(), BigInt::from(2u8).pow((n - 1) as u32))),
            Family::Harmonic => Some(BigRational::new(BigInt::one(), BigInt::from(n))),
            Family::Geometric { tau } => {
                let t = BigRational::from_float(*tau)?;
                Some((t.recip()).pow((n - 1) as i32))
            }
            Family::PowerLaw { tau } => {
                let k = integer_exponent(*tau)?;
                Some(BigRational::new(BigInt::one(), BigInt::from(n).pow(k)))
            }
            Family::Custom { tails, model } => {
                let klen = tails.len() as u64;
                if n <= klen {
                    BigRational::from_float(tails[(n - 1) as usize])
                } else {
                    let t_k = BigRational::from_float(tails[(klen - 1) as usize])?;
                    match model {
                        TailModel::GeometricRatio(rho) => {
                            let r = BigRational::from_float(*rho)?;
                            Some(t_k * r.recip().pow((n - klen) as i32))
                        }
                        TailModel::PowerExponent(tau) => {
                            let e = integer_exponent(*tau)?;
                            let ratio = BigRational::new(BigInt::from(klen), BigInt::from(n));
                            Some(t_k * ratio.pow(e as i32))
                        }
                    }
                }
            }
        }
    }

    pub fn atom_exact(&self, n: u64) -> Option<BigRational> {
        Some(self.tail_exact(n)? - self.tail_exact(n + 1)?)
    }

    /// Whether exact rational tail arithmetic is available.
    pub fn has_exact_tails(&self) -> bool {
        self.tail_exact(1).is_some() && self.tail_exact(2).is_some()
    }

    /// Atom index of `x in (0,1]`: the `n` with `t_{n+1} < x <= t_n`.
    pub fn atom_index(&self, x: f64) -> Result<u64> {
        if !(x > 0.0 && x <= 1.0) {
            return Err(Error::OutOfDomain { value: x, domain: "(0, 1]" });
        }
        let mut n = self.atom_index_candidate(x).max(1);
        // settle against the same tail values digit extraction compares with
        for _ in 0..1000 {
            if x > self.tail_unchecked(n) {
                n -= 1;
                continue;
            }
            if x <= self.tail_unchecked(n + 1) {
                n += 1;
                if n > self.horizon {
                    return Err(Error::BeyondHorizon { n, horizon: self.horizon });
                }
                continue;
            }
            if n > self.horizon {
                return Err(Error::BeyondHorizon { n, horizon: self.horizon });
            }
            return Ok(n);
        }
        Err(Error::Numerical(format!("atom index search did not settle at x = {x}")))
    }

    fn atom_index_candidate(&self, x: f64) -> u64 {
        let guess = match &self.family {
            Family::Dyadic => (-x.log2()).floor() + 1.0,
            Family::Harmonic => (1.0 / x).floor(),
            Family::Geometric { tau } => (-x.ln() / tau.ln()).floor() + 1.0,
            Family::PowerLaw { tau } => x.powf(-1.0 / tau).floor(),
            Family::Custom { tails, model } => {
                let k = tails.len();
                if x >= tails[k - 1] {
                    // binary search in the prefix
                    let mut lo = 1usize;
                    let mut hi = k;
                    while lo < hi {
                        let mid = (lo + hi).div_ceil(2);
                        if x <= tails[mid - 1] {
                            lo = mid;
                        } else {
                            hi = mid - 1;
                        }
                    }
                    return lo as u64;
                }
                let t_k = tails[k - 1];
                let kf = k as f64;
                match model {
                    TailModel::GeometricRatio(rho) => kf + ((t_k / x).ln() / rho.ln()).floor(),
                    TailModel::PowerExponent(tau) => (kf * (t_k / x).powf(1.0 / tau)).floor().max(1.0),
                }
            }
        };
        if guess.is_finite() && guess >= 1.0 {
            guess.min(1e18) as u64
        } else {
            1
        }
    }

    /// Exact atom index for rational `x in (0,1]`.
    pub fn atom_index_exact(&self, x: &BigRational) -> Result<u64> {
        let xf = x.to_f64().unwrap_or(0.0);
        if x <= &BigRational::from_integer(BigInt::from(0)) || x > &BigRational::one() {
            return Err(Error::OutOfDomain { value: xf, domain: "(0, 1]" });
        }
        let mut n = if xf > 0.0 { self.atom_index_candidate(xf).max(1) } else { self.horizon };
        for _ in 0..1000 {
            let t_n = self
                .tail_exact(n)
                .ok_or_else(|| Error::ExactUnavailable(self.spec.clone()))?;
            if x > &t_n {
                n -= 1;
                continue;
            }
            let t_n1 = self
                .tail_exact(n + 1)
                .ok_or_else(|| Error::ExactUnavailable(self.spec.clone()))?;
            if x <= &t_n1 {
                n += 1;
                if n > self.horizon {
                    return Err(Error::BeyondHorizon { n, horizon: self.horizon });
                }
                continue;
            }
            if n > self.horizon {
                return Err(Error::BeyondHorizon { n, horizon: self.horizon });
            }
            return Ok(n);
        }
        Err(Error::Numerical("exact atom index search did not settle".into()))
    }

    /// Tail-decay classification together with the eventually-decreasing check.
    pub fn classify(&self) -> Classification {
        if self.is_dyadic() {
            return Classification {
                class: TailClass::Dyadic,
                eventually_decreasing: true,
                decreasing_from: 1,
                note: None,
            };
        }
        let (class, note) = match &self.family {
            Family::Dyadic => unreachable!("handled by is_dyadic"),
            Family::Harmonic => (TailClass::Expansive { tau: 1.0 }, None),
            Family::Geometric { tau } => (TailClass::Expanding { rho: *tau }, None),
            Family::PowerLaw { tau } => (TailClass::Expansive { tau: *tau }, None),
            Family::Custom { model, .. } => match model {
                TailModel::GeometricRatio(rho) => (
                    TailClass::Expanding { rho: *rho },
                    Some("classified by tail model".to_string()),
                ),
                TailModel::PowerExponent(tau) => (
                    TailClass::Expansive { tau: *tau },
                    Some("classified by tail model".to_string()),
                ),
            },
        };
        let decreasing_from = match &self.family {
            Family::Custom { tails, .. } => {
                // beyond the prefix both models give strictly decreasing atoms,
                // so only the prefix and junction need scanning
                let k = tails.len() as u64;
                let mut from = 1;
                for n in 1..=k {
                    if self.atom_unchecked(n) <= self.atom_unchecked(n + 1) {
                        from = n + 1;
                    }
                }
                from
            }
            _ => 1,
        };
        Classification { class, eventually_decreasing: true, decreasing_from, note }
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.spec)
    }
}

fn integer_exponent(tau: f64) -> Option<u32> {
    if tau > 0.0 && tau.fract() == 0.0 && tau <= 64.0 {
        Some(tau as u32)
    } else {
        None
    }
}
