//! The alpha-Lüroth and alpha-Farey interval maps, the tent map, Birkhoff sums
//! of the digit potentials, and Lyapunov exponents along Farey orbits.
//!
//! On digit sequences `L_alpha` is the left shift; `F_alpha` decrements the
//! leading digit when it exceeds 1 and drops it otherwise. One Farey traversal
//! of a digit block `l` multiplies the branch slopes to `1/a_l`, which is what
//! makes cycle averages exact for periodic digits.

use serde::Serialize;

use crate::codec::LurothDigits;
use crate::error::{Error, Result};
use crate::partition::Partition;

/// Tent map: `2x` on [0, 1/2), `2 - 2x` on [1/2, 1].
pub fn tent(x: f64) -> f64 {
    assert!((0.0..=1.0).contains(&x), "tent map domain is [0,1], got {x}");
    if x < 0.5 {
        2.0 * x
    } else {
        2.0 - 2.0 * x
    }
}

/// `L_alpha(x) = (t_n - x)/a_n` on the atom `A_n`; 0 at the fixed point 0.
pub fn luroth_map(p: &Partition, x: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(0.0);
    }
    let n = p.atom_index(x)?;
    Ok(((p.tail_unchecked(n) - x) / p.atom_unchecked(n)).clamp(0.0, 1.0))
}

/// `F_alpha(x)`: `(1-x)/a_1` on `A_1`, `a_{n-1}(x - t_{n+1})/a_n + t_n` on
/// `A_n` for n >= 2; 0 at 0.
pub fn farey_map(p: &Partition, x: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(0.0);
    }
    let n = p.atom_index(x)?;
    if n == 1 {
        Ok(((1.0 - x) / p.atom_unchecked(1)).clamp(0.0, 1.0))
    } else {
        let v = p.atom_unchecked(n - 1) * (x - p.tail_unchecked(n + 1)) / p.atom_unchecked(n)
            + p.tail_unchecked(n);
        Ok(v.clamp(0.0, 1.0))
    }
}

/// Digit action of `L_alpha`: drop the leading digit. `None` once the orbit
/// has reached the fixed point 0.
pub fn luroth_digit_shift(d: &LurothDigits) -> Option<LurothDigits> {
    match d {
        LurothDigits::Finite(v) => {
            if v.len() == 1 {
                None
            } else {
                Some(LurothDigits::Finite(v[1..].to_vec()))
            }
        }
        LurothDigits::Truncated(v) => {
            if v.len() <= 1 {
                None
            } else {
                Some(LurothDigits::Truncated(v[1..].to_vec()))
            }
        }
        LurothDigits::EventuallyPeriodic { pre, period } => {
            if pre.is_empty() {
                let mut rot = period[1..].to_vec();
                rot.push(period[0]);
                Some(LurothDigits::EventuallyPeriodic { pre: Vec::new(), period: rot })
            } else {
                Some(LurothDigits::EventuallyPeriodic { pre: pre[1..].to_vec(), period: period.clone() })
            }
        }
    }
}

/// Digit action of `F_alpha`: decrement the leading digit if it exceeds 1,
/// else drop it.
pub fn farey_digit_step(d: &LurothDigits) -> Option<LurothDigits> {
    let first = d.digit(0)?;
    if first == 1 {
        return luroth_digit_shift(d);
    }
    match d {
        LurothDigits::Finite(v) => {
            let mut w = v.clone();
            w[0] -= 1;
            Some(LurothDigits::Finite(w))
        }
        LurothDigits::Truncated(v) => {
            let mut w = v.clone();
            w[0] -= 1;
            Some(LurothDigits::Truncated(w))
        }
        LurothDigits::EventuallyPeriodic { pre, period } => {
            let mut pre = pre.clone();
            if pre.is_empty() {
                pre = vec![period[0]];
                let mut rot = period[1..].to_vec();
                rot.push(period[0]);
                pre[0] -= 1;
                return Some(LurothDigits::EventuallyPeriodic { pre, period: rot });
            }
            pre[0] -= 1;
            Some(LurothDigits::EventuallyPeriodic { pre, period: period.clone() })
        }
    }
}

/// Birkhoff sums of the digit potentials over the first `n` Lüroth steps:
/// `sum_log_atoms = sum log a_{l_k}` and `sum_digits = sum l_k`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BirkhoffSums {
    pub n: usize,
    pub sum_log_atoms: f64,
    pub sum_digits: u64,
}

pub fn birkhoff(p: &Partition, d: &LurothDigits, n: usize) -> Result<BirkhoffSums> {
    let mut sum_log_atoms = 0.0;
    let mut sum_digits = 0u64;
    for k in 0..n {
        let l = d.digit(k).ok_or(Error::InsufficientDigits {
            needed: n as u64,
            available: k as u64,
        })?;
        if l > p.horizon() {
            return Err(Error::BeyondHorizon { n: l, horizon: p.horizon() });
        }
        sum_log_atoms += p.log_atom_unchecked(l);
        sum_digits += l;
    }
    Ok(BirkhoffSums { n, sum_log_atoms, sum_digits })
}

/// `Pi(L_alpha, x)`: the (negative) ratio `sum log a_{l_k} / sum l_k` over the
/// first `n` digits.
pub fn pi_luroth(p: &Partition, d: &LurothDigits, n: usize) -> Result<f64> {
    let b = birkhoff(p, d, n)?;
    Ok(b.sum_log_atoms / b.sum_digits as f64)
}

/// The level `s = -Pi`, used wherever a nonnegative level is required.
pub fn level_s(p: &Partition, d: &LurothDigits, n: usize) -> Result<f64> {
    Ok(-pi_luroth(p, d, n)?)
}

/// Lyapunov exponent estimate: the Birkhoff average of `log |F_alpha'|` over
/// `n_steps` Farey steps along the orbit coded by `d`. Slopes telescope over
/// digit blocks, so whole blocks contribute `-log a_l` over `l` steps.
pub fn lyapunov_farey(p: &Partition, d: &LurothDigits, n_steps: u64) -> Result<f64> {
    if n_steps == 0 {
        return Err(Error::Precondition("need at least one Farey step".into()));
    }
    let mut remaining = n_steps;
    let mut sum = 0.0;
    let mut i = 0usize;
    while remaining > 0 {
        let l = d.digit(i).ok_or(Error::InsufficientDigits {
            needed: n_steps,
            available: n_steps - remaining,
        })?;
        if l > p.horizon() {
            return Err(Error::BeyondHorizon { n: l, horizon: p.horizon() });
        }
        if l <= remaining {
            sum -= p.log_atom_unchecked(l);
            remaining -= l;
        } else {
            // partial block: slopes from atom l down to atom l-j+1 multiply to
            // a_{l-j}/a_l
            let j = remaining;
            sum += p.log_atom_unchecked(l - j) - p.log_atom_unchecked(l);
            remaining = 0;
        }
        i += 1;
    }
    Ok(sum / n_steps as f64)
}

/// Exact cycle value of the Lyapunov exponent for eventually periodic digits:
/// `sum_period(-log a_l) / sum_period l`.
pub fn lyapunov_cycle(p: &Partition, d: &LurothDigits) -> Result<f64> {
    match d {
        LurothDigits::EventuallyPeriodic { period, .. } => {
            let mut num = 0.0;
            let mut den = 0u64;
            for &l in period {
                if l > p.horizon() {
                    return Err(Error::BeyondHorizon { n: l, horizon: p.horizon() });
                }
                num -= p.log_atom_unchecked(l);
                den += l;
            }
            Ok(num / den as f64)
        }
        _ => Err(Error::Precondition("cycle value needs eventually periodic digits".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{luroth_digits_exact, luroth_to_farey, luroth_value_exact};
    use num_bigint::BigInt;
    use num_rational::BigRational;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn digits(s: &str) -> LurothDigits {
        LurothDigits::parse(s).unwrap()
    }

    #[test]
    fn map_values() {
        let h = Partition::harmonic();
        assert!((luroth_map(&h, 0.75).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(luroth_map(&h, 0.0).unwrap(), 0.0);
        assert!((luroth_map(&h, 4.0 / 9.0).unwrap() - 1.0 / 3.0).abs() < 1e-14);
        assert!((farey_map(&h, 4.0 / 9.0).unwrap() - 5.0 / 6.0).abs() < 1e-14);
        assert_eq!(tent(0.5), 1.0);
        let d = Partition::dyadic();
        for x in [0.1, 0.3, 0.7, 0.9] {
            assert!((farey_map(&d, x).unwrap() - tent(x)).abs() < 1e-15, "x={x}");
        }
    }

    #[test]
    fn digit_shift_conjugacy() {
        let h = Partition::harmonic();
        for x in [rat(3, 4), rat(4, 9), rat(7, 24), rat(5, 11)] {
            let d = luroth_digits_exact(&h, &x, 20).unwrap();
            let shifted = luroth_digit_shift(&d);
            let t = h.tail_exact(h.atom_index_exact(&x).unwrap()).unwrap();
            let a = h.atom_exact(h.atom_index_exact(&x).unwrap()).unwrap();
            let lx = (t - &x) / a;
            match shifted {
                None => assert!(lx == rat(0, 1)),
                Some(sd) => {
                    let again = luroth_digits_exact(&h, &lx, 20).unwrap();
                    assert_eq!(again, sd, "x = {x}");
                }
            }
        }
    }

    #[test]
    fn farey_acts_as_bit_shift() {
        let h = Partition::harmonic();
        for s in ["[2,3;(2)]", "[(3)]", "[1,4;(1,2)]"] {
            let d = digits(s);
            let stepped = farey_digit_step(&d).unwrap();
            let w = luroth_to_farey(&d).unwrap();
            let ws = luroth_to_farey(&stepped).unwrap();
            for i in 0..50 {
                assert_eq!(w.bit(i + 1), ws.bit(i), "{s} bit {i}");
            }
            // value-level check on one exact case
            let x = luroth_value_exact(&h, &d).unwrap();
            let fx = luroth_value_exact(&h, &stepped).unwrap();
            let n = h.atom_index_exact(&x).unwrap();
            let expected = if n == 1 {
                (h.tail_exact(1).unwrap() - &x) / h.atom_exact(1).unwrap()
            } else {
                h.atom_exact(n - 1).unwrap() * (&x - h.tail_exact(n + 1).unwrap())
                    / h.atom_exact(n).unwrap()
                    + h.tail_exact(n).unwrap()
            };
            assert_eq!(fx, expected, "{s}");
        }
    }

    #[test]
    fn birkhoff_sums() {
        let h = Partition::harmonic();
        let b = birkhoff(&h, &digits("[(2)]"), 2).unwrap();
        assert!((b.sum_log_atoms - 2.0 * (1.0f64 / 6.0).ln()).abs() < 1e-14);
        assert_eq!(b.sum_digits, 4);

        let b = birkhoff(&h, &digits("[1,2,3]"), 3).unwrap();
        let expect = (0.5f64).ln() + (1.0f64 / 6.0).ln() + (1.0f64 / 12.0).ln();
        assert!((b.sum_log_atoms - expect).abs() < 1e-14);
        assert_eq!(b.sum_digits, 6);

        let d = Partition::dyadic();
        let b = birkhoff(&d, &digits("[3,1,4]"), 3).unwrap();
        assert!((b.sum_log_atoms + b.sum_digits as f64 * std::f64::consts::LN_2).abs() < 1e-12);

        assert!(birkhoff(&h, &digits("[1,2]"), 3).is_err());
    }

    #[test]
    fn lyapunov_values() {
        let h = Partition::harmonic();
        let cyc = lyapunov_cycle(&h, &digits("[(2)]")).unwrap();
        assert!((cyc - 6.0f64.ln() / 2.0).abs() < 1e-14);
        let est = lyapunov_farey(&h, &digits("[(2)]"), 10_000).unwrap();
        assert!((est - cyc).abs() < 1e-12, "periodic estimate is the cycle value");

        let cyc5 = lyapunov_cycle(&h, &digits("[(5)]")).unwrap();
        assert!((cyc5 - 30.0f64.ln() / 5.0).abs() < 1e-14);

        let d = Partition::dyadic();
        let est = lyapunov_farey(&d, &digits("[3,1,4,1,5,9,2,6,...]"), 20).unwrap();
        assert!((est - std::f64::consts::LN_2).abs() < 1e-13);

        assert!(lyapunov_farey(&h, &digits("[2,3]"), 6).is_err());
        assert!(lyapunov_farey(&h, &digits("[2,3]"), 5).is_ok());
    }

    #[test]
    fn pi_and_level() {
        let d = Partition::dyadic();
        assert!((pi_luroth(&d, &digits("[3,1,4,...]"), 3).unwrap() + std::f64::consts::LN_2).abs() < 1e-14);
        let h = Partition::harmonic();
        assert!((pi_luroth(&h, &digits("[(1)]"), 7).unwrap() + std::f64::consts::LN_2).abs() < 1e-14);
        // cycle values of |Pi| and the Lyapunov exponent coincide
        for s in ["[(2)]", "[(5)]", "[(3,7)]"] {
            let dg = digits(s);
            let per_len = match &dg {
                LurothDigits::EventuallyPeriodic { period, .. } => period.len(),
                _ => unreachable!(),
            };
            let pi = pi_luroth(&h, &dg, per_len).unwrap();
            let lam = lyapunov_cycle(&h, &dg).unwrap();
            assert!((lam + pi).abs() < 1e-12, "{s}");
            assert!((level_s(&h, &dg, per_len).unwrap() - lam).abs() < 1e-12);
        }
    }

    #[test]
    fn branch_slopes() {
        for p in [Partition::harmonic(), Partition::geometric(3.0).unwrap()] {
            for n in 2..12u64 {
                let lo = p.tail(n + 1).unwrap();
                let hi = p.tail(n).unwrap();
                let x1 = lo + 0.25 * (hi - lo);
                let x2 = lo + 0.75 * (hi - lo);
                let slope = (farey_map(&p, x2).unwrap() - farey_map(&p, x1).unwrap()) / (x2 - x1);
                let expect = p.atom(n - 1).unwrap() / p.atom(n).unwrap();
                assert!((slope - expect).abs() < 1e-9 * expect, "{p} atom {n}");
                assert!(slope > 0.0);
            }
            // negative slope -1/a_1 on A_1
            let x1 = 0.8;
            let x2 = 0.9;
            let slope = (farey_map(&p, x2).unwrap() - farey_map(&p, x1).unwrap()) / (x2 - x1);
            assert!((slope + 1.0 / p.atom(1).unwrap()).abs() < 1e-9 / p.atom(1).unwrap());
        }
    }
}
