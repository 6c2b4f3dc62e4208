//! Heavier derived-value checks: Monte-Carlo oracles for the finite-data
//! classifier, cross-module consistency of levels, the cylinder measure
//! identity at depth, and an independent pointwise route to the Lyapunov
//! exponent.

use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use alpha_farey::{
    classify_empirical, classify_periodic, farey_cylinder, farey_cylinder_endpoints_exact,
    farey_map, luroth_value, lyapunov_cycle, s_range, FareyWord, LurothDigits, Partition, Verdict,
};

const LN2: f64 = std::f64::consts::LN_2;

/// i.i.d. digits under the Lebesgue digit law, enough to cover `levels`.
fn lebesgue_digits(p: &Partition, rng: &mut impl Rng, levels: u64) -> LurothDigits {
    let mut v = Vec::new();
    let mut covered = 0u64;
    while covered < levels {
        let x = 1.0 - rng.random::<f64>();
        let d = p.atom_index(x).unwrap_or(p.horizon());
        covered += d;
        v.push(d);
    }
    LurothDigits::Truncated(v)
}

#[test]
fn empirical_classifier_monte_carlo() {
    // Lebesgue-typical points land in Theta_0: the harmonic level tends to 0,
    // the geometric:3 level to about 0.6365 < log 2.
    let h = Partition::harmonic();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut zeros = 0u32;
    for _ in 0..200 {
        let d = lebesgue_digits(&h, &mut rng, 400);
        if classify_empirical(&h, &d, 400, 0.05).unwrap().verdict == Verdict::Zero {
            zeros += 1;
        }
    }
    assert!(zeros >= 190, "harmonic: only {zeros}/200 classified Zero");

    let g = Partition::geometric(3.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let mut zeros = 0u32;
    for _ in 0..200 {
        let d = lebesgue_digits(&g, &mut rng, 2000);
        if classify_empirical(&g, &d, 2000, 0.02).unwrap().verdict == Verdict::Zero {
            zeros += 1;
        }
    }
    assert!(zeros >= 180, "geometric:3: only {zeros}/200 classified Zero");
}

#[test]
fn cycle_levels_match_spectrum_side() {
    // classify_periodic's side of log 2 agrees with the sign convention the
    // dimension report uses for the same level
    for (p, period, expect_side) in [
        (Partition::harmonic(), vec![2u64], 1.0),
        (Partition::harmonic(), vec![5], -1.0),
        (Partition::geometric(3.0).unwrap(), vec![1], -1.0),
        (Partition::geometric(3.0).unwrap(), vec![3], 1.0),
        (Partition::geometric(1.5).unwrap(), vec![1], 1.0),
    ] {
        let d = LurothDigits::periodic(period.clone()).unwrap();
        let s = lyapunov_cycle(&p, &d).unwrap();
        let r = s_range(&p);
        assert!(s > r.s_minus - 1e-12 && s < r.s_plus + 1e-12, "cycle level in range");
        let v = classify_periodic(&p, &d).unwrap();
        let side = (s - LN2).signum();
        assert_eq!(side, expect_side, "{} {:?}", p.spec_string(), period);
        match v.verdict {
            Verdict::Infinity => assert!(side > 0.0),
            Verdict::Zero => assert!(side < 0.0),
            other => panic!("unexpected verdict {other:?}"),
        }
    }
}

#[test]
fn measure_identity_to_level_60() {
    // exact endpoints against the log-measure, relative 1e-9 up to level 60
    let h = Partition::harmonic();
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    for _ in 0..100 {
        let len = rng.random_range(1..=60);
        let bits: Vec<bool> = (0..len).map(|_| rng.random_bool(0.5)).collect();
        let w = FareyWord::finite(bits);
        let c = farey_cylinder(&h, &w).unwrap();
        let (l, r) = farey_cylinder_endpoints_exact(&h, &w).unwrap();
        let width = (r - l).to_f64().unwrap();
        let lam = c.log_lambda.exp();
        assert!(
            (width - lam).abs() <= 1e-9 * width,
            "word {w}: width {width:e} vs exp(log_lambda) {lam:e}"
        );
    }
}

#[test]
fn pointwise_float_lyapunov_route() {
    // independent route: iterate the float orbit of [2 periodic] and average
    // log |F'| read off the atom slopes pointwise (float orbits drift off the
    // periodic cycle exponentially, so only a short window is meaningful)
    let h = Partition::harmonic();
    let d = LurothDigits::periodic(vec![2]).unwrap();
    let mut x = luroth_value(&h, &d, 64).unwrap().value;
    let mut sum = 0.0;
    let n = 30u32;
    for _ in 0..n {
        let atom = h.atom_index(x).unwrap();
        let slope = if atom == 1 {
            1.0 / h.atom(1).unwrap()
        } else {
            h.atom(atom - 1).unwrap() / h.atom(atom).unwrap()
        };
        sum += slope.ln();
        x = farey_map(&h, x).unwrap();
    }
    let avg = sum / n as f64;
    let cycle = lyapunov_cycle(&h, &d).unwrap();
    assert!((avg - cycle).abs() < 1e-6, "pointwise {avg} vs cycle {cycle}");
}
