//! alpha-Lüroth and alpha-Farey interval maps over countable partitions of
//! (0,1]: digit codecs, the conjugating homeomorphism to the tent map with
//! certified truncation error, classification of its generalized derivative,
//! and the multifractal dimension spectrum of Lyapunov level sets.

pub mod codec;
pub mod conjugacy;
pub mod derivative;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod partition;
pub mod spectrum;

pub use codec::{
    farey_cylinder, farey_cylinder_endpoints_exact, farey_to_luroth, is_alpha_rational,
    is_alpha_rational_exact, luroth_cylinder, luroth_digits, luroth_digits_exact, luroth_to_farey,
    luroth_value, luroth_value_exact, parse_real, CylinderInterval, FareyWord, LurothDigits,
    ParsedReal, RationalityMode, ValueWithError,
};
pub use num_rational::BigRational;
pub use conjugacy::{
    check_conjugacy, conjugate_between, mu_cylinder, mu_interval, theta, theta_at, theta_exact,
    theta_inverse, ThetaInverse, ThetaValue,
};
pub use derivative::{
    alpha_rational_factor, approximant_ratio, classify_empirical, classify_finite,
    classify_oscillating, classify_periodic, m_set, oscillating_digits, ratio_sequence,
    DerivativeVerdict, FactorLimit, MSet, Rule, Verdict,
};
pub use dynamics::{
    birkhoff, farey_map, level_s, luroth_map, lyapunov_cycle, lyapunov_farey, pi_luroth, tent,
    BirkhoffSums,
};
pub use error::{Error, Result};
pub use partition::{Classification, Family, Partition, TailClass, TailModel, DEFAULT_HORIZON};
pub use spectrum::{
    free_energy_t, free_energy_v, legendre_sigma, partition_sum, pvb_discriminant, pvb_threshold,
    s_range, theorem_dimensions, typical_level, FreeEnergyValue, SRange, SpectrumPoint,
    SumOutcome, ThetaDimensions,
};
