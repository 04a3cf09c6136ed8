//! Counter-based random number generation.
//!
//! Every Gaussian draw is a pure function of `(seed, counter, component)`,
//! so any sub-range of a Wiener path regenerates identically and replica
//! ensembles are reproducible independent of scheduling or worker count.

/// splitmix64 finalizer (Steele, Lea, Flood 2014).
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn to_unit(v: u64) -> f64 {
    // (0, 1]: never returns 0, so ln() below is safe.
    ((v >> 11) + 1) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

/// Standard normal draw keyed on `(seed, counter, component)`.
///
/// Counters are signed because Wiener-path cells extend to negative time;
/// the wrapping cast to `u64` keeps the keying deterministic.
#[inline]
pub fn gauss(seed: u64, counter: i64, component: u64) -> f64 {
    let k = splitmix64(
        seed ^ splitmix64((counter as u64).wrapping_mul(0xD134_2543_DE82_EF95))
            ^ component.wrapping_mul(0x2545_F491_4F6C_DD1D),
    );
    let u1 = to_unit(splitmix64(k));
    let u2 = to_unit(splitmix64(k ^ 0x6A09_E667_F3BC_C909));
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Seed for replica `index` of an ensemble, derived from the master seed.
#[inline]
pub fn replica_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(index.wrapping_mul(0x9E6C_63D0_876A_3F6B)))
}
