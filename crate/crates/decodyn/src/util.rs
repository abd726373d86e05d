//! Small shared helpers: deterministic seed derivation and total variation.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; used to derive independent child seeds from a master
/// seed plus a stream index, so batch items stay reproducible individually.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeded RNG for a derived stream. ChaCha8 keeps the stream stable across
/// platforms and releases.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(seed, stream))
}

/// Total variation distance between two finite distributions of equal length.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Smallest integer `k` with `alpha^k * d0 <= delta`, i.e.
/// `ceil(ln(d0/delta) / ln(1/alpha))`, the geometric mixing bound.
///
/// Callers guarantee `0 <= alpha < 1`, `d0 > 0`, `delta > 0`. Returns 0 when
/// `delta >= d0` (already within tolerance) and 1 when `alpha == 0` (one step
/// converges, sidestepping the log-of-zero singularity). The ceiling snaps to
/// nearest when the ratio sits within 1e-9 of an integer, so exact cases like
/// `ln 8 / ln 2` do not round up spuriously.
pub fn geometric_rounds(alpha: f64, d0: f64, delta: f64) -> u64 {
    debug_assert!((0.0..1.0).contains(&alpha));
    debug_assert!(d0 > 0.0 && delta > 0.0);
    if delta >= d0 {
        return 0;
    }
    if alpha == 0.0 {
        return 1;
    }
    let ratio = (d0 / delta).ln() / (1.0 / alpha).ln();
    let nearest = ratio.round();
    if (ratio - nearest).abs() < 1e-9 {
        nearest as u64
    } else {
        ratio.ceil() as u64
    }
}
