//! Small deterministic helpers shared by the seeded components.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over a byte stream.
pub(crate) fn fnv1a(bytes: impl IntoIterator<Item = u8>) -> u64 {
    bytes.into_iter().fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// SplitMix64 finalizer.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for a sub-stream identified by an integer (e.g. a search stage).
pub(crate) fn stream_seed(seed: u64, stream: u64) -> u64 {
    mix64(seed ^ mix64(stream.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

/// Per-document seed: independent of corpus order, so a document draws the
/// same randomness whether it is processed alone or inside a larger corpus.
pub fn doc_seed(seed: u64, doc_id: &str) -> u64 {
    mix64(seed ^ fnv1a(doc_id.bytes()))
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `ceil(fraction * n)` that is robust to representation error such as
/// `0.3 * 10 = 3.0000000000000004`.
pub(crate) fn ceil_fraction(fraction: f64, n: usize) -> usize {
    let exact = fraction * n as f64;
    let rounded = libm::round(exact);
    if libm::fabs(exact - rounded) < 1e-9 {
        rounded as usize
    } else {
        libm::ceil(exact) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_fraction_absorbs_float_noise() {
        assert_eq!(ceil_fraction(0.3, 10), 3);
        assert_eq!(ceil_fraction(0.3, 4), 2);
        assert_eq!(ceil_fraction(0.125, 8), 1);
        assert_eq!(ceil_fraction(0.001, 8), 1);
        assert_eq!(ceil_fraction(1.0, 7), 7);
    }

    #[test]
    fn doc_seed_depends_on_id() {
        assert_ne!(doc_seed(1, "a"), doc_seed(1, "b"));
        assert_eq!(doc_seed(1, "a"), doc_seed(1, "a"));
        assert_ne!(doc_seed(1, "a"), doc_seed(2, "a"));
    }
}
