//! Seed derivation. One master seed fans out into independent streams so
//! that, for example, changing the number of sign flips leaves the splits
//! untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type Rng = ChaCha8Rng;

/// Independent random streams derived from a master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    Splits = 1,
    Selection = 2,
    Flips = 3,
    Design = 4,
    Noise = 5,
    Placement = 6,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of `stream` under `master`.
pub fn derive_seed(master: u64, stream: Stream) -> u64 {
    splitmix64(splitmix64(master) ^ (stream as u64).wrapping_mul(0xA24B_AED4_963E_E407))
}

/// Seed of the `index`-th child (e.g. a simulation replication) of `master`.
pub fn child_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(0x6A09_E667_F3BC_C909)))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn stream_rng(master: u64, stream: Stream) -> Rng {
    rng_from_seed(derive_seed(master, stream))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_differ() {
        let a = derive_seed(7, Stream::Splits);
        let b = derive_seed(7, Stream::Flips);
        assert_ne!(a, b);
        assert_eq!(a, derive_seed(7, Stream::Splits));
        assert_ne!(child_seed(7, 0), child_seed(7, 1));
    }
}
