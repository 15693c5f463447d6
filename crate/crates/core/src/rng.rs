//! Deterministic random streams.
//!
//! Every stream is a xoshiro256** generator whose 256-bit state is filled
//! from a SplitMix64 sequence. The SplitMix64 seed for stream
//! `(master_seed, stream_index)` is
//!
//! ```text
//! seed = mix64(master_seed ^ mix64(stream_index))
//! ```
//!
//! where `mix64(x)` is the first SplitMix64 output for state `x`. Both
//! `mix64` steps are bijections on `u64`, so distinct stream indices under
//! one master seed get distinct SplitMix64 seeds. The four state words are
//! the next four SplitMix64 outputs from `seed`.
//!
//! Uniform doubles are `(next_u64() >> 11) * 2^-53`, which lies in `[0, 1)`.
//! A Bernoulli(p) draw always consumes exactly one uniform and succeeds iff
//! `u < p`. These conventions are part of the reproducibility contract and
//! must not change.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 (Steele, Lea & Flood; constants from Vigna's reference code).
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

/// First SplitMix64 output for state `x`.
#[inline]
pub fn mix64(x: u64) -> u64 {
    SplitMix64::new(x).next_u64()
}

/// A xoshiro256** stream tagged with the seed lineage it was derived from.
#[derive(Clone, Debug)]
pub struct RngStream {
    s: [u64; 4],
    master_seed: u64,
    stream_index: u64,
}

impl RngStream {
    pub fn derive(master_seed: u64, stream_index: u64) -> Self {
        let mut sm = SplitMix64::new(mix64(master_seed ^ mix64(stream_index)));
        let s = [sm.next_u64(), sm.next_u64(), sm.next_u64(), sm.next_u64()];
        Self {
            s,
            master_seed,
            stream_index,
        }
    }

    pub fn lineage(&self) -> (u64, u64) {
        (self.master_seed, self.stream_index)
    }

    pub fn state(&self) -> [u64; 4] {
        self.s
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.s;
        let result = s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Uniform integer in `0..bound` (Lemire's multiply-shift with rejection).
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "below(0)");
        let mut m = (self.next_u64() as u128) * (bound as u128);
        if (m as u64) < bound {
            let threshold = bound.wrapping_neg() % bound;
            while (m as u64) < threshold {
                m = (self.next_u64() as u128) * (bound as u128);
            }
        }
        (m >> 64) as u64
    }
}

/// Stream for `(master_seed, stream_index)`.
pub fn derive_stream(master_seed: u64, stream_index: u64) -> RngStream {
    RngStream::derive(master_seed, stream_index)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_vector() {
        // Published test vector for seed 1234567.
        let mut sm = SplitMix64::new(1234567);
        let expected = [
            6457827717110365317u64,
            3203168211198807973,
            9817491932198370423,
            4593380528125082431,
            16408922859458223821,
        ];
        for e in expected {
            assert_eq!(sm.next_u64(), e);
        }
    }

    #[test]
    fn xoshiro_matches_reference_crate() {
        use rand_core::{RngCore, SeedableRng};
        let mut ours = RngStream::derive(42, 3);
        let mut seed = [0u8; 32];
        for (i, w) in ours.state().iter().enumerate() {
            seed[i * 8..i * 8 + 8].copy_from_slice(&w.to_le_bytes());
        }
        let mut reference = rand_xoshiro::Xoshiro256StarStar::from_seed(seed);
        for _ in 0..1000 {
            assert_eq!(ours.next_u64(), reference.next_u64());
        }
    }

    #[test]
    fn same_lineage_same_sequence() {
        let a: Vec<u64> = {
            let mut r = derive_stream(7, 11);
            (0..1000).map(|_| r.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut r = derive_stream(7, 11);
            (0..1000).map(|_| r.next_u64()).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn neighbouring_indices_differ() {
        for i in 0..64 {
            let mut a = derive_stream(99, i);
            let mut b = derive_stream(99, i + 1);
            let differs = (0..1000).any(|_| a.next_u64() != b.next_u64());
            assert!(differs, "streams {i} and {} coincide", i + 1);
        }
    }

    #[test]
    fn thread_count_does_not_matter() {
        let serial: Vec<Vec<u64>> = (0..8)
            .map(|i| {
                let mut r = derive_stream(5, i);
                (0..1000).map(|_| r.next_u64()).collect()
            })
            .collect();
        let handles: Vec<_> = (0..8)
            .map(|i| {
                std::thread::spawn(move || {
                    let mut r = derive_stream(5, i);
                    (0..1000).map(|_| r.next_u64()).collect::<Vec<_>>()
                })
            })
            .collect();
        let threaded: Vec<Vec<u64>> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        assert_eq!(serial, threaded);
    }

    #[test]
    fn uniform_range_and_below() {
        let mut r = derive_stream(1, 1);
        let mut counts = [0usize; 7];
        for _ in 0..70_000 {
            let u = r.next_f64();
            assert!((0.0..1.0).contains(&u));
            counts[r.below(7) as usize] += 1;
        }
        // each bucket ~ 10_000 with sd ~ 93
        for c in counts {
            assert!((c as i64 - 10_000).abs() < 500, "{counts:?}");
        }
    }
}
