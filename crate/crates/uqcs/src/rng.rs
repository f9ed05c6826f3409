//! Counter-based random streams for schedule-independent reproducibility.
//!
//! Every stochastic quantity is drawn from a ChaCha stream derived from the
//! master seed plus a list of integer tags (domain, grid indices, role).
//! Samples generated in parallel therefore never depend on execution order.

use num_complex::Complex64 as C64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Stream domains; first tag of every derivation.
pub mod domain {
    pub const CORRELATOR_SAMPLE: u64 = 1;
    pub const GATE_NOISE: u64 = 2;
    pub const TRACE_CIRCUIT: u64 = 3;
    pub const IQPE_ROUND: u64 = 4;
    pub const QUERY_NOISE: u64 = 5;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent ChaCha stream from `(master, tags...)`.
pub fn stream(master: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut h = splitmix64(master ^ 0x5851_f42d_4c95_7f2d);
    for (i, t) in tags.iter().enumerate() {
        h = splitmix64(h ^ t.wrapping_add(0x9e37_79b9).rotate_left((i % 61) as u32 + 1));
    }
    let mut seed = [0u8; 32];
    let mut acc = h;
    for chunk in seed.chunks_exact_mut(8) {
        acc = splitmix64(acc);
        chunk.copy_from_slice(&acc.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Stable 64-bit tag for a textual label (observable names etc.).
pub fn label_tag(label: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in label.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

/// One draw of a circularly-symmetric complex Gaussian with total variance
/// `var` (`var/2` per quadrature).
pub fn complex_gaussian<R: Rng>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(s * re, s * im)
}
