//! Deterministic random number generation for reproducible problem instances.
//!
//! The generator is splitmix64: a single 64-bit counter advanced by the golden
//! ratio constant, with a three-stage mixing finalizer. It is documented here
//! in full so another implementation can reproduce every instance bit-for-bit:
//!
//! ```text
//! state += 0x9E3779B97F4A7C15
//! z = state
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! output = z ^ (z >> 31)
//! ```
//!
//! Uniform doubles in [0, 1) take the top 53 bits: `(u >> 11) * 2^-53`.
//! Standard normals use Box–Muller on pairs of uniforms,
//! `r = sqrt(-2 ln(1 - u1))`, `theta = 2 pi u2`, yielding `r cos theta` then
//! `r sin theta`. [`fill_normals`] draws whole pairs and discards a trailing
//! spare, so each array fill is independently reproducible. Index subsets come
//! from a partial Fisher–Yates shuffle ([`choose_distinct`]), result sorted
//! ascending.

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

/// Fill `out` with standard normal draws via Box–Muller.
///
/// Draws are made in pairs; when `out.len()` is odd the second member of the
/// final pair is discarded rather than cached, so consecutive calls do not
/// couple through hidden state.
pub fn fill_normals(rng: &mut SplitMix64, out: &mut [f64]) {
    let mut i = 0;
    while i < out.len() {
        let u1 = rng.next_f64();
        let u2 = rng.next_f64();
        let r = (-2.0 * (1.0 - u1).ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        out[i] = r * theta.cos();
        i += 1;
        if i < out.len() {
            out[i] = r * theta.sin();
            i += 1;
        }
    }
}

/// Choose `k` distinct indices from `0..n` by partial Fisher–Yates, sorted
/// ascending. Modulo bias is accepted and documented: `next_u64() % (n - i)`.
pub fn choose_distinct(rng: &mut SplitMix64, n: usize, k: usize) -> Vec<usize> {
    assert!(k <= n, "cannot choose {k} distinct indices from 0..{n}");
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + (rng.next_u64() % (n - i) as u64) as usize;
        idx.swap(i, j);
    }
    let mut chosen = idx[..k].to_vec();
    chosen.sort_unstable();
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_across_instances() {
        let mut a = SplitMix64::new(42);
        let mut b = SplitMix64::new(42);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn known_first_output_for_seed_zero() {
        // splitmix64(0) first output, cross-checked against the reference
        // implementation of the mixing constants.
        let mut r = SplitMix64::new(0);
        assert_eq!(r.next_u64(), 0xE220_A839_7B1D_CDAF);
    }

    #[test]
    fn uniforms_in_unit_interval() {
        let mut r = SplitMix64::new(7);
        for _ in 0..10_000 {
            let u = r.next_f64();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn normals_have_sane_moments() {
        let mut r = SplitMix64::new(123);
        let mut v = vec![0.0; 100_000];
        fill_normals(&mut r, &mut v);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / v.len() as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.03, "var {var}");
    }

    #[test]
    fn odd_fill_discards_spare() {
        // Filling 3 then 2 must equal filling 3 and separately 2 with the
        // same stream positions: the spare from the odd fill is not reused.
        let mut r1 = SplitMix64::new(5);
        let mut a = vec![0.0; 3];
        fill_normals(&mut r1, &mut a);
        let pos_after = r1.next_u64();

        let mut r2 = SplitMix64::new(5);
        let mut b = vec![0.0; 4];
        fill_normals(&mut r2, &mut b);
        assert_eq!(a, b[..3].to_vec());
        assert_eq!(pos_after, r2.next_u64());
    }

    #[test]
    fn choose_distinct_is_sorted_and_distinct() {
        let mut r = SplitMix64::new(9);
        for _ in 0..100 {
            let c = choose_distinct(&mut r, 20, 10);
            assert_eq!(c.len(), 10);
            for w in c.windows(2) {
                assert!(w[0] < w[1]);
            }
            assert!(c.iter().all(|&i| i < 20));
        }
    }
}
