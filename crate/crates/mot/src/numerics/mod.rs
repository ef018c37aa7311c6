//! Shared numerical kernels: bracketed root-finding, adaptive quadrature,
//! monotone interpolation and special functions.
//!
//! Everything here is pure and deterministic; values are immutable and safe
//! to share across threads.

mod interp;
mod quad;
mod root;
pub mod special;

pub use interp::{FunctionTable, Monotonicity};
pub use quad::{integrate_adaptive, integrate_adaptive_est, integrate_with_breakpoints, QuadEstimate};
pub(crate) use quad::gk15_panel;
pub use root::{find_root_bracketed, find_root_bracketed_capped};

/// Tiny deterministic RNG (splitmix64) for probe sampling and test grids.
///
/// Not cryptographic; chosen for portability and reproducibility rather than
/// statistical strength.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Log-uniform in [lo, hi), lo > 0.
    pub fn log_uniform(&mut self, lo: f64, hi: f64) -> f64 {
        (self.uniform(lo.ln(), hi.ln())).exp()
    }
}

/// `n` log-spaced points strictly inside `(lo, hi)`, offset half a step from
/// each endpoint. Used for kernel grids where the endpoints are singular.
pub(crate) fn log_grid_inside(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / n as f64;
    (0..n).map(|i| (a + step * (i as f64 + 0.5)).exp()).collect()
}

/// `n` log-spaced points on the closed interval `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / (n - 1) as f64;
    (0..n).map(|i| (a + step * i as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_is_deterministic() {
        let mut a = SplitMix64::new(42);
        let mut b = SplitMix64::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut c = SplitMix64::new(42);
        for _ in 0..1000 {
            let v = c.next_f64();
            assert!((0.0..1.0).contains(&v));
        }
    }

    #[test]
    fn log_grids_cover_and_order() {
        let g = log_grid_inside(0.5, 2.0, 16);
        assert_eq!(g.len(), 16);
        assert!(g[0] > 0.5 && g[15] < 2.0);
        assert!(g.windows(2).all(|w| w[0] < w[1]));

        let h = log_grid(0.5, 2.0, 9);
        assert!((h[0] - 0.5).abs() < 1e-15 && (h[8] - 2.0).abs() < 1e-12);
    }
}
