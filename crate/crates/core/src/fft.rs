//! Thin wrappers over rustfft: cached plans and a chirp-z transform.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::sync::Arc;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub fn forward(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n))
}

pub fn inverse(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n))
}

/// Σ_i f_i exp(iα·i·j) for j = 0..m, by Bluestein's identity
/// ij = (i² + j² − (j−i)²)/2.
pub fn chirp(f: &[Complex64], alpha: f64, m: usize) -> Vec<Complex64> {
    let n = f.len();
    if n == 0 || m == 0 {
        return vec![Complex64::new(0.0, 0.0); m];
    }
    let len = (n + m - 1).next_power_of_two();
    let half = 0.5 * alpha;
    let q = |k: i64| Complex64::from_polar(1.0, half * (k * k) as f64);
    let mut a = vec![Complex64::new(0.0, 0.0); len];
    for (i, v) in f.iter().enumerate() {
        a[i] = v * q(i as i64);
    }
    // kernel c_k = exp(-iα k²/2) for k = -(n-1)..(m-1), stored circularly
    let mut b = vec![Complex64::new(0.0, 0.0); len];
    for k in 0..m {
        b[k] = q(k as i64).conj();
    }
    for k in 1..n {
        b[len - k] = q(k as i64).conj();
    }
    let fw = forward(len);
    fw.process(&mut a);
    fw.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    inverse(len).process(&mut a);
    let scale = 1.0 / len as f64;
    (0..m).map(|j| a[j] * scale * q(j as i64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chirp_matches_direct_sum() {
        let f: Vec<Complex64> = (0..37).map(|i| Complex64::new((i as f64).sin(), 0.3 * i as f64)).collect();
        let alpha = 0.0137;
        let got = chirp(&f, alpha, 23);
        for (j, g) in got.iter().enumerate() {
            let want: Complex64 = f
                .iter()
                .enumerate()
                .map(|(i, v)| v * Complex64::from_polar(1.0, alpha * (i * j) as f64))
                .sum();
            assert!((g - want).norm() < 1e-11 * (1.0 + want.norm()));
        }
    }
}
