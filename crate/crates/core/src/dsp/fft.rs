//! Thin wrapper around `rustfft` with a per-thread plan cache.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANS: RefCell<HashMap<usize, Arc<dyn Fft<f64>>>> = RefCell::new(HashMap::new());
}

pub(crate) fn plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANS.with(|p| {
        p.borrow_mut().entry(n).or_insert_with(|| FftPlanner::new().plan_fft_forward(n)).clone()
    })
}

/// In-place forward DFT (no normalisation).
pub fn fft_in_place(buf: &mut [Complex64]) {
    if buf.len() > 1 {
        plan(buf.len()).process(buf);
    }
}

/// Forward DFT of a real signal; returns all `n` complex bins.
pub fn fft_real(input: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = input.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_in_place(&mut buf);
    buf
}

/// Magnitudes of bins `0..=n/2` of the DFT of a real frame.
pub fn rfft_magnitude(frame: &[f64]) -> Vec<f64> {
    let spec = fft_real(frame);
    spec[..frame.len() / 2 + 1].iter().map(|c| c.norm()).collect()
}
