use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Real;

/// Unitary DFT pair of a fixed length (both directions scaled by `1/sqrt(L)`).
#[derive(Clone)]
pub struct UnitaryDft<T: Real> {
    len: usize,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
    scale: T,
}

impl<T: Real> std::fmt::Debug for UnitaryDft<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("UnitaryDft").field("len", &self.len).finish()
    }
}

impl<T: Real> UnitaryDft<T> {
    pub fn new(len: usize) -> Self {
        assert!(len > 0, "DFT length must be positive");
        let mut planner = FftPlanner::new();
        Self {
            len,
            fwd: planner.plan_fft_forward(len),
            inv: planner.plan_fft_inverse(len),
            scale: T::one() / T::lit(len as f64).sqrt(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn forward_in_place(&self, buf: &mut [Complex<T>]) {
        debug_assert_eq!(buf.len(), self.len);
        self.fwd.process(buf);
        buf.iter_mut().for_each(|z| *z = *z * self.scale);
    }

    pub fn inverse_in_place(&self, buf: &mut [Complex<T>]) {
        debug_assert_eq!(buf.len(), self.len);
        self.inv.process(buf);
        buf.iter_mut().for_each(|z| *z = *z * self.scale);
    }

    pub fn forward(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut buf = x.to_vec();
        self.forward_in_place(&mut buf);
        buf
    }

    pub fn inverse(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut buf = x.to_vec();
        self.inverse_in_place(&mut buf);
        buf
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::energy;

    #[test]
    fn round_trip_and_parseval() {
        let dft = UnitaryDft::<f64>::new(12);
        let x: Vec<_> = (0..12)
            .map(|k| Complex::new((k as f64).sin(), (k as f64 * 0.3).cos()))
            .collect();
        let f = dft.forward(&x);
        assert!((energy(&f) - energy(&x)).abs() < 1e-12);
        let back = dft.inverse(&f);
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
