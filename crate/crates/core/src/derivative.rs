//! Spectral derivative features: finite differences along the band axis.

use rayon::prelude::*;

use crate::cube::HsiCube;
use crate::error::{invalid, Result};

/// First-order derivative and, on request, second-order derivative of a cube.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeStack {
    pub step: usize,
    pub first_order: HsiCube,
    pub second_order: Option<HsiCube>,
}

impl DerivativeStack {
    pub fn compute(cube: &HsiCube, step: usize, with_second: bool) -> Result<Self> {
        let first_order = first_derivative(cube, step)?;
        let second_order = with_second.then(|| second_derivative(cube, step)).transpose()?;
        Ok(Self { step, first_order, second_order })
    }
}

/// Band `i` of the output is `(W[i+step] - W[i]) / step`, for `i < D - step`.
pub fn first_derivative(cube: &HsiCube, step: usize) -> Result<HsiCube> {
    let d = cube.bands();
    if step == 0 || step >= d {
        return Err(invalid!("first-order step must satisfy 1 ≤ step ≤ bands-1 (step {step}, bands {d})"));
    }
    let scale = 1.0 / step as f64;
    banded(cube, d - step, |i, n, out| {
        let lo = &cube.data()[i * n..(i + 1) * n];
        let hi = &cube.data()[(i + step) * n..(i + step + 1) * n];
        for ((o, a), b) in out.iter_mut().zip(lo).zip(hi) {
            *o = (b - a) * scale;
        }
    })
}

/// Band `i` of the output is `(W[i+2s] - 2 W[i+s] + W[i]) / s²`, for `i < D - 2s`.
pub fn second_derivative(cube: &HsiCube, step: usize) -> Result<HsiCube> {
    let d = cube.bands();
    if step == 0 || 2 * step >= d {
        return Err(invalid!("second-order step must satisfy 1 ≤ 2·step ≤ bands-1 (step {step}, bands {d})"));
    }
    let scale = 1.0 / (step * step) as f64;
    banded(cube, d - 2 * step, |i, n, out| {
        let w0 = &cube.data()[i * n..(i + 1) * n];
        let w1 = &cube.data()[(i + step) * n..(i + step + 1) * n];
        let w2 = &cube.data()[(i + 2 * step) * n..(i + 2 * step + 1) * n];
        for (p, o) in out.iter_mut().enumerate() {
            *o = (w2[p] - 2.0 * w1[p] + w0[p]) * scale;
        }
    })
}

fn banded<F>(cube: &HsiCube, out_bands: usize, fill: F) -> Result<HsiCube>
where
    F: Fn(usize, usize, &mut [f64]) + Sync,
{
    let n = cube.pixels();
    let mut data = vec![0.0; out_bands * n];
    data.par_chunks_mut(n).enumerate().for_each(|(i, out)| fill(i, n, out));
    HsiCube::new(cube.height(), cube.width(), out_bands, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(spectrum: &[f64]) -> HsiCube {
        HsiCube::from_pixel_spectra(1, 1, &[spectrum.to_vec()]).unwrap()
    }

    #[test]
    fn first_order_examples() {
        let c = single(&[1.0, 3.0, 7.0, 13.0]);
        assert_eq!(first_derivative(&c, 1).unwrap().data(), &[2.0, 4.0, 6.0]);
        assert_eq!(first_derivative(&c, 2).unwrap().data(), &[3.0, 5.0]);
        let flat = single(&[5.0; 4]);
        for step in 1..4 {
            assert!(first_derivative(&flat, step).unwrap().data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn second_order_examples() {
        let c = single(&[1.0, 3.0, 7.0, 13.0]);
        assert_eq!(second_derivative(&c, 1).unwrap().data(), &[2.0, 2.0]);
        let linear = single(&[0.0, 2.0, 4.0, 6.0]);
        assert_eq!(second_derivative(&linear, 1).unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn step_out_of_range() {
        let c = single(&[1.0, 2.0, 3.0, 4.0]);
        assert!(first_derivative(&c, 0).is_err());
        assert!(first_derivative(&c, 4).is_err());
        assert!(second_derivative(&c, 2).is_err());
        assert!(second_derivative(&c, 1).is_ok());
    }

    #[test]
    fn band_counts() {
        let c = HsiCube::zeros(2, 3, 9).unwrap();
        let s = DerivativeStack::compute(&c, 2, true).unwrap();
        assert_eq!(s.first_order.bands(), 7);
        assert_eq!(s.second_order.unwrap().bands(), 5);
        assert!(DerivativeStack::compute(&c, 2, false).unwrap().second_order.is_none());
    }
}
