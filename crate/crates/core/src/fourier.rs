//! Unitary discrete Fourier transforms on centered lattices.
//!
//! Conventions: a field sampled at `x_i = (i - N/2 + offset) * dx` transforms
//! to `fhat(k_j) = (2pi)^{-1/2} dx * sum_i f(x_i) e^{-i k_j x_i}` with
//! `k_j = (j - N/2) * 2pi/(N dx)`, both indices running `0..N`. The pair is
//! unitary: `inverse(forward(f)) = f` and Parseval holds with the lattice
//! cell measures `dx` and `dk`.

use crate::C64;
use once_cell::sync::Lazy;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

static PLANS: Lazy<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut map = PLANS.lock().unwrap();
    map.entry((n, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            }
        })
        .clone()
}

/// Raw in-place FFT (rustfft conventions, no normalization).
pub fn fft_inplace(buf: &mut [C64], inverse: bool) {
    plan(buf.len(), inverse).process(buf);
}

/// Direction of a lattice transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// One-dimensional centered unitary transform of `buf` (length N).
///
/// `offset` is the sample offset in units of `dx` (0.0 for a lattice through
/// the origin, 0.5 for a staggered one). Works in place.
pub fn centered_transform(buf: &mut [C64], dx: f64, offset: f64, dir: Direction) {
    let n = buf.len();
    let nf = n as f64;
    let half = n / 2;
    match dir {
        Direction::Forward => {
            // f_i at x_i = (i - N/2 + offset) dx  ->  fhat_j at k_j = (j - N/2) dk
            // Sum_i f_i e^{-i k_j x_i} = e^{+i 2pi (j-N/2)(N/2-offset)/N} * DFT[f](j-N/2 mod N)
            let coef = dx / (2.0 * PI).sqrt();
            fft_inplace(buf, false);
            let mut out = vec![C64::new(0.0, 0.0); n];
            for (j, slot) in out.iter_mut().enumerate() {
                let jj = j as f64 - half as f64;
                let phase = 2.0 * PI * jj * (half as f64 - offset) / nf;
                let src = (j + half) % n;
                *slot = buf[src] * C64::from_polar(coef, phase);
            }
            buf.copy_from_slice(&out);
        }
        Direction::Inverse => {
            // f_i = (2pi)^{-1/2} dk Sum_j fhat_j e^{+i k_j x_i}; with
            // dx dk N = 2pi this is exactly the inverse of the forward pass:
            // strip phases, un-shift, unnormalized inverse DFT, rescale.
            let dk = 2.0 * PI / (nf * dx);
            let scale = dk / (2.0 * PI).sqrt();
            let mut tmp = vec![C64::new(0.0, 0.0); n];
            for (j, &v) in buf.iter().enumerate() {
                let jj = j as f64 - half as f64;
                let phase = 2.0 * PI * jj * (half as f64 - offset) / nf;
                let dst = (j + half) % n;
                tmp[dst] = v * C64::from_polar(1.0, -phase);
            }
            fft_inplace(&mut tmp, true);
            for (i, slot) in buf.iter_mut().enumerate() {
                *slot = tmp[i] * scale;
            }
        }
    }
}

/// Apply a centered transform along one axis of a flat row-major array.
///
/// `shape` lists the per-axis point counts; `axis` selects the transformed
/// one; `dx` and `offset` describe that axis's lattice.
pub fn transform_axis(
    data: &mut [C64],
    shape: &[usize],
    axis: usize,
    dx: f64,
    offset: f64,
    dir: Direction,
) {
    let n = shape[axis];
    let stride: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let inner = stride;
    let mut line = vec![C64::new(0.0, 0.0); n];
    for o in 0..outer {
        for i in 0..inner {
            let base = o * n * inner + i;
            for (m, slot) in line.iter_mut().enumerate() {
                *slot = data[base + m * inner];
            }
            centered_transform(&mut line, dx, offset, dir);
            for (m, &v) in line.iter().enumerate() {
                data[base + m * inner] = v;
            }
        }
    }
}

/// Dual-lattice wavenumber `k_j = (j - N/2) * 2pi/(N dx)`.
pub fn wavenumber(j: usize, n: usize, dx: f64) -> f64 {
    (j as f64 - (n / 2) as f64) * 2.0 * PI / (n as f64 * dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_field(n: usize, l: f64, offset: f64, sigma2: f64) -> (Vec<C64>, f64) {
        let dx = 2.0 * l / n as f64;
        let data = (0..n)
            .map(|i| {
                let x = (i as f64 - (n / 2) as f64 + offset) * dx;
                C64::new((-x * x / (2.0 * sigma2)).exp(), 0.0)
            })
            .collect();
        (data, dx)
    }

    #[test]
    fn roundtrip_identity() {
        for &offset in &[0.0, 0.5] {
            let n = 128;
            let dx = 0.17;
            let mut data: Vec<C64> = (0..n)
                .map(|i| C64::new((i as f64 * 0.7).sin(), (i as f64 * 0.3).cos()))
                .collect();
            let orig = data.clone();
            centered_transform(&mut data, dx, offset, Direction::Forward);
            centered_transform(&mut data, dx, offset, Direction::Inverse);
            let err: f64 = data
                .iter()
                .zip(&orig)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-12, "roundtrip err {err} offset {offset}");
        }
    }

    #[test]
    fn gaussian_maps_to_gaussian() {
        // exp(-x^2/(2s2)) -> s * exp(-k^2 s2 / 2) under the unitary convention
        let (mut data, dx) = gaussian_field(512, 16.0, 0.0, 1.3);
        let n = data.len();
        centered_transform(&mut data, dx, 0.0, Direction::Forward);
        let s2: f64 = 1.3;
        for j in 0..n {
            let k = wavenumber(j, n, dx);
            if k.abs() > 8.0 {
                continue;
            }
            let expect = s2.sqrt() * (-k * k * s2 / 2.0).exp();
            assert!(
                (data[j].re - expect).abs() < 1e-10 && data[j].im.abs() < 1e-10,
                "j={j} k={k} got {} expect {expect}",
                data[j].re
            );
        }
    }

    #[test]
    fn parseval_holds() {
        let n = 256;
        let dx = 0.05;
        let mut data: Vec<C64> = (0..n)
            .map(|i| C64::new((i as f64).cos(), (i as f64 * 1.7).sin()))
            .collect();
        let dk = 2.0 * PI / (n as f64 * dx);
        let norm_x: f64 = data.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx;
        centered_transform(&mut data, dx, 0.0, Direction::Forward);
        let norm_k: f64 = data.iter().map(|z| z.norm_sqr()).sum::<f64>() * dk;
        assert!((norm_x - norm_k).abs() < 1e-12 * norm_x);
    }

    #[test]
    fn staggered_gaussian_matches() {
        // staggered sampling of an even function still transforms to the
        // analytic (real) Fourier transform
        let (mut data, dx) = gaussian_field(512, 16.0, 0.5, 0.9);
        let n = data.len();
        centered_transform(&mut data, dx, 0.5, Direction::Forward);
        for j in 0..n {
            let k = wavenumber(j, n, dx);
            if k.abs() > 8.0 {
                continue;
            }
            let expect = 0.9f64.sqrt() * (-k * k * 0.9 / 2.0).exp();
            assert!(
                (data[j].re - expect).abs() < 1e-10 && data[j].im.abs() < 1e-11,
                "staggered j={j}"
            );
        }
    }
}
