//! Zero-phase Butterworth low-pass built from second-order sections.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// One biquad, `b` numerator and `a = [1, a1, a2]` denominator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 3],
}

impl Biquad {
    /// Transposed direct form II over `x`, starting from state `z`.
    fn run(&self, x: &mut [f64], mut z: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [_, a1, a2] = self.a;
        for v in x.iter_mut() {
            let xi = *v;
            let y = b0 * xi + z[0];
            z[0] = b1 * xi - a1 * y + z[1];
            z[1] = b2 * xi - a2 * y;
            *v = y;
        }
    }

    /// State that makes a unit step input a fixed point.
    fn step_state(&self) -> [f64; 2] {
        let gain = self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>();
        [gain - self.b[0], self.b[2] - self.a[2] * gain]
    }
}

/// Digital Butterworth low-pass of even `order`, by the bilinear transform
/// with the cutoff prewarped.
pub fn butterworth_sos(order: usize, fc: f64, fs: f64) -> Result<Vec<Biquad>> {
    if !(fc > 0.0 && fs > 2.0 * fc) {
        return Err(Error::CutoffAboveNyquist { fc, fs });
    }
    if order == 0 || !order.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "filter order {order} must be even and > 0"
        )));
    }
    let k = 2.0 * fs;
    let wc = k * (PI * fc / fs).tan();
    let n = order as f64;
    let sections = (1..=order / 2)
        .map(|i| {
            // analog prototype pole pair at angle θ from the negative real axis
            let theta = PI * (2.0 * i as f64 - 1.0) / (2.0 * n);
            let re = -theta.sin();
            let a0 = k * k - 2.0 * re * wc * k + wc * wc;
            let a1 = 2.0 * (wc * wc - k * k);
            let a2 = k * k + 2.0 * re * wc * k + wc * wc;
            let g = wc * wc / a0;
            Biquad {
                b: [g, 2.0 * g, g],
                a: [1.0, a1 / a0, a2 / a0],
            }
        })
        .collect();
    Ok(sections)
}

fn filter_with_steady_start(sos: &[Biquad], x: &mut [f64]) {
    let x0 = x[0];
    for s in sos {
        let z = s.step_state();
        s.run(x, [z[0] * x0, z[1] * x0]);
    }
}

/// Forward-backward filtering with odd reflective padding of `3·order`
/// samples at each end. The output has the input's length.
pub fn filtfilt(sos: &[Biquad], x: &[f64]) -> Result<Vec<f64>> {
    let pad = 3 * 2 * sos.len();
    if x.len() <= pad {
        return Err(Error::SeriesTooShort {
            len: x.len(),
            min: pad,
        });
    }
    let n = x.len();
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

    filter_with_steady_start(sos, &mut ext);
    ext.reverse();
    filter_with_steady_start(sos, &mut ext);
    ext.reverse();
    Ok(ext[pad..pad + n].to_vec())
}

/// Dual-pass Butterworth low-pass of the given order.
pub fn butterworth_lowpass(x: &[f64], fs: f64, fc: f64, order: usize) -> Result<Vec<f64>> {
    let sos = butterworth_sos(order, fc, fs)?;
    filtfilt(&sos, x)
}
