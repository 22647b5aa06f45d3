//! Synthetic smooth Gaussian fields.

use rand::Rng;
use rand_distr::StandardNormal;

/// `n` unit-variance fields of `q` nodes: white noise convolved with a
/// Gaussian kernel of the given FWHM (nodes). The noise is padded so the
/// smoothness is uniform up to the field edges.
pub fn smooth_gaussian_fields<R: Rng>(n: usize, q: usize, fwhm: f64, rng: &mut R) -> Vec<Vec<f64>> {
    let sigma = fwhm / (8.0 * std::f64::consts::LN_2).sqrt();
    let half = (4.0 * sigma).ceil().max(1.0) as usize;
    let kernel: Vec<f64> = (0..=2 * half)
        .map(|i| {
            let x = i as f64 - half as f64;
            (-0.5 * (x / sigma).powi(2)).exp()
        })
        .collect();
    let norm = kernel.iter().map(|w| w * w).sum::<f64>().sqrt();
    (0..n)
        .map(|_| {
            let noise: Vec<f64> = (0..q + 2 * half)
                .map(|_| rng.sample(StandardNormal))
                .collect();
            (0..q)
                .map(|i| {
                    kernel
                        .iter()
                        .zip(&noise[i..])
                        .map(|(w, z)| w * z)
                        .sum::<f64>()
                        / norm
                })
                .collect()
        })
        .collect()
}
