//! Gait-cycle normalization and inter-cycle variability.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gait::Joint;

/// Samples per normalized cycle (0..=100 % of the gait cycle).
pub const NODES: usize = 101;
/// Accepted cycle durations, s.
pub const MIN_CYCLE: f64 = 0.4;
pub const MAX_CYCLE: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleMeta {
    /// Heel-strike times bounding the cycle, s.
    pub start: f64,
    pub end: f64,
    pub duration: f64,
    /// Pelvis progression over the cycle, m. Zero until filled by the caller.
    pub stride: f64,
}

/// Normalized joint-angle curves, indexed `[cycle][joint][node]` with joints
/// in hip, knee, ankle order. Angles in degrees.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GaitCycleTensor {
    pub curves: Vec<[[f64; NODES]; 3]>,
    pub meta: Vec<CycleMeta>,
    /// Cycles dropped for implausible duration.
    pub excluded: usize,
}

impl GaitCycleTensor {
    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    /// All curves of one joint.
    pub fn joint(&self, joint: Joint) -> Vec<[f64; NODES]> {
        let j = joint_index(joint);
        self.curves.iter().map(|c| c[j]).collect()
    }

    pub fn push(&mut self, curves: [[f64; NODES]; 3], meta: CycleMeta) {
        self.curves.push(curves);
        self.meta.push(meta);
    }

    pub fn extend(&mut self, other: GaitCycleTensor) {
        self.curves.extend(other.curves);
        self.meta.extend(other.meta);
        self.excluded += other.excluded;
    }

    /// Keeps the `n` consecutive cycles in the middle of the sequence (the
    /// earlier one when the split is uneven).
    pub fn keep_middle(&mut self, n: usize) {
        if self.len() <= n {
            return;
        }
        let start = (self.len() - n) / 2;
        self.curves.drain(..start);
        self.curves.truncate(n);
        self.meta.drain(..start);
        self.meta.truncate(n);
    }

    /// Long-format CSV: `cycle,joint,node,angle`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cycle,joint,node,angle_deg\n");
        for (c, curves) in self.curves.iter().enumerate() {
            for joint in Joint::ALL {
                for (n, v) in curves[joint_index(joint)].iter().enumerate() {
                    out.push_str(&format!("{c},{},{n},{v}\n", joint.name()));
                }
            }
        }
        out
    }
}

pub(crate) fn joint_index(joint: Joint) -> usize {
    match joint {
        Joint::Hip => 0,
        Joint::Knee => 1,
        Joint::Ankle => 2,
    }
}

/// Linear interpolation of a uniformly sampled series at time `t` (s from the
/// first sample). Clamps outside the sampled range.
pub fn interp_uniform(x: &[f64], fs: f64, t: f64) -> f64 {
    let pos = t * fs;
    if pos <= 0.0 {
        return x[0];
    }
    let last = x.len() - 1;
    if pos >= last as f64 {
        return x[last];
    }
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    x[i] + frac * (x[i + 1] - x[i])
}

/// Resamples each inter-event segment of the three joint series onto
/// [`NODES`] points. Cycles outside [`MIN_CYCLE`, `MAX_CYCLE`] are skipped and
/// counted in `excluded`.
pub fn normalize_cycles(joints: [&[f64]; 3], fs: f64, events: &[f64]) -> Result<GaitCycleTensor> {
    if events.len() < 2 {
        return Err(Error::TooFewCycles { need: 1, found: 0 });
    }
    let len = joints[0].len();
    if len < 2 || joints.iter().any(|j| j.len() != len) {
        return Err(Error::SeriesTooShort { len, min: 1 });
    }
    let mut out = GaitCycleTensor::default();
    for w in events.windows(2) {
        let (start, end) = (w[0], w[1]);
        let duration = end - start;
        if !(MIN_CYCLE..=MAX_CYCLE).contains(&duration) {
            log::warn!("{}", Error::DegenerateCycle(duration));
            out.excluded += 1;
            continue;
        }
        let mut curves = [[0.0; NODES]; 3];
        for (k, series) in joints.iter().enumerate() {
            for (n, v) in curves[k].iter_mut().enumerate() {
                let t = start + duration * n as f64 / (NODES - 1) as f64;
                *v = interp_uniform(series, fs, t);
            }
        }
        out.push(
            curves,
            CycleMeta {
                start,
                end,
                duration,
                stride: 0.0,
            },
        );
    }
    Ok(out)
}

/// Across-cycle population SD at each node, averaged over nodes; one value
/// per joint (hip, knee, ankle).
pub fn intercycle_sd(tensor: &GaitCycleTensor) -> Result<[f64; 3]> {
    let n = tensor.len();
    if n < 2 {
        return Err(Error::TooFewCycles { need: 2, found: n });
    }
    let mut out = [0.0; 3];
    for (j, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for node in 0..NODES {
            // shifted by the first cycle so identical cycles give exactly zero
            let x0 = tensor.curves[0][j][node];
            let mean = tensor.curves.iter().map(|c| c[j][node] - x0).sum::<f64>() / n as f64;
            let var = tensor
                .curves
                .iter()
                .map(|c| (c[j][node] - x0 - mean).powi(2))
                .sum::<f64>()
                / n as f64;
            acc += var.sqrt();
        }
        *o = acc / NODES as f64;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn tensor_from(offsets: &[f64]) -> GaitCycleTensor {
        let mut t = GaitCycleTensor::default();
        for &o in offsets {
            let mut c = [[0.0; NODES]; 3];
            for n in 0..NODES {
                let base = (n as f64 * 0.1).sin() * 20.0;
                c[0][n] = base + o;
                c[1][n] = 2.0 * base;
                c[2][n] = -base;
            }
            t.push(
                c,
                CycleMeta {
                    start: 0.0,
                    end: 1.0,
                    duration: 1.0,
                    stride: 0.0,
                },
            );
        }
        t
    }

    #[test]
    fn linear_data_is_resampled_exactly() {
        let fs = 50.0;
        let x: Vec<f64> = (0..200).map(|i| 3.0 * i as f64 / fs - 1.0).collect();
        let t = normalize_cycles([&x, &x, &x], fs, &[0.5, 1.7]).unwrap();
        assert_eq!(t.len(), 1);
        for n in 0..NODES {
            let time = 0.5 + 1.2 * n as f64 / 100.0;
            assert!((t.curves[0][0][n] - (3.0 * time - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn cycles_of_different_length_give_101_nodes() {
        let fs = 50.0;
        let x = vec![1.0; 200];
        let t = normalize_cycles([&x, &x, &x], fs, &[0.0, 1.2, 2.2]).unwrap();
        assert_eq!(t.len(), 2);
        assert!(t.curves.iter().all(|c| c.iter().all(|j| j.len() == NODES)));
        assert_eq!(t.curves[0][0][0], 1.0);
    }

    #[test]
    fn sine_per_cycle_matches_analytic() {
        let fs = 50.0;
        let period = 1.0;
        let x: Vec<f64> = (0..300)
            .map(|i| 30.0 * (TAU * i as f64 / fs / period).sin())
            .collect();
        let t = normalize_cycles([&x, &x, &x], fs, &[0.0, 1.0, 2.0]).unwrap();
        for c in &t.curves {
            for n in 0..NODES {
                let want = 30.0 * (TAU * n as f64 / 100.0).sin();
                // linear interpolation error bound: h^2/8 * max|x''|
                let bound = (1.0 / fs).powi(2) / 8.0 * 30.0 * (TAU / period).powi(2);
                assert!((c[0][n] - want).abs() <= bound + 1e-12);
            }
        }
    }

    #[test]
    fn hundred_sample_cycle_lands_on_samples() {
        let fs = 50.0;
        let x: Vec<f64> = (0..250).map(|i| (TAU * i as f64 / 100.0).sin()).collect();
        let t = normalize_cycles([&x, &x, &x], fs, &[0.0, 2.0, 4.0]).unwrap();
        for c in &t.curves {
            for n in 0..NODES {
                assert!((c[1][n] - (TAU * n as f64 / 100.0).sin()).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn degenerate_cycles_are_counted() {
        let x = vec![0.0; 500];
        let t = normalize_cycles([&x, &x, &x], 50.0, &[0.0, 0.2, 1.3, 4.5, 5.5]).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.excluded, 2);
        assert!(normalize_cycles([&x, &x, &x], 50.0, &[1.0]).is_err());
    }

    #[test]
    fn keep_middle_picks_centred_run() {
        let mut t = tensor_from(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        t.keep_middle(4);
        let firsts: Vec<f64> = t.curves.iter().map(|c| c[0][0]).collect();
        assert_eq!(firsts, vec![1.0, 2.0, 3.0, 4.0]);
        t.keep_middle(10);
        assert_eq!(t.len(), 4);
    }

    #[test]
    fn sd_identical_cycles_is_zero() {
        assert_eq!(
            intercycle_sd(&tensor_from(&[0.0, 0.0, 0.0])).unwrap(),
            [0.0; 3]
        );
    }

    #[test]
    fn sd_two_cycles_constant_gap() {
        let sd = intercycle_sd(&tensor_from(&[0.0, 2.0])).unwrap();
        assert!((sd[0] - 1.0).abs() < 1e-12);
        assert_eq!(sd[1], 0.0);
    }

    #[test]
    fn sd_three_offsets() {
        let sd = intercycle_sd(&tensor_from(&[-1.0, 0.0, 1.0])).unwrap();
        assert!((sd[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((sd[0] - 0.816).abs() < 1e-3);
    }

    #[test]
    fn sd_needs_two_cycles() {
        assert_eq!(
            intercycle_sd(&tensor_from(&[0.0])),
            Err(Error::TooFewCycles { need: 2, found: 1 })
        );
    }
}
