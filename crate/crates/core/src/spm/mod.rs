//! One-dimensional statistical parametric mapping: node-wise one-way ANOVA
//! with random-field-theory or permutation thresholds.

pub mod anova;
pub mod field;
pub mod perm;
pub mod rft;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use anova::{anova1d, Anova, FieldGroup, F_CAP};
pub use field::smooth_gaussian_fields;
pub use perm::{permutation_threshold, PermutationNull};
pub use rft::{estimate_fwhm, rft_threshold};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    #[default]
    Rft,
    Perm,
}

/// How cluster p-values are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Inference {
    #[default]
    Extent,
    Peak,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpmOptions {
    pub alpha: f64,
    pub mode: ThresholdMode,
    pub inference: Inference,
    pub n_perm: usize,
    pub seed: u64,
}

impl Default for SpmOptions {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            mode: ThresholdMode::Rft,
            inference: Inference::Extent,
            n_perm: 10_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// First and last node, inclusive.
    pub start: usize,
    pub end: usize,
    /// Node count.
    pub extent: usize,
    pub peak: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpmResult {
    pub groups: Vec<String>,
    pub f: Vec<f64>,
    pub df: (f64, f64),
    pub fwhm: f64,
    pub threshold: f64,
    pub alpha: f64,
    pub mode: ThresholdMode,
    pub inference: Inference,
    pub clusters: Vec<Cluster>,
    /// Nodes with zero within-group variance (F capped or zero).
    pub degenerate_nodes: Vec<usize>,
}

impl SpmResult {
    pub fn significant(&self) -> bool {
        !self.clusters.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_default()
    }

    /// `node,F,threshold` rows for plotting.
    pub fn plot_csv(&self) -> String {
        let mut out = String::from("node,F,threshold\n");
        for (i, f) in self.f.iter().enumerate() {
            let _ = writeln!(out, "{i},{f},{}", self.threshold);
        }
        out
    }
}

/// Maximal runs of nodes with `f > u`, as inclusive `(start, end)`.
pub fn runs_above(f: &[f64], u: f64) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &v) in f.iter().enumerate() {
        match (v > u, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, f.len() - 1));
    }
    runs
}

/// Suprathreshold clusters with p-values from `p_of(start, end, peak)`.
pub fn suprathreshold_clusters(
    f: &[f64],
    u: f64,
    mut p_of: impl FnMut(usize, usize, f64) -> Result<f64>,
) -> Result<Vec<Cluster>> {
    runs_above(f, u)
        .into_iter()
        .map(|(start, end)| {
            let peak = f[start..=end].iter().cloned().fold(f64::MIN, f64::max);
            Ok(Cluster {
                start,
                end,
                extent: end - start + 1,
                peak,
                p: p_of(start, end, peak)?,
            })
        })
        .collect()
}

/// Full analysis: F field, smoothness, threshold and clusters.
pub fn spm_anova(groups: &[FieldGroup], opts: &SpmOptions) -> Result<SpmResult> {
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::InvalidField(format!(
            "alpha {} outside (0, 1)",
            opts.alpha
        )));
    }
    let a = anova1d(groups)?;
    let q = a.f.len();
    let fwhm = estimate_fwhm(&a.residuals, &a.degenerate)?;
    let (threshold, clusters) = match opts.mode {
        ThresholdMode::Rft => {
            let u = rft_threshold(a.df, fwhm, q, opts.alpha)?;
            let clusters = suprathreshold_clusters(&a.f, u, |s, e, peak| match opts.inference {
                Inference::Extent => rft::cluster_p_extent((e - s + 1) as f64, u, a.df, q, fwhm),
                Inference::Peak => rft::cluster_p_peak(peak, a.df, q, fwhm),
            })?;
            (u, clusters)
        }
        ThresholdMode::Perm => {
            let need = perm::min_permutations(opts.alpha);
            if opts.n_perm < need {
                return Err(Error::TooFewPermutations {
                    need,
                    got: opts.n_perm,
                });
            }
            let null = PermutationNull::generate(groups, opts.n_perm, opts.seed)?;
            let u = null.threshold(opts.alpha)?;
            let maxima = null.max_f();
            let clusters = suprathreshold_clusters(&a.f, u, |s, e, peak| {
                Ok(match opts.inference {
                    Inference::Extent => null.cluster_p(u, e - s + 1),
                    Inference::Peak => {
                        let hits = maxima.iter().filter(|m| **m >= peak).count();
                        (hits + 1) as f64 / (maxima.len() + 1) as f64
                    }
                })
            })?;
            (u, clusters)
        }
    };
    Ok(SpmResult {
        groups: groups.iter().map(|g| g.label.clone()).collect(),
        f: a.f,
        df: a.df,
        fwhm,
        threshold,
        alpha: opts.alpha,
        mode: opts.mode,
        inference: opts.inference,
        clusters,
        degenerate_nodes: a.degenerate,
    })
}
