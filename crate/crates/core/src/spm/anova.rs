//! Node-wise one-way ANOVA over 1-D fields.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// F value assigned to nodes with zero within-group variance but a nonzero
/// between-group effect.
pub const F_CAP: f64 = 1e10;

/// Curves of one group, each of the same length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldGroup {
    pub label: String,
    pub curves: Vec<Vec<f64>>,
}

impl FieldGroup {
    pub fn new(label: impl Into<String>, curves: Vec<Vec<f64>>) -> Self {
        Self {
            label: label.into(),
            curves,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Anova {
    pub f: Vec<f64>,
    /// `(k - 1, N - k)`.
    pub df: (f64, f64),
    /// Curves minus their group mean, all groups stacked.
    pub residuals: Vec<Vec<f64>>,
    /// Nodes with zero within-group variance.
    pub degenerate: Vec<usize>,
}

/// Checks group shapes and returns the node count.
pub(crate) fn validate_groups(groups: &[FieldGroup]) -> Result<usize> {
    if groups.len() < 2 {
        return Err(Error::InvalidField(format!(
            "need at least 2 groups, got {}",
            groups.len()
        )));
    }
    let q = groups[0].curves.first().map_or(0, Vec::len);
    if q < 3 {
        return Err(Error::InvalidField(format!(
            "fields need at least 3 nodes, got {q}"
        )));
    }
    for g in groups {
        if g.curves.len() < 2 {
            return Err(Error::InvalidField(format!(
                "group '{}' has {} curve(s), need at least 2",
                g.label,
                g.curves.len()
            )));
        }
        if let Some(c) = g.curves.iter().find(|c| c.len() != q) {
            return Err(Error::InvalidField(format!(
                "group '{}' mixes field lengths {} and {q}",
                g.label,
                c.len()
            )));
        }
        if g.curves.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!(
                "group '{}' contains non-finite values",
                g.label
            )));
        }
    }
    Ok(q)
}

/// F statistic of one node given per-group values. Returns the value and
/// whether the within-group variance was zero.
pub(crate) fn node_f(
    values: &[f64],
    labels: &[usize],
    k: usize,
    sizes: &[usize],
    means: &mut [f64],
) -> (f64, bool) {
    let n = values.len();
    means.iter_mut().for_each(|m| *m = 0.0);
    let mut grand = 0.0;
    let mut scale = 0.0;
    for (&v, &g) in values.iter().zip(labels) {
        means[g] += v;
        grand += v;
        scale += v * v;
    }
    grand /= n as f64;
    for (m, &s) in means.iter_mut().zip(sizes) {
        *m /= s as f64;
    }
    let ssb: f64 = means
        .iter()
        .zip(sizes)
        .map(|(m, &s)| s as f64 * (m - grand).powi(2))
        .sum();
    let ssw: f64 = values
        .iter()
        .zip(labels)
        .map(|(&v, &g)| (v - means[g]).powi(2))
        .sum();
    let tiny = 1e-24 * scale.max(f64::MIN_POSITIVE);
    if ssw <= tiny {
        let f = if ssb <= tiny { 0.0 } else { F_CAP };
        return (f, true);
    }
    let f = (ssb / (k - 1) as f64) / (ssw / (n - k) as f64);
    (f.min(F_CAP), false)
}

/// One-way ANOVA at every node.
pub fn anova1d(groups: &[FieldGroup]) -> Result<Anova> {
    let q = validate_groups(groups)?;
    let k = groups.len();
    let sizes: Vec<usize> = groups.iter().map(|g| g.curves.len()).collect();
    let labels: Vec<usize> = groups
        .iter()
        .enumerate()
        .flat_map(|(i, g)| std::iter::repeat_n(i, g.curves.len()))
        .collect();
    let curves: Vec<&Vec<f64>> = groups.iter().flat_map(|g| &g.curves).collect();
    let n = curves.len();

    let mut f = vec![0.0; q];
    let mut degenerate = Vec::new();
    let mut residuals = vec![vec![0.0; q]; n];
    let mut values = vec![0.0; n];
    let mut means = vec![0.0; k];
    for node in 0..q {
        for (v, c) in values.iter_mut().zip(&curves) {
            *v = c[node];
        }
        let (fv, flat) = node_f(&values, &labels, k, &sizes, &mut means);
        f[node] = fv;
        if flat {
            degenerate.push(node);
        }
        for (j, r) in residuals.iter_mut().enumerate() {
            r[node] = values[j] - means[labels[j]];
        }
    }
    if !degenerate.is_empty() {
        log::warn!(
            "{} node(s) with zero within-group variance",
            degenerate.len()
        );
    }
    Ok(Anova {
        f,
        df: ((k - 1) as f64, (n - k) as f64),
        residuals,
        degenerate,
    })
}
