//! Permutation null distribution of the field maximum.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::anova::{node_f, validate_groups, FieldGroup};
use crate::error::{Error, Result};

/// Minimum permutations for a given alpha: fifty expected exceedances.
pub fn min_permutations(alpha: f64) -> usize {
    (50.0 / alpha).ceil() as usize
}

/// F fields of `n_perm` random relabelings. Permutation `i` draws from its
/// own ChaCha stream, so results do not depend on thread scheduling.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutationNull {
    pub fields: Vec<Vec<f64>>,
}

impl PermutationNull {
    pub fn generate(groups: &[FieldGroup], n_perm: usize, seed: u64) -> Result<Self> {
        let q = validate_groups(groups)?;
        let k = groups.len();
        let sizes: Vec<usize> = groups.iter().map(|g| g.curves.len()).collect();
        let base: Vec<usize> = sizes
            .iter()
            .enumerate()
            .flat_map(|(i, &s)| std::iter::repeat_n(i, s))
            .collect();
        let curves: Vec<&Vec<f64>> = groups.iter().flat_map(|g| &g.curves).collect();
        let fields = (0..n_perm)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                let mut labels = base.clone();
                labels.shuffle(&mut rng);
                let mut values = vec![0.0; curves.len()];
                let mut means = vec![0.0; k];
                (0..q)
                    .map(|node| {
                        for (v, c) in values.iter_mut().zip(&curves) {
                            *v = c[node];
                        }
                        node_f(&values, &labels, k, &sizes, &mut means).0
                    })
                    .collect()
            })
            .collect();
        Ok(Self { fields })
    }

    pub fn max_f(&self) -> Vec<f64> {
        self.fields
            .iter()
            .map(|f| f.iter().cloned().fold(f64::MIN, f64::max))
            .collect()
    }

    /// Empirical `(1 - alpha)` quantile of the field maximum (nearest rank).
    pub fn threshold(&self, alpha: f64) -> Result<f64> {
        let need = min_permutations(alpha);
        if self.fields.len() < need {
            return Err(Error::TooFewPermutations {
                need,
                got: self.fields.len(),
            });
        }
        let mut m = self.max_f();
        m.sort_by(f64::total_cmp);
        let rank = ((1.0 - alpha) * m.len() as f64).ceil() as usize;
        Ok(m[rank.clamp(1, m.len()) - 1])
    }

    /// Share of permutations whose largest cluster above `u` spans at least
    /// `extent` nodes, counting the observed labeling.
    pub fn cluster_p(&self, u: f64, extent: usize) -> f64 {
        let hits = self
            .fields
            .iter()
            .filter(|f| {
                super::runs_above(f, u)
                    .iter()
                    .any(|&(a, b)| b - a + 1 >= extent)
            })
            .count();
        (hits + 1) as f64 / (self.fields.len() + 1) as f64
    }
}

/// Critical threshold from `n_perm` seeded relabelings.
pub fn permutation_threshold(
    groups: &[FieldGroup],
    alpha: f64,
    n_perm: usize,
    seed: u64,
) -> Result<f64> {
    let need = min_permutations(alpha);
    if n_perm < need {
        return Err(Error::TooFewPermutations { need, got: n_perm });
    }
    PermutationNull::generate(groups, n_perm, seed)?.threshold(alpha)
}
