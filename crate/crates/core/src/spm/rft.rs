//! Random-field-theory smoothness and thresholds for 1-D F fields.

use statrs::distribution::{ContinuousCDF, FisherSnedecor};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};

const FOUR_LN2: f64 = 4.0 * std::f64::consts::LN_2;

/// Smoothness of the residual fields as FWHM in nodes.
///
/// Uses the ratio of squared node gradients (central differences, one-sided
/// at the ends) to the residual sum of squares at each node, averaged over
/// nodes. Nodes in `exclude` and nodes whose residuals vanish are skipped.
pub fn estimate_fwhm(residuals: &[Vec<f64>], exclude: &[usize]) -> Result<f64> {
    let q = residuals.first().map_or(0, Vec::len);
    if q < 3 {
        return Err(Error::DegenerateResiduals);
    }
    let ssq: Vec<f64> = (0..q)
        .map(|n| residuals.iter().map(|r| r[n] * r[n]).sum())
        .collect();
    let peak = ssq.iter().cloned().fold(0.0, f64::max);
    let usable = |n: usize| ssq[n] > 1e-24 * peak && !exclude.contains(&n);
    let mut acc = 0.0;
    let mut count = 0usize;
    for n in 0..q {
        let (a, b) = if n == 0 {
            (0, 1)
        } else if n == q - 1 {
            (q - 2, q - 1)
        } else {
            (n - 1, n + 1)
        };
        if !(usable(n) && usable(a) && usable(b)) {
            continue;
        }
        let h = (b - a) as f64;
        let grad_sq: f64 = residuals.iter().map(|r| ((r[b] - r[a]) / h).powi(2)).sum();
        acc += grad_sq / ssq[n];
        count += 1;
    }
    if count == 0 || acc <= 0.0 {
        return Err(Error::DegenerateResiduals);
    }
    Ok((FOUR_LN2 / (acc / count as f64)).sqrt())
}

/// Resel count of a field of `q` nodes.
pub fn resels(q: usize, fwhm: f64) -> f64 {
    (q as f64 - 1.0) / fwhm
}

fn f_dist(df: (f64, f64)) -> Result<FisherSnedecor> {
    FisherSnedecor::new(df.0, df.1)
        .map_err(|e| Error::InvalidField(format!("degrees of freedom {df:?}: {e}")))
}

/// Euler-characteristic densities `[rho0, rho1]` of an F field at `u`.
pub fn ec_density_f(u: f64, df: (f64, f64)) -> Result<[f64; 2]> {
    let dist = f_dist(df)?;
    if u <= 0.0 {
        return Ok([1.0, 0.0]);
    }
    let (k, v) = df;
    let rho0 = dist.sf(u);
    let x = k * u / v;
    let log_rho1 = 0.5 * (FOUR_LN2 / std::f64::consts::TAU).ln() + ln_gamma(0.5 * (v + k - 1.0))
        - ln_gamma(0.5 * v)
        - ln_gamma(0.5 * k)
        + 0.5 * std::f64::consts::LN_2
        + 0.5 * (k - 1.0) * x.ln()
        - 0.5 * (v + k - 2.0) * x.ln_1p();
    Ok([rho0, log_rho1.exp()])
}

/// Expected Euler characteristic of the excursion set above `u` for a field
/// with the given resel count. Approximates P(max F > u) in the upper tail.
pub fn expected_ec(u: f64, df: (f64, f64), resels: f64) -> Result<f64> {
    let [r0, r1] = ec_density_f(u, df)?;
    Ok(r0 + resels * r1)
}

/// Finds `u` in `[lo, hi]` with `g(u) = target` for decreasing `g`, to a
/// relative tolerance of 1e-6. Grows `hi` up to `limit` to bracket the root.
fn solve_decreasing(
    g: impl Fn(f64) -> Result<f64>,
    target: f64,
    lo: f64,
    mut hi: f64,
    limit: f64,
) -> Result<f64> {
    let mut lo = lo;
    while g(hi)? > target {
        if hi >= limit {
            return Err(Error::NonConvergence { lo, hi });
        }
        lo = hi;
        hi *= 2.0;
    }
    if g(lo)? < target {
        return Err(Error::NonConvergence { lo, hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-6 * hi {
            return Ok(0.5 * (lo + hi));
        }
    }
    Err(Error::NonConvergence { lo, hi })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidField(format!("alpha {alpha} outside (0, 1)")))
    }
}

/// Critical value of the scalar F distribution.
pub fn f_critical(df: (f64, f64), alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let dist = f_dist(df)?;
    solve_decreasing(|u| Ok(dist.sf(u)), alpha, 0.0, 1.0, 1e12)
}

/// Smallest threshold whose expected number of suprathreshold clusters is
/// at most `alpha`.
pub fn rft_threshold(df: (f64, f64), fwhm: f64, q: usize, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(fwhm > 0.0) {
        return Err(Error::InvalidField(format!("fwhm must be > 0, got {fwhm}")));
    }
    let r = resels(q, fwhm);
    // the scalar critical value is a lower bound since rho1 >= 0
    let lo = 0.9 * f_critical(df, alpha)?;
    solve_decreasing(|u| expected_ec(u, df, r), alpha, lo, 2.0 * lo, 1e12)
}

/// Probability of a cluster of at least `extent` nodes above `u` somewhere in
/// the field, from the expected cluster count and the expected extent per
/// cluster.
pub fn cluster_p_extent(extent: f64, u: f64, df: (f64, f64), q: usize, fwhm: f64) -> Result<f64> {
    let r = resels(q, fwhm);
    let em = expected_ec(u, df, r)?;
    if em <= 0.0 {
        return Ok(0.0);
    }
    let en = f_dist(df)?.sf(u) * r;
    let ek = en / em;
    let k = extent / fwhm;
    let beta = (gamma(1.5) / ek).powi(2);
    let pk = (-beta * k * k).exp();
    Ok((1.0 - (-em * pk).exp()).clamp(0.0, 1.0))
}

/// Probability of a field maximum at least `peak`.
pub fn cluster_p_peak(peak: f64, df: (f64, f64), q: usize, fwhm: f64) -> Result<f64> {
    Ok(expected_ec(peak, df, resels(q, fwhm))?.clamp(0.0, 1.0))
}
