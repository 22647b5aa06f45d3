//! Heel-strike detection from heel-minus-pelvis forward position.

use crate::error::{Error, Result};

/// Minimum spacing between heel strikes, s.
pub const MIN_SPACING: f64 = 0.4;
/// Minimum peak prominence, m.
pub const MIN_PROMINENCE: f64 = 0.02;

/// Indices of local maxima; plateaus report their middle sample.
fn local_maxima(x: &[f64]) -> Vec<usize> {
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < x.len() {
        if x[i - 1] < x[i] {
            let mut j = i;
            while j + 1 < x.len() && x[j + 1] == x[i] {
                j += 1;
            }
            if j + 1 < x.len() && x[j + 1] < x[i] {
                peaks.push((i + j) / 2);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

/// Height of a peak above the higher of the two minima separating it from
/// taller terrain (or the series ends).
fn prominence(x: &[f64], peak: usize) -> f64 {
    let h = x[peak];
    let mut left_min = h;
    for &v in x[..peak].iter().rev() {
        if v > h {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = h;
    for &v in &x[peak + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Peaks with at least `min_prominence`, thinned so that no two are closer
/// than `min_distance` samples; taller peaks win.
pub fn find_peaks(x: &[f64], min_distance: usize, min_prominence: f64) -> Vec<usize> {
    let candidates: Vec<usize> = local_maxima(x)
        .into_iter()
        .filter(|&p| prominence(x, p) >= min_prominence)
        .collect();
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        x[candidates[b]]
            .total_cmp(&x[candidates[a]])
            .then(a.cmp(&b))
    });
    let mut keep = vec![true; candidates.len()];
    for &i in &order {
        if !keep[i] {
            continue;
        }
        for (j, k) in keep.iter_mut().enumerate() {
            if j != i && candidates[j].abs_diff(candidates[i]) < min_distance {
                *k = false;
            }
        }
    }
    candidates
        .into_iter()
        .zip(keep)
        .filter_map(|(p, k)| k.then_some(p))
        .collect()
}

/// Sub-sample offset of a peak from the parabola through its neighbours.
fn parabolic_offset(x: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= x.len() {
        return 0.0;
    }
    let (a, b, c) = (x[i - 1], x[i], x[i + 1]);
    let den = a - 2.0 * b + c;
    if den == 0.0 {
        0.0
    } else {
        (0.5 * (a - c) / den).clamp(-0.5, 0.5)
    }
}

fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Heel-strike times (s from the first sample) in a uniformly sampled
/// heel-minus-pelvis forward position.
///
/// Peaks must also lie above the series median: the heel is ahead of the
/// pelvis at contact, while knee-flexion bumps during early swing sit well
/// behind it.
pub fn detect_heel_strikes(heel_rel: &[f64], fs: f64) -> Result<Vec<f64>> {
    if heel_rel.len() < 3 {
        return Err(Error::NoEventsFound);
    }
    let min_distance = (MIN_SPACING * fs).round() as usize;
    let mid = median(heel_rel);
    let above: Vec<f64> = heel_rel.iter().map(|&v| v.max(mid)).collect();
    let peaks = find_peaks(&above, min_distance.max(1), MIN_PROMINENCE);
    if peaks.is_empty() {
        return Err(Error::NoEventsFound);
    }
    Ok(peaks
        .into_iter()
        .map(|p| (p as f64 + parabolic_offset(heel_rel, p)) / fs)
        .collect())
}
