//! Per-trial and per-condition gait metrics: tracking errors, spatiotemporal
//! parameters and inter-cycle variability.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::cycles::{intercycle_sd, interp_uniform, normalize_cycles, GaitCycleTensor};
use super::events::detect_heel_strikes;
use super::filter::butterworth_lowpass;
use crate::error::{Error, Result};
use crate::gait::Joint;
use crate::record::TrialRecord;

pub const CUTOFF_HZ: f64 = 12.0;
pub const FILTER_ORDER: usize = 4;
/// Time trimmed from each end of a trial before computing metrics, s.
pub const STEADY_TRIM: f64 = 1.0;
/// Half-width of the window used to estimate the walking direction, samples.
const DIRECTION_HALF_WINDOW: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrideParams {
    /// m
    pub stride: f64,
    /// m/s
    pub speed: f64,
    /// steps/min
    pub cadence: f64,
    /// s
    pub duration: f64,
}

/// Stride length, speed and cadence for each pair of consecutive ipsilateral
/// heel strikes. `pelvis_xy` is sampled at `fs` from time zero.
pub fn spatiotemporal(
    events: &[f64],
    pelvis_xy: &[[f64; 2]],
    fs: f64,
) -> Result<Vec<StrideParams>> {
    if events.len() < 2 {
        return Err(Error::NoEventsFound);
    }
    if pelvis_xy.is_empty() {
        return Err(Error::SeriesTooShort { len: 0, min: 1 });
    }
    let xs: Vec<f64> = pelvis_xy.iter().map(|p| p[0]).collect();
    let ys: Vec<f64> = pelvis_xy.iter().map(|p| p[1]).collect();
    let at = |t: f64| [interp_uniform(&xs, fs, t), interp_uniform(&ys, fs, t)];
    Ok(events
        .windows(2)
        .map(|w| {
            let (a, b) = (at(w[0]), at(w[1]));
            let stride = (b[0] - a[0]).hypot(b[1] - a[1]);
            let duration = w[1] - w[0];
            StrideParams {
                stride,
                speed: stride / duration,
                cadence: 120.0 / duration,
                duration,
            }
        })
        .collect())
}

/// Mean |q_tx| and |q_ty| over the steady window, in cm.
pub fn compliance_metrics(record: &TrialRecord) -> Result<(f64, f64)> {
    let (first, last) = match (record.samples.first(), record.samples.last()) {
        (Some(a), Some(b)) => (a.t, b.t),
        _ => return Err(Error::WindowTooShort),
    };
    let (lo, hi) = (first + STEADY_TRIM, last - STEADY_TRIM);
    let mut n = 0usize;
    let (mut ex, mut ey) = (0.0, 0.0);
    for s in record.samples.iter().filter(|s| s.t >= lo && s.t <= hi) {
        ex += s.q[0].abs();
        ey += s.q[1].abs();
        n += 1;
    }
    if n == 0 {
        return Err(Error::WindowTooShort);
    }
    Ok((100.0 * ex / n as f64, 100.0 * ey / n as f64))
}

/// Unit walking direction at each sample from the pelvis displacement over a
/// centred window. Falls back to the pelvis yaw while standing still.
fn walking_direction(x: &[f64], y: &[f64], yaw: &[f64]) -> Vec<[f64; 2]> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let a = i.saturating_sub(DIRECTION_HALF_WINDOW);
            let b = (i + DIRECTION_HALF_WINDOW).min(n - 1);
            let (dx, dy) = (x[b] - x[a], y[b] - y[a]);
            let norm = dx.hypot(dy);
            if norm > 1e-3 {
                [dx / norm, dy / norm]
            } else {
                [yaw[i].cos(), yaw[i].sin()]
            }
        })
        .collect()
}

/// Gait cycles and metrics extracted from one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialAnalysis {
    pub label: String,
    pub trial: usize,
    pub robot_present: bool,
    /// Cycles from both legs, left first, with strides filled in.
    pub cycles: GaitCycleTensor,
    /// Mean |e_x|, |e_y| in cm when a robot is present.
    pub compliance: Option<(f64, f64)>,
}

impl TrialAnalysis {
    pub fn strides(&self) -> Vec<StrideParams> {
        self.cycles
            .meta
            .iter()
            .map(|m| StrideParams {
                stride: m.stride,
                speed: m.stride / m.duration,
                cadence: 120.0 / m.duration,
                duration: m.duration,
            })
            .collect()
    }
}

fn filtered_column(record: &TrialRecord, name: &str) -> Result<Vec<f64>> {
    let raw = record
        .column(name)
        .ok_or_else(|| Error::InvalidField(format!("missing column {name}")))?;
    butterworth_lowpass(&raw, record.sample_rate(), CUTOFF_HZ, FILTER_ORDER)
}

/// Filters, detects heel strikes per leg and normalizes the steady-window
/// cycles. With `max_cycles`, only that many cycles around the middle of the
/// walk are kept, split between the legs (left gets the odd one).
pub fn analyze_trial(record: &TrialRecord, max_cycles: Option<usize>) -> Result<TrialAnalysis> {
    let fs = record.sample_rate();
    let px = filtered_column(record, "pelvis_x")?;
    let py = filtered_column(record, "pelvis_y")?;
    let yaw = record.column("pelvis_yaw").unwrap_or_default();
    let dir = walking_direction(&px, &py, &yaw);
    let pelvis_xy: Vec<[f64; 2]> = px.iter().zip(&py).map(|(&x, &y)| [x, y]).collect();
    let t_end = (record.len() - 1) as f64 / fs;

    let mut cycles = GaitCycleTensor::default();
    for (side, left) in [("l", true), ("r", false)] {
        let per_leg = max_cycles.map(|n| if left { n.div_ceil(2) } else { n / 2 });
        let hx = filtered_column(record, &format!("heel_{side}_x"))?;
        let hy = filtered_column(record, &format!("heel_{side}_y"))?;
        let rel: Vec<f64> = (0..hx.len())
            .map(|i| (hx[i] - px[i]) * dir[i][0] + (hy[i] - py[i]) * dir[i][1])
            .collect();
        let events = detect_heel_strikes(&rel, fs)?;
        let joints: Vec<Vec<f64>> = Joint::ALL
            .iter()
            .map(|j| {
                filtered_column(
                    record,
                    &format!("{}_{}", j.name(), if left { "l" } else { "r" }),
                )
            })
            .collect::<Result<_>>()?;
        let mut leg = normalize_cycles([&joints[0], &joints[1], &joints[2]], fs, &events)?;
        let strides = spatiotemporal(&events, &pelvis_xy, fs)?;
        let mut kept = GaitCycleTensor {
            excluded: leg.excluded,
            ..Default::default()
        };
        for (curves, mut meta) in leg.curves.drain(..).zip(leg.meta.drain(..)) {
            if meta.start < STEADY_TRIM || meta.end > t_end - STEADY_TRIM {
                continue;
            }
            if let Some(s) = strides
                .iter()
                .zip(events.windows(2))
                .find(|(_, w)| w[0] == meta.start)
            {
                meta.stride = s.0.stride;
            }
            kept.push(curves, meta);
        }
        if let Some(n) = per_leg {
            kept.keep_middle(n);
        }
        cycles.extend(kept);
    }
    let compliance = if record.meta.robot_present {
        Some(compliance_metrics(record)?)
    } else {
        None
    };
    Ok(TrialAnalysis {
        label: record.meta.label.clone(),
        trial: record.meta.trial,
        robot_present: record.meta.robot_present,
        cycles,
        compliance,
    })
}

/// Mean and sample SD; SD is `None` below two values.
pub fn mean_sd(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.len() >= 2)
        .then(|| (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(mean), sd)
}

/// One row of the metrics table. `None` marks a value that could not be
/// computed (or does not apply, like tracking errors without a robot).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionMetrics {
    pub label: String,
    pub trials: usize,
    pub cycles: usize,
    pub excluded_cycles: usize,
    pub e_x_cm: Option<f64>,
    pub e_y_cm: Option<f64>,
    pub stride_mean: Option<f64>,
    pub stride_sd: Option<f64>,
    pub speed_mean: Option<f64>,
    pub speed_sd: Option<f64>,
    pub cadence_mean: Option<f64>,
    /// Inter-cycle SD per joint (hip, knee, ankle), deg.
    pub sd_deg: Option<[f64; 3]>,
    /// Per-record failures, `name: message`.
    pub failures: Vec<String>,
}

impl ConditionMetrics {
    /// Pools trial analyses of one condition.
    pub fn from_trials(
        label: &str,
        trials: &[TrialAnalysis],
        failures: Vec<String>,
    ) -> (Self, GaitCycleTensor) {
        let mut pooled = GaitCycleTensor::default();
        for t in trials {
            pooled.extend(t.cycles.clone());
        }
        let strides: Vec<StrideParams> = trials.iter().flat_map(TrialAnalysis::strides).collect();
        let (stride_mean, stride_sd) =
            mean_sd(&strides.iter().map(|s| s.stride).collect::<Vec<_>>());
        let (speed_mean, speed_sd) = mean_sd(&strides.iter().map(|s| s.speed).collect::<Vec<_>>());
        let (cadence_mean, _) = mean_sd(&strides.iter().map(|s| s.cadence).collect::<Vec<_>>());
        let comp: Vec<(f64, f64)> = trials.iter().filter_map(|t| t.compliance).collect();
        let (e_x_cm, _) = mean_sd(&comp.iter().map(|c| c.0).collect::<Vec<_>>());
        let (e_y_cm, _) = mean_sd(&comp.iter().map(|c| c.1).collect::<Vec<_>>());
        let mut failures = failures;
        let sd_deg = match intercycle_sd(&pooled) {
            Ok(sd) => Some(sd),
            Err(e) => {
                if !trials.is_empty() {
                    failures.push(format!("{label}: {e}"));
                }
                None
            }
        };
        let row = Self {
            label: label.to_string(),
            trials: trials.len(),
            cycles: pooled.len(),
            excluded_cycles: pooled.excluded,
            e_x_cm,
            e_y_cm,
            stride_mean,
            stride_sd,
            speed_mean,
            speed_sd,
            cadence_mean,
            sd_deg,
            failures,
        };
        (row, pooled)
    }
}

/// Groups records by label and analyzes each condition. Records that fail to
/// analyze are listed in the row's `failures` rather than aborting.
pub fn analyze_conditions(
    records: &[TrialRecord],
    max_cycles: Option<usize>,
) -> (MetricsTable, BTreeMap<String, GaitCycleTensor>) {
    let mut by_label: BTreeMap<String, (Vec<TrialAnalysis>, Vec<String>)> = BTreeMap::new();
    for rec in records {
        let entry = by_label.entry(rec.meta.label.clone()).or_default();
        match analyze_trial(rec, max_cycles) {
            Ok(a) => entry.0.push(a),
            Err(e) => {
                log::warn!("{}: {e}", rec.stem());
                entry.1.push(format!("{}: {e}", rec.stem()));
            }
        }
    }
    let mut table = MetricsTable::default();
    let mut tensors = BTreeMap::new();
    for (label, (trials, failures)) in by_label {
        let (row, pooled) = ConditionMetrics::from_trials(&label, &trials, failures);
        table.rows.push(row);
        tensors.insert(label, pooled);
    }
    (table, tensors)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsTable {
    pub rows: Vec<ConditionMetrics>,
}

fn cell(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "N/A".to_string(), |x| format!("{x:.prec$}"))
}

fn pm(mean: Option<f64>, sd: Option<f64>, prec: usize) -> String {
    match (mean, sd) {
        (Some(m), Some(s)) => format!("{m:.prec$}±{s:.prec$}"),
        (Some(m), None) => format!("{m:.prec$}"),
        _ => "N/A".to_string(),
    }
}

impl MetricsTable {
    pub fn row(&self, label: &str) -> Option<&ConditionMetrics> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "label,trials,cycles,excluded_cycles,e_x_cm,e_y_cm,stride_mean_m,stride_sd_m,\
             speed_mean_mps,speed_sd_mps,cadence_mean_spm,sd_hip_deg,sd_knee_deg,sd_ankle_deg\n",
        );
        let f = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x}"));
        for r in &self.rows {
            let sd = r.sd_deg.map_or([None; 3], |s| s.map(Some));
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.label,
                r.trials,
                r.cycles,
                r.excluded_cycles,
                f(r.e_x_cm),
                f(r.e_y_cm),
                f(r.stride_mean),
                f(r.stride_sd),
                f(r.speed_mean),
                f(r.speed_sd),
                f(r.cadence_mean),
                f(sd[0]),
                f(sd[1]),
                f(sd[2]),
            );
        }
        out
    }

    /// Aligned plain-text rendering in three blocks: tracking errors,
    /// spatiotemporal parameters and inter-cycle SD.
    pub fn to_text(&self) -> String {
        let w = self
            .rows
            .iter()
            .map(|r| r.label.len())
            .max()
            .unwrap_or(0)
            .max(9);
        let mut out = String::new();
        let _ = writeln!(out, "Tracking errors (cm)");
        let _ = writeln!(out, "{:<w$}  {:>8}  {:>8}", "condition", "e_x", "e_y");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<w$}  {:>8}  {:>8}",
                r.label,
                cell(r.e_x_cm, 2),
                cell(r.e_y_cm, 2)
            );
        }
        let _ = writeln!(out, "\nSpatiotemporal parameters");
        let _ = writeln!(
            out,
            "{:<w$}  {:>13}  {:>13}  {:>9}  {:>6}",
            "condition", "stride (m)", "speed (m/s)", "cadence", "cycles"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<w$}  {:>13}  {:>13}  {:>9}  {:>6}",
                r.label,
                pm(r.stride_mean, r.stride_sd, 2),
                pm(r.speed_mean, r.speed_sd, 2),
                cell(r.cadence_mean, 1),
                r.cycles
            );
        }
        let _ = writeln!(out, "\nInter-cycle SD of joint angles (deg)");
        let _ = writeln!(
            out,
            "{:<w$}  {:>7}  {:>7}  {:>7}",
            "condition", "hip", "knee", "ankle"
        );
        for r in &self.rows {
            let sd = r.sd_deg.map_or([None; 3], |s| s.map(Some));
            let _ = writeln!(
                out,
                "{:<w$}  {:>7}  {:>7}  {:>7}",
                r.label,
                cell(sd[0], 2),
                cell(sd[1], 2),
                cell(sd[2], 2)
            );
        }
        let failures: Vec<&String> = self.rows.iter().flat_map(|r| &r.failures).collect();
        if !failures.is_empty() {
            let _ = writeln!(out, "\nFailures");
            for f in failures {
                let _ = writeln!(out, "  {f}");
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::{RecordMeta, Sample};
    use crate::scenario::ScenarioConfig;

    fn record_with_q(q: impl Fn(f64) -> [f64; 2], secs: f64) -> TrialRecord {
        let n = (secs * 50.0) as usize + 1;
        let samples: Vec<Sample> = (0..n)
            .map(|i| {
                let t = i as f64 / 50.0;
                let [qx, qy] = q(t);
                Sample {
                    t,
                    q: [qx, qy, 0.0, 0.0, 0.0, 0.0],
                    ..Default::default()
                }
            })
            .collect();
        TrialRecord {
            meta: RecordMeta {
                label: "c".into(),
                trial: 0,
                seed: 0,
                robot_present: true,
                samples: n,
                scenario: ScenarioConfig::default(),
            },
            samples,
        }
    }

    #[test]
    fn stride_from_constant_velocity() {
        let fs = 50.0;
        let v = 1.04;
        let xy: Vec<[f64; 2]> = (0..300).map(|i| [v * i as f64 / fs, 0.2]).collect();
        let d = 1.2404;
        let p = spatiotemporal(&[0.5, 0.5 + d], &xy, fs).unwrap();
        assert!((p[0].stride - 1.29).abs() < 0.005);
        assert!((p[0].speed - 1.04).abs() < 1e-9);
        assert!((p[0].cadence - 120.0 / d).abs() < 1e-9);
    }

    #[test]
    fn stationary_pelvis_gives_zero_stride() {
        let xy = vec![[3.0, -1.0]; 200];
        let p = spatiotemporal(&[0.5, 1.6, 2.7], &xy, 50.0).unwrap();
        assert!(p.iter().all(|s| s.stride == 0.0 && s.speed == 0.0));
    }

    #[test]
    fn compliance_zero_constant_and_sawtooth() {
        let r = record_with_q(|_| [0.0, 0.0], 10.0);
        assert_eq!(compliance_metrics(&r).unwrap(), (0.0, 0.0));
        let r = record_with_q(|_| [0.007, -0.002], 10.0);
        let (ex, ey) = compliance_metrics(&r).unwrap();
        assert!((ex - 0.7).abs() < 1e-12 && (ey - 0.2).abs() < 1e-12);
        // zero-mean sawtooth in [-0.02, 0.02] with a period of 1 s
        let r = record_with_q(|t| [0.04 * (t - t.floor()) - 0.02, 0.0], 12.0);
        let (ex, _) = compliance_metrics(&r).unwrap();
        assert!((ex - 1.0).abs() < 0.01, "{ex}");
    }

    #[test]
    fn short_record_has_no_window() {
        let r = record_with_q(|_| [0.0, 0.0], 1.5);
        assert_eq!(compliance_metrics(&r), Err(Error::WindowTooShort));
    }

    #[test]
    fn mean_sd_cases() {
        assert_eq!(mean_sd(&[]), (None, None));
        assert_eq!(mean_sd(&[2.0]), (Some(2.0), None));
        let (m, s) = mean_sd(&[1.0, 3.0]);
        assert_eq!(m, Some(2.0));
        assert!((s.unwrap() - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn table_marks_missing_values() {
        let row = ConditionMetrics {
            label: "free".into(),
            trials: 1,
            cycles: 4,
            excluded_cycles: 0,
            e_x_cm: None,
            e_y_cm: None,
            stride_mean: Some(1.3),
            stride_sd: Some(0.01),
            speed_mean: Some(1.1),
            speed_sd: Some(0.02),
            cadence_mean: Some(103.0),
            sd_deg: Some([1.0, 2.0, 3.0]),
            failures: vec![],
        };
        let table = MetricsTable { rows: vec![row] };
        let text = table.to_text();
        assert!(text.contains("N/A"));
        assert!(text.contains("1.30±0.01"));
        assert!(table
            .to_csv()
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("free,1,4,0,NA,NA,1.3,"));
    }
}
