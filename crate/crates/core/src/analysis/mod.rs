//! Gait analysis: zero-phase filtering, heel-strike detection, cycle
//! normalization and the compliance and transparency metrics.

pub mod cycles;
pub mod events;
pub mod filter;
pub mod metrics;

pub use cycles::{intercycle_sd, normalize_cycles, CycleMeta, GaitCycleTensor, NODES};
pub use events::detect_heel_strikes;
pub use filter::butterworth_lowpass;
pub use metrics::{
    analyze_conditions, analyze_trial, compliance_metrics, spatiotemporal, ConditionMetrics,
    MetricsTable, StrideParams, TrialAnalysis,
};
