//! C ABI for hitlsim.
//!
//! Objects are opaque handles created by `*_new`/`*_from_*` functions and
//! released with the matching `*_free`. Fallible functions return a
//! [`HitlStatus`]; on failure the message is kept per thread and can be
//! fetched with [`hitl_last_error`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use hitlsim::analysis::{analyze_trial, ConditionMetrics};
use hitlsim::spm::{spm_anova, FieldGroup, SpmOptions, ThresholdMode};
use hitlsim::{Error, ScenarioConfig, Simulation, TrialRecord};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HitlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Io = 4,
    Parse = 5,
    Simulation = 6,
    Analysis = 7,
    Statistics = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Threshold method for [`hitl_spm_anova`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HitlThresholdMode {
    Rft = 0,
    Permutation = 1,
}

/// Opaque scenario configuration.
pub struct HitlScenario(ScenarioConfig);

/// Opaque stepping simulation.
pub struct HitlSimulation(Simulation);

/// Opaque recorded trial.
pub struct HitlRecord(TrialRecord);

/// Per-trial metrics. Values that do not apply or could not be computed
/// are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitlTrialMetrics {
    pub cycles: usize,
    pub stride_m: f64,
    pub speed_mps: f64,
    pub cadence_spm: f64,
    pub e_x_cm: f64,
    pub e_y_cm: f64,
    /// Inter-cycle SD of hip, knee and ankle angles, degrees.
    pub sd_deg: [f64; 3],
}

/// Summary of a two-group SPM ANOVA.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitlSpmSummary {
    pub threshold: f64,
    pub fwhm: f64,
    pub max_f: f64,
    pub n_clusters: usize,
    /// Smallest cluster p-value, or 1 without clusters.
    pub min_p: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<String>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> HitlStatus {
    match err {
        Error::Config(_) | Error::CutoffAboveNyquist { .. } => HitlStatus::Config,
        Error::Io { .. } => HitlStatus::Io,
        Error::Parse { .. } => HitlStatus::Parse,
        Error::NonFiniteState { .. }
        | Error::TerminationNotReached { .. }
        | Error::PhaseOutOfRange(_) => HitlStatus::Simulation,
        Error::SeriesTooShort { .. }
        | Error::NoEventsFound
        | Error::DegenerateCycle(_)
        | Error::TooFewCycles { .. }
        | Error::WindowTooShort
        | Error::InsufficientHistory => HitlStatus::Analysis,
        Error::DegenerateResiduals
        | Error::NonConvergence { .. }
        | Error::TooFewPermutations { .. }
        | Error::InvalidField(_) => HitlStatus::Statistics,
    }
}

struct Fail(HitlStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(HitlStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> HitlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            HitlStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            HitlStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        Fail(
            HitlStatus::InvalidUtf8,
            format!("{what} is not valid UTF-8"),
        )
    })
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread, or NULL if the last
/// call succeeded. Free with [`hitl_string_free`].
#[no_mangle]
pub extern "C" fn hitl_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| {
        e.borrow()
            .as_deref()
            .and_then(|m| CString::new(m.replace('\0', " ")).ok())
            .map_or(std::ptr::null_mut(), CString::into_raw)
    })
}

/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn hitl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Scenario with all defaults.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn hitl_scenario_default(out: *mut *mut HitlScenario) -> HitlStatus {
    guard(|| {
        *out_arg(out, "out")? = Box::into_raw(Box::new(HitlScenario(ScenarioConfig::default())));
        Ok(())
    })
}

/// Parses a scenario from TOML text. Relative file references resolve
/// against the working directory.
///
/// # Safety
/// `toml` must be a NUL-terminated string, `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn hitl_scenario_from_toml(
    toml: *const c_char,
    out: *mut *mut HitlScenario,
) -> HitlStatus {
    guard(|| {
        let text = str_arg(toml, "toml")?;
        let out = out_arg(out, "out")?;
        let cfg = ScenarioConfig::from_toml_str(text, Path::new("<toml>"), None)?;
        *out = Box::into_raw(Box::new(HitlScenario(cfg)));
        Ok(())
    })
}

/// Loads a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string, `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn hitl_scenario_from_file(
    path: *const c_char,
    out: *mut *mut HitlScenario,
) -> HitlStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(HitlScenario(ScenarioConfig::from_file(
            Path::new(path),
        )?)));
        Ok(())
    })
}

/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hitl_scenario_set_seed(
    scenario: *mut HitlScenario,
    seed: u64,
) -> HitlStatus {
    guard(|| {
        out_arg(scenario, "scenario")?.0.trial.seed = seed;
        Ok(())
    })
}

/// Resolved scenario as TOML. Free with [`hitl_string_free`].
///
/// # Safety
/// `scenario` must be a live handle, `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn hitl_scenario_to_toml(
    scenario: *const HitlScenario,
    out: *mut *mut c_char,
) -> HitlStatus {
    guard(|| {
        let s = handle(scenario, "scenario")?;
        let out = out_arg(out, "out")?;
        let text =
            CString::new(s.0.to_toml()).map_err(|e| Fail(HitlStatus::Config, e.to_string()))?;
        *out = text.into_raw();
        Ok(())
    })
}

/// # Safety
/// `scenario` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hitl_scenario_free(scenario: *mut HitlScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Creates a simulation at t = 0. The scenario is copied.
///
/// # Safety
/// `scenario` must be a live handle, `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn hitl_simulation_new(
    scenario: *const HitlScenario,
    out: *mut *mut HitlSimulation,
) -> HitlStatus {
    guard(|| {
        let s = handle(scenario, "scenario")?;
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(HitlSimulation(Simulation::new(s.0.clone())?)));
        Ok(())
    })
}

/// Advances `steps` physics steps.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn hitl_simulation_step(sim: *mut HitlSimulation, steps: u64) -> HitlStatus {
    guard(|| {
        let sim = out_arg(sim, "sim")?;
        for _ in 0..steps {
            sim.0.step()?;
        }
        Ok(())
    })
}

/// Simulation time in seconds.
///
/// # Safety
/// `sim` must be a live handle, `t` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn hitl_simulation_time(
    sim: *const HitlSimulation,
    t: *mut f64,
) -> HitlStatus {
    guard(|| {
        let sim = handle(sim, "sim")?;
        *out_arg(t, "t")? = sim.0.world().t;
        Ok(())
    })
}

/// Pelvis pose `[x, y, z, roll, pitch, yaw]`, world frame.
///
/// # Safety
/// `sim` must be a live handle, `pose` must point to 6 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn hitl_simulation_pelvis(
    sim: *const HitlSimulation,
    pose: *mut f64,
) -> HitlStatus {
    guard(|| {
        let sim = handle(sim, "sim")?;
        if pose.is_null() {
            return Err(null("pose"));
        }
        let p = sim.0.sample().pelvis;
        std::slice::from_raw_parts_mut(pose, 6).copy_from_slice(&p);
        Ok(())
    })
}

/// Coupling displacement `[x, y, z, roll, pitch, yaw]` in the attachment frame.
///
/// # Safety
/// `sim` must be a live handle, `q` must point to 6 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn hitl_simulation_coupling(
    sim: *const HitlSimulation,
    q: *mut f64,
) -> HitlStatus {
    guard(|| {
        let sim = handle(sim, "sim")?;
        if q.is_null() {
            return Err(null("q"));
        }
        let v = sim.0.sample().q;
        std::slice::from_raw_parts_mut(q, 6).copy_from_slice(&v);
        Ok(())
    })
}

/// # Safety
/// `sim` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hitl_simulation_free(sim: *mut HitlSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Runs one trial to its termination condition.
///
/// # Safety
/// `scenario` must be a live handle, `label` a NUL-terminated string and
/// `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn hitl_run_trial(
    scenario: *const HitlScenario,
    label: *const c_char,
    trial: usize,
    out: *mut *mut HitlRecord,
) -> HitlStatus {
    guard(|| {
        let s = handle(scenario, "scenario")?;
        let label = str_arg(label, "label")?;
        let out = out_arg(out, "out")?;
        let rec = hitlsim::sim::run_labeled_trial(&s.0, label, trial)?;
        *out = Box::into_raw(Box::new(HitlRecord(rec)));
        Ok(())
    })
}

/// Loads a record CSV and its JSON sidecar.
///
/// # Safety
/// `path` must be a NUL-terminated string, `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn hitl_record_load(
    path: *const c_char,
    out: *mut *mut HitlRecord,
) -> HitlStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(HitlRecord(TrialRecord::load(Path::new(path))?)));
        Ok(())
    })
}

/// Writes `<label>_trial<k>.csv` and its sidecar into `dir`.
///
/// # Safety
/// `record` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hitl_record_save(
    record: *const HitlRecord,
    dir: *const c_char,
) -> HitlStatus {
    guard(|| {
        let rec = handle(record, "record")?;
        rec.0.save(Path::new(str_arg(dir, "dir")?))?;
        Ok(())
    })
}

/// Number of recorded samples, 0 for NULL.
///
/// # Safety
/// `record` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hitl_record_len(record: *const HitlRecord) -> usize {
    record.as_ref().map_or(0, |r| r.0.len())
}

/// Copies one named column into `buf`. `len` receives the column length;
/// if it exceeds `cap`, nothing is copied and `BufferTooSmall` is returned.
///
/// # Safety
/// `record` must be a live handle, `name` a NUL-terminated string, `buf`
/// must hold `cap` doubles (may be NULL when `cap` is 0) and `len` must be
/// valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn hitl_record_column(
    record: *const HitlRecord,
    name: *const c_char,
    buf: *mut f64,
    cap: usize,
    len: *mut usize,
) -> HitlStatus {
    guard(|| {
        let rec = handle(record, "record")?;
        let name = str_arg(name, "name")?;
        let len = out_arg(len, "len")?;
        let col = rec
            .0
            .column(name)
            .ok_or_else(|| Fail(HitlStatus::Config, format!("unknown column {name}")))?;
        *len = col.len();
        if col.len() > cap {
            return Err(Fail(
                HitlStatus::BufferTooSmall,
                format!("column needs {} values", col.len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        std::slice::from_raw_parts_mut(buf, col.len()).copy_from_slice(&col);
        Ok(())
    })
}

/// Gait metrics of one trial, keeping at most `cycles` cycles around the
/// middle of the walk (0 keeps all).
///
/// # Safety
/// `record` must be a live handle, `out` valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn hitl_record_analyze(
    record: *const HitlRecord,
    cycles: usize,
    out: *mut HitlTrialMetrics,
) -> HitlStatus {
    guard(|| {
        let rec = handle(record, "record")?;
        let out = out_arg(out, "out")?;
        let analysis = analyze_trial(&rec.0, (cycles > 0).then_some(cycles))?;
        let (m, _) = ConditionMetrics::from_trials(&rec.0.meta.label, &[analysis], Vec::new());
        let nan = f64::NAN;
        *out = HitlTrialMetrics {
            cycles: m.cycles,
            stride_m: m.stride_mean.unwrap_or(nan),
            speed_mps: m.speed_mean.unwrap_or(nan),
            cadence_spm: m.cadence_mean.unwrap_or(nan),
            e_x_cm: m.e_x_cm.unwrap_or(nan),
            e_y_cm: m.e_y_cm.unwrap_or(nan),
            sd_deg: m.sd_deg.unwrap_or([nan; 3]),
        };
        Ok(())
    })
}

/// # Safety
/// `record` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hitl_record_free(record: *mut HitlRecord) {
    if !record.is_null() {
        drop(Box::from_raw(record));
    }
}

/// Two-group SPM ANOVA on row-major curves: `a` holds `n_a` curves and `b`
/// holds `n_b` curves, each of `nodes` values. `seed` and `n_perm` are used
/// by the permutation mode only.
///
/// # Safety
/// `a` must hold `n_a * nodes` doubles, `b` must hold `n_b * nodes`
/// doubles and `out` must be valid writable storage.
#[no_mangle]
pub unsafe extern "C" fn hitl_spm_anova(
    a: *const f64,
    n_a: usize,
    b: *const f64,
    n_b: usize,
    nodes: usize,
    alpha: f64,
    mode: HitlThresholdMode,
    n_perm: usize,
    seed: u64,
    out: *mut HitlSpmSummary,
) -> HitlStatus {
    guard(|| {
        if a.is_null() {
            return Err(null("a"));
        }
        if b.is_null() {
            return Err(null("b"));
        }
        let out = out_arg(out, "out")?;
        let curves = |p: *const f64, n: usize| -> Vec<Vec<f64>> {
            if nodes == 0 {
                return vec![Vec::new(); n];
            }
            std::slice::from_raw_parts(p, n * nodes)
                .chunks(nodes)
                .map(<[f64]>::to_vec)
                .collect()
        };
        let groups = [
            FieldGroup::new("a", curves(a, n_a)),
            FieldGroup::new("b", curves(b, n_b)),
        ];
        let opts = SpmOptions {
            alpha,
            mode: match mode {
                HitlThresholdMode::Rft => ThresholdMode::Rft,
                HitlThresholdMode::Permutation => ThresholdMode::Perm,
            },
            n_perm,
            seed,
            ..SpmOptions::default()
        };
        let res = spm_anova(&groups, &opts)?;
        *out = HitlSpmSummary {
            threshold: res.threshold,
            fwhm: res.fwhm,
            max_f: res.f.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            n_clusters: res.clusters.len(),
            min_p: res.clusters.iter().map(|c| c.p).fold(1.0, f64::min),
        };
        Ok(())
    })
}
