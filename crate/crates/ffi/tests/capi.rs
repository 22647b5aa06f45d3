use std::ffi::{CStr, CString};
use std::ptr;

use hitlsim_ffi::*;

fn last_error() -> Option<String> {
    let p = hitl_last_error();
    if p.is_null() {
        return None;
    }
    let msg = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { hitl_string_free(p) };
    Some(msg)
}

fn scenario(toml: &str) -> *mut HitlScenario {
    let text = CString::new(toml).unwrap();
    let mut s = ptr::null_mut();
    assert_eq!(
        unsafe { hitl_scenario_from_toml(text.as_ptr(), &mut s) },
        HitlStatus::Ok
    );
    assert!(!s.is_null());
    s
}

#[test]
fn scenario_errors_set_last_error() {
    let text = CString::new("[robot]\nmass = \"heavy\"\n").unwrap();
    let mut s = ptr::null_mut();
    let status = unsafe { hitl_scenario_from_toml(text.as_ptr(), &mut s) };
    assert_eq!(status, HitlStatus::Parse);
    assert!(s.is_null());
    assert!(last_error().unwrap().contains("line 2"));

    let status = unsafe { hitl_scenario_from_toml(ptr::null(), &mut s) };
    assert_eq!(status, HitlStatus::NullPointer);

    let bad = CString::new("[trial]\nrecord_rate = 33.0\n").unwrap();
    assert_eq!(
        unsafe { hitl_scenario_from_toml(bad.as_ptr(), &mut s) },
        HitlStatus::Config
    );

    let mut ok = ptr::null_mut();
    assert_eq!(unsafe { hitl_scenario_default(&mut ok) }, HitlStatus::Ok);
    assert!(last_error().is_none());
    unsafe { hitl_scenario_free(ok) };
}

#[test]
fn stepping_simulation() {
    let s = scenario("[trial]\nduration = 1.0\n");
    let mut sim = ptr::null_mut();
    assert_eq!(unsafe { hitl_simulation_new(s, &mut sim) }, HitlStatus::Ok);
    assert_eq!(unsafe { hitl_simulation_step(sim, 500) }, HitlStatus::Ok);
    let mut t = 0.0;
    assert_eq!(unsafe { hitl_simulation_time(sim, &mut t) }, HitlStatus::Ok);
    assert!((t - 0.5).abs() < 1e-9, "{t}");
    let mut pose = [0.0; 6];
    assert_eq!(
        unsafe { hitl_simulation_pelvis(sim, pose.as_mut_ptr()) },
        HitlStatus::Ok
    );
    assert!(pose[0] > 0.05 && pose[2] > 0.5, "{pose:?}");
    let mut q = [f64::NAN; 6];
    assert_eq!(
        unsafe { hitl_simulation_coupling(sim, q.as_mut_ptr()) },
        HitlStatus::Ok
    );
    assert!(q.iter().all(|v| v.is_finite()));
    unsafe {
        hitl_simulation_free(sim);
        hitl_scenario_free(s);
    }
}

#[test]
fn trial_record_round_trip_and_metrics() {
    let s = scenario("[robot]\npresent = false\n[trial]\ndistance = 10.0\n");
    assert_eq!(unsafe { hitl_scenario_set_seed(s, 3) }, HitlStatus::Ok);
    let label = CString::new("free").unwrap();
    let mut rec = ptr::null_mut();
    assert_eq!(
        unsafe { hitl_run_trial(s, label.as_ptr(), 0, &mut rec) },
        HitlStatus::Ok
    );
    let n = unsafe { hitl_record_len(rec) };
    assert!(n > 400);

    let name = CString::new("pelvis_x").unwrap();
    let mut len = 0;
    let status = unsafe { hitl_record_column(rec, name.as_ptr(), ptr::null_mut(), 0, &mut len) };
    assert_eq!(status, HitlStatus::BufferTooSmall);
    assert_eq!(len, n);
    let mut buf = vec![0.0; len];
    let status =
        unsafe { hitl_record_column(rec, name.as_ptr(), buf.as_mut_ptr(), buf.len(), &mut len) };
    assert_eq!(status, HitlStatus::Ok);
    assert!(buf[n - 1] >= 10.0);

    let mut m = HitlTrialMetrics {
        cycles: 0,
        stride_m: 0.0,
        speed_mps: 0.0,
        cadence_spm: 0.0,
        e_x_cm: 0.0,
        e_y_cm: 0.0,
        sd_deg: [0.0; 3],
    };
    assert_eq!(
        unsafe { hitl_record_analyze(rec, 4, &mut m) },
        HitlStatus::Ok
    );
    assert_eq!(m.cycles, 4);
    assert!((m.speed_mps - 1.12).abs() < 0.01, "{}", m.speed_mps);
    assert!(m.e_x_cm.is_nan() && m.e_y_cm.is_nan());

    let dir = tempfile::tempdir().unwrap();
    let dir_c = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { hitl_record_save(rec, dir_c.as_ptr()) },
        HitlStatus::Ok
    );
    let path = CString::new(dir.path().join("free_trial0.csv").to_str().unwrap()).unwrap();
    let mut back = ptr::null_mut();
    assert_eq!(
        unsafe { hitl_record_load(path.as_ptr(), &mut back) },
        HitlStatus::Ok
    );
    assert_eq!(unsafe { hitl_record_len(back) }, n);

    let mut toml = ptr::null_mut();
    assert_eq!(
        unsafe { hitl_scenario_to_toml(s, &mut toml) },
        HitlStatus::Ok
    );
    assert!(unsafe { CStr::from_ptr(toml) }
        .to_str()
        .unwrap()
        .contains("seed = 3"));
    unsafe {
        hitl_string_free(toml);
        hitl_record_free(back);
        hitl_record_free(rec);
        hitl_scenario_free(s);
    }
}

#[test]
fn spm_on_raw_arrays() {
    let nodes = 101;
    let curve = |g: f64, k: usize| -> Vec<f64> {
        (0..nodes)
            .map(|i| {
                let x = i as f64 / 100.0;
                (x * 6.0 + k as f64).sin() * 0.5 + g * (-((x - 0.5) / 0.1).powi(2)).exp()
            })
            .collect()
    };
    let a: Vec<f64> = (0..8).flat_map(|k| curve(0.0, k)).collect();
    let b: Vec<f64> = (0..8).flat_map(|k| curve(3.0, k + 20)).collect();
    let mut out = HitlSpmSummary {
        threshold: 0.0,
        fwhm: 0.0,
        max_f: 0.0,
        n_clusters: 0,
        min_p: 0.0,
    };
    let status = unsafe {
        hitl_spm_anova(
            a.as_ptr(),
            8,
            b.as_ptr(),
            8,
            nodes,
            0.05,
            HitlThresholdMode::Rft,
            0,
            0,
            &mut out,
        )
    };
    assert_eq!(status, HitlStatus::Ok);
    assert!(
        out.n_clusters >= 1 && out.min_p < 0.05 && out.max_f > out.threshold,
        "{out:?}"
    );

    let status = unsafe {
        hitl_spm_anova(
            a.as_ptr(),
            8,
            b.as_ptr(),
            8,
            nodes,
            0.05,
            HitlThresholdMode::Permutation,
            10,
            0,
            &mut out,
        )
    };
    assert_eq!(status, HitlStatus::Statistics);
    assert!(last_error().unwrap().contains("permutations"));

    let status = unsafe {
        hitl_spm_anova(
            a.as_ptr(),
            1,
            b.as_ptr(),
            8,
            nodes,
            0.05,
            HitlThresholdMode::Rft,
            0,
            0,
            &mut out,
        )
    };
    assert_eq!(status, HitlStatus::Statistics);
}

#[test]
fn header_declares_every_export() {
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/hitlsim.h")).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .split("extern \"C\" fn ")
        .skip(1)
        .map(|s| s.split('(').next().unwrap())
        .collect();
    assert!(exports.len() > 15);
    for name in exports {
        assert!(
            header.contains(&format!("{name}(")),
            "{name} missing from header"
        );
    }
}
