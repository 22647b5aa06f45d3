//! End-to-end acceptance checks: controller orderings on the default plan,
//! physics and integrator properties, the filter, the gait pipeline, SPM
//! calibration and determinism. Prints one PASS/FAIL line per check and
//! exits nonzero if any check fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use hitlsim::analysis::{butterworth_lowpass, ConditionMetrics, MetricsTable};
use hitlsim::cli;
use hitlsim::control::ControllerKind;
use hitlsim::coupling::{coupling_wrench, CouplingParams, CouplingState};
use hitlsim::gait::Joint;
use hitlsim::human::AdaptationKind;
use hitlsim::spm::{self, anova1d, smooth_gaussian_fields, FieldGroup, SpmOptions};
use hitlsim::{ExperimentPlan, ScenarioConfig, Simulation, TrialRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Check {
    id: &'static str,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(id: &'static str, name: &'static str, pass: bool, detail: String) -> Check {
    Check {
        id,
        name,
        pass,
        detail,
    }
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

struct Pipeline {
    dir: tempfile::TempDir,
    run_secs: f64,
    table: MetricsTable,
    records: Vec<TrialRecord>,
    failures: usize,
}

/// Runs the shipped default plan, then analyze and compare, into a fresh directory.
fn pipeline() -> Pipeline {
    let plan =
        ExperimentPlan::from_file(&repo_root().join("plans/default.toml")).expect("default plan");
    let dir = tempfile::tempdir().unwrap();
    let started = Instant::now();
    let report = cli::run_plan(&plan, None, Some(dir.path())).expect("run");
    let run_secs = started.elapsed().as_secs_f64();
    let pattern = format!("{}/*.csv", dir.path().display());
    let analysis =
        cli::analyze(&pattern, &dir.path().join("analysis"), Some(plan.cycles)).expect("analyze");
    let a = format!("{}/pid_trial*.csv", dir.path().display());
    let b = format!("{}/free_trial*.csv", dir.path().display());
    cli::compare(
        &a,
        &b,
        &Joint::ALL,
        &SpmOptions::default(),
        Some(plan.cycles),
        &dir.path().join("spm"),
    )
    .expect("compare");
    let records = cli::load_records(&pattern).expect("records");
    Pipeline {
        dir,
        run_secs,
        table: analysis.table,
        records,
        failures: report.failures().count(),
    }
}

fn row<'a>(t: &'a MetricsTable, label: &str) -> &'a ConditionMetrics {
    t.row(label)
        .unwrap_or_else(|| panic!("missing row {label}"))
}

fn compliance(p: &Pipeline) -> Check {
    let pid = row(&p.table, "pid");
    let ada = row(&p.table, "adaptive");
    let (Some(px), Some(py), Some(ax), Some(ay)) = (pid.e_x_cm, pid.e_y_cm, ada.e_x_cm, ada.e_y_cm)
    else {
        return check(
            "1",
            "compliance ordering",
            false,
            "tracking errors missing".into(),
        );
    };
    let pass = ax <= 0.5 * px && ay <= 0.5 * py && p.run_secs < 60.0 && p.failures == 0;
    check(
        "1",
        "compliance ordering",
        pass,
        format!(
            "e_x adaptive/PID {ax:.2}/{px:.2} cm (ratio {:.2}), e_y {ay:.2}/{py:.2} cm (ratio {:.2}), \
             plan run {:.1} s",
            ax / px,
            ay / py,
            p.run_secs
        ),
    )
}

fn transparency(p: &Pipeline) -> Check {
    let (Some(pid), Some(ada)) = (
        row(&p.table, "pid").sd_deg,
        row(&p.table, "adaptive").sd_deg,
    ) else {
        return check(
            "2",
            "transparency ordering",
            false,
            "inter-cycle SD missing".into(),
        );
    };
    let ordered = (0..3).all(|j| ada[j] < pid[j]);
    let band = pid.iter().all(|s| (2.0..=5.0).contains(s));
    check(
        "2",
        "transparency ordering",
        ordered && band,
        format!(
            "hip/knee/ankle SD adaptive {:.2}/{:.2}/{:.2} deg, PID {:.2}/{:.2}/{:.2} deg",
            ada[0], ada[1], ada[2], pid[0], pid[1], pid[2]
        ),
    )
}

fn adaptation_direction(p: &Pipeline) -> Check {
    let speed = |l: &str| row(&p.table, l).speed_mean.unwrap_or(f64::NAN);
    let (free, cons, aggr) = (speed("free"), speed("pid"), speed("pid_aggressive"));
    check(
        "3",
        "adaptation direction",
        cons < free && aggr >= free,
        format!(
            "free {free:.5} m/s, PID conservative {cons:.5} m/s (< free: {}), \
             PID aggressive {aggr:.5} m/s (>= free: {})",
            cons < free,
            aggr >= free
        ),
    )
}

fn coupling_law(p: &Pipeline) -> Check {
    let params = CouplingParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..1_000_000 {
        let mut st = CouplingState::default();
        for i in 0..6 {
            st.q[i] = rng.gen_range(params.q_min[i]..=params.q_max[i]);
            st.qdot[i] = rng.gen_range(-2.0..2.0);
        }
        let w = coupling_wrench(&st, &params);
        for i in 0..6 {
            let kq = params.stiffness[i] * st.q[i];
            let dq = params.damping[i] * st.qdot[i];
            let expected = -(kq + dq);
            let scale = kq.abs() + dq.abs() + f64::MIN_POSITIVE;
            worst = worst.max((w.0[i] - expected).abs() / scale);
        }
    }
    let mut over: f64 = 0.0;
    for rec in &p.records {
        let c = &rec.meta.scenario.coupling;
        for s in &rec.samples {
            for i in 0..6 {
                over = over.max(c.overrun(i, s.q[i]).abs() / c.span(i));
            }
        }
    }
    check(
        "4",
        "coupling law",
        worst <= 2.0 * f64::EPSILON && over <= 1e-3,
        format!(
            "max relative deviation {worst:.1e} over 1e6 samples, worst limit overrun {over:.1e} of span \
             over {} trials",
            p.records.len()
        ),
    )
}

/// Passive system: no gait drive, no base actuation, no controller. Initial
/// conditions keep the coupling inside its limits.
fn passivity() -> Check {
    let mut s = ScenarioConfig::default();
    s.human.gait_drive = false;
    s.robot.actuated = false;
    s.controller.kind = ControllerKind::None;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = f64::NEG_INFINITY;
    let mut total = 0usize;
    for _ in 0..100 {
        let mut sim = Simulation::new(s.clone()).unwrap();
        let mut w = sim.world().clone();
        for i in 0..3 {
            w.human.position[i] += rng.gen_range(-0.01..0.01);
            w.human.velocity[i] = rng.gen_range(-0.1..0.1);
            w.human.rpy[i] += rng.gen_range(-0.05..0.05);
            w.human.rpy_rate[i] = rng.gen_range(-0.3..0.3);
        }
        w.robot.vx = rng.gen_range(-0.2..0.2);
        w.robot.vy = rng.gen_range(-0.2..0.2);
        w.robot.yaw_rate = rng.gen_range(-0.2..0.2);
        sim.set_world(w);
        let mut e = sim.mechanical_energy();
        for _ in 0..1000 {
            sim.step().unwrap();
            let next = sim.mechanical_energy();
            worst = worst.max(next - e);
            e = next;
            total += 1;
        }
    }
    check(
        "5",
        "energy passivity",
        worst <= 1e-6,
        format!("largest per-step energy change {worst:+.2e} J over {total} steps from 100 initial conditions"),
    )
}

fn integrator() -> Check {
    // vertical pelvis on the vertical coupling spring, undamped
    let mut s = ScenarioConfig::default();
    s.human.gait_drive = false;
    s.robot.actuated = false;
    s.controller.kind = ControllerKind::None;
    s.coupling.damping = [0.0; 6];
    let mut sim = Simulation::new(s.clone()).unwrap();
    let mut w = sim.world().clone();
    w.human.position[2] = s.robot.attachment_offset[2] + 0.01;
    w.human.velocity = Default::default();
    w.human.rpy = Default::default();
    w.human.rpy_rate = Default::default();
    sim.set_world(w);
    let m = s.human.gait.body_mass;
    let k = s.coupling.stiffness[2];
    let expected = 2.0 * std::f64::consts::PI * (m / k).sqrt();
    let z0 = s.robot.attachment_offset[2];
    let mut prev = (sim.world().t, sim.world().human.position[2] - z0);
    let mut ups = Vec::new();
    while ups.len() < 6 {
        sim.step().unwrap();
        let cur = (sim.world().t, sim.world().human.position[2] - z0);
        if prev.1 < 0.0 && cur.1 >= 0.0 {
            ups.push(prev.0 + (cur.0 - prev.0) * -prev.1 / (cur.1 - prev.1));
        }
        prev = cur;
    }
    let period = (ups[5] - ups[0]) / 5.0;
    let period_err = (period - expected).abs() / expected;

    // halving dt on a deterministic coupled walk
    let walk = |dt: f64| {
        let mut s = ScenarioConfig::default();
        s.human.heading_wander = 0.0;
        s.human.joint_noise = 0.0;
        s.human.policy.kind = AdaptationKind::Conservative;
        s.controller.kind = ControllerKind::Pid;
        s.trial.dt_physics = dt;
        s.trial.duration = Some(10.0);
        s.trial.distance = None;
        hitlsim::run_trial(&s).unwrap()
    };
    let (a, b) = (walk(1e-3), walk(5e-4));
    let drift = a
        .samples
        .iter()
        .zip(&b.samples)
        .map(|(x, y)| {
            (0..3)
                .map(|i| (x.pelvis[i] - y.pelvis[i]).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max);
    check(
        "6",
        "integrator accuracy",
        period_err < 0.01 && drift < 1e-3 && a.len() == b.len(),
        format!(
            "period {period:.5} s vs {expected:.5} s ({:.3}%), dt-halving pelvis drift {drift:.2e} m over 10 s",
            100.0 * period_err
        ),
    )
}

/// Amplitude and phase of the `f` Hz component by least squares.
fn fit_sine(x: &[f64], f: f64, fs: f64) -> (f64, f64) {
    let (mut ss, mut sc, mut cc, mut xs, mut xc) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (i, v) in x.iter().enumerate() {
        let w = 2.0 * std::f64::consts::PI * f * i as f64 / fs;
        let (s, c) = w.sin_cos();
        ss += s * s;
        sc += s * c;
        cc += c * c;
        xs += v * s;
        xc += v * c;
    }
    let det = ss * cc - sc * sc;
    let a = (xs * cc - xc * sc) / det;
    let b = (xc * ss - xs * sc) / det;
    (a.hypot(b), b.atan2(a))
}

fn filter() -> Check {
    let fs = 50.0;
    let n = 1000;
    let run = |f: f64| {
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * f * i as f64 / fs).sin())
            .collect();
        let y = butterworth_lowpass(&x, fs, 12.0, 4).unwrap();
        // interior only, away from the edge transients
        fit_sine(&y[200..800], f, fs)
    };
    let (a12, p12) = run(12.0);
    let (a2, p2) = run(2.0);
    let ok = (a12 - 0.5).abs() <= 0.02 && a2 >= 0.999 && p12.abs() < 1e-3 && p2.abs() < 1e-3;
    check(
        "7",
        "zero-phase filter",
        ok,
        format!(
            "12 Hz gain {a12:.4} (phase {p12:+.1e} rad), 2 Hz gain {a2:.6} (phase {p2:+.1e} rad)"
        ),
    )
}

fn gait_oracle(p: &Pipeline) -> Check {
    let free = row(&p.table, "free");
    let stride = ScenarioConfig::default().human.gait.stride_length;
    let (Some(v), Some(s)) = (free.speed_mean, free.stride_mean) else {
        return check(
            "8",
            "gait pipeline oracle",
            false,
            "free-walking metrics missing".into(),
        );
    };
    check(
        "8",
        "gait pipeline oracle",
        (v - 1.12).abs() <= 0.01 && ((s - stride) / stride).abs() <= 0.01,
        format!("speed {v:.4} m/s (target 1.12), stride {s:.4} m (generator {stride:.4} m)"),
    )
}

/// Node-wise one-way ANOVA by sums of squares, one node at a time.
fn scalar_anova(groups: &[Vec<f64>]) -> f64 {
    let n: usize = groups.iter().map(Vec::len).sum();
    let k = groups.len();
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for g in groups {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        ssb += g.len() as f64 * (m - grand).powi(2);
        ssw += g.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    }
    (ssb / (k - 1) as f64) / (ssw / (n - k) as f64)
}

fn spm_calibration() -> Check {
    let started = Instant::now();
    let (q, fwhm, per_group, datasets) = (101, 10.0, 8, 500);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut hits = 0;
    let mut worst_oracle: f64 = 0.0;
    let mut datasets_kept = Vec::new();
    for d in 0..datasets {
        let a = smooth_gaussian_fields(per_group, q, fwhm, &mut rng);
        let b = smooth_gaussian_fields(per_group, q, fwhm, &mut rng);
        let groups = [
            FieldGroup::new("a", a.clone()),
            FieldGroup::new("b", b.clone()),
        ];
        let res = spm::spm_anova(&groups, &SpmOptions::default()).unwrap();
        if res.significant() {
            hits += 1;
        }
        if d < 20 {
            let f = anova1d(&groups).unwrap().f;
            for node in 0..q {
                let ga: Vec<f64> = a.iter().map(|c| c[node]).collect();
                let gb: Vec<f64> = b.iter().map(|c| c[node]).collect();
                let oracle = scalar_anova(&[ga, gb]);
                worst_oracle = worst_oracle.max((f[node] - oracle).abs() / oracle.max(1.0));
            }
        }
        if d < 5 {
            datasets_kept.push((groups, res.threshold));
        }
    }
    let rate = hits as f64 / datasets as f64;
    let mut worst_ratio: f64 = 0.0;
    for (i, (groups, rft_u)) in datasets_kept.iter().enumerate() {
        let perm_u = spm::permutation_threshold(groups, 0.05, 5000, i as u64).unwrap();
        worst_ratio = worst_ratio.max((rft_u / perm_u - 1.0).abs());
    }
    let secs = started.elapsed().as_secs_f64();
    check(
        "9",
        "SPM calibration",
        (0.02..=0.08).contains(&rate) && worst_ratio <= 0.10 && worst_oracle <= 1e-9 && secs < 300.0,
        format!(
            "false-positive rate {:.1}% over {datasets} null datasets (FWHM {fwhm}), \
             RFT/permutation threshold mismatch up to {:.1}%, F vs scalar ANOVA {worst_oracle:.1e}, {secs:.1} s",
            100.0 * rate,
            100.0 * worst_ratio
        ),
    )
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_path_buf();
                files.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    files
}

fn determinism(a: &Pipeline, b: &Pipeline) -> Check {
    let (ta, tb) = (tree(a.dir.path()), tree(b.dir.path()));
    let differing: Vec<String> = ta
        .keys()
        .chain(tb.keys())
        .filter(|k| ta.get(*k) != tb.get(*k))
        .map(|k| k.display().to_string())
        .collect();
    check(
        "10",
        "determinism",
        differing.is_empty() && !ta.is_empty(),
        if differing.is_empty() {
            format!("{} output files byte-identical across two runs", ta.len())
        } else {
            format!("differing files: {}", differing.join(", "))
        },
    )
}

fn main() -> ExitCode {
    let first = pipeline();
    let second = pipeline();
    let checks = vec![
        compliance(&first),
        transparency(&first),
        adaptation_direction(&first),
        coupling_law(&first),
        passivity(),
        integrator(),
        filter(),
        gait_oracle(&first),
        spm_calibration(),
        determinism(&first, &second),
    ];
    let mut failed = 0;
    for c in &checks {
        println!(
            "[{}] {:>2} {:<24} {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            c.detail
        );
        failed += usize::from(!c.pass);
    }
    println!(
        "{} of {} acceptance checks passed",
        checks.len() - failed,
        checks.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
