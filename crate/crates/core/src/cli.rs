//! The run, analyze and compare stages behind the `hitlsim` binary. Each
//! stage reads and writes flat files so it can be run on its own.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::analysis::{analyze_conditions, GaitCycleTensor, MetricsTable};
use crate::error::{Error, Result};
use crate::gait::Joint;
use crate::plan::{trial_seed, ExperimentPlan};
use crate::record::{TrialRecord, HEADER_COMMENT};
use crate::sim::run_labeled_trial;
use crate::spm::{spm_anova, FieldGroup, SpmOptions, SpmResult};

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub label: String,
    pub trial: usize,
    pub seed: u64,
    /// Record path, or the failure message.
    pub result: std::result::Result<PathBuf, String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunReport {
    pub resolved: Vec<PathBuf>,
    pub trials: Vec<TrialOutcome>,
}

impl RunReport {
    pub fn failures(&self) -> impl Iterator<Item = &TrialOutcome> {
        self.trials.iter().filter(|t| t.result.is_err())
    }

    pub fn records(&self) -> impl Iterator<Item = &Path> {
        self.trials.iter().filter_map(|t| t.result.as_deref().ok())
    }

    pub fn summary(&self) -> String {
        let mut labels: Vec<&str> = Vec::new();
        for t in &self.trials {
            if !labels.contains(&t.label.as_str()) {
                labels.push(&t.label);
            }
        }
        let mut out = String::new();
        for label in labels {
            let of_label: Vec<_> = self.trials.iter().filter(|t| t.label == label).collect();
            let ok = of_label.iter().filter(|t| t.result.is_ok()).count();
            out.push_str(&format!("{label}: {ok}/{} trials\n", of_label.len()));
            for t in of_label {
                if let Err(msg) = &t.result {
                    out.push_str(&format!(
                        "  trial {} (seed {}) failed: {msg}\n",
                        t.trial, t.seed
                    ));
                }
            }
        }
        out
    }
}

/// Runs every condition for `plan.trials` trials. Trial `k` of every
/// condition gets the same derived seed. Simulation failures are collected
/// per trial; only configuration and I/O setup errors abort.
pub fn run_plan(plan: &ExperimentPlan, seed: Option<u64>, out: Option<&Path>) -> Result<RunReport> {
    plan.validate()?;
    let scenarios = plan.load_scenarios()?;
    let out = out.unwrap_or(&plan.out);
    create_dir(out)?;
    let global = seed.unwrap_or(plan.seed);

    let mut report = RunReport::default();
    for (label, scenario) in &scenarios {
        let path = out.join(format!("{label}_resolved.toml"));
        write(&path, &scenario.to_toml())?;
        report.resolved.push(path);
    }

    let jobs: Vec<(usize, usize)> = (0..scenarios.len())
        .flat_map(|c| (0..plan.trials).map(move |k| (c, k)))
        .collect();
    let started = Instant::now();
    report.trials = jobs
        .par_iter()
        .map(|&(c, k)| {
            let (label, base) = &scenarios[c];
            let mut scenario = base.clone();
            scenario.trial.seed = trial_seed(global, k);
            let result = run_labeled_trial(&scenario, label, k)
                .and_then(|rec| rec.save(out))
                .map_err(|e| {
                    // never leave a stale record from an earlier run behind
                    let stale = out.join(format!("{label}_trial{k}.csv"));
                    let _ = std::fs::remove_file(stale.with_extension("json"));
                    let _ = std::fs::remove_file(stale);
                    e.to_string()
                });
            match &result {
                Ok(p) => log::info!("{label} trial {k}: wrote {}", p.display()),
                Err(e) => log::warn!("{label} trial {k}: {e}"),
            }
            TrialOutcome {
                label: label.clone(),
                trial: k,
                seed: scenario.trial.seed,
                result,
            }
        })
        .collect();
    log::info!(
        "{} trials in {:.1} s",
        report.trials.len(),
        started.elapsed().as_secs_f64()
    );
    Ok(report)
}

fn is_record(path: &Path) -> bool {
    let Ok(file) = std::fs::File::open(path) else {
        return false;
    };
    let mut first = String::new();
    BufReader::new(file).read_line(&mut first).is_ok() && first.trim_end() == HEADER_COMMENT
}

/// Expands `pattern` and loads every trial record it matches, sorted by
/// label and trial. Other files (metric tables, cycle dumps) are skipped.
pub fn load_records(pattern: &str) -> Result<Vec<TrialRecord>> {
    let paths = glob::glob(pattern).map_err(|e| Error::parse(pattern, e))?;
    let mut records = Vec::new();
    for entry in paths {
        let path = entry.map_err(|e| Error::io(e.path(), e.error().to_string()))?;
        if path.extension().and_then(|e| e.to_str()) != Some("csv") || !is_record(&path) {
            log::debug!("skipping {}", path.display());
            continue;
        }
        records.push(TrialRecord::load(&path)?);
    }
    if records.is_empty() {
        return Err(Error::io(pattern, "no trial records match"));
    }
    records.sort_by(|a, b| (&a.meta.label, a.meta.trial).cmp(&(&b.meta.label, b.meta.trial)));
    Ok(records)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeReport {
    pub table: MetricsTable,
    pub written: Vec<PathBuf>,
}

/// Writes `metrics.csv`, `metrics.txt` and one `<label>_cycles.csv` per condition.
pub fn analyze(pattern: &str, out: &Path, cycles: Option<usize>) -> Result<AnalyzeReport> {
    let records = load_records(pattern)?;
    let (table, tensors) = analyze_conditions(&records, cycles);
    create_dir(out)?;
    let mut written = Vec::new();
    for (name, text) in [
        ("metrics.csv", table.to_csv()),
        ("metrics.txt", table.to_text()),
    ] {
        let path = out.join(name);
        write(&path, &text)?;
        written.push(path);
    }
    for (label, tensor) in &tensors {
        let path = out.join(format!("{label}_cycles.csv"));
        write(&path, &tensor.to_csv())?;
        written.push(path);
    }
    Ok(AnalyzeReport { table, written })
}

fn pooled_cycles(records: &[TrialRecord], cycles: Option<usize>) -> (String, GaitCycleTensor) {
    let (table, tensors) = analyze_conditions(records, cycles);
    for row in &table.rows {
        for f in &row.failures {
            log::warn!("{f}");
        }
    }
    let labels: BTreeSet<&str> = records.iter().map(|r| r.meta.label.as_str()).collect();
    let name = labels.into_iter().collect::<Vec<_>>().join("+");
    let mut pooled = GaitCycleTensor::default();
    for t in tensors.into_values() {
        pooled.extend(t);
    }
    (name, pooled)
}

/// Per-joint outcome of `compare`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointComparison {
    pub joint: Joint,
    pub result: std::result::Result<SpmResult, String>,
    pub written: Vec<PathBuf>,
}

/// Pools the cycles of two record sets and runs an SPM ANOVA per joint,
/// writing `spm_<joint>.json` and `spm_<joint>.csv`. A joint that cannot be
/// tested is reported without stopping the others.
pub fn compare(
    a: &str,
    b: &str,
    joints: &[Joint],
    opts: &SpmOptions,
    cycles: Option<usize>,
    out: &Path,
) -> Result<Vec<JointComparison>> {
    let (mut name_a, tensor_a) = pooled_cycles(&load_records(a)?, cycles);
    let (mut name_b, tensor_b) = pooled_cycles(&load_records(b)?, cycles);
    if name_a == name_b {
        name_a.push_str("/a");
        name_b.push_str("/b");
    }
    create_dir(out)?;
    let mut results = Vec::new();
    for &joint in joints {
        let run = || -> Result<(SpmResult, Vec<PathBuf>)> {
            for t in [&tensor_a, &tensor_b] {
                if t.len() < 2 {
                    return Err(Error::TooFewCycles {
                        need: 2,
                        found: t.len(),
                    });
                }
            }
            let group = |name: &str, t: &GaitCycleTensor| {
                FieldGroup::new(name, t.joint(joint).iter().map(|c| c.to_vec()).collect())
            };
            let res = spm_anova(
                &[group(&name_a, &tensor_a), group(&name_b, &tensor_b)],
                opts,
            )?;
            let json = out.join(format!("spm_{}.json", joint.name()));
            write(&json, &res.to_json())?;
            let csv = json.with_extension("csv");
            write(&csv, &res.plot_csv())?;
            Ok((res, vec![json, csv]))
        };
        let (result, written) = match run() {
            Ok((r, w)) => (Ok(r), w),
            Err(e) => {
                log::warn!("{}: {e}", joint.name());
                (Err(e.to_string()), Vec::new())
            }
        };
        results.push(JointComparison {
            joint,
            result,
            written,
        });
    }
    Ok(results)
}

/// One line per joint: threshold and suprathreshold clusters.
pub fn comparison_summary(results: &[JointComparison]) -> String {
    let mut out = String::new();
    for r in results {
        match &r.result {
            Ok(res) => {
                out.push_str(&format!(
                    "{:<6} F* = {:.3} (FWHM {:.1}, df {}/{})",
                    r.joint.name(),
                    res.threshold,
                    res.fwhm,
                    res.df.0,
                    res.df.1
                ));
                if res.clusters.is_empty() {
                    out.push_str("  no suprathreshold clusters");
                }
                out.push('\n');
                for c in &res.clusters {
                    out.push_str(&format!(
                        "       nodes {}-{} ({}%-{}%), peak F {:.2}, p = {:.4}\n",
                        c.start, c.end, c.start, c.end, c.peak, c.p
                    ));
                }
            }
            Err(e) => out.push_str(&format!("{:<6} failed: {e}\n", r.joint.name())),
        }
    }
    out
}
