use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hitlsim::cli;
use hitlsim::gait::Joint;
use hitlsim::spm::{Inference, SpmOptions, ThresholdMode};
use hitlsim::ExperimentPlan;

/// Coupled human-robot gait simulation, gait analysis and SPM comparison.
///
/// Log verbosity is read from HITLSIM_LOG (error, warn, info, debug).
#[derive(Parser)]
#[command(name = "hitlsim", version)]
struct Args {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate every condition of an experiment plan and write trial records.
    Run {
        #[arg(long)]
        plan: PathBuf,
        /// Overrides the plan's global seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the plan's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute compliance and transparency tables from trial records.
    Analyze {
        /// Glob matching record CSV files, e.g. 'out/*.csv'.
        #[arg(long)]
        records: String,
        #[arg(long)]
        out: PathBuf,
        /// Gait cycles kept per trial, split between the legs (0 keeps all).
        #[arg(long, default_value_t = 4)]
        cycles: usize,
    },
    /// SPM one-way ANOVA of joint-angle curves between two record sets.
    Compare {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long, value_enum, default_value_t = JointArg::All)]
        joint: JointArg,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = ModeArg::Rft)]
        mode: ModeArg,
        /// Cluster p-values from extent or from peak height.
        #[arg(long, value_enum, default_value_t = InferenceArg::Extent)]
        inference: InferenceArg,
        #[arg(long, default_value_t = 10_000)]
        n_perm: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        cycles: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum JointArg {
    Hip,
    Knee,
    Ankle,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Rft,
    Perm,
}

#[derive(Clone, Copy, ValueEnum)]
enum InferenceArg {
    Extent,
    Peak,
}

fn cycles_opt(n: usize) -> Option<usize> {
    (n > 0).then_some(n)
}

fn execute(cmd: Cmd) -> hitlsim::Result<bool> {
    match cmd {
        Cmd::Run { plan, seed, out } => {
            let plan = ExperimentPlan::from_file(&plan)?;
            let report = cli::run_plan(&plan, seed, out.as_deref())?;
            print!("{}", report.summary());
            let ok = report.failures().next().is_none();
            Ok(ok)
        }
        Cmd::Analyze {
            records,
            out,
            cycles,
        } => {
            let report = cli::analyze(&records, &out, cycles_opt(cycles))?;
            print!("{}", report.table.to_text());
            Ok(true)
        }
        Cmd::Compare {
            a,
            b,
            joint,
            alpha,
            mode,
            inference,
            n_perm,
            seed,
            cycles,
            out,
        } => {
            let joints = match joint {
                JointArg::Hip => vec![Joint::Hip],
                JointArg::Knee => vec![Joint::Knee],
                JointArg::Ankle => vec![Joint::Ankle],
                JointArg::All => Joint::ALL.to_vec(),
            };
            let opts = SpmOptions {
                alpha,
                mode: match mode {
                    ModeArg::Rft => ThresholdMode::Rft,
                    ModeArg::Perm => ThresholdMode::Perm,
                },
                inference: match inference {
                    InferenceArg::Extent => Inference::Extent,
                    InferenceArg::Peak => Inference::Peak,
                },
                n_perm,
                seed,
            };
            let results = cli::compare(&a, &b, &joints, &opts, cycles_opt(cycles), &out)?;
            print!("{}", cli::comparison_summary(&results));
            Ok(results.iter().all(|r| r.result.is_ok()))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HITLSIM_LOG", "warn")).init();
    let args = Args::parse();
    match execute(args.cmd) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
