//! `radiomics`: batch commands for feature extraction, cross-validated
//! elastic-net evaluation, ranking and phantom generation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use radiomics_core::cohort::{extract_cohort, Manifest, PatientFailure};
use radiomics_core::elasticnet::SolverOptions;
use radiomics_core::evaluation::{
    cv_evaluate, rank_cv, rank_features, write_outputs, write_ranking, CvConfig, CvRecord, Normalization,
};
use radiomics_core::matrix::{FeatureMatrix, FeatureProfile, PAPER_PROFILE};
use radiomics_core::synth::{generate_phantom_cohort, EffectSize, EffectTable, PhantomConfig};

const WORKERS_ENV: &str = "RADIOMICS_WORKERS";
const MAX_FAILED_FRACTION: f64 = 0.2;

#[derive(Parser, Debug)]
#[command(
    name = "radiomics",
    version,
    about = "Lesion feature extraction and elastic-net evaluation"
)]
struct Cli {
    /// Worker threads for extraction and cross-validation (default: all cores).
    #[arg(long, global = true, env = WORKERS_ENV)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract the feature matrix of every patient in a manifest.
    Extract {
        /// manifest.csv with patient_id, label or gleason, and image/outline paths.
        manifest: PathBuf,
        #[arg(long, default_value = PAPER_PROFILE)]
        profile: String,
        /// Output directory for features.csv and extraction_report.json.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Cross-validate the elastic-net classifier on a feature CSV.
    TrainEval {
        /// features.csv as written by `extract` (a gleason column may replace label).
        features: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Re-derive the feature ranking from a saved cv_paths.json.
    Rank {
        paths: PathBuf,
        /// Lambda index to rank at (default: the selected best lambda).
        #[arg(long)]
        lambda_index: Option<usize>,
        #[arg(long, default_value = "ranking.csv")]
        out: PathBuf,
        /// Number of top features to print.
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Write a synthetic phantom cohort with a manifest.
    Synth {
        #[arg(long, default_value_t = 20)]
        patients: usize,
        #[arg(long, value_enum, default_value_t = Effect::Large)]
        effect: Effect,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "phantom")]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Number of cross-validation folds.
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    n_lambda: usize,
    /// Smallest lambda as a fraction of lambda_max.
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    /// Z-normalize the whole matrix once before splitting into folds.
    #[arg(long)]
    paper_normalization: bool,
}

impl RunArgs {
    fn config(&self) -> CvConfig {
        CvConfig {
            alpha: self.alpha,
            k: self.k,
            seed: self.seed,
            n_lambda: self.n_lambda,
            eps: self.eps,
            normalization: if self.paper_normalization {
                Normalization::Paper
            } else {
                Normalization::FoldLocal
            },
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Effect {
    None,
    Small,
    Large,
}

impl From<Effect> for EffectSize {
    fn from(e: Effect) -> Self {
        match e {
            Effect::None => EffectSize::None,
            Effect::Small => EffectSize::Small,
            Effect::Large => EffectSize::Large,
        }
    }
}

#[derive(Serialize)]
struct ExtractionReport<'a> {
    profile: &'a str,
    n_patients: usize,
    n_extracted: usize,
    n_failed: usize,
    n_columns: usize,
    seconds: f64,
    failures: &'a [PatientFailure],
    flag_counts: std::collections::BTreeMap<String, usize>,
}

fn extract(manifest: &Path, profile: &str, out: &Path) -> Result<bool> {
    let profile = FeatureProfile::by_name(profile)?;
    let manifest = Manifest::read(manifest).with_context(|| format!("reading {}", manifest.display()))?;
    std::fs::create_dir_all(out)?;
    let start = Instant::now();
    let result = extract_cohort(&manifest, &profile);
    let seconds = start.elapsed().as_secs_f64();

    let failed = result.failed_patients();
    let n_extracted = result.matrix.as_ref().map_or(0, FeatureMatrix::n_rows);
    if let Some(m) = &result.matrix {
        m.write_csv_file(&out.join("features.csv"))?;
    }
    let report = ExtractionReport {
        profile: profile.name(),
        n_patients: result.n_patients,
        n_extracted,
        n_failed: failed,
        n_columns: result.matrix.as_ref().map_or(0, FeatureMatrix::n_cols),
        seconds,
        failures: &result.failures,
        flag_counts: result.flag_counts(),
    };
    radiomics_core::evaluation::write_json(&out.join("extraction_report.json"), &report)?;

    for f in &result.failures {
        let seq = f.sequence.map(|s| format!(" {s}")).unwrap_or_default();
        eprintln!("failed: {}{seq}: {}", f.patient_id, f.error);
    }
    println!(
        "extracted {n_extracted}/{} patients in {seconds:.1} s -> {}",
        result.n_patients,
        out.join("features.csv").display()
    );
    let too_many = result.matrix.is_none() || failed as f64 > MAX_FAILED_FRACTION * result.n_patients as f64;
    if too_many {
        eprintln!("error: {failed} of {} patients failed", result.n_patients);
    }
    Ok(!too_many)
}

fn train_eval(features: &Path, run: &RunArgs, out: &Path) -> Result<()> {
    let m = FeatureMatrix::read_csv_file(features).with_context(|| format!("reading {}", features.display()))?;
    let cv = cv_evaluate(&m, &run.config())?;
    let ranking = rank_cv(&cv)?;
    let summary = write_outputs(out, &cv, &ranking)?;
    println!("AUC          {:.4}", summary.auc);
    println!("sensitivity  {:.4}", summary.sensitivity);
    println!("specificity  {:.4}", summary.specificity);
    println!(
        "nonzero      {} (full-data fit), {} (union over folds)",
        summary.nonzero_count, summary.nonzero_union_folds
    );
    println!(
        "best lambda  {:.6} (index {})",
        summary.best_lambda, summary.best_lambda_index
    );
    for flag in &summary.flags {
        println!("flag         {flag}");
    }
    Ok(())
}

fn rank(paths: &Path, lambda_index: Option<usize>, out: &Path, top: usize) -> Result<()> {
    let text = std::fs::read_to_string(paths).with_context(|| format!("reading {}", paths.display()))?;
    let record: CvRecord = serde_json::from_str(&text).with_context(|| format!("parsing {}", paths.display()))?;
    let index = lambda_index.unwrap_or(record.best_index);
    let ranking = rank_features(&record.fold_coefficients(index)?, &record.feature_names)?;
    write_ranking(out, &ranking)?;
    for e in ranking.digest(top) {
        println!("{:>4}  {:<40} {:+.6}  {:.1}", e.rank, e.name, e.mean_coef, e.frequency);
    }
    Ok(())
}

fn synth(patients: usize, effect: Effect, seed: u64, out: &Path) -> Result<()> {
    let cfg = PhantomConfig {
        n_patients: patients,
        effects: EffectTable::preset(effect.into()),
        seed,
        ..PhantomConfig::default()
    };
    let manifest = generate_phantom_cohort(&cfg, out)?;
    println!("wrote {} patients to {}", manifest.rows.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.workers {
        if n == 0 {
            bail!("{WORKERS_ENV} must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Extract { manifest, profile, out } => extract(&manifest, &profile, &out),
        Command::TrainEval { features, run, out } => train_eval(&features, &run, &out).map(|_| true),
        Command::Rank {
            paths,
            lambda_index,
            out,
            top,
        } => rank(&paths, lambda_index, &out, top).map(|_| true),
        Command::Synth {
            patients,
            effect,
            seed,
            out,
        } => synth(patients, effect, seed, &out).map(|_| true),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
