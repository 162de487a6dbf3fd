//! `farmhazard cross-validate`: the full selection curve for one method.

use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use farmhazard::data::FailureIndex;
use farmhazard::solver::{FitOptions, PreparedDesign};
use farmhazard::tuning::{cv_select_lambda, CvConfig, CvRule};
use farmhazard::Method;

use crate::common::{fmt_float, load_dataset, out_path, parse_rule, CliResult};
use crate::manifest::RunManifest;
use crate::DataArgs;

#[derive(Args)]
pub struct CvArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    method: Method,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 100)]
    n_lambda: usize,
    /// Selection rule: max, one-se or sparse.
    #[arg(long, default_value = "sparse")]
    rule: String,
    #[arg(long, default_value_t = farmhazard::sim::DEFAULT_SPARSE_GAMMA)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(serde::Serialize)]
struct CvReport {
    method: String,
    k_folds: usize,
    lambda_opt: f64,
    lambda_1se: f64,
    lambda_sparse: f64,
    /// The rule's pick, the lambda `fit --rule` would use.
    lambda_selected: f64,
    rule: CvRule,
    base_lambda: Option<f64>,
}

pub fn run(args: &CvArgs) -> CliResult {
    let rule = parse_rule(&args.rule, args.gamma)?;
    let mut manifest = RunManifest::start(
        "cross-validate",
        serde_json::json!({
            "csv": args.data.csv.display().to_string(),
            "method": args.method.name(),
            "k": args.k,
            "folds": args.folds,
            "n_lambda": args.n_lambda,
            "rule": rule,
        }),
        args.seed,
    );
    manifest.add_input(&args.data.csv)?;

    let dataset = load_dataset(&args.data)?;
    let index = FailureIndex::build(&dataset)?;
    let prepared = PreparedDesign::build(
        dataset.covariates().view(),
        args.method.is_factor_augmented(),
        args.k,
    )?;
    let config = CvConfig {
        k_folds: args.folds,
        n_lambda: args.n_lambda,
        seed: args.seed,
        rule,
        options: FitOptions::default(),
    };
    let cv = cv_select_lambda(args.method, &dataset, &prepared, &index, &config)?;

    let mut curve = std::io::BufWriter::new(std::fs::File::create(out_path(
        &args.out,
        "cv_curve.csv",
    )?)?);
    writeln!(curve, "lambda,score,score_se,mean_df")?;
    for i in 0..cv.grid.len() {
        writeln!(
            curve,
            "{},{},{},{}",
            fmt_float(cv.grid[i]),
            fmt_float(cv.scores[i]),
            fmt_float(cv.scores_se[i]),
            fmt_float(cv.mean_df[i])
        )?;
    }
    curve.flush()?;

    let report = CvReport {
        method: args.method.name().to_string(),
        k_folds: args.folds,
        lambda_opt: cv.lambda_opt,
        lambda_1se: cv.lambda_1se,
        lambda_sparse: cv.lambda_sparse(args.gamma),
        lambda_selected: cv.select(rule),
        rule,
        base_lambda: cv.base_lambda,
    };
    let json = serde_json::to_string_pretty(&report)?;
    std::fs::write(out_path(&args.out, "cv.json")?, json + "\n")?;
    manifest.finish(&args.out)?;
    Ok(())
}
