//! `farmhazard fit`: one procedure, one dataset, coefficient files out.

use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use farmhazard::data::FailureIndex;
use farmhazard::solver::{fit_prepared, CdProblem, FitOptions, PreparedDesign};
use farmhazard::tuning::{cv_select_lambda, fit_tuned, CvConfig};
use farmhazard::{Method, ProcedureFit};

use crate::common::{fmt_float, load_dataset, out_path, parse_rule, CliError, CliResult};
use crate::manifest::RunManifest;
use crate::DataArgs;

#[derive(Args)]
pub struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Procedure: lasso, enet, scad, farmhazard-l or farmhazard-s.
    #[arg(long)]
    method: Method,
    /// Factor count for the augmented methods; estimated from the
    /// correlation spectrum when omitted.
    #[arg(long)]
    k: Option<usize>,
    /// Penalty level in the standardized column space; overrides
    /// cross-validation.
    #[arg(long)]
    lambda: Option<f64>,
    /// Cross-validation folds used when no lambda is given.
    #[arg(long, default_value_t = 10)]
    cv: usize,
    #[arg(long, default_value_t = 100)]
    n_lambda: usize,
    /// Selection rule: max, one-se or sparse.
    #[arg(long, default_value = "sparse")]
    rule: String,
    /// Per-coordinate penalty of the sparse rule.
    #[arg(long, default_value_t = farmhazard::sim::DEFAULT_SPARSE_GAMMA)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(serde::Serialize)]
struct FitReport {
    method: String,
    lambda: f64,
    k: usize,
    support_size: usize,
    loss: f64,
    kkt_violation: f64,
    kkt_tol: f64,
    converged: bool,
    n_outer: usize,
    n_sweeps: usize,
    gamma: Vec<f64>,
    selected_by: String,
}

pub fn run(args: &FitArgs) -> CliResult {
    let rule = parse_rule(&args.rule, args.gamma)?;
    let mut manifest = RunManifest::start(
        "fit",
        serde_json::json!({
            "csv": args.data.csv.display().to_string(),
            "time": args.data.time,
            "status": args.data.status,
            "method": args.method.name(),
            "k": args.k,
            "lambda": args.lambda,
            "cv": args.cv,
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
    let problem = CdProblem::new(prepared.design.view(), &index)?;
    let options = FitOptions::default();

    let (fit, selected_by) = match args.lambda {
        Some(lambda) => {
            if !(lambda.is_finite() && lambda >= 0.0) {
                return Err(CliError::input(format!(
                    "lambda must be a nonnegative finite number, got {lambda}"
                )));
            }
            let fit = fit_prepared(args.method, &prepared, &problem, &index, lambda, &options)?;
            (fit, "flag".to_string())
        }
        None => {
            let config = CvConfig {
                k_folds: args.cv,
                n_lambda: args.n_lambda,
                seed: args.seed,
                rule,
                options,
            };
            let cv = cv_select_lambda(args.method, &dataset, &prepared, &index, &config)?;
            let fit = fit_tuned(args.method, &prepared, &problem, &index, &cv, rule, &options)?;
            (fit, format!("{}-fold cv", args.cv))
        }
    };

    write_coefficients(&args.out, &dataset, &fit)?;
    let report = FitReport {
        method: fit.method.name().to_string(),
        lambda: fit.lambda,
        k: fit.k,
        support_size: fit.support.len(),
        loss: fit.loss,
        kkt_violation: fit.kkt_violation,
        kkt_tol: fit.kkt_tol,
        converged: fit.converged,
        n_outer: fit.n_outer,
        n_sweeps: fit.n_sweeps,
        gamma: fit.gamma.to_vec(),
        selected_by,
    };
    let json = serde_json::to_string_pretty(&report)?;
    std::fs::write(out_path(&args.out, "fit.json")?, json + "\n")?;
    manifest.finish(&args.out)?;

    if !fit.converged {
        return Err(CliError::numerical(format!(
            "fit ran out of budget before certifying optimality \
             (KKT violation {:.3e} against tolerance {:.3e}); \
             outputs were written but carry converged = false",
            fit.kkt_violation, fit.kkt_tol
        )));
    }
    Ok(())
}

fn write_coefficients(
    out: &std::path::Path,
    dataset: &farmhazard::SurvivalDataset,
    fit: &ProcedureFit,
) -> CliResult {
    let path = out_path(out, "coefficients.csv")?;
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "name,coefficient")?;
    for &j in &fit.support {
        writeln!(file, "{},{}", dataset.names()[j], fmt_float(fit.beta[j]))?;
    }
    file.flush()?;
    Ok(())
}
