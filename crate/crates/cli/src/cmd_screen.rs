//! `farmhazard screen`: ranked marginal screening with a selected cut.

use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use farmhazard::screening::{screen, sis_baseline, Selector, ScreeningResult};

use crate::common::{fmt_float, load_dataset, out_path, CliError, CliResult};
use crate::manifest::RunManifest;
use crate::DataArgs;

#[derive(Args)]
pub struct ScreenArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Factor count; estimated from the correlation spectrum when omitted.
    #[arg(long)]
    k: Option<usize>,
    /// Keep the d largest marginal magnitudes.
    #[arg(long)]
    top_d: Option<usize>,
    /// Keep every covariate with magnitude at least this threshold.
    #[arg(long)]
    threshold: Option<f64>,
    /// Baseline switch: `sis` runs plain univariate screening instead of
    /// the factor-adjusted procedure.
    #[arg(long)]
    baseline: Option<String>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

pub fn run(args: &ScreenArgs) -> CliResult {
    let selector = match (args.top_d, args.threshold) {
        (Some(d), None) => Selector::TopD(d),
        (None, Some(t)) => {
            if !t.is_finite() || t < 0.0 {
                return Err(CliError::input(format!(
                    "threshold must be nonnegative and finite, got {t}"
                )));
            }
            Selector::Threshold(t)
        }
        (None, None) => {
            return Err(CliError::input(
                "screening needs --top-d or --threshold".to_string(),
            ))
        }
        (Some(_), Some(_)) => {
            return Err(CliError::input(
                "--top-d and --threshold are mutually exclusive".to_string(),
            ))
        }
    };
    let baseline = match args.baseline.as_deref() {
        None => false,
        Some("sis") => true,
        Some(other) => {
            return Err(CliError::input(format!(
                "unknown baseline {other:?}; the only baseline is sis"
            )))
        }
    };

    let mut manifest = RunManifest::start(
        "screen",
        serde_json::json!({
            "csv": args.data.csv.display().to_string(),
            "time": args.data.time,
            "status": args.data.status,
            "k": args.k,
            "top_d": args.top_d,
            "threshold": args.threshold,
            "baseline": baseline,
        }),
        0,
    );
    manifest.add_input(&args.data.csv)?;

    let dataset = load_dataset(&args.data)?;
    let result = if baseline {
        sis_baseline(&dataset, selector)?
    } else {
        screen(&dataset, args.k, selector)?
    };
    write_files(&args.out, &dataset, &result)?;
    manifest.finish(&args.out)?;
    eprintln!(
        "farmhazard: screened {} covariates with k = {}, selected {}",
        dataset.d(),
        result.k,
        result.selected.len()
    );
    Ok(())
}

fn write_files(
    out: &std::path::Path,
    dataset: &farmhazard::SurvivalDataset,
    result: &ScreeningResult,
) -> CliResult {
    let mut ranking = std::io::BufWriter::new(std::fs::File::create(out_path(
        out,
        "ranking.csv",
    )?)?);
    writeln!(ranking, "rank,column,name,magnitude")?;
    for (rank, &j) in result.ranking.iter().enumerate() {
        writeln!(
            ranking,
            "{},{},{},{}",
            rank + 1,
            j,
            dataset.names()[j],
            fmt_float(result.beta_marginal[j])
        )?;
    }
    ranking.flush()?;

    let mut selected = std::io::BufWriter::new(std::fs::File::create(out_path(
        out,
        "selected.csv",
    )?)?);
    writeln!(selected, "column,name,magnitude")?;
    for &j in &result.selected {
        writeln!(
            selected,
            "{},{},{}",
            j,
            dataset.names()[j],
            fmt_float(result.beta_marginal[j])
        )?;
    }
    selected.flush()?;
    Ok(())
}
