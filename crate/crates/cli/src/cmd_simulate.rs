//! `farmhazard simulate`: replication experiments from presets or a config
//! file, with table rows and figure series written as CSV plus JSON.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use farmhazard::sim::{
    run_experiment, run_screening_experiment, BetaSpec, ExperimentReport, HarnessOptions,
    ScreeningReport, Setting, SimConfig, ValueLaw,
};
use farmhazard::Method;

use crate::common::{fmt_float, out_path, parse_rule, CliError, CliResult};
use crate::manifest::RunManifest;

#[derive(Args)]
pub struct SimulateArgs {
    /// Preset name: table1, table2, fig1, fig2 or fig3.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// JSON config file (see `SimulateSpec` in the docs) instead of a
    /// preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the replication count of the preset or config.
    #[arg(long)]
    replications: Option<usize>,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated method subset to run.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 100)]
    n_lambda: usize,
    /// Selection rule: max, one-se or sparse.
    #[arg(long, default_value = "sparse")]
    rule: String,
    #[arg(long, default_value_t = farmhazard::sim::DEFAULT_SPARSE_GAMMA)]
    gamma: f64,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// What one simulate run consists of: selection experiments over a list of
/// configs (one table or figure series), or a screening experiment.
#[derive(serde::Serialize, serde::Deserialize)]
pub struct SimulateSpec {
    /// Column label for the series axis in figure output ("p" or "rho");
    /// empty for single-config tables.
    #[serde(default)]
    pub axis: String,
    pub configs: Vec<SimConfig>,
    pub methods: Vec<Method>,
    /// When set, runs the screening comparison at this cut instead of the
    /// selection experiment (single config only).
    #[serde(default)]
    pub screening_top_d: Option<usize>,
}

pub fn run(args: &SimulateArgs) -> CliResult {
    let mut spec = resolve_spec(args)?;
    if let Some(reps) = args.replications {
        for config in &mut spec.configs {
            config.replications = reps;
        }
    }
    if let Some(seed) = args.seed {
        for config in &mut spec.configs {
            config.seed = seed;
        }
    }
    if let Some(methods) = &args.methods {
        spec.methods = methods.clone();
    }
    let rule = parse_rule(&args.rule, args.gamma)?;
    let options = HarnessOptions {
        cv_folds: args.folds,
        n_lambda: args.n_lambda,
        rule,
        ..HarnessOptions::default()
    };

    let mut manifest = RunManifest::start(
        "simulate",
        serde_json::to_value(&spec)?,
        spec.configs.first().map(|c| c.seed).unwrap_or(0),
    );
    if let Some(path) = &args.config {
        manifest.add_input(path)?;
    }

    match spec.screening_top_d {
        Some(top_d) => {
            let config = spec
                .configs
                .first()
                .ok_or_else(|| CliError::input("screening spec needs one config"))?;
            let report = run_screening_experiment(config, top_d)?;
            write_screening(&args.out, &report)?;
        }
        None => {
            let mut reports = Vec::with_capacity(spec.configs.len());
            for config in &spec.configs {
                reports.push(run_experiment(config, &spec.methods, &options)?);
            }
            write_selection(&args.out, &spec, &reports)?;
        }
    }
    manifest.finish(&args.out)?;
    Ok(())
}

fn resolve_spec(args: &SimulateArgs) -> CliResult<SimulateSpec> {
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)?;
        let spec: SimulateSpec = serde_json::from_str(&text)?;
        for config in &spec.configs {
            config.validate()?;
        }
        if spec.configs.is_empty() {
            return Err(CliError::input("config lists no experiments"));
        }
        return Ok(spec);
    }
    let name = args
        .preset
        .as_deref()
        .ok_or_else(|| CliError::input("simulate needs --preset or --config"))?;
    preset(name).ok_or_else(|| {
        CliError::input(format!(
            "unknown preset {name:?}; expected table1, table2, fig1, fig2 or fig3"
        ))
    })
}

/// The in-repo presets mirror the experiment grids the report tables and
/// figures are built from; override replications and seed from the flags.
fn preset(name: &str) -> Option<SimulateSpec> {
    let uniform = BetaSpec {
        support_size: 4,
        law: ValueLaw::Uniform { lo: 2.0, hi: 5.0 },
    };
    let base = SimConfig {
        n: 200,
        p: 500,
        k: 3,
        setting: Setting::Factor,
        beta: uniform,
        censor_rate_target: 0.3,
        replications: 200,
        seed: 1,
    };
    let spec = match name {
        "table1" => SimulateSpec {
            axis: String::new(),
            configs: vec![SimConfig {
                beta: BetaSpec {
                    support_size: 4,
                    law: ValueLaw::Fixed { value: 2.0 },
                },
                ..base
            }],
            methods: Method::ALL.to_vec(),
            screening_top_d: None,
        },
        "table2" => SimulateSpec {
            axis: "rho".to_string(),
            configs: [0.0, 0.4, 0.8]
                .into_iter()
                .map(|rho| SimConfig {
                    p: 1000,
                    k: 0,
                    setting: Setting::Equicorrelated { rho },
                    ..base
                })
                .collect(),
            methods: Method::ALL.to_vec(),
            screening_top_d: None,
        },
        "fig1" => SimulateSpec {
            axis: "p".to_string(),
            configs: [1000, 2000, 5000]
                .into_iter()
                .map(|p| SimConfig { p, ..base })
                .collect(),
            methods: Method::ALL.to_vec(),
            screening_top_d: None,
        },
        "fig2" => SimulateSpec {
            axis: "rho".to_string(),
            configs: [0.0, 0.2, 0.4, 0.6, 0.8]
                .into_iter()
                .map(|rho| SimConfig {
                    p: 2000,
                    k: 0,
                    setting: Setting::Equicorrelated { rho },
                    ..base
                })
                .collect(),
            methods: Method::ALL.to_vec(),
            screening_top_d: None,
        },
        "fig3" => SimulateSpec {
            axis: String::new(),
            configs: vec![SimConfig {
                p: 2000,
                setting: Setting::Screening,
                beta: BetaSpec {
                    support_size: 4,
                    law: ValueLaw::Fixed { value: 1.0 },
                },
                ..base
            }],
            methods: Vec::new(),
            screening_top_d: Some(50),
        },
        _ => return None,
    };
    Some(spec)
}

fn axis_value(config: &SimConfig, axis: &str) -> f64 {
    match axis {
        "p" => config.p as f64,
        "rho" => match config.setting {
            Setting::Equicorrelated { rho } => rho,
            _ => f64::NAN,
        },
        _ => f64::NAN,
    }
}

fn write_selection(
    out: &Path,
    spec: &SimulateSpec,
    reports: &[ExperimentReport],
) -> CliResult {
    let json = serde_json::to_string_pretty(&reports)?;
    std::fs::write(out_path(out, "report.json")?, json + "\n")?;

    let mut csv = std::io::BufWriter::new(std::fs::File::create(out_path(out, "report.csv")?)?);
    let axis = if spec.axis.is_empty() { "axis" } else { &spec.axis };
    writeln!(
        csv,
        "{axis},method,replications,failures,sign_rate,sign_lo,sign_hi,mean_size,size_2se,mean_c_index,c_index_2se,mean_k"
    )?;
    for (config, report) in spec.configs.iter().zip(reports) {
        let x = axis_value(config, &spec.axis);
        for row in &report.methods {
            writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                fmt_float(x),
                row.method.name(),
                row.replications_used,
                row.failures,
                fmt_float(row.sign_rate.rate),
                fmt_float(row.sign_rate.lo),
                fmt_float(row.sign_rate.hi),
                fmt_float(row.mean_model_size),
                fmt_float(row.model_size_2se),
                fmt_float(row.mean_c_index),
                fmt_float(row.c_index_2se),
                fmt_float(row.mean_factor_count),
            )?;
        }
    }
    csv.flush()?;
    Ok(())
}

fn write_screening(out: &Path, report: &ScreeningReport) -> CliResult {
    let json = serde_json::to_string_pretty(report)?;
    std::fs::write(out_path(out, "report.json")?, json + "\n")?;

    // Rate curves: one row per cut d.
    let mut rates = std::io::BufWriter::new(std::fs::File::create(out_path(out, "rates.csv")?)?);
    writeln!(
        rates,
        "d,sure_rate_augmented,sure_rate_baseline,fnr_augmented,fnr_baseline"
    )?;
    for d0 in 0..report.config.p {
        writeln!(
            rates,
            "{},{},{},{},{}",
            d0 + 1,
            fmt_float(report.augmented.sure_rate_by_d[d0]),
            fmt_float(report.baseline.sure_rate_by_d[d0]),
            fmt_float(report.augmented.fnr_by_d[d0]),
            fmt_float(report.baseline.fnr_by_d[d0]),
        )?;
    }
    rates.flush()?;

    let mut roc = std::io::BufWriter::new(std::fs::File::create(out_path(out, "roc.csv")?)?);
    writeln!(
        roc,
        "fpr_augmented,tpr_augmented,fpr_baseline,tpr_baseline"
    )?;
    for d0 in 0..report.config.p {
        let a = report.augmented.roc[d0];
        let b = report.baseline.roc[d0];
        writeln!(
            roc,
            "{},{},{},{}",
            fmt_float(a.0),
            fmt_float(a.1),
            fmt_float(b.0),
            fmt_float(b.1)
        )?;
    }
    roc.flush()?;
    Ok(())
}
