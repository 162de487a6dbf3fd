//! Temporary calibration probes; not part of the suite.

use std::time::Instant;

use farmhazard::sim::{self, BetaSpec, Setting, SimConfig, ValueLaw};
use farmhazard::solver::{CdProblem, FitOptions, PreparedDesign};
use farmhazard::tuning::{cv_select_lambda, cv_select_refit, fit_tuned, CvConfig, CvRule};
use farmhazard::{FailureIndex, Method, SurvivalDataset};
use rand::RngCore;

fn c1_config() -> SimConfig {
    SimConfig {
        setting: Setting::Factor,
        n: 200,
        p: 500,
        k: 3,
        beta: BetaSpec {
            support_size: 4,
            law: ValueLaw::Fixed { value: 2.0 },
        },
        censor_rate_target: 0.3,
        replications: 1,
        seed: 424242,
    }
}

fn equi_config(rho: f64) -> SimConfig {
    SimConfig {
        setting: Setting::Equicorrelated { rho },
        n: 200,
        p: 1000,
        k: 0,
        beta: BetaSpec {
            support_size: 4,
            law: ValueLaw::Uniform { lo: 2.0, hi: 5.0 },
        },
        censor_rate_target: 0.3,
        replications: 1,
        seed: 424242,
    }
}

#[test]
#[ignore]
fn probe_calibrate_rules() {
    use farmhazard::metrics::sign_consistency;
    let rules: Vec<(&str, CvRule)> = vec![
        ("max", CvRule::Max),
        ("1se", CvRule::OneSe),
        ("g2.5", CvRule::Sparse { gamma: 2.5 }),
        ("g5", CvRule::Sparse { gamma: 5.0 }),
        ("g8", CvRule::Sparse { gamma: 8.0 }),
        ("g12", CvRule::Sparse { gamma: 12.0 }),
        ("g20", CvRule::Sparse { gamma: 20.0 }),
    ];
    let reps = 20usize;
    for (label, config) in [
        ("factor", c1_config()),
        ("rho0.0", equi_config(0.0)),
        ("rho0.8", equi_config(0.8)),
    ] {
        // method x rule: (sign hits, total size)
        let methods = [Method::Lasso, Method::FarmhazardL, Method::FarmhazardS];
        let mut hits = vec![vec![0usize; rules.len()]; methods.len()];
        let mut sizes = vec![vec![0usize; rules.len()]; methods.len()];
        let t0 = Instant::now();
        for rep in 0..reps {
            let mut rng = sim::rep_rng(config.seed, rep);
            let beta_star = sim::gen_beta(&config.beta, config.p, &mut rng).unwrap();
            let x = sim::gen_design(&config, &mut rng).unwrap();
            let (times, events) =
                sim::gen_survival(x.view(), beta_star.view(), 0.3, &mut rng).unwrap();
            let fold_seed = rng.next_u64();
            let dataset = SurvivalDataset::new(times, events, x, None).unwrap();
            let index = FailureIndex::build(&dataset).unwrap();
            let raw = PreparedDesign::build(dataset.covariates().view(), false, None).unwrap();
            let aug = PreparedDesign::build(dataset.covariates().view(), true, None).unwrap();
            let raw_problem = CdProblem::new(raw.design.view(), &index).unwrap();
            let aug_problem = CdProblem::new(aug.design.view(), &index).unwrap();
            let mk_config = |rule: CvRule| CvConfig {
                k_folds: 10,
                n_lambda: 100,
                seed: fold_seed,
                rule,
                options: FitOptions::default(),
            };
            let lasso_cv =
                cv_select_lambda(Method::Lasso, &dataset, &raw, &index, &mk_config(CvRule::Max))
                    .unwrap();
            let fl_cv = cv_select_lambda(
                Method::FarmhazardL,
                &dataset,
                &aug,
                &index,
                &mk_config(CvRule::Max),
            )
            .unwrap();
            for (ri, &(_, rule)) in rules.iter().enumerate() {
                for (mi, &method) in methods.iter().enumerate() {
                    let (prepared, problem, cv) = match method {
                        Method::Lasso => (&raw, &raw_problem, lasso_cv.clone()),
                        Method::FarmhazardL => (&aug, &aug_problem, fl_cv.clone()),
                        Method::FarmhazardS => {
                            let fs_cv = cv_select_refit(
                                Method::FarmhazardS,
                                &dataset,
                                &aug,
                                &index,
                                &mk_config(rule),
                                &fl_cv,
                            )
                            .unwrap();
                            (&aug, &aug_problem, fs_cv)
                        }
                        _ => unreachable!(),
                    };
                    let fit = fit_tuned(
                        method,
                        prepared,
                        problem,
                        &index,
                        &cv,
                        rule,
                        &FitOptions::default(),
                    )
                    .unwrap();
                    let ok = sign_consistency(
                        fit.beta.as_slice().unwrap(),
                        beta_star.as_slice().unwrap(),
                    )
                    .unwrap();
                    hits[mi][ri] += ok as usize;
                    sizes[mi][ri] += fit.support.len();
                }
            }
        }
        for (mi, method) in methods.iter().enumerate() {
            let cells: Vec<String> = rules
                .iter()
                .enumerate()
                .map(|(ri, (rl, _))| {
                    format!(
                        "{rl} {}/{reps} sz {:.2}",
                        hits[mi][ri],
                        sizes[mi][ri] as f64 / reps as f64
                    )
                })
                .collect();
            eprintln!("{label} {method}: {}", cells.join(" | "));
        }
        eprintln!("{label} elapsed {:?}", t0.elapsed());
    }
}
