use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crossmoments::covmodels::{CovarianceModel1D, Moment};
use crossmoments::field::IsotropicFieldModel;
use crossmoments::kacrice::{
    geman_classify, integrand_1d, length_second_moment_2d_to_1d, second_factorial_moment_1d, second_moment_2d_zero, GemanClass,
    MomentReport, RadialRow,
};
use crossmoments::simulate::run_ensemble;
use crossmoments::validation::{check_groups, run_validation, Scale, ValidationConfig};
use serde::Serialize;

use crate::config::{ExperimentConfig, Problem};
use crate::CliError;

/// Exit status of a command that ran to completion.
pub type Exit = i32;

fn class_exit(class: GemanClass) -> Exit {
    match class {
        GemanClass::Converges => 0,
        GemanClass::Inconclusive => 3,
        GemanClass::Diverges => 4,
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map(|s| s + "\n").map_err(|e| CliError::Run(e.to_string()))
}

fn out_file(dir: &Option<PathBuf>, name: &str) -> Result<Option<PathBuf>, CliError> {
    match dir {
        Some(d) => {
            fs::create_dir_all(d).map_err(|e| CliError::Run(format!("{}: {e}", d.display())))?;
            Ok(Some(d.join(name)))
        }
        None => Ok(None),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Run(format!("{}: {e}", path.display())))
}

fn emit(json: bool, machine: &str, human: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(if json { machine } else { human }.as_bytes());
}

#[derive(Serialize)]
struct GemanOutput<'a> {
    command: &'static str,
    config: &'a ExperimentConfig,
    report: crossmoments::kacrice::GemanReport,
}

pub fn geman(cfg: &ExperimentConfig, json: bool) -> Result<Exit, CliError> {
    let model = CovarianceModel1D::from_spec(cfg.model()?)?;
    let q = &cfg.quadrature.one_d;
    let report = geman_classify(&model, &q.grid, &q.classifier)?;
    let exit = class_exit(report.class);
    let mut human = format!(
        "class {:?} (sigma2 form {:?}, lambda2 + r'' form {:?}, agree {})\nalpha {}\n{:>12} {:>14} {:>16}\n",
        report.class,
        report.sigma2_form.class,
        report.lambda_form.class,
        report.forms_agree,
        report.sigma2_form.alpha.map_or("-".into(), |a| format!("{a:.4}")),
        "tau",
        "sigma2",
        "lambda2+r''"
    );
    for row in &report.table {
        human.push_str(&format!("{:>12.4e} {:>14.6e} {:>16.6e}\n", row.tau, row.sigma2, row.lambda2_plus_r2));
    }
    let machine = to_json(&GemanOutput { command: "geman", config: cfg, report })?;
    if let Some(p) = out_file(&cfg.output.dir, "geman.json")? {
        write_file(&p, machine.as_bytes())?;
    }
    emit(json, &machine, &human);
    Ok(exit)
}

#[derive(Serialize)]
struct LevelMoments {
    level: Vec<f64>,
    #[serde(flatten)]
    report: MomentReport,
}

#[derive(Serialize)]
struct MomentsOutput<'a> {
    command: &'static str,
    config: &'a ExperimentConfig,
    reports: Vec<LevelMoments>,
}

/// Points of the 1D integrand trace per level.
const TRACE_POINTS: usize = 200;

fn radial_row_csv(li: usize, row: &RadialRow) -> String {
    format!(
        "{li},{},{},{},{},{},{},{},{}\n",
        row.r,
        row.kernel * row.density * row.a,
        row.kernel,
        row.density,
        row.a,
        row.a_se,
        row.sigma2_max,
        row.cs_bound
    )
}

fn moment_str(m: Moment) -> String {
    m.finite().map_or("+inf".into(), |v| format!("{v:.6e}"))
}

pub fn moments(cfg: &ExperimentConfig, json: bool) -> Result<Exit, CliError> {
    let problem = cfg.problem()?;
    let levels = cfg.levels(&problem)?;
    let mut reports = Vec::new();
    let mut csv = String::new();
    match &problem {
        Problem::Crossings { model, t_len } => {
            let model = CovarianceModel1D::from_spec(model)?;
            csv.push_str("level_index,tau,value,mu1,sigma2,correlation,abs_moment,density\n");
            for (li, u) in levels.iter().enumerate() {
                let (report, _) = second_factorial_moment_1d(&model, u[0], *t_len, &cfg.quadrature.one_d)?;
                for k in 0..TRACE_POINTS {
                    let tau = t_len * 10f64.powf(-6.0 + 6.0 * k as f64 / (TRACE_POINTS - 1) as f64);
                    let p = integrand_1d(&model, u[0], *t_len, tau)?;
                    let corr = p.correlation.map_or(String::new(), |c| c.to_string());
                    csv.push_str(&format!(
                        "{li},{},{},{},{},{corr},{},{}\n",
                        p.tau,
                        p.value,
                        p.mu1 + 0.0,
                        p.sigma2,
                        p.abs_moment,
                        p.density
                    ));
                }
                reports.push(LevelMoments { level: u.clone(), report });
            }
        }
        Problem::Roots { coords, rect } => {
            let field = IsotropicFieldModel::new(coords.clone())?;
            csv.push_str("level_index,r,value,kernel,density,a,a_se,sigma2_max,cs_bound\n");
            for (li, u) in levels.iter().enumerate() {
                let r = second_moment_2d_zero(&field, u, rect, &cfg.quadrature.radial)?;
                r.radial.iter().for_each(|row| csv.push_str(&radial_row_csv(li, row)));
                reports.push(LevelMoments { level: u.clone(), report: r.report });
            }
        }
        Problem::Length { profile, rect } => {
            csv.push_str("level_index,r,value,kernel,density,a,a_se,sigma2_max,cs_bound\n");
            for (li, u) in levels.iter().enumerate() {
                let r = length_second_moment_2d_to_1d(profile, u[0], rect, &cfg.quadrature.radial)?;
                r.radial.iter().for_each(|row| csv.push_str(&radial_row_csv(li, row)));
                reports.push(LevelMoments { level: u.clone(), report: r.report });
            }
        }
    }
    let exit = reports.iter().map(|r| class_exit(r.report.geman.class)).max().unwrap_or(0);
    let mut human = String::new();
    for r in &reports {
        let m = &r.report;
        human.push_str(&format!(
            "u = {:?}: E[N] {:.6e}  E[N(N-1)] {}  E[N^2] {}  quadrature error {:.2e}  inner MC SE {:.2e}  class {:?}\n",
            r.level,
            m.mean,
            moment_str(m.second_factorial),
            moment_str(m.second_moment),
            m.quad_error,
            m.inner_mc_se,
            m.geman.class
        ));
    }
    let machine = to_json(&MomentsOutput { command: "moments", config: cfg, reports })?;
    if let Some(p) = out_file(&cfg.output.dir, "moments.json")? {
        write_file(&p, machine.as_bytes())?;
    }
    if let Some(p) = out_file(&cfg.output.dir, "integrand.csv")? {
        write_file(&p, csv.as_bytes())?;
    }
    emit(json, &machine, &human);
    Ok(exit)
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    command: &'static str,
    config: &'a ExperimentConfig,
    ensemble: &'a crossmoments::simulate::SimulationEnsemble,
}

pub fn simulate(cfg: &ExperimentConfig, json: bool) -> Result<Exit, CliError> {
    let problem = cfg.problem()?;
    let ens = run_ensemble(&cfg.ensemble(&problem)?)?;
    let mut human = format!("sampler {}\n", ens.sampler);
    for agg in &ens.aggregates {
        human.push_str(&format!("level {}\n", serde_json::to_string(&agg.level).unwrap_or_default()));
        for r in &agg.per_resolution {
            human.push_str(&format!(
                "  delta {:.4e}: mean {:.6} +- {:.6}  variance {:.6}  second factorial {:.6} +- {:.6}\n",
                r.delta, r.mean, r.mean_se, r.variance, r.second_factorial, r.second_factorial_se
            ));
        }
    }
    let machine = to_json(&SimulateOutput { command: "simulate", config: cfg, ensemble: &ens })?;
    if let Some(p) = out_file(&cfg.output.dir, "ensemble.csv")? {
        let mut bytes = Vec::new();
        ens.write_csv(&mut bytes)?;
        write_file(&p, &bytes)?;
    }
    if let Some(p) = out_file(&cfg.output.dir, "aggregate.json")? {
        write_file(&p, machine.as_bytes())?;
    }
    emit(json, &machine, &human);
    Ok(0)
}

pub fn validate(vcfg: &ValidationConfig, out: &Option<PathBuf>, json: bool) -> Result<Exit, CliError> {
    if let Some(f) = &vcfg.filter {
        let groups = check_groups();
        let known = groups.contains(&f.as_str()) || f.parse::<usize>().is_ok_and(|i| (1..=groups.len()).contains(&i));
        if !known {
            return Err(CliError::Config(format!(
                "filter: unknown check `{f}`, expected a number or one of {}",
                groups.join(", ")
            )));
        }
    }
    let report = run_validation(vcfg);
    let machine = to_json(&report)?;
    if let Some(p) = out_file(out, "validation.json")? {
        write_file(&p, machine.as_bytes())?;
    }
    let scale = match vcfg.scale {
        Scale::Desk => "desk",
        Scale::Full => "full",
    };
    emit(json, &machine, &format!("validation at {scale} size, seed {}\n{}", vcfg.seed, report.table()));
    Ok(if report.passed { 0 } else { 1 })
}
