//! `etas evaluate`: DIC and out-of-sample posterior-predictive scores for
//! one or more fitted chains on a common train/test split, plus the model
//! comparison table.

use std::fs;
use std::path::{Path, PathBuf};

use etas::evaluate::{compare_models, oos_loglik, EvaluationReport};

use crate::common::{catalog, out_dir};
use crate::config::RunConfig;
use crate::fitdir::FitDir;
use crate::CliError;

pub fn run(mut cfg: RunConfig) -> Result<(), CliError> {
    let out = out_dir(&mut cfg)?;
    let full = catalog(&mut cfg)?;
    let t_split = cfg.require_f64("t_split")?;
    let every = cfg.usize_or("oos_every", 50)?;
    let models_raw = cfg.require_str("models")?;
    cfg.reject_unknown()?;

    let (train, test) = full.split(t_split)?;

    let mut reports: Vec<EvaluationReport> = Vec::new();
    for item in models_raw.split(',') {
        let item = item.trim();
        let Some((name, dir)) = item.split_once('=') else {
            return Err(CliError::config(format!(
                "models entries must be name=fit_dir, found `{item}`"
            )));
        };
        let fit = FitDir::open(Path::new(dir.trim()))?;
        let chain = fit.load_chain(&train)?;
        let report = oos_loglik(name.trim(), &chain, &train, &test, every)?;
        write_report_csv(&report, &out.join(format!("report_{}.csv", name.trim())))?;
        println!(
            "{}: DIC {:.3}, p_DIC_alt {:.3}, oos mean {:.3}, oos max {:.3} ({} evaluations)",
            report.model,
            report.dic,
            report.p_dic_alt,
            report.oos_mean_loglik,
            report.oos_max_loglik,
            report.per_sample.len()
        );
        reports.push(report);
    }

    let summary_path = out.join("summary.txt");
    let summary = if reports.len() >= 2 {
        let comparison = compare_models(&reports)?;
        format!("{comparison}")
    } else {
        let r = &reports[0];
        format!(
            "{:<12} {:>14} {:>14} {:>14} {:>14}\n{:<12} {:>14.4} {:>14.4} {:>14.4} {:>14.4}\n",
            "model", "DIC", "p_DIC_alt", "oos_mean", "oos_max",
            r.model, r.dic, r.p_dic_alt, r.oos_mean_loglik, r.oos_max_loglik
        )
    };
    fs::write(&summary_path, &summary)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", summary_path.display())))?;
    print!("{summary}");
    cfg.write_echo(&out)?;
    Ok(())
}

fn write_report_csv(report: &EvaluationReport, path: &PathBuf) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
    w.write_record(["sample_index", "oos_loglik"])
        .map_err(|e| CliError::io(e.to_string()))?;
    for (index, value) in &report.per_sample {
        w.write_record([index.to_string(), format!("{value}")])
            .map_err(|e| CliError::io(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::io(e.to_string()))?;
    Ok(())
}
