//! `etas forecast`: Monte Carlo continuation of a history catalog over a
//! future horizon, aggregated over posterior samples. Emits per-simulation
//! counts, exceedance probabilities per magnitude threshold, and a gridded
//! posterior-mean background density for plotting.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use etas::simulate::simulate_forecast;

use crate::common::{catalog, out_dir};
use crate::config::RunConfig;
use crate::fitdir::FitDir;
use crate::CliError;

pub fn run(mut cfg: RunConfig) -> Result<(), CliError> {
    let out = out_dir(&mut cfg)?;
    let history = catalog(&mut cfg)?;
    let fit_dir = cfg.require_str("fit")?;
    let horizon_end = cfg.require_f64("horizon_end")?;
    let sims_per_sample = cfg.usize_or("sims_per_sample", 1)?;
    let sample_every = cfg.usize_or("sample_every", 1)?;
    let seed = cfg.u64_or("seed", 0)?;
    let grid_nx = cfg.usize_or("grid_nx", 50)?;
    let grid_ny = cfg.usize_or("grid_ny", 50)?;
    let thresholds: Vec<f64> = match cfg.opt_str("mag_thresholds") {
        Some(raw) => raw
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::config(format!("bad magnitude threshold `{s}`")))
            })
            .collect::<Result<Vec<_>, _>>()?,
        None => vec![history.m0()],
    };
    cfg.reject_unknown()?;

    if horizon_end < history.t_end() {
        return Err(CliError::config(format!(
            "horizon_end {horizon_end} precedes the history window end {}",
            history.t_end()
        )));
    }
    let horizon = (history.t_end(), horizon_end);

    let fit = FitDir::open(Path::new(&fit_dir))?;
    let chain = fit.load_chain(&history)?;
    let picked: Vec<_> = chain.samples.iter().step_by(sample_every).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // per-simulation counts
    let counts_path = out.join("forecast_samples.csv");
    let mut w = csv::Writer::from_path(&counts_path)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", counts_path.display())))?;
    let mut header = vec!["sample_index".to_string(), "sim".to_string(), "n_events".to_string()];
    header.extend(thresholds.iter().map(|t| format!("n_ge_{t}")));
    w.write_record(&header).map_err(|e| CliError::io(e.to_string()))?;

    let total_sims = picked.len() * sims_per_sample;
    let mut ge_counts = vec![0usize; thresholds.len()]; // sims with >= 1 event above threshold
    let mut mean_counts = vec![0.0f64; thresholds.len()];
    let mut total_events = 0usize;
    for sample in &picked {
        for sim in 0..sims_per_sample {
            let events =
                simulate_forecast(&history, &sample.params, &sample.phi, horizon, &mut rng)?;
            total_events += events.len();
            let mut row = vec![
                sample.index.to_string(),
                sim.to_string(),
                events.len().to_string(),
            ];
            for (k, thr) in thresholds.iter().enumerate() {
                let n = events.iter().filter(|e| e.m >= *thr).count();
                ge_counts[k] += (n > 0) as usize;
                mean_counts[k] += n as f64;
                row.push(n.to_string());
            }
            w.write_record(&row).map_err(|e| CliError::io(e.to_string()))?;
        }
    }
    w.flush().map_err(|e| CliError::io(e.to_string()))?;

    // aggregate probabilities
    let prob_path = out.join("forecast_probabilities.csv");
    let mut w = csv::Writer::from_path(&prob_path)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", prob_path.display())))?;
    w.write_record(["magnitude_threshold", "prob_at_least_one", "mean_count"])
        .map_err(|e| CliError::io(e.to_string()))?;
    for (k, thr) in thresholds.iter().enumerate() {
        let prob = if total_sims == 0 {
            0.0
        } else {
            ge_counts[k] as f64 / total_sims as f64
        };
        let mean = if total_sims == 0 {
            0.0
        } else {
            mean_counts[k] / total_sims as f64
        };
        w.write_record([format!("{thr}"), format!("{prob}"), format!("{mean}")])
            .map_err(|e| CliError::io(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::io(e.to_string()))?;

    // posterior-mean background density on a plot grid over the region
    let grid_path = out.join("phi_mean_grid.csv");
    let mut w = csv::Writer::from_path(&grid_path)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", grid_path.display())))?;
    w.write_record(["x", "y", "density"])
        .map_err(|e| CliError::io(e.to_string()))?;
    let reg = history.region();
    for ix in 0..grid_nx {
        let x = reg.x_min + (ix as f64 + 0.5) * (reg.x_max - reg.x_min) / grid_nx as f64;
        for iy in 0..grid_ny {
            let y = reg.y_min + (iy as f64 + 0.5) * (reg.y_max - reg.y_min) / grid_ny as f64;
            let density: f64 = picked.iter().map(|s| s.phi.density(x, y)).sum::<f64>()
                / picked.len() as f64;
            w.write_record([format!("{x}"), format!("{y}"), format!("{density}")])
                .map_err(|e| CliError::io(e.to_string()))?;
        }
    }
    w.flush().map_err(|e| CliError::io(e.to_string()))?;

    cfg.write_echo(&out)?;
    println!(
        "forecast over [{}, {horizon_end}]: {} posterior samples x {} simulations, {:.2} events per simulation on average",
        history.t_end(),
        picked.len(),
        sims_per_sample,
        if total_sims == 0 { 0.0 } else { total_events as f64 / total_sims as f64 }
    );
    Ok(())
}
