//! `etas fit`: run the latent-branching Gibbs sampler on a catalog and
//! write the chain, the background-realization sidecar (Dirichlet-process
//! model) and a run log with acceptance diagnostics.

use std::fs;

use etas::background::DpConfig;
use etas::chain::{write_chain_csv, write_mixture_sidecar};
use etas::gibbs::{run_chain, BackgroundModel, SamplerConfig};
use etas::linalg2::{SymMat2, Vec2};

use crate::common::{catalog, out_dir, prior};
use crate::config::RunConfig;
use crate::CliError;

pub fn run(mut cfg: RunConfig) -> Result<(), CliError> {
    let out = out_dir(&mut cfg)?;
    let cat = catalog(&mut cfg)?;
    let prior_spec = prior(&mut cfg)?;

    let background = match cfg.str_or("background", "uniform").as_str() {
        "uniform" => BackgroundModel::Uniform,
        "kde" => BackgroundModel::Kde,
        "dp" => BackgroundModel::DirichletProcess,
        other => {
            return Err(CliError::config(format!(
                "unknown background model `{other}`; valid names: uniform, kde, dp"
            )))
        }
    };

    let kde_bandwidth = match (cfg.opt_f64("kde_bandwidth_xx")?, cfg.opt_f64("kde_bandwidth_yy")?)
    {
        (None, None) => None,
        (xx, yy) => {
            let xx = xx.ok_or_else(|| CliError::config("kde_bandwidth_xx missing"))?;
            let yy = yy.ok_or_else(|| CliError::config("kde_bandwidth_yy missing"))?;
            Some(SymMat2::diag(xx, yy))
        }
    };

    let sampler_config = SamplerConfig {
        n_samples: cfg.usize_or("n_samples", 12_000)?,
        thinning: cfg.usize_or("thinning", 1)?,
        burn_in: cfg.opt_usize("burn_in")?,
        branching_update_every: cfg.usize_or("branching_update_every", 50)?,
        proposal_sd: cfg.f64_or("proposal_sd", 0.1)?,
        seed: cfg.u64_or("seed", 0)?,
        background,
        fixed_gr_beta: cfg.opt_f64("fixed_beta_gr")?,
        kde_bandwidth,
        max_init_attempts: cfg.usize_or("max_init_attempts", 10_000)?,
    };

    let dp_config = if background == BackgroundModel::DirichletProcess {
        let mut dp = DpConfig::from_points(&cat.positions());
        dp.chi = cfg.f64_or("dp_chi", dp.chi)?;
        dp.niw_mean_precision = cfg.f64_or("dp_mean_precision", dp.niw_mean_precision)?;
        dp.niw_df = cfg.f64_or("dp_df", dp.niw_df)?;
        if let (Some(x), Some(y)) = (cfg.opt_f64("dp_mean_x")?, cfg.opt_f64("dp_mean_y")?) {
            dp.niw_mean = Vec2::new(x, y);
        }
        if let (Some(xx), Some(yy)) = (cfg.opt_f64("dp_scale_xx")?, cfg.opt_f64("dp_scale_yy")?) {
            dp.niw_scale = SymMat2::new(xx, cfg.f64_or("dp_scale_xy", 0.0)?, yy);
        }
        dp.truncation = cfg.usize_or("dp_truncation", dp.truncation)?;
        dp.crp_sweeps = cfg.usize_or("dp_crp_sweeps", dp.crp_sweeps)?;
        dp.update_concentration = cfg.bool_or("dp_update_concentration", true)?;
        Some(dp)
    } else {
        None
    };
    cfg.reject_unknown()?;

    let chain = run_chain(&cat, &sampler_config, &prior_spec, dp_config)?;

    write_chain_csv(&chain, out.join("chain.csv"))?;
    if background == BackgroundModel::DirichletProcess {
        write_mixture_sidecar(&chain, out.join("dp_phi.csv"))?;
    }

    let log = format!(
        "# fit diagnostics\n\
         n_events = {}\n\
         beta_gr = {}\n\
         accept_k_alpha = {:.4}\n\
         accept_c_p = {:.4}\n\
         accept_d_q = {:.4}\n\
         total_iterations = {}\n\
         floored_intensities = {}\n",
        cat.len(),
        chain.beta_gr,
        chain.accept_rate_k_alpha,
        chain.accept_rate_c_p,
        chain.accept_rate_d_q,
        chain.total_iterations,
        chain.floored_intensities,
    );
    let log_path = out.join("run_log.txt");
    fs::write(&log_path, log)
        .map_err(|e| CliError::io(format!("cannot write {}: {e}", log_path.display())))?;
    cfg.write_echo(&out)?;
    println!(
        "fitted {} events, {} retained samples into {}",
        cat.len(),
        chain.samples.len(),
        out.display()
    );
    Ok(())
}
