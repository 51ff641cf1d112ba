//! Configuration fragments shared by several subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use etas::catalog::parse_datetime;
use etas::gibbs::{GammaPrior, PriorSpec};
use etas::{load_catalog, Catalog, Region};

use crate::config::RunConfig;
use crate::CliError;

pub fn out_dir(cfg: &mut RunConfig) -> Result<PathBuf, CliError> {
    let out = PathBuf::from(cfg.require_str("out")?);
    fs::create_dir_all(&out)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", out.display())))?;
    Ok(out)
}

pub fn region(cfg: &mut RunConfig) -> Result<Region, CliError> {
    let x_min = cfg.f64_or("region_x_min", 0.0)?;
    let x_max = cfg.f64_or("region_x_max", 4.0)?;
    let y_min = cfg.f64_or("region_y_min", 0.0)?;
    let y_max = cfg.f64_or("region_y_max", 6.0)?;
    Ok(Region::new(x_min, x_max, y_min, y_max)?)
}

/// Loads the catalog named by `catalog`, with the completeness magnitude,
/// region window, optional ISO origin and optional window length.
pub fn catalog(cfg: &mut RunConfig) -> Result<Catalog, CliError> {
    let path = cfg.require_str("catalog")?;
    let m0 = cfg.require_f64("m0")?;
    let reg = region(cfg)?;
    let origin = match cfg.opt_str("origin") {
        Some(raw) => Some(
            parse_datetime(&raw)
                .ok_or_else(|| CliError::config(format!("origin `{raw}` is not an ISO date")))?,
        ),
        None => None,
    };
    let t_end = cfg.opt_f64("t_end")?;
    if !Path::new(&path).exists() {
        return Err(CliError::io(format!("catalog file `{path}` does not exist")));
    }
    Ok(load_catalog(&path, m0, reg, origin, t_end)?)
}

pub fn prior(cfg: &mut RunConfig) -> Result<PriorSpec, CliError> {
    Ok(PriorSpec {
        k_bar: (0.0, cfg.f64_or("k_bar_max", 30.0)?),
        alpha: (0.0, cfg.f64_or("alpha_max", 10.0)?),
        c: (0.0, cfg.f64_or("c_max", 10.0)?),
        p: (1.0, cfg.f64_or("p_max", 30.0)?),
        d: (0.0, cfg.f64_or("d_max", f64::INFINITY)?),
        q: (1.0, cfg.f64_or("q_max", f64::INFINITY)?),
        mu: GammaPrior {
            shape: cfg.f64_or("mu_prior_shape", 0.1)?,
            rate: cfg.f64_or("mu_prior_rate", 0.1)?,
        },
        enforce_stability: cfg.bool_or("enforce_stability", true)?,
    })
}
