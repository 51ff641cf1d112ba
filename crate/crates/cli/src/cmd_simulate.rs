//! `etas simulate`: forward simulation of one synthetic catalog.

use etas::simulate::{
    make_synthetic_phi, simulate_catalog, write_branching_csv, SimDensity, SimulationSpec,
};
use etas::{BackgroundDensity, EtasParams};

use crate::common::{out_dir, region};
use crate::config::RunConfig;
use crate::CliError;

pub fn run(mut cfg: RunConfig) -> Result<(), CliError> {
    let out = out_dir(&mut cfg)?;
    let seed = cfg.u64_or("seed", 0)?;
    let reg = region(&mut cfg)?;
    let t_end = cfg.require_f64("t_end")?;
    let m0 = cfg.require_f64("m0")?;

    let params = EtasParams::new(
        cfg.require_f64("mu_bar")?,
        cfg.require_f64("k_bar")?,
        cfg.require_f64("alpha")?,
        cfg.require_f64("c")?,
        cfg.require_f64("p")?,
        cfg.require_f64("d")?,
        cfg.require_f64("q")?,
        cfg.f64_or("beta_gr", 10f64.ln())?,
    )?;

    let phi_name = cfg.str_or("phi", "uniform");
    let phi = match phi_name.as_str() {
        "uniform" => SimDensity::Background(BackgroundDensity::uniform(reg)),
        name @ ("phi1" | "phi2" | "phi3") => make_synthetic_phi(name)?,
        other => {
            return Err(CliError::config(format!(
                "unknown background density `{other}`; valid names: uniform, phi1, phi2, phi3"
            )))
        }
    };

    let mut spec = SimulationSpec::new(params, phi, reg, t_end, m0, seed);
    spec.max_events = cfg.usize_or("max_events", etas::simulate::DEFAULT_EVENT_CAP)?;
    cfg.reject_unknown()?;

    let sim = simulate_catalog(&spec)?;
    sim.catalog.write_csv(out.join("catalog.csv"))?;
    write_branching_csv(&sim.true_branching, out.join("branching.csv"))?;
    cfg.write_echo(&out)?;
    println!(
        "simulated {} events ({} immigrants) over [0, {t_end}] into {}",
        sim.catalog.len(),
        sim.true_branching.n_immigrants(),
        out.display()
    );
    Ok(())
}
