//! Reloading fit outputs (chain CSV, sidecar, run log, config echo) into an
//! in-memory chain for evaluation and forecasting.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use etas::background::fit_background_kde;
use etas::chain::{read_chain_csv, read_mixture_sidecar, Chain, PosteriorSample};
use etas::gibbs::BranchingVector;
use etas::linalg2::SymMat2;
use etas::{BackgroundDensity, Catalog, Region};

use crate::config::parse_kv_file;
use crate::CliError;

pub struct FitDir {
    pub background: String,
    pub beta_gr: f64,
    config: BTreeMap<String, String>,
    dir: std::path::PathBuf,
}

impl FitDir {
    pub fn open(dir: &Path) -> Result<Self, CliError> {
        let config = parse_kv_file(&dir.join("resolved_config.txt"))
            .map_err(|e| CliError::data(format!("{}: {}", dir.display(), e.message)))?;
        let log = parse_kv_file(&dir.join("run_log.txt"))
            .map_err(|e| CliError::data(format!("{}: {}", dir.display(), e.message)))?;
        let beta_gr = log
            .get("beta_gr")
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| {
                CliError::data(format!("{}: run log lacks beta_gr", dir.display()))
            })?;
        let background = config
            .get("background")
            .cloned()
            .unwrap_or_else(|| "uniform".to_string());
        Ok(FitDir {
            background,
            beta_gr,
            config,
            dir: dir.to_path_buf(),
        })
    }

    fn config_f64(&self, key: &str) -> Result<f64, CliError> {
        self.config
            .get(key)
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| {
                CliError::data(format!(
                    "{}: fit configuration lacks numeric `{key}`",
                    self.dir.display()
                ))
            })
    }

    pub fn region(&self) -> Result<Region, CliError> {
        Ok(Region::new(
            self.config_f64("region_x_min")?,
            self.config_f64("region_x_max")?,
            self.config_f64("region_y_min")?,
            self.config_f64("region_y_max")?,
        )?)
    }

    /// Rebuilds the chain. The training catalog is needed to reconstruct
    /// the fixed KDE background, which is deterministic given the catalog
    /// and bandwidth.
    pub fn load_chain(&self, train: &Catalog) -> Result<Chain, CliError> {
        let records = read_chain_csv(self.dir.join("chain.csv"), self.beta_gr)?;
        if records.is_empty() {
            return Err(CliError::data(format!(
                "{}: chain file holds no samples",
                self.dir.display()
            )));
        }

        let shared_phi: Option<Arc<BackgroundDensity>> = match self.background.as_str() {
            "uniform" => Some(Arc::new(BackgroundDensity::uniform(self.region()?))),
            "kde" => {
                let bandwidth = match (
                    self.config.get("kde_bandwidth_xx"),
                    self.config.get("kde_bandwidth_yy"),
                ) {
                    (Some(xx), Some(yy)) => {
                        let xx = xx.parse::<f64>().map_err(|_| {
                            CliError::data("bad kde_bandwidth_xx in fit config".to_string())
                        })?;
                        let yy = yy.parse::<f64>().map_err(|_| {
                            CliError::data("bad kde_bandwidth_yy in fit config".to_string())
                        })?;
                        Some(SymMat2::diag(xx, yy))
                    }
                    _ => None,
                };
                Some(Arc::new(fit_background_kde(train, bandwidth)?))
            }
            "dp" => None,
            other => {
                return Err(CliError::data(format!(
                    "{}: unknown background `{other}` in fit config",
                    self.dir.display()
                )))
            }
        };

        let mut dp_phis: BTreeMap<usize, Arc<BackgroundDensity>> = BTreeMap::new();
        if self.background == "dp" {
            for (index, mix) in read_mixture_sidecar(self.dir.join("dp_phi.csv"))? {
                dp_phis.insert(index, Arc::new(BackgroundDensity::Mixture(mix)));
            }
        }

        let samples = records
            .into_iter()
            .map(|r| {
                let phi = match &shared_phi {
                    Some(phi) => Arc::clone(phi),
                    None => dp_phis
                        .get(&r.index)
                        .cloned()
                        .ok_or_else(|| {
                            CliError::data(format!(
                                "{}: sidecar lacks the background realization for sample {}",
                                self.dir.display(),
                                r.index
                            ))
                        })?,
                };
                Ok(PosteriorSample {
                    index: r.index,
                    params: r.params,
                    branching: BranchingVector::all_immigrants(0),
                    n_immigrants: r.n_immigrants,
                    phi,
                    loglik_full: r.loglik_full,
                    loglik_branched: r.loglik_branched,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;

        Ok(Chain {
            samples,
            beta_gr: self.beta_gr,
            accept_rate_k_alpha: 0.0,
            accept_rate_c_p: 0.0,
            accept_rate_d_q: 0.0,
            total_iterations: 0,
            floored_intensities: 0,
        })
    }
}
