//! Posterior sample containers and their on-disk CSV layout.

use std::path::Path;
use std::sync::Arc;

use crate::background::{BackgroundDensity, GaussianMixture};
use crate::error::{EtasError, Result};
use crate::gibbs::BranchingVector;
use crate::kernels::EtasParams;
use crate::num::Scalar;

/// One retained draw from the posterior.
#[derive(Clone, Debug)]
pub struct PosteriorSample<F = f64> {
    /// Index within the retained (post-thinning) sequence.
    pub index: usize,
    pub params: EtasParams<F>,
    /// Latent parent assignments; empty for samples read back from disk
    /// (the CSV layout keeps only the immigrant count).
    pub branching: BranchingVector,
    pub n_immigrants: usize,
    pub phi: Arc<BackgroundDensity<F>>,
    pub loglik_full: F,
    pub loglik_branched: F,
}

/// The thinned posterior sample sequence plus run diagnostics.
#[derive(Clone, Debug)]
pub struct Chain<F = f64> {
    pub samples: Vec<PosteriorSample<F>>,
    /// Gutenberg-Richter rate held fixed during the run.
    pub beta_gr: F,
    pub accept_rate_k_alpha: f64,
    pub accept_rate_c_p: f64,
    pub accept_rate_d_q: f64,
    pub total_iterations: usize,
    /// Event intensities floored before the log across recorded samples.
    pub floored_intensities: usize,
}

impl<F: Scalar> Chain<F> {
    pub fn logliks_full(&self) -> Vec<F> {
        self.samples.iter().map(|s| s.loglik_full).collect()
    }
}

const CHAIN_HEADER: [&str; 11] = [
    "sample_index",
    "mu_bar",
    "K_bar",
    "alpha",
    "c",
    "p",
    "d",
    "q",
    "n_immigrants",
    "loglik_full",
    "loglik_branched",
];

/// Writes the chain in its CSV layout: one row per retained sample with the
/// parameter vector, immigrant count and both recorded log-likelihoods.
pub fn write_chain_csv<F: Scalar, P: AsRef<Path>>(chain: &Chain<F>, path: P) -> Result<()> {
    let path_str = path.as_ref().display().to_string();
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(|e| csv_io(&path_str, e))?;
    w.write_record(CHAIN_HEADER)
        .map_err(|e| csv_io(&path_str, e))?;
    for s in &chain.samples {
        w.write_record([
            s.index.to_string(),
            format!("{}", s.params.mu_bar),
            format!("{}", s.params.k_bar),
            format!("{}", s.params.alpha),
            format!("{}", s.params.c),
            format!("{}", s.params.p),
            format!("{}", s.params.d),
            format!("{}", s.params.q),
            s.n_immigrants.to_string(),
            format!("{}", s.loglik_full),
            format!("{}", s.loglik_branched),
        ])
        .map_err(|e| csv_io(&path_str, e))?;
    }
    w.flush().map_err(|e| EtasError::Io {
        path: path_str,
        source: e,
    })?;
    Ok(())
}

/// One row of a chain CSV file.
#[derive(Clone, Debug)]
pub struct ChainRecord<F = f64> {
    pub index: usize,
    pub params: EtasParams<F>,
    pub n_immigrants: usize,
    pub loglik_full: F,
    pub loglik_branched: F,
}

/// Reads a chain CSV written by [`write_chain_csv`]. The Gutenberg-Richter
/// rate is not part of the file layout and must be supplied (the fit run log
/// records it).
pub fn read_chain_csv<F: Scalar, P: AsRef<Path>>(
    path: P,
    beta_gr: F,
) -> Result<Vec<ChainRecord<F>>> {
    let path_str = path.as_ref().display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())
        .map_err(|e| csv_io(&path_str, e))?;
    {
        let headers = reader.headers().map_err(|e| csv_io(&path_str, e))?;
        let got: Vec<&str> = headers.iter().collect();
        if got != CHAIN_HEADER {
            return Err(EtasError::MalformedRow {
                path: path_str,
                line: 1,
                message: format!("unexpected chain header `{}`", got.join(",")),
            });
        }
    }
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_io(&path_str, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let fail = |message: String| EtasError::MalformedRow {
            path: path_str.clone(),
            line,
            message,
        };
        let num = |i: usize| -> Result<F> {
            rec[i]
                .parse::<f64>()
                .map(F::of)
                .map_err(|_| fail(format!("field {} is not a number", CHAIN_HEADER[i])))
        };
        let idx: usize = rec[0].parse().map_err(|_| fail("bad sample_index".into()))?;
        let n_imm: usize = rec[8]
            .parse()
            .map_err(|_| fail("bad n_immigrants".into()))?;
        out.push(ChainRecord {
            index: idx,
            params: EtasParams {
                mu_bar: num(1)?,
                k_bar: num(2)?,
                alpha: num(3)?,
                c: num(4)?,
                p: num(5)?,
                d: num(6)?,
                q: num(7)?,
                beta_gr,
            },
            n_immigrants: n_imm,
            loglik_full: num(9)?,
            loglik_branched: num(10)?,
        });
    }
    Ok(out)
}

const SIDECAR_HEADER: [&str; 7] = [
    "sample_index",
    "weight",
    "mean_x",
    "mean_y",
    "cov_xx",
    "cov_xy",
    "cov_yy",
];

/// Writes the per-sample mixture realizations (one row per component,
/// keyed by sample index). Samples whose background is not a mixture are
/// skipped.
pub fn write_mixture_sidecar<F: Scalar, P: AsRef<Path>>(chain: &Chain<F>, path: P) -> Result<()> {
    let path_str = path.as_ref().display().to_string();
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(|e| csv_io(&path_str, e))?;
    w.write_record(SIDECAR_HEADER)
        .map_err(|e| csv_io(&path_str, e))?;
    for s in &chain.samples {
        if let BackgroundDensity::Mixture(mix) = s.phi.as_ref() {
            for row in mix.component_rows() {
                let mut rec = vec![s.index.to_string()];
                rec.extend(row.iter().map(|v| format!("{v}")));
                w.write_record(&rec).map_err(|e| csv_io(&path_str, e))?;
            }
        }
    }
    w.flush().map_err(|e| EtasError::Io {
        path: path_str,
        source: e,
    })?;
    Ok(())
}

/// Reads a mixture sidecar back into per-sample mixtures, in file order.
pub fn read_mixture_sidecar<F: Scalar, P: AsRef<Path>>(
    path: P,
) -> Result<Vec<(usize, GaussianMixture<F>)>> {
    let path_str = path.as_ref().display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())
        .map_err(|e| csv_io(&path_str, e))?;
    let mut groups: Vec<(usize, Vec<[F; 6]>)> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_io(&path_str, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let fail = |message: String| EtasError::MalformedRow {
            path: path_str.clone(),
            line,
            message,
        };
        let idx: usize = rec[0].parse().map_err(|_| fail("bad sample_index".into()))?;
        let mut row = [F::zero(); 6];
        for (k, slot) in row.iter_mut().enumerate() {
            *slot = rec[k + 1]
                .parse::<f64>()
                .map(F::of)
                .map_err(|_| fail(format!("field {} is not a number", SIDECAR_HEADER[k + 1])))?;
        }
        match groups.last_mut() {
            Some((last_idx, rows)) if *last_idx == idx => rows.push(row),
            _ => groups.push((idx, vec![row])),
        }
    }
    groups
        .into_iter()
        .map(|(idx, rows)| GaussianMixture::from_rows(&rows).map(|m| (idx, m)))
        .collect()
}

fn csv_io(path: &str, e: csv::Error) -> EtasError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => EtasError::Io {
            path: path.to_string(),
            source: io,
        },
        other => EtasError::MalformedRow {
            path: path.to_string(),
            line: 0,
            message: format!("{other:?}"),
        },
    }
}
