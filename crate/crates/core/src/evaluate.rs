//! Model evaluation: deviance information criterion, out-of-sample
//! posterior-predictive log-likelihood, and model comparison tables.

use std::fmt;

use crate::catalog::Catalog;
use crate::chain::Chain;
use crate::error::{EtasError, Result};
use crate::kernels::window_log_likelihood;
use crate::num::Scalar;

/// Evaluation results for one fitted model.
#[derive(Clone, Debug)]
pub struct EvaluationReport<F = f64> {
    pub model: String,
    pub dic: F,
    pub p_dic_alt: F,
    pub oos_mean_loglik: F,
    pub oos_max_loglik: F,
    /// Per-sample out-of-sample series as (sample index, log-likelihood).
    pub per_sample: Vec<(usize, F)>,
    /// The (train end, test end) split the report was computed on.
    pub split: (F, F),
}

/// Variance-based effective-complexity estimate: twice the sample variance
/// (n-1 denominator) of the recorded log-likelihoods.
pub fn p_dic_alt<F: Scalar>(logliks: &[F]) -> Result<F> {
    if logliks.len() < 2 {
        return Err(EtasError::InsufficientData(
            "the variance-based complexity estimate needs at least 2 samples".to_string(),
        ));
    }
    let n = F::of(logliks.len() as f64);
    let mean = logliks.iter().copied().sum::<F>() / n;
    let var = logliks
        .iter()
        .map(|&l| (l - mean) * (l - mean))
        .sum::<F>()
        / (n - F::one());
    Ok(F::of(2.0) * var)
}

/// DIC with the variance-based complexity term.
///
/// The plug-in deviance uses the chain's maximum recorded log-likelihood:
/// a posterior-mean parameter point is not well defined for the
/// nonparametric background realizations, so the same plug-in is applied to
/// every model for comparability. Returns `(dic, p_dic_alt)`.
pub fn compute_dic<F: Scalar>(logliks: &[F]) -> Result<(F, F)> {
    let p = p_dic_alt(logliks)?;
    let best = logliks
        .iter()
        .copied()
        .fold(F::neg_infinity(), F::max);
    Ok((F::of(-2.0) * best + F::of(2.0) * p, p))
}

/// Log-likelihood of the test window under one posterior draw, conditioning
/// on the full history: training events trigger into the window, and the
/// compensator is integrated over the window only.
pub fn oos_sample_loglik<F: Scalar>(
    sample: &crate::chain::PosteriorSample<F>,
    train: &Catalog<F>,
    test: &Catalog<F>,
) -> F {
    let mut all = train.events().to_vec();
    all.extend_from_slice(test.events());
    window_log_likelihood(
        &all,
        train.t_end(),
        test.t_end(),
        train.m0(),
        &sample.params,
        &sample.phi,
    )
}

/// Evaluates the out-of-sample posterior-predictive log-likelihood over the
/// chain (every `every`-th retained sample) and assembles the full report.
pub fn oos_loglik<F: Scalar>(
    model: &str,
    chain: &Chain<F>,
    train: &Catalog<F>,
    test: &Catalog<F>,
    every: usize,
) -> Result<EvaluationReport<F>> {
    if chain.samples.is_empty() {
        return Err(EtasError::InsufficientData(
            "the chain holds no samples".to_string(),
        ));
    }
    if every == 0 {
        return Err(EtasError::InvalidParameter(
            "evaluation cadence must be positive".to_string(),
        ));
    }
    if test.t_end() <= train.t_end() {
        return Err(EtasError::InvalidWindow(
            "the test window must extend beyond the training window".to_string(),
        ));
    }
    if train.m0() != test.m0() {
        return Err(EtasError::Mismatch(
            "training and test catalogs disagree on the completeness magnitude".to_string(),
        ));
    }
    if let Some(ev) = test.events().first() {
        if ev.t < train.t_end() {
            return Err(EtasError::InvalidWindow(
                "test events must not precede the training window end".to_string(),
            ));
        }
    }

    let per_sample: Vec<(usize, F)> = chain
        .samples
        .iter()
        .step_by(every)
        .map(|s| (s.index, oos_sample_loglik(s, train, test)))
        .collect();
    let n = F::of(per_sample.len() as f64);
    let mean = per_sample.iter().map(|(_, l)| *l).sum::<F>() / n;
    let max = per_sample
        .iter()
        .map(|(_, l)| *l)
        .fold(F::neg_infinity(), F::max);

    let (dic, p) = compute_dic(&chain.logliks_full())?;
    Ok(EvaluationReport {
        model: model.to_string(),
        dic,
        p_dic_alt: p,
        oos_mean_loglik: mean,
        oos_max_loglik: max,
        per_sample,
        split: (train.t_end(), test.t_end()),
    })
}

/// Ranking of several models over DIC and the out-of-sample metrics.
#[derive(Clone, Debug)]
pub struct ModelComparison<F = f64> {
    pub reports: Vec<EvaluationReport<F>>,
    pub dic_winner: String,
    pub oos_mean_winner: String,
    pub oos_max_winner: String,
    /// Set when a single model wins every metric.
    pub best: Option<String>,
}

/// Ranks the reports: lowest DIC, highest out-of-sample mean and maximum.
/// All reports must be computed on the same train/test split.
pub fn compare_models<F: Scalar>(reports: &[EvaluationReport<F>]) -> Result<ModelComparison<F>> {
    if reports.len() < 2 {
        return Err(EtasError::InsufficientData(
            "model comparison needs at least two reports".to_string(),
        ));
    }
    let split = reports[0].split;
    for r in reports {
        if (r.split.0 - split.0).abs() > F::of(1e-9) || (r.split.1 - split.1).abs() > F::of(1e-9)
        {
            return Err(EtasError::Mismatch(format!(
                "report `{}` was computed on a different data split",
                r.model
            )));
        }
    }
    let dic_winner = reports
        .iter()
        .min_by(|a, b| a.dic.partial_cmp(&b.dic).expect("finite DIC"))
        .expect("nonempty")
        .model
        .clone();
    let oos_mean_winner = reports
        .iter()
        .max_by(|a, b| {
            a.oos_mean_loglik
                .partial_cmp(&b.oos_mean_loglik)
                .expect("finite mean")
        })
        .expect("nonempty")
        .model
        .clone();
    let oos_max_winner = reports
        .iter()
        .max_by(|a, b| {
            a.oos_max_loglik
                .partial_cmp(&b.oos_max_loglik)
                .expect("finite max")
        })
        .expect("nonempty")
        .model
        .clone();
    let best = if dic_winner == oos_mean_winner && dic_winner == oos_max_winner {
        Some(dic_winner.clone())
    } else {
        None
    };
    Ok(ModelComparison {
        reports: reports.to_vec(),
        dic_winner,
        oos_mean_winner,
        oos_max_winner,
        best,
    })
}

impl<F: Scalar> fmt::Display for ModelComparison<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<12} {:>14} {:>14} {:>14} {:>14}",
            "model", "DIC", "p_DIC_alt", "oos_mean", "oos_max"
        )?;
        for r in &self.reports {
            writeln!(
                f,
                "{:<12} {:>14.4} {:>14.4} {:>14.4} {:>14.4}",
                r.model,
                r.dic.to64(),
                r.p_dic_alt.to64(),
                r.oos_mean_loglik.to64(),
                r.oos_max_loglik.to64()
            )?;
        }
        writeln!(f, "winner by DIC:      {}", self.dic_winner)?;
        writeln!(f, "winner by oos mean: {}", self.oos_mean_winner)?;
        writeln!(f, "winner by oos max:  {}", self.oos_max_winner)?;
        match &self.best {
            Some(best) => writeln!(f, "best overall:       {best}"),
            None => writeln!(f, "best overall:       (no model wins every metric)"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::BackgroundDensity;
    use crate::catalog::{Catalog, Event, Region};
    use crate::chain::PosteriorSample;
    use crate::gibbs::BranchingVector;
    use crate::kernels::EtasParams;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn region() -> Region {
        Region::new(0.0, 4.0, 0.0, 6.0).unwrap()
    }

    fn params() -> EtasParams {
        EtasParams::new(0.3, 0.2, 1.0, 0.5, 2.0, 0.4, 2.0, 10f64.ln()).unwrap()
    }

    fn sample_with(params: EtasParams, phi: BackgroundDensity) -> PosteriorSample {
        PosteriorSample {
            index: 0,
            params,
            branching: BranchingVector::all_immigrants(0),
            n_immigrants: 0,
            phi: Arc::new(phi),
            loglik_full: 0.0,
            loglik_branched: 0.0,
        }
    }

    fn fake_report(model: &str, dic: f64, mean: f64, max: f64) -> EvaluationReport {
        EvaluationReport {
            model: model.to_string(),
            dic,
            p_dic_alt: 1.0,
            oos_mean_loglik: mean,
            oos_max_loglik: max,
            per_sample: vec![(0, mean)],
            split: (300.0, 350.0),
        }
    }

    #[test]
    fn two_point_variance_mechanics() {
        let (dic, p) = compute_dic(&[-10.0, -12.0]).unwrap();
        assert_eq!(p, 4.0);
        assert_eq!(dic, -2.0 * -10.0 + 8.0);
    }

    #[test]
    fn constant_series_has_zero_complexity() {
        let (dic, p) = compute_dic(&[-7.5, -7.5, -7.5]).unwrap();
        assert_eq!(p, 0.0);
        assert_eq!(dic, 15.0);
    }

    #[test]
    fn dic_is_deterministic_and_needs_two_samples() {
        let series = [-3.0, -4.0, -2.5];
        assert_eq!(compute_dic(&series).unwrap(), compute_dic(&series).unwrap());
        assert!(compute_dic(&[-1.0]).is_err());
    }

    #[test]
    fn p_dic_alt_is_order_invariant_and_nonnegative() {
        let a = p_dic_alt(&[-10.0, -12.0, -11.0, -14.0]).unwrap();
        let b = p_dic_alt(&[-14.0, -10.0, -11.0, -12.0]).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-14);
        assert!(a >= 0.0);
    }

    #[test]
    fn empty_test_window_without_triggering_is_the_void_probability() {
        let mut p = params();
        p.k_bar = 0.0;
        let train = Catalog::new(
            vec![Event::new(1.0, 3.0, 1.0, 1.0)],
            300.0,
            2.0,
            region(),
        )
        .unwrap();
        let test = Catalog::from_sorted_unchecked(Vec::new(), 350.0, 2.0, region());
        let s = sample_with(p, BackgroundDensity::uniform(region()));
        let ll = oos_sample_loglik(&s, &train, &test);
        assert_relative_eq!(ll, -0.3 * 50.0, max_relative = 1e-12);
    }

    #[test]
    fn oos_matches_an_independent_transcription() {
        // Second, direct implementation of the windowed likelihood.
        let p = params();
        let events = vec![
            Event::new(10.0, 3.0, 1.0, 1.0),
            Event::new(250.0, 2.5, 2.0, 2.0),
            Event::new(310.0, 2.2, 2.1, 2.2),
            Event::new(325.0, 3.5, 1.5, 3.0),
            Event::new(340.0, 2.0, 0.5, 0.5),
        ];
        let full = Catalog::new(events.clone(), 350.0, 2.0, region()).unwrap();
        let (train, test) = full.split(300.0).unwrap();
        let s = sample_with(p, BackgroundDensity::uniform(region()));
        let got = oos_sample_loglik(&s, &train, &test);

        let (t0, t1) = (300.0, 350.0);
        let k_r = (p.p - 1.0) * p.c.powf(p.p - 1.0);
        let k_s = (p.q - 1.0) * p.d.powf(p.q - 1.0) / std::f64::consts::PI;
        let mut expect = 0.0;
        for (i, ev) in events.iter().enumerate() {
            if ev.t < t0 {
                continue;
            }
            let mut lambda = p.mu_bar / 24.0;
            for parent in &events[..i] {
                let boost = (p.alpha * (parent.m - 2.0)).exp();
                let dt = ev.t - parent.t;
                let dist2 = (ev.x - parent.x).powi(2) + (ev.y - parent.y).powi(2);
                lambda += p.k_bar
                    * boost
                    * k_r
                    * (dt + p.c).powf(-p.p)
                    * k_s
                    * (dist2 + p.d).powf(-p.q);
            }
            expect += lambda.ln();
        }
        expect -= p.mu_bar * (t1 - t0);
        for ev in &events {
            let boost = (p.alpha * (ev.m - 2.0)).exp();
            let z1 = (t0 - ev.t).max(0.0);
            let tail = |z: f64| (p.c / (z + p.c)).powf(p.p - 1.0);
            expect -= p.k_bar * boost * (tail(z1) - tail(t1 - ev.t));
        }
        assert!((got - expect).abs() < 1e-8, "got {got}, expected {expect}");
    }

    #[test]
    fn oos_is_additive_over_subwindows() {
        let p = params();
        let events = vec![
            Event::new(10.0, 3.0, 1.0, 1.0),
            Event::new(150.0, 2.5, 2.0, 2.0),
            Event::new(310.0, 2.2, 2.1, 2.2),
            Event::new(325.0, 3.5, 1.5, 3.0),
            Event::new(340.0, 2.0, 0.5, 0.5),
        ];
        let full = Catalog::new(events, 350.0, 2.0, region()).unwrap();
        let (train, test) = full.split(300.0).unwrap();
        let s = sample_with(p, BackgroundDensity::uniform(region()));
        let whole = oos_sample_loglik(&s, &train, &test);

        // split the test window at 330
        let (mid_train, mid_test) = full.split(330.0).unwrap();
        let first = {
            let test_a = Catalog::from_sorted_unchecked(
                mid_train
                    .events()
                    .iter()
                    .copied()
                    .filter(|e| e.t >= 300.0)
                    .collect(),
                330.0,
                2.0,
                region(),
            );
            oos_sample_loglik(&s, &train, &test_a)
        };
        let second = oos_sample_loglik(&s, &mid_train, &mid_test);
        assert!(
            (whole - first - second).abs() < 1e-8,
            "additivity violated: {whole} vs {first} + {second}"
        );
    }

    #[test]
    fn comparison_flags_a_dominating_model() {
        let reports = vec![
            fake_report("kde", 120.0, -80.0, -70.0),
            fake_report("dp", 100.0, -75.0, -65.0),
        ];
        let cmp = compare_models(&reports).unwrap();
        assert_eq!(cmp.best.as_deref(), Some("dp"));
        // order invariance
        let reversed = compare_models(&[reports[1].clone(), reports[0].clone()]).unwrap();
        assert_eq!(reversed.best.as_deref(), Some("dp"));
        assert_eq!(cmp.dic_winner, reversed.dic_winner);
    }

    #[test]
    fn split_winners_give_no_overall_best() {
        let reports = vec![
            fake_report("kde", 90.0, -80.0, -70.0),
            fake_report("dp", 100.0, -75.0, -65.0),
        ];
        let cmp = compare_models(&reports).unwrap();
        assert_eq!(cmp.dic_winner, "kde");
        assert_eq!(cmp.oos_mean_winner, "dp");
        assert!(cmp.best.is_none());
    }

    #[test]
    fn mismatched_splits_are_rejected() {
        let mut a = fake_report("kde", 90.0, -80.0, -70.0);
        let b = fake_report("dp", 100.0, -75.0, -65.0);
        a.split = (250.0, 350.0);
        assert!(compare_models(&[a, b]).is_err());
    }

    #[test]
    fn evaluation_cadence_selects_the_expected_count() {
        // 10,000 retained samples probed every 50th gives 200 evaluations
        let chain_len = 10_000usize;
        let every = 50usize;
        let picked = (0..chain_len).step_by(every).count();
        assert_eq!(picked, 200);
    }
}
