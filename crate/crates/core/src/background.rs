//! Background (immigrant) spatial density models.
//!
//! Three interchangeable forms of the normalised background density:
//!
//! * uniform over the study region (baseline),
//! * a fixed Gaussian kernel density estimate smoothing all catalog events,
//! * a finite Gaussian mixture, which is how truncated Dirichlet-process
//!   posterior realizations are represented.
//!
//! The Dirichlet-process machinery lives here too: collapsed Chinese
//! restaurant process sweeps over the immigrant events under a
//! Normal-Wishart base measure, truncated stick-breaking realizations of the
//! mixing distribution, and the auxiliary-variable concentration update.

use rand::Rng;

use crate::catalog::Region;
use crate::error::{EtasError, Result};
use crate::linalg2::{Chol2, SymMat2, Vec2};
use crate::num::Scalar;

/// A normalised spatial probability density phi(x, y).
#[derive(Clone, Debug)]
pub enum BackgroundDensity<F = f64> {
    /// Constant over the region, zero outside.
    Uniform(Region<F>),
    /// Fixed kernel density estimate.
    Kde(Kde<F>),
    /// Finite Gaussian mixture (Dirichlet-process realizations and the
    /// synthetic benchmark densities).
    Mixture(GaussianMixture<F>),
}

impl<F: Scalar> BackgroundDensity<F> {
    pub fn uniform(region: Region<F>) -> Self {
        BackgroundDensity::Uniform(region)
    }

    /// Point evaluation of the density.
    pub fn density(&self, x: F, y: F) -> F {
        match self {
            BackgroundDensity::Uniform(region) => {
                if region.contains(x, y) {
                    F::one() / region.area()
                } else {
                    F::zero()
                }
            }
            BackgroundDensity::Kde(kde) => kde.density(x, y),
            BackgroundDensity::Mixture(mix) => mix.density(x, y),
        }
    }

    /// Exact draw from the density.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (F, F) {
        match self {
            BackgroundDensity::Uniform(region) => (
                rng.random_range(region.x_min..region.x_max),
                rng.random_range(region.y_min..region.y_max),
            ),
            BackgroundDensity::Kde(kde) => kde.sample(rng),
            BackgroundDensity::Mixture(mix) => mix.sample(rng),
        }
    }
}

/// Evaluates a background density at a point.
pub fn eval_density<F: Scalar>(phi: &BackgroundDensity<F>, x: F, y: F) -> F {
    phi.density(x, y)
}

// ---------------------------------------------------------------------------
// Kernel density estimation
// ---------------------------------------------------------------------------

/// Gaussian kernel density estimate with a fixed bandwidth matrix.
#[derive(Clone, Debug)]
pub struct Kde<F = f64> {
    points: Vec<Vec2<F>>,
    bandwidth: SymMat2<F>,
    inv_bandwidth: SymMat2<F>,
    chol: Chol2<F>,
    /// log of (2 pi)^-1 |H|^-1/2 / n, the per-point kernel mass.
    ln_point_norm: F,
}

impl<F: Scalar> Kde<F> {
    pub fn points(&self) -> &[Vec2<F>] {
        &self.points
    }

    pub fn bandwidth(&self) -> SymMat2<F> {
        self.bandwidth
    }

    pub fn density(&self, x: F, y: F) -> F {
        let z = Vec2::new(x, y);
        let point_norm = self.ln_point_norm.exp();
        let half = F::of(0.5);
        self.points
            .iter()
            .map(|zi| {
                let dv = z.sub(*zi);
                point_norm * (-half * self.inv_bandwidth.quad_form(dv)).exp()
            })
            .sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (F, F) {
        let idx = rng.random_range(0..self.points.len());
        let noise = self
            .chol
            .mul_vec(Vec2::new(F::std_normal(rng), F::std_normal(rng)));
        let z = self.points[idx].add(noise);
        (z.x, z.y)
    }
}

/// Per-dimension Silverman rule-of-thumb bandwidth: diagonal matrix with
/// entries `(1.06 sigma_hat n^(-1/5))^2`.
pub fn silverman_bandwidth<F: Scalar>(points: &[Vec2<F>]) -> Result<SymMat2<F>> {
    let n = points.len();
    if n < 2 {
        return Err(EtasError::InsufficientData(
            "kernel density estimation needs at least 2 points".to_string(),
        ));
    }
    let nf = F::of(n as f64);
    let mean = points
        .iter()
        .fold(Vec2::zero(), |acc, z| acc.add(*z))
        .scale(F::one() / nf);
    let mut var = Vec2::zero();
    for z in points {
        let dv = z.sub(mean);
        var = var.add(Vec2::new(dv.x * dv.x, dv.y * dv.y));
    }
    var = var.scale(F::one() / (nf - F::one()));
    let factor = F::of(1.06) * nf.powf(F::of(-0.2));
    let hx = factor * var.x.sqrt();
    let hy = factor * var.y.sqrt();
    let bw = SymMat2::diag(hx * hx, hy * hy);
    if !bw.is_spd() {
        return Err(EtasError::InvalidParameter(
            "degenerate sample spread gives a singular bandwidth".to_string(),
        ));
    }
    Ok(bw)
}

/// Fits a Gaussian KDE over all the given points. When `bandwidth` is
/// omitted the per-dimension Silverman rule is used.
pub fn fit_kde<F: Scalar>(points: &[Vec2<F>], bandwidth: Option<SymMat2<F>>) -> Result<Kde<F>> {
    if points.len() < 2 {
        return Err(EtasError::InsufficientData(
            "kernel density estimation needs at least 2 points".to_string(),
        ));
    }
    let bw = match bandwidth {
        Some(b) => b,
        None => silverman_bandwidth(points)?,
    };
    let inv = bw.inverse().filter(|_| bw.is_spd()).ok_or_else(|| {
        EtasError::InvalidParameter("bandwidth matrix must be symmetric positive-definite".into())
    })?;
    let chol = bw.cholesky().ok_or_else(|| {
        EtasError::InvalidParameter("bandwidth matrix must be symmetric positive-definite".into())
    })?;
    let ln_point_norm = -F::TAU().ln() - F::of(0.5) * bw.det().ln() - F::of(points.len() as f64).ln();
    Ok(Kde {
        points: points.to_vec(),
        bandwidth: bw,
        inv_bandwidth: inv,
        chol,
        ln_point_norm,
    })
}

/// Fits the fixed KDE background over every event in the catalog (smoothing
/// over the full catalog rather than the immigrants only is intentional for
/// this model variant; the declustered alternative is the Dirichlet-process
/// model).
pub fn fit_background_kde<F: Scalar>(
    catalog: &crate::catalog::Catalog<F>,
    bandwidth: Option<SymMat2<F>>,
) -> Result<BackgroundDensity<F>> {
    let points = catalog.positions();
    Ok(BackgroundDensity::Kde(fit_kde(&points, bandwidth)?))
}

// ---------------------------------------------------------------------------
// Gaussian mixtures
// ---------------------------------------------------------------------------

/// One bivariate Gaussian mixture component.
#[derive(Clone, Debug)]
pub struct GaussComponent<F = f64> {
    pub weight: F,
    pub mean: Vec2<F>,
    pub cov: SymMat2<F>,
    inv_cov: SymMat2<F>,
    chol: Chol2<F>,
    ln_norm: F,
}

impl<F: Scalar> GaussComponent<F> {
    pub fn new(weight: F, mean: Vec2<F>, cov: SymMat2<F>) -> Result<Self> {
        if !(weight >= F::zero()) || !weight.is_finite() {
            return Err(EtasError::InvalidParameter(format!(
                "mixture weight must be nonnegative, got {weight}"
            )));
        }
        let chol = cov.cholesky().ok_or_else(|| {
            EtasError::InvalidParameter(
                "mixture covariance must be symmetric positive-definite".to_string(),
            )
        })?;
        let inv_cov = cov.inverse().expect("s.p.d. matrix is invertible");
        let ln_norm = -F::TAU().ln() - F::of(0.5) * cov.det().ln();
        Ok(GaussComponent {
            weight,
            mean,
            cov,
            inv_cov,
            chol,
            ln_norm,
        })
    }

    fn density(&self, z: Vec2<F>) -> F {
        let dv = z.sub(self.mean);
        (self.ln_norm - F::of(0.5) * self.inv_cov.quad_form(dv)).exp()
    }
}

/// A finite bivariate Gaussian mixture with weights summing to one.
#[derive(Clone, Debug)]
pub struct GaussianMixture<F = f64> {
    components: Vec<GaussComponent<F>>,
}

impl<F: Scalar> GaussianMixture<F> {
    pub fn new(components: Vec<GaussComponent<F>>) -> Result<Self> {
        if components.is_empty() {
            return Err(EtasError::InvalidParameter(
                "mixture needs at least one component".to_string(),
            ));
        }
        let total: F = components.iter().map(|c| c.weight).sum();
        if (total - F::one()).abs() > F::of(1e-6) {
            return Err(EtasError::InvalidParameter(format!(
                "mixture weights must sum to 1, got {total}"
            )));
        }
        Ok(GaussianMixture { components })
    }

    pub fn components(&self) -> &[GaussComponent<F>] {
        &self.components
    }

    pub fn density(&self, x: F, y: F) -> F {
        let z = Vec2::new(x, y);
        self.components
            .iter()
            .map(|c| c.weight * c.density(z))
            .sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (F, F) {
        let u = F::unit_open(rng);
        let mut acc = F::zero();
        let mut chosen = self.components.len() - 1;
        for (k, c) in self.components.iter().enumerate() {
            acc = acc + c.weight;
            if u < acc {
                chosen = k;
                break;
            }
        }
        let c = &self.components[chosen];
        let z = c
            .mean
            .add(c.chol.mul_vec(Vec2::new(F::std_normal(rng), F::std_normal(rng))));
        (z.x, z.y)
    }

    /// Rows of (weight, mean_x, mean_y, cov_xx, cov_xy, cov_yy), the CSV
    /// layout used for realization sidecars.
    pub fn component_rows(&self) -> Vec<[F; 6]> {
        self.components
            .iter()
            .map(|c| {
                [
                    c.weight, c.mean.x, c.mean.y, c.cov.xx, c.cov.xy, c.cov.yy,
                ]
            })
            .collect()
    }

    pub fn from_rows(rows: &[[F; 6]]) -> Result<Self> {
        let comps = rows
            .iter()
            .map(|r| {
                GaussComponent::new(
                    r[0],
                    Vec2::new(r[1], r[2]),
                    SymMat2::new(r[3], r[4], r[5]),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        GaussianMixture::new(comps)
    }
}

// ---------------------------------------------------------------------------
// Dirichlet process mixture
// ---------------------------------------------------------------------------

/// Configuration of the Dirichlet-process mixture prior for the background
/// density: concentration, Normal-Wishart base measure, stick-breaking
/// truncation and sweep schedule.
#[derive(Clone, Copy, Debug)]
pub struct DpConfig<F = f64> {
    /// Concentration parameter, prior Gamma(1, 1) when updates are enabled.
    pub chi: F,
    /// Base-measure mean location.
    pub niw_mean: Vec2<F>,
    /// Scale of the mean precision (small values make the mean diffuse).
    pub niw_mean_precision: F,
    /// Degrees of freedom, at least 2 in the plane.
    pub niw_df: F,
    /// Expected component covariance under the base measure.
    pub niw_scale: SymMat2<F>,
    /// Number of stick-breaking atoms in each realization.
    pub truncation: usize,
    /// Collapsed Gibbs sweeps per background update.
    pub crp_sweeps: usize,
    /// Resample the concentration alongside each background update.
    pub update_concentration: bool,
}

const CHI_PRIOR_SHAPE: f64 = 1.0;
const CHI_PRIOR_RATE: f64 = 1.0;

fn robust_quantile<F: Scalar>(values: impl Iterator<Item = F>, q: f64) -> F {
    let mut sorted: Vec<F> = values.collect();
    if sorted.is_empty() {
        return F::zero();
    }
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = F::of(pos - lo as f64);
    sorted[lo] * (F::one() - frac) + sorted[hi] * frac
}

impl<F: Scalar> DpConfig<F> {
    /// Weakly informative defaults adapted to the data scale: base mean at
    /// the coordinate medians, base scale a diagonal matrix of squared
    /// quartile-based spreads. The spatial triggering kernel is heavy
    /// tailed, so quantile statistics are used instead of raw moments,
    /// which a single distant event can blow up.
    pub fn from_points(points: &[Vec2<F>]) -> Self {
        let n = points.len();
        let mut mean = Vec2::zero();
        let mut scale = SymMat2::identity();
        if n > 0 {
            mean = Vec2::new(
                robust_quantile(points.iter().map(|z| z.x), 0.5),
                robust_quantile(points.iter().map(|z| z.y), 0.5),
            );
        }
        if n > 3 {
            // normal-consistent spread: IQR / 1.349 per dimension, then
            // halved so the base expects clusters tighter than the overall
            // point cloud
            let spread = |vals: Vec<F>| -> F {
                let hi = robust_quantile(vals.iter().copied(), 0.75);
                let lo = robust_quantile(vals.iter().copied(), 0.25);
                (hi - lo) / F::of(2.0 * 1.349)
            };
            let sx = spread(points.iter().map(|z| z.x).collect());
            let sy = spread(points.iter().map(|z| z.y).collect());
            if sx > F::zero() && sy > F::zero() {
                scale = SymMat2::diag(sx * sx, sy * sy);
            }
        }
        DpConfig {
            chi: F::one(),
            niw_mean: mean,
            // one pseudo-observation of mean precision; much smaller values
            // make the singleton predictive so diffuse that the collapsed
            // sweeps stop opening clusters
            niw_mean_precision: F::one(),
            niw_df: F::of(4.0),
            niw_scale: scale,
            truncation: 50,
            crp_sweeps: 5,
            update_concentration: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.chi > F::zero()) {
            return Err(EtasError::InvalidParameter(format!(
                "concentration must be positive, got {}",
                self.chi
            )));
        }
        if !(self.niw_mean_precision > F::zero()) {
            return Err(EtasError::InvalidParameter(
                "mean precision scale must be positive".into(),
            ));
        }
        if self.niw_df < F::of(2.0) {
            return Err(EtasError::InvalidParameter(format!(
                "degrees of freedom must be at least 2, got {}",
                self.niw_df
            )));
        }
        if !self.niw_scale.is_spd() {
            return Err(EtasError::InvalidParameter(
                "base scale matrix must be symmetric positive-definite".into(),
            ));
        }
        if self.truncation == 0 || self.crp_sweeps == 0 {
            return Err(EtasError::InvalidParameter(
                "truncation level and sweep count must be positive".into(),
            ));
        }
        Ok(())
    }
}

impl Default for DpConfig<f64> {
    fn default() -> Self {
        DpConfig::from_points(&[])
    }
}

/// Normal-Wishart parameters over a Gaussian's (mean, precision) pair.
///
/// `sum_squares` is the inverse of the Wishart scale matrix, so the prior
/// expectation of the precision is `df * sum_squares^-1` and the expected
/// component covariance is `sum_squares / df`.
#[derive(Clone, Copy, Debug)]
pub struct NormalWishart<F = f64> {
    pub mean: Vec2<F>,
    pub mean_precision: F,
    pub df: F,
    pub sum_squares: SymMat2<F>,
}

impl<F: Scalar> NormalWishart<F> {
    pub fn from_config(cfg: &DpConfig<F>) -> Self {
        NormalWishart {
            mean: cfg.niw_mean,
            mean_precision: cfg.niw_mean_precision,
            df: cfg.niw_df,
            sum_squares: cfg.niw_scale.scale(cfg.niw_df),
        }
    }

    /// Conjugate update for the points summarised by `stat`.
    pub fn posterior(&self, stat: &ClusterStat<F>) -> Self {
        if stat.n == 0 {
            return *self;
        }
        let n = F::of(stat.n as f64);
        let rho_n = self.mean_precision + n;
        let center = stat.sum.scale(F::one() / n);
        let mean_n = self
            .mean
            .scale(self.mean_precision)
            .add(stat.sum)
            .scale(F::one() / rho_n);
        let scatter = stat.sum_sq.sub(center.outer().scale(n));
        let shift = center.sub(self.mean);
        let coupling = shift.outer().scale(self.mean_precision * n / rho_n);
        NormalWishart {
            mean: mean_n,
            mean_precision: rho_n,
            df: self.df + n,
            sum_squares: self.sum_squares.add(scatter).add(coupling),
        }
    }

    /// Log posterior-predictive density at `z`: a bivariate Student-t with
    /// `df - 1` degrees of freedom.
    pub fn ln_predictive(&self, z: Vec2<F>) -> F {
        let half = F::of(0.5);
        let two = F::of(2.0);
        let dof = self.df - F::one();
        let scale = self
            .sum_squares
            .scale((self.mean_precision + F::one()) / (self.mean_precision * dof));
        let det = scale.det();
        if !(det > F::zero()) || !det.is_finite() {
            // Surfaces as an error through the weight sampling.
            return F::nan();
        }
        let inv = scale.inverse().expect("positive determinant");
        let quad = inv.quad_form(z.sub(self.mean));
        ((dof + two) * half).ln_gamma()
            - (dof * half).ln_gamma()
            - (dof * F::PI()).ln()
            - half * det.ln()
            - (dof + two) * half * (F::one() + quad / dof).ln()
    }

    /// Draws a (mean, covariance) pair: precision from the Wishart part via
    /// the Bartlett factorisation, then the mean given that precision.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Vec2<F>, SymMat2<F>)> {
        let half = F::of(0.5);
        let wishart_scale = self.sum_squares.inverse().ok_or_else(non_spd)?;
        let l = wishart_scale.cholesky().ok_or_else(non_spd)?;
        let a11 = F::sample_gamma(self.df * half, half, rng).sqrt();
        let a22 = F::sample_gamma((self.df - F::one()) * half, half, rng).sqrt();
        let a21 = F::std_normal(rng);
        // B = L A, both lower triangular; precision = B B'.
        let b11 = l.l11 * a11;
        let b21 = l.l21 * a11 + l.l22 * a21;
        let b22 = l.l22 * a22;
        let precision = SymMat2::new(b11 * b11, b11 * b21, b21 * b21 + b22 * b22);
        let cov = precision.inverse().ok_or_else(non_spd)?;
        let mean_cov = cov.scale(F::one() / self.mean_precision);
        let lm = mean_cov.cholesky().ok_or_else(non_spd)?;
        let mean = self
            .mean
            .add(lm.mul_vec(Vec2::new(F::std_normal(rng), F::std_normal(rng))));
        Ok((mean, cov))
    }
}

fn non_spd() -> EtasError {
    EtasError::InvalidParameter(
        "sufficient statistics lost positive-definiteness; upstream state is corrupted"
            .to_string(),
    )
}

/// Count, coordinate sum and outer-product sum of one cluster.
#[derive(Clone, Copy, Debug)]
pub struct ClusterStat<F = f64> {
    pub n: usize,
    pub sum: Vec2<F>,
    pub sum_sq: SymMat2<F>,
}

impl<F: Scalar> ClusterStat<F> {
    pub fn empty() -> Self {
        ClusterStat {
            n: 0,
            sum: Vec2::zero(),
            sum_sq: SymMat2::zero(),
        }
    }

    pub fn add(&mut self, z: Vec2<F>) {
        self.n += 1;
        self.sum = self.sum.add(z);
        self.sum_sq = self.sum_sq.add(z.outer());
    }

    pub fn remove(&mut self, z: Vec2<F>) {
        debug_assert!(self.n > 0);
        self.n -= 1;
        self.sum = self.sum.sub(z);
        self.sum_sq = self.sum_sq.sub(z.outer());
    }
}

/// Cluster assignments of the immigrant events with per-cluster sufficient
/// statistics. Labels are kept contiguous: deleting an emptied cluster
/// relabels the last one into its slot.
#[derive(Clone, Debug)]
pub struct ClusterState<F = f64> {
    assignments: Vec<usize>,
    stats: Vec<ClusterStat<F>>,
}

impl<F: Scalar> ClusterState<F> {
    /// Starts with every point in a single cluster.
    pub fn new_single(points: &[Vec2<F>]) -> Self {
        if points.is_empty() {
            return ClusterState {
                assignments: Vec::new(),
                stats: Vec::new(),
            };
        }
        let mut stat = ClusterStat::empty();
        for z in points {
            stat.add(*z);
        }
        ClusterState {
            assignments: vec![0; points.len()],
            stats: vec![stat],
        }
    }

    /// Seeds assignments sequentially: each point joins an existing cluster
    /// or opens a new one with the collapsed predictive weights, as if the
    /// points arrived one by one.
    pub fn seed_sequential<R: Rng + ?Sized>(
        points: &[Vec2<F>],
        cfg: &DpConfig<F>,
        rng: &mut R,
    ) -> Result<Self> {
        Self::from_partial(points, &vec![usize::MAX; points.len()], cfg, rng)
    }

    /// Rebuilds a state from carried-over labels (`usize::MAX` marks points
    /// without one). Known labels are kept (relabelled contiguously in
    /// first-seen order); unlabelled points are seeded sequentially from the
    /// collapsed predictive weights given everything attached so far.
    pub fn from_partial<R: Rng + ?Sized>(
        points: &[Vec2<F>],
        labels: &[usize],
        cfg: &DpConfig<F>,
        rng: &mut R,
    ) -> Result<Self> {
        assert_eq!(points.len(), labels.len());
        let base = NormalWishart::from_config(cfg);
        let mut state = ClusterState {
            assignments: vec![usize::MAX; points.len()],
            stats: Vec::new(),
        };
        let mut relabel: Vec<usize> = Vec::new();
        for (i, (&label, z)) in labels.iter().zip(points).enumerate() {
            if label == usize::MAX {
                continue;
            }
            let k = match relabel.iter().position(|&old| old == label) {
                Some(k) => k,
                None => {
                    relabel.push(label);
                    relabel.len() - 1
                }
            };
            state.attach(i, *z, k);
        }
        for (i, z) in points.iter().enumerate() {
            if state.assignments[i] != usize::MAX {
                continue;
            }
            let weights = log_weights(&state.stats, &base, cfg.chi, *z);
            let k = sample_categorical_log(&weights, rng)?;
            state.attach(i, *z, k);
        }
        Ok(state)
    }

    pub fn n_points(&self) -> usize {
        self.assignments.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.stats.len()
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn stats(&self) -> &[ClusterStat<F>] {
        &self.stats
    }

    /// One collapsed Gibbs pass: every point is detached and reassigned from
    /// its conditional given all other assignments.
    pub fn sweep<R: Rng + ?Sized>(
        &mut self,
        points: &[Vec2<F>],
        cfg: &DpConfig<F>,
        rng: &mut R,
    ) -> Result<()> {
        assert_eq!(points.len(), self.assignments.len());
        let base = NormalWishart::from_config(cfg);
        for (i, z) in points.iter().enumerate() {
            self.detach(i, *z);
            let weights = log_weights(&self.stats, &base, cfg.chi, *z);
            let k = sample_categorical_log(&weights, rng)?;
            self.attach(i, *z, k);
        }
        Ok(())
    }

    fn detach(&mut self, i: usize, z: Vec2<F>) {
        let k = self.assignments[i];
        self.assignments[i] = usize::MAX;
        self.stats[k].remove(z);
        if self.stats[k].n == 0 {
            let last = self.stats.len() - 1;
            self.stats.swap_remove(k);
            if k != last {
                for a in self.assignments.iter_mut() {
                    if *a == last {
                        *a = k;
                    }
                }
            }
        }
    }

    fn attach(&mut self, i: usize, z: Vec2<F>, k: usize) {
        if k == self.stats.len() {
            self.stats.push(ClusterStat::empty());
        }
        self.stats[k].add(z);
        self.assignments[i] = k;
    }

    /// Recomputes every sufficient statistic from scratch and compares.
    pub fn consistent_with(&self, points: &[Vec2<F>], tol: F) -> bool {
        if points.len() != self.assignments.len() {
            return false;
        }
        let mut fresh = vec![ClusterStat::<F>::empty(); self.stats.len()];
        for (i, z) in points.iter().enumerate() {
            let k = self.assignments[i];
            if k >= fresh.len() {
                return false;
            }
            fresh[k].add(*z);
        }
        self.stats.iter().zip(&fresh).all(|(a, b)| {
            a.n == b.n
                && (a.sum.x - b.sum.x).abs() <= tol
                && (a.sum.y - b.sum.y).abs() <= tol
                && (a.sum_sq.xx - b.sum_sq.xx).abs() <= tol
                && (a.sum_sq.xy - b.sum_sq.xy).abs() <= tol
                && (a.sum_sq.yy - b.sum_sq.yy).abs() <= tol
        })
    }
}

/// Unnormalised log assignment weights for one point: existing clusters get
/// `ln n_k` plus the cluster's posterior-predictive log density, a new
/// cluster gets `ln chi` plus the prior-predictive log density. The point
/// itself must not be counted in `stats`.
pub fn log_weights<F: Scalar>(
    stats: &[ClusterStat<F>],
    base: &NormalWishart<F>,
    chi: F,
    z: Vec2<F>,
) -> Vec<F> {
    let mut out = Vec::with_capacity(stats.len() + 1);
    for stat in stats {
        out.push(F::of(stat.n as f64).ln() + base.posterior(stat).ln_predictive(z));
    }
    out.push(chi.ln() + base.ln_predictive(z));
    out
}

/// Unnormalised log weights for reassigning point `i` of `points` under the
/// current state (with point `i` removed), in cluster order with the
/// new-cluster weight last.
pub fn assignment_log_weights<F: Scalar>(
    state: &ClusterState<F>,
    points: &[Vec2<F>],
    cfg: &DpConfig<F>,
    i: usize,
) -> Vec<F> {
    let mut scratch = state.clone();
    scratch.detach(i, points[i]);
    log_weights(
        &scratch.stats,
        &NormalWishart::from_config(cfg),
        cfg.chi,
        points[i],
    )
}

fn sample_categorical_log<F: Scalar, R: Rng + ?Sized>(
    log_weights: &[F],
    rng: &mut R,
) -> Result<usize> {
    if log_weights.iter().any(|w| w.is_nan() || *w == F::infinity()) {
        return Err(non_spd());
    }
    let max = log_weights
        .iter()
        .copied()
        .fold(F::neg_infinity(), F::max);
    if !max.is_finite() {
        return Err(non_spd());
    }
    let mut total = F::zero();
    let weights: Vec<F> = log_weights
        .iter()
        .map(|lw| {
            let w = (*lw - max).exp();
            total = total + w;
            w
        })
        .collect();
    let u = F::unit_open(rng) * total;
    let mut acc = F::zero();
    for (k, w) in weights.iter().enumerate() {
        acc = acc + *w;
        if u < acc {
            return Ok(k);
        }
    }
    Ok(weights.len() - 1)
}

/// Functional form of one collapsed Gibbs pass over the assignments.
pub fn crp_gibbs_sweep<F: Scalar, R: Rng + ?Sized>(
    mut state: ClusterState<F>,
    points: &[Vec2<F>],
    cfg: &DpConfig<F>,
    rng: &mut R,
) -> Result<ClusterState<F>> {
    state.sweep(points, cfg, rng)?;
    Ok(state)
}

/// Draws one truncated stick-breaking realization of the mixing
/// distribution given the current clustering.
///
/// Stick lengths are Beta(1, chi + n); the unassigned remainder of the stick
/// is folded into the last atom so the weights sum to one exactly. Each atom
/// is a fresh base-measure draw with probability `chi / (chi + n)` and
/// otherwise the posterior draw for the cluster of a uniformly chosen
/// assigned point.
///
/// The configured truncation level acts as a floor: sticks shrink like
/// 1/(chi + n), so the level is raised to `ln(1e3) * (chi + n)` when needed
/// to keep the folded remainder below about 1e-3 of the mass (a fixed level
/// would silently hand most of the stick to the final atom once n grows).
pub fn sample_dp_realization<F: Scalar, R: Rng + ?Sized>(
    state: &ClusterState<F>,
    points: &[Vec2<F>],
    cfg: &DpConfig<F>,
    rng: &mut R,
) -> Result<BackgroundDensity<F>> {
    debug_assert_eq!(points.len(), state.n_points());
    let base = NormalWishart::from_config(cfg);
    let n = state.n_points();
    let n_f = F::of(n as f64);
    let total_mass = cfg.chi + n_f;
    let adaptive = (total_mass.to64() * 6.9).ceil() as usize;
    let levels = cfg.truncation.max(adaptive).min(20_000);

    let mut components = Vec::with_capacity(levels);
    let mut remaining = F::one();
    let mut acc = F::zero();
    for k in 0..levels {
        let weight = if k + 1 == levels {
            (F::one() - acc).max(F::zero())
        } else {
            let stick = F::sample_beta(F::one(), total_mass, rng);
            let w = stick * remaining;
            remaining = remaining * (F::one() - stick);
            acc = acc + w;
            w
        };
        let draw_fresh = n == 0 || F::unit_open(rng) * total_mass < cfg.chi;
        let (mean, cov) = if draw_fresh {
            base.sample(rng)?
        } else {
            let idx = rng.random_range(0..n);
            let cluster = state.assignments()[idx];
            base.posterior(&state.stats()[cluster]).sample(rng)?
        };
        components.push(GaussComponent::new(weight, mean, cov)?);
    }
    Ok(BackgroundDensity::Mixture(GaussianMixture::new(
        components,
    )?))
}

/// Resamples the concentration parameter by the standard auxiliary-variable
/// scheme under its Gamma(1, 1) prior, returning the updated configuration.
pub fn update_dp_hyperparams<F: Scalar, R: Rng + ?Sized>(
    state: &ClusterState<F>,
    cfg: &DpConfig<F>,
    rng: &mut R,
) -> DpConfig<F> {
    let a0 = F::of(CHI_PRIOR_SHAPE);
    let b0 = F::of(CHI_PRIOR_RATE);
    let n = state.n_points();
    let mut out = *cfg;
    if n == 0 {
        out.chi = F::sample_gamma(a0, b0, rng);
        return out;
    }
    let k = F::of(state.n_clusters() as f64);
    let n_f = F::of(n as f64);
    let eta = F::sample_beta(cfg.chi + F::one(), n_f, rng);
    let rate = b0 - eta.ln();
    let odds = (a0 + k - F::one()) / (n_f * rate);
    let shape = if F::unit_open(rng) * (F::one() + odds) < odds {
        a0 + k
    } else {
        a0 + k - F::one()
    };
    out.chi = F::sample_gamma(shape, rate, rng);
    out
}
