//! Triggering kernels, conditional intensity and the two log-likelihood
//! forms of the spatio-temporal ETAS model.
//!
//! The kernels are used in their normalised parameterisation: the temporal
//! decay `K_r (z + c)^{-p}` with `K_r = (p-1) c^{p-1}` integrates to one over
//! `[0, inf)`, and the spatial decay `K_s (dx^2 + dy^2 + d)^{-q}` with
//! `K_s = (q-1) d^{q-1} / pi` integrates to one over the plane. The expected
//! number of direct offspring of an event with magnitude `m` is then
//! `k_bar * exp(alpha (m - m0))`, truncated to the remaining observation
//! window.
//!
//! Likelihoods are evaluated on the finite time window with the
//! infinite-space convention: the spatial integral of each triggering kernel
//! is taken as one, while the temporal integral is truncated at the window
//! end. The conditional-intensity sum and the compensator carry opposite
//! signs, and the branched form below marginalises back to the plain form
//! exactly (summing the exponentiated branched likelihood over all branching
//! vectors reproduces the exponentiated plain likelihood).

use crate::background::BackgroundDensity;
use crate::catalog::{Catalog, Event};
use crate::error::{EtasError, Result};
use crate::gibbs::BranchingVector;
use crate::num::Scalar;

/// ETAS triggering parameters plus the Gutenberg-Richter rate used for the
/// subcriticality constraint and for magnitude simulation.
///
/// Fields: `mu_bar` background events per day, `k_bar` expected direct
/// offspring at the completeness magnitude, `alpha` magnitude productivity
/// exponent, `(c, p)` temporal decay offset/exponent, `(d, q)` spatial decay
/// offset/exponent, `beta_gr` exponential magnitude rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EtasParams<F = f64> {
    pub mu_bar: F,
    pub k_bar: F,
    pub alpha: F,
    pub c: F,
    pub p: F,
    pub d: F,
    pub q: F,
    pub beta_gr: F,
}

impl<F: Scalar> EtasParams<F> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(mu_bar: F, k_bar: F, alpha: F, c: F, p: F, d: F, q: F, beta_gr: F) -> Result<Self> {
        let params = EtasParams {
            mu_bar,
            k_bar,
            alpha,
            c,
            p,
            d,
            q,
            beta_gr,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let positives = [
            ("mu_bar", self.mu_bar),
            ("c", self.c),
            ("d", self.d),
            ("beta_gr", self.beta_gr),
        ];
        for (name, v) in positives {
            if !(v > F::zero()) || !v.is_finite() {
                return Err(EtasError::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        // k_bar = 0 (triggering off) and alpha = 0 (flat productivity) are
        // meaningful limiting cases.
        let nonnegatives = [("k_bar", self.k_bar), ("alpha", self.alpha)];
        for (name, v) in nonnegatives {
            if !(v >= F::zero()) || !v.is_finite() {
                return Err(EtasError::InvalidParameter(format!(
                    "{name} must be nonnegative and finite, got {v}"
                )));
            }
        }
        if !(self.p > F::one()) || !self.p.is_finite() {
            return Err(EtasError::InvalidParameter(format!(
                "p must exceed 1, got {}",
                self.p
            )));
        }
        if !(self.q > F::one()) || !self.q.is_finite() {
            return Err(EtasError::InvalidParameter(format!(
                "q must exceed 1, got {}",
                self.q
            )));
        }
        Ok(())
    }

    /// Expected direct offspring per event after integrating over the
    /// magnitude law: `k_bar * beta / (beta - alpha)`; infinite when
    /// `alpha >= beta`.
    pub fn branching_ratio(&self) -> F {
        if self.alpha >= self.beta_gr {
            F::infinity()
        } else {
            self.k_bar * self.beta_gr / (self.beta_gr - self.alpha)
        }
    }

    /// Subcriticality: `alpha < beta` and branching ratio below one.
    pub fn is_subcritical(&self) -> bool {
        self.alpha < self.beta_gr && self.branching_ratio() < F::one()
    }

    /// Temporal normalisation constant `K_r = (p-1) c^(p-1)`.
    pub fn omori_norm(&self) -> F {
        omori_norm(self.c, self.p)
    }

    /// Spatial normalisation constant `K_s = (q-1) d^(q-1) / pi`.
    pub fn spatial_norm(&self) -> F {
        spatial_norm(self.d, self.q)
    }
}

/// `K_r = (p-1) c^(p-1)`.
pub fn omori_norm<F: Scalar>(c: F, p: F) -> F {
    (p - F::one()) * c.powf(p - F::one())
}

/// Normalised temporal decay density `K_r (z + c)^{-p}` for elapsed time
/// `z >= 0`; integrates to one over `[0, inf)` for `c > 0`, `p > 1`.
pub fn omori_density<F: Scalar>(z: F, c: F, p: F) -> F {
    debug_assert!(z >= F::zero() && c > F::zero() && p > F::one());
    omori_norm(c, p) * (z + c).powf(-p)
}

/// Fraction of the temporal decay mass beyond elapsed time `z`:
/// `c^(p-1) / (z + c)^(p-1)`. Equals one at `z = 0`.
pub fn omori_tail_mass<F: Scalar>(z: F, c: F, p: F) -> F {
    debug_assert!(z >= F::zero() && c > F::zero() && p > F::one());
    (c / (z + c)).powf(p - F::one())
}

/// `K_s = (q-1) d^(q-1) / pi`.
pub fn spatial_norm<F: Scalar>(d: F, q: F) -> F {
    (q - F::one()) * d.powf(q - F::one()) / F::PI()
}

/// Normalised spatial decay density `K_s (dx^2 + dy^2 + d)^{-q}`; integrates
/// to one over the plane for `d > 0`, `q > 1`.
pub fn spatial_density<F: Scalar>(dx: F, dy: F, d: F, q: F) -> F {
    debug_assert!(d > F::zero() && q > F::one());
    spatial_norm(d, q) * (dx * dx + dy * dy + d).powf(-q)
}

/// Magnitude productivity multiplier `exp(alpha (m - m0))`.
pub fn productivity<F: Scalar>(m: F, m0: F, alpha: F) -> F {
    debug_assert!(m >= m0);
    (alpha * (m - m0)).exp()
}

/// Conditional intensity at `(t, x, y)` split into its background part and
/// the contribution of every earlier event.
#[derive(Clone, Debug)]
pub struct IntensityBreakdown<F = f64> {
    pub background: F,
    pub triggered: Vec<F>,
    pub total: F,
}

/// Evaluates the conditional intensity at a point given the events strictly
/// before `t`. `history` must be time-ordered with every time below `t`.
pub fn conditional_intensity<F: Scalar>(
    t: F,
    x: F,
    y: F,
    history: &[Event<F>],
    params: &EtasParams<F>,
    phi: &BackgroundDensity<F>,
    m0: F,
) -> IntensityBreakdown<F> {
    debug_assert!(history.iter().all(|ev| ev.t < t));
    let background = params.mu_bar * phi.density(x, y);
    let k_r = params.omori_norm();
    let k_s = params.spatial_norm();
    let triggered: Vec<F> = history
        .iter()
        .map(|ev| {
            let dx = x - ev.x;
            let dy = y - ev.y;
            params.k_bar
                * productivity(ev.m, m0, params.alpha)
                * (k_r * (t - ev.t + params.c).powf(-params.p))
                * (k_s * (dx * dx + dy * dy + params.d).powf(-params.q))
        })
        .collect();
    let total = background + triggered.iter().copied().sum();
    IntensityBreakdown {
        background,
        triggered,
        total,
    }
}

/// Per-parameter quantities hoisted out of the O(n^2) likelihood loops.
pub(crate) struct KernelCache<F> {
    pub k_bar: F,
    pub c: F,
    pub neg_p: F,
    pub d: F,
    pub neg_q: F,
    pub k_r: F,
    pub k_s: F,
    /// `exp(alpha (m_j - m0))` per event.
    pub boost: Vec<F>,
}

impl<F: Scalar> KernelCache<F> {
    pub fn new(events: &[Event<F>], params: &EtasParams<F>, m0: F) -> Self {
        KernelCache {
            k_bar: params.k_bar,
            c: params.c,
            neg_p: -params.p,
            d: params.d,
            neg_q: -params.q,
            k_r: params.omori_norm(),
            k_s: params.spatial_norm(),
            boost: events
                .iter()
                .map(|ev| productivity(ev.m, m0, params.alpha))
                .collect(),
        }
    }

    /// Triggering rate contributed by event `j` at `(t, x, y)`.
    #[inline]
    pub fn trigger(&self, j: usize, parent: &Event<F>, t: F, x: F, y: F) -> F {
        let dx = x - parent.x;
        let dy = y - parent.y;
        self.k_bar
            * self.boost[j]
            * self.k_r
            * (t - parent.t + self.c).powf(self.neg_p)
            * self.k_s
            * (dx * dx + dy * dy + self.d).powf(self.neg_q)
    }
}

/// Log-likelihood over the full observation window `[0, t_end]`.
///
/// Returns negative infinity when some event has exactly zero intensity
/// (a zero background density at an event that no earlier event can
/// trigger). Strictly positive intensities that underflow are floored at the
/// smallest positive normal value before taking the log; the floored count
/// is available through [`log_likelihood_diag`].
pub fn log_likelihood<F: Scalar>(
    catalog: &Catalog<F>,
    params: &EtasParams<F>,
    phi: &BackgroundDensity<F>,
) -> F {
    log_likelihood_diag(catalog, params, phi).0
}

/// As [`log_likelihood`], also reporting how many event intensities had to
/// be floored before the log.
pub fn log_likelihood_diag<F: Scalar>(
    catalog: &Catalog<F>,
    params: &EtasParams<F>,
    phi: &BackgroundDensity<F>,
) -> (F, usize) {
    window_log_likelihood_diag(
        catalog.events(),
        F::zero(),
        catalog.t_end(),
        catalog.m0(),
        params,
        phi,
    )
}

/// Log-likelihood of the events inside the window `[t_start, t_end)` given
/// the full event list (events before `t_start` act as triggering history
/// only; the compensator is integrated over the window only).
///
/// `events` must be time-ordered and contain both the history and the
/// in-window events; entries at or beyond `t_end` are ignored.
pub fn window_log_likelihood<F: Scalar>(
    events: &[Event<F>],
    t_start: F,
    t_end: F,
    m0: F,
    params: &EtasParams<F>,
    phi: &BackgroundDensity<F>,
) -> F {
    window_log_likelihood_diag(events, t_start, t_end, m0, params, phi).0
}

pub fn window_log_likelihood_diag<F: Scalar>(
    events: &[Event<F>],
    t_start: F,
    t_end: F,
    m0: F,
    params: &EtasParams<F>,
    phi: &BackgroundDensity<F>,
) -> (F, usize) {
    let cache = KernelCache::new(events, params, m0);
    let pm1 = params.p - F::one();
    let mut floored = 0usize;
    let mut sum_log = F::zero();
    let mut compensator = params.mu_bar * (t_end - t_start);

    for (i, ev) in events.iter().enumerate() {
        if ev.t >= t_end {
            break;
        }
        if ev.t >= t_start {
            let mut lambda = params.mu_bar * phi.density(ev.x, ev.y);
            for (j, parent) in events[..i].iter().enumerate() {
                lambda = lambda + cache.trigger(j, parent, ev.t, ev.x, ev.y);
            }
            if lambda == F::zero() {
                return (F::neg_infinity(), floored);
            }
            if lambda < F::min_positive_value() {
                lambda = F::min_positive_value();
                floored += 1;
            }
            sum_log = sum_log + lambda.ln();
        }
        // Expected offspring of event j landing inside the window.
        let z_from = (t_start - ev.t).max(F::zero());
        let z_to = (t_end - ev.t).max(F::zero());
        let mass = (params.c / (z_from + params.c)).powf(pm1)
            - (params.c / (z_to + params.c)).powf(pm1);
        compensator = compensator + params.k_bar * cache.boost[i] * mass.max(F::zero());
    }

    (sum_log - compensator, floored)
}

/// Log-likelihood conditioned on a branching assignment: immigrants factor
/// through the background process, each offspring through its parent's
/// normalised kernels, and every event carries the compensator for its own
/// expected offspring inside the window.
pub fn branched_log_likelihood<F: Scalar>(
    catalog: &Catalog<F>,
    params: &EtasParams<F>,
    phi: &BackgroundDensity<F>,
    branching: &BranchingVector,
) -> F {
    let events = catalog.events();
    assert_eq!(
        branching.len(),
        events.len(),
        "branching vector must match the catalog"
    );
    debug_assert!(branching.is_valid());
    let t_end = catalog.t_end();
    let m0 = catalog.m0();
    let cache = KernelCache::new(events, params, m0);
    let ln_mu = params.mu_bar.ln();
    let ln_k_bar = params.k_bar.ln();
    let ln_k_r = cache.k_r.ln();
    let ln_k_s = cache.k_s.ln();

    let mut ll = -params.mu_bar * t_end;
    for (i, ev) in events.iter().enumerate() {
        match branching.parent_of(i) {
            None => {
                let density = phi.density(ev.x, ev.y);
                if density == F::zero() {
                    return F::neg_infinity();
                }
                ll = ll + ln_mu + density.max(F::min_positive_value()).ln();
            }
            Some(j) => {
                let parent = &events[j];
                let dt = ev.t - parent.t;
                let dx = ev.x - parent.x;
                let dy = ev.y - parent.y;
                debug_assert!(dt > F::zero());
                ll = ll + ln_k_bar + cache.boost[j].ln();
                ll = ll + ln_k_r - params.p * (dt + params.c).ln();
                ll = ll + ln_k_s - params.q * (dx * dx + dy * dy + params.d).ln();
            }
        }
        // Poisson no-extra-offspring factor for event i as a parent.
        let remaining = (t_end - ev.t).max(F::zero());
        let mass = F::one() - omori_tail_mass(remaining, params.c, params.p);
        ll = ll - params.k_bar * cache.boost[i] * mass.max(F::zero());
    }
    ll
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::BackgroundDensity;
    use crate::catalog::Region;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn region() -> Region {
        Region::new(0.0, 4.0, 0.0, 6.0).unwrap()
    }

    fn tohoku(mu_bar: f64) -> EtasParams {
        EtasParams::new(mu_bar, 0.322, 1.407, 0.0353, 1.121, 0.0159, 1.531, 10f64.ln()).unwrap()
    }

    #[test]
    fn omori_trivial_values() {
        assert_relative_eq!(omori_density(0.0, 1.0, 2.0), 1.0, max_relative = 1e-14);
        assert_relative_eq!(omori_density(1.0, 1.0, 2.0), 0.25, max_relative = 1e-14);
    }

    #[test]
    fn spatial_trivial_values() {
        let pi = std::f64::consts::PI;
        assert_relative_eq!(spatial_density(0.0, 0.0, 1.0, 2.0), 1.0 / pi, max_relative = 1e-14);
        assert_relative_eq!(
            spatial_density(1.0, 0.0, 1.0, 2.0),
            1.0 / (4.0 * pi),
            max_relative = 1e-14
        );
    }

    #[test]
    fn productivity_values() {
        assert_eq!(productivity(2.5, 2.5, 1.407), 1.0);
        assert_relative_eq!(
            productivity(3.5, 2.5, 1.407),
            1.407f64.exp(),
            max_relative = 1e-14
        );
        assert_eq!(productivity(9.0, 2.5, 0.0), 1.0);
    }

    #[test]
    fn parameter_domain_is_validated() {
        assert!(EtasParams::new(0.3, 0.3, 1.0, -0.1, 2.0, 1.0, 2.0, 2.3).is_err());
        assert!(EtasParams::new(0.3, 0.3, 1.0, 0.1, 1.0, 1.0, 2.0, 2.3).is_err());
        assert!(EtasParams::new(0.3, 0.3, 1.0, 0.1, 2.0, 1.0, 0.9, 2.3).is_err());
        assert!(EtasParams::new(0.0, 0.3, 1.0, 0.1, 2.0, 1.0, 2.0, 2.3).is_err());
    }

    #[test]
    fn intensity_with_empty_history_is_background_only() {
        let params = tohoku(0.325);
        let phi = BackgroundDensity::uniform(region());
        let b = conditional_intensity(1.0, 1.0, 1.0, &[], &params, &phi, 2.0);
        assert!(b.triggered.is_empty());
        assert_relative_eq!(b.total, 0.325 / 24.0, max_relative = 1e-12);
    }

    #[test]
    fn intensity_one_prior_event_matches_hand_formula() {
        // One parent at the completeness magnitude, query one day later at
        // the same place, with the uniform background on a 4 x 6 region.
        let params = tohoku(0.325);
        let phi = BackgroundDensity::uniform(region());
        let history = [Event::new(0.0, 2.0, 0.0, 0.0)];
        let got = conditional_intensity(1.0, 0.0, 0.0, &history, &params, &phi, 2.0);

        let k_r = 0.121 * 0.0353f64.powf(0.121);
        let k_s = 0.531 * 0.0159f64.powf(0.531) / std::f64::consts::PI;
        let expected_trigger =
            0.322 * k_r * (1.0 + 0.0353f64).powf(-1.121) * k_s * 0.0159f64.powf(-1.531);
        assert_relative_eq!(got.background, 0.325 / 24.0, max_relative = 1e-12);
        assert_relative_eq!(got.triggered[0], expected_trigger, max_relative = 1e-12);
        assert_relative_eq!(
            got.total,
            0.325 / 24.0 + expected_trigger,
            max_relative = 1e-12
        );
    }

    #[test]
    fn intensity_is_linear_in_mu_and_k() {
        let params = tohoku(0.325);
        let mut doubled_mu = params;
        doubled_mu.mu_bar *= 2.0;
        let mut doubled_k = params;
        doubled_k.k_bar *= 2.0;
        let phi = BackgroundDensity::uniform(region());
        let history = [
            Event::new(0.0, 3.0, 1.0, 1.0),
            Event::new(0.5, 2.2, 2.0, 1.5),
        ];
        let base = conditional_intensity(1.0, 1.5, 1.2, &history, &params, &phi, 2.0);
        let mu2 = conditional_intensity(1.0, 1.5, 1.2, &history, &doubled_mu, &phi, 2.0);
        let k2 = conditional_intensity(1.0, 1.5, 1.2, &history, &doubled_k, &phi, 2.0);
        assert_relative_eq!(mu2.background, 2.0 * base.background, max_relative = 1e-12);
        for (a, b) in mu2.triggered.iter().zip(&base.triggered) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
        for (a, b) in k2.triggered.iter().zip(&base.triggered) {
            assert_relative_eq!(*a, 2.0 * b, max_relative = 1e-12);
        }
        assert_relative_eq!(k2.background, base.background, max_relative = 1e-12);
    }

    #[test]
    fn single_event_log_likelihood_matches_formula() {
        let params = tohoku(0.325);
        let phi = BackgroundDensity::uniform(region());
        let cat = Catalog::new(vec![Event::new(3.0, 2.8, 1.0, 1.0)], 10.0, 2.0, region()).unwrap();
        let ll = log_likelihood(&cat, &params, &phi);

        let boost = (1.407 * 0.8f64).exp();
        let tail = (0.0353f64 / (10.0 - 3.0 + 0.0353)).powf(0.121);
        let expect = (0.325 / 24.0f64).ln() - 0.325 * 10.0 - 0.322 * boost * (1.0 - tail);
        assert_relative_eq!(ll, expect, max_relative = 1e-12);
    }

    #[test]
    fn zero_k_reduces_to_inhomogeneous_poisson() {
        let mut params = tohoku(0.4);
        params.k_bar = 1e-300; // effectively zero triggering
        let phi = BackgroundDensity::uniform(region());
        let events = vec![
            Event::new(1.0, 2.5, 1.0, 1.0),
            Event::new(4.0, 3.0, 2.0, 3.0),
            Event::new(7.0, 2.1, 3.0, 5.0),
        ];
        let cat = Catalog::new(events, 10.0, 2.0, region()).unwrap();
        let ll = log_likelihood(&cat, &params, &phi);
        let expect = 3.0 * (0.4f64 / 24.0).ln() - 0.4 * 10.0;
        assert_relative_eq!(ll, expect, max_relative = 1e-9);
    }

    #[test]
    fn all_immigrant_branching_matches_formula() {
        let params = tohoku(0.325);
        let phi = BackgroundDensity::uniform(region());
        let events = vec![
            Event::new(1.0, 2.5, 1.0, 1.0),
            Event::new(4.0, 3.0, 2.0, 3.0),
            Event::new(7.0, 2.1, 3.0, 5.0),
        ];
        let cat = Catalog::new(events.clone(), 10.0, 2.0, region()).unwrap();
        let b = BranchingVector::all_immigrants(3);
        let got = branched_log_likelihood(&cat, &params, &phi, &b);

        let mut expect = -0.325 * 10.0 + 3.0 * (0.325f64 / 24.0).ln();
        for ev in &events {
            let boost = (1.407 * (ev.m - 2.0)).exp();
            let tail = (0.0353 / (10.0 - ev.t + 0.0353)).powf(0.121);
            expect -= 0.322 * boost * (1.0 - tail);
        }
        assert_relative_eq!(got, expect, max_relative = 1e-12);
    }

    #[test]
    fn three_event_branched_likelihood_matches_hand_sum() {
        // B = (0, 1, 0): event 2 is an offspring of event 1, event 3 an
        // immigrant.
        let params = EtasParams::new(0.3, 0.2, 1.0, 0.5, 2.0, 0.4, 2.0, 2.3).unwrap();
        let phi = BackgroundDensity::uniform(region());
        let events = vec![
            Event::new(1.0, 2.5, 1.0, 1.0),
            Event::new(2.0, 3.0, 1.5, 1.2),
            Event::new(6.0, 2.1, 3.0, 5.0),
        ];
        let cat = Catalog::new(events.clone(), 10.0, 2.0, region()).unwrap();
        let b = BranchingVector::new(vec![0, 1, 0]).unwrap();
        let got = branched_log_likelihood(&cat, &params, &phi, &b);

        let k_r = omori_norm(0.5, 2.0);
        let k_s = spatial_norm(0.4, 2.0);
        let mut expect = -0.3 * 10.0 + 2.0 * (0.3f64 / 24.0).ln();
        // offspring factor for event 2 with parent event 1
        let boost1 = (1.0 * 0.5f64).exp();
        expect += (0.2 * boost1).ln();
        expect += (k_r * (1.0f64 + 0.5).powf(-2.0)).ln();
        let dist2 = 0.5f64 * 0.5 + 0.2 * 0.2;
        expect += (k_s * (dist2 + 0.4).powf(-2.0)).ln();
        // no-offspring factors for all three events
        for ev in &events {
            let boost = (1.0 * (ev.m - 2.0)).exp();
            let tail = (0.5 / (10.0 - ev.t + 0.5)).powf(1.0);
            expect -= 0.2 * boost * (1.0 - tail);
        }
        assert_relative_eq!(got, expect, max_relative = 1e-12);
    }

    #[test]
    fn relocating_an_event_to_lower_density_lowers_the_likelihood() {
        let params = EtasParams::new(0.3, 0.2, 1.0, 0.5, 2.0, 0.4, 2.0, 2.3).unwrap();
        let phi = BackgroundDensity::uniform(region());
        let near = vec![
            Event::new(1.0, 2.5, 1.0, 1.0),
            Event::new(1.5, 2.2, 1.1, 1.1),
        ];
        let far = vec![
            Event::new(1.0, 2.5, 1.0, 1.0),
            Event::new(1.5, 2.2, 3.9, 5.9),
        ];
        let cat_near = Catalog::new(near, 10.0, 2.0, region()).unwrap();
        let cat_far = Catalog::new(far, 10.0, 2.0, region()).unwrap();
        assert!(
            log_likelihood(&cat_near, &params, &phi) > log_likelihood(&cat_far, &params, &phi)
        );
    }

    #[test]
    fn window_likelihood_ignores_events_beyond_the_window() {
        let params = EtasParams::new(0.3, 0.2, 1.0, 0.5, 2.0, 0.4, 2.0, 2.3).unwrap();
        let phi = BackgroundDensity::uniform(region());
        let events = vec![
            Event::new(1.0, 2.5, 1.0, 1.0),
            Event::new(2.0, 3.0, 1.5, 1.2),
            Event::new(9.0, 2.1, 3.0, 5.0),
        ];
        let a = window_log_likelihood(&events[..2], 0.0, 8.0, 2.0, &params, &phi);
        let b = window_log_likelihood(&events, 0.0, 8.0, 2.0, &params, &phi);
        assert_relative_eq!(a, b, max_relative = 1e-14);
    }

    proptest! {
        #[test]
        fn kernels_are_nonnegative_and_decreasing(
            c in 0.05f64..3.0,
            p in 1.05f64..4.0,
            d in 0.05f64..3.0,
            q in 1.05f64..4.0,
            z in 0.0f64..50.0,
            dz in 0.01f64..10.0,
            r in 0.0f64..10.0,
            dr in 0.01f64..5.0,
        ) {
            let f0 = omori_density(z, c, p);
            let f1 = omori_density(z + dz, c, p);
            prop_assert!(f0 >= 0.0 && f1 >= 0.0);
            prop_assert!(f1 <= f0);
            let s0 = spatial_density(r, 0.0, d, q);
            let s1 = spatial_density(r + dr, 0.0, d, q);
            prop_assert!(s0 >= 0.0 && s1 >= 0.0);
            prop_assert!(s1 <= s0);
        }

        #[test]
        fn tail_mass_complements_the_density_integral(
            c in 0.1f64..2.0,
            p in 1.2f64..3.5,
            z in 0.0f64..20.0,
        ) {
            // d/dz [-tail_mass(z)] = omori_density(z): check by finite differences.
            let h = 1e-5;
            let numeric = -(omori_tail_mass(z + h, c, p) - omori_tail_mass(z, c, p)) / h;
            let analytic = omori_density(z + h / 2.0, c, p);
            prop_assert!((numeric - analytic).abs() <= 1e-3 * analytic.max(1e-12));
        }
    }
}
