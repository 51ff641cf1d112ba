//! Forward simulation through the branching construction, plus
//! posterior-predictive continuation for forecasting.
//!
//! Immigrants arrive as a homogeneous Poisson stream in time with locations
//! from the background density; every event then spawns direct offspring
//! with a Poisson count whose mean is the window-truncated expected
//! productivity, offspring times from the window-truncated time decay via
//! its inverse CDF, and radial offsets from the spatial decay via its
//! inverse CDF. Offspring falling outside the study region are kept, which
//! matches the infinite-space likelihood convention (load the written
//! catalog back with a region filter if a clipped view is wanted).

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::background::{BackgroundDensity, GaussComponent, GaussianMixture};
use crate::catalog::{Catalog, Event, Region};
use crate::error::{EtasError, Result};
use crate::gibbs::BranchingVector;
use crate::kernels::{omori_tail_mass, EtasParams};
use crate::linalg2::{SymMat2, Vec2};
use crate::num::{normal_draw, Scalar};

/// Hard cap on generated events per simulation.
pub const DEFAULT_EVENT_CAP: usize = 1_000_000;

/// A spatial density the simulator can both evaluate and sample from.
#[derive(Clone, Debug)]
pub enum SimDensity<F = f64> {
    Background(BackgroundDensity<F>),
    FaultLine(FaultLine<F>),
}

impl<F: Scalar> SimDensity<F> {
    pub fn density(&self, x: F, y: F) -> F {
        match self {
            SimDensity::Background(phi) => phi.density(x, y),
            SimDensity::FaultLine(fault) => fault.density(x, y),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (F, F) {
        match self {
            SimDensity::Background(phi) => phi.sample(rng),
            SimDensity::FaultLine(fault) => fault.sample(rng),
        }
    }
}

/// Events spread uniformly along a noisy line segment: x uniform over its
/// range, y normal around `intercept + slope * x`.
#[derive(Clone, Copy, Debug)]
pub struct FaultLine<F = f64> {
    pub intercept: F,
    pub slope: F,
    pub noise_sd: F,
    pub x_range: (F, F),
}

impl<F: Scalar> FaultLine<F> {
    pub fn density(&self, x: F, y: F) -> F {
        if x < self.x_range.0 || x > self.x_range.1 {
            return F::zero();
        }
        let width = self.x_range.1 - self.x_range.0;
        let resid = y - (self.intercept + self.slope * x);
        let var = self.noise_sd * self.noise_sd;
        let gauss = (-(resid * resid) / (F::of(2.0) * var)).exp()
            / (self.noise_sd * F::TAU().sqrt());
        gauss / width
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (F, F) {
        let x = self.x_range.0 + (self.x_range.1 - self.x_range.0) * F::unit_open(rng);
        let y = normal_draw(self.intercept + self.slope * x, self.noise_sd, rng);
        (x, y)
    }
}

/// The three synthetic benchmark background densities, by their external
/// names: `phi1` a standard bivariate normal, `phi2` an equal mixture of two
/// normals at (-1,-1) and (1,1) with per-axis standard deviation 0.4, and
/// `phi3` a noisy fault line `y = 1 + 2x` over x in (-2, 2).
pub fn make_synthetic_phi<F: Scalar>(name: &str) -> Result<SimDensity<F>> {
    match name {
        "phi1" => {
            let comp = GaussComponent::new(F::one(), Vec2::zero(), SymMat2::identity())?;
            Ok(SimDensity::Background(BackgroundDensity::Mixture(
                GaussianMixture::new(vec![comp])?,
            )))
        }
        "phi2" => {
            let half = F::of(0.5);
            let sd = F::of(0.4);
            let cov = SymMat2::diag(sd * sd, sd * sd);
            let a = GaussComponent::new(half, Vec2::new(F::of(-1.0), F::of(-1.0)), cov)?;
            let b = GaussComponent::new(half, Vec2::new(F::one(), F::one()), cov)?;
            Ok(SimDensity::Background(BackgroundDensity::Mixture(
                GaussianMixture::new(vec![a, b])?,
            )))
        }
        "phi3" => Ok(SimDensity::FaultLine(FaultLine {
            intercept: F::one(),
            slope: F::of(2.0),
            noise_sd: F::of(0.5),
            x_range: (F::of(-2.0), F::of(2.0)),
        })),
        other => Err(EtasError::InvalidParameter(format!(
            "unknown synthetic density `{other}`; valid names: phi1, phi2, phi3"
        ))),
    }
}

/// Everything needed to simulate one catalog.
#[derive(Clone, Debug)]
pub struct SimulationSpec<F = f64> {
    pub params: EtasParams<F>,
    pub phi: SimDensity<F>,
    pub region: Region<F>,
    pub t_end: F,
    pub m0: F,
    pub seed: u64,
    pub max_events: usize,
}

impl<F: Scalar> SimulationSpec<F> {
    pub fn new(
        params: EtasParams<F>,
        phi: SimDensity<F>,
        region: Region<F>,
        t_end: F,
        m0: F,
        seed: u64,
    ) -> Self {
        SimulationSpec {
            params,
            phi,
            region,
            t_end,
            m0,
            seed,
            max_events: DEFAULT_EVENT_CAP,
        }
    }
}

/// A simulated catalog together with the generating branching structure
/// (entry 0 = immigrant, j = 1-based parent index in the sorted catalog).
#[derive(Clone, Debug)]
pub struct SimulatedCatalog<F = f64> {
    pub catalog: Catalog<F>,
    pub true_branching: BranchingVector,
}

/// Inverse CDF of the window-truncated time decay on `(z1, z2]`: pass
/// `z1 = 0` for the usual truncation to the remaining window.
pub fn omori_interval_draw<F: Scalar>(u: F, c: F, p: F, z1: F, z2: F) -> F {
    debug_assert!(z1 >= F::zero() && z2 > z1);
    let a = omori_tail_mass(z1, c, p);
    let b = omori_tail_mass(z2, c, p);
    let target = a - u * (a - b);
    let exponent = -(F::one() / (p - F::one()));
    c * target.powf(exponent) - c
}

/// Inverse CDF of the radial offset law `P(R <= r) = 1 - (d/(r^2+d))^(q-1)`.
pub fn radial_offset_draw<F: Scalar>(u: F, d: F, q: F) -> F {
    let exponent = -(F::one() / (q - F::one()));
    (d * ((F::one() - u).powf(exponent) - F::one())).sqrt()
}

struct RawEvent<F> {
    t: F,
    m: F,
    x: F,
    y: F,
    /// 0 = immigrant, otherwise 1-based index into the raw list.
    parent: usize,
}

/// Simulates one catalog with the spec's own seed.
pub fn simulate_catalog<F: Scalar>(spec: &SimulationSpec<F>) -> Result<SimulatedCatalog<F>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    simulate_catalog_with_rng(spec, &mut rng)
}

/// Simulates one catalog drawing randomness from the given stream.
pub fn simulate_catalog_with_rng<F: Scalar, R: Rng + ?Sized>(
    spec: &SimulationSpec<F>,
    rng: &mut R,
) -> Result<SimulatedCatalog<F>> {
    let params = &spec.params;
    params.validate()?;
    if !params.is_subcritical() {
        return Err(EtasError::Unstable(format!(
            "branching ratio {} is not below 1",
            params.branching_ratio()
        )));
    }
    if !(spec.t_end > F::zero()) {
        return Err(EtasError::InvalidParameter(
            "simulation window length must be positive".to_string(),
        ));
    }

    let mut raw: Vec<RawEvent<F>> = Vec::new();
    let n_immigrants = F::sample_poisson(params.mu_bar * spec.t_end, rng) as usize;
    if n_immigrants > spec.max_events {
        return Err(EtasError::EventCapExceeded {
            cap: spec.max_events,
        });
    }
    for _ in 0..n_immigrants {
        let t = F::unit_open(rng) * spec.t_end;
        let (x, y) = spec.phi.sample(rng);
        let m = spec.m0 + F::std_exp(rng) / params.beta_gr;
        raw.push(RawEvent {
            t,
            m,
            x,
            y,
            parent: 0,
        });
    }

    // Offspring cascade, processed in insertion order; parents always sit
    // before their children in the raw list.
    let mut cursor = 0usize;
    while cursor < raw.len() {
        let (t_parent, m_parent, x_parent, y_parent) = {
            let ev = &raw[cursor];
            (ev.t, ev.m, ev.x, ev.y)
        };
        let remaining = spec.t_end - t_parent;
        let boost = (params.alpha * (m_parent - spec.m0)).exp();
        let mass = (F::one() - omori_tail_mass(remaining, params.c, params.p)).max(F::zero());
        let mean = params.k_bar * boost * mass;
        let n_offspring = F::sample_poisson(mean, rng) as usize;
        if raw.len() + n_offspring > spec.max_events {
            return Err(EtasError::EventCapExceeded {
                cap: spec.max_events,
            });
        }
        let parent_id = cursor + 1;
        for _ in 0..n_offspring {
            let dt = omori_interval_draw(F::unit_open(rng), params.c, params.p, F::zero(), remaining);
            let r = radial_offset_draw(F::unit_open(rng), params.d, params.q);
            let angle = F::unit_open(rng) * F::TAU();
            let m = spec.m0 + F::std_exp(rng) / params.beta_gr;
            raw.push(RawEvent {
                t: t_parent + dt,
                m,
                x: x_parent + r * angle.cos(),
                y: y_parent + r * angle.sin(),
                parent: parent_id,
            });
        }
        cursor += 1;
    }

    // Sort by time; children are generated after their parents, so a stable
    // sort keeps every parent ahead of its children even at equal times.
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| raw[a].t.partial_cmp(&raw[b].t).expect("finite times"));
    let mut new_pos = vec![0usize; raw.len()];
    for (pos, &old) in order.iter().enumerate() {
        new_pos[old] = pos;
    }
    let events: Vec<Event<F>> = order
        .iter()
        .map(|&i| Event::new(raw[i].t, raw[i].m, raw[i].x, raw[i].y))
        .collect();
    let branching: Vec<usize> = order
        .iter()
        .map(|&i| match raw[i].parent {
            0 => 0,
            pid => new_pos[pid - 1] + 1,
        })
        .collect();

    let catalog = Catalog::new(events, spec.t_end, spec.m0, spec.region)?;
    let true_branching = BranchingVector::new(branching)?;
    Ok(SimulatedCatalog {
        catalog,
        true_branching,
    })
}

/// Simulates the continuation of a history onto the horizon `[t_from, t_to)`
/// under one posterior draw: offspring of historical events restricted to
/// the horizon, fresh immigrants, and the full offspring cascade of
/// everything new.
pub fn simulate_forecast<F: Scalar, R: Rng + ?Sized>(
    history: &Catalog<F>,
    params: &EtasParams<F>,
    phi: &BackgroundDensity<F>,
    horizon: (F, F),
    rng: &mut R,
) -> Result<Vec<Event<F>>> {
    let (t_from, t_to) = horizon;
    params.validate()?;
    if t_from < history.t_end() {
        return Err(EtasError::InvalidWindow(format!(
            "forecast horizon must start at or after the history window end {}, got {t_from}",
            history.t_end()
        )));
    }
    if t_to < t_from {
        return Err(EtasError::InvalidWindow(
            "forecast horizon end precedes its start".to_string(),
        ));
    }
    if !params.is_subcritical() {
        return Err(EtasError::Unstable(format!(
            "branching ratio {} is not below 1",
            params.branching_ratio()
        )));
    }
    let cap = DEFAULT_EVENT_CAP;
    let mut out: Vec<Event<F>> = Vec::new();
    if t_to == t_from {
        return Ok(out);
    }

    // Offspring of historical events landing in the horizon.
    for ev in history.events() {
        let z1 = t_from - ev.t;
        let z2 = t_to - ev.t;
        let boost = (params.alpha * (ev.m - history.m0())).exp();
        let mass =
            omori_tail_mass(z1, params.c, params.p) - omori_tail_mass(z2, params.c, params.p);
        let n = F::sample_poisson(params.k_bar * boost * mass.max(F::zero()), rng) as usize;
        if out.len() + n > cap {
            return Err(EtasError::EventCapExceeded { cap });
        }
        for _ in 0..n {
            let dt = omori_interval_draw(F::unit_open(rng), params.c, params.p, z1, z2);
            let r = radial_offset_draw(F::unit_open(rng), params.d, params.q);
            let angle = F::unit_open(rng) * F::TAU();
            out.push(Event::new(
                ev.t + dt,
                history.m0() + F::std_exp(rng) / params.beta_gr,
                ev.x + r * angle.cos(),
                ev.y + r * angle.sin(),
            ));
        }
    }

    // Fresh immigrants on the horizon.
    let n_imm = F::sample_poisson(params.mu_bar * (t_to - t_from), rng) as usize;
    if out.len() + n_imm > cap {
        return Err(EtasError::EventCapExceeded { cap });
    }
    for _ in 0..n_imm {
        let t = t_from + F::unit_open(rng) * (t_to - t_from);
        let (x, y) = phi.sample(rng);
        out.push(Event::new(
            t,
            history.m0() + F::std_exp(rng) / params.beta_gr,
            x,
            y,
        ));
    }

    // Cascade of the new events inside the horizon.
    let mut cursor = 0usize;
    while cursor < out.len() {
        let parent = out[cursor];
        let remaining = t_to - parent.t;
        let boost = (params.alpha * (parent.m - history.m0())).exp();
        let mass = (F::one() - omori_tail_mass(remaining, params.c, params.p)).max(F::zero());
        let n = F::sample_poisson(params.k_bar * boost * mass, rng) as usize;
        if out.len() + n > cap {
            return Err(EtasError::EventCapExceeded { cap });
        }
        for _ in 0..n {
            let dt =
                omori_interval_draw(F::unit_open(rng), params.c, params.p, F::zero(), remaining);
            let r = radial_offset_draw(F::unit_open(rng), params.d, params.q);
            let angle = F::unit_open(rng) * F::TAU();
            out.push(Event::new(
                parent.t + dt,
                history.m0() + F::std_exp(rng) / params.beta_gr,
                parent.x + r * angle.cos(),
                parent.y + r * angle.sin(),
            ));
        }
        cursor += 1;
    }

    out.sort_by(|a, b| a.t.partial_cmp(&b.t).expect("finite times"));
    Ok(out)
}

/// Writes the generating branching structure as `child_index,parent_index`
/// rows (1-based child positions, parent 0 = immigrant).
pub fn write_branching_csv<P: AsRef<Path>>(
    branching: &BranchingVector,
    path: P,
) -> Result<()> {
    let path_str = path.as_ref().display().to_string();
    let io_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => EtasError::Io {
            path: path_str.clone(),
            source: io,
        },
        other => EtasError::MalformedRow {
            path: path_str.clone(),
            line: 0,
            message: format!("{other:?}"),
        },
    };
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(&io_err)?;
    w.write_record(["child_index", "parent_index"])
        .map_err(&io_err)?;
    for (i, &parent) in branching.values().iter().enumerate() {
        w.write_record([(i + 1).to_string(), parent.to_string()])
            .map_err(&io_err)?;
    }
    w.flush().map_err(|e| EtasError::Io {
        path: path_str.clone(),
        source: e,
    })?;
    Ok(())
}
