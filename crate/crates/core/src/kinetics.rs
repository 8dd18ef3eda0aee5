//! Forward models of photolyase binding to uv-damaged DNA sites.
//!
//! The reaction `P + S -> PS` follows the second-order rate law
//! `d[PS]/dt = k (P0 - [PS]) (S0 - [PS])` from the onset instant `t0`.
//! Two closed forms are provided (the exact integrated solution and the
//! pseudo-first-order limit for `S0 >> P0`) together with two independent
//! oracles: a step-doubling Runge–Kutta integrator and an exact stochastic
//! simulation of molecule counts.
//!
//! Units are fixed throughout: seconds, molar, liters and `M^-1 s^-1`.
//! Dimer formation (~1e-14 s) is treated as instantaneous, so binding starts
//! exactly at `t0`.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{require_positive, Error, Result};

/// Avogadro constant, mol^-1.
pub const AVOGADRO: f64 = 6.022_140_76e23;

/// Concentrations closer than this (relative) use the equal-concentration form.
const DEGENERATE_REL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReactionParams {
    /// Initial free photolyase, M.
    pub p0: f64,
    /// Initial damaged-site concentration, M.
    pub s0: f64,
    /// Second-order rate constant, M^-1 s^-1.
    pub k: f64,
    /// Onset of binding, s.
    pub t0: f64,
}

impl ReactionParams {
    pub fn new(p0: f64, s0: f64, k: f64, t0: f64) -> Result<Self> {
        let params = Self { p0, s0, k, t0 };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("p0", self.p0)?;
        require_positive("s0", self.s0)?;
        require_positive("k", self.k)?;
        if !self.t0.is_finite() {
            return Err(Error::Domain(format!("t0 must be finite, got {}", self.t0)));
        }
        Ok(())
    }

    /// Pseudo-first-order rate constant `S0 k`, s^-1.
    pub fn pseudo_rate(&self) -> f64 {
        self.s0 * self.k
    }

    /// `ln 2 / (S0 k)`.
    pub fn half_life(&self) -> f64 {
        std::f64::consts::LN_2 / self.pseudo_rate()
    }

    /// Upper bound of the complex concentration, `min(P0, S0)`.
    pub fn plateau(&self) -> f64 {
        self.p0.min(self.s0)
    }

    pub fn with_t0(self, t0: f64) -> Self {
        Self { t0, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticsSample {
    pub t: f64,
    pub ps: f64,
}

/// Which closed-form forward model to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KineticModel {
    #[default]
    PseudoFirstOrder,
    SecondOrderExact,
}

impl KineticModel {
    pub fn evaluate(self, params: &ReactionParams, t: f64) -> Result<f64> {
        match self {
            Self::PseudoFirstOrder => ps_pseudo_first_order(params, t),
            Self::SecondOrderExact => ps_second_order_exact(params, t),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Self::PseudoFirstOrder => "pseudo_first",
            Self::SecondOrderExact => "second_exact",
        }
    }
}

impl fmt::Display for KineticModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for KineticModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pseudo_first" => Ok(Self::PseudoFirstOrder),
            "second_exact" => Ok(Self::SecondOrderExact),
            other => Err(Error::Input(format!(
                "unknown model '{other}' (expected pseudo_first or second_exact)"
            ))),
        }
    }
}

fn elapsed(params: &ReactionParams, t: f64) -> Result<Option<f64>> {
    params.validate()?;
    if !t.is_finite() {
        return Err(Error::Domain(format!("time must be finite, got {t}")));
    }
    Ok((t > params.t0).then_some(t - params.t0))
}

/// `P0 (1 - exp(-S0 k (t - t0)))`, zero before onset.
pub fn ps_pseudo_first_order(params: &ReactionParams, t: f64) -> Result<f64> {
    Ok(match elapsed(params, t)? {
        Some(dt) => -params.p0 * (-params.pseudo_rate() * dt).exp_m1(),
        None => 0.0,
    })
}

/// Exact solution of the second-order rate law, zero before onset.
///
/// Written in terms of `m = min(P0, S0)`, `M = max(P0, S0)` and
/// `q = 1 - exp(-(M - m) k dt)` as `m M q / ((M - m) + m q)`, which is the
/// integrated rate law solved for `[PS]` with the exponent kept non-positive.
pub fn ps_second_order_exact(params: &ReactionParams, t: f64) -> Result<f64> {
    let Some(dt) = elapsed(params, t)? else {
        return Ok(0.0);
    };
    let lo = params.p0.min(params.s0);
    let hi = params.p0.max(params.s0);
    let gap = hi - lo;
    if gap <= DEGENERATE_REL * hi {
        let x = lo * params.k * dt;
        return Ok(lo * x / (1.0 + x));
    }
    let q = -(-gap * params.k * dt).exp_m1();
    Ok(lo * hi * q / (gap + lo * q))
}

/// Half-life of the pseudo-first-order approach, `ln 2 / (S0 k)`.
pub fn half_life_pseudo_first(s0: f64, k: f64) -> Result<f64> {
    require_positive("s0", s0)?;
    require_positive("k", k)?;
    Ok(std::f64::consts::LN_2 / (s0 * k))
}

/// Integrates the rate law on `t_grid` with classic RK4 and step doubling.
///
/// Each accepted step satisfies `|y_half - y_full| / 15 <= rel_tol * scale`
/// and is Richardson-extrapolated. Grid points at or before `t0` are zero.
pub fn integrate_ode(
    params: &ReactionParams,
    t_grid: &[f64],
    rel_tol: f64,
) -> Result<Vec<KineticsSample>> {
    params.validate()?;
    if !(rel_tol > 0.0 && rel_tol <= 1e-2) {
        return Err(Error::Input(format!("rel_tol must lie in (0, 1e-2], got {rel_tol}")));
    }
    if t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::Input("time grid contains a non-finite value".into()));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Input("time grid must be strictly increasing".into()));
    }

    let ReactionParams { p0, s0, k, t0 } = *params;
    let rhs = |y: f64| k * (p0 - y) * (s0 - y);
    let rk4 = |y: f64, h: f64| {
        let k1 = rhs(y);
        let k2 = rhs(y + 0.5 * h * k1);
        let k3 = rhs(y + 0.5 * h * k2);
        let k4 = rhs(y + h * k3);
        y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    };

    let floor = rel_tol * 1e-6 * p0.min(s0);
    // |df/dy| <= k (P0 + S0); keeping h below its inverse stays well inside
    // the RK4 stability region, where the step-doubling estimate is reliable.
    let h_max = 1.0 / (k * (p0 + s0));
    let mut h = 1e-3 * h_max;
    let mut t = t0;
    let mut y = 0.0;
    let mut out = Vec::with_capacity(t_grid.len());

    for &target in t_grid {
        if target <= t0 {
            out.push(KineticsSample { t: target, ps: 0.0 });
            continue;
        }
        while t < target {
            let remaining = target - t;
            let last = h >= remaining;
            let step = if last { remaining } else { h };
            let full = rk4(y, step);
            let half = rk4(rk4(y, 0.5 * step), 0.5 * step);
            let err = (half - full).abs() / 15.0;
            let scale = half.abs().max(floor);
            if err <= rel_tol * scale || step < f64::EPSILON * t.abs().max(1.0) {
                y = half + (half - full) / 15.0;
                t = if last { target } else { t + step };
                if err < rel_tol * scale / 32.0 && !last {
                    h = (2.0 * h).min(h_max);
                }
            } else {
                h = 0.5 * step;
            }
        }
        out.push(KineticsSample { t: target, ps: y });
    }
    Ok(out)
}

/// A single stochastic realization of the binding reaction.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticTrajectory {
    pub volume: f64,
    pub seed: u64,
    pub t0: f64,
    /// Initial photolyase and site molecule counts.
    pub initial_counts: (u64, u64),
    /// `(event time, bound count after the event)`.
    pub events: Vec<(f64, u64)>,
}

impl StochasticTrajectory {
    /// Number of bound molecules at time `t`.
    pub fn bound_at(&self, t: f64) -> u64 {
        let idx = self.events.partition_point(|&(te, _)| te <= t);
        if idx == 0 {
            0
        } else {
            self.events[idx - 1].1
        }
    }
}

/// Molecule count for a concentration in a volume, rounded to nearest.
pub fn molecule_count(concentration: f64, volume: f64) -> f64 {
    (concentration * volume * AVOGADRO).round()
}

/// Direct-method Gillespie simulation of `P + S -> PS` up to `t_end`.
pub fn gillespie_simulate(
    params: &ReactionParams,
    volume: f64,
    t_end: f64,
    seed: u64,
) -> Result<StochasticTrajectory> {
    params.validate()?;
    require_positive("volume", volume)?;
    if !t_end.is_finite() || t_end < params.t0 {
        return Err(Error::Input(format!(
            "t_end ({t_end}) must be finite and not before t0 ({})",
            params.t0
        )));
    }
    let n_p = molecule_count(params.p0, volume);
    let n_s = molecule_count(params.s0, volume);
    if n_p < 1.0 || n_s < 1.0 {
        return Err(Error::Input(format!(
            "volume {volume} L holds {n_p} photolyase and {n_s} site molecules; \
             both must round to at least one molecule"
        )));
    }
    if n_p.max(n_s) > u64::MAX as f64 {
        return Err(Error::Input("molecule counts overflow u64".into()));
    }
    let (n_p, n_s) = (n_p as u64, n_s as u64);
    let per_pair = params.k / (AVOGADRO * volume);
    let capacity = n_p.min(n_s);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = Vec::new();
    let mut t = params.t0;
    let mut bound = 0u64;
    while bound < capacity {
        let propensity = per_pair * (n_p - bound) as f64 * (n_s - bound) as f64;
        let wait: f64 = Exp1.sample(&mut rng);
        let next = t + wait / propensity;
        if next > t_end {
            break;
        }
        if next > t {
            t = next;
            bound += 1;
            events.push((t, bound));
        }
    }

    Ok(StochasticTrajectory {
        volume,
        seed,
        t0: params.t0,
        initial_counts: (n_p, n_s),
        events,
    })
}
