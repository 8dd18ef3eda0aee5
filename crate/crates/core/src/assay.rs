//! Virtual aliquot/gel assay.
//!
//! Each aliquot is withdrawn at `t_w` but binding continues until it is
//! applied to the gel, so the operative instant is `t_w + gel_delay`. The gel
//! separates bound and unbound labelled photolyase perfectly; each band is
//! counted with independent Poisson noise whose mean is `counts_per_molar`
//! times the band concentration. Aliquots do not deplete the bulk sample.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{require_positive, Error, Result};
use crate::kinetics::{KineticModel, ReactionParams};
use crate::seed::mix_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct AssayProtocol {
    pub params: ReactionParams,
    pub withdrawal_times: Vec<f64>,
    /// Delay between withdrawal and gel application, s.
    pub gel_delay: f64,
    /// Expected radioactive counts per molar of labelled photolyase.
    pub counts_per_molar: f64,
    pub seed: u64,
}

impl AssayProtocol {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        require_positive("counts_per_molar", self.counts_per_molar)?;
        if !(self.gel_delay.is_finite() && self.gel_delay >= 0.0) {
            return Err(Error::Input(format!("gel_delay must be >= 0, got {}", self.gel_delay)));
        }
        if self.withdrawal_times.iter().any(|t| !t.is_finite()) {
            return Err(Error::Input("withdrawal times must be finite".into()));
        }
        if self.withdrawal_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Input("withdrawal times must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn gel_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.withdrawal_times.iter().map(move |t| t + self.gel_delay)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AliquotMeasurement {
    /// Gel-application instant, s.
    pub gel_time: f64,
    pub bound_counts: u64,
    pub unbound_counts: u64,
    /// Complex concentration inferred from the band counts, M. NaN when
    /// both bands are empty.
    pub ps_estimate: f64,
    pub p0_assumed: f64,
}

impl AliquotMeasurement {
    pub fn from_counts(gel_time: f64, bound: u64, unbound: u64, p0: f64) -> Self {
        Self {
            gel_time,
            bound_counts: bound,
            unbound_counts: unbound,
            ps_estimate: ps_from_counts(bound, unbound, p0).unwrap_or(f64::NAN),
            p0_assumed: p0,
        }
    }

    pub fn total_counts(&self) -> u64 {
        self.bound_counts + self.unbound_counts
    }

    /// Noise-free measurement carrying an exact `ps` with no count data.
    pub fn exact(gel_time: f64, ps: f64, p0: f64) -> Self {
        Self { gel_time, bound_counts: 0, unbound_counts: 0, ps_estimate: ps, p0_assumed: p0 }
    }
}

/// `p0 * bound / (bound + unbound)`.
pub fn ps_from_counts(bound: u64, unbound: u64, p0: f64) -> Result<f64> {
    require_positive("p0", p0)?;
    let total = bound + unbound;
    if total == 0 {
        return Err(Error::Estimation(
            "aliquot has zero counts in both bands; it carries no information".into(),
        ));
    }
    Ok(p0 * bound as f64 / total as f64)
}

/// Expected `(bound, unbound)` counts at a gel time.
pub fn expected_counts(
    params: &ReactionParams,
    model: KineticModel,
    gel_time: f64,
    counts_per_molar: f64,
) -> Result<(f64, f64)> {
    let ps = model.evaluate(params, gel_time)?;
    Ok((counts_per_molar * ps, counts_per_molar * (params.p0 - ps)))
}

fn poisson_draw(mean: f64, rng: &mut ChaCha8Rng) -> Result<u64> {
    if mean <= 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean)
        .map_err(|e| Error::Input(format!("cannot draw Poisson counts with mean {mean}: {e}")))?;
    Ok(dist.sample(rng) as u64)
}

/// Draws Poisson band counts for complexes `ps_values` at `gel_times`.
///
/// Aliquot `i` uses its own stream seeded from `(seed, i)`.
pub fn simulate_counts(
    gel_times: &[f64],
    ps_values: &[f64],
    p0: f64,
    counts_per_molar: f64,
    seed: u64,
) -> Result<Vec<AliquotMeasurement>> {
    if gel_times.len() != ps_values.len() {
        return Err(Error::Input("gel_times and ps_values differ in length".into()));
    }
    require_positive("p0", p0)?;
    require_positive("counts_per_molar", counts_per_molar)?;
    gel_times
        .iter()
        .zip(ps_values)
        .enumerate()
        .map(|(i, (&gel_time, &ps))| {
            let ps = ps.clamp(0.0, p0);
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, i as u64));
            let bound = poisson_draw(counts_per_molar * ps, &mut rng)?;
            let unbound = poisson_draw(counts_per_molar * (p0 - ps), &mut rng)?;
            Ok(AliquotMeasurement::from_counts(gel_time, bound, unbound, p0))
        })
        .collect()
}

pub fn run_assay(protocol: &AssayProtocol, model: KineticModel) -> Result<Vec<AliquotMeasurement>> {
    protocol.validate()?;
    let gel_times: Vec<f64> = protocol.gel_times().collect();
    let ps = gel_times
        .iter()
        .map(|&t| model.evaluate(&protocol.params, t))
        .collect::<Result<Vec<_>>>()?;
    simulate_counts(&gel_times, &ps, protocol.params.p0, protocol.counts_per_molar, protocol.seed)
}

/// `n` withdrawal times evenly spaced in `exp(-S0 k (t - t0))` over
/// `(t0, t0 + horizon_halflives * t_half]`.
pub fn schedule_withdrawals(
    params: &ReactionParams,
    n: usize,
    horizon_halflives: f64,
) -> Result<Vec<f64>> {
    params.validate()?;
    if n < 2 {
        return Err(Error::Input(format!("need at least 2 withdrawals, got {n}")));
    }
    if !(horizon_halflives > 0.0 && horizon_halflives <= 5.0) {
        return Err(Error::Input(format!(
            "horizon_halflives must lie in (0, 5], got {horizon_halflives}"
        )));
    }
    let rate = params.pseudo_rate();
    // total drop in u = exp(-rate dt) across the window
    let span = -(-horizon_halflives * std::f64::consts::LN_2).exp_m1();
    Ok((1..=n)
        .map(|i| {
            let drop = span * i as f64 / n as f64;
            params.t0 - (-drop).ln_1p() / rate
        })
        .collect())
}
