//! Photon accounting from a γ pulse to photolyase attachment sites.
//!
//! Absorbance is decadic: `A = ε c L` and the absorbed fraction is
//! `1 - 10^-A`. Photon counts are carried as `f64` and rounded only where a
//! count is reported.

use crate::error::{require_positive, Error, Result};
use crate::kinetics::AVOGADRO;

/// Default number of uv photons produced per γ photon in the scintillator.
pub const DEFAULT_UV_MULTIPLICATION: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalParams {
    /// Extinction coefficient, M^-1 cm^-1.
    pub epsilon: f64,
    /// Molar concentration, M.
    pub c_m: f64,
    /// Path length, cm.
    pub path_length: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonBudgetInput {
    pub optical: OpticalParams,
    pub gamma_count: f64,
    pub uv_multiplication: f64,
    pub quantum_yield: f64,
    /// DNA concentration, M.
    pub dna_concentration: f64,
    /// Sample volume, L.
    pub volume: f64,
    pub sites_per_molecule: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonBudgetReport {
    pub absorbance: f64,
    pub fraction_absorbed: f64,
    pub uv_photons: f64,
    pub total_sites: f64,
    pub required_photons: f64,
    pub conversion_fraction: f64,
}

pub fn absorbance(op: &OpticalParams) -> Result<f64> {
    require_positive("epsilon", op.epsilon)?;
    require_positive("c_m", op.c_m)?;
    require_positive("path_length", op.path_length)?;
    Ok(op.epsilon * op.c_m * op.path_length)
}

/// `1 - 10^-A`, accurate for small absorbance.
pub fn fraction_absorbed(absorbance: f64) -> Result<f64> {
    if absorbance.is_nan() || absorbance < 0.0 {
        return Err(Error::Domain(format!("absorbance must be >= 0, got {absorbance}")));
    }
    Ok(-(-absorbance * std::f64::consts::LN_10).exp_m1())
}

pub fn uv_pulse_from_gamma(gamma_count: f64, multiplication: f64) -> Result<f64> {
    for (name, v) in [("gamma_count", gamma_count), ("uv_multiplication", multiplication)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::Domain(format!("{name} must be finite and >= 0, got {v}")));
        }
    }
    Ok(gamma_count * multiplication)
}

/// Number of potential dimer sites, `c V N_A sites`, rounded.
pub fn dimer_sites(c_dna: f64, volume: f64, sites_per_molecule: f64) -> Result<f64> {
    require_positive("dna_concentration", c_dna)?;
    require_positive("volume", volume)?;
    require_positive("sites_per_molecule", sites_per_molecule)?;
    Ok((c_dna * volume * AVOGADRO * sites_per_molecule).round())
}

/// Incident photons needed to convert every site: `ceil(sites / (f φ))`.
pub fn required_photons(total_sites: f64, fraction_absorbed: f64, phi: f64) -> Result<f64> {
    if !(total_sites.is_finite() && total_sites >= 1.0) {
        return Err(Error::Domain(format!("total_sites must be >= 1, got {total_sites}")));
    }
    check_unit_interval("fraction_absorbed", fraction_absorbed)?;
    check_unit_interval("quantum_yield", phi)?;
    Ok((total_sites / (fraction_absorbed * phi)).ceil())
}

fn check_unit_interval(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must lie in (0, 1], got {v}")))
    }
}

pub fn conversion_fraction(input: &PhotonBudgetInput) -> Result<PhotonBudgetReport> {
    let absorbance = absorbance(&input.optical)?;
    let fraction_absorbed = fraction_absorbed(absorbance)?;
    let uv_photons = uv_pulse_from_gamma(input.gamma_count, input.uv_multiplication)?;
    let total_sites = dimer_sites(input.dna_concentration, input.volume, input.sites_per_molecule)?;
    let required_photons = required_photons(total_sites, fraction_absorbed, input.quantum_yield)?;
    let converting = uv_photons * fraction_absorbed * input.quantum_yield;
    Ok(PhotonBudgetReport {
        absorbance,
        fraction_absorbed,
        uv_photons,
        total_sites,
        required_photons,
        conversion_fraction: (converting / total_sites).min(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_optics() -> OpticalParams {
        OpticalParams { epsilon: 1e5, c_m: 1e-10, path_length: 10.0 }
    }

    fn reference_input(gamma_count: f64) -> PhotonBudgetInput {
        PhotonBudgetInput {
            optical: reference_optics(),
            gamma_count,
            uv_multiplication: DEFAULT_UV_MULTIPLICATION,
            quantum_yield: 0.015,
            dna_concentration: 1e-10,
            volume: 1e-4,
            sites_per_molecule: 1.0,
        }
    }

    #[test]
    fn absorbance_values() {
        let a = absorbance(&reference_optics()).unwrap();
        assert!((a - 1e-4).abs() < 1e-19);
        let doubled = absorbance(&OpticalParams { path_length: 20.0, ..reference_optics() }).unwrap();
        assert!((doubled - 2e-4).abs() < 1e-19);
        assert!(absorbance(&OpticalParams { epsilon: 0.0, ..reference_optics() }).is_err());
        assert!(absorbance(&OpticalParams { c_m: 0.0, ..reference_optics() }).is_err());
        assert!(absorbance(&OpticalParams { path_length: 0.0, ..reference_optics() }).is_err());
    }

    #[test]
    fn fraction_values() {
        let f = fraction_absorbed(1e-4).unwrap();
        assert!(((f - 2.3025e-4) / 2.3025e-4).abs() < 5e-3);
        assert_eq!(fraction_absorbed(0.0).unwrap(), 0.0);
        assert_eq!(fraction_absorbed(f64::INFINITY).unwrap(), 1.0);
        assert!(fraction_absorbed(-1e-3).is_err());
        // small-argument accuracy: 1 - 10^-A ~ A ln 10
        let tiny = fraction_absorbed(1e-15).unwrap();
        assert!((tiny / (1e-15 * std::f64::consts::LN_10) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn uv_pulse_values() {
        assert_eq!(uv_pulse_from_gamma(1e9, 1e6).unwrap(), 1e15);
        assert_eq!(uv_pulse_from_gamma(0.0, 1e6).unwrap(), 0.0);
        assert_eq!(uv_pulse_from_gamma(1.0, 1e6).unwrap(), 1e6);
        assert!(uv_pulse_from_gamma(-1.0, 1e6).is_err());
    }

    #[test]
    fn site_counts() {
        let sites = dimer_sites(1e-10, 1e-4, 1.0).unwrap();
        assert_eq!(sites, 6_022_140_760.0);
        assert_eq!(dimer_sites(1e-10, 1e-4, 2.0).unwrap(), 2.0 * sites);
        assert_eq!(dimer_sites(1e-10, 0.5e-4, 1.0).unwrap(), sites / 2.0);
        assert!(dimer_sites(0.0, 1e-4, 1.0).is_err());
    }

    #[test]
    fn required_photon_values() {
        let sites = dimer_sites(1e-10, 1e-4, 1.0).unwrap();
        let f = fraction_absorbed(1e-4).unwrap();
        let req = required_photons(sites, f, 0.015).unwrap();
        assert!((req / 1.74e15 - 1.0).abs() < 0.01);
        assert_eq!(required_photons(sites, 1.0, 1.0).unwrap(), sites);
        let half_phi = required_photons(1e6, 0.5, 0.25).unwrap();
        assert_eq!(half_phi, 2.0 * required_photons(1e6, 0.5, 0.5).unwrap());
        assert!(required_photons(sites, 0.0, 0.015).is_err());
        assert!(required_photons(sites, f, 0.0).is_err());
        assert!(required_photons(0.0, f, 0.015).is_err());
    }

    #[test]
    fn conversion_report() {
        let r = conversion_fraction(&reference_input(1e9)).unwrap();
        assert!((r.conversion_fraction - 0.5735).abs() < 1e-3);
        assert!((r.conversion_fraction - r.uv_photons / r.required_photons).abs() < 1e-9);
        assert_eq!(conversion_fraction(&reference_input(0.0)).unwrap().conversion_fraction, 0.0);

        let exact_gamma = r.required_photons / DEFAULT_UV_MULTIPLICATION;
        let full = conversion_fraction(&reference_input(exact_gamma)).unwrap();
        assert!((full.conversion_fraction - 1.0).abs() < 1e-12);
        assert_eq!(conversion_fraction(&reference_input(1e12)).unwrap().conversion_fraction, 1.0);
    }
}
