//! Subcommand bodies. Each returns the full output text; `main` decides
//! where it goes.

use std::fmt::Write as _;

use photolyase_core::io::{format_f64, measurements_csv, parse_measurements, trajectory_csv};
use photolyase_core::{
    bootstrap_ci, conversion_fraction, fit_pseudo_first_with, fit_second_order_with, integrate_ode,
    run_assay, schedule_withdrawals, AliquotMeasurement, AssayProtocol, CountingNoise, FitOptions,
    FittedRates, KineticModel, KineticsSample, OpticalParams, PhotonBudgetInput, ReactionParams,
    Weighting,
};

use crate::config::RunConfig;
use crate::error::CliError;

const REACTION_KEYS: [&str; 4] = ["p0", "s0", "k", "t0"];

fn keys(extra: &[&'static str]) -> Vec<&'static str> {
    REACTION_KEYS.iter().chain(extra).copied().collect()
}

fn reaction_params(cfg: &RunConfig) -> Result<ReactionParams, CliError> {
    ReactionParams::new(
        cfg.require("p0")?,
        cfg.require("s0")?,
        cfg.require("k")?,
        cfg.get_or("t0", 0.0)?,
    )
    .map_err(CliError::from_config)
}

fn resolve_seed(cfg: &RunConfig, flag: Option<u64>) -> Result<u64, CliError> {
    match (flag, cfg.get::<u64>("seed")?) {
        (Some(seed), _) | (None, Some(seed)) => Ok(seed),
        (None, None) => Err(CliError::Config("missing required key 'seed' (or pass --seed)".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SimulationModel {
    Closed(KineticModel),
    Ode,
}

pub fn simulate(cfg: &RunConfig) -> Result<String, CliError> {
    cfg.restrict_to(&keys(&["model", "t_start", "t_end", "horizon_halflives", "n_points", "rel_tol"]))?;
    let params = reaction_params(cfg)?;
    let model = match cfg.get::<String>("model")?.as_deref() {
        None => SimulationModel::Closed(KineticModel::default()),
        Some("ode") => SimulationModel::Ode,
        Some(tag) => SimulationModel::Closed(
            tag.parse().map_err(|e| CliError::Config(format!("key 'model': {e}")))?,
        ),
    };
    let n_points: usize = cfg.require("n_points")?;
    if n_points == 0 {
        return Err(CliError::Config("key 'n_points': time grid is empty".into()));
    }
    let t_start = cfg.get_or("t_start", params.t0)?;
    let t_end = match (cfg.get::<f64>("t_end")?, cfg.get::<f64>("horizon_halflives")?) {
        (Some(t), None) => t,
        (None, Some(h)) if h > 0.0 && h.is_finite() => params.t0 + h * params.half_life(),
        (None, Some(h)) => {
            return Err(CliError::Config(format!("key 'horizon_halflives' must be positive, got {h}")))
        }
        _ => {
            return Err(CliError::Config(
                "exactly one of 't_end' or 'horizon_halflives' must be set".into(),
            ))
        }
    };
    if !(t_start.is_finite() && t_end.is_finite()) || (n_points > 1 && t_end <= t_start) {
        return Err(CliError::Config(format!(
            "key 't_end' ({t_end}) must be finite and after t_start ({t_start})"
        )));
    }
    let grid: Vec<f64> = if n_points == 1 {
        vec![t_end]
    } else {
        (0..n_points)
            .map(|i| t_start + (t_end - t_start) * i as f64 / (n_points - 1) as f64)
            .collect()
    };

    let samples = match model {
        SimulationModel::Ode => {
            let rel_tol = cfg.get_or("rel_tol", 1e-8)?;
            integrate_ode(&params, &grid, rel_tol).map_err(CliError::from_config)?
        }
        SimulationModel::Closed(m) => grid
            .iter()
            .map(|&t| Ok(KineticsSample { t, ps: m.evaluate(&params, t)? }))
            .collect::<photolyase_core::Result<Vec<_>>>()
            .map_err(CliError::from_config)?,
    };
    Ok(trajectory_csv(&samples))
}

pub fn budget(cfg: &RunConfig) -> Result<String, CliError> {
    cfg.restrict_to(&[
        "epsilon",
        "path_length",
        "dna_concentration",
        "volume",
        "quantum_yield",
        "gamma_count",
        "uv_multiplication",
        "sites_per_molecule",
    ])?;
    let dna_concentration = cfg.require("dna_concentration")?;
    let input = PhotonBudgetInput {
        optical: OpticalParams {
            epsilon: cfg.require("epsilon")?,
            c_m: dna_concentration,
            path_length: cfg.require("path_length")?,
        },
        gamma_count: cfg.require("gamma_count")?,
        uv_multiplication: cfg.get_or("uv_multiplication", 1e6)?,
        quantum_yield: cfg.require("quantum_yield")?,
        dna_concentration,
        volume: cfg.require("volume")?,
        sites_per_molecule: cfg.get_or("sites_per_molecule", 1.0)?,
    };
    let r = conversion_fraction(&input).map_err(CliError::from_config)?;

    let mut out = String::new();
    let _ = writeln!(out, "# photon budget");
    let _ = writeln!(out, "# absorbance (decadic)     {:.4e}", r.absorbance);
    let _ = writeln!(
        out,
        "# fraction absorbed        {:.4e} ({:.4}%)",
        r.fraction_absorbed,
        100.0 * r.fraction_absorbed
    );
    let _ = writeln!(out, "# uv photons in pulse      {:.4e}", r.uv_photons);
    let _ = writeln!(out, "# dimer sites              {:.4e}", r.total_sites);
    let _ = writeln!(out, "# photons to convert all   {:.4e}", r.required_photons);
    let _ = writeln!(out, "# conversion fraction      {:.4}", r.conversion_fraction);
    for (key, value) in [
        ("absorbance", r.absorbance),
        ("fraction_absorbed", r.fraction_absorbed),
        ("uv_photons", r.uv_photons),
        ("total_sites", r.total_sites),
        ("required_photons", r.required_photons),
        ("conversion_fraction", r.conversion_fraction),
    ] {
        let _ = writeln!(out, "{key}={}", format_f64(value));
    }
    Ok(out)
}

pub fn assay(cfg: &RunConfig, seed_flag: Option<u64>) -> Result<String, CliError> {
    cfg.restrict_to(&keys(&[
        "model",
        "withdrawal_times",
        "n_withdrawals",
        "horizon_halflives",
        "gel_delay",
        "counts_per_molar",
        "seed",
    ]))?;
    let params = reaction_params(cfg)?;
    let model: KineticModel = cfg
        .get::<String>("model")?
        .map(|tag| tag.parse().map_err(|e| CliError::Config(format!("key 'model': {e}"))))
        .transpose()?
        .unwrap_or_default();
    let withdrawal_times = match (cfg.get_list("withdrawal_times")?, cfg.contains("n_withdrawals")) {
        (Some(times), false) => times,
        (None, true) => {
            let n: usize = cfg.require("n_withdrawals")?;
            let horizon: f64 = cfg.require("horizon_halflives")?;
            schedule_withdrawals(&params, n, horizon).map_err(CliError::from_config)?
        }
        _ => {
            return Err(CliError::Config(
                "exactly one of 'withdrawal_times' or 'n_withdrawals' must be set".into(),
            ))
        }
    };
    let protocol = AssayProtocol {
        params,
        withdrawal_times,
        gel_delay: cfg.get_or("gel_delay", 0.0)?,
        counts_per_molar: cfg.require("counts_per_molar")?,
        seed: resolve_seed(cfg, seed_flag)?,
    };
    let measurements = run_assay(&protocol, model).map_err(CliError::from_config)?;
    Ok(measurements_csv(&measurements))
}

#[derive(Debug, Clone, Copy)]
enum FitModel {
    PseudoFirst,
    SecondOrder(Option<f64>),
}

pub fn retrodict(cfg: &RunConfig, csv: &str, seed_flag: Option<u64>) -> Result<String, CliError> {
    cfg.restrict_to(&[
        "p0",
        "s0",
        "model",
        "confidence",
        "n_resamples",
        "counts_per_molar",
        "weighting",
        "seed",
    ])?;
    let p0: f64 = cfg.require("p0")?;
    if !(p0 > 0.0 && p0.is_finite()) {
        return Err(CliError::Config(format!("key 'p0' must be positive, got {p0}")));
    }
    let s0: Option<f64> = cfg.get("s0")?;
    let model = match cfg.get::<String>("model")?.as_deref() {
        None | Some("pseudo_first") if s0.is_none() => FitModel::PseudoFirst,
        None | Some("pseudo_first") => {
            return Err(CliError::Config("key 's0' only applies to model=second_order".into()))
        }
        Some("second_order") => FitModel::SecondOrder(s0),
        Some(other) => {
            return Err(CliError::Config(format!(
                "key 'model': unknown fit model '{other}' (expected pseudo_first or second_order)"
            )))
        }
    };
    let weighting = match cfg.get::<String>("weighting")?.as_deref() {
        None | Some("unweighted") => Weighting::Unweighted,
        Some("poisson") => Weighting::Poisson,
        Some(other) => {
            return Err(CliError::Config(format!(
                "key 'weighting': unknown weighting '{other}' (expected unweighted or poisson)"
            )))
        }
    };
    let confidence: f64 = cfg.get_or("confidence", 0.95)?;
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(CliError::Config(format!("key 'confidence' must lie in (0, 1), got {confidence}")));
    }
    let n_resamples: usize = cfg.get_or("n_resamples", 1000)?;
    if n_resamples < 100 {
        return Err(CliError::Config(format!("key 'n_resamples' must be >= 100, got {n_resamples}")));
    }
    let seed = resolve_seed(cfg, seed_flag)?;

    let measurements =
        parse_measurements(csv, p0).map_err(|e| CliError::Data(e.to_string()))?;
    let noise = match cfg.get::<f64>("counts_per_molar")? {
        Some(c) if c > 0.0 && c.is_finite() => CountingNoise::Poisson { counts_per_molar: c },
        Some(c) => {
            return Err(CliError::Config(format!("key 'counts_per_molar' must be positive, got {c}")))
        }
        None => CountingNoise::infer(&measurements, p0),
    };

    let options = FitOptions { confidence, weighting };
    let fit = |m: &[AliquotMeasurement]| match model {
        FitModel::PseudoFirst => fit_pseudo_first_with(m, p0, &options),
        FitModel::SecondOrder(s0) => fit_second_order_with(m, p0, s0, &options),
    };
    let summary = bootstrap_ci(&measurements, fit, noise, n_resamples, confidence, seed)
        .map_err(CliError::from_estimation)?;
    let base = &summary.base;

    let mut out = String::new();
    let mut line = |key: &str, value: String| {
        let _ = writeln!(out, "{key}={value}");
    };
    line("model", base.model_tag().to_string());
    line("n_points", base.n_points.to_string());
    line("t0_hat", format_f64(base.t0_hat));
    line("rate_hat", format_f64(base.rate_hat()));
    if let FittedRates::SecondOrder { k, s0, .. } = base.rates {
        line("k_hat", format_f64(k));
        line("s0_hat", format_f64(s0));
    }
    line("residual_norm", format_f64(base.residual_norm));
    line("iterations", base.iterations.to_string());
    line("confidence", format_f64(confidence));
    line("ci_t0_low", format_f64(summary.t0().low));
    line("ci_t0_high", format_f64(summary.t0().high));
    line("ci_t0_linear_low", format_f64(base.ci_t0.0));
    line("ci_t0_linear_high", format_f64(base.ci_t0.1));
    for interval in summary.intervals.iter().skip(1) {
        line(&format!("ci_{}_low", interval.name), format_f64(interval.low));
        line(&format!("ci_{}_high", interval.name), format_f64(interval.high));
    }
    match noise {
        CountingNoise::Poisson { counts_per_molar } => {
            line("counts_per_molar", format_f64(counts_per_molar))
        }
        CountingNoise::Noiseless => line("counts_per_molar", "inf".to_string()),
    }
    line("bootstrap_resamples", n_resamples.to_string());
    line("bootstrap_failed", summary.failed.to_string());
    Ok(out)
}
