//! JSON experiment configuration in the units of the parameter table
//! (µrad, km, cm, mW, nm, photons/bit). Every key is optional and defaults
//! to the reference link.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adversary::DeviationGrid;
use crate::beam::LinkParams;
use crate::dmp::AngleGrid;
use crate::error::{invalid, Error, Result};
use crate::robust::SolverConfig;
use crate::uncertainty::{SamplerKind, UncertaintySpec, DEFAULT_MAX_ATTEMPTS};

const MURAD: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `[alpha, omega]`.
    pub divergence_angle_murad: [f64; 2],
    pub distance_km: f64,
    pub detector_radius_cm: f64,
    pub transmit_power_mw: f64,
    pub optical_efficiency: f64,
    pub wavelength_nm: f64,
    pub receiver_sensitivity_photons_per_bit: f64,
    /// Horizons of the worst-case sweep.
    pub time_slots: Vec<usize>,
    /// Horizon of `solve`.
    pub solve_time_slots: usize,
    /// Horizon of `montecarlo`.
    pub monte_carlo_time_slots: usize,
    pub d_gap_murad: f64,
    /// Budget as a fraction of `T * d_gap`; ignored when `d_total_murad` is set.
    pub d_total_fraction: f64,
    /// Fixed budget for every horizon.
    pub d_total_murad: Option<f64>,
    pub epsilon_gbps: f64,
    pub max_iterations: usize,
    pub angle_intervals: usize,
    pub refine_factor: usize,
    /// Adversary grid step; `d_gap / 10` when absent.
    pub deviation_step_murad: Option<f64>,
    pub monte_carlo_count: usize,
    pub seed: u64,
    pub max_attempts: u64,
    pub sampler: SamplerKind,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            divergence_angle_murad: [0.01, 1000.0],
            distance_km: 40.0,
            detector_radius_cm: 15.0,
            transmit_power_mw: 70.0,
            optical_efficiency: 0.01,
            wavelength_nm: 850.0,
            receiver_sensitivity_photons_per_bit: 100.0,
            time_slots: vec![6, 8, 10, 12, 14],
            solve_time_slots: 8,
            monte_carlo_time_slots: 10,
            d_gap_murad: 1.0,
            d_total_fraction: 0.4,
            d_total_murad: None,
            epsilon_gbps: 1e-4,
            max_iterations: 50,
            angle_intervals: 5000,
            refine_factor: 100,
            deviation_step_murad: None,
            monte_carlo_count: 1000,
            seed: 0,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            sampler: SamplerKind::Rejection,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let [alpha, omega] = self.divergence_angle_murad;
        if !(alpha > 0.0 && omega > alpha && omega.is_finite()) {
            return Err(invalid(
                "divergence_angle_murad",
                format!("need 0 < alpha < omega, got [{alpha}, {omega}]"),
            ));
        }
        if self.time_slots.is_empty() {
            return Err(invalid("time_slots", "must not be empty"));
        }
        if self.time_slots.contains(&0) {
            return Err(invalid("time_slots", "entries must be at least 1"));
        }
        for (name, v) in [
            ("solve_time_slots", self.solve_time_slots),
            ("monte_carlo_time_slots", self.monte_carlo_time_slots),
            ("max_iterations", self.max_iterations),
            ("angle_intervals", self.angle_intervals),
            ("monte_carlo_count", self.monte_carlo_count),
        ] {
            if v < 1 {
                return Err(invalid(name, "must be at least 1"));
            }
        }
        if self.max_attempts < 1 {
            return Err(invalid("max_attempts", "must be at least 1"));
        }
        if !(self.epsilon_gbps.is_finite() && self.epsilon_gbps > 0.0) {
            return Err(invalid(
                "epsilon_gbps",
                format!("must be positive, got {}", self.epsilon_gbps),
            ));
        }
        if self.d_total_murad.is_none()
            && !(self.d_total_fraction > 0.0 && self.d_total_fraction < 1.0)
        {
            return Err(invalid(
                "d_total_fraction",
                format!("must lie in (0, 1), got {}", self.d_total_fraction),
            ));
        }
        self.link()?;
        let mut horizons = self.time_slots.clone();
        horizons.extend([self.solve_time_slots, self.monte_carlo_time_slots]);
        for t in horizons {
            self.solver_config(t)?;
        }
        Ok(())
    }

    pub fn link(&self) -> Result<LinkParams> {
        LinkParams::new(
            self.distance_km * 1e3,
            self.detector_radius_cm * 1e-2,
            self.transmit_power_mw * 1e-3,
            self.optical_efficiency,
            self.wavelength_nm * 1e-9,
            self.receiver_sensitivity_photons_per_bit,
        )
        .map_err(|e| {
            rename(
                e,
                &[
                    ("distance", "distance_km"),
                    ("detector_radius", "detector_radius_cm"),
                    ("tx_power", "transmit_power_mw"),
                    ("wavelength", "wavelength_nm"),
                    ("photons_per_bit", "receiver_sensitivity_photons_per_bit"),
                ],
            )
        })
    }

    pub fn angle_grid(&self) -> Result<AngleGrid> {
        let [alpha, omega] = self.divergence_angle_murad;
        AngleGrid::from_microrad(alpha, omega, self.angle_intervals)
    }

    /// Uncertainty set for horizon `slots`.
    pub fn spec_for(&self, slots: usize) -> Result<UncertaintySpec> {
        let d_gap = self.d_gap_murad * MURAD;
        let (spec, key) = match self.d_total_murad {
            Some(total) => (
                UncertaintySpec::new(slots, d_gap, total * MURAD),
                "d_total_murad",
            ),
            None => (
                UncertaintySpec::with_budget_fraction(slots, d_gap, self.d_total_fraction),
                "d_total_fraction",
            ),
        };
        spec.map_err(|e| rename(e, &[("d_gap", "d_gap_murad"), ("d_total", key)]))
    }

    pub fn solver_config(&self, slots: usize) -> Result<SolverConfig> {
        let spec = self.spec_for(slots)?;
        let grid = match self.deviation_step_murad {
            Some(step) => DeviationGrid::new(&spec, step * MURAD),
            None => DeviationGrid::default_for(&spec),
        }
        .map_err(|e| rename(e, &[("deviation_step", "deviation_step_murad")]))?;
        Ok(SolverConfig::new(
            self.link()?,
            spec,
            self.angle_grid()?,
            grid,
            self.epsilon_gbps * 1e9,
            self.max_iterations,
        )?
        .with_refine_factor(self.refine_factor))
    }
}

fn rename(e: Error, map: &[(&str, &'static str)]) -> Error {
    match e {
        Error::InvalidParameter { name, reason } => {
            let name = map
                .iter()
                .find(|(from, _)| *from == name)
                .map_or(name, |&(_, to)| to);
            Error::InvalidParameter { name, reason }
        }
        other => other,
    }
}
