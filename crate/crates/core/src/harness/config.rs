use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mems::SwitchTiming;
use crate::optics::{AddressingBeam, IonChain, Point2, SteeringGeometry};
use crate::sequencer::{DriftModel, Setup};
use crate::tomo::SpamModel;

/// The committed default configuration.
pub const REFERENCE_CONFIG: &str = include_str!("../../config/paper.json");

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub ion_count: usize,
    pub spacing_um: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamConfig {
    pub waist_um: f64,
    /// One per ion.
    pub scatter_floors: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteeringConfig {
    pub focal_length_mm: f64,
    pub demagnification: f64,
    /// rad / V^2
    pub tilt_gain: f64,
    pub v_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingConfig {
    pub t_m_us: f64,
    pub t_s_us: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpamConfig {
    pub f0: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftConfig {
    pub sigma_rel: f64,
    pub correlation_time_us: f64,
    pub shot_period_us: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig2Config {
    pub pi_time_a_us: f64,
    pub pi_time_b_us: f64,
    pub t_max_us: f64,
    pub shots: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fig3Config {
    pub pi_time_1_us: f64,
    pub pi_time_2_us: f64,
    pub t_start_us: f64,
    pub t_stop_us: f64,
    pub step_us: f64,
    pub shots: usize,
    pub plateau_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaistConfig {
    pub peak_pi_time_us: f64,
    pub with_drift: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table1Config {
    pub peak_pi_time_us: f64,
    pub shots_per_basis: usize,
    pub bootstrap_resamples: usize,
}

/// Everything an experiment run depends on, including the master seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub seed: u64,
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
    pub chain: ChainConfig,
    pub beam: BeamConfig,
    pub steering: SteeringConfig,
    pub timing: TimingConfig,
    pub spam: SpamConfig,
    pub drift: DriftConfig,
    pub fig2: Fig2Config,
    pub fig3: Fig3Config,
    pub waist: WaistConfig,
    pub table1: Table1Config,
}

fn config_err(e: Error) -> Error {
    match e {
        Error::InvalidParameter { .. } | Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

impl ExperimentConfig {
    pub fn reference() -> Self {
        Self::from_json(REFERENCE_CONFIG).expect("committed config is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::ReadFile {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every section against the invariants of the types it builds.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.chain.ion_count != 2 {
            return Err(Error::Config("the experiments address a two-ion chain".into()));
        }
        if self.beam.scatter_floors.len() != self.chain.ion_count {
            return Err(Error::Config("need one scatter floor per ion".into()));
        }
        self.chain().map_err(config_err)?;
        self.beam(1.0).map_err(config_err)?;
        self.geometry().map_err(config_err)?;
        self.switch_timing().map_err(config_err)?;
        self.spam_model().map_err(config_err)?;
        self.drift_model().map_err(config_err)?;
        self.two_ion_setup(1.0).map_err(config_err)?;
        let positive = [
            ("fig2.pi_time_a_us", self.fig2.pi_time_a_us),
            ("fig2.pi_time_b_us", self.fig2.pi_time_b_us),
            ("fig2.t_max_us", self.fig2.t_max_us),
            ("fig3.pi_time_1_us", self.fig3.pi_time_1_us),
            ("fig3.pi_time_2_us", self.fig3.pi_time_2_us),
            ("fig3.step_us", self.fig3.step_us),
            ("waist.peak_pi_time_us", self.waist.peak_pi_time_us),
            ("table1.peak_pi_time_us", self.table1.peak_pi_time_us),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.fig3.t_stop_us > self.fig3.t_start_us) {
            return Err(Error::Config("fig3.t_stop_us must exceed fig3.t_start_us".into()));
        }
        if !(self.fig3.plateau_fraction > 0.0 && self.fig3.plateau_fraction < 1.0) {
            return Err(Error::Config("fig3.plateau_fraction must lie in (0, 1)".into()));
        }
        for (name, n) in [
            ("fig2.shots", self.fig2.shots),
            ("fig3.shots", self.fig3.shots),
            ("table1.shots_per_basis", self.table1.shots_per_basis),
        ] {
            if n == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.table1.bootstrap_resamples < 100 {
            return Err(Error::Config("table1.bootstrap_resamples must be at least 100".into()));
        }
        Ok(())
    }

    /// Overrides every per-point / per-basis shot count.
    pub fn with_shots(mut self, shots: usize) -> Self {
        self.fig2.shots = shots;
        self.fig3.shots = shots;
        self.table1.shots_per_basis = shots;
        self
    }

    pub fn chain(&self) -> Result<IonChain<f64>> {
        IonChain::linear(self.chain.ion_count, self.chain.spacing_um)
    }

    /// Beam with the given peak pi-time, centred at the origin, no floor.
    pub fn beam(&self, peak_pi_time: f64) -> Result<AddressingBeam<f64>> {
        AddressingBeam::new(Point2::origin(), self.beam.waist_um, peak_pi_time, 0.0)
    }

    pub fn geometry(&self) -> Result<SteeringGeometry<f64>> {
        SteeringGeometry::new(self.steering.focal_length_mm, self.steering.demagnification, self.steering.tilt_gain)
    }

    pub fn switch_timing(&self) -> Result<SwitchTiming> {
        SwitchTiming::new(self.timing.t_m_us, self.timing.t_s_us)
    }

    pub fn spam_model(&self) -> Result<SpamModel> {
        SpamModel::new(self.spam.f0, self.spam.f1)
    }

    pub fn drift_model(&self) -> Result<DriftModel> {
        DriftModel::new(self.drift.sigma_rel, self.drift.correlation_time_us, self.drift.shot_period_us)
    }

    /// The chain with one calibrated site per ion.
    pub fn two_ion_setup(&self, peak_pi_time: f64) -> Result<Setup> {
        Setup::new(
            self.chain()?,
            self.beam(peak_pi_time)?,
            self.beam.scatter_floors.clone(),
            self.switch_timing()?,
            &self.geometry()?,
            self.steering.v_max,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_config_round_trips() {
        let cfg = ExperimentConfig::reference();
        let again = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.chain.spacing_um, 7.4);
        assert_eq!(cfg.beam.waist_um, 3.3);
        assert_eq!((cfg.timing.t_m_us, cfg.timing.t_s_us), (0.9, 2.0));
        assert_eq!((cfg.spam.f0, cfg.spam.f1), (0.998, 0.991));
    }

    #[test]
    fn rejects_bad_values() {
        let mut cfg = ExperimentConfig::reference();
        cfg.timing.t_m_us = 3.0;
        assert!(ExperimentConfig::from_json(&cfg.to_json()).is_err());

        let mut cfg = ExperimentConfig::reference();
        cfg.spam.f1 = 0.4;
        assert!(cfg.validate().unwrap_err().is_config_error());

        let mut cfg = ExperimentConfig::reference();
        cfg.chain.spacing_um = 9.0;
        assert!(cfg.validate().is_err(), "beyond actuator range");
    }

    #[test]
    fn seed_is_mandatory() {
        let mut v: serde_json::Value = serde_json::from_str(REFERENCE_CONFIG).unwrap();
        v.as_object_mut().unwrap().remove("seed");
        assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn unknown_fields_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(REFERENCE_CONFIG).unwrap();
        v["chain"]["extra"] = 1.into();
        assert!(matches!(ExperimentConfig::from_json(&v.to_string()), Err(Error::Config(_))));
    }
}
