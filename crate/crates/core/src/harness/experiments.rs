use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::optics::{crosstalk_from_populations, estimate_waist, IonChain, Point2, WaistEstimate};
use crate::rng::{streams, substream_seed};
use crate::sequencer::{
    analyze_switching, evolve, fit_crosstalk, parked_pulse_schedule, run_rabi_scan, run_switching_scan, DriftModel,
    IonCurve, Setup, SwitchingAnalysis, SwitchingCurve,
};
use crate::tomo::{run_tomography_experiment, table1_rows, SpamModel, TomographyResult, TomographySettings};

/// Physical constants of the apparatus that never enter the dynamics; they
/// are carried into every result file for reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DocumentationConstants {
    pub hyperfine_splitting_ghz: f64,
    pub raman_detuning_thz: f64,
    pub repetition_rate_mhz: f64,
    pub raman_wavelength_nm: f64,
    pub detection_wavelength_nm: f64,
    pub ion_height_um: f64,
}

impl Default for DocumentationConstants {
    fn default() -> Self {
        Self {
            hyperfine_splitting_ghz: 12.6,
            raman_detuning_thz: 14.0,
            repetition_rate_mhz: 76.0,
            raman_wavelength_nm: 376.0,
            detection_wavelength_nm: 369.5,
            ion_height_um: 80.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub schema_version: u32,
    pub software_version: String,
    pub timestamp_unix: u64,
    pub experiment: String,
    pub config: ExperimentConfig,
    pub constants: DocumentationConstants,
    pub data: serde_json::Value,
    pub derived: BTreeMap<String, f64>,
}

impl ResultBundle {
    fn new<D: Serialize>(
        experiment: &str,
        config: &ExperimentConfig,
        data: &D,
        derived: BTreeMap<String, f64>,
    ) -> Result<Self> {
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            experiment: experiment.to_string(),
            config: config.clone(),
            constants: DocumentationConstants::default(),
            data: serde_json::to_value(data)?,
            derived,
        })
    }

    /// Everything except the timestamp.
    pub fn same_payload(&self, other: &Self) -> bool {
        self.schema_version == other.schema_version
            && self.experiment == other.experiment
            && self.config == other.config
            && self.data == other.data
            && self.derived == other.derived
    }
}

/// Seed of one experiment (and sub-run) derived from the master seed.
fn experiment_seed(cfg: &ExperimentConfig, experiment: u64, part: u64) -> u64 {
    substream_seed(cfg.seed, streams::EXPERIMENT + experiment, part)
}

const FIG2: u64 = 2;
const FIG3: u64 = 3;
const WAIST: u64 = 4;
const TABLE1: u64 = 5;

// ---------------------------------------------------------------- fig2

/// One Rabi scan with the beam parked on one ion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig2Target {
    pub target: String,
    pub target_ion: usize,
    pub neighbour_ion: usize,
    pub pi_time: f64,
    pub durations: Vec<f64>,
    pub shots: usize,
    /// Indexed by ion.
    pub ions: Vec<IonCurve>,
    /// Mean target bright fraction over the last 10% of the scan.
    pub target_late_mean: f64,
    /// Neighbour crosstalk fitted to the whole neighbour curve.
    pub crosstalk_fit: f64,
    /// Neighbour population at the longest duration implied by the fit.
    pub neighbour_population_fit: f64,
    /// Measured neighbour bright fraction at the longest duration.
    pub neighbour_bright_last: f64,
    /// Crosstalk inverted from the last point after undoing the readout map,
    /// absent when the point is outside the first branch.
    pub crosstalk_last_point: Option<f64>,
    /// Intensity ratio of the beam model at the neighbour.
    pub crosstalk_model: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig2Data {
    pub targets: Vec<Fig2Target>,
}

fn fig2_grid(pi_time: f64, t_max: f64) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..)
        .map(|k| k as f64 * pi_time)
        .take_while(|&t| t <= t_max)
        .collect();
    if grid.last().is_none_or(|&t| t < t_max) {
        grid.push(t_max);
    }
    grid
}

fn fig2_target(
    cfg: &ExperimentConfig,
    label: &str,
    target: usize,
    pi_time: f64,
    seed: u64,
) -> Result<Fig2Target> {
    let setup = cfg.two_ion_setup(pi_time)?;
    let spam = cfg.spam_model()?;
    let neighbour = 1 - target;
    let t_max = cfg.fig2.t_max_us;
    let durations = fig2_grid(pi_time, t_max);
    let scan = run_rabi_scan(&setup, target, &durations, cfg.fig2.shots, &spam, &cfg.drift_model()?, seed)?;

    let late: Vec<f64> = durations
        .iter()
        .zip(&scan.ions[target].bright)
        .filter(|(&t, _)| t >= 0.9 * t_max)
        .map(|(_, &p)| p)
        .collect();
    let target_late_mean = late.iter().sum::<f64>() / late.len() as f64;

    let curve = &scan.ions[neighbour];
    let eps = fit_crosstalk(&durations, &curve.bright, &spam, pi_time)?;
    let neighbour_population_fit = (eps * PI * t_max / (2.0 * pi_time)).sin().powi(2);
    let last = *curve.bright.last().expect("grid is non-empty");
    let unmapped = ((last - (1.0 - spam.f0)) / (spam.f0 + spam.f1 - 1.0)).clamp(0.0, 1.0);
    let crosstalk_last_point = crosstalk_from_populations(unmapped, t_max, pi_time).ok();
    let site = setup.sites[target];

    Ok(Fig2Target {
        target: label.to_string(),
        target_ion: target,
        neighbour_ion: neighbour,
        pi_time,
        durations,
        shots: cfg.fig2.shots,
        crosstalk_model: setup.intensity_at_ion(neighbour, &site),
        ions: scan.ions,
        target_late_mean,
        crosstalk_fit: eps,
        neighbour_population_fit,
        neighbour_bright_last: last,
        crosstalk_last_point,
    })
}

pub fn fig2_data(cfg: &ExperimentConfig) -> Result<Fig2Data> {
    let targets = vec![
        fig2_target(cfg, "A", 0, cfg.fig2.pi_time_a_us, experiment_seed(cfg, FIG2, 0))?,
        fig2_target(cfg, "B", 1, cfg.fig2.pi_time_b_us, experiment_seed(cfg, FIG2, 1))?,
    ];
    Ok(Fig2Data { targets })
}

/// Rabi scans with the beam on A, then on B; neighbour crosstalk and the
/// drift-smeared target fringe.
pub fn run_fig2(cfg: &ExperimentConfig) -> Result<ResultBundle> {
    let data = fig2_data(cfg)?;
    let mut derived = BTreeMap::new();
    for t in &data.targets {
        let n = if t.target == "A" { "B" } else { "A" };
        derived.insert(format!("target_{}_late_mean", t.target), t.target_late_mean);
        derived.insert(format!("crosstalk_on_{n}"), t.crosstalk_fit);
        derived.insert(format!("neighbour_population_{n}_at_t_max"), t.neighbour_population_fit);
        derived.insert(format!("neighbour_bright_{n}_at_t_max"), t.neighbour_bright_last);
        derived.insert(format!("crosstalk_model_on_{n}"), t.crosstalk_model);
    }
    ResultBundle::new("fig2", cfg, &data, derived)
}

// ---------------------------------------------------------------- fig3

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fig3Data {
    pub site_1: SwitchingCurve,
    pub site_2: SwitchingCurve,
    pub analysis: SwitchingAnalysis,
}

fn switching_setup(cfg: &ExperimentConfig, ion_site: usize, pi_time: f64) -> Result<Setup> {
    let sites = [Point2::origin(), Point2::new(cfg.chain.spacing_um, 0.0)];
    Setup::with_sites(
        IonChain::single(sites[ion_site]),
        cfg.beam(pi_time)?,
        vec![cfg.beam.scatter_floors[ion_site]],
        cfg.switch_timing()?,
        &cfg.geometry()?,
        cfg.steering.v_max,
        &sites,
    )
}

pub fn fig3_starts(cfg: &ExperimentConfig) -> Vec<f64> {
    let f = &cfg.fig3;
    let n = ((f.t_stop_us - f.t_start_us) / f.step_us + 1e-9).floor() as usize;
    (0..=n).map(|k| f.t_start_us + k as f64 * f.step_us).collect()
}

pub fn fig3_data(cfg: &ExperimentConfig) -> Result<Fig3Data> {
    let spam = cfg.spam_model()?;
    let starts = fig3_starts(cfg);
    let (tau1, tau2) = (cfg.fig3.pi_time_1_us, cfg.fig3.pi_time_2_us);
    let s1 = switching_setup(cfg, 0, tau1)?;
    let s2 = switching_setup(cfg, 1, tau2)?;
    let c1 = run_switching_scan(&s1, 0, &starts, tau1, cfg.fig3.shots, &spam, experiment_seed(cfg, FIG3, 0))?;
    let c2 = run_switching_scan(&s2, 1, &starts, tau2, cfg.fig3.shots, &spam, experiment_seed(cfg, FIG3, 1))?;
    let analysis = analyze_switching(&s1, &c1, &s2, &c2, &spam, cfg.fig3.plateau_fraction)?;
    Ok(Fig3Data {
        site_1: c1,
        site_2: c2,
        analysis,
    })
}

/// Pulse-start scans across a mirror switch with the ion on either site.
pub fn run_fig3(cfg: &ExperimentConfig) -> Result<ResultBundle> {
    let data = fig3_data(cfg)?;
    let a = &data.analysis;
    let derived = BTreeMap::from([
        ("switching_time".to_string(), a.switch_time),
        ("plateau_switching_time".to_string(), a.plateau_switch_time),
        ("fitted_t_m".to_string(), a.fitted.t_m),
        ("fitted_t_s".to_string(), a.fitted.t_s),
        ("regions_in_order".to_string(), f64::from(u8::from(a.regions_in_order))),
    ]);
    ResultBundle::new("fig3", cfg, &data, derived)
}

// ---------------------------------------------------------------- waist

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaistData {
    pub probe_duration: f64,
    pub pi_time_a: f64,
    pub pi_time_b: f64,
    pub pi_time_c: f64,
    pub estimate: WaistEstimate<f64>,
}

pub fn waist_data(cfg: &ExperimentConfig) -> Result<WaistData> {
    let chain = cfg.chain()?;
    let (a, b) = (chain.positions()[0], chain.positions()[1]);
    let peak = cfg.waist.peak_pi_time_us;
    let setup = Setup::with_sites(
        chain,
        cfg.beam(peak)?,
        cfg.beam.scatter_floors.clone(),
        cfg.switch_timing()?,
        &cfg.geometry()?,
        cfg.steering.v_max,
        &[a.midpoint(&b), a],
    )?;
    let drift = if cfg.waist.with_drift {
        cfg.drift_model()?
    } else {
        DriftModel::none()
    };
    let factors = drift.path(experiment_seed(cfg, WAIST, 0), 2);
    // a short probe keeps every ion on the first branch; the pi-time is
    // read off the accumulated rotation angle
    let probe = 0.5 * peak;
    let pi_time = |angle: f64| PI * probe / angle;
    let parked = evolve(&setup, &parked_pulse_schedule(&setup, 0, probe, 0.0)?, factors[0])?;
    let centred = evolve(&setup, &parked_pulse_schedule(&setup, 1, probe, 0.0)?, factors[1])?;
    let (ta, tb) = (pi_time(parked.pulse_angles[0][0]), pi_time(parked.pulse_angles[0][1]));
    let tc = pi_time(centred.pulse_angles[0][0]);
    Ok(WaistData {
        probe_duration: probe,
        pi_time_a: ta,
        pi_time_b: tb,
        pi_time_c: tc,
        estimate: estimate_waist(ta, tb, tc, cfg.chain.spacing_um)?,
    })
}

/// Beam parked midway between the ions; the waist follows from the side
/// and centre pi-times.
pub fn run_waist(cfg: &ExperimentConfig) -> Result<ResultBundle> {
    let data = waist_data(cfg)?;
    let derived = BTreeMap::from([
        ("waist_um".to_string(), data.estimate.waist),
        ("waist_spread_um".to_string(), data.estimate.spread),
    ]);
    ResultBundle::new("waist", cfg, &data, derived)
}

// ---------------------------------------------------------------- table1

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub gate_a: String,
    pub gate_b: String,
    pub ion_a: TomographyResult,
    pub ion_b: TomographyResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1Data {
    pub rows: Vec<Table1Row>,
}

pub fn table1_data(cfg: &ExperimentConfig) -> Result<Table1Data> {
    let setup = cfg.two_ion_setup(cfg.table1.peak_pi_time_us)?;
    let settings = TomographySettings {
        spam: cfg.spam_model()?,
        shots_per_basis: cfg.table1.shots_per_basis,
        resamples: cfg.table1.bootstrap_resamples,
        drift: cfg.drift_model()?,
    };
    let rows = table1_rows()
        .into_iter()
        .enumerate()
        .map(|(i, (la, lb, ga, gb))| {
            let mut res = run_tomography_experiment(&setup, ga, gb, &settings, experiment_seed(cfg, TABLE1, i as u64))?;
            let ion_b = res.pop().expect("two ions");
            let ion_a = res.pop().expect("two ions");
            Ok(Table1Row {
                gate_a: la.to_string(),
                gate_b: lb.to_string(),
                ion_a,
                ion_b,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Table1Data { rows })
}

/// Sequential gates on the pair followed by per-ion tomography, one row per
/// gate pair.
pub fn run_table1(cfg: &ExperimentConfig) -> Result<ResultBundle> {
    let data = table1_data(cfg)?;
    let mut derived = BTreeMap::new();
    for (i, row) in data.rows.iter().enumerate() {
        derived.insert(format!("row{i}_fidelity_a"), row.ion_a.fidelity());
        derived.insert(format!("row{i}_fidelity_b"), row.ion_b.fidelity());
    }
    ResultBundle::new("table1", cfg, &data, derived)
}

// ---------------------------------------------------------------- dispatch

pub const EXPERIMENTS: [&str; 4] = ["fig2", "fig3", "waist", "table1"];

pub fn run_experiment(name: &str, cfg: &ExperimentConfig) -> Result<ResultBundle> {
    match name {
        "fig2" => run_fig2(cfg),
        "fig3" => run_fig3(cfg),
        "waist" => run_waist(cfg),
        "table1" => run_table1(cfg),
        other => Err(Error::Config(format!("unknown experiment `{other}`"))),
    }
}

/// Re-runs a bundle's experiment from its embedded config.
pub fn replay(bundle: &ResultBundle) -> Result<ResultBundle> {
    run_experiment(&bundle.experiment, &bundle.config)
}

/// The ideal-readout variant of a config, used by tests and examples.
pub fn with_ideal_spam(mut cfg: ExperimentConfig) -> ExperimentConfig {
    let ideal = SpamModel::ideal();
    cfg.spam.f0 = ideal.f0;
    cfg.spam.f1 = ideal.f1;
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::reference().with_shots(100);
        cfg.fig2.t_max_us = 300.0;
        cfg.table1.bootstrap_resamples = 100;
        cfg
    }

    #[test]
    fn fig2_grid_ends_at_t_max() {
        let g = fig2_grid(13.0, 5000.0);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[1], 13.0);
        assert_eq!(*g.last().unwrap(), 5000.0);
        assert_eq!(g.len(), 386);
        assert_eq!(fig2_grid(10.0, 100.0).len(), 11);
    }

    #[test]
    fn fig3_grid() {
        let s = fig3_starts(&ExperimentConfig::reference());
        assert_eq!(s.len(), 56);
        assert_eq!(s[0], -2.0);
        assert!((s[55] - 3.5).abs() < 1e-12);
    }

    #[test]
    fn coherent_fringe_without_drift() {
        let mut cfg = with_ideal_spam(quick());
        cfg.drift.sigma_rel = 0.0;
        cfg.fig2.shots = 2000;
        let d = fig2_data(&cfg).unwrap();
        let a = &d.targets[0];
        let t = *a.durations.last().unwrap();
        let expect = (PI * t / (2.0 * 13.0)).sin().powi(2);
        let got = *a.ions[0].bright.last().unwrap();
        assert!((got - expect).abs() < 4.0 * (expect * (1.0 - expect) / 2000.0).sqrt() + 1e-3, "{got} vs {expect}");
    }

    #[test]
    fn no_floor_crosstalk_is_small() {
        let mut cfg = with_ideal_spam(ExperimentConfig::reference().with_shots(2000));
        cfg.beam.scatter_floors = vec![0.0, 0.0];
        cfg.drift.sigma_rel = 0.0;
        let d = fig2_data(&cfg).unwrap();
        for t in &d.targets {
            assert!(t.crosstalk_model < 5e-5);
            assert!(t.crosstalk_fit < 5e-5, "{}", t.crosstalk_fit);
        }
    }

    #[test]
    fn waist_round_trip() {
        for w in [3.3, 10.0] {
            let mut cfg = ExperimentConfig::reference();
            cfg.beam.waist_um = w;
            let d = waist_data(&cfg).unwrap();
            assert!((d.estimate.waist - w).abs() < 1e-9 * w, "{w}: {:?}", d.estimate);
        }
    }

    #[test]
    fn waist_with_drift_within_five_percent() {
        let mut cfg = ExperimentConfig::reference();
        cfg.waist.with_drift = true;
        for seed in 0..20 {
            cfg.seed = seed;
            let d = waist_data(&cfg).unwrap();
            assert!((d.estimate.waist / 3.3 - 1.0).abs() < 0.05, "{:?}", d.estimate);
        }
    }

    #[test]
    fn instantaneous_mirror_gives_zero_switch_time() {
        let mut cfg = ExperimentConfig::reference();
        cfg.timing.t_m_us = 2.0 - 1e-6;
        cfg.fig3.shots = 2000;
        let d = fig3_data(&cfg).unwrap();
        assert!(d.analysis.switch_time < 0.05, "{:?}", d.analysis);
    }

    #[test]
    fn region_one_plateau_reads_f1() {
        let cfg = ExperimentConfig::reference();
        let d = fig3_data(&cfg).unwrap();
        let c = &d.site_1;
        for (&t, (&p, &e)) in c.starts.iter().zip(c.bright.iter().zip(&c.stderr)) {
            if t <= cfg.timing.t_m_us - cfg.fig3.pi_time_1_us {
                let se = (0.991f64 * 0.009 / cfg.fig3.shots as f64).sqrt();
                assert!((p - 0.991).abs() < 4.0 * se + 1e-12, "t={t}: {p} ({e})");
            }
        }
    }

    #[test]
    fn replay_reproduces_data() {
        let cfg = quick();
        for name in EXPERIMENTS {
            let a = run_experiment(name, &cfg).unwrap();
            let b = replay(&a).unwrap();
            assert!(a.same_payload(&b), "{name}");
        }
    }

    #[test]
    fn ideal_table1_is_faithful() {
        let mut cfg = with_ideal_spam(ExperimentConfig::reference());
        cfg.drift.sigma_rel = 0.0;
        cfg.table1.shots_per_basis = 100_000;
        cfg.table1.bootstrap_resamples = 100;
        let d = table1_data(&cfg).unwrap();
        for row in &d.rows {
            for r in [&row.ion_a, &row.ion_b] {
                assert!(r.fidelity() >= 0.999, "{} {}: {}", row.gate_a, row.gate_b, r.fidelity());
            }
        }
    }
}
