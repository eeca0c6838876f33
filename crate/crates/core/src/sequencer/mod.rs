//! Pulse/steering schedules and per-shot qubit evolution of every ion in
//! the chain.
//!
//! The drive is resonant and there is no free evolution between pulses, so
//! each pulse acts on each ion as a single rotation about the pulse's phase
//! axis. The rotation angle is the time integral of the local Rabi rate:
//! closed form while the beam is parked, fixed-step midpoint rule while the
//! mirror is in transit.

mod drift;
mod scan;

pub use drift::{sample_drift, DriftModel};
pub use scan::{
    analyze_switching, fit_crosstalk, run_rabi_scan, run_switching_scan, IonCurve, RabiScan, Region,
    SwitchingAnalysis, SwitchingCurve,
};

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mems::{calibrate_points, position_for_voltages, MirrorTrajectory, SwitchTiming, VoltageSet, DEFAULT_V_MAX};
use crate::optics::{local_pi_time, relative_intensity, AddressingBeam, IonChain, Point2, SteeringGeometry};
use crate::qmath::{rotation_gate, PureState};

/// Integration step inside mirror transits, us (10 ns).
pub const TRANSIT_STEP: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseEvent {
    pub t_start: f64,
    pub duration: f64,
    /// Rotation axis angle in the xy-plane, rad.
    pub phase: f64,
    pub amplitude_scale: f64,
}

impl PulseEvent {
    pub fn new(t_start: f64, duration: f64, phase: f64) -> Self {
        Self {
            t_start,
            duration,
            phase,
            amplitude_scale: 1.0,
        }
    }

    pub fn end(&self) -> f64 {
        self.t_start + self.duration
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MirrorCommand {
    pub t: f64,
    pub target_site: usize,
}

/// Time-ordered pulses and mirror commands.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pulses: Vec<PulseEvent>,
    switches: Vec<MirrorCommand>,
    total_duration: f64,
}

impl Schedule {
    pub fn new(pulses: Vec<PulseEvent>, switches: Vec<MirrorCommand>, total_duration: f64) -> Result<Self> {
        for p in &pulses {
            if !(p.duration >= 0.0) || !p.t_start.is_finite() {
                return Err(Error::param("pulse", "duration must be non-negative and start finite"));
            }
            if !(0.0..=1.0).contains(&p.amplitude_scale) {
                return Err(Error::param("amplitude_scale", "must lie in [0, 1]"));
            }
        }
        if pulses.windows(2).any(|w| w[1].t_start < w[0].end()) {
            return Err(Error::param("pulses", "must be time-ordered and non-overlapping"));
        }
        if switches.windows(2).any(|w| w[1].t < w[0].t) {
            return Err(Error::param("switches", "must be time-ordered"));
        }
        let last = pulses
            .iter()
            .map(PulseEvent::end)
            .chain(switches.iter().map(|s| s.t))
            .fold(f64::NEG_INFINITY, f64::max);
        if last > total_duration {
            return Err(Error::param("total_duration", "ends before the last event"));
        }
        Ok(Self {
            pulses,
            switches,
            total_duration,
        })
    }

    pub fn pulses(&self) -> &[PulseEvent] {
        &self.pulses
    }

    pub fn switches(&self) -> &[MirrorCommand] {
        &self.switches
    }

    pub fn total_duration(&self) -> f64 {
        self.total_duration
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty() && self.switches.is_empty()
    }
}

/// A single-qubit gate request for [`build_gate_schedule`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub site: usize,
    pub phase: f64,
    pub angle: f64,
}

impl Gate {
    pub fn new(site: usize, phase: f64, angle: f64) -> Self {
        Self { site, phase, angle }
    }

    /// Same rotation with `angle` in `[0, 2pi)` and `phase` in `[0, 2pi)`.
    /// A negative angle becomes a positive one about the opposite axis.
    pub fn normalized(&self) -> Self {
        let (mut phase, mut angle) = (self.phase, self.angle);
        if angle < 0.0 {
            angle = -angle;
            phase += PI;
        }
        Self {
            site: self.site,
            phase: phase.rem_euclid(TAU),
            angle: angle.rem_euclid(TAU),
        }
    }
}

/// Everything needed to turn a schedule into qubit dynamics: the ions, the
/// beam, the addressable sites and their calibrated voltage sets, and the
/// mirror timing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Setup {
    pub chain: IonChain<f64>,
    /// Beam shape; its `center` is replaced by the mirror trajectory.
    pub beam: AddressingBeam<f64>,
    /// Scatter floor seen by each ion.
    pub scatter_floors: Vec<f64>,
    /// Beam positions reached by each site's voltage set.
    pub sites: Vec<Point2<f64>>,
    pub voltage_sets: Vec<VoltageSet>,
    pub timing: SwitchTiming,
}

impl Setup {
    /// Sites are the ion positions, reached through calibrated voltage sets.
    pub fn new(
        chain: IonChain<f64>,
        beam: AddressingBeam<f64>,
        scatter_floors: Vec<f64>,
        timing: SwitchTiming,
        geometry: &SteeringGeometry<f64>,
        v_max: f64,
    ) -> Result<Self> {
        let targets = chain.positions().to_vec();
        Self::with_sites(chain, beam, scatter_floors, timing, geometry, v_max, &targets)
    }

    pub fn with_sites(
        chain: IonChain<f64>,
        beam: AddressingBeam<f64>,
        scatter_floors: Vec<f64>,
        timing: SwitchTiming,
        geometry: &SteeringGeometry<f64>,
        v_max: f64,
        targets: &[Point2<f64>],
    ) -> Result<Self> {
        if scatter_floors.len() != chain.len() {
            return Err(Error::param(
                "scatter_floors",
                format!("need one per ion ({}), got {}", chain.len(), scatter_floors.len()),
            ));
        }
        for &s in &scatter_floors {
            if !(0.0..1.0).contains(&s) {
                return Err(Error::param("scatter_floors", "must lie in [0, 1)"));
            }
        }
        let voltage_sets = calibrate_points(targets, geometry, v_max)?;
        let sites = voltage_sets
            .iter()
            .map(|vs| position_for_voltages(vs, geometry, v_max))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            chain,
            beam,
            scatter_floors,
            sites,
            voltage_sets,
            timing,
        })
    }

    /// Convenience for tests and examples: default steering geometry.
    pub fn simple(chain: IonChain<f64>, beam: AddressingBeam<f64>, timing: SwitchTiming) -> Result<Self> {
        let floors = vec![beam.scatter_floor; chain.len()];
        Self::new(chain, beam, floors, timing, &SteeringGeometry::default(), DEFAULT_V_MAX)
    }

    fn site(&self, site: usize) -> Result<Point2<f64>> {
        self.sites.get(site).copied().ok_or(Error::InvalidSite {
            site,
            count: self.sites.len(),
        })
    }

    /// Relative intensity at ion `ion` with the beam centred on `at`.
    pub fn intensity_at_ion(&self, ion: usize, at: &Point2<f64>) -> f64 {
        let beam = self.beam.centered_at(*at).with_scatter_floor(self.scatter_floors[ion]);
        relative_intensity(&beam, &self.chain.positions()[ion])
    }

    /// Pi-time of ion `ion` with the beam parked on site `site`.
    pub fn pi_time(&self, site: usize, ion: usize) -> Result<f64> {
        let at = self.site(site)?;
        if ion >= self.chain.len() {
            return Err(Error::InvalidSite {
                site: ion,
                count: self.chain.len(),
            });
        }
        let beam = self.beam.centered_at(at).with_scatter_floor(self.scatter_floors[ion]);
        Ok(local_pi_time(&beam, &self.chain.positions()[ion]))
    }
}

/// Steer-then-pulse schedule for a gate list. Pulses on a new site start
/// `t_s` after the switch command; gates on the current site follow
/// back-to-back. Durations are `angle / pi` pi-times of the addressed ion.
pub fn build_gate_schedule(gates: &[Gate], setup: &Setup) -> Result<Schedule> {
    let mut pulses = Vec::with_capacity(gates.len());
    let mut switches = Vec::new();
    let mut cursor = 0.0;
    let mut current: Option<usize> = None;
    for gate in gates.iter().map(Gate::normalized) {
        let tau = setup.pi_time(gate.site, gate.site)?;
        let mut start = cursor;
        if current != Some(gate.site) {
            switches.push(MirrorCommand {
                t: cursor,
                target_site: gate.site,
            });
            start += setup.timing.t_s;
            current = Some(gate.site);
        }
        let pulse = PulseEvent::new(start, gate.angle / PI * tau, gate.phase);
        cursor = pulse.end();
        pulses.push(pulse);
    }
    Schedule::new(pulses, switches, cursor)
}

/// Beam-centre path implied by a schedule's mirror commands. The mirror is
/// assumed already settled on the first command's site.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamPath {
    initial: Point2<f64>,
    moves: Vec<MirrorTrajectory>,
}

impl BeamPath {
    pub fn new(setup: &Setup, schedule: &Schedule) -> Result<Self> {
        let Some(first) = schedule.switches().first() else {
            return Ok(Self {
                initial: Point2::origin(),
                moves: Vec::new(),
            });
        };
        let initial = setup.site(first.target_site)?;
        let mut path = Self {
            initial,
            moves: Vec::with_capacity(schedule.switches().len()),
        };
        for cmd in schedule.switches() {
            let target = setup.site(cmd.target_site)?;
            let from = path.position_at(cmd.t);
            path.moves.push(MirrorTrajectory {
                p1: from,
                p2: target,
                t0: cmd.t,
                timing: setup.timing,
            });
        }
        Ok(path)
    }

    fn governing(&self, t: f64) -> Option<&MirrorTrajectory> {
        let idx = self.moves.partition_point(|m| m.t0 <= t);
        idx.checked_sub(1).map(|i| &self.moves[i])
    }

    pub fn position_at(&self, t: f64) -> Point2<f64> {
        self.governing(t).map_or(self.initial, |m| m.position_at(t))
    }

    fn moving_at(&self, t: f64) -> bool {
        self.governing(t).is_some_and(|m| {
            let (a, b) = m.transit_window();
            !m.is_stationary() && t > a && t < b
        })
    }

    /// Sorted breakpoints strictly inside `(a, b)`.
    fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .moves
            .iter()
            .flat_map(|m| {
                let (s, e) = m.transit_window();
                [m.t0, s, e]
            })
            .filter(|&t| t > a && t < b)
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }
}

/// Outcome of one shot: the pre-measurement state of every ion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotResult {
    pub states: Vec<PureState<f64>>,
    pub drift_factor: f64,
    /// Rotation angle accumulated by each ion in each pulse, rad.
    pub pulse_angles: Vec<Vec<f64>>,
    /// Beam centre at each pulse start.
    pub pulse_centers: Vec<Point2<f64>>,
    /// Midpoint-rule steps spent inside mirror transits.
    pub transit_steps: usize,
}

impl ShotResult {
    pub fn bright_populations(&self) -> Vec<f64> {
        self.states.iter().map(PureState::prob_one).collect()
    }
}

/// Rotation angle accumulated by ion `ion` over `[a, b]` with unit drive
/// amplitude and no drift. Returns the angle and the number of transit steps.
fn integrate_angle(setup: &Setup, path: &BeamPath, ion: usize, a: f64, b: f64) -> (f64, usize) {
    let omega = setup.beam.peak_rabi_rate();
    let mut edges = vec![a];
    edges.extend(path.breakpoints(a, b));
    edges.push(b);
    let mut angle = 0.0;
    let mut steps = 0;
    for w in edges.windows(2) {
        let (u, v) = (w[0], w[1]);
        let len = v - u;
        if len <= 0.0 {
            continue;
        }
        let mid = 0.5 * (u + v);
        if path.moving_at(mid) {
            let n = (len / TRANSIT_STEP).ceil().max(1.0) as usize;
            let h = len / n as f64;
            let sum: f64 = (0..n)
                .map(|k| setup.intensity_at_ion(ion, &path.position_at(u + (k as f64 + 0.5) * h)))
                .sum();
            angle += omega * h * sum;
            steps += n;
        } else {
            angle += omega * len * setup.intensity_at_ion(ion, &path.position_at(mid));
        }
    }
    (angle, steps)
}

/// Evolves every ion from `|0>` through `schedule` with a fixed drift factor.
pub fn evolve(setup: &Setup, schedule: &Schedule, drift_factor: f64) -> Result<ShotResult> {
    let path = BeamPath::new(setup, schedule)?;
    let n_ions = setup.chain.len();
    let mut states = vec![PureState::zero(); n_ions];
    let mut pulse_angles = Vec::with_capacity(schedule.pulses().len());
    let mut pulse_centers = Vec::with_capacity(schedule.pulses().len());
    let mut transit_steps = 0;
    for pulse in schedule.pulses() {
        pulse_centers.push(path.position_at(pulse.t_start));
        let mut angles = Vec::with_capacity(n_ions);
        for (ion, state) in states.iter_mut().enumerate() {
            let (raw, steps) = integrate_angle(setup, &path, ion, pulse.t_start, pulse.end());
            transit_steps += steps;
            let angle = raw * pulse.amplitude_scale * drift_factor;
            if angle != 0.0 {
                *state = state.evolve(&rotation_gate(pulse.phase, angle));
            }
            angles.push(angle);
        }
        pulse_angles.push(angles);
    }
    Ok(ShotResult {
        states,
        drift_factor,
        pulse_angles,
        pulse_centers,
        transit_steps,
    })
}

/// One shot of `schedule`, with the drift factor of shot `shot_index`
/// drawn from `drift` under `seed`.
pub fn simulate_shot(
    setup: &Setup,
    schedule: &Schedule,
    drift: &DriftModel,
    seed: u64,
    shot_index: usize,
) -> Result<ShotResult> {
    let d = sample_drift(drift, drift.shot_period, seed, shot_index);
    evolve(setup, schedule, d)
}

/// Schedule with the beam already on `site` and one pulse of `duration`
/// starting `t_s` after the (no-op) steering command.
pub fn parked_pulse_schedule(setup: &Setup, site: usize, duration: f64, phase: f64) -> Result<Schedule> {
    setup.site(site)?;
    let start = setup.timing.t_s;
    Schedule::new(
        vec![PulseEvent::new(start, duration, phase)],
        vec![MirrorCommand { t: 0.0, target_site: site }],
        start + duration,
    )
}
