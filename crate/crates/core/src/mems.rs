//! MEMS mirror actuation and the beam-centre trajectory during a switch.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{displacement_from_tilts, tilts_for_target, IonChain, Point2, SteeringGeometry};

/// Default full-scale electrode voltage.
pub const DEFAULT_V_MAX: f64 = 200.0;

/// Per-axis electrode voltages, in volts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VoltageSet {
    pub v_x: f64,
    pub v_y: f64,
}

/// Parallel-plate small-angle model: `tilt = g * v^2`.
pub fn tilt_from_voltage(v: f64, tilt_gain: f64, v_max: f64) -> Result<f64> {
    if !(0.0..=v_max).contains(&v) {
        return Err(Error::param("voltage", format!("{v} V outside [0, {v_max}] V")));
    }
    Ok(tilt_gain * v * v)
}

fn voltage_for_tilt(tilt: f64, tilt_gain: f64, v_max: f64, target: &Point2<f64>) -> Result<f64> {
    let unreachable = |reason: String| Error::Unreachable {
        x: target.x,
        y: target.y,
        reason,
    };
    if tilt < 0.0 {
        return Err(unreachable(format!(
            "needs negative tilt {tilt} rad, actuator only pulls one way"
        )));
    }
    let v = (tilt / tilt_gain).sqrt();
    if v > v_max {
        return Err(unreachable(format!(
            "needs {v:.3} V, above the {v_max} V limit"
        )));
    }
    Ok(v)
}

/// Beam position produced by a voltage set.
pub fn position_for_voltages(vs: &VoltageSet, geom: &SteeringGeometry<f64>, v_max: f64) -> Result<Point2<f64>> {
    let tx = tilt_from_voltage(vs.v_x, geom.tilt_gain, v_max)?;
    let ty = tilt_from_voltage(vs.v_y, geom.tilt_gain, v_max)?;
    displacement_from_tilts(tx, ty, geom)
}

/// One voltage set per ion, landing the beam centre on each ion.
pub fn calibrate_voltage_sets(
    chain: &IonChain<f64>,
    geom: &SteeringGeometry<f64>,
    v_max: f64,
) -> Result<Vec<VoltageSet>> {
    calibrate_points(chain.positions(), geom, v_max)
}

pub(crate) fn calibrate_points(
    points: &[Point2<f64>],
    geom: &SteeringGeometry<f64>,
    v_max: f64,
) -> Result<Vec<VoltageSet>> {
    points
        .iter()
        .map(|p| {
            let (tx, ty) = tilts_for_target(p, geom)?;
            Ok(VoltageSet {
                v_x: voltage_for_tilt(tx, geom.tilt_gain, v_max, p)?,
                v_y: voltage_for_tilt(ty, geom.tilt_gain, v_max, p)?,
            })
        })
        .collect()
}

/// Mechanical delay `t_m` and full-settle time `t_s` after a voltage switch, us.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchTiming {
    pub t_m: f64,
    pub t_s: f64,
}

impl SwitchTiming {
    pub fn new(t_m: f64, t_s: f64) -> Result<Self> {
        if !(t_m >= 0.0 && t_m < t_s) || !t_s.is_finite() {
            return Err(Error::param("timing", format!("need 0 <= t_m < t_s, got t_m={t_m}, t_s={t_s}")));
        }
        Ok(Self { t_m, t_s })
    }
}

/// Time between the last instant the old site is fully addressed and the
/// first instant the new site is, `t_s - t_m`.
pub fn effective_switch_time(timing: &SwitchTiming) -> f64 {
    timing.t_s - timing.t_m
}

/// Beam-centre path for one switch from `p1` to `p2` commanded at `t0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MirrorTrajectory {
    pub p1: Point2<f64>,
    pub p2: Point2<f64>,
    pub t0: f64,
    pub timing: SwitchTiming,
}

impl MirrorTrajectory {
    /// Interval during which the beam is moving.
    pub fn transit_window(&self) -> (f64, f64) {
        (self.t0 + self.timing.t_m, self.t0 + self.timing.t_s)
    }

    pub fn is_stationary(&self) -> bool {
        self.p1 == self.p2
    }

    pub fn position_at(&self, t: f64) -> Point2<f64> {
        let (start, end) = self.transit_window();
        if t <= start {
            self.p1
        } else if t >= end {
            self.p2
        } else {
            let phase = std::f64::consts::PI * (t - start) / (end - start);
            self.p1.lerp(&self.p2, 0.5 * (1.0 - phase.cos()))
        }
    }
}

/// Raised-cosine interpolation between the delay and settle times.
pub fn beam_position_at(traj: &MirrorTrajectory, t: f64) -> Point2<f64> {
    traj.position_at(t)
}
