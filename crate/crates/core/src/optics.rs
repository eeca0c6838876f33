//! Gaussian addressing beam, steering geometry, and the crosstalk and
//! beam-waist inversions built on them.
//!
//! Lengths in the ion plane are micrometres, times are microseconds. The
//! waist is the 1/e^2 intensity radius, and the Rabi rate is taken to be
//! proportional to local intensity (both Raman combs ride in one beam).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Mirror tilts beyond this (radians) leave the small-angle model.
pub const SMALL_ANGLE_LIMIT: f64 = 0.05;

const UM_PER_MM: f64 = 1000.0;

/// A point in the focal (ion) plane, in micrometres.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point2<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn origin() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn distance_sqr(&self, other: &Self) -> T {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn distance(&self, other: &Self) -> T {
        self.distance_sqr(other).sqrt()
    }

    /// `self + (other - self) * frac`.
    pub fn lerp(&self, other: &Self, frac: T) -> Self {
        Self::new(
            self.x + (other.x - self.x) * frac,
            self.y + (other.y - self.y) * frac,
        )
    }

    pub fn midpoint(&self, other: &Self) -> Self {
        self.lerp(other, T::lit(0.5))
    }
}

/// Ion positions in the focal plane.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IonChain<T> {
    positions: Vec<Point2<T>>,
}

impl<T: Real> IonChain<T> {
    pub fn new(positions: Vec<Point2<T>>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::param("chain", "needs at least one ion"));
        }
        for (i, a) in positions.iter().enumerate() {
            for b in &positions[i + 1..] {
                if a.distance_sqr(b) == T::zero() {
                    return Err(Error::param("chain", "ion positions must be distinct"));
                }
            }
        }
        Ok(Self { positions })
    }

    /// `count` ions along +x starting at the beam's neutral position.
    pub fn linear(count: usize, spacing: T) -> Result<Self> {
        if !(spacing > T::zero()) {
            return Err(Error::param("spacing", "must be positive"));
        }
        Self::new(
            (0..count)
                .map(|i| Point2::new(T::from_usize(i).unwrap() * spacing, T::zero()))
                .collect(),
        )
    }

    pub fn single(at: Point2<T>) -> Self {
        Self {
            positions: vec![at],
        }
    }

    pub fn positions(&self) -> &[Point2<T>] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Gaussian addressing beam.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AddressingBeam<T> {
    pub center: Point2<T>,
    /// 1/e^2 intensity radius, um.
    pub waist: T,
    /// Pi-time for an ion at the beam center, us.
    pub peak_pi_time: T,
    /// Distance-independent relative intensity floor (scatter).
    pub scatter_floor: T,
}

impl<T: Real> AddressingBeam<T> {
    pub fn new(center: Point2<T>, waist: T, peak_pi_time: T, scatter_floor: T) -> Result<Self> {
        if !(waist > T::zero()) {
            return Err(Error::param("waist", "must be positive"));
        }
        if !(peak_pi_time > T::zero()) {
            return Err(Error::param("peak_pi_time", "must be positive"));
        }
        if !(scatter_floor >= T::zero() && scatter_floor < T::one()) {
            return Err(Error::param("scatter_floor", "must lie in [0, 1)"));
        }
        Ok(Self {
            center,
            waist,
            peak_pi_time,
            scatter_floor,
        })
    }

    pub fn centered_at(&self, center: Point2<T>) -> Self {
        Self { center, ..*self }
    }

    pub fn with_scatter_floor(&self, scatter_floor: T) -> Self {
        Self {
            scatter_floor,
            ..*self
        }
    }

    /// Rabi rate at the beam center, rad/us.
    pub fn peak_rabi_rate(&self) -> T {
        T::PI() / self.peak_pi_time
    }
}

/// Mirror-to-ion-plane optics: a Fourier lens followed by demagnification.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteeringGeometry<T> {
    pub focal_length_mm: T,
    pub demagnification: T,
    /// Electrostatic tilt constant, rad/V^2.
    pub tilt_gain: T,
}

impl<T: Real> SteeringGeometry<T> {
    pub fn new(focal_length_mm: T, demagnification: T, tilt_gain: T) -> Result<Self> {
        if !(focal_length_mm > T::zero()) {
            return Err(Error::param("focal_length_mm", "must be positive"));
        }
        if !(demagnification >= T::one()) {
            return Err(Error::param("demagnification", "must be at least 1"));
        }
        if !(tilt_gain > T::zero()) {
            return Err(Error::param("tilt_gain", "must be positive"));
        }
        Ok(Self {
            focal_length_mm,
            demagnification,
            tilt_gain,
        })
    }

    /// Ion-plane displacement per radian of mirror tilt, um/rad.
    fn um_per_rad(&self) -> T {
        T::lit(2.0) * self.focal_length_mm * T::lit(UM_PER_MM) / self.demagnification
    }
}

impl<T: Real> Default for SteeringGeometry<T> {
    /// 200 mm lens, 54x demagnification: 1 mrad of tilt moves the spot
    /// about one 7.4 um ion spacing. 200 V full scale gives 1 mrad.
    fn default() -> Self {
        Self {
            focal_length_mm: T::lit(200.0),
            demagnification: T::lit(54.0),
            tilt_gain: T::lit(2.5e-8),
        }
    }
}

/// Relative intensity at `point`: `max(exp(-2 d^2 / w0^2), floor)`.
pub fn relative_intensity<T: Real>(beam: &AddressingBeam<T>, point: &Point2<T>) -> T {
    let d2 = beam.center.distance_sqr(point);
    let gauss = (-T::lit(2.0) * d2 / (beam.waist * beam.waist)).exp();
    gauss.max(beam.scatter_floor)
}

/// Pi-time seen by an ion at `point`, us. Infinite if the intensity
/// underflows to zero.
pub fn local_pi_time<T: Real>(beam: &AddressingBeam<T>, point: &Point2<T>) -> T {
    beam.peak_pi_time / relative_intensity(beam, point)
}

/// Rabi rate seen by an ion at `point`, rad/us.
pub fn local_rabi_rate<T: Real>(beam: &AddressingBeam<T>, point: &Point2<T>) -> T {
    beam.peak_rabi_rate() * relative_intensity(beam, point)
}

/// Relative Rabi rate `eps` at a neighbour that reached bright population
/// `p_neighbor` after a drive of length `duration` while the target ion's
/// pi-time was `target_pi_time`.
///
/// Inverts `p = sin^2(eps * pi * duration / (2 * target_pi_time))` on its
/// first branch.
pub fn crosstalk_from_populations<T: Real>(p_neighbor: T, duration: T, target_pi_time: T) -> Result<T> {
    if !(p_neighbor >= T::zero() && p_neighbor <= T::one()) {
        return Err(Error::param("p_neighbor", "must lie in [0, 1]"));
    }
    if !(duration > T::zero()) {
        return Err(Error::param("duration", "must be positive"));
    }
    if !(target_pi_time > T::zero()) {
        return Err(Error::param("target_pi_time", "must be positive"));
    }
    let angle = p_neighbor.sqrt().asin();
    if angle >= T::FRAC_PI_2() {
        return Err(Error::AmbiguousBranch {
            angle: angle.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(T::lit(2.0) * target_pi_time / (T::PI() * duration) * angle)
}

/// Result of the midpoint beam-waist measurement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaistEstimate<T> {
    pub waist: T,
    pub from_a: T,
    pub from_b: T,
    /// `|from_a - from_b|`.
    pub spread: T,
}

fn side_waist<T: Real>(tau_side: T, tau_center: T, half_spacing: T) -> Result<T> {
    let ratio = tau_side / tau_center;
    if !(ratio > T::one()) {
        return Err(Error::WaistRatio {
            ratio: ratio.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(half_spacing * (T::lit(2.0) / ratio.ln()).sqrt())
}

/// Waist from pi-times of two side ions (beam parked midway) and a centre
/// ion loaded at the beam position, for ion spacing `spacing`.
pub fn estimate_waist<T: Real>(tau_a: T, tau_b: T, tau_c: T, spacing: T) -> Result<WaistEstimate<T>> {
    for (name, v) in [("tau_a", tau_a), ("tau_b", tau_b), ("tau_c", tau_c), ("spacing", spacing)] {
        if !(v > T::zero()) {
            return Err(Error::param(name, "must be positive"));
        }
    }
    let half = spacing / T::lit(2.0);
    let from_a = side_waist(tau_a, tau_c, half)?;
    let from_b = side_waist(tau_b, tau_c, half)?;
    Ok(WaistEstimate {
        waist: (from_a + from_b) / T::lit(2.0),
        from_a,
        from_b,
        spread: (from_a - from_b).abs(),
    })
}

fn check_small_angle<T: Real>(tilt: T) -> Result<()> {
    if !(tilt.abs() < T::lit(SMALL_ANGLE_LIMIT)) {
        return Err(Error::SmallAngle {
            tilt: tilt.to_f64().unwrap_or(f64::NAN),
            limit: SMALL_ANGLE_LIMIT,
        });
    }
    Ok(())
}

/// Ion-plane displacement for mirror tilts `(tilt_x, tilt_y)`:
/// `2 * tilt * f / M` on each axis.
pub fn displacement_from_tilts<T: Real>(tilt_x: T, tilt_y: T, geom: &SteeringGeometry<T>) -> Result<Point2<T>> {
    check_small_angle(tilt_x)?;
    check_small_angle(tilt_y)?;
    let k = geom.um_per_rad();
    Ok(Point2::new(tilt_x * k, tilt_y * k))
}

/// Mirror tilts that put the beam centre on `target`.
pub fn tilts_for_target<T: Real>(target: &Point2<T>, geom: &SteeringGeometry<T>) -> Result<(T, T)> {
    let k = geom.um_per_rad();
    let (tx, ty) = (target.x / k, target.y / k);
    check_small_angle(tx)?;
    check_small_angle(ty)?;
    Ok((tx, ty))
}
