//! Repeated-shot scans: Rabi duration scans (crosstalk) and pulse-start
//! scans across a mirror switch (switching time).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evolve, parked_pulse_schedule, DriftModel, MirrorCommand, PulseEvent, Schedule, Setup};
use crate::error::{Error, Result};
use crate::mems::SwitchTiming;
use crate::rng::{streams, substream};
use crate::tomo::{detect, SpamModel};

/// Shots per block when emitting block means (drift envelope).
pub const BLOCK_SHOTS: usize = 50;

fn stderr(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Bright fraction of one ion across a scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IonCurve {
    pub bright: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Per scan point, the bright fraction of consecutive blocks of
    /// [`BLOCK_SHOTS`] shots.
    pub block_means: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RabiScan {
    pub target_site: usize,
    pub durations: Vec<f64>,
    pub shots: usize,
    pub ions: Vec<IonCurve>,
}

/// Beam parked on `target_site`, one pulse of each duration, `shots`
/// repetitions per point with detection on every ion.
pub fn run_rabi_scan(
    setup: &Setup,
    target_site: usize,
    durations: &[f64],
    shots: usize,
    spam: &SpamModel,
    drift: &DriftModel,
    seed: u64,
) -> Result<RabiScan> {
    if shots == 0 {
        return Err(Error::param("shots", "must be positive"));
    }
    if durations.iter().any(|&t| !(t >= 0.0)) {
        return Err(Error::param("durations", "must be non-negative"));
    }
    let schedules = durations
        .iter()
        .map(|&t| parked_pulse_schedule(setup, target_site, t, 0.0))
        .collect::<Result<Vec<_>>>()?;
    let path = drift.path(seed, durations.len() * shots);
    let n_ions = setup.chain.len();

    // per point: [ion][shot] bright bits
    let points: Vec<Vec<Vec<bool>>> = schedules
        .par_iter()
        .enumerate()
        .map(|(i, sched)| {
            let mut bits = vec![Vec::with_capacity(shots); n_ions];
            for s in 0..shots {
                let idx = i * shots + s;
                let shot = evolve(setup, sched, path[idx])?;
                let mut rng = substream(seed, streams::RABI_DETECT, idx as u64);
                for (ion, st) in shot.states.iter().enumerate() {
                    bits[ion].push(detect(st.prob_one(), spam, &mut rng));
                }
            }
            Ok(bits)
        })
        .collect::<Result<_>>()?;

    let ions = (0..n_ions)
        .map(|ion| {
            let mut curve = IonCurve {
                bright: Vec::with_capacity(points.len()),
                stderr: Vec::with_capacity(points.len()),
                block_means: Vec::with_capacity(points.len()),
            };
            for bits in &points {
                let b = &bits[ion];
                let p = b.iter().filter(|&&x| x).count() as f64 / shots as f64;
                curve.bright.push(p);
                curve.stderr.push(stderr(p, shots));
                curve.block_means.push(
                    b.chunks(BLOCK_SHOTS)
                        .map(|c| c.iter().filter(|&&x| x).count() as f64 / c.len() as f64)
                        .collect(),
                );
            }
            curve
        })
        .collect();

    Ok(RabiScan {
        target_site,
        durations: durations.to_vec(),
        shots,
        ions,
    })
}

/// Least-squares crosstalk `eps` for a neighbour curve, modelling the
/// measured bright fraction as `(1 - F0) + (F0 + F1 - 1) sin^2(eps pi T / 2 tau)`.
/// The search is restricted to the first branch at the longest duration.
pub fn fit_crosstalk(durations: &[f64], bright: &[f64], spam: &SpamModel, target_pi_time: f64) -> Result<f64> {
    if durations.len() != bright.len() || durations.is_empty() {
        return Err(Error::param("durations", "need matching, non-empty arrays"));
    }
    let t_max = durations.iter().copied().fold(0.0, f64::max);
    if !(t_max > 0.0) {
        return Err(Error::param("durations", "need at least one positive duration"));
    }
    let eps_max = target_pi_time / t_max;
    let cost = |eps: f64| -> f64 {
        durations
            .iter()
            .zip(bright)
            .map(|(&t, &y)| {
                let p = (eps * std::f64::consts::PI * t / (2.0 * target_pi_time)).sin().powi(2);
                (y - spam.bright_probability(p)).powi(2)
            })
            .sum()
    };
    let n = 4000;
    let grid: Vec<f64> = (0..=n).map(|k| eps_max * k as f64 / n as f64).collect();
    let best = grid
        .iter()
        .enumerate()
        .min_by(|a, b| cost(*a.1).total_cmp(&cost(*b.1)))
        .map(|(k, _)| k)
        .unwrap_or(0);
    let (mut lo, mut hi) = (grid[best.saturating_sub(1)], grid[(best + 1).min(n)]);
    // golden-section refinement inside the bracketing cells
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (cost(x1), cost(x2));
    for _ in 0..100 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = cost(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = cost(x2);
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Bright fraction versus pulse start time around a switch at `t = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchingCurve {
    pub aligned_site: usize,
    pub pulse: f64,
    pub starts: Vec<f64>,
    pub bright: Vec<f64>,
    pub stderr: Vec<f64>,
}

fn switching_schedule(start: f64, pulse: f64, settle: f64) -> Result<Schedule> {
    let parked_at = start.min(0.0) - 2.0 * settle - 1.0;
    Schedule::new(
        vec![PulseEvent::new(start, pulse, 0.0)],
        vec![
            MirrorCommand { t: parked_at, target_site: 0 },
            MirrorCommand { t: 0.0, target_site: 1 },
        ],
        (start + pulse).max(0.0),
    )
}

fn single_ion_population(setup: &Setup, start: f64, pulse: f64) -> Result<f64> {
    let sched = switching_schedule(start, pulse, setup.timing.t_s)?;
    Ok(evolve(setup, &sched, 1.0)?.states[0].prob_one())
}

/// One ion sitting at `setup.sites[aligned_site]`; the mirror switches from
/// site 0 to site 1 at `t = 0` and a pulse of length `pulse` starts at each
/// of `starts`.
pub fn run_switching_scan(
    setup: &Setup,
    aligned_site: usize,
    starts: &[f64],
    pulse: f64,
    shots: usize,
    spam: &SpamModel,
    seed: u64,
) -> Result<SwitchingCurve> {
    if !(pulse > 0.0) {
        return Err(Error::param("pulse", "must be positive"));
    }
    if shots == 0 {
        return Err(Error::param("shots", "must be positive"));
    }
    if setup.sites.len() != 2 || setup.chain.len() != 1 {
        return Err(Error::param("setup", "switching scan needs one ion and two sites"));
    }
    let site = *setup.sites.get(aligned_site).ok_or(Error::InvalidSite {
        site: aligned_site,
        count: setup.sites.len(),
    })?;
    if site.distance(&setup.chain.positions()[0]) > 1e-6 {
        return Err(Error::param("aligned_site", "ion is not at the aligned site"));
    }
    let stream = streams::SWITCH_DETECT + aligned_site as u64;
    let bright: Vec<f64> = starts
        .par_iter()
        .enumerate()
        .map(|(i, &t)| {
            let p = single_ion_population(setup, t, pulse)?;
            let hits = (0..shots)
                .filter(|&s| {
                    let idx = (i * shots + s) as u64;
                    detect(p, spam, &mut substream(seed, stream, idx))
                })
                .count();
            Ok(hits as f64 / shots as f64)
        })
        .collect::<Result<_>>()?;
    Ok(SwitchingCurve {
        aligned_site,
        pulse,
        starts: starts.to_vec(),
        stderr: bright.iter().map(|&p| stderr(p, shots)).collect(),
        bright,
    })
}

/// Timing regions of a pulse `[t, t + pulse]` relative to the switch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Region {
    /// Pulse ends before the mirror responds.
    I,
    /// Pulse straddles the response delay but ends before settling.
    II,
    /// Pulse starts before the response delay and ends after settling.
    III,
    /// Pulse starts during the transit.
    IV,
    /// Pulse starts after settling.
    V,
}

impl Region {
    pub fn classify(start: f64, pulse: f64, timing: &SwitchTiming) -> Self {
        let end = start + pulse;
        if end <= timing.t_m {
            Region::I
        } else if start >= timing.t_s {
            Region::V
        } else if start >= timing.t_m {
            Region::IV
        } else if end >= timing.t_s {
            Region::III
        } else {
            Region::II
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchingAnalysis {
    /// Last start time of the leading full-pulse plateau (site 1 aligned).
    pub left_plateau_end: f64,
    /// First start time of the trailing full-pulse plateau (site 2 aligned).
    pub right_plateau_start: f64,
    /// `right_plateau_start - left_plateau_end - pulse_1`.
    pub plateau_switch_time: f64,
    /// Mirror timing fitted to both curves.
    pub fitted: SwitchTiming,
    /// `fitted.t_s - fitted.t_m`.
    pub switch_time: f64,
    pub fit_rss: f64,
    pub regions: Vec<Region>,
    /// All five regions present and in order along the scan.
    pub regions_in_order: bool,
}

fn plateau_edges(first: &SwitchingCurve, second: &SwitchingCurve, fraction: f64) -> Result<(f64, f64)> {
    let thresh = |c: &SwitchingCurve| fraction * c.bright.iter().copied().fold(0.0, f64::max);
    let t1 = thresh(first);
    let lead = first.bright.iter().take_while(|&&p| p >= t1).count();
    if lead == 0 || lead == first.bright.len() {
        return Err(Error::ScanRange(format!(
            "site-1 plateau not bracketed ({lead} of {} points on plateau)",
            first.bright.len()
        )));
    }
    let t2 = thresh(second);
    let trail = second.bright.iter().rev().take_while(|&&p| p >= t2).count();
    if trail == 0 || trail == second.bright.len() {
        return Err(Error::ScanRange(format!(
            "site-2 plateau not bracketed ({trail} of {} points on plateau)",
            second.bright.len()
        )));
    }
    Ok((first.starts[lead - 1], second.starts[second.starts.len() - trail]))
}

/// Plateau read-off plus a least-squares fit of the mirror timing to both
/// curves, using `first_setup` / `second_setup` as the forward models.
pub fn analyze_switching(
    first_setup: &Setup,
    first: &SwitchingCurve,
    second_setup: &Setup,
    second: &SwitchingCurve,
    spam: &SpamModel,
    plateau_fraction: f64,
) -> Result<SwitchingAnalysis> {
    if first.starts != second.starts || first.starts.len() < 3 {
        return Err(Error::ScanRange("both curves need the same start grid (>= 3 points)".into()));
    }
    let (left, right) = plateau_edges(first, second, plateau_fraction)?;

    let cost = |tm: f64, ts: f64| -> Result<f64> {
        let timing = SwitchTiming { t_m: tm, t_s: ts };
        let mut acc = 0.0;
        for (setup, curve) in [(first_setup, first), (second_setup, second)] {
            let model = Setup {
                timing,
                ..setup.clone()
            };
            for (&t, &y) in curve.starts.iter().zip(&curve.bright) {
                let p = single_ion_population(&model, t, curve.pulse)?;
                acc += (y - spam.bright_probability(p)).powi(2);
            }
        }
        Ok(acc)
    };

    let starts = &first.starts;
    let step = (starts[1] - starts[0]).abs().max(1e-3);
    let horizon = starts[starts.len() - 1] + first.pulse.max(second.pulse);
    let min_gap = 1e-6;
    let n = (horizon / step).floor().max(1.0) as usize;
    let mut candidates = Vec::new();
    for i in 0..=n {
        let tm = i as f64 * step;
        candidates.push((tm, tm + min_gap));
        for j in 1..=n.saturating_sub(i) {
            candidates.push((tm, tm + j as f64 * step));
        }
    }
    let costs = candidates
        .par_iter()
        .map(|&(a, b)| cost(a, b))
        .collect::<Result<Vec<_>>>()?;
    let best = costs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let (mut tm, mut ts) = candidates[best];
    let mut best_cost = costs[best];

    // compass search down to 1e-4 us
    let mut h = step / 2.0;
    while h > 1e-4 {
        let mut improved = false;
        for (dm, ds) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h), (h, h), (-h, -h)] {
            let (a, b) = (tm + dm, ts + ds);
            if a < 0.0 || b - a < min_gap {
                continue;
            }
            let c = cost(a, b)?;
            if c < best_cost {
                best_cost = c;
                tm = a;
                ts = b;
                improved = true;
            }
        }
        if !improved {
            h /= 2.0;
        }
    }

    let fitted = SwitchTiming { t_m: tm, t_s: ts };
    let regions: Vec<Region> = starts
        .iter()
        .map(|&t| Region::classify(t, first.pulse, &fitted))
        .collect();
    let mut seen = regions.clone();
    seen.dedup();
    let regions_in_order = seen == [Region::I, Region::II, Region::III, Region::IV, Region::V];

    Ok(SwitchingAnalysis {
        left_plateau_end: left,
        right_plateau_start: right,
        plateau_switch_time: right - left - first.pulse,
        fitted,
        switch_time: ts - tm,
        fit_rss: best_cost,
        regions,
        regions_in_order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mems::DEFAULT_V_MAX;
    use crate::optics::{AddressingBeam, IonChain, Point2, SteeringGeometry};
    use std::f64::consts::PI;

    fn two_ion(s: f64) -> Setup {
        let chain = IonChain::linear(2, 7.4).unwrap();
        let beam = AddressingBeam::new(Point2::origin(), 3.3, 13.0, s).unwrap();
        Setup::simple(chain, beam, SwitchTiming::new(0.9, 2.0).unwrap()).unwrap()
    }

    #[test]
    fn region_classification() {
        let t = SwitchTiming::new(0.9, 2.0).unwrap();
        assert_eq!(Region::classify(-1.0, 1.5, &t), Region::I);
        assert_eq!(Region::classify(-0.3, 1.5, &t), Region::II);
        assert_eq!(Region::classify(0.7, 1.5, &t), Region::III);
        assert_eq!(Region::classify(1.0, 1.5, &t), Region::IV);
        assert_eq!(Region::classify(2.0, 1.5, &t), Region::V);
    }

    #[test]
    fn zero_duration_reads_dark_floor() {
        let setup = two_ion(0.0);
        let spam = SpamModel::new(0.998, 0.991).unwrap();
        let scan = run_rabi_scan(&setup, 0, &[0.0], 20_000, &spam, &DriftModel::none(), 1).unwrap();
        for ion in &scan.ions {
            assert!((ion.bright[0] - 0.002).abs() < 4.0 * stderr(0.002, 20_000));
        }
    }

    #[test]
    fn pi_pulse_on_target_ideal_readout() {
        let setup = two_ion(0.0);
        let scan = run_rabi_scan(&setup, 0, &[13.0], 1000, &SpamModel::ideal(), &DriftModel::none(), 2).unwrap();
        assert_eq!(scan.ions[0].bright[0], 1.0);
        assert_eq!(scan.ions[1].bright[0], 0.0);
        assert_eq!(scan.ions[0].block_means[0].len(), 1000 / BLOCK_SHOTS);
    }

    #[test]
    fn drift_free_fringe() {
        let setup = two_ion(0.0);
        let ts = [3.0, 6.5, 9.0, 20.0];
        let scan = run_rabi_scan(&setup, 0, &ts, 10_000, &SpamModel::ideal(), &DriftModel::none(), 3).unwrap();
        for (i, &t) in ts.iter().enumerate() {
            let expect = (PI * t / 26.0).sin().powi(2);
            let p = scan.ions[0].bright[i];
            assert!((p - expect).abs() <= 4.0 * stderr(expect, 10_000) + 1e-12, "T={t}: {p} vs {expect}");
        }
    }

    #[test]
    fn scan_is_deterministic() {
        let setup = two_ion(1e-3);
        let spam = SpamModel::new(0.998, 0.991).unwrap();
        let drift = DriftModel::new(0.01, 1e6, 1e4).unwrap();
        let a = run_rabi_scan(&setup, 1, &[10.0, 200.0], 300, &spam, &drift, 5).unwrap();
        let b = run_rabi_scan(&setup, 1, &[10.0, 200.0], 300, &spam, &drift, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn crosstalk_fit_recovers_noiseless_eps() {
        let spam = SpamModel::new(0.998, 0.991).unwrap();
        let ts: Vec<f64> = (0..=100).map(|k| 50.0 * k as f64).collect();
        let eps = 1.3e-4;
        let ys: Vec<f64> = ts
            .iter()
            .map(|&t| spam.bright_probability((eps * PI * t / 26.0).sin().powi(2)))
            .collect();
        let got = fit_crosstalk(&ts, &ys, &spam, 13.0).unwrap();
        assert!((got - eps).abs() < 1e-9 * eps.max(1.0), "{got}");
    }

    fn switching_setup(ion_site: usize, pulse: f64, timing: SwitchTiming) -> Setup {
        let sites = [Point2::origin(), Point2::new(7.4, 0.0)];
        let chain = IonChain::single(sites[ion_site]);
        let beam = AddressingBeam::new(Point2::origin(), 3.3, pulse, 0.0).unwrap();
        Setup::with_sites(chain, beam, vec![0.0], timing, &SteeringGeometry::default(), DEFAULT_V_MAX, &sites)
            .unwrap()
    }

    #[test]
    fn switching_fit_recovers_timing() {
        let timing = SwitchTiming::new(0.9, 2.0).unwrap();
        let spam = SpamModel::ideal();
        let starts: Vec<f64> = (0..=40).map(|k| -1.5 + 0.1 * k as f64).collect();
        let s1 = switching_setup(0, 1.5, timing);
        let s2 = switching_setup(1, 1.3, timing);
        let c1 = run_switching_scan(&s1, 0, &starts, 1.5, 4000, &spam, 7).unwrap();
        let c2 = run_switching_scan(&s2, 1, &starts, 1.3, 4000, &spam, 7).unwrap();
        // region I and V are full pi pulses
        assert_eq!(c1.bright[0], 1.0);
        assert_eq!(*c2.bright.last().unwrap(), 1.0);
        let a = analyze_switching(&s1, &c1, &s2, &c2, &spam, 0.98).unwrap();
        assert!((a.switch_time - 1.1).abs() < 0.05, "{a:?}");
        assert!(a.regions_in_order);
        assert!(a.plateau_switch_time < a.switch_time);
    }

    #[test]
    fn switching_requires_bracketed_plateaus() {
        let timing = SwitchTiming::new(0.9, 2.0).unwrap();
        let spam = SpamModel::ideal();
        let starts: Vec<f64> = (0..=10).map(|k| 2.5 + 0.1 * k as f64).collect();
        let s1 = switching_setup(0, 1.5, timing);
        let s2 = switching_setup(1, 1.3, timing);
        let c1 = run_switching_scan(&s1, 0, &starts, 1.5, 200, &spam, 7).unwrap();
        let c2 = run_switching_scan(&s2, 1, &starts, 1.3, 200, &spam, 7).unwrap();
        assert!(matches!(
            analyze_switching(&s1, &c1, &s2, &c2, &spam, 0.98),
            Err(Error::ScanRange(_))
        ));
    }

    #[test]
    fn switching_rejects_misaligned_ion() {
        let timing = SwitchTiming::new(0.9, 2.0).unwrap();
        let s1 = switching_setup(0, 1.5, timing);
        assert!(run_switching_scan(&s1, 1, &[0.0], 1.5, 10, &SpamModel::ideal(), 1).is_err());
    }
}
