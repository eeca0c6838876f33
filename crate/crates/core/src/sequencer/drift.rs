//! Slow laser-intensity drift as an Ornstein-Uhlenbeck process sampled once
//! per shot.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{streams, substream};

/// Relative intensity drift. The factor multiplying the Rabi rate in shot
/// `k` is `1 + x_k`, where `x` is a stationary OU process with standard
/// deviation `sigma_rel`, sampled at shot starts spaced `shot_period` apart.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftModel {
    pub sigma_rel: f64,
    /// us
    pub correlation_time: f64,
    /// Time between consecutive shot starts, us.
    pub shot_period: f64,
}

impl DriftModel {
    pub fn new(sigma_rel: f64, correlation_time: f64, shot_period: f64) -> Result<Self> {
        if !(sigma_rel >= 0.0) {
            return Err(Error::param("sigma_rel", "must be non-negative"));
        }
        if !(correlation_time > 0.0) {
            return Err(Error::param("correlation_time", "must be positive"));
        }
        if !(shot_period > 0.0) {
            return Err(Error::param("shot_period", "must be positive"));
        }
        Ok(Self {
            sigma_rel,
            correlation_time,
            shot_period,
        })
    }

    pub fn none() -> Self {
        Self {
            sigma_rel: 0.0,
            correlation_time: 1e6,
            shot_period: 1e4,
        }
    }

    /// One-step autocorrelation between consecutive shots.
    pub fn step_correlation(&self) -> f64 {
        (-self.shot_period / self.correlation_time).exp()
    }

    /// Drift factors for shots `0..n`, generated with the exact OU update
    /// `x_{k+1} = a x_k + sigma sqrt(1 - a^2) z_{k+1}` from a stationary start.
    pub fn path(&self, seed: u64, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        if n == 0 {
            return out;
        }
        if self.sigma_rel == 0.0 {
            out.resize(n, 1.0);
            return out;
        }
        let a = self.step_correlation();
        let kick = self.sigma_rel * (1.0 - a * a).sqrt();
        let mut x = self.sigma_rel * normal(seed, 0);
        out.push(1.0 + x);
        for k in 1..n {
            x = a * x + kick * normal(seed, k as u64);
            out.push(1.0 + x);
        }
        out
    }
}

fn normal(seed: u64, index: u64) -> f64 {
    StandardNormal.sample(&mut substream(seed, streams::DRIFT, index))
}

/// Drift factor of shot `shot_index`; shots are `shot_period` apart.
/// Equal to `drift.path(seed, shot_index + 1)[shot_index]`.
pub fn sample_drift(drift: &DriftModel, shot_period: f64, seed: u64, shot_index: usize) -> f64 {
    let model = DriftModel {
        shot_period,
        ..*drift
    };
    model.path(seed, shot_index + 1)[shot_index]
}
