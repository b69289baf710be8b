//! Photon-pair source on the down-conversion cone layer.
//!
//! Coordinates are strip-local: `theta` is the radial offset from the mean
//! emission angle and `phi` the angular offset from the strip centre, both in
//! mrad. The conjugate of a signal position `(theta, phi)` is
//! `(theta, -phi)`; the idler lands there up to a Gaussian spread.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_nonneg, check_positive, Error, Result};
use crate::rng::{poisson, FrameSeed, Purpose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    /// Mean number of pairs per pump pulse.
    pub mu_pairs: f64,
    /// Mean radial emission angle in mrad. Carried as metadata only; events
    /// are generated relative to it.
    #[serde(default = "default_theta0")]
    pub theta0: f64,
    /// Radial width of the accepted part of the cone layer (mrad).
    #[serde(default = "default_layer_sigma_theta")]
    pub layer_sigma_theta: f64,
    /// Full angular extent of the accepted strip (mrad).
    #[serde(default = "default_phi_window")]
    pub phi_window: f64,
    /// Conditional radial spread of the idler around the conjugate point.
    #[serde(default)]
    pub corr_sigma_theta: f64,
    /// Conditional angular spread of the idler around the conjugate point.
    #[serde(default)]
    pub corr_sigma_phi: f64,
    /// Free-form pump description (pulse length, repetition rate, ...).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

fn default_theta0() -> f64 {
    270.5
}
fn default_layer_sigma_theta() -> f64 {
    30.0
}
fn default_phi_window() -> f64 {
    240.0
}

impl Default for SourceParams {
    fn default() -> Self {
        Self {
            mu_pairs: 1.0,
            theta0: default_theta0(),
            layer_sigma_theta: default_layer_sigma_theta(),
            phi_window: default_phi_window(),
            corr_sigma_theta: 0.0,
            corr_sigma_phi: 0.0,
            metadata: BTreeMap::new(),
        }
    }
}

impl SourceParams {
    pub fn validate(&self) -> Result<()> {
        check_nonneg("source.mu_pairs", self.mu_pairs)?;
        if !self.theta0.is_finite() {
            return Err(Error::invalid("source.theta0", "must be finite"));
        }
        check_nonneg("source.layer_sigma_theta", self.layer_sigma_theta)?;
        check_positive("source.phi_window", self.phi_window)?;
        check_nonneg("source.corr_sigma_theta", self.corr_sigma_theta)?;
        check_nonneg("source.corr_sigma_phi", self.corr_sigma_phi)?;
        Ok(())
    }
}

/// One signal-idler pair in strip-local coordinates (mrad).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEvent {
    pub theta_s: f64,
    pub phi_s: f64,
    pub theta_i: f64,
    pub phi_i: f64,
}

/// Pairs emitted by one pump pulse.
pub fn sample_frame(params: &SourceParams, seed: FrameSeed) -> Result<Vec<PairEvent>> {
    params.validate()?;
    Ok(sample_frame_unchecked(params, seed))
}

pub(crate) fn sample_frame_unchecked(params: &SourceParams, seed: FrameSeed) -> Vec<PairEvent> {
    let mut rng = seed.rng(Purpose::Source);
    let n = poisson(&mut rng, params.mu_pairs);
    let half = 0.5 * params.phi_window;
    (0..n)
        .map(|_| {
            let phi_s = rng.random_range(-half..half);
            let theta_s = params.layer_sigma_theta * rng.sample::<f64, _>(StandardNormal);
            let dtheta = params.corr_sigma_theta * rng.sample::<f64, _>(StandardNormal);
            let dphi = params.corr_sigma_phi * rng.sample::<f64, _>(StandardNormal);
            PairEvent {
                theta_s,
                phi_s,
                theta_i: theta_s + dtheta,
                phi_i: -phi_s + dphi,
            }
        })
        .collect()
}
