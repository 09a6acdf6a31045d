//! Uplink channel model: composite gain, SINR and Shannon rate.
//!
//! The gain of a link is `kappa * d^-alpha * |h|^2 * zeta` where `|h|^2` is a unit-mean
//! exponential (Rayleigh power) draw taken independently per (device, RB) and `zeta` is a
//! log-normal shadowing factor drawn once per device. Interference from neighbouring cells
//! is exogenous: one aggregate power per RB sampled from [`InterferenceModel`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{distance, Scenario};

/// Subcarrier spacing of 30 kHz times 12 subcarriers.
pub const DEFAULT_RB_BANDWIDTH_HZ: f64 = 360e3;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("SINR undefined: interference + noise is zero")]
    ZeroDenominator,
    #[error("invalid channel parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) / 1e3
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w * 1e3).log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Small-scale fading applied to each (device, RB) link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FadingModel {
    /// `|h|^2 ~ Exp(1)`.
    #[default]
    Rayleigh,
    /// `|h|^2 = 1` on every link.
    Disabled,
}

/// Aggregate inter-cell interference power seen on each RB, in watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum InterferenceModel {
    Constant { power_w: f64 },
    /// `10^U` with `U` uniform on `[log10 min_w, log10 max_w]`.
    LogUniform { min_w: f64, max_w: f64 },
}

impl Default for InterferenceModel {
    fn default() -> Self {
        InterferenceModel::Constant { power_w: 0.0 }
    }
}

impl InterferenceModel {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            InterferenceModel::Constant { power_w } => power_w,
            InterferenceModel::LogUniform { min_w, max_w } => {
                if min_w == max_w {
                    return min_w;
                }
                let lo = min_w.log10();
                let hi = max_w.log10();
                10f64.powf(rng.random_range(lo..hi))
            }
        }
    }

    fn validate(&self) -> Result<(), ChannelError> {
        match *self {
            InterferenceModel::Constant { power_w } if !(power_w >= 0.0) || !power_w.is_finite() => {
                Err(invalid("interference", format!("constant power must be >= 0, got {power_w}")))
            }
            InterferenceModel::LogUniform { min_w, max_w }
                if !(min_w > 0.0) || !(max_w >= min_w) || !max_w.is_finite() =>
            {
                Err(invalid(
                    "interference",
                    format!("log-uniform range must satisfy 0 < min <= max, got [{min_w}, {max_w}]"),
                ))
            }
            _ => Ok(()),
        }
    }
}

fn invalid(field: &'static str, reason: String) -> ChannelError {
    ChannelError::InvalidParam { field, reason }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Environment constant of the path-loss law.
    pub kappa: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    pub shadowing_sigma_db: f64,
    /// AWGN power per RB.
    pub noise_power_w: f64,
    pub rb_bandwidth_hz: f64,
    #[serde(default)]
    pub fading: FadingModel,
    #[serde(default)]
    pub interference: InterferenceModel,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(invalid("kappa", format!("must be > 0, got {}", self.kappa)));
        }
        if !(self.alpha >= 2.0) || !self.alpha.is_finite() {
            return Err(invalid("alpha", format!("must be >= 2, got {}", self.alpha)));
        }
        if !(self.shadowing_sigma_db >= 0.0) || !self.shadowing_sigma_db.is_finite() {
            return Err(invalid(
                "shadowing_sigma_db",
                format!("must be >= 0, got {}", self.shadowing_sigma_db),
            ));
        }
        if !(self.noise_power_w > 0.0) || !self.noise_power_w.is_finite() {
            return Err(invalid("noise_power_w", format!("must be > 0, got {}", self.noise_power_w)));
        }
        if !(self.rb_bandwidth_hz > 0.0) || !self.rb_bandwidth_hz.is_finite() {
            return Err(invalid(
                "rb_bandwidth_hz",
                format!("must be > 0, got {}", self.rb_bandwidth_hz),
            ));
        }
        self.interference.validate()
    }

    /// Deterministic part of the gain, `kappa * d^-alpha`.
    pub fn path_gain(&self, distance_m: f64) -> f64 {
        self.kappa * distance_m.powf(-self.alpha)
    }

    pub fn link(&self, distance_m: f64, fading_power: f64, shadowing_linear: f64) -> LinkRealization {
        LinkRealization {
            distance_m,
            fading_power,
            shadowing_linear,
            gain: self.path_gain(distance_m) * fading_power * shadowing_linear,
        }
    }
}

/// One drawn link between a device and the base station on one RB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkRealization {
    pub distance_m: f64,
    /// `|h|^2`.
    pub fading_power: f64,
    /// Linear-scale shadowing factor `zeta`.
    pub shadowing_linear: f64,
    pub gain: f64,
}

/// Per-(device, RB) gains and per-RB interference for one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    /// `links[i][j]` is device `i` on RB `j`.
    pub links: Vec<Vec<LinkRealization>>,
    /// `gains[i][j] == links[i][j].gain`.
    pub gains: Vec<Vec<f64>>,
    pub interference_w: Vec<f64>,
    pub seed: u64,
}

impl ChannelRealization {
    pub fn num_devices(&self) -> usize {
        self.gains.len()
    }

    pub fn num_rbs(&self) -> usize {
        self.interference_w.len()
    }

    /// Realization restricted to the given device rows, in the given order.
    pub fn select_devices(&self, rows: &[usize]) -> ChannelRealization {
        ChannelRealization {
            links: rows.iter().map(|&i| self.links[i].clone()).collect(),
            gains: rows.iter().map(|&i| self.gains[i].clone()).collect(),
            interference_w: self.interference_w.clone(),
            seed: self.seed,
        }
    }
}

const INTERFERENCE_STREAM: u64 = 1;
const DEVICE_STREAM_BASE: u64 = 2;

/// Draws fading, shadowing and interference for every (device, RB) pair of `scenario`.
///
/// Each device draws from its own ChaCha stream and the interference from another, so a
/// device's links do not depend on how many other devices the scenario holds.
pub fn draw_realization(scenario: &Scenario, seed: u64) -> ChannelRealization {
    let params = &scenario.channel;
    let num_rbs = scenario.num_rbs;
    let shadow_db = Normal::new(0.0, params.shadowing_sigma_db.max(0.0))
        .expect("shadowing sigma validated as finite and non-negative");

    let mut links = Vec::with_capacity(scenario.devices.len());
    for (i, device) in scenario.devices.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(DEVICE_STREAM_BASE + i as u64);
        let d = distance(device.position, scenario.bs_position);
        let shadowing_linear = if params.shadowing_sigma_db > 0.0 {
            db_to_linear(shadow_db.sample(&mut rng))
        } else {
            1.0
        };
        let row = (0..num_rbs)
            .map(|_| {
                let fading_power = match params.fading {
                    FadingModel::Rayleigh => Exp1.sample(&mut rng),
                    FadingModel::Disabled => 1.0,
                };
                params.link(d, fading_power, shadowing_linear)
            })
            .collect::<Vec<_>>();
        links.push(row);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INTERFERENCE_STREAM);
    let interference_w = (0..num_rbs).map(|_| params.interference.sample(&mut rng)).collect();

    let gains = links.iter().map(|row: &Vec<LinkRealization>| row.iter().map(|l| l.gain).collect()).collect();
    ChannelRealization {
        links,
        gains,
        interference_w,
        seed,
    }
}

/// `gain * power / (interference + noise)`.
pub fn sinr(gain: f64, power_w: f64, interference_w: f64, noise_w: f64) -> Result<f64, ChannelError> {
    let denom = interference_w + noise_w;
    if denom <= 0.0 {
        return Err(ChannelError::ZeroDenominator);
    }
    Ok(gain * power_w / denom)
}

/// Shannon rate `B * log2(1 + sinr)` in bits/s.
pub fn rate(bandwidth_hz: f64, sinr: f64) -> f64 {
    bandwidth_hz * sinr.ln_1p() / std::f64::consts::LN_2
}
