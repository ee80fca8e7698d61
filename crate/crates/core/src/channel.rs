//! Synthetic wideband MIMO channels from a geometric sum of paths.
//!
//! Each path carries a complex gain, a delay (frequency selectivity across
//! subcarriers), a Doppler shift (time variation across blocks) and a
//! direction of arrival at a half-wavelength uniform planar array.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{ChannelTensor, Domain, Provenance};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelConfig {
    /// UPA columns (horizontal elements).
    pub m_h: usize,
    /// UPA rows (vertical elements).
    pub m_v: usize,
    pub subcarriers: usize,
    pub subcarrier_spacing_hz: f64,
    pub carrier_hz: f64,
    pub speed_mps: f64,
    pub block_duration_s: f64,
    pub paths: usize,
    /// Mean of the exponential delay profile.
    pub delay_spread_s: f64,
    /// Centre of the sector UE-side arrival angles are drawn from, measured
    /// from the direction of motion.
    pub arrival_center_rad: f64,
    /// Width of that sector. `2π` gives isotropic (Jakes) scattering.
    pub arrival_spread_rad: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            m_h: 8,
            m_v: 8,
            subcarriers: 50,
            subcarrier_spacing_hz: 15e3,
            carrier_hz: 2.53e9,
            speed_mps: 1.0 / 3.6,
            block_duration_s: 20e-3,
            paths: 128,
            delay_spread_s: 100e-9,
            arrival_center_rad: PI / 2.0,
            arrival_spread_rad: 15f64.to_radians(),
        }
    }
}

impl ChannelConfig {
    pub fn antennas(&self) -> usize {
        self.m_h * self.m_v
    }

    /// Largest Doppler shift magnitude, `v f_c / c`.
    pub fn max_doppler_hz(&self) -> f64 {
        self.speed_mps * self.carrier_hz / SPEED_OF_LIGHT
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.m_h == 0 || self.m_v == 0 {
            return bad(format!("m_h and m_v must be >= 1 (got {}x{})", self.m_h, self.m_v));
        }
        if self.subcarriers == 0 {
            return bad("subcarriers must be >= 1".into());
        }
        if self.paths == 0 {
            return bad("paths must be >= 1".into());
        }
        if !(self.subcarrier_spacing_hz > 0.0) {
            return bad(format!("subcarrier_spacing_hz must be > 0 (got {})", self.subcarrier_spacing_hz));
        }
        if !(self.block_duration_s > 0.0) {
            return bad(format!("block_duration_s must be > 0 (got {})", self.block_duration_s));
        }
        if !(self.carrier_hz > 0.0) {
            return bad(format!("carrier_hz must be > 0 (got {})", self.carrier_hz));
        }
        if !(self.delay_spread_s >= 0.0) {
            return bad(format!("delay_spread_s must be >= 0 (got {})", self.delay_spread_s));
        }
        if !(self.speed_mps >= 0.0) || !self.speed_mps.is_finite() {
            return bad(format!("speed_mps must be finite and >= 0 (got {})", self.speed_mps));
        }
        if !self.arrival_center_rad.is_finite() {
            return bad(format!("arrival_center_rad must be finite (got {})", self.arrival_center_rad));
        }
        if !(0.0..=2.0 * PI).contains(&self.arrival_spread_rad) {
            return bad(format!(
                "arrival_spread_rad must lie in [0, 2π] (got {})",
                self.arrival_spread_rad
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub gain: Complex64,
    pub delay_s: f64,
    pub doppler_hz: f64,
    /// Azimuth at the BS array.
    pub azimuth: f64,
    /// Elevation at the BS array.
    pub elevation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub paths: Vec<Path>,
}

impl PathSet {
    pub fn total_power(&self) -> f64 {
        self.paths.iter().map(|p| p.gain.norm_sqr()).sum()
    }
}

/// Draw a random path set for `config`.
///
/// Delays follow an exponential profile with mean `delay_spread_s`, mean path
/// powers decay as `exp(-delay / delay_spread_s)`, and gains are complex
/// Gaussian with those powers. The realized gains are rescaled so the total
/// path power is exactly 1.
pub fn draw_paths<R: Rng + ?Sized>(config: &ChannelConfig, rng: &mut R) -> Result<PathSet> {
    config.validate()?;
    let nu_max = config.max_doppler_hz();
    let delay_dist = if config.delay_spread_s > 0.0 {
        Some(Exp::new(1.0 / config.delay_spread_s).map_err(|e| Error::InvalidConfig(e.to_string()))?)
    } else {
        None
    };
    let half_spread = 0.5 * config.arrival_spread_rad;

    let mut paths = Vec::with_capacity(config.paths);
    for _ in 0..config.paths {
        let delay_s = delay_dist.as_ref().map_or(0.0, |d| d.sample(rng));
        let mean_power = if config.delay_spread_s > 0.0 {
            (-delay_s / config.delay_spread_s).exp()
        } else {
            1.0
        };
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let gain = Complex64::new(re, im) * (0.5 * mean_power).sqrt();
        let psi = if half_spread > 0.0 {
            config.arrival_center_rad + rng.random_range(-half_spread..half_spread)
        } else {
            config.arrival_center_rad
        };
        let azimuth = rng.random_range(-PI..PI);
        let elevation = rng.random_range(-PI / 2.0..PI / 2.0);
        paths.push(Path {
            gain,
            delay_s,
            doppler_hz: nu_max * psi.cos(),
            azimuth,
            elevation,
        });
    }

    let total: f64 = paths.iter().map(|p| p.gain.norm_sqr()).sum();
    if !(total > 0.0) {
        return Err(Error::Numeric("drawn path gains have zero total power".into()));
    }
    let norm = total.sqrt().recip();
    for p in &mut paths {
        p.gain *= norm;
    }
    Ok(PathSet { paths })
}

/// Half-wavelength UPA response. Element `(p, q)` sits at flat index
/// `q * m_h + p` and equals `exp(jπ(p sinθ cosφ + q sinφ))`.
pub fn steering_vector(azimuth: f64, elevation: f64, m_h: usize, m_v: usize) -> Vec<Complex64> {
    let u = azimuth.sin() * elevation.cos();
    let w = elevation.sin();
    let mut out = Vec::with_capacity(m_h * m_v);
    for q in 0..m_v {
        for p in 0..m_h {
            out.push(Complex64::from_polar(1.0, PI * (p as f64 * u + q as f64 * w)));
        }
    }
    out
}

/// Evaluate the sum-of-paths model on `blocks` coherence blocks.
///
/// `values[n, l, m] = Σ_p g_p · e^{j2π ν_p n T_B} · e^{-j2π l Δf τ_p} · a_p[m]`
/// with zero-based `n` and `l`.
pub fn synthesize(config: &ChannelConfig, paths: &PathSet, blocks: usize) -> Result<ChannelTensor> {
    config.validate()?;
    if blocks == 0 {
        return Err(Error::InvalidConfig("block count must be >= 1".into()));
    }
    let n_sub = config.subcarriers;
    let n_ant = config.antennas();
    let n_paths = paths.paths.len();

    let steering: Vec<Vec<Complex64>> = paths
        .paths
        .iter()
        .map(|p| steering_vector(p.azimuth, p.elevation, config.m_h, config.m_v))
        .collect();
    // freq[l][p]
    let freq: Vec<Vec<Complex64>> = (0..n_sub)
        .map(|l| {
            paths
                .paths
                .iter()
                .map(|p| Complex64::from_polar(1.0, -2.0 * PI * l as f64 * config.subcarrier_spacing_hz * p.delay_s))
                .collect()
        })
        .collect();

    let mut values = vec![Complex64::new(0.0, 0.0); blocks * n_sub * n_ant];
    let mut time_coef = vec![Complex64::new(0.0, 0.0); n_paths];
    let mut coef = vec![Complex64::new(0.0, 0.0); n_paths];
    for n in 0..blocks {
        let t = n as f64 * config.block_duration_s;
        for (c, p) in time_coef.iter_mut().zip(&paths.paths) {
            *c = p.gain * Complex64::from_polar(1.0, 2.0 * PI * p.doppler_hz * t);
        }
        for l in 0..n_sub {
            for ((c, tc), f) in coef.iter_mut().zip(&time_coef).zip(&freq[l]) {
                *c = tc * f;
            }
            let row = &mut values[(n * n_sub + l) * n_ant..(n * n_sub + l + 1) * n_ant];
            for (c, a) in coef.iter().zip(&steering) {
                for (v, &am) in row.iter_mut().zip(a) {
                    *v += c * am;
                }
            }
        }
    }
    ChannelTensor::new(blocks, n_sub, n_ant, values, Domain::Subcarrier, Provenance::True)
}
