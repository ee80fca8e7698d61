//! Pilot transmission and least-squares channel estimation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{ChannelTensor, Domain, Provenance};

/// Convert decibels to a linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Column `k` of the `tau`-point DFT matrix: entry `t` is `exp(-j2π t k / tau)`.
pub fn dft_pilot(tau: usize, k: usize) -> Result<Vec<Complex64>> {
    if k >= tau {
        return Err(Error::InvalidConfig(format!(
            "pilot column {k} out of range for tau = {tau}"
        )));
    }
    Ok((0..tau)
        .map(|t| Complex64::from_polar(1.0, -2.0 * PI * (t * k % tau) as f64 / tau as f64))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PilotScheme {
    pub pilot: Vec<Complex64>,
    /// Linear SNR.
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PilotConfig {
    pub tau: usize,
    pub column: usize,
}

impl Default for PilotConfig {
    fn default() -> Self {
        Self { tau: 4, column: 1 }
    }
}

impl PilotScheme {
    pub fn new(pilot: Vec<Complex64>, rho: f64) -> Result<Self> {
        if pilot.is_empty() {
            return Err(Error::InvalidConfig("pilot length must be >= 1".into()));
        }
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::InvalidConfig(format!("SNR must be positive and finite, got {rho}")));
        }
        Ok(Self { pilot, rho })
    }

    /// DFT pilot of length `tau` (column `k`) at `snr_db`.
    pub fn dft(tau: usize, k: usize, snr_db: f64) -> Result<Self> {
        Self::new(dft_pilot(tau, k)?, db_to_linear(snr_db))
    }

    pub fn from_config(cfg: &PilotConfig, snr_db: f64) -> Result<Self> {
        Self::dft(cfg.tau, cfg.column, snr_db)
    }

    pub fn tau(&self) -> usize {
        self.pilot.len()
    }

    fn energy(&self) -> f64 {
        self.pilot.iter().map(|p| p.norm_sqr()).sum()
    }

    /// Per-element LS error variance `1 / (rho ‖φ‖²)`.
    pub fn ls_error_variance(&self) -> f64 {
        1.0 / (self.rho * self.energy())
    }
}

/// `√ρ · h · φᵀ` as an M×tau row-major matrix.
pub fn transmit_pilots_noiseless(h: &[Complex64], scheme: &PilotScheme) -> Vec<Complex64> {
    let amp = scheme.rho.sqrt();
    let mut y = Vec::with_capacity(h.len() * scheme.tau());
    for &hm in h {
        let s = hm * amp;
        y.extend(scheme.pilot.iter().map(|&p| s * p));
    }
    y
}

/// Circularly-symmetric complex Gaussian sample with unit variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Received pilot block `Y = √ρ h φᵀ + Z` with `Z ~ CN(0, 1)` i.i.d.
pub fn transmit_pilots<R: Rng + ?Sized>(h: &[Complex64], scheme: &PilotScheme, rng: &mut R) -> Vec<Complex64> {
    let mut y = transmit_pilots_noiseless(h, scheme);
    for v in &mut y {
        *v += complex_gaussian(rng);
    }
    y
}

/// LS estimate `(ΦᴴΦ)⁻¹Φᴴ vec(Y)` with `Φ = √ρ (φ ⊗ I_M)`.
///
/// `ΦᴴΦ = ρ‖φ‖² I_M`, so this reduces to `Y conj(φ) / (√ρ ‖φ‖²)`.
pub fn ls_estimate(y: &[Complex64], scheme: &PilotScheme) -> Result<Vec<Complex64>> {
    let tau = scheme.tau();
    let energy = scheme.energy();
    if !(energy > 0.0) {
        return Err(Error::Numeric("degenerate pilot with zero energy".into()));
    }
    if tau == 0 || !y.len().is_multiple_of(tau) {
        return Err(Error::Dimension(format!(
            "received block of {} entries is not M x {tau}",
            y.len()
        )));
    }
    let inv = 1.0 / (scheme.rho.sqrt() * energy);
    Ok(y.chunks_exact(tau)
        .map(|row| row.iter().zip(&scheme.pilot).map(|(&yv, p)| yv * p.conj()).sum::<Complex64>() * inv)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimationNoise {
    /// Fresh AWGN per (block, subcarrier), derived from this seed.
    Seeded(u64),
    /// Noiseless pilots; the estimate reproduces the channel.
    Off,
}

/// Run pilot transmission and LS estimation independently for every
/// (block, subcarrier) cell of a true subcarrier-domain tensor.
pub fn estimate_trace(tensor: &ChannelTensor, scheme: &PilotScheme, noise: EstimationNoise) -> Result<ChannelTensor> {
    if tensor.domain != Domain::Subcarrier {
        return Err(Error::Contract("estimate_trace needs a subcarrier-domain tensor".into()));
    }
    if tensor.provenance != Provenance::True {
        return Err(Error::Contract(format!(
            "estimate_trace needs true channels, got {}",
            tensor.provenance.as_str()
        )));
    }
    let mut out = tensor.clone();
    out.provenance = Provenance::Estimated;
    let n_ant = tensor.antennas();
    let mut h = vec![Complex64::new(0.0, 0.0); n_ant];
    for n in 0..tensor.blocks() {
        for l in 0..tensor.subcarriers() {
            tensor.read_vector(n, l, &mut h);
            let y = match noise {
                EstimationNoise::Seeded(seed) => {
                    let mut r = rng::stream(seed, "pilot-noise", &[n as u64, l as u64]);
                    transmit_pilots(&h, scheme, &mut r)
                }
                EstimationNoise::Off => transmit_pilots_noiseless(&h, scheme),
            };
            let g = ls_estimate(&y, scheme)?;
            out.write_vector(n, l, &g);
        }
    }
    Ok(out)
}
