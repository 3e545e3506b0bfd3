//! SER-constrained bit and power allocation for LACO-OFDM.
//!
//! Power is water-filled over the active subcarriers, bits are floored
//! through an SNR gap, subcarriers that get no bits are dropped and the fill
//! is repeated. In RCN-aware mode the per-bin noise is then replaced by the
//! worst-case total noise for the new loading and the whole procedure
//! restarts until the noise stops moving.
//!
//! Allocation runs on the bins `1..N/2`; the mirrored bins carry the
//! conjugate symbols and identical power, so the half-spectrum budget is
//! `N²·P_eff/2`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelProfile;
use crate::error::{config, domain, Result};
use crate::modems::Scheme;
use crate::multilayer::SchemeConfig;
use crate::numerics::qfunc_inv;
use crate::rcn_model::{total_noise_worst, DEFAULT_RIMS};
use crate::ser_theory::Mode;

pub const DEFAULT_MAX_BITS: u32 = 8;
pub const DEFAULT_MAX_ITERS: usize = 50;
pub const DEFAULT_TOLERANCE: f64 = 1e-3;

/// `Γ(p_e) = Q⁻¹(p_e/4)² / 3`.
pub fn snr_gap(target_ser: f64) -> Result<f64> {
    if !(target_ser > 0.0 && target_ser < 1.0) {
        return domain(format!("target SER must lie in (0, 1), got {target_ser}"));
    }
    Ok(qfunc_inv(target_ser / 4.0)?.powi(2) / 3.0)
}

/// Maximizes `Σ log2(1 + gains[k]·P(k)/noise[k])` over `k ∈ active` subject
/// to `Σ P(k) = budget`. Returns one power per input bin, zero off `active`.
pub fn waterfill(gains: &[f64], noise: &[f64], active: &[usize], budget: f64) -> Result<Vec<f64>> {
    if !(budget > 0.0) {
        return domain(format!("power budget must be positive, got {budget}"));
    }
    if active.is_empty() {
        return domain("no active subcarriers");
    }
    if gains.len() != noise.len() {
        return config("gains and noise must have the same length");
    }
    let mut levels = Vec::with_capacity(active.len());
    for &k in active {
        if k >= gains.len() {
            return config(format!("active bin {k} out of range"));
        }
        if !(gains[k] > 0.0) || !(noise[k] >= 0.0) {
            return domain(format!("bin {k} needs a positive gain and nonnegative noise"));
        }
        levels.push(noise[k] / gains[k]);
    }
    let mut sorted = levels.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let mut prefix = 0.0;
    let mut mu = f64::NAN;
    for (m, &level) in sorted.iter().enumerate() {
        prefix += level;
        let candidate = (budget + prefix) / (m + 1) as f64;
        if candidate <= level && m > 0 {
            break;
        }
        mu = candidate;
    }
    let mut powers = vec![0.0; gains.len()];
    for (&k, &level) in active.iter().zip(&levels) {
        powers[k] = (mu - level).max(0.0);
    }
    Ok(powers)
}

/// `Σ log2(1 + gains[k]·P(k)/noise[k])` over `active`.
pub fn rate_objective(gains: &[f64], noise: &[f64], active: &[usize], powers: &[f64]) -> f64 {
    active.iter().map(|&k| (gains[k] * powers[k] / noise[k]).ln_1p()).sum::<f64>() / std::f64::consts::LN_2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationSettings {
    pub target_ser: f64,
    pub mode: Mode,
    pub rims: u8,
    pub max_bits: u32,
    pub max_iters: usize,
    /// Convergence when `‖ΔP_z‖² ≤ tolerance · ‖P_z‖² / N`.
    pub tolerance: f64,
}

impl Default for AllocationSettings {
    fn default() -> Self {
        Self {
            target_ser: 1e-2,
            mode: Mode::RcnAware,
            rims: DEFAULT_RIMS,
            max_bits: DEFAULT_MAX_BITS,
            max_iters: DEFAULT_MAX_ITERS,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

/// State after one outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub total_bits: u64,
    /// Active half-spectrum bins after pruning.
    pub active: Vec<usize>,
    /// `‖ΔP_z‖²` against the noise used in this iteration.
    pub noise_change: f64,
    pub bits: Vec<u32>,
    pub powers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub n: usize,
    /// Bits per half-spectrum bin `k < N/2` (bin 0 is always empty).
    pub bits: Vec<u32>,
    /// Useful effective power `P_s(k)` per half-spectrum bin.
    pub powers: Vec<f64>,
    /// Worst-case post-equalization noise for the final loading, all `N` bins.
    pub noise: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the loading started repeating with period two. The loading
    /// with fewer bits from the cycle is returned.
    pub limit_cycle: bool,
    pub history: Vec<IterationRecord>,
}

impl AllocationResult {
    pub fn total_bits(&self) -> u64 {
        self.bits.iter().map(|&b| b as u64).sum()
    }

    /// Mean bits over the `N/2 − 1` data bins of one half spectrum.
    pub fn average_bits(&self) -> f64 {
        self.total_bits() as f64 / (self.n / 2 - 1) as f64
    }

    pub fn orders(&self) -> Vec<usize> {
        self.bits.iter().map(|&b| if b == 0 { 0 } else { 1usize << b }).collect()
    }

    /// LACO configuration with every layer that the loading can use.
    pub fn to_scheme_config(&self) -> Result<SchemeConfig> {
        to_laco_config(self.n, &self.bits, &self.powers)
    }

    /// Configuration using the loading from outer iteration `i` (0-based).
    pub fn iteration_config(&self, i: usize) -> Result<SchemeConfig> {
        let rec = self.history.get(i).ok_or_else(|| crate::Error::Usage(format!("no iteration {i}")))?;
        to_laco_config(self.n, &rec.bits, &rec.powers)
    }
}

fn to_laco_config(n: usize, bits: &[u32], powers: &[f64]) -> Result<SchemeConfig> {
    let orders: Vec<usize> = bits.iter().map(|&b| if b == 0 { 0 } else { 1usize << b }).collect();
    let layers = Scheme::Laco.max_layers(n);
    SchemeConfig::from_bin_loads(Scheme::Laco, n, layers, &orders, powers)
}

fn bits_for(snr: f64, gap: f64, max_bits: u32) -> u32 {
    let b = (1.0 + snr / gap).log2().floor();
    if b <= 0.0 {
        0
    } else {
        (b as u32).min(max_bits)
    }
}

/// Loads LACO-OFDM over `channel` with effective power budget `p_eff`.
pub fn allocate(channel: &ChannelProfile, p_eff: f64, settings: &AllocationSettings) -> Result<AllocationResult> {
    let gap = snr_gap(settings.target_ser)?;
    if !(p_eff > 0.0) {
        return domain(format!("effective power must be positive, got {p_eff}"));
    }
    if settings.max_bits == 0 || settings.max_bits > 16 {
        return config("bit cap must lie in 1..=16");
    }
    let n = channel.n();
    let half = n / 2;
    let channel_noise = channel.noise_map();
    // The fill works on post-equalization SNR `P_s / P_z`, so gains are one.
    let unit = vec![1.0; half];
    let budget = n as f64 * n as f64 * p_eff / 2.0;
    let mut noise = channel_noise.clone();
    let mut history = Vec::new();
    let mut converged = false;
    let mut limit_cycle = false;
    let mut bits = vec![0u32; half];
    let mut powers = vec![0.0; half];
    let mut final_noise = channel_noise.clone();
    for _ in 0..settings.max_iters.max(1) {
        let mut active: Vec<usize> = (1..half).collect();
        bits = vec![0; half];
        powers = vec![0.0; half];
        while !active.is_empty() {
            let fill = waterfill(&unit, &noise[..half], &active, budget)?;
            let trial: Vec<u32> = active.iter().map(|&k| bits_for(fill[k] / noise[k], gap, settings.max_bits)).collect();
            if trial.iter().all(|&b| b > 0) {
                for (&k, &b) in active.iter().zip(&trial) {
                    bits[k] = b;
                    powers[k] = fill[k];
                }
                break;
            }
            active = active.iter().zip(&trial).filter(|(_, &b)| b > 0).map(|(&k, _)| k).collect();
        }
        let next = match settings.mode {
            Mode::RcnUnaware => channel_noise.clone(),
            Mode::RcnAware => {
                let cfg = to_laco_config(n, &bits, &powers)?;
                total_noise_worst(&cfg, &channel_noise, settings.rims)?.noise
            }
        };
        let change: f64 = next.iter().zip(&noise).map(|(a, b)| (a - b).powi(2)).sum();
        let scale: f64 = noise.iter().map(|z| z * z).sum::<f64>() / n as f64;
        history.push(IterationRecord {
            total_bits: bits.iter().map(|&b| b as u64).sum(),
            active,
            noise_change: change,
            bits: bits.clone(),
            powers: powers.clone(),
        });
        final_noise = next.clone();
        if change <= settings.tolerance * scale {
            converged = true;
            break;
        }
        let i = history.len() - 1;
        if i >= 2 && history[i - 2].bits == bits && history[i - 2].powers == powers {
            limit_cycle = true;
            let prev = &history[i - 1];
            if prev.total_bits < history[i].total_bits {
                bits = prev.bits.clone();
                powers = prev.powers.clone();
                final_noise = noise;
            }
            break;
        }
        noise = next;
    }
    Ok(AllocationResult { n, bits, powers, noise: final_noise, iterations: history.len(), converged, limit_cycle, history })
}
