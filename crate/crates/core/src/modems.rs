//! Single-layer clipping modulators (ACO, DCO, PAM-DMT), subcarrier index
//! sets, and closed-form transmit power relations.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error, Result};
use crate::numerics::{check_frame_len, ifft, FrameSignal, FrameSpectrum};

/// Default DC bias of a DCO layer in units of its standard deviation.
pub const DEFAULT_BIAS_MULTIPLIER: f64 = 3.0;

/// Relative magnitude below which a bin counts as empty.
const EMPTY_BIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    /// Odd-harmonic loading clipped at zero.
    Aco,
    /// DC-biased loading.
    Dco,
    /// Purely imaginary loading clipped at zero.
    Pam,
}

impl LayerKind {
    /// Factor applied to received bins before detection; zero-clipping
    /// halves the useful amplitude.
    pub fn detection_scale(self) -> f64 {
        match self {
            LayerKind::Aco | LayerKind::Pam => 2.0,
            LayerKind::Dco => 1.0,
        }
    }

    /// Ratio of loaded symbol power to useful (post-clipping) power.
    pub fn symbol_power_factor(self) -> f64 {
        self.detection_scale().powi(2)
    }

    pub fn is_zero_clipped(self) -> bool {
        !matches!(self, LayerKind::Dco)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Aco,
    Dco,
    Pam,
    Ado,
    Haco,
    Laco,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [Scheme::Aco, Scheme::Dco, Scheme::Pam, Scheme::Ado, Scheme::Haco, Scheme::Laco];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Aco => "aco",
            Scheme::Dco => "dco",
            Scheme::Pam => "pam",
            Scheme::Ado => "ado",
            Scheme::Haco => "haco",
            Scheme::Laco => "laco",
        }
    }

    /// Largest layer count supported at frame length `n`.
    pub fn max_layers(self, n: usize) -> usize {
        match self {
            Scheme::Aco | Scheme::Dco | Scheme::Pam => 1,
            Scheme::Ado | Scheme::Haco => 2,
            Scheme::Laco => (n / 2).trailing_zeros() as usize,
        }
    }

    pub fn check_layers(self, layers: usize, n: usize) -> Result<()> {
        check_frame_len(n)?;
        let ok = match self {
            Scheme::Laco => (1..=self.max_layers(n)).contains(&layers),
            _ => layers == self.max_layers(n),
        };
        if !ok {
            return config(format!(
                "{} does not support {layers} layers at N = {n} (max {})",
                self.name(),
                self.max_layers(n)
            ));
        }
        Ok(())
    }

    pub fn layer_kinds(self, layers: usize) -> Vec<LayerKind> {
        match self {
            Scheme::Aco => vec![LayerKind::Aco],
            Scheme::Dco => vec![LayerKind::Dco],
            Scheme::Pam => vec![LayerKind::Pam],
            Scheme::Ado => vec![LayerKind::Aco, LayerKind::Dco],
            Scheme::Haco => vec![LayerKind::Aco, LayerKind::Pam],
            Scheme::Laco => vec![LayerKind::Aco; layers],
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Usage(format!("unknown scheme '{s}' (expected aco, dco, pam, ado, haco or laco)")))
    }
}

/// Electrical, optical and effective power of a transmit signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerTriple {
    pub elec: f64,
    pub opt: f64,
    pub eff: f64,
}

/// Data-carrying subcarriers of layer `layer` (1-based), both halves of the
/// spectrum, ascending.
pub fn effective_subcarriers(scheme: Scheme, layer: usize, n: usize) -> Result<Vec<usize>> {
    check_frame_len(n)?;
    let layers = scheme.max_layers(n);
    if layer == 0 || layer > layers {
        return config(format!("layer {layer} out of range 1..={layers} for {scheme} at N = {n}"));
    }
    let half = n / 2;
    let set = match (scheme, layer) {
        (Scheme::Dco | Scheme::Pam, _) => (1..n).filter(|&k| k != half).collect(),
        (Scheme::Laco, j) => {
            let step = 1usize << j;
            let first = 1usize << (j - 1);
            (first..n).step_by(step).collect()
        }
        (_, 1) => (1..n).step_by(2).collect(),
        (_, _) => (2..n).step_by(2).filter(|&k| k != half).collect(),
    };
    Ok(set)
}

/// Subcarriers that receive residual clipping noise from layer `layer`:
/// nonzero multiples of `2^layer` other than `N/2`.
pub fn affected_subcarriers(layer: usize, n: usize) -> Result<Vec<usize>> {
    check_frame_len(n)?;
    let max = (n / 2).trailing_zeros() as usize;
    if layer == 0 || layer > max {
        return config(format!("layer {layer} out of range 1..={max} at N = {n}"));
    }
    let step = 1usize << layer;
    Ok((step..n).step_by(step).filter(|&k| k != n / 2).collect())
}

fn peak(spectrum: &FrameSpectrum) -> f64 {
    spectrum.iter().map(|b| b.norm()).fold(0.0, f64::max)
}

fn check_hermitian(spectrum: &FrameSpectrum) -> Result<()> {
    if !spectrum.is_hermitian(EMPTY_BIN) {
        return config("spectrum is not Hermitian symmetric");
    }
    Ok(())
}

/// `(s)^+`.
pub fn clip_at_zero(s: &FrameSignal) -> FrameSignal {
    s.positive_part()
}

/// `(s + bias)^+`.
pub fn clip_with_bias(s: &FrameSignal, bias: f64) -> FrameSignal {
    let mut out = s.clone();
    for v in out.iter_mut() {
        *v = (*v + bias).max(0.0);
    }
    out
}

/// ACO modulation of a spectrum loaded on odd subcarriers only.
pub fn aco_modulate(spectrum: &FrameSpectrum) -> Result<FrameSignal> {
    check_hermitian(spectrum)?;
    let limit = EMPTY_BIN * peak(spectrum);
    if let Some(k) = (0..spectrum.len()).step_by(2).find(|&k| spectrum[k].norm() > limit) {
        return config(format!("ACO load on even subcarrier {k}"));
    }
    Ok(clip_at_zero(&ifft(spectrum)?))
}

/// Standard deviation of the unbiased DCO signal implied by its spectrum.
pub fn spectrum_std(spectrum: &FrameSpectrum) -> f64 {
    let n = spectrum.len() as f64;
    (spectrum.iter().map(|b| b.norm_sqr()).sum::<f64>() / (n * n)).sqrt()
}

/// DCO modulation with bias `bias_multiplier · std(s)`; returns the signal
/// and the bias.
pub fn dco_modulate(spectrum: &FrameSpectrum, bias_multiplier: f64) -> Result<(FrameSignal, f64)> {
    check_hermitian(spectrum)?;
    let half = spectrum.len() / 2;
    let limit = EMPTY_BIN * peak(spectrum);
    if spectrum[0].norm() > limit || spectrum[half].norm() > limit {
        return config("DCO loads must leave subcarriers 0 and N/2 empty");
    }
    if !(bias_multiplier >= 0.0) {
        return domain(format!("bias multiplier must be >= 0, got {bias_multiplier}"));
    }
    let bias = bias_multiplier * spectrum_std(spectrum);
    Ok((clip_with_bias(&ifft(spectrum)?, bias), bias))
}

/// PAM-DMT modulation of purely imaginary loads.
pub fn pam_modulate(spectrum: &FrameSpectrum) -> Result<FrameSignal> {
    check_hermitian(spectrum)?;
    let half = spectrum.len() / 2;
    let limit = EMPTY_BIN * peak(spectrum);
    if spectrum[0].norm() > limit || spectrum[half].norm() > limit {
        return config("PAM loads must leave subcarriers 0 and N/2 empty");
    }
    if let Some(k) = (0..spectrum.len()).find(|&k| spectrum[k].re.abs() > limit) {
        return config(format!("PAM load on subcarrier {k} has a real part"));
    }
    Ok(clip_at_zero(&ifft(spectrum)?))
}

fn layer_moments(kind: LayerKind, eff: f64, bias_multiplier: f64) -> (f64, f64) {
    // (mean, mean square) of the clipped layer for Gaussian s.
    match kind {
        LayerKind::Aco | LayerKind::Pam => {
            let sigma = (4.0 * eff).sqrt();
            (sigma / (2.0 * PI).sqrt(), sigma * sigma / 2.0)
        }
        LayerKind::Dco => {
            let var = eff;
            (bias_multiplier * var.sqrt(), (1.0 + bias_multiplier * bias_multiplier) * var)
        }
    }
}

/// Transmit powers of a superposition of independent Gaussian layers with
/// the given per-layer effective powers, ignoring residual DCO clipping.
pub fn layered_power(kinds: &[LayerKind], layer_eff: &[f64], bias_multiplier: f64) -> Result<PowerTriple> {
    if kinds.len() != layer_eff.len() || kinds.is_empty() {
        return config("one effective power per layer is required");
    }
    if layer_eff.iter().any(|&p| !(p >= 0.0)) {
        return domain("effective powers must be >= 0");
    }
    let mut mean = 0.0;
    let mut variance = 0.0;
    for (&kind, &eff) in kinds.iter().zip(layer_eff) {
        let (m, m2) = layer_moments(kind, eff, bias_multiplier);
        mean += m;
        variance += m2 - m * m;
    }
    Ok(PowerTriple { elec: variance + mean * mean, opt: mean, eff: layer_eff.iter().sum() })
}

/// LACO factor `(√2^J − 1)/(√2^J + 1)`.
fn laco_layer_factor(layers: usize) -> f64 {
    let r = SQRT_2.powi(layers as i32);
    (r - 1.0) / (r + 1.0)
}

/// Closed-form transmit powers for effective power `p_eff` spread equally
/// over the effective subcarriers (`layers` is used by LACO only).
pub fn power_relations(scheme: Scheme, p_eff: f64, layers: usize) -> Result<PowerTriple> {
    if !(p_eff >= 0.0) {
        return domain(format!("effective power must be >= 0, got {p_eff}"));
    }
    if scheme == Scheme::Laco && layers == 0 {
        return config("LACO needs at least one layer");
    }
    let root = p_eff.sqrt();
    let (elec, opt) = match scheme {
        Scheme::Aco | Scheme::Pam => (2.0 * p_eff, (2.0 * p_eff / PI).sqrt()),
        Scheme::Dco => (10.0 * p_eff, 3.0 * root),
        Scheme::Ado => ((6.0 + 6.0 / (2.0 * PI).sqrt()) * p_eff, (1.0 / PI.sqrt() + 3.0 / SQRT_2) * root),
        Scheme::Haco => ((2.0 + 2.0 / PI) * p_eff, 2.0 / PI.sqrt() * root),
        Scheme::Laco => {
            let g = 2.0 / ((3.0 - 2.0 * SQRT_2) * PI) * laco_layer_factor(layers);
            ((2.0 - 2.0 / PI + g) * p_eff, (g * p_eff).sqrt())
        }
    };
    Ok(PowerTriple { elec, opt, eff: p_eff })
}

/// `P_elec / P_eff` of the closed forms.
pub fn elec_to_eff_ratio(scheme: Scheme, layers: usize) -> Result<f64> {
    Ok(power_relations(scheme, 1.0, layers)?.elec)
}

/// Per-layer share of the effective power under equal per-subcarrier
/// loading at frame length `n`.
pub fn equal_layer_shares(scheme: Scheme, layers: usize, n: usize) -> Result<Vec<f64>> {
    scheme.check_layers(layers, n)?;
    let sizes = (1..=layers)
        .map(|j| effective_subcarriers(scheme, j, n).map(|s| s.len() as f64))
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = sizes.iter().sum();
    Ok(sizes.into_iter().map(|s| s / total).collect())
}
