//! Layered transmitters and the successive-cancellation receiver.
//!
//! Each layer owns a set of data subcarriers. The transmitter clips every
//! layer separately and adds the results. The receiver detects layers in
//! order: transform the residual, read the layer's bins (doubled for
//! zero-clipped layers), remodulate the decisions exactly as the transmitter
//! would and subtract them before moving on.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::constellation::{Constellation, ConstellationKind};
use crate::error::{config, Error, Result};
use crate::modems::{clip_at_zero, clip_with_bias, effective_subcarriers, LayerKind, Scheme, DEFAULT_BIAS_MULTIPLIER};
use crate::numerics::{check_frame_len, Complex, Fft, FrameSignal, FrameSpectrum};

/// Loads of one layer over its half-spectrum data bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerLoad {
    pub kind: LayerKind,
    /// Data bins below `N/2`, ascending; mirrors are implied.
    pub bins: Vec<usize>,
    /// Constellation order per bin; `0` leaves the bin empty.
    pub orders: Vec<usize>,
    /// Useful (post-clipping) power per bin. The loaded symbol power is
    /// this times [`LayerKind::symbol_power_factor`].
    pub powers: Vec<f64>,
}

impl LayerLoad {
    /// Number of loaded bins in this half of the spectrum.
    pub fn loaded(&self) -> usize {
        self.orders.iter().filter(|&&m| m > 0).count()
    }

    /// Size of the layer's full (two-sided) subcarrier set.
    pub fn set_size(&self) -> usize {
        2 * self.bins.len()
    }

    pub fn symbol_power(&self, slot: usize) -> f64 {
        self.kind.symbol_power_factor() * self.powers[slot]
    }

    pub fn constellation_kind(&self) -> ConstellationKind {
        match self.kind {
            LayerKind::Pam => ConstellationKind::Pam,
            _ => ConstellationKind::Qam,
        }
    }
}

/// Scheme, frame length and per-subcarrier loads of a layered transmitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    pub n: usize,
    pub layers: Vec<LayerLoad>,
    /// DCO bias in standard deviations of the unbiased DCO layer.
    pub bias_multiplier: f64,
}

impl SchemeConfig {
    /// Every data bin of every layer carries `order`-point symbols at the
    /// same useful power, chosen so the total effective power is `p_eff`.
    pub fn uniform(scheme: Scheme, n: usize, layers: usize, order: usize, p_eff: f64) -> Result<Self> {
        scheme.check_layers(layers, n)?;
        let sets = half_sets(scheme, layers, n)?;
        let loaded: usize = sets.iter().map(|s| 2 * s.len()).sum();
        let per_bin = (n * n) as f64 * p_eff / loaded as f64;
        let kinds = scheme.layer_kinds(layers);
        let layers = kinds
            .into_iter()
            .zip(sets)
            .map(|(kind, bins)| LayerLoad {
                kind,
                orders: vec![order; bins.len()],
                powers: vec![per_bin; bins.len()],
                bins,
            })
            .collect();
        let cfg = Self { scheme, n, layers, bias_multiplier: DEFAULT_BIAS_MULTIPLIER };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads given per subcarrier index (`orders[k]`, `powers[k]` for
    /// `k < N/2`); bins are assigned to layers by the scheme's index sets.
    pub fn from_bin_loads(scheme: Scheme, n: usize, layers: usize, orders: &[usize], powers: &[f64]) -> Result<Self> {
        scheme.check_layers(layers, n)?;
        if orders.len() < n / 2 || powers.len() < n / 2 {
            return config(format!("per-bin loads must cover the {} bins below N/2", n / 2));
        }
        let sets = half_sets(scheme, layers, n)?;
        let layers = scheme
            .layer_kinds(layers)
            .into_iter()
            .zip(sets)
            .map(|(kind, bins)| LayerLoad {
                kind,
                orders: bins.iter().map(|&k| orders[k]).collect(),
                powers: bins.iter().map(|&k| if orders[k] == 0 { 0.0 } else { powers[k] }).collect(),
                bins,
            })
            .collect();
        let cfg = Self { scheme, n, layers, bias_multiplier: DEFAULT_BIAS_MULTIPLIER };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_frame_len(self.n)?;
        self.scheme.check_layers(self.layers.len(), self.n)?;
        let sets = half_sets(self.scheme, self.layers.len(), self.n)?;
        for (j, (layer, set)) in self.layers.iter().zip(&sets).enumerate() {
            if layer.bins != *set {
                return config(format!("layer {} bins do not match the {} index set", j + 1, self.scheme));
            }
            if layer.orders.len() != set.len() || layer.powers.len() != set.len() {
                return config(format!("layer {} needs one order and one power per bin", j + 1));
            }
            for (&m, &p) in layer.orders.iter().zip(&layer.powers) {
                if m != 0 && (!m.is_power_of_two() || m < 2) {
                    return config(format!("layer {} has invalid constellation order {m}", j + 1));
                }
                if !(p >= 0.0 && p.is_finite()) || (m != 0 && p == 0.0) {
                    return config(format!("layer {} has invalid power {p} for order {m}", j + 1));
                }
            }
        }
        if !(self.bias_multiplier >= 0.0) {
            return config("bias multiplier must be >= 0");
        }
        Ok(())
    }

    /// Loaded subcarriers over the whole spectrum (mirrors included).
    pub fn loaded_subcarriers(&self) -> usize {
        self.layers.iter().map(|l| 2 * l.loaded()).sum()
    }

    /// Total effective power `(2/N²) Σ P_s(k)` over loaded half-spectrum bins.
    pub fn effective_power(&self) -> f64 {
        let sum: f64 = self.layers.iter().flat_map(|l| l.powers.iter()).sum();
        2.0 * sum / (self.n * self.n) as f64
    }

    /// Known DC bias of layer `layer` (0-based); zero unless it is DCO.
    pub fn dco_bias(&self, layer: usize) -> f64 {
        let l = &self.layers[layer];
        if l.kind != LayerKind::Dco {
            return 0.0;
        }
        let symbol_power: f64 = (0..l.bins.len()).map(|i| l.symbol_power(i)).sum();
        self.bias_multiplier * (2.0 * symbol_power).sqrt() / self.n as f64
    }

    pub fn has_non_square_loads(&self) -> bool {
        self.layers.iter().any(|l| {
            l.kind != LayerKind::Pam && l.orders.iter().any(|&m| m != 0 && m.trailing_zeros() % 2 == 1)
        })
    }
}

fn half_sets(scheme: Scheme, layers: usize, n: usize) -> Result<Vec<Vec<usize>>> {
    (1..=layers)
        .map(|j| effective_subcarriers(scheme, j, n).map(|s| s.into_iter().filter(|&k| k < n / 2).collect()))
        .collect()
}

/// Transmitted frame with everything the receiver trace needs.
#[derive(Debug, Clone, PartialEq)]
pub struct TxFrame {
    pub x: FrameSignal,
    /// Symbol indices per layer, one per loaded bin in ascending bin order.
    pub symbols: Vec<Vec<usize>>,
    /// Loaded spectra `S_j`.
    pub spectra: Vec<FrameSpectrum>,
    /// Unclipped, unbiased layer signals `s_j`.
    pub layer_signals: Vec<FrameSignal>,
    /// Clipped layer contributions `x_j`.
    pub layer_outputs: Vec<FrameSignal>,
}

/// Receiver internals, plus error and residual clipping noise when the
/// transmitted frame is known.
#[derive(Debug, Clone, PartialEq)]
pub struct RxTrace {
    /// Decided spectra `Ŝ_j`.
    pub detected: Vec<FrameSpectrum>,
    /// `ŝ_j`, the inverse transform of `Ŝ_j`.
    pub detected_signals: Vec<FrameSignal>,
    /// `x̂_j`, the remodulated decisions.
    pub remodulated: Vec<FrameSignal>,
    /// `y_j = y − Σ_{t≤j} x̂_t` for `j = 0..=J`.
    pub residuals: Vec<FrameSignal>,
    pub truth: Option<TruthTrace>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthTrace {
    /// `E_j = Ŝ_j − S_j`.
    pub errors: Vec<FrameSpectrum>,
    /// `e_j = ŝ_j − s_j`.
    pub error_signals: Vec<FrameSignal>,
    /// Residual clipping noise `δ_j`.
    pub rcn: Vec<FrameSignal>,
    /// `y − x`.
    pub noise: FrameSignal,
    kinds: Vec<LayerKind>,
}

impl TruthTrace {
    /// Noise seen by layers above `layer`: `v + Σ_{t≤layer} δ_t`.
    pub fn total_noise(&self, layer: usize) -> FrameSignal {
        self.rcn[..layer].iter().fold(self.noise.clone(), |acc, d| acc.add(d))
    }

    /// Spectrum `Z_layer(k)` of [`Self::total_noise`].
    pub fn total_noise_spectrum(&self, layer: usize) -> FrameSpectrum {
        crate::numerics::fft(&self.total_noise(layer))
    }

    /// Time-domain power of the decision error of layer `layer` (1-based).
    pub fn error_power(&self, layer: usize) -> f64 {
        self.error_signals[layer - 1].power()
    }

    pub fn rcn_power(&self, layer: usize) -> f64 {
        self.rcn[layer - 1].power()
    }
}

/// The three parts of a residual after removing `j` layers.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualTerms {
    pub noise: FrameSignal,
    /// `−½ Σ e_t` over zero-clipped layers, `−e_t` for a DCO layer.
    pub error_term: FrameSignal,
    /// `Σ δ_t`.
    pub rcn_term: FrameSignal,
}

#[derive(Debug, Clone)]
struct Slot {
    k: usize,
    constellation: Arc<Constellation>,
}

#[derive(Debug, Clone)]
struct LayerRuntime {
    kind: LayerKind,
    bias: f64,
    slots: Vec<Slot>,
}

/// Planned transmitter and receiver for one [`SchemeConfig`].
#[derive(Debug, Clone)]
pub struct Transceiver {
    config: SchemeConfig,
    fft: Fft,
    layers: Vec<LayerRuntime>,
}

impl Transceiver {
    pub fn new(config: SchemeConfig) -> Result<Self> {
        config.validate()?;
        let fft = Fft::new(config.n)?;
        let mut cache: HashMap<(ConstellationKind, usize, u64), Arc<Constellation>> = HashMap::new();
        let mut layers = Vec::with_capacity(config.layers.len());
        for (j, load) in config.layers.iter().enumerate() {
            let mut slots = Vec::with_capacity(load.loaded());
            for (i, &k) in load.bins.iter().enumerate() {
                let order = load.orders[i];
                if order == 0 {
                    continue;
                }
                let power = load.symbol_power(i);
                let key = (load.constellation_kind(), order, power.to_bits());
                let constellation = match cache.get(&key) {
                    Some(c) => c.clone(),
                    None => {
                        let c = Arc::new(Constellation::new(key.0, order, power)?);
                        cache.insert(key, c.clone());
                        c
                    }
                };
                slots.push(Slot { k, constellation });
            }
            layers.push(LayerRuntime { kind: load.kind, bias: config.dco_bias(j), slots });
        }
        Ok(Self { config, fft, layers })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.config
    }

    pub fn fft(&self) -> &Fft {
        &self.fft
    }

    /// Uniformly random symbol indices for every loaded bin.
    pub fn random_symbols<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<usize>> {
        self.layers
            .iter()
            .map(|l| l.slots.iter().map(|s| rng.random_range(0..s.constellation.order())).collect())
            .collect()
    }

    fn clip(kind: LayerKind, s: &FrameSignal, bias: f64) -> FrameSignal {
        match kind {
            LayerKind::Dco => clip_with_bias(s, bias),
            _ => clip_at_zero(s),
        }
    }

    pub fn transmit(&self, symbols: &[Vec<usize>]) -> Result<TxFrame> {
        if symbols.len() != self.layers.len() {
            return config(format!("expected {} symbol groups, got {}", self.layers.len(), symbols.len()));
        }
        let n = self.config.n;
        let mut x = FrameSignal::zeros(n)?;
        let mut spectra = Vec::with_capacity(self.layers.len());
        let mut layer_signals = Vec::with_capacity(self.layers.len());
        let mut layer_outputs = Vec::with_capacity(self.layers.len());
        for (j, (layer, group)) in self.layers.iter().zip(symbols).enumerate() {
            if group.len() != layer.slots.len() {
                return config(format!(
                    "layer {} expects {} symbols, got {}",
                    j + 1,
                    layer.slots.len(),
                    group.len()
                ));
            }
            let mut spec = FrameSpectrum::zeros(n)?;
            for (slot, &idx) in layer.slots.iter().zip(group) {
                if idx >= slot.constellation.order() {
                    return config(format!("symbol index {idx} out of range on subcarrier {}", slot.k));
                }
                spec.set_hermitian(slot.k, slot.constellation.point(idx));
            }
            let s = self.fft.inverse_real(&spec)?;
            let xj = Self::clip(layer.kind, &s, layer.bias);
            for (acc, v) in x.iter_mut().zip(xj.iter()) {
                *acc += v;
            }
            spectra.push(spec);
            layer_signals.push(s);
            layer_outputs.push(xj);
        }
        Ok(TxFrame { x, symbols: symbols.to_vec(), spectra, layer_signals, layer_outputs })
    }

    /// Detects all layers of an equalized frame. With `truth`, the trace
    /// also carries decision errors and residual clipping noise.
    pub fn receive(&self, y: &FrameSignal, truth: Option<&TxFrame>) -> Result<(Vec<Vec<usize>>, RxTrace)> {
        let n = self.config.n;
        if y.len() != n {
            return config(format!("received frame has {} samples, configuration expects {n}", y.len()));
        }
        let mut residual = y.clone();
        let mut symbols = Vec::with_capacity(self.layers.len());
        let mut detected = Vec::with_capacity(self.layers.len());
        let mut detected_signals = Vec::with_capacity(self.layers.len());
        let mut remodulated = Vec::with_capacity(self.layers.len());
        let mut residuals = vec![residual.clone()];
        for layer in &self.layers {
            let spectrum = self.fft.forward_real(&residual)?;
            let scale = layer.kind.detection_scale();
            let mut decided = FrameSpectrum::zeros(n)?;
            let mut group = Vec::with_capacity(layer.slots.len());
            for slot in &layer.slots {
                let obs: Complex = spectrum[slot.k] * scale;
                let idx = slot.constellation.detect(obs);
                decided.set_hermitian(slot.k, slot.constellation.point(idx));
                group.push(idx);
            }
            let s_hat = self.fft.inverse_real(&decided)?;
            let x_hat = Self::clip(layer.kind, &s_hat, layer.bias);
            for (r, v) in residual.iter_mut().zip(x_hat.iter()) {
                *r -= v;
            }
            residuals.push(residual.clone());
            symbols.push(group);
            detected.push(decided);
            detected_signals.push(s_hat);
            remodulated.push(x_hat);
        }
        let truth = match truth {
            Some(tx) => Some(self.truth_trace(tx, y, &detected, &detected_signals, &remodulated)?),
            None => None,
        };
        Ok((symbols, RxTrace { detected, detected_signals, remodulated, residuals, truth }))
    }

    fn truth_trace(
        &self,
        tx: &TxFrame,
        y: &FrameSignal,
        detected: &[FrameSpectrum],
        detected_signals: &[FrameSignal],
        remodulated: &[FrameSignal],
    ) -> Result<TruthTrace> {
        if tx.spectra.len() != self.layers.len() || tx.x.len() != y.len() {
            return config("ground truth does not match the configuration");
        }
        let mut errors = Vec::new();
        let mut error_signals = Vec::new();
        let mut rcn = Vec::new();
        for (j, layer) in self.layers.iter().enumerate() {
            let e_freq: Vec<Complex> = detected[j].iter().zip(tx.spectra[j].iter()).map(|(a, b)| a - b).collect();
            errors.push(FrameSpectrum::new(e_freq)?);
            let s = &tx.layer_signals[j];
            let e = detected_signals[j].sub(s);
            let delta = match layer.kind {
                LayerKind::Dco => tx.layer_outputs[j].sub(&remodulated[j]).add(&e),
                _ => {
                    let v: Vec<f64> = s.iter().zip(e.iter()).map(|(a, b)| 0.5 * (a.abs() - (a + b).abs())).collect();
                    FrameSignal::new(v)?
                }
            };
            error_signals.push(e);
            rcn.push(delta);
        }
        Ok(TruthTrace {
            errors,
            error_signals,
            rcn,
            noise: y.sub(&tx.x),
            kinds: self.layers.iter().map(|l| l.kind).collect(),
        })
    }

    /// Counts symbol errors per layer against the transmitted indices.
    pub fn count_errors(tx: &TxFrame, detected: &[Vec<usize>]) -> Vec<usize> {
        tx.symbols
            .iter()
            .zip(detected)
            .map(|(a, b)| a.iter().zip(b).filter(|(x, y)| x != y).count())
            .collect()
    }
}

/// Convenience wrapper around [`Transceiver::transmit`].
pub fn transmit(config: &SchemeConfig, symbols: &[Vec<usize>]) -> Result<TxFrame> {
    Transceiver::new(config.clone())?.transmit(symbols)
}

/// Convenience wrapper around [`Transceiver::receive`].
pub fn receive(y: &FrameSignal, config: &SchemeConfig, truth: Option<&TxFrame>) -> Result<(Vec<Vec<usize>>, RxTrace)> {
    Transceiver::new(config.clone())?.receive(y, truth)
}

/// Splits `y_j` into channel noise, the decision-error term and the residual
/// clipping noise of layers `1..=j`.
pub fn decompose_residual(trace: &RxTrace, layer: usize) -> Result<ResidualTerms> {
    let truth = trace
        .truth
        .as_ref()
        .ok_or_else(|| Error::Usage("residual decomposition needs the transmitted frame".into()))?;
    if layer > truth.rcn.len() {
        return config(format!("layer {layer} exceeds the {} configured layers", truth.rcn.len()));
    }
    let n = truth.noise.len();
    let mut error_term = FrameSignal::zeros(n)?;
    let mut rcn_term = FrameSignal::zeros(n)?;
    for t in 0..layer {
        let weight = match truth.kinds[t] {
            LayerKind::Dco => -1.0,
            _ => -0.5,
        };
        error_term = error_term.add(&truth.error_signals[t].scale(weight));
        rcn_term = rcn_term.add(&truth.rcn[t]);
    }
    Ok(ResidualTerms { noise: truth.noise.clone(), error_term, rcn_term })
}
