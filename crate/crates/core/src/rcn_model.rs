//! Worst-case power of the residual clipping noise and the resulting bound
//! on the total noise seen by each subcarrier.
//!
//! A decision error `e_t` on a zero-clipped layer leaves residual clipping
//! noise `δ_t` with `|δ_t(n)| ≤ |e_t(n)|/2`, so its power is at most a
//! quarter of the decision-error power. The decision-error power per bin is
//! taken from the rim model evaluated at the doubled observation (noise
//! power times four).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::constellation::{avg_neighbor_counts, detection_error_power_with, qam_min_distance, RimModel};
use crate::error::{config, Result};
use crate::modems::{affected_subcarriers, LayerKind};
use crate::multilayer::SchemeConfig;

pub const DEFAULT_RIMS: u8 = 3;

/// Per-bin worst-case total noise and per-layer worst-case RCN power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseProfile {
    pub n: usize,
    /// `P_z(k)` for every `k < N`: channel noise plus the RCN of every
    /// earlier layer whose affected set contains `k`.
    pub noise: Vec<f64>,
    /// Worst-case RCN power per affected bin, one entry per layer.
    pub layer_rcn: Vec<f64>,
    /// Full (two-sided) subcarrier count of each layer.
    pub layer_sizes: Vec<usize>,
}

impl NoiseProfile {
    /// Time-domain power implied by the per-bin value of layer `layer`
    /// (1-based): `|K_t| · P_t / N²`.
    pub fn time_domain_rcn(&self, layer: usize) -> f64 {
        self.layer_sizes[layer - 1] as f64 * self.layer_rcn[layer - 1] / (self.n * self.n) as f64
    }
}

/// Worst-case RCN power per affected bin of one layer.
///
/// Inputs hold one entry per data subcarrier of the layer (one half of the
/// spectrum suffices); `orders[i] == 0` marks an empty bin, which produces
/// no decision errors but still counts in the layer size. `noise[i]` is the
/// total noise power on the bin before the layer is detected.
pub fn rcn_power_worst(orders: &[usize], symbol_powers: &[f64], noise: &[f64], rims: u8) -> Result<f64> {
    if orders.is_empty() {
        return config("layer has no subcarriers");
    }
    if symbol_powers.len() != orders.len() || noise.len() != orders.len() {
        return config("orders, powers and noise must have one entry per subcarrier");
    }
    let mut models: HashMap<usize, RimModel> = HashMap::new();
    let mut sum = 0.0;
    for ((&order, &power), &z) in orders.iter().zip(symbol_powers).zip(noise) {
        if order == 0 || z == 0.0 {
            continue;
        }
        let model = match models.get(&order) {
            Some(m) => *m,
            None => {
                let m = avg_neighbor_counts(order)?;
                models.insert(order, m);
                m
            }
        };
        let d = qam_min_distance(order, power)?;
        sum += detection_error_power_with(&model, d, 4.0 * z, rims)?;
    }
    Ok(sum / (4.0 * orders.len() as f64))
}

/// Layer-by-layer worst-case total noise for a loaded configuration.
///
/// `channel_noise[k]` is the post-equalization channel noise power on bin
/// `k` for every `k < N`. Only zero-clipped QAM layers that precede another
/// layer contribute RCN; DCO and PAM layers are never followed by another
/// layer in the supported schemes and report zero.
pub fn total_noise_worst(cfg: &SchemeConfig, channel_noise: &[f64], rims: u8) -> Result<NoiseProfile> {
    cfg.validate()?;
    let n = cfg.n;
    if channel_noise.len() != n {
        return config(format!("channel noise map has {} bins, expected {n}", channel_noise.len()));
    }
    let mut noise = channel_noise.to_vec();
    let mut layer_rcn = Vec::with_capacity(cfg.layers.len());
    let max_affected = (n / 2).trailing_zeros() as usize;
    for (j, layer) in cfg.layers.iter().enumerate() {
        let t = j + 1;
        let value = if layer.kind == LayerKind::Aco {
            let powers: Vec<f64> = (0..layer.bins.len()).map(|i| layer.symbol_power(i)).collect();
            let z: Vec<f64> = layer.bins.iter().map(|&k| noise[k]).collect();
            rcn_power_worst(&layer.orders, &powers, &z, rims)?
        } else {
            0.0
        };
        if value > 0.0 && t <= max_affected {
            for k in affected_subcarriers(t, n)? {
                noise[k] += value;
            }
        }
        layer_rcn.push(value);
    }
    Ok(NoiseProfile {
        n,
        noise,
        layer_rcn,
        layer_sizes: cfg.layers.iter().map(|l| l.set_size()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{detection_error_power, min_distance};
    use crate::modems::{effective_subcarriers, Scheme};

    fn flat(n: usize) -> Vec<f64> {
        vec![n as f64; n]
    }

    fn laco64(gamma_eff_db: f64) -> SchemeConfig {
        SchemeConfig::uniform(Scheme::Laco, 1024, 9, 64, 10f64.powf(gamma_eff_db / 10.0)).unwrap()
    }

    #[test]
    fn noiseless_gives_zero() {
        let cfg = laco64(10.0);
        let profile = total_noise_worst(&cfg, &vec![0.0; 1024], 3).unwrap();
        assert!(profile.layer_rcn.iter().all(|&p| p == 0.0));
        assert!(profile.noise.iter().all(|&p| p == 0.0));
        assert_eq!(rcn_power_worst(&[16, 16], &[1.0, 1.0], &[0.0, 0.0], 3).unwrap(), 0.0);
        assert!(rcn_power_worst(&[], &[], &[], 3).is_err());
    }

    #[test]
    fn uniform_layer_reduces_to_a_quarter_of_f() {
        let (m, ps, z) = (64usize, 4.0e5, 1024.0);
        let f = detection_error_power(min_distance(m, ps).unwrap(), 4.0 * z, m, 3).unwrap();
        let p = rcn_power_worst(&[m; 8], &[ps; 8], &[z; 8], 3).unwrap();
        assert!((p - f / 4.0).abs() < 1e-12 * f);
        // Empty bins dilute the average.
        let p_half = rcn_power_worst(&[m, m, 0, 0], &[ps, ps, 0.0, 0.0], &[z; 4], 3).unwrap();
        assert!((p_half - f / 8.0).abs() < 1e-12 * f);
    }

    #[test]
    fn layer_one_rim_comparison_at_zero_db() {
        let cfg = laco64(0.0);
        let expect = [(1u8, 0.0618), (2, 0.1438), (3, 0.1927)];
        for (rims, value) in expect {
            let p = total_noise_worst(&cfg, &flat(1024), rims).unwrap().time_domain_rcn(1);
            assert!((p - value).abs() < 0.005 * value, "rims {rims}: {p}");
        }
    }

    #[test]
    fn layer_one_across_snr() {
        for (g, value) in [(0.0, 0.1927), (10.0, 0.4554), (20.0, 0.2416)] {
            let p = total_noise_worst(&laco64(g), &flat(1024), 3).unwrap().time_domain_rcn(1);
            assert!((p - value).abs() < 0.005 * value, "{g} dB: {p}");
        }
    }

    #[test]
    fn deeper_layers_at_ten_db() {
        let p = total_noise_worst(&laco64(10.0), &flat(1024), 3).unwrap();
        assert!((p.time_domain_rcn(3) - 0.2767).abs() < 0.01 * 0.2767, "{}", p.time_domain_rcn(3));
    }

    #[test]
    fn single_layer_adds_nothing_to_other_layers() {
        let cfg = SchemeConfig::uniform(Scheme::Laco, 256, 1, 16, 5.0).unwrap();
        let p = total_noise_worst(&cfg, &flat(256), 3).unwrap();
        for k in 0..256 {
            let expect = if k % 2 == 0 && k != 0 && k != 128 { 256.0 + p.layer_rcn[0] } else { 256.0 };
            assert_eq!(p.noise[k], expect);
        }
        for k in effective_subcarriers(Scheme::Laco, 1, 256).unwrap() {
            assert_eq!(p.noise[k], 256.0);
        }
    }

    #[test]
    fn noise_grows_with_layer_depth() {
        let p = total_noise_worst(&laco64(10.0), &flat(1024), 3).unwrap();
        let mut last = 0.0;
        for j in 1..=9 {
            let k = 1usize << (j - 1);
            assert!(p.noise[k] >= last);
            assert!(p.noise[k] >= 1024.0);
            last = p.noise[k];
        }
    }

    #[test]
    fn dco_and_pam_layers_report_zero() {
        for scheme in [Scheme::Ado, Scheme::Haco] {
            let cfg = SchemeConfig::uniform(scheme, 1024, 2, 16, 10.0).unwrap();
            let p = total_noise_worst(&cfg, &flat(1024), 3).unwrap();
            assert!(p.layer_rcn[0] > 0.0);
            assert_eq!(p.layer_rcn[1], 0.0);
        }
    }
}
