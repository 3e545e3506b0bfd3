//! Closed-form symbol error rates of layered schemes, with or without the
//! worst-case residual clipping noise.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::constellation::{ser_pam, ser_qam};
use crate::error::{Error, Result};
use crate::modems::LayerKind;
use crate::multilayer::SchemeConfig;
use crate::rcn_model::{total_noise_worst, NoiseProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Higher layers see channel noise plus worst-case RCN.
    RcnAware,
    /// Every layer sees channel noise only.
    RcnUnaware,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::RcnAware => "rcn_aware",
            Mode::RcnUnaware => "rcn_unaware",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "rcn_aware" | "aware" => Ok(Mode::RcnAware),
            "rcn_unaware" | "unaware" => Ok(Mode::RcnUnaware),
            other => Err(Error::Usage(format!("unknown mode '{other}' (expected rcn_aware or rcn_unaware)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerReport {
    pub mode: Mode,
    /// SER per layer and half-spectrum data bin (zero on empty bins).
    pub per_bin: Vec<Vec<f64>>,
    /// Mean SER of the loaded bins of each layer.
    pub per_layer: Vec<f64>,
    /// Mean SER over all loaded subcarriers.
    pub overall: f64,
    /// Set when a non-square QAM order is loaded; the square-QAM formula
    /// is then only an approximation.
    pub approximate: bool,
    /// Noise each bin was evaluated against.
    pub noise: Vec<f64>,
}

/// Symbol error rate of every loaded bin and their average.
///
/// `channel_noise[k]` is the post-equalization channel noise power on bin
/// `k < N`.
pub fn evaluate_ser(cfg: &SchemeConfig, channel_noise: &[f64], mode: Mode, rims: u8) -> Result<SerReport> {
    let profile = total_noise_worst(cfg, channel_noise, rims)?;
    evaluate_with_profile(cfg, &profile, channel_noise, mode)
}

/// As [`evaluate_ser`] with a precomputed noise profile.
pub fn evaluate_with_profile(
    cfg: &SchemeConfig,
    profile: &NoiseProfile,
    channel_noise: &[f64],
    mode: Mode,
) -> Result<SerReport> {
    let noise = match mode {
        Mode::RcnAware => profile.noise.clone(),
        Mode::RcnUnaware => channel_noise.to_vec(),
    };
    let mut per_bin = Vec::with_capacity(cfg.layers.len());
    let mut per_layer = Vec::with_capacity(cfg.layers.len());
    let mut total = 0.0;
    let mut count = 0usize;
    for layer in &cfg.layers {
        let mut values = Vec::with_capacity(layer.bins.len());
        let mut layer_sum = 0.0;
        for (i, &k) in layer.bins.iter().enumerate() {
            let order = layer.orders[i];
            if order == 0 {
                values.push(0.0);
                continue;
            }
            let power = layer.powers[i];
            let p = match layer.kind {
                LayerKind::Aco | LayerKind::Dco => ser_qam(order, power, noise[k])?,
                LayerKind::Pam => ser_pam(order, power, noise[k])?,
            };
            layer_sum += p;
            values.push(p);
        }
        let loaded = layer.loaded();
        per_layer.push(if loaded == 0 { 0.0 } else { layer_sum / loaded as f64 });
        total += layer_sum;
        count += loaded;
        per_bin.push(values);
    }
    Ok(SerReport {
        mode,
        per_bin,
        per_layer,
        overall: if count == 0 { 0.0 } else { total / count as f64 },
        approximate: cfg.has_non_square_loads(),
        noise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modems::{elec_to_eff_ratio, Scheme};

    fn config(scheme: Scheme, gamma_db: f64) -> SchemeConfig {
        let layers = scheme.max_layers(1024);
        let p_eff = 10f64.powf(gamma_db / 10.0) / elec_to_eff_ratio(scheme, layers).unwrap();
        SchemeConfig::uniform(scheme, 1024, layers, 16, p_eff).unwrap()
    }

    fn flat() -> Vec<f64> {
        vec![1024.0; 1024]
    }

    #[test]
    fn vanishing_noise_gives_zero() {
        let cfg = config(Scheme::Laco, 20.0);
        for mode in [Mode::RcnAware, Mode::RcnUnaware] {
            let r = evaluate_ser(&cfg, &vec![1e-9; 1024], mode, 3).unwrap();
            assert!(r.overall < 1e-300);
        }
    }

    #[test]
    fn laco_reference_points() {
        let cfg = config(Scheme::Laco, 20.0);
        let aware = evaluate_ser(&cfg, &flat(), Mode::RcnAware, 3).unwrap().overall;
        let unaware = evaluate_ser(&cfg, &flat(), Mode::RcnUnaware, 3).unwrap().overall;
        assert!((aware - 0.1734).abs() < 0.05 * 0.1734, "{aware}");
        assert!((unaware - 0.0608).abs() < 0.05 * 0.0608, "{unaware}");
    }

    #[test]
    fn haco_pam_layer_barely_feels_rcn() {
        let cfg = config(Scheme::Haco, 30.0);
        let aware = evaluate_ser(&cfg, &flat(), Mode::RcnAware, 3).unwrap().overall;
        let unaware = evaluate_ser(&cfg, &flat(), Mode::RcnUnaware, 3).unwrap().overall;
        assert!((aware - 1.23e-3).abs() < 0.1 * 1.23e-3, "{aware}");
        assert!((aware - unaware).abs() < 1e-3 * aware);
    }

    #[test]
    fn modes_agree_on_layer_one_and_order_elsewhere() {
        for scheme in [Scheme::Laco, Scheme::Ado, Scheme::Haco] {
            for g in [5.0, 15.0, 25.0] {
                let cfg = config(scheme, g);
                let a = evaluate_ser(&cfg, &flat(), Mode::RcnAware, 3).unwrap();
                let u = evaluate_ser(&cfg, &flat(), Mode::RcnUnaware, 3).unwrap();
                assert_eq!(a.per_bin[0], u.per_bin[0]);
                for (la, lu) in a.per_bin.iter().zip(&u.per_bin).skip(1) {
                    for (x, y) in la.iter().zip(lu) {
                        assert!(x >= y);
                    }
                }
                assert!(a.per_bin.iter().flatten().all(|p| (0.0..=1.0).contains(p)));
            }
        }
    }

    #[test]
    fn overall_is_the_mean_over_loaded_bins() {
        let cfg = config(Scheme::Ado, 24.0);
        let r = evaluate_ser(&cfg, &flat(), Mode::RcnAware, 3).unwrap();
        let sum: f64 = r.per_bin.iter().flatten().sum();
        assert!((r.overall - sum / 511.0).abs() < 1e-15);
        assert!(!r.approximate);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("rcn-aware".parse::<Mode>().unwrap(), Mode::RcnAware);
        assert!("both".parse::<Mode>().is_err());
    }
}
