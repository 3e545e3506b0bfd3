//! Run settings: per-command defaults, overridden by a config file, then by
//! command-line flags.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use oofdm_rcn::channel::ChannelProfile;
use oofdm_rcn::experiment::SnrKind;
use oofdm_rcn::modems::Scheme;
use serde::{Deserialize, Serialize};

/// Where the channel comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelSpec {
    Flat,
    /// Exponential low-pass with the given attenuation at `N/2`, in dB.
    LowPass(f64),
    /// CSV profile file.
    File(PathBuf),
}

impl FromStr for ChannelSpec {
    type Err = anyhow::Error;

    /// `flat`, `low-pass:<dB>` or a file path.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        if lower == "flat" {
            return Ok(ChannelSpec::Flat);
        }
        for prefix in ["low-pass:", "lowpass:", "low_pass:"] {
            if let Some(db) = lower.strip_prefix(prefix) {
                let db: f64 = db.parse().with_context(|| format!("bad low-pass attenuation in '{s}'"))?;
                return Ok(ChannelSpec::LowPass(db));
            }
        }
        Ok(ChannelSpec::File(PathBuf::from(s)))
    }
}

impl ChannelSpec {
    pub fn build(&self, n: usize, noise_power: f64) -> Result<ChannelProfile> {
        let profile = match self {
            ChannelSpec::Flat => ChannelProfile::flat(n)?,
            ChannelSpec::LowPass(db) => ChannelProfile::low_pass(n, *db)?,
            ChannelSpec::File(path) => ChannelProfile::load_csv(path)?,
        };
        if profile.n() != n {
            bail!("channel profile has {} bins but the frame length is {n}", profile.n());
        }
        Ok(profile.with_noise_power(noise_power)?)
    }

    /// Makes file paths absolute so a manifest can be replayed elsewhere.
    fn absolutize(&mut self) -> Result<()> {
        if let ChannelSpec::File(path) = self {
            *path = fs::canonicalize(&*path).with_context(|| format!("channel file {}", path.display()))?;
        }
        Ok(())
    }
}

/// Fully resolved settings, recorded in every manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub schemes: Vec<Scheme>,
    pub order: usize,
    pub n: usize,
    /// Layer count; `None` uses every layer the scheme supports.
    pub layers: Option<usize>,
    pub snr_db: Vec<f64>,
    pub snr_kind: SnrKind,
    pub runs: usize,
    pub seed: u64,
    pub rims: u8,
    pub channel: ChannelSpec,
    pub noise_power: f64,
    /// Probe subcarrier for `rcn-stats`.
    pub bin: usize,
    /// Effective power for `power-relations`.
    pub p_eff: f64,
    /// Monte Carlo frames for `power-relations --validate`; zero skips it.
    pub validate_frames: usize,
    pub target_ser: f64,
    pub max_bits: u32,
    pub max_iters: usize,
    pub tolerance: f64,
    /// Simulate the allocated loadings.
    pub closed_loop: bool,
}

/// The same fields, all optional, as read from a config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialSettings {
    pub schemes: Option<Vec<Scheme>>,
    pub order: Option<usize>,
    pub n: Option<usize>,
    pub layers: Option<usize>,
    pub snr_db: Option<Vec<f64>>,
    pub snr_kind: Option<SnrKind>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub rims: Option<u8>,
    pub channel: Option<ChannelSpec>,
    pub noise_power: Option<f64>,
    pub bin: Option<usize>,
    pub p_eff: Option<f64>,
    pub validate_frames: Option<usize>,
    pub target_ser: Option<f64>,
    pub max_bits: Option<u32>,
    pub max_iters: Option<usize>,
    pub tolerance: Option<f64>,
    pub closed_loop: Option<bool>,
    /// Output directory.
    pub out: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($field:ident),*) => {
        $(if let Some(v) = $top.$field.clone() { $base.$field = v; })*
    };
}

impl PartialSettings {
    /// Reads TOML or JSON, chosen by extension (`.json` is JSON, anything
    /// else TOML).
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            serde_json::from_str(&text).with_context(|| format!("invalid JSON config {}", path.display()))
        } else {
            toml::from_str(&text).with_context(|| format!("invalid TOML config {}", path.display()))
        }
    }

    /// Fields set in `top` win.
    pub fn merged(mut self, top: PartialSettings) -> Self {
        macro_rules! pick {
            ($($f:ident),*) => { $(if top.$f.is_some() { self.$f = top.$f; })* };
        }
        pick!(
            schemes, order, n, layers, snr_db, snr_kind, runs, seed, rims, channel, noise_power, bin, p_eff,
            validate_frames, target_ser, max_bits, max_iters, tolerance, closed_loop, out
        );
        self
    }

    pub fn apply(&self, base: &mut Settings) -> Result<()> {
        overlay!(
            base, self, schemes, order, n, snr_db, snr_kind, runs, seed, rims, channel, noise_power, bin, p_eff,
            validate_frames, target_ser, max_bits, max_iters, tolerance, closed_loop
        );
        if self.layers.is_some() {
            base.layers = self.layers;
        }
        base.channel.absolutize()?;
        base.check()
    }
}

/// Parses `a:b:step` (inclusive) or a comma-separated list.
pub fn parse_snr_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let v: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .with_context(|| format!("bad SNR range '{s}'"))?;
        let (start, stop, step) = (v[0], v[1], v[2]);
        if !(step > 0.0) || stop < start {
            bail!("SNR range '{s}' needs start <= stop and a positive step");
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        return Ok((0..count).map(|i| start + i as f64 * step).collect());
    }
    s.split(',')
        .map(|p| p.trim().parse::<f64>().with_context(|| format!("bad SNR value '{p}'")))
        .collect()
}

fn grid(start: i32, stop: i32, step: i32) -> Vec<f64> {
    (start..=stop).step_by(step as usize).map(f64::from).collect()
}

/// Per-command defaults.
pub fn defaults(command: &str) -> Settings {
    let mut s = Settings {
        schemes: vec![Scheme::Laco],
        order: 16,
        n: 1024,
        layers: None,
        snr_db: grid(0, 30, 2),
        snr_kind: SnrKind::Effective,
        runs: oofdm_rcn::experiment::DEFAULT_RUNS,
        seed: oofdm_rcn::experiment::DEFAULT_SEED,
        rims: oofdm_rcn::rcn_model::DEFAULT_RIMS,
        channel: ChannelSpec::Flat,
        noise_power: 1.0,
        bin: 256,
        p_eff: 1.0,
        validate_frames: 0,
        target_ser: 1e-2,
        max_bits: oofdm_rcn::allocator::DEFAULT_MAX_BITS,
        max_iters: oofdm_rcn::allocator::DEFAULT_MAX_ITERS,
        tolerance: oofdm_rcn::allocator::DEFAULT_TOLERANCE,
        closed_loop: true,
    };
    match command {
        "power-relations" => s.schemes = Scheme::ALL.to_vec(),
        "rcn-power" => s.order = 64,
        "ser" => {
            s.schemes = vec![Scheme::Ado, Scheme::Haco, Scheme::Laco];
            s.snr_kind = SnrKind::Electrical;
        }
        "rcn-stats" => {
            s.order = 64;
            s.snr_db = vec![0.0, 20.0];
        }
        "allocate" => {
            s.snr_db = grid(0, 30, 1);
            s.channel = ChannelSpec::LowPass(10.0);
        }
        _ => {}
    }
    s
}

impl Settings {
    pub fn check(&self) -> Result<()> {
        if self.schemes.is_empty() {
            bail!("no scheme selected");
        }
        if self.snr_db.is_empty() {
            bail!("empty SNR grid");
        }
        if self.runs == 0 {
            bail!("runs must be positive");
        }
        if !(1..=3).contains(&self.rims) {
            bail!("rims must be 1, 2 or 3");
        }
        if !(self.noise_power > 0.0) {
            bail!("noise power must be positive");
        }
        Ok(())
    }

    pub fn layers_for(&self, scheme: Scheme) -> usize {
        self.layers.unwrap_or_else(|| scheme.max_layers(self.n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snr_grids() {
        assert_eq!(parse_snr_grid("0:30:10").unwrap(), vec![0.0, 10.0, 20.0, 30.0]);
        assert_eq!(parse_snr_grid("0:1:0.5").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(parse_snr_grid("3, 7.5").unwrap(), vec![3.0, 7.5]);
        assert!(parse_snr_grid("5:0:1").is_err());
        assert!(parse_snr_grid("a,b").is_err());
    }

    #[test]
    fn channel_specs() {
        assert_eq!("flat".parse::<ChannelSpec>().unwrap(), ChannelSpec::Flat);
        assert_eq!("low-pass:12".parse::<ChannelSpec>().unwrap(), ChannelSpec::LowPass(12.0));
        assert_eq!("h.csv".parse::<ChannelSpec>().unwrap(), ChannelSpec::File("h.csv".into()));
        assert!("low-pass:x".parse::<ChannelSpec>().is_err());
    }

    #[test]
    fn toml_and_json_agree() {
        let t: PartialSettings = toml::from_str("schemes = [\"laco\"]\nrims = 2\nchannel = { low_pass = 8.0 }\n").unwrap();
        let j: PartialSettings =
            serde_json::from_str(r#"{"schemes": ["laco"], "rims": 2, "channel": {"low_pass": 8.0}}"#).unwrap();
        assert_eq!(t, j);
        let flat: PartialSettings = toml::from_str("channel = \"flat\"").unwrap();
        assert_eq!(flat.channel, Some(ChannelSpec::Flat));
    }

    #[test]
    fn unknown_fields_are_reported_with_position() {
        let err = toml::from_str::<PartialSettings>("seed = 1\nrimz = 2\n").unwrap_err().to_string();
        assert!(err.contains("rimz") && err.contains("line 2"), "{err}");
    }

    #[test]
    fn later_layers_win() {
        let mut s = defaults("ser");
        let file = PartialSettings { seed: Some(5), runs: Some(10), ..Default::default() };
        let flags = PartialSettings { seed: Some(9), ..Default::default() };
        file.merged(flags).apply(&mut s).unwrap();
        assert_eq!((s.seed, s.runs), (9, 10));
        assert_eq!(s.snr_kind, SnrKind::Electrical);
    }
}
