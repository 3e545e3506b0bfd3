//! Channel profiles, channel-inversion equalization and post-equalization
//! noise generation.
//!
//! The link is modelled per frame as `Y(k) = H(k) X(k) + V0(k)` with white
//! real Gaussian `v0` of power `P{v}`. After dividing by `H(k)` the noise on
//! bin `k` has power `N · P{v} / |H(k)|²`.

use std::path::Path;

use rand::Rng;

use crate::error::{config, domain, Error, Result};
use crate::numerics::{check_frame_len, gaussian_samples, Complex, Fft, FrameSignal, FrameSpectrum};

/// Frequency response and pre-equalization noise power of a link.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelProfile {
    gains: Vec<Complex>,
    noise_power: f64,
    flat: bool,
}

impl ChannelProfile {
    /// `H(k) = 1` with unit noise power.
    pub fn flat(n: usize) -> Result<Self> {
        check_frame_len(n)?;
        Ok(Self { gains: vec![Complex::new(1.0, 0.0); n], noise_power: 1.0, flat: true })
    }

    /// Exponential low-pass magnitude `|H(k)| = 10^(−a·min(k, N−k)/N)` with
    /// `a` chosen so the power attenuation at `N/2` is `edge_db`.
    pub fn low_pass(n: usize, edge_db: f64) -> Result<Self> {
        check_frame_len(n)?;
        if !(edge_db >= 0.0 && edge_db.is_finite()) {
            return domain(format!("band-edge attenuation must be >= 0 dB, got {edge_db}"));
        }
        let a = edge_db / 10.0;
        let mags: Vec<f64> = (0..n)
            .map(|k| 10f64.powf(-a * k.min(n - k) as f64 / n as f64))
            .collect();
        Self::from_magnitudes(&mags)
    }

    /// Real magnitudes for all `N` bins or for bins `0..=N/2` (mirrored).
    pub fn from_magnitudes(mags: &[f64]) -> Result<Self> {
        Self::from_gains(mags.iter().map(|&m| Complex::new(m, 0.0)).collect())
    }

    /// Complex gains for all `N` bins or for bins `0..=N/2` (mirrored).
    pub fn from_gains(gains: Vec<Complex>) -> Result<Self> {
        let full = expand_half(gains)?;
        let n = full.len();
        for k in 1..n / 2 {
            let d = (full[k] - full[n - k].conj()).norm();
            if d > 1e-9 * full[k].norm().max(1.0) {
                return config(format!("channel gains are not conjugate-symmetric at bin {k}"));
            }
        }
        if full[0].im.abs() > 1e-12 || full[n / 2].im.abs() > 1e-12 {
            return config("channel gains at bins 0 and N/2 must be real");
        }
        if let Some(k) = full.iter().position(|g| g.norm() == 0.0 || !g.norm().is_finite()) {
            return config(format!("channel gain on bin {k} is zero or not finite; inversion impossible"));
        }
        let flat = full.iter().all(|g| *g == Complex::new(1.0, 0.0));
        Ok(Self { gains: full, noise_power: 1.0, flat })
    }

    /// Reads `k,|H|` or `k,re,im` rows (a non-numeric header line is
    /// skipped). Rows may cover all `N` bins or bins `0..=N/2`.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut rows: Vec<(usize, Complex)> = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let fields: Vec<&str> = record.iter().collect();
            let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
            let values = match parsed {
                Ok(v) => v,
                Err(_) if line == 0 => continue,
                Err(_) => {
                    return config(format!("{}: line {}: non-numeric field", path.display(), line + 1));
                }
            };
            let gain = match values.as_slice() {
                [_, mag] => Complex::new(*mag, 0.0),
                [_, re, im] => Complex::new(*re, *im),
                _ => {
                    return config(format!(
                        "{}: line {}: expected 2 or 3 columns, found {}",
                        path.display(),
                        line + 1,
                        values.len()
                    ))
                }
            };
            if values[0] < 0.0 || values[0].fract() != 0.0 {
                return config(format!("{}: line {}: bin index must be a non-negative integer", path.display(), line + 1));
            }
            rows.push((values[0] as usize, gain));
        }
        rows.sort_by_key(|r| r.0);
        for (i, (k, _)) in rows.iter().enumerate() {
            if *k != i {
                return config(format!("{}: bins must be 0, 1, 2, … without gaps (found {k} at row {i})", path.display()));
            }
        }
        Self::from_gains(rows.into_iter().map(|r| r.1).collect())
    }

    pub fn with_noise_power(mut self, noise_power: f64) -> Result<Self> {
        if !(noise_power >= 0.0 && noise_power.is_finite()) {
            return domain(format!("noise power must be >= 0, got {noise_power}"));
        }
        self.noise_power = noise_power;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.gains.len()
    }

    pub fn gains(&self) -> &[Complex] {
        &self.gains
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.gains.iter().map(|g| g.norm()).collect()
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn is_flat(&self) -> bool {
        self.flat
    }

    /// Post-equalization noise power `N · P{v} / |H(k)|²` per bin.
    pub fn noise_map(&self) -> Vec<f64> {
        let n = self.n() as f64;
        self.gains.iter().map(|g| n * self.noise_power / g.norm_sqr()).collect()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n() {
            return config(format!("frame of {len} samples on a {}-bin channel", self.n()));
        }
        Ok(())
    }

    /// Circular channel output `IFFT(H · FFT(x))` without noise.
    pub fn apply(&self, x: &FrameSignal, fft: &Fft) -> Result<FrameSignal> {
        self.check_len(x.len())?;
        if self.flat {
            return Ok(x.clone());
        }
        let mut spec = fft.forward_real(x)?;
        for (b, g) in spec.iter_mut().zip(&self.gains) {
            *b *= g;
        }
        fft.inverse_real(&spec)
    }

    /// Channel-inversion equalizer `IFFT(FFT(y) / H)`.
    pub fn equalize(&self, y: &FrameSignal, fft: &Fft) -> Result<FrameSignal> {
        self.check_len(y.len())?;
        if self.flat {
            return Ok(y.clone());
        }
        let mut spec = fft.forward_real(y)?;
        for (b, g) in spec.iter_mut().zip(&self.gains) {
            *b /= g;
        }
        fft.inverse_real(&spec)
    }

    /// One frame of noise as it appears after equalization.
    pub fn equalized_noise<R: Rng + ?Sized>(&self, rng: &mut R, fft: &Fft) -> Result<FrameSignal> {
        let v = FrameSignal::new(gaussian_samples(rng, self.noise_power, self.n()))?;
        if self.flat {
            return Ok(v);
        }
        let mut spec: FrameSpectrum = fft.forward_real(&v)?;
        for (b, g) in spec.iter_mut().zip(&self.gains) {
            *b /= g;
        }
        fft.inverse_real(&spec)
    }

    /// Equalized received frame `x + v_eq` for transmitted `x`.
    pub fn receive<R: Rng + ?Sized>(&self, x: &FrameSignal, rng: &mut R, fft: &Fft) -> Result<FrameSignal> {
        self.check_len(x.len())?;
        Ok(x.add(&self.equalized_noise(rng, fft)?))
    }
}

fn expand_half(gains: Vec<Complex>) -> Result<Vec<Complex>> {
    let len = gains.len();
    if len >= 8 && len.is_power_of_two() {
        return Ok(gains);
    }
    let n = 2 * (len.saturating_sub(1));
    if len >= 5 && n.is_power_of_two() {
        let mut full = gains;
        for k in (1..n / 2).rev() {
            let g = full[k].conj();
            full.push(g);
        }
        return Ok(full);
    }
    config(format!("channel profile needs N or N/2+1 bins with N a power of two >= 8, got {len}"))
}

/// Free-function form of [`ChannelProfile::equalize`].
pub fn equalize(received: &FrameSignal, profile: &ChannelProfile) -> Result<FrameSignal> {
    profile.equalize(received, &Fft::new(profile.n())?)
}

/// Free-function form of [`ChannelProfile::apply`].
pub fn apply_channel(x: &FrameSignal, profile: &ChannelProfile) -> Result<FrameSignal> {
    profile.apply(x, &Fft::new(profile.n())?)
}
