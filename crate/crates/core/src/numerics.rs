//! Frame containers, the fixed-convention DFT pair, Gaussian tail functions
//! and seeded noise generation.
//!
//! Transform convention: the forward transform is the plain sum
//! `X(k) = Σ_n x(n) e^{-j2πkn/N}` and the inverse carries the `1/N` factor.
//! Consequently `Σ_n x(n)² = (1/N) Σ_k |X(k)|²` and the average power of a
//! spectrum is `N` times the average power of its time-domain frame.

use std::fmt;
use std::ops::{Deref, DerefMut};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error, Result};

pub type Complex = num_complex::Complex64;

/// Generator used by every simulation in the crate.
///
/// ChaCha8 with a 64-bit seed; independent streams are selected with
/// `set_stream` so that frame `i` of an experiment draws from the same
/// sequence no matter how frames are scheduled across workers.
pub type SimRng = ChaCha8Rng;

/// Largest tolerated imaginary residue (relative to the frame peak) when a
/// Hermitian spectrum is brought back to the time domain.
pub const IMAG_RESIDUE_LIMIT: f64 = 1e-9;

pub fn check_frame_len(n: usize) -> Result<()> {
    if n < 8 || !n.is_power_of_two() {
        return config(format!("frame length {n} is not a power of two >= 8"));
    }
    Ok(())
}

/// Real time-domain frame of `N` samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSignal {
    samples: Vec<f64>,
}

impl FrameSignal {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        check_frame_len(samples.len())?;
        Ok(Self { samples })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n])
    }

    /// Average power `(1/N) Σ x(n)²`.
    pub fn power(&self) -> f64 {
        self.samples.iter().map(|x| x * x).sum::<f64>() / self.samples.len() as f64
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.samples
    }

    /// `(x)^+ = (x + |x|) / 2`.
    pub fn positive_part(&self) -> FrameSignal {
        FrameSignal {
            samples: self.samples.iter().map(|&x| x.max(0.0)).collect(),
        }
    }

    pub fn add(&self, other: &FrameSignal) -> FrameSignal {
        debug_assert_eq!(self.len(), other.len());
        FrameSignal {
            samples: self.iter().zip(other.iter()).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &FrameSignal) -> FrameSignal {
        debug_assert_eq!(self.len(), other.len());
        FrameSignal {
            samples: self.iter().zip(other.iter()).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, factor: f64) -> FrameSignal {
        FrameSignal {
            samples: self.iter().map(|a| a * factor).collect(),
        }
    }
}

impl Deref for FrameSignal {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.samples
    }
}

impl DerefMut for FrameSignal {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.samples
    }
}

/// Complex frequency-domain frame of `N` bins.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSpectrum {
    bins: Vec<Complex>,
}

impl FrameSpectrum {
    pub fn new(bins: Vec<Complex>) -> Result<Self> {
        check_frame_len(bins.len())?;
        Ok(Self { bins })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![Complex::new(0.0, 0.0); n])
    }

    /// Average power `(1/N) Σ |X(k)|²`.
    pub fn power(&self) -> f64 {
        self.bins.iter().map(|x| x.norm_sqr()).sum::<f64>() / self.bins.len() as f64
    }

    /// Sets `X(k)` and its mirror `X(N-k) = X(k)*` in one step.
    pub fn set_hermitian(&mut self, k: usize, value: Complex) {
        let n = self.bins.len();
        if k == 0 || k == n / 2 {
            self.bins[k] = Complex::new(value.re, 0.0);
        } else {
            self.bins[k] = value;
            self.bins[n - k] = value.conj();
        }
    }

    /// Largest violation of `X(k) = X(N-k)*` (including the realness of
    /// bins `0` and `N/2`) relative to the spectrum peak.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.bins.len();
        let peak = self.bins.iter().map(|b| b.norm()).fold(0.0_f64, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        let mut worst = self.bins[0].im.abs().max(self.bins[n / 2].im.abs());
        for k in 1..n / 2 {
            worst = worst.max((self.bins[k] - self.bins[n - k].conj()).norm());
        }
        worst / peak
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }

    pub fn into_inner(self) -> Vec<Complex> {
        self.bins
    }
}

impl Deref for FrameSpectrum {
    type Target = [Complex];
    fn deref(&self) -> &[Complex] {
        &self.bins
    }
}

impl DerefMut for FrameSpectrum {
    fn deref_mut(&mut self) -> &mut [Complex] {
        &mut self.bins
    }
}

/// Planned forward/inverse transform pair for one frame length.
#[derive(Clone)]
pub struct Fft {
    n: usize,
    forward: Arc<dyn rustfft::Fft<f64>>,
    inverse: Arc<dyn rustfft::Fft<f64>>,
}

impl fmt::Debug for Fft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fft").field("n", &self.n).finish()
    }
}

impl Fft {
    pub fn new(n: usize) -> Result<Self> {
        check_frame_len(n)?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.n {
            return config(format!("frame of length {len} given to a {}-point transform", self.n));
        }
        Ok(())
    }

    pub fn forward_real(&self, x: &[f64]) -> Result<FrameSpectrum> {
        self.check(x.len())?;
        let mut buf: Vec<Complex> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        Ok(FrameSpectrum { bins: buf })
    }

    pub fn forward_complex(&self, x: &[Complex]) -> Result<FrameSpectrum> {
        self.check(x.len())?;
        let mut buf = x.to_vec();
        self.forward.process(&mut buf);
        Ok(FrameSpectrum { bins: buf })
    }

    /// Inverse transform including the `1/N` factor.
    pub fn inverse_complex(&self, spectrum: &[Complex]) -> Result<Vec<Complex>> {
        self.check(spectrum.len())?;
        let mut buf = spectrum.to_vec();
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
        Ok(buf)
    }

    /// Inverse transform of a Hermitian spectrum, truncated to its real part.
    ///
    /// An imaginary residue above [`IMAG_RESIDUE_LIMIT`] of the frame peak is
    /// reported as an error since it means the spectrum was not Hermitian.
    pub fn inverse_real(&self, spectrum: &[Complex]) -> Result<FrameSignal> {
        let buf = self.inverse_complex(spectrum)?;
        let peak = buf.iter().map(|c| c.re.abs()).fold(0.0_f64, f64::max);
        let residue = buf.iter().map(|c| c.im.abs()).fold(0.0_f64, f64::max);
        if residue > IMAG_RESIDUE_LIMIT * peak.max(f64::MIN_POSITIVE) && residue > 1e-300 {
            return Err(Error::Numerical(format!(
                "imaginary residue {residue:.3e} after inverse transform (peak {peak:.3e}); spectrum is not Hermitian"
            )));
        }
        Ok(FrameSignal {
            samples: buf.into_iter().map(|c| c.re).collect(),
        })
    }
}

/// Forward transform of a real frame (no normalization).
pub fn fft(signal: &FrameSignal) -> FrameSpectrum {
    Fft::new(signal.len())
        .and_then(|plan| plan.forward_real(signal))
        .expect("frame length validated on construction")
}

/// Forward transform of a complex frame (no normalization).
pub fn fft_complex(spectrum: &FrameSpectrum) -> FrameSpectrum {
    Fft::new(spectrum.len())
        .and_then(|plan| plan.forward_complex(spectrum))
        .expect("frame length validated on construction")
}

/// Inverse transform (with `1/N`) of a Hermitian spectrum.
pub fn ifft(spectrum: &FrameSpectrum) -> Result<FrameSignal> {
    Fft::new(spectrum.len())?.inverse_real(spectrum)
}

/// Gaussian tail probability `Q(x) = P(N(0,1) > x)`.
pub fn qfunc(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal cumulative distribution.
pub fn normal_cdf(x: f64) -> f64 {
    qfunc(-x)
}

/// Inverse of [`qfunc`] on `(0, 1)`.
pub fn qfunc_inv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("qfunc_inv needs 0 < p < 1, got {p}"));
    }
    let mut x = std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p);
    // Newton polish; Q'(x) = -φ(x).
    for _ in 0..3 {
        let density = normal_pdf(x);
        if density <= 0.0 {
            break;
        }
        let step = (qfunc(x) - p) / density;
        if !step.is_finite() {
            break;
        }
        x += step;
    }
    Ok(x)
}

/// Deterministic generator for stream `stream` under master seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Zero-mean real Gaussian samples with the given variance.
pub fn gaussian_samples<R: Rng + ?Sized>(rng: &mut R, variance: f64, n: usize) -> Vec<f64> {
    if variance == 0.0 {
        return vec![0.0; n];
    }
    let sd = variance.sqrt();
    (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// White real Gaussian frame drawn from stream 0 of `seed`.
pub fn gaussian_frame(seed: u64, variance: f64, n: usize) -> Result<FrameSignal> {
    if !(variance >= 0.0) {
        return domain(format!("noise variance must be >= 0, got {variance}"));
    }
    let mut rng = stream_rng(seed, 0);
    FrameSignal::new(gaussian_samples(&mut rng, variance, n))
}
