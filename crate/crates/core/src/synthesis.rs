//! Sounding pulse, received-signal synthesis and temporal moments.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::pointprocess::ChannelRealization;

/// Uniformly sampled complex baseband signal, `samples[i]` at `t0 + i / sample_rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    pub sample_rate: f64,
    pub t0: f64,
    pub samples: Vec<Complex64>,
}

impl SampledSignal {
    pub fn new(sample_rate: f64, t0: f64, samples: Vec<Complex64>) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return domain(format!("sample rate must be positive, got {sample_rate}"));
        }
        if !t0.is_finite() || samples.iter().any(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return domain("signal contains non-finite values");
        }
        Ok(SampledSignal {
            sample_rate,
            t0,
            samples,
        })
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `\sum |s|^2 / f_s`.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.sample_rate
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 / self.sample_rate
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(|i| self.time(i))
    }

    pub fn power(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.norm_sqr()).collect()
    }

    /// Delimited dump with columns `t_seconds,re,im`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t_seconds,re,im")?;
        for (i, s) in self.samples.iter().enumerate() {
            writeln!(out, "{:e},{:e},{:e}", self.time(i), s.re, s.im)?;
        }
        Ok(())
    }
}

/// Hamming envelope `0.54 - 0.46 cos(2 pi t / T_p)` on `[0, T_p]`, `T_p = 2 / B`.
pub fn hamming_pulse(bandwidth: f64, sample_rate: f64, normalize: bool) -> Result<SampledSignal> {
    hamming_pulse_with_duration(2.0 / bandwidth, bandwidth, sample_rate, normalize)
}

/// Hamming pulse with an explicit duration; `bandwidth` only sets the minimum sample rate.
pub fn hamming_pulse_with_duration(
    duration: f64,
    bandwidth: f64,
    sample_rate: f64,
    normalize: bool,
) -> Result<SampledSignal> {
    if !(bandwidth > 0.0 && duration > 0.0) {
        return domain(format!("bandwidth and pulse duration must be positive, got {bandwidth}, {duration}"));
    }
    if !(sample_rate >= 4.0 * bandwidth * (1.0 - 1e-12)) {
        return domain(format!(
            "sample rate {sample_rate:e} Hz is below 4B = {:e} Hz",
            4.0 * bandwidth
        ));
    }
    let n = (duration * sample_rate + 1e-9).floor() as usize + 1;
    let mut samples: Vec<Complex64> = (0..n)
        .map(|i| {
            let t = i as f64 / sample_rate;
            Complex64::new(0.54 - 0.46 * (2.0 * PI * t / duration).cos(), 0.0)
        })
        .collect();
    if normalize {
        let e = samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / sample_rate;
        let k = 1.0 / e.sqrt();
        for s in &mut samples {
            *s *= k;
        }
    }
    SampledSignal::new(sample_rate, 0.0, samples)
}

/// How a path delay that falls between grid points is rendered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Placement {
    /// Shift the pulse to the nearest grid point.
    Nearest,
    /// Band-limited interpolation with a Hann-windowed sinc of the given half width in samples.
    Sinc { half_width: usize },
}

impl fmt::Display for Placement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Placement::Nearest => f.write_str("nearest"),
            Placement::Sinc { .. } => f.write_str("sinc"),
        }
    }
}

impl FromStr for Placement {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "nearest" => Ok(Placement::Nearest),
            "sinc" => Ok(Placement::Sinc { half_width: 16 }),
            _ => Err(format!("unknown placement `{s}` (expected nearest or sinc)")),
        }
    }
}

fn windowed_sinc(x: f64, half_width: f64) -> f64 {
    if x.abs() >= half_width {
        return 0.0;
    }
    let sinc = if x == 0.0 { 1.0 } else { (PI * x).sin() / (PI * x) };
    let w = 0.5 * (1.0 + (PI * x / half_width).cos());
    sinc * w
}

/// `y(t) = \sum_k alpha_k s(t - tau_k)` on the grid `t_i = i / f_s`, `0 <= t_i <= t_end`.
pub fn synthesize(
    realization: &ChannelRealization,
    pulse: &SampledSignal,
    t_end: f64,
    placement: Placement,
) -> Result<SampledSignal> {
    if pulse.t0 != 0.0 {
        return domain(format!("pulse must start at t = 0, got t0 = {:e}", pulse.t0));
    }
    if pulse.is_empty() {
        return domain("pulse has no samples");
    }
    let fs = pulse.sample_rate;
    let duration = (pulse.len() - 1) as f64 / fs;
    if t_end < realization.tau_max + duration - 1e-15 {
        return domain(format!(
            "t_end = {t_end:e} s is shorter than tau_max + pulse duration = {:e} s",
            realization.tau_max + duration
        ));
    }
    let len = (t_end * fs + 1e-9).floor() as usize + 1;
    let mut y = vec![Complex64::new(0.0, 0.0); len];
    for path in &realization.paths {
        let pos = path.delay * fs;
        match placement {
            Placement::Nearest => {
                let shift = (pos + 0.5).floor();
                if shift < 0.0 {
                    return domain(format!("negative path delay {:e}", path.delay));
                }
                let shift = shift as usize;
                for (m, s) in pulse.samples.iter().enumerate() {
                    if let Some(out) = y.get_mut(shift + m) {
                        *out += path.gain * s;
                    }
                }
            }
            Placement::Sinc { half_width } => {
                if path.delay < 0.0 {
                    return domain(format!("negative path delay {:e}", path.delay));
                }
                let hw = half_width.max(1) as f64;
                let frac = pos - pos.round();
                let base = pos.round() as i64;
                if frac == 0.0 {
                    for (m, s) in pulse.samples.iter().enumerate() {
                        if let Some(out) = y.get_mut(base as usize + m) {
                            *out += path.gain * s;
                        }
                    }
                    continue;
                }
                // s(t_i - tau) = sum_m s_m h(i - m - pos)
                let lo = (base - half_width as i64).max(0);
                let hi = (base + (pulse.len() + half_width) as i64).min(len as i64 - 1);
                for i in lo..=hi {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (m, s) in pulse.samples.iter().enumerate() {
                        let h = windowed_sinc(i as f64 - m as f64 - pos, hw);
                        if h != 0.0 {
                            acc += s * h;
                        }
                    }
                    y[i as usize] += path.gain * acc;
                }
            }
        }
    }
    SampledSignal::new(fs, 0.0, y)
}

/// Mean delay and rms delay spread of a power profile sampled at `t0 + i / fs`.
pub fn temporal_moments(power: &[f64], sample_rate: f64, t0: f64) -> Result<(f64, f64)> {
    if power.iter().any(|p| !(*p >= 0.0)) {
        return domain("power profile must be nonnegative");
    }
    let total: f64 = power.iter().sum();
    if !(total > 0.0) {
        return domain("power profile is identically zero");
    }
    let t = |i: usize| t0 + i as f64 / sample_rate;
    let mean = power.iter().enumerate().map(|(i, p)| t(i) * p).sum::<f64>() / total;
    let var = power
        .iter()
        .enumerate()
        .map(|(i, p)| (t(i) - mean).powi(2) * p)
        .sum::<f64>()
        / total;
    Ok((mean, var.max(0.0).sqrt()))
}
