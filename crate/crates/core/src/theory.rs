//! Closed-form quantities of the quadratic-rate Poisson model.
//!
//! Rates, mean counts, reverberation time, power and cumulant delay spectra,
//! kurtosis delay profiles, order-statistic distributions and the residual
//! power left after removing the earliest paths.
//!
//! The scale parameter `a` is defined through `a^3 = 3V / (4 pi c^3 w_T w_R)`
//! so that `(tau/a)^3` is the mean arrival count up to delay `tau`.
//!
//! The unconditional interarrival-time distribution is intentionally not
//! offered. Averaging [`interarrival_cdf_given`] over arrival delays that are
//! iid with density `3 tau^2 / tau_max^3` gives a law that depends on
//! `tau_max` and collapses onto zero as `tau_max` grows, so it carries no
//! model information.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{domain, Error, Result};
use crate::geometry::Room;
use crate::numerics::{gauss_legendre5, integrate};
use crate::pointprocess::MarkModel;
use crate::synthesis::SampledSignal;

/// `P(tau) = (4 pi c / V) exp(-tau/T)` for `tau > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerDelaySpectrum {
    pub volume: f64,
    pub reverb_time: f64,
    pub speed_of_light: f64,
}

impl PowerDelaySpectrum {
    pub fn new(volume: f64, reverb_time: f64, speed_of_light: f64) -> Result<Self> {
        if !(volume > 0.0 && reverb_time > 0.0 && speed_of_light > 0.0) {
            return domain("power delay spectrum needs positive volume, reverberation time and speed");
        }
        Ok(PowerDelaySpectrum {
            volume,
            reverb_time,
            speed_of_light,
        })
    }

    pub fn peak(&self) -> f64 {
        4.0 * PI * self.speed_of_light / self.volume
    }

    pub fn at(&self, tau: f64) -> f64 {
        if tau > 0.0 {
            self.peak() * (-tau / self.reverb_time).exp()
        } else {
            0.0
        }
    }

    /// `\int_lo^hi P(tau) dtau`.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        let lo = lo.max(0.0);
        if hi <= lo {
            return 0.0;
        }
        let t = self.reverb_time;
        self.peak() * t * ((-lo / t).exp() - (-hi / t).exp())
    }

    /// Total power `\int_0^inf P = 4 pi c T / V`.
    pub fn total(&self) -> f64 {
        self.peak() * self.reverb_time
    }
}

/// Reverberation parameters: common wall gain, Kuttruff constant and room.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReverbParams {
    pub wall_gain: f64,
    pub gamma_sq: f64,
    pub room: Room,
    pub speed_of_light: f64,
}

impl ReverbParams {
    /// Kuttruff correction `xi = 1 / (1 + gamma^2 ln(g) / 2)`.
    pub fn kuttruff_factor(&self) -> Result<f64> {
        if !(self.wall_gain > 0.0 && self.wall_gain < 1.0) {
            return domain(format!("wall gain must lie in (0, 1), got {}", self.wall_gain));
        }
        let denom = 1.0 + self.gamma_sq * self.wall_gain.ln() / 2.0;
        if !(denom > 0.0) {
            return domain(format!(
                "Kuttruff correction is not positive for gamma^2 = {} and g = {}",
                self.gamma_sq, self.wall_gain
            ));
        }
        Ok(1.0 / denom)
    }
}

/// Eyring reverberation time with Kuttruff's correction, `T = -4 V xi / (c S ln g)`.
pub fn reverberation_time(params: &ReverbParams) -> Result<f64> {
    let xi = params.kuttruff_factor()?;
    let room = &params.room;
    Ok(-4.0 * room.volume() * xi / (params.speed_of_light * room.surface() * params.wall_gain.ln()))
}

/// Arrival rate `4 pi c^3 tau^2 w_T w_R / V` of the quadratic model.
pub fn arrival_rate(tau: f64, volume: f64, omega_t: f64, omega_r: f64, c: f64) -> f64 {
    if tau > 0.0 {
        4.0 * PI * c.powi(3) * tau * tau * omega_t * omega_r / volume
    } else {
        0.0
    }
}

/// Mean number of arrivals with delay at most `tau`.
pub fn mean_arrival_count(tau: f64, volume: f64, omega_t: f64, omega_r: f64, c: f64) -> f64 {
    if tau > 0.0 {
        4.0 * PI * (c * tau).powi(3) * omega_t * omega_r / (3.0 * volume)
    } else {
        0.0
    }
}

/// Order-statistic scale `a` with `a^3 = 3V / (4 pi c^3 w_T w_R)`, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleA(pub f64);

impl ScaleA {
    pub fn new(volume: f64, omega_t: f64, omega_r: f64, c: f64) -> Result<Self> {
        if !(volume > 0.0 && omega_t > 0.0 && omega_r > 0.0 && c > 0.0) {
            return domain("scale parameter needs positive volume, coverage fractions and speed");
        }
        Ok(ScaleA((3.0 * volume / (4.0 * PI * c.powi(3) * omega_t * omega_r)).cbrt()))
    }

    pub fn seconds(self) -> f64 {
        self.0
    }
}

/// Conditional second moment `exp(-tau/T) / (c^2 tau^2 w_T w_R)` of the path gains.
pub fn conditional_second_moment(tau: f64, omega_t: f64, omega_r: f64, reverb_time: f64, c: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return domain(format!("conditional second moment needs tau > 0, got {tau}"));
    }
    Ok((-tau / reverb_time).exp() / (c * c * tau * tau * omega_t * omega_r))
}

/// `P(tau)`; the antennas do not enter.
pub fn power_delay_spectrum(tau: f64, volume: f64, reverb_time: f64, c: f64) -> f64 {
    PowerDelaySpectrum {
        volume,
        reverb_time,
        speed_of_light: c,
    }
    .at(tau)
}

/// `P_{2n}(tau) = E[|alpha|^{2n} | tau] lambda(tau)`.
pub fn cumulant_delay_spectrum(tau: f64, n: u32, marks: &MarkModel) -> Result<f64> {
    if n < 1 {
        return domain("cumulant order n must be at least 1");
    }
    if !(tau > 0.0) {
        return domain(format!("cumulant delay spectrum needs tau > 0, got {tau}"));
    }
    let sigma2 = marks.second_moment(tau)?;
    let rate = marks.rate.intensity(tau)?;
    Ok(marks.family.moment_ratio(n) * sigma2.powi(n as i32) * rate)
}

fn check_pulse(pulse: &SampledSignal) -> Result<()> {
    if pulse.samples.is_empty() {
        return domain("pulse has no samples");
    }
    Ok(())
}

/// `\sum_m w_m \int_{t - t_m - dt/2}^{t - t_m + dt/2} density`.
///
/// The sampled pulse is read as piecewise constant around each sample, which
/// makes this the exact convolution for that interpretation. It is also the
/// exact expectation for nearest-sample path placement on the same grid.
fn binned_convolution<F>(t: f64, pulse: &SampledSignal, weights: &[f64], mut bin_integral: F) -> Result<f64>
where
    F: FnMut(f64, f64) -> Result<f64>,
{
    let dt = 1.0 / pulse.sample_rate;
    let mut acc = 0.0;
    for (m, w) in weights.iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        let centre = t - (pulse.t0 + m as f64 * dt);
        let (lo, hi) = (centre - 0.5 * dt, centre + 0.5 * dt);
        if hi <= 0.0 {
            continue;
        }
        acc += w * bin_integral(lo, hi)?;
    }
    Ok(acc)
}

/// `E|y(t)|^2 = \int P(t - u) |s(u)|^2 du`, optionally with arrivals limited to `(0, window]`.
pub fn expected_received_power(
    t: f64,
    pulse: &SampledSignal,
    spectrum: &PowerDelaySpectrum,
    window: Option<f64>,
) -> Result<f64> {
    check_pulse(pulse)?;
    let weights: Vec<f64> = pulse.samples.iter().map(|s| s.norm_sqr()).collect();
    let cap = window.unwrap_or(f64::INFINITY);
    binned_convolution(t, pulse, &weights, |lo, hi| Ok(spectrum.integral(lo, hi.min(cap))))
}

/// Even cumulant `kappa_{n:n}[y(t)] = \int |s(t - tau)|^{2n} P_{2n}(tau) dtau`.
pub fn even_cumulant(t: f64, n: u32, pulse: &SampledSignal, marks: &MarkModel, window: Option<f64>) -> Result<f64> {
    check_pulse(pulse)?;
    if n < 1 {
        return domain("cumulant order n must be at least 1");
    }
    let weights: Vec<f64> = pulse.samples.iter().map(|s| s.norm_sqr().powi(n as i32)).collect();
    let cap = window.unwrap_or(f64::INFINITY);
    let singular_at_zero = n >= 2 && marks.rate.vanishes_at_zero();
    binned_convolution(t, pulse, &weights, |lo, hi| {
        let hi = hi.min(cap);
        if hi <= lo.max(0.0) {
            return Ok(0.0);
        }
        if lo <= 0.0 && singular_at_zero {
            return Err(Error::Undefined(format!(
                "order-{} cumulant diverges at t = {t:e}: the pulse overlaps zero delay",
                2 * n
            )));
        }
        let lo = lo.max(0.0);
        let f = |tau: f64| cumulant_delay_spectrum(tau, n, marks).unwrap_or(0.0);
        // two panels per bin keep the rule well inside its accuracy for T >> dt
        let mid = 0.5 * (lo + hi);
        Ok(gauss_legendre5(f, lo, mid) + gauss_legendre5(f, mid, hi))
    })
}

/// Kurtosis delay profile `kappa_{2:2} / kappa_{1:1}^2 + 2`.
pub fn kurtosis_delay_profile(t: f64, pulse: &SampledSignal, marks: &MarkModel, window: Option<f64>) -> Result<f64> {
    let k11 = even_cumulant(t, 1, pulse, marks, window)?;
    if !(k11 > 0.0) {
        return Err(Error::Undefined(format!("received power vanishes at t = {t:e}")));
    }
    let k22 = even_cumulant(t, 2, pulse, marks, window)?;
    Ok(k22 / (k11 * k11) + 2.0)
}

/// Pulse kurtosis factor `\int |s|^4 / (\int |s|^2)^2`, in 1/s.
pub fn pulse_kurtosis_factor(pulse: &SampledSignal) -> Result<f64> {
    check_pulse(pulse)?;
    let dt = 1.0 / pulse.sample_rate;
    let e2: f64 = pulse.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() * dt;
    let e4: f64 = pulse.samples.iter().map(|s| s.norm_sqr().powi(2)).sum::<f64>() * dt;
    if !(e2 > 0.0) {
        return domain("pulse has zero energy");
    }
    Ok(e4 / (e2 * e2))
}

/// High-bandwidth kurtosis `Kurt[alpha] * kappa_s / lambda + 2`.
pub fn kurtosis_high_bw_approx(pulse: &SampledSignal, mark_kurtosis: f64, rate: f64) -> Result<f64> {
    if !(rate > 0.0) {
        return domain(format!("arrival rate must be positive, got {rate}"));
    }
    Ok(mark_kurtosis * pulse_kurtosis_factor(pulse)? / rate + 2.0)
}

fn check_order(n: u32, a: f64) -> Result<()> {
    if n < 1 {
        return domain("order statistic index n must be at least 1");
    }
    if !(a > 0.0) {
        return domain(format!("scale a must be positive, got {a}"));
    }
    Ok(())
}

/// CDF of the n-th arrival delay, `gamma(n, (tau/a)^3) / Gamma(n)`.
pub fn order_statistic_cdf(n: u32, tau: f64, a: f64) -> Result<f64> {
    check_order(n, a)?;
    if tau <= 0.0 {
        return Ok(0.0);
    }
    let x = (tau / a).powi(3);
    if x.is_infinite() {
        return Ok(1.0);
    }
    Ok(gamma_lr(f64::from(n), x))
}

/// The same CDF as `1 - P(N(tau) < n)` with `N(tau)` Poisson of mean `(tau/a)^3`.
///
/// Sums whichever Poisson tail is smaller to avoid cancellation.
pub fn order_statistic_cdf_poisson(n: u32, tau: f64, a: f64) -> Result<f64> {
    check_order(n, a)?;
    if tau <= 0.0 {
        return Ok(0.0);
    }
    let lambda = (tau / a).powi(3);
    let ln_l = lambda.ln();
    let pmf = |i: u32| (f64::from(i) * ln_l - lambda - ln_gamma(f64::from(i) + 1.0)).exp();
    if lambda < f64::from(n) {
        let mut sum = 0.0;
        let mut i = n;
        loop {
            let p = pmf(i);
            sum += p;
            if p <= sum * 1e-17 || i > n + 100_000 {
                break;
            }
            i += 1;
        }
        Ok(sum)
    } else {
        let head: f64 = (0..n).map(pmf).sum();
        Ok((1.0 - head).max(0.0))
    }
}

/// Density of the n-th arrival delay.
pub fn order_statistic_pdf(n: u32, tau: f64, a: f64) -> Result<f64> {
    check_order(n, a)?;
    if tau <= 0.0 {
        return Ok(0.0);
    }
    let x = (tau / a).powi(3);
    let nf = f64::from(n);
    let ln_p = (3.0 * tau * tau / a.powi(3)).ln() + (nf - 1.0) * x.ln() - x - ln_gamma(nf);
    Ok(ln_p.exp())
}

/// `E[tau_[n]^r] = a^r Gamma(n + r/3) / Gamma(n)`.
pub fn order_statistic_moment(n: u32, r: f64, a: f64) -> Result<f64> {
    check_order(n, a)?;
    if !(r >= 0.0) {
        return domain(format!("moment order must be nonnegative, got {r}"));
    }
    if r == 0.0 {
        return Ok(1.0);
    }
    let nf = f64::from(n);
    Ok((r * a.ln() + ln_gamma(nf + r / 3.0) - ln_gamma(nf)).exp())
}

const SERIES_MAX_TERMS: usize = 1_000_000;
// largest tolerated |term| / |sum| before the alternating series is abandoned
const SERIES_MAX_CANCELLATION: f64 = 1e5;

fn mgf_series(n: u32, nu: f64, a: f64) -> Option<f64> {
    let nf = f64::from(n);
    let x = nu * a;
    if x == 0.0 {
        return Some(1.0);
    }
    let ln_x = x.abs().ln();
    let ln_gn = ln_gamma(nf);
    let mut sum = 0.0f64;
    let mut largest = 0.0f64;
    let mut prev = f64::INFINITY;
    for r in 0..SERIES_MAX_TERMS {
        let rf = r as f64;
        let mag = (rf * ln_x + ln_gamma(nf + rf / 3.0) - ln_gn - ln_gamma(rf + 1.0)).exp();
        if !mag.is_finite() {
            return None;
        }
        let term = if x < 0.0 && r % 2 == 1 { -mag } else { mag };
        sum += term;
        largest = largest.max(mag);
        if r > 0 && mag < prev && mag <= 1e-17 * sum.abs() {
            break;
        }
        if r + 1 == SERIES_MAX_TERMS {
            return None;
        }
        prev = mag;
    }
    if !(sum.abs() > 0.0) || largest / sum.abs() > SERIES_MAX_CANCELLATION {
        return None;
    }
    Some(sum)
}

/// Integrates `h(a g^{1/3})` against the Gamma(n, 1) density of `g = (tau/a)^3` over `[0, g_max]`.
fn integrate_against_order_density<H: Fn(f64) -> f64>(n: u32, a: f64, g_max: f64, h: H) -> Result<f64> {
    let nf = f64::from(n);
    let m = nf - 1.0;
    // log-density written around the mode m, where the large terms cancel
    let ln_peak = if n == 1 { 0.0 } else { m * m.ln() - m - ln_gamma(nf) };
    let density = |g: f64| {
        if n == 1 {
            return (-g.max(0.0)).exp();
        }
        if g <= 0.0 {
            return 0.0;
        }
        let d = g - m;
        (m * (d / m).ln_1p() - d + ln_peak).exp()
    };
    let spread = nf.sqrt();
    let lo = (nf - 14.0 * spread - 14.0).max(0.0);
    let hi = (nf + 14.0 * spread + 50.0).min(g_max);
    if hi <= lo {
        return Ok(0.0);
    }
    // split at the mode so the peak is never straddled by a single panel
    let mode = (nf - 1.0).clamp(lo, hi);
    let f = |g: f64| density(g) * h(a * g.cbrt());
    let left = integrate(f, lo, mode, 1e-300, 1e-12)?;
    let right = integrate(f, mode, hi, 1e-300, 1e-12)?;
    Ok(left + right)
}

/// Moment generating function `E[exp(nu tau_[n])]` for `nu <= 0`.
///
/// Sums the power series in `nu a` with adaptive truncation and falls back to
/// quadrature against the generalized-gamma density when the alternating
/// series loses too many digits to cancellation.
pub fn order_statistic_mgf(n: u32, nu: f64, a: f64) -> Result<f64> {
    check_order(n, a)?;
    if !(nu <= 0.0) {
        return domain(format!("mgf is only evaluated for nu <= 0, got {nu}"));
    }
    if let Some(v) = mgf_series(n, nu, a) {
        return Ok(v);
    }
    let v = integrate_against_order_density(n, a, f64::INFINITY, |tau| (nu * tau).exp())?;
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::Numeric(format!(
            "mgf of order statistic {n} at nu*a = {:e} did not converge (got {v})",
            nu * a
        )));
    }
    Ok(v)
}

/// Relative residual power `E[P_[n]] / P_tot = M_[n](-1/T)` after removing the
/// `n` earliest paths. `n = 0` removes nothing and gives one.
pub fn residual_power_ratio(n: u32, a: f64, reverb_time: f64) -> Result<f64> {
    if n == 0 {
        return Ok(1.0);
    }
    if !(reverb_time > 0.0) {
        return domain("reverberation time must be positive");
    }
    order_statistic_mgf(n, -1.0 / reverb_time, a)
}

/// Large-n asymptote `exp(-n^{1/3} a / T)` of [`residual_power_ratio`].
pub fn residual_power_asymptote(n: u32, a: f64, reverb_time: f64) -> f64 {
    (-f64::from(n).cbrt() * a / reverb_time).exp()
}

/// Residual power ratio when arrivals are only observed on `(0, tau_max]`.
///
/// Both the removed-path residual and the total are restricted to the window:
/// `E[\int_{tau_[n]}^{tau_max} P] / \int_0^{tau_max} P`.
pub fn residual_power_ratio_within(n: u32, a: f64, reverb_time: f64, tau_max: f64) -> Result<f64> {
    if n == 0 {
        return Ok(1.0);
    }
    check_order(n, a)?;
    if !(reverb_time > 0.0 && tau_max > 0.0) {
        return domain("reverberation time and window must be positive");
    }
    let tail = (-tau_max / reverb_time).exp();
    let g_max = (tau_max / a).powi(3);
    let num = integrate_against_order_density(n, a, g_max, |tau| (-tau / reverb_time).exp() - tail)?;
    Ok(num / (1.0 - tail))
}

/// `P(tau_{k+1} - tau_k < delta | tau_k) = 1 - exp(-((tau_k + delta)^3 - tau_k^3) / a^3)`.
pub fn interarrival_cdf_given(tau_k: f64, delta: f64, a: f64) -> Result<f64> {
    if !(tau_k >= 0.0) {
        return domain(format!("conditioning delay must be nonnegative, got {tau_k}"));
    }
    if !(delta > 0.0) {
        return domain(format!("interarrival time must be positive, got {delta}"));
    }
    if !(a > 0.0) {
        return domain(format!("scale a must be positive, got {a}"));
    }
    let u = tau_k / a;
    let v = (tau_k + delta) / a;
    // (v^3 - u^3) = (v - u)(v^2 + uv + u^2) avoids cancellation for small delta
    let exponent = (v - u) * (v * v + u * v + u * u);
    Ok(-(-exponent).exp_m1())
}
