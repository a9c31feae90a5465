//! Ensemble statistics: power and kurtosis profiles, empirical CDFs,
//! residual power and Kolmogorov-Smirnov tests.

use num_complex::Complex64;

use crate::error::{domain, Error, Result};
use crate::numerics::CompensatedSum;
use crate::pointprocess::ChannelRealization;
use crate::synthesis::SampledSignal;

fn check_cumulant_len(n: usize) -> Result<f64> {
    if n < 2 {
        return domain(format!("fourth-cumulant estimation needs at least 2 samples, got {n}"));
    }
    Ok(n as f64)
}

/// Unbiased estimate of `kappa_{2:2} = E|X|^4 - 2 (E|X|^2)^2` from power sums
/// `s2 = \sum |X|^2` and `s4 = \sum |X|^4` over `n` samples.
pub fn fourth_cumulant_from_sums(n: usize, s2: f64, s4: f64) -> Result<f64> {
    let nf = check_cumulant_len(n)?;
    let c1 = (nf + 1.0) / (nf * (nf - 1.0));
    let c2 = 2.0 / (nf * (nf - 1.0));
    Ok(c1 * s4 - c2 * s2 * s2)
}

/// Unbiased estimate of the circular fourth cumulant.
pub fn unbiased_fourth_cumulant(samples: &[Complex64]) -> Result<f64> {
    let (s2, s4) = power_sums(samples);
    fourth_cumulant_from_sums(samples.len(), s2, s4)
}

/// Plug-in estimate `mean|X|^4 - 2 mean(|X|^2)^2`, biased for finite samples.
pub fn naive_fourth_cumulant(samples: &[Complex64]) -> Result<f64> {
    let nf = check_cumulant_len(samples.len())?;
    let (s2, s4) = power_sums(samples);
    Ok(s4 / nf - 2.0 * (s2 / nf).powi(2))
}

fn power_sums(samples: &[Complex64]) -> (f64, f64) {
    let mut s2 = CompensatedSum::new();
    let mut s4 = CompensatedSum::new();
    for x in samples {
        let p = x.norm_sqr();
        s2.add(p);
        s4.add(p * p);
    }
    (s2.value(), s4.value())
}

/// `kappa_{2:2} / kappa_{1:1}^2 + 2` from power sums.
pub fn kurtosis_from_sums(n: usize, s2: f64, s4: f64) -> Result<f64> {
    let k22 = fourth_cumulant_from_sums(n, s2, s4)?;
    let k11 = s2 / n as f64;
    if !(k11 > 0.0) {
        return domain("kurtosis is undefined for a zero second moment");
    }
    Ok(k22 / (k11 * k11) + 2.0)
}

pub fn kurtosis_estimate(samples: &[Complex64]) -> Result<f64> {
    let (s2, s4) = power_sums(samples);
    kurtosis_from_sums(samples.len(), s2, s4)
}

/// Per-bin sums of `|y|^2` and `|y|^4` over an ensemble of signals on one grid.
///
/// Accumulators over disjoint parts of an ensemble merge into the
/// accumulator of the whole.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileAccumulator {
    sample_rate: f64,
    t0: f64,
    runs: usize,
    s2: Vec<CompensatedSum>,
    s4: Vec<CompensatedSum>,
}

/// Ensemble power profile with its standard error per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerProfile {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub standard_error: Vec<f64>,
    pub runs: usize,
}

impl ProfileAccumulator {
    pub fn new(sample_rate: f64, t0: f64, len: usize) -> Self {
        ProfileAccumulator {
            sample_rate,
            t0,
            runs: 0,
            s2: vec![CompensatedSum::new(); len],
            s4: vec![CompensatedSum::new(); len],
        }
    }

    pub fn len(&self) -> usize {
        self.s2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s2.is_empty()
    }

    pub fn runs(&self) -> usize {
        self.runs
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 / self.sample_rate
    }

    fn check_grid(&self, sample_rate: f64, t0: f64, len: usize) -> Result<()> {
        if sample_rate != self.sample_rate || t0 != self.t0 || len != self.len() {
            return domain(format!(
                "grid mismatch: ({sample_rate:e} Hz, {t0:e} s, {len}) vs ({:e} Hz, {:e} s, {})",
                self.sample_rate,
                self.t0,
                self.len()
            ));
        }
        Ok(())
    }

    pub fn add(&mut self, signal: &SampledSignal) -> Result<()> {
        self.check_grid(signal.sample_rate, signal.t0, signal.len())?;
        for ((a2, a4), s) in self.s2.iter_mut().zip(&mut self.s4).zip(&signal.samples) {
            let p = s.norm_sqr();
            a2.add(p);
            a4.add(p * p);
        }
        self.runs += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &ProfileAccumulator) -> Result<()> {
        self.check_grid(other.sample_rate, other.t0, other.len())?;
        for (a, b) in self.s2.iter_mut().zip(&other.s2) {
            a.merge(b);
        }
        for (a, b) in self.s4.iter_mut().zip(&other.s4) {
            a.merge(b);
        }
        self.runs += other.runs;
        Ok(())
    }

    /// Power sums `(\sum |y_i|^2, \sum |y_i|^4)` of bin `i`.
    pub fn sums(&self, i: usize) -> (f64, f64) {
        (self.s2[i].value(), self.s4[i].value())
    }

    pub fn power_profile(&self) -> Result<PowerProfile> {
        if self.runs == 0 {
            return domain("power profile of an empty ensemble");
        }
        let n = self.runs as f64;
        let mut mean = Vec::with_capacity(self.len());
        let mut se = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let (s2, s4) = self.sums(i);
            let m = s2 / n;
            mean.push(m);
            if self.runs > 1 {
                let var = ((s4 - n * m * m) / (n - 1.0)).max(0.0);
                se.push((var / n).sqrt());
            } else {
                se.push(f64::NAN);
            }
        }
        Ok(PowerProfile {
            times: (0..self.len()).map(|i| self.time(i)).collect(),
            mean,
            standard_error: se,
            runs: self.runs,
        })
    }

    /// Per-bin kurtosis estimate; `None` where the ensemble power is zero.
    pub fn kurtosis_profile(&self) -> Result<Vec<Option<f64>>> {
        check_cumulant_len(self.runs)?;
        Ok((0..self.len())
            .map(|i| {
                let (s2, s4) = self.sums(i);
                kurtosis_from_sums(self.runs, s2, s4).ok()
            })
            .collect())
    }
}

/// Mean power `|y|^2` per grid point across an ensemble of signals.
pub fn empirical_power_profile(signals: &[SampledSignal]) -> Result<PowerProfile> {
    let first = signals.first().ok_or_else(|| Error::Domain("power profile of an empty ensemble".into()))?;
    let mut acc = ProfileAccumulator::new(first.sample_rate, first.t0, first.len());
    for s in signals {
        acc.add(s)?;
    }
    acc.power_profile()
}

/// Right-continuous empirical distribution function.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return domain("empirical CDF of no values");
        }
        if values.iter().any(|v| v.is_nan()) {
            return domain("empirical CDF input contains NaN");
        }
        values.sort_by(f64::total_cmp);
        Ok(EmpiricalCdf { sorted: values })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    /// Fraction of values `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|v| *v <= x) as f64 / self.len() as f64
    }

    /// Smallest value `v` with `eval(v) >= p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let k = ((p.clamp(0.0, 1.0) * self.len() as f64).ceil() as usize).clamp(1, self.len());
        self.sorted[k - 1]
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().copied().collect::<CompensatedSum>().value() / self.len() as f64
    }

    /// Sample standard deviation (n - 1 denominator).
    pub fn std_dev(&self) -> f64 {
        let m = self.mean();
        let n = self.len() as f64;
        (self.sorted.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    }
}

/// Empirical distribution of the n-th arrival delay.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderStatisticSample {
    pub n: usize,
    pub cdf: EmpiricalCdf,
    /// Realizations with fewer than `n` arrivals.
    pub excluded: usize,
}

/// Empirical CDFs of `tau_[n]` for each requested order.
pub fn empirical_order_statistics(
    realizations: &[ChannelRealization],
    orders: &[usize],
) -> Result<Vec<OrderStatisticSample>> {
    orders
        .iter()
        .map(|&n| {
            if n < 1 {
                return domain("order statistic index must be at least 1");
            }
            let values: Vec<f64> = realizations
                .iter()
                .filter_map(|r| r.paths.get(n - 1).map(|p| p.delay))
                .collect();
            let excluded = realizations.len() - values.len();
            if values.is_empty() {
                return Err(Error::Sampling(format!(
                    "no realization has {n} arrivals ({excluded} excluded)"
                )));
            }
            Ok(OrderStatisticSample {
                n,
                cdf: EmpiricalCdf::new(values)?,
                excluded,
            })
        })
        .collect()
}

/// Fraction of the total path power carried by paths after the `n` earliest.
pub fn empirical_residual_power(realization: &ChannelRealization, n: usize) -> Result<f64> {
    let paths = &realization.paths;
    if paths.len() < n {
        return Err(Error::Sampling(format!(
            "residual power after {n} paths requested, realization has {}",
            paths.len()
        )));
    }
    let total: CompensatedSum = paths.iter().map(|p| p.gain.norm_sqr()).collect();
    if !(total.value() > 0.0) {
        return domain("realization carries no power");
    }
    if n == 0 {
        return Ok(1.0);
    }
    let rest: CompensatedSum = paths[n..].iter().map(|p| p.gain.norm_sqr()).collect();
    Ok(rest.value() / total.value())
}

/// Kolmogorov-Smirnov statistic and asymptotic p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Survival function of the Kolmogorov distribution, `P(K > x)`.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // theta-function form converges fast for small x
        let y = (-std::f64::consts::PI.powi(2) / (8.0 * x * x)).exp();
        let s: f64 = (0..50).map(|j| y.powi((2 * j + 1) * (2 * j + 1))).sum();
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / x * s;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let jf = f64::from(j);
        let term = (-2.0 * jf * jf * x * x).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, effective_n: f64) -> f64 {
    let sn = effective_n.sqrt();
    kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d)
}

/// One-sample test of `cdf` against the continuous distribution `model`.
pub fn ks_one_sample<F: Fn(f64) -> f64>(cdf: &EmpiricalCdf, model: F) -> KsResult {
    let n = cdf.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in cdf.values().iter().enumerate() {
        let f = model(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    KsResult {
        statistic: d,
        p_value: ks_p_value(d, n),
    }
}

/// Two-sample test of equal distributions.
pub fn ks_two_sample(a: &EmpiricalCdf, b: &EmpiricalCdf) -> KsResult {
    let (xa, xb) = (a.values(), b.values());
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    KsResult {
        statistic: d,
        p_value: ks_p_value(d, na * nb / (na + nb)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointprocess::{realization_rng, ModelKind, PathComponent};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian(rng: &mut impl Rng) -> Complex64 {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    }

    #[test]
    fn coefficients_for_two_samples() {
        // c1 = 1.5, c2 = 1: 1.5 (1 + 16) - (1 + 4)^2
        let x = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 2.0)];
        assert!((unbiased_fourth_cumulant(&x).unwrap() - (1.5 * 17.0 - 25.0)).abs() < 1e-12);
        assert!(unbiased_fourth_cumulant(&x[..1]).is_err());
    }

    #[test]
    fn constant_modulus_gives_minus_m4() {
        let m = 1.7f64;
        for n in 2..=10 {
            let x: Vec<Complex64> = (0..n).map(|i| Complex64::from_polar(m, i as f64)).collect();
            let k = unbiased_fourth_cumulant(&x).unwrap();
            assert!((k + m.powi(4)).abs() < 1e-12 * m.powi(4), "{n}: {k}");
            assert!((kurtosis_estimate(&x).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!(kurtosis_estimate(&[Complex64::new(0.0, 0.0); 3]).is_err());
    }

    #[test]
    fn gaussian_kurtosis_near_two() {
        let mut rng = realization_rng(1, 0);
        let x: Vec<Complex64> = (0..200_000).map(|_| gaussian(&mut rng)).collect();
        let k = kurtosis_estimate(&x).unwrap();
        assert!((k - 2.0).abs() < 0.03, "{k}");
    }

    #[test]
    fn naive_estimator_is_biased_for_small_batches() {
        // N = 4 Gaussian: E mean|X|^4 = 2 and E (mean|X|^2)^2 = 1 + 1/4, so the mean is -0.5
        let mut rng = realization_rng(2, 0);
        let batches = 20_000;
        let mean: f64 = (0..batches)
            .map(|_| {
                let x: Vec<Complex64> = (0..4).map(|_| gaussian(&mut rng)).collect();
                naive_fourth_cumulant(&x).unwrap()
            })
            .sum::<f64>()
            / batches as f64;
        assert!((mean + 0.5).abs() < 0.05, "{mean}");
    }

    #[test]
    fn accumulator_merge_equals_full_pass() {
        let mut rng = realization_rng(3, 0);
        let signals: Vec<SampledSignal> = (0..40)
            .map(|_| SampledSignal::new(1.0, 0.0, (0..16).map(|_| gaussian(&mut rng)).collect()).unwrap())
            .collect();
        let full = empirical_power_profile(&signals).unwrap();
        let mut a = ProfileAccumulator::new(1.0, 0.0, 16);
        let mut b = ProfileAccumulator::new(1.0, 0.0, 16);
        for s in &signals[..13] {
            a.add(s).unwrap();
        }
        for s in &signals[13..] {
            b.add(s).unwrap();
        }
        b.merge(&a).unwrap();
        let merged = b.power_profile().unwrap();
        for (x, y) in full.mean.iter().zip(&merged.mean) {
            assert!((x - y).abs() < 1e-14 * x.abs().max(1.0));
        }
        assert_eq!(merged.runs, 40);
        assert!(a.add(&SampledSignal::new(2.0, 0.0, vec![Complex64::new(0.0, 0.0); 16]).unwrap()).is_err());
        assert!(empirical_power_profile(&[]).is_err());
    }

    #[test]
    fn single_realization_profile_is_its_power() {
        let s = SampledSignal::new(1.0, 0.0, vec![Complex64::new(1.0, 1.0), Complex64::new(0.0, 3.0)]).unwrap();
        let p = empirical_power_profile(std::slice::from_ref(&s)).unwrap();
        assert_eq!(p.mean, vec![2.0, 9.0]);
    }

    #[test]
    fn empirical_cdf_steps() {
        let c = EmpiricalCdf::new(vec![3.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(c.eval(0.5), 0.0);
        assert_eq!(c.eval(1.0), 0.25);
        assert_eq!(c.eval(2.0), 0.75);
        assert_eq!(c.eval(3.0), 1.0);
        assert_eq!(c.median(), 2.0);
        assert_eq!(c.quantile(1.0), 3.0);
        assert!(EmpiricalCdf::new(vec![]).is_err());
    }

    fn realization(delays: &[f64], powers: &[f64]) -> ChannelRealization {
        ChannelRealization {
            paths: delays
                .iter()
                .zip(powers)
                .map(|(d, p)| PathComponent::new(*d, Complex64::new(p.sqrt(), 0.0)))
                .collect(),
            model: ModelKind::Poisson,
            tau_max: 1.0,
            seed: None,
            index: None,
        }
    }

    #[test]
    fn residual_power_edges() {
        let r = realization(&[0.1, 0.2, 0.3], &[1.0, 2.0, 1.0]);
        assert_eq!(empirical_residual_power(&r, 0).unwrap(), 1.0);
        assert!((empirical_residual_power(&r, 1).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(empirical_residual_power(&r, 3).unwrap(), 0.0);
        assert!(empirical_residual_power(&r, 4).is_err());
    }

    #[test]
    fn order_statistics_exclusions() {
        let rs = vec![realization(&[0.1, 0.2], &[1.0, 1.0]), realization(&[0.3], &[1.0])];
        let s = empirical_order_statistics(&rs, &[1, 2]).unwrap();
        assert_eq!(s[0].excluded, 0);
        assert_eq!(s[1].excluded, 1);
        assert_eq!(s[1].cdf.values(), &[0.2]);
        assert!(empirical_order_statistics(&rs, &[3]).is_err());
    }

    #[test]
    fn kolmogorov_survival_values() {
        // reference values of 1 - K(x)
        assert!((kolmogorov_survival(1.0) - 0.269_999_671_677_354_6).abs() < 1e-9);
        assert!((kolmogorov_survival(1.358_098_8) - 0.05).abs() < 1e-6);
        assert!((kolmogorov_survival(0.5) - 0.963_945_243_664_875_1).abs() < 1e-9);
        assert!((kolmogorov_survival(1.18) - kolmogorov_survival(1.18 - 1e-12)).abs() < 1e-9);
    }

    #[test]
    fn ks_accepts_uniform_and_rejects_shift() {
        let mut rng = realization_rng(4, 0);
        let u: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        let cdf = EmpiricalCdf::new(u.clone()).unwrap();
        assert!(ks_one_sample(&cdf, |x| x.clamp(0.0, 1.0)).p_value > 0.01);
        assert!(ks_one_sample(&cdf, |x| (x * 1.1).clamp(0.0, 1.0)).p_value < 0.01);
        let v: Vec<f64> = (0..5000).map(|_| rng.random::<f64>()).collect();
        let w: Vec<f64> = (0..5000).map(|_| rng.random::<f64>() + 0.05).collect();
        let b = EmpiricalCdf::new(v).unwrap();
        let c = EmpiricalCdf::new(w).unwrap();
        assert!(ks_two_sample(&cdf, &b).p_value > 0.01);
        assert!(ks_two_sample(&cdf, &c).p_value < 0.01);
    }
}
