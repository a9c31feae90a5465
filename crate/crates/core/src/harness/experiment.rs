//! Monte Carlo ensembles and figure-data files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma_lr;

use super::config::SimulationConfig;
use crate::error::{Error, Result};
use crate::estimators::{kurtosis_from_sums, EmpiricalCdf, PowerProfile, ProfileAccumulator};
use crate::geometry::{arrival_direction, departure_direction, mirror_images_within, Antenna, Vec3};
use crate::numerics::CompensatedSum;
use crate::pointprocess::{
    generate_realization, realization_rng, spatial_poisson_sample, write_realization, ModelKind, RateModel, Scenario,
};
use crate::synthesis::{hamming_pulse_with_duration, synthesize, temporal_moments, SampledSignal};
use crate::theory::{
    expected_received_power, kurtosis_delay_profile, order_statistic_cdf, residual_power_asymptote,
    residual_power_ratio, residual_power_ratio_within, PowerDelaySpectrum, ScaleA,
};

/// Arrival orders whose delay distributions are recorded.
pub const ORDERS: [usize; 5] = [1, 2, 3, 10, 100];
/// Numbers of removed paths for the residual-power curve.
pub const RESIDUAL_ORDERS: [usize; 11] = [0, 1, 2, 5, 10, 20, 50, 100, 200, 500, 1000];

/// Per-realization scalars.
#[derive(Debug, Clone, PartialEq)]
struct RunRecord {
    count_total: usize,
    /// Arrivals up to each whole nanosecond `0..=tau_max`.
    counts_ns: Vec<u32>,
    order_delays: Vec<Option<f64>>,
    moments: Option<(f64, f64)>,
    /// Power of the paths after the first `n`, zero when fewer than `n` arrived.
    residual_power: Vec<f64>,
    /// Residual fraction of the realization's own total power.
    residual_fraction: Vec<Option<f64>>,
    window_power: Vec<f64>,
}

/// Delay windows used to average profiles.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowStats {
    pub lo: f64,
    pub hi: f64,
    pub power_mean: f64,
    /// Standard error from the spread of per-run window averages.
    pub power_se: f64,
    pub power_theory: f64,
    /// Window average of the per-bin kurtosis over the whole ensemble.
    pub kurtosis: Option<f64>,
    /// Standard error from the spread across batches.
    pub kurtosis_se: Option<f64>,
    pub kurtosis_theory: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderStatisticSummary {
    pub n: usize,
    /// Delays of runs with at least `n` arrivals, in run order.
    pub delays: Vec<f64>,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualSummary {
    pub n: usize,
    /// Mean residual power divided by the expected total power within the window.
    pub normalized_mean: f64,
    pub normalized_se: f64,
    /// Mean of the per-run residual fraction and the number of runs it averages.
    pub fraction_mean: Option<f64>,
    pub fraction_runs: usize,
    pub theory_within: f64,
    pub theory: f64,
    pub asymptote: f64,
}

/// Everything an ensemble produces, in memory.
#[derive(Debug, Clone)]
pub struct EnsembleSummary {
    pub model: ModelKind,
    pub runs: usize,
    pub scenario: Scenario,
    pub reverb_time: f64,
    pub scale_a: f64,
    pub pulse: SampledSignal,
    pub times: Vec<f64>,
    pub profile: PowerProfile,
    pub kurtosis: Vec<Option<f64>>,
    pub power_theory: Vec<f64>,
    pub kurtosis_theory: Vec<Option<f64>>,
    pub windows: Vec<WindowStats>,
    /// Whole-nanosecond delays of the count curve, in seconds.
    pub count_grid: Vec<f64>,
    pub count_mean: Vec<f64>,
    pub count_se: Vec<f64>,
    pub count_theory: Vec<f64>,
    pub count_total: Vec<usize>,
    pub order_statistics: Vec<OrderStatisticSummary>,
    pub mean_delays: Vec<f64>,
    pub rms_spreads: Vec<f64>,
    pub zero_power_runs: usize,
    pub residual: Vec<ResidualSummary>,
    pub elapsed: Duration,
}

impl EnsembleSummary {
    /// Mean of `N(tau_max)` and its standard error.
    pub fn mean_count(&self) -> (f64, f64) {
        let n = self.count_total.len() as f64;
        let m = self.count_total.iter().map(|&c| c as f64).sum::<f64>() / n;
        let v = self.count_total.iter().map(|&c| (c as f64 - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (v / n).sqrt())
    }

    pub fn order_statistic(&self, n: usize) -> Option<&OrderStatisticSummary> {
        self.order_statistics.iter().find(|o| o.n == n)
    }

    /// Theory CDF of the n-th arrival under this model's rate.
    pub fn order_cdf_theory(&self, n: usize, tau: f64) -> Result<f64> {
        order_cdf_for(&self.scenario, self.model, n, tau)
    }
}

/// Rate model that the theory columns of an ensemble refer to.
pub fn theory_rate(scenario: &Scenario, model: ModelKind) -> RateModel {
    match model {
        ModelKind::MirrorSource => scenario.rate_model(ModelKind::Poisson),
        other => scenario.rate_model(other),
    }
}

fn order_cdf_for(scenario: &Scenario, model: ModelKind, n: usize, tau: f64) -> Result<f64> {
    let n32 = u32::try_from(n).map_err(|_| Error::Domain(format!("order {n} too large")))?;
    match theory_rate(scenario, model) {
        RateModel::QuadraticPoisson {
            volume,
            omega_t,
            omega_r,
            speed_of_light,
        } => order_statistic_cdf(n32, tau, ScaleA::new(volume, omega_t, omega_r, speed_of_light)?.seconds()),
        rate => {
            if n == 0 {
                return Err(Error::Domain("order statistic index must be at least 1".into()));
            }
            let mean = rate.mean_count(tau)?;
            Ok(if mean > 0.0 { gamma_lr(n as f64, mean) } else { 0.0 })
        }
    }
}

/// Sounding pulse of a configuration.
pub fn config_pulse(config: &SimulationConfig) -> Result<SampledSignal> {
    hamming_pulse_with_duration(
        config.pulse_duration(),
        config.bandwidth,
        config.sample_rate(),
        config.pulse_normalize,
    )
}

struct Grid {
    len: usize,
    fs: f64,
    t_end: f64,
    windows: Vec<(f64, f64, std::ops::Range<usize>)>,
    count_ns: Vec<f64>,
}

impl Grid {
    fn new(config: &SimulationConfig, pulse: &SampledSignal) -> Self {
        let fs = pulse.sample_rate;
        let t_end = config.tau_max + (pulse.len() - 1) as f64 / fs;
        let len = (t_end * fs + 1e-9).floor() as usize + 1;
        let w = config.window_ns * 1e-9;
        let mut windows = Vec::new();
        let mut k = 0usize;
        loop {
            let lo = k as f64 * w;
            if lo >= t_end {
                break;
            }
            let hi = lo + w;
            // bins whose time lies in [lo, hi)
            let first = (lo * fs - 1e-6).ceil().max(0.0) as usize;
            let last = ((hi * fs - 1e-6).ceil().max(0.0) as usize).min(len);
            if first < last {
                windows.push((lo, hi, first..last));
            }
            k += 1;
        }
        let count_ns = (0..=(config.tau_max * 1e9 + 1e-6).floor() as usize)
            .map(|i| i as f64 * 1e-9)
            .collect();
        Grid {
            len,
            fs,
            t_end,
            windows,
            count_ns,
        }
    }
}

fn run_one(
    config: &SimulationConfig,
    scenario: &Scenario,
    pulse: &SampledSignal,
    grid: &Grid,
    index: u64,
    acc: &mut ProfileAccumulator,
) -> Result<RunRecord> {
    let realization = generate_realization(config.model, scenario, config.seed, index)?;
    let y = synthesize(&realization, pulse, grid.t_end, config.placement)?;
    acc.add(&y)?;
    let power = y.power();
    let moments = temporal_moments(&power, grid.fs, 0.0).ok();
    let window_power = grid
        .windows
        .iter()
        .map(|(_, _, r)| power[r.clone()].iter().sum::<f64>() / r.len() as f64)
        .collect();
    let counts_ns = grid
        .count_ns
        .iter()
        .map(|&t| realization.count_until(t) as u32)
        .collect();
    let order_delays = ORDERS
        .iter()
        .map(|&n| realization.paths.get(n - 1).map(|p| p.delay))
        .collect();
    let path_power: Vec<f64> = realization.paths.iter().map(|p| p.gain.norm_sqr()).collect();
    // suffix sums give every residual in one pass
    let mut suffix = vec![0.0; path_power.len() + 1];
    let mut running = CompensatedSum::new();
    for (i, p) in path_power.iter().enumerate().rev() {
        running.add(*p);
        suffix[i] = running.value();
    }
    let total = suffix[0];
    let residual_power = RESIDUAL_ORDERS
        .iter()
        .map(|&n| suffix.get(n).copied().unwrap_or(0.0))
        .collect();
    let residual_fraction = RESIDUAL_ORDERS
        .iter()
        .map(|&n| match suffix.get(n) {
            Some(r) if total > 0.0 => Some(r / total),
            _ => None,
        })
        .collect();
    Ok(RunRecord {
        count_total: realization.paths.len(),
        counts_ns,
        order_delays,
        moments,
        residual_power,
        residual_fraction,
        window_power,
    })
}

fn mean_se(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let m = values.clone().collect::<CompensatedSum>().value() / n;
    let v = values.map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn window_kurtosis(acc: &ProfileAccumulator, range: &std::ops::Range<usize>) -> Option<f64> {
    let mut sum = 0.0;
    for i in range.clone() {
        let (s2, s4) = acc.sums(i);
        sum += kurtosis_from_sums(acc.runs(), s2, s4).ok()?;
    }
    Some(sum / range.len() as f64)
}

/// Runs `config.runs` realizations of `config.model`.
///
/// Realization `i` always uses RNG stream `i` of `config.seed`, and batches
/// are contiguous index ranges merged in order, so the result does not depend
/// on the number of worker threads.
pub fn simulate_ensemble(config: &SimulationConfig) -> Result<EnsembleSummary> {
    config.validate()?;
    let start = Instant::now();
    let scenario = config.scenario()?;
    let pulse = config_pulse(config)?;
    let grid = Grid::new(config, &pulse);
    let runs = config.runs;
    let batches = config.batches.min(runs);

    let batch_results: Vec<(ProfileAccumulator, Vec<RunRecord>)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let lo = b * runs / batches;
            let hi = (b + 1) * runs / batches;
            let mut acc = ProfileAccumulator::new(grid.fs, 0.0, grid.len);
            let records = (lo..hi)
                .map(|i| run_one(config, &scenario, &pulse, &grid, i as u64, &mut acc))
                .collect::<Result<Vec<_>>>()?;
            Ok((acc, records))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut acc = ProfileAccumulator::new(grid.fs, 0.0, grid.len);
    for (a, _) in &batch_results {
        acc.merge(a)?;
    }
    let records: Vec<&RunRecord> = batch_results.iter().flat_map(|(_, r)| r.iter()).collect();

    let spectrum = scenario.spectrum()?;
    let reverb_time = spectrum.reverb_time;
    let marks = scenario.mark_model(config.model)?;
    let times: Vec<f64> = (0..grid.len).map(|i| i as f64 / grid.fs).collect();
    let profile = acc.power_profile()?;
    let kurtosis = if runs >= 2 {
        acc.kurtosis_profile()?
    } else {
        vec![None; grid.len]
    };
    let window_limit = Some(config.tau_max);
    let power_theory = times
        .iter()
        .map(|&t| expected_received_power(t, &pulse, &spectrum, window_limit))
        .collect::<Result<Vec<_>>>()?;
    let kurtosis_theory: Vec<Option<f64>> = times
        .iter()
        .map(|&t| kurtosis_delay_profile(t, &pulse, &marks, window_limit).ok())
        .collect();

    let windows = grid
        .windows
        .iter()
        .enumerate()
        .map(|(w, (lo, hi, range))| {
            let (power_mean, power_se) = mean_se(records.iter().map(|r| r.window_power[w]));
            let power_theory_w = power_theory[range.clone()].iter().sum::<f64>() / range.len() as f64;
            let kurt = if runs >= 2 { window_kurtosis(&acc, range) } else { None };
            let batch_values: Option<Vec<f64>> = if batches >= 2 {
                batch_results.iter().map(|(a, _)| window_kurtosis(a, range)).collect()
            } else {
                None
            };
            let kurtosis_se = batch_values.map(|v| mean_se(v.iter().copied()).1);
            let kurtosis_theory_w = kurtosis_theory[range.clone()]
                .iter()
                .copied()
                .collect::<Option<Vec<f64>>>()
                .map(|v| v.iter().sum::<f64>() / v.len() as f64);
            WindowStats {
                lo: *lo,
                hi: *hi,
                power_mean,
                power_se,
                power_theory: power_theory_w,
                kurtosis: kurt,
                kurtosis_se,
                kurtosis_theory: kurtosis_theory_w,
            }
        })
        .collect();

    let rate = theory_rate(&scenario, config.model);
    let mut count_mean = Vec::with_capacity(grid.count_ns.len());
    let mut count_se = Vec::with_capacity(grid.count_ns.len());
    let mut count_theory = Vec::with_capacity(grid.count_ns.len());
    for (j, &t) in grid.count_ns.iter().enumerate() {
        let (m, se) = mean_se(records.iter().map(|r| f64::from(r.counts_ns[j])));
        count_mean.push(m);
        count_se.push(se);
        count_theory.push(rate.mean_count(t)?);
    }

    let order_statistics = ORDERS
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let delays: Vec<f64> = records.iter().filter_map(|r| r.order_delays[j]).collect();
            OrderStatisticSummary {
                n,
                excluded: runs - delays.len(),
                delays,
            }
        })
        .collect();

    let mut mean_delays = Vec::with_capacity(runs);
    let mut rms_spreads = Vec::with_capacity(runs);
    for r in &records {
        if let Some((m, s)) = r.moments {
            mean_delays.push(m);
            rms_spreads.push(s);
        }
    }
    let zero_power_runs = runs - mean_delays.len();

    let scale_a = ScaleA::new(
        scenario.room.volume(),
        scenario.omega_t,
        scenario.omega_r,
        scenario.speed_of_light,
    )?
    .seconds();
    let total_within = spectrum.integral(0.0, config.tau_max);
    let residual = RESIDUAL_ORDERS
        .iter()
        .enumerate()
        .map(|(j, &n)| {
            let (normalized_mean, normalized_se) =
                mean_se(records.iter().map(|r| r.residual_power[j] / total_within));
            let fractions: Vec<f64> = records.iter().filter_map(|r| r.residual_fraction[j]).collect();
            let fraction_mean = (!fractions.is_empty()).then(|| fractions.iter().sum::<f64>() / fractions.len() as f64);
            let n32 = n as u32;
            Ok(ResidualSummary {
                n,
                normalized_mean,
                normalized_se,
                fraction_mean,
                fraction_runs: fractions.len(),
                theory_within: residual_power_ratio_within(n32, scale_a, reverb_time, config.tau_max)?,
                theory: residual_power_ratio(n32, scale_a, reverb_time)?,
                asymptote: residual_power_asymptote(n32, scale_a, reverb_time),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(EnsembleSummary {
        model: config.model,
        runs,
        scenario,
        reverb_time,
        scale_a,
        pulse,
        times,
        profile,
        kurtosis,
        power_theory,
        kurtosis_theory,
        windows,
        count_grid: grid.count_ns,
        count_mean,
        count_se,
        count_theory,
        count_total: records.iter().map(|r| r.count_total).collect(),
        order_statistics,
        mean_delays,
        rms_spreads,
        zero_power_runs,
        residual,
        elapsed: start.elapsed(),
    })
}

/// One point of the plan-view scatter of mirror sources and a spatial Poisson sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterPoint {
    pub kind: &'static str,
    pub x: f64,
    pub y: f64,
    pub visible: bool,
}

/// Mirror sources in rooms with `k_z = 0` and a matching spatial Poisson
/// sample, both within `c tau_max` of the receiver. Both terminals sit at
/// mid height and face each other.
pub fn spatial_scatter(config: &SimulationConfig) -> Result<Vec<ScatterPoint>> {
    let scenario = config.scenario()?;
    let room = scenario.room;
    let t_pos = Vec3::new(0.3 * room.lx, 0.4 * room.ly, 0.5 * room.lz);
    let r_pos = Vec3::new(0.7 * room.lx, 0.5 * room.ly, 0.5 * room.lz);
    let toward_r = (r_pos - t_pos) * (1.0 / r_pos.distance(t_pos));
    let tx = Antenna::new(t_pos, toward_r, config.omega_t)?;
    let rx = Antenna::new(r_pos, -toward_r, config.omega_r)?;
    let radius = config.speed_of_light * config.tau_max;
    let mut points = Vec::new();
    for image in mirror_images_within(&room, t_pos, r_pos, radius)? {
        if image.index.kz != 0 {
            continue;
        }
        let doa = arrival_direction(image.position, r_pos)?;
        let dod = departure_direction(image.index, doa);
        points.push(ScatterPoint {
            kind: "mirror",
            x: image.position.x,
            y: image.position.y,
            visible: rx.in_footprint(doa)? && tx.in_footprint(dod)?,
        });
    }
    let mut rng = realization_rng(config.seed, u64::MAX);
    for p in spatial_poisson_sample(&room, config.omega_t, &rx, radius, &mut rng)? {
        // one room height around the receiver, comparable with the k_z = 0 layer
        if (p.z - r_pos.z).abs() <= 0.5 * room.lz {
            points.push(ScatterPoint {
                kind: "ppp",
                x: p.x,
                y: p.y,
                visible: true,
            });
        }
    }
    Ok(points)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Writes the data files of an ensemble into `dir`.
pub fn write_ensemble(summary: &EnsembleSummary, dir: &Path) -> Result<()> {
    let mut f = create(dir, "power_kurtosis.csv")?;
    writeln!(
        f,
        "t_ns,power_mean,power_se,power_theory,kurtosis,kurtosis_theory"
    )?;
    for i in 0..summary.times.len() {
        writeln!(
            f,
            "{},{},{},{},{},{}",
            summary.times[i] * 1e9,
            summary.profile.mean[i],
            summary.profile.standard_error[i],
            summary.power_theory[i],
            opt(summary.kurtosis[i]),
            opt(summary.kurtosis_theory[i]),
        )?;
    }
    f.flush()?;

    let mut f = create(dir, "profile_windows.csv")?;
    writeln!(
        f,
        "lo_ns,hi_ns,power_mean,power_se,power_theory,kurtosis,kurtosis_se,kurtosis_theory"
    )?;
    for w in &summary.windows {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{}",
            w.lo * 1e9,
            w.hi * 1e9,
            w.power_mean,
            w.power_se,
            w.power_theory,
            opt(w.kurtosis),
            opt(w.kurtosis_se),
            opt(w.kurtosis_theory)
        )?;
    }
    f.flush()?;

    let mut f = create(dir, "arrival_count.csv")?;
    writeln!(f, "tau_ns,count_mean,count_se,count_theory")?;
    for j in 0..summary.count_grid.len() {
        writeln!(
            f,
            "{},{},{},{}",
            summary.count_grid[j] * 1e9,
            summary.count_mean[j],
            summary.count_se[j],
            summary.count_theory[j]
        )?;
    }
    f.flush()?;

    // empirical CDF over all runs: runs without an n-th arrival count as later than any delay
    let mut f = create(dir, "order_statistics.csv")?;
    writeln!(f, "n,tau_ns,cdf_empirical,cdf_theory,excluded_runs")?;
    let steps = (summary.scenario.tau_max * 1e9 * 4.0).round() as usize;
    for o in &summary.order_statistics {
        let cdf = EmpiricalCdf::new(o.delays.clone()).ok();
        for s in 0..=steps {
            let tau = s as f64 * 0.25e-9;
            let emp = cdf
                .as_ref()
                .map(|c| c.eval(tau) * c.len() as f64 / summary.runs as f64)
                .unwrap_or(0.0);
            writeln!(
                f,
                "{},{},{},{},{}",
                o.n,
                tau * 1e9,
                emp,
                summary.order_cdf_theory(o.n, tau)?,
                o.excluded,
            )?;
        }
    }
    f.flush()?;

    let mut f = create(dir, "residual_power.csv")?;
    writeln!(
        f,
        "n,residual_mean,residual_se,fraction_mean,fraction_runs,theory_within_window,theory,asymptote"
    )?;
    for r in &summary.residual {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{}",
            r.n,
            r.normalized_mean,
            r.normalized_se,
            opt(r.fraction_mean),
            r.fraction_runs,
            r.theory_within,
            r.theory,
            r.asymptote
        )?;
    }
    f.flush()?;

    let mut f = create(dir, "delay_moments.csv")?;
    writeln!(f, "cdf,mean_delay_ns,rms_spread_ns")?;
    let mut md = summary.mean_delays.clone();
    let mut rs = summary.rms_spreads.clone();
    md.sort_by(f64::total_cmp);
    rs.sort_by(f64::total_cmp);
    let n = md.len() as f64;
    for (i, (m, r)) in md.iter().zip(&rs).enumerate() {
        writeln!(f, "{},{},{}", (i + 1) as f64 / n, m * 1e9, r * 1e9)?;
    }
    f.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Manifest<'a> {
    program: &'static str,
    version: &'static str,
    model: &'a str,
    seed: u64,
    runs: usize,
    config: &'a SimulationConfig,
    config_text: String,
    reverb_time_ns: f64,
    scale_a_ns: f64,
    expected_count: f64,
    zero_power_runs: usize,
    excluded_runs: Vec<(usize, usize)>,
    files: Vec<&'static str>,
}

/// Runs the configured ensemble and writes its data files, the scatter dump,
/// optional realization dumps and a manifest into `config.output_dir`.
pub fn run_experiment(config: &SimulationConfig) -> Result<EnsembleSummary> {
    config.validate()?;
    let dir = &config.output_dir;
    fs::create_dir_all(dir)?;
    let summary = simulate_ensemble(config)?;
    write_ensemble(&summary, dir)?;

    let mut f = create(dir, "spatial_scatter.csv")?;
    writeln!(f, "kind,x_m,y_m,visible")?;
    for p in spatial_scatter(config)? {
        writeln!(f, "{},{},{},{}", p.kind, p.x, p.y, p.visible)?;
    }
    f.flush()?;

    let mut files = vec![
        "config.txt",
        "power_kurtosis.csv",
        "profile_windows.csv",
        "arrival_count.csv",
        "order_statistics.csv",
        "residual_power.csv",
        "delay_moments.csv",
        "spatial_scatter.csv",
    ];
    if config.dump_realizations {
        dump_realizations(config, config.dump_count, &dir.join("realizations"))?;
        files.push("realizations/");
    }
    fs::write(dir.join("config.txt"), config.to_text())?;

    let rate = theory_rate(&summary.scenario, config.model);
    let manifest = Manifest {
        program: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        model: config.model.name(),
        seed: config.seed,
        runs: config.runs,
        config,
        config_text: config.to_text(),
        reverb_time_ns: summary.reverb_time * 1e9,
        scale_a_ns: summary.scale_a * 1e9,
        expected_count: rate.mean_count(config.tau_max)?,
        zero_power_runs: summary.zero_power_runs,
        excluded_runs: summary.order_statistics.iter().map(|o| (o.n, o.excluded)).collect(),
        files,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Numeric(format!("manifest: {e}")))?;
    fs::write(dir.join("manifest.json"), json + "\n")?;
    Ok(summary)
}

/// Writes realizations `0..count` of the configured model, one CSV per realization.
pub fn dump_realizations(config: &SimulationConfig, count: usize, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let scenario = config.scenario()?;
    for i in 0..count {
        let r = generate_realization(config.model, &scenario, config.seed, i as u64)?;
        let mut f = create(dir, &format!("realization_{i:05}.csv"))?;
        write_realization(&r, &mut f)?;
        f.flush()?;
    }
    Ok(())
}

/// Closed-form curves of a configuration, written as CSV files into `dir`.
pub fn write_theory(config: &SimulationConfig, dir: &Path) -> Result<()> {
    config.validate()?;
    fs::create_dir_all(dir)?;
    let scenario = config.scenario()?;
    let spectrum: PowerDelaySpectrum = scenario.spectrum()?;
    let pulse = config_pulse(config)?;
    let marks = scenario.mark_model(config.model)?;
    let rate = theory_rate(&scenario, config.model);
    let window = Some(config.tau_max);

    let mut f = create(dir, "theory_delay.csv")?;
    writeln!(
        f,
        "tau_ns,rate_per_ns,mean_count,power_spectrum,mark_second_moment,received_power,kurtosis"
    )?;
    let steps = (config.tau_max * 1e9 * 4.0).round() as usize;
    for s in 0..=steps {
        let tau = s as f64 * 0.25e-9;
        let sigma2 = marks.second_moment(tau).ok();
        writeln!(
            f,
            "{},{},{},{},{},{},{}",
            tau * 1e9,
            rate.intensity(tau)? * 1e-9,
            rate.mean_count(tau)?,
            spectrum.at(tau),
            opt(sigma2),
            expected_received_power(tau, &pulse, &spectrum, window)?,
            opt(kurtosis_delay_profile(tau, &pulse, &marks, window).ok()),
        )?;
    }
    f.flush()?;

    let mut f = create(dir, "theory_order_cdf.csv")?;
    writeln!(f, "n,tau_ns,cdf")?;
    for &n in &ORDERS {
        for s in 0..=steps {
            let tau = s as f64 * 0.25e-9;
            writeln!(f, "{},{},{}", n, tau * 1e9, order_cdf_for(&scenario, config.model, n, tau)?)?;
        }
    }
    f.flush()?;

    let a = ScaleA::new(
        scenario.room.volume(),
        scenario.omega_t,
        scenario.omega_r,
        scenario.speed_of_light,
    )?
    .seconds();
    let t = spectrum.reverb_time;
    let mut f = create(dir, "theory_residual.csv")?;
    writeln!(f, "n,residual,residual_within_window,asymptote")?;
    for n in (0..=10).chain((20..=100).step_by(10)).chain((200..=2000).step_by(100)) {
        writeln!(
            f,
            "{},{},{},{}",
            n,
            residual_power_ratio(n, a, t)?,
            residual_power_ratio_within(n, a, t, config.tau_max)?,
            residual_power_asymptote(n, a, t)
        )?;
    }
    f.flush()?;
    Ok(())
}
