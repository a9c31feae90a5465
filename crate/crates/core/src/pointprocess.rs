//! Channel realizations under the four arrival models.
//!
//! * mirror source: exact image lattice with random antenna placement and orientation,
//! * quadratic Poisson: the inhomogeneous Poisson approximation of the lattice,
//! * constant rate: homogeneous Poisson arrivals with the same power delay spectrum,
//! * quadratic empirical: `lambda(tau) = eta tau^2` with a free factor `eta`.
//!
//! All randomness flows from an explicit RNG. [`realization_rng`] derives an
//! independent ChaCha stream per realization index, so ensembles are
//! reproducible regardless of how realizations are scheduled.

use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::geometry::{
    arrival_direction, departure_direction, mirror_images_within, path_power_gain, Antenna, LatticeIndex, Room, Vec3,
};
use crate::theory::{reverberation_time, PowerDelaySpectrum, ReverbParams};

/// Arrival-rate model of the delay point process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RateModel {
    /// Exact image lattice; the arrival process has no closed-form intensity here.
    MirrorSource,
    /// `4 pi c^3 tau^2 w_T w_R / V`.
    QuadraticPoisson {
        volume: f64,
        omega_t: f64,
        omega_r: f64,
        speed_of_light: f64,
    },
    /// Homogeneous rate `rho0`.
    ConstantRate { rho0: f64 },
    /// `eta tau^2`.
    QuadraticEmpirical { eta: f64 },
}

impl RateModel {
    pub fn quadratic(volume: f64, omega_t: f64, omega_r: f64, speed_of_light: f64) -> Self {
        RateModel::QuadraticPoisson {
            volume,
            omega_t,
            omega_r,
            speed_of_light,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            RateModel::MirrorSource => true,
            RateModel::QuadraticPoisson {
                volume,
                omega_t,
                omega_r,
                speed_of_light,
            } => volume > 0.0 && omega_t >= 0.0 && omega_r >= 0.0 && speed_of_light > 0.0,
            RateModel::ConstantRate { rho0 } => rho0 >= 0.0,
            RateModel::QuadraticEmpirical { eta } => eta >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            domain(format!("invalid rate parameters {self:?}"))
        }
    }

    /// Intensity `lambda(tau)` in 1/s.
    pub fn intensity(&self, tau: f64) -> Result<f64> {
        self.validate()?;
        if !(tau > 0.0) {
            return Ok(0.0);
        }
        Ok(match *self {
            RateModel::MirrorSource => return domain("the mirror-source model has no closed-form arrival rate"),
            RateModel::QuadraticPoisson {
                volume,
                omega_t,
                omega_r,
                speed_of_light: c,
            } => 4.0 * PI * c.powi(3) * tau * tau * omega_t * omega_r / volume,
            RateModel::ConstantRate { rho0 } => rho0,
            RateModel::QuadraticEmpirical { eta } => eta * tau * tau,
        })
    }

    /// `Lambda(tau) = \int_0^tau lambda`.
    pub fn mean_count(&self, tau: f64) -> Result<f64> {
        self.validate()?;
        if !(tau > 0.0) {
            return Ok(0.0);
        }
        Ok(match *self {
            RateModel::MirrorSource => return domain("the mirror-source model has no closed-form arrival count"),
            RateModel::QuadraticPoisson {
                volume,
                omega_t,
                omega_r,
                speed_of_light: c,
            } => 4.0 * PI * (c * tau).powi(3) * omega_t * omega_r / (3.0 * volume),
            RateModel::ConstantRate { rho0 } => rho0 * tau,
            RateModel::QuadraticEmpirical { eta } => eta * tau.powi(3) / 3.0,
        })
    }

    /// True when the rate goes to zero at zero delay, which makes the
    /// marks' second moment (power spectrum over rate) blow up there.
    pub fn vanishes_at_zero(&self) -> bool {
        !matches!(self, RateModel::ConstantRate { .. })
    }
}

/// Distribution family of the complex path gains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MarkFamily {
    CircularGaussian,
    ConstantModulusUniformPhase,
}

impl MarkFamily {
    /// `E|alpha|^{2n} / (E|alpha|^2)^n`.
    pub fn moment_ratio(&self, n: u32) -> f64 {
        match self {
            MarkFamily::CircularGaussian => (1..=n).map(f64::from).product(),
            MarkFamily::ConstantModulusUniformPhase => 1.0,
        }
    }

    /// Kurtosis `E|alpha|^4 / (E|alpha|^2)^2` of the marks.
    pub fn kurtosis(&self) -> f64 {
        self.moment_ratio(2)
    }
}

impl FromStr for MarkFamily {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gaussian" => Ok(MarkFamily::CircularGaussian),
            "constant_modulus" => Ok(MarkFamily::ConstantModulusUniformPhase),
            _ => Err(format!("unknown mark family `{s}` (expected gaussian or constant_modulus)")),
        }
    }
}

impl fmt::Display for MarkFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MarkFamily::CircularGaussian => "gaussian",
            MarkFamily::ConstantModulusUniformPhase => "constant_modulus",
        })
    }
}

/// Circular marks whose conditional second moment makes the power delay
/// spectrum equal `spectrum`: `sigma^2(tau) = P(tau) / lambda(tau)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkModel {
    pub family: MarkFamily,
    pub spectrum: PowerDelaySpectrum,
    pub rate: RateModel,
}

impl MarkModel {
    pub fn new(family: MarkFamily, spectrum: PowerDelaySpectrum, rate: RateModel) -> Self {
        MarkModel { family, spectrum, rate }
    }

    pub fn second_moment(&self, tau: f64) -> Result<f64> {
        if !(tau > 0.0) {
            return domain(format!("mark second moment needs tau > 0, got {tau}"));
        }
        let rate = self.rate.intensity(tau)?;
        if !(rate > 0.0) {
            return Err(Error::Undefined(format!("arrival rate vanishes at tau = {tau:e}")));
        }
        Ok(self.spectrum.at(tau) / rate)
    }
}

/// Which generator produced a realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    MirrorSource,
    Poisson,
    ConstantRate,
    QuadraticEmpirical,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::MirrorSource,
        ModelKind::Poisson,
        ModelKind::ConstantRate,
        ModelKind::QuadraticEmpirical,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::MirrorSource => "ms",
            ModelKind::Poisson => "poisson",
            ModelKind::ConstantRate => "constant",
            ModelKind::QuadraticEmpirical => "quadratic",
        }
    }
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown model `{s}` (expected ms, poisson, constant or quadratic)"))
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Phase convention for mirror-source gains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseModel {
    /// `exp(-j 2 pi c tau / l_c)`.
    Carrier,
    /// Independent uniform phase per path.
    Uniform,
}

impl FromStr for PhaseModel {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "carrier" => Ok(PhaseModel::Carrier),
            "uniform" => Ok(PhaseModel::Uniform),
            _ => Err(format!("unknown phase model `{s}` (expected carrier or uniform)")),
        }
    }
}

impl fmt::Display for PhaseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhaseModel::Carrier => "carrier",
            PhaseModel::Uniform => "uniform",
        })
    }
}

/// One multipath term. Lattice index and directions are present only for
/// mirror-source paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathComponent {
    pub index: Option<LatticeIndex>,
    pub delay: f64,
    pub gain: Complex64,
    pub doa: Option<Vec3>,
    pub dod: Option<Vec3>,
}

impl PathComponent {
    pub fn new(delay: f64, gain: Complex64) -> Self {
        PathComponent {
            index: None,
            delay,
            gain,
            doa: None,
            dod: None,
        }
    }

    pub fn order(&self) -> Option<u32> {
        self.index.map(|k| k.order())
    }
}

/// Delay-sorted multipath list with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub paths: Vec<PathComponent>,
    pub model: ModelKind,
    pub tau_max: f64,
    /// Master seed and realization index of the RNG substream, when generated through one.
    pub seed: Option<u64>,
    pub index: Option<u64>,
}

impl ChannelRealization {
    pub fn delays(&self) -> impl Iterator<Item = f64> + '_ {
        self.paths.iter().map(|p| p.delay)
    }

    /// Number of arrivals with delay at most `tau`.
    pub fn count_until(&self, tau: f64) -> usize {
        self.paths.partition_point(|p| p.delay <= tau)
    }

    pub fn total_power(&self) -> f64 {
        self.paths.iter().map(|p| p.gain.norm_sqr()).sum()
    }
}

/// Physical settings shared by all generators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub room: Room,
    pub wall_gain: f64,
    pub wavelength: f64,
    pub speed_of_light: f64,
    pub tau_max: f64,
    pub gamma_sq: f64,
    pub omega_t: f64,
    pub omega_r: f64,
    pub rho0: f64,
    pub eta: f64,
    pub min_separation: f64,
    pub max_placement_attempts: u32,
    pub phase: PhaseModel,
    pub mark_family: MarkFamily,
}

impl Scenario {
    /// Reference scenario (5 x 5 x 3 m room, wall gain 0.6) with the given beam coverage fractions.
    pub fn table(omega_t: f64, omega_r: f64) -> Self {
        let room = Room {
            lx: 5.0,
            ly: 5.0,
            lz: 3.0,
        };
        let c = 3e8;
        let tau_max = 100e-9;
        Scenario {
            room,
            wall_gain: 0.6,
            wavelength: 0.03,
            speed_of_light: c,
            tau_max,
            gamma_sq: 0.4,
            omega_t,
            omega_r,
            rho0: omega_t * omega_r * 150.0 / tau_max,
            eta: 4.0 * PI * c.powi(3) * omega_t * omega_r / room.volume(),
            min_separation: 0.1,
            max_placement_attempts: 10_000,
            phase: PhaseModel::Carrier,
            mark_family: MarkFamily::CircularGaussian,
        }
    }

    pub fn reverb_time(&self) -> Result<f64> {
        reverberation_time(&ReverbParams {
            wall_gain: self.wall_gain,
            gamma_sq: self.gamma_sq,
            room: self.room,
            speed_of_light: self.speed_of_light,
        })
    }

    pub fn spectrum(&self) -> Result<PowerDelaySpectrum> {
        PowerDelaySpectrum::new(self.room.volume(), self.reverb_time()?, self.speed_of_light)
    }

    pub fn rate_model(&self, kind: ModelKind) -> RateModel {
        match kind {
            ModelKind::MirrorSource => RateModel::MirrorSource,
            ModelKind::Poisson => {
                RateModel::quadratic(self.room.volume(), self.omega_t, self.omega_r, self.speed_of_light)
            }
            ModelKind::ConstantRate => RateModel::ConstantRate { rho0: self.rho0 },
            ModelKind::QuadraticEmpirical => RateModel::QuadraticEmpirical { eta: self.eta },
        }
    }

    /// Mark model of a Poisson-type generator. The mirror-source model has
    /// geometric gains and is given the quadratic-Poisson marks it is
    /// approximated by.
    pub fn mark_model(&self, kind: ModelKind) -> Result<MarkModel> {
        let rate = match kind {
            ModelKind::MirrorSource => self.rate_model(ModelKind::Poisson),
            other => self.rate_model(other),
        };
        Ok(MarkModel::new(self.mark_family, self.spectrum()?, rate))
    }
}

/// Independent RNG stream for realization `index` under `master_seed`.
pub fn realization_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // (0, 1]
    1.0 - rng.random::<f64>()
}

/// Arrival delays on `(0, tau_max]`: Poisson count, then iid inverse-CDF draws.
pub fn sample_arrivals<R: Rng + ?Sized>(rate: &RateModel, tau_max: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(tau_max > 0.0) {
        return domain(format!("tau_max must be positive, got {tau_max}"));
    }
    let mean = rate.mean_count(tau_max)?;
    let count = if mean > 0.0 {
        let poisson = Poisson::new(mean).map_err(|e| Error::Sampling(format!("poisson mean {mean}: {e}")))?;
        poisson.sample(rng) as usize
    } else {
        0
    };
    let mut delays: Vec<f64> = (0..count)
        .map(|_| {
            let u = open_unit(rng);
            match rate {
                RateModel::ConstantRate { .. } => tau_max * u,
                _ => tau_max * u.cbrt(),
            }
        })
        .collect();
    delays.sort_by(f64::total_cmp);
    Ok(delays)
}

/// Independent circular marks with the model's conditional second moment.
pub fn sample_marks<R: Rng + ?Sized>(delays: &[f64], marks: &MarkModel, rng: &mut R) -> Result<Vec<Complex64>> {
    delays
        .iter()
        .map(|&tau| {
            if !(tau > 0.0) {
                return domain(format!("mark requested at nonpositive delay {tau}"));
            }
            let sigma = marks.second_moment(tau)?.sqrt();
            Ok(match marks.family {
                MarkFamily::CircularGaussian => {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(re, im) * (sigma * std::f64::consts::FRAC_1_SQRT_2)
                }
                MarkFamily::ConstantModulusUniformPhase => {
                    let phi = 2.0 * PI * rng.random::<f64>();
                    Complex64::from_polar(sigma, phi)
                }
            })
        })
        .collect()
}

fn uniform_direction<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    Vec3::from(UnitSphere.sample(rng))
}

fn uniform_in_room<R: Rng + ?Sized>(room: &Room, rng: &mut R) -> Vec3 {
    Vec3::new(
        rng.random::<f64>() * room.lx,
        rng.random::<f64>() * room.ly,
        rng.random::<f64>() * room.lz,
    )
}

/// Transmitter and receiver drawn uniformly in the room, at least
/// `min_separation` apart, with boresights uniform on the sphere.
pub fn sample_terminals<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<(Antenna, Antenna)> {
    for _ in 0..scenario.max_placement_attempts {
        let t = uniform_in_room(&scenario.room, rng);
        let r = uniform_in_room(&scenario.room, rng);
        if t.distance(r) < scenario.min_separation {
            continue;
        }
        let tx = Antenna::new(t, uniform_direction(rng), scenario.omega_t)?;
        let rx = Antenna::new(r, uniform_direction(rng), scenario.omega_r)?;
        return Ok((tx, rx));
    }
    Err(Error::Sampling(format!(
        "no terminal placement with separation >= {} m after {} attempts",
        scenario.min_separation, scenario.max_placement_attempts
    )))
}

/// Visible mirror-source paths for fixed terminals.
///
/// Gains are expressed relative to the free-space reference `(l_c / 4 pi)^2`,
/// i.e. `|alpha|^2 = g^|k| G_T G_R / (c tau)^2`, which puts them on the same
/// scale as the Poisson-model marks.
pub fn mirror_source_paths<R: Rng + ?Sized>(
    scenario: &Scenario,
    tx: &Antenna,
    rx: &Antenna,
    rng: &mut R,
) -> Result<Vec<PathComponent>> {
    let c = scenario.speed_of_light;
    let radius = c * scenario.tau_max;
    let reference = 4.0 * PI / scenario.wavelength;
    let images = mirror_images_within(&scenario.room, tx.position, rx.position, radius)?;
    let mut paths = Vec::with_capacity(images.len());
    for image in images {
        let delay = image.position.distance(rx.position) / c;
        if !(delay > 0.0 && delay <= scenario.tau_max) {
            continue;
        }
        let doa = arrival_direction(image.position, rx.position)?;
        let dod = departure_direction(image.index, doa);
        if !(rx.in_footprint(doa)? && tx.in_footprint(dod)?) {
            continue;
        }
        let power = path_power_gain(
            image.index.order(),
            delay,
            dod,
            doa,
            tx,
            rx,
            scenario.wall_gain,
            scenario.wavelength,
            c,
        )?;
        let phase = match scenario.phase {
            PhaseModel::Carrier => -2.0 * PI * (c * delay / scenario.wavelength).fract(),
            PhaseModel::Uniform => 2.0 * PI * rng.random::<f64>(),
        };
        paths.push(PathComponent {
            index: Some(image.index),
            delay,
            gain: Complex64::from_polar(power.sqrt() * reference, phase),
            doa: Some(doa),
            dod: Some(dod),
        });
    }
    paths.sort_by(|a, b| a.delay.total_cmp(&b.delay).then(a.index.cmp(&b.index)));
    Ok(paths)
}

pub fn sample_mirror_source_channel<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<ChannelRealization> {
    let (tx, rx) = sample_terminals(scenario, rng)?;
    Ok(ChannelRealization {
        paths: mirror_source_paths(scenario, &tx, &rx, rng)?,
        model: ModelKind::MirrorSource,
        tau_max: scenario.tau_max,
        seed: None,
        index: None,
    })
}

fn sample_marked_poisson<R: Rng + ?Sized>(
    scenario: &Scenario,
    kind: ModelKind,
    rng: &mut R,
) -> Result<ChannelRealization> {
    let marks = scenario.mark_model(kind)?;
    let delays = sample_arrivals(&marks.rate, scenario.tau_max, rng)?;
    let gains = sample_marks(&delays, &marks, rng)?;
    Ok(ChannelRealization {
        paths: delays
            .into_iter()
            .zip(gains)
            .map(|(d, g)| PathComponent::new(d, g))
            .collect(),
        model: kind,
        tau_max: scenario.tau_max,
        seed: None,
        index: None,
    })
}

/// Quadratic-rate Poisson approximation with Gaussian (or constant-modulus) marks.
pub fn sample_poisson_channel<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<ChannelRealization> {
    sample_marked_poisson(scenario, ModelKind::Poisson, rng)
}

pub fn sample_constant_rate_channel<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<ChannelRealization> {
    sample_marked_poisson(scenario, ModelKind::ConstantRate, rng)
}

pub fn sample_quadratic_empirical_channel<R: Rng + ?Sized>(
    scenario: &Scenario,
    rng: &mut R,
) -> Result<ChannelRealization> {
    sample_marked_poisson(scenario, ModelKind::QuadraticEmpirical, rng)
}

pub fn sample_channel<R: Rng + ?Sized>(kind: ModelKind, scenario: &Scenario, rng: &mut R) -> Result<ChannelRealization> {
    match kind {
        ModelKind::MirrorSource => sample_mirror_source_channel(scenario, rng),
        other => sample_marked_poisson(scenario, other, rng),
    }
}

/// Realization `index` of the ensemble seeded by `master_seed`.
pub fn generate_realization(
    kind: ModelKind,
    scenario: &Scenario,
    master_seed: u64,
    index: u64,
) -> Result<ChannelRealization> {
    let mut rng = realization_rng(master_seed, index);
    let mut realization = sample_channel(kind, scenario, &mut rng)?;
    realization.seed = Some(master_seed);
    realization.index = Some(index);
    Ok(realization)
}

/// Homogeneous spatial Poisson process of intensity `omega_t / volume` in the
/// ball of `radius` around the receiver, thinned to points whose arrival
/// direction lies in the receiver footprint.
pub fn spatial_poisson_sample<R: Rng + ?Sized>(
    room: &Room,
    omega_t: f64,
    receiver: &Antenna,
    radius: f64,
    rng: &mut R,
) -> Result<Vec<Vec3>> {
    if !(radius > 0.0) {
        return domain(format!("radius must be positive, got {radius}"));
    }
    if !(omega_t > 0.0 && omega_t <= 1.0) {
        return domain(format!("beam coverage fraction must lie in (0, 1], got {omega_t}"));
    }
    let mean = omega_t / room.volume() * 4.0 / 3.0 * PI * radius.powi(3);
    let count = Poisson::new(mean)
        .map_err(|e| Error::Sampling(format!("poisson mean {mean}: {e}")))?
        .sample(rng) as usize;
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let dir = uniform_direction(rng);
        let r = radius * open_unit(rng).cbrt();
        if receiver.in_footprint(dir)? {
            points.push(receiver.position + dir * r);
        }
    }
    Ok(points)
}

const DUMP_HEADER: &str = "kx,ky,kz,delay_s,gain_re,gain_im,reflection_order";

/// Writes the paths as a CSV table; lattice columns are blank for non-geometric models.
pub fn write_realization<W: Write>(realization: &ChannelRealization, mut out: W) -> Result<()> {
    writeln!(out, "{DUMP_HEADER}")?;
    for p in &realization.paths {
        match p.index {
            Some(k) => write!(out, "{},{},{},", k.kx, k.ky, k.kz)?,
            None => write!(out, ",,,")?,
        }
        write!(out, "{:e},{:e},{:e},", p.delay, p.gain.re, p.gain.im)?;
        match p.index {
            Some(k) => writeln!(out, "{}", k.order())?,
            None => writeln!(out)?,
        }
    }
    Ok(())
}

/// Reads paths written by [`write_realization`]. Directions are not stored.
pub fn read_realization<R: BufRead>(input: R) -> Result<Vec<PathComponent>> {
    let mut paths = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        if i == 0 {
            if line.trim() != DUMP_HEADER {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected header `{DUMP_HEADER}`"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 7 fields, found {}", fields.len()),
            });
        }
        let bad = |what: &str| Error::Parse {
            line: lineno,
            msg: format!("cannot parse {what}"),
        };
        let float = |s: &str, what: &str| s.trim().parse::<f64>().map_err(|_| bad(what));
        let index = if fields[0].trim().is_empty() {
            None
        } else {
            let k = |s: &str| s.trim().parse::<i32>().map_err(|_| bad("lattice index"));
            Some(LatticeIndex::new(k(fields[0])?, k(fields[1])?, k(fields[2])?))
        };
        paths.push(PathComponent {
            index,
            delay: float(fields[3], "delay")?,
            gain: Complex64::new(float(fields[4], "gain_re")?, float(fields[5], "gain_im")?),
            doa: None,
            dod: None,
        });
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::enumerate_indices;
    use crate::theory::conditional_second_moment;

    #[test]
    fn rates_and_counts() {
        let q = RateModel::quadratic(75.0, 1.0, 1.0, 3e8);
        assert!((q.mean_count(100e-9).unwrap() - 1508.0).abs() < 0.05);
        let c = RateModel::ConstantRate { rho0: 150.0 / 1e-7 };
        assert!((c.mean_count(1e-7).unwrap() - 150.0).abs() < 1e-9);
        let e = RateModel::QuadraticEmpirical { eta: 3.0 };
        assert!((e.mean_count(2.0).unwrap() - 8.0).abs() < 1e-12);
        assert!((e.intensity(2.0).unwrap() - 12.0).abs() < 1e-12);
        assert!(RateModel::MirrorSource.intensity(1e-9).is_err());
        assert!(RateModel::ConstantRate { rho0: -1.0 }.intensity(1.0).is_err());
    }

    #[test]
    fn quadratic_marks_match_conditional_second_moment() {
        let s = Scenario::table(0.5, 1.0);
        let m = s.mark_model(ModelKind::Poisson).unwrap();
        let t = s.reverb_time().unwrap();
        for tau in [0.3e-9, 10e-9, 99e-9] {
            let a = m.second_moment(tau).unwrap();
            let b = conditional_second_moment(tau, 0.5, 1.0, t, 3e8).unwrap();
            assert!((a / b - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn arrivals_respect_window_and_order() {
        let mut rng = realization_rng(7, 0);
        let rate = RateModel::quadratic(75.0, 1.0, 1.0, 3e8);
        let d = sample_arrivals(&rate, 100e-9, &mut rng).unwrap();
        assert!(!d.is_empty());
        assert!(d.windows(2).all(|w| w[0] <= w[1]));
        assert!(d.iter().all(|&t| t > 0.0 && t <= 100e-9));
        assert!(sample_arrivals(&rate, 0.0, &mut rng).is_err());
        assert!(sample_arrivals(&rate, 1e-15, &mut rng).unwrap().is_empty());
        assert!(sample_arrivals(&RateModel::MirrorSource, 1e-7, &mut rng).is_err());
    }

    #[test]
    fn arrival_count_means() {
        let rate = RateModel::quadratic(75.0, 1.0, 1.0, 3e8);
        let runs = 10_000;
        let total: usize = (0..runs)
            .map(|i| sample_arrivals(&rate, 100e-9, &mut realization_rng(11, i)).unwrap().len())
            .sum();
        let mean = total as f64 / runs as f64;
        assert!((mean / 1508.0 - 1.0).abs() < 0.01, "{mean}");

        let rate = RateModel::ConstantRate { rho0: 150.0 / 1e-7 };
        let total: usize = (0..runs)
            .map(|i| sample_arrivals(&rate, 100e-9, &mut realization_rng(12, i)).unwrap().len())
            .sum();
        let mean = total as f64 / runs as f64;
        // sd of the mean is sqrt(150 / 1e4) = 0.12
        assert!((mean - 150.0).abs() < 0.5, "{mean}");
    }

    #[test]
    fn marks_reject_nonpositive_delay() {
        let s = Scenario::table(1.0, 1.0);
        let m = s.mark_model(ModelKind::Poisson).unwrap();
        let mut rng = realization_rng(1, 1);
        assert!(sample_marks(&[1e-9, 0.0], &m, &mut rng).is_err());
    }

    #[test]
    fn gaussian_mark_moments() {
        let s = Scenario::table(1.0, 1.0);
        let m = s.mark_model(ModelKind::Poisson).unwrap();
        let tau = 30e-9;
        let n = 100_000;
        let mut rng = realization_rng(3, 0);
        let draws = sample_marks(&vec![tau; n], &m, &mut rng).unwrap();
        let sigma2 = m.second_moment(tau).unwrap();
        let nf = n as f64;
        let mean: Complex64 = draws.iter().sum::<Complex64>() / nf;
        // each component has variance sigma2/2
        let se = (sigma2 / 2.0 / nf).sqrt();
        assert!(mean.re.abs() < 4.0 * se && mean.im.abs() < 4.0 * se);
        let p: Vec<f64> = draws.iter().map(|a| a.norm_sqr()).collect();
        let m2 = p.iter().sum::<f64>() / nf;
        // |alpha|^2 is exponential: sd = mean
        assert!((m2 - sigma2).abs() < 3.0 * sigma2 / nf.sqrt());
        let m4 = p.iter().map(|x| x * x).sum::<f64>() / nf;
        // Var |alpha|^4 = E|alpha|^8 - (E|alpha|^4)^2 = (24 - 4) sigma^8
        let se4 = (20.0f64).sqrt() * sigma2 * sigma2 / nf.sqrt();
        assert!((m4 - 2.0 * m2 * m2).abs() < 5.0 * se4, "{m4} vs {}", 2.0 * m2 * m2);
    }

    #[test]
    fn constant_modulus_marks() {
        let mut s = Scenario::table(1.0, 1.0);
        s.mark_family = MarkFamily::ConstantModulusUniformPhase;
        let m = s.mark_model(ModelKind::Poisson).unwrap();
        let mut rng = realization_rng(5, 0);
        let draws = sample_marks(&[5e-9, 50e-9], &m, &mut rng).unwrap();
        for (a, tau) in draws.iter().zip([5e-9, 50e-9]) {
            assert!((a.norm_sqr() / m.second_moment(tau).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn isotropic_mirror_source_sees_every_image() {
        let s = Scenario::table(1.0, 1.0);
        let mut rng = realization_rng(21, 0);
        let (tx, rx) = sample_terminals(&s, &mut rng).unwrap();
        let paths = mirror_source_paths(&s, &tx, &rx, &mut rng).unwrap();
        let all = enumerate_indices(&s.room, tx.position, rx.position, s.speed_of_light * s.tau_max).unwrap();
        assert_eq!(paths.len(), all.len());
        assert!(paths.windows(2).all(|w| w[0].delay <= w[1].delay));
        let los = paths.iter().find(|p| p.index == Some(LatticeIndex::IDENTITY)).unwrap();
        assert!((los.delay - tx.position.distance(rx.position) / 3e8).abs() < 1e-20);
        // normalized LOS power is 1/(c tau)^2
        assert!((los.gain.norm_sqr() * (3e8 * los.delay).powi(2) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mirror_source_delays_are_reciprocal() {
        let s = Scenario::table(1.0, 1.0);
        let mut rng = realization_rng(22, 0);
        let (tx, rx) = sample_terminals(&s, &mut rng).unwrap();
        let fwd = mirror_source_paths(&s, &tx, &rx, &mut rng).unwrap();
        let bwd = mirror_source_paths(&s, &rx, &tx, &mut rng).unwrap();
        assert_eq!(fwd.len(), bwd.len());
        for (a, b) in fwd.iter().zip(&bwd) {
            assert!((a.delay - b.delay).abs() < 1e-18);
        }
    }

    #[test]
    fn same_seed_same_realization() {
        let s = Scenario::table(0.5, 0.5);
        for kind in ModelKind::ALL {
            let a = generate_realization(kind, &s, 99, 17).unwrap();
            let b = generate_realization(kind, &s, 99, 17).unwrap();
            assert_eq!(a, b);
            let c = generate_realization(kind, &s, 99, 18).unwrap();
            assert_ne!(a.paths, c.paths);
        }
    }

    #[test]
    fn spatial_poisson_counts() {
        let room = Room::new(5.0, 5.0, 3.0).unwrap();
        let centre = Vec3::new(2.0, 2.0, 1.0);
        let iso = Antenna::isotropic(centre);
        let half = Antenna::new(centre, Vec3::new(0.0, 0.0, 1.0), 0.5).unwrap();
        let radius: f64 = 10.0;
        let expected = 4.0 / 3.0 * PI * radius.powi(3) / room.volume();
        let runs = 2000;
        let mut n_iso = 0usize;
        let mut n_half = 0usize;
        for i in 0..runs {
            let mut rng = realization_rng(31, i);
            n_iso += spatial_poisson_sample(&room, 1.0, &iso, radius, &mut rng).unwrap().len();
            let mut rng = realization_rng(32, i);
            n_half += spatial_poisson_sample(&room, 1.0, &half, radius, &mut rng).unwrap().len();
        }
        let se = (expected / runs as f64).sqrt();
        let m_iso = n_iso as f64 / runs as f64;
        let m_half = n_half as f64 / runs as f64;
        assert!((m_iso - expected).abs() < 4.0 * se, "{m_iso} vs {expected}");
        assert!((m_half - expected / 2.0).abs() < 4.0 * se, "{m_half} vs {}", expected / 2.0);
        let mut rng = realization_rng(33, 0);
        assert!(spatial_poisson_sample(&room, 1.0, &iso, 1e-6, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn dump_roundtrip_keeps_blank_lattice_fields() {
        let s = Scenario::table(1.0, 1.0);
        for kind in [ModelKind::MirrorSource, ModelKind::Poisson] {
            let r = generate_realization(kind, &s, 5, 0).unwrap();
            let mut buf = Vec::new();
            write_realization(&r, &mut buf).unwrap();
            let text = String::from_utf8(buf.clone()).unwrap();
            if kind == ModelKind::Poisson {
                assert!(text.lines().nth(1).unwrap().starts_with(",,,"));
            }
            let back = read_realization(&buf[..]).unwrap();
            assert_eq!(back.len(), r.paths.len());
            for (a, b) in back.iter().zip(&r.paths) {
                assert_eq!(a.index, b.index);
                assert_eq!(a.delay, b.delay);
                assert_eq!(a.gain, b.gain);
            }
        }
        assert!(read_realization("nonsense\n".as_bytes()).is_err());
    }
}
