//! Flat `key = value` configuration.
//!
//! One assignment per line, or several separated by commas. `#` starts a
//! comment. Omitted keys take the defaults of the reference scenario
//! (5 x 5 x 3 m room, isotropic antennas, 2 GHz Hamming pulse).

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Room;
use crate::pointprocess::{MarkFamily, ModelKind, PhaseModel, Scenario};
use crate::synthesis::Placement;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationConfig {
    pub lx: f64,
    pub ly: f64,
    pub lz: f64,
    pub wall_gain: f64,
    pub wavelength: f64,
    pub bandwidth: f64,
    pub speed_of_light: f64,
    pub tau_max: f64,
    pub gamma_sq: f64,
    pub omega_t: f64,
    pub omega_r: f64,
    pub model: ModelKind,
    /// Defaults to `omega_t omega_r 150 / tau_max`.
    pub rho0: Option<f64>,
    /// Defaults to `4 pi c^3 omega_t omega_r / V`.
    pub eta: Option<f64>,
    pub runs: usize,
    pub seed: u64,
    /// Defaults to `4 * bandwidth`.
    pub sample_rate: Option<f64>,
    /// Defaults to `2 / bandwidth`.
    pub pulse_duration: Option<f64>,
    pub pulse_normalize: bool,
    pub placement: Placement,
    pub min_separation: f64,
    pub max_placement_attempts: u32,
    pub phase: PhaseModel,
    pub mark_family: MarkFamily,
    pub batches: usize,
    pub window_ns: f64,
    pub dump_realizations: bool,
    pub dump_count: usize,
    pub output_dir: PathBuf,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            lx: 5.0,
            ly: 5.0,
            lz: 3.0,
            wall_gain: 0.6,
            wavelength: 0.03,
            bandwidth: 2e9,
            speed_of_light: 3e8,
            tau_max: 100e-9,
            gamma_sq: 0.4,
            omega_t: 1.0,
            omega_r: 1.0,
            model: ModelKind::Poisson,
            rho0: None,
            eta: None,
            runs: 10_000,
            seed: 1,
            sample_rate: None,
            pulse_duration: None,
            pulse_normalize: true,
            placement: Placement::Nearest,
            min_separation: 0.1,
            max_placement_attempts: 10_000,
            phase: PhaseModel::Carrier,
            mark_family: MarkFamily::CircularGaussian,
            batches: 20,
            window_ns: 5.0,
            dump_realizations: false,
            dump_count: 10,
            output_dir: PathBuf::from("out"),
        }
    }
}

pub const KEYS: &[&str] = &[
    "lx",
    "ly",
    "lz",
    "wall_gain",
    "wavelength",
    "carrier_frequency",
    "bandwidth",
    "speed_of_light",
    "tau_max",
    "gamma_sq",
    "omega_t",
    "omega_r",
    "model",
    "rho0",
    "eta",
    "runs",
    "seed",
    "sample_rate",
    "pulse_duration",
    "pulse_normalize",
    "placement",
    "sinc_half_width",
    "min_separation",
    "max_placement_attempts",
    "phase",
    "mark_family",
    "batches",
    "window_ns",
    "dump_realizations",
    "dump_count",
    "output_dir",
];

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse::<T>()
        .map_err(|e| Error::config(key, format!("cannot parse `{raw}`: {e}")))
}

fn flag(key: &str, raw: &str) -> Result<bool> {
    match raw {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(key, format!("expected true or false, got `{raw}`"))),
    }
}

/// Parses and validates configuration text.
pub fn parse_config(text: &str) -> Result<SimulationConfig> {
    let mut cfg = SimulationConfig::default();
    let mut seen = BTreeSet::new();
    let mut carrier_frequency = None;
    let mut sinc_half_width = None;
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("");
        for item in line.split(',') {
            let item = item.trim();
            if item.is_empty() {
                continue;
            }
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::config(item, "expected `key = value`"))?;
            let key = key.trim();
            let raw = raw.trim().trim_matches('"');
            if !KEYS.contains(&key) {
                return Err(Error::config(key, "unknown key"));
            }
            if !seen.insert(key.to_string()) {
                return Err(Error::config(key, "given more than once"));
            }
            match key {
                "lx" => cfg.lx = value(key, raw)?,
                "ly" => cfg.ly = value(key, raw)?,
                "lz" => cfg.lz = value(key, raw)?,
                "wall_gain" => cfg.wall_gain = value(key, raw)?,
                "wavelength" => cfg.wavelength = value(key, raw)?,
                "carrier_frequency" => carrier_frequency = Some(value::<f64>(key, raw)?),
                "bandwidth" => cfg.bandwidth = value(key, raw)?,
                "speed_of_light" => cfg.speed_of_light = value(key, raw)?,
                "tau_max" => cfg.tau_max = value(key, raw)?,
                "gamma_sq" => cfg.gamma_sq = value(key, raw)?,
                "omega_t" => cfg.omega_t = value(key, raw)?,
                "omega_r" => cfg.omega_r = value(key, raw)?,
                "model" => cfg.model = value(key, raw)?,
                "rho0" => cfg.rho0 = Some(value(key, raw)?),
                "eta" => cfg.eta = Some(value(key, raw)?),
                "runs" => cfg.runs = value(key, raw)?,
                "seed" => cfg.seed = value(key, raw)?,
                "sample_rate" => cfg.sample_rate = Some(value(key, raw)?),
                "pulse_duration" => cfg.pulse_duration = Some(value(key, raw)?),
                "pulse_normalize" => cfg.pulse_normalize = flag(key, raw)?,
                "placement" => cfg.placement = value(key, raw)?,
                "sinc_half_width" => sinc_half_width = Some(value::<usize>(key, raw)?),
                "min_separation" => cfg.min_separation = value(key, raw)?,
                "max_placement_attempts" => cfg.max_placement_attempts = value(key, raw)?,
                "phase" => cfg.phase = value(key, raw)?,
                "mark_family" => cfg.mark_family = value(key, raw)?,
                "batches" => cfg.batches = value(key, raw)?,
                "window_ns" => cfg.window_ns = value(key, raw)?,
                "dump_realizations" => cfg.dump_realizations = flag(key, raw)?,
                "dump_count" => cfg.dump_count = value(key, raw)?,
                "output_dir" => cfg.output_dir = PathBuf::from(raw),
                _ => unreachable!("key list and match arms agree"),
            }
        }
    }
    if let Some(f) = carrier_frequency {
        if seen.contains("wavelength") {
            return Err(Error::config("carrier_frequency", "give either wavelength or carrier_frequency"));
        }
        if !(f > 0.0) {
            return Err(Error::config("carrier_frequency", "must be positive"));
        }
        cfg.wavelength = cfg.speed_of_light / f;
    }
    if let Some(w) = sinc_half_width {
        match cfg.placement {
            Placement::Sinc { .. } => cfg.placement = Placement::Sinc { half_width: w },
            Placement::Nearest => return Err(Error::config("sinc_half_width", "only valid with placement = sinc")),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(key, format!("must be positive and finite, got {v}")))
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        for (k, v) in [
            ("lx", self.lx),
            ("ly", self.ly),
            ("lz", self.lz),
            ("wavelength", self.wavelength),
            ("bandwidth", self.bandwidth),
            ("speed_of_light", self.speed_of_light),
            ("tau_max", self.tau_max),
            ("window_ns", self.window_ns),
        ] {
            positive(k, v)?;
        }
        if !(self.wall_gain > 0.0 && self.wall_gain < 1.0) {
            return Err(Error::config("wall_gain", format!("must lie in (0, 1), got {}", self.wall_gain)));
        }
        if !(self.gamma_sq >= 0.0 && self.gamma_sq.is_finite()) {
            return Err(Error::config("gamma_sq", "must be nonnegative"));
        }
        for (k, v) in [("omega_t", self.omega_t), ("omega_r", self.omega_r)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::config(k, format!("must lie in (0, 1], got {v}")));
            }
        }
        if let Some(v) = self.rho0 {
            positive("rho0", v)?;
        }
        if let Some(v) = self.eta {
            positive("eta", v)?;
        }
        if self.runs < 1 {
            return Err(Error::config("runs", "must be at least 1"));
        }
        if self.batches < 1 {
            return Err(Error::config("batches", "must be at least 1"));
        }
        if let Some(d) = self.pulse_duration {
            positive("pulse_duration", d)?;
        }
        if self.sample_rate() < 4.0 * self.bandwidth * (1.0 - 1e-12) {
            return Err(Error::config(
                "sample_rate",
                format!("must be at least 4 * bandwidth = {:e} Hz", 4.0 * self.bandwidth),
            ));
        }
        if let Placement::Sinc { half_width } = self.placement {
            if half_width < 1 {
                return Err(Error::config("sinc_half_width", "must be at least 1"));
            }
        }
        let diagonal = (self.lx * self.lx + self.ly * self.ly + self.lz * self.lz).sqrt();
        if !(self.min_separation >= 0.0 && self.min_separation < diagonal) {
            return Err(Error::config(
                "min_separation",
                format!("must lie in [0, {diagonal:.3}) m, got {}", self.min_separation),
            ));
        }
        if self.max_placement_attempts < 1 {
            return Err(Error::config("max_placement_attempts", "must be at least 1"));
        }
        Ok(())
    }

    pub fn room(&self) -> Result<Room> {
        Room::new(self.lx, self.ly, self.lz)
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate.unwrap_or(4.0 * self.bandwidth)
    }

    pub fn pulse_duration(&self) -> f64 {
        self.pulse_duration.unwrap_or(2.0 / self.bandwidth)
    }

    pub fn rho0(&self) -> f64 {
        self.rho0.unwrap_or(self.omega_t * self.omega_r * 150.0 / self.tau_max)
    }

    pub fn eta(&self) -> f64 {
        self.eta.unwrap_or_else(|| {
            4.0 * PI * self.speed_of_light.powi(3) * self.omega_t * self.omega_r / (self.lx * self.ly * self.lz)
        })
    }

    pub fn scenario(&self) -> Result<Scenario> {
        Ok(Scenario {
            room: self.room()?,
            wall_gain: self.wall_gain,
            wavelength: self.wavelength,
            speed_of_light: self.speed_of_light,
            tau_max: self.tau_max,
            gamma_sq: self.gamma_sq,
            omega_t: self.omega_t,
            omega_r: self.omega_r,
            rho0: self.rho0(),
            eta: self.eta(),
            min_separation: self.min_separation,
            max_placement_attempts: self.max_placement_attempts,
            phase: self.phase,
            mark_family: self.mark_family,
        })
    }

    /// Configuration text that parses back to `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("lx", format!("{:?}", self.lx));
        put("ly", format!("{:?}", self.ly));
        put("lz", format!("{:?}", self.lz));
        put("wall_gain", format!("{:?}", self.wall_gain));
        put("wavelength", format!("{:?}", self.wavelength));
        put("bandwidth", format!("{:?}", self.bandwidth));
        put("speed_of_light", format!("{:?}", self.speed_of_light));
        put("tau_max", format!("{:?}", self.tau_max));
        put("gamma_sq", format!("{:?}", self.gamma_sq));
        put("omega_t", format!("{:?}", self.omega_t));
        put("omega_r", format!("{:?}", self.omega_r));
        put("model", self.model.to_string());
        if let Some(v) = self.rho0 {
            put("rho0", format!("{v:?}"));
        }
        if let Some(v) = self.eta {
            put("eta", format!("{v:?}"));
        }
        put("runs", self.runs.to_string());
        put("seed", self.seed.to_string());
        if let Some(v) = self.sample_rate {
            put("sample_rate", format!("{v:?}"));
        }
        if let Some(v) = self.pulse_duration {
            put("pulse_duration", format!("{v:?}"));
        }
        put("pulse_normalize", self.pulse_normalize.to_string());
        put("placement", self.placement.to_string());
        if let Placement::Sinc { half_width } = self.placement {
            put("sinc_half_width", half_width.to_string());
        }
        put("min_separation", format!("{:?}", self.min_separation));
        put("max_placement_attempts", self.max_placement_attempts.to_string());
        put("phase", self.phase.to_string());
        put("mark_family", self.mark_family.to_string());
        put("batches", self.batches.to_string());
        put("window_ns", format!("{:?}", self.window_ns));
        put("dump_realizations", self.dump_realizations.to_string());
        put("dump_count", self.dump_count.to_string());
        put("output_dir", self.output_dir.display().to_string());
        s
    }
}
