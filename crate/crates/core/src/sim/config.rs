use std::fmt;
use std::str::FromStr;

use crate::bell::{canonical_angles, Angle};
use crate::kv::KvFile;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Qm,
    Lhv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Switching {
    Static,
    /// Slots of `D_over_dL * K` ticks.
    Slow,
    /// Slots of `K` ticks.
    Fast,
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Qm => "qm",
            Engine::Lhv => "lhv",
        })
    }
}

impl FromStr for Engine {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "qm" => Ok(Engine::Qm),
            "lhv" => Ok(Engine::Lhv),
            _ => Err(format!("expected qm or lhv, got {s:?}")),
        }
    }
}

impl fmt::Display for Switching {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Switching::Static => "static",
            Switching::Slow => "slow",
            Switching::Fast => "fast",
        })
    }
}

impl FromStr for Switching {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "static" => Ok(Switching::Static),
            "slow" => Ok(Switching::Slow),
            "fast" => Ok(Switching::Fast),
            _ => Err(format!("expected static, slow or fast, got {s:?}")),
        }
    }
}

/// Everything that determines a simulated run.
///
/// Field names double as the keys of the flat config file. Settings are given
/// per station as the list the switch chooses from; when `phi0`/`psi0` are set
/// they are prepended as index 0 and the chain settings follow at 1..=N.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// `K`: ticks per `ΔL/c`.
    pub ticks_per_dl: u64,
    pub d_over_dl: u64,
    pub t_ret_left: u64,
    pub t_ret_right: u64,
    pub coherence_ticks: f64,
    /// Mean of the exponential emission interval, in ticks.
    pub mean_interval: f64,
    pub n_pairs: u64,
    pub engine: Engine,
    pub switching: Switching,
    pub phi: Vec<Angle>,
    pub psi: Vec<Angle>,
    pub phi0: Option<Angle>,
    pub psi0: Option<Angle>,
    pub visibility: f64,
    pub seed: u64,
    pub whitebox: bool,
    pub beamsplitters_left: bool,
    pub beamsplitters_right: bool,
    /// LHV model: built-in name or path.
    pub model: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let k = 8;
        let angles = canonical_angles(2).expect("N = 2 is valid");
        ExperimentConfig {
            ticks_per_dl: k,
            d_over_dl: 100,
            t_ret_left: k / 4,
            t_ret_right: k / 4,
            coherence_ticks: k as f64 / 100.0,
            mean_interval: 50.0 * k as f64,
            n_pairs: 100_000,
            engine: Engine::Qm,
            switching: Switching::Slow,
            phi: angles.phi,
            psi: angles.psi,
            phi0: None,
            psi0: None,
            visibility: 1.0,
            seed: 0,
            whitebox: false,
            beamsplitters_left: true,
            beamsplitters_right: true,
            model: "reference".into(),
        }
    }
}

const KEYS: &[&str] = &[
    "ticks_per_dL",
    "D_over_dL",
    "t_ret_left",
    "t_ret_right",
    "coherence_ticks",
    "mean_interval",
    "n_pairs",
    "engine",
    "switching",
    "phi",
    "psi",
    "phi0",
    "psi0",
    "visibility",
    "seed",
    "whitebox",
    "beamsplitters_left",
    "beamsplitters_right",
    "model",
];

fn parse_angle(s: &str) -> std::result::Result<Angle, String> {
    s.trim()
        .parse::<f64>()
        .map(Angle::new)
        .map_err(|_| format!("not a number: {s:?}"))
}

fn parse_angles(s: &str) -> std::result::Result<Vec<Angle>, String> {
    s.split(',').map(parse_angle).collect()
}

fn parse_optional_angle(s: &str) -> std::result::Result<Option<Angle>, String> {
    match s.trim() {
        "" | "none" => Ok(None),
        v => parse_angle(v).map(Some),
    }
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("expected true or false, got {s:?}")),
    }
}

/// Parses a count that may be written in exponent form, such as `2e7`.
pub fn parse_count(s: &str) -> std::result::Result<u64, String> {
    let s = s.trim();
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < 1.8e19 => Ok(v as u64),
        _ => Err(format!("expected a non-negative integer, got {s:?}")),
    }
}

fn render_angles(a: &[Angle]) -> String {
    a.iter()
        .map(|x| format!("{:?}", x.radians()))
        .collect::<Vec<_>>()
        .join(",")
}

impl ExperimentConfig {
    /// Applies `key = value` overrides, collecting every bad field.
    pub fn apply(&mut self, kv: &KvFile) -> Result<()> {
        let mut errors = Vec::new();
        for (key, value) in kv.iter() {
            if let Err(e) = self.set(key, value) {
                errors.push(format!("{key}: {e}"));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errors))
        }
    }

    /// Sets one field from its config-file key.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let float = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("not a number: {v:?}"));
        match key {
            "ticks_per_dL" => self.ticks_per_dl = parse_count(value)?,
            "D_over_dL" => self.d_over_dl = parse_count(value)?,
            "t_ret_left" => self.t_ret_left = parse_count(value)?,
            "t_ret_right" => self.t_ret_right = parse_count(value)?,
            "coherence_ticks" => self.coherence_ticks = float(value)?,
            "mean_interval" => self.mean_interval = float(value)?,
            "n_pairs" => self.n_pairs = parse_count(value)?,
            "engine" => self.engine = value.trim().parse()?,
            "switching" => self.switching = value.trim().parse()?,
            "phi" => self.phi = parse_angles(value)?,
            "psi" => self.psi = parse_angles(value)?,
            "phi0" => self.phi0 = parse_optional_angle(value)?,
            "psi0" => self.psi0 = parse_optional_angle(value)?,
            "visibility" => self.visibility = float(value)?,
            "seed" => self.seed = parse_count(value)?,
            "whitebox" => self.whitebox = parse_bool(value)?,
            "beamsplitters_left" => self.beamsplitters_left = parse_bool(value)?,
            "beamsplitters_right" => self.beamsplitters_right = parse_bool(value)?,
            "model" => self.model = value.trim().to_string(),
            _ => return Err(format!("unknown key; expected one of {}", KEYS.join(", "))),
        }
        Ok(())
    }

    pub fn from_kv(kv: &KvFile) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        c.apply(kv)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_kv(&self) -> KvFile {
        let mut kv = KvFile::new();
        kv.set("ticks_per_dL", self.ticks_per_dl);
        kv.set("D_over_dL", self.d_over_dl);
        kv.set("t_ret_left", self.t_ret_left);
        kv.set("t_ret_right", self.t_ret_right);
        kv.set("coherence_ticks", format!("{:?}", self.coherence_ticks));
        kv.set("mean_interval", format!("{:?}", self.mean_interval));
        kv.set("n_pairs", self.n_pairs);
        kv.set("engine", self.engine);
        kv.set("switching", self.switching);
        kv.set("phi", render_angles(&self.phi));
        kv.set("psi", render_angles(&self.psi));
        let opt = |a: Option<Angle>| a.map_or("none".to_string(), |a| format!("{:?}", a.radians()));
        kv.set("phi0", opt(self.phi0));
        kv.set("psi0", opt(self.psi0));
        kv.set("visibility", format!("{:?}", self.visibility));
        kv.set("seed", self.seed);
        kv.set("whitebox", self.whitebox);
        kv.set("beamsplitters_left", self.beamsplitters_left);
        kv.set("beamsplitters_right", self.beamsplitters_right);
        kv.set("model", &self.model);
        kv
    }

    /// Checks the physical and structural invariants, naming every bad field.
    pub fn validate(&self) -> Result<()> {
        let mut e = Vec::new();
        let k = self.ticks_per_dl;
        if k == 0 {
            e.push("ticks_per_dL: must be positive".to_string());
        }
        if self.coherence_ticks.is_nan() || self.coherence_ticks < 0.0 || (k as f64) < 10.0 * self.coherence_ticks {
            e.push(format!(
                "coherence_ticks: need ticks_per_dL >= 10 * coherence_ticks, got K = {k}, T_coh = {}",
                self.coherence_ticks
            ));
        }
        if self.d_over_dl < 10 {
            e.push(format!("D_over_dL: must be at least 10, got {}", self.d_over_dl));
        }
        if self.mean_interval <= 0.0 || !self.mean_interval.is_finite() {
            e.push(format!("mean_interval: must be positive, got {}", self.mean_interval));
        }
        if self.n_pairs == 0 || self.n_pairs > u64::from(u32::MAX) {
            e.push(format!("n_pairs: must be in 1..=4294967295, got {}", self.n_pairs));
        }
        if self.phi.is_empty() || self.phi.len() > 255 {
            e.push("phi: need between 1 and 255 angles".to_string());
        }
        if self.psi.is_empty() || self.psi.len() > 255 {
            e.push("psi: need between 1 and 255 angles".to_string());
        }
        if self.phi0.is_some() != self.psi0.is_some() {
            e.push("phi0/psi0: set both or neither".to_string());
        }
        if !(0.0..=1.0).contains(&self.visibility) {
            e.push(format!("visibility: must be in [0, 1], got {}", self.visibility));
        }
        if self.model.is_empty() {
            e.push("model: must name a built-in model or a file".to_string());
        }
        if e.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(e))
        }
    }

    /// Transit time from source to either detector along the short path.
    pub fn transit(&self) -> u64 {
        self.d_over_dl * self.ticks_per_dl
    }

    pub fn slot_len(&self) -> u64 {
        match self.switching {
            Switching::Static => u64::MAX,
            Switching::Slow => self.d_over_dl * self.ticks_per_dl,
            Switching::Fast => self.ticks_per_dl,
        }
    }

    /// Angle lists the two switches draw from, reference settings first.
    pub fn station_lists(&self) -> (Vec<Angle>, Vec<Angle>) {
        let prepend = |a0: Option<Angle>, list: &[Angle]| {
            let mut v: Vec<Angle> = a0.into_iter().collect();
            v.extend_from_slice(list);
            v
        };
        (prepend(self.phi0, &self.phi), prepend(self.psi0, &self.psi))
    }

    /// Offset of chain setting 0 in the station lists.
    pub fn chain_offset(&self) -> usize {
        usize::from(self.phi0.is_some())
    }

    pub fn t_ret(&self, left: bool) -> u64 {
        if left {
            self.t_ret_left
        } else {
            self.t_ret_right
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_tick_unit() {
        let c = ExperimentConfig::default();
        assert_eq!(c.ticks_per_dl, 8);
        assert_eq!(c.t_ret_left, 2);
        assert_eq!(c.transit(), 800);
        assert_eq!(c.mean_interval, 400.0);
        c.validate().unwrap();
    }

    #[test]
    fn kv_round_trip_is_exact() {
        let c = ExperimentConfig {
            phi0: Some(Angle::ZERO),
            psi0: Some(Angle::ZERO),
            engine: Engine::Lhv,
            switching: Switching::Fast,
            visibility: 0.93,
            ..Default::default()
        };
        let text = c.to_kv().render();
        let back = ExperimentConfig::from_kv(&KvFile::parse(&text, "mem").unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.station_lists().0.len(), 3);
    }

    #[test]
    fn invalid_fields_are_all_named() {
        let kv = KvFile::parse("D_over_dL = 3\ncoherence_ticks = 5\nvisibility = 2\n", "mem").unwrap();
        let err = ExperimentConfig::from_kv(&kv).unwrap_err();
        let Error::Config(list) = err else { panic!() };
        let joined = list.join("\n");
        for field in ["D_over_dL", "coherence_ticks", "visibility"] {
            assert!(joined.contains(field), "{joined}");
        }
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        let kv = KvFile::parse("colour = blue\nengine = classical\n", "mem").unwrap();
        let Error::Config(list) = ExperimentConfig::from_kv(&kv).unwrap_err() else {
            panic!()
        };
        assert_eq!(list.len(), 2);
    }

    #[test]
    fn counts_accept_exponent_form() {
        assert_eq!(parse_count("2e7"), Ok(20_000_000));
        assert!(parse_count("1.5").is_err());
    }
}
