//! Experiment configuration: flat `key = value` text, one pair per line,
//! `#` comments. Unknown keys are rejected by name so typos surface
//! immediately.

use crate::bowen::BowenParams;
use crate::driver::GOLDEN_ROTATION;
use crate::error::Error;
use crate::newhouse::ItineraryParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Bowen,
    Newhouse,
    Iid,
    Rotation,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::Bowen => "bowen",
            Scenario::Newhouse => "newhouse",
            Scenario::Iid => "iid",
            Scenario::Rotation => "rotation",
        }
    }

    fn parse(s: &str) -> Result<Self, Error> {
        match s {
            "bowen" => Ok(Scenario::Bowen),
            "newhouse" => Ok(Scenario::Newhouse),
            "iid" => Ok(Scenario::Iid),
            "rotation" => Ok(Scenario::Rotation),
            other => Err(Error::Config(format!(
                "unknown scenario '{other}' (expected bowen, newhouse, iid or rotation)"
            ))),
        }
    }
}

/// Full experiment configuration with scenario-appropriate defaults.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub epsilon: f64,
    pub seed: u64,
    /// Trapping depths evaluated; the first one is the primary reported
    /// in the CSV.
    pub nu_list: Vec<u32>,
    /// Neighborhood radii evaluated; the first one is the primary.
    pub delta_list: Vec<f64>,
    /// Schedule depth: cycles for the flow driver, segments for the
    /// symbolic one.
    pub j_max: usize,
    pub kappa_p: f64,
    pub kappa_phat: f64,
    /// Orbit start point.
    pub x0: f64,
    pub bowen: BowenParams,
    pub newhouse: ItineraryParams,
    /// Rotation number of the rotation control.
    pub gamma: f64,
    /// Step horizon per seed for the control scenarios.
    pub control_horizon: u128,
    /// Number of seeds for the control scenarios.
    pub control_seeds: u32,
}

impl ExperimentConfig {
    pub fn defaults(scenario: Scenario) -> Self {
        ExperimentConfig {
            scenario,
            epsilon: 0.1,
            seed: 42,
            nu_list: vec![5, 0],
            delta_list: vec![0.05, 0.15],
            j_max: match scenario {
                Scenario::Bowen => 25,
                Scenario::Newhouse => 10,
                _ => 0,
            },
            kappa_p: 1.0,
            kappa_phat: -1.0,
            x0: 0.5,
            bowen: BowenParams::default(),
            newhouse: ItineraryParams::default(),
            gamma: GOLDEN_ROTATION,
            control_horizon: 1_000_000,
            control_seeds: 100,
        }
    }

    /// Parse the flat text format. The `scenario` key is required and
    /// consulted first for defaults.
    pub fn parse(text: &str) -> Result<Self, Error> {
        let mut pairs: Vec<(String, String)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected 'key = value', got '{line}'",
                    lineno + 1
                )));
            };
            pairs.push((key.trim().to_string(), value.trim().to_string()));
        }
        let scenario_raw = pairs
            .iter()
            .find(|(k, _)| k == "scenario")
            .ok_or_else(|| Error::Config("missing required key 'scenario'".into()))?
            .1
            .clone();
        let mut cfg = ExperimentConfig::defaults(Scenario::parse(&scenario_raw)?);
        for (key, value) in &pairs {
            cfg.apply(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<(), Error> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, Error> {
            value.parse::<T>().map_err(|_| {
                Error::Config(format!("key '{key}': cannot parse '{value}'"))
            })
        }
        match key {
            "scenario" => {} // handled up front
            "epsilon" => self.epsilon = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "nu_list" => {
                self.nu_list = value
                    .split(',')
                    .map(|v| num::<u32>(key, v.trim()))
                    .collect::<Result<_, _>>()?
            }
            "delta_list" => {
                self.delta_list = value
                    .split(',')
                    .map(|v| num::<f64>(key, v.trim()))
                    .collect::<Result<_, _>>()?
            }
            "j_max" => self.j_max = num(key, value)?,
            "kappa_p" => self.kappa_p = num(key, value)?,
            "kappa_phat" => self.kappa_phat = num(key, value)?,
            "x0" => self.x0 = num(key, value)?,
            "alpha_plus" => self.bowen.alpha_plus = num(key, value)?,
            "alpha_minus" => self.bowen.alpha_minus = num(key, value)?,
            "beta_plus" => self.bowen.beta_plus = num(key, value)?,
            "beta_minus" => self.bowen.beta_minus = num(key, value)?,
            "box_half_width" => self.bowen.box_half_width = num(key, value)?,
            "tube_transit" => self.bowen.tube_transit = num(key, value)?,
            "tube_contraction" => self.bowen.tube_contraction = num(key, value)?,
            "initial_offset" => self.bowen.initial_offset = num(key, value)?,
            "z0" => self.newhouse.z0 = num(key, value)?,
            "n0" => self.newhouse.n0 = num(key, value)?,
            "k0" => self.newhouse.k0 = num(key, value)?,
            "gamma" => self.gamma = num(key, value)?,
            "control_horizon" => self.control_horizon = num(key, value)?,
            "control_seeds" => self.control_seeds = num(key, value)?,
            other => {
                return Err(Error::Config(format!("unknown config key '{other}'")));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.125) {
            return Err(Error::Config(format!(
                "key 'epsilon': must lie in (0, 1/8), got {}",
                self.epsilon
            )));
        }
        if self.nu_list.is_empty() || self.delta_list.is_empty() {
            return Err(Error::Config("nu_list and delta_list must be non-empty".into()));
        }
        if self.kappa_p == self.kappa_phat {
            return Err(Error::Config("kappa_p and kappa_phat must differ".into()));
        }
        if !(-1.0..=1.0).contains(&self.kappa_p) || !(-1.0..=1.0).contains(&self.kappa_phat) {
            return Err(Error::Config("kappa_p, kappa_phat must lie in [-1, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.x0) {
            return Err(Error::Config(format!("key 'x0': must lie in [0, 1), got {}", self.x0)));
        }
        match self.scenario {
            Scenario::Bowen => {
                self.bowen.validate().map_err(|e| Error::Config(e.to_string()))?;
                if self.j_max < 3 || self.j_max > crate::bowen::MAX_CYCLES {
                    return Err(Error::Config(format!(
                        "key 'j_max': flow scenario supports 3..={}, got {}",
                        crate::bowen::MAX_CYCLES,
                        self.j_max
                    )));
                }
                for &d in &self.delta_list {
                    if !(d > 0.0 && d <= self.bowen.box_half_width) {
                        return Err(Error::Config(format!(
                            "key 'delta_list': {d} outside (0, box_half_width]"
                        )));
                    }
                }
            }
            Scenario::Newhouse => {
                self.newhouse.validate().map_err(|e| Error::Config(e.to_string()))?;
                if self.j_max < 2 {
                    return Err(Error::Config(
                        "key 'j_max': symbolic scenario needs at least 2 segments".into(),
                    ));
                }
            }
            Scenario::Iid | Scenario::Rotation => {
                if self.control_horizon < 1000 {
                    return Err(Error::Config("key 'control_horizon': too small".into()));
                }
                if self.control_seeds == 0 {
                    return Err(Error::Config("key 'control_seeds': must be positive".into()));
                }
            }
        }
        Ok(())
    }

    /// Ordered key-value echo for report provenance; re-parsing the echo
    /// reproduces the configuration.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("scenario".into(), self.scenario.as_str().to_string()),
            ("epsilon".into(), self.epsilon.to_string()),
            ("seed".into(), self.seed.to_string()),
            (
                "nu_list".into(),
                self.nu_list.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
            ),
            (
                "delta_list".into(),
                self.delta_list.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
            ),
            ("kappa_p".into(), self.kappa_p.to_string()),
            ("kappa_phat".into(), self.kappa_phat.to_string()),
            ("x0".into(), self.x0.to_string()),
        ];
        match self.scenario {
            Scenario::Bowen => {
                out.push(("j_max".into(), self.j_max.to_string()));
                out.push(("alpha_plus".into(), self.bowen.alpha_plus.to_string()));
                out.push(("alpha_minus".into(), self.bowen.alpha_minus.to_string()));
                out.push(("beta_plus".into(), self.bowen.beta_plus.to_string()));
                out.push(("beta_minus".into(), self.bowen.beta_minus.to_string()));
                out.push(("box_half_width".into(), self.bowen.box_half_width.to_string()));
                out.push(("tube_transit".into(), self.bowen.tube_transit.to_string()));
                out.push(("tube_contraction".into(), self.bowen.tube_contraction.to_string()));
                out.push(("initial_offset".into(), self.bowen.initial_offset.to_string()));
            }
            Scenario::Newhouse => {
                out.push(("j_max".into(), self.j_max.to_string()));
                out.push(("z0".into(), self.newhouse.z0.to_string()));
                out.push(("n0".into(), self.newhouse.n0.to_string()));
                out.push(("k0".into(), self.newhouse.k0.to_string()));
            }
            Scenario::Rotation => {
                out.push(("gamma".into(), self.gamma.to_string()));
                out.push(("control_horizon".into(), self.control_horizon.to_string()));
                out.push(("control_seeds".into(), self.control_seeds.to_string()));
            }
            Scenario::Iid => {
                out.push(("control_horizon".into(), self.control_horizon.to_string()));
                out.push(("control_seeds".into(), self.control_seeds.to_string()));
            }
        }
        out
    }

    pub fn echo_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.echo() {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }
}
