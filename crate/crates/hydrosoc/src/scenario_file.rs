//! `key = value` scenario files.
//!
//! ```text
//! # 300 kg of arsenic at the west plant
//! contaminant = chemical
//! injection_node = WEST
//! injection_start = day 1 18:00
//! injection_end = day 2 00:00
//! load = 300 kg
//! demand_multiplier = 0.60
//! critical_dose = 5.0e-8 kg/kg
//! model_level = 3
//! ```
//!
//! Times are `day D HH:MM` (day 1 starts at t = 0) or a number of seconds.
//! Loads take `kg`, `organisms` or `doses`; critical doses take `kg/kg`
//! (per body weight) or `organisms` (fixed count).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use hydrosoc_core::behavior::{Activity, DoseModel, SuspensionTable};
use hydrosoc_core::scenario::{
    ClusterParams, ContaminantKind, LoadUnit, ScenarioError, WeightModel,
};
use hydrosoc_core::{ModelLevel, ScenarioConfig};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioFileError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error(transparent)]
    Invalid(#[from] ScenarioError),
}

impl ScenarioFileError {
    /// Offending key, when there is one.
    pub fn key(&self) -> Option<&str> {
        match self {
            ScenarioFileError::Syntax { .. } => None,
            ScenarioFileError::UnknownKey(k) => Some(k),
            ScenarioFileError::Invalid(e) => Some(e.key()),
        }
    }
}

const KEYS: &[&str] = &[
    "contaminant",
    "injection_node",
    "injection_start",
    "injection_end",
    "load",
    "doses_to_organisms",
    "demand_multiplier",
    "critical_dose",
    "weight",
    "model_level",
    "duration_days",
    "trials",
    "seed",
    "population",
    "cluster_size",
    "cluster_isolates",
    "cluster_sources",
    "cluster_intermediates",
    "cluster_ultimates",
    "cluster_direct_share",
    "suspension.washing_clothes",
    "suspension.shower",
    "suspension.faucet",
    "suspension.misc_indoor",
    "walking_speed",
    "work_hours",
    "reaction_latency",
    "informed_stop_drinking",
    "nonresidential_patterns",
];

struct Entries<'a> {
    map: BTreeMap<&'a str, &'a str>,
}

fn bad(key: &str, reason: impl Into<String>) -> ScenarioFileError {
    ScenarioError::out_of_range(key, reason).into()
}

impl<'a> Entries<'a> {
    fn required(&self, key: &str) -> Result<&'a str, ScenarioFileError> {
        self.map
            .get(key)
            .copied()
            .ok_or_else(|| ScenarioError::MissingKey(key.into()).into())
    }

    fn get(&self, key: &str) -> Option<&'a str> {
        self.map.get(key).copied()
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ScenarioFileError> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| bad(key, format!("cannot parse `{v}`")))
            })
            .transpose()
    }
}

fn number(key: &str, v: &str) -> Result<f64, ScenarioFileError> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| bad(key, format!("`{v}` is not a number")))
}

/// `day D HH:MM` or seconds.
fn time(key: &str, v: &str) -> Result<f64, ScenarioFileError> {
    let toks: Vec<&str> = v.split_whitespace().collect();
    match toks.as_slice() {
        ["day", d, hm] => {
            let day: u64 = d.parse().map_err(|_| bad(key, format!("bad day `{d}`")))?;
            let (h, m) = hm
                .split_once(':')
                .and_then(|(h, m)| Some((h.parse::<u64>().ok()?, m.parse::<u64>().ok()?)))
                .filter(|&(h, m)| h <= 24 && m < 60)
                .ok_or_else(|| bad(key, format!("bad clock time `{hm}`")))?;
            if day == 0 {
                return Err(bad(key, "days are counted from 1"));
            }
            Ok(((day - 1) * 86_400 + h * 3600 + m * 60) as f64)
        }
        [s] => number(key, s),
        [s, "s"] => number(key, s),
        _ => Err(bad(
            key,
            format!("`{v}` is neither `day D HH:MM` nor seconds"),
        )),
    }
}

fn amount<'v>(key: &str, v: &'v str) -> Result<(f64, &'v str), ScenarioFileError> {
    let (n, unit) = v
        .split_once(char::is_whitespace)
        .ok_or_else(|| bad(key, format!("`{v}` needs a unit")))?;
    Ok((number(key, n)?, unit.trim()))
}

fn boolean(key: &str, v: &str) -> Result<bool, ScenarioFileError> {
    match v {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        _ => Err(bad(key, format!("`{v}` is not a boolean"))),
    }
}

pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ScenarioFileError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ScenarioFileError::Syntax {
                line: i + 1,
                reason: "expected `key = value`".into(),
            })?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(ScenarioFileError::UnknownKey(k.into()));
        }
        if map.insert(k, v).is_some() {
            return Err(ScenarioFileError::Syntax {
                line: i + 1,
                reason: format!("`{k}` given twice"),
            });
        }
    }
    let e = Entries { map };

    let contaminant = match e.required("contaminant")? {
        "chemical" => ContaminantKind::Chemical,
        "pathogen" => ContaminantKind::Pathogen,
        other => {
            return Err(bad(
                "contaminant",
                format!("`{other}` is not chemical or pathogen"),
            ))
        }
    };
    let node = e.required("injection_node")?;
    let start = time("injection_start", e.required("injection_start")?)?;
    let end = time("injection_end", e.required("injection_end")?)?;
    let (load, unit) = amount("load", e.required("load")?)?;
    let load_unit = match unit {
        "kg" => LoadUnit::Kilograms,
        "organisms" => LoadUnit::Organisms,
        "doses" => LoadUnit::Doses,
        other => return Err(bad("load", format!("unknown unit `{other}`"))),
    };
    let multiplier = number("demand_multiplier", e.required("demand_multiplier")?)?;
    let (dose, dose_unit) = amount("critical_dose", e.required("critical_dose")?)?;
    let critical_dose = match dose_unit {
        "kg/kg" => DoseModel::PerBodyWeight(dose),
        "organisms" => DoseModel::FixedCount(dose),
        other => return Err(bad("critical_dose", format!("unknown unit `{other}`"))),
    };
    let level: u8 = e
        .parse("model_level")?
        .ok_or_else(|| ScenarioError::MissingKey("model_level".into()))?;
    let level = ModelLevel::new(level)?;

    let mut s = ScenarioConfig::new(
        contaminant,
        node,
        start,
        end,
        load,
        load_unit,
        multiplier,
        critical_dose,
        level,
    );
    if let Some(v) = e.get("doses_to_organisms") {
        s.doses_to_organisms = number("doses_to_organisms", v)?;
    }
    if let Some(v) = e.get("weight") {
        s.weight_model = match v {
            "sampled" => WeightModel::Sampled,
            _ => {
                let (w, u) = amount("weight", v)?;
                if u != "kg" {
                    return Err(bad("weight", "use `sampled` or `<n> kg`"));
                }
                WeightModel::Fixed(w)
            }
        };
    }
    if let Some(v) = e.get("duration_days") {
        s.duration_days = number("duration_days", v)?;
    }
    if let Some(v) = e.parse("trials")? {
        s.trials = v;
    }
    if let Some(v) = e.parse("seed")? {
        s.seed = v;
    }
    if let Some(v) = e.parse("population")? {
        s.total_population = v;
    }

    let mut c = ClusterParams::default();
    if let Some(v) = e.parse("cluster_size")? {
        c.size = v;
    }
    if let Some(v) = e.parse("cluster_isolates")? {
        c.isolates = v;
    }
    if let Some(v) = e.parse("cluster_sources")? {
        c.sources = v;
    }
    if let Some(v) = e.parse("cluster_intermediates")? {
        c.intermediates = v;
    }
    c.ultimates = match e.parse("cluster_ultimates")? {
        Some(v) => v,
        None => c
            .size
            .saturating_sub(c.isolates + c.sources + c.intermediates),
    };
    if let Some(v) = e.get("cluster_direct_share") {
        c.direct_share = number("cluster_direct_share", v)?;
    }
    s.cluster = c;

    let mut table = SuspensionTable::default();
    for a in Activity::ALL {
        let key = format!("suspension.{}", a.key());
        if let Some(v) = e.get(&key) {
            table.probabilities[a as usize] = number(&key, v)?;
        }
    }
    s.suspension = table;

    if let Some(v) = e.get("walking_speed") {
        s.walking_speed = number("walking_speed", v)?;
    }
    if let Some(v) = e.get("work_hours") {
        s.work_hours = number("work_hours", v)?;
    }
    if let Some(v) = e.parse("reaction_latency")? {
        s.reaction_latency = v;
    }
    if let Some(v) = e.get("informed_stop_drinking") {
        s.informed_stop_drinking = boolean("informed_stop_drinking", v)?;
    }
    if let Some(v) = e.get("nonresidential_patterns") {
        s.nonresidential_patterns = v
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(String::from)
            .collect();
    }
    s.validate()?;
    Ok(s)
}

fn format_time(t: f64) -> String {
    if t >= 0.0 && t.fract() == 0.0 && (t as u64).is_multiple_of(60) {
        let t = t as u64;
        let (day, rest) = (t / 86_400, t % 86_400);
        format!("day {} {:02}:{:02}", day + 1, rest / 3600, rest % 3600 / 60)
    } else {
        format!("{t:?} s")
    }
}

/// Writes every key, defaults included, so the file fully describes the run.
pub fn serialize_scenario(s: &ScenarioConfig) -> String {
    let mut o = String::new();
    let contaminant = match s.contaminant {
        ContaminantKind::Chemical => "chemical",
        ContaminantKind::Pathogen => "pathogen",
    };
    let unit = match s.load_unit {
        LoadUnit::Kilograms => "kg",
        LoadUnit::Organisms => "organisms",
        LoadUnit::Doses => "doses",
    };
    let dose = match s.critical_dose {
        DoseModel::PerBodyWeight(c) => format!("{c:?} kg/kg"),
        DoseModel::FixedCount(n) => format!("{n:?} organisms"),
    };
    let weight = match s.weight_model {
        WeightModel::Fixed(w) => format!("{w:?} kg"),
        WeightModel::Sampled => "sampled".into(),
    };
    let mut put = |k: &str, v: String| writeln!(o, "{k} = {v}").unwrap();
    put("contaminant", contaminant.into());
    put("injection_node", s.injection_node.clone());
    put("injection_start", format_time(s.injection_start));
    put("injection_end", format_time(s.injection_end));
    put("load", format!("{:?} {unit}", s.load));
    put("doses_to_organisms", format!("{:?}", s.doses_to_organisms));
    put("demand_multiplier", format!("{:?}", s.demand_multiplier));
    put("critical_dose", dose);
    put("weight", weight);
    put("model_level", s.model_level.to_string());
    put("duration_days", format!("{:?}", s.duration_days));
    put("trials", s.trials.to_string());
    put("seed", s.seed.to_string());
    put("population", s.total_population.to_string());
    put("cluster_size", s.cluster.size.to_string());
    put("cluster_isolates", s.cluster.isolates.to_string());
    put("cluster_sources", s.cluster.sources.to_string());
    put("cluster_intermediates", s.cluster.intermediates.to_string());
    put("cluster_ultimates", s.cluster.ultimates.to_string());
    put(
        "cluster_direct_share",
        format!("{:?}", s.cluster.direct_share),
    );
    for a in Activity::ALL {
        put(
            &format!("suspension.{}", a.key()),
            format!("{:?}", s.suspension.probability(a)),
        );
    }
    put("walking_speed", format!("{:?}", s.walking_speed));
    put("work_hours", format!("{:?}", s.work_hours));
    put("reaction_latency", s.reaction_latency.to_string());
    put(
        "informed_stop_drinking",
        s.informed_stop_drinking.to_string(),
    );
    put(
        "nonresidential_patterns",
        s.nonresidential_patterns.join(", "),
    );
    o
}
