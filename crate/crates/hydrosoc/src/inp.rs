//! Reader and writer for the supported subset of the EPANET INP format.
//!
//! Units are fixed to litres per second, metres and millimetres and must be
//! declared with `UNITS LPS` in `[OPTIONS]`. Headloss must be Hazen-Williams.
//! Pumps take a single design point, written `HEAD <m> FLOW <L/s>`.

use std::fmt::Write as _;

use hydrosoc_core::network::{
    LinkKind, LinkStatus, Network, NetworkBuilder, NetworkError, NodeKind, Tank, Times,
};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InpError {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("reference to undeclared id `{0}`")]
    DanglingReference(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("missing required section [{0}]")]
    MissingSection(String),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
}

impl From<NetworkError> for InpError {
    fn from(e: NetworkError) -> Self {
        match e {
            NetworkError::DuplicateId(id) => InpError::DuplicateId(id),
            NetworkError::DanglingReference(id) => InpError::DanglingReference(id),
            NetworkError::InvariantViolation(m) => InpError::InvariantViolation(m),
        }
    }
}

/// Something the parser skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseWarning {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Junctions,
    Reservoirs,
    Tanks,
    Pipes,
    Pumps,
    Patterns,
    Times,
    Options,
    Coordinates,
    Skipped,
}

impl Section {
    fn from_header(name: &str) -> Option<Section> {
        Some(match name.to_ascii_uppercase().as_str() {
            "JUNCTIONS" => Section::Junctions,
            "RESERVOIRS" => Section::Reservoirs,
            "TANKS" => Section::Tanks,
            "PIPES" => Section::Pipes,
            "PUMPS" => Section::Pumps,
            "PATTERNS" => Section::Patterns,
            "TIMES" => Section::Times,
            "OPTIONS" => Section::Options,
            "COORDINATES" => Section::Coordinates,
            "TITLE" => Section::Skipped,
            _ => return None,
        })
    }
}

// EPANET keywords that carry no meaning for this engine.
const IGNORED_TIMES: &[&str] = &[
    "REPORT TIMESTEP",
    "REPORT START",
    "START CLOCKTIME",
    "STATISTIC",
    "PATTERN START",
    "RULE TIMESTEP",
];
const IGNORED_OPTIONS: &[&str] = &[
    "TRIALS",
    "ACCURACY",
    "UNBALANCED",
    "SPECIFIC GRAVITY",
    "VISCOSITY",
    "QUALITY",
    "DIFFUSIVITY",
    "TOLERANCE",
    "MAP",
    "CHECKFREQ",
    "MAXCHECK",
    "DAMPLIMIT",
    "HYDRAULICS",
];

struct Line<'a> {
    number: usize,
    tokens: Vec<&'a str>,
}

impl Line<'_> {
    fn err(&self, reason: impl Into<String>) -> InpError {
        InpError::MalformedLine {
            line: self.number,
            reason: reason.into(),
        }
    }

    fn num(&self, i: usize, what: &str) -> Result<f64, InpError> {
        let tok = self
            .tokens
            .get(i)
            .ok_or_else(|| self.err(format!("missing {what}")))?;
        let v: f64 = tok
            .parse()
            .map_err(|_| self.err(format!("{what} `{tok}` is not a number")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.err(format!("{what} must be finite")))
        }
    }

    fn arity(&self, min: usize, max: usize) -> Result<(), InpError> {
        let n = self.tokens.len();
        if n < min {
            Err(self.err(format!("expected at least {min} fields, found {n}")))
        } else if n > max {
            Err(self.err(format!("unexpected token `{}`", self.tokens[max])))
        } else {
            Ok(())
        }
    }
}

/// Parses a network; skipped sections are logged.
pub fn parse_network(text: &str) -> Result<Network, InpError> {
    let (net, warnings) = parse_network_with_warnings(text)?;
    for w in warnings {
        log::warn!("line {}: {}", w.line, w.message);
    }
    Ok(net)
}

pub fn parse_network_with_warnings(text: &str) -> Result<(Network, Vec<ParseWarning>), InpError> {
    let mut b = NetworkBuilder::new();
    let mut warnings = Vec::new();
    let mut section: Option<Section> = None;
    let mut seen = Vec::new();
    let mut default_pattern: Option<String> = None;
    // Node declarations are replayed at the end, once the default pattern
    // is known.
    let mut decls: Vec<NodeDecl> = Vec::new();
    let mut units = None;
    let mut times = Times::default();
    let mut quality_step_set = false;

    for (i, raw) in text.lines().enumerate() {
        let number = i + 1;
        let content = raw.split(';').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            let name = content
                .strip_prefix('[')
                .and_then(|s| s.strip_suffix(']'))
                .ok_or_else(|| InpError::MalformedLine {
                    line: number,
                    reason: "unterminated section header".into(),
                })?
                .trim();
            if name.eq_ignore_ascii_case("END") {
                break;
            }
            let s = Section::from_header(name).unwrap_or_else(|| {
                warnings.push(ParseWarning {
                    line: number,
                    message: format!(
                        "section [{}] is not supported and was skipped",
                        name.to_ascii_uppercase()
                    ),
                });
                Section::Skipped
            });
            seen.push(s);
            section = Some(s);
            continue;
        }
        let line = Line {
            number,
            tokens: content.split_whitespace().collect(),
        };
        let Some(s) = section else {
            return Err(line.err("data before the first section header"));
        };
        let id = line.tokens[0];
        match s {
            Section::Skipped => {}
            Section::Junctions => {
                line.arity(2, 4)?;
                let elev = line.num(1, "elevation")?;
                let demand = if line.tokens.len() > 2 {
                    line.num(2, "demand")?
                } else {
                    0.0
                };
                let pattern = line.tokens.get(3).map(|p| p.to_string());
                decls.push(NodeDecl::Junction(id.to_string(), elev, demand, pattern));
            }
            Section::Reservoirs => {
                line.arity(2, 2)?;
                decls.push(NodeDecl::Reservoir(id.to_string(), line.num(1, "head")?));
            }
            Section::Tanks => {
                line.arity(6, 7)?;
                if line.tokens.len() == 7 && line.num(6, "minimum volume")? != 0.0 {
                    return Err(line.err("minimum volume must be 0 (cylindrical tanks only)"));
                }
                decls.push(NodeDecl::Tank(
                    id.to_string(),
                    line.num(1, "elevation")?,
                    Tank {
                        initial_level: line.num(2, "initial level")?,
                        min_level: line.num(3, "minimum level")?,
                        max_level: line.num(4, "maximum level")?,
                        diameter: line.num(5, "diameter")?,
                    },
                ));
            }
            Section::Pipes => {
                line.arity(6, 8)?;
                if line.tokens.len() >= 7 && line.num(6, "minor loss")? != 0.0 {
                    return Err(line.err("minor losses are not supported"));
                }
                let status = match line.tokens.get(7).map(|s| s.to_ascii_uppercase()) {
                    None => LinkStatus::Open,
                    Some(s) if s == "OPEN" => LinkStatus::Open,
                    Some(s) if s == "CLOSED" => LinkStatus::Closed,
                    Some(s) => return Err(line.err(format!("unsupported pipe status `{s}`"))),
                };
                b.pipe_with_status(
                    id,
                    line.tokens[1],
                    line.tokens[2],
                    line.num(3, "length")?,
                    line.num(4, "diameter")?,
                    line.num(5, "roughness")?,
                    status,
                );
            }
            Section::Pumps => {
                line.arity(7, 7)?;
                let mut head = None;
                let mut flow = None;
                for k in [3, 5] {
                    let v = line.num(k + 1, "pump parameter")?;
                    match line.tokens[k].to_ascii_uppercase().as_str() {
                        "HEAD" if head.is_none() => head = Some(v),
                        "FLOW" if flow.is_none() => flow = Some(v),
                        other => return Err(line.err(format!("unexpected pump keyword `{other}`"))),
                    }
                }
                let (Some(h), Some(q)) = (head, flow) else {
                    return Err(line.err("pump needs HEAD and FLOW"));
                };
                b.pump(id, line.tokens[1], line.tokens[2], h, q);
            }
            Section::Patterns => {
                line.arity(2, usize::MAX)?;
                let mults = (1..line.tokens.len())
                    .map(|k| line.num(k, "multiplier"))
                    .collect::<Result<Vec<_>, _>>()?;
                b.pattern(id, &mults);
            }
            Section::Coordinates => {
                line.arity(3, 3)?;
                b.coordinates(id, line.num(1, "x")?, line.num(2, "y")?);
            }
            Section::Times => {
                let upper = content.to_ascii_uppercase();
                let (key, rest) = split_keyword(
                    &upper,
                    &[
                        "DURATION",
                        "HYDRAULIC TIMESTEP",
                        "QUALITY TIMESTEP",
                        "PATTERN TIMESTEP",
                    ],
                )
                .or_else(|| split_keyword(&upper, IGNORED_TIMES))
                .ok_or_else(|| line.err(format!("unknown time option `{}`", line.tokens[0])))?;
                if IGNORED_TIMES.contains(&key) {
                    warnings.push(ParseWarning {
                        line: number,
                        message: format!("time option {key} ignored"),
                    });
                    continue;
                }
                let secs = parse_duration(rest)
                    .ok_or_else(|| line.err(format!("bad time value `{rest}`")))?;
                match key {
                    "DURATION" => times.duration = secs,
                    "HYDRAULIC TIMESTEP" => times.hydraulic_step = secs,
                    "QUALITY TIMESTEP" => {
                        times.quality_step = secs;
                        quality_step_set = true;
                    }
                    _ => times.pattern_step = secs,
                }
            }
            Section::Options => {
                let upper = content.to_ascii_uppercase();
                let (key, rest) = split_keyword(
                    &upper,
                    &["UNITS", "HEADLOSS", "PATTERN", "DEMAND MULTIPLIER"],
                )
                .or_else(|| split_keyword(&upper, IGNORED_OPTIONS))
                .ok_or_else(|| line.err(format!("unknown option `{}`", line.tokens[0])))?;
                match key {
                    "UNITS" => {
                        if rest != "LPS" {
                            return Err(line.err(format!("units must be LPS, found `{rest}`")));
                        }
                        units = Some(number);
                    }
                    "HEADLOSS" => {
                        if rest != "H-W" {
                            return Err(line.err(format!("headloss must be H-W, found `{rest}`")));
                        }
                    }
                    "PATTERN" => {
                        // Keep the original case of the id.
                        default_pattern = line.tokens.get(1).map(|s| s.to_string());
                    }
                    "DEMAND MULTIPLIER" => {
                        if rest.parse::<f64>() != Ok(1.0) {
                            return Err(line.err("set the demand multiplier in the scenario file"));
                        }
                    }
                    _ => warnings.push(ParseWarning {
                        line: number,
                        message: format!("option {key} ignored"),
                    }),
                }
            }
        }
    }

    for required in [Section::Options, Section::Junctions] {
        if !seen.contains(&required) {
            let name = if required == Section::Options {
                "OPTIONS"
            } else {
                "JUNCTIONS"
            };
            return Err(InpError::MissingSection(name.into()));
        }
    }
    if units.is_none() {
        return Err(InpError::InvariantViolation(
            "[OPTIONS] must declare UNITS LPS".into(),
        ));
    }
    if !quality_step_set {
        times.quality_step = (times.hydraulic_step / 12).max(1);
    }
    for d in &decls {
        match d {
            NodeDecl::Junction(id, elev, demand, pattern) => {
                b.junction(
                    id,
                    *elev,
                    *demand,
                    pattern.as_deref().or(default_pattern.as_deref()),
                );
            }
            NodeDecl::Reservoir(id, head) => {
                b.reservoir(id, *head);
            }
            NodeDecl::Tank(id, elev, tank) => {
                b.tank(id, *elev, *tank);
            }
        }
    }
    let net = b.times(times).build()?;
    Ok((net, warnings))
}

enum NodeDecl {
    Junction(String, f64, f64, Option<String>),
    Reservoir(String, f64),
    Tank(String, f64, Tank),
}

fn split_keyword<'a>(line: &'a str, keys: &[&'static str]) -> Option<(&'static str, &'a str)> {
    for &k in keys {
        if let Some(rest) = line.strip_prefix(k) {
            if rest.is_empty() || rest.starts_with(char::is_whitespace) {
                return Some((k, rest.trim()));
            }
        }
    }
    None
}

/// `h:mm[:ss]`, or a number with an optional unit (default hours).
pub fn parse_duration(s: &str) -> Option<u64> {
    let toks: Vec<&str> = s.split_whitespace().collect();
    let secs = match toks.as_slice() {
        [v] if v.contains(':') => {
            let parts: Vec<u64> = v
                .split(':')
                .map(|p| p.parse().ok())
                .collect::<Option<_>>()?;
            match parts.as_slice() {
                [h, m] if *m < 60 => h * 3600 + m * 60,
                [h, m, sec] if *m < 60 && *sec < 60 => h * 3600 + m * 60 + sec,
                _ => return None,
            }
        }
        [v] => hours(v.parse().ok()?)?,
        [v, unit] => {
            let x: f64 = v.parse().ok()?;
            let scale = match *unit {
                "SEC" | "SECONDS" => 1.0,
                "MIN" | "MINUTES" => 60.0,
                "HOUR" | "HOURS" => 3600.0,
                "DAY" | "DAYS" => 86_400.0,
                _ => return None,
            };
            whole_seconds(x * scale)?
        }
        _ => return None,
    };
    Some(secs)
}

fn hours(h: f64) -> Option<u64> {
    whole_seconds(h * 3600.0)
}

fn whole_seconds(x: f64) -> Option<u64> {
    (x >= 0.0 && x.is_finite() && x.fract() == 0.0).then_some(x as u64)
}

fn clock(secs: u64) -> String {
    format!("{}:{:02}:{:02}", secs / 3600, secs % 3600 / 60, secs % 60)
}

/// Writes a network back out in the same subset. Numbers use Rust's
/// shortest round-trip formatting, so parsing the output reproduces the
/// network exactly.
pub fn serialize_network(net: &Network) -> String {
    let mut out = String::new();
    let nodes = net.nodes();
    let w = &mut out;

    writeln!(w, "[JUNCTIONS]\n;ID Elev Demand Pattern").unwrap();
    for n in nodes {
        if let NodeKind::Junction {
            base_demand,
            pattern,
        } = n.kind
        {
            write!(w, "{} {:?} {:?}", n.id, n.elevation, base_demand).unwrap();
            if let Some(p) = pattern {
                write!(w, " {}", net.patterns()[p].id).unwrap();
            }
            w.push('\n');
        }
    }
    writeln!(w, "\n[RESERVOIRS]\n;ID Head").unwrap();
    for n in nodes {
        if let NodeKind::Reservoir { head } = n.kind {
            writeln!(w, "{} {:?}", n.id, head).unwrap();
        }
    }
    writeln!(w, "\n[TANKS]\n;ID Elev InitLvl MinLvl MaxLvl Diam").unwrap();
    for n in nodes {
        if let NodeKind::Tank(t) = n.kind {
            writeln!(
                w,
                "{} {:?} {:?} {:?} {:?} {:?}",
                n.id, n.elevation, t.initial_level, t.min_level, t.max_level, t.diameter
            )
            .unwrap();
        }
    }
    writeln!(
        w,
        "\n[PIPES]\n;ID Node1 Node2 Length Diam Rough MinorLoss Status"
    )
    .unwrap();
    for l in net.links() {
        if let LinkKind::Pipe(p) = &l.kind {
            let status = match p.status {
                LinkStatus::Open => "Open",
                LinkStatus::Closed => "Closed",
            };
            writeln!(
                w,
                "{} {} {} {:?} {:?} {:?} 0 {}",
                l.id, nodes[l.from].id, nodes[l.to].id, p.length, p.diameter, p.roughness, status
            )
            .unwrap();
        }
    }
    writeln!(w, "\n[PUMPS]\n;ID Node1 Node2 Parameters").unwrap();
    for l in net.links() {
        if let LinkKind::Pump(p) = &l.kind {
            writeln!(
                w,
                "{} {} {} HEAD {:?} FLOW {:?}",
                l.id, nodes[l.from].id, nodes[l.to].id, p.design_head, p.design_flow
            )
            .unwrap();
        }
    }
    writeln!(w, "\n[PATTERNS]\n;ID Multipliers").unwrap();
    for p in net.patterns() {
        write!(w, "{}", p.id).unwrap();
        for m in &p.multipliers {
            write!(w, " {m:?}").unwrap();
        }
        w.push('\n');
    }
    let t = net.times();
    writeln!(w, "\n[TIMES]").unwrap();
    writeln!(w, "DURATION {}", clock(t.duration)).unwrap();
    writeln!(w, "HYDRAULIC TIMESTEP {}", clock(t.hydraulic_step)).unwrap();
    writeln!(w, "QUALITY TIMESTEP {}", clock(t.quality_step)).unwrap();
    writeln!(w, "PATTERN TIMESTEP {}", clock(t.pattern_step)).unwrap();
    writeln!(w, "\n[OPTIONS]\nUNITS LPS\nHEADLOSS H-W").unwrap();
    writeln!(w, "\n[COORDINATES]\n;Node X Y").unwrap();
    for n in nodes {
        if let Some((x, y)) = n.coordinates {
            writeln!(w, "{} {:?} {:?}", n.id, x, y).unwrap();
        }
    }
    writeln!(w, "\n[END]").unwrap();
    out
}
