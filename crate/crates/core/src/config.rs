//! Sectioned `key = value` experiment descriptions.
//!
//! ```text
//! # double rephasing, weak data pulse
//! [simulation]
//! sample_dt_us = 0.1
//! pulse_duration_us = 0.1
//!
//! [spatial]
//! mode = gaussian
//! n_groups = 41
//! coverage = 0.9955
//!
//! [pulse.D]
//! t_us = 0.1
//! area_pi = 0.2
//!
//! [pulse.R1]
//! t_us = 3.1
//! area_pi = 1
//!
//! [sweep]
//! parameter = R.area
//! from_pi = 0.25
//! to_pi = 2
//! step_pi = 0.25
//! ```
//!
//! Recognised sections are `[simulation]`, `[spectral]`, `[spatial]`,
//! `[pulse.NAME]` and `[sweep]`. `#` starts a comment. Parsing never stops
//! at the first problem; every malformed line produces one [`ConfigError`].

use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::grid::ProfileMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConfigErrorKind {
    UnknownSection,
    UnknownKey,
    DuplicateKey,
    BadNumber,
    ConstraintViolation,
    /// A line that is neither a section header nor `key = value`.
    Syntax,
}

impl fmt::Display for ConfigErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConfigErrorKind::UnknownSection => "unknown-section",
            ConfigErrorKind::UnknownKey => "unknown-key",
            ConfigErrorKind::DuplicateKey => "duplicate-key",
            ConfigErrorKind::BadNumber => "bad-number",
            ConfigErrorKind::ConstraintViolation => "constraint-violation",
            ConfigErrorKind::Syntax => "syntax",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub kind: ConfigErrorKind,
    pub message: String,
}

impl ConfigError {
    fn new(line: usize, kind: ConfigErrorKind, message: impl Into<String>) -> Self {
        ConfigError {
            line: line.max(1),
            kind,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}: {}", self.line, self.kind, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSettings {
    pub sample_dt_us: f64,
    pub pulse_duration_us: f64,
    pub gamma2_per_us: f64,
    /// Simulated span; derived from the echo times when absent.
    pub duration_us: Option<f64>,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        SimulationSettings {
            sample_dt_us: 0.1,
            pulse_duration_us: 0.1,
            gamma2_per_us: 0.0,
            duration_us: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSettings {
    pub n_groups: usize,
    pub spacing_khz: f64,
    pub fwhm_mhz: f64,
}

impl Default for SpectralSettings {
    fn default() -> Self {
        SpectralSettings {
            n_groups: 281,
            spacing_khz: 10.0,
            fwhm_mhz: 1.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialSettings {
    pub mode: ProfileMode,
    pub n_groups: usize,
    pub coverage: f64,
}

impl Default for SpatialSettings {
    fn default() -> Self {
        SpatialSettings {
            mode: ProfileMode::Gaussian,
            n_groups: 41,
            coverage: 0.9955,
        }
    }
}

/// Whether a pulse's Rabi frequency follows the spatial profile `G_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PulseProfile {
    Gaussian,
    Uniform,
}

impl PulseProfile {
    pub fn as_str(&self) -> &'static str {
        match self {
            PulseProfile::Gaussian => "gaussian",
            PulseProfile::Uniform => "uniform",
        }
    }
}

impl FromStr for PulseProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gaussian" => Ok(PulseProfile::Gaussian),
            "uniform" => Ok(PulseProfile::Uniform),
            other => Err(format!("unknown pulse profile `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseStrength {
    /// Pulse area in units of π (peak area for profiled pulses).
    AreaPi(f64),
    /// Peak Rabi frequency in MHz, without the 2π factor.
    RabiMhz(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseSpec {
    pub name: String,
    pub t_us: f64,
    pub strength: PulseStrength,
    pub profile: PulseProfile,
    pub phase_pi: f64,
}

impl PulseSpec {
    /// Peak pulse area in radians.
    pub fn area(&self, duration_us: f64) -> f64 {
        match self.strength {
            PulseStrength::AreaPi(a) => a * PI,
            PulseStrength::RabiMhz(mhz) => 2.0 * PI * mhz * duration_us,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub parameter: String,
    pub from_pi: f64,
    pub to_pi: f64,
    pub step_pi: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentSpec {
    pub simulation: SimulationSettings,
    pub spectral: SpectralSettings,
    pub spatial: SpatialSettings,
    pub pulses: Vec<PulseSpec>,
    pub sweep: Option<SweepSpec>,
}

impl ExperimentSpec {
    /// Indices of the pulses addressed by a sweep parameter `NAME.area`.
    ///
    /// An exact pulse name wins; otherwise `NAME` selects every pulse named
    /// `NAME` followed by digits, so `R.area` covers `R1` and `R2`.
    pub fn swept_pulses(&self, parameter: &str) -> Option<Vec<usize>> {
        let base = parameter.strip_suffix(".area")?;
        if base.is_empty() {
            return None;
        }
        if let Some(i) = self.pulses.iter().position(|p| p.name == base) {
            return Some(vec![i]);
        }
        let hits: Vec<usize> = self
            .pulses
            .iter()
            .enumerate()
            .filter(|(_, p)| {
                p.name.strip_prefix(base).is_some_and(|rest| {
                    !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit())
                })
            })
            .map(|(i, _)| i)
            .collect();
        (!hits.is_empty()).then_some(hits)
    }

    /// Copy of the spec with the selected pulses set to `area_pi`.
    pub fn with_pulse_area(&self, indices: &[usize], area_pi: f64) -> ExperimentSpec {
        let mut out = self.clone();
        for &i in indices {
            out.pulses[i].strength = PulseStrength::AreaPi(area_pi);
        }
        out
    }

    /// Canonical text form; parsing it yields an identical spec.
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        let sim = &self.simulation;
        s.push_str("[simulation]\n");
        s.push_str(&format!("sample_dt_us = {}\n", sim.sample_dt_us));
        s.push_str(&format!("pulse_duration_us = {}\n", sim.pulse_duration_us));
        s.push_str(&format!("gamma2_per_us = {}\n", sim.gamma2_per_us));
        if let Some(d) = sim.duration_us {
            s.push_str(&format!("duration_us = {d}\n"));
        }
        s.push_str("\n[spectral]\n");
        s.push_str(&format!("n_groups = {}\n", self.spectral.n_groups));
        s.push_str(&format!("spacing_khz = {}\n", self.spectral.spacing_khz));
        s.push_str(&format!("fwhm_mhz = {}\n", self.spectral.fwhm_mhz));
        s.push_str("\n[spatial]\n");
        s.push_str(&format!("mode = {}\n", self.spatial.mode));
        s.push_str(&format!("n_groups = {}\n", self.spatial.n_groups));
        s.push_str(&format!("coverage = {}\n", self.spatial.coverage));
        for p in &self.pulses {
            s.push_str(&format!("\n[pulse.{}]\n", p.name));
            s.push_str(&format!("t_us = {}\n", p.t_us));
            match p.strength {
                PulseStrength::AreaPi(a) => s.push_str(&format!("area_pi = {a}\n")),
                PulseStrength::RabiMhz(m) => s.push_str(&format!("rabi_mhz = {m}\n")),
            }
            s.push_str(&format!("profile = {}\n", p.profile.as_str()));
            s.push_str(&format!("phase_pi = {}\n", p.phase_pi));
        }
        if let Some(sw) = &self.sweep {
            s.push_str("\n[sweep]\n");
            s.push_str(&format!("parameter = {}\n", sw.parameter));
            s.push_str(&format!("from_pi = {}\n", sw.from_pi));
            s.push_str(&format!("to_pi = {}\n", sw.to_pi));
            s.push_str(&format!("step_pi = {}\n", sw.step_pi));
        }
        s
    }
}

/// Where each construct was declared, for error reporting.
#[derive(Debug, Default)]
struct SourceMap {
    sections: HashMap<String, usize>,
    keys: HashMap<(String, String), usize>,
}

impl SourceMap {
    fn line(&self, section: &str, key: Option<&str>) -> usize {
        key.and_then(|k| self.keys.get(&(section.to_string(), k.to_string())))
            .or_else(|| self.sections.get(section))
            .copied()
            .unwrap_or(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Section {
    Simulation,
    Spectral,
    Spatial,
    Pulse(usize),
    Sweep,
    Ignored,
}

#[derive(Debug, Default)]
struct PulseDraft {
    name: String,
    line: usize,
    t_us: Option<f64>,
    area_pi: Option<f64>,
    rabi_mhz: Option<f64>,
    profile: Option<PulseProfile>,
    phase_pi: Option<f64>,
}

#[derive(Debug, Default)]
struct SweepDraft {
    line: usize,
    parameter: Option<String>,
    from_pi: Option<f64>,
    to_pi: Option<f64>,
    step_pi: Option<f64>,
}

fn is_decimal(s: &str) -> bool {
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let int_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    let mut digits = i - int_start;
    if i < b.len() && b[i] == b'.' {
        i += 1;
        let frac_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        digits += i - frac_start;
    }
    if digits == 0 {
        return false;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        i += 1;
        if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
            i += 1;
        }
        let exp_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        if i == exp_start {
            return false;
        }
    }
    i == b.len()
}

fn parse_real(value: &str) -> Result<f64, String> {
    if !is_decimal(value) {
        return Err(format!("`{value}` is not a decimal number"));
    }
    value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("`{value}` is out of range"))
}

fn parse_count(value: &str) -> Result<usize, String> {
    if value.is_empty() || !value.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("`{value}` is not a non-negative integer"));
    }
    value
        .parse::<usize>()
        .map_err(|_| format!("`{value}` is out of range"))
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

fn valid_key(key: &str) -> bool {
    !key.is_empty()
        && key
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

struct Parser {
    spec: ExperimentSpec,
    pulses: Vec<PulseDraft>,
    sweep: Option<SweepDraft>,
    map: SourceMap,
    errors: Vec<ConfigError>,
    seen: HashSet<(Section, String)>,
}

impl Parser {
    fn error(&mut self, line: usize, kind: ConfigErrorKind, msg: impl Into<String>) {
        self.errors.push(ConfigError::new(line, kind, msg));
    }

    fn section_label(&self, section: Section) -> String {
        match section {
            Section::Simulation => "simulation".into(),
            Section::Spectral => "spectral".into(),
            Section::Spatial => "spatial".into(),
            Section::Sweep => "sweep".into(),
            Section::Pulse(i) => format!("pulse.{}", self.pulses[i].name),
            Section::Ignored => String::new(),
        }
    }

    fn open_section(&mut self, name: &str, line: usize) -> Section {
        if self.map.sections.contains_key(name) {
            self.error(
                line,
                ConfigErrorKind::DuplicateKey,
                format!("section [{name}] is declared more than once"),
            );
            return Section::Ignored;
        }
        let section = match name {
            "simulation" => Section::Simulation,
            "spectral" => Section::Spectral,
            "spatial" => Section::Spatial,
            "sweep" => {
                self.sweep = Some(SweepDraft {
                    line,
                    ..Default::default()
                });
                Section::Sweep
            }
            _ => match name.strip_prefix("pulse.") {
                Some(pulse) if valid_name(pulse) => {
                    self.pulses.push(PulseDraft {
                        name: pulse.to_string(),
                        line,
                        ..Default::default()
                    });
                    Section::Pulse(self.pulses.len() - 1)
                }
                _ => {
                    self.error(
                        line,
                        ConfigErrorKind::UnknownSection,
                        format!("unknown section [{name}]"),
                    );
                    return Section::Ignored;
                }
            },
        };
        self.map.sections.insert(name.to_string(), line);
        section
    }

    fn set_key(&mut self, section: Section, key: &str, value: &str, line: usize) {
        use ConfigErrorKind::*;

        if !self.seen.insert((section, key.to_string())) {
            let label = self.section_label(section);
            self.error(
                line,
                DuplicateKey,
                format!("key `{key}` repeated in [{label}]"),
            );
            return;
        }
        let label = self.section_label(section);
        self.map.keys.insert((label.clone(), key.to_string()), line);

        let real = |p: &mut Parser| match parse_real(value) {
            Ok(v) => Some(v),
            Err(msg) => {
                p.error(line, BadNumber, format!("{key}: {msg}"));
                None
            }
        };
        let count = |p: &mut Parser| match parse_count(value) {
            Ok(v) => Some(v),
            Err(msg) => {
                p.error(line, BadNumber, format!("{key}: {msg}"));
                None
            }
        };

        match (section, key) {
            (Section::Simulation, "sample_dt_us") => {
                if let Some(v) = real(self) {
                    self.spec.simulation.sample_dt_us = v;
                }
            }
            (Section::Simulation, "pulse_duration_us") => {
                if let Some(v) = real(self) {
                    self.spec.simulation.pulse_duration_us = v;
                }
            }
            (Section::Simulation, "gamma2_per_us") => {
                if let Some(v) = real(self) {
                    self.spec.simulation.gamma2_per_us = v;
                }
            }
            (Section::Simulation, "duration_us") => {
                if let Some(v) = real(self) {
                    self.spec.simulation.duration_us = Some(v);
                }
            }
            (Section::Spectral, "n_groups") => {
                if let Some(v) = count(self) {
                    self.spec.spectral.n_groups = v;
                }
            }
            (Section::Spectral, "spacing_khz") => {
                if let Some(v) = real(self) {
                    self.spec.spectral.spacing_khz = v;
                }
            }
            (Section::Spectral, "fwhm_mhz") => {
                if let Some(v) = real(self) {
                    self.spec.spectral.fwhm_mhz = v;
                }
            }
            (Section::Spatial, "mode") => match value.parse::<ProfileMode>() {
                Ok(m) => self.spec.spatial.mode = m,
                Err(_) => self.error(
                    line,
                    ConstraintViolation,
                    format!("mode: `{value}` is not one of gaussian, uniform, linear"),
                ),
            },
            (Section::Spatial, "n_groups") => {
                if let Some(v) = count(self) {
                    self.spec.spatial.n_groups = v;
                }
            }
            (Section::Spatial, "coverage") => {
                if let Some(v) = real(self) {
                    self.spec.spatial.coverage = v;
                }
            }
            (Section::Pulse(i), "t_us") => self.pulses[i].t_us = real(self),
            (Section::Pulse(i), "area_pi") => self.pulses[i].area_pi = real(self),
            (Section::Pulse(i), "rabi_mhz") => self.pulses[i].rabi_mhz = real(self),
            (Section::Pulse(i), "phase_pi") => self.pulses[i].phase_pi = real(self),
            (Section::Pulse(i), "profile") => match value.parse::<PulseProfile>() {
                Ok(p) => self.pulses[i].profile = Some(p),
                Err(msg) => self.error(line, ConstraintViolation, format!("profile: {msg}")),
            },
            (Section::Sweep, "parameter") => {
                if value.is_empty() {
                    self.error(line, ConstraintViolation, "parameter: empty value");
                } else if let Some(sw) = self.sweep.as_mut() {
                    sw.parameter = Some(value.to_string());
                }
            }
            (Section::Sweep, "from_pi" | "to_pi" | "step_pi") => {
                let v = real(self);
                if let Some(sw) = self.sweep.as_mut() {
                    match key {
                        "from_pi" => sw.from_pi = v,
                        "to_pi" => sw.to_pi = v,
                        _ => sw.step_pi = v,
                    }
                }
            }
            _ => self.error(
                line,
                UnknownKey,
                format!("unknown key `{key}` in [{label}]"),
            ),
        }
    }

    fn finish(mut self) -> (ExperimentSpec, Vec<ConfigError>, SourceMap) {
        use ConfigErrorKind::*;

        let drafts = std::mem::take(&mut self.pulses);
        for d in drafts {
            let t_us = match d.t_us {
                Some(t) => t,
                None => {
                    if !self
                        .map
                        .keys
                        .contains_key(&(format!("pulse.{}", d.name), "t_us".into()))
                    {
                        self.error(
                            d.line,
                            ConstraintViolation,
                            format!("pulse {} has no t_us", d.name),
                        );
                    }
                    continue;
                }
            };
            let strength = match (d.area_pi, d.rabi_mhz) {
                (Some(a), None) => PulseStrength::AreaPi(a),
                (None, Some(m)) => PulseStrength::RabiMhz(m),
                (Some(_), Some(_)) => {
                    self.error(
                        d.line,
                        ConstraintViolation,
                        format!("pulse {} sets both area_pi and rabi_mhz", d.name),
                    );
                    continue;
                }
                (None, None) => {
                    let label = format!("pulse.{}", d.name);
                    let had_bad_value = ["area_pi", "rabi_mhz"]
                        .iter()
                        .any(|k| self.map.keys.contains_key(&(label.clone(), k.to_string())));
                    if !had_bad_value {
                        self.error(
                            d.line,
                            ConstraintViolation,
                            format!("pulse {} needs one of area_pi or rabi_mhz", d.name),
                        );
                    }
                    continue;
                }
            };
            self.spec.pulses.push(PulseSpec {
                name: d.name,
                t_us,
                strength,
                profile: d.profile.unwrap_or(PulseProfile::Gaussian),
                phase_pi: d.phase_pi.unwrap_or(0.0),
            });
        }

        if let Some(sw) = self.sweep.take() {
            match (sw.parameter, sw.from_pi, sw.to_pi, sw.step_pi) {
                (Some(parameter), Some(from_pi), Some(to_pi), Some(step_pi)) => {
                    self.spec.sweep = Some(SweepSpec {
                        parameter,
                        from_pi,
                        to_pi,
                        step_pi,
                    });
                }
                (p, f, t, s) => {
                    let missing: Vec<&str> = [
                        ("parameter", p.is_none()),
                        ("from_pi", f.is_none()),
                        ("to_pi", t.is_none()),
                        ("step_pi", s.is_none()),
                    ]
                    .iter()
                    .filter(|(k, absent)| {
                        *absent
                            && !self
                                .map
                                .keys
                                .contains_key(&("sweep".to_string(), k.to_string()))
                    })
                    .map(|(k, _)| *k)
                    .collect();
                    if !missing.is_empty() {
                        self.error(
                            sw.line,
                            ConstraintViolation,
                            format!("[sweep] is missing {}", missing.join(", ")),
                        );
                    }
                }
            }
        }
        (self.spec, self.errors, self.map)
    }
}

/// Parses a document, returning the best-effort spec and every error found,
/// including cross-field validation failures.
pub fn parse_config_lenient(text: &str) -> (ExperimentSpec, Vec<ConfigError>) {
    let mut parser = Parser {
        spec: ExperimentSpec::default(),
        pulses: Vec::new(),
        sweep: None,
        map: SourceMap::default(),
        errors: Vec::new(),
        seen: HashSet::new(),
    };
    let mut section: Option<Section> = None;

    for (idx, raw) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            match rest.strip_suffix(']') {
                Some(name) => section = Some(parser.open_section(name.trim(), line_no)),
                None => {
                    parser.error(
                        line_no,
                        ConfigErrorKind::Syntax,
                        format!("unterminated section header `{line}`"),
                    );
                    section = Some(Section::Ignored);
                }
            }
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            parser.error(
                line_no,
                ConfigErrorKind::Syntax,
                format!("expected `key = value`, found `{line}`"),
            );
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        if !valid_key(key) {
            parser.error(
                line_no,
                ConfigErrorKind::Syntax,
                format!("malformed key `{key}`"),
            );
            continue;
        }
        match section {
            None => parser.error(
                line_no,
                ConfigErrorKind::Syntax,
                format!("key `{key}` appears before any section"),
            ),
            Some(Section::Ignored) => {}
            Some(s) => parser.set_key(s, key, value, line_no),
        }
    }

    let (spec, mut errors, map) = parser.finish();
    errors.extend(validate_with_map(&spec, &map));
    errors.sort_by_key(|e| e.line);
    (spec, errors)
}

/// Parses and validates a document.
pub fn parse_config(text: &str) -> Result<ExperimentSpec, Vec<ConfigError>> {
    let (spec, errors) = parse_config_lenient(text);
    if errors.is_empty() {
        Ok(spec)
    } else {
        Err(errors)
    }
}

/// Cross-field checks. Errors point at line 1 since a built spec carries no
/// source positions.
pub fn validate_spec(spec: &ExperimentSpec) -> Result<(), Vec<ConfigError>> {
    let errors = validate_with_map(spec, &SourceMap::default());
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}

/// Slack for comparing pulse boundaries given in microseconds.
const TIME_EPS_US: f64 = 1e-9;

fn validate_with_map(spec: &ExperimentSpec, map: &SourceMap) -> Vec<ConfigError> {
    use ConfigErrorKind::ConstraintViolation as CV;
    let mut errs = Vec::new();
    let mut push = |line: usize, msg: String| errs.push(ConfigError::new(line, CV, msg));

    let sim = &spec.simulation;
    if sim.sample_dt_us <= 0.0 {
        push(
            map.line("simulation", Some("sample_dt_us")),
            format!("sample_dt_us must be positive, got {}", sim.sample_dt_us),
        );
    }
    if sim.pulse_duration_us <= 0.0 {
        push(
            map.line("simulation", Some("pulse_duration_us")),
            format!(
                "pulse_duration_us must be positive, got {}",
                sim.pulse_duration_us
            ),
        );
    }
    if sim.gamma2_per_us < 0.0 {
        push(
            map.line("simulation", Some("gamma2_per_us")),
            format!(
                "gamma2_per_us must be non-negative, got {}",
                sim.gamma2_per_us
            ),
        );
    }

    let spectral = &spec.spectral;
    if spectral.n_groups % 2 == 0 {
        push(
            map.line("spectral", Some("n_groups")),
            format!(
                "n_groups must be odd so the grid includes zero detuning, got {}",
                spectral.n_groups
            ),
        );
    }
    if spectral.spacing_khz <= 0.0 {
        push(
            map.line("spectral", Some("spacing_khz")),
            format!("spacing_khz must be positive, got {}", spectral.spacing_khz),
        );
    }
    if spectral.fwhm_mhz <= 0.0 {
        push(
            map.line("spectral", Some("fwhm_mhz")),
            format!("fwhm_mhz must be positive, got {}", spectral.fwhm_mhz),
        );
    }

    let spatial = &spec.spatial;
    if spatial.n_groups == 0 {
        push(
            map.line("spatial", Some("n_groups")),
            "n_groups must be at least 1".into(),
        );
    }
    if spatial.mode == ProfileMode::Gaussian && !(spatial.coverage > 0.0 && spatial.coverage < 1.0)
    {
        push(
            map.line("spatial", Some("coverage")),
            format!("coverage must lie in (0, 1), got {}", spatial.coverage),
        );
    }

    // a declared pulse that failed to parse has already been reported
    let declared = map.sections.keys().any(|k| k.starts_with("pulse."));
    if spec.pulses.is_empty() && !declared {
        push(1, "at least one pulse required".into());
    }
    for p in &spec.pulses {
        let label = format!("pulse.{}", p.name);
        match p.strength {
            PulseStrength::AreaPi(a) if a < 0.0 => push(
                map.line(&label, Some("area_pi")),
                format!("pulse {}: area_pi must be non-negative, got {a}", p.name),
            ),
            PulseStrength::RabiMhz(m) if m < 0.0 => push(
                map.line(&label, Some("rabi_mhz")),
                format!("pulse {}: rabi_mhz must be non-negative, got {m}", p.name),
            ),
            _ => {}
        }
        if p.t_us < 0.0 {
            push(
                map.line(&label, Some("t_us")),
                format!(
                    "pulse {}: t_us must be non-negative, got {}",
                    p.name, p.t_us
                ),
            );
        }
    }
    for pair in spec.pulses.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let line = map.line(&format!("pulse.{}", b.name), Some("t_us"));
        if b.t_us <= a.t_us {
            push(
                line,
                format!(
                    "pulse {} (t_us = {}) must start after pulse {} (t_us = {})",
                    b.name, b.t_us, a.name, a.t_us
                ),
            );
        } else if b.t_us + TIME_EPS_US < a.t_us + sim.pulse_duration_us {
            push(
                line,
                format!(
                    "pulses {} and {} overlap: {} ends at {} us, {} starts at {} us",
                    a.name,
                    b.name,
                    a.name,
                    a.t_us + sim.pulse_duration_us,
                    b.name,
                    b.t_us
                ),
            );
        }
    }
    if let (Some(d), Some(last)) = (sim.duration_us, spec.pulses.last()) {
        if d + TIME_EPS_US < last.t_us + sim.pulse_duration_us {
            push(
                map.line("simulation", Some("duration_us")),
                format!("duration_us = {d} ends before pulse {} finishes", last.name),
            );
        }
    }

    if let Some(sw) = &spec.sweep {
        if sw.step_pi <= 0.0 {
            push(
                map.line("sweep", Some("step_pi")),
                format!("step_pi must be positive, got {}", sw.step_pi),
            );
        }
        if sw.to_pi < sw.from_pi {
            push(
                map.line("sweep", Some("to_pi")),
                format!(
                    "empty sweep range: to_pi = {} < from_pi = {}",
                    sw.to_pi, sw.from_pi
                ),
            );
        }
        if sw.from_pi < 0.0 {
            push(
                map.line("sweep", Some("from_pi")),
                format!("from_pi must be non-negative, got {}", sw.from_pi),
            );
        }
        if spec.swept_pulses(&sw.parameter).is_none() {
            push(
                map.line("sweep", Some("parameter")),
                format!(
                    "sweep parameter `{}` does not name a pulse area",
                    sw.parameter
                ),
            );
        }
    }
    errs
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const DRPE: &str = "\
# weak data, double rephasing
[pulse.D]
t_us = 0.1
area_pi = 0.2

[pulse.R1]
t_us = 3.1
area_pi = 1.0

[pulse.R2]
t_us = 9.1
area_pi = 1.0
";

    #[test]
    fn parses_drpe_document() {
        let spec = parse_config(DRPE).unwrap();
        assert_eq!(spec.pulses.len(), 3);
        assert_eq!(spec.pulses[0].name, "D");
        assert_eq!(spec.pulses[0].strength, PulseStrength::AreaPi(0.2));
        assert_eq!(spec.pulses[2].t_us, 9.1);
        assert_eq!(spec.simulation, SimulationSettings::default());
        assert_eq!(spec.spectral, SpectralSettings::default());
        assert_eq!(spec.spatial, SpatialSettings::default());
        assert!(spec
            .pulses
            .iter()
            .all(|p| p.profile == PulseProfile::Gaussian));
        assert!((spec.pulses[0].area(0.1) - 0.2 * PI).abs() < 1e-15);
    }

    #[test]
    fn empty_document_gives_defaults_and_one_error() {
        let (spec, errors) = parse_config_lenient("");
        assert_eq!(spec, ExperimentSpec::default());
        assert_eq!(errors.len(), 1);
        assert_eq!(errors[0].kind, ConfigErrorKind::ConstraintViolation);
        assert!(errors[0].message.contains("at least one pulse required"));
    }

    #[test]
    fn bad_number_reports_line() {
        let text = "[pulse.D]\nt_us = 0.1\narea_pi = abc\n";
        let errors = parse_config(text).unwrap_err();
        assert_eq!(errors.len(), 1, "{errors:?}");
        assert_eq!(errors[0].kind, ConfigErrorKind::BadNumber);
        assert_eq!(errors[0].line, 3);
        assert!(errors[0].message.contains("abc"));
    }

    #[test]
    fn collects_every_error() {
        let text = "\
[simulation]
sample_dt_us = 0.1
sample_dt_us = 0.2
colour = red
[bogus]
x = 1
[spectral]
n_groups = 280
spacing_khz = 1e
this line is junk
[pulse.D]
t_us = 0.1
area_pi = 0.5
rabi_mhz = 2
";
        let errors = parse_config(text).unwrap_err();
        let kinds: Vec<(usize, ConfigErrorKind)> =
            errors.iter().map(|e| (e.line, e.kind)).collect();
        use ConfigErrorKind::*;
        assert!(kinds.contains(&(3, DuplicateKey)));
        assert!(kinds.contains(&(4, UnknownKey)));
        assert!(kinds.contains(&(5, UnknownSection)));
        assert!(kinds.contains(&(8, ConstraintViolation)));
        assert!(kinds.contains(&(9, BadNumber)));
        assert!(kinds.contains(&(10, Syntax)));
        assert!(kinds.contains(&(11, ConstraintViolation)));
        assert!(errors.iter().all(|e| e.line >= 1));
        let sorted = errors.windows(2).all(|w| w[0].line <= w[1].line);
        assert!(sorted);
    }

    #[test]
    fn overlap_names_both_pulses() {
        let text = "[pulse.A]\nt_us = 0.1\narea_pi = 1\n[pulse.B]\nt_us = 0.15\narea_pi = 1\n";
        let errors = parse_config(text).unwrap_err();
        assert_eq!(errors.len(), 1);
        assert_eq!(errors[0].line, 5);
        assert!(errors[0].message.contains('A') && errors[0].message.contains('B'));
    }

    #[test]
    fn adjacent_pulses_do_not_overlap() {
        let text = "[pulse.A]\nt_us = 0.1\narea_pi = 1\n[pulse.B]\nt_us = 0.2\narea_pi = 1\n";
        assert!(parse_config(text).is_ok());
    }

    #[test]
    fn validate_checks_odd_spectral_count() {
        let mut spec = parse_config(DRPE).unwrap();
        spec.spectral.n_groups = 280;
        let errors = validate_spec(&spec).unwrap_err();
        assert_eq!(errors.len(), 1);
        assert!(errors[0].message.contains("odd"));
    }

    #[test]
    fn sweep_parameters_resolve() {
        let spec = parse_config(DRPE).unwrap();
        assert_eq!(spec.swept_pulses("R1.area"), Some(vec![1]));
        assert_eq!(spec.swept_pulses("R.area"), Some(vec![1, 2]));
        assert_eq!(spec.swept_pulses("D.area"), Some(vec![0]));
        assert_eq!(spec.swept_pulses("X.area"), None);
        assert_eq!(spec.swept_pulses("R1"), None);

        let text =
            format!("{DRPE}[sweep]\nparameter = R1.area\nfrom_pi = 0\nto_pi = 2\nstep_pi = 0.25\n");
        assert!(parse_config(&text).is_ok());
        let bad =
            format!("{DRPE}[sweep]\nparameter = Q.area\nfrom_pi = 0\nto_pi = 2\nstep_pi = 0\n");
        let errors = parse_config(&bad).unwrap_err();
        assert_eq!(errors.len(), 2, "{errors:?}");
        let missing = format!("{DRPE}[sweep]\nparameter = R.area\n");
        assert!(parse_config(&missing).unwrap_err()[0]
            .message
            .contains("from_pi"));
    }

    #[test]
    fn crlf_and_comments() {
        let text =
            "[pulse.D]  # data\r\nt_us = 0.1 # start\r\nrabi_mhz = 2.5\r\nprofile = uniform\r\n";
        let spec = parse_config(text).unwrap();
        assert_eq!(spec.pulses[0].strength, PulseStrength::RabiMhz(2.5));
        assert_eq!(spec.pulses[0].profile, PulseProfile::Uniform);
        assert!((spec.pulses[0].area(0.1) - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn strict_number_grammar() {
        for ok in ["1", "-1.5", "+2.", ".5", "1e-3", "6.02E+23"] {
            assert!(is_decimal(ok), "{ok}");
        }
        for bad in ["", "abc", "1e", "inf", "NaN", "1.2.3", "--1", "0x10", "."] {
            assert!(!is_decimal(bad), "{bad}");
        }
    }

    fn arb_spec() -> impl Strategy<Value = ExperimentSpec> {
        let pulse = (0.0..5.0f64, any::<bool>(), any::<bool>(), -1.0..1.0f64);
        (
            (
                0.001..1.0f64,
                0.01..0.5f64,
                0.0..2.0f64,
                proptest::option::of(20.0..40.0f64),
            ),
            (0usize..200, 1.0..50.0f64, 0.1..3.0f64),
            (
                prop_oneof![
                    Just(ProfileMode::Gaussian),
                    Just(ProfileMode::Uniform),
                    Just(ProfileMode::Linear)
                ],
                1usize..100,
                0.5..0.999f64,
            ),
            proptest::collection::vec(pulse, 1..5),
            proptest::option::of((0.0..1.0f64, 0.0..1.0f64, 0.01..1.0f64)),
        )
            .prop_map(|(sim, spec, spat, pulses, sweep)| {
                let duration = sim.1;
                let mut t = 0.0;
                let pulses: Vec<PulseSpec> = pulses
                    .into_iter()
                    .enumerate()
                    .map(|(i, (gap, use_area, gaussian, x))| {
                        t += gap + duration;
                        PulseSpec {
                            name: format!("P{i}"),
                            t_us: t,
                            strength: if use_area {
                                PulseStrength::AreaPi(x.abs() * 2.0)
                            } else {
                                PulseStrength::RabiMhz(x.abs() * 10.0)
                            },
                            profile: if gaussian {
                                PulseProfile::Gaussian
                            } else {
                                PulseProfile::Uniform
                            },
                            phase_pi: x,
                        }
                    })
                    .collect();
                ExperimentSpec {
                    simulation: SimulationSettings {
                        sample_dt_us: sim.0,
                        pulse_duration_us: sim.1,
                        gamma2_per_us: sim.2,
                        duration_us: sim.3,
                    },
                    spectral: SpectralSettings {
                        n_groups: 2 * spec.0 + 1,
                        spacing_khz: spec.1,
                        fwhm_mhz: spec.2,
                    },
                    spatial: SpatialSettings {
                        mode: spat.0,
                        n_groups: spat.1,
                        coverage: spat.2,
                    },
                    pulses,
                    sweep: sweep.map(|(a, b, s)| SweepSpec {
                        parameter: "P0.area".into(),
                        from_pi: a,
                        to_pi: a + b,
                        step_pi: s,
                    }),
                }
            })
    }

    proptest! {
        #[test]
        fn serialized_spec_reparses_identically(spec in arb_spec()) {
            let text = spec.to_config_text();
            let (back, _) = parse_config_lenient(&text);
            prop_assert_eq!(back, spec);
        }

        #[test]
        fn parser_never_panics_and_reports_garbage(text in "[\\[\\]a-z_=.0-9# \n]{0,200}") {
            let (_, errors) = parse_config_lenient(&text);
            // no pulse can be complete without "t_us" AND an area key, so
            // garbage always yields at least the missing-pulse error
            if !text.contains("t_us") {
                prop_assert!(!errors.is_empty());
            }
        }
    }
}
