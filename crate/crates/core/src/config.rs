//! Experiment configuration files.
//!
//! The format is line oriented: `key = value` pairs, optional `[section]` headers,
//! comments starting with `#` or `;`. Keys before the first header belong to the
//! top level. Every problem is reported with its line number and unknown keys are
//! errors. Missing inputs take per-scheme defaults.
//!
//! Relaxation rates may be given by moment label (`s5`, `s7`, ...) or by group name
//! (`shear`, `heat_flux`, ...). Labels count from 1 on D2Q9 and D2Q13 and from 0 on
//! D2Q17, where `s17` is accepted as another name for the `E4` rate.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::constraints::{derive_parameters, tied_groups, FreeParameters, IsotropyLevel};
use crate::error::{ConfigError, LbmError, Result};
use crate::linear::ModeLabel;
use crate::params::{sigma_from_rate, ParameterSet, RateGroup, ReferenceState};
use crate::scheme::{build_scheme, SchemeDescriptor, SchemeName};
use crate::simulator::InitKind;

/// The four experiment families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Command {
    Constraints,
    ZeroPoint,
    RelaxWave,
    Disc,
}

impl Command {
    pub const ALL: [Command; 4] = [Command::Constraints, Command::ZeroPoint, Command::RelaxWave, Command::Disc];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Constraints => "constraints",
            Command::ZeroPoint => "zero-point",
            Command::RelaxWave => "relax-wave",
            Command::Disc => "disc",
        }
    }
}

impl std::fmt::Display for Command {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Command {
    type Err = LbmError;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| LbmError::InvalidArgument(format!("unknown command `{s}`")))
    }
}

/// How the shear rate was specified; kept so the echo reproduces the input.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ShearInput {
    Sigma(f64),
    Rate(f64),
}

impl ShearInput {
    pub fn sigma(self) -> f64 {
        match self {
            ShearInput::Sigma(s) => s,
            ShearInput::Rate(s) => sigma_from_rate(s),
        }
    }
}

/// `[reference]`: linearization point and initial background.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceSpec {
    pub rho0: f64,
    pub u0: f64,
    pub v0: f64,
    /// Specific internal energy; defaults to `c0²/2` and must equal it when given.
    pub e0: Option<f64>,
}

/// `[zero-point]`: wave-number rays of the linear analysis.
#[derive(Clone, Debug, PartialEq)]
pub struct ZeroPointSpec {
    pub angles_deg: Vec<f64>,
    pub k_min: f64,
    pub k_max: f64,
    pub k_points: usize,
    /// Exit with the instability code when some eigenvalue leaves the unit disc.
    pub fail_on_instability: bool,
}

/// `[relax-wave]`: plane-wave relaxation on a periodic grid.
#[derive(Clone, Debug, PartialEq)]
pub struct RelaxSpec {
    pub nx: usize,
    pub ny: usize,
    pub nx_periods: i32,
    pub ny_periods: i32,
    pub mode: ModeLabel,
    pub amplitude: f64,
    pub steps: usize,
    pub sample_every: usize,
    pub init: InitKind,
    pub parallel: bool,
}

/// `[disc]`: acoustic pulse inside a disc with an anti-bounce-back wall.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscSpec {
    pub nx: usize,
    pub ny: usize,
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
    pub source_x: f64,
    pub source_y: f64,
    pub width: f64,
    pub amplitude: f64,
    pub steps: usize,
    pub snapshot_every: usize,
    /// Wall specific internal energy; defaults to `c0²/2`.
    pub wall_e: Option<f64>,
    pub snapshot_prefix: String,
    pub parallel: bool,
}

/// Fully resolved configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// Free parameters for the derivation; excludes rates tied by the isotropy level.
    pub free: FreeParameters,
    pub shear: ShearInput,
    /// Rates given for tied groups, checked against the derived values.
    pub tied_inputs: BTreeMap<RateGroup, f64>,
    /// Relative tolerance for `tied_inputs`; covers rates quoted to a few digits.
    pub tied_rate_tolerance: f64,
    /// Zero every relaxation rate after derivation, leaving free transport.
    pub pure_streaming: bool,
    pub reference: ReferenceSpec,
    pub zero_point: ZeroPointSpec,
    pub relax: RelaxSpec,
    pub disc: DiscSpec,
}

/// Scheme defaults used when a free input is absent.
struct Defaults {
    shear_rate: f64,
    alpha2: f64,
    beta2: f64,
    rates: &'static [(RateGroup, f64)],
}

fn defaults(scheme: SchemeName) -> Defaults {
    use RateGroup as G;
    match scheme {
        SchemeName::D2Q9 => Defaults {
            shear_rate: 1.8181,
            alpha2: -1.0,
            beta2: 0.1,
            rates: &[(G::HeatFlux, 1.8305), (G::E2, 1.1765)],
        },
        SchemeName::D2Q13 => Defaults {
            shear_rate: 1.5,
            alpha2: 7.5,
            beta2: -4.0,
            rates: &[(G::HeatFlux, 1.5), (G::R, 1.5), (G::Elastic, 1.5), (G::E2, 0.8), (G::E3, 0.8)],
        },
        SchemeName::D2Q17 => Defaults {
            shear_rate: 1.81812,
            alpha2: -619.0,
            beta2: -20.55,
            rates: &[
                (G::HeatFlux, 6.0 / 13.0),
                (G::R, 6.0 / 13.0),
                (G::Tau, 1.923),
                (G::Elastic, 1.818),
                (G::E2, 1.111),
                (G::E3, 6.0 / 13.0),
                (G::E4, 1.111),
            ],
        },
    }
}

/// Rate group addressed by the label `s<n>` on a scheme.
pub fn rate_label_group(scheme: SchemeName, n: usize) -> Option<RateGroup> {
    use RateGroup as G;
    match scheme {
        SchemeName::D2Q9 => match n {
            5 | 6 => Some(G::Shear),
            7 | 8 => Some(G::HeatFlux),
            9 => Some(G::E2),
            _ => None,
        },
        SchemeName::D2Q13 => match n {
            5 | 6 => Some(G::Shear),
            7 | 8 => Some(G::HeatFlux),
            9 | 10 => Some(G::R),
            11 => Some(G::E2),
            12 => Some(G::E3),
            13 => Some(G::Elastic),
            _ => None,
        },
        // zero-based row index
        SchemeName::D2Q17 => match n {
            4 | 5 => Some(G::Shear),
            6 | 7 => Some(G::HeatFlux),
            8 | 9 => Some(G::R),
            10 | 11 => Some(G::Tau),
            12 | 13 => Some(G::Elastic),
            14 => Some(G::E2),
            15 => Some(G::E3),
            16 | 17 => Some(G::E4),
            _ => None,
        },
    }
}

fn group_key(g: RateGroup) -> &'static str {
    match g {
        RateGroup::Shear => "shear",
        RateGroup::HeatFlux => "heat_flux",
        RateGroup::R => "r",
        RateGroup::Tau => "tau",
        RateGroup::Elastic => "elastic",
        RateGroup::E2 => "e2",
        RateGroup::E3 => "e3",
        RateGroup::E4 => "e4",
    }
}

fn group_from_key(key: &str) -> Option<RateGroup> {
    [
        RateGroup::Shear,
        RateGroup::HeatFlux,
        RateGroup::R,
        RateGroup::Tau,
        RateGroup::Elastic,
        RateGroup::E2,
        RateGroup::E3,
        RateGroup::E4,
    ]
    .into_iter()
    .find(|&g| group_key(g) == key)
}

const TOP_KEYS: &[&str] =
    &["scheme", "isotropy", "lambda", "heat_flux_velocity_square", "tied_rate_tolerance", "pure_streaming"];
const EQ_KEYS: &[&str] = &[
    "sigma5", "alpha2", "beta2", "c0", "c2", "c3", "alpha3", "beta3", "alpha4", "beta4", "xi_x", "xi_y", "r_coeffs",
];
const REF_KEYS: &[&str] = &["rho0", "u0", "v0", "e0"];
const ZP_KEYS: &[&str] = &["angles", "k_min", "k_max", "k_points", "fail_on_instability"];
const RELAX_KEYS: &[&str] =
    &["nx", "ny", "nx_periods", "ny_periods", "mode", "amplitude", "steps", "sample_every", "init", "parallel"];
const DISC_KEYS: &[&str] = &[
    "nx", "ny", "cx", "cy", "radius", "source_x", "source_y", "width", "amplitude", "steps", "snapshot_every",
    "wall_e", "snapshot_prefix", "parallel",
];

/// One raw `key = value` entry.
#[derive(Clone, Debug)]
struct Entry {
    value: String,
    line: usize,
}

type Section = BTreeMap<String, Entry>;

fn split_lines(text: &str, errs: &mut Vec<ConfigError>) -> BTreeMap<String, Section> {
    let mut sections: BTreeMap<String, Section> = BTreeMap::new();
    sections.insert(String::new(), Section::new());
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split(['#', ';']).next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            match rest.strip_suffix(']') {
                Some(name) if !name.trim().is_empty() => {
                    let name = name.trim().to_ascii_lowercase();
                    if !["equilibrium", "rates", "reference", "zero-point", "relax-wave", "disc"].contains(&name.as_str()) {
                        errs.push(ConfigError { line, message: format!("unknown section [{name}]") });
                    }
                    if sections.contains_key(&name) {
                        errs.push(ConfigError { line, message: format!("section [{name}] appears twice") });
                    }
                    sections.entry(name.clone()).or_default();
                    current = name;
                }
                _ => errs.push(ConfigError { line, message: format!("malformed section header `{body}`") }),
            }
            continue;
        }
        let Some((k, v)) = body.split_once('=') else {
            errs.push(ConfigError { line, message: format!("expected `key = value`, got `{body}`") });
            continue;
        };
        let key = k.trim().to_ascii_lowercase();
        let value = v.trim().to_string();
        if key.is_empty() || value.is_empty() {
            errs.push(ConfigError { line, message: "empty key or value".into() });
            continue;
        }
        let sec = sections.entry(current.clone()).or_default();
        if let Some(prev) = sec.get(&key) {
            errs.push(ConfigError { line, message: format!("duplicate key `{key}` (first on line {})", prev.line) });
            continue;
        }
        sec.insert(key, Entry { value, line });
    }
    sections
}

/// Typed access to one section that records errors instead of failing fast.
struct Reader<'a> {
    name: &'a str,
    sec: Option<&'a Section>,
    errs: &'a mut Vec<ConfigError>,
}

impl Reader<'_> {
    fn check_keys(&mut self, allowed: &[&str], extra: impl Fn(&str) -> bool) {
        if let Some(sec) = self.sec {
            for (k, e) in sec {
                if !allowed.contains(&k.as_str()) && !extra(k) {
                    let place = if self.name.is_empty() { "top level".to_string() } else { format!("[{}]", self.name) };
                    self.errs.push(ConfigError { line: e.line, message: format!("unknown key `{k}` in {place}") });
                }
            }
        }
    }

    fn raw(&self, key: &str) -> Option<&Entry> {
        self.sec.and_then(|s| s.get(key))
    }

    fn parse<T: FromStr>(&mut self, key: &str, what: &str) -> Option<(T, usize)> {
        let e = self.raw(key)?.clone();
        match e.value.parse::<T>() {
            Ok(v) => Some((v, e.line)),
            Err(_) => {
                self.errs.push(ConfigError { line: e.line, message: format!("`{key}`: expected {what}, got `{}`", e.value) });
                None
            }
        }
    }

    fn float(&mut self, key: &str) -> Option<f64> {
        let (v, line) = self.parse::<f64>(key, "a number")?;
        if !v.is_finite() {
            self.errs.push(ConfigError { line, message: format!("`{key}` must be finite") });
            return None;
        }
        Some(v)
    }

    fn float_where(&mut self, key: &str, default: f64, ok: impl Fn(f64) -> bool, rule: &str) -> f64 {
        match self.float(key) {
            Some(v) if ok(v) => v,
            Some(v) => {
                let line = self.raw(key).map_or(0, |e| e.line);
                self.errs.push(ConfigError { line, message: format!("`{key}` = {v}: {rule}") });
                default
            }
            None => default,
        }
    }

    fn count(&mut self, key: &str, default: usize, min: usize) -> usize {
        match self.parse::<usize>(key, "a nonnegative integer") {
            Some((v, _)) if v >= min => v,
            Some((v, line)) => {
                self.errs.push(ConfigError { line, message: format!("`{key}` = {v}: must be at least {min}") });
                default
            }
            None => default,
        }
    }

    fn int(&mut self, key: &str, default: i32) -> i32 {
        self.parse::<i32>(key, "an integer").map_or(default, |v| v.0)
    }

    fn flag(&mut self, key: &str, default: bool) -> bool {
        self.parse::<bool>(key, "true or false").map_or(default, |v| v.0)
    }

    fn with<T>(&mut self, key: &str, default: T, f: impl Fn(&str) -> std::result::Result<T, String>) -> T {
        let Some(e) = self.raw(key).cloned() else { return default };
        match f(&e.value) {
            Ok(v) => v,
            Err(m) => {
                self.errs.push(ConfigError { line: e.line, message: format!("`{key}`: {m}") });
                default
            }
        }
    }
}

fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("`{}` is not a number", t.trim()))
        })
        .collect()
}

fn rate_ok(s: f64) -> bool {
    s > 0.0 && s < 2.0
}

/// Parses and validates a configuration.
///
/// All problems found are returned together as [`LbmError::Config`].
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut errs = Vec::new();
    let sections = split_lines(text, &mut errs);
    let sec = |n: &str| sections.get(n);

    // top level
    let mut top = Reader { name: "", sec: sec(""), errs: &mut errs };
    top.check_keys(TOP_KEYS, |_| false);
    let scheme = match top.raw("scheme").cloned() {
        Some(e) => match e.value.parse::<SchemeName>() {
            Ok(s) => Some(s),
            Err(err) => {
                top.errs.push(ConfigError { line: e.line, message: err.to_string() });
                None
            }
        },
        None => {
            top.errs.push(ConfigError { line: 0, message: "missing required key `scheme`".into() });
            None
        }
    };
    let level = top.with("isotropy", IsotropyLevel::Full, |v| v.parse().map_err(|e: LbmError| e.to_string()));
    let lambda = top.float_where("lambda", 1.0, |v| v > 0.0, "must be positive");
    let vel_sq = top.flag("heat_flux_velocity_square", false);
    let tied_tol = top.float_where("tied_rate_tolerance", 1e-4, |v| v >= 0.0, "must be nonnegative");
    let pure_streaming = top.flag("pure_streaming", false);

    let Some(scheme) = scheme else {
        return Err(LbmError::Config(errs));
    };
    let d = defaults(scheme);

    // rates
    let rates_sec = sec("rates");
    let mut rates: BTreeMap<RateGroup, (f64, String, usize)> = BTreeMap::new();
    if let Some(rs) = rates_sec {
        for (k, e) in rs {
            let group = if let Some(n) = k.strip_prefix('s').and_then(|n| n.parse::<usize>().ok()) {
                match rate_label_group(scheme, n) {
                    Some(g) => g,
                    None => {
                        errs.push(ConfigError { line: e.line, message: format!("`{k}` does not name a relaxed moment of {scheme}") });
                        continue;
                    }
                }
            } else if let Some(g) = group_from_key(k) {
                if !RateGroup::groups_of(scheme).contains(&g) {
                    errs.push(ConfigError { line: e.line, message: format!("{scheme} has no `{k}` moments") });
                    continue;
                }
                g
            } else {
                errs.push(ConfigError { line: e.line, message: format!("unknown key `{k}` in [rates]") });
                continue;
            };
            let Ok(v) = e.value.parse::<f64>() else {
                errs.push(ConfigError { line: e.line, message: format!("`{k}`: expected a number, got `{}`", e.value) });
                continue;
            };
            if !rate_ok(v) {
                errs.push(ConfigError { line: e.line, message: format!("`{k}` = {v}: rate outside (0,2)") });
                continue;
            }
            match rates.get(&group) {
                Some((prev, pk, pl)) if *prev != v => errs.push(ConfigError {
                    line: e.line,
                    message: format!("`{k}` = {v} disagrees with `{pk}` = {prev} on line {pl}; both set the {} rate", group.name()),
                }),
                Some(_) => {}
                None => {
                    rates.insert(group, (v, k.clone(), e.line));
                }
            }
        }
    }

    // equilibrium
    let mut eq = Reader { name: "equilibrium", sec: sec("equilibrium"), errs: &mut errs };
    eq.check_keys(EQ_KEYS, |_| false);
    let sigma5 = eq.float_where("sigma5", f64::NAN, |v| v > 0.0, "must be positive");
    let shear = match (sigma5.is_nan(), rates.remove(&RateGroup::Shear)) {
        (false, Some((_, k, line))) => {
            eq.errs.push(ConfigError { line, message: format!("`{k}` and `sigma5` both set the shear rate") });
            ShearInput::Sigma(sigma5)
        }
        (false, None) => ShearInput::Sigma(sigma5),
        (true, Some((v, _, _))) => ShearInput::Rate(v),
        (true, None) => ShearInput::Rate(d.shear_rate),
    };
    let alpha2 = eq.float("alpha2").unwrap_or(d.alpha2);
    let beta2 = eq.float("beta2").unwrap_or(d.beta2);
    let c0 = eq.raw("c0").is_some().then(|| eq.float_where("c0", f64::NAN, |v| v > 0.0, "must be positive"));
    let opt = |eq: &mut Reader, k: &str| eq.float(k);
    let (c2, c3) = (opt(&mut eq, "c2"), opt(&mut eq, "c3"));
    let (alpha3, beta3) = (opt(&mut eq, "alpha3"), opt(&mut eq, "beta3"));
    let (alpha4, beta4) = (opt(&mut eq, "alpha4"), opt(&mut eq, "beta4"));
    let (xi_x, xi_y) = (opt(&mut eq, "xi_x"), opt(&mut eq, "xi_y"));
    let r_coeffs = eq.with("r_coeffs", None, |v| {
        let l = parse_list(v)?;
        <[f64; 8]>::try_from(l.as_slice()).map(Some).map_err(|_| format!("expected 8 numbers, got {}", l.len()))
    });

    let mut free = FreeParameters::new(scheme, shear.sigma(), alpha2, beta2).with_level(level);
    free.lambda = lambda;
    free.c0 = c0;
    free.c2 = c2;
    free.c3 = c3;
    free.alpha3 = alpha3;
    free.beta3 = beta3;
    free.alpha4 = alpha4;
    free.beta4 = beta4;
    free.xi_x = xi_x;
    free.xi_y = xi_y;
    free.r_coeffs = r_coeffs;
    free.include_velocity_square_in_heat_flux = vel_sq;
    let tied = tied_groups(scheme, level);
    let mut tied_inputs = BTreeMap::new();
    for g in RateGroup::groups_of(scheme) {
        if g == RateGroup::Shear {
            continue;
        }
        let given = rates.get(&g).map(|r| r.0);
        if tied.contains(&g) {
            if let Some(v) = given {
                tied_inputs.insert(g, v);
            }
        } else if let Some(v) = given.or_else(|| d.rates.iter().find(|r| r.0 == g).map(|r| r.1)) {
            free.rates.insert(g, v);
        }
    }

    // reference
    let mut rf = Reader { name: "reference", sec: sec("reference"), errs: &mut errs };
    rf.check_keys(REF_KEYS, |_| false);
    let reference = ReferenceSpec {
        rho0: rf.float_where("rho0", 1.0, |v| v > 0.0, "must be positive"),
        u0: rf.float("u0").unwrap_or(0.0),
        v0: rf.float("v0").unwrap_or(0.0),
        e0: rf.raw("e0").is_some().then(|| rf.float_where("e0", f64::NAN, |v| v > 0.0, "must be positive")),
    };

    // zero-point
    let mut zp = Reader { name: "zero-point", sec: sec("zero-point"), errs: &mut errs };
    zp.check_keys(ZP_KEYS, |_| false);
    let k_max = zp.float_where("k_max", std::f64::consts::PI, |v| v > 0.0, "must be positive");
    let k_points = zp.count("k_points", 200, 2);
    let k_min = zp.float_where("k_min", k_max / k_points as f64, |v| v > 0.0, "must be positive");
    if k_min >= k_max {
        let line = zp.raw("k_min").or(zp.raw("k_max")).map_or(0, |e| e.line);
        zp.errs.push(ConfigError { line, message: format!("k_min = {k_min} must be below k_max = {k_max}") });
    }
    let zero_point = ZeroPointSpec {
        angles_deg: zp.with("angles", vec![0.0, 26.565, 45.0], |v| {
            let l = parse_list(v)?;
            if l.is_empty() {
                Err("needs at least one angle".into())
            } else {
                Ok(l)
            }
        }),
        k_min,
        k_max,
        k_points,
        fail_on_instability: zp.flag("fail_on_instability", false),
    };

    // relax-wave
    let mut rw = Reader { name: "relax-wave", sec: sec("relax-wave"), errs: &mut errs };
    rw.check_keys(RELAX_KEYS, |_| false);
    let relax = RelaxSpec {
        nx: rw.count("nx", 64, 4),
        ny: rw.count("ny", 64, 4),
        nx_periods: rw.int("nx_periods", 2),
        ny_periods: rw.int("ny_periods", 1),
        mode: rw.with("mode", ModeLabel::Shear, |v| v.parse().map_err(|e: LbmError| e.to_string())),
        amplitude: rw.float_where("amplitude", 1e-4, |v| v > 0.0, "must be positive"),
        steps: rw.count("steps", 1000, 1),
        sample_every: rw.count("sample_every", 10, 1),
        init: rw.with("init", InitKind::Characteristic, |v| match v {
            "characteristic" => Ok(InitKind::Characteristic),
            "eigenmode" => Ok(InitKind::Eigenmode),
            _ => Err(format!("unknown init `{v}` (characteristic, eigenmode)")),
        }),
        parallel: rw.flag("parallel", true),
    };
    if relax.nx_periods == 0 && relax.ny_periods == 0 {
        let line = rw.raw("nx_periods").or(rw.raw("ny_periods")).map_or(0, |e| e.line);
        rw.errs.push(ConfigError { line, message: "the wave needs at least one nonzero period count".into() });
    }

    // disc
    let mut dc = Reader { name: "disc", sec: sec("disc"), errs: &mut errs };
    dc.check_keys(DISC_KEYS, |_| false);
    let (nx, ny) = (dc.count("nx", 101, 4), dc.count("ny", 101, 4));
    let cx = dc.float("cx").unwrap_or((nx as f64 - 1.0) / 2.0);
    let cy = dc.float("cy").unwrap_or((ny as f64 - 1.0) / 2.0);
    let disc = DiscSpec {
        nx,
        ny,
        cx,
        cy,
        radius: dc.float_where("radius", 40.0, |v| v > 0.0, "must be positive"),
        source_x: dc.float("source_x").unwrap_or(cx),
        source_y: dc.float("source_y").unwrap_or(cy),
        width: dc.float_where("width", 2.0, |v| v > 0.0, "must be positive"),
        amplitude: dc.float_where("amplitude", 1e-3, |v| v.abs() < 1.0, "must lie in (-1, 1)"),
        steps: dc.count("steps", 40, 1),
        snapshot_every: dc.count("snapshot_every", 10, 1),
        wall_e: dc.raw("wall_e").is_some().then(|| dc.float_where("wall_e", f64::NAN, |v| v > 0.0, "must be positive")),
        snapshot_prefix: dc.with("snapshot_prefix", "disc_snapshot".to_string(), |v| {
            if v.contains(['/', '\\']) {
                Err("must be a file name without directories".into())
            } else {
                Ok(v.to_string())
            }
        }),
        parallel: dc.flag("parallel", true),
    };

    if !errs.is_empty() {
        errs.sort_by_key(|e| e.line);
        return Err(LbmError::Config(errs));
    }
    Ok(ExperimentConfig {
        free,
        shear,
        tied_inputs,
        tied_rate_tolerance: tied_tol,
        pure_streaming,
        reference,
        zero_point,
        relax,
        disc,
    })
}

impl ExperimentConfig {
    /// Completes the parameter set and checks tied rates given in the file.
    ///
    /// With `pure_streaming` the rates are zeroed after the checks.
    pub fn derive(&self) -> Result<(SchemeDescriptor, ParameterSet)> {
        let p = derive_parameters(&self.free)?;
        let s = build_scheme(self.free.scheme, self.free.lambda, 1.0)?;
        for (&g, &v) in &self.tied_inputs {
            let forced = p.rate(&s, g).expect("tied group exists");
            if (v - forced).abs() > self.tied_rate_tolerance * forced.abs() {
                return Err(LbmError::ConstraintViolation {
                    name: format!("rate of {}", g.name()),
                    detail: format!(
                        "given {v}, but isotropy level {} ties it to {forced} (tolerance {})",
                        self.free.isotropy_level, self.tied_rate_tolerance
                    ),
                });
            }
        }
        Ok((s, if self.pure_streaming { p.with_zero_rates() } else { p }))
    }

    /// Linearization point; the internal energy follows the scheme's sound speed.
    pub fn reference_state(&self, p: &ParameterSet) -> Result<ReferenceState> {
        let r = &self.reference;
        let e0 = 0.5 * p.c0 * p.c0;
        if let Some(e) = r.e0 {
            if (e - e0).abs() > 1e-12 * e0 {
                return Err(LbmError::Config(vec![ConfigError {
                    line: 0,
                    message: format!("e0 = {e} differs from c0^2/2 = {e0}; the sound speed fixes e0, set c0 instead"),
                }]));
            }
        }
        ReferenceState::new(r.rho0, r.u0, r.v0, e0)
    }

    /// Resolved configuration as config-file lines for `command`; parsing them back
    /// yields the same configuration.
    pub fn echo(&self, command: Command) -> Vec<String> {
        let f = &self.free;
        let mut out = vec![
            format!("scheme = {}", f.scheme),
            format!("isotropy = {}", f.isotropy_level),
            format!("lambda = {}", f.lambda),
            format!("heat_flux_velocity_square = {}", f.include_velocity_square_in_heat_flux),
            format!("tied_rate_tolerance = {}", self.tied_rate_tolerance),
            format!("pure_streaming = {}", self.pure_streaming),
            "[equilibrium]".into(),
        ];
        if let ShearInput::Sigma(s) = self.shear {
            out.push(format!("sigma5 = {s}"));
        }
        out.push(format!("alpha2 = {}", f.alpha2));
        out.push(format!("beta2 = {}", f.beta2));
        for (k, v) in [
            ("c0", f.c0),
            ("c2", f.c2),
            ("c3", f.c3),
            ("alpha3", f.alpha3),
            ("beta3", f.beta3),
            ("alpha4", f.alpha4),
            ("beta4", f.beta4),
            ("xi_x", f.xi_x),
            ("xi_y", f.xi_y),
        ] {
            if let Some(v) = v {
                out.push(format!("{k} = {v}"));
            }
        }
        if let Some(r) = f.r_coeffs {
            out.push(format!("r_coeffs = {}", r.map(|v| v.to_string()).join(", ")));
        }
        out.push("[rates]".into());
        if let ShearInput::Rate(s) = self.shear {
            out.push(format!("shear = {s}"));
        }
        let mut all: Vec<(RateGroup, f64)> = f.rates.iter().map(|(&g, &v)| (g, v)).collect();
        all.extend(self.tied_inputs.iter().map(|(&g, &v)| (g, v)));
        all.sort_by_key(|x| x.0);
        for (g, v) in all {
            out.push(format!("{} = {v}", group_key(g)));
        }
        let r = &self.reference;
        out.push("[reference]".into());
        out.push(format!("rho0 = {}", r.rho0));
        out.push(format!("u0 = {}", r.u0));
        out.push(format!("v0 = {}", r.v0));
        if let Some(e) = r.e0 {
            out.push(format!("e0 = {e}"));
        }
        match command {
            Command::Constraints => {}
            Command::ZeroPoint => {
                let z = &self.zero_point;
                out.push("[zero-point]".into());
                out.push(format!("angles = {}", z.angles_deg.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ")));
                out.push(format!("k_min = {}", z.k_min));
                out.push(format!("k_max = {}", z.k_max));
                out.push(format!("k_points = {}", z.k_points));
                out.push(format!("fail_on_instability = {}", z.fail_on_instability));
            }
            Command::RelaxWave => {
                let w = &self.relax;
                out.push("[relax-wave]".into());
                out.push(format!("nx = {}", w.nx));
                out.push(format!("ny = {}", w.ny));
                out.push(format!("nx_periods = {}", w.nx_periods));
                out.push(format!("ny_periods = {}", w.ny_periods));
                out.push(format!("mode = {}", w.mode));
                out.push(format!("amplitude = {}", w.amplitude));
                out.push(format!("steps = {}", w.steps));
                out.push(format!("sample_every = {}", w.sample_every));
                out.push(format!(
                    "init = {}",
                    match w.init {
                        InitKind::Characteristic => "characteristic",
                        InitKind::Eigenmode => "eigenmode",
                    }
                ));
                out.push(format!("parallel = {}", w.parallel));
            }
            Command::Disc => {
                let d = &self.disc;
                out.push("[disc]".into());
                for (k, v) in [
                    ("cx", d.cx),
                    ("cy", d.cy),
                    ("radius", d.radius),
                    ("source_x", d.source_x),
                    ("source_y", d.source_y),
                    ("width", d.width),
                    ("amplitude", d.amplitude),
                ] {
                    out.push(format!("{k} = {v}"));
                }
                out.push(format!("nx = {}", d.nx));
                out.push(format!("ny = {}", d.ny));
                out.push(format!("steps = {}", d.steps));
                out.push(format!("snapshot_every = {}", d.snapshot_every));
                if let Some(e) = d.wall_e {
                    out.push(format!("wall_e = {e}"));
                }
                out.push(format!("snapshot_prefix = {}", d.snapshot_prefix));
                out.push(format!("parallel = {}", d.parallel));
            }
        }
        out
    }
}
