//! Run configuration: TOML text (`key = value` lines, `[section]` headers)
//! checked key by key so that every problem is reported at once.
//!
//! ```toml
//! command = "solve"            # solve | sweep | parabolic | fb1d
//!
//! [domain]
//! lower = [-2.0]
//! upper = [2.0]
//! h = 0.03125
//!
//! [kernel]
//! kind = "integral"            # integral | sup
//! radius = 1.0
//!
//! [[species]]
//! patches = [{ lower = [-3.0], upper = [-2.0], value = 1.0 }]
//!
//! [[species]]
//! patches = [{ lower = [2.0], upper = [3.0], axis = 0, at_lower = 1.0, at_upper = 0.0 }]
//!
//! [solver]
//! eps = 0.05
//! ```

use std::fmt;
use std::path::PathBuf;

use serde::Serialize;
use toml::{Table, Value};

use crate::domain::{Domain, Patch, PatchValue};
use crate::elliptic::{LinearSolverOptions, SolverMethod};
use crate::error::{Error, Result};
use crate::iteration::{FixedPointOptions, MonotoneOptions};
use crate::nonlocal::KernelKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Solve,
    Sweep,
    Parabolic,
    Fb1d,
}

impl Command {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "solve" => Some(Self::Solve),
            "sweep" => Some(Self::Sweep),
            "parabolic" => Some(Self::Parabolic),
            "fb1d" => Some(Self::Fb1d),
            _ => None,
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Solve => "solve",
            Self::Sweep => "sweep",
            Self::Parabolic => "parabolic",
            Self::Fb1d => "fb1d",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelConfig {
    pub kind: KernelKind,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialData {
    /// Harmonic extension of each species' data.
    Harmonic,
    /// Zero inside, boundary data on the collar.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParabolicConfig {
    /// Defaults to `h²`.
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub steady_tol: Option<f64>,
    pub max_steps: usize,
    pub init: InitialData,
    /// Write every n-th step to the trace file (the last step is always written).
    pub trace_every: usize,
    /// Also solve the elliptic problem and report the distance to it.
    pub compare_elliptic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegregationConfig {
    /// Support threshold; defaults to `1e-3 · max φ`.
    pub theta: Option<f64>,
    /// Competitor data level defining the boundary set for the decay profile.
    pub sigma: f64,
    pub decay_radii: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Write `history.csv` for monotone solves.
    pub history: bool,
    /// Include the individual interleaving violations (up to `audit_limit`) in the report.
    pub audit: bool,
    pub audit_limit: usize,
    /// Cross-check monotone solves against the damped fixed point from three starts.
    pub uniqueness_check: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub domain: DomainConfig,
    pub kernel: KernelConfig,
    pub species: Vec<Vec<Patch>>,
    pub eps: Option<f64>,
    pub eps_list: Vec<f64>,
    pub monotone: MonotoneOptions,
    pub fixed_point: FixedPointOptions,
    pub damping: f64,
    pub warm_start: bool,
    pub parabolic: ParabolicConfig,
    pub segregation: SegregationConfig,
    pub output: OutputConfig,
}

struct Reader {
    errors: Vec<String>,
}

impl Reader {
    fn err(&mut self, msg: impl Into<String>) {
        self.errors.push(msg.into());
    }

    fn check_keys(&mut self, table: &Table, path: &str, allowed: &[&str]) {
        for key in table.keys() {
            if !allowed.contains(&key.as_str()) {
                let full = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
                self.err(format!("unknown key `{full}`"));
            }
        }
    }

    fn section<'a>(&mut self, root: &'a Table, name: &str) -> Option<&'a Table> {
        match root.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                self.err(format!("`{name}` must be a section"));
                None
            }
        }
    }

    fn number(&mut self, t: &Table, path: &str, key: &str) -> Option<f64> {
        match t.get(key)? {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            other => {
                self.err(format!("`{path}.{key}` must be a number, got {}", other.type_str()));
                None
            }
        }
    }

    fn positive(&mut self, t: &Table, path: &str, key: &str) -> Option<f64> {
        let x = self.number(t, path, key)?;
        if !(x.is_finite() && x > 0.0) {
            self.err(format!("`{path}.{key}` must be positive, got {x}"));
        }
        Some(x)
    }

    fn count(&mut self, t: &Table, path: &str, key: &str) -> Option<usize> {
        match t.get(key)? {
            Value::Integer(i) if *i >= 1 => Some(*i as usize),
            Value::Integer(i) => {
                self.err(format!("`{path}.{key}` must be at least 1, got {i}"));
                None
            }
            other => {
                self.err(format!("`{path}.{key}` must be an integer, got {}", other.type_str()));
                None
            }
        }
    }

    fn flag(&mut self, t: &Table, path: &str, key: &str) -> Option<bool> {
        match t.get(key)? {
            Value::Boolean(b) => Some(*b),
            other => {
                self.err(format!("`{path}.{key}` must be true or false, got {}", other.type_str()));
                None
            }
        }
    }

    fn string<'a>(&mut self, t: &'a Table, path: &str, key: &str) -> Option<&'a str> {
        match t.get(key)? {
            Value::String(s) => Some(s),
            other => {
                self.err(format!("`{path}.{key}` must be a string, got {}", other.type_str()));
                None
            }
        }
    }

    fn numbers(&mut self, t: &Table, path: &str, key: &str) -> Option<Vec<f64>> {
        let name = if path.is_empty() { key.to_string() } else { format!("{path}.{key}") };
        match t.get(key)? {
            Value::Array(items) => {
                let mut out = Vec::with_capacity(items.len());
                for v in items {
                    match v {
                        Value::Float(x) => out.push(*x),
                        Value::Integer(i) => out.push(*i as f64),
                        other => {
                            self.err(format!("`{name}` must hold numbers, found {}", other.type_str()));
                            return None;
                        }
                    }
                }
                Some(out)
            }
            other => {
                self.err(format!("`{name}` must be an array of numbers, got {}", other.type_str()));
                None
            }
        }
    }
}

/// Parses a configuration that names its own `command`.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_for(text, None)
}

/// Parses a configuration; `command` (e.g. from the command line) takes the
/// place of a missing `command` key and must agree with a present one.
pub fn parse_config_for(text: &str, command: Option<Command>) -> Result<RunConfig> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| Error::Config(vec![e.to_string()]))?;
    let mut r = Reader { errors: Vec::new() };
    r.check_keys(&root, "", &["command", "domain", "kernel", "species", "solver", "parabolic", "segregation", "output"]);

    let named = match root.get("command") {
        None => None,
        Some(Value::String(s)) => match Command::parse(s) {
            Some(c) => Some(c),
            None => {
                r.err(format!("unknown command `{s}` (expected solve, sweep, parabolic or fb1d)"));
                None
            }
        },
        Some(other) => {
            r.err(format!("`command` must be a string, got {}", other.type_str()));
            None
        }
    };
    let command = match (named, command) {
        (Some(a), Some(b)) if a != b => {
            r.err(format!("configuration is for `{a}` but `{b}` was requested"));
            b
        }
        (_, Some(c)) | (Some(c), None) => c,
        (None, None) => {
            if !root.contains_key("command") {
                r.err("missing `command`");
            }
            Command::Solve
        }
    };

    // [domain]
    let mut domain = DomainConfig { lower: Vec::new(), upper: Vec::new(), h: f64::NAN };
    match r.section(&root, "domain") {
        None => r.err("missing section [domain]"),
        Some(t) => {
            r.check_keys(t, "domain", &["lower", "upper", "h"]);
            domain.lower = r.numbers(t, "domain", "lower").unwrap_or_default();
            domain.upper = r.numbers(t, "domain", "upper").unwrap_or_default();
            domain.h = r.positive(t, "domain", "h").unwrap_or(f64::NAN);
            for key in ["lower", "upper", "h"] {
                if !t.contains_key(key) {
                    r.err(format!("missing `domain.{key}`"));
                }
            }
        }
    }
    let dim = domain.lower.len();
    if domain.h.is_finite() && domain.h > 0.0 && !domain.lower.is_empty() {
        if let Err(e) = Domain::new(&domain.lower, &domain.upper, domain.h) {
            r.err(format!("domain: {e}"));
        }
    }

    // [kernel]
    let mut kernel = KernelConfig { kind: KernelKind::Integral, radius: 1.0 };
    if let Some(t) = r.section(&root, "kernel") {
        r.check_keys(t, "kernel", &["kind", "radius"]);
        match r.string(t, "kernel", "kind") {
            Some("integral") => kernel.kind = KernelKind::Integral,
            Some("sup") => kernel.kind = KernelKind::Sup,
            Some(other) => r.err(format!("unknown kernel kind `{other}` (expected integral or sup)")),
            None => {}
        }
        if let Some(x) = r.positive(t, "kernel", "radius") {
            kernel.radius = x;
            if x > 1.0 {
                r.err(format!("`kernel.radius` must not exceed 1, got {x}"));
            } else if x / domain.h < 2.0 - 1e-9 {
                r.err(format!("`kernel.radius` = {x} spans fewer than two cells"));
            }
        }
    }

    // [[species]]
    let mut species = Vec::new();
    match root.get("species") {
        None => r.err("no [[species]] given"),
        Some(Value::Array(items)) => {
            for (s, item) in items.iter().enumerate() {
                let path = format!("species[{s}]");
                let Value::Table(t) = item else {
                    r.err(format!("`{path}` must be a table"));
                    continue;
                };
                r.check_keys(t, &path, &["patches"]);
                let mut patches = Vec::new();
                match t.get("patches") {
                    None => {}
                    Some(Value::Array(ps)) => {
                        for (p, pv) in ps.iter().enumerate() {
                            let ppath = format!("{path}.patches[{p}]");
                            match pv {
                                Value::Table(pt) => {
                                    if let Some(patch) = read_patch(&mut r, pt, &ppath, dim) {
                                        patches.push(patch);
                                    }
                                }
                                _ => r.err(format!("`{ppath}` must be a table")),
                            }
                        }
                    }
                    Some(other) => r.err(format!("`{path}.patches` must be an array, got {}", other.type_str())),
                }
                species.push(patches);
            }
        }
        Some(other) => r.err(format!("`species` must be an array of tables, got {}", other.type_str())),
    }
    if matches!(root.get("species"), Some(Value::Array(a)) if a.is_empty()) {
        r.err("at least one species is required");
    }

    // [solver]
    let mut monotone = MonotoneOptions::default();
    let mut fixed_point = FixedPointOptions::default();
    let mut linear = LinearSolverOptions::default();
    let mut eps = None;
    let mut eps_list = Vec::new();
    let mut damping = 0.5;
    let mut warm_start = true;
    if let Some(t) = r.section(&root, "solver") {
        let p = "solver";
        r.check_keys(
            t,
            p,
            &[
                "eps",
                "eps_list",
                "tol_outer",
                "max_outer",
                "min_outer",
                "history_cap",
                "residual_tol",
                "linear_method",
                "linear_tol",
                "linear_max_iter",
                "fixed_point_tol",
                "fixed_point_max_iter",
                "damping",
                "warm_start",
            ],
        );
        eps = r.positive(t, p, "eps");
        if let Some(list) = r.numbers(t, p, "eps_list") {
            if list.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
                r.err("`solver.eps_list` entries must be positive");
            }
            if list.windows(2).any(|w| w[1] >= w[0]) {
                r.err("`solver.eps_list` must be strictly decreasing");
            }
            eps_list = list;
        }
        if let Some(x) = r.positive(t, p, "tol_outer") {
            monotone.tol_outer = x;
        }
        if let Some(x) = r.count(t, p, "max_outer") {
            monotone.max_outer = x;
        }
        if let Some(x) = r.count(t, p, "min_outer") {
            monotone.min_outer = x;
        }
        if let Some(x) = r.count(t, p, "history_cap") {
            monotone.history_cap = x;
        }
        if let Some(x) = r.positive(t, p, "residual_tol") {
            monotone.residual_tol = x;
            fixed_point.residual_tol = x;
        }
        match r.string(t, p, "linear_method") {
            Some("direct") => linear.method = SolverMethod::Direct,
            Some("cg") => linear.method = SolverMethod::Cg,
            Some(other) => r.err(format!("unknown linear method `{other}` (expected direct or cg)")),
            None => {}
        }
        if let Some(x) = r.positive(t, p, "linear_tol") {
            linear.tol = x;
        }
        if let Some(x) = r.count(t, p, "linear_max_iter") {
            linear.max_iter = x;
        }
        if let Some(x) = r.positive(t, p, "fixed_point_tol") {
            fixed_point.tol = x;
        }
        if let Some(x) = r.count(t, p, "fixed_point_max_iter") {
            fixed_point.max_iter = x;
        }
        if let Some(x) = r.positive(t, p, "damping") {
            if x > 1.0 {
                r.err(format!("`solver.damping` must lie in (0, 1], got {x}"));
            }
            damping = x;
        }
        if let Some(b) = r.flag(t, p, "warm_start") {
            warm_start = b;
        }
    }
    monotone.linear = linear;
    fixed_point.linear = linear;

    // [parabolic]
    let mut parabolic = ParabolicConfig {
        dt: None,
        t_end: None,
        steady_tol: Some(1e-6),
        max_steps: 5_000_000,
        init: InitialData::Harmonic,
        trace_every: 1,
        compare_elliptic: false,
    };
    if let Some(t) = r.section(&root, "parabolic") {
        let p = "parabolic";
        r.check_keys(t, p, &["dt", "t_end", "steady_tol", "max_steps", "init", "trace_every", "compare_elliptic"]);
        parabolic.dt = r.positive(t, p, "dt");
        if let Some(x) = r.number(t, p, "t_end") {
            if !(x.is_finite() && x >= 0.0) {
                r.err(format!("`parabolic.t_end` must be nonnegative, got {x}"));
            }
            parabolic.t_end = Some(x);
            if !t.contains_key("steady_tol") {
                parabolic.steady_tol = None;
            }
        }
        if t.contains_key("steady_tol") {
            parabolic.steady_tol = r.positive(t, p, "steady_tol");
        }
        if let Some(x) = r.count(t, p, "max_steps") {
            parabolic.max_steps = x;
        }
        match r.string(t, p, "init") {
            Some("harmonic") => parabolic.init = InitialData::Harmonic,
            Some("zero") => parabolic.init = InitialData::Zero,
            Some(other) => r.err(format!("unknown initial data `{other}` (expected harmonic or zero)")),
            None => {}
        }
        if let Some(x) = r.count(t, p, "trace_every") {
            parabolic.trace_every = x;
        }
        if let Some(b) = r.flag(t, p, "compare_elliptic") {
            parabolic.compare_elliptic = b;
        }
    }

    // [segregation]
    let mut segregation = SegregationConfig { theta: None, sigma: 0.5, decay_radii: vec![0.25, 0.5, 0.75] };
    if let Some(t) = r.section(&root, "segregation") {
        let p = "segregation";
        r.check_keys(t, p, &["theta", "sigma", "decay_radii"]);
        segregation.theta = r.positive(t, p, "theta");
        if let Some(x) = r.positive(t, p, "sigma") {
            segregation.sigma = x;
        }
        if let Some(list) = r.numbers(t, p, "decay_radii") {
            if list.iter().any(|x| !(*x > 0.0 && *x < 1.0)) {
                r.err("`segregation.decay_radii` entries must lie in (0, 1)");
            }
            segregation.decay_radii = list;
        }
    }

    // [output]
    let mut output = OutputConfig { dir: None, history: true, audit: true, audit_limit: 20, uniqueness_check: false };
    if let Some(t) = r.section(&root, "output") {
        let p = "output";
        r.check_keys(t, p, &["dir", "history", "audit", "audit_limit", "uniqueness_check"]);
        output.dir = r.string(t, p, "dir").map(PathBuf::from);
        if let Some(b) = r.flag(t, p, "history") {
            output.history = b;
        }
        if let Some(b) = r.flag(t, p, "audit") {
            output.audit = b;
        }
        if let Some(x) = r.count(t, p, "audit_limit") {
            output.audit_limit = x;
        }
        if let Some(b) = r.flag(t, p, "uniqueness_check") {
            output.uniqueness_check = b;
        }
    }

    // Consistency between command and the rest.
    match command {
        Command::Sweep => {
            if eps_list.is_empty() {
                r.err("sweep requires `solver.eps_list`");
            }
        }
        _ => {
            if eps.is_none() {
                r.err(format!("{command} requires `solver.eps`"));
            }
        }
    }
    if command == Command::Fb1d {
        if dim != 1 {
            r.err("fb1d requires d=1");
        }
        if species.len() != 2 {
            r.err(format!("fb1d requires exactly two species, got {}", species.len()));
        }
        if kernel.kind != KernelKind::Sup {
            r.err("fb1d requires the sup kernel");
        }
        if dim == 1 && (domain.lower.first().is_some_and(|&a| a > -1.0) || domain.upper.first().is_some_and(|&b| b < 1.0)) {
            r.err("fb1d requires a domain (-a, a) with a >= 1");
        }
    }
    if r.errors.is_empty() {
        Ok(RunConfig {
            command,
            domain,
            kernel,
            species,
            eps,
            eps_list,
            monotone,
            fixed_point,
            damping,
            warm_start,
            parabolic,
            segregation,
            output,
        })
    } else {
        Err(Error::Config(r.errors))
    }
}

fn read_patch(r: &mut Reader, t: &Table, path: &str, dim: usize) -> Option<Patch> {
    r.check_keys(t, path, &["lower", "upper", "value", "axis", "at_lower", "at_upper"]);
    let lower = r.numbers(t, path, "lower");
    let upper = r.numbers(t, path, "upper");
    let (Some(lower), Some(upper)) = (lower, upper) else {
        if !t.contains_key("lower") || !t.contains_key("upper") {
            r.err(format!("`{path}` needs `lower` and `upper`"));
        }
        return None;
    };
    if lower.len() != dim || upper.len() != dim {
        r.err(format!("`{path}` corners must have {dim} coordinates"));
        return None;
    }
    if lower.iter().zip(&upper).any(|(a, b)| a > b) {
        r.err(format!("`{path}` has lower > upper"));
        return None;
    }
    let linear = t.contains_key("axis") || t.contains_key("at_lower") || t.contains_key("at_upper");
    let value = if linear {
        if t.contains_key("value") {
            r.err(format!("`{path}` mixes `value` with a linear profile"));
            return None;
        }
        let axis = match t.get("axis") {
            Some(Value::Integer(a)) if (*a as usize) < dim && *a >= 0 => *a as usize,
            Some(_) => {
                r.err(format!("`{path}.axis` must be an axis index below {dim}"));
                return None;
            }
            None => 0,
        };
        let a = r.number(t, path, "at_lower");
        let b = r.number(t, path, "at_upper");
        let (Some(at_lower), Some(at_upper)) = (a, b) else {
            r.err(format!("`{path}` linear profile needs `at_lower` and `at_upper`"));
            return None;
        };
        if at_lower < 0.0 || at_upper < 0.0 {
            r.err(format!("`{path}` values must be nonnegative"));
        }
        PatchValue::Linear { axis, at_lower, at_upper }
    } else {
        let Some(v) = r.number(t, path, "value") else {
            if !t.contains_key("value") {
                r.err(format!("`{path}` needs `value` or a linear profile"));
            }
            return None;
        };
        if !(v.is_finite() && v >= 0.0) {
            r.err(format!("`{path}.value` must be nonnegative, got {v}"));
        }
        PatchValue::Constant(v)
    };
    Some(Patch { lower, upper, value })
}
