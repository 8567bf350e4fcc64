use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::hchart::{Grid, PolarChart};
use crate::solver::{BoundaryData, ContinuationConfig, Expr, PsiSpec, RadialProfile};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self { line: Some(line), message: message.into() }
    }

    fn global(message: impl Into<String>) -> Self {
        Self { line: None, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Solve,
    Verify,
    Study,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "solve" => Ok(Mode::Solve),
            "verify" => Ok(Mode::Verify),
            "study" => Ok(Mode::Study),
            _ => Err(format!("unknown mode `{s}` (expected solve, verify or study)")),
        }
    }
}

/// Right-hand side as written in the config.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PsiConfig {
    Power { p: f64, h: String },
    Exponential { p: f64, h: String },
    /// `psi = sigma_k` of the radial profile, tabulated on a grid `refine`
    /// times finer.
    Manufactured { profile: Vec<f64>, refine: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub n: usize,
    pub k: usize,
    pub rho_max: f64,
    pub n_rho: usize,
    pub n_theta: usize,
    pub psi: PsiConfig,
    pub boundary: BoundaryData,
    pub continuation: ContinuationConfig,
    #[serde(skip)]
    pub out: PathBuf,
    pub seed: u64,
    /// Perturbed starts for the uniqueness probe in verify mode; 0 skips it.
    pub starts: usize,
    pub study_grids: Vec<usize>,
    /// Amplitude of a bump added to the solution before verification.
    pub corrupt_bump: f64,
    pub warnings: Vec<String>,
}

impl RunConfig {
    pub fn grid(&self) -> crate::Result<Grid> {
        Grid::new(PolarChart::new(self.n, self.rho_max)?, self.n_rho, self.n_theta)
    }

    pub fn psi_spec(&self, grid: &Grid) -> crate::Result<PsiSpec> {
        Ok(match &self.psi {
            PsiConfig::Power { p, h } => PsiSpec::power(*p, h)?,
            PsiConfig::Exponential { p, h } => PsiSpec::exponential(*p, h)?,
            PsiConfig::Manufactured { profile, refine } => {
                let prof = RadialProfile::new(profile.clone());
                let values = crate::solver::manufactured_psi_refined(grid, &prof, self.k, *refine)?;
                PsiSpec::tabulated(values, format!("manufactured from {profile:?}, refine {refine}"))
            }
        })
    }

    /// Exact solution when the right-hand side is manufactured.
    pub fn reference(&self) -> Option<RadialProfile> {
        match &self.psi {
            PsiConfig::Manufactured { profile, .. } => Some(RadialProfile::new(profile.clone())),
            _ => None,
        }
    }

    /// Applies a `--grid` override and revalidates it.
    pub fn set_grid(&mut self, n_rho: usize, n_theta: usize) -> Result<(), ConfigError> {
        check_grid_size(n_rho, n_theta).map_err(ConfigError::global)?;
        self.n_rho = n_rho;
        self.n_theta = n_theta;
        Ok(())
    }
}

pub fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("grid `{s}` must look like NxM"))?;
    let a = a.trim().parse::<usize>().map_err(|e| format!("grid `{s}`: {e}"))?;
    let b = b.trim().parse::<usize>().map_err(|e| format!("grid `{s}`: {e}"))?;
    check_grid_size(a, b)?;
    Ok((a, b))
}

fn check_grid_size(n_rho: usize, n_theta: usize) -> Result<(), String> {
    if !(4..=1024).contains(&n_rho) {
        return Err(format!("radial node count {n_rho} not in 4..=1024"));
    }
    if !(4..=1024).contains(&n_theta) || n_theta % 2 != 0 {
        return Err(format!("angular node count {n_theta} must be even and in 4..=1024"));
    }
    Ok(())
}

const KEYS: &[(&str, &[&str])] = &[
    ("problem", &["n", "k", "rho_max", "grid"]),
    ("psi", &["family", "p", "h", "profile", "refine"]),
    ("boundary", &["kind", "c", "profile"]),
    (
        "continuation",
        &["dt_init", "dt_min", "tolerance", "max_newton", "damping_floor", "direct_first"],
    ),
    ("run", &["mode", "out", "seed", "starts", "study_grids"]),
    ("verify", &["corrupt_bump"]),
];

#[derive(Debug, Clone)]
struct Entry {
    section: &'static str,
    key: &'static str,
    value: String,
    line: usize,
}

struct Entries(Vec<Entry>);

impl Entries {
    fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.0.iter().find(|e| e.section == section && e.key == key)
    }

    fn required(&self, section: &str, key: &str) -> Result<&Entry, ConfigError> {
        self.get(section, key)
            .ok_or_else(|| ConfigError::global(format!("missing required key `{key}` in [{section}]")))
    }

    fn parse<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<(T, usize)>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.get(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(|v| Some((v, e.line)))
                .map_err(|err| ConfigError::at(e.line, format!("{key} = `{}`: {err}", e.value))),
        }
    }

    fn parse_required<T: FromStr>(&self, section: &str, key: &str) -> Result<(T, usize), ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.required(section, key)?;
        Ok(self.parse(section, key)?.expect("checked above"))
    }

    fn list(&self, section: &str, key: &str) -> Result<Option<(Vec<f64>, usize)>, ConfigError> {
        let Some(e) = self.get(section, key) else { return Ok(None) };
        let vals = e
            .value
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|err| ConfigError::at(e.line, format!("{key}: {err}")))?;
        Ok(Some((vals, e.line)))
    }
}

fn in_range(line: usize, key: &str, v: f64, lo: f64, hi: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && (lo..=hi).contains(&v) {
        Ok(v)
    } else {
        Err(ConfigError::at(line, format!("{key} = {v} not in [{lo}, {hi}]")))
    }
}

fn lex(text: &str) -> Result<Entries, ConfigError> {
    let mut section: Option<&'static str> = None;
    let mut out: Vec<Entry> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let s = raw.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        if let Some(name) = s.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::at(line, format!("malformed section header `{s}`")))?
                .trim();
            let known = KEYS
                .iter()
                .find(|(n, _)| *n == name)
                .ok_or_else(|| ConfigError::at(line, format!("unknown section [{name}]")))?;
            section = Some(known.0);
            continue;
        }
        let (key, value) = s
            .split_once('=')
            .ok_or_else(|| ConfigError::at(line, format!("expected key = value, got `{s}`")))?;
        let (key, value) = (key.trim(), value.trim());
        let sec = section.ok_or_else(|| ConfigError::at(line, format!("key `{key}` outside any section")))?;
        let keys = KEYS.iter().find(|(n, _)| *n == sec).expect("known section").1;
        let key = *keys
            .iter()
            .find(|k| **k == key)
            .ok_or_else(|| ConfigError::at(line, format!("unknown key `{key}` in [{sec}]")))?;
        if out.iter().any(|e| e.section == sec && e.key == key) {
            return Err(ConfigError::at(line, format!("duplicate key `{key}` in [{sec}]")));
        }
        if value.is_empty() {
            return Err(ConfigError::at(line, format!("empty value for `{key}`")));
        }
        out.push(Entry { section: sec, key, value: value.to_string(), line });
    }
    Ok(Entries(out))
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::global(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let e = lex(text)?;
    let mut warnings = Vec::new();

    let (n, n_line) = e.parse::<usize>("problem", "n")?.unwrap_or((2, 0));
    if n != 2 {
        return Err(ConfigError::at(n_line, format!("n = {n}: only n = 2 is supported")));
    }
    let (k, k_line) = e.parse_required::<usize>("problem", "k")?;
    if !(1..=n).contains(&k) {
        return Err(ConfigError::at(k_line, format!("k = {k} not in 1..={n}")));
    }
    let (rho_max, line) = e.parse_required::<f64>("problem", "rho_max")?;
    let rho_max = in_range(line, "rho_max", rho_max, 1e-3, 5.0)?;
    let grid = e.required("problem", "grid")?;
    let (n_rho, n_theta) = parse_grid(&grid.value).map_err(|m| ConfigError::at(grid.line, m))?;

    let family = e.required("psi", "family")?;
    let psi = match family.value.as_str() {
        "power" | "exponential" => {
            let (p, line) = e.parse::<f64>("psi", "p")?.unwrap_or((0.0, 0));
            let p = in_range(line, "p", p, 0.0, 64.0)?;
            let h = e.required("psi", "h")?;
            Expr::parse(&h.value).map_err(|err| ConfigError::at(h.line, format!("h: {err}")))?;
            for key in ["profile", "refine"] {
                if let Some(x) = e.get("psi", key) {
                    return Err(ConfigError::at(x.line, format!("`{key}` only applies to the manufactured family")));
                }
            }
            if p > 0.0 && p < k as f64 {
                warnings.push(format!(
                    "psi exponent p = {p} < k = {k}: growth condition p >= k violated, run flagged"
                ));
            }
            if family.value == "power" {
                PsiConfig::Power { p, h: h.value.clone() }
            } else {
                PsiConfig::Exponential { p, h: h.value.clone() }
            }
        }
        "manufactured" => {
            let (profile, line) = e
                .list("psi", "profile")?
                .ok_or_else(|| ConfigError::global("missing required key `profile` in [psi]"))?;
            if profile.is_empty() || profile.len() > 8 || profile.iter().any(|c| !c.is_finite()) {
                return Err(ConfigError::at(line, "profile needs 1..=8 finite coefficients"));
            }
            let (refine, line) = e.parse::<usize>("psi", "refine")?.unwrap_or((4, 0));
            if !(2..=8).contains(&refine) || refine % 2 != 0 {
                return Err(ConfigError::at(line, format!("refine = {refine} must be even and in 2..=8")));
            }
            for key in ["p", "h"] {
                if let Some(x) = e.get("psi", key) {
                    return Err(ConfigError::at(x.line, format!("`{key}` does not apply to the manufactured family")));
                }
            }
            PsiConfig::Manufactured { profile, refine }
        }
        other => {
            return Err(ConfigError::at(
                family.line,
                format!("unknown psi family `{other}` (expected power, exponential or manufactured)"),
            ))
        }
    };

    let kind = e.required("boundary", "kind")?;
    let boundary = match kind.value.as_str() {
        "constant" | "hyperplane" => {
            let (c, line) = e.parse_required::<f64>("boundary", "c")?;
            let c = in_range(line, "c", c, 1e-6, 1e6)?;
            if kind.value == "constant" {
                BoundaryData::Constant { c }
            } else {
                BoundaryData::Hyperplane { c }
            }
        }
        "radial" => {
            let (coeffs, line) = e
                .list("boundary", "profile")?
                .ok_or_else(|| ConfigError::global("missing required key `profile` in [boundary]"))?;
            if coeffs.is_empty() || coeffs.len() > 8 || coeffs.iter().any(|c| !c.is_finite()) {
                return Err(ConfigError::at(line, "profile needs 1..=8 finite coefficients"));
            }
            BoundaryData::Radial { profile: RadialProfile::new(coeffs) }
        }
        "manufactured" => match &psi {
            PsiConfig::Manufactured { profile, .. } => BoundaryData::Radial {
                profile: RadialProfile::new(profile.clone()),
            },
            _ => {
                return Err(ConfigError::at(kind.line, "boundary kind `manufactured` needs psi family `manufactured`"))
            }
        },
        other => {
            return Err(ConfigError::at(
                kind.line,
                format!("unknown boundary kind `{other}` (expected constant, hyperplane, radial or manufactured)"),
            ))
        }
    };

    let mut cont = ContinuationConfig::default();
    if let Some((v, line)) = e.parse::<f64>("continuation", "dt_init")? {
        cont.dt_init = in_range(line, "dt_init", v, 1e-6, 1.0)?;
    }
    if let Some((v, line)) = e.parse::<f64>("continuation", "dt_min")? {
        cont.dt_min = in_range(line, "dt_min", v, 1e-9, cont.dt_init)?;
    }
    if let Some(t) = e.get("continuation", "tolerance") {
        if t.value != "auto" {
            let (v, line) = e.parse::<f64>("continuation", "tolerance")?.expect("present");
            cont.tolerance = Some(in_range(line, "tolerance", v, 1e-15, 1e-2)?);
        }
    }
    if let Some((v, line)) = e.parse::<usize>("continuation", "max_newton")? {
        if !(1..=500).contains(&v) {
            return Err(ConfigError::at(line, format!("max_newton = {v} not in 1..=500")));
        }
        cont.max_newton = v;
    }
    if let Some((v, line)) = e.parse::<f64>("continuation", "damping_floor")? {
        cont.damping_floor = in_range(line, "damping_floor", v, 1e-12, 0.5)?;
    }
    if let Some((v, _)) = e.parse::<bool>("continuation", "direct_first")? {
        cont.direct_first = v;
    }
    cont.validate().map_err(|err| ConfigError::global(err.to_string()))?;

    let mode = match e.get("run", "mode") {
        Some(m) => m.value.parse::<Mode>().map_err(|err| ConfigError::at(m.line, err))?,
        None => Mode::Solve,
    };
    let out = e.get("run", "out").map(|x| PathBuf::from(&x.value)).unwrap_or_else(|| PathBuf::from("out"));
    let seed = e.parse::<u64>("run", "seed")?.map(|x| x.0).unwrap_or(0);
    let starts = match e.parse::<usize>("run", "starts")? {
        Some((v, line)) if v > 64 => return Err(ConfigError::at(line, format!("starts = {v} not in 0..=64"))),
        Some((v, _)) => v,
        None => 0,
    };
    let study_grids = match e.get("run", "study_grids") {
        None => vec![32, 64, 128],
        Some(x) => {
            let grids = x
                .value
                .split(',')
                .map(|t| t.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|err| ConfigError::at(x.line, format!("study_grids: {err}")))?;
            if grids.len() < 2 {
                return Err(ConfigError::at(x.line, "study_grids needs at least two sizes"));
            }
            for (i, &g) in grids.iter().enumerate() {
                check_grid_size(g, g).map_err(|m| ConfigError::at(x.line, m))?;
                if i > 0 && g <= grids[i - 1] {
                    return Err(ConfigError::at(x.line, "study_grids must be increasing"));
                }
            }
            grids
        }
    };
    let corrupt_bump = match e.parse::<f64>("verify", "corrupt_bump")? {
        Some((v, line)) => in_range(line, "corrupt_bump", v, -1.0, 1.0)?,
        None => 0.0,
    };

    Ok(RunConfig {
        mode,
        n,
        k,
        rho_max,
        n_rho,
        n_theta,
        psi,
        boundary,
        continuation: cont,
        out,
        seed,
        starts,
        study_grids,
        corrupt_bump,
        warnings,
    })
}
