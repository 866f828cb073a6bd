//! Line-oriented `key = value` run configuration with bracket sections for
//! kernels.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use lrbs_core::geometry::{Boundary, Geometry};
use lrbs_core::kernel::{CompetitionKernel, DispersalKernel, OffsetMap};
use lrbs_core::logistic::occupancy_margins;
use lrbs_core::model::{derived_constants, ModelParams};
use lrbs_core::rng::{streams, RngKeyStream};
use lrbs_core::{CountField, Field64};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Simulate,
    Cml,
    Couple,
    TwoSpecies,
    Logistic,
    Lemma7,
    Percolation,
    SurvivalSweep,
    CoexistenceSweep,
    CompleteConvergence,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Cml => "cml",
            ExperimentKind::Couple => "couple",
            ExperimentKind::TwoSpecies => "two-species",
            ExperimentKind::Logistic => "logistic",
            ExperimentKind::Lemma7 => "lemma7",
            ExperimentKind::Percolation => "percolation",
            ExperimentKind::SurvivalSweep => "survival-sweep",
            ExperimentKind::CoexistenceSweep => "coexistence-sweep",
            ExperimentKind::CompleteConvergence => "complete-convergence",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simulate" => Ok(ExperimentKind::Simulate),
            "cml" => Ok(ExperimentKind::Cml),
            "couple" => Ok(ExperimentKind::Couple),
            "two-species" => Ok(ExperimentKind::TwoSpecies),
            "logistic" => Ok(ExperimentKind::Logistic),
            "lemma7" => Ok(ExperimentKind::Lemma7),
            "percolation" => Ok(ExperimentKind::Percolation),
            "survival-sweep" => Ok(ExperimentKind::SurvivalSweep),
            "coexistence-sweep" => Ok(ExperimentKind::CoexistenceSweep),
            "complete-convergence" => Ok(ExperimentKind::CompleteConvergence),
            other => Err(format!("unknown experiment '{other}'")),
        }
    }
}

const SCALAR_KEYS: &[&str] = &[
    "experiment",
    "seed",
    "m",
    "m1",
    "m2",
    "steps",
    "replicas",
    "extent",
    "boundary",
    "init",
    "init1",
    "init2",
    "m_tilde",
    "delta",
    "k_threshold",
    "eps",
    "eps1",
    "eps2",
    "tol",
    "window_radius",
    "snapshots",
    "early_stop",
    "theta",
    "radius",
    "horizon",
    "cone_slope",
    "from_time",
    "condition_on_survival",
    "lambda0_list",
    "cross_list",
    "burn_in",
    "block_eps2",
    "block_delta",
    "block_k",
    "block_spacing",
    "diagnostics",
];

const KERNEL_SECTIONS: &[&str] = &[
    "dispersal",
    "dispersal1",
    "dispersal2",
    "competition",
    "competition11",
    "competition12",
    "competition21",
    "competition22",
];

/// Initial-condition spec: `constant:<v>`, `point:<v>`, `poisson:<mean>`,
/// or `checker:<base>,<amplitude>` (base plus/minus amplitude by parity).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitSpec {
    Constant(f64),
    Point(f64),
    Poisson(f64),
    Checker(f64, f64),
}

impl FromStr for InitSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, arg) = s
            .split_once(':')
            .ok_or_else(|| format!("init spec '{s}' needs the form kind:value"))?;
        let bad = |_| format!("init spec '{s}' has a malformed number");
        match kind {
            "constant" => Ok(InitSpec::Constant(arg.parse().map_err(bad)?)),
            "point" => Ok(InitSpec::Point(arg.parse().map_err(bad)?)),
            "poisson" => Ok(InitSpec::Poisson(arg.parse().map_err(bad)?)),
            "checker" => {
                let (a, b) = arg
                    .split_once(',')
                    .ok_or_else(|| format!("init spec '{s}' needs base,amplitude"))?;
                Ok(InitSpec::Checker(a.parse().map_err(bad)?, b.parse().map_err(bad)?))
            }
            other => Err(format!("unknown init kind '{other}'")),
        }
    }
}

impl InitSpec {
    /// Integer field; the Poisson variant draws per site on the init
    /// stream of `rng`, keyed by `arm` so distinct arms are independent.
    pub fn count_field(&self, geometry: &Geometry, rng: &RngKeyStream, arm: u64) -> CountField {
        let init = rng.stream(streams::INIT);
        CountField::from_fn(geometry.clone(), |coords| match *self {
            InitSpec::Constant(v) => v.round().max(0.0) as u64,
            InitSpec::Point(v) => {
                if coords.iter().all(|&c| c == 0) {
                    v.round().max(0.0) as u64
                } else {
                    0
                }
            }
            InitSpec::Poisson(mean) => init.poisson(mean, arm, coords, 0),
            InitSpec::Checker(base, amp) => {
                let parity = coords.iter().sum::<i64>().rem_euclid(2);
                let v = if parity == 0 { base + amp } else { base - amp };
                v.round().max(0.0) as u64
            }
        })
    }

    pub fn real_field(&self, geometry: &Geometry, rng: &RngKeyStream, arm: u64) -> Field64 {
        let init = rng.stream(streams::INIT);
        Field64::from_fn(geometry.clone(), |coords| match *self {
            InitSpec::Constant(v) => v.max(0.0),
            InitSpec::Point(v) => {
                if coords.iter().all(|&c| c == 0) {
                    v.max(0.0)
                } else {
                    0.0
                }
            }
            InitSpec::Poisson(mean) => init.poisson(mean, arm, coords, 0) as f64,
            InitSpec::Checker(base, amp) => {
                let parity = coords.iter().sum::<i64>().rem_euclid(2);
                (if parity == 0 { base + amp } else { base - amp }).max(0.0)
            }
        })
    }
}

/// A parsed and validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    values: BTreeMap<String, String>,
    pub kernels: BTreeMap<String, Vec<(Vec<i64>, f64)>>,
}

impl RunConfig {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn f64(&self, key: &str) -> CliResult<Option<f64>> {
        self.parse_opt(key)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> CliResult<f64> {
        Ok(self.parse_opt(key)?.unwrap_or(default))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> CliResult<u64> {
        Ok(self.parse_opt(key)?.unwrap_or(default))
    }

    pub fn u32_or(&self, key: &str, default: u32) -> CliResult<u32> {
        Ok(self.parse_opt(key)?.unwrap_or(default))
    }

    pub fn i64_or(&self, key: &str, default: i64) -> CliResult<i64> {
        Ok(self.parse_opt(key)?.unwrap_or(default))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> CliResult<bool> {
        match self.get(key) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(other) => Err(CliError::ConfigGeneral(format!(
                "key '{key}' must be true or false, got '{other}'"
            ))),
        }
    }

    fn parse_opt<T: FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                CliError::ConfigGeneral(format!("key '{key}' has malformed value '{raw}'"))
            }),
        }
    }

    pub fn require_f64(&self, key: &str) -> CliResult<f64> {
        self.f64(key)?
            .ok_or_else(|| CliError::ConfigGeneral(format!("key '{key}' is required")))
    }

    pub fn list_f64(&self, key: &str) -> CliResult<Option<Vec<f64>>> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|_| {
                    CliError::ConfigGeneral(format!("key '{key}' has a malformed list '{raw}'"))
                }),
        }
    }

    pub fn list_u64(&self, key: &str) -> CliResult<Option<Vec<u64>>> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .split(',')
                .map(|p| p.trim().parse::<u64>())
                .collect::<Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|_| {
                    CliError::ConfigGeneral(format!("key '{key}' has a malformed list '{raw}'"))
                }),
        }
    }

    pub fn extent(&self) -> CliResult<Vec<usize>> {
        let raw = self
            .get("extent")
            .ok_or_else(|| CliError::ConfigGeneral("key 'extent' is required".into()))?;
        raw.split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| CliError::ConfigGeneral(format!("malformed extent '{raw}'")))
    }

    pub fn boundary(&self) -> CliResult<Boundary> {
        match self.get("boundary") {
            None | Some("periodic") => Ok(Boundary::Periodic),
            Some("absorbing") => Ok(Boundary::Absorbing),
            Some(other) => Err(CliError::ConfigGeneral(format!(
                "boundary must be periodic or absorbing, got '{other}'"
            ))),
        }
    }

    pub fn geometry(&self) -> CliResult<Geometry> {
        Ok(Geometry::new(self.extent()?, self.boundary()?))
    }

    pub fn init(&self, key: &str) -> CliResult<InitSpec> {
        let raw = self
            .get(key)
            .ok_or_else(|| CliError::ConfigGeneral(format!("key '{key}' is required")))?;
        raw.parse().map_err(CliError::ConfigGeneral)
    }

    pub fn dispersal(&self, section: &str) -> CliResult<DispersalKernel<f64>> {
        let dim = self.extent()?.len();
        let entries = self.kernel_entries(section)?;
        Ok(DispersalKernel::new(dim, entries)?)
    }

    pub fn competition(&self, section: &str) -> CliResult<CompetitionKernel<f64>> {
        let dim = self.extent()?.len();
        let entries = self.kernel_entries(section)?;
        Ok(CompetitionKernel::from_raw(dim, entries)?)
    }

    pub fn cross_kernel(&self, section: &str) -> CliResult<OffsetMap<f64>> {
        let dim = self.extent()?.len();
        match self.kernels.get(section) {
            None => Ok(OffsetMap::empty(dim)),
            Some(entries) => Ok(OffsetMap::new(dim, entries.clone())?),
        }
    }

    fn kernel_entries(&self, section: &str) -> CliResult<Vec<(Vec<i64>, f64)>> {
        self.kernels.get(section).cloned().ok_or_else(|| {
            CliError::ConfigGeneral(format!("kernel section [{section}] is required"))
        })
    }

    /// Single-species model from the `m`, `[dispersal]` and `[competition]`
    /// entries.
    pub fn params(&self) -> CliResult<ModelParams<f64>> {
        let m = self.require_f64("m")?;
        Ok(ModelParams::new(
            m,
            self.dispersal("dispersal")?,
            self.competition("competition")?,
            self.geometry()?,
        )?)
    }

    pub fn snapshot_steps(&self) -> CliResult<Vec<u64>> {
        Ok(self.list_u64("snapshots")?.unwrap_or_default())
    }

    /// Echo of the validated configuration with all derived constants.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "experiment = {}", self.kind.name());
        let _ = writeln!(out, "seed = {}", self.seed);
        for (key, value) in &self.values {
            if key != "experiment" && key != "seed" {
                let _ = writeln!(out, "{key} = {value}");
            }
        }
        for (name, entries) in &self.kernels {
            let _ = writeln!(out, "[{name}]");
            for (off, w) in entries {
                let coords =
                    off.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
                let _ = writeln!(out, "{coords}: {w}");
            }
        }
        if let Ok(params) = self.params() {
            let d = params.derived();
            let _ = writeln!(out, "# derived: max_offspring = {}", d.max_offspring);
            let _ = writeln!(out, "# derived: cutoff = {}", d.cutoff);
            let _ = writeln!(out, "# derived: equilibrium = {}", d.equilibrium);
            let _ = writeln!(out, "# derived: equilibrium_on_site = {}", d.equilibrium_on_site);
            let m = params.m;
            if m > 1.0 {
                let m_tilde = self
                    .f64("m_tilde")
                    .ok()
                    .flatten()
                    .unwrap_or(((1.0 + m) / 2.0).clamp(1.0 + 1e-9, m - 1e-9));
                let delta = self.f64("delta").ok().flatten().unwrap_or(0.1);
                if let Ok(margins) = occupancy_margins(m, delta, m_tilde, &params.dispersal) {
                    let _ = writeln!(out, "# derived: n_star = {}", margins.n_star);
                    let _ = writeln!(out, "# derived: eps1 = {}", margins.eps1);
                    let _ = writeln!(out, "# derived: eps2 = {}", margins.eps2);
                }
            }
        } else if let Ok(Some(m)) = self.f64("m") {
            let d = derived_constants(m, 1.0, 0.0);
            let _ = writeln!(out, "# derived: normalized equilibrium = {}", d.equilibrium);
        }
        out
    }
}

/// Parse the line-oriented configuration text.
pub fn parse_config(text: &str) -> CliResult<RunConfig> {
    let mut values: BTreeMap<String, String> = BTreeMap::new();
    let mut kernels: BTreeMap<String, Vec<(Vec<i64>, f64)>> = BTreeMap::new();
    let mut section: Option<String> = None;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.split_once('#') {
            Some((head, _)) => head.trim(),
            None => raw_line.trim(),
        };
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim();
            if !KERNEL_SECTIONS.contains(&name) {
                return Err(CliError::Config {
                    line: line_no,
                    message: format!("unknown section [{name}]"),
                });
            }
            if kernels.contains_key(name) {
                return Err(CliError::Config {
                    line: line_no,
                    message: format!("duplicate section [{name}]"),
                });
            }
            kernels.insert(name.to_string(), Vec::new());
            section = Some(name.to_string());
            continue;
        }
        if let Some(name) = &section {
            if let Some((offsets, weight)) = line.split_once(':') {
                let offset: Result<Vec<i64>, _> =
                    offsets.split(',').map(|p| p.trim().parse::<i64>()).collect();
                let weight = weight.trim().parse::<f64>();
                match (offset, weight) {
                    (Ok(offset), Ok(weight)) => {
                        kernels.get_mut(name).expect("section exists").push((offset, weight));
                        continue;
                    }
                    _ => {
                        return Err(CliError::Config {
                            line: line_no,
                            message: format!("malformed kernel entry '{line}'"),
                        })
                    }
                }
            }
            // a key = value line ends the section
            if !line.contains('=') {
                return Err(CliError::Config {
                    line: line_no,
                    message: format!("malformed kernel entry '{line}'"),
                });
            }
            section = None;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config {
                line: line_no,
                message: format!("expected key = value, got '{line}'"),
            });
        };
        let key = key.trim();
        let value = value.trim();
        if !SCALAR_KEYS.contains(&key) {
            return Err(CliError::Config { line: line_no, message: format!("unknown key '{key}'") });
        }
        if values.insert(key.to_string(), value.to_string()).is_some() {
            return Err(CliError::Config {
                line: line_no,
                message: format!("duplicate key '{key}'"),
            });
        }
    }

    let kind: ExperimentKind = values
        .get("experiment")
        .ok_or_else(|| CliError::ConfigGeneral("key 'experiment' is required".into()))?
        .parse()
        .map_err(CliError::ConfigGeneral)?;
    let seed: u64 = values
        .get("seed")
        .ok_or_else(|| CliError::ConfigGeneral("seed required".into()))?
        .parse()
        .map_err(|_| CliError::ConfigGeneral("seed must be a 64-bit unsigned integer".into()))?;

    let config = RunConfig { kind, seed, values, kernels };

    // validate any kernels present against their contracts
    for name in config.kernels.keys() {
        if name.starts_with("dispersal") {
            config.dispersal(name)?;
        } else if name == "competition12" || name == "competition21" {
            config.cross_kernel(name)?;
        } else {
            config.competition(name)?;
        }
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
experiment = simulate
seed = 1
m = 2.0
steps = 10
replicas = 2
extent = 16
init = constant:100
[dispersal]
-1: 0.25
0: 0.5
1: 0.25
[competition]
0: 0.01
";

    #[test]
    fn parses_minimal_and_echoes_constants() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.kind, ExperimentKind::Simulate);
        assert_eq!(cfg.seed, 1);
        let echo = cfg.echo();
        assert!(echo.contains("equilibrium = 100"), "echo: {echo}");
        assert!(echo.contains("cutoff = 200"));
        assert!(echo.contains("n_star = 4"));
    }

    #[test]
    fn missing_seed_is_an_error() {
        let text = MINIMAL.replace("seed = 1\n", "");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("seed required"));
    }

    #[test]
    fn unknown_key_is_an_error() {
        let text = format!("{MINIMAL}frobnicate = 3\n");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("unknown key 'frobnicate'"));
    }

    #[test]
    fn nonzero_mean_kernel_names_the_clause() {
        let text = MINIMAL.replace("-1: 0.25", "-1: 0.15").replace("1: 0.25", "1: 0.35");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("(A1)"), "got: {err}");
    }

    #[test]
    fn zero_on_site_competition_names_the_clause() {
        let text = MINIMAL.replace("[competition]\n0: 0.01", "[competition]\n0: 0");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("(A2)"), "got: {err}");
    }

    #[test]
    fn init_specs_parse() {
        assert_eq!("constant:5".parse::<InitSpec>().unwrap(), InitSpec::Constant(5.0));
        assert_eq!("point:10".parse::<InitSpec>().unwrap(), InitSpec::Point(10.0));
        assert_eq!("poisson:99.5".parse::<InitSpec>().unwrap(), InitSpec::Poisson(99.5));
        assert_eq!(
            "checker:200,10".parse::<InitSpec>().unwrap(),
            InitSpec::Checker(200.0, 10.0)
        );
        assert!("bogus".parse::<InitSpec>().is_err());
    }
}
