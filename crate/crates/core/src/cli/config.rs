//! Run configuration: per-experiment parameter tables, flat `key = value`
//! config files and typed, range-checked accessors.
//!
//! Precedence, lowest first: built-in default, config file, command-line
//! flag. Keys are the long flag names without the leading dashes.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the command-line layer.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid value for `{field}` ({value}): expected {expected}")]
    Validation {
        field: String,
        value: String,
        expected: String,
    },

    #[error(transparent)]
    Library(#[from] crate::Error),

    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn validation(field: &str, value: impl ToString, expected: impl ToString) -> Self {
        CliError::Validation {
            field: field.to_string(),
            value: value.to_string(),
            expected: expected.to_string(),
        }
    }

    /// 2 for invalid input, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation { .. } => 2,
            CliError::Library(crate::Error::InvalidParameter { .. }) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Experiment {
    DecoupleSweep,
    Evolve,
    Odmr,
    Monolayer,
    McDensity,
    SensitivityMap,
}

/// One configurable parameter.
#[derive(Clone, Copy, Debug)]
pub struct Param {
    pub key: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

const fn p(key: &'static str, default: &'static str, help: &'static str) -> Param {
    Param { key, default, help }
}

const PAIR: &[Param] = &[
    p("s-nm", "2", "radical pair separation, nm"),
    p("theta-rp-deg", "0", "angle of the pair axis to the field, degrees"),
    p(
        "alpha-deg",
        "45",
        "singlet/T0 mixing angle of the initial state, degrees",
    ),
    p("beta-deg", "0", "relative phase of the initial state, degrees"),
    p("lambda", "1", "coherence damping of the initial state, 0..1"),
    p("bz-mt", "40", "static field, mT"),
    p("delta-g-ppm", "0", "g-factor difference, ppm of g_e"),
];

const DECOUPLE: &[Param] = &[
    p("omega1-start-mhz", "0", "first rf amplitude, MHz"),
    p("omega1-stop-mhz", "50", "last rf amplitude, MHz"),
    p("omega1-step-mhz", "1", "rf amplitude step, MHz"),
    p("sequence", "fslg", "decoupling: fslg, lg or off"),
    p("dt-ns", "0.05", "sampling step, ns"),
    p("duration-us", "1", "evolution time, us"),
    p("seed", "1", "random seed (recorded; the run is deterministic)"),
];

const EVOLVE: &[Param] = &[
    p("omega1-mhz", "50", "rf amplitude, MHz"),
    p("sequence", "fslg", "decoupling: fslg, lg or off"),
    p("stride", "20", "write every n-th sample"),
    p("dt-ns", "0.05", "sampling step, ns"),
    p("duration-us", "1", "evolution time, us"),
    p("seed", "1", "random seed (recorded; the run is deterministic)"),
];

const ODMR: &[Param] = &[
    p(
        "alpha-deg",
        "45",
        "singlet/T0 mixing angle of the initial state, degrees",
    ),
    p("beta-deg", "0", "relative phase of the initial state, degrees"),
    p("lambda", "1", "coherence damping of the initial state, 0..1"),
    p("depth-nm", "5", "NV to nearer radical distance, nm"),
    p("s-nm", "2", "radical pair separation, nm"),
    p("bz-mt", "40", "static field, mT"),
    p("delta-g-ppm", "0", "g-factor difference, ppm of g_e"),
    p("omega1-mhz", "50", "FSLG amplitude on the pair, MHz (0 = off)"),
    p("sweep-range-khz", "1000", "half width of the detuning sweep, kHz"),
    p("sweep-step-khz", "10", "detuning step, kHz"),
    p("path", "fast", "fast (rotating frame) or lab (time-dependent drive)"),
    p("dt-ns", "0.05", "integration step of the lab path, ns"),
    p("duration-us", "4", "pi-pulse length, us"),
    p("seed", "1", "random seed (recorded; the run is deterministic)"),
];

const MONOLAYER: &[Param] = &[
    p("termination", "111", "diamond surface: 111 or 001"),
    p("depth-min-nm", "1", "smallest NV depth, nm"),
    p("depth-max-nm", "20", "largest NV depth, nm"),
    p("depth-step-nm", "0.5", "NV depth step, nm"),
    p("mask-nm", "10,20,50", "comma-separated mask diameters, nm"),
    p("linker-nm", "1", "linker length, nm"),
    p("s-nm", "2", "donor-acceptor separation, nm"),
    p("rho-mol-nm2", "0.15", "molecular surface density, 1/nm^2"),
    p("handedness", "1", "+1 or -1"),
    p("numeric", "false", "also evaluate the disk quadrature"),
    p("seed", "1", "random seed (recorded; the run is deterministic)"),
];

const MC_DENSITY: &[Param] = &[
    p(
        "rho-anchor-nm2",
        "0.1,0.25,0.5,0.75,1,1.5,2,2.5,3,3.5,4,4.5,5",
        "comma-separated anchor densities, 1/nm^2",
    ),
    p("d-min-nm", "0.5,1,1.5,2", "comma-separated exclusion distances, nm"),
    p("trials", "1000", "random geometries per point"),
    p("area-nm2", "10000", "simulation box area, nm^2"),
    p("seed", "1", "random seed"),
];

const SENSITIVITY: &[Param] = &[
    p("termination", "111", "diamond surface: 111 or 001"),
    p("extent", "3", "half width of the map in units of depth"),
    p("points", "121", "grid points per axis"),
    p("seed", "1", "random seed (recorded; the run is deterministic)"),
];

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::DecoupleSweep,
        Experiment::Evolve,
        Experiment::Odmr,
        Experiment::Monolayer,
        Experiment::McDensity,
        Experiment::SensitivityMap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::DecoupleSweep => "decouple-sweep",
            Experiment::Evolve => "evolve",
            Experiment::Odmr => "odmr",
            Experiment::Monolayer => "monolayer",
            Experiment::McDensity => "mc-density",
            Experiment::SensitivityMap => "sensitivity-map",
        }
    }

    pub fn about(self) -> &'static str {
        match self {
            Experiment::DecoupleSweep => "time-averaged occupations and polarization against rf amplitude",
            Experiment::Evolve => "occupations and polarization against time",
            Experiment::Odmr => "pulsed ODMR spectrum of the NV next to the radical pair",
            Experiment::Monolayer => "ensemble shift of a masked monolayer against NV depth",
            Experiment::McDensity => "molecular density after anchor exclusion, Monte Carlo",
            Experiment::SensitivityMap => "normalized NV sensitivity across the surface",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }

    pub fn params(self) -> Vec<Param> {
        let own: &[Param] = match self {
            Experiment::DecoupleSweep => DECOUPLE,
            Experiment::Evolve => EVOLVE,
            Experiment::Odmr => return ODMR.to_vec(),
            Experiment::Monolayer => return MONOLAYER.to_vec(),
            Experiment::McDensity => return MC_DENSITY.to_vec(),
            Experiment::SensitivityMap => return SENSITIVITY.to_vec(),
        };
        PAIR.iter().chain(own).copied().collect()
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> CliResult<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::validation(
                &format!("config line {}", n + 1),
                line,
                "a `key = value` pair",
            ));
        };
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Fully resolved parameters of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    values: BTreeMap<String, String>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Applies file entries, then flag entries, over the defaults.
    pub fn resolve(
        experiment: Experiment,
        file: &[(String, String)],
        flags: &[(String, String)],
        out: Option<PathBuf>,
    ) -> CliResult<Self> {
        let params = experiment.params();
        let mut values: BTreeMap<String, String> = params
            .iter()
            .map(|p| (p.key.to_string(), p.default.to_string()))
            .collect();
        for (k, v) in file.iter().chain(flags) {
            if !values.contains_key(k) {
                return Err(CliError::validation(
                    k,
                    v,
                    format!("a parameter of `{experiment}` ({})", keys(&params)),
                ));
            }
            values.insert(k.clone(), v.clone());
        }
        Ok(Self {
            experiment,
            values,
            out,
        })
    }

    pub fn defaults(experiment: Experiment) -> Self {
        Self::resolve(experiment, &[], &[], None).expect("defaults are valid keys")
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> CliResult<()> {
        match self.values.get_mut(key) {
            Some(v) => {
                *v = value.to_string();
                Ok(())
            }
            None => Err(CliError::validation(key, value.to_string(), "a known parameter")),
        }
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("parameter `{key}` is not declared for {}", self.experiment))
    }

    pub fn values(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// `#`-prefixed echo of every resolved parameter.
    pub fn header(&self) -> String {
        let mut s = format!("# ciss-nv {}\n", self.experiment);
        for (k, v) in &self.values {
            s.push_str(&format!("# {k} = {v}\n"));
        }
        s
    }

    pub fn f64(&self, key: &str) -> CliResult<f64> {
        let raw = self.raw(key);
        raw.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| CliError::validation(key, raw, "a finite number"))
    }

    /// Number inside [lo, hi] (either bound may be infinite).
    pub fn f64_in(&self, key: &str, lo: f64, hi: f64) -> CliResult<f64> {
        let x = self.f64(key)?;
        if x < lo || x > hi {
            return Err(CliError::validation(key, x, range_text(lo, hi, false)));
        }
        Ok(x)
    }

    /// Number strictly above `lo` and at most `hi`.
    pub fn f64_pos(&self, key: &str, hi: f64) -> CliResult<f64> {
        let x = self.f64(key)?;
        if !(x > 0.0) || x > hi {
            return Err(CliError::validation(key, x, range_text(0.0, hi, true)));
        }
        Ok(x)
    }

    pub fn usize_in(&self, key: &str, lo: usize, hi: usize) -> CliResult<usize> {
        let raw = self.raw(key);
        let x: usize = raw
            .parse()
            .map_err(|_| CliError::validation(key, raw, "a non-negative integer"))?;
        if x < lo || x > hi {
            return Err(CliError::validation(key, x, format!("an integer in [{lo}, {hi}]")));
        }
        Ok(x)
    }

    pub fn u64(&self, key: &str) -> CliResult<u64> {
        let raw = self.raw(key);
        raw.parse()
            .map_err(|_| CliError::validation(key, raw, "a non-negative integer"))
    }

    pub fn bool(&self, key: &str) -> CliResult<bool> {
        match self.raw(key) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            other => Err(CliError::validation(key, other, "true or false")),
        }
    }

    /// Comma-separated numbers, each inside (lo, hi] or [lo, hi].
    pub fn f64_list(&self, key: &str, lo: f64, hi: f64, open_lo: bool) -> CliResult<Vec<f64>> {
        let raw = self.raw(key);
        let mut out = Vec::new();
        for part in raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let x: f64 = part
                .parse()
                .ok()
                .filter(|x: &f64| x.is_finite())
                .ok_or_else(|| CliError::validation(key, raw, "comma-separated numbers"))?;
            if (open_lo && !(x > lo)) || x < lo || x > hi {
                return Err(CliError::validation(key, x, range_text(lo, hi, open_lo)));
            }
            out.push(x);
        }
        if out.is_empty() {
            return Err(CliError::validation(key, raw, "at least one number"));
        }
        Ok(out)
    }

    pub fn choice<'a>(&self, key: &str, options: &[&'a str]) -> CliResult<&'a str> {
        let raw = self.raw(key);
        options
            .iter()
            .find(|o| **o == raw)
            .copied()
            .ok_or_else(|| CliError::validation(key, raw, format!("one of {}", options.join(", "))))
    }
}

fn keys(params: &[Param]) -> String {
    params.iter().map(|p| p.key).collect::<Vec<_>>().join(", ")
}

fn range_text(lo: f64, hi: f64, open_lo: bool) -> String {
    let l = if open_lo { "(" } else { "[" };
    if hi.is_infinite() {
        format!("a number in {l}{lo}, inf)")
    } else {
        format!("a number in {l}{lo}, {hi}]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kv(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn precedence_flag_over_file_over_default() {
        let file = kv(&[("s-nm", "3"), ("bz-mt", "20")]);
        let flags = kv(&[("s-nm", "4")]);
        let cfg = RunConfig::resolve(Experiment::Evolve, &file, &flags, None).unwrap();
        assert_eq!(cfg.raw("s-nm"), "4");
        assert_eq!(cfg.raw("bz-mt"), "20");
        assert_eq!(cfg.raw("dt-ns"), "0.05");
    }

    #[test]
    fn unknown_key_is_validation_error() {
        let err = RunConfig::resolve(Experiment::Odmr, &kv(&[("bogus", "1")]), &[], None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("bogus"));
    }

    #[test]
    fn parse_config() {
        let text = "# comment\ns-nm = 2.5 # trailing\n\nbz-mt=10\n";
        assert_eq!(
            parse_config_text(text).unwrap(),
            kv(&[("s-nm", "2.5"), ("bz-mt", "10")])
        );
        assert!(parse_config_text("nonsense").is_err());
    }

    #[test]
    fn range_errors_name_field_and_range() {
        let mut cfg = RunConfig::defaults(Experiment::Evolve);
        cfg.set("lambda", "1.5").unwrap();
        let err = cfg.f64_in("lambda", 0.0, 1.0).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("lambda") && text.contains("[0, 1]"), "{text}");
        cfg.set("s-nm", "-1").unwrap();
        assert!(cfg.f64_pos("s-nm", f64::INFINITY).is_err());
    }

    #[test]
    fn lists_parse() {
        let cfg = RunConfig::defaults(Experiment::McDensity);
        let rho = cfg.f64_list("rho-anchor-nm2", 0.0, f64::INFINITY, true).unwrap();
        assert_eq!(rho.first(), Some(&0.1));
        assert_eq!(rho.last(), Some(&5.0));
    }

    #[test]
    fn header_echoes_everything() {
        let cfg = RunConfig::defaults(Experiment::Odmr);
        let h = cfg.header();
        for p in Experiment::Odmr.params() {
            assert!(h.contains(&format!("# {} = {}\n", p.key, p.default)));
        }
    }
}
