//! Line-oriented run configuration: one `section.key = value` per line, `#`
//! starts a comment.

use std::collections::BTreeMap;
use std::path::PathBuf;

use parastokes::domain::{build_box_domain, build_quotient_domain, Domain};
use parastokes::lattice::LatticeSpec;
use parastokes::solver::FlowPreset;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `section.key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown field `{field}`")]
    UnknownField { line: usize, field: String },
    #[error("line {line}: `{field}` is set twice (first on line {first})")]
    Duplicate { line: usize, field: String, first: usize },
    #[error("line {line}: `{field}`: {msg}")]
    Value { line: usize, field: String, msg: String },
    #[error("missing mandatory field `{0}`")]
    Missing(&'static str),
    #[error("`{field}`: {msg}")]
    Inconsistent { field: &'static str, msg: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainKind {
    Box,
    Cylinder,
    Torus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverMode {
    Linear,
    Nonlinear,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Forcing {
    Preset(FlowPreset),
    /// Constant vector forcing.
    Inline([f64; 3]),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub kind: DomainKind,
    pub extent: [f64; 3],
    pub rank: usize,
    pub anti_flags: Vec<bool>,
    pub h: f64,
    pub dt: f64,
    pub horizon: f64,
    pub k: f64,
    pub forcing: Forcing,
    pub amplitude: f64,
    /// Rescale the forcing to this fraction of `1/(16 C1² C2)`.
    pub limit_fraction: Option<f64>,
    pub mode: SolverMode,
    pub max_iter: usize,
    pub tol: f64,
    pub quad_tol: f64,
    pub output_dir: PathBuf,
}

const FIELDS: [&str; 17] = [
    "domain.kind",
    "domain.extent",
    "lattice.rank",
    "lattice.anti_flags",
    "grid.h",
    "grid.dt",
    "time.horizon",
    "kernel.k",
    "forcing.preset",
    "forcing.coefficients",
    "forcing.amplitude",
    "forcing.limit_fraction",
    "solver.mode",
    "solver.max_iter",
    "solver.tol",
    "quad.tol",
    "output.dir",
];

struct Entries(BTreeMap<&'static str, (usize, String)>);

impl Entries {
    fn get(&self, field: &'static str) -> Option<(usize, &str)> {
        self.0.get(field).map(|(l, v)| (*l, v.as_str()))
    }

    fn value_err(&self, field: &'static str, msg: impl Into<String>) -> ConfigError {
        let line = self.0.get(field).map_or(0, |e| e.0);
        ConfigError::Value { line, field: field.into(), msg: msg.into() }
    }

    fn real(&self, field: &'static str) -> Result<Option<f64>, ConfigError> {
        let Some((_, v)) = self.get(field) else { return Ok(None) };
        match v.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(Some(x)),
            _ => Err(self.value_err(field, format!("`{v}` is not a finite number"))),
        }
    }

    fn positive(&self, field: &'static str) -> Result<Option<f64>, ConfigError> {
        match self.real(field)? {
            Some(x) if x <= 0.0 => Err(self.value_err(field, format!("must be positive, got {x}"))),
            x => Ok(x),
        }
    }

    fn mandatory(&self, field: &'static str) -> Result<f64, ConfigError> {
        self.positive(field)?.ok_or(ConfigError::Missing(field))
    }

    fn list<T>(&self, field: &'static str, parse: impl Fn(&str) -> Option<T>) -> Result<Option<Vec<T>>, ConfigError> {
        let Some((_, v)) = self.get(field) else { return Ok(None) };
        if v.is_empty() {
            return Ok(Some(Vec::new()));
        }
        v.split(',')
            .map(|s| parse(s.trim()).ok_or_else(|| self.value_err(field, format!("cannot parse `{}`", s.trim()))))
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    fn reals3(&self, field: &'static str) -> Result<Option<[f64; 3]>, ConfigError> {
        match self.list(field, |s| s.parse::<f64>().ok().filter(|x| x.is_finite()))? {
            None => Ok(None),
            Some(v) if v.len() == 3 => Ok(Some([v[0], v[1], v[2]])),
            Some(v) => Err(self.value_err(field, format!("expected 3 values, got {}", v.len()))),
        }
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" | "1" | "anti" => Some(true),
        "false" | "0" | "periodic" => Some(false),
        _ => None,
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map: BTreeMap<&'static str, (usize, String)> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax { line, text: content.into() });
            };
            let key = key.trim();
            if !key.contains('.') {
                return Err(ConfigError::Syntax { line, text: content.into() });
            }
            let Some(&field) = FIELDS.iter().find(|f| **f == key) else {
                return Err(ConfigError::UnknownField { line, field: key.into() });
            };
            if let Some((first, _)) = map.get(field) {
                return Err(ConfigError::Duplicate { line, field: field.into(), first: *first });
            }
            map.insert(field, (line, value.trim().to_string()));
        }
        Self::from_entries(&Entries(map))
    }

    fn from_entries(e: &Entries) -> Result<Self, ConfigError> {
        let kind = match e.get("domain.kind") {
            None => return Err(ConfigError::Missing("domain.kind")),
            Some((_, "box")) => DomainKind::Box,
            Some((_, "cylinder")) => DomainKind::Cylinder,
            Some((_, "torus")) => DomainKind::Torus,
            Some((_, v)) => return Err(e.value_err("domain.kind", format!("expected box, cylinder or torus, got `{v}`"))),
        };
        let h = e.mandatory("grid.h")?;
        let dt = e.mandatory("grid.dt")?;
        let horizon = e.mandatory("time.horizon")?;
        let k = e.mandatory("kernel.k")?;

        let rank = match e.get("lattice.rank") {
            None => 0,
            Some((_, v)) => match v.parse::<usize>() {
                Ok(r) if r <= 3 => r,
                _ => return Err(e.value_err("lattice.rank", format!("expected 0..3, got `{v}`"))),
            },
        };
        let anti_flags = e.list("lattice.anti_flags", parse_bool)?.unwrap_or_else(|| vec![false; rank]);
        let extent = e.reals3("domain.extent")?.unwrap_or([1.0; 3]);
        if let Some(x) = extent.iter().find(|x| **x <= 0.0) {
            return Err(e.value_err("domain.extent", format!("extents must be positive, got {x}")));
        }

        let forcing = match e.get("forcing.preset") {
            None => return Err(ConfigError::Missing("forcing.preset")),
            Some((_, "inline")) => match e.reals3("forcing.coefficients")? {
                Some(c) => Forcing::Inline(c),
                None => return Err(ConfigError::Missing("forcing.coefficients")),
            },
            Some((_, v)) => match FlowPreset::parse(v) {
                Some(p) => Forcing::Preset(p),
                None => {
                    let names: Vec<&str> = FlowPreset::ALL.iter().map(|p| p.name()).collect();
                    return Err(e.value_err("forcing.preset", format!("expected inline or one of {}, got `{v}`", names.join(", "))));
                }
            },
        };
        if e.get("forcing.coefficients").is_some() && !matches!(forcing, Forcing::Inline(_)) {
            return Err(ConfigError::Inconsistent {
                field: "forcing.coefficients",
                msg: "only used with forcing.preset = inline".into(),
            });
        }
        let amplitude = e.real("forcing.amplitude")?.unwrap_or(1.0);
        let limit_fraction = e.positive("forcing.limit_fraction")?;

        let mode = match e.get("solver.mode") {
            None | Some((_, "linear")) => SolverMode::Linear,
            Some((_, "nonlinear")) => SolverMode::Nonlinear,
            Some((_, v)) => return Err(e.value_err("solver.mode", format!("expected linear or nonlinear, got `{v}`"))),
        };
        let max_iter = match e.get("solver.max_iter") {
            None => 50,
            Some((_, v)) => match v.parse::<usize>() {
                Ok(n) if n > 0 => n,
                _ => return Err(e.value_err("solver.max_iter", format!("expected a positive integer, got `{v}`"))),
            },
        };
        let tol = e.positive("solver.tol")?.unwrap_or(1e-10);
        let quad_tol = e.positive("quad.tol")?.unwrap_or(1e-15);
        let output_dir = PathBuf::from(e.get("output.dir").map_or("out", |(_, v)| v));

        let cfg = RunConfig {
            kind,
            extent,
            rank,
            anti_flags,
            h,
            dt,
            horizon,
            k,
            forcing,
            amplitude,
            limit_fraction,
            mode,
            max_iter,
            tol,
            quad_tol,
            output_dir,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let ok = match self.kind {
            DomainKind::Box => self.rank == 0,
            DomainKind::Cylinder => self.rank == 1 || self.rank == 2,
            DomainKind::Torus => self.rank == 3,
        };
        if !ok {
            let need = match self.kind {
                DomainKind::Box => "0",
                DomainKind::Cylinder => "1 or 2",
                DomainKind::Torus => "3",
            };
            return Err(ConfigError::Inconsistent {
                field: "lattice.rank",
                msg: format!("{:?} domains need rank {need}, got {}", self.kind, self.rank).to_lowercase(),
            });
        }
        if self.anti_flags.len() != self.rank {
            return Err(ConfigError::Inconsistent {
                field: "lattice.anti_flags",
                msg: format!("rank {} needs {} flags, got {}", self.rank, self.rank, self.anti_flags.len()),
            });
        }
        // lattice axes have unit pitch
        if let Some(a) = (0..self.rank).find(|&a| self.extent[a] != 1.0) {
            return Err(ConfigError::Inconsistent {
                field: "domain.extent",
                msg: format!("axis {a} is a lattice axis with unit pitch, got extent {}", self.extent[a]),
            });
        }
        if self.limit_fraction.is_some() && self.mode != SolverMode::Nonlinear {
            return Err(ConfigError::Inconsistent {
                field: "forcing.limit_fraction",
                msg: "only used with solver.mode = nonlinear".into(),
            });
        }
        Ok(())
    }

    pub fn lattice(&self) -> LatticeSpec {
        LatticeSpec::new(self.rank, self.anti_flags.clone()).expect("validated")
    }

    pub fn domain(&self) -> Result<Domain, ConfigError> {
        let built = if self.rank == 0 {
            build_box_domain(self.extent, self.horizon, self.h, self.dt)
        } else {
            build_quotient_domain(&self.lattice(), &self.extent[self.rank..], self.horizon, self.h, self.dt)
        };
        built.map_err(|err| ConfigError::Inconsistent { field: "grid.h", msg: err.to_string() })
    }
}
