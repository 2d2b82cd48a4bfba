//! The `check` suites: each runs a group of oracles from `parastokes::verify`
//! and writes its tables under the output directory.

use std::fs;
use std::path::Path;

use clap::ValueEnum;
use parastokes::kernels::{KernelParams, Sign};
use parastokes::solver::FlowPreset;
use parastokes::verify::{self, StudyGeometry, StudyResult};
use parastokes::witt_algebra::{associativity_defects, check_relations, BASIS_NAMES, DIM};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    All,
    Algebra,
    Kernel,
    Lattice,
    Operators,
    Solver,
}

impl Suite {
    pub fn expand(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![Suite::Algebra, Suite::Kernel, Suite::Lattice, Suite::Operators, Suite::Solver],
            s => vec![s],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Suite::All => "all",
            Suite::Algebra => "algebra",
            Suite::Kernel => "kernel",
            Suite::Lattice => "lattice",
            Suite::Operators => "operators",
            Suite::Solver => "solver",
        }
    }
}

/// One verdict line of a suite.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), pass, detail: detail.into() }
    }

    fn study(r: &StudyResult) -> Self {
        let res: Vec<String> = r.levels.iter().map(|l| format!("{:.4e}", l.residual)).collect();
        Self::new(&r.name, r.pass, format!("order={:.3} residuals=[{}]", r.fitted_order, res.join(", ")))
    }
}

fn write(dir: &Path, name: &str, body: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| CliError::Io { path, source: e })
}

pub fn run(suite: Suite, dir: &Path, seed: u64, tol: Option<f64>) -> Result<Vec<Check>, CliError> {
    match suite {
        Suite::All => {
            let mut out = Vec::new();
            for s in suite.expand() {
                out.extend(run(s, dir, seed, tol)?);
            }
            Ok(out)
        }
        Suite::Algebra => algebra(dir),
        Suite::Kernel => kernel(dir),
        Suite::Lattice => lattice(dir, seed),
        Suite::Operators => operators(dir, seed),
        Suite::Solver => solver(dir, tol.unwrap_or(1e-12)),
    }
}

fn algebra(dir: &Path) -> Result<Vec<Check>, CliError> {
    let defects = associativity_defects();
    let mut log = String::from("i,j,k,associative\n");
    for i in 0..DIM {
        for j in 0..DIM {
            for k in 0..DIM {
                let ok = !defects.contains(&(i, j, k));
                log.push_str(&format!("{},{},{},{ok}\n", BASIS_NAMES[i], BASIS_NAMES[j], BASIS_NAMES[k]));
            }
        }
    }
    write(dir, "algebra_associativity.csv", &log)?;
    let rel = check_relations();
    Ok(vec![
        Check::new(
            "associativity",
            defects.is_empty(),
            format!("{} of {} basis triples non-associative", defects.len(), DIM * DIM * DIM),
        ),
        Check::new("relations", rel.all(), format!("{rel:?}")),
    ])
}

fn kernel(dir: &Path) -> Result<Vec<Check>, CliError> {
    let mut out = Vec::new();
    match verify::calibrate_convention() {
        Ok(rec) => {
            write(dir, "calibration.csv", &rec.table())?;
            let literal: Vec<String> = rec.literal_kernel.iter().map(|r| format!("{:.2}", r.order)).collect();
            out.push(Check::new(
                "calibration",
                true,
                format!(
                    "adopted fd_power={} c_power={}; printed kernel orders [{}]",
                    rec.adopted.fdagger_power,
                    rec.adopted.c_power,
                    literal.join(", ")
                ),
            ));
        }
        Err(e) => out.push(Check::new("calibration", false, e.to_string())),
    }
    let params = KernelParams::new(1.0)?;
    for sign in [Sign::Plus, Sign::Minus] {
        let r = verify::factorization_study(&[8, 16, 32], &params, sign)?;
        write(dir, &format!("{}.csv", r.name), &r.to_csv())?;
        out.push(Check::study(&r));
    }
    let mut csv = String::from("k,mass,relative_error\n");
    let mut worst = 0.0f64;
    for k in [0.5, 1.0, 2.0] {
        let m = verify::gaussian_mass(k, 1.0);
        let e = (m * k - 1.0).abs();
        worst = worst.max(e);
        csv.push_str(&format!("{k},{m:.15e},{e:.3e}\n"));
    }
    write(dir, "gaussian_mass.csv", &csv)?;
    out.push(Check::new("gaussian_mass", worst <= 1e-6, format!("worst relative error {worst:.3e}")));
    Ok(out)
}

fn lattice(dir: &Path, seed: u64) -> Result<Vec<Check>, CliError> {
    let rows = verify::lattice_bruteforce_check(&verify::REPRESENTATIVE_PATTERNS, 20, &KernelParams::new(1.0)?, seed)?;
    let mut csv = String::from("x,y,z,t,anti_flags,difference,allowed,shells_used,translation_defect,translation_allowed\n");
    for r in &rows {
        let flags: String = r.anti_flags.iter().map(|&a| if a { 'a' } else { 'p' }).collect();
        csv.push_str(&format!(
            "{},{},{},{},{flags},{:.3e},{:.3e},{},{:.3e},{:.3e}\n",
            r.point.x[0],
            r.point.x[1],
            r.point.x[2],
            r.point.t,
            r.difference,
            r.allowed,
            r.shells_used,
            r.translation_defect,
            r.translation_allowed
        ));
    }
    write(dir, "lattice_bruteforce.csv", &csv)?;
    let bad = rows.iter().filter(|r| !r.pass()).count();
    Ok(vec![Check::new("lattice_bruteforce", bad == 0, format!("{bad} of {} rows outside the tails", rows.len()))])
}

fn operators(dir: &Path, seed: u64) -> Result<Vec<Check>, CliError> {
    let mut out = Vec::new();
    for g in [StudyGeometry::Box, StudyGeometry::torus([false, true, true])] {
        let r = verify::borel_pompeiu_study(&g, &[6, 8, 12], 1.0)?;
        write(dir, &format!("{}.csv", r.name), &r.to_csv())?;
        out.push(Check::study(&r));
    }
    let h = verify::hodge_study(&StudyGeometry::channel(), &[3, 4, 5], 1.0, seed)?;
    write(dir, &format!("{}.csv", h.result.name), &h.result.to_csv())?;
    let mut r = Check::study(&h.result);
    r.name = format!("{}_orthogonality", h.result.name);
    r.detail = format!("decreasing={} {}", h.decreasing(), r.detail);
    out.push(r);
    let idem = h.idempotency.last().copied().unwrap_or(f64::NAN);
    out.push(Check::new("bergman_idempotency", idem <= 1e-6, format!("finest level {idem:.3e}")));
    Ok(out)
}

fn solver(dir: &Path, tol: f64) -> Result<Vec<Check>, CliError> {
    let mut out = Vec::new();
    let s = verify::stokes_study(&StudyGeometry::channel(), FlowPreset::Vortex, &[3, 4, 5], 1.0)?;
    write(dir, &format!("{}.csv", s.result.name), &s.result.to_csv())?;
    out.push(Check::study(&s.result));
    out.push(Check::new(
        "stokes_divergence",
        s.divergence_ok(),
        format!("divergence {:?} bound {:?}", s.divergence, s.divergence_bound),
    ));
    let f = verify::fixed_point_study(4, 0.5, 30, tol)?;
    let csv: String = std::iter::once("iter,residual\n".to_string())
        .chain(f.report.residual_history.iter().enumerate().map(|(i, r)| format!("{},{r:.12e}\n", i + 1)))
        .collect();
    write(dir, "fixed_point_residuals.csv", &csv)?;
    out.push(Check::new(
        "fixed_point",
        f.strictly_decreasing() && f.ratios_within(0.1) && f.report.converged,
        f.report.summary(),
    ));
    out.push(Check::new("admissibility_formulas", verify::admissibility_formula_checks(), "W(1,1,0)=1/4, L=0; L=1 at the limit"));
    Ok(out)
}
