//! Invariant battery behind the `verify` command.
//!
//! Every check is reported with the measured value, the bound it is held
//! against and the signed margin (nonnegative when the check passes).

use std::sync::Arc;

use pef_core::energy::{self, SpectralReport, CERTIFICATE_TOLERANCE, ROUNDING_TOLERANCE};
use pef_core::field::Grid;
use pef_core::optimize::{self, Objective, ObjectiveConfig};
use pef_core::spectral::Spectrum;
use pef_core::{sample, Design, Placement, PoissonSolver};
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Relative tolerance of the two spectral identities.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;
/// Relative tolerance of `Σ N_i = 2E`.
pub const MODULE_SUM_TOLERANCE: f64 = 1e-6;
/// Relative tolerance of the finite-difference gradient check.
pub const GRADIENT_TOLERANCE: f64 = 1e-5;
/// Central-difference step of the gradient check.
pub const GRADIENT_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub instance: String,
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn failed(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{}/{}", c.instance, c.name))
            .collect()
    }
}

/// Deliberate corruption used to confirm that the battery catches errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fault {
    /// Energy evaluated with every eigenvalue scaled by this factor.
    ScaleEigenvalues(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Seeded random instances checked besides the input design.
    pub random_instances: usize,
    pub modes: usize,
    pub fault: Option<Fault>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            random_instances: 4,
            modes: energy::DEFAULT_MODES,
            fault: None,
        }
    }
}

/// Runs the battery on `design` at `placement` and on seeded random
/// instances built on the same grid.
pub fn verify(design: &Design, placement: &Placement, cfg: &ObjectiveConfig, opts: &VerifyOptions) -> Result<VerifyReport> {
    design.check_density_feasible()?;
    let mut checks = instance_checks("input", design, placement, cfg, opts)?;
    for s in 0..opts.random_instances {
        let seed = opts.seed.wrapping_add(s as u64);
        let mut rng = sample::rng(seed);
        let n = 4 + s % 3;
        let d = sample::random_design(&mut rng, n, 0.15, 0.3, 6);
        let p = sample::clustered_placement(&mut rng, &d, 0.1);
        let c = ObjectiveConfig {
            epsilon: cfg.epsilon.min(0.5 * d.min_inradius()),
            ..*cfg
        };
        checks.extend(instance_checks(&format!("seed-{seed}"), &d, &p, &c, opts)?);
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport { passed, checks })
}

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// `value ≤ bound`.
fn at_most(instance: &str, name: &str, value: f64, bound: f64) -> Check {
    Check {
        instance: instance.into(),
        name: name.into(),
        value,
        bound,
        margin: bound - value,
        passed: value <= bound,
    }
}

/// `value ≥ bound`.
fn at_least(instance: &str, name: &str, value: f64, bound: f64, slack: f64) -> Check {
    Check {
        instance: instance.into(),
        name: name.into(),
        value,
        bound,
        margin: value - bound,
        passed: value >= bound - slack,
    }
}

fn energy_of(spectrum: &Spectrum, fault: Option<Fault>) -> f64 {
    match fault {
        None => 0.5 * spectrum.hminus1_norm_sq(),
        Some(Fault::ScaleEigenvalues(s)) => {
            let corrupted = Spectrum {
                grid: spectrum.grid,
                coefficients: spectrum.coefficients.clone(),
                eigenvalues: Arc::new(spectrum.eigenvalues.mapv(|l| l * s)),
            };
            0.5 * corrupted.hminus1_norm_sq()
        }
    }
}

fn instance_checks(
    instance: &str,
    design: &Design,
    placement: &Placement,
    cfg: &ObjectiveConfig,
    opts: &VerifyOptions,
) -> Result<Vec<Check>> {
    let obj = Objective::new(design, *cfg)?;
    let grid: Grid = *obj.grid();
    let solver: &PoissonSolver = obj.solver();
    let moll = cfg.mollifier();
    let f = obj.residual(placement)?;
    let (phi, spectrum) = solver.solve_with_spectrum(&f)?;
    let e = energy_of(&spectrum, opts.fault);
    let report = SpectralReport {
        energy: e,
        ..energy::spectral_report_from(solver, &spectrum, opts.modes)?
    };
    let mut out = Vec::new();

    let quadratic = 0.5 * f.dot(&phi);
    out.push(at_most(instance, "spectral_identity", rel(quadratic, e), IDENTITY_TOLERANCE));
    let l2 = f.dot(&f);
    out.push(at_most(
        instance,
        "parseval",
        rel(spectrum.parseval_sum(), l2),
        IDENTITY_TOLERANCE,
    ));

    let slack = ROUNDING_TOLERANCE * e.max(report.upper_bound());
    out.push(at_most(instance, "energy_variance_upper_bound", e, report.upper_bound() + slack));
    out.push(at_least(instance, "mode_truncated_lower_bound", e, report.lower_bound(), slack));

    let n_i = energy::module_energies(design, placement, &phi, &moll, &grid)?;
    out.push(at_most(
        instance,
        "module_energy_sum",
        rel(n_i.iter().sum::<f64>(), 2.0 * e),
        MODULE_SUM_TOLERANCE,
    ));

    let cert = energy::certificate_from_report(design, placement, cfg.epsilon, &report)?;
    let lemma_bound = (cert.overlap - cert.epsilon_prime * cert.p_sigma).max(0.0);
    out.push(at_least(
        instance,
        "eroded_overlap_bound",
        cert.eroded_overlap,
        lemma_bound,
        ROUNDING_TOLERANCE * cert.overlap,
    ));
    if cert.overlap > 0.0 {
        let mut c = at_least(instance, "overlap_detection", e, 0.0, 0.0);
        c.passed = e > 0.0;
        out.push(c);
    }
    out.push(at_least(
        instance,
        "overlap_certificate",
        cert.e_eps,
        cert.bound,
        CERTIFICATE_TOLERANCE * cert.bound.max(cert.e_eps),
    ));

    let gerr = optimize::finite_difference_error(&obj, placement, GRADIENT_STEP)?;
    out.push(at_most(instance, "gradient_check", gerr, GRADIENT_TOLERANCE));
    Ok(out)
}
