//! Poisson energy of a residual density and the bounds built on it.

use serde::{Deserialize, Serialize};

use crate::error::{PefError, Result};
use crate::field::{self, Grid, ModuleProfile, MollifierConfig, ScalarField};
use crate::geometry::{self, Design, Placement};
use crate::spectral::{gradient_field, PoissonSolver, Spectrum};

/// Default number of low modes used for β̂ and the certificate.
pub const DEFAULT_MODES: usize = 16;

/// Relative slack for comparisons between quantities that agree in exact
/// arithmetic but are summed in different orders.
pub const ROUNDING_TOLERANCE: f64 = 1e-12;

/// Relative tolerance of the overlap certificate.
pub const CERTIFICATE_TOLERANCE: f64 = 1e-8;

/// `φ = G f` together with the spectrum of `f` and both energy formulas.
#[derive(Debug, Clone)]
pub struct PoissonSolution {
    pub phi: ScalarField,
    pub spectrum: Spectrum,
    /// `½ Σ α²/λ`, the canonical value.
    pub energy: f64,
    /// `½ ∫ |∇φ|²` with cell-centered differences.
    pub dirichlet: f64,
}

/// `E = ½ ‖f‖²_{H⁻¹}` for a zero-mean field.
pub fn poisson_energy(solver: &PoissonSolver, f: &ScalarField) -> Result<f64> {
    Ok(0.5 * solver.hminus1_norm_sq(f)?)
}

/// `½ ∫ |∇φ|²` by the midpoint rule over cell-centered differences.
pub fn dirichlet_energy(phi: &ScalarField) -> f64 {
    let (dx, dy) = gradient_field(phi);
    0.5 * (dx.dot(&dx) + dy.dot(&dy))
}

pub fn solve_energy(solver: &PoissonSolver, f: &ScalarField) -> Result<PoissonSolution> {
    let (phi, spectrum) = solver.solve_with_spectrum(f)?;
    let energy = 0.5 * spectrum.hminus1_norm_sq();
    let dirichlet = dirichlet_energy(&phi);
    Ok(PoissonSolution {
        phi,
        spectrum,
        energy,
        dirichlet,
    })
}

/// `N_i = ∫ ψ_i φ`, the potential integrated against each module's density.
/// `epsilon == 0` uses exact cell coverage of the sharp rectangles.
pub fn module_energies(
    design: &Design,
    placement: &Placement,
    phi: &ScalarField,
    moll: &MollifierConfig,
    grid: &Grid,
) -> Result<Vec<f64>> {
    geometry::check_len("placement", design.len(), placement.len())?;
    Ok(crate::par::map_indexed(design.len(), |m| {
        ModuleProfile::new(&design.modules[m], placement.centers[m], moll, grid).moments(phi)[0]
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    #[serde(rename = "Var")]
    pub var: f64,
    #[serde(rename = "E")]
    pub energy: f64,
    pub lambda1: f64,
    #[serde(rename = "lambdaN")]
    pub lambda_n: f64,
    #[serde(rename = "partial_sum_N")]
    pub partial_sum_n: f64,
    pub beta_hat: f64,
    #[serde(rename = "N")]
    pub n: usize,
}

impl SpectralReport {
    /// `Var / (2 λ₁)`, the energy upper bound.
    pub fn upper_bound(&self) -> f64 {
        self.var / (2.0 * self.lambda1)
    }

    /// `Σ_{k≤N} α_k² / (2 λ_N)`, the energy lower bound.
    pub fn lower_bound(&self) -> f64 {
        self.partial_sum_n / (2.0 * self.lambda_n)
    }

    /// Whether `lower ≤ E ≤ upper` up to rounding.
    pub fn chain_holds(&self) -> bool {
        let slack = ROUNDING_TOLERANCE * self.energy.max(self.upper_bound());
        self.lower_bound() <= self.energy + slack && self.energy <= self.upper_bound() + slack
    }
}

/// Energy, variance and low-mode content of `f` from one transform.
pub fn spectral_report_from(solver: &PoissonSolver, spectrum: &Spectrum, n: usize) -> Result<SpectralReport> {
    if n == 0 || n >= solver.positive_modes() {
        return Err(PefError::InvalidConfig(format!(
            "mode count {n} must lie in 1..{}",
            solver.positive_modes()
        )));
    }
    let modes = solver.all_modes(spectrum);
    let partial_sum_n: f64 = modes[..n].iter().map(|m| m.alpha * m.alpha).sum();
    let var: f64 = partial_sum_n + modes[n..].iter().map(|m| m.alpha * m.alpha).sum::<f64>();
    let beta_hat = if var == 0.0 {
        1.0
    } else {
        (partial_sum_n / var).clamp(0.0, 1.0)
    };
    Ok(SpectralReport {
        var,
        energy: 0.5 * spectrum.hminus1_norm_sq(),
        lambda1: modes[0].lambda,
        lambda_n: modes[n - 1].lambda,
        partial_sum_n,
        beta_hat,
        n,
    })
}

/// Spectral report of a zero-mean field. `Var` is the Parseval sum of the
/// nonconstant coefficients, which equals `∫ f²` to rounding.
pub fn spectral_report(solver: &PoissonSolver, f: &ScalarField, n: usize) -> Result<SpectralReport> {
    let s = solver.zero_mean_spectrum(f)?;
    spectral_report_from(solver, &s, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapCertificate {
    pub overlap: f64,
    pub eroded_overlap: f64,
    #[serde(rename = "P_sigma")]
    pub p_sigma: f64,
    pub epsilon: f64,
    /// `√2 ε`, the erosion width used in the perimeter correction.
    pub epsilon_prime: f64,
    pub rho_bar: f64,
    pub beta_hat: f64,
    #[serde(rename = "lambdaN")]
    pub lambda_n: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub bound: f64,
    #[serde(rename = "E_eps")]
    pub e_eps: f64,
    pub satisfied: bool,
}

impl OverlapCertificate {
    /// `E_ε − bound`; nonnegative when the certificate holds exactly.
    pub fn margin(&self) -> f64 {
        self.e_eps - self.bound
    }
}

/// `C = β̂ (2 − ρ̄)² / (2 λ_N)`.
pub fn certificate_constant(beta_hat: f64, rho_bar: f64, lambda_n: f64) -> f64 {
    beta_hat * (2.0 - rho_bar).powi(2) / (2.0 * lambda_n)
}

/// Measures `β̂_N` from the layout's own residual and checks
/// `E_ε ≥ C (|O| − ε′ P_Σ)₊` with `ε′ = √2 ε`.
pub fn overlap_certificate(
    design: &Design,
    placement: &Placement,
    moll: &MollifierConfig,
    n: usize,
    solver: &PoissonSolver,
) -> Result<OverlapCertificate> {
    design.check_density_feasible()?;
    design.check_erosion(moll.epsilon)?;
    let grid = solver.grid();
    let rho = field::density(design, placement, moll, grid)?;
    let f = field::residual(&rho.field, design.mean_density());
    let report = spectral_report(solver, &f, n)?;
    certificate_from_report(design, placement, moll.epsilon, &report)
}

/// Certificate from an already computed spectral report of the layout.
pub fn certificate_from_report(
    design: &Design,
    placement: &Placement,
    epsilon: f64,
    report: &SpectralReport,
) -> Result<OverlapCertificate> {
    let overlap = geometry::overlap_area(design, placement)?;
    let eroded_overlap = geometry::eroded_overlap_area(design, placement, epsilon)?;
    let p_sigma = geometry::total_perimeter(design);
    let epsilon_prime = std::f64::consts::SQRT_2 * epsilon;
    let rho_bar = design.mean_density();
    let c = certificate_constant(report.beta_hat, rho_bar, report.lambda_n);
    let bound = c * (overlap - epsilon_prime * p_sigma).max(0.0);
    let e_eps = report.energy;
    let satisfied = e_eps >= bound - CERTIFICATE_TOLERANCE * bound.max(e_eps);
    Ok(OverlapCertificate {
        overlap,
        eroded_overlap,
        p_sigma,
        epsilon,
        epsilon_prime,
        rho_bar,
        beta_hat: report.beta_hat,
        lambda_n: report.lambda_n,
        c,
        bound,
        e_eps,
        satisfied,
    })
}

/// Residual of the layout's mollified density on the solver grid.
pub fn layout_residual(
    design: &Design,
    placement: &Placement,
    moll: &MollifierConfig,
    grid: &Grid,
) -> Result<ScalarField> {
    let rho = field::density(design, placement, moll, grid)?;
    Ok(field::residual(&rho.field, design.mean_density()))
}

/// `E_ε(c)` of a layout.
pub fn layout_energy(
    design: &Design,
    placement: &Placement,
    moll: &MollifierConfig,
    solver: &PoissonSolver,
) -> Result<f64> {
    poisson_energy(solver, &layout_residual(design, placement, moll, solver.grid())?)
}
