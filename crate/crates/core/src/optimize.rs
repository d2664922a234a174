//! The composite objective `F = W + λ E_ε`, its analytic gradient, box
//! projection and projected gradient descent with run diagnostics.

use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::energy::{self, OverlapCertificate, SpectralReport, DEFAULT_MODES};
use crate::error::{PefError, Result};
use crate::field::{self, Grid, GridSpec, ModuleProfile, MollifierConfig, ScalarField};
use crate::geometry::{self, rect_of, Design, Placement, Point};
use crate::par;
use crate::sample::{self, SampleRng};
use crate::spectral::PoissonSolver;
use crate::wirelength::{self, SmoothingConfig, WirelengthModel};

/// Safety factor applied to the largest sampled secant slope.
pub const LIPSCHITZ_SAFETY: f64 = 2.0;

/// Per-step tolerance of the monotone descent check.
pub const DESCENT_TOLERANCE: f64 = 1e-10;

const MAX_STEP_REDUCTIONS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    pub lambda: f64,
    pub epsilon: f64,
    pub gamma: f64,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub wl_model: WirelengthModel,
}

impl ObjectiveConfig {
    pub fn validate(&self, design: &Design) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(PefError::InvalidConfig(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.epsilon > 0.0) {
            return Err(PefError::InvalidConfig(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        design.check_erosion(self.epsilon)?;
        SmoothingConfig::new(self.gamma, self.wl_model)?;
        Ok(())
    }

    pub fn smoothing(&self) -> SmoothingConfig {
        SmoothingConfig {
            gamma: self.gamma,
            model: self.wl_model,
        }
    }

    pub fn mollifier(&self) -> MollifierConfig {
        MollifierConfig::quartic(self.epsilon)
    }
}

/// Which density penalty drives the forces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Penalty {
    /// `E_ε = ½ ‖f‖²_{H⁻¹}`; first variation `φ`.
    Poisson,
    /// `D = ∫ (ρ_ε − ρ̄)²`; first variation `2 (ρ_ε − ρ̄)`.
    Variance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "E_eps")]
    pub e_eps: f64,
}

/// Objective value, variance and gradient at one placement.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: ObjectiveValue,
    pub var: f64,
    /// Flattened `[∂F/∂x₀, ∂F/∂y₀, ...]`.
    pub grad: Vec<f64>,
}

/// A design bound to an objective configuration and a prepared solver.
pub struct Objective<'a> {
    design: &'a Design,
    cfg: ObjectiveConfig,
    grid: Grid,
    solver: PoissonSolver,
}

impl<'a> Objective<'a> {
    pub fn new(design: &'a Design, cfg: ObjectiveConfig) -> Result<Self> {
        cfg.validate(design)?;
        let grid = Grid::for_design(cfg.grid, design)?;
        Ok(Self {
            design,
            cfg,
            grid,
            solver: PoissonSolver::new(grid),
        })
    }

    pub fn design(&self) -> &Design {
        self.design
    }

    pub fn config(&self) -> &ObjectiveConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn solver(&self) -> &PoissonSolver {
        &self.solver
    }

    pub fn set_lambda(&mut self, lambda: f64) {
        self.cfg.lambda = lambda;
    }

    fn profiles(&self, p: &Placement) -> Result<Vec<ModuleProfile>> {
        geometry::check_len("placement", self.design.len(), p.len())?;
        Ok(field::module_profiles(self.design, p, &self.cfg.mollifier(), &self.grid))
    }

    /// Residual `f_ε` of the placement.
    pub fn residual(&self, p: &Placement) -> Result<ScalarField> {
        let profiles = self.profiles(p)?;
        let rho = field::density_from_profiles(&profiles, &self.grid);
        Ok(field::residual(&rho.field, self.design.mean_density()))
    }

    pub fn value(&self, p: &Placement) -> Result<ObjectiveValue> {
        let f = self.residual(p)?;
        let e_eps = energy::poisson_energy(&self.solver, &f)?;
        let w = wirelength::smooth_wl(&self.design.netlist, p, &self.cfg.smoothing())?;
        Ok(ObjectiveValue {
            f: w + self.cfg.lambda * e_eps,
            w,
            e_eps,
        })
    }

    pub fn evaluate(&self, p: &Placement) -> Result<Evaluation> {
        let profiles = self.profiles(p)?;
        let rho = field::density_from_profiles(&profiles, &self.grid);
        let f = field::residual(&rho.field, self.design.mean_density());
        let var = field::variance(&f);
        let (phi, spectrum) = self.solver.solve_with_spectrum(&f)?;
        let e_eps = 0.5 * spectrum.hminus1_norm_sq();
        let smoothing = self.cfg.smoothing();
        let w = wirelength::smooth_wl(&self.design.netlist, p, &smoothing)?;
        let mut grad = wirelength::smooth_wl_grad(&self.design.netlist, p, &smoothing)?;
        let lambda = self.cfg.lambda;
        if lambda != 0.0 {
            let pen = penalty_gradient(&profiles, &phi, 1.0);
            for (g, e) in grad.iter_mut().zip(pen) {
                *g += lambda * e;
            }
        }
        Ok(Evaluation {
            value: ObjectiveValue {
                f: w + lambda * e_eps,
                w,
                e_eps,
            },
            var,
            grad,
        })
    }

    pub fn gradient(&self, p: &Placement) -> Result<Vec<f64>> {
        Ok(self.evaluate(p)?.grad)
    }

    /// Penalty forces `−∇_{c_i} P` on every module, without wirelength or `λ`.
    pub fn penalty_forces(&self, p: &Placement, penalty: Penalty) -> Result<Vec<[f64; 2]>> {
        let profiles = self.profiles(p)?;
        let rho = field::density_from_profiles(&profiles, &self.grid);
        let rho_bar = self.design.mean_density();
        let grad = match penalty {
            Penalty::Poisson => {
                let phi = self.solver.solve_poisson(&field::residual(&rho.field, rho_bar))?;
                penalty_gradient(&profiles, &phi, 1.0)
            }
            Penalty::Variance => {
                let excess = ScalarField {
                    grid: self.grid,
                    values: &rho.field.values - rho_bar,
                };
                penalty_gradient(&profiles, &excess, 2.0)
            }
        };
        Ok(grad.chunks_exact(2).map(|g| [-g[0], -g[1]]).collect())
    }

    /// Spectral report of the placement's residual.
    pub fn spectral_report(&self, p: &Placement, n: usize) -> Result<SpectralReport> {
        energy::spectral_report(&self.solver, &self.residual(p)?, n)
    }

    pub fn certificate(&self, p: &Placement, n: usize) -> Result<OverlapCertificate> {
        self.design.check_density_feasible()?;
        let report = self.spectral_report(p, n)?;
        energy::certificate_from_report(self.design, p, self.cfg.epsilon, &report)
    }
}

/// `∇_{c_i} ∫ v ρ_ε = −∫ v ∇ψ_i`, scaled, flattened over modules.
fn penalty_gradient(profiles: &[ModuleProfile], variation: &ScalarField, scale: f64) -> Vec<f64> {
    par::map_indexed(profiles.len(), |m| {
        let [_, mx, my] = profiles[m].moments(variation);
        [-scale * mx, -scale * my]
    })
    .into_iter()
    .flatten()
    .collect()
}

/// `F`, `W` and `E_ε` at a placement.
pub fn objective(design: &Design, p: &Placement, cfg: &ObjectiveConfig) -> Result<ObjectiveValue> {
    Objective::new(design, *cfg)?.value(p)
}

/// `∇F` at a placement, flattened.
pub fn gradient(design: &Design, p: &Placement, cfg: &ObjectiveConfig) -> Result<Vec<f64>> {
    Objective::new(design, *cfg)?.gradient(p)
}

/// Euclidean projection onto the product of per-module center boxes.
pub fn project(design: &Design, p: &Placement) -> Result<Placement> {
    geometry::check_len("placement", design.len(), p.len())?;
    for (i, m) in design.modules.iter().enumerate() {
        if m.width > design.width || m.height > design.height {
            return Err(PefError::InfeasibleBox {
                module: i,
                width: m.width,
                height: m.height,
                domain_width: design.width,
                domain_height: design.height,
            });
        }
    }
    Ok(Placement::new(
        p.centers
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let (x0, x1) = design.x_range(i);
                let (y0, y1) = design.y_range(i);
                Point::new(c.x.clamp(x0, x1), c.y.clamp(y0, y1))
            })
            .collect(),
    ))
}

fn step(design: &Design, p: &Placement, grad: &[f64], eta: f64) -> Result<Placement> {
    let flat: Vec<f64> = p.to_flat().iter().zip(grad).map(|(c, g)| c - eta * g).collect();
    project(design, &Placement::from_flat(&flat))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖(c − Π(c − α∇F))/α‖` from a precomputed gradient.
pub fn gradient_mapping_norm_from(design: &Design, p: &Placement, grad: &[f64], alpha: f64) -> Result<f64> {
    let next = step(design, p, grad, alpha)?;
    Ok(p.distance(&next) / alpha)
}

pub fn gradient_mapping_norm(obj: &Objective<'_>, p: &Placement, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(PefError::InvalidConfig(format!("alpha must be > 0, got {alpha}")));
    }
    gradient_mapping_norm_from(obj.design, p, &obj.gradient(p)?, alpha)
}

/// `max_k |D_k F − ∂_k F| / ‖∇F‖` with central differences `D_k` of step
/// `h`; zero when the gradient vanishes and the differences agree exactly.
pub fn finite_difference_error(obj: &Objective<'_>, p: &Placement, h: f64) -> Result<f64> {
    let g = obj.gradient(p)?;
    let flat = p.to_flat();
    let mut worst: f64 = 0.0;
    for k in 0..flat.len() {
        let mut a = flat.clone();
        let mut b = flat.clone();
        a[k] += h;
        b[k] -= h;
        let fa = obj.value(&Placement::from_flat(&a))?.f;
        let fb = obj.value(&Placement::from_flat(&b))?.f;
        worst = worst.max(((fa - fb) / (2.0 * h) - g[k]).abs());
    }
    let scale = norm(&g);
    Ok(if scale > 0.0 {
        worst / scale
    } else if worst == 0.0 {
        0.0
    } else {
        f64::INFINITY
    })
}

/// Secant probe radius used by [`lipschitz_estimate`]: a quarter of the
/// smaller of the mollifier radius and the wirelength smoothing, the
/// length scales on which the gradient varies.
pub fn lipschitz_radius(cfg: &ObjectiveConfig) -> f64 {
    0.25 * cfg.epsilon.min(cfg.gamma)
}

fn random_direction(rng: &mut SampleRng, dim: usize, length: f64) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let n = norm(&v);
    v.into_iter().map(|x| x * length / n).collect()
}

/// `2 · max ‖∇F(c₁) − ∇F(c₂)‖ / ‖c₁ − c₂‖` over `samples` random pairs
/// near `p`, each pair at most [`lipschitz_radius`] apart.
pub fn lipschitz_estimate(obj: &Objective<'_>, p: &Placement, samples: usize, rng: &mut SampleRng) -> Result<f64> {
    if samples < 10 {
        return Err(PefError::InsufficientData {
            needed: 10,
            available: samples,
        });
    }
    let dim = 2 * p.len();
    let r = lipschitz_radius(&obj.cfg);
    let base = p.to_flat();
    let mut best: f64 = 0.0;
    for _ in 0..samples {
        let u = random_direction(rng, dim, r);
        let v = random_direction(rng, dim, r);
        let c1 = project(obj.design, &Placement::from_flat(&add(&base, &u)))?;
        let c2 = project(obj.design, &Placement::from_flat(&add(&c1.to_flat(), &v)))?;
        let d = c1.distance(&c2);
        if d == 0.0 {
            continue;
        }
        let g1 = obj.gradient(&c1)?;
        let g2 = obj.gradient(&c2)?;
        let dg: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a - b).collect();
        best = best.max(norm(&dg) / d);
    }
    Ok(LIPSCHITZ_SAFETY * best)
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum StepKind {
    #[default]
    Fixed,
    RobbinsMonro,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepSchedule {
    #[serde(default)]
    pub kind: StepKind,
    /// Base step; `None` means `1/L̂` from [`lipschitz_estimate`].
    #[serde(default)]
    pub eta0: Option<f64>,
}

impl StepSchedule {
    pub fn step(&self, eta0: f64, k: usize) -> f64 {
        match self.kind {
            StepKind::Fixed => eta0,
            StepKind::RobbinsMonro => eta0 / (k as f64 + 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopCriteria {
    pub max_iters: usize,
    /// Gradient-mapping tolerance; `None` means `1e-6` times its value at
    /// the first iterate.
    #[serde(default)]
    pub gm_tol: Option<f64>,
}

impl Default for StopCriteria {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            gm_tol: None,
        }
    }
}

/// Geometric growth of `λ` while the layout still overlaps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Continuation {
    pub factor: f64,
    pub every: usize,
    /// Growth stops once the overlap area is at most this.
    pub overlap_tol: f64,
}

impl Continuation {
    pub fn for_design(design: &Design) -> Self {
        let min_area = design
            .modules
            .iter()
            .map(|m| m.area())
            .fold(f64::INFINITY, f64::min);
        Self {
            factor: 1.5,
            every: 200,
            overlap_tol: 1e-3 * min_area,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    #[serde(default)]
    pub schedule: StepSchedule,
    #[serde(default)]
    pub stop: StopCriteria,
    #[serde(default = "default_lipschitz_samples")]
    pub lipschitz_samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub continuation: Option<Continuation>,
    /// With a fixed schedule, halve the step and retry whenever a step
    /// would raise `F`. `L̂` is measured near the start, and the curvature
    /// met later along the path can be larger.
    #[serde(default = "default_true")]
    pub step_guard: bool,
}

fn default_lipschitz_samples() -> usize {
    10
}

fn default_true() -> bool {
    true
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            schedule: StepSchedule::default(),
            stop: StopCriteria::default(),
            lipschitz_samples: default_lipschitz_samples(),
            seed: 0,
            continuation: None,
            step_guard: true,
        }
    }
}

/// One row of the per-iteration ledger, describing iterate `k` and the step
/// taken from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "E_eps")]
    pub e_eps: f64,
    #[serde(rename = "Var")]
    pub var: f64,
    pub overlap: f64,
    pub grad_mapping_norm: f64,
    pub step: f64,
    pub lambda: f64,
}

impl IterationRecord {
    pub const CSV_HEADER: &'static str = "k,F,W,E_eps,Var,overlap,grad_mapping_norm,step,lambda";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.k, self.f, self.w, self.e_eps, self.var, self.overlap, self.grad_mapping_norm, self.step, self.lambda
        )
    }
}

#[derive(Debug, Clone)]
pub struct RunDiagnostics {
    pub records: Vec<IterationRecord>,
    /// Iterates `c⁰ … c^K`; the last one is the returned placement.
    pub iterates: Vec<Placement>,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time: f64,
    pub lipschitz: Option<f64>,
    pub eta0: f64,
    pub gm_tol: f64,
    /// Number of steps where `F` rose by more than [`DESCENT_TOLERANCE`].
    pub descent_violations: usize,
    /// Number of times the step guard halved the step.
    pub step_reductions: usize,
    pub final_certificate: Option<OverlapCertificate>,
    /// Smallest Hessian eigenvalue at the limit; not estimated.
    pub mu: Option<f64>,
}

impl RunDiagnostics {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(IterationRecord::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        out
    }

    /// `K · min_{k<K} ‖G(c^k)‖²` for each requested `K`.
    pub fn sublinear_products(&self, ks: &[usize]) -> Vec<f64> {
        ks.iter()
            .map(|&k| {
                let m = self
                    .records
                    .iter()
                    .take(k)
                    .map(|r| r.grad_mapping_norm * r.grad_mapping_norm)
                    .fold(f64::INFINITY, f64::min);
                k as f64 * m
            })
            .collect()
    }
}

/// Deterministic tiny jitter for exactly coincident centers.
fn separate_coincident(design: &Design, p: &Placement, seed: u64) -> Result<Placement> {
    let coincident = (0..p.len()).any(|i| (i + 1..p.len()).any(|j| p.centers[i] == p.centers[j]));
    if !coincident {
        return Ok(p.clone());
    }
    let mut rng = sample::rng(seed);
    let amp = 1e-8 * design.width.min(design.height);
    let flat: Vec<f64> = p.to_flat().into_iter().map(|c| c + amp * rng.gen_range(-1.0..=1.0)).collect();
    project(design, &Placement::from_flat(&flat))
}

fn check_finite(e: &Evaluation, iteration: usize) -> Result<()> {
    if e.value.f.is_finite() && e.grad.iter().all(|g| g.is_finite()) {
        Ok(())
    } else {
        Err(PefError::NonFiniteObjective { iteration })
    }
}

/// `c^{k+1} = Π(c^k − η_k ∇F(c^k))` until the gradient mapping falls to
/// `gm_tol` or `max_iters` steps have been taken.
pub fn pgd_run(obj: &mut Objective<'_>, initial: &Placement, opts: &RunOptions) -> Result<(Placement, RunDiagnostics)> {
    let start = Instant::now();
    let design = obj.design;
    let mut c = separate_coincident(design, &project(design, initial)?, opts.seed)?;
    let mut rng = sample::rng(opts.seed);
    let mut lipschitz = None;
    let mut eta0 = match opts.schedule.eta0 {
        Some(eta) => eta,
        None => {
            let l = lipschitz_estimate(obj, &c, opts.lipschitz_samples, &mut rng)?;
            lipschitz = Some(l);
            if l > 0.0 {
                1.0 / l
            } else {
                1.0
            }
        }
    };
    if !(eta0 > 0.0 && eta0.is_finite()) {
        return Err(PefError::InvalidConfig(format!("step size must be > 0, got {eta0}")));
    }

    let mut records = Vec::new();
    let mut iterates = vec![c.clone()];
    let mut eval = obj.evaluate(&c)?;
    check_finite(&eval, 0)?;
    let mut gm_tol = opts.stop.gm_tol.unwrap_or(f64::NAN);
    let mut converged = false;
    let mut descent_violations = 0;
    let mut k = 0;
    let guard = opts.step_guard && opts.schedule.kind == StepKind::Fixed;
    let mut step_reductions = 0;
    loop {
        let eta = opts.schedule.step(eta0, k);
        let next = step(design, &c, &eval.grad, eta)?;
        let gm = c.distance(&next) / eta;
        if gm_tol.is_nan() {
            gm_tol = 1e-6 * gm;
        }
        let record = IterationRecord {
            k,
            f: eval.value.f,
            w: eval.value.w,
            e_eps: eval.value.e_eps,
            var: eval.var,
            overlap: geometry::overlap_area(design, &c)?,
            grad_mapping_norm: gm,
            step: eta,
            lambda: obj.cfg.lambda,
        };
        if gm <= gm_tol {
            records.push(record);
            converged = true;
            break;
        }
        if k >= opts.stop.max_iters {
            records.push(record);
            break;
        }
        let next_eval = obj.evaluate(&next)?;
        check_finite(&next_eval, k + 1)?;
        let rise = next_eval.value.f - eval.value.f;
        if guard && rise > 1e-15 * eval.value.f.abs() && step_reductions < MAX_STEP_REDUCTIONS {
            eta0 *= 0.5;
            step_reductions += 1;
            log::debug!("iteration {k}: F rose by {rise:e}, step halved to {eta0:e}");
            continue;
        }
        records.push(record);
        if rise > DESCENT_TOLERANCE {
            descent_violations += 1;
        }
        c = next;
        eval = next_eval;
        iterates.push(c.clone());
        k += 1;

        if let Some(cont) = opts.continuation {
            if k % cont.every == 0 && records.last().map_or(0.0, |r| r.overlap) > cont.overlap_tol {
                obj.set_lambda(obj.cfg.lambda * cont.factor);
                log::debug!("continuation: lambda -> {}", obj.cfg.lambda);
                if opts.schedule.eta0.is_none() {
                    let l = lipschitz_estimate(obj, &c, opts.lipschitz_samples, &mut rng)?;
                    lipschitz = Some(l);
                    if l > 0.0 {
                        eta0 = 1.0 / l;
                    }
                }
                eval = obj.evaluate(&c)?;
                check_finite(&eval, k)?;
            }
        }
    }
    let final_certificate = if design.mean_density() < 2.0 && !design.is_empty() {
        obj.certificate(&c, DEFAULT_MODES.min(obj.solver.positive_modes() - 1)).ok()
    } else {
        None
    };
    log::info!(
        "pgd: {} iterations, F = {:.6e}, converged = {}",
        k,
        eval.value.f,
        converged
    );
    Ok((
        c,
        RunDiagnostics {
            records,
            iterates,
            iterations: k,
            converged,
            wall_time: start.elapsed().as_secs_f64(),
            lipschitz,
            eta0,
            gm_tol,
            descent_violations,
            step_reductions,
            final_certificate,
            mu: None,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// `exp(slope)` of the log-distance fit.
    pub rho: f64,
    pub r_squared: f64,
    pub window: usize,
    /// Set when the fitted contraction is not below one.
    pub stalled: bool,
}

/// Least-squares fit of `log d_k` against `k` over the last `window`
/// entries of `distances`.
pub fn fit_log_rate(distances: &[f64], window: usize) -> Result<RateFit> {
    if window < 2 || distances.len() < window {
        return Err(PefError::InsufficientData {
            needed: window.max(2),
            available: distances.len(),
        });
    }
    let tail = &distances[distances.len() - window..];
    if tail.iter().any(|d| !(*d > 0.0)) {
        return Err(PefError::InsufficientData {
            needed: window,
            available: tail.iter().filter(|d| **d > 0.0).count(),
        });
    }
    let n = window as f64;
    let xs: Vec<f64> = (0..window).map(|i| i as f64).collect();
    let ys: Vec<f64> = tail.iter().map(|d| d.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    let rho = slope.exp();
    Ok(RateFit {
        rho,
        r_squared,
        window,
        stalled: rho >= 1.0 - 1e-9,
    })
}

/// Local linear rate from a run, using the final iterate as `c*`.
///
/// Iterates whose distance to `c*` is within `10³` times the final step
/// length are dropped first: there the finite run no longer resolves the
/// distance to the true limit.
pub fn local_rate_fit(diag: &RunDiagnostics, window: usize) -> Result<RateFit> {
    let its = &diag.iterates;
    let Some(last) = its.last() else {
        return Err(PefError::InsufficientData {
            needed: window + 1,
            available: 0,
        });
    };
    let final_step = if its.len() >= 2 { its[its.len() - 2].distance(last) } else { 0.0 };
    let d0 = its[0].distance(last);
    let floor = (1e3 * final_step).max(1e-12 * d0);
    let eligible: Vec<f64> = its[..its.len() - 1]
        .iter()
        .map(|c| c.distance(last))
        .take_while(|&d| d > floor)
        .collect();
    if eligible.len() < window + 1 {
        return Err(PefError::InsufficientData {
            needed: window + 1,
            available: eligible.len(),
        });
    }
    fit_log_rate(&eligible, window)
}

/// Terms of the stationary-point overlap bound and the wirelength gap bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryReport {
    pub f_star: f64,
    pub w_star: f64,
    pub e_star: f64,
    pub overlap_star: f64,
    pub beta_hat: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub epsilon_prime: f64,
    #[serde(rename = "P_sigma")]
    pub p_sigma: f64,
    pub w_min: f64,
    pub opt: Option<OptimalTerms>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalTerms {
    pub f_opt: f64,
    pub w_opt: f64,
    pub e_opt: f64,
    /// `W(c_opt) − W_min`.
    pub delta_w: f64,
    /// `F(c*) ≤ F(c_opt)`.
    pub premise: bool,
    /// `ε′ P_Σ + (E_ε(c_opt) + ΔW/λ) / C`.
    pub overlap_bound: f64,
    pub overlap_bound_holds: bool,
    /// `W(c*) − W(c_opt)`.
    pub w_gap: f64,
    /// `λ E_ε(c_opt)`.
    pub w_gap_bound: f64,
    pub w_gap_bound_holds: bool,
}

impl StationaryReport {
    pub fn require_premise(&self) -> Result<()> {
        match self.opt {
            Some(o) if !o.premise => Err(PefError::PremiseNotMet {
                f_star: self.f_star,
                f_opt: o.f_opt,
            }),
            _ => Ok(()),
        }
    }
}

/// Evaluates the stationary-point bounds at `c_star` against a
/// non-overlapping reference layout `c_opt`.
pub fn stationary_report(obj: &Objective<'_>, c_star: &Placement, c_opt: Option<&Placement>, modes: usize) -> Result<StationaryReport> {
    let design = obj.design;
    let star = obj.value(c_star)?;
    let report = obj.spectral_report(c_star, modes)?;
    let rho_bar = design.mean_density();
    let c = energy::certificate_constant(report.beta_hat, rho_bar, report.lambda_n);
    let epsilon_prime = std::f64::consts::SQRT_2 * obj.cfg.epsilon;
    let p_sigma = geometry::total_perimeter(design);
    let w_min = wirelength::smooth_wl_lower_bound(&design.netlist, &obj.cfg.smoothing());
    let overlap_star = geometry::overlap_area(design, c_star)?;
    let opt = match c_opt {
        None => None,
        Some(c_opt) => {
            let o = geometry::overlap_area(design, c_opt)?;
            if o > 0.0 {
                return Err(PefError::InvalidConfig(format!(
                    "reference layout overlaps (area {o:e})"
                )));
            }
            let v = obj.value(c_opt)?;
            let lambda = obj.cfg.lambda;
            let delta_w = v.w - w_min;
            let premise = star.f <= v.f;
            let excess = if lambda > 0.0 { v.e_eps + delta_w / lambda } else { f64::INFINITY };
            let overlap_bound = if c > 0.0 { epsilon_prime * p_sigma + excess / c } else { f64::INFINITY };
            let w_gap = star.w - v.w;
            let w_gap_bound = lambda * v.e_eps;
            let slack = 1e-12 * star.f.abs().max(v.f.abs());
            Some(OptimalTerms {
                f_opt: v.f,
                w_opt: v.w,
                e_opt: v.e_eps,
                delta_w,
                premise,
                overlap_bound,
                overlap_bound_holds: overlap_star <= overlap_bound,
                w_gap,
                w_gap_bound,
                w_gap_bound_holds: w_gap <= w_gap_bound + slack,
            })
        }
    };
    Ok(StationaryReport {
        f_star: star.f,
        w_star: star.w,
        e_star: star.e_eps,
        overlap_star,
        beta_hat: report.beta_hat,
        c,
        epsilon_prime,
        p_sigma,
        w_min,
        opt,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub delta: f64,
    pub quotients: Vec<f64>,
    pub mean: f64,
    pub max: f64,
}

/// Re-solves with module areas scaled by `1 + δ u_i`, `u_i ∈ [−1, 1]` drawn
/// per seed, warm-started from `base`, and reports
/// `‖c*(A + ΔA) − c*(A)‖ / ‖ΔA‖`.
pub fn stability_probe(
    design: &Design,
    cfg: &ObjectiveConfig,
    base: &Placement,
    delta: f64,
    seeds: &[u64],
    opts: &RunOptions,
) -> Result<StabilityReport> {
    if delta == 0.0 {
        return Ok(StabilityReport {
            delta,
            quotients: vec![0.0; seeds.len()],
            mean: 0.0,
            max: 0.0,
        });
    }
    let mut quotients = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut rng = sample::rng(seed);
        let scales: Vec<f64> = (0..design.len()).map(|_| 1.0 + delta * rng.gen_range(-1.0..=1.0)).collect();
        quotients.push(area_response(design, cfg, base, &scales, opts)?);
    }
    let mean = quotients.iter().sum::<f64>() / quotients.len().max(1) as f64;
    let max = quotients.iter().copied().fold(0.0, f64::max);
    Ok(StabilityReport {
        delta,
        quotients,
        mean,
        max,
    })
}

/// `‖c*(A·s) − base‖ / ‖A·s − A‖` for one set of area scales.
pub fn area_response(design: &Design, cfg: &ObjectiveConfig, base: &Placement, scales: &[f64], opts: &RunOptions) -> Result<f64> {
    let perturbed = design.with_area_scales(scales)?;
    let d_area = design
        .modules
        .iter()
        .zip(&perturbed.modules)
        .map(|(a, b)| (b.area() - a.area()).powi(2))
        .sum::<f64>()
        .sqrt();
    if d_area == 0.0 {
        return Ok(0.0);
    }
    let mut obj = Objective::new(&perturbed, *cfg)?;
    let (c, _) = pgd_run(&mut obj, base, opts)?;
    Ok(c.distance(base) / d_area)
}

/// `‖F_i(c with c_j moved by shift) − F_i(c)‖ / ‖shift‖`: how strongly the
/// penalty force on module `i` responds to moving module `j`.
pub fn force_sensitivity(
    obj: &Objective<'_>,
    p: &Placement,
    i: usize,
    j: usize,
    shift: [f64; 2],
    penalty: Penalty,
) -> Result<f64> {
    let before = obj.penalty_forces(p, penalty)?[i];
    let mut moved = p.clone();
    moved.centers[j] = Point::new(p.centers[j].x + shift[0], p.centers[j].y + shift[1]);
    let after = obj.penalty_forces(&moved, penalty)?[i];
    let d = ((after[0] - before[0]).powi(2) + (after[1] - before[1]).powi(2)).sqrt();
    Ok(d / (shift[0].hypot(shift[1])))
}

/// Whether the ε-dilations of modules `i` and `j` are disjoint, both at `p`
/// and after moving `j` by `shift`.
pub fn dilated_supports_disjoint(design: &Design, p: &Placement, i: usize, j: usize, shift: [f64; 2], epsilon: f64) -> bool {
    let dilate = |m: usize, c: Point| {
        let r = rect_of(&design.modules[m], c);
        geometry::AxisRect {
            left: r.left - epsilon,
            right: r.right + epsilon,
            bottom: r.bottom - epsilon,
            top: r.top + epsilon,
        }
    };
    let ri = dilate(i, p.centers[i]);
    let cj = p.centers[j];
    [cj, Point::new(cj.x + shift[0], cj.y + shift[1])]
        .into_iter()
        .all(|c| ri.intersect(&dilate(j, c)).is_none())
}
