//! Finite-volume Wasserstein-2 gradient flow of the Poisson energy,
//! `∂ₜρ = ∇·(ρ∇φ)` with `−Δφ = ρ − ρ̄` and no-flux walls, plus the heat
//! flow `∂ₜρ = Δρ` on the same grid for comparison.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{PefError, Result};
use crate::field::{residual, GridSpec, ScalarField};
use crate::par;
use crate::spectral::{gradient_field, PoissonSolver};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    /// Grid used when the initial density is synthesized from a design.
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    pub t_end: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Hard cap on the number of steps.
    #[serde(default)]
    pub max_steps: Option<usize>,
}

fn default_cfl() -> f64 {
    0.5
}

fn default_record_every() -> usize {
    100
}

impl FlowConfig {
    pub fn new(t_end: f64) -> Self {
        Self {
            grid: GridSpec::default(),
            cfl: default_cfl(),
            t_end,
            record_every: default_record_every(),
            max_steps: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(PefError::InvalidConfig(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(PefError::InvalidConfig(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        if self.record_every == 0 {
            return Err(PefError::InvalidConfig("record_every must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FlowState {
    pub rho: ScalarField,
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
}

impl FlowState {
    pub fn new(rho: ScalarField, solver: &PoissonSolver) -> Result<Self> {
        if rho.min() < 0.0 {
            return Err(PefError::NegativeDensity {
                min: rho.min(),
                max: rho.max(),
            });
        }
        let mass = rho.integral();
        let (_, energy) = potential(&rho, solver)?;
        Ok(Self {
            rho,
            t: 0.0,
            mass,
            energy,
        })
    }
}

/// `φ = G(ρ − ρ̄)` and `E = ½ Σ α²/λ`, with `ρ̄` from the current mass.
fn potential(rho: &ScalarField, solver: &PoissonSolver) -> Result<(ScalarField, f64)> {
    let rho_bar = rho.integral() / (rho.grid.width * rho.grid.height);
    let f = residual(rho, rho_bar);
    let (phi, s) = solver.solve_with_spectrum(&f)?;
    Ok((phi, 0.5 * s.hminus1_norm_sq()))
}

/// Face fluxes of one step. `fx[[i, j]]` crosses the face between cells
/// `(i, j)` and `(i + 1, j)`; wall faces carry no flux and are not stored.
struct Fluxes {
    fx: Array2<f64>,
    fy: Array2<f64>,
}

/// Face velocities `v = −∇φ` and upwinded mass fluxes `v ρ_upwind`.
fn transport_fluxes(rho: &ScalarField, phi: &ScalarField) -> (Fluxes, f64) {
    let g = rho.grid;
    let (nx, ny) = (g.nx, g.ny);
    let (r, p) = (&rho.values, &phi.values);
    let mut vmax: f64 = 0.0;
    let fx = Array2::from_shape_fn((nx - 1, ny), |(i, j)| {
        let v = -(p[[i + 1, j]] - p[[i, j]]) / g.hx();
        v * if v > 0.0 { r[[i, j]] } else { r[[i + 1, j]] }
    });
    let fy = Array2::from_shape_fn((nx, ny - 1), |(i, j)| {
        let v = -(p[[i, j + 1]] - p[[i, j]]) / g.hy();
        v * if v > 0.0 { r[[i, j]] } else { r[[i, j + 1]] }
    });
    for i in 0..nx {
        for j in 0..ny {
            if i + 1 < nx {
                vmax = vmax.max(((p[[i + 1, j]] - p[[i, j]]) / g.hx()).abs());
            }
            if j + 1 < ny {
                vmax = vmax.max(((p[[i, j + 1]] - p[[i, j]]) / g.hy()).abs());
            }
        }
    }
    (Fluxes { fx, fy }, vmax)
}

/// Centered diffusive fluxes `−∇ρ` across interior faces.
fn diffusive_fluxes(rho: &ScalarField) -> Fluxes {
    let g = rho.grid;
    let r = &rho.values;
    Fluxes {
        fx: Array2::from_shape_fn((g.nx - 1, g.ny), |(i, j)| -(r[[i + 1, j]] - r[[i, j]]) / g.hx()),
        fy: Array2::from_shape_fn((g.nx, g.ny - 1), |(i, j)| -(r[[i, j + 1]] - r[[i, j]]) / g.hy()),
    }
}

/// `ρ − dt · div F`; each cell is written once, so rows update in parallel.
fn apply_fluxes(rho: &ScalarField, fl: &Fluxes, dt: f64) -> ScalarField {
    let g = rho.grid;
    let (nx, ny) = (g.nx, g.ny);
    let (hx, hy) = (g.hx(), g.hy());
    let mut values = rho.values.as_standard_layout().into_owned();
    par::for_each_row(values.as_slice_mut().expect("standard layout"), ny, |i, row| {
        for (j, v) in row.iter_mut().enumerate() {
            let east = if i + 1 < nx { fl.fx[[i, j]] } else { 0.0 };
            let west = if i > 0 { fl.fx[[i - 1, j]] } else { 0.0 };
            let north = if j + 1 < ny { fl.fy[[i, j]] } else { 0.0 };
            let south = if j > 0 { fl.fy[[i, j - 1]] } else { 0.0 };
            *v -= dt * ((east - west) / hx + (north - south) / hy);
        }
    });
    ScalarField { grid: g, values }
}

fn check_positive(rho: &ScalarField) -> Result<()> {
    let (min, max) = (rho.min(), rho.max());
    if min < -1e-12 * max {
        return Err(PefError::NegativeDensity { min, max });
    }
    Ok(())
}

/// `dt = cfl · min(h) / max|v|`, also capped by `cfl / max ρ` and by `cap`.
///
/// Along the flow `∇·v = ρ − ρ̄`, so a cell relaxes at a rate of order `ρ`
/// even where velocities are small; the second cap keeps forward Euler
/// inside that time scale.
fn cfl_step(cfl: f64, h: f64, vmax: f64, rho_max: f64, cap: f64) -> f64 {
    let mut dt = cap;
    if vmax * dt > cfl * h {
        dt = cfl * h / vmax;
    }
    if rho_max * dt > cfl {
        dt = cfl / rho_max;
    }
    dt
}

fn advance(state: &FlowState, phi: &ScalarField, cfg: &FlowConfig, cap: f64) -> Result<(ScalarField, f64)> {
    let g = state.rho.grid;
    let (fluxes, vmax) = transport_fluxes(&state.rho, phi);
    let dt = if vmax == 0.0 {
        cap
    } else {
        cfl_step(cfg.cfl, g.hx().min(g.hy()), vmax, state.rho.max(), cap)
    };
    let next = apply_fluxes(&state.rho, &fluxes, dt);
    check_positive(&next)?;
    Ok((next, dt))
}

/// One forward-Euler upwind step of the gradient flow, with `dt` from the
/// CFL rule (at most `t_end − t`, or `t_end` when already past it).
pub fn wgf_step(state: &FlowState, solver: &PoissonSolver, cfg: &FlowConfig) -> Result<FlowState> {
    let (phi, _) = potential(&state.rho, solver)?;
    let cap = if state.t < cfg.t_end { cfg.t_end - state.t } else { cfg.t_end.max(f64::MIN_POSITIVE) };
    let (rho, dt) = advance(state, &phi, cfg, cap)?;
    let (_, energy) = potential(&rho, solver)?;
    Ok(FlowState {
        mass: rho.integral(),
        rho,
        t: state.t + dt,
        energy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub t: f64,
    #[serde(rename = "E")]
    pub e: f64,
    pub mass: f64,
    pub min_rho: f64,
    /// `(E_{n+1} − E_n) / dt`.
    pub diss_lhs: f64,
    /// `−∫ ρ |∇φ|²` at the midpoint of the step.
    pub diss_rhs: f64,
    pub dt: f64,
}

impl LedgerRow {
    pub const CSV_HEADER: &'static str = "t,E,mass,min_rho,diss_lhs,diss_rhs";

    pub fn csv_row(&self) -> String {
        format!(
            "{:e},{:e},{:e},{:e},{:e},{:e}",
            self.t, self.e, self.mass, self.min_rho, self.diss_lhs, self.diss_rhs
        )
    }
}

#[derive(Debug, Clone)]
pub struct FlowRun {
    /// One row per step, describing the state at the start of the step.
    pub ledger: Vec<LedgerRow>,
    pub snapshots: Vec<(f64, ScalarField)>,
    pub final_state: FlowState,
}

impl FlowRun {
    pub fn ledger_csv(&self) -> String {
        let mut out = String::from(LedgerRow::CSV_HEADER);
        out.push('\n');
        for r in &self.ledger {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        out
    }

    /// Largest relative mass drift against the initial mass.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.ledger.first().map_or(self.final_state.mass, |r| r.mass);
        self.ledger
            .iter()
            .map(|r| r.mass)
            .chain(std::iter::once(self.final_state.mass))
            .map(|m| (m - m0).abs() / m0.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }

    /// Largest single-step energy increase.
    pub fn max_energy_increase(&self) -> f64 {
        let es: Vec<f64> = self
            .ledger
            .iter()
            .map(|r| r.e)
            .chain(std::iter::once(self.final_state.energy))
            .collect();
        es.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Time-weighted mean of `|lhs − rhs| / max(|rhs|, floor)`, with the
    /// floor at `1e-8` times the largest `|rhs|` of the run.
    pub fn dissipation_mismatch(&self) -> f64 {
        let scale = self.ledger.iter().map(|r| r.diss_rhs.abs()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let floor = 1e-8 * scale;
        let (num, den) = self.ledger.iter().fold((0.0, 0.0), |(n, d), r| {
            let rel = (r.diss_lhs - r.diss_rhs).abs() / r.diss_rhs.abs().max(floor);
            (n + rel * r.dt, d + r.dt)
        });
        num / den
    }
}

fn dissipation(rho: &ScalarField, phi: &ScalarField) -> f64 {
    let (dx, dy) = gradient_field(phi);
    let g = rho.grid;
    let s: f64 = rho
        .values
        .iter()
        .zip(dx.values.iter().zip(dy.values.iter()))
        .map(|(r, (a, b))| r * (a * a + b * b))
        .sum();
    -s * g.cell_area()
}

fn average(a: &ScalarField, b: &ScalarField) -> ScalarField {
    ScalarField {
        grid: a.grid,
        values: (&a.values + &b.values) * 0.5,
    }
}

fn step_limit(cfg: &FlowConfig) -> usize {
    cfg.max_steps.unwrap_or(usize::MAX)
}

/// Runs the gradient flow from `rho0` to `t_end` and records the energy
/// and dissipation ledger.
pub fn wgf_run(rho0: &ScalarField, solver: &PoissonSolver, cfg: &FlowConfig) -> Result<FlowRun> {
    cfg.validate()?;
    let mut state = FlowState::new(rho0.clone(), solver)?;
    let (mut phi, _) = potential(&state.rho, solver)?;
    let mut ledger = Vec::new();
    let mut snapshots = vec![(0.0, state.rho.clone())];
    let limit = step_limit(cfg);
    let mut n = 0;
    while state.t < cfg.t_end && n < limit {
        let (rho, dt) = advance(&state, &phi, cfg, cfg.t_end - state.t)?;
        let (next_phi, energy) = potential(&rho, solver)?;
        let diss_rhs = dissipation(&average(&state.rho, &rho), &average(&phi, &next_phi));
        ledger.push(LedgerRow {
            t: state.t,
            e: state.energy,
            mass: state.mass,
            min_rho: state.rho.min(),
            diss_lhs: (energy - state.energy) / dt,
            diss_rhs,
            dt,
        });
        n += 1;
        state = FlowState {
            mass: rho.integral(),
            rho,
            t: if state.t + dt >= cfg.t_end || cfg.t_end - (state.t + dt) < 1e-12 * cfg.t_end {
                cfg.t_end
            } else {
                state.t + dt
            },
            energy,
        };
        phi = next_phi;
        if n % cfg.record_every == 0 {
            snapshots.push((state.t, state.rho.clone()));
        }
    }
    log::info!("wgf: {n} steps to t = {:.4e}, E = {:.4e}", state.t, state.energy);
    Ok(FlowRun {
        ledger,
        snapshots,
        final_state: state,
    })
}

/// `∫_{x < W/2} ρ − ∫_{x > W/2} ρ`; a center column straddling the
/// midline contributes to neither side.
pub fn left_right_imbalance(rho: &ScalarField) -> f64 {
    let g = rho.grid;
    let area = g.cell_area();
    let half = g.nx / 2;
    let mut diff = 0.0;
    for i in 0..g.nx {
        let col: f64 = rho.values.row(i).sum();
        if g.nx % 2 == 1 && i == half {
            continue;
        }
        if i < half {
            diff += col;
        } else {
            diff -= col;
        }
    }
    diff * area
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub t: f64,
    #[serde(rename = "E")]
    pub e: f64,
    pub imbalance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowSeries {
    pub rows: Vec<ComparisonRow>,
    /// First time at which `|imbalance|` fell to half its initial value.
    pub half_life: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeatComparison {
    pub wgf: FlowSeries,
    pub heat: FlowSeries,
}

impl HeatComparison {
    pub fn csv(&self) -> String {
        let mut out = String::from("flow,t,E,imbalance\n");
        for (name, s) in [("wgf", &self.wgf), ("heat", &self.heat)] {
            for r in &s.rows {
                out.push_str(&format!("{name},{:e},{:e},{:e}\n", r.t, r.e, r.imbalance));
            }
        }
        out
    }
}

fn half_life(rows: &[ComparisonRow]) -> Option<f64> {
    let i0 = rows.first()?.imbalance.abs();
    if i0 == 0.0 {
        return None;
    }
    rows.iter().find(|r| r.imbalance.abs() <= 0.5 * i0).map(|r| r.t)
}

/// Runs the gradient flow and the heat flow from the same data and records
/// energy and left/right imbalance every `record_every` steps of each.
///
/// The heat flow uses centered fluxes and the explicit diffusion limit
/// `dt = cfl / (2 (1/hx² + 1/hy²))`.
pub fn heat_flow_compare(rho0: &ScalarField, solver: &PoissonSolver, cfg: &FlowConfig) -> Result<HeatComparison> {
    cfg.validate()?;
    let limit = step_limit(cfg);

    let row = |rho: &ScalarField, t: f64| -> Result<ComparisonRow> {
        Ok(ComparisonRow {
            t,
            e: potential(rho, solver)?.1,
            imbalance: left_right_imbalance(rho),
        })
    };

    let run = wgf_run(rho0, solver, cfg)?;
    let mut wgf_rows: Vec<ComparisonRow> = run
        .snapshots
        .iter()
        .map(|(t, rho)| row(rho, *t))
        .collect::<Result<_>>()?;
    if run.snapshots.last().map(|s| s.0) != Some(run.final_state.t) {
        wgf_rows.push(row(&run.final_state.rho, run.final_state.t)?);
    }

    let g = rho0.grid;
    let dt_heat = cfg.cfl / (2.0 * (1.0 / (g.hx() * g.hx()) + 1.0 / (g.hy() * g.hy())));
    let mut rho = rho0.clone();
    let mut t = 0.0;
    let mut heat_rows = vec![row(&rho, t)?];
    let mut n = 0;
    while t < cfg.t_end && n < limit {
        let dt = dt_heat.min(cfg.t_end - t);
        rho = apply_fluxes(&rho, &diffusive_fluxes(&rho), dt);
        check_positive(&rho)?;
        t = if cfg.t_end - (t + dt) < 1e-12 * cfg.t_end { cfg.t_end } else { t + dt };
        n += 1;
        if n % cfg.record_every == 0 || t >= cfg.t_end {
            heat_rows.push(row(&rho, t)?);
        }
    }
    Ok(HeatComparison {
        wgf: FlowSeries {
            half_life: half_life(&wgf_rows),
            rows: wgf_rows,
        },
        heat: FlowSeries {
            half_life: half_life(&heat_rows),
            rows: heat_rows,
        },
    })
}
