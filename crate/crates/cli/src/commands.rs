//! Subcommands and their file outputs.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use pef_core::energy::{self, SpectralReport};
use pef_core::field::{self, Grid, GridSpec, MollifierConfig, ScalarField};
use pef_core::flow::{self, FlowConfig};
use pef_core::optimize::{self, Objective};
use pef_core::{geometry, sample, Design, Placement, PoissonSolver};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::io::{self, with_suffix, Config, FlowInput, Outputs};
use crate::svg;
use crate::verify::{self, Fault, VerifyOptions, VerifyReport};

#[derive(Debug, Parser)]
#[command(name = "pef", version, about = "Poisson-energy floorplanning")]
pub struct Cli {
    /// Seed for every random choice (start layouts, probes, test instances).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Grid size, overriding every grid in the config file.
    #[arg(long, global = true, num_args = 2, value_names = ["NX", "NY"])]
    pub grid: Option<Vec<usize>>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize a placement and write centers, diagnostics and a layout SVG.
    Place {
        design: PathBuf,
        config: PathBuf,
        out_prefix: PathBuf,
    },
    /// Run the invariant battery on the design and on seeded instances.
    Verify {
        design: PathBuf,
        config: PathBuf,
        /// Also write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Number of seeded random instances.
        #[arg(long, default_value_t = 4)]
        instances: usize,
        /// Scale the eigenvalues used for the energy (fault injection).
        #[arg(long, hide = true)]
        corrupt_eigenvalues: Option<f64>,
    },
    /// Spectral report and the lowest modes of the layout's residual.
    Spectrum {
        design: PathBuf,
        config: PathBuf,
        modes: usize,
        out: PathBuf,
    },
    /// Gradient flow of a density file or of a design's density.
    Flow {
        input: PathBuf,
        config: PathBuf,
        out_prefix: PathBuf,
        /// Also run the heat flow from the same start and write both series.
        #[arg(long)]
        compare_heat: bool,
    },
}

impl Cli {
    pub fn grid_override(&self) -> Option<GridSpec> {
        self.grid.as_ref().map(|g| GridSpec { nx: g[0], ny: g[1] })
    }
}

fn load_config(path: &Path, grid: Option<GridSpec>) -> Result<Config> {
    let mut cfg = io::load_config(path)?;
    if let Some(g) = grid {
        cfg.override_grid(g);
    }
    Ok(cfg)
}

/// The file's start centers, or a seeded random feasible layout.
fn start_placement(design: &Design, initial: Option<Placement>, seed: u64) -> Placement {
    initial.unwrap_or_else(|| sample::random_placement(&mut sample::rng(seed), design))
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Runs one subcommand. Verification failures come back as
/// [`CliError::VerificationFailed`] after the report has been emitted.
pub fn run(cli: &Cli) -> Result<()> {
    let grid = cli.grid_override();
    match &cli.command {
        Command::Place {
            design,
            config,
            out_prefix,
        } => {
            let (design, initial) = io::load_design(design)?;
            let cfg = load_config(config, grid)?;
            let written = place(&design, initial, &cfg, cli.seed, out_prefix)?.commit()?;
            for p in written {
                log::info!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::Verify {
            design,
            config,
            out,
            instances,
            corrupt_eigenvalues,
        } => {
            let (design, initial) = io::load_design(design)?;
            let cfg = load_config(config, grid)?;
            let opts = VerifyOptions {
                seed: cli.seed,
                random_instances: *instances,
                modes: cfg.modes,
                fault: corrupt_eigenvalues.map(Fault::ScaleEigenvalues),
            };
            let report = run_verify(&design, initial, &cfg, &opts)?;
            let text = json(&report);
            if let Some(path) = out {
                let mut o = Outputs::new();
                o.add(path, text.clone());
                o.commit()?;
            }
            print!("{text}");
            if report.passed {
                Ok(())
            } else {
                Err(CliError::VerificationFailed {
                    failed: report.failed(),
                })
            }
        }
        Command::Spectrum {
            design,
            config,
            modes,
            out,
        } => {
            let (design, initial) = io::load_design(design)?;
            let cfg = load_config(config, grid)?;
            let (csv, report) = spectrum(&design, initial, &cfg, cli.seed, *modes)?;
            let mut o = Outputs::new();
            o.add(out, csv);
            o.commit()?;
            print!("{}", json(&report));
            Ok(())
        }
        Command::Flow {
            input,
            config,
            out_prefix,
            compare_heat,
        } => {
            let input = io::load_flow_input(input)?;
            let cfg = load_config(config, grid)?;
            flow_outputs(input, &cfg, cli.seed, out_prefix, *compare_heat)?.commit()?;
            Ok(())
        }
    }
}

#[derive(Debug, Serialize)]
struct PlacementSummary<'a> {
    centers: &'a [pef_core::Point],
    #[serde(rename = "F")]
    f: f64,
    #[serde(rename = "W")]
    w: f64,
    #[serde(rename = "E_eps")]
    e_eps: f64,
    hpwl: f64,
    overlap: f64,
    lambda: f64,
    iterations: usize,
    converged: bool,
    lipschitz: Option<f64>,
    eta0: f64,
    descent_violations: usize,
    step_reductions: usize,
    certificate: Option<energy::OverlapCertificate>,
}

/// `<prefix>.placement.json`, `<prefix>.diag.csv` and `<prefix>.layout.svg`.
pub fn place(design: &Design, initial: Option<Placement>, cfg: &Config, seed: u64, prefix: &Path) -> Result<Outputs> {
    let ocfg = cfg.objective()?;
    let mut obj = Objective::new(design, ocfg)?;
    let start = start_placement(design, initial, seed);
    let (c, diag) = optimize::pgd_run(&mut obj, &start, &cfg.run_options(seed))?;
    let value = obj.value(&c)?;
    let last = diag.records.last();
    let summary = PlacementSummary {
        centers: &c.centers,
        f: value.f,
        w: value.w,
        e_eps: value.e_eps,
        hpwl: pef_core::wirelength::hpwl(&design.netlist, &c)?,
        overlap: geometry::overlap_area(design, &c)?,
        lambda: last.map_or(ocfg.lambda, |r| r.lambda),
        iterations: diag.iterations,
        converged: diag.converged,
        lipschitz: diag.lipschitz,
        eta0: diag.eta0,
        descent_violations: diag.descent_violations,
        step_reductions: diag.step_reductions,
        certificate: diag.final_certificate,
    };
    let mut out = Outputs::new();
    out.add(with_suffix(prefix, ".placement.json"), json(&summary));
    out.add(with_suffix(prefix, ".diag.csv"), diag.to_csv());
    out.add(with_suffix(prefix, ".layout.svg"), svg::layout_svg(design, &c)?);
    Ok(out)
}

pub fn run_verify(design: &Design, initial: Option<Placement>, cfg: &Config, opts: &VerifyOptions) -> Result<VerifyReport> {
    let ocfg = cfg.objective()?;
    design.check_density_feasible()?;
    let start = start_placement(design, initial, opts.seed);
    verify::verify(design, &start, &ocfg, opts)
}

/// Per-mode CSV of the `n` lowest nonconstant modes followed by a Parseval
/// footer comparing `Σ α²` over all modes with `∫ f²`.
pub fn spectrum_csv(solver: &PoissonSolver, f: &ScalarField, n: usize) -> Result<(String, SpectralReport)> {
    let s = solver.zero_mean_spectrum(f)?;
    let report = energy::spectral_report_from(solver, &s, n)?;
    let mut out = String::from("k,l,lambda_discrete,lambda_continuum,alpha\n");
    for m in solver.lowest_modes(&s, n) {
        out.push_str(&format!("{},{},{:e},{:e},{:e}\n", m.k, m.l, m.lambda, m.lambda_continuum, m.alpha));
    }
    let sum = s.parseval_sum();
    let l2 = f.dot(f);
    let err = if l2 == 0.0 { sum.abs() } else { (sum - l2).abs() / l2 };
    out.push_str(&format!("# parseval sum_alpha2={sum:e} integral_f2={l2:e} relative_error={err:e}\n"));
    Ok((out, report))
}

pub fn spectrum(
    design: &Design,
    initial: Option<Placement>,
    cfg: &Config,
    seed: u64,
    n: usize,
) -> Result<(String, SpectralReport)> {
    let ocfg = cfg.objective()?;
    let obj = Objective::new(design, ocfg)?;
    let p = start_placement(design, initial, seed);
    spectrum_csv(obj.solver(), &obj.residual(&p)?, n)
}

fn snapshot_csv(rho: &ScalarField) -> String {
    let g = rho.grid;
    let mut out = String::from("i,j,x,y,rho\n");
    for i in 0..g.nx {
        for j in 0..g.ny {
            out.push_str(&format!(
                "{i},{j},{:e},{:e},{:e}\n",
                g.x_center(i),
                g.y_center(j),
                rho.values[[i, j]]
            ));
        }
    }
    out
}

/// Initial density of a flow run: a density file as given, or the design's
/// density at its start layout on the flow grid. Without an `objective`
/// section the design density uses exact cell coverage.
pub fn flow_density(input: FlowInput, cfg: &Config, flow: &FlowConfig, seed: u64) -> Result<ScalarField> {
    match input {
        FlowInput::Density(rho) => Ok(rho),
        FlowInput::Design(design, initial) => {
            let p = start_placement(&design, initial, seed);
            let moll = match cfg.objective {
                Some(o) => {
                    design.check_erosion(o.epsilon)?;
                    o.mollifier()
                }
                None => MollifierConfig::quartic(0.0),
            };
            let grid = Grid::for_design(flow.grid, &design)?;
            Ok(field::density(&design, &p, &moll, &grid)?.field)
        }
    }
}

/// `<prefix>.ledger.csv`, `<prefix>.snapshot_<k>.csv` per recorded state,
/// and `<prefix>.heat.csv` with `compare_heat`.
pub fn flow_outputs(input: FlowInput, cfg: &Config, seed: u64, prefix: &Path, compare_heat: bool) -> Result<Outputs> {
    let fcfg = cfg.flow()?;
    fcfg.validate()?;
    let rho0 = flow_density(input, cfg, &fcfg, seed)?;
    let solver = PoissonSolver::new(rho0.grid);
    let run = flow::wgf_run(&rho0, &solver, &fcfg)?;
    let mut out = Outputs::new();
    out.add(with_suffix(prefix, ".ledger.csv"), run.ledger_csv());
    for (k, (_, rho)) in run.snapshots.iter().enumerate() {
        out.add(with_suffix(prefix, &format!(".snapshot_{k}.csv")), snapshot_csv(rho));
    }
    if compare_heat {
        let cmp = flow::heat_flow_compare(&rho0, &solver, &fcfg)?;
        out.add(with_suffix(prefix, ".heat.csv"), cmp.csv());
    }
    Ok(out)
}
