//! Seeded random instances for property checks, benches and the CLI
//! verification battery.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::field::{residual, Grid, ScalarField};
use crate::geometry::{Design, ModuleShape, Placement, Point};
use crate::wirelength::{Net, Netlist, Pin};

pub type SampleRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Side lengths are drawn uniformly from `[min_side, max_side]`.
pub fn random_shapes(rng: &mut SampleRng, n: usize, min_side: f64, max_side: f64) -> Vec<ModuleShape> {
    (0..n)
        .map(|_| {
            ModuleShape::new(rng.gen_range(min_side..=max_side), rng.gen_range(min_side..=max_side))
                .expect("positive sides")
        })
        .collect()
}

/// `nets` random 2- or 3-pin nets over `modules` modules; roughly one pin
/// in eight is a fixed pin inside `[0, width] x [0, height]`.
pub fn random_netlist(rng: &mut SampleRng, modules: usize, nets: usize, width: f64, height: f64) -> Netlist {
    let nets = (0..nets)
        .map(|_| {
            let pins = rng.gen_range(2..=3);
            Net::new(
                (0..pins)
                    .map(|_| {
                        if rng.gen_bool(0.125) {
                            Pin::Fixed {
                                at: Point::new(rng.gen_range(0.0..width), rng.gen_range(0.0..height)),
                            }
                        } else {
                            Pin::Module {
                                index: rng.gen_range(0..modules),
                            }
                        }
                    })
                    .collect(),
            )
        })
        .collect();
    Netlist::new(nets)
}

/// Unit-square design with `n` modules and `nets` random nets.
pub fn random_design(rng: &mut SampleRng, n: usize, min_side: f64, max_side: f64, nets: usize) -> Design {
    let modules = random_shapes(rng, n, min_side, max_side);
    let netlist = if n == 0 {
        Netlist::default()
    } else {
        random_netlist(rng, n, nets, 1.0, 1.0)
    };
    Design::new(modules, 1.0, 1.0, netlist).expect("sides below 1")
}

/// Feasible centers drawn uniformly from each module's box.
pub fn random_placement(rng: &mut SampleRng, design: &Design) -> Placement {
    Placement::new(
        (0..design.len())
            .map(|i| {
                let (x0, x1) = design.x_range(i);
                let (y0, y1) = design.y_range(i);
                Point::new(uniform(rng, x0, x1), uniform(rng, y0, y1))
            })
            .collect(),
    )
}

/// Feasible centers scattered within `spread` of a common anchor, so that
/// modules tend to overlap.
pub fn clustered_placement(rng: &mut SampleRng, design: &Design, spread: f64) -> Placement {
    let anchor = Point::new(rng.gen_range(0.0..design.width), rng.gen_range(0.0..design.height));
    Placement::new(
        (0..design.len())
            .map(|i| {
                let (x0, x1) = design.x_range(i);
                let (y0, y1) = design.y_range(i);
                let x = anchor.x + rng.gen_range(-spread..=spread);
                let y = anchor.y + rng.gen_range(-spread..=spread);
                Point::new(x.clamp(x0, x1), y.clamp(y0, y1))
            })
            .collect(),
    )
}

fn uniform(rng: &mut SampleRng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..=hi)
    } else {
        lo
    }
}

/// White noise in `[-1, 1]` with the discrete mean removed.
pub fn random_zero_mean_field(rng: &mut SampleRng, grid: Grid) -> ScalarField {
    let values = ndarray::Array2::from_shape_fn((grid.nx, grid.ny), |_| rng.gen_range(-1.0..1.0));
    residual(&ScalarField { grid, values }, 0.0)
}
