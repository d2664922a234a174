//! Netlists, half-perimeter wirelength and its smooth surrogates.
//!
//! Pins sit at module centers or at fixed pad locations. Both smooth models
//! work per net and per axis: log-sum-exp over-approximates the pin span,
//! the weighted-average model under-approximates it, and both converge to
//! HPWL as `gamma -> 0`.

use serde::{Deserialize, Serialize};

use crate::error::{PefError, Result};
use crate::geometry::{Placement, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Pin {
    Module {
        #[serde(rename = "m")]
        index: usize,
    },
    Fixed {
        #[serde(rename = "fixed")]
        at: Point,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Net {
    pub pins: Vec<Pin>,
}

impl Net {
    pub fn new(pins: Vec<Pin>) -> Self {
        Self { pins }
    }

    pub fn between(a: usize, b: usize) -> Self {
        Self::new(vec![Pin::Module { index: a }, Pin::Module { index: b }])
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Netlist {
    pub nets: Vec<Net>,
}

impl Netlist {
    pub fn new(nets: Vec<Net>) -> Self {
        Self { nets }
    }

    pub fn validate(&self, modules: usize) -> Result<()> {
        for (n, net) in self.nets.iter().enumerate() {
            if net.pins.is_empty() {
                return Err(PefError::InvalidConfig(format!("net {n} has no pins")));
            }
            for pin in &net.pins {
                if let Pin::Module { index } = *pin {
                    if index >= modules {
                        return Err(PefError::InvalidPinIndex {
                            net: n,
                            index,
                            modules,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn has_fixed_pins(&self) -> bool {
        self.nets
            .iter()
            .flat_map(|n| &n.pins)
            .any(|p| matches!(p, Pin::Fixed { .. }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum WirelengthModel {
    #[default]
    #[serde(rename = "LSE")]
    Lse,
    #[serde(rename = "WA")]
    Wa,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    pub gamma: f64,
    pub model: WirelengthModel,
}

impl SmoothingConfig {
    pub fn new(gamma: f64, model: WirelengthModel) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(PefError::InvalidConfig(format!("gamma must be positive, got {gamma}")));
        }
        Ok(Self { gamma, model })
    }

    /// 1% of the shorter domain side.
    pub fn default_gamma(width: f64, height: f64) -> f64 {
        0.01 * width.min(height)
    }
}

fn resolve(net_idx: usize, pin: &Pin, placement: &Placement) -> Result<(Point, Option<usize>)> {
    match *pin {
        Pin::Module { index } => placement
            .centers
            .get(index)
            .map(|&p| (p, Some(index)))
            .ok_or(PefError::InvalidPinIndex {
                net: net_idx,
                index,
                modules: placement.len(),
            }),
        Pin::Fixed { at } => Ok((at, None)),
    }
}

fn pins_of(net_idx: usize, net: &Net, placement: &Placement) -> Result<Vec<(Point, Option<usize>)>> {
    net.pins.iter().map(|p| resolve(net_idx, p, placement)).collect()
}

fn span(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    let min = values.fold(f64::INFINITY, f64::min);
    max - min
}

pub fn hpwl(netlist: &Netlist, placement: &Placement) -> Result<f64> {
    let mut total = 0.0;
    for (n, net) in netlist.nets.iter().enumerate() {
        let pins = pins_of(n, net, placement)?;
        total += span(pins.iter().map(|p| p.0.x)) + span(pins.iter().map(|p| p.0.y));
    }
    Ok(total)
}

/// Smoothed span of one coordinate set, and its derivative per entry.
fn smooth_span(xs: &[f64], cfg: &SmoothingConfig, grad: Option<&mut [f64]>) -> f64 {
    let g = cfg.gamma;
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    // stabilized weights: p_k ∝ exp((x_k - max)/γ), q_k ∝ exp((min - x_k)/γ)
    let ep: Vec<f64> = xs.iter().map(|&x| ((x - max) / g).exp()).collect();
    let eq: Vec<f64> = xs.iter().map(|&x| ((min - x) / g).exp()).collect();
    let sp: f64 = ep.iter().sum();
    let sq: f64 = eq.iter().sum();
    match cfg.model {
        WirelengthModel::Lse => {
            if let Some(grad) = grad {
                for k in 0..xs.len() {
                    grad[k] = ep[k] / sp - eq[k] / sq;
                }
            }
            (max + g * sp.ln()) + (-min + g * sq.ln())
        }
        WirelengthModel::Wa => {
            let hi: f64 = xs.iter().zip(&ep).map(|(x, e)| x * e).sum::<f64>() / sp;
            let lo: f64 = xs.iter().zip(&eq).map(|(x, e)| x * e).sum::<f64>() / sq;
            if let Some(grad) = grad {
                for k in 0..xs.len() {
                    let p = ep[k] / sp;
                    let q = eq[k] / sq;
                    grad[k] = p * (1.0 + (xs[k] - hi) / g) - q * (1.0 - (xs[k] - lo) / g);
                }
            }
            hi - lo
        }
    }
}

pub fn smooth_wl(netlist: &Netlist, placement: &Placement, cfg: &SmoothingConfig) -> Result<f64> {
    let mut total = 0.0;
    for (n, net) in netlist.nets.iter().enumerate() {
        let pins = pins_of(n, net, placement)?;
        let xs: Vec<f64> = pins.iter().map(|p| p.0.x).collect();
        let ys: Vec<f64> = pins.iter().map(|p| p.0.y).collect();
        total += smooth_span(&xs, cfg, None) + smooth_span(&ys, cfg, None);
    }
    Ok(total)
}

/// Gradient over the flattened centers `[x0, y0, x1, y1, ...]`.
/// Fixed pins shape the net terms but receive nothing.
pub fn smooth_wl_grad(netlist: &Netlist, placement: &Placement, cfg: &SmoothingConfig) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; 2 * placement.len()];
    for (n, net) in netlist.nets.iter().enumerate() {
        let pins = pins_of(n, net, placement)?;
        let xs: Vec<f64> = pins.iter().map(|p| p.0.x).collect();
        let ys: Vec<f64> = pins.iter().map(|p| p.0.y).collect();
        let mut gx = vec![0.0; xs.len()];
        let mut gy = vec![0.0; ys.len()];
        smooth_span(&xs, cfg, Some(&mut gx));
        smooth_span(&ys, cfg, Some(&mut gy));
        for (k, (_, module)) in pins.iter().enumerate() {
            if let Some(i) = *module {
                grad[2 * i] += gx[k];
                grad[2 * i + 1] += gy[k];
            }
        }
    }
    Ok(grad)
}

/// Exact infimum of HPWL over unconstrained free-pin positions.
///
/// A net with only module pins can collapse to a point; a net with fixed
/// pins cannot shrink below the bounding box of those pins.
pub fn hpwl_infimum(netlist: &Netlist) -> f64 {
    netlist
        .nets
        .iter()
        .map(|net| {
            let fixed: Vec<Point> = net
                .pins
                .iter()
                .filter_map(|p| match p {
                    Pin::Fixed { at } => Some(*at),
                    Pin::Module { .. } => None,
                })
                .collect();
            if fixed.is_empty() {
                0.0
            } else {
                span(fixed.iter().map(|p| p.x)) + span(fixed.iter().map(|p| p.y))
            }
        })
        .sum()
}

/// A lower bound on `inf smooth_wl` for the configured model.
///
/// LSE dominates HPWL, so the HPWL infimum bounds it from below. WA can dip
/// under HPWL when fixed pins are present but never below zero.
pub fn smooth_wl_lower_bound(netlist: &Netlist, cfg: &SmoothingConfig) -> f64 {
    match cfg.model {
        WirelengthModel::Lse => hpwl_infimum(netlist),
        WirelengthModel::Wa => 0.0,
    }
}
