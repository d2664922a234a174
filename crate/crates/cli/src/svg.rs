//! Static SVG snapshot of a layout.

use std::fmt::Write;

use pef_core::geometry::{pairwise_intersections, placed_rects, AxisRect};
use pef_core::{Design, Placement};

use crate::error::Result;

const CANVAS: f64 = 800.0;
const MARGIN: f64 = 10.0;

/// Domain frame, one outlined rectangle per module and the pairwise
/// overlap regions filled in red. The y axis points up.
pub fn layout_svg(design: &Design, placement: &Placement) -> Result<String> {
    let rects = placed_rects(design, placement)?;
    let scale = CANVAS / design.width.max(design.height);
    let (w, h) = (design.width * scale, design.height * scale);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.3} {:.3}">"#,
        w + 2.0 * MARGIN,
        h + 2.0 * MARGIN,
        w + 2.0 * MARGIN,
        h + 2.0 * MARGIN
    );
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN:.3}" y="{MARGIN:.3}" width="{w:.3}" height="{h:.3}" fill="none" stroke="#000" stroke-width="2"/>"##
    );
    let place = |r: &AxisRect| {
        (
            MARGIN + r.left * scale,
            MARGIN + (design.height - r.top) * scale,
            (r.right - r.left) * scale,
            (r.top - r.bottom) * scale,
        )
    };
    for (i, r) in rects.iter().enumerate() {
        let (x, y, rw, rh) = place(r);
        let _ = writeln!(
            out,
            r##"<rect x="{x:.3}" y="{y:.3}" width="{rw:.3}" height="{rh:.3}" fill="#9ecae1" fill-opacity="0.5" stroke="#08519c" stroke-width="1"><title>module {i}</title></rect>"##
        );
    }
    for r in pairwise_intersections(&rects) {
        let (x, y, rw, rh) = place(&r);
        let _ = writeln!(
            out,
            r##"<rect x="{x:.3}" y="{y:.3}" width="{rw:.3}" height="{rh:.3}" fill="#e31a1c" fill-opacity="0.6" stroke="none"/>"##
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}
