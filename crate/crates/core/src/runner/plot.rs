//! SVG scatter of reference and generated samples.

use std::fmt::Write;

use crate::gmm::GmmSpec;
use crate::metrics::QUALITY_RADIUS_SIGMAS;
use crate::tensor::Tensor;

const REAL_COLOR: &str = "#1f77b4";
const GEN_COLOR: &str = "#d62728";

/// Square SVG of side `size` pixels. Real points are blue dots, generated
/// points red crosses, and each component mean gets a dashed 3-sigma circle.
/// The view is the means' bounding box padded by a quarter of its extent
/// (at least one unit); points outside it are clipped.
pub fn scatter_svg(real: &Tensor, gen: &Tensor, spec: &GmmSpec, size: u32) -> String {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for m in spec.means() {
        for a in 0..2 {
            lo[a] = lo[a].min(m[a]);
            hi[a] = hi[a].max(m[a]);
        }
    }
    let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let pad = (0.25 * extent).max(1.0);
    let (x0, y1) = (lo[0] - pad, hi[1] + pad);
    let span = extent + 2.0 * pad;
    let px = size as f64;
    let k = px / span;
    let sx = |x: f64| (x - x0) * k;
    let sy = |y: f64| (y1 - y) * k;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r##"<g id="real" fill="{REAL_COLOR}" fill-opacity="0.5">"##
    );
    for p in real.row_iter() {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="1.5"/>"#,
            sx(p[0]),
            sy(p[1])
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r##"<g id="generated" stroke="{GEN_COLOR}" stroke-width="1">"##
    );
    for p in gen.row_iter() {
        let (cx, cy) = (sx(p[0]), sy(p[1]));
        let _ = writeln!(
            s,
            r#"<path d="M{:.2} {:.2}L{:.2} {:.2}M{:.2} {:.2}L{:.2} {:.2}"/>"#,
            cx - 2.0,
            cy - 2.0,
            cx + 2.0,
            cy + 2.0,
            cx - 2.0,
            cy + 2.0,
            cx + 2.0,
            cy - 2.0
        );
    }
    let _ = writeln!(s, "</g>");
    let r = QUALITY_RADIUS_SIGMAS * spec.sigma() * k;
    let _ = writeln!(
        s,
        r#"<g id="modes" fill="none" stroke="black" stroke-dasharray="3,2">"#
    );
    for m in spec.means() {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="{r:.2}"/>"#,
            sx(m[0]),
            sy(m[1])
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r##"<text x="8" y="16" font-family="sans-serif" font-size="12" fill="{REAL_COLOR}">real ({})</text>"##,
        real.rows()
    );
    let _ = writeln!(
        s,
        r##"<text x="8" y="32" font-family="sans-serif" font-size="12" fill="{GEN_COLOR}">generated ({})</text>"##,
        gen.rows()
    );
    s.push_str("</svg>\n");
    s
}
