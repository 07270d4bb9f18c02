//! Plain SVG rendering of a floorplan for eyeballing results.

use crate::model::Floorplan;

/// Renders the outline and all module rectangles. Fills are translucent so
/// overlapping regions show up darker; soft and hard modules get different
/// colors. The y axis is flipped to the usual plot orientation.
pub fn render_svg(fp: &Floorplan, with_labels: bool) -> String {
    let (w, h) = (fp.outline.w, fp.outline.h);
    let scale = 900.0 / w.max(h);
    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" \
         viewBox=\"0 0 {w} {h}\">\n",
        w * scale,
        h * scale
    ));
    out.push_str(&format!(
        "<rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\" \
         stroke=\"black\" stroke-width=\"{}\"/>\n",
        2.0 / scale
    ));
    for i in 0..fp.len() {
        let r = fp.rect(i);
        let color = if fp.specs[i].is_soft() { "#4c78a8" } else { "#e45756" };
        out.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{color}\" \
             fill-opacity=\"0.5\" stroke=\"#222\" stroke-width=\"{}\"/>\n",
            r.lx,
            h - r.uy,
            r.width(),
            r.height(),
            0.8 / scale
        ));
        if with_labels {
            let size = (r.width().min(r.height()) * 0.3).min(h * 0.02);
            out.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-size=\"{size}\" text-anchor=\"middle\" \
                 dominant-baseline=\"middle\">{}</text>\n",
                fp.states[i].x,
                h - fp.states[i].y,
                fp.specs[i].name
            ));
        }
    }
    out.push_str("</svg>\n");
    out
}
