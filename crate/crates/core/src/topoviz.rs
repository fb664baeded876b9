//! SVG scalp topographies of per-channel scores.
//!
//! Grid cells map linearly onto `[-0.8, 0.8]²` inside a unit head circle
//! (row 0 at the front). The field between channels is inverse-distance
//! weighted with power 2 and sampled on a 64×64 raster clipped to the circle.
//! Colors run blue (low) through white (zero) to red (high).

use std::fmt::Write as _;

use crate::featmap::{ChannelGrid, GRID_COLS, GRID_ROWS};

pub const RASTER: usize = 64;
pub const DEFAULT_RANGE: (f64, f64) = (-0.1, 0.1);
const SPAN: f64 = 0.8;
const PANEL: f64 = 240.0;
const MARGIN: f64 = 20.0;
const BAR_W: f64 = 16.0;
const BAR_STEPS: usize = 64;
const LOW: (f64, f64, f64) = (33.0, 102.0, 172.0);
const HIGH: (f64, f64, f64) = (178.0, 24.0, 43.0);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TopoError {
    #[error("no channel scores to plot")]
    Empty,
    #[error("score of channel {0} is not finite")]
    NonFinite(String),
    #[error("channel {0} has no grid position")]
    UnknownChannel(String),
    #[error("color range {lo} .. {hi} is empty")]
    InvalidRange { lo: f64, hi: f64 },
    #[error("panels use different color ranges: {a:?} vs {b:?}")]
    RangeMismatch { a: (f64, f64), b: (f64, f64) },
}

/// Head-plane position of a grid cell.
pub fn cell_position(row: usize, col: usize) -> (f64, f64) {
    let x = -SPAN + 2.0 * SPAN * col as f64 / (GRID_COLS - 1) as f64;
    let y = SPAN - 2.0 * SPAN * row as f64 / (GRID_ROWS - 1) as f64;
    (x, y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Site {
    pub name: String,
    pub x: f64,
    pub y: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopoPlot {
    pub sites: Vec<Site>,
    pub range: (f64, f64),
    pub title: String,
}

impl TopoPlot {
    pub fn new(scores: &[(String, f64)], grid: &ChannelGrid, range: (f64, f64), title: &str) -> Result<Self, TopoError> {
        if scores.is_empty() {
            return Err(TopoError::Empty);
        }
        if !(range.0.is_finite() && range.1.is_finite() && range.0 < range.1) {
            return Err(TopoError::InvalidRange { lo: range.0, hi: range.1 });
        }
        let sites = scores
            .iter()
            .map(|(name, score)| {
                if !score.is_finite() {
                    return Err(TopoError::NonFinite(name.clone()));
                }
                let (r, c) = grid.lookup(name).ok_or_else(|| TopoError::UnknownChannel(name.clone()))?;
                let (x, y) = cell_position(r, c);
                Ok(Site {
                    name: name.clone(),
                    x,
                    y,
                    score: *score,
                })
            })
            .collect::<Result<_, _>>()?;
        Ok(TopoPlot {
            sites,
            range,
            title: title.to_string(),
        })
    }

    /// IDW (power 2) estimate at `(x, y)`; exact at a site.
    pub fn interpolate(&self, x: f64, y: f64) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for s in &self.sites {
            let d2 = (x - s.x).powi(2) + (y - s.y).powi(2);
            if d2 == 0.0 {
                return s.score;
            }
            num += s.score / d2;
            den += 1.0 / d2;
        }
        num / den
    }

    /// Raster cell values row-major from the top; `None` outside the head.
    pub fn raster(&self) -> Vec<Option<f64>> {
        let step = 2.0 / RASTER as f64;
        let mut out = Vec::with_capacity(RASTER * RASTER);
        for i in 0..RASTER {
            let y = 1.0 - (i as f64 + 0.5) * step;
            for j in 0..RASTER {
                let x = -1.0 + (j as f64 + 0.5) * step;
                out.push((x * x + y * y <= 1.0).then(|| self.interpolate(x, y)));
            }
        }
        out
    }
}

/// Position of `v` on the color scale in `[0, 1]`, zero at the midpoint when
/// the range straddles zero.
pub fn color_position(v: f64, range: (f64, f64)) -> f64 {
    let (lo, hi) = range;
    let v = v.clamp(lo, hi);
    if lo < 0.0 && hi > 0.0 {
        if v <= 0.0 {
            0.5 * (v - lo) / -lo
        } else {
            0.5 + 0.5 * v / hi
        }
    } else {
        (v - lo) / (hi - lo)
    }
}

/// Diverging blue-white-red color for a scale position.
pub fn color_at(p: f64) -> (u8, u8, u8) {
    let p = p.clamp(0.0, 1.0);
    let (end, t) = if p < 0.5 { (LOW, 1.0 - 2.0 * p) } else { (HIGH, 2.0 * p - 1.0) };
    let mix = |e: f64| (255.0 + (e - 255.0) * t).round() as u8;
    (mix(end.0), mix(end.1), mix(end.2))
}

fn hex(c: (u8, u8, u8)) -> String {
    format!("#{:02x}{:02x}{:02x}", c.0, c.1, c.2)
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn panel(out: &mut String, plot: &TopoPlot, ox: f64, oy: f64) {
    let r = PANEL / 2.0;
    let (cx, cy) = (ox + r, oy + r);
    let cell = PANEL / RASTER as f64;
    let _ = writeln!(out, "<g class=\"panel\">");
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
        cx,
        oy - 6.0,
        escape(&plot.title)
    );
    for (k, v) in plot.raster().iter().enumerate() {
        if let Some(v) = v {
            let (i, j) = (k / RASTER, k % RASTER);
            let _ = writeln!(
                out,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
                ox + j as f64 * cell,
                oy + i as f64 * cell,
                cell,
                cell,
                hex(color_at(color_position(*v, plot.range)))
            );
        }
    }
    let _ = writeln!(
        out,
        "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"{r:.2}\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>"
    );
    let _ = writeln!(
        out,
        "<polygon points=\"{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}\" fill=\"none\" stroke=\"black\"/>",
        cx - 10.0,
        oy + 1.0,
        cx,
        oy - 14.0,
        cx + 10.0,
        oy + 1.0
    );
    for s in &plot.sites {
        let px = cx + s.x * r;
        let py = cy - s.y * r;
        let _ = writeln!(out, "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"2\" fill=\"black\"/>");
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"8\">{}</text>",
            px,
            py - 4.0,
            escape(&s.name)
        );
    }
    let _ = writeln!(out, "</g>");
}

fn color_bar(out: &mut String, range: (f64, f64), ox: f64, oy: f64) {
    let step = PANEL / BAR_STEPS as f64;
    let _ = writeln!(out, "<g class=\"colorbar\">");
    for k in 0..BAR_STEPS {
        // top is high
        let p = 1.0 - (k as f64 + 0.5) / BAR_STEPS as f64;
        let _ = writeln!(
            out,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
            ox,
            oy + k as f64 * step,
            BAR_W,
            step,
            hex(color_at(p))
        );
    }
    let _ = writeln!(
        out,
        "<rect x=\"{ox:.2}\" y=\"{oy:.2}\" width=\"{BAR_W:.2}\" height=\"{PANEL:.2}\" fill=\"none\" stroke=\"black\"/>"
    );
    let lx = ox + BAR_W + 4.0;
    let _ = writeln!(out, "<text class=\"bar-max\" x=\"{lx:.2}\" y=\"{:.2}\" font-size=\"10\">{}</text>", oy + 8.0, range.1);
    let _ = writeln!(
        out,
        "<text class=\"bar-min\" x=\"{lx:.2}\" y=\"{:.2}\" font-size=\"10\">{}</text>",
        oy + PANEL,
        range.0
    );
    let _ = writeln!(out, "</g>");
}

fn document(panels: &[&TopoPlot], caption: Option<&str>) -> String {
    let n = panels.len() as f64;
    let width = MARGIN + n * (PANEL + MARGIN) + BAR_W + 50.0;
    let top = MARGIN + 24.0;
    let height = top + PANEL + MARGIN + if caption.is_some() { 24.0 } else { 0.0 };
    let mut out = String::new();
    let _ = writeln!(out, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">"
    );
    let _ = writeln!(out, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    for (i, p) in panels.iter().enumerate() {
        panel(&mut out, p, MARGIN + i as f64 * (PANEL + MARGIN), top);
    }
    color_bar(&mut out, panels[0].range, MARGIN + n * (PANEL + MARGIN), top);
    if let Some(c) = caption {
        let _ = writeln!(
            out,
            "<text class=\"caption\" x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"14\">{}</text>",
            width / 2.0,
            height - 10.0,
            escape(c)
        );
    }
    let _ = writeln!(out, "</svg>");
    out
}

/// Inserts an XML comment after the declaration line.
pub fn annotate(svg: &str, note: &str) -> String {
    let note = note.replace("--", "- -");
    match svg.split_once('\n') {
        Some((decl, rest)) => format!("{decl}\n<!-- {note} -->\n{rest}"),
        None => format!("<!-- {note} -->\n{svg}"),
    }
}

/// One topography with its color bar.
pub fn render(plot: &TopoPlot) -> String {
    document(&[plot], None)
}

/// Two topographies sharing one color bar, captioned with `label`.
pub fn side_by_side(left: &TopoPlot, right: &TopoPlot, label: &str) -> Result<String, TopoError> {
    if left.range != right.range {
        return Err(TopoError::RangeMismatch {
            a: left.range,
            b: right.range,
        });
    }
    Ok(document(&[left, right], Some(label)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featmap::default_grid;
    use proptest::prelude::*;

    fn plot(scores: &[(&str, f64)]) -> TopoPlot {
        let s: Vec<(String, f64)> = scores.iter().map(|(n, v)| (n.to_string(), *v)).collect();
        TopoPlot::new(&s, &default_grid(), DEFAULT_RANGE, "t").unwrap()
    }

    #[test]
    fn zero_scores_render_white() {
        let names: Vec<(String, f64)> = default_grid().channel_names().map(|n| (n.to_string(), 0.0)).collect();
        let p = TopoPlot::new(&names, &default_grid(), DEFAULT_RANGE, "zero").unwrap();
        let svg = render(&p);
        let panel_part = svg.split("<g class=\"colorbar\">").next().unwrap();
        let fills: Vec<&str> = panel_part
            .lines()
            .filter(|l| l.starts_with("<rect x="))
            .map(|l| l.split("fill=\"").nth(1).unwrap())
            .collect();
        assert!(!fills.is_empty());
        assert!(fills.iter().all(|f| f.starts_with("#ffffff")));
    }

    #[test]
    fn two_sites_hit_extremes() {
        let p = plot(&[("C3", 0.1), ("C4", -0.1)]);
        let c3 = &p.sites[0];
        let c4 = &p.sites[1];
        assert_eq!(p.interpolate(c3.x, c3.y), 0.1);
        assert_eq!(p.interpolate(c4.x, c4.y), -0.1);
        assert_eq!(color_at(color_position(0.1, p.range)), (178, 24, 43));
        assert_eq!(color_at(color_position(-0.1, p.range)), (33, 102, 172));
        // zero crossing midway between the two sites
        let mid = p.interpolate((c3.x + c4.x) / 2.0, (c3.y + c4.y) / 2.0);
        assert!(mid.abs() < 1e-12);
        let near = p.interpolate(c3.x + 0.1 * (c4.x - c3.x), c3.y);
        assert!(near > 0.0 && near < 0.1);
    }

    #[test]
    fn deterministic_bytes() {
        let p = plot(&[("C3", 0.05), ("Cz", -0.02), ("Pz", 0.3)]);
        assert_eq!(render(&p), render(&p));
    }

    #[test]
    fn errors() {
        let g = default_grid();
        assert_eq!(TopoPlot::new(&[], &g, DEFAULT_RANGE, "x").unwrap_err(), TopoError::Empty);
        assert_eq!(
            TopoPlot::new(&[("C3".into(), f64::NAN)], &g, DEFAULT_RANGE, "x").unwrap_err(),
            TopoError::NonFinite("C3".into())
        );
        let a = plot(&[("C3", 0.0)]);
        let mut b = a.clone();
        b.range = (-0.2, 0.2);
        assert!(matches!(side_by_side(&a, &b, "s"), Err(TopoError::RangeMismatch { .. })));
    }

    #[test]
    fn side_by_side_layout() {
        let a = plot(&[("C3", 0.05), ("C4", -0.05)]);
        let svg = side_by_side(&a, &a, "A01 <left & right>").unwrap();
        assert_eq!(svg.matches("<g class=\"panel\">").count(), 2);
        assert_eq!(svg.matches("<g class=\"colorbar\">").count(), 1);
        assert!(svg.contains(">-0.1</text>"));
        assert!(svg.contains(">0.1</text>"));
        assert!(svg.contains(">A01 &lt;left &amp; right&gt;</text>"));
        let panels: Vec<&str> = svg.split("<g class=\"panel\">").skip(1).collect();
        // same fills and labels in the same order
        let content = |p: &str| {
            p.split("</g>")
                .next()
                .unwrap()
                .lines()
                .filter_map(|l| l.split("fill=\"").nth(1).or_else(|| l.split('>').nth(1)))
                .map(str::to_string)
                .collect::<Vec<_>>()
        };
        assert_eq!(content(panels[0]), content(panels[1]));
    }

    proptest! {
        #[test]
        fn color_monotone(a in -1.0f64..1.0, b in -1.0f64..1.0, lo in -2.0f64..-0.01, hi in 0.01f64..2.0) {
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(a < b);
            let (pa, pb) = (color_position(a, (lo, hi)), color_position(b, (lo, hi)));
            if a >= lo && b <= hi {
                prop_assert!(pa < pb);
            } else {
                prop_assert!(pa <= pb);
            }
        }

        #[test]
        fn idw_exact_at_sites(v1 in -1.0f64..1.0, v2 in -1.0f64..1.0, v3 in -1.0f64..1.0) {
            let p = plot(&[("Fz", v1), ("C3", v2), ("POz", v3)]);
            for s in &p.sites {
                prop_assert_eq!(p.interpolate(s.x, s.y), s.score);
            }
        }
    }
}
