//! Minimal static SVG plots: convergence traces and planar trajectories.

use svto::cost::Constraint;
use svto::mpc::{EpisodeRecord, FieldGeometry, ObstacleField};

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 50.0;

const SERIES_COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn of(points: impl Iterator<Item = (f64, f64)>) -> Self {
        let mut f = Frame { x_min: f64::INFINITY, x_max: f64::NEG_INFINITY, y_min: f64::INFINITY, y_max: f64::NEG_INFINITY };
        for (x, y) in points {
            f.x_min = f.x_min.min(x);
            f.x_max = f.x_max.max(x);
            f.y_min = f.y_min.min(y);
            f.y_max = f.y_max.max(y);
        }
        if !f.x_min.is_finite() {
            f = Frame { x_min: 0.0, x_max: 1.0, y_min: 0.0, y_max: 1.0 };
        }
        if f.x_max - f.x_min < 1e-12 {
            f.x_max = f.x_min + 1.0;
        }
        if f.y_max - f.y_min < 1e-12 {
            f.y_max = f.y_min + 1.0;
        }
        f
    }

    fn sx(&self, x: f64) -> f64 {
        MARGIN + (x - self.x_min) / (self.x_max - self.x_min) * (W - 2.0 * MARGIN)
    }

    fn sy(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y_min) / (self.y_max - self.y_min) * (H - 2.0 * MARGIN)
    }
}

fn header(title: &str) -> String {
    format!(
        concat!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
            "\n",
            r#"<rect width="{w}" height="{h}" fill="white"/>"#,
            "\n",
            r#"<text x="{tx}" y="24" text-anchor="middle" font-size="15">{title}</text>"#,
            "\n"
        ),
        w = W,
        h = H,
        tx = W / 2.0,
        title = title
    )
}

fn axes(frame: &Frame, x_label: &str, y_label: &str) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        r#"<line class="axis" x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="black"/>"#,
        MARGIN,
        H - MARGIN,
        W - MARGIN
    ));
    s.push('\n');
    s.push_str(&format!(
        r#"<line class="axis" x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="black"/>"#,
        MARGIN,
        MARGIN,
        H - MARGIN
    ));
    s.push('\n');
    // Axis range labels carry the data extents for downstream checks.
    s.push_str(&format!(
        r#"<text class="x-min" x="{}" y="{}" font-size="11">{}</text>"#,
        MARGIN,
        H - MARGIN + 16.0,
        frame.x_min
    ));
    s.push_str(&format!(
        r#"<text class="x-max" x="{}" y="{}" text-anchor="end" font-size="11">{}</text>"#,
        W - MARGIN,
        H - MARGIN + 16.0,
        frame.x_max
    ));
    s.push_str(&format!(
        r#"<text class="y-min" x="{}" y="{}" text-anchor="end" font-size="11">{}</text>"#,
        MARGIN - 6.0,
        H - MARGIN,
        frame.y_min
    ));
    s.push_str(&format!(
        r#"<text class="y-max" x="{}" y="{}" text-anchor="end" font-size="11">{}</text>"#,
        MARGIN - 6.0,
        MARGIN + 4.0,
        frame.y_max
    ));
    s.push('\n');
    s.push_str(&format!(
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#,
        W / 2.0,
        H - 10.0,
        x_label
    ));
    s.push_str(&format!(
        r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle" font-size="12">{}</text>"#,
        H / 2.0,
        H / 2.0,
        y_label
    ));
    s.push('\n');
    s
}

fn polyline(points: &[(f64, f64)], frame: &Frame, class: &str, color: &str) -> String {
    let pts: Vec<String> = points
        .iter()
        .map(|(x, y)| format!("{:.2},{:.2}", frame.sx(*x), frame.sy(*y)))
        .collect();
    format!(
        r#"<polyline class="{}" fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
        class,
        color,
        pts.join(" ")
    )
}

/// Line plot of per-solver cost traces: iteration vs mean best-mode cost.
/// Returns None when every trace is empty.
pub fn convergence_svg(traces: &[(String, Vec<f64>)]) -> Option<String> {
    let usable: Vec<&(String, Vec<f64>)> = traces.iter().filter(|(_, t)| !t.is_empty()).collect();
    if usable.is_empty() {
        return None;
    }
    let frame = Frame::of(
        usable
            .iter()
            .flat_map(|(_, t)| t.iter().enumerate().map(|(i, c)| (i as f64, *c))),
    );
    let mut svg = header("convergence");
    svg.push_str(&axes(&frame, "iteration", "best cost"));
    for (k, (name, trace)) in usable.iter().enumerate() {
        let pts: Vec<(f64, f64)> = trace.iter().enumerate().map(|(i, c)| (i as f64, *c)).collect();
        let color = SERIES_COLORS[k % SERIES_COLORS.len()];
        svg.push_str(&polyline(&pts, &frame, "series", color));
        svg.push('\n');
        svg.push_str(&format!(
            r#"<text class="legend" x="{}" y="{}" font-size="12" fill="{}">{}</text>"#,
            W - MARGIN - 120.0,
            MARGIN + 16.0 * (k as f64 + 1.0),
            color,
            name
        ));
        svg.push('\n');
    }
    svg.push_str("</svg>\n");
    Some(svg)
}

/// Planar view of one obstacle field with the executed closed-loop paths:
/// obstacles as circles, paths as polylines, start ×, target ★, and one
/// terminal marker per episode.
pub fn trajectories_svg(
    field: &ObstacleField,
    geometry: FieldGeometry,
    records: &[&EpisodeRecord],
    position_range: std::ops::Range<usize>,
) -> String {
    let plane = |pos: &[f64]| -> (f64, f64) {
        match geometry {
            FieldGeometry::Circles2d => (pos[0], pos[1]),
            FieldGeometry::CylindersAlongY => (pos[0], pos[2]),
        }
    };
    let target = plane(field.target.as_slice());
    let start = plane(&field.start.as_slice()[position_range.clone()]);

    let mut extent: Vec<(f64, f64)> = vec![start, target];
    for con in &field.obstacles {
        if let Some((c, r)) = circle_of(con) {
            extent.push((c[0] - r, c[1] - r));
            extent.push((c[0] + r, c[1] + r));
        }
    }
    for rec in records {
        for s in &rec.states {
            extent.push(plane(&s[position_range.clone()]));
        }
    }
    let frame = Frame::of(extent.into_iter());

    let mut svg = header("executed trajectories");
    svg.push_str(&axes(&frame, "x", "y"));
    for con in &field.obstacles {
        if let Some((c, r)) = circle_of(con) {
            let rx = frame.sx(c[0] + r) - frame.sx(c[0]);
            svg.push_str(&format!(
                r##"<circle class="obstacle" cx="{:.2}" cy="{:.2}" r="{:.2}" fill="#d0d0d0" stroke="#555"/>"##,
                frame.sx(c[0]),
                frame.sy(c[1]),
                rx.abs()
            ));
            svg.push('\n');
        }
    }
    for (k, rec) in records.iter().enumerate() {
        let pts: Vec<(f64, f64)> = rec
            .states
            .iter()
            .map(|s| plane(&s[position_range.clone()]))
            .collect();
        let color = SERIES_COLORS[k % SERIES_COLORS.len()];
        svg.push_str(&polyline(&pts, &frame, "path", color));
        svg.push('\n');
        if let Some(last) = pts.last() {
            svg.push_str(&format!(
                r#"<circle class="marker-terminal" cx="{:.2}" cy="{:.2}" r="4" fill="{}"/>"#,
                frame.sx(last.0),
                frame.sy(last.1),
                color
            ));
            svg.push('\n');
        }
    }
    svg.push_str(&format!(
        r#"<text class="marker-start" x="{:.2}" y="{:.2}" text-anchor="middle" font-size="16" fill="red">&#215;</text>"#,
        frame.sx(start.0),
        frame.sy(start.1)
    ));
    svg.push('\n');
    svg.push_str(&format!(
        r#"<text class="marker-target" x="{:.2}" y="{:.2}" text-anchor="middle" font-size="16" fill="red">&#9733;</text>"#,
        frame.sx(target.0),
        frame.sy(target.1)
    ));
    svg.push_str("\n</svg>\n");
    svg
}

fn circle_of(con: &Constraint) -> Option<([f64; 2], f64)> {
    match con {
        Constraint::Circle { center, radius, .. } => Some((*center, *radius)),
        Constraint::Cylinder { center, axis, radius, .. } => {
            let (i, j) = match axis {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            Some(([center[i], center[j]], *radius))
        }
        Constraint::ControlBound { .. } => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_trace_gives_horizontal_series() {
        let svg = convergence_svg(&[("ddp".into(), vec![5.0, 5.0, 5.0])]).unwrap();
        assert_eq!(svg.matches(r#"class="series""#).count(), 1);
        // All series y-coordinates equal → horizontal line.
        let pts = svg
            .split(r#"points=""#)
            .nth(1)
            .unwrap()
            .split('"')
            .next()
            .unwrap();
        let ys: Vec<f64> = pts
            .split_whitespace()
            .map(|p| p.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        assert!(ys.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-9));
    }

    #[test]
    fn two_traces_give_two_series() {
        let svg = convergence_svg(&[
            ("a".into(), vec![3.0, 2.0, 1.0]),
            ("b".into(), vec![4.0, 3.5, 3.0]),
        ])
        .unwrap();
        assert_eq!(svg.matches(r#"class="series""#).count(), 2);
    }

    #[test]
    fn axis_labels_cover_data_range() {
        let svg = convergence_svg(&[("a".into(), vec![2.0, 8.0, 5.0])]).unwrap();
        assert!(svg.contains(r#"class="y-min""#) && svg.contains(">2<"));
        assert!(svg.contains(r#"class="y-max""#) && svg.contains(">8<"));
        assert!(svg.contains(r#"class="x-max""#) && svg.contains(">2<"));
    }

    #[test]
    fn empty_traces_are_skipped() {
        assert!(convergence_svg(&[("a".into(), vec![])]).is_none());
    }
}
