//! Static SVG renderings of an arena and one episode's trajectory.

use std::fmt::Write;

use uavtrack::agent::TrajectoryRecord;
use uavtrack::environment::EnvConfig;

const CANVAS: f64 = 600.0;
const MARGIN: f64 = 30.0;
const UAV_COLOUR: &str = "#1f77b4";
const TARGET_COLOUR: &str = "#d62728";

struct Frame {
    side: f64,
    scale: f64,
}

impl Frame {
    fn new(side: f64) -> Self {
        Self {
            side,
            scale: CANVAS / side,
        }
    }

    /// World coordinates have north up, SVG has y down.
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        (
            MARGIN + x * self.scale,
            MARGIN + (self.side - y) * self.scale,
        )
    }
}

fn header(out: &mut String, width: f64, height: f64, title: &str) {
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    let _ = writeln!(out, "<title>{title}</title>");
    let _ = writeln!(
        out,
        r#"<rect x="0" y="0" width="{width:.0}" height="{height:.0}" fill="white"/>"#
    );
}

fn polyline(out: &mut String, id: &str, colour: &str, points: impl Iterator<Item = (f64, f64)>) {
    let pts: Vec<String> = points.map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let _ = writeln!(
        out,
        r#"<polyline id="{id}" points="{}" fill="none" stroke="{colour}" stroke-width="1.5" stroke-linejoin="round"/>"#,
        pts.join(" ")
    );
}

fn square_marker(out: &mut String, class: &str, (x, y): (f64, f64), colour: &str) {
    let _ = writeln!(
        out,
        r#"<rect class="{class}" x="{:.2}" y="{:.2}" width="8" height="8" fill="{colour}" stroke="black"/>"#,
        x - 4.0,
        y - 4.0
    );
}

fn triangle_marker(out: &mut String, class: &str, (x, y): (f64, f64), colour: &str) {
    let _ = writeln!(
        out,
        r#"<polygon class="{class}" points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{colour}" stroke="black"/>"#,
        x,
        y - 6.0,
        x - 5.0,
        y + 4.0,
        x + 5.0,
        y + 4.0
    );
}

/// Top-down view: dotted road grid, obstacles to scale with their heights,
/// UAV and target paths. Starts are squares, ends are triangles.
pub fn render_top_down(env: &EnvConfig, records: &[TrajectoryRecord]) -> String {
    let frame = Frame::new(env.side);
    let size = CANVAS + 2.0 * MARGIN;
    let mut out = String::new();
    header(&mut out, size, size + 20.0, "UAV and target trajectories");
    let _ = writeln!(
        out,
        r##"<rect id="arena" x="{MARGIN}" y="{MARGIN}" width="{CANVAS}" height="{CANVAS}" fill="#f7f7f2" stroke="black"/>"##
    );

    let _ = writeln!(
        out,
        r##"<g id="roads" stroke="#888888" stroke-width="1" stroke-dasharray="2 4">"##
    );
    for v in env.road().lines() {
        let (x0, y0) = frame.map(v, 0.0);
        let (x1, y1) = frame.map(v, env.side);
        let _ = writeln!(
            out,
            r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y1:.2}"/>"#
        );
        let (x0, y0) = frame.map(0.0, v);
        let (x1, y1) = frame.map(env.side, v);
        let _ = writeln!(
            out,
            r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y1:.2}"/>"#
        );
    }
    out.push_str("</g>\n");

    out.push_str("<g id=\"obstacles\">\n");
    for (i, o) in env.obstacles.iter().enumerate() {
        let (cx, cy) = frame.map(o.center.x, o.center.y);
        let _ = writeln!(
            out,
            r##"<circle id="obstacle-{i}" cx="{cx:.2}" cy="{cy:.2}" r="{:.2}" fill="#7f7f7f" fill-opacity="0.8" stroke="black"/>"##,
            o.radius * frame.scale
        );
        let _ = writeln!(
            out,
            r#"<text x="{cx:.2}" y="{:.2}" font-size="11" text-anchor="middle" fill="white">h={:.1}</text>"#,
            cy + 4.0,
            o.height
        );
    }
    out.push_str("</g>\n");

    if !records.is_empty() {
        let uav: Vec<_> = records
            .iter()
            .map(|r| frame.map(r.uav_x, r.uav_y))
            .collect();
        let target: Vec<_> = records
            .iter()
            .map(|r| frame.map(r.target_x, r.target_y))
            .collect();
        polyline(
            &mut out,
            "target-path",
            TARGET_COLOUR,
            target.iter().copied(),
        );
        polyline(&mut out, "uav-path", UAV_COLOUR, uav.iter().copied());
        square_marker(&mut out, "start", uav[0], UAV_COLOUR);
        square_marker(&mut out, "start", target[0], TARGET_COLOUR);
        triangle_marker(&mut out, "end", uav[uav.len() - 1], UAV_COLOUR);
        triangle_marker(&mut out, "end", target[target.len() - 1], TARGET_COLOUR);
    }

    let y = size + 8.0;
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="{y:.0}" font-size="12"><tspan fill="{UAV_COLOUR}">UAV</tspan> / <tspan fill="{TARGET_COLOUR}">target</tspan>, {} steps; squares mark starts, triangles mark ends</text>"#,
        records.len()
    );
    out.push_str("</svg>\n");
    out
}

/// Side view: UAV altitude against time step, with the altitude band.
pub fn render_altitude(env: &EnvConfig, records: &[TrajectoryRecord]) -> String {
    let (width, height) = (CANVAS + 2.0 * MARGIN, 240.0 + 2.0 * MARGIN);
    let plot_h = 240.0;
    let t_span = records.last().map_or(1, |r| r.t.max(1)) as f64;
    let map = |t: f64, z: f64| {
        (
            MARGIN + t / t_span * CANVAS,
            MARGIN + (1.0 - z / env.h_max) * plot_h,
        )
    };
    let mut out = String::new();
    header(&mut out, width, height, "UAV altitude over time");
    let (x0, y0) = map(0.0, 0.0);
    let (x1, y1) = map(t_span, env.h_max);
    let _ = writeln!(
        out,
        r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}" stroke="black"/>"#
    );
    let _ = writeln!(
        out,
        r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}" stroke="black"/>"#
    );
    for (label, z) in [("h_min", env.h_min), ("h_max", env.h_max)] {
        let (_, y) = map(0.0, z);
        let _ = writeln!(
            out,
            r##"<line class="band" x1="{x0:.2}" y1="{y:.2}" x2="{x1:.2}" y2="{y:.2}" stroke="#999999" stroke-dasharray="4 3"/>"##
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" font-size="10">{label}</text>"#,
            x1 - 30.0,
            y - 3.0
        );
    }
    if !records.is_empty() {
        polyline(
            &mut out,
            "altitude",
            UAV_COLOUR,
            records.iter().map(|r| map(r.t as f64, r.uav_z)),
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">time step</text>"#,
        MARGIN + CANVAS / 2.0,
        height - 8.0
    );
    out.push_str("</svg>\n");
    out
}
