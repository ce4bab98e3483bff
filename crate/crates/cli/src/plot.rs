//! SVG rendering of a run: trajectories, the control set and its current-shifted
//! copy at the start point with the ray point `x*`, and current arrows.

use std::f64::consts::TAU;
use std::fmt::Write;

use zermelo_core::solvers::{Locus, Scenario, SolverError, SolverId};
use zermelo_core::{ControlSet, Vec2};

use crate::run::Output;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 800.0;
const MARGIN: f64 = 40.0;
const ARROWS: usize = 12;

fn outline(set: &ControlSet, at: Vec2) -> Vec<Vec2> {
    (0..256).map(|k| at + set.polar_data(TAU * k as f64 / 256.0).point).collect()
}

struct Frame {
    lo: Vec2,
    scale: f64,
}

impl Frame {
    fn fit(points: &[Vec2]) -> Self {
        let (mut lo, mut hi) = (points[0], points[0]);
        for p in points {
            lo = Vec2::new(lo.x1.min(p.x1), lo.x2.min(p.x2));
            hi = Vec2::new(hi.x1.max(p.x1), hi.x2.max(p.x2));
        }
        let span = (hi.x1 - lo.x1).max(hi.x2 - lo.x2).max(1e-9);
        let pad = 0.05 * span;
        let lo = lo - Vec2::new(pad, pad);
        let extent = Vec2::new(hi.x1 - lo.x1 + pad, hi.x2 - lo.x2 + pad);
        let scale = ((WIDTH - 2.0 * MARGIN) / extent.x1).min((HEIGHT - 2.0 * MARGIN) / extent.x2);
        Self { lo, scale }
    }

    fn map(&self, p: Vec2) -> (f64, f64) {
        (MARGIN + (p.x1 - self.lo.x1) * self.scale, HEIGHT - MARGIN - (p.x2 - self.lo.x2) * self.scale)
    }

    fn world(&self, sx: f64, sy: f64) -> Vec2 {
        Vec2::new(self.lo.x1 + (sx - MARGIN) / self.scale, self.lo.x2 + (HEIGHT - MARGIN - sy) / self.scale)
    }
}

fn polyline(svg: &mut String, frame: &Frame, pts: &[Vec2], style: &str, closed: bool) {
    let tag = if closed { "polygon" } else { "polyline" };
    let coords: Vec<String> = pts
        .iter()
        .map(|&p| {
            let (x, y) = frame.map(p);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(svg, r#"<{tag} points="{}" fill="none" {style}/>"#, coords.join(" "));
}

fn color(id: SolverId) -> &'static str {
    match id {
        SolverId::Shoot => "black",
        SolverId::Constant => "green",
        SolverId::AnalyticExample => "#1f5fbf",
        SolverId::BruteForce => "gray",
    }
}

pub fn render(scenario: &Scenario, outcomes: &[(SolverId, Result<Output, SolverError>)]) -> String {
    let target = scenario.target.point;
    let x0 = outcomes
        .iter()
        .find_map(|(_, r)| r.as_ref().ok().and_then(Output::solve_result).map(|s| s.x0))
        .unwrap_or_else(|| scenario.start.at(0.5));
    let s0 = scenario.field.eval(x0);
    let own = outline(&scenario.set, x0);
    let drifted = outline(&scenario.set, x0 + s0);
    let ray_point = (target - x0).normalized().and_then(|d| {
        let lambda = scenario.set.clone().shifted(s0).gauge_along(d).ok()?;
        Some(x0 + d * lambda)
    });

    let mut paths: Vec<(SolverId, Vec<Vec2>, &str)> = Vec::new();
    let mut chords: Vec<Vec<Vec2>> = Vec::new();
    for (id, r) in outcomes {
        let Ok(out) = r else { continue };
        if let Some(res) = out.solve_result() {
            let style = if *id == SolverId::AnalyticExample { r#"stroke-dasharray="6 4""# } else { "" };
            paths.push((*id, res.trajectory.samples.iter().map(|s| s.x).collect(), style));
        }
        if let Output::Example(_, ex) = out {
            if let Some(t_const) = ex.t_const {
                chords.push((0..=200).filter_map(|k| ex.constant_state(t_const * k as f64 / 200.0)).collect());
            }
        }
    }

    let mut all: Vec<Vec2> = vec![target, x0];
    all.extend(scenario.start.points());
    all.extend(own.iter().chain(&drifted));
    all.extend(ray_point);
    for (_, p, _) in &paths {
        all.extend(p);
    }
    for c in &chords {
        all.extend(c);
    }
    let frame = Frame::fit(&all);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, "<title>{}</title>", scenario.name);

    // current arrows, longest one spanning 60 % of a cell
    let cell = (WIDTH - 2.0 * MARGIN) / ARROWS as f64;
    let mut arrows = Vec::new();
    for i in 0..ARROWS {
        for j in 0..ARROWS {
            let (sx, sy) = (MARGIN + (i as f64 + 0.5) * cell, MARGIN + (j as f64 + 0.5) * cell);
            arrows.push((sx, sy, scenario.field.eval(frame.world(sx, sy))));
        }
    }
    let vmax = arrows.iter().map(|a| a.2.norm()).fold(0.0, f64::max);
    if vmax > 0.0 {
        let _ = writeln!(svg, r##"<g stroke="#7fa7d9" fill="#7fa7d9" stroke-width="1">"##);
        for (sx, sy, v) in arrows {
            let k = 0.6 * cell / vmax;
            let (ex, ey) = (sx + v.x1 * k, sy - v.x2 * k);
            let _ = writeln!(svg, r#"<line x1="{sx:.2}" y1="{sy:.2}" x2="{ex:.2}" y2="{ey:.2}"/>"#);
            let _ = writeln!(svg, r#"<circle cx="{ex:.2}" cy="{ey:.2}" r="1.5"/>"#);
        }
        let _ = writeln!(svg, "</g>");
    }

    polyline(&mut svg, &frame, &own, r#"stroke="gray" stroke-dasharray="3 3""#, true);
    polyline(&mut svg, &frame, &drifted, r##"stroke="#b05600""##, true);
    if let Some(xs) = ray_point {
        polyline(&mut svg, &frame, &[x0, xs], r##"stroke="#b05600" stroke-width="0.8""##, false);
        let (x, y) = frame.map(xs);
        let _ = writeln!(svg, r##"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="#b05600"/>"##);
        let _ = writeln!(svg, r##"<text x="{:.2}" y="{:.2}" font-size="12" fill="#b05600">x*</text>"##, x + 5.0, y - 5.0);
    }

    match scenario.start {
        Locus::Point(p) => {
            let (x, y) = frame.map(p);
            let _ = writeln!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="black"/>"#);
        }
        Locus::Segment(a, b) => polyline(&mut svg, &frame, &[a, b], r#"stroke="black" stroke-width="3""#, false),
    }
    let (tx, ty) = frame.map(target);
    let tr = (scenario.target.radius * frame.scale).max(4.0);
    let _ = writeln!(svg, r#"<circle cx="{tx:.2}" cy="{ty:.2}" r="{tr:.2}" fill="none" stroke="red" stroke-width="2"/>"#);

    for c in &chords {
        polyline(&mut svg, &frame, c, r#"stroke="green" stroke-width="2""#, false);
    }
    for (id, pts, style) in &paths {
        polyline(&mut svg, &frame, pts, &format!(r#"stroke="{}" stroke-width="2" {style}"#, color(*id)), false);
    }

    let mut legend: Vec<(String, &str)> =
        paths.iter().map(|(id, _, _)| (id.as_str().to_owned(), color(*id))).collect();
    if !chords.is_empty() {
        legend.push(("constant control".to_owned(), "green"));
    }
    legend.push(("U + x0".to_owned(), "gray"));
    legend.push(("U + s(x0) + x0".to_owned(), "#b05600"));
    for (k, (label, col)) in legend.iter().enumerate() {
        let y = 20.0 + 16.0 * k as f64;
        let _ = writeln!(svg, r#"<line x1="10" y1="{y}" x2="30" y2="{y}" stroke="{col}" stroke-width="2"/>"#);
        let _ = writeln!(svg, r#"<text x="36" y="{}" font-size="12">{label}</text>"#, y + 4.0);
    }
    svg.push_str("</svg>\n");
    svg
}
