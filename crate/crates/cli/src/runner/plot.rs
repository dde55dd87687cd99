//! Static SVG plots: trajectory overlays with plateau shading and control
//! staircases.

use plateau_core::benchmarks::{Benchmark, BenchmarkId, PlateauFamily};
use plateau_core::ocp::Trajectory;

const COLORS: [&str; 6] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const PLATEAU_FILL: &str = "#000000";

struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    x_range: (f64, f64),
    y_range: (f64, f64),
}

impl Frame {
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let sx = self.x0 + (x - self.x_range.0) / (self.x_range.1 - self.x_range.0) * self.w;
        let sy = self.y0 + self.h - (y - self.y_range.0) / (self.y_range.1 - self.y_range.0) * self.h;
        (sx, sy)
    }

    fn clip(&self, v: (f64, f64)) -> bool {
        v.0 >= self.x_range.0 && v.0 <= self.x_range.1 && v.1 >= self.y_range.0 && v.1 <= self.y_range.1
    }
}

fn polyline(frame: &Frame, points: &[(f64, f64)], color: &str, width: f64) -> String {
    let coords: Vec<String> = points
        .iter()
        .map(|&(x, y)| {
            let (sx, sy) = frame.map(x, y);
            format!("{sx:.2},{sy:.2}")
        })
        .collect();
    format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"{width}\"/>\n",
        coords.join(" ")
    )
}

fn axes(frame: &Frame, x_label: &str, y_label: &str) -> String {
    let mut out = format!(
        "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n",
        frame.x0, frame.y0, frame.w, frame.h
    );
    out.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" fill=\"#333\">{x_label}</text>\n",
        frame.x0 + frame.w / 2.0 - 20.0,
        frame.y0 + frame.h + 16.0
    ));
    out.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" fill=\"#333\" transform=\"rotate(-90 {:.1} {:.1})\">{y_label}</text>\n",
        frame.x0 - 8.0,
        frame.y0 + frame.h / 2.0,
        frame.x0 - 8.0,
        frame.y0 + frame.h / 2.0
    ));
    for (r, label) in [
        (frame.x_range.0, frame.x_range.0),
        (frame.x_range.1, frame.x_range.1),
    ] {
        let (sx, _) = frame.map(r, frame.y_range.0);
        out.push_str(&format!(
            "<text x=\"{sx:.1}\" y=\"{:.1}\" font-size=\"9\" fill=\"#666\" text-anchor=\"middle\">{label:.1}</text>\n",
            frame.y0 + frame.h + 9.0
        ));
    }
    for r in [frame.y_range.0, frame.y_range.1] {
        let (_, sy) = frame.map(frame.x_range.0, r);
        out.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{sy:.1}\" font-size=\"9\" fill=\"#666\" text-anchor=\"end\">{r:.1}</text>\n",
            frame.x0 - 2.0
        ));
    }
    out
}

/// Shades plateau bands/rings of the terminal cost inside the frame.
///
/// Darker shading marks costlier plateaus along the relevant direction, so
/// trajectories can be read against the reward structure they chase.
fn shade_plateaus(frame: &Frame, families: &[PlateauFamily], vertical_axis: usize) -> String {
    let mut out = String::new();
    for family in families {
        match *family {
            PlateauFamily::Bands { state_index, width } => {
                // bands along whichever screen axis carries that state
                let along_x = state_index != vertical_axis;
                let (lo, hi) = if along_x { frame.x_range } else { frame.y_range };
                let mut q = (lo / width).floor();
                while q * width < hi {
                    let a = (q * width).max(lo);
                    let b = ((q + 1.0) * width).min(hi);
                    if ((q as i64) % 2).abs() == 1 {
                        let (p1, p2) = if along_x {
                            (frame.map(a, frame.y_range.1), frame.map(b, frame.y_range.0))
                        } else {
                            (frame.map(frame.x_range.0, b), frame.map(frame.x_range.1, a))
                        };
                        out.push_str(&format!(
                            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"{PLATEAU_FILL}\" opacity=\"0.08\"/>\n",
                            p1.0,
                            p1.1,
                            (p2.0 - p1.0).abs(),
                            (p2.1 - p1.1).abs()
                        ));
                    }
                    q += 1.0;
                }
            }
            PlateauFamily::Rings { center, weights } => {
                // level sets of the weighted norm are ellipses with semi-axes
                // r / w
                let max_r = {
                    let dx = (frame.x_range.1 - frame.x_range.0).abs() * weights[0];
                    let dy = (frame.y_range.1 - frame.y_range.0).abs() * weights[1];
                    (dx + dy).ceil() as i64
                };
                let (cx, cy) = frame.map(center[0], center[1]);
                for r in 1..=max_r.min(24) {
                    let rx = r as f64 / weights[0] / (frame.x_range.1 - frame.x_range.0) * frame.w;
                    let ry = r as f64 / weights[1] / (frame.y_range.1 - frame.y_range.0) * frame.h;
                    out.push_str(&format!(
                        "<ellipse cx=\"{cx:.1}\" cy=\"{cy:.1}\" rx=\"{rx:.1}\" ry=\"{ry:.1}\" fill=\"none\" stroke=\"{PLATEAU_FILL}\" opacity=\"0.18\"/>\n",
                    ));
                }
            }
        }
    }
    out
}

/// Trajectory overlay plus control staircases for one comparison.
///
/// Planar problems draw the state plane; the oscillator draws position over
/// time. Plateau shading follows the benchmark's terminal-cost geometry.
pub fn comparison_svg(bench: &Benchmark, runs: &[(String, Trajectory)]) -> String {
    let width = 960.0;
    let height = 460.0;
    let dt = bench.spec.time_step();
    let time_series = bench.id == BenchmarkId::HarmonicOscillator;

    // gather trajectory curves in plot coordinates
    let curves: Vec<(String, Vec<(f64, f64)>)> = runs
        .iter()
        .map(|(label, traj)| {
            let pts: Vec<(f64, f64)> = traj
                .states
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    if time_series {
                        (k as f64 * dt, s[0])
                    } else {
                        (s[0], s[1])
                    }
                })
                .collect();
            (label.clone(), pts)
        })
        .collect();

    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for (_, pts) in &curves {
        for &(x, y) in pts {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
    }
    let pad = |lo: f64, hi: f64| {
        let span = (hi - lo).max(1e-6);
        (lo - 0.08 * span, hi + 0.08 * span)
    };
    let frame = Frame {
        x0: 50.0,
        y0: 30.0,
        w: 560.0,
        h: 380.0,
        x_range: pad(x_min, x_max),
        y_range: pad(y_min, y_max),
    };

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n"
    );
    svg.push_str(&format!(
        "<text x=\"50\" y=\"18\" font-size=\"13\" fill=\"#111\">{} — trajectories</text>\n",
        bench.id.name()
    ));

    let vertical_axis = if time_series { 0 } else { 1 };
    svg.push_str(&shade_plateaus(&frame, &bench.plateaus, vertical_axis));
    svg.push_str(&axes(
        &frame,
        if time_series { "t" } else { "x" },
        if time_series { "x" } else { "y" },
    ));

    for (idx, (label, pts)) in curves.iter().enumerate() {
        let color = COLORS[idx % COLORS.len()];
        let clipped: Vec<(f64, f64)> = pts.iter().copied().filter(|&p| frame.clip(p)).collect();
        svg.push_str(&polyline(&frame, &clipped, color, 1.6));
        // mark the endpoint
        if let Some(&(x, y)) = clipped.last() {
            let (sx, sy) = frame.map(x, y);
            svg.push_str(&format!(
                "<circle cx=\"{sx:.1}\" cy=\"{sy:.1}\" r=\"3\" fill=\"{color}\"/>\n"
            ));
        }
        svg.push_str(&format!(
            "<text x=\"620\" y=\"{}\" font-size=\"11\" fill=\"{color}\">{label}</text>\n",
            40 + idx * 16
        ));
    }

    // control staircase panel (first control component)
    let control_frame = Frame {
        x0: 660.0,
        y0: 140.0,
        w: 270.0,
        h: 270.0,
        x_range: (0.0, bench.spec.horizon),
        y_range: {
            let b = bench.spec.control_bounds[0];
            let lo = if b.lo.is_finite() { b.lo } else { -1.0 };
            let hi = if b.hi.is_finite() { b.hi } else { 1.0 };
            pad(lo, hi)
        },
    };
    svg.push_str(&format!(
        "<text x=\"660\" y=\"132\" font-size=\"11\" fill=\"#111\">control u0(t)</text>\n"
    ));
    svg.push_str(&axes(&control_frame, "t", "u"));
    for (idx, (_, traj)) in runs.iter().enumerate() {
        let color = COLORS[idx % COLORS.len()];
        let mut pts = Vec::with_capacity(traj.controls.len() * 2);
        for (k, u) in traj.controls.iter().enumerate() {
            let t = k as f64 * dt;
            pts.push((t, u[0]));
            pts.push((t + dt, u[0]));
        }
        let clipped: Vec<(f64, f64)> = pts
            .iter()
            .copied()
            .map(|(t, u)| {
                (
                    t,
                    u.clamp(control_frame.y_range.0, control_frame.y_range.1),
                )
            })
            .collect();
        svg.push_str(&polyline(&control_frame, &clipped, color, 1.0));
    }

    svg.push_str("</svg>\n");
    svg
}

/// Heat map of a scan: one rectangle per grid cell, shaded by the log of the
/// infeasibility.
pub fn scan_svg(scan: &plateau_core::benchmarks::ScanResult) -> String {
    let (nx, ny) = scan.grid.resolution;
    let width = 640.0;
    let height = 600.0;
    let frame = Frame {
        x0: 50.0,
        y0: 30.0,
        w: 540.0,
        h: 520.0,
        x_range: scan.grid.x_range,
        y_range: scan.grid.y_range,
    };
    let max_log = scan
        .values
        .iter()
        .map(|v| (v.max(1e-12)).log10())
        .fold(f64::NEG_INFINITY, f64::max);
    let min_log = scan
        .values
        .iter()
        .map(|v| (v.max(1e-12)).log10())
        .fold(f64::INFINITY, f64::min);
    let span = (max_log - min_log).max(1e-9);

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" viewBox=\"0 0 {width} {height}\">\n<rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n<text x=\"50\" y=\"18\" font-size=\"13\" fill=\"#111\">solver infeasibility by target state (log scale)</text>\n"
    );
    let cell_w = frame.w / nx as f64;
    let cell_h = frame.h / ny as f64;
    for i in 0..nx {
        for j in 0..ny {
            let v = scan.value_at(i, j).max(1e-12).log10();
            let t = (v - min_log) / span;
            // light (feasible) to dark red (stuck)
            let r = 255;
            let g = (235.0 * (1.0 - t)) as u8;
            let b = (220.0 * (1.0 - t)) as u8;
            let (x, y) = scan.grid.point(i, j);
            let (sx, sy) = frame.map(x, y);
            svg.push_str(&format!(
                "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{cell_w:.1}\" height=\"{cell_h:.1}\" fill=\"rgb({r},{g},{b})\"/>\n",
                sx - cell_w / 2.0,
                sy - cell_h / 2.0
            ));
        }
    }
    svg.push_str(&axes(&frame, "x", "y"));
    svg.push_str("</svg>\n");
    svg
}
