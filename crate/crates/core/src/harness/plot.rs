use std::fmt::Write as _;
use std::path::Path;

use super::experiment::{write_file, RunLog};
use super::metrics::{band, headline_percent};
use super::HarnessError;

const WIDTH: f64 = 800.0;
const PANEL_H: f64 = 260.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const GAP: f64 = 60.0;
const TICKS: usize = 5;

struct Panel {
    y0: f64,
    t: (f64, f64),
    y: (f64, f64),
}

impl Panel {
    fn px(&self, t: f64) -> f64 {
        LEFT + (t - self.t.0) / (self.t.1 - self.t.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        self.y0 + PANEL_H - (y - self.y.0) / (self.y.1 - self.y.0) * PANEL_H
    }

    fn polyline(&self, out: &mut String, t: &[f64], y: &[f64], color: &str) {
        let pts: Vec<String> = t
            .iter()
            .zip(y)
            .map(|(&a, &b)| format!("{:.2},{:.2}", self.px(a), self.py(b)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
    }

    fn axes(&self, out: &mut String, ylabel: &str) {
        let (x0, x1) = (self.px(self.t.0), self.px(self.t.1));
        let (yb, yt) = (self.py(self.y.0), self.py(self.y.1));
        let _ = writeln!(
            out,
            r#"<rect x="{x0:.2}" y="{yt:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            x1 - x0,
            yb - yt
        );
        for i in 0..=TICKS {
            let f = i as f64 / TICKS as f64;
            let tv = self.t.0 + f * (self.t.1 - self.t.0);
            let yv = self.y.0 + f * (self.y.1 - self.y.0);
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{tv:.1}</text>"#,
                self.px(tv),
                yb + 15.0
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{yv:.1}</text>"#,
                x0 - 5.0,
                self.py(yv) + 4.0
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="15" y="{:.2}" font-size="12" transform="rotate(-90 15 {:.2})" text-anchor="middle">{ylabel}</text>"#,
            self.y0 + PANEL_H / 2.0,
            self.y0 + PANEL_H / 2.0
        );
    }
}

fn range(values: impl Iterator<Item = f64>, floor: (f64, f64)) -> (f64, f64) {
    let (lo, hi) = values.fold(floor, |(a, b), x| (a.min(x), b.max(x)));
    if hi > lo {
        (lo, hi + 0.05 * (hi - lo))
    } else {
        (lo - 1.0, hi + 1.0)
    }
}

/// Velocity panel with the target and its headline band above a pedal panel with
/// the command and the actual angle.
pub fn render_svg(log: &RunLog) -> Result<String, HarnessError> {
    let first = log.rows.first().ok_or_else(|| HarnessError::Log("empty log".into()))?;
    let t = log.times();
    let v = log.velocities();
    let u = log.commands();
    let theta: Vec<f64> = log.rows.iter().map(|r| r.theta_deg).collect();
    let target = first.v_target_kmh;
    let tol = band(target, headline_percent(target));
    let t_span = {
        let last = *t.last().expect("nonempty");
        if last > t[0] {
            (t[0], last)
        } else {
            (t[0], t[0] + 1.0)
        }
    };
    let vel = Panel {
        y0: TOP,
        t: t_span,
        y: range(v.iter().copied().chain([target + tol, target - tol]), (0.0, 0.0)),
    };
    let ped = Panel {
        y0: TOP + PANEL_H + GAP,
        t: t_span,
        y: range(u.iter().chain(&theta).copied(), (0.0, 0.0)),
    };
    let height = TOP + 2.0 * PANEL_H + GAP + 40.0;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (bt, bb) = (vel.py(target + tol), vel.py(target - tol));
    let _ = writeln!(
        out,
        r##"<rect x="{LEFT:.2}" y="{bt:.2}" width="{:.2}" height="{:.2}" fill="#cde" opacity="0.6"/>"##,
        WIDTH - LEFT - RIGHT,
        bb - bt
    );
    vel.polyline(&mut out, &t_span_vec(t_span), &[target, target], "#888");
    vel.polyline(&mut out, &t, &v, "#1f5fbf");
    vel.axes(&mut out, "velocity [km/h]");
    ped.polyline(&mut out, &t, &u, "#c03020");
    ped.polyline(&mut out, &t, &theta, "#208040");
    ped.axes(&mut out, "pedal [deg]");
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">time [s]</text>"#,
        LEFT + (WIDTH - LEFT - RIGHT) / 2.0,
        height - 5.0
    );
    let _ = writeln!(out, "</svg>");
    Ok(out)
}

fn t_span_vec(span: (f64, f64)) -> [f64; 2] {
    [span.0, span.1]
}

/// Reads a run log and writes its SVG plot. Nothing is written on error.
pub fn emit_plot(log_path: &Path, out_path: &Path) -> Result<(), HarnessError> {
    let log = RunLog::load(log_path)?;
    let svg = render_svg(&log)?;
    write_file(out_path, |w| std::io::Write::write_all(w, svg.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::experiment::LogRow;

    fn log() -> RunLog {
        RunLog {
            rows: (0..10)
                .map(|k| LogRow {
                    time_s: k as f64 * 0.2,
                    u_cmd_deg: 3.0 * k as f64,
                    theta_deg: 2.5 * k as f64,
                    v_kmh: 0.6 * k as f64,
                    v_target_kmh: 5.0,
                    loss: None,
                })
                .collect(),
            step_ms: vec![],
        }
    }

    #[test]
    fn renders_deterministically() {
        let a = render_svg(&log()).unwrap();
        assert_eq!(a, render_svg(&log()).unwrap());
        assert!(a.starts_with("<svg") && a.trim_end().ends_with("</svg>"));
        assert_eq!(a.matches("<polyline").count(), 4);
    }

    #[test]
    fn empty_log_is_an_error() {
        assert!(render_svg(&RunLog::default()).is_err());
    }
}
