//! Run artifacts: trajectory CSV, SVG line plots and JSON reports.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::dynamics::{Mode, Trajectory};

/// `t,x_1..x_N,u_1..u_N,h,c,h_e,c_e`
pub fn csv_header(n: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=n).map(|i| format!("x_{i}")));
    cols.extend((1..=n).map(|i| format!("u_{i}")));
    cols.extend(["h", "c", "h_e", "c_e"].map(String::from));
    cols.join(",")
}

/// Writes one row per grid point, every number with 17 significant digits.
/// Undefined monitors (no receivers) are left empty.
pub fn write_csv<W: Write>(traj: &Trajectory, out: W) -> io::Result<()> {
    let mut w = BufWriter::new(out);
    let n = traj.x_target.len();
    writeln!(w, "{}", csv_header(n))?;
    let mut line = String::new();
    for k in 0..traj.len() {
        line.clear();
        let m = &traj.monitors[k];
        let _ = write!(line, "{:.16e}", traj.times[k]);
        for v in traj.states[k].iter().chain(&traj.controls[k]) {
            let _ = write!(line, ",{v:.16e}");
        }
        for v in [m.h, Some(m.c), m.h_e, Some(m.c_e)] {
            match v {
                Some(v) => {
                    let _ = write!(line, ",{v:.16e}");
                }
                None => line.push(','),
            }
        }
        writeln!(w, "{line}")?;
    }
    w.flush()
}

pub fn write_csv_file(traj: &Trajectory, path: &Path) -> io::Result<()> {
    write_csv(traj, fs::File::create(path)?)
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

/// Line plot of every `x_i(t)`; closed-loop plots overlay the target levels
/// as dashed lines.
pub fn render_svg(traj: &Trajectory, title: &str) -> String {
    const W: f64 = 800.0;
    const H: f64 = 500.0;
    const PAD: f64 = 50.0;
    const MAX_POINTS: usize = 2000;

    let n = traj.x_target.len();
    let (t0, t1) = match (traj.times.first(), traj.times.last()) {
        (Some(&a), Some(&b)) if b > a => (a, b),
        (Some(&a), _) => (a, a + 1.0),
        _ => (0.0, 1.0),
    };
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in traj.states.iter().flatten() {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    if traj.mode == Mode::Closed {
        for v in &traj.x_target {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    if !(lo.is_finite() && hi.is_finite()) {
        (lo, hi) = (-1.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo, hi) = (lo - 1.0, hi + 1.0);
    }
    let sx = |t: f64| PAD + (t - t0) / (t1 - t0) * (W - 2.0 * PAD);
    let sy = |v: f64| H - PAD - (v - lo) / (hi - lo) * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="25" text-anchor="middle" font-family="sans-serif" font-size="16">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<path d="M{PAD},{PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    for (v, anchor) in [(lo, H - PAD), (hi, PAD)] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{anchor}" text-anchor="end" font-family="sans-serif" font-size="11">{v:.3}</text>"#,
            PAD - 4.0
        );
    }
    for (t, anchor) in [(t0, PAD), (t1, W - PAD)] {
        let _ = writeln!(
            s,
            r#"<text x="{anchor}" y="{}" text-anchor="middle" font-family="sans-serif" font-size="11">{t:.3}</text>"#,
            H - PAD + 16.0
        );
    }

    let stride = traj.len().div_ceil(MAX_POINTS).max(1);
    for i in 0..n {
        let color = PALETTE[i % PALETTE.len()];
        if traj.mode == Mode::Closed {
            let y = sy(traj.x_target[i]);
            let _ = writeln!(
                s,
                r#"<line x1="{PAD}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="{color}" stroke-dasharray="6,4" stroke-opacity="0.6"/>"#,
                W - PAD
            );
        }
        let mut d = String::new();
        let last = traj.len().saturating_sub(1);
        for k in (0..traj.len()).step_by(stride).chain(std::iter::once(last)) {
            let cmd = if d.is_empty() { 'M' } else { 'L' };
            let _ = write!(d, "{cmd}{:.2},{:.2} ", sx(traj.times[k]), sy(traj.states[k][i]));
        }
        let _ = writeln!(
            s,
            r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.5"><title>x_{}</title></path>"#,
            d.trim_end(),
            i + 1
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Pretty-printed JSON document.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> io::Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    fs::write(path, text + "\n")
}
