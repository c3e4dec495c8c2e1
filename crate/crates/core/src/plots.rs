//! Plot data and minimal SVG line charts for a run directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::diagnostics::fmt_f64;
use crate::error::{Error, Result};

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;
const MARGIN: f64 = 70.0;

/// Reads `t`, `F` and `sup_u` columns from a timeseries CSV.
pub fn read_series(path: &Path) -> Result<Vec<(f64, f64, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Runtime(format!("no timeseries at {}: {e}", path.display()))
    })?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Runtime("empty timeseries".into()))?
        .split(',')
        .collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| Error::Runtime(format!("timeseries lacks column {name}")))
    };
    let (ct, cf, cs) = (col("t")?, col("F")?, col("sup_u")?);
    let mut out = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        let get = |i: usize| -> Result<f64> {
            cells
                .get(i)
                .and_then(|c| c.parse::<f64>().ok())
                .ok_or_else(|| Error::Runtime(format!("bad timeseries row: {line}")))
        };
        out.push((get(ct)?, get(cf)?, get(cs)?));
    }
    Ok(out)
}

/// Polyline chart with min/max tick labels. `log_y` plots `log10 y`.
pub fn line_chart_svg(title: &str, x_label: &str, y_label: &str, pts: &[(f64, f64)], log_y: bool) -> String {
    let ys: Vec<(f64, f64)> = pts
        .iter()
        .filter(|(_, y)| !log_y || *y > 0.0)
        .map(|&(x, y)| (x, if log_y { y.log10() } else { y }))
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let range = |it: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo <= 1e-300 {
            let pad = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
            (lo - pad, hi + pad)
        } else {
            (lo, hi)
        }
    };
    let (x0, x1) = range(&mut ys.iter().map(|p| p.0));
    let (y0, y1) = range(&mut ys.iter().map(|p| p.1));
    let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(s, "<rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"30\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"18\">{}</text>",
        WIDTH / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"black\"/>"
    );
    let label = |s: &mut String, x: f64, y: f64, anchor: &str, text: &str| {
        let _ = writeln!(
            s,
            "<text x=\"{x:.2}\" y=\"{y:.2}\" text-anchor=\"{anchor}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
            escape(text)
        );
    };
    let ylab = if log_y { format!("log10 {y_label}") } else { y_label.to_string() };
    label(&mut s, MARGIN, HEIGHT - MARGIN + 18.0, "start", &format!("{x0:.4e}"));
    label(&mut s, WIDTH - MARGIN, HEIGHT - MARGIN + 18.0, "end", &format!("{x1:.4e}"));
    label(&mut s, WIDTH / 2.0, HEIGHT - 20.0, "middle", x_label);
    label(&mut s, MARGIN - 6.0, HEIGHT - MARGIN, "end", &format!("{y0:.4e}"));
    label(&mut s, MARGIN - 6.0, MARGIN + 10.0, "end", &format!("{y1:.4e}"));
    label(&mut s, 20.0, MARGIN - 12.0, "start", &ylab);

    s.push_str("<polyline fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"1.5\" points=\"");
    for (i, &(x, y)) in ys.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{:.3},{:.3}", sx(x), sy(y));
    }
    s.push_str("\"/>\n</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `F_vs_t.csv`, `supu_vs_t.csv` and optionally the two SVGs.
pub fn emit_plots(run_dir: &Path, emit_svg: bool) -> Result<Vec<PathBuf>> {
    let series = read_series(&run_dir.join("timeseries.csv"))?;
    let mut written = Vec::new();
    let mut write = |name: &str, body: String| -> Result<()> {
        let p = run_dir.join(name);
        std::fs::write(&p, body)?;
        written.push(p);
        Ok(())
    };
    let csv = |head: &str, pts: &[(f64, f64)]| {
        let mut out = format!("{head}\n");
        for (x, y) in pts {
            let _ = writeln!(out, "{},{}", fmt_f64(*x), fmt_f64(*y));
        }
        out
    };
    let f_pts: Vec<(f64, f64)> = series.iter().map(|r| (r.0, r.1)).collect();
    let s_pts: Vec<(f64, f64)> = series.iter().map(|r| (r.0, r.2)).collect();
    write("F_vs_t.csv", csv("t,F", &f_pts))?;
    write("supu_vs_t.csv", csv("t,sup_u", &s_pts))?;
    if emit_svg {
        write("F_vs_t.svg", line_chart_svg("energy", "t", "F", &f_pts, false))?;
        write("supu_vs_t.svg", line_chart_svg("sup u", "t", "sup u", &s_pts, true))?;
    }
    Ok(written)
}
