use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::metrics::MetricsLog;
use super::{HarnessError, Result};

pub const CSV_HEADER: &str = "slot,user,reward,label,action_index,window_avg";

/// One row per (slot, user). Multi-channel labels are joined with `|`;
/// `window_avg` is the user's mean over the aligned metric window holding
/// the slot.
pub fn write_csv<W: Write>(log: &MetricsLog, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    let windows = log.window_ranges();
    let avgs: Vec<Vec<f64>> = (0..log.num_users())
        .map(|u| log.window_averages(Some(u)).unwrap_or_default())
        .collect();
    for (w, range) in windows.iter().enumerate() {
        for t in range.clone() {
            for (u, user_avgs) in avgs.iter().enumerate() {
                let labels: Vec<&str> = log.labels(t, u).iter().map(|l| l.as_str()).collect();
                let action = log.action_index(t, u).map(|a| a.to_string()).unwrap_or_default();
                writeln!(
                    out,
                    "{t},{u},{},{},{action},{}",
                    log.reward(t, u),
                    labels.join("|"),
                    user_avgs[w]
                )?;
            }
        }
    }
    Ok(())
}

pub fn export_csv(log: &MetricsLog, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_csv(log, &mut out)
        .and_then(|_| out.flush())
        .map_err(|e| HarnessError::io(path, e))
}

/// A named line of y values at x = 0, 1, 2, ...
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
}

impl Series {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            values,
        }
    }
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Line chart with axes, tick labels and a legend. `x_scale` converts the
/// series index into axis units (e.g. the window length in slots).
pub fn svg_chart(series: &[Series], title: &str, x_label: &str, y_label: &str, x_scale: f64) -> String {
    let (w, h) = (800.0, 480.0);
    let (left, right, top, bottom) = (70.0, 170.0, 40.0, 60.0);
    let pw = w - left - right;
    let ph = h - top - bottom;

    let finite = series.iter().flat_map(|s| s.values.iter().copied()).filter(|v| v.is_finite());
    let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-9 {
        lo -= 0.5;
        hi += 0.5;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let longest = series.iter().map(|s| s.values.len()).max().unwrap_or(0);
    let x_max = (longest.max(2) - 1) as f64;

    let px = |i: f64| left + pw * i / x_max;
    let py = |v: f64| top + ph * (hi - v) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        left + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=5 {
        let v = lo + (hi - lo) * f64::from(i) / 5.0;
        let y = py(v);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#dddddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{v:.2}</text>"##,
            left + pw,
            left - 6.0,
            y + 4.0
        );
        let xi = x_max * f64::from(i) / 5.0;
        let x = px(xi);
        let _ = writeln!(
            s,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            top + ph + 18.0,
            fmt_tick(xi * x_scale)
        );
    }
    if lo < 0.0 && hi > 0.0 {
        let y = py(0.0);
        let _ = writeln!(
            s,
            r#"<line x1="{left}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="gray" stroke-dasharray="4 3"/>"#,
            left + pw
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        h - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0,
        escape(y_label)
    );
    for (i, line) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = line
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(j, &v)| format!("{:.1},{:.1}", px(j as f64), py(v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let ly = top + 14.0 + 18.0 * i as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&line.name)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn render_svg(series: &[Series], title: &str, x_label: &str, y_label: &str, x_scale: f64, path: &Path) -> Result<()> {
    fs::write(path, svg_chart(series, title, x_label, y_label, x_scale)).map_err(|e| HarnessError::io(path, e))
}

/// Window-averaged reward of every user in `log`, one series each.
pub fn reward_series(log: &MetricsLog) -> Vec<Series> {
    log.user_names()
        .iter()
        .enumerate()
        .map(|(u, name)| Series::new(name.clone(), log.window_averages(Some(u)).unwrap_or_default()))
        .collect()
}

fn fmt_tick(v: f64) -> String {
    if v.abs() >= 1e6 {
        format!("{:.1}M", v / 1e6)
    } else if v.abs() >= 1e3 {
        format!("{:.0}k", v / 1e3)
    } else {
        format!("{v:.0}")
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::OutcomeLabel;

    fn small_log() -> MetricsLog {
        let mut log = MetricsLog::new(vec!["a".into(), "b".into()], vec![1, 2], 2, false);
        log.push_slot(0, &[1.0, -2.0], &[vec![OutcomeLabel::GoodAlone], vec![OutcomeLabel::Bad; 2]], &[Some(3), Some(0)], None);
        log.push_slot(1, &[-1.0, 0.5], &[vec![OutcomeLabel::Bad], vec![OutcomeLabel::CollisionGood, OutcomeLabel::Bad]], &[Some(1), None], None);
        log.push_slot(2, &[1.0, 0.0], &[vec![OutcomeLabel::GoodAlone], vec![OutcomeLabel::Bad; 2]], &[Some(2), Some(5)], None);
        log
    }

    #[test]
    fn csv_rows() {
        let mut buf = Vec::new();
        write_csv(&small_log(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "0,0,1,good,3,0");
        assert_eq!(lines[2], "0,1,-2,bad|bad,0,-0.75");
        assert_eq!(lines[4], "1,1,0.5,collision_good|bad,,-0.75");
        assert_eq!(lines[5], "2,0,1,good,2,1");
        assert_eq!(lines.len(), 7);
    }

    #[test]
    fn empty_log_is_header_only() {
        let log = MetricsLog::new(vec!["a".into()], vec![1], 10, false);
        let mut buf = Vec::new();
        write_csv(&log, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn svg_is_deterministic() {
        let series = reward_series(&small_log());
        let a = svg_chart(&series, "t <1>", "slot", "reward", 2.0);
        assert_eq!(a, svg_chart(&series, "t <1>", "slot", "reward", 2.0));
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        assert_eq!(a.matches("<polyline").count(), 2);
        assert!(a.contains("t &lt;1&gt;"));
        let flat = svg_chart(&[Series::new("x", vec![1.0; 3])], "", "", "", 1.0);
        assert!(!flat.contains("NaN"));
    }

    #[test]
    fn io_errors_carry_path() {
        let err = export_csv(&small_log(), Path::new("/nonexistent/dir/out.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/out.csv"));
    }
}
