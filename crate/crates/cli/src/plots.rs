//! Static SVG charts rendered from results tables. Pure string builders:
//! deterministic output, no external renderer needed.

use emgcnn_core::sweep::{ResultRow, TrendRow};
use emgcnn_core::training::EpochStats;
use emgcnn_core::{CLASS_NAMES, NUM_CLASSES};

/// Series palette, indexed by position (kernels, curves).
const PALETTE: [&str; 4] = ["#4878a8", "#e49444", "#509e6e", "#d1605e"];
const FONT: &str = "font-family=\"Helvetica,Arial,sans-serif\"";

fn svg_open(out: &mut String, w: u32, h: u32) {
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"#ffffff\"/>\n"
    ));
}

fn text(out: &mut String, x: f64, y: f64, size: u32, anchor: &str, s: &str) {
    out.push_str(&format!(
        "<text x=\"{x:.1}\" y=\"{y:.1}\" font-size=\"{size}\" text-anchor=\"{anchor}\" {FONT} \
         fill=\"#333333\">{}</text>\n",
        esc(s)
    ));
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// A plot panel mapping data coordinates onto a pixel rectangle.
struct Panel {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    y_max: f64,
}

impl Panel {
    fn y(&self, v: f64) -> f64 {
        self.y0 + self.h - (v / self.y_max) * self.h
    }

    /// Frame, horizontal gridlines, and y tick labels every `step`.
    fn draw_frame(&self, out: &mut String, step: f64) {
        out.push_str(&format!(
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" \
             stroke=\"#999999\"/>\n",
            self.x0, self.y0, self.w, self.h
        ));
        let mut v = 0.0;
        while v <= self.y_max + 1e-9 {
            let y = self.y(v);
            if v > 0.0 && v < self.y_max {
                out.push_str(&format!(
                    "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" \
                     stroke=\"#e0e0e0\"/>\n",
                    self.x0,
                    self.x0 + self.w
                ));
            }
            text(out, self.x0 - 6.0, y + 3.5, 10, "end", &trim_num(v));
            v += step;
        }
    }
}

fn trim_num(v: f64) -> String {
    if (v - v.round()).abs() < 1e-9 {
        format!("{}", v.round() as i64)
    } else {
        format!("{v:.2}")
    }
}

fn legend(out: &mut String, x: f64, y: f64, entries: &[(String, &str)]) {
    for (i, (label, color)) in entries.iter().enumerate() {
        let ly = y + i as f64 * 16.0;
        out.push_str(&format!(
            "<rect x=\"{x:.1}\" y=\"{:.1}\" width=\"11\" height=\"11\" fill=\"{color}\"/>\n",
            ly - 9.0
        ));
        text(out, x + 16.0, ly, 11, "start", label);
    }
}

fn group_mean(rows: &[&ResultRow], pick: impl Fn(&ResultRow) -> f64) -> f64 {
    100.0 * rows.iter().map(|r| pick(r)).sum::<f64>() / rows.len() as f64
}

/// Grouped bars for one window length: metric vs overlap, one bar per
/// kernel, accuracy on the top panel, macro F1 on the bottom.
pub fn overlap_bars_svg(window: usize, rows: &[ResultRow]) -> String {
    let mut overlaps: Vec<f64> = rows.iter().map(|r| r.key.overlap_frac).collect();
    overlaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    overlaps.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    let mut kernels: Vec<usize> = rows.iter().map(|r| r.key.kernel).collect();
    kernels.sort_unstable();
    kernels.dedup();

    let (width, height) = (640u32, 520u32);
    let mut out = String::new();
    svg_open(&mut out, width, height);
    text(
        &mut out,
        width as f64 / 2.0,
        24.0,
        15,
        "middle",
        &format!("Window length {window}: metric vs overlap"),
    );

    let panels = [("Accuracy (%)", 0usize), ("Macro F1 (%)", 1usize)];
    for (pi, (title, metric)) in panels.iter().enumerate() {
        let panel = Panel {
            x0: 56.0,
            y0: 48.0 + pi as f64 * 230.0,
            w: 500.0,
            h: 180.0,
            y_max: 100.0,
        };
        text(&mut out, panel.x0, panel.y0 - 8.0, 12, "start", title);
        panel.draw_frame(&mut out, 20.0);

        let group_w = panel.w / overlaps.len() as f64;
        let bar_w = (group_w * 0.7) / kernels.len() as f64;
        for (gi, &f) in overlaps.iter().enumerate() {
            let gx = panel.x0 + gi as f64 * group_w;
            for (ki, &k) in kernels.iter().enumerate() {
                let members: Vec<&ResultRow> = rows
                    .iter()
                    .filter(|r| r.key.kernel == k && (r.key.overlap_frac - f).abs() < 1e-9)
                    .collect();
                if members.is_empty() {
                    continue;
                }
                let v = match metric {
                    0 => group_mean(&members, |r| r.accuracy),
                    _ => group_mean(&members, |r| r.f1_macro),
                };
                let x = gx + group_w * 0.15 + ki as f64 * bar_w;
                let y = panel.y(v);
                out.push_str(&format!(
                    "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{:.1}\" height=\"{:.1}\" \
                     fill=\"{}\"/>\n",
                    bar_w - 2.0,
                    panel.y0 + panel.h - y,
                    PALETTE[ki % PALETTE.len()]
                ));
            }
            text(
                &mut out,
                gx + group_w / 2.0,
                panel.y0 + panel.h + 16.0,
                11,
                "middle",
                &format!("{f}"),
            );
        }
        text(
            &mut out,
            panel.x0 + panel.w / 2.0,
            panel.y0 + panel.h + 34.0,
            11,
            "middle",
            "overlap fraction",
        );
    }
    let entries: Vec<(String, &str)> = kernels
        .iter()
        .enumerate()
        .map(|(i, k)| (format!("kernel {k}x{k}"), PALETTE[i % PALETTE.len()]))
        .collect();
    legend(&mut out, 570.0, 56.0, &entries);
    out.push_str("</svg>\n");
    out
}

/// Mean macro F1 against window length, one line per kernel size.
pub fn kernel_lines_svg(trend: &[TrendRow]) -> String {
    let mut windows: Vec<usize> = trend.iter().map(|t| t.window).collect();
    windows.sort_unstable();
    windows.dedup();
    let mut kernels: Vec<usize> = trend.iter().map(|t| t.kernel).collect();
    kernels.sort_unstable();
    kernels.dedup();

    let (width, height) = (560u32, 360u32);
    let mut out = String::new();
    svg_open(&mut out, width, height);
    text(
        &mut out,
        width as f64 / 2.0,
        24.0,
        15,
        "middle",
        "Macro F1 (%) by window length and kernel size",
    );
    let panel = Panel {
        x0: 56.0,
        y0: 44.0,
        w: 400.0,
        h: 260.0,
        y_max: 100.0,
    };
    panel.draw_frame(&mut out, 20.0);

    let xs = |wi: usize| -> f64 {
        if windows.len() == 1 {
            panel.x0 + panel.w / 2.0
        } else {
            panel.x0 + panel.w * (0.1 + 0.8 * wi as f64 / (windows.len() - 1) as f64)
        }
    };
    for (wi, &w) in windows.iter().enumerate() {
        text(
            &mut out,
            xs(wi),
            panel.y0 + panel.h + 16.0,
            11,
            "middle",
            &format!("{w}"),
        );
    }
    text(
        &mut out,
        panel.x0 + panel.w / 2.0,
        panel.y0 + panel.h + 34.0,
        11,
        "middle",
        "window length (samples)",
    );

    for (ki, &k) in kernels.iter().enumerate() {
        let color = PALETTE[ki % PALETTE.len()];
        let mut points = Vec::new();
        for (wi, &w) in windows.iter().enumerate() {
            if let Some(row) = trend.iter().find(|t| t.window == w && t.kernel == k) {
                points.push((xs(wi), panel.y(row.mean_pct)));
            }
        }
        if points.len() > 1 {
            let path: Vec<String> = points.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
            out.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
                path.join(" ")
            ));
        }
        for (x, y) in points {
            out.push_str(&format!(
                "<circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"3.5\" fill=\"{color}\"/>\n"
            ));
        }
    }
    let entries: Vec<(String, &str)> = kernels
        .iter()
        .enumerate()
        .map(|(i, k)| (format!("kernel {k}x{k}"), PALETTE[i % PALETTE.len()]))
        .collect();
    legend(&mut out, 470.0, 56.0, &entries);
    out.push_str("</svg>\n");
    out
}

/// 5x5 heatmap of a row-normalized confusion matrix (percentages).
pub fn heatmap_svg(title: &str, pct: &[[f64; NUM_CLASSES]; NUM_CLASSES]) -> String {
    let cell = 64.0;
    let (x0, y0) = (92.0, 72.0);
    let width = (x0 + cell * NUM_CLASSES as f64 + 24.0) as u32;
    let height = (y0 + cell * NUM_CLASSES as f64 + 48.0) as u32;
    let mut out = String::new();
    svg_open(&mut out, width, height);
    text(&mut out, width as f64 / 2.0, 24.0, 14, "middle", title);
    text(
        &mut out,
        x0 + cell * NUM_CLASSES as f64 / 2.0,
        46.0,
        11,
        "middle",
        "predicted class",
    );
    out.push_str(&format!(
        "<text x=\"22\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\" {FONT} \
         fill=\"#333333\" transform=\"rotate(-90 22 {:.1})\">true class</text>\n",
        y0 + cell * NUM_CLASSES as f64 / 2.0,
        y0 + cell * NUM_CLASSES as f64 / 2.0
    ));

    for (i, name) in CLASS_NAMES.iter().enumerate() {
        text(
            &mut out,
            x0 + (i as f64 + 0.5) * cell,
            y0 - 8.0,
            11,
            "middle",
            name,
        );
        text(
            &mut out,
            x0 - 10.0,
            y0 + (i as f64 + 0.5) * cell + 4.0,
            11,
            "end",
            name,
        );
    }
    for (t, row) in pct.iter().enumerate() {
        for (p, &v) in row.iter().enumerate() {
            let frac = (v / 100.0).clamp(0.0, 1.0);
            // White to deep blue.
            let mix = |a: f64, b: f64| (a + (b - a) * frac).round() as u8;
            let (r, g, b) = (mix(255.0, 26.0), mix(255.0, 80.0), mix(255.0, 143.0));
            let (x, y) = (x0 + p as f64 * cell, y0 + t as f64 * cell);
            out.push_str(&format!(
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{cell}\" height=\"{cell}\" \
                 fill=\"rgb({r},{g},{b})\" stroke=\"#ffffff\"/>\n"
            ));
            let ink = if frac > 0.55 { "#ffffff" } else { "#333333" };
            out.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\" {FONT} \
                 fill=\"{ink}\">{v:.1}</text>\n",
                x + cell / 2.0,
                y + cell / 2.0 + 4.0
            ));
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Training and validation curves: loss on the left panel, accuracy on
/// the right.
pub fn curve_svg(title: &str, curve: &[EpochStats]) -> String {
    let (width, height) = (760u32, 320u32);
    let mut out = String::new();
    svg_open(&mut out, width, height);
    text(&mut out, width as f64 / 2.0, 24.0, 14, "middle", title);

    let max_loss = curve
        .iter()
        .flat_map(|e| [e.train_loss, e.val_loss])
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let panels = [
        ("loss", max_loss * 1.05, 0usize),
        ("accuracy (%)", 100.0, 1usize),
    ];
    for (pi, (label, y_max, which)) in panels.iter().enumerate() {
        let panel = Panel {
            x0: 64.0 + pi as f64 * 360.0,
            y0: 48.0,
            w: 280.0,
            h: 200.0,
            y_max: *y_max,
        };
        text(&mut out, panel.x0, panel.y0 - 8.0, 12, "start", label);
        panel.draw_frame(&mut out, y_max / 5.0);
        let x = |i: usize| -> f64 {
            if curve.len() == 1 {
                panel.x0 + panel.w / 2.0
            } else {
                panel.x0 + panel.w * i as f64 / (curve.len() - 1) as f64
            }
        };
        for (si, series) in ["train", "val"].iter().enumerate() {
            let pick = |e: &EpochStats| match (which, si) {
                (0, 0) => e.train_loss,
                (0, _) => e.val_loss,
                (_, 0) => 100.0 * e.train_accuracy,
                (_, _) => 100.0 * e.val_accuracy,
            };
            let pts: Vec<String> = curve
                .iter()
                .enumerate()
                .map(|(i, e)| format!("{:.1},{:.1}", x(i), panel.y(pick(e))))
                .collect();
            out.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                pts.join(" "),
                PALETTE[si]
            ));
            let _ = series;
        }
        text(
            &mut out,
            panel.x0 + panel.w / 2.0,
            panel.y0 + panel.h + 28.0,
            11,
            "middle",
            "epoch",
        );
    }
    legend(
        &mut out,
        width as f64 - 90.0,
        56.0,
        &[("train".into(), PALETTE[0]), ("val".into(), PALETTE[1])],
    );
    out.push_str("</svg>\n");
    out
}
