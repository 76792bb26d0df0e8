//! Minimal self-contained SVG charts.

use std::fmt::Write;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

pub fn color(i: usize) -> &'static str {
    PALETTE[i % PALETTE.len()]
}

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

pub struct Svg {
    body: String,
    width: f64,
    height: f64,
}

impl Svg {
    pub fn new(width: f64, height: f64) -> Self {
        Self {
            body: String::new(),
            width,
            height,
        }
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="{width}"/>"#
        );
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str, opacity: f64) {
        let _ = writeln!(
            self.body,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{fill}" fill-opacity="{opacity}" stroke="black" stroke-width="0.5"/>"#,
            w.max(0.0),
            h.max(0.0)
        );
    }

    pub fn circle(&mut self, cx: f64, cy: f64, r: f64, fill: &str) {
        let _ = writeln!(self.body, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="{r}" fill="{fill}"/>"#);
    }

    pub fn polyline(&mut self, points: &[(f64, f64)], stroke: &str) {
        let pts: Vec<String> = points.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
        let _ = writeln!(
            self.body,
            r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="2"/>"#,
            pts.join(" ")
        );
    }

    pub fn text(&mut self, x: f64, y: f64, s: &str, size: f64, anchor: &str) {
        let _ = writeln!(
            self.body,
            r#"<text x="{x:.2}" y="{y:.2}" font-size="{size}" font-family="sans-serif" text-anchor="{anchor}">{}</text>"#,
            escape(s)
        );
    }

    pub fn finish(self) -> String {
        format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
             <svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
             <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

/// Linear map from a data interval onto a pixel interval.
#[derive(Debug, Clone, Copy)]
struct Scale {
    d0: f64,
    d1: f64,
    r0: f64,
    r1: f64,
}

impl Scale {
    fn new(mut d0: f64, mut d1: f64, r0: f64, r1: f64) -> Self {
        if !(d1 - d0).is_normal() || d1 < d0 {
            d0 -= 0.5;
            d1 = d0 + 1.0;
        }
        Self { d0, d1, r0, r1 }
    }

    fn at(&self, v: f64) -> f64 {
        self.r0 + (v - self.d0) / (self.d1 - self.d0) * (self.r1 - self.r0)
    }
}

struct Frame {
    x: Scale,
    y: Scale,
}

const MARGIN: (f64, f64, f64, f64) = (60.0, 20.0, 40.0, 50.0); // left, right, top, bottom

fn axes(svg: &mut Svg, title: &str, xlabel: &str, ylabel: &str, x: (f64, f64), y: (f64, f64)) -> Frame {
    let (l, r, t, b) = MARGIN;
    let (w, h) = (svg.width, svg.height);
    let frame = Frame {
        x: Scale::new(x.0, x.1, l, w - r),
        y: Scale::new(y.0, y.1, h - b, t),
    };
    svg.text(w / 2.0, t / 2.0 + 6.0, title, 14.0, "middle");
    svg.line(l, h - b, w - r, h - b, "black", 1.0);
    svg.line(l, t, l, h - b, "black", 1.0);
    for i in 0..=4 {
        let fx = frame.x.d0 + (frame.x.d1 - frame.x.d0) * i as f64 / 4.0;
        let px = frame.x.at(fx);
        svg.line(px, h - b, px, h - b + 4.0, "black", 1.0);
        svg.text(px, h - b + 16.0, &tick(fx), 10.0, "middle");
        let fy = frame.y.d0 + (frame.y.d1 - frame.y.d0) * i as f64 / 4.0;
        let py = frame.y.at(fy);
        svg.line(l - 4.0, py, l, py, "black", 1.0);
        svg.text(l - 6.0, py + 3.0, &tick(fy), 10.0, "end");
    }
    svg.text((l + w - r) / 2.0, h - 12.0, xlabel, 12.0, "middle");
    svg.text(14.0, (t + h - b) / 2.0, ylabel, 12.0, "middle");
    frame
}

fn tick(v: f64) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn legend(svg: &mut Svg, names: &[String]) {
    let x = svg.width - MARGIN.1 - 110.0;
    for (i, n) in names.iter().enumerate() {
        let y = MARGIN.2 + 8.0 + 14.0 * i as f64;
        svg.rect(x, y - 8.0, 10.0, 10.0, color(i), 0.8);
        svg.text(x + 14.0, y + 1.0, n, 10.0, "start");
    }
}

/// Overlaid histograms of two samples on shared bins.
pub fn histogram(title: &str, xlabel: &str, series: &[(String, Vec<f64>)], bins: usize, range: (f64, f64)) -> String {
    let mut svg = Svg::new(640.0, 400.0);
    let width = (range.1 - range.0) / bins as f64;
    let counts: Vec<Vec<usize>> = series
        .iter()
        .map(|(_, values)| {
            let mut c = vec![0; bins];
            for &v in values {
                let i = ((v - range.0) / width).floor().clamp(0.0, (bins - 1) as f64) as usize;
                c[i] += 1;
            }
            c
        })
        .collect();
    let top = counts.iter().flatten().copied().max().unwrap_or(1).max(1) as f64;
    let f = axes(&mut svg, title, xlabel, "count", range, (0.0, top));
    for (s, c) in counts.iter().enumerate() {
        for (i, &n) in c.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let x0 = f.x.at(range.0 + width * i as f64);
            let x1 = f.x.at(range.0 + width * (i + 1) as f64);
            let y = f.y.at(n as f64);
            svg.rect(x0, y, x1 - x0, f.y.at(0.0) - y, color(s), 0.5);
        }
    }
    legend(&mut svg, &series.iter().map(|s| s.0.clone()).collect::<Vec<_>>());
    svg.finish()
}

/// Five-number summary: min, lower quartile, median, upper quartile, max.
pub fn five_numbers(values: &[f64]) -> Option<[f64; 5]> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let at = |f: f64| {
        let pos = f * (v.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    Some([v[0], at(0.25), at(0.5), at(0.75), v[v.len() - 1]])
}

/// Side-by-side boxplots: one group per x label, one box per series.
pub fn boxplots(title: &str, xlabel: &str, ylabel: &str, groups: &[(String, Vec<Vec<f64>>)], series: &[String]) -> String {
    let mut svg = Svg::new(640.0, 400.0);
    let stats: Vec<Vec<Option<[f64; 5]>>> = groups
        .iter()
        .map(|(_, boxes)| boxes.iter().map(|b| five_numbers(b)).collect())
        .collect();
    let all = stats.iter().flatten().flatten();
    let lo = all.clone().map(|s| s[0]).fold(f64::INFINITY, f64::min);
    let hi = all.map(|s| s[4]).fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if lo.is_finite() { (lo.min(0.0), hi) } else { (0.0, 1.0) };
    let f = axes(&mut svg, title, xlabel, ylabel, (0.0, groups.len() as f64), (lo, hi));
    let slot = (f.x.at(1.0) - f.x.at(0.0)) / (series.len() + 1) as f64;
    for (g, (label, _)) in groups.iter().enumerate() {
        let x0 = f.x.at(g as f64);
        svg.text(x0 + slot * (series.len() as f64 + 1.0) / 2.0, svg.height - MARGIN.3 + 30.0, label, 10.0, "middle");
        for (s, st) in stats[g].iter().enumerate() {
            let Some([mn, q1, md, q3, mx]) = *st else { continue };
            let cx = x0 + slot * (s as f64 + 1.0);
            let half = slot * 0.35;
            svg.line(cx, f.y.at(mn), cx, f.y.at(q1), "black", 1.0);
            svg.line(cx, f.y.at(q3), cx, f.y.at(mx), "black", 1.0);
            svg.rect(cx - half, f.y.at(q3), 2.0 * half, f.y.at(q1) - f.y.at(q3), color(s), 0.6);
            svg.line(cx - half, f.y.at(md), cx + half, f.y.at(md), "black", 2.0);
        }
    }
    legend(&mut svg, series);
    svg.finish()
}

/// One polyline with markers per series.
pub fn line_chart(title: &str, xlabel: &str, ylabel: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let mut svg = Svg::new(640.0, 400.0);
    let pts = series.iter().flat_map(|s| s.1.iter());
    let x = pts.clone().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.0), a.1.max(p.0)));
    let y = pts.fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.1), a.1.max(p.1)));
    let (x, y) = if x.0.is_finite() { (x, (y.0.min(0.0), y.1 * 1.05)) } else { ((0.0, 1.0), (0.0, 1.0)) };
    let f = axes(&mut svg, title, xlabel, ylabel, x, y);
    for (i, (_, points)) in series.iter().enumerate() {
        let px: Vec<(f64, f64)> = points.iter().map(|&(a, b)| (f.x.at(a), f.y.at(b))).collect();
        svg.polyline(&px, color(i));
        for &(a, b) in &px {
            svg.circle(a, b, 3.0, color(i));
        }
    }
    legend(&mut svg, &series.iter().map(|s| s.0.clone()).collect::<Vec<_>>());
    svg.finish()
}

/// Critical-difference diagram: methods on an average-rank axis (rank 1 on
/// the left), a CD bar, and one thick bar per group of indistinguishable
/// methods.
pub fn cd_diagram(title: &str, methods: &[String], ranks: &[f64], cd: f64, groups: &[Vec<usize>]) -> String {
    let k = methods.len();
    let height = 140.0 + 18.0 * (k as f64 + groups.len() as f64);
    let mut svg = Svg::new(640.0, height);
    let axis_y = 70.0;
    let x = Scale::new(1.0, k.max(2) as f64, 80.0, 560.0);
    svg.text(320.0, 20.0, title, 14.0, "middle");
    svg.line(x.at(1.0), axis_y, x.at(k.max(2) as f64), axis_y, "black", 1.0);
    for r in 1..=k.max(2) {
        let px = x.at(r as f64);
        svg.line(px, axis_y - 5.0, px, axis_y, "black", 1.0);
        svg.text(px, axis_y - 8.0, &r.to_string(), 10.0, "middle");
    }
    // CD bar
    svg.line(x.at(1.0), 40.0, x.at(1.0 + cd), 40.0, "black", 2.0);
    svg.text(x.at(1.0 + cd) + 6.0, 44.0, &format!("CD = {cd:.3}"), 10.0, "start");

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| ranks[a].total_cmp(&ranks[b]));
    let label_top = axis_y + 30.0 + 14.0 * groups.len() as f64;
    for (row, &m) in order.iter().enumerate() {
        let px = x.at(ranks[m]);
        let ly = label_top + 18.0 * row as f64;
        let left = row < k.div_ceil(2);
        let lx = if left { 40.0 } else { 600.0 };
        svg.line(px, axis_y, px, ly, "black", 1.0);
        svg.line(px, ly, lx, ly, "black", 1.0);
        let label = format!("{} ({:.2})", methods[m], ranks[m]);
        svg.text(lx + if left { -4.0 } else { 4.0 }, ly + 4.0, &label, 11.0, if left { "end" } else { "start" });
    }
    for (g, members) in groups.iter().enumerate() {
        if members.len() < 2 {
            continue;
        }
        let lo = members.iter().map(|&m| ranks[m]).fold(f64::INFINITY, f64::min);
        let hi = members.iter().map(|&m| ranks[m]).fold(f64::NEG_INFINITY, f64::max);
        let gy = axis_y + 14.0 + 12.0 * g as f64;
        let _ = writeln!(
            svg.body,
            r#"<rect class="cd-group" x="{:.2}" y="{:.2}" width="{:.2}" height="4" fill="black"/>"#,
            x.at(lo) - 3.0,
            gy - 2.0,
            x.at(hi) - x.at(lo) + 6.0
        );
    }
    svg.finish()
}

/// Grid of outcome symbols with `p` down the side and `q` along the top.
pub fn outcome_grid(title: &str, p: &[f64], q: &[f64], symbols: &[Vec<&str>]) -> String {
    let cell = 44.0;
    let (left, top) = (80.0, 70.0);
    let mut svg = Svg::new(left + cell * q.len() as f64 + 30.0, top + cell * p.len() as f64 + 60.0);
    svg.text(svg.width / 2.0, 22.0, title, 13.0, "middle");
    svg.text(left + cell * q.len() as f64 / 2.0, 44.0, "q", 12.0, "middle");
    svg.text(20.0, top + cell * p.len() as f64 / 2.0, "p", 12.0, "middle");
    for (j, qv) in q.iter().enumerate() {
        svg.text(left + cell * (j as f64 + 0.5), top - 6.0, &tick(*qv), 10.0, "middle");
    }
    for (i, pv) in p.iter().enumerate() {
        let y = top + cell * i as f64;
        svg.text(left - 8.0, y + cell / 2.0 + 4.0, &tick(*pv), 10.0, "end");
        for (j, s) in symbols[i].iter().enumerate() {
            let x = left + cell * j as f64;
            svg.rect(x, y, cell, cell, "white", 1.0);
            svg.text(x + cell / 2.0, y + cell / 2.0 + 7.0, s, 20.0, "middle");
        }
    }
    svg.text(
        svg.width / 2.0,
        svg.height - 14.0,
        "○ win   · tie   ● loss",
        11.0,
        "middle",
    );
    svg.finish()
}
