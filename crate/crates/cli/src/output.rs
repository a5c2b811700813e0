//! Text renderers for CSV, JSON and SVG output. Every renderer returns a
//! string so identical inputs give identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use pcmod::BlochVector;
use serde::Serialize;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Comma separated, one header row, LF line endings.
#[derive(Debug, Clone, Default)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut csv = Self::default();
        csv.text.push_str(&header.join(","));
        csv.text.push('\n');
        csv
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn numbers(&mut self, values: &[f64]) {
        let cells: Vec<String> = values.iter().map(|&v| num(v)).collect();
        self.row(&cells);
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

pub fn json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

/// Collects the files of one command and writes them together once all of
/// them have been rendered.
#[derive(Debug, Default)]
pub struct Bundle {
    files: Vec<(String, String)>,
}

impl Bundle {
    pub fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c.as_str())
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        self.files
            .iter()
            .map(|(name, contents)| {
                let path = dir.join(name);
                fs::write(&path, contents)
                    .with_context(|| format!("cannot write {}", path.display()))?;
                Ok(path)
            })
            .collect()
    }
}

const PANEL: f64 = 220.0;
const RADIUS: f64 = 90.0;

/// One labelled path on the sphere.
pub struct Track<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub points: &'a [BlochVector],
}

/// Two orthographic views of the sphere, onto the u-w and v-w planes, with
/// the tracks drawn as polylines and the poles marked.
pub fn bloch_svg(title: &str, tracks: &[Track<'_>]) -> String {
    let width = 2.0 * PANEL;
    let height = PANEL + 30.0 + 16.0 * tracks.len() as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<text x="8" y="16">{}</text>"#, escape(title));
    let views: [(&str, fn(&BlochVector) -> f64); 2] = [("u", |b| b.u), ("v", |b| b.v)];
    for (k, (axis, horizontal)) in views.iter().enumerate() {
        let cx = PANEL * (k as f64 + 0.5);
        let cy = 20.0 + PANEL / 2.0;
        let _ = writeln!(
            s,
            r##"<circle cx="{cx}" cy="{cy}" r="{RADIUS}" fill="none" stroke="#999"/>"##
        );
        let _ = writeln!(
            s,
            r##"<line x1="{}" y1="{cy}" x2="{}" y2="{cy}" stroke="#ddd"/>"##,
            cx - RADIUS,
            cx + RADIUS
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}">{axis}</text><text x="{}" y="{}">w</text>"#,
            cx + RADIUS + 4.0,
            cy + 4.0,
            cx - 4.0,
            cy - RADIUS - 14.0
        );
        for (label, w) in [("N", 1.0), ("S", -1.0)] {
            let y = cy - RADIUS * w;
            let _ = writeln!(s, r#"<circle cx="{cx}" cy="{y}" r="3" fill="black"/>"#);
            let _ = writeln!(s, r#"<text x="{}" y="{}">{label}</text>"#, cx + 6.0, y + 4.0);
        }
        for track in tracks {
            let pts: Vec<String> = track
                .points
                .iter()
                .map(|b| format!("{:.3},{:.3}", cx + RADIUS * horizontal(b), cy - RADIUS * b.w))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                pts.join(" "),
                track.color
            );
        }
    }
    for (i, track) in tracks.iter().enumerate() {
        let y = PANEL + 26.0 + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="8" y1="{}" x2="28" y2="{}" stroke="{}" stroke-width="2"/><text x="34" y="{y}">{}</text>"#,
            y - 4.0,
            y - 4.0,
            track.color,
            escape(track.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
