//! Output plumbing. Every artifact is written to a temp file in the target
//! directory and renamed into place, so readers never see a half-written
//! file. CSV follows RFC 4180 (CRLF rows, `.` decimal point); JSON key
//! order and float formatting come from serde_json and are stable across
//! runs and thread counts. SVG is plain 1.1 markup with no timestamps.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    let path = dir.join(name);
    tmp.persist(&path).map_err(|e| e.error)?;
    Ok(path)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    let mut s = String::with_capacity(64);
    for b in out {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// CSV writer into memory with RFC 4180 row endings.
pub fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(Vec::new())
}

pub fn csv_bytes(w: csv::Writer<Vec<u8>>) -> std::io::Result<Vec<u8>> {
    w.into_inner()
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::Other, e.to_string()))
}

/// Shortest round-trip decimal form; `Display` for floats is exact here.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: Value,
}

impl Check {
    pub fn new(name: &str, pass: bool, detail: Value) -> Check {
        Check {
            name: name.to_string(),
            pass,
            detail,
        }
    }
}

/// The summary envelope every subcommand emits: conventions, the hash of
/// the exact config bytes, per-check verdicts, and an overall verdict.
pub fn summary(
    command: &str,
    conv: &fieldport_core::conventions::Conventions,
    config_sha256: &str,
    checks: &[Check],
    extra: Value,
) -> (Value, bool) {
    let pass = checks.iter().all(|c| c.pass);
    let mut doc = json!({
        "command": command,
        "conventions": {
            "mass": conv.mass,
            "spatial_dims": conv.spatial_dims,
            "contraction_norm": conv.contraction_norm,
            "closed_form_calibration": conv.closed_form_calibration,
        },
        "config_sha256": config_sha256,
        "checks": checks.iter().map(|c| json!({
            "name": c.name,
            "pass": c.pass,
            "detail": c.detail,
        })).collect::<Vec<_>>(),
        "pass": pass,
    });
    if let (Some(dst), Some(src)) = (doc.as_object_mut(), extra.as_object()) {
        for (k, v) in src {
            dst.insert(k.clone(), v.clone());
        }
    }
    (doc, pass)
}

pub fn json_bytes(doc: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(doc).expect("summary serializes");
    s.push('\n');
    s.into_bytes()
}

// -- SVG -------------------------------------------------------------------

const W: f64 = 640.0;
const H: f64 = 480.0;
const ML: f64 = 62.0; // left margin, room for tick labels
const MR: f64 = 20.0;
const MT: f64 = 34.0;
const MB: f64 = 46.0;

fn svg_head(title: &str) -> String {
    format!(
        concat!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n",
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" ",
            "width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<text x=\"{tx}\" y=\"22\" text-anchor=\"middle\" ",
            "font-family=\"sans-serif\" font-size=\"15\">{title}</text>\n"
        ),
        w = W,
        h = H,
        tx = W / 2.0,
        title = xml_escape(title),
    )
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axis_labels(xlabel: &str, ylabel: &str) -> String {
    format!(
        concat!(
            "<text x=\"{xc}\" y=\"{yb}\" text-anchor=\"middle\" ",
            "font-family=\"sans-serif\" font-size=\"13\">{xl}</text>\n",
            "<text x=\"16\" y=\"{ym}\" text-anchor=\"middle\" ",
            "font-family=\"sans-serif\" font-size=\"13\" ",
            "transform=\"rotate(-90 16 {ym})\">{yl}</text>\n"
        ),
        xc = ML + (W - ML - MR) / 2.0,
        yb = H - 10.0,
        xl = xml_escape(xlabel),
        ym = MT + (H - MT - MB) / 2.0,
        yl = xml_escape(ylabel),
    )
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    (0..5).map(|i| lo + (hi - lo) * i as f64 / 4.0).collect()
}

fn frame(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> String {
    let mut s = format!(
        "<rect x=\"{ML}\" y=\"{MT}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"black\"/>\n",
        W - ML - MR,
        H - MT - MB
    );
    for t in ticks(x_lo, x_hi) {
        let px = ML + (t - x_lo) / (x_hi - x_lo).max(f64::MIN_POSITIVE) * (W - ML - MR);
        s.push_str(&format!(
            concat!(
                "<line x1=\"{px:.2}\" y1=\"{y0:.2}\" x2=\"{px:.2}\" y2=\"{y1:.2}\" stroke=\"black\"/>\n",
                "<text x=\"{px:.2}\" y=\"{yt:.2}\" text-anchor=\"middle\" ",
                "font-family=\"sans-serif\" font-size=\"11\">{v}</text>\n"
            ),
            px = px,
            y0 = H - MB,
            y1 = H - MB + 5.0,
            yt = H - MB + 18.0,
            v = tick_label(t),
        ));
    }
    for t in ticks(y_lo, y_hi) {
        let py = H - MB - (t - y_lo) / (y_hi - y_lo).max(f64::MIN_POSITIVE) * (H - MT - MB);
        s.push_str(&format!(
            concat!(
                "<line x1=\"{x0:.2}\" y1=\"{py:.2}\" x2=\"{x1:.2}\" y2=\"{py:.2}\" stroke=\"black\"/>\n",
                "<text x=\"{xt:.2}\" y=\"{py2:.2}\" text-anchor=\"end\" ",
                "font-family=\"sans-serif\" font-size=\"11\">{v}</text>\n"
            ),
            x0 = ML - 5.0,
            x1 = ML,
            py = py,
            xt = ML - 8.0,
            py2 = py + 4.0,
            v = tick_label(t),
        ));
    }
    s
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if (1e-3..1e4).contains(&a) {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

/// Single-series line plot.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, pts: &[(f64, f64)]) -> String {
    let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x_lo = x_lo.min(x);
        x_hi = x_hi.max(x);
        y_lo = y_lo.min(y);
        y_hi = y_hi.max(y);
    }
    if pts.is_empty() {
        x_lo = 0.0;
        x_hi = 1.0;
        y_lo = 0.0;
        y_hi = 1.0;
    }
    if y_lo == y_hi {
        y_lo -= 0.5;
        y_hi += 0.5;
    }
    let pad = 0.05 * (y_hi - y_lo);
    y_lo -= pad;
    y_hi += pad;
    let mut s = svg_head(title);
    s.push_str(&frame(x_lo, x_hi, y_lo, y_hi));
    s.push_str(&axis_labels(xlabel, ylabel));
    let mut d = String::new();
    for (i, &(x, y)) in pts.iter().enumerate() {
        let px = ML + (x - x_lo) / (x_hi - x_lo).max(f64::MIN_POSITIVE) * (W - ML - MR);
        let py = H - MB - (y - y_lo) / (y_hi - y_lo) * (H - MT - MB);
        d.push_str(&format!("{}{px:.2} {py:.2}", if i == 0 { "M" } else { " L" }));
    }
    s.push_str(&format!(
        "<path d=\"{d}\" fill=\"none\" stroke=\"#2a788e\" stroke-width=\"1.5\"/>\n"
    ));
    s.push_str("</svg>\n");
    s
}

// fixed perceptual ramp, low to high
const STOPS: [(f64, f64, f64); 6] = [
    (0.267, 0.005, 0.329),
    (0.255, 0.267, 0.530),
    (0.164, 0.471, 0.558),
    (0.134, 0.659, 0.518),
    (0.478, 0.821, 0.318),
    (0.993, 0.906, 0.144),
];

fn colormap(t: f64) -> String {
    let t = t.clamp(0.0, 1.0) * (STOPS.len() - 1) as f64;
    let i = (t.floor() as usize).min(STOPS.len() - 2);
    let f = t - i as f64;
    let mix = |a: f64, b: f64| ((a + (b - a) * f) * 255.0).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(STOPS[i].0, STOPS[i + 1].0),
        mix(STOPS[i].1, STOPS[i + 1].1),
        mix(STOPS[i].2, STOPS[i + 1].2)
    )
}

/// Heatmap of `values` laid out row-major, `ny` rows of `nx` cells; row 0
/// sits at the bottom (Cartesian). Extents map cell centers.
pub fn heatmap(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    nx: usize,
    ny: usize,
    x_extent: (f64, f64),
    y_extent: (f64, f64),
    values: &[f64],
) -> String {
    assert_eq!(values.len(), nx * ny);
    let (mut v_lo, mut v_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in values {
        if v.is_finite() {
            v_lo = v_lo.min(v);
            v_hi = v_hi.max(v);
        }
    }
    if !v_lo.is_finite() || v_lo == v_hi {
        v_lo = 0.0;
        v_hi = 1.0;
    }
    let mut s = svg_head(title);
    let cw = (W - ML - MR) / nx as f64;
    let ch = (H - MT - MB) / ny as f64;
    for row in 0..ny {
        for col in 0..nx {
            let v = values[row * nx + col];
            let t = if v.is_finite() {
                (v - v_lo) / (v_hi - v_lo)
            } else {
                0.0
            };
            let px = ML + col as f64 * cw;
            let py = H - MB - (row + 1) as f64 * ch;
            // slight overdraw hides antialiasing seams between cells
            s.push_str(&format!(
                "<rect x=\"{px:.2}\" y=\"{py:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" fill=\"{c}\"/>\n",
                w = cw + 0.5,
                h = ch + 0.5,
                c = colormap(t),
            ));
        }
    }
    s.push_str(&frame(x_extent.0, x_extent.1, y_extent.0, y_extent.1));
    s.push_str(&axis_labels(xlabel, ylabel));
    s.push_str(&format!(
        "<text x=\"{x:.2}\" y=\"{y}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">range [{lo}, {hi}]</text>\n",
        x = W - MR,
        y = H - 6.0,
        lo = tick_label(v_lo),
        hi = tick_label(v_hi),
    ));
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_lands_and_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_atomic(dir.path(), "a.txt", b"one").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"one");
        write_atomic(dir.path(), "a.txt", b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        // no stray temp files left behind
        let count = std::fs::read_dir(dir.path()).unwrap().count();
        assert_eq!(count, 1);
    }

    #[test]
    fn csv_rows_end_with_crlf() {
        let mut w = csv_writer();
        w.write_record(["a", "b"]).unwrap();
        w.write_record([fmt_f64(0.5), fmt_f64(-1.25e-9)]).unwrap();
        let bytes = csv_bytes(w).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert_eq!(text, "a,b\r\n0.5,-0.00000000125\r\n");
    }

    #[test]
    fn summary_envelope_and_verdict() {
        let conv = fieldport_core::conventions::Conventions::new(1.0, 3).unwrap();
        let checks = vec![
            Check::new("alpha", true, json!({"v": 1})),
            Check::new("beta", false, json!({})),
        ];
        let (doc, pass) = summary("demo", &conv, "00ff", &checks, json!({"points": 7}));
        assert!(!pass);
        assert_eq!(doc["pass"], json!(false));
        assert_eq!(doc["points"], json!(7));
        assert_eq!(doc["conventions"]["mass"], json!(1.0));
        assert_eq!(doc["checks"][1]["pass"], json!(false));
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let svg = line_plot("t", "x", "y", &[(0.0, 1.0), (1.0, 2.0), (2.0, 0.5)]);
        assert!(svg.starts_with("<?xml"));
        assert!(svg.contains("<path d=\"M"));
        assert!(svg.trim_end().ends_with("</svg>"));
        let hm = heatmap("h", "x", "y", 2, 2, (0.0, 1.0), (0.0, 1.0), &[0.0, 0.3, 0.7, 1.0]);
        assert_eq!(hm.matches("<rect").count(), 1 + 4 + 1); // bg + cells + frame
        assert!(hm.contains(&colormap(0.0)) && hm.contains(&colormap(1.0)));
    }

    #[test]
    fn colormap_endpoints() {
        assert_eq!(colormap(0.0), "#440154");
        assert_eq!(colormap(1.0), "#fde725");
    }
}
