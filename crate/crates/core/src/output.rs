//! Result files: CSV, JSON and SVG text with a provenance header, written atomically.
//!
//! CSV uses `.` decimals and `\n` line endings; floats are printed with Rust's shortest
//! round-trip formatting, which does not depend on locale.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde_json::{Map, Value};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `chiptrap <version> scenario sha256:<hash>`
pub fn header_line(scenario_hash: &str) -> String {
    format!("chiptrap {VERSION} scenario sha256:{scenario_hash}")
}

/// Thirteen significant digits, so unit conversions do not leak binary noise
/// (`422.00000000000006` prints as `422`). Exponent form outside 1e-4..1e15.
pub fn num(x: f64) -> String {
    if !x.is_finite() {
        return "nan".into();
    }
    let v = round_sig(x);
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// `x` rounded to 13 significant digits, which hides last-bit noise from unit scaling.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format!("{x:.12e}").parse().expect("formatted float parses")
}

fn tidy(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round_sig).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(a) => a.iter_mut().for_each(tidy),
        Value::Object(o) => o.values_mut().for_each(tidy),
        _ => {}
    }
}

/// Tabular output with a `#` header line, a column line and one line per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self, scenario_hash: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {}", header_line(scenario_hash));
        let _ = writeln!(s, "{}", self.columns.join(","));
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        s
    }

    /// Rows as JSON objects keyed by column. Numeric cells become numbers, `nan` null.
    pub fn to_json(&self) -> Value {
        let cell = |c: &str| -> Value {
            match c {
                "nan" => Value::Null,
                "true" => Value::Bool(true),
                "false" => Value::Bool(false),
                _ => c
                    .parse::<f64>()
                    .ok()
                    .and_then(serde_json::Number::from_f64)
                    .map_or_else(|| Value::String(c.into()), Value::Number),
            }
        };
        Value::Array(
            self.rows
                .iter()
                .map(|r| Value::Object(self.columns.iter().cloned().zip(r.iter().map(|c| cell(c))).collect()))
                .collect(),
        )
    }

    /// Column `name` parsed as floats.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        self.rows.iter().map(|r| r[k].parse().ok()).collect()
    }
}

/// Pretty JSON document whose first key is the provenance header.
pub fn json_document(scenario_hash: &str, body: Value) -> String {
    let mut m = Map::new();
    m.insert("header".into(), Value::String(header_line(scenario_hash)));
    let mut body = body;
    tidy(&mut body);
    match body {
        Value::Object(o) => m.extend(o),
        other => {
            m.insert("data".into(), other);
        }
    }
    let mut s = serde_json::to_string_pretty(&Value::Object(m)).expect("JSON values serialize");
    s.push('\n');
    s
}

/// Write via a temporary file in the destination directory and rename into place.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// One named polyline or scatter series for [`svg_plot`].
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub scatter: bool,
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Minimal line/scatter plot of `series` with linear axes.
pub fn svg_plot(scenario_hash: &str, title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let pts = series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x1 > x0) {
        x0 -= 1.0;
        x1 += 1.0;
    }
    if !(y1 > y0) {
        y0 -= 1.0;
        y1 += 1.0;
    }
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(s, "<!-- {} -->", header_line(scenario_hash));
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<path d="M{m} {b} H{r} M{m} {b} V{m}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        b = H - MARGIN,
        r = W - MARGIN
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 15.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
    for (v, anchor, x, y) in [
        (x0, "start", MARGIN, H - MARGIN + 15.0),
        (x1, "end", W - MARGIN, H - MARGIN + 15.0),
        (y0, "end", MARGIN - 5.0, H - MARGIN),
        (y1, "end", MARGIN - 5.0, MARGIN + 4.0),
    ] {
        let _ = writeln!(s, r#"<text x="{x}" y="{y}" text-anchor="{anchor}">{}</text>"#, tick(v));
    }
    for (i, ser) in series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let p: Vec<(f64, f64)> = ser.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).map(|&(x, y)| (sx(x), sy(y))).collect();
        if ser.scatter {
            for (x, y) in p {
                let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{c}"/>"#);
            }
        } else if !p.is_empty() {
            let d: Vec<String> = p.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(s, r#"<polyline points="{}" stroke="{c}" fill="none"/>"#, d.join(" "));
        }
        let ly = MARGIN + 15.0 * i as f64;
        let _ = writeln!(s, r#"<text x="{}" y="{ly}" fill="{c}" text-anchor="end">{}</text>"#, W - MARGIN, escape(&ser.name));
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.3e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![num(0.1), num(2.5e-7)]);
        t.push(vec![num(422e-9 * 1e9), num(-0.0)]);
        let csv = t.to_csv("abc");
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], format!("# chiptrap {VERSION} scenario sha256:abc"));
        assert_eq!(lines[1], "a,b");
        assert_eq!(lines[2], "0.1,2.5e-7");
        assert_eq!(lines[3], "422,-0");
        assert!(!csv.contains('\r'));
        assert_eq!(t.column("b").unwrap(), vec![2.5e-7, -0.0]);
    }

    #[test]
    fn json_header_first() {
        let doc = json_document("h", serde_json::json!({"z": 1, "a": 2}));
        let lines: Vec<&str> = doc.lines().collect();
        assert!(lines[1].contains("\"header\""));
        let v: Value = serde_json::from_str(&doc).unwrap();
        assert_eq!(v["a"], 2);
        let doc = json_document("h", serde_json::json!([{"nm": 422e-9 * 1e9}]));
        assert!(doc.contains("\"nm\": 422.0"), "{doc}");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_atomic(&p, "one").unwrap();
        write_atomic(&p, "two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn svg_is_deterministic() {
        let s = [Series { name: "a<b".into(), points: vec![(0.0, 1.0), (1.0, 3.0)], scatter: false }];
        let a = svg_plot("h", "t", "x", "y", &s);
        assert_eq!(a, svg_plot("h", "t", "x", "y", &s));
        assert!(a.starts_with("<!-- chiptrap"));
        assert!(a.contains("a&lt;b"));
    }
}
