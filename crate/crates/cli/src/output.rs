//! CSV and SVG writers.

use std::io::Write;

/// Scientific notation with `precision` digits after the point; `precision = 16`
/// gives 17 significant digits.
pub fn fmt_float(x: f64, precision: usize) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    format!("{x:.precision$e}")
}

pub fn write_metadata<W: Write>(out: &mut W, meta: &[(String, String)]) -> std::io::Result<()> {
    for (k, v) in meta {
        writeln!(out, "# {k}={v}")?;
    }
    Ok(())
}

/// A column-oriented numeric table with a metadata header.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub metadata: Vec<(String, String)>,
    pub x_name: String,
    pub x: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl Dataset {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn write_csv<W: Write>(&self, mut out: W, precision: usize) -> std::io::Result<()> {
        write_metadata(&mut out, &self.metadata)?;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![self.x_name.clone()];
        header.extend(self.columns.iter().map(|(n, _)| n.clone()));
        w.write_record(&header)?;
        for (i, x) in self.x.iter().enumerate() {
            let mut rec = vec![fmt_float(*x, precision)];
            rec.extend(self.columns.iter().map(|(_, v)| fmt_float(v[i], precision)));
            w.write_record(&rec)?;
        }
        w.flush()
    }

    /// Minimal line plot; axes flagged `log` use base-10 scaling and drop
    /// non-positive samples.
    pub fn write_svg<W: Write>(&self, mut out: W, title: &str, log_x: bool, log_y: bool) -> std::io::Result<()> {
        const W: f64 = 720.0;
        const H: f64 = 480.0;
        const PAD: f64 = 60.0;
        const COLORS: [&str; 9] = [
            "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#7f7f7f",
        ];
        let tx = |x: f64| if log_x { x.log10() } else { x };
        let ty = |y: f64| if log_y { y.log10() } else { y };
        let ok = |x: f64, y: f64| x.is_finite() && y.is_finite() && (!log_x || x > 0.0) && (!log_y || y > 0.0);

        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (_, ys) in &self.columns {
            for (x, y) in self.x.iter().zip(ys) {
                if ok(*x, *y) {
                    x0 = x0.min(tx(*x));
                    x1 = x1.max(tx(*x));
                    y0 = y0.min(ty(*y));
                    y1 = y1.max(ty(*y));
                }
            }
        }
        if !(x0 < x1) {
            x1 = x0 + 1.0;
        }
        if !(y0 < y1) {
            y1 = y0 + 1.0;
        }
        let px = |x: f64| PAD + (tx(x) - x0) / (x1 - x0) * (W - 2.0 * PAD);
        let py = |y: f64| H - PAD - (ty(y) - y0) / (y1 - y0) * (H - 2.0 * PAD);

        writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#)?;
        writeln!(out, r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#, W - 2.0 * PAD, H - 2.0 * PAD)?;
        writeln!(out, r#"<text x="{}" y="30" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title))?;
        let label = |v: f64, log: bool| if log { format!("1e{v:.1}") } else { format!("{v:.3}") };
        writeln!(out, r#"<text x="{PAD}" y="{}" text-anchor="start">{}</text>"#, H - PAD + 18.0, label(x0, log_x))?;
        writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, W - PAD, H - PAD + 18.0, label(x1, log_x))?;
        writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 15.0, escape(&self.x_name))?;
        writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, PAD - 4.0, H - PAD, label(y0, log_y))?;
        writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, PAD - 4.0, PAD + 10.0, label(y1, log_y))?;
        for (k, (name, ys)) in self.columns.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            let pts: Vec<String> = self
                .x
                .iter()
                .zip(ys)
                .filter(|(x, y)| ok(**x, **y))
                .map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y)))
                .collect();
            writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "))?;
            let ly = PAD + 16.0 + 16.0 * k as f64;
            writeln!(out, r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#, PAD + 8.0, escape(name))?;
        }
        writeln!(out, "</svg>")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
