use crate::{Failure, Globals, PlotKind};
use kinswarm::experiments::loglog_slope;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];
const W: f64 = 720.0;
const H: f64 = 480.0;
const MARGIN: [f64; 4] = [70.0, 160.0, 40.0, 50.0]; // left, right, top, bottom

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn parse(text: &str) -> Result<Table, Failure> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| Failure::new(1, "empty CSV"))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(|s| s.trim().to_string()).collect()).collect();
        if rows.is_empty() {
            return Err(Failure::new(1, "CSV has no data rows"));
        }
        if let Some(k) = rows.iter().position(|r| r.len() != header.len()) {
            return Err(Failure::new(1, format!("row {} has {} fields, expected {}", k + 2, rows[k].len(), header.len())));
        }
        Ok(Table { header, rows })
    }

    fn column(&self, name: &str) -> Result<Vec<f64>, Failure> {
        let j = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Failure::new(1, format!("CSV lacks a `{name}` column")))?;
        self.numeric(j)
    }

    fn numeric(&self, j: usize) -> Result<Vec<f64>, Failure> {
        self.rows
            .iter()
            .map(|r| {
                r[j].parse::<f64>()
                    .map_err(|_| Failure::new(1, format!("non-numeric value {:?} in column `{}`", r[j], self.header[j])))
            })
            .collect()
    }
}

struct Series {
    name: String,
    pts: Vec<(f64, f64)>,
    markers: bool,
}

struct Figure {
    title: String,
    xlabel: String,
    ylabel: String,
    logx: bool,
    logy: bool,
    series: Vec<Series>,
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e-2 && v.abs() < 1e4 {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Figure {
    fn render(&self) -> Result<String, Failure> {
        let tx = |v: f64, log: bool| if log { v.log10() } else { v };
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for s in &self.series {
            for &(x, y) in &s.pts {
                for (a, (v, log)) in [(x, self.logx), (y, self.logy)].into_iter().enumerate() {
                    let t = tx(v, log);
                    if t.is_finite() {
                        lo[a] = lo[a].min(t);
                        hi[a] = hi[a].max(t);
                    }
                }
            }
        }
        if !lo[0].is_finite() || !lo[1].is_finite() {
            return Err(Failure::new(1, "nothing to plot"));
        }
        for a in 0..2 {
            if hi[a] - lo[a] < 1e-300 {
                lo[a] -= 0.5;
                hi[a] += 0.5;
            }
            let pad = 0.05 * (hi[a] - lo[a]);
            lo[a] -= pad;
            hi[a] += pad;
        }
        let [ml, mr, mt, mb] = MARGIN;
        let pw = W - ml - mr;
        let ph = H - mt - mb;
        let px = |t: f64| ml + (t - lo[0]) / (hi[0] - lo[0]) * pw;
        let py = |t: f64| mt + ph - (t - lo[1]) / (hi[1] - lo[1]) * ph;

        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(svg, r#"<text x="{:.1}" y="22" font-size="14" text-anchor="middle">{}</text>"#, ml + pw / 2.0, escape(&self.title));
        let _ = writeln!(svg, r#"<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let t = lo[0] + f * (hi[0] - lo[0]);
            let label = if self.logx { fmt_tick(10f64.powf(t)) } else { fmt_tick(t) };
            let x = px(t);
            let _ = writeln!(svg, r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#ccc"/>"##, mt, mt + ph);
            let _ = writeln!(svg, r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{label}</text>"#, mt + ph + 16.0);
            let t = lo[1] + f * (hi[1] - lo[1]);
            let label = if self.logy { fmt_tick(10f64.powf(t)) } else { fmt_tick(t) };
            let y = py(t);
            let _ = writeln!(svg, r##"<line x1="{ml}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ccc"/>"##, ml + pw);
            let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{label}</text>"#, ml - 6.0, y + 4.0);
        }
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, ml + pw / 2.0, H - 12.0, escape(&self.xlabel));
        let _ = writeln!(
            svg,
            r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            mt + ph / 2.0,
            mt + ph / 2.0,
            escape(&self.ylabel)
        );
        for (i, s) in self.series.iter().enumerate() {
            let c = COLORS[i % COLORS.len()];
            let pts: Vec<(f64, f64)> = s
                .pts
                .iter()
                .map(|&(x, y)| (tx(x, self.logx), tx(y, self.logy)))
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|(x, y)| (px(x), py(y)))
                .collect();
            if s.markers {
                for (x, y) in &pts {
                    let _ = writeln!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{c}"/>"#);
                }
            }
            if !s.markers || pts.len() < 12 {
                let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                let _ = writeln!(svg, r#"<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{}"/>"#, path.join(" "));
            }
            let ly = mt + 14.0 + 18.0 * i as f64;
            let lx = ml + pw + 12.0;
            let _ = writeln!(svg, r#"<line x1="{lx}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{c}" stroke-width="2"/>"#, ly - 4.0, lx + 20.0, ly - 4.0);
            let _ = writeln!(svg, r#"<text x="{:.1}" y="{ly:.1}">{}</text>"#, lx + 26.0, escape(&s.name));
        }
        svg.push_str("</svg>\n");
        Ok(svg)
    }
}

fn trajectory_figure(t: &Table) -> Result<Figure, Failure> {
    let time = t.column("time")?;
    let mut series = Vec::new();
    for (j, h) in t.header.iter().enumerate() {
        if h.starts_with('X') || h.starts_with('V') {
            let y = t.numeric(j)?;
            series.push(Series { name: h.clone(), pts: time.iter().cloned().zip(y).collect(), markers: false });
        }
    }
    if series.is_empty() {
        return Err(Failure::new(1, "no X*/V* columns to plot"));
    }
    Ok(Figure { title: "centre of mass and mean velocity".into(), xlabel: "t".into(), ylabel: "".into(), logx: false, logy: false, series })
}

fn slope_figure(t: &Table) -> Result<Figure, Failure> {
    let eps = t.column("epsilon")?;
    let mut series = Vec::new();
    for (j, h) in t.header.iter().enumerate() {
        if h == "epsilon" {
            continue;
        }
        let y = t.numeric(j)?;
        if y.iter().any(|v| !(*v > 0.0)) {
            continue;
        }
        let slope = loglog_slope(&eps, &y);
        series.push(Series { name: format!("{h} ({slope:.2})"), pts: eps.iter().cloned().zip(y).collect(), markers: true });
    }
    if series.is_empty() {
        return Err(Failure::new(1, "no positive columns to plot on log axes"));
    }
    Ok(Figure { title: "error against ε (fitted log-log slope)".into(), xlabel: "ε".into(), ylabel: "".into(), logx: true, logy: true, series })
}

fn frostman_figure(t: &Table) -> Result<Figure, Failure> {
    let r = t.column("r")?;
    let ex = t.column("excess")?;
    let kj = t.header.iter().position(|h| h == "kind").ok_or_else(|| Failure::new(1, "CSV lacks a `kind` column"))?;
    let mut series: Vec<Series> = Vec::new();
    for (k, row) in t.rows.iter().enumerate() {
        let name = &row[kj];
        let idx = match series.iter().position(|s| &s.name == name) {
            Some(i) => i,
            None => {
                series.push(Series { name: name.clone(), pts: vec![], markers: true });
                series.len() - 1
            }
        };
        series[idx].pts.push((r[k], ex[k]));
    }
    for s in &mut series {
        s.pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    Ok(Figure { title: "Φ - A0 against elliptic radius".into(), xlabel: "|x|_A".into(), ylabel: "Φ - A0".into(), logx: false, logy: false, series })
}

/// Renders `input` as SVG into `target`.
pub fn render_file(input: &Path, kind: PlotKind, target: &Path) -> Result<(), Failure> {
    let text = fs::read_to_string(input).map_err(|e| Failure::new(1, format!("{}: {e}", input.display())))?;
    let table = Table::parse(&text)?;
    let fig = match kind {
        PlotKind::Trajectory => trajectory_figure(&table)?,
        PlotKind::Slope => slope_figure(&table)?,
        PlotKind::Frostman => frostman_figure(&table)?,
    };
    fs::write(target, fig.render()?)?;
    Ok(())
}

pub fn plot(g: &Globals, input: &Path, kind: PlotKind) -> Result<(), Failure> {
    let target: PathBuf = match &g.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            dir.join(input.with_extension("svg").file_name().unwrap_or_default())
        }
        None => input.with_extension("svg"),
    };
    render_file(input, kind, &target)?;
    g.say(&format!("wrote {}", target.display()));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_and_empty_tables() {
        assert!(Table::parse("").is_err());
        assert!(Table::parse("a,b\n").is_err());
        assert!(Table::parse("a,b\n1,2\n3\n").is_err());
        assert_eq!(Table::parse("a,b\n1,2\n").unwrap().column("b").unwrap(), vec![2.0]);
    }

    #[test]
    fn rendering_is_deterministic() {
        let t = Table::parse("epsilon,err\n0.1,1e-2\n0.05,5e-3\n0.025,2.5e-3\n").unwrap();
        let a = slope_figure(&t).unwrap().render().unwrap();
        let b = slope_figure(&t).unwrap().render().unwrap();
        assert_eq!(a, b);
        assert!(a.contains("err (1.00)"));
    }
}
