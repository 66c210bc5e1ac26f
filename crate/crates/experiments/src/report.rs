//! Experiment results: per-repetition rows, summaries, CSV and SVG output.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

pub const CSV_HEADER: &str = "experiment,point,model,repetition,metric,value";
pub const SUMMARY_HEADER: &str = "experiment,point,model,metric,n,mean,sd,median";
pub const PARAMS_HEADER: &str = "experiment,point,model,convention,count";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report {0:?} has no rows")]
    Empty(String),
    #[error("field {0:?} may not contain commas or newlines")]
    BadField(String),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub point: String,
    pub model: String,
    pub repetition: usize,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamCount {
    pub point: String,
    pub model: String,
    pub convention: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub point: String,
    pub model: String,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator; 0 for a single value).
    pub sd: f64,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub experiment: String,
    pub rows: Vec<Row>,
    pub params: Vec<ParamCount>,
}

fn check_field(s: &str) -> Result<(), ReportError> {
    if s.contains([',', '\n', '\r']) || s.starts_with('#') {
        Err(ReportError::BadField(s.to_string()))
    } else {
        Ok(())
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

impl ExperimentReport {
    pub fn new(experiment: &str) -> Self {
        Self {
            experiment: experiment.to_string(),
            rows: Vec::new(),
            params: Vec::new(),
        }
    }

    pub fn push(&mut self, point: &str, model: &str, repetition: usize, metric: &str, value: f64) -> Result<(), ReportError> {
        for f in [point, model, metric] {
            check_field(f)?;
        }
        self.rows.push(Row {
            point: point.to_string(),
            model: model.to_string(),
            repetition,
            metric: metric.to_string(),
            value,
        });
        Ok(())
    }

    pub fn push_params(&mut self, point: &str, model: &str, convention: &str, count: usize) -> Result<(), ReportError> {
        for f in [point, model, convention] {
            check_field(f)?;
        }
        self.params.push(ParamCount {
            point: point.to_string(),
            model: model.to_string(),
            convention: convention.to_string(),
            count,
        });
        Ok(())
    }

    /// Distinct values of a row field in order of first appearance.
    fn distinct(&self, field: impl Fn(&Row) -> &str) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            let v = field(r);
            if !out.iter().any(|o| o == v) {
                out.push(v.to_string());
            }
        }
        out
    }

    pub fn points(&self) -> Vec<String> {
        self.distinct(|r| &r.point)
    }

    pub fn models(&self) -> Vec<String> {
        self.distinct(|r| &r.model)
    }

    pub fn metrics(&self) -> Vec<String> {
        self.distinct(|r| &r.metric)
    }

    pub fn values(&self, point: &str, model: &str, metric: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.point == point && r.model == model && r.metric == metric)
            .map(|r| r.value)
            .collect()
    }

    pub fn median_of(&self, point: &str, model: &str, metric: &str) -> Option<f64> {
        let v = self.values(point, model, metric);
        (!v.is_empty()).then(|| median(&v))
    }

    pub fn summary(&self) -> Vec<Summary> {
        let mut out = Vec::new();
        for point in self.points() {
            for model in self.models() {
                for metric in self.metrics() {
                    let v = self.values(&point, &model, &metric);
                    if v.is_empty() {
                        continue;
                    }
                    out.push(Summary {
                        point: point.clone(),
                        model: model.clone(),
                        metric: metric.clone(),
                        n: v.len(),
                        mean: mean(&v),
                        sd: sample_sd(&v),
                        median: median(&v),
                    });
                }
            }
        }
        out
    }

    pub fn to_csv(&self) -> Result<String, ReportError> {
        if self.rows.is_empty() {
            return Err(ReportError::Empty(self.experiment.clone()));
        }
        let e = &self.experiment;
        let mut s = format!("{CSV_HEADER}\n");
        for r in &self.rows {
            let _ = writeln!(s, "{e},{},{},{},{},{}", r.point, r.model, r.repetition, r.metric, r.value);
        }
        let _ = writeln!(s, "# summary\n{SUMMARY_HEADER}");
        for m in self.summary() {
            let _ = writeln!(
                s,
                "{e},{},{},{},{},{},{},{}",
                m.point, m.model, m.metric, m.n, m.mean, m.sd, m.median
            );
        }
        if !self.params.is_empty() {
            let _ = writeln!(s, "# params\n{PARAMS_HEADER}");
            for p in &self.params {
                let _ = writeln!(s, "{e},{},{},{},{}", p.point, p.model, p.convention, p.count);
            }
        }
        Ok(s)
    }

    /// Parses the output of [`Self::to_csv`]. Summary lines are recomputed
    /// on output, so they are checked for shape but not stored.
    pub fn from_csv(text: &str) -> Result<Self, ReportError> {
        #[derive(PartialEq)]
        enum Section {
            Rows,
            Summary,
            Params,
        }
        let err = |line: usize, reason: &str| ReportError::Parse {
            line: line + 1,
            reason: reason.to_string(),
        };
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h == CSV_HEADER => {}
            _ => return Err(err(0, "missing row header")),
        }
        let mut report = ExperimentReport::new("");
        let mut section = Section::Rows;
        for (i, line) in lines {
            match line {
                "# summary" => {
                    section = Section::Summary;
                    continue;
                }
                "# params" => {
                    section = Section::Params;
                    continue;
                }
                SUMMARY_HEADER | PARAMS_HEADER => continue,
                "" => continue,
                _ => {}
            }
            let f: Vec<&str> = line.split(',').collect();
            if report.experiment.is_empty() {
                report.experiment = f[0].to_string();
            } else if f[0] != report.experiment {
                return Err(err(i, "mixed experiment names"));
            }
            match section {
                Section::Rows => {
                    if f.len() != 6 {
                        return Err(err(i, "expected 6 fields"));
                    }
                    let rep = f[3].parse().map_err(|_| err(i, "bad repetition"))?;
                    let value = f[5].parse().map_err(|_| err(i, "bad value"))?;
                    report.push(f[1], f[2], rep, f[4], value)?;
                }
                Section::Summary => {
                    if f.len() != 8 {
                        return Err(err(i, "expected 8 summary fields"));
                    }
                }
                Section::Params => {
                    if f.len() != 5 {
                        return Err(err(i, "expected 5 params fields"));
                    }
                    let count = f[4].parse().map_err(|_| err(i, "bad count"))?;
                    report.push_params(f[1], f[2], f[3], count)?;
                }
            }
        }
        if report.rows.is_empty() {
            return Err(ReportError::Empty(report.experiment));
        }
        Ok(report)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), ReportError> {
        let text = self.to_csv()?;
        std::fs::write(path, text).map_err(|source| ReportError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn write_svg(&self, path: &Path) -> Result<(), ReportError> {
        let text = self.to_svg()?;
        std::fs::write(path, text).map_err(|source| ReportError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Line chart of per-point means with ± SD whiskers, one series per
    /// model (and per metric when there are several).
    pub fn to_svg(&self) -> Result<String, ReportError> {
        if self.rows.is_empty() {
            return Err(ReportError::Empty(self.experiment.clone()));
        }
        const W: f64 = 720.0;
        const H: f64 = 420.0;
        const LEFT: f64 = 80.0;
        const RIGHT: f64 = 170.0;
        const TOP: f64 = 40.0;
        const BOTTOM: f64 = 60.0;
        const COLORS: [&str; 8] = [
            "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
        ];

        let points = self.points();
        let metrics = self.metrics();
        let summary = self.summary();
        let mut series: Vec<(String, String)> = Vec::new();
        for s in &summary {
            let key = (s.model.clone(), s.metric.clone());
            if !series.contains(&key) {
                series.push(key);
            }
        }
        let (lo, hi) = summary
            .iter()
            .filter(|s| s.mean.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                (lo.min(s.mean - s.sd), hi.max(s.mean + s.sd))
            });
        let (lo, hi) = if lo.is_finite() && hi > lo {
            (lo, hi)
        } else if lo.is_finite() {
            (lo - 0.5, lo + 0.5)
        } else {
            (0.0, 1.0)
        };
        let pad = (hi - lo) * 0.05;
        let (lo, hi) = (lo - pad, hi + pad);
        let plot_w = W - LEFT - RIGHT;
        let plot_h = H - TOP - BOTTOM;
        let x_of = |i: usize| {
            if points.len() == 1 {
                LEFT + plot_w / 2.0
            } else {
                LEFT + plot_w * i as f64 / (points.len() - 1) as f64
            }
        };
        let y_of = |v: f64| TOP + plot_h * (hi - v) / (hi - lo);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            LEFT + plot_w / 2.0,
            escape(&self.experiment)
        );
        let _ = writeln!(
            s,
            r#"<path d="M{LEFT} {TOP} V{} H{}" fill="none" stroke="black"/>"#,
            TOP + plot_h,
            LEFT + plot_w
        );
        for t in 0..=4 {
            let v = lo + (hi - lo) * t as f64 / 4.0;
            let y = y_of(v);
            let _ = writeln!(
                s,
                r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
                LEFT - 5.0,
                LEFT - 8.0,
                y + 4.0,
                fmt_tick(v)
            );
        }
        for (i, p) in points.iter().enumerate() {
            let x = x_of(i);
            let label = p.split_once('=').map_or(p.as_str(), |(_, v)| v);
            let _ = writeln!(
                s,
                r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/><text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#,
                TOP + plot_h,
                TOP + plot_h + 5.0,
                TOP + plot_h + 20.0,
                escape(label)
            );
        }
        let x_name = points[0].split_once('=').map_or("point", |(k, _)| k);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + plot_w / 2.0,
            H - 15.0,
            escape(x_name)
        );
        let y_name = if metrics.len() == 1 { metrics[0].as_str() } else { "value" };
        let _ = writeln!(
            s,
            r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>"#,
            TOP + plot_h / 2.0,
            TOP + plot_h / 2.0,
            escape(y_name)
        );

        for (k, (model, metric)) in series.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            let mut path = String::new();
            for (i, p) in points.iter().enumerate() {
                let Some(m) = summary
                    .iter()
                    .find(|m| &m.point == p && &m.model == model && &m.metric == metric)
                else {
                    continue;
                };
                if !m.mean.is_finite() {
                    continue;
                }
                let (x, y) = (x_of(i), y_of(m.mean));
                let _ = write!(path, "{}{x:.2} {y:.2} ", if path.is_empty() { "M" } else { "L" });
                let (y1, y2) = (y_of(m.mean - m.sd), y_of(m.mean + m.sd));
                let _ = writeln!(
                    s,
                    r#"<path d="M{x:.2} {y1:.2} V{y2:.2} M{:.2} {y1:.2} H{:.2} M{:.2} {y2:.2} H{:.2}" stroke="{color}" fill="none"/>"#,
                    x - 4.0,
                    x + 4.0,
                    x - 4.0,
                    x + 4.0
                );
                let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#);
            }
            let _ = writeln!(
                s,
                r#"<path d="{}" stroke="{color}" stroke-width="2" fill="none"/>"#,
                path.trim_end()
            );
            let name = if metrics.len() == 1 {
                model.clone()
            } else {
                format!("{model} {metric}")
            };
            let ly = TOP + 10.0 + 20.0 * k as f64;
            let lx = LEFT + plot_w + 15.0;
            let _ = writeln!(
                s,
                r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
                lx + 20.0,
                lx + 25.0,
                ly + 4.0,
                escape(&name)
            );
        }
        s.push_str("</svg>\n");
        Ok(s)
    }
}

fn fmt_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentReport {
        let mut r = ExperimentReport::new("demo");
        for (p, k) in [("depth=2", 1.0), ("depth=3", 0.5)] {
            for rep in 0..3 {
                r.push(p, "hyper", rep, "test_mse", k * (1.0 + rep as f64 * 0.1)).unwrap();
                r.push(p, "embed", rep, "test_mse", k * 2.0 + 1e-17 * rep as f64).unwrap();
            }
        }
        r.push_params("depth=2", "hyper", "weights-only", 1010).unwrap();
        r
    }

    #[test]
    fn statistics() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(sample_sd(&[5.0]), 0.0);
        assert!((sample_sd(&[1.0, 2.0, 3.0, 4.0]) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn summary_has_one_row_per_point_and_model() {
        let r = sample();
        let s = r.summary();
        assert_eq!(s.len(), 4);
        assert!(s.iter().all(|m| m.n == 3));
        assert_eq!(r.median_of("depth=3", "hyper", "test_mse"), Some(0.55));
    }

    #[test]
    fn csv_round_trip() {
        let r = sample();
        let csv = r.to_csv().unwrap();
        assert!(csv.starts_with(CSV_HEADER));
        let back = ExperimentReport::from_csv(&csv).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_csv().unwrap(), csv);
    }

    #[test]
    fn empty_and_bad_reports() {
        let r = ExperimentReport::new("none");
        assert!(matches!(r.to_csv(), Err(ReportError::Empty(_))));
        assert!(r.to_svg().is_err());
        let mut r = ExperimentReport::new("x");
        assert!(r.push("a,b", "m", 0, "v", 1.0).is_err());
        assert!(ExperimentReport::from_csv("nope\n").is_err());
    }

    #[test]
    fn svg_mentions_every_series() {
        let svg = sample().to_svg().unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains(">hyper<") && svg.contains(">embed<") && svg.contains(">depth<"));
    }

    #[test]
    fn unwritable_path_is_an_error() {
        let r = sample();
        assert!(r.write_csv(Path::new("/nonexistent-dir/x.csv")).is_err());
    }
}
