use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::{io_err, malformed};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    LayerwiseGrid,
    NullDetection,
    CrossDomain,
    InDomain,
    OodCorrelation,
    ScoreCorrelation,
    Diagnose,
    Simnet,
}

impl ReportKind {
    pub fn name(self) -> &'static str {
        match self {
            ReportKind::LayerwiseGrid => "layerwise_grid",
            ReportKind::NullDetection => "null_detection",
            ReportKind::CrossDomain => "cross_domain",
            ReportKind::InDomain => "in_domain",
            ReportKind::OodCorrelation => "ood_correlation",
            ReportKind::ScoreCorrelation => "score_correlation",
            ReportKind::Diagnose => "diagnose",
            ReportKind::Simnet => "simnet",
        }
    }
}

/// Structured experiment output: parameters plus a kind-specific payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: ReportKind,
    pub params: Map<String, Value>,
    pub results: Value,
}

impl ExperimentReport {
    pub fn new(kind: ReportKind, params: Map<String, Value>, results: Value) -> Self {
        Self { kind, params, results }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            _ => Err(Error::InvalidParameter(format!("unknown report format {s:?}"))),
        }
    }
}

/// 17 significant digits, enough to round-trip any f64.
fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

struct FixedFloats;

impl serde_json::ser::Formatter for FixedFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> std::io::Result<()> {
        w.write_all(fmt_float(v).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> std::io::Result<()> {
        self.write_f64(w, f64::from(v))
    }
}

/// Compact JSON with sorted keys and fixed-width floats.
pub fn to_json_string(report: &ExperimentReport) -> String {
    // Value maps are ordered, so going through Value sorts every key.
    value_to_json_string(&serde_json::to_value(report).expect("report serializes"))
}

/// [`to_json_string`] for an arbitrary value.
pub fn value_to_json_string(value: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloats);
    value.serialize(&mut ser).expect("in-memory write");
    buf.push(b'\n');
    String::from_utf8(buf).expect("json is utf-8")
}

fn csv_field(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => match n.as_f64() {
            Some(f) if !(n.is_i64() || n.is_u64()) => fmt_float(f),
            _ => n.to_string(),
        },
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => m.iter().for_each(|(k, x)| flatten(&join(k), x, out)),
        Value::Array(a) => a.iter().enumerate().for_each(|(i, x)| flatten(&join(&i.to_string()), x, out)),
        _ => out.push((prefix.to_string(), csv_field(v))),
    }
}

/// CSV rendering. Layerwise grids become a matrix with layer-name labels;
/// every other kind is flattened to `key,value` rows with dotted paths.
pub fn to_csv_string(report: &ExperimentReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::InvalidParameter(e.to_string());
    let grid = report.results.get("grid").and_then(Value::as_array);
    if let (ReportKind::LayerwiseGrid, Some(grid)) = (report.kind, grid) {
        let names = |k: &str| -> Vec<String> {
            report.results.get(k).and_then(Value::as_array).map(|a| a.iter().map(csv_field).collect()).unwrap_or_default()
        };
        let (la, lb) = (names("layers_a"), names("layers_b"));
        let mut header = vec!["layer".to_string()];
        header.extend(lb);
        w.write_record(&header).map_err(csv_err)?;
        for (i, row) in grid.iter().enumerate() {
            let mut rec = vec![la.get(i).cloned().unwrap_or_else(|| i.to_string())];
            rec.extend(row.as_array().into_iter().flatten().map(csv_field));
            w.write_record(&rec).map_err(csv_err)?;
        }
    } else {
        let mut rows = vec![("kind".to_string(), report.kind.name().to_string())];
        flatten("params", &Value::Object(report.params.clone()), &mut rows);
        flatten("results", &report.results, &mut rows);
        w.write_record(["key", "value"]).map_err(csv_err)?;
        for (k, v) in rows {
            w.write_record([k, v]).map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

/// The report as text in `format`.
pub fn render_report(report: &ExperimentReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => Ok(to_json_string(report)),
        ReportFormat::Csv => to_csv_string(report),
    }
}

pub fn write_report(report: &ExperimentReport, path: &Path, format: ReportFormat) -> Result<()> {
    let text = render_report(report, format)?;
    std::fs::write(path, text).map_err(io_err(path))
}

/// Reads back a JSON report.
pub fn load_report(path: &Path) -> Result<ExperimentReport> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| malformed(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn grid_report() -> ExperimentReport {
        let params = json!({"metric": "cka", "seed": 3, "sigma": 0.1}).as_object().unwrap().clone();
        let results = json!({
            "layers_a": ["l1", "l2"],
            "layers_b": ["l1", "l2", "l3"],
            "grid": [[1.0, 0.1 + 0.2, null], [1.0 / 3.0, 1e-300, -0.5]],
        });
        ExperimentReport::new(ReportKind::LayerwiseGrid, params, results)
    }

    #[test]
    fn json_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        let r = grid_report();
        write_report(&r, &path, ReportFormat::Json).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"grid\""));
        assert!(text.contains("3.0000000000000004e-1"));
        assert!(text.find("\"kind\"").unwrap() < text.find("\"params\"").unwrap());
        assert_eq!(load_report(&path).unwrap(), r);
        assert_eq!(to_json_string(&r), text);
    }

    #[test]
    fn grid_csv_layout() {
        let csv = to_csv_string(&grid_report()).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "layer,l1,l2,l3");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("l1,1.0000000000000000e0,3.0000000000000004e-1,"));
        assert!(lines[1].ends_with(','));
    }

    #[test]
    fn generic_csv_flattening() {
        let r = ExperimentReport::new(ReportKind::ScoreCorrelation, Map::new(), json!({"rho": 0.5, "keys": ["a", "b"]}));
        let csv = to_csv_string(&r).unwrap();
        assert_eq!(csv, "key,value\nkind,score_correlation\nresults.keys.0,a\nresults.keys.1,b\nresults.rho,5.0000000000000000e-1\n");
    }

    #[test]
    fn unwritable_path() {
        let err = write_report(&grid_report(), Path::new("/nonexistent/dir/r.json"), ReportFormat::Json).unwrap_err();
        assert!(err.is_io());
    }
}
