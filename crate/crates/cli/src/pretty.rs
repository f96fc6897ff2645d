//! Two-column `path  value` rendering of a JSON report.

use serde_json::Value;

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() => format!("{x:.10e}"),
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}

fn walk(path: &str, v: &Value, rows: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) if !map.is_empty() => {
            for (k, child) in map {
                let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                walk(&p, child, rows);
            }
        }
        Value::Array(items) if !items.is_empty() => {
            for (i, child) in items.iter().enumerate() {
                walk(&format!("{path}[{i}]"), child, rows);
            }
        }
        _ => rows.push((path.to_string(), scalar(v))),
    }
}

pub fn render(report: &Value) -> String {
    let mut rows = Vec::new();
    walk("", report, &mut rows);
    let width = rows.iter().map(|(p, _)| p.len()).max().unwrap_or(0);
    rows.iter().map(|(p, v)| format!("{p:<width$}  {v}\n")).collect()
}
