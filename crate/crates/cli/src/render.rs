//! Plain-text rendering of JSON reports.

use serde_json::Value;

/// `x` rounded to 6 significant digits, trailing zeros dropped.
pub fn sig6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-5..6).contains(&exp) {
        trim_zeros(format!("{:.*}", (5 - exp) as usize, x))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn scalar(v: &Value) -> Option<String> {
    Some(match v {
        Value::Null => "-".into(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => i.to_string(),
            (_, Some(u)) => u.to_string(),
            _ => sig6(n.as_f64().unwrap_or(f64::NAN)),
        },
        Value::String(s) => s.clone(),
        _ => return None,
    })
}

fn inline_list(items: &[Value]) -> Option<String> {
    let parts: Option<Vec<String>> = items.iter().map(scalar).collect();
    parts.map(|p| format!("[{}]", p.join(", ")))
}

fn is_matrix(items: &[Value]) -> bool {
    !items.is_empty() && items.iter().all(|r| matches!(r, Value::Array(row) if inline_list(row).is_some()))
}

fn write_value(out: &mut String, key: &str, v: &Value, indent: usize) {
    let pad = " ".repeat(indent);
    match v {
        Value::Object(map) => {
            out.push_str(&format!("{pad}{key}:\n"));
            write_object(out, map, indent + 2);
        }
        Value::Array(items) => {
            if let Some(line) = inline_list(items) {
                out.push_str(&format!("{pad}{key}: {line}\n"));
            } else if is_matrix(items) {
                out.push_str(&format!("{pad}{key}:\n"));
                let cells: Vec<Vec<String>> = items
                    .iter()
                    .map(|r| r.as_array().unwrap().iter().map(|c| scalar(c).unwrap()).collect())
                    .collect();
                let width = cells.iter().flatten().map(String::len).max().unwrap_or(0);
                for row in cells {
                    let row: Vec<String> = row.iter().map(|c| format!("{c:>width$}")).collect();
                    out.push_str(&format!("{pad}  {}\n", row.join("  ")));
                }
            } else {
                out.push_str(&format!("{pad}{key}:\n"));
                for item in items {
                    match item {
                        // "- " marks the first line of each object.
                        Value::Object(map) if !map.is_empty() => {
                            let mut body = String::new();
                            write_object(&mut body, map, indent + 4);
                            body.replace_range(indent + 2..indent + 4, "- ");
                            out.push_str(&body);
                        }
                        other => write_value(out, "-", other, indent + 2),
                    }
                }
            }
        }
        other => out.push_str(&format!("{pad}{key}: {}\n", scalar(other).unwrap())),
    }
}

fn write_object(out: &mut String, map: &serde_json::Map<String, Value>, indent: usize) {
    for (k, v) in map {
        write_value(out, k, v, indent);
    }
}

/// Multi-line `key: value` rendering; matrices become aligned rows.
pub fn text(report: &Value) -> String {
    let mut out = String::new();
    match report {
        Value::Object(map) => write_object(&mut out, map, 0),
        other => write_value(&mut out, "value", other, 0),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.31134567), "0.311346");
        assert_eq!(sig6(1.0), "1");
        assert_eq!(sig6(-2.5), "-2.5");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(999999.7), "1e6");
        assert_eq!(sig6(1.23456789e-7), "1.23457e-7");
        assert_eq!(sig6(0.0001234567), "0.000123457");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(f64::NAN), "nan");
    }

    #[test]
    fn renders_matrices_as_rows() {
        let r = json!({"m": [[1.0, 0.5], [0.5, 1.0]], "ok": true, "n": 2});
        assert_eq!(text(&r), "m:\n    1  0.5\n  0.5    1\nn: 2\nok: true\n");
    }

    #[test]
    fn renders_object_lists_as_items() {
        let r = json!({"checks": [{"a": 1, "b": "x"}, {"a": 2, "b": null}]});
        assert_eq!(text(&r), "checks:\n  - a: 1\n    b: x\n  - a: 2\n    b: -\n");
    }
}
