use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{Number, Value};
use vm_auctions::general::AuctionResult;
use vm_auctions::robustness::RobustnessReport;
use vm_auctions::verification::DeviationReport;

use crate::config::RunConfig;
use crate::CliError;

/// Prints the resolved config as one JSON line on stderr.
pub fn echo(config: &RunConfig) {
    eprintln!(
        "{}",
        serde_json::to_string(config).expect("config serializes")
    );
}

/// Writes `text` to `path`, or to stdout without one.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|()| out.flush())
                .map_err(|e| CliError::Input(format!("stdout: {e}")))
        }
    }
}

/// Rewrites integral floats as integers, so `1.0` prints as `1`.
pub fn tidy(value: Value) -> Value {
    match value {
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() && x.fract() == 0.0 && x.abs() < 1e15 => {
                Value::Number(Number::from(x as i64))
            }
            _ => Value::Number(n),
        },
        Value::Array(items) => Value::Array(items.into_iter().map(tidy).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, tidy(v))).collect()),
        other => other,
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    tidy(serde_json::to_value(value).expect("plain data serializes")).to_string()
}

pub fn general_result(result: &AuctionResult, label: &str, trace: bool) -> String {
    let mut json = serde_json::json!({
        "outcome": label,
        "payments": result.payments,
    });
    if trace {
        if let Some(t) = &result.trace {
            json["trace"] = serde_json::to_value(t).expect("trace serializes");
        }
    }
    tidy(json).to_string()
}

fn join(bid: &[f64]) -> String {
    bid.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

fn csv_text<F>(write: F) -> Result<String, CliError>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>,
{
    let mut writer = csv::Writer::from_writer(Vec::new());
    write(&mut writer).map_err(|e| CliError::Invariant(e.to_string()))?;
    let bytes = writer
        .into_inner()
        .map_err(|e| CliError::Invariant(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Invariant(e.to_string()))
}

pub fn deviation_csv(reports: &[DeviationReport]) -> Result<String, CliError> {
    csv_text(|w| {
        w.write_record([
            "bidder",
            "truthful_bid",
            "truthful_value",
            "truthful_payment",
            "best_bid",
            "best_value",
            "best_payment",
            "profitable",
            "evaluated",
            "tie_excluded",
            "failed",
        ])?;
        for r in reports {
            w.write_record([
                r.bidder.to_string(),
                join(&r.truthful_bid),
                r.truthful_bundle.value.to_string(),
                r.truthful_bundle.payment.to_string(),
                join(&r.best_bid),
                r.best_bundle.value.to_string(),
                r.best_bundle.payment.to_string(),
                r.profitable.to_string(),
                r.evaluated.to_string(),
                r.tie_excluded.to_string(),
                r.failed.to_string(),
            ])?;
        }
        Ok(())
    })
}

pub fn curve_csv(report: &RobustnessReport) -> Result<String, CliError> {
    csv_text(|w| {
        w.write_record(["gamma", "fraction", "excluded_count"])?;
        for p in &report.curve {
            w.write_record([
                p.gamma.to_string(),
                p.fraction.to_string(),
                p.excluded_count.to_string(),
            ])?;
        }
        Ok(())
    })
}

/// `id,gamma_star` sorted by id; excluded auctions have an empty gamma_star.
pub fn per_auction_csv(ids: &[String], report: &RobustnessReport) -> Result<String, CliError> {
    let mut rows: Vec<(&String, Option<f64>)> = ids
        .iter()
        .zip(report.per_auction_gamma_star.iter().copied())
        .collect();
    rows.sort_by(|a, b| a.0.cmp(b.0));
    csv_text(|w| {
        w.write_record(["id", "gamma_star"])?;
        for (id, star) in rows {
            w.write_record([id.clone(), star.map_or_else(String::new, |g| g.to_string())])?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integral_floats_print_as_integers() {
        let v = serde_json::json!({"a": [0.0, 1.0, 1.5], "b": -2.0});
        assert_eq!(tidy(v).to_string(), r#"{"a":[0,1,1.5],"b":-2}"#);
    }

    #[test]
    fn bids_join_with_semicolons() {
        assert_eq!(join(&[1.0, 0.25]), "1;0.25");
    }
}
