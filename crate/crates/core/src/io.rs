//! Instance files (JSON) and datasets (JSON Lines).
//!
//! ```json
//! {"kind": "general", "outcomes": ["o1", "o2"], "values": [[1, 0], [0, 2]]}
//! {"kind": "slot", "alpha": [1, 0.5], "beta": [1, 1, 1], "bids": [10, 6, 4]}
//! ```
//!
//! Slot files may carry `types` (true per-click values); both kinds may
//! carry an `id` and the `seed` they were generated from. Errors point at
//! the offending field with a JSON pointer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::slots::SlotAuctionInstance;
use crate::valuation::{OutcomeSpace, ValuationMatrix};

#[derive(Debug, Clone, PartialEq)]
pub enum Instance {
    General {
        outcomes: OutcomeSpace,
        values: ValuationMatrix,
    },
    Slot(SlotAuctionInstance),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFile {
    pub id: Option<String>,
    pub seed: Option<u64>,
    pub instance: Instance,
}

impl InstanceFile {
    pub fn general(outcomes: OutcomeSpace, values: ValuationMatrix) -> Result<Self> {
        if outcomes.len() != values.outcomes() {
            return Err(Error::Dimension(format!(
                "{} outcome labels for {} value columns",
                outcomes.len(),
                values.outcomes()
            )));
        }
        Ok(Self {
            id: None,
            seed: None,
            instance: Instance::General { outcomes, values },
        })
    }

    pub fn slot(instance: SlotAuctionInstance) -> Self {
        Self {
            id: None,
            seed: None,
            instance: Instance::Slot(instance),
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    General,
    Slot,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    kind: Kind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    outcomes: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bids: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    types: Option<Vec<f64>>,
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    path.iter()
        .filter_map(|seg| match seg {
            Segment::Seq { index } => Some(format!("/{index}")),
            Segment::Map { key } => Some(format!("/{}", key.replace('~', "~0").replace('/', "~1"))),
            Segment::Enum { variant } => Some(format!("/{variant}")),
            Segment::Unknown => None,
        })
        .collect()
}

fn required<T>(field: Option<T>, name: &str, kind: &str) -> Result<T> {
    field.ok_or_else(|| {
        Error::instance(
            format!("/{name}"),
            format!("missing field for a {kind} instance"),
        )
    })
}

fn forbid<T>(field: &Option<T>, name: &str, kind: &str) -> Result<()> {
    match field {
        Some(_) => Err(Error::instance(
            format!("/{name}"),
            format!("not allowed in a {kind} instance"),
        )),
        None => Ok(()),
    }
}

fn check_entries(list: &[f64], name: &str, ok: impl Fn(f64) -> bool, what: &str) -> Result<()> {
    match list.iter().position(|&x| !ok(x)) {
        Some(k) => Err(Error::instance(
            format!("/{name}/{k}"),
            format!("{} must be {what}", list[k]),
        )),
        None => Ok(()),
    }
}

impl RawInstance {
    fn validate(self) -> Result<InstanceFile> {
        let instance = match self.kind {
            Kind::General => {
                for (field, name) in [
                    (&self.alpha, "alpha"),
                    (&self.beta, "beta"),
                    (&self.bids, "bids"),
                    (&self.types, "types"),
                ] {
                    forbid(field, name, "general")?;
                }
                let labels = required(self.outcomes, "outcomes", "general")?;
                let rows = required(self.values, "values", "general")?;
                let outcomes = OutcomeSpace::new(labels)
                    .map_err(|e| Error::instance("/outcomes", e.to_string()))?;
                if rows.is_empty() {
                    return Err(Error::instance("/values", Error::Empty.to_string()));
                }
                for (i, row) in rows.iter().enumerate() {
                    if row.len() != outcomes.len() {
                        return Err(Error::instance(
                            format!("/values/{i}"),
                            format!("{} values for {} outcomes", row.len(), outcomes.len()),
                        ));
                    }
                    check_entries(
                        row,
                        &format!("values/{i}"),
                        |v| v.is_finite() && v >= 0.0,
                        "finite and >= 0",
                    )?;
                }
                let values = ValuationMatrix::new(rows)
                    .map_err(|e| Error::instance("/values", e.to_string()))?;
                Instance::General { outcomes, values }
            }
            Kind::Slot => {
                forbid(&self.outcomes, "outcomes", "slot")?;
                forbid(&self.values, "values", "slot")?;
                let alpha = required(self.alpha, "alpha", "slot")?;
                let beta = required(self.beta, "beta", "slot")?;
                let bids = required(self.bids, "bids", "slot")?;
                if alpha.is_empty() {
                    return Err(Error::instance("/alpha", Error::Empty.to_string()));
                }
                if bids.is_empty() {
                    return Err(Error::instance("/bids", Error::Empty.to_string()));
                }
                check_entries(&alpha, "alpha", |a| a > 0.0 && a <= 1.0, "in (0, 1]")?;
                if alpha.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(Error::instance(
                        "/alpha",
                        Error::AlphaNotDescending.to_string(),
                    ));
                }
                check_entries(
                    &beta,
                    "beta",
                    |b| b.is_finite() && b > 0.0,
                    "finite and > 0",
                )?;
                check_entries(
                    &bids,
                    "bids",
                    |b| b.is_finite() && b >= 0.0,
                    "finite and >= 0",
                )?;
                if let Some(types) = &self.types {
                    check_entries(
                        types,
                        "types",
                        |t| t.is_finite() && t >= 0.0,
                        "finite and >= 0",
                    )?;
                }
                let inst =
                    SlotAuctionInstance::new(alpha, beta, bids, self.types).map_err(|e| {
                        let pointer = match e {
                            Error::Dimension(_) => "",
                            _ => "/bids",
                        };
                        Error::instance(pointer, e.to_string())
                    })?;
                Instance::Slot(inst)
            }
        };
        Ok(InstanceFile {
            id: self.id,
            seed: self.seed,
            instance,
        })
    }

    fn from_file(file: &InstanceFile) -> Self {
        let mut raw = RawInstance {
            id: file.id.clone(),
            seed: file.seed,
            kind: Kind::General,
            outcomes: None,
            values: None,
            alpha: None,
            beta: None,
            bids: None,
            types: None,
        };
        match &file.instance {
            Instance::General { outcomes, values } => {
                raw.outcomes = Some(outcomes.labels().to_vec());
                raw.values = Some(values.rows().to_vec());
            }
            Instance::Slot(inst) => {
                raw.kind = Kind::Slot;
                raw.alpha = Some(inst.slot_effects().to_vec());
                raw.beta = Some(inst.ad_effects().to_vec());
                raw.bids = Some(inst.bids().to_vec());
                raw.types = inst.types().map(<[f64]>::to_vec);
            }
        }
        raw
    }
}

/// Parses and validates one instance.
pub fn parse_instance(text: &str) -> Result<InstanceFile> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawInstance = serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = pointer_of(e.path());
        Error::instance(pointer, e.into_inner().to_string())
    })?;
    raw.validate()
}

/// Single-line JSON. Floats use the shortest representation that parses
/// back to the same value.
pub fn instance_to_json(file: &InstanceFile) -> String {
    serde_json::to_string(&RawInstance::from_file(file)).expect("instance fields serialize")
}

/// One instance per non-blank line.
pub fn parse_dataset(text: &str) -> Result<Vec<InstanceFile>> {
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(k, line)| {
            parse_instance(line).map_err(|e| Error::Line {
                line: k + 1,
                source: Box::new(e),
            })
        })
        .collect()
}

pub fn dataset_to_jsonl(files: &[InstanceFile]) -> String {
    files.iter().map(|f| instance_to_json(f) + "\n").collect()
}

/// Parses a mechanism or preference exponent: a number `>= 1` or `inf`.
pub fn parse_alpha(text: &str) -> Result<f64> {
    let alpha = match text.trim() {
        "inf" | "infinity" | "Infinity" => f64::INFINITY,
        other => other.parse::<f64>().map_err(|_| {
            Error::InvalidParameter(format!("alpha {other:?} is not a number or inf"))
        })?,
    };
    if alpha >= 1.0 {
        Ok(alpha)
    } else {
        Err(Error::InvalidParameter(format!(
            "alpha must lie in [1, inf], got {text}"
        )))
    }
}
