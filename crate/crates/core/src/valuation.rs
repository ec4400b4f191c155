//! Outcome spaces and bidder valuation matrices.

use crate::error::{Error, Result};

/// Ordered, non-empty list of outcome labels. An outcome's index is its
/// position in the list.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeSpace {
    labels: Vec<String>,
}

impl OutcomeSpace {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Empty);
        }
        Ok(Self { labels })
    }

    /// `o1, o2, ..., ok`
    pub fn numbered(count: usize) -> Result<Self> {
        Self::new((1..=count).map(|i| format!("o{i}")).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, outcome: usize) -> Option<&str> {
        self.labels.get(outcome).map(String::as_str)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Nonnegative value `v[i][o]` of bidder `i` for outcome `o`.
///
/// The same type holds reported bids when a mechanism is run on reports.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuationMatrix {
    rows: Vec<Vec<f64>>,
    outcomes: usize,
}

impl ValuationMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let outcomes = rows.first().map(Vec::len).ok_or(Error::Empty)?;
        if outcomes == 0 {
            return Err(Error::Empty);
        }
        for (bidder, row) in rows.iter().enumerate() {
            if row.len() != outcomes {
                return Err(Error::Dimension(format!(
                    "bidder {bidder} has {} values, expected {outcomes}",
                    row.len()
                )));
            }
            for (outcome, &value) in row.iter().enumerate() {
                if !value.is_finite() || value < 0.0 {
                    return Err(Error::InvalidValue {
                        bidder,
                        outcome,
                        value,
                    });
                }
            }
        }
        Ok(Self { rows, outcomes })
    }

    pub fn bidders(&self) -> usize {
        self.rows.len()
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    pub fn value(&self, bidder: usize, outcome: usize) -> f64 {
        self.rows[bidder][outcome]
    }

    pub fn row(&self, bidder: usize) -> &[f64] {
        &self.rows[bidder]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<Vec<f64>> {
        self.rows
    }

    /// Largest entry of the matrix.
    pub fn max_value(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| r.iter().copied())
            .fold(0.0, f64::max)
    }

    /// Copy of the matrix with one bidder's row replaced.
    pub fn with_row(&self, bidder: usize, row: Vec<f64>) -> Result<Self> {
        let mut rows = self.rows.clone();
        rows[bidder] = row;
        Self::new(rows)
    }

    pub(crate) fn row_refs(&self) -> Vec<&[f64]> {
        self.rows.iter().map(Vec::as_slice).collect()
    }
}
