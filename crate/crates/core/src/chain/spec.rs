//! JSON chain documents.
//!
//! ```json
//! {"states":["1","2"],
//!  "rates":[{"from":"1","to":"2","rate":1.0},{"from":"2","to":"1","rate":1.0}],
//!  "absorption":[{"from":"1","rate":1.0}]}
//! ```
//!
//! Unknown fields are rejected and absent rates are zero.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{RateMatrix, StateSpace};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub states: Vec<String>,
    #[serde(default)]
    pub rates: Vec<RateEntry>,
    #[serde(default)]
    pub absorption: Vec<AbsorptionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateEntry {
    pub from: String,
    pub to: String,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsorptionEntry {
    pub from: String,
    pub rate: f64,
}

impl ChainSpec {
    pub fn to_rates<T: Scalar>(&self) -> Result<RateMatrix<T>> {
        let space = Arc::new(
            StateSpace::new(self.states.iter().cloned())
                .map_err(|e| Error::Spec(format!("states: {e}")))?,
        );
        let lookup = |label: &str, field: String| {
            space
                .index_of(label)
                .ok_or_else(|| Error::Spec(format!("{field}: unknown state {label:?}")))
        };
        let convert = |v: f64, field: String| -> Result<T> {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Spec(format!(
                    "{field}: rate {v} must be finite and >= 0"
                )));
            }
            T::from_f64(v)
                .ok_or_else(|| Error::Spec(format!("{field}: rate {v} not representable")))
        };
        let mut offdiag = Vec::with_capacity(self.rates.len());
        for (k, e) in self.rates.iter().enumerate() {
            let x = lookup(&e.from, format!("rates[{k}].from"))?;
            let y = lookup(&e.to, format!("rates[{k}].to"))?;
            if x == y {
                return Err(Error::Spec(format!("rates[{k}]: self-loop {:?}", e.from)));
            }
            if offdiag.iter().any(|&(a, b, _)| (a, b) == (x, y)) {
                return Err(Error::Spec(format!(
                    "rates[{k}]: duplicate entry {:?} -> {:?}",
                    e.from, e.to
                )));
            }
            offdiag.push((x, y, convert(e.rate, format!("rates[{k}].rate"))?));
        }
        let mut absorb = vec![T::zero(); space.len()];
        let mut seen = vec![false; space.len()];
        for (k, e) in self.absorption.iter().enumerate() {
            let x = lookup(&e.from, format!("absorption[{k}].from"))?;
            if std::mem::replace(&mut seen[x], true) {
                return Err(Error::Spec(format!(
                    "absorption[{k}]: duplicate state {:?}",
                    e.from
                )));
            }
            absorb[x] = convert(e.rate, format!("absorption[{k}].rate"))?;
        }
        RateMatrix::new(space, offdiag, absorb).map_err(|e| Error::Spec(e.to_string()))
    }
}

/// Parses a chain document.
pub fn load_spec<T: Scalar>(document: &str) -> Result<RateMatrix<T>> {
    let spec: ChainSpec = serde_json::from_str(document).map_err(|e| Error::Spec(e.to_string()))?;
    spec.to_rates()
}

/// The document describing `rates` (zero entries omitted).
pub fn to_spec<T: Scalar>(rates: &RateMatrix<T>) -> ChainSpec {
    let space = rates.space();
    ChainSpec {
        states: space.labels().to_vec(),
        rates: rates
            .offdiag_entries()
            .map(|(x, y, r)| RateEntry {
                from: space.label(x).to_string(),
                to: space.label(y).to_string(),
                rate: r.approx(),
            })
            .collect(),
        absorption: rates
            .absorption_rates()
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.is_zero())
            .map(|(x, r)| AbsorptionEntry {
                from: space.label(x).to_string(),
                rate: r.approx(),
            })
            .collect(),
    }
}
