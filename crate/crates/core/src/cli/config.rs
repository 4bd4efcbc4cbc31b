//! JSON configuration: heights, factors, domain indices and an optional partition.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bilinear::BilinearRfis;
use crate::grid::Cell;
use crate::partition::Partition;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub z: Vec<Vec<f64>>,
    pub s: Vec<Vec<f64>>,
    pub xprime_idx: Vec<usize>,
    pub yprime_idx: Vec<usize>,
    /// Parts as lists of 1-based `[i, j]` cell pairs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<Vec<Vec<[usize; 2]>>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },
}

fn invalid(field: &str, message: impl ToString) -> ConfigError {
    ConfigError::Validation {
        field: field.to_string(),
        message: message.to_string(),
    }
}

#[derive(Clone, Debug)]
pub struct RfisConfig {
    pub document: ConfigDocument,
    pub rfis: BilinearRfis,
    pub partition: Option<Partition>,
}

impl RfisConfig {
    /// The configured partition, or the single part holding every cell.
    pub fn partition_or_whole(&self) -> Partition {
        self.partition
            .clone()
            .unwrap_or_else(|| Partition::whole(self.rfis.n(), self.rfis.m()))
    }
}

pub fn parse_config(text: &str) -> Result<RfisConfig, ConfigError> {
    let document: ConfigDocument = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    validate_document(document)
}

pub fn validate_document(document: ConfigDocument) -> Result<RfisConfig, ConfigError> {
    let n = document.n;
    if document.z.len() != n + 1 {
        return Err(invalid("z", format!("expected {} rows for N = {n}, found {}", n + 1, document.z.len())));
    }
    if let Some((p, row)) = document.z.iter().enumerate().find(|(_, r)| r.len() != n + 1) {
        return Err(invalid("z", format!("row {p} has {} entries, expected {}", row.len(), n + 1)));
    }
    if document.s.len() != n + 1 {
        return Err(invalid("s", format!("expected {} rows for N = {n}, found {}", n + 1, document.s.len())));
    }
    if let Some((p, row)) = document.s.iter().enumerate().find(|(_, r)| r.len() != n + 1) {
        return Err(invalid("s", format!("row {p} has {} entries, expected {}", row.len(), n + 1)));
    }
    for (field, idx) in [("xprime_idx", &document.xprime_idx), ("yprime_idx", &document.yprime_idx)] {
        if idx.len() != n + 1 {
            return Err(invalid(field, format!("expected {} entries, found {}", n + 1, idx.len())));
        }
    }
    let rfis = BilinearRfis::uniform(&document.z, &document.s, &document.xprime_idx, &document.yprime_idx)
        .map_err(|e| invalid("rfis", e))?;
    if document.k < 2 {
        return Err(invalid("K", "refinement ratio must be at least 2"));
    }
    match rfis.ratio() {
        Some(k) if k == document.k => {}
        Some(k) => return Err(invalid("K", format!("domains give ratio {k}, config declares {}", document.k))),
        None => {
            let failures: Vec<String> = rfis.homogeneity().failures.iter().map(ToString::to_string).collect();
            return Err(invalid("xprime_idx", format!("grid sampling conditions fail: {}", failures.join("; "))));
        }
    }
    let partition = match &document.partition {
        None => None,
        Some(parts) => {
            let cells: Vec<Vec<Cell>> = parts
                .iter()
                .map(|part| part.iter().map(|&[i, j]| Cell::new(i, j)).collect())
                .collect();
            Some(Partition::new(&cells, n, n).map_err(|e| invalid("partition", e))?)
        }
    };
    Ok(RfisConfig {
        document,
        rfis,
        partition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::example;

    #[test]
    fn bundled_fixtures_parse() {
        let c = parse_config(example::CORRECTED_JSON).unwrap();
        assert_eq!(c.rfis.ratio(), Some(2));
        assert_eq!(c.partition.as_ref().unwrap().len(), 3);
        assert_eq!(c.document.z, example::heights());
        let o = parse_config(example::ORIGINAL_JSON).unwrap();
        assert_eq!(o.document.s, example::factors_original());
    }

    #[test]
    fn truncated_document_is_a_parse_error() {
        let text = &example::CORRECTED_JSON[..120];
        assert!(matches!(parse_config(text), Err(ConfigError::Parse { .. })));
        let err = parse_config("{\n  \"N\": 4,\n  \"K\": x\n}").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn validation_errors_name_the_field() {
        let mut doc: ConfigDocument = serde_json::from_str(example::CORRECTED_JSON).unwrap();
        doc.k = 3;
        assert!(matches!(validate_document(doc.clone()), Err(ConfigError::Validation { field, .. }) if field == "K"));
        doc.k = 2;
        doc.s[1][1] = 1.5;
        assert!(matches!(validate_document(doc.clone()), Err(ConfigError::Validation { field, .. }) if field == "rfis"));
        doc.s[1][1] = 0.45;
        doc.z.pop();
        assert!(matches!(validate_document(doc.clone()), Err(ConfigError::Validation { field, .. }) if field == "z"));
    }

    #[test]
    fn unknown_fields_and_bad_partitions_are_rejected() {
        let text = example::CORRECTED_JSON.replacen("\"N\"", "\"extra\": 1, \"N\"", 1);
        assert!(matches!(parse_config(&text), Err(ConfigError::Parse { .. })));
        let mut doc: ConfigDocument = serde_json::from_str(example::CORRECTED_JSON).unwrap();
        doc.partition.as_mut().unwrap()[0].push([3, 1]);
        assert!(matches!(validate_document(doc), Err(ConfigError::Validation { field, .. }) if field == "partition"));
    }
}
