//! Deployment scenarios: strict JSON ingestion, per-node evaluation, and
//! CSV/JSON emission for reports and sweep tables.

use std::collections::HashSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::budget::{link_margin, required_tx_power, RadioConfig, SolveError};
use crate::error::ModelError;
use crate::propagation::{LinkGeometry, PropagationModel, Regime, Validity};
use crate::sweep::SweepTable;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("domain error at {}: {message}", DomainLocation(.node.as_deref(), .field))]
    Domain {
        node: Option<String>,
        field: String,
        message: String,
    },
}

struct DomainLocation<'a>(Option<&'a str>, &'a str);

impl fmt::Display for DomainLocation<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(id) => write!(f, "node {id:?} field {}", self.1),
            None => f.write_str(self.1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmitError {
    #[error("nothing to emit")]
    EmptyInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Node {
    pub id: String,
    pub d_km: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_f_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub frequency_mhz: f64,
    pub base_height_m: f64,
    pub radio: RadioConfig,
    pub nodes: Vec<Node>,
}

impl Scenario {
    /// Checks every invariant that the type system does not.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let domain = |node: Option<&str>, field: &str, message: String| ScenarioError::Domain {
            node: node.map(str::to_string),
            field: field.to_string(),
            message,
        };
        if !(self.frequency_mhz > 0.0 && self.frequency_mhz.is_finite()) {
            return Err(domain(
                None,
                "frequency_mhz",
                format!("frequency must be positive, got {}", self.frequency_mhz),
            ));
        }
        if !(self.base_height_m > 0.0 && self.base_height_m.is_finite()) {
            return Err(domain(
                None,
                "base_height_m",
                format!("base height must be positive, got {}", self.base_height_m),
            ));
        }
        if self.radio.required_margin_db < 0.0 {
            return Err(domain(
                None,
                "radio.required_margin_db",
                format!("margin must be >= 0, got {}", self.radio.required_margin_db),
            ));
        }
        if let Err(SolveError::InvalidRadio(message)) = self.radio.validate() {
            return Err(domain(None, "radio", message));
        }

        let mut seen = HashSet::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if !seen.insert(node.id.as_str()) {
                return Err(ScenarioError::Schema {
                    path: format!("nodes[{i}].id"),
                    message: format!("duplicate node id {:?}", node.id),
                });
            }
            match (node.h_f_m, node.delta) {
                (Some(_), Some(_)) => {
                    return Err(ScenarioError::Schema {
                        path: format!("nodes[{i}]"),
                        message: format!(
                            "node {:?} gives both h_f_m and delta; exactly one is allowed",
                            node.id
                        ),
                    })
                }
                (None, None) => {
                    return Err(ScenarioError::Schema {
                        path: format!("nodes[{i}]"),
                        message: format!("node {:?} needs one of h_f_m or delta", node.id),
                    })
                }
                _ => {}
            }
            let id = Some(node.id.as_str());
            if !(node.d_km > 0.0 && node.d_km.is_finite()) {
                return Err(domain(
                    id,
                    "d_km",
                    format!("distance must be positive, got {}", node.d_km),
                ));
            }
            if let Some(h_f_m) = node.h_f_m {
                if !(0.0..=self.base_height_m).contains(&h_f_m) {
                    return Err(domain(
                        id,
                        "h_f_m",
                        format!("foliage height {h_f_m} out of [0,{}] m", self.base_height_m),
                    ));
                }
            }
            if let Some(delta) = node.delta {
                if !(0.0..=1.0).contains(&delta) {
                    return Err(domain(id, "delta", format!("delta out of [0,1]: {delta}")));
                }
            }
        }
        Ok(())
    }

    fn geometry(&self, node: &Node) -> LinkGeometry {
        match node.h_f_m {
            Some(h_f_m) => LinkGeometry::with_heights(node.d_km, self.base_height_m, h_f_m),
            None => LinkGeometry::with_delta(node.d_km, node.delta.unwrap_or(f64::NAN)),
        }
    }
}

/// Parses and fully validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
    let scenario: Scenario = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        ScenarioError::Schema {
            path,
            message: e.into_inner().to_string(),
        }
    })?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn emit_scenario(scenario: &Scenario) -> String {
    serde_json::to_string_pretty(scenario).expect("scenario serializes")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeReport {
    pub id: String,
    pub delta: f64,
    pub d_f_m: f64,
    pub d_fsp_m: f64,
    pub l_foliage_db: f64,
    pub l_fsp_db: f64,
    pub l_total_db: f64,
    pub regime: Regime,
    pub validity: Validity,
    pub margin_db: f64,
    pub required_tx_dbm: f64,
    pub link_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("node {id:?}: {error}")]
pub struct NodeFailure {
    pub id: String,
    pub error: ModelError,
}

pub type NodeResult = Result<NodeReport, NodeFailure>;

pub fn evaluate_scenario(scenario: &Scenario) -> Vec<NodeResult> {
    evaluate_scenario_with(&PropagationModel::default(), scenario)
}

/// One entry per node, in input order. A node that cannot be evaluated
/// yields a [`NodeFailure`] without affecting the others.
pub fn evaluate_scenario_with(model: &PropagationModel, scenario: &Scenario) -> Vec<NodeResult> {
    let radio = &scenario.radio;
    scenario
        .nodes
        .par_iter()
        .map(|node| {
            let b = model
                .total_loss(&scenario.geometry(node), scenario.frequency_mhz)
                .map_err(|error| NodeFailure {
                    id: node.id.clone(),
                    error,
                })?;
            let margin_db = link_margin(radio, b.l_total_db);
            Ok(NodeReport {
                id: node.id.clone(),
                delta: b.split.delta,
                d_f_m: b.split.d_f_m,
                d_fsp_m: b.split.d_fsp_m,
                l_foliage_db: b.l_foliage_db,
                l_fsp_db: b.l_fsp_db,
                l_total_db: b.l_total_db,
                regime: b.foliage.regime,
                validity: b.foliage.validity,
                margin_db,
                required_tx_dbm: required_tx_power(radio, b.l_total_db),
                link_ok: margin_db >= radio.required_margin_db,
            })
        })
        .collect()
}

/// Tabular data with a fixed CSV header.
pub trait CsvTable {
    fn header(&self) -> &'static [&'static str];
    fn records(&self) -> Vec<Vec<String>>;
}

pub const SWEEP_COLUMNS: [&str; 9] = [
    "x",
    "delta",
    "d_f_m",
    "d_fsp_m",
    "l_foliage_db",
    "l_fsp_db",
    "l_total_db",
    "regime",
    "validity",
];

pub const REPORT_COLUMNS: [&str; 12] = [
    "id",
    "delta",
    "d_f_m",
    "d_fsp_m",
    "l_foliage_db",
    "l_fsp_db",
    "l_total_db",
    "regime",
    "validity",
    "margin_db",
    "required_tx_dbm",
    "link_ok",
];

impl CsvTable for SweepTable {
    fn header(&self) -> &'static [&'static str] {
        &SWEEP_COLUMNS
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    r.x.to_string(),
                    r.delta.to_string(),
                    r.d_f_m.to_string(),
                    r.d_fsp_m.to_string(),
                    r.l_foliage_db.to_string(),
                    r.l_fsp_db.to_string(),
                    r.l_total_db.to_string(),
                    r.regime.to_string(),
                    r.validity.to_string(),
                ]
            })
            .collect()
    }
}

impl CsvTable for [NodeReport] {
    fn header(&self) -> &'static [&'static str] {
        &REPORT_COLUMNS
    }

    fn records(&self) -> Vec<Vec<String>> {
        self.iter()
            .map(|r| {
                vec![
                    r.id.clone(),
                    r.delta.to_string(),
                    r.d_f_m.to_string(),
                    r.d_fsp_m.to_string(),
                    r.l_foliage_db.to_string(),
                    r.l_fsp_db.to_string(),
                    r.l_total_db.to_string(),
                    r.regime.to_string(),
                    r.validity.to_string(),
                    r.margin_db.to_string(),
                    r.required_tx_dbm.to_string(),
                    r.link_ok.to_string(),
                ]
            })
            .collect()
    }
}

/// Header plus one LF-terminated line per record. Floats use Rust's
/// shortest round-tripping representation.
pub fn emit_csv<T: CsvTable + ?Sized>(table: &T) -> Result<String, EmitError> {
    let records = table.records();
    if records.is_empty() {
        return Err(EmitError::EmptyInput);
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(table.header()).expect("in-memory write");
    for rec in &records {
        w.write_record(rec).expect("in-memory write");
    }
    let bytes = w.into_inner().expect("in-memory flush");
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn emit_json(reports: &[NodeReport]) -> String {
    serde_json::to_string_pretty(reports).expect("reports serialize")
}
