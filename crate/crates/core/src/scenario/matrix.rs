//! The capability matrix: which platform capabilities each scenario needs.
//!
//! The matrix is data, not code — it ships as a JSON fixture so it can be
//! exported, diffed, and consumed by other tools — and every cell can carry
//! footnote markers for capabilities that are only conditionally required.
//! [`crate::scenario::validate`] turns those conditions into concrete
//! checks against a scenario configuration.

use super::ScenarioKind;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::OnceLock;

const MATRIX_JSON: &str = include_str!("../../data/requirement_matrix.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Requirement {
    pub id: String,
    pub group: String,
    pub title: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportCell {
    pub supported: bool,
    #[serde(default)]
    pub notes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequirementMatrix {
    pub requirements: Vec<Requirement>,
    pub scenarios: Vec<String>,
    pub footnotes: BTreeMap<String, String>,
    /// requirement id → scenario id → cell.
    pub support: BTreeMap<String, BTreeMap<String, SupportCell>>,
}

impl RequirementMatrix {
    pub fn cell(&self, requirement: &str, scenario: &str) -> Option<&SupportCell> {
        self.support.get(requirement)?.get(scenario)
    }

    pub fn requirement(&self, id: &str) -> Option<&Requirement> {
        self.requirements.iter().find(|r| r.id == id)
    }
}

/// The built-in matrix, parsed once.
pub fn requirement_matrix() -> &'static RequirementMatrix {
    static MATRIX: OnceLock<RequirementMatrix> = OnceLock::new();
    MATRIX.get_or_init(|| {
        let matrix: RequirementMatrix =
            serde_json::from_str(MATRIX_JSON).expect("bundled matrix parses");
        for req in &matrix.requirements {
            let row = matrix
                .support
                .get(&req.id)
                .unwrap_or_else(|| panic!("matrix row missing for {}", req.id));
            for scenario in &matrix.scenarios {
                let cell = row
                    .get(scenario)
                    .unwrap_or_else(|| panic!("matrix cell missing: {} / {scenario}", req.id));
                for note in &cell.notes {
                    assert!(
                        matrix.footnotes.contains_key(&note.to_string()),
                        "undefined footnote {note}"
                    );
                }
            }
        }
        matrix
    })
}

/// Capabilities a scenario kind requires: `(requirement, cell)` for every
/// supported cell in its column.
pub fn required_capabilities(kind: ScenarioKind) -> Vec<(&'static Requirement, &'static SupportCell)> {
    let matrix = requirement_matrix();
    matrix
        .requirements
        .iter()
        .filter_map(|req| {
            let cell = matrix.cell(&req.id, kind.id())?;
            cell.supported.then_some((req, cell))
        })
        .collect()
}

/// Plain-text rendering of the matrix with short column labels.
pub fn render_matrix() -> String {
    let matrix = requirement_matrix();
    let short = |scenario: &str| -> String {
        let head = scenario.split('_').next().unwrap_or(scenario);
        match scenario {
            "S4_MessageBus" => "S4-MB".to_string(),
            "S4_ProcessManager" => "S4-PM".to_string(),
            _ => head.to_string(),
        }
    };
    let mut out = String::new();
    let title_width = matrix
        .requirements
        .iter()
        .map(|r| r.title.len() + r.id.len() + 3)
        .max()
        .unwrap_or(20);
    let col_width = 8;
    let _ = write!(out, "{:title_width$}", "Requirement");
    for scenario in &matrix.scenarios {
        let _ = write!(out, " {:>col_width$}", short(scenario));
    }
    out.push('\n');
    for req in &matrix.requirements {
        let label = format!("{} {}", req.id, req.title);
        let _ = write!(out, "{label:title_width$}");
        for scenario in &matrix.scenarios {
            let cell = matrix.cell(&req.id, scenario).expect("complete matrix");
            let text = if cell.supported {
                let notes: String = cell.notes.iter().map(|n| format!("({n})")).collect();
                format!("x{notes}")
            } else {
                "-".to_string()
            };
            let _ = write!(out, " {text:>col_width$}");
        }
        out.push('\n');
    }
    out.push('\n');
    for scenario in &matrix.scenarios {
        let _ = writeln!(out, "{:>6} = {scenario}", short(scenario));
    }
    out.push('\n');
    for (note, text) in &matrix.footnotes {
        let _ = writeln!(out, "({note}) {text}");
    }
    out
}
