use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::store::write_atomic;
use super::GenerationError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeStatus {
    Generated,
    Rejected,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationOutcome {
    pub region_code: String,
    pub status: OutcomeStatus,
    /// SHA-256 of the stored PNG; present iff `status` is `Generated`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
    pub provider_id: String,
    pub prompt: String,
    pub timestamp: String,
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_detail: Option<String>,
}

/// Record of one generation run: at most one outcome per region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub provider_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub image_size: u32,
    pub outcomes: BTreeMap<String, GenerationOutcome>,
}

impl Manifest {
    pub fn new(provider_id: impl Into<String>, seed: Option<u64>, image_size: u32) -> Self {
        Self {
            provider_id: provider_id.into(),
            seed,
            image_size,
            outcomes: BTreeMap::new(),
        }
    }

    pub fn outcome(&self, code: &str) -> Option<&GenerationOutcome> {
        self.outcomes.get(code)
    }

    pub fn record(&mut self, outcome: GenerationOutcome) {
        self.outcomes.insert(outcome.region_code.clone(), outcome);
    }

    pub fn codes_with(&self, status: OutcomeStatus) -> impl Iterator<Item = &str> {
        self.outcomes
            .values()
            .filter(move |o| o.status == status)
            .map(|o| o.region_code.as_str())
    }

    /// Generated / Rejected / Failed counts.
    pub fn tallies(&self) -> (usize, usize, usize) {
        let count = |s| self.codes_with(s).count();
        (
            count(OutcomeStatus::Generated),
            count(OutcomeStatus::Rejected),
            count(OutcomeStatus::Failed),
        )
    }

    /// Canonical JSON: sorted keys, two-space indentation, trailing newline.
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("manifest serializes");
        let mut out = serde_json::to_string_pretty(&value).expect("value serializes");
        out.push('\n');
        out
    }

    pub fn from_json(json: &str) -> Result<Self, GenerationError> {
        let m: Manifest = serde_json::from_str(json).map_err(GenerationError::Manifest)?;
        for (code, o) in &m.outcomes {
            if code != &o.region_code {
                return Err(GenerationError::Invalid(format!(
                    "manifest key `{code}` holds outcome for `{}`",
                    o.region_code
                )));
            }
            if (o.status == OutcomeStatus::Generated) != o.image_ref.is_some() {
                return Err(GenerationError::Invalid(format!(
                    "outcome for `{code}` has status {:?} but image_ref {:?}",
                    o.status, o.image_ref
                )));
            }
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self, GenerationError> {
        let text = std::fs::read_to_string(path).map_err(|source| GenerationError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), GenerationError> {
        write_atomic(path, self.to_json().as_bytes()).map_err(|source| GenerationError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}
