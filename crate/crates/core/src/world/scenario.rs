use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Instruction, SemanticScene, WorldError};

/// Authored truth for target descriptions: description -> intended object id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnswerKey {
    #[serde(default)]
    pub targets: BTreeMap<String, String>,
}

/// A scenario document: a scene plus the optional mode-1 extras
/// (instruction, target answer key, ground-truth traversability).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(flatten)]
    pub scene: SemanticScene,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruction: Option<Instruction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_key: Option<AnswerKey>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<BTreeMap<String, bool>>,
}

impl Scenario {
    pub fn from_scene(scene: SemanticScene) -> Self {
        Scenario {
            scene,
            instruction: None,
            answer_key: None,
            ground_truth: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, WorldError> {
        let scenario: Scenario = serde_json::from_str(text)?;
        scenario.scene.validate()?;
        if let Some(gt) = &scenario.ground_truth {
            for id in gt.keys() {
                if scenario.scene.object(id).is_none() {
                    return Err(WorldError::invalid(
                        "ground_truth",
                        format!("unknown object \"{id}\""),
                    ));
                }
            }
        }
        Ok(scenario)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, WorldError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| WorldError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

/// Loads and validates a scenario file, returning its scene.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<SemanticScene, WorldError> {
    Scenario::load(path).map(|s| s.scene)
}

/// Reads a `{object id: passable}` ground-truth file.
pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<BTreeMap<String, bool>, WorldError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| WorldError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}
