//! Problem files: a single TOML document describing a space, its named
//! variables, and its named sigma-algebras.
//!
//! Probabilities are accepted as unnormalized weights. Index lists are
//! 0-based. A sigma-algebra is given either by its atoms or by a family of
//! generator events:
//!
//! ```toml
//! outcomes = ["a", "b", "c", "d"]      # optional display labels
//! probabilities = [1, 1, 1, 1]
//!
//! [variables]
//! x = [1.0, 2.0, 3.0, 4.0]
//!
//! [sigma_algebras.pairs]
//! atoms = [[0, 1], [2, 3]]
//!
//! [sigma_algebras.halves]
//! generators = [[0, 1]]
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use condexp::{Event, ProbabilitySpace, RandomVariable, SigmaAlgebra};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcomes: Option<Vec<String>>,
    pub probabilities: Vec<f64>,
    #[serde(default)]
    pub variables: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub sigma_algebras: BTreeMap<String, SigmaSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum SigmaSpec {
    Atoms { atoms: Vec<Vec<usize>> },
    Generators { generators: Vec<Vec<usize>> },
}

impl ProblemFile {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("cannot parse {}: {e}", path.display()))
    }

    pub fn space(&self) -> condexp::Result<ProbabilitySpace> {
        ProbabilitySpace::with_labels(self.probabilities.clone(), self.outcomes.clone())
    }

    pub fn variable(&self, name: &str) -> Result<RandomVariable, String> {
        let values = self
            .variables
            .get(name)
            .ok_or_else(|| format!("unknown variable `{name}`"))?;
        RandomVariable::new(values.clone()).map_err(|e| format!("variable `{name}`: {e}"))
    }

    pub fn sigma(&self, name: &str) -> Result<SigmaAlgebra, String> {
        let spec = self
            .sigma_algebras
            .get(name)
            .ok_or_else(|| format!("unknown sigma-algebra `{name}`"))?;
        let size = self.probabilities.len();
        let built = match spec {
            SigmaSpec::Atoms { atoms } => SigmaAlgebra::from_atoms(size, atoms.clone()),
            SigmaSpec::Generators { generators } => {
                let events: Vec<Event> = generators
                    .iter()
                    .map(|g| Event::new(g.iter().copied()))
                    .collect();
                SigmaAlgebra::generate(size, &events)
            }
        };
        built.map_err(|e| format!("sigma-algebra `{name}`: {e}"))
    }

    /// A copy with the probabilities replaced by the normalized weights, so
    /// that re-parsing the emitted report reproduces the space bit for bit.
    pub fn normalized(&self, space: &ProbabilitySpace) -> ProblemFile {
        ProblemFile {
            outcomes: self.outcomes.clone(),
            probabilities: space.weights().to_vec(),
            variables: self.variables.clone(),
            sigma_algebras: self.sigma_algebras.clone(),
        }
    }
}
