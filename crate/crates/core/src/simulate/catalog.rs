use serde::{Deserialize, Serialize};

use super::DeviceArchetype;
use crate::domain::DeviceIdentity;
use crate::error::{Error, Result};

const BUILTIN: &str = include_str!("../../data/catalog.json");

/// A JSON document listing archetypes, with free-form documentation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Catalog {
    #[serde(default)]
    pub about: String,
    pub archetypes: Vec<DeviceArchetype>,
}

impl Catalog {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Catalog = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for a in &self.archetypes {
            a.validate()?;
            if !seen.insert(a.identity()) {
                return Err(Error::invalid(format!("duplicate archetype {}", a.identity())));
            }
        }
        Ok(())
    }

    pub fn find(&self, id: &DeviceIdentity) -> Option<&DeviceArchetype> {
        self.archetypes.iter().find(|a| &a.identity() == id)
    }

    pub fn builtin() -> Self {
        Catalog::from_json(BUILTIN).expect("bundled catalog is valid")
    }
}

pub fn builtin_catalog() -> Vec<DeviceArchetype> {
    Catalog::builtin().archetypes
}
