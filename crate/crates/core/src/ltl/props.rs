//! Named property files: one `name: formula` per line.

use super::formula::{parse_ltl, Formula};
use crate::error::PropertyFileError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Property {
    pub name: String,
    pub text: String,
    pub formula: Formula,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PropertySet {
    pub properties: Vec<Property>,
}

/// The shipped properties: starvation freedom for each side and deadlock
/// freedom, each under a strong-fairness premise.
pub const DEFAULT_PROPERTIES: &str = "\
consu_starv: []<>consumer_at_want -> []<>cs_c
produ_starv: []<>producer_at_want -> []<>cs_p
deadlock_free: []<>(consumer_at_want && producer_at_want) -> []<>(cs_c || cs_p)
";

impl PropertySet {
    /// Parses a property file. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<PropertySet, PropertyFileError> {
        let mut set = PropertySet::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let raw = raw.trim();
            if raw.is_empty() || raw.starts_with('#') {
                continue;
            }
            let (name, body) = raw
                .split_once(':')
                .ok_or(PropertyFileError::Syntax { line })?;
            let name = name.trim();
            let valid = !name.is_empty()
                && name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
            if !valid {
                return Err(PropertyFileError::Syntax { line });
            }
            let formula =
                parse_ltl(body).map_err(|source| PropertyFileError::Formula { line, source })?;
            if set.get(name).is_ok() {
                return Err(PropertyFileError::Duplicate(name.to_string()));
            }
            set.properties.push(Property {
                name: name.to_string(),
                text: body.trim().to_string(),
                formula,
            });
        }
        Ok(set)
    }

    pub fn defaults() -> PropertySet {
        PropertySet::parse(DEFAULT_PROPERTIES).expect("default properties parse")
    }

    pub fn get(&self, name: &str) -> Result<&Property, PropertyFileError> {
        self.properties
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| PropertyFileError::Unknown(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.properties.iter().map(|p| p.name.as_str())
    }
}
