use crate::corpus::Language;

use super::RstError;

const EN_V1: &str = include_str!("../../data/relations_en.txt");
const RU_V1: &str = include_str!("../../data/relations_ru.txt");

pub const INVENTORY_VERSION: &str = "v1";

/// Ordered relation labels for one language.
///
/// The directed label space has `k = 2 * labels.len()` entries: index `r`
/// is relation `r` read from dependent to nucleus, index `labels.len() + r`
/// is the same relation seen from the opposite cell (inverted).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationInventory {
    pub language: Language,
    pub version: String,
    pub labels: Vec<String>,
}

impl RelationInventory {
    pub fn for_language(language: Language) -> RelationInventory {
        let text = match language {
            Language::En => EN_V1,
            Language::Ru => RU_V1,
        };
        RelationInventory {
            language,
            version: INVENTORY_VERSION.to_string(),
            labels: parse_labels(text),
        }
    }

    /// Number of directed labels.
    pub fn k(&self) -> usize {
        2 * self.labels.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Result<usize, RstError> {
        self.labels
            .iter()
            .position(|l| l.eq_ignore_ascii_case(label))
            .ok_or_else(|| RstError::UnknownRelation {
                label: label.to_string(),
                language: self.language,
            })
    }

    /// Display name of a directed label, with `^-1` marking inversion.
    pub fn directed_name(&self, directed: usize) -> String {
        let l = self.labels.len();
        if directed < l {
            self.labels[directed].clone()
        } else {
            format!("{}^-1", self.labels[directed - l])
        }
    }
}

fn parse_labels(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect()
}
