use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered phoneme symbols; the CTC blank is the extra class appended after them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhonemeInventory {
    symbols: Vec<String>,
}

/// Reserved display name of the blank class. Never a member of the inventory.
pub const BLANK_SYMBOL: &str = "<blank>";

impl PhonemeInventory {
    pub fn new(symbols: Vec<String>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::Config("phoneme inventory is empty".into()));
        }
        let mut seen = BTreeSet::new();
        for s in &symbols {
            if s == BLANK_SYMBOL {
                return Err(Error::Config(format!("'{BLANK_SYMBOL}' is reserved for the blank class")));
            }
            if !seen.insert(s.as_str()) {
                return Err(Error::Config(format!("duplicate phoneme symbol '{s}'")));
            }
        }
        Ok(Self { symbols })
    }

    /// Sorted set of every symbol in `sequences`.
    pub fn from_sequences<'a>(sequences: impl IntoIterator<Item = &'a [String]>) -> Result<Self> {
        let set: BTreeSet<&String> = sequences.into_iter().flatten().collect();
        Self::new(set.into_iter().cloned().collect())
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    /// Number of phonemes `P` (blank excluded).
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn blank_id(&self) -> usize {
        self.symbols.len()
    }

    /// `P + 1`.
    pub fn num_classes(&self) -> usize {
        self.symbols.len() + 1
    }

    pub fn id_of(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol)
    }

    pub fn symbol(&self, id: usize) -> &str {
        self.symbols.get(id).map(String::as_str).unwrap_or(BLANK_SYMBOL)
    }

    pub fn encode(&self, phonemes: &[String]) -> Result<Vec<usize>> {
        phonemes
            .iter()
            .map(|p| {
                self.id_of(p)
                    .ok_or_else(|| Error::Contract(format!("phoneme '{p}' is not in the inventory")))
            })
            .collect()
    }
}
