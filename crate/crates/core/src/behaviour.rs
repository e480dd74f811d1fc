//! Behaviour classes of the ethogram.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The six behaviour classes. Everything outside the five core behaviours is
/// merged into [`Behaviour::Other`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behaviour {
    DrinkingMilk,
    Grooming,
    Lying,
    Running,
    Walking,
    Other,
}

impl Behaviour {
    pub const ALL: [Behaviour; 6] = [
        Behaviour::DrinkingMilk,
        Behaviour::Grooming,
        Behaviour::Lying,
        Behaviour::Running,
        Behaviour::Walking,
        Behaviour::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Behaviour::DrinkingMilk => "drinking_milk",
            Behaviour::Grooming => "grooming",
            Behaviour::Lying => "lying",
            Behaviour::Running => "running",
            Behaviour::Walking => "walking",
            Behaviour::Other => "other",
        }
    }

    pub fn index(self) -> usize {
        Behaviour::ALL.iter().position(|&b| b == self).unwrap()
    }

    /// Map a free-form annotation label onto a class. Returns the class and
    /// whether the label was recognised (`false` means it fell back to
    /// `Other`).
    pub fn from_label(label: &str) -> (Behaviour, bool) {
        let norm: String = label
            .trim()
            .to_ascii_lowercase()
            .chars()
            .map(|c| if c == ' ' || c == '-' { '_' } else { c })
            .collect();
        match norm.as_str() {
            "drinking_milk" => (Behaviour::DrinkingMilk, true),
            "grooming" => (Behaviour::Grooming, true),
            "lying" => (Behaviour::Lying, true),
            "running" => (Behaviour::Running, true),
            "walking" => (Behaviour::Walking, true),
            "other" => (Behaviour::Other, true),
            _ => (Behaviour::Other, false),
        }
    }
}

impl fmt::Display for Behaviour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Behaviour {
    type Err = crate::Error;

    /// Strict parse: only the six canonical names are accepted.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match Behaviour::from_label(s) {
            (b, true) => Ok(b),
            _ => Err(crate::Error::Validation(format!("unknown behaviour '{s}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_normalise() {
        assert_eq!(Behaviour::from_label("Drinking milk"), (Behaviour::DrinkingMilk, true));
        assert_eq!(Behaviour::from_label(" LYING "), (Behaviour::Lying, true));
        assert_eq!(Behaviour::from_label("rising"), (Behaviour::Other, false));
    }

    #[test]
    fn index_matches_order() {
        for (i, b) in Behaviour::ALL.iter().enumerate() {
            assert_eq!(b.index(), i);
            assert_eq!(b.as_str().parse::<Behaviour>().unwrap(), *b);
        }
    }
}
